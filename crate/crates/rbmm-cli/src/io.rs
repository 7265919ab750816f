//! Synthetic-data files and float formatting.
//!
//! Binary layout: the 8 bytes `RBMMDAT1`, a little-endian `u32` rank, one
//! `u32` per dimension, then the `f64` payload in row-major order. The CSV
//! form has a header `i0,...,i{r-1},value` and one row per entry, also in
//! row-major order.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rbmm::Mat;

pub const MAGIC: &[u8; 8] = b"RBMMDAT1";

#[derive(Clone, Debug, PartialEq)]
pub struct Array {
    pub dims: Vec<usize>,
    /// Row-major.
    pub data: Vec<f64>,
}

impl Array {
    pub fn new(dims: Vec<usize>, data: Vec<f64>) -> Result<Self, String> {
        let n: usize = dims.iter().product();
        if dims.is_empty() || n != data.len() {
            return Err(format!("{} values do not fill dims {:?}", data.len(), dims));
        }
        Ok(Array { dims, data })
    }

    pub fn from_mat(m: &Mat) -> Self {
        let (r, c) = m.shape();
        let data = (0..r).flat_map(|i| (0..c).map(move |j| m[(i, j)])).collect();
        Array { dims: vec![r, c], data }
    }

    pub fn vector(v: &[f64]) -> Self {
        Array {
            dims: vec![v.len()],
            data: v.to_vec(),
        }
    }

    pub fn to_mat(&self) -> Result<Mat, String> {
        match self.dims[..] {
            [r, c] => Ok(Mat::from_row_slice(r, c, &self.data)),
            [n] => Ok(Mat::from_column_slice(n, 1, &self.data)),
            _ => Err(format!("expected a matrix, found dims {:?}", self.dims)),
        }
    }
}

/// 17 significant digits, enough to round-trip any `f64`.
pub fn fmt_f64(v: f64) -> String {
    format!("{:.16e}", v)
}

pub fn encode_binary(a: &Array) -> Vec<u8> {
    let mut out = Vec::with_capacity(12 + 4 * a.dims.len() + 8 * a.data.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(a.dims.len() as u32).to_le_bytes());
    for &d in &a.dims {
        out.extend_from_slice(&(d as u32).to_le_bytes());
    }
    for &v in &a.data {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode_binary(bytes: &[u8]) -> Result<Array, String> {
    let rest = bytes.strip_prefix(MAGIC.as_slice()).ok_or("missing RBMMDAT1 magic")?;
    let mut words = rest.chunks_exact(4);
    let mut u32_at = || -> Result<usize, String> {
        let w = words.next().ok_or("truncated header")?;
        Ok(u32::from_le_bytes(w.try_into().unwrap()) as usize)
    };
    let rank = u32_at()?;
    let dims = (0..rank).map(|_| u32_at()).collect::<Result<Vec<_>, _>>()?;
    let payload = &rest[4 * (rank + 1)..];
    let n: usize = dims.iter().product();
    if payload.len() != 8 * n {
        return Err(format!("payload holds {} bytes, dims {:?} need {}", payload.len(), dims, 8 * n));
    }
    let data = payload
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Array::new(dims, data)
}

pub fn encode_csv(a: &Array) -> String {
    let mut s = String::new();
    for k in 0..a.dims.len() {
        let _ = write!(s, "i{k},");
    }
    s.push_str("value\n");
    let mut idx = vec![0usize; a.dims.len()];
    for &v in &a.data {
        for i in &idx {
            let _ = write!(s, "{i},");
        }
        s.push_str(&fmt_f64(v));
        s.push('\n');
        for k in (0..idx.len()).rev() {
            idx[k] += 1;
            if idx[k] < a.dims[k] {
                break;
            }
            idx[k] = 0;
        }
    }
    s
}

/// Reads the CSV form. Entries may come in any order; the dims are the
/// largest index plus one along each axis.
pub fn decode_csv(text: &str) -> Result<Array, String> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines.next().ok_or("empty CSV")?;
    let cols: Vec<&str> = header.split(',').map(str::trim).collect();
    if cols.last() != Some(&"value") || cols.len() < 2 {
        return Err("CSV header must be i0,...,value".into());
    }
    let rank = cols.len() - 1;
    let mut entries = Vec::new();
    let mut dims = vec![0usize; rank];
    for (n, line) in lines.enumerate() {
        let f: Vec<&str> = line.split(',').map(str::trim).collect();
        if f.len() != rank + 1 {
            return Err(format!("row {} has {} fields, expected {}", n + 2, f.len(), rank + 1));
        }
        let idx = f[..rank]
            .iter()
            .map(|s| s.parse::<usize>().map_err(|e| format!("row {}: {e}", n + 2)))
            .collect::<Result<Vec<_>, _>>()?;
        let v: f64 = f[rank].parse().map_err(|e| format!("row {}: {e}", n + 2))?;
        for (d, &i) in dims.iter_mut().zip(&idx) {
            *d = (*d).max(i + 1);
        }
        entries.push((idx, v));
    }
    let total: usize = dims.iter().product();
    if entries.len() != total {
        return Err(format!("{} entries for dims {:?}", entries.len(), dims));
    }
    let mut data = vec![f64::NAN; total];
    for (idx, v) in entries {
        let flat = idx.iter().zip(&dims).fold(0, |acc, (&i, &d)| acc * d + i);
        data[flat] = v;
    }
    if data.iter().any(|v| v.is_nan()) {
        return Err("duplicate CSV entries".into());
    }
    Array::new(dims, data)
}

pub fn write_array(path: &Path, a: &Array, csv: bool) -> std::io::Result<()> {
    if csv {
        fs::write(path, encode_csv(a))
    } else {
        fs::write(path, encode_binary(a))
    }
}

/// Reads either form, telling them apart by the magic bytes.
pub fn read_array(path: &Path) -> Result<Array, String> {
    let bytes = fs::read(path).map_err(|e| format!("{}: {e}", path.display()))?;
    if bytes.starts_with(MAGIC) {
        decode_binary(&bytes)
    } else {
        let text = String::from_utf8(bytes).map_err(|_| format!("{}: neither RBMMDAT1 nor UTF-8 CSV", path.display()))?;
        decode_csv(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn binary_layout() {
        let a = Array::new(vec![1, 2], vec![1.5, -2.0]).unwrap();
        let b = encode_binary(&a);
        assert_eq!(&b[..8], b"RBMMDAT1");
        assert_eq!(&b[8..12], &2u32.to_le_bytes());
        assert_eq!(&b[12..20], &[1, 0, 0, 0, 2, 0, 0, 0]);
        assert_eq!(&b[20..28], &1.5f64.to_le_bytes());
        assert_eq!(b.len(), 36);
        assert_eq!(decode_binary(&b).unwrap(), a);
        assert!(decode_binary(&b[..30]).is_err());
        assert!(decode_binary(b"RBMMDAT2").is_err());
    }

    #[test]
    fn csv_round_trip() {
        let a = Array::new(vec![2, 1, 3], (0..6).map(|v| v as f64 / 3.0).collect()).unwrap();
        let text = encode_csv(&a);
        assert!(text.starts_with("i0,i1,i2,value\n0,0,0,"));
        assert_eq!(decode_csv(&text).unwrap(), a);
    }

    #[test]
    fn matrix_is_row_major() {
        let m = Mat::from_row_slice(2, 3, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let a = Array::from_mat(&m);
        assert_eq!(a.data, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        assert_eq!(a.to_mat().unwrap(), m);
    }

    #[test]
    fn seventeen_digits_round_trip() {
        for v in [0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, f64::MIN_POSITIVE] {
            let s = fmt_f64(v);
            assert_eq!(s.parse::<f64>().unwrap(), v);
            assert_eq!(s.split('e').next().unwrap().replace(['-', '.'], "").len(), 17);
        }
    }
}
