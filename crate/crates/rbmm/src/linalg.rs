//! Dense kernels shared by the manifolds: sorted thin SVD, symmetric
//! eigen-functions and the two projections built on top of them.

use alloc::vec::Vec;
use core::cmp::Ordering;

#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{degenerate, Error, Result};
use crate::Mat;
use nalgebra::DVector;

/// Eigenvalues of SPD inputs must exceed this floor.
pub const EIG_FLOOR: f64 = 1e-12;

pub fn sym(a: &Mat) -> Mat {
    (a + a.transpose()) * 0.5
}

pub fn frob_dot(a: &Mat, b: &Mat) -> f64 {
    a.dot(b)
}

pub fn all_finite(a: &Mat) -> bool {
    a.iter().all(|v| v.is_finite())
}

/// Thin SVD with singular values in nonincreasing order.
#[derive(Clone, Debug)]
pub struct Svd {
    pub u: Mat,
    pub s: Vec<f64>,
    pub v: Mat,
}

/// Thin SVD, sorted descending. The first nonzero entry of every left singular
/// vector is made nonnegative (the matching right vector flips with it).
pub fn svd(a: &Mat) -> Result<Svd> {
    if !all_finite(a) {
        return Err(degenerate("non-finite entries in SVD input"));
    }
    let (m, n) = a.shape();
    let p = m.min(n);
    if p == 0 {
        return Err(degenerate("empty matrix"));
    }
    // nalgebra 0.33 sometimes returns a wrong factorization of exactly
    // rank-deficient input (both A and Aᵀ), so its result is verified.
    let (uu, sv, vt) = match checked_svd(a) {
        Some(f) => f,
        None => jacobi_svd(a)?,
    };
    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&i, &j| sv[j].partial_cmp(&sv[i]).unwrap_or(Ordering::Equal));

    let mut u = Mat::zeros(m, p);
    let mut v = Mat::zeros(n, p);
    let mut s = Vec::with_capacity(p);
    for (dst, &src) in order.iter().enumerate() {
        s.push(sv[src]);
        let mut sign = 1.0;
        for i in 0..m {
            let x = uu[(i, src)];
            if x != 0.0 {
                if x < 0.0 {
                    sign = -1.0;
                }
                break;
            }
        }
        for i in 0..m {
            u[(i, dst)] = sign * uu[(i, src)];
        }
        for j in 0..n {
            v[(j, dst)] = sign * vt[(src, j)];
        }
    }
    Ok(Svd { u, s, v })
}

pub const SVD_CHECK_TOL: f64 = 1e-10;

fn factorization_ok(a: &Mat, u: &Mat, s: &DVector<f64>, vt: &Mat) -> bool {
    let p = s.len();
    let scale = a.norm().max(f64::MIN_POSITIVE);
    let rec = (u * Mat::from_diagonal(s) * vt - a).norm() / scale;
    let ou = (u.transpose() * u - Mat::identity(p, p)).norm();
    let ov = (vt * vt.transpose() - Mat::identity(p, p)).norm();
    rec <= SVD_CHECK_TOL && ou <= SVD_CHECK_TOL && ov <= SVD_CHECK_TOL
}

fn checked_svd(a: &Mat) -> Option<(Mat, DVector<f64>, Mat)> {
    let dec = a.clone().svd(true, true);
    let (u, vt) = (dec.u?, dec.v_t?);
    let s = dec.singular_values;
    factorization_ok(a, &u, &s, &vt).then_some((u, s, vt))
}

pub const JACOBI_MAX_SWEEPS: usize = 80;

/// One-sided (Hestenes) Jacobi SVD. Slower than nalgebra's but accurate on
/// rank-deficient input. Returns thin factors, unsorted.
pub fn jacobi_svd(a: &Mat) -> Result<(Mat, DVector<f64>, Mat)> {
    let (m, n) = a.shape();
    if m < n {
        let (v, s, ut) = jacobi_svd(&a.transpose())?;
        return Ok((ut.transpose(), s, v.transpose()));
    }
    let mut w = a.clone();
    let mut v = Mat::identity(n, n);
    let mut converged = false;
    for _ in 0..JACOBI_MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let alpha = w.column(p).norm_squared();
                let beta = w.column(q).norm_squared();
                let gamma = w.column(p).dot(&w.column(q));
                if gamma == 0.0 || gamma.abs() <= f64::EPSILON * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let sn = c * t;
                for mat in [&mut w, &mut v] {
                    for i in 0..mat.nrows() {
                        let (x, y) = (mat[(i, p)], mat[(i, q)]);
                        mat[(i, p)] = c * x - sn * y;
                        mat[(i, q)] = sn * x + c * y;
                    }
                }
            }
        }
        if !rotated {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(degenerate("Jacobi SVD did not converge"));
    }
    let s = DVector::from_fn(n, |j, _| w.column(j).norm());
    let s_max = s.max();
    let mut u = Mat::zeros(m, n);
    let mut null = Vec::new();
    for j in 0..n {
        if s[j] > f64::EPSILON * s_max {
            u.set_column(j, &(w.column(j) / s[j]));
        } else {
            null.push(j);
        }
    }
    // Columns for (numerically) zero singular values: complete to an
    // orthonormal set with Gram-Schmidt on the standard basis.
    let mut e = 0;
    for j in null {
        loop {
            if e == m {
                return Err(degenerate("could not complete the left singular basis"));
            }
            let mut x = nalgebra::DVector::<f64>::zeros(m);
            x[e] = 1.0;
            e += 1;
            for _ in 0..2 {
                for k in 0..n {
                    if k != j {
                        let proj = u.column(k).dot(&x);
                        x -= u.column(k) * proj;
                    }
                }
            }
            let nx = x.norm();
            if nx > 0.5 {
                u.set_column(j, &(x / nx));
                break;
            }
        }
    }
    let vt = v.transpose();
    if !factorization_ok(a, &u, &s, &vt) {
        return Err(degenerate("SVD failed its reconstruction check"));
    }
    Ok((u, s, vt))
}

/// Nearest matrix with orthonormal columns, `U Vᵀ` from the SVD.
pub fn polar(a: &Mat) -> Result<Mat> {
    let (m, n) = a.shape();
    if m < n {
        return Err(Error::ContractViolation(alloc::format!(
            "polar factor needs rows >= cols, got {m}x{n}"
        )));
    }
    let d = svd(a)?;
    let s1 = d.s[0];
    if !(s1 > 0.0) || d.s[n - 1] <= 1e-12 * s1 {
        return Err(degenerate("rank-deficient input to the Stiefel projection"));
    }
    Ok(&d.u * d.v.transpose())
}

/// Best rank-`r` approximation. Fails when σ_r is numerically zero or when
/// σ_r and σ_{r+1} tie (the projection is then set-valued).
pub fn truncate_rank(a: &Mat, r: usize) -> Result<Mat> {
    let d = svd(a)?;
    let p = d.s.len();
    if r == 0 || r > p {
        return Err(Error::ContractViolation(alloc::format!(
            "rank {r} outside 1..={p}"
        )));
    }
    let s1 = d.s[0];
    if !(s1 > 0.0) || d.s[r - 1] <= 1e-10 * s1 {
        return Err(degenerate("input has rank below the target rank"));
    }
    if r < p && d.s[r - 1] - d.s[r] <= 1e-12 * s1 {
        return Err(degenerate("tied singular values at the truncation rank"));
    }
    let ur = d.u.columns(0, r);
    let vr = d.v.columns(0, r);
    let mut scaled = ur.into_owned();
    for j in 0..r {
        let sj = d.s[j];
        scaled.column_mut(j).scale_mut(sj);
    }
    Ok(scaled * vr.transpose())
}

/// Leading `r` left and right singular vectors.
pub fn leading_subspaces(a: &Mat, r: usize) -> Result<(Mat, Mat)> {
    let d = svd(a)?;
    if r > d.s.len() {
        return Err(degenerate("rank exceeds matrix size"));
    }
    Ok((d.u.columns(0, r).into_owned(), d.v.columns(0, r).into_owned()))
}

/// Symmetric eigendecomposition of `sym(a)`, eigenvalues ascending.
pub fn sym_eig(a: &Mat) -> Result<(Vec<f64>, Mat)> {
    if !all_finite(a) {
        return Err(degenerate("non-finite entries in eigen input"));
    }
    let n = a.nrows();
    if n != a.ncols() {
        return Err(Error::ShapeMismatch {
            expected: (n, n),
            found: a.shape(),
        });
    }
    let e = sym(a).symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        e.eigenvalues[i]
            .partial_cmp(&e.eigenvalues[j])
            .unwrap_or(Ordering::Equal)
    });
    let vals = order.iter().map(|&i| e.eigenvalues[i]).collect();
    let mut vecs = Mat::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vecs.set_column(dst, &e.eigenvectors.column(src));
    }
    Ok((vals, vecs))
}

fn rebuild(vals: &[f64], vecs: &Mat, f: impl Fn(f64) -> f64) -> Mat {
    let mut scaled = vecs.clone();
    for (j, &l) in vals.iter().enumerate() {
        scaled.column_mut(j).scale_mut(f(l));
    }
    sym(&(scaled * vecs.transpose()))
}

/// Apply a scalar function to the spectrum of a symmetric matrix.
pub fn sym_apply(a: &Mat, f: impl Fn(f64) -> f64) -> Result<Mat> {
    let (vals, vecs) = sym_eig(a)?;
    Ok(rebuild(&vals, &vecs, f))
}

fn spd_eig(a: &Mat) -> Result<(Vec<f64>, Mat)> {
    let (vals, vecs) = sym_eig(a)?;
    if vals[0] <= EIG_FLOOR {
        return Err(degenerate("eigenvalue below the SPD floor"));
    }
    Ok((vals, vecs))
}

pub fn spd_sqrt(a: &Mat) -> Result<Mat> {
    let (vals, vecs) = spd_eig(a)?;
    Ok(rebuild(&vals, &vecs, |l| l.sqrt()))
}

pub fn spd_inv_sqrt(a: &Mat) -> Result<Mat> {
    let (vals, vecs) = spd_eig(a)?;
    Ok(rebuild(&vals, &vecs, |l| 1.0 / l.sqrt()))
}

/// Square root and inverse square root from one eigendecomposition.
pub fn spd_sqrt_pair(a: &Mat) -> Result<(Mat, Mat)> {
    let (vals, vecs) = spd_eig(a)?;
    Ok((
        rebuild(&vals, &vecs, |l| l.sqrt()),
        rebuild(&vals, &vecs, |l| 1.0 / l.sqrt()),
    ))
}

pub fn spd_log(a: &Mat) -> Result<Mat> {
    let (vals, vecs) = spd_eig(a)?;
    Ok(rebuild(&vals, &vecs, |l| l.ln()))
}

pub fn spd_inv(a: &Mat) -> Result<Mat> {
    let (vals, vecs) = spd_eig(a)?;
    Ok(rebuild(&vals, &vecs, |l| 1.0 / l))
}

/// `log det` of an SPD matrix via Cholesky.
pub fn spd_logdet(a: &Mat) -> Result<f64> {
    let c = nalgebra::Cholesky::new(sym(a)).ok_or_else(|| degenerate("matrix is not SPD"))?;
    let l = c.l();
    Ok((0..l.nrows()).map(|i| 2.0 * l[(i, i)].ln()).sum())
}

pub fn sym_exp(a: &Mat) -> Result<Mat> {
    sym_apply(a, |l| l.exp())
}

/// Solve `a x = b` for SPD `a`.
pub fn spd_solve(a: &Mat, b: &Mat) -> Result<Mat> {
    let c = nalgebra::Cholesky::new(sym(a)).ok_or_else(|| degenerate("matrix is not SPD"))?;
    Ok(c.solve(b))
}

pub fn min_eigenvalue(a: &Mat) -> Result<f64> {
    Ok(sym_eig(a)?.0[0])
}

pub fn max_eigenvalue(a: &Mat) -> Result<f64> {
    let (v, _) = sym_eig(a)?;
    Ok(v[v.len() - 1])
}
