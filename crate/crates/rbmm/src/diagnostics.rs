//! Finite-difference, smoothness, distance and rate probes.

use alloc::string::{String, ToString};
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;
use serde::Serialize;

use crate::error::{contract, Error, Result};
use crate::geometry::{Manifold, Point};
use crate::rng::{self, Rng};
use crate::Mat;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ProbeReport {
    pub quantity: String,
    pub max: f64,
    pub min: f64,
    pub mean: f64,
    pub target: Option<f64>,
    pub pass: bool,
    pub samples: usize,
    pub seed: u64,
}

struct Summary {
    max: f64,
    min: f64,
    mean: f64,
    n: usize,
}

fn summarize(v: &[f64]) -> Summary {
    let n = v.len();
    Summary {
        max: v.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b)),
        min: v.iter().fold(f64::INFINITY, |a, &b| a.min(b)),
        mean: v.iter().sum::<f64>() / n as f64,
        n,
    }
}

pub const FD_THRESHOLD: f64 = 1e-4;
pub const FD_DIRECTIONS: usize = 20;

/// Compare `⟨rgrad(x), η⟩` with a central difference of `value` along the
/// retraction, over random unit tangents η. Reports the relative error
/// `|fd − analytic| / max(‖rgrad‖, 1e-8)`.
pub fn fd_gradient_check(
    value: &dyn Fn(&Mat) -> f64,
    rgrad: &dyn Fn(&Mat) -> Mat,
    x: &Point,
    h: f64,
    seed: u64,
) -> Result<ProbeReport> {
    if !(1e-8..=1e-2).contains(&h) {
        return Err(contract("finite-difference step must lie in [1e-8, 1e-2]"));
    }
    let m = x.manifold;
    let xd = &x.data;
    let g = rgrad(xd);
    m.check_shape(&g)?;
    let scale = m.norm_raw(xd, &g)?.max(1e-8);
    let mut r: Rng = rng::seeded(seed);
    let mut errs = Vec::with_capacity(FD_DIRECTIONS);
    for _ in 0..FD_DIRECTIONS {
        let eta = m.random_tangent(xd, &mut r)?;
        let fp = value(&m.retract_raw(xd, &(&eta * h))?);
        let fm = value(&m.retract_raw(xd, &(&eta * -h))?);
        let fd = (fp - fm) / (2.0 * h);
        let an = m.inner_raw(xd, &g, &eta)?;
        errs.push((fd - an).abs() / scale);
    }
    let s = summarize(&errs);
    Ok(ProbeReport {
        quantity: "fd-gradient-relative-error".to_string(),
        max: s.max,
        min: s.min,
        mean: s.mean,
        target: Some(FD_THRESHOLD),
        pass: s.max <= FD_THRESHOLD,
        samples: s.n,
        seed,
    })
}

fn exact_transport(m: &Manifold) -> Result<()> {
    match m {
        Manifold::Euclidean { .. } | Manifold::Sphere { .. } | Manifold::Spd { .. } => Ok(()),
        _ => Err(Error::UnsupportedKind {
            op: "exact parallel transport",
            kind: m.name(),
        }),
    }
}

/// Lipschitz ratios `‖grad F(x) − Γ_{y→x} grad F(y)‖ / d(x, y)` over the
/// given pairs. `pass` means no ratio exceeds `target`.
pub fn gsmooth_probe_pairs(
    m: &Manifold,
    rgrad: &dyn Fn(&Mat) -> Mat,
    pairs: &[(Mat, Mat)],
    target: f64,
    seed: u64,
) -> Result<ProbeReport> {
    exact_transport(m)?;
    let mut ratios = Vec::with_capacity(pairs.len());
    for (x, y) in pairs {
        let d = m.dist_raw(x, y)?;
        if d == 0.0 {
            continue;
        }
        let gy = m.transport_raw(y, x, &rgrad(y))?;
        let diff = rgrad(x) - gy;
        ratios.push(m.norm_raw(x, &diff)? / d);
    }
    if ratios.is_empty() {
        return Err(contract("no pair with positive distance"));
    }
    let s = summarize(&ratios);
    Ok(ProbeReport {
        quantity: "gsmooth-ratio".to_string(),
        max: s.max,
        min: s.min,
        mean: s.mean,
        target: Some(target),
        pass: s.max <= target + 1e-9 * target.abs().max(1.0),
        samples: s.n,
        seed,
    })
}

/// Random pairs: x uniform on the manifold, y = exp_x(tη) with t uniform in
/// (0, scale] and η a unit tangent.
pub fn gsmooth_probe(
    m: &Manifold,
    rgrad: &dyn Fn(&Mat) -> Mat,
    samples: usize,
    scale: f64,
    target: f64,
    seed: u64,
) -> Result<ProbeReport> {
    exact_transport(m)?;
    if samples == 0 {
        return Err(contract("need at least one sample"));
    }
    let mut r: Rng = rng::seeded(seed);
    let mut pairs = Vec::with_capacity(samples);
    for _ in 0..samples {
        let x = m.random_point(&mut r);
        let eta = m.random_tangent(&x, &mut r)?;
        let t = rng::uniform(&mut r, 0.0, scale).max(1e-3 * scale);
        let y = m.exp_raw(&x, &(eta * t))?;
        pairs.push((x, y));
    }
    gsmooth_probe_pairs(m, rgrad, &pairs, target, seed)
}

fn on_circle(angle: f64) -> Mat {
    Mat::from_column_slice(2, 1, &[angle.cos(), angle.sin()])
}

/// Circle configuration where `F = ½d²(·, p)` attains Lipschitz ratio 2: x and
/// y sit at ±2π/3 from p, so their connecting geodesic crosses the cut point
/// of p. Returns `(p, x, y)`.
pub fn circle_configuration() -> (Mat, Mat, Mat) {
    let third = 2.0 * core::f64::consts::PI / 3.0;
    (on_circle(0.0), on_circle(third), on_circle(-third))
}

/// `c = min ‖x − y‖_F / d(x, y)` over random pairs. On the sphere `pass`
/// requires `‖x − y‖ ≤ d(x, y)` everywhere and c ≥ 2/π.
pub fn distance_equivalence_probe(m: &Manifold, samples: usize, seed: u64) -> Result<ProbeReport> {
    if samples == 0 {
        return Err(contract("need at least one sample"));
    }
    let mut r: Rng = rng::seeded(seed);
    let mut pairs = Vec::with_capacity(samples);
    for _ in 0..samples {
        pairs.push((m.random_point(&mut r), m.random_point(&mut r)));
    }
    distance_equivalence_pairs(m, &pairs, seed)
}

pub fn distance_equivalence_pairs(m: &Manifold, pairs: &[(Mat, Mat)], seed: u64) -> Result<ProbeReport> {
    let target = match m {
        Manifold::Sphere { .. } => Some(2.0 / core::f64::consts::PI),
        Manifold::Spd { .. } => None,
        _ => {
            return Err(Error::UnsupportedKind {
                op: "distance equivalence",
                kind: m.name(),
            })
        }
    };
    let mut ratios = Vec::with_capacity(pairs.len());
    for (x, y) in pairs {
        let d = m.dist_raw(x, y)?;
        if d == 0.0 {
            continue;
        }
        ratios.push((x - y).norm() / d);
    }
    if ratios.is_empty() {
        return Err(contract("no pair with positive distance"));
    }
    let s = summarize(&ratios);
    let pass = match target {
        Some(c) => s.max <= 1.0 + 1e-12 && s.min >= c - 1e-12,
        None => s.min > 0.0,
    };
    Ok(ProbeReport {
        quantity: "chord-to-geodesic-ratio".to_string(),
        max: s.max,
        min: s.min,
        mean: s.mean,
        target,
        pass,
        samples: s.n,
        seed,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
}

pub const BURN_IN: f64 = 0.1;

/// Least squares of `log a_n` on `log n` (n starting at 1) after dropping the
/// first 10% of entries.
pub fn rate_fit(seq: &[f64]) -> Result<RateFit> {
    if seq.len() < 10 {
        return Err(contract("rate fit needs at least 10 entries"));
    }
    if seq.iter().any(|&a| !(a > 0.0) || !a.is_finite()) {
        return Err(contract("rate fit needs positive finite entries"));
    }
    let skip = (BURN_IN * seq.len() as f64).floor() as usize;
    let pts: Vec<(f64, f64)> = seq
        .iter()
        .enumerate()
        .skip(skip)
        .map(|(k, &a)| (((k + 1) as f64).ln(), a.ln()))
        .collect();
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse = syy - slope * sxy;
    let r2 = if syy > 0.0 { 1.0 - sse / syy } else { 1.0 };
    Ok(RateFit { slope, intercept, r2 })
}

/// Prefix of a running-min sequence before it reaches the numerical floor
/// (`≤ rel · first` or nonpositive).
pub fn truncate_at_floor(seq: &[f64], rel: f64) -> &[f64] {
    let Some(&first) = seq.first() else { return seq };
    let end = seq
        .iter()
        .position(|&a| !(a > rel * first))
        .unwrap_or(seq.len());
    &seq[..end]
}

fn report(quantity: &str, v: &[f64], target: f64, seed: u64) -> ProbeReport {
    let s = summarize(v);
    ProbeReport {
        quantity: quantity.to_string(),
        max: s.max,
        min: s.min,
        mean: s.mean,
        target: Some(target),
        pass: s.max <= target,
        samples: s.n,
        seed,
    }
}

/// Round-trip, transport and distance-gradient invariants of a kind with
/// exp/log. Sphere pairs closer than 0.1 rad to antipodal are skipped.
pub fn geometry_probes(m: &Manifold, samples: usize, seed: u64) -> Result<Vec<ProbeReport>> {
    exact_transport(m)?;
    if samples == 0 {
        return Err(contract("need at least one sample"));
    }
    let mut r: Rng = rng::seeded(seed);
    let (mut round, mut iso, mut fd) = (Vec::new(), Vec::new(), Vec::new());
    let h = 1e-5;
    while round.len() < samples {
        let x = m.random_point(&mut r);
        let y = m.random_point(&mut r);
        if matches!(m, Manifold::Sphere { .. }) && m.dist_raw(&x, &y)? > core::f64::consts::PI - 0.1 {
            continue;
        }
        let v = m.log_raw(&x, &y)?;
        round.push((m.exp_raw(&x, &v)? - &y).norm() / y.norm().max(1.0));

        let u = m.random_tangent(&x, &mut r)?;
        let w = m.random_tangent(&x, &mut r)?;
        let (tu, tw) = (m.transport_raw(&x, &y, &u)?, m.transport_raw(&x, &y, &w)?);
        let e1 = (m.inner_raw(&x, &u, &w)? - m.inner_raw(&y, &tu, &tw)?).abs();
        let e2 = (m.norm_raw(&y, &tu)? - 1.0).abs();
        iso.push(e1.max(e2));

        let g = m.grad_dist_sq_raw(&x, &y)?;
        let f = |t: f64| -> Result<f64> { Ok(m.dist_raw(&m.exp_raw(&x, &(&u * t))?, &y)?.powi(2)) };
        let num = (f(h)? - f(-h)?) / (2.0 * h);
        fd.push((num - m.inner_raw(&x, &g, &u)?).abs() / m.norm_raw(&x, &g)?.max(1e-8));
    }
    let name = m.name();
    Ok(alloc::vec![
        report(&alloc::format!("exp-log-round-trip:{name}"), &round, 1e-8, seed),
        report(&alloc::format!("transport-isometry:{name}"), &iso, 1e-10, seed),
        report(&alloc::format!("grad-dist-sq-fd:{name}"), &fd, 1e-5, seed),
    ])
}

/// Running minimum of a sequence.
pub fn running_min(seq: &[f64]) -> Vec<f64> {
    let mut best = f64::INFINITY;
    seq.iter()
        .map(|&a| {
            best = best.min(a);
            best
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg;
    use alloc::vec;
    use approx::assert_relative_eq;

    #[test]
    fn fd_examples() {
        let m = Manifold::Euclidean { rows: 3, cols: 1 };
        let x = Point::new(m, Mat::from_column_slice(3, 1, &[0.3, -1.0, 2.0])).unwrap();
        let v = |x: &Mat| x.norm_squared();
        let g = |x: &Mat| x * 2.0;
        let rep = fd_gradient_check(&v, &g, &x, 1e-5, 7).unwrap();
        assert!(rep.max <= 1e-9 && rep.pass);
        let bad = |x: &Mat| x * 4.0;
        assert!(!fd_gradient_check(&v, &bad, &x, 1e-5, 7).unwrap().pass);
        assert!(fd_gradient_check(&v, &g, &x, 1.0, 7).is_err());

        let spd = Manifold::Spd { n: 3 };
        let s = Mat::from_row_slice(3, 3, &[2.0, 0.3, 0.0, 0.3, 1.0, 0.1, 0.0, 0.1, 0.5]);
        let p = Point::new(spd, s).unwrap();
        let v = |x: &Mat| linalg::spd_logdet(x).unwrap();
        let g = |x: &Mat| spd.egrad_to_rgrad_raw(x, &linalg::spd_inv(x).unwrap()).unwrap();
        assert!(fd_gradient_check(&v, &g, &p, 1e-5, 3).unwrap().max <= 1e-5);
    }

    #[test]
    fn gsmooth_examples() {
        let m = Manifold::Euclidean { rows: 2, cols: 1 };
        let p = Mat::from_column_slice(2, 1, &[0.5, -1.0]);
        let pc = p.clone();
        let g = move |x: &Mat| x - &pc;
        let rep = gsmooth_probe(&m, &g, 30, 1.0, 1.0, 1).unwrap();
        assert_relative_eq!(rep.max, 1.0, epsilon = 1e-12);
        assert_relative_eq!(rep.min, 1.0, epsilon = 1e-12);
        let zero = |x: &Mat| x * 0.0;
        assert_eq!(gsmooth_probe(&m, &zero, 10, 1.0, 1.0, 1).unwrap().max, 0.0);

        let c = Manifold::Sphere { dim: 2 };
        let (p, x, y) = circle_configuration();
        let g = move |x: &Mat| c.grad_dist_sq_raw(x, &p).unwrap() * 0.5;
        let rep = gsmooth_probe_pairs(&c, &g, &[(x, y)], 2.0, 0).unwrap();
        assert_relative_eq!(rep.max, 2.0, epsilon = 1e-9);

        let st = Manifold::Stiefel { n: 3, k: 2 };
        assert!(gsmooth_probe(&st, &zero, 3, 1.0, 1.0, 0).is_err());
    }

    #[test]
    fn distance_equivalence_examples() {
        let s = Manifold::Sphere { dim: 3 };
        let rep = distance_equivalence_probe(&s, 200, 4).unwrap();
        assert!(rep.pass);
        let x = Mat::from_column_slice(3, 1, &[1.0, 0.0, 0.0]);
        let t = core::f64::consts::PI - 1e-6;
        let y = Mat::from_column_slice(3, 1, &[t.cos(), t.sin(), 0.0]);
        let near = Mat::from_column_slice(3, 1, &[(1e-6f64).cos(), (1e-6f64).sin(), 0.0]);
        let rep = distance_equivalence_pairs(&s, &[(x.clone(), x.clone()), (x.clone(), y), (x, near)], 0).unwrap();
        assert_eq!(rep.samples, 2);
        assert_relative_eq!(rep.min, 2.0 / core::f64::consts::PI, epsilon = 1e-6);
        assert_relative_eq!(rep.max, 1.0, epsilon = 1e-9);
    }

    #[test]
    fn rate_fit_examples() {
        let half: Vec<f64> = (1..=200).map(|n| (n as f64).powf(-0.5)).collect();
        assert_relative_eq!(rate_fit(&half).unwrap().slope, -0.5, epsilon = 1e-6);
        let quarter: Vec<f64> = (1..=200).map(|n| (n as f64).powf(-0.25)).collect();
        assert_relative_eq!(rate_fit(&quarter).unwrap().slope, -0.25, epsilon = 1e-9);
        let flat = vec![3.0; 50];
        assert!(rate_fit(&flat).unwrap().slope.abs() < 1e-12);
        assert!(rate_fit(&[1.0; 5]).is_err());
        let mut z = vec![1.0; 20];
        z[4] = 0.0;
        assert!(rate_fit(&z).is_err());
    }

    #[test]
    fn floor_truncation() {
        assert_eq!(truncate_at_floor(&[1.0, 0.5, 1e-13, 0.0], 1e-12), &[1.0, 0.5]);
        assert_eq!(running_min(&[3.0, 1.0, 2.0]), vec![3.0, 1.0, 1.0]);
    }

    #[test]
    fn geometry_probes_pass() {
        for m in [
            Manifold::Euclidean { rows: 2, cols: 2 },
            Manifold::Sphere { dim: 4 },
            Manifold::Spd { n: 3 },
        ] {
            let reps = geometry_probes(&m, 30, 2).unwrap();
            assert_eq!(reps.len(), 3);
            assert!(reps.iter().all(|r| r.pass), "{reps:?}");
        }
        assert!(geometry_probes(&Manifold::Stiefel { n: 3, k: 2 }, 5, 0).is_err());
    }
}
