//! Geometry of the five block kinds.
//!
//! Raw kernels are methods on [`Manifold`] taking ambient matrices; the free
//! functions wrap them with [`Point`]/[`TangentVector`] bookkeeping.
//!
//! * `Sphere { dim }` is the unit sphere in ℝ^dim, stored as a `dim × 1`
//!   column, so the circle is `Sphere { dim: 2 }`.
//! * SPD carries the metric `½ Tr(U Σ⁻¹ V Σ⁻¹)`; its geodesic distance is the
//!   equal-mean Fisher-Rao distance.
//! * Stiefel and fixed-rank blocks use the Frobenius distance of the ambient
//!   space and projection transport. They have no exp/log.

use alloc::vec::Vec;
use core::f64::consts::PI;

#[allow(unused_imports)]
use num_traits::Float;
use serde::Serialize;

use crate::error::{contract, degenerate, Error, Result};
use crate::linalg::{self, frob_dot, sym};
use crate::rng::{self, Rng};
use crate::Mat;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Manifold {
    Euclidean { rows: usize, cols: usize },
    Sphere { dim: usize },
    Stiefel { n: usize, k: usize },
    Spd { n: usize },
    FixedRank { rows: usize, cols: usize, rank: usize },
}

const STIEFEL_INJECTIVITY: f64 = 0.89 * PI;

impl Manifold {
    pub fn name(&self) -> &'static str {
        match self {
            Manifold::Euclidean { .. } => "euclidean",
            Manifold::Sphere { .. } => "sphere",
            Manifold::Stiefel { .. } => "stiefel",
            Manifold::Spd { .. } => "spd",
            Manifold::FixedRank { .. } => "fixed-rank",
        }
    }

    pub fn shape(&self) -> (usize, usize) {
        match *self {
            Manifold::Euclidean { rows, cols } => (rows, cols),
            Manifold::Sphere { dim } => (dim, 1),
            Manifold::Stiefel { n, k } => (n, k),
            Manifold::Spd { n } => (n, n),
            Manifold::FixedRank { rows, cols, .. } => (rows, cols),
        }
    }

    /// Lower bound r0 on the injectivity radius.
    pub fn injectivity_floor(&self) -> f64 {
        match self {
            Manifold::Sphere { .. } => PI,
            Manifold::Stiefel { .. } => STIEFEL_INJECTIVITY,
            _ => f64::INFINITY,
        }
    }

    /// r̂ = min(r0, 1).
    pub fn r_hat(&self) -> f64 {
        self.injectivity_floor().min(1.0)
    }

    /// Kinds with closed-form exp, log and parallel transport.
    pub fn has_exp_log(&self) -> bool {
        matches!(
            self,
            Manifold::Euclidean { .. } | Manifold::Sphere { .. } | Manifold::Spd { .. }
        )
    }

    /// Complete, simply connected, nonpositively curved kinds.
    pub fn is_hadamard(&self) -> bool {
        matches!(self, Manifold::Euclidean { .. } | Manifold::Spd { .. })
    }

    fn unsupported(&self, op: &'static str) -> Error {
        Error::UnsupportedKind {
            op,
            kind: self.name(),
        }
    }

    pub fn check_shape(&self, a: &Mat) -> Result<()> {
        let expected = self.shape();
        if a.shape() != expected {
            return Err(Error::ShapeMismatch {
                expected,
                found: a.shape(),
            });
        }
        Ok(())
    }

    /// Check the point invariants of this kind.
    pub fn validate(&self, a: &Mat) -> Result<()> {
        self.check_shape(a)?;
        if !linalg::all_finite(a) {
            return Err(degenerate("non-finite point"));
        }
        match *self {
            Manifold::Euclidean { .. } => Ok(()),
            Manifold::Sphere { .. } => {
                if (a.norm() - 1.0).abs() > 1e-10 {
                    return Err(contract("sphere point is not unit norm"));
                }
                Ok(())
            }
            Manifold::Stiefel { k, .. } => {
                let g = a.transpose() * a - Mat::identity(k, k);
                if g.norm() > 1e-10 {
                    return Err(contract("Stiefel point columns are not orthonormal"));
                }
                Ok(())
            }
            Manifold::Spd { .. } => {
                if (a - a.transpose()).norm() > 1e-10 * (1.0 + a.norm()) {
                    return Err(contract("SPD point is not symmetric"));
                }
                if linalg::min_eigenvalue(a)? <= 0.0 {
                    return Err(contract("SPD point is not positive definite"));
                }
                Ok(())
            }
            Manifold::FixedRank { rank, .. } => {
                let s = linalg::svd(a)?.s;
                let s1 = s[0];
                let ok = rank <= s.len()
                    && s1 > 0.0
                    && s[rank - 1] > 1e-10 * s1
                    && s.get(rank).map_or(true, |&next| next <= 1e-8 * s1);
                if !ok {
                    return Err(contract("fixed-rank point does not have the declared rank"));
                }
                Ok(())
            }
        }
    }

    pub fn inner_raw(&self, x: &Mat, u: &Mat, v: &Mat) -> Result<f64> {
        match self {
            Manifold::Spd { .. } => {
                let xi = linalg::spd_inv(x)?;
                Ok(0.5 * ((u * &xi) * (v * &xi)).trace())
            }
            _ => Ok(frob_dot(u, v)),
        }
    }

    pub fn norm_raw(&self, x: &Mat, u: &Mat) -> Result<f64> {
        Ok(self.inner_raw(x, u, u)?.max(0.0).sqrt())
    }

    pub fn proj_tangent_raw(&self, x: &Mat, v: &Mat) -> Result<Mat> {
        self.check_shape(v)?;
        match *self {
            Manifold::Euclidean { .. } => Ok(v.clone()),
            Manifold::Sphere { .. } => Ok(v - x * frob_dot(x, v)),
            Manifold::Stiefel { .. } => Ok(v - x * sym(&(x.transpose() * v))),
            Manifold::Spd { .. } => Ok(sym(v)),
            Manifold::FixedRank { rank, .. } => {
                let (u, w) = linalg::leading_subspaces(x, rank)?;
                let pu = &u * u.transpose();
                let pv = &w * w.transpose();
                let zu = &pu * v;
                Ok(&zu + v * &pv - zu * pv)
            }
        }
    }

    pub fn egrad_to_rgrad_raw(&self, x: &Mat, g: &Mat) -> Result<Mat> {
        match self {
            Manifold::Spd { .. } => {
                self.check_shape(g)?;
                Ok(sym(&(x * sym(g) * x * 2.0)))
            }
            _ => self.proj_tangent_raw(x, g),
        }
    }

    pub fn proj_manifold_raw(&self, a: &Mat) -> Result<Mat> {
        self.check_shape(a)?;
        match *self {
            Manifold::Euclidean { .. } => Ok(a.clone()),
            Manifold::Sphere { .. } => {
                let n = a.norm();
                if !(n > 0.0) || !n.is_finite() {
                    return Err(degenerate("cannot normalize a zero vector"));
                }
                Ok(a / n)
            }
            Manifold::Stiefel { .. } => linalg::polar(a),
            Manifold::Spd { .. } => {
                let s = sym(a);
                if linalg::min_eigenvalue(&s)? <= linalg::EIG_FLOOR {
                    return Err(degenerate("symmetric part is not positive definite"));
                }
                Ok(s)
            }
            Manifold::FixedRank { rank, .. } => linalg::truncate_rank(a, rank),
        }
    }

    pub fn retract_raw(&self, x: &Mat, eta: &Mat) -> Result<Mat> {
        self.check_shape(eta)?;
        match self {
            Manifold::Euclidean { .. } => Ok(x + eta),
            Manifold::Spd { .. } => self.exp_raw(x, eta),
            _ => self.proj_manifold_raw(&(x + eta)),
        }
    }

    pub fn exp_raw(&self, x: &Mat, eta: &Mat) -> Result<Mat> {
        self.check_shape(eta)?;
        match self {
            Manifold::Euclidean { .. } => Ok(x + eta),
            Manifold::Sphere { .. } => {
                let t = eta.norm();
                if t == 0.0 {
                    return Ok(x.clone());
                }
                let y = x * t.cos() + eta * (t.sin() / t);
                Ok(&y / y.norm())
            }
            Manifold::Spd { .. } => {
                let (s, si) = linalg::spd_sqrt_pair(x)?;
                let inner = linalg::sym_exp(&sym(&(&si * eta * &si)))?;
                Ok(sym(&(&s * inner * &s)))
            }
            _ => Err(self.unsupported("exp_map")),
        }
    }

    pub fn log_raw(&self, x: &Mat, y: &Mat) -> Result<Mat> {
        self.check_shape(y)?;
        match self {
            Manifold::Euclidean { .. } => Ok(y - x),
            Manifold::Sphere { .. } => {
                let c = frob_dot(x, y).clamp(-1.0, 1.0);
                let w = y - x * c;
                let s = w.norm();
                if s < 1e-15 {
                    if c > 0.0 {
                        return Ok(w);
                    }
                    return Err(Error::OutsideInjectivity);
                }
                let theta = s.atan2(c);
                Ok(w * (theta / s))
            }
            Manifold::Spd { .. } => {
                let (s, si) = linalg::spd_sqrt_pair(x)?;
                let inner = linalg::spd_log(&sym(&(&si * y * &si)))?;
                Ok(sym(&(&s * inner * &s)))
            }
            _ => Err(self.unsupported("log_map")),
        }
    }

    pub fn transport_raw(&self, x: &Mat, y: &Mat, u: &Mat) -> Result<Mat> {
        self.check_shape(u)?;
        match self {
            Manifold::Euclidean { .. } => Ok(u.clone()),
            Manifold::Sphere { .. } => {
                let v = self.log_raw(x, y)?;
                let theta = v.norm();
                if theta == 0.0 {
                    return Ok(u.clone());
                }
                let e = v / theta;
                let a = frob_dot(&e, u);
                Ok(u - (&e * (1.0 - theta.cos()) + x * theta.sin()) * a)
            }
            Manifold::Spd { .. } => {
                let (s, si) = linalg::spd_sqrt_pair(x)?;
                let mid = linalg::spd_sqrt(&sym(&(&si * y * &si)))?;
                let e = &s * mid * &si;
                Ok(sym(&(&e * u * e.transpose())))
            }
            _ => self.proj_tangent_raw(y, u),
        }
    }

    pub fn dist_raw(&self, x: &Mat, y: &Mat) -> Result<f64> {
        self.check_shape(y)?;
        match self {
            Manifold::Sphere { .. } => {
                let c = frob_dot(x, y);
                let s = (y - x * c).norm();
                Ok(s.atan2(c))
            }
            Manifold::Spd { .. } => {
                let si = linalg::spd_inv_sqrt(x)?;
                let (vals, _) = linalg::sym_eig(&(&si * y * &si))?;
                if vals[0] <= linalg::EIG_FLOOR {
                    return Err(degenerate("eigenvalue below the SPD floor"));
                }
                let ss: f64 = vals.iter().map(|l| l.ln() * l.ln()).sum();
                Ok((0.5 * ss).sqrt())
            }
            _ => Ok((y - x).norm()),
        }
    }

    pub fn grad_dist_sq_raw(&self, x: &Mat, p: &Mat) -> Result<Mat> {
        if !self.has_exp_log() {
            return Err(self.unsupported("grad_dist_sq"));
        }
        Ok(self.log_raw(x, p)? * -2.0)
    }

    pub fn random_point(&self, rng: &mut Rng) -> Mat {
        let (r, c) = self.shape();
        loop {
            let g = rng::gaussian(rng, r, c);
            let p = match *self {
                Manifold::Euclidean { .. } => Ok(g),
                Manifold::Sphere { .. } | Manifold::Stiefel { .. } => self.proj_manifold_raw(&g),
                Manifold::Spd { .. } => linalg::sym_exp(&(sym(&g) * 0.5)),
                Manifold::FixedRank { rows, cols, rank } => {
                    let a = rng::gaussian(rng, rows, rank);
                    let b = rng::gaussian(rng, rank, cols);
                    Ok(a * b)
                }
            };
            if let Ok(p) = p {
                return p;
            }
        }
    }

    /// Random tangent vector at `x` with unit norm in the metric.
    pub fn random_tangent(&self, x: &Mat, rng: &mut Rng) -> Result<Mat> {
        let (r, c) = self.shape();
        for _ in 0..100 {
            let v = self.proj_tangent_raw(x, &rng::gaussian(rng, r, c))?;
            let n = self.norm_raw(x, &v)?;
            if n > 1e-8 {
                return Ok(v / n);
            }
        }
        Err(degenerate("tangent space is trivial"))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Point {
    pub manifold: Manifold,
    pub data: Mat,
}

impl Point {
    /// Validated constructor.
    pub fn new(manifold: Manifold, data: Mat) -> Result<Self> {
        manifold.validate(&data)?;
        Ok(Point { manifold, data })
    }

    /// Constructor that skips the invariant check. Used for iterates whose
    /// validity follows from the operation that produced them.
    pub fn new_unchecked(manifold: Manifold, data: Mat) -> Self {
        Point { manifold, data }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TangentVector {
    pub base: Point,
    pub data: Mat,
}

impl TangentVector {
    pub fn zero(base: &Point) -> Self {
        let (r, c) = base.manifold.shape();
        TangentVector {
            base: base.clone(),
            data: Mat::zeros(r, c),
        }
    }

    pub fn norm(&self) -> Result<f64> {
        self.base.manifold.norm_raw(&self.base.data, &self.data)
    }

    pub fn scale(&self, t: f64) -> Self {
        TangentVector {
            base: self.base.clone(),
            data: &self.data * t,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProductPoint {
    pub blocks: Vec<Point>,
}

impl ProductPoint {
    pub fn new(blocks: Vec<Point>) -> Self {
        ProductPoint { blocks }
    }

    pub fn data(&self) -> Vec<Mat> {
        self.blocks.iter().map(|p| p.data.clone()).collect()
    }
}

fn based_at(x: &Point, u: &TangentVector) -> Result<()> {
    if u.base.manifold != x.manifold || u.base.data != x.data {
        return Err(contract("tangent vector is not based at the given point"));
    }
    Ok(())
}

pub fn inner(x: &Point, u: &TangentVector, v: &TangentVector) -> Result<f64> {
    based_at(x, u)?;
    based_at(x, v)?;
    x.manifold.inner_raw(&x.data, &u.data, &v.data)
}

pub fn proj_tangent(x: &Point, v: &Mat) -> Result<TangentVector> {
    Ok(TangentVector {
        data: x.manifold.proj_tangent_raw(&x.data, v)?,
        base: x.clone(),
    })
}

pub fn egrad_to_rgrad(x: &Point, g: &Mat) -> Result<TangentVector> {
    Ok(TangentVector {
        data: x.manifold.egrad_to_rgrad_raw(&x.data, g)?,
        base: x.clone(),
    })
}

pub fn retract(x: &Point, eta: &TangentVector) -> Result<Point> {
    based_at(x, eta)?;
    Ok(Point::new_unchecked(
        x.manifold,
        x.manifold.retract_raw(&x.data, &eta.data)?,
    ))
}

pub fn exp_map(x: &Point, eta: &TangentVector) -> Result<Point> {
    based_at(x, eta)?;
    Ok(Point::new_unchecked(
        x.manifold,
        x.manifold.exp_raw(&x.data, &eta.data)?,
    ))
}

pub fn log_map(x: &Point, y: &Point) -> Result<TangentVector> {
    same_manifold(x, y)?;
    Ok(TangentVector {
        data: x.manifold.log_raw(&x.data, &y.data)?,
        base: x.clone(),
    })
}

pub fn transport(x: &Point, y: &Point, u: &TangentVector) -> Result<TangentVector> {
    same_manifold(x, y)?;
    based_at(x, u)?;
    Ok(TangentVector {
        data: x.manifold.transport_raw(&x.data, &y.data, &u.data)?,
        base: y.clone(),
    })
}

pub fn dist(x: &Point, y: &Point) -> Result<f64> {
    same_manifold(x, y)?;
    x.manifold.dist_raw(&x.data, &y.data)
}

/// Root-sum-of-squares of the block distances.
pub fn product_dist(x: &ProductPoint, y: &ProductPoint) -> Result<f64> {
    if x.blocks.len() != y.blocks.len() {
        return Err(contract("product points have different block counts"));
    }
    let mut acc = 0.0;
    for (a, b) in x.blocks.iter().zip(&y.blocks) {
        let d = dist(a, b)?;
        acc += d * d;
    }
    Ok(acc.sqrt())
}

/// Riemannian gradient of `d²(·, p)` at `x`, equal to `−2 log_x(p)`.
pub fn grad_dist_sq(x: &Point, p: &Point) -> Result<TangentVector> {
    same_manifold(x, p)?;
    Ok(TangentVector {
        data: x.manifold.grad_dist_sq_raw(&x.data, &p.data)?,
        base: x.clone(),
    })
}

pub fn proj_manifold(manifold: Manifold, a: &Mat) -> Result<Point> {
    Ok(Point::new_unchecked(manifold, manifold.proj_manifold_raw(a)?))
}

fn same_manifold(x: &Point, y: &Point) -> Result<()> {
    if x.manifold != y.manifold {
        return Err(contract("points live on different manifolds"));
    }
    Ok(())
}
