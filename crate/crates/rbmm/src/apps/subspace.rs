//! Geodesic subspace tracking: data `X_i ≈ U(t_i)G_i` with
//! `U(t) = H cos(Θt) + Y sin(Θt)`, blocks `Q = [H Y]` and the angles Θ.

use alloc::boxed::Box;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use crate::driver::BlockProblem;
use crate::error::{contract, Result};
use crate::geometry::{Manifold, Point, ProductPoint};
use crate::linalg::{self, frob_dot};
use crate::rng::{self, Rng};
use crate::surrogates::{Constraint, Surrogate, SurrogateKind};
use crate::Mat;

#[derive(Clone, Debug, PartialEq)]
pub struct GeodesicSubspaceModel {
    pub h: Mat,
    pub y: Mat,
    /// Diagonal of Θ.
    pub theta: Vec<f64>,
}

impl GeodesicSubspaceModel {
    pub fn from_blocks(q: &Mat, theta: &Mat) -> Self {
        let k = q.ncols() / 2;
        GeodesicSubspaceModel {
            h: q.columns(0, k).into_owned(),
            y: q.columns(k, k).into_owned(),
            theta: theta.iter().copied().collect(),
        }
    }

    pub fn q(&self) -> Mat {
        let (d, k) = self.h.shape();
        let mut q = Mat::zeros(d, 2 * k);
        q.columns_mut(0, k).copy_from(&self.h);
        q.columns_mut(k, k).copy_from(&self.y);
        q
    }

    pub fn theta_block(&self) -> Mat {
        Mat::from_column_slice(self.theta.len(), 1, &self.theta)
    }

    pub fn u(&self, t: f64) -> Mat {
        let mut u = self.h.clone();
        for (j, &th) in self.theta.iter().enumerate() {
            let (s, c) = (th * t).sin_cos();
            let col = self.h.column(j) * c + self.y.column(j) * s;
            u.set_column(j, &col);
        }
        u
    }
}

/// `Z(t) = [cos(Θt); sin(Θt)]`, a 2k × k matrix.
pub fn z_matrix(theta: &Mat, t: f64) -> Mat {
    let k = theta.nrows();
    let mut z = Mat::zeros(2 * k, k);
    for j in 0..k {
        let (s, c) = (theta[(j, 0)] * t).sin_cos();
        z[(j, j)] = c;
        z[(k + j, j)] = s;
    }
    z
}

/// `t_i = i/(T−1)`, or `[0]` when T = 1.
pub fn equispaced(count: usize) -> Vec<f64> {
    if count == 1 {
        return alloc::vec![0.0];
    }
    (0..count).map(|i| i as f64 / (count - 1) as f64).collect()
}

#[derive(Clone, Debug)]
pub struct SubspaceData {
    pub x: Vec<Mat>,
    pub times: Vec<f64>,
    pub truth: GeodesicSubspaceModel,
}

/// Draws Q from a Gaussian d × 2k matrix, θ_j uniform in (0, π/2), G_i and
/// the noise Gaussian, in that order.
pub fn st_generate(d: usize, k: usize, t: usize, l: usize, noise: f64, seed: u64) -> Result<SubspaceData> {
    if k == 0 || 2 * k > d || t == 0 || l == 0 {
        return Err(contract("subspace tracking needs 1 ≤ k ≤ d/2, T ≥ 1, ℓ ≥ 1"));
    }
    let mut r = rng::seeded(seed);
    let q = Manifold::Stiefel { n: d, k: 2 * k }.random_point(&mut r);
    let theta: Vec<f64> = (0..k)
        .map(|_| rng::uniform(&mut r, 0.0, core::f64::consts::FRAC_PI_2))
        .collect();
    let mut truth = GeodesicSubspaceModel::from_blocks(&q, &Mat::zeros(k, 1));
    truth.theta = theta;
    let times = equispaced(t);
    let mut x = Vec::with_capacity(t);
    for &ti in &times {
        let g = rng::gaussian(&mut r, k, l);
        let n = rng::gaussian(&mut r, d, l) * noise;
        x.push(truth.u(ti) * g + n);
    }
    Ok(SubspaceData { x, times, truth })
}

/// Root mean square of `‖ÛÛᵀ − UUᵀ‖_F / √(2k)` over `grid` equispaced times.
pub fn st_geodesic_error(est: &GeodesicSubspaceModel, truth: &GeodesicSubspaceModel, grid: usize) -> Result<f64> {
    if grid == 0 {
        return Err(contract("empty grid"));
    }
    if est.h.shape() != truth.h.shape() {
        return Err(contract("models have different shapes"));
    }
    let k = truth.h.ncols() as f64;
    let mut acc = 0.0;
    for t in equispaced(grid) {
        let a = est.u(t);
        let b = truth.u(t);
        let diff = &a * a.transpose() - &b * b.transpose();
        acc += diff.norm_squared() / (2.0 * k);
    }
    Ok((acc / grid as f64).sqrt())
}

/// Per-(i, j) constants of the separable form
/// `f = −Σᵢ Σⱼ r_ij cos(2θⱼtᵢ − φ_ij) + b_ij`.
#[derive(Clone, Debug, PartialEq)]
pub struct ThetaCoefficients {
    pub alpha: Mat,
    pub beta: Mat,
    pub gamma: Mat,
    pub r: Mat,
    pub phi: Mat,
    pub b: Mat,
    /// `L_j = 4 Σᵢ r_ij tᵢ²`.
    pub lipschitz: Vec<f64>,
    pub times: Vec<f64>,
}

fn atan2_tie(y: f64, x: f64) -> f64 {
    if y == 0.0 && x == 0.0 {
        0.0
    } else {
        y.atan2(x)
    }
}

pub fn st_theta_coefficients(h: &Mat, y: &Mat, data: &[Mat], times: &[f64]) -> Result<ThetaCoefficients> {
    if h.shape() != y.shape() || data.len() != times.len() || data.iter().any(|x| x.nrows() != h.nrows()) {
        return Err(contract("shape mismatch in subspace coefficients"));
    }
    let (t, k) = (data.len(), h.ncols());
    let mut c = ThetaCoefficients {
        alpha: Mat::zeros(t, k),
        beta: Mat::zeros(t, k),
        gamma: Mat::zeros(t, k),
        r: Mat::zeros(t, k),
        phi: Mat::zeros(t, k),
        b: Mat::zeros(t, k),
        lipschitz: alloc::vec![0.0; k],
        times: times.to_vec(),
    };
    for (i, x) in data.iter().enumerate() {
        let xh = x.transpose() * h;
        let xy = x.transpose() * y;
        for j in 0..k {
            let a = xh.column(j).norm_squared();
            let bt = xy.column(j).dot(&xh.column(j));
            let g = xy.column(j).norm_squared();
            let half = 0.5 * (a - g);
            c.alpha[(i, j)] = a;
            c.beta[(i, j)] = bt;
            c.gamma[(i, j)] = g;
            c.phi[(i, j)] = atan2_tie(bt, half);
            c.r[(i, j)] = (half * half + bt * bt).sqrt();
            c.b[(i, j)] = 0.5 * (a + g);
            c.lipschitz[j] += 4.0 * c.r[(i, j)] * times[i] * times[i];
        }
    }
    Ok(c)
}

impl ThetaCoefficients {
    pub fn value(&self, theta: &Mat) -> f64 {
        let mut f = 0.0;
        for (i, &t) in self.times.iter().enumerate() {
            for j in 0..theta.nrows() {
                f -= self.r[(i, j)] * (2.0 * theta[(j, 0)] * t - self.phi[(i, j)]).cos() + self.b[(i, j)];
            }
        }
        f
    }

    pub fn grad(&self, theta: &Mat) -> Mat {
        Mat::from_fn(theta.nrows(), 1, |j, _| {
            self.times
                .iter()
                .enumerate()
                .map(|(i, &t)| 2.0 * self.r[(i, j)] * t * (2.0 * theta[(j, 0)] * t - self.phi[(i, j)]).sin())
                .sum()
        })
    }
}

#[derive(Clone, Debug)]
pub struct SubspaceProblem {
    pub x: Vec<Mat>,
    pub times: Vec<f64>,
    /// `X_i X_iᵀ`
    cov: Vec<Mat>,
    d: usize,
    k: usize,
    pub lambda_theta: f64,
}

impl SubspaceProblem {
    pub fn new(x: Vec<Mat>, times: Vec<f64>, k: usize, lambda_theta: f64) -> Result<Self> {
        if x.is_empty() || x.len() != times.len() || k == 0 {
            return Err(contract("need one time per data matrix"));
        }
        let d = x[0].nrows();
        if 2 * k > d || x.iter().any(|m| m.nrows() != d) {
            return Err(contract("data matrices must share d ≥ 2k rows"));
        }
        if !(lambda_theta >= 0.0) {
            return Err(contract("λ_Θ must be nonnegative"));
        }
        let cov = x.iter().map(|m| m * m.transpose()).collect();
        Ok(SubspaceProblem {
            x,
            times,
            cov,
            d,
            k,
            lambda_theta,
        })
    }

    pub fn from_data(data: &SubspaceData, lambda_theta: f64) -> Result<Self> {
        SubspaceProblem::new(data.x.clone(), data.times.clone(), data.truth.h.ncols(), lambda_theta)
    }

    pub fn init_from(&self, model: &GeodesicSubspaceModel) -> ProductPoint {
        ProductPoint::new(alloc::vec![
            Point::new_unchecked(self.manifold(0), model.q()),
            Point::new_unchecked(self.manifold(1), model.theta_block()),
        ])
    }

    pub fn random_init(&self, rng: &mut Rng) -> ProductPoint {
        let q = self.manifold(0).random_point(rng);
        let theta = Mat::from_fn(self.k, 1, |_, _| rng::uniform(rng, 0.0, core::f64::consts::FRAC_PI_2));
        ProductPoint::new(alloc::vec![
            Point::new_unchecked(self.manifold(0), q),
            Point::new_unchecked(self.manifold(1), theta),
        ])
    }

    pub fn coefficients(&self, q: &Mat) -> Result<ThetaCoefficients> {
        let k = self.k;
        st_theta_coefficients(
            &q.columns(0, k).into_owned(),
            &q.columns(k, k).into_owned(),
            &self.x,
            &self.times,
        )
    }
}

impl BlockProblem for SubspaceProblem {
    fn num_blocks(&self) -> usize {
        2
    }

    fn manifold(&self, i: usize) -> Manifold {
        if i == 0 {
            Manifold::Stiefel {
                n: self.d,
                k: 2 * self.k,
            }
        } else {
            Manifold::Euclidean { rows: self.k, cols: 1 }
        }
    }

    fn value(&self, state: &[Mat]) -> f64 {
        let (q, th) = (&state[0], &state[1]);
        self.x
            .iter()
            .zip(&self.times)
            .map(|(x, &t)| -(x.transpose() * q * z_matrix(th, t)).norm_squared())
            .sum()
    }

    fn egrad_block(&self, i: usize, state: &[Mat]) -> Mat {
        let (q, th) = (&state[0], &state[1]);
        if i == 0 {
            let mut g = Mat::zeros(q.nrows(), q.ncols());
            for (c, &t) in self.cov.iter().zip(&self.times) {
                let z = z_matrix(th, t);
                g -= c * q * &z * z.transpose() * 2.0;
            }
            g
        } else {
            let k = self.k;
            Mat::from_fn(k, 1, |j, _| {
                let mut s = 0.0;
                for (c, &t) in self.cov.iter().zip(&self.times) {
                    let (sn, cs) = (th[(j, 0)] * t).sin_cos();
                    let u = q.column(j) * cs + q.column(k + j) * sn;
                    let du = (q.column(j) * -sn + q.column(k + j) * cs) * t;
                    s -= 2.0 * (c * u).dot(&du);
                }
                s
            })
        }
    }

    fn smoothness_bound(&self, i: usize, _state: &[Mat]) -> Option<f64> {
        if i == 0 {
            // ‖∇²‖ ≤ 2 Σ‖X_i‖₂² since ‖Z_i‖₂ = 1
            Some(self.cov.iter().map(|c| 2.0 * linalg::max_eigenvalue(c).unwrap_or(0.0)).sum())
        } else {
            None
        }
    }

    fn custom_surrogate<'a>(
        &'a self,
        i: usize,
        state: &[Mat],
        _cycle: usize,
    ) -> Option<Result<Box<dyn Surrogate + 'a>>> {
        if i != 1 {
            return None;
        }
        Some(self.coefficients(&state[0]).map(|coef| {
            let anchor = state[1].clone();
            let weights = coef.lipschitz.iter().map(|l| l + self.lambda_theta).collect();
            let f_anchor = coef.value(&anchor);
            let g_anchor = coef.grad(&anchor);
            Box::new(ThetaSurrogate {
                coef,
                anchor,
                weights,
                f_anchor,
                g_anchor,
            }) as Box<dyn Surrogate + 'a>
        }))
    }
}

/// Separable prox-linear majorizer of the Θ marginal with per-angle weights
/// `L_j + λ_Θ`.
pub struct ThetaSurrogate {
    pub coef: ThetaCoefficients,
    anchor: Mat,
    weights: Vec<f64>,
    f_anchor: f64,
    g_anchor: Mat,
}

impl Surrogate for ThetaSurrogate {
    fn kind(&self) -> SurrogateKind {
        SurrogateKind::Custom
    }

    fn manifold(&self) -> Manifold {
        Manifold::Euclidean {
            rows: self.anchor.nrows(),
            cols: 1,
        }
    }

    fn anchor(&self) -> &Mat {
        &self.anchor
    }

    fn value(&self, x: &Mat) -> f64 {
        let dx = x - &self.anchor;
        let quad: f64 = dx.iter().zip(&self.weights).map(|(d, w)| 0.5 * w * d * d).sum();
        self.f_anchor + frob_dot(&self.g_anchor, &dx) + quad
    }

    fn rgrad(&self, x: &Mat) -> Result<Mat> {
        let dx = x - &self.anchor;
        Ok(Mat::from_fn(dx.nrows(), 1, |j, _| self.g_anchor[(j, 0)] + self.weights[j] * dx[(j, 0)]))
    }

    fn closed_form(&self, constraint: &Constraint) -> Option<Result<Mat>> {
        if *constraint != Constraint::WholeManifold {
            return None;
        }
        Some(Ok(Mat::from_fn(self.anchor.nrows(), 1, |j, _| {
            let w = self.weights[j];
            if w > 0.0 {
                self.anchor[(j, 0)] - self.g_anchor[(j, 0)] / w
            } else {
                self.anchor[(j, 0)]
            }
        })))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn coefficient_examples() {
        // α = 1, β = 0, γ = 0
        let h = Mat::from_column_slice(2, 1, &[1.0, 0.0]);
        let y = Mat::from_column_slice(2, 1, &[0.0, 1.0]);
        let x = Mat::from_column_slice(2, 1, &[1.0, 0.0]);
        let c = st_theta_coefficients(&h, &y, &[x], &[0.5]).unwrap();
        assert_eq!(c.phi[(0, 0)], 0.0);
        assert_relative_eq!(c.r[(0, 0)], 0.5);
        assert_relative_eq!(c.b[(0, 0)], 0.5);
        let c = st_theta_coefficients(&h, &y, &[Mat::zeros(2, 1)], &[0.5]).unwrap();
        assert!(c.r.iter().chain(c.b.iter()).all(|&v| v == 0.0));
        // α = γ, β = 0
        let x = Mat::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 1.0]);
        let c = st_theta_coefficients(&h, &y, &[x], &[0.5]).unwrap();
        assert_eq!((c.r[(0, 0)], c.phi[(0, 0)]), (0.0, 0.0));
    }

    #[test]
    fn separable_form_matches_objective() {
        let data = st_generate(8, 2, 5, 3, 0.1, 11).unwrap();
        let p = SubspaceProblem::from_data(&data, 0.0).unwrap();
        let mut r = rng::seeded(5);
        let init = p.random_init(&mut r);
        let q = init.blocks[0].data.clone();
        let coef = p.coefficients(&q).unwrap();
        for _ in 0..10 {
            let th = Mat::from_fn(2, 1, |_, _| rng::uniform(&mut r, -2.0, 2.0));
            let st = [q.clone(), th.clone()];
            assert_relative_eq!(coef.value(&th), p.value(&st), epsilon = 1e-9, max_relative = 1e-12);
            assert_relative_eq!(coef.grad(&th), p.egrad_block(1, &st), epsilon = 1e-9);
        }
    }

    #[test]
    fn generator_examples() {
        let a = st_generate(6, 2, 4, 3, 0.0, 9).unwrap();
        let b = st_generate(6, 2, 4, 3, 0.0, 9).unwrap();
        assert_eq!(a.x, b.x);
        for x in &a.x {
            let s = linalg::svd(x).unwrap();
            assert!(s.s.len() < 3 || s.s[2] < 1e-10 * s.s[0]);
        }
        let mut m = a.truth.clone();
        m.theta = alloc::vec![0.0; 2];
        assert_eq!(m.u(0.7), m.h);
        let q = m.q();
        assert!((q.transpose() * &q - Mat::identity(4, 4)).norm() < 1e-12);
        assert!(st_generate(4, 3, 2, 1, 0.0, 0).is_err());
    }

    #[test]
    fn geodesic_error_examples() {
        let truth = GeodesicSubspaceModel {
            h: Mat::from_column_slice(2, 1, &[1.0, 0.0]),
            y: Mat::from_column_slice(2, 1, &[0.0, 1.0]),
            theta: alloc::vec![0.0],
        };
        assert_eq!(st_geodesic_error(&truth, &truth, 10).unwrap(), 0.0);
        let perp = GeodesicSubspaceModel {
            h: truth.y.clone(),
            y: truth.h.clone(),
            theta: alloc::vec![0.0],
        };
        assert_relative_eq!(st_geodesic_error(&perp, &truth, 10).unwrap(), 1.0, epsilon = 1e-14);
        let flipped = GeodesicSubspaceModel {
            h: -&truth.h,
            ..truth.clone()
        };
        assert!(st_geodesic_error(&flipped, &truth, 5).unwrap() < 1e-15);
        assert!(st_geodesic_error(&truth, &truth, 0).is_err());
    }

    #[test]
    fn theta_step_fixed_points() {
        // single angle sitting on a cosine peak: 2θt = φ
        let h = Mat::from_column_slice(2, 1, &[1.0, 0.0]);
        let y = Mat::from_column_slice(2, 1, &[0.0, 1.0]);
        let x = Mat::from_column_slice(2, 1, &[0.6f64.cos(), 0.6f64.sin()]);
        let c = st_theta_coefficients(&h, &y, &[x], &[1.0]).unwrap();
        let th = Mat::from_element(1, 1, c.phi[(0, 0)] / 2.0);
        assert!(c.grad(&th)[(0, 0)].abs() < 1e-15);
    }
}
