//! Optimistic likelihood over a Euclidean ball for μ and a Fisher-Rao ball
//! for Σ: `f(μ, Σ) = ⟨S(μ), Σ⁻¹⟩ + log det Σ`.

use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use crate::driver::BlockProblem;
use crate::error::{contract, degenerate, Result};
use crate::geometry::{Manifold, Point, ProductPoint};
use crate::linalg::{self, frob_dot};
use crate::rng;
use crate::surrogates::{Constraint, SurrogateKind};
use crate::Mat;

#[derive(Clone, Debug)]
pub struct OptimisticLikelihoodProblem {
    /// Observations, one per column.
    pub x: Mat,
    pub mu_hat: Mat,
    pub sigma_hat: Mat,
    pub rho1: f64,
    pub rho2: f64,
    xbar: Mat,
    /// Scatter of the observations about their own mean.
    scatter: Mat,
    lmin_hat: f64,
}

/// `(1/M) Σ (x_m − c)(x_m − c)ᵀ`.
fn scatter_about(x: &Mat, c: &Mat) -> Mat {
    let mut s = Mat::zeros(x.nrows(), x.nrows());
    for col in x.column_iter() {
        let d = col - c;
        s += &d * d.transpose();
    }
    s / x.ncols() as f64
}

fn column_mean(x: &Mat) -> Mat {
    Mat::from_fn(x.nrows(), 1, |r, _| x.row(r).sum() / x.ncols() as f64)
}

impl OptimisticLikelihoodProblem {
    /// `rho1 = None` uses `max_m ‖x_m − μ̂‖`.
    pub fn new(x: Mat, mu_hat: Mat, sigma_hat: Mat, rho1: Option<f64>, rho2: f64) -> Result<Self> {
        let n = x.nrows();
        if x.ncols() < 2 || mu_hat.shape() != (n, 1) || sigma_hat.shape() != (n, n) {
            return Err(contract("need M ≥ 2 observations and matching μ̂, Σ̂"));
        }
        Manifold::Spd { n }
            .validate(&sigma_hat)
            .map_err(|_| degenerate("Σ̂ is not positive definite"))?;
        let rho1 = match rho1 {
            Some(r) => r,
            None => x.column_iter().map(|c| (c - &mu_hat).norm()).fold(0.0, f64::max),
        };
        if !(rho1 > 0.0) || !(rho2 > 0.0) {
            return Err(contract("radii must be positive"));
        }
        let xbar = column_mean(&x);
        let scatter = scatter_about(&x, &xbar);
        let lmin_hat = linalg::min_eigenvalue(&sigma_hat)?;
        Ok(OptimisticLikelihoodProblem {
            x,
            mu_hat,
            sigma_hat,
            rho1,
            rho2,
            xbar,
            scatter,
            lmin_hat,
        })
    }

    pub fn dim(&self) -> usize {
        self.x.nrows()
    }

    /// `S(μ) = (1/M) Σ (x_m − μ)(x_m − μ)ᵀ`.
    pub fn s_matrix(&self, mu: &Mat) -> Mat {
        let d = &self.xbar - mu;
        &self.scatter + &d * d.transpose()
    }

    pub fn sample_mean(&self) -> &Mat {
        &self.xbar
    }

    pub fn init(&self) -> ProductPoint {
        ProductPoint::new(alloc::vec![
            Point::new_unchecked(self.manifold(0), self.mu_hat.clone()),
            Point::new_unchecked(self.manifold(1), self.sigma_hat.clone()),
        ])
    }

    /// Minimizer of `(μ − x̄)ᵀP(μ − x̄) + (λ/2)‖μ − a‖²` over the μ ball, with
    /// `P = Σ⁻¹`. The multiplier ν of the ball is found by bisection.
    pub fn mu_step(&self, sigma: &Mat, anchor: &Mat, lambda: f64) -> Result<Mat> {
        let p = linalg::spd_inv(sigma)?;
        let (d, v) = linalg::sym_eig(&p)?;
        let rhs = &p * (&self.xbar - &self.mu_hat) * 2.0 + (anchor - &self.mu_hat) * lambda;
        let w = v.transpose() * rhs;
        let solve = |nu: f64| -> Mat {
            let z = Mat::from_fn(w.nrows(), 1, |k, _| w[(k, 0)] / (2.0 * d[k] + lambda + nu));
            &v * z
        };
        let off = solve(0.0);
        if off.norm() <= self.rho1 {
            return Ok(&self.mu_hat + off);
        }
        let (mut lo, mut hi) = (0.0, 1.0);
        while solve(hi).norm() > self.rho1 {
            hi *= 2.0;
            if hi > 1e300 {
                return Err(degenerate("ball multiplier diverged"));
            }
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if solve(mid).norm() > self.rho1 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let off = solve(hi);
        let nrm = off.norm();
        // land exactly on the sphere
        Ok(&self.mu_hat + off * (self.rho1 / nrm).min(1.0))
    }

    /// Unconstrained minimizer of `⟨S, Σ⁻¹⟩ + log det Σ + (λ/2) d²(Σ, A)`.
    pub fn sigma_step_unconstrained(&self, s: &Mat, anchor: &Mat, lambda: f64) -> Result<Mat> {
        let (a_half, a_ihalf) = linalg::spd_sqrt_pair(anchor)?;
        let st = linalg::sym(&(&a_ihalf * s * &a_ihalf));
        let (ev, v) = linalg::sym_eig(&st)?;
        let mut u = Vec::with_capacity(ev.len());
        for &sk in &ev {
            u.push(eigen_root(sk.max(0.0), lambda)?);
        }
        let w = &v * Mat::from_diagonal(&nalgebra::DVector::from_iterator(u.len(), u.iter().map(|x| x.exp()))) * v.transpose();
        Ok(linalg::sym(&(&a_half * w * &a_half)))
    }

    pub fn fr_dist_to_center(&self, sigma: &Mat) -> Result<f64> {
        Manifold::Spd { n: self.dim() }.dist_raw(&self.sigma_hat, sigma)
    }

    /// Lower eigenvalue bound of the Fisher-Rao ball.
    pub fn sigma_floor(&self) -> f64 {
        self.lmin_hat * (-core::f64::consts::SQRT_2 * self.rho2).exp()
    }
}

/// Root of `−s e^{−u} + 1 + (λ/2)u = 0`.
fn eigen_root(s: f64, lambda: f64) -> Result<f64> {
    if lambda == 0.0 {
        if s > 0.0 {
            return Ok(s.ln());
        }
        return Err(degenerate("singular scatter with λ = 0"));
    }
    let h = |u: f64| -s * (-u).exp() + 1.0 + 0.5 * lambda * u;
    let (mut lo, mut hi) = if s > 0.0 {
        (s.ln().min(0.0), s.ln().max(0.0))
    } else {
        (-2.0 / lambda, 0.0)
    };
    if h(lo) >= 0.0 {
        return Ok(lo);
    }
    if h(hi) <= 0.0 {
        return Ok(hi);
    }
    let mut u = 0.5 * (lo + hi);
    for _ in 0..200 {
        let hu = h(u);
        if hu == 0.0 {
            return Ok(u);
        }
        if hu < 0.0 {
            lo = u;
        } else {
            hi = u;
        }
        let dh = s * (-u).exp() + 0.5 * lambda;
        let newton = u - hu / dh;
        let next = if newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
        if (next - u).abs() <= 1e-15 * u.abs().max(1.0) {
            return Ok(next);
        }
        u = next;
    }
    Ok(u)
}

impl BlockProblem for OptimisticLikelihoodProblem {
    fn num_blocks(&self) -> usize {
        2
    }

    fn manifold(&self, i: usize) -> Manifold {
        let n = self.dim();
        if i == 0 {
            Manifold::Euclidean { rows: n, cols: 1 }
        } else {
            Manifold::Spd { n }
        }
    }

    fn constraint(&self, i: usize) -> Constraint {
        if i == 0 {
            Constraint::EuclideanBall {
                center: self.mu_hat.clone(),
                radius: self.rho1,
            }
        } else {
            Constraint::GeodesicBall {
                center: self.sigma_hat.clone(),
                radius: self.rho2,
            }
        }
    }

    fn value(&self, state: &[Mat]) -> f64 {
        let (mu, sigma) = (&state[0], &state[1]);
        let (Ok(inv), Ok(ld)) = (linalg::spd_inv(sigma), linalg::spd_logdet(sigma)) else {
            return f64::INFINITY;
        };
        frob_dot(&self.s_matrix(mu), &inv) + ld
    }

    fn egrad_block(&self, i: usize, state: &[Mat]) -> Mat {
        let (mu, sigma) = (&state[0], &state[1]);
        let n = self.dim();
        let Ok(inv) = linalg::spd_inv(sigma) else {
            let shape = if i == 0 { (n, 1) } else { (n, n) };
            return Mat::from_element(shape.0, shape.1, f64::NAN);
        };
        if i == 0 {
            &inv * (mu - &self.xbar) * 2.0
        } else {
            linalg::sym(&(&inv - &inv * self.s_matrix(mu) * &inv))
        }
    }

    fn smoothness_bound(&self, i: usize, state: &[Mat]) -> Option<f64> {
        let growth = (core::f64::consts::SQRT_2 * self.rho2).exp();
        if i == 0 {
            Some(2.0 * growth / self.lmin_hat)
        } else {
            let lmax = linalg::max_eigenvalue(&self.s_matrix(&state[0])).ok()?;
            Some(2.0 * lmax * growth / self.lmin_hat)
        }
    }

    fn curvature_bound(&self, i: usize, state: &[Mat]) -> Option<f64> {
        if i == 0 {
            // Hessian 2Σ⁻¹
            Some(2.0 / linalg::max_eigenvalue(&state[1]).ok()?)
        } else {
            // ⟨S, Σ⁻¹⟩ is geodesically convex and log det is geodesically linear
            Some(0.0)
        }
    }

    fn exact_minimizer(&self, i: usize, state: &[Mat], kind: &SurrogateKind) -> Option<Result<Mat>> {
        let lambda = match *kind {
            SurrogateKind::Identity => 0.0,
            SurrogateKind::EuclideanProximal(l) if i == 0 => l,
            SurrogateKind::RiemannianProximal(l) => l,
            _ => return None,
        };
        if i == 0 {
            return Some(self.mu_step(&state[1], &state[0], lambda));
        }
        let s = self.s_matrix(&state[0]);
        let cand = match self.sigma_step_unconstrained(&s, &state[1], lambda) {
            Ok(c) => c,
            Err(e) => return Some(Err(e)),
        };
        match self.fr_dist_to_center(&cand) {
            Ok(d) if d <= self.rho2 => Some(Ok(cand)),
            Ok(_) => None,
            Err(e) => Some(Err(e)),
        }
    }
}

#[derive(Clone, Debug)]
pub struct LikelihoodData {
    pub train: Mat,
    pub test: Mat,
    pub mu_hat: Mat,
    pub sigma_hat: Mat,
}

/// Training sample from `N(0, Σ₀)` with `Σ₀ = GGᵀ/n + 0.5·I`, giving μ̂ and
/// Σ̂; test sample from `N(shift·1, 2Σ₀)`. Draw order: G, training, test.
pub fn ol_generate(n: usize, train: usize, test: usize, shift: f64, seed: u64) -> Result<LikelihoodData> {
    if n == 0 || train <= n || test < 2 {
        return Err(contract("need n ≥ 1, more training points than dimensions, and M ≥ 2"));
    }
    let mut r = rng::seeded(seed);
    let g = rng::gaussian(&mut r, n, n);
    let sigma0 = linalg::sym(&(&g * g.transpose() / n as f64)) + Mat::identity(n, n) * 0.5;
    let chol = nalgebra::Cholesky::new(sigma0.clone()).ok_or_else(|| degenerate("Σ₀ not SPD"))?;
    let l = chol.l();
    let train_x = &l * rng::gaussian(&mut r, n, train);
    let test_x = (&l * rng::gaussian(&mut r, n, test)) * core::f64::consts::SQRT_2
        + Mat::from_element(n, test, shift);
    let mu_hat = column_mean(&train_x);
    let sigma_hat = linalg::sym(&scatter_about(&train_x, &mu_hat));
    Ok(LikelihoodData {
        train: train_x,
        test: test_x,
        mu_hat,
        sigma_hat,
    })
}
