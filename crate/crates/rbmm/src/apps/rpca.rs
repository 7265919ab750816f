//! Smoothed robust PCA `F(L, S) = g_σ(S) + ‖M − L − S‖²/(2μ)` with L of
//! fixed rank.

use crate::driver::BlockProblem;
use crate::error::{contract, Result};
use crate::geometry::{Manifold, Point, ProductPoint};
use crate::linalg;
use crate::rng;
use crate::surrogates::SurrogateKind;
use crate::Mat;

#[allow(unused_imports)]
use num_traits::Float;

#[derive(Clone, Debug)]
pub struct RpcaProblem {
    pub m: Mat,
    pub rank: usize,
    /// Sparsity weight λ.
    pub lambda: f64,
    pub mu: f64,
    pub sigma: f64,
}

fn clip(v: f64, lim: f64) -> f64 {
    v.max(-lim).min(lim)
}

/// `max_{|z| ≤ λ} s·z − (σ/2)z²`.
pub fn g_sigma_scalar(s: f64, lambda: f64, sigma: f64) -> f64 {
    let z = clip(s / sigma, lambda);
    s * z - 0.5 * sigma * z * z
}

impl RpcaProblem {
    pub fn new(m: Mat, rank: usize, lambda: f64, mu: f64, sigma: f64) -> Result<Self> {
        if rank == 0 || rank >= m.nrows().min(m.ncols()) {
            return Err(contract("rank must satisfy 1 ≤ r < min(m, n)"));
        }
        if !(sigma > 0.0 && mu > 0.0 && lambda >= 0.0) {
            return Err(contract("need σ > 0, μ > 0, λ ≥ 0"));
        }
        Ok(RpcaProblem {
            m,
            rank,
            lambda,
            mu,
            sigma,
        })
    }

    /// Defaults λ = 1/√max(m, n), μ = 1, σ = 1e-2.
    pub fn with_defaults(m: Mat, rank: usize) -> Result<Self> {
        let lambda = 1.0 / (m.nrows().max(m.ncols()) as f64).sqrt();
        RpcaProblem::new(m, rank, lambda, 1.0, 1e-2)
    }

    pub fn g_sigma(&self, s: &Mat) -> f64 {
        s.iter().map(|&v| g_sigma_scalar(v, self.lambda, self.sigma)).sum()
    }

    pub fn z_sigma(&self, s: &Mat) -> Mat {
        s.map(|v| clip(v / self.sigma, self.lambda))
    }

    /// Rank-r truncation of `((M − S)/μ + λ_k L_k) / (1/μ + λ_k)`.
    pub fn l_update(&self, s: &Mat, l_prev: &Mat, lambda_k: f64) -> Result<Mat> {
        let a = 1.0 / self.mu + lambda_k;
        let c = ((&self.m - s) / self.mu + l_prev * lambda_k) / a;
        linalg::truncate_rank(&c, self.rank)
    }

    /// Entrywise minimizer of `g_σ(S) + ‖M − L − S‖²/(2μ) + (λ_k/2)‖S − S_k‖²`.
    pub fn s_update(&self, l: &Mat, s_prev: &Mat, lambda_k: f64) -> Mat {
        let a = 1.0 / self.mu + lambda_k;
        let c = ((&self.m - l) / self.mu + s_prev * lambda_k) / a;
        c.map(|v| v - clip(v / (self.sigma + 1.0 / a), self.lambda) / a)
    }

    pub fn init(&self) -> Result<ProductPoint> {
        Ok(ProductPoint::new(alloc::vec![
            Point::new_unchecked(self.manifold(0), linalg::truncate_rank(&self.m, self.rank)?),
            Point::new_unchecked(self.manifold(1), Mat::zeros(self.m.nrows(), self.m.ncols())),
        ]))
    }
}

#[derive(Clone, Debug)]
pub struct RpcaData {
    pub m: Mat,
    pub l0: Mat,
    pub s0: Mat,
}

/// `L₀ = ABᵀ` with Gaussian A, B, then each entry is corrupted by ±1 with
/// probability `fraction`. Draw order: A, B, then per entry (column-major)
/// a uniform for the support and one for the sign.
pub fn rpca_generate(m: usize, n: usize, r: usize, fraction: f64, seed: u64) -> Result<RpcaData> {
    if r == 0 || r >= m.min(n) || !(0.0..=1.0).contains(&fraction) {
        return Err(contract("need 1 ≤ r < min(m, n) and a fraction in [0, 1]"));
    }
    let mut g = rng::seeded(seed);
    let a = rng::gaussian(&mut g, m, r);
    let b = rng::gaussian(&mut g, n, r);
    let l0 = &a * b.transpose();
    let mut s0 = Mat::zeros(m, n);
    for j in 0..n {
        for i in 0..m {
            let hit = rng::uniform(&mut g, 0.0, 1.0) < fraction;
            let sign = if rng::uniform(&mut g, 0.0, 1.0) < 0.5 { -1.0 } else { 1.0 };
            if hit {
                s0[(i, j)] = sign;
            }
        }
    }
    Ok(RpcaData { m: &l0 + &s0, l0, s0 })
}

impl BlockProblem for RpcaProblem {
    fn num_blocks(&self) -> usize {
        2
    }

    fn manifold(&self, i: usize) -> Manifold {
        let (rows, cols) = self.m.shape();
        if i == 0 {
            Manifold::FixedRank {
                rows,
                cols,
                rank: self.rank,
            }
        } else {
            Manifold::Euclidean { rows, cols }
        }
    }

    fn value(&self, state: &[Mat]) -> f64 {
        let r = &self.m - &state[0] - &state[1];
        self.g_sigma(&state[1]) + r.norm_squared() / (2.0 * self.mu)
    }

    fn egrad_block(&self, i: usize, state: &[Mat]) -> Mat {
        let r = (&self.m - &state[0] - &state[1]) / self.mu;
        if i == 0 {
            -r
        } else {
            self.z_sigma(&state[1]) - r
        }
    }

    fn smoothness_bound(&self, i: usize, _state: &[Mat]) -> Option<f64> {
        Some(if i == 0 {
            1.0 / self.mu
        } else {
            1.0 / self.mu + 1.0 / self.sigma
        })
    }

    fn curvature_bound(&self, _i: usize, _state: &[Mat]) -> Option<f64> {
        Some(1.0 / self.mu)
    }

    fn exact_minimizer(&self, i: usize, state: &[Mat], kind: &SurrogateKind) -> Option<Result<Mat>> {
        let lk = match *kind {
            SurrogateKind::Identity => 0.0,
            SurrogateKind::EuclideanProximal(l) => l,
            SurrogateKind::RiemannianProximal(l) if i == 1 => l,
            _ => return None,
        };
        Some(if i == 0 {
            self.l_update(&state[1], &state[0], lk)
        } else {
            Ok(self.s_update(&state[0], &state[1], lk))
        })
    }

    fn lower_bound(&self) -> Option<f64> {
        Some(0.0)
    }
}
