//! CP decomposition `X ≈ [[U⁽¹⁾, …, U⁽ᵐ⁾]]` with Euclidean, Stiefel or
//! fixed-rank factor blocks.

use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use crate::driver::BlockProblem;
use crate::error::{contract, degenerate, Result};
use crate::geometry::{Manifold, Point, ProductPoint};
use crate::linalg;
use crate::rng::{self, Rng};
use crate::surrogates::{Schedule, SurrogateKind};
use crate::Mat;

/// Dense tensor stored row-major (last index fastest).
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor {
    pub dims: Vec<usize>,
    pub data: Vec<f64>,
}

impl Tensor {
    pub fn new(dims: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        if dims.is_empty() || dims.contains(&0) || dims.iter().product::<usize>() != data.len() {
            return Err(contract("tensor data length does not match its dimensions"));
        }
        Ok(Tensor { dims, data })
    }

    pub fn norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Multi-index of a row-major linear offset.
    fn index(&self, mut lin: usize, out: &mut [usize]) {
        for k in (0..self.dims.len()).rev() {
            out[k] = lin % self.dims[k];
            lin /= self.dims[k];
        }
    }

    /// Column of the mode-`i` unfolding holding the given multi-index; the
    /// remaining modes are ordered with the lowest mode varying fastest.
    fn unfold_column(&self, i: usize, idx: &[usize]) -> usize {
        let mut col = 0;
        let mut stride = 1;
        for k in 0..self.dims.len() {
            if k != i {
                col += idx[k] * stride;
                stride *= self.dims[k];
            }
        }
        col
    }

    /// Mode-`i` unfolding, `I_i × Π_{k≠i} I_k`.
    pub fn unfold(&self, i: usize) -> Mat {
        let cols = self.data.len() / self.dims[i];
        let mut out = Mat::zeros(self.dims[i], cols);
        let mut idx = alloc::vec![0; self.dims.len()];
        for (lin, &v) in self.data.iter().enumerate() {
            self.index(lin, &mut idx);
            out[(idx[i], self.unfold_column(i, &idx))] = v;
        }
        out
    }

    pub fn from_factors(factors: &[Mat]) -> Result<Tensor> {
        let r = factors.first().map(|f| f.ncols()).ok_or_else(|| contract("no factors"))?;
        if factors.iter().any(|f| f.ncols() != r) {
            return Err(contract("factors must share the rank"));
        }
        let dims: Vec<usize> = factors.iter().map(|f| f.nrows()).collect();
        let total = dims.iter().product();
        let mut t = Tensor {
            dims,
            data: alloc::vec![0.0; total],
        };
        let mut idx = alloc::vec![0; factors.len()];
        for lin in 0..total {
            t.index(lin, &mut idx);
            t.data[lin] = (0..r)
                .map(|c| factors.iter().zip(&idx).map(|(f, &ix)| f[(ix, c)]).product::<f64>())
                .sum();
        }
        Ok(t)
    }
}

/// Khatri-Rao product of all factors but the `i`-th, so that the mode-`i`
/// unfolding of `[[U]]` equals `U⁽ⁱ⁾ Bᵀ`.
pub fn khatri_b(dims: &[usize], factors: &[Mat], i: usize) -> Mat {
    let r = factors[i].ncols();
    let rows: usize = dims.iter().enumerate().filter(|(k, _)| *k != i).map(|(_, d)| d).product();
    let mut b = Mat::from_element(rows, r, 1.0);
    let mut stride = 1;
    for k in 0..dims.len() {
        if k == i {
            continue;
        }
        for row in 0..rows {
            let ix = (row / stride) % dims[k];
            for c in 0..r {
                b[(row, c)] *= factors[k][(ix, c)];
            }
        }
        stride *= dims[k];
    }
    b
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FactorKind {
    Euclidean,
    Stiefel,
    FixedRank(usize),
}

#[derive(Clone, Debug)]
pub struct CpProblem {
    pub tensor: Tensor,
    pub rank: usize,
    pub kinds: Vec<FactorKind>,
    unfoldings: Vec<Mat>,
    norm_sq: f64,
}

impl CpProblem {
    pub fn new(tensor: Tensor, rank: usize, kinds: Vec<FactorKind>) -> Result<Self> {
        if rank == 0 || kinds.len() != tensor.dims.len() {
            return Err(contract("need R ≥ 1 and one factor kind per mode"));
        }
        for (k, d) in kinds.iter().zip(&tensor.dims) {
            match *k {
                FactorKind::Stiefel if rank > *d => return Err(contract("Stiefel factor needs R ≤ I_i")),
                FactorKind::FixedRank(q) if q == 0 || q > rank.min(*d) => {
                    return Err(contract("fixed-rank factor needs 1 ≤ rank ≤ min(I_i, R)"))
                }
                _ => {}
            }
        }
        let unfoldings = (0..tensor.dims.len()).map(|i| tensor.unfold(i)).collect();
        let norm_sq = tensor.norm().powi(2);
        Ok(CpProblem {
            tensor,
            rank,
            kinds,
            unfoldings,
            norm_sq,
        })
    }

    /// Proximal weight λ' for the Euclidean proximal family reproducing the
    /// penalty `λ_n ‖U − U_{n−1}‖²` with `λ_n = initial · ratioⁿ`.
    pub fn penalty_schedule(initial: f64, ratio: f64) -> Schedule {
        Schedule::Geometric {
            initial: 2.0 * initial,
            ratio,
        }
    }

    pub fn random_init(&self, rng: &mut Rng) -> ProductPoint {
        ProductPoint::new(
            (0..self.kinds.len())
                .map(|i| {
                    let m = self.manifold(i);
                    Point::new_unchecked(m, m.random_point(rng))
                })
                .collect(),
        )
    }

    pub fn relative_error(&self, state: &[Mat]) -> f64 {
        (self.value(state) / self.norm_sq).sqrt()
    }

    fn residual(&self, i: usize, state: &[Mat]) -> (Mat, Mat) {
        let b = khatri_b(&self.tensor.dims, state, i);
        let r = &state[i] * b.transpose() - &self.unfoldings[i];
        (r, b)
    }

    /// Ridge step `U = (X_(i)B + λU_prev)(BᵀB + λI)⁻¹`.
    pub fn ridge_step(&self, i: usize, state: &[Mat], lambda: f64) -> Result<Mat> {
        let b = khatri_b(&self.tensor.dims, state, i);
        let r = self.rank;
        let gram = b.transpose() * &b + Mat::identity(r, r) * lambda;
        let rhs = &self.unfoldings[i] * &b + &state[i] * lambda;
        let chol = nalgebra::Cholesky::new(gram).ok_or_else(|| degenerate("BᵀB + λI is singular"))?;
        Ok(chol.solve(&rhs.transpose()).transpose())
    }
}

/// Exact-rank synthetic data with i.i.d. Gaussian factors. With
/// `orthonormal_first` the first factor is replaced by its polar factor.
pub fn cp_generate(dims: &[usize], rank: usize, orthonormal_first: bool, seed: u64) -> Result<(Tensor, Vec<Mat>)> {
    let mut r = rng::seeded(seed);
    let mut factors: Vec<Mat> = dims.iter().map(|&d| rng::gaussian(&mut r, d, rank)).collect();
    if orthonormal_first {
        factors[0] = linalg::polar(&factors[0])?;
    }
    Ok((Tensor::from_factors(&factors)?, factors))
}

impl BlockProblem for CpProblem {
    fn num_blocks(&self) -> usize {
        self.kinds.len()
    }

    fn manifold(&self, i: usize) -> Manifold {
        let (d, r) = (self.tensor.dims[i], self.rank);
        match self.kinds[i] {
            FactorKind::Euclidean => Manifold::Euclidean { rows: d, cols: r },
            FactorKind::Stiefel => Manifold::Stiefel { n: d, k: r },
            FactorKind::FixedRank(q) => Manifold::FixedRank {
                rows: d,
                cols: r,
                rank: q,
            },
        }
    }

    fn value(&self, state: &[Mat]) -> f64 {
        self.residual(0, state).0.norm_squared()
    }

    fn egrad_block(&self, i: usize, state: &[Mat]) -> Mat {
        let (r, b) = self.residual(i, state);
        r * b * 2.0
    }

    fn smoothness_bound(&self, i: usize, state: &[Mat]) -> Option<f64> {
        let b = khatri_b(&self.tensor.dims, state, i);
        Some(2.0 * linalg::max_eigenvalue(&(b.transpose() * b)).ok()?)
    }

    fn curvature_bound(&self, i: usize, state: &[Mat]) -> Option<f64> {
        let b = khatri_b(&self.tensor.dims, state, i);
        Some(2.0 * linalg::min_eigenvalue(&(b.transpose() * b)).ok()?.max(0.0))
    }

    fn exact_minimizer(&self, i: usize, state: &[Mat], kind: &SurrogateKind) -> Option<Result<Mat>> {
        if self.kinds[i] != FactorKind::Euclidean {
            return None;
        }
        match *kind {
            SurrogateKind::Identity => Some(self.ridge_step(i, state, 0.0)),
            SurrogateKind::EuclideanProximal(l) | SurrogateKind::RiemannianProximal(l) => {
                Some(self.ridge_step(i, state, 0.5 * l))
            }
            _ => None,
        }
    }

    fn lower_bound(&self) -> Option<f64> {
        Some(0.0)
    }
}
