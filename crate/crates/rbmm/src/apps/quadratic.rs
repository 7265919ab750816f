//! `f(θ) = ½θᵀAθ − bᵀθ + c` with θ split into column-vector blocks.

use alloc::vec;
use alloc::vec::Vec;

use crate::driver::BlockProblem;
use crate::error::{contract, Result};
use crate::geometry::{Manifold, Point, ProductPoint};
use crate::linalg;
use crate::rng;
use crate::surrogates::{Constraint, SurrogateKind};
use crate::Mat;

#[derive(Clone, Debug)]
pub struct QuadraticProblem {
    pub a: Mat,
    pub b: Mat,
    pub c: f64,
    sizes: Vec<usize>,
    offsets: Vec<usize>,
    constraints: Vec<Constraint>,
}

impl QuadraticProblem {
    pub fn new(a: Mat, b: Mat, c: f64, sizes: Vec<usize>) -> Result<Self> {
        let n: usize = sizes.iter().sum();
        if a.shape() != (n, n) || b.shape() != (n, 1) || sizes.contains(&0) {
            return Err(contract("block sizes do not match A and b"));
        }
        if (&a - a.transpose()).norm() > 1e-12 * a.norm().max(1.0) {
            return Err(contract("A must be symmetric"));
        }
        let mut offsets = Vec::with_capacity(sizes.len());
        let mut o = 0;
        for s in &sizes {
            offsets.push(o);
            o += s;
        }
        let constraints = vec![Constraint::WholeManifold; sizes.len()];
        Ok(QuadraticProblem {
            a,
            b,
            c,
            sizes,
            offsets,
            constraints,
        })
    }

    /// `(θ₁−1)² + (θ₂−2)² + θ₁θ₂` on ℝ × ℝ, stationary at (0, 2).
    pub fn demo() -> Self {
        let a = Mat::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]);
        let b = Mat::from_column_slice(2, 1, &[2.0, 4.0]);
        QuadraticProblem::new(a, b, 5.0, vec![1, 1]).expect("demo is well formed")
    }

    /// Random SPD instance `A = GᵀG/n + 0.1·I`.
    pub fn random(sizes: Vec<usize>, seed: u64) -> Self {
        let n: usize = sizes.iter().sum();
        let mut r = rng::seeded(seed);
        let g = rng::gaussian(&mut r, n, n);
        let a = linalg::sym(&(g.transpose() * &g / n as f64)) + Mat::identity(n, n) * 0.1;
        let b = rng::gaussian(&mut r, n, 1);
        QuadraticProblem::new(a, b, 0.0, sizes).expect("sizes match by construction")
    }

    pub fn with_constraint(mut self, i: usize, c: Constraint) -> Result<Self> {
        c.validate(&self.manifold(i))?;
        self.constraints[i] = c;
        Ok(self)
    }

    pub fn zero_init(&self) -> ProductPoint {
        ProductPoint::new(
            self.sizes
                .iter()
                .map(|&s| Point::new_unchecked(Manifold::Euclidean { rows: s, cols: 1 }, Mat::zeros(s, 1)))
                .collect(),
        )
    }

    pub fn stack(&self, state: &[Mat]) -> Mat {
        let n = self.b.nrows();
        let mut x = Mat::zeros(n, 1);
        for (i, blk) in state.iter().enumerate() {
            x.view_mut((self.offsets[i], 0), (self.sizes[i], 1)).copy_from(blk);
        }
        x
    }

    /// Unconstrained minimizer `A⁻¹b`.
    pub fn minimizer(&self) -> Result<Mat> {
        linalg::spd_solve(&self.a, &self.b)
    }

    fn diag_block(&self, i: usize) -> Mat {
        let (o, s) = (self.offsets[i], self.sizes[i]);
        self.a.view((o, o), (s, s)).into_owned()
    }
}

impl BlockProblem for QuadraticProblem {
    fn num_blocks(&self) -> usize {
        self.sizes.len()
    }

    fn manifold(&self, i: usize) -> Manifold {
        Manifold::Euclidean {
            rows: self.sizes[i],
            cols: 1,
        }
    }

    fn constraint(&self, i: usize) -> Constraint {
        self.constraints[i].clone()
    }

    fn value(&self, state: &[Mat]) -> f64 {
        let x = self.stack(state);
        0.5 * (x.transpose() * &self.a * &x)[(0, 0)] - self.b.dot(&x) + self.c
    }

    fn egrad_block(&self, i: usize, state: &[Mat]) -> Mat {
        let x = self.stack(state);
        let g = &self.a * x - &self.b;
        g.rows(self.offsets[i], self.sizes[i]).into_owned()
    }

    fn smoothness_bound(&self, i: usize, _state: &[Mat]) -> Option<f64> {
        linalg::max_eigenvalue(&self.diag_block(i)).ok()
    }

    fn curvature_bound(&self, i: usize, _state: &[Mat]) -> Option<f64> {
        linalg::min_eigenvalue(&self.diag_block(i)).ok()
    }

    fn exact_minimizer(&self, i: usize, state: &[Mat], kind: &SurrogateKind) -> Option<Result<Mat>> {
        if self.constraints[i] != Constraint::WholeManifold {
            return None;
        }
        let lambda = match *kind {
            SurrogateKind::Identity => 0.0,
            SurrogateKind::EuclideanProximal(l) | SurrogateKind::RiemannianProximal(l) => l,
            _ => return None,
        };
        let (o, s) = (self.offsets[i], self.sizes[i]);
        let mut x = self.stack(state);
        let anchor = state[i].clone();
        x.rows_mut(o, s).fill(0.0);
        // (A_ii + λI)θ = b_i − (A x_without_i)_i + λ·anchor
        let rhs = self.b.rows(o, s) - (&self.a * &x).rows(o, s) + &anchor * lambda;
        let lhs = self.diag_block(i) + Mat::identity(s, s) * lambda;
        if s == 1 {
            return Some(Ok(rhs / lhs[(0, 0)]));
        }
        Some(linalg::spd_solve(&lhs, &rhs))
    }

    fn lower_bound(&self) -> Option<f64> {
        let x = self.minimizer().ok()?;
        Some(self.c - 0.5 * self.b.dot(&x))
    }
}
