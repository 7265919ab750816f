//! Cyclic block driver, stationarity measure and trace audit.

use alloc::boxed::Box;
use alloc::format;
use alloc::vec::Vec;
use core::cell::RefCell;

use serde::Serialize;

use crate::error::{contract, degenerate, Error, Result};
use crate::geometry::{Manifold, Point, ProductPoint};
use crate::linalg::all_finite;
use crate::surrogates::{
    build_surrogate, minimize_block, BlockFacts, BlockSolution, Constraint, Marginal, Surrogate,
    SurrogateFamily, SurrogateKind, SurrogateSpec,
};
use crate::Mat;

/// A smooth objective over a product of manifolds, split into blocks.
///
/// `state` arguments hold one ambient matrix per block in block order.
pub trait BlockProblem {
    fn num_blocks(&self) -> usize;
    fn manifold(&self, i: usize) -> Manifold;
    fn constraint(&self, _i: usize) -> Constraint {
        Constraint::WholeManifold
    }
    fn value(&self, state: &[Mat]) -> f64;
    /// Euclidean gradient of the objective with respect to block `i`.
    fn egrad_block(&self, i: usize, state: &[Mat]) -> Mat;
    /// Lipschitz constant of the block-`i` gradient with the other blocks fixed.
    fn smoothness_bound(&self, _i: usize, _state: &[Mat]) -> Option<f64> {
        None
    }
    /// Lower bound on the geodesic convexity modulus of the block-`i` marginal.
    fn curvature_bound(&self, _i: usize, _state: &[Mat]) -> Option<f64> {
        None
    }
    /// `R(θ)` for the regularized linear Stiefel surrogate.
    fn r_map(&self, _i: usize, _state: &[Mat]) -> Option<Mat> {
        None
    }
    /// Exact minimizer of the `kind` surrogate anchored at `state[i]` over the
    /// block constraint, if the problem knows one.
    fn exact_minimizer(&self, _i: usize, _state: &[Mat], _kind: &SurrogateKind) -> Option<Result<Mat>> {
        None
    }
    /// Problem-defined surrogate for blocks configured with the custom family.
    fn custom_surrogate<'a>(
        &'a self,
        _i: usize,
        _state: &[Mat],
        _cycle: usize,
    ) -> Option<Result<Box<dyn Surrogate + 'a>>> {
        None
    }
    fn lower_bound(&self) -> Option<f64> {
        None
    }
}

/// The block-`i` marginal with every other block frozen.
pub struct BlockMarginal<'a, P: ?Sized> {
    problem: &'a P,
    block: usize,
    state: RefCell<Vec<Mat>>,
}

impl<'a, P: BlockProblem + ?Sized> BlockMarginal<'a, P> {
    pub fn new(problem: &'a P, block: usize, state: Vec<Mat>) -> Self {
        BlockMarginal {
            problem,
            block,
            state: RefCell::new(state),
        }
    }

    fn with_block<T>(&self, x: &Mat, f: impl FnOnce(&[Mat]) -> T) -> T {
        let mut st = self.state.borrow_mut();
        let saved = core::mem::replace(&mut st[self.block], x.clone());
        let out = f(&st);
        st[self.block] = saved;
        out
    }
}

impl<P: BlockProblem + ?Sized> Marginal for BlockMarginal<'_, P> {
    fn value(&self, x: &Mat) -> f64 {
        self.with_block(x, |s| self.problem.value(s))
    }

    fn egrad(&self, x: &Mat) -> Mat {
        self.with_block(x, |s| self.problem.egrad_block(self.block, s))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SolverConfig {
    pub max_cycles: usize,
    pub specs: Vec<SurrogateSpec>,
    pub seed: u64,
    pub stationarity_every: usize,
    pub stop_tol: Option<f64>,
}

impl SolverConfig {
    pub fn new(max_cycles: usize, specs: Vec<SurrogateSpec>) -> Self {
        SolverConfig {
            max_cycles,
            specs,
            seed: 0,
            stationarity_every: 1,
            stop_tol: None,
        }
    }

    pub fn validate(&self, blocks: usize) -> Result<()> {
        if self.max_cycles == 0 {
            return Err(contract("max_cycles must be at least 1"));
        }
        if self.stationarity_every == 0 {
            return Err(contract("stationarity stride must be at least 1"));
        }
        if self.specs.len() != blocks {
            return Err(Error::ContractViolation(format!(
                "{} surrogate specs for {} blocks",
                self.specs.len(),
                blocks
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IterationRecord {
    pub cycle: usize,
    pub objective: f64,
    pub gaps: Vec<f64>,
    pub deltas: Vec<f64>,
    pub steps: Vec<f64>,
    pub stationarity: Option<f64>,
    pub wall_time: f64,
    /// Some block solve was uncertified, hit its budget, or showed a
    /// negative gap.
    pub flagged: bool,
}

impl IterationRecord {
    /// Largest per-block suboptimality bound of the cycle.
    pub fn delta_n(&self) -> f64 {
        self.deltas.iter().fold(0.0, |a, &d| a.max(d))
    }
}

/// Monotone seconds source for the wall-time column.
pub trait Clock {
    fn now(&self) -> f64;
}

pub struct NoClock;

impl Clock for NoClock {
    fn now(&self) -> f64 {
        0.0
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunOutput {
    pub trace: Vec<IterationRecord>,
    pub final_state: ProductPoint,
}

pub fn run_rbmm<P: BlockProblem + ?Sized>(
    problem: &P,
    config: &SolverConfig,
    init: &ProductPoint,
) -> Result<RunOutput> {
    run_rbmm_with_clock(problem, config, init, &NoClock)
}

fn check_init<P: BlockProblem + ?Sized>(problem: &P, init: &ProductPoint) -> Result<()> {
    let m = problem.num_blocks();
    if init.blocks.len() != m {
        return Err(Error::InfeasibleInit(format!(
            "{} blocks given, problem has {}",
            init.blocks.len(),
            m
        )));
    }
    for (i, p) in init.blocks.iter().enumerate() {
        let man = problem.manifold(i);
        if p.manifold != man {
            return Err(Error::InfeasibleInit(format!("block {} has the wrong manifold", i)));
        }
        man.validate(&p.data)
            .map_err(|e| Error::InfeasibleInit(format!("block {}: {}", i, e)))?;
        let c = problem.constraint(i);
        c.validate(&man)?;
        if !c.contains(&man, &p.data)? {
            return Err(Error::InfeasibleInit(format!("block {} violates its constraint", i)));
        }
    }
    Ok(())
}

pub fn run_rbmm_with_clock<P: BlockProblem + ?Sized>(
    problem: &P,
    config: &SolverConfig,
    init: &ProductPoint,
    clock: &dyn Clock,
) -> Result<RunOutput> {
    let m = problem.num_blocks();
    config.validate(m)?;
    check_init(problem, init)?;
    let start = clock.now();
    let mut state = init.data();
    let f0 = problem.value(&state);
    if !f0.is_finite() {
        return Err(Error::InfeasibleInit(format!("objective is {} at the initial point", f0)));
    }
    let mut trace = Vec::with_capacity(config.max_cycles + 1);
    trace.push(IterationRecord {
        cycle: 0,
        objective: f0,
        gaps: alloc::vec![0.0; m],
        deltas: alloc::vec![0.0; m],
        steps: alloc::vec![0.0; m],
        stationarity: Some(stationarity_at(problem, &state)?),
        wall_time: 0.0,
        flagged: false,
    });
    for n in 1..=config.max_cycles {
        let mut gaps = Vec::with_capacity(m);
        let mut deltas = Vec::with_capacity(m);
        let mut steps = Vec::with_capacity(m);
        let mut flagged = false;
        for i in 0..m {
            let (sol, gap) = update_block(problem, &config.specs[i], &state, i, n)?;
            let man = problem.manifold(i);
            steps.push(man.dist_raw(&state[i], &sol.point)?);
            flagged |= sol.flagged || gap < -1e-10;
            gaps.push(gap);
            deltas.push(sol.delta_bound);
            state[i] = sol.point;
        }
        let objective = problem.value(&state);
        if !objective.is_finite() {
            return Err(degenerate("objective became non-finite"));
        }
        let measured = n % config.stationarity_every == 0 || n == config.max_cycles;
        let stationarity = if measured {
            Some(stationarity_at(problem, &state)?)
        } else {
            None
        };
        trace.push(IterationRecord {
            cycle: n,
            objective,
            gaps,
            deltas,
            steps,
            stationarity,
            wall_time: clock.now() - start,
            flagged,
        });
        if let (Some(tol), Some(s)) = (config.stop_tol, stationarity) {
            if s <= tol {
                break;
            }
        }
    }
    let final_state = ProductPoint::new(
        state
            .into_iter()
            .enumerate()
            .map(|(i, d)| Point::new_unchecked(problem.manifold(i), d))
            .collect(),
    );
    Ok(RunOutput { trace, final_state })
}

/// One block update: build the surrogate at `state[i]`, minimize it, and
/// return the solution with the gap `g(θ⁺) − f(θ⁺)`.
pub fn update_block<P: BlockProblem + ?Sized>(
    problem: &P,
    spec: &SurrogateSpec,
    state: &[Mat],
    i: usize,
    n: usize,
) -> Result<(BlockSolution, f64)> {
    let man = problem.manifold(i);
    let constraint = problem.constraint(i);
    let marginal = BlockMarginal::new(problem, i, state.to_vec());
    let anchor = &state[i];
    let surrogate: Box<dyn Surrogate + '_> = if spec.family == SurrogateFamily::Custom {
        match problem.custom_surrogate(i, state, n) {
            Some(s) => s?,
            None => {
                return Err(Error::UnsupportedFamily {
                    family: "custom",
                    kind: man.name(),
                })
            }
        }
    } else {
        let facts = BlockFacts {
            smoothness: problem.smoothness_bound(i, state),
            curvature: problem.curvature_bound(i, state),
            r_map: match spec.family {
                SurrogateFamily::RegularizedLinearStiefel(_) => problem.r_map(i, state),
                _ => None,
            },
        };
        let kind = spec.family.resolve(n, facts.smoothness)?;
        Box::new(build_surrogate(kind, man, &marginal, anchor, &facts)?)
    };
    let kind = surrogate.kind();
    let sol = match problem.exact_minimizer(i, state, &kind) {
        Some(p) => BlockSolution::exact(p?),
        None => minimize_block(&*surrogate, &constraint, &spec.inner_options(n))?,
    };
    if !all_finite(&sol.point) {
        return Err(degenerate("block update produced non-finite entries"));
    }
    let gap = surrogate.value(&sol.point) - marginal.value(&sol.point);
    Ok((sol, gap))
}

/// `Σᵢ ‖cone-projected grad_i f‖ / r̂ᵢ`.
pub fn stationarity_measure<P: BlockProblem + ?Sized>(problem: &P, state: &ProductPoint) -> Result<f64> {
    stationarity_at(problem, &state.data())
}

pub fn stationarity_at<P: BlockProblem + ?Sized>(problem: &P, state: &[Mat]) -> Result<f64> {
    let mut total = 0.0;
    for i in 0..problem.num_blocks() {
        let man = problem.manifold(i);
        let x = &state[i];
        let g = man.egrad_to_rgrad_raw(x, &problem.egrad_block(i, state))?;
        let pg = problem.constraint(i).cone_project(&man, x, &g)?;
        total += man.norm_raw(x, &pg)? / man.r_hat();
    }
    Ok(total)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AuditReport {
    /// Cycles with `f_{n−1} − f_n < −m·Δ_n − tolerance`.
    pub violations: Vec<usize>,
    /// Partial sums over cycles of `Σᵢ gap_i`.
    pub gap_partial_sums: Vec<f64>,
    /// Partial sums of `Δ_n`.
    pub delta_partial_sums: Vec<f64>,
    /// `(cycle, min stationarity so far)` at each measured cycle.
    pub running_min_stationarity: Vec<(usize, f64)>,
}

pub fn audit_trace(trace: &[IterationRecord], m: usize, tolerance: f64) -> Result<AuditReport> {
    if trace.is_empty() {
        return Err(contract("empty trace"));
    }
    let mut violations = Vec::new();
    let mut gap_partial_sums = Vec::with_capacity(trace.len());
    let mut delta_partial_sums = Vec::with_capacity(trace.len());
    let mut running_min_stationarity = Vec::new();
    let (mut gsum, mut dsum) = (0.0, 0.0);
    let mut best = f64::INFINITY;
    for (k, rec) in trace.iter().enumerate() {
        if k > 0 {
            let decrease = trace[k - 1].objective - rec.objective;
            if decrease < -(m as f64) * rec.delta_n() - tolerance {
                violations.push(rec.cycle);
            }
        }
        gsum += rec.gaps.iter().sum::<f64>();
        dsum += rec.delta_n();
        gap_partial_sums.push(gsum);
        delta_partial_sums.push(dsum);
        if let Some(s) = rec.stationarity {
            best = best.min(s);
            running_min_stationarity.push((rec.cycle, best));
        }
    }
    Ok(AuditReport {
        violations,
        gap_partial_sums,
        delta_partial_sums,
        running_min_stationarity,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn record(cycle: usize, objective: f64, delta: f64) -> IterationRecord {
        IterationRecord {
            cycle,
            objective,
            gaps: vec![0.0, 0.0],
            deltas: vec![delta, 0.0],
            steps: vec![0.0, 0.0],
            stationarity: None,
            wall_time: 0.0,
            flagged: false,
        }
    }

    #[test]
    fn audit_examples() {
        let t: Vec<_> = [3.0, 2.0, 2.0, 1.5].iter().enumerate().map(|(k, &f)| record(k, f, 0.0)).collect();
        assert!(audit_trace(&t, 2, 1e-12).unwrap().violations.is_empty());
        let t = vec![record(0, 1.0, 0.0), record(1, 2.0, 0.0)];
        assert_eq!(audit_trace(&t, 2, 1e-12).unwrap().violations, vec![1]);
        let t = vec![record(0, 1.0, 0.0), record(1, 1.15, 0.1)];
        assert!(audit_trace(&t, 2, 1e-12).unwrap().violations.is_empty());
        assert!(audit_trace(&[], 2, 0.0).is_err());
    }

    #[test]
    fn running_min_is_nonincreasing() {
        let mut t: Vec<_> = (0..4).map(|k| record(k, 1.0, 0.0)).collect();
        for (r, s) in t.iter_mut().zip([0.5, 0.7, 0.2, 0.3]) {
            r.stationarity = Some(s);
        }
        let a = audit_trace(&t, 2, 0.0).unwrap();
        let mins: Vec<f64> = a.running_min_stationarity.iter().map(|p| p.1).collect();
        assert_eq!(mins, vec![0.5, 0.5, 0.2, 0.2]);
    }

    #[test]
    fn config_validation() {
        assert!(SolverConfig::new(0, vec![]).validate(0).is_err());
        let mut c = SolverConfig::new(3, vec![]);
        c.stationarity_every = 0;
        assert!(c.validate(0).is_err());
        assert!(SolverConfig::new(3, vec![]).validate(1).is_err());
    }
}
