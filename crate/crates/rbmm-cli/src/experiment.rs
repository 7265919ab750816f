//! `rbmm run`: seeded trials, trace CSVs and the summary JSON.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use rbmm::apps::cp::{cp_generate, CpProblem, Tensor};
use rbmm::apps::likelihood::{ol_generate, OptimisticLikelihoodProblem};
use rbmm::apps::quadratic::QuadraticProblem;
use rbmm::apps::rpca::{rpca_generate, RpcaProblem};
use rbmm::apps::subspace::{st_generate, st_geodesic_error, GeodesicSubspaceModel, SubspaceProblem};
use rbmm::diagnostics::{rate_fit, running_min, truncate_at_floor};
use rbmm::driver::{audit_trace, run_rbmm_with_clock, BlockProblem, Clock, IterationRecord, RunOutput, SolverConfig};
use rbmm::rng::{self, Rng};
use rbmm::{Mat, ProductPoint};
use serde::Serialize;

use crate::config::{AppParams, RunConfig, SubspaceInit};
use crate::io::{fmt_f64, read_array};
use crate::{io_err, CliError};

/// Tolerance used when auditing the per-cycle descent bound.
pub const AUDIT_TOL: f64 = 1e-10;
/// Running-min stationarity below this fraction of its first value is
/// treated as a solver floor and left out of the rate fit. Inner solves
/// stopped near 1e-10 leave such a floor.
pub const RATE_FLOOR: f64 = 1e-10;
pub const GEODESIC_GRID: usize = 100;

pub enum Instance {
    Quadratic(QuadraticProblem),
    Subspace {
        problem: SubspaceProblem,
        truth: GeodesicSubspaceModel,
    },
    Likelihood(OptimisticLikelihoodProblem),
    Cp(CpProblem),
    Rpca {
        problem: RpcaProblem,
        l0: Option<Mat>,
    },
}

/// Data seed of trial `t`.
pub fn trial_seed(seed: u64, t: usize) -> u64 {
    seed.wrapping_add(t as u64)
}

/// Initialisation randomness: the trial seed on ChaCha stream 1, so it never
/// overlaps the data draws on stream 0.
pub fn init_rng(seed: u64) -> Rng {
    let mut r = rng::seeded(seed);
    r.set_stream(1);
    r
}

fn read_input(path: &Path) -> Result<crate::io::Array, CliError> {
    read_array(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

impl Instance {
    /// Builds the problem and initial point of one trial.
    pub fn build(cfg: &RunConfig, seed: u64) -> Result<(Instance, ProductPoint), CliError> {
        let (_, params) = cfg.require_application()?;
        let num = CliError::from_build;
        let mut r = init_rng(seed);
        Ok(match params {
            AppParams::QuadraticDemo => {
                let p = QuadraticProblem::demo();
                let init = p.zero_init();
                (Instance::Quadratic(p), init)
            }
            &AppParams::SubspaceTracking {
                d,
                k,
                t,
                l,
                noise,
                lambda_theta,
                init,
            } => {
                let data = st_generate(d, k, t, l, noise, seed).map_err(num)?;
                let problem = SubspaceProblem::from_data(&data, lambda_theta).map_err(num)?;
                let x0 = match init {
                    SubspaceInit::Truth => problem.init_from(&data.truth),
                    SubspaceInit::Random => problem.random_init(&mut r),
                };
                (
                    Instance::Subspace {
                        problem,
                        truth: data.truth,
                    },
                    x0,
                )
            }
            &AppParams::OptimisticLikelihood {
                n,
                train,
                test,
                shift,
                rho1,
                rho2,
            } => {
                let d = ol_generate(n, train, test, shift, seed).map_err(num)?;
                let p = OptimisticLikelihoodProblem::new(d.test, d.mu_hat, d.sigma_hat, rho1, rho2).map_err(num)?;
                let x0 = p.init();
                (Instance::Likelihood(p), x0)
            }
            AppParams::CpDictionary {
                dims,
                rank,
                factors,
                orthonormal_first,
            } => {
                let tensor = match &cfg.data_file {
                    Some(path) => {
                        let a = read_input(path)?;
                        Tensor::new(a.dims, a.data).map_err(num)?
                    }
                    None => cp_generate(dims, *rank, *orthonormal_first, seed).map_err(num)?.0,
                };
                let p = CpProblem::new(tensor, *rank, factors.clone()).map_err(num)?;
                let x0 = p.random_init(&mut r);
                (Instance::Cp(p), x0)
            }
            &AppParams::Rpca {
                rows,
                cols,
                rank,
                corruption,
                sparsity,
                mu,
                sigma,
            } => {
                let (m, l0) = match &cfg.data_file {
                    Some(path) => (read_input(path)?.to_mat().map_err(CliError::Config)?, None),
                    None => {
                        let d = rpca_generate(rows, cols, rank, corruption, seed).map_err(num)?;
                        (d.m, Some(d.l0))
                    }
                };
                let lambda = sparsity.unwrap_or(1.0 / (m.nrows().max(m.ncols()) as f64).sqrt());
                let p = RpcaProblem::new(m, rank, lambda, mu, sigma).map_err(num)?;
                let x0 = p.init().map_err(num)?;
                (Instance::Rpca { problem: p, l0 }, x0)
            }
        })
    }

    pub fn problem(&self) -> &dyn BlockProblem {
        match self {
            Instance::Quadratic(p) => p,
            Instance::Subspace { problem, .. } => problem,
            Instance::Likelihood(p) => p,
            Instance::Cp(p) => p,
            Instance::Rpca { problem, .. } => problem,
        }
    }

    /// Application-specific error of the final state.
    pub fn error_metric(&self, out: &RunOutput) -> Result<ErrorMetric, CliError> {
        let st = out.final_state.data();
        let (name, value) = match self {
            Instance::Quadratic(p) => {
                let x = p.minimizer().map_err(CliError::Numerical)?;
                ("distance-to-minimizer", (p.stack(&st) - x).norm())
            }
            Instance::Subspace { truth, .. } => {
                let est = GeodesicSubspaceModel::from_blocks(&st[0], &st[1]);
                let e = st_geodesic_error(&est, truth, GEODESIC_GRID).map_err(CliError::Numerical)?;
                ("geodesic-error", e)
            }
            Instance::Likelihood(_) => {
                let n = out.trace.len();
                let v = if n < 2 {
                    0.0
                } else {
                    let (a, b) = (out.trace[n - 2].objective, out.trace[n - 1].objective);
                    (b - a).abs() / b.abs()
                };
                ("relative-change", v)
            }
            Instance::Cp(p) => ("relative-error", p.relative_error(&st)),
            Instance::Rpca { problem, l0 } => match l0 {
                Some(l0) => ("relative-error", (&st[0] - l0).norm() / l0.norm()),
                None => ("relative-residual", (&problem.m - &st[0] - &st[1]).norm() / problem.m.norm()),
            },
        };
        Ok(ErrorMetric {
            name: name.to_string(),
            value,
        })
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ErrorMetric {
    pub name: String,
    pub value: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct TrialSummary {
    pub trial: usize,
    pub seed: u64,
    pub cycles: usize,
    pub final_objective: f64,
    pub error_metric: ErrorMetric,
    pub final_stationarity: Option<f64>,
    pub running_min_stationarity: Option<f64>,
    /// Slope of log running-min stationarity against log cycle; null when
    /// too few measurements remain above the rounding floor.
    pub rate_fit_slope: Option<f64>,
    pub wall_time: f64,
    pub flagged_cycles: Vec<usize>,
    pub descent_violations: Vec<usize>,
}

#[derive(Clone, Debug, Serialize)]
pub struct Summary {
    pub config: RunConfig,
    pub trials: Vec<TrialSummary>,
}

pub struct InstantClock(Instant);

impl Clock for InstantClock {
    fn now(&self) -> f64 {
        self.0.elapsed().as_secs_f64()
    }
}

pub fn solver_config(cfg: &RunConfig, seed: u64) -> SolverConfig {
    let mut s = SolverConfig::new(cfg.max_cycles, cfg.surrogates.clone());
    s.seed = seed;
    s.stationarity_every = cfg.stationarity_every;
    s.stop_tol = cfg.stop_tol;
    s
}

/// Frozen column order: cycle, objective, stationarity, delta_n, then
/// gap_i, step_i for each block. Unmeasured stationarity is left empty.
pub fn trace_csv(trace: &[IterationRecord], blocks: usize) -> String {
    let mut s = String::from("cycle,objective,stationarity,delta_n");
    for i in 0..blocks {
        let _ = write!(s, ",gap_{i},step_{i}");
    }
    s.push('\n');
    for r in trace {
        let stat = r.stationarity.map(fmt_f64).unwrap_or_default();
        let _ = write!(s, "{},{},{},{}", r.cycle, fmt_f64(r.objective), stat, fmt_f64(r.delta_n()));
        for i in 0..blocks {
            let _ = write!(s, ",{},{}", fmt_f64(r.gaps[i]), fmt_f64(r.steps[i]));
        }
        s.push('\n');
    }
    s
}

fn summarize(t: usize, seed: u64, inst: &Instance, out: &RunOutput) -> Result<TrialSummary, CliError> {
    let m = inst.problem().num_blocks();
    let audit = audit_trace(&out.trace, m, AUDIT_TOL).map_err(CliError::Numerical)?;
    let measured: Vec<f64> = out.trace.iter().filter_map(|r| r.stationarity).collect();
    let rm = running_min(&measured);
    let slope = rate_fit(truncate_at_floor(&rm, RATE_FLOOR)).ok().map(|f| f.slope);
    let last = out.trace.last().expect("trace holds the initial record");
    Ok(TrialSummary {
        trial: t,
        seed,
        cycles: last.cycle,
        final_objective: last.objective,
        error_metric: inst.error_metric(out)?,
        final_stationarity: last.stationarity,
        running_min_stationarity: rm.last().copied(),
        rate_fit_slope: slope,
        wall_time: last.wall_time,
        flagged_cycles: out.trace.iter().filter(|r| r.flagged).map(|r| r.cycle).collect(),
        descent_violations: audit.violations,
    })
}

pub struct TrialResult {
    pub csv: String,
    pub summary: TrialSummary,
}

pub fn run_trial(cfg: &RunConfig, t: usize) -> Result<TrialResult, CliError> {
    let seed = trial_seed(cfg.seed, t);
    let (inst, init) = Instance::build(cfg, seed)?;
    let clock = InstantClock(Instant::now());
    let out = run_rbmm_with_clock(inst.problem(), &solver_config(cfg, seed), &init, &clock)
        .map_err(CliError::Numerical)?;
    Ok(TrialResult {
        csv: trace_csv(&out.trace, inst.problem().num_blocks()),
        summary: summarize(t, seed, &inst, &out)?,
    })
}

/// Checks everything that can be checked without running: the problem of
/// trial 0 builds and one cycle of its surrogates is well defined.
pub fn dry_run(cfg: &RunConfig) -> Result<(), CliError> {
    let (inst, init) = Instance::build(cfg, trial_seed(cfg.seed, 0))?;
    let mut s = solver_config(cfg, cfg.seed);
    s.max_cycles = 1;
    s.stop_tol = None;
    rbmm::driver::run_rbmm(inst.problem(), &s, &init).map_err(CliError::from_build)?;
    Ok(())
}

/// Runs all trials, `cfg.threads` at a time. Results come back in trial order.
pub fn run_trials(cfg: &RunConfig) -> Result<Vec<TrialResult>, CliError> {
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<Result<TrialResult, CliError>>>> =
        Mutex::new((0..cfg.trials).map(|_| None).collect());
    std::thread::scope(|s| {
        for _ in 0..cfg.threads.min(cfg.trials) {
            s.spawn(|| loop {
                let t = next.fetch_add(1, Ordering::Relaxed);
                if t >= cfg.trials {
                    break;
                }
                let r = run_trial(cfg, t);
                slots.lock().unwrap()[t] = Some(r);
            });
        }
    });
    slots
        .into_inner()
        .unwrap()
        .into_iter()
        .map(|r| r.expect("every trial index is claimed once"))
        .collect()
}

/// The `run` subcommand. Nothing is written unless validation succeeds.
pub fn run_experiment(cfg: &RunConfig) -> Result<Summary, CliError> {
    cfg.require_application()?;
    dry_run(cfg)?;
    let results = run_trials(cfg)?;
    let dir = &cfg.out_dir;
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    for (t, r) in results.iter().enumerate() {
        let path = dir.join(format!("trace_trial{t}.csv"));
        fs::write(&path, &r.csv).map_err(|e| io_err(&path, e))?;
    }
    let summary = Summary {
        config: cfg.clone(),
        trials: results.into_iter().map(|r| r.summary).collect(),
    };
    let path = dir.join("summary.json");
    let json = serde_json::to_string_pretty(&summary).expect("summary serializes");
    fs::write(&path, json + "\n").map_err(|e| io_err(&path, e))?;
    Ok(summary)
}
