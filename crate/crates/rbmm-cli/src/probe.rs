//! `rbmm probe`: diagnostics suite written to `probes.json`.

use std::fs;

use rbmm::diagnostics::{
    circle_configuration, distance_equivalence_probe, fd_gradient_check, geometry_probes, gsmooth_probe,
    gsmooth_probe_pairs, ProbeReport,
};
use rbmm::{Manifold, Mat, Point};

use crate::config::{ProbeSet, RunConfig};
use crate::experiment::{trial_seed, Instance};
use crate::{io_err, CliError};

pub const GEOMETRY_SAMPLES: usize = 100;
pub const FD_STEP: f64 = 1e-5;
pub const CIRCLE_TOL: f64 = 1e-3;
pub const PERTURBATION: f64 = 0.1;

fn half_dist_sq_grad(m: Manifold, p: Mat) -> impl Fn(&Mat) -> Mat {
    move |x: &Mat| m.grad_dist_sq_raw(x, &p).expect("probe points stay inside the injectivity ball") * 0.5
}

fn num(e: rbmm::Error) -> CliError {
    CliError::Numerical(e)
}

pub fn geometry_suite(seed: u64) -> Result<Vec<ProbeReport>, CliError> {
    let mut reports = Vec::new();
    for m in [
        Manifold::Euclidean { rows: 3, cols: 2 },
        Manifold::Sphere { dim: 4 },
        Manifold::Spd { n: 3 },
    ] {
        reports.extend(geometry_probes(&m, GEOMETRY_SAMPLES, seed).map_err(num)?);
    }

    let circle = Manifold::Sphere { dim: 2 };
    let (p, x, y) = circle_configuration();
    let mut rep = gsmooth_probe_pairs(&circle, &half_dist_sq_grad(circle, p), &[(x, y)], 2.0, seed).map_err(num)?;
    rep.quantity = "gsmooth-ratio:circle-half-dist-sq".into();
    rep.pass = (rep.max - 2.0).abs() <= CIRCLE_TOL;
    reports.push(rep);

    let e = Manifold::Euclidean { rows: 3, cols: 1 };
    let p = Mat::from_column_slice(3, 1, &[1.0, -2.0, 0.5]);
    let mut rep = gsmooth_probe(&e, &half_dist_sq_grad(e, p), GEOMETRY_SAMPLES, 3.0, 1.0, seed).map_err(num)?;
    rep.quantity = "gsmooth-ratio:euclidean-half-dist-sq".into();
    rep.pass = (rep.max - 1.0).abs() <= 1e-10 && (rep.min - 1.0).abs() <= 1e-10;
    reports.push(rep);

    let mut rep = distance_equivalence_probe(&Manifold::Sphere { dim: 3 }, GEOMETRY_SAMPLES, seed).map_err(num)?;
    rep.quantity = format!("distance-equivalence:{}", rep.quantity);
    reports.push(rep);
    Ok(reports)
}

/// Finite-difference checks of every block gradient near the initial point
/// of trial 0. Initial points can be exactly stationary in a block (RPCA
/// starts from a truncated SVD), where a relative error means nothing, so
/// each block is first moved by a seeded retraction step.
/// With `wrong` the block-0 gradient is doubled.
pub fn gradient_checks(cfg: &RunConfig, wrong: bool) -> Result<Vec<ProbeReport>, CliError> {
    let seed = trial_seed(cfg.seed, 0);
    let (inst, init) = Instance::build(cfg, seed)?;
    let p = inst.problem();
    let mut r = rbmm::rng::seeded(seed);
    let mut state = init.data();
    for i in 0..p.num_blocks() {
        let m = p.manifold(i);
        let eta = m.random_tangent(&state[i], &mut r).map_err(num)?;
        let t = PERTURBATION * state[i].norm().max(1.0);
        state[i] = m.retract_raw(&state[i], &(eta * t)).map_err(num)?;
    }
    let app = serde_json::to_value(cfg.application).expect("application serializes");
    let app = app.as_str().unwrap_or("unknown");
    let mut reports = Vec::new();
    for i in 0..p.num_blocks() {
        let m = p.manifold(i);
        let value = |x: &Mat| {
            let mut s = state.clone();
            s[i] = x.clone();
            p.value(&s)
        };
        let scale = if wrong && i == 0 { 2.0 } else { 1.0 };
        let rgrad = |x: &Mat| {
            let mut s = state.clone();
            s[i] = x.clone();
            m.egrad_to_rgrad_raw(x, &p.egrad_block(i, &s))
                .map(|g| g * scale)
                .unwrap_or_else(|_| Mat::from_element(x.nrows(), x.ncols(), f64::NAN))
        };
        let x = Point::new(m, state[i].clone()).map_err(num)?;
        let mut rep = fd_gradient_check(&value, &rgrad, &x, FD_STEP, seed).map_err(num)?;
        rep.quantity = format!("fd-gradient:{app}:block{i}");
        reports.push(rep);
    }
    Ok(reports)
}

/// Runs the configured probes and writes `probes.json`. Returns the reports
/// and whether every one passed.
pub fn run_probes(cfg: &RunConfig) -> Result<(Vec<ProbeReport>, bool), CliError> {
    let mut reports = geometry_suite(cfg.seed)?;
    if cfg.probe_set == ProbeSet::All && cfg.application.is_some() {
        reports.extend(gradient_checks(cfg, cfg.inject_wrong_gradient)?);
    } else if cfg.inject_wrong_gradient {
        return Err(CliError::Config(
            "inject_wrong_gradient needs an application and probe_set = all".into(),
        ));
    }
    let ok = reports.iter().all(|r| r.pass);
    fs::create_dir_all(&cfg.out_dir).map_err(|e| io_err(&cfg.out_dir, e))?;
    let path = cfg.out_dir.join("probes.json");
    let json = serde_json::to_string_pretty(&reports).expect("reports serialize");
    fs::write(&path, json + "\n").map_err(|e| io_err(&path, e))?;
    Ok((reports, ok))
}
