//! `rbmm gen-data`: dump the synthetic data of each trial.
//!
//! Files are named `<name>_trial<t>.bin` (or `.csv`), one per array:
//!
//! | application           | arrays                                   |
//! |-----------------------|------------------------------------------|
//! | quadratic-demo        | `a`, `b`                                 |
//! | subspace-tracking     | `x` (T × d × ℓ), `times`, `truth_q`, `truth_theta` |
//! | optimistic-likelihood | `train`, `test` (N × M), `mu_hat`, `sigma_hat` |
//! | cp-dictionary         | `tensor`, `factor_<i>`                   |
//! | rpca                  | `m`, `l0`, `s0`                          |
//!
//! `tensor` and `m` can be fed back through `data_file`.

use std::fs;

use rbmm::apps::cp::cp_generate;
use rbmm::apps::likelihood::ol_generate;
use rbmm::apps::quadratic::QuadraticProblem;
use rbmm::apps::rpca::rpca_generate;
use rbmm::apps::subspace::st_generate;

use crate::config::{AppParams, DataFormat, RunConfig};
use crate::experiment::trial_seed;
use crate::io::{write_array, Array};
use crate::{io_err, CliError};

pub fn generate(params: &AppParams, seed: u64) -> Result<Vec<(String, Array)>, CliError> {
    let num = CliError::from_build;
    let mut out = Vec::new();
    let mut push = |name: &str, a: Array| out.push((name.to_string(), a));
    match params {
        AppParams::QuadraticDemo => {
            let p = QuadraticProblem::demo();
            push("a", Array::from_mat(&p.a));
            push("b", Array::from_mat(&p.b));
        }
        &AppParams::SubspaceTracking { d, k, t, l, noise, .. } => {
            let data = st_generate(d, k, t, l, noise, seed).map_err(num)?;
            let flat = data.x.iter().flat_map(|m| Array::from_mat(m).data).collect();
            push("x", Array::new(vec![t, d, l], flat).map_err(CliError::Config)?);
            push("times", Array::vector(&data.times));
            push("truth_q", Array::from_mat(&data.truth.q()));
            push("truth_theta", Array::vector(&data.truth.theta));
        }
        &AppParams::OptimisticLikelihood { n, train, test, shift, .. } => {
            let d = ol_generate(n, train, test, shift, seed).map_err(num)?;
            push("train", Array::from_mat(&d.train));
            push("test", Array::from_mat(&d.test));
            push("mu_hat", Array::from_mat(&d.mu_hat));
            push("sigma_hat", Array::from_mat(&d.sigma_hat));
        }
        AppParams::CpDictionary {
            dims,
            rank,
            orthonormal_first,
            ..
        } => {
            let (tensor, factors) = cp_generate(dims, *rank, *orthonormal_first, seed).map_err(num)?;
            push("tensor", Array::new(tensor.dims, tensor.data).map_err(CliError::Config)?);
            for (i, f) in factors.iter().enumerate() {
                push(&format!("factor_{i}"), Array::from_mat(f));
            }
        }
        &AppParams::Rpca {
            rows,
            cols,
            rank,
            corruption,
            ..
        } => {
            let d = rpca_generate(rows, cols, rank, corruption, seed).map_err(num)?;
            push("m", Array::from_mat(&d.m));
            push("l0", Array::from_mat(&d.l0));
            push("s0", Array::from_mat(&d.s0));
        }
    }
    Ok(out)
}

/// Writes every trial's arrays to the output directory and returns the paths.
pub fn gen_data(cfg: &RunConfig) -> Result<Vec<std::path::PathBuf>, CliError> {
    let (_, params) = cfg.require_application()?;
    let trials = (0..cfg.trials)
        .map(|t| generate(params, trial_seed(cfg.seed, t)))
        .collect::<Result<Vec<_>, _>>()?;
    let (csv, ext) = match cfg.format {
        DataFormat::Csv => (true, "csv"),
        DataFormat::Binary => (false, "bin"),
    };
    fs::create_dir_all(&cfg.out_dir).map_err(|e| io_err(&cfg.out_dir, e))?;
    let mut paths = Vec::new();
    for (t, arrays) in trials.iter().enumerate() {
        for (name, a) in arrays {
            let path = cfg.out_dir.join(format!("{name}_trial{t}.{ext}"));
            write_array(&path, a, csv).map_err(|e| io_err(&path, e))?;
            paths.push(path);
        }
    }
    Ok(paths)
}
