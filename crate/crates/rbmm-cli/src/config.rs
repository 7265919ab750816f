//! Flat `key = value` run configuration.
//!
//! Lines starting with `#` or `;` are comments. Every key must be
//! recognised for the chosen application; leftovers are rejected so typos
//! cannot silently fall back to defaults. Per-block surrogate settings use
//! `block.<field>` for every block and `block<N>.<field>` for block N
//! (0-based), the latter taking precedence.

use std::collections::BTreeMap;
use std::path::PathBuf;

use rbmm::apps::cp::FactorKind;
use rbmm::surrogates::{Schedule, SurrogateFamily, SurrogateSpec};
use serde::Serialize;

use crate::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Application {
    QuadraticDemo,
    SubspaceTracking,
    OptimisticLikelihood,
    CpDictionary,
    Rpca,
}

impl Application {
    fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "quadratic-demo" => Application::QuadraticDemo,
            "subspace-tracking" => Application::SubspaceTracking,
            "optimistic-likelihood" => Application::OptimisticLikelihood,
            "cp-dictionary" => Application::CpDictionary,
            "rpca" => Application::Rpca,
            _ => return None,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum DataFormat {
    Binary,
    Csv,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProbeSet {
    All,
    Geometry,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SubspaceInit {
    Random,
    Truth,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "application", rename_all = "kebab-case")]
pub enum AppParams {
    QuadraticDemo,
    SubspaceTracking {
        d: usize,
        k: usize,
        t: usize,
        l: usize,
        noise: f64,
        lambda_theta: f64,
        init: SubspaceInit,
    },
    OptimisticLikelihood {
        n: usize,
        train: usize,
        test: usize,
        shift: f64,
        rho1: Option<f64>,
        rho2: f64,
    },
    CpDictionary {
        dims: Vec<usize>,
        rank: usize,
        #[serde(serialize_with = "ser_kinds")]
        factors: Vec<FactorKind>,
        orthonormal_first: bool,
    },
    Rpca {
        rows: usize,
        cols: usize,
        rank: usize,
        corruption: f64,
        sparsity: Option<f64>,
        mu: f64,
        sigma: f64,
    },
}

fn ser_kinds<S: serde::Serializer>(k: &[FactorKind], s: S) -> Result<S::Ok, S::Error> {
    s.collect_seq(k.iter().map(|f| match f {
        FactorKind::Euclidean => "euclidean".to_string(),
        FactorKind::Stiefel => "stiefel".to_string(),
        FactorKind::FixedRank(q) => format!("fixed-rank:{q}"),
    }))
}

/// Fully resolved settings, defaults filled in.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunConfig {
    pub application: Option<Application>,
    pub seed: u64,
    pub trials: usize,
    pub max_cycles: usize,
    pub stationarity_every: usize,
    pub stop_tol: Option<f64>,
    pub out_dir: PathBuf,
    pub threads: usize,
    pub data_file: Option<PathBuf>,
    pub format: DataFormat,
    pub probe_set: ProbeSet,
    pub inject_wrong_gradient: bool,
    pub params: Option<AppParams>,
    pub surrogates: Vec<SurrogateSpec>,
}

impl RunConfig {
    pub fn require_application(&self) -> Result<(Application, &AppParams), CliError> {
        match (self.application, &self.params) {
            (Some(a), Some(p)) => Ok((a, p)),
            _ => Err(CliError::Config("missing required key `application`".into())),
        }
    }
}

/// Raw key/value pairs with use tracking.
struct Keys {
    map: BTreeMap<String, (usize, String)>,
    used: std::collections::BTreeSet<String>,
}

fn bad(key: &str, line: usize, msg: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("line {line}: `{key}`: {msg}"))
}

impl Keys {
    fn parse(text: &str) -> Result<Self, CliError> {
        let mut map = BTreeMap::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') || line.starts_with(';') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| CliError::Config(format!("line {}: expected `key = value`", n + 1)))?;
            let k = k.trim().to_string();
            if k.is_empty() {
                return Err(CliError::Config(format!("line {}: empty key", n + 1)));
            }
            if map.insert(k.clone(), (n + 1, v.trim().to_string())).is_some() {
                return Err(CliError::Config(format!("line {}: duplicate key `{k}`", n + 1)));
            }
        }
        Ok(Keys {
            map,
            used: Default::default(),
        })
    }

    fn raw(&mut self, key: &str) -> Option<(usize, String)> {
        let v = self.map.get(key).cloned();
        if v.is_some() {
            self.used.insert(key.to_string());
        }
        v
    }

    fn get<T: std::str::FromStr>(&mut self, key: &str) -> Result<Option<T>, CliError>
    where
        T::Err: std::fmt::Display,
    {
        match self.raw(key) {
            None => Ok(None),
            Some((line, v)) => v.parse().map(Some).map_err(|e| bad(key, line, e)),
        }
    }

    fn or<T: std::str::FromStr>(&mut self, key: &str, default: T) -> Result<T, CliError>
    where
        T::Err: std::fmt::Display,
    {
        Ok(self.get(key)?.unwrap_or(default))
    }

    fn positive(&mut self, key: &str, default: usize) -> Result<usize, CliError> {
        let v = self.or(key, default)?;
        if v == 0 {
            let line = self.map[key].0;
            return Err(bad(key, line, "must be positive"));
        }
        Ok(v)
    }

    fn choice<T>(&mut self, key: &str, default: T, parse: impl Fn(&str) -> Option<T>) -> Result<T, CliError> {
        match self.raw(key) {
            None => Ok(default),
            Some((line, v)) => parse(&v).ok_or_else(|| bad(key, line, format!("unknown value `{v}`"))),
        }
    }

    fn list<T: std::str::FromStr>(&mut self, key: &str) -> Result<Option<Vec<T>>, CliError>
    where
        T::Err: std::fmt::Display,
    {
        match self.raw(key) {
            None => Ok(None),
            Some((line, v)) => v
                .split(',')
                .map(|s| s.trim().parse().map_err(|e| bad(key, line, e)))
                .collect::<Result<Vec<_>, _>>()
                .map(Some),
        }
    }

    fn finish(self) -> Result<(), CliError> {
        let unused: Vec<_> = self.map.keys().filter(|k| !self.used.contains(*k)).cloned().collect();
        if unused.is_empty() {
            Ok(())
        } else {
            Err(CliError::Config(format!("unknown or unused keys: {}", unused.join(", "))))
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum FamilyName {
    RiemannianProximal,
    EuclideanProximal,
    ProxLinear,
    RegularizedLinearStiefel,
    Identity,
    Custom,
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum ScheduleName {
    Constant,
    Geometric,
    Power,
}

/// Editable form of one block's surrogate before it becomes a spec.
#[derive(Clone, Copy, Debug)]
struct BlockSettings {
    family: FamilyName,
    lambda: f64,
    schedule: ScheduleName,
    rate: f64,
    add_smoothness: bool,
    inner_budget: usize,
    inner_tol: f64,
    inner_tol_exponent: Option<f64>,
}

impl BlockSettings {
    fn new(family: FamilyName, lambda: f64) -> Self {
        BlockSettings {
            family,
            lambda,
            schedule: ScheduleName::Constant,
            rate: 0.5,
            add_smoothness: false,
            inner_budget: 500,
            inner_tol: 1e-10,
            inner_tol_exponent: None,
        }
    }

    fn apply(&mut self, keys: &mut Keys, prefix: &str) -> Result<(), CliError> {
        let k = |f: &str| format!("{prefix}.{f}");
        self.family = keys.choice(&k("family"), self.family, |s| {
            Some(match s {
                "riemannian-proximal" => FamilyName::RiemannianProximal,
                "euclidean-proximal" => FamilyName::EuclideanProximal,
                "prox-linear" => FamilyName::ProxLinear,
                "regularized-linear-stiefel" => FamilyName::RegularizedLinearStiefel,
                "identity" => FamilyName::Identity,
                "custom" => FamilyName::Custom,
                _ => return None,
            })
        })?;
        self.lambda = keys.or(&k("lambda"), self.lambda)?;
        self.schedule = keys.choice(&k("schedule"), self.schedule, |s| {
            Some(match s {
                "constant" => ScheduleName::Constant,
                "geometric" => ScheduleName::Geometric,
                "power" => ScheduleName::Power,
                _ => return None,
            })
        })?;
        self.rate = keys.or(&k("rate"), self.rate)?;
        self.add_smoothness = keys.or(&k("add_smoothness"), self.add_smoothness)?;
        self.inner_budget = keys.or(&k("inner_budget"), self.inner_budget)?;
        self.inner_tol = keys.or(&k("inner_tol"), self.inner_tol)?;
        if let Some(e) = keys.get(&k("inner_tol_exponent"))? {
            self.inner_tol_exponent = Some(e);
        }
        Ok(())
    }

    fn spec(&self, block: usize) -> Result<SurrogateSpec, CliError> {
        let err = |m: &str| CliError::Config(format!("block {block}: {m}"));
        if !(self.lambda.is_finite() && self.lambda >= 0.0) {
            return Err(err("lambda must be finite and nonnegative"));
        }
        if !(self.inner_tol > 0.0) || self.inner_budget == 0 {
            return Err(err("inner_tol and inner_budget must be positive"));
        }
        let schedule = match self.schedule {
            ScheduleName::Constant => Schedule::Constant(self.lambda),
            ScheduleName::Geometric => Schedule::Geometric {
                initial: self.lambda,
                ratio: self.rate,
            },
            ScheduleName::Power => Schedule::Power {
                initial: self.lambda,
                exponent: self.rate,
            },
        };
        let family = match self.family {
            FamilyName::RiemannianProximal => SurrogateFamily::RiemannianProximal(schedule),
            FamilyName::EuclideanProximal => SurrogateFamily::EuclideanProximal(schedule),
            FamilyName::ProxLinear => SurrogateFamily::ProxLinear {
                lambda: schedule,
                add_smoothness: self.add_smoothness,
            },
            FamilyName::RegularizedLinearStiefel => SurrogateFamily::RegularizedLinearStiefel(schedule),
            FamilyName::Identity => SurrogateFamily::Identity,
            FamilyName::Custom => SurrogateFamily::Custom,
        };
        let tol = match self.inner_tol_exponent {
            None => Schedule::Constant(self.inner_tol),
            Some(e) => Schedule::Power {
                initial: self.inner_tol,
                exponent: e,
            },
        };
        Ok(SurrogateSpec::new(family).with_inner(self.inner_budget, tol))
    }
}

fn default_blocks(params: &AppParams) -> Vec<BlockSettings> {
    use FamilyName::*;
    match params {
        AppParams::QuadraticDemo => vec![BlockSettings::new(EuclideanProximal, 1.0); 2],
        AppParams::SubspaceTracking { .. } => {
            let mut q = BlockSettings::new(EuclideanProximal, 0.1);
            q.inner_budget = 50;
            vec![q, BlockSettings::new(Custom, 0.0)]
        }
        AppParams::OptimisticLikelihood { .. } => vec![
            BlockSettings::new(EuclideanProximal, 0.1),
            BlockSettings::new(RiemannianProximal, 0.1),
        ],
        AppParams::CpDictionary { factors, .. } => {
            // λ_n ‖U − U_prev‖² with λ_n = 0.1·0.5ⁿ
            let mut b = BlockSettings::new(EuclideanProximal, 0.2);
            b.schedule = ScheduleName::Geometric;
            b.rate = 0.5;
            vec![b; factors.len()]
        }
        AppParams::Rpca { .. } => vec![BlockSettings::new(EuclideanProximal, 0.1); 2],
    }
}

fn default_cycles(params: &AppParams) -> usize {
    match params {
        AppParams::QuadraticDemo => 200,
        AppParams::SubspaceTracking { .. } => 300,
        AppParams::OptimisticLikelihood { .. } => 1000,
        AppParams::CpDictionary { .. } | AppParams::Rpca { .. } => 500,
    }
}

fn parse_factor(s: &str) -> Option<FactorKind> {
    match s {
        "euclidean" => Some(FactorKind::Euclidean),
        "stiefel" => Some(FactorKind::Stiefel),
        _ => s
            .strip_prefix("fixed-rank:")
            .and_then(|q| q.parse().ok())
            .map(FactorKind::FixedRank),
    }
}

fn app_params(app: Application, keys: &mut Keys) -> Result<AppParams, CliError> {
    Ok(match app {
        Application::QuadraticDemo => AppParams::QuadraticDemo,
        Application::SubspaceTracking => AppParams::SubspaceTracking {
            d: keys.positive("d", 30)?,
            k: keys.positive("k", 3)?,
            t: keys.positive("t", 10)?,
            l: keys.positive("l", 5)?,
            noise: keys.or("noise", 0.0)?,
            lambda_theta: keys.or("lambda_theta", 0.0)?,
            init: keys.choice("init", SubspaceInit::Random, |s| match s {
                "random" => Some(SubspaceInit::Random),
                "truth" => Some(SubspaceInit::Truth),
                _ => None,
            })?,
        },
        Application::OptimisticLikelihood => AppParams::OptimisticLikelihood {
            n: keys.positive("n", 10)?,
            train: keys.positive("train", 200)?,
            test: keys.positive("test", 50)?,
            shift: keys.or("shift", 0.5)?,
            rho1: keys.get("rho1")?,
            rho2: keys.or("rho2", 1.0)?,
        },
        Application::CpDictionary => {
            let dims = keys.list("dims")?.unwrap_or_else(|| vec![30, 20, 10]);
            if dims.len() < 2 || dims.contains(&0) {
                return Err(CliError::Config("`dims` needs at least two positive sizes".into()));
            }
            let factors = match keys.raw("factors") {
                None => vec![FactorKind::Euclidean; dims.len()],
                Some((line, v)) => v
                    .split(',')
                    .map(|s| parse_factor(s.trim()).ok_or_else(|| bad("factors", line, format!("unknown kind `{s}`"))))
                    .collect::<Result<Vec<_>, _>>()?,
            };
            if factors.len() != dims.len() {
                return Err(CliError::Config("`factors` must list one kind per dimension".into()));
            }
            AppParams::CpDictionary {
                rank: keys.positive("rank", 3)?,
                orthonormal_first: keys.or("orthonormal_first", factors[0] == FactorKind::Stiefel)?,
                dims,
                factors,
            }
        }
        Application::Rpca => AppParams::Rpca {
            rows: keys.positive("rows", 50)?,
            cols: keys.positive("cols", 50)?,
            rank: keys.positive("rank", 2)?,
            corruption: keys.or("corruption", 0.05)?,
            sparsity: keys.get("sparsity")?,
            mu: keys.or("mu", 1.0)?,
            sigma: keys.or("sigma", 1e-2)?,
        },
    })
}

/// Parses and resolves a config file's text.
pub fn parse(text: &str) -> Result<RunConfig, CliError> {
    let mut keys = Keys::parse(text)?;
    let application = match keys.raw("application") {
        None => None,
        Some((line, v)) => Some(
            Application::parse(&v).ok_or_else(|| bad("application", line, format!("unknown application `{v}`")))?,
        ),
    };
    let params = application.map(|a| app_params(a, &mut keys)).transpose()?;
    let mut surrogates = Vec::new();
    if let Some(p) = &params {
        let mut blocks = default_blocks(p);
        for (i, b) in blocks.iter_mut().enumerate() {
            b.apply(&mut keys, "block")?;
            b.apply(&mut keys, &format!("block{i}"))?;
        }
        surrogates = blocks.iter().enumerate().map(|(i, b)| b.spec(i)).collect::<Result<_, _>>()?;
    }
    let cfg = RunConfig {
        application,
        seed: keys.or("seed", 0)?,
        trials: keys.positive("trials", 1)?,
        max_cycles: keys.positive("max_cycles", params.as_ref().map_or(1, default_cycles))?,
        stationarity_every: keys.positive("stationarity_every", 1)?,
        stop_tol: keys.get("stop_tol")?,
        out_dir: keys.or("out_dir", PathBuf::from("out"))?,
        threads: keys.positive("threads", 1)?,
        data_file: keys.get("data_file")?,
        format: keys.choice("format", DataFormat::Binary, |s| match s {
            "binary" => Some(DataFormat::Binary),
            "csv" => Some(DataFormat::Csv),
            _ => None,
        })?,
        probe_set: keys.choice("probe_set", ProbeSet::All, |s| match s {
            "all" => Some(ProbeSet::All),
            "geometry" => Some(ProbeSet::Geometry),
            _ => None,
        })?,
        inject_wrong_gradient: keys.or("inject_wrong_gradient", false)?,
        params,
        surrogates,
    };
    if cfg.data_file.is_some()
        && !matches!(cfg.application, Some(Application::CpDictionary) | Some(Application::Rpca))
    {
        return Err(CliError::Config("`data_file` is only read by cp-dictionary and rpca".into()));
    }
    keys.finish()?;
    Ok(cfg)
}
