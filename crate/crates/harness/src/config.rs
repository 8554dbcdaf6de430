//! Experiment configuration: a flat `key = value` settings map, filled from
//! an optional config file and then overridden by command-line flags.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use cutnmf::baselines::{KnnConfig, KnnFallback, RegNmfConfig};
use cutnmf::data::{DatasetSource, DatasetSpec, SyntheticSpec};
use cutnmf::{NnlsOptions, RatingScale};

use crate::error::{HarnessError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Algorithm {
    CutNmf,
    Knn,
    /// Multiplicative updates on the zero-filled matrix.
    Nmf,
    Rnmf,
}

impl Algorithm {
    pub const ALL: [Algorithm; 4] = [Algorithm::CutNmf, Algorithm::Knn, Algorithm::Nmf, Algorithm::Rnmf];

    pub fn as_str(&self) -> &'static str {
        match self {
            Algorithm::CutNmf => "cutnmf",
            Algorithm::Knn => "knn",
            Algorithm::Nmf => "nmf",
            Algorithm::Rnmf => "rnmf",
        }
    }

    /// Whether the algorithm is swept over the rank list.
    pub fn uses_rank(&self) -> bool {
        !matches!(self, Algorithm::Knn)
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Algorithm {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.as_str() == s)
            .ok_or_else(|| HarnessError::Config(format!("unknown algorithm {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EvalSetKind {
    Omega,
    Omega80,
    Theta20,
}

impl EvalSetKind {
    pub fn label(&self) -> &'static str {
        match self {
            EvalSetKind::Omega => "omega",
            EvalSetKind::Omega80 => "omega80",
            EvalSetKind::Theta20 => "theta20",
        }
    }
}

impl FromStr for EvalSetKind {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "omega" => Ok(EvalSetKind::Omega),
            "omega80" => Ok(EvalSetKind::Omega80),
            "theta20" => Ok(EvalSetKind::Theta20),
            _ => Err(HarnessError::Config(format!("unknown evaluation set {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub dataset: DatasetSpec,
    /// Shape of the planted dataset when `dataset.source` is synthetic; its
    /// seed is derived from the master seed.
    pub synthetic: Option<SyntheticSpec>,
    pub algorithms: Vec<Algorithm>,
    pub k_list: Vec<usize>,
    pub j_max: usize,
    pub tol: f64,
    /// Master seed; every random stream is derived from it by label.
    pub seed: u64,
    /// Training fraction of the train/test split.
    pub split: Option<f64>,
    pub eval_sets: Vec<EvalSetKind>,
    pub output: PathBuf,
    pub trace_every: usize,
    /// Recommendability threshold; defaults to the scale's.
    pub threshold: Option<i32>,
    pub nnls: NnlsOptions,
    pub knn: KnnConfig,
    pub rnmf: RegNmfConfig,
    /// Multiplicative-update iterations; defaults to `j_max`.
    pub nmf_iterations: Option<usize>,
}

impl ExperimentConfig {
    pub fn new(dataset: DatasetSpec, output: impl Into<PathBuf>) -> Self {
        Self {
            dataset,
            synthetic: None,
            algorithms: vec![Algorithm::CutNmf],
            k_list: vec![6],
            j_max: 2_000,
            tol: 1e-7,
            seed: 0,
            split: None,
            eval_sets: vec![EvalSetKind::Omega],
            output: output.into(),
            trace_every: 100,
            threshold: None,
            nnls: NnlsOptions::default(),
            knn: KnnConfig::default(),
            rnmf: RegNmfConfig::new(1),
            nmf_iterations: None,
        }
    }

    pub fn threshold(&self) -> i32 {
        self.threshold
            .unwrap_or_else(|| self.dataset.scale.default_threshold())
    }

    pub fn nmf_iterations(&self) -> usize {
        self.nmf_iterations.unwrap_or(self.j_max)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(HarnessError::Config(m.to_string()));
        if self.k_list.is_empty() || self.k_list.contains(&0) {
            return bad("k list must be non-empty with every k >= 1");
        }
        if self.algorithms.is_empty() {
            return bad("no algorithm selected");
        }
        if self.j_max == 0 || !(self.tol > 0.0) {
            return bad("jmax must be >= 1 and tol > 0");
        }
        if let Some(f) = self.split {
            if !(f > 0.0 && f < 1.0) {
                return bad("split fraction must lie in (0, 1)");
            }
        }
        for set in &self.eval_sets {
            match (set, self.split) {
                (EvalSetKind::Omega, Some(_)) => {
                    return bad("omega is only reported without a split")
                }
                (EvalSetKind::Omega80 | EvalSetKind::Theta20, None) => {
                    return bad("omega80 and theta20 require a split")
                }
                _ => {}
            }
        }
        if self.dataset.source == DatasetSource::Synthetic && self.synthetic.is_none() {
            return bad("synthetic dataset needs users, items, rank and observed counts");
        }
        self.nnls.validate()?;
        self.knn.validate()?;
        Ok(())
    }

    /// Builds a config from a settings map (see [`parse_settings`]).
    pub fn from_settings(settings: &BTreeMap<String, String>) -> Result<Self> {
        let mut s = Settings(settings);
        let source: DatasetSource = s.parse("format")?.unwrap_or(DatasetSource::MovieLens100k);
        let path: PathBuf = s.get("dataset").map(PathBuf::from).unwrap_or_default();
        let mut dataset = DatasetSpec::new(source, path);
        if let (Some(lo), Some(hi)) = (s.parse::<u8>("vmin")?, s.parse::<u8>("vmax")?) {
            dataset.scale = RatingScale::new(lo, hi)?;
        }
        let mut cfg = ExperimentConfig::new(dataset, s.get("out").unwrap_or("results"));

        if source == DatasetSource::Synthetic {
            cfg.synthetic = Some(SyntheticSpec {
                n_users: s.require("users")?,
                n_items: s.require("items")?,
                true_rank: s.require("rank")?,
                n_observed: s.require("observed")?,
                seed: 0,
                scale: cfg.dataset.scale,
            });
        }
        if let Some(list) = s.get("algo") {
            cfg.algorithms = parse_list(list)?;
        }
        if let Some(list) = s.get("k") {
            cfg.k_list = parse_list(list)?;
        }
        set(&mut cfg.j_max, s.parse("jmax")?);
        set(&mut cfg.tol, s.parse("tol")?);
        set(&mut cfg.seed, s.parse("seed")?);
        cfg.split = s.parse("split")?;
        cfg.eval_sets = match s.get("eval-sets") {
            Some(list) => parse_list(list)?,
            None if cfg.split.is_some() => vec![EvalSetKind::Omega80, EvalSetKind::Theta20],
            None => vec![EvalSetKind::Omega],
        };
        set(&mut cfg.trace_every, s.parse("trace-every")?);
        cfg.threshold = s.parse("threshold")?;
        set(&mut cfg.nnls.inner_sweeps, s.parse("inner-sweeps")?);
        set(&mut cfg.nnls.coord_tol, s.parse("coord-tol")?);
        set(&mut cfg.nnls.greedy, s.parse("greedy")?);
        set(&mut cfg.knn.n_neighbors, s.parse("knn-neighbors")?);
        set(&mut cfg.knn.min_overlap, s.parse("knn-min-overlap")?);
        if let Some(f) = s.get("knn-fallback") {
            cfg.knn.fallback = match f {
                "user_mean" => KnnFallback::UserMean,
                "global_mean" => KnnFallback::GlobalMean,
                other => return Err(HarnessError::Config(format!("unknown knn fallback {other:?}"))),
            };
        }
        set(&mut cfg.rnmf.lambda, s.parse("rnmf-lambda")?);
        set(&mut cfg.rnmf.learning_rate, s.parse("rnmf-lr")?);
        set(&mut cfg.rnmf.epochs, s.parse("rnmf-epochs")?);
        cfg.nmf_iterations = s.parse("nmf-iterations")?;

        s.finish()?;
        cfg.validate()?;
        Ok(cfg)
    }
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

fn parse_list<T: FromStr>(list: &str) -> Result<Vec<T>>
where
    T::Err: fmt::Display,
{
    list.split(',')
        .map(str::trim)
        .filter(|x| !x.is_empty())
        .map(|x| {
            x.parse()
                .map_err(|e| HarnessError::Config(format!("bad list entry {x:?}: {e}")))
        })
        .collect()
}

/// Keys understood by [`ExperimentConfig::from_settings`].
pub const KEYS: &[&str] = &[
    "dataset", "format", "vmin", "vmax", "users", "items", "rank", "observed", "algo", "k",
    "jmax", "tol", "seed", "split", "eval-sets", "out", "trace-every", "threshold",
    "inner-sweeps", "coord-tol", "greedy", "knn-neighbors", "knn-min-overlap", "knn-fallback",
    "rnmf-lambda", "rnmf-lr", "rnmf-epochs", "nmf-iterations",
];

struct Settings<'a>(&'a BTreeMap<String, String>);

impl<'a> Settings<'a> {
    fn get(&mut self, key: &str) -> Option<&'a str> {
        debug_assert!(KEYS.contains(&key), "{key}");
        self.0.get(key).map(String::as_str)
    }

    fn parse<T: FromStr>(&mut self, key: &str) -> Result<Option<T>>
    where
        T::Err: fmt::Display,
    {
        self.get(key)
            .map(|v| {
                v.parse()
                    .map_err(|e| HarnessError::Config(format!("{key} = {v:?}: {e}")))
            })
            .transpose()
    }

    fn require<T: FromStr>(&mut self, key: &str) -> Result<T>
    where
        T::Err: fmt::Display,
    {
        self.parse(key)?
            .ok_or_else(|| HarnessError::Config(format!("missing setting {key}")))
    }

    fn finish(self) -> Result<()> {
        match self.0.keys().find(|k| !KEYS.contains(&k.as_str())) {
            Some(k) => Err(HarnessError::Config(format!("unknown setting {k:?}"))),
            None => Ok(()),
        }
    }
}

/// Parses `key = value` lines. Blank lines and `#` comments are skipped;
/// later lines win.
pub fn parse_settings(text: &str, origin: &Path) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| HarnessError::Parse {
            path: origin.to_path_buf(),
            line: n + 1,
            message: format!("expected `key = value`, got {raw:?}"),
        })?;
        out.insert(key.trim().to_string(), value.trim().to_string());
    }
    Ok(out)
}
