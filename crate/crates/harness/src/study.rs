//! Convergence and accuracy studies. Every cell of a sweep writes its own
//! trace files; the per-cell result rows land in one `results.csv`.

use std::path::{Path, PathBuf};

use cutnmf::baselines::{nmf_multiplicative, regularized_mf, KnnModel, RegNmfConfig};
use cutnmf::data::{generate_synthetic, load_movielens, split_train_test, DatasetSource, Split, SyntheticSpec};
use cutnmf::seed::derive_seed;
use cutnmf::{
    cutnmf_with_observer, evaluate, predict, ClippedReconstruction, CutNmfConfig, EvalSet,
    FactorPair, IterationTrace, MetricReport, ObservedRatings, RatingLookup, StopReason,
};
use log::info;

use crate::config::{Algorithm, EvalSetKind, ExperimentConfig};
use crate::error::{HarnessError, Result};
use crate::output::{optional, Table};

pub const RESULTS_FILE: &str = "results.csv";
pub const SCATTER_FILE: &str = "scatter.csv";

pub const RESULTS_HEADER: [&str; 11] = [
    "algo",
    "dataset",
    "set_label",
    "k",
    "iterations",
    "mae",
    "cmae",
    "zero_one",
    "precision",
    "recall",
    "stop_reason",
];

pub const TRACE_HEADER: [&str; 8] = [
    "iteration",
    "mfe",
    "mie",
    "mae",
    "cmae",
    "zero_one",
    "precision",
    "recall",
];

pub fn trace_file(algo: Algorithm, k: usize) -> String {
    format!("trace_{algo}_k{k}.csv")
}

/// Wall-clock companion of a trace file. Timings vary run to run, so they
/// are kept apart from the reproducible outputs.
pub fn timing_file(algo: Algorithm, k: usize) -> String {
    format!("timing_{algo}_k{k}.csv")
}

/// Loads or generates the configured ratings.
pub fn load_dataset(cfg: &ExperimentConfig) -> Result<ObservedRatings> {
    match cfg.dataset.source {
        DatasetSource::Synthetic => {
            let shape = cfg
                .synthetic
                .as_ref()
                .ok_or_else(|| HarnessError::Config("synthetic shape missing".into()))?;
            Ok(generate_synthetic(&synthetic_spec(cfg, shape))?.ratings)
        }
        _ => Ok(load_movielens(&cfg.dataset)?.ratings),
    }
}

pub fn synthetic_spec(cfg: &ExperimentConfig, shape: &SyntheticSpec) -> SyntheticSpec {
    SyntheticSpec {
        seed: cfg.seed,
        ..shape.clone()
    }
}

/// The train/test partition used by the accuracy study.
pub fn make_split(cfg: &ExperimentConfig, a: &ObservedRatings) -> Result<Split> {
    let fraction = cfg
        .split
        .ok_or_else(|| HarnessError::Config("accuracy study needs a split".into()))?;
    Ok(split_train_test(a, fraction, cfg.seed)?)
}

/// One traced iteration; metrics only at trace points.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub errors: IterationTrace,
    pub metrics: Option<MetricReport>,
}

/// Outcome of training and evaluating one (algorithm, k) cell.
#[derive(Debug, Clone)]
pub struct CellOutcome {
    pub algo: Algorithm,
    pub k: Option<usize>,
    pub iterations: Option<usize>,
    pub stop_reason: Option<StopReason>,
    /// Learned factors; `None` for KNN.
    pub factors: Option<FactorPair>,
    pub reports: Vec<MetricReport>,
    /// Per-iteration errors of completion runs.
    pub trace: Vec<TraceRow>,
}

impl CellOutcome {
    pub fn report(&self, set: EvalSetKind) -> Option<&MetricReport> {
        self.reports.iter().find(|r| r.set_label == set.label())
    }

    fn result_row(&self, dataset: DatasetSource, report: &MetricReport) -> Vec<String> {
        vec![
            self.algo.to_string(),
            dataset.to_string(),
            report.set_label.clone(),
            self.k.map(|k| k.to_string()).unwrap_or_default(),
            self.iterations.map(|k| k.to_string()).unwrap_or_default(),
            report.mae.to_string(),
            optional(report.cmae),
            report.zero_one.to_string(),
            optional(report.precision),
            optional(report.recall),
            self.stop_reason.map(|s| s.to_string()).unwrap_or_default(),
        ]
    }
}

/// The sets a cell is scored on, with their ground truth.
struct Scoring<'a> {
    train: (&'a ObservedRatings, EvalSet),
    test: Option<(&'a ObservedRatings, EvalSet)>,
    threshold: i32,
}

impl<'a> Scoring<'a> {
    fn new(cfg: &ExperimentConfig, train: &'a ObservedRatings, test: Option<&'a ObservedRatings>) -> Self {
        let wanted = |set: EvalSetKind| cfg.eval_sets.contains(&set);
        let train_label = if test.is_some() {
            EvalSetKind::Omega80
        } else {
            EvalSetKind::Omega
        };
        debug_assert!(wanted(train_label) || test.is_some());
        Self {
            train: (train, EvalSet::from_ratings(train_label.label(), train)),
            test: test
                .filter(|_| wanted(EvalSetKind::Theta20))
                .map(|t| (t, EvalSet::from_ratings(EvalSetKind::Theta20.label(), t))),
            threshold: cfg.threshold(),
        }
    }

    fn on_train(&self, predicted: &impl RatingLookup) -> Result<MetricReport> {
        let (truth, set) = &self.train;
        Ok(evaluate(truth, predicted, set, self.threshold)?)
    }

    fn on_test(&self, predicted: &impl RatingLookup) -> Result<Option<MetricReport>> {
        self.test
            .as_ref()
            .map(|(truth, set)| evaluate(truth, predicted, set, self.threshold))
            .transpose()
            .map_err(Into::into)
    }
}

fn cell_seed(cfg: &ExperimentConfig, algo: Algorithm, k: usize) -> u64 {
    derive_seed(cfg.seed, &format!("{algo}/k{k}"))
}

/// Trains `algo` at rank `k` on `train` only and scores it. `test`, when
/// given, is touched by nothing but the final evaluation.
pub fn run_cell(
    cfg: &ExperimentConfig,
    algo: Algorithm,
    k: usize,
    train: &ObservedRatings,
    test: Option<&ObservedRatings>,
) -> Result<CellOutcome> {
    let scoring = Scoring::new(cfg, train, test);
    let v_max = train.scale().v_max();
    let mut outcome = CellOutcome {
        algo,
        k: algo.uses_rank().then_some(k),
        iterations: None,
        stop_reason: None,
        factors: None,
        reports: Vec::new(),
        trace: Vec::new(),
    };
    let push = |outcome: &mut CellOutcome, train_report: MetricReport, test_report: Option<MetricReport>| {
        outcome.reports.push(train_report);
        outcome.reports.extend(test_report);
    };

    match algo {
        Algorithm::CutNmf => {
            let run_cfg = CutNmfConfig {
                k,
                j_max: cfg.j_max,
                tol: cfg.tol,
                seed: cell_seed(cfg, algo, k),
                nnls: cfg.nnls,
                trace_every: cfg.trace_every,
            };
            let mut trace = Vec::new();
            let mut failure = None;
            let result = cutnmf_with_observer(train, &run_cfg, |p| {
                let errors = p.errors.expect("completion runs report errors");
                let due = cfg.trace_every > 0 && p.iteration % cfg.trace_every == 0;
                let metrics = if due && failure.is_none() {
                    let factors = p.factors();
                    match scoring.on_train(&ClippedReconstruction { factors: &factors, v_max }) {
                        Ok(r) => Some(r),
                        Err(e) => {
                            failure = Some(e);
                            None
                        }
                    }
                } else {
                    None
                };
                trace.push(TraceRow { errors, metrics });
            })?;
            if let Some(e) = failure {
                return Err(e);
            }
            let fit = ClippedReconstruction { factors: &result.factors, v_max };
            let train_report = scoring.on_train(&fit)?;
            if let Some(last) = trace.last_mut() {
                last.metrics.get_or_insert_with(|| train_report.clone());
            }
            let test_report = scoring.on_test(&predict(&result))?;
            push(&mut outcome, train_report, test_report);
            outcome.iterations = Some(result.iterations());
            outcome.stop_reason = Some(result.stop_reason);
            outcome.trace = trace;
            outcome.factors = Some(result.factors);
        }
        Algorithm::Nmf => {
            let iterations = cfg.nmf_iterations();
            let filled = train.to_dense();
            let factors = nmf_multiplicative(filled.view(), k, iterations, cell_seed(cfg, algo, k))?;
            let fit = ClippedReconstruction { factors: &factors, v_max };
            push(&mut outcome, scoring.on_train(&fit)?, scoring.on_test(&fit)?);
            outcome.iterations = Some(iterations);
            outcome.factors = Some(factors);
        }
        Algorithm::Rnmf => {
            let rcfg = RegNmfConfig {
                k,
                seed: cell_seed(cfg, algo, k),
                ..cfg.rnmf
            };
            let factors = regularized_mf(train, &rcfg)?;
            let fit = ClippedReconstruction { factors: &factors, v_max };
            push(&mut outcome, scoring.on_train(&fit)?, scoring.on_test(&fit)?);
            outcome.iterations = Some(rcfg.epochs);
            outcome.factors = Some(factors);
        }
        Algorithm::Knn => {
            let model = KnnModel::fit(train, cfg.knn)?;
            let train_report = scoring.on_train(&model.predict_cells(&scoring.train.1.sigma)?)?;
            let test_report = match &scoring.test {
                Some((_, set)) => scoring.on_test(&model.predict_cells(&set.sigma)?)?,
                None => None,
            };
            push(&mut outcome, train_report, test_report);
        }
    }
    info!(
        "{algo} k={k}: {}",
        outcome
            .reports
            .iter()
            .map(|r| format!("{} mae {:.4} 0-1 {:.4}", r.set_label, r.mae, r.zero_one))
            .collect::<Vec<_>>()
            .join(", ")
    );
    Ok(outcome)
}

fn write_trace(dir: &Path, outcome: &CellOutcome) -> Result<Vec<PathBuf>> {
    let Some(k) = outcome.k.filter(|_| !outcome.trace.is_empty()) else {
        return Ok(Vec::new());
    };
    let mut table = Table::new(TRACE_HEADER);
    let mut timing = Table::new(["iteration", "elapsed_seconds"]);
    for row in &outcome.trace {
        let e = &row.errors;
        let mut fields = vec![e.iteration.to_string(), e.mfe.to_string(), e.mie.to_string()];
        match &row.metrics {
            Some(m) => {
                fields.extend([
                    m.mae.to_string(),
                    optional(m.cmae),
                    m.zero_one.to_string(),
                    optional(m.precision),
                    optional(m.recall),
                ]);
                timing.row([e.iteration.to_string(), format!("{:.3}", e.elapsed)]);
            }
            None => fields.extend(std::iter::repeat_n(String::new(), 5)),
        }
        table.row(fields);
    }
    let trace_path = dir.join(trace_file(outcome.algo, k));
    let timing_path = dir.join(timing_file(outcome.algo, k));
    table.write(&trace_path)?;
    timing.write(&timing_path)?;
    Ok(vec![trace_path, timing_path])
}

/// What a study produced.
#[derive(Debug, Clone)]
pub struct StudyOutput {
    pub cells: Vec<CellOutcome>,
    pub results: PathBuf,
    pub scatter: Option<PathBuf>,
    pub traces: Vec<PathBuf>,
}

fn ranks(cfg: &ExperimentConfig, algo: Algorithm) -> Vec<usize> {
    if algo.uses_rank() {
        cfg.k_list.clone()
    } else {
        vec![0]
    }
}

/// Runs completion on every observed rating for each `k`, tracing mFE and
/// MIE every iteration and the full metrics every `trace_every` iterations.
pub fn run_convergence_study(cfg: &ExperimentConfig) -> Result<StudyOutput> {
    cfg.validate()?;
    if cfg.split.is_some() {
        return Err(HarnessError::Config(
            "the convergence study trains on every rating; drop the split".into(),
        ));
    }
    if cfg.algorithms != [Algorithm::CutNmf] {
        return Err(HarnessError::Config(
            "the convergence study runs cutnmf only".into(),
        ));
    }
    let a = load_dataset(cfg)?;
    info!("{}: {} ratings, {}x{}", cfg.dataset.source, a.len(), a.n_users(), a.n_items());
    run_study(cfg, &a, None)
}

/// Trains every selected algorithm on the training split and scores it on
/// both sides.
pub fn run_accuracy_study(cfg: &ExperimentConfig) -> Result<StudyOutput> {
    cfg.validate()?;
    let a = load_dataset(cfg)?;
    let split = make_split(cfg, &a)?;
    info!(
        "{}: {} training / {} test ratings",
        cfg.dataset.source,
        split.train.len(),
        split.test.len()
    );
    run_study(cfg, &split.train, Some(&split.test))
}

fn run_study(
    cfg: &ExperimentConfig,
    train: &ObservedRatings,
    test: Option<&ObservedRatings>,
) -> Result<StudyOutput> {
    let mut results = Table::new(RESULTS_HEADER);
    let mut scatter = Table::new(["algo", "k", "mae", "zero_one"]);
    let mut cells = Vec::new();
    let mut traces = Vec::new();
    for &algo in &cfg.algorithms {
        for k in ranks(cfg, algo) {
            let outcome = run_cell(cfg, algo, k, train, test)?;
            traces.extend(write_trace(&cfg.output, &outcome)?);
            for report in &outcome.reports {
                results.row(outcome.result_row(cfg.dataset.source, report));
            }
            if let Some(r) = outcome.report(EvalSetKind::Theta20) {
                let k = outcome.k.map(|k| k.to_string()).unwrap_or_default();
                scatter.row([algo.to_string(), k, r.mae.to_string(), r.zero_one.to_string()]);
            }
            cells.push(outcome);
        }
    }
    let results_path = cfg.output.join(RESULTS_FILE);
    results.write(&results_path)?;
    let scatter_path = match test {
        Some(_) => {
            let p = cfg.output.join(SCATTER_FILE);
            scatter.write(&p)?;
            Some(p)
        }
        None => None,
    };
    Ok(StudyOutput {
        cells,
        results: results_path,
        scatter: scatter_path,
        traces,
    })
}
