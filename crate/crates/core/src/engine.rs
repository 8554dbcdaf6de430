//! Outer iterations: plain alternating NNLS on a fixed dense matrix, and the
//! adaptive completion loop that re-imputes unobserved cells every iteration
//! with the clipped reconstruction.
//!
//! One completion iteration, with `C` the current dense working matrix:
//!
//! 1. `H <- argmin_{H >= 0} ||C - W Hᵀ||²` (approximately, see [`NnlsOptions`])
//! 2. `W <- argmin_{W >= 0} ||C - W Hᵀ||²`
//! 3. `B = W Hᵀ`; `C <- P_Ω(A) + P_Ω̄(cut_v(B))`
//! 4. mean Frobenius error and maximum integer error of `B` on `Ω`
//!
//! The loop stops at `j_max`, when the rounded clipped reconstruction matches
//! every observed rating, or when the relative change of the mean Frobenius
//! error drops to `tol`.

use std::fmt;
use std::time::Instant;

use ndarray::linalg::general_mat_mul;
use ndarray::{Array2, ArrayView2, Zip};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{check_shape, Error, Result};
use crate::metrics::RatingLookup;
use crate::nnls::{HalfStep, NnlsOptions};
use crate::ratings::{clipped_rating, CompletedMatrix, FactorPair, ObservedRatings};

#[derive(Debug, Clone, PartialEq)]
pub struct CutNmfConfig {
    pub k: usize,
    pub j_max: usize,
    /// Relative mFE stagnation threshold.
    pub tol: f64,
    /// Seed of the random initial `W`.
    pub seed: u64,
    pub nnls: NnlsOptions,
    /// Keep every `trace_every`-th iteration in the result trace; 0 keeps none.
    pub trace_every: usize,
}

impl CutNmfConfig {
    pub fn new(k: usize) -> Self {
        Self {
            k,
            j_max: 2_000,
            tol: 1e-7,
            seed: 0,
            nnls: NnlsOptions::default(),
            trace_every: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::InvalidConfig("k must be >= 1".into()));
        }
        if self.j_max == 0 {
            return Err(Error::InvalidConfig("j_max must be >= 1".into()));
        }
        if !(self.tol > 0.0) {
            return Err(Error::InvalidConfig("tol must be > 0".into()));
        }
        self.nnls.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationTrace {
    pub iteration: usize,
    pub mfe: f64,
    pub mie: u32,
    /// Wall-clock seconds since the run started.
    pub elapsed: f64,
}

impl IterationTrace {
    /// Same iteration and errors, ignoring timing.
    pub fn same_values(&self, other: &Self) -> bool {
        self.iteration == other.iteration
            && self.mfe.to_bits() == other.mfe.to_bits()
            && self.mie == other.mie
    }
}

impl fmt::Display for IterationTrace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}\t{}\t{}\t{:.3}",
            self.iteration, self.mfe, self.mie, self.elapsed
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StopReason {
    MaxIterations,
    ExactReconstruction,
    MfeStagnated,
}

impl StopReason {
    pub fn as_str(&self) -> &'static str {
        match self {
            StopReason::MaxIterations => "max_iterations",
            StopReason::ExactReconstruction => "exact_reconstruction",
            StopReason::MfeStagnated => "mfe_stagnated",
        }
    }
}

impl fmt::Display for StopReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone)]
pub struct CutNmfResult<'a> {
    pub factors: FactorPair,
    pub completed: CompletedMatrix<'a>,
    pub trace: Vec<IterationTrace>,
    pub stop_reason: StopReason,
    /// Errors at the last iteration run.
    pub last: IterationTrace,
}

impl CutNmfResult<'_> {
    pub fn iterations(&self) -> usize {
        self.last.iteration
    }
}

/// Values of `1/2 ||C - W Hᵀ||²` around one pair of half-steps, all against
/// the same working matrix `C`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HalfStepObjectives {
    pub before_h: f64,
    pub after_h: f64,
    pub before_w: f64,
    pub after_w: f64,
}

impl HalfStepObjectives {
    /// Both half-steps were non-increasing, up to rounding of the cached
    /// objective evaluation.
    pub fn is_monotone(&self) -> bool {
        let slack = 1e-10 * self.before_h.abs().max(1.0);
        self.after_h <= self.before_h + slack && self.after_w <= self.before_w + slack
    }
}

/// State handed to observers after every iteration.
#[derive(Debug)]
pub struct Progress<'a> {
    pub iteration: usize,
    pub w: ArrayView2<'a, f64>,
    pub h: ArrayView2<'a, f64>,
    pub objectives: HalfStepObjectives,
    /// Completion runs only.
    pub errors: Option<IterationTrace>,
}

impl Progress<'_> {
    pub fn factors(&self) -> FactorPair {
        FactorPair::from_parts_unchecked(self.w.to_owned(), self.h.to_owned())
    }
}

/// `rows x k` matrix with entries uniform on `(0, 1]`.
pub fn random_factor(rows: usize, k: usize, seed: u64) -> Array2<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Array2::from_shape_simple_fn((rows, k), || 1.0 - rng.gen::<f64>())
}

fn frobenius_sq(m: ArrayView2<'_, f64>) -> f64 {
    m.iter().map(|x| x * x).sum()
}

/// One H half-step followed by one W half-step against `c`.
fn alternate(
    c: ArrayView2<'_, f64>,
    w: &mut Array2<f64>,
    h: &mut Array2<f64>,
    opts: &NnlsOptions,
) -> HalfStepObjectives {
    let half_c = 0.5 * frobenius_sq(c);

    let step = HalfStep::new(c, w.view());
    let before_h = half_c + step.reduced_objective(h.view());
    step.solve(h, opts);
    let after_h = half_c + step.reduced_objective(h.view());

    let step = HalfStep::new(c.t(), h.view());
    let before_w = half_c + step.reduced_objective(w.view());
    step.solve(w, opts);
    let after_w = half_c + step.reduced_objective(w.view());

    let objectives = HalfStepObjectives {
        before_h,
        after_h,
        before_w,
        after_w,
    };
    debug_assert!(objectives.is_monotone(), "{objectives:?}");
    objectives
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnlsStopping {
    pub max_iter: usize,
    /// Stop once the relative decrease of the objective is at most this.
    pub rel_tol: f64,
}

/// Alternating NNLS on the fixed dense matrix `a` from `w0` and `H = 0`.
pub fn anls(
    a: ArrayView2<'_, f64>,
    w0: Array2<f64>,
    stopping: AnlsStopping,
    nnls: &NnlsOptions,
) -> Result<FactorPair> {
    anls_with_observer(a, w0, stopping, nnls, |_| {})
}

pub fn anls_with_observer<F>(
    a: ArrayView2<'_, f64>,
    w0: Array2<f64>,
    stopping: AnlsStopping,
    nnls: &NnlsOptions,
    mut observer: F,
) -> Result<FactorPair>
where
    F: FnMut(&Progress<'_>),
{
    nnls.validate()?;
    if w0.ncols() == 0 {
        return Err(Error::InvalidConfig("k must be >= 1".into()));
    }
    check_shape("anls W0", (a.nrows(), w0.ncols()), w0.dim())?;
    if a.iter().any(|x| !x.is_finite()) || w0.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("anls input"));
    }
    if a.iter().chain(w0.iter()).any(|&x| x < 0.0) {
        return Err(Error::InvalidConfig("anls input must be nonnegative".into()));
    }

    let mut w = w0;
    let mut h = Array2::zeros((a.ncols(), w.ncols()));
    for iteration in 1..=stopping.max_iter {
        let objectives = alternate(a, &mut w, &mut h, nnls);
        observer(&Progress {
            iteration,
            w: w.view(),
            h: h.view(),
            objectives,
            errors: None,
        });
        let (prev, cur) = (objectives.before_h, objectives.after_w);
        if cur <= 0.0 || (prev - cur) <= stopping.rel_tol * prev.abs() {
            break;
        }
    }
    Ok(FactorPair::from_parts_unchecked(w, h))
}

/// Mean Frobenius error `||P_Ω(A - B)||_F / |Ω|`.
pub fn mfe(a: &ObservedRatings, b: ArrayView2<'_, f64>) -> Result<f64> {
    check_shape("mfe", a.shape(), b.dim())?;
    if a.is_empty() {
        return Err(Error::EmptySet("observed ratings"));
    }
    let sum: f64 = a
        .iter()
        .map(|(u, i, r)| {
            let e = f64::from(r) - b[[u, i]];
            e * e
        })
        .sum();
    Ok(sum.sqrt() / a.len() as f64)
}

/// Maximum integer error `max_Ω |A - cut_v([B])|`.
pub fn mie(a: &ObservedRatings, b: ArrayView2<'_, f64>) -> Result<u32> {
    check_shape("mie", a.shape(), b.dim())?;
    if a.is_empty() {
        return Err(Error::EmptySet("observed ratings"));
    }
    let v = a.scale().v_max();
    Ok(a.iter()
        .map(|(u, i, r)| (i32::from(r) - clipped_rating(b[[u, i]], v)).unsigned_abs())
        .max()
        .unwrap_or(0))
}

/// Runs the adaptive completion loop.
pub fn cutnmf<'a>(a: &'a ObservedRatings, cfg: &CutNmfConfig) -> Result<CutNmfResult<'a>> {
    cutnmf_with_observer(a, cfg, |_| {})
}

/// [`cutnmf`], calling `observer` after every iteration.
pub fn cutnmf_with_observer<'a, F>(
    a: &'a ObservedRatings,
    cfg: &CutNmfConfig,
    mut observer: F,
) -> Result<CutNmfResult<'a>>
where
    F: FnMut(&Progress<'_>),
{
    cfg.validate()?;
    if a.is_empty() {
        return Err(Error::EmptySet("observed ratings"));
    }
    let start = Instant::now();
    let (n, m) = a.shape();
    let v_max = a.scale().v_max();
    let v = f64::from(v_max);
    let omega = a.len() as f64;

    let mut c = a.to_dense();
    let mut w = random_factor(n, cfg.k, cfg.seed);
    let mut h = Array2::zeros((m, cfg.k));
    let mut trace = Vec::new();
    let mut mfe_value = 0.0;
    let mut j = 0;

    let (stop_reason, last) = loop {
        j += 1;
        let mfe_old = mfe_value;
        let objectives = alternate(c.view(), &mut w, &mut h, &cfg.nnls);

        // B = W Hᵀ lands in C; the errors read B on Ω before it is overwritten.
        general_mat_mul(1.0, &w, &h.t(), 0.0, &mut c);
        let mut sq = 0.0;
        let mut mie_value = 0u32;
        for (u, i, r) in a.iter() {
            let b = c[[u, i]];
            let e = f64::from(r) - b;
            sq += e * e;
            mie_value = mie_value.max((i32::from(r) - clipped_rating(b, v_max)).unsigned_abs());
            c[[u, i]] = f64::from(r);
        }
        c.mapv_inplace(|x| x.min(v));
        mfe_value = sq.sqrt() / omega;

        let record = IterationTrace {
            iteration: j,
            mfe: mfe_value,
            mie: mie_value,
            elapsed: start.elapsed().as_secs_f64(),
        };
        observer(&Progress {
            iteration: j,
            w: w.view(),
            h: h.view(),
            objectives,
            errors: Some(record),
        });

        // mFE = 0 implies MIE = 0, so the division below never sees zero.
        let stop = if mie_value == 0 || mfe_value == 0.0 {
            Some(StopReason::ExactReconstruction)
        } else if (mfe_old - mfe_value).abs() / mfe_value <= cfg.tol {
            Some(StopReason::MfeStagnated)
        } else if j >= cfg.j_max {
            Some(StopReason::MaxIterations)
        } else {
            None
        };
        if cfg.trace_every > 0 && (j % cfg.trace_every == 0 || stop.is_some()) {
            trace.push(record);
        }
        if let Some(reason) = stop {
            break (reason, record);
        }
    };

    Ok(CutNmfResult {
        factors: FactorPair::from_parts_unchecked(w, h),
        completed: CompletedMatrix::new_unchecked(c, a),
        trace,
        stop_reason,
        last,
    })
}

/// Integer predictions on the unobserved cells of a completed matrix.
#[derive(Debug, Clone)]
pub struct PredictedRatings<'a> {
    values: Array2<i32>,
    source: &'a ObservedRatings,
}

impl PredictedRatings<'_> {
    pub fn values(&self) -> &Array2<i32> {
        &self.values
    }
}

impl RatingLookup for PredictedRatings<'_> {
    fn rating(&self, user: usize, item: usize) -> Option<i32> {
        if self.source.get(user, item).is_some() {
            None
        } else {
            self.values.get((user, item)).copied()
        }
    }
}

/// `[cut_v(C)]` restricted to `Ω̄`: the recommendations for unrated cells.
pub fn predict<'a>(result: &CutNmfResult<'a>) -> PredictedRatings<'a> {
    let source = result.completed.source();
    let v_max = source.scale().v_max();
    let mut values = Array2::zeros(result.completed.values().dim());
    Zip::from(&mut values)
        .and(result.completed.values())
        .for_each(|p, &x| *p = clipped_rating(x, v_max));
    for (u, i, _) in source.iter() {
        values[[u, i]] = 0;
    }
    PredictedRatings { values, source }
}

/// `cut_v([W Hᵀ])` evaluated lazily per cell, on any cell.
#[derive(Debug, Clone, Copy)]
pub struct ClippedReconstruction<'a> {
    pub factors: &'a FactorPair,
    pub v_max: u8,
}

impl RatingLookup for ClippedReconstruction<'_> {
    fn rating(&self, user: usize, item: usize) -> Option<i32> {
        if user < self.factors.n_users() && item < self.factors.n_items() {
            Some(clipped_rating(self.factors.entry(user, item), self.v_max))
        } else {
            None
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ratings::{reconstruct, RatingScale};
    use ndarray::array;

    fn random_ratings(seed: u64, n: usize, m: usize, density: f64) -> ObservedRatings {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut entries = Vec::new();
        for u in 0..n {
            for i in 0..m {
                if rng.gen::<f64>() < density {
                    entries.push((u, i, rng.gen_range(1..=5)));
                }
            }
        }
        ObservedRatings::new(n, m, RatingScale::FIVE_STAR, entries).unwrap()
    }

    #[test]
    fn mfe_examples() {
        let a = ObservedRatings::new(2, 2, RatingScale::FIVE_STAR, [(0, 0, 4)]).unwrap();
        assert_eq!(mfe(&a, array![[2.0, 9.0], [9.0, 9.0]].view()).unwrap(), 2.0);
        assert_eq!(mfe(&a, array![[4.0, 0.0], [1.0, 1.0]].view()).unwrap(), 0.0);
        let empty = ObservedRatings::new(2, 2, RatingScale::FIVE_STAR, []).unwrap();
        assert!(matches!(mfe(&empty, Array2::zeros((2, 2)).view()), Err(Error::EmptySet(_))));
        assert!(matches!(mfe(&a, Array2::zeros((3, 2)).view()), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn mie_examples() {
        let a = ObservedRatings::new(1, 2, RatingScale::FIVE_STAR, [(0, 0, 1), (0, 1, 3)]).unwrap();
        assert_eq!(mie(&a, array![[1.0, 3.0]].view()).unwrap(), 0);
        assert_eq!(mie(&a, array![[7.4, 3.0]].view()).unwrap(), 4);
        assert_eq!(mie(&a, array![[1.4, 2.5]].view()).unwrap(), 0);
        assert_eq!(mie(&a, array![[1.5, 3.0]].view()).unwrap(), 1);
    }

    #[test]
    fn mfe_mie_match_double_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let a = random_ratings(9, 6, 5, 0.6);
        let b = Array2::from_shape_fn((6, 5), |_| rng.gen::<f64>() * 7.0);
        let mut sq = 0.0;
        let mut count = 0usize;
        let mut worst = 0i64;
        for u in 0..6 {
            for i in 0..5 {
                if let Some(r) = a.get(u, i) {
                    let d = f64::from(r) - b[[u, i]];
                    sq += d * d;
                    count += 1;
                    let rounded = (b[[u, i]] + 0.5).floor().min(5.0) as i64;
                    worst = worst.max((i64::from(r) - rounded).abs());
                }
            }
        }
        assert!((mfe(&a, b.view()).unwrap() - sq.sqrt() / count as f64).abs() < 1e-15);
        assert_eq!(i64::from(mie(&a, b.view()).unwrap()), worst);
    }

    #[test]
    fn completed_matrix_keeps_observed_and_clips_the_rest() {
        let a = random_ratings(1, 15, 12, 0.4);
        let mut cfg = CutNmfConfig::new(3);
        cfg.j_max = 30;
        let mut checked = 0;
        let result = cutnmf_with_observer(&a, &cfg, |p| {
            assert!(p.objectives.is_monotone(), "{:?}", p.objectives);
            checked += 1;
        })
        .unwrap();
        assert_eq!(checked, result.iterations());
        CompletedMatrix::new(result.completed.values().clone(), &a).unwrap();
    }

    #[test]
    fn errors_in_result_match_standalone_functions() {
        let a = random_ratings(2, 10, 8, 0.5);
        let mut cfg = CutNmfConfig::new(2);
        cfg.j_max = 7;
        cfg.trace_every = 1;
        let result = cutnmf(&a, &cfg).unwrap();
        let b = reconstruct(&result.factors);
        assert_eq!(result.last.mfe, mfe(&a, b.view()).unwrap());
        assert_eq!(result.last.mie, mie(&a, b.view()).unwrap());
        assert_eq!(result.trace.len(), result.iterations());
    }

    #[test]
    fn exact_reconstruction_stops_with_zero_mie() {
        // rank-1 integer matrix, fully observed
        let entries =
            (0..4).flat_map(|u| (0..3).map(move |i| (u, i, ((u % 2 + 1) * (i % 2 + 1)) as i64)));
        let a = ObservedRatings::new(4, 3, RatingScale::FIVE_STAR, entries).unwrap();
        let mut cfg = CutNmfConfig::new(2);
        cfg.j_max = 500;
        let result = cutnmf(&a, &cfg).unwrap();
        assert_eq!(result.stop_reason, StopReason::ExactReconstruction);
        assert_eq!(result.last.mie, 0);
    }

    #[test]
    fn trace_cadence() {
        let a = random_ratings(3, 8, 8, 0.5);
        let mut cfg = CutNmfConfig::new(2);
        cfg.j_max = 10;
        cfg.tol = 1e-300;
        cfg.trace_every = 4;
        let result = cutnmf(&a, &cfg).unwrap();
        let its: Vec<_> = result.trace.iter().map(|t| t.iteration).collect();
        if result.stop_reason == StopReason::MaxIterations {
            assert_eq!(its, vec![4, 8, 10]);
        }
        cfg.trace_every = 0;
        assert!(cutnmf(&a, &cfg).unwrap().trace.is_empty());
    }

    #[test]
    fn predictions_cover_only_unobserved_cells() {
        let a = ObservedRatings::new(1, 3, RatingScale::FIVE_STAR, [(0, 0, 3)]).unwrap();
        let values = array![[3.0, 4.6, 5.0]];
        let result = CutNmfResult {
            factors: FactorPair::new(array![[1.0]], array![[1.0], [1.0], [1.0]]).unwrap(),
            completed: CompletedMatrix::new(values, &a).unwrap(),
            trace: vec![],
            stop_reason: StopReason::MaxIterations,
            last: IterationTrace { iteration: 1, mfe: 0.0, mie: 0, elapsed: 0.0 },
        };
        let p = predict(&result);
        assert_eq!(p.rating(0, 0), None);
        assert_eq!(p.rating(0, 1), Some(5));
        assert_eq!(p.rating(0, 2), Some(5));
        let clip = ClippedReconstruction { factors: &FactorPair::new(array![[2.0]], array![[3.6]]).unwrap(), v_max: 5 };
        assert_eq!(clip.rating(0, 0), Some(5));
    }

    #[test]
    fn anls_fits_planted_product_and_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let w = Array2::from_shape_fn((20, 3), |_| rng.gen::<f64>());
        let h = Array2::from_shape_fn((15, 3), |_| rng.gen::<f64>());
        let a = w.dot(&h.t());
        let stop = AnlsStopping { max_iter: 3000, rel_tol: 0.0 };
        let opts = NnlsOptions { inner_sweeps: 10, ..NnlsOptions::default() };
        let mut last = f64::INFINITY;
        let f = anls_with_observer(a.view(), random_factor(20, 3, 1), stop, &opts, |p| {
            assert!(p.objectives.is_monotone());
            assert!(p.objectives.after_w <= last * (1.0 + 1e-10) + 1e-300);
            last = p.objectives.after_w;
        })
        .unwrap();
        let resid = frobenius_sq((&a - &reconstruct(&f)).view()).sqrt();
        assert!(resid <= 1e-4 * frobenius_sq(a.view()).sqrt(), "{resid}");

        let zero = Array2::zeros((5, 4));
        let f = anls(zero.view(), random_factor(5, 2, 3), stop, &opts).unwrap();
        assert!(reconstruct(&f).iter().all(|&x| x == 0.0));
    }

    #[test]
    fn full_rank_fit_is_no_worse_than_rank_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let a = Array2::from_shape_fn((6, 4), |_| rng.gen::<f64>() * 5.0);
        let stop = AnlsStopping { max_iter: 500, rel_tol: 1e-12 };
        let opts = NnlsOptions::exact();
        let resid = |k: usize| {
            let f = anls(a.view(), random_factor(6, k, 9), stop, &opts).unwrap();
            frobenius_sq((&a - &reconstruct(&f)).view())
        };
        assert!(resid(4) <= resid(1));
    }

    #[test]
    fn config_validation() {
        let a = random_ratings(5, 4, 4, 0.5);
        let mut cfg = CutNmfConfig::new(0);
        assert!(cutnmf(&a, &cfg).is_err());
        cfg.k = 2;
        cfg.tol = 0.0;
        assert!(cutnmf(&a, &cfg).is_err());
        let empty = ObservedRatings::new(3, 3, RatingScale::FIVE_STAR, []).unwrap();
        assert!(matches!(cutnmf(&empty, &CutNmfConfig::new(2)), Err(Error::EmptySet(_))));
    }
}
