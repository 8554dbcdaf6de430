//! Matrix completion for integer rating data by nonnegative factorization,
//! with missing entries imputed from the clipped current reconstruction.
//!
//! ```
//! use cutnmf::{cutnmf, predict, CutNmfConfig, ObservedRatings, RatingScale};
//!
//! let a = ObservedRatings::new(
//!     2,
//!     2,
//!     RatingScale::FIVE_STAR,
//!     [(0, 0, 5), (0, 1, 4), (1, 0, 5)],
//! )?;
//! let result = cutnmf(&a, &CutNmfConfig::new(1))?;
//! let c = predict(&result);
//! assert!((0..=5).contains(&c.values()[[1, 1]]));
//! # Ok::<(), cutnmf::Error>(())
//! ```

pub mod baselines;
pub mod data;
pub mod engine;
pub mod error;
pub mod metrics;
pub mod nnls;
pub mod ratings;
pub mod seed;

pub use engine::{
    anls, cutnmf, cutnmf_with_observer, mfe, mie, predict, random_factor, AnlsStopping,
    ClippedReconstruction, CutNmfConfig, CutNmfResult, IterationTrace, PredictedRatings,
    Progress, StopReason,
};
pub use error::{Error, Result};
pub use metrics::{evaluate, EvalSet, MetricReport, RatingLookup};
pub use nnls::NnlsOptions;
pub use ratings::{
    clipped_rating, cut_upper, project_complement, project_observed, reconstruct, round_nearest,
    CompletedMatrix, FactorPair, IndexSet, ObservedRatings, RatingScale,
};
