//! Comparison methods: user-based KNN with Pearson similarity, Lee-Seung
//! multiplicative-update NMF on the zero-filled matrix, and a regularized
//! nonnegative latent-factor model trained by projected SGD.
//!
//! Every baseline hands its predictions to [`crate::metrics`] through
//! [`RatingLookup`](crate::metrics::RatingLookup), the same path the
//! completion engine uses.

mod knn;
mod multiplicative;
mod regularized;

pub use knn::{knn_predict, pearson_similarity, CellPredictions, KnnConfig, KnnFallback, KnnModel};
pub use multiplicative::{
    multiplicative_update_h, multiplicative_update_w, nmf_multiplicative,
    nmf_multiplicative_with_observer,
};
pub use regularized::{
    entry_gradient, entry_loss, regularized_mf, training_objective, RegNmfConfig,
};
