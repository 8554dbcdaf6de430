use ndarray::{Array2, ArrayView2, Zip};

use crate::engine::random_factor;
use crate::error::{Error, Result};
use crate::ratings::FactorPair;
use crate::seed::derive_seed;

const EPS: f64 = 1e-12;

/// `H <- H * (AᵀW) / (H WᵀW + eps)`, entrywise.
pub fn multiplicative_update_h(a: ArrayView2<'_, f64>, w: &Array2<f64>, h: &mut Array2<f64>) {
    let num = a.t().dot(w);
    let den = h.dot(&w.t().dot(w));
    Zip::from(h)
        .and(&num)
        .and(&den)
        .for_each(|x, &n, &d| *x *= n / (d + EPS));
}

/// `W <- W * (A H) / (W HᵀH + eps)`, entrywise.
pub fn multiplicative_update_w(a: ArrayView2<'_, f64>, w: &mut Array2<f64>, h: &Array2<f64>) {
    let num = a.dot(h);
    let den = w.dot(&h.t().dot(h));
    Zip::from(w)
        .and(&num)
        .and(&den)
        .for_each(|x, &n, &d| *x *= n / (d + EPS));
}

/// Lee-Seung multiplicative updates for `min ||A - W Hᵀ||_F²` on a dense
/// nonnegative matrix. Applied to the zero-filled rating matrix this is the
/// naive control: missing ratings are fitted as zeros.
pub fn nmf_multiplicative(
    a_filled: ArrayView2<'_, f64>,
    k: usize,
    iterations: usize,
    seed: u64,
) -> Result<FactorPair> {
    nmf_multiplicative_with_observer(a_filled, k, iterations, seed, |_, _| {})
}

/// As [`nmf_multiplicative`], calling `observer(w, h)` after every full
/// update.
pub fn nmf_multiplicative_with_observer<F>(
    a_filled: ArrayView2<'_, f64>,
    k: usize,
    iterations: usize,
    seed: u64,
    mut observer: F,
) -> Result<FactorPair>
where
    F: FnMut(&Array2<f64>, &Array2<f64>),
{
    if k == 0 {
        return Err(Error::InvalidConfig("k must be >= 1".into()));
    }
    if a_filled.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("nmf input"));
    }
    if a_filled.iter().any(|&x| x < 0.0) {
        return Err(Error::InvalidConfig("nmf input must be nonnegative".into()));
    }
    let (n, m) = a_filled.dim();
    let mean = a_filled.mean().unwrap_or(0.0);
    // start with W Hᵀ near the data mean
    let scale = if mean > 0.0 { (mean / k as f64).sqrt() } else { 1.0 };
    let mut w = random_factor(n, k, derive_seed(seed, "nmf/w")) * scale;
    let mut h = random_factor(m, k, derive_seed(seed, "nmf/h")) * scale;
    for _ in 0..iterations {
        multiplicative_update_h(a_filled, &w, &mut h);
        multiplicative_update_w(a_filled, &mut w, &h);
        observer(&w, &h);
    }
    FactorPair::new(w, h)
}
