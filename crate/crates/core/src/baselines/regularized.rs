use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Error, Result};
use crate::ratings::{FactorPair, ObservedRatings};
use crate::seed::rng_for;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegNmfConfig {
    pub k: usize,
    pub lambda: f64,
    pub learning_rate: f64,
    pub epochs: usize,
    pub seed: u64,
}

impl RegNmfConfig {
    pub fn new(k: usize) -> Self {
        Self {
            k,
            lambda: 0.05,
            learning_rate: 0.01,
            epochs: 50,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::InvalidConfig("k must be >= 1".into()));
        }
        if !(self.lambda >= 0.0) {
            return Err(Error::InvalidConfig("lambda must be >= 0".into()));
        }
        if !(self.learning_rate > 0.0) {
            return Err(Error::InvalidConfig("learning_rate must be > 0".into()));
        }
        if self.epochs == 0 {
            return Err(Error::InvalidConfig("epochs must be >= 1".into()));
        }
        Ok(())
    }
}

/// `(a - w.h)² + λ(||w||² + ||h||²)` for one observed cell.
pub fn entry_loss(a: f64, w: &[f64], h: &[f64], lambda: f64) -> f64 {
    let dot: f64 = w.iter().zip(h).map(|(x, y)| x * y).sum();
    let norms: f64 = w.iter().chain(h).map(|x| x * x).sum();
    (a - dot).powi(2) + lambda * norms
}

/// Gradient of [`entry_loss`] with respect to `w` and `h`.
pub fn entry_gradient(a: f64, w: &[f64], h: &[f64], lambda: f64) -> (Vec<f64>, Vec<f64>) {
    let e = a - w.iter().zip(h).map(|(x, y)| x * y).sum::<f64>();
    let gw = w
        .iter()
        .zip(h)
        .map(|(&x, &y)| -2.0 * e * y + 2.0 * lambda * x)
        .collect();
    let gh = w
        .iter()
        .zip(h)
        .map(|(&x, &y)| -2.0 * e * x + 2.0 * lambda * y)
        .collect();
    (gw, gh)
}

/// Sum of [`entry_loss`] over every observed cell.
pub fn training_objective(train: &ObservedRatings, factors: &FactorPair, lambda: f64) -> f64 {
    let (w, h) = (factors.w(), factors.h());
    train
        .iter()
        .map(|(u, i, r)| {
            entry_loss(
                f64::from(r),
                w.row(u).as_slice().expect("row-major"),
                h.row(i).as_slice().expect("row-major"),
                lambda,
            )
        })
        .sum()
}

/// Regularized nonnegative latent factors by projected SGD over the observed
/// cells, visiting them in a seeded shuffled order each epoch.
///
/// Fails with [`Error::Diverged`] if the training objective ever exceeds ten
/// times its initial value.
pub fn regularized_mf(train: &ObservedRatings, cfg: &RegNmfConfig) -> Result<FactorPair> {
    cfg.validate()?;
    let mean = train
        .mean_rating()
        .ok_or(Error::EmptySet("training ratings"))?;
    let k = cfg.k;
    // uniform on [0, 2 sqrt(mean / k)): E[w.h] = mean
    let width = 2.0 * (mean / k as f64).sqrt();
    let mut rng = rng_for(cfg.seed, "rnmf/init");
    let mut w = Array2::from_shape_simple_fn((train.n_users(), k), || rng.gen::<f64>() * width);
    let mut h = Array2::from_shape_simple_fn((train.n_items(), k), || rng.gen::<f64>() * width);

    let entries: Vec<(usize, usize, f64)> = train
        .iter()
        .map(|(u, i, r)| (u, i, f64::from(r)))
        .collect();
    let objective = |w: &Array2<f64>, h: &Array2<f64>| {
        training_objective(train, &FactorPair::from_parts_unchecked(w.clone(), h.clone()), cfg.lambda)
    };
    let initial = objective(&w, &h);

    let mut order: Vec<usize> = (0..entries.len()).collect();
    let mut rng = rng_for(cfg.seed, "rnmf/shuffle");
    let (lr, lambda) = (cfg.learning_rate, cfg.lambda);
    for _ in 0..cfg.epochs {
        order.shuffle(&mut rng);
        for &p in &order {
            let (u, i, a) = entries[p];
            let mut wu = w.row_mut(u);
            let mut hi = h.row_mut(i);
            let e = a - wu.dot(&hi);
            for f in 0..k {
                let (x, y) = (wu[f], hi[f]);
                wu[f] = (x - lr * (-2.0 * e * y + 2.0 * lambda * x)).max(0.0);
                hi[f] = (y - lr * (-2.0 * e * x + 2.0 * lambda * y)).max(0.0);
            }
        }
        let current = objective(&w, &h);
        if !current.is_finite() || current > 10.0 * initial {
            return Err(Error::Diverged {
                initial,
                objective: current,
            });
        }
    }
    FactorPair::new(w, h)
}
