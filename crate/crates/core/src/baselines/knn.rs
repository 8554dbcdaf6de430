use ndarray::Array2;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::metrics::RatingLookup;
use crate::ratings::{IndexSet, ObservedRatings};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KnnFallback {
    /// The user's mean rating, or the global mean for users without ratings.
    UserMean,
    GlobalMean,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KnnConfig {
    pub n_neighbors: usize,
    /// Minimum number of co-rated items for a similarity to be defined.
    pub min_overlap: usize,
    pub fallback: KnnFallback,
}

impl Default for KnnConfig {
    fn default() -> Self {
        Self {
            n_neighbors: 40,
            min_overlap: 3,
            fallback: KnnFallback::UserMean,
        }
    }
}

impl KnnConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_neighbors == 0 {
            return Err(Error::InvalidConfig("n_neighbors must be >= 1".into()));
        }
        if self.min_overlap < 2 {
            return Err(Error::InvalidConfig("min_overlap must be >= 2".into()));
        }
        Ok(())
    }
}

/// Pearson correlation over co-rated items. Each argument is a user's rated
/// items (ascending) with the matching ratings. `None` when fewer than
/// `min_overlap` items are shared or either side has zero variance on them.
pub fn pearson_similarity(
    a: (&[u32], &[u8]),
    b: (&[u32], &[u8]),
    min_overlap: usize,
) -> Option<f64> {
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let (mut p, mut q) = (0, 0);
    while p < a.0.len() && q < b.0.len() {
        match a.0[p].cmp(&b.0[q]) {
            std::cmp::Ordering::Less => p += 1,
            std::cmp::Ordering::Greater => q += 1,
            std::cmp::Ordering::Equal => {
                xs.push(f64::from(a.1[p]));
                ys.push(f64::from(b.1[q]));
                p += 1;
                q += 1;
            }
        }
    }
    if xs.len() < min_overlap.max(2) {
        return None;
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(&ys) {
        let (dx, dy) = (x - mx, y - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx <= 0.0 || syy <= 0.0 {
        return None;
    }
    Some((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Integer predictions for a fixed set of cells.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CellPredictions {
    cells: Vec<((u32, u32), i32)>,
}

impl CellPredictions {
    pub fn new(mut cells: Vec<((u32, u32), i32)>) -> Self {
        cells.sort_unstable_by_key(|c| c.0);
        Self { cells }
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, i32)> + '_ {
        self.cells
            .iter()
            .map(|&((u, i), r)| (u as usize, i as usize, r))
    }
}

impl RatingLookup for CellPredictions {
    fn rating(&self, user: usize, item: usize) -> Option<i32> {
        let key = (u32::try_from(user).ok()?, u32::try_from(item).ok()?);
        self.cells
            .binary_search_by_key(&key, |c| c.0)
            .ok()
            .map(|p| self.cells[p].1)
    }
}

/// User-user similarities and means of a training set.
#[derive(Debug, Clone)]
pub struct KnnModel<'a> {
    train: &'a ObservedRatings,
    cfg: KnnConfig,
    /// NaN marks an undefined similarity.
    similarity: Array2<f64>,
    user_means: Vec<Option<f64>>,
    global_mean: f64,
}

impl<'a> KnnModel<'a> {
    pub fn fit(train: &'a ObservedRatings, cfg: KnnConfig) -> Result<Self> {
        cfg.validate()?;
        let global_mean = train
            .mean_rating()
            .ok_or(Error::EmptySet("training ratings"))?;
        let n = train.n_users();
        let rows: Vec<Vec<f64>> = (0..n)
            .into_par_iter()
            .map(|u| {
                let ru = train.user_ratings(u);
                (0..n)
                    .map(|w| {
                        if w == u {
                            f64::NAN
                        } else {
                            pearson_similarity(ru, train.user_ratings(w), cfg.min_overlap)
                                .unwrap_or(f64::NAN)
                        }
                    })
                    .collect()
            })
            .collect();
        let similarity = Array2::from_shape_vec((n, n), rows.into_iter().flatten().collect())
            .expect("n x n");
        let user_means = (0..n)
            .map(|u| {
                let (_, r) = train.user_ratings(u);
                (!r.is_empty())
                    .then(|| r.iter().map(|&x| f64::from(x)).sum::<f64>() / r.len() as f64)
            })
            .collect();
        Ok(Self {
            train,
            cfg,
            similarity,
            user_means,
            global_mean,
        })
    }

    pub fn similarity(&self, u: usize, w: usize) -> Option<f64> {
        let s = self.similarity[[u, w]];
        (!s.is_nan()).then_some(s)
    }

    /// Real-valued prediction before clipping and rounding.
    pub fn predict_raw(&self, user: usize, item: usize) -> f64 {
        let (raters, ratings) = self.train.item_ratings(item);
        let mut neighbours: Vec<(f64, usize, f64)> = raters
            .iter()
            .zip(ratings)
            .filter_map(|(&w, &r)| {
                let w = w as usize;
                if w == user {
                    return None;
                }
                self.similarity(user, w)
                    .filter(|&s| s > 0.0)
                    .map(|s| (s, w, f64::from(r)))
            })
            .collect();
        // most similar first, ties by user index
        neighbours.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
        neighbours.truncate(self.cfg.n_neighbors);

        let base = self.user_means[user];
        if neighbours.is_empty() || base.is_none() {
            return match self.cfg.fallback {
                KnnFallback::UserMean => base.unwrap_or(self.global_mean),
                KnnFallback::GlobalMean => self.global_mean,
            };
        }
        let (mut num, mut den) = (0.0, 0.0);
        for &(s, w, r) in &neighbours {
            let mw = self.user_means[w].expect("neighbour rated the item");
            num += s * (r - mw);
            den += s;
        }
        base.expect("checked") + num / den
    }

    pub fn predict(&self, user: usize, item: usize) -> i32 {
        let scale = self.train.scale();
        self.predict_raw(user, item)
            .clamp(f64::from(scale.v_min()), f64::from(scale.v_max()))
            .round() as i32
    }

    /// [`Self::predict`] on every cell of `queries`.
    pub fn predict_cells(&self, queries: &IndexSet) -> Result<CellPredictions> {
        if queries.shape() != self.train.shape() {
            return Err(Error::DimensionMismatch {
                context: "knn queries",
                expected: self.train.shape(),
                actual: queries.shape(),
            });
        }
        let cells: Vec<(usize, usize)> = queries.iter().collect();
        let preds = cells
            .par_iter()
            .map(|&(u, i)| ((u as u32, i as u32), self.predict(u, i)))
            .collect();
        Ok(CellPredictions::new(preds))
    }
}

/// Fits a KNN model on `train` and predicts every cell of `queries`.
pub fn knn_predict(
    train: &ObservedRatings,
    cfg: KnnConfig,
    queries: &IndexSet,
) -> Result<CellPredictions> {
    KnnModel::fit(train, cfg)?.predict_cells(queries)
}
