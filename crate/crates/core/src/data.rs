//! Rating ingestion, planted low-rank synthetic data, and train/test splits.

use std::collections::HashMap;
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use ndarray::Array2;
use rand::seq::index;
use rand::Rng;

use crate::error::{Error, Result};
use crate::ratings::{ObservedRatings, RatingScale};
use crate::seed::rng_for;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DatasetSource {
    /// `user \t item \t rating \t timestamp`
    MovieLens100k,
    /// `UserID::MovieID::Rating::Timestamp`
    MovieLens1m,
    /// As 1M, with half-star ratings doubled onto 1..=10.
    MovieLens10m,
    Synthetic,
    /// Headerless `user,item,rating`.
    GenericCsv,
}

impl DatasetSource {
    pub fn as_str(&self) -> &'static str {
        match self {
            DatasetSource::MovieLens100k => "movielens_100k",
            DatasetSource::MovieLens1m => "movielens_1m",
            DatasetSource::MovieLens10m => "movielens_10m",
            DatasetSource::Synthetic => "synthetic",
            DatasetSource::GenericCsv => "generic_csv",
        }
    }

    pub fn default_scale(&self) -> RatingScale {
        match self {
            DatasetSource::MovieLens10m => RatingScale::TEN_HALF_STAR,
            _ => RatingScale::FIVE_STAR,
        }
    }
}

impl fmt::Display for DatasetSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DatasetSource {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "movielens_100k" | "ml-100k" | "ml100k" => DatasetSource::MovieLens100k,
            "movielens_1m" | "ml-1m" | "ml1m" => DatasetSource::MovieLens1m,
            "movielens_10m" | "ml-10m" | "ml10m" => DatasetSource::MovieLens10m,
            "synthetic" => DatasetSource::Synthetic,
            "generic_csv" | "csv" => DatasetSource::GenericCsv,
            other => return Err(Error::InvalidConfig(format!("unknown dataset format {other:?}"))),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetSpec {
    pub source: DatasetSource,
    pub path: PathBuf,
    pub scale: RatingScale,
}

impl DatasetSpec {
    pub fn new(source: DatasetSource, path: impl Into<PathBuf>) -> Self {
        Self {
            source,
            path: path.into(),
            scale: source.default_scale(),
        }
    }
}

/// Ratings plus the raw ids behind the contiguous indices.
#[derive(Debug, Clone)]
pub struct LoadedDataset {
    pub ratings: ObservedRatings,
    pub user_ids: Vec<u64>,
    pub item_ids: Vec<u64>,
}

impl LoadedDataset {
    pub fn user_index(&self, raw: u64) -> Option<usize> {
        self.user_ids.binary_search(&raw).ok()
    }

    pub fn item_index(&self, raw: u64) -> Option<usize> {
        self.item_ids.binary_search(&raw).ok()
    }
}

fn parse_error(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

fn parse_rating(source: DatasetSource, field: &str) -> Option<i64> {
    let field = field.trim();
    match source {
        DatasetSource::MovieLens10m => {
            let stars: f64 = field.parse().ok()?;
            let doubled = stars * 2.0;
            (doubled.is_finite() && doubled.fract() == 0.0).then_some(doubled as i64)
        }
        _ => field.parse().ok(),
    }
}

/// Reads a MovieLens or generic CSV ratings file, mapping raw user and item
/// ids onto contiguous indices in ascending id order.
pub fn load_movielens(spec: &DatasetSpec) -> Result<LoadedDataset> {
    let io_err = |source| Error::Io {
        path: spec.path.clone(),
        source,
    };
    let file = File::open(&spec.path).map_err(io_err)?;
    read_ratings(BufReader::new(file), spec)
}

/// [`load_movielens`] over any reader; `spec.path` is only used in messages.
pub fn read_ratings(reader: impl BufRead, spec: &DatasetSpec) -> Result<LoadedDataset> {
    let path = spec.path.as_path();
    let sep: &str = match spec.source {
        DatasetSource::MovieLens100k => "\t",
        DatasetSource::MovieLens1m | DatasetSource::MovieLens10m => "::",
        DatasetSource::GenericCsv => ",",
        DatasetSource::Synthetic => {
            return Err(Error::InvalidConfig(
                "synthetic datasets are generated, not loaded".into(),
            ))
        }
    };

    let mut raw: Vec<(u64, u64, i64)> = Vec::new();
    let mut first_seen: HashMap<(u64, u64), usize> = HashMap::new();
    for (lineno, line) in reader.lines().enumerate() {
        let lineno = lineno + 1;
        let line = line.map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        let mut fields = line.split(sep);
        let (Some(user), Some(item), Some(rating)) = (fields.next(), fields.next(), fields.next())
        else {
            return Err(parse_error(path, lineno, "expected user, item and rating fields"));
        };
        let user: u64 = user
            .trim()
            .parse()
            .map_err(|_| parse_error(path, lineno, format!("bad user id {user:?}")))?;
        let item: u64 = item
            .trim()
            .parse()
            .map_err(|_| parse_error(path, lineno, format!("bad item id {item:?}")))?;
        let value = parse_rating(spec.source, rating)
            .ok_or_else(|| parse_error(path, lineno, format!("bad rating {rating:?}")))?;
        if !spec.scale.contains(value) {
            return Err(parse_error(
                path,
                lineno,
                format!(
                    "rating {value} outside scale {}..={}",
                    spec.scale.v_min(),
                    spec.scale.v_max()
                ),
            ));
        }
        if let Some(prev) = first_seen.insert((user, item), lineno) {
            return Err(parse_error(
                path,
                lineno,
                format!("duplicate rating for user {user}, item {item} (first on line {prev})"),
            ));
        }
        raw.push((user, item, value));
    }

    let mut user_ids: Vec<u64> = raw.iter().map(|r| r.0).collect();
    user_ids.sort_unstable();
    user_ids.dedup();
    let mut item_ids: Vec<u64> = raw.iter().map(|r| r.1).collect();
    item_ids.sort_unstable();
    item_ids.dedup();

    let entries = raw.iter().map(|&(u, i, r)| {
        (
            user_ids.binary_search(&u).expect("collected"),
            item_ids.binary_search(&i).expect("collected"),
            r,
        )
    });
    let ratings = ObservedRatings::new(user_ids.len(), item_ids.len(), spec.scale, entries)?;
    Ok(LoadedDataset {
        ratings,
        user_ids,
        item_ids,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub n_users: usize,
    pub n_items: usize,
    pub true_rank: usize,
    pub n_observed: usize,
    pub seed: u64,
    pub scale: RatingScale,
}

#[derive(Debug, Clone)]
pub struct SyntheticDataset {
    pub ratings: ObservedRatings,
    /// Every cell of the rounded planted matrix.
    pub ground_truth: Array2<i32>,
}

/// Planted low-rank ratings: `W_s H_sᵀ` with uniform `[0, 1)` factors,
/// mapped affinely onto `[v_min, v_max]`, rounded, and observed on
/// `n_observed` uniformly sampled cells.
///
/// A constant product (zero range) maps every cell to the rounded scale
/// midpoint.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<SyntheticDataset> {
    let (n, m, r) = (spec.n_users, spec.n_items, spec.true_rank);
    if n == 0 || m == 0 || r == 0 {
        return Err(Error::InvalidConfig(
            "synthetic dimensions and rank must be positive".into(),
        ));
    }
    let cells = n
        .checked_mul(m)
        .ok_or_else(|| Error::InvalidConfig("synthetic matrix too large".into()))?;
    if spec.n_observed > cells {
        return Err(Error::InvalidConfig(format!(
            "{} observed cells requested from a {n}x{m} matrix",
            spec.n_observed
        )));
    }

    let mut rng = rng_for(spec.seed, "synthetic/w");
    let w: Vec<f64> = (0..n * r).map(|_| rng.gen()).collect();
    let mut rng = rng_for(spec.seed, "synthetic/h");
    let h: Vec<f64> = (0..m * r).map(|_| rng.gen()).collect();

    // Plain scalar loop: the summation order is fixed, so the planted matrix
    // does not depend on which SIMD kernel a BLAS would pick.
    let mut product = vec![0.0f64; cells];
    for u in 0..n {
        let wu = &w[u * r..(u + 1) * r];
        for i in 0..m {
            let hi = &h[i * r..(i + 1) * r];
            let mut s = 0.0;
            for f in 0..r {
                s += wu[f] * hi[f];
            }
            product[u * m + i] = s;
        }
    }
    let lo = product.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = product.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let (v_min, v_max) = (f64::from(spec.scale.v_min()), f64::from(spec.scale.v_max()));
    let to_rating = |x: f64| -> i32 {
        if hi > lo {
            (v_min + (x - lo) / (hi - lo) * (v_max - v_min)).round() as i32
        } else {
            ((v_min + v_max) / 2.0).round() as i32
        }
    };
    let ground_truth = Array2::from_shape_vec((n, m), product.iter().map(|&x| to_rating(x)).collect())
        .expect("shape matches");

    let mut rng = rng_for(spec.seed, "synthetic/omega");
    let mut picked = index::sample(&mut rng, cells, spec.n_observed).into_vec();
    picked.sort_unstable();
    let ratings = ObservedRatings::new(
        n,
        m,
        spec.scale,
        picked
            .into_iter()
            .map(|p| (p / m, p % m, i64::from(ground_truth[[p / m, p % m]]))),
    )?;
    Ok(SyntheticDataset {
        ratings,
        ground_truth,
    })
}

/// Disjoint train/test partition of the observed cells.
#[derive(Debug, Clone)]
pub struct Split {
    pub train: ObservedRatings,
    pub test: ObservedRatings,
    pub fraction: f64,
    pub seed: u64,
}

/// Uniformly samples `round(fraction * |Ω|)` observed cells without
/// replacement for training; the rest form the test set.
pub fn split_train_test(a: &ObservedRatings, fraction: f64, seed: u64) -> Result<Split> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::InvalidConfig(format!(
            "split fraction {fraction} not in (0, 1)"
        )));
    }
    let total = a.len();
    let n_train = (fraction * total as f64).round() as usize;
    if n_train == 0 || n_train >= total {
        return Err(Error::InvalidConfig(format!(
            "split fraction {fraction} of {total} ratings leaves one side empty"
        )));
    }
    let mut rng = rng_for(seed, "split");
    let mut in_train = vec![false; total];
    for p in index::sample(&mut rng, total, n_train) {
        in_train[p] = true;
    }
    let entries: Vec<_> = a.iter().collect();
    let side = |want: bool| {
        entries
            .iter()
            .zip(&in_train)
            .filter(move |(_, &t)| t == want)
            .map(|(&(u, i, r), _)| (u, i, i64::from(r)))
    };
    Ok(Split {
        train: a.with_entries(side(true))?,
        test: a.with_entries(side(false))?,
        fraction,
        seed,
    })
}

/// Writes `user,item,rating` lines with contiguous indices.
pub fn write_generic_csv(ratings: &ObservedRatings, path: &Path) -> Result<()> {
    write_lines(path, |out| {
        for (u, i, r) in ratings.iter() {
            writeln!(out, "{u},{i},{r}")?;
        }
        Ok(())
    })
}

/// Writes every cell of `truth` as `user,item,rating`.
pub fn write_ground_truth(truth: &Array2<i32>, path: &Path) -> Result<()> {
    write_lines(path, |out| {
        for ((u, i), r) in truth.indexed_iter() {
            writeln!(out, "{u},{i},{r}")?;
        }
        Ok(())
    })
}

fn write_lines(
    path: &Path,
    body: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>,
) -> Result<()> {
    let io_err = |source| Error::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut out = BufWriter::new(File::create(path).map_err(io_err)?);
    body(&mut out).map_err(io_err)?;
    out.flush().map_err(io_err)
}
