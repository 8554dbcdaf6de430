//! Rating matrices, factor pairs, and the masking/clipping/rounding operators
//! the completion iteration is built from.
//!
//! Observed ratings are stored twice: a compressed row layout (user-major) and
//! a compressed column view (item-major), so both alternating half-steps and
//! the per-item neighbourhood code can walk ratings without a transpose.

use ndarray::{Array2, ArrayView2, Zip};

use crate::error::{check_shape, Error, Result};

/// Integer vote range `v_min..=v_max`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RatingScale {
    v_min: u8,
    v_max: u8,
}

impl RatingScale {
    /// The 1..=5 star scale of MovieLens 100K and 1M.
    pub const FIVE_STAR: RatingScale = RatingScale { v_min: 1, v_max: 5 };
    /// Half-star ratings doubled onto 1..=10.
    pub const TEN_HALF_STAR: RatingScale = RatingScale { v_min: 1, v_max: 10 };

    pub fn new(v_min: u8, v_max: u8) -> Result<Self> {
        if v_min >= 1 && v_min < v_max {
            Ok(Self { v_min, v_max })
        } else {
            Err(Error::InvalidScale { v_min, v_max })
        }
    }

    pub fn v_min(&self) -> u8 {
        self.v_min
    }

    pub fn v_max(&self) -> u8 {
        self.v_max
    }

    pub fn contains(&self, rating: i64) -> bool {
        rating >= i64::from(self.v_min) && rating <= i64::from(self.v_max)
    }

    /// Rating at or above which an item counts as recommendable: 4 on the
    /// five-star scale, scaled proportionally for other scales.
    pub fn default_threshold(&self) -> i32 {
        (f64::from(self.v_max) * 0.8).round() as i32
    }
}

impl Default for RatingScale {
    fn default() -> Self {
        Self::FIVE_STAR
    }
}

/// A set of matrix cells with a declared shape. Cells are kept sorted
/// row-major and unique.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IndexSet {
    n_rows: usize,
    n_cols: usize,
    cells: Vec<(u32, u32)>,
}

impl IndexSet {
    pub fn new(
        n_rows: usize,
        n_cols: usize,
        cells: impl IntoIterator<Item = (usize, usize)>,
    ) -> Result<Self> {
        let mut out = Vec::new();
        for (r, c) in cells {
            if r >= n_rows || c >= n_cols {
                return Err(Error::IndexOutOfRange {
                    user: r,
                    item: c,
                    n_users: n_rows,
                    n_items: n_cols,
                });
            }
            out.push((to_u32(r)?, to_u32(c)?));
        }
        out.sort_unstable();
        out.dedup();
        Ok(Self {
            n_rows,
            n_cols,
            cells: out,
        })
    }

    /// Every cell of an `n_rows x n_cols` matrix.
    pub fn full(n_rows: usize, n_cols: usize) -> Result<Self> {
        Self::new(
            n_rows,
            n_cols,
            (0..n_rows).flat_map(|r| (0..n_cols).map(move |c| (r, c))),
        )
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.n_rows, self.n_cols)
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn contains(&self, row: usize, col: usize) -> bool {
        match (u32::try_from(row), u32::try_from(col)) {
            (Ok(r), Ok(c)) => self.cells.binary_search(&(r, c)).is_ok(),
            _ => false,
        }
    }

    pub fn iter(&self) -> impl ExactSizeIterator<Item = (usize, usize)> + '_ {
        self.cells.iter().map(|&(r, c)| (r as usize, c as usize))
    }

    pub fn is_full(&self) -> bool {
        self.cells.len() == self.n_rows * self.n_cols
    }
}

/// Sparse integer rating matrix restricted to its observed cells.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ObservedRatings {
    n_users: usize,
    n_items: usize,
    scale: RatingScale,
    // user-major
    row_ptr: Vec<usize>,
    row_items: Vec<u32>,
    row_values: Vec<u8>,
    // item-major view of the same entries
    col_ptr: Vec<usize>,
    col_users: Vec<u32>,
    col_values: Vec<u8>,
}

impl ObservedRatings {
    /// Builds the matrix from `(user, item, rating)` triples in any order.
    pub fn new(
        n_users: usize,
        n_items: usize,
        scale: RatingScale,
        entries: impl IntoIterator<Item = (usize, usize, i64)>,
    ) -> Result<Self> {
        to_u32(n_users)?;
        to_u32(n_items)?;
        let mut triples: Vec<(u32, u32, u8)> = Vec::new();
        for (user, item, rating) in entries {
            if user >= n_users || item >= n_items {
                return Err(Error::IndexOutOfRange {
                    user,
                    item,
                    n_users,
                    n_items,
                });
            }
            if !scale.contains(rating) {
                return Err(Error::RatingOutOfScale {
                    user,
                    item,
                    rating,
                    v_min: scale.v_min,
                    v_max: scale.v_max,
                });
            }
            triples.push((user as u32, item as u32, rating as u8));
        }
        triples.sort_unstable_by_key(|&(u, i, _)| (u, i));
        if let Some(w) = triples
            .windows(2)
            .find(|w| (w[0].0, w[0].1) == (w[1].0, w[1].1))
        {
            return Err(Error::DuplicateEntry {
                user: w[0].0 as usize,
                item: w[0].1 as usize,
            });
        }

        let mut row_ptr = vec![0usize; n_users + 1];
        let mut col_ptr = vec![0usize; n_items + 1];
        for &(u, i, _) in &triples {
            row_ptr[u as usize + 1] += 1;
            col_ptr[i as usize + 1] += 1;
        }
        for u in 0..n_users {
            row_ptr[u + 1] += row_ptr[u];
        }
        for i in 0..n_items {
            col_ptr[i + 1] += col_ptr[i];
        }
        let row_items = triples.iter().map(|t| t.1).collect();
        let row_values = triples.iter().map(|t| t.2).collect();

        // Entries are user-sorted, so filling columns in order keeps each
        // column's users sorted too.
        let mut next = col_ptr.clone();
        let mut col_users = vec![0u32; triples.len()];
        let mut col_values = vec![0u8; triples.len()];
        for &(u, i, r) in &triples {
            let slot = &mut next[i as usize];
            col_users[*slot] = u;
            col_values[*slot] = r;
            *slot += 1;
        }

        Ok(Self {
            n_users,
            n_items,
            scale,
            row_ptr,
            row_items,
            row_values,
            col_ptr,
            col_users,
            col_values,
        })
    }

    /// Same shape and scale, different entries.
    pub fn with_entries(
        &self,
        entries: impl IntoIterator<Item = (usize, usize, i64)>,
    ) -> Result<Self> {
        Self::new(self.n_users, self.n_items, self.scale, entries)
    }

    pub fn n_users(&self) -> usize {
        self.n_users
    }

    pub fn n_items(&self) -> usize {
        self.n_items
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.n_users, self.n_items)
    }

    pub fn scale(&self) -> RatingScale {
        self.scale
    }

    /// Number of observed cells, `|Ω|`.
    pub fn len(&self) -> usize {
        self.row_items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.row_items.is_empty()
    }

    /// Entries in user-major order.
    pub fn iter(&self) -> impl ExactSizeIterator<Item = (usize, usize, u8)> + '_ {
        let mut user = 0usize;
        let row_ptr = &self.row_ptr;
        self.row_items
            .iter()
            .zip(&self.row_values)
            .enumerate()
            .map(move |(pos, (&item, &rating))| {
                while row_ptr[user + 1] <= pos {
                    user += 1;
                }
                (user, item as usize, rating)
            })
    }

    /// Items rated by `user` (ascending) and the matching ratings.
    pub fn user_ratings(&self, user: usize) -> (&[u32], &[u8]) {
        let span = self.row_ptr[user]..self.row_ptr[user + 1];
        (&self.row_items[span.clone()], &self.row_values[span])
    }

    /// Users who rated `item` (ascending) and the matching ratings.
    pub fn item_ratings(&self, item: usize) -> (&[u32], &[u8]) {
        let span = self.col_ptr[item]..self.col_ptr[item + 1];
        (&self.col_users[span.clone()], &self.col_values[span])
    }

    pub fn get(&self, user: usize, item: usize) -> Option<u8> {
        if user >= self.n_users {
            return None;
        }
        let (items, values) = self.user_ratings(user);
        let item = u32::try_from(item).ok()?;
        items.binary_search(&item).ok().map(|p| values[p])
    }

    pub fn index_set(&self) -> IndexSet {
        IndexSet {
            n_rows: self.n_users,
            n_cols: self.n_items,
            cells: self.iter().map(|(u, i, _)| (u as u32, i as u32)).collect(),
        }
    }

    /// `P_Ω(A)` as a dense real matrix: ratings on observed cells, zero elsewhere.
    pub fn to_dense(&self) -> Array2<f64> {
        let mut out = Array2::zeros((self.n_users, self.n_items));
        for (u, i, r) in self.iter() {
            out[[u, i]] = f64::from(r);
        }
        out
    }

    pub fn mean_rating(&self) -> Option<f64> {
        if self.is_empty() {
            None
        } else {
            let sum: u64 = self.row_values.iter().map(|&r| u64::from(r)).sum();
            Some(sum as f64 / self.len() as f64)
        }
    }
}

/// Nonnegative rank-`k` factors: `w` is users x k, `h` is items x k.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorPair {
    w: Array2<f64>,
    h: Array2<f64>,
}

impl FactorPair {
    pub fn new(w: Array2<f64>, h: Array2<f64>) -> Result<Self> {
        if w.ncols() == 0 {
            return Err(Error::InvalidConfig("factor rank must be at least 1".into()));
        }
        check_shape("factor pair", (h.nrows(), w.ncols()), h.dim())?;
        if w.iter().chain(h.iter()).any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("factor pair"));
        }
        if w.iter().chain(h.iter()).any(|&x| x < 0.0) {
            return Err(Error::InvalidConfig("factor entries must be nonnegative".into()));
        }
        Ok(Self { w, h })
    }

    pub(crate) fn from_parts_unchecked(w: Array2<f64>, h: Array2<f64>) -> Self {
        debug_assert_eq!(w.ncols(), h.ncols());
        Self { w, h }
    }

    pub fn w(&self) -> &Array2<f64> {
        &self.w
    }

    pub fn h(&self) -> &Array2<f64> {
        &self.h
    }

    pub fn k(&self) -> usize {
        self.w.ncols()
    }

    pub fn n_users(&self) -> usize {
        self.w.nrows()
    }

    pub fn n_items(&self) -> usize {
        self.h.nrows()
    }

    pub fn into_parts(self) -> (Array2<f64>, Array2<f64>) {
        (self.w, self.h)
    }

    /// Single reconstructed entry `w_u . h_i`.
    pub fn entry(&self, user: usize, item: usize) -> f64 {
        self.w.row(user).dot(&self.h.row(item))
    }
}

/// Dense completed matrix: observed ratings on `Ω`, clipped reconstruction
/// elsewhere.
#[derive(Debug, Clone)]
pub struct CompletedMatrix<'a> {
    values: Array2<f64>,
    source: &'a ObservedRatings,
}

impl<'a> CompletedMatrix<'a> {
    /// Wraps `values`, checking that they agree with `source` on every
    /// observed cell and lie in `[0, v_max]` elsewhere.
    pub fn new(values: Array2<f64>, source: &'a ObservedRatings) -> Result<Self> {
        check_shape("completed matrix", source.shape(), values.dim())?;
        for (u, i, r) in source.iter() {
            if values[[u, i]] != f64::from(r) {
                return Err(Error::InvalidConfig(format!(
                    "completed value at ({u}, {i}) differs from the observed rating"
                )));
            }
        }
        let v = f64::from(source.scale().v_max());
        if values.iter().any(|&x| !(0.0..=v).contains(&x)) {
            return Err(Error::InvalidConfig(
                "completed values must lie in [0, v_max]".into(),
            ));
        }
        Ok(Self { values, source })
    }

    pub(crate) fn new_unchecked(values: Array2<f64>, source: &'a ObservedRatings) -> Self {
        Self { values, source }
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn source(&self) -> &'a ObservedRatings {
        self.source
    }
}

/// `P_Ω(M)`: keeps the entries of `m` on `omega`, zeroes the rest.
pub fn project_observed(m: ArrayView2<'_, f64>, omega: &IndexSet) -> Result<Array2<f64>> {
    check_shape("project_observed", omega.shape(), m.dim())?;
    let mut out = Array2::zeros(m.dim());
    for (r, c) in omega.iter() {
        out[[r, c]] = m[[r, c]];
    }
    Ok(out)
}

/// `P_Ω̄(M)`: keeps the entries of `m` off `omega`, zeroes the rest.
pub fn project_complement(m: ArrayView2<'_, f64>, omega: &IndexSet) -> Result<Array2<f64>> {
    check_shape("project_complement", omega.shape(), m.dim())?;
    let mut out = m.to_owned();
    for (r, c) in omega.iter() {
        out[[r, c]] = 0.0;
    }
    Ok(out)
}

/// `cut_v(M)`: entrywise `min(v, m_ij)`. Values below `v` pass through.
pub fn cut_upper(m: ArrayView2<'_, f64>, v: u8) -> Array2<f64> {
    let v = f64::from(v);
    m.mapv(|x| x.min(v))
}

/// Nearest integer entrywise; exact halves round away from zero.
pub fn round_nearest(m: ArrayView2<'_, f64>) -> Result<Array2<i32>> {
    let mut out = Array2::zeros(m.dim());
    let mut ok = true;
    Zip::from(&mut out).and(&m).for_each(|o, &x| {
        if x.is_finite() && x.abs() < f64::from(i32::MAX) {
            *o = x.round() as i32;
        } else {
            ok = false;
        }
    });
    if ok {
        Ok(out)
    } else {
        Err(Error::NonFinite("round_nearest"))
    }
}

/// `B = W Hᵀ`.
pub fn reconstruct(factors: &FactorPair) -> Array2<f64> {
    factors.w.dot(&factors.h.t())
}

/// Integer rating reconstructed for one cell: `min(v, [w_u . h_i])`.
pub fn clipped_rating(value: f64, v_max: u8) -> i32 {
    // max(0) only guards garbage input; factors are nonnegative
    (value.round().max(0.0) as i32).min(i32::from(v_max))
}

fn to_u32(x: usize) -> Result<u32> {
    u32::try_from(x).map_err(|_| Error::InvalidConfig(format!("index {x} exceeds u32 range")))
}
