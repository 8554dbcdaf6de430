//! Nonnegative least-squares half-steps of the alternating iteration.
//!
//! Both subproblems are solved in the form
//!
//! ```text
//! min_{H >= 0} 1/2 ||C - W Hᵀ||_F²
//! ```
//!
//! (the W-side problem is the same thing on `Cᵀ` with the roles of the
//! factors swapped). Expanding the square, the problem separates into one
//! k-dimensional quadratic per row of `H`:
//!
//! ```text
//! min_{h >= 0} 1/2 hᵀ G h - pᵀ h,    G = WᵀW,  p = (CᵀW)_row
//! ```
//!
//! Each row is solved by greedy coordinate descent: the gradient `G h - p`
//! is maintained incrementally and the coordinate whose exact projected
//! one-dimensional minimisation decreases the objective the most is updated
//! next. A cyclic variant visits coordinates in index order instead.

use ndarray::{Array2, ArrayView1, ArrayView2, Axis, Zip};

use crate::error::{check_shape, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NnlsOptions {
    /// Coordinate-descent budget per row, in units of `k` single-coordinate
    /// updates (greedy) or full passes (cyclic).
    pub inner_sweeps: usize,
    /// A row stops once every projected partial derivative is within this
    /// bound.
    pub coord_tol: f64,
    /// Greedy coordinate selection; `false` selects the cyclic order.
    pub greedy: bool,
}

impl Default for NnlsOptions {
    fn default() -> Self {
        Self {
            inner_sweeps: 2,
            coord_tol: 1e-9,
            greedy: true,
        }
    }
}

impl NnlsOptions {
    pub fn validate(&self) -> Result<()> {
        if self.inner_sweeps == 0 {
            return Err(Error::InvalidConfig("inner_sweeps must be >= 1".into()));
        }
        if !(self.coord_tol >= 0.0) {
            return Err(Error::InvalidConfig("coord_tol must be >= 0".into()));
        }
        Ok(())
    }

    /// Effectively exact subproblem solves.
    pub fn exact() -> Self {
        Self {
            inner_sweeps: 100_000,
            coord_tol: 1e-12,
            greedy: true,
        }
    }
}

/// Gram matrix and cross products of one half-step.
pub(crate) struct HalfStep {
    /// `WᵀW`, k x k
    pub gram: Array2<f64>,
    /// `CᵀW`, rows x k
    pub cross: Array2<f64>,
}

impl HalfStep {
    pub fn new(c: ArrayView2<'_, f64>, w: ArrayView2<'_, f64>) -> Self {
        Self {
            gram: w.t().dot(&w),
            cross: c.t().dot(&w),
        }
    }

    /// `1/2 ||C - W Hᵀ||² - 1/2 ||C||²`, evaluated from the cached products.
    pub fn reduced_objective(&self, h: ArrayView2<'_, f64>) -> f64 {
        let hg = h.dot(&self.gram);
        let quad: f64 = Zip::from(&hg).and(&h).fold(0.0, |acc, &a, &b| acc + a * b);
        let lin: f64 = Zip::from(&self.cross)
            .and(&h)
            .fold(0.0, |acc, &a, &b| acc + a * b);
        0.5 * quad - lin
    }

    pub fn solve(&self, h: &mut Array2<f64>, opts: &NnlsOptions) {
        let k = self.gram.nrows();
        let gram = self.gram.as_standard_layout();
        let gram = gram.as_slice().expect("standard layout");
        let diag: Vec<f64> = (0..k).map(|f| gram[f * k + f]).collect();
        Zip::from(h.rows_mut())
            .and(self.cross.rows())
            .par_for_each(|mut row, p| {
                let mut x: Vec<f64> = row.to_vec();
                let p: Vec<f64> = p.to_vec();
                solve_row(gram, &diag, &p, &mut x, opts);
                row.assign(&ArrayView1::from(&x));
            });
    }
}

/// Minimizes `1/2 hᵀGh - pᵀh` over `h >= 0` for one row. `gram` is `G` in
/// row-major order.
fn solve_row(gram: &[f64], diag: &[f64], p: &[f64], h: &mut [f64], opts: &NnlsOptions) {
    // Wider vectors only; no fused multiply-add, so results are identical.
    #[cfg(target_arch = "x86_64")]
    if std::arch::is_x86_feature_detected!("avx2") {
        // SAFETY: avx2 support was checked just above.
        return unsafe { solve_row_avx2(gram, diag, p, h, opts) };
    }
    solve_row_generic(gram, diag, p, h, opts)
}

#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx2")]
unsafe fn solve_row_avx2(gram: &[f64], diag: &[f64], p: &[f64], h: &mut [f64], opts: &NnlsOptions) {
    solve_row_generic(gram, diag, p, h, opts)
}

#[inline(always)]
fn solve_row_generic(gram: &[f64], diag: &[f64], p: &[f64], h: &mut [f64], opts: &NnlsOptions) {
    let k = h.len();
    let mut grad: Vec<f64> = (0..k)
        .map(|f| {
            let row = &gram[f * k..(f + 1) * k];
            row.iter().zip(h.iter()).map(|(a, b)| a * b).sum::<f64>() - p[f]
        })
        .collect();
    // a zero inverse pins dead coordinates: their step is always 0
    let inv: Vec<f64> = diag
        .iter()
        .map(|&a| if a > 0.0 { 1.0 / a } else { 0.0 })
        .collect();
    let step = |f: usize, x: f64, g: f64| (x - g * inv[f]).max(0.0) - x;

    let apply = |f: usize, s: f64, h: &mut [f64], grad: &mut [f64]| {
        h[f] = (h[f] + s).max(0.0);
        // G is symmetric: row f doubles as column f
        for (g, &q) in grad.iter_mut().zip(&gram[f * k..(f + 1) * k]) {
            *g += s * q;
        }
    };

    if opts.greedy {
        let (mut gain, mut pg) = (vec![0.0f64; k], vec![0.0f64; k]);
        score_all(h, &grad, &inv, diag, &mut gain, &mut pg);
        for _ in 0..opts.inner_sweeps * k {
            if max_of(&pg) <= opts.coord_tol {
                break;
            }
            let best = max_of(&gain);
            if !(best > 0.0) {
                break;
            }
            let f = gain.iter().position(|&v| v == best).expect("max is present");
            let s = step(f, h[f], grad[f]);
            h[f] = (h[f] + s).max(0.0);
            // G is symmetric: row f doubles as column f
            for (g, &q) in grad.iter_mut().zip(&gram[f * k..(f + 1) * k]) {
                *g += s * q;
            }
            score_all(h, &grad, &inv, diag, &mut gain, &mut pg);
        }
    } else {
        for _ in 0..opts.inner_sweeps {
            let worst_pg = (0..k)
                .map(|f| projected_gradient(h[f], grad[f]))
                .fold(0.0, f64::max);
            if worst_pg <= opts.coord_tol {
                break;
            }
            for f in 0..k {
                let s = step(f, h[f], grad[f]);
                if s != 0.0 {
                    apply(f, s, h, &mut grad);
                }
            }
        }
    }
}

/// Objective decrease of the best move and the projected gradient, for every
/// coordinate of a row.
#[inline(always)]
fn score_all(h: &[f64], grad: &[f64], inv: &[f64], diag: &[f64], gain: &mut [f64], pg: &mut [f64]) {
    let k = h.len();
    let (grad, inv, diag) = (&grad[..k], &inv[..k], &diag[..k]);
    let (gain, pg) = (&mut gain[..k], &mut pg[..k]);
    for f in 0..k {
        let (x, g) = (h[f], grad[f]);
        let y = x - g * inv[f];
        let s = if y > 0.0 { y } else { 0.0 } - x;
        gain[f] = -(g * s + 0.5 * diag[f] * s * s);
        pg[f] = projected_gradient(x, g);
    }
}

/// Largest entry, or 0 for an empty or all-negative slice. Four running
/// maxima so the loop vectorizes.
#[inline(always)]
fn max_of(v: &[f64]) -> f64 {
    let mut m = [0.0f64; 4];
    let mut chunks = v.chunks_exact(4);
    for c in &mut chunks {
        for j in 0..4 {
            m[j] = if c[j] > m[j] { c[j] } else { m[j] };
        }
    }
    let mut best = 0.0f64;
    for &x in m.iter().chain(chunks.remainder()) {
        best = if x > best { x } else { best };
    }
    best
}

#[inline(always)]
fn projected_gradient(x: f64, g: f64) -> f64 {
    let lower = if g < 0.0 { -g } else { 0.0 };
    if x > 0.0 {
        g.abs()
    } else {
        lower
    }
}

fn check_inputs(
    c: ArrayView2<'_, f64>,
    fixed: ArrayView2<'_, f64>,
    init: ArrayView2<'_, f64>,
) -> Result<()> {
    let (rows, cols) = c.dim();
    check_shape("fixed factor", (rows, init.ncols()), fixed.dim())?;
    check_shape("initial factor", (cols, fixed.ncols()), init.dim())?;
    if c.iter().chain(fixed.iter()).chain(init.iter()).any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("nnls input"));
    }
    if fixed.iter().chain(init.iter()).any(|&x| x < 0.0) {
        return Err(Error::InvalidConfig("nnls factors must be nonnegative".into()));
    }
    Ok(())
}

/// Approximately solves `argmin_{H >= 0} ||C - W Hᵀ||_F²` starting from
/// `h_init`. `c` is n x m, `w` is n x k, `h_init` is m x k.
///
/// The result never has a larger objective than `h_init`.
pub fn solve_for_h(
    c: ArrayView2<'_, f64>,
    w: ArrayView2<'_, f64>,
    h_init: ArrayView2<'_, f64>,
    opts: &NnlsOptions,
) -> Result<Array2<f64>> {
    opts.validate()?;
    check_inputs(c, w, h_init)?;
    let mut h = h_init.to_owned();
    HalfStep::new(c, w).solve(&mut h, opts);
    Ok(h)
}

/// Approximately solves `argmin_{W >= 0} ||C - W Hᵀ||_F²`, i.e. the H-side
/// problem on `Cᵀ`.
pub fn solve_for_w(
    c: ArrayView2<'_, f64>,
    h: ArrayView2<'_, f64>,
    w_init: ArrayView2<'_, f64>,
    opts: &NnlsOptions,
) -> Result<Array2<f64>> {
    solve_for_h(c.t(), h, w_init, opts)
}

/// `1/2 ||C - W Hᵀ||_F²`, computed directly.
pub fn subproblem_objective(
    c: ArrayView2<'_, f64>,
    w: ArrayView2<'_, f64>,
    h: ArrayView2<'_, f64>,
) -> Result<f64> {
    check_shape("objective W", (c.nrows(), h.ncols()), w.dim())?;
    check_shape("objective H", (c.ncols(), w.ncols()), h.dim())?;
    let b = w.dot(&h.t());
    Ok(0.5
        * Zip::from(&c)
            .and(&b)
            .fold(0.0, |acc, &x, &y| acc + (x - y) * (x - y)))
}

/// KKT violation of `H` for `min_{H >= 0} 1/2 ||C - W Hᵀ||²`:
/// `max |min(h, g)|` over entries, with `g = H WᵀW - CᵀW` the gradient.
/// Zero exactly at a KKT point.
pub fn kkt_residual(
    c: ArrayView2<'_, f64>,
    w: ArrayView2<'_, f64>,
    h: ArrayView2<'_, f64>,
) -> Result<f64> {
    check_shape("kkt W", (c.nrows(), h.ncols()), w.dim())?;
    check_shape("kkt H", (c.ncols(), w.ncols()), h.dim())?;
    let step = HalfStep::new(c, w);
    let grad = h.dot(&step.gram) - &step.cross;
    Ok(Zip::from(&h)
        .and(&grad)
        .fold(0.0f64, |acc, &x, &g| acc.max(x.min(g).abs())))
}

/// Row `i` of `H` depends only on column `i` of `C`.
pub fn solve_row_for_h(
    c_column: ArrayView1<'_, f64>,
    w: ArrayView2<'_, f64>,
    h_row: ArrayView1<'_, f64>,
    opts: &NnlsOptions,
) -> Result<Array2<f64>> {
    let c = c_column.insert_axis(Axis(1));
    solve_for_h(c, w, h_row.insert_axis(Axis(0)), opts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{array, s};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(rng: &mut ChaCha8Rng, r: usize, c: usize) -> Array2<f64> {
        Array2::from_shape_fn((r, c), |_| rng.gen::<f64>())
    }

    #[test]
    fn planted_factors_are_recovered() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let w = random(&mut rng, 12, 3);
        let h_star = random(&mut rng, 9, 3);
        let c = w.dot(&h_star.t());
        let h = solve_for_h(c.view(), w.view(), Array2::zeros((9, 3)).view(), &NnlsOptions::exact())
            .unwrap();
        let resid = (&c - &w.dot(&h.t())).mapv(|x| x * x).sum().sqrt();
        let norm = c.mapv(|x| x * x).sum().sqrt();
        assert!(resid <= 1e-6 * norm, "{resid} vs {norm}");
    }

    #[test]
    fn separable_columns_match_closed_form() {
        // disjoint supports => WᵀW diagonal, coordinates decouple
        let w = array![[1.0, 0.0], [2.0, 0.0], [0.0, 3.0], [0.0, 1.0]];
        let c = array![
            [1.0, -2.0, 0.5],
            [3.0, 1.0, 0.0],
            [2.0, -1.0, 4.0],
            [0.0, 5.0, 1.0]
        ];
        let h = solve_for_h(c.view(), w.view(), Array2::zeros((3, 2)).view(), &NnlsOptions::exact())
            .unwrap();
        let ctw = c.t().dot(&w);
        for i in 0..3 {
            for f in 0..2 {
                let norm_sq: f64 = w.column(f).mapv(|x| x * x).sum();
                let expected = (ctw[[i, f]] / norm_sq).max(0.0);
                assert!((h[[i, f]] - expected).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn zero_data_gives_zero_solution() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let w = random(&mut rng, 5, 2);
        let h_init = random(&mut rng, 4, 2);
        let h = solve_for_h(Array2::zeros((5, 4)).view(), w.view(), h_init.view(), &NnlsOptions::exact())
            .unwrap();
        assert!(h.iter().all(|&x| x.abs() < 1e-12));
    }

    #[test]
    fn w_side_is_transposed_h_side() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..10 {
            let c = random(&mut rng, 7, 6);
            let h = random(&mut rng, 6, 3);
            let w0 = random(&mut rng, 7, 3);
            let opts = NnlsOptions::default();
            let ct = c.t().to_owned();
            let a = solve_for_w(c.view(), h.view(), w0.view(), &opts).unwrap();
            let b = solve_for_h(ct.view(), h.view(), w0.view(), &opts).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn planted_w_is_recovered() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let w_star = random(&mut rng, 8, 2);
        let h = random(&mut rng, 10, 2);
        let c = w_star.dot(&h.t());
        let w = solve_for_w(c.view(), h.view(), Array2::zeros((8, 2)).view(), &NnlsOptions::exact())
            .unwrap();
        let resid = (&c - &w.dot(&h.t())).mapv(|x| x * x).sum().sqrt();
        assert!(resid < 1e-8, "{resid}");
    }

    #[test]
    fn zero_h_leaves_w_untouched() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let c = random(&mut rng, 4, 3);
        let w0 = random(&mut rng, 4, 2);
        let w = solve_for_w(c.view(), Array2::zeros((3, 2)).view(), w0.view(), &NnlsOptions::default())
            .unwrap();
        assert_eq!(w, w0);
    }

    #[test]
    fn kkt_residual_examples() {
        // 1x1 problem: min 1/2 (c - w h)^2 -> h* = c/w
        let c = array![[3.0]];
        let w = array![[2.0]];
        assert_eq!(kkt_residual(c.view(), w.view(), array![[1.5]].view()).unwrap(), 0.0);
        // h = 0 with negative gradient
        assert!(kkt_residual(c.view(), w.view(), array![[0.0]].view()).unwrap() > 0.0);
        // c < 0 => optimum pinned at 0 with positive gradient
        let neg = array![[-3.0]];
        assert_eq!(kkt_residual(neg.view(), w.view(), array![[0.0]].view()).unwrap(), 0.0);
    }

    #[test]
    fn kkt_residual_small_at_grid_refined_optimum() {
        // 2x2 data, k = 1: H is 2x1. Exhaustive grid refinement independent
        // of the coordinate-descent path.
        let c = array![[1.0, 2.0], [3.0, -1.0]];
        let w = array![[0.5], [1.5]];
        // objective change relative to the current centre, in factored form so
        // it keeps full relative precision next to the optimum
        let delta = |h: [f64; 2], centre: [f64; 2]| {
            let mut d = 0.0;
            for r in 0..2 {
                for j in 0..2 {
                    let (bh, bc) = (w[[r, 0]] * h[j], w[[r, 0]] * centre[j]);
                    d += 0.5 * (bc - bh) * (2.0 * c[[r, j]] - bh - bc);
                }
            }
            d
        };
        let mut centre = [0.0, 0.0];
        let mut width = 4.0;
        for _ in 0..80 {
            let mut best = 0.0;
            let mut next = centre;
            for a in 0..=40 {
                for b in 0..=40 {
                    let h = [
                        (centre[0] + width * (a as f64 / 20.0 - 1.0)).max(0.0),
                        (centre[1] + width * (b as f64 / 20.0 - 1.0)).max(0.0),
                    ];
                    let v = delta(h, centre);
                    if v < best {
                        best = v;
                        next = h;
                    }
                }
            }
            centre = next;
            width *= 0.5;
        }
        let [best0, best1] = centre;
        let h = array![[best0], [best1]];
        assert!(kkt_residual(c.view(), w.view(), h.view()).unwrap() <= 1e-8);
        let solved = solve_for_h(c.view(), w.view(), Array2::zeros((2, 1)).view(), &NnlsOptions::exact())
            .unwrap();
        assert!((solved[[0, 0]] - best0).abs() < 1e-8 && (solved[[1, 0]] - best1).abs() < 1e-8);
    }

    #[test]
    fn descent_nonnegativity_and_kkt_on_random_problems() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for trial in 0..40 {
            let (n, m, k) = (rng.gen_range(2..12), rng.gen_range(2..12), rng.gen_range(1..5));
            // mixed-sign data so constraints bind
            let c = random(&mut rng, n, m) * 4.0 - 1.0;
            let w = random(&mut rng, n, k);
            let h0 = random(&mut rng, m, k);
            let before = subproblem_objective(c.view(), w.view(), h0.view()).unwrap();
            for greedy in [true, false] {
                let opts = NnlsOptions {
                    greedy,
                    ..NnlsOptions::default()
                };
                let h = solve_for_h(c.view(), w.view(), h0.view(), &opts).unwrap();
                assert!(h.iter().all(|&x| x >= 0.0));
                let after = subproblem_objective(c.view(), w.view(), h.view()).unwrap();
                assert!(after <= before + 1e-12 * before.abs().max(1.0), "trial {trial}");

                let exact = NnlsOptions { greedy, ..NnlsOptions::exact() };
                let h = solve_for_h(c.view(), w.view(), h0.view(), &exact).unwrap();
                let kkt = kkt_residual(c.view(), w.view(), h.view()).unwrap();
                assert!(kkt <= 1e-9, "trial {trial} greedy {greedy}: {kkt}");
            }
        }
    }

    #[test]
    fn rows_decouple() {
        let mut rng = ChaCha8Rng::seed_from_u64(33);
        let c = random(&mut rng, 9, 6) * 3.0 - 0.5;
        let w = random(&mut rng, 9, 3);
        let h0 = random(&mut rng, 6, 3);
        let opts = NnlsOptions::default();
        let full = solve_for_h(c.view(), w.view(), h0.view(), &opts).unwrap();
        for i in 0..6 {
            let row = solve_row_for_h(c.column(i), w.view(), h0.row(i), &opts).unwrap();
            for f in 0..3 {
                assert!((row[[0, f]] - full[[i, f]]).abs() < 1e-12);
            }
        }
        let part = solve_for_h(c.slice(s![.., 2..5]), w.view(), h0.slice(s![2..5, ..]), &opts).unwrap();
        for (a, b) in part.iter().zip(full.slice(s![2..5, ..]).iter()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn dead_column_is_left_alone() {
        let c = array![[1.0, 2.0], [3.0, 4.0]];
        let w = array![[1.0, 0.0], [1.0, 0.0]];
        let h0 = array![[0.0, 0.7], [0.0, 0.2]];
        let h = solve_for_h(c.view(), w.view(), h0.view(), &NnlsOptions::exact()).unwrap();
        assert_eq!(h.column(1), h0.column(1));
        assert!((h[[0, 0]] - 2.0).abs() < 1e-12 && (h[[1, 0]] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_input() {
        let opts = NnlsOptions::default();
        let c = Array2::<f64>::zeros((3, 2));
        assert!(matches!(
            solve_for_h(c.view(), Array2::zeros((2, 1)).view(), Array2::zeros((2, 1)).view(), &opts),
            Err(Error::DimensionMismatch { .. })
        ));
        let mut bad = c.clone();
        bad[[0, 0]] = f64::NAN;
        assert!(matches!(
            solve_for_h(bad.view(), Array2::zeros((3, 1)).view(), Array2::zeros((2, 1)).view(), &opts),
            Err(Error::NonFinite(_))
        ));
        let zero_sweeps = NnlsOptions { inner_sweeps: 0, ..opts };
        assert!(solve_for_h(c.view(), Array2::zeros((3, 1)).view(), Array2::zeros((2, 1)).view(), &zero_sweeps)
            .is_err());
    }
}
