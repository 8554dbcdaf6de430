use cutnmf::nnls::{kkt_residual, solve_for_h, solve_for_w, subproblem_objective};
use cutnmf::NnlsOptions;
use ndarray::{Array2, ArrayView2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Projected gradient descent with step `1/L`, `L = ||WᵀW||_F`, until the
/// iterate moves by at most `tol`.
fn projected_gradient_oracle(c: ArrayView2<f64>, w: ArrayView2<f64>, tol: f64) -> Array2<f64> {
    let gram = w.t().dot(&w);
    let cross = c.t().dot(&w);
    let lipschitz = gram.iter().map(|x| x * x).sum::<f64>().sqrt();
    let mut h = Array2::<f64>::zeros((c.ncols(), w.ncols()));
    if lipschitz == 0.0 {
        return h;
    }
    for _ in 0..5_000_000 {
        let grad = h.dot(&gram) - &cross;
        let next = (&h - &(grad / lipschitz)).mapv(|x| x.max(0.0));
        let moved = (&next - &h).iter().fold(0.0f64, |m, x| m.max(x.abs()));
        h = next;
        if moved <= tol {
            break;
        }
    }
    h
}

fn random(rng: &mut ChaCha8Rng, r: usize, c: usize) -> Array2<f64> {
    Array2::from_shape_simple_fn((r, c), || rng.gen::<f64>())
}

#[test]
fn objective_matches_projected_gradient_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for greedy in [true, false] {
        for trial in 0..50 {
            let (n, m, k) = (rng.gen_range(1..=5), rng.gen_range(1..=5), rng.gen_range(1..=2));
            let c = random(&mut rng, n, m) * 6.0 - 1.0;
            let w = random(&mut rng, n, k);
            let h0 = random(&mut rng, m, k);
            let opts = NnlsOptions { greedy, ..NnlsOptions::exact() };
            let h = solve_for_h(c.view(), w.view(), h0.view(), &opts).unwrap();
            let oracle = projected_gradient_oracle(c.view(), w.view(), 1e-10);
            let got = subproblem_objective(c.view(), w.view(), h.view()).unwrap();
            let want = subproblem_objective(c.view(), w.view(), oracle.view()).unwrap();
            assert!((got - want).abs() <= 1e-6, "trial {trial}: {got} vs {want}");
            assert!(kkt_residual(c.view(), w.view(), h.view()).unwrap() <= 1e-6);
        }
    }
}

#[test]
fn w_side_matches_oracle_on_transpose() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for _ in 0..20 {
        let (n, m, k) = (rng.gen_range(1..=5), rng.gen_range(1..=5), rng.gen_range(1..=2));
        let c = random(&mut rng, n, m) * 4.0;
        let h = random(&mut rng, m, k);
        let w0 = random(&mut rng, n, k);
        let w = solve_for_w(c.view(), h.view(), w0.view(), &NnlsOptions::exact()).unwrap();
        let oracle = projected_gradient_oracle(c.t(), h.view(), 1e-10);
        let got = subproblem_objective(c.t(), h.view(), w.view()).unwrap();
        let want = subproblem_objective(c.t(), h.view(), oracle.view()).unwrap();
        assert!((got - want).abs() <= 1e-6);
    }
}

#[test]
fn default_budget_never_increases_objective() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..30 {
        let (n, m, k) = (rng.gen_range(5..40), rng.gen_range(5..40), rng.gen_range(1..8));
        let c = random(&mut rng, n, m) * 5.0;
        let w = random(&mut rng, n, k);
        let mut h = random(&mut rng, m, k);
        let mut last = subproblem_objective(c.view(), w.view(), h.view()).unwrap();
        for _ in 0..5 {
            h = solve_for_h(c.view(), w.view(), h.view(), &NnlsOptions::default()).unwrap();
            let obj = subproblem_objective(c.view(), w.view(), h.view()).unwrap();
            assert!(obj <= last * (1.0 + 1e-12));
            assert!(h.iter().all(|&x| x >= 0.0));
            last = obj;
        }
    }
}
