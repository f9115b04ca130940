#![allow(dead_code)]

use esn_lrofr::selection::{OrthogonalState, RegressionProblem};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    // Box-Muller; keeps the test oracles free of extra distribution crates.
    let u1: f64 = rng.gen_range(f64::EPSILON..1.0);
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

pub fn random_matrix(rng: &mut ChaCha8Rng, n: usize, m: usize) -> DMatrix<f64> {
    DMatrix::from_fn(n, m, |_, _| gaussian(rng))
}

/// Random problem: `y = X w + noise` with a few active columns.
pub fn random_problem(seed: u64, n: usize, m: usize, noise: f64) -> RegressionProblem<f64> {
    let mut r = rng(seed);
    let x = random_matrix(&mut r, n, m);
    let w = DVector::from_fn(m, |_, _| if r.gen_bool(0.5) { gaussian(&mut r) } else { 0.0 });
    let y = &x * &w + DVector::from_fn(n, |_, _| noise * gaussian(&mut r));
    RegressionProblem::new(x, y).unwrap()
}

/// Brute force: index maximizing single-regressor explained variance.
pub fn brute_force_first(problem: &RegressionProblem<f64>) -> usize {
    let y = problem.response();
    let mut best = (0, f64::NEG_INFINITY);
    for j in 0..problem.n_candidates() {
        let x = problem.design().column(j);
        let explained = x.dot(y).powi(2) / x.norm_squared();
        if explained > best.1 {
            best = (j, explained);
        }
    }
    best.0
}

/// Direct least squares through a column-pivot-free QR of the full design.
pub fn direct_least_squares(x: &DMatrix<f64>, y: &DVector<f64>) -> DVector<f64> {
    let qr = x.clone().qr();
    let qty = qr.q().transpose() * y;
    qr.r().solve_upper_triangular(&qty).unwrap()
}

/// Generalized ridge `(XᵀX + RᵀΛR)⁻¹Xᵀy` for the selected columns, with the
/// unit-triangular `R` rebuilt from a Cholesky factor of `XᵀX`.
pub fn generalized_ridge(x_sel: &DMatrix<f64>, y: &DVector<f64>, lambdas: &[f64]) -> DVector<f64> {
    let gram = x_sel.transpose() * x_sel;
    let l = gram.clone().cholesky().unwrap().l();
    let k = lambdas.len();
    let mut r = l.transpose();
    for i in 0..k {
        let d = r[(i, i)];
        for j in 0..k {
            r[(i, j)] /= d;
        }
    }
    let penalty = r.transpose() * DMatrix::from_diagonal(&DVector::from_column_slice(lambdas)) * &r;
    (gram + penalty).lu().solve(&(x_sel.transpose() * y)).unwrap()
}

pub fn select_columns(x: &DMatrix<f64>, idx: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(x.nrows(), idx.len(), |i, j| x[(i, idx[j])])
}

/// Profile log-evidence of the orthogonal model `y = Qg + e` with prior
/// precisions `λ/σ²`, noise variance maximized out. `q` are the orthogonal
/// columns computed independently by classical Gram-Schmidt.
pub fn profile_log_evidence(q: &[DVector<f64>], y: &DVector<f64>, lambdas: &[f64]) -> f64 {
    let n = y.len() as f64;
    let mut quad = y.norm_squared();
    let mut logdet = 0.0;
    for (qi, &l) in q.iter().zip(lambdas) {
        let qq = qi.norm_squared();
        quad -= qi.dot(y).powi(2) / (qq + l);
        logdet += (1.0 + qq / l).ln();
    }
    -0.5 * n * quad.ln() - 0.5 * logdet
}

pub fn gram_schmidt(x_sel: &DMatrix<f64>) -> Vec<DVector<f64>> {
    let mut q: Vec<DVector<f64>> = Vec::new();
    for j in 0..x_sel.ncols() {
        let mut v = x_sel.column(j).into_owned();
        for qi in &q {
            let c = qi.dot(&x_sel.column(j)) / qi.norm_squared();
            v -= qi * c;
        }
        q.push(v);
    }
    q
}

/// Combined ratio recomputed from scratch for every unselected candidate.
pub fn recomputed_crerr(
    problem: &RegressionProblem<f64>,
    state: &OrthogonalState<f64>,
    candidates: &[usize],
    lambdas: &[f64],
    beta: f64,
) -> Vec<(usize, f64)> {
    let q = gram_schmidt(&select_columns(problem.design(), state.selected()));
    let y = problem.response();
    let yty = y.norm_squared();
    candidates
        .iter()
        .filter(|c| !state.selected().contains(c))
        .map(|&c| {
            let mut w = problem.design().column(c).into_owned();
            for qi in &q {
                let coef = qi.dot(&w) / qi.norm_squared();
                w -= qi * coef;
            }
            let ww = w.norm_squared();
            let g = w.dot(y) / (ww + lambdas[c]);
            (c, (g * g * (ww + lambdas[c]) + beta * ww.ln()) / yty)
        })
        .collect()
}

/// Transformed Mackey-Glass training sequence as an `N × 1` teacher.
pub fn mg_teacher(length: usize, seed: u64) -> DMatrix<f64> {
    use esn_lrofr::benchmarks::{generate_mg, transform_sequence, MgParams};
    let raw = generate_mg(&MgParams::with_length(length), seed).expect("mg");
    let y = transform_sequence(&raw);
    DMatrix::from_column_slice(y.len(), 1, &y)
}
