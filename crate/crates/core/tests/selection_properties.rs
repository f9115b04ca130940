mod common;

use common::*;
use esn_lrofr::selection::*;
use nalgebra::DVector;
use proptest::prelude::*;

fn residual_after(state: &OrthogonalState<f64>, y: &DVector<f64>, k: usize) -> DVector<f64> {
    let mut e = y.clone();
    for i in 0..k {
        e -= &state.q()[i] * state.g()[i];
    }
    e
}

fn problem_strategy() -> impl Strategy<Value = (u64, usize, usize)> {
    (any::<u64>(), 12usize..60, 1usize..10).prop_filter("N > M", |(_, n, m)| n > m)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn ofr_variance_decomposition((seed, n, m) in problem_strategy()) {
        let problem = random_problem(seed, n, m, 0.3);
        let (trace, state) = ofr_select(&problem, None).unwrap();
        let y = problem.response();
        let yty = problem.response_energy();
        let mut explained = 0.0;
        for (k, step) in trace.steps.iter().enumerate() {
            explained += step.criterion;
            let e = residual_after(&state, y, k + 1);
            prop_assert!((explained + e.norm_squared() / yty - 1.0).abs() <= 1e-10);
            prop_assert!((step.unexplained - (1.0 - explained)).abs() <= 1e-10);
            prop_assert!(step.criterion > 0.0);
        }
        prop_assert!(state.orthogonality_defect() <= 1e-8);
        prop_assert!(state.r().diagonal().iter().all(|&d| d == 1.0));
    }

    #[test]
    fn lrofr_regularized_decomposition((seed, n, m) in problem_strategy()) {
        let problem = random_problem(seed, n, m, 0.5);
        let fit = lrofr_fit(&problem, &LrofrOptions::default()).unwrap();
        let state = &fit.state;
        let y = problem.response();
        let yty = problem.response_energy();
        let qq = state.q_norms_sq();
        let mut penalty = 0.0;
        let mut reduction = 0.0;
        for (k, step) in fit.traces.last().unwrap().steps.iter().enumerate() {
            let g = state.g()[k];
            let lambda = state.lambdas()[k];
            penalty += lambda * g * g;
            reduction += g * g * (qq[k] + lambda);
            let e = residual_after(state, y, k + 1);
            let lhs = (e.norm_squared() + penalty) / yty;
            prop_assert!((lhs - (1.0 - reduction / yty)).abs() <= 1e-10);
            prop_assert!((step.unexplained - (1.0 - reduction / yty)).abs() <= 1e-10);
        }
        prop_assert!(fit.regularization.lambdas.iter().all(|&l| l > 0.0));
    }

    #[test]
    fn full_selection_matches_least_squares((seed, n, m) in problem_strategy()) {
        let problem = random_problem(seed, n, m, 0.1);
        let (_, state) = ofr_select(&problem, None).unwrap();
        let x = problem.design();
        let y = problem.response();
        let beta = state.full_weights(m);
        let beta_ls = direct_least_squares(x, y);
        prop_assert!((x * beta - x * beta_ls).norm() <= 1e-8 * y.norm());
    }

    #[test]
    fn first_step_is_greedy_optimal((seed, n, m) in problem_strategy()) {
        let problem = random_problem(seed, n, m, 1.0);
        let (trace, _) = ofr_select(&problem, None).unwrap();
        prop_assert_eq!(trace.steps[0].candidate, brute_force_first(&problem));
    }

    #[test]
    fn larger_lambda_never_grows_g((seed, n, m) in problem_strategy(), scale in 1.0f64..1e4) {
        let problem = random_problem(seed, n, m, 0.5);
        let fit = lrofr_fit(&problem, &LrofrOptions::default()).unwrap();
        let base: Vec<f64> = fit.state.lambdas().iter().copied().collect();
        let bigger: Vec<f64> = base.iter().map(|l| l * scale).collect();
        let g0 = fit.state.refit(problem.response(), &base).g().norm();
        let g1 = fit.state.refit(problem.response(), &bigger).g().norm();
        prop_assert!(g1 <= g0 * (1.0 + 1e-12));
    }

    #[test]
    fn crerr_terminates_with_nonpositive_remainder((seed, n, m) in problem_strategy(), log_beta in -6.0f64..-1.0) {
        let beta = 10f64.powf(log_beta);
        let problem = random_problem(seed, n, m, 0.3);
        let scaled = RegressionProblem::new(problem.design() * 0.2, problem.response().clone()).unwrap();
        match lrofr_dopt_fit(&scaled, beta, &LrofrOptions::default()) {
            Ok(fit) => {
                let trace = fit.traces.last().unwrap();
                if trace.terminated_by == Termination::NonpositiveCrerr {
                    // later passes only revisit what the previous pass kept
                    let pool: Vec<usize> = match fit.traces.len() {
                        1 => (0..m).collect(),
                        k => fit.traces[k - 2].selected(),
                    };
                    let candidates: Vec<usize> = pool.into_iter().filter(|c| !trace.degenerate.contains(c)).collect();
                    for (_, value) in recomputed_crerr(&scaled, &fit.state, &candidates, &fit.regularization.lambdas, beta) {
                        prop_assert!(value <= 1e-12);
                    }
                }
            }
            Err(SelectionError::BetaTooLarge(_)) => {}
            Err(e) => prop_assert!(false, "unexpected error {e}"),
        }
    }

    #[test]
    fn permuting_columns_permutes_selection((seed, n, m) in problem_strategy(), shift in 1usize..9) {
        let problem = random_problem(seed, n, m, 0.3);
        let perm: Vec<usize> = (0..m).map(|j| (j + shift) % m).collect();
        let permuted = RegressionProblem::new(
            select_columns(problem.design(), &perm),
            problem.response().clone(),
        ).unwrap();
        let (t0, s0) = ofr_select(&problem, Some(0.05)).unwrap();
        let (t1, s1) = ofr_select(&permuted, Some(0.05)).unwrap();
        let mut a = t0.selected();
        let mut b: Vec<usize> = t1.selected().iter().map(|&j| perm[j]).collect();
        a.sort_unstable();
        b.sort_unstable();
        prop_assert_eq!(a, b);
        prop_assert!((s0.residual().norm() - s1.residual().norm()).abs() <= 1e-9 * problem.response().norm());
    }
}
