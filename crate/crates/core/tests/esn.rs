mod common;

use esn_lrofr::esn::{
    generate_weights, spectral_radius, Activation, EsnConfig, EsnError, EsnWeights, Inputs, Noise, Reservoir,
    SparseRandomSpec,
};
use esn_lrofr::readout::{fit_linear, LinearReadout, Readout, RegularizedLinearReadout};
use nalgebra::{DMatrix, DVector};
use rand::Rng;

/// Growth rate of `‖W^k v‖` by normalized power iteration.
fn power_iteration_radius(w: &DMatrix<f64>, iters: usize) -> f64 {
    let mut r = common::rng(99);
    let mut v = DVector::from_fn(w.nrows(), |_, _| common::gaussian(&mut r));
    v.normalize_mut();
    let burn = iters / 4;
    let mut log_sum = 0.0;
    for k in 0..iters {
        v = w * v;
        let n = v.norm();
        if k >= burn {
            log_sum += n.ln();
        }
        v /= n;
    }
    (log_sum / (iters - burn) as f64).exp()
}

fn identity_esn(m: usize) -> Reservoir<f64> {
    let config = EsnConfig {
        reservoir_size: m,
        input_dim: 0,
        output_dim: m,
        activation: Activation::Identity,
        w_spec: SparseRandomSpec::discrete(&[(0.0, 1.0)]),
        w_in_spec: SparseRandomSpec::discrete(&[(0.0, 1.0)]),
        w_fb_spec: SparseRandomSpec::discrete(&[(0.0, 1.0)]),
        state_noise_amplitude: 0.0,
        washout: 1,
        seed: 0,
        include_input_in_readout: false,
        target_spectral_radius: None,
        constant_input: None,
    };
    let weights = EsnWeights {
        w: DMatrix::zeros(m, m),
        w_in: DMatrix::zeros(m, 0),
        w_fb: DMatrix::identity(m, m),
        realized_spectral_radius: 0.0,
    };
    Reservoir::new(config, weights).unwrap()
}

fn rotation(theta: f64) -> DMatrix<f64> {
    DMatrix::from_row_slice(2, 2, &[theta.cos(), -theta.sin(), theta.sin(), theta.cos()])
}

fn rotating_teacher(n: usize) -> DMatrix<f64> {
    let a = rotation(0.3);
    let mut y = DMatrix::zeros(n, 2);
    y[(0, 0)] = 0.5;
    for k in 1..n {
        let prev = y.row(k - 1).transpose();
        let next = &a * prev;
        y.set_row(k, &next.transpose());
    }
    y
}

#[test]
fn mg_reservoir_sparsity() {
    let w = generate_weights(&EsnConfig::<f64>::mackey_glass(11)).unwrap();
    let nonzero = w.w.iter().filter(|v| **v != 0.0).count() as f64 / (400.0 * 400.0);
    assert!((nonzero - 0.01).abs() <= 0.003, "nonzero fraction {nonzero}");
    assert!(w.w.iter().all(|v| [0.0, 0.4, -0.4].contains(v)));
    assert!(w.w_in.iter().all(|v| [0.0, 0.14, -0.14].contains(v)));
    assert!(w.w_fb.iter().all(|v| v.abs() <= 0.56));
}

#[test]
fn zero_spec_gives_zero_radius() {
    let mut c = EsnConfig::<f64>::mackey_glass(1);
    c.w_spec = SparseRandomSpec::discrete(&[(0.0, 1.0)]);
    let w = generate_weights(&c).unwrap();
    assert!(w.w.iter().all(|v| *v == 0.0));
    assert_eq!(w.realized_spectral_radius, 0.0);
}

#[test]
fn vector_field_radius_near_085() {
    for seed in 0..20 {
        let w = generate_weights(&EsnConfig::<f64>::vector_field(seed)).unwrap();
        let rho = w.realized_spectral_radius;
        assert!((rho - 0.85).abs() <= 0.1, "seed {seed}: radius {rho}");
    }
}

#[test]
fn radius_matches_power_iteration() {
    for seed in 0..3 {
        let w = generate_weights(&EsnConfig::<f64>::vector_field(seed)).unwrap();
        let oracle = power_iteration_radius(&w.w, 4000);
        let rel = (w.realized_spectral_radius - oracle).abs() / oracle;
        assert!(rel < 0.02, "seed {seed}: schur {} vs power {oracle}", w.realized_spectral_radius);
    }
}

#[test]
fn target_radius_rescales() {
    let mut c = EsnConfig::<f64>::vector_field(4);
    c.target_spectral_radius = Some(0.5);
    let w = generate_weights(&c).unwrap();
    assert!((w.realized_spectral_radius - 0.5).abs() < 1e-9);
    assert!((spectral_radius(&w.w) - 0.5).abs() < 1e-9);
}

#[test]
fn malformed_probabilities_rejected() {
    let mut c = EsnConfig::<f64>::mackey_glass(1);
    c.w_spec = SparseRandomSpec::discrete(&[(0.0, 0.9), (0.4, 0.05)]);
    assert!(matches!(generate_weights(&c), Err(EsnError::InvalidSpec { matrix: "W", .. })));
    c.w_spec = SparseRandomSpec::Discrete {
        values: vec![0.0, 1.0],
        probabilities: vec![1.0],
    };
    assert!(matches!(generate_weights(&c), Err(EsnError::InvalidSpec { .. })));
    c.w_spec = SparseRandomSpec::uniform(0.0, 1.0, 1.5);
    assert!(matches!(generate_weights(&c), Err(EsnError::InvalidSpec { .. })));
}

#[test]
fn degenerate_identity_esn_is_lag_one() {
    let esn = identity_esn(2);
    let teacher = rotating_teacher(50);
    let h = esn.harvest_states(&Inputs::Absent, &teacher).unwrap();
    assert_eq!(h.states.nrows(), 49);
    assert_eq!(h.kept_range, (1, 49));
    for r in 0..49 {
        let k = r + 1;
        assert_eq!(h.states[(r, 0)], teacher[(k - 1, 0)]);
        assert_eq!(h.states[(r, 1)], teacher[(k - 1, 1)]);
        assert_eq!(h.targets[(r, 0)], teacher[(k, 0)]);
    }
}

#[test]
fn exact_one_step_readout_reproduces_teacher() {
    let esn = identity_esn(2);
    let teacher = rotating_teacher(60);
    let readout = LinearReadout {
        weights: rotation(0.3),
        offsets: vec![0.0, 0.0],
        feature_dim: 2,
        feature_indices: None,
    };
    let start = 10;
    let x = [teacher[(start - 1, 0)], teacher[(start - 1, 1)]];
    let y0 = [teacher[(start, 0)], teacher[(start, 1)]];
    let out = esn.free_run(&readout, &x, &y0, 40, &Inputs::Absent, start).unwrap();
    for (i, row) in out.iter().enumerate() {
        let k = start + 1 + i;
        assert!((row[0] - teacher[(k, 0)]).abs() < 1e-12);
        assert!((row[1] - teacher[(k, 1)]).abs() < 1e-12);
    }
}

#[test]
fn divergence_reports_step() {
    let mut esn = identity_esn(1);
    let config = esn.config().clone();
    let mut weights = esn.weights().clone();
    weights.w = DMatrix::from_element(1, 1, 10.0);
    weights.w_fb = DMatrix::from_element(1, 1, 1.0);
    esn = Reservoir::new(config, weights).unwrap();
    let teacher = DMatrix::from_element(20, 1, 1.0);
    // x(k) = 10 x(k-1) + 1 passes 1e6 at k = 7
    let err = esn.harvest_states(&Inputs::Absent, &teacher).unwrap_err();
    assert_eq!(err, EsnError::NonFiniteState { step: 7 });
}

#[test]
fn mg_harvest_shape_and_range() {
    let esn = Reservoir::generate(EsnConfig::<f64>::mackey_glass(3)).unwrap();
    let teacher = common::mg_teacher(3000, 3);
    let h = esn.harvest_states(&esn.default_inputs(), &teacher).unwrap();
    assert_eq!(h.states.shape(), (2000, 400));
    assert_eq!(h.targets.shape(), (2000, 1));
    assert_eq!(h.kept_range, (1000, 2999));
    let bound = 1.0 + 1e-5;
    assert!(h.states.iter().all(|v| v.is_finite() && v.abs() < bound));
}

#[test]
fn gaussian_activation_range() {
    let mut c = EsnConfig::<f64>::vector_field(2);
    c.washout = 10;
    let esn = Reservoir::generate(c).unwrap();
    let data = esn_lrofr::benchmarks::surrogate_vector_field(300, 0.0, 2);
    let h = esn
        .harvest_states(&Inputs::series(&data.inputs), &data.responses)
        .unwrap();
    assert!(h.states.iter().all(|v| *v > 0.0 && *v <= 1.0));
}

#[test]
fn harvest_is_deterministic() {
    let teacher = common::mg_teacher(1500, 8);
    let a = Reservoir::generate(EsnConfig::<f64>::mackey_glass(8)).unwrap();
    let b = Reservoir::generate(EsnConfig::<f64>::mackey_glass(8)).unwrap();
    let ha = a.harvest_states(&a.default_inputs(), &teacher).unwrap();
    let hb = b.harvest_states(&b.default_inputs(), &teacher).unwrap();
    assert!(ha
        .states
        .iter()
        .zip(hb.states.iter())
        .all(|(x, y)| x.to_bits() == y.to_bits()));
    assert_eq!(ha, hb);
}

#[test]
fn washout_erases_initial_state() {
    let esn = Reservoir::generate(EsnConfig::<f64>::mackey_glass(5)).unwrap();
    let teacher = common::mg_teacher(3000, 5);
    let mut r = common::rng(17);
    let x0: Vec<f64> = (0..400).map(|_| r.gen_range(-1.0..1.0)).collect();
    let a = esn.harvest_states(&esn.default_inputs(), &teacher).unwrap();
    let b = esn.harvest_states_from(&x0, &esn.default_inputs(), &teacher).unwrap();
    let gap = (&a.states - &b.states).amax();
    assert!(gap <= 1e-6, "max post-washout gap {gap}");
}

#[test]
fn teacher_forced_run_ends_on_last_harvest_row() {
    let esn = Reservoir::generate(EsnConfig::<f64>::mackey_glass(9)).unwrap();
    let teacher = common::mg_teacher(1400, 9);
    let inputs = esn.default_inputs();
    let h = esn.harvest_states(&inputs, &teacher).unwrap();
    let x = esn
        .teacher_forced_run(&vec![0.0; 400], &inputs, &teacher, 0, 1399, Noise::Seeded)
        .unwrap();
    assert_eq!(x, h.final_state);
    let last: Vec<f64> = h.states.row(h.states.nrows() - 1).iter().copied().collect();
    assert_eq!(x, last);
}

#[test]
fn teacher_forced_run_composes() {
    let esn = Reservoir::generate(EsnConfig::<f64>::mackey_glass(10)).unwrap();
    let teacher = common::mg_teacher(600, 10);
    let inputs = esn.default_inputs();
    let zero = vec![0.0; 400];
    let direct = esn.teacher_forced_run(&zero, &inputs, &teacher, 0, 500, Noise::Off).unwrap();
    let mid = esn.teacher_forced_run(&zero, &inputs, &teacher, 0, 200, Noise::Off).unwrap();
    let split = esn.teacher_forced_run(&mid, &inputs, &teacher, 200, 300, Noise::Off).unwrap();
    assert_eq!(direct, split);
}

#[test]
fn inputs_enter_readout_features_when_requested() {
    let mut c = EsnConfig::<f64>::mackey_glass(1);
    c.include_input_in_readout = true;
    c.washout = 10;
    let esn = Reservoir::generate(c).unwrap();
    let teacher = common::mg_teacher(50, 1);
    let h = esn.harvest_states(&esn.default_inputs(), &teacher).unwrap();
    assert_eq!(h.states.ncols(), 401);
    assert!(h.states.column(0).iter().all(|v| *v == 0.2));
}

#[test]
fn mg_free_run_stays_bounded() {
    let esn = Reservoir::generate(EsnConfig::<f64>::mackey_glass(2)).unwrap();
    let teacher = common::mg_teacher(3000, 2);
    let inputs = esn.default_inputs();
    let h = esn.harvest_states(&inputs, &teacher).unwrap();
    let readout = fit_linear(&h);
    let out = esn
        .free_run(&readout, &h.final_state, &[teacher[(2999, 0)]], 84, &inputs, 2999)
        .unwrap();
    assert_eq!(out.len(), 84);
    assert!(out.iter().all(|y| y[0].is_finite() && y[0].abs() < 1.0));
}

#[test]
fn zero_weights_equal_excluded_components() {
    let mut c = EsnConfig::<f64>::mackey_glass(4);
    c.reservoir_size = 40;
    c.washout = 100;
    c.w_spec = SparseRandomSpec::discrete(&[(0.0, 0.9), (0.3, 0.05), (-0.3, 0.05)]);
    let esn = Reservoir::generate(c).unwrap();
    let teacher = common::mg_teacher(400, 4);
    let inputs = esn.default_inputs();
    let h = esn.harvest_states(&inputs, &teacher).unwrap();
    let full = fit_linear(&h);

    let keep: Vec<usize> = (0..40).filter(|i| i % 3 != 1).collect();
    let mut padded = DMatrix::zeros(1, 40);
    let mut compact = DMatrix::zeros(1, keep.len());
    for (j, &i) in keep.iter().enumerate() {
        padded[(0, i)] = full.weights[(0, i)];
        compact[(0, j)] = full.weights[(0, i)];
    }
    let regularized = RegularizedLinearReadout {
        weights: padded,
        offsets: full.offsets.clone(),
        lambdas: vec![vec![1.0; 40]],
        selection_order: vec![keep.clone()],
    };
    let subset = LinearReadout {
        weights: compact,
        offsets: full.offsets.clone(),
        feature_dim: 40,
        feature_indices: Some(keep),
    };
    assert_eq!(regularized.feature_dim(), subset.feature_dim());
    let y0 = [teacher[(399, 0)]];
    let a = esn.free_run(&regularized, &h.final_state, &y0, 50, &inputs, 399).unwrap();
    let b = esn.free_run(&subset, &h.final_state, &y0, 50, &inputs, 399).unwrap();
    assert_eq!(a, b);
}
