//! Echo-state reservoir: weight generation, teacher-forced harvesting and
//! closed-loop (free-running) prediction.
//!
//! State update, with `x(0) = 0` and `y(0) = 0`:
//!
//! ```text
//! x(k+1) = f(W_in u(k+1) + W x(k) + W_fb y(k)) + ν(k)
//! ```
//!
//! where `ν` is uniform noise over `±state_noise_amplitude`, added after the
//! activation.

use nalgebra::{DMatrix, Schur};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::persistence::matrix_serde;
use crate::readout::Readout;
use crate::scalar::Real;

/// States beyond this magnitude are treated as divergence.
pub const DIVERGENCE_BOUND: f64 = 1e6;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EsnError {
    #[error("invalid random spec for {matrix}: {reason}")]
    InvalidSpec { matrix: &'static str, reason: String },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("state diverged (non-finite or above 1e6) at step {step}")]
    NonFiniteState { step: usize },
    #[error("{what} has {found} entries, expected {expected}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Activation<T> {
    Tanh,
    Identity,
    /// `exp(−(a − mean)² / (2 variance))`.
    GaussianRbf { mean: T, variance: T },
}

impl<T: Real> Activation<T> {
    pub fn apply(&self, a: T) -> T {
        match *self {
            Activation::Tanh => a.tanh(),
            Activation::Identity => a,
            Activation::GaussianRbf { mean, variance } => {
                let d = a - mean;
                (-(d * d) / (T::of(2.0) * variance)).exp()
            }
        }
    }
}

/// Distribution of the entries of one random weight matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", bound = "T: Real")]
pub enum SparseRandomSpec<T: Real> {
    /// Each entry takes `values[i]` with probability `probabilities[i]`.
    Discrete { values: Vec<T>, probabilities: Vec<T> },
    /// Each entry is nonzero with probability `density`, then uniform on
    /// `[low, high]`.
    Uniform { low: T, high: T, density: T },
}

impl<T: Real> SparseRandomSpec<T> {
    pub fn discrete(pairs: &[(f64, f64)]) -> Self {
        SparseRandomSpec::Discrete {
            values: pairs.iter().map(|p| T::of(p.0)).collect(),
            probabilities: pairs.iter().map(|p| T::of(p.1)).collect(),
        }
    }

    pub fn uniform(low: f64, high: f64, density: f64) -> Self {
        SparseRandomSpec::Uniform {
            low: T::of(low),
            high: T::of(high),
            density: T::of(density),
        }
    }

    pub fn validate(&self, matrix: &'static str) -> Result<(), EsnError> {
        let fail = |reason: String| Err(EsnError::InvalidSpec { matrix, reason });
        match self {
            SparseRandomSpec::Discrete {
                values,
                probabilities,
            } => {
                if values.is_empty() || values.len() != probabilities.len() {
                    return fail(format!(
                        "{} values but {} probabilities",
                        values.len(),
                        probabilities.len()
                    ));
                }
                if probabilities.iter().any(|p| !(p.as_f64() >= 0.0)) {
                    return fail("negative probability".into());
                }
                let total: f64 = probabilities.iter().map(|p| p.as_f64()).sum();
                if (total - 1.0).abs() > 1e-12 {
                    return fail(format!("probabilities sum to {total}"));
                }
                if values.iter().any(|v| !v.is_finite_value()) {
                    return fail("non-finite value".into());
                }
            }
            SparseRandomSpec::Uniform { low, high, density } => {
                if !(low.is_finite_value() && high.is_finite_value() && *low <= *high) {
                    return fail(format!("bad interval [{low}, {high}]"));
                }
                let d = density.as_f64();
                if !(0.0..=1.0).contains(&d) {
                    return fail(format!("density {d} outside [0, 1]"));
                }
            }
        }
        Ok(())
    }

    fn sample<R: Rng>(&self, rng: &mut R) -> T {
        match self {
            SparseRandomSpec::Discrete {
                values,
                probabilities,
            } => {
                let u: f64 = rng.gen();
                let mut acc = 0.0;
                for (v, p) in values.iter().zip(probabilities) {
                    acc += p.as_f64();
                    if u < acc {
                        return *v;
                    }
                }
                *values.last().expect("validated non-empty")
            }
            SparseRandomSpec::Uniform { low, high, density } => {
                let keep: f64 = rng.gen();
                let u: f64 = rng.gen();
                if keep < density.as_f64() {
                    *low + (*high - *low) * T::of(u)
                } else {
                    T::zero()
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct EsnConfig<T: Real> {
    pub reservoir_size: usize,
    pub input_dim: usize,
    pub output_dim: usize,
    pub activation: Activation<T>,
    pub w_spec: SparseRandomSpec<T>,
    pub w_in_spec: SparseRandomSpec<T>,
    pub w_fb_spec: SparseRandomSpec<T>,
    pub state_noise_amplitude: T,
    pub washout: usize,
    pub seed: u64,
    pub include_input_in_readout: bool,
    /// Rescale `W` to this spectral radius after sampling (off by default).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_spectral_radius: Option<T>,
    /// Constant input vector fed at every step when no input series is
    /// given (for example a bias unit).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub constant_input: Option<Vec<T>>,
}

impl<T: Real> EsnConfig<T> {
    /// 400 tanh units, sparse ±0.4 reservoir, constant 0.2 bias input and
    /// dense uniform output feedback.
    pub fn mackey_glass(seed: u64) -> Self {
        Self {
            reservoir_size: 400,
            input_dim: 1,
            output_dim: 1,
            activation: Activation::Tanh,
            w_spec: SparseRandomSpec::discrete(&[(0.0, 0.99), (0.4, 0.005), (-0.4, 0.005)]),
            w_in_spec: SparseRandomSpec::discrete(&[(0.0, 0.5), (0.14, 0.25), (-0.14, 0.25)]),
            w_fb_spec: SparseRandomSpec::uniform(-0.56, 0.56, 1.0),
            state_noise_amplitude: T::of(1e-5),
            washout: 1000,
            seed,
            include_input_in_readout: false,
            target_spectral_radius: None,
            constant_input: Some(vec![T::of(0.2)]),
        }
    }

    /// 300 Gaussian-RBF units with two inputs and two fed-back outputs.
    pub fn vector_field(seed: u64) -> Self {
        Self {
            reservoir_size: 300,
            input_dim: 2,
            output_dim: 2,
            activation: Activation::GaussianRbf {
                mean: T::zero(),
                variance: T::one(),
            },
            w_spec: SparseRandomSpec::discrete(&[(0.0, 0.95), (0.2073, 0.025), (-0.2073, 0.025)]),
            w_in_spec: SparseRandomSpec::uniform(-1.0, 1.0, 0.9),
            w_fb_spec: SparseRandomSpec::discrete(&[(0.0, 0.9), (0.1, 0.05), (-0.1, 0.05)]),
            state_noise_amplitude: T::zero(),
            washout: 300,
            seed,
            include_input_in_readout: false,
            target_spectral_radius: None,
            constant_input: None,
        }
    }

    pub fn validate(&self) -> Result<(), EsnError> {
        self.w_spec.validate("W")?;
        self.w_in_spec.validate("W_in")?;
        self.w_fb_spec.validate("W_fb")?;
        if self.output_dim == 0 {
            return Err(EsnError::InvalidConfig("output_dim must be at least 1".into()));
        }
        if !(self.state_noise_amplitude.as_f64() >= 0.0) {
            return Err(EsnError::InvalidConfig("state_noise_amplitude must be non-negative".into()));
        }
        if let Activation::GaussianRbf { variance, .. } = self.activation {
            if !(variance > T::zero()) {
                return Err(EsnError::InvalidConfig("Gaussian activation variance must be positive".into()));
            }
        }
        if let Some(c) = &self.constant_input {
            if c.len() != self.input_dim {
                return Err(EsnError::DimensionMismatch {
                    what: "constant_input",
                    expected: self.input_dim,
                    found: c.len(),
                });
            }
        }
        Ok(())
    }

    /// Width of one readout feature row.
    pub fn feature_dim(&self) -> usize {
        if self.include_input_in_readout {
            self.input_dim + self.reservoir_size
        } else {
            self.reservoir_size
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct EsnWeights<T: Real> {
    #[serde(with = "matrix_serde")]
    pub w: DMatrix<T>,
    #[serde(with = "matrix_serde")]
    pub w_in: DMatrix<T>,
    #[serde(with = "matrix_serde")]
    pub w_fb: DMatrix<T>,
    pub realized_spectral_radius: T,
}

/// Largest eigenvalue modulus, from the real Schur form.
///
/// The Schur iteration is bounded; on the rare matrix where it stalls the
/// radius comes from Gelfand's formula `‖W^k‖^(1/k)` with `k = 2^12`.
pub fn spectral_radius<T: Real>(w: &DMatrix<T>) -> T {
    if w.nrows() == 0 || w.iter().all(|v| *v == T::zero()) {
        return T::zero();
    }
    match Schur::try_new(w.clone(), T::default_epsilon(), 100 * w.nrows().max(10)) {
        Some(schur) => schur
            .complex_eigenvalues()
            .iter()
            .map(|z| (z.re * z.re + z.im * z.im).sqrt())
            .fold(T::zero(), |a, b| a.max(b)),
        None => gelfand_radius(w, 12),
    }
}

fn gelfand_radius<T: Real>(w: &DMatrix<T>, squarings: u32) -> T {
    let norm = w.norm();
    let mut b = w / norm;
    let mut log_norm = norm.ln();
    for _ in 0..squarings {
        b = &b * &b;
        let n = b.norm();
        if n == T::zero() {
            return T::zero();
        }
        b /= n;
        log_norm = log_norm + log_norm + n.ln();
    }
    (log_norm / T::of(2f64.powi(squarings as i32))).exp()
}

/// Samples `W`, `W_in` and `W_fb` (in that order, row-major) from the
/// seeded generator.
pub fn generate_weights<T: Real>(config: &EsnConfig<T>) -> Result<EsnWeights<T>, EsnError> {
    config.validate()?;
    let m = config.reservoir_size;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut draw = |rows: usize, cols: usize, spec: &SparseRandomSpec<T>| {
        let data: Vec<T> = (0..rows * cols).map(|_| spec.sample(&mut rng)).collect();
        DMatrix::from_row_slice(rows, cols, &data)
    };
    let mut w = draw(m, m, &config.w_spec);
    let w_in = draw(m, config.input_dim, &config.w_in_spec);
    let w_fb = draw(m, config.output_dim, &config.w_fb_spec);
    let mut radius = spectral_radius(&w);
    if let Some(target) = config.target_spectral_radius {
        if radius > T::zero() {
            w *= target / radius;
            radius = spectral_radius(&w);
        }
    }
    Ok(EsnWeights {
        w,
        w_in,
        w_fb,
        realized_spectral_radius: radius,
    })
}

/// Input drive for a run.
#[derive(Debug, Clone, PartialEq)]
pub enum Inputs<T> {
    Absent,
    Constant(Vec<T>),
    /// One row per time step.
    Series(Vec<Vec<T>>),
}

impl<T: Real> Inputs<T> {
    pub fn series(matrix: &DMatrix<T>) -> Self {
        Inputs::Series(
            (0..matrix.nrows())
                .map(|i| matrix.row(i).iter().copied().collect())
                .collect(),
        )
    }

    fn at(&self, k: usize) -> &[T] {
        match self {
            Inputs::Absent => &[],
            Inputs::Constant(v) => v,
            Inputs::Series(rows) => &rows[k],
        }
    }

    fn covers(&self, last_index: usize) -> bool {
        match self {
            Inputs::Series(rows) => rows.len() > last_index,
            _ => true,
        }
    }
}

/// Harvested design matrix and aligned targets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct StateHarvest<T: Real> {
    /// One row per kept step `k`: `[u(k), x(k)]` or `x(k)`.
    #[serde(with = "matrix_serde")]
    pub states: DMatrix<T>,
    /// `y(k)` aligned with the rows of `states`.
    #[serde(with = "matrix_serde")]
    pub targets: DMatrix<T>,
    /// First and last kept time index.
    pub kept_range: (usize, usize),
    /// Reservoir state `x(last_k)`.
    pub final_state: Vec<T>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Noise {
    Off,
    /// Draw state noise from the configuration seed, starting at the
    /// beginning of the stream.
    Seeded,
}

/// A reservoir ready to run: configuration, weights, and a sparse copy of
/// the weight matrices for the update.
#[derive(Debug, Clone)]
pub struct Reservoir<T: Real> {
    config: EsnConfig<T>,
    weights: EsnWeights<T>,
    w_rows: Vec<Vec<(usize, T)>>,
    w_in_rows: Vec<Vec<(usize, T)>>,
    w_fb_rows: Vec<Vec<(usize, T)>>,
}

fn sparse_rows<T: Real>(m: &DMatrix<T>) -> Vec<Vec<(usize, T)>> {
    (0..m.nrows())
        .map(|i| {
            (0..m.ncols())
                .filter_map(|j| {
                    let v = m[(i, j)];
                    (v != T::zero()).then_some((j, v))
                })
                .collect()
        })
        .collect()
}

fn noise_stream(seed: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    rng
}

impl<T: Real> Reservoir<T> {
    pub fn new(config: EsnConfig<T>, weights: EsnWeights<T>) -> Result<Self, EsnError> {
        config.validate()?;
        let m = config.reservoir_size;
        let checks = [
            ("W", weights.w.shape(), (m, m)),
            ("W_in", weights.w_in.shape(), (m, config.input_dim)),
            ("W_fb", weights.w_fb.shape(), (m, config.output_dim)),
        ];
        for (what, found, expected) in checks {
            if found != expected {
                return Err(EsnError::DimensionMismatch {
                    what,
                    expected: expected.0 * expected.1,
                    found: found.0 * found.1,
                });
            }
        }
        Ok(Self {
            w_rows: sparse_rows(&weights.w),
            w_in_rows: sparse_rows(&weights.w_in),
            w_fb_rows: sparse_rows(&weights.w_fb),
            config,
            weights,
        })
    }

    /// Generates weights from the configuration and wraps them.
    pub fn generate(config: EsnConfig<T>) -> Result<Self, EsnError> {
        let weights = generate_weights(&config)?;
        Self::new(config, weights)
    }

    pub fn config(&self) -> &EsnConfig<T> {
        &self.config
    }

    pub fn weights(&self) -> &EsnWeights<T> {
        &self.weights
    }

    pub fn size(&self) -> usize {
        self.config.reservoir_size
    }

    /// Inputs implied by the configuration alone.
    pub fn default_inputs(&self) -> Inputs<T> {
        match &self.config.constant_input {
            Some(c) => Inputs::Constant(c.clone()),
            None if self.config.input_dim == 0 => Inputs::Absent,
            None => Inputs::Constant(vec![T::zero(); self.config.input_dim]),
        }
    }

    fn check_inputs(&self, inputs: &Inputs<T>, last_index: usize) -> Result<(), EsnError> {
        let width = match inputs {
            Inputs::Absent => 0,
            Inputs::Constant(v) => v.len(),
            Inputs::Series(rows) => rows.first().map_or(self.config.input_dim, |r| r.len()),
        };
        if width != self.config.input_dim {
            return Err(EsnError::DimensionMismatch {
                what: "input row",
                expected: self.config.input_dim,
                found: width,
            });
        }
        if !inputs.covers(last_index) {
            return Err(EsnError::DimensionMismatch {
                what: "input series",
                expected: last_index + 1,
                found: match inputs {
                    Inputs::Series(r) => r.len(),
                    _ => 0,
                },
            });
        }
        Ok(())
    }

    /// One update: `next = f(W_in u + W x + W_fb y) + noise`.
    fn step<R: Rng>(
        &self,
        x: &[T],
        u: &[T],
        y: &[T],
        next: &mut [T],
        noise: Option<&mut R>,
        step_index: usize,
    ) -> Result<(), EsnError> {
        let act = self.config.activation;
        for i in 0..next.len() {
            let mut a = T::zero();
            for &(j, v) in &self.w_in_rows[i] {
                a += v * u[j];
            }
            for &(j, v) in &self.w_rows[i] {
                a += v * x[j];
            }
            for &(j, v) in &self.w_fb_rows[i] {
                a += v * y[j];
            }
            next[i] = act.apply(a);
        }
        if let Some(rng) = noise {
            let amp = self.config.state_noise_amplitude.as_f64();
            if amp > 0.0 {
                for v in next.iter_mut() {
                    *v += T::of(rng.gen_range(-amp..amp));
                }
            }
        }
        let bound = T::of(DIVERGENCE_BOUND);
        if next.iter().any(|v| !v.is_finite_value() || v.magnitude() > bound) {
            return Err(EsnError::NonFiniteState { step: step_index });
        }
        Ok(())
    }

    fn features_into(&self, u: &[T], x: &[T], out: &mut Vec<T>) {
        out.clear();
        if self.config.include_input_in_readout {
            out.extend_from_slice(u);
        }
        out.extend_from_slice(x);
    }

    /// Teacher-forced harvest from `x(0) = 0`.
    pub fn harvest_states(&self, inputs: &Inputs<T>, teacher: &DMatrix<T>) -> Result<StateHarvest<T>, EsnError> {
        self.harvest_states_from(&vec![T::zero(); self.size()], inputs, teacher)
    }

    /// Teacher-forced harvest from an arbitrary initial state. Rows are kept
    /// for `washout ≤ k < N`.
    pub fn harvest_states_from(
        &self,
        x0: &[T],
        inputs: &Inputs<T>,
        teacher: &DMatrix<T>,
    ) -> Result<StateHarvest<T>, EsnError> {
        let n = teacher.nrows();
        let p = self.config.output_dim;
        if teacher.ncols() != p {
            return Err(EsnError::DimensionMismatch {
                what: "teacher row",
                expected: p,
                found: teacher.ncols(),
            });
        }
        if x0.len() != self.size() {
            return Err(EsnError::DimensionMismatch {
                what: "initial state",
                expected: self.size(),
                found: x0.len(),
            });
        }
        let washout = self.config.washout;
        if n <= washout {
            return Err(EsnError::InvalidConfig(format!(
                "teacher length {n} does not exceed washout {washout}"
            )));
        }
        self.check_inputs(inputs, n - 1)?;

        let kept = n - washout;
        let d = self.config.feature_dim();
        let mut states = DMatrix::zeros(kept, d);
        let mut targets = DMatrix::zeros(kept, p);
        let mut rng = noise_stream(self.config.seed);
        let mut x = x0.to_vec();
        let mut next = vec![T::zero(); self.size()];
        let mut y_prev = vec![T::zero(); p];
        let mut row = Vec::with_capacity(d);
        for k in 0..n {
            if k > 0 {
                for (j, v) in y_prev.iter_mut().enumerate() {
                    *v = teacher[(k - 1, j)];
                }
                self.step(&x, inputs.at(k), &y_prev, &mut next, Some(&mut rng), k)?;
                std::mem::swap(&mut x, &mut next);
            }
            if k >= washout {
                let r = k - washout;
                self.features_into(inputs.at(k), &x, &mut row);
                for (j, v) in row.iter().enumerate() {
                    states[(r, j)] = *v;
                }
                for j in 0..p {
                    targets[(r, j)] = teacher[(k, j)];
                }
            }
        }
        Ok(StateHarvest {
            states,
            targets,
            kept_range: (washout, n - 1),
            final_state: x,
        })
    }

    /// Advances a saved state `x(start)` by `steps` teacher-forced updates,
    /// using `teacher` rows `start..start+steps` and inputs from `start+1`.
    /// Returns `x(start + steps)`.
    pub fn teacher_forced_run(
        &self,
        x_init: &[T],
        inputs: &Inputs<T>,
        teacher: &DMatrix<T>,
        start: usize,
        steps: usize,
        noise: Noise,
    ) -> Result<Vec<T>, EsnError> {
        let p = self.config.output_dim;
        if teacher.ncols() != p || teacher.nrows() < start + steps {
            return Err(EsnError::DimensionMismatch {
                what: "teacher rows",
                expected: start + steps,
                found: teacher.nrows(),
            });
        }
        self.check_inputs(inputs, start + steps)?;
        let mut rng = match noise {
            Noise::Seeded => Some(noise_stream(self.config.seed)),
            Noise::Off => None,
        };
        let mut x = x_init.to_vec();
        let mut next = vec![T::zero(); self.size()];
        let mut y_prev = vec![T::zero(); p];
        for k in start + 1..=start + steps {
            for (j, v) in y_prev.iter_mut().enumerate() {
                *v = teacher[(k - 1, j)];
            }
            self.step(&x, inputs.at(k), &y_prev, &mut next, rng.as_mut(), k)?;
            std::mem::swap(&mut x, &mut next);
        }
        Ok(x)
    }

    /// Closed-loop run from `x(start)`, `y(start)`: every predicted output
    /// is fed back at the next step. Returns `y(start+1..=start+steps)`,
    /// one row per step.
    pub fn free_run<R: Readout<T> + ?Sized>(
        &self,
        readout: &R,
        x_init: &[T],
        y_init: &[T],
        steps: usize,
        inputs: &Inputs<T>,
        start: usize,
    ) -> Result<Vec<Vec<T>>, EsnError> {
        let p = self.config.output_dim;
        if readout.output_dim() != p || y_init.len() != p {
            return Err(EsnError::DimensionMismatch {
                what: "readout output",
                expected: p,
                found: readout.output_dim(),
            });
        }
        if readout.feature_dim() != self.config.feature_dim() {
            return Err(EsnError::DimensionMismatch {
                what: "readout features",
                expected: self.config.feature_dim(),
                found: readout.feature_dim(),
            });
        }
        self.check_inputs(inputs, start + steps)?;
        let mut x = x_init.to_vec();
        let mut next = vec![T::zero(); self.size()];
        let mut y = y_init.to_vec();
        let mut features = Vec::with_capacity(self.config.feature_dim());
        let mut outputs = Vec::with_capacity(steps);
        for k in start + 1..=start + steps {
            self.step::<ChaCha8Rng>(&x, inputs.at(k), &y, &mut next, None, k)?;
            std::mem::swap(&mut x, &mut next);
            self.features_into(inputs.at(k), &x, &mut features);
            readout.predict_into(&features, &mut y);
            if y.iter().any(|v| !v.is_finite_value()) {
                return Err(EsnError::NonFiniteState { step: k });
            }
            outputs.push(y.clone());
        }
        Ok(outputs)
    }
}
