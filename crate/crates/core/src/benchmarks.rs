//! Benchmark series and the free-run NRMSE protocol.

use std::io;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::esn::{EsnError, Inputs, Noise, Reservoir};
use crate::linalg::variance;
use crate::readout::Readout;
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum BenchmarkError {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("series became non-finite at sample {0}")]
    NonFinite(usize),
    #[error("inverse transform undefined for {0} (needs |v| < 1)")]
    InverseDomain(f64),
    #[error(transparent)]
    Esn(#[from] EsnError),
}

/// Discretized Mackey-Glass delay equation
///
/// ```text
/// y(n+1) = y(n) + h (α y(n−d) / (1 + y(n−d)^β) − γ y(n)),   d = τ / h
/// ```
///
/// integrated with step `h = step` and emitted every `subsample` steps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MgParams {
    pub alpha: f64,
    pub beta_exp: f64,
    pub gamma: f64,
    pub tau: f64,
    pub step: f64,
    pub subsample: usize,
    /// Emitted samples dropped before the sequence starts.
    pub burn_in: usize,
    pub length: usize,
    /// Constant history level; each history value gets a seeded uniform
    /// jitter of `±history_jitter` on top.
    pub history_init: f64,
    pub history_jitter: f64,
}

impl Default for MgParams {
    fn default() -> Self {
        Self {
            alpha: 0.2,
            beta_exp: 10.0,
            gamma: 0.1,
            tau: 30.0,
            step: 0.1,
            subsample: 10,
            burn_in: 1000,
            length: 3000,
            history_init: 1.2,
            history_jitter: 0.01,
        }
    }
}

impl MgParams {
    pub fn with_length(length: usize) -> Self {
        Self {
            length,
            ..Self::default()
        }
    }

    /// Delay in integration steps.
    pub fn delay_steps(&self) -> Result<usize, BenchmarkError> {
        if !(self.step > 0.0 && self.tau > 0.0) {
            return Err(BenchmarkError::InvalidParams("tau and step must be positive".into()));
        }
        let d = self.tau / self.step;
        if (d - d.round()).abs() > 1e-9 || d.round() < 1.0 {
            return Err(BenchmarkError::InvalidParams(format!(
                "tau / step = {d} is not a positive integer"
            )));
        }
        Ok(d.round() as usize)
    }

    pub fn validate(&self) -> Result<(), BenchmarkError> {
        self.delay_steps()?;
        if self.subsample == 0 {
            return Err(BenchmarkError::InvalidParams("subsample must be at least 1".into()));
        }
        if self.length == 0 {
            return Err(BenchmarkError::InvalidParams("length must be positive".into()));
        }
        Ok(())
    }

    /// Right-hand side of the map for the current and delayed values.
    pub fn increment(&self, y: f64, y_delayed: f64) -> f64 {
        self.step * (self.alpha * y_delayed / (1.0 + y_delayed.powf(self.beta_exp)) - self.gamma * y)
    }
}

/// Generates `params.length` samples, deterministic in `seed`.
pub fn generate_mg(params: &MgParams, seed: u64) -> Result<Vec<f64>, BenchmarkError> {
    params.validate()?;
    let d = params.delay_steps()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let jitter = params.history_jitter;
    let mut y: Vec<f64> = (0..=d)
        .map(|_| {
            let u: f64 = rng.gen_range(-1.0..=1.0);
            params.history_init + jitter * u
        })
        .collect();
    let total = (params.burn_in + params.length) * params.subsample;
    y.reserve(total);
    let mut out = Vec::with_capacity(params.length);
    for n in 0..total {
        let cur = y[y.len() - 1];
        let delayed = y[y.len() - 1 - d];
        let next = cur + params.increment(cur, delayed);
        if !next.is_finite() {
            return Err(BenchmarkError::NonFinite(n / params.subsample));
        }
        y.push(next);
        let emitted = n + 1;
        if emitted % params.subsample == 0 {
            let sample = emitted / params.subsample;
            if sample > params.burn_in {
                out.push(next);
            }
        }
    }
    Ok(out)
}

/// `tanh(y − 1)`.
pub fn transform_sequence<T: Real>(y: &[T]) -> Vec<T> {
    y.iter().map(|v| (*v - T::one()).tanh()).collect()
}

/// `artanh(v) + 1`.
pub fn inverse_transform<T: Real>(v: &[T]) -> Result<Vec<T>, BenchmarkError> {
    v.iter()
        .map(|x| {
            if x.magnitude() >= T::one() || !x.is_finite_value() {
                Err(BenchmarkError::InverseDomain(x.as_f64()))
            } else {
                Ok(x.atanh() + T::one())
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestSequences {
    /// One long attractor; segments alternate free runs with teacher-forced
    /// catch-up from the saved state.
    Segmented,
    /// A fresh sequence for every trial.
    Independent,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NrmseProtocol {
    pub n_trials: usize,
    pub warm_steps: usize,
    pub horizons: Vec<usize>,
    pub mode: TestSequences,
}

impl Default for NrmseProtocol {
    fn default() -> Self {
        Self {
            n_trials: 100,
            warm_steps: 1000,
            horizons: vec![84, 120],
            mode: TestSequences::Segmented,
        }
    }
}

impl NrmseProtocol {
    pub fn free_steps(&self) -> usize {
        self.horizons.iter().copied().max().unwrap_or(0)
    }

    pub fn validate(&self) -> Result<(), BenchmarkError> {
        if self.n_trials == 0 || self.warm_steps == 0 {
            return Err(BenchmarkError::InvalidParams("n_trials and warm_steps must be positive".into()));
        }
        if self.horizons.is_empty() || self.horizons.contains(&0) {
            return Err(BenchmarkError::InvalidParams("horizons must be positive".into()));
        }
        Ok(())
    }

    /// Attractor length needed by the segmented protocol.
    pub fn segmented_length(&self) -> usize {
        self.warm_steps + self.free_steps() * self.n_trials
    }

    /// Length of one sequence in the independent protocol.
    pub fn independent_length(&self) -> usize {
        self.warm_steps + self.free_steps()
    }
}

/// Something that can be teacher-forced along a scalar series and then run
/// freely. Series are `N × 1` matrices.
pub trait Forecaster<T: Real> {
    type State: Clone;

    /// State after teacher forcing from the start of `series` up to index
    /// `t` (inclusive).
    fn warm_up(&self, series: &DMatrix<T>, t: usize) -> Result<Self::State, EsnError>;

    /// Teacher-forces from the state at index `t` to `t + steps`.
    fn advance(&self, state: &Self::State, series: &DMatrix<T>, t: usize, steps: usize) -> Result<Self::State, EsnError>;

    /// Free-running predictions for indices `t+1 ..= t+steps`.
    fn forecast(&self, state: &Self::State, series: &DMatrix<T>, t: usize, steps: usize) -> Result<Vec<T>, EsnError>;
}

/// Reservoir plus readout with noise-free test-time dynamics.
pub struct EsnForecaster<'a, T: Real, R: Readout<T> + ?Sized> {
    pub reservoir: &'a Reservoir<T>,
    pub readout: &'a R,
}

impl<'a, T: Real, R: Readout<T> + ?Sized> Forecaster<T> for EsnForecaster<'a, T, R> {
    type State = Vec<T>;

    fn warm_up(&self, series: &DMatrix<T>, t: usize) -> Result<Vec<T>, EsnError> {
        let x0 = vec![T::zero(); self.reservoir.size()];
        self.advance(&x0, series, 0, t)
    }

    fn advance(&self, state: &Vec<T>, series: &DMatrix<T>, t: usize, steps: usize) -> Result<Vec<T>, EsnError> {
        let inputs = self.reservoir.default_inputs();
        self.reservoir
            .teacher_forced_run(state, &inputs, series, t, steps, Noise::Off)
    }

    fn forecast(&self, state: &Vec<T>, series: &DMatrix<T>, t: usize, steps: usize) -> Result<Vec<T>, EsnError> {
        let inputs: Inputs<T> = self.reservoir.default_inputs();
        let y0 = [series[(t, 0)]];
        let out = self.reservoir.free_run(self.readout, state, &y0, steps, &inputs, t)?;
        Ok(out.into_iter().map(|row| row[0]).collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct BenchmarkReport<T: Real> {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub training_mse: Option<T>,
    pub horizons: Vec<usize>,
    /// Normalizing variance of the test signal.
    pub sigma2: T,
    /// `squared_errors[trial][h]` for `horizons[h]`.
    pub squared_errors: Vec<Vec<T>>,
    /// NRMSE per horizon.
    pub nrmse: Vec<T>,
}

impl<T: Real> BenchmarkReport<T> {
    fn from_errors(horizons: Vec<usize>, sigma2: T, squared_errors: Vec<Vec<T>>) -> Self {
        let n = T::of_usize(squared_errors.len());
        let nrmse = (0..horizons.len())
            .map(|h| {
                let total = squared_errors.iter().fold(T::zero(), |a, row| a + row[h]);
                (total / (n * sigma2)).sqrt()
            })
            .collect();
        Self {
            training_mse: None,
            horizons,
            sigma2,
            squared_errors,
            nrmse,
        }
    }

    pub fn nrmse_at(&self, horizon: usize) -> Option<T> {
        self.horizons.iter().position(|&h| h == horizon).map(|i| self.nrmse[i])
    }

    /// `trial,horizon,squared_error` rows, then summary rows whose `trial`
    /// column names the statistic (`nrmse`, `sigma2`, `training_mse`).
    pub fn write_csv<W: io::Write>(&self, writer: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["trial", "horizon", "squared_error"])?;
        for (trial, row) in self.squared_errors.iter().enumerate() {
            for (h, e) in self.horizons.iter().zip(row) {
                w.write_record([trial.to_string(), h.to_string(), e.to_string()])?;
            }
        }
        for (h, v) in self.horizons.iter().zip(&self.nrmse) {
            w.write_record(["nrmse".to_string(), h.to_string(), v.to_string()])?;
        }
        w.write_record(["sigma2".to_string(), String::new(), self.sigma2.to_string()])?;
        if let Some(mse) = self.training_mse {
            w.write_record(["training_mse".to_string(), String::new(), mse.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

fn column<T: Real>(series: &[T]) -> DMatrix<T> {
    DMatrix::from_column_slice(series.len(), 1, series)
}

/// Segmented protocol over one attractor of length
/// `warm_steps + free_steps · n_trials`; `σ²` is the variance of the whole
/// attractor.
pub fn evaluate_nrmse<T: Real, F: Forecaster<T>>(
    forecaster: &F,
    attractor: &[T],
    protocol: &NrmseProtocol,
) -> Result<BenchmarkReport<T>, BenchmarkError> {
    protocol.validate()?;
    let free = protocol.free_steps();
    if attractor.len() < protocol.segmented_length() {
        return Err(BenchmarkError::InvalidParams(format!(
            "attractor has {} samples, protocol needs {}",
            attractor.len(),
            protocol.segmented_length()
        )));
    }
    let series = column(attractor);
    let sigma2 = variance(attractor);
    let mut t = protocol.warm_steps - 1;
    let mut state = forecaster.warm_up(&series, t)?;
    let mut errors = Vec::with_capacity(protocol.n_trials);
    for trial in 0..protocol.n_trials {
        let predicted = forecaster.forecast(&state, &series, t, free)?;
        errors.push(
            protocol
                .horizons
                .iter()
                .map(|&h| {
                    let e = predicted[h - 1] - attractor[t + h];
                    e * e
                })
                .collect(),
        );
        if trial + 1 < protocol.n_trials {
            state = forecaster.advance(&state, &series, t, free)?;
            t += free;
        }
    }
    Ok(BenchmarkReport::from_errors(protocol.horizons.clone(), sigma2, errors))
}

/// Independent protocol: one sequence per trial, each warmed up from a zero
/// state; `σ²` is the variance over all sequences pooled.
pub fn evaluate_nrmse_independent<T: Real, F: Forecaster<T> + Sync>(
    forecaster: &F,
    sequences: &[Vec<T>],
    protocol: &NrmseProtocol,
) -> Result<BenchmarkReport<T>, BenchmarkError> {
    protocol.validate()?;
    let free = protocol.free_steps();
    if sequences.len() != protocol.n_trials || sequences.iter().any(|s| s.len() < protocol.independent_length()) {
        return Err(BenchmarkError::InvalidParams(format!(
            "need {} sequences of length {}",
            protocol.n_trials,
            protocol.independent_length()
        )));
    }
    let pooled: Vec<T> = sequences.iter().flatten().copied().collect();
    let sigma2 = variance(&pooled);
    let t = protocol.warm_steps - 1;
    let mut errors = Vec::with_capacity(sequences.len());
    for seq in sequences {
        let series = column(seq);
        let state = forecaster.warm_up(&series, t)?;
        let predicted = forecaster.forecast(&state, &series, t, free)?;
        errors.push(
            protocol
                .horizons
                .iter()
                .map(|&h| {
                    let e = predicted[h - 1] - seq[t + h];
                    e * e
                })
                .collect(),
        );
    }
    Ok(BenchmarkReport::from_errors(protocol.horizons.clone(), sigma2, errors))
}

/// Transformed Mackey-Glass test data for one evaluation run.
pub fn mg_test_data<T: Real>(
    params: &MgParams,
    protocol: &NrmseProtocol,
    seed: u64,
) -> Result<Vec<Vec<T>>, BenchmarkError> {
    let to_t = |v: Vec<f64>| transform_sequence(&v.into_iter().map(T::of).collect::<Vec<T>>());
    match protocol.mode {
        TestSequences::Segmented => {
            let p = MgParams {
                length: protocol.segmented_length(),
                ..params.clone()
            };
            Ok(vec![to_t(generate_mg(&p, seed)?)])
        }
        TestSequences::Independent => {
            let p = MgParams {
                length: protocol.independent_length(),
                ..params.clone()
            };
            (0..protocol.n_trials as u64)
                .map(|i| generate_mg(&p, seed.wrapping_add(i)).map(to_t))
                .collect()
        }
    }
}

/// Runs whichever protocol `protocol.mode` selects on data from
/// [`mg_test_data`].
pub fn evaluate_mg<T: Real, F: Forecaster<T> + Sync>(
    forecaster: &F,
    params: &MgParams,
    protocol: &NrmseProtocol,
    seed: u64,
) -> Result<BenchmarkReport<T>, BenchmarkError> {
    let data = mg_test_data::<T>(params, protocol, seed)?;
    match protocol.mode {
        TestSequences::Segmented => evaluate_nrmse(forecaster, &data[0], protocol),
        TestSequences::Independent => evaluate_nrmse_independent(forecaster, &data, protocol),
    }
}

/// Smooth 2-D input trajectory and a smooth 2-D response, both `n × 2`.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorFieldData {
    pub inputs: DMatrix<f64>,
    pub responses: DMatrix<f64>,
}

/// Synthetic multi-output data set: the input wanders along a sum of
/// random sinusoids, and the response is a random smooth map of the input
/// plus Gaussian noise of standard deviation `noise`.
pub fn surrogate_vector_field(n_points: usize, noise: f64, seed: u64) -> VectorFieldData {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut waves = |count: usize| -> Vec<(f64, f64, f64)> {
        (0..count)
            .map(|_| {
                (
                    rng.gen_range(0.2..0.6) / count as f64,
                    rng.gen_range(0.005..0.05),
                    rng.gen_range(0.0..std::f64::consts::TAU),
                )
            })
            .collect()
    };
    let wx = waves(3);
    let wy = waves(3);
    let trace = |w: &[(f64, f64, f64)], k: f64| w.iter().map(|(a, f, p)| a * (f * k + p).sin()).sum::<f64>();
    let a: Vec<f64> = (0..8).map(|_| rng.gen_range(-1.5..1.5)).collect();
    let inputs = DMatrix::from_fn(n_points, 2, |k, j| {
        let w = if j == 0 { &wx } else { &wy };
        trace(w, k as f64)
    });
    let mut responses = DMatrix::from_fn(n_points, 2, |k, j| {
        let (u, v) = (inputs[(k, 0)], inputs[(k, 1)]);
        let o = 4 * j;
        0.5 * (a[o] * u + a[o + 1] * v).tanh() + 0.3 * (a[o + 2] * u * v + a[o + 3]).sin()
    });
    if noise > 0.0 {
        for v in responses.iter_mut() {
            let (u1, u2): (f64, f64) = (rng.gen_range(f64::EPSILON..1.0), rng.gen());
            *v += noise * (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos();
        }
    }
    VectorFieldData { inputs, responses }
}
