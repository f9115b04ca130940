//! RBF readouts: every training state is a candidate centre, and the
//! D-optimality variant of regularized forward selection prunes them.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::scalar::Real;
use crate::selection::{lrofr_dopt_fit, LrofrFit, LrofrOptions, RegressionProblem, SelectionError};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum RbfError {
    #[error(transparent)]
    Selection(#[from] SelectionError),
    #[error("no centres survived selection")]
    EmptyModel,
    #[error("invalid RBF spec: {0}")]
    InvalidSpec(String),
    #[error("{states} state rows but {response} responses")]
    LengthMismatch { states: usize, response: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RbfKernel<T> {
    /// `exp(−χ² / υ²)`.
    Gaussian { variance: T },
    /// `χ² ln χ`, zero at `χ = 0`.
    ThinPlateSpline,
}

impl<T: Real> RbfKernel<T> {
    /// Kernel value at squared distance `chi_sq`.
    pub fn eval_sq(&self, chi_sq: T) -> T {
        match *self {
            RbfKernel::Gaussian { variance } => (-chi_sq / (variance * variance)).exp(),
            RbfKernel::ThinPlateSpline => {
                if chi_sq == T::zero() {
                    T::zero()
                } else {
                    // χ² ln χ = ½ χ² ln χ²
                    T::of(0.5) * chi_sq * chi_sq.ln()
                }
            }
        }
    }

    pub fn eval(&self, chi: T) -> T {
        self.eval_sq(chi * chi)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CenterSource {
    AllTrainingPoints,
    Subsample { stride: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct RbfSpec<T: Real> {
    pub kernel: RbfKernel<T>,
    pub dopt_beta: T,
    pub center_source: CenterSource,
}

impl<T: Real> RbfSpec<T> {
    pub fn gaussian(variance: f64, dopt_beta: f64) -> Self {
        Self {
            kernel: RbfKernel::Gaussian {
                variance: T::of(variance),
            },
            dopt_beta: T::of(dopt_beta),
            center_source: CenterSource::AllTrainingPoints,
        }
    }

    pub fn validate(&self) -> Result<(), RbfError> {
        if let RbfKernel::Gaussian { variance } = self.kernel {
            if !(variance > T::zero()) {
                return Err(RbfError::InvalidSpec(format!("variance {variance} must be positive")));
            }
        }
        if !(self.dopt_beta > T::zero()) {
            return Err(RbfError::InvalidSpec(format!("dopt_beta {} must be positive", self.dopt_beta)));
        }
        if let CenterSource::Subsample { stride: 0 } = self.center_source {
            return Err(RbfError::InvalidSpec("stride must be at least 1".into()));
        }
        Ok(())
    }

    /// Row indices of `states` that become candidate centres.
    pub fn center_rows(&self, n: usize) -> Vec<usize> {
        match self.center_source {
            CenterSource::AllTrainingPoints => (0..n).collect(),
            CenterSource::Subsample { stride } => (0..n).step_by(stride.max(1)).collect(),
        }
    }
}

/// Fitted single-output RBF network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct RbfReadout<T: Real> {
    pub kernel: RbfKernel<T>,
    pub centers: Vec<Vec<T>>,
    pub weights: Vec<T>,
    pub output_offset: T,
}

impl<T: Real> RbfReadout<T> {
    pub fn dim(&self) -> usize {
        self.centers.first().map_or(0, Vec::len)
    }

    /// `Σ θ_i φ(‖x − c_i‖) + offset`.
    pub fn predict(&self, x: &[T]) -> T {
        let mut acc = T::zero();
        for (c, w) in self.centers.iter().zip(&self.weights) {
            acc += *w * self.kernel.eval_sq(squared_distance(x, c));
        }
        acc + self.output_offset
    }
}

fn squared_distance<T: Real>(a: &[T], b: &[T]) -> T {
    let mut s = T::zero();
    for (x, y) in a.iter().zip(b) {
        let d = *x - *y;
        s += d * d;
    }
    s
}

fn rows<T: Real>(m: &DMatrix<T>) -> Vec<Vec<T>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

/// `Φ[k][i] = φ(‖x(k) − c_i‖)` with centres taken from the rows of
/// `states` chosen by the spec.
pub fn build_candidate_matrix<T: Real>(states: &DMatrix<T>, spec: &RbfSpec<T>) -> DMatrix<T> {
    let points = rows(states);
    let centers = spec.center_rows(points.len());
    let columns: Vec<Vec<T>> = centers
        .par_iter()
        .map(|&c| {
            points
                .iter()
                .map(|x| spec.kernel.eval_sq(squared_distance(x, &points[c])))
                .collect()
        })
        .collect();
    DMatrix::from_fn(points.len(), centers.len(), |k, i| columns[i][k])
}

/// Builds the candidate matrix and prunes it with D-optimality selection.
pub fn fit_rbf_readout<T: Real>(
    states: &DMatrix<T>,
    response: &DVector<T>,
    spec: &RbfSpec<T>,
    options: &LrofrOptions<T>,
) -> Result<(RbfReadout<T>, LrofrFit<T>), RbfError> {
    spec.validate()?;
    if states.nrows() != response.len() {
        return Err(RbfError::LengthMismatch {
            states: states.nrows(),
            response: response.len(),
        });
    }
    let phi = build_candidate_matrix(states, spec);
    let center_rows = spec.center_rows(states.nrows());
    let problem = RegressionProblem::new(phi, response.clone())?;
    let fit = lrofr_dopt_fit(&problem, spec.dopt_beta, options)?;
    if fit.selected().is_empty() {
        return Err(RbfError::EmptyModel);
    }
    let weights = fit.weights();
    let readout = RbfReadout {
        kernel: spec.kernel,
        centers: fit
            .selected()
            .iter()
            .map(|&i| states.row(center_rows[i]).iter().copied().collect())
            .collect(),
        weights: weights.iter().copied().collect(),
        output_offset: fit.response_offset,
    };
    Ok((readout, fit))
}
