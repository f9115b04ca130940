//! Trained maps from reservoir features to outputs.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::esn::StateHarvest;
use crate::linalg::{least_squares, mean};
use crate::persistence::matrix_serde;
use crate::rbf::RbfReadout;
use crate::scalar::Real;
use crate::selection::{lrofr_fit, LrofrFit, LrofrOptions, RegressionProblem, SelectionError};

/// Anything that maps a feature row to an output row.
pub trait Readout<T> {
    fn feature_dim(&self) -> usize;
    fn output_dim(&self) -> usize;
    fn predict_into(&self, features: &[T], out: &mut [T]);

    fn predict(&self, features: &[T]) -> Vec<T>
    where
        T: Real,
    {
        let mut out = vec![T::zero(); self.output_dim()];
        self.predict_into(features, &mut out);
        out
    }
}

/// `y = W f + offset`, optionally restricted to a subset of the features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct LinearReadout<T: Real> {
    /// `P × |features used|`.
    #[serde(with = "matrix_serde")]
    pub weights: DMatrix<T>,
    pub offsets: Vec<T>,
    pub feature_dim: usize,
    /// Feature indices matching the weight columns; `None` means all.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub feature_indices: Option<Vec<usize>>,
}

impl<T: Real> Readout<T> for LinearReadout<T> {
    fn feature_dim(&self) -> usize {
        self.feature_dim
    }

    fn output_dim(&self) -> usize {
        self.weights.nrows()
    }

    fn predict_into(&self, features: &[T], out: &mut [T]) {
        for (p, o) in out.iter_mut().enumerate() {
            let mut acc = T::zero();
            match &self.feature_indices {
                None => {
                    for (j, f) in features.iter().enumerate() {
                        acc += self.weights[(p, j)] * *f;
                    }
                }
                Some(idx) => {
                    for (j, &k) in idx.iter().enumerate() {
                        acc += self.weights[(p, j)] * features[k];
                    }
                }
            }
            *o = acc + self.offsets[p];
        }
    }
}

/// Linear readout whose weights came out of locally regularized selection.
/// Weights are stored in the original feature order; unselected features
/// carry exact zeros.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct RegularizedLinearReadout<T: Real> {
    /// `P × D`, original feature order.
    #[serde(with = "matrix_serde")]
    pub weights: DMatrix<T>,
    pub offsets: Vec<T>,
    /// Per output: final λ for every feature (original order).
    pub lambdas: Vec<Vec<T>>,
    /// Per output: feature indices in the order they were selected.
    pub selection_order: Vec<Vec<usize>>,
}

impl<T: Real> Readout<T> for RegularizedLinearReadout<T> {
    fn feature_dim(&self) -> usize {
        self.weights.ncols()
    }

    fn output_dim(&self) -> usize {
        self.weights.nrows()
    }

    fn predict_into(&self, features: &[T], out: &mut [T]) {
        for (p, o) in out.iter_mut().enumerate() {
            let mut acc = T::zero();
            for (j, f) in features.iter().enumerate() {
                let w = self.weights[(p, j)];
                if w != T::zero() {
                    acc += w * *f;
                }
            }
            *o = acc + self.offsets[p];
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", bound = "T: Real")]
pub enum ReadoutModel<T: Real> {
    Linear(LinearReadout<T>),
    RegularizedLinear(RegularizedLinearReadout<T>),
    /// One RBF network per output component.
    Rbf { outputs: Vec<RbfReadout<T>> },
}

impl<T: Real> ReadoutModel<T> {
    pub fn kind(&self) -> &'static str {
        match self {
            ReadoutModel::Linear(_) => "linear",
            ReadoutModel::RegularizedLinear(_) => "lrofr-linear",
            ReadoutModel::Rbf { .. } => "rbf-dopt",
        }
    }

    /// Number of nonzero terms across all outputs.
    pub fn term_count(&self) -> usize {
        match self {
            ReadoutModel::Linear(r) => r.weights.iter().filter(|w| **w != T::zero()).count(),
            ReadoutModel::RegularizedLinear(r) => r.weights.iter().filter(|w| **w != T::zero()).count(),
            ReadoutModel::Rbf { outputs } => outputs.iter().map(|o| o.centers.len()).sum(),
        }
    }
}

impl<T: Real> Readout<T> for ReadoutModel<T> {
    fn feature_dim(&self) -> usize {
        match self {
            ReadoutModel::Linear(r) => r.feature_dim(),
            ReadoutModel::RegularizedLinear(r) => r.feature_dim(),
            ReadoutModel::Rbf { outputs } => outputs.first().map_or(0, |o| o.dim()),
        }
    }

    fn output_dim(&self) -> usize {
        match self {
            ReadoutModel::Linear(r) => r.output_dim(),
            ReadoutModel::RegularizedLinear(r) => r.output_dim(),
            ReadoutModel::Rbf { outputs } => outputs.len(),
        }
    }

    fn predict_into(&self, features: &[T], out: &mut [T]) {
        match self {
            ReadoutModel::Linear(r) => r.predict_into(features, out),
            ReadoutModel::RegularizedLinear(r) => r.predict_into(features, out),
            ReadoutModel::Rbf { outputs } => {
                for (o, rbf) in out.iter_mut().zip(outputs) {
                    *o = rbf.predict(features);
                }
            }
        }
    }
}

/// Reorders `weights` (original order) into selection order.
pub fn to_selection_order<T: Copy>(weights: &[T], order: &[usize]) -> Vec<T> {
    order.iter().map(|&i| weights[i]).collect()
}

/// Scatters selection-ordered weights back to original positions; features
/// not in `order` get zero.
pub fn to_original_order<T: Real>(selected: &[T], order: &[usize], n_features: usize) -> Vec<T> {
    let mut out = vec![T::zero(); n_features];
    for (&i, &w) in order.iter().zip(selected) {
        out[i] = w;
    }
    out
}

fn target_column<T: Real>(targets: &DMatrix<T>, p: usize) -> DVector<T> {
    targets.column(p).into_owned()
}

/// Ordinary least squares on the centered targets; the target mean becomes
/// the offset.
pub fn fit_linear<T: Real>(harvest: &StateHarvest<T>) -> LinearReadout<T> {
    let p = harvest.targets.ncols();
    let d = harvest.states.ncols();
    let mut weights = DMatrix::zeros(p, d);
    let mut offsets = Vec::with_capacity(p);
    for j in 0..p {
        let y = target_column(&harvest.targets, j);
        let offset = mean(y.as_slice());
        let centered = y.add_scalar(-offset);
        let beta = least_squares(&harvest.states, &centered);
        weights.row_mut(j).copy_from(&beta.transpose());
        offsets.push(offset);
    }
    LinearReadout {
        weights,
        offsets,
        feature_dim: d,
        feature_indices: None,
    }
}

/// Locally regularized linear readout: one independent selection per
/// output component.
pub fn fit_lrofr_linear<T: Real>(
    harvest: &StateHarvest<T>,
    options: &LrofrOptions<T>,
) -> Result<(RegularizedLinearReadout<T>, Vec<LrofrFit<T>>), SelectionError> {
    let p = harvest.targets.ncols();
    let d = harvest.states.ncols();
    let fits = (0..p)
        .into_par_iter()
        .map(|j| {
            let problem = RegressionProblem::new(harvest.states.clone(), target_column(&harvest.targets, j))?;
            lrofr_fit(&problem, options)
        })
        .collect::<Result<Vec<_>, _>>()?;
    let mut weights = DMatrix::zeros(p, d);
    for (j, fit) in fits.iter().enumerate() {
        weights.row_mut(j).copy_from(&fit.full_weights().transpose());
    }
    let readout = RegularizedLinearReadout {
        weights,
        offsets: fits.iter().map(|f| f.response_offset).collect(),
        lambdas: fits.iter().map(|f| f.regularization.lambdas.clone()).collect(),
        selection_order: fits.iter().map(|f| f.selected().to_vec()).collect(),
    };
    Ok((readout, fits))
}

/// Mean squared error over all rows and outputs.
pub fn training_mse<T: Real, R: Readout<T> + ?Sized>(readout: &R, harvest: &StateHarvest<T>) -> T {
    let n = harvest.states.nrows();
    let p = harvest.targets.ncols();
    let mut row = vec![T::zero(); harvest.states.ncols()];
    let mut out = vec![T::zero(); p];
    let mut total = T::zero();
    for k in 0..n {
        for (j, v) in row.iter_mut().enumerate() {
            *v = harvest.states[(k, j)];
        }
        readout.predict_into(&row, &mut out);
        for j in 0..p {
            let e = out[j] - harvest.targets[(k, j)];
            total += e * e;
        }
    }
    total / T::of_usize(n * p)
}
