//! Small dense helpers used across modules.

use nalgebra::{DMatrix, DVector};

use crate::scalar::Real;

pub(crate) fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = T::zero();
    for (x, y) in a.iter().zip(b) {
        acc += *x * *y;
    }
    acc
}

/// `y -= alpha * x`
pub(crate) fn sub_scaled<T: Real>(y: &mut [T], alpha: T, x: &[T]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi -= alpha * *xi;
    }
}

/// Solves `R x = b` for upper triangular `R` by back-substitution.
pub fn back_substitute<T: Real>(r: &DMatrix<T>, b: &DVector<T>) -> DVector<T> {
    let n = b.len();
    assert_eq!(r.nrows(), n);
    assert_eq!(r.ncols(), n);
    let mut x = DVector::zeros(n);
    for i in (0..n).rev() {
        let mut acc = b[i];
        for j in i + 1..n {
            acc -= r[(i, j)] * x[j];
        }
        x[i] = acc / r[(i, i)];
    }
    x
}

/// Minimum-norm least-squares solution of `A x ≈ b` via SVD.
pub fn least_squares<T: Real>(a: &DMatrix<T>, b: &DVector<T>) -> DVector<T> {
    let svd = a.clone().svd(true, true);
    let max_sv = svd.singular_values.max();
    let eps = T::default_epsilon() * T::of_usize(a.nrows().max(a.ncols())) * max_sv;
    svd.solve(b, eps).expect("SVD computed with both factors")
}

pub fn mean<T: Real>(values: &[T]) -> T {
    let mut acc = T::zero();
    for v in values {
        acc += *v;
    }
    acc / T::of_usize(values.len())
}

/// Population variance.
pub fn variance<T: Real>(values: &[T]) -> T {
    let m = mean(values);
    let mut acc = T::zero();
    for v in values {
        acc += (*v - m) * (*v - m);
    }
    acc / T::of_usize(values.len())
}
