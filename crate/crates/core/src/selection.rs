//! Orthogonal forward regression (OFR) and its locally regularized variants.
//!
//! Candidate regressors are the columns of a design matrix. Each forward pass
//! orthogonalizes the remaining candidates against the regressors already
//! chosen (modified Gram-Schmidt, updated in place after every selection) and
//! appends the candidate with the largest reduction ratio:
//!
//! * `err  = g² qᵀq / yᵀy` with `g = qᵀy / qᵀq` (plain OFR),
//! * `rerr = g² (qᵀq + λ) / yᵀy` with `g = qᵀy / (qᵀq + λ)` (LROFR),
//! * `crerr = (g² (qᵀq + λ) + β ln qᵀq) / yᵀy` (LROFR with D-optimality).
//!
//! LROFR alternates forward passes with a Bayesian evidence update of the
//! per-regressor regularization parameters λ, each pass selecting from the
//! sub-model produced by the previous one.

use std::fmt;
use std::io;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::linalg::{back_substitute, dot, sub_scaled};
use crate::scalar::Real;

/// Lower clamp for regularization parameters.
pub const LAMBDA_FLOOR: f64 = 1e-12;
/// Upper clamp for regularization parameters; a regressor at the ceiling is
/// effectively removed from the model.
pub const LAMBDA_CEILING: f64 = 1e12;
/// A candidate whose orthogonalized energy drops below this fraction of its
/// original energy is treated as collinear with the selected set.
pub const DEGENERACY_FLOOR: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SelectionError {
    #[error("regression needs at least 2 samples, got {0}")]
    TooFewSamples(usize),
    #[error("design matrix has no candidate columns")]
    NoCandidates,
    #[error("response has {response} rows but the design has {design}")]
    LengthMismatch { design: usize, response: usize },
    #[error("design or response contains non-finite values")]
    NonFinite,
    #[error("response is constant; nothing to explain")]
    ConstantResponse,
    #[error("every candidate regressor is degenerate")]
    AllCandidatesDegenerate,
    #[error("tolerance must lie in (0, 1), got {0}")]
    InvalidTolerance(f64),
    #[error("initial regularization must be positive, got {0}")]
    InvalidLambda(f64),
    #[error("D-optimality weight must be positive, got {0}")]
    InvalidBeta(f64),
    #[error("D-optimality weight {0} is too large: the first pass selected nothing")]
    BetaTooLarge(f64),
}

/// Design matrix plus centered response.
#[derive(Debug, Clone)]
pub struct RegressionProblem<T: Real> {
    design: DMatrix<T>,
    response: DVector<T>,
    response_offset: T,
    response_energy: T,
}

impl<T: Real> RegressionProblem<T> {
    /// Builds a problem, removing the response mean (kept as `response_offset`).
    pub fn new(design: DMatrix<T>, response: DVector<T>) -> Result<Self, SelectionError> {
        let (n, m) = design.shape();
        if n < 2 {
            return Err(SelectionError::TooFewSamples(n));
        }
        if m == 0 {
            return Err(SelectionError::NoCandidates);
        }
        if response.len() != n {
            return Err(SelectionError::LengthMismatch {
                design: n,
                response: response.len(),
            });
        }
        if !design.iter().chain(response.iter()).all(|v| v.is_finite_value()) {
            return Err(SelectionError::NonFinite);
        }
        let offset = response.mean();
        let centered = response.map(|v| v - offset);
        let energy = centered.norm_squared();
        if energy <= T::zero() {
            return Err(SelectionError::ConstantResponse);
        }
        Ok(Self {
            design,
            response: centered,
            response_offset: offset,
            response_energy: energy,
        })
    }

    pub fn design(&self) -> &DMatrix<T> {
        &self.design
    }

    /// The centered response.
    pub fn response(&self) -> &DVector<T> {
        &self.response
    }

    pub fn response_offset(&self) -> T {
        self.response_offset
    }

    /// `yᵀy` of the centered response.
    pub fn response_energy(&self) -> T {
        self.response_energy
    }

    pub fn n_samples(&self) -> usize {
        self.design.nrows()
    }

    pub fn n_candidates(&self) -> usize {
        self.design.ncols()
    }
}

/// Which reduction ratio drives a forward pass.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Criterion {
    Err,
    Rerr,
    Crerr,
}

impl fmt::Display for Criterion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Criterion::Err => "err",
            Criterion::Rerr => "rerr",
            Criterion::Crerr => "crerr",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    /// Every usable candidate was selected.
    AllSelected,
    /// The unexplained variance ratio fell below the tolerance.
    Tolerance,
    /// Every remaining candidate had a non-positive combined ratio.
    NonpositiveCrerr,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SelectionStep<T> {
    pub candidate: usize,
    pub criterion: T,
    pub unexplained: T,
}

/// Ordered record of one forward pass.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct SelectionTrace<T: Real> {
    pub steps: Vec<SelectionStep<T>>,
    pub criterion: Criterion,
    pub terminated_by: Termination,
    /// Candidates skipped because their orthogonalized energy fell below the
    /// degeneracy floor, in the order they were detected.
    pub degenerate: Vec<usize>,
}

impl<T: Real> SelectionTrace<T> {
    pub fn selected(&self) -> Vec<usize> {
        self.steps.iter().map(|s| s.candidate).collect()
    }

    pub fn final_unexplained(&self) -> Option<T> {
        self.steps.last().map(|s| s.unexplained)
    }

    /// Writes `step,candidate_index,criterion,cumulative_unexplained_ratio`.
    pub fn write_csv<W: io::Write>(&self, writer: W) -> csv::Result<()> {
        let mut out = csv::Writer::from_writer(writer);
        out.write_record(["step", "candidate_index", "criterion", "cumulative_unexplained_ratio"])?;
        for (k, step) in self.steps.iter().enumerate() {
            out.write_record(&[
                (k + 1).to_string(),
                step.candidate.to_string(),
                step.criterion.to_string(),
                step.unexplained.to_string(),
            ])?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Unexplained variance ratio after each step, `1 − Σ_{i≤k} criterionᵢ`.
pub fn unexplained_variance_curve<T: Real>(trace: &SelectionTrace<T>) -> Vec<(usize, T)> {
    let mut remaining = T::one();
    trace
        .steps
        .iter()
        .enumerate()
        .map(|(k, step)| {
            remaining -= step.criterion;
            (k + 1, remaining)
        })
        .collect()
}

/// Orthogonal decomposition `X_S = Q R` of the selected columns together
/// with the (possibly regularized) orthogonal-space weights.
#[derive(Debug, Clone)]
pub struct OrthogonalState<T: Real> {
    selected: Vec<usize>,
    q: Vec<DVector<T>>,
    r: DMatrix<T>,
    g: DVector<T>,
    lambdas: DVector<T>,
    residual: DVector<T>,
    response_energy: T,
}

impl<T: Real> OrthogonalState<T> {
    /// Original column indices, in selection order.
    pub fn selected(&self) -> &[usize] {
        &self.selected
    }

    /// Orthogonalized columns `q_i`, in selection order.
    pub fn q(&self) -> &[DVector<T>] {
        &self.q
    }

    /// Unit upper-triangular coefficients with `X_S = Q R`.
    pub fn r(&self) -> &DMatrix<T> {
        &self.r
    }

    pub fn g(&self) -> &DVector<T> {
        &self.g
    }

    /// Regularization used for each selected regressor (zero for plain OFR).
    pub fn lambdas(&self) -> &DVector<T> {
        &self.lambdas
    }

    pub fn residual(&self) -> &DVector<T> {
        &self.residual
    }

    pub fn response_energy(&self) -> T {
        self.response_energy
    }

    pub fn q_norms_sq(&self) -> Vec<T> {
        self.q.iter().map(|q| q.norm_squared()).collect()
    }

    /// Weights in the original regressor space, solving `R β = g`.
    pub fn weights(&self) -> DVector<T> {
        back_substitute(&self.r, &self.g)
    }

    /// Weights scattered back to the original column order; unselected
    /// columns get zero.
    pub fn full_weights(&self, n_candidates: usize) -> DVector<T> {
        let beta = self.weights();
        let mut full = DVector::zeros(n_candidates);
        for (k, &idx) in self.selected.iter().enumerate() {
            full[idx] = beta[k];
        }
        full
    }

    /// Recomputes `g` and the residual for the same selected set under new
    /// regularization values (one per selected regressor, selection order).
    pub fn refit(&self, response: &DVector<T>, lambdas: &[T]) -> Self {
        assert_eq!(lambdas.len(), self.selected.len());
        let mut residual = response.clone();
        let mut g = DVector::zeros(self.selected.len());
        for (k, q) in self.q.iter().enumerate() {
            g[k] = q.dot(response) / (q.norm_squared() + lambdas[k]);
            residual.axpy(-g[k], q, T::one());
        }
        Self {
            selected: self.selected.clone(),
            q: self.q.clone(),
            r: self.r.clone(),
            g,
            lambdas: DVector::from_column_slice(lambdas),
            residual,
            response_energy: self.response_energy,
        }
    }

    /// Largest `|q_iᵀq_j| / (‖q_i‖‖q_j‖)` over distinct pairs.
    pub fn orthogonality_defect(&self) -> T {
        let mut worst = T::zero();
        for i in 0..self.q.len() {
            for j in i + 1..self.q.len() {
                let c = self.q[i].dot(&self.q[j]).magnitude() / (self.q[i].norm() * self.q[j].norm());
                if c > worst {
                    worst = c;
                }
            }
        }
        worst
    }
}

#[derive(Debug, Clone, Copy)]
struct PassRule<T> {
    criterion: Criterion,
    tolerance: Option<T>,
    beta: T,
}

struct Candidate<T> {
    index: usize,
    w: Vec<T>,
    energy0: T,
    coef: Vec<T>,
    active: bool,
}

fn ratio<T: Real>(criterion: Criterion, wy: T, ww: T, lambda: T, beta: T, yty: T) -> T {
    match criterion {
        Criterion::Err => wy * wy / (ww * yty),
        Criterion::Rerr => wy * wy / ((ww + lambda) * yty),
        Criterion::Crerr => {
            let g = wy / (ww + lambda);
            (g * g * (ww + lambda) + beta * ww.ln()) / yty
        }
    }
}

/// One forward pass over `candidates` (sorted original column indices).
/// `lambdas` is indexed by original column.
fn forward_pass<T: Real>(
    problem: &RegressionProblem<T>,
    candidates: &[usize],
    lambdas: &[T],
    rule: PassRule<T>,
) -> Result<(SelectionTrace<T>, OrthogonalState<T>), SelectionError> {
    let n = problem.n_samples();
    let yty = problem.response_energy();
    let floor = T::of(DEGENERACY_FLOOR);
    let regularized = rule.criterion != Criterion::Err;

    let mut pool: Vec<Candidate<T>> = candidates
        .iter()
        .map(|&index| {
            let w: Vec<T> = problem.design.column(index).iter().copied().collect();
            let energy0 = dot(&w, &w);
            Candidate {
                index,
                w,
                energy0,
                coef: Vec::new(),
                active: true,
            }
        })
        .collect();

    let mut residual: Vec<T> = problem.response.iter().copied().collect();
    let mut q: Vec<Vec<T>> = Vec::new();
    let mut qq: Vec<T> = Vec::new();
    let mut r_columns: Vec<Vec<T>> = Vec::new();
    let mut g: Vec<T> = Vec::new();
    let mut used_lambdas: Vec<T> = Vec::new();
    let mut selected: Vec<usize> = Vec::new();
    let mut steps = Vec::new();
    let mut degenerate = Vec::new();
    let mut remaining = T::one();
    let mut terminated_by = Termination::AllSelected;

    loop {
        let scores: Vec<Option<(T, T)>> = pool
            .par_iter()
            .map(|c| {
                if !c.active {
                    return None;
                }
                Some((dot(&c.w, &c.w), dot(&c.w, &residual)))
            })
            .collect();

        let mut best: Option<(usize, T)> = None;
        for (slot, score) in scores.iter().enumerate() {
            let Some((ww, wy)) = *score else { continue };
            let cand = &mut pool[slot];
            if !(ww >= floor * cand.energy0) || cand.energy0 <= T::zero() {
                cand.active = false;
                degenerate.push(cand.index);
                continue;
            }
            let lambda = if regularized { lambdas[cand.index] } else { T::zero() };
            let value = ratio(rule.criterion, wy, ww, lambda, rule.beta, yty);
            // Strict comparison keeps the lowest original index on ties.
            if best.map_or(true, |(_, b)| value > b) {
                best = Some((slot, value));
            }
        }

        let Some((slot, value)) = best else {
            break;
        };
        if rule.criterion == Criterion::Crerr && value <= T::zero() {
            terminated_by = Termination::NonpositiveCrerr;
            break;
        }

        let chosen = &mut pool[slot];
        chosen.active = false;
        let mut qk = std::mem::take(&mut chosen.w);
        let mut rk = std::mem::take(&mut chosen.coef);
        rk.resize(q.len(), T::zero());
        // Second Gram-Schmidt sweep against the selected set.
        for (i, qi) in q.iter().enumerate() {
            let c = dot(qi, &qk) / qq[i];
            sub_scaled(&mut qk, c, qi);
            rk[i] += c;
        }
        let qk_energy = dot(&qk, &qk);
        let lambda = if regularized { lambdas[chosen.index] } else { T::zero() };
        let gk = dot(&qk, &residual) / (qk_energy + lambda);
        sub_scaled(&mut residual, gk, &qk);

        let recorded = match rule.criterion {
            Criterion::Err => gk * gk * qk_energy / yty,
            Criterion::Rerr => gk * gk * (qk_energy + lambda) / yty,
            Criterion::Crerr => (gk * gk * (qk_energy + lambda) + rule.beta * qk_energy.ln()) / yty,
        };
        remaining -= recorded;
        steps.push(SelectionStep {
            candidate: chosen.index,
            criterion: recorded,
            unexplained: remaining,
        });
        selected.push(chosen.index);
        used_lambdas.push(lambda);
        g.push(gk);
        r_columns.push(rk);

        pool.par_iter_mut().filter(|c| c.active).for_each(|c| {
            let coef = dot(&qk, &c.w) / qk_energy;
            sub_scaled(&mut c.w, coef, &qk);
            c.coef.push(coef);
        });
        q.push(qk);
        qq.push(qk_energy);

        if let Some(xi) = rule.tolerance {
            if rule.criterion != Criterion::Crerr && remaining < xi {
                terminated_by = Termination::Tolerance;
                break;
            }
        }
    }

    if selected.is_empty() && pool.iter().all(|c| degenerate.contains(&c.index)) {
        return Err(SelectionError::AllCandidatesDegenerate);
    }

    let k = selected.len();
    let mut r = DMatrix::identity(k, k);
    for (j, col) in r_columns.iter().enumerate() {
        for (i, &v) in col.iter().enumerate() {
            r[(i, j)] = v;
        }
    }
    let state = OrthogonalState {
        selected,
        q: q.into_iter().map(|v| DVector::from_vec(v)).collect(),
        r,
        g: DVector::from_vec(g),
        lambdas: DVector::from_vec(used_lambdas),
        residual: DVector::from_vec(residual),
        response_energy: yty,
    };
    debug_assert_eq!(state.residual.len(), n);
    Ok((
        SelectionTrace {
            steps,
            criterion: rule.criterion,
            terminated_by,
            degenerate,
        },
        state,
    ))
}

fn check_tolerance<T: Real>(tolerance: Option<T>) -> Result<(), SelectionError> {
    if let Some(xi) = tolerance {
        if !(xi > T::zero() && xi < T::one()) {
            return Err(SelectionError::InvalidTolerance(xi.as_f64()));
        }
    }
    Ok(())
}

/// Plain OFR. Without a tolerance every usable column is selected, which is
/// the analysis mode used to inspect regressor importance.
pub fn ofr_select<T: Real>(
    problem: &RegressionProblem<T>,
    tolerance: Option<T>,
) -> Result<(SelectionTrace<T>, OrthogonalState<T>), SelectionError> {
    check_tolerance(tolerance)?;
    let candidates: Vec<usize> = (0..problem.n_candidates()).collect();
    let zeros = vec![T::zero(); problem.n_candidates()];
    forward_pass(
        problem,
        &candidates,
        &zeros,
        PassRule {
            criterion: Criterion::Err,
            tolerance,
            beta: T::zero(),
        },
    )
}

/// Per-regressor regularization parameters, indexed by original column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct RegularizationVector<T: Real> {
    pub lambdas: Vec<T>,
    pub iteration_count: usize,
    pub converged: bool,
}

impl<T: Real> RegularizationVector<T> {
    pub fn uniform(n: usize, lambda: T) -> Self {
        Self {
            lambdas: vec![lambda; n],
            iteration_count: 0,
            converged: false,
        }
    }

    /// Number of regressors whose λ is at least `threshold`.
    pub fn count_at_least(&self, threshold: T) -> usize {
        self.lambdas.iter().filter(|&&l| l >= threshold).count()
    }
}

/// Evidence (type-II maximum likelihood) re-estimate of λ for the
/// regressors of a fitted sub-model:
///
/// `γᵢ = qᵢᵀqᵢ / (qᵢᵀqᵢ + λᵢ)`, `σ² = eᵀe / (N − Σγ)`, `λᵢ' = γᵢ σ² / gᵢ²`,
///
/// clamped to `[LAMBDA_FLOOR, LAMBDA_CEILING]`. A vanishing `gᵢ` sends λᵢ to
/// the ceiling. Entries for columns outside the sub-model are left as is.
pub fn evidence_update<T: Real>(
    state: &OrthogonalState<T>,
    lambdas: &RegularizationVector<T>,
    n_samples: usize,
) -> RegularizationVector<T> {
    let floor = T::of(LAMBDA_FLOOR);
    let ceiling = T::of(LAMBDA_CEILING);
    let qq = state.q_norms_sq();
    let gammas: Vec<T> = state
        .selected
        .iter()
        .zip(&qq)
        .map(|(&idx, &e)| e / (e + lambdas.lambdas[idx]))
        .collect();
    let gamma_sum = gammas.iter().fold(T::zero(), |a, &b| a + b);
    let dof = (T::of_usize(n_samples) - gamma_sum).max(T::default_epsilon());
    let sigma2 = state.residual.norm_squared() / dof;

    let mut updated = lambdas.clone();
    for (k, &idx) in state.selected.iter().enumerate() {
        let g2 = state.g[k] * state.g[k];
        let proposal = gammas[k] * sigma2 / g2;
        updated.lambdas[idx] = if g2 > T::zero() && proposal.is_finite_value() {
            proposal.max(floor).min(ceiling)
        } else {
            ceiling
        };
    }
    updated.iteration_count = lambdas.iteration_count + 1;
    updated
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real", default)]
pub struct LrofrOptions<T> {
    pub initial_lambda: T,
    pub max_outer_iters: usize,
    pub lambda_rel_tol: T,
    /// Per-pass stopping tolerance on the unexplained ratio (ignored by the
    /// D-optimality variant, which self-terminates).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<T>,
}

impl<T: Real> Default for LrofrOptions<T> {
    fn default() -> Self {
        Self {
            initial_lambda: T::of(0.01),
            max_outer_iters: 10,
            lambda_rel_tol: T::of(1e-3),
            tolerance: None,
        }
    }
}

/// Result of an LROFR run.
#[derive(Debug, Clone)]
pub struct LrofrFit<T: Real> {
    /// One trace per outer iteration; the first doubles as an OFR analysis.
    pub traces: Vec<SelectionTrace<T>>,
    /// The λ values the final pass used, so `weights` is the regularized
    /// solution at exactly these values.
    pub regularization: RegularizationVector<T>,
    /// State of the final pass.
    pub state: OrthogonalState<T>,
    pub n_candidates: usize,
    pub response_offset: T,
}

impl<T: Real> LrofrFit<T> {
    pub fn selected(&self) -> &[usize] {
        self.state.selected()
    }

    /// Weights of the selected regressors, in selection order.
    pub fn weights(&self) -> DVector<T> {
        self.state.weights()
    }

    /// Weights re-ordered to the original regressor order.
    pub fn full_weights(&self) -> DVector<T> {
        self.state.full_weights(self.n_candidates)
    }

    /// Writes `regressor_index,lambda,weight` in original regressor order.
    pub fn write_lambda_csv<W: io::Write>(&self, writer: W) -> csv::Result<()> {
        let weights = self.full_weights();
        let mut out = csv::Writer::from_writer(writer);
        out.write_record(["regressor_index", "lambda", "weight"])?;
        for (i, lambda) in self.regularization.lambdas.iter().enumerate() {
            out.write_record(&[i.to_string(), lambda.to_string(), weights[i].to_string()])?;
        }
        out.flush()?;
        Ok(())
    }
}

fn lrofr_iterate<T: Real>(
    problem: &RegressionProblem<T>,
    options: &LrofrOptions<T>,
    criterion: Criterion,
    beta: T,
) -> Result<LrofrFit<T>, SelectionError> {
    if !(options.initial_lambda > T::zero()) {
        return Err(SelectionError::InvalidLambda(options.initial_lambda.as_f64()));
    }
    let tolerance = if criterion == Criterion::Crerr {
        None
    } else {
        check_tolerance(options.tolerance)?;
        options.tolerance
    };
    let m = problem.n_candidates();
    let rule = PassRule {
        criterion,
        tolerance,
        beta,
    };

    let mut regularization = RegularizationVector::uniform(m, options.initial_lambda);
    let mut candidates: Vec<usize> = (0..m).collect();
    let mut traces = Vec::new();
    let max_iters = options.max_outer_iters.max(1);
    let mut last_state = None;
    let mut previous_lambdas = regularization.lambdas.clone();

    for iteration in 1..=max_iters {
        let (trace, state) = forward_pass(problem, &candidates, &regularization.lambdas, rule)?;
        if state.selected.is_empty() {
            if criterion == Criterion::Crerr && iteration == 1 {
                return Err(SelectionError::BetaTooLarge(beta.as_f64()));
            }
            if iteration == 1 {
                return Err(SelectionError::AllCandidatesDegenerate);
            }
            // The updated λ left nothing worth selecting; keep the previous
            // sub-model together with the λ it was fitted under.
            regularization.lambdas = previous_lambdas;
            break;
        }
        let updated = evidence_update(&state, &regularization, problem.n_samples());
        let change = state
            .selected
            .iter()
            .map(|&idx| {
                let old = regularization.lambdas[idx];
                (updated.lambdas[idx] - old).magnitude() / old
            })
            .fold(T::zero(), |a, b| a.max(b));
        let converged = change <= options.lambda_rel_tol;

        candidates = state.selected.clone();
        candidates.sort_unstable();
        traces.push(trace);
        regularization.iteration_count = iteration;
        regularization.converged = converged;
        last_state = Some(state);
        if converged || iteration == max_iters {
            break;
        }
        previous_lambdas = std::mem::replace(&mut regularization.lambdas, updated.lambdas);
    }

    Ok(LrofrFit {
        traces,
        regularization,
        state: last_state.expect("at least one pass ran"),
        n_candidates: m,
        response_offset: problem.response_offset(),
    })
}

/// Locally regularized OFR with evidence-updated λ.
pub fn lrofr_fit<T: Real>(
    problem: &RegressionProblem<T>,
    options: &LrofrOptions<T>,
) -> Result<LrofrFit<T>, SelectionError> {
    lrofr_iterate(problem, options, Criterion::Rerr, T::zero())
}

/// LROFR governed by the D-optimality-augmented ratio; each pass stops once
/// every remaining candidate has a non-positive ratio.
pub fn lrofr_dopt_fit<T: Real>(
    problem: &RegressionProblem<T>,
    beta: T,
    options: &LrofrOptions<T>,
) -> Result<LrofrFit<T>, SelectionError> {
    if !(beta > T::zero()) {
        return Err(SelectionError::InvalidBeta(beta.as_f64()));
    }
    lrofr_iterate(problem, options, Criterion::Crerr, beta)
}
