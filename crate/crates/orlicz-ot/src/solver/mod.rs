//! Dual block-coordinate ascent for the regularized problem and exact
//! unregularized references.
//!
//! Each row update solves the scalar monotone root problem
//!
//! ```text
//! Σ_j λ2_j · ((extΦ)*)'( (α_i + β_j − c_ij)/γ ) = μ1_i / λ1_i
//! ```
//!
//! (columns symmetrically), which is exactly the coordinate maximizer of the
//! discrete predual objective, so the dual value never decreases.  The primal
//! plan is recovered from the conjugate derivative.

mod simplex;

pub use simplex::{transportation_simplex, SimplexSolution};

use crate::transport::{
    dual_objective, marginal_residuals, primal_objective, DualPotentials, PlanDensity,
    SolveReport, TransportProblem,
};
use crate::young::Family;
use crate::{Error, Result};

/// Stopping rules and mode selection for [`solve_regularized`].
#[derive(Clone, Debug)]
pub struct SolverConfig {
    /// Stop when the summed L¹ marginal residual drops below this.
    pub tol_marginal: f64,
    /// Per-block root tolerance on the potential.
    pub tol_root: f64,
    pub max_sweeps: usize,
    pub bracket_growth: f64,
    pub mode: SolveMode,
    /// Record the dual value after every sweep (diagnostics/tests).
    pub track_dual_values: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SolveMode {
    Generic,
    EntropyClosedForm,
    Auto,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            tol_marginal: 1e-9,
            tol_root: 1e-12,
            max_sweeps: 10_000,
            bracket_growth: 2.0,
            mode: SolveMode::Auto,
            track_dual_values: false,
        }
    }
}

impl SolverConfig {
    fn validate(&self) -> Result<()> {
        let ok = self.tol_marginal > 0.0 && self.tol_root > 0.0 && self.bracket_growth > 1.0;
        if !ok {
            return Err(Error::InvalidParameter(
                "solver tolerances must be positive and bracket growth > 1".into(),
            ));
        }
        Ok(())
    }
}

/// Recovers the primal plan density p_ij = ((extΦ)*)'((α_i+β_j−c_ij)/γ) on
/// active rows and columns; inactive entries are zero.
pub fn recover_plan(prob: &TransportProblem, duals: &DualPotentials) -> PlanDensity {
    let n2 = prob.n2();
    let mut values = vec![0.0; prob.n1() * n2];
    for i in 0..prob.n1() {
        if !duals.active_rows[i] {
            continue;
        }
        for j in 0..n2 {
            if !duals.active_cols[j] {
                continue;
            }
            let r = (duals.alpha[i] + duals.beta[j] - prob.cost[i * n2 + j]) / prob.gamma;
            values[i * n2 + j] = prob.reg.conjugate_deriv(r);
        }
    }
    PlanDensity::new(prob.grid.clone(), values).expect("plan shape")
}

struct BlockProblem<'a> {
    weights: &'a [f64],  // λ masses of the opposite axis
    others: &'a [f64],   // the opposite potentials
    active: &'a [bool],
    costs: Costs<'a>,
    gamma: f64,
    target: f64,
}

enum Costs<'a> {
    Row { cost: &'a [f64], n2: usize, i: usize },
    Col { cost: &'a [f64], n2: usize, j: usize },
}

impl Costs<'_> {
    #[inline]
    fn get(&self, k: usize) -> f64 {
        match self {
            Costs::Row { cost, n2, i } => cost[i * n2 + k],
            Costs::Col { cost, n2, j } => cost[k * n2 + j],
        }
    }
}

impl BlockProblem<'_> {
    fn residual(&self, prob: &TransportProblem, x: f64) -> f64 {
        let mut s = 0.0;
        for k in 0..self.weights.len() {
            if !self.active[k] {
                continue;
            }
            let r = (x + self.others[k] - self.costs.get(k)) / self.gamma;
            s += self.weights[k] * prob.reg.conjugate_deriv(r);
        }
        s - self.target
    }

    fn slope(&self, prob: &TransportProblem, x: f64) -> Option<f64> {
        let mut s = 0.0;
        for k in 0..self.weights.len() {
            if !self.active[k] {
                continue;
            }
            let r = (x + self.others[k] - self.costs.get(k)) / self.gamma;
            s += self.weights[k] * conjugate_second(&prob.reg, r)? / self.gamma;
        }
        Some(s)
    }
}

/// Second derivative of the extended conjugate where an analytic form exists.
fn conjugate_second(reg: &crate::young::Regularizer, r: f64) -> Option<f64> {
    match reg.family() {
        Family::Entropy => Some((r - 1.0).exp()),
        Family::Power(p) => {
            let q = p / (p - 1.0);
            Some(if r <= 0.0 { 0.0 } else { (q - 1.0) * r.powf(q - 2.0) })
        }
        Family::Tsallis(q) => {
            let s = ((q - 1.0) * r + 1.0) / q;
            Some(if s <= 0.0 { 0.0 } else { s.powf((2.0 - q) / (q - 1.0)) / q })
        }
        _ => None,
    }
}

/// Solves one dual block to its infimum root by geometric bracket expansion
/// and safeguarded bisection with Newton acceleration.
fn solve_block(prob: &TransportProblem, blk: &BlockProblem, start: f64, cfg: &SolverConfig) -> Result<f64> {
    debug_assert!(blk.target > 0.0);
    let max_other = blk
        .others
        .iter()
        .zip(blk.active)
        .filter(|(_, a)| **a)
        .map(|(b, _)| b.abs())
        .fold(0.0f64, f64::max);
    // safety net only: a sign change exists whenever the conjugate derivative
    // is unbounded (superlinear Φ); scaled by γ for strongly regularized runs
    let cap = 1e3 * (1.0 + prob.cost_lower_bound.abs() + max_other) * (1.0 + prob.gamma);

    let f_start = blk.residual(prob, start);
    let (mut lo, mut hi);
    if f_start >= 0.0 {
        hi = start;
        let mut w = 1.0;
        loop {
            lo = hi - w;
            if blk.residual(prob, lo) < 0.0 {
                break;
            }
            w *= cfg.bracket_growth;
            if w > cap {
                return Err(Error::Inconsistent(format!(
                    "dual block bracket grew past {cap:.3e} without a sign change"
                )));
            }
        }
    } else {
        lo = start;
        let mut w = 1.0;
        loop {
            hi = lo + w;
            if blk.residual(prob, hi) >= 0.0 {
                break;
            }
            w *= cfg.bracket_growth;
            if w > cap {
                return Err(Error::Inconsistent(format!(
                    "dual block bracket grew past {cap:.3e} without a sign change"
                )));
            }
        }
    }

    // keep the invariant F(hi) >= 0 > F(lo); converging to the lower bracket
    // edge resolves flat-segment ties to the infimum root
    let mut f_hi = blk.residual(prob, hi);
    for _ in 0..200 {
        if hi - lo <= cfg.tol_root * (1.0 + hi.abs()) {
            break;
        }
        let mut x = f64::NAN;
        if let Some(d) = blk.slope(prob, hi) {
            if d > 0.0 {
                let candidate = hi - f_hi / d;
                if candidate > lo && candidate < hi {
                    x = candidate;
                }
            }
        }
        if !x.is_finite() {
            x = 0.5 * (lo + hi);
        }
        let fx = blk.residual(prob, x);
        if fx >= 0.0 {
            hi = x;
            f_hi = fx;
        } else {
            lo = x;
        }
    }
    Ok(hi)
}

/// One generalized row update: returns the new α_i.  The row must carry
/// positive marginal mass.
pub fn block_update_row(
    prob: &TransportProblem,
    duals: &DualPotentials,
    i: usize,
    cfg: &SolverConfig,
) -> Result<f64> {
    if prob.mu1.masses[i] <= 0.0 {
        return Err(Error::InvalidParameter(format!("row {i} has zero marginal mass")));
    }
    let blk = BlockProblem {
        weights: &prob.lambda2.masses,
        others: &duals.beta,
        active: &duals.active_cols,
        costs: Costs::Row { cost: &prob.cost, n2: prob.n2(), i },
        gamma: prob.gamma,
        target: prob.target_row_density(i),
    };
    solve_block(prob, &blk, duals.alpha[i], cfg)
}

/// One generalized column update: returns the new β_j.
pub fn block_update_col(
    prob: &TransportProblem,
    duals: &DualPotentials,
    j: usize,
    cfg: &SolverConfig,
) -> Result<f64> {
    if prob.mu2.masses[j] <= 0.0 {
        return Err(Error::InvalidParameter(format!("column {j} has zero marginal mass")));
    }
    let blk = BlockProblem {
        weights: &prob.lambda1.masses,
        others: &duals.alpha,
        active: &duals.active_rows,
        costs: Costs::Col { cost: &prob.cost, n2: prob.n2(), j },
        gamma: prob.gamma,
        target: prob.target_col_density(j),
    };
    solve_block(prob, &blk, duals.beta[j], cfg)
}

/// Alternating full row and column sweeps of the generalized block update
/// (Gauss-Seidel order: updated values are used immediately).
pub fn solve_regularized(prob: &TransportProblem, cfg: &SolverConfig) -> Result<SolveReport> {
    cfg.validate()?;
    if prob.gamma < 1e-12 {
        return Err(Error::InvalidParameter(
            "gamma below 1e-12; use the exact unregularized solvers instead".into(),
        ));
    }
    let mode = match cfg.mode {
        SolveMode::Auto => {
            if matches!(prob.reg.family(), Family::Entropy) {
                SolveMode::EntropyClosedForm
            } else {
                SolveMode::Generic
            }
        }
        m => m,
    };
    if mode == SolveMode::EntropyClosedForm && !matches!(prob.reg.family(), Family::Entropy) {
        return Err(Error::InvalidParameter(
            "closed-form mode needs the entropy regularizer".into(),
        ));
    }

    let mut duals = DualPotentials::zeros(prob);
    let mut trace = Vec::new();
    let mut sweeps = 0;
    let mut converged = false;
    let mut residual = f64::INFINITY;

    while sweeps < cfg.max_sweeps {
        match mode {
            SolveMode::EntropyClosedForm => entropy_sweep(prob, &mut duals),
            _ => {
                for i in 0..prob.n1() {
                    if duals.active_rows[i] {
                        duals.alpha[i] = block_update_row(prob, &duals, i, cfg)?;
                    }
                }
                for j in 0..prob.n2() {
                    if duals.active_cols[j] {
                        duals.beta[j] = block_update_col(prob, &duals, j, cfg)?;
                    }
                }
            }
        }
        sweeps += 1;
        let plan = recover_plan(prob, &duals);
        let (r1, r2) = marginal_residuals(prob, &plan);
        residual = r1 + r2;
        if cfg.track_dual_values {
            trace.push(dual_objective(prob, &duals));
        }
        if residual <= cfg.tol_marginal {
            converged = true;
            break;
        }
    }

    let plan = recover_plan(prob, &duals);
    let primal = primal_objective(prob, &plan);
    let dual = dual_objective(prob, &duals);
    Ok(SolveReport {
        plan_coefficients: plan.values.clone(),
        plan,
        duals,
        primal_value: primal,
        dual_value: dual,
        gap: primal - dual,
        marginal_residual_l1: residual,
        iterations: sweeps,
        converged,
        dual_trace: if cfg.track_dual_values { Some(trace) } else { None },
    })
}

/// Closed-form entropy solve (classical scaling iteration in the log domain).
/// Exactness against the generic root path is part of the acceptance suite.
pub fn solve_entropy_closed_form(
    prob: &TransportProblem,
    cfg: &SolverConfig,
) -> Result<SolveReport> {
    if !matches!(prob.reg.family(), Family::Entropy) {
        return Err(Error::InvalidParameter(
            "closed-form solver needs the entropy regularizer".into(),
        ));
    }
    let mut cfg = cfg.clone();
    cfg.mode = SolveMode::EntropyClosedForm;
    solve_regularized(prob, &cfg)
}

/// log Σ exp with max subtraction.
fn log_sum_exp(terms: impl Iterator<Item = f64>) -> f64 {
    let xs: Vec<f64> = terms.collect();
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// One full closed-form sweep: rows then columns, each update solving
/// λ2-weighted Σ e^{(α+β−c)/γ − 1} = μ1/λ1 exactly.
fn entropy_sweep(prob: &TransportProblem, duals: &mut DualPotentials) {
    let n2 = prob.n2();
    let g = prob.gamma;
    for i in 0..prob.n1() {
        if !duals.active_rows[i] {
            continue;
        }
        let lse = log_sum_exp((0..n2).filter(|j| duals.active_cols[*j]).map(|j| {
            prob.lambda2.masses[j].ln() + (duals.beta[j] - prob.cost[i * n2 + j]) / g
        }));
        duals.alpha[i] = g * (1.0 + prob.target_row_density(i).ln() - lse);
    }
    for j in 0..prob.n2() {
        if !duals.active_cols[j] {
            continue;
        }
        let lse = log_sum_exp((0..prob.n1()).filter(|i| duals.active_rows[*i]).map(|i| {
            prob.lambda1.masses[i].ln() + (duals.alpha[i] - prob.cost[i * n2 + j]) / g
        }));
        duals.beta[j] = g * (1.0 + prob.target_col_density(j).ln() - lse);
    }
}

// ---------------------------------------------------------------------------
// Exact references
// ---------------------------------------------------------------------------

/// Sparse coupling entry (row index, column index, mass).
pub type SparsePlan = Vec<(usize, usize, f64)>;

/// Northwest-corner monotone coupling of two sorted 1-D marginals; the exact
/// optimizer for costs h(x − y) with h convex.  On exact mass ties the row is
/// consumed first.
pub fn nw_monotone_1d(mu1: &[f64], mu2: &[f64]) -> Result<SparsePlan> {
    let (s1, s2): (f64, f64) = (mu1.iter().sum(), mu2.iter().sum());
    if (s1 - s2).abs() > 1e-12 * (1.0 + s1.abs()) {
        return Err(Error::Unbalanced(format!("masses {s1} vs {s2}")));
    }
    if mu1.iter().chain(mu2).any(|m| *m < 0.0) {
        return Err(Error::InvalidMeasure("marginal masses must be >= 0".into()));
    }
    let mut plan = Vec::new();
    let (mut i, mut j) = (0usize, 0usize);
    let mut ra = if mu1.is_empty() { 0.0 } else { mu1[0] };
    let mut rb = if mu2.is_empty() { 0.0 } else { mu2[0] };
    while i < mu1.len() && j < mu2.len() {
        let t = ra.min(rb);
        if t > 0.0 {
            plan.push((i, j, t));
        }
        ra -= t;
        rb -= t;
        if ra <= 0.0 {
            i += 1;
            if i < mu1.len() {
                ra = mu1[i];
            }
        } else {
            j += 1;
            if j < mu2.len() {
                rb = mu2[j];
            }
        }
    }
    Ok(plan)
}

/// Transport cost of a sparse plan under an index cost.
pub fn sparse_plan_cost(plan: &SparsePlan, cost: impl Fn(usize, usize) -> f64) -> f64 {
    plan.iter().map(|&(i, j, m)| m * cost(i, j)).sum()
}
