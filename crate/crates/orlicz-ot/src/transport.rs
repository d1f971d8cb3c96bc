//! Assembly and validation of the discrete regularized transport problem,
//! plus objective and residual diagnostics.
//!
//! The fully discretized problem on a two-axis grid reads
//!
//! ```text
//! min_p Σ_ij (c_ij p_ij + γ extΦ(p_ij)) λ1_i λ2_j
//! s.t.  Σ_j p_ij λ2_j = μ1_i/λ1_i ,  Σ_i p_ij λ1_i = μ2_j/λ2_j ,  p ≥ 0
//! ```
//!
//! and its dual restriction
//!
//! ```text
//! max_{α,β} Σ_i α_i μ1_i + Σ_j β_j μ2_j − γ Σ_ij λ1_i λ2_j (extΦ)*((α_i+β_j−c_ij)/γ).
//! ```

use serde::Serialize;

use crate::grid::{
    bin_measure, cell_average_cost, CostSpec, GridFunction, GridMeasure, GridPartition,
    MeasureSpec,
};
use crate::young::{luxemburg_norm, Regularizer};
use crate::{Error, Result};

/// Discrete regularized transport problem.  Immutable after assembly.
#[derive(Clone, Debug)]
pub struct TransportProblem {
    pub grid: GridPartition,
    pub lambda1: GridMeasure,
    pub lambda2: GridMeasure,
    pub mu1: GridMeasure,
    pub mu2: GridMeasure,
    /// Row-major cell-averaged cost matrix.
    pub cost: Vec<f64>,
    pub reg: Regularizer,
    pub gamma: f64,
    /// c† with cost ≥ c† entrywise.
    pub cost_lower_bound: f64,
    /// min over cells of μ-mass / λ-mass (the dual-existence floor; 0 when
    /// some marginal cell is empty).
    pub marginal_density_floor: f64,
}

/// Plan density coefficients w.r.t. λ = λ1 ⊗ λ2 (a two-axis function).
pub type PlanDensity = GridFunction;

/// Dual potentials with activity flags for zero-mass rows/columns.
#[derive(Clone, Debug, Serialize)]
pub struct DualPotentials {
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
    pub active_rows: Vec<bool>,
    pub active_cols: Vec<bool>,
}

impl DualPotentials {
    pub fn zeros(prob: &TransportProblem) -> Self {
        DualPotentials {
            alpha: vec![0.0; prob.n1()],
            beta: vec![0.0; prob.n2()],
            active_rows: prob.mu1.masses.iter().map(|m| *m > 0.0).collect(),
            active_cols: prob.mu2.masses.iter().map(|m| *m > 0.0).collect(),
        }
    }
}

/// Everything a solve returns.
#[derive(Clone, Debug, Serialize)]
pub struct SolveReport {
    #[serde(skip)]
    pub plan: PlanDensity,
    /// Row-major plan coefficients, duplicated for serialization.
    pub plan_coefficients: Vec<f64>,
    pub duals: DualPotentials,
    pub primal_value: f64,
    pub dual_value: f64,
    pub gap: f64,
    pub marginal_residual_l1: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Dual value after each sweep, when tracking was requested.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dual_trace: Option<Vec<f64>>,
}

impl TransportProblem {
    pub fn n1(&self) -> usize {
        self.lambda1.masses.len()
    }

    pub fn n2(&self) -> usize {
        self.lambda2.masses.len()
    }

    /// Target row densities μ1_i/λ1_i.
    pub fn target_row_density(&self, i: usize) -> f64 {
        self.mu1.masses[i] / self.lambda1.masses[i]
    }

    pub fn target_col_density(&self, j: usize) -> f64 {
        self.mu2.masses[j] / self.lambda2.masses[j]
    }
}

/// Bins the data onto the level-k dyadic grid of the given boxes and builds
/// the problem.  Marginals are normalized to unit mass; a drift beyond 1e-6
/// before normalization is an error.
#[allow(clippy::too_many_arguments)]
pub fn assemble(
    dom1: (f64, f64),
    dom2: (f64, f64),
    mu1_spec: &MeasureSpec,
    mu2_spec: &MeasureSpec,
    lambda1_spec: &MeasureSpec,
    lambda2_spec: &MeasureSpec,
    cost_spec: &CostSpec,
    reg: Regularizer,
    gamma: f64,
    level: u32,
) -> Result<TransportProblem> {
    if !gamma.is_finite() || gamma <= 0.0 {
        return Err(Error::InvalidParameter("gamma must be > 0".into()));
    }
    let grid = GridPartition::dyadic_2d(dom1, dom2, level)?;
    let axis1 = grid.axis_partition(0);
    let axis2 = grid.axis_partition(1);
    let lambda1 = bin_measure(lambda1_spec, &axis1)?;
    let lambda2 = bin_measure(lambda2_spec, &axis2)?;
    let mut mu1 = bin_measure(mu1_spec, &axis1)?;
    let mut mu2 = bin_measure(mu2_spec, &axis2)?;
    let cost = cell_average_cost(cost_spec, &grid, lambda1_spec, lambda2_spec, 3)?;
    for (name, mu) in [("mu1", &mut mu1), ("mu2", &mut mu2)] {
        let total = mu.total();
        if total <= 0.0 {
            return Err(Error::InvalidMeasure(format!("{name} has zero total mass")));
        }
        if (total - 1.0).abs() > 1e-6 {
            return Err(Error::InvalidMeasure(format!(
                "{name} total mass {total} drifts from 1 beyond 1e-6; normalize the spec"
            )));
        }
        for m in &mut mu.masses {
            *m /= total;
        }
    }
    finish_assembly(grid, lambda1, lambda2, mu1, mu2, cost, reg, gamma)
}

/// Assembles from already-binned data (used by sweeps that re-bin templates
/// themselves, e.g. after mollification).
#[allow(clippy::too_many_arguments)]
pub fn assemble_from_parts(
    grid: GridPartition,
    lambda1: GridMeasure,
    lambda2: GridMeasure,
    mu1: GridMeasure,
    mu2: GridMeasure,
    cost: Vec<f64>,
    reg: Regularizer,
    gamma: f64,
) -> Result<TransportProblem> {
    let normalize = |mu: &mut GridMeasure| -> Result<()> {
        let total = mu.total();
        if total <= 0.0 {
            return Err(Error::InvalidMeasure("marginal has zero total mass".into()));
        }
        for m in &mut mu.masses {
            *m /= total;
        }
        Ok(())
    };
    let (mut mu1, mut mu2) = (mu1, mu2);
    normalize(&mut mu1)?;
    normalize(&mut mu2)?;
    finish_assembly(grid, lambda1, lambda2, mu1, mu2, cost, reg, gamma)
}

#[allow(clippy::too_many_arguments)]
fn finish_assembly(
    grid: GridPartition,
    lambda1: GridMeasure,
    lambda2: GridMeasure,
    mu1: GridMeasure,
    mu2: GridMeasure,
    cost: Vec<f64>,
    reg: Regularizer,
    gamma: f64,
) -> Result<TransportProblem> {
    let (n1, n2) = (lambda1.masses.len(), lambda2.masses.len());
    if grid.n_axes() != 2
        || grid.axis(0).n_cells() != n1
        || grid.axis(1).n_cells() != n2
        || cost.len() != n1 * n2
        || mu1.masses.len() != n1
        || mu2.masses.len() != n2
    {
        return Err(Error::ShapeMismatch("assembled pieces disagree on cell counts".into()));
    }
    if lambda1.masses.iter().chain(&lambda2.masses).any(|m| *m <= 0.0) {
        return Err(Error::InvalidMeasure(
            "base measures must have full support (every cell mass > 0)".into(),
        ));
    }
    for (mu, lam, name) in
        [(&mu1, &lambda1, "mu1"), (&mu2, &lambda2, "mu2")]
    {
        for (m, l) in mu.masses.iter().zip(&lam.masses) {
            if *m > 0.0 && *l <= 0.0 {
                return Err(Error::InvalidMeasure(format!(
                    "{name} puts mass on a cell with zero base-measure mass"
                )));
            }
        }
    }
    if cost.iter().any(|c| !c.is_finite()) {
        return Err(Error::InvalidParameter("cost entries must be finite".into()));
    }
    let cost_lower_bound = cost.iter().copied().fold(f64::INFINITY, f64::min);
    let floor1 = mu1
        .masses
        .iter()
        .zip(&lambda1.masses)
        .map(|(m, l)| m / l)
        .fold(f64::INFINITY, f64::min);
    let floor2 = mu2
        .masses
        .iter()
        .zip(&lambda2.masses)
        .map(|(m, l)| m / l)
        .fold(f64::INFINITY, f64::min);
    Ok(TransportProblem {
        grid,
        lambda1,
        lambda2,
        mu1,
        mu2,
        cost,
        reg,
        gamma,
        cost_lower_bound,
        marginal_density_floor: floor1.min(floor2).max(0.0),
    })
}

// ---------------------------------------------------------------------------
// Objectives and residuals
// ---------------------------------------------------------------------------

/// Σ_ij (c_ij p_ij + γ extΦ(p_ij)) λ1_i λ2_j; +∞ when any coefficient is
/// negative.
pub fn primal_objective(prob: &TransportProblem, plan: &PlanDensity) -> f64 {
    let (cost_part, reg_part) = primal_parts(prob, plan);
    cost_part + prob.gamma * reg_part
}

/// (transport cost part, unscaled regularization modular Σ extΦ(p)·λλ).
pub fn primal_parts(prob: &TransportProblem, plan: &PlanDensity) -> (f64, f64) {
    let n2 = prob.n2();
    let mut cost_part = 0.0;
    let mut reg_part = 0.0;
    for i in 0..prob.n1() {
        let l1 = prob.lambda1.masses[i];
        for j in 0..n2 {
            let p = plan.values[i * n2 + j];
            let w = l1 * prob.lambda2.masses[j];
            if p < 0.0 {
                return (f64::INFINITY, f64::INFINITY);
            }
            cost_part += prob.cost[i * n2 + j] * p * w;
            reg_part += prob.reg.phi(p) * w;
        }
    }
    (cost_part, reg_part)
}

/// Discrete restriction of the predual objective.  Rows/columns with zero
/// marginal mass contribute their limit value: −Φ(0) per cell for the
/// conjugate term and nothing for the μ term.
pub fn dual_objective(prob: &TransportProblem, duals: &DualPotentials) -> f64 {
    let n2 = prob.n2();
    let mut value = 0.0;
    for (a, m) in duals.alpha.iter().zip(&prob.mu1.masses) {
        if *m > 0.0 {
            value += a * m;
        }
    }
    for (b, m) in duals.beta.iter().zip(&prob.mu2.masses) {
        if *m > 0.0 {
            value += b * m;
        }
    }
    let limit_conj = -prob.reg.phi_at_zero();
    for i in 0..prob.n1() {
        let l1 = prob.lambda1.masses[i];
        for j in 0..n2 {
            let w = l1 * prob.lambda2.masses[j];
            let conj = if duals.active_rows[i] && duals.active_cols[j] {
                let r = (duals.alpha[i] + duals.beta[j] - prob.cost[i * n2 + j]) / prob.gamma;
                prob.reg.conjugate(r)
            } else {
                limit_conj
            };
            value -= prob.gamma * w * conj;
        }
    }
    value
}

/// The (P†) functional for power regularizers:
/// Λ(α, β) = (1/q)·Σ ((α⊕β − c)₊)^q λλ − γ^{q−1}(Σ α μ1 + Σ β μ2).
/// On instances with strictly positive marginals it relates to
/// [`dual_objective`] by Λ = −γ^{q−1} · dual for the same potentials, which
/// is checked in tests.
pub fn p_dagger_objective(prob: &TransportProblem, duals: &DualPotentials) -> Result<f64> {
    let p = match prob.reg.family() {
        crate::young::Family::Power(p) => *p,
        other => {
            return Err(Error::InvalidParameter(format!(
                "(P†) needs a power regularizer, got {other:?}"
            )))
        }
    };
    let q = p / (p - 1.0);
    let n2 = prob.n2();
    let mut norm_q = 0.0;
    for i in 0..prob.n1() {
        for j in 0..n2 {
            let excess =
                (duals.alpha[i] + duals.beta[j] - prob.cost[i * n2 + j]).max(0.0);
            norm_q += excess.powf(q) * prob.lambda1.masses[i] * prob.lambda2.masses[j];
        }
    }
    let gq = prob.gamma.powf(q - 1.0);
    let mu_term: f64 = duals.alpha.iter().zip(&prob.mu1.masses).map(|(a, m)| a * m).sum::<f64>()
        + duals.beta.iter().zip(&prob.mu2.masses).map(|(b, m)| b * m).sum::<f64>();
    Ok(norm_q / q - gq * mu_term)
}

/// λ-weighted L¹ norms of the two marginal-constraint violations.
pub fn marginal_residuals(prob: &TransportProblem, plan: &PlanDensity) -> (f64, f64) {
    let n2 = prob.n2();
    let mut r1 = 0.0;
    for i in 0..prob.n1() {
        let mut row = 0.0;
        for j in 0..n2 {
            row += plan.values[i * n2 + j] * prob.lambda2.masses[j];
        }
        r1 += (prob.lambda1.masses[i] * row - prob.mu1.masses[i]).abs();
    }
    let mut r2 = 0.0;
    for j in 0..n2 {
        let mut col = 0.0;
        for i in 0..prob.n1() {
            col += plan.values[i * n2 + j] * prob.lambda1.masses[i];
        }
        r2 += (prob.lambda2.masses[j] * col - prob.mu2.masses[j]).abs();
    }
    (r1, r2)
}

// ---------------------------------------------------------------------------
// Existence diagnostics
// ---------------------------------------------------------------------------

/// Diagnostic flags for the existence theory behind a problem instance.
#[derive(Clone, Debug, Serialize)]
pub struct ExistenceReport {
    /// Luxemburg norms of the two marginal densities (always finite at grid
    /// scale; reported with values).
    pub marginal_norms: (f64, f64),
    /// Whether a product-type bound Φ(xy) ≤ CΦ(x)Φ(y) or
    /// Φ(xy) ≤ C1·xΦ(y) + C2·Φ(x)y held on the sample grid.
    pub submultiplicative_ok: bool,
    /// Observed constant for the bound that held (if any).
    pub submultiplicative_constant: Option<f64>,
    /// min μ/λ over cells; > 0 guarantees the dual-existence assumption.
    pub density_floor: f64,
    pub density_floor_positive: bool,
    /// Σ λ1λ2 (extΦ)*(−c/γ), finite at grid scale; reported.
    pub conjugate_integral: f64,
}

impl ExistenceReport {
    pub fn all_ok(&self) -> bool {
        self.submultiplicative_ok && self.density_floor_positive
    }
}

/// Spot-checks the conditions under which minimizers and dual solutions are
/// guaranteed.  Diagnostic only; never fails.
pub fn validate_existence_conditions(prob: &TransportProblem) -> Result<ExistenceReport> {
    let axis1 = prob.grid.axis_partition(0);
    let axis2 = prob.grid.axis_partition(1);
    let d1 = GridFunction::new(
        axis1,
        prob.mu1.masses.iter().zip(&prob.lambda1.masses).map(|(m, l)| m / l).collect(),
    )?;
    let d2 = GridFunction::new(
        axis2,
        prob.mu2.masses.iter().zip(&prob.lambda2.masses).map(|(m, l)| m / l).collect(),
    )?;
    let n1 = luxemburg_norm(&prob.reg, &d1, &prob.lambda1, 1.0)?;
    let n2 = luxemburg_norm(&prob.reg, &d2, &prob.lambda2, 1.0)?;

    // product-bound spot check on a sample grid
    let samples = [0.5, 1.0, 2.0, 4.0, 8.0, 16.0];
    let mut c_mult: f64 = 0.0;
    let mut mult_ok = true;
    let mut c_add: f64 = 0.0;
    let mut add_ok = true;
    for &x in &samples {
        for &y in &samples {
            let pxy = prob.reg.phi(x * y);
            if pxy <= 0.0 {
                continue;
            }
            let prod = prob.reg.phi(x) * prob.reg.phi(y);
            if prod > 0.0 {
                c_mult = c_mult.max(pxy / prod);
            } else {
                mult_ok = false;
            }
            let additive = x * prob.reg.phi(y) + prob.reg.phi(x) * y;
            if additive > 0.0 {
                c_add = c_add.max(pxy / additive);
            } else {
                add_ok = false;
            }
        }
    }
    let cap = 1e6;
    let mult_holds = mult_ok && c_mult <= cap && c_mult > 0.0;
    let add_holds = add_ok && c_add <= cap && c_add > 0.0;
    let (sub_ok, sub_const) = if mult_holds && (!add_holds || c_mult <= c_add) {
        (true, Some(c_mult))
    } else if add_holds {
        (true, Some(c_add))
    } else {
        (false, None)
    };

    let mut conj_int = 0.0;
    let nn2 = prob.n2();
    for i in 0..prob.n1() {
        for j in 0..nn2 {
            conj_int += prob.lambda1.masses[i]
                * prob.lambda2.masses[j]
                * prob.reg.conjugate(-prob.cost[i * nn2 + j] / prob.gamma);
        }
    }

    Ok(ExistenceReport {
        marginal_norms: (n1, n2),
        submultiplicative_ok: sub_ok,
        submultiplicative_constant: sub_const,
        density_floor: prob.marginal_density_floor,
        density_floor_positive: prob.marginal_density_floor > 0.0,
        conjugate_integral: conj_int,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::MeasureSpec;
    use crate::young::Family;

    fn ex36_problem(p: f64, gamma: f64, level: u32) -> TransportProblem {
        let base = MeasureSpec::lebesgue_plus_atom(0.0, 1.0);
        let dirac = MeasureSpec::atom(0.0, 1.0);
        assemble(
            (-1.0, 1.0),
            (-1.0, 1.0),
            &dirac,
            &dirac,
            &base,
            &base,
            &CostSpec::Zero,
            Regularizer::power(p).unwrap(),
            gamma,
            level,
        )
        .unwrap()
    }

    #[test]
    fn assemble_example_36_shape() {
        let prob = ex36_problem(2.0, 1.0, 1);
        assert_eq!(prob.lambda1.masses, vec![2.0, 1.0]);
        assert_eq!(prob.mu1.masses, vec![1.0, 0.0]);
        assert_eq!(prob.cost, vec![0.0; 4]);
        // only the atom cell pair admits positive plan mass
        assert_eq!(prob.marginal_density_floor, 0.0);
    }

    #[test]
    fn assemble_uniform_symmetric() {
        let leb = MeasureSpec::lebesgue();
        let prob = assemble(
            (0.0, 1.0),
            (0.0, 1.0),
            &leb,
            &leb,
            &leb,
            &leb,
            &CostSpec::SqDist,
            Regularizer::power(2.0).unwrap(),
            1.0,
            2,
        )
        .unwrap();
        assert!((prob.mu1.total() - 1.0).abs() < 1e-12);
        let n = 4;
        for i in 0..n {
            for j in 0..n {
                let a = prob.cost[i * n + j];
                let b = prob.cost[j * n + i];
                assert!((a - b).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn primal_objective_against_double_loop() {
        let prob = ex36_problem(2.0, 1.0, 2);
        let n2 = prob.n2();
        let vals: Vec<f64> =
            (0..prob.n1() * n2).map(|k| ((k * 31 + 7) % 13) as f64 / 11.0).collect();
        let plan = GridFunction::new(prob.grid.clone(), vals.clone()).unwrap();
        let mut expect = 0.0;
        for i in 0..prob.n1() {
            for j in 0..n2 {
                let w = prob.lambda1.masses[i] * prob.lambda2.masses[j];
                expect += (prob.cost[i * n2 + j] * vals[i * n2 + j]
                    + prob.gamma * prob.reg.phi(vals[i * n2 + j]))
                    * w;
            }
        }
        assert!((primal_objective(&prob, &plan) - expect).abs() < 1e-14);

        // zero plan with nonnegative cost and Φ(0) = 0
        let zero = GridFunction::constant(prob.grid.clone(), 0.0).unwrap();
        assert_eq!(primal_objective(&prob, &zero), 0.0);

        // negative entries force +∞
        let mut bad = zero;
        bad.values[0] = -1.0;
        assert_eq!(primal_objective(&prob, &bad), f64::INFINITY);
    }

    #[test]
    fn dual_objective_trivial_values() {
        // power p = 2: conjugate of 0 at 0 is 0
        let prob = ex36_problem(2.0, 1.0, 1);
        let duals = DualPotentials::zeros(&prob);
        assert!(dual_objective(&prob, &duals).abs() < 1e-15);

        // entropy with unit lambda masses: −Σ λλ conj(0) = −1/e
        let leb = MeasureSpec::lebesgue();
        let prob = assemble(
            (0.0, 1.0),
            (0.0, 1.0),
            &leb,
            &leb,
            &leb,
            &leb,
            &CostSpec::Zero,
            Regularizer::entropy(),
            1.0,
            0,
        )
        .unwrap();
        let duals = DualPotentials::zeros(&prob);
        let expect = -(-1.0f64).exp();
        assert!((dual_objective(&prob, &duals) - expect).abs() < 1e-14);
    }

    #[test]
    fn p_dagger_matches_scaled_dual_and_double_loop() {
        // strictly positive marginals so that no row or column is inactive
        let leb = MeasureSpec::lebesgue();
        let prob = assemble(
            (0.0, 1.0),
            (0.0, 1.0),
            &leb,
            &leb,
            &MeasureSpec::lebesgue_plus_atom(0.3, 1.0),
            &leb,
            &CostSpec::SqDist,
            Regularizer::power(2.0).unwrap(),
            0.7,
            2,
        )
        .unwrap();
        let mut duals = DualPotentials::zeros(&prob);
        for (k, a) in duals.alpha.iter_mut().enumerate() {
            *a = 0.3 * k as f64 - 0.2;
        }
        for (k, b) in duals.beta.iter_mut().enumerate() {
            *b = 0.1 * k as f64 + 0.05;
        }
        let lam = p_dagger_objective(&prob, &duals).unwrap();

        // brute force
        let q = 2.0;
        let n2 = prob.n2();
        let mut norm_q = 0.0;
        for i in 0..prob.n1() {
            for j in 0..n2 {
                let e = (duals.alpha[i] + duals.beta[j] - prob.cost[i * n2 + j]).max(0.0);
                norm_q += e.powf(q) * prob.lambda1.masses[i] * prob.lambda2.masses[j];
            }
        }
        let mu_term: f64 = duals
            .alpha
            .iter()
            .zip(&prob.mu1.masses)
            .map(|(a, m)| a * m)
            .sum::<f64>()
            + duals.beta.iter().zip(&prob.mu2.masses).map(|(b, m)| b * m).sum::<f64>();
        let expect = norm_q / q - prob.gamma.powf(q - 1.0) * mu_term;
        assert!((lam - expect).abs() < 1e-14);

        // Λ = −γ^{q−1}·dual for the same potentials
        let dual = dual_objective(&prob, &duals);
        assert!(
            (lam + prob.gamma.powf(q - 1.0) * dual).abs() < 1e-12,
            "{lam} vs {dual}"
        );

        // zero potentials with c ≥ 0 give 0
        let zeros = DualPotentials::zeros(&prob);
        assert!(p_dagger_objective(&prob, &zeros).unwrap().abs() < 1e-15);

        // wrong family is an error
        let leb = MeasureSpec::lebesgue();
        let ent = assemble(
            (0.0, 1.0),
            (0.0, 1.0),
            &leb,
            &leb,
            &leb,
            &leb,
            &CostSpec::Zero,
            Regularizer::entropy(),
            1.0,
            0,
        )
        .unwrap();
        assert!(p_dagger_objective(&ent, &DualPotentials::zeros(&ent)).is_err());
    }

    #[test]
    fn p_dagger_constant_potentials_match_scan_oracle() {
        // atom fixture, p = q = 2, zero cost, gamma = 1: with α ≡ t, β ≡ 0
        // the functional collapses to a scalar map t ↦ (t₊²/2)·Σλλ − t
        let prob = ex36_problem(2.0, 1.0, 1);
        let lam_total: f64 = prob
            .lambda1
            .masses
            .iter()
            .map(|a| a * prob.lambda2.masses.iter().sum::<f64>())
            .sum();
        let mut duals = DualPotentials::zeros(&prob);
        let mut t = -1.0;
        while t <= 1.0 {
            duals.alpha.iter_mut().for_each(|a| *a = t);
            let hand = 0.5 * t.max(0.0).powi(2) * lam_total - t;
            let op = p_dagger_objective(&prob, &duals).unwrap();
            assert!((op - hand).abs() < 1e-10, "t={t}: {op} vs {hand}");
            t += 0.05;
        }
    }

    #[test]
    fn residual_examples() {
        let leb = MeasureSpec::lebesgue();
        let prob = assemble(
            (0.0, 1.0),
            (0.0, 1.0),
            &leb,
            &leb,
            &leb,
            &leb,
            &CostSpec::Zero,
            Regularizer::power(2.0).unwrap(),
            1.0,
            2,
        )
        .unwrap();
        // product plan is exactly feasible: p_ij = (μ1_i/λ1_i)(μ2_j/λ2_j)
        let n2 = prob.n2();
        let mut vals = vec![0.0; prob.n1() * n2];
        for i in 0..prob.n1() {
            for j in 0..n2 {
                vals[i * n2 + j] = prob.target_row_density(i) * prob.target_col_density(j);
            }
        }
        let plan = GridFunction::new(prob.grid.clone(), vals).unwrap();
        let (r1, r2) = marginal_residuals(&prob, &plan);
        assert!(r1 < 1e-14 && r2 < 1e-14);

        // the zero plan misses all marginal mass
        let zero = GridFunction::constant(prob.grid.clone(), 0.0).unwrap();
        let (r1, r2) = marginal_residuals(&prob, &zero);
        assert!((r1 - 1.0).abs() < 1e-14 && (r2 - 1.0).abs() < 1e-14);
    }

    #[test]
    fn existence_report_flags() {
        // entropy passes via the additive bound
        let leb = MeasureSpec::lebesgue();
        let prob = assemble(
            (0.0, 1.0),
            (0.0, 1.0),
            &leb,
            &leb,
            &leb,
            &leb,
            &CostSpec::SqDist,
            Regularizer::entropy(),
            1.0,
            2,
        )
        .unwrap();
        let rep = validate_existence_conditions(&prob).unwrap();
        assert!(rep.submultiplicative_ok);
        assert!(rep.density_floor_positive);

        // power passes trivially
        let prob = assemble(
            (0.0, 1.0),
            (0.0, 1.0),
            &leb,
            &leb,
            &leb,
            &leb,
            &CostSpec::SqDist,
            Regularizer::power(2.0).unwrap(),
            1.0,
            2,
        )
        .unwrap();
        assert!(matches!(prob.reg.family(), Family::Power(_)));
        let rep = validate_existence_conditions(&prob).unwrap();
        assert!(rep.submultiplicative_ok);

        // a marginal with an empty cell reports a zero floor
        let prob = ex36_problem(2.0, 1.0, 1);
        let rep = validate_existence_conditions(&prob).unwrap();
        assert!(!rep.density_floor_positive);
        assert_eq!(rep.density_floor, 0.0);
    }

    #[test]
    fn permutation_equivariance_of_objectives() {
        let prob = ex36_problem(2.0, 1.0, 2);
        let (n1, n2) = (prob.n1(), prob.n2());
        let perm1: Vec<usize> = (0..n1).rev().collect();
        let perm2: Vec<usize> = (0..n2).map(|j| (j + 1) % n2).collect();

        let mut permuted = prob.clone();
        for (new_i, &old_i) in perm1.iter().enumerate() {
            permuted.lambda1.masses[new_i] = prob.lambda1.masses[old_i];
            permuted.mu1.masses[new_i] = prob.mu1.masses[old_i];
        }
        for (new_j, &old_j) in perm2.iter().enumerate() {
            permuted.lambda2.masses[new_j] = prob.lambda2.masses[old_j];
            permuted.mu2.masses[new_j] = prob.mu2.masses[old_j];
        }
        for (new_i, &old_i) in perm1.iter().enumerate() {
            for (new_j, &old_j) in perm2.iter().enumerate() {
                permuted.cost[new_i * n2 + new_j] = prob.cost[old_i * n2 + old_j];
            }
        }

        let vals: Vec<f64> = (0..n1 * n2).map(|k| ((k * 17 + 3) % 7) as f64 / 5.0).collect();
        let plan = GridFunction::new(prob.grid.clone(), vals.clone()).unwrap();
        let mut pvals = vec![0.0; n1 * n2];
        for (new_i, &old_i) in perm1.iter().enumerate() {
            for (new_j, &old_j) in perm2.iter().enumerate() {
                pvals[new_i * n2 + new_j] = vals[old_i * n2 + old_j];
            }
        }
        let pplan = GridFunction::new(prob.grid.clone(), pvals).unwrap();
        assert!(
            (primal_objective(&prob, &plan) - primal_objective(&permuted, &pplan)).abs() < 1e-12
        );
    }
}
