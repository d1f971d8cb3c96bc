//! Coupled-parameter schedules and convergence experiments.
//!
//! A [`Schedule`] couples the regularization weight γ to either the grid
//! refinement level (discretization sweeps) or a mollification width δ
//! (smoothing sweeps).  [`validate_coupling`] evaluates the rule's quantity
//! per entry — γ·Φ₊(h⁻¹), γ·h·Φ₊(h⁻¹), γ·Φ₊(δ⁻²) or γ·δ²·Φ₊(δ⁻²), with h
//! the minimum cell mass of the product base measure — and passes a schedule
//! when the quantity decreases by at least 1.5x from the first to the last
//! entry.  Limits are not observable at desk scale; the criterion is stated
//! in the output so users can tighten it.

use std::io::Write;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::grid::{
    bin_measure, bin_product_measure, binned_density, cell_average_cost, mollify, CostSpec,
    GridFunction, GridMeasure, GridPartition, KernelSpec, MeasureSpec,
};
use crate::solver::{
    solve_regularized, sparse_plan_cost, transportation_simplex, nw_monotone_1d, SolverConfig,
};
use crate::transport::{assemble, assemble_from_parts, primal_parts};
use crate::young::{luxemburg_norm, Regularizer, RegularizerSpec};
use crate::{Error, Result};

// ---------------------------------------------------------------------------
// Schedules
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CouplingRule {
    DiscStrict,
    DiscMonotone,
    SmoothStrict,
    SmoothMonotone,
    Custom,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct ScheduleEntry {
    pub level: u32,
    pub gamma: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Schedule {
    pub rule: CouplingRule,
    pub entries: Vec<ScheduleEntry>,
}

impl Schedule {
    pub fn new(rule: CouplingRule, entries: Vec<ScheduleEntry>) -> Result<Self> {
        let s = Schedule { rule, entries };
        s.validate()?;
        Ok(s)
    }

    /// Discretization rules need strictly increasing levels and strictly
    /// decreasing gammas; smoothing rules need strictly decreasing deltas
    /// (a fixed gamma is allowed there, which the divergence regime uses).
    pub fn validate(&self) -> Result<()> {
        if self.entries.is_empty() {
            return Err(Error::InvalidSchedule("schedule has no entries".into()));
        }
        if !self.entries.iter().all(|e| e.gamma > 0.0) {
            return Err(Error::InvalidSchedule("gammas must be > 0".into()));
        }
        match self.rule {
            CouplingRule::DiscStrict | CouplingRule::DiscMonotone => {
                if self.entries.windows(2).any(|w| w[1].level <= w[0].level) {
                    return Err(Error::InvalidSchedule("levels must be strictly increasing".into()));
                }
                if self.entries.windows(2).any(|w| w[1].gamma >= w[0].gamma) {
                    return Err(Error::InvalidSchedule("gammas must be strictly decreasing".into()));
                }
            }
            CouplingRule::SmoothStrict | CouplingRule::SmoothMonotone => {
                let deltas: Option<Vec<f64>> = self.entries.iter().map(|e| e.delta).collect();
                let Some(d) = deltas else {
                    return Err(Error::InvalidSchedule("smoothing entries need deltas".into()));
                };
                if !d.iter().all(|x| *x > 0.0) || d.windows(2).any(|w| w[1] >= w[0]) {
                    return Err(Error::InvalidSchedule(
                        "deltas must be positive and strictly decreasing".into(),
                    ));
                }
                if self.entries.windows(2).any(|w| w[1].gamma > w[0].gamma) {
                    return Err(Error::InvalidSchedule("gammas must be nonincreasing".into()));
                }
            }
            CouplingRule::Custom => {}
        }
        Ok(())
    }
}

/// Template of a transport problem that can be re-binned at any level.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ProblemTemplate {
    pub dom1: (f64, f64),
    pub dom2: (f64, f64),
    pub mu1: MeasureSpec,
    pub mu2: MeasureSpec,
    pub lambda1: MeasureSpec,
    pub lambda2: MeasureSpec,
    pub cost: CostSpec,
    pub regularizer: RegularizerSpec,
}

impl ProblemTemplate {
    pub fn build_regularizer(&self) -> Result<Regularizer> {
        Regularizer::from_spec(&self.regularizer)
    }

    /// Minimum product-cell base-measure mass at a level (the h_k of the
    /// discretization coupling).
    pub fn min_cell_mass(&self, level: u32) -> Result<f64> {
        let p1 = GridPartition::dyadic_1d(self.dom1.0, self.dom1.1, level)?;
        let p2 = GridPartition::dyadic_1d(self.dom2.0, self.dom2.1, level)?;
        let l1 = bin_measure(&self.lambda1, &p1)?;
        let l2 = bin_measure(&self.lambda2, &p2)?;
        let m1 = l1.masses.iter().copied().fold(f64::INFINITY, f64::min);
        let m2 = l2.masses.iter().copied().fold(f64::INFINITY, f64::min);
        Ok(m1 * m2)
    }
}

// ---------------------------------------------------------------------------
// Coupling validation
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
}

#[derive(Clone, Debug, Serialize)]
pub struct CouplingReport {
    pub rule: CouplingRule,
    /// (h or delta per entry, rule quantity per entry)
    pub scales: Vec<f64>,
    pub quantities: Vec<f64>,
    pub verdict: Verdict,
    /// decrease factor from first to last entry
    pub decrease_factor: f64,
}

fn phi_plus(reg: &Regularizer, t: f64) -> f64 {
    reg.phi(t).max(0.0)
}

/// Evaluates the schedule's coupling quantity per entry.  PASS requires a
/// decrease by at least a factor 1.5 from first to last entry.
pub fn validate_coupling(
    schedule: &Schedule,
    reg: &Regularizer,
    template: &ProblemTemplate,
) -> Result<CouplingReport> {
    schedule.validate()?;
    let mut scales = Vec::with_capacity(schedule.entries.len());
    let mut quantities = Vec::with_capacity(schedule.entries.len());
    for e in &schedule.entries {
        let (scale, qty) = match schedule.rule {
            CouplingRule::DiscStrict => {
                let h = template.min_cell_mass(e.level)?;
                (h, e.gamma * phi_plus(reg, 1.0 / h))
            }
            CouplingRule::DiscMonotone => {
                let h = template.min_cell_mass(e.level)?;
                (h, e.gamma * h * phi_plus(reg, 1.0 / h))
            }
            CouplingRule::SmoothStrict => {
                let d = e.delta.ok_or_else(|| {
                    Error::InvalidSchedule("smoothing rule needs deltas".into())
                })?;
                (d, e.gamma * phi_plus(reg, 1.0 / (d * d)))
            }
            CouplingRule::SmoothMonotone => {
                let d = e.delta.ok_or_else(|| {
                    Error::InvalidSchedule("smoothing rule needs deltas".into())
                })?;
                (d, e.gamma * d * d * phi_plus(reg, 1.0 / (d * d)))
            }
            CouplingRule::Custom => (f64::NAN, e.gamma),
        };
        scales.push(scale);
        quantities.push(qty);
    }
    let first = quantities[0];
    let last = *quantities.last().unwrap();
    let factor = if last > 0.0 { first / last } else { f64::INFINITY };
    let verdict = if factor >= 1.5 && quantities.iter().all(|q| q.is_finite()) {
        Verdict::Pass
    } else {
        Verdict::Fail
    };
    Ok(CouplingReport { rule: schedule.rule, scales, quantities, verdict, decrease_factor: factor })
}

// ---------------------------------------------------------------------------
// Sweeps
// ---------------------------------------------------------------------------

/// One row of a sweep's output table.
#[derive(Clone, Debug, Serialize)]
pub struct SweepEntry {
    pub level: u32,
    pub gamma: f64,
    pub delta: Option<f64>,
    /// min product cell mass (discretization) or delta scale (smoothing)
    pub h: f64,
    pub coupling_qty: f64,
    pub reg_value: f64,
    pub ref_value: f64,
    pub gap: f64,
    /// monotone 1-D reference at cell centers, when the cost admits one
    #[serde(skip_serializing_if = "Option::is_none")]
    pub nw_value: Option<f64>,
    /// γ·‖smoothed marginal density‖ (divergence monitor; smoothing only)
    #[serde(skip_serializing_if = "Option::is_none")]
    pub monitor: Option<f64>,
    pub residual: f64,
    pub sweeps: usize,
    pub seconds: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct SweepResult {
    pub rule: CouplingRule,
    pub coupling_verdict: Verdict,
    pub coupling_decrease_factor: f64,
    pub entries: Vec<SweepEntry>,
}

impl SweepResult {
    /// CSV with the fixed column set
    /// `k,gamma,delta,h,coupling_qty,reg_value,ref_value,gap,residual,sweeps,seconds`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "k,gamma,delta,h,coupling_qty,reg_value,ref_value,gap,residual,sweeps,seconds")?;
        for e in &self.entries {
            let delta = e.delta.map(|d| d.to_string()).unwrap_or_default();
            writeln!(
                w,
                "{},{},{},{},{},{},{},{},{},{},{}",
                e.level,
                e.gamma,
                delta,
                e.h,
                e.coupling_qty,
                e.reg_value,
                e.ref_value,
                e.gap,
                e.residual,
                e.sweeps,
                e.seconds
            )?;
        }
        Ok(())
    }
}

/// Solves the regularized problem per schedule entry at that entry's level
/// and compares against the exact LP value on the same grid.  Solver failures
/// are recorded per entry and the sweep continues.
pub fn run_discretization_sweep(
    template: &ProblemTemplate,
    schedule: &Schedule,
    config: &SolverConfig,
) -> Result<SweepResult> {
    let reg = template.build_regularizer()?;
    let coupling = validate_coupling(schedule, &reg, template)?;
    let mut entries = Vec::with_capacity(schedule.entries.len());
    for (idx, e) in schedule.entries.iter().enumerate() {
        let t0 = Instant::now();
        let row = discretization_entry(template, e, config)
            .map(|(reg_value, ref_value, nw_value, residual, sweeps)| SweepEntry {
                level: e.level,
                gamma: e.gamma,
                delta: e.delta,
                h: coupling.scales[idx],
                coupling_qty: coupling.quantities[idx],
                reg_value,
                ref_value,
                gap: reg_value - ref_value,
                nw_value,
                monitor: None,
                residual,
                sweeps,
                seconds: 0.0,
                error: None,
            })
            .unwrap_or_else(|err| SweepEntry {
                level: e.level,
                gamma: e.gamma,
                delta: e.delta,
                h: coupling.scales[idx],
                coupling_qty: coupling.quantities[idx],
                reg_value: f64::NAN,
                ref_value: f64::NAN,
                gap: f64::NAN,
                nw_value: None,
                monitor: None,
                residual: f64::NAN,
                sweeps: 0,
                seconds: 0.0,
                error: Some(err.to_string()),
            });
        let mut row = row;
        row.seconds = t0.elapsed().as_secs_f64();
        entries.push(row);
    }
    Ok(SweepResult {
        rule: schedule.rule,
        coupling_verdict: coupling.verdict,
        coupling_decrease_factor: coupling.decrease_factor,
        entries,
    })
}

fn discretization_entry(
    template: &ProblemTemplate,
    e: &ScheduleEntry,
    config: &SolverConfig,
) -> Result<(f64, f64, Option<f64>, f64, usize)> {
    let reg = template.build_regularizer()?;
    let prob = assemble(
        template.dom1,
        template.dom2,
        &template.mu1,
        &template.mu2,
        &template.lambda1,
        &template.lambda2,
        &template.cost,
        reg,
        e.gamma,
        e.level,
    )?;
    let report = solve_regularized(&prob, config)?;
    let lp = transportation_simplex(&prob.mu1.masses, &prob.mu2.masses, &prob.cost)?;
    let nw_value = match template.cost {
        CostSpec::SqDist | CostSpec::AbsDist => {
            let centers = |axis: &crate::grid::AxisPartition| -> Vec<f64> {
                (0..axis.n_cells())
                    .map(|i| {
                        let (lo, hi) = axis.cell(i);
                        0.5 * (lo + hi)
                    })
                    .collect()
            };
            let xs = centers(prob.grid.axis(0));
            let ys = centers(prob.grid.axis(1));
            let plan = nw_monotone_1d(&prob.mu1.masses, &prob.mu2.masses)?;
            Some(sparse_plan_cost(&plan, |i, j| template.cost.eval(xs[i], ys[j])))
        }
        _ => None,
    };
    Ok((report.primal_value, lp.value, nw_value, report.marginal_residual_l1, report.iterations))
}

/// Smoothing sweep on a fixed fine grid: marginals are binned, mollified at
/// the entry's δ on a zero-padded grid, and the regularized transport cost is
/// compared against the exact unregularized value with the original
/// marginals.  Also monitors γ·‖dμ^δ/dλ‖ per entry.
pub fn run_smoothing_sweep(
    template: &ProblemTemplate,
    schedule: &Schedule,
    kernel: &KernelSpec,
    config: &SolverConfig,
) -> Result<SweepResult> {
    let reg = template.build_regularizer()?;
    let coupling = validate_coupling(schedule, &reg, template)?;
    let ref_value = exact_reference_original_marginals(template)?;
    let mut entries = Vec::with_capacity(schedule.entries.len());
    for (idx, e) in schedule.entries.iter().enumerate() {
        let t0 = Instant::now();
        let delta = e.delta.ok_or_else(|| {
            Error::InvalidSchedule("smoothing sweep entries need deltas".into())
        })?;
        let row = smoothing_entry(template, e, delta, kernel, config)
            .map(|(cost_part, monitor, residual, sweeps)| SweepEntry {
                level: e.level,
                gamma: e.gamma,
                delta: Some(delta),
                h: coupling.scales[idx],
                coupling_qty: coupling.quantities[idx],
                reg_value: cost_part,
                ref_value,
                gap: cost_part - ref_value,
                nw_value: None,
                monitor: Some(monitor),
                residual,
                sweeps,
                seconds: 0.0,
                error: None,
            })
            .unwrap_or_else(|err| SweepEntry {
                level: e.level,
                gamma: e.gamma,
                delta: Some(delta),
                h: coupling.scales[idx],
                coupling_qty: coupling.quantities[idx],
                reg_value: f64::NAN,
                ref_value,
                gap: f64::NAN,
                nw_value: None,
                monitor: None,
                residual: f64::NAN,
                sweeps: 0,
                seconds: 0.0,
                error: Some(err.to_string()),
            });
        let mut row = row;
        row.seconds = t0.elapsed().as_secs_f64();
        entries.push(row);
    }
    Ok(SweepResult {
        rule: schedule.rule,
        coupling_verdict: coupling.verdict,
        coupling_decrease_factor: coupling.decrease_factor,
        entries,
    })
}

/// Returns (transport-cost part, γ·marginal-norm monitor, residual, sweeps).
fn smoothing_entry(
    template: &ProblemTemplate,
    e: &ScheduleEntry,
    delta: f64,
    kernel: &KernelSpec,
    config: &SolverConfig,
) -> Result<(f64, f64, f64, usize)> {
    let reg = template.build_regularizer()?;
    let smooth_axis = |dom: (f64, f64), mu: &MeasureSpec| -> Result<(GridMeasure, GridFunction)> {
        let p = GridPartition::dyadic_1d(dom.0, dom.1, e.level)?;
        let lam = bin_measure(&MeasureSpec::lebesgue(), &p)?;
        let mu_binned = bin_measure(mu, &p)?;
        let density = binned_density(&mu_binned, &lam)?;
        let mollified = mollify(&density, delta, kernel)?.function;
        let lam_padded = bin_measure(&MeasureSpec::lebesgue(), &mollified.partition)?;
        let masses: Vec<f64> = mollified
            .values
            .iter()
            .zip(&lam_padded.masses)
            .map(|(d, l)| d * l)
            .collect();
        Ok((GridMeasure::new(mollified.partition.clone(), masses)?, mollified))
    };
    let (mu1, density1) = smooth_axis(template.dom1, &template.mu1)?;
    let (mu2, density2) = smooth_axis(template.dom2, &template.mu2)?;
    let lam1 = bin_measure(&MeasureSpec::lebesgue(), &density1.partition)?;
    let lam2 = bin_measure(&MeasureSpec::lebesgue(), &density2.partition)?;

    let axis1 = density1.partition.axis(0).clone();
    let axis2 = density2.partition.axis(0).clone();
    let grid = GridPartition::new_2d(axis1, axis2);
    let cost = cell_average_cost(
        &template.cost,
        &grid,
        &MeasureSpec::lebesgue(),
        &MeasureSpec::lebesgue(),
        3,
    )?;
    let monitor = e.gamma * luxemburg_norm(&reg, &density1, &lam1, 1.0)?;
    let prob = assemble_from_parts(grid, lam1, lam2, mu1, mu2, cost, reg, e.gamma)?;
    let report = solve_regularized(&prob, config)?;
    let (cost_part, _) = primal_parts(&prob, &report.plan);
    Ok((cost_part, monitor, report.marginal_residual_l1, report.iterations))
}

/// Exact unregularized transport value for the template's original
/// (possibly singular) marginals: atom lists get the exact LP on their
/// supports, everything else falls back to a fine-grid LP at cell centers.
pub fn exact_reference_original_marginals(template: &ProblemTemplate) -> Result<f64> {
    let atoms = |spec: &MeasureSpec| -> Option<Vec<(f64, f64)>> {
        let (scale, atoms) = spec.decompose()?;
        if scale == 0.0 && !atoms.is_empty() {
            Some(atoms)
        } else {
            None
        }
    };
    if let (Some(a1), Some(a2)) = (atoms(&template.mu1), atoms(&template.mu2)) {
        let m1: Vec<f64> = a1.iter().map(|(_, m)| *m).collect();
        let m2: Vec<f64> = a2.iter().map(|(_, m)| *m).collect();
        let total1: f64 = m1.iter().sum();
        let total2: f64 = m2.iter().sum();
        let m1: Vec<f64> = m1.iter().map(|m| m / total1).collect();
        let m2: Vec<f64> = m2.iter().map(|m| m / total2).collect();
        let mut cost = vec![0.0; m1.len() * m2.len()];
        for (i, (x, _)) in a1.iter().enumerate() {
            for (j, (y, _)) in a2.iter().enumerate() {
                cost[i * m2.len() + j] = template.cost.eval(*x, *y);
            }
        }
        return Ok(transportation_simplex(&m1, &m2, &cost)?.value);
    }
    // fine-grid fallback at cell centers
    let level = 8;
    let p1 = GridPartition::dyadic_1d(template.dom1.0, template.dom1.1, level)?;
    let p2 = GridPartition::dyadic_1d(template.dom2.0, template.dom2.1, level)?;
    let mu1 = bin_measure(&template.mu1, &p1)?;
    let mu2 = bin_measure(&template.mu2, &p2)?;
    let norm = |m: &GridMeasure| -> Vec<f64> {
        let t = m.total();
        m.masses.iter().map(|x| x / t).collect()
    };
    let (m1, m2) = (norm(&mu1), norm(&mu2));
    let centers = |p: &GridPartition| -> Vec<f64> {
        (0..p.axis(0).n_cells())
            .map(|i| {
                let (lo, hi) = p.axis(0).cell(i);
                0.5 * (lo + hi)
            })
            .collect()
    };
    let (xs, ys) = (centers(&p1), centers(&p2));
    let mut cost = vec![0.0; m1.len() * m2.len()];
    for i in 0..m1.len() {
        for j in 0..m2.len() {
            cost[i * m2.len() + j] = template.cost.eval(xs[i], ys[j]);
        }
    }
    Ok(transportation_simplex(&m1, &m2, &cost)?.value)
}

// ---------------------------------------------------------------------------
// Fixture reproductions
// ---------------------------------------------------------------------------

/// The base/marginal configuration with Lebesgue-plus-atom factors on
/// [-1, 1], a Dirac marginal at the origin and zero cost: the discrete
/// optimum is (1/p)(1+h)^{2-2p} at cell width h, trending to 1/p.
pub fn atom_fixture_template(p: f64) -> ProblemTemplate {
    ProblemTemplate {
        dom1: (-1.0, 1.0),
        dom2: (-1.0, 1.0),
        mu1: MeasureSpec::atom(0.0, 1.0),
        mu2: MeasureSpec::atom(0.0, 1.0),
        lambda1: MeasureSpec::lebesgue_plus_atom(0.0, 1.0),
        lambda2: MeasureSpec::lebesgue_plus_atom(0.0, 1.0),
        cost: CostSpec::Zero,
        regularizer: RegularizerSpec::Power { p },
    }
}

/// Closed-form optimum of the atom fixture at cell width h.
pub fn atom_fixture_closed_form(p: f64, h: f64) -> f64 {
    (1.0 / p) * (1.0 + h).powf(2.0 - 2.0 * p)
}

#[derive(Clone, Debug, Serialize)]
pub struct FixtureLadderRow {
    pub level: u32,
    pub cell_width: f64,
    pub solved: f64,
    pub closed_form: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct DiracIdentityRow {
    pub cell_width: f64,
    pub gamma: f64,
    pub reg_term: f64,
    pub identity: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct FixtureReport {
    /// Atom-base fixture ladder for p = 2 and p = 3.
    pub atom_ladders: Vec<(f64, Vec<FixtureLadderRow>)>,
    /// Entropy regularization term of the binned Dirac plan vs γ·log(h⁻²).
    pub dirac_identity: Vec<DiracIdentityRow>,
    /// Same Dirac plan against the atom-only base: the term is γ·Φ(1) = 0.
    pub dirac_atom_base_terms: Vec<f64>,
}

/// Reruns the two shipped paper-example fixtures over a ladder of grid
/// levels and collects the comparison tables.
pub fn reproduce_fixtures() -> Result<FixtureReport> {
    let mut atom_ladders = Vec::new();
    for p in [2.0, 3.0] {
        let template = atom_fixture_template(p);
        let mut rows = Vec::new();
        for level in 1..=4u32 {
            let reg = template.build_regularizer()?;
            let prob = assemble(
                template.dom1,
                template.dom2,
                &template.mu1,
                &template.mu2,
                &template.lambda1,
                &template.lambda2,
                &template.cost,
                reg,
                1.0,
                level,
            )?;
            let h = prob.grid.axis(0).cell_width(0);
            let report = solve_regularized(&prob, &SolverConfig::default())?;
            rows.push(FixtureLadderRow {
                level,
                cell_width: h,
                solved: report.primal_value,
                closed_form: atom_fixture_closed_form(p, h),
            });
        }
        atom_ladders.push((p, rows));
    }

    let mut dirac_identity = Vec::new();
    for level in 1..=3u32 {
        for gamma in [1.0, 0.1] {
            let (term, h) = dirac_plan_entropy_term(level, gamma)?;
            dirac_identity.push(DiracIdentityRow {
                cell_width: h,
                gamma,
                reg_term: term,
                identity: gamma * (1.0 / (h * h)).ln(),
            });
        }
    }

    let mut dirac_atom_base_terms = Vec::new();
    for level in 1..=3u32 {
        dirac_atom_base_terms.push(dirac_plan_atom_base_term(level, 1.0)?);
    }

    Ok(FixtureReport { atom_ladders, dirac_identity, dirac_atom_base_terms })
}

/// Entropy regularization term γ·Σ Φ(p_ij)·λ1λ2 of the binned Dirac plan on
/// [0,1]² with Lebesgue base, returned with the cell width.
pub fn dirac_plan_entropy_term(level: u32, gamma: f64) -> Result<(f64, f64)> {
    let reg = Regularizer::entropy();
    let grid = GridPartition::dyadic_2d((0.0, 1.0), (0.0, 1.0), level)?;
    let lam = bin_product_measure(&MeasureSpec::lebesgue(), &MeasureSpec::lebesgue(), &grid)?;
    let pi = bin_product_measure(&MeasureSpec::atom(0.0, 1.0), &MeasureSpec::atom(0.0, 1.0), &grid)?;
    let plan = binned_density(&pi, &lam)?;
    let term: f64 = plan
        .values
        .iter()
        .zip(&lam.masses)
        .map(|(p, l)| reg.phi(*p) * l)
        .sum();
    Ok((gamma * term, grid.axis(0).cell_width(0)))
}

/// Same binned Dirac plan against the atom-only base λ̃ = δ₀ ⊗ δ₀: the plan
/// density is 1 on the support cell and the term collapses to γ·Φ(1) = 0.
pub fn dirac_plan_atom_base_term(level: u32, gamma: f64) -> Result<f64> {
    let reg = Regularizer::entropy();
    let grid = GridPartition::dyadic_2d((0.0, 1.0), (0.0, 1.0), level)?;
    let lam = bin_product_measure(
        &MeasureSpec::atom(0.0, 1.0),
        &MeasureSpec::atom(0.0, 1.0),
        &grid,
    )?;
    let pi = bin_product_measure(&MeasureSpec::atom(0.0, 1.0), &MeasureSpec::atom(0.0, 1.0), &grid)?;
    let term: f64 = pi
        .masses
        .iter()
        .zip(&lam.masses)
        .filter(|(_, l)| **l > 0.0)
        .map(|(p, l)| reg.phi(p / l) * l)
        .sum();
    Ok(gamma * term)
}

/// The failing coupling of the Dirac example: dyadic levels on [0,1] with
/// γ_k = 1/(k·ln 2), so that the cell side equals exp(−1/γ_k) and the
/// monotone coupling quantity stalls at exactly 2.
pub fn failing_dirac_schedule(levels: std::ops::RangeInclusive<u32>) -> Result<Schedule> {
    let entries = levels
        .map(|k| ScheduleEntry {
            level: k,
            gamma: 1.0 / (k as f64 * std::f64::consts::LN_2),
            delta: None,
        })
        .collect();
    Schedule::new(CouplingRule::DiscMonotone, entries)
}

/// Template for the failing-coupling run: Dirac marginals at the origin of
/// [0,1]², Lebesgue base, zero cost, entropy regularizer.
pub fn dirac_template() -> ProblemTemplate {
    ProblemTemplate {
        dom1: (0.0, 1.0),
        dom2: (0.0, 1.0),
        mu1: MeasureSpec::atom(0.0, 1.0),
        mu2: MeasureSpec::atom(0.0, 1.0),
        lambda1: MeasureSpec::lebesgue(),
        lambda2: MeasureSpec::lebesgue(),
        cost: CostSpec::Zero,
        regularizer: RegularizerSpec::Entropy,
    }
}
