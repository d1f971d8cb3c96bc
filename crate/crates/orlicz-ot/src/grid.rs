//! Nested grid partitions of compact boxes, discrete measures and densities.
//!
//! A [`GridPartition`] carries one or two axes of sorted cell boundaries.
//! Measures are represented only by their per-cell masses ([`GridMeasure`]);
//! atoms are folded into cells when a [`MeasureSpec`] is binned.  Piecewise
//! constant coefficient arrays ([`GridFunction`]) play the role of densities
//! with respect to a `GridMeasure` on the same partition.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

// ---------------------------------------------------------------------------
// Partitions
// ---------------------------------------------------------------------------

/// Sorted cell boundaries over one compact interval.
#[derive(Clone, Debug, PartialEq)]
pub struct AxisPartition {
    boundaries: Vec<f64>,
}

impl AxisPartition {
    /// Single cell covering `[lo, hi]`.
    pub fn whole(lo: f64, hi: f64) -> Result<Self> {
        Self::from_boundaries(vec![lo, hi])
    }

    pub fn from_boundaries(boundaries: Vec<f64>) -> Result<Self> {
        if boundaries.len() < 2 {
            return Err(Error::InvalidParameter(
                "axis partition needs at least two boundaries".into(),
            ));
        }
        if boundaries.iter().any(|b| !b.is_finite()) || boundaries.windows(2).any(|w| w[0] >= w[1])
        {
            return Err(Error::InvalidParameter(
                "axis boundaries must be finite and strictly increasing".into(),
            ));
        }
        Ok(Self { boundaries })
    }

    /// Uniform partition of `[lo, hi]` into `n` cells.
    pub fn uniform(lo: f64, hi: f64, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidParameter("need at least one cell".into()));
        }
        let w = (hi - lo) / n as f64;
        let mut b: Vec<f64> = (0..n).map(|i| lo + w * i as f64).collect();
        b.push(hi);
        Self::from_boundaries(b)
    }

    pub fn n_cells(&self) -> usize {
        self.boundaries.len() - 1
    }

    pub fn lo(&self) -> f64 {
        self.boundaries[0]
    }

    pub fn hi(&self) -> f64 {
        *self.boundaries.last().unwrap()
    }

    pub fn cell(&self, i: usize) -> (f64, f64) {
        (self.boundaries[i], self.boundaries[i + 1])
    }

    pub fn cell_width(&self, i: usize) -> f64 {
        self.boundaries[i + 1] - self.boundaries[i]
    }

    pub fn boundaries(&self) -> &[f64] {
        &self.boundaries
    }

    /// Cell containing `x`.  Points on a shared interior boundary belong to
    /// the lower-index cell; the left endpoint of the box belongs to cell 0.
    pub fn locate(&self, x: f64) -> Result<usize> {
        if x < self.lo() || x > self.hi() {
            return Err(Error::InvalidMeasure(format!(
                "point {x} outside box [{}, {}]",
                self.lo(),
                self.hi()
            )));
        }
        if x == self.lo() {
            return Ok(0);
        }
        // first boundary >= x, cell index is one less
        let idx = self.boundaries.partition_point(|&b| b < x);
        Ok(idx - 1)
    }

    /// Split every cell in half.
    pub fn refine(&self) -> Self {
        let mut b = Vec::with_capacity(2 * self.n_cells() + 1);
        for i in 0..self.n_cells() {
            let (lo, hi) = self.cell(i);
            b.push(lo);
            b.push(0.5 * (lo + hi));
        }
        b.push(self.hi());
        Self { boundaries: b }
    }

    /// True when all cell widths agree to relative 1e-12.
    pub fn is_uniform(&self) -> bool {
        let w0 = self.cell_width(0);
        (0..self.n_cells()).all(|i| (self.cell_width(i) - w0).abs() <= 1e-12 * w0.abs())
    }
}

/// Nested per-axis cell decomposition of a compact 1-D or 2-D box.
#[derive(Clone, Debug)]
pub struct GridPartition {
    axes: Vec<AxisPartition>,
    level: u32,
    /// Per axis, child cell index -> parent cell index at the previous level.
    /// Present only on partitions produced by [`dyadic_refine`].
    parent_maps: Option<Vec<Vec<usize>>>,
}

// equality is geometric: two partitions agree when their cell boundaries do,
// regardless of refinement provenance
impl PartialEq for GridPartition {
    fn eq(&self, other: &Self) -> bool {
        self.axes == other.axes
    }
}

impl GridPartition {
    pub fn new_1d(axis: AxisPartition) -> Self {
        Self { axes: vec![axis], level: 0, parent_maps: None }
    }

    pub fn new_2d(axis1: AxisPartition, axis2: AxisPartition) -> Self {
        Self { axes: vec![axis1, axis2], level: 0, parent_maps: None }
    }

    /// `[lo, hi]` box refined dyadically `level` times, starting from one cell.
    pub fn dyadic_1d(lo: f64, hi: f64, level: u32) -> Result<Self> {
        let mut p = Self::new_1d(AxisPartition::whole(lo, hi)?);
        for _ in 0..level {
            p = dyadic_refine(&p);
        }
        Ok(p)
    }

    /// Product box refined dyadically `level` times per axis.
    pub fn dyadic_2d(dom1: (f64, f64), dom2: (f64, f64), level: u32) -> Result<Self> {
        let mut p = Self::new_2d(
            AxisPartition::whole(dom1.0, dom1.1)?,
            AxisPartition::whole(dom2.0, dom2.1)?,
        );
        for _ in 0..level {
            p = dyadic_refine(&p);
        }
        Ok(p)
    }

    pub fn n_axes(&self) -> usize {
        self.axes.len()
    }

    pub fn axis(&self, k: usize) -> &AxisPartition {
        &self.axes[k]
    }

    pub fn level(&self) -> u32 {
        self.level
    }

    pub fn parent_maps(&self) -> Option<&[Vec<usize>]> {
        self.parent_maps.as_deref()
    }

    /// Total number of cells (product over axes).
    pub fn n_cells(&self) -> usize {
        self.axes.iter().map(|a| a.n_cells()).product()
    }

    /// Row-major flat index of a 2-axis cell.
    pub fn flat(&self, i: usize, j: usize) -> usize {
        debug_assert_eq!(self.n_axes(), 2);
        i * self.axes[1].n_cells() + j
    }

    /// One-axis view of a 2-axis partition.
    pub fn axis_partition(&self, k: usize) -> GridPartition {
        GridPartition { axes: vec![self.axes[k].clone()], level: self.level, parent_maps: None }
    }

    /// Checks that every cell of `self` lies inside exactly one cell of
    /// `coarser`, axis by axis.
    pub fn nested_in(&self, coarser: &GridPartition) -> bool {
        if self.n_axes() != coarser.n_axes() {
            return false;
        }
        self.axes.iter().zip(&coarser.axes).all(|(f, c)| {
            (0..f.n_cells()).all(|i| {
                let (lo, hi) = f.cell(i);
                match c.locate(0.5 * (lo + hi)) {
                    Ok(k) => {
                        let (clo, chi) = c.cell(k);
                        lo >= clo - 1e-12 && hi <= chi + 1e-12
                    }
                    Err(_) => false,
                }
            })
        })
    }
}

/// Splits each cell in half per axis and records the nesting links.
pub fn dyadic_refine(p: &GridPartition) -> GridPartition {
    let axes: Vec<AxisPartition> = p.axes.iter().map(|a| a.refine()).collect();
    let parent_maps = axes
        .iter()
        .map(|a| (0..a.n_cells()).map(|j| j / 2).collect())
        .collect();
    GridPartition { axes, level: p.level + 1, parent_maps: Some(parent_maps) }
}

// ---------------------------------------------------------------------------
// Measures and functions
// ---------------------------------------------------------------------------

/// Nonnegative cell masses on a partition.
#[derive(Clone, Debug)]
pub struct GridMeasure {
    pub partition: GridPartition,
    pub masses: Vec<f64>,
}

impl GridMeasure {
    pub fn new(partition: GridPartition, masses: Vec<f64>) -> Result<Self> {
        if masses.len() != partition.n_cells() {
            return Err(Error::ShapeMismatch(format!(
                "{} masses for {} cells",
                masses.len(),
                partition.n_cells()
            )));
        }
        if masses.iter().any(|m| !m.is_finite() || *m < 0.0) {
            return Err(Error::InvalidMeasure("cell masses must be finite and >= 0".into()));
        }
        Ok(Self { partition, masses })
    }

    pub fn total(&self) -> f64 {
        self.masses.iter().sum()
    }
}

/// Per-cell real coefficients on a partition (piecewise-constant density).
#[derive(Clone, Debug)]
pub struct GridFunction {
    pub partition: GridPartition,
    pub values: Vec<f64>,
}

impl GridFunction {
    pub fn new(partition: GridPartition, values: Vec<f64>) -> Result<Self> {
        if values.len() != partition.n_cells() {
            return Err(Error::ShapeMismatch(format!(
                "{} values for {} cells",
                values.len(),
                partition.n_cells()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("coefficients must be finite".into()));
        }
        Ok(Self { partition, values })
    }

    pub fn constant(partition: GridPartition, c: f64) -> Result<Self> {
        let n = partition.n_cells();
        Self::new(partition, vec![c; n])
    }
}

// ---------------------------------------------------------------------------
// Measure specifications
// ---------------------------------------------------------------------------

/// Declarative one-axis measure, binnable at any refinement level.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum MeasureSpec {
    Lebesgue { scale: f64 },
    Atom { at: f64, mass: f64 },
    Mixture { parts: Vec<MeasureSpec> },
    /// Tabulated cell masses, assumed to sit on the target partition.
    Cells { masses: Vec<f64> },
}

impl MeasureSpec {
    pub fn lebesgue() -> Self {
        MeasureSpec::Lebesgue { scale: 1.0 }
    }

    pub fn atom(at: f64, mass: f64) -> Self {
        MeasureSpec::Atom { at, mass }
    }

    /// Lebesgue plus a single atom, the Example-3.6 base measure shape.
    pub fn lebesgue_plus_atom(at: f64, mass: f64) -> Self {
        MeasureSpec::Mixture { parts: vec![Self::lebesgue(), Self::atom(at, mass)] }
    }

    pub fn total_mass(&self, lo: f64, hi: f64) -> f64 {
        match self {
            MeasureSpec::Lebesgue { scale } => scale * (hi - lo),
            MeasureSpec::Atom { mass, .. } => *mass,
            MeasureSpec::Mixture { parts } => parts.iter().map(|p| p.total_mass(lo, hi)).sum(),
            MeasureSpec::Cells { masses } => masses.iter().sum(),
        }
    }

    /// Flattens into (total Lebesgue scale, atom list).  `None` for tabulated
    /// cell masses, which carry no continuous provenance.
    pub fn decompose(&self) -> Option<(f64, Vec<(f64, f64)>)> {
        match self {
            MeasureSpec::Lebesgue { scale } => Some((*scale, vec![])),
            MeasureSpec::Atom { at, mass } => Some((0.0, vec![(*at, *mass)])),
            MeasureSpec::Mixture { parts } => {
                let mut scale = 0.0;
                let mut atoms = vec![];
                for p in parts {
                    let (s, a) = p.decompose()?;
                    scale += s;
                    atoms.extend(a);
                }
                Some((scale, atoms))
            }
            MeasureSpec::Cells { .. } => None,
        }
    }
}

/// Exact cell masses of a measure spec on a one-axis partition.  Atom mass is
/// added to the unique containing cell; ties on shared boundaries go to the
/// lower-index cell.
pub fn bin_measure(spec: &MeasureSpec, p: &GridPartition) -> Result<GridMeasure> {
    if p.n_axes() != 1 {
        return Err(Error::ShapeMismatch("bin_measure expects a one-axis partition".into()));
    }
    let axis = p.axis(0);
    let mut masses = vec![0.0; axis.n_cells()];
    bin_into(spec, axis, &mut masses)?;
    GridMeasure::new(p.clone(), masses)
}

fn bin_into(spec: &MeasureSpec, axis: &AxisPartition, masses: &mut [f64]) -> Result<()> {
    match spec {
        MeasureSpec::Lebesgue { scale } => {
            if *scale < 0.0 {
                return Err(Error::InvalidMeasure("negative Lebesgue scale".into()));
            }
            for (i, m) in masses.iter_mut().enumerate() {
                *m += scale * axis.cell_width(i);
            }
        }
        MeasureSpec::Atom { at, mass } => {
            if *mass < 0.0 {
                return Err(Error::InvalidMeasure("negative atom mass".into()));
            }
            masses[axis.locate(*at)?] += mass;
        }
        MeasureSpec::Mixture { parts } => {
            for part in parts {
                bin_into(part, axis, masses)?;
            }
        }
        MeasureSpec::Cells { masses: given } => {
            if given.len() != masses.len() {
                return Err(Error::ShapeMismatch(format!(
                    "{} tabulated masses for {} cells",
                    given.len(),
                    masses.len()
                )));
            }
            for (m, g) in masses.iter_mut().zip(given) {
                if !g.is_finite() || *g < 0.0 {
                    return Err(Error::InvalidMeasure("tabulated mass must be >= 0".into()));
                }
                *m += g;
            }
        }
    }
    Ok(())
}

/// Product binning onto a two-axis partition: cell (i, j) gets m1_i * m2_j.
pub fn bin_product_measure(
    spec1: &MeasureSpec,
    spec2: &MeasureSpec,
    p: &GridPartition,
) -> Result<GridMeasure> {
    if p.n_axes() != 2 {
        return Err(Error::ShapeMismatch("product binning expects a two-axis partition".into()));
    }
    let m1 = bin_measure(spec1, &p.axis_partition(0))?;
    let m2 = bin_measure(spec2, &p.axis_partition(1))?;
    let mut masses = Vec::with_capacity(p.n_cells());
    for a in &m1.masses {
        for b in &m2.masses {
            masses.push(a * b);
        }
    }
    GridMeasure::new(p.clone(), masses)
}

/// Per-cell density of `nu` with respect to `lambda` on a common partition.
pub fn binned_density(nu: &GridMeasure, lambda: &GridMeasure) -> Result<GridFunction> {
    if nu.partition != lambda.partition {
        return Err(Error::ShapeMismatch("binned_density needs a common partition".into()));
    }
    let values = nu
        .masses
        .iter()
        .zip(&lambda.masses)
        .map(|(n, l)| {
            if *l <= 0.0 {
                Err(Error::InvalidMeasure("zero base-measure mass on a cell".into()))
            } else {
                Ok(n / l)
            }
        })
        .collect::<Result<Vec<_>>>()?;
    GridFunction::new(nu.partition.clone(), values)
}

/// Coarsens a density from a fine partition to a nested coarse one:
/// the coarse coefficient is the lambda-weighted cell average.
pub fn coarsen_density(
    f: &GridFunction,
    lambda_fine: &GridMeasure,
    coarse: &GridPartition,
    lambda_coarse: &GridMeasure,
) -> Result<GridFunction> {
    if f.partition != lambda_fine.partition || coarse != &lambda_coarse.partition {
        return Err(Error::ShapeMismatch("coarsen_density partition mismatch".into()));
    }
    if f.partition.n_axes() != coarse.n_axes() {
        return Err(Error::ShapeMismatch("axis count mismatch".into()));
    }
    // map fine cell -> coarse cell through cell midpoints, per axis
    let maps: Vec<Vec<usize>> = (0..coarse.n_axes())
        .map(|k| {
            let fine_axis = f.partition.axis(k);
            let coarse_axis = coarse.axis(k);
            (0..fine_axis.n_cells())
                .map(|i| {
                    let (lo, hi) = fine_axis.cell(i);
                    coarse_axis.locate(0.5 * (lo + hi))
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;

    let mut mass = vec![0.0; coarse.n_cells()];
    match coarse.n_axes() {
        1 => {
            for i in 0..f.values.len() {
                mass[maps[0][i]] += f.values[i] * lambda_fine.masses[i];
            }
        }
        2 => {
            let n2 = f.partition.axis(1).n_cells();
            for i in 0..f.partition.axis(0).n_cells() {
                for j in 0..n2 {
                    let idx = coarse.flat(maps[0][i], maps[1][j]);
                    mass[idx] += f.values[i * n2 + j] * lambda_fine.masses[i * n2 + j];
                }
            }
        }
        _ => unreachable!(),
    }
    let values = mass
        .iter()
        .zip(&lambda_coarse.masses)
        .map(|(m, l)| {
            if *l <= 0.0 {
                Err(Error::InvalidMeasure("zero base-measure mass on a coarse cell".into()))
            } else {
                Ok(m / l)
            }
        })
        .collect::<Result<Vec<_>>>()?;
    GridFunction::new(coarse.clone(), values)
}

/// Marginal density of a two-axis plan density: axis 1 gives
/// `m_i = Σ_j p_ij λ2_j`, axis 2 symmetrically.
pub fn plan_marginal(
    p: &GridFunction,
    lambda1: &GridMeasure,
    lambda2: &GridMeasure,
    axis: usize,
) -> Result<GridFunction> {
    if p.partition.n_axes() != 2 {
        return Err(Error::ShapeMismatch("plan_marginal expects a two-axis density".into()));
    }
    let n1 = p.partition.axis(0).n_cells();
    let n2 = p.partition.axis(1).n_cells();
    if lambda1.masses.len() != n1 || lambda2.masses.len() != n2 {
        return Err(Error::ShapeMismatch("marginal factor sizes disagree with the plan".into()));
    }
    match axis {
        1 => {
            let values = (0..n1)
                .map(|i| (0..n2).map(|j| p.values[i * n2 + j] * lambda2.masses[j]).sum())
                .collect();
            GridFunction::new(p.partition.axis_partition(0), values)
        }
        2 => {
            let values = (0..n2)
                .map(|j| (0..n1).map(|i| p.values[i * n2 + j] * lambda1.masses[i]).sum())
                .collect();
            GridFunction::new(p.partition.axis_partition(1), values)
        }
        _ => Err(Error::InvalidParameter("axis must be 1 or 2".into())),
    }
}

// ---------------------------------------------------------------------------
// Cell-averaged costs
// ---------------------------------------------------------------------------

/// Declarative transport cost.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CostSpec {
    Zero,
    /// |x - y|^2
    SqDist,
    /// |x - y|
    AbsDist,
    /// Row-major matrix, used unchanged (step costs).
    Table { entries: Vec<f64>, n1: usize, n2: usize },
}

impl CostSpec {
    pub fn eval(&self, x: f64, y: f64) -> f64 {
        match self {
            CostSpec::Zero => 0.0,
            CostSpec::SqDist => (x - y) * (x - y),
            CostSpec::AbsDist => (x - y).abs(),
            CostSpec::Table { .. } => f64::NAN,
        }
    }
}

/// Gauss-Legendre nodes and weights on [-1, 1].
fn gauss_legendre(order: usize) -> Vec<(f64, f64)> {
    match order {
        1 => vec![(0.0, 2.0)],
        2 => {
            let a = 1.0 / 3f64.sqrt();
            vec![(-a, 1.0), (a, 1.0)]
        }
        3 => {
            let a = (3.0f64 / 5.0).sqrt();
            vec![(-a, 5.0 / 9.0), (0.0, 8.0 / 9.0), (a, 5.0 / 9.0)]
        }
        4 => {
            let a = (3.0 / 7.0 - 2.0 / 7.0 * (6.0f64 / 5.0).sqrt()).sqrt();
            let b = (3.0 / 7.0 + 2.0 / 7.0 * (6.0f64 / 5.0).sqrt()).sqrt();
            let wa = (18.0 + 30f64.sqrt()) / 36.0;
            let wb = (18.0 - 30f64.sqrt()) / 36.0;
            vec![(-b, wb), (-a, wa), (a, wa), (b, wb)]
        }
        _ => {
            let a = (5.0 - 2.0 * (10.0f64 / 7.0).sqrt()).sqrt() / 3.0;
            let b = (5.0 + 2.0 * (10.0f64 / 7.0).sqrt()).sqrt() / 3.0;
            let wa = (322.0 + 13.0 * 70f64.sqrt()) / 900.0;
            let wb = (322.0 - 13.0 * 70f64.sqrt()) / 900.0;
            vec![(-b, wb), (-a, wa), (0.0, 128.0 / 225.0), (a, wa), (b, wb)]
        }
    }
}

/// lambda-weighted cell averages `c^k_ij = ∫_{I_ij} c dλ / (λ1_i λ2_j)`.
///
/// Base measures are taken as specs so that the integral can split into a
/// tensor Gauss-Legendre part over the Lebesgue components plus exact atom
/// evaluations.  Tabulated cell-mass measures are treated as piecewise
/// uniform, for which the weights cancel and the plain Lebesgue average
/// remains.
pub fn cell_average_cost(
    cost: &CostSpec,
    grid: &GridPartition,
    lambda1: &MeasureSpec,
    lambda2: &MeasureSpec,
    order: usize,
) -> Result<Vec<f64>> {
    if grid.n_axes() != 2 {
        return Err(Error::ShapeMismatch("cost averaging expects a two-axis partition".into()));
    }
    let (n1, n2) = (grid.axis(0).n_cells(), grid.axis(1).n_cells());

    if let CostSpec::Table { entries, n1: t1, n2: t2 } = cost {
        if *t1 != n1 || *t2 != n2 {
            return Err(Error::ShapeMismatch(format!(
                "cost table is {t1}x{t2}, grid is {n1}x{n2}"
            )));
        }
        if entries.iter().any(|e| !e.is_finite()) {
            return Err(Error::InvalidParameter(
                "tabulated cost must be finite (bounded below)".into(),
            ));
        }
        return Ok(entries.clone());
    }

    let order = order.clamp(1, 5);
    let gl = gauss_legendre(order);
    // per-axis decomposition into Lebesgue scale + atoms; tabulated masses
    // fall back to the pure Lebesgue average (weights cancel).
    let decomp = |spec: &MeasureSpec| spec.decompose().unwrap_or((1.0, vec![]));
    let (s1, atoms1) = decomp(lambda1);
    let (s2, atoms2) = decomp(lambda2);
    let pure_lebesgue = matches!(lambda1, MeasureSpec::Cells { .. })
        || matches!(lambda2, MeasureSpec::Cells { .. });
    let (s1, s2) = if pure_lebesgue { (1.0, 1.0) } else { (s1, s2) };

    let axis1 = grid.axis(0);
    let axis2 = grid.axis(1);
    let mut out = vec![0.0; n1 * n2];
    for i in 0..n1 {
        let (x_lo, x_hi) = axis1.cell(i);
        let wx = x_hi - x_lo;
        let cell_atoms1: Vec<(f64, f64)> = atoms1
            .iter()
            .copied()
            .filter(|(a, _)| axis1.locate(*a).map(|c| c == i).unwrap_or(false))
            .collect();
        let mass1 = s1 * wx + cell_atoms1.iter().map(|(_, m)| m).sum::<f64>();
        for j in 0..n2 {
            let (y_lo, y_hi) = axis2.cell(j);
            let wy = y_hi - y_lo;
            let cell_atoms2: Vec<(f64, f64)> = atoms2
                .iter()
                .copied()
                .filter(|(a, _)| axis2.locate(*a).map(|c| c == j).unwrap_or(false))
                .collect();
            let mass2 = s2 * wy + cell_atoms2.iter().map(|(_, m)| m).sum::<f64>();
            if mass1 <= 0.0 || mass2 <= 0.0 {
                return Err(Error::InvalidMeasure(
                    "zero base-measure mass on a cell while averaging the cost".into(),
                ));
            }

            let mut integral = 0.0;
            // Lebesgue x Lebesgue
            if s1 > 0.0 && s2 > 0.0 {
                let mut acc = 0.0;
                for &(tx, wgx) in &gl {
                    let x = 0.5 * (x_lo + x_hi) + 0.5 * wx * tx;
                    for &(ty, wgy) in &gl {
                        let y = 0.5 * (y_lo + y_hi) + 0.5 * wy * ty;
                        acc += wgx * wgy * cost.eval(x, y);
                    }
                }
                integral += s1 * s2 * acc * 0.25 * wx * wy;
            }
            // Lebesgue x atom and atom x Lebesgue
            for &(b, mb) in &cell_atoms2 {
                if s1 > 0.0 {
                    let mut acc = 0.0;
                    for &(tx, wgx) in &gl {
                        let x = 0.5 * (x_lo + x_hi) + 0.5 * wx * tx;
                        acc += wgx * cost.eval(x, b);
                    }
                    integral += s1 * mb * acc * 0.5 * wx;
                }
            }
            for &(a, ma) in &cell_atoms1 {
                if s2 > 0.0 {
                    let mut acc = 0.0;
                    for &(ty, wgy) in &gl {
                        let y = 0.5 * (y_lo + y_hi) + 0.5 * wy * ty;
                        acc += wgy * cost.eval(a, y);
                    }
                    integral += s2 * ma * acc * 0.5 * wy;
                }
                for &(b, mb) in &cell_atoms2 {
                    integral += ma * mb * cost.eval(a, b);
                }
            }
            out[i * n2 + j] = integral / (mass1 * mass2);
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Mollification
// ---------------------------------------------------------------------------

/// Smoothing kernel on the grid, normalized to unit discrete integral.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum KernelSpec {
    /// C^2 bump (1 - (x/δ)^2)^3, clipped and renormalized on the grid.
    Bump,
    /// Explicit half-kernel weights w_0..w_R (symmetric), renormalized.
    Weights { half: Vec<f64> },
}

/// Mollified density plus a degeneracy flag (set when δ is below one cell
/// width and the kernel collapses to the identity).
#[derive(Clone, Debug)]
pub struct Mollified {
    pub function: GridFunction,
    pub degenerate: bool,
}

fn kernel_weights(kernel: &KernelSpec, delta: f64, h: f64) -> Result<Vec<f64>> {
    let radius = (delta / h).floor() as i64;
    if radius < 1 {
        return Ok(vec![1.0]);
    }
    let mut w: Vec<f64> = match kernel {
        KernelSpec::Bump => (-radius..=radius)
            .map(|m| {
                let u = m as f64 * h / delta;
                (1.0 - u * u).max(0.0).powi(3)
            })
            .collect(),
        KernelSpec::Weights { half } => {
            let r = half.len() as i64 - 1;
            (-r..=r).map(|m| half[m.unsigned_abs() as usize]).collect()
        }
    };
    if w.iter().any(|x| !x.is_finite() || *x < 0.0) {
        return Err(Error::InvalidParameter("kernel weights must be >= 0".into()));
    }
    let s: f64 = w.iter().sum();
    if s <= 0.0 {
        return Err(Error::InvalidParameter("kernel has zero mass".into()));
    }
    for x in &mut w {
        *x /= s;
    }
    Ok(w)
}

fn padded_axis(axis: &AxisPartition, pad: usize) -> AxisPartition {
    let h = axis.cell_width(0);
    let n = axis.n_cells();
    let lo = axis.lo();
    let mut b = Vec::with_capacity(n + 2 * pad + 1);
    for m in 0..(n + 2 * pad + 1) {
        b.push(lo + h * (m as f64 - pad as f64));
    }
    AxisPartition { boundaries: b }
}

fn convolve_axis(values: &[f64], n1: usize, n2: usize, axis: usize, w: &[f64]) -> Vec<f64> {
    let r = (w.len() - 1) / 2;
    let mut out = vec![0.0; n1 * n2];
    for i in 0..n1 {
        for j in 0..n2 {
            let mut acc = 0.0;
            for (k, wk) in w.iter().enumerate() {
                let off = k as i64 - r as i64;
                let (si, sj) = if axis == 0 { (i as i64 - off, j as i64) } else { (i as i64, j as i64 - off) };
                if si >= 0 && (si as usize) < n1 && sj >= 0 && (sj as usize) < n2 {
                    acc += wk * values[si as usize * n2 + sj as usize];
                }
            }
            out[i * n2 + j] = acc;
        }
    }
    out
}

/// Discrete mollification of a density with respect to uniform Lebesgue
/// cells.  The result lives on a partition zero-padded by the kernel support;
/// total mass is preserved exactly by kernel normalization.
pub fn mollify(f: &GridFunction, delta: f64, kernel: &KernelSpec) -> Result<Mollified> {
    if delta <= 0.0 {
        return Err(Error::InvalidParameter("mollification width must be > 0".into()));
    }
    for k in 0..f.partition.n_axes() {
        if !f.partition.axis(k).is_uniform() {
            return Err(Error::InvalidParameter(
                "mollification needs uniform Lebesgue cells".into(),
            ));
        }
    }
    let h = f.partition.axis(0).cell_width(0);
    if f.partition.n_axes() == 2 {
        let h2 = f.partition.axis(1).cell_width(0);
        if (h - h2).abs() > 1e-12 * h {
            return Err(Error::InvalidParameter(
                "mollification needs equal cell widths on both axes".into(),
            ));
        }
    }
    let w = kernel_weights(kernel, delta, h)?;
    if w.len() == 1 {
        return Ok(Mollified { function: f.clone(), degenerate: true });
    }
    let pad = (w.len() - 1) / 2;

    match f.partition.n_axes() {
        1 => {
            let axis = padded_axis(f.partition.axis(0), pad);
            let n = axis.n_cells();
            let mut vals = vec![0.0; n];
            vals[pad..pad + f.values.len()].copy_from_slice(&f.values);
            let out = convolve_axis(&vals, n, 1, 0, &w);
            Ok(Mollified {
                function: GridFunction::new(GridPartition::new_1d(axis), out)?,
                degenerate: false,
            })
        }
        2 => {
            let a1 = padded_axis(f.partition.axis(0), pad);
            let a2 = padded_axis(f.partition.axis(1), pad);
            let (n1, n2) = (a1.n_cells(), a2.n_cells());
            let old_n2 = f.partition.axis(1).n_cells();
            let mut vals = vec![0.0; n1 * n2];
            for i in 0..f.partition.axis(0).n_cells() {
                for j in 0..old_n2 {
                    vals[(i + pad) * n2 + (j + pad)] = f.values[i * old_n2 + j];
                }
            }
            let tmp = convolve_axis(&vals, n1, n2, 0, &w);
            let out = convolve_axis(&tmp, n1, n2, 1, &w);
            Ok(Mollified {
                function: GridFunction::new(GridPartition::new_2d(a1, a2), out)?,
                degenerate: false,
            })
        }
        _ => unreachable!(),
    }
}

// ---------------------------------------------------------------------------
// Partition quality (Assumption on inner/outer cell unions)
// ---------------------------------------------------------------------------

/// ν(A⁺) − ν(A⁻) for an axis-aligned box A, where A⁻ unions the cells inside
/// A and A⁺ unions the cells meeting A.
pub fn partition_gap(a: &[(f64, f64)], p: &GridPartition, nu: &GridMeasure) -> Result<f64> {
    if a.len() != p.n_axes() || &nu.partition != p {
        return Err(Error::ShapeMismatch("partition_gap shape mismatch".into()));
    }
    // per-axis classification: 0 outside, 1 meets, 2 inside
    let classify = |axis: &AxisPartition, (alo, ahi): (f64, f64)| -> Vec<u8> {
        (0..axis.n_cells())
            .map(|i| {
                let (lo, hi) = axis.cell(i);
                if lo >= alo && hi <= ahi {
                    2
                } else if hi >= alo && lo <= ahi {
                    1
                } else {
                    0
                }
            })
            .collect()
    };
    let marks: Vec<Vec<u8>> = (0..p.n_axes()).map(|k| classify(p.axis(k), a[k])).collect();
    let mut inner = 0.0;
    let mut outer = 0.0;
    match p.n_axes() {
        1 => {
            for (i, m) in marks[0].iter().enumerate() {
                if *m == 2 {
                    inner += nu.masses[i];
                }
                if *m >= 1 {
                    outer += nu.masses[i];
                }
            }
        }
        2 => {
            let n2 = p.axis(1).n_cells();
            for (i, mi) in marks[0].iter().enumerate() {
                for (j, mj) in marks[1].iter().enumerate() {
                    let mass = nu.masses[i * n2 + j];
                    if *mi == 2 && *mj == 2 {
                        inner += mass;
                    }
                    if *mi >= 1 && *mj >= 1 {
                        outer += mass;
                    }
                }
            }
        }
        _ => unreachable!(),
    }
    Ok(outer - inner)
}
