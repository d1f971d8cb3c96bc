//! Young's-function calculus.
//!
//! A [`Regularizer`] bundles a convex integrand Φ on [0, ∞) together with its
//! derivative density φ, the convex conjugate of the extension of Φ to the
//! real line by +∞, the conjugate derivative, and the slope threshold
//! r₀ = inf_{τ>0} ∂Φ(τ) below which the extended conjugate is constant at
//! −Φ(0).
//!
//! Builtin families:
//!
//! * entropy: Φ(t) = t·log t (quasi-Young's, Φ(0) = 0 by continuity),
//!   extended conjugate e^{r−1};
//! * power(p), p > 1: Φ(t) = t^p/p, extended conjugate (r₊)^q/q;
//! * tsallis(q), q > 1: Φ(t) = (t^q − t)/(q − 1);
//! * custom: tabulated monotone density (t, φ(t)) pairs with linear
//!   interpolation, conjugated numerically.
//!
//! Analytic conjugates of builtins are cross-checked against the numeric
//! Legendre oracle at construction time and the constructor fails on
//! disagreement beyond 1e-4.

use serde::{Deserialize, Serialize};

use crate::grid::{GridFunction, GridMeasure};
use crate::{Error, Result};

/// Family tag of a regularizer.
#[derive(Clone, Debug, PartialEq)]
pub enum Family {
    Entropy,
    Power(f64),
    Tsallis(f64),
    Shifted { t0: f64 },
    Custom,
    Complementary,
}

/// Regularizer description as it appears in config files.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum RegularizerSpec {
    Entropy,
    Power { p: f64 },
    Tsallis { q: f64 },
    Custom { density_table: Vec<(f64, f64)> },
}

#[derive(Clone, Debug)]
enum Kind {
    Entropy,
    Power { p: f64, q: f64 },
    Tsallis { q: f64 },
    Shifted { t0: f64, phi_t0: f64, base: Box<Kind> },
    Custom(DensityTable),
    Complementary { base: Box<Kind> },
}

/// Young's or quasi-Young's function bundle.  Immutable after construction;
/// all operations are pure.
#[derive(Clone, Debug)]
pub struct Regularizer {
    kind: Kind,
    family: Family,
    slope_threshold: f64,
    phi_at_zero: f64,
}

// ---------------------------------------------------------------------------
// Tabulated densities
// ---------------------------------------------------------------------------

/// Monotone (t, φ(t)) pairs, linearly interpolated.  Two consecutive entries
/// may share the same t to encode a jump; φ is then left-continuous there.
/// Beyond the last entry the final segment slope is continued.
#[derive(Clone, Debug)]
pub struct DensityTable {
    ts: Vec<f64>,
    phis: Vec<f64>,
    /// cumulative exact integrals of the interpolant at the nodes
    cumulative: Vec<f64>,
}

impl DensityTable {
    pub fn new(pairs: &[(f64, f64)]) -> Result<Self> {
        if pairs.len() < 2 {
            return Err(Error::InvalidParameter("density table needs at least two rows".into()));
        }
        if pairs[0].0 != 0.0 || pairs[0].1 != 0.0 {
            return Err(Error::NotYoungs("density table must start at (0, 0)".into()));
        }
        let ts: Vec<f64> = pairs.iter().map(|p| p.0).collect();
        let phis: Vec<f64> = pairs.iter().map(|p| p.1).collect();
        if ts.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::InvalidParameter("table abscissae must be nondecreasing".into()));
        }
        if phis.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::NotYoungs("density values must be nondecreasing".into()));
        }
        if ts.iter().chain(phis.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("table entries must be finite".into()));
        }
        let mut cumulative = vec![0.0; ts.len()];
        for k in 1..ts.len() {
            // trapezoid is exact for a piecewise-linear density
            cumulative[k] =
                cumulative[k - 1] + 0.5 * (phis[k] + phis[k - 1]) * (ts[k] - ts[k - 1]);
        }
        Ok(Self { ts, phis, cumulative })
    }

    /// Left-continuous interpolated density.
    fn density(&self, t: f64) -> f64 {
        let n = self.ts.len();
        if t <= self.ts[0] {
            return self.phis[0];
        }
        // first node >= t; left-continuity picks the earlier row at a jump
        let k = self.ts.partition_point(|&x| x < t);
        if k >= n {
            // extend the last segment's slope
            let slope = self.last_slope();
            return self.phis[n - 1] + slope * (t - self.ts[n - 1]);
        }
        let (t0, t1) = (self.ts[k - 1], self.ts[k]);
        if t1 == t0 {
            return self.phis[k - 1];
        }
        let w = (t - t0) / (t1 - t0);
        self.phis[k - 1] + w * (self.phis[k] - self.phis[k - 1])
    }

    fn last_slope(&self) -> f64 {
        let n = self.ts.len();
        for k in (1..n).rev() {
            if self.ts[k] > self.ts[k - 1] {
                return (self.phis[k] - self.phis[k - 1]) / (self.ts[k] - self.ts[k - 1]);
            }
        }
        0.0
    }

    /// Exact integral of the interpolated density on [0, t].
    fn phi(&self, t: f64) -> f64 {
        let n = self.ts.len();
        if t <= 0.0 {
            return 0.0;
        }
        if t >= self.ts[n - 1] {
            let dt = t - self.ts[n - 1];
            let slope = self.last_slope();
            return self.cumulative[n - 1] + self.phis[n - 1] * dt + 0.5 * slope * dt * dt;
        }
        let k = self.ts.partition_point(|&x| x < t);
        let (t0, d0) = (self.ts[k - 1], self.phis[k - 1]);
        let d = self.density(t);
        self.cumulative[k - 1] + 0.5 * (d0 + d) * (t - t0)
    }
}

// ---------------------------------------------------------------------------
// Kind-level evaluation
// ---------------------------------------------------------------------------

impl Kind {
    fn phi(&self, t: f64) -> f64 {
        debug_assert!(t >= 0.0);
        match self {
            Kind::Entropy => {
                if t == 0.0 {
                    0.0
                } else {
                    t * t.ln()
                }
            }
            Kind::Power { p, .. } => t.powf(*p) / p,
            Kind::Tsallis { q } => (t.powf(*q) - t) / (q - 1.0),
            Kind::Shifted { phi_t0, base, .. } => (base.phi(t) - phi_t0).max(0.0),
            Kind::Custom(table) => table.phi(t),
            Kind::Complementary { base } => complementary_phi(base, t),
        }
    }

    fn density(&self, t: f64) -> f64 {
        debug_assert!(t >= 0.0);
        match self {
            Kind::Entropy => {
                if t == 0.0 {
                    f64::NEG_INFINITY
                } else {
                    t.ln() + 1.0
                }
            }
            Kind::Power { p, .. } => t.powf(p - 1.0),
            Kind::Tsallis { q } => (q * t.powf(q - 1.0) - 1.0) / (q - 1.0),
            Kind::Shifted { t0, base, .. } => {
                if t <= *t0 {
                    0.0
                } else {
                    base.density(t)
                }
            }
            Kind::Custom(table) => table.density(t),
            Kind::Complementary { base } => monotone_inverse(base, t),
        }
    }

    /// Analytic extended conjugate, when the family has one.
    fn conjugate_analytic(&self, r: f64) -> Option<f64> {
        match self {
            Kind::Entropy => Some((r - 1.0).exp()),
            Kind::Power { q, .. } => Some(r.max(0.0).powf(*q) / q),
            Kind::Tsallis { q } => {
                let s = ((q - 1.0) * r + 1.0) / q;
                Some(if s <= 0.0 { 0.0 } else { s.powf(q / (q - 1.0)) })
            }
            // bipolar pair: the extended conjugate of Ψ = Φ* is Φ itself on
            // [0, ∞) and −Ψ(0) = 0 on the negatives
            Kind::Complementary { base } => Some(if r <= 0.0 { 0.0 } else { base.phi(r) }),
            Kind::Shifted { .. } | Kind::Custom(_) => None,
        }
    }

    fn conjugate_deriv_analytic(&self, r: f64) -> Option<f64> {
        match self {
            Kind::Entropy => Some((r - 1.0).exp()),
            Kind::Power { q, .. } => Some(r.max(0.0).powf(q - 1.0)),
            Kind::Tsallis { q } => {
                let s = ((q - 1.0) * r + 1.0) / q;
                Some(if s <= 0.0 { 0.0 } else { s.powf(1.0 / (q - 1.0)) })
            }
            Kind::Complementary { base } => Some(if r <= 0.0 { 0.0 } else { base.density(r) }),
            Kind::Shifted { .. } | Kind::Custom(_) => None,
        }
    }

    fn is_youngs(&self) -> bool {
        match self {
            Kind::Entropy | Kind::Tsallis { .. } => false,
            Kind::Power { .. } => true,
            Kind::Shifted { base, .. } => base.is_youngs(),
            Kind::Custom(_) => true, // construction enforces φ(0) = 0, φ nondecreasing
            Kind::Complementary { base } => base.is_youngs(),
        }
    }
}

/// ψ(s) = inf { t : φ(t) ≥ s } by geometric bracket growth plus bisection.
fn monotone_inverse(base: &Kind, s: f64) -> f64 {
    if s <= 0.0 {
        return 0.0;
    }
    if base.density(0.0) >= s {
        return 0.0;
    }
    let mut hi = 1.0;
    let mut grow = 0;
    while base.density(hi) < s {
        hi *= 2.0;
        grow += 1;
        if grow > 1100 {
            return f64::INFINITY; // density saturates below s
        }
    }
    let mut lo = if hi > 1.0 { hi / 2.0 } else { 0.0 };
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if base.density(mid) >= s {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo <= 1e-14 * (1.0 + hi.abs()) {
            break;
        }
    }
    hi
}

/// Ψ(t) = ∫₀ᵗ ψ with ψ the monotone inverse of the base density, by adaptive
/// Simpson quadrature.
fn complementary_phi(base: &Kind, t: f64) -> f64 {
    if t <= 0.0 {
        return 0.0;
    }
    let f = |x: f64| monotone_inverse(base, x);
    adaptive_simpson(&f, 0.0, t, 1e-10, 24)
}

fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64, depth: u32) -> f64 {
    fn simpson(fa: f64, fm: f64, fb: f64, h: f64) -> f64 {
        h / 6.0 * (fa + 4.0 * fm + fb)
    }
    struct Segment {
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
    }
    fn rec(f: &dyn Fn(f64) -> f64, s: &Segment, tol: f64, depth: u32) -> f64 {
        if !s.whole.is_finite() {
            return s.whole;
        }
        let m = 0.5 * (s.a + s.b);
        let flm = f(0.5 * (s.a + m));
        let frm = f(0.5 * (m + s.b));
        let left = simpson(s.fa, flm, s.fm, m - s.a);
        let right = simpson(s.fm, frm, s.fb, s.b - m);
        if depth == 0 || (left + right - s.whole).abs() <= 15.0 * tol {
            left + right + (left + right - s.whole) / 15.0
        } else {
            let ls = Segment { a: s.a, b: m, fa: s.fa, fm: flm, fb: s.fm, whole: left };
            let rs = Segment { a: m, b: s.b, fa: s.fm, fm: frm, fb: s.fb, whole: right };
            rec(f, &ls, 0.5 * tol, depth - 1) + rec(f, &rs, 0.5 * tol, depth - 1)
        }
    }
    let m = 0.5 * (a + b);
    let (fa, fm, fb) = (f(a), f(m), f(b));
    let seg = Segment { a, b, fa, fm, fb, whole: simpson(fa, fm, fb, b - a) };
    rec(f, &seg, tol, depth)
}

// ---------------------------------------------------------------------------
// Public surface
// ---------------------------------------------------------------------------

impl Regularizer {
    /// Negative entropy Φ(t) = t·log t, the LlogL integrand.  Quasi-Young's:
    /// Φ(0) = 0 by continuous extension, minimum −1/e at t = 1/e.
    pub fn entropy() -> Regularizer {
        Self::finish(Kind::Entropy, Family::Entropy, f64::NEG_INFINITY)
            .expect("entropy conjugate cross-check")
    }

    /// Power regularizer Φ(t) = t^p / p for p > 1.
    pub fn power(p: f64) -> Result<Regularizer> {
        if !p.is_finite() || p <= 1.0 {
            return Err(Error::InvalidParameter(format!("power exponent must be > 1, got {p}")));
        }
        let q = p / (p - 1.0);
        Self::finish(Kind::Power { p, q }, Family::Power(p), 0.0)
    }

    /// Tsallis regularizer Φ(t) = (t^q − t)/(q − 1) for q > 1.
    pub fn tsallis(q: f64) -> Result<Regularizer> {
        if !q.is_finite() || q <= 1.0 {
            return Err(Error::InvalidParameter(format!("tsallis exponent must be > 1, got {q}")));
        }
        Self::finish(Kind::Tsallis { q }, Family::Tsallis(q), -1.0 / (q - 1.0))
    }

    /// Custom Young's function from a tabulated monotone density.
    pub fn custom(pairs: &[(f64, f64)]) -> Result<Regularizer> {
        let table = DensityTable::new(pairs)?;
        let kind = Kind::Custom(table);
        let r0 = limit_slope_threshold(&kind);
        Self::finish(kind, Family::Custom, r0)
    }

    pub fn from_spec(spec: &RegularizerSpec) -> Result<Regularizer> {
        match spec {
            RegularizerSpec::Entropy => Ok(Self::entropy()),
            RegularizerSpec::Power { p } => Self::power(*p),
            RegularizerSpec::Tsallis { q } => Self::tsallis(*q),
            RegularizerSpec::Custom { density_table } => Self::custom(density_table),
        }
    }

    fn finish(kind: Kind, family: Family, slope_threshold: f64) -> Result<Regularizer> {
        let reg =
            Regularizer { kind, family, slope_threshold, phi_at_zero: 0.0 };
        reg.validate()?;
        Ok(reg)
    }

    fn validate(&self) -> Result<()> {
        // superlinearity proxy: Φ(t)/t strictly increasing on three decades
        let ratios: Vec<f64> = [1e2, 1e4, 1e6].iter().map(|&t| self.phi(t) / t).collect();
        if !(ratios[0] < ratios[1] && ratios[1] < ratios[2]) {
            return Err(Error::NotYoungs(
                "Φ(t)/t must increase towards infinity (superlinearity)".into(),
            ));
        }
        // sampled convexity
        for k in 0..20 {
            let s = 0.13 + 2.3 * k as f64;
            let t = 50.0 - 2.2 * k as f64;
            let theta = (k as f64 + 0.5) / 20.0;
            let mid = self.phi(theta * s + (1.0 - theta) * t);
            let chord = theta * self.phi(s) + (1.0 - theta) * self.phi(t);
            if mid > chord + 1e-9 * (1.0 + chord.abs()) {
                return Err(Error::NotYoungs("sampled convexity violated".into()));
            }
        }
        // sampled monotone density
        let mut prev = self.density(1e-6);
        for k in 1..30 {
            let d = self.density(1e-6 + k as f64 * 0.7);
            if d + 1e-12 < prev {
                return Err(Error::NotYoungs("density must be nondecreasing".into()));
            }
            prev = d;
        }
        // analytic conjugates must agree with the numeric Legendre oracle
        if self.kind.conjugate_analytic(0.0).is_some()
            && !matches!(self.kind, Kind::Complementary { .. })
        {
            let anchor = self.slope_threshold.max(-10.0);
            for k in 0..9 {
                let r = anchor - 2.0 + k as f64;
                let numeric = numeric_legendre(self, r)?;
                let analytic = self.conjugate(r);
                if (numeric - analytic).abs() > 1e-4 * (1.0 + analytic.abs()) {
                    return Err(Error::ConjugateMismatch(format!(
                        "family {:?} at r = {r}: analytic {analytic} vs numeric {numeric}",
                        self.family
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn family(&self) -> &Family {
        &self.family
    }

    /// Φ(t) on [0, ∞).
    pub fn phi(&self, t: f64) -> f64 {
        self.kind.phi(t)
    }

    /// Extension of Φ to the real line by +∞.
    pub fn ext_value(&self, t: f64) -> f64 {
        if t < 0.0 {
            f64::INFINITY
        } else {
            self.kind.phi(t)
        }
    }

    /// Left-continuous nondecreasing derivative density φ.
    pub fn density(&self, t: f64) -> f64 {
        self.kind.density(t)
    }

    /// (ext Φ)*(r); equals Φ*(r) above the slope threshold and −Φ(0) below.
    pub fn conjugate(&self, r: f64) -> f64 {
        match self.kind.conjugate_analytic(r) {
            Some(v) => v,
            None => {
                if r <= self.slope_threshold {
                    -self.phi_at_zero
                } else {
                    numeric_legendre(self, r).unwrap_or(f64::INFINITY)
                }
            }
        }
    }

    /// ((ext Φ)*)'(r), nondecreasing with values in [0, ∞).
    pub fn conjugate_deriv(&self, r: f64) -> f64 {
        match self.kind.conjugate_deriv_analytic(r) {
            Some(v) => v,
            None => {
                if r <= self.slope_threshold {
                    0.0
                } else {
                    numeric_legendre_with_argmax(self, r).map(|(_, t)| t).unwrap_or(f64::INFINITY)
                }
            }
        }
    }

    /// r₀ = inf_{τ>0} ∂Φ(τ).
    pub fn slope_threshold(&self) -> f64 {
        self.slope_threshold
    }

    pub fn phi_at_zero(&self) -> f64 {
        self.phi_at_zero
    }

    /// True for Young's functions proper (φ ≥ 0, Φ(0) = 0); false for merely
    /// quasi-Young's families like entropy and Tsallis.
    pub fn is_youngs(&self) -> bool {
        self.kind.is_youngs()
    }

    /// Complementary Young's function Ψ with ψ(s) = inf { t : φ(t) ≥ s },
    /// computed by monotone inversion.  Requires a Young's function.
    pub fn complementary(&self) -> Result<Regularizer> {
        if !self.is_youngs() {
            return Err(Error::NotYoungs(
                "complementation needs a Young's function, not a quasi-Young's one".into(),
            ));
        }
        let kind = Kind::Complementary { base: Box::new(self.kind.clone()) };
        let r0 = limit_slope_threshold(&kind);
        // Superlinearity of Ψ can fail when φ is bounded (Ψ is then +∞ beyond
        // a point, which is fine for norm computations), so skip the generic
        // validation and build directly.
        Ok(Regularizer { kind, family: Family::Complementary, slope_threshold: r0, phi_at_zero: 0.0 })
    }

    /// The shifted positive part Φ̃(t) = (Φ(t) − Φ(t₀))₊ with density
    /// φ·1_{(t₀,∞)}; spans the same Orlicz space as Φ.
    pub fn shifted_positive_part(&self, t0: f64) -> Result<Regularizer> {
        if !self.is_youngs() {
            return Err(Error::NotYoungs("shifting needs a Young's function".into()));
        }
        if t0 < 0.0 {
            return Err(Error::InvalidParameter("shift point must be >= 0".into()));
        }
        if t0 == 0.0 {
            return Ok(self.clone());
        }
        let phi_t0 = self.kind.phi(t0);
        let kind = Kind::Shifted { t0, phi_t0, base: Box::new(self.kind.clone()) };
        let r0 = 0.0; // density vanishes on (0, t0]
        Ok(Regularizer { kind, family: Family::Shifted { t0 }, slope_threshold: r0, phi_at_zero: 0.0 })
    }
}

/// Slope threshold as the limit of the density from the right on a geometric
/// grid 1e-1 .. 1e-12; −∞ when no finite limit is detected.
fn limit_slope_threshold(kind: &Kind) -> f64 {
    let mut prev = f64::NAN;
    let mut t = 1e-1;
    let mut last = f64::NAN;
    while t >= 1e-12 {
        last = kind.density(t);
        if !prev.is_nan() && (last - prev).abs() <= 1e-9 * (1.0 + last.abs()) {
            return last;
        }
        prev = last;
        t *= 1e-1;
    }
    if last.is_finite() {
        last
    } else {
        f64::NEG_INFINITY
    }
}

// ---------------------------------------------------------------------------
// Numeric Legendre transform
// ---------------------------------------------------------------------------

/// Options for the numeric Legendre oracle.
#[derive(Clone, Debug)]
pub struct LegendreOptions {
    /// Initial bracket hint for the maximizer search.
    pub t_max_hint: Option<f64>,
    /// Stop once successive best values differ by less than this.
    pub value_tol: f64,
}

impl Default for LegendreOptions {
    fn default() -> Self {
        Self { t_max_hint: None, value_tol: 1e-10 }
    }
}

/// sup_{t ≥ 0} ( r·t − Φ(t) ) via geometric bracket growth and golden-section
/// refinement.  This is the independent oracle for the analytic conjugates.
pub fn numeric_legendre(reg: &Regularizer, r: f64) -> Result<f64> {
    numeric_legendre_with_argmax(reg, r).map(|(v, _)| v)
}

/// Same as [`numeric_legendre`], returning the maximizer as well (which is
/// the conjugate derivative wherever the supremum is attained).
pub fn numeric_legendre_with_argmax(reg: &Regularizer, r: f64) -> Result<(f64, f64)> {
    numeric_legendre_opts(reg, r, &LegendreOptions::default())
}

pub fn numeric_legendre_opts(
    reg: &Regularizer,
    r: f64,
    opts: &LegendreOptions,
) -> Result<(f64, f64)> {
    let g = |t: f64| r * t - reg.phi(t);

    // grow until the objective decreases at the tail
    let mut hi = opts.t_max_hint.unwrap_or(1.0).max(1e-6);
    let mut g_half = g(0.5 * hi);
    let mut g_hi = g(hi);
    let mut grown = 0;
    while g_hi >= g_half {
        hi *= 2.0;
        g_half = g_hi;
        g_hi = g(hi);
        grown += 1;
        if grown > 400 {
            return Err(Error::BracketFailure(format!(
                "no decreasing tail up to t = {hi:.3e} for r = {r}"
            )));
        }
    }

    // golden-section on [0, hi]; r·t − Φ(t) is concave, hence unimodal
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (0.0, hi);
    let mut x1 = b - inv_phi * (b - a);
    let mut x2 = a + inv_phi * (b - a);
    let mut f1 = g(x1);
    let mut f2 = g(x2);
    let mut best_prev = f64::NEG_INFINITY;
    for _ in 0..300 {
        if f1 < f2 {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + inv_phi * (b - a);
            f2 = g(x2);
        } else {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - inv_phi * (b - a);
            f1 = g(x1);
        }
        let best = f1.max(f2);
        if (best - best_prev).abs() < opts.value_tol && (b - a) < 1e-9 * (1.0 + b.abs()) {
            break;
        }
        best_prev = best;
    }
    let (t_star, v_star) = if f1 >= f2 { (x1, f1) } else { (x2, f2) };
    // the boundary t = 0 competes with the interior stationary point
    let v0 = g(0.0);
    if v0 >= v_star {
        Ok((v0, 0.0))
    } else {
        Ok((v_star, t_star))
    }
}

// ---------------------------------------------------------------------------
// Luxemburg norm
// ---------------------------------------------------------------------------

/// inf { γ ≥ 0 : Σ_cells Φ(|f_cell|/γ)·ν(cell) ≤ a } by safeguarded bisection;
/// the integral is an exact finite sum for piecewise-constant f.
pub fn luxemburg_norm(
    reg: &Regularizer,
    f: &GridFunction,
    nu: &GridMeasure,
    bound: f64,
) -> Result<f64> {
    if f.partition != nu.partition {
        return Err(Error::ShapeMismatch("function and measure live on different partitions".into()));
    }
    if !bound.is_finite() || bound <= 0.0 {
        return Err(Error::InvalidParameter("Luxemburg bound must be > 0".into()));
    }
    let cells: Vec<(f64, f64)> = f
        .values
        .iter()
        .zip(&nu.masses)
        .filter(|(_, m)| **m > 0.0)
        .map(|(v, m)| (v.abs(), *m))
        .collect();
    let fmax = cells.iter().fold(0.0f64, |acc, (v, _)| acc.max(*v));
    if fmax == 0.0 {
        return Ok(0.0);
    }
    let sum = |gamma: f64| -> f64 { cells.iter().map(|(v, m)| reg.phi(v / gamma) * m).sum() };

    // the admissible set { γ : sum(γ) ≤ a } is an up-set by convexity and
    // Φ(0) ≤ 0, so a predicate bisection is valid
    let mut hi = fmax.max(1e-300);
    let mut grow = 0;
    while sum(hi) > bound {
        hi *= 2.0;
        grow += 1;
        if grow > 2000 {
            return Err(Error::BracketFailure("Luxemburg bracket kept growing".into()));
        }
    }
    let mut lo = hi;
    let mut shrink = 0;
    while sum(lo) <= bound {
        lo *= 0.5;
        shrink += 1;
        if shrink > 2000 || lo < 1e-300 {
            return Ok(0.0);
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if sum(mid) <= bound {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo <= 1e-12 * (1.0 + hi) {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Exact modular Σ Φ(|f_cell|)·ν(cell), the left side of the lower estimate
/// relating the modular to the Luxemburg norm.
pub fn modular(reg: &Regularizer, f: &GridFunction, nu: &GridMeasure) -> Result<f64> {
    if f.partition != nu.partition {
        return Err(Error::ShapeMismatch("function and measure live on different partitions".into()));
    }
    Ok(f.values
        .iter()
        .zip(&nu.masses)
        .filter(|(_, m)| **m > 0.0)
        .map(|(v, m)| reg.phi(v.abs()) * m)
        .sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{bin_measure, GridPartition, MeasureSpec};

    fn unit_grid(cells: usize) -> (GridPartition, GridMeasure) {
        let mut p = GridPartition::dyadic_1d(0.0, 1.0, 0).unwrap();
        while p.axis(0).n_cells() < cells {
            p = crate::grid::dyadic_refine(&p);
        }
        let lam = bin_measure(&MeasureSpec::lebesgue(), &p).unwrap();
        (p, lam)
    }

    #[test]
    fn power_conjugate_values() {
        let reg = Regularizer::power(2.0).unwrap();
        assert!((reg.conjugate(3.0) - 4.5).abs() < 1e-12);
        // below the slope threshold the extended conjugate is −Φ(0) = 0
        assert_eq!(reg.conjugate(-5.0), 0.0);
        assert_eq!(reg.slope_threshold(), 0.0);
    }

    #[test]
    fn entropy_conjugate_is_shifted_exponential() {
        let reg = Regularizer::entropy();
        assert!((reg.conjugate(1.0) - 1.0).abs() < 1e-12);
        assert!((reg.conjugate(0.0) - (-1.0f64).exp()).abs() < 1e-12);
        assert_eq!(reg.ext_value(0.0), 0.0);
        assert_eq!(reg.ext_value(-0.5), f64::INFINITY);
    }

    #[test]
    fn ext_value_power() {
        let reg = Regularizer::power(2.0).unwrap();
        assert_eq!(reg.ext_value(-1.0), f64::INFINITY);
        assert!((reg.ext_value(2.0) - 2.0).abs() < 1e-15);
    }

    #[test]
    fn legendre_oracle_examples() {
        let reg = Regularizer::power(2.0).unwrap();
        let v = numeric_legendre(&reg, 3.0).unwrap();
        assert!((v - 4.5).abs() < 1e-8);
        let ent = Regularizer::entropy();
        let v = numeric_legendre(&ent, 0.0).unwrap();
        assert!((v - (-1.0f64).exp()).abs() < 1e-8);
        // below the threshold the supremum sits at t = 0 with value −Φ(0)
        let ts = Regularizer::tsallis(1.5).unwrap();
        let v = numeric_legendre(&ts, ts.slope_threshold() - 1.0).unwrap();
        assert!(v.abs() < 1e-9);
    }

    #[test]
    fn legendre_fails_on_non_superlinear_tail() {
        // (t−1)₊ has asymptotic slope 1, so r = 2 cannot be bracketed
        let step = Regularizer::custom(&[(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (3.0, 1.0)]).unwrap();
        assert!(numeric_legendre(&step, 2.0).is_err());
        // while r in (0, 1) is fine: sup r·t − (t−1)₊ = r at t = 1
        let v = numeric_legendre(&step, 0.5).unwrap();
        assert!((v - 0.5).abs() < 1e-8);
    }

    #[test]
    fn complementary_of_powers() {
        let reg = Regularizer::power(2.0).unwrap();
        let psi = reg.complementary().unwrap();
        for &t in &[0.25, 0.5, 1.0, 2.0, 5.0] {
            assert!((psi.phi(t) - t * t / 2.0).abs() < 1e-8, "t = {t}");
        }
        let reg3 = Regularizer::power(3.0).unwrap();
        let psi3 = reg3.complementary().unwrap();
        let q = 1.5;
        for &t in &[0.25, 0.5, 1.0, 2.0, 5.0] {
            assert!((psi3.phi(t) - t.powf(q) / q).abs() < 1e-7, "t = {t}");
        }
    }

    #[test]
    fn complementary_of_step_density() {
        let step = Regularizer::custom(&[(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (3.0, 1.0)]).unwrap();
        let psi = step.complementary().unwrap();
        for &s in &[0.25, 0.5, 1.0] {
            assert!((psi.density(s) - 1.0).abs() < 1e-9, "s = {s}");
        }
        for &t in &[0.25, 0.5, 1.0] {
            assert!((psi.phi(t) - t).abs() < 1e-8, "t = {t}");
        }
    }

    #[test]
    fn complementation_requires_youngs() {
        assert!(Regularizer::entropy().complementary().is_err());
    }

    #[test]
    fn shifted_positive_part_values() {
        let reg = Regularizer::power(2.0).unwrap();
        let sh = reg.shifted_positive_part(1.0).unwrap();
        assert!((sh.phi(2.0) - 1.5).abs() < 1e-15);
        assert_eq!(sh.phi(0.5), 0.0);
        assert_eq!(sh.density(0.7), 0.0);
        assert!((sh.density(2.0) - 2.0).abs() < 1e-15);
        // t0 = 0 returns the input unchanged
        let same = reg.shifted_positive_part(0.0).unwrap();
        assert!((same.phi(2.0) - 2.0).abs() < 1e-15);
    }

    #[test]
    fn luxemburg_closed_forms() {
        let (p, lam) = unit_grid(4);
        let reg = Regularizer::power(2.0).unwrap();
        let f = GridFunction::constant(p.clone(), 2.0).unwrap();
        let n = luxemburg_norm(&reg, &f, &lam, 1.0).unwrap();
        assert!((n - 2f64.sqrt()).abs() < 1e-9, "{n}");

        let zero = GridFunction::constant(p.clone(), 0.0).unwrap();
        assert_eq!(luxemburg_norm(&reg, &zero, &lam, 1.0).unwrap(), 0.0);

        // entropy with f ≡ e: solve (e/γ)·log(e/γ) = 1 with a 1-D bisection
        // oracle on u·log u = 1 (γ = e/u ≈ 1.5416553)
        let (mut lo, mut hi) = (1.0f64, 3.0f64);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid * mid.ln() < 1.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let oracle = std::f64::consts::E / (0.5 * (lo + hi));
        let ent = Regularizer::entropy();
        let fe = GridFunction::constant(p, std::f64::consts::E).unwrap();
        let n = luxemburg_norm(&ent, &fe, &lam, 1.0).unwrap();
        assert!((n - oracle).abs() < 1e-9, "{n} vs {oracle}");
    }

    #[test]
    fn luxemburg_respects_bound_parameter() {
        let (p, lam) = unit_grid(8);
        let reg = Regularizer::power(2.0).unwrap();
        let f = GridFunction::constant(p, 3.0).unwrap();
        let n1 = luxemburg_norm(&reg, &f, &lam, 1.0).unwrap();
        let n4 = luxemburg_norm(&reg, &f, &lam, 4.0).unwrap();
        // ‖·‖_b ≤ ‖·‖_a and a·‖·‖_a ≤ b·‖·‖_b for a = 1 < b = 4
        assert!(n4 <= n1 + 1e-12);
        assert!(n1 <= 4.0 * n4 + 1e-12);
    }

    #[test]
    fn tsallis_conjugate_cross_checks() {
        for &q in &[1.3, 1.5, 2.0, 2.7] {
            let reg = Regularizer::tsallis(q).unwrap();
            for k in 0..8 {
                let r = reg.slope_threshold() - 1.0 + k as f64;
                let numeric = numeric_legendre(&reg, r).unwrap();
                assert!(
                    (numeric - reg.conjugate(r)).abs() < 1e-6 * (1.0 + numeric.abs()),
                    "q = {q}, r = {r}"
                );
            }
        }
    }

    #[test]
    fn fenchel_young_proptest_style() {
        use proptest::prelude::*;
        let mut runner = proptest::test_runner::TestRunner::default();
        let reg = Regularizer::power(1.7).unwrap();
        runner
            .run(&(1e-3..50.0f64, -3.0..20.0f64), |(s, r)| {
                let lhs = s * r;
                let rhs = reg.ext_value(s) + reg.conjugate(r);
                prop_assert!(lhs <= rhs + 1e-9);
                // equality at r = φ(s)
                let r_eq = reg.density(s);
                let gap = reg.ext_value(s) + reg.conjugate(r_eq) - s * r_eq;
                prop_assert!(gap.abs() < 1e-6 * (1.0 + s * r_eq));
                Ok(())
            })
            .unwrap();
    }
}
