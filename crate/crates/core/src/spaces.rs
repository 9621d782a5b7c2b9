//! Quasi-norms and modulars of the concrete symmetric spaces.
//!
//! Sequence spaces are normalized so that `‖e_k‖_E = 1`. Function-space
//! quasi-norms depend only on the law of `|f|`, so every evaluator takes a
//! [`DiscreteDistribution`].

use std::f64::consts::{E, LN_2};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measure::{product_atom_count, Ambient, DiscreteDistribution, NonnegSequence};
use crate::TAU_MASS;

// ---------------------------------------------------------------------------
// Sequence spaces

/// Symmetric quasi-Banach sequence space `E`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum SeqSpaceSpec {
    #[serde(rename = "ellq")]
    EllQ(f64),
    #[serde(rename = "ellinfty")]
    EllInfty,
    /// Weak `ℓ_1` with quasi-norm `sup_k (k+1)·μ(k, a)`.
    #[serde(rename = "weak_ell1")]
    WeakEll1,
}

impl SeqSpaceSpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            SeqSpaceSpec::EllQ(q) if !(q > 0.0) || !q.is_finite() => {
                Err(Error::arg(format!("ℓ_q needs 0 < q < ∞, got {q}")))
            }
            _ => Ok(()),
        }
    }

    /// Concavity modulus `C_E` with `‖a+b‖ ≤ C_E(‖a‖+‖b‖)`.
    pub fn concavity_modulus(&self) -> f64 {
        match *self {
            SeqSpaceSpec::EllQ(q) => 2f64.powf(1.0 / q - 1.0).max(1.0),
            SeqSpaceSpec::EllInfty => 1.0,
            SeqSpaceSpec::WeakEll1 => 2.0,
        }
    }

    pub fn label(&self) -> String {
        match *self {
            SeqSpaceSpec::EllQ(q) => format!("ell_{q}"),
            SeqSpaceSpec::EllInfty => "ell_inf".to_string(),
            SeqSpaceSpec::WeakEll1 => "weak_ell_1".to_string(),
        }
    }

    /// Quasi-norm of a slice of nonnegative entries. `scratch` is reused by
    /// the weak-`ℓ_1` branch, which needs the entries sorted.
    pub(crate) fn norm_of(&self, a: &[f64], scratch: &mut Vec<f64>) -> f64 {
        match *self {
            SeqSpaceSpec::EllQ(q) => ellq_norm(a, q),
            SeqSpaceSpec::EllInfty => a.iter().copied().fold(0.0, f64::max),
            SeqSpaceSpec::WeakEll1 => {
                scratch.clear();
                scratch.extend_from_slice(a);
                scratch.sort_by(|x, y| y.total_cmp(x));
                scratch
                    .iter()
                    .enumerate()
                    .map(|(k, &x)| (k + 1) as f64 * x)
                    .fold(0.0, f64::max)
            }
        }
    }
}

fn ellq_norm(a: &[f64], q: f64) -> f64 {
    let top = a.iter().copied().fold(0.0, f64::max);
    if top == 0.0 {
        return 0.0;
    }
    if q == 1.0 {
        return a.iter().sum();
    }
    let s: f64 = a.iter().map(|&x| (x / top).powf(q)).sum();
    top * s.powf(1.0 / q)
}

/// `‖a‖_E`.
pub fn sequence_quasinorm(space: &SeqSpaceSpec, a: &NonnegSequence) -> f64 {
    space.norm_of(a.entries(), &mut Vec::new())
}

// ---------------------------------------------------------------------------
// Orlicz functions

/// Shape of an Orlicz function `Φ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum OrliczKind {
    /// `Φ(t) = t^p`.
    #[serde(rename = "power")]
    Power(f64),
    /// `Φ(t) = t^p · ln(e + t)^a`.
    #[serde(rename = "power_log")]
    PowerLog(f64, f64),
    /// Piecewise linear through the origin and the given `(t, Φ(t))` knots,
    /// extended linearly past the last knot.
    #[serde(rename = "tabulated")]
    Tabulated(Vec<(f64, f64)>),
}

/// An Orlicz function together with an optional certified `Δ₂` constant
/// `C_Φ` such that `Φ(2t) ≤ C_Φ Φ(t)` for all `t > 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawOrlicz", into = "RawOrlicz")]
pub struct OrliczFunction {
    kind: OrliczKind,
    delta2_constant: Option<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOrlicz {
    kind: OrliczKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    delta2: Option<f64>,
}

impl TryFrom<RawOrlicz> for OrliczFunction {
    type Error = Error;

    fn try_from(raw: RawOrlicz) -> Result<Self> {
        let phi = OrliczFunction::new(raw.kind)?;
        match raw.delta2 {
            None => Ok(phi),
            Some(c) => {
                let certified = phi.delta2_constant.expect("new() certifies");
                if c + TAU_MASS < certified {
                    return Err(Error::arg(format!(
                        "declared Δ₂ constant {c} is below the certified {certified}"
                    )));
                }
                Ok(OrliczFunction {
                    delta2_constant: Some(c),
                    ..phi
                })
            }
        }
    }
}

impl From<OrliczFunction> for RawOrlicz {
    fn from(phi: OrliczFunction) -> Self {
        RawOrlicz {
            kind: phi.kind,
            delta2: phi.delta2_constant,
        }
    }
}

impl OrliczFunction {
    /// Validates the shape and attaches its certified `Δ₂` constant.
    pub fn new(kind: OrliczKind) -> Result<Self> {
        let phi = Self::without_certificate(kind)?;
        let c = phi.certify();
        Ok(Self {
            delta2_constant: Some(c),
            ..phi
        })
    }

    /// Validates the shape but attaches no `Δ₂` certificate.
    pub fn without_certificate(kind: OrliczKind) -> Result<Self> {
        match &kind {
            OrliczKind::Power(p) if !(*p > 0.0) || !p.is_finite() => {
                return Err(Error::arg(format!("power Orlicz function needs p > 0, got {p}")))
            }
            OrliczKind::PowerLog(p, a)
                if !(*p > 0.0) || !(*a >= 0.0) || !p.is_finite() || !a.is_finite() =>
            {
                return Err(Error::arg(format!(
                    "t^p ln(e+t)^a needs p > 0 and a >= 0, got p={p}, a={a}"
                )))
            }
            OrliczKind::Tabulated(knots) => validate_knots(knots)?,
            _ => {}
        }
        Ok(Self {
            kind,
            delta2_constant: None,
        })
    }

    pub fn power(p: f64) -> Result<Self> {
        Self::new(OrliczKind::Power(p))
    }

    pub fn kind(&self) -> &OrliczKind {
        &self.kind
    }

    pub fn delta2_constant(&self) -> Option<f64> {
        self.delta2_constant
    }

    pub fn label(&self) -> String {
        match &self.kind {
            OrliczKind::Power(p) => format!("t^{p}"),
            OrliczKind::PowerLog(p, a) => format!("t^{p}log(e+t)^{a}"),
            OrliczKind::Tabulated(k) => format!("tabulated[{}]", k.len()),
        }
    }

    pub fn eval(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        match &self.kind {
            OrliczKind::Power(p) => t.powf(*p),
            OrliczKind::PowerLog(p, a) => t.powf(*p) * (E + t).ln().powf(*a),
            OrliczKind::Tabulated(knots) => eval_piecewise_linear(knots, t),
        }
    }

    /// The exact `Δ₂` constant of the shape (an upper bound for `PowerLog`).
    fn certify(&self) -> f64 {
        match &self.kind {
            OrliczKind::Power(p) => 2f64.powf(*p),
            // ln(e+2t) ≤ ln 2 + ln(e+t) and ln(e+t) ≥ 1
            OrliczKind::PowerLog(p, a) => 2f64.powf(*p) * (1.0 + LN_2).powf(*a),
            // Φ(2t)/Φ(t) is a ratio of affine maps between consecutive points
            // of knots ∪ knots/2, hence monotone there; both tails tend to 2.
            OrliczKind::Tabulated(knots) => knots
                .iter()
                .flat_map(|&(t, _)| [t, t / 2.0])
                .map(|t| self.eval(2.0 * t) / self.eval(t))
                .fold(2.0, f64::max),
        }
    }

    /// Checks `Φ(0)=0`, strict monotonicity and the declared `Δ₂` inequality
    /// on a log-spaced grid over `[lo, hi]`.
    pub fn verify_on_grid(&self, lo: f64, hi: f64, points: usize) -> bool {
        let c = match self.delta2_constant {
            Some(c) => c,
            None => return false,
        };
        if self.eval(0.0) != 0.0 {
            return false;
        }
        let ratio = (hi / lo).powf(1.0 / (points.max(2) - 1) as f64);
        let mut prev = 0.0;
        let mut t = lo;
        for _ in 0..points.max(2) {
            let v = self.eval(t);
            if !(v > prev) || self.eval(2.0 * t) > c * v * (1.0 + TAU_MASS) {
                return false;
            }
            prev = v;
            t *= ratio;
        }
        true
    }
}

fn validate_knots(knots: &[(f64, f64)]) -> Result<()> {
    if knots.is_empty() {
        return Err(Error::arg("tabulated Orlicz function needs at least one knot"));
    }
    let mut prev = (0.0, 0.0);
    for &(t, v) in knots {
        if !(t > prev.0) || !(v > prev.1) || !t.is_finite() || !v.is_finite() {
            return Err(Error::arg(
                "tabulated knots must be strictly increasing in both coordinates",
            ));
        }
        prev = (t, v);
    }
    Ok(())
}

fn eval_piecewise_linear(knots: &[(f64, f64)], t: f64) -> f64 {
    let idx = knots.partition_point(|&(x, _)| x < t);
    let (x0, y0) = if idx == 0 { (0.0, 0.0) } else { knots[idx - 1] };
    let (x1, y1) = match knots.get(idx) {
        Some(&k) => k,
        None => {
            // linear extension with the last slope
            let n = knots.len();
            let (xa, ya) = if n >= 2 { knots[n - 2] } else { (0.0, 0.0) };
            let (xb, yb) = knots[n - 1];
            return yb + (yb - ya) / (xb - xa) * (t - xb);
        }
    };
    y0 + (y1 - y0) * (t - x0) / (x1 - x0)
}

/// `∫ Φ(|f|)`.
pub fn orlicz_modular(phi: &OrliczFunction, d: &DiscreteDistribution) -> f64 {
    d.atoms().iter().map(|a| a.mass * phi.eval(a.value)).sum()
}

/// Luxemburg norm `inf{λ > 0 : ∫Φ(|f|/λ) ≤ 1}` by bracketing and bisection.
pub fn luxemburg_norm(phi: &OrliczFunction, d: &DiscreteDistribution) -> f64 {
    if d.is_zero() {
        return 0.0;
    }
    let modular = |lambda: f64| -> f64 {
        d.atoms()
            .iter()
            .map(|a| a.mass * phi.eval(a.value / lambda))
            .sum()
    };
    let mut hi = d.max_value();
    let mut lo = hi;
    while modular(hi) > 1.0 {
        hi *= 2.0;
    }
    while modular(lo) <= 1.0 {
        lo /= 2.0;
        if lo < f64::MIN_POSITIVE {
            return 0.0;
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if modular(mid) > 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-15 * hi {
            break;
        }
    }
    0.5 * (lo + hi)
}

// ---------------------------------------------------------------------------
// Marcinkiewicz profile

/// Concave non-decreasing piecewise-linear `ψ` on `(0, 1]`, given by knots
/// `(t_i, ψ(t_i))` with `ψ(0+) = 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<(f64, f64)>", into = "Vec<(f64, f64)>")]
pub struct PsiTable {
    knots: Vec<(f64, f64)>,
}

impl TryFrom<Vec<(f64, f64)>> for PsiTable {
    type Error = Error;

    fn try_from(k: Vec<(f64, f64)>) -> Result<Self> {
        PsiTable::new(k)
    }
}

impl From<PsiTable> for Vec<(f64, f64)> {
    fn from(p: PsiTable) -> Self {
        p.knots
    }
}

impl PsiTable {
    pub fn new(knots: Vec<(f64, f64)>) -> Result<Self> {
        if knots.is_empty() {
            return Err(Error::arg("ψ table needs at least one knot"));
        }
        let mut prev_t = 0.0;
        for &(t, v) in &knots {
            if !(t > prev_t) || t > 1.0 + TAU_MASS || !v.is_finite() {
                return Err(Error::arg("ψ knots must be strictly increasing in (0,1]"));
            }
            prev_t = t;
        }
        if !(knots[0].1 > 0.0) {
            return Err(Error::arg("ψ must be positive at its first knot"));
        }
        let table = Self { knots };
        if !table.is_concave_nondecreasing(1e-9) {
            return Err(Error::arg("ψ must be concave and non-decreasing on its knots"));
        }
        Ok(table)
    }

    pub fn knots(&self) -> &[(f64, f64)] {
        &self.knots
    }

    /// Slopes between consecutive knots (starting from the origin) are
    /// nonnegative and non-increasing, up to relative tolerance `tol`.
    pub fn is_concave_nondecreasing(&self, tol: f64) -> bool {
        let mut prev = (0.0, 0.0);
        let mut prev_slope = f64::INFINITY;
        for &(t, v) in &self.knots {
            let slope = (v - prev.1) / (t - prev.0);
            if slope < -tol || slope > prev_slope * (1.0 + tol) + tol {
                return false;
            }
            prev_slope = slope;
            prev = (t, v);
        }
        true
    }

    pub fn eval(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        let idx = self.knots.partition_point(|&(x, _)| x < t);
        let (x0, y0) = if idx == 0 { (0.0, 0.0) } else { self.knots[idx - 1] };
        match self.knots.get(idx) {
            Some(&(x1, y1)) => y0 + (y1 - y0) * (t - x0) / (x1 - x0),
            None => y0,
        }
    }
}

/// `∫_0^t μ(s, f) ds`.
pub fn integrated_rearrangement(d: &DiscreteDistribution, t: f64) -> f64 {
    let mut acc = 0.0;
    let mut used = 0.0;
    for a in d.atoms() {
        if used >= t {
            break;
        }
        let m = a.mass.min(t - used);
        acc += a.value * m;
        used += m;
    }
    acc
}

/// `sup_t ∫_0^t μ(f) / ψ(t)`, attained at knots of ψ or breakpoints of μ(f).
pub fn marcinkiewicz_norm(psi: &PsiTable, d: &DiscreteDistribution) -> f64 {
    if d.is_zero() {
        return 0.0;
    }
    let mut ts: Vec<f64> = psi
        .knots
        .iter()
        .map(|&(t, _)| t)
        .chain(d.breakpoints().iter().copied())
        .chain(std::iter::once(1.0))
        .filter(|&t| t > 0.0 && t <= 1.0)
        .collect();
    ts.sort_by(f64::total_cmp);
    ts.dedup();
    // One sweep over the atoms (descending values) for all candidates.
    let atoms = d.atoms();
    let (mut i, mut used, mut acc, mut best) = (0, 0.0, 0.0, 0.0f64);
    for t in ts {
        while i < atoms.len() && used + atoms[i].mass <= t {
            acc += atoms[i].value * atoms[i].mass;
            used += atoms[i].mass;
            i += 1;
        }
        let partial = if i < atoms.len() { atoms[i].value * (t - used) } else { 0.0 };
        best = best.max((acc + partial) / psi.eval(t));
    }
    best
}

// ---------------------------------------------------------------------------
// Function spaces

/// Symmetric function space `X`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum SpaceSpec {
    Lp(f64),
    /// `L_p + L_q`, `p ≤ q`, evaluated through the equivalent proxy
    /// `‖μ(f)χ_(0,1)‖_p + ‖(μ(k,f))_{k≥1}‖_q`.
    LpPlusLq(f64, f64),
    /// `L_p ∩ L_q`, `q ≤ p`, as `max(‖f‖_p, ‖f‖_q)`.
    LpCapLq(f64, f64),
    OrliczLux(OrliczFunction),
    Marcinkiewicz(PsiTable),
}

impl SpaceSpec {
    pub fn validate(&self) -> Result<()> {
        let positive = |x: f64| x > 0.0 && x.is_finite();
        match self {
            SpaceSpec::Lp(p) if !positive(*p) => Err(Error::arg(format!("L_p needs p > 0, got {p}"))),
            SpaceSpec::LpPlusLq(p, q) if !(positive(*p) && positive(*q) && p <= q) => Err(
                Error::arg(format!("L_p + L_q needs 0 < p <= q, got p={p}, q={q}")),
            ),
            SpaceSpec::LpCapLq(p, q) if !(positive(*p) && positive(*q) && q <= p) => Err(
                Error::arg(format!("L_p ∩ L_q needs 0 < q <= p, got p={p}, q={q}")),
            ),
            _ => Ok(()),
        }
    }

    pub fn label(&self) -> String {
        match self {
            SpaceSpec::Lp(p) => format!("L_{p}"),
            SpaceSpec::LpPlusLq(p, q) => format!("L_{p}+L_{q}(proxy)"),
            SpaceSpec::LpCapLq(p, q) => format!("L_{p}&L_{q}"),
            SpaceSpec::OrliczLux(phi) => format!("L_Phi[{}]", phi.label()),
            SpaceSpec::Marcinkiewicz(psi) => format!("M_psi[{}]", psi.knots.len()),
        }
    }
}

/// `(∫ μ(f)^p)^{1/p}`.
pub fn lp_norm(d: &DiscreteDistribution, p: f64) -> f64 {
    let top = d.max_value();
    if top == 0.0 {
        return 0.0;
    }
    let s: f64 = d
        .atoms()
        .iter()
        .map(|a| a.mass * (a.value / top).powf(p))
        .sum();
    top * s.powf(1.0 / p)
}

/// `(μ(k, f))_{k=1..=k_max}`.
fn tail_sequence(d: &DiscreteDistribution, k_max: usize) -> NonnegSequence {
    d.rearrangement_sequence(k_max).skip(1)
}

fn exhausting_index(d: &DiscreteDistribution) -> usize {
    (d.total_mass() - TAU_MASS).max(0.0).ceil() as usize
}

/// `‖f‖_X`.
pub fn function_quasinorm(space: &SpaceSpec, d: &DiscreteDistribution) -> Result<f64> {
    space.validate()?;
    Ok(match space {
        SpaceSpec::Lp(p) => lp_norm(d, *p),
        SpaceSpec::LpPlusLq(p, q) => {
            let k_max = exhausting_index(d);
            lp_norm(&d.restrict_to_unit(), *p)
                + sequence_quasinorm(&SeqSpaceSpec::EllQ(*q), &tail_sequence(d, k_max))
        }
        SpaceSpec::LpCapLq(p, q) => lp_norm(d, *p).max(lp_norm(d, *q)),
        SpaceSpec::OrliczLux(phi) => luxemburg_norm(phi, d),
        SpaceSpec::Marcinkiewicz(psi) => marcinkiewicz_norm(psi, d),
    })
}

/// `‖μ(f)χ_(0,1)‖_X + ‖(μ(k,f))_{k=1..k_max}‖_E`.
pub fn rhs_theorem_main(
    x: &SpaceSpec,
    e: &SeqSpaceSpec,
    f: &DiscreteDistribution,
    k_max: usize,
) -> Result<f64> {
    e.validate()?;
    let needed = exhausting_index(f);
    if k_max < needed {
        return Err(Error::arg(format!(
            "k_max = {k_max} does not exhaust a law of total mass {} (need {needed})",
            f.total_mass()
        )));
    }
    Ok(function_quasinorm(x, &f.restrict_to_unit())?
        + sequence_quasinorm(e, &tail_sequence(f, k_max)))
}

/// `∫_0^1 Φ(μ(t,f)) dt + Φ(‖(μ(k,f))_{k=1}^n‖_E)`.
pub fn rhs_modular(
    phi: &OrliczFunction,
    e: &SeqSpaceSpec,
    f: &DiscreteDistribution,
    n: usize,
) -> Result<f64> {
    e.validate()?;
    let head = orlicz_modular(phi, &f.restrict_to_unit());
    let tail = sequence_quasinorm(e, &tail_sequence(f, n));
    Ok(head + phi.eval(tail))
}

/// Calls `visit(values, mass)` for every atom of the product law of the
/// zero-padded unit-interval family.
pub(crate) fn for_each_product_atom(
    fs: &[DiscreteDistribution],
    mut visit: impl FnMut(&[f64], f64),
) -> Result<()> {
    if fs.is_empty() {
        return Err(Error::arg("product enumeration of an empty family"));
    }
    if fs.iter().any(|f| f.ambient() != Ambient::UnitInterval) {
        return Err(Error::arg("product enumeration needs unit-interval inputs"));
    }
    product_atom_count(fs)?;
    let padded: Vec<Vec<(f64, f64)>> = fs
        .iter()
        .map(|f| f.padded_pairs())
        .collect::<Result<_>>()?;
    if padded.iter().any(|p| p.is_empty()) {
        return Err(Error::arg("input law carries no mass"));
    }
    let n = padded.len();
    let mut idx = vec![0usize; n];
    let mut values: Vec<f64> = padded.iter().map(|p| p[0].0).collect();
    loop {
        let mass: f64 = idx.iter().zip(&padded).map(|(&i, p)| p[i].1).product();
        visit(&values, mass);
        // odometer
        let mut k = n;
        loop {
            if k == 0 {
                return Ok(());
            }
            k -= 1;
            idx[k] += 1;
            if idx[k] < padded[k].len() {
                values[k] = padded[k][idx[k]].0;
                break;
            }
            idx[k] = 0;
            values[k] = padded[k][0].0;
        }
    }
}

/// Exact law of `t ↦ ‖(f_k(t))_k‖_E` for independent unit-interval `f_k`.
pub fn mixed_law_exact(
    e: &SeqSpaceSpec,
    fs: &[DiscreteDistribution],
) -> Result<DiscreteDistribution> {
    e.validate()?;
    let mut pairs = Vec::new();
    let mut scratch = Vec::new();
    for_each_product_atom(fs, |v, m| pairs.push((e.norm_of(v, &mut scratch), m)))?;
    DiscreteDistribution::unit(pairs)
}

/// `‖ ‖(f_k)_k‖_E ‖_X` by exhaustive product enumeration.
pub fn mixed_norm_exact(
    x: &SpaceSpec,
    e: &SeqSpaceSpec,
    fs: &[DiscreteDistribution],
) -> Result<f64> {
    function_quasinorm(x, &mixed_law_exact(e, fs)?)
}

/// `∫_0^1 Φ(‖(f_k(t))_k‖_E) dt` by exhaustive product enumeration.
pub fn mixed_modular_exact(
    phi: &OrliczFunction,
    e: &SeqSpaceSpec,
    fs: &[DiscreteDistribution],
) -> Result<f64> {
    e.validate()?;
    let mut acc = 0.0;
    let mut scratch = Vec::new();
    for_each_product_atom(fs, |v, m| acc += m * phi.eval(e.norm_of(v, &mut scratch)))?;
    Ok(acc)
}

/// Returns `(‖g‖_{M_ψ}, max_{p ∈ grid} (ln(ep)/p)·‖g‖_p)`.
pub fn marcinkiewicz_sup_p_equiv(
    g: &DiscreteDistribution,
    psi: &PsiTable,
    p_grid: &[f64],
) -> Result<(f64, f64)> {
    if p_grid.is_empty() || p_grid.iter().any(|&p| !(p >= 1.0) || !p.is_finite()) {
        return Err(Error::arg("p grid must be nonempty with every p >= 1"));
    }
    let lhs = marcinkiewicz_norm(psi, g);
    let rhs = p_grid
        .iter()
        .map(|&p| (E * p).ln() / p * lp_norm(g, p))
        .fold(0.0, f64::max);
    Ok((lhs, rhs))
}
