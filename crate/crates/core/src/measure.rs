//! Discrete laws of nonnegative functions and the operations on them.
//!
//! A [`DiscreteDistribution`] stores the equimeasurability class of a
//! nonnegative function as atoms sorted by strictly decreasing value. On the
//! unit interval the mass not carried by any atom is an implicit zero atom;
//! on the half line the function vanishes outside the finite support.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::{ENUMERATION_CAP, TAU_MASS, TAU_VAL};

/// The measure space a function lives on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Ambient {
    /// `(0,1)`: total mass at most one, zero on the remainder.
    #[serde(rename = "unit")]
    UnitInterval,
    /// `(0,∞)`: zero outside a set of finite measure.
    #[serde(rename = "halfline")]
    HalfLine,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Atom {
    pub value: f64,
    pub mass: f64,
}

/// Law of a nonnegative function: finitely many atoms with decreasing values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawDistribution", into = "RawDistribution")]
pub struct DiscreteDistribution {
    ambient: Ambient,
    atoms: Vec<Atom>,
    // cumulative[i] = mass of atoms[..=i]
    cumulative: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDistribution {
    ambient: Ambient,
    atoms: Vec<(f64, f64)>,
}

impl TryFrom<RawDistribution> for DiscreteDistribution {
    type Error = Error;

    fn try_from(raw: RawDistribution) -> Result<Self> {
        DiscreteDistribution::new(raw.ambient, raw.atoms)
    }
}

impl From<DiscreteDistribution> for RawDistribution {
    fn from(d: DiscreteDistribution) -> Self {
        RawDistribution {
            ambient: d.ambient,
            atoms: d.atoms.iter().map(|a| (a.value, a.mass)).collect(),
        }
    }
}

pub(crate) fn values_coincide(a: f64, b: f64) -> bool {
    (a - b).abs() <= TAU_VAL * a.abs().max(b.abs()).max(1.0)
}

/// Sorts by decreasing value, merges values within [`TAU_VAL`] and drops
/// zero masses. Inputs must already be validated.
fn canonical_atoms(mut pairs: Vec<(f64, f64)>) -> Vec<Atom> {
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0));
    let mut atoms: Vec<Atom> = Vec::with_capacity(pairs.len());
    for (value, mass) in pairs {
        if mass == 0.0 {
            continue;
        }
        match atoms.last_mut() {
            Some(last) if values_coincide(last.value, value) => last.mass += mass,
            _ => atoms.push(Atom { value, mass }),
        }
    }
    atoms
}

fn cumulative_of(atoms: &[Atom]) -> Vec<f64> {
    atoms
        .iter()
        .scan(0.0, |acc, a| {
            *acc += a.mass;
            Some(*acc)
        })
        .collect()
}

impl DiscreteDistribution {
    /// Builds a law from `(value, mass)` pairs in any order.
    pub fn new(ambient: Ambient, atoms: impl IntoIterator<Item = (f64, f64)>) -> Result<Self> {
        let pairs: Vec<(f64, f64)> = atoms.into_iter().collect();
        for &(v, m) in &pairs {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::InvalidDistribution(format!(
                    "atom value {v} is not a finite nonnegative number"
                )));
            }
            if !m.is_finite() || m < 0.0 {
                return Err(Error::InvalidDistribution(format!(
                    "atom mass {m} is not a finite nonnegative number"
                )));
            }
        }
        Self::from_canonical(ambient, canonical_atoms(pairs))
    }

    fn from_canonical(ambient: Ambient, atoms: Vec<Atom>) -> Result<Self> {
        let cumulative = cumulative_of(&atoms);
        let total = cumulative.last().copied().unwrap_or(0.0);
        if ambient == Ambient::UnitInterval && total > 1.0 + TAU_MASS {
            return Err(Error::InvalidDistribution(format!(
                "total mass {total} exceeds 1 on the unit interval"
            )));
        }
        Ok(Self {
            ambient,
            atoms,
            cumulative,
        })
    }

    pub fn unit(atoms: impl IntoIterator<Item = (f64, f64)>) -> Result<Self> {
        Self::new(Ambient::UnitInterval, atoms)
    }

    pub fn half_line(atoms: impl IntoIterator<Item = (f64, f64)>) -> Result<Self> {
        Self::new(Ambient::HalfLine, atoms)
    }

    /// The zero function.
    pub fn zero(ambient: Ambient) -> Self {
        Self {
            ambient,
            atoms: Vec::new(),
            cumulative: Vec::new(),
        }
    }

    /// `χ_(0,1)` on the unit interval.
    pub fn indicator() -> Self {
        Self::unit([(1.0, 1.0)]).expect("valid indicator")
    }

    pub fn ambient(&self) -> Ambient {
        self.ambient
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn atom_pairs(&self) -> Vec<(f64, f64)> {
        self.atoms.iter().map(|a| (a.value, a.mass)).collect()
    }

    pub fn total_mass(&self) -> f64 {
        self.cumulative.last().copied().unwrap_or(0.0)
    }

    /// Mass of the atoms with positive value, i.e. the measure of the support.
    pub fn support_mass(&self) -> f64 {
        self.atoms
            .iter()
            .filter(|a| a.value > 0.0)
            .map(|a| a.mass)
            .sum()
    }

    /// Essential supremum (0 for the zero function).
    pub fn max_value(&self) -> f64 {
        self.atoms.first().map_or(0.0, |a| a.value)
    }

    /// `∫ f`.
    pub fn mean(&self) -> f64 {
        self.atoms.iter().map(|a| a.value * a.mass).sum()
    }

    /// True when every atom has value zero (or there are no atoms).
    pub fn is_zero(&self) -> bool {
        self.atoms.iter().all(|a| a.value == 0.0)
    }

    /// Right ends of the constancy intervals of `μ(f)`.
    pub fn breakpoints(&self) -> &[f64] {
        &self.cumulative
    }

    /// `d_f(s) = m{f > s}`.
    pub fn distribution_function(&self, s: f64) -> Result<f64> {
        if !(s >= 0.0) {
            return Err(Error::arg(format!(
                "distribution function needs s >= 0, got {s}"
            )));
        }
        Ok(self
            .atoms
            .iter()
            .take_while(|a| a.value > s)
            .map(|a| a.mass)
            .sum())
    }

    /// Right-continuous decreasing rearrangement `μ(t, f) = inf{λ ≥ 0 : d_f(λ) ≤ t}`.
    pub fn rearrangement(&self, t: f64) -> Result<f64> {
        if !(t > 0.0) {
            return Err(Error::arg(format!("rearrangement needs t > 0, got {t}")));
        }
        Ok(self.quantile(t))
    }

    /// Same as [`rearrangement`](Self::rearrangement) but defined at `t = 0`
    /// (returning the top atom). Used for inverse-transform sampling.
    pub fn quantile(&self, t: f64) -> f64 {
        let idx = self.cumulative.partition_point(|&c| c <= t);
        self.atoms.get(idx).map_or(0.0, |a| a.value)
    }

    /// `(μ(k, f))_{k=0..=k_max}` with `μ(0, f)` the essential supremum.
    pub fn rearrangement_sequence(&self, k_max: usize) -> NonnegSequence {
        let entries = (0..=k_max)
            .map(|k| {
                if k == 0 {
                    self.max_value()
                } else {
                    self.quantile(k as f64)
                }
            })
            .collect();
        NonnegSequence(entries)
    }

    /// `σ_s f`: every mass multiplied by `s`.
    pub fn dilate(&self, s: f64) -> Result<Self> {
        if !(s > 0.0) || !s.is_finite() {
            return Err(Error::arg(format!("dilation needs s > 0, got {s}")));
        }
        let ambient = match self.ambient {
            Ambient::UnitInterval if s <= 1.0 => Ambient::UnitInterval,
            _ => Ambient::HalfLine,
        };
        let atoms = self
            .atoms
            .iter()
            .map(|a| Atom {
                value: a.value,
                mass: a.mass * s,
            })
            .collect();
        Self::from_canonical(ambient, atoms)
    }

    /// `|f|^p`.
    pub fn power(&self, p: f64) -> Result<Self> {
        if !(p > 0.0) || !p.is_finite() {
            return Err(Error::arg(format!("power needs p > 0, got {p}")));
        }
        Self::new(
            self.ambient,
            self.atoms.iter().map(|a| (a.value.powf(p), a.mass)),
        )
    }

    /// `c·f` for `c ≥ 0`.
    pub fn scale_values(&self, c: f64) -> Result<Self> {
        if !(c >= 0.0) || !c.is_finite() {
            return Err(Error::arg(format!("scale needs c >= 0, got {c}")));
        }
        Self::new(self.ambient, self.atoms.iter().map(|a| (a.value * c, a.mass)))
    }

    /// Splits `f` into `f·χ{f > c}` and `f·χ{f ≤ c}`.
    pub fn split_at_level(&self, c: f64) -> Result<(Self, Self)> {
        if !(c >= 0.0) {
            return Err(Error::arg(format!("split level must be >= 0, got {c}")));
        }
        let (head, tail): (Vec<Atom>, Vec<Atom>) =
            self.atoms.iter().partition(|a| a.value > c);
        Ok((
            Self::from_canonical(self.ambient, head)?,
            Self::from_canonical(self.ambient, tail)?,
        ))
    }

    /// Drops atoms of value zero.
    pub fn nonzero(&self) -> Self {
        let atoms = self.atoms.iter().copied().filter(|a| a.value > 0.0).collect();
        Self::from_canonical(self.ambient, atoms).expect("subset of a valid law")
    }

    /// Unit-interval law with the implicit zero atom written out, so that the
    /// total mass is one. Half-line laws are rejected.
    pub fn with_zero_atom(&self) -> Result<Self> {
        if self.ambient != Ambient::UnitInterval {
            return Err(Error::arg("zero padding needs a unit-interval law"));
        }
        let rest = 1.0 - self.total_mass();
        if rest <= 0.0 {
            return Ok(self.clone());
        }
        let mut pairs = self.atom_pairs();
        pairs.push((0.0, rest));
        Self::new(Ambient::UnitInterval, pairs)
    }

    /// Atoms including the zero padding up to mass one (unit interval only).
    pub(crate) fn padded_pairs(&self) -> Result<Vec<(f64, f64)>> {
        Ok(self.with_zero_atom()?.atom_pairs())
    }

    /// Reinterprets a half-line law of total mass at most one on `(0,1)`.
    pub fn into_unit_interval(&self) -> Result<Self> {
        if self.total_mass() > 1.0 + TAU_MASS {
            return Err(Error::arg(format!(
                "law of total mass {} does not fit in (0,1)",
                self.total_mass()
            )));
        }
        Self::from_canonical(Ambient::UnitInterval, self.atoms.clone())
    }

    /// Law of `μ(f)·χ_(0,1)`, as a unit-interval distribution.
    pub fn restrict_to_unit(&self) -> Self {
        let mut atoms = Vec::new();
        let mut used = 0.0;
        for a in &self.atoms {
            if used >= 1.0 {
                break;
            }
            let mass = a.mass.min(1.0 - used);
            used += mass;
            atoms.push(Atom {
                value: a.value,
                mass,
            });
        }
        Self::from_canonical(Ambient::UnitInterval, atoms).expect("mass at most one")
    }

    /// Equality of laws up to zero atoms, with relative tolerance `tol` on
    /// values and absolute tolerance `tol` on masses.
    pub fn same_law(&self, other: &Self, tol: f64) -> bool {
        let a = self.nonzero();
        let b = other.nonzero();
        a.atoms.len() == b.atoms.len()
            && a.atoms.iter().zip(&b.atoms).all(|(x, y)| {
                (x.value - y.value).abs() <= tol * x.value.abs().max(1.0)
                    && (x.mass - y.mass).abs() <= tol
            })
    }
}

/// `⊕ f_k`: disjoint copies laid side by side on the half line.
pub fn disjoint_sum(ds: &[DiscreteDistribution]) -> Result<DiscreteDistribution> {
    if ds.is_empty() {
        return Err(Error::arg("disjoint sum of an empty family"));
    }
    DiscreteDistribution::new(
        Ambient::HalfLine,
        ds.iter().flat_map(|d| d.atom_pairs()),
    )
}

fn require_unit(ds: &[DiscreteDistribution], what: &str) -> Result<()> {
    if ds.is_empty() {
        return Err(Error::arg(format!("{what} of an empty family")));
    }
    if ds.iter().any(|d| d.ambient != Ambient::UnitInterval) {
        return Err(Error::arg(format!(
            "{what} needs every input on the unit interval"
        )));
    }
    Ok(())
}

/// Number of product atoms of the zero-padded family, checked against the cap.
pub(crate) fn product_atom_count(ds: &[DiscreteDistribution]) -> Result<u128> {
    let mut count: u128 = 1;
    for d in ds {
        let pad = usize::from(d.total_mass() < 1.0 && d.ambient == Ambient::UnitInterval);
        count = count.saturating_mul((d.atoms.len() + pad).max(1) as u128);
    }
    if count > ENUMERATION_CAP as u128 {
        return Err(Error::Capacity {
            required: count,
            cap: ENUMERATION_CAP,
        });
    }
    Ok(count)
}

/// Law of `a + b` for independent `a`, `b` given as atom lists of total mass one.
pub(crate) fn convolve(a: &[(f64, f64)], b: &[(f64, f64)]) -> Vec<Atom> {
    let mut pairs = Vec::with_capacity(a.len() * b.len());
    for &(va, ma) in a {
        for &(vb, mb) in b {
            pairs.push((va + vb, ma * mb));
        }
    }
    canonical_atoms(pairs)
}

/// Exact law of `f_0(ω_0) + … + f_{n−1}(ω_{n−1})` on the product space.
pub fn sum_of_independent(ds: &[DiscreteDistribution]) -> Result<DiscreteDistribution> {
    require_unit(ds, "independent sum")?;
    product_atom_count(ds)?;
    let mut acc: Vec<(f64, f64)> = vec![(0.0, 1.0)];
    for d in ds {
        let next = convolve(&acc, &d.padded_pairs()?);
        acc = next.iter().map(|a| (a.value, a.mass)).collect();
    }
    DiscreteDistribution::new(Ambient::UnitInterval, acc)
}

/// Exact law of `max_k f_k` for independent unit-interval inputs.
pub fn max_of_independent(ds: &[DiscreteDistribution]) -> Result<DiscreteDistribution> {
    require_unit(ds, "independent maximum")?;
    let mut levels: Vec<f64> = ds
        .iter()
        .flat_map(|d| d.atoms.iter().map(|a| a.value))
        .chain(std::iter::once(0.0))
        .collect();
    levels.sort_by(|a, b| b.total_cmp(a));
    levels.dedup_by(|a, b| values_coincide(*a, *b));

    // P(max ≤ v) = Π P(f_k ≤ v), evaluated on the merged grid (descending).
    let cdf: Vec<f64> = levels
        .iter()
        .map(|&v| {
            ds.iter()
                .map(|d| {
                    let above: f64 = d
                        .atoms
                        .iter()
                        .take_while(|a| a.value > v && !values_coincide(a.value, v))
                        .map(|a| a.mass)
                        .sum();
                    (1.0 - above).max(0.0)
                })
                .product()
        })
        .collect();
    let mut pairs = Vec::with_capacity(levels.len());
    for (i, &v) in levels.iter().enumerate() {
        let below = cdf.get(i + 1).copied().unwrap_or(0.0);
        pairs.push((v, (cdf[i] - below).max(0.0)));
    }
    DiscreteDistribution::new(Ambient::UnitInterval, pairs)
}

/// Result of comparing two decreasing rearrangements pointwise.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct Domination {
    pub holds: bool,
    /// Left side at the point where `lhs / rhs` is largest.
    pub lhs: f64,
    /// Right side at that point.
    pub rhs: f64,
    /// Number of constancy intervals compared.
    pub points: usize,
}

/// Checks `μ(t, a) ≤ c·μ(t/s, b)` for all `t ∈ (0, horizon)`.
///
/// Both sides are right-continuous step functions, so it is enough to
/// compare them at one interior point of every interval of the common
/// refinement of their jump sets.
pub fn rearrangement_domination(
    a: &DiscreteDistribution,
    b: &DiscreteDistribution,
    c: f64,
    s: f64,
    horizon: f64,
) -> Result<Domination> {
    if !(c > 0.0) || !(s > 0.0) || !(horizon > 0.0) {
        return Err(Error::arg("domination needs positive c, s and horizon"));
    }
    let mut cuts: Vec<f64> = std::iter::once(0.0)
        .chain(a.breakpoints().iter().copied())
        .chain(b.breakpoints().iter().map(|&x| s * x))
        .filter(|&t| t < horizon)
        .chain(std::iter::once(horizon))
        .collect();
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();

    let mut out = Domination {
        holds: true,
        lhs: 0.0,
        rhs: 0.0,
        points: 0,
    };
    let mut worst = f64::NEG_INFINITY;
    for w in cuts.windows(2) {
        let t = 0.5 * (w[0] + w[1]);
        if !(t > w[0] && t < w[1]) {
            continue;
        }
        out.points += 1;
        let lhs = a.quantile(t);
        let rhs = c * b.quantile(t / s);
        if lhs > rhs + TAU_VAL * lhs.max(1.0) {
            out.holds = false;
        }
        let ratio = match (lhs > 0.0, rhs > 0.0) {
            (false, _) => 0.0,
            (true, true) => lhs / rhs,
            (true, false) => f64::INFINITY,
        };
        if ratio > worst {
            worst = ratio;
            out.lhs = lhs;
            out.rhs = rhs;
        }
    }
    Ok(out)
}

/// Finite nonnegative real sequence.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct NonnegSequence(Vec<f64>);

impl TryFrom<Vec<f64>> for NonnegSequence {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        NonnegSequence::new(v)
    }
}

impl From<NonnegSequence> for Vec<f64> {
    fn from(s: NonnegSequence) -> Self {
        s.0
    }
}

impl NonnegSequence {
    pub fn new(entries: Vec<f64>) -> Result<Self> {
        if let Some(bad) = entries.iter().find(|x| !x.is_finite() || **x < 0.0) {
            return Err(Error::arg(format!(
                "sequence entry {bad} is not a finite nonnegative number"
            )));
        }
        Ok(Self(entries))
    }

    pub fn entries(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Entries sorted in non-increasing order, `(μ(k, a))_k`.
    pub fn decreasing_rearrangement(&self) -> Self {
        let mut v = self.0.clone();
        v.sort_by(|a, b| b.partial_cmp(a).unwrap_or(Ordering::Equal));
        Self(v)
    }

    /// `σ_m a`: each entry repeated `m` times.
    pub fn dilate(&self, m: usize) -> Result<Self> {
        if m == 0 {
            return Err(Error::arg("sequence dilation needs m >= 1"));
        }
        Ok(Self(
            self.0
                .iter()
                .flat_map(|&x| std::iter::repeat_n(x, m))
                .collect(),
        ))
    }

    /// Drops the first `k` entries.
    pub fn skip(&self, k: usize) -> Self {
        Self(self.0.iter().skip(k).copied().collect())
    }
}

/// `σ_m a` as a free function; see [`NonnegSequence::dilate`].
pub fn dilate_sequence(a: &NonnegSequence, m: usize) -> Result<NonnegSequence> {
    a.dilate(m)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_level() -> DiscreteDistribution {
        DiscreteDistribution::unit([(2.0, 0.5), (1.0, 0.5)]).unwrap()
    }

    #[test]
    fn distribution_function_counts_strictly_larger_values() {
        let d = two_level();
        assert_eq!(d.distribution_function(1.0).unwrap(), 0.5);
        assert_eq!(d.distribution_function(0.5).unwrap(), 1.0);
        assert_eq!(d.distribution_function(7.0).unwrap(), 0.0);
        let one = DiscreteDistribution::unit([(1.0, 1.0)]).unwrap();
        assert_eq!(one.distribution_function(1.0).unwrap(), 0.0);
        assert!(d.distribution_function(-1.0).is_err());
    }

    #[test]
    fn rearrangement_reads_the_step_function() {
        let d = two_level();
        assert_eq!(d.rearrangement(0.25).unwrap(), 2.0);
        assert_eq!(d.rearrangement(0.75).unwrap(), 1.0);
        // right-continuous at the jump
        assert_eq!(d.rearrangement(0.5).unwrap(), 1.0);
        assert_eq!(d.rearrangement(1.0).unwrap(), 0.0);
        let one = DiscreteDistribution::unit([(1.0, 1.0)]).unwrap();
        assert_eq!(one.rearrangement(2.0).unwrap(), 0.0);
        assert!(d.rearrangement(0.0).is_err());
        assert!(d.rearrangement(-0.5).is_err());
    }

    #[test]
    fn rearrangement_sequence_examples() {
        let f = disjoint_sum(&[
            DiscreteDistribution::unit([(2.0, 1.0)]).unwrap(),
            DiscreteDistribution::unit([(1.0, 1.0)]).unwrap(),
        ])
        .unwrap();
        assert_eq!(f.rearrangement_sequence(2).entries(), &[2.0, 1.0, 0.0]);

        let half = DiscreteDistribution::unit([(1.0, 0.5)]).unwrap();
        assert_eq!(half.rearrangement_sequence(1).entries(), &[1.0, 0.0]);

        let d = DiscreteDistribution::half_line([(3.0, 1.5), (1.0, 1.5)]).unwrap();
        assert_eq!(d.rearrangement_sequence(3).entries(), &[3.0, 3.0, 1.0, 0.0]);
    }

    #[test]
    fn disjoint_sum_merges_equal_values() {
        let a = DiscreteDistribution::unit([(1.0, 0.5)]).unwrap();
        let s = disjoint_sum(&[a.clone(), a]).unwrap();
        assert_eq!(s.atom_pairs(), vec![(1.0, 1.0)]);
        assert_eq!(s.ambient(), Ambient::HalfLine);

        let s = disjoint_sum(&[
            DiscreteDistribution::unit([(2.0, 0.3)]).unwrap(),
            DiscreteDistribution::unit([(1.0, 0.4)]).unwrap(),
        ])
        .unwrap();
        assert_eq!(s.atom_pairs(), vec![(2.0, 0.3), (1.0, 0.4)]);
        assert!(disjoint_sum(&[]).is_err());
    }

    #[test]
    fn dilation_scales_masses_and_promotes_ambient() {
        let one = DiscreteDistribution::unit([(1.0, 1.0)]).unwrap();
        let half = one.dilate(0.5).unwrap();
        assert_eq!(half.atom_pairs(), vec![(1.0, 0.5)]);
        assert_eq!(half.ambient(), Ambient::UnitInterval);

        let d = DiscreteDistribution::unit([(2.0, 0.5)]).unwrap();
        let big = d.dilate(3.0).unwrap();
        assert_eq!(big.atom_pairs(), vec![(2.0, 1.5)]);
        assert_eq!(big.ambient(), Ambient::HalfLine);

        assert!(d.dilate(0.0).is_err());
        assert!(d.dilate(-2.0).is_err());
    }

    #[test]
    fn sequence_dilation_repeats_entries() {
        let a = NonnegSequence::new(vec![1.0, 0.5]).unwrap();
        assert_eq!(a.dilate(2).unwrap().entries(), &[1.0, 1.0, 0.5, 0.5]);
        assert_eq!(a.dilate(1).unwrap(), a);
        assert_eq!(a.dilate(5).unwrap().len(), 10);
        assert!(a.dilate(0).is_err());
        assert!(NonnegSequence::new(vec![1.0, -1.0]).is_err());
    }

    #[test]
    fn power_maps_values() {
        let d = DiscreteDistribution::unit([(2.0, 0.5)]).unwrap();
        assert_eq!(d.power(2.0).unwrap().atom_pairs(), vec![(4.0, 0.5)]);
        assert_eq!(d.power(1.0).unwrap(), d);
        assert!(d.power(0.0).is_err());
    }

    #[test]
    fn split_at_level_examples() {
        let d = DiscreteDistribution::unit([(2.0, 0.3), (1.0, 0.5)]).unwrap();
        let (head, tail) = d.split_at_level(1.0).unwrap();
        assert_eq!(head.atom_pairs(), vec![(2.0, 0.3)]);
        assert_eq!(tail.atom_pairs(), vec![(1.0, 0.5)]);

        let (head, tail) = d.split_at_level(0.0).unwrap();
        assert_eq!(head, d);
        assert!(tail.atoms().is_empty());

        let (head, tail) = d.split_at_level(5.0).unwrap();
        assert!(head.atoms().is_empty());
        assert_eq!(tail, d);
    }

    #[test]
    fn independent_sum_of_two_half_indicators() {
        let a = DiscreteDistribution::unit([(1.0, 0.5)]).unwrap();
        let s = sum_of_independent(&[a.clone(), a.clone()]).unwrap();
        assert_eq!(s.atom_pairs(), vec![(2.0, 0.25), (1.0, 0.5), (0.0, 0.25)]);
        assert_eq!(s.total_mass(), 1.0);

        let single = sum_of_independent(std::slice::from_ref(&a)).unwrap();
        assert_eq!(single, a.with_zero_atom().unwrap());

        let half_line = DiscreteDistribution::half_line([(1.0, 0.5)]).unwrap();
        assert!(sum_of_independent(&[half_line]).is_err());
    }

    #[test]
    fn independent_sum_respects_the_cap() {
        let d = DiscreteDistribution::unit([(1.0, 0.2), (2.0, 0.2), (3.0, 0.2), (4.0, 0.2)])
            .unwrap();
        let family = vec![d; 11];
        match sum_of_independent(&family) {
            Err(Error::Capacity { required, .. }) => assert_eq!(required, 5u128.pow(11)),
            other => panic!("expected a capacity error, got {other:?}"),
        }
    }

    #[test]
    fn independent_max_closed_forms() {
        let a = DiscreteDistribution::unit([(1.0, 0.5)]).unwrap();
        let m = max_of_independent(&[a.clone(), a.clone()]).unwrap();
        assert_eq!(m.atom_pairs(), vec![(1.0, 0.75), (0.0, 0.25)]);
        assert!(max_of_independent(std::slice::from_ref(&a)).unwrap().same_law(&a, 1e-15));

        let q: f64 = 0.3;
        for n in 1..6 {
            let m = max_of_independent(&vec![
                DiscreteDistribution::unit([(1.0, q)]).unwrap();
                n
            ])
            .unwrap();
            let expected = 1.0 - (1.0 - q).powi(n as i32);
            assert!((m.nonzero().total_mass() - expected).abs() < 1e-15);
        }
    }

    #[test]
    fn restriction_to_the_unit_interval() {
        let d = DiscreteDistribution::half_line([(2.0, 0.75), (1.0, 1.0)]).unwrap();
        assert_eq!(d.restrict_to_unit().atom_pairs(), vec![(2.0, 0.75), (1.0, 0.25)]);
    }

    #[test]
    fn json_round_trip_and_validation() {
        let d = two_level();
        let text = serde_json::to_string(&d).unwrap();
        assert_eq!(text, r#"{"ambient":"unit","atoms":[[2.0,0.5],[1.0,0.5]]}"#);
        let back: DiscreteDistribution = serde_json::from_str(&text).unwrap();
        assert_eq!(back, d);

        let unsorted: DiscreteDistribution =
            serde_json::from_str(r#"{"ambient":"halfline","atoms":[[1,2],[3,1],[1,1]]}"#)
                .unwrap();
        assert_eq!(unsorted.atom_pairs(), vec![(3.0, 1.0), (1.0, 3.0)]);

        assert!(serde_json::from_str::<DiscreteDistribution>(
            r#"{"ambient":"unit","atoms":[[1,0.7],[2,0.7]]}"#
        )
        .is_err());
        assert!(serde_json::from_str::<DiscreteDistribution>(
            r#"{"ambient":"unit","atoms":[[-1,0.5]]}"#
        )
        .is_err());
    }
}
