//! The Kruglov (compound Poisson) transform.
//!
//! `Kf` is the sum of `N` independent copies of `f` where `N ~ Poisson(1)`,
//! i.e. the event `A_n = {N = n}` has probability `1/(e·n!)`.

use std::f64::consts::E;

use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::measure::{
    convolve, disjoint_sum, rearrangement_domination, sum_of_independent, Ambient,
    DiscreteDistribution, Domination,
};
use crate::spaces::{orlicz_modular, OrliczFunction, PsiTable};
use crate::{ENUMERATION_CAP, TAU_MASS, TAU_VAL};

/// Default truncation of the Poisson mixture.
pub const DEFAULT_TRUNCATION: usize = 17;

/// Pruning threshold used by [`kruglov_domination_check`].
pub const DOMINATION_PRUNE_MASS: f64 = 1e-15;

/// Truncated law of `Kf`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KruglovLaw {
    pub base: DiscreteDistribution,
    pub truncation: usize,
    pub law: DiscreteDistribution,
    /// Upper bound on the mass of `Kf` missing from `law`.
    pub tail_mass_bound: f64,
}

/// `P(A_n) = 1/(e·n!)` for `n = 0..=n_max`.
pub fn poisson_weights(n_max: usize) -> Vec<f64> {
    let mut w = Vec::with_capacity(n_max + 1);
    let mut cur = (-1.0f64).exp();
    for n in 0..=n_max {
        if n > 0 {
            cur /= n as f64;
        }
        w.push(cur);
    }
    w
}

/// `Σ_{n>N} 1/(e·n!)`, summed directly to avoid cancellation.
pub fn poisson_tail(n: usize) -> f64 {
    let w = poisson_weights(n + 40);
    w[n + 1..].iter().rev().sum()
}

/// Exact mixture `Σ_{n=0}^N P(A_n)·law(f_1+…+f_n)`.
pub fn kruglov_distribution(f: &DiscreteDistribution, truncation: usize) -> Result<KruglovLaw> {
    kruglov_distribution_pruned(f, truncation, 0.0)
}

/// Like [`kruglov_distribution`], but after each convolution step drops atoms
/// whose mass, weighted by `P(N ≥ n)`, is below `prune_mass`. The dropped
/// mass is added to `tail_mass_bound`. Pruning only removes mass, so the
/// rearrangement of the returned law is pointwise below that of `Kf`.
pub fn kruglov_distribution_pruned(
    f: &DiscreteDistribution,
    truncation: usize,
    prune_mass: f64,
) -> Result<KruglovLaw> {
    if f.ambient() != Ambient::UnitInterval {
        return Err(Error::arg("Kruglov transform needs a unit-interval law"));
    }
    if truncation < 1 {
        return Err(Error::arg("Kruglov truncation must be at least 1"));
    }
    if !(prune_mass >= 0.0) {
        return Err(Error::arg("pruning threshold must be nonnegative"));
    }
    let step = f.padded_pairs()?;
    let weights = poisson_weights(truncation);
    let tail = poisson_tail(truncation);
    // P(N ≥ n)
    let mut at_least: Vec<f64> = vec![0.0; truncation + 1];
    let mut acc = tail;
    for n in (0..=truncation).rev() {
        acc += weights[n];
        at_least[n] = acc;
    }

    let mut mixture: Vec<(f64, f64)> = vec![(0.0, weights[0])];
    let mut missing = tail;
    let mut current: Vec<(f64, f64)> = vec![(0.0, 1.0)];
    for n in 1..=truncation {
        let required = (current.len() as u128) * (step.len() as u128);
        if required > ENUMERATION_CAP as u128 {
            return Err(Error::Capacity {
                required,
                cap: ENUMERATION_CAP,
            });
        }
        let next = convolve(&current, &step);
        current.clear();
        let mut kept = 0.0;
        for a in next {
            if a.mass * at_least[n] >= prune_mass {
                kept += a.mass;
                current.push((a.value, a.mass));
            }
        }
        mixture.extend(current.iter().map(|&(v, m)| (v, m * weights[n])));
        missing += weights[n] * (1.0 - kept).max(0.0);
        if current.is_empty() {
            missing += at_least.get(n + 1).copied().unwrap_or(0.0) - tail;
            break;
        }
    }
    Ok(KruglovLaw {
        base: f.clone(),
        truncation,
        law: DiscreteDistribution::unit(mixture)?,
        tail_mass_bound: missing,
    })
}

/// Draws `N ~ Poisson(1)` by inverse transform.
fn poisson_one<R: Rng + ?Sized>(rng: &mut R) -> usize {
    let u: f64 = rng.gen();
    let mut w = (-1.0f64).exp();
    let mut cum = w;
    let mut n = 0;
    while u >= cum && n < 170 {
        n += 1;
        w /= n as f64;
        cum += w;
    }
    n
}

/// One draw of `Kf` for a unit-interval law `f`.
pub fn kruglov_sample<R: Rng + ?Sized>(f: &DiscreteDistribution, rng: &mut R) -> f64 {
    let n = poisson_one(rng);
    (0..n).map(|_| f.quantile(rng.gen())).sum()
}

/// `ψ(t) = ∫_0^t μ(s, Kχ_(0,1)) ds` from the Poisson(1) law truncated at
/// `truncation`, with knots at every jump of `μ(Kχ)` plus `extra_knots`
/// log-spaced evaluation points in between.
pub fn psi_table(truncation: usize, extra_knots: usize) -> Result<PsiTable> {
    if truncation < 1 {
        return Err(Error::arg("ψ table needs a truncation of at least 1"));
    }
    let w = poisson_weights(truncation);
    // jumps of μ(Kχ): t_n = P(n ≤ K ≤ N), ψ(t_n) = Σ_{m=n}^N m·P(K=m)
    let mut jumps: Vec<(f64, f64)> = Vec::with_capacity(truncation + 1);
    let (mut t, mut v) = (0.0, 0.0);
    for n in (1..=truncation).rev() {
        t += w[n];
        v += n as f64 * w[n];
        jumps.push((t, v));
    }
    let mut knots = jumps.clone();
    if extra_knots > 0 {
        let lo = jumps[0].0.ln();
        let span = -lo;
        for i in 1..=extra_knots {
            let s = (lo + span * i as f64 / (extra_knots + 1) as f64).exp();
            if knots.iter().all(|&(x, _)| (x - s).abs() > 1e-9 * x) {
                knots.push((s, integrate_jumps(&jumps, s)));
            }
        }
    }
    if knots.iter().all(|&(x, _)| x < 1.0) {
        knots.push((1.0, v));
    }
    knots.sort_by(|a, b| a.0.total_cmp(&b.0));
    PsiTable::new(knots)
}

/// Integral of the step function whose cumulative knots are `jumps`.
fn integrate_jumps(jumps: &[(f64, f64)], s: f64) -> f64 {
    let idx = jumps.partition_point(|&(t, _)| t <= s);
    let (t0, v0) = if idx == 0 { (0.0, 0.0) } else { jumps[idx - 1] };
    match jumps.get(idx) {
        // slope on (t0, t1) is the value μ there
        Some(&(t1, v1)) => v0 + (v1 - v0) / (t1 - t0) * (s - t0),
        None => v0,
    }
}

/// `ψ` next to the two candidate closed forms of its small-`t` asymptotics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PsiAsymptotics {
    pub t: f64,
    pub psi: f64,
    /// `ψ(t) / [t·ln(e·ln(1/t)) / ln(1/t)]`
    pub ratio_log_over_log: f64,
    /// `ψ(t) / [t·ln(1/t) / ln(e·ln(1/t))]`
    pub ratio_inverse: f64,
}

pub fn psi_asymptotics(psi: &PsiTable, ts: &[f64]) -> Vec<PsiAsymptotics> {
    ts.iter()
        .map(|&t| {
            let l = (1.0 / t).ln();
            let ll = (E * l).ln();
            let value = psi.eval(t);
            PsiAsymptotics {
                t,
                psi: value,
                ratio_log_over_log: value / (t * ll / l),
                ratio_inverse: value / (t * l / ll),
            }
        })
        .collect()
}

/// One row of [`poisson_moment_profile`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MomentRow {
    pub p: f64,
    pub norm: f64,
    pub profile: f64,
}

impl MomentRow {
    pub fn ratio(&self) -> f64 {
        self.norm / self.profile
    }
}

/// `‖Kχ_(0,1)‖_p` (Poisson(1) moments, summed in log space) against `p/ln(ep)`.
pub fn poisson_moment_profile(p_grid: &[f64]) -> Result<Vec<MomentRow>> {
    p_grid
        .iter()
        .map(|&p| {
            if !(1.0..=50.0).contains(&p) {
                return Err(Error::arg(format!("moment profile needs 1 <= p <= 50, got {p}")));
            }
            // log E K^p = log Σ_n n^p / (e n!)
            let mut log_terms = Vec::with_capacity(400);
            let mut log_fact = 0.0;
            for n in 1..400usize {
                log_fact += (n as f64).ln();
                log_terms.push(p * (n as f64).ln() - 1.0 - log_fact);
            }
            let top = log_terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let s: f64 = log_terms.iter().map(|&l| (l - top).exp()).sum();
            let log_moment = top + s.ln();
            Ok(MomentRow {
                p,
                norm: (log_moment / p).exp(),
                profile: p / (E * p).ln(),
            })
        })
        .collect()
}

/// `c_Ψ = 2·log₂ C_Ψ`, so that `Ψ(mt) ≤ m^{c_Ψ} Ψ(t)` for every integer `m ≥ 1`.
pub fn modular_growth_exponent(delta2: f64) -> f64 {
    2.0 * delta2.log2()
}

/// `Σ_{m≥1} m^{c+1}/(e·m!)`, summed until the terms vanish.
pub fn modular_bound_constant(c: f64) -> f64 {
    let mut total = 0.0;
    let mut log_fact = 0.0;
    for m in 1..2000usize {
        log_fact += (m as f64).ln();
        let term = ((c + 1.0) * (m as f64).ln() - 1.0 - log_fact).exp();
        total += term;
        if m as f64 > c + 2.0 && term < total * 1e-18 {
            break;
        }
    }
    total
}

/// Both sides of `∫Ψ(Kf) ≤ C·∫Ψ(f)` with the explicit series constant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ModularBound {
    pub lhs: f64,
    pub rhs_constant: f64,
    pub rhs: f64,
}

impl ModularBound {
    pub fn holds(&self) -> bool {
        self.lhs <= self.rhs * (1.0 + TAU_VAL) + TAU_VAL
    }
}

pub fn kruglov_modular_bound_check(psi: &OrliczFunction, f: &DiscreteDistribution) -> Result<ModularBound> {
    let c_delta = psi
        .delta2_constant()
        .ok_or_else(|| Error::arg("Orlicz function carries no certified Δ₂ constant"))?;
    let k = kruglov_distribution(f, DEFAULT_TRUNCATION)?;
    let rhs_constant = modular_bound_constant(modular_growth_exponent(c_delta));
    Ok(ModularBound {
        lhs: orlicz_modular(psi, &k.law),
        rhs_constant,
        rhs: rhs_constant * orlicz_modular(psi, f),
    })
}

/// Checks `μ(t, Σ f_k) ≤ 3·μ(t/3, Kf)` on `(0, 1)`, where `f = ⊕ f_k` is
/// placed in `(0, 1)` and the `f_k` are independent with supports of total
/// measure at most one. The Kruglov law is pruned at
/// [`DOMINATION_PRUNE_MASS`], which can only make the check stricter.
pub fn kruglov_domination_check(fs: &[DiscreteDistribution]) -> Result<Domination> {
    if fs.iter().any(|f| f.ambient() != Ambient::UnitInterval) {
        return Err(Error::arg("domination check needs unit-interval inputs"));
    }
    let support: f64 = fs.iter().map(|f| f.support_mass()).sum();
    if support > 1.0 + TAU_MASS {
        return Err(Error::arg(format!(
            "supports of total measure {support} do not fit in (0,1)"
        )));
    }
    let sum = sum_of_independent(fs)?;
    let packed = disjoint_sum(fs)?.nonzero().into_unit_interval()?;
    let k = kruglov_distribution_pruned(&packed, DEFAULT_TRUNCATION, DOMINATION_PRUNE_MASS)?;
    rearrangement_domination(&sum, &k.law, 3.0, 3.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn unit(atoms: &[(f64, f64)]) -> DiscreteDistribution {
        DiscreteDistribution::unit(atoms.iter().copied()).unwrap()
    }

    fn mass_at(d: &DiscreteDistribution, v: f64) -> f64 {
        d.atoms()
            .iter()
            .filter(|a| (a.value - v).abs() < 1e-9)
            .map(|a| a.mass)
            .sum()
    }

    fn poisson_pmf(lambda: f64, k: usize) -> f64 {
        let mut p = (-lambda).exp();
        for i in 1..=k {
            p *= lambda / i as f64;
        }
        p
    }

    #[test]
    fn indicator_gives_poisson_one() {
        let k = kruglov_distribution(&DiscreteDistribution::indicator(), 17).unwrap();
        let mut fact = 1.0;
        for n in 0..=15usize {
            if n > 0 {
                fact *= n as f64;
            }
            let expected = 1.0 / (E * fact);
            assert!((mass_at(&k.law, n as f64) - expected).abs() < 1e-12, "n={n}");
        }
        assert!(k.tail_mass_bound < 1e-14);
        assert!((k.law.total_mass() + k.tail_mass_bound - 1.0).abs() < TAU_MASS);
    }

    #[test]
    fn half_indicator_has_thinned_zero_mass() {
        let k = kruglov_distribution(&unit(&[(1.0, 0.5)]), 17).unwrap();
        assert!((mass_at(&k.law, 0.0) - (-0.5f64).exp()).abs() < 1e-12);
    }

    #[test]
    fn zero_law_stays_at_zero() {
        let k = kruglov_distribution(&DiscreteDistribution::zero(Ambient::UnitInterval), 17).unwrap();
        assert!(k.law.is_zero());
        assert!((k.law.total_mass() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn matches_independent_poisson_thinning() {
        // Kf = 1·N_1 + 3·N_2 with N_1 ~ Poisson(1/4), N_2 ~ Poisson(1/2) independent
        let f = unit(&[(1.0, 0.25), (3.0, 0.5)]);
        let k = kruglov_distribution(&f, 17).unwrap();
        for x in 0..=12usize {
            let mut expected = 0.0;
            for b in 0..=x / 3 {
                expected += poisson_pmf(0.25, x - 3 * b) * poisson_pmf(0.5, b);
            }
            assert!((mass_at(&k.law, x as f64) - expected).abs() < 1e-12, "x={x}");
        }
    }

    #[test]
    fn mean_is_preserved() {
        let f = unit(&[(2.5, 0.125), (0.3, 0.375), (7.0, 0.0625)]);
        let k = kruglov_distribution(&f, 17).unwrap();
        assert!((k.law.mean() - f.mean()).abs() < 1e-10);
    }

    #[test]
    fn capacity_is_enforced() {
        let atoms: Vec<(f64, f64)> = (0..40).map(|i| (1.0 + (i as f64).sqrt() * 0.731, 0.02)).collect();
        let f = unit(&atoms);
        assert!(matches!(
            kruglov_distribution(&f, 17),
            Err(Error::Capacity { .. })
        ));
        assert!(kruglov_distribution(&DiscreteDistribution::half_line([(1.0, 2.0)]).unwrap(), 3).is_err());
    }

    #[test]
    fn pruning_only_removes_mass() {
        let f = unit(&[(1.7, 0.125), (0.9, 0.25), (0.013, 0.5)]);
        let exact = kruglov_distribution(&f, 17).unwrap();
        let pruned = kruglov_distribution_pruned(&f, 17, 1e-10).unwrap();
        assert!(pruned.law.atoms().len() < exact.law.atoms().len());
        let total = pruned.law.total_mass() + pruned.tail_mass_bound;
        assert!((total - 1.0).abs() < TAU_MASS);
        for i in 1..1000 {
            let t = i as f64 / 1000.0;
            assert!(pruned.law.quantile(t) <= exact.law.quantile(t));
        }
    }

    #[test]
    fn sampler_means() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let ind = DiscreteDistribution::indicator();
        let m: f64 = (0..100_000).map(|_| kruglov_sample(&ind, &mut rng)).sum::<f64>() / 1e5;
        assert!((m - 1.0).abs() < 0.02, "{m}");
        let half = unit(&[(1.0, 0.5)]);
        let m: f64 = (0..100_000).map(|_| kruglov_sample(&half, &mut rng)).sum::<f64>() / 1e5;
        assert!((m - 0.5).abs() < 0.02, "{m}");
        let zero = DiscreteDistribution::zero(Ambient::UnitInterval);
        assert!((0..1000).all(|_| kruglov_sample(&zero, &mut rng) == 0.0));
    }

    #[test]
    fn sampler_within_dkw_band() {
        let f = unit(&[(2.0, 0.25), (0.5, 0.5)]);
        let k = kruglov_distribution(&f, 17).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = 100_000;
        let mut draws: Vec<f64> = (0..n).map(|_| kruglov_sample(&f, &mut rng)).collect();
        draws.sort_by(f64::total_cmp);
        let band = ((2.0f64 / 0.001).ln() / (2.0 * n as f64)).sqrt();
        for a in k.law.atoms() {
            let emp = draws.partition_point(|&x| x <= a.value + 1e-9) as f64 / n as f64;
            let exact = k.law.total_mass() - k.law.distribution_function(a.value + 1e-9).unwrap();
            assert!((emp - exact).abs() <= band, "value {}: {emp} vs {exact}", a.value);
        }
    }

    #[test]
    fn psi_profile() {
        let psi = psi_table(17, 64).unwrap();
        assert!((psi.eval(1.0) - 1.0).abs() < 1e-10);
        assert!(psi.is_concave_nondecreasing(1e-9));
        let ts: Vec<f64> = (3..=8).map(|k| 10f64.powi(-k)).collect();
        let rows = psi_asymptotics(&psi, &ts);
        let inv: Vec<f64> = rows.iter().map(|r| r.ratio_inverse).collect();
        let (lo, hi) = inv.iter().fold((f64::MAX, 0.0f64), |(l, h), &r| (l.min(r), h.max(r)));
        assert!(lo >= 0.1 && hi <= 10.0 && hi / lo <= 1.5, "{inv:?}");
        // the other candidate form drifts by more than a factor of three
        let direct: Vec<f64> = rows.iter().map(|r| r.ratio_log_over_log).collect();
        assert!(direct[5] / direct[0] > 3.0, "{direct:?}");
    }

    #[test]
    fn moment_profile_values() {
        let rows = poisson_moment_profile(&[1.0, 2.0, 4.0, 16.0, 50.0]).unwrap();
        assert!((rows[0].norm - 1.0).abs() < 1e-12);
        assert!((rows[1].norm - 2f64.sqrt()).abs() < 1e-12);
        // E K^4 = Bell(4) = 15
        assert!((rows[2].norm - 15f64.powf(0.25)).abs() < 1e-12);
        assert!(rows.iter().all(|r| (0.5..2.0).contains(&r.ratio())));
        assert!(poisson_moment_profile(&[0.5]).is_err());
    }

    #[test]
    fn modular_bound_examples() {
        let id = OrliczFunction::power(1.0).unwrap();
        let b = kruglov_modular_bound_check(&id, &DiscreteDistribution::indicator()).unwrap();
        assert!((b.lhs - 1.0).abs() < 1e-12);
        // c = 2, Σ m³/(e·m!) = Bell(3) = 5
        assert!((b.rhs_constant - 5.0).abs() < 1e-12);
        assert!(b.holds());

        let sq = OrliczFunction::power(2.0).unwrap();
        let f = unit(&[(1.0, 0.5)]);
        let b = kruglov_modular_bound_check(&sq, &f).unwrap();
        // K f ~ Poisson(1/2): E K² = 1/2 + 1/4
        assert!((b.lhs - 0.75).abs() < 1e-12);
        assert!(b.holds());

        let zero = DiscreteDistribution::zero(Ambient::UnitInterval);
        let b = kruglov_modular_bound_check(&sq, &zero).unwrap();
        assert_eq!((b.lhs, b.rhs), (0.0, 0.0));

        let bare = OrliczFunction::without_certificate(crate::OrliczKind::Power(2.0)).unwrap();
        assert!(kruglov_modular_bound_check(&bare, &f).is_err());
    }

    #[test]
    fn domination_examples() {
        let out = kruglov_domination_check(&[unit(&[(1.0, 0.5)])]).unwrap();
        assert!(out.holds);
        assert!(out.lhs <= out.rhs / 3.0 * (1.0 + 1e-12));

        let zeros = vec![DiscreteDistribution::zero(Ambient::UnitInterval); 3];
        let out = kruglov_domination_check(&zeros).unwrap();
        assert!(out.holds);
        assert_eq!(out.lhs, 0.0);

        let fs = [
            unit(&[(5.0, 0.125), (0.2, 0.25)]),
            unit(&[(31.0, 0.0625)]),
            unit(&[(0.7, 0.25), (0.001, 0.125)]),
        ];
        assert!(kruglov_domination_check(&fs).unwrap().holds);

        let too_wide = [unit(&[(1.0, 0.75)]), unit(&[(1.0, 0.5)])];
        assert!(kruglov_domination_check(&too_wide).is_err());
    }
}
