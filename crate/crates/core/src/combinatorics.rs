//! Doubly stochastic level matrices and the statistics built on them.
//!
//! Indices are 0-based throughout. For a map `l : {0..n−1} → {0..n−1}` the
//! Junge statistic of `l` is `sup_{0≤r<n} Card{k : l_k ≤ r}/(r+1)`; with
//! 1-based `r` this reads `sup_r Card{k : l_k ≤ r}/r`.
//!
//! Every statistic used here depends on a map only through its histogram
//! `(Card{k : l_k = j})_j`, so the exact evaluators run a dynamic program over
//! histograms instead of visiting all `n^n` maps. The brute-force map
//! enumeration is kept for cross-checking.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::measure::{disjoint_sum, values_coincide, Ambient, DiscreteDistribution, NonnegSequence};
use crate::spaces::{for_each_product_atom, SeqSpaceSpec};
use crate::{TAU_MASS, TAU_VAL};

/// Largest `n` for which all `n^n` maps are visited by brute force.
pub const BRUTE_FORCE_MAX_N: usize = 8;

/// Largest number of distinct histograms the dynamic program may hold.
pub const HISTOGRAM_STATE_CAP: usize = 2_000_000;

/// Square nonnegative matrix with unit row and column sums.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DoublyStochastic {
    rows: Vec<Vec<f64>>,
}

impl DoublyStochastic {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n = rows.len();
        if n == 0 {
            return Err(Error::arg("matrix must have at least one row"));
        }
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::arg("matrix must be square"));
        }
        if rows.iter().flatten().any(|&x| !(x >= 0.0) || !x.is_finite()) {
            return Err(Error::arg("matrix entries must be finite and nonnegative"));
        }
        let m = Self { rows };
        let (r, c) = m.max_sum_defect();
        if r > TAU_MASS || c > TAU_MASS {
            return Err(Error::arg(format!(
                "matrix is not doubly stochastic (row defect {r:e}, column defect {c:e})"
            )));
        }
        Ok(m)
    }

    pub fn uniform(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::arg("matrix size must be positive"));
        }
        Self::new(vec![vec![1.0 / n as f64; n]; n])
    }

    /// Permutation matrix with a 1 at `(k, perm[k])`.
    pub fn permutation(perm: &[usize]) -> Result<Self> {
        let n = perm.len();
        let mut seen = vec![false; n];
        for &j in perm {
            if j >= n || seen[j] {
                return Err(Error::arg("not a permutation"));
            }
            seen[j] = true;
        }
        let rows = perm
            .iter()
            .map(|&j| (0..n).map(|l| if l == j { 1.0 } else { 0.0 }).collect())
            .collect();
        Self::new(rows)
    }

    /// Random convex combination of `terms` uniformly random permutation matrices.
    pub fn random<R: Rng + ?Sized>(n: usize, terms: usize, rng: &mut R) -> Result<Self> {
        if n == 0 || terms == 0 {
            return Err(Error::arg("random matrix needs n >= 1 and terms >= 1"));
        }
        let weights: Vec<f64> = (0..terms).map(|_| rng.gen::<f64>() + 1e-3).collect();
        let total: f64 = weights.iter().sum();
        let mut rows = vec![vec![0.0; n]; n];
        let mut perm: Vec<usize> = (0..n).collect();
        for w in weights {
            perm.shuffle(rng);
            for (k, &j) in perm.iter().enumerate() {
                rows[k][j] += w / total;
            }
        }
        Self::new(rows)
    }

    pub fn n(&self) -> usize {
        self.rows.len()
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    /// Largest deviation of a row sum and of a column sum from one.
    pub fn max_sum_defect(&self) -> (f64, f64) {
        let n = self.rows.len();
        let row = self
            .rows
            .iter()
            .map(|r| (r.iter().sum::<f64>() - 1.0).abs())
            .fold(0.0, f64::max);
        let col = (0..n)
            .map(|l| (self.rows.iter().map(|r| r[l]).sum::<f64>() - 1.0).abs())
            .fold(0.0, f64::max);
        (row, col)
    }

    /// The single supported map when this is a permutation matrix.
    pub fn as_map(&self) -> Option<Vec<usize>> {
        self.rows
            .iter()
            .map(|r| {
                let ones: Vec<usize> = (0..r.len()).filter(|&l| r[l] > 0.0).collect();
                (ones.len() == 1).then(|| ones[0])
            })
            .collect()
    }
}

/// Level matrix of a family: `P[k][l]` is the mass of `f_k` falling in the
/// level band `(μ(l+1,f), μ(l,f)]` of `f = ⊕ f_k`, and `levels[l] = μ(l,f)`
/// for `l = 0..=n`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LevelMatrix {
    pub matrix: DoublyStochastic,
    pub levels: NonnegSequence,
}

impl LevelMatrix {
    pub fn n(&self) -> usize {
        self.matrix.n()
    }
}

/// Builds the level matrix. The decreasing rearrangement of `⊕ f_k` lays
/// every atom (zero padding included) on a time interval of `(0, n)`; tied
/// values share one interval, which is split among them in proportion to
/// their masses. `P[k][l]` is the part of `f_k` landing in `[l, l+1)`.
pub fn build_level_matrix(fs: &[DiscreteDistribution]) -> Result<LevelMatrix> {
    let n = fs.len();
    if n == 0 {
        return Err(Error::arg("level matrix of an empty family"));
    }
    if fs.iter().any(|f| f.ambient() != Ambient::UnitInterval) {
        return Err(Error::arg("level matrix needs unit-interval inputs"));
    }
    let mut items: Vec<(f64, usize, f64)> = Vec::new();
    for (k, f) in fs.iter().enumerate() {
        for (v, m) in f.padded_pairs()? {
            items.push((v, k, m));
        }
    }
    items.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));

    let mut rows = vec![vec![0.0; n]; n];
    let mut start = 0.0f64;
    let mut i = 0;
    while i < items.len() {
        let mut j = i + 1;
        while j < items.len() && values_coincide(items[i].0, items[j].0) {
            j += 1;
        }
        let group = &items[i..j];
        let width: f64 = group.iter().map(|g| g.2).sum();
        let end = start + width;
        let first = (start.floor() as usize).min(n - 1);
        let last = ((end.ceil() as usize).max(1) - 1).min(n - 1);
        for l in first..=last {
            let overlap = end.min((l + 1) as f64) - start.max(l as f64);
            if overlap > 0.0 {
                for &(_, k, m) in group {
                    rows[k][l] += m * overlap / width;
                }
            }
        }
        start = end;
        i = j;
    }
    let levels = disjoint_sum(fs)?.rearrangement_sequence(n);
    Ok(LevelMatrix {
        matrix: DoublyStochastic::new(rows)?,
        levels,
    })
}

/// `Card{k : l_k = j}` for every column `j`.
pub fn map_histogram(l: &[usize]) -> Result<Vec<u8>> {
    let n = l.len();
    if n == 0 || n > u8::MAX as usize {
        return Err(Error::arg("map length must be between 1 and 255"));
    }
    let mut counts = vec![0u8; n];
    for &j in l {
        if j >= n {
            return Err(Error::arg(format!("map value {j} outside 0..{n}")));
        }
        counts[j] += 1;
    }
    Ok(counts)
}

/// `sup_r Card{k : l_k ≤ r}/(r+1)` from the histogram.
pub fn junge_ratio(counts: &[u8]) -> f64 {
    let mut prefix = 0usize;
    let mut best: f64 = 0.0;
    for (r, &c) in counts.iter().enumerate() {
        prefix += c as usize;
        best = best.max(prefix as f64 / (r + 1) as f64);
    }
    best
}

fn c_from_counts(counts: &[u8]) -> usize {
    let mut prefix = 0usize;
    let mut best = 1;
    for (r, &c) in counts.iter().enumerate() {
        prefix += c as usize;
        best = best.max(prefix.div_ceil(r + 1));
    }
    best
}

/// `C(l) = ⌈sup_r Card{k : l_k ≤ r}/(r+1)⌉`.
pub fn c_of_l(l: &[usize]) -> Result<usize> {
    Ok(c_from_counts(&map_histogram(l)?))
}

/// Law of the histogram of a random map whose coordinates `l_k` are
/// independent with `P(l_k = j) = P[k][j]`, as `(counts, probability)` pairs
/// in lexicographic order of `counts`.
pub fn histogram_law(m: &DoublyStochastic) -> Result<Vec<(Vec<u8>, f64)>> {
    let n = m.n();
    if n > u8::MAX as usize {
        return Err(Error::arg("histogram law supports n <= 255"));
    }
    let mut states: BTreeMap<Vec<u8>, f64> = BTreeMap::new();
    states.insert(vec![0u8; n], 1.0);
    for row in m.rows() {
        let mut next: BTreeMap<Vec<u8>, f64> = BTreeMap::new();
        for (h, &prob) in &states {
            for (j, &pj) in row.iter().enumerate() {
                if pj > 0.0 {
                    let mut h2 = h.clone();
                    h2[j] += 1;
                    *next.entry(h2).or_insert(0.0) += prob * pj;
                }
            }
            if next.len() > HISTOGRAM_STATE_CAP {
                return Err(Error::Capacity {
                    required: next.len() as u128,
                    cap: HISTOGRAM_STATE_CAP as u64,
                });
            }
        }
        states = next;
    }
    Ok(states.into_iter().collect())
}

fn check_p(p: f64) -> Result<()> {
    if !(p >= 1.0) || !p.is_finite() {
        return Err(Error::arg(format!("exponent p must be >= 1, got {p}")));
    }
    Ok(())
}

/// `[Σ_{l∈Δ_n} junge_ratio(l)^p Π_k P[k][l_k]]^{1/p}`, exactly.
pub fn junge_statistic(m: &DoublyStochastic, p: f64) -> Result<f64> {
    check_p(p)?;
    let s: f64 = histogram_law(m)?
        .iter()
        .map(|(h, prob)| prob * junge_ratio(h).powf(p))
        .sum();
    Ok(s.powf(1.0 / p))
}

/// Same as [`junge_statistic`] by visiting every map with nonzero weight.
/// The maps are partitioned by `l_0` across threads and the partial sums are
/// combined in index order.
pub fn junge_statistic_bruteforce(m: &DoublyStochastic, p: f64) -> Result<f64> {
    check_p(p)?;
    let n = m.n();
    if n > BRUTE_FORCE_MAX_N {
        return Err(Error::Capacity {
            required: (n as u128).pow(n as u32),
            cap: (BRUTE_FORCE_MAX_N as u64).pow(BRUTE_FORCE_MAX_N as u32),
        });
    }
    let rows = m.rows();
    let partials: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|first| {
            let w0 = rows[0][first];
            if w0 == 0.0 {
                return 0.0;
            }
            let mut counts = vec![0u8; n];
            counts[first] = 1;
            let mut acc = 0.0;
            visit_maps(rows, 1, w0, &mut counts, &mut |h, w| {
                acc += w * junge_ratio(h).powf(p)
            });
            acc
        })
        .collect();
    Ok(partials.iter().sum::<f64>().powf(1.0 / p))
}

fn visit_maps(
    rows: &[Vec<f64>],
    k: usize,
    weight: f64,
    counts: &mut Vec<u8>,
    visit: &mut impl FnMut(&[u8], f64),
) {
    if k == rows.len() {
        visit(counts, weight);
        return;
    }
    for (j, &pj) in rows[k].iter().enumerate() {
        if pj > 0.0 {
            counts[j] += 1;
            visit_maps(rows, k + 1, weight * pj, counts, visit);
            counts[j] -= 1;
        }
    }
}

/// Monte Carlo estimate of [`junge_statistic`] with its standard error.
pub fn junge_statistic_sampled<R: Rng + ?Sized>(
    m: &DoublyStochastic,
    p: f64,
    samples: usize,
    rng: &mut R,
) -> Result<(f64, f64)> {
    check_p(p)?;
    if samples < 2 {
        return Err(Error::arg("need at least two samples"));
    }
    let n = m.n();
    let cdfs: Vec<Vec<f64>> = m
        .rows()
        .iter()
        .map(|r| {
            r.iter()
                .scan(0.0, |acc, &x| {
                    *acc += x;
                    Some(*acc)
                })
                .collect()
        })
        .collect();
    let mut counts = vec![0u8; n];
    let (mut s1, mut s2) = (0.0, 0.0);
    for _ in 0..samples {
        counts.iter_mut().for_each(|c| *c = 0);
        for cdf in &cdfs {
            let u = rng.gen::<f64>() * cdf[n - 1];
            let j = cdf.partition_point(|&c| c <= u).min(n - 1);
            counts[j] += 1;
        }
        let y = junge_ratio(&counts).powf(p);
        s1 += y;
        s2 += y * y;
    }
    let mean = s1 / samples as f64;
    let var = ((s2 / samples as f64 - mean * mean) * samples as f64 / (samples - 1) as f64).max(0.0);
    let se_mean = (var / samples as f64).sqrt();
    let est = mean.powf(1.0 / p);
    // delta method for x ↦ x^{1/p}
    let se = if mean > 0.0 { est / (p * mean) * se_mean } else { 0.0 };
    Ok((est, se))
}

/// `p / (1 + ln p)`, the growth profile of the Junge statistic.
pub fn junge_profile(p: f64) -> f64 {
    p / (1.0 + p.ln())
}

/// Both sides of `∫_0^1 ‖(f_k(t))‖_E^p dt ≤ Σ_l ‖(a_{l_k})‖_E^p Π_k P[k][l_k]`
/// with `a_l = μ(l, ⊕f)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Step2Sides {
    pub lhs: f64,
    pub rhs: f64,
}

impl Step2Sides {
    pub fn holds(&self) -> bool {
        self.lhs <= self.rhs * (1.0 + TAU_VAL) + TAU_VAL
    }
}

pub fn step2_upper_check(fs: &[DiscreteDistribution], e: &SeqSpaceSpec, p: f64) -> Result<Step2Sides> {
    check_p(p)?;
    e.validate()?;
    let lm = build_level_matrix(fs)?;
    let mut lhs = 0.0;
    let mut scratch = Vec::new();
    for_each_product_atom(fs, |v, m| lhs += m * e.norm_of(v, &mut scratch).powf(p))?;

    let a = lm.levels.entries();
    let mut rhs = 0.0;
    let mut seq = Vec::with_capacity(fs.len());
    for (h, prob) in histogram_law(&lm.matrix)? {
        seq.clear();
        for (j, &c) in h.iter().enumerate() {
            seq.extend(std::iter::repeat_n(a[j], c as usize));
        }
        rhs += prob * e.norm_of(&seq, &mut scratch).powf(p);
    }
    Ok(Step2Sides { lhs, rhs })
}

/// Integer form of the domination `μ((a_{l_k})_k) ≤ σ_{C(l)} a`: with the
/// labels sorted ascending as `s_0 ≤ s_1 ≤ …`, every `s_j ≥ ⌊j / C(l)⌋`.
pub fn step3_domination_holds(l: &[usize]) -> Result<bool> {
    let c = c_of_l(l)?;
    let mut sorted = l.to_vec();
    sorted.sort_unstable();
    Ok(sorted.iter().enumerate().all(|(j, &s)| s >= j / c))
}

/// Value form of the same domination for a non-increasing sequence `a` of
/// length at least `l.len()`.
pub fn step3_domination_values(l: &[usize], a: &NonnegSequence) -> Result<bool> {
    let c = c_of_l(l)?;
    let a = a.entries();
    if a.len() < l.len() || a.windows(2).any(|w| w[1] > w[0]) {
        return Err(Error::arg("level sequence must be non-increasing and cover the map"));
    }
    let mut vals: Vec<f64> = l.iter().map(|&j| a[j]).collect();
    vals.sort_by(|x, y| y.total_cmp(x));
    Ok(vals.iter().enumerate().all(|(j, &v)| v <= a[j / c]))
}

/// Checks the integer domination on all `n^n` maps; returns `(maps, failures)`.
pub fn step3_check_all_maps(n: usize) -> Result<(u64, u64)> {
    if n == 0 || n > BRUTE_FORCE_MAX_N {
        return Err(Error::arg(format!("map enumeration needs 1 <= n <= {BRUTE_FORCE_MAX_N}")));
    }
    let total = (n as u64).pow(n as u32);
    let mut l = vec![0usize; n];
    let mut failures = 0;
    for mut code in 0..total {
        for slot in l.iter_mut() {
            *slot = (code % n as u64) as usize;
            code /= n as u64;
        }
        if !step3_domination_holds(&l)? {
            failures += 1;
        }
    }
    Ok((total, failures))
}

/// Number of indices `k` in the order-statistic event, `⌊(n+3)/4⌋`.
pub fn eta_event_length(n: usize) -> usize {
    n.div_ceil(4)
}

fn eta_event_holds(counts: &[u8], levels: &[f64]) -> bool {
    // labels ascending = ξ values descending; label j rounds down to levels[j+1]
    let mut k = 1;
    let kmax = eta_event_length(counts.len());
    for (j, &c) in counts.iter().enumerate() {
        for _ in 0..c {
            if k > kmax {
                return true;
            }
            let eta = levels[j + 1];
            let target = levels[4 * k - 3];
            if eta < target && !values_coincide(eta, target) {
                return false;
            }
            k += 1;
        }
    }
    true
}

/// `P(η_k ≥ x_{4k−3} for 1 ≤ k ≤ ⌊(n+3)/4⌋)` where `x_l = levels[l]`, each
/// `ξ_k` is `f_k` rounded down to the level below its band, and `η` is the
/// decreasing rearrangement of `(ξ_k)_k`.
pub fn eta_event_probability(lm: &LevelMatrix) -> Result<f64> {
    let levels = lm.levels.entries();
    if levels.len() < lm.n() + 1 {
        return Err(Error::arg("level sequence must have n + 1 entries"));
    }
    Ok(histogram_law(&lm.matrix)?
        .iter()
        .filter(|(h, _)| eta_event_holds(h, levels))
        .map(|(_, prob)| prob)
        .sum())
}

/// [`eta_event_probability`] for the level matrix of `fs`.
pub fn xi_eta_probability(fs: &[DiscreteDistribution]) -> Result<f64> {
    eta_event_probability(&build_level_matrix(fs)?)
}

/// [`xi_eta_probability`] with the levels `x_l = μ(l, ⊕f_k)` supplied by the
/// caller; levels that disagree with `fs` are an argument error.
pub fn xi_eta_construct(fs: &[DiscreteDistribution], x: &NonnegSequence) -> Result<f64> {
    let lm = build_level_matrix(fs)?;
    let own = lm.levels.entries();
    let given = x.entries();
    if given.len() < own.len() {
        return Err(Error::arg(format!(
            "need {} levels, got {}",
            own.len(),
            given.len()
        )));
    }
    if let Some((l, (a, b))) = own
        .iter()
        .zip(given)
        .enumerate()
        .find(|(_, (a, b))| (*a - *b).abs() > TAU_VAL * a.max(1.0))
    {
        return Err(Error::arg(format!(
            "level {l} is {b}, but the rearrangement of the disjoint sum gives {a}"
        )));
    }
    eta_event_probability(&lm)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn unit(atoms: &[(f64, f64)]) -> DiscreteDistribution {
        DiscreteDistribution::unit(atoms.iter().copied()).unwrap()
    }

    #[test]
    fn xi_eta_construct_checks_levels() {
        let fs = [unit(&[(1.0, 0.5)])];
        let x = NonnegSequence::new(vec![1.0, 0.0]).unwrap();
        assert_eq!(xi_eta_construct(&fs, &x).unwrap(), 1.0);
        let wrong = NonnegSequence::new(vec![2.0, 0.0]).unwrap();
        assert!(xi_eta_construct(&fs, &wrong).is_err());
    }

    #[test]
    fn level_matrix_of_two_constants() {
        let lm = build_level_matrix(&[unit(&[(1.0, 1.0)]), unit(&[(2.0, 1.0)])]).unwrap();
        assert_eq!(lm.matrix.rows(), &[vec![0.0, 1.0], vec![1.0, 0.0]]);
        assert_eq!(lm.levels.entries(), &[2.0, 1.0, 0.0]);
    }

    #[test]
    fn level_matrix_of_iid_copies_has_equal_rows() {
        let f = unit(&[(3.0, 0.25), (1.0, 0.5)]);
        let lm = build_level_matrix(&[f.clone(), f.clone(), f]).unwrap();
        let rows = lm.matrix.rows();
        for r in rows {
            for (x, y) in r.iter().zip(&rows[0]) {
                assert!((x - y).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn c_of_l_examples() {
        assert_eq!(c_of_l(&[0, 1, 2, 3]).unwrap(), 1);
        assert_eq!(c_of_l(&[0, 0]).unwrap(), 2);
        assert_eq!(c_of_l(&[0; 5]).unwrap(), 5);
        assert_eq!(c_of_l(&[4; 5]).unwrap(), 1);
        assert!(c_of_l(&[2, 0]).is_err());
    }

    #[test]
    fn junge_examples() {
        let id = DoublyStochastic::permutation(&[0, 1]).unwrap();
        assert_eq!(junge_statistic(&id, 1.0).unwrap(), 1.0);
        let u = DoublyStochastic::uniform(2).unwrap();
        assert!((junge_statistic(&u, 1.0).unwrap() - 1.25).abs() < 1e-15);
        let perm = DoublyStochastic::permutation(&[2, 0, 1]).unwrap();
        let l = perm.as_map().unwrap();
        let single = junge_ratio(&map_histogram(&l).unwrap());
        for p in [1.0, 2.5, 7.0] {
            assert!((junge_statistic(&perm, p).unwrap() - single).abs() < 1e-15);
        }
        assert!(junge_statistic(&u, 0.5).is_err());
    }

    #[test]
    fn histogram_dp_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for n in 1..=6 {
            let m = DoublyStochastic::random(n, 3, &mut rng).unwrap();
            for p in [1.0, 2.0, 4.0] {
                let a = junge_statistic(&m, p).unwrap();
                let b = junge_statistic_bruteforce(&m, p).unwrap();
                assert!((a - b).abs() < 1e-12 * a.max(1.0), "n={n} p={p}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn sampled_estimate_is_close() {
        let m = DoublyStochastic::uniform(5).unwrap();
        let exact = junge_statistic(&m, 2.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let (est, se) = junge_statistic_sampled(&m, 2.0, 20_000, &mut rng).unwrap();
        assert!((est - exact).abs() < 4.0 * se, "{est} ± {se} vs {exact}");
    }

    #[test]
    fn step2_examples() {
        let f = unit(&[(2.0, 0.4), (0.5, 0.35)]);
        let s = step2_upper_check(std::slice::from_ref(&f), &SeqSpaceSpec::EllQ(1.0), 1.0).unwrap();
        assert!((s.lhs - f.mean()).abs() < 1e-12);
        assert!(s.holds());

        let g = unit(&[(3.0, 0.5), (1.0, 0.5)]);
        let s = step2_upper_check(&[g.clone(), g.clone()], &SeqSpaceSpec::EllQ(1.0), 1.0).unwrap();
        assert!((s.lhs - 4.0).abs() < 1e-12);
        assert!(s.holds(), "{s:?}");
    }

    #[test]
    fn step3_on_all_small_maps() {
        for n in 1..=5 {
            let (maps, failures) = step3_check_all_maps(n).unwrap();
            assert_eq!(maps, (n as u64).pow(n as u32));
            assert_eq!(failures, 0);
        }
        let a = NonnegSequence::new(vec![5.0, 3.0, 2.0, 1.0]).unwrap();
        assert!(step3_domination_values(&[0, 0, 3, 1], &a).unwrap());
    }

    #[test]
    fn eta_event_examples() {
        assert_eq!(xi_eta_probability(&[unit(&[(2.0, 0.3)])]).unwrap(), 1.0);
        let f = unit(&[(4.0, 0.25), (3.0, 0.25), (2.0, 0.25), (1.0, 0.25)]);
        let prob = xi_eta_probability(&vec![f; 4]).unwrap();
        assert!((prob - 175.0 / 256.0).abs() < 1e-14, "{prob}");
    }

    /// Direct enumeration of all maps, evaluating the event on explicit ξ values.
    fn eta_bruteforce(lm: &LevelMatrix) -> f64 {
        let n = lm.n();
        let x = lm.levels.entries();
        let mut total = 0.0;
        for mut code in 0..(n as u64).pow(n as u32) {
            let mut w = 1.0;
            let mut xi = Vec::with_capacity(n);
            for k in 0..n {
                let j = (code % n as u64) as usize;
                code /= n as u64;
                w *= lm.matrix.rows()[k][j];
                xi.push(x[j + 1]);
            }
            xi.sort_by(|a, b| b.total_cmp(a));
            if (1..=eta_event_length(n)).all(|k| xi[k - 1] >= x[4 * k - 3] * (1.0 - 1e-12)) {
                total += w;
            }
        }
        total
    }

    fn family(n: usize) -> impl Strategy<Value = Vec<DiscreteDistribution>> {
        let grid = [0.0, 0.001, 0.5, 1.0, 1.0, 2.0, 7.5, 100.0];
        proptest::collection::vec(
            proptest::collection::vec((0usize..8, 1u32..=32), 1..=2),
            n,
        )
        .prop_map(move |fam| {
            fam.into_iter()
                .map(|atoms| {
                    let pairs: Vec<(f64, f64)> = atoms
                        .into_iter()
                        .map(|(i, m)| (grid[i], m as f64 / 64.0))
                        .collect();
                    DiscreteDistribution::unit(pairs).unwrap()
                })
                .collect()
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn level_matrices_are_doubly_stochastic(fs in (1usize..=6).prop_flat_map(family)) {
            let lm = build_level_matrix(&fs).unwrap();
            let (r, c) = lm.matrix.max_sum_defect();
            prop_assert!(r < 1e-9 && c < 1e-9);
            prop_assert_eq!(lm.levels.len(), fs.len() + 1);
        }

        #[test]
        fn eta_probability_matches_enumeration(fs in (1usize..=5).prop_flat_map(family)) {
            let lm = build_level_matrix(&fs).unwrap();
            let a = eta_event_probability(&lm).unwrap();
            let b = eta_bruteforce(&lm);
            prop_assert!((a - b).abs() < 1e-12, "{} vs {}", a, b);
            prop_assert!(a > 0.1);
        }

        #[test]
        fn step2_holds(fs in (1usize..=4).prop_flat_map(family), which in 0usize..3, p in 1.0f64..4.0) {
            let e = [SeqSpaceSpec::EllQ(1.5), SeqSpaceSpec::EllInfty, SeqSpaceSpec::WeakEll1][which];
            let s = step2_upper_check(&fs, &e, p).unwrap();
            prop_assert!(s.holds(), "{:?}", s);
        }

        #[test]
        fn junge_is_monotone_in_p(seed in 0u64..1000, n in 1usize..=6) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let m = DoublyStochastic::random(n, 4, &mut rng).unwrap();
            let vals: Vec<f64> = [1.0, 1.5, 2.0, 4.0, 8.0]
                .iter()
                .map(|&p| junge_statistic(&m, p).unwrap())
                .collect();
            for w in vals.windows(2) {
                prop_assert!(w[1] >= w[0] * (1.0 - 1e-12));
            }
        }
    }
}
