//! Seeded experiments over random families of independent variables.
//!
//! Every random draw comes from a ChaCha8 stream keyed by `(seed, purpose)`
//! and selected by the instance index, so results do not depend on how the
//! instances are scheduled across threads.

use std::fs::File;
use std::io::Write;
use std::path::Path;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::combinatorics::{
    build_level_matrix, eta_event_length, eta_event_probability, step2_upper_check,
    step3_domination_values,
};
use crate::error::{Error, Result};
use crate::kruglov::{
    kruglov_distribution, kruglov_domination_check, kruglov_modular_bound_check,
    poisson_weights, psi_table, DEFAULT_TRUNCATION,
};
use crate::measure::{
    disjoint_sum, max_of_independent, rearrangement_domination, DiscreteDistribution,
    NonnegSequence,
};
use crate::spaces::{
    function_quasinorm, lp_norm, mixed_modular_exact, mixed_norm_exact, orlicz_modular, rhs_modular,
    rhs_theorem_main, sequence_quasinorm, OrliczFunction, OrliczKind, SeqSpaceSpec, SpaceSpec,
};
use crate::TAU_VAL;

/// Seed used when neither the caller nor the configuration provides one.
pub const DEFAULT_SEED: u64 = 42;

/// Smallest number of Monte Carlo trials accepted.
pub const MIN_TRIALS: u64 = 1000;

/// Relative tolerance (against `max(1, rhs)`) of the `p = q` Fubini identity.
pub const FUBINI_TOLERANCE: f64 = 1e-9;

/// Number of batches for batch-means standard errors.
const BATCHES: usize = 20;

const PURPOSE_FAMILY: u64 = 1;
const PURPOSE_TRIALS: u64 = 2;
const PURPOSE_SUITE: u64 = 3;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Independent stream number `index` for the given seed and purpose.
pub fn substream(seed: u64, purpose: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(splitmix64(seed ^ splitmix64(purpose)));
    rng.set_stream(index);
    rng
}

/// One joint draw `(f_0(ω_0), …, f_{n−1}(ω_{n−1}))` by inverse transform.
pub fn sample_independent<R: Rng + ?Sized>(fs: &[DiscreteDistribution], rng: &mut R) -> Vec<f64> {
    let mut out = Vec::with_capacity(fs.len());
    sample_into(fs, rng, &mut out);
    out
}

fn sample_into<R: Rng + ?Sized>(fs: &[DiscreteDistribution], rng: &mut R, out: &mut Vec<f64>) {
    out.clear();
    out.extend(fs.iter().map(|f| f.quantile(rng.gen())));
}

// ---------------------------------------------------------------------------
// Family generator

/// Whether the mass budget applies to each variable or to the whole family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BudgetScope {
    PerVariable,
    Total,
}

/// Random families: atom values are distinct points of a log-spaced grid,
/// atom masses are multiples of `1/mass_denominator` obtained by cutting the
/// budget at random points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FamilySpec {
    pub value_min: f64,
    pub value_max: f64,
    pub value_points: usize,
    pub mass_denominator: u32,
    pub atoms_per_variable: usize,
    pub budget: f64,
    pub budget_scope: BudgetScope,
    /// Overrides the experiment seed for family generation only.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl Default for FamilySpec {
    fn default() -> Self {
        Self {
            value_min: 1e-3,
            value_max: 1e3,
            value_points: 25,
            mass_denominator: 64,
            atoms_per_variable: 2,
            budget: 1.0,
            budget_scope: BudgetScope::PerVariable,
            seed: None,
        }
    }
}

impl FamilySpec {
    /// Families whose supports have total measure at most one.
    pub fn total_budget() -> Self {
        Self {
            budget_scope: BudgetScope::Total,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.value_min > 0.0 && self.value_max >= self.value_min && self.value_max.is_finite()) {
            return Err(Error::Config("value grid needs 0 < value_min <= value_max".into()));
        }
        if self.value_points == 0 || self.atoms_per_variable == 0 || self.mass_denominator == 0 {
            return Err(Error::Config(
                "value_points, atoms_per_variable and mass_denominator must be positive".into(),
            ));
        }
        if self.atoms_per_variable > self.value_points {
            return Err(Error::Config("more atoms per variable than grid values".into()));
        }
        if !(self.budget > 0.0 && self.budget <= 1.0) {
            return Err(Error::Config("budget must lie in (0, 1]".into()));
        }
        Ok(())
    }

    fn grid_value(&self, i: usize) -> f64 {
        if self.value_points == 1 {
            return self.value_min;
        }
        let s = i as f64 / (self.value_points - 1) as f64;
        self.value_min * (self.value_max / self.value_min).powf(s)
    }

    fn units(&self) -> usize {
        (self.budget * self.mass_denominator as f64 + 1e-9).floor() as usize
    }

    /// Draws a family of `n` unit-interval laws.
    pub fn generate<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<Vec<DiscreteDistribution>> {
        self.validate()?;
        let counts: Vec<usize> = (0..n)
            .map(|_| rng.gen_range(1..=self.atoms_per_variable))
            .collect();
        let units = self.units();
        let den = self.mass_denominator as f64;
        let masses: Vec<Vec<f64>> = match self.budget_scope {
            BudgetScope::PerVariable => {
                if units < self.atoms_per_variable {
                    return Err(Error::Config("budget too small for the atom count".into()));
                }
                counts.iter().map(|&a| cut_masses(units, a, den, rng)).collect()
            }
            BudgetScope::Total => {
                let needed: usize = counts.iter().sum();
                if units < needed {
                    return Err(Error::Config(format!(
                        "total budget of {units} units cannot hold {needed} atoms"
                    )));
                }
                let all = cut_masses(units, needed, den, rng);
                let mut it = all.into_iter();
                counts.iter().map(|&a| it.by_ref().take(a).collect()).collect()
            }
        };
        counts
            .iter()
            .zip(masses)
            .map(|(&a, ms)| {
                let idx = sample(rng, self.value_points, a);
                let pairs = idx.iter().map(|i| self.grid_value(i)).zip(ms);
                DiscreteDistribution::unit(pairs)
            })
            .collect()
    }
}

/// `parts` positive masses (in units of `1/den`) summing to at most `units`.
fn cut_masses<R: Rng + ?Sized>(units: usize, parts: usize, den: f64, rng: &mut R) -> Vec<f64> {
    let mut cuts: Vec<usize> = sample(rng, units, parts).into_iter().map(|c| c + 1).collect();
    cuts.sort_unstable();
    let mut prev = 0;
    cuts.into_iter()
        .map(|c| {
            let m = (c - prev) as f64 / den;
            prev = c;
            m
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Experiments

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Theorem {
    /// `‖ ‖(f_k)‖_E ‖_X` against `‖μ(f)χ_(0,1)‖_X + ‖(μ(k,f))_{k≥1}‖_E`.
    MainEq,
    /// `‖ ‖(f_k)‖_{ℓ_q} ‖_{L_p}` against `‖f‖_{L_p+L_q}` (p ≤ q) or
    /// `‖f‖_{L_p∩L_q}` (q ≤ p).
    CorollaryPQ,
    /// `∫Φ(‖(f_k)‖_E)` against `∫_0^1 Φ(μ(f)) + Φ(‖(μ(k,f))_{k=1}^n‖_E)`.
    Modular,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Mode {
    #[serde(rename = "exact")]
    Exact,
    #[serde(rename = "monte_carlo")]
    MonteCarlo(u64),
}

impl Mode {
    fn label(&self) -> String {
        match self {
            Mode::Exact => "exact".to_string(),
            Mode::MonteCarlo(t) => format!("monte_carlo:{t}"),
        }
    }
}

fn one() -> usize {
    1
}

/// Experiment description; the JSON form uses these field names verbatim.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub theorem: Theorem,
    pub n: usize,
    #[serde(rename = "X", default, skip_serializing_if = "Option::is_none")]
    pub x: Option<SpaceSpec>,
    #[serde(rename = "Phi", default, skip_serializing_if = "Option::is_none")]
    pub phi: Option<OrliczFunction>,
    #[serde(rename = "E")]
    pub e: SeqSpaceSpec,
    #[serde(default)]
    pub family: FamilySpec,
    pub mode: Mode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Number of independent families drawn.
    #[serde(default = "one")]
    pub instances: usize,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::Config("n must be at least 1".into()));
        }
        if self.instances == 0 {
            return Err(Error::Config("instances must be at least 1".into()));
        }
        if let Mode::MonteCarlo(t) = self.mode {
            if t < MIN_TRIALS {
                return Err(Error::Config(format!(
                    "Monte Carlo mode needs at least {MIN_TRIALS} trials, got {t}"
                )));
            }
        }
        self.family.validate()?;
        self.e.validate().map_err(config_error)?;
        match self.theorem {
            Theorem::MainEq => {
                let x = self
                    .x
                    .as_ref()
                    .ok_or_else(|| Error::Config("MainEq needs X".into()))?;
                x.validate().map_err(config_error)?;
            }
            Theorem::CorollaryPQ => {
                self.pq()?;
            }
            Theorem::Modular => {
                if self.phi.is_none() {
                    return Err(Error::Config("Modular needs Phi".into()));
                }
            }
        }
        Ok(())
    }

    fn pq(&self) -> Result<(f64, f64)> {
        match (&self.x, self.e) {
            (Some(SpaceSpec::Lp(p)), SeqSpaceSpec::EllQ(q)) if *p > 0.0 => Ok((*p, q)),
            _ => Err(Error::Config("CorollaryPQ needs X = Lp(p) and E = ellq(q)".into())),
        }
    }

    fn x_label(&self) -> String {
        match (&self.x, &self.phi) {
            (Some(x), _) if self.theorem != Theorem::Modular => x.label(),
            (_, Some(phi)) => format!("Phi[{}]", phi.label()),
            _ => String::new(),
        }
    }
}

fn config_error(e: Error) -> Error {
    match e {
        Error::InvalidArgument(m) => Error::Config(m),
        other => other,
    }
}

/// One instance of an experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioRow {
    pub theorem: String,
    pub n: usize,
    #[serde(rename = "X")]
    pub x: String,
    #[serde(rename = "E")]
    pub e: String,
    pub mode: String,
    pub seed: u64,
    pub trial: u64,
    pub lhs: f64,
    pub rhs: f64,
    pub ratio: f64,
    pub stderr: f64,
    pub degenerate: bool,
}

/// Configuration echo plus one row per instance.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RatioReport {
    pub config: ExperimentConfig,
    pub seed: u64,
    pub rows: Vec<RatioRow>,
}

impl RatioReport {
    /// `(min, max)` ratio over the rows.
    pub fn ratio_range(&self) -> (f64, f64) {
        self.rows.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), r| {
            (lo.min(r.ratio), hi.max(r.ratio))
        })
    }
}

/// Runs the experiment with the configured seed (or [`DEFAULT_SEED`]).
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RatioReport> {
    run_experiment_with_seed(cfg, cfg.seed.unwrap_or(DEFAULT_SEED))
}

pub fn run_experiment_with_seed(cfg: &ExperimentConfig, seed: u64) -> Result<RatioReport> {
    cfg.validate()?;
    let rows = (0..cfg.instances as u64)
        .into_par_iter()
        .map(|i| run_instance(cfg, seed, i))
        .collect::<Result<Vec<_>>>()?;
    Ok(RatioReport {
        config: cfg.clone(),
        seed,
        rows,
    })
}

/// The family used by instance `index` of an experiment.
pub fn instance_family(cfg: &ExperimentConfig, seed: u64, index: u64) -> Result<Vec<DiscreteDistribution>> {
    let family_seed = cfg.family.seed.unwrap_or(seed);
    cfg.family
        .generate(cfg.n, &mut substream(family_seed, PURPOSE_FAMILY, index))
}

fn run_instance(cfg: &ExperimentConfig, seed: u64, index: u64) -> Result<RatioRow> {
    let fs = instance_family(cfg, seed, index)?;
    let (lhs, stderr) = match cfg.mode {
        Mode::Exact => (exact_lhs(cfg, &fs)?, 0.0),
        Mode::MonteCarlo(trials) => {
            monte_carlo_lhs(cfg, &fs, trials, &mut substream(seed, PURPOSE_TRIALS, index))?
        }
    };
    let rhs = experiment_rhs(cfg, &fs)?;
    let (ratio, degenerate) = if rhs > 0.0 {
        (lhs / rhs, false)
    } else if lhs == 0.0 {
        (1.0, true)
    } else {
        return Err(Error::InconsistentZeroRhs { trial: index, lhs });
    };
    Ok(RatioRow {
        theorem: format!("{:?}", cfg.theorem),
        n: cfg.n,
        x: cfg.x_label(),
        e: cfg.e.label(),
        mode: cfg.mode.label(),
        seed,
        trial: index,
        lhs,
        rhs,
        ratio,
        stderr,
        degenerate,
    })
}

/// Left side evaluated by exact product enumeration.
pub fn exact_lhs(cfg: &ExperimentConfig, fs: &[DiscreteDistribution]) -> Result<f64> {
    match cfg.theorem {
        Theorem::MainEq => mixed_norm_exact(cfg.x.as_ref().expect("validated"), &cfg.e, fs),
        Theorem::CorollaryPQ => {
            let (p, q) = cfg.pq()?;
            mixed_norm_exact(&SpaceSpec::Lp(p), &SeqSpaceSpec::EllQ(q), fs)
        }
        Theorem::Modular => mixed_modular_exact(cfg.phi.as_ref().expect("validated"), &cfg.e, fs),
    }
}

/// Right side, always exact.
pub fn experiment_rhs(cfg: &ExperimentConfig, fs: &[DiscreteDistribution]) -> Result<f64> {
    let f = disjoint_sum(fs)?;
    match cfg.theorem {
        Theorem::MainEq => rhs_theorem_main(cfg.x.as_ref().expect("validated"), &cfg.e, &f, cfg.n),
        Theorem::CorollaryPQ => {
            let (p, q) = cfg.pq()?;
            let x = if p <= q {
                SpaceSpec::LpPlusLq(p, q)
            } else {
                SpaceSpec::LpCapLq(p, q)
            };
            function_quasinorm(&x, &f)
        }
        Theorem::Modular => rhs_modular(cfg.phi.as_ref().expect("validated"), &cfg.e, &f, cfg.n),
    }
}

/// Left side estimated from `trials` joint draws, with its standard error.
///
/// `L_p` norms use `(mean y^p)^{1/p}` with a delta-method error, modulars use
/// the sample mean, and every other space evaluates its quasi-norm on the
/// empirical law with a batch-means error.
pub fn monte_carlo_lhs<R: Rng + ?Sized>(
    cfg: &ExperimentConfig,
    fs: &[DiscreteDistribution],
    trials: u64,
    rng: &mut R,
) -> Result<(f64, f64)> {
    let e = cfg.e;
    let mut buf = Vec::with_capacity(fs.len());
    let mut scratch = Vec::new();
    let ys: Vec<f64> = (0..trials)
        .map(|_| {
            sample_into(fs, rng, &mut buf);
            e.norm_of(&buf, &mut scratch)
        })
        .collect();
    let x = match cfg.theorem {
        Theorem::Modular => {
            let phi = cfg.phi.as_ref().expect("validated");
            let vals: Vec<f64> = ys.iter().map(|&y| phi.eval(y)).collect();
            return Ok(mean_and_stderr(&vals));
        }
        Theorem::CorollaryPQ => SpaceSpec::Lp(cfg.pq()?.0),
        Theorem::MainEq => cfg.x.clone().expect("validated"),
    };
    if let SpaceSpec::Lp(p) = x {
        let top = ys.iter().copied().fold(0.0, f64::max);
        if top == 0.0 {
            return Ok((0.0, 0.0));
        }
        // scaled by the largest draw to keep y^p in range
        let vals: Vec<f64> = ys.iter().map(|&y| (y / top).powf(p)).collect();
        let (m, se) = mean_and_stderr(&vals);
        let est = top * m.powf(1.0 / p);
        return Ok((est, est / (p * m) * se));
    }
    let norm_of = |chunk: &[f64]| -> Result<f64> {
        let w = 1.0 / chunk.len() as f64;
        let law = DiscreteDistribution::unit(chunk.iter().map(|&y| (y, w)))?;
        function_quasinorm(&x, &law)
    };
    let est = norm_of(&ys)?;
    let size = ys.len() / BATCHES;
    let batch: Vec<f64> = ys
        .chunks_exact(size)
        .take(BATCHES)
        .map(norm_of)
        .collect::<Result<_>>()?;
    let (_, se) = mean_and_stderr(&batch);
    Ok((est, se))
}

fn mean_and_stderr(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (mean, 0.0);
    }
    let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

// ---------------------------------------------------------------------------
// CSV

fn csv_error(path: &Path) -> impl Fn(csv::Error) -> Error + '_ {
    move |source| Error::Csv {
        path: path.to_path_buf(),
        source,
    }
}

/// Writes every row of every report to `path`, header included.
pub fn corpus_csv(reports: &[RatioReport], path: &Path) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_path(path)
        .map_err(csv_error(path))?;
    w.write_record([
        "theorem", "n", "X", "E", "mode", "seed", "trial", "lhs", "rhs", "ratio", "stderr",
        "degenerate",
    ])
    .map_err(csv_error(path))?;
    for row in reports.iter().flat_map(|r| &r.rows) {
        w.serialize(row).map_err(csv_error(path))?;
    }
    w.flush().map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Reads back a file written by [`corpus_csv`].
pub fn read_corpus_csv(path: &Path) -> Result<Vec<RatioRow>> {
    let mut r = csv::Reader::from_path(path).map_err(csv_error(path))?;
    r.deserialize().map(|row| row.map_err(csv_error(path))).collect()
}

/// Writes `value` as pretty JSON followed by a newline.
pub fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let io = |source| Error::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut file = File::create(path).map_err(io)?;
    serde_json::to_writer_pretty(&mut file, value)?;
    writeln!(file).map_err(io)
}

// ---------------------------------------------------------------------------
// Exact-constant suite

/// The one-sided inequalities with explicit constants.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Check {
    /// `μ(⊕g_k) ≤ σ₂ μ(max g_k)` when the supports have total measure ≤ 1.
    MaxDilation,
    /// `μ(Σ f_k) ≤ 3σ₃ μ(K(⊕f_k))` when the supports have total measure ≤ 1.
    KruglovDomination,
    /// `∫‖(f_k)‖_E^p ≤ Σ_l ‖(a_{l_k})‖_E^p Π P[k][l_k]`.
    Step2Upper,
    /// `μ((a_{l_k})_k) ≤ σ_{C(l)} a` for every map `l`.
    Step3Domination,
    /// Order-statistic event probability `> 1/10`.
    EtaEvent,
    /// `∫Φ(‖(f_k)‖_E) ≥ ½ ∫_0^1 Φ(μ(f))`.
    HeadLower,
    /// `∫Φ(‖(f_k)‖_E) ≥ (1/10)·Φ(‖(μ(4k−3, f))_k‖_E)`.
    TailLower,
    /// `∫Ψ(Kf) ≤ (Σ_m m^{c_Ψ+1}/(e·m!))·∫Ψ(f)`.
    KruglovModular,
    /// `K χ_(0,1)` is Poisson(1) up to `1e−12` on `n ≤ 15`.
    PoissonIdentity,
    /// `d_{⊕f_k}(s) = Σ_k d_{f_k}(s)`.
    Disjointification,
    /// `‖ ‖(f_k)‖_{ℓ_p} ‖_{L_p} = ‖⊕f_k‖_{L_p}`.
    FubiniAnchor,
    /// `ψ(1) = 1`.
    PsiNormalization,
    /// For `Φ(t) = t²`, `E = ℓ_2`: `LHS ≤ RHS ≤ 2·LHS`.
    ModularSandwich,
}

impl Check {
    pub const EXACT_CONSTANTS: [Check; 8] = [
        Check::MaxDilation,
        Check::KruglovDomination,
        Check::Step2Upper,
        Check::Step3Domination,
        Check::EtaEvent,
        Check::HeadLower,
        Check::TailLower,
        Check::KruglovModular,
    ];

    pub const IDENTITIES: [Check; 5] = [
        Check::PoissonIdentity,
        Check::Disjointification,
        Check::FubiniAnchor,
        Check::PsiNormalization,
        Check::ModularSandwich,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Check::MaxDilation => "max_dilation",
            Check::KruglovDomination => "kruglov_domination",
            Check::Step2Upper => "step2_upper",
            Check::Step3Domination => "step3_domination",
            Check::EtaEvent => "eta_event",
            Check::HeadLower => "head_lower",
            Check::TailLower => "tail_lower",
            Check::KruglovModular => "kruglov_modular",
            Check::PoissonIdentity => "poisson_identity",
            Check::Disjointification => "disjointification",
            Check::FubiniAnchor => "fubini_anchor",
            Check::PsiNormalization => "psi_normalization",
            Check::ModularSandwich => "modular_sandwich",
        }
    }

    /// Largest family size used for this check.
    pub fn max_n(&self) -> usize {
        match self {
            Check::KruglovDomination => 5,
            Check::Step2Upper => 4,
            Check::MaxDilation | Check::Step3Domination | Check::HeadLower => 6,
            Check::EtaEvent | Check::TailLower | Check::Disjointification => 8,
            Check::FubiniAnchor => 8,
            Check::ModularSandwich => 10,
            Check::KruglovModular | Check::PoissonIdentity | Check::PsiNormalization => 1,
        }
    }

    /// Checks that do not depend on random input run on instance 0 only.
    fn is_fixed(&self) -> bool {
        matches!(self, Check::PoissonIdentity | Check::PsiNormalization)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteRow {
    pub check: Check,
    pub instance: u64,
    pub n: usize,
    pub lhs: f64,
    pub rhs: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuiteReport {
    pub seed: u64,
    pub instances: u64,
    pub rows: Vec<SuiteRow>,
}

impl SuiteReport {
    pub fn all_pass(&self) -> bool {
        self.rows.iter().all(|r| r.pass)
    }

    /// `(check, rows, failures)` for every check present, in suite order.
    pub fn summary(&self) -> Vec<(Check, usize, usize)> {
        Check::EXACT_CONSTANTS
            .iter()
            .chain(&Check::IDENTITIES)
            .filter_map(|&c| {
                let rows: Vec<&SuiteRow> = self.rows.iter().filter(|r| r.check == c).collect();
                (!rows.is_empty()).then(|| (c, rows.len(), rows.iter().filter(|r| !r.pass).count()))
            })
            .collect()
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(csv_error(path))?;
        for row in &self.rows {
            w.serialize(row).map_err(csv_error(path))?;
        }
        w.flush().map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })
    }
}

/// Number of instances of the standard corpus.
pub const SUITE_INSTANCES: u64 = 500;

/// Which group of checks `verify` runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Suite {
    ExactConstants,
    Identities,
    All,
}

impl Suite {
    pub fn checks(&self) -> Vec<Check> {
        match self {
            Suite::ExactConstants => Check::EXACT_CONSTANTS.to_vec(),
            Suite::Identities => Check::IDENTITIES.to_vec(),
            Suite::All => Check::EXACT_CONSTANTS
                .iter()
                .chain(&Check::IDENTITIES)
                .copied()
                .collect(),
        }
    }
}

/// Runs every exact-constant check on [`SUITE_INSTANCES`] seeded instances.
pub fn run_exact_constant_suite(seed: u64) -> Result<SuiteReport> {
    run_suite(Suite::ExactConstants, seed, SUITE_INSTANCES)
}

/// Runs the checks of `suite` on `instances` seeded instances. Instance `i`
/// draws its inputs from its own stream, so rows do not depend on threading.
pub fn run_suite(suite: Suite, seed: u64, instances: u64) -> Result<SuiteReport> {
    let checks = suite.checks();
    let rows: Vec<Vec<SuiteRow>> = (0..instances)
        .into_par_iter()
        .map(|i| {
            let mut out = Vec::with_capacity(checks.len());
            for &c in &checks {
                if c.is_fixed() && i > 0 {
                    continue;
                }
                // each check gets its own stream so suites can be mixed freely
                let mut rng = substream(seed ^ splitmix64(c as u64 + 101), PURPOSE_SUITE, i);
                out.push(run_check(c, i, &mut rng)?);
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;
    Ok(SuiteReport {
        seed,
        instances,
        rows: rows.into_iter().flatten().collect(),
    })
}

fn random_seq_space<R: Rng + ?Sized>(rng: &mut R) -> SeqSpaceSpec {
    match rng.gen_range(0..5) {
        0 => SeqSpaceSpec::EllQ(0.5),
        1 => SeqSpaceSpec::EllQ(1.0),
        2 => SeqSpaceSpec::EllQ(2.0),
        3 => SeqSpaceSpec::EllInfty,
        _ => SeqSpaceSpec::WeakEll1,
    }
}

fn random_orlicz<R: Rng + ?Sized>(rng: &mut R) -> Result<OrliczFunction> {
    let kind = match rng.gen_range(0..4) {
        0 => OrliczKind::Power(1.0),
        1 => OrliczKind::Power(2.0),
        2 => OrliczKind::Power(3.0),
        _ => OrliczKind::PowerLog(1.5, 1.0),
    };
    OrliczFunction::new(kind)
}

fn run_check<R: Rng + ?Sized>(check: Check, instance: u64, rng: &mut R) -> Result<SuiteRow> {
    let n = rng.gen_range(1..=check.max_n());
    let spec = match check {
        Check::MaxDilation | Check::KruglovDomination => FamilySpec::total_budget(),
        _ => FamilySpec::default(),
    };
    let fs = spec.generate(n, rng)?;
    let row = |lhs: f64, rhs: f64, pass: bool| SuiteRow {
        check,
        instance,
        n,
        lhs,
        rhs,
        pass,
    };
    let lower = |lhs: f64, rhs: f64| lhs >= rhs * (1.0 - TAU_VAL) - TAU_VAL;
    Ok(match check {
        Check::MaxDilation => {
            let g = disjoint_sum(&fs)?;
            let d = rearrangement_domination(&g, &max_of_independent(&fs)?, 1.0, 2.0, 1.0)?;
            row(d.lhs, d.rhs, d.holds)
        }
        Check::KruglovDomination => {
            let d = kruglov_domination_check(&fs)?;
            row(d.lhs, d.rhs, d.holds)
        }
        Check::Step2Upper => {
            let e = random_seq_space(rng);
            let p = [1.0, 2.0, 4.0][rng.gen_range(0..3)];
            let s = step2_upper_check(&fs, &e, p)?;
            row(s.lhs, s.rhs, s.holds())
        }
        Check::Step3Domination => {
            let levels = disjoint_sum(&fs)?.rearrangement_sequence(n);
            let (failures, total) = step3_all_maps_on_levels(n, &levels)?;
            row(failures as f64, total as f64, failures == 0)
        }
        Check::EtaEvent => {
            let prob = eta_event_probability(&build_level_matrix(&fs)?)?;
            row(prob, 0.1, prob > 0.1)
        }
        Check::HeadLower => {
            let e = random_seq_space(rng);
            let phi = random_orlicz(rng)?;
            let lhs = mixed_modular_exact(&phi, &e, &fs)?;
            let rhs = 0.5 * orlicz_modular(&phi, &disjoint_sum(&fs)?.restrict_to_unit());
            row(lhs, rhs, lower(lhs, rhs))
        }
        Check::TailLower => {
            let e = random_seq_space(rng);
            let phi = random_orlicz(rng)?;
            let x = disjoint_sum(&fs)?.rearrangement_sequence(n);
            let picked: Vec<f64> = (1..=eta_event_length(n))
                .map(|k| x.entries()[4 * k - 3])
                .collect();
            let lhs = mixed_modular_exact(&phi, &e, &fs)?;
            let rhs = 0.1 * phi.eval(sequence_quasinorm(&e, &NonnegSequence::new(picked)?));
            row(lhs, rhs, lower(lhs, rhs))
        }
        Check::KruglovModular => {
            let phi = random_orlicz(rng)?;
            let b = kruglov_modular_bound_check(&phi, &fs[0])?;
            row(b.lhs, b.rhs, b.holds())
        }
        Check::PoissonIdentity => {
            let k = kruglov_distribution(&DiscreteDistribution::indicator(), DEFAULT_TRUNCATION)?;
            let w = poisson_weights(15);
            let worst = (0..=15)
                .map(|m| {
                    let mass: f64 = k
                        .law
                        .atoms()
                        .iter()
                        .filter(|a| a.value == m as f64)
                        .map(|a| a.mass)
                        .sum();
                    (mass - w[m]).abs()
                })
                .fold(0.0, f64::max);
            row(worst, 1e-12, worst < 1e-12)
        }
        Check::Disjointification => {
            let g = disjoint_sum(&fs)?;
            let top = g.max_value();
            let mut worst: f64 = 0.0;
            let points = (0..100)
                .map(|_| rng.gen::<f64>() * 1.1 * top)
                .chain(g.atoms().iter().map(|a| a.value));
            for s in points {
                let mut parts = 0.0;
                for f in &fs {
                    parts += f.distribution_function(s)?;
                }
                worst = worst.max((g.distribution_function(s)? - parts).abs());
            }
            row(worst, 0.0, worst <= TAU_VAL)
        }
        Check::FubiniAnchor => {
            let p = [0.5, 1.0, 2.0, 4.0][rng.gen_range(0..4)];
            let lhs = mixed_norm_exact(&SpaceSpec::Lp(p), &SeqSpaceSpec::EllQ(p), &fs)?;
            let rhs = lp_norm(&disjoint_sum(&fs)?, p);
            row(lhs, rhs, (lhs - rhs).abs() <= FUBINI_TOLERANCE * rhs.max(1.0))
        }
        Check::PsiNormalization => {
            let psi = psi_table(DEFAULT_TRUNCATION, 0)?;
            let v = psi.eval(1.0);
            row(v, 1.0, (v - 1.0).abs() <= 1e-10 && psi.is_concave_nondecreasing(1e-9))
        }
        Check::ModularSandwich => {
            let phi = OrliczFunction::power(2.0)?;
            let e = SeqSpaceSpec::EllQ(2.0);
            let lhs = mixed_modular_exact(&phi, &e, &fs)?;
            let rhs = rhs_modular(&phi, &e, &disjoint_sum(&fs)?, n)?;
            let tol = 1e-9 * lhs.max(1.0);
            row(lhs, rhs, rhs >= lhs - tol && rhs <= 2.0 * lhs + tol)
        }
    })
}

/// Value-form step-3 domination on all `n^n` maps; returns `(failures, maps)`.
fn step3_all_maps_on_levels(n: usize, levels: &NonnegSequence) -> Result<(u64, u64)> {
    let total = (n as u64).pow(n as u32);
    let mut l = vec![0usize; n];
    let mut failures = 0;
    for mut code in 0..total {
        for slot in l.iter_mut() {
            *slot = (code % n as u64) as usize;
            code /= n as u64;
        }
        if !step3_domination_values(&l, levels)? {
            failures += 1;
        }
    }
    Ok((failures, total))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::Ambient;

    fn unit(atoms: &[(f64, f64)]) -> DiscreteDistribution {
        DiscreteDistribution::unit(atoms.iter().copied()).unwrap()
    }

    #[test]
    fn substreams_are_reproducible_and_distinct() {
        let a: Vec<u64> = (0..4).map(|_| substream(7, 1, 3).gen()).collect();
        let b: u64 = substream(7, 1, 3).gen();
        assert_eq!(a[0], b);
        let c: u64 = substream(7, 1, 4).gen();
        let d: u64 = substream(7, 2, 3).gen();
        assert_ne!(b, c);
        assert_ne!(b, d);
    }

    #[test]
    fn sampling_degenerate_and_bernoulli_marginals() {
        let mut rng = substream(1, 9, 0);
        let consts = [unit(&[(2.0, 1.0)]), unit(&[(0.5, 1.0)])];
        assert_eq!(sample_independent(&consts, &mut rng), vec![2.0, 0.5]);

        let fs = [unit(&[(1.0, 0.5)]), unit(&[(1.0, 0.5)])];
        let n = 100_000;
        let (mut s0, mut s1, mut s01) = (0.0, 0.0, 0.0);
        for _ in 0..n {
            let v = sample_independent(&fs, &mut rng);
            s0 += v[0];
            s1 += v[1];
            s01 += v[0] * v[1];
        }
        let (m0, m1) = (s0 / n as f64, s1 / n as f64);
        assert!((m0 - 0.5).abs() < 0.02);
        let cov = s01 / n as f64 - m0 * m1;
        // sd of the covariance estimate is about 0.25/√n
        assert!(cov.abs() < 3.0 * 0.25 / (n as f64).sqrt() + 1e-3, "{cov}");
    }

    #[test]
    fn generated_families_respect_budgets() {
        let mut rng = substream(3, 1, 0);
        for _ in 0..200 {
            let fs = FamilySpec::total_budget().generate(5, &mut rng).unwrap();
            let s: f64 = fs.iter().map(|f| f.support_mass()).sum();
            assert!(s <= 1.0);
            let fs = FamilySpec::default().generate(5, &mut rng).unwrap();
            assert!(fs.iter().all(|f| f.total_mass() <= 1.0 && !f.is_zero()));
            assert!(fs.iter().all(|f| f.atoms().len() <= 2));
        }
    }

    fn modular_cfg(n: usize, mode: Mode, instances: usize) -> ExperimentConfig {
        ExperimentConfig {
            theorem: Theorem::Modular,
            n,
            x: None,
            phi: Some(OrliczFunction::power(2.0).unwrap()),
            e: SeqSpaceSpec::EllQ(2.0),
            family: FamilySpec::default(),
            mode,
            seed: Some(5),
            instances,
        }
    }

    #[test]
    fn modular_sandwich_in_exact_mode() {
        let report = run_experiment(&modular_cfg(4, Mode::Exact, 30)).unwrap();
        for r in &report.rows {
            assert!(r.ratio >= 0.5 - 1e-9 && r.ratio <= 1.0 + 1e-9, "{r:?}");
        }
    }

    #[test]
    fn single_variable_has_ratio_one() {
        for x in [SpaceSpec::Lp(2.0), SpaceSpec::LpCapLq(3.0, 1.0)] {
            let cfg = ExperimentConfig {
                theorem: Theorem::MainEq,
                n: 1,
                x: Some(x),
                phi: None,
                e: SeqSpaceSpec::WeakEll1,
                family: FamilySpec::default(),
                mode: Mode::Exact,
                seed: None,
                instances: 10,
            };
            for r in run_experiment(&cfg).unwrap().rows {
                assert!((r.ratio - 1.0).abs() < 1e-12, "{r:?}");
            }
        }
    }

    #[test]
    fn degenerate_rows_are_flagged() {
        let cfg = modular_cfg(2, Mode::Exact, 1);
        let zeros = vec![DiscreteDistribution::zero(Ambient::UnitInterval); 2];
        assert_eq!(exact_lhs(&cfg, &zeros).unwrap(), 0.0);
        assert_eq!(experiment_rhs(&cfg, &zeros).unwrap(), 0.0);
    }

    #[test]
    fn runs_are_deterministic() {
        let cfg = modular_cfg(6, Mode::MonteCarlo(2000), 8);
        let a = run_experiment(&cfg).unwrap();
        let b = run_experiment(&cfg).unwrap();
        assert_eq!(a, b);
        let c = run_experiment_with_seed(&cfg, 6).unwrap();
        assert_ne!(a.rows, c.rows);
    }

    #[test]
    fn config_json_round_trip_and_validation() {
        let text = r#"{
            "theorem": "CorollaryPQ", "n": 8, "X": {"Lp": 2.0}, "E": {"ellq": 1.0},
            "mode": {"monte_carlo": 10000}, "seed": 3, "instances": 4
        }"#;
        let cfg = ExperimentConfig::from_json(text).unwrap();
        assert_eq!(cfg.mode, Mode::MonteCarlo(10000));
        let back = ExperimentConfig::from_json(&serde_json::to_string(&cfg).unwrap()).unwrap();
        assert_eq!(cfg, back);

        let bad = [
            r#"{"theorem":"MainEq","n":2,"E":"ellinfty","mode":"exact"}"#,
            r#"{"theorem":"Modular","n":2,"E":"ellinfty","mode":"exact"}"#,
            r#"{"theorem":"CorollaryPQ","n":2,"X":{"Lp":1.0},"E":"weak_ell1","mode":"exact"}"#,
            r#"{"theorem":"MainEq","n":2,"X":{"Lp":1.0},"E":"ellinfty","mode":{"monte_carlo":10}}"#,
            r#"{"theorem":"MainEq","n":0,"X":{"Lp":1.0},"E":"ellinfty","mode":"exact"}"#,
            r#"{"theorem":"MainEq","n":2,"X":{"Lp":1.0},"E":"ellinfty","mode":"exact","bogus":1}"#,
        ];
        for b in bad {
            assert!(matches!(ExperimentConfig::from_json(b), Err(Error::Config(_))), "{b}");
        }
    }

    #[test]
    fn exact_mode_hits_the_cap() {
        let mut cfg = modular_cfg(24, Mode::Exact, 1);
        cfg.family.atoms_per_variable = 4;
        cfg.family.budget_scope = BudgetScope::PerVariable;
        let err = run_experiment(&cfg).unwrap_err();
        assert!(matches!(err, Error::Capacity { .. }), "{err}");
    }

    #[test]
    fn max_dilation_example() {
        let f = unit(&[(1.0, 0.4)]);
        let fs = [f.clone(), f];
        let g = disjoint_sum(&fs).unwrap();
        let m = max_of_independent(&fs).unwrap();
        assert!((m.distribution_function(0.5).unwrap() - 0.64).abs() < 1e-15);
        assert!(rearrangement_domination(&g, &m, 1.0, 2.0, 1.0).unwrap().holds);
    }

    #[test]
    fn small_suite_passes() {
        let report = run_suite(Suite::All, 7, 20).unwrap();
        assert_eq!(report.rows.len(), 20 * 11 + 2);
        let failing: Vec<&SuiteRow> = report.rows.iter().filter(|r| !r.pass).collect();
        assert!(failing.is_empty(), "{failing:?}");
    }
}
