use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use rearrkit::combinatorics::{junge_profile, junge_statistic, DoublyStochastic};
use rearrkit::harness::{
    corpus_csv, run_experiment_with_seed, run_suite, write_json, ExperimentConfig, Suite,
    DEFAULT_SEED, SUITE_INSTANCES,
};
use rearrkit::kruglov::{kruglov_distribution, psi_asymptotics, psi_table};
use rearrkit::{DiscreteDistribution, Error};

#[derive(Parser)]
#[command(name = "rearrkit", version, about = "Rearrangement-invariant norms of independent random variables")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Clone, Copy, ValueEnum)]
enum SuiteArg {
    ExactConstants,
    Identities,
    All,
}

#[derive(Clone, Copy, ValueEnum)]
enum MatrixArg {
    Uniform,
    Perm,
    Random,
}

#[derive(Subcommand)]
enum Command {
    /// Run a verification suite; exits 1 if any row fails.
    Verify {
        #[arg(long, value_enum, default_value = "exact-constants")]
        suite: SuiteArg,
        #[arg(long, env = "REARRKIT_SEED")]
        seed: Option<u64>,
        #[arg(long, default_value_t = SUITE_INSTANCES)]
        instances: u64,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "csv")]
        format: Format,
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Run an experiment described by a JSON configuration.
    Experiment {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, env = "REARRKIT_SEED")]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "csv")]
        format: Format,
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Print the law of the Kruglov transform.
    Kruglov {
        /// Use the indicator of (0,1).
        #[arg(long, conflicts_with = "dist", required_unless_present = "dist")]
        indicator: bool,
        /// A law as inline JSON or a path to a JSON file.
        #[arg(long)]
        dist: Option<String>,
        /// Truncation of the Poisson mixture.
        #[arg(long, default_value_t = 17)]
        n: usize,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "csv")]
        format: Format,
    },
    /// Evaluate the Junge statistic of a doubly stochastic matrix.
    Junge {
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 1.0)]
        p: f64,
        #[arg(long, value_enum, default_value = "uniform")]
        matrix: MatrixArg,
        #[arg(long, env = "REARRKIT_SEED")]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "csv")]
        format: Format,
    },
    /// Tabulate ψ(t) = ∫_0^t μ(s, Kχ_(0,1)) ds.
    Psi {
        /// Truncation of the Poisson law.
        #[arg(long, default_value_t = 17)]
        n: usize,
        /// Extra log-spaced knots between the jumps.
        #[arg(long, default_value_t = 0)]
        knots: usize,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "csv")]
        format: Format,
    },
}

/// Failure of a verified property (exit 1) versus a usage problem (exit 2).
enum Failure {
    Violated(String),
    Usage(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::InconsistentZeroRhs { .. } => Failure::Violated(e.to_string()),
            other => Failure::Usage(other.to_string()),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Violated(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

fn set_threads(threads: Option<usize>) -> Result<(), Failure> {
    if let Some(t) = threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| Failure::Usage(e.to_string()))?;
    }
    Ok(())
}

/// Writes `rows` as CSV (with header) or JSON to `path`, or to stdout.
fn emit<T: Serialize>(rows: &[T], format: Format, path: Option<&Path>) -> Result<(), Failure> {
    match (format, path) {
        (Format::Json, Some(p)) => write_json(&rows, p)?,
        (Format::Json, None) => {
            println!("{}", serde_json::to_string_pretty(rows).map_err(Error::from)?)
        }
        (Format::Csv, Some(p)) => {
            let mut w = csv::Writer::from_path(p).map_err(|source| Error::Csv {
                path: p.to_path_buf(),
                source,
            })?;
            for r in rows {
                w.serialize(r).map_err(|source| Error::Csv {
                    path: p.to_path_buf(),
                    source,
                })?;
            }
            w.flush().map_err(|source| Error::Io {
                path: p.to_path_buf(),
                source,
            })?;
        }
        (Format::Csv, None) => {
            let mut w = csv::Writer::from_writer(std::io::stdout());
            for r in rows {
                w.serialize(r)
                    .map_err(|e| Failure::Usage(e.to_string()))?;
            }
            w.flush().map_err(|e| Failure::Usage(e.to_string()))?;
        }
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Verify {
            suite,
            seed,
            instances,
            out,
            format,
            threads,
        } => {
            set_threads(threads)?;
            let suite = match suite {
                SuiteArg::ExactConstants => Suite::ExactConstants,
                SuiteArg::Identities => Suite::Identities,
                SuiteArg::All => Suite::All,
            };
            let seed = seed.unwrap_or(DEFAULT_SEED);
            let report = run_suite(suite, seed, instances)?;
            println!("suite {suite:?}, seed {seed}, {instances} instances");
            for (check, rows, failures) in report.summary() {
                let status = if failures == 0 { "PASS" } else { "FAIL" };
                println!("  {status} {:<20} rows {rows:>5}  failures {failures}", check.name());
            }
            match (format, &out) {
                (Format::Json, Some(p)) => write_json(&report, p)?,
                (Format::Csv, Some(p)) => report.write_csv(p)?,
                _ => {}
            }
            if report.all_pass() {
                println!("all checks passed");
                Ok(())
            } else {
                Err(Failure::Violated("some checks failed".into()))
            }
        }
        Command::Experiment {
            config,
            seed,
            out,
            format,
            threads,
        } => {
            set_threads(threads)?;
            let text = std::fs::read_to_string(&config).map_err(|source| Error::Io {
                path: config.clone(),
                source,
            })?;
            let cfg = ExperimentConfig::from_json(&text)?;
            let seed = seed.or(cfg.seed).unwrap_or(DEFAULT_SEED);
            let report = run_experiment_with_seed(&cfg, seed)?;
            let (lo, hi) = report.ratio_range();
            let degenerate = report.rows.iter().filter(|r| r.degenerate).count();
            println!(
                "{:?} n={} seed={seed}: {} rows, ratio in [{lo:.6}, {hi:.6}], band {:.4}, {degenerate} degenerate",
                cfg.theorem,
                cfg.n,
                report.rows.len(),
                hi / lo
            );
            match (format, &out) {
                (Format::Json, Some(p)) => write_json(&report, p)?,
                (Format::Csv, Some(p)) => corpus_csv(std::slice::from_ref(&report), p)?,
                _ => {}
            }
            Ok(())
        }
        Command::Kruglov {
            indicator,
            dist,
            n,
            out,
            format,
        } => {
            let f = if indicator {
                DiscreteDistribution::indicator()
            } else {
                let arg = dist.expect("required by clap");
                let text = if arg.trim_start().starts_with('{') {
                    arg
                } else {
                    std::fs::read_to_string(&arg).map_err(|source| Error::Io {
                        path: PathBuf::from(&arg),
                        source,
                    })?
                };
                serde_json::from_str(&text).map_err(|e| Error::Config(e.to_string()))?
            };
            let k = kruglov_distribution(&f, n)?;
            let zero: f64 = k
                .law
                .atoms()
                .iter()
                .filter(|a| a.value == 0.0)
                .map(|a| a.mass)
                .sum();
            println!(
                "# P(K=0)={zero:.6}  atoms={}  tail_mass_bound={:e}",
                k.law.atoms().len(),
                k.tail_mass_bound
            );
            #[derive(Serialize)]
            struct Row {
                value: f64,
                mass: f64,
            }
            let mut rows: Vec<Row> = k
                .law
                .atoms()
                .iter()
                .map(|a| Row {
                    value: a.value,
                    mass: a.mass,
                })
                .collect();
            rows.reverse();
            emit(&rows, format, out.as_deref())
        }
        Command::Junge {
            n,
            p,
            matrix,
            seed,
            out,
            format,
        } => {
            let seed = seed.unwrap_or(DEFAULT_SEED);
            let m = match matrix {
                MatrixArg::Uniform => DoublyStochastic::uniform(n)?,
                MatrixArg::Perm => {
                    let mut perm: Vec<usize> = (0..n).collect();
                    let mut rng = ChaCha8Rng::seed_from_u64(seed);
                    rand::seq::SliceRandom::shuffle(perm.as_mut_slice(), &mut rng);
                    DoublyStochastic::permutation(&perm)?
                }
                MatrixArg::Random => {
                    DoublyStochastic::random(n, n.max(2), &mut ChaCha8Rng::seed_from_u64(seed))?
                }
            };
            let stat = junge_statistic(&m, p)?;
            let profile = junge_profile(p);
            println!("statistic={stat}  p/(1+ln p)={profile}  c0={}", stat / profile);
            #[derive(Serialize)]
            struct Row {
                n: usize,
                p: f64,
                statistic: f64,
                profile: f64,
                c0: f64,
            }
            let rows = [Row {
                n,
                p,
                statistic: stat,
                profile,
                c0: stat / profile,
            }];
            match out {
                Some(path) => emit(&rows, format, Some(&path)),
                None => Ok(()),
            }
        }
        Command::Psi {
            n,
            knots,
            out,
            format,
        } => {
            let psi = psi_table(n, knots)?;
            let ts: Vec<f64> = (3..=8).map(|k| 10f64.powi(-k)).collect();
            println!("# psi(1)={}  knots={}", psi.eval(1.0), psi.knots().len());
            for a in psi_asymptotics(&psi, &ts) {
                println!(
                    "# t={:e}  psi={:e}  ratio to t*ln(1/t)/ln(e*ln(1/t)) = {:.4}",
                    a.t, a.psi, a.ratio_inverse
                );
            }
            #[derive(Serialize)]
            struct Row {
                t: f64,
                psi: f64,
            }
            let rows: Vec<Row> = psi
                .knots()
                .iter()
                .map(|&(t, psi)| Row { t, psi })
                .collect();
            emit(&rows, format, out.as_deref())
        }
    }
}
