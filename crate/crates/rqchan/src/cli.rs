//! Command-line front end: one subcommand per experiment family, seeded
//! reproducible runs, CSV/JSON emission.
//!
//! Determinism contract: every trial owns the RNG stream
//! `(master seed, trial index)`, rows are assembled in trial order, and
//! floats are printed with 17 significant digits, so repeated runs with
//! any `--threads` value produce byte-identical CSV bodies.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use num_traits::ToPrimitive;
use serde::Serialize;
use serde_json::json;

use crate::channels::{
    fixed_point, second_eigenvalue_abs, spectral_report, trial_rng, von_neumann_entropy,
    ChannelSample, LogBase, SpectralOptions, SuperOperator, SuperOperatorMode,
};
use crate::{bounds, channels, moments, mps};
use crate::{Error, Result};

pub const SEED_ENV_VAR: &str = "RQCHAN_SEED";

#[derive(Parser, Debug, Clone, Serialize)]
#[command(
    name = "rqchan",
    version,
    about = "Random quantum channel experiments: spectral gaps, moment cross-checks, bound tables"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// Master seed. Defaults to $RQCHAN_SEED, else a fresh random value;
    /// the resolved seed is echoed so every run is reproducible.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Worker threads for per-trial experiments. Results are identical
    /// for any value. Defaults to the hardware parallelism.
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    /// Output file (written atomically). Defaults to stdout.
    #[arg(long, global = true)]
    pub output: Option<PathBuf>,

    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Subcommand, Debug, Clone, Serialize)]
pub enum Command {
    /// Exact Weingarten moment of the overlap f versus its k,λ limit.
    Moments {
        #[arg(long)]
        p: usize,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        d: Option<usize>,
        #[arg(long)]
        lambda: Option<f64>,
        #[arg(long)]
        k: usize,
        /// Allow p = 3 (about half a million Weingarten terms).
        #[arg(long)]
        uncapped: bool,
    },
    /// Monte Carlo singular values / spectral gap of sampled channels.
    Gap {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        d: Option<usize>,
        #[arg(long)]
        lambda: Option<f64>,
        #[arg(long)]
        k: usize,
        #[arg(long, default_value_t = 10)]
        trials: usize,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
        #[arg(long, default_value_t = 10_000)]
        max_iter: usize,
        #[arg(long)]
        no_s2: bool,
        #[arg(long)]
        no_restricted: bool,
        #[arg(long)]
        no_lambda2: bool,
    },
    /// Closed-form bound table over a k grid (plot data for the gap and
    /// eigenvalue figures).
    Bounds {
        /// Single k value.
        #[arg(long)]
        k: Option<f64>,
        /// Grid lo:hi:step (inclusive), e.g. 50:500:5.
        #[arg(long)]
        k_grid: Option<String>,
        #[arg(long, default_value_t = 1.0)]
        lambda: f64,
    },
    /// Fixed-point entropy of random channels (expander surrogate).
    Expander {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        k: usize,
        #[arg(long, default_value_t = 20)]
        trials: usize,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
        #[arg(long, default_value_t = 10_000)]
        max_iter: usize,
    },
    /// Random TI-MPS purity and entropy experiment.
    Mps {
        #[arg(long)]
        bond_dim: usize,
        #[arg(long)]
        k: usize,
        #[arg(long)]
        l: usize,
        #[arg(long, default_value_t = 100)]
        trials: usize,
        /// Fixed-point iteration depth of the approximant (default
        /// ceil(5 ln D), capped at 50).
        #[arg(long)]
        depth: Option<usize>,
    },
    /// Ginibre twirl structure estimate (χ constant).
    Twirl {
        #[arg(long)]
        m: usize,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 20_000)]
        trials: usize,
    },
    /// Norm samples of the Gaussian comparison model Σ Y_i ⊗ Z_i.
    Gaussian {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        d: usize,
        #[arg(long)]
        k: usize,
        #[arg(long, default_value_t = 50)]
        trials: usize,
    },
}

/// One CSV/JSON cell.
#[derive(Clone, Debug)]
pub enum Field {
    Int(u64),
    Float(f64),
    OptFloat(Option<f64>),
    Str(String),
}

impl Field {
    fn to_csv(&self) -> String {
        match self {
            Field::Int(v) => v.to_string(),
            Field::Float(v) => fmt_float(*v),
            Field::OptFloat(Some(v)) => fmt_float(*v),
            Field::OptFloat(None) => String::new(),
            Field::Str(s) => csv_escape(s),
        }
    }

    fn to_json(&self) -> serde_json::Value {
        match self {
            Field::Int(v) => json!(v),
            Field::Float(v) => json!(v),
            Field::OptFloat(v) => json!(v),
            Field::Str(s) => json!(s),
        }
    }
}

/// 17 significant digits: round-trip exact for f64.
fn fmt_float(v: f64) -> String {
    format!("{v:.16e}")
}

/// RFC-4180: quote when the field contains comma, quote, or newline;
/// embedded quotes are doubled.
fn csv_escape(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

#[derive(Clone, Debug)]
pub struct Table {
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<Field>>,
    /// Set when a trial failed and only earlier rows were kept.
    pub truncated: bool,
}

impl Table {
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        out.push_str(&self.columns.join(","));
        out.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(Field::to_csv).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        if self.truncated {
            out.push_str("truncated\n");
        }
        out
    }
}

/// Full run record: the echoed config alone reproduces the rows.
#[derive(Clone, Debug, Serialize)]
pub struct RunReport {
    pub version: String,
    pub config: serde_json::Value,
    pub seed: u64,
    pub threads: usize,
    pub wall_secs: f64,
    pub truncated: bool,
    pub rows: Vec<serde_json::Value>,
    pub summary: serde_json::Value,
}

fn resolve_seed(cli: &Cli) -> u64 {
    if let Some(s) = cli.seed {
        return s;
    }
    if let Ok(v) = std::env::var(SEED_ENV_VAR) {
        if let Ok(s) = v.parse() {
            return s;
        }
    }
    rand::random()
}

fn resolve_threads(cli: &Cli) -> usize {
    cli.threads
        .unwrap_or_else(|| {
            std::thread::available_parallelism()
                .map(|n| n.get())
                .unwrap_or(1)
        })
        .max(1)
}

fn resolve_d(n: usize, d: Option<usize>, lambda: Option<f64>) -> Result<usize> {
    match (d, lambda) {
        (Some(d), None) => Ok(d),
        (None, Some(l)) => {
            if !(l > 0.0) {
                return Err(Error::Config(format!("lambda = {l} must be positive")));
            }
            Ok(((l * n as f64).round() as usize).max(1))
        }
        (None, None) => Err(Error::Config("give exactly one of --d / --lambda".into())),
        (Some(_), Some(_)) => Err(Error::Config(
            "give exactly one of --d / --lambda, not both".into(),
        )),
    }
}

/// Runs `work(trial)` for all trials on `threads` workers and returns the
/// rows in trial order. Workers take disjoint index stripes; ordering of
/// the output never depends on scheduling. On the first error, completed
/// earlier rows are returned alongside it so partial output can be
/// flushed.
fn run_trials<T, F>(trials: usize, threads: usize, work: F) -> (Vec<T>, Option<Error>)
where
    T: Send,
    F: Fn(usize) -> Result<T> + Sync,
{
    let threads = threads.min(trials.max(1));
    let mut slots: Vec<Option<Result<T>>> = Vec::with_capacity(trials);
    slots.resize_with(trials, || None);

    std::thread::scope(|scope| {
        let work = &work;
        let mut handles = Vec::new();
        for tid in 0..threads {
            handles.push(scope.spawn(move || {
                let mut own: Vec<(usize, Result<T>)> = Vec::new();
                let mut i = tid;
                while i < trials {
                    own.push((i, work(i)));
                    i += threads;
                }
                own
            }));
        }
        for h in handles {
            for (i, r) in h.join().expect("worker panicked") {
                slots[i] = Some(r);
            }
        }
    });

    let mut rows = Vec::with_capacity(trials);
    for (i, slot) in slots.into_iter().enumerate() {
        match slot.expect("missing trial result") {
            Ok(v) => rows.push(v),
            Err(e) => {
                return (rows, Some(Error::Config(format!("trial {i}: {e}"))));
            }
        }
    }
    (rows, None)
}

fn per_trial_sample(seed: u64, trial: usize, n: usize, d: usize, k: usize) -> Result<ChannelSample> {
    let mut rng = trial_rng(seed, trial as u64);
    let sample = ChannelSample::sample(n, d, k, &mut rng)?;
    let iso = sample.isometry_residual();
    let tp = sample.trace_preservation_residual();
    if iso > 1e-12 || tp > 1e-12 {
        return Err(Error::InvalidParameter(format!(
            "sample invariant violated: isometry residual {iso:.3e}, trace residual {tp:.3e}"
        )));
    }
    Ok(sample)
}

fn build_table(cli: &Cli, seed: u64, threads: usize) -> Result<(Table, Option<Error>)> {
    match &cli.command {
        Command::Moments {
            p,
            n,
            d,
            lambda,
            k,
            uncapped,
        } => {
            let d = resolve_d(*n, *d, *lambda)?;
            let spec = moments::MomentSpec::new(*p, *n, d, *k)?;
            let exact = if *uncapped {
                moments::exact_moment_f_uncapped(&spec)?
            } else {
                moments::exact_moment_f(&spec)?
            };
            let lam = spec.lambda_realized();
            let exact_float = exact.to_f64().unwrap_or(f64::NAN);
            let row = vec![
                Field::Int(*p as u64),
                Field::Int(*n as u64),
                Field::Int(d as u64),
                Field::Int(*k as u64),
                Field::Float(lam),
                Field::Str(exact.numer().to_string()),
                Field::Str(exact.denom().to_string()),
                Field::Float(exact_float),
                Field::Float(moments::limit_moment(*p, *k, lam)?),
                Field::Float(moments::geodesic_moment(*p, *k, lam)?),
            ];
            Ok((
                Table {
                    columns: vec![
                        "p",
                        "n",
                        "d",
                        "k",
                        "lambda_realized",
                        "exact_num",
                        "exact_den",
                        "exact",
                        "limit",
                        "geodesic",
                    ],
                    rows: vec![row],
                    truncated: false,
                },
                None,
            ))
        }

        Command::Gap {
            n,
            d,
            lambda,
            k,
            trials,
            tol,
            max_iter,
            no_s2,
            no_restricted,
            no_lambda2,
        } => {
            let d = resolve_d(*n, *d, *lambda)?;
            if d > n * k {
                return Err(Error::Config(format!("d = {d} exceeds nk = {}", n * k)));
            }
            let opts = SpectralOptions {
                tol: *tol,
                max_iter: *max_iter,
                seed,
                compute_s2: !no_s2,
                compute_restricted: !no_restricted,
                compute_lambda2: !no_lambda2,
                ..SpectralOptions::default()
            };
            let (reports, err) = run_trials(*trials, threads, |trial| {
                let sample = per_trial_sample(seed, trial, *n, d, *k)?;
                spectral_report(&sample, &opts)
            });
            let rows = reports
                .iter()
                .enumerate()
                .map(|(trial, r)| {
                    vec![
                        Field::Int(trial as u64),
                        Field::Int(r.n as u64),
                        Field::Int(r.d as u64),
                        Field::Int(r.k as u64),
                        Field::Float(r.f),
                        Field::Float(r.s1),
                        Field::OptFloat(r.s2),
                        Field::OptFloat(r.restricted_norm),
                        Field::OptFloat(r.lambda2_abs),
                        Field::OptFloat(r.entropy),
                        Field::Int(r.iters as u64),
                    ]
                })
                .collect();
            Ok((
                Table {
                    columns: vec![
                        "trial",
                        "n",
                        "d",
                        "k",
                        "f",
                        "s1",
                        "s2",
                        "restricted_norm",
                        "lambda2_abs",
                        "entropy",
                        "iters",
                    ],
                    rows,
                    truncated: err.is_some(),
                },
                err,
            ))
        }

        Command::Bounds { k, k_grid, lambda } => {
            let ks: Vec<f64> = match (k, k_grid) {
                (Some(k), None) => vec![*k],
                (None, Some(grid)) => parse_grid(grid)?,
                _ => {
                    return Err(Error::Config(
                        "give exactly one of --k / --k-grid".into(),
                    ))
                }
            };
            let mut rows = Vec::with_capacity(ks.len());
            for kv in ks {
                let b = bounds::BoundSet::compute(kv, *lambda)?;
                rows.push(vec![
                    Field::Float(b.k),
                    Field::Float(b.lambda),
                    Field::Float(b.chi),
                    Field::Float(b.g),
                    Field::Float(b.sv_gap_lb),
                    Field::Float(b.sv_gap_ub),
                    Field::OptFloat(b.ev2_ub),
                    Field::Float(b.explicit_lb),
                ]);
            }
            Ok((
                Table {
                    columns: vec![
                        "k",
                        "lambda",
                        "chi",
                        "g",
                        "sv_gap_lb",
                        "sv_gap_ub",
                        "ev2_ub",
                        "explicit_lb",
                    ],
                    rows,
                    truncated: false,
                },
                None,
            ))
        }

        Command::Expander {
            n,
            k,
            trials,
            tol,
            max_iter,
        } => {
            let opts = SpectralOptions {
                seed,
                ..SpectralOptions::default()
            };
            let (results, err) = run_trials(*trials, threads, |trial| {
                let sample = per_trial_sample(seed, trial, *n, *n, *k)?;
                let op = SuperOperator::new(&sample.kraus, SuperOperatorMode::MatrixFree)?;
                let fp = fixed_point(&op, *tol, *max_iter)?;
                let entropy = von_neumann_entropy(&fp.lambda.view(), LogBase::Natural)?;
                let mut rng = trial_rng(seed ^ 0x9e3779b97f4a7c15, trial as u64);
                let (l2, _) = second_eigenvalue_abs(&op, &fp.lambda.view(), &opts, &mut rng)?;
                Ok((entropy, l2, fp.iterations))
            });
            let rows = results
                .iter()
                .enumerate()
                .map(|(trial, (entropy, l2, iters))| {
                    vec![
                        Field::Int(trial as u64),
                        Field::Int(*n as u64),
                        Field::Int(*k as u64),
                        Field::Float(*entropy),
                        Field::Float(*l2),
                        Field::Int(*iters as u64),
                    ]
                })
                .collect();
            Ok((
                Table {
                    columns: vec!["trial", "n", "k", "entropy", "lambda2_abs", "iters"],
                    rows,
                    truncated: err.is_some(),
                },
                err,
            ))
        }

        Command::Mps {
            bond_dim,
            k,
            l,
            trials,
            depth,
        } => {
            let mut spec = mps::MPSEnsembleSpec::new(*bond_dim, *k, *l, *trials, seed)?;
            if let Some(t) = depth {
                spec.t = *t;
            }
            let (results, err) = run_trials(*trials, threads, |trial| mps::mps_trial(&spec, trial));
            let rows = results
                .iter()
                .map(|r| {
                    vec![
                        Field::Int(r.trial as u64),
                        Field::Int(r.d_bond as u64),
                        Field::Int(r.k as u64),
                        Field::Int(r.l as u64),
                        Field::Int(r.t as u64),
                        Field::Float(r.purity),
                        Field::Float(r.entropy),
                        Field::Float(r.purity_physical),
                        Field::Float(r.entropy_physical),
                        Field::Float(r.purity_approx),
                        Field::Float(r.tv_gap),
                    ]
                })
                .collect();
            Ok((
                Table {
                    columns: vec![
                        "trial",
                        "D",
                        "k",
                        "l",
                        "t",
                        "purity",
                        "entropy",
                        "purity_physical",
                        "entropy_physical",
                        "purity_approx",
                        "tv_gap",
                    ],
                    rows,
                    truncated: err.is_some(),
                },
                err,
            ))
        }

        Command::Twirl { m, n, trials } => {
            let mut rng = trial_rng(seed, 0);
            let est = channels::estimate_twirl_structure(*m, *n, *trials, &mut rng)?;
            let row = vec![
                Field::Int(est.m as u64),
                Field::Int(est.n as u64),
                Field::Int(est.trials as u64),
                Field::Float(est.diag_overlap),
                Field::Float(est.diag_overlap_se),
                Field::Float(est.chi_hat),
                Field::Float(est.chi_hat_se),
                Field::OptFloat(est.offdiag_flatness),
            ];
            Ok((
                Table {
                    columns: vec![
                        "m",
                        "n",
                        "trials",
                        "diag_overlap",
                        "diag_overlap_se",
                        "chi_hat",
                        "chi_hat_se",
                        "offdiag_flatness",
                    ],
                    rows: vec![row],
                    truncated: false,
                },
                None,
            ))
        }

        Command::Gaussian { n, d, k, trials } => {
            let (norms, err) = run_trials(*trials, threads, |trial| {
                let mut rng = trial_rng(seed, trial as u64);
                Ok(channels::gaussian_model_norm(*n, *d, *k, 1, &mut rng)?[0])
            });
            let rows = norms
                .iter()
                .enumerate()
                .map(|(trial, norm)| {
                    vec![
                        Field::Int(trial as u64),
                        Field::Int(*n as u64),
                        Field::Int(*d as u64),
                        Field::Int(*k as u64),
                        Field::Float(*norm),
                    ]
                })
                .collect();
            Ok((
                Table {
                    columns: vec!["trial", "n", "d", "k", "norm"],
                    rows,
                    truncated: err.is_some(),
                },
                err,
            ))
        }
    }
}

fn parse_grid(grid: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = grid.split(':').collect();
    if parts.len() != 3 {
        return Err(Error::Config(format!(
            "grid '{grid}' must be lo:hi:step, e.g. 50:500:5"
        )));
    }
    let lo: f64 = parts[0]
        .parse()
        .map_err(|_| Error::Config(format!("bad grid start '{}'", parts[0])))?;
    let hi: f64 = parts[1]
        .parse()
        .map_err(|_| Error::Config(format!("bad grid end '{}'", parts[1])))?;
    let step: f64 = parts[2]
        .parse()
        .map_err(|_| Error::Config(format!("bad grid step '{}'", parts[2])))?;
    if step <= 0.0 || hi < lo {
        return Err(Error::Config(format!(
            "grid '{grid}' needs lo <= hi and step > 0"
        )));
    }
    let mut ks = Vec::new();
    let mut i = 0usize;
    loop {
        let k = lo + step * i as f64;
        if k > hi + 1e-9 {
            break;
        }
        ks.push(k);
        i += 1;
    }
    Ok(ks)
}

/// Column-wise mean/se/min/max over the numeric columns.
fn summarize(table: &Table) -> serde_json::Value {
    let mut out = serde_json::Map::new();
    for (ci, name) in table.columns.iter().enumerate() {
        let vals: Vec<f64> = table
            .rows
            .iter()
            .filter_map(|row| match row[ci] {
                Field::Float(v) => Some(v),
                Field::OptFloat(v) => v,
                _ => None,
            })
            .collect();
        if vals.is_empty() {
            continue;
        }
        let m = vals.len() as f64;
        let mean = vals.iter().sum::<f64>() / m;
        let var = vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / m;
        let se = (var / m).sqrt();
        let min = vals.iter().cloned().fold(f64::INFINITY, f64::min);
        let max = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        out.insert(
            name.to_string(),
            json!({"mean": mean, "se": se, "min": min, "max": max}),
        );
    }
    serde_json::Value::Object(out)
}

fn write_atomic(path: &Path, content: &str) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty());
    let mut tmp = match dir {
        Some(dir) => tempfile::NamedTempFile::new_in(dir)?,
        None => tempfile::NamedTempFile::new_in(".")?,
    };
    tmp.write_all(content.as_bytes())?;
    tmp.persist(path)
        .map_err(|e| Error::Io(e.error))?;
    Ok(())
}

/// Executes a parsed command line. Returns an error (nonzero exit) if any
/// trial failed; partial CSV output is still flushed with a trailing
/// `truncated` marker.
pub fn run(cli: &Cli) -> Result<()> {
    let seed = resolve_seed(cli);
    let threads = resolve_threads(cli);
    let start = Instant::now();
    let (table, trial_err) = build_table(cli, seed, threads)?;
    let wall = start.elapsed().as_secs_f64();

    let config_echo = json!({
        "command": serde_json::to_value(&cli.command).expect("config serializes"),
        "seed": seed,
        "threads": threads,
        "format": serde_json::to_value(cli.format).expect("format serializes"),
    });

    let content = match cli.format {
        Format::Csv => {
            // keep the CSV body clean; the reproduction header goes to stderr
            eprintln!("config: {config_echo}");
            table.to_csv()
        }
        Format::Json => {
            let rows = table
                .rows
                .iter()
                .map(|row| {
                    let mut obj = serde_json::Map::new();
                    for (name, field) in table.columns.iter().zip(row.iter()) {
                        obj.insert(name.to_string(), field.to_json());
                    }
                    serde_json::Value::Object(obj)
                })
                .collect();
            let report = RunReport {
                version: env!("CARGO_PKG_VERSION").to_string(),
                config: config_echo,
                seed,
                threads,
                wall_secs: wall,
                truncated: table.truncated,
                rows,
                summary: summarize(&table),
            };
            let mut s = serde_json::to_string_pretty(&report).expect("report serializes");
            s.push('\n');
            s
        }
    };

    match &cli.output {
        Some(path) => write_atomic(path, &content)?,
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(content.as_bytes())?;
        }
    }

    match trial_err {
        Some(e) => Err(e),
        None => Ok(()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(args: &[&str]) -> Cli {
        Cli::try_parse_from(args).unwrap()
    }

    #[test]
    fn lambda_resolves_d() {
        let cli = parse(&[
            "rqchan", "gap", "--n", "64", "--k", "169", "--lambda", "1", "--trials", "50",
            "--seed", "7",
        ]);
        match cli.command {
            Command::Gap { n, d, lambda, .. } => {
                assert_eq!(resolve_d(n, d, lambda).unwrap(), 64);
            }
            _ => panic!("wrong subcommand"),
        }
        assert_eq!(cli.seed, Some(7));
    }

    #[test]
    fn d_and_lambda_are_exclusive() {
        assert!(resolve_d(8, Some(4), Some(1.0)).is_err());
        assert!(resolve_d(8, None, None).is_err());
        assert_eq!(resolve_d(8, Some(4), None).unwrap(), 4);
        assert_eq!(resolve_d(8, None, Some(0.5)).unwrap(), 4);
    }

    #[test]
    fn oversized_d_is_rejected() {
        let cli = parse(&[
            "rqchan", "gap", "--n", "4", "--k", "1", "--d", "8", "--seed", "1",
        ]);
        assert!(run(&cli).is_err());
    }

    #[test]
    fn grid_parsing() {
        assert_eq!(parse_grid("50:60:5").unwrap(), vec![50.0, 55.0, 60.0]);
        assert_eq!(parse_grid("2:2:1").unwrap(), vec![2.0]);
        assert!(parse_grid("5:1:1").is_err());
        assert!(parse_grid("1:2").is_err());
        assert!(parse_grid("a:b:c").is_err());
    }

    #[test]
    fn csv_escaping_and_float_format() {
        assert_eq!(csv_escape("plain"), "plain");
        assert_eq!(csv_escape("a,b"), "\"a,b\"");
        assert_eq!(csv_escape("say \"hi\""), "\"say \"\"hi\"\"\"");
        let s = fmt_float(1.25);
        assert_eq!(s.parse::<f64>().unwrap(), 1.25);
        assert_eq!(Field::OptFloat(None).to_csv(), "");
    }

    #[test]
    fn trials_run_in_order_regardless_of_threads() {
        let work = |i: usize| -> Result<usize> { Ok(i * i) };
        let (one, e1) = run_trials(17, 1, work);
        let (four, e4) = run_trials(17, 4, work);
        assert!(e1.is_none() && e4.is_none());
        assert_eq!(one, four);
        assert_eq!(one[5], 25);
    }

    #[test]
    fn trial_error_keeps_earlier_rows() {
        let work = |i: usize| -> Result<usize> {
            if i == 3 {
                Err(Error::InvalidParameter("boom".into()))
            } else {
                Ok(i)
            }
        };
        let (rows, err) = run_trials(6, 2, work);
        assert_eq!(rows, vec![0, 1, 2]);
        let msg = err.unwrap().to_string();
        assert!(msg.contains("trial 3"), "{msg}");
    }

    #[test]
    fn bounds_table_shape() {
        let cli = parse(&[
            "rqchan", "bounds", "--k-grid", "160:180:10", "--lambda", "1", "--seed", "1",
        ]);
        let (table, err) = build_table(&cli, 1, 1).unwrap();
        assert!(err.is_none());
        assert_eq!(table.rows.len(), 3);
        assert_eq!(table.columns.len(), 8);
        let csv = table.to_csv();
        assert!(csv.starts_with("k,lambda,chi,"));
        assert_eq!(csv.lines().count(), 4);
    }

    #[test]
    fn moments_single_row() {
        let cli = parse(&[
            "rqchan", "moments", "--p", "1", "--n", "8", "--d", "4", "--k", "2", "--seed", "1",
        ]);
        let (table, _) = build_table(&cli, 1, 1).unwrap();
        assert_eq!(table.rows.len(), 1);
        // frozen oracle: E f(p=1, n=8, d=4, k=2) = 74/85
        match (&table.rows[0][5], &table.rows[0][6]) {
            (Field::Str(num), Field::Str(den)) => {
                assert_eq!(num, "74");
                assert_eq!(den, "85");
            }
            _ => panic!("wrong field types"),
        }
    }

    #[test]
    fn gap_rows_are_thread_count_invariant() {
        let cli = parse(&[
            "rqchan", "gap", "--n", "6", "--d", "6", "--k", "2", "--trials", "4", "--seed", "11",
        ]);
        let (t1, e1) = build_table(&cli, 11, 1).unwrap();
        let (t4, e4) = build_table(&cli, 11, 4).unwrap();
        assert!(e1.is_none() && e4.is_none());
        assert_eq!(t1.to_csv(), t4.to_csv());
    }
}
