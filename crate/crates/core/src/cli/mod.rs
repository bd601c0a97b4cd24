//! Command-line front end. `run` parses arguments, executes one subcommand
//! and returns the process exit code.

mod gate_table;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_complex::Complex64;
use serde::Serialize;
use thiserror::Error;

use crate::bench::{self, BenchError};
use crate::config::{Config, ConfigError};
use crate::gating::gate_pairs;
use crate::montecarlo::{self, McError, McRow};
use crate::numtheory::{ModTriple, NumError};
use crate::pipeline::{sparse_fft, verify_certificate, Certificate, CertificateError, PipelineError, RecoveryPath};
use crate::planner::{planned_grid, PlanError, ViewParams};
use crate::signal::{self, from_dense, synthesize, SignalError, SignalSource, SparseSpectrum};
use crate::views::ResidueSet;

pub use gate_table::TableRow;

pub const EXIT_FAST: u8 = 0;
pub const EXIT_USAGE: u8 = 1;
pub const EXIT_FALLBACK: u8 = 2;
pub const EXIT_VIOLATIONS: u8 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Signal(#[from] SignalError),
    #[error(transparent)]
    Num(#[from] NumError),
    #[error(transparent)]
    Plan(#[from] PlanError),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error(transparent)]
    Certificate(#[from] CertificateError),
    #[error(transparent)]
    MonteCarlo(#[from] McError),
    #[error(transparent)]
    Bench(#[from] BenchError),
    #[error("cannot write {path}: {source}")]
    Write { path: PathBuf, source: std::io::Error },
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
    Table,
}

#[derive(Debug, Parser)]
#[command(name = "keyed-sfft", version, about = "Keyed multi-view CRT sparse FFT")]
pub struct Cli {
    /// Seed for every random choice; equal seeds give identical output.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// TOML configuration file; flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Write the primary output here instead of stdout.
    #[arg(long, short, global = true)]
    pub output: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Recover the k largest spectral components of a signal.
    Transform(TransformArgs),
    /// Gate every residue pair of two sets against a third.
    GateTable(GateTableArgs),
    /// Run a Monte Carlo experiment and emit one CSV row per statistic.
    Montecarlo(MonteCarloArgs),
    /// Compare fast-path and dense op counts per (N, k) cell.
    Bench(BenchArgs),
    /// Re-check a certificate against the signal it describes.
    VerifyCert(VerifyCertArgs),
}

#[derive(Debug, Args)]
pub struct TransformArgs {
    /// Synthesized spectrum such as `{7:1,41:1}` or `{7:1:0.5}` (f:re[:im]).
    #[arg(long, conflicts_with = "input")]
    pub synthesize: Option<String>,
    /// Dense samples (`.csv` or binary) or a spectrum `.json` file.
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(short)]
    pub k: usize,
    /// Verification views.
    #[arg(short)]
    pub t: Option<usize>,
    /// Nominal signal length N.
    #[arg(long)]
    pub n: Option<u64>,
    /// Grid length for synthesized input when no moduli are given.
    #[arg(long)]
    pub grid: Option<u64>,
    /// Identification moduli, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub moduli: Option<Vec<u64>>,
    /// Use the identity hash on the first identification round.
    #[arg(long)]
    pub identity_hash: bool,
    #[arg(long)]
    pub force_fallback: bool,
    /// Also write the certificate here.
    #[arg(long)]
    pub certificate: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GateTableArgs {
    #[arg(long, value_delimiter = ',', num_args = 0..)]
    pub r1: Vec<u64>,
    #[arg(long, value_delimiter = ',', num_args = 0..)]
    pub r2: Vec<u64>,
    #[arg(long, value_delimiter = ',', num_args = 0..)]
    pub r3: Vec<u64>,
    #[arg(long, value_delimiter = ',', default_value = "7,11,13")]
    pub moduli: Vec<u64>,
    /// Annotate rows against the published worked example.
    #[arg(long)]
    pub published_diff: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Experiment {
    GateSurvivors,
    SingletonFraction,
    VerifyMiss,
    Rehash,
}

#[derive(Debug, Args)]
pub struct MonteCarloArgs {
    #[arg(long, value_enum)]
    pub experiment: Experiment,
    #[arg(short, default_value_t = 10)]
    pub k: usize,
    #[arg(long, default_value_t = 15.0)]
    pub alpha: f64,
    /// Three coprime moduli; defaults to primes nearest --target.
    #[arg(long, value_delimiter = ',')]
    pub moduli: Option<Vec<u64>>,
    #[arg(long, default_value_t = 1000)]
    pub target: u64,
    /// Support range for gate-survivors draws.
    #[arg(long, default_value_t = 1_000_000)]
    pub n: u64,
    #[arg(long, default_value_t = 1000)]
    pub trials: usize,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Signal lengths, comma separated; `2^14` style is accepted.
    #[arg(long, value_delimiter = ',', required = true)]
    pub n: Vec<String>,
    #[arg(short, value_delimiter = ',', required = true)]
    pub k: Vec<usize>,
    #[arg(short, default_value_t = 3)]
    pub t: usize,
    /// Also time both paths (wall-clock columns are otherwise empty).
    #[arg(long)]
    pub wall_time: bool,
}

#[derive(Debug, Args)]
pub struct VerifyCertArgs {
    #[arg(long)]
    pub certificate: PathBuf,
    /// The signal: dense samples or a spectrum `.json` file.
    #[arg(long)]
    pub input: PathBuf,
}

/// Parses `argv`, runs the command and maps the outcome to an exit code.
pub fn main_with<I, T>(argv: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_FAST };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_USAGE)
        }
    }
}

pub fn run(cli: &Cli) -> Result<u8, CliError> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| usage(format!("--threads: {e}")))?;
    }
    let mut cfg = match &cli.config {
        Some(p) => Config::load(p)?,
        None => Config::default(),
    };
    match &cli.command {
        Command::Transform(a) => cmd_transform(cli, &mut cfg, a),
        Command::GateTable(a) => cmd_gate_table(cli, a),
        Command::Montecarlo(a) => cmd_montecarlo(cli, a),
        Command::Bench(a) => cmd_bench(cli, &cfg, a),
        Command::VerifyCert(a) => cmd_verify_cert(cli, a),
    }
}

fn emit(cli: &Cli, text: &str) -> Result<(), CliError> {
    match &cli.output {
        Some(path) => write_file(path, text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn write_file(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|source| CliError::Write { path: path.into(), source })
}

fn triple_from(moduli: &[u64]) -> Result<ModTriple, CliError> {
    let m: [u64; 3] = moduli
        .try_into()
        .map_err(|_| usage(format!("expected three moduli, got {}", moduli.len())))?;
    Ok(ModTriple::try_from(m)?)
}

/// Parses `{7:1,41:1}` style spectra into `(f, coefficient)` pairs.
pub fn parse_synth(text: &str) -> Result<Vec<(u64, Complex64)>, CliError> {
    let body = text.trim().trim_start_matches('{').trim_end_matches('}');
    body.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|item| {
            let parts: Vec<&str> = item.split(':').map(str::trim).collect();
            let bad = || usage(format!("bad spectrum entry `{item}` (want f:re or f:re:im)"));
            let (f, re, im) = match parts.as_slice() {
                [f, re] => (f, re, "0"),
                [f, re, im] => (f, re, *im),
                _ => return Err(bad()),
            };
            let f = f.parse().map_err(|_| bad())?;
            let re: f64 = re.parse().map_err(|_| bad())?;
            let im: f64 = im.parse().map_err(|_| bad())?;
            Ok((f, Complex64::new(re, im)))
        })
        .collect()
}

/// Parses `16384` or `2^14`.
pub fn parse_length(text: &str) -> Result<u64, CliError> {
    let bad = || usage(format!("bad length `{text}`"));
    match text.trim().split_once('^') {
        Some((base, exp)) => {
            let base: u64 = base.parse().map_err(|_| bad())?;
            let exp: u32 = exp.parse().map_err(|_| bad())?;
            base.checked_pow(exp).ok_or_else(bad)
        }
        None => text.trim().parse().map_err(|_| bad()),
    }
}

fn is_spectrum_file(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"))
}

/// A loaded signal: spectra are synthesized lazily, dense files are padded
/// by the pipeline.
enum Loaded {
    Synth(signal::SynthesizedSource),
    Dense(signal::DenseSource),
}

impl Loaded {
    fn source(&self) -> &dyn SignalSource {
        match self {
            Loaded::Synth(s) => s,
            Loaded::Dense(d) => d,
        }
    }
}

fn load_signal(path: &Path, nominal: Option<u64>) -> Result<Loaded, CliError> {
    if is_spectrum_file(path) {
        let spec = signal::load_spectrum(path)?;
        let src = synthesize(spec);
        Ok(Loaded::Synth(match nominal {
            Some(n) => src.with_nominal_length(n),
            None => src,
        }))
    } else {
        let samples = signal::load_dense(path)?;
        let len = samples.len() as u64;
        Ok(Loaded::Dense(from_dense(samples, len)?))
    }
}

fn cmd_transform(cli: &Cli, cfg: &mut Config, a: &TransformArgs) -> Result<u8, CliError> {
    if let Some(m) = &a.moduli {
        triple_from(m)?;
        cfg.moduli = Some(m.clone());
    }
    cfg.identity_hash |= a.identity_hash;
    cfg.force_fallback |= a.force_fallback;
    if let Some(t) = a.t {
        cfg.verify_views = t;
    }
    if a.n.is_some() {
        cfg.declared_n = a.n;
    }
    cfg.validate()?;

    let loaded = match (&a.synthesize, &a.input) {
        (Some(text), _) => {
            let entries = parse_synth(text)?;
            let grid = match (&a.moduli, a.grid, a.n) {
                (Some(m), _, _) => m.iter().product(),
                (None, Some(g), _) => g,
                (None, None, Some(n)) => planned_grid(n, a.k, cfg)?,
                (None, None, None) => {
                    let top = entries.iter().map(|e| e.0).max().unwrap_or(0);
                    planned_grid((top + 1).next_power_of_two().max(16), a.k, cfg)?
                }
            };
            let src = synthesize(SparseSpectrum::new(grid, entries)?);
            Loaded::Synth(match a.n {
                Some(n) => src.with_nominal_length(n),
                None => src,
            })
        }
        (None, Some(path)) => load_signal(path, a.n)?,
        (None, None) => return Err(usage("transform needs --synthesize or --input")),
    };

    let result = sparse_fft(loaded.source(), a.k, cfg, cli.seed)?;
    if let Some(path) = &a.certificate {
        write_file(path, &result.certificate.to_json())?;
    }
    let text = match cli.format.unwrap_or(Format::Json) {
        Format::Json => result.to_json() + "\n",
        Format::Csv => {
            let mut out = String::from("f,re,im\n");
            for e in result.spectrum.entries() {
                out.push_str(&format!("{},{},{}\n", e.f, e.coeff.re, e.coeff.im));
            }
            out
        }
        Format::Table => {
            let path = match result.path {
                RecoveryPath::FastPath => "fast_path",
                RecoveryPath::Fallback => "fallback",
            };
            let mut out = format!("path: {path}\ngrid: {}\nops: {}\n", result.spectrum.grid_length(), result.op_counts.total);
            out.push_str(&format!("{:>12}  {:>22}  {:>22}\n", "f", "re", "im"));
            for e in result.spectrum.entries() {
                out.push_str(&format!("{:>12}  {:>22.15e}  {:>22.15e}\n", e.f, e.coeff.re, e.coeff.im));
            }
            out
        }
    };
    emit(cli, &text)?;
    Ok(match result.path {
        RecoveryPath::FastPath => EXIT_FAST,
        RecoveryPath::Fallback => EXIT_FALLBACK,
    })
}

fn cmd_gate_table(cli: &Cli, a: &GateTableArgs) -> Result<u8, CliError> {
    let triple = triple_from(&a.moduli)?;
    let moduli = triple.moduli();
    for (set, m) in [(&a.r1, moduli[0]), (&a.r2, moduli[1]), (&a.r3, moduli[2])] {
        if let Some(r) = set.iter().find(|&&r| r >= m) {
            return Err(usage(format!("residue {r} is not below its modulus {m}")));
        }
    }
    let hashes: Vec<ViewParams> = moduli.iter().map(|&m| ViewParams::identity(m, 1)).collect();
    let set = |v: &[u64]| ResidueSet::from_residues(v.iter().copied());
    let gated = gate_pairs(&set(&a.r1), &set(&a.r2), &set(&a.r3), &triple, &hashes)?;
    let rows = gate_table::rows(&gated, moduli, a.published_diff);
    let text = match cli.format.unwrap_or(Format::Table) {
        Format::Table => gate_table::render_table(&rows, moduli[2]),
        Format::Csv => gate_table::render_csv(&rows),
        Format::Json => to_json(&rows),
    };
    emit(cli, &text)?;
    Ok(EXIT_FAST)
}

fn to_json<T: Serialize + ?Sized>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("serializable") + "\n"
}

fn cmd_montecarlo(cli: &Cli, a: &MonteCarloArgs) -> Result<u8, CliError> {
    let triple = match &a.moduli {
        Some(m) => triple_from(m)?,
        None => {
            let m = crate::numtheory::find_coprime_moduli(a.target, 3, 1, &[])?;
            triple_from(&m)?
        }
    };
    let (k, trials, seed) = (a.k, a.trials, cli.seed);
    let rows: Vec<McRow> = match a.experiment {
        Experiment::GateSurvivors => montecarlo::gate_survivors(a.n, k, a.alpha, &triple, trials, seed)?,
        Experiment::SingletonFraction => montecarlo::singleton_fraction(k, &triple, trials, seed)?,
        Experiment::VerifyMiss => montecarlo::verify_miss(k, &triple, trials, seed)?,
        Experiment::Rehash => montecarlo::rehash_rows(k, &triple, trials, seed)?,
    };
    let text = match cli.format.unwrap_or(Format::Csv) {
        Format::Json => to_json(&rows),
        _ => montecarlo::rows_to_csv(&rows),
    };
    emit(cli, &text)?;
    Ok(EXIT_FAST)
}

fn cmd_bench(cli: &Cli, cfg: &Config, a: &BenchArgs) -> Result<u8, CliError> {
    let ns = a.n.iter().map(|s| parse_length(s)).collect::<Result<Vec<_>, _>>()?;
    let rows = bench::bench(&ns, &a.k, a.t, cfg, cli.seed, a.wall_time)?;
    let text = match cli.format.unwrap_or(Format::Csv) {
        Format::Json => to_json(&rows),
        _ => bench::rows_to_csv(&rows),
    };
    emit(cli, &text)?;
    Ok(EXIT_FAST)
}

fn cmd_verify_cert(cli: &Cli, a: &VerifyCertArgs) -> Result<u8, CliError> {
    let text = std::fs::read_to_string(&a.certificate)
        .map_err(|e| usage(format!("cannot read {}: {e}", a.certificate.display())))?;
    let cert = Certificate::from_json(&text)?;
    let loaded = load_signal(&a.input, cert.declared_n)?;
    let violations = verify_certificate(&cert, loaded.source())?;
    let out = match cli.format.unwrap_or(Format::Table) {
        Format::Json => to_json(&violations),
        Format::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(["record", "message"]).expect("header");
            for v in &violations {
                w.write_record([&v.record, &v.message]).expect("row");
            }
            String::from_utf8(w.into_inner().expect("in-memory writer")).expect("utf-8")
        }
        Format::Table if violations.is_empty() => "certificate ok\n".to_string(),
        Format::Table => violations.iter().map(|v| format!("{}: {}\n", v.record, v.message)).collect(),
    };
    emit(cli, &out)?;
    Ok(if violations.is_empty() { EXIT_FAST } else { EXIT_VIOLATIONS })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn synth_spec_parsing() {
        let e = parse_synth("{7:1,41:1}").unwrap();
        assert_eq!(e, vec![(7, Complex64::new(1.0, 0.0)), (41, Complex64::new(1.0, 0.0))]);
        let e = parse_synth("{3:0.5:-2}").unwrap();
        assert_eq!(e, vec![(3, Complex64::new(0.5, -2.0))]);
        assert!(parse_synth("{}").unwrap().is_empty());
        assert!(parse_synth("{x:1}").is_err());
        assert!(parse_synth("{1:2:3:4}").is_err());
    }

    #[test]
    fn length_parsing() {
        assert_eq!(parse_length("2^14").unwrap(), 16384);
        assert_eq!(parse_length("1000").unwrap(), 1000);
        assert!(parse_length("2^99").is_err());
        assert!(parse_length("two").is_err());
    }

    #[test]
    fn flags_are_validated() {
        assert!(Cli::try_parse_from(["keyed-sfft", "transform", "-k", "2", "--bogus"]).is_err());
        assert!(Cli::try_parse_from(["keyed-sfft", "transform"]).is_err());
        let cli = Cli::try_parse_from(["keyed-sfft", "--seed", "9", "bench", "--n", "2^10", "-k", "3"]).unwrap();
        assert_eq!(cli.seed, 9);
    }
}
