//! Command-line front end.
//!
//! Exit codes: 0 success or pass, 1 certified failure, 2 input error,
//! 3 domain error.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use crate::certify::{self, BetaGrid, CertifyConfig, Theory};
use crate::channels::{self, ChannelFamily};
use crate::error::{Error, Result};
use crate::geometry;
use crate::io;
use crate::linalg::CMatrix;
use crate::repro::{self, Which};
use crate::spectra::{Beta, DensityMatrix, Hamiltonian};
use crate::workfn;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_DOMAIN: i32 = 3;

pub const THREADS_ENV: &str = "ERGOKIT_THREADS";

#[derive(Debug, Parser)]
#[command(name = "ergokit", version, about = "Ergotropy, free energy and free-operation certification")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Evaluate a functional or monotone of a state.
    Compute(ComputeArgs),
    /// Certify a channel against the free-operation conditions.
    Classify(ClassifyArgs),
    /// Many-copy ergotropy per copy against the free energy.
    Ncopy(NcopyArgs),
    /// Regenerate the worked examples.
    Repro(ReproArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Quantity {
    Ergotropy,
    FreeEnergy,
    Beta,
    Mcp,
    Mp,
    Family,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FamilyTheory {
    Cp,
    P,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TheoryArg {
    Cp,
    P,
    Both,
}

impl From<TheoryArg> for Theory {
    fn from(t: TheoryArg) -> Self {
        match t {
            TheoryArg::Cp => Theory::Cp,
            TheoryArg::P => Theory::P,
            TheoryArg::Both => Theory::Both,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ReproArg {
    D3Temperature,
    D3Contractivity,
    LambdaBeta,
    Decomposition,
    All,
}

impl From<ReproArg> for Which {
    fn from(w: ReproArg) -> Self {
        match w {
            ReproArg::D3Temperature => Which::D3Temperature,
            ReproArg::D3Contractivity => Which::D3Contractivity,
            ReproArg::LambdaBeta => Which::LambdaBeta,
            ReproArg::Decomposition => Which::Decomposition,
            ReproArg::All => Which::All,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct OutputArgs {
    /// Write the report here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "json")]
    pub format: Format,
}

#[derive(Debug, Clone, Args)]
pub struct ComputeArgs {
    /// State file: {"dim", "hamiltonian": {"eigenvalues", "basis"}, "rho"}.
    #[arg(long)]
    pub state: PathBuf,
    #[arg(long, value_enum)]
    pub what: Quantity,
    /// Tsallis order for `--what family`.
    #[arg(long, default_value_t = 1.0)]
    pub alpha: f64,
    /// Temperature exponent for `--what family`.
    #[arg(long, default_value_t = 1.0)]
    pub nu: f64,
    /// Which family for `--what family`.
    #[arg(long, value_enum, default_value = "p")]
    pub theory: FamilyTheory,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Args)]
pub struct ConfigArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1000)]
    pub trials: usize,
    #[arg(long, default_value_t = certify::DEFAULT_TOL)]
    pub tol: f64,
    #[arg(long, default_value_t = 0.1)]
    pub beta_min: f64,
    #[arg(long, default_value_t = 10.0)]
    pub beta_max: f64,
    #[arg(long, default_value_t = 7)]
    pub beta_points: usize,
    /// Space the beta grid linearly instead of logarithmically.
    #[arg(long)]
    pub beta_linear: bool,
    /// Optimizer starts per grid point for the contraction factor.
    #[arg(long, default_value_t = 8)]
    pub starts: usize,
}

impl ConfigArgs {
    pub fn to_config(&self) -> Result<CertifyConfig> {
        let cfg = CertifyConfig {
            seed: self.seed,
            trials: self.trials,
            tol: self.tol,
            beta_grid: BetaGrid {
                min: self.beta_min,
                max: self.beta_max,
                points: self.beta_points,
                log_spaced: !self.beta_linear,
            },
            starts: self.starts,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, Args)]
pub struct ClassifyArgs {
    /// Channel file: {"dim", "label", "kraus"} or {"family": ...}.
    #[arg(long, conflicts_with = "family")]
    pub channel: Option<PathBuf>,
    /// Named channel: dephasing, dephasing-clock, identity, swap,
    /// thermalizing:BETA, thermal-mixture:B1,B2, partial-dephasing:C,
    /// extraction-unitary, lambda-beta-tilde:OFFSET.
    #[arg(long)]
    pub family: Option<String>,
    /// Energy levels, comma separated and nondecreasing.
    #[arg(long, value_delimiter = ',', required = true, allow_hyphen_values = true)]
    pub energies: Vec<f64>,
    #[arg(long, value_enum, default_value = "both")]
    pub theory: TheoryArg,
    #[command(flatten)]
    pub config: ConfigArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Args)]
pub struct NcopyArgs {
    #[arg(long)]
    pub state: PathBuf,
    #[arg(long)]
    pub n_max: u32,
    /// Largest `d^n` allowed.
    #[arg(long, default_value_t = workfn::NCOPY_CAP)]
    pub cap: u128,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Args)]
pub struct ReproArgs {
    #[arg(value_enum)]
    pub which: ReproArg,
    #[command(flatten)]
    pub output: OutputArgs,
}

pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Domain(_) | Error::Precondition(_) | Error::CapExceeded { .. } => EXIT_DOMAIN,
        _ => EXIT_INPUT,
    }
}

/// Caps the global rayon pool from `ERGOKIT_THREADS` when set.
pub fn configure_threads() -> Result<()> {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .map_err(|_| Error::Validation(format!("{THREADS_ENV} must be a positive integer, got {raw:?}")))?;
    if n == 0 {
        return Err(Error::Validation(format!("{THREADS_ENV} must be >= 1")));
    }
    // A pool built earlier in the process (tests) is kept.
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

/// Parses arguments, runs the command and returns the exit code.
pub fn run_from_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_INPUT,
            };
        }
    };
    match configure_threads().and_then(|_| run(&cli)) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

pub fn run(cli: &Cli) -> Result<i32> {
    match &cli.command {
        Command::Compute(a) => cmd_compute(a),
        Command::Classify(a) => cmd_classify(a),
        Command::Ncopy(a) => cmd_ncopy(a),
        Command::Repro(a) => cmd_repro(a),
    }
}

fn read_file(path: &PathBuf) -> Result<String> {
    Ok(std::fs::read_to_string(path)?)
}

fn emit(output: &OutputArgs, text: &str) -> Result<()> {
    match &output.out {
        Some(path) => std::fs::write(path, format!("{text}\n"))?,
        None => println!("{text}"),
    }
    Ok(())
}

fn emit_json<T: Serialize + ?Sized>(output: &OutputArgs, value: &T) -> Result<()> {
    emit(output, &io::to_json_string(value)?)
}

fn csv_value(v: &Value) -> String {
    match v {
        Value::Number(n) => n.as_f64().map_or_else(|| n.to_string(), io::csv_float),
        Value::String(s) => s.clone(),
        Value::Null => String::new(),
        other => other.to_string(),
    }
}

/// Flat key/value CSV of the scalar fields of a JSON object.
fn scalar_csv(value: &Value) -> String {
    let mut out = String::from("key,value\n");
    if let Value::Object(map) = value {
        for (k, v) in map {
            if !matches!(v, Value::Object(_) | Value::Array(_)) {
                out.push_str(&format!("{k},{}\n", csv_value(v)));
            }
        }
    }
    out.trim_end().to_string()
}

fn beta_value(beta: Beta) -> Value {
    match beta {
        Beta::Finite(b) => json!(b),
        Beta::Infinite => json!("infinite"),
    }
}

pub fn compute_report(h: &Hamiltonian, rho: &DensityMatrix, args: &ComputeArgs) -> Result<Value> {
    let monotone = |r: geometry::MonotoneResult, what: &str| -> Result<Value> {
        let mut v = serde_json::to_value(&r)?;
        v["what"] = json!(what);
        Ok(v)
    };
    match args.what {
        Quantity::Ergotropy => Ok(json!({"what": "ergotropy", "value": workfn::ergotropy(h, rho)?})),
        Quantity::FreeEnergy => Ok(json!({"what": "free-energy", "value": workfn::free_energy(h, rho)?})),
        Quantity::Beta => {
            let s = workfn::beta_of_state(h, rho)?;
            Ok(json!({
                "what": "beta",
                "value": beta_value(s.beta),
                "achieved_entropy": s.achieved_entropy,
                "residual": s.residual,
            }))
        }
        Quantity::Mcp => monotone(geometry::monotone_mcp(h, rho)?, "mcp"),
        Quantity::Mp => monotone(geometry::monotone_mp(h, rho)?, "mp"),
        Quantity::Family => {
            let r = match args.theory {
                FamilyTheory::P => geometry::family_mp(h, rho, args.alpha, args.nu)?,
                FamilyTheory::Cp => geometry::family_mcp(h, rho, args.alpha, args.nu)?,
            };
            let mut v = monotone(r, "family")?;
            v["alpha"] = json!(args.alpha);
            v["nu"] = json!(args.nu);
            v["theory"] = json!(match args.theory {
                FamilyTheory::P => "p",
                FamilyTheory::Cp => "cp",
            });
            Ok(v)
        }
    }
}

fn cmd_compute(args: &ComputeArgs) -> Result<i32> {
    let (h, rho) = io::read_state(&read_file(&args.state)?)?;
    let report = compute_report(&h, &rho, args)?;
    match args.output.format {
        Format::Json => emit_json(&args.output, &report)?,
        Format::Csv => emit(&args.output, &scalar_csv(&report))?,
    }
    Ok(EXIT_OK)
}

fn parse_numbers(spec: &str) -> Result<Vec<f64>> {
    spec.split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .map_err(|_| Error::Parse(format!("expected a number, got {t:?}")))
        })
        .collect()
}

/// Named channels for `--family`.
pub fn named_channel(spec: &str, h: &Hamiltonian) -> Result<ChannelFamily> {
    let (name, params) = match spec.split_once(':') {
        Some((n, p)) => (n, parse_numbers(p)?),
        None => (spec, Vec::new()),
    };
    let expect = |n: usize| -> Result<()> {
        if params.len() == n {
            Ok(())
        } else {
            Err(Error::Parse(format!("{name} takes {n} parameter(s), got {}", params.len())))
        }
    };
    let fixed = ChannelFamily::Fixed;
    match name {
        "dephasing" => expect(0).map(|_| fixed(channels::dephasing(h))),
        "dephasing-clock" => expect(0).map(|_| fixed(channels::dephasing_clock(h))),
        "identity" => expect(0).map(|_| fixed(channels::identity(h.dim()))),
        "swap" => expect(0).map(|_| fixed(channels::ground_top_swap(h))),
        "thermalizing" => {
            expect(1)?;
            Ok(fixed(channels::thermalizing(h, Beta::Finite(params[0]))?))
        }
        "thermal-mixture" => {
            expect(2)?;
            let a = channels::thermalizing(h, Beta::Finite(params[0]))?;
            let b = channels::thermalizing(h, Beta::Finite(params[1]))?;
            Ok(fixed(
                channels::mixture(&[a, b], &[0.5, 0.5])?.with_label(format!("thermal-mixture({},{})", params[0], params[1])),
            ))
        }
        "partial-dephasing" => {
            expect(1)?;
            let d = h.dim();
            let coeffs = CMatrix::from_fn(d, d, |i, j| {
                crate::linalg::re(if i == j { 1.0 } else { params[0] })
            });
            Ok(fixed(channels::partial_dephasing(h, &coeffs)?))
        }
        "extraction-unitary" => expect(0).map(|_| ChannelFamily::ExtractionUnitary),
        "lambda-beta-tilde" => {
            expect(1)?;
            Ok(ChannelFamily::LambdaBetaTilde { offset: params[0] })
        }
        other => Err(Error::Parse(format!("unknown channel {other:?}"))),
    }
}

fn classify_csv(report: &certify::ClassificationReport) -> String {
    let mut out = String::from("condition,status,trials,lhs,rhs,margin\n");
    for v in &report.verdicts {
        let (l, r, m) = v
            .counterexample
            .as_ref()
            .map(|c| (io::csv_float(c.lhs), io::csv_float(c.rhs), io::csv_float(c.margin)))
            .unwrap_or_default();
        let status = if v.passed() { "pass" } else { "fail" };
        out.push_str(&format!("{},{status},{},{l},{r},{m}\n", v.condition, v.trials));
    }
    out.trim_end().to_string()
}

fn cmd_classify(args: &ClassifyArgs) -> Result<i32> {
    let h = Hamiltonian::new(args.energies.clone())?;
    let family = match (&args.channel, &args.family) {
        (Some(path), None) => io::read_channel(&read_file(path)?)?,
        (None, Some(spec)) => named_channel(spec, &h)?,
        _ => return Err(Error::Validation("give exactly one of --channel or --family".into())),
    };
    let config = args.config.to_config()?;
    let report = certify::classify(&family, &h, args.theory.into(), &config)?;
    match args.output.format {
        Format::Json => emit_json(&args.output, &report)?,
        Format::Csv => emit(&args.output, &classify_csv(&report))?,
    }
    Ok(if report.passed() { EXIT_OK } else { EXIT_FAIL })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NcopyRow {
    pub n: u32,
    pub ergotropy_per_copy: f64,
    pub free_energy: f64,
    pub gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NcopyTable {
    pub rows: Vec<NcopyRow>,
    pub gap_nonincreasing: bool,
}

pub fn ncopy_table(h: &Hamiltonian, rho: &DensityMatrix, n_max: u32, cap: u128) -> Result<NcopyTable> {
    if n_max == 0 {
        return Err(Error::Validation("n-max must be >= 1".into()));
    }
    let size = (h.dim() as u128).checked_pow(n_max).unwrap_or(u128::MAX);
    if size > cap {
        return Err(Error::CapExceeded { size, cap });
    }
    let f = workfn::free_energy(h, rho)?;
    let rows = (1..=n_max)
        .map(|n| {
            let per_copy = workfn::ergotropy_ncopy_capped(h, rho, n, cap)? / n as f64;
            Ok(NcopyRow {
                n,
                ergotropy_per_copy: per_copy,
                free_energy: f,
                gap: f - per_copy,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let gap_nonincreasing = rows.windows(2).all(|w| w[1].gap <= w[0].gap + 1e-12);
    Ok(NcopyTable { rows, gap_nonincreasing })
}

fn cmd_ncopy(args: &NcopyArgs) -> Result<i32> {
    let (h, rho) = io::read_state(&read_file(&args.state)?)?;
    let table = ncopy_table(&h, &rho, args.n_max, args.cap)?;
    match args.output.format {
        Format::Json => emit_json(&args.output, &table)?,
        Format::Csv => {
            let mut out = String::from("n,ergotropy_per_copy,free_energy,gap\n");
            for r in &table.rows {
                out.push_str(&format!(
                    "{},{},{},{}\n",
                    r.n,
                    io::csv_float(r.ergotropy_per_copy),
                    io::csv_float(r.free_energy),
                    io::csv_float(r.gap)
                ));
            }
            emit(&args.output, out.trim_end())?;
        }
    }
    Ok(EXIT_OK)
}

fn cmd_repro(args: &ReproArgs) -> Result<i32> {
    let report = repro::run(args.which.into())?;
    match args.output.format {
        Format::Json => emit_json(&args.output, &report)?,
        Format::Csv => {
            let mut out = String::from("name,key,value,pass\n");
            for item in &report.items {
                for (k, v) in &item.values {
                    out.push_str(&format!("{},{k},{},{}\n", item.name, io::csv_float(*v), item.pass));
                }
            }
            emit(&args.output, out.trim_end())?;
        }
    }
    Ok(if report.passed { EXIT_OK } else { EXIT_FAIL })
}
