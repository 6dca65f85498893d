//! `riesz-lab`: command-line front end for the numerical toolkit.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(name = "riesz-lab", version, about = "Bochner–Riesz means on weighted Hardy spaces, numerically")]
struct Cli {
    /// Raise the log level (repeatable); `RUST_LOG` overrides it.
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Sample the kernel and estimate its weighted decay envelope.
    Kernel(KernelArgs),
    /// Apply the operator, or its maximal version, to a grid snapshot.
    Operator(OperatorArgs),
    /// Estimate Muckenhoupt constants and the critical index of a weight.
    Weights(WeightsArgs),
    /// Strong, weak and Hardy-type norms of a grid snapshot.
    Norms(NormsArgs),
    /// Construct and validate a seeded atom.
    Atom(AtomArgs),
    /// Run the configured checks and write a report.
    Verify(VerifyArgs),
}

#[derive(Args, Debug)]
struct GridArgs {
    /// Box half-width.
    #[arg(long = "L", default_value_t = 32.0)]
    half_width: f64,
    /// Points per axis (power of two).
    #[arg(long = "M", default_value_t = 8192)]
    points: usize,
}

#[derive(Args, Debug)]
struct KernelArgs {
    #[arg(long, default_value_t = 1)]
    n: usize,
    #[arg(long, default_value_t = 2.0 / 3.0)]
    p: f64,
    /// Dilation radius of the kernel.
    #[arg(long = "R", default_value_t = 1.0)]
    big_r: f64,
    /// Largest scanned distance.
    #[arg(long, default_value_t = 100.0)]
    radius: f64,
    #[arg(long, default_value_t = 2)]
    alpha_max: usize,
    #[arg(long, default_value = "riesz-lab-out")]
    out: PathBuf,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum Route {
    Spectral,
    Convolution,
    Maximal,
}

#[derive(Args, Debug)]
struct OperatorArgs {
    /// Grid snapshot CSV (with its JSON header alongside).
    #[arg(long)]
    input: PathBuf,
    /// Radius, or the smallest radius of the maximal sweep.
    #[arg(long = "R")]
    big_r: f64,
    #[arg(long)]
    delta: f64,
    #[arg(long, value_enum, default_value_t = Route::Spectral)]
    route: Route,
    /// Radii `R · 2^{k/2}` of the maximal sweep.
    #[arg(long, default_value_t = 16)]
    count: usize,
    #[arg(long, default_value = "riesz-lab-out")]
    out: PathBuf,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum WeightKindArg {
    Constant,
    Power,
    Tabulated,
}

#[derive(Args, Debug)]
struct WeightsArgs {
    #[arg(long, value_enum, default_value_t = WeightKindArg::Power)]
    kind: WeightKindArg,
    /// Exponent of `|x|^a`.
    #[arg(long, allow_hyphen_values = true, default_value_t = -0.5)]
    a: f64,
    /// Value of a constant weight.
    #[arg(long, default_value_t = 1.0)]
    c: f64,
    /// Snapshot of a tabulated weight.
    #[arg(long)]
    file: Option<PathBuf>,
    #[arg(long, default_value_t = 2.0)]
    q: f64,
    #[arg(long, default_value_t = 1)]
    n: usize,
    #[arg(long = "L", default_value_t = 4.0)]
    half_width: f64,
    #[arg(long = "M", default_value_t = 1024)]
    points: usize,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum NormKindArg {
    Strong,
    Weak,
    Hardy,
    WeakHardy,
    All,
}

#[derive(Args, Debug)]
struct NormsArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    p: f64,
    /// `lebesgue`, `constant:C`, `power:A`, `file:PATH` or a JSON weight object.
    #[arg(long, default_value = "lebesgue", allow_hyphen_values = true)]
    weight: String,
    #[arg(long, value_enum, default_value_t = NormKindArg::All)]
    kind: NormKindArg,
}

#[derive(Args, Debug)]
struct AtomArgs {
    #[arg(long, default_value_t = 1)]
    n: usize,
    #[arg(long, default_value_t = 2.0 / 3.0)]
    p: f64,
    #[arg(long, default_value_t = 2.0)]
    q: f64,
    /// Moment order; the moment index of the weight when absent.
    #[arg(long)]
    s: Option<usize>,
    /// Cube side.
    #[arg(long, default_value_t = 1.0)]
    r: f64,
    /// Cube centre, one coordinate per axis.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    center: Option<Vec<f64>>,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value = "lebesgue", allow_hyphen_values = true)]
    weight: String,
    #[command(flatten)]
    grid: GridArgs,
    #[arg(long, default_value = "riesz-lab-out")]
    out: PathBuf,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum FormatArg {
    Json,
    Csv,
    Svg,
}

#[derive(Args, Debug)]
struct VerifyArgs {
    /// Experiment config; defaults apply when absent.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Checks to run, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "all")]
    check: Vec<String>,
    /// Output directory; overrides the config.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, value_delimiter = ',')]
    format: Option<Vec<FormatArg>>,
}

fn init_logging(verbose: u8) {
    let level = match verbose {
        0 => "warn",
        1 => "info",
        2 => "debug",
        _ => "trace",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();
}

fn init_threads() -> anyhow::Result<()> {
    if let Ok(v) = std::env::var("RIESZ_LAB_THREADS") {
        let threads: usize = v
            .trim()
            .parse()
            .map_err(|_| anyhow::anyhow!("RIESZ_LAB_THREADS must be a positive integer, got {v:?}"))?;
        if threads == 0 {
            anyhow::bail!("RIESZ_LAB_THREADS must be positive");
        }
        rayon::ThreadPoolBuilder::new().num_threads(threads).build_global()?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    init_logging(cli.verbose);
    let result = init_threads().and_then(|_| commands::run(cli.command));
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
