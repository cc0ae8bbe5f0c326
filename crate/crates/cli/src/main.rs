//! `ehcomm`: offline power allocation, scheme simulation and Monte Carlo
//! sweeps for energy-harvesting AWGN links.
//!
//! Exit codes: 0 success, 1 usage or validation error, 2 bad input data
//! (profile or config file), 3 internal or resource error.

mod config;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use ehcomm::allocation::allocate_optimal;
use ehcomm::arrivals::{generate_trace, ArrivalSpec, SlotProfile};
use ehcomm::coding::Scheme;
use ehcomm::experiments::{run_feasibility_trend, run_fig5_sweep, run_simulation, SimulationSpec};
use ehcomm::Error;

use crate::config::{Overrides, SweepConfig, DEFAULT_SEED};

#[derive(Debug, Parser)]
#[command(name = "ehcomm", version, about = "Energy-harvesting AWGN link simulator and power allocator")]
struct Cli {
    /// Base seed (default 1)
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Write results to this file
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,

    /// Worker threads for Monte Carlo trials
    #[arg(long, global = true, default_value_t = 1)]
    jobs: usize,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Optimal offline power allocation for a slot profile
    Allocate(AllocateArgs),
    /// Simulate save-and-transmit or best-effort-transmit
    Simulate(SimulateArgs),
    /// Run a throughput sweep or feasibility trend from a config file
    Sweep(SweepArgs),
    /// Dump a per-channel-use arrival trace
    Trace(TraceArgs),
}

#[derive(Debug, Args)]
#[group(id = "profile", required = true, multiple = false)]
struct AllocateArgs {
    /// Comma-separated recharge rates, one per slot
    #[arg(long = "p-in", value_delimiter = ',', group = "profile", allow_negative_numbers = true)]
    p_in: Option<Vec<f64>>,

    /// File with one rate per line (`#` comments allowed)
    #[arg(long = "p-in-file", group = "profile")]
    p_in_file: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum SchemeArg {
    Sat,
    Bet,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[arg(long, value_enum)]
    scheme: SchemeArg,

    /// Blocklength
    #[arg(long)]
    n: usize,

    /// Average recharge rate
    #[arg(long)]
    p: f64,

    /// Best-effort power back-off (default P/10)
    #[arg(long)]
    eps: Option<f64>,

    /// Number of messages in the codebook
    #[arg(long, default_value_t = 16)]
    m: usize,

    /// Save-and-transmit zero prefix (default ceil(n^(3/4)))
    #[arg(long)]
    h: Option<usize>,

    #[arg(long, default_value_t = 100)]
    trials: usize,
}

#[derive(Debug, Args)]
struct SweepArgs {
    config: PathBuf,

    /// Validate the config and exit without running or writing anything
    #[arg(long)]
    dry_run: bool,

    /// Override the trial count from the config
    #[arg(long)]
    trials: Option<usize>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum DistArg {
    Constant,
    Exponential,
    BernoulliScaled,
    Uniform,
    Gamma,
}

#[derive(Debug, Args)]
struct TraceArgs {
    #[arg(long, value_enum, default_value_t = DistArg::Exponential)]
    dist: DistArg,

    #[arg(long)]
    mean: f64,

    #[arg(long)]
    n: usize,

    /// Success probability for bernoulli-scaled arrivals
    #[arg(long, default_value_t = 0.5)]
    p_success: f64,

    /// Half-width for uniform arrivals
    #[arg(long, default_value_t = 0.0)]
    half_width: f64,

    /// Standard deviation for gamma arrivals
    #[arg(long)]
    std: Option<f64>,
}

#[derive(Debug)]
enum CliError {
    Usage(String),
    Input(String),
    Internal(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Input(_) => 2,
            CliError::Internal(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Input(m) | CliError::Internal(m) => m,
        }
    }
}

/// Errors while reading user-supplied input.
fn input_error(e: Error) -> CliError {
    match e {
        Error::Parameter(_) | Error::Domain(_) | Error::Precondition(_) => CliError::Usage(e.to_string()),
        Error::Resource(_) => CliError::Internal(e.to_string()),
        Error::Io { .. } | Error::Parse { .. } | Error::Csv { .. } | Error::Json { .. } => {
            CliError::Input(e.to_string())
        }
    }
}

/// Errors while computing or writing results.
fn run_error(e: Error) -> CliError {
    match e {
        Error::Parameter(_) | Error::Domain(_) | Error::Precondition(_) => CliError::Usage(e.to_string()),
        _ => CliError::Internal(e.to_string()),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message().trim_end());
            ExitCode::from(e.code())
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    if cli.jobs == 0 {
        return Err(CliError::Usage("--jobs must be >= 1".into()));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.jobs)
        .build()
        .map_err(|e| CliError::Internal(e.to_string()))?;
    pool.install(|| match &cli.command {
        Command::Allocate(args) => cmd_allocate(&cli, args),
        Command::Simulate(args) => cmd_simulate(&cli, args),
        Command::Sweep(args) => cmd_sweep(&cli, args),
        Command::Trace(args) => cmd_trace(&cli, args),
    })
}

/// Writes to `--out` if given, otherwise to stdout.
fn emit(
    out: Option<&Path>,
    csv: impl FnOnce(&mut dyn Write) -> Result<(), Error>,
) -> Result<(), CliError> {
    match out {
        Some(path) => {
            let mut file = std::fs::File::create(path)
                .map_err(|e| CliError::Internal(format!("{}: {e}", path.display())))?;
            csv(&mut file).map_err(run_error)
        }
        None => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            csv(&mut lock).map_err(run_error)
        }
    }
}

fn csv_to(w: &mut dyn Write, f: impl FnOnce(&mut dyn Write) -> csv::Result<()>) -> Result<(), Error> {
    f(w).map_err(|e| Error::Csv {
        path: "<output>".into(),
        source: e,
    })
}

fn json_to<T: serde::Serialize>(w: &mut dyn Write, value: &T) -> Result<(), Error> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::Json {
        path: "<output>".into(),
        source: e,
    })?;
    writeln!(w, "{text}").map_err(|e| Error::Io {
        path: "<output>".into(),
        source: e,
    })
}

fn fmt_rate(x: f64) -> String {
    format!("{x:.6}")
}

fn cmd_allocate(cli: &Cli, args: &AllocateArgs) -> Result<(), CliError> {
    let profile = match (&args.p_in, &args.p_in_file) {
        (Some(rates), None) => SlotProfile::new(rates.clone()).map_err(input_error)?,
        (None, Some(path)) => SlotProfile::read_file(path).map_err(input_error)?,
        _ => return Err(CliError::Usage("give exactly one of --p-in or --p-in-file".into())),
    };
    let alloc = allocate_optimal(&profile);
    let summary = alloc.summary(&profile);

    let joined = |v: &[f64]| v.iter().map(|x| fmt_rate(*x)).collect::<Vec<_>>().join(",");
    let bps = alloc.breakpoints.iter().map(|b| b.to_string()).collect::<Vec<_>>().join(",");
    println!("slots: {}", profile.len());
    println!("breakpoints: {bps}");
    println!("p_in: {}", joined(profile.rates()));
    println!("p_tr: {}", joined(&alloc.powers));
    println!("t_lb: {}", fmt_rate(summary.t_lb));
    println!("t_opt: {}", fmt_rate(summary.t_opt));
    println!("t_ub: {}", fmt_rate(summary.t_ub));

    if let Some(out) = &cli.out {
        emit(Some(out), |w| match cli.format {
            Format::Csv => csv_to(w, |w| alloc.write_csv(&profile, w)),
            Format::Json => json_to(w, &summary),
        })?;
    }
    Ok(())
}

fn cmd_simulate(cli: &Cli, args: &SimulateArgs) -> Result<(), CliError> {
    let scheme = match args.scheme {
        SchemeArg::Sat => Scheme::SaveAndTransmit,
        SchemeArg::Bet => Scheme::BestEffort,
    };
    let mut spec = SimulationSpec::new(scheme, args.n, args.p, args.trials, cli.seed.unwrap_or(DEFAULT_SEED));
    spec.messages = args.m;
    if let Some(eps) = args.eps {
        spec.eps = eps;
    }
    spec.prefix = args.h;
    spec.validate().map_err(input_error)?;
    let batch = run_simulation(&spec).map_err(run_error)?;
    let s = &batch.summary;

    println!("scheme: {}", scheme.short_name());
    println!("n: {} h: {} P: {} var: {} M: {}", spec.n, spec.prefix_len(), spec.power, spec.symbol_variance(), spec.messages);
    println!("trials: {}", s.trials);
    println!("code_rate: {}", fmt_rate(s.rate));
    println!("decode_error_rate: {}", fmt_rate(s.decode_error_rate));
    println!("unconstrained_error_rate: {}", fmt_rate(s.unconstrained_error_rate));
    println!("infeasible_codeword_rate: {}", fmt_rate(s.infeasible_codeword_rate));
    println!("infeasible_symbol_fraction: {}", fmt_rate(s.infeasible_symbol_fraction));
    println!("second_half_infeasible_fraction: {}", fmt_rate(s.second_half_infeasible_fraction));

    if let Some(out) = &cli.out {
        emit(Some(out), |w| match cli.format {
            Format::Csv => csv_to(w, |w| batch.write_csv(w)),
            Format::Json => json_to(w, &batch),
        })?;
    }
    Ok(())
}

fn cmd_sweep(cli: &Cli, args: &SweepArgs) -> Result<(), CliError> {
    let text = std::fs::read_to_string(&args.config)
        .map_err(|e| CliError::Input(format!("{}: {e}", args.config.display())))?;
    let overrides = Overrides {
        seed: cli.seed,
        trials: args.trials,
    };
    if args.trials == Some(0) {
        return Err(CliError::Usage("--trials must be >= 1".into()));
    }
    let cfg = config::parse(&text, overrides)
        .map_err(|e| CliError::Input(format!("{}: {e}", args.config.display())))?;

    if args.dry_run {
        match &cfg {
            SweepConfig::Fig5(s) => eprintln!(
                "config ok: fig5 sweep, {} std values x {} trials, L = {}",
                s.std_values.len(),
                s.trials,
                s.slots
            ),
            SweepConfig::Feasibility(s) => eprintln!(
                "config ok: {} feasibility trend, {} blocklengths x {} trials",
                s.scheme.short_name(),
                s.n_values.len(),
                s.trials
            ),
        }
        return Ok(());
    }

    let out = cli.out.as_deref();
    match cfg {
        SweepConfig::Fig5(spec) => {
            let result = run_fig5_sweep(&spec).map_err(run_error)?;
            emit(out, |w| match cli.format {
                Format::Csv => csv_to(w, |w| result.write_csv(w)),
                Format::Json => json_to(w, &result),
            })?;
            if out.is_some() {
                for p in &result.points {
                    println!(
                        "std {}: t_lb {} t_opt {} t_ub {}",
                        p.std,
                        fmt_rate(p.t_lb_mean),
                        fmt_rate(p.t_opt_mean),
                        fmt_rate(p.t_ub_mean)
                    );
                }
            }
        }
        SweepConfig::Feasibility(spec) => {
            let table = run_feasibility_trend(&spec).map_err(run_error)?;
            emit(out, |w| match cli.format {
                Format::Csv => csv_to(w, |w| table.write_csv(w)),
                Format::Json => json_to(w, &table),
            })?;
            if out.is_some() {
                for r in &table.rows {
                    println!("{} n {}: violation rate {}", r.scheme.short_name(), r.n, fmt_rate(r.violation_rate));
                }
            }
        }
    }
    Ok(())
}

fn cmd_trace(cli: &Cli, args: &TraceArgs) -> Result<(), CliError> {
    let spec = match args.dist {
        DistArg::Constant => ArrivalSpec::constant(args.mean),
        DistArg::Exponential => ArrivalSpec::exponential(args.mean),
        DistArg::BernoulliScaled => ArrivalSpec::bernoulli_scaled(args.mean, args.p_success),
        DistArg::Uniform => ArrivalSpec::uniform(args.mean, args.half_width),
        DistArg::Gamma => {
            let std = args
                .std
                .ok_or_else(|| CliError::Usage("--std is required for gamma arrivals".into()))?;
            ArrivalSpec::gamma(args.mean, std)
        }
    };
    let trace = generate_trace(&spec, args.n, cli.seed.unwrap_or(DEFAULT_SEED)).map_err(input_error)?;
    emit(cli.out.as_deref(), |w| match cli.format {
        Format::Csv => csv_to(w, |w| trace.write_csv(w)),
        Format::Json => json_to(w, &trace),
    })
}
