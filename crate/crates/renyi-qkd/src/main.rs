use std::path::PathBuf;
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use renyi_qkd::cli::{self, ScanAxis};
use renyi_qkd::config::{AlphaChoice, RunConfig};
use renyi_qkd::error::Error;

#[derive(Parser)]
#[command(
    name = "renyi-qkd",
    version,
    about = "Certified finite-size key rates for prepare-and-measure QKD"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one pipeline pass (fixed alpha or a grid scan picking the best).
    Run(CommonArgs),
    /// Sweep one axis, one CSV row per value.
    Scan(ScanArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// TOML config; defaults fill anything omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Depolarizing probability of the channel.
    #[arg(long)]
    depol: Option<f64>,
    /// Loss probability of the channel.
    #[arg(long)]
    loss: Option<f64>,
    /// Total number of rounds N.
    #[arg(long)]
    n_total: Option<u64>,
    /// Fraction of rounds used for key generation.
    #[arg(long)]
    p_gen: Option<f64>,
    /// Divergence order in (1, 2], or "scan".
    #[arg(long)]
    alpha: Option<String>,
    /// Error-correction efficiency (>= 1).
    #[arg(long)]
    f_ec: Option<f64>,
    /// Stop threshold on the linearization gap.
    #[arg(long)]
    gap_tol: Option<f64>,
    /// Iteration cap of the minimization loop.
    #[arg(long)]
    max_iters: Option<usize>,
    /// Positivity floor mixed into the channel.
    #[arg(long)]
    eps_perturb: Option<f64>,
    /// CSV destination (appended); stdout if omitted.
    #[arg(long)]
    output: Option<PathBuf>,
    /// JSON run-log destination.
    #[arg(long)]
    runlog: Option<PathBuf>,
}

#[derive(Args)]
struct ScanArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Sweep axis.
    #[arg(long)]
    axis: String,
    /// Comma-separated axis values.
    #[arg(long, value_delimiter = ',', required = true)]
    values: Vec<f64>,
}

fn load_config(args: &CommonArgs) -> Result<RunConfig, Error> {
    let mut cfg = match &args.config {
        Some(path) => RunConfig::from_path(path)?,
        None => RunConfig::default(),
    };
    if let Some(v) = args.depol {
        cfg.depol_p = v;
    }
    if let Some(v) = args.loss {
        cfg.loss = v;
    }
    if let Some(v) = args.n_total {
        cfg.n_total = v;
    }
    if let Some(v) = args.p_gen {
        cfg.p_gen = v;
    }
    if let Some(raw) = &args.alpha {
        cfg.alpha = if raw == "scan" {
            AlphaChoice::Scan
        } else {
            let a = raw.parse::<f64>().map_err(|_| {
                Error::Config(format!("alpha must be a number or \"scan\", got \"{raw}\""))
            })?;
            AlphaChoice::Fixed(a)
        };
    }
    if let Some(v) = args.f_ec {
        cfg.f_ec = v;
    }
    if let Some(v) = args.gap_tol {
        cfg.gap_tol = v;
    }
    if let Some(v) = args.max_iters {
        cfg.max_iters = v;
    }
    if let Some(v) = args.eps_perturb {
        cfg.eps_perturb = v;
    }
    if let Some(v) = &args.output {
        cfg.output_path = Some(v.clone());
    }
    if let Some(v) = &args.runlog {
        cfg.runlog_path = Some(v.clone());
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(command: Command) -> Result<i32, Error> {
    match command {
        Command::Run(args) => {
            let cfg = load_config(&args)?;
            let out = cli::run_single(&cfg)?;
            cli::write_csv(cfg.output_path.as_deref(), &out.csv)?;
            if let Some(path) = &cfg.runlog_path {
                cli::write_runlog(path, &out.runlog)?;
            }
            Ok(out.exit)
        }
        Command::Scan(args) => {
            let cfg = load_config(&args.common)?;
            let axis = ScanAxis::from_str(&args.axis)?;
            let out = cli::run_scan(&cfg, axis, &args.values)?;
            cli::write_csv(cfg.output_path.as_deref(), &out.csv)?;
            Ok(out.exit)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(code) => ExitCode::from(u8::try_from(code).unwrap_or(1)),
        Err(err) => {
            eprintln!("{}", json!({ "error": err.to_string() }));
            ExitCode::from(u8::try_from(cli::exit_code_for_error(&err)).unwrap_or(1))
        }
    }
}
