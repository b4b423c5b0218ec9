use std::path::{Path, PathBuf};
use std::process::ExitCode;

use cfsim_core::fisher::FisherMode;
use cfsim_core::report::{self, Criterion, RunConfig, Sweep, SweepParam};
use cfsim_core::trace::CouplingModel;
use cfsim_core::{Error, ProtocolName, ProtocolSpec};
use clap::{Args, Parser, Subcommand};

/// Judge counterfactual communication protocols by weak trace and Fisher
/// information.
#[derive(Parser, Debug)]
#[command(name = "cfsim", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Analyze one protocol instance and print a JSON report.
    Run(RunArgs),
    /// Analyze a list of parameter values and print a CSV table.
    Sweep(SweepArgs),
}

#[derive(Args, Debug)]
struct RunArgs {
    /// Protocol name, e.g. ev_ifm, nested_mzi, zeno, k_path.
    #[arg(long)]
    protocol: Option<ProtocolName>,
    /// Bob blocks his sites (bit 1).
    #[arg(long)]
    blocked: bool,
    /// Comma-separated subset of trace,fisher.
    #[arg(long, value_delimiter = ',', value_parser = parse_criterion)]
    criteria: Option<Vec<Criterion>>,
    #[arg(long = "M")]
    m: Option<usize>,
    #[arg(long = "N")]
    n: Option<usize>,
    #[arg(long = "K")]
    k: Option<usize>,
    #[arg(long)]
    epsilon: Option<f64>,
    /// incoherent or coherent.
    #[arg(long, value_parser = parse_enum::<CouplingModel>)]
    coupling: Option<CouplingModel>,
    /// per_site_sum or common_theta.
    #[arg(long, value_parser = parse_enum::<FisherMode>)]
    fisher_mode: Option<FisherMode>,
    /// Use raw rather than postselected probabilities.
    #[arg(long)]
    no_postselect: bool,
    /// JSON file with the same field names as the report config.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Write here instead of stdout.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Counterfactual iff ratio < threshold.
    #[arg(long)]
    verdict_threshold: Option<f64>,
}

#[derive(Args, Debug)]
struct SweepArgs {
    #[command(flatten)]
    run: RunArgs,
    /// One of M, N, K, epsilon.
    #[arg(long)]
    sweep_param: Option<SweepParam>,
    #[arg(long, value_delimiter = ',', num_args = 0..)]
    sweep_values: Option<Vec<f64>>,
    /// Keep N = ratio·M while sweeping M.
    #[arg(long)]
    n_per_m: Option<f64>,
}

fn parse_criterion(s: &str) -> Result<Criterion, String> {
    parse_enum(s)
}

/// Parse a snake_case enum through its serde names.
fn parse_enum<T: serde::de::DeserializeOwned>(s: &str) -> Result<T, String> {
    serde_json::from_value(serde_json::Value::String(s.to_string())).map_err(|e| e.to_string())
}

fn config(args: &RunArgs) -> Result<RunConfig, Error> {
    let mut cfg = match &args.config {
        Some(path) => RunConfig::from_json(&std::fs::read_to_string(path)?)?,
        None => {
            let name = args
                .protocol
                .ok_or_else(|| Error::validation("protocol", "--protocol or --config is required"))?;
            RunConfig::new(ProtocolSpec::new(name))
        }
    };
    if let Some(name) = args.protocol {
        cfg.protocol.name = name;
    }
    let p = &mut cfg.protocol.params;
    p.blocked |= args.blocked;
    p.m = args.m.or(p.m);
    p.n = args.n.or(p.n);
    p.k = args.k.or(p.k);
    if let Some(c) = &args.criteria {
        cfg.criteria = c.iter().copied().collect();
    }
    if let Some(e) = args.epsilon {
        cfg.epsilon = e;
    }
    if let Some(c) = args.coupling {
        cfg.coupling = c;
    }
    if let Some(m) = args.fisher_mode {
        cfg.fisher_mode = m;
    }
    if args.no_postselect {
        cfg.postselected = false;
    }
    if let Some(t) = args.verdict_threshold {
        cfg.verdict_threshold = t;
    }
    if let Some(o) = &args.output {
        cfg.output = Some(o.clone());
    }
    Ok(cfg)
}

fn emit(output: Option<&Path>, text: &str) -> Result<(), Error> {
    match output {
        Some(path) => std::fs::write(path, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn execute(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Run(args) => {
            let cfg = config(&args)?;
            let report = report::run(&cfg)?;
            let mut text = report.to_json()?;
            text.push('\n');
            emit(cfg.output.as_deref(), &text)
        }
        Command::Sweep(args) => {
            let mut cfg = config(&args.run)?;
            let mut sweep = cfg.sweep.take();
            if let Some(param) = args.sweep_param {
                sweep = Some(Sweep {
                    param,
                    values: Vec::new(),
                    n_per_m: None,
                });
            }
            let mut sweep =
                sweep.ok_or_else(|| Error::validation("sweep", "--sweep-param is required"))?;
            if let Some(v) = args.sweep_values {
                sweep.values = v;
            }
            if args.n_per_m.is_some() {
                sweep.n_per_m = args.n_per_m;
            }
            cfg.sweep = Some(sweep);
            let table = report::sweep(&cfg)?;
            emit(cfg.output.as_deref(), &table.to_csv()?)
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Validation { .. } | Error::Json(_) | Error::TooLarge { .. } => 2,
        Error::Unconverged { .. } => 3,
        _ => 1,
    }
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
