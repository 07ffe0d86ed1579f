//! refgraph: referrer-graph proximity analysis of web traffic against a
//! threat-indicator blocklist.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};
use refgraph::eval::FprMode;
use refgraph::synth::SynthParams;

use crate::config::{CliError, FileConfig, InputArgs, RunConfig};

#[derive(Parser, Debug)]
#[command(
    name = "refgraph",
    version,
    about = "Referrer-graph proximity analysis of web traffic against a threat blocklist",
    arg_required_else_help = true
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run the full pipeline and write evaluation artifacts
    Analyze(AnalyzeArgs),
    /// Score domains by proximity-weighted risk
    Score(ScoreArgs),
    /// Render the referral graph as Graphviz DOT
    Export(ExportArgs),
    /// Generate a deterministic synthetic corpus with ground truth
    Synth(SynthArgs),
    /// Re-emit ROC artifacts from a confusion-matrix CSV
    Roc(RocArgs),
}

#[derive(Args, Debug)]
struct AnalyzeArgs {
    #[command(flatten)]
    common: InputArgs,

    /// Also write the reconstructed paths as paths.csv
    #[arg(long)]
    dump_paths: bool,
}

#[derive(Args, Debug)]
struct ScoreArgs {
    #[command(flatten)]
    common: InputArgs,
}

#[derive(Args, Debug)]
struct ExportArgs {
    #[command(flatten)]
    common: InputArgs,

    /// Restrict output to the neighborhood of this domain
    #[arg(long, value_name = "DOMAIN")]
    focus: Option<String>,

    /// Neighborhood radius around the focus domain
    #[arg(long, value_name = "N")]
    radius: Option<u32>,
}

#[derive(Args, Debug)]
struct SynthArgs {
    #[command(flatten)]
    common: InputArgs,

    /// Generator seed
    #[arg(long, value_name = "N")]
    seed: Option<u64>,

    /// Number of sites
    #[arg(long, value_name = "N")]
    n_sites: Option<usize>,

    /// Number of threat sites (the first sites become the blocklist)
    #[arg(long, value_name = "N")]
    n_threats: Option<usize>,

    /// Fraction of possible directed edges to create, in (0,1)
    #[arg(long, value_name = "D")]
    edge_density: Option<f64>,

    /// Number of navigation walks
    #[arg(long, value_name = "N")]
    n_paths: Option<usize>,

    /// Probability a walk continues one more step, in [0,1]
    #[arg(long, value_name = "P")]
    click_through: Option<f64>,

    /// Maximum walk length
    #[arg(long, value_name = "N")]
    max_len: Option<usize>,
}

#[derive(Args, Debug)]
struct RocArgs {
    /// Confusion-matrix CSV (hop,fp,fn,tp,tn)
    #[arg(value_name = "CSV")]
    input: PathBuf,

    /// False-positive-rate denominator: paper or standard
    #[arg(long, value_name = "MODE")]
    fpr_mode: Option<String>,

    /// Directory artifacts are written to
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
}

fn run() -> Result<(), CliError> {
    let cli = Cli::parse();
    let file = FileConfig::from_env()?;
    match cli.command {
        Command::Analyze(args) => {
            let config = RunConfig::resolve(&args.common, &file)?;
            let dump_paths = args.dump_paths || file.parsed("dump_paths")?.unwrap_or(false);
            commands::analyze::run(&config, dump_paths)
        }
        Command::Score(args) => {
            let config = RunConfig::resolve(&args.common, &file)?;
            commands::score::run(&config)
        }
        Command::Export(args) => {
            let config = RunConfig::resolve(&args.common, &file)?;
            let focus = args
                .focus
                .or_else(|| file.get("focus").map(String::from));
            let radius = match args.radius {
                Some(r) => r,
                None => file.parsed("radius")?.unwrap_or(2),
            };
            commands::export::run(&config, focus.as_deref(), radius)
        }
        Command::Synth(args) => {
            let config = RunConfig::resolve(&args.common, &file)?;
            let params = resolve_synth_params(&args, &file)?;
            commands::synth::run(&config, &params)
        }
        Command::Roc(args) => {
            let fpr_mode = match args.fpr_mode.as_deref().or_else(|| file.get("fpr_mode")) {
                Some(mode) => config::parse_fpr_mode(mode)?,
                None => FprMode::Paper,
            };
            let out = args
                .out
                .or_else(|| file.get("out").map(PathBuf::from))
                .unwrap_or_else(|| PathBuf::from("."));
            commands::roc::run(&args.input, fpr_mode, &out)
        }
    }
}

fn resolve_synth_params(args: &SynthArgs, file: &FileConfig) -> Result<SynthParams, CliError> {
    Ok(SynthParams {
        n_sites: setting(args.n_sites, file, "n_sites", 100)?,
        n_threats: setting(args.n_threats, file, "n_threats", 5)?,
        edge_density: setting(args.edge_density, file, "edge_density", 0.05)?,
        n_paths: setting(args.n_paths, file, "n_paths", 200)?,
        click_through: setting(args.click_through, file, "click_through", 0.7)?,
        max_len: setting(args.max_len, file, "max_len", 10)?,
        seed: setting(args.seed, file, "seed", 0)?,
    })
}

fn setting<T: FromStr>(
    flag: Option<T>,
    file: &FileConfig,
    key: &str,
    default: T,
) -> Result<T, CliError> {
    match flag {
        Some(value) => Ok(value),
        None => Ok(file.parsed(key)?.unwrap_or(default)),
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
