//! Run configuration. Settings come from three layers: built-in defaults,
//! a flat key=value config file named by the REFGRAPH_CONFIG environment
//! variable, and command-line flags. Later layers win.

use std::collections::HashMap;
use std::env;
use std::fmt;
use std::fs;
use std::path::PathBuf;
use std::str::FromStr;

use clap::Args;
use refgraph::eval::FprMode;
use refgraph::ingest::TrafficRecord;
use refgraph::paths::SessionWindow;
use refgraph::risk::{RiskThresholds, RiskWeights};

pub const CONFIG_ENV: &str = "REFGRAPH_CONFIG";

/// Every key the config file may contain. Unknown keys are rejected so a
/// typo cannot silently change an analysis.
const KNOWN_KEYS: &[&str] = &[
    "traffic",
    "indicators",
    "filters",
    "max_hops",
    "window",
    "fpr_mode",
    "out",
    "focus",
    "radius",
    "seed",
    "dump_paths",
    "risk_base",
    "risk_decay",
    "warn_at",
    "block_at",
    "n_sites",
    "n_threats",
    "edge_density",
    "n_paths",
    "click_through",
    "max_len",
];

/// Failures split by exit class: usage errors are bad invocations, broken
/// configuration, or unavailable files (exit 2); data errors are input
/// content that cannot be processed (exit 1).
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Data(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Data(_) => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(msg) | CliError::Data(msg) => f.write_str(msg),
        }
    }
}

/// Flags shared by the pipeline subcommands. Every flag falls back to the
/// same-named config key, then to the built-in default.
#[derive(Args, Debug, Default)]
pub struct InputArgs {
    /// Traffic records, one JSON object per line
    #[arg(long, value_name = "FILE")]
    pub traffic: Option<PathBuf>,

    /// Threat indicators, one domain per line
    #[arg(long, value_name = "FILE")]
    pub indicators: Option<PathBuf>,

    /// Filter rules: domain:<name> or suffix:<name>, one per line
    #[arg(long, value_name = "FILE")]
    pub filters: Option<PathBuf>,

    /// Hop horizon for proximity analysis
    #[arg(long, value_name = "K")]
    pub max_hops: Option<u32>,

    /// Session window: auto, unbounded, seq:<n>, or seconds:<n>
    #[arg(long, value_name = "SPEC")]
    pub window: Option<String>,

    /// False-positive-rate denominator: paper or standard
    #[arg(long, value_name = "MODE")]
    pub fpr_mode: Option<String>,

    /// Directory artifacts are written to
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
}

/// Session window selection: an explicit bound, or auto-pick from the
/// records at hand.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WindowSpec {
    Auto,
    Fixed(SessionWindow),
}

impl WindowSpec {
    pub fn resolve(self, records: &[TrafficRecord]) -> SessionWindow {
        match self {
            WindowSpec::Auto => SessionWindow::default_for(records),
            WindowSpec::Fixed(window) => window,
        }
    }
}

pub fn parse_window(text: &str) -> Result<WindowSpec, CliError> {
    let spec = text.trim();
    if spec == "auto" {
        return Ok(WindowSpec::Auto);
    }
    if spec == "unbounded" {
        return Ok(WindowSpec::Fixed(SessionWindow::Unbounded));
    }
    let parsed = spec
        .split_once(':')
        .and_then(|(kind, n)| Some((kind, n.parse::<u64>().ok()?)));
    match parsed {
        Some(("seq", n)) => Ok(WindowSpec::Fixed(SessionWindow::Seq(n))),
        Some(("seconds", n)) => Ok(WindowSpec::Fixed(SessionWindow::Seconds(n))),
        _ => Err(CliError::Usage(format!(
            "invalid window {text:?}: expected auto, unbounded, seq:<n>, or seconds:<n>"
        ))),
    }
}

pub fn window_name(window: SessionWindow) -> String {
    match window {
        SessionWindow::Seq(n) => format!("seq:{n}"),
        SessionWindow::Seconds(n) => format!("seconds:{n}"),
        SessionWindow::Unbounded => "unbounded".to_string(),
    }
}

pub fn parse_fpr_mode(text: &str) -> Result<FprMode, CliError> {
    match text.trim() {
        "paper" => Ok(FprMode::Paper),
        "standard" => Ok(FprMode::Standard),
        other => Err(CliError::Usage(format!(
            "invalid fpr mode {other:?}: expected paper or standard"
        ))),
    }
}

pub fn fpr_mode_name(mode: FprMode) -> &'static str {
    match mode {
        FprMode::Paper => "paper",
        FprMode::Standard => "standard",
    }
}

/// The config file contents: validated keys, raw string values.
#[derive(Debug, Default)]
pub struct FileConfig {
    values: HashMap<String, String>,
}

impl FileConfig {
    /// Load the file named by REFGRAPH_CONFIG, or an empty config when the
    /// variable is unset or blank.
    pub fn from_env() -> Result<FileConfig, CliError> {
        match env::var(CONFIG_ENV) {
            Ok(path) if !path.trim().is_empty() => {
                let text = fs::read_to_string(&path).map_err(|e| {
                    CliError::Usage(format!("cannot read config file {path}: {e}"))
                })?;
                FileConfig::parse(&text, &path)
            }
            _ => Ok(FileConfig::default()),
        }
    }

    pub fn parse(text: &str, origin: &str) -> Result<FileConfig, CliError> {
        let mut values = HashMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(CliError::Usage(format!(
                    "{origin}:{}: expected key=value, got {line:?}",
                    i + 1
                )));
            };
            let key = key.trim();
            if !KNOWN_KEYS.contains(&key) {
                return Err(CliError::Usage(format!(
                    "{origin}:{}: unknown config key {key:?}",
                    i + 1
                )));
            }
            values.insert(key.to_string(), value.trim().to_string());
        }
        Ok(FileConfig { values })
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    /// Typed lookup; a present but unparsable value is a usage error.
    pub fn parsed<T: FromStr>(&self, key: &str) -> Result<Option<T>, CliError> {
        match self.get(key) {
            None => Ok(None),
            Some(raw) => raw.parse().map(Some).map_err(|_| {
                CliError::Usage(format!("config key {key}: invalid value {raw:?}"))
            }),
        }
    }
}

/// Fully resolved settings for one run.
#[derive(Debug)]
pub struct RunConfig {
    pub traffic: Option<PathBuf>,
    pub indicators: Option<PathBuf>,
    pub filters: Option<PathBuf>,
    pub max_hops: u32,
    pub window: WindowSpec,
    pub fpr_mode: FprMode,
    pub out: PathBuf,
    pub weights: RiskWeights,
    pub thresholds: RiskThresholds,
}

impl RunConfig {
    pub fn resolve(args: &InputArgs, file: &FileConfig) -> Result<RunConfig, CliError> {
        let max_hops = match args.max_hops {
            Some(k) => k,
            None => file.parsed("max_hops")?.unwrap_or(4),
        };
        if max_hops < 1 {
            return Err(CliError::Usage("max hops must be at least 1".to_string()));
        }
        let window = match args.window.as_deref().or_else(|| file.get("window")) {
            Some(spec) => parse_window(spec)?,
            None => WindowSpec::Auto,
        };
        let fpr_mode = match args.fpr_mode.as_deref().or_else(|| file.get("fpr_mode")) {
            Some(mode) => parse_fpr_mode(mode)?,
            None => FprMode::Paper,
        };
        let default_weights = RiskWeights::default();
        let weights = RiskWeights {
            base: file.parsed("risk_base")?.unwrap_or(default_weights.base),
            decay: file.parsed("risk_decay")?.unwrap_or(default_weights.decay),
            max_hops,
        };
        let default_thresholds = RiskThresholds::default();
        let thresholds = RiskThresholds {
            warn_at: file.parsed("warn_at")?.unwrap_or(default_thresholds.warn_at),
            block_at: file
                .parsed("block_at")?
                .unwrap_or(default_thresholds.block_at),
        };
        Ok(RunConfig {
            traffic: path_setting(args.traffic.clone(), file, "traffic"),
            indicators: path_setting(args.indicators.clone(), file, "indicators"),
            filters: path_setting(args.filters.clone(), file, "filters"),
            max_hops,
            window,
            fpr_mode,
            out: path_setting(args.out.clone(), file, "out")
                .unwrap_or_else(|| PathBuf::from(".")),
            weights,
            thresholds,
        })
    }
}

fn path_setting(flag: Option<PathBuf>, file: &FileConfig, key: &str) -> Option<PathBuf> {
    flag.or_else(|| file.get(key).map(PathBuf::from))
}
