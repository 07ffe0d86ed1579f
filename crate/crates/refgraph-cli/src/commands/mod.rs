//! Subcommand implementations, plus the input loading and artifact writing
//! they share.

pub mod analyze;
pub mod export;
pub mod roc;
pub mod score;
pub mod synth;

use std::fs;
use std::path::{Path, PathBuf};

use refgraph::graph::ReferralGraph;
use refgraph::ingest::{
    apply_filters, load_indicators, parse_filter_rules, parse_records_str, IngestStats,
    ThreatIndicator, TrafficRecord,
};

use crate::config::{CliError, RunConfig};

pub struct LoadedTraffic {
    pub records: Vec<TrafficRecord>,
    pub stats: IngestStats,
    pub filtered_out: usize,
    pub indicators: Vec<ThreatIndicator>,
    pub indicator_skips: usize,
}

pub fn read_input(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))
}

/// Read traffic, apply filter rules, and load indicators per the run config.
pub fn load_traffic(config: &RunConfig) -> Result<LoadedTraffic, CliError> {
    let traffic = config.traffic.as_ref().ok_or_else(|| {
        CliError::Usage(
            "no traffic input: pass --traffic or set traffic= in the config file".to_string(),
        )
    })?;
    let (records, stats) = parse_records_str(&read_input(traffic)?);
    let rules = match &config.filters {
        Some(path) => parse_filter_rules(&read_input(path)?)
            .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?,
        None => Vec::new(),
    };
    let before = records.len();
    let records = apply_filters(records, &rules);
    let filtered_out = before - records.len();
    let (indicators, indicator_skips) = match &config.indicators {
        Some(path) => {
            let text = read_input(path)?;
            load_indicators(&text, &path.display().to_string())
        }
        None => (Vec::new(), 0),
    };
    Ok(LoadedTraffic {
        records,
        stats,
        filtered_out,
        indicators,
        indicator_skips,
    })
}

/// Build, label, and seal a graph from loaded traffic. Returns the graph and
/// how many threat nodes were labeled.
pub fn build_graph(loaded: &LoadedTraffic) -> (ReferralGraph, usize) {
    let mut graph = ReferralGraph::new();
    for record in &loaded.records {
        graph
            .add_record(record)
            .expect("the graph is sealed only after all records are added");
    }
    let labeled = graph.label_threats(&loaded.indicators);
    graph.seal();
    (graph, labeled)
}

/// A sealed graph from traffic inputs when given, else from the snapshot a
/// prior analyze run left in the output directory.
pub fn acquire_graph(config: &RunConfig) -> Result<ReferralGraph, CliError> {
    if config.traffic.is_some() {
        let loaded = load_traffic(config)?;
        return Ok(build_graph(&loaded).0);
    }
    let nodes_path = config.out.join("nodes.csv");
    let edges_path = config.out.join("edges.csv");
    if !nodes_path.exists() || !edges_path.exists() {
        return Err(CliError::Usage(format!(
            "no graph available: expected {} and {} from a prior analyze run, or pass --traffic",
            nodes_path.display(),
            edges_path.display()
        )));
    }
    let mut graph =
        ReferralGraph::from_snapshot(&read_input(&nodes_path)?, &read_input(&edges_path)?)
            .map_err(|e| CliError::Data(format!("graph snapshot: {e}")))?;
    graph.seal();
    Ok(graph)
}

/// Write one artifact under the output directory, creating it on demand.
pub fn write_artifact(dir: &Path, name: &str, content: &str) -> Result<PathBuf, CliError> {
    fs::create_dir_all(dir)
        .map_err(|e| CliError::Usage(format!("cannot create {}: {e}", dir.display())))?;
    let path = dir.join(name);
    fs::write(&path, content)
        .map_err(|e| CliError::Usage(format!("cannot write {}: {e}", path.display())))?;
    Ok(path)
}
