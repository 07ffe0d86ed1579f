//! Risk scoring against an existing graph snapshot or fresh traffic.

use refgraph::risk::{export_scores_csv, score_all};

use crate::commands::{acquire_graph, write_artifact};
use crate::config::{CliError, RunConfig};

pub fn run(config: &RunConfig) -> Result<(), CliError> {
    let graph = acquire_graph(config)?;
    let hopmap = graph
        .hop_distances(config.max_hops)
        .expect("the graph is sealed and max_hops was validated");
    // The weights were built with max_hops = config.max_hops and the graph
    // is sealed, so the only reachable failures are bad risk settings.
    let scores = score_all(&graph, &hopmap, &config.weights, &config.thresholds)
        .map_err(|e| CliError::Usage(format!("risk configuration: {e}")))?;
    let path = write_artifact(&config.out, "scores.csv", &export_scores_csv(&scores))?;
    println!("wrote {} ({} scored domains)", path.display(), scores.len());
    Ok(())
}
