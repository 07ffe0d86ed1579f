//! Graphviz DOT rendering of the referral graph, optionally restricted to
//! the neighborhood of one focus domain.

use refgraph::graph::GraphError;

use crate::commands::{acquire_graph, write_artifact};
use crate::config::{CliError, RunConfig};

pub fn run(config: &RunConfig, focus: Option<&str>, radius: u32) -> Result<(), CliError> {
    let graph = acquire_graph(config)?;
    let hopmap = graph
        .hop_distances(config.max_hops)
        .expect("the graph is sealed and max_hops was validated");
    let dot = graph
        .export_dot(&hopmap, focus, radius)
        .map_err(|e| match e {
            GraphError::UnknownFocus(_) => CliError::Usage(e.to_string()),
            other => CliError::Data(other.to_string()),
        })?;
    let path = write_artifact(&config.out, "graph.dot", &dot)?;
    println!("wrote {}", path.display());
    Ok(())
}
