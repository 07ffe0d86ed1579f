//! Synthetic corpus generation: traffic records, matching indicators, and a
//! ground-truth manifest for round-trip checks.

use refgraph::synth::{generate, SynthParams};

use crate::commands::write_artifact;
use crate::config::{CliError, RunConfig};

pub fn run(config: &RunConfig, params: &SynthParams) -> Result<(), CliError> {
    let output = generate(params, config.max_hops).map_err(|e| CliError::Usage(e.to_string()))?;
    let records_path = write_artifact(&config.out, "records.jsonl", &output.records)?;
    write_artifact(&config.out, "indicators.txt", &output.indicators)?;
    write_artifact(&config.out, "manifest.json", &output.manifest.to_json())?;
    println!(
        "wrote {} ({} records, {} threats, {} walks)",
        records_path.display(),
        output.records.lines().count(),
        output.manifest.threats.len(),
        output.manifest.paths.len()
    );
    Ok(())
}
