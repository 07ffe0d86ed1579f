//! Re-emit ROC artifacts from a previously written confusion-matrix CSV.

use std::path::Path;

use refgraph::eval::{emit_roc, metrics_all, parse_confusion_csv, FprMode};

use crate::commands::{read_input, write_artifact};
use crate::config::CliError;

pub fn run(input: &Path, fpr_mode: FprMode, out: &Path) -> Result<(), CliError> {
    let matrices = parse_confusion_csv(&read_input(input)?)
        .map_err(|e| CliError::Data(format!("{}: {e}", input.display())))?;
    let metrics = metrics_all(&matrices);
    let artifacts = emit_roc(&metrics, fpr_mode);
    let csv_path = write_artifact(out, "roc.csv", &artifacts.csv)?;
    let svg_path = write_artifact(out, "roc.svg", &artifacts.svg)?;
    println!("wrote {} and {}", csv_path.display(), svg_path.display());
    if artifacts.omitted > 0 {
        eprintln!(
            "warning: {} hop level(s) omitted from the roc plot (undefined or out-of-range rates)",
            artifacts.omitted
        );
    }
    Ok(())
}
