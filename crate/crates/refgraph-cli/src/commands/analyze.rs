//! The full pipeline: ingest, graph build, hop distances, path
//! reconstruction, classification, metrics, and all run artifacts.

use std::collections::HashSet;

use refgraph::eval::{classify, emit_roc, export_confusion_csv, export_metrics_csv, metrics_all};
use refgraph::graph::{HopMap, ReferralGraph};
use refgraph::paths::{export_paths_csv, reconstruct, SessionWindow};

use crate::commands::{build_graph, load_traffic, write_artifact, LoadedTraffic};
use crate::config::{fpr_mode_name, window_name, CliError, RunConfig};

pub fn run(config: &RunConfig, dump_paths: bool) -> Result<(), CliError> {
    let loaded = load_traffic(config)?;
    if loaded.records.is_empty() {
        return Err(CliError::Data("no records".to_string()));
    }
    let (graph, labeled) = build_graph(&loaded);
    let hopmap = graph
        .hop_distances(config.max_hops)
        .expect("the graph is sealed and max_hops was validated");
    let window = config.window.resolve(&loaded.records);
    let paths =
        reconstruct(&loaded.records, window).expect("ingest assigns strictly increasing seqs");
    let threats: HashSet<String> = graph.threat_set();
    let matrices = classify(&paths, &hopmap, &threats, config.max_hops)
        .expect("the hop map was computed with the same max_hops");
    let metrics = metrics_all(&matrices);
    let roc = emit_roc(&metrics, config.fpr_mode);

    let out = &config.out;
    write_artifact(out, "confusion.csv", &export_confusion_csv(&matrices))?;
    write_artifact(
        out,
        "metrics.csv",
        &export_metrics_csv(&metrics, config.fpr_mode),
    )?;
    write_artifact(out, "roc.csv", &roc.csv)?;
    write_artifact(out, "roc.svg", &roc.svg)?;
    write_artifact(out, "nodes.csv", &graph.export_nodes_csv())?;
    write_artifact(out, "edges.csv", &graph.export_edges_csv())?;
    write_artifact(out, "hopmap.csv", &hopmap_csv(&hopmap))?;
    if dump_paths {
        write_artifact(out, "paths.csv", &export_paths_csv(&paths))?;
    }
    let summary = summary_text(config, &loaded, &graph, labeled, &hopmap, paths.len(), window);
    write_artifact(out, "summary.txt", &summary)?;
    print!("{summary}");
    if roc.omitted > 0 {
        eprintln!(
            "warning: {} hop level(s) omitted from the roc plot (undefined or out-of-range rates)",
            roc.omitted
        );
    }
    Ok(())
}

fn hopmap_csv(hopmap: &HopMap) -> String {
    let mut writer = csv::Writer::from_writer(Vec::new());
    writer
        .write_record(["domain", "distance"])
        .expect("writing to a Vec cannot fail");
    for (domain, distance) in hopmap.to_sorted_vec() {
        writer
            .write_record([domain.as_str(), &distance.to_string()])
            .expect("writing to a Vec cannot fail");
    }
    String::from_utf8(writer.into_inner().expect("no flush errors on a Vec"))
        .expect("csv output is utf-8")
}

fn summary_text(
    config: &RunConfig,
    loaded: &LoadedTraffic,
    graph: &ReferralGraph,
    labeled: usize,
    hopmap: &HopMap,
    path_count: usize,
    window: SessionWindow,
) -> String {
    let mut s = String::new();
    s.push_str(&format!("traffic lines: {}\n", loaded.stats.lines));
    s.push_str(&format!("records accepted: {}\n", loaded.stats.accepted));
    s.push_str(&format!("records skipped: {}\n", loaded.stats.skipped));
    s.push_str(&format!("records filtered out: {}\n", loaded.filtered_out));
    s.push_str(&format!("records analyzed: {}\n", loaded.records.len()));
    s.push_str(&format!(
        "indicator lines skipped: {}\n",
        loaded.indicator_skips
    ));
    s.push_str(&format!("threats labeled: {labeled}\n"));
    s.push_str(&format!("graph nodes: {}\n", graph.node_count()));
    s.push_str(&format!("graph edges: {}\n", graph.edge_count()));
    s.push_str(&format!(
        "domains within {} hops of a threat: {}\n",
        config.max_hops,
        hopmap.len()
    ));
    s.push_str(&format!("paths reconstructed: {path_count}\n"));
    s.push_str(&format!("session window: {}\n", window_name(window)));
    s.push_str(&format!("fpr mode: {}\n", fpr_mode_name(config.fpr_mode)));
    s
}
