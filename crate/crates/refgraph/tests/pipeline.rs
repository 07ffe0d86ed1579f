//! Whole-pipeline runs over synthetic corpora, checked against the
//! brute-force oracles and the generator's manifest, plus one hand-written
//! corpus driven end to end through every public stage.

use std::collections::{BTreeMap, HashSet};

use refgraph::eval::{classify, metrics_all, ConfusionMatrix};
use refgraph::graph::ReferralGraph;
use refgraph::ingest::{
    apply_filters, load_indicators, parse_filter_rules, parse_records_str, TrafficRecord,
};
use refgraph::paths::{reconstruct, NavigationPath, SessionWindow};
use refgraph::risk::{export_scores_csv, score_all, RiskBand, RiskThresholds, RiskWeights};
use refgraph::synth::{generate, oracle_classify, oracle_hops, SynthParams};

const MAX_HOPS: u32 = 4;

fn corpus_params(seed: u64) -> SynthParams {
    SynthParams {
        n_sites: 30 + (seed as usize % 3) * 15,
        n_threats: 3,
        edge_density: 0.05 + 0.02 * (seed % 2) as f64,
        n_paths: 50,
        click_through: 0.65,
        max_len: 8,
        seed,
    }
}

fn build_graph(
    records: &[TrafficRecord],
    indicators_text: &str,
) -> (ReferralGraph, HashSet<String>) {
    let mut graph = ReferralGraph::new();
    for r in records {
        graph.add_record(r).expect("graph is not sealed yet");
    }
    let (indicators, skipped) = load_indicators(indicators_text, "test");
    assert_eq!(skipped, 0, "indicator inputs in these tests are clean");
    graph.label_threats(&indicators);
    graph.seal();
    let threats = indicators.iter().map(|i| i.domain.clone()).collect();
    (graph, threats)
}

/// Distinct referrer->host pairs in record order, self-loops dropped: the
/// same edge set the graph builds, derived independently for the oracle.
fn observed_edges(records: &[TrafficRecord]) -> Vec<(String, String)> {
    let mut seen = HashSet::new();
    let mut edges = Vec::new();
    for r in records {
        if let Some(referrer) = &r.referrer_host {
            if referrer != &r.host && seen.insert((referrer.clone(), r.host.clone())) {
                edges.push((referrer.clone(), r.host.clone()));
            }
        }
    }
    edges
}

fn threat_outcome(path: &NavigationPath, threats: &HashSet<String>) -> bool {
    path.events.iter().any(|e| threats.contains(&e.domain))
}

#[test]
fn pipeline_matches_both_oracles_across_seeds() {
    for seed in 0..10 {
        let params = corpus_params(seed);
        let out = generate(&params, MAX_HOPS).expect("params are valid");
        let (records, stats) = parse_records_str(&out.records);
        assert_eq!(stats.skipped, 0, "seed {seed}: generator emits clean lines");

        let (graph, threats) = build_graph(&records, &out.indicators);
        let hopmap = graph.hop_distances(MAX_HOPS).expect("sealed, K >= 1");

        let edges = observed_edges(&records);
        let oracle = oracle_hops(&edges, &threats, MAX_HOPS).expect("under the edge cap");
        assert_eq!(
            hopmap.to_sorted_vec(),
            oracle.to_sorted_vec(),
            "seed {seed}: BFS and edge relaxation disagree"
        );

        let window = SessionWindow::default_for(&records);
        assert_eq!(window, SessionWindow::Seq(10_000), "no timestamps in synth output");
        let paths = reconstruct(&records, window).expect("generator output is ordered");
        let ours = classify(&paths, &hopmap, &threats, MAX_HOPS).expect("hop counts match");
        let brute =
            oracle_classify(&records, &threats, MAX_HOPS, window).expect("under the record cap");
        assert_eq!(ours, brute, "seed {seed}: classification disagrees");
    }
}

#[test]
fn manifest_agrees_with_pipeline_output() {
    let params = corpus_params(7);
    let out = generate(&params, MAX_HOPS).expect("params are valid");
    let (records, _) = parse_records_str(&out.records);
    let (graph, threats) = build_graph(&records, &out.indicators);

    let hopmap = graph.hop_distances(MAX_HOPS).expect("sealed, K >= 1");
    let computed: BTreeMap<String, u32> =
        hopmap.iter().map(|(d, h)| (d.to_string(), h)).collect();
    assert_eq!(computed, out.manifest.distances);

    let manifest_threats: HashSet<String> = out.manifest.threats.iter().cloned().collect();
    assert_eq!(manifest_threats, threats);

    let paths = reconstruct(&records, SessionWindow::default_for(&records))
        .expect("generator output is ordered");
    assert_eq!(paths.len(), out.manifest.paths.len(), "one path per walk");
    for path in &paths {
        let expected = out.manifest.paths.get(&path.id).copied();
        assert_eq!(
            expected,
            Some(threat_outcome(path, &threats)),
            "walk {} outcome",
            path.id
        );
    }
}

#[test]
fn classified_counts_partition_the_event_census() {
    let params = corpus_params(3);
    let out = generate(&params, MAX_HOPS).expect("params are valid");
    let (records, _) = parse_records_str(&out.records);
    let (graph, threats) = build_graph(&records, &out.indicators);
    let hopmap = graph.hop_distances(MAX_HOPS).expect("sealed, K >= 1");
    let paths =
        reconstruct(&records, SessionWindow::Seq(10_000)).expect("generator output is ordered");
    let matrices = classify(&paths, &hopmap, &threats, MAX_HOPS).expect("hop counts match");
    assert_eq!(matrices.len(), MAX_HOPS as usize + 1);

    // Census of non-synthetic events by the same distance lens classify uses.
    let mut threat_events = 0u64;
    let mut unmapped_events = 0u64;
    let mut unreferred_mapped = 0u64;
    let mut per_hop = vec![0u64; MAX_HOPS as usize + 1];
    for path in &paths {
        for e in path.events.iter().filter(|e| !e.synthetic) {
            if threats.contains(&e.domain) {
                threat_events += 1;
            } else {
                match hopmap.distance(&e.domain) {
                    Some(h) => {
                        per_hop[h as usize] += 1;
                        if !e.referred {
                            unreferred_mapped += 1;
                        }
                    }
                    None => unmapped_events += 1,
                }
            }
        }
    }

    // Misses and true negatives are population counts, identical at every hop.
    for m in &matrices {
        assert_eq!(m.false_negatives, matrices[0].false_negatives);
        assert_eq!(m.true_negatives, matrices[0].true_negatives);
    }
    assert_eq!(matrices[0].true_negatives, unmapped_events);
    // Every threat arrival is either a hop-0 detection or a miss.
    assert_eq!(
        matrices[0].true_positives + matrices[0].false_negatives,
        threat_events
    );
    assert_eq!(matrices[0].false_positives, unreferred_mapped);
    // Every mapped non-threat arrival at distance h lands in exactly one of
    // that hop's tp/fp cells.
    for h in 1..=MAX_HOPS as usize {
        assert_eq!(
            matrices[h].true_positives + matrices[h].false_positives,
            per_hop[h],
            "hop {h}"
        );
    }
}

#[test]
fn hand_written_corpus_end_to_end() {
    let traffic = concat!(
        "{\"host\":\"tracker.ads.example\",\"uri\":\"/pixel\"}\n",
        "{\"host\":\"a.example\",\"uri\":\"/\"}\n",
        "{\"host\":\"b.example\",\"uri\":\"/p?q=1\",\"referer\":\"http://a.example/\"}\n",
        "{\"host\":\"threat.example\",\"uri\":\"/landing\",\"referer\":\"http://b.example/p\"}\n",
        "{\"host\":\"safe.example\",\"uri\":\"/\"}\n",
    );
    let (records, stats) = parse_records_str(traffic);
    assert_eq!(stats.accepted, 5);

    let rules = parse_filter_rules("suffix:ads.example\n").expect("rule text is well formed");
    let records = apply_filters(records, &rules);
    assert_eq!(records.len(), 4, "the tracker line is filtered out");

    let (graph, threats) = build_graph(&records, "threat.example\n");
    let hopmap = graph.hop_distances(MAX_HOPS).expect("sealed, K >= 1");
    assert_eq!(hopmap.distance("threat.example"), Some(0));
    assert_eq!(hopmap.distance("b.example"), Some(1));
    assert_eq!(hopmap.distance("a.example"), Some(2));
    assert_eq!(hopmap.distance("safe.example"), None);
    assert_eq!(
        graph.related_within(MAX_HOPS).expect("sealed"),
        vec![("b.example".to_string(), 1), ("a.example".to_string(), 2)]
    );

    let paths = reconstruct(&records, SessionWindow::default_for(&records))
        .expect("seqs are increasing");
    assert_eq!(paths.len(), 2, "the chain and the lone safe visit");
    assert_eq!(paths[0].events.len(), 3);

    let matrices = classify(&paths, &hopmap, &threats, MAX_HOPS).expect("hop counts match");
    let expect = |hop, tp, fp| ConfusionMatrix {
        hop,
        true_positives: tp,
        false_positives: fp,
        false_negatives: 0,
        true_negatives: 1,
    };
    assert_eq!(
        matrices,
        vec![
            expect(0, 1, 1), // referred threat arrival; unreferred arrival at a
            expect(1, 1, 0), // b, one click out, path does reach the threat
            expect(2, 1, 0), // a, two clicks out, same path
            expect(3, 0, 0),
            expect(4, 0, 0),
        ]
    );

    let metrics = metrics_all(&matrices);
    assert_eq!(metrics[1].tpr, Some(1.0));
    assert_eq!(metrics[1].fpr_paper, Some(0.0));
    assert_eq!(metrics[0].precision, Some(0.5));

    let scores = score_all(
        &graph,
        &hopmap,
        &RiskWeights::default(),
        &RiskThresholds::default(),
    )
    .expect("sealed and hop counts match");
    assert_eq!(scores.len(), 2, "threats and unrelated domains carry no score rows");
    assert_eq!(scores[0].domain, "b.example");
    assert_eq!(scores[0].value, 4.0);
    assert_eq!(scores[0].band, RiskBand::Silent);
    assert_eq!(scores[1].domain, "a.example");
    assert_eq!(scores[1].value, 2.0);

    let csv = export_scores_csv(&scores);
    assert!(csv.contains("b.example,4.0000,silent,threat.example@1"));
    assert!(csv.contains("a.example,2.0000,silent,threat.example@2"));

    let dot = graph
        .export_dot(&hopmap, None, 0)
        .expect("no focus, radius unused");
    assert!(dot.contains("octagon"), "threat nodes get the threat shape");
    assert!(dot.contains("\"a.example\" -> \"b.example\""));
}
