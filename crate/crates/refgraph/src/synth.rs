//! Deterministic synthetic traffic and brute-force oracles.
//!
//! Real captures at the scale this tool targets are not shippable, so tests
//! and acceptance runs use generated traffic: a random site graph, random
//! walks over it emitted as capture lines, and a ground-truth manifest of
//! hop distances and per-path threat outcomes. Everything is driven by one
//! fixed RNG stream, so a seed pins the output bytes exactly.
//!
//! The oracles recompute hop distances (edge relaxation) and classification
//! (quadratic stitching plus a literal reading of the class definitions)
//! without touching the graph or eval code paths, at sizes where brute
//! force is affordable.

use std::collections::{BTreeMap, HashMap, HashSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::eval::ConfusionMatrix;
use crate::graph::HopMap;
use crate::ingest::TrafficRecord;
use crate::paths::SessionWindow;

/// Shape of the generated world.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthParams {
    pub n_sites: usize,
    /// The first `n_threats` sites are the blocklist.
    pub n_threats: usize,
    /// Fraction of the n·(n−1) possible directed edges to create.
    pub edge_density: f64,
    /// Number of random walks (one navigation session each).
    pub n_paths: usize,
    /// Probability a walk takes one more step.
    pub click_through: f64,
    pub max_len: usize,
    pub seed: u64,
}

impl SynthParams {
    fn validate(&self) -> Result<(), SynthError> {
        if self.n_sites == 0 {
            return Err(SynthError::InvalidParams("n_sites must be at least 1"));
        }
        if self.n_threats > self.n_sites {
            return Err(SynthError::InvalidParams("n_threats exceeds n_sites"));
        }
        if !(self.edge_density > 0.0 && self.edge_density < 1.0) {
            return Err(SynthError::InvalidParams("edge_density must be in (0, 1)"));
        }
        if !(0.0..=1.0).contains(&self.click_through) {
            return Err(SynthError::InvalidParams("click_through must be in [0, 1]"));
        }
        if self.max_len < 1 {
            return Err(SynthError::InvalidParams("max_len must be at least 1"));
        }
        Ok(())
    }
}

/// Ground truth for one generated dataset.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    /// Minimum hops to a threat over the edges that actually occur in the
    /// emitted records (walks need not cover every sampled edge).
    pub distances: BTreeMap<String, u32>,
    /// Walk id → some visit in the walk lands on a threat.
    pub paths: BTreeMap<u64, bool>,
    pub threats: Vec<String>,
}

impl Manifest {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("manifest serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Manifest, SynthError> {
        serde_json::from_str(text).map_err(|e| SynthError::Manifest(e.to_string()))
    }
}

/// One generated dataset: capture lines, blocklist, ground truth.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SynthOutput {
    /// JSON lines, ready for ingest.
    pub records: String,
    /// Indicator file content, one domain per line.
    pub indicators: String,
    pub manifest: Manifest,
}

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid synth parameters: {0}")]
    InvalidParams(&'static str),
    #[error("oracle input too large: {got} {what} (limit {limit})")]
    Oversize {
        what: &'static str,
        got: usize,
        limit: usize,
    },
    #[error("malformed manifest: {0}")]
    Manifest(String),
}

/// SplitMix64: a fixed, portable 64-bit generator, so identical seeds give
/// identical streams on every platform. Statistical quality beyond that is
/// irrelevant here, as is the slight modulo bias in [`below`].
///
/// [`below`]: SplitMix64::below
struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    fn new(seed: u64) -> Self {
        SplitMix64 { state: seed }
    }

    fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    fn below(&mut self, n: usize) -> usize {
        (self.next_u64() % n as u64) as usize
    }

    /// Uniform in [0, 1).
    fn unit(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 / (1u64 << 53) as f64
    }
}

#[derive(Serialize)]
struct RawRecordOut<'a> {
    host: &'a str,
    uri: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    referer: Option<String>,
}

/// Generate one dataset. `max_hops` caps the manifest's distance table; it
/// must match the analysis the output will be fed to.
///
/// RNG draw order is part of the format: first the edge sample, then per
/// walk its start site, then per step one continuation draw followed by one
/// neighbor draw.
pub fn generate(params: &SynthParams, max_hops: u32) -> Result<SynthOutput, SynthError> {
    params.validate()?;
    if max_hops < 1 {
        return Err(SynthError::InvalidParams("max_hops must be at least 1"));
    }
    let mut rng = SplitMix64::new(params.seed);
    let n = params.n_sites;
    let sites: Vec<String> = (0..n).map(|i| format!("site{i}.example")).collect();
    let threats: Vec<String> = sites[..params.n_threats].to_vec();

    // Sampled topology. Walks traverse these; only traversed edges become
    // records, so ground-truth distances use the observed subset below.
    let possible = n * n.saturating_sub(1);
    let target = (params.edge_density * possible as f64).round() as usize;
    let mut edge_set: HashSet<(usize, usize)> = HashSet::new();
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
    while edge_set.len() < target {
        let from = rng.below(n);
        let to = rng.below(n);
        if from != to && edge_set.insert((from, to)) {
            adj[from].push(to);
        }
    }

    let mut lines = String::new();
    let mut observed: HashSet<(usize, usize)> = HashSet::new();
    let mut observed_list: Vec<(usize, usize)> = Vec::new();
    let mut path_outcomes: BTreeMap<u64, bool> = BTreeMap::new();
    for walk_id in 0..params.n_paths {
        let mut cur = rng.below(n);
        let mut reached = cur < params.n_threats;
        let mut step = 0usize;
        push_line(&mut lines, &sites[cur], walk_id, step, None);
        while step + 1 < params.max_len {
            if rng.unit() >= params.click_through {
                break;
            }
            if adj[cur].is_empty() {
                break;
            }
            let next = adj[cur][rng.below(adj[cur].len())];
            if observed.insert((cur, next)) {
                observed_list.push((cur, next));
            }
            let referer = format!("http://{}/{}/{}", sites[cur], walk_id, step);
            step += 1;
            push_line(&mut lines, &sites[next], walk_id, step, Some(referer));
            cur = next;
            reached = reached || cur < params.n_threats;
        }
        path_outcomes.insert(walk_id as u64, reached);
    }

    let named_edges: Vec<(String, String)> = observed_list
        .iter()
        .map(|&(f, t)| (sites[f].clone(), sites[t].clone()))
        .collect();
    let threat_set: HashSet<String> = threats.iter().cloned().collect();
    let distances = relax_distances(&named_edges, &threat_set, max_hops);

    let mut indicators = String::new();
    for t in &threats {
        indicators.push_str(t);
        indicators.push('\n');
    }

    Ok(SynthOutput {
        records: lines,
        indicators,
        manifest: Manifest {
            distances: distances.into_iter().collect(),
            paths: path_outcomes,
            threats,
        },
    })
}

fn push_line(lines: &mut String, host: &str, walk_id: usize, step: usize, referer: Option<String>) {
    let record = RawRecordOut {
        host,
        uri: format!("/{walk_id}/{step}"),
        referer,
    };
    lines.push_str(&serde_json::to_string(&record).expect("record serializes"));
    lines.push('\n');
}

/// Shortest hop distances by K rounds of edge relaxation. Deliberately not
/// a BFS: this is the independent check the BFS is measured against.
fn relax_distances(
    edges: &[(String, String)],
    threats: &HashSet<String>,
    max_hops: u32,
) -> HashMap<String, u32> {
    let mut dist: HashMap<String, u32> = threats.iter().map(|t| (t.clone(), 0)).collect();
    for _ in 0..max_hops {
        let mut changed = false;
        for (from, to) in edges {
            // A user on `from` can click to `to`; one more hop than `to`.
            if let Some(&h) = dist.get(to) {
                if h < max_hops {
                    let candidate = h + 1;
                    let current = dist.get(from).copied().unwrap_or(u32::MAX);
                    if candidate < current {
                        dist.insert(from.clone(), candidate);
                        changed = true;
                    }
                }
            }
        }
        if !changed {
            break;
        }
    }
    dist
}

const ORACLE_EDGE_LIMIT: usize = 1000;
const ORACLE_RECORD_LIMIT: usize = 10_000;

/// Brute-force hop distances over an explicit edge list.
pub fn oracle_hops(
    edges: &[(String, String)],
    threats: &HashSet<String>,
    max_hops: u32,
) -> Result<HopMap, SynthError> {
    if edges.len() > ORACLE_EDGE_LIMIT {
        return Err(SynthError::Oversize {
            what: "edges",
            got: edges.len(),
            limit: ORACLE_EDGE_LIMIT,
        });
    }
    if max_hops < 1 {
        return Err(SynthError::InvalidParams("max_hops must be at least 1"));
    }
    Ok(HopMap::new(
        max_hops,
        relax_distances(edges, threats, max_hops),
    ))
}

/// Brute-force classification: re-derives distances from the records, then
/// restitches paths quadratically and tallies each class by its literal
/// definition. Shares nothing with the production classify path.
pub fn oracle_classify(
    records: &[TrafficRecord],
    threats: &HashSet<String>,
    max_hops: u32,
    window: SessionWindow,
) -> Result<Vec<ConfusionMatrix>, SynthError> {
    if records.len() > ORACLE_RECORD_LIMIT {
        return Err(SynthError::Oversize {
            what: "records",
            got: records.len(),
            limit: ORACLE_RECORD_LIMIT,
        });
    }
    if max_hops < 1 {
        return Err(SynthError::InvalidParams("max_hops must be at least 1"));
    }

    let mut edges: Vec<(String, String)> = Vec::new();
    let mut seen: HashSet<(String, String)> = HashSet::new();
    for r in records {
        if let Some(referrer) = &r.referrer_host {
            if referrer != &r.host {
                let pair = (referrer.clone(), r.host.clone());
                if seen.insert(pair.clone()) {
                    edges.push(pair);
                }
            }
        }
    }
    let dist = relax_distances(&edges, threats, max_hops);

    struct Event {
        seq: i64,
        ts: Option<i64>,
        domain: String,
        referred: bool,
        synthetic: bool,
    }
    let mut paths: Vec<Vec<Event>> = Vec::new();
    for r in records {
        let event = Event {
            seq: r.seq as i64,
            ts: r.timestamp,
            domain: r.host.clone(),
            referred: r.referrer_host.is_some(),
            synthetic: false,
        };
        match &r.referrer_host {
            None => paths.push(vec![event]),
            Some(referrer) => {
                // Scan everything, keep the candidate with the latest event.
                let mut best: Option<usize> = None;
                for (i, p) in paths.iter().enumerate() {
                    let last = p.last().expect("paths are never empty");
                    if &last.domain != referrer {
                        continue;
                    }
                    let inside = match window {
                        SessionWindow::Unbounded => true,
                        SessionWindow::Seq(w) => (r.seq as i64 - last.seq) as u64 <= w,
                        SessionWindow::Seconds(w) => match (r.timestamp, last.ts) {
                            (Some(now), Some(then)) => now < then || (now - then) as u64 <= w,
                            _ => true,
                        },
                    };
                    if inside && best.map(|b| paths[b].last().unwrap().seq < last.seq).unwrap_or(true)
                    {
                        best = Some(i);
                    }
                }
                match best {
                    Some(i) => paths[i].push(event),
                    None => paths.push(vec![
                        Event {
                            seq: r.seq as i64 - 1,
                            ts: r.timestamp,
                            domain: referrer.clone(),
                            referred: false,
                            synthetic: true,
                        },
                        event,
                    ]),
                }
            }
        }
    }

    let k = max_hops as usize;
    let mut tp = vec![0u64; k + 1];
    let mut fp = vec![0u64; k + 1];
    let mut fn_count = 0u64;
    let mut tn = 0u64;
    for p in &paths {
        for (i, e) in p.iter().enumerate() {
            if e.synthetic {
                continue;
            }
            let is_threat = threats.contains(&e.domain);
            if is_threat {
                // Misses: direct arrivals at a threat. Referred arrivals are
                // the hop-0 hits.
                if e.referred {
                    tp[0] += 1;
                } else {
                    fn_count += 1;
                }
                continue;
            }
            match dist.get(&e.domain) {
                None => tn += 1,
                Some(&h) => {
                    let went_on = p[i + 1..].iter().any(|later| threats.contains(&later.domain));
                    if went_on {
                        tp[h as usize] += 1;
                    } else {
                        fp[h as usize] += 1;
                    }
                    if !e.referred {
                        fp[0] += 1;
                    }
                }
            }
        }
    }
    Ok((0..=k)
        .map(|h| ConfusionMatrix::new(h as u32, tp[h], fp[h], fn_count, tn))
        .collect())
}
