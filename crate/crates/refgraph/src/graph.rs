//! Referral graph: websites as nodes, referrer→visited edges, threat labels.
//!
//! Edges point in the navigation direction: an edge `a → b` means a record
//! named `a` as the referrer of a visit to `b`, so a user on `a` can reach
//! `b` in one click. Hop distance to a threat is therefore computed by a
//! multi-source BFS from all threat nodes over *reversed* edges; the
//! direction is configurable through [`HopDirection`] for captures whose
//! referrer field was stored the other way around.
//!
//! Domains are interned once; all adjacency work runs on integer indices.
//! Exports (DOT, CSV) sort by domain so output bytes never depend on
//! insertion or hash order.

use std::collections::{HashMap, HashSet, VecDeque};

use thiserror::Error;

use crate::ingest::{ThreatIndicator, TrafficRecord};

/// Read-only view of one graph node.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WebsiteNode {
    pub domain: String,
    /// Number of ingested records with this host. Appearing only as a
    /// referrer does not count as a visit.
    pub visit_count: u64,
    pub is_threat: bool,
}

/// Read-only view of one aggregated referral edge.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReferralEdge {
    pub from: String,
    pub to: String,
    /// Number of records with (referrer_host = from, host = to).
    pub weight: u64,
    pub first_seq: u64,
    pub last_seq: u64,
}

/// Which way hop distances are measured relative to the stored edges.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum HopDirection {
    /// Distance = clicks a user needs to reach the threat (BFS from threats
    /// over reversed edges). This matches edges stored referrer→visited.
    #[default]
    TowardThreat,
    /// Distance measured along edge direction outward from threats, for
    /// captures whose referrer relation was stored visited→referrer.
    FromThreat,
}

/// Minimum hop distance to the nearest threat, per domain, capped at
/// `max_hops`. Domains with no path of length ≤ `max_hops` to any threat are
/// absent. Distance 0 is exactly the threat nodes themselves.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HopMap {
    max_hops: u32,
    distances: HashMap<String, u32>,
}

impl HopMap {
    pub(crate) fn new(max_hops: u32, distances: HashMap<String, u32>) -> Self {
        HopMap {
            max_hops,
            distances,
        }
    }

    pub fn max_hops(&self) -> u32 {
        self.max_hops
    }

    pub fn distance(&self, domain: &str) -> Option<u32> {
        self.distances.get(domain).copied()
    }

    pub fn contains(&self, domain: &str) -> bool {
        self.distances.contains_key(domain)
    }

    pub fn len(&self) -> usize {
        self.distances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.distances.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, u32)> {
        self.distances.iter().map(|(d, h)| (d.as_str(), *h))
    }

    /// Entries sorted by (distance, domain); the deterministic export order.
    pub fn to_sorted_vec(&self) -> Vec<(String, u32)> {
        let mut v: Vec<(String, u32)> = self
            .distances
            .iter()
            .map(|(d, h)| (d.clone(), *h))
            .collect();
        v.sort_by(|a, b| a.1.cmp(&b.1).then_with(|| a.0.cmp(&b.0)));
        v
    }
}

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("graph is sealed; no further records can be added")]
    Sealed,
    #[error("graph must be sealed before distance queries")]
    NotSealed,
    #[error("max hops must be at least 1, got {0}")]
    InvalidMaxHops(u32),
    #[error("unknown focus domain {0:?}")]
    UnknownFocus(String),
    #[error("malformed snapshot: {0}")]
    Snapshot(String),
}

#[derive(Debug, Clone, Copy)]
struct EdgeData {
    weight: u64,
    first_seq: u64,
    last_seq: u64,
}

/// The referral graph. Build by feeding records, label threats, then [seal]
/// before running distance queries; a sealed graph rejects further traffic.
///
/// [seal]: ReferralGraph::seal
#[derive(Debug, Clone, Default)]
pub struct ReferralGraph {
    index: HashMap<String, usize>,
    domains: Vec<String>,
    visit_counts: Vec<u64>,
    threat: Vec<bool>,
    out_adj: Vec<Vec<usize>>,
    in_adj: Vec<Vec<usize>>,
    edges: HashMap<(usize, usize), EdgeData>,
    sealed: bool,
}

impl ReferralGraph {
    pub fn new() -> Self {
        ReferralGraph::default()
    }

    fn intern(&mut self, domain: &str) -> usize {
        if let Some(&i) = self.index.get(domain) {
            return i;
        }
        let i = self.domains.len();
        self.index.insert(domain.to_string(), i);
        self.domains.push(domain.to_string());
        self.visit_counts.push(0);
        self.threat.push(false);
        self.out_adj.push(Vec::new());
        self.in_adj.push(Vec::new());
        i
    }

    /// Record one visit: the host node's visit count is incremented, and if
    /// a referrer is present the referrer→host edge is created or its weight
    /// bumped. A self-referral counts as a visit but creates no edge.
    pub fn add_record(&mut self, record: &TrafficRecord) -> Result<(), GraphError> {
        if self.sealed {
            return Err(GraphError::Sealed);
        }
        let host = self.intern(&record.host);
        self.visit_counts[host] += 1;
        if let Some(referrer) = &record.referrer_host {
            if referrer != &record.host {
                let from = self.intern(referrer);
                self.add_edge(from, host, 1, record.seq, record.seq);
            }
        }
        Ok(())
    }

    fn add_edge(&mut self, from: usize, to: usize, weight: u64, first_seq: u64, last_seq: u64) {
        match self.edges.get_mut(&(from, to)) {
            Some(e) => {
                e.weight += weight;
                e.first_seq = e.first_seq.min(first_seq);
                e.last_seq = e.last_seq.max(last_seq);
            }
            None => {
                self.edges.insert(
                    (from, to),
                    EdgeData {
                        weight,
                        first_seq,
                        last_seq,
                    },
                );
                self.out_adj[from].push(to);
                self.in_adj[to].push(from);
            }
        }
    }

    /// Mark indicator domains as threats, creating zero-visit nodes for
    /// domains never seen in traffic. Returns how many nodes were newly
    /// labeled. Labeling is annotation, not traffic, so it is permitted on
    /// sealed graphs too.
    pub fn label_threats(&mut self, indicators: &[ThreatIndicator]) -> usize {
        let mut newly = 0;
        for indicator in indicators {
            let i = self.intern(&indicator.domain);
            if !self.threat[i] {
                self.threat[i] = true;
                newly += 1;
            }
        }
        newly
    }

    /// Freeze the graph: after sealing, add_record is rejected and distance
    /// queries become available. Idempotent.
    pub fn seal(&mut self) {
        self.sealed = true;
    }

    pub fn is_sealed(&self) -> bool {
        self.sealed
    }

    pub fn node_count(&self) -> usize {
        self.domains.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn threat_count(&self) -> usize {
        self.threat.iter().filter(|&&t| t).count()
    }

    pub fn total_visits(&self) -> u64 {
        self.visit_counts.iter().sum()
    }

    pub fn contains(&self, domain: &str) -> bool {
        self.index.contains_key(domain)
    }

    pub fn is_threat(&self, domain: &str) -> bool {
        self.index
            .get(domain)
            .map(|&i| self.threat[i])
            .unwrap_or(false)
    }

    pub fn node(&self, domain: &str) -> Option<WebsiteNode> {
        self.index.get(domain).map(|&i| WebsiteNode {
            domain: self.domains[i].clone(),
            visit_count: self.visit_counts[i],
            is_threat: self.threat[i],
        })
    }

    /// All nodes, sorted by domain.
    pub fn nodes(&self) -> Vec<WebsiteNode> {
        let mut nodes: Vec<WebsiteNode> = (0..self.domains.len())
            .map(|i| WebsiteNode {
                domain: self.domains[i].clone(),
                visit_count: self.visit_counts[i],
                is_threat: self.threat[i],
            })
            .collect();
        nodes.sort_by(|a, b| a.domain.cmp(&b.domain));
        nodes
    }

    /// All edges, sorted by (from, to).
    pub fn edges(&self) -> Vec<ReferralEdge> {
        let mut edges: Vec<ReferralEdge> = self
            .edges
            .iter()
            .map(|(&(f, t), e)| ReferralEdge {
                from: self.domains[f].clone(),
                to: self.domains[t].clone(),
                weight: e.weight,
                first_seq: e.first_seq,
                last_seq: e.last_seq,
            })
            .collect();
        edges.sort_by(|a, b| a.from.cmp(&b.from).then_with(|| a.to.cmp(&b.to)));
        edges
    }

    pub fn threat_set(&self) -> HashSet<String> {
        (0..self.domains.len())
            .filter(|&i| self.threat[i])
            .map(|i| self.domains[i].clone())
            .collect()
    }

    pub(crate) fn index_of(&self, domain: &str) -> Option<usize> {
        self.index.get(domain).copied()
    }

    pub(crate) fn domain_at(&self, i: usize) -> &str {
        &self.domains[i]
    }

    pub(crate) fn is_threat_at(&self, i: usize) -> bool {
        self.threat[i]
    }

    pub(crate) fn out_neighbors(&self, i: usize) -> &[usize] {
        &self.out_adj[i]
    }

    pub(crate) fn in_neighbors(&self, i: usize) -> &[usize] {
        &self.in_adj[i]
    }

    /// Minimum hops from each domain to the nearest threat, capped at
    /// `max_hops`, measured in the click direction (see [`HopDirection`]).
    pub fn hop_distances(&self, max_hops: u32) -> Result<HopMap, GraphError> {
        self.hop_distances_directed(max_hops, HopDirection::TowardThreat)
    }

    pub fn hop_distances_directed(
        &self,
        max_hops: u32,
        direction: HopDirection,
    ) -> Result<HopMap, GraphError> {
        if max_hops < 1 {
            return Err(GraphError::InvalidMaxHops(max_hops));
        }
        if !self.sealed {
            return Err(GraphError::NotSealed);
        }
        let n = self.domains.len();
        let mut dist = vec![u32::MAX; n];
        let mut queue = VecDeque::new();
        for (i, d) in dist.iter_mut().enumerate() {
            if self.threat[i] {
                *d = 0;
                queue.push_back(i);
            }
        }
        while let Some(u) = queue.pop_front() {
            if dist[u] == max_hops {
                continue;
            }
            // An edge d → d′ lets a user on d reach d′, so predecessors of a
            // distance-h node sit at distance h+1 when measuring clicks
            // toward the threat.
            let step = match direction {
                HopDirection::TowardThreat => &self.in_adj[u],
                HopDirection::FromThreat => &self.out_adj[u],
            };
            for &v in step {
                if dist[v] == u32::MAX {
                    dist[v] = dist[u] + 1;
                    queue.push_back(v);
                }
            }
        }
        let distances = (0..n)
            .filter(|&i| dist[i] != u32::MAX)
            .map(|i| (self.domains[i].clone(), dist[i]))
            .collect();
        Ok(HopMap::new(max_hops, distances))
    }

    /// The sample population: every domain within `max_hops` clicks of a
    /// threat, excluding the threats themselves. Sorted by (distance,
    /// domain).
    pub fn related_within(&self, max_hops: u32) -> Result<Vec<(String, u32)>, GraphError> {
        let hopmap = self.hop_distances(max_hops)?;
        let mut related: Vec<(String, u32)> = hopmap
            .to_sorted_vec()
            .into_iter()
            .filter(|&(_, h)| h >= 1)
            .collect();
        related.sort_by(|a, b| a.1.cmp(&b.1).then_with(|| a.0.cmp(&b.0)));
        Ok(related)
    }

    /// Graphviz DOT rendering. Threat nodes get a distinct shape and a
    /// "threat" label line; mapped nodes show their hop distance. With a
    /// focus domain, output is restricted to nodes within `radius`
    /// undirected steps of it. Node and edge statements are sorted, so equal
    /// graphs yield identical bytes.
    pub fn export_dot(
        &self,
        hopmap: &HopMap,
        focus: Option<&str>,
        radius: u32,
    ) -> Result<String, GraphError> {
        let keep: Option<Vec<bool>> = match focus {
            Some(domain) => {
                let start = self
                    .index
                    .get(domain)
                    .copied()
                    .ok_or_else(|| GraphError::UnknownFocus(domain.to_string()))?;
                Some(self.undirected_ball(start, radius))
            }
            None => None,
        };
        let kept = |i: usize| keep.as_ref().map(|k| k[i]).unwrap_or(true);

        let mut node_lines = Vec::new();
        for i in 0..self.domains.len() {
            if !kept(i) {
                continue;
            }
            let domain = dot_escape(&self.domains[i]);
            let mut label = domain.clone();
            if let Some(h) = hopmap.distance(&self.domains[i]) {
                label.push_str(&format!("\\nhop {h}"));
            }
            let attrs = if self.threat[i] {
                label.push_str("\\nthreat");
                format!("label=\"{label}\",shape=octagon")
            } else {
                format!("label=\"{label}\"")
            };
            node_lines.push(format!("  \"{domain}\" [{attrs}];"));
        }
        node_lines.sort();

        let mut edge_lines = Vec::new();
        for (&(f, t), e) in &self.edges {
            if !kept(f) || !kept(t) {
                continue;
            }
            edge_lines.push(format!(
                "  \"{}\" -> \"{}\" [label={}];",
                dot_escape(&self.domains[f]),
                dot_escape(&self.domains[t]),
                e.weight
            ));
        }
        edge_lines.sort();

        let mut out = String::from("digraph referrals {\n  rankdir=LR;\n");
        for line in node_lines.iter().chain(edge_lines.iter()) {
            out.push_str(line);
            out.push('\n');
        }
        out.push_str("}\n");
        Ok(out)
    }

    fn undirected_ball(&self, start: usize, radius: u32) -> Vec<bool> {
        let mut keep = vec![false; self.domains.len()];
        let mut depth = vec![u32::MAX; self.domains.len()];
        let mut queue = VecDeque::new();
        depth[start] = 0;
        keep[start] = true;
        queue.push_back(start);
        while let Some(u) = queue.pop_front() {
            if depth[u] == radius {
                continue;
            }
            for &v in self.out_adj[u].iter().chain(self.in_adj[u].iter()) {
                if depth[v] == u32::MAX {
                    depth[v] = depth[u] + 1;
                    keep[v] = true;
                    queue.push_back(v);
                }
            }
        }
        keep
    }

    /// Edge list as CSV, rows sorted by (from, to).
    pub fn export_edges_csv(&self) -> String {
        let mut wtr = csv::Writer::from_writer(Vec::new());
        wtr.write_record(["from", "to", "weight", "first_seq", "last_seq"])
            .expect("in-memory write");
        for e in self.edges() {
            wtr.write_record([
                e.from.as_str(),
                e.to.as_str(),
                &e.weight.to_string(),
                &e.first_seq.to_string(),
                &e.last_seq.to_string(),
            ])
            .expect("in-memory write");
        }
        String::from_utf8(wtr.into_inner().expect("in-memory flush")).expect("csv is utf-8")
    }

    /// Node list as CSV, rows sorted by domain.
    pub fn export_nodes_csv(&self) -> String {
        let mut wtr = csv::Writer::from_writer(Vec::new());
        wtr.write_record(["domain", "visit_count", "is_threat"])
            .expect("in-memory write");
        for n in self.nodes() {
            wtr.write_record([
                n.domain.as_str(),
                &n.visit_count.to_string(),
                if n.is_threat { "true" } else { "false" },
            ])
            .expect("in-memory write");
        }
        String::from_utf8(wtr.into_inner().expect("in-memory flush")).expect("csv is utf-8")
    }

    /// Rebuild a graph from the two snapshot CSVs. The result is unsealed so
    /// callers can layer more traffic or labels before re-sealing.
    pub fn from_snapshot(nodes_csv: &str, edges_csv: &str) -> Result<ReferralGraph, GraphError> {
        let mut graph = ReferralGraph::new();
        let snap = |msg: String| GraphError::Snapshot(msg);

        let mut nodes = csv::Reader::from_reader(nodes_csv.as_bytes());
        for (row, record) in nodes.records().enumerate() {
            let record = record.map_err(|e| snap(format!("nodes row {}: {e}", row + 1)))?;
            if record.len() != 3 {
                return Err(snap(format!(
                    "nodes row {}: expected 3 fields, got {}",
                    row + 1,
                    record.len()
                )));
            }
            let i = graph.intern(&record[0]);
            graph.visit_counts[i] = record[1]
                .parse()
                .map_err(|e| snap(format!("nodes row {}: visit_count: {e}", row + 1)))?;
            graph.threat[i] = match &record[2] {
                "true" => true,
                "false" => false,
                other => {
                    return Err(snap(format!(
                        "nodes row {}: is_threat must be true/false, got {other:?}",
                        row + 1
                    )))
                }
            };
        }

        let mut edges = csv::Reader::from_reader(edges_csv.as_bytes());
        for (row, record) in edges.records().enumerate() {
            let record = record.map_err(|e| snap(format!("edges row {}: {e}", row + 1)))?;
            if record.len() != 5 {
                return Err(snap(format!(
                    "edges row {}: expected 5 fields, got {}",
                    row + 1,
                    record.len()
                )));
            }
            let from = graph.intern(&record[0]);
            let to = graph.intern(&record[1]);
            let parse = |field: &str, name: &str| -> Result<u64, GraphError> {
                field
                    .parse()
                    .map_err(|e| snap(format!("edges row {}: {name}: {e}", row + 1)))
            };
            let weight = parse(&record[2], "weight")?;
            let first_seq = parse(&record[3], "first_seq")?;
            let last_seq = parse(&record[4], "last_seq")?;
            graph.add_edge(from, to, weight, first_seq, last_seq);
        }
        Ok(graph)
    }
}

fn dot_escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}
