//! Risk scoring: a 0–10 scale per website derived from its proximity to
//! labeled threats, mapped to silent/warn/block action bands.
//!
//! Each threat reachable within `max_hops` clicks contributes once, at its
//! minimum distance h, with weight `base · decay^(h−1)`; the sum is clamped
//! to 10 and threat domains themselves score a flat 10. Counting one
//! contribution per threat (rather than per path) keeps dense benign hubs
//! from saturating the scale. The formula's three parameters and both band
//! thresholds are configuration, so an alternative weighting drops in
//! without structural change.

use std::collections::hash_map::Entry;
use std::collections::{HashMap, VecDeque};
use std::fmt;

use thiserror::Error;

use crate::graph::{HopMap, ReferralGraph};

/// Parameters of the contribution weight `base · decay^(h−1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RiskWeights {
    pub base: f64,
    pub decay: f64,
    pub max_hops: u32,
}

impl Default for RiskWeights {
    fn default() -> Self {
        RiskWeights {
            base: 4.0,
            decay: 0.5,
            max_hops: 4,
        }
    }
}

impl RiskWeights {
    fn validate(&self) -> Result<(), RiskError> {
        if !(self.base > 0.0 && self.base.is_finite()) {
            return Err(RiskError::InvalidWeights("base must be positive"));
        }
        if !(self.decay > 0.0 && self.decay <= 1.0) {
            return Err(RiskError::InvalidWeights("decay must be in (0, 1]"));
        }
        if self.max_hops < 1 {
            return Err(RiskError::InvalidWeights("max_hops must be at least 1"));
        }
        Ok(())
    }

    fn weight_at(&self, hop: u32) -> f64 {
        self.base * self.decay.powi(hop as i32 - 1)
    }
}

/// Band cutoffs: scores below `warn_at` stay silent, scores above `block_at`
/// block, everything between warns.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RiskThresholds {
    pub warn_at: f64,
    pub block_at: f64,
}

impl Default for RiskThresholds {
    fn default() -> Self {
        RiskThresholds {
            warn_at: 5.0,
            block_at: 7.0,
        }
    }
}

impl RiskThresholds {
    fn validate(&self) -> Result<(), RiskError> {
        if !(0.0 <= self.warn_at && self.warn_at <= self.block_at && self.block_at <= 10.0) {
            return Err(RiskError::InvalidThresholds(
                "need 0 ≤ warn_at ≤ block_at ≤ 10",
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RiskBand {
    Silent,
    Warn,
    Block,
}

impl fmt::Display for RiskBand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RiskBand::Silent => "silent",
            RiskBand::Warn => "warn",
            RiskBand::Block => "block",
        })
    }
}

/// Scored website. `contributions` holds one `(threat, hop, weight)` entry
/// per reachable threat, sorted by (hop, threat); `value` is their clamped
/// sum, or a flat 10 for a threat domain itself.
#[derive(Debug, Clone, PartialEq)]
pub struct RiskScore {
    pub domain: String,
    pub value: f64,
    pub contributions: Vec<(String, u32, f64)>,
    pub band: RiskBand,
}

#[derive(Debug, Error)]
pub enum RiskError {
    #[error("unknown domain {0:?}")]
    UnknownDomain(String),
    #[error("risk value {0} outside [0, 10]")]
    ValueOutOfRange(f64),
    #[error("graph must be sealed before scoring all nodes")]
    NotSealed,
    #[error("hop map was built with max_hops {hopmap}, risk weights use {weights}")]
    HopMismatch { weights: u32, hopmap: u32 },
    #[error("invalid risk weights: {0}")]
    InvalidWeights(&'static str),
    #[error("invalid risk thresholds: {0}")]
    InvalidThresholds(&'static str),
}

/// Map a score to its action band.
pub fn band(value: f64, thresholds: &RiskThresholds) -> Result<RiskBand, RiskError> {
    thresholds.validate()?;
    if !(0.0..=10.0).contains(&value) {
        return Err(RiskError::ValueOutOfRange(value));
    }
    Ok(if value < thresholds.warn_at {
        RiskBand::Silent
    } else if value <= thresholds.block_at {
        RiskBand::Warn
    } else {
        RiskBand::Block
    })
}

fn clamp_and_band(
    domain: &str,
    mut contributions: Vec<(String, u32, f64)>,
    thresholds: &RiskThresholds,
) -> Result<RiskScore, RiskError> {
    contributions.sort_by(|a, b| a.1.cmp(&b.1).then_with(|| a.0.cmp(&b.0)));
    let value = contributions
        .iter()
        .map(|&(_, _, w)| w)
        .sum::<f64>()
        .min(10.0);
    Ok(RiskScore {
        domain: domain.to_string(),
        value,
        band: band(value, thresholds)?,
        contributions,
    })
}

/// Score one domain by a forward breadth-first search over the click
/// direction: every threat within `max_hops` contributes at its minimum
/// distance.
pub fn score(
    graph: &ReferralGraph,
    domain: &str,
    weights: &RiskWeights,
    thresholds: &RiskThresholds,
) -> Result<RiskScore, RiskError> {
    weights.validate()?;
    thresholds.validate()?;
    let start = graph
        .index_of(domain)
        .ok_or_else(|| RiskError::UnknownDomain(domain.to_string()))?;
    if graph.is_threat_at(start) {
        return Ok(RiskScore {
            domain: domain.to_string(),
            value: 10.0,
            contributions: vec![(domain.to_string(), 0, 10.0)],
            band: band(10.0, thresholds)?,
        });
    }
    let mut dist: HashMap<usize, u32> = HashMap::new();
    let mut queue = VecDeque::new();
    dist.insert(start, 0);
    queue.push_back(start);
    let mut contributions = Vec::new();
    while let Some(u) = queue.pop_front() {
        let h = dist[&u];
        if h == weights.max_hops {
            continue;
        }
        for &v in graph.out_neighbors(u) {
            if let Entry::Vacant(e) = dist.entry(v) {
                e.insert(h + 1);
                queue.push_back(v);
                if graph.is_threat_at(v) {
                    contributions.push((
                        graph.domain_at(v).to_string(),
                        h + 1,
                        weights.weight_at(h + 1),
                    ));
                }
            }
        }
    }
    clamp_and_band(domain, contributions, thresholds)
}

/// Score every non-threat node with at least one reachable threat, sorted by
/// descending value with the domain as tiebreaker. Computed by one reverse
/// breadth-first search per threat; the hop map only screens candidates and
/// pins the shared `max_hops`.
pub fn score_all(
    graph: &ReferralGraph,
    hopmap: &HopMap,
    weights: &RiskWeights,
    thresholds: &RiskThresholds,
) -> Result<Vec<RiskScore>, RiskError> {
    weights.validate()?;
    thresholds.validate()?;
    if !graph.is_sealed() {
        return Err(RiskError::NotSealed);
    }
    if hopmap.max_hops() != weights.max_hops {
        return Err(RiskError::HopMismatch {
            weights: weights.max_hops,
            hopmap: hopmap.max_hops(),
        });
    }
    let n = graph.node_count();
    let mut contributions: Vec<Vec<(String, u32, f64)>> = vec![Vec::new(); n];
    let mut dist = vec![u32::MAX; n];
    for t in 0..n {
        if !graph.is_threat_at(t) {
            continue;
        }
        // Reverse BFS from the threat: reaching d over in-edges in h steps
        // means a user on d is h clicks away.
        dist.fill(u32::MAX);
        dist[t] = 0;
        let mut queue = VecDeque::new();
        queue.push_back(t);
        while let Some(u) = queue.pop_front() {
            if dist[u] == weights.max_hops {
                continue;
            }
            for &v in graph.in_neighbors(u) {
                if dist[v] == u32::MAX {
                    dist[v] = dist[u] + 1;
                    queue.push_back(v);
                    if !graph.is_threat_at(v) {
                        contributions[v].push((
                            graph.domain_at(t).to_string(),
                            dist[v],
                            weights.weight_at(dist[v]),
                        ));
                    }
                }
            }
        }
    }
    let mut scores = Vec::new();
    for (i, contribs) in contributions.into_iter().enumerate() {
        if contribs.is_empty() {
            continue;
        }
        debug_assert!(hopmap.contains(graph.domain_at(i)));
        scores.push(clamp_and_band(graph.domain_at(i), contribs, thresholds)?);
    }
    scores.sort_by(|a, b| {
        b.value
            .partial_cmp(&a.value)
            .expect("scores are finite")
            .then_with(|| a.domain.cmp(&b.domain))
    });
    Ok(scores)
}

/// Scores as CSV; contributions serialize as `threat@hop` joined by `|`.
pub fn export_scores_csv(scores: &[RiskScore]) -> String {
    let mut wtr = csv::Writer::from_writer(Vec::new());
    wtr.write_record(["domain", "score", "band", "contributions"])
        .expect("in-memory write");
    for s in scores {
        let contribs: Vec<String> = s
            .contributions
            .iter()
            .map(|(t, h, _)| format!("{t}@{h}"))
            .collect();
        wtr.write_record([
            s.domain.as_str(),
            &format!("{:.4}", s.value),
            &s.band.to_string(),
            &contribs.join("|"),
        ])
        .expect("in-memory write");
    }
    String::from_utf8(wtr.into_inner().expect("in-memory flush")).expect("csv is utf-8")
}
