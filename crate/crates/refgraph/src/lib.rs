//! Referrer-graph proximity analysis.
//!
//! From HTTP traffic metadata (JSON lines of host/URI/referrer) and a
//! threat-indicator blocklist, this crate builds a directed referral graph,
//! measures how many clicks separate each website from a known-malicious
//! one, reconstructs user navigation paths, evaluates the hop-distance model
//! with per-hop confusion matrices and ROC metrics, and assigns 0–10 risk
//! scores with silent/warn/block action bands.
//!
//! The pipeline, in module order:
//!
//! 1. [`ingest`] — parse and sanitize capture lines, load blocklists and
//!    destination filters.
//! 2. [`graph`] — build the referral graph, label threats, compute bounded
//!    hop distances, export DOT/CSV.
//! 3. [`paths`] — stitch records into navigation chains by referrer
//!    evidence.
//! 4. [`eval`] — per-hop confusion matrices and the ROC metric suite.
//! 5. [`risk`] — hop-weighted risk scores and action bands.
//! 6. [`synth`] — deterministic synthetic traffic plus brute-force oracles
//!    for testing the real code paths against.

pub mod eval;
pub mod graph;
pub mod ingest;
pub mod paths;
pub mod risk;
pub mod synth;

pub use eval::{ConfusionMatrix, FprMode, RocMetrics};
pub use graph::{HopDirection, HopMap, ReferralEdge, ReferralGraph, WebsiteNode};
pub use ingest::{FilterRule, ThreatIndicator, TrafficRecord};
pub use paths::{NavigationPath, SessionWindow, VisitEvent};
pub use risk::{RiskBand, RiskScore, RiskThresholds, RiskWeights};
pub use synth::{Manifest, SynthOutput, SynthParams};
