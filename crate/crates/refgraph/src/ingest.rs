//! Traffic metadata ingestion.
//!
//! Raw capture lines arrive as JSON objects, one per line. Each line is
//! parsed into a [`TrafficRecord`]: the destination host is normalized, the
//! URI is stripped of query/fragment content (which may carry credentials or
//! session tokens), and the referrer is split into a normalized host plus a
//! sanitized path so later stages never re-parse URIs. Garbage lines are
//! counted and skipped rather than aborting the run.
//!
//! The module also loads threat-indicator blocklists (one domain per line)
//! and destination exclusion filters.

use std::collections::HashSet;
use std::io::{self, BufRead};

use serde::Deserialize;
use thiserror::Error;

/// One sanitized HTTP metadata event.
///
/// `host` and `referrer_host` are normalized domains (lowercase, no scheme,
/// no port, no trailing dot). `path` and `referrer_path` always start with
/// `/` and never contain `?` or `#`. `referrer_host` and `referrer_path` are
/// either both present or both absent.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrafficRecord {
    /// Capture index, strictly increasing within one ingest run.
    pub seq: u64,
    /// Seconds since epoch, when the capture carried one.
    pub timestamp: Option<i64>,
    pub host: String,
    pub port: u16,
    pub path: String,
    pub referrer_host: Option<String>,
    pub referrer_path: Option<String>,
}

/// A domain flagged as malicious by an external source.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ThreatIndicator {
    pub domain: String,
    /// Free-text provenance label, e.g. "firewall-blocklist".
    pub source: String,
    pub observed_seq: Option<u64>,
}

/// Destination exclusion rule. Matching records are dropped at ingest;
/// referrer fields are never grounds for dropping.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FilterRule {
    /// Drop records whose host equals the pattern exactly.
    ExcludeDomain(String),
    /// Drop records whose host equals the pattern or ends with it as a
    /// dot-separated suffix (".org" and "org" both match "b.org").
    ExcludeSuffix(String),
}

impl FilterRule {
    pub fn matches(&self, host: &str) -> bool {
        match self {
            FilterRule::ExcludeDomain(pattern) => host == pattern,
            FilterRule::ExcludeSuffix(pattern) => {
                if let Some(bare) = pattern.strip_prefix('.') {
                    host == bare || host.ends_with(pattern.as_str())
                } else {
                    host == pattern
                        || (host.len() > pattern.len()
                            && host.ends_with(pattern.as_str())
                            && host.as_bytes()[host.len() - pattern.len() - 1] == b'.')
                }
            }
        }
    }
}

/// Per-run ingest counters. `accepted + skipped == lines` always holds.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct IngestStats {
    pub lines: u64,
    pub accepted: u64,
    pub skipped: u64,
}

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("malformed JSON: {0}")]
    MalformedJson(String),
    #[error("missing host")]
    MissingHost,
    #[error("invalid domain {raw:?}: {reason}")]
    InvalidDomain { raw: String, reason: &'static str },
    #[error("filter rule line {line}: {reason}")]
    InvalidFilterRule { line: usize, reason: String },
    #[error("read error: {0}")]
    Io(#[from] io::Error),
}

/// JSON shape of one capture line. Unknown keys are ignored; both the
/// conventional HTTP misspelling "referer" and the corrected "referrer" are
/// accepted.
#[derive(Deserialize)]
struct RawLine {
    host: Option<String>,
    port: Option<u16>,
    uri: Option<String>,
    #[serde(alias = "referrer")]
    referer: Option<String>,
    ts: Option<i64>,
}

fn is_scheme(s: &str) -> bool {
    let mut bytes = s.bytes();
    match bytes.next() {
        Some(b) if b.is_ascii_alphabetic() => {}
        _ => return false,
    }
    bytes.all(|b| b.is_ascii_alphanumeric() || b == b'+' || b == b'-' || b == b'.')
}

/// Normalize a domain: lowercase, strip scheme prefix, numeric port suffix,
/// and trailing dots. Strings still containing `/`, `?`, `#`, `:`, or
/// whitespace after stripping are rejected.
pub fn normalize_domain(raw: &str) -> Result<String, IngestError> {
    let mut s = raw.trim();
    if let Some(idx) = s.find("://") {
        if is_scheme(&s[..idx]) {
            s = &s[idx + 3..];
        }
    }
    if let Some((head, tail)) = s.rsplit_once(':') {
        if !tail.is_empty() && tail.bytes().all(|b| b.is_ascii_digit()) {
            s = head;
        }
    }
    let s = s.trim_end_matches('.');
    if s.is_empty() {
        return Err(IngestError::InvalidDomain {
            raw: raw.to_string(),
            reason: "empty",
        });
    }
    if s.contains(['/', '?', '#', ':']) || s.chars().any(char::is_whitespace) {
        return Err(IngestError::InvalidDomain {
            raw: raw.to_string(),
            reason: "invalid character",
        });
    }
    Ok(s.to_ascii_lowercase())
}

/// Reduce a raw URI to its path component: query and fragment are cut,
/// scheme and host are dropped, and the result always starts with `/`.
/// Total and idempotent.
pub fn sanitize_uri(raw: &str) -> String {
    let cut = match raw.find(['?', '#']) {
        Some(i) => &raw[..i],
        None => raw,
    };
    let path = strip_scheme_host(cut);
    if path.is_empty() {
        "/".to_string()
    } else if path.starts_with('/') {
        path.to_string()
    } else {
        format!("/{path}")
    }
}

fn strip_scheme_host(s: &str) -> &str {
    if let Some(i) = s.find("://") {
        if is_scheme(&s[..i]) {
            let rest = &s[i + 3..];
            return match rest.find('/') {
                Some(j) => &rest[j..],
                None => "",
            };
        }
    }
    s
}

/// Split a raw referrer value (full URI, protocol-relative URI, or bare
/// domain) into a normalized host and sanitized path. Values with no
/// parsable host (bare paths, empty strings) yield `None`: the visit is kept
/// but treated as direct.
fn split_referrer(raw: &str) -> Option<(String, String)> {
    let trimmed = raw.trim();
    if trimmed.is_empty() {
        return None;
    }
    let rest = if let Some(i) = trimmed.find("://") {
        if is_scheme(&trimmed[..i]) {
            &trimmed[i + 3..]
        } else {
            trimmed
        }
    } else if let Some(stripped) = trimmed.strip_prefix("//") {
        stripped
    } else {
        trimmed
    };
    if rest.starts_with('/') {
        return None;
    }
    let boundary = rest.find(['/', '?', '#']).unwrap_or(rest.len());
    let host = normalize_domain(&rest[..boundary]).ok()?;
    let path = if rest[boundary..].starts_with('/') {
        sanitize_uri(&rest[boundary..])
    } else {
        "/".to_string()
    };
    Some((host, path))
}

/// Parse one JSON capture line into a normalized record. `seq` is the
/// caller-assigned capture index (line offset). Missing port defaults to 80;
/// unknown JSON keys are ignored.
pub fn parse_record(line: &str, seq: u64) -> Result<TrafficRecord, IngestError> {
    let raw: RawLine =
        serde_json::from_str(line).map_err(|e| IngestError::MalformedJson(e.to_string()))?;
    let host_raw = match raw.host {
        Some(h) if !h.trim().is_empty() => h,
        _ => return Err(IngestError::MissingHost),
    };
    let host = normalize_domain(&host_raw)?;
    let path = sanitize_uri(raw.uri.as_deref().unwrap_or(""));
    let (referrer_host, referrer_path) = match raw.referer.as_deref().and_then(split_referrer) {
        Some((h, p)) => (Some(h), Some(p)),
        None => (None, None),
    };
    Ok(TrafficRecord {
        seq,
        timestamp: raw.ts,
        host,
        port: raw.port.unwrap_or(80),
        path,
        referrer_host,
        referrer_path,
    })
}

/// Parse a whole JSON-lines stream, assigning `seq` from line offsets.
/// Malformed lines are counted and skipped.
pub fn read_records<R: BufRead>(reader: R) -> Result<(Vec<TrafficRecord>, IngestStats), IngestError> {
    let mut records = Vec::new();
    let mut stats = IngestStats::default();
    for (offset, line) in reader.lines().enumerate() {
        let line = line?;
        stats.lines += 1;
        match parse_record(&line, offset as u64) {
            Ok(record) => {
                records.push(record);
                stats.accepted += 1;
            }
            Err(_) => stats.skipped += 1,
        }
    }
    Ok((records, stats))
}

/// [`read_records`] over an in-memory string.
pub fn parse_records_str(text: &str) -> (Vec<TrafficRecord>, IngestStats) {
    read_records(text.as_bytes()).expect("in-memory reads cannot fail")
}

/// Drop records whose destination host matches any rule. Referrer fields
/// never cause a drop; input order is preserved.
pub fn apply_filters(records: Vec<TrafficRecord>, rules: &[FilterRule]) -> Vec<TrafficRecord> {
    if rules.is_empty() {
        return records;
    }
    records
        .into_iter()
        .filter(|r| !rules.iter().any(|rule| rule.matches(&r.host)))
        .collect()
}

/// Load a threat-indicator blocklist: one domain per line, `#` starts a
/// comment. Returns normalized, de-duplicated indicators in first-occurrence
/// order plus the count of lines that failed normalization.
pub fn load_indicators(text: &str, source: &str) -> (Vec<ThreatIndicator>, usize) {
    let mut indicators = Vec::new();
    let mut seen = HashSet::new();
    let mut skipped = 0;
    for line in text.lines() {
        let entry = line.split('#').next().unwrap_or("").trim();
        if entry.is_empty() {
            continue;
        }
        match normalize_domain(entry) {
            Ok(domain) => {
                if seen.insert(domain.clone()) {
                    indicators.push(ThreatIndicator {
                        domain,
                        source: source.to_string(),
                        observed_seq: None,
                    });
                }
            }
            Err(_) => skipped += 1,
        }
    }
    (indicators, skipped)
}

/// Parse filter rules: lines of the form `domain:<d>` or `suffix:<s>`, with
/// `#` comments and blank lines allowed. Unlike traffic lines, a malformed
/// rule is a hard error: filters are operator configuration.
pub fn parse_filter_rules(text: &str) -> Result<Vec<FilterRule>, IngestError> {
    let mut rules = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let entry = line.split('#').next().unwrap_or("").trim();
        if entry.is_empty() {
            continue;
        }
        let (kind, pattern) = entry.split_once(':').ok_or_else(|| {
            IngestError::InvalidFilterRule {
                line: idx + 1,
                reason: "expected \"domain:<d>\" or \"suffix:<s>\"".to_string(),
            }
        })?;
        let pattern = pattern.trim();
        let invalid = |reason: String| IngestError::InvalidFilterRule {
            line: idx + 1,
            reason,
        };
        match kind.trim() {
            "domain" => {
                let domain = normalize_domain(pattern).map_err(|e| invalid(e.to_string()))?;
                rules.push(FilterRule::ExcludeDomain(domain));
            }
            "suffix" => {
                let dotted = pattern.starts_with('.');
                let bare = pattern.trim_start_matches('.');
                let normalized = normalize_domain(bare).map_err(|e| invalid(e.to_string()))?;
                let suffix = if dotted {
                    format!(".{normalized}")
                } else {
                    normalized
                };
                rules.push(FilterRule::ExcludeSuffix(suffix));
            }
            other => {
                return Err(invalid(format!("unknown rule kind {other:?}")));
            }
        }
    }
    Ok(rules)
}
