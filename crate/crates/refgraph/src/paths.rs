//! Navigation path reconstruction.
//!
//! The capture has no client or session identifier, so chains are stitched
//! purely from referrer evidence: a record naming referrer R attaches to the
//! most recently active open path whose latest event is a visit to R, as
//! long as that event lies within the session window. When no such path
//! exists, the referrer still proves R was loaded, so a synthetic anchor
//! event for R is created and a new path begun with it. Synthetic events are
//! flagged and excluded from classification denominators.

use std::collections::{HashMap, HashSet};

use thiserror::Error;

use crate::ingest::TrafficRecord;

/// Default session window when every record carries a timestamp.
pub const DEFAULT_SECONDS_WINDOW: u64 = 1800;
/// Default session window for captures without timestamps.
pub const DEFAULT_SEQ_WINDOW: u64 = 10_000;

/// One visit inside a path. `seq` is signed because a synthetic anchor sits
/// just before the record that implied it, which for the first capture line
/// is index −1.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VisitEvent {
    pub seq: i64,
    pub domain: String,
    /// The underlying record carried a referrer. Always false for synthetic
    /// events.
    pub referred: bool,
    /// Implied visit: no record was captured, the domain only appeared as a
    /// later record's referrer.
    pub synthetic: bool,
}

/// One reconstructed chain. Events are in strictly increasing `seq` order
/// and consecutive events are linked by the referrer relation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NavigationPath {
    pub id: u64,
    pub events: Vec<VisitEvent>,
}

/// Maximum gap between consecutive events of one session.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SessionWindow {
    /// Gap measured in capture sequence units.
    Seq(u64),
    /// Gap measured in record timestamps. Records without a timestamp are
    /// never expired by this mode: the referrer evidence outweighs a
    /// missing clock.
    Seconds(u64),
    Unbounded,
}

impl SessionWindow {
    /// Window the CLI uses when none is configured: timestamp-based when the
    /// whole capture carries timestamps, sequence-based otherwise.
    pub fn default_for(records: &[TrafficRecord]) -> SessionWindow {
        if !records.is_empty() && records.iter().all(|r| r.timestamp.is_some()) {
            SessionWindow::Seconds(DEFAULT_SECONDS_WINDOW)
        } else {
            SessionWindow::Seq(DEFAULT_SEQ_WINDOW)
        }
    }
}

#[derive(Debug, Error)]
pub enum PathError {
    #[error("records out of order: seq {next} after {prev}")]
    UnorderedInput { prev: u64, next: u64 },
    #[error("event index {index} out of range for path of length {len}")]
    IndexOutOfRange { index: usize, len: usize },
}

/// Open-path bookkeeping: which paths currently end at a given domain.
/// Entries are (path index, seq of its last event at push time); an entry is
/// stale once the path has moved on, and is discarded lazily.
struct OpenSet {
    by_domain: HashMap<String, Vec<(usize, i64)>>,
}

impl OpenSet {
    fn new() -> Self {
        OpenSet {
            by_domain: HashMap::new(),
        }
    }

    fn push(&mut self, domain: &str, path: usize, last_seq: i64) {
        self.by_domain
            .entry(domain.to_string())
            .or_default()
            .push((path, last_seq));
    }
}

/// Stitch ordered records into navigation paths. Path ids number the paths
/// in creation order, so identical inputs always yield identical output.
pub fn reconstruct(
    records: &[TrafficRecord],
    window: SessionWindow,
) -> Result<Vec<NavigationPath>, PathError> {
    let mut prev_seq: Option<u64> = None;
    for r in records {
        if let Some(prev) = prev_seq {
            if r.seq <= prev {
                return Err(PathError::UnorderedInput {
                    prev,
                    next: r.seq,
                });
            }
        }
        prev_seq = Some(r.seq);
    }

    let mut paths: Vec<NavigationPath> = Vec::new();
    // Timestamp of each path's latest event; timestamps are session state,
    // not part of the emitted events.
    let mut last_ts: Vec<Option<i64>> = Vec::new();
    let mut open = OpenSet::new();

    for r in records {
        let seq = r.seq as i64;
        let event = VisitEvent {
            seq,
            domain: r.host.clone(),
            referred: r.referrer_host.is_some(),
            synthetic: false,
        };
        match &r.referrer_host {
            None => {
                let id = paths.len();
                paths.push(NavigationPath {
                    id: id as u64,
                    events: vec![event],
                });
                last_ts.push(r.timestamp);
                open.push(&r.host, id, seq);
            }
            Some(referrer) => {
                let attached = attach(
                    &mut paths,
                    &mut last_ts,
                    &mut open,
                    window,
                    referrer,
                    r,
                    event.clone(),
                );
                if !attached {
                    // No live path ends at the referrer: the referrer visit
                    // happened off-capture, so anchor a new path with it.
                    let id = paths.len();
                    paths.push(NavigationPath {
                        id: id as u64,
                        events: vec![
                            VisitEvent {
                                seq: seq - 1,
                                domain: referrer.clone(),
                                referred: false,
                                synthetic: true,
                            },
                            event,
                        ],
                    });
                    last_ts.push(r.timestamp);
                    open.push(&r.host, id, seq);
                }
            }
        }
    }
    Ok(paths)
}

/// Try to extend an open path ending at `referrer` with `event`. Candidates
/// are examined most-recent first; in sequence mode an expired candidate can
/// never match again and is dropped, in timestamp mode it is only skipped.
fn attach(
    paths: &mut [NavigationPath],
    last_ts: &mut [Option<i64>],
    open: &mut OpenSet,
    window: SessionWindow,
    referrer: &str,
    record: &TrafficRecord,
    event: VisitEvent,
) -> bool {
    let Some(stack) = open.by_domain.get_mut(referrer) else {
        return false;
    };
    let mut i = stack.len();
    let mut chosen = None;
    while i > 0 {
        i -= 1;
        let (id, seq_at_push) = stack[i];
        let last = paths[id].events.last().expect("paths are never empty");
        if last.seq != seq_at_push || last.domain != referrer {
            stack.remove(i);
            continue;
        }
        match within_window(window, record, last, last_ts[id]) {
            Within::Yes => {
                chosen = Some((i, id));
                break;
            }
            Within::No { permanent } => {
                if permanent {
                    stack.remove(i);
                }
            }
        }
    }
    let Some((i, id)) = chosen else {
        return false;
    };
    stack.remove(i);
    let seq = event.seq;
    let host = record.host.clone();
    paths[id].events.push(event);
    last_ts[id] = record.timestamp;
    open.push(&host, id, seq);
    true
}

enum Within {
    Yes,
    /// Outside the window. `permanent` marks candidates that can never come
    /// back into range (sequence gaps only grow), so they can be dropped.
    No { permanent: bool },
}

fn within_window(
    window: SessionWindow,
    record: &TrafficRecord,
    last: &VisitEvent,
    last_ts: Option<i64>,
) -> Within {
    match window {
        SessionWindow::Unbounded => Within::Yes,
        SessionWindow::Seq(w) => {
            // Ordered input guarantees record.seq > last.seq ≥ 0 here.
            let gap = (record.seq as i64 - last.seq) as u64;
            if gap <= w {
                Within::Yes
            } else {
                Within::No { permanent: true }
            }
        }
        SessionWindow::Seconds(w) => match (record.timestamp, last_ts) {
            (Some(now), Some(then)) => {
                if now < then || (now - then) as u64 <= w {
                    Within::Yes
                } else {
                    // Timestamps are not required to be monotone in seq
                    // order, so a later record may still fall inside.
                    Within::No { permanent: false }
                }
            }
            _ => Within::Yes,
        },
    }
}

/// True iff some event strictly after `from_index` visits a threat domain.
pub fn reaches_threat(
    path: &NavigationPath,
    from_index: usize,
    threats: &HashSet<String>,
) -> Result<bool, PathError> {
    if from_index >= path.events.len() {
        return Err(PathError::IndexOutOfRange {
            index: from_index,
            len: path.events.len(),
        });
    }
    Ok(path.events[from_index + 1..]
        .iter()
        .any(|e| threats.contains(&e.domain)))
}

/// Paths dump: one row per event.
pub fn export_paths_csv(paths: &[NavigationPath]) -> String {
    let mut wtr = csv::Writer::from_writer(Vec::new());
    wtr.write_record(["path_id", "position", "seq", "domain", "referred", "synthetic"])
        .expect("in-memory write");
    for p in paths {
        for (pos, e) in p.events.iter().enumerate() {
            wtr.write_record([
                p.id.to_string().as_str(),
                &pos.to_string(),
                &e.seq.to_string(),
                &e.domain,
                if e.referred { "true" } else { "false" },
                if e.synthetic { "true" } else { "false" },
            ])
            .expect("in-memory write");
        }
    }
    String::from_utf8(wtr.into_inner().expect("in-memory flush")).expect("csv is utf-8")
}
