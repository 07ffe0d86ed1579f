//! Per-hop classification and ROC metrics.
//!
//! The model is evaluated one hop level at a time: the matrix for hop h
//! treats "visited a site exactly h clicks from a threat" as the prediction
//! and "the user went on to reach the threat" as the outcome. Misses
//! (direct, unreferred arrivals at a threat) and true negatives (visits to
//! sites with no relation to any threat) do not depend on the hop level, so
//! those two counts are identical across all matrices of one run.
//!
//! Two false-positive-rate denominators are supported: [`FprMode::Standard`]
//! is the textbook fp/(fp+tn); [`FprMode::Paper`] is fp/(tn+fn), which
//! reproduces the published table this tool's golden tests are checked
//! against. The mode only affects reporting, never classification.

use std::collections::HashSet;

use thiserror::Error;

use crate::graph::HopMap;
use crate::paths::NavigationPath;

/// TP/FP/FN/TN counts for one hop level.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConfusionMatrix {
    pub hop: u32,
    pub true_positives: u64,
    pub false_positives: u64,
    pub false_negatives: u64,
    pub true_negatives: u64,
}

impl ConfusionMatrix {
    pub fn new(
        hop: u32,
        true_positives: u64,
        false_positives: u64,
        false_negatives: u64,
        true_negatives: u64,
    ) -> Self {
        ConfusionMatrix {
            hop,
            true_positives,
            false_positives,
            false_negatives,
            true_negatives,
        }
    }

    pub fn total(&self) -> u64 {
        self.true_positives + self.false_positives + self.false_negatives + self.true_negatives
    }
}

/// Which false-positive-rate denominator to report.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FprMode {
    /// fp/(tn+fn): matches the published reference table cell-for-cell.
    #[default]
    Paper,
    /// fp/(fp+tn): the conventional definition, for use on real data.
    Standard,
}

/// Derived rates for one hop level. A `None` means the defining ratio had a
/// zero denominator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RocMetrics {
    pub hop: u32,
    /// fp/(tn+fn). Not a true rate: when fp outgrows tn+fn this exceeds 1,
    /// which cannot happen with the standard denominator.
    pub fpr_paper: Option<f64>,
    pub fpr_standard: Option<f64>,
    /// True-positive rate; identical to sensitivity.
    pub tpr: Option<f64>,
    pub precision: Option<f64>,
    pub accuracy: Option<f64>,
    pub f_measure: Option<f64>,
    pub npv: Option<f64>,
}

impl RocMetrics {
    pub fn fpr(&self, mode: FprMode) -> Option<f64> {
        match mode {
            FprMode::Paper => self.fpr_paper,
            FprMode::Standard => self.fpr_standard,
        }
    }
}

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("hop map was built with max_hops {actual} but classification requested {expected}")]
    HopMismatch { expected: u32, actual: u32 },
    #[error("fn/tn counts are not static across the given matrices")]
    NonStaticCounts,
    #[error("no matrices given")]
    EmptyMatrices,
    #[error("npv undefined: tn + fn = 0")]
    UndefinedNpv,
    #[error("malformed matrices csv: {0}")]
    Csv(String),
}

/// How hop-0 true positives are counted. The reference table's hop-0 row
/// defines only its FP cell (direct visits to related non-threat sites), so
/// the TP interpretation is configurable rather than asserted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum HopZeroTruePositives {
    /// TP(0) = referred arrivals at a threat domain.
    #[default]
    ReferredThreatArrivals,
    /// Leave TP(0) at zero.
    Disabled,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ClassifyOptions {
    pub hop_zero_tp: HopZeroTruePositives,
}

/// Classify every non-synthetic visit event into the per-hop matrices,
/// hops 0..=K. See the module docs for the class definitions.
pub fn classify(
    paths: &[NavigationPath],
    hopmap: &HopMap,
    threats: &HashSet<String>,
    max_hops: u32,
) -> Result<Vec<ConfusionMatrix>, EvalError> {
    classify_with(paths, hopmap, threats, max_hops, ClassifyOptions::default())
}

pub fn classify_with(
    paths: &[NavigationPath],
    hopmap: &HopMap,
    threats: &HashSet<String>,
    max_hops: u32,
    options: ClassifyOptions,
) -> Result<Vec<ConfusionMatrix>, EvalError> {
    if hopmap.max_hops() != max_hops {
        return Err(EvalError::HopMismatch {
            expected: max_hops,
            actual: hopmap.max_hops(),
        });
    }
    // The threat set and the hop map's distance-0 entries are the same
    // domains when both came from one labeled graph; taking the union keeps
    // the classes mutually exclusive even if a caller passes a stale set.
    let is_threat = |d: &str| threats.contains(d) || hopmap.distance(d) == Some(0);

    let k = max_hops as usize;
    let mut tp = vec![0u64; k + 1];
    let mut fp = vec![0u64; k + 1];
    let mut false_negatives = 0u64;
    let mut true_negatives = 0u64;

    for path in paths {
        // reaches[i]: some event strictly after position i visits a threat.
        let mut reaches = vec![false; path.events.len()];
        let mut seen = false;
        for (i, event) in path.events.iter().enumerate().rev() {
            reaches[i] = seen;
            seen = seen || is_threat(&event.domain);
        }
        for (i, event) in path.events.iter().enumerate() {
            if event.synthetic {
                continue;
            }
            if is_threat(&event.domain) {
                if event.referred {
                    if options.hop_zero_tp == HopZeroTruePositives::ReferredThreatArrivals {
                        tp[0] += 1;
                    }
                } else {
                    false_negatives += 1;
                }
            } else if let Some(h) = hopmap.distance(&event.domain) {
                if reaches[i] {
                    tp[h as usize] += 1;
                } else {
                    fp[h as usize] += 1;
                }
                if !event.referred {
                    fp[0] += 1;
                }
            } else {
                true_negatives += 1;
            }
        }
    }

    Ok((0..=k)
        .map(|h| ConfusionMatrix {
            hop: h as u32,
            true_positives: tp[h],
            false_positives: fp[h],
            false_negatives,
            true_negatives,
        })
        .collect())
}

fn ratio(num: u64, den: u64) -> Option<f64> {
    if den == 0 {
        None
    } else {
        Some(num as f64 / den as f64)
    }
}

/// Derive the full rate suite from one matrix. Every zero-denominator ratio
/// is `None`; nothing here can divide by zero.
pub fn metrics(m: &ConfusionMatrix) -> RocMetrics {
    let tp = m.true_positives;
    let fp = m.false_positives;
    let fn_count = m.false_negatives;
    let tn = m.true_negatives;
    let tpr = ratio(tp, tp + fn_count);
    let precision = ratio(tp, tp + fp);
    let f_measure = match (precision, tpr) {
        (Some(p), Some(r)) if p + r > 0.0 => Some(2.0 * p * r / (p + r)),
        _ => None,
    };
    RocMetrics {
        hop: m.hop,
        fpr_paper: ratio(fp, tn + fn_count),
        fpr_standard: ratio(fp, fp + tn),
        tpr,
        precision,
        accuracy: ratio(tp + tn, m.total()),
        f_measure,
        npv: ratio(tn, tn + fn_count),
    }
}

pub fn metrics_all(matrices: &[ConfusionMatrix]) -> Vec<RocMetrics> {
    matrices.iter().map(metrics).collect()
}

/// The run-level negative predictive value. FN and TN are static across
/// hops, so any matrix yields it; mismatched counts are a usage error.
pub fn npv_run(matrices: &[ConfusionMatrix]) -> Result<f64, EvalError> {
    let first = matrices.first().ok_or(EvalError::EmptyMatrices)?;
    let (fn_count, tn) = (first.false_negatives, first.true_negatives);
    if matrices
        .iter()
        .any(|m| m.false_negatives != fn_count || m.true_negatives != tn)
    {
        return Err(EvalError::NonStaticCounts);
    }
    ratio(tn, tn + fn_count).ok_or(EvalError::UndefinedNpv)
}

/// Round half away from zero to three decimals; the table-rendering rule.
pub fn round3(v: f64) -> f64 {
    (v * 1000.0).round() / 1000.0
}

fn format3(v: f64) -> String {
    let thousandths = (v * 1000.0).round() as i64;
    format!("{}.{:03}", thousandths / 1000, (thousandths % 1000).abs())
}

fn format_cell(v: Option<f64>) -> String {
    v.map(format3).unwrap_or_default()
}

/// Matrix counts as CSV, rows ascending by hop.
pub fn export_confusion_csv(matrices: &[ConfusionMatrix]) -> String {
    let mut rows: Vec<&ConfusionMatrix> = matrices.iter().collect();
    rows.sort_by_key(|m| m.hop);
    let mut wtr = csv::Writer::from_writer(Vec::new());
    wtr.write_record(["hop", "fp", "fn", "tp", "tn"])
        .expect("in-memory write");
    for m in rows {
        wtr.write_record([
            m.hop.to_string(),
            m.false_positives.to_string(),
            m.false_negatives.to_string(),
            m.true_positives.to_string(),
            m.true_negatives.to_string(),
        ])
        .expect("in-memory write");
    }
    String::from_utf8(wtr.into_inner().expect("in-memory flush")).expect("csv is utf-8")
}

/// Parse the confusion CSV back; the `roc` subcommand re-plots from it.
pub fn parse_confusion_csv(text: &str) -> Result<Vec<ConfusionMatrix>, EvalError> {
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    {
        let headers = reader.headers().map_err(|e| EvalError::Csv(e.to_string()))?;
        let expected = ["hop", "fp", "fn", "tp", "tn"];
        if headers.iter().ne(expected) {
            return Err(EvalError::Csv(format!(
                "expected header hop,fp,fn,tp,tn, got {:?}",
                headers.iter().collect::<Vec<_>>().join(",")
            )));
        }
    }
    let mut matrices = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let record = record.map_err(|e| EvalError::Csv(format!("row {}: {e}", row + 1)))?;
        let field = |i: usize, name: &str| -> Result<u64, EvalError> {
            record
                .get(i)
                .ok_or_else(|| EvalError::Csv(format!("row {}: missing {name}", row + 1)))?
                .parse()
                .map_err(|e| EvalError::Csv(format!("row {}: {name}: {e}", row + 1)))
        };
        matrices.push(ConfusionMatrix {
            hop: field(0, "hop")? as u32,
            false_positives: field(1, "fp")?,
            false_negatives: field(2, "fn")?,
            true_positives: field(3, "tp")?,
            true_negatives: field(4, "tn")?,
        });
    }
    Ok(matrices)
}

/// Rate table as CSV, one row per hop, mirroring the reference table's
/// column order. Undefined cells are left empty.
pub fn export_metrics_csv(metrics_list: &[RocMetrics], mode: FprMode) -> String {
    let mut rows: Vec<&RocMetrics> = metrics_list.iter().collect();
    rows.sort_by_key(|m| m.hop);
    let mut wtr = csv::Writer::from_writer(Vec::new());
    wtr.write_record([
        "hop",
        "fp_rate",
        "tp_rate",
        "precision",
        "sensitivity",
        "accuracy",
        "f_measure",
    ])
    .expect("in-memory write");
    for m in rows {
        wtr.write_record([
            m.hop.to_string(),
            format_cell(m.fpr(mode)),
            format_cell(m.tpr),
            format_cell(m.precision),
            format_cell(m.tpr),
            format_cell(m.accuracy),
            format_cell(m.f_measure),
        ])
        .expect("in-memory write");
    }
    String::from_utf8(wtr.into_inner().expect("in-memory flush")).expect("csv is utf-8")
}

/// ROC curve artifacts: the point list as CSV and an SVG plot.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RocArtifacts {
    pub csv: String,
    pub svg: String,
    /// Hops skipped because fpr or tpr was undefined or outside [0,1].
    pub omitted: usize,
}

/// Emit the ROC point set. Hops with an undefined rate, or a paper-mode fpr
/// beyond the [0,1] axes, are omitted and counted rather than failing the
/// run.
pub fn emit_roc(metrics_list: &[RocMetrics], mode: FprMode) -> RocArtifacts {
    let mut rows: Vec<&RocMetrics> = metrics_list.iter().collect();
    rows.sort_by_key(|m| m.hop);

    let mut points: Vec<(u32, f64, f64)> = Vec::new();
    let mut omitted = 0;
    for m in rows {
        match (m.fpr(mode), m.tpr) {
            // The FprMode::Paper rate can exceed 1 when fp > tn+fn; such a
            // point has no position on the fixed [0,1] axes, so it is
            // dropped from the curve the same way undefined rates are.
            (Some(fpr), Some(tpr))
                if (0.0..=1.0).contains(&fpr) && (0.0..=1.0).contains(&tpr) =>
            {
                points.push((m.hop, fpr, tpr));
            }
            _ => omitted += 1,
        }
    }

    let mut wtr = csv::Writer::from_writer(Vec::new());
    wtr.write_record(["hop", "fpr", "tpr"]).expect("in-memory write");
    for &(hop, fpr, tpr) in &points {
        wtr.write_record([hop.to_string(), format3(fpr), format3(tpr)])
            .expect("in-memory write");
    }
    let csv =
        String::from_utf8(wtr.into_inner().expect("in-memory flush")).expect("csv is utf-8");

    RocArtifacts {
        csv,
        svg: svg_plot(&points),
        omitted,
    }
}

const SVG_SIDE: f64 = 800.0;
const SVG_MARGIN: f64 = 60.0;
const SVG_SPAN: f64 = SVG_SIDE - 2.0 * SVG_MARGIN;

fn sx(u: f64) -> f64 {
    SVG_MARGIN + u * SVG_SPAN
}

fn sy(u: f64) -> f64 {
    SVG_SIDE - SVG_MARGIN - u * SVG_SPAN
}

fn svg_plot(points: &[(u32, f64, f64)]) -> String {
    let mut s = String::new();
    s.push_str(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"800\" height=\"800\" \
         viewBox=\"0 0 800 800\">\n",
    );
    s.push_str("  <rect x=\"0\" y=\"0\" width=\"800\" height=\"800\" fill=\"white\"/>\n");
    // Axes with ticks every 0.25.
    for i in 0..=4 {
        let u = i as f64 / 4.0;
        s.push_str(&format!(
            "  <line x1=\"{:.1}\" y1=\"{:.1}\" x2=\"{:.1}\" y2=\"{:.1}\" stroke=\"#999\" stroke-width=\"1\"/>\n",
            sx(u), sy(0.0), sx(u), sy(0.0) + 6.0,
        ));
        s.push_str(&format!(
            "  <text x=\"{:.1}\" y=\"{:.1}\" font-size=\"14\" text-anchor=\"middle\">{:.2}</text>\n",
            sx(u), sy(0.0) + 24.0, u,
        ));
        s.push_str(&format!(
            "  <line x1=\"{:.1}\" y1=\"{:.1}\" x2=\"{:.1}\" y2=\"{:.1}\" stroke=\"#999\" stroke-width=\"1\"/>\n",
            sx(0.0) - 6.0, sy(u), sx(0.0), sy(u),
        ));
        s.push_str(&format!(
            "  <text x=\"{:.1}\" y=\"{:.1}\" font-size=\"14\" text-anchor=\"end\">{:.2}</text>\n",
            sx(0.0) - 10.0, sy(u) + 5.0, u,
        ));
    }
    s.push_str(&format!(
        "  <line x1=\"{:.1}\" y1=\"{:.1}\" x2=\"{:.1}\" y2=\"{:.1}\" stroke=\"black\" stroke-width=\"2\"/>\n",
        sx(0.0), sy(0.0), sx(1.0), sy(0.0),
    ));
    s.push_str(&format!(
        "  <line x1=\"{:.1}\" y1=\"{:.1}\" x2=\"{:.1}\" y2=\"{:.1}\" stroke=\"black\" stroke-width=\"2\"/>\n",
        sx(0.0), sy(0.0), sx(0.0), sy(1.0),
    ));
    s.push_str(&format!(
        "  <text x=\"{:.1}\" y=\"{:.1}\" font-size=\"16\" text-anchor=\"middle\">false positive rate</text>\n",
        sx(0.5), SVG_SIDE - 14.0,
    ));
    s.push_str(&format!(
        "  <text x=\"20\" y=\"{:.1}\" font-size=\"16\" text-anchor=\"middle\" transform=\"rotate(-90 20 {:.1})\">true positive rate</text>\n",
        sy(0.5), sy(0.5),
    ));
    // Chance line: x = y.
    s.push_str(&format!(
        "  <line x1=\"{:.1}\" y1=\"{:.1}\" x2=\"{:.1}\" y2=\"{:.1}\" stroke=\"black\" stroke-width=\"1\" stroke-dasharray=\"8 6\"/>\n",
        sx(0.0), sy(0.0), sx(1.0), sy(1.0),
    ));
    for &(hop, fpr, tpr) in points {
        s.push_str(&format!(
            "  <circle cx=\"{:.1}\" cy=\"{:.1}\" r=\"6\" fill=\"black\"/>\n",
            sx(fpr), sy(tpr),
        ));
        s.push_str(&format!(
            "  <text x=\"{:.1}\" y=\"{:.1}\" font-size=\"16\">{hop}-hop</text>\n",
            sx(fpr) + 10.0, sy(tpr) - 10.0,
        ));
    }
    s.push_str("</svg>\n");
    s
}
