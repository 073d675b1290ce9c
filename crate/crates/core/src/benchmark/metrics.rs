use std::collections::BTreeMap;
use std::fmt::Write;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::task::TaskKind;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: usize,
}

/// Undefined values (no records) are NaN in memory and `null` in JSON.
mod nan_as_null {
    use super::*;

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::NAN))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub total: usize,
    /// False when there were no records; every rate is then NaN.
    pub defined: bool,
    #[serde(with = "nan_as_null")]
    pub accuracy: f64,
    #[serde(with = "nan_as_null")]
    pub macro_f1: f64,
    /// Share of runs that completed with schema-valid output.
    #[serde(with = "nan_as_null")]
    pub exec_success: f64,
    /// Execution success among correctly classified records; 0 when none were.
    #[serde(with = "nan_as_null")]
    pub exec_success_given_correct: f64,
    pub per_class: BTreeMap<TaskKind, ClassMetrics>,
    /// `confusion[gold][predicted]`, indexed in [`TaskKind::ALL`] order.
    pub confusion: Vec<Vec<usize>>,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Metrics from `(gold, predicted)` pairs and per-record execution outcomes.
///
/// Precision of a class never predicted is 0, as is F1 when precision and
/// recall are both 0. Macro-F1 averages over classes with non-zero support.
pub fn compute_metrics(pairs: &[(TaskKind, TaskKind)], exec_success: &[bool]) -> Metrics {
    assert_eq!(pairs.len(), exec_success.len(), "one execution outcome per record");
    let n = TaskKind::ALL.len();
    let mut confusion = vec![vec![0usize; n]; n];
    for (gold, predicted) in pairs {
        confusion[gold.index()][predicted.index()] += 1;
    }
    let total = pairs.len();
    let mut per_class = BTreeMap::new();
    for kind in TaskKind::ALL {
        let k = kind.index();
        let tp = confusion[k][k];
        let support: usize = confusion[k].iter().sum();
        let predicted: usize = confusion.iter().map(|row| row[k]).sum();
        let precision = ratio(tp, predicted);
        let recall = ratio(tp, support);
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        per_class.insert(kind, ClassMetrics { precision, recall, f1, support });
    }
    if total == 0 {
        return Metrics {
            total,
            defined: false,
            accuracy: f64::NAN,
            macro_f1: f64::NAN,
            exec_success: f64::NAN,
            exec_success_given_correct: f64::NAN,
            per_class,
            confusion,
        };
    }
    let correct: usize = (0..n).map(|k| confusion[k][k]).sum();
    let supported: Vec<f64> = per_class.values().filter(|c| c.support > 0).map(|c| c.f1).collect();
    let macro_f1 = supported.iter().sum::<f64>() / supported.len() as f64;
    let successes = exec_success.iter().filter(|ok| **ok).count();
    let correct_successes = pairs
        .iter()
        .zip(exec_success)
        .filter(|((g, p), ok)| g == p && **ok)
        .count();
    Metrics {
        total,
        defined: true,
        accuracy: ratio(correct, total),
        macro_f1,
        exec_success: ratio(successes, total),
        exec_success_given_correct: ratio(correct_successes, correct),
        per_class,
        confusion,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    Text,
    Json,
    Csv,
}

impl std::str::FromStr for ReportFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "text" => Ok(ReportFormat::Text),
            "json" => Ok(ReportFormat::Json),
            "csv" => Ok(ReportFormat::Csv),
            other => Err(format!("unknown report format {other:?}")),
        }
    }
}

fn fixed(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.4}")
    } else {
        "NaN".to_string()
    }
}

pub fn report(metrics: &Metrics, format: ReportFormat) -> String {
    match format {
        ReportFormat::Json => serde_json::to_string_pretty(metrics).expect("metrics serialize"),
        ReportFormat::Text => text_report(metrics),
        ReportFormat::Csv => csv_report(metrics),
    }
}

fn text_report(m: &Metrics) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "records: {}", m.total);
    if !m.defined {
        out.push_str("metrics undefined: no records\n");
    }
    let _ = writeln!(out, "Acc. | F1 | Exec. Success");
    let _ = writeln!(out, "{} | {} | {}", fixed(m.accuracy), fixed(m.macro_f1), fixed(m.exec_success));
    let _ = writeln!(
        out,
        "exec. success given correct intent: {}",
        fixed(m.exec_success_given_correct)
    );
    let _ = writeln!(out, "\n{:<25} {:>9} {:>9} {:>9} {:>8}", "class", "precision", "recall", "f1", "support");
    for (kind, c) in &m.per_class {
        let _ = writeln!(
            out,
            "{:<25} {:>9} {:>9} {:>9} {:>8}",
            kind.label(),
            fixed(c.precision),
            fixed(c.recall),
            fixed(c.f1),
            c.support
        );
    }
    out
}

fn csv_report(m: &Metrics) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    let num = |v: f64| if v.is_finite() { format!("{v:.6}") } else { "NaN".into() };
    w.write_record(["row", "precision", "recall", "f1", "support", "accuracy", "exec_success"])
        .expect("in-memory write");
    for (kind, c) in &m.per_class {
        w.write_record([
            kind.label().to_string(),
            num(c.precision),
            num(c.recall),
            num(c.f1),
            c.support.to_string(),
            String::new(),
            String::new(),
        ])
        .expect("in-memory write");
    }
    w.write_record([
        "overall".to_string(),
        String::new(),
        String::new(),
        num(m.macro_f1),
        m.total.to_string(),
        num(m.accuracy),
        num(m.exec_success),
    ])
    .expect("in-memory write");
    String::from_utf8(w.into_inner().expect("flush")).expect("csv is utf-8")
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use TaskKind::*;

    fn all_correct() -> Metrics {
        let pairs: Vec<_> = TaskKind::ALL.iter().flat_map(|k| [(*k, *k); 3]).collect();
        compute_metrics(&pairs, &vec![true; pairs.len()])
    }

    #[test]
    fn perfect_run() {
        let m = all_correct();
        assert_eq!((m.accuracy, m.macro_f1, m.exec_success), (1.0, 1.0, 1.0));
        assert!(report(&m, ReportFormat::Text).contains("\n1.0000 | 1.0000 | 1.0000\n"));
    }

    #[test]
    fn empty_input_is_undefined() {
        let m = compute_metrics(&[], &[]);
        assert!(!m.defined);
        assert!(m.accuracy.is_nan());
        let json = report(&m, ReportFormat::Json);
        assert!(json.contains("\"accuracy\": null"));
        let back: Metrics = serde_json::from_str(&json).unwrap();
        assert!(back.macro_f1.is_nan() && !back.defined);
    }

    #[test]
    fn json_round_trip() {
        let m = compute_metrics(&[(PathSearching, FreeForm), (FreeForm, FreeForm)], &[false, true]);
        let back: Metrics = serde_json::from_str(&report(&m, ReportFormat::Json)).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn csv_shape() {
        let csv = report(&all_correct(), ReportFormat::Csv);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "row,precision,recall,f1,support,accuracy,exec_success");
        assert_eq!(lines.len(), 1 + 7 + 1);
        assert!(lines[8].starts_with("overall,"));
    }

    #[test]
    fn zero_support_excluded_from_macro() {
        let m = compute_metrics(&[(ConceptClustering, ConceptClustering)], &[true]);
        assert_eq!(m.macro_f1, 1.0);
        assert_eq!(m.per_class[&FreeForm].support, 0);
    }

    #[test]
    fn conditional_exec_success() {
        let m = compute_metrics(
            &[(IdeaHamster, IdeaHamster), (IdeaHamster, FreeForm), (FreeForm, FreeForm)],
            &[true, true, false],
        );
        assert!((m.exec_success - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(m.exec_success_given_correct, 0.5);
    }

    fn kind() -> impl Strategy<Value = TaskKind> {
        (0..7usize).prop_map(|i| TaskKind::ALL[i])
    }

    proptest! {
        #[test]
        fn invariants(pairs in prop::collection::vec((kind(), kind()), 1..100), seed in any::<u64>()) {
            let exec: Vec<bool> = (0..pairs.len()).map(|i| (seed >> (i % 64)) & 1 == 1).collect();
            let m = compute_metrics(&pairs, &exec);
            let trace: usize = (0..7).map(|k| m.confusion[k][k]).sum();
            prop_assert_eq!(m.accuracy, trace as f64 / pairs.len() as f64);
            for kind in TaskKind::ALL {
                let row: usize = m.confusion[kind.index()].iter().sum();
                prop_assert_eq!(row, m.per_class[&kind].support);
            }
            for v in [m.accuracy, m.macro_f1, m.exec_success, m.exec_success_given_correct] {
                prop_assert!((0.0..=1.0).contains(&v));
            }
        }
    }
}
