//! Confusion matrices, precision/recall/F1 with macro and weighted averages,
//! and the per-(target, model) comparison table.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    /// Sorted union of true and predicted labels.
    pub label_vocab: Vec<String>,
    /// Row-major `k x k`; entry `(t, p)` counts rows with true `t` predicted `p`.
    pub counts: Vec<u64>,
}

impl ConfusionMatrix {
    pub fn n_classes(&self) -> usize {
        self.label_vocab.len()
    }

    pub fn get(&self, truth: usize, pred: usize) -> u64 {
        self.counts[truth * self.n_classes() + pred]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn tp(&self, k: usize) -> u64 {
        self.get(k, k)
    }

    pub fn fp(&self, k: usize) -> u64 {
        (0..self.n_classes()).map(|t| self.get(t, k)).sum::<u64>() - self.tp(k)
    }

    pub fn fn_(&self, k: usize) -> u64 {
        (0..self.n_classes()).map(|p| self.get(k, p)).sum::<u64>() - self.tp(k)
    }

    pub fn support(&self, k: usize) -> u64 {
        self.tp(k) + self.fn_(k)
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.label_vocab.binary_search_by(|l| l.as_str().cmp(label)).ok()
    }
}

pub fn confusion<S: AsRef<str>>(y_true: &[S], y_pred: &[S]) -> Result<ConfusionMatrix> {
    if y_true.len() != y_pred.len() {
        return Err(Error::shape(format!(
            "{} true labels but {} predictions",
            y_true.len(),
            y_pred.len()
        )));
    }
    let vocab: Vec<String> = y_true
        .iter()
        .chain(y_pred)
        .map(|s| s.as_ref())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .map(str::to_owned)
        .collect();
    let k = vocab.len();
    let mut cm = ConfusionMatrix {
        label_vocab: vocab,
        counts: vec![0; k * k],
    };
    for (t, p) in y_true.iter().zip(y_pred) {
        let ti = cm.index_of(t.as_ref()).expect("label in vocabulary");
        let pi = cm.index_of(p.as_ref()).expect("label in vocabulary");
        cm.counts[ti * k + pi] += 1;
    }
    Ok(cm)
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl Prf {
    pub fn from_rates(precision: f64, recall: f64) -> Prf {
        Prf {
            precision,
            recall,
            f1: f1_score(precision, recall),
        }
    }
}

pub fn f1_score(precision: f64, recall: f64) -> f64 {
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub label: String,
    pub support: u64,
    #[serde(flatten)]
    pub scores: Prf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub target: String,
    pub model: String,
    pub per_class: Vec<ClassMetrics>,
    pub macro_avg: Prf,
    pub weighted_avg: Prf,
    pub accuracy: f64,
}

pub fn precision_recall_f1(cm: &ConfusionMatrix) -> MetricsReport {
    let k = cm.n_classes();
    let per_class: Vec<ClassMetrics> = (0..k)
        .map(|c| {
            let tp = cm.tp(c);
            ClassMetrics {
                label: cm.label_vocab[c].clone(),
                support: cm.support(c),
                scores: Prf::from_rates(ratio(tp, tp + cm.fp(c)), ratio(tp, tp + cm.fn_(c))),
            }
        })
        .collect();
    let mean = |f: fn(&Prf) -> f64| {
        if k == 0 {
            0.0
        } else {
            per_class.iter().map(|c| f(&c.scores)).sum::<f64>() / k as f64
        }
    };
    let total = cm.total();
    let weighted = |f: fn(&Prf) -> f64| {
        if total == 0 {
            0.0
        } else {
            per_class
                .iter()
                .map(|c| f(&c.scores) * c.support as f64)
                .sum::<f64>()
                / total as f64
        }
    };
    let correct: u64 = (0..k).map(|c| cm.tp(c)).sum();
    MetricsReport {
        target: String::new(),
        model: String::new(),
        macro_avg: Prf {
            precision: mean(|p| p.precision),
            recall: mean(|p| p.recall),
            f1: mean(|p| p.f1),
        },
        weighted_avg: Prf {
            precision: weighted(|p| p.precision),
            recall: weighted(|p| p.recall),
            f1: weighted(|p| p.f1),
        },
        accuracy: ratio(correct, total),
        per_class,
    }
}

impl MetricsReport {
    pub fn labelled(mut self, target: &str, model: &str) -> Self {
        self.target = target.to_owned();
        self.model = model.to_owned();
        self
    }
}

/// Convenience: confusion matrix plus report in one step.
pub fn evaluate_labels<S: AsRef<str>>(
    target: &str,
    model: &str,
    y_true: &[S],
    y_pred: &[S],
) -> Result<MetricsReport> {
    Ok(precision_recall_f1(&confusion(y_true, y_pred)?).labelled(target, model))
}

/// Arithmetic mean rounded to two decimals.
pub fn cross_target_average(f1s: [f64; 3]) -> f64 {
    let mean = f1s.iter().sum::<f64>() / 3.0;
    (mean * 100.0).round() / 100.0
}

pub const COMPARISON_HEADER: [&str; 5] = ["target", "model", "precision", "recall", "f1"];

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonRow {
    pub target: String,
    pub model: String,
    pub scores: Prf,
}

/// Writes macro-averaged scores, one row per report, rows grouped by target
/// in order of first appearance.
pub fn emit_comparison(reports: &[MetricsReport], path: &Path) -> Result<()> {
    if reports.is_empty() {
        return Err(Error::param("comparison needs at least one report"));
    }
    let mut targets: Vec<&str> = Vec::new();
    for r in reports {
        if !targets.contains(&r.target.as_str()) {
            targets.push(&r.target);
        }
    }
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(file);
    w.write_record(COMPARISON_HEADER)?;
    for t in targets {
        for r in reports.iter().filter(|r| r.target == t) {
            let m = &r.macro_avg;
            w.write_record([
                r.target.clone(),
                r.model.clone(),
                format!("{:.6}", m.precision),
                format!("{:.6}", m.recall),
                format!("{:.6}", m.f1),
            ])?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

pub fn read_comparison(path: &Path) -> Result<Vec<ComparisonRow>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = csv::Reader::from_reader(file);
    let header: Vec<String> = r.headers()?.iter().map(str::to_owned).collect();
    if header != COMPARISON_HEADER {
        return Err(Error::Schema(format!(
            "comparison header must be {}",
            COMPARISON_HEADER.join(",")
        )));
    }
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let num = |i: usize| -> Result<f64> {
            rec[i]
                .parse()
                .map_err(|_| Error::Schema(format!("non-numeric {} value {:?}", COMPARISON_HEADER[i], &rec[i])))
        };
        rows.push(ComparisonRow {
            target: rec[0].to_owned(),
            model: rec[1].to_owned(),
            scores: Prf {
                precision: num(2)?,
                recall: num(3)?,
                f1: num(4)?,
            },
        });
    }
    Ok(rows)
}

/// Fixed-width table of macro and weighted scores.
pub fn format_table(reports: &[MetricsReport]) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<16} {:<8} {:>9} {:>9} {:>9} {:>11} {:>9}",
        "target", "model", "precision", "recall", "macro_f1", "weighted_f1", "accuracy"
    );
    for r in reports {
        let _ = writeln!(
            out,
            "{:<16} {:<8} {:>9.4} {:>9.4} {:>9.4} {:>11.4} {:>9.4}",
            r.target,
            r.model,
            r.macro_avg.precision,
            r.macro_avg.recall,
            r.macro_avg.f1,
            r.weighted_avg.f1,
            r.accuracy
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_counted_confusion() {
        let cm = confusion(&["A", "A", "B"], &["A", "B", "B"]).unwrap();
        let (a, b) = (cm.index_of("A").unwrap(), cm.index_of("B").unwrap());
        assert_eq!((cm.tp(a), cm.fn_(a), cm.fp(a)), (1, 1, 0));
        assert_eq!((cm.tp(b), cm.fn_(b), cm.fp(b)), (1, 0, 1));
        assert_eq!(cm.total(), 3);
    }

    #[test]
    fn perfect_predictions() {
        let y = ["x", "y", "y", "z"];
        let cm = confusion(&y, &y).unwrap();
        for k in 0..3 {
            assert_eq!(cm.fp(k) + cm.fn_(k), 0);
        }
        let r = precision_recall_f1(&cm);
        assert_eq!(r.macro_avg, Prf { precision: 1.0, recall: 1.0, f1: 1.0 });
        assert_eq!(r.weighted_avg.f1, 1.0);
        assert_eq!(r.accuracy, 1.0);
    }

    #[test]
    fn length_mismatch() {
        assert!(confusion(&["a"], &["a", "b"]).is_err());
    }

    #[test]
    fn f1_examples() {
        assert!((f1_score(0.91, 0.91) - 0.91).abs() < 1e-12);
        assert!((f1_score(0.5, 1.0) - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(f1_score(0.0, 0.0), 0.0);
    }

    #[test]
    fn empty_input_gives_zero_report() {
        let r = precision_recall_f1(&confusion::<&str>(&[], &[]).unwrap());
        assert_eq!(r.macro_avg, Prf::default());
        assert_eq!(r.accuracy, 0.0);
    }

    #[test]
    fn cross_target_examples() {
        assert_eq!(cross_target_average([0.91, 0.78, 0.77]), 0.82);
        assert_eq!(cross_target_average([1.0, 1.0, 1.0]), 1.0);
        assert_eq!(cross_target_average([0.0, 0.0, 0.0]), 0.0);
    }

    #[test]
    fn prediction_only_label_has_zero_recall_row() {
        let r = evaluate_labels("t", "m", &["a", "a"], &["a", "c"]).unwrap();
        let c = r.per_class.iter().find(|c| c.label == "c").unwrap();
        assert_eq!(c.support, 0);
        assert_eq!(c.scores, Prf::default());
    }

    #[test]
    fn comparison_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cmp.csv");
        let mut reports = Vec::new();
        for t in ["top", "bottom", "color"] {
            for m in ["knn", "forest", "gbt"] {
                reports.push(
                    evaluate_labels(t, m, &["a", "b", "b", "c"], &["a", "b", "c", "c"]).unwrap(),
                );
            }
        }
        // interleave targets to check grouping
        reports.swap(1, 4);
        emit_comparison(&reports, &path).unwrap();
        let rows = read_comparison(&path).unwrap();
        assert_eq!(rows.len(), 9);
        let targets: Vec<&str> = rows.iter().map(|r| r.target.as_str()).collect();
        assert_eq!(
            targets,
            ["top", "top", "top", "bottom", "bottom", "bottom", "color", "color", "color"]
        );
        let f1 = reports[0].macro_avg.f1;
        assert!((rows[0].scores.f1 - f1).abs() <= 1e-6);
        assert!(emit_comparison(&[], &path).is_err());
    }

    #[test]
    fn one_report_gives_one_row() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("one.csv");
        emit_comparison(&[evaluate_labels("t", "m", &["a"], &["a"]).unwrap()], &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text, "target,model,precision,recall,f1\nt,m,1.000000,1.000000,1.000000\n");
    }

    #[test]
    fn unwritable_path() {
        let r = evaluate_labels("t", "m", &["a"], &["a"]).unwrap();
        assert!(emit_comparison(&[r], Path::new("/nonexistent/dir/x.csv")).is_err());
    }
}
