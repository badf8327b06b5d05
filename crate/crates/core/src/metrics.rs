//! Segment-level classification metrics and multi-seed aggregation.

use serde::{Deserialize, Serialize};

use crate::adversarial::{argmax, BatchItem, Model, PreparedSegment};
use crate::data::NUM_GESTURES;
use crate::error::{Error, Result};
use crate::relation::SubsetMode;

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub jaccard: f64,
    pub f1: f64,
}

impl Summary {
    fn fields(&self) -> [f64; 5] {
        [self.accuracy, self.precision, self.recall, self.jaccard, self.f1]
    }

    fn from_fields(f: [f64; 5]) -> Self {
        Summary {
            accuracy: f[0],
            precision: f[1],
            recall: f[2],
            jaccard: f[3],
            f1: f[4],
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub jaccard: f64,
    pub f1: f64,
    /// False when the class occurs in neither labels nor predictions.
    pub present: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub num_classes: usize,
    /// `confusion[true][predicted]`; averaged counts after aggregation.
    pub confusion: Vec<Vec<f64>>,
    pub per_class: Vec<ClassMetrics>,
    pub mean: Summary,
    /// Population std across seeds; zero for a single run.
    pub std: Summary,
    pub seeds: Vec<u64>,
    pub count: f64,
}

fn ratio(num: f64, den: f64) -> f64 {
    if den > 0.0 {
        num / den
    } else {
        0.0
    }
}

/// Metrics from label/prediction pairs over `num_classes` classes.
///
/// Macro averages run over classes present in labels or predictions; a
/// present class with an empty precision or recall denominator contributes 0.
pub fn report_from_predictions(labels: &[usize], predictions: &[usize], num_classes: usize) -> Result<MetricsReport> {
    if labels.is_empty() {
        return Err(Error::EmptySegments);
    }
    if labels.len() != predictions.len() {
        return Err(Error::Dimension {
            expected: labels.len(),
            got: predictions.len(),
            context: "labels vs predictions",
        });
    }
    let mut confusion = vec![vec![0.0; num_classes]; num_classes];
    for (&y, &p) in labels.iter().zip(predictions) {
        if y >= num_classes || p >= num_classes {
            return Err(Error::UnknownGesture(y.max(p) as i64));
        }
        confusion[y][p] += 1.0;
    }
    let n = labels.len() as f64;
    let mut per_class = Vec::with_capacity(num_classes);
    let mut sums = [0.0; 4];
    let mut present = 0usize;
    for c in 0..num_classes {
        let tp = confusion[c][c];
        let fp: f64 = (0..num_classes).filter(|&r| r != c).map(|r| confusion[r][c]).sum();
        let fn_: f64 = (0..num_classes).filter(|&p| p != c).map(|p| confusion[c][p]).sum();
        if tp + fp + fn_ == 0.0 {
            per_class.push(ClassMetrics::default());
            continue;
        }
        if tp + fp == 0.0 || tp + fn_ == 0.0 {
            log::debug!("class {c}: empty precision/recall denominator, contributing 0");
        }
        let pr = ratio(tp, tp + fp);
        let re = ratio(tp, tp + fn_);
        let ja = ratio(tp, tp + fp + fn_);
        let f1 = if pr + re > 0.0 { 2.0 * pr * re / (pr + re) } else { 0.0 };
        sums[0] += pr;
        sums[1] += re;
        sums[2] += ja;
        sums[3] += f1;
        present += 1;
        per_class.push(ClassMetrics {
            precision: pr,
            recall: re,
            jaccard: ja,
            f1,
            present: true,
        });
    }
    let trace: f64 = (0..num_classes).map(|c| confusion[c][c]).sum();
    let k = present as f64;
    Ok(MetricsReport {
        num_classes,
        confusion,
        per_class,
        mean: Summary {
            accuracy: trace / n,
            precision: sums[0] / k,
            recall: sums[1] / k,
            jaccard: sums[2] / k,
            f1: sums[3] / k,
        },
        std: Summary::default(),
        seeds: Vec::new(),
        count: n,
    })
}

/// Predicted classes (argmax of the mixed distribution) in eval mode.
pub fn predict(model: &Model, segments: &[PreparedSegment], lambda: f64, visual: bool) -> Result<Vec<usize>> {
    segments
        .iter()
        .map(|s| {
            let plan = model.plan(s, SubsetMode::Eval)?;
            let p = model.predict_proba(BatchItem { segment: s, plan: &plan }, lambda, visual)?;
            Ok(argmax(&p))
        })
        .collect()
}

pub fn evaluate(model: &Model, segments: &[PreparedSegment], lambda: f64, visual: bool) -> Result<MetricsReport> {
    if segments.is_empty() {
        return Err(Error::EmptySegments);
    }
    let labels: Vec<usize> = segments
        .iter()
        .map(|s| s.gesture.ok_or_else(|| Error::Config(format!("segment {} has no label", s.id))))
        .collect::<Result<_>>()?;
    let preds = predict(model, segments, lambda, visual)?;
    report_from_predictions(&labels, &preds, NUM_GESTURES)
}

fn mean_std(values: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = values.clone().count() as f64;
    let mean = values.clone().sum::<f64>() / n;
    let var = values.map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Elementwise mean and population standard deviation across runs.
pub fn aggregate(reports: &[MetricsReport]) -> Result<MetricsReport> {
    let first = reports.first().ok_or(Error::EmptySegments)?;
    let k = first.num_classes;
    for r in reports {
        if r.num_classes != k {
            return Err(Error::InconsistentReports(k, r.num_classes));
        }
    }
    let n = reports.len() as f64;
    let mut mean = [0.0; 5];
    let mut std = [0.0; 5];
    for i in 0..5 {
        let (m, s) = mean_std(reports.iter().map(|r| r.mean.fields()[i]));
        mean[i] = m;
        std[i] = s;
    }
    let confusion = (0..k)
        .map(|a| (0..k).map(|b| reports.iter().map(|r| r.confusion[a][b]).sum::<f64>() / n).collect())
        .collect();
    let per_class = (0..k)
        .map(|c| {
            let rs = reports.iter().map(|r| r.per_class[c]);
            ClassMetrics {
                precision: rs.clone().map(|m| m.precision).sum::<f64>() / n,
                recall: rs.clone().map(|m| m.recall).sum::<f64>() / n,
                jaccard: rs.clone().map(|m| m.jaccard).sum::<f64>() / n,
                f1: rs.clone().map(|m| m.f1).sum::<f64>() / n,
                present: rs.clone().any(|m| m.present),
            }
        })
        .collect();
    Ok(MetricsReport {
        num_classes: k,
        confusion,
        per_class,
        mean: Summary::from_fields(mean),
        std: Summary::from_fields(std),
        seeds: reports.iter().flat_map(|r| r.seeds.iter().copied()).collect(),
        count: reports.iter().map(|r| r.count).sum::<f64>() / n,
    })
}

impl MetricsReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// Confusion matrix as delimited text, rows = true class.
    pub fn confusion_csv(&self) -> String {
        let mut out = String::from("true\\pred");
        for c in 0..self.num_classes {
            out += &format!(",{c}");
        }
        out.push('\n');
        for (c, row) in self.confusion.iter().enumerate() {
            out += &c.to_string();
            for v in row {
                out += &format!(",{v}");
            }
            out.push('\n');
        }
        out
    }
}
