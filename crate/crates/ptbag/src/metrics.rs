//! Performance measures for imbalanced classification plus calibration
//! diagnostics: confusion matrices, per-class rates, macro accuracy, macro
//! F1, precision-recall curves with AUCPR, the stratified Brier score and
//! reliability tables.
//!
//! Plain accuracy is misleading under imbalance (an all-majority predictor
//! scores 99% on 99/1 data); macro accuracy — the mean of per-class recalls
//! — exposes that predictor as 0.5. Rates with a 0/0 denominator are
//! reported as undefined rather than coerced to 0, except per-class F1
//! inside macro F1, where an absent class contributes 0 with a warning flag
//! to keep fold scores comparable.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum MetricError {
    #[error("label vectors have different lengths: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("labels contain class {0}, but the matrix has {1} classes")]
    ClassOutOfRange(usize, usize),
    #[error("metric undefined: {0}")]
    Undefined(String),
}

/// m x m counts; entry (i, j) counts instances of true class i predicted as
/// class j.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    m: usize,
    counts: Vec<u64>,
}

pub fn confusion(
    labels_true: &[usize],
    labels_pred: &[usize],
    m: usize,
) -> Result<ConfusionMatrix, MetricError> {
    if labels_true.len() != labels_pred.len() {
        return Err(MetricError::LengthMismatch(
            labels_true.len(),
            labels_pred.len(),
        ));
    }
    let mut counts = vec![0u64; m * m];
    for (&t, &p) in labels_true.iter().zip(labels_pred) {
        if t >= m {
            return Err(MetricError::ClassOutOfRange(t, m));
        }
        if p >= m {
            return Err(MetricError::ClassOutOfRange(p, m));
        }
        counts[t * m + p] += 1;
    }
    Ok(ConfusionMatrix { m, counts })
}

impl ConfusionMatrix {
    pub fn n_classes(&self) -> usize {
        self.m
    }

    pub fn get(&self, true_class: usize, pred_class: usize) -> u64 {
        self.counts[true_class * self.m + pred_class]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn true_count(&self, class: usize) -> u64 {
        (0..self.m).map(|j| self.get(class, j)).sum()
    }

    pub fn pred_count(&self, class: usize) -> u64 {
        (0..self.m).map(|i| self.get(i, class)).sum()
    }

    /// Recall of one class, `None` when the class never occurs.
    pub fn recall(&self, class: usize) -> Option<f64> {
        let n = self.true_count(class);
        if n == 0 {
            None
        } else {
            Some(self.get(class, class) as f64 / n as f64)
        }
    }

    /// Precision of one class, `None` when it is never predicted.
    pub fn precision(&self, class: usize) -> Option<f64> {
        let n = self.pred_count(class);
        if n == 0 {
            None
        } else {
            Some(self.get(class, class) as f64 / n as f64)
        }
    }
}

/// Binary rates with class 1 as positive, the usual minority convention.
/// 0/0 rates are `None`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BinaryRates {
    pub recall: Option<f64>, // TPR
    pub precision: Option<f64>,
    pub tnr: Option<f64>,
    pub fpr: Option<f64>,
}

pub fn binary_rates(cm: &ConfusionMatrix) -> BinaryRates {
    assert_eq!(cm.n_classes(), 2, "binary_rates needs a 2x2 matrix");
    let tp = cm.get(1, 1) as f64;
    let fn_ = cm.get(1, 0) as f64;
    let fp = cm.get(0, 1) as f64;
    let tn = cm.get(0, 0) as f64;
    let rate = |num: f64, den: f64| if den > 0.0 { Some(num / den) } else { None };
    BinaryRates {
        recall: rate(tp, tp + fn_),
        precision: rate(tp, tp + fp),
        tnr: rate(tn, fp + tn),
        fpr: rate(fp, fp + tn),
    }
}

/// Mean per-class recall; `(TPR + TNR) / 2` in binary. Errors when a true
/// class is absent (its recall is 0/0).
pub fn macro_accuracy(cm: &ConfusionMatrix) -> Result<f64, MetricError> {
    let mut sum = 0.0;
    for k in 0..cm.n_classes() {
        match cm.recall(k) {
            Some(r) => sum += r,
            None => {
                return Err(MetricError::Undefined(format!(
                    "class {} absent from the true labels",
                    k
                )));
            }
        }
    }
    Ok(sum / cm.n_classes() as f64)
}

/// F1 of one class treated as positive: `2TP / (2TP + FP + FN)`. `None`
/// when TP = FP = FN = 0.
pub fn f1(cm: &ConfusionMatrix, positive: usize) -> Option<f64> {
    let tp = cm.get(positive, positive) as f64;
    let fp = (cm.pred_count(positive) - cm.get(positive, positive)) as f64;
    let fn_ = (cm.true_count(positive) - cm.get(positive, positive)) as f64;
    let denom = 2.0 * tp + fp + fn_;
    if denom > 0.0 {
        Some(2.0 * tp / denom)
    } else {
        None
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MacroF1 {
    pub value: f64,
    /// Classes whose F1 was 0/0 and entered the mean as 0.
    pub undefined_classes: Vec<usize>,
}

/// Mean per-class F1, each class in turn as positive.
pub fn macro_f1(cm: &ConfusionMatrix) -> MacroF1 {
    let mut sum = 0.0;
    let mut undefined_classes = Vec::new();
    for k in 0..cm.n_classes() {
        match f1(cm, k) {
            Some(v) => sum += v,
            None => undefined_classes.push(k),
        }
    }
    MacroF1 {
        value: sum / cm.n_classes() as f64,
        undefined_classes,
    }
}

/// Precision-recall curve points plus its area (step-wise average
/// precision).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrCurve {
    /// (recall, precision) at each distinct score cut, recall
    /// non-decreasing.
    pub points: Vec<(f64, f64)>,
    pub auc: f64,
}

/// PR curve of the minority (positive = 1) scores. Tied scores are handled
/// as one block, so the curve never benefits from an optimistic ordering
/// inside a tie. AUC is the step-wise sum `(R_n - R_{n-1}) * P_n`, the
/// average-precision estimator; trapezoids over PR points are knowingly
/// avoided since linear PR interpolation is invalid.
pub fn pr_curve(minority_posteriors: &[f64], labels: &[usize]) -> Result<PrCurve, MetricError> {
    if minority_posteriors.len() != labels.len() {
        return Err(MetricError::LengthMismatch(
            minority_posteriors.len(),
            labels.len(),
        ));
    }
    let pos_total = labels.iter().filter(|&&y| y == 1).count() as f64;
    let neg_total = labels.len() as f64 - pos_total;
    if pos_total == 0.0 || neg_total == 0.0 {
        return Err(MetricError::Undefined("PR curve needs both classes".into()));
    }

    let mut order: Vec<usize> = (0..labels.len()).collect();
    order.sort_by(|&a, &b| minority_posteriors[b].total_cmp(&minority_posteriors[a]));

    let mut points = Vec::new();
    let mut auc = 0.0;
    let mut tp = 0.0;
    let mut fp = 0.0;
    let mut prev_recall = 0.0;
    let mut i = 0;
    while i < order.len() {
        let score = minority_posteriors[order[i]];
        // consume the whole tie block
        let mut j = i;
        while j < order.len() && minority_posteriors[order[j]] == score {
            if labels[order[j]] == 1 {
                tp += 1.0;
            } else {
                fp += 1.0;
            }
            j += 1;
        }
        let recall = tp / pos_total;
        let precision = tp / (tp + fp);
        points.push((recall, precision));
        auc += (recall - prev_recall) * precision;
        prev_recall = recall;
        i = j;
    }
    Ok(PrCurve { points, auc })
}

/// Stratified Brier score: for class c, the mean over its instances of
/// `(1 - P_c)^2 + sum_{k != c} P_k^2`. The overall score weights classes by
/// prevalence, which makes it identical to the plain mean squared error.
#[derive(Debug, Clone, PartialEq)]
pub struct BrierScores {
    /// `None` for a class absent from the labels.
    pub per_class: Vec<Option<f64>>,
    pub overall: f64,
}

pub fn stratified_brier(
    posteriors: &[Vec<f64>],
    labels: &[usize],
) -> Result<BrierScores, MetricError> {
    if posteriors.len() != labels.len() {
        return Err(MetricError::LengthMismatch(posteriors.len(), labels.len()));
    }
    if posteriors.is_empty() {
        return Err(MetricError::Undefined("no instances".into()));
    }
    let m = posteriors[0].len();
    let mut sums = vec![0.0; m];
    let mut counts = vec![0usize; m];
    for (p, &y) in posteriors.iter().zip(labels) {
        if y >= m {
            return Err(MetricError::ClassOutOfRange(y, m));
        }
        let mut sq = 0.0;
        for (k, &pk) in p.iter().enumerate() {
            let ideal = if k == y { 1.0 } else { 0.0 };
            sq += (pk - ideal) * (pk - ideal);
        }
        sums[y] += sq;
        counts[y] += 1;
    }
    let per_class: Vec<Option<f64>> = sums
        .iter()
        .zip(&counts)
        .map(|(&s, &c)| if c > 0 { Some(s / c as f64) } else { None })
        .collect();
    let overall = sums.iter().sum::<f64>() / labels.len() as f64;
    Ok(BrierScores { per_class, overall })
}

pub const RELIABILITY_BINS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReliabilityBin {
    /// Mean predicted minority probability, `None` for an empty bin.
    pub mean_predicted: Option<f64>,
    /// Observed minority fraction, `None` for an empty bin.
    pub observed: Option<f64>,
    pub count: usize,
}

/// Ten equal-width bins over [0, 1]; only the last bin is closed on the
/// right.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReliabilityTable {
    pub bins: Vec<ReliabilityBin>,
}

pub fn reliability_bins(
    minority_posteriors: &[f64],
    labels: &[usize],
) -> Result<ReliabilityTable, MetricError> {
    if minority_posteriors.len() != labels.len() {
        return Err(MetricError::LengthMismatch(
            minority_posteriors.len(),
            labels.len(),
        ));
    }
    let mut sum_p = [0.0; RELIABILITY_BINS];
    let mut sum_y = [0usize; RELIABILITY_BINS];
    let mut count = [0usize; RELIABILITY_BINS];
    for (&p, &y) in minority_posteriors.iter().zip(labels) {
        let b = ((p * RELIABILITY_BINS as f64) as usize).min(RELIABILITY_BINS - 1);
        sum_p[b] += p;
        sum_y[b] += usize::from(y == 1);
        count[b] += 1;
    }
    let bins = (0..RELIABILITY_BINS)
        .map(|b| ReliabilityBin {
            mean_predicted: (count[b] > 0).then(|| sum_p[b] / count[b] as f64),
            observed: (count[b] > 0).then(|| sum_y[b] as f64 / count[b] as f64),
            count: count[b],
        })
        .collect();
    Ok(ReliabilityTable { bins })
}
