//! Per-class threshold policies and the full-potential threshold sweep.
//!
//! A threshold vector `lambda` turns an averaged posterior into a label via
//! `argmax_k P(y = k | x) / lambda_k`. Uniform thresholds reduce to plain
//! argmax (the usual 0.5 cutoff in binary); setting `lambda_k` to the class
//! prior maximizes macro accuracy; the binary F1 policy puts the minority
//! threshold midway between the prior and the 0.5 upper bound on the
//! F1-optimal cutoff. The sweep evaluates a metric over the 101-point
//! cutoff grid {0.00, 0.01, ..., 1.00} and reports the best attainable
//! value ("full potential").

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::PriorVector;

#[derive(Debug, Error)]
pub enum ThresholdError {
    #[error("f1_midpoint policy is defined for binary data only, got {0} classes")]
    F1MidpointMulticlass(usize),
    #[error("custom thresholds must be positive, got {0}")]
    NonPositive(f64),
    #[error("custom thresholds have {0} entries for {1} classes")]
    WrongArity(usize, usize),
    #[error("swept policy resolves from labeled scores, not priors; run a threshold sweep")]
    SweptUnresolvable,
    #[error("threshold sweep needs both classes present in the labels")]
    SingleClassSweep,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepMetric {
    MacroAccuracy,
    MacroF1,
}

/// Rule producing the per-class threshold vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ThresholdPolicy {
    /// `1/m` everywhere: plain argmax, the common 0.5 cutoff in binary.
    Uniform,
    /// Training priors (PT_MA): maximizes macro accuracy.
    Prior,
    /// Binary PT_F1: minority threshold `(p_min + 0.5) / 2`.
    F1Midpoint,
    Custom {
        lambdas: Vec<f64>,
    },
    /// Placeholder for sweep-selected thresholds; cannot be resolved from
    /// priors alone.
    Swept {
        metric: SweepMetric,
    },
}

/// Index of the minority class given priors: smallest prior, ties toward
/// the larger index (a 0.5/0.5 binary set designates class 1).
pub fn minority_by_prior(priors: &PriorVector) -> usize {
    let p = priors.as_slice();
    let mut best = 0;
    for k in 1..p.len() {
        if p[k] <= p[best] {
            best = k;
        }
    }
    best
}

/// Resolves a policy into `m` positive thresholds against training priors.
pub fn resolve_thresholds(
    policy: &ThresholdPolicy,
    priors: &PriorVector,
) -> Result<Vec<f64>, ThresholdError> {
    let m = priors.len();
    match policy {
        ThresholdPolicy::Uniform => Ok(vec![1.0 / m as f64; m]),
        ThresholdPolicy::Prior => Ok(priors.as_slice().to_vec()),
        ThresholdPolicy::F1Midpoint => {
            if m != 2 {
                return Err(ThresholdError::F1MidpointMulticlass(m));
            }
            let min = minority_by_prior(priors);
            let lambda_min = (priors.get(min) + 0.5) / 2.0;
            let mut lambdas = vec![0.0; 2];
            lambdas[min] = lambda_min;
            lambdas[1 - min] = 1.0 - lambda_min;
            Ok(lambdas)
        }
        ThresholdPolicy::Custom { lambdas } => {
            if lambdas.len() != m {
                return Err(ThresholdError::WrongArity(lambdas.len(), m));
            }
            for &l in lambdas {
                if l.partial_cmp(&0.0) != Some(std::cmp::Ordering::Greater) {
                    return Err(ThresholdError::NonPositive(l));
                }
            }
            Ok(lambdas.clone())
        }
        ThresholdPolicy::Swept { .. } => Err(ThresholdError::SweptUnresolvable),
    }
}

/// Binary cutoff labels: 1 (minority) iff posterior >= t. Equivalent to the
/// ratio rule with lambda = (1-t, t), since P1/t >= P0/(1-t) iff P1 >= t.
pub fn binary_cutoff_labels(minority_posteriors: &[f64], t: f64) -> Vec<usize> {
    minority_posteriors
        .iter()
        .map(|&p| usize::from(p >= t))
        .collect()
}

/// One point of the sweep curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub threshold: f64,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub best_t: f64,
    pub best_value: f64,
    pub curve: Vec<SweepPoint>,
}

/// Macro accuracy over 0/1 labels (1 = minority). Requires both classes.
fn macro_accuracy01(truth: &[usize], pred: &[usize]) -> Option<f64> {
    let mut n = [0usize; 2];
    let mut hit = [0usize; 2];
    for (&y, &p) in truth.iter().zip(pred) {
        n[y] += 1;
        if p == y {
            hit[y] += 1;
        }
    }
    if n[0] == 0 || n[1] == 0 {
        return None;
    }
    Some((hit[0] as f64 / n[0] as f64 + hit[1] as f64 / n[1] as f64) / 2.0)
}

/// Macro F1 over 0/1 labels; a class absent from both truth and prediction
/// contributes 0 (cannot happen when both classes are present in truth).
fn macro_f1_01(truth: &[usize], pred: &[usize]) -> Option<f64> {
    if !truth.contains(&0) || !truth.contains(&1) {
        return None;
    }
    let mut f1_sum = 0.0;
    for class in 0..2usize {
        let mut tp = 0.0;
        let mut fp = 0.0;
        let mut fn_ = 0.0;
        for (&y, &p) in truth.iter().zip(pred) {
            match (y == class, p == class) {
                (true, true) => tp += 1.0,
                (false, true) => fp += 1.0,
                (true, false) => fn_ += 1.0,
                _ => {}
            }
        }
        let denom = 2.0 * tp + fp + fn_;
        if denom > 0.0 {
            f1_sum += 2.0 * tp / denom;
        }
    }
    Some(f1_sum / 2.0)
}

fn eval_metric(metric: SweepMetric, truth: &[usize], pred: &[usize]) -> Option<f64> {
    match metric {
        SweepMetric::MacroAccuracy => macro_accuracy01(truth, pred),
        SweepMetric::MacroF1 => macro_f1_01(truth, pred),
    }
}

/// Grid search over cutoffs t in {0.00, 0.01, ..., 1.00}; returns the
/// maximizing point (smallest t among ties) and the full 101-point curve.
pub fn threshold_sweep(
    minority_posteriors: &[f64],
    true_labels: &[usize],
    metric: SweepMetric,
) -> Result<SweepResult, ThresholdError> {
    assert_eq!(minority_posteriors.len(), true_labels.len());
    if !true_labels.contains(&0) || !true_labels.contains(&1) {
        return Err(ThresholdError::SingleClassSweep);
    }
    let mut curve = Vec::with_capacity(101);
    let mut best_t = 0.0;
    let mut best_value = f64::NEG_INFINITY;
    for i in 0..=100u32 {
        let t = f64::from(i) / 100.0;
        let pred = binary_cutoff_labels(minority_posteriors, t);
        let value = eval_metric(metric, true_labels, &pred).expect("both classes present");
        curve.push(SweepPoint {
            threshold: t,
            value,
        });
        if value > best_value {
            best_value = value;
            best_t = t;
        }
    }
    Ok(SweepResult {
        best_t,
        best_value,
        curve,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn priors(p: &[f64]) -> PriorVector {
        PriorVector::new(p.to_vec()).unwrap()
    }

    #[test]
    fn prior_policy_is_the_priors() {
        let l = resolve_thresholds(&ThresholdPolicy::Prior, &priors(&[0.9, 0.1])).unwrap();
        assert_eq!(l, vec![0.9, 0.1]);
    }

    #[test]
    fn f1_midpoint_formula() {
        let l = resolve_thresholds(&ThresholdPolicy::F1Midpoint, &priors(&[0.9, 0.1])).unwrap();
        assert!((l[1] - 0.3).abs() < 1e-15);
        assert!((l[0] - 0.7).abs() < 1e-15);
        assert!((l.iter().sum::<f64>() - 1.0).abs() < 1e-12);

        // balanced boundary: midpoint collapses to the uniform 0.5
        let l = resolve_thresholds(&ThresholdPolicy::F1Midpoint, &priors(&[0.5, 0.5])).unwrap();
        assert_eq!(l, vec![0.5, 0.5]);

        // minority may be class 0
        let l = resolve_thresholds(&ThresholdPolicy::F1Midpoint, &priors(&[0.2, 0.8])).unwrap();
        assert!((l[0] - 0.35).abs() < 1e-15);
        assert!((l[1] - 0.65).abs() < 1e-15);
    }

    #[test]
    fn f1_midpoint_rejects_multiclass() {
        let e = resolve_thresholds(&ThresholdPolicy::F1Midpoint, &priors(&[0.5, 0.3, 0.2]));
        assert!(matches!(e, Err(ThresholdError::F1MidpointMulticlass(3))));
    }

    #[test]
    fn uniform_equals_prior_on_balanced_multiclass() {
        let p = priors(&[1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0]);
        let u = resolve_thresholds(&ThresholdPolicy::Uniform, &p).unwrap();
        let pr = resolve_thresholds(&ThresholdPolicy::Prior, &p).unwrap();
        for (a, b) in u.iter().zip(&pr) {
            assert!((a - b).abs() < 1e-15);
        }
        assert!((pr.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn custom_validation() {
        let p = priors(&[0.6, 0.4]);
        assert!(resolve_thresholds(
            &ThresholdPolicy::Custom {
                lambdas: vec![0.5, 0.0]
            },
            &p
        )
        .is_err());
        assert!(resolve_thresholds(&ThresholdPolicy::Custom { lambdas: vec![0.5] }, &p).is_err());
        let l = resolve_thresholds(
            &ThresholdPolicy::Custom {
                lambdas: vec![2.0, 1.0],
            },
            &p,
        )
        .unwrap();
        assert_eq!(l, vec![2.0, 1.0]);
    }

    #[test]
    fn swept_policy_is_unresolvable_from_priors() {
        let e = resolve_thresholds(
            &ThresholdPolicy::Swept {
                metric: SweepMetric::MacroAccuracy,
            },
            &priors(&[0.9, 0.1]),
        );
        assert!(matches!(e, Err(ThresholdError::SweptUnresolvable)));
    }

    #[test]
    fn cutoff_boundaries() {
        let p = [0.3, 0.99, 0.0, 1.0];
        assert_eq!(binary_cutoff_labels(&p, 0.0), vec![1, 1, 1, 1]);
        let q = [0.3, 0.99, 0.0, 0.9999];
        assert_eq!(binary_cutoff_labels(&q, 1.0), vec![0, 0, 0, 0]);
        assert_eq!(binary_cutoff_labels(&[0.9, 0.2], 0.5), vec![1, 0]);
    }

    #[test]
    fn sweep_finds_smallest_perfect_grid_point() {
        // independently derived by exhaustive evaluation: any cutoff in
        // (0.3, 0.8] separates perfectly; the smallest grid point is 0.31
        let post = [0.9, 0.8, 0.3, 0.2];
        let truth = [1, 1, 0, 0];
        let r = threshold_sweep(&post, &truth, SweepMetric::MacroAccuracy).unwrap();
        assert_eq!(r.best_value, 1.0);
        assert!((r.best_t - 0.31).abs() < 1e-12, "best_t {}", r.best_t);
        assert_eq!(r.curve.len(), 101);
    }

    #[test]
    fn sweep_on_constant_posteriors_is_two_valued() {
        let post = [0.4; 6];
        let truth = [1, 0, 0, 0, 0, 1];
        let r = threshold_sweep(&post, &truth, SweepMetric::MacroAccuracy).unwrap();
        let mut distinct: Vec<f64> = r.curve.iter().map(|p| p.value).collect();
        distinct.sort_by(f64::total_cmp);
        distinct.dedup();
        assert!(distinct.len() <= 2, "curve values {:?}", distinct);
        // all-minority and all-majority assignments both score 0.5 here
        assert_eq!(r.best_value, 0.5);
    }

    #[test]
    fn sweep_rejects_single_class() {
        let e = threshold_sweep(&[0.1, 0.9], &[1, 1], SweepMetric::MacroAccuracy);
        assert!(matches!(e, Err(ThresholdError::SingleClassSweep)));
    }

    #[test]
    fn cutoff_agrees_with_ratio_form_pointwise() {
        // the binary ratio comparison with >= toward the minority is
        // algebraically the cutoff rule; check across a randomized grid
        let mut rng = crate::rng::stream_rng(77, 0);
        use rand::Rng;
        for _ in 0..2000 {
            let p1: f64 = rng.random();
            let ti: u32 = rng.random_range(1..100);
            let t = f64::from(ti) / 100.0;
            let cutoff = usize::from(p1 >= t);
            let ratio = usize::from(p1 / t >= (1.0 - p1) / (1.0 - t));
            assert_eq!(cutoff, ratio, "p1={} t={}", p1, t);
        }
    }

    #[test]
    fn sweep_dominates_every_fixed_cutoff() {
        let mut rng = crate::rng::stream_rng(78, 0);
        use rand::Rng;
        for _ in 0..50 {
            let n = rng.random_range(10..60);
            let post: Vec<f64> = (0..n).map(|_| rng.random()).collect();
            let mut truth: Vec<usize> = (0..n).map(|_| usize::from(rng.random::<bool>())).collect();
            truth[0] = 0;
            truth[1] = 1;
            let r = threshold_sweep(&post, &truth, SweepMetric::MacroF1).unwrap();
            for pt in &r.curve {
                assert!(r.best_value >= pt.value);
            }
            // curve value at 0.5 equals the uniform-policy metric
            let uniform = eval_metric(
                SweepMetric::MacroF1,
                &truth,
                &binary_cutoff_labels(&post, 0.5),
            )
            .unwrap();
            assert_eq!(r.curve[50].value, uniform);
        }
    }
}
