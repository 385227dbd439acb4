//! Platt scaling: a posteriori sigmoid calibration of ensemble scores.
//!
//! A logistic model `p(s) = 1 / (1 + exp(A s + B))` is fit by regularized
//! maximum likelihood to out-of-fold scores from an internal 3-fold
//! cross-validation, with Platt's soft targets `(N+ + 1) / (N+ + 2)` and
//! `1 / (N- + 2)` in place of the hard 0/1 labels. The deployed ensemble is
//! refit on all the training data; only the sigmoid comes from the CV
//! scores. Labels use a fixed 0.5 cutoff on the calibrated probability.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{stratified_cv, DataError, Dataset};
use crate::ensemble::{BaggedEnsemble, EnsembleError};
use crate::rng::derive_seed;

#[derive(Debug, Error)]
pub enum CalibrationError {
    #[error("Platt scaling is defined for binary data, got {0} classes")]
    BinaryOnly(usize),
    #[error("need scores from both classes to fit the sigmoid")]
    SingleClass,
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Ensemble(#[from] EnsembleError),
}

/// Fitted sigmoid `1 / (1 + exp(a * s + b))`; `a <= 0`, so the map never
/// reorders scores.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlattModel {
    pub a: f64,
    pub b: f64,
}

/// Platt's transformed regression targets.
pub fn platt_targets(n_pos: usize, n_neg: usize) -> (f64, f64) {
    (
        (n_pos as f64 + 1.0) / (n_pos as f64 + 2.0),
        1.0 / (n_neg as f64 + 2.0),
    )
}

pub fn apply_platt(model: &PlattModel, score: f64) -> f64 {
    1.0 / (1.0 + (model.a * score + model.b).exp())
}

/// 0.5 cutoff on the calibrated probability; 1 = positive (minority).
pub fn platt_label(model: &PlattModel, score: f64) -> usize {
    usize::from(apply_platt(model, score) >= 0.5)
}

fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

/// Negative log-likelihood, gradient and Hessian of (a, b) under soft
/// targets.
fn nll_grad_hess(scores: &[f64], targets: &[f64], a: f64, b: f64) -> (f64, [f64; 2], [f64; 3]) {
    let mut nll = 0.0;
    let mut g = [0.0; 2];
    let mut h = [0.0; 3]; // [d2/da2, d2/dadb, d2/db2]
    for (&s, &t) in scores.iter().zip(targets) {
        let z = a * s + b;
        let p = 1.0 / (1.0 + z.exp());
        // ln p = -softplus(z), ln(1-p) = z - softplus(z)
        nll -= t * (-softplus(z)) + (1.0 - t) * (z - softplus(z));
        let dz = t - p;
        g[0] += dz * s;
        g[1] += dz;
        let w = (p * (1.0 - p)).max(1e-300);
        h[0] += w * s * s;
        h[1] += w * s;
        h[2] += w;
    }
    (nll, g, h)
}

/// Fits the sigmoid on (score, 0/1 label) pairs by Newton descent with
/// backtracking and a tiny ridge. Constant score sets fit the intercept
/// only; a fitted slope that came out positive (anti-correlated scores) is
/// refit the same way, so the model stays monotone non-decreasing.
pub fn fit_platt_scores(scores: &[f64], labels: &[usize]) -> Result<PlattModel, CalibrationError> {
    let n_pos = labels.iter().filter(|&&y| y == 1).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(CalibrationError::SingleClass);
    }
    let (t_pos, t_neg) = platt_targets(n_pos, n_neg);
    let targets: Vec<f64> = labels
        .iter()
        .map(|&y| if y == 1 { t_pos } else { t_neg })
        .collect();

    let mean = scores.iter().sum::<f64>() / scores.len() as f64;
    let variance =
        scores.iter().map(|&s| (s - mean) * (s - mean)).sum::<f64>() / scores.len() as f64;

    let model = newton_fit(scores, &targets, variance > 0.0);
    if model.a > 0.0 {
        return Ok(newton_fit(scores, &targets, false));
    }
    Ok(model)
}

fn newton_fit(scores: &[f64], targets: &[f64], fit_slope: bool) -> PlattModel {
    const RIDGE: f64 = 1e-12;
    const TOL: f64 = 1e-8;
    const MAX_ITER: usize = 100;

    let n_pos_soft: f64 = targets.iter().sum();
    let n = targets.len() as f64;
    let mut a = 0.0;
    // intercept start: p = mean target
    let mut b = ((n - n_pos_soft) / n_pos_soft).ln();
    let (mut f, mut g, mut h) = nll_grad_hess(scores, targets, a, b);

    for _ in 0..MAX_ITER {
        let grad_norm = if fit_slope {
            (g[0] * g[0] + g[1] * g[1]).sqrt()
        } else {
            g[1].abs()
        };
        if grad_norm < TOL {
            break;
        }
        // Newton descent: delta = -H^{-1} g
        let (da, db) = if fit_slope {
            let h00 = h[0] + RIDGE;
            let h11 = h[2] + RIDGE;
            let det = h00 * h11 - h[1] * h[1];
            (
                -(h11 * g[0] - h[1] * g[1]) / det,
                -(h00 * g[1] - h[1] * g[0]) / det,
            )
        } else {
            (0.0, -g[1] / (h[2] + RIDGE))
        };

        let mut step = 1.0;
        loop {
            let (fa, fb) = (a + step * da, b + step * db);
            let (f_new, g_new, h_new) = nll_grad_hess(scores, targets, fa, fb);
            if f_new <= f + 1e-12 {
                a = fa;
                b = fb;
                f = f_new;
                g = g_new;
                h = h_new;
                break;
            }
            step *= 0.5;
            if step < 1e-12 {
                return PlattModel { a, b };
            }
        }
    }
    PlattModel { a, b }
}

/// Fits a Platt sigmoid for an ensemble family: an internal stratified
/// 3-fold CV builds each fold's ensemble on the remaining two thirds and
/// records out-of-fold minority posteriors; the sigmoid is fit to those
/// scores.
pub fn fit_platt<F>(d: &Dataset, build: F, seed: u64) -> Result<PlattModel, CalibrationError>
where
    F: Fn(&Dataset, u64) -> Result<BaggedEnsemble, EnsembleError>,
{
    if d.n_classes() != 2 {
        return Err(CalibrationError::BinaryOnly(d.n_classes()));
    }
    let minority = d.minority_class();
    let plan = stratified_cv(d, 1, 3, derive_seed(seed, &[0]))?;
    let mut scores = Vec::with_capacity(d.n_rows());
    let mut labels = Vec::with_capacity(d.n_rows());
    for (fold, (train, test)) in plan.folds.iter().enumerate() {
        let train_set = d.subset(train);
        let ensemble = build(&train_set, derive_seed(seed, &[1 + fold as u64]))?;
        for &i in test {
            let p = ensemble.posterior(d.row(i))?;
            scores.push(p[minority]);
            labels.push(usize::from(d.label(i) == minority));
        }
    }
    fit_platt_scores(&scores, &labels)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{gen_gaussian_imbalanced, PriorVector};
    use crate::ensemble::fit_ensemble;
    use crate::metrics::pr_curve;
    use crate::sampling::SamplerSpec;
    use crate::tree::TreeParams;

    #[test]
    fn target_formulas() {
        let (tp, _) = platt_targets(8, 1);
        assert!((tp - 0.9).abs() < 1e-15);
        let (_, tn) = platt_targets(1, 18);
        assert!((tn - 0.05).abs() < 1e-15);
    }

    #[test]
    fn flat_model_outputs_half() {
        let m = PlattModel { a: 0.0, b: 0.0 };
        for s in [-5.0, 0.0, 0.3, 10.0] {
            assert_eq!(apply_platt(&m, s), 0.5);
        }
    }

    #[test]
    fn midpoint_maps_to_half() {
        let m = PlattModel { a: -3.0, b: 1.2 };
        let mid = -m.b / m.a;
        assert!((apply_platt(&m, mid) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn monotone_in_score() {
        let scores: Vec<f64> = (0..40).map(|i| i as f64 / 40.0).collect();
        let labels: Vec<usize> = (0..40).map(|i| usize::from(i % 3 == 0 || i > 25)).collect();
        let m = fit_platt_scores(&scores, &labels).unwrap();
        assert!(m.a <= 0.0);
        let mut prev = -1.0;
        for s in [-1.0, 0.0, 0.2, 0.5, 0.8, 1.0, 2.0] {
            let p = apply_platt(&m, s);
            assert!(p >= prev);
            prev = p;
        }
    }

    #[test]
    fn separated_scores_order_around_half() {
        // positives all above the negatives: the fitted sigmoid must put
        // positives above 0.5 and negatives below, with finite parameters
        let mut scores = vec![0.8, 0.85, 0.9, 0.95];
        let mut labels = vec![1, 1, 1, 1];
        for s in [0.05, 0.1, 0.15, 0.2, 0.25, 0.3] {
            scores.push(s);
            labels.push(0);
        }
        let m = fit_platt_scores(&scores, &labels).unwrap();
        assert!(m.a.is_finite() && m.b.is_finite());
        assert!(m.a < 0.0);
        for (&s, &y) in scores.iter().zip(&labels) {
            let p = apply_platt(&m, s);
            assert!(p > 0.0 && p < 1.0);
            if y == 1 {
                assert!(p > 0.5, "positive score {} calibrated to {}", s, p);
            } else {
                assert!(p < 0.5, "negative score {} calibrated to {}", s, p);
            }
        }
    }

    #[test]
    fn constant_scores_fit_base_rate_everywhere() {
        let scores = vec![0.4; 26];
        let mut labels = vec![0; 18];
        labels.extend(vec![1; 8]);
        let m = fit_platt_scores(&scores, &labels).unwrap();
        assert_eq!(m.a, 0.0);
        // closed form: p = mean of the soft targets
        let (tp, tn) = platt_targets(8, 18);
        let expected = (8.0 * tp + 18.0 * tn) / 26.0;
        for s in [0.0, 0.4, 1.0, 7.0] {
            assert!(
                (apply_platt(&m, s) - expected).abs() < 1e-6,
                "at {}: {} vs {}",
                s,
                apply_platt(&m, s),
                expected
            );
        }
    }

    #[test]
    fn anticorrelated_scores_fall_back_to_intercept() {
        let scores: Vec<f64> = (0..20).map(|i| i as f64 / 20.0).collect();
        let labels: Vec<usize> = (0..20).map(|i| usize::from(i < 10)).collect();
        let m = fit_platt_scores(&scores, &labels).unwrap();
        assert!(m.a <= 0.0);
        assert_eq!(
            m.a, 0.0,
            "anti-correlated fit must flatten, got a = {}",
            m.a
        );
    }

    #[test]
    fn calibration_preserves_aucpr() {
        let mut rng = crate::rng::stream_rng(120, 0);
        use rand::Rng;
        let n = 120;
        let mut scores = Vec::with_capacity(n);
        let mut labels = Vec::with_capacity(n);
        for _ in 0..n {
            let s: f64 = rng.random();
            scores.push(s);
            labels.push(usize::from(rng.random::<f64>() < s));
        }
        if !labels.contains(&1) || !labels.contains(&0) {
            panic!("generator produced a single class");
        }
        let m = fit_platt_scores(&scores, &labels).unwrap();
        assert!(m.a < 0.0);
        let calibrated: Vec<f64> = scores.iter().map(|&s| apply_platt(&m, s)).collect();
        let before = pr_curve(&scores, &labels).unwrap().auc;
        let after = pr_curve(&calibrated, &labels).unwrap().auc;
        assert!((before - after).abs() < 1e-12);
    }

    #[test]
    fn end_to_end_platt_on_synthetic_ensembles() {
        let priors = PriorVector::new(vec![0.8, 0.2]).unwrap();
        let (d, _) =
            gen_gaussian_imbalanced(180, priors, vec![vec![-1.0], vec![1.0]], 1.0, 42).unwrap();
        let m = fit_platt(
            &d,
            |train, seed| {
                fit_ensemble(
                    train,
                    10,
                    SamplerSpec::Bootstrap,
                    TreeParams::default(),
                    seed,
                )
            },
            7,
        )
        .unwrap();
        assert!(m.a.is_finite() && m.b.is_finite());
        assert!(m.a <= 0.0);
        // the calibrated probability is a probability
        for s in [0.0, 0.3, 0.7, 1.0] {
            let p = apply_platt(&m, s);
            assert!((0.0..=1.0).contains(&p));
        }
        // deterministic in the seed
        let m2 = fit_platt(
            &d,
            |train, seed| {
                fit_ensemble(
                    train,
                    10,
                    SamplerSpec::Bootstrap,
                    TreeParams::default(),
                    seed,
                )
            },
            7,
        )
        .unwrap();
        assert_eq!(m, m2);
    }
}
