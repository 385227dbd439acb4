//! Report assembly over a results table: score matrices for the stats
//! module, gap-to-potential tables, recall-symmetry analysis and the
//! plot-ready CSV exports.

use serde::{Deserialize, Serialize};

use super::{HarnessError, ReliabilityRecord, ResultsTable};
use crate::stats::{one_sample_t, ScoreMatrix, StatsError};

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Per-dataset fold means of one metric, for the stats module. Every
/// (method, dataset) cell must have at least one defined value.
pub fn score_matrix(
    rt: &ResultsTable,
    metric: &str,
    n_trees: usize,
) -> Result<ScoreMatrix, HarnessError> {
    let methods = rt.methods();
    let datasets = rt.datasets();
    let grouped = rt.fold_values(metric, n_trees);
    let mut scores = vec![vec![f64::NAN; datasets.len()]; methods.len()];
    for ((dataset, method), values) in grouped {
        let defined: Vec<f64> = values.into_iter().flatten().collect();
        if defined.is_empty() {
            continue;
        }
        let mi = methods.iter().position(|m| *m == method).unwrap();
        let di = datasets.iter().position(|d| *d == dataset).unwrap();
        scores[mi][di] = mean(&defined);
    }
    for (mi, row) in scores.iter().enumerate() {
        for (di, v) in row.iter().enumerate() {
            if v.is_nan() {
                return Err(HarnessError::NoRecords(format!(
                    "metric '{}' for method '{}' on dataset '{}' at {} trees",
                    metric, methods[mi], datasets[di], n_trees
                )));
            }
        }
    }
    ScoreMatrix::new(methods, datasets, scores).map_err(HarnessError::Stats)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodGap {
    pub method: String,
    /// Mean over datasets of the per-dataset mean fold gap.
    pub mean_gap: f64,
    pub per_dataset: Vec<(String, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapReport {
    pub metric: String,
    pub n_trees: usize,
    pub per_method: Vec<MethodGap>,
}

/// Gap to full potential: swept best value minus realized value, per fold,
/// averaged per dataset and then across datasets. Nonnegative by
/// construction (the sweep dominates every fixed threshold on the same
/// posteriors).
pub fn full_potential_report(
    rt: &ResultsTable,
    metric: &str,
    n_trees: usize,
) -> Result<GapReport, HarnessError> {
    let sweep_metric = format!("sweep_best_{}", metric);
    let realized = rt.fold_values(metric, n_trees);
    let swept = rt.fold_values(&sweep_metric, n_trees);
    if swept.is_empty() {
        return Err(HarnessError::MissingSweep);
    }

    let mut per_method: Vec<MethodGap> = Vec::new();
    for ((dataset, method), real_vals) in &realized {
        let Some((_, sweep_vals)) = swept.iter().find(|((d, m), _)| d == dataset && m == method)
        else {
            return Err(HarnessError::MissingSweep);
        };
        if real_vals.len() != sweep_vals.len() {
            return Err(HarnessError::NoRecords(format!(
                "mismatched fold counts for '{}' on '{}'",
                method, dataset
            )));
        }
        let gaps: Vec<f64> = real_vals
            .iter()
            .zip(sweep_vals)
            .filter_map(|(r, s)| Some(s.as_ref()? - r.as_ref()?))
            .collect();
        if gaps.is_empty() {
            continue;
        }
        let gap = mean(&gaps);
        match per_method.iter_mut().find(|g| g.method == *method) {
            Some(g) => g.per_dataset.push((dataset.clone(), gap)),
            None => per_method.push(MethodGap {
                method: method.clone(),
                mean_gap: 0.0,
                per_dataset: vec![(dataset.clone(), gap)],
            }),
        }
    }
    if per_method.is_empty() {
        return Err(HarnessError::NoRecords(format!(
            "metric '{}' at {} trees",
            metric, n_trees
        )));
    }
    for g in &mut per_method {
        let gaps: Vec<f64> = g.per_dataset.iter().map(|(_, v)| *v).collect();
        g.mean_gap = mean(&gaps);
    }
    Ok(GapReport {
        metric: metric.to_string(),
        n_trees,
        per_method,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecallSymmetry {
    pub method: String,
    /// Mean over datasets of the per-dataset (minority recall - majority
    /// recall) fold mean.
    pub mean_difference: f64,
    pub t: Option<f64>,
    pub p: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

/// Tests, per method, whether the two components of binary macro accuracy
/// are balanced: one-sample t-test of the per-dataset recall differences
/// against zero.
pub fn recall_symmetry_report(
    rt: &ResultsTable,
    n_trees: usize,
) -> Result<Vec<RecallSymmetry>, HarnessError> {
    let min_rec = rt.fold_values("recall_minority", n_trees);
    let maj_rec = rt.fold_values("recall_majority", n_trees);
    if min_rec.is_empty() {
        return Err(HarnessError::NoRecords(format!(
            "per-class recalls at {} trees; request the macro_accuracy metric",
            n_trees
        )));
    }
    let mut out: Vec<RecallSymmetry> = Vec::new();
    let methods = rt.methods();
    for method in &methods {
        let mut per_dataset_diffs = Vec::new();
        for ((dataset, m), min_vals) in &min_rec {
            if m != method {
                continue;
            }
            let Some((_, maj_vals)) = maj_rec
                .iter()
                .find(|((d, mm), _)| d == dataset && mm == method)
            else {
                continue;
            };
            let diffs: Vec<f64> = min_vals
                .iter()
                .zip(maj_vals)
                .filter_map(|(a, b)| Some(a.as_ref()? - b.as_ref()?))
                .collect();
            if !diffs.is_empty() {
                per_dataset_diffs.push(mean(&diffs));
            }
        }
        if per_dataset_diffs.is_empty() {
            continue;
        }
        let mean_difference = mean(&per_dataset_diffs);
        let (t, p, note) = match one_sample_t(&per_dataset_diffs, 0.0) {
            Ok(r) => (Some(r.t), Some(r.p), None),
            Err(StatsError::TooFewObservations(_)) => {
                (None, None, Some("needs >= 2 datasets".to_string()))
            }
            Err(StatsError::ZeroVariance) => (
                None,
                None,
                Some("degenerate: zero variance across datasets".to_string()),
            ),
            Err(e) => (None, None, Some(e.to_string())),
        };
        out.push(RecallSymmetry {
            method: method.clone(),
            mean_difference,
            t,
            p,
            note,
        });
    }
    Ok(out)
}

/// Mean metric per (method, ensemble size), averaged over datasets of
/// per-dataset fold means: plot data for the performance-vs-size figure.
pub fn fig1_csv(rt: &ResultsTable, metric: &str) -> Result<String, HarnessError> {
    let mut out = String::from("method,n_trees,mean_value\n");
    let mut any = false;
    for &size in &rt.ensemble_sizes() {
        let grouped = rt.fold_values(metric, size);
        for method in rt.methods() {
            let per_dataset: Vec<f64> = grouped
                .iter()
                .filter(|((_, m), _)| *m == method)
                .filter_map(|(_, vals)| {
                    let defined: Vec<f64> = vals.iter().flatten().copied().collect();
                    (!defined.is_empty()).then(|| mean(&defined))
                })
                .collect();
            if per_dataset.is_empty() {
                continue;
            }
            any = true;
            out.push_str(&format!("{},{},{}\n", method, size, mean(&per_dataset)));
        }
    }
    if !any {
        return Err(HarnessError::NoRecords(format!("metric '{}'", metric)));
    }
    Ok(out)
}

/// Per-class recalls per (method, ensemble size): plot data for the
/// recall-decomposition figure.
pub fn fig2_csv(rt: &ResultsTable) -> Result<String, HarnessError> {
    let mut out = String::from("method,n_trees,recall_minority,recall_majority\n");
    let mut any = false;
    for &size in &rt.ensemble_sizes() {
        let min_rec = rt.fold_values("recall_minority", size);
        let maj_rec = rt.fold_values("recall_majority", size);
        for method in rt.methods() {
            let collect = |groups: &super::results::FoldGroups| -> Vec<f64> {
                groups
                    .iter()
                    .filter(|((_, m), _)| *m == method)
                    .filter_map(|(_, vals)| {
                        let defined: Vec<f64> = vals.iter().flatten().copied().collect();
                        (!defined.is_empty()).then(|| mean(&defined))
                    })
                    .collect()
            };
            let mins = collect(&min_rec);
            let majs = collect(&maj_rec);
            if mins.is_empty() || majs.is_empty() {
                continue;
            }
            any = true;
            out.push_str(&format!(
                "{},{},{},{}\n",
                method,
                size,
                mean(&mins),
                mean(&majs)
            ));
        }
    }
    if !any {
        return Err(HarnessError::NoRecords("per-class recalls".into()));
    }
    Ok(out)
}

/// Reliability bins of one dataset pooled over repetitions and folds:
/// plot data for the reliability-diagram figure.
pub fn fig3_csv(
    reliability: &[ReliabilityRecord],
    dataset: &str,
    n_trees: usize,
) -> Result<String, HarnessError> {
    let mut out = String::from("method,bin,bin_low,bin_high,mean_predicted,observed,count\n");
    let mut methods: Vec<&str> = Vec::new();
    for r in reliability {
        if r.dataset == dataset && r.n_trees == n_trees && !methods.contains(&r.method.as_str()) {
            methods.push(&r.method);
        }
    }
    if methods.is_empty() {
        return Err(HarnessError::NoRecords(format!(
            "reliability tables for '{}' at {} trees",
            dataset, n_trees
        )));
    }
    for method in methods {
        let tables: Vec<&ReliabilityRecord> = reliability
            .iter()
            .filter(|r| r.dataset == dataset && r.n_trees == n_trees && r.method == method)
            .collect();
        let n_bins = crate::metrics::RELIABILITY_BINS;
        for b in 0..n_bins {
            let mut count = 0usize;
            let mut sum_pred = 0.0;
            let mut sum_obs = 0.0;
            for t in &tables {
                let bin = &t.table.bins[b];
                if let (Some(mp), Some(obs)) = (bin.mean_predicted, bin.observed) {
                    sum_pred += mp * bin.count as f64;
                    sum_obs += obs * bin.count as f64;
                    count += bin.count;
                }
            }
            let (mp, obs) = if count > 0 {
                (
                    format!("{}", sum_pred / count as f64),
                    format!("{}", sum_obs / count as f64),
                )
            } else {
                (String::new(), String::new())
            };
            out.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                method,
                b,
                b as f64 / n_bins as f64,
                (b + 1) as f64 / n_bins as f64,
                mp,
                obs,
                count
            ));
        }
    }
    Ok(out)
}
