//! Experiment orchestration: configuration, the 5x2 cross-validation
//! benchmark protocol, and report assembly.
//!
//! A run is a grid of cells (dataset, method, ensemble size, repetition,
//! fold). Every cell derives its own seed from the master seed and its
//! coordinates, fits on the training fold, resolves thresholds from the
//! training-fold priors (never the test fold), predicts the test fold and
//! records the requested metrics. Cells execute on a worker pool; the
//! output is identical for any thread count. A failing cell is recorded
//! and skipped rather than aborting the run.

mod report;
mod results;

pub use report::{
    fig1_csv, fig2_csv, fig3_csv, full_potential_report, recall_symmetry_report, score_matrix,
    GapReport, MethodGap, RecallSymmetry,
};
pub use results::{
    read_scores_csv, write_dumps_csv, DumpRow, PosteriorDump, ResultRecord, ResultsTable,
};

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::calibration::{apply_platt, fit_platt, CalibrationError, PlattModel};
use crate::data::{
    five_by_two_cv, load_arff, load_csv, preprocess, DataError, Dataset, LabelColumn,
};
use crate::ensemble::{fit_ensemble, predict_with_thresholds, EnsembleError};
use crate::metrics::{
    confusion, macro_accuracy, macro_f1, pr_curve, reliability_bins, stratified_brier, MetricError,
    ReliabilityTable,
};
use crate::rng::derive_seed;
use crate::sampling::SamplerSpec;
use crate::stats::StatsError;
use crate::thresholds::{resolve_thresholds, SweepMetric, ThresholdError, ThresholdPolicy};
use crate::tree::TreeParams;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("config error: {0}")]
    Config(String),
    #[error("malformed input: {0}")]
    Malformed(String),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Ensemble(#[from] EnsembleError),
    #[error(transparent)]
    Threshold(#[from] ThresholdError),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error(transparent)]
    Calibration(#[from] CalibrationError),
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error("serialization error: {0}")]
    Serde(#[from] serde_json::Error),
    #[error("no records match {0}")]
    NoRecords(String),
    #[error("sweep data missing from the results; rerun the benchmark with \"sweep\": true")]
    MissingSweep,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DataFormat {
    Csv,
    Arff,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LabelColumnSpec {
    Name(String),
    Index(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSpec {
    pub path: PathBuf,
    pub format: DataFormat,
    /// CSV only; defaults to a column named `class`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label_column: Option<LabelColumnSpec>,
    /// Defaults to the file stem.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CalibrationSpec {
    #[default]
    None,
    Platt,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSpec {
    pub name: String,
    pub sampler: SamplerSpec,
    pub threshold: ThresholdPolicy,
    #[serde(default)]
    pub calibration: CalibrationSpec,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricKind {
    MacroAccuracy,
    MacroF1,
    Aucpr,
    Brier,
    Reliability,
}

impl MetricKind {
    pub fn name(self) -> &'static str {
        match self {
            MetricKind::MacroAccuracy => "macro_accuracy",
            MetricKind::MacroF1 => "macro_f1",
            MetricKind::Aucpr => "aucpr",
            MetricKind::Brier => "brier",
            MetricKind::Reliability => "reliability",
        }
    }
}

fn default_sizes() -> Vec<usize> {
    vec![5, 10, 15, 25, 50, 100]
}

fn default_schema() -> u32 {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    #[serde(default = "default_schema")]
    pub schema: u32,
    pub datasets: Vec<DatasetSpec>,
    pub methods: Vec<MethodSpec>,
    #[serde(default = "default_sizes")]
    pub ensemble_sizes: Vec<usize>,
    #[serde(default)]
    pub tree_params: TreeParams,
    #[serde(default)]
    pub master_seed: u64,
    pub metrics: Vec<MetricKind>,
    #[serde(default)]
    pub sweep: bool,
    #[serde(default)]
    pub dump_posteriors: bool,
}

impl ExperimentConfig {
    pub fn from_json(s: &str) -> Result<Self, HarnessError> {
        let cfg: ExperimentConfig = serde_json::from_str(s)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.schema != 1 {
            return Err(HarnessError::Config(format!(
                "unsupported config schema {}",
                self.schema
            )));
        }
        if self.datasets.is_empty() {
            return Err(HarnessError::Config("no datasets configured".into()));
        }
        if self.methods.is_empty() {
            return Err(HarnessError::Config("no methods configured".into()));
        }
        let mut names = HashSet::new();
        for m in &self.methods {
            if !names.insert(&m.name) {
                return Err(HarnessError::Config(format!(
                    "duplicate method name '{}'",
                    m.name
                )));
            }
            m.sampler
                .validate()
                .map_err(|e| HarnessError::Config(format!("method '{}': {}", m.name, e)))?;
            if matches!(m.threshold, ThresholdPolicy::Swept { .. }) {
                return Err(HarnessError::Config(format!(
                    "method '{}': swept thresholds are produced by the sweep, not configured; \
                     set \"sweep\": true instead",
                    m.name
                )));
            }
            if m.calibration == CalibrationSpec::Platt && m.threshold != ThresholdPolicy::Uniform {
                return Err(HarnessError::Config(format!(
                    "method '{}': Platt calibration applies a fixed 0.5 cutoff; \
                     set the threshold policy to uniform",
                    m.name
                )));
            }
        }
        if self.ensemble_sizes.is_empty() || self.ensemble_sizes.contains(&0) {
            return Err(HarnessError::Config(
                "ensemble sizes must be positive".into(),
            ));
        }
        if self.metrics.is_empty() {
            return Err(HarnessError::Config("no metrics requested".into()));
        }
        if self.tree_params.min_leaf < 1 {
            return Err(HarnessError::Config("min_leaf must be >= 1".into()));
        }
        Ok(())
    }
}

/// Loads and preprocesses every configured dataset (complete instances
/// only, constant attributes dropped).
pub fn load_datasets(cfg: &ExperimentConfig) -> Result<Vec<(String, Dataset)>, HarnessError> {
    let mut out = Vec::with_capacity(cfg.datasets.len());
    for spec in &cfg.datasets {
        let name = spec.name.clone().unwrap_or_else(|| {
            Path::new(&spec.path)
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| spec.path.display().to_string())
        });
        let raw = match spec.format {
            DataFormat::Csv => {
                let label = match &spec.label_column {
                    Some(LabelColumnSpec::Name(n)) => LabelColumn::Name(n.clone()),
                    Some(LabelColumnSpec::Index(i)) => LabelColumn::Index(*i),
                    None => LabelColumn::Name("class".into()),
                };
                load_csv(&spec.path, label)?
            }
            DataFormat::Arff => load_arff(&spec.path)?,
        };
        out.push((name, preprocess(&raw)?));
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellFailure {
    pub dataset: String,
    pub method: String,
    pub n_trees: usize,
    pub rep: usize,
    pub fold: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlattRecord {
    pub dataset: String,
    pub method: String,
    pub n_trees: usize,
    pub rep: usize,
    pub fold: usize,
    pub a: f64,
    pub b: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReliabilityRecord {
    pub dataset: String,
    pub method: String,
    pub n_trees: usize,
    pub rep: usize,
    pub fold: usize,
    pub table: ReliabilityTable,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct BenchOutput {
    pub results: ResultsTable,
    pub failures: Vec<CellFailure>,
    pub platt_models: Vec<PlattRecord>,
    pub reliability: Vec<ReliabilityRecord>,
    pub dumps: Vec<PosteriorDump>,
}

struct CellOutput {
    records: Vec<ResultRecord>,
    failure: Option<String>,
    platt: Option<(f64, f64)>,
    reliability: Option<ReliabilityTable>,
    dump: Option<Vec<DumpRow>>,
}

/// Runs the full benchmark grid over pre-loaded datasets. Deterministic in
/// (config, datasets) for any worker count.
pub fn run_benchmark(
    cfg: &ExperimentConfig,
    datasets: &[(String, Dataset)],
) -> Result<BenchOutput, HarnessError> {
    cfg.validate()?;

    // one CV plan per dataset, derived from the master seed
    let mut plans = Vec::with_capacity(datasets.len());
    for (di, (_, d)) in datasets.iter().enumerate() {
        let d = preprocess(d)?;
        let plan = five_by_two_cv(&d, derive_seed(cfg.master_seed, &[0, di as u64]))?;
        plans.push((d, plan));
    }

    struct Cell {
        di: usize,
        mi: usize,
        n_trees: usize,
        rep: usize,
        fold: usize,
    }
    let mut cells = Vec::new();
    for di in 0..datasets.len() {
        for mi in 0..cfg.methods.len() {
            for &n_trees in &cfg.ensemble_sizes {
                for rep in 0..5 {
                    for fold in 0..2 {
                        cells.push(Cell {
                            di,
                            mi,
                            n_trees,
                            rep,
                            fold,
                        });
                    }
                }
            }
        }
    }

    let outputs: Vec<CellOutput> = cells
        .par_iter()
        .map(|cell| {
            let (name, _) = &datasets[cell.di];
            let (d, plan) = &plans[cell.di];
            let method = &cfg.methods[cell.mi];
            let seed = derive_seed(
                cfg.master_seed,
                &[
                    1,
                    cell.di as u64,
                    cell.mi as u64,
                    cell.n_trees as u64,
                    cell.rep as u64,
                    cell.fold as u64,
                ],
            );
            let result = run_cell(
                cfg,
                d,
                plan,
                method,
                cell.n_trees,
                cell.rep,
                cell.fold,
                seed,
            );
            match result {
                Ok(mut out) => {
                    for r in &mut out.records {
                        r.dataset = name.clone();
                        r.method = method.name.clone();
                    }
                    out
                }
                Err(e) => CellOutput {
                    records: cfg
                        .metrics
                        .iter()
                        .filter(|m| **m != MetricKind::Reliability)
                        .map(|m| ResultRecord {
                            dataset: name.clone(),
                            method: method.name.clone(),
                            n_trees: cell.n_trees,
                            rep: cell.rep,
                            fold: cell.fold,
                            metric: m.name().to_string(),
                            value: None,
                        })
                        .collect(),
                    failure: Some(e.to_string()),
                    platt: None,
                    reliability: None,
                    dump: None,
                },
            }
        })
        .collect();

    let mut bench = BenchOutput::default();
    for (cell, out) in cells.iter().zip(outputs) {
        let (name, _) = &datasets[cell.di];
        let method = &cfg.methods[cell.mi];
        bench.results.records.extend(out.records);
        if let Some(message) = out.failure {
            bench.failures.push(CellFailure {
                dataset: name.clone(),
                method: method.name.clone(),
                n_trees: cell.n_trees,
                rep: cell.rep,
                fold: cell.fold,
                message,
            });
        }
        if let Some((a, b)) = out.platt {
            bench.platt_models.push(PlattRecord {
                dataset: name.clone(),
                method: method.name.clone(),
                n_trees: cell.n_trees,
                rep: cell.rep,
                fold: cell.fold,
                a,
                b,
            });
        }
        if let Some(table) = out.reliability {
            bench.reliability.push(ReliabilityRecord {
                dataset: name.clone(),
                method: method.name.clone(),
                n_trees: cell.n_trees,
                rep: cell.rep,
                fold: cell.fold,
                table,
            });
        }
        if let Some(rows) = out.dump {
            bench.dumps.push(PosteriorDump {
                dataset: name.clone(),
                method: method.name.clone(),
                n_trees: cell.n_trees,
                rep: cell.rep,
                fold: cell.fold,
                rows,
            });
        }
    }
    Ok(bench)
}

#[allow(clippy::too_many_arguments)]
fn run_cell(
    cfg: &ExperimentConfig,
    d: &Dataset,
    plan: &crate::data::CvPlan,
    method: &MethodSpec,
    n_trees: usize,
    rep: usize,
    fold: usize,
    seed: u64,
) -> Result<CellOutput, HarnessError> {
    let (train_idx, test_idx) = &plan.folds[rep * 2 + fold];
    let train = d.subset(train_idx);
    let m = d.n_classes();
    let binary = m == 2;
    let minority = train.minority_class();

    let ensemble = fit_ensemble(
        &train,
        n_trees,
        method.sampler.clone(),
        cfg.tree_params,
        derive_seed(seed, &[0]),
    )?;

    let truth: Vec<usize> = test_idx.iter().map(|&i| d.label(i)).collect();
    let mut posteriors: Vec<Vec<f64>> = Vec::with_capacity(test_idx.len());
    for &i in test_idx {
        posteriors.push(ensemble.posterior(d.row(i))?);
    }

    let mut platt_params = None;
    let predicted: Vec<usize> = match method.calibration {
        CalibrationSpec::Platt => {
            if !binary {
                return Err(CalibrationError::BinaryOnly(m).into());
            }
            let sampler = method.sampler.clone();
            let params = cfg.tree_params;
            let model: PlattModel = fit_platt(
                &train,
                move |dd, s| fit_ensemble(dd, n_trees, sampler.clone(), params, s),
                derive_seed(seed, &[1]),
            )?;
            platt_params = Some((model.a, model.b));
            // replace the minority posterior with the calibrated one
            for p in &mut posteriors {
                let cal = apply_platt(&model, p[minority]);
                p[minority] = cal;
                p[1 - minority] = 1.0 - cal;
            }
            posteriors
                .iter()
                .map(|p| {
                    if p[minority] >= 0.5 {
                        minority
                    } else {
                        1 - minority
                    }
                })
                .collect()
        }
        CalibrationSpec::None => {
            let lambdas = resolve_thresholds(&method.threshold, ensemble.training_priors())?;
            posteriors
                .iter()
                .map(|p| predict_with_thresholds(p, &lambdas))
                .collect::<Result<_, _>>()?
        }
    };

    let minority_scores: Vec<f64> = posteriors.iter().map(|p| p[minority]).collect();
    let truth01: Vec<usize> = truth.iter().map(|&y| usize::from(y == minority)).collect();

    let mut records = Vec::new();
    let mut push = |metric: String, value: Option<f64>| {
        records.push(ResultRecord {
            dataset: String::new(),
            method: String::new(),
            n_trees,
            rep,
            fold,
            metric,
            value,
        });
    };

    let cm = confusion(&truth, &predicted, m)?;
    for &metric in &cfg.metrics {
        match metric {
            MetricKind::MacroAccuracy => {
                push("macro_accuracy".into(), Some(macro_accuracy(&cm)?));
                if binary {
                    push("recall_minority".into(), cm.recall(minority));
                    push("recall_majority".into(), cm.recall(1 - minority));
                }
            }
            MetricKind::MacroF1 => {
                push("macro_f1".into(), Some(macro_f1(&cm).value));
            }
            MetricKind::Aucpr => {
                if binary {
                    push(
                        "aucpr".into(),
                        Some(pr_curve(&minority_scores, &truth01)?.auc),
                    );
                }
            }
            MetricKind::Brier => {
                let b = stratified_brier(&posteriors, &truth)?;
                push("brier".into(), Some(b.overall));
                if binary {
                    push("brier_minority".into(), b.per_class[minority]);
                    push("brier_majority".into(), b.per_class[1 - minority]);
                }
            }
            MetricKind::Reliability => {}
        }
    }

    if cfg.sweep && binary {
        let ma = crate::thresholds::threshold_sweep(
            &minority_scores,
            &truth01,
            SweepMetric::MacroAccuracy,
        )?;
        push("sweep_best_macro_accuracy".into(), Some(ma.best_value));
        push("sweep_best_t_macro_accuracy".into(), Some(ma.best_t));
        let mf =
            crate::thresholds::threshold_sweep(&minority_scores, &truth01, SweepMetric::MacroF1)?;
        push("sweep_best_macro_f1".into(), Some(mf.best_value));
        push("sweep_best_t_macro_f1".into(), Some(mf.best_t));
    }

    let reliability = if cfg.metrics.contains(&MetricKind::Reliability) && binary {
        Some(reliability_bins(&minority_scores, &truth01)?)
    } else {
        None
    };

    let dump = cfg.dump_posteriors.then(|| {
        test_idx
            .iter()
            .zip(&posteriors)
            .zip(&truth)
            .map(|((&i, p), &y)| DumpRow {
                row: i,
                true_class: d.class_names()[y].clone(),
                is_minority: usize::from(y == minority),
                minority_posterior: p[minority],
                posterior: p.clone(),
            })
            .collect()
    });

    Ok(CellOutput {
        records,
        failure: None,
        platt: platt_params,
        reliability,
        dump,
    })
}
