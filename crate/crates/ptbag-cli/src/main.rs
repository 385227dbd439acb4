//! Command-line front end: generate synthetic data, train and apply
//! models, run the cross-validated benchmark, sweep thresholds and build
//! comparison reports.
//!
//! Exit codes: 0 success, 1 usage error (bad flags or configuration),
//! 2 data error (unreadable or invalid datasets, failed runs).

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};

use ptbag::data::{
    class_priors, gen_gaussian_imbalanced, load_arff, load_csv, preprocess, write_csv, LabelColumn,
    PriorVector,
};
use ptbag::ensemble::{fit_ensemble, BaggedEnsemble};
use ptbag::harness::{
    fig1_csv, fig2_csv, fig3_csv, full_potential_report, load_datasets, read_scores_csv,
    recall_symmetry_report, run_benchmark, score_matrix, write_dumps_csv, ExperimentConfig,
    ResultsTable,
};
use ptbag::sampling::SamplerSpec;
use ptbag::stats::{friedman, nemenyi, win_tie_loss, DEFAULT_WTL_TOLERANCE};
use ptbag::thresholds::{threshold_sweep, SweepMetric, ThresholdPolicy};
use ptbag::tree::TreeParams;
use ptbag::{AttributeKind, Cell, Dataset};

#[derive(Parser)]
#[command(
    name = "ptbag",
    version,
    about = "Probability-thresholding bagging benchmark CLI"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate a synthetic Gaussian-mixture dataset with known posteriors
    Gen(GenArgs),
    /// Fit a bagging ensemble and save it as a JSON model
    Train(TrainArgs),
    /// Load a model and emit labels plus posteriors for a data file
    Predict(PredictArgs),
    /// Run the benchmark protocol from a JSON config
    Bench(BenchArgs),
    /// Threshold sweep over a prediction dump
    Sweep(SweepArgs),
    /// Statistical comparison tables from a results file
    Report(ReportArgs),
}

#[derive(Args)]
struct GenArgs {
    /// Class priors, e.g. 0.9,0.1
    #[arg(long, value_delimiter = ',')]
    prior: Vec<f64>,
    /// Per-class means: coordinates comma-separated, classes
    /// semicolon-separated, e.g. "-1;1" or "-1,0;1,0". Defaults to evenly
    /// spaced points on the real line.
    #[arg(long)]
    means: Option<String>,
    /// Isotropic variance of each class
    #[arg(long, default_value_t = 1.0)]
    cov: f64,
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum DataFormatArg {
    Csv,
    Arff,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum SamplerArg {
    Bootstrap,
    ExactlyBalanced,
    RoughlyBalanced,
    RandomOversample,
    Smote,
    UnderOver,
    UnderToSmallest,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum ThresholdArg {
    Uniform,
    Prior,
    F1Midpoint,
    Custom,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long = "data-format", value_enum, default_value_t = DataFormatArg::Csv)]
    data_format: DataFormatArg,
    /// CSV label column (name); ARFF uses @outputs / the last attribute
    #[arg(long, default_value = "class")]
    label: String,
    #[arg(long, value_enum, default_value_t = SamplerArg::Bootstrap)]
    sampler: SamplerArg,
    /// SMOTE minority oversampling percentage
    #[arg(long, default_value_t = 500.0)]
    smote_pct: f64,
    /// SMOTE nearest-neighbor count
    #[arg(long, default_value_t = 5)]
    smote_neighbors: usize,
    /// under_over target percentage of the majority size
    #[arg(long, default_value_t = 50.0)]
    under_over_a: f64,
    #[arg(long, default_value_t = 100)]
    trees: usize,
    #[arg(long, default_value_t = 2)]
    min_leaf: usize,
    #[arg(long, default_value_t = false)]
    laplace: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct PredictArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    data: PathBuf,
    #[arg(long, value_enum, default_value_t = ThresholdArg::Prior)]
    threshold: ThresholdArg,
    /// Custom thresholds (with --threshold custom), e.g. 0.7,0.3
    #[arg(long, value_delimiter = ',')]
    lambdas: Vec<f64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long)]
    config: PathBuf,
    /// Output directory for results.csv, summary.json and figure data
    #[arg(long)]
    out: PathBuf,
    /// Worker threads (default: all cores); any value gives identical output
    #[arg(long)]
    threads: Option<usize>,
    /// Override the config's master seed
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum SweepMetricArg {
    MacroAccuracy,
    MacroF1,
}

#[derive(Args)]
struct SweepArgs {
    /// CSV with score and 0/1 label columns (e.g. a posterior dump)
    #[arg(long)]
    scores: PathBuf,
    #[arg(long, value_enum, default_value_t = SweepMetricArg::MacroAccuracy)]
    metric: SweepMetricArg,
    #[arg(long, default_value = "minority_posterior")]
    score_column: String,
    #[arg(long, default_value = "is_minority")]
    label_column: String,
    /// Output CSV (threshold,metric_value)
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ReportArgs {
    #[arg(long)]
    results: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value = "macro_accuracy")]
    metric: String,
    /// Ensemble size to analyze (default: largest in the results)
    #[arg(long)]
    trees: Option<usize>,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    /// Win/tie/loss tie tolerance
    #[arg(long, default_value_t = DEFAULT_WTL_TOLERANCE)]
    tol: f64,
}

enum CliError {
    Usage(anyhow::Error),
    Data(anyhow::Error),
}

type CliResult = Result<(), CliError>;

fn usage(e: impl Into<anyhow::Error>) -> CliError {
    CliError::Usage(e.into())
}

fn data_err(e: impl Into<anyhow::Error>) -> CliError {
    CliError::Data(e.into())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 }; // --help / --version
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.cmd {
        Cmd::Gen(args) => cmd_gen(args),
        Cmd::Train(args) => cmd_train(args),
        Cmd::Predict(args) => cmd_predict(args),
        Cmd::Bench(args) => cmd_bench(args),
        Cmd::Sweep(args) => cmd_sweep(args),
        Cmd::Report(args) => cmd_report(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(e)) => {
            eprintln!("usage error: {:#}", e);
            ExitCode::from(1)
        }
        Err(CliError::Data(e)) => {
            eprintln!("data error: {:#}", e);
            ExitCode::from(2)
        }
    }
}

fn parse_means(spec: &str) -> anyhow::Result<Vec<Vec<f64>>> {
    spec.split(';')
        .map(|class| {
            class
                .split(',')
                .map(|c| {
                    c.trim()
                        .parse::<f64>()
                        .map_err(|_| anyhow::anyhow!("bad mean '{}'", c))
                })
                .collect()
        })
        .collect()
}

fn cmd_gen(args: GenArgs) -> CliResult {
    let m = args.prior.len();
    if m < 2 {
        return Err(usage(anyhow::anyhow!("--prior needs at least two values")));
    }
    let priors = PriorVector::new(args.prior.clone()).map_err(usage)?;
    let means = match &args.means {
        Some(spec) => parse_means(spec).map_err(usage)?,
        None => (0..m)
            .map(|k| vec![(2 * k) as f64 - (m - 1) as f64])
            .collect(),
    };
    let (d, _) =
        gen_gaussian_imbalanced(args.n, priors, means, args.cov, args.seed).map_err(usage)?;
    write_csv(&d, &args.out).map_err(data_err)?;
    println!(
        "wrote {} instances, {} attributes, {} classes to {}",
        d.n_rows(),
        d.n_attrs(),
        d.n_classes(),
        args.out.display()
    );
    Ok(())
}

fn load_data(path: &Path, format: DataFormatArg, label: &str) -> Result<Dataset, CliError> {
    let raw = match format {
        DataFormatArg::Csv => load_csv(path, LabelColumn::Name(label.to_string())),
        DataFormatArg::Arff => load_arff(path),
    }
    .with_context(|| format!("loading {}", path.display()))
    .map_err(data_err)?;
    preprocess(&raw).map_err(data_err)
}

fn cmd_train(args: TrainArgs) -> CliResult {
    let sampler = match args.sampler {
        SamplerArg::Bootstrap => SamplerSpec::Bootstrap,
        SamplerArg::ExactlyBalanced => SamplerSpec::ExactlyBalanced,
        SamplerArg::RoughlyBalanced => SamplerSpec::RoughlyBalanced,
        SamplerArg::RandomOversample => SamplerSpec::RandomOversample,
        SamplerArg::Smote => SamplerSpec::Smote {
            oversample_pct: args.smote_pct,
            neighbors: args.smote_neighbors,
        },
        SamplerArg::UnderOver => SamplerSpec::UnderOver {
            a: args.under_over_a,
        },
        SamplerArg::UnderToSmallest => SamplerSpec::UnderToSmallest,
    };
    sampler.validate().map_err(usage)?;
    let d = load_data(&args.data, args.data_format, &args.label)?;
    let params = TreeParams {
        min_leaf: args.min_leaf,
        use_laplace: args.laplace,
    };
    let ensemble = fit_ensemble(&d, args.trees, sampler, params, args.seed).map_err(data_err)?;
    std::fs::write(&args.out, ensemble.to_json()).map_err(data_err)?;
    let priors = class_priors(&d).map_err(data_err)?;
    println!(
        "trained {} trees on {} ({} instances); priors {:?}; model at {}",
        args.trees,
        args.data.display(),
        d.n_rows(),
        priors.as_slice(),
        args.out.display()
    );
    Ok(())
}

/// Reads attribute rows for a fitted model's schema from a CSV file. The
/// file may carry extra columns (a label among them); they are ignored.
fn load_rows_for_model(path: &Path, model: &BaggedEnsemble) -> anyhow::Result<Vec<Vec<Cell>>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)?;
    let headers = reader.headers()?.clone();
    let positions: Vec<usize> = model
        .attributes()
        .iter()
        .map(|a| {
            headers.iter().position(|h| h == a.name).ok_or_else(|| {
                anyhow::anyhow!("column '{}' missing from {}", a.name, path.display())
            })
        })
        .collect::<anyhow::Result<_>>()?;
    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        let mut cells = Vec::with_capacity(positions.len());
        for (attr, &pos) in model.attributes().iter().zip(&positions) {
            let raw = &record[pos];
            let cell = match &attr.kind {
                AttributeKind::Numeric => Cell::Num(raw.parse::<f64>().map_err(|_| {
                    anyhow::anyhow!("row {}: '{}' is not numeric for '{}'", i, raw, attr.name)
                })?),
                AttributeKind::Nominal { categories } => {
                    let k = categories.iter().position(|c| c == raw).ok_or_else(|| {
                        anyhow::anyhow!("row {}: unknown category '{}' for '{}'", i, raw, attr.name)
                    })?;
                    Cell::Cat(k)
                }
            };
            cells.push(cell);
        }
        rows.push(cells);
    }
    Ok(rows)
}

fn cmd_predict(args: PredictArgs) -> CliResult {
    let model_json = std::fs::read_to_string(&args.model)
        .with_context(|| format!("reading {}", args.model.display()))
        .map_err(usage)?;
    let model = BaggedEnsemble::from_json(&model_json).map_err(usage)?;
    let policy = match args.threshold {
        ThresholdArg::Uniform => ThresholdPolicy::Uniform,
        ThresholdArg::Prior => ThresholdPolicy::Prior,
        ThresholdArg::F1Midpoint => ThresholdPolicy::F1Midpoint,
        ThresholdArg::Custom => {
            if args.lambdas.is_empty() {
                return Err(usage(anyhow::anyhow!("--threshold custom needs --lambdas")));
            }
            ThresholdPolicy::Custom {
                lambdas: args.lambdas.clone(),
            }
        }
    };
    let rows = load_rows_for_model(&args.data, &model).map_err(data_err)?;
    let refs: Vec<&[Cell]> = rows.iter().map(|r| r.as_slice()).collect();
    let (labels, posteriors) = model.predict_batch(&refs, &policy).map_err(data_err)?;

    let mut out = String::from("row,predicted");
    for name in model.class_names() {
        out.push_str(&format!(",p_{}", name));
    }
    out.push('\n');
    for (i, (l, p)) in labels.iter().zip(&posteriors).enumerate() {
        out.push_str(&format!("{},{}", i, model.class_names()[*l]));
        for v in p {
            out.push_str(&format!(",{}", v));
        }
        out.push('\n');
    }
    std::fs::write(&args.out, out).map_err(data_err)?;
    println!(
        "wrote {} predictions to {}",
        labels.len(),
        args.out.display()
    );
    Ok(())
}

fn cmd_bench(args: BenchArgs) -> CliResult {
    if let Some(threads) = args.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| usage(anyhow::anyhow!("thread pool: {}", e)))?;
    }
    let text = std::fs::read_to_string(&args.config)
        .with_context(|| format!("reading config {}", args.config.display()))
        .map_err(usage)?;
    let mut cfg = ExperimentConfig::from_json(&text).map_err(usage)?;
    if let Some(seed) = args.seed {
        cfg.master_seed = seed;
    }
    let datasets = load_datasets(&cfg).map_err(data_err)?;
    let out = run_benchmark(&cfg, &datasets).map_err(data_err)?;

    std::fs::create_dir_all(&args.out).map_err(data_err)?;
    out.results
        .write_csv(args.out.join("results.csv"))
        .map_err(data_err)?;

    let summary = serde_json::json!({
        "schema": 1,
        "config": cfg,
        "n_records": out.results.records.len(),
        "failures": out.failures,
        "platt_models": out.platt_models,
    });
    std::fs::write(
        args.out.join("summary.json"),
        serde_json::to_string_pretty(&summary).expect("summary serializes"),
    )
    .map_err(data_err)?;

    if cfg.dump_posteriors {
        write_dumps_csv(&out.dumps, args.out.join("dumps.csv")).map_err(data_err)?;
    }
    if !out.reliability.is_empty() {
        let max_size = *cfg
            .ensemble_sizes
            .iter()
            .max()
            .expect("validated non-empty");
        for (name, _) in &datasets {
            if let Ok(csv) = fig3_csv(&out.reliability, name, max_size) {
                std::fs::write(args.out.join(format!("fig3_{}.csv", name)), csv)
                    .map_err(data_err)?;
            }
        }
    }
    println!(
        "benchmark complete: {} records, {} failures; outputs in {}",
        out.results.records.len(),
        out.failures.len(),
        args.out.display()
    );
    if !out.failures.is_empty() {
        for f in &out.failures {
            eprintln!(
                "  cell failed: {} / {} / {} trees / rep {} fold {}: {}",
                f.dataset, f.method, f.n_trees, f.rep, f.fold, f.message
            );
        }
    }
    Ok(())
}

fn cmd_sweep(args: SweepArgs) -> CliResult {
    let (scores, labels) =
        read_scores_csv(&args.scores, &args.score_column, &args.label_column).map_err(data_err)?;
    let metric = match args.metric {
        SweepMetricArg::MacroAccuracy => SweepMetric::MacroAccuracy,
        SweepMetricArg::MacroF1 => SweepMetric::MacroF1,
    };
    let result = threshold_sweep(&scores, &labels, metric).map_err(data_err)?;
    let mut out = String::from("threshold,metric_value\n");
    for p in &result.curve {
        out.push_str(&format!("{},{}\n", p.threshold, p.value));
    }
    std::fs::write(&args.out, out).map_err(data_err)?;
    println!(
        "best threshold {} with value {}; curve at {}",
        result.best_t,
        result.best_value,
        args.out.display()
    );
    Ok(())
}

fn cmd_report(args: ReportArgs) -> CliResult {
    let rt = ResultsTable::read_csv(&args.results)
        .with_context(|| format!("reading {}", args.results.display()))
        .map_err(data_err)?;
    let sizes = rt.ensemble_sizes();
    let n_trees = match args.trees {
        Some(t) => t,
        None => *sizes
            .last()
            .ok_or_else(|| data_err(anyhow::anyhow!("empty results file")))?,
    };
    std::fs::create_dir_all(&args.out).map_err(data_err)?;

    let sm = score_matrix(&rt, &args.metric, n_trees).map_err(data_err)?;
    let fr = friedman(&sm).map_err(data_err)?;
    let nem = nemenyi(&fr.mean_ranks, sm.n_datasets(), args.alpha).map_err(data_err)?;
    let summary = serde_json::json!({
        "metric": args.metric,
        "n_trees": n_trees,
        "alpha": args.alpha,
        "methods": sm.methods,
        "datasets": sm.datasets,
        "friedman": fr,
        "nemenyi": nem,
    });
    std::fs::write(
        args.out.join("friedman_nemenyi.json"),
        serde_json::to_string_pretty(&summary).expect("summary serializes"),
    )
    .map_err(data_err)?;

    let mut wtl = String::from("method_a,method_b,wins,ties,losses\n");
    for i in 0..sm.n_methods() {
        for j in 0..sm.n_methods() {
            if i == j {
                continue;
            }
            let (w, t, l) = win_tie_loss(&sm, i, j, args.tol).map_err(data_err)?;
            wtl.push_str(&format!(
                "{},{},{},{},{}\n",
                sm.methods[i], sm.methods[j], w, t, l
            ));
        }
    }
    std::fs::write(args.out.join("win_tie_loss.csv"), wtl).map_err(data_err)?;

    match full_potential_report(&rt, &args.metric, n_trees) {
        Ok(gaps) => {
            let mut csv = String::from("method,dataset,gap\n");
            for g in &gaps.per_method {
                for (ds, v) in &g.per_dataset {
                    csv.push_str(&format!("{},{},{}\n", g.method, ds, v));
                }
                csv.push_str(&format!("{},MEAN,{}\n", g.method, g.mean_gap));
            }
            std::fs::write(args.out.join("gap_table.csv"), csv).map_err(data_err)?;
        }
        Err(ptbag::harness::HarnessError::MissingSweep) => {
            eprintln!("note: no sweep data in results; skipping gap_table.csv");
        }
        Err(e) => return Err(data_err(e)),
    }

    match recall_symmetry_report(&rt, n_trees) {
        Ok(rs) => {
            std::fs::write(
                args.out.join("recall_symmetry.json"),
                serde_json::to_string_pretty(&rs).expect("report serializes"),
            )
            .map_err(data_err)?;
        }
        Err(_) => {
            eprintln!("note: no per-class recalls in results; skipping recall_symmetry.json");
        }
    }

    std::fs::write(
        args.out.join("fig1.csv"),
        fig1_csv(&rt, &args.metric).map_err(data_err)?,
    )
    .map_err(data_err)?;
    if let Ok(f2) = fig2_csv(&rt) {
        std::fs::write(args.out.join("fig2.csv"), f2).map_err(data_err)?;
    }
    println!("report written to {}", args.out.display());
    Ok(())
}
