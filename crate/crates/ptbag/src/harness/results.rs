//! Flat result records and their CSV representation.
//!
//! One record per (dataset, method, ensemble size, repetition, fold,
//! metric). A record whose cell failed carries no value; the failure text
//! lives in the run summary. Floats are written in the shortest exact
//! form, so a results file re-parses to identical values.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::HarnessError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRecord {
    pub dataset: String,
    pub method: String,
    pub n_trees: usize,
    pub rep: usize,
    pub fold: usize,
    pub metric: String,
    pub value: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ResultsTable {
    pub records: Vec<ResultRecord>,
}

/// Fold values keyed by (dataset, method).
pub type FoldGroups = Vec<((String, String), Vec<Option<f64>>)>;

impl ResultsTable {
    pub fn to_csv_string(&self) -> String {
        let mut out = String::from("dataset,method,n_trees,rep,fold,metric,value\n");
        for r in &self.records {
            let value = r.value.map(|v| format!("{}", v)).unwrap_or_default();
            out.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                csv_field(&r.dataset),
                csv_field(&r.method),
                r.n_trees,
                r.rep,
                r.fold,
                csv_field(&r.metric),
                value
            ));
        }
        out
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<(), HarnessError> {
        std::fs::write(path.as_ref(), self.to_csv_string())?;
        Ok(())
    }

    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self, HarnessError> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .from_path(path.as_ref())?;
        let mut records = Vec::new();
        for row in reader.deserialize() {
            let raw: RawRecord = row?;
            records.push(ResultRecord {
                dataset: raw.dataset,
                method: raw.method,
                n_trees: raw.n_trees,
                rep: raw.rep,
                fold: raw.fold,
                metric: raw.metric,
                value: if raw.value.is_empty() {
                    None
                } else {
                    Some(raw.value.parse().map_err(|_| {
                        HarnessError::Malformed(format!("bad value '{}' in results csv", raw.value))
                    })?)
                },
            });
        }
        Ok(ResultsTable { records })
    }

    /// Values of one metric grouped per (dataset, method) across folds,
    /// restricted to one ensemble size.
    pub fn fold_values(&self, metric: &str, n_trees: usize) -> FoldGroups {
        let mut grouped: FoldGroups = Vec::new();
        for r in &self.records {
            if r.metric != metric || r.n_trees != n_trees {
                continue;
            }
            let key = (r.dataset.clone(), r.method.clone());
            match grouped.iter_mut().find(|(k, _)| *k == key) {
                Some((_, vs)) => vs.push(r.value),
                None => grouped.push((key, vec![r.value])),
            }
        }
        grouped
    }

    pub fn ensemble_sizes(&self) -> Vec<usize> {
        let mut sizes: Vec<usize> = Vec::new();
        for r in &self.records {
            if !sizes.contains(&r.n_trees) {
                sizes.push(r.n_trees);
            }
        }
        sizes.sort_unstable();
        sizes
    }

    pub fn methods(&self) -> Vec<String> {
        let mut ms: Vec<String> = Vec::new();
        for r in &self.records {
            if !ms.contains(&r.method) {
                ms.push(r.method.clone());
            }
        }
        ms
    }

    pub fn datasets(&self) -> Vec<String> {
        let mut ds: Vec<String> = Vec::new();
        for r in &self.records {
            if !ds.contains(&r.dataset) {
                ds.push(r.dataset.clone());
            }
        }
        ds
    }
}

#[derive(Debug, Deserialize)]
struct RawRecord {
    dataset: String,
    method: String,
    n_trees: usize,
    rep: usize,
    fold: usize,
    metric: String,
    value: String,
}

fn csv_field(s: &str) -> String {
    if s.contains(',') || s.contains('"') || s.contains('\n') {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Per-instance posterior dump of one benchmark cell.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorDump {
    pub dataset: String,
    pub method: String,
    pub n_trees: usize,
    pub rep: usize,
    pub fold: usize,
    /// (test row index, true class, is-minority flag, minority posterior,
    /// full posterior)
    pub rows: Vec<DumpRow>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DumpRow {
    pub row: usize,
    pub true_class: String,
    pub is_minority: usize,
    pub minority_posterior: f64,
    pub posterior: Vec<f64>,
}

pub fn write_dumps_csv(
    dumps: &[PosteriorDump],
    path: impl AsRef<Path>,
) -> Result<(), HarnessError> {
    let mut out = String::from(
        "dataset,method,n_trees,rep,fold,row,true_class,is_minority,minority_posterior,posterior\n",
    );
    for d in dumps {
        for r in &d.rows {
            let joined: Vec<String> = r.posterior.iter().map(|p| format!("{}", p)).collect();
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{}\n",
                csv_field(&d.dataset),
                csv_field(&d.method),
                d.n_trees,
                d.rep,
                d.fold,
                r.row,
                csv_field(&r.true_class),
                r.is_minority,
                r.minority_posterior,
                joined.join(";")
            ));
        }
    }
    std::fs::write(path.as_ref(), out)?;
    Ok(())
}

/// Reads (score, 0/1 label) pairs from a CSV by column name; the format the
/// posterior dumps use and the sweep subcommand consumes.
pub fn read_scores_csv(
    path: impl AsRef<Path>,
    score_column: &str,
    label_column: &str,
) -> Result<(Vec<f64>, Vec<usize>), HarnessError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path.as_ref())?;
    let headers = reader.headers()?.clone();
    let sc = headers
        .iter()
        .position(|h| h == score_column)
        .ok_or_else(|| HarnessError::Malformed(format!("column '{}' not found", score_column)))?;
    let lc = headers
        .iter()
        .position(|h| h == label_column)
        .ok_or_else(|| HarnessError::Malformed(format!("column '{}' not found", label_column)))?;
    let mut scores = Vec::new();
    let mut labels = Vec::new();
    for row in reader.records() {
        let row = row?;
        let s: f64 = row[sc]
            .parse()
            .map_err(|_| HarnessError::Malformed(format!("bad score '{}'", &row[sc])))?;
        let l: usize = row[lc]
            .parse()
            .map_err(|_| HarnessError::Malformed(format!("bad 0/1 label '{}'", &row[lc])))?;
        if l > 1 {
            return Err(HarnessError::Malformed(format!("label {} is not 0/1", l)));
        }
        scores.push(s);
        labels.push(l);
    }
    Ok((scores, labels))
}
