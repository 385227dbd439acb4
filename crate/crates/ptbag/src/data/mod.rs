//! Dataset representation, preprocessing, cross-validation splitting and
//! synthetic data generation.

mod io;
mod synth;

pub use io::{load_arff, load_csv, write_csv, LabelColumn};
pub use synth::{gen_gaussian_imbalanced, GaussianMixture};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng::stream_rng;
use rand::seq::SliceRandom;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("malformed input: {0}")]
    Malformed(String),
    #[error("degenerate class structure: {0}")]
    DegenerateClasses(String),
    #[error("invariant violated: {0}")]
    Invariant(String),
}

/// Attribute kind: real-valued or categorical with a declared category list.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum AttributeKind {
    Numeric,
    Nominal { categories: Vec<String> },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttributeSpec {
    pub name: String,
    pub kind: AttributeKind,
}

impl AttributeSpec {
    pub fn numeric(name: impl Into<String>) -> Self {
        AttributeSpec {
            name: name.into(),
            kind: AttributeKind::Numeric,
        }
    }

    pub fn nominal(name: impl Into<String>, categories: Vec<String>) -> Self {
        AttributeSpec {
            name: name.into(),
            kind: AttributeKind::Nominal { categories },
        }
    }

    pub fn is_numeric(&self) -> bool {
        matches!(self.kind, AttributeKind::Numeric)
    }

    fn validate(&self) -> Result<(), DataError> {
        if let AttributeKind::Nominal { categories } = &self.kind {
            if categories.is_empty() {
                return Err(DataError::Malformed(format!(
                    "nominal attribute '{}' has no categories",
                    self.name
                )));
            }
            let mut seen = std::collections::HashSet::new();
            for c in categories {
                if !seen.insert(c) {
                    return Err(DataError::Malformed(format!(
                        "nominal attribute '{}' has duplicate category '{}'",
                        self.name, c
                    )));
                }
            }
        }
        Ok(())
    }
}

/// One attribute value: numeric as a real, nominal as a category index.
/// `Missing` only survives until `preprocess` drops the row.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Cell {
    Num(f64),
    Cat(usize),
    Missing,
}

impl Cell {
    pub fn is_missing(&self) -> bool {
        matches!(self, Cell::Missing)
    }
}

/// Instance matrix with mixed numeric/nominal attributes and integer class
/// labels in `0..m`. Immutable after construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    attributes: Vec<AttributeSpec>,
    instances: Vec<Vec<Cell>>,
    labels: Vec<usize>,
    class_names: Vec<String>,
}

impl Dataset {
    /// Builds a dataset and checks every invariant, including that each
    /// class in `0..m` appears at least once.
    pub fn new(
        attributes: Vec<AttributeSpec>,
        instances: Vec<Vec<Cell>>,
        labels: Vec<usize>,
        class_names: Vec<String>,
    ) -> Result<Self, DataError> {
        let d = Self::new_sample(attributes, instances, labels, class_names)?;
        let counts = d.class_counts();
        if let Some(k) = counts.iter().position(|&c| c == 0) {
            return Err(DataError::DegenerateClasses(format!(
                "class '{}' has zero instances",
                d.class_names[k]
            )));
        }
        if d.class_names.len() < 2 {
            return Err(DataError::DegenerateClasses(
                "fewer than two classes".into(),
            ));
        }
        Ok(d)
    }

    /// Like [`Dataset::new`] but tolerates classes with zero instances.
    /// Resampled training sets may lose a class entirely; base learners are
    /// still fit on them, with the absent class keeping zero posterior mass.
    pub(crate) fn new_sample(
        attributes: Vec<AttributeSpec>,
        instances: Vec<Vec<Cell>>,
        labels: Vec<usize>,
        class_names: Vec<String>,
    ) -> Result<Self, DataError> {
        for a in &attributes {
            a.validate()?;
        }
        if instances.len() != labels.len() {
            return Err(DataError::Invariant(format!(
                "{} rows but {} labels",
                instances.len(),
                labels.len()
            )));
        }
        let m = class_names.len();
        for (i, row) in instances.iter().enumerate() {
            if row.len() != attributes.len() {
                return Err(DataError::Malformed(format!(
                    "row {} has {} values, expected {}",
                    i,
                    row.len(),
                    attributes.len()
                )));
            }
            for (cell, attr) in row.iter().zip(&attributes) {
                match (cell, &attr.kind) {
                    (Cell::Num(_), AttributeKind::Numeric) => {}
                    (Cell::Cat(c), AttributeKind::Nominal { categories }) => {
                        if *c >= categories.len() {
                            return Err(DataError::Malformed(format!(
                                "row {}: category index {} out of range for '{}'",
                                i, c, attr.name
                            )));
                        }
                    }
                    (Cell::Missing, _) => {}
                    _ => {
                        return Err(DataError::Malformed(format!(
                            "row {}: value kind does not match attribute '{}'",
                            i, attr.name
                        )));
                    }
                }
            }
        }
        for (i, &y) in labels.iter().enumerate() {
            if y >= m {
                return Err(DataError::Invariant(format!(
                    "row {}: class index {} out of range (m = {})",
                    i, y, m
                )));
            }
        }
        Ok(Dataset {
            attributes,
            instances,
            labels,
            class_names,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.instances.len()
    }

    pub fn n_attrs(&self) -> usize {
        self.attributes.len()
    }

    pub fn n_classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn attributes(&self) -> &[AttributeSpec] {
        &self.attributes
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    pub fn row(&self, i: usize) -> &[Cell] {
        &self.instances[i]
    }

    pub fn label(&self, i: usize) -> usize {
        self.labels[i]
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0usize; self.n_classes()];
        for &y in &self.labels {
            counts[y] += 1;
        }
        counts
    }

    /// New dataset holding the rows at `idx` (duplicates allowed), keeping
    /// this dataset's schema and class names.
    pub fn subset(&self, idx: &[usize]) -> Dataset {
        let instances = idx.iter().map(|&i| self.instances[i].clone()).collect();
        let labels = idx.iter().map(|&i| self.labels[i]).collect();
        Dataset {
            attributes: self.attributes.clone(),
            instances,
            labels,
            class_names: self.class_names.clone(),
        }
    }

    /// Smallest class by instance count; ties go to the larger index, so
    /// a perfectly balanced binary set designates class 1 the minority.
    pub fn minority_class(&self) -> usize {
        let counts = self.class_counts();
        let mut best = 0usize;
        for k in 1..counts.len() {
            if counts[k] <= counts[best] {
                best = k;
            }
        }
        best
    }
}

/// Class prior probabilities: each entry in (0,1), summing to 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriorVector {
    p: Vec<f64>,
}

impl PriorVector {
    pub fn new(p: Vec<f64>) -> Result<Self, DataError> {
        if p.len() < 2 {
            return Err(DataError::Invariant(
                "prior vector needs >= 2 classes".into(),
            ));
        }
        for &v in &p {
            if !(v > 0.0 && v < 1.0) {
                return Err(DataError::Invariant(format!("prior {} outside (0,1)", v)));
            }
        }
        let sum: f64 = p.iter().sum();
        if (sum - 1.0).abs() > 1e-12 {
            return Err(DataError::Invariant(format!("priors sum to {}", sum)));
        }
        Ok(PriorVector { p })
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.p
    }

    pub fn len(&self) -> usize {
        self.p.len()
    }

    pub fn is_empty(&self) -> bool {
        self.p.is_empty()
    }

    pub fn get(&self, k: usize) -> f64 {
        self.p[k]
    }
}

/// Empirical class priors `count(k) / N`.
pub fn class_priors(d: &Dataset) -> Result<PriorVector, DataError> {
    let counts = d.class_counts();
    let n = d.n_rows() as f64;
    let p: Vec<f64> = counts.iter().map(|&c| c as f64 / n).collect();
    PriorVector::new(p)
}

/// Drops incomplete rows, then drops attributes constant across the
/// remaining rows. Idempotent.
pub fn preprocess(d: &Dataset) -> Result<Dataset, DataError> {
    let keep_rows: Vec<usize> = (0..d.n_rows())
        .filter(|&i| !d.row(i).iter().any(Cell::is_missing))
        .collect();
    if keep_rows.is_empty() {
        return Err(DataError::DegenerateClasses("all rows dropped".into()));
    }

    let keep_attrs: Vec<usize> = (0..d.n_attrs())
        .filter(|&a| {
            let first = d.row(keep_rows[0])[a];
            keep_rows.iter().any(|&i| d.row(i)[a] != first)
        })
        .collect();

    if keep_rows.len() == d.n_rows() && keep_attrs.len() == d.n_attrs() {
        return Ok(d.clone());
    }

    let attributes: Vec<AttributeSpec> = keep_attrs
        .iter()
        .map(|&a| d.attributes[a].clone())
        .collect();
    let instances: Vec<Vec<Cell>> = keep_rows
        .iter()
        .map(|&i| keep_attrs.iter().map(|&a| d.row(i)[a]).collect())
        .collect();
    let labels: Vec<usize> = keep_rows.iter().map(|&i| d.label(i)).collect();

    let mut counts = vec![0usize; d.n_classes()];
    for &y in &labels {
        counts[y] += 1;
    }
    if let Some(k) = counts.iter().position(|&c| c == 0) {
        return Err(DataError::DegenerateClasses(format!(
            "class '{}' vanished after dropping incomplete rows",
            d.class_names[k]
        )));
    }

    Dataset::new(attributes, instances, labels, d.class_names.clone())
}

/// Cross-validation plan: `repetitions` independent stratified splits into
/// `folds_per_rep` folds, flattened into (train, test) index pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvPlan {
    pub folds: Vec<(Vec<usize>, Vec<usize>)>,
    pub repetitions: usize,
    pub folds_per_rep: usize,
}

/// 5x2 stratified cross-validation: 5 independent 2-fold splits, 10
/// train/test pairs total. Stratification assigns each class's shuffled
/// instances round-robin, so per-fold class counts stay within one instance
/// of half the class total (odd counts give the extra instance to fold 0).
pub fn five_by_two_cv(d: &Dataset, seed: u64) -> Result<CvPlan, DataError> {
    stratified_cv(d, 5, 2, seed)
}

pub fn stratified_cv(
    d: &Dataset,
    repetitions: usize,
    folds_per_rep: usize,
    seed: u64,
) -> Result<CvPlan, DataError> {
    let counts = d.class_counts();
    for (k, &c) in counts.iter().enumerate() {
        if c < folds_per_rep {
            return Err(DataError::DegenerateClasses(format!(
                "class '{}' has {} instance(s), need >= {} for {}-fold splits",
                d.class_names[k], c, folds_per_rep, folds_per_rep
            )));
        }
    }

    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); d.n_classes()];
    for i in 0..d.n_rows() {
        by_class[d.label(i)].push(i);
    }

    let mut folds = Vec::with_capacity(repetitions * folds_per_rep);
    for rep in 0..repetitions {
        let mut rng = stream_rng(seed, rep as u64);
        let mut fold_members: Vec<Vec<usize>> = vec![Vec::new(); folds_per_rep];
        for idx in &by_class {
            let mut shuffled = idx.clone();
            shuffled.shuffle(&mut rng);
            for (j, &i) in shuffled.iter().enumerate() {
                fold_members[j % folds_per_rep].push(i);
            }
        }
        for f in &mut fold_members {
            f.sort_unstable();
        }
        for test_fold in 0..folds_per_rep {
            let test = fold_members[test_fold].clone();
            let mut train: Vec<usize> = Vec::with_capacity(d.n_rows() - test.len());
            for (j, f) in fold_members.iter().enumerate() {
                if j != test_fold {
                    train.extend_from_slice(f);
                }
            }
            train.sort_unstable();
            folds.push((train, test));
        }
    }
    Ok(CvPlan {
        folds,
        repetitions,
        folds_per_rep,
    })
}

#[cfg(test)]
mod tests;
