//! Bagging ensemble construction and soft-voting posterior aggregation.
//!
//! Each base learner is fit on its own resampled training set, drawn from
//! an RNG stream addressed by (master seed, learner index), so training is
//! embarrassingly parallel and the result does not depend on scheduling.
//! Prediction averages the trees' probabilistic estimates, renormalizes,
//! and ranks classes by `posterior_k / lambda_k`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{
    class_priors, AttributeKind, AttributeSpec, Cell, DataError, Dataset, PriorVector,
};
use crate::rng::stream_rng;
use crate::sampling::{SampleError, SamplerSpec};
use crate::thresholds::{resolve_thresholds, ThresholdError, ThresholdPolicy};
use crate::tree::{fit_tree, ProbTree, TreeError, TreeParams};

#[derive(Debug, Error)]
pub enum EnsembleError {
    #[error("ensemble size must be >= 1")]
    EmptyEnsemble,
    #[error(transparent)]
    Sample(#[from] SampleError),
    #[error(transparent)]
    Tree(#[from] TreeError),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Threshold(#[from] ThresholdError),
    #[error("non-positive threshold {0}")]
    NonPositiveThreshold(f64),
    #[error("unsupported model document schema {0}")]
    BadSchema(u32),
    #[error("serialization error: {0}")]
    Serde(#[from] serde_json::Error),
}

/// A fitted bagging ensemble: the trees, the sampler that produced their
/// training sets, and the priors of the original training data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaggedEnsemble {
    schema: u32,
    trees: Vec<ProbTree>,
    sampler: SamplerSpec,
    training_priors: PriorVector,
    attributes: Vec<AttributeSpec>,
    class_names: Vec<String>,
    master_seed: u64,
}

/// Fits `n` trees, one per sampler stream. Deterministic in
/// (dataset, n, sampler, params, master_seed) regardless of worker count.
pub fn fit_ensemble(
    d: &Dataset,
    n: usize,
    sampler: SamplerSpec,
    params: TreeParams,
    master_seed: u64,
) -> Result<BaggedEnsemble, EnsembleError> {
    if n == 0 {
        return Err(EnsembleError::EmptyEnsemble);
    }
    sampler.validate()?;
    let training_priors = class_priors(d)?;
    let trees: Vec<ProbTree> = (0..n as u64)
        .into_par_iter()
        .map(|i| -> Result<ProbTree, EnsembleError> {
            let mut rng = stream_rng(master_seed, i);
            let sample = sampler.sample(d, &mut rng)?;
            Ok(fit_tree(&sample, params)?)
        })
        .collect::<Result<_, _>>()?;
    Ok(BaggedEnsemble {
        schema: 1,
        trees,
        sampler,
        training_priors,
        attributes: d.attributes().to_vec(),
        class_names: d.class_names().to_vec(),
        master_seed,
    })
}

/// Ranks classes by `posterior_k / lambda_k`. Exact score ties go to the
/// class with the larger threshold (majority-leaning), then the lower
/// index.
pub fn predict_with_thresholds(posterior: &[f64], lambdas: &[f64]) -> Result<usize, EnsembleError> {
    debug_assert_eq!(posterior.len(), lambdas.len());
    let mut best = 0usize;
    let mut best_score = f64::NEG_INFINITY;
    for (k, (&p, &l)) in posterior.iter().zip(lambdas).enumerate() {
        if l.partial_cmp(&0.0) != Some(std::cmp::Ordering::Greater) {
            return Err(EnsembleError::NonPositiveThreshold(l));
        }
        let score = p / l;
        if score > best_score || (score == best_score && l > lambdas[best]) {
            best = k;
            best_score = score;
        }
    }
    Ok(best)
}

impl BaggedEnsemble {
    pub fn n_trees(&self) -> usize {
        self.trees.len()
    }

    pub fn n_classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn training_priors(&self) -> &PriorVector {
        &self.training_priors
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    pub fn attributes(&self) -> &[AttributeSpec] {
        &self.attributes
    }

    pub fn sampler(&self) -> &SamplerSpec {
        &self.sampler
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    pub fn trees(&self) -> &[ProbTree] {
        &self.trees
    }

    fn check_instance(&self, x: &[Cell]) -> Result<(), EnsembleError> {
        if x.len() != self.attributes.len() {
            return Err(TreeError::SchemaMismatch(format!(
                "instance has {} values, model expects {}",
                x.len(),
                self.attributes.len()
            ))
            .into());
        }
        for (cell, attr) in x.iter().zip(&self.attributes) {
            let ok = match (cell, &attr.kind) {
                (Cell::Num(_), AttributeKind::Numeric) => true,
                (Cell::Cat(c), AttributeKind::Nominal { categories }) => *c < categories.len(),
                _ => false,
            };
            if !ok {
                return Err(TreeError::SchemaMismatch(format!(
                    "value {:?} does not fit attribute '{}'",
                    cell, attr.name
                ))
                .into());
            }
        }
        Ok(())
    }

    /// Averaged probabilistic prediction, renormalized to sum to 1.
    pub fn posterior(&self, x: &[Cell]) -> Result<Vec<f64>, EnsembleError> {
        self.check_instance(x)?;
        let m = self.n_classes();
        let mut acc = vec![0.0; m];
        for t in &self.trees {
            let p = t.predict_proba(x)?;
            for (a, v) in acc.iter_mut().zip(&p) {
                *a += v;
            }
        }
        let n = self.trees.len() as f64;
        for a in &mut acc {
            *a /= n;
        }
        let sum: f64 = acc.iter().sum();
        for a in &mut acc {
            *a /= sum;
        }
        Ok(acc)
    }

    /// Per-instance posterior and thresholded label for a batch. Posteriors
    /// are returned so ranking metrics and calibration diagnostics can be
    /// computed without re-prediction.
    pub fn predict_batch(
        &self,
        xs: &[&[Cell]],
        policy: &ThresholdPolicy,
    ) -> Result<(Vec<usize>, Vec<Vec<f64>>), EnsembleError> {
        let lambdas = resolve_thresholds(policy, &self.training_priors)?;
        let mut labels = Vec::with_capacity(xs.len());
        let mut posteriors = Vec::with_capacity(xs.len());
        for x in xs {
            let p = self.posterior(x)?;
            labels.push(predict_with_thresholds(&p, &lambdas)?);
            posteriors.push(p);
        }
        Ok((labels, posteriors))
    }

    /// Convenience: posterior + label for every row of a dataset.
    pub fn predict_dataset(
        &self,
        d: &Dataset,
        policy: &ThresholdPolicy,
    ) -> Result<(Vec<usize>, Vec<Vec<f64>>), EnsembleError> {
        let rows: Vec<&[Cell]> = (0..d.n_rows()).map(|i| d.row(i)).collect();
        self.predict_batch(&rows, policy)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("ensemble serializes")
    }

    pub fn from_json(s: &str) -> Result<Self, EnsembleError> {
        let e: BaggedEnsemble = serde_json::from_str(s)?;
        if e.schema != 1 {
            return Err(EnsembleError::BadSchema(e.schema));
        }
        Ok(e)
    }
}
