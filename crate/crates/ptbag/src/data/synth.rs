//! Synthetic Gaussian mixture data with a closed-form Bayes posterior.
//!
//! Classes are isotropic Gaussians, so the exact posterior
//! `P(y = k | x) = p_k N(x; mu_k, s I) / sum_j p_j N(x; mu_j, s I)`
//! is available as an oracle for testing threshold rules against the best
//! achievable decision behavior.

use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::{AttributeSpec, Cell, DataError, Dataset, PriorVector};
use crate::rng::stream_rng;

#[derive(Debug, Clone)]
pub struct GaussianMixture {
    priors: PriorVector,
    means: Vec<Vec<f64>>,
    cov_scale: f64,
}

impl GaussianMixture {
    pub fn new(
        priors: PriorVector,
        means: Vec<Vec<f64>>,
        cov_scale: f64,
    ) -> Result<Self, DataError> {
        if means.len() != priors.len() {
            return Err(DataError::Invariant(format!(
                "{} means for {} classes",
                means.len(),
                priors.len()
            )));
        }
        let dim = means[0].len();
        if dim == 0 || means.iter().any(|m| m.len() != dim) {
            return Err(DataError::Invariant(
                "means must share a nonzero dimension".into(),
            ));
        }
        for i in 0..means.len() {
            for j in i + 1..means.len() {
                if means[i] == means[j] {
                    return Err(DataError::Invariant(format!(
                        "classes {} and {} share a mean",
                        i, j
                    )));
                }
            }
        }
        if cov_scale.partial_cmp(&0.0) != Some(std::cmp::Ordering::Greater) {
            return Err(DataError::Invariant("cov_scale must be positive".into()));
        }
        Ok(GaussianMixture {
            priors,
            means,
            cov_scale,
        })
    }

    pub fn dim(&self) -> usize {
        self.means[0].len()
    }

    pub fn n_classes(&self) -> usize {
        self.means.len()
    }

    pub fn priors(&self) -> &PriorVector {
        &self.priors
    }

    /// Exact Bayes posterior of every class at `x`, via log-sum-exp.
    pub fn posterior(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.dim(), "oracle input dimension mismatch");
        let mut logw: Vec<f64> = self
            .means
            .iter()
            .enumerate()
            .map(|(k, mu)| {
                let sq: f64 = x.iter().zip(mu).map(|(a, b)| (a - b) * (a - b)).sum();
                self.priors.get(k).ln() - sq / (2.0 * self.cov_scale)
            })
            .collect();
        let max = logw.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        for w in &mut logw {
            *w = (*w - max).exp();
        }
        let sum: f64 = logw.iter().sum();
        for w in &mut logw {
            *w /= sum;
        }
        logw
    }

    /// Draws `n` labeled instances: class k with probability `priors[k]`,
    /// features from an isotropic Gaussian centered at `means[k]` with
    /// per-coordinate variance `cov_scale`.
    pub fn sample(&self, n: usize, seed: u64) -> Dataset {
        let mut rng = stream_rng(seed, 0);
        let normal = Normal::new(0.0, self.cov_scale.sqrt()).expect("valid std");
        let mut instances = Vec::with_capacity(n);
        let mut labels = Vec::with_capacity(n);
        for _ in 0..n {
            let u: f64 = rng.random();
            let mut acc = 0.0;
            let mut k = self.n_classes() - 1;
            for (j, &p) in self.priors.as_slice().iter().enumerate() {
                acc += p;
                if u < acc {
                    k = j;
                    break;
                }
            }
            let row: Vec<Cell> = self.means[k]
                .iter()
                .map(|&mu| Cell::Num(mu + normal.sample(&mut rng)))
                .collect();
            instances.push(row);
            labels.push(k);
        }
        let attributes: Vec<AttributeSpec> = (0..self.dim())
            .map(|j| AttributeSpec::numeric(format!("x{}", j)))
            .collect();
        let class_names: Vec<String> = (0..self.n_classes()).map(|k| format!("c{}", k)).collect();
        Dataset::new_sample(attributes, instances, labels, class_names)
            .expect("generator output is schema-consistent")
    }
}

/// Convenience wrapper returning a sampled dataset together with its oracle.
pub fn gen_gaussian_imbalanced(
    n: usize,
    priors: PriorVector,
    means: Vec<Vec<f64>>,
    cov_scale: f64,
    seed: u64,
) -> Result<(Dataset, GaussianMixture), DataError> {
    let mixture = GaussianMixture::new(priors, means, cov_scale)?;
    let d = mixture.sample(n, seed);
    Ok((d, mixture))
}
