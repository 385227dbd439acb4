//! Training-set resampling mechanisms for bagging.
//!
//! Each base learner draws its training set through one of these samplers.
//! Plain bootstrap preserves the natural class distribution; the others
//! rebalance it: exactly/roughly balanced undersampling, random minority
//! oversampling, SMOTE with majority undersampling, and the multiclass
//! under/over scheme with its undersample-to-smallest variant.
//!
//! Samplers are pure functions of (dataset, RNG stream state): replaying a
//! stream reproduces the sample bit for bit, so learners can run in
//! parallel, each on its own stream derived from (master seed, learner
//! index).

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{Cell, Dataset};

#[derive(Debug, Error)]
pub enum SampleError {
    #[error("{0} requires a binary dataset, got {1} classes")]
    BinaryOnly(&'static str, usize),
    #[error("SMOTE needs at least 2 minority instances, got {0}")]
    TooFewMinority(usize),
    #[error("invalid sampler parameter: {0}")]
    BadParameter(String),
}

/// Sampler selection with its parameters, as it appears in experiment
/// configurations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SamplerSpec {
    Bootstrap,
    ExactlyBalanced,
    RoughlyBalanced,
    RandomOversample,
    Smote {
        #[serde(default = "default_oversample_pct")]
        oversample_pct: f64,
        #[serde(default = "default_neighbors")]
        neighbors: usize,
    },
    UnderOver {
        a: f64,
    },
    UnderToSmallest,
}

fn default_oversample_pct() -> f64 {
    500.0
}

fn default_neighbors() -> usize {
    5
}

impl SamplerSpec {
    pub fn smote_default() -> Self {
        SamplerSpec::Smote {
            oversample_pct: default_oversample_pct(),
            neighbors: default_neighbors(),
        }
    }

    pub fn validate(&self) -> Result<(), SampleError> {
        match self {
            SamplerSpec::Smote {
                oversample_pct,
                neighbors,
            } => {
                if oversample_pct.partial_cmp(&0.0) != Some(std::cmp::Ordering::Greater) {
                    return Err(SampleError::BadParameter(format!(
                        "oversample_pct must be > 0, got {}",
                        oversample_pct
                    )));
                }
                if *neighbors < 1 {
                    return Err(SampleError::BadParameter("neighbors must be >= 1".into()));
                }
                Ok(())
            }
            SamplerSpec::UnderOver { a } => {
                if !(a.partial_cmp(&0.0) == Some(std::cmp::Ordering::Greater) && *a <= 100.0) {
                    return Err(SampleError::BadParameter(format!(
                        "a must be in (0, 100], got {}",
                        a
                    )));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    /// Draws one training set for a base learner.
    pub fn sample<R: Rng>(&self, d: &Dataset, rng: &mut R) -> Result<Dataset, SampleError> {
        self.validate()?;
        match self {
            SamplerSpec::Bootstrap => Ok(bootstrap(d, rng)),
            SamplerSpec::ExactlyBalanced => exactly_balanced(d, rng),
            SamplerSpec::RoughlyBalanced => roughly_balanced(d, rng),
            SamplerSpec::RandomOversample => random_oversample(d, rng),
            SamplerSpec::Smote {
                oversample_pct,
                neighbors,
            } => smote(d, *oversample_pct, *neighbors, rng),
            SamplerSpec::UnderOver { a } => Ok(under_over(d, *a, rng)),
            SamplerSpec::UnderToSmallest => Ok(under_to_smallest(d, rng)),
        }
    }
}

fn indices_of_class(d: &Dataset, k: usize) -> Vec<usize> {
    (0..d.n_rows()).filter(|&i| d.label(i) == k).collect()
}

/// `k` indices drawn from `pool` without replacement (k <= pool len).
fn draw_without_replacement<R: Rng>(pool: &[usize], k: usize, rng: &mut R) -> Vec<usize> {
    debug_assert!(k <= pool.len());
    let mut pool = pool.to_vec();
    pool.shuffle(rng);
    pool.truncate(k);
    pool
}

fn draw_with_replacement<R: Rng>(pool: &[usize], k: usize, rng: &mut R) -> Vec<usize> {
    (0..k)
        .map(|_| pool[rng.random_range(0..pool.len())])
        .collect()
}

fn require_binary(d: &Dataset, op: &'static str) -> Result<(usize, usize), SampleError> {
    if d.n_classes() != 2 {
        return Err(SampleError::BinaryOnly(op, d.n_classes()));
    }
    let min = d.minority_class();
    Ok((min, 1 - min))
}

/// N draws with replacement; preserves the class distribution in
/// expectation.
pub fn bootstrap<R: Rng>(d: &Dataset, rng: &mut R) -> Dataset {
    let pool: Vec<usize> = (0..d.n_rows()).collect();
    let idx = draw_with_replacement(&pool, d.n_rows(), rng);
    d.subset(&idx)
}

/// Keeps all minority instances, undersamples the majority without
/// replacement to the same count. Output is exactly balanced.
pub fn exactly_balanced<R: Rng>(d: &Dataset, rng: &mut R) -> Result<Dataset, SampleError> {
    let (min, maj) = require_binary(d, "exactly_balanced")?;
    let min_idx = indices_of_class(d, min);
    let maj_idx = indices_of_class(d, maj);
    let mut idx = min_idx.clone();
    idx.extend(draw_without_replacement(&maj_idx, min_idx.len(), rng));
    Ok(d.subset(&idx))
}

/// Number of failures before the `r`-th success in fair Bernoulli trials:
/// NegativeBinomial(r, 1/2), mean r.
fn negative_binomial_failures<R: Rng>(r: usize, rng: &mut R) -> usize {
    let mut successes = 0;
    let mut failures = 0;
    while successes < r {
        if rng.random::<bool>() {
            successes += 1;
        } else {
            failures += 1;
        }
    }
    failures
}

/// Keeps all minority instances; draws a majority sample whose size comes
/// from NegativeBinomial(n_min, 1/2) (clamped to >= 1), with replacement.
/// Balance therefore holds in expectation only, which is the source of the
/// extra diversity over exact balancing.
pub fn roughly_balanced<R: Rng>(d: &Dataset, rng: &mut R) -> Result<Dataset, SampleError> {
    let (min, maj) = require_binary(d, "roughly_balanced")?;
    let min_idx = indices_of_class(d, min);
    let maj_idx = indices_of_class(d, maj);
    let s = negative_binomial_failures(min_idx.len(), rng).max(1);
    let mut idx = min_idx;
    idx.extend(draw_with_replacement(&maj_idx, s, rng));
    Ok(d.subset(&idx))
}

/// Keeps everything and duplicates minority instances (with replacement)
/// until the classes are balanced.
pub fn random_oversample<R: Rng>(d: &Dataset, rng: &mut R) -> Result<Dataset, SampleError> {
    let (min, maj) = require_binary(d, "random_oversample")?;
    let min_idx = indices_of_class(d, min);
    let maj_idx = indices_of_class(d, maj);
    let mut idx: Vec<usize> = (0..d.n_rows()).collect();
    idx.extend(draw_with_replacement(
        &min_idx,
        maj_idx.len() - min_idx.len(),
        rng,
    ));
    Ok(d.subset(&idx))
}

/// Mixed-type distance for SMOTE neighbor search: Euclidean over numerics
/// standardized by the whole training sample's deviation (zero-variance
/// attributes contribute 0), plus a 0/1 mismatch per nominal attribute.
struct SmoteMetric {
    inv_std: Vec<f64>, // 0.0 for nominal or zero-variance attributes
}

impl SmoteMetric {
    fn new(d: &Dataset) -> Self {
        let n = d.n_rows() as f64;
        let inv_std = (0..d.n_attrs())
            .map(|a| {
                if !d.attributes()[a].is_numeric() {
                    return 0.0;
                }
                let mut sum = 0.0;
                let mut sumsq = 0.0;
                for i in 0..d.n_rows() {
                    if let Cell::Num(v) = d.row(i)[a] {
                        sum += v;
                        sumsq += v * v;
                    }
                }
                let var = (sumsq / n - (sum / n) * (sum / n)).max(0.0);
                if var > 0.0 {
                    1.0 / var.sqrt()
                } else {
                    0.0
                }
            })
            .collect();
        SmoteMetric { inv_std }
    }

    fn dist_sq(&self, d: &Dataset, i: usize, j: usize) -> f64 {
        let mut acc = 0.0;
        for (a, (ci, cj)) in d.row(i).iter().zip(d.row(j)).enumerate() {
            match (ci, cj) {
                (Cell::Num(x), Cell::Num(y)) => {
                    let z = (x - y) * self.inv_std[a];
                    acc += z * z;
                }
                (Cell::Cat(x), Cell::Cat(y)) => {
                    if x != y {
                        acc += 1.0;
                    }
                }
                _ => unreachable!("preprocessed data has no missing cells"),
            }
        }
        acc
    }
}

/// SMOTE with majority resampling to exact balance.
///
/// Generates `floor(oversample_pct/100) * n_min` synthetic minority
/// instances: pick a random minority seed, pick one of its `neighbors`
/// nearest minority neighbors (ties broken by instance index), place the
/// synthetic point uniformly on the segment between them (numerics) and
/// copy the seed's nominal values. The majority is then sampled to match
/// the minority total: without replacement when it is large enough,
/// with replacement otherwise (mild imbalance plus heavy oversampling can
/// push the minority total past the majority count).
pub fn smote<R: Rng>(
    d: &Dataset,
    oversample_pct: f64,
    neighbors: usize,
    rng: &mut R,
) -> Result<Dataset, SampleError> {
    if d.n_classes() != 2 {
        return Err(SampleError::BinaryOnly("smote", d.n_classes()));
    }
    if oversample_pct.partial_cmp(&0.0) != Some(std::cmp::Ordering::Greater) {
        return Err(SampleError::BadParameter(format!(
            "oversample_pct must be > 0, got {}",
            oversample_pct
        )));
    }
    let min = d.minority_class();
    let min_idx = indices_of_class(d, min);
    let maj_idx = indices_of_class(d, 1 - min);
    let n_min = min_idx.len();
    if n_min < 2 {
        return Err(SampleError::TooFewMinority(n_min));
    }
    let k = neighbors.max(1).min(n_min - 1);

    let metric = SmoteMetric::new(d);
    // k nearest minority neighbors of each minority instance
    let nn: Vec<Vec<usize>> = min_idx
        .iter()
        .map(|&i| {
            let mut others: Vec<(f64, usize)> = min_idx
                .iter()
                .filter(|&&j| j != i)
                .map(|&j| (metric.dist_sq(d, i, j), j))
                .collect();
            others.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
            others.truncate(k);
            others.into_iter().map(|(_, j)| j).collect()
        })
        .collect();

    let n_synth = (oversample_pct / 100.0).floor() as usize * n_min;
    let mut synth_rows: Vec<Vec<Cell>> = Vec::with_capacity(n_synth);
    for _ in 0..n_synth {
        let s = rng.random_range(0..n_min);
        let seed_row = d.row(min_idx[s]);
        let nb_row = d.row(nn[s][rng.random_range(0..k)]);
        let u: f64 = rng.random();
        let row: Vec<Cell> = seed_row
            .iter()
            .zip(nb_row)
            .map(|(a, b)| match (a, b) {
                (Cell::Num(x), Cell::Num(y)) => Cell::Num(x + u * (y - x)),
                (c, _) => *c, // nominal copied from the seed
            })
            .collect();
        synth_rows.push(row);
    }

    let minority_total = n_min + n_synth;
    let maj_sample = if minority_total <= maj_idx.len() {
        draw_without_replacement(&maj_idx, minority_total, rng)
    } else {
        draw_with_replacement(&maj_idx, minority_total, rng)
    };

    let mut instances: Vec<Vec<Cell>> = Vec::with_capacity(2 * minority_total);
    let mut labels: Vec<usize> = Vec::with_capacity(2 * minority_total);
    for &i in &min_idx {
        instances.push(d.row(i).to_vec());
        labels.push(min);
    }
    for row in synth_rows {
        instances.push(row);
        labels.push(min);
    }
    for &i in &maj_sample {
        instances.push(d.row(i).to_vec());
        labels.push(1 - min);
    }
    Ok(Dataset::new_sample(
        d.attributes().to_vec(),
        instances,
        labels,
        d.class_names().to_vec(),
    )
    .expect("schema preserved"))
}

/// Per-class resampling toward `t = max(1, round(a/100 * n_maj))`: larger
/// classes are undersampled without replacement, smaller ones oversampled
/// with replacement. `a = 100` is pure over-bagging; small `a` reduces to
/// undersampling everything toward the smallest class.
pub fn under_over<R: Rng>(d: &Dataset, a: f64, rng: &mut R) -> Dataset {
    let counts = d.class_counts();
    let n_maj = *counts.iter().max().unwrap();
    let t = ((a / 100.0) * n_maj as f64).round().max(1.0) as usize;
    let mut idx = Vec::with_capacity(t * d.n_classes());
    for k in 0..d.n_classes() {
        let pool = indices_of_class(d, k);
        if pool.is_empty() {
            continue;
        }
        if pool.len() > t {
            idx.extend(draw_without_replacement(&pool, t, rng));
        } else if pool.len() < t {
            let mut all = pool.clone();
            all.extend(draw_with_replacement(&pool, t - pool.len(), rng));
            idx.extend(all);
        } else {
            idx.extend(pool);
        }
    }
    d.subset(&idx)
}

/// Undersamples every class without replacement to the smallest class
/// size; output has a uniform class distribution of size m * n_min.
pub fn under_to_smallest<R: Rng>(d: &Dataset, rng: &mut R) -> Dataset {
    let counts = d.class_counts();
    let n_min = *counts.iter().filter(|&&c| c > 0).min().unwrap();
    let mut idx = Vec::with_capacity(n_min * d.n_classes());
    for k in 0..d.n_classes() {
        let pool = indices_of_class(d, k);
        if !pool.is_empty() {
            idx.extend(draw_without_replacement(&pool, n_min, rng));
        }
    }
    d.subset(&idx)
}
