//! Unpruned gain-ratio decision tree whose leaves keep raw class-frequency
//! distributions — the base learner for the bagging ensemble.
//!
//! Induction follows C4.5 conventions: numeric splits test candidate
//! thresholds at midpoints between consecutive distinct sorted values,
//! nominal attributes get one multiway split with a branch per declared
//! category, and among admissible splits (positive information gain, at
//! least two children with `min_leaf` instances) only those whose gain
//! reaches the mean gain of the per-attribute bests compete on gain ratio.
//! No pruning. Leaf probabilities are raw frequencies by default; Laplace
//! smoothing is available but off, as smoothing pulls the minority posterior
//! toward 1/m and hurts on imbalanced data.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{AttributeKind, Cell, Dataset};

#[derive(Debug, Error)]
pub enum TreeError {
    #[error("cannot fit a tree on an empty dataset")]
    EmptyDataset,
    #[error("instance does not conform to the tree's schema: {0}")]
    SchemaMismatch(String),
    #[error("leaf distribution undefined for all-zero counts")]
    ZeroCounts,
    #[error("invalid tree parameters: {0}")]
    BadParams(String),
    #[error("unsupported tree document schema {0}")]
    BadSchema(u32),
    #[error("serialization error: {0}")]
    Serde(#[from] serde_json::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TreeParams {
    pub min_leaf: usize,
    pub use_laplace: bool,
}

impl Default for TreeParams {
    fn default() -> Self {
        TreeParams {
            min_leaf: 2,
            use_laplace: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SplitRule {
    NumericLe { attr: usize, threshold: f64 },
    NominalMultiway { attr: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Node {
    Leaf {
        counts: Vec<u32>,
    },
    /// Internal node; keeps its own class counts so prediction can fall
    /// back on them when a nominal branch received no training instances.
    Internal {
        rule: SplitRule,
        counts: Vec<u32>,
        children: Vec<Option<u32>>,
    },
}

/// Fitted probability-estimation tree. Immutable; safe to share across
/// threads for concurrent prediction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbTree {
    schema: u32,
    n_classes: usize,
    use_laplace: bool,
    nodes: Vec<Node>,
}

/// Leaf counts to a probability distribution: raw `c_k / n` or Laplace
/// `(c_k + 1) / (n + m)`.
pub fn leaf_distribution(
    counts: &[u32],
    use_laplace: bool,
    m: usize,
) -> Result<Vec<f64>, TreeError> {
    debug_assert_eq!(counts.len(), m);
    let total: u64 = counts.iter().map(|&c| u64::from(c)).sum();
    if total == 0 {
        return Err(TreeError::ZeroCounts);
    }
    Ok(if use_laplace {
        let denom = total as f64 + m as f64;
        counts
            .iter()
            .map(|&c| (f64::from(c) + 1.0) / denom)
            .collect()
    } else {
        counts
            .iter()
            .map(|&c| f64::from(c) / total as f64)
            .collect()
    })
}

/// Column-major copy of the training data for the induction hot path.
enum Column {
    Num(Vec<f64>),
    Cat { values: Vec<usize>, arity: usize },
}

struct Candidate {
    attr: usize,
    threshold: Option<f64>,
    gain: f64,
    ratio: f64,
}

const GAIN_EPS: f64 = 1e-12;

fn entropy(counts: &[u32], total: f64) -> f64 {
    let mut h = 0.0;
    for &c in counts {
        if c > 0 {
            let p = f64::from(c) / total;
            h -= p * p.log2();
        }
    }
    h
}

/// Information gain and split info of a partition given per-branch class
/// counts. Empty branches contribute nothing to either term.
fn partition_stats(node_entropy: f64, total: f64, branches: &[Vec<u32>]) -> (f64, f64) {
    let mut info = 0.0;
    let mut split_info = 0.0;
    for b in branches {
        let nb: u32 = b.iter().sum();
        if nb == 0 {
            continue;
        }
        let w = f64::from(nb) / total;
        info += w * entropy(b, f64::from(nb));
        split_info -= w * w.log2();
    }
    (node_entropy - info, split_info)
}

fn admissible(branch_sizes: impl Iterator<Item = u32>, min_leaf: usize) -> bool {
    branch_sizes.filter(|&n| n as usize >= min_leaf).count() >= 2
}

/// Best admissible split of one attribute at a node, by gain ratio with
/// ties broken toward the lower threshold.
fn best_attribute_split(
    col: &Column,
    idx: &[u32],
    labels: &[usize],
    node_counts: &[u32],
    node_entropy: f64,
    min_leaf: usize,
    attr: usize,
) -> Option<Candidate> {
    let m = node_counts.len();
    let total = idx.len() as f64;
    match col {
        Column::Cat { values, arity } => {
            let mut branches = vec![vec![0u32; m]; *arity];
            for &i in idx {
                branches[values[i as usize]][labels[i as usize]] += 1;
            }
            if !admissible(branches.iter().map(|b| b.iter().sum()), min_leaf) {
                return None;
            }
            let (gain, split_info) = partition_stats(node_entropy, total, &branches);
            if gain <= GAIN_EPS || split_info <= 0.0 {
                return None;
            }
            Some(Candidate {
                attr,
                threshold: None,
                gain,
                ratio: gain / split_info,
            })
        }
        Column::Num(values) => {
            let mut order: Vec<u32> = idx.to_vec();
            order.sort_by(|&a, &b| values[a as usize].total_cmp(&values[b as usize]));
            let n = order.len();
            let mut left = vec![0u32; m];
            let mut best: Option<Candidate> = None;
            for (pos, &i) in order.iter().enumerate().take(n - 1) {
                left[labels[i as usize]] += 1;
                let v = values[i as usize];
                let v_next = values[order[pos + 1] as usize];
                if v == v_next {
                    continue;
                }
                let n_left = (pos + 1) as u32;
                let n_right = (n - pos - 1) as u32;
                if !admissible([n_left, n_right].into_iter(), min_leaf) {
                    continue;
                }
                let right: Vec<u32> = node_counts
                    .iter()
                    .zip(&left)
                    .map(|(&t, &l)| t - l)
                    .collect();
                let (gain, split_info) =
                    partition_stats(node_entropy, total, &[left.clone(), right]);
                if gain <= GAIN_EPS || split_info <= 0.0 {
                    continue;
                }
                let ratio = gain / split_info;
                if best.as_ref().is_none_or(|b| ratio > b.ratio) {
                    best = Some(Candidate {
                        attr,
                        threshold: Some((v + v_next) / 2.0),
                        gain,
                        ratio,
                    });
                }
            }
            best
        }
    }
}

/// Grows an unpruned gain-ratio tree. Deterministic in (dataset, params).
pub fn fit_tree(d: &Dataset, params: TreeParams) -> Result<ProbTree, TreeError> {
    if d.n_rows() == 0 {
        return Err(TreeError::EmptyDataset);
    }
    if params.min_leaf < 1 {
        return Err(TreeError::BadParams("min_leaf must be >= 1".into()));
    }
    let m = d.n_classes();
    let labels: Vec<usize> = d.labels().to_vec();
    let columns: Vec<Column> = (0..d.n_attrs())
        .map(|a| match &d.attributes()[a].kind {
            AttributeKind::Numeric => Column::Num(
                (0..d.n_rows())
                    .map(|i| match d.row(i)[a] {
                        Cell::Num(v) => v,
                        _ => unreachable!("schema-checked dataset"),
                    })
                    .collect(),
            ),
            AttributeKind::Nominal { categories } => Column::Cat {
                values: (0..d.n_rows())
                    .map(|i| match d.row(i)[a] {
                        Cell::Cat(c) => c,
                        _ => unreachable!("schema-checked dataset"),
                    })
                    .collect(),
                arity: categories.len(),
            },
        })
        .collect();

    let mut nodes: Vec<Node> = vec![Node::Leaf { counts: Vec::new() }];
    let all: Vec<u32> = (0..d.n_rows() as u32).collect();
    let mut stack: Vec<(Vec<u32>, u32)> = vec![(all, 0)];

    while let Some((idx, slot)) = stack.pop() {
        let mut counts = vec![0u32; m];
        for &i in &idx {
            counts[labels[i as usize]] += 1;
        }
        let n = idx.len();
        let pure = counts.iter().filter(|&&c| c > 0).count() <= 1;
        if pure || n < 2 * params.min_leaf {
            nodes[slot as usize] = Node::Leaf { counts };
            continue;
        }
        let node_entropy = entropy(&counts, n as f64);

        let candidates: Vec<Candidate> = columns
            .iter()
            .enumerate()
            .filter_map(|(a, col)| {
                best_attribute_split(
                    col,
                    &idx,
                    &labels,
                    &counts,
                    node_entropy,
                    params.min_leaf,
                    a,
                )
            })
            .collect();
        if candidates.is_empty() {
            nodes[slot as usize] = Node::Leaf { counts };
            continue;
        }

        // C4.5 guard: only per-attribute bests whose gain reaches the mean
        // gain compete on gain ratio.
        let mean_gain: f64 =
            candidates.iter().map(|c| c.gain).sum::<f64>() / candidates.len() as f64;
        let winner = candidates
            .iter()
            .filter(|c| c.gain >= mean_gain - GAIN_EPS)
            .fold(None::<&Candidate>, |best, c| match best {
                Some(b) if c.ratio <= b.ratio => Some(b),
                _ => Some(c),
            })
            .expect("non-empty candidate set always has a guard survivor");

        // partition the node's instances along the winning rule
        let (rule, groups): (SplitRule, Vec<Vec<u32>>) = match winner.threshold {
            Some(t) => {
                let values = match &columns[winner.attr] {
                    Column::Num(v) => v,
                    _ => unreachable!(),
                };
                let (le, gt): (Vec<u32>, Vec<u32>) =
                    idx.iter().partition(|&&i| values[i as usize] <= t);
                (
                    SplitRule::NumericLe {
                        attr: winner.attr,
                        threshold: t,
                    },
                    vec![le, gt],
                )
            }
            None => {
                let (values, arity) = match &columns[winner.attr] {
                    Column::Cat { values, arity } => (values, *arity),
                    _ => unreachable!(),
                };
                let mut groups = vec![Vec::new(); arity];
                for &i in &idx {
                    groups[values[i as usize]].push(i);
                }
                (SplitRule::NominalMultiway { attr: winner.attr }, groups)
            }
        };

        let mut children = Vec::with_capacity(groups.len());
        for g in groups {
            if g.is_empty() {
                children.push(None);
            } else {
                let child = nodes.len() as u32;
                nodes.push(Node::Leaf { counts: Vec::new() });
                stack.push((g, child));
                children.push(Some(child));
            }
        }
        nodes[slot as usize] = Node::Internal {
            rule,
            counts,
            children,
        };
    }

    Ok(ProbTree {
        schema: 1,
        n_classes: m,
        use_laplace: params.use_laplace,
        nodes,
    })
}

impl ProbTree {
    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| matches!(n, Node::Leaf { .. }))
            .count()
    }

    /// Routes an instance to its leaf and returns the leaf's class
    /// distribution. A nominal branch with no training instances falls back
    /// to the distribution of the routing node itself.
    pub fn predict_proba(&self, x: &[Cell]) -> Result<Vec<f64>, TreeError> {
        let mut node = &self.nodes[0];
        loop {
            match node {
                Node::Leaf { counts } => {
                    return leaf_distribution(counts, self.use_laplace, self.n_classes);
                }
                Node::Internal {
                    rule,
                    counts,
                    children,
                } => {
                    let child = match rule {
                        SplitRule::NumericLe { attr, threshold } => {
                            let v = match x.get(*attr) {
                                Some(Cell::Num(v)) => *v,
                                other => {
                                    return Err(TreeError::SchemaMismatch(format!(
                                        "expected numeric value at attribute {}, got {:?}",
                                        attr, other
                                    )));
                                }
                            };
                            if v <= *threshold {
                                children[0]
                            } else {
                                children[1]
                            }
                        }
                        SplitRule::NominalMultiway { attr } => {
                            let c = match x.get(*attr) {
                                Some(Cell::Cat(c)) => *c,
                                other => {
                                    return Err(TreeError::SchemaMismatch(format!(
                                        "expected nominal value at attribute {}, got {:?}",
                                        attr, other
                                    )));
                                }
                            };
                            if c >= children.len() {
                                return Err(TreeError::SchemaMismatch(format!(
                                    "category index {} outside the {} declared categories of attribute {}",
                                    c,
                                    children.len(),
                                    attr
                                )));
                            }
                            children[c]
                        }
                    };
                    match child {
                        Some(id) => node = &self.nodes[id as usize],
                        None => {
                            return leaf_distribution(counts, self.use_laplace, self.n_classes);
                        }
                    }
                }
            }
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("tree serializes")
    }

    pub fn from_json(s: &str) -> Result<Self, TreeError> {
        let t: ProbTree = serde_json::from_str(s)?;
        if t.schema != 1 {
            return Err(TreeError::BadSchema(t.schema));
        }
        Ok(t)
    }
}
