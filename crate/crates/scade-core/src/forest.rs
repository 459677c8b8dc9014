//! Isolation forest over numeric feature rows.
//!
//! Anomalies are easier to isolate by random axis-aligned splits than
//! normal points, so their expected path length from root to leaf is
//! shorter. Each tree is grown on a random subsample: pick a feature with
//! spread, pick a uniform split value inside its range, recurse until a
//! point is alone, the height limit is reached, or nothing can be split.
//! Scores normalize expected path length to (0, 1]; higher means more
//! isolated.
//!
//! Everything is seeded: tree construction derives one generator per tree
//! from the forest seed, so results are reproducible across runs and
//! across thread counts.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Euler-Mascheroni constant, for the harmonic-number expansion.
const EULER_MASCHERONI: f64 = 0.577_215_664_901_532_9;

/// Construction parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForestParams {
    pub n_trees: usize,
    /// Rows sampled per tree; capped at the row count.
    pub subsample: usize,
    /// Expected anomaly share, sets the score cutoff quantile.
    pub contamination: f64,
    pub seed: u64,
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams {
            n_trees: 100,
            subsample: 256,
            contamination: 0.05,
            seed: 0,
        }
    }
}

impl ForestParams {
    pub fn validate(&self) -> Result<()> {
        if self.n_trees == 0 {
            return Err(Error::Parameter("n_trees must be at least 1".into()));
        }
        if self.subsample < 2 {
            return Err(Error::Parameter("subsample must be at least 2".into()));
        }
        if !self.contamination.is_finite() || self.contamination <= 0.0 || self.contamination > 0.5
        {
            return Err(Error::Parameter(format!(
                "contamination must be in (0, 0.5], got {}",
                self.contamination
            )));
        }
        Ok(())
    }
}

/// Expected path length of an unsuccessful binary search in a tree of `n`
/// points: `2 H(n-1) - 2 (n-1)/n`, with `H` the harmonic number. Used both
/// to grade unexpanded leaves and to normalize scores. `c(0) = c(1) = 0`,
/// `c(2) = 1`.
pub fn average_path_length(n: usize) -> f64 {
    if n <= 1 {
        return 0.0;
    }
    let m = (n - 1) as f64;
    2.0 * harmonic(n - 1) - 2.0 * m / n as f64
}

/// Harmonic number H(m). Exact summation for small m; for larger m the
/// asymptotic expansion `ln m + gamma + 1/2m - 1/12m^2 + 1/120m^4` is
/// accurate to well below 1e-12 relative.
fn harmonic(m: usize) -> f64 {
    if m == 0 {
        return 0.0;
    }
    if m < 64 {
        // Sum smallest-first so rounding error stays tiny.
        return (1..=m).rev().map(|i| 1.0 / i as f64).sum();
    }
    let x = m as f64;
    x.ln() + EULER_MASCHERONI + 1.0 / (2.0 * x) - 1.0 / (12.0 * x * x) + 1.0 / (120.0 * x.powi(4))
}

/// Derives a per-tree seed from the forest seed. SplitMix64 finalizer:
/// consecutive indices map to well-separated states.
fn derive_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed.wrapping_add(index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
enum Node {
    Split {
        feature: usize,
        value: f64,
        left: Box<Node>,
        right: Box<Node>,
    },
    Leaf {
        size: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Tree {
    root: Node,
}

impl Tree {
    fn path_length(&self, row: &[f64]) -> f64 {
        let mut node = &self.root;
        let mut depth = 0.0f64;
        loop {
            match node {
                Node::Leaf { size } => return depth + average_path_length(*size),
                Node::Split {
                    feature,
                    value,
                    left,
                    right,
                } => {
                    depth += 1.0;
                    node = if row[*feature] < *value { left } else { right };
                }
            }
        }
    }
}

fn build_node(
    rows: &[Vec<f64>],
    indices: &[usize],
    depth: usize,
    limit: usize,
    rng: &mut ChaCha12Rng,
) -> Node {
    if indices.len() <= 1 || depth >= limit {
        return Node::Leaf {
            size: indices.len(),
        };
    }
    let dims = rows[indices[0]].len();
    // Only features with spread on this subset can split it.
    let candidates: Vec<(usize, f64, f64)> = (0..dims)
        .filter_map(|feature| {
            let mut lo = f64::INFINITY;
            let mut hi = f64::NEG_INFINITY;
            for &i in indices {
                let v = rows[i][feature];
                lo = lo.min(v);
                hi = hi.max(v);
            }
            (lo < hi).then_some((feature, lo, hi))
        })
        .collect();
    if candidates.is_empty() {
        return Node::Leaf {
            size: indices.len(),
        };
    }
    let (feature, lo, hi) = candidates[rng.gen_range(0..candidates.len())];
    let value = rng.gen_range(lo..hi);
    let (left_idx, right_idx): (Vec<usize>, Vec<usize>) =
        indices.iter().partition(|&&i| rows[i][feature] < value);
    Node::Split {
        feature,
        value,
        left: Box::new(build_node(rows, &left_idx, depth + 1, limit, rng)),
        right: Box::new(build_node(rows, &right_idx, depth + 1, limit, rng)),
    }
}

fn build_tree(rows: &[Vec<f64>], seed: u64, sample_size: usize, limit: usize) -> Tree {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    // Partial Fisher-Yates: the first sample_size slots become a uniform
    // draw without replacement.
    let mut indices: Vec<usize> = (0..rows.len()).collect();
    for i in 0..sample_size {
        let j = rng.gen_range(i..indices.len());
        indices.swap(i, j);
    }
    indices.truncate(sample_size);
    let root = build_node(rows, &indices, 0, limit, &mut rng);
    Tree { root }
}

/// A fitted forest plus the score cutoff derived from its training rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IsolationForest {
    trees: Vec<Tree>,
    /// Per-tree sample size actually used.
    pub sample_size: usize,
    /// Normalizing constant `c(sample_size)`.
    normalizer: f64,
    /// Scores at or above this are anomalous.
    pub cutoff: f64,
    /// Training rows' scores, in input row order.
    pub training_scores: Vec<f64>,
    pub params: ForestParams,
}

/// ceil(log2(n)) for n >= 1.
fn height_limit(n: usize) -> usize {
    if n <= 1 {
        return 0;
    }
    (usize::BITS - (n - 1).leading_zeros()) as usize
}

/// Fits a forest on feature rows and fixes the anomaly cutoff at the
/// contamination quantile of the training scores: with `k = max(1,
/// floor(contamination * n))`, the k-th largest training score.
pub fn fit(rows: &[Vec<f64>], params: &ForestParams) -> Result<IsolationForest> {
    params.validate()?;
    if rows.len() < 2 {
        return Err(Error::Parameter(format!(
            "isolation forest needs at least 2 rows, got {}",
            rows.len()
        )));
    }
    let dims = rows[0].len();
    if dims == 0 {
        return Err(Error::Parameter("feature rows must not be empty".into()));
    }
    for (i, row) in rows.iter().enumerate() {
        if row.len() != dims {
            return Err(Error::Parameter(format!(
                "row {i} has {} features, expected {dims}",
                row.len()
            )));
        }
        if row.iter().any(|v| !v.is_finite()) {
            return Err(Error::Parameter(format!("row {i} has a non-finite value")));
        }
    }

    let sample_size = params.subsample.min(rows.len());
    let limit = height_limit(sample_size);
    let trees: Vec<Tree> = (0..params.n_trees)
        .into_par_iter()
        .map(|t| build_tree(rows, derive_seed(params.seed, t as u64), sample_size, limit))
        .collect();

    let normalizer = average_path_length(sample_size);
    let mut forest = IsolationForest {
        trees,
        sample_size,
        normalizer,
        cutoff: f64::NAN,
        training_scores: Vec::new(),
        params: *params,
    };

    let training_scores: Vec<f64> = rows.par_iter().map(|r| forest.score_row(r)).collect();
    let k = ((params.contamination * rows.len() as f64).floor() as usize).max(1);
    let mut sorted = training_scores.clone();
    sorted.sort_by(|a, b| b.partial_cmp(a).expect("scores are finite"));
    forest.cutoff = sorted[k - 1];
    forest.training_scores = training_scores;
    Ok(forest)
}

impl IsolationForest {
    /// Anomaly score of one row in (0, 1]: `2^(-E[path] / c(sample_size))`.
    /// 0.5 means "as isolable as average"; near 1 means isolated almost
    /// immediately in every tree.
    pub fn score_row(&self, row: &[f64]) -> f64 {
        let total: f64 = self.trees.iter().map(|t| t.path_length(row)).sum();
        let mean_path = total / self.trees.len() as f64;
        2.0f64.powf(-mean_path / self.normalizer)
    }

    pub fn is_anomalous(&self, score: f64) -> bool {
        score >= self.cutoff
    }
}
