//! Bagged CART ensembles with per-tree bootstrap bookkeeping and
//! out-of-bag prediction extraction.
//!
//! Fitting is deterministic for a fixed seed regardless of worker count:
//! every tree draws its own rng seeded from the master seed and the tree
//! index, and results are assembled in tree order.

mod tree;

pub use tree::{LeafValue, Node, Tree};
pub(crate) use tree::{RowMatrix, TreeGrower, TreeTarget};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

use crate::dataset::{Column, ColumnKind};
use crate::error::{Error, Result};

/// Number of candidate features examined per split.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MtryRule {
    /// floor(sqrt(number of predictors)), at least 1.
    Sqrt,
    /// Every predictor.
    All,
    /// A fixed count in [1, number of predictors].
    Fixed(usize),
}

impl MtryRule {
    pub fn size(&self, n_predictors: usize) -> Result<usize> {
        match *self {
            MtryRule::Sqrt => Ok(((n_predictors as f64).sqrt().floor() as usize).max(1)),
            MtryRule::All => Ok(n_predictors),
            MtryRule::Fixed(m) => {
                if m == 0 || m > n_predictors {
                    Err(Error::Config(format!(
                        "mtry fixed({m}) out of range for {n_predictors} predictors"
                    )))
                } else {
                    Ok(m)
                }
            }
        }
    }
}

impl fmt::Display for MtryRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MtryRule::Sqrt => write!(f, "sqrt"),
            MtryRule::All => write!(f, "all"),
            MtryRule::Fixed(m) => write!(f, "fixed({m})"),
        }
    }
}

impl FromStr for MtryRule {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "sqrt" => Ok(MtryRule::Sqrt),
            "all" => Ok(MtryRule::All),
            other => {
                let inner = other
                    .strip_prefix("fixed(")
                    .and_then(|rest| rest.strip_suffix(')'))
                    .or_else(|| other.strip_prefix("fixed="));
                match inner.and_then(|v| v.parse::<usize>().ok()) {
                    Some(m) => Ok(MtryRule::Fixed(m)),
                    None => Err(format!(
                        "invalid mtry rule `{other}` (expected sqrt, all, or fixed(M))"
                    )),
                }
            }
        }
    }
}

/// Ensemble hyper-parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestConfig {
    pub n_trees: usize,
    /// Minimum leaf size as a fraction of N: min leaf = ceil(fraction * N).
    pub min_leaf_fraction: f64,
    pub mtry: MtryRule,
    pub seed: u64,
}

impl Default for ForestConfig {
    fn default() -> Self {
        ForestConfig {
            n_trees: 500,
            min_leaf_fraction: 0.04,
            mtry: MtryRule::Sqrt,
            seed: 0,
        }
    }
}

impl ForestConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_trees == 0 {
            return Err(Error::Config("n_trees must be at least 1".into()));
        }
        if !(self.min_leaf_fraction > 0.0 && self.min_leaf_fraction <= 1.0) {
            return Err(Error::Config(format!(
                "min_leaf_fraction must be in (0, 1], got {}",
                self.min_leaf_fraction
            )));
        }
        Ok(())
    }

    /// ceil(min_leaf_fraction * n), at least 1.
    pub fn min_leaf_size(&self, n_rows: usize) -> Result<usize> {
        let min_leaf = ((self.min_leaf_fraction * n_rows as f64).ceil() as usize).max(1);
        if n_rows < min_leaf {
            return Err(Error::Config(format!(
                "dataset has {n_rows} rows, fewer than the minimum leaf size {min_leaf}"
            )));
        }
        Ok(min_leaf)
    }
}

/// What the ensemble predicts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ForestTask {
    Classification { n_classes: usize },
    Regression,
}

/// A fitted ensemble for one target feature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Forest {
    task: ForestTask,
    trees: Vec<Tree>,
    /// `in_bag_counts[t][i]` = times row i was drawn into tree t's bootstrap.
    in_bag_counts: Vec<Vec<u32>>,
}

impl Forest {
    pub fn task(&self) -> ForestTask {
        self.task
    }

    pub fn n_trees(&self) -> usize {
        self.trees.len()
    }

    pub fn trees(&self) -> &[Tree] {
        &self.trees
    }

    pub fn in_bag_counts(&self) -> &[Vec<u32>] {
        &self.in_bag_counts
    }

    pub fn n_rows(&self) -> usize {
        self.in_bag_counts.first().map_or(0, |c| c.len())
    }

    /// Number of trees for which row `i` is out of bag.
    pub fn oob_tree_count(&self, i: usize) -> usize {
        self.in_bag_counts.iter().filter(|c| c[i] == 0).count()
    }
}

/// Out-of-bag predictions, one list per row in tree-index order.
#[derive(Debug, Clone, PartialEq)]
pub enum OobPredictions {
    Classification(Vec<Vec<u32>>),
    Regression(Vec<Vec<f64>>),
}

impl OobPredictions {
    pub fn n_rows(&self) -> usize {
        match self {
            OobPredictions::Classification(p) => p.len(),
            OobPredictions::Regression(p) => p.len(),
        }
    }

    /// T_i: number of out-of-bag models for row `i`.
    pub fn count(&self, i: usize) -> usize {
        match self {
            OobPredictions::Classification(p) => p[i].len(),
            OobPredictions::Regression(p) => p[i].len(),
        }
    }
}

/// Seed for the ensemble of feature `k`, derived from the master seed so
/// per-feature forests draw independent bootstraps. The high bit keeps
/// feature streams disjoint from per-tree streams.
pub fn feature_seed(master: u64, k: usize) -> u64 {
    derive_seed(master, 0x8000_0000_0000_0000 | k as u64)
}

/// Per-tree sub-seed, derived from the master seed and a stream index
/// (splitmix64 finalizer; platform-independent).
pub(crate) fn derive_seed(master: u64, stream: u64) -> u64 {
    let mut z = master.wrapping_add(stream.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Classic bagging: n uniform draws with replacement from [0, n).
/// Returns the draw count per index; zero-count rows are out of bag.
pub fn bootstrap_sample(n: usize, rng: &mut ChaCha8Rng) -> Vec<u32> {
    let mut counts = vec![0u32; n];
    for _ in 0..n {
        counts[rng.random_range(0..n)] += 1;
    }
    counts
}

fn expand_sample(counts: &[u32]) -> Vec<u32> {
    let mut rows = Vec::with_capacity(counts.len());
    for (i, &c) in counts.iter().enumerate() {
        for _ in 0..c {
            rows.push(i as u32);
        }
    }
    rows
}

/// Fit a bagged ensemble predicting `target` from `predictors`.
///
/// The task follows the target's kind: classification for categorical,
/// regression for numerical. Trees are fitted in parallel.
pub fn fit_forest(predictors: &[&Column], target: &Column, config: &ForestConfig) -> Result<Forest> {
    config.validate()?;
    if predictors.is_empty() {
        return Err(Error::Config("need at least one predictor column".into()));
    }
    let n = target.len();
    for p in predictors {
        if p.len() != n {
            return Err(Error::UnequalColumns {
                first: target.name().to_string(),
                second: p.name().to_string(),
                first_len: n,
                second_len: p.len(),
            });
        }
    }
    if n == 0 {
        return Err(Error::Config("cannot fit on an empty dataset".into()));
    }
    let min_leaf = config.min_leaf_size(n)?;
    let mtry = config.mtry.size(predictors.len())?;

    let data = RowMatrix::from_columns(predictors);
    let (task, target_view) = match target.kind() {
        ColumnKind::Categorical { cardinality } => (
            ForestTask::Classification {
                n_classes: cardinality,
            },
            TreeTarget::Classes {
                codes: target.codes().expect("categorical column has codes"),
                n_classes: cardinality,
            },
        ),
        ColumnKind::Numerical => (
            ForestTask::Regression,
            TreeTarget::Values(target.numbers().expect("numerical column has values")),
        ),
    };

    let fitted: Vec<(Tree, Vec<u32>)> = (0..config.n_trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, t as u64));
            let counts = bootstrap_sample(n, &mut rng);
            let sample = expand_sample(&counts);
            let tree = TreeGrower::new(&data, &target_view, min_leaf, mtry).grow(sample, &mut rng);
            (tree, counts)
        })
        .collect();

    let mut trees = Vec::with_capacity(fitted.len());
    let mut in_bag_counts = Vec::with_capacity(fitted.len());
    for (tree, counts) in fitted {
        trees.push(tree);
        in_bag_counts.push(counts);
    }
    Ok(Forest {
        task,
        trees,
        in_bag_counts,
    })
}

/// Collect, for every row, the predictions of exactly the trees whose
/// bootstrap sample excluded it, in tree-index order. Rows that are in-bag
/// everywhere get an empty list.
pub fn oob_predictions(forest: &Forest, predictors: &[&Column]) -> Result<OobPredictions> {
    let n = forest.n_rows();
    for p in predictors {
        if p.len() != n {
            return Err(Error::Config(format!(
                "predictor `{}` has {} rows, forest was fitted on {n}",
                p.name(),
                p.len()
            )));
        }
    }
    let data = RowMatrix::from_columns(predictors);

    let result = match forest.task {
        ForestTask::Classification { .. } => OobPredictions::Classification(
            (0..n)
                .into_par_iter()
                .map(|i| {
                    let row = data.row(i);
                    forest
                        .trees
                        .iter()
                        .zip(&forest.in_bag_counts)
                        .filter(|(_, counts)| counts[i] == 0)
                        .map(|(tree, _)| tree.predict_class(row))
                        .collect()
                })
                .collect(),
        ),
        ForestTask::Regression => OobPredictions::Regression(
            (0..n)
                .into_par_iter()
                .map(|i| {
                    let row = data.row(i);
                    forest
                        .trees
                        .iter()
                        .zip(&forest.in_bag_counts)
                        .filter(|(_, counts)| counts[i] == 0)
                        .map(|(tree, _)| tree.predict_mean(row))
                        .collect()
                })
                .collect(),
        ),
    };
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::Column;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    #[test]
    fn bootstrap_single_row_always_in_bag() {
        let counts = bootstrap_sample(1, &mut rng(3));
        assert_eq!(counts, vec![1]);
    }

    #[test]
    fn bootstrap_conserves_draws() {
        for seed in 0..20 {
            let counts = bootstrap_sample(137, &mut rng(seed));
            let total: u32 = counts.iter().sum();
            assert_eq!(total, 137);
        }
    }

    #[test]
    fn bootstrap_oob_fraction_matches_theory() {
        // fraction of zero-count rows concentrates on (1 - 1/n)^n
        let n = 1000usize;
        let expected = (1.0 - 1.0 / n as f64).powi(n as i32);
        let mut total_zero = 0usize;
        let trials = 500;
        for t in 0..trials {
            let counts = bootstrap_sample(n, &mut rng(derive_seed(42, t)));
            total_zero += counts.iter().filter(|&&c| c == 0).count();
        }
        let fraction = total_zero as f64 / (n * trials as usize) as f64;
        assert!(
            (fraction - expected).abs() < 0.02,
            "got {fraction}, expected about {expected}"
        );
    }

    fn two_cluster_dataset(n_per_class: usize) -> (Column, Column) {
        // predictor < 0 -> class a, > 0 -> class b
        let mut xs = Vec::new();
        let mut codes = Vec::new();
        for i in 0..n_per_class {
            xs.push(-1.0 - (i as f64) / n_per_class as f64);
            codes.push(0u32);
        }
        for i in 0..n_per_class {
            xs.push(1.0 + (i as f64) / n_per_class as f64);
            codes.push(1u32);
        }
        let x = Column::numerical("x", xs).unwrap();
        let y = Column::categorical(
            "y",
            codes,
            vec!["a".to_string(), "b".to_string()],
        )
        .unwrap();
        (x, y)
    }

    #[test]
    fn pure_target_gives_single_leaf_trees() {
        let x = Column::numerical("x", (0..40).map(|i| i as f64).collect()).unwrap();
        let y = Column::categorical(
            "y",
            vec![0; 40],
            vec!["a".to_string(), "b".to_string()],
        )
        .unwrap();
        let config = ForestConfig {
            n_trees: 10,
            min_leaf_fraction: 0.05,
            ..ForestConfig::default()
        };
        let forest = fit_forest(&[&x], &y, &config).unwrap();
        for tree in forest.trees() {
            assert_eq!(tree.n_nodes(), 1);
            assert_eq!(tree.predict_class(&[5.0]), 0);
        }
    }

    #[test]
    fn forced_single_leaf_regression_payload_is_bootstrap_mean() {
        let x = Column::numerical("x", vec![0.0, 1.0, 2.0, 3.0, 4.0, 5.0]).unwrap();
        let y = Column::numerical("y", vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        let config = ForestConfig {
            n_trees: 1,
            min_leaf_fraction: 1.0,
            seed: 9,
            ..ForestConfig::default()
        };
        let forest = fit_forest(&[&x], &y, &config).unwrap();
        assert_eq!(forest.trees()[0].n_nodes(), 1);

        let counts = &forest.in_bag_counts()[0];
        let targets = y.numbers().unwrap();
        let mut sum = 0.0;
        let mut total = 0u32;
        for (i, &c) in counts.iter().enumerate() {
            sum += targets[i] * c as f64;
            total += c;
        }
        assert_eq!(total, 6);
        let expected = sum / total as f64;
        let predicted = forest.trees()[0].predict_mean(&[0.0]);
        assert!((predicted - expected).abs() < 1e-12);
    }

    #[test]
    fn separable_classes_recovered_out_of_bag() {
        let (x, y) = two_cluster_dataset(100);
        let config = ForestConfig {
            n_trees: 200,
            min_leaf_fraction: 0.02,
            seed: 7,
            ..ForestConfig::default()
        };
        let forest = fit_forest(&[&x], &y, &config).unwrap();
        let preds = oob_predictions(&forest, &[&x]).unwrap();
        let votes = match &preds {
            OobPredictions::Classification(v) => v,
            _ => unreachable!(),
        };
        let labels = y.codes().unwrap();
        let mut correct = 0usize;
        let mut counted = 0usize;
        for (i, row_votes) in votes.iter().enumerate() {
            if row_votes.is_empty() {
                continue;
            }
            let ones = row_votes.iter().filter(|&&v| v == 1).count();
            let majority = u32::from(2 * ones > row_votes.len());
            counted += 1;
            if majority == labels[i] {
                correct += 1;
            }
        }
        assert!(counted >= 190);
        let accuracy = correct as f64 / counted as f64;
        assert!(accuracy >= 0.99, "oob accuracy {accuracy}");
    }

    #[test]
    fn oob_lists_follow_in_bag_counts() {
        let (x, y) = two_cluster_dataset(30);
        let config = ForestConfig {
            n_trees: 25,
            min_leaf_fraction: 0.1,
            seed: 11,
            ..ForestConfig::default()
        };
        let forest = fit_forest(&[&x], &y, &config).unwrap();
        let preds = oob_predictions(&forest, &[&x]).unwrap();
        for i in 0..forest.n_rows() {
            assert_eq!(preds.count(i), forest.oob_tree_count(i));
        }
    }

    #[test]
    fn single_tree_in_bag_row_gets_no_predictions() {
        let (x, y) = two_cluster_dataset(20);
        let config = ForestConfig {
            n_trees: 1,
            min_leaf_fraction: 0.2,
            seed: 0,
            ..ForestConfig::default()
        };
        let forest = fit_forest(&[&x], &y, &config).unwrap();
        let preds = oob_predictions(&forest, &[&x]).unwrap();
        let counts = &forest.in_bag_counts()[0];
        for (i, &c) in counts.iter().enumerate() {
            if c > 0 {
                assert_eq!(preds.count(i), 0);
            } else {
                assert_eq!(preds.count(i), 1);
            }
        }
    }

    #[test]
    fn oob_count_mean_near_theory_at_scale() {
        // glass-sized: N=214, T=500; also the min count stays comfortably high
        let n = 214usize;
        let x = Column::numerical("x", (0..n).map(|i| (i % 7) as f64).collect()).unwrap();
        let y = Column::categorical(
            "y",
            (0..n).map(|i| (i % 2) as u32).collect(),
            vec!["a".to_string(), "b".to_string()],
        )
        .unwrap();
        let config = ForestConfig {
            n_trees: 500,
            seed: 5,
            ..ForestConfig::default()
        };
        let forest = fit_forest(&[&x], &y, &config).unwrap();
        let t = config.n_trees as f64;
        let expected = (1.0 - 1.0 / n as f64).powi(n as i32);
        let mut min_count = usize::MAX;
        let mut sum = 0.0;
        for i in 0..n {
            let c = forest.oob_tree_count(i);
            min_count = min_count.min(c);
            sum += c as f64 / t;
        }
        let mean = sum / n as f64;
        assert!((mean - expected).abs() < 0.02, "mean {mean} vs {expected}");
        assert!(min_count >= 100, "min oob count {min_count}");
    }

    #[test]
    fn every_leaf_respects_min_leaf_size() {
        let (x, y) = two_cluster_dataset(60);
        let config = ForestConfig {
            n_trees: 40,
            min_leaf_fraction: 0.04,
            seed: 3,
            ..ForestConfig::default()
        };
        let n = 120;
        let min_leaf = config.min_leaf_size(n).unwrap();
        assert_eq!(min_leaf, 5);
        let forest = fit_forest(&[&x], &y, &config).unwrap();
        for tree in forest.trees() {
            for node in tree.nodes() {
                if let Node::Leaf { n_rows, .. } = node {
                    assert!(*n_rows as usize >= min_leaf);
                }
            }
        }
    }

    #[test]
    fn regression_leaf_means_match_routed_bootstrap_rows() {
        let n = 80usize;
        let x = Column::numerical("x", (0..n).map(|i| i as f64 / 8.0).collect()).unwrap();
        let y = Column::numerical(
            "y",
            (0..n).map(|i| (i as f64 / 8.0).sin() * 3.0).collect(),
        )
        .unwrap();
        let config = ForestConfig {
            n_trees: 12,
            min_leaf_fraction: 0.1,
            seed: 21,
            ..ForestConfig::default()
        };
        let forest = fit_forest(&[&x], &y, &config).unwrap();
        let values = y.numbers().unwrap();
        let xs = x.numbers().unwrap();
        for (tree, counts) in forest.trees().iter().zip(forest.in_bag_counts()) {
            // recompute each leaf mean by routing the bootstrap rows down the tree
            let mut sums = vec![0.0f64; tree.n_nodes()];
            let mut sizes = vec![0u32; tree.n_nodes()];
            for (i, &c) in counts.iter().enumerate() {
                if c == 0 {
                    continue;
                }
                let row = [xs[i]];
                let mut node = 0usize;
                while let Node::Internal {
                    feature,
                    threshold,
                    left,
                    right,
                } = &tree.nodes()[node]
                {
                    node = if row[*feature] <= *threshold {
                        *left as usize
                    } else {
                        *right as usize
                    };
                }
                sums[node] += values[i] * c as f64;
                sizes[node] += c;
            }
            for (idx, node) in tree.nodes().iter().enumerate() {
                if let Node::Leaf { n_rows, value } = node {
                    assert_eq!(sizes[idx], *n_rows);
                    if let LeafValue::Mean(m) = value {
                        let recomputed = sums[idx] / sizes[idx] as f64;
                        assert!((m - recomputed).abs() < 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn identical_seeds_give_identical_forests_across_thread_counts() {
        let (x, y) = two_cluster_dataset(50);
        let config = ForestConfig {
            n_trees: 30,
            seed: 77,
            ..ForestConfig::default()
        };
        let baseline = fit_forest(&[&x], &y, &config).unwrap();

        for threads in [1usize, 4] {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap();
            let forest = pool.install(|| fit_forest(&[&x], &y, &config).unwrap());
            assert_eq!(forest, baseline);
        }
    }

    #[test]
    fn empty_predictor_list_rejected() {
        let y = Column::numerical("y", vec![1.0, 2.0]).unwrap();
        assert!(fit_forest(&[], &y, &ForestConfig::default()).is_err());
    }

    #[test]
    fn mtry_rules() {
        assert_eq!(MtryRule::Sqrt.size(9).unwrap(), 3);
        assert_eq!(MtryRule::Sqrt.size(8).unwrap(), 2);
        assert_eq!(MtryRule::Sqrt.size(1).unwrap(), 1);
        assert_eq!(MtryRule::All.size(5).unwrap(), 5);
        assert_eq!(MtryRule::Fixed(2).size(5).unwrap(), 2);
        assert!(MtryRule::Fixed(0).size(5).is_err());
        assert!(MtryRule::Fixed(6).size(5).is_err());
        assert_eq!("sqrt".parse::<MtryRule>().unwrap(), MtryRule::Sqrt);
        assert_eq!("fixed(3)".parse::<MtryRule>().unwrap(), MtryRule::Fixed(3));
        assert!("bogus".parse::<MtryRule>().is_err());
    }

    #[test]
    fn forest_round_trips_through_json() {
        let (x, y) = two_cluster_dataset(25);
        let config = ForestConfig {
            n_trees: 8,
            seed: 13,
            ..ForestConfig::default()
        };
        let forest = fit_forest(&[&x], &y, &config).unwrap();
        let text = serde_json::to_string(&forest).unwrap();
        let back: Forest = serde_json::from_str(&text).unwrap();
        assert_eq!(back, forest);
    }
}
