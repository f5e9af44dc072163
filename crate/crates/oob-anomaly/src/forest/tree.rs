//! CART trees: greedy binary splits by Gini decrease (classification) or
//! variance reduction (regression), grown on bootstrap samples.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Prediction payload of a leaf.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum LeafValue {
    /// Class counts over the target's categories, in code order.
    Counts(Vec<u32>),
    /// Mean of the in-node target values.
    Mean(f64),
}

/// A node routes a row left iff `row[feature] <= threshold`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Node {
    Internal {
        feature: usize,
        threshold: f64,
        left: u32,
        right: u32,
    },
    Leaf {
        /// Number of bootstrap rows this leaf was fitted on.
        n_rows: u32,
        value: LeafValue,
    },
}

/// A fitted tree; the root is node 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub(crate) nodes: Vec<Node>,
}

impl Tree {
    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    fn leaf(&self, row: &[f64]) -> &Node {
        let mut i = 0usize;
        loop {
            match &self.nodes[i] {
                Node::Internal {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    i = if row[*feature] <= *threshold {
                        *left as usize
                    } else {
                        *right as usize
                    };
                }
                leaf => return leaf,
            }
        }
    }

    /// Majority class of the reached leaf; ties resolve to the lowest code.
    pub fn predict_class(&self, row: &[f64]) -> u32 {
        match self.leaf(row) {
            Node::Leaf {
                value: LeafValue::Counts(counts),
                ..
            } => {
                let mut best = 0usize;
                for (c, &n) in counts.iter().enumerate() {
                    if n > counts[best] {
                        best = c;
                    }
                }
                best as u32
            }
            _ => unreachable!("classification predict on a regression tree"),
        }
    }

    /// Mean of the reached leaf.
    pub fn predict_mean(&self, row: &[f64]) -> f64 {
        match self.leaf(row) {
            Node::Leaf {
                value: LeafValue::Mean(m),
                ..
            } => *m,
            _ => unreachable!("regression predict on a classification tree"),
        }
    }
}

/// Row-major view of the predictor columns.
pub(crate) struct RowMatrix {
    values: Vec<f64>,
    n_cols: usize,
}

impl RowMatrix {
    pub(crate) fn from_columns(columns: &[&crate::dataset::Column]) -> RowMatrix {
        let n_cols = columns.len();
        let n_rows = if n_cols == 0 { 0 } else { columns[0].len() };
        let mut values = Vec::with_capacity(n_rows * n_cols);
        for i in 0..n_rows {
            for col in columns {
                values.push(col.encoded(i));
            }
        }
        RowMatrix { values, n_cols }
    }

    #[inline]
    pub(crate) fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.n_cols..(i + 1) * self.n_cols]
    }

    #[inline]
    fn at(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n_cols + j]
    }

    pub(crate) fn n_cols(&self) -> usize {
        self.n_cols
    }
}

/// Target column, as the grower sees it.
pub(crate) enum TreeTarget<'a> {
    Classes { codes: &'a [u32], n_classes: usize },
    Values(&'a [f64]),
}

pub(crate) struct TreeGrower<'a> {
    pub(crate) data: &'a RowMatrix,
    pub(crate) target: &'a TreeTarget<'a>,
    pub(crate) min_leaf: usize,
    pub(crate) mtry: usize,
    nodes: Vec<Node>,
    // scratch buffers reused across nodes
    feature_pool: Vec<usize>,
    class_scan: Vec<(f64, u32)>,
    value_scan: Vec<(f64, f64)>,
    left_counts: Vec<u32>,
    right_counts: Vec<u32>,
}

struct BestSplit {
    feature: usize,
    threshold: f64,
    score: f64,
}

impl<'a> TreeGrower<'a> {
    pub(crate) fn new(
        data: &'a RowMatrix,
        target: &'a TreeTarget<'a>,
        min_leaf: usize,
        mtry: usize,
    ) -> Self {
        let n_classes = match target {
            TreeTarget::Classes { n_classes, .. } => *n_classes,
            TreeTarget::Values(_) => 0,
        };
        TreeGrower {
            data,
            target,
            min_leaf,
            mtry,
            nodes: Vec::new(),
            feature_pool: (0..data.n_cols()).collect(),
            class_scan: Vec::new(),
            value_scan: Vec::new(),
            left_counts: vec![0; n_classes],
            right_counts: vec![0; n_classes],
        }
    }

    /// Grow a tree on the given bootstrap rows (indices with multiplicity).
    pub(crate) fn grow(mut self, mut sample: Vec<u32>, rng: &mut ChaCha8Rng) -> Tree {
        self.grow_node(&mut sample, rng);
        Tree { nodes: self.nodes }
    }

    fn grow_node(&mut self, rows: &mut [u32], rng: &mut ChaCha8Rng) -> u32 {
        if rows.len() < 2 * self.min_leaf || self.is_pure(rows) {
            return self.push_leaf(rows);
        }
        let best = match self.best_split(rows, rng) {
            Some(b) => b,
            None => return self.push_leaf(rows),
        };

        // stable partition keeps row order deterministic
        let mut left: Vec<u32> = Vec::with_capacity(rows.len());
        let mut right: Vec<u32> = Vec::with_capacity(rows.len());
        for &r in rows.iter() {
            if self.data.at(r as usize, best.feature) <= best.threshold {
                left.push(r);
            } else {
                right.push(r);
            }
        }
        debug_assert!(left.len() >= self.min_leaf && right.len() >= self.min_leaf);
        let split = left.len();
        rows[..split].copy_from_slice(&left);
        rows[split..].copy_from_slice(&right);

        let idx = self.nodes.len() as u32;
        self.nodes.push(Node::Internal {
            feature: best.feature,
            threshold: best.threshold,
            left: 0,
            right: 0,
        });
        let (l_rows, r_rows) = rows.split_at_mut(split);
        let l = self.grow_node(l_rows, rng);
        let r = self.grow_node(r_rows, rng);
        if let Node::Internal { left, right, .. } = &mut self.nodes[idx as usize] {
            *left = l;
            *right = r;
        }
        idx
    }

    fn is_pure(&self, rows: &[u32]) -> bool {
        match self.target {
            TreeTarget::Classes { codes, .. } => {
                let first = codes[rows[0] as usize];
                rows.iter().all(|&r| codes[r as usize] == first)
            }
            TreeTarget::Values(values) => {
                let first = values[rows[0] as usize];
                rows.iter().all(|&r| values[r as usize] == first)
            }
        }
    }

    fn push_leaf(&mut self, rows: &[u32]) -> u32 {
        let value = match self.target {
            TreeTarget::Classes { codes, n_classes } => {
                let mut counts = vec![0u32; *n_classes];
                for &r in rows {
                    counts[codes[r as usize] as usize] += 1;
                }
                LeafValue::Counts(counts)
            }
            TreeTarget::Values(values) => {
                let sum: f64 = rows.iter().map(|&r| values[r as usize]).sum();
                LeafValue::Mean(sum / rows.len() as f64)
            }
        };
        let idx = self.nodes.len() as u32;
        self.nodes.push(Node::Leaf {
            n_rows: rows.len() as u32,
            value,
        });
        idx
    }

    /// Fresh random feature subset of size mtry, scanned in ascending index
    /// order; ties in gain keep the first (lowest feature, lowest threshold).
    fn best_split(&mut self, rows: &[u32], rng: &mut ChaCha8Rng) -> Option<BestSplit> {
        let n_features = self.feature_pool.len();
        let m = self.mtry.min(n_features);
        for i in 0..m {
            let j = rng.random_range(i..n_features);
            self.feature_pool.swap(i, j);
        }
        let mut candidates: Vec<usize> = self.feature_pool[..m].to_vec();
        candidates.sort_unstable();

        let mut best: Option<BestSplit> = None;
        for feature in candidates {
            let found = match self.target {
                TreeTarget::Classes { .. } => self.scan_classification(rows, feature),
                TreeTarget::Values(_) => self.scan_regression(rows, feature),
            };
            if let Some(split) = found {
                let better = match &best {
                    Some(b) => split.score > b.score,
                    None => true,
                };
                if better {
                    best = Some(split);
                }
            }
        }
        best
    }

    /// Maximizes sum over children of (sum of squared class counts) / size,
    /// which is equivalent to minimizing weighted Gini impurity. Returns
    /// None unless some valid split strictly improves on the parent.
    fn scan_classification(&mut self, rows: &[u32], feature: usize) -> Option<BestSplit> {
        let codes = match self.target {
            TreeTarget::Classes { codes, .. } => *codes,
            TreeTarget::Values(_) => unreachable!(),
        };
        let scan = &mut self.class_scan;
        scan.clear();
        scan.extend(
            rows.iter()
                .map(|&r| (self.data.at(r as usize, feature), codes[r as usize])),
        );
        scan.sort_unstable_by(|a, b| a.0.partial_cmp(&b.0).unwrap());

        let n = scan.len();
        self.left_counts.iter_mut().for_each(|c| *c = 0);
        self.right_counts.iter_mut().for_each(|c| *c = 0);
        for &(_, c) in scan.iter() {
            self.right_counts[c as usize] += 1;
        }
        let parent_sq: f64 = self
            .right_counts
            .iter()
            .map(|&c| (c as f64) * (c as f64))
            .sum();
        let parent_score = parent_sq / n as f64;

        let mut left_sq = 0.0;
        let mut right_sq = parent_sq;
        let mut best: Option<BestSplit> = None;
        for i in 0..n - 1 {
            let (v, c) = scan[i];
            let c = c as usize;
            // moving one row left updates both squared sums incrementally
            left_sq += 2.0 * self.left_counts[c] as f64 + 1.0;
            right_sq -= 2.0 * self.right_counts[c] as f64 - 1.0;
            self.left_counts[c] += 1;
            self.right_counts[c] -= 1;

            let next = scan[i + 1].0;
            if next == v {
                continue;
            }
            let n_left = i + 1;
            let n_right = n - n_left;
            if n_left < self.min_leaf || n_right < self.min_leaf {
                continue;
            }
            let score = left_sq / n_left as f64 + right_sq / n_right as f64;
            if score > parent_score && best.as_ref().is_none_or(|b| score > b.score) {
                best = Some(BestSplit {
                    feature,
                    threshold: midpoint(v, next),
                    score,
                });
            }
        }
        best
    }

    /// Minimizes the summed squared error of the two children; the score is
    /// negated so that higher is better, like the classification scan.
    fn scan_regression(&mut self, rows: &[u32], feature: usize) -> Option<BestSplit> {
        let values = match self.target {
            TreeTarget::Values(values) => *values,
            TreeTarget::Classes { .. } => unreachable!(),
        };
        let scan = &mut self.value_scan;
        scan.clear();
        scan.extend(
            rows.iter()
                .map(|&r| (self.data.at(r as usize, feature), values[r as usize])),
        );
        scan.sort_unstable_by(|a, b| a.0.partial_cmp(&b.0).unwrap());

        let n = scan.len();
        let total_sum: f64 = scan.iter().map(|&(_, y)| y).sum();
        let total_sq: f64 = scan.iter().map(|&(_, y)| y * y).sum();
        let parent_sse = total_sq - total_sum * total_sum / n as f64;

        let mut left_sum = 0.0;
        let mut left_sq = 0.0;
        let mut best: Option<BestSplit> = None;
        for i in 0..n - 1 {
            let (v, y) = scan[i];
            left_sum += y;
            left_sq += y * y;
            let next = scan[i + 1].0;
            if next == v {
                continue;
            }
            let n_left = (i + 1) as f64;
            let n_right = (n - i - 1) as f64;
            if ((i + 1) < self.min_leaf) || ((n - i - 1) < self.min_leaf) {
                continue;
            }
            let right_sum = total_sum - left_sum;
            let right_sq = total_sq - left_sq;
            let sse = (left_sq - left_sum * left_sum / n_left)
                + (right_sq - right_sum * right_sum / n_right);
            let score = -sse;
            if sse < parent_sse && best.as_ref().is_none_or(|b| score > b.score) {
                best = Some(BestSplit {
                    feature,
                    threshold: midpoint(v, next),
                    score,
                });
            }
        }
        best
    }
}

/// Split threshold between two adjacent distinct sorted values. Guards the
/// case where the floating-point midpoint rounds up to `hi`, which would
/// route `hi` rows left and disagree with the scan's partition.
fn midpoint(lo: f64, hi: f64) -> f64 {
    let mid = lo + (hi - lo) / 2.0;
    if mid < hi {
        mid
    } else {
        lo
    }
}
