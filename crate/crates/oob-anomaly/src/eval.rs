//! ROC-AUC evaluation against labeled benchmarks and the
//! remove-top-scoring-rows pre-processing workflow.

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::forest::ForestConfig;
use crate::scoring::{score_dataset, AnomalyReport};

/// Anomaly scores paired with binary ground-truth labels (true = anomaly).
#[derive(Debug, Clone)]
pub struct LabeledScores {
    scores: Vec<f64>,
    labels: Vec<bool>,
}

impl LabeledScores {
    pub fn new(scores: Vec<f64>, labels: Vec<bool>) -> Result<LabeledScores> {
        if scores.len() != labels.len() {
            return Err(Error::Config(format!(
                "{} scores vs {} labels",
                scores.len(),
                labels.len()
            )));
        }
        if let Some(bad) = scores.iter().find(|s| !s.is_finite()) {
            return Err(Error::Config(format!("non-finite score {bad}")));
        }
        Ok(LabeledScores { scores, labels })
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }
}

/// Area under the ROC curve by the rank statistic, with average ranks for
/// tied scores: (sum of positive ranks - P(P+1)/2) / (P * N_neg). Identical
/// to the trapezoidal sweep over thresholds.
pub fn roc_auc(ls: &LabeledScores) -> Result<f64> {
    let n = ls.len();
    let positives = ls.labels.iter().filter(|&&l| l).count();
    let negatives = n - positives;
    if positives == 0 || negatives == 0 {
        return Err(Error::UndefinedAuc);
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| ls.scores[a].partial_cmp(&ls.scores[b]).unwrap());

    // average rank per tie group, 1-based
    let mut rank_sum_pos = 0.0f64;
    let mut start = 0usize;
    while start < n {
        let mut end = start;
        while end < n && ls.scores[order[end]] == ls.scores[order[start]] {
            end += 1;
        }
        let avg_rank = (start + 1 + end) as f64 / 2.0;
        for &i in &order[start..end] {
            if ls.labels[i] {
                rank_sum_pos += avg_rank;
            }
        }
        start = end;
    }

    let p = positives as f64;
    let u = rank_sum_pos - p * (p + 1.0) / 2.0;
    Ok(u / (p * negatives as f64))
}

/// Score the dataset `repeats` times with seeds `seed`, `seed+1`, ... and
/// report (mean AUC, per-run AUCs). Labels are only consulted after each
/// scoring run completes; scoring sees the dataset alone.
pub fn repeated_auc(
    dataset: &Dataset,
    labels: &[bool],
    config: &ForestConfig,
    repeats: usize,
) -> Result<(f64, Vec<f64>)> {
    if repeats == 0 {
        return Err(Error::Config("repeats must be at least 1".into()));
    }
    if labels.len() != dataset.n_rows() {
        return Err(Error::Config(format!(
            "{} labels for {} rows",
            labels.len(),
            dataset.n_rows()
        )));
    }
    let mut aucs = Vec::with_capacity(repeats);
    for r in 0..repeats {
        let run_config = ForestConfig {
            seed: config.seed.wrapping_add(r as u64),
            ..config.clone()
        };
        let report = score_dataset(dataset, &run_config)?;
        let ls = LabeledScores::new(report.total, labels.to_vec())?;
        aucs.push(roc_auc(&ls)?);
    }
    let mean = aucs.iter().sum::<f64>() / aucs.len() as f64;
    Ok((mean, aucs))
}

/// Remove the ceil(pct * N) rows with the highest anomaly scores.
///
/// Returns the kept dataset (original relative row order) and the removed
/// row indices in removal order: descending score, ties broken by lower
/// row index first.
pub fn filter_top_percent(
    dataset: &Dataset,
    report: &AnomalyReport,
    pct: f64,
) -> Result<(Dataset, Vec<usize>)> {
    if !(0.0..1.0).contains(&pct) {
        return Err(Error::Config(format!("pct must be in [0, 1), got {pct}")));
    }
    if report.n_rows() != dataset.n_rows() {
        return Err(Error::Config(format!(
            "report has {} rows, dataset has {}",
            report.n_rows(),
            dataset.n_rows()
        )));
    }
    let n = dataset.n_rows();
    let n_remove = (pct * n as f64).ceil() as usize;
    let ranked = report.ranked_rows();
    let removed: Vec<usize> = ranked[..n_remove].to_vec();

    let mut keep: Vec<usize> = ranked[n_remove..].to_vec();
    keep.sort_unstable();
    Ok((dataset.select_rows(&keep), removed))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::Column;
    use crate::forest::MtryRule;
    use crate::scoring::aggregate_report;
    use proptest::prelude::*;

    fn labeled(scores: &[f64], labels: &[u8]) -> LabeledScores {
        LabeledScores::new(
            scores.to_vec(),
            labels.iter().map(|&l| l == 1).collect(),
        )
        .unwrap()
    }

    /// Exhaustive concordance counting over all positive-negative pairs,
    /// ties worth one half. Exact in f64 for small inputs.
    fn pairwise_auc(scores: &[f64], labels: &[u8]) -> f64 {
        let pos: Vec<f64> = scores
            .iter()
            .zip(labels)
            .filter(|(_, &l)| l == 1)
            .map(|(&s, _)| s)
            .collect();
        let neg: Vec<f64> = scores
            .iter()
            .zip(labels)
            .filter(|(_, &l)| l == 0)
            .map(|(&s, _)| s)
            .collect();
        let mut twice_wins = 0u64;
        for &p in &pos {
            for &q in &neg {
                if p > q {
                    twice_wins += 2;
                } else if p == q {
                    twice_wins += 1;
                }
            }
        }
        (twice_wins as f64 / 2.0) / (pos.len() as f64 * neg.len() as f64)
    }

    #[test]
    fn perfect_ranking_scores_one() {
        let ls = labeled(&[0.9, 0.8, 0.2, 0.1], &[1, 1, 0, 0]);
        assert_eq!(roc_auc(&ls).unwrap(), 1.0);
    }

    #[test]
    fn all_tied_scores_half() {
        let ls = labeled(&[0.5, 0.5, 0.5, 0.5], &[1, 0, 1, 0]);
        assert_eq!(roc_auc(&ls).unwrap(), 0.5);
    }

    #[test]
    fn mixed_ranking_three_quarters() {
        let ls = labeled(&[0.1, 0.4, 0.35, 0.8], &[0, 0, 1, 1]);
        assert_eq!(roc_auc(&ls).unwrap(), 0.75);
    }

    #[test]
    fn one_class_labels_are_undefined() {
        let ls = labeled(&[0.1, 0.2], &[1, 1]);
        assert!(matches!(roc_auc(&ls), Err(Error::UndefinedAuc)));
        let ls = labeled(&[0.1, 0.2], &[0, 0]);
        assert!(matches!(roc_auc(&ls), Err(Error::UndefinedAuc)));
    }

    #[test]
    fn non_finite_scores_rejected() {
        assert!(LabeledScores::new(vec![f64::NAN, 0.0], vec![true, false]).is_err());
    }

    fn noisy_planted_dataset(n: usize, n_anomalies: usize) -> (Dataset, Vec<bool>) {
        use rand::Rng;
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(424242);
        let base: Vec<f64> = (0..n).map(|_| rng.random_range(-3.0..3.0)).collect();
        let mut follow: Vec<f64> = base
            .iter()
            .map(|&b| 2.0 * b + rng.random_range(-0.8..0.8))
            .collect();
        let mut labels = vec![false; n];
        for a in 0..n_anomalies {
            let i = (a * 97 + 13) % n;
            follow[i] += rng.random_range(1.2..2.2);
            labels[i] = true;
        }
        let c0 = Column::numerical("base", base).unwrap();
        let c1 = Column::numerical("follow", follow).unwrap();
        (Dataset::new(vec![c0, c1]).unwrap(), labels)
    }

    #[test]
    fn repeats_of_one_equal_single_run() {
        let (dataset, labels) = noisy_planted_dataset(90, 6);
        let config = ForestConfig {
            n_trees: 60,
            seed: 5,
            ..ForestConfig::default()
        };
        let (mean, runs) = repeated_auc(&dataset, &labels, &config, 1).unwrap();
        assert_eq!(runs.len(), 1);
        assert_eq!(mean, runs[0]);

        let report = score_dataset(&dataset, &config).unwrap();
        let single =
            roc_auc(&LabeledScores::new(report.total, labels.clone()).unwrap()).unwrap();
        assert_eq!(mean, single);
    }

    #[test]
    fn auc_variance_shrinks_with_more_trees() {
        let (dataset, labels) = noisy_planted_dataset(110, 8);
        let variance = |trees: usize| -> f64 {
            let config = ForestConfig {
                n_trees: trees,
                seed: 100,
                mtry: MtryRule::All,
                ..ForestConfig::default()
            };
            let (mean, runs) = repeated_auc(&dataset, &labels, &config, 8).unwrap();
            runs.iter().map(|a| (a - mean) * (a - mean)).sum::<f64>() / runs.len() as f64
        };
        let var_small = variance(50);
        let var_large = variance(500);
        assert!(
            var_large < var_small,
            "var(T=500)={var_large} not below var(T=50)={var_small}"
        );
    }

    fn report_with_scores(scores: &[f64]) -> AnomalyReport {
        // aggregation over a single pre-scaled pseudo-feature
        let column = crate::scoring::FeatureScoreColumn {
            feature_index: 0,
            feature_name: "f".to_string(),
            kind: crate::dataset::ColumnKind::Numerical,
            uncertainty: vec![0.0; scores.len()],
            disagreement: scores.to_vec(),
            raw: scores.to_vec(),
            scaled: scores.to_vec(),
            oob_counts: vec![1; scores.len()],
            warnings: Vec::new(),
        };
        aggregate_report(&ForestConfig::default(), vec![column])
    }

    fn toy_dataset(n: usize) -> Dataset {
        let a = Column::numerical("a", (0..n).map(|i| i as f64).collect()).unwrap();
        let b = Column::numerical("b", (0..n).map(|i| (i * i) as f64).collect()).unwrap();
        Dataset::new(vec![a, b]).unwrap()
    }

    #[test]
    fn filter_zero_percent_keeps_everything() {
        let dataset = toy_dataset(10);
        let report = report_with_scores(&[0.5; 10]);
        let (kept, removed) = filter_top_percent(&dataset, &report, 0.0).unwrap();
        assert_eq!(kept.n_rows(), 10);
        assert!(removed.is_empty());
    }

    #[test]
    fn filter_rounds_removal_count_up() {
        let dataset = toy_dataset(10);
        let scores: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let report = report_with_scores(&scores);
        let (kept, removed) = filter_top_percent(&dataset, &report, 0.15).unwrap();
        assert_eq!(removed.len(), 2);
        assert_eq!(kept.n_rows(), 8);
        assert_eq!(removed, vec![9, 8]);
    }

    #[test]
    fn filter_removes_top_scores_first() {
        let dataset = toy_dataset(4);
        let report = report_with_scores(&[5.0, 1.0, 4.0, 2.0]);
        let (kept, removed) = filter_top_percent(&dataset, &report, 0.5).unwrap();
        assert_eq!(removed, vec![0, 2]);
        let kept_a = kept.column(0).unwrap().numbers().unwrap().to_vec();
        assert_eq!(kept_a, vec![1.0, 3.0]);
    }

    #[test]
    fn filter_breaks_ties_by_lower_index() {
        let dataset = toy_dataset(4);
        let report = report_with_scores(&[2.0, 2.0, 2.0, 2.0]);
        let (_, removed) = filter_top_percent(&dataset, &report, 0.5).unwrap();
        assert_eq!(removed, vec![0, 1]);
    }

    #[test]
    fn filter_rejects_full_removal() {
        let dataset = toy_dataset(4);
        let report = report_with_scores(&[1.0; 4]);
        assert!(filter_top_percent(&dataset, &report, 1.0).is_err());
        assert!(filter_top_percent(&dataset, &report, -0.1).is_err());
    }

    #[test]
    fn removed_scores_dominate_kept_scores() {
        let scores = [3.0, 7.0, 1.0, 7.0, 2.0, 9.0];
        let dataset = toy_dataset(6);
        let report = report_with_scores(&scores);
        let (kept, removed) = filter_top_percent(&dataset, &report, 0.4).unwrap();
        assert_eq!(kept.n_rows() + removed.len(), 6);
        let min_removed = removed
            .iter()
            .map(|&i| scores[i])
            .fold(f64::INFINITY, f64::min);
        let kept_indices: Vec<usize> = (0..6).filter(|i| !removed.contains(i)).collect();
        let max_kept = kept_indices
            .iter()
            .map(|&i| scores[i])
            .fold(f64::NEG_INFINITY, f64::max);
        assert!(min_removed >= max_kept);
    }

    proptest! {
        /// Exact agreement between the rank statistic and exhaustive pair
        /// counting, ties included.
        #[test]
        fn rank_auc_equals_pairwise_auc(
            scores in proptest::collection::vec(0u8..6, 4..50),
            labels in proptest::collection::vec(0u8..2, 4..50),
        ) {
            let n = scores.len().min(labels.len());
            let scores: Vec<f64> = scores[..n].iter().map(|&s| s as f64 / 2.0).collect();
            let labels = &labels[..n];
            let pos = labels.iter().filter(|&&l| l == 1).count();
            prop_assume!(pos > 0 && pos < n);
            let ls = labeled(&scores, labels);
            let rank = roc_auc(&ls).unwrap();
            let pairs = pairwise_auc(&scores, labels);
            prop_assert_eq!(rank, pairs);
        }

        /// Complement symmetry for tie-free scores.
        #[test]
        fn negated_scores_complement_auc(
            perm in proptest::collection::vec(0.0f64..1.0, 6..40),
            labels in proptest::collection::vec(0u8..2, 6..40),
        ) {
            let n = perm.len().min(labels.len());
            // build strictly distinct scores from the sort order
            let mut scores: Vec<f64> = (0..n).map(|i| i as f64).collect();
            let mut order: Vec<usize> = (0..n).collect();
            order.sort_by(|&a, &b| perm[a].partial_cmp(&perm[b]).unwrap());
            for (rank, &i) in order.iter().enumerate() {
                scores[i] = rank as f64;
            }
            let labels = &labels[..n];
            let pos = labels.iter().filter(|&&l| l == 1).count();
            prop_assume!(pos > 0 && pos < n);
            let a = roc_auc(&labeled(&scores, labels)).unwrap();
            let negated: Vec<f64> = scores.iter().map(|&s| -s).collect();
            let b = roc_auc(&labeled(&negated, labels)).unwrap();
            prop_assert!((a + b - 1.0).abs() < 1e-12);
        }

        /// Invariance under strictly increasing transforms.
        #[test]
        fn auc_invariant_under_monotone_transform(
            scores in proptest::collection::vec(-50.0f64..50.0, 4..40),
            labels in proptest::collection::vec(0u8..2, 4..40),
        ) {
            let n = scores.len().min(labels.len());
            let scores = &scores[..n];
            let labels = &labels[..n];
            let pos = labels.iter().filter(|&&l| l == 1).count();
            prop_assume!(pos > 0 && pos < n);
            let base = roc_auc(&labeled(scores, labels)).unwrap();
            let affine: Vec<f64> = scores.iter().map(|&s| 3.5 * s + 11.0).collect();
            let atan: Vec<f64> = scores.iter().map(|&s| s.atan()).collect();
            prop_assert_eq!(base, roc_auc(&labeled(&affine, labels)).unwrap());
            prop_assert_eq!(base, roc_auc(&labeled(&atan, labels)).unwrap());
        }
    }
}
