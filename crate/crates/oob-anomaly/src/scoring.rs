//! Anomaly scores from out-of-bag predictions.
//!
//! Every feature column gets its own ensemble; each row's out-of-bag
//! predictions for that column yield an uncertainty term (entropy of the
//! predicted labels, or variance of the predicted values) and a
//! disagreement term (one minus the vote share of the observed label, or
//! the squared gap between the prediction mean and the observed value).
//! Raw per-feature scores are min-max scaled onto [0, 1] and summed across
//! features into the per-row anomaly score.

use rayon::prelude::*;
use serde::Serialize;
use std::path::Path;

use crate::dataset::{ColumnKind, Dataset};
use crate::error::{Error, Result};
use crate::forest::{
    fit_forest, oob_predictions, Forest, ForestConfig, OobPredictions,
};

/// A warning attached to one row of one feature score column.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ScoreWarning {
    pub row: usize,
    pub message: String,
}

/// Per-row scores for one feature.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FeatureScoreColumn {
    pub feature_index: usize,
    pub feature_name: String,
    pub kind: ColumnKind,
    pub uncertainty: Vec<f64>,
    pub disagreement: Vec<f64>,
    /// uncertainty + disagreement, before scaling.
    pub raw: Vec<f64>,
    /// raw after per-feature min-max scaling; in [0, 1].
    pub scaled: Vec<f64>,
    /// Number of out-of-bag models behind each row's score.
    pub oob_counts: Vec<usize>,
    pub warnings: Vec<ScoreWarning>,
}

/// Per-row anomaly scores with their per-feature breakdown.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnomalyReport {
    pub config: ForestConfig,
    pub features: Vec<FeatureScoreColumn>,
    /// S_i: sum of the scaled per-feature scores; in [0, K].
    pub total: Vec<f64>,
}

impl AnomalyReport {
    pub fn n_rows(&self) -> usize {
        self.total.len()
    }

    pub fn n_features(&self) -> usize {
        self.features.len()
    }

    pub fn feature_names(&self) -> Vec<&str> {
        self.features.iter().map(|f| f.feature_name.as_str()).collect()
    }

    /// Row indices sorted by descending score; ties break to the lower index.
    pub fn ranked_rows(&self) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.total.len()).collect();
        order.sort_by(|&a, &b| {
            self.total[b]
                .partial_cmp(&self.total[a])
                .unwrap()
                .then(a.cmp(&b))
        });
        order
    }

    /// CSV rendering: `row_id,total_score` plus one scaled column per feature.
    /// `order` gives the output row order (e.g. from [`Self::ranked_rows`]).
    pub fn to_csv(&self, order: &[usize]) -> String {
        let mut out = String::from("row_id,total_score");
        for f in &self.features {
            out.push(',');
            out.push_str(&f.feature_name);
        }
        out.push('\n');
        for &i in order {
            out.push_str(&i.to_string());
            out.push(',');
            out.push_str(&self.total[i].to_string());
            for f in &self.features {
                out.push(',');
                out.push_str(&f.scaled[i].to_string());
            }
            out.push('\n');
        }
        out
    }

    /// Structured-text rendering (JSON) carrying warnings and the config echo.
    pub fn to_json(&self) -> String {
        #[derive(Serialize)]
        struct Envelope<'a> {
            format: &'static str,
            version: u32,
            #[serde(flatten)]
            report: &'a AnomalyReport,
        }
        serde_json::to_string_pretty(&Envelope {
            format: "oob-anomaly-report",
            version: 1,
            report: self,
        })
        .expect("report serializes")
    }
}

/// Unnormalized Shannon entropy (nats) of the empirical label distribution.
pub fn shannon_entropy(preds: &[u32], cardinality: usize) -> f64 {
    let mut counts = vec![0usize; cardinality];
    for &p in preds {
        counts[p as usize] += 1;
    }
    let t = preds.len() as f64;
    let mut h = 0.0;
    for &c in &counts {
        if c > 0 {
            let q = c as f64 / t;
            h -= q * q.ln();
        }
    }
    h
}

/// Entropy of the out-of-bag votes, scaled by the maximum entropy of a
/// `cardinality`-cell distribution; in [0, 1].
pub fn categorical_uncertainty(preds: &[u32], cardinality: usize) -> Result<f64> {
    if preds.is_empty() {
        return Err(Error::NoOobPredictions);
    }
    debug_assert!(cardinality >= 2);
    Ok(shannon_entropy(preds, cardinality) / (cardinality as f64).ln())
}

/// One minus the vote share of the observed label; in [0, 1].
pub fn categorical_disagreement(preds: &[u32], observed: u32) -> Result<f64> {
    if preds.is_empty() {
        return Err(Error::NoOobPredictions);
    }
    let hits = preds.iter().filter(|&&p| p == observed).count();
    Ok(1.0 - hits as f64 / preds.len() as f64)
}

/// (uncertainty, disagreement) for a numerical feature: the population
/// variance of the out-of-bag predictions, and the squared gap between
/// their mean and the observed value. Their sum equals the mean squared
/// difference between predictions and the observed value.
pub fn numerical_score(preds: &[f64], observed: f64) -> Result<(f64, f64)> {
    if preds.is_empty() {
        return Err(Error::NoOobPredictions);
    }
    let t = preds.len() as f64;
    let mean = preds.iter().sum::<f64>() / t;
    let variance = preds.iter().map(|p| (p - mean) * (p - mean)).sum::<f64>() / t;
    let gap = mean - observed;
    Ok((variance, gap * gap))
}

/// (x - min) / (max - min) elementwise; all zeros when max equals min.
pub fn minmax_scale(raw: &[f64]) -> Vec<f64> {
    if raw.is_empty() {
        return Vec::new();
    }
    let min = raw.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = raw.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let range = max - min;
    if range == 0.0 {
        return vec![0.0; raw.len()];
    }
    raw.iter().map(|&x| (x - min) / range).collect()
}

/// Unnormalized entropy bounds as a function of p, the out-of-bag vote
/// share of the observed label. The lower bound puts the remaining mass on
/// a single other class; the upper bound spreads it evenly over the other
/// cardinality-1 classes. Equal when cardinality is 2.
pub fn entropy_bounds(p: f64, cardinality: usize) -> (f64, f64) {
    debug_assert!((0.0..=1.0).contains(&p));
    debug_assert!(cardinality >= 2);
    let q = 1.0 - p;
    let p_term = if p > 0.0 { -p * p.ln() } else { 0.0 };
    let lower = p_term + if q > 0.0 { -q * q.ln() } else { 0.0 };
    let upper = p_term
        + if q > 0.0 {
            -q * (q / (cardinality as f64 - 1.0)).ln()
        } else {
            0.0
        };
    (lower, upper)
}

fn no_oob_warning(row: usize) -> ScoreWarning {
    ScoreWarning {
        row,
        message: "no out-of-bag trees for this row; score set to 0".to_string(),
    }
}

/// Score one feature against an already fitted forest.
pub fn score_feature_with(
    forest: &Forest,
    dataset: &Dataset,
    k: usize,
) -> Result<FeatureScoreColumn> {
    let (target, predictors) = dataset.split_features(k)?;
    let preds = oob_predictions(forest, &predictors)?;
    let n = dataset.n_rows();

    let mut uncertainty = vec![0.0; n];
    let mut disagreement = vec![0.0; n];
    let mut oob_counts = vec![0usize; n];
    let mut warnings = Vec::new();

    match (&preds, target.kind()) {
        (OobPredictions::Classification(votes), ColumnKind::Categorical { cardinality }) => {
            let observed = target.codes().expect("categorical target");
            for i in 0..n {
                oob_counts[i] = votes[i].len();
                if votes[i].is_empty() {
                    warnings.push(no_oob_warning(i));
                    continue;
                }
                uncertainty[i] = categorical_uncertainty(&votes[i], cardinality)?;
                disagreement[i] = categorical_disagreement(&votes[i], observed[i])?;
            }
        }
        (OobPredictions::Regression(values), ColumnKind::Numerical) => {
            let observed = target.numbers().expect("numerical target");
            for i in 0..n {
                oob_counts[i] = values[i].len();
                if values[i].is_empty() {
                    warnings.push(no_oob_warning(i));
                    continue;
                }
                let (u, d) = numerical_score(&values[i], observed[i])?;
                uncertainty[i] = u;
                disagreement[i] = d;
            }
        }
        _ => {
            return Err(Error::Model(format!(
                "forest task does not match column `{}`",
                target.name()
            )))
        }
    }

    let raw: Vec<f64> = uncertainty
        .iter()
        .zip(&disagreement)
        .map(|(u, d)| u + d)
        .collect();
    let scaled = minmax_scale(&raw);

    Ok(FeatureScoreColumn {
        feature_index: k,
        feature_name: target.name().to_string(),
        kind: target.kind(),
        uncertainty,
        disagreement,
        raw,
        scaled,
        oob_counts,
        warnings,
    })
}

/// Fit the ensemble for feature `k` and score it. The forest seed is
/// derived from the config seed and `k`, so per-feature ensembles draw
/// independent bootstraps.
pub fn score_feature(dataset: &Dataset, k: usize, config: &ForestConfig) -> Result<FeatureScoreColumn> {
    let forest = fit_feature_forest(dataset, k, config)?;
    score_feature_with(&forest, dataset, k)
}

/// Fit the per-feature ensemble used by [`score_feature`].
pub fn fit_feature_forest(dataset: &Dataset, k: usize, config: &ForestConfig) -> Result<Forest> {
    let (target, predictors) = dataset.split_features(k)?;
    let feature_config = ForestConfig {
        seed: crate::forest::feature_seed(config.seed, k),
        ..config.clone()
    };
    fit_forest(&predictors, target, &feature_config)
}

/// Sum per-feature scaled scores into the per-row totals. Pure aggregation:
/// feature columns must already be scaled and row-aligned.
pub fn aggregate_report(config: &ForestConfig, features: Vec<FeatureScoreColumn>) -> AnomalyReport {
    let n = features.first().map_or(0, |f| f.scaled.len());
    let mut total = vec![0.0; n];
    for f in &features {
        for (t, &s) in total.iter_mut().zip(&f.scaled) {
            *t += s;
        }
    }
    AnomalyReport {
        config: config.clone(),
        features,
        total,
    }
}

/// Run the whole pipeline: one ensemble and score column per feature,
/// then per-row aggregation. Features are scored in parallel.
pub fn score_dataset(dataset: &Dataset, config: &ForestConfig) -> Result<AnomalyReport> {
    let features = (0..dataset.n_columns())
        .into_par_iter()
        .map(|k| score_feature(dataset, k, config))
        .collect::<Result<Vec<_>>>()?;
    Ok(aggregate_report(config, features))
}

/// Like [`score_dataset`], also returning the fitted per-feature forests.
pub fn score_dataset_detailed(
    dataset: &Dataset,
    config: &ForestConfig,
) -> Result<(AnomalyReport, Vec<Forest>)> {
    let fitted = (0..dataset.n_columns())
        .into_par_iter()
        .map(|k| {
            let forest = fit_feature_forest(dataset, k, config)?;
            let column = score_feature_with(&forest, dataset, k)?;
            Ok((column, forest))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut features = Vec::with_capacity(fitted.len());
    let mut forests = Vec::with_capacity(fitted.len());
    for (column, forest) in fitted {
        features.push(column);
        forests.push(forest);
    }
    Ok((aggregate_report(config, features), forests))
}

/// A saved scoring model: the per-feature forests plus enough schema to
/// validate that a dataset matches what was fitted.
#[derive(Debug, Clone, Serialize, serde::Deserialize)]
pub struct ScoreModel {
    pub format: String,
    pub version: u32,
    pub config: ForestConfig,
    pub column_names: Vec<String>,
    pub column_kinds: Vec<ColumnKind>,
    pub n_rows: usize,
    pub forests: Vec<Forest>,
}

pub const MODEL_FORMAT: &str = "oob-anomaly-model";
pub const MODEL_VERSION: u32 = 1;

impl ScoreModel {
    pub fn new(dataset: &Dataset, config: &ForestConfig, forests: Vec<Forest>) -> ScoreModel {
        ScoreModel {
            format: MODEL_FORMAT.to_string(),
            version: MODEL_VERSION,
            config: config.clone(),
            column_names: dataset.columns().iter().map(|c| c.name().to_string()).collect(),
            column_kinds: dataset.columns().iter().map(|c| c.kind()).collect(),
            n_rows: dataset.n_rows(),
            forests,
        }
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let text = serde_json::to_string(self).expect("model serializes");
        std::fs::write(path, text)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<ScoreModel> {
        let text = std::fs::read_to_string(path)?;
        let model: ScoreModel =
            serde_json::from_str(&text).map_err(|e| Error::Model(e.to_string()))?;
        if model.format != MODEL_FORMAT {
            return Err(Error::Model(format!(
                "unexpected format `{}`",
                model.format
            )));
        }
        if model.version != MODEL_VERSION {
            return Err(Error::Model(format!(
                "unsupported version {}",
                model.version
            )));
        }
        Ok(model)
    }

    /// The model is bound to the rows it was fitted on: out-of-bag lookups
    /// only make sense against the exact same dataset shape.
    pub fn validate_against(&self, dataset: &Dataset) -> Result<()> {
        if dataset.n_rows() != self.n_rows {
            return Err(Error::Model(format!(
                "model was fitted on {} rows, dataset has {}",
                self.n_rows,
                dataset.n_rows()
            )));
        }
        let names: Vec<String> = dataset.columns().iter().map(|c| c.name().to_string()).collect();
        if names != self.column_names {
            return Err(Error::Model("column names differ from the model".into()));
        }
        let kinds: Vec<ColumnKind> = dataset.columns().iter().map(|c| c.kind()).collect();
        if kinds != self.column_kinds {
            return Err(Error::Model("column kinds differ from the model".into()));
        }
        if self.forests.len() != dataset.n_columns() {
            return Err(Error::Model("forest count differs from the model".into()));
        }
        Ok(())
    }

    /// Score a dataset with the saved forests (no fitting).
    pub fn score(&self, dataset: &Dataset) -> Result<AnomalyReport> {
        self.validate_against(dataset)?;
        let features = (0..dataset.n_columns())
            .into_par_iter()
            .map(|k| score_feature_with(&self.forests[k], dataset, k))
            .collect::<Result<Vec<_>>>()?;
        Ok(aggregate_report(&self.config, features))
    }
}
