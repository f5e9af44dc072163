//! Command-line front door: `score`, `eval`, `filter` and `bench`.
//!
//! Option precedence is CLI flag > config file > documented default
//! (trees=500, min_leaf_frac=0.04, cat_threshold=0.05, seed=0). The config
//! file is flat `key = value` text whose keys mirror the flags; column kind
//! overrides use `col.<name> = categorical|numerical`. Machine-readable
//! results go to files or stdout, diagnostics and the resolved config to
//! stderr. Exit codes: 0 success, 1 usage/config error, 2 data error.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::dataset::{
    encode_excluding, Column, Dataset, KindOverride, MissingPolicy, RawTable, SchemaConfig,
};
use crate::error::{Error, Result};
use crate::eval::{filter_top_percent, repeated_auc};
use crate::forest::{ForestConfig, MtryRule};
use crate::scoring::{score_dataset, score_dataset_detailed, AnomalyReport, ScoreModel};

#[derive(Debug, Parser)]
#[command(
    name = "oob",
    version,
    about = "Out-of-bag anomaly detection for tabular data"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Score every row of a CSV file and write an anomaly report.
    Score(ScoreArgs),
    /// Evaluate ROC AUC against a binary label column over repeated runs.
    Eval(EvalArgs),
    /// Remove the top-scoring rows and write the cleaned CSV.
    Filter(FilterArgs),
    /// Time the scoring pipeline on synthetic datasets of growing size.
    Bench(BenchArgs),
}

/// Flags shared by every subcommand.
#[derive(Debug, Args, Default)]
pub struct SharedArgs {
    /// Input CSV file (first row is the header)
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Output file (defaults to stdout)
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Flat key=value config file; flags take precedence over it
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Master seed for all randomized work
    #[arg(long)]
    pub seed: Option<u64>,
    /// Trees per ensemble
    #[arg(long)]
    pub trees: Option<usize>,
    /// Minimum leaf size as a fraction of the row count
    #[arg(long = "min-leaf-frac")]
    pub min_leaf_frac: Option<f64>,
    /// Distinct-ratio threshold below which integer columns are categorical
    #[arg(long = "cat-threshold")]
    pub cat_threshold: Option<f64>,
    /// Candidate features per split: sqrt, all, or fixed(M)
    #[arg(long)]
    pub mtry: Option<MtryRule>,
    /// What to do with rows that have empty cells: reject or drop-rows
    #[arg(long)]
    pub missing: Option<String>,
    /// Worker threads (0 = all cores)
    #[arg(long)]
    pub threads: Option<usize>,
    /// Report format: csv or text
    #[arg(long)]
    pub format: Option<String>,
}

#[derive(Debug, Args)]
pub struct ScoreArgs {
    #[command(flatten)]
    pub shared: SharedArgs,
    /// Write rows in descending score order instead of input order
    #[arg(long)]
    pub sorted: bool,
    /// Save the fitted per-feature forests to this file
    #[arg(long = "save-model")]
    pub save_model: Option<PathBuf>,
    /// Load forests from this file instead of fitting
    #[arg(long = "load-model")]
    pub load_model: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub shared: SharedArgs,
    /// Name of the binary label column (1 = anomaly); excluded from scoring
    #[arg(long = "label-col")]
    pub label_col: Option<String>,
    /// Number of seeded scoring runs to average
    #[arg(long)]
    pub repeats: Option<usize>,
}

#[derive(Debug, Args)]
pub struct FilterArgs {
    #[command(flatten)]
    pub shared: SharedArgs,
    /// Fraction of rows to remove, in [0, 1)
    #[arg(long)]
    pub pct: Option<f64>,
    /// Where to write the removed-rows manifest CSV
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[command(flatten)]
    pub shared: SharedArgs,
    /// Comma-separated synthetic dataset sizes
    #[arg(long)]
    pub sizes: Option<String>,
    /// Feature count of the synthetic datasets
    #[arg(long)]
    pub features: Option<usize>,
    /// Timing repetitions per size (the median is reported)
    #[arg(long)]
    pub reps: Option<usize>,
}

/// A parsed `key = value` config file.
#[derive(Debug, Default)]
pub struct ConfigFile {
    values: BTreeMap<String, String>,
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<ConfigFile> {
        let mut values = BTreeMap::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("config line {}: expected key = value", lineno + 1))
            })?;
            values.insert(key.trim().to_string(), value.trim().to_string());
        }
        Ok(ConfigFile { values })
    }

    pub fn load(path: &Path) -> Result<ConfigFile> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text)
    }

    fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(|s| s.as_str())
    }

    fn get_parsed<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>> {
        match self.get(key) {
            None => Ok(None),
            Some(raw) => raw.parse::<T>().map(Some).map_err(|_| {
                Error::Config(format!("config key `{key}`: cannot parse `{raw}`"))
            }),
        }
    }

    /// Column kind overrides: `col.<name> = categorical|numerical`.
    fn overrides(&self) -> Result<BTreeMap<String, KindOverride>> {
        let mut out = BTreeMap::new();
        for (key, value) in &self.values {
            if let Some(name) = key.strip_prefix("col.") {
                let kind = match value.as_str() {
                    "categorical" => KindOverride::Categorical,
                    "numerical" => KindOverride::Numerical,
                    other => {
                        return Err(Error::Config(format!(
                            "override for column `{name}`: unknown kind `{other}`"
                        )))
                    }
                };
                out.insert(name.to_string(), kind);
            }
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Csv,
    Text,
}

impl std::str::FromStr for OutputFormat {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "csv" => Ok(OutputFormat::Csv),
            "text" | "structured-text" => Ok(OutputFormat::Text),
            other => Err(format!("unknown format `{other}` (expected csv or text)")),
        }
    }
}

fn parse_missing(s: &str) -> Result<MissingPolicy> {
    match s {
        "reject" => Ok(MissingPolicy::Reject),
        "drop-rows" | "drop_rows" => Ok(MissingPolicy::DropRows),
        other => Err(Error::Config(format!(
            "unknown missing-value policy `{other}` (expected reject or drop-rows)"
        ))),
    }
}

/// Fully resolved options for one run.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub input: Option<PathBuf>,
    pub output: Option<PathBuf>,
    pub forest: ForestConfig,
    pub schema: SchemaConfig,
    pub threads: usize,
    pub format: OutputFormat,
}

impl RunConfig {
    /// Merge shared flags, config file, and defaults (flag wins, then file).
    pub fn resolve(shared: &SharedArgs) -> Result<(RunConfig, ConfigFile)> {
        let file = match &shared.config {
            Some(path) => ConfigFile::load(path)?,
            None => ConfigFile::default(),
        };

        let forest = ForestConfig {
            n_trees: shared
                .trees
                .or(file.get_parsed("trees")?)
                .unwrap_or(500),
            min_leaf_fraction: shared
                .min_leaf_frac
                .or(file.get_parsed("min_leaf_frac")?)
                .unwrap_or(0.04),
            mtry: shared
                .mtry
                .or(file
                    .get("mtry")
                    .map(|raw| {
                        raw.parse::<MtryRule>()
                            .map_err(Error::Config)
                    })
                    .transpose()?)
                .unwrap_or(MtryRule::Sqrt),
            seed: shared.seed.or(file.get_parsed("seed")?).unwrap_or(0),
        };
        forest.validate()?;

        let schema = SchemaConfig {
            categorical_ratio_threshold: shared
                .cat_threshold
                .or(file.get_parsed("cat_threshold")?)
                .unwrap_or(0.05),
            overrides: file.overrides()?,
            missing_policy: match shared.missing.as_deref().or(file.get("missing")) {
                Some(raw) => parse_missing(raw)?,
                None => MissingPolicy::Reject,
            },
        };
        schema.validate()?;

        let format = match shared.format.as_deref().or(file.get("format")) {
            Some(raw) => raw.parse::<OutputFormat>().map_err(Error::Config)?,
            None => OutputFormat::Csv,
        };

        let input = shared
            .input
            .clone()
            .or_else(|| file.get("input").map(PathBuf::from));
        let output = shared
            .output
            .clone()
            .or_else(|| file.get("output").map(PathBuf::from));
        let threads = shared.threads.or(file.get_parsed("threads")?).unwrap_or(0);

        Ok((
            RunConfig {
                input,
                output,
                forest,
                schema,
                threads,
                format,
            },
            file,
        ))
    }

    fn input(&self) -> Result<&Path> {
        self.input
            .as_deref()
            .ok_or_else(|| Error::Config("no input file given (use --input)".into()))
    }

    fn echo(&self, extra: &[(&str, String)]) {
        eprintln!("# resolved config");
        if let Some(input) = &self.input {
            eprintln!("input = {}", input.display());
        }
        if let Some(output) = &self.output {
            eprintln!("output = {}", output.display());
        }
        eprintln!("trees = {}", self.forest.n_trees);
        eprintln!("min_leaf_frac = {}", self.forest.min_leaf_fraction);
        eprintln!("mtry = {}", self.forest.mtry);
        eprintln!("seed = {}", self.forest.seed);
        eprintln!(
            "cat_threshold = {}",
            self.schema.categorical_ratio_threshold
        );
        eprintln!(
            "missing = {}",
            match self.schema.missing_policy {
                MissingPolicy::Reject => "reject",
                MissingPolicy::DropRows => "drop-rows",
            }
        );
        for (name, kind) in &self.schema.overrides {
            eprintln!(
                "col.{name} = {}",
                match kind {
                    KindOverride::Categorical => "categorical",
                    KindOverride::Numerical => "numerical",
                }
            );
        }
        eprintln!(
            "threads = {}",
            if self.threads == 0 {
                "all".to_string()
            } else {
                self.threads.to_string()
            }
        );
        eprintln!(
            "format = {}",
            match self.format {
                OutputFormat::Csv => "csv",
                OutputFormat::Text => "text",
            }
        );
        for (key, value) in extra {
            eprintln!("{key} = {value}");
        }
    }

    /// Write to the output file, or stdout when none is configured. The
    /// content is rendered fully before anything is written, so a failing
    /// run leaves no partial file behind.
    fn emit(&self, content: &str) -> Result<()> {
        match &self.output {
            Some(path) => std::fs::write(path, content)?,
            None => print!("{content}"),
        }
        Ok(())
    }
}

/// Run a closure inside a rayon pool of the configured width.
fn with_threads<T: Send>(threads: usize, f: impl FnOnce() -> Result<T> + Send) -> Result<T> {
    if threads == 0 {
        return f();
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Config(format!("cannot build thread pool: {e}")))?;
    pool.install(f)
}

fn warning_summary(report: &AnomalyReport) -> String {
    let mut out = String::new();
    for f in &report.features {
        if !f.warnings.is_empty() {
            let _ = write!(out, " {}={}", f.feature_name, f.warnings.len());
        }
    }
    if out.is_empty() {
        out.push_str(" none");
    }
    out
}

pub fn cmd_score(args: &ScoreArgs) -> Result<()> {
    let (config, _) = RunConfig::resolve(&args.shared)?;
    config.echo(&[("sorted", args.sorted.to_string())]);
    let input = config.input()?;
    let table = RawTable::read_path(input)?;
    let encoded = encode_excluding(&table, &config.schema, &[])?;
    let dataset = encoded.dataset;

    let report = with_threads(config.threads, || match &args.load_model {
        Some(path) => {
            let model = ScoreModel::load(path)?;
            let report = model.score(&dataset)?;
            if let Some(save) = &args.save_model {
                model.save(save)?;
            }
            Ok(report)
        }
        None => {
            if let Some(save) = &args.save_model {
                let (report, forests) = score_dataset_detailed(&dataset, &config.forest)?;
                ScoreModel::new(&dataset, &config.forest, forests).save(save)?;
                Ok(report)
            } else {
                score_dataset(&dataset, &config.forest)
            }
        }
    })?;

    eprintln!(
        "scored {} rows x {} features; warnings:{}",
        report.n_rows(),
        report.n_features(),
        warning_summary(&report)
    );

    let order: Vec<usize> = if args.sorted {
        report.ranked_rows()
    } else {
        (0..report.n_rows()).collect()
    };
    let content = match config.format {
        OutputFormat::Csv => report.to_csv(&order),
        OutputFormat::Text => report.to_json(),
    };
    config.emit(&content)
}

/// Parse a label cell: exactly 0 or 1 (numeric forms accepted).
fn parse_label(cell: &str, row: usize, column: &str) -> Result<bool> {
    if let Ok(v) = cell.trim().parse::<f64>() {
        if v == 0.0 {
            return Ok(false);
        }
        if v == 1.0 {
            return Ok(true);
        }
    }
    Err(Error::NonBinaryLabel {
        row,
        column: column.to_string(),
        value: cell.to_string(),
    })
}

pub fn cmd_eval(args: &EvalArgs) -> Result<()> {
    let (config, file) = RunConfig::resolve(&args.shared)?;
    let label_col = args
        .label_col
        .clone()
        .or_else(|| file.get("label_col").map(str::to_string))
        .ok_or_else(|| Error::Config("no label column given (use --label-col)".into()))?;
    let repeats = args
        .repeats
        .or(file.get_parsed("repeats")?)
        .unwrap_or(10);
    config.echo(&[
        ("label_col", label_col.clone()),
        ("repeats", repeats.to_string()),
    ]);

    let input = config.input()?;
    let table = RawTable::read_path(input)?;
    let label_idx = table.column_index(&label_col)?;
    let encoded = encode_excluding(&table, &config.schema, &[label_idx])?;
    let mut labels = Vec::with_capacity(encoded.kept_rows.len());
    for &i in &encoded.kept_rows {
        labels.push(parse_label(&table.rows[i][label_idx], i + 1, &label_col)?);
    }

    let (mean, runs) = with_threads(config.threads, || {
        repeated_auc(&encoded.dataset, &labels, &config.forest, repeats)
    })?;

    let mut csv = String::from("run,seed,auc\n");
    for (r, auc) in runs.iter().enumerate() {
        let _ = writeln!(csv, "{r},{},{auc}", config.forest.seed.wrapping_add(r as u64));
    }
    let formatted: Vec<String> = runs.iter().map(|a| format!("{a:.4}")).collect();
    eprintln!(
        "mean AUC over {} runs: {mean} (per run: {})",
        runs.len(),
        formatted.join(", ")
    );
    config.emit(&csv)
}

pub fn cmd_filter(args: &FilterArgs) -> Result<()> {
    let (config, file) = RunConfig::resolve(&args.shared)?;
    let pct = args
        .pct
        .or(file.get_parsed("pct")?)
        .ok_or_else(|| Error::Config("no removal fraction given (use --pct)".into()))?;
    if !(0.0..1.0).contains(&pct) {
        return Err(Error::Config(format!("pct must be in [0, 1), got {pct}")));
    }
    let manifest_path: Option<PathBuf> = args
        .manifest
        .clone()
        .or_else(|| file.get("manifest").map(PathBuf::from))
        .or_else(|| {
            config
                .output
                .as_ref()
                .map(|out| PathBuf::from(format!("{}.removed.csv", out.display())))
        });
    config.echo(&[(
        "pct",
        pct.to_string(),
    )]);

    let input = config.input()?;
    let table = RawTable::read_path(input)?;
    let encoded = encode_excluding(&table, &config.schema, &[])?;

    let report = with_threads(config.threads, || {
        score_dataset(&encoded.dataset, &config.forest)
    })?;
    let (_, removed) = filter_top_percent(&encoded.dataset, &report, pct)?;

    // kept rows are written back from the raw cells, so the original text
    // survives untouched (quoting aside)
    let removed_set: std::collections::HashSet<usize> = removed.iter().copied().collect();
    let mut out = csv_line(&table.header);
    for (dataset_row, &source_row) in encoded.kept_rows.iter().enumerate() {
        if !removed_set.contains(&dataset_row) {
            out.push_str(&csv_line(&table.rows[source_row]));
        }
    }

    let mut manifest = String::from("row_index,score\n");
    for &i in &removed {
        let _ = writeln!(manifest, "{},{}", encoded.kept_rows[i], report.total[i]);
    }

    eprintln!(
        "kept {} rows, removed {}",
        encoded.kept_rows.len() - removed.len(),
        removed.len()
    );
    config.emit(&out)?;
    match manifest_path {
        Some(path) => std::fs::write(path, manifest)?,
        None => eprintln!("no manifest path; removed rows not listed (use --manifest)"),
    }
    Ok(())
}

/// Quote a raw CSV record the way the csv writer would.
fn csv_line(cells: &[String]) -> String {
    let mut line = String::new();
    for (i, cell) in cells.iter().enumerate() {
        if i > 0 {
            line.push(',');
        }
        if cell.contains(',') || cell.contains('"') || cell.contains('\n') {
            line.push('"');
            line.push_str(&cell.replace('"', "\"\""));
            line.push('"');
        } else {
            line.push_str(cell);
        }
    }
    line.push('\n');
    line
}

/// Synthetic mixed-type dataset for the scaling benchmark: a latent draw
/// feeds every column, so features are mutually informative.
pub fn synthetic_dataset(n: usize, k: usize, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let latent: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let mut columns = Vec::with_capacity(k);
    for j in 0..k {
        let name = format!("f{j}");
        if j % 3 == 2 {
            // categorical: latent quartile with a sprinkle of noise
            let codes: Vec<u32> = latent
                .iter()
                .map(|&z| {
                    let noisy = z + rng.random_range(-0.15..0.15);
                    if noisy < -0.5 {
                        0
                    } else if noisy < 0.0 {
                        1
                    } else if noisy < 0.5 {
                        2
                    } else {
                        3
                    }
                })
                .collect();
            let dictionary = vec!["q1".into(), "q2".into(), "q3".into(), "q4".into()];
            columns.push(Column::categorical(name, codes, dictionary).unwrap());
        } else {
            let scale = 1.0 + j as f64;
            let values: Vec<f64> = latent
                .iter()
                .map(|&z| scale * z + rng.random_range(-0.2..0.2))
                .collect();
            columns.push(Column::numerical(name, values).unwrap());
        }
    }
    Dataset::new(columns).unwrap()
}

pub fn cmd_bench(args: &BenchArgs) -> Result<()> {
    let (config, file) = RunConfig::resolve(&args.shared)?;
    let sizes: Vec<usize> = match args.sizes.as_deref().or(file.get("sizes")) {
        Some(raw) => raw
            .split(',')
            .map(|s| {
                s.trim()
                    .parse::<usize>()
                    .map_err(|_| Error::Config(format!("bad size `{s}`")))
            })
            .collect::<Result<Vec<_>>>()?,
        None => vec![1000, 2000, 4000, 8000],
    };
    if sizes.is_empty() {
        return Err(Error::Config("need at least one size".into()));
    }
    let k = args
        .features
        .or(file.get_parsed("bench_features")?)
        .unwrap_or(5);
    if k < 2 {
        return Err(Error::Config("bench needs at least 2 features".into()));
    }
    let reps = args.reps.or(file.get_parsed("bench_reps")?).unwrap_or(3);
    if reps == 0 {
        return Err(Error::Config("reps must be at least 1".into()));
    }
    config.echo(&[
        ("sizes", format!("{sizes:?}")),
        ("bench_features", k.to_string()),
        ("bench_reps", reps.to_string()),
    ]);

    let mut medians: Vec<f64> = Vec::with_capacity(sizes.len());
    let mut csv = String::from("n,seconds\n");
    with_threads(config.threads, || {
        for &n in &sizes {
            let dataset = synthetic_dataset(n, k, config.forest.seed);
            let mut times: Vec<f64> = Vec::with_capacity(reps);
            for _ in 0..reps {
                let start = std::time::Instant::now();
                let report = score_dataset(&dataset, &config.forest)?;
                let elapsed = start.elapsed().as_secs_f64();
                assert_eq!(report.n_rows(), n);
                times.push(elapsed);
            }
            times.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let median = times[times.len() / 2];
            eprintln!("n={n}: median {median:.3}s over {reps} reps");
            medians.push(median);
            let _ = writeln!(csv, "{n},{median}");
        }
        Ok(())
    })?;

    for (w, pair) in medians.windows(2).enumerate() {
        let factor = pair[1] / pair[0];
        eprintln!(
            "doubling {} -> {}: factor {factor:.2}",
            sizes[w],
            sizes[w + 1]
        );
    }
    if sizes.len() >= 2 {
        // least-squares slope of ln(time) against ln(n log n)
        let xs: Vec<f64> = sizes
            .iter()
            .map(|&n| (n as f64 * (n as f64).ln()).ln())
            .collect();
        let ys: Vec<f64> = medians.iter().map(|&t| t.ln()).collect();
        let mean_x = xs.iter().sum::<f64>() / xs.len() as f64;
        let mean_y = ys.iter().sum::<f64>() / ys.len() as f64;
        let cov: f64 = xs
            .iter()
            .zip(&ys)
            .map(|(x, y)| (x - mean_x) * (y - mean_y))
            .sum();
        let var: f64 = xs.iter().map(|x| (x - mean_x) * (x - mean_x)).sum();
        eprintln!("fitted exponent of time vs n*log(n): {:.2}", cov / var);
    }
    config.emit(&csv)
}

pub fn run(command: &Command) -> Result<()> {
    match command {
        Command::Score(args) => cmd_score(args),
        Command::Eval(args) => cmd_eval(args),
        Command::Filter(args) => cmd_filter(args),
        Command::Bench(args) => cmd_bench(args),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_file_parses_keys_and_overrides() {
        let text = "# comment\ntrees = 250\nseed=9\ncol.color = categorical\n\ncat_threshold = 0.1\n";
        let file = ConfigFile::parse(text).unwrap();
        assert_eq!(file.get("trees"), Some("250"));
        assert_eq!(file.get("seed"), Some("9"));
        assert_eq!(file.get("cat_threshold"), Some("0.1"));
        let overrides = file.overrides().unwrap();
        assert_eq!(overrides.get("color"), Some(&KindOverride::Categorical));
    }

    #[test]
    fn config_file_rejects_bad_lines() {
        assert!(ConfigFile::parse("not a pair\n").is_err());
        let file = ConfigFile::parse("col.x = wat\n").unwrap();
        assert!(file.overrides().is_err());
    }

    #[test]
    fn defaults_apply_without_flags_or_file() {
        let shared = SharedArgs::default();
        let (config, _) = RunConfig::resolve(&shared).unwrap();
        assert_eq!(config.forest.n_trees, 500);
        assert_eq!(config.forest.min_leaf_fraction, 0.04);
        assert_eq!(config.forest.mtry, MtryRule::Sqrt);
        assert_eq!(config.forest.seed, 0);
        assert_eq!(config.schema.categorical_ratio_threshold, 0.05);
        assert_eq!(config.format, OutputFormat::Csv);
        assert_eq!(config.threads, 0);
    }

    #[test]
    fn flag_beats_file_beats_default() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.conf");
        std::fs::write(&path, "trees = 100\nseed = 5\nmin_leaf_frac = 0.2\n").unwrap();
        let shared = SharedArgs {
            config: Some(path),
            trees: Some(50),
            ..SharedArgs::default()
        };
        let (config, _) = RunConfig::resolve(&shared).unwrap();
        assert_eq!(config.forest.n_trees, 50); // flag
        assert_eq!(config.forest.seed, 5); // file
        assert_eq!(config.forest.min_leaf_fraction, 0.2); // file
        assert_eq!(config.schema.categorical_ratio_threshold, 0.05); // default
    }

    #[test]
    fn bad_config_values_are_usage_errors() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.conf");
        std::fs::write(&path, "trees = many\n").unwrap();
        let shared = SharedArgs {
            config: Some(path),
            ..SharedArgs::default()
        };
        let err = RunConfig::resolve(&shared).unwrap_err();
        assert_eq!(err.exit_code(), 1);
    }

    #[test]
    fn label_parsing_accepts_numeric_binary_forms() {
        assert!(!parse_label("0", 1, "y").unwrap());
        assert!(parse_label("1", 1, "y").unwrap());
        assert!(parse_label("1.0", 1, "y").unwrap());
        let err = parse_label("2", 3, "y").unwrap_err();
        match err {
            Error::NonBinaryLabel { row, value, .. } => {
                assert_eq!(row, 3);
                assert_eq!(value, "2");
            }
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn csv_line_quotes_only_when_needed() {
        let line = csv_line(&["plain".into(), "with,comma".into(), "with\"quote".into()]);
        assert_eq!(line, "plain,\"with,comma\",\"with\"\"quote\"\n");
    }

    #[test]
    fn synthetic_dataset_has_requested_shape() {
        let ds = synthetic_dataset(200, 5, 1);
        assert_eq!(ds.n_rows(), 200);
        assert_eq!(ds.n_columns(), 5);
        // same seed, same data
        let again = synthetic_dataset(200, 5, 1);
        assert_eq!(
            ds.column(0).unwrap().numbers().unwrap(),
            again.column(0).unwrap().numbers().unwrap()
        );
    }
}
