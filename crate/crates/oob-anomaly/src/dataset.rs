//! CSV ingestion and the column-major typed table.
//!
//! Columns are either categorical (integer codes plus a dictionary of the
//! raw strings, built in first-appearance order) or numerical (finite f64).
//! Kinds are inferred per column: non-numeric columns are always
//! categorical; numeric columns become categorical when they are
//! integer-valued and their distinct count stays under a fraction of the
//! row count (default 5%).

use std::collections::BTreeMap;
use std::collections::HashMap;
use std::fmt;
use std::io::Read;
use std::path::Path;

use crate::error::{Error, Result};

/// Kind of a column after ingestion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum ColumnKind {
    /// Dictionary-encoded column with `cardinality >= 2` distinct values.
    Categorical { cardinality: usize },
    Numerical,
}

impl fmt::Display for ColumnKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ColumnKind::Categorical { cardinality } => write!(f, "categorical({cardinality})"),
            ColumnKind::Numerical => write!(f, "numerical"),
        }
    }
}

/// Forced kind for a named column, from user configuration.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KindOverride {
    Categorical,
    Numerical,
}

/// What to do with rows that have empty cells.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MissingPolicy {
    /// Fail ingestion, naming the first offending row and column.
    #[default]
    Reject,
    /// Silently drop every row that has at least one empty cell.
    DropRows,
}

/// Ingestion configuration.
#[derive(Debug, Clone)]
pub struct SchemaConfig {
    /// A numeric integer-valued column is categorical when
    /// `distinct_count < threshold * n_rows`. In (0, 1].
    pub categorical_ratio_threshold: f64,
    /// Per-column kind overrides, by column name.
    pub overrides: BTreeMap<String, KindOverride>,
    pub missing_policy: MissingPolicy,
}

impl Default for SchemaConfig {
    fn default() -> Self {
        SchemaConfig {
            categorical_ratio_threshold: 0.05,
            overrides: BTreeMap::new(),
            missing_policy: MissingPolicy::Reject,
        }
    }
}

impl SchemaConfig {
    pub fn validate(&self) -> Result<()> {
        let t = self.categorical_ratio_threshold;
        if !(t > 0.0 && t <= 1.0) {
            return Err(Error::Config(format!(
                "categorical ratio threshold must be in (0, 1], got {t}"
            )));
        }
        Ok(())
    }
}

/// Storage of one column.
#[derive(Debug, Clone)]
enum ColumnValues {
    Categorical {
        codes: Vec<u32>,
        dictionary: Vec<String>,
    },
    Numerical(Vec<f64>),
}

/// A named, typed column.
#[derive(Debug, Clone)]
pub struct Column {
    name: String,
    values: ColumnValues,
}

impl Column {
    /// Build a categorical column; validates code range and dictionary size.
    pub fn categorical(
        name: impl Into<String>,
        codes: Vec<u32>,
        dictionary: Vec<String>,
    ) -> Result<Self> {
        let name = name.into();
        if dictionary.len() < 2 {
            return Err(Error::ConstantColumn { column: name });
        }
        let cardinality = dictionary.len() as u32;
        if let Some(&bad) = codes.iter().find(|&&c| c >= cardinality) {
            return Err(Error::Config(format!(
                "column `{name}`: code {bad} out of range for cardinality {cardinality}"
            )));
        }
        Ok(Column {
            name,
            values: ColumnValues::Categorical { codes, dictionary },
        })
    }

    /// Build a numerical column; every value must be finite.
    pub fn numerical(name: impl Into<String>, values: Vec<f64>) -> Result<Self> {
        let name = name.into();
        if let Some(row) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::BadNumber {
                row: row + 1,
                column: name,
                value: values[row].to_string(),
            });
        }
        Ok(Column {
            name,
            values: ColumnValues::Numerical(values),
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn kind(&self) -> ColumnKind {
        match &self.values {
            ColumnValues::Categorical { dictionary, .. } => ColumnKind::Categorical {
                cardinality: dictionary.len(),
            },
            ColumnValues::Numerical(_) => ColumnKind::Numerical,
        }
    }

    pub fn len(&self) -> usize {
        match &self.values {
            ColumnValues::Categorical { codes, .. } => codes.len(),
            ColumnValues::Numerical(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Integer codes of a categorical column.
    pub fn codes(&self) -> Option<&[u32]> {
        match &self.values {
            ColumnValues::Categorical { codes, .. } => Some(codes),
            ColumnValues::Numerical(_) => None,
        }
    }

    /// Dictionary of a categorical column, in first-appearance order.
    pub fn dictionary(&self) -> Option<&[String]> {
        match &self.values {
            ColumnValues::Categorical { dictionary, .. } => Some(dictionary),
            ColumnValues::Numerical(_) => None,
        }
    }

    /// Values of a numerical column.
    pub fn numbers(&self) -> Option<&[f64]> {
        match &self.values {
            ColumnValues::Numerical(v) => Some(v),
            ColumnValues::Categorical { .. } => None,
        }
    }

    /// Encoded value used by the trees: the code for categorical columns,
    /// the value itself for numerical ones.
    pub fn encoded(&self, row: usize) -> f64 {
        match &self.values {
            ColumnValues::Categorical { codes, .. } => codes[row] as f64,
            ColumnValues::Numerical(v) => v[row],
        }
    }

    /// Column restricted to the given rows, in the given order.
    pub fn select_rows(&self, keep: &[usize]) -> Column {
        let values = match &self.values {
            ColumnValues::Categorical { codes, dictionary } => ColumnValues::Categorical {
                codes: keep.iter().map(|&i| codes[i]).collect(),
                dictionary: dictionary.clone(),
            },
            ColumnValues::Numerical(v) => {
                ColumnValues::Numerical(keep.iter().map(|&i| v[i]).collect())
            }
        };
        Column {
            name: self.name.clone(),
            values,
        }
    }
}

/// Column-major table of N rows by K typed columns.
#[derive(Debug, Clone)]
pub struct Dataset {
    columns: Vec<Column>,
    n_rows: usize,
}

impl Dataset {
    /// Validates equal column lengths and K >= 2.
    pub fn new(columns: Vec<Column>) -> Result<Self> {
        if columns.len() < 2 {
            return Err(Error::TooFewColumns(columns.len()));
        }
        let n_rows = columns[0].len();
        for c in &columns[1..] {
            if c.len() != n_rows {
                return Err(Error::UnequalColumns {
                    first: columns[0].name().to_string(),
                    second: c.name().to_string(),
                    first_len: n_rows,
                    second_len: c.len(),
                });
            }
        }
        Ok(Dataset { columns, n_rows })
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_columns(&self) -> usize {
        self.columns.len()
    }

    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    pub fn column(&self, k: usize) -> Result<&Column> {
        self.columns.get(k).ok_or(Error::ColumnIndex {
            index: k,
            width: self.columns.len(),
        })
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name() == name)
    }

    /// Target column `k` plus the remaining columns in original order.
    pub fn split_features(&self, k: usize) -> Result<(&Column, Vec<&Column>)> {
        let target = self.column(k)?;
        let predictors = self
            .columns
            .iter()
            .enumerate()
            .filter(|&(i, _)| i != k)
            .map(|(_, c)| c)
            .collect();
        Ok((target, predictors))
    }

    /// Dataset restricted to the given rows, preserving their order.
    pub fn select_rows(&self, keep: &[usize]) -> Dataset {
        Dataset {
            columns: self.columns.iter().map(|c| c.select_rows(keep)).collect(),
            n_rows: keep.len(),
        }
    }
}

/// Raw CSV contents: header plus rectangular string rows.
#[derive(Debug, Clone)]
pub struct RawTable {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl RawTable {
    pub fn read_path(path: impl AsRef<Path>) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Self::from_reader(file)
    }

    /// Reads comma-separated, optionally double-quoted, UTF-8 records.
    /// The first record is the header; every data row must match its width.
    pub fn from_reader<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .flexible(true)
            .from_reader(reader);
        let header: Vec<String> = rdr
            .headers()?
            .iter()
            .map(|s| s.to_string())
            .collect();
        let mut rows = Vec::new();
        for (i, record) in rdr.records().enumerate() {
            let record = record?;
            if record.len() != header.len() {
                return Err(Error::RaggedRow {
                    row: i + 1,
                    expected: header.len(),
                    found: record.len(),
                });
            }
            rows.push(record.iter().map(|s| s.to_string()).collect());
        }
        Ok(RawTable { header, rows })
    }

    pub fn column_index(&self, name: &str) -> Result<usize> {
        self.header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::UnknownColumn {
                column: name.to_string(),
            })
    }
}

/// Result of encoding a raw table: the dataset plus, for provenance, the
/// original 0-based data-row index of every kept row.
#[derive(Debug)]
pub struct EncodedTable {
    pub dataset: Dataset,
    pub kept_rows: Vec<usize>,
}

/// Classification of a column's raw cells, used by kind inference.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CellClass {
    /// At least one cell does not parse as a finite number.
    NonNumeric,
    /// All cells are finite numbers with zero fractional part.
    IntegerValued,
    /// All cells are finite numbers, not all integer-valued.
    RealValued,
}

/// Kind inference for one column.
///
/// Non-numeric columns are always categorical. Numeric columns are
/// categorical only when integer-valued with
/// `distinct_count < threshold * n_rows` (strict); otherwise numerical.
pub fn infer_column_kind(
    distinct_count: usize,
    n_rows: usize,
    threshold: f64,
    cells: CellClass,
) -> Result<ColumnKind> {
    if distinct_count <= 1 {
        return Err(Error::ConstantColumn {
            column: String::new(),
        });
    }
    let kind = match cells {
        CellClass::NonNumeric => ColumnKind::Categorical {
            cardinality: distinct_count,
        },
        CellClass::IntegerValued if (distinct_count as f64) < threshold * n_rows as f64 => {
            ColumnKind::Categorical {
                cardinality: distinct_count,
            }
        }
        _ => ColumnKind::Numerical,
    };
    Ok(kind)
}

fn parse_number(cell: &str) -> Option<f64> {
    match cell.trim().parse::<f64>() {
        Ok(v) if v.is_finite() => Some(v),
        _ => None,
    }
}

fn encode_categorical(name: &str, cells: &[&str]) -> Result<Column> {
    let mut dictionary: Vec<String> = Vec::new();
    let mut index: HashMap<String, u32> = HashMap::new();
    let mut codes = Vec::with_capacity(cells.len());
    for &cell in cells {
        let code = match index.get(cell) {
            Some(&c) => c,
            None => {
                let c = dictionary.len() as u32;
                dictionary.push(cell.to_string());
                index.insert(cell.to_string(), c);
                c
            }
        };
        codes.push(code);
    }
    Column::categorical(name, codes, dictionary)
}

fn encode_numerical(name: &str, cells: &[&str]) -> Result<Column> {
    let mut values = Vec::with_capacity(cells.len());
    for (i, &cell) in cells.iter().enumerate() {
        match parse_number(cell) {
            Some(v) => values.push(v),
            None => {
                return Err(Error::BadNumber {
                    row: i + 1,
                    column: name.to_string(),
                    value: cell.to_string(),
                })
            }
        }
    }
    Column::numerical(name, values)
}

/// Encode all columns of a raw table except the listed ones.
pub fn encode_excluding(
    table: &RawTable,
    schema: &SchemaConfig,
    exclude: &[usize],
) -> Result<EncodedTable> {
    schema.validate()?;
    let width = table.header.len();

    // Resolve missing cells first so every column sees the same rows.
    let mut kept_rows: Vec<usize> = Vec::with_capacity(table.rows.len());
    for (i, row) in table.rows.iter().enumerate() {
        match row.iter().position(|c| c.is_empty()) {
            Some(col) => match schema.missing_policy {
                MissingPolicy::Reject => {
                    return Err(Error::MissingValue {
                        row: i + 1,
                        column: table.header[col].clone(),
                    })
                }
                MissingPolicy::DropRows => {}
            },
            None => kept_rows.push(i),
        }
    }
    let n_rows = kept_rows.len();

    let mut columns = Vec::new();
    for j in 0..width {
        if exclude.contains(&j) {
            continue;
        }
        let name = &table.header[j];
        let cells: Vec<&str> = kept_rows
            .iter()
            .map(|&i| table.rows[i][j].as_str())
            .collect();

        let kind = match schema.overrides.get(name) {
            Some(KindOverride::Categorical) => ColumnKind::Categorical { cardinality: 0 },
            Some(KindOverride::Numerical) => ColumnKind::Numerical,
            None => {
                let mut distinct: Vec<&str> = cells.clone();
                distinct.sort_unstable();
                distinct.dedup();
                let class = classify_cells(&cells);
                infer_column_kind(
                    distinct.len(),
                    n_rows,
                    schema.categorical_ratio_threshold,
                    class,
                )
                .map_err(|e| match e {
                    Error::ConstantColumn { .. } => Error::ConstantColumn {
                        column: name.clone(),
                    },
                    other => other,
                })?
            }
        };

        // Constant columns are rejected even under an override: they carry
        // no signal and break the cardinality invariant.
        {
            let mut distinct: Vec<&str> = cells.clone();
            distinct.sort_unstable();
            distinct.dedup();
            if distinct.len() <= 1 {
                return Err(Error::ConstantColumn {
                    column: name.clone(),
                });
            }
        }

        let column = match kind {
            ColumnKind::Categorical { .. } => encode_categorical(name, &cells)?,
            ColumnKind::Numerical => encode_numerical(name, &cells).map_err(|e| match e {
                // report the original data-row number, not the kept-row offset
                Error::BadNumber { row, column, value } => Error::BadNumber {
                    row: kept_rows[row - 1] + 1,
                    column,
                    value,
                },
                other => other,
            })?,
        };
        columns.push(column);
    }

    Ok(EncodedTable {
        dataset: Dataset::new(columns)?,
        kept_rows,
    })
}

fn classify_cells(cells: &[&str]) -> CellClass {
    let mut integral = true;
    for &cell in cells {
        match parse_number(cell) {
            Some(v) => {
                if v.fract() != 0.0 {
                    integral = false;
                }
            }
            None => return CellClass::NonNumeric,
        }
    }
    if integral {
        CellClass::IntegerValued
    } else {
        CellClass::RealValued
    }
}

/// Encode every column of a raw table.
pub fn encode(table: &RawTable, schema: &SchemaConfig) -> Result<EncodedTable> {
    encode_excluding(table, schema, &[])
}

/// Load a CSV file into a typed dataset.
pub fn load_csv(path: impl AsRef<Path>, schema: &SchemaConfig) -> Result<Dataset> {
    let table = RawTable::read_path(path)?;
    Ok(encode(&table, schema)?.dataset)
}
