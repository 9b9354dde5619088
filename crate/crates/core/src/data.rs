//! Column-typed datasets, CSV ingestion, response centering and presorting.
//!
//! A [`Dataset`] is immutable once built. Numeric predictors are sorted once
//! at construction; every tree node afterwards works with stable filtered
//! views of these orderings instead of re-sorting.

use std::collections::{HashMap, HashSet};
use std::fs::File;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{PilotError, Result};
use crate::numfmt::format_f64;

/// Row identifier inside a dataset.
pub type RowId = u32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColumnKind {
    Numeric,
    Categorical,
}

/// Name, kind and (for categorical columns) the level-name table.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnMeta {
    pub name: String,
    pub kind: ColumnKind,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub levels: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ColumnData {
    Numeric(Vec<f64>),
    /// Dense level ids `0..levels.len()`.
    Categorical { codes: Vec<u32>, levels: Vec<String> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Column {
    pub name: String,
    pub data: ColumnData,
}

impl Column {
    pub fn numeric(name: impl Into<String>, values: Vec<f64>) -> Self {
        Column {
            name: name.into(),
            data: ColumnData::Numeric(values),
        }
    }

    pub fn categorical(name: impl Into<String>, codes: Vec<u32>, levels: Vec<String>) -> Self {
        Column {
            name: name.into(),
            data: ColumnData::Categorical { codes, levels },
        }
    }

    pub fn len(&self) -> usize {
        match &self.data {
            ColumnData::Numeric(v) => v.len(),
            ColumnData::Categorical { codes, .. } => codes.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn kind(&self) -> ColumnKind {
        match self.data {
            ColumnData::Numeric(_) => ColumnKind::Numeric,
            ColumnData::Categorical { .. } => ColumnKind::Categorical,
        }
    }

    pub fn meta(&self) -> ColumnMeta {
        ColumnMeta {
            name: self.name.clone(),
            kind: self.kind(),
            levels: match &self.data {
                ColumnData::Numeric(_) => Vec::new(),
                ColumnData::Categorical { levels, .. } => levels.clone(),
            },
        }
    }

    pub fn as_numeric(&self) -> Option<&[f64]> {
        match &self.data {
            ColumnData::Numeric(v) => Some(v),
            ColumnData::Categorical { .. } => None,
        }
    }

    fn select(&self, rows: &[RowId]) -> Column {
        let data = match &self.data {
            ColumnData::Numeric(v) => ColumnData::Numeric(rows.iter().map(|&r| v[r as usize]).collect()),
            ColumnData::Categorical { codes, levels } => ColumnData::Categorical {
                codes: rows.iter().map(|&r| codes[r as usize]).collect(),
                levels: levels.clone(),
            },
        };
        Column {
            name: self.name.clone(),
            data,
        }
    }
}

/// Predictor columns without a response; the input to batch prediction.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTable {
    columns: Vec<Column>,
    n_rows: usize,
}

impl FeatureTable {
    pub fn new(columns: Vec<Column>) -> Result<Self> {
        let n_rows = columns.first().map_or(0, Column::len);
        if let Some(bad) = columns.iter().find(|c| c.len() != n_rows) {
            return Err(PilotError::InvalidArgument(format!(
                "column '{}' has {} rows, expected {}",
                bad.name,
                bad.len(),
                n_rows
            )));
        }
        let mut seen = HashSet::new();
        for c in &columns {
            if !seen.insert(c.name.as_str()) {
                return Err(PilotError::InvalidArgument(format!("duplicate column '{}'", c.name)));
            }
            match &c.data {
                ColumnData::Numeric(v) => {
                    if let Some(i) = v.iter().position(|x| !x.is_finite()) {
                        return Err(PilotError::MissingValue {
                            row: i + 1,
                            column: c.name.clone(),
                        });
                    }
                }
                ColumnData::Categorical { codes, levels } => {
                    if let Some(&bad) = codes.iter().find(|&&id| id as usize >= levels.len()) {
                        return Err(PilotError::ColumnKind {
                            column: c.name.clone(),
                            reason: format!("level id {bad} out of range ({} levels)", levels.len()),
                        });
                    }
                }
            }
        }
        Ok(FeatureTable { columns, n_rows })
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.columns.len()
    }

    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    pub fn column(&self, j: usize) -> &Column {
        &self.columns[j]
    }

    pub fn column_by_name(&self, name: &str) -> Option<&Column> {
        self.columns.iter().find(|c| c.name == name)
    }

    pub fn meta(&self) -> Vec<ColumnMeta> {
        self.columns.iter().map(Column::meta).collect()
    }

    pub fn select_rows(&self, rows: &[RowId]) -> FeatureTable {
        FeatureTable {
            columns: self.columns.iter().map(|c| c.select(rows)).collect(),
            n_rows: rows.len(),
        }
    }
}

/// Per-numeric-column ascending orderings of the rows.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SortedIndex {
    /// Column index -> slot in `orders`, `None` for categorical columns.
    slots: Vec<Option<usize>>,
    orders: Vec<Vec<RowId>>,
}

impl SortedIndex {
    pub fn slot(&self, column: usize) -> Option<usize> {
        self.slots[column]
    }

    pub fn order(&self, slot: usize) -> &[RowId] {
        &self.orders[slot]
    }

    pub fn orders(&self) -> &[Vec<RowId>] {
        &self.orders
    }

    pub fn n_numeric(&self) -> usize {
        self.orders.len()
    }
}

/// Sorts each numeric predictor once. Ties keep ascending row order.
pub fn presort(table: &FeatureTable) -> SortedIndex {
    let mut slots = Vec::with_capacity(table.n_cols());
    let numeric: Vec<&[f64]> = table.columns.iter().filter_map(Column::as_numeric).collect();
    let mut next = 0;
    for c in &table.columns {
        if c.as_numeric().is_some() {
            slots.push(Some(next));
            next += 1;
        } else {
            slots.push(None);
        }
    }
    let sort_one = |values: &[f64]| {
        let mut order: Vec<RowId> = (0..values.len() as RowId).collect();
        // `sort_by` is stable, so equal values stay in row order.
        order.sort_by(|&a, &b| {
            values[a as usize]
                .partial_cmp(&values[b as usize])
                .expect("finite predictor values")
        });
        order
    };
    let orders = if table.n_rows() * numeric.len() > 200_000 {
        use rayon::prelude::*;
        numeric.par_iter().map(|v| sort_one(v)).collect()
    } else {
        numeric.iter().map(|v| sort_one(v)).collect()
    };
    SortedIndex { slots, orders }
}

/// Midrange-centered response: `max(values) = -min(values) = bound`.
#[derive(Debug, Clone, PartialEq)]
pub struct CenteredResponse {
    pub values: Vec<f64>,
    pub offset: f64,
    pub bound: f64,
}

pub fn center_response(raw: &[f64]) -> CenteredResponse {
    let (lo, hi) = raw
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    if raw.is_empty() {
        return CenteredResponse {
            values: Vec::new(),
            offset: 0.0,
            bound: 0.0,
        };
    }
    let offset = (lo + hi) / 2.0;
    CenteredResponse {
        values: raw.iter().map(|v| v - offset).collect(),
        offset,
        bound: (hi - lo) / 2.0,
    }
}

/// Feature table plus numeric response and the presorted index.
#[derive(Debug, Clone)]
pub struct Dataset {
    features: FeatureTable,
    target: String,
    response: Vec<f64>,
    sorted: SortedIndex,
}

impl Dataset {
    pub fn new(features: FeatureTable, target: impl Into<String>, response: Vec<f64>) -> Result<Self> {
        let target = target.into();
        if response.is_empty() {
            return Err(PilotError::EmptyData);
        }
        if response.len() != features.n_rows() && features.n_cols() > 0 {
            return Err(PilotError::InvalidArgument(format!(
                "response has {} rows, features have {}",
                response.len(),
                features.n_rows()
            )));
        }
        if let Some(i) = response.iter().position(|v| !v.is_finite()) {
            return Err(PilotError::MissingValue { row: i + 1, column: target });
        }
        if response.len() > RowId::MAX as usize {
            return Err(PilotError::InvalidArgument("too many rows".into()));
        }
        let features = if features.n_cols() == 0 {
            FeatureTable {
                columns: Vec::new(),
                n_rows: response.len(),
            }
        } else {
            features
        };
        let sorted = presort(&features);
        Ok(Dataset {
            features,
            target,
            response,
            sorted,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.response.len()
    }

    pub fn n_cols(&self) -> usize {
        self.features.n_cols()
    }

    pub fn features(&self) -> &FeatureTable {
        &self.features
    }

    pub fn column(&self, j: usize) -> &Column {
        self.features.column(j)
    }

    pub fn target(&self) -> &str {
        &self.target
    }

    pub fn response(&self) -> &[f64] {
        &self.response
    }

    pub fn sorted_index(&self) -> &SortedIndex {
        &self.sorted
    }

    pub fn column_meta(&self) -> Vec<ColumnMeta> {
        self.features.meta()
    }

    /// New dataset holding `rows` (in the given order), presorted afresh.
    pub fn subset(&self, rows: &[RowId]) -> Result<Dataset> {
        Dataset::new(
            self.features.select_rows(rows),
            self.target.clone(),
            rows.iter().map(|&r| self.response[r as usize]).collect(),
        )
    }

    /// Same features with a replaced response.
    pub fn with_response(&self, response: Vec<f64>) -> Result<Dataset> {
        if response.len() != self.n_rows() {
            return Err(PilotError::InvalidArgument("response length mismatch".into()));
        }
        if let Some(i) = response.iter().position(|v| !v.is_finite()) {
            return Err(PilotError::MissingValue {
                row: i + 1,
                column: self.target.clone(),
            });
        }
        Ok(Dataset {
            features: self.features.clone(),
            target: self.target.clone(),
            response,
            sorted: self.sorted.clone(),
        })
    }

    /// Writes header plus rows; floats with 17 significant digits.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| PilotError::io(path, e))?;
        let mut w = csv::Writer::from_writer(std::io::BufWriter::new(file));
        let mut header: Vec<&str> = self.features.columns.iter().map(|c| c.name.as_str()).collect();
        header.push(&self.target);
        w.write_record(&header)?;
        let mut record = Vec::with_capacity(header.len());
        for i in 0..self.n_rows() {
            record.clear();
            for c in &self.features.columns {
                record.push(match &c.data {
                    ColumnData::Numeric(v) => format_f64(v[i]),
                    ColumnData::Categorical { codes, levels } => levels[codes[i] as usize].clone(),
                });
            }
            record.push(format_f64(self.response[i]));
            w.write_record(&record)?;
        }
        w.flush().map_err(|e| PilotError::io(path, e))?;
        Ok(())
    }
}

fn is_missing(token: &str) -> bool {
    token.is_empty() || matches!(token.to_ascii_lowercase().as_str(), "na" | "nan" | "null")
}

fn parse_number(token: &str) -> Option<f64> {
    token.parse::<f64>().ok().filter(|v| v.is_finite())
}

struct RawCsv {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

fn read_raw(path: &Path) -> Result<RawCsv> {
    let file = File::open(path).map_err(|e| PilotError::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(std::io::BufReader::new(file));
    let header: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    let mut rows = Vec::new();
    for rec in reader.records() {
        let rec = rec?;
        rows.push(rec.iter().map(str::to_string).collect::<Vec<_>>());
    }
    Ok(RawCsv { header, rows })
}

impl RawCsv {
    fn check_missing(&self) -> Result<()> {
        for (i, row) in self.rows.iter().enumerate() {
            if let Some(j) = row.iter().position(|t| is_missing(t)) {
                return Err(PilotError::MissingValue {
                    row: i + 1,
                    column: self.header[j].clone(),
                });
            }
        }
        Ok(())
    }

    fn numeric_column(&self, j: usize) -> std::result::Result<Vec<f64>, (usize, String)> {
        self.rows
            .iter()
            .enumerate()
            .map(|(i, row)| parse_number(&row[j]).ok_or_else(|| (i + 1, row[j].clone())))
            .collect()
    }

    fn categorical_column(&self, j: usize) -> (Vec<u32>, Vec<String>) {
        let mut ids: HashMap<&str, u32> = HashMap::new();
        let mut levels = Vec::new();
        let codes = self
            .rows
            .iter()
            .map(|row| {
                let tok = row[j].as_str();
                *ids.entry(tok).or_insert_with(|| {
                    levels.push(tok.to_string());
                    (levels.len() - 1) as u32
                })
            })
            .collect();
        (codes, levels)
    }
}

/// Reads a headed CSV into a [`Dataset`].
///
/// Columns listed in `categorical` are categorical; any other column is
/// numeric unless one of its tokens fails to parse as a finite float.
/// Categorical levels are numbered in order of first appearance.
pub fn ingest_csv(path: impl AsRef<Path>, target: &str, categorical: &HashSet<String>) -> Result<Dataset> {
    let raw = read_raw(path.as_ref())?;
    if raw.rows.is_empty() {
        return Err(PilotError::EmptyData);
    }
    let target_col = raw
        .header
        .iter()
        .position(|h| h == target)
        .ok_or_else(|| PilotError::TargetNotFound(target.to_string()))?;
    if let Some(unknown) = categorical.iter().find(|c| !raw.header.contains(c)) {
        return Err(PilotError::InvalidArgument(format!(
            "categorical column '{unknown}' not found in header"
        )));
    }
    raw.check_missing()?;
    if categorical.contains(target) {
        return Err(PilotError::TargetNotNumeric {
            column: target.to_string(),
            row: 1,
            token: raw.rows[0][target_col].clone(),
        });
    }
    let response = raw.numeric_column(target_col).map_err(|(row, token)| PilotError::TargetNotNumeric {
        column: target.to_string(),
        row,
        token,
    })?;

    let mut columns = Vec::with_capacity(raw.header.len() - 1);
    for (j, name) in raw.header.iter().enumerate() {
        if j == target_col {
            continue;
        }
        let numeric = if categorical.contains(name) {
            None
        } else {
            raw.numeric_column(j).ok()
        };
        columns.push(match numeric {
            Some(values) => Column::numeric(name.clone(), values),
            None => {
                let (codes, levels) = raw.categorical_column(j);
                Column::categorical(name.clone(), codes, levels)
            }
        });
    }
    Dataset::new(FeatureTable::new(columns)?, target, response)
}

/// Reads a CSV of predictors laid out according to a trained model's
/// schema, in schema column order. Categorical columns keep their own
/// level table; prediction matches levels to training by name. Columns
/// named in `ignore` are skipped.
pub fn read_aligned_csv(path: impl AsRef<Path>, schema: &[ColumnMeta], ignore: &[&str]) -> Result<FeatureTable> {
    let raw = read_raw(path.as_ref())?;
    let missing: Vec<String> = schema
        .iter()
        .filter(|m| !raw.header.contains(&m.name))
        .map(|m| m.name.clone())
        .collect();
    let extra: Vec<String> = raw
        .header
        .iter()
        .filter(|h| !ignore.contains(&h.as_str()) && !schema.iter().any(|m| &m.name == *h))
        .cloned()
        .collect();
    if !missing.is_empty() || !extra.is_empty() {
        return Err(PilotError::ColumnMismatch { missing, extra });
    }
    let mut columns = Vec::with_capacity(schema.len());
    for meta in schema {
        let j = raw.header.iter().position(|h| h == &meta.name).expect("checked above");
        if let Some(i) = raw.rows.iter().position(|row| is_missing(&row[j])) {
            return Err(PilotError::MissingValue {
                row: i + 1,
                column: meta.name.clone(),
            });
        }
        columns.push(match meta.kind {
            ColumnKind::Numeric => {
                let values = raw.numeric_column(j).map_err(|(row, token)| PilotError::NotNumeric {
                    column: meta.name.clone(),
                    row,
                    token,
                })?;
                Column::numeric(meta.name.clone(), values)
            }
            ColumnKind::Categorical => {
                let (codes, levels) = raw.categorical_column(j);
                Column::categorical(meta.name.clone(), codes, levels)
            }
        });
    }
    let n_rows = raw.rows.len();
    Ok(FeatureTable { columns, n_rows })
}
