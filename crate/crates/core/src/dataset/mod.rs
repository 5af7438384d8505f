//! Tabular product data with explicit per-cell missingness.
//!
//! A [`Dataset`] is column-major. Each column carries a parallel missing mask;
//! masked cells hold a canonical placeholder (`0.0` or `""`) so two datasets
//! with the same observed values and mask compare equal.

mod csv_io;
#[cfg(feature = "parquet")]
mod parquet_io;
mod synth;

use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

pub use csv_io::{sidecar_path, write_csv};
pub use synth::{generate_synthetic, SyntheticConfig};

/// Names of the three prediction targets, in routing order.
pub const TARGETS: [&str; 3] = ["top_category", "bottom_category", "color"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ColumnKind {
    Numeric,
    CategoricalString,
    Text,
    Target,
}

impl ColumnKind {
    pub fn is_string(self) -> bool {
        !matches!(self, ColumnKind::Numeric)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ColumnKind::Numeric => "numeric",
            ColumnKind::CategoricalString => "categorical_string",
            ColumnKind::Text => "text",
            ColumnKind::Target => "target",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Schema {
    columns: Vec<(String, ColumnKind)>,
}

impl Schema {
    /// Column names must be unique. Only the designated target names may use
    /// [`ColumnKind::Target`], and those names are always targets.
    pub fn new(columns: Vec<(String, ColumnKind)>) -> Result<Self> {
        for (i, (name, kind)) in columns.iter().enumerate() {
            if columns[..i].iter().any(|(n, _)| n == name) {
                return Err(Error::Schema(format!("duplicate column `{name}`")));
            }
            let is_target_name = TARGETS.contains(&name.as_str());
            if is_target_name != (*kind == ColumnKind::Target) {
                return Err(Error::Schema(format!(
                    "column `{name}` declared {}, but only {} are targets",
                    kind.as_str(),
                    TARGETS.join("/")
                )));
            }
        }
        Ok(Schema { columns })
    }

    pub fn len(&self) -> usize {
        self.columns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.columns.is_empty()
    }

    pub fn columns(&self) -> &[(String, ColumnKind)] {
        &self.columns
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|(n, _)| n == name)
    }

    pub fn kind(&self, col: usize) -> ColumnKind {
        self.columns[col].1
    }

    pub fn name(&self, col: usize) -> &str {
        &self.columns[col].0
    }

    /// Non-target columns in schema order.
    pub fn feature_columns(&self) -> impl Iterator<Item = (usize, &str, ColumnKind)> {
        self.columns
            .iter()
            .enumerate()
            .filter(|(_, (_, k))| *k != ColumnKind::Target)
            .map(|(i, (n, k))| (i, n.as_str(), *k))
    }

    pub fn require_targets(&self) -> Result<()> {
        for t in TARGETS {
            if self.index_of(t).is_none() {
                return Err(Error::MissingColumn(t.to_string()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ColumnData {
    Numeric(Vec<f64>),
    Strings(Vec<String>),
}

impl ColumnData {
    pub fn len(&self) -> usize {
        match self {
            ColumnData::Numeric(v) => v.len(),
            ColumnData::Strings(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn select(&self, idx: &[usize]) -> ColumnData {
        match self {
            ColumnData::Numeric(v) => ColumnData::Numeric(idx.iter().map(|&i| v[i]).collect()),
            ColumnData::Strings(v) => {
                ColumnData::Strings(idx.iter().map(|&i| v[i].clone()).collect())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    schema: Schema,
    columns: Vec<ColumnData>,
    missing: Vec<Vec<bool>>,
    row_count: usize,
}

impl Dataset {
    pub fn new(schema: Schema, mut columns: Vec<ColumnData>, missing: Vec<Vec<bool>>) -> Result<Self> {
        if columns.len() != schema.len() || missing.len() != schema.len() {
            return Err(Error::Schema(format!(
                "schema has {} columns but {} value columns and {} mask columns were given",
                schema.len(),
                columns.len(),
                missing.len()
            )));
        }
        let row_count = columns.first().map_or(0, ColumnData::len);
        for (c, (col, mask)) in columns.iter_mut().zip(&missing).enumerate() {
            let name = schema.name(c);
            if col.len() != row_count || mask.len() != row_count {
                return Err(Error::Schema(format!(
                    "column `{name}` has {} values and {} mask entries, expected {row_count}",
                    col.len(),
                    mask.len()
                )));
            }
            match (schema.kind(c), &mut *col) {
                (ColumnKind::Numeric, ColumnData::Numeric(v)) => {
                    for (x, &m) in v.iter_mut().zip(mask) {
                        if m {
                            *x = 0.0;
                        } else if !x.is_finite() {
                            return Err(Error::Schema(format!(
                                "column `{name}` holds a non-finite observed value"
                            )));
                        }
                    }
                }
                (k, ColumnData::Strings(v)) if k.is_string() => {
                    for (s, &m) in v.iter_mut().zip(mask) {
                        if m {
                            s.clear();
                        }
                    }
                }
                (k, _) => {
                    return Err(Error::Schema(format!(
                        "column `{name}` is declared {} but holds the other value type",
                        k.as_str()
                    )))
                }
            }
        }
        Ok(Dataset {
            schema,
            columns,
            missing,
            row_count,
        })
    }

    pub fn empty(schema: Schema) -> Self {
        let columns = schema
            .columns()
            .iter()
            .map(|(_, k)| match k {
                ColumnKind::Numeric => ColumnData::Numeric(Vec::new()),
                _ => ColumnData::Strings(Vec::new()),
            })
            .collect();
        let missing = vec![Vec::new(); schema.len()];
        Dataset {
            schema,
            columns,
            missing,
            row_count: 0,
        }
    }

    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    pub fn row_count(&self) -> usize {
        self.row_count
    }

    pub fn column(&self, col: usize) -> &ColumnData {
        &self.columns[col]
    }

    pub fn column_mask(&self, col: usize) -> &[bool] {
        &self.missing[col]
    }

    pub fn column_by_name(&self, name: &str) -> Result<(&ColumnData, &[bool])> {
        let c = self
            .schema
            .index_of(name)
            .ok_or_else(|| Error::MissingColumn(name.to_string()))?;
        Ok((&self.columns[c], &self.missing[c]))
    }

    pub fn is_missing(&self, row: usize, col: usize) -> bool {
        self.missing[col][row]
    }

    pub fn numeric(&self, row: usize, col: usize) -> Option<f64> {
        match &self.columns[col] {
            ColumnData::Numeric(v) if !self.missing[col][row] => Some(v[row]),
            _ => None,
        }
    }

    pub fn string(&self, row: usize, col: usize) -> Option<&str> {
        match &self.columns[col] {
            ColumnData::Strings(v) if !self.missing[col][row] => Some(&v[row]),
            _ => None,
        }
    }

    /// Observed labels of a target column; `None` where the cell is masked.
    pub fn labels(&self, name: &str) -> Result<Vec<Option<&str>>> {
        let c = self
            .schema
            .index_of(name)
            .ok_or_else(|| Error::MissingColumn(name.to_string()))?;
        Ok((0..self.row_count).map(|r| self.string(r, c)).collect())
    }

    pub fn select_rows(&self, idx: &[usize]) -> Dataset {
        Dataset {
            schema: self.schema.clone(),
            columns: self.columns.iter().map(|c| c.select(idx)).collect(),
            missing: self
                .missing
                .iter()
                .map(|m| idx.iter().map(|&i| m[i]).collect())
                .collect(),
            row_count: idx.len(),
        }
    }

    /// Rendered cell text, empty for missing cells. Used by writers and tests.
    pub fn cell_text(&self, row: usize, col: usize) -> String {
        if self.missing[col][row] {
            return String::new();
        }
        match &self.columns[col] {
            ColumnData::Numeric(v) => v[row].to_string(),
            ColumnData::Strings(v) => v[row].clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TableFormat {
    Csv,
    Parquet,
}

impl FromStr for TableFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(TableFormat::Csv),
            "parquet" => Ok(TableFormat::Parquet),
            _ => Err(Error::UnknownFormat(s.to_string())),
        }
    }
}

impl TableFormat {
    /// Guess from a file extension, defaulting to CSV.
    pub fn from_path(path: &Path) -> TableFormat {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("parquet") => TableFormat::Parquet,
            _ => TableFormat::Csv,
        }
    }
}

/// Reads a table. Column kinds come from the sidecar schema next to `path`
/// when one exists, otherwise they are inferred from the values.
pub fn load_table(path: &Path, format: TableFormat) -> Result<Dataset> {
    let overrides = csv_io::read_sidecar(&sidecar_path(path))?;
    match format {
        TableFormat::Csv => csv_io::read_csv(path, &overrides),
        #[cfg(feature = "parquet")]
        TableFormat::Parquet => parquet_io::read_parquet(path, &overrides),
        #[cfg(not(feature = "parquet"))]
        TableFormat::Parquet => Err(Error::ParquetDisabled),
    }
}

/// Writes `dataset` as CSV plus its sidecar schema.
pub fn write_table(dataset: &Dataset, path: &Path, format: TableFormat) -> Result<()> {
    match format {
        TableFormat::Csv => write_csv(dataset, path),
        TableFormat::Parquet => Err(Error::UnknownFormat(
            "parquet (write supports csv only)".to_string(),
        )),
    }
}

/// Disjoint random partition; the first part gets `round(fraction * n)` rows.
/// Each part keeps the original row order.
pub fn split_rows(dataset: &Dataset, fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::param(format!(
            "split fraction must lie strictly between 0 and 1, got {fraction}"
        )));
    }
    let n = dataset.row_count();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut rng::stream(seed, 0));
    let cut = (fraction * n as f64).round() as usize;
    let (a, b) = idx.split_at_mut(cut);
    a.sort_unstable();
    b.sort_unstable();
    Ok((dataset.select_rows(a), dataset.select_rows(b)))
}

pub(crate) fn infer_kind(name: &str, cells: &[Option<&str>]) -> ColumnKind {
    if TARGETS.contains(&name) {
        return ColumnKind::Target;
    }
    let mut any = false;
    for c in cells.iter().flatten() {
        any = true;
        match c.trim().parse::<f64>() {
            Ok(v) if v.is_finite() => {}
            _ => return ColumnKind::CategoricalString,
        }
    }
    if any {
        ColumnKind::Numeric
    } else {
        ColumnKind::CategoricalString
    }
}

/// Builds a dataset from raw text cells (`None` = missing) and resolved kinds.
pub(crate) fn from_text_cells(
    names: Vec<String>,
    cells: Vec<Vec<Option<String>>>,
    overrides: &std::collections::BTreeMap<String, ColumnKind>,
) -> Result<Dataset> {
    let mut schema_cols = Vec::with_capacity(names.len());
    let mut columns = Vec::with_capacity(names.len());
    let mut missing = Vec::with_capacity(names.len());
    for (name, col) in names.into_iter().zip(cells) {
        let kind = match overrides.get(&name) {
            Some(&k) => k,
            None => {
                let view: Vec<Option<&str>> = col.iter().map(|c| c.as_deref()).collect();
                infer_kind(&name, &view)
            }
        };
        let mask: Vec<bool> = col.iter().map(Option::is_none).collect();
        let data = if kind == ColumnKind::Numeric {
            let mut v = Vec::with_capacity(col.len());
            for (r, c) in col.iter().enumerate() {
                v.push(match c {
                    None => 0.0,
                    Some(s) => s.trim().parse::<f64>().map_err(|_| {
                        Error::Schema(format!(
                            "column `{name}` is numeric but row {r} holds `{s}`"
                        ))
                    })?,
                });
            }
            ColumnData::Numeric(v)
        } else {
            ColumnData::Strings(col.into_iter().map(Option::unwrap_or_default).collect())
        };
        schema_cols.push((name, kind));
        columns.push(data);
        missing.push(mask);
    }
    Dataset::new(Schema::new(schema_cols)?, columns, missing)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> Dataset {
        let schema = Schema::new(vec![
            ("price".into(), ColumnKind::Numeric),
            ("title".into(), ColumnKind::Text),
            ("color".into(), ColumnKind::Target),
        ])
        .unwrap();
        Dataset::new(
            schema,
            vec![
                ColumnData::Numeric((0..10).map(f64::from).collect()),
                ColumnData::Strings((0..10).map(|i| format!("item {i}")).collect()),
                ColumnData::Strings((0..10).map(|i| format!("c{}", i % 3)).collect()),
            ],
            vec![vec![false; 10]; 3],
        )
        .unwrap()
    }

    #[test]
    fn schema_rejects_duplicates_and_misnamed_targets() {
        assert!(Schema::new(vec![
            ("a".into(), ColumnKind::Numeric),
            ("a".into(), ColumnKind::Text)
        ])
        .is_err());
        assert!(Schema::new(vec![("a".into(), ColumnKind::Target)]).is_err());
        assert!(Schema::new(vec![("color".into(), ColumnKind::Text)]).is_err());
    }

    #[test]
    fn masked_cells_are_canonicalised() {
        let schema = Schema::new(vec![("x".into(), ColumnKind::Numeric)]).unwrap();
        let d = Dataset::new(
            schema,
            vec![ColumnData::Numeric(vec![1.0, f64::NAN])],
            vec![vec![false, true]],
        )
        .unwrap();
        assert_eq!(d.numeric(1, 0), None);
        assert_eq!(d.column(0), &ColumnData::Numeric(vec![1.0, 0.0]));
    }

    #[test]
    fn split_sizes_and_determinism() {
        let d = tiny();
        let (a, b) = split_rows(&d, 0.5, 3).unwrap();
        assert_eq!((a.row_count(), b.row_count()), (5, 5));
        let (a2, b2) = split_rows(&d, 0.5, 3).unwrap();
        assert_eq!(a, a2);
        assert_eq!(b, b2);
    }

    #[test]
    fn split_is_a_partition() {
        let d = tiny();
        let (a, b) = split_rows(&d, 0.3, 11).unwrap();
        let mut seen: Vec<String> = (0..a.row_count())
            .map(|r| a.cell_text(r, 1))
            .chain((0..b.row_count()).map(|r| b.cell_text(r, 1)))
            .collect();
        seen.sort();
        let mut orig: Vec<String> = (0..d.row_count()).map(|r| d.cell_text(r, 1)).collect();
        orig.sort();
        assert_eq!(seen, orig);
    }

    #[test]
    fn split_rejects_bad_fraction() {
        for f in [0.0, 1.0, -0.5, 1.5, f64::NAN] {
            assert!(split_rows(&tiny(), f, 0).is_err());
        }
    }

    #[test]
    fn format_tags() {
        assert_eq!("CSV".parse::<TableFormat>().unwrap(), TableFormat::Csv);
        assert!(matches!(
            "tfrecord".parse::<TableFormat>(),
            Err(Error::UnknownFormat(_))
        ));
    }

    #[test]
    fn inference_rules() {
        assert_eq!(
            infer_kind("w", &[Some("1.5"), None, Some("-2")]),
            ColumnKind::Numeric
        );
        assert_eq!(
            infer_kind("w", &[Some("1.5"), Some("red")]),
            ColumnKind::CategoricalString
        );
        assert_eq!(infer_kind("w", &[Some("NaN")]), ColumnKind::CategoricalString);
        assert_eq!(infer_kind("color", &[Some("1")]), ColumnKind::Target);
    }
}
