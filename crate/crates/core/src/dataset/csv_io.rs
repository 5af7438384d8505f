use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{from_text_cells, ColumnKind, Dataset};
use crate::error::{Error, Result};

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Sidecar {
    columns: BTreeMap<String, ColumnKind>,
}

/// `catalog.csv` -> `catalog.schema.toml`
pub fn sidecar_path(table: &Path) -> PathBuf {
    table.with_extension("schema.toml")
}

pub(super) fn read_sidecar(path: &Path) -> Result<BTreeMap<String, ColumnKind>> {
    if !path.exists() {
        return Ok(BTreeMap::new());
    }
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let sidecar: Sidecar = toml::from_str(&text)
        .map_err(|e| Error::Schema(format!("{}: {e}", path.display())))?;
    Ok(sidecar.columns)
}

pub(super) fn read_csv(path: &Path, overrides: &BTreeMap<String, ColumnKind>) -> Result<Dataset> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(file);
    let names: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    if names.is_empty() {
        return Err(Error::Schema(format!("{}: missing header row", path.display())));
    }
    let mut cells: Vec<Vec<Option<String>>> = vec![Vec::new(); names.len()];
    for (row, record) in reader.records().enumerate() {
        let record = record?;
        if record.len() != names.len() {
            return Err(Error::RaggedRow {
                row,
                found: record.len(),
                expected: names.len(),
            });
        }
        for (col, field) in record.iter().enumerate() {
            cells[col].push((!field.is_empty()).then(|| field.to_string()));
        }
    }
    from_text_cells(names, cells, overrides)
}

pub fn write_csv(dataset: &Dataset, path: &Path) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut writer = csv::Writer::from_writer(file);
    let schema = dataset.schema();
    writer.write_record(schema.columns().iter().map(|(n, _)| n.as_str()))?;
    let mut record = Vec::with_capacity(schema.len());
    for r in 0..dataset.row_count() {
        record.clear();
        record.extend((0..schema.len()).map(|c| dataset.cell_text(r, c)));
        writer.write_record(&record)?;
    }
    writer.flush().map_err(|e| Error::io(path, e))?;

    let sidecar = Sidecar {
        columns: schema.columns().iter().cloned().collect(),
    };
    let side = sidecar_path(path);
    let text = toml::to_string(&sidecar).map_err(|e| Error::Schema(e.to_string()))?;
    fs::write(&side, text).map_err(|e| Error::io(side, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{load_table, write_table, ColumnData, Schema, TableFormat};

    #[test]
    fn complete_rows_have_no_missing_cells() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("t.csv");
        fs::write(&p, "occasion,price\nparty,1.5\nwork,2\n").unwrap();
        let d = load_table(&p, TableFormat::Csv).unwrap();
        assert_eq!(d.row_count(), 2);
        assert!((0..2).all(|c| d.column_mask(c).iter().all(|m| !m)));
        assert_eq!(d.schema().kind(0), ColumnKind::CategoricalString);
        assert_eq!(d.schema().kind(1), ColumnKind::Numeric);
    }

    #[test]
    fn empty_cell_is_missing() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("t.csv");
        fs::write(&p, "occasion,price\n,1.5\nwork,2\n").unwrap();
        let d = load_table(&p, TableFormat::Csv).unwrap();
        let occ = d.schema().index_of("occasion").unwrap();
        assert!(d.is_missing(0, occ));
        assert!(!d.is_missing(1, occ));
    }

    #[test]
    fn ragged_row_reports_index() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("t.csv");
        fs::write(&p, "a,b\n1,2\n3\n").unwrap();
        match load_table(&p, TableFormat::Csv) {
            Err(Error::RaggedRow { row, found, expected }) => {
                assert_eq!((row, found, expected), (1, 1, 2))
            }
            other => panic!("expected ragged row error, got {other:?}"),
        }
    }

    #[test]
    fn unreadable_file() {
        let err = load_table(Path::new("/nonexistent/x.csv"), TableFormat::Csv).unwrap_err();
        assert!(matches!(err, Error::Io { .. }));
    }

    #[test]
    fn empty_dataset_writes_header_only() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("e.csv");
        let schema = Schema::new(vec![
            ("title".into(), ColumnKind::Text),
            ("price".into(), ColumnKind::Numeric),
        ])
        .unwrap();
        write_table(&Dataset::empty(schema), &p, TableFormat::Csv).unwrap();
        assert_eq!(fs::read_to_string(&p).unwrap(), "title,price\n");
    }

    #[test]
    fn masked_cell_writes_empty_field() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.csv");
        let schema = Schema::new(vec![
            ("title".into(), ColumnKind::Text),
            ("price".into(), ColumnKind::Numeric),
        ])
        .unwrap();
        let d = Dataset::new(
            schema,
            vec![
                ColumnData::Strings(vec!["red, boots".into()]),
                ColumnData::Numeric(vec![3.0]),
            ],
            vec![vec![false], vec![true]],
        )
        .unwrap();
        write_table(&d, &p, TableFormat::Csv).unwrap();
        assert_eq!(fs::read_to_string(&p).unwrap(), "title,price\n\"red, boots\",\n");
        assert_eq!(load_table(&p, TableFormat::Csv).unwrap(), d);
    }

    #[test]
    fn sidecar_overrides_inference() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.csv");
        fs::write(&p, "code,title\n12,a b\n13,c d\n").unwrap();
        fs::write(
            sidecar_path(&p),
            "[columns]\ncode = \"categorical_string\"\ntitle = \"text\"\n",
        )
        .unwrap();
        let d = load_table(&p, TableFormat::Csv).unwrap();
        assert_eq!(d.schema().kind(0), ColumnKind::CategoricalString);
        assert_eq!(d.schema().kind(1), ColumnKind::Text);
        assert_eq!(d.string(0, 0), Some("12"));
    }

    #[test]
    fn bad_sidecar_kind_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.csv");
        fs::write(&p, "code\n12\n").unwrap();
        fs::write(sidecar_path(&p), "[columns]\ncode = \"blob\"\n").unwrap();
        assert!(matches!(
            load_table(&p, TableFormat::Csv),
            Err(Error::Schema(_))
        ));
    }
}
