use std::collections::BTreeMap;
use std::fs::File;
use std::path::Path;

use parquet::file::reader::{FileReader, SerializedFileReader};
use parquet::record::Field;

use super::{from_text_cells, ColumnKind, Dataset};
use crate::error::{Error, Result};

/// Reads a flat Parquet file. Nulls become masked cells; numeric physical
/// types are rendered as decimal text and then typed like CSV cells.
pub(super) fn read_parquet(
    path: &Path,
    overrides: &BTreeMap<String, ColumnKind>,
) -> Result<Dataset> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let reader = SerializedFileReader::new(file)?;
    let names: Vec<String> = reader
        .metadata()
        .file_metadata()
        .schema_descr()
        .columns()
        .iter()
        .map(|c| c.name().to_string())
        .collect();
    let mut cells: Vec<Vec<Option<String>>> = vec![Vec::new(); names.len()];
    for (row_idx, row) in reader.get_row_iter(None)?.enumerate() {
        let row = row?;
        let mut n = 0;
        for (col, (_, field)) in row.get_column_iter().enumerate() {
            if col >= names.len() {
                break;
            }
            cells[col].push(field_text(field));
            n += 1;
        }
        if n != names.len() {
            return Err(Error::RaggedRow {
                row: row_idx,
                found: n,
                expected: names.len(),
            });
        }
    }
    from_text_cells(names, cells, overrides)
}

fn field_text(field: &Field) -> Option<String> {
    let s = match field {
        Field::Null => return None,
        Field::Str(s) => s.clone(),
        Field::Byte(v) => v.to_string(),
        Field::Short(v) => v.to_string(),
        Field::Int(v) => v.to_string(),
        Field::Long(v) => v.to_string(),
        Field::UByte(v) => v.to_string(),
        Field::UShort(v) => v.to_string(),
        Field::UInt(v) => v.to_string(),
        Field::ULong(v) => v.to_string(),
        Field::Float(v) => f64::from(*v).to_string(),
        Field::Double(v) => v.to_string(),
        other => other.to_string(),
    };
    (!s.is_empty()).then_some(s)
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use parquet::data_type::{ByteArray, ByteArrayType, DoubleType};
    use parquet::file::properties::WriterProperties;
    use parquet::file::writer::SerializedFileWriter;
    use parquet::schema::parser::parse_message_type;

    use crate::dataset::{load_table, ColumnKind, TableFormat};

    #[test]
    fn nulls_map_to_mask() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.parquet");
        let schema = Arc::new(
            parse_message_type(
                "message t { OPTIONAL BINARY title (UTF8); OPTIONAL DOUBLE price; }",
            )
            .unwrap(),
        );
        let file = std::fs::File::create(&path).unwrap();
        let mut writer =
            SerializedFileWriter::new(file, schema, Arc::new(WriterProperties::builder().build()))
                .unwrap();
        let mut rg = writer.next_row_group().unwrap();
        {
            let mut col = rg.next_column().unwrap().unwrap();
            col.typed::<ByteArrayType>()
                .write_batch(&[ByteArray::from("red boots")], Some(&[1, 0]), None)
                .unwrap();
            col.close().unwrap();
        }
        {
            let mut col = rg.next_column().unwrap().unwrap();
            col.typed::<DoubleType>()
                .write_batch(&[2.5], Some(&[0, 1]), None)
                .unwrap();
            col.close().unwrap();
        }
        rg.close().unwrap();
        writer.close().unwrap();

        let d = load_table(&path, TableFormat::Parquet).unwrap();
        assert_eq!(d.row_count(), 2);
        assert_eq!(d.schema().kind(1), ColumnKind::Numeric);
        assert_eq!(d.string(0, 0), Some("red boots"));
        assert!(d.is_missing(1, 0));
        assert!(d.is_missing(0, 1));
        assert_eq!(d.numeric(1, 1), Some(2.5));
    }
}
