//! CSV ingestion and export.
//!
//! Input is comma-delimited UTF-8 with a mandatory header row. An empty (or
//! all-whitespace) cell is a missing value.

use std::io::{Read, Write};
use std::path::Path;

use super::frame::{CategoricalColumn, Column, Dataset};
use super::schema::Schema;
use crate::error::{Error, Result};

/// Reads a CSV file whose header names exactly the schema's columns (any order).
pub fn ingest_csv(path: &Path, schema: &Schema) -> Result<Dataset> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    ingest_reader(file, schema)
}

pub fn ingest_reader<R: Read>(reader: R, schema: &Schema) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(|h| h.trim().to_string()).collect();

    let unknown: Vec<&str> = header
        .iter()
        .filter(|h| schema.index_of(h).is_none())
        .map(String::as_str)
        .collect();
    let absent: Vec<&str> = schema
        .columns()
        .iter()
        .filter(|c| !header.contains(&c.name))
        .map(|c| c.name.as_str())
        .collect();
    if !unknown.is_empty() || !absent.is_empty() {
        return Err(Error::SchemaMismatch(format!(
            "columns not in schema: {unknown:?}; schema columns missing from header: {absent:?}"
        )));
    }
    if header.len() != schema.len() {
        return Err(Error::SchemaMismatch("duplicate header names".into()));
    }

    // position in record for each schema column
    let positions: Vec<usize> = schema
        .columns()
        .iter()
        .map(|c| header.iter().position(|h| *h == c.name).expect("checked above"))
        .collect();

    let mut columns: Vec<Column> = schema
        .columns()
        .iter()
        .map(|c| {
            if c.kind.is_numeric() {
                Column::Numeric(Vec::new())
            } else {
                Column::Categorical(CategoricalColumn::new())
            }
        })
        .collect();

    for (row, record) in rdr.records().enumerate() {
        let record = record?;
        for ((spec, column), &pos) in schema.columns().iter().zip(columns.iter_mut()).zip(&positions) {
            let raw = record.get(pos).unwrap_or("").trim();
            match column {
                Column::Numeric(values) => {
                    if raw.is_empty() {
                        values.push(None);
                    } else {
                        let parsed = raw
                            .parse::<f64>()
                            .ok()
                            .filter(|x| x.is_finite())
                            .ok_or_else(|| Error::Parse {
                                row: row + 1,
                                column: spec.name.clone(),
                                value: raw.to_string(),
                            })?;
                        values.push(Some(parsed));
                    }
                }
                Column::Categorical(cat) => cat.push((!raw.is_empty()).then_some(raw)),
            }
        }
    }
    Dataset::new(schema.clone(), columns)
}

/// Writes the dataset with a header row in schema order.
pub fn write_csv<W: Write>(dataset: &Dataset, writer: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(dataset.schema().columns().iter().map(|c| c.name.as_str()))?;
    for row in 0..dataset.n_rows() {
        wtr.write_record(dataset.columns().iter().map(|c| c.render(row)))?;
    }
    wtr.flush().map_err(|e| Error::io("<csv writer>", e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::schema::{ColumnKind, ColumnRole, ColumnSpec};

    fn schema() -> Schema {
        Schema::new(vec![
            ColumnSpec::new("product_id", ColumnKind::Identifier, ColumnRole::Key),
            ColumnSpec::new("week", ColumnKind::Week, ColumnRole::Key),
            ColumnSpec::new("price", ColumnKind::Numeric, ColumnRole::Feature),
            ColumnSpec::new("demand", ColumnKind::Numeric, ColumnRole::Target),
        ])
        .unwrap()
    }

    #[test]
    fn parses_three_rows() {
        let text = "product_id,week,price,demand\nA,1,10.5,3\nB,1,20,0\nA,2,11,4\n";
        let d = ingest_reader(text.as_bytes(), &schema()).unwrap();
        assert_eq!(d.n_rows(), 3);
        assert_eq!(d.targets().unwrap(), vec![3.0, 0.0, 4.0]);
        assert_eq!(d.column("product_id").unwrap().render(2), "A");
    }

    #[test]
    fn empty_cell_is_missing() {
        let text = "product_id,week,price,demand\nA,1,,3\n";
        let d = ingest_reader(text.as_bytes(), &schema()).unwrap();
        assert!(d.column("price").unwrap().is_missing(0));
    }

    #[test]
    fn misspelled_header_is_rejected() {
        let text = "product_id,week,pricee,demand\nA,1,1,3\n";
        let err = ingest_reader(text.as_bytes(), &schema()).unwrap_err();
        assert!(matches!(err, Error::SchemaMismatch(msg) if msg.contains("pricee") && msg.contains("price")));
    }

    #[test]
    fn non_numeric_cell_names_row_and_column() {
        let text = "product_id,week,price,demand\nA,1,1,3\nA,2, cheap ,3\n";
        match ingest_reader(text.as_bytes(), &schema()).unwrap_err() {
            Error::Parse { row, column, value } => {
                assert_eq!(row, 2);
                assert_eq!(column, "price");
                assert_eq!(value, "cheap");
            }
            e => panic!("unexpected {e:?}"),
        }
    }

    #[test]
    fn header_order_may_differ_and_write_uses_schema_order() {
        let text = "demand,price,week,product_id\n3,1.5,1,A\n";
        let d = ingest_reader(text.as_bytes(), &schema()).unwrap();
        let mut out = Vec::new();
        write_csv(&d, &mut out).unwrap();
        assert_eq!(
            String::from_utf8(out).unwrap(),
            "product_id,week,price,demand\nA,1,1.5,3\n"
        );
    }

    #[test]
    fn missing_file_is_io_error() {
        let err = ingest_csv(Path::new("/definitely/not/here.csv"), &schema()).unwrap_err();
        assert!(matches!(err, Error::Io { .. }));
    }
}
