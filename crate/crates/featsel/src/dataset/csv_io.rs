//! CSV ingestion and export.
//!
//! RFC-4180-style, UTF-8, mandatory header row, `.` decimal separator.
//! Columns are auto-typed: numeric when every cell parses as a finite real,
//! otherwise categorical with codes assigned in first-appearance order.
//! Export uses shortest round-trip formatting for numerics and the original
//! level strings for categoricals, so a written dataset reloads with
//! identical values and codes.

use std::collections::HashMap;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use super::{ColumnData, Dataset, DatasetError, FeatureColumn, TargetColumn, TaskKind};

/// Per-column override for the auto-typing rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KindHint {
    Numeric,
    Categorical,
}

pub fn load_csv(
    path: impl AsRef<Path>,
    target_name: &str,
    task: TaskKind,
    schema_hints: Option<&HashMap<String, KindHint>>,
) -> Result<Dataset, DatasetError> {
    let file = File::open(path)?;
    load_csv_reader(file, target_name, task, schema_hints)
}

pub fn load_csv_reader(
    reader: impl Read,
    target_name: &str,
    task: TaskKind,
    schema_hints: Option<&HashMap<String, KindHint>>,
) -> Result<Dataset, DatasetError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_reader(reader);

    let headers: Vec<String> = match rdr.headers() {
        Ok(h) if h.is_empty() => return Err(DatasetError::EmptyFile),
        Ok(h) => h.iter().map(|s| s.to_string()).collect(),
        Err(_) => return Err(DatasetError::EmptyFile),
    };

    let matches = headers.iter().filter(|h| h.as_str() == target_name).count();
    if matches == 0 {
        return Err(DatasetError::TargetNotFound(target_name.to_string()));
    }
    if matches > 1 {
        return Err(DatasetError::Invalid(format!(
            "target column {target_name:?} appears {matches} times in the header"
        )));
    }
    let target_idx = headers.iter().position(|h| h == target_name).unwrap();

    if let Some(hints) = schema_hints {
        for name in hints.keys() {
            if name == target_name {
                return Err(DatasetError::Invalid(format!(
                    "schema hint given for target column {name:?}"
                )));
            }
            if !headers.iter().any(|h| h == name) {
                return Err(DatasetError::Invalid(format!(
                    "schema hint for unknown column {name:?}"
                )));
            }
        }
    }

    // First pass: materialize cells and reject missing values. Typing needs
    // the whole column, so rows are buffered.
    let mut cells: Vec<Vec<String>> = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let row = i + 1; // 1-based data row for error reporting
        let record = record.map_err(|e| DatasetError::Malformed { row, detail: e.to_string() })?;
        let mut fields = Vec::with_capacity(headers.len());
        for (j, field) in record.iter().enumerate() {
            if field.is_empty() {
                return Err(DatasetError::MissingValue { row, col: headers[j].clone() });
            }
            fields.push(field.to_string());
        }
        cells.push(fields);
    }
    if cells.is_empty() {
        return Err(DatasetError::EmptyFile);
    }

    let mut columns = Vec::with_capacity(headers.len() - 1);
    let mut target_values = Vec::new();

    for (j, name) in headers.iter().enumerate() {
        let raw: Vec<&str> = cells.iter().map(|r| r[j].as_str()).collect();
        if j == target_idx {
            for (i, cell) in raw.iter().enumerate() {
                let y = parse_finite(cell).ok_or_else(|| DatasetError::UnparsableCell {
                    row: i + 1,
                    col: name.clone(),
                    detail: format!("target cell {cell:?} is not a finite number"),
                })?;
                target_values.push(y);
            }
            continue;
        }

        let hint = schema_hints.and_then(|h| h.get(name)).copied();
        let data = match hint {
            Some(KindHint::Numeric) => {
                let mut values = Vec::with_capacity(raw.len());
                for (i, cell) in raw.iter().enumerate() {
                    let v = parse_finite(cell).ok_or_else(|| DatasetError::UnparsableCell {
                        row: i + 1,
                        col: name.clone(),
                        detail: format!("cell {cell:?} is not a finite number"),
                    })?;
                    values.push(v);
                }
                ColumnData::Numeric(values)
            }
            Some(KindHint::Categorical) => encode_categorical(&raw),
            None => match raw.iter().map(|c| parse_finite(c)).collect::<Option<Vec<f64>>>() {
                Some(values) => ColumnData::Numeric(values),
                None => encode_categorical(&raw),
            },
        };
        columns.push(FeatureColumn { name: name.clone(), data });
    }

    Dataset::new(
        columns,
        TargetColumn { name: target_name.to_string(), values: target_values },
        task,
    )
}

fn parse_finite(cell: &str) -> Option<f64> {
    cell.parse::<f64>().ok().filter(|v| v.is_finite())
}

/// Codes in first-appearance order.
fn encode_categorical(raw: &[&str]) -> ColumnData {
    let mut levels: Vec<String> = Vec::new();
    let mut index: HashMap<&str, u32> = HashMap::new();
    let mut codes = Vec::with_capacity(raw.len());
    for &cell in raw {
        let code = match index.get(cell) {
            Some(&c) => c,
            None => {
                let c = levels.len() as u32;
                levels.push(cell.to_string());
                index.insert(cell, c);
                c
            }
        };
        codes.push(code);
    }
    ColumnData::Categorical { levels, codes }
}

pub fn write_csv(d: &Dataset, path: impl AsRef<Path>) -> Result<(), DatasetError> {
    let file = File::create(path)?;
    write_csv_writer(d, file)
}

pub fn write_csv_writer(d: &Dataset, writer: impl Write) -> Result<(), DatasetError> {
    let mut wtr = csv::Writer::from_writer(writer);
    let mut header: Vec<&str> = d.columns().iter().map(|c| c.name.as_str()).collect();
    header.push(&d.target().name);
    wtr.write_record(&header).map_err(io_like)?;

    for i in 0..d.n() {
        let mut record: Vec<String> = Vec::with_capacity(d.m() + 1);
        for col in d.columns() {
            match &col.data {
                ColumnData::Numeric(v) => record.push(format!("{}", v[i])),
                ColumnData::Categorical { levels, codes } => {
                    record.push(levels[codes[i] as usize].clone())
                }
            }
        }
        record.push(format!("{}", d.target().values[i]));
        wtr.write_record(&record).map_err(io_like)?;
    }
    wtr.flush()?;
    Ok(())
}

fn io_like(e: csv::Error) -> DatasetError {
    DatasetError::Malformed { row: 0, detail: e.to_string() }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn auto_typing_and_codes() {
        let csv = "a,b,y\n1,x,0\n2,x,1\n3,z,0\n";
        let d = load_csv_reader(csv.as_bytes(), "y", TaskKind::Binclass, None).unwrap();
        assert_eq!(d.n(), 3);
        assert_eq!(d.m(), 2);
        assert!(!d.columns()[0].is_categorical());
        let b = &d.columns()[1];
        assert_eq!(b.cardinality(), Some(2));
        match &b.data {
            ColumnData::Categorical { levels, codes } => {
                assert_eq!(levels, &["x".to_string(), "z".to_string()]);
                assert_eq!(codes, &[0, 0, 1]);
            }
            _ => panic!("expected categorical"),
        }
    }

    #[test]
    fn blank_cell_is_missing_value() {
        let csv = "a,y\n1,0\n,1\n";
        let err = load_csv_reader(csv.as_bytes(), "y", TaskKind::Binclass, None).unwrap_err();
        match err {
            DatasetError::MissingValue { row, col } => {
                assert_eq!(row, 2);
                assert_eq!(col, "a");
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn single_row_single_feature() {
        let csv = "a,y\n3.5,1.25\n";
        let d = load_csv_reader(csv.as_bytes(), "y", TaskKind::Regression, None).unwrap();
        assert_eq!((d.n(), d.m()), (1, 1));
        assert_eq!(d.columns()[0].value(0), 3.5);
    }

    #[test]
    fn target_not_found_and_empty_file() {
        let csv = "a,y\n1,0\n";
        assert!(matches!(
            load_csv_reader(csv.as_bytes(), "z", TaskKind::Regression, None),
            Err(DatasetError::TargetNotFound(_))
        ));
        assert!(matches!(
            load_csv_reader("".as_bytes(), "y", TaskKind::Regression, None),
            Err(DatasetError::EmptyFile)
        ));
        assert!(matches!(
            load_csv_reader("a,y\n".as_bytes(), "y", TaskKind::Regression, None),
            Err(DatasetError::EmptyFile)
        ));
    }

    #[test]
    fn numeric_hint_makes_bad_cell_an_error() {
        let csv = "a,y\n1,0\nx,1\n";
        let mut hints = HashMap::new();
        hints.insert("a".to_string(), KindHint::Numeric);
        let err =
            load_csv_reader(csv.as_bytes(), "y", TaskKind::Binclass, Some(&hints)).unwrap_err();
        assert!(matches!(err, DatasetError::UnparsableCell { row: 2, .. }));
    }

    #[test]
    fn categorical_hint_overrides_numeric_column() {
        let csv = "a,y\n1,0\n2,1\n1,0\n";
        let mut hints = HashMap::new();
        hints.insert("a".to_string(), KindHint::Categorical);
        let d = load_csv_reader(csv.as_bytes(), "y", TaskKind::Binclass, Some(&hints)).unwrap();
        assert_eq!(d.columns()[0].cardinality(), Some(2));
        assert_eq!(d.columns()[0].value(2), 0.0);
    }

    #[test]
    fn nan_text_is_not_numeric() {
        // "NaN" parses as f64 but is not finite, so the column goes categorical.
        let csv = "a,y\nNaN,0\n1,1\n";
        let d = load_csv_reader(csv.as_bytes(), "y", TaskKind::Binclass, None).unwrap();
        assert!(d.columns()[0].is_categorical());
    }

    #[test]
    fn ragged_row_is_malformed() {
        let csv = "a,b,y\n1,2,0\n1,0\n";
        assert!(matches!(
            load_csv_reader(csv.as_bytes(), "y", TaskKind::Regression, None),
            Err(DatasetError::Malformed { .. })
        ));
    }

    #[test]
    fn round_trip_preserves_values_and_codes() {
        let csv = "a,b,y\n0.1,x,3.25\n2e-4,zz,4.5\n3,x,0.125\n";
        let d = load_csv_reader(csv.as_bytes(), "y", TaskKind::Regression, None).unwrap();
        let mut out = Vec::new();
        write_csv_writer(&d, &mut out).unwrap();
        let d2 = load_csv_reader(out.as_slice(), "y", TaskKind::Regression, None).unwrap();
        assert_eq!(d.n(), d2.n());
        for j in 0..d.m() {
            for i in 0..d.n() {
                assert_eq!(d.columns()[j].value(i), d2.columns()[j].value(i));
            }
        }
        assert_eq!(d.target().values, d2.target().values);
    }
}
