//! CSV ingestion.
//!
//! Input files have a header row, a `ds` column (integer or ISO date), a `y`
//! column and any number of additional numeric columns, which become
//! regressors in header order. Row numbers in messages count data rows from
//! 1, excluding the header.

use std::path::Path;

use bayesmooth::series::{validate_series, Regressors, TimeSeries};
use chrono::NaiveDate;

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum DsKind {
    Integer,
    Date,
}

fn parse_ds(raw: &str, row: usize) -> CliResult<(i64, DsKind)> {
    let s = raw.trim();
    if let Ok(v) = s.parse::<i64>() {
        return Ok((v, DsKind::Integer));
    }
    let epoch = NaiveDate::from_ymd_opt(1970, 1, 1).expect("valid epoch");
    NaiveDate::parse_from_str(s, "%Y-%m-%d")
        .map(|d| ((d - epoch).num_days(), DsKind::Date))
        .map_err(|_| {
            CliError::Input(format!(
                "row {row}: cannot parse ds {s:?} as an integer or YYYY-MM-DD date"
            ))
        })
}

fn parse_number(raw: &str, column: &str, row: usize) -> CliResult<f64> {
    raw.trim()
        .parse::<f64>()
        .map_err(|_| CliError::Input(format!("row {row}: cannot parse {column} value {raw:?} as a number")))
}

/// Attaches a data-row number to engine errors that carry an index.
pub fn with_row(e: bayesmooth::Error) -> CliError {
    use bayesmooth::Error as E;
    match e {
        E::NonMonotonicTimestamps { index }
        | E::NonFiniteValue { index }
        | E::NonPositiveValue { index }
        | E::NonPositiveObservation { index } => CliError::Row {
            row: index + 1,
            source: e,
        },
        other => CliError::Model(other),
    }
}

struct Table {
    headers: Vec<String>,
    rows: Vec<csv::StringRecord>,
}

fn read_table(path: &Path) -> CliResult<Table> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;
    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| csv_error(path, e))?
        .iter()
        .map(str::to_string)
        .collect();
    let rows = reader
        .records()
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| csv_error(path, e))?;
    Ok(Table { headers, rows })
}

fn csv_error(path: &Path, e: csv::Error) -> CliError {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => CliError::io(path, io),
        kind => CliError::Input(format!("{}: {kind:?}", path.display())),
    }
}

fn column(headers: &[String], name: &str, path: &Path) -> CliResult<usize> {
    headers
        .iter()
        .position(|h| h == name)
        .ok_or_else(|| CliError::Input(format!("{}: missing required column {name:?}", path.display())))
}

/// Reads a series file and validates it.
pub fn read_series(path: &Path, period: usize) -> CliResult<TimeSeries> {
    let table = read_table(path)?;
    let ds_col = column(&table.headers, "ds", path)?;
    let y_col = column(&table.headers, "y", path)?;
    let reg_cols: Vec<usize> = (0..table.headers.len())
        .filter(|&i| i != ds_col && i != y_col)
        .collect();

    let mut timestamps = Vec::with_capacity(table.rows.len());
    let mut values = Vec::with_capacity(table.rows.len());
    let mut columns = vec![Vec::with_capacity(table.rows.len()); reg_cols.len()];
    let mut kind = None;
    for (i, rec) in table.rows.iter().enumerate() {
        let row = i + 1;
        let (t, k) = parse_ds(&rec[ds_col], row)?;
        if *kind.get_or_insert(k) != k {
            return Err(CliError::Input(format!("row {row}: ds mixes integer and date formats")));
        }
        timestamps.push(t);
        values.push(parse_number(&rec[y_col], "y", row)?);
        for (col, &j) in columns.iter_mut().zip(&reg_cols) {
            col.push(parse_number(&rec[j], &table.headers[j], row)?);
        }
    }

    let regressors = if reg_cols.is_empty() {
        None
    } else {
        let names = reg_cols.iter().map(|&j| table.headers[j].clone()).collect();
        Some(Regressors::new(names, columns)?)
    };
    validate_series(timestamps, values, regressors, period).map_err(with_row)
}

/// Reads future regressor values; `ds` and `y` columns are ignored if present.
pub fn read_regressors(path: &Path) -> CliResult<Regressors> {
    let table = read_table(path)?;
    let cols: Vec<usize> = (0..table.headers.len())
        .filter(|&i| table.headers[i] != "ds" && table.headers[i] != "y")
        .collect();
    let mut columns = vec![Vec::with_capacity(table.rows.len()); cols.len()];
    for (i, rec) in table.rows.iter().enumerate() {
        for (col, &j) in columns.iter_mut().zip(&cols) {
            let v = parse_number(&rec[j], &table.headers[j], i + 1)?;
            if !v.is_finite() {
                return Err(CliError::Row {
                    row: i + 1,
                    source: bayesmooth::Error::NonFiniteValue { index: i },
                });
            }
            col.push(v);
        }
    }
    let names = cols.iter().map(|&j| table.headers[j].clone()).collect();
    Ok(Regressors::new(names, columns)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn csv_file(body: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(body.as_bytes()).unwrap();
        f
    }

    #[test]
    fn integer_and_date_timestamps() {
        let f = csv_file("ds,y\n1,10\n2,11\n3,12\n");
        let s = read_series(f.path(), 1).unwrap();
        assert_eq!(s.timestamps(), &[1, 2, 3]);
        assert_eq!(s.values(), &[10.0, 11.0, 12.0]);

        let f = csv_file("ds,y\n1970-01-02,1\n1970-01-09,2\n");
        let s = read_series(f.path(), 1).unwrap();
        assert_eq!(s.timestamps(), &[1, 8]);
    }

    #[test]
    fn regressor_columns_in_header_order() {
        let f = csv_file("promo,ds,y,temp\n0,1,5,20\n1,2,6,21\n");
        let s = read_series(f.path(), 1).unwrap();
        let r = s.regressors().unwrap();
        assert_eq!(r.names(), &["promo".to_string(), "temp".to_string()]);
        assert_eq!(r.columns()[1], vec![20.0, 21.0]);
    }

    #[test]
    fn validation_errors_carry_row_numbers() {
        let f = csv_file("ds,y\n1,1\n3,2\n2,3\n");
        let e = read_series(f.path(), 1).unwrap_err();
        assert!(
            matches!(
                e,
                CliError::Row {
                    row: 3,
                    source: bayesmooth::Error::NonMonotonicTimestamps { index: 2 }
                }
            ),
            "{e}"
        );

        let f = csv_file("ds,y\n1,1\n2,NaN\n");
        assert!(matches!(
            read_series(f.path(), 1).unwrap_err(),
            CliError::Row { row: 2, .. }
        ));

        let f = csv_file("ds,y\n1,1\n2,abc\n");
        let msg = read_series(f.path(), 1).unwrap_err().to_string();
        assert!(msg.starts_with("row 2:"), "{msg}");

        let f = csv_file("ds,y\n1,1\n");
        assert!(matches!(
            read_series(f.path(), 0).unwrap_err(),
            CliError::Model(bayesmooth::Error::InvalidPeriod(0))
        ));
    }

    #[test]
    fn structural_errors() {
        let f = csv_file("ds,value\n1,1\n");
        assert!(read_series(f.path(), 1).unwrap_err().to_string().contains("\"y\""));
        let f = csv_file("ds,y\n1,1\n1970-01-03,2\n");
        assert!(read_series(f.path(), 1).unwrap_err().to_string().contains("mixes"));
        assert!(matches!(
            read_series(Path::new("/nonexistent/x.csv"), 1).unwrap_err(),
            CliError::Io { .. }
        ));
    }

    #[test]
    fn future_regressors_ignore_ds() {
        let f = csv_file("ds,promo\n10,1\n11,0\n");
        let r = read_regressors(f.path()).unwrap();
        assert_eq!(r.names(), &["promo".to_string()]);
        assert_eq!(r.n_rows(), 2);
    }
}
