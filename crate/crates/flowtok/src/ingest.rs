//! Raw CSV ingestion: aggregation across files, chronological sorting, and
//! the engineered inter-arrival (DeltaTime) feature.

use std::path::{Path, PathBuf};

use chrono::NaiveDateTime;

use crate::error::{Error, Result};
use crate::schema::SchemaConfig;

/// One or more CSV files concatenated: a shared header plus raw cell strings.
/// Cells are preserved byte-exactly; only the CSV dialect's quoting rules apply.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawTable {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

/// One normalized row: field strings aligned 1:1 with `schema.columns()`.
/// The raw timestamp column is gone and the rendered DeltaTime sits last.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct FlowRecord {
    pub values: Vec<String>,
}

/// A parsed "Date first seen" instant. CIDDS timestamps carry no zone, so
/// this wraps a naive datetime at nanosecond precision.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct Timestamp(pub NaiveDateTime);

impl Timestamp {
    pub fn parse(value: &str, format: &str) -> Option<Timestamp> {
        NaiveDateTime::parse_from_str(value, format).ok().map(Timestamp)
    }

    pub fn format(&self, format: &str) -> String {
        self.0.format(format).to_string()
    }

    /// Seconds from `earlier` to `self` as a double, matching a
    /// nanosecond-difference-over-1e9 computation.
    pub fn seconds_since(&self, earlier: &Timestamp) -> f64 {
        let delta = self.0 - earlier.0;
        match delta.num_nanoseconds() {
            Some(ns) => ns as f64 / 1e9,
            None => delta.num_seconds() as f64,
        }
    }
}

/// Renders a DeltaTime value: the shortest decimal string that round-trips
/// the double, always keeping a fractional digit (`0` -> `"0.0"`).
pub fn render_delta(seconds: f64) -> String {
    format!("{seconds:?}")
}

/// Reads one or more CSV files into a single table. All files must share an
/// identical header; rows are concatenated in path order.
pub fn load_csv(paths: &[PathBuf], schema: &SchemaConfig) -> Result<RawTable> {
    let mut table: Option<RawTable> = None;
    for path in paths {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .from_path(path)
            .map_err(|e| csv_error(path, e))?;
        let header: Vec<String> = reader
            .headers()
            .map_err(|e| csv_error(path, e))?
            .iter()
            .map(str::to_string)
            .collect();

        match &mut table {
            None => {
                require_columns(path, &header, schema)?;
                table = Some(RawTable {
                    header,
                    rows: Vec::new(),
                });
            }
            Some(t) => {
                if t.header != header {
                    return Err(Error::HeaderMismatch {
                        path: path.clone(),
                        expected: t.header.clone(),
                        found: header,
                    });
                }
            }
        }

        let rows = &mut table.as_mut().expect("table initialized").rows;
        for record in reader.records() {
            let record = record.map_err(|e| csv_error(path, e))?;
            rows.push(record.iter().map(str::to_string).collect());
        }
    }
    Ok(table.unwrap_or(RawTable {
        header: Vec::new(),
        rows: Vec::new(),
    }))
}

fn require_columns(path: &Path, header: &[String], schema: &SchemaConfig) -> Result<()> {
    let mut needed: Vec<&str> = schema.data_columns().iter().map(|c| c.name.as_str()).collect();
    needed.push(schema.timestamp_column());
    for column in needed {
        if !header.iter().any(|h| h == column) {
            return Err(Error::MissingColumn {
                path: path.to_path_buf(),
                column: column.to_string(),
            });
        }
    }
    Ok(())
}

fn csv_error(path: &Path, err: csv::Error) -> Error {
    if let csv::ErrorKind::Io(io) = err.kind() {
        return Error::Io {
            path: path.to_path_buf(),
            source: std::io::Error::new(io.kind(), io.to_string()),
        };
    }
    let row = err
        .position()
        .map(|p| p.record())
        .unwrap_or_default();
    Error::CsvDialect {
        path: path.to_path_buf(),
        row,
        message: err.to_string(),
    }
}

/// Sorts rows by ascending timestamp. The sort is stable: rows with equal
/// timestamps keep their input order.
pub fn sort_chronological(
    table: RawTable,
    timestamp_column: &str,
    timestamp_format: &str,
) -> Result<RawTable> {
    let ts_idx = column_index(&table.header, timestamp_column)?;
    let timestamps = parse_timestamps(&table, ts_idx, timestamp_format)?;
    let mut order: Vec<usize> = (0..table.rows.len()).collect();
    order.sort_by_key(|&i| timestamps[i]);

    let RawTable { header, rows } = table;
    let mut slots: Vec<Option<Vec<String>>> = rows.into_iter().map(Some).collect();
    let rows = order
        .into_iter()
        .map(|i| slots[i].take().expect("each row moved once"))
        .collect();
    Ok(RawTable { header, rows })
}

fn column_index(header: &[String], name: &str) -> Result<usize> {
    header.iter().position(|h| h == name).ok_or(Error::MissingColumn {
        path: PathBuf::from("<table>"),
        column: name.to_string(),
    })
}

fn parse_timestamps(table: &RawTable, ts_idx: usize, format: &str) -> Result<Vec<Timestamp>> {
    table
        .rows
        .iter()
        .enumerate()
        .map(|(row, cells)| {
            let value = &cells[ts_idx];
            Timestamp::parse(value, format).ok_or(Error::TimestampParse {
                row: row as u64,
                value: value.clone(),
                format: format.to_string(),
            })
        })
        .collect()
}

/// Turns a chronologically sorted table into normalized records: drops the
/// raw timestamp column, validates integer-flagged cells, and appends the
/// rendered DeltaTime (`"nan"` for the first row).
pub fn engineer_delta_time(table: &RawTable, schema: &SchemaConfig) -> Result<Vec<FlowRecord>> {
    let ts_idx = column_index(&table.header, schema.timestamp_column())?;
    let ts_format = schema.timestamp_format();
    let col_idx: Vec<usize> = schema
        .data_columns()
        .iter()
        .map(|c| column_index(&table.header, &c.name))
        .collect::<Result<_>>()?;

    let mut records = Vec::with_capacity(table.rows.len());
    let mut prev: Option<Timestamp> = None;
    for (row, cells) in table.rows.iter().enumerate() {
        let row_no = row as u64;
        let ts = Timestamp::parse(&cells[ts_idx], ts_format).ok_or(Error::TimestampParse {
            row: row_no,
            value: cells[ts_idx].clone(),
            format: ts_format.to_string(),
        })?;
        let delta = match prev {
            None => "nan".to_string(),
            Some(p) => {
                if ts < p {
                    return Err(Error::NegativeDelta { row: row_no });
                }
                render_delta(ts.seconds_since(&p))
            }
        };
        prev = Some(ts);

        let mut values = Vec::with_capacity(schema.columns().len());
        for (col, &idx) in schema.data_columns().iter().zip(&col_idx) {
            let cell = &cells[idx];
            if col.integer {
                values.push(normalize_integer(cell).ok_or_else(|| Error::IntegerCoercion {
                    row: row_no,
                    column: col.name.clone(),
                    value: cell.clone(),
                })?);
            } else {
                values.push(cell.clone());
            }
        }
        values.push(delta);
        records.push(FlowRecord { values });
    }
    Ok(records)
}

/// Integer cast: plain digit strings pass through; float-integral forms such
/// as `"443.0"` (ICMP type/code ports in CIDDS) drop their fraction.
fn normalize_integer(cell: &str) -> Option<String> {
    let (int_part, frac_part) = match cell.split_once('.') {
        None => (cell, ""),
        Some((i, f)) => (i, f),
    };
    let int_ok = !int_part.is_empty() && int_part.bytes().all(|b| b.is_ascii_digit());
    let frac_ok = frac_part.bytes().all(|b| b == b'0');
    let had_dot = cell.contains('.');
    if !int_ok || !frac_ok || (had_dot && frac_part.is_empty()) {
        return None;
    }
    Some(int_part.to_string())
}

/// Prepared output of the full ingest stage plus the observed time span
/// (raw timestamp strings of the first and last sorted rows).
#[derive(Debug, Clone)]
pub struct Prepared {
    pub records: Vec<FlowRecord>,
    pub first_seen: Option<String>,
    pub last_seen: Option<String>,
}

/// Runs load -> sort -> delta in one call. `limit` keeps only the
/// chronologically first N rows, applied after sorting.
pub fn prepare(paths: &[PathBuf], schema: &SchemaConfig, limit: Option<usize>) -> Result<Prepared> {
    let table = load_csv(paths, schema)?;
    let mut table = sort_chronological(table, schema.timestamp_column(), schema.timestamp_format())?;
    if let Some(n) = limit {
        table.rows.truncate(n);
    }
    let ts_idx = column_index(&table.header, schema.timestamp_column())?;
    let first_seen = table.rows.first().map(|r| r[ts_idx].clone());
    let last_seen = table.rows.last().map(|r| r[ts_idx].clone());
    let records = engineer_delta_time(&table, schema)?;
    Ok(Prepared {
        records,
        first_seen,
        last_seen,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    const FMT: &str = "%Y-%m-%d %H:%M:%S%.3f";

    fn test_schema() -> SchemaConfig {
        let text = "version 1\n\
                    timestamp ts format \"%Y-%m-%d %H:%M:%S%.3f\"\n\
                    column ip token <|IP|> group ip\n\
                    column port token <|PORT|> group port integer\n\
                    column proto token <|PROTO|> values TCP UDP\n\
                    delta dt token <|DT|> group numeric\n";
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.schema");
        std::fs::write(&path, text).unwrap();
        SchemaConfig::load(&path).unwrap()
    }

    fn write_csv(dir: &Path, name: &str, contents: &str) -> PathBuf {
        let path = dir.join(name);
        let mut f = std::fs::File::create(&path).unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        path
    }

    #[test]
    fn timestamp_parse_format_round_trips() {
        let s = "2017-03-15 00:01:16.632";
        let ts = Timestamp::parse(s, FMT).unwrap();
        assert_eq!(ts.format(FMT), s);
    }

    #[test]
    fn load_concatenates_in_path_order() {
        let dir = tempfile::tempdir().unwrap();
        let a = write_csv(
            dir.path(),
            "a.csv",
            "ts,ip,port,proto\n2017-03-15 00:00:01.000,1.2.3.4,80,TCP\n",
        );
        let b = write_csv(
            dir.path(),
            "b.csv",
            "ts,ip,port,proto\n2017-03-15 00:00:02.000,5.6.7.8,53,UDP\n",
        );
        let table = load_csv(&[a, b], &test_schema()).unwrap();
        assert_eq!(table.rows.len(), 2);
        assert_eq!(table.rows[0][1], "1.2.3.4");
        assert_eq!(table.rows[1][1], "5.6.7.8");
    }

    #[test]
    fn empty_but_headered_file_gives_zero_rows() {
        let dir = tempfile::tempdir().unwrap();
        let a = write_csv(dir.path(), "a.csv", "ts,ip,port,proto\n");
        let table = load_csv(&[a], &test_schema()).unwrap();
        assert_eq!(table.rows.len(), 0);
        assert_eq!(table.header, ["ts", "ip", "port", "proto"]);
    }

    #[test]
    fn differing_headers_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let a = write_csv(dir.path(), "a.csv", "ts,ip,port,proto\n");
        let b = write_csv(dir.path(), "b.csv", "ts,ip,proto,port\n");
        let err = load_csv(&[a, b], &test_schema()).unwrap_err();
        assert!(matches!(err, Error::HeaderMismatch { .. }), "{err}");
    }

    #[test]
    fn ragged_row_reports_index() {
        let dir = tempfile::tempdir().unwrap();
        let a = write_csv(
            dir.path(),
            "a.csv",
            "ts,ip,port,proto\n2017-03-15 00:00:01.000,1.2.3.4,80,TCP\nonly,three,cells\n",
        );
        let err = load_csv(&[a], &test_schema()).unwrap_err();
        match err {
            Error::CsvDialect { row, .. } => assert_eq!(row, 2),
            other => panic!("expected CSV dialect error, got {other:?}"),
        }
    }

    fn table(rows: &[(&str, &str)]) -> RawTable {
        RawTable {
            header: vec!["ts".into(), "ip".into(), "port".into(), "proto".into()],
            rows: rows
                .iter()
                .map(|(ts, ip)| {
                    vec![ts.to_string(), ip.to_string(), "80".to_string(), "TCP".to_string()]
                })
                .collect(),
        }
    }

    #[test]
    fn sort_orders_rows() {
        let t = table(&[
            ("2017-03-15 00:00:03.000", "c"),
            ("2017-03-15 00:00:01.000", "a"),
            ("2017-03-15 00:00:02.000", "b"),
        ]);
        let sorted = sort_chronological(t, "ts", FMT).unwrap();
        let ips: Vec<&str> = sorted.rows.iter().map(|r| r[1].as_str()).collect();
        assert_eq!(ips, ["a", "b", "c"]);
    }

    #[test]
    fn sort_is_stable_on_ties() {
        let t = table(&[
            ("2017-03-15 00:00:01.000", "first"),
            ("2017-03-15 00:00:01.000", "second"),
            ("2017-03-15 00:00:01.000", "third"),
        ]);
        let sorted = sort_chronological(t, "ts", FMT).unwrap();
        let ips: Vec<&str> = sorted.rows.iter().map(|r| r[1].as_str()).collect();
        assert_eq!(ips, ["first", "second", "third"]);
    }

    #[test]
    fn bad_timestamp_reports_row() {
        let t = table(&[
            ("2017-03-15 00:00:01.000", "a"),
            ("not-a-date", "b"),
        ]);
        let err = sort_chronological(t, "ts", FMT).unwrap_err();
        match err {
            Error::TimestampParse { row, value, .. } => {
                assert_eq!(row, 1);
                assert_eq!(value, "not-a-date");
            }
            other => panic!("expected timestamp error, got {other:?}"),
        }
    }

    #[test]
    fn delta_of_one_second_renders_one_point_zero() {
        let t = table(&[
            ("2017-03-15 00:00:01.000", "a"),
            ("2017-03-15 00:00:02.000", "b"),
        ]);
        let records = engineer_delta_time(&t, &test_schema()).unwrap();
        assert_eq!(records[0].values, ["a", "80", "TCP", "nan"]);
        assert_eq!(records[1].values, ["b", "80", "TCP", "1.0"]);
    }

    #[test]
    fn first_record_delta_is_nan_and_ties_are_zero() {
        let t = table(&[
            ("2017-03-15 00:00:01.000", "a"),
            ("2017-03-15 00:00:01.000", "b"),
        ]);
        let records = engineer_delta_time(&t, &test_schema()).unwrap();
        assert_eq!(records[0].values.last().unwrap(), "nan");
        assert_eq!(records[1].values.last().unwrap(), "0.0");
    }

    #[test]
    fn fractional_delta_renders_shortest_round_trip() {
        let t = table(&[
            ("2017-03-15 00:00:01.000", "a"),
            ("2017-03-15 00:00:02.234", "b"),
        ]);
        let records = engineer_delta_time(&t, &test_schema()).unwrap();
        assert_eq!(records[1].values.last().unwrap(), "1.234");
    }

    #[test]
    fn unsorted_input_is_a_negative_delta_error() {
        let t = table(&[
            ("2017-03-15 00:00:02.000", "a"),
            ("2017-03-15 00:00:01.000", "b"),
        ]);
        let err = engineer_delta_time(&t, &test_schema()).unwrap_err();
        assert!(matches!(err, Error::NegativeDelta { row: 1 }), "{err}");
    }

    #[test]
    fn integer_column_normalizes_float_integral_forms() {
        assert_eq!(normalize_integer("443"), Some("443".to_string()));
        assert_eq!(normalize_integer("443.0"), Some("443".to_string()));
        assert_eq!(normalize_integer("3.000"), Some("3".to_string()));
        assert_eq!(normalize_integer("443.5"), None);
        assert_eq!(normalize_integer("4x4"), None);
        assert_eq!(normalize_integer(""), None);
        assert_eq!(normalize_integer("443."), None);
        assert_eq!(normalize_integer(".0"), None);
    }

    #[test]
    fn integer_coercion_error_carries_row_and_column() {
        let mut t = table(&[("2017-03-15 00:00:01.000", "a")]);
        t.rows[0][2] = "80x".to_string();
        let err = engineer_delta_time(&t, &test_schema()).unwrap_err();
        match err {
            Error::IntegerCoercion { row, column, value } => {
                assert_eq!(row, 0);
                assert_eq!(column, "port");
                assert_eq!(value, "80x");
            }
            other => panic!("expected coercion error, got {other:?}"),
        }
    }

    #[test]
    fn record_count_equals_row_count_and_deltas_sum_to_span() {
        let t = table(&[
            ("2017-03-15 00:00:01.000", "a"),
            ("2017-03-15 00:00:01.500", "b"),
            ("2017-03-15 00:00:04.250", "c"),
            ("2017-03-15 00:00:09.875", "d"),
        ]);
        let records = engineer_delta_time(&t, &test_schema()).unwrap();
        assert_eq!(records.len(), 4);
        let sum: f64 = records[1..]
            .iter()
            .map(|r| r.values.last().unwrap().parse::<f64>().unwrap())
            .sum();
        assert!((sum - 8.875).abs() < 1e-9);
    }

    #[test]
    fn partitioning_does_not_change_prepared_records() {
        let dir = tempfile::tempdir().unwrap();
        let rows = [
            "2017-03-15 00:00:04.000,d.d.d.d,443,TCP",
            "2017-03-15 00:00:01.000,a.a.a.a,80,TCP",
            "2017-03-15 00:00:03.000,c.c.c.c,53,UDP",
            "2017-03-15 00:00:02.000,b.b.b.b,22,TCP",
        ];
        let header = "ts,ip,port,proto\n";
        let one = write_csv(
            dir.path(),
            "one.csv",
            &format!("{header}{}\n", rows.join("\n")),
        );
        let p1 = write_csv(dir.path(), "p1.csv", &format!("{header}{}\n{}\n", rows[2], rows[0]));
        let p2 = write_csv(dir.path(), "p2.csv", &format!("{header}{}\n{}\n", rows[3], rows[1]));

        let schema = test_schema();
        let whole = prepare(&[one], &schema, None).unwrap();
        let split = prepare(&[p1, p2], &schema, None).unwrap();
        assert_eq!(whole.records, split.records);
        assert_eq!(whole.first_seen.as_deref(), Some("2017-03-15 00:00:01.000"));
        assert_eq!(whole.last_seen.as_deref(), Some("2017-03-15 00:00:04.000"));
    }
}
