//! The prepared-records intermediate file: one CSV row per [`FlowRecord`],
//! header = schema column names (DeltaTime last). It decouples ingest from
//! training and encoding, and is also the output format of decoding, which
//! makes round-trip verification a file diff.

use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use crate::error::{Error, Result};
use crate::ingest::FlowRecord;
use crate::schema::SchemaConfig;

/// Streaming writer for prepared-records files.
pub struct RecordsWriter {
    writer: csv::Writer<BufWriter<File>>,
    path: std::path::PathBuf,
}

impl RecordsWriter {
    pub fn create(path: impl AsRef<Path>, schema: &SchemaConfig) -> Result<RecordsWriter> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut writer = csv::Writer::from_writer(BufWriter::new(file));
        let header: Vec<&str> = schema.columns().iter().map(|c| c.name.as_str()).collect();
        writer.write_record(&header).map_err(|e| Self::map_err(path, e))?;
        Ok(RecordsWriter {
            writer,
            path: path.to_path_buf(),
        })
    }

    pub fn write(&mut self, record: &FlowRecord) -> Result<()> {
        self.writer
            .write_record(&record.values)
            .map_err(|e| Self::map_err(&self.path, e))
    }

    pub fn finish(mut self) -> Result<()> {
        self.writer.flush().map_err(|e| Error::io(&self.path, e))
    }

    fn map_err(path: &Path, err: csv::Error) -> Error {
        Error::CsvDialect {
            path: path.to_path_buf(),
            row: err.position().map(|p| p.record()).unwrap_or_default(),
            message: err.to_string(),
        }
    }
}

pub fn write_records(path: impl AsRef<Path>, schema: &SchemaConfig, records: &[FlowRecord]) -> Result<()> {
    let mut writer = RecordsWriter::create(path, schema)?;
    for record in records {
        writer.write(record)?;
    }
    writer.finish()
}

pub fn read_records(path: impl AsRef<Path>, schema: &SchemaConfig) -> Result<Vec<FlowRecord>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(BufReader::new(file));
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| RecordsWriter::map_err(path, e))?
        .iter()
        .map(str::to_string)
        .collect();
    let expected: Vec<String> = schema.columns().iter().map(|c| c.name.clone()).collect();
    if header != expected {
        return Err(Error::HeaderMismatch {
            path: path.to_path_buf(),
            expected,
            found: header,
        });
    }
    let mut records = Vec::new();
    for row in reader.records() {
        let row = row.map_err(|e| RecordsWriter::map_err(path, e))?;
        records.push(FlowRecord {
            values: row.iter().map(str::to_string).collect(),
        });
    }
    Ok(records)
}
