//! Batch pipeline stages behind the CLI subcommands. Each stage reads and
//! writes files, returns a serializable report, and leaves printing to the
//! caller.

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;

use crate::codec::StreamDecoder;
use crate::corpus::{encode_corpus, read_corpus};
use crate::error::{Error, Result};
use crate::ingest;
use crate::records::{read_records, write_records, RecordsWriter};
use crate::schema::{BpeGroup, CategoricalSet, SchemaConfig, TokenClass};
use crate::synth::{write_synthetic_csv, SynthConfig};
use crate::vocab::{collect_unique_values, collect_value_counts, GroupTrainReport, Vocabulary};

pub const REPORT_VERSION: u32 = 1;

/// Writes any report as pretty JSON.
pub fn write_report<T: Serialize>(path: impl AsRef<Path>, report: &T) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    serde_json::to_writer_pretty(BufWriter::new(file), report)
        .map_err(|e| Error::io(path, std::io::Error::other(e)))?;
    Ok(())
}

#[derive(Debug, Serialize)]
pub struct PrepareReport {
    pub report_version: u32,
    pub files: usize,
    pub rows: u64,
    pub first_seen: Option<String>,
    pub last_seen: Option<String>,
    pub elapsed_seconds: f64,
}

/// Ingests raw CSVs into a prepared-records file.
pub fn prepare(
    csv_paths: &[PathBuf],
    schema: &SchemaConfig,
    out_records: &Path,
    limit: Option<usize>,
) -> Result<PrepareReport> {
    let start = Instant::now();
    let prepared = ingest::prepare(csv_paths, schema, limit)?;
    write_records(out_records, schema, &prepared.records)?;
    Ok(PrepareReport {
        report_version: REPORT_VERSION,
        files: csv_paths.len(),
        rows: prepared.records.len() as u64,
        first_seen: prepared.first_seen,
        last_seen: prepared.last_seen,
        elapsed_seconds: start.elapsed().as_secs_f64(),
    })
}

#[derive(Debug, Serialize)]
pub struct GroupSummary {
    pub group: String,
    pub unique_values: usize,
    pub alphabet_size: usize,
    pub merges_learned: usize,
    pub early_stopped: bool,
    pub initial_tokens: u64,
    pub final_tokens: u64,
}

#[derive(Debug, Serialize)]
pub struct TrainReport {
    pub report_version: u32,
    pub merges_per_group: u32,
    pub weighted: bool,
    pub groups: Vec<GroupSummary>,
    pub fixed_tokens: usize,
    pub vocab_size: usize,
    pub elapsed_seconds: f64,
}

pub struct TrainOptions<'a> {
    pub merges_per_group: u32,
    pub weighted: bool,
    /// Groups to train this run; always executed in canonical order.
    pub groups: Vec<BpeGroup>,
    /// Continue from an existing vocabulary instead of a fresh one.
    pub resume_from: Option<&'a Path>,
    /// Per-merge-step CSV log (group, step, pair, frequency, token counts).
    pub merge_log: Option<&'a Path>,
}

impl Default for TrainOptions<'_> {
    fn default() -> Self {
        TrainOptions {
            merges_per_group: 1000,
            weighted: false,
            groups: BpeGroup::ALL.to_vec(),
            resume_from: None,
            merge_log: None,
        }
    }
}

/// Trains the vocabulary from a prepared-records file and saves it.
pub fn train_vocab(
    records_path: &Path,
    schema: &SchemaConfig,
    out_vocab: &Path,
    opts: &TrainOptions<'_>,
) -> Result<TrainReport> {
    let start = Instant::now();
    let records = read_records(records_path, schema)?;
    let mut vocab = match opts.resume_from {
        Some(path) => Vocabulary::load(path)?,
        None => Vocabulary::init_fixed(schema),
    };

    let mut reports: Vec<GroupTrainReport> = Vec::new();
    for group in BpeGroup::ALL {
        if !opts.groups.contains(&group) {
            continue;
        }
        let report = if opts.weighted {
            let values = collect_value_counts(&records, schema, group);
            vocab.train_group_weighted(group, &values, opts.merges_per_group)?
        } else {
            let values = collect_unique_values(&records, schema, group);
            vocab.train_group(group, &values, opts.merges_per_group)?
        };
        log::info!(
            "trained {group}: {} values, {} merges, {} -> {} tokens",
            report.unique_values,
            report.steps.len(),
            report.initial_tokens,
            report.tokens_after_last_step()
        );
        reports.push(report);
    }
    vocab.save(out_vocab)?;

    if let Some(log_path) = opts.merge_log {
        write_merge_log(log_path, &reports)?;
    }

    Ok(TrainReport {
        report_version: REPORT_VERSION,
        merges_per_group: opts.merges_per_group,
        weighted: opts.weighted,
        groups: reports
            .iter()
            .map(|r| GroupSummary {
                group: r.group.name().to_string(),
                unique_values: r.unique_values,
                alphabet_size: r.alphabet_size,
                merges_learned: r.steps.len(),
                early_stopped: r.early_stopped,
                initial_tokens: r.initial_tokens,
                final_tokens: r.tokens_after_last_step(),
            })
            .collect(),
        fixed_tokens: vocab.fixed_len(),
        vocab_size: vocab.len(),
        elapsed_seconds: start.elapsed().as_secs_f64(),
    })
}

/// One CSV row per merge step, plus a step-0 row per group with the alphabet
/// baseline. Plotting this reproduces the token-count-per-merge-step curves;
/// see `scripts/plot_merge_log.py`.
fn write_merge_log(path: &Path, reports: &[GroupTrainReport]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(BufWriter::new(file));
    w.write_record([
        "group",
        "step",
        "left",
        "right",
        "merged",
        "frequency",
        "tokens_after",
        "vocab_size_after",
    ])
    .map_err(|e| Error::io(path, std::io::Error::other(e)))?;
    for report in reports {
        let group = report.group.name();
        w.write_record([
            group,
            "0",
            "",
            "",
            "",
            "",
            &report.initial_tokens.to_string(),
            &report.vocab_size_after_alphabet.to_string(),
        ])
        .map_err(|e| Error::io(path, std::io::Error::other(e)))?;
        for step in &report.steps {
            w.write_record([
                group,
                &(step.rank + 1).to_string(),
                &step.left,
                &step.right,
                &step.merged,
                &step.frequency.to_string(),
                &step.tokens_after.to_string(),
                &step.vocab_size_after.to_string(),
            ])
            .map_err(|e| Error::io(path, std::io::Error::other(e)))?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[derive(Debug, Serialize)]
pub struct EncodeReport {
    pub report_version: u32,
    pub flows: u64,
    pub chars: u64,
    pub tokens: u64,
    pub compression_ratio: f64,
    pub compression_ratio_display: String,
    pub ratio_defined: bool,
    pub elapsed_seconds: f64,
    pub flows_per_minute: f64,
}

/// Encodes a prepared-records file into a corpus file.
pub fn encode(
    records_path: &Path,
    schema: &SchemaConfig,
    vocab_path: &Path,
    out_corpus: &Path,
) -> Result<EncodeReport> {
    let records = read_records(records_path, schema)?;
    let vocab = Vocabulary::load(vocab_path)?;
    let metrics = encode_corpus(&records, schema, &vocab, out_corpus)?;
    Ok(EncodeReport {
        report_version: REPORT_VERSION,
        flows: metrics.flows,
        chars: metrics.chars,
        tokens: metrics.tokens,
        compression_ratio: metrics.compression_ratio,
        compression_ratio_display: metrics.ratio_display(),
        ratio_defined: metrics.ratio_defined,
        elapsed_seconds: metrics.elapsed.as_secs_f64(),
        flows_per_minute: metrics.flows_per_minute(),
    })
}

#[derive(Debug, Serialize)]
pub struct DecodeReport {
    pub report_version: u32,
    pub flows: u64,
    pub verified: Option<VerifyReport>,
    pub elapsed_seconds: f64,
}

#[derive(Debug, Serialize)]
pub struct VerifyReport {
    pub compared: u64,
    pub matched: u64,
    /// Exact-match percentage at two decimals, e.g. "100.00%".
    pub match_percent_display: String,
}

/// Decodes a corpus back into a records file; optionally verifies it against
/// the original records file row by row.
pub fn decode(
    corpus_path: &Path,
    vocab_path: &Path,
    schema: &SchemaConfig,
    out_records: &Path,
    verify_against: Option<&Path>,
) -> Result<DecodeReport> {
    let start = Instant::now();
    let vocab = Vocabulary::load(vocab_path)?;
    let (header, reader) = read_corpus(corpus_path)?;
    if header.vocab_checksum != vocab.checksum() {
        return Err(Error::Checksum {
            path: corpus_path.to_path_buf(),
            message: "corpus was encoded with a different vocabulary".to_string(),
        });
    }

    let mut decoder = StreamDecoder::new(&vocab, schema)?;
    let mut writer = RecordsWriter::create(out_records, schema)?;
    let mut flows = 0u64;
    for id in reader {
        if let Some(record) = decoder.push(id?)? {
            writer.write(&record)?;
            flows += 1;
        }
    }
    decoder.finish()?;
    writer.finish()?;
    if flows != header.flows {
        return Err(Error::MalformedStream {
            offset: header.tokens,
            message: format!("header declares {} flows but stream decoded {flows}", header.flows),
        });
    }

    let verified = match verify_against {
        None => None,
        Some(original) => {
            let expected = read_records(original, schema)?;
            let decoded = read_records(out_records, schema)?;
            let compared = expected.len().max(decoded.len()) as u64;
            let matched = expected
                .iter()
                .zip(&decoded)
                .filter(|(a, b)| a == b)
                .count() as u64;
            let percent = if compared == 0 {
                100.0
            } else {
                matched as f64 * 100.0 / compared as f64
            };
            Some(VerifyReport {
                compared,
                matched,
                match_percent_display: format!("{percent:.2}%"),
            })
        }
    };

    Ok(DecodeReport {
        report_version: REPORT_VERSION,
        flows,
        verified,
        elapsed_seconds: start.elapsed().as_secs_f64(),
    })
}

#[derive(Debug, Serialize)]
pub struct SynthReport {
    pub report_version: u32,
    pub rows: u64,
    pub seed: u64,
}

/// Generates a synthetic NetFlow CSV.
pub fn synth(out: &Path, seed: u64, rows: u64) -> Result<SynthReport> {
    write_synthetic_csv(out, SynthConfig { seed, rows })?;
    Ok(SynthReport {
        report_version: REPORT_VERSION,
        rows,
        seed,
    })
}

#[derive(Debug, Serialize)]
pub struct InferReport {
    pub report_version: u32,
    pub columns: Vec<InferredColumn>,
}

#[derive(Debug, Serialize)]
pub struct InferredColumn {
    pub column: String,
    pub values: usize,
}

/// Rewrites the schema's categorical value sets from the values observed in
/// raw CSVs (first-occurrence order). Useful when a dataset's label
/// vocabulary differs from the bundled declaration.
pub fn infer_values(
    schema: &SchemaConfig,
    csv_paths: &[PathBuf],
    out_schema: &Path,
) -> Result<InferReport> {
    let table = ingest::load_csv(csv_paths, schema)?;
    let mut inferred = Vec::new();
    let mut new_columns = Vec::new();
    for col in schema.data_columns() {
        let mut col = col.clone();
        if matches!(col.class, TokenClass::Categorical(_)) {
            let idx = table
                .header
                .iter()
                .position(|h| *h == col.name)
                .expect("load_csv validated required columns");
            let mut seen = std::collections::HashSet::new();
            let mut values = Vec::new();
            for row in &table.rows {
                let cell = &row[idx];
                if seen.insert(cell.clone()) {
                    values.push(cell.clone());
                }
            }
            if values.is_empty() {
                return Err(Error::schema(format!(
                    "column {:?}: no values observed to infer from",
                    col.name
                )));
            }
            inferred.push(InferredColumn {
                column: col.name.clone(),
                values: values.len(),
            });
            col.class = TokenClass::Categorical(CategoricalSet::new(values)?);
        }
        new_columns.push(col);
    }
    let new_schema = SchemaConfig::new(
        new_columns,
        schema.delta_column().clone(),
        schema.row_terminator().to_string(),
        schema.timestamp_column().to_string(),
        schema.timestamp_format().to_string(),
    )?;
    new_schema.save(out_schema)?;
    Ok(InferReport {
        report_version: REPORT_VERSION,
        columns: inferred,
    })
}
