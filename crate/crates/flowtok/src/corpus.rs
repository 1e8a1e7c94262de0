//! The encoded corpus file and the tokenization metrics.
//!
//! File layout (all integers little-endian):
//!
//! ```text
//! offset  size  field
//! 0       8     magic "FLOWTOKC"
//! 8       4     format version (u32)
//! 12      32    SHA-256 of the encoding vocabulary
//! 44      8     flow count (u64)
//! 52      8     token count (u64)
//! 60      8     character count of the serialized text (u64)
//! 68      8*n   token ids (i64)
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use crate::codec::RowEncoder;
use crate::error::{Error, Result};
use crate::ingest::FlowRecord;
use crate::schema::SchemaConfig;
use crate::vocab::{TokenId, Vocabulary};

pub const CORPUS_MAGIC: &[u8; 8] = b"FLOWTOKC";
pub const CORPUS_VERSION: u32 = 1;
pub const HEADER_LEN: u64 = 68;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CorpusHeader {
    pub version: u32,
    pub vocab_checksum: [u8; 32],
    pub flows: u64,
    pub tokens: u64,
    pub chars: u64,
}

impl CorpusHeader {
    fn to_bytes(self) -> [u8; HEADER_LEN as usize] {
        let mut out = [0u8; HEADER_LEN as usize];
        out[0..8].copy_from_slice(CORPUS_MAGIC);
        out[8..12].copy_from_slice(&self.version.to_le_bytes());
        out[12..44].copy_from_slice(&self.vocab_checksum);
        out[44..52].copy_from_slice(&self.flows.to_le_bytes());
        out[52..60].copy_from_slice(&self.tokens.to_le_bytes());
        out[60..68].copy_from_slice(&self.chars.to_le_bytes());
        out
    }

    fn from_bytes(path: &Path, bytes: &[u8; HEADER_LEN as usize]) -> Result<CorpusHeader> {
        if &bytes[0..8] != CORPUS_MAGIC {
            return Err(Error::FormatVersion {
                path: path.to_path_buf(),
                message: "not a corpus file (bad magic)".to_string(),
            });
        }
        let version = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
        if version != CORPUS_VERSION {
            return Err(Error::FormatVersion {
                path: path.to_path_buf(),
                message: format!("unsupported corpus version {version} (this build reads {CORPUS_VERSION})"),
            });
        }
        Ok(CorpusHeader {
            version,
            vocab_checksum: bytes[12..44].try_into().unwrap(),
            flows: u64::from_le_bytes(bytes[44..52].try_into().unwrap()),
            tokens: u64::from_le_bytes(bytes[52..60].try_into().unwrap()),
            chars: u64::from_le_bytes(bytes[60..68].try_into().unwrap()),
        })
    }
}

/// Efficiency figures for one encoding run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TokenizationMetrics {
    pub flows: u64,
    /// Characters of serialized text (Unicode scalar values).
    pub chars: u64,
    pub tokens: u64,
    /// chars / tokens, full precision; 0.0 when undefined.
    pub compression_ratio: f64,
    /// False only when `tokens == 0` made the ratio undefined.
    pub ratio_defined: bool,
    pub elapsed: Duration,
}

impl TokenizationMetrics {
    /// Display form of the ratio at two decimals, e.g. `6.18`.
    pub fn ratio_display(&self) -> String {
        format!("{:.2}", self.compression_ratio)
    }

    pub fn flows_per_minute(&self) -> f64 {
        let secs = self.elapsed.as_secs_f64();
        if secs > 0.0 {
            self.flows as f64 * 60.0 / secs
        } else {
            f64::INFINITY
        }
    }
}

/// Computes the metrics record from raw counts.
pub fn compute_metrics(chars: u64, tokens: u64, flows: u64, elapsed: Duration) -> TokenizationMetrics {
    let (ratio, defined) = if tokens == 0 {
        (0.0, false)
    } else {
        (chars as f64 / tokens as f64, true)
    };
    TokenizationMetrics {
        flows,
        chars,
        tokens,
        compression_ratio: ratio,
        ratio_defined: defined,
        elapsed,
    }
}

/// Encodes records to a corpus file in one pass, writing IDs as they are
/// produced, and returns the run's metrics.
pub fn encode_corpus<'a, I>(
    records: I,
    schema: &SchemaConfig,
    vocab: &Vocabulary,
    out: &Path,
) -> Result<TokenizationMetrics>
where
    I: IntoIterator<Item = &'a FlowRecord>,
{
    let start = Instant::now();
    let mut encoder = RowEncoder::new(schema, vocab)?;
    let file = File::create(out).map_err(|e| Error::io(out, e))?;
    let mut writer = BufWriter::new(file);

    let mut header = CorpusHeader {
        version: CORPUS_VERSION,
        vocab_checksum: vocab.checksum(),
        flows: 0,
        tokens: 0,
        chars: 0,
    };
    writer
        .write_all(&header.to_bytes())
        .map_err(|e| Error::io(out, e))?;

    let mut ids: Vec<TokenId> = Vec::new();
    for (row, record) in records.into_iter().enumerate() {
        ids.clear();
        let chars = encoder
            .encode_into(record, &mut ids)
            .map_err(|e| Error::EncodeRow {
                row: row as u64,
                source: Box::new(e),
            })?;
        for id in &ids {
            writer
                .write_all(&id.to_i64().to_le_bytes())
                .map_err(|e| Error::io(out, e))?;
        }
        header.flows += 1;
        header.tokens += ids.len() as u64;
        header.chars += chars;
    }

    let mut file = writer.into_inner().map_err(|e| Error::io(out, e.into_error()))?;
    file.seek(SeekFrom::Start(0)).map_err(|e| Error::io(out, e))?;
    file.write_all(&header.to_bytes()).map_err(|e| Error::io(out, e))?;
    file.flush().map_err(|e| Error::io(out, e))?;

    Ok(compute_metrics(header.chars, header.tokens, header.flows, start.elapsed()))
}

/// Streams token IDs back out of a corpus file.
#[derive(Debug)]
pub struct CorpusReader {
    path: PathBuf,
    reader: BufReader<File>,
    remaining: u64,
    offset: u64,
}

impl Iterator for CorpusReader {
    type Item = Result<TokenId>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.remaining == 0 {
            return None;
        }
        let mut buf = [0u8; 8];
        if let Err(e) = self.reader.read_exact(&mut buf) {
            self.remaining = 0;
            return Some(Err(Error::io(&self.path, e)));
        }
        self.remaining -= 1;
        let at = self.offset;
        self.offset += 1;
        let raw = i64::from_le_bytes(buf);
        Some(TokenId::from_i64(raw).ok_or(Error::MalformedStream {
            offset: at,
            message: format!("token id {raw} out of range"),
        }))
    }
}

/// Opens a corpus file, validates magic, version and size, and returns the
/// header plus an ID stream yielding exactly `header.tokens` IDs.
pub fn read_corpus(path: impl AsRef<Path>) -> Result<(CorpusHeader, CorpusReader)> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let file_len = file.metadata().map_err(|e| Error::io(path, e))?.len();
    if file_len < HEADER_LEN {
        return Err(Error::Truncation {
            path: path.to_path_buf(),
            expected_bytes: HEADER_LEN,
            found_bytes: file_len,
        });
    }
    let mut reader = BufReader::new(file);
    let mut head = [0u8; HEADER_LEN as usize];
    reader.read_exact(&mut head).map_err(|e| Error::io(path, e))?;
    let header = CorpusHeader::from_bytes(path, &head)?;

    let expected = HEADER_LEN + 8 * header.tokens;
    if file_len != expected {
        return Err(Error::Truncation {
            path: path.to_path_buf(),
            expected_bytes: expected,
            found_bytes: file_len,
        });
    }
    Ok((
        header,
        CorpusReader {
            path: path.to_path_buf(),
            reader,
            remaining: header.tokens,
            offset: 0,
        },
    ))
}

/// Reads a whole corpus into memory.
pub fn read_corpus_ids(path: impl AsRef<Path>) -> Result<(CorpusHeader, Vec<TokenId>)> {
    let (header, reader) = read_corpus(path)?;
    let ids = reader.collect::<Result<Vec<_>>>()?;
    Ok((header, ids))
}
