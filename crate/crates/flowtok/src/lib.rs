//! flowtok: a schema-driven hybrid tokenizer for tabular flow records.
//!
//! Tabular rows are serialized into one linear string per row — a structural
//! token before each value, categorical values as fixed tokens, a terminator
//! at the end — and encoded into a continuous sequence of token IDs. Fixed
//! tokens cover structure and low-cardinality columns; high-cardinality
//! columns (IP addresses, ports, numerics) use subword merge rules trained
//! per column group. Decoding reverses the whole thing losslessly.
//!
//! The pipeline has five stages, each usable as a library call, a CLI
//! subcommand, or a runnable example (see `examples/`):
//!
//! 1. [`synth`] — deterministic NetFlow-shaped CSV for desk-scale runs
//! 2. [`ingest`] — aggregate CSVs, sort chronologically, engineer DeltaTime
//! 3. [`vocab`] — fixed tokens plus per-group BPE merge training
//! 4. [`codec`] — serialize, encode, decode
//! 5. [`corpus`] — the binary token-ID corpus file and its metrics
//!
//! ```
//! use flowtok::prelude::*;
//!
//! let schema = SchemaConfig::cidds001();
//! let record = FlowRecord {
//!     values: ["192.168.220.14", "49222", "192.168.100.5", "443", "TCP",
//!              "0.000", "0", "1", ".AP...", "1", "normal", "normal", "0.0"]
//!         .iter().map(|s| s.to_string()).collect(),
//! };
//!
//! let mut vocab = Vocabulary::init_fixed(&schema);
//! for group in BpeGroup::ALL {
//!     let values = collect_unique_values(std::slice::from_ref(&record), &schema, group);
//!     vocab.train_group(group, &values, 10)?;
//! }
//!
//! let ids = encode_row(&record, &schema, &vocab)?;
//! let back = decode(&ids, &vocab, &schema)?;
//! assert_eq!(back, vec![record]);
//! # Ok::<(), flowtok::Error>(())
//! ```

pub mod codec;
pub mod corpus;
mod error;
pub mod ingest;
pub mod pipeline;
pub mod records;
pub mod schema;
pub mod synth;
pub mod vocab;

pub use error::{Error, Result};

/// The common types and functions, one `use` away.
pub mod prelude {
    pub use crate::codec::{decode, encode_row, encode_value, serialize_row, RowEncoder, StreamDecoder};
    pub use crate::corpus::{
        compute_metrics, encode_corpus, read_corpus, read_corpus_ids, TokenizationMetrics,
    };
    pub use crate::error::{Error, Result};
    pub use crate::ingest::{engineer_delta_time, load_csv, prepare, sort_chronological, FlowRecord};
    pub use crate::records::{read_records, write_records};
    pub use crate::schema::{BpeGroup, ColumnSpec, SchemaConfig, TokenClass};
    pub use crate::synth::{write_synthetic_csv, SynthConfig};
    pub use crate::vocab::{collect_unique_values, MergeRule, TokenId, Vocabulary};
}
