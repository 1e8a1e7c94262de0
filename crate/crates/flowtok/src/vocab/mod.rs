//! The hybrid vocabulary: fixed structural and categorical tokens first,
//! then per-group subword alphabets and learned merge rules.
//!
//! Token IDs are dense and assigned in construction order: all fixed tokens
//! (structural tokens in column order, the row terminator, then categorical
//! tokens per column in schema order), followed, for each group as it is
//! trained, by that group's alphabet characters in first-seen order and its
//! merged symbols in training order. A symbol string that already has an ID
//! is never assigned a second one.

mod file;
mod trainer;

pub use trainer::{GroupTrainReport, MergeStep};

use std::collections::{HashMap, HashSet};
use std::fmt;

use crate::error::{Error, Result};
use crate::ingest::FlowRecord;
use crate::schema::{BpeGroup, SchemaConfig, TokenClass};

/// Index into the vocabulary. Dense, contiguous, 0-based; written to corpus
/// files as a little-endian signed 64-bit integer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TokenId(u32);

impl TokenId {
    pub fn as_u32(self) -> u32 {
        self.0
    }

    pub fn as_usize(self) -> usize {
        self.0 as usize
    }

    pub fn to_i64(self) -> i64 {
        i64::from(self.0)
    }

    pub fn from_i64(id: i64) -> Option<TokenId> {
        u32::try_from(id).ok().map(TokenId)
    }

    pub(crate) fn from_usize(id: usize) -> TokenId {
        TokenId(u32::try_from(id).expect("vocabulary exceeds u32 ids"))
    }
}

impl fmt::Display for TokenId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// One learned merge: `left ++ right -> merged`, with its creation rank
/// within the group.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MergeRule {
    pub left: String,
    pub right: String,
    pub merged: String,
    pub rank: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub(crate) struct GroupVocab {
    pub(crate) trained: bool,
    pub(crate) alphabet: Vec<char>,
    pub(crate) alphabet_set: HashSet<char>,
    pub(crate) merges: Vec<MergeRule>,
    /// Encoder index: rule pair ids -> ranks holding that pair, ascending.
    /// A pair can own several ranks when a later merge re-creates a symbol
    /// string and the pair is learned again.
    pub(crate) pair_ranks: HashMap<(TokenId, TokenId), Vec<u32>>,
    /// Per rank: (left id, right id, merged id).
    pub(crate) rule_ids: Vec<(TokenId, TokenId, TokenId)>,
}

/// The hybrid token table with its bidirectional id <-> string maps.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    pub(crate) fixed_tokens: Vec<String>,
    pub(crate) groups: [GroupVocab; BpeGroup::COUNT],
    pub(crate) symbols: Vec<String>,
    pub(crate) ids: HashMap<String, TokenId>,
}

impl Vocabulary {
    /// Initializes the vocabulary with all fixed tokens: structural tokens in
    /// column order, the row terminator, then every categorical token per
    /// column in schema order. Alphabets and merges start empty.
    pub fn init_fixed(schema: &SchemaConfig) -> Vocabulary {
        let mut vocab = Vocabulary {
            fixed_tokens: Vec::new(),
            groups: Default::default(),
            symbols: Vec::new(),
            ids: HashMap::new(),
        };
        for col in schema.columns() {
            vocab.intern_fixed(col.structural_token.clone());
        }
        vocab.intern_fixed(schema.row_terminator().to_string());
        for col in schema.columns() {
            if let TokenClass::Categorical(set) = &col.class {
                for token in set.tokens() {
                    vocab.intern_fixed(token.clone());
                }
            }
        }
        vocab
    }

    fn intern_fixed(&mut self, token: String) {
        if !self.ids.contains_key(&token) {
            self.fixed_tokens.push(token.clone());
            self.intern(token);
        }
    }

    /// Assigns the next ID to `symbol` unless it already has one.
    pub(crate) fn intern(&mut self, symbol: String) -> TokenId {
        if let Some(&id) = self.ids.get(&symbol) {
            return id;
        }
        let id = TokenId::from_usize(self.symbols.len());
        self.ids.insert(symbol.clone(), id);
        self.symbols.push(symbol);
        id
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    /// Number of fixed tokens (they occupy the lowest ID range).
    pub fn fixed_len(&self) -> usize {
        self.fixed_tokens.len()
    }

    pub fn fixed_tokens(&self) -> &[String] {
        &self.fixed_tokens
    }

    pub fn id_of(&self, symbol: &str) -> Option<TokenId> {
        self.ids.get(symbol).copied()
    }

    pub fn string_of(&self, id: TokenId) -> Option<&str> {
        self.symbols.get(id.as_usize()).map(String::as_str)
    }

    /// All symbol strings, indexed by ID.
    pub fn symbols(&self) -> &[String] {
        &self.symbols
    }

    pub fn is_trained(&self, group: BpeGroup) -> bool {
        self.groups[group.index()].trained
    }

    pub fn alphabet(&self, group: BpeGroup) -> &[char] {
        &self.groups[group.index()].alphabet
    }

    pub fn merges(&self, group: BpeGroup) -> &[MergeRule] {
        &self.groups[group.index()].merges
    }

    pub(crate) fn group_index(&self, group: BpeGroup) -> &GroupVocab {
        &self.groups[group.index()]
    }

    /// SHA-256 of the canonical serialized form. The corpus header embeds
    /// this so a corpus can only be decoded with the vocabulary that wrote it.
    pub fn checksum(&self) -> [u8; 32] {
        file::checksum(self)
    }

    pub fn save(&self, path: impl AsRef<std::path::Path>) -> Result<()> {
        file::save(self, path.as_ref())
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Vocabulary> {
        file::load(path.as_ref())
    }

    /// Trains one group's merge rules from an ordered set of unique values,
    /// each counted once. See [`Vocabulary::train_group_weighted`].
    pub fn train_group(
        &mut self,
        group: BpeGroup,
        values: &[String],
        n_merges: u32,
    ) -> Result<GroupTrainReport> {
        let weighted: Vec<(&str, u64)> = values.iter().map(|v| (v.as_str(), 1)).collect();
        trainer::train(self, group, &weighted, n_merges)
    }

    /// Trains one group with explicit per-value weights (corpus frequencies).
    pub fn train_group_weighted(
        &mut self,
        group: BpeGroup,
        values: &[(String, u64)],
        n_merges: u32,
    ) -> Result<GroupTrainReport> {
        let weighted: Vec<(&str, u64)> = values.iter().map(|(v, w)| (v.as_str(), *w)).collect();
        trainer::train(self, group, &weighted, n_merges)
    }

    /// Rebuilds a group's encoder index from its merge list. Called after
    /// training and after loading from disk.
    pub(crate) fn build_group_index(&mut self, group: BpeGroup) {
        let resolved: Vec<(TokenId, TokenId, TokenId)> = self.groups[group.index()]
            .merges
            .iter()
            .map(|rule| {
                let id = |s: &str| self.ids[s];
                (id(&rule.left), id(&rule.right), id(&rule.merged))
            })
            .collect();
        let g = &mut self.groups[group.index()];
        g.pair_ranks.clear();
        for (rank, &(l, r, _)) in resolved.iter().enumerate() {
            g.pair_ranks.entry((l, r)).or_default().push(rank as u32);
        }
        g.rule_ids = resolved;
    }

    /// Checks that every group used by the schema is trained.
    pub fn require_trained(&self, schema: &SchemaConfig) -> Result<()> {
        for group in schema.groups_in_use() {
            if !self.is_trained(group) {
                return Err(Error::GroupNotTrained { group });
            }
        }
        Ok(())
    }
}

/// Distinct field strings across all columns of `group`, in first-occurrence
/// order (scanning records in order, columns in schema order within a record).
pub fn collect_unique_values(
    records: &[FlowRecord],
    schema: &SchemaConfig,
    group: BpeGroup,
) -> Vec<String> {
    collect_value_counts(records, schema, group)
        .into_iter()
        .map(|(v, _)| v)
        .collect()
}

/// Like [`collect_unique_values`] but keeps how often each value occurred.
pub fn collect_value_counts(
    records: &[FlowRecord],
    schema: &SchemaConfig,
    group: BpeGroup,
) -> Vec<(String, u64)> {
    let cols: Vec<usize> = schema
        .columns()
        .iter()
        .enumerate()
        .filter(|(_, c)| c.group() == Some(group))
        .map(|(i, _)| i)
        .collect();
    let mut seen: HashMap<String, usize> = HashMap::new();
    let mut out: Vec<(String, u64)> = Vec::new();
    for record in records {
        for &i in &cols {
            let value = &record.values[i];
            match seen.get(value) {
                Some(&slot) => out[slot].1 += 1,
                None => {
                    seen.insert(value.clone(), out.len());
                    out.push((value.clone(), 1));
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schema::SchemaConfig;

    fn mini_schema(text: &str) -> SchemaConfig {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.schema");
        std::fs::write(&path, text).unwrap();
        SchemaConfig::load(&path).unwrap()
    }

    #[test]
    fn cidds_vocab_token_zero_is_srcip() {
        let schema = SchemaConfig::cidds001();
        let vocab = Vocabulary::init_fixed(&schema);
        assert_eq!(vocab.string_of(TokenId(0)), Some("<|SRCIP|>"));
        assert_eq!(vocab.id_of("<|SRCIP|>"), Some(TokenId(0)));
        assert_eq!(vocab.id_of("<|ROW|>"), Some(TokenId(13)));
        assert_eq!(vocab.len(), vocab.fixed_len());
    }

    #[test]
    fn fixed_layout_follows_schema_order() {
        let schema = mini_schema(
            "version 1\n\
             timestamp ts format %s\n\
             column a token <|A|> values x y\n\
             column b token <|B|> group numeric\n\
             delta d token <|D|> group numeric\n",
        );
        let vocab = Vocabulary::init_fixed(&schema);
        assert_eq!(
            vocab.fixed_tokens(),
            ["<|A|>", "<|B|>", "<|D|>", "<|ROW|>", "<X>", "<Y>"]
        );
    }

    #[test]
    fn schema_without_categoricals_has_structural_tokens_only() {
        let schema = mini_schema(
            "version 1\n\
             timestamp ts format %s\n\
             column b token <|B|> group numeric\n\
             delta d token <|D|> group numeric\n",
        );
        let vocab = Vocabulary::init_fixed(&schema);
        assert_eq!(vocab.fixed_tokens(), ["<|B|>", "<|D|>", "<|ROW|>"]);
    }

    #[test]
    fn shared_categorical_token_gets_one_id() {
        // `normal` appears in both the class and attackType value sets of the
        // bundled schema; the <NORMAL> token must be interned exactly once.
        let schema = SchemaConfig::cidds001();
        let vocab = Vocabulary::init_fixed(&schema);
        let hits = vocab
            .fixed_tokens()
            .iter()
            .filter(|t| t.as_str() == "<NORMAL>")
            .count();
        assert_eq!(hits, 1);
    }

    #[test]
    fn bijection_holds_after_init() {
        let schema = SchemaConfig::cidds001();
        let vocab = Vocabulary::init_fixed(&schema);
        for (i, sym) in vocab.symbols().iter().enumerate() {
            assert_eq!(vocab.id_of(sym), Some(TokenId(i as u32)));
        }
        assert_eq!(vocab.ids.len(), vocab.symbols.len());
    }

    fn record(values: &[&str]) -> FlowRecord {
        FlowRecord {
            values: values.iter().map(|s| s.to_string()).collect(),
        }
    }

    #[test]
    fn unique_values_first_occurrence_order_across_columns() {
        let schema = mini_schema(
            "version 1\n\
             timestamp ts format %s\n\
             column src token <|S|> group ip\n\
             column dst token <|D2|> group ip\n\
             delta d token <|D|> group numeric\n",
        );
        let records = vec![
            record(&["A", "B", "nan"]),
            record(&["B", "C", "0.0"]),
            record(&["A", "C", "0.0"]),
        ];
        let values = collect_unique_values(&records, &schema, BpeGroup::IpAddress);
        assert_eq!(values, ["A", "B", "C"]);
    }

    #[test]
    fn unique_values_of_empty_stream_is_empty() {
        let schema = SchemaConfig::cidds001();
        assert!(collect_unique_values(&[], &schema, BpeGroup::Port).is_empty());
    }

    #[test]
    fn paper_example_row_numeric_values_dedup() {
        let schema = SchemaConfig::cidds001();
        let rec = record(&[
            "192.168.220.14",
            "49222",
            "192.168.100.5",
            "443",
            "TCP",
            "0.000",
            "0",
            "1",
            ".AP...",
            "1",
            "normal",
            "normal",
            "0.0",
        ]);
        let values = collect_unique_values(&[rec], &schema, BpeGroup::Numeric);
        assert_eq!(values, ["0.000", "0", "1", "0.0"]);
    }

    #[test]
    fn value_counts_track_frequency() {
        let schema = mini_schema(
            "version 1\n\
             timestamp ts format %s\n\
             column src token <|S|> group port\n\
             delta d token <|D|> group numeric\n",
        );
        let records = vec![
            record(&["80", "nan"]),
            record(&["443", "0.0"]),
            record(&["80", "0.0"]),
        ];
        let counts = collect_value_counts(&records, &schema, BpeGroup::Port);
        assert_eq!(counts, [("80".to_string(), 2), ("443".to_string(), 1)]);
    }
}
