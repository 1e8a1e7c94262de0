//! Row serialization and the lossless encode/decode paths.
//!
//! A row serializes to one linear string: each column's structural token
//! followed by its value (categorical values render as their fixed token,
//! subword values verbatim), terminated by the row token. Encoding maps that
//! string to token IDs; subword values are split to characters and the
//! group's merge rules are applied in rank order, each rule exhaustively
//! left-to-right before the next. Decoding walks the ID stream back to text,
//! splits rows on the terminator, and fields on the structural tokens, so
//! round-trip accuracy is plain string equality.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::ingest::FlowRecord;
use crate::schema::{BpeGroup, SchemaConfig, TokenClass};
use crate::vocab::{TokenId, Vocabulary};

/// Serializes one record to the linear text form.
pub fn serialize_row(record: &FlowRecord, schema: &SchemaConfig) -> Result<String> {
    debug_assert_eq!(record.values.len(), schema.columns().len());
    let mut out = String::new();
    for (col, value) in schema.columns().iter().zip(&record.values) {
        out.push_str(&col.structural_token);
        match &col.class {
            TokenClass::Subword(_) => out.push_str(value),
            TokenClass::Categorical(set) => {
                let token = set.token_for(value).ok_or_else(|| Error::UnknownCategory {
                    column: col.name.clone(),
                    value: value.clone(),
                })?;
                out.push_str(token);
            }
        }
    }
    out.push_str(schema.row_terminator());
    Ok(out)
}

/// Encodes one subword value: split to characters, then the group's merge
/// rules applied in rank order, each exhaustively left-to-right.
///
/// Implementation note: instead of scanning every rule, this walks a monotone
/// rank cursor and repeatedly applies the lowest-ranked rule whose pair is
/// present. Rules skipped over have no occurrence at the moment the plain
/// rank-order loop would reach them (nothing between the cursor and them
/// changed the segmentation), so the result is identical.
pub fn encode_value(value: &str, vocab: &Vocabulary, group: BpeGroup) -> Result<Vec<TokenId>> {
    if !vocab.is_trained(group) {
        return Err(Error::GroupNotTrained { group });
    }
    let mut buf = [0u8; 4];
    let mut seg: Vec<TokenId> = Vec::with_capacity(value.len());
    for (byte_offset, ch) in value.char_indices() {
        match vocab.id_of(ch.encode_utf8(&mut buf)) {
            Some(id) => seg.push(id),
            None => {
                return Err(Error::UnknownCharacter {
                    value: value.to_string(),
                    byte_offset,
                })
            }
        }
    }

    let index = vocab.group_index(group);
    let mut cursor: u32 = 0;
    while seg.len() >= 2 {
        let mut best: Option<u32> = None;
        for w in seg.windows(2) {
            if let Some(ranks) = index.pair_ranks.get(&(w[0], w[1])) {
                let at = ranks.partition_point(|&r| r < cursor);
                if let Some(&rank) = ranks.get(at) {
                    if best.is_none_or(|b| rank < b) {
                        best = Some(rank);
                    }
                }
            }
        }
        let Some(rank) = best else { break };
        let (left, right, merged) = index.rule_ids[rank as usize];
        apply_rule(&mut seg, left, right, merged);
        cursor = rank + 1;
    }
    Ok(seg)
}

/// One left-to-right pass replacing non-overlapping `(left, right)` pairs
/// with `merged`. A single pass is exhaustive for the rule: the merged symbol
/// is strictly longer than either side, so it can never re-form the pair.
fn apply_rule(seg: &mut Vec<TokenId>, left: TokenId, right: TokenId, merged: TokenId) {
    let mut out: Vec<TokenId> = Vec::with_capacity(seg.len());
    let mut i = 0;
    while i < seg.len() {
        if i + 1 < seg.len() && seg[i] == left && seg[i + 1] == right {
            out.push(merged);
            i += 2;
        } else {
            out.push(seg[i]);
            i += 1;
        }
    }
    *seg = out;
}

/// Encodes one record: structural-token ID, then the column's value IDs,
/// for every column, then the row-terminator ID.
pub fn encode_row(record: &FlowRecord, schema: &SchemaConfig, vocab: &Vocabulary) -> Result<Vec<TokenId>> {
    let mut encoder = RowEncoder::new(schema, vocab)?;
    let mut out = Vec::new();
    encoder.encode_into(record, &mut out)?;
    Ok(out)
}

/// Reusable row encoder. Caches per-value subword encodings, which makes
/// corpus encoding cheap on the heavily repeated values of flow data.
pub struct RowEncoder<'a> {
    schema: &'a SchemaConfig,
    vocab: &'a Vocabulary,
    structural_ids: Vec<TokenId>,
    terminator_id: TokenId,
    caches: [HashMap<String, Vec<TokenId>>; BpeGroup::COUNT],
}

impl<'a> RowEncoder<'a> {
    pub fn new(schema: &'a SchemaConfig, vocab: &'a Vocabulary) -> Result<RowEncoder<'a>> {
        vocab.require_trained(schema)?;
        let fixed_id = |token: &str| {
            vocab.id_of(token).ok_or_else(|| {
                Error::schema(format!(
                    "vocabulary has no id for fixed token {token:?}; it was not built from this schema"
                ))
            })
        };
        let structural_ids = schema
            .columns()
            .iter()
            .map(|c| fixed_id(&c.structural_token))
            .collect::<Result<_>>()?;
        let terminator_id = fixed_id(schema.row_terminator())?;
        Ok(RowEncoder {
            schema,
            vocab,
            structural_ids,
            terminator_id,
            caches: Default::default(),
        })
    }

    /// Appends the record's IDs to `out` and returns the character count of
    /// its serialized text form.
    pub fn encode_into(&mut self, record: &FlowRecord, out: &mut Vec<TokenId>) -> Result<u64> {
        debug_assert_eq!(record.values.len(), self.schema.columns().len());
        let mut chars = 0u64;
        for ((col, value), &structural_id) in self
            .schema
            .columns()
            .iter()
            .zip(&record.values)
            .zip(&self.structural_ids)
        {
            chars += col.structural_token.chars().count() as u64;
            out.push(structural_id);
            match &col.class {
                TokenClass::Categorical(set) => {
                    let token = set.token_for(value).ok_or_else(|| Error::UnknownCategory {
                        column: col.name.clone(),
                        value: value.clone(),
                    })?;
                    chars += token.chars().count() as u64;
                    out.push(self.vocab.id_of(token).ok_or_else(|| {
                        Error::schema(format!("vocabulary has no id for fixed token {token:?}"))
                    })?);
                }
                TokenClass::Subword(group) => {
                    chars += value.chars().count() as u64;
                    let cache = &mut self.caches[group.index()];
                    if let Some(ids) = cache.get(value) {
                        out.extend_from_slice(ids);
                    } else {
                        let ids = encode_value(value, self.vocab, *group)?;
                        out.extend_from_slice(&ids);
                        cache.insert(value.clone(), ids);
                    }
                }
            }
        }
        chars += self.schema.row_terminator().chars().count() as u64;
        out.push(self.terminator_id);
        Ok(chars)
    }
}

/// Decodes a full ID stream into records. See [`StreamDecoder`] for the
/// incremental equivalent.
pub fn decode(ids: &[TokenId], vocab: &Vocabulary, schema: &SchemaConfig) -> Result<Vec<FlowRecord>> {
    let mut decoder = StreamDecoder::new(vocab, schema)?;
    let mut records = Vec::new();
    for &id in ids {
        if let Some(record) = decoder.push(id)? {
            records.push(record);
        }
    }
    decoder.finish()?;
    Ok(records)
}

/// Incremental decoder: feed IDs, collect a record at each row terminator.
pub struct StreamDecoder<'a> {
    vocab: &'a Vocabulary,
    schema: &'a SchemaConfig,
    terminator_id: TokenId,
    row_text: String,
    row_start: u64,
    offset: u64,
}

impl<'a> StreamDecoder<'a> {
    pub fn new(vocab: &'a Vocabulary, schema: &'a SchemaConfig) -> Result<StreamDecoder<'a>> {
        let terminator_id = vocab.id_of(schema.row_terminator()).ok_or_else(|| {
            Error::schema(format!(
                "vocabulary has no id for row terminator {:?}",
                schema.row_terminator()
            ))
        })?;
        Ok(StreamDecoder {
            vocab,
            schema,
            terminator_id,
            row_text: String::new(),
            row_start: 0,
            offset: 0,
        })
    }

    /// Consumes one ID; returns a record when it closes a row.
    pub fn push(&mut self, id: TokenId) -> Result<Option<FlowRecord>> {
        let at = self.offset;
        self.offset += 1;
        if id == self.terminator_id {
            let text = std::mem::take(&mut self.row_text);
            let record = parse_row_text(&text, self.schema, self.row_start)?;
            self.row_start = self.offset;
            return Ok(Some(record));
        }
        match self.vocab.string_of(id) {
            Some(s) => self.row_text.push_str(s),
            None => {
                return Err(Error::MalformedStream {
                    offset: at,
                    message: format!("unknown token id {id}"),
                })
            }
        }
        Ok(None)
    }

    /// Verifies the stream ended on a row boundary.
    pub fn finish(&self) -> Result<()> {
        if self.row_text.is_empty() {
            Ok(())
        } else {
            Err(Error::MalformedStream {
                offset: self.offset,
                message: "stream ends mid-row (missing terminator)".to_string(),
            })
        }
    }
}

/// Splits one row's text (terminator already stripped) into field values,
/// following the schema's structural tokens in order.
fn parse_row_text(text: &str, schema: &SchemaConfig, offset: u64) -> Result<FlowRecord> {
    let malformed = |message: String| Error::MalformedStream { offset, message };
    let columns = schema.columns();
    let mut rest = text;
    let mut values = Vec::with_capacity(columns.len());
    for (i, col) in columns.iter().enumerate() {
        rest = rest.strip_prefix(col.structural_token.as_str()).ok_or_else(|| {
            malformed(format!(
                "expected structural token {} at {:?}...",
                col.structural_token,
                &rest[..rest.len().min(24)]
            ))
        })?;
        let field = match columns.get(i + 1) {
            Some(next) => {
                let pos = rest.find(next.structural_token.as_str()).ok_or_else(|| {
                    malformed(format!(
                        "structural token {} not found after column {:?}",
                        next.structural_token, col.name
                    ))
                })?;
                let (field, tail) = rest.split_at(pos);
                rest = tail;
                field
            }
            None => std::mem::take(&mut rest),
        };
        match &col.class {
            TokenClass::Subword(_) => values.push(field.to_string()),
            TokenClass::Categorical(set) => {
                let value = set.value_for(field).ok_or_else(|| {
                    malformed(format!(
                        "column {:?}: {field:?} is not a declared categorical token",
                        col.name
                    ))
                })?;
                values.push(value.to_string());
            }
        }
    }
    if !rest.is_empty() {
        return Err(malformed(format!(
            "trailing text {:?} after last column",
            &rest[..rest.len().min(24)]
        )));
    }
    Ok(FlowRecord { values })
}
