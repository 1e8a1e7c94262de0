//! Vocabulary persistence.
//!
//! Layout: one magic/version line, one checksum line, then a canonical JSON
//! payload. The checksum is the SHA-256 of the payload bytes and doubles as
//! the vocabulary identity embedded in corpus headers.

use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::schema::BpeGroup;

use super::{GroupVocab, MergeRule, TokenId, Vocabulary};

const MAGIC_LINE: &str = "flowtok-vocab 1";

#[derive(Serialize, Deserialize)]
struct Payload {
    fixed_tokens: Vec<String>,
    /// Every symbol string; the index is the token ID.
    symbols: Vec<String>,
    groups: Vec<GroupPayload>,
}

#[derive(Serialize, Deserialize)]
struct GroupPayload {
    group: String,
    trained: bool,
    /// Alphabet characters concatenated in first-seen order.
    alphabet: String,
    /// Ranked merges as (left, right); `merged` is their concatenation.
    merges: Vec<(String, String)>,
}

fn payload(vocab: &Vocabulary) -> Payload {
    Payload {
        fixed_tokens: vocab.fixed_tokens.clone(),
        symbols: vocab.symbols.clone(),
        groups: BpeGroup::ALL
            .iter()
            .map(|g| {
                let gv = &vocab.groups[g.index()];
                GroupPayload {
                    group: g.name().to_string(),
                    trained: gv.trained,
                    alphabet: gv.alphabet.iter().collect(),
                    merges: gv
                        .merges
                        .iter()
                        .map(|m| (m.left.clone(), m.right.clone()))
                        .collect(),
                }
            })
            .collect(),
    }
}

fn payload_bytes(vocab: &Vocabulary) -> Vec<u8> {
    serde_json::to_vec(&payload(vocab)).expect("vocabulary serializes")
}

pub(super) fn checksum(vocab: &Vocabulary) -> [u8; 32] {
    sha256(&payload_bytes(vocab))
}

fn sha256(bytes: &[u8]) -> [u8; 32] {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    hasher.finalize().into()
}

pub(crate) fn to_hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

pub(super) fn save(vocab: &Vocabulary, path: &Path) -> Result<()> {
    let body = payload_bytes(vocab);
    let mut out = Vec::with_capacity(body.len() + 96);
    out.extend_from_slice(MAGIC_LINE.as_bytes());
    out.push(b'\n');
    out.extend_from_slice(format!("sha256 {}\n", to_hex(&sha256(&body))).as_bytes());
    out.extend_from_slice(&body);
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

pub(super) fn load(path: &Path) -> Result<Vocabulary> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let version_err = |message: String| Error::FormatVersion {
        path: path.to_path_buf(),
        message,
    };

    let mut rest = &bytes[..];
    let magic = take_line(&mut rest)
        .ok_or_else(|| version_err("missing magic line".to_string()))?;
    if magic != MAGIC_LINE.as_bytes() {
        return Err(version_err(format!(
            "expected {MAGIC_LINE:?}, found {:?}",
            String::from_utf8_lossy(magic)
        )));
    }
    let checksum_line = take_line(&mut rest)
        .ok_or_else(|| version_err("missing checksum line".to_string()))?;
    let declared = std::str::from_utf8(checksum_line)
        .ok()
        .and_then(|l| l.strip_prefix("sha256 "))
        .ok_or_else(|| version_err("malformed checksum line".to_string()))?;
    let actual = to_hex(&sha256(rest));
    if declared != actual {
        return Err(Error::Checksum {
            path: path.to_path_buf(),
            message: format!("declared {declared}, computed {actual}"),
        });
    }

    let payload: Payload = serde_json::from_slice(rest).map_err(|e| Error::Checksum {
        path: path.to_path_buf(),
        message: format!("payload does not parse: {e}"),
    })?;
    rebuild(payload).map_err(|message| Error::Checksum {
        path: path.to_path_buf(),
        message,
    })
}

fn take_line<'a>(rest: &mut &'a [u8]) -> Option<&'a [u8]> {
    let pos = rest.iter().position(|&b| b == b'\n')?;
    let line = &rest[..pos];
    *rest = &rest[pos + 1..];
    Some(line)
}

fn rebuild(payload: Payload) -> std::result::Result<Vocabulary, String> {
    let mut ids = HashMap::with_capacity(payload.symbols.len());
    for (i, sym) in payload.symbols.iter().enumerate() {
        if ids.insert(sym.clone(), TokenId::from_usize(i)).is_some() {
            return Err(format!("symbol {sym:?} assigned two ids"));
        }
    }
    if payload.fixed_tokens.len() > payload.symbols.len()
        || payload.symbols[..payload.fixed_tokens.len()] != payload.fixed_tokens[..]
    {
        return Err("fixed tokens do not occupy the lowest id range".to_string());
    }
    if payload.groups.len() != BpeGroup::COUNT {
        return Err(format!("expected {} groups", BpeGroup::COUNT));
    }

    let mut groups: [GroupVocab; BpeGroup::COUNT] = Default::default();
    for (expected, gp) in BpeGroup::ALL.iter().zip(payload.groups) {
        if gp.group != expected.name() {
            return Err(format!("expected group {:?}, found {:?}", expected.name(), gp.group));
        }
        let alphabet: Vec<char> = gp.alphabet.chars().collect();
        for &ch in &alphabet {
            if !ids.contains_key(ch.to_string().as_str()) {
                return Err(format!("alphabet character {ch:?} has no id"));
            }
        }
        let mut merges = Vec::with_capacity(gp.merges.len());
        for (rank, (left, right)) in gp.merges.into_iter().enumerate() {
            let merged = format!("{left}{right}");
            if !ids.contains_key(merged.as_str()) {
                return Err(format!("merged symbol {merged:?} has no id"));
            }
            merges.push(MergeRule {
                left,
                right,
                merged,
                rank: rank as u32,
            });
        }
        groups[expected.index()] = GroupVocab {
            trained: gp.trained,
            alphabet_set: alphabet.iter().copied().collect(),
            alphabet,
            merges,
            pair_ranks: Default::default(),
            rule_ids: Vec::new(),
        };
    }

    let mut vocab = Vocabulary {
        fixed_tokens: payload.fixed_tokens,
        groups,
        symbols: payload.symbols,
        ids,
    };
    for group in BpeGroup::ALL {
        vocab.build_group_index(group);
    }
    Ok(vocab)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schema::SchemaConfig;

    fn trained_vocab() -> Vocabulary {
        let schema = SchemaConfig::cidds001();
        let mut vocab = Vocabulary::init_fixed(&schema);
        let ips: Vec<String> = vec!["192.168.0.1".into(), "192.168.0.2".into(), "10.0.0.1".into()];
        vocab.train_group(BpeGroup::IpAddress, &ips, 10).unwrap();
        let ports: Vec<String> = vec!["80".into(), "8080".into(), "443".into()];
        vocab.train_group(BpeGroup::Port, &ports, 5).unwrap();
        let nums: Vec<String> = vec!["nan".into(), "0.0".into(), "0.000".into(), "1".into()];
        vocab.train_group(BpeGroup::Numeric, &nums, 5).unwrap();
        vocab
    }

    #[test]
    fn save_load_round_trips_exactly() {
        let vocab = trained_vocab();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("v.fv");
        vocab.save(&path).unwrap();
        let loaded = Vocabulary::load(&path).unwrap();
        assert_eq!(vocab, loaded);
        assert_eq!(vocab.checksum(), loaded.checksum());
    }

    #[test]
    fn truncated_file_is_detected() {
        let vocab = trained_vocab();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("v.fv");
        vocab.save(&path).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        std::fs::write(&path, &bytes[..bytes.len() - 9]).unwrap();
        let err = Vocabulary::load(&path).unwrap_err();
        assert!(
            matches!(err, Error::Checksum { .. } | Error::FormatVersion { .. }),
            "{err}"
        );
    }

    #[test]
    fn wrong_magic_is_a_version_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("v.fv");
        std::fs::write(&path, "some other file\n").unwrap();
        let err = Vocabulary::load(&path).unwrap_err();
        assert!(matches!(err, Error::FormatVersion { .. }), "{err}");
    }

    #[test]
    fn tampered_payload_fails_the_checksum() {
        let vocab = trained_vocab();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("v.fv");
        vocab.save(&path).unwrap();
        let mut bytes = std::fs::read(&path).unwrap();
        let last = bytes.len() - 2;
        bytes[last] = bytes[last].wrapping_add(1);
        std::fs::write(&path, bytes).unwrap();
        let err = Vocabulary::load(&path).unwrap_err();
        assert!(matches!(err, Error::Checksum { .. }), "{err}");
    }

    #[test]
    fn saved_bytes_are_deterministic() {
        let a = trained_vocab();
        let b = trained_vocab();
        let dir = tempfile::tempdir().unwrap();
        let pa = dir.path().join("a.fv");
        let pb = dir.path().join("b.fv");
        a.save(&pa).unwrap();
        b.save(&pb).unwrap();
        assert_eq!(std::fs::read(&pa).unwrap(), std::fs::read(&pb).unwrap());
    }
}
