//! BPE training for one group.
//!
//! Counting convention: every adjacent index pair in the current segmentation
//! counts, so `"aaa"` contributes 2 to `("a","a")`. Applying a merge replaces
//! occurrences greedily left-to-right without overlap. Ties on frequency go
//! to the lexicographically smallest `(left, right)` string pair. Training
//! stops early once the best pair occurs fewer than twice.

use std::collections::{HashMap, HashSet};

use crate::error::{Error, Result};
use crate::schema::BpeGroup;

use super::{MergeRule, TokenId, Vocabulary};

/// Local symbol index for one training run.
type Sym = u32;
type Pair = (Sym, Sym);

/// One merge decision as it happened, plus the corpus state after it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MergeStep {
    pub rank: u32,
    pub left: String,
    pub right: String,
    pub merged: String,
    /// Adjacent-pair frequency at selection time (weighted if training was).
    pub frequency: u64,
    /// Total symbols across the training values after applying the merge.
    pub tokens_after: u64,
    /// Vocabulary size after interning the merged symbol.
    pub vocab_size_after: usize,
}

/// Everything a training run produced, for logs and diagnostics.
#[derive(Debug, Clone)]
pub struct GroupTrainReport {
    pub group: BpeGroup,
    pub unique_values: usize,
    pub alphabet_size: usize,
    /// Total symbols across the training values before any merge.
    pub initial_tokens: u64,
    /// Vocabulary size after interning the alphabet, before any merge.
    pub vocab_size_after_alphabet: usize,
    pub steps: Vec<MergeStep>,
    /// True when training stopped before `n_merges` because no pair occurred
    /// at least twice.
    pub early_stopped: bool,
    /// Final segmentation of each training value, as token IDs.
    pub final_segmentations: Vec<Vec<TokenId>>,
}

impl GroupTrainReport {
    pub fn tokens_after_last_step(&self) -> u64 {
        self.steps.last().map_or(self.initial_tokens, |s| s.tokens_after)
    }
}

pub(super) fn train(
    vocab: &mut Vocabulary,
    group: BpeGroup,
    values: &[(&str, u64)],
    n_merges: u32,
) -> Result<GroupTrainReport> {
    if vocab.groups[group.index()].trained {
        return Err(Error::GroupAlreadyTrained { group });
    }

    // Alphabet in first-seen order. Characters that could collide with fixed
    // token syntax are rejected outright; they would make decoding ambiguous.
    let mut alphabet: Vec<char> = Vec::new();
    let mut alphabet_set: HashSet<char> = HashSet::new();
    for (value, _) in values {
        for ch in value.chars() {
            if matches!(ch, '<' | '>' | '|') {
                return Err(Error::ForbiddenAlphabetChar {
                    group,
                    ch,
                    value: value.to_string(),
                });
            }
            if alphabet_set.insert(ch) {
                alphabet.push(ch);
            }
        }
    }
    for &ch in &alphabet {
        vocab.intern(ch.to_string());
    }
    let vocab_size_after_alphabet = vocab.len();

    // Local symbol table seeded with the alphabet.
    let mut sym_strings: Vec<String> = alphabet.iter().map(|c| c.to_string()).collect();
    let mut sym_ids: HashMap<String, Sym> = sym_strings
        .iter()
        .enumerate()
        .map(|(i, s)| (s.clone(), i as Sym))
        .collect();

    let mut segs: Vec<Vec<Sym>> = values
        .iter()
        .map(|(value, _)| {
            value
                .chars()
                .map(|c| {
                    let mut buf = [0u8; 4];
                    sym_ids[c.encode_utf8(&mut buf) as &str]
                })
                .collect()
        })
        .collect();
    let weights: Vec<u64> = values.iter().map(|(_, w)| *w).collect();
    let mut total_tokens: u64 = segs
        .iter()
        .zip(&weights)
        .map(|(s, w)| s.len() as u64 * w)
        .sum();

    // Weighted adjacent-pair counts plus, per pair, the values containing it.
    let mut counts: HashMap<Pair, u64> = HashMap::new();
    let mut occurs_in: HashMap<Pair, HashSet<usize>> = HashMap::new();
    for (idx, seg) in segs.iter().enumerate() {
        for w in seg.windows(2) {
            let pair = (w[0], w[1]);
            *counts.entry(pair).or_default() += weights[idx];
            occurs_in.entry(pair).or_default().insert(idx);
        }
    }

    let mut steps: Vec<MergeStep> = Vec::new();
    let mut early_stopped = false;
    for rank in 0..n_merges {
        let Some((pair, frequency)) = select_pair(&counts, &sym_strings) else {
            early_stopped = true;
            break;
        };

        let merged_string = format!("{}{}", sym_strings[pair.0 as usize], sym_strings[pair.1 as usize]);
        let merged_sym = match sym_ids.get(&merged_string) {
            Some(&s) => s,
            None => {
                let s = sym_strings.len() as Sym;
                sym_strings.push(merged_string.clone());
                sym_ids.insert(merged_string.clone(), s);
                s
            }
        };
        vocab.intern(merged_string.clone());

        let touched: HashSet<usize> = occurs_in.remove(&pair).unwrap_or_default();
        for idx in touched {
            let (applied, deltas) = apply_merge(&mut segs[idx], pair, merged_sym);
            total_tokens -= applied * weights[idx];
            for (p, delta) in deltas {
                let entry = counts.entry(p).or_default();
                let change = delta.unsigned_abs() * weights[idx];
                if delta > 0 {
                    *entry += change;
                    occurs_in.entry(p).or_default().insert(idx);
                } else {
                    *entry -= change;
                }
            }
        }
        counts.remove(&pair);
        counts.retain(|_, c| *c > 0);

        let rule = MergeRule {
            left: sym_strings[pair.0 as usize].clone(),
            right: sym_strings[pair.1 as usize].clone(),
            merged: merged_string.clone(),
            rank,
        };
        steps.push(MergeStep {
            rank,
            left: rule.left.clone(),
            right: rule.right.clone(),
            merged: merged_string,
            frequency,
            tokens_after: total_tokens,
            vocab_size_after: vocab.len(),
        });
        vocab.groups[group.index()].merges.push(rule);
    }

    let final_segmentations = segs
        .iter()
        .map(|seg| {
            seg.iter()
                .map(|&s| {
                    vocab
                        .id_of(&sym_strings[s as usize])
                        .expect("trained symbol is interned")
                })
                .collect()
        })
        .collect();

    let g = &mut vocab.groups[group.index()];
    g.trained = true;
    g.alphabet = alphabet;
    g.alphabet_set = alphabet_set;
    vocab.build_group_index(group);

    Ok(GroupTrainReport {
        group,
        unique_values: values.len(),
        alphabet_size: vocab.groups[group.index()].alphabet.len(),
        initial_tokens: values
            .iter()
            .map(|(v, w)| v.chars().count() as u64 * w)
            .sum(),
        vocab_size_after_alphabet,
        steps,
        early_stopped,
        final_segmentations,
    })
}

/// Picks the pair with the highest count, requiring count >= 2; ties break on
/// the lexicographically smallest `(left, right)` string pair.
fn select_pair(counts: &HashMap<Pair, u64>, sym_strings: &[String]) -> Option<(Pair, u64)> {
    let mut best: Option<(Pair, u64)> = None;
    for (&pair, &count) in counts {
        if count < 2 {
            continue;
        }
        best = match best {
            None => Some((pair, count)),
            Some((bp, bc)) => {
                if count > bc || (count == bc && lex_key(pair, sym_strings) < lex_key(bp, sym_strings))
                {
                    Some((pair, count))
                } else {
                    Some((bp, bc))
                }
            }
        };
    }
    best
}

fn lex_key<'a>(pair: Pair, sym_strings: &'a [String]) -> (&'a str, &'a str) {
    (&sym_strings[pair.0 as usize], &sym_strings[pair.1 as usize])
}

/// Replaces occurrences of `pair` with `merged` left-to-right without
/// overlap. Returns the number of replacements and the adjacent-pair count
/// deltas caused by them (unweighted).
fn apply_merge(seg: &mut Vec<Sym>, pair: Pair, merged: Sym) -> (u64, Vec<(Pair, i64)>) {
    let n = seg.len();
    if n < 2 {
        return (0, Vec::new());
    }
    let (a, b) = pair;
    let mut out: Vec<Sym> = Vec::with_capacity(n);
    let mut deltas: Vec<(Pair, i64)> = Vec::new();
    let mut applied = 0u64;
    let mut i = 0;
    while i < n {
        if i + 1 < n && seg[i] == a && seg[i + 1] == b {
            if let Some(&prev) = out.last() {
                deltas.push(((prev, a), -1));
                deltas.push(((prev, merged), 1));
            }
            deltas.push(((a, b), -1));
            if i + 2 < n {
                let next = seg[i + 2];
                deltas.push(((b, next), -1));
                deltas.push(((merged, next), 1));
            }
            out.push(merged);
            applied += 1;
            i += 2;
        } else {
            out.push(seg[i]);
            i += 1;
        }
    }
    *seg = out;
    (applied, deltas)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schema::SchemaConfig;

    fn fresh_vocab() -> Vocabulary {
        Vocabulary::init_fixed(&SchemaConfig::cidds001())
    }

    fn strings(items: &[&str]) -> Vec<String> {
        items.iter().map(|s| s.to_string()).collect()
    }

    fn merge_pairs(vocab: &Vocabulary, group: BpeGroup) -> Vec<(String, String)> {
        vocab
            .merges(group)
            .iter()
            .map(|m| (m.left.clone(), m.right.clone()))
            .collect()
    }

    #[test]
    fn aaab_aaac_learns_aa_then_aaa() {
        let mut vocab = fresh_vocab();
        let report = vocab
            .train_group(BpeGroup::Numeric, &strings(&["aaab", "aaac"]), 2)
            .unwrap();
        assert_eq!(
            merge_pairs(&vocab, BpeGroup::Numeric),
            [
                ("a".to_string(), "a".to_string()),
                ("aa".to_string(), "a".to_string()),
            ]
        );
        assert_eq!(report.steps[0].frequency, 4);
        assert_eq!(report.steps[0].merged, "aa");
        assert_eq!(report.steps[1].frequency, 2);
        assert_eq!(report.steps[1].merged, "aaa");
        assert!(!report.early_stopped);
    }

    #[test]
    fn early_stop_once_no_pair_repeats() {
        let mut vocab = fresh_vocab();
        let report = vocab
            .train_group(BpeGroup::Numeric, &strings(&["ab", "abc"]), 5)
            .unwrap();
        // ("a","b") occurs twice and merges; afterwards ("ab","c") occurs
        // once, which cannot compress, so training stops at 1 merge.
        assert_eq!(report.steps.len(), 1);
        assert_eq!(report.steps[0].merged, "ab");
        assert!(report.early_stopped);
    }

    #[test]
    fn lone_pair_is_below_the_merge_threshold() {
        let mut vocab = fresh_vocab();
        let report = vocab.train_group(BpeGroup::Numeric, &strings(&["ab"]), 5).unwrap();
        assert!(report.steps.is_empty());
        assert!(report.early_stopped);
        assert_eq!(vocab.alphabet(BpeGroup::Numeric), ['a', 'b']);
    }

    #[test]
    fn zero_merges_yields_alphabet_only() {
        let mut vocab = fresh_vocab();
        let before = vocab.len();
        let report = vocab
            .train_group(BpeGroup::Port, &strings(&["80", "8080"]), 0)
            .unwrap();
        assert!(report.steps.is_empty());
        assert!(!report.early_stopped);
        assert_eq!(vocab.alphabet(BpeGroup::Port), ['8', '0']);
        assert_eq!(vocab.len(), before + 2);
        assert!(vocab.is_trained(BpeGroup::Port));
    }

    #[test]
    fn retraining_a_group_is_rejected() {
        let mut vocab = fresh_vocab();
        vocab.train_group(BpeGroup::Port, &strings(&["80"]), 1).unwrap();
        let err = vocab
            .train_group(BpeGroup::Port, &strings(&["443"]), 1)
            .unwrap_err();
        assert!(matches!(err, Error::GroupAlreadyTrained { group: BpeGroup::Port }));
    }

    #[test]
    fn cross_group_symbols_reuse_token_ids() {
        let mut vocab = fresh_vocab();
        vocab
            .train_group(BpeGroup::IpAddress, &strings(&["1.1", "1.2"]), 2)
            .unwrap();
        let before = vocab.len();
        // Port group re-uses digits '1' and '2' and re-creates the merged
        // symbol "1.1"? No: ports have no dots. Use plain digit reuse.
        vocab.train_group(BpeGroup::Port, &strings(&["11", "12"]), 1).unwrap();
        // '1' and '2' already interned; only the merged "11" may be new.
        assert!(vocab.len() <= before + 1);
        for (i, sym) in vocab.symbols().iter().enumerate() {
            assert_eq!(vocab.id_of(sym).map(|t| t.as_usize()), Some(i));
        }
    }

    #[test]
    fn ties_break_lexicographically() {
        let mut vocab = fresh_vocab();
        // "zx" and "ay" both occur twice; (a,y) < (z,x) lexicographically.
        vocab
            .train_group(BpeGroup::Numeric, &strings(&["zxay", "ayzx"]), 1)
            .unwrap();
        let merges = merge_pairs(&vocab, BpeGroup::Numeric);
        assert_eq!(merges, [("a".to_string(), "y".to_string())]);
    }

    #[test]
    fn forbidden_characters_fail_training() {
        let mut vocab = fresh_vocab();
        let err = vocab
            .train_group(BpeGroup::Numeric, &strings(&["1<2"]), 1)
            .unwrap_err();
        assert!(matches!(err, Error::ForbiddenAlphabetChar { ch: '<', .. }));
    }

    #[test]
    fn merge_count_capped_and_token_counts_decrease() {
        let mut vocab = fresh_vocab();
        let values = strings(&["10.0.0.1", "10.0.0.2", "10.0.1.1", "10.1.0.1"]);
        let report = vocab.train_group(BpeGroup::IpAddress, &values, 3).unwrap();
        assert!(report.steps.len() <= 3);
        let mut prev = report.initial_tokens;
        for step in &report.steps {
            assert!(step.tokens_after < prev);
            prev = step.tokens_after;
        }
    }

    #[test]
    fn weighted_training_prefers_frequent_values() {
        let mut unweighted = fresh_vocab();
        unweighted
            .train_group(BpeGroup::Port, &strings(&["888", "12", "13", "14"]), 1)
            .unwrap();
        // Unweighted: ("8","8") count 2 beats ("1","2")/("1","3")/("1","4") count 1 each.
        assert_eq!(
            merge_pairs(&unweighted, BpeGroup::Port)[0],
            ("8".to_string(), "8".to_string())
        );

        let mut weighted = fresh_vocab();
        weighted
            .train_group_weighted(
                BpeGroup::Port,
                &[
                    ("888".to_string(), 1),
                    ("12".to_string(), 50),
                    ("13".to_string(), 1),
                    ("14".to_string(), 1),
                ],
                1,
            )
            .unwrap();
        assert_eq!(
            merge_pairs(&weighted, BpeGroup::Port)[0],
            ("1".to_string(), "2".to_string())
        );
    }

    #[test]
    fn final_segmentations_cover_training_values() {
        let mut vocab = fresh_vocab();
        let values = strings(&["aaab", "aaac"]);
        let report = vocab.train_group(BpeGroup::Numeric, &values, 2).unwrap();
        let rendered: Vec<String> = report.final_segmentations[0]
            .iter()
            .map(|&id| vocab.string_of(id).unwrap().to_string())
            .collect();
        assert_eq!(rendered, ["aaa", "b"]);
    }

    #[test]
    fn merged_rule_strings_concatenate() {
        let mut vocab = fresh_vocab();
        vocab
            .train_group(BpeGroup::Numeric, &strings(&["121212", "343434"]), 10)
            .unwrap();
        for rule in vocab.merges(BpeGroup::Numeric) {
            assert_eq!(rule.merged, format!("{}{}", rule.left, rule.right));
        }
        let ranks: Vec<u32> = vocab
            .merges(BpeGroup::Numeric)
            .iter()
            .map(|m| m.rank)
            .collect();
        let expected: Vec<u32> = (0..ranks.len() as u32).collect();
        assert_eq!(ranks, expected);
    }
}
