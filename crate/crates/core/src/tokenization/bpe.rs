//! Byte-pair-style subword merges learned over whitespace-separated words.
//!
//! Merges never cross word boundaries. At each step the most frequent
//! adjacent symbol pair is merged; ties go to the lexicographically smallest
//! pair, so training does not depend on any random state.

use std::collections::{BTreeMap, HashMap};

use super::vocab::{Vocabulary, RESERVED};
use crate::error::{Error, Result};

pub type Merge = (String, String);

/// Learns merges until the vocabulary holds `vocab_size` entries or no pair is left.
pub fn train_subword<S: AsRef<str>>(
    corpus: &[S],
    vocab_size: usize,
) -> Result<(Vocabulary, Vec<Merge>)> {
    if corpus.is_empty() {
        return Err(Error::Config("subword training needs a non-empty corpus".into()));
    }
    let mut word_freq: BTreeMap<&str, usize> = BTreeMap::new();
    for text in corpus {
        for w in text.as_ref().split_whitespace() {
            *word_freq.entry(w).or_default() += 1;
        }
    }
    let mut alphabet: Vec<String> = word_freq
        .keys()
        .flat_map(|w| w.chars())
        .map(String::from)
        .collect();
    alphabet.sort();
    alphabet.dedup();

    let floor = RESERVED.len() + alphabet.len();
    if vocab_size <= floor {
        return Err(Error::Config(format!(
            "vocab_size {vocab_size} must exceed reserved tokens plus distinct characters ({floor})"
        )));
    }

    let mut vocab = Vocabulary::with_reserved();
    for ch in &alphabet {
        vocab.push(ch);
    }

    let mut words: Vec<(Vec<String>, usize)> = word_freq
        .iter()
        .map(|(w, &f)| (w.chars().map(String::from).collect(), f))
        .collect();
    let mut merges = Vec::new();

    while vocab.len() < vocab_size {
        let mut pair_freq: HashMap<(&str, &str), usize> = HashMap::new();
        for (syms, f) in &words {
            for pair in syms.windows(2) {
                *pair_freq.entry((pair[0].as_str(), pair[1].as_str())).or_default() += f;
            }
        }
        let best = pair_freq
            .into_iter()
            .max_by(|(pa, fa), (pb, fb)| fa.cmp(fb).then_with(|| pb.cmp(pa)));
        let Some(((a, b), _)) = best else { break };
        let merge = (a.to_string(), b.to_string());
        let joined = format!("{a}{b}");
        for (syms, _) in words.iter_mut() {
            *syms = apply_merge(syms, &merge, &joined);
        }
        if vocab.id(&joined).is_none() {
            vocab.push(&joined);
        }
        merges.push(merge);
    }
    Ok((vocab, merges))
}

fn apply_merge(syms: &[String], merge: &Merge, joined: &str) -> Vec<String> {
    let mut out = Vec::with_capacity(syms.len());
    let mut i = 0;
    while i < syms.len() {
        if i + 1 < syms.len() && syms[i] == merge.0 && syms[i + 1] == merge.1 {
            out.push(joined.to_string());
            i += 2;
        } else {
            out.push(syms[i].clone());
            i += 1;
        }
    }
    out
}

/// Applies learned merges to one word, lowest-rank pair first.
pub fn segment_word(word: &str, ranks: &HashMap<Merge, usize>) -> Vec<String> {
    let mut syms: Vec<String> = word.chars().map(String::from).collect();
    loop {
        let best = syms
            .windows(2)
            .filter_map(|p| ranks.get(&(p[0].clone(), p[1].clone())).map(|&r| (r, p)))
            .min_by_key(|(r, _)| *r);
        let Some((_, pair)) = best else { break };
        let merge = (pair[0].clone(), pair[1].clone());
        let joined = format!("{}{}", merge.0, merge.1);
        syms = apply_merge(&syms, &merge, &joined);
    }
    syms
}
