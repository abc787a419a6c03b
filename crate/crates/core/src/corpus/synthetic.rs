//! Seeded synthetic corpus with a planted signal, used in place of the real
//! dataset for end-to-end runs.
//!
//! Every record's message is a sequence of background syllables drawn from a
//! fixed Zipf-like distribution. An unreliable record additionally carries
//! one to three tokens from [`RUMOR_LEXICON`] with probability
//! `signal_strength`. The syllable inventory and lexicon do not depend on the
//! seed, so corpora generated with different seeds share one vocabulary.

use rand::distributions::{Distribution, WeightedIndex};
use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::StandardNormal;

use super::{Label, PostRecord, Split, SplitName};
use crate::embeddings::EmbeddingTable;
use crate::error::{Error, Result};
use crate::rng;

pub const RUMOR_LEXICON: [&str; 12] = [
    "sốc", "khẩn", "nóng", "lừa", "đảo", "độc", "hại", "nhiễm", "sán", "virus", "cấm", "bịa",
];

const ONSETS: [&str; 20] = [
    "b", "c", "d", "đ", "g", "h", "k", "l", "m", "n", "nh", "ng", "ph", "qu", "s", "t", "th", "tr",
    "v", "x",
];
const RIMES: [&str; 10] = ["a", "à", "á", "ơ", "ê", "ôi", "ang", "inh", "ương", "iệt"];

pub const BACKGROUND_SIZE: usize = ONSETS.len() * RIMES.len();

/// Background syllables in rank order (rank 0 is the most frequent).
pub(crate) fn background_syllables() -> Vec<String> {
    let mut out = Vec::with_capacity(BACKGROUND_SIZE);
    for rime in RIMES {
        for onset in ONSETS {
            out.push(format!("{onset}{rime}"));
        }
    }
    out
}

/// Two-syllable words over the background inventory, for word segmentation runs.
pub fn synthetic_word_lexicon() -> Vec<String> {
    let syl = background_syllables();
    (0..20).map(|i| format!("{} {}", syl[2 * i], syl[2 * i + 1])).collect()
}

/// Random standard-normal vectors for every background and lexicon token.
pub fn synthetic_vectors(dim: usize, seed: u64) -> EmbeddingTable {
    let mut table = EmbeddingTable::new(dim);
    let mut r = rng::stream(seed, rng::domain::VECTORS, 0);
    let mut words = background_syllables();
    words.extend(RUMOR_LEXICON.iter().map(|s| s.to_string()));
    let mut v = vec![0.0; dim];
    for w in &words {
        for x in v.iter_mut() {
            *x = StandardNormal.sample(&mut r);
        }
        table.insert(w, &v).expect("finite vector of table dimension");
    }
    table
}

pub fn generate_synthetic_corpus(n: usize, signal_strength: f64, seed: u64) -> Result<Split> {
    if n == 0 {
        return Err(Error::Config("synthetic corpus size must be positive".into()));
    }
    if !(0.0..=1.0).contains(&signal_strength) {
        return Err(Error::Config(format!(
            "signal_strength must lie in [0, 1], got {signal_strength}"
        )));
    }
    let mut r = rng::stream(seed, rng::domain::CORPUS, 0);
    let syllables = background_syllables();
    let weights: Vec<f64> = (0..syllables.len())
        .map(|rank| 1.0 / ((rank + 1) as f64).powf(0.8))
        .collect();
    let background = WeightedIndex::new(&weights).expect("positive weights");

    let mut labels: Vec<Label> = (0..n)
        .map(|i| if i < n / 2 { Label::Unreliable } else { Label::Reliable })
        .collect();
    labels.shuffle(&mut r);

    let mut records = Vec::with_capacity(n);
    for (i, label) in labels.into_iter().enumerate() {
        let len = r.gen_range(8..=24);
        let mut tokens: Vec<&str> = (0..len)
            .map(|_| syllables[background.sample(&mut r)].as_str())
            .collect();
        // Draw even when unused so the background stream does not depend on labels.
        let planted = r.gen_bool(signal_strength);
        if label.is_positive() && planted {
            let k = r.gen_range(1..=3);
            for _ in 0..k {
                let pos = r.gen_range(0..tokens.len());
                tokens[pos] = RUMOR_LEXICON[r.gen_range(0..RUMOR_LEXICON.len())];
            }
        }
        let maybe = |r: &mut rng::Rng, p_missing: f64, v: u64| {
            if r.gen_bool(p_missing) {
                None
            } else {
                Some(v)
            }
        };
        let like = r.gen_range(0..500);
        let comment = r.gen_range(0..100);
        let share = r.gen_range(0..50);
        let ts = 1_584_000_000 + r.gen_range(0..10_000_000i64);
        records.push(PostRecord {
            id: i.to_string(),
            user_id: Some(format!("u{}", r.gen_range(0..300))),
            message: Some(tokens.join(" ")),
            timestamp: if r.gen_bool(0.02) { None } else { Some(ts) },
            num_like: maybe(&mut r, 0.02, like),
            num_comment: maybe(&mut r, 0.01, comment),
            num_share: maybe(&mut r, 0.1, share),
            label: Some(label),
            image: if r.gen_bool(0.5) {
                None
            } else {
                Some(format!("img/{i}.jpg"))
            },
        });
    }
    Ok(Split::new(SplitName::Train, records))
}
