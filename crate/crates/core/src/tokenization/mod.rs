//! Text to fixed-length token id sequences.
//!
//! Three strategies share one pipeline: plain whitespace words, subword
//! pieces learned by [`train_subword`], and lexicon word segmentation
//! followed by subword pieces. Every encoded sequence is
//! `[CLS] tokens.. [SEP] [PAD]..`, right padded to `max_len`, with the tail
//! truncated so that CLS and SEP always survive.

mod bpe;
mod segment;
mod vocab;

pub use bpe::{segment_word, train_subword, Merge};
pub use segment::{word_segment, Lexicon};
pub use vocab::{Vocabulary, CLS, CLS_ID, PAD, PAD_ID, RESERVED, SEP, SEP_ID, UNK, UNK_ID};

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use unicode_normalization::UnicodeNormalization;

use crate::error::{Error, Result};

/// Architectural upper bound on sequence length.
pub const MAX_SEQUENCE: usize = 512;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Strategy {
    Whitespace,
    WordSegmentThenSubword,
    Subword,
}

impl Strategy {
    pub fn as_str(self) -> &'static str {
        match self {
            Strategy::Whitespace => "whitespace",
            Strategy::WordSegmentThenSubword => "word_segment_then_subword",
            Strategy::Subword => "subword",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Strategy {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "whitespace" => Ok(Strategy::Whitespace),
            "word_segment_then_subword" => Ok(Strategy::WordSegmentThenSubword),
            "subword" => Ok(Strategy::Subword),
            other => Err(Error::Config(format!("unknown tokenizer strategy {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TokenizerSpec {
    pub strategy: Strategy,
    pub vocab_size: usize,
    pub max_len: usize,
}

impl Default for TokenizerSpec {
    fn default() -> Self {
        TokenizerSpec {
            strategy: Strategy::Whitespace,
            vocab_size: 8000,
            max_len: MAX_SEQUENCE,
        }
    }
}

impl TokenizerSpec {
    pub fn validate(&self) -> Result<()> {
        if self.max_len < 3 || self.max_len > MAX_SEQUENCE {
            return Err(Error::Config(format!(
                "max_len must lie in [3, {MAX_SEQUENCE}], got {}",
                self.max_len
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenizedExample {
    pub token_ids: Vec<usize>,
    pub attention_mask: Vec<u8>,
    /// Always 0.
    pub cls_index: usize,
    pub original_id: String,
}

impl TokenizedExample {
    /// Number of non-PAD positions.
    pub fn real_len(&self) -> usize {
        self.attention_mask.iter().filter(|&&m| m == 1).count()
    }

    pub fn with_id(mut self, id: impl Into<String>) -> Self {
        self.original_id = id.into();
        self
    }
}

/// A trained tokenizer: spec, vocabulary, merge table and optional lexicon.
#[derive(Debug, Clone, PartialEq)]
pub struct Tokenizer {
    pub spec: TokenizerSpec,
    pub vocab: Vocabulary,
    merges: Vec<Merge>,
    ranks: HashMap<Merge, usize>,
    lexicon: Lexicon,
}

fn nfc(text: &str) -> String {
    text.nfc().collect()
}

impl Tokenizer {
    pub fn new(spec: TokenizerSpec, vocab: Vocabulary, merges: Vec<Merge>, lexicon: Lexicon) -> Self {
        let ranks = merges.iter().cloned().enumerate().map(|(i, m)| (m, i)).collect();
        Tokenizer {
            spec,
            vocab,
            merges,
            ranks,
            lexicon,
        }
    }

    /// Trains a vocabulary (and merges, for subword strategies) on `corpus`.
    pub fn train<S: AsRef<str>>(spec: TokenizerSpec, corpus: &[S], lexicon: Lexicon) -> Result<Self> {
        spec.validate()?;
        if corpus.is_empty() {
            return Err(Error::Config("tokenizer training needs a non-empty corpus".into()));
        }
        let words: Vec<String> = corpus
            .iter()
            .map(|t| words_of(&nfc(t.as_ref()), spec.strategy, &lexicon).join(" "))
            .collect();
        match spec.strategy {
            Strategy::Whitespace => {
                if spec.vocab_size <= RESERVED.len() {
                    return Err(Error::Config(format!(
                        "vocab_size {} leaves no room beyond the reserved tokens",
                        spec.vocab_size
                    )));
                }
                let mut freq: BTreeMap<&str, usize> = BTreeMap::new();
                for t in &words {
                    for w in t.split_whitespace() {
                        *freq.entry(w).or_default() += 1;
                    }
                }
                let mut ranked: Vec<(&str, usize)> = freq.into_iter().collect();
                // frequency descending, then lexicographic
                ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
                let mut vocab = Vocabulary::with_reserved();
                for (w, _) in ranked.into_iter().take(spec.vocab_size - RESERVED.len()) {
                    vocab.push(w);
                }
                Ok(Tokenizer::new(spec, vocab, Vec::new(), lexicon))
            }
            Strategy::Subword | Strategy::WordSegmentThenSubword => {
                let (vocab, merges) = train_subword(&words, spec.vocab_size)?;
                Ok(Tokenizer::new(spec, vocab, merges, lexicon))
            }
        }
    }

    pub fn merges(&self) -> &[Merge] {
        &self.merges
    }

    pub fn lexicon(&self) -> &Lexicon {
        &self.lexicon
    }

    /// Word-level units after normalization and optional segmentation.
    pub fn words(&self, text: &str) -> Vec<String> {
        words_of(&nfc(text), self.spec.strategy, &self.lexicon)
    }

    /// Token strings before id lookup and truncation.
    pub fn tokens(&self, text: &str) -> Vec<String> {
        let words = self.words(text);
        match self.spec.strategy {
            Strategy::Whitespace => words,
            Strategy::Subword | Strategy::WordSegmentThenSubword => words
                .iter()
                .flat_map(|w| segment_word(w, &self.ranks))
                .collect(),
        }
    }

    pub fn encode(&self, text: &str) -> TokenizedExample {
        let max_len = self.spec.max_len;
        let mut ids = Vec::with_capacity(max_len);
        ids.push(CLS_ID);
        ids.extend(
            self.tokens(text)
                .iter()
                .take(max_len - 2)
                .map(|t| self.vocab.id_or_unk(t)),
        );
        ids.push(SEP_ID);
        let real = ids.len();
        ids.resize(max_len, PAD_ID);
        let mut mask = vec![1u8; real];
        mask.resize(max_len, 0);
        TokenizedExample {
            token_ids: ids,
            attention_mask: mask,
            cls_index: 0,
            original_id: String::new(),
        }
    }

    /// Joins the non-special tokens with single spaces. Faithful for the
    /// whitespace strategy on in-vocabulary text; subword pieces come back
    /// space separated.
    pub fn decode(&self, ids: &[usize]) -> String {
        ids.iter()
            .filter(|&&id| id >= RESERVED.len() || id == UNK_ID)
            .filter_map(|&id| self.vocab.token(id))
            .collect::<Vec<_>>()
            .join(" ")
    }

    /// Writes `tokenizer.cfg`, `vocab.txt`, `merges.txt` and `lexicon.txt` into `dir`.
    pub fn save(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let write = |name: &str, body: String| -> Result<()> {
            let p = dir.join(name);
            let mut f = std::fs::File::create(&p).map_err(|e| Error::io(&p, e))?;
            f.write_all(body.as_bytes()).map_err(|e| Error::io(&p, e))
        };
        write(
            "tokenizer.cfg",
            format!(
                "strategy = {}\nvocab_size = {}\nmax_len = {}\n",
                self.spec.strategy, self.spec.vocab_size, self.spec.max_len
            ),
        )?;
        write(
            "vocab.txt",
            self.vocab
                .tokens()
                .iter()
                .enumerate()
                .map(|(i, t)| format!("{t}\t{i}\n"))
                .collect(),
        )?;
        write(
            "merges.txt",
            self.merges.iter().map(|(a, b)| format!("{a} {b}\n")).collect(),
        )?;
        write("lexicon.txt", self.lexicon.to_lines())
    }

    pub fn load(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let read = |name: &str| -> Result<String> {
            let p = dir.join(name);
            if !p.exists() {
                return Err(Error::Config(format!("missing tokenizer file {}", p.display())));
            }
            std::fs::read_to_string(&p).map_err(|e| Error::io(&p, e))
        };
        let cfg_path = dir.join("tokenizer.cfg");
        let cfg = crate::kv::parse(&read("tokenizer.cfg")?, &cfg_path)?;
        let spec = TokenizerSpec {
            strategy: cfg.require("strategy")?.parse()?,
            vocab_size: cfg.parse_required("vocab_size")?,
            max_len: cfg.parse_required("max_len")?,
        };
        spec.validate()?;

        let vocab_path = dir.join("vocab.txt");
        let mut pairs = Vec::new();
        for (i, line) in read("vocab.txt")?.lines().enumerate() {
            let (tok, id) = line
                .rsplit_once('\t')
                .ok_or_else(|| Error::parse(&vocab_path, i + 1, "expected token<TAB>id"))?;
            let id = id
                .parse()
                .map_err(|_| Error::parse(&vocab_path, i + 1, format!("bad id {id:?}")))?;
            pairs.push((tok.to_string(), id));
        }
        let vocab = Vocabulary::from_pairs(pairs).map_err(|m| Error::parse(&vocab_path, 0, m))?;

        let merges_path = dir.join("merges.txt");
        let mut merges = Vec::new();
        for (i, line) in read("merges.txt")?.lines().enumerate() {
            let (a, b) = line
                .split_once(' ')
                .ok_or_else(|| Error::parse(&merges_path, i + 1, "expected two symbols"))?;
            merges.push((a.to_string(), b.to_string()));
        }
        let lexicon = match std::fs::read_to_string(dir.join("lexicon.txt")) {
            Ok(s) => Lexicon::new(s.lines()),
            Err(_) => Lexicon::default(),
        };
        Ok(Tokenizer::new(spec, vocab, merges, lexicon))
    }
}

fn words_of(text: &str, strategy: Strategy, lexicon: &Lexicon) -> Vec<String> {
    match strategy {
        Strategy::WordSegmentThenSubword => word_segment(text, lexicon),
        Strategy::Whitespace | Strategy::Subword => {
            text.split_whitespace().map(str::to_string).collect()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::{prop, prop_assert, prop_assert_eq, proptest};

    fn ws_tokenizer(max_len: usize) -> Tokenizer {
        let spec = TokenizerSpec {
            strategy: Strategy::Whitespace,
            vocab_size: 100,
            max_len,
        };
        Tokenizer::train(spec, &["tin nóng xã hội", "a b c d e f g h"], Lexicon::default()).unwrap()
    }

    #[test]
    fn empty_text_is_cls_sep_then_padding() {
        let t = ws_tokenizer(8);
        let ex = t.encode("");
        assert_eq!(ex.token_ids, [CLS_ID, SEP_ID, 0, 0, 0, 0, 0, 0]);
        assert_eq!(ex.attention_mask, [1, 1, 0, 0, 0, 0, 0, 0]);
        assert_eq!(ex.cls_index, 0);
    }

    #[test]
    fn long_text_is_tail_truncated_to_max_len() {
        let t = ws_tokenizer(512);
        let text = vec!["a"; 600].join(" ");
        let ex = t.encode(&text);
        assert_eq!(ex.token_ids.len(), 512);
        assert_eq!(ex.token_ids[0], CLS_ID);
        assert_eq!(ex.token_ids[511], SEP_ID);
        assert_eq!(ex.real_len(), 512);
        let a = t.vocab.id("a").unwrap();
        assert!(ex.token_ids[1..511].iter().all(|&i| i == a));
    }

    #[test]
    fn unknown_words_map_to_unk() {
        let t = ws_tokenizer(6);
        let ex = t.encode("tin zzz");
        assert_eq!(ex.token_ids[1], t.vocab.id("tin").unwrap());
        assert_eq!(ex.token_ids[2], UNK_ID);
    }

    #[test]
    fn max_len_bounds_are_validated() {
        for bad in [2, 513] {
            let spec = TokenizerSpec {
                max_len: bad,
                ..Default::default()
            };
            assert!(Tokenizer::train(spec, &["a"], Lexicon::default()).is_err());
        }
    }

    #[test]
    fn word_segment_strategy_feeds_subword() {
        let spec = TokenizerSpec {
            strategy: Strategy::WordSegmentThenSubword,
            vocab_size: 60,
            max_len: 16,
        };
        let lex = Lexicon::new(["xã hội"]);
        let t = Tokenizer::train(spec, &["xã hội tin", "xã hội nóng"], lex).unwrap();
        assert_eq!(t.words("xã hội tin"), ["xã_hội", "tin"]);
        let ex = t.encode("xã hội tin");
        assert!(ex.token_ids.iter().all(|&i| i != UNK_ID));
    }

    #[test]
    fn save_and_load() {
        let spec = TokenizerSpec {
            strategy: Strategy::Subword,
            vocab_size: 40,
            max_len: 16,
        };
        let t = Tokenizer::train(spec, &["tin nóng xã hội", "tin tức"], Lexicon::new(["xã hội"])).unwrap();
        let dir = tempfile::tempdir().unwrap();
        t.save(dir.path()).unwrap();
        let back = Tokenizer::load(dir.path()).unwrap();
        assert_eq!(back, t);
        std::fs::remove_file(dir.path().join("vocab.txt")).unwrap();
        assert!(matches!(Tokenizer::load(dir.path()), Err(Error::Config(_))));
    }

    proptest! {
        #[test]
        fn encode_invariants(words in proptest::collection::vec("[a-h]{1,3}|tin|nóng", 0..40), max_len in 3usize..24) {
            let t = ws_tokenizer(max_len);
            let text = words.join(" ");
            let ex = t.encode(&text);
            prop_assert_eq!(ex.token_ids.len(), max_len);
            prop_assert_eq!(ex.attention_mask.len(), max_len);
            let real = ex.real_len();
            prop_assert!(real >= 2);
            prop_assert_eq!(ex.token_ids[0], CLS_ID);
            prop_assert_eq!(ex.token_ids[real - 1], SEP_ID);
            for i in 0..max_len {
                prop_assert_eq!(ex.attention_mask[i] == 1, i < real);
                prop_assert_eq!(ex.token_ids[i] == PAD_ID, i >= real);
            }
            prop_assert_eq!(t.encode(&text), ex);
        }

        #[test]
        fn whitespace_decode_round_trips_in_vocab_text(
            words in proptest::collection::vec(prop::sample::select(vec!["tin", "nóng", "xã", "hội", "a", "h"]), 0..20),
            seps in proptest::collection::vec(prop::sample::select(vec![" ", "  ", "\t"]), 20),
        ) {
            let t = ws_tokenizer(64);
            let mut text = String::new();
            for (w, s) in words.iter().zip(&seps) {
                text.push_str(w);
                text.push_str(s);
            }
            let ex = t.encode(&text);
            prop_assert_eq!(t.decode(&ex.token_ids), words.join(" "));
        }
    }
}
