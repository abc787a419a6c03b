use std::collections::HashSet;

use unicode_normalization::UnicodeNormalization;

/// Multi-syllable word list for greedy longest-match segmentation.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Lexicon {
    entries: HashSet<String>,
    longest: usize,
}

impl Lexicon {
    pub fn new<I, S>(words: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut lex = Lexicon::default();
        for w in words {
            let syllables: Vec<String> = w
                .as_ref()
                .nfc()
                .collect::<String>()
                .split_whitespace()
                .map(str::to_string)
                .collect();
            if syllables.len() < 2 {
                continue;
            }
            lex.longest = lex.longest.max(syllables.len());
            lex.entries.insert(syllables.join(" "));
        }
        lex
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Entries sorted, one per line, syllables separated by spaces.
    pub fn to_lines(&self) -> String {
        let mut v: Vec<&String> = self.entries.iter().collect();
        v.sort();
        v.into_iter().map(|e| format!("{e}\n")).collect()
    }
}

/// Merges runs of syllables that form a lexicon word, joining them with `_`.
/// At each position the longest matching entry wins; other syllables pass
/// through unchanged.
pub fn word_segment(text: &str, lexicon: &Lexicon) -> Vec<String> {
    let syllables: Vec<&str> = text.split_whitespace().collect();
    let mut out = Vec::with_capacity(syllables.len());
    let mut i = 0;
    while i < syllables.len() {
        let max_n = lexicon.longest.min(syllables.len() - i);
        let matched = (2..=max_n)
            .rev()
            .find(|&n| lexicon.entries.contains(&syllables[i..i + n].join(" ")));
        match matched {
            Some(n) => {
                out.push(syllables[i..i + n].join("_"));
                i += n;
            }
            None => {
                out.push(syllables[i].to_string());
                i += 1;
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn merges_known_word() {
        let lex = Lexicon::new(["xã hội"]);
        assert_eq!(word_segment("xã hội tin", &lex), ["xã_hội", "tin"]);
    }

    #[test]
    fn empty_lexicon_is_whitespace_split() {
        let lex = Lexicon::default();
        assert_eq!(word_segment("a  b\tc", &lex), ["a", "b", "c"]);
        assert!(word_segment("", &lex).is_empty());
    }

    #[test]
    fn longest_match_wins() {
        let lex = Lexicon::new(["a b", "a b c", "c d"]);
        assert_eq!(word_segment("a b c d", &lex), ["a_b_c", "d"]);
        assert_eq!(word_segment("x a b", &lex), ["x", "a_b"]);
        // greedy: the first match consumes "c"
        assert_eq!(word_segment("a b c d", &Lexicon::new(["a b", "c d"])), ["a_b", "c_d"]);
    }

    #[test]
    fn single_syllable_entries_are_ignored() {
        let lex = Lexicon::new(["tin", " "]);
        assert!(lex.is_empty());
    }
}
