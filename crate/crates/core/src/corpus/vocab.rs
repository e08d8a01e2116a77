use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::Sentence;

/// String-to-id table with a trailing out-of-vocabulary id.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Vocab {
    items: Vec<String>,
    #[serde(skip)]
    index: HashMap<String, usize>,
}

impl Vocab {
    pub fn from_items(items: Vec<String>) -> Self {
        let index = items.iter().enumerate().map(|(i, s)| (s.clone(), i)).collect();
        Self { items, index }
    }

    /// Restores the lookup table after deserialisation.
    pub(crate) fn reindex(&mut self) {
        self.index = self.items.iter().enumerate().map(|(i, s)| (s.clone(), i)).collect();
    }

    pub fn items(&self) -> &[String] {
        &self.items
    }

    /// Number of ids including the OOV bucket.
    pub fn size(&self) -> usize {
        self.items.len() + 1
    }

    pub fn oov(&self) -> usize {
        self.items.len()
    }

    pub fn get(&self, s: &str) -> Option<usize> {
        self.index.get(s).copied()
    }

    /// Case-sensitive lookup with a lowercase fallback, then OOV.
    pub fn lookup(&self, s: &str) -> usize {
        if let Some(i) = self.get(s) {
            return i;
        }
        let lower = s.to_lowercase();
        self.get(&lower).unwrap_or(self.oov())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Vocabs {
    pub words: Vocab,
    pub chars: Vocab,
    /// Language-modelling targets: the most frequent training words.
    pub lm: Vocab,
}

/// A sentence mapped to the ids the model consumes.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EncodedSentence {
    pub word_ids: Vec<usize>,
    pub char_ids: Vec<Vec<usize>>,
    pub lm_ids: Vec<usize>,
}

impl Vocabs {
    pub(crate) fn reindex(&mut self) {
        self.words.reindex();
        self.chars.reindex();
        self.lm.reindex();
    }

    pub fn encode_tokens<'a>(&self, surfaces: impl IntoIterator<Item = &'a str>) -> EncodedSentence {
        let mut word_ids = Vec::new();
        let mut char_ids = Vec::new();
        let mut lm_ids = Vec::new();
        for s in surfaces {
            word_ids.push(self.words.lookup(s));
            lm_ids.push(self.lm.lookup(s));
            let mut chars: Vec<usize> = s
                .chars()
                .map(|c| self.chars.get(c.encode_utf8(&mut [0; 4])).unwrap_or(self.chars.oov()))
                .collect();
            if chars.is_empty() {
                chars.push(self.chars.oov());
            }
            char_ids.push(chars);
        }
        EncodedSentence {
            word_ids,
            char_ids,
            lm_ids,
        }
    }

    pub fn encode(&self, sentence: &Sentence) -> EncodedSentence {
        self.encode_tokens(sentence.surfaces())
    }
}

/// Word and character vocabularies in first-occurrence order, plus an LM
/// vocabulary of the `lm_cap` most frequent words (ties by first occurrence).
pub fn build_vocabs(train: &[Sentence], lm_cap: usize) -> Vocabs {
    let mut words: Vec<String> = Vec::new();
    let mut word_freq: HashMap<&str, (usize, usize)> = HashMap::new();
    let mut chars: Vec<String> = Vec::new();
    let mut seen_chars = std::collections::HashSet::new();
    for t in train.iter().flat_map(|s| &s.tokens) {
        let n = word_freq.len();
        let entry = word_freq.entry(t.surface.as_str()).or_insert_with(|| {
            words.push(t.surface.clone());
            (0, n)
        });
        entry.0 += 1;
        for c in t.surface.chars() {
            if seen_chars.insert(c) {
                chars.push(c.to_string());
            }
        }
    }
    let mut ranked: Vec<(&str, usize, usize)> = word_freq.iter().map(|(w, &(f, first))| (*w, f, first)).collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then(a.2.cmp(&b.2)));
    let lm = ranked.iter().take(lm_cap).map(|(w, _, _)| w.to_string()).collect();
    Vocabs {
        words: Vocab::from_items(words),
        chars: Vocab::from_items(chars),
        lm: Vocab::from_items(lm),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Provenance, Token};

    fn sent(words: &[&str]) -> Sentence {
        Sentence {
            tokens: words
                .iter()
                .map(|w| Token {
                    surface: w.to_string(),
                    label: 0,
                    supervised: true,
                })
                .collect(),
            label: 0,
            provenance: Provenance::Derived,
        }
    }

    #[test]
    fn single_sentence_vocab() {
        let v = build_vocabs(&[sent(&["a", "b", "a"])], 7500);
        assert_eq!(v.words.items(), &["a", "b"]);
        assert_eq!(v.words.size(), 3);
        assert_eq!(v.lm.items(), &["a", "b"]);
        assert_eq!(v.chars.items(), &["a", "b"]);
    }

    #[test]
    fn lm_cap_keeps_most_frequent() {
        let v = build_vocabs(&[sent(&["x", "y", "y", "z", "x", "y"])], 1);
        assert_eq!(v.lm.items(), &["y"]);
        assert_eq!(v.lm.size(), 2);
        let ties = build_vocabs(&[sent(&["q", "r", "r", "q"])], 1);
        assert_eq!(ties.lm.items(), &["q"]);
    }

    #[test]
    fn unseen_words_map_to_oov() {
        let v = build_vocabs(&[sent(&["Paris", "is", "big"])], 10);
        let enc = v.encode(&sent(&["Paris", "London", "IS", "é"]));
        assert_eq!(enc.word_ids[0], 0);
        assert_eq!(enc.word_ids[1], v.words.oov());
        assert_eq!(enc.word_ids[2], 1, "lowercase fallback");
        assert_eq!(enc.char_ids[3], vec![v.chars.oov()]);
        assert_eq!(enc.lm_ids[1], v.lm.oov());
    }
}
