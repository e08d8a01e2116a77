use std::fmt::Write as _;

use serde::Serialize;

use super::{LabelScheme, Sentence};

/// Label-distribution summary for one level (sentences or tokens).
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LevelStats {
    /// Distinct labels that occur.
    pub no_labels: usize,
    pub prop_default: f64,
    /// Base-2 entropy of the full label distribution.
    pub full_entropy: f64,
    /// Base-2 entropy of the distribution restricted to non-default labels.
    pub non_default_entropy: f64,
    /// Occurrences per label, in tagset order.
    pub counts: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CorpusStats {
    pub sentence: LevelStats,
    pub token: LevelStats,
    pub sentence_labels: Vec<String>,
    pub token_labels: Vec<String>,
    pub default_label: String,
}

fn entropy(counts: &[usize]) -> f64 {
    let total: usize = counts.iter().sum();
    if total == 0 {
        return 0.0;
    }
    counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / total as f64;
            -p * p.log2()
        })
        .sum()
}

fn level(counts: Vec<usize>, default: usize) -> LevelStats {
    let total: usize = counts.iter().sum();
    let non_default: Vec<usize> = counts
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != default)
        .map(|(_, &c)| c)
        .collect();
    LevelStats {
        no_labels: counts.iter().filter(|&&c| c > 0).count(),
        prop_default: if total == 0 { 0.0 } else { counts[default] as f64 / total as f64 },
        full_entropy: entropy(&counts),
        non_default_entropy: entropy(&non_default),
        counts,
    }
}

fn count_labels(sentences: &[Sentence], scheme: &LabelScheme) -> (Vec<usize>, Vec<usize>) {
    let mut sent = vec![0; scheme.num_sentence_labels()];
    let mut tok = vec![0; scheme.num_token_labels()];
    for s in sentences {
        sent[s.label] += 1;
        for t in &s.tokens {
            tok[t.label] += 1;
        }
    }
    (sent, tok)
}

pub fn corpus_stats(sentences: &[Sentence], scheme: &LabelScheme) -> CorpusStats {
    let (sent, tok) = count_labels(sentences, scheme);
    CorpusStats {
        sentence: level(sent, scheme.default_sentence()),
        token: level(tok, scheme.default_token()),
        sentence_labels: scheme.sentence_labels().to_vec(),
        token_labels: scheme.token_labels().to_vec(),
        default_label: scheme.token_labels()[scheme.default_token()].clone(),
    }
}

impl CorpusStats {
    /// `key = value` lines named after the usual corpus-statistics columns.
    pub fn render(&self) -> String {
        let d = &self.default_label;
        let mut out = String::new();
        for (name, lvl) in [("sent", &self.sentence), ("tok", &self.token)] {
            let _ = writeln!(out, "{name}.no_labels = {}", lvl.no_labels);
            let _ = writeln!(out, "{name}.prop_{d} = {:.6}", lvl.prop_default);
            let _ = writeln!(out, "{name}.full_entropy = {:.6}", lvl.full_entropy);
            let _ = writeln!(out, "{name}.non_{d}_entropy = {:.6}", lvl.non_default_entropy);
        }
        out
    }
}

/// Per-split label counts at both levels.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SplitCounts {
    pub split: String,
    pub sentences: Vec<usize>,
    pub tokens: Vec<usize>,
}

pub fn split_counts(splits: &[(&str, &[Sentence])], scheme: &LabelScheme) -> Vec<SplitCounts> {
    splits
        .iter()
        .map(|(name, sents)| {
            let (sentences, tokens) = count_labels(sents, scheme);
            SplitCounts {
                split: name.to_string(),
                sentences,
                tokens,
            }
        })
        .collect()
}

impl SplitCounts {
    pub fn render(&self, scheme: &LabelScheme) -> String {
        let mut out = String::new();
        let s = &self.split;
        for (label, c) in scheme.sentence_labels().iter().zip(&self.sentences) {
            let _ = writeln!(out, "{s}.sentences.{label} = {c}");
        }
        let _ = writeln!(out, "{s}.sentences.total = {}", self.sentences.iter().sum::<usize>());
        for (label, c) in scheme.token_labels().iter().zip(&self.tokens) {
            let _ = writeln!(out, "{s}.tokens.{label} = {c}");
        }
        let _ = writeln!(out, "{s}.tokens.total = {}", self.tokens.iter().sum::<usize>());
        out
    }
}
