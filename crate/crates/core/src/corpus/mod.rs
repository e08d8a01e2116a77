//! Sentences, label schemes and everything that turns files into them.

mod conll;
mod embeddings;
mod stats;
mod synthetic;
mod vocab;

use std::path::PathBuf;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

pub use conll::{parse_conll, parse_conll_str, read_conll, write_conll, ParseMode};
pub use embeddings::{load_embeddings, parse_embeddings, EmbeddingTable};
pub use stats::{corpus_stats, split_counts, CorpusStats, LevelStats, SplitCounts};
pub use synthetic::{generate_synthetic, SyntheticSpec};
pub use vocab::{build_vocabs, EncodedSentence, Vocab, Vocabs};

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: unknown label `{label}`")]
    UnknownLabel { line: usize, label: String },
    #[error("unsupported label scheme: {0}")]
    UnsupportedScheme(String),
    #[error("sentence labels cannot be derived under an identical token/sentence tagset")]
    NotDerivable,
    #[error("empty sentence")]
    EmptySentence,
    #[error("embedding file line {line}: {message}")]
    Embedding { line: usize, message: String },
    #[error("supervision proportion {0} outside [0, 1]")]
    InvalidProportion(f64),
    #[error("invalid synthetic corpus spec: {0}")]
    InvalidSpec(String),
}

/// How token-label heads map onto sentence labels.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SchemeMode {
    /// Token and sentence tagsets are the same list (H = S).
    Identical,
    /// Two sentence labels: default and "anything else".
    Binary,
}

/// Token tagset, sentence tagset and the shared default label.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelScheme {
    token_labels: Vec<String>,
    sentence_labels: Vec<String>,
    default_token: usize,
    default_sentence: usize,
    mode: SchemeMode,
}

impl LabelScheme {
    /// Builds a scheme from explicit tagsets. Equal lists give
    /// [`SchemeMode::Identical`]; a two-label sentence tagset with different
    /// token labels gives [`SchemeMode::Binary`]. The default label must
    /// appear in both lists.
    pub fn new(
        token_labels: Vec<String>,
        sentence_labels: Vec<String>,
        default_label: &str,
    ) -> Result<Self, CorpusError> {
        if token_labels.len() < 2 {
            return Err(CorpusError::UnsupportedScheme(format!(
                "need at least two token labels, got {}",
                token_labels.len()
            )));
        }
        for set in [&token_labels, &sentence_labels] {
            let mut seen = std::collections::HashSet::new();
            if let Some(dup) = set.iter().find(|l| !seen.insert(l.as_str())) {
                return Err(CorpusError::UnsupportedScheme(format!("duplicate label `{dup}`")));
            }
        }
        let mode = if token_labels == sentence_labels {
            SchemeMode::Identical
        } else if sentence_labels.len() == 2 {
            SchemeMode::Binary
        } else {
            return Err(CorpusError::UnsupportedScheme(format!(
                "H={} and S={}: sentence tagset must equal the token tagset or be binary",
                token_labels.len(),
                sentence_labels.len()
            )));
        };
        let find = |set: &[String]| set.iter().position(|l| l == default_label);
        let (Some(default_token), Some(default_sentence)) = (find(&token_labels), find(&sentence_labels)) else {
            return Err(CorpusError::UnsupportedScheme(format!(
                "default label `{default_label}` must be in both tagsets"
            )));
        };
        Ok(Self {
            token_labels,
            sentence_labels,
            default_token,
            default_sentence,
            mode,
        })
    }

    /// Binary sentence scheme over the given token labels; the sentence
    /// labels are `[default, NOT_<default>]`.
    pub fn binary(token_labels: Vec<String>, default_label: &str) -> Result<Self, CorpusError> {
        let sentence = vec![default_label.to_string(), format!("NOT_{default_label}")];
        Self::new(token_labels, sentence, default_label)
    }

    pub fn identical(labels: Vec<String>, default_label: &str) -> Result<Self, CorpusError> {
        Self::new(labels.clone(), labels, default_label)
    }

    pub fn token_labels(&self) -> &[String] {
        &self.token_labels
    }

    pub fn sentence_labels(&self) -> &[String] {
        &self.sentence_labels
    }

    /// Token tagset size, H.
    pub fn num_token_labels(&self) -> usize {
        self.token_labels.len()
    }

    /// Sentence tagset size, S.
    pub fn num_sentence_labels(&self) -> usize {
        self.sentence_labels.len()
    }

    pub fn default_token(&self) -> usize {
        self.default_token
    }

    pub fn default_sentence(&self) -> usize {
        self.default_sentence
    }

    pub fn mode(&self) -> SchemeMode {
        self.mode
    }

    pub fn token_index(&self, label: &str) -> Option<usize> {
        self.token_labels.iter().position(|l| l == label)
    }

    pub fn sentence_index(&self, label: &str) -> Option<usize> {
        self.sentence_labels.iter().position(|l| l == label)
    }

    /// The non-default sentence label in binary mode.
    pub fn non_default_sentence(&self) -> usize {
        1 - self.default_sentence
    }

    /// Sentence label implied by token labels: default iff every token is
    /// default. Only meaningful in binary mode.
    pub fn derive_sentence_label(&self, token_labels: &[usize]) -> Result<usize, CorpusError> {
        if self.mode != SchemeMode::Binary {
            return Err(CorpusError::NotDerivable);
        }
        if token_labels.is_empty() {
            return Err(CorpusError::EmptySentence);
        }
        if token_labels.iter().all(|&l| l == self.default_token) {
            Ok(self.default_sentence)
        } else {
            Ok(self.non_default_sentence())
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Token {
    pub surface: String,
    pub label: usize,
    /// Whether the token label may be used as a training signal.
    pub supervised: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Annotated,
    Derived,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sentence {
    pub tokens: Vec<Token>,
    pub label: usize,
    pub provenance: Provenance,
}

impl Sentence {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn token_labels(&self) -> Vec<usize> {
        self.tokens.iter().map(|t| t.label).collect()
    }

    pub fn surfaces(&self) -> impl Iterator<Item = &str> {
        self.tokens.iter().map(|t| t.surface.as_str())
    }

    pub fn has_token_supervision(&self) -> bool {
        self.tokens.iter().any(|t| t.supervised)
    }
}

/// Sentence label for a sentence under `scheme`, derived from its tokens.
pub fn derive_sentence_label(sentence: &Sentence, scheme: &LabelScheme) -> Result<usize, CorpusError> {
    scheme.derive_sentence_label(&sentence.token_labels())
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Corpus {
    pub train: Vec<Sentence>,
    pub dev: Vec<Sentence>,
    pub test: Vec<Sentence>,
}

/// Grants token supervision to `ceil(p * |sentences|)` whole sentences chosen
/// uniformly at random; all other tokens lose their supervision flag. The
/// selection order depends only on the generator, so larger `p` under the
/// same seed yields a superset.
pub fn mask_token_supervision<R: Rng + ?Sized>(
    sentences: &mut [Sentence],
    p: f64,
    rng: &mut R,
) -> Result<usize, CorpusError> {
    if !(0.0..=1.0).contains(&p) {
        return Err(CorpusError::InvalidProportion(p));
    }
    let n = sentences.len();
    let k = ((p * n as f64) - 1e-9).ceil().max(0.0) as usize;
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    for s in sentences.iter_mut() {
        s.tokens.iter_mut().for_each(|t| t.supervised = false);
    }
    for &i in &order[..k.min(n)] {
        sentences[i].tokens.iter_mut().for_each(|t| t.supervised = true);
    }
    Ok(k.min(n))
}
