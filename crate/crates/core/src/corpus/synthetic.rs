//! Seeded toy corpora with known structure: default-labelled filler words
//! and marker words that carry a fixed non-default label.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{Corpus, CorpusError, LabelScheme, Provenance, SchemeMode, Sentence, Token};

const SYLLABLES: [&str; 12] = ["ka", "lo", "mi", "ne", "ru", "ta", "so", "pe", "vi", "do", "gu", "fa"];

/// Deterministic pronounceable word for an index; distinct indices give
/// distinct words.
pub fn pseudo_word(index: usize) -> String {
    let mut n = index + SYLLABLES.len() * SYLLABLES.len();
    let mut parts = Vec::new();
    while n > 0 {
        parts.push(SYLLABLES[n % SYLLABLES.len()]);
        n /= SYLLABLES.len();
    }
    parts.concat()
}

/// Bijection on `0..n` (multiplication by a prime larger than `n`).
fn scramble(i: usize, n: usize) -> usize {
    const P: usize = 1_000_003;
    if n <= 1 || n >= P {
        return i;
    }
    ((i % n) as u64 * P as u64 % n as u64) as usize
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub token_labels: Vec<String>,
    pub default_label: String,
    pub mode: SchemeMode,
    /// Number of distinct filler words.
    pub filler_vocab: usize,
    /// Surface form and token label of every marker word.
    pub markers: Vec<(String, usize)>,
    /// Per-position probability of emitting a marker instead of a filler.
    pub marker_prob: f64,
    pub min_len: usize,
    pub max_len: usize,
}

impl SyntheticSpec {
    /// `h` token labels named `O, L1, .., L{h-1}` with `markers_per_label`
    /// marker words each.
    ///
    /// Filler and marker surface forms are drawn from one scrambled pool of
    /// pseudo-words, so spelling carries no label information.
    pub fn with_labels(h: usize, mode: SchemeMode, filler_vocab: usize, markers_per_label: usize) -> Self {
        let mut token_labels = vec!["O".to_string()];
        token_labels.extend((1..h).map(|i| format!("L{i}")));
        let pool = filler_vocab + h.saturating_sub(1) * markers_per_label;
        let markers = (1..h)
            .flat_map(|label| (0..markers_per_label).map(move |k| (label, k)))
            .enumerate()
            .map(|(i, (label, _))| (pseudo_word(scramble(filler_vocab + i, pool)), label))
            .collect();
        Self {
            token_labels,
            default_label: "O".into(),
            mode,
            filler_vocab,
            markers,
            marker_prob: 0.1,
            min_len: 5,
            max_len: 12,
        }
    }

    pub fn scheme(&self) -> Result<LabelScheme, CorpusError> {
        match self.mode {
            SchemeMode::Binary => LabelScheme::binary(self.token_labels.clone(), &self.default_label),
            SchemeMode::Identical => LabelScheme::identical(self.token_labels.clone(), &self.default_label),
        }
    }

    fn validate(&self, scheme: &LabelScheme) -> Result<(), CorpusError> {
        let bad = |m: String| Err(CorpusError::InvalidSpec(m));
        if self.filler_vocab == 0 {
            return bad("filler vocabulary must be non-empty".into());
        }
        if self.min_len == 0 || self.min_len > self.max_len {
            return bad(format!("length range [{}, {}] is invalid", self.min_len, self.max_len));
        }
        if !(0.0..=1.0).contains(&self.marker_prob) {
            return bad(format!("marker probability {} outside [0, 1]", self.marker_prob));
        }
        if self.marker_prob > 0.0 && self.markers.is_empty() {
            return bad("positive marker probability with an empty marker table".into());
        }
        for (surface, label) in &self.markers {
            if *label >= scheme.num_token_labels() {
                return bad(format!("marker `{surface}` has label {label} >= H"));
            }
            if *label == scheme.default_token() {
                return bad(format!("marker `{surface}` carries the default label"));
            }
        }
        Ok(())
    }
}

/// Generates `n` sentences. In binary mode the sentence label is derived;
/// in identical mode it is the most frequent marker label (lowest index on
/// ties), or the default when the sentence has no markers.
pub fn generate_synthetic<R: Rng + ?Sized>(
    spec: &SyntheticSpec,
    n: usize,
    rng: &mut R,
) -> Result<Vec<Sentence>, CorpusError> {
    let scheme = spec.scheme()?;
    spec.validate(&scheme)?;
    let pool = spec.filler_vocab + spec.markers.len();
    let fillers: Vec<String> = (0..spec.filler_vocab).map(|i| pseudo_word(scramble(i, pool))).collect();
    let d = scheme.default_token();
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let len = rng.gen_range(spec.min_len..=spec.max_len);
        let mut tokens = Vec::with_capacity(len);
        for _ in 0..len {
            let (surface, label) = if spec.marker_prob > 0.0 && rng.gen::<f64>() < spec.marker_prob {
                let (s, l) = &spec.markers[rng.gen_range(0..spec.markers.len())];
                (s.clone(), *l)
            } else {
                (fillers[rng.gen_range(0..fillers.len())].clone(), d)
            };
            tokens.push(Token {
                surface,
                label,
                supervised: true,
            });
        }
        let labels: Vec<usize> = tokens.iter().map(|t| t.label).collect();
        let (label, provenance) = match scheme.mode() {
            SchemeMode::Binary => (scheme.derive_sentence_label(&labels)?, Provenance::Derived),
            SchemeMode::Identical => {
                let mut counts = vec![0usize; scheme.num_token_labels()];
                labels.iter().filter(|&&l| l != d).for_each(|&l| counts[l] += 1);
                let best = (0..counts.len())
                    .filter(|&l| l != d && counts[l] > 0)
                    .max_by(|&a, &b| counts[a].cmp(&counts[b]).then(b.cmp(&a)));
                (best.unwrap_or(d), Provenance::Annotated)
            }
        };
        out.push(Sentence {
            tokens,
            label,
            provenance,
        });
    }
    Ok(out)
}

impl Corpus {
    /// Train/dev/test splits drawn from one generator stream.
    pub fn synthetic<R: Rng + ?Sized>(
        spec: &SyntheticSpec,
        sizes: (usize, usize, usize),
        rng: &mut R,
    ) -> Result<Self, CorpusError> {
        Ok(Self {
            train: generate_synthetic(spec, sizes.0, rng)?,
            dev: generate_synthetic(spec, sizes.1, rng)?,
            test: generate_synthetic(spec, sizes.2, rng)?,
        })
    }
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;

    #[test]
    fn pseudo_words_are_distinct() {
        let words: std::collections::HashSet<String> = (0..2000).map(pseudo_word).collect();
        assert_eq!(words.len(), 2000);
        let scrambled: std::collections::HashSet<usize> = (0..777).map(|i| scramble(i, 777)).collect();
        assert_eq!(scrambled.len(), 777);
    }

    #[test]
    fn no_markers_means_all_default() {
        let mut spec = SyntheticSpec::with_labels(5, SchemeMode::Binary, 50, 3);
        spec.marker_prob = 0.0;
        let sents = generate_synthetic(&spec, 100, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        assert!(sents.iter().all(|s| s.label == 0 && s.tokens.iter().all(|t| t.label == 0)));
    }

    #[test]
    fn one_marker_makes_sentence_non_default() {
        let mut spec = SyntheticSpec::with_labels(5, SchemeMode::Binary, 50, 3);
        spec.marker_prob = 0.05;
        let sents = generate_synthetic(&spec, 300, &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
        let with_one = sents
            .iter()
            .find(|s| s.tokens.iter().filter(|t| t.label != 0).count() == 1)
            .expect("some sentence has exactly one marker");
        assert_eq!(with_one.label, 1);
    }

    #[test]
    fn marker_rate_is_reproduced() {
        let mut spec = SyntheticSpec::with_labels(5, SchemeMode::Binary, 80, 4);
        spec.marker_prob = 0.15;
        let sents = generate_synthetic(&spec, 1000, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        let total: usize = sents.iter().map(Sentence::len).sum();
        let markers = sents.iter().flat_map(|s| &s.tokens).filter(|t| t.label != 0).count();
        let rate = markers as f64 / total as f64;
        assert!((rate - 0.15).abs() <= 0.02, "marker rate {rate}");
    }

    #[test]
    fn identical_mode_uses_majority_marker() {
        let spec = SyntheticSpec::with_labels(3, SchemeMode::Identical, 30, 2);
        let sents = generate_synthetic(&spec, 400, &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
        for s in &sents {
            let mut counts = [0usize; 3];
            s.tokens.iter().for_each(|t| counts[t.label] += 1);
            if counts[1] == 0 && counts[2] == 0 {
                assert_eq!(s.label, 0);
            } else {
                assert_eq!(s.label, if counts[2] > counts[1] { 2 } else { 1 });
            }
            assert_eq!(s.provenance, Provenance::Annotated);
        }
    }

    #[test]
    fn rejects_inconsistent_marker_label() {
        let mut spec = SyntheticSpec::with_labels(3, SchemeMode::Binary, 30, 1);
        spec.markers.push(("zz".into(), 7));
        assert!(generate_synthetic(&spec, 1, &mut ChaCha8Rng::seed_from_u64(0)).is_err());
    }

    #[test]
    fn seed_determinism() {
        let spec = SyntheticSpec::with_labels(4, SchemeMode::Binary, 30, 2);
        let a = generate_synthetic(&spec, 50, &mut ChaCha8Rng::seed_from_u64(8)).unwrap();
        let b = generate_synthetic(&spec, 50, &mut ChaCha8Rng::seed_from_u64(8)).unwrap();
        assert_eq!(a, b);
    }
}
