//! Browser demo: train a tiny labeller on a synthetic corpus, look at its
//! per-token head distributions, and play with label smoothing and the two
//! attention normalizations.
//!
//! Everything is exposed twice: as plain Rust functions (tested natively)
//! and as `wasm_bindgen` wrappers that exchange JSON strings with the page.

use mhal::corpus::{parse_conll_str, Corpus, LabelScheme, ParseMode, SchemeMode, Sentence, SyntheticSpec};
use mhal::engine::{sigmoid, softmax_slice};
use mhal::model::{Model, ModelConfig};
use mhal::objectives::smoothed_target;
use mhal::trainer::{evaluate, init_model, preset_variant, train, EpochRecord, TrainConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use wasm_bindgen::prelude::*;

const LABELS: usize = 4;

#[derive(Serialize)]
pub struct Heatmap {
    pub tokens: Vec<String>,
    /// Gold token labels, `None` for tokens typed by the user.
    pub gold: Vec<Option<String>>,
    pub predicted: Vec<String>,
    pub labels: Vec<String>,
    /// Row `i` is the distribution over heads for token `i`.
    pub probs: Vec<Vec<f64>>,
    /// Column-normalized attention weights, same layout.
    pub attention: Vec<Vec<f64>>,
    pub sentence_label: String,
    pub sentence_probs: Vec<f64>,
    pub sentence_labels: Vec<String>,
}

#[derive(Serialize)]
pub struct EpochSummary {
    pub epoch: usize,
    pub loss: f64,
    pub dev_token_f1_star: f64,
    pub dev_sentence_f1: f64,
}

#[derive(Serialize)]
pub struct TrainingSummary {
    pub epochs: Vec<EpochSummary>,
    pub best_epoch: usize,
    pub test_token_f1_star: f64,
    pub test_sentence_f1: f64,
    pub markers: Vec<(String, String)>,
}

#[derive(Serialize)]
pub struct Normalized {
    /// Softmax over heads for each token.
    pub token_probs: Vec<Vec<f64>>,
    /// Sigmoid then normalization over tokens for each head.
    pub attention: Vec<Vec<f64>>,
}

/// A small synthetic corpus with a model trained on it.
pub struct Playground {
    spec: SyntheticSpec,
    scheme: LabelScheme,
    corpus: Corpus,
    model: Option<Model>,
}

fn tiny_model() -> ModelConfig {
    ModelConfig {
        word_emb_dim: 12,
        char_emb_dim: 6,
        word_rnn_dim: 12,
        char_rnn_dim: 6,
        word_hidden_dim: 12,
        char_hidden_dim: 6,
        attention_evidence_dim: 12,
        sentence_hidden_dim: 12,
        lm_hidden_dim: 6,
        ..ModelConfig::default()
    }
}

impl Playground {
    pub fn new(seed: u64, marker_prob: f64) -> Result<Self, String> {
        let mut spec = SyntheticSpec::with_labels(LABELS, SchemeMode::Binary, 60, 3);
        spec.marker_prob = marker_prob;
        spec.max_len = 9;
        let scheme = spec.scheme().map_err(|e| e.to_string())?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let corpus = Corpus::synthetic(&spec, (300, 80, 80), &mut rng).map_err(|e| e.to_string())?;
        Ok(Self {
            spec,
            scheme,
            corpus,
            model: None,
        })
    }

    pub fn markers(&self) -> Vec<(String, String)> {
        self.spec
            .markers
            .iter()
            .map(|(w, l)| (w.clone(), self.scheme.token_labels()[*l].clone()))
            .collect()
    }

    /// Trains a fresh model. Variants without a token loss also see no
    /// token labels.
    pub fn train(&mut self, variant: &str, epochs: usize, seed: u64) -> Result<TrainingSummary, String> {
        let weights = preset_variant(variant).map_err(|e| e.to_string())?;
        let mut train_s = self.corpus.train.clone();
        if weights.tok == 0.0 {
            train_s.iter_mut().flat_map(|s| s.tokens.iter_mut()).for_each(|t| t.supervised = false);
        }
        let cfg = TrainConfig {
            max_epochs: epochs,
            patience: epochs,
            batch_size: 8,
            ..TrainConfig::default()
        };
        let model = init_model(&train_s, &self.scheme, &tiny_model(), cfg.lm_vocab_cap, seed).map_err(|e| e.to_string())?;
        let outcome = train(model, &train_s, &self.corpus.dev, &cfg, &weights, seed, None).map_err(|e| e.to_string())?;
        let report =
            evaluate(&outcome.model, &self.corpus.test, outcome.sentence_source, 1.0).map_err(|e| e.to_string())?;
        let epochs = outcome.log.iter().map(summarize).collect();
        let best_epoch = outcome.best_epoch;
        self.model = Some(outcome.model);
        Ok(TrainingSummary {
            epochs,
            best_epoch,
            test_token_f1_star: report.token.starred.f1,
            test_sentence_f1: report.sentence.all.f1,
            markers: self.markers(),
        })
    }

    pub fn test_size(&self) -> usize {
        self.corpus.test.len()
    }

    fn model(&self) -> Result<&Model, String> {
        self.model.as_ref().ok_or_else(|| "train a model first".to_string())
    }

    pub fn heatmap(&self, index: usize) -> Result<Heatmap, String> {
        let s = self
            .corpus
            .test
            .get(index)
            .ok_or_else(|| format!("no test sentence {index}"))?;
        self.describe(s, true)
    }

    /// Distributions for whitespace-separated text typed by the user.
    pub fn heatmap_for_text(&self, text: &str) -> Result<Heatmap, String> {
        let lines: String = text.split_whitespace().map(|w| format!("{w}\n")).collect();
        let sents = parse_conll_str(&lines, &self.scheme, ParseMode::Unlabelled).map_err(|e| e.to_string())?;
        let s = sents.first().ok_or_else(|| "type at least one word".to_string())?;
        self.describe(s, false)
    }

    fn describe(&self, s: &Sentence, with_gold: bool) -> Result<Heatmap, String> {
        let model = self.model()?;
        let out = model.infer(&model.encode(s)).map_err(|e| e.to_string())?;
        let labels = self.scheme.token_labels().to_vec();
        let rows = |t: &mhal::engine::Tensor| (0..s.len()).map(|i| t.row_slice(i).to_vec()).collect();
        Ok(Heatmap {
            tokens: s.surfaces().map(String::from).collect(),
            gold: s
                .tokens
                .iter()
                .map(|t| with_gold.then(|| labels[t.label].clone()))
                .collect(),
            predicted: out.token_predictions().into_iter().map(|l| labels[l].clone()).collect(),
            probs: rows(&out.token_probs),
            attention: rows(&out.attention),
            sentence_label: self.scheme.sentence_labels()[out.sentence_prediction()].clone(),
            sentence_probs: out.sentence_probs.clone(),
            sentence_labels: self.scheme.sentence_labels().to_vec(),
            labels,
        })
    }
}

fn summarize(r: &EpochRecord) -> EpochSummary {
    EpochSummary {
        epoch: r.epoch,
        loss: r.train.total,
        dev_token_f1_star: r.dev_token_f1_star,
        dev_sentence_f1: r.dev_sentence_f1,
    }
}

/// Smoothed one-hot target over `k` labels.
pub fn smoothing(gold: usize, k: usize, eps: f64) -> Result<Vec<f64>, String> {
    if gold >= k || !(0.0..=1.0).contains(&eps) {
        return Err(format!("need gold < k and eps in [0, 1], got gold={gold} k={k} eps={eps}"));
    }
    Ok(smoothed_target(gold, k, eps))
}

/// Both normalizations of a raw `[tokens x heads]` score matrix.
pub fn normalize_scores(scores: &[Vec<f64>]) -> Result<Normalized, String> {
    let heads = scores.first().map_or(0, Vec::len);
    if heads == 0 || scores.iter().any(|r| r.len() != heads) {
        return Err("scores must be a non-empty rectangular matrix".into());
    }
    let token_probs = scores.iter().map(|r| softmax_slice(r)).collect();
    let squashed: Vec<Vec<f64>> = scores.iter().map(|r| r.iter().map(|&x| sigmoid(x)).collect()).collect();
    let totals: Vec<f64> = (0..heads).map(|h| squashed.iter().map(|r| r[h]).sum()).collect();
    let attention = squashed
        .iter()
        .map(|r| r.iter().zip(&totals).map(|(v, t)| v / t).collect())
        .collect();
    Ok(Normalized { token_probs, attention })
}

fn json<T: Serialize>(v: &T) -> Result<String, JsValue> {
    serde_json::to_string(v).map_err(|e| JsValue::from_str(&e.to_string()))
}

fn js(e: String) -> JsValue {
    JsValue::from_str(&e)
}

#[wasm_bindgen]
pub struct Demo {
    inner: Playground,
}

#[wasm_bindgen]
impl Demo {
    #[wasm_bindgen(constructor)]
    pub fn new(seed: u32, marker_prob: f64) -> Result<Demo, JsValue> {
        Ok(Demo {
            inner: Playground::new(u64::from(seed), marker_prob).map_err(js)?,
        })
    }

    /// Returns a JSON training summary.
    pub fn train(&mut self, variant: &str, epochs: u32, seed: u32) -> Result<String, JsValue> {
        json(&self.inner.train(variant, epochs as usize, u64::from(seed)).map_err(js)?)
    }

    #[wasm_bindgen(js_name = testSize)]
    pub fn test_size(&self) -> usize {
        self.inner.test_size()
    }

    /// JSON heatmap for test sentence `index`.
    pub fn heatmap(&self, index: usize) -> Result<String, JsValue> {
        json(&self.inner.heatmap(index).map_err(js)?)
    }

    #[wasm_bindgen(js_name = heatmapForText)]
    pub fn heatmap_for_text(&self, text: &str) -> Result<String, JsValue> {
        json(&self.inner.heatmap_for_text(text).map_err(js)?)
    }

    pub fn markers(&self) -> Result<String, JsValue> {
        json(&self.inner.markers())
    }
}

#[wasm_bindgen(js_name = smoothedTarget)]
pub fn smoothed_target_js(gold: usize, k: usize, eps: f64) -> Result<Vec<f64>, JsValue> {
    smoothing(gold, k, eps).map_err(js)
}

/// `scores_json` is a JSON array of rows.
#[wasm_bindgen(js_name = normalizeScores)]
pub fn normalize_scores_js(scores_json: &str) -> Result<String, JsValue> {
    let scores: Vec<Vec<f64>> = serde_json::from_str(scores_json).map_err(|e| JsValue::from_str(&e.to_string()))?;
    json(&normalize_scores(&scores).map_err(js)?)
}
