//! AdaDelta training with per-epoch dev evaluation and early stopping.

use std::io::Write;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{build_vocabs, CorpusError, LabelScheme, SchemeMode, Sentence};
use crate::engine::{Gradients, ParamStore, Tape};
use crate::metrics::{Labelled, MetricsError, MetricsReport, Tagsets};
use crate::model::{Mode, Model, ModelConfig, ModelError};
use crate::objectives::{total_loss, LossBreakdown, LossWeights};

#[derive(Debug, thiserror::Error)]
pub enum TrainError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("training split is empty")]
    EmptyTrain,
    #[error("development split is empty")]
    EmptyDev,
    #[error("non-finite loss in epoch {epoch}")]
    NonFinite { epoch: usize },
    #[error("invalid training config: {0}")]
    InvalidConfig(String),
    #[error("unknown variant `{0}`; expected one of {VARIANTS:?}")]
    UnknownVariant(String),
    #[error("stopping on {0:?} needs token labels in the development split")]
    NoDevTokenLabels(StoppingMetric),
    #[error("writing the epoch log: {0}")]
    Log(#[from] std::io::Error),
}

pub const VARIANTS: [&str; 6] = [
    "MHAL-joint",
    "MHAL-joint+",
    "MHAL-sent",
    "MHAL-sent+",
    "MHAL-joint+Rq",
    "BiLSTM-tok-equiv",
];

/// Loss weights `(sent, tok, attn, rq, lm)` of a named model variant.
pub fn preset_variant(name: &str) -> Result<LossWeights, TrainError> {
    let w = match name {
        "MHAL-joint" => (1.0, 1.0, 0.0, 0.0, 0.0),
        "MHAL-joint+" => (1.0, 1.0, 0.01, 0.5, 0.1),
        "MHAL-sent" => (1.0, 0.0, 0.0, 0.0, 0.0),
        "MHAL-sent+" => (1.0, 0.0, 0.01, 0.5, 0.1),
        "MHAL-joint+Rq" => (1.0, 1.0, 0.0, 0.5, 0.0),
        "BiLSTM-tok-equiv" => (0.0, 1.0, 0.0, 0.0, 0.0),
        other => return Err(TrainError::UnknownVariant(other.to_string())),
    };
    Ok(LossWeights::new(w.0, w.1, w.2, w.3, w.4))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum StoppingMetric {
    /// Sentence-level non-default micro F1.
    SentenceF1Star,
    /// Token-level non-default micro F1.
    TokenF1Star,
    /// Mean of the two.
    Mean,
}

impl std::str::FromStr for StoppingMetric {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "S-F1*" | "sentence" | "sent" => Ok(Self::SentenceF1Star),
            "F1*" | "token" | "tok" => Ok(Self::TokenF1Star),
            "mean" | "(S-F1*+F1*)/2" => Ok(Self::Mean),
            other => Err(format!("unknown stopping criterion `{other}` (S-F1*, F1*, mean)")),
        }
    }
}

impl std::fmt::Display for StoppingMetric {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::SentenceF1Star => "S-F1*",
            Self::TokenF1Star => "F1*",
            Self::Mean => "mean",
        })
    }
}

/// Chosen dev score for early stopping.
pub fn stopping_metric_value(report: &MetricsReport, metric: StoppingMetric) -> f64 {
    let s = report.sentence.starred.f1;
    let t = report.token.starred.f1;
    match metric {
        StoppingMetric::SentenceF1Star => s,
        StoppingMetric::TokenF1Star => t,
        StoppingMetric::Mean => (s + t) / 2.0,
    }
}

/// Token metric when the training data carries any token labels, sentence
/// metric otherwise.
pub fn default_stopping(train: &[Sentence]) -> StoppingMetric {
    if train.iter().any(Sentence::has_token_supervision) {
        StoppingMetric::TokenF1Star
    } else {
        StoppingMetric::SentenceF1Star
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub max_epochs: usize,
    pub patience: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    /// AdaDelta ρ.
    pub decay: f64,
    pub adadelta_eps: f64,
    pub smoothing: f64,
    /// `None` picks [`default_stopping`].
    pub stopping: Option<StoppingMetric>,
    pub lm_vocab_cap: usize,
    /// β of the reported F-beta score.
    pub beta: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            max_epochs: 200,
            patience: 7,
            batch_size: 32,
            learning_rate: 1.0,
            decay: 0.9,
            adadelta_eps: 1e-6,
            smoothing: 0.15,
            stopping: None,
            lm_vocab_cap: 7500,
            beta: 1.0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |m: String| Err(TrainError::InvalidConfig(m));
        if self.max_epochs == 0 || self.patience == 0 || self.batch_size == 0 {
            return bad("max_epochs, patience and batch_size must be >= 1".into());
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad(format!("learning_rate {} must be positive", self.learning_rate));
        }
        if !(0.0..1.0).contains(&self.decay) {
            return bad(format!("decay {} outside [0, 1)", self.decay));
        }
        if !(self.adadelta_eps > 0.0) {
            return bad("adadelta_eps must be positive".into());
        }
        if !(0.0..1.0).contains(&self.smoothing) {
            return bad(format!("smoothing {} outside [0, 1)", self.smoothing));
        }
        if !(self.beta > 0.0) {
            return bad("beta must be positive".into());
        }
        Ok(())
    }
}

/// AdaDelta accumulators, one buffer per parameter tensor.
#[derive(Clone, Debug, PartialEq)]
pub struct AdaDelta {
    pub rho: f64,
    pub eps: f64,
    pub lr: f64,
    sq_grad: Vec<Vec<f64>>,
    sq_delta: Vec<Vec<f64>>,
}

impl AdaDelta {
    pub fn new(store: &ParamStore, rho: f64, eps: f64, lr: f64) -> Self {
        let zeros: Vec<Vec<f64>> = store.iter().map(|(_, _, t)| vec![0.0; t.len()]).collect();
        Self {
            rho,
            eps,
            lr,
            sq_grad: zeros.clone(),
            sq_delta: zeros,
        }
    }

    /// ```text
    /// E[g²]  <- ρ·E[g²] + (1-ρ)·g²
    /// Δ       = sqrt(E[Δ²] + ε) / sqrt(E[g²] + ε) · g
    /// E[Δ²]  <- ρ·E[Δ²] + (1-ρ)·Δ²
    /// θ      <- θ - lr·Δ
    /// ```
    pub fn step(&mut self, store: &mut ParamStore, grads: &Gradients) {
        let (rho, eps, lr) = (self.rho, self.eps, self.lr);
        for (id, g) in grads.iter() {
            let i = id.index();
            let theta = store.get_mut(id).data_mut();
            let (eg, ed) = (&mut self.sq_grad[i], &mut self.sq_delta[i]);
            for k in 0..g.len() {
                eg[k] = rho * eg[k] + (1.0 - rho) * g[k] * g[k];
                let delta = (ed[k] + eps).sqrt() / (eg[k] + eps).sqrt() * g[k];
                ed[k] = rho * ed[k] + (1.0 - rho) * delta * delta;
                theta[k] -= lr * delta;
            }
        }
    }

    pub fn accumulators(&self) -> (&[Vec<f64>], &[Vec<f64>]) {
        (&self.sq_grad, &self.sq_delta)
    }
}

/// Where sentence predictions come from at evaluation time.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SentenceSource {
    /// argmax of the sentence distribution.
    Head,
    /// Derived from the predicted token labels (binary tagsets only).
    FromTokens,
}

impl SentenceSource {
    /// A model trained without the sentence objective has an untrained
    /// sentence head; with a binary tagset its token predictions are used.
    pub fn for_weights(weights: &LossWeights, scheme: &LabelScheme) -> Self {
        if weights.sent == 0.0 && scheme.mode() == SchemeMode::Binary {
            Self::FromTokens
        } else {
            Self::Head
        }
    }
}

/// Eval-mode predictions for every sentence.
pub fn predict(model: &Model, sentences: &[Sentence], source: SentenceSource) -> Result<Labelled, TrainError> {
    let mut out = Labelled::default();
    for s in sentences {
        let o = model.infer(&model.encode(s))?;
        let tokens = o.token_predictions();
        let sent = match source {
            SentenceSource::Head => o.sentence_prediction(),
            SentenceSource::FromTokens => model.scheme().derive_sentence_label(&tokens)?,
        };
        out.tokens.push(tokens);
        out.sentences.push(sent);
    }
    Ok(out)
}

pub fn gold_labels(sentences: &[Sentence]) -> Labelled {
    Labelled {
        tokens: sentences.iter().map(Sentence::token_labels).collect(),
        sentences: sentences.iter().map(|s| s.label).collect(),
    }
}

pub fn tagsets(scheme: &LabelScheme) -> Tagsets {
    Tagsets {
        num_token_labels: scheme.num_token_labels(),
        num_sentence_labels: scheme.num_sentence_labels(),
        default_token: scheme.default_token(),
        default_sentence: scheme.default_sentence(),
    }
}

pub fn evaluate(
    model: &Model,
    sentences: &[Sentence],
    source: SentenceSource,
    beta: f64,
) -> Result<MetricsReport, TrainError> {
    let pred = predict(model, sentences, source)?;
    Ok(MetricsReport::compute(
        &pred,
        &gold_labels(sentences),
        tagsets(model.scheme()),
        beta,
    )?)
}

/// One line of the epoch log.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Loss terms averaged over training sentences.
    pub train: LossBreakdown,
    pub dev_token_f1: f64,
    pub dev_token_f1_star: f64,
    pub dev_token_f_beta_star: f64,
    pub dev_span_f1: f64,
    pub dev_sentence_accuracy: f64,
    pub dev_sentence_f1: f64,
    pub dev_sentence_f1_star: f64,
    pub stopping_metric: StoppingMetric,
    pub stopping_value: f64,
    pub improved: bool,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    /// Parameters from the epoch with the best dev stopping value.
    pub model: Model,
    pub log: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub best_value: f64,
    pub stopping: StoppingMetric,
    pub sentence_source: SentenceSource,
}

/// Minimum increase that counts as an improvement.
pub const IMPROVEMENT_TOLERANCE: f64 = 1e-6;

/// Shuffled training order for one epoch; depends only on `(seed, epoch)`.
pub fn epoch_order(n: usize, seed: u64, epoch: usize) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1 + epoch as u64);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    order
}

/// Fresh model for `train`: vocabularies from the training split and
/// weights seeded by `seed`.
pub fn init_model(
    train: &[Sentence],
    scheme: &LabelScheme,
    model_cfg: &ModelConfig,
    lm_vocab_cap: usize,
    seed: u64,
) -> Result<Model, TrainError> {
    if train.is_empty() {
        return Err(TrainError::EmptyTrain);
    }
    let vocabs = build_vocabs(train, lm_vocab_cap);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(Model::new(model_cfg.clone(), scheme.clone(), vocabs, &mut rng)?)
}

/// Trains `model` by value and returns it holding the best epoch's
/// parameters. Each epoch is appended to `log` as a JSON line.
pub fn train(
    mut model: Model,
    train: &[Sentence],
    dev: &[Sentence],
    cfg: &TrainConfig,
    weights: &LossWeights,
    seed: u64,
    mut log: Option<&mut dyn Write>,
) -> Result<TrainOutcome, TrainError> {
    cfg.validate()?;
    weights.validate().map_err(TrainError::InvalidConfig)?;
    if train.is_empty() {
        return Err(TrainError::EmptyTrain);
    }
    if dev.is_empty() {
        return Err(TrainError::EmptyDev);
    }
    let stopping = cfg.stopping.unwrap_or_else(|| default_stopping(train));
    if stopping != StoppingMetric::SentenceF1Star && !dev.iter().any(Sentence::has_token_supervision) {
        return Err(TrainError::NoDevTokenLabels(stopping));
    }
    let source = SentenceSource::for_weights(weights, model.scheme());
    let encoded: Vec<_> = train.iter().map(|s| model.encode(s)).collect();

    let mut opt = AdaDelta::new(model.params(), cfg.decay, cfg.adadelta_eps, cfg.learning_rate);
    let mut grads = Gradients::zeros_like(model.params());
    let mut dropout_rng = ChaCha8Rng::seed_from_u64(seed);
    dropout_rng.set_stream(0);

    let mut best: Option<(Model, usize, f64)> = None;
    let mut since_best = 0;
    let mut records = Vec::new();
    for epoch in 1..=cfg.max_epochs {
        let mut sum = LossBreakdown::default();
        for batch in epoch_order(train.len(), seed, epoch).chunks(cfg.batch_size) {
            grads.clear();
            for &i in batch {
                let mut tape = Tape::new(model.params());
                let vars = model.forward(&mut tape, &encoded[i], Mode::Train, &mut dropout_rng)?;
                let lv = total_loss(&mut tape, &model, &vars, &train[i], &encoded[i], weights, cfg.smoothing)?;
                let b = lv.breakdown(&tape);
                if !b.is_finite() {
                    return Err(TrainError::NonFinite { epoch });
                }
                sum += b;
                tape.backward(lv.total, &mut grads).map_err(ModelError::from)?;
            }
            if !grads.is_finite() {
                return Err(TrainError::NonFinite { epoch });
            }
            opt.step(model.params_mut(), &grads);
        }
        let n = train.len() as f64;
        let train_mean = LossBreakdown {
            l_sent: sum.l_sent / n,
            l_tok: sum.l_tok / n,
            l_attn: sum.l_attn / n,
            r_q: sum.r_q / n,
            l_lm: sum.l_lm / n,
            total: sum.total / n,
        };

        let report = evaluate(&model, dev, source, cfg.beta)?;
        let value = stopping_metric_value(&report, stopping);
        let improved = best.as_ref().map_or(true, |b| value > b.2 + IMPROVEMENT_TOLERANCE);
        let record = EpochRecord {
            epoch,
            train: train_mean,
            dev_token_f1: report.token.all.f1,
            dev_token_f1_star: report.token.starred.f1,
            dev_token_f_beta_star: report.token.starred.f_beta,
            dev_span_f1: report.span.f1,
            dev_sentence_accuracy: report.sentence.accuracy,
            dev_sentence_f1: report.sentence.all.f1,
            dev_sentence_f1_star: report.sentence.starred.f1,
            stopping_metric: stopping,
            stopping_value: value,
            improved,
        };
        if let Some(w) = log.as_deref_mut() {
            serde_json::to_writer(&mut *w, &record).map_err(std::io::Error::from)?;
            w.write_all(b"\n")?;
        }
        records.push(record);
        if improved {
            best = Some((model.clone(), epoch, value));
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= cfg.patience {
                break;
            }
        }
    }
    let (model, best_epoch, best_value) = best.expect("at least one epoch ran");
    Ok(TrainOutcome {
        model,
        log: records,
        best_epoch,
        best_value,
        stopping,
        sentence_source: source,
    })
}
