//! Flat `key = value` run configuration.
//!
//! One setting per line, `#` starts a comment. Hyperparameter keys use the
//! names of the published hyperparameter table; omitted keys keep their
//! default. Unknown keys are rejected.

use std::fmt::Write as _;
use std::path::PathBuf;

use mhal::corpus::LabelScheme;
use mhal::model::ModelConfig;
use mhal::objectives::LossWeights;
use mhal::trainer::{preset_variant, StoppingMetric, TrainConfig};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("line {line}: expected `key = value`")]
    Syntax { line: usize },
    #[error("unknown key `{0}`")]
    UnknownKey(String),
    #[error("`{key}`: cannot parse `{value}`")]
    Value { key: String, value: String },
    #[error("{0}")]
    Invalid(String),
}

/// Sentence tagset choice.
#[derive(Clone, Debug, PartialEq)]
pub enum SentenceLabels {
    /// `[default, NOT_<default>]`.
    Binary,
    /// Same list as the token labels.
    Identical,
    Explicit(Vec<String>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub optimization_algorithm: String,
    pub initializer: String,
    pub train_path: Option<PathBuf>,
    pub dev_path: Option<PathBuf>,
    pub test_path: Option<PathBuf>,
    pub embeddings_path: Option<PathBuf>,
    pub output_dir: PathBuf,
    pub variant: String,
    pub p: f64,
    pub seeds: Vec<u64>,
    /// Empty means "collect from the training file".
    pub token_labels: Vec<String>,
    pub sentence_labels: SentenceLabels,
    pub default_label: String,
    pub lambda: [Option<f64>; 5],
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            model: ModelConfig::default(),
            train: TrainConfig::default(),
            optimization_algorithm: "adadelta".into(),
            initializer: "glorot".into(),
            train_path: None,
            dev_path: None,
            test_path: None,
            embeddings_path: None,
            output_dir: PathBuf::from("runs"),
            variant: "MHAL-joint".into(),
            p: 1.0,
            seeds: vec![1, 2, 3, 4, 5],
            token_labels: Vec::new(),
            sentence_labels: SentenceLabels::Binary,
            default_label: "O".into(),
            lambda: [None; 5],
        }
    }
}

const LAMBDA_KEYS: [&str; 5] = ["lambda_sent", "lambda_tok", "lambda_attn", "lambda_rq", "lambda_lm"];

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, ConfigError> {
    value.parse().map_err(|_| ConfigError::Value {
        key: key.into(),
        value: value.into(),
    })
}

fn list(value: &str) -> Vec<String> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(String::from)
        .collect()
}

fn opt_path(value: &str) -> Option<PathBuf> {
    (!value.is_empty()).then(|| PathBuf::from(value))
}

impl RunConfig {
    pub fn parse_str(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = Self::default();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or(ConfigError::Syntax { line: idx + 1 })?;
            cfg.set(k.trim(), v.trim())?;
        }
        Ok(cfg)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        let m = &mut self.model;
        let t = &mut self.train;
        match key {
            "word_embedding_size" => m.word_emb_dim = parse(key, value)?,
            "char_embedding_size" => m.char_emb_dim = parse(key, value)?,
            "word_recurrent_size" => m.word_rnn_dim = parse(key, value)?,
            "char_recurrent_size" => m.char_rnn_dim = parse(key, value)?,
            "word_hidden_layer_size" => m.word_hidden_dim = parse(key, value)?,
            "char_hidden_layer_size" => m.char_hidden_dim = parse(key, value)?,
            "attention_evidence_size" => m.attention_evidence_dim = parse(key, value)?,
            "hidden_layer_size" => m.sentence_hidden_dim = parse(key, value)?,
            "lm_hidden_layer_size" => m.lm_hidden_dim = parse(key, value)?,
            "input_dropout" => m.input_dropout = parse(key, value)?,
            "attention_dropout" => m.attention_dropout = parse(key, value)?,
            "max_batch_size" => t.batch_size = parse(key, value)?,
            "epochs" => t.max_epochs = parse(key, value)?,
            "stop_if_no_improvement" => t.patience = parse(key, value)?,
            "learning_rate" => t.learning_rate = parse(key, value)?,
            "decay" => t.decay = parse(key, value)?,
            "adadelta_epsilon" => t.adadelta_eps = parse(key, value)?,
            "lm_max_vocab_size" => t.lm_vocab_cap = parse(key, value)?,
            "smoothing_epsilon" => t.smoothing = parse(key, value)?,
            "f_beta" => t.beta = parse(key, value)?,
            "stopping_criterion" => {
                t.stopping = match value {
                    "" | "auto" => None,
                    v => Some(v.parse().map_err(ConfigError::Invalid)?),
                }
            }
            "optimization_algorithm" => self.optimization_algorithm = value.to_lowercase(),
            "initializer" => self.initializer = value.to_lowercase(),
            "train" => self.train_path = opt_path(value),
            "dev" => self.dev_path = opt_path(value),
            "test" => self.test_path = opt_path(value),
            "embeddings" => self.embeddings_path = opt_path(value),
            "output_dir" => self.output_dir = PathBuf::from(value),
            "variant" => self.variant = value.into(),
            "p" => self.p = parse(key, value)?,
            "seeds" => {
                self.seeds = list(value)
                    .iter()
                    .map(|s| parse(key, s))
                    .collect::<Result<_, _>>()?
            }
            "token_labels" => self.token_labels = list(value),
            "sentence_labels" => {
                self.sentence_labels = match value {
                    "binary" => SentenceLabels::Binary,
                    "identical" => SentenceLabels::Identical,
                    v => SentenceLabels::Explicit(list(v)),
                }
            }
            "default_label" => self.default_label = value.into(),
            k => {
                let Some(i) = LAMBDA_KEYS.iter().position(|&l| l == k) else {
                    return Err(ConfigError::UnknownKey(k.into()));
                };
                self.lambda[i] = match value {
                    "" => None,
                    v => Some(parse(key, v)?),
                };
            }
        }
        Ok(())
    }

    /// Applies `key=value` overrides in order.
    pub fn apply_overrides(&mut self, overrides: &[String]) -> Result<(), ConfigError> {
        for o in overrides {
            let (k, v) = o.split_once('=').ok_or_else(|| ConfigError::Invalid(format!("override `{o}` is not key=value")))?;
            self.set(k.trim(), v.trim())?;
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let inv = |m: String| Err(ConfigError::Invalid(m));
        if self.optimization_algorithm != "adadelta" {
            return inv(format!("optimization_algorithm `{}` is not supported", self.optimization_algorithm));
        }
        if self.initializer != "glorot" {
            return inv(format!("initializer `{}` is not supported", self.initializer));
        }
        if !(0.0..=1.0).contains(&self.p) {
            return inv(format!("p = {} outside [0, 1]", self.p));
        }
        if self.seeds.is_empty() {
            return inv("at least one seed is required".into());
        }
        self.model.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        self.train.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        self.weights()?.validate().map_err(ConfigError::Invalid)?;
        Ok(())
    }

    /// Preset weights of `variant` with any `lambda_*` overrides applied.
    pub fn weights(&self) -> Result<LossWeights, ConfigError> {
        let mut w = preset_variant(&self.variant).map_err(|e| ConfigError::Invalid(e.to_string()))?;
        let slots = [&mut w.sent, &mut w.tok, &mut w.attn, &mut w.rq, &mut w.lm];
        for (slot, o) in slots.into_iter().zip(self.lambda) {
            if let Some(v) = o {
                *slot = v;
            }
        }
        Ok(w)
    }

    /// Label scheme; `discovered` supplies token labels when none are configured.
    pub fn scheme(&self, discovered: &[String]) -> Result<LabelScheme, ConfigError> {
        let mut tokens = if self.token_labels.is_empty() {
            discovered.to_vec()
        } else {
            self.token_labels.clone()
        };
        if !tokens.contains(&self.default_label) {
            tokens.insert(0, self.default_label.clone());
        }
        let scheme = match &self.sentence_labels {
            SentenceLabels::Binary => LabelScheme::binary(tokens, &self.default_label),
            SentenceLabels::Identical => LabelScheme::identical(tokens, &self.default_label),
            SentenceLabels::Explicit(s) => LabelScheme::new(tokens, s.clone(), &self.default_label),
        };
        scheme.map_err(|e| ConfigError::Invalid(e.to_string()))
    }

    /// Every key with its effective value; parsing the result gives back an
    /// equal config.
    pub fn to_text(&self) -> String {
        let m = &self.model;
        let t = &self.train;
        let path = |p: &Option<PathBuf>| p.as_ref().map(|p| p.display().to_string()).unwrap_or_default();
        let mut out = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(out, "{k} = {v}");
        };
        kv("word_embedding_size", m.word_emb_dim.to_string());
        kv("char_embedding_size", m.char_emb_dim.to_string());
        kv("word_recurrent_size", m.word_rnn_dim.to_string());
        kv("char_recurrent_size", m.char_rnn_dim.to_string());
        kv("word_hidden_layer_size", m.word_hidden_dim.to_string());
        kv("char_hidden_layer_size", m.char_hidden_dim.to_string());
        kv("attention_evidence_size", m.attention_evidence_dim.to_string());
        kv("hidden_layer_size", m.sentence_hidden_dim.to_string());
        kv("lm_hidden_layer_size", m.lm_hidden_dim.to_string());
        kv("max_batch_size", t.batch_size.to_string());
        kv("epochs", t.max_epochs.to_string());
        kv("stop_if_no_improvement", t.patience.to_string());
        kv("learning_rate", format!("{:?}", t.learning_rate));
        kv("decay", format!("{:?}", t.decay));
        kv("adadelta_epsilon", format!("{:?}", t.adadelta_eps));
        kv("input_dropout", format!("{:?}", m.input_dropout));
        kv("attention_dropout", format!("{:?}", m.attention_dropout));
        kv("lm_max_vocab_size", t.lm_vocab_cap.to_string());
        kv("smoothing_epsilon", format!("{:?}", t.smoothing));
        kv("f_beta", format!("{:?}", t.beta));
        kv(
            "stopping_criterion",
            t.stopping.map(|s| s.to_string()).unwrap_or_else(|| "auto".into()),
        );
        kv("optimization_algorithm", self.optimization_algorithm.clone());
        kv("initializer", self.initializer.clone());
        kv("train", path(&self.train_path));
        kv("dev", path(&self.dev_path));
        kv("test", path(&self.test_path));
        kv("embeddings", path(&self.embeddings_path));
        kv("output_dir", self.output_dir.display().to_string());
        kv("variant", self.variant.clone());
        kv("p", format!("{:?}", self.p));
        kv(
            "seeds",
            self.seeds.iter().map(u64::to_string).collect::<Vec<_>>().join(","),
        );
        kv("token_labels", self.token_labels.join(","));
        kv(
            "sentence_labels",
            match &self.sentence_labels {
                SentenceLabels::Binary => "binary".into(),
                SentenceLabels::Identical => "identical".into(),
                SentenceLabels::Explicit(s) => s.join(","),
            },
        );
        kv("default_label", self.default_label.clone());
        for (k, v) in LAMBDA_KEYS.iter().zip(self.lambda) {
            kv(k, v.map(|v| format!("{v:?}")).unwrap_or_default());
        }
        out
    }
}

/// Stopping criterion names accepted on the command line.
pub fn parse_stopping(s: &str) -> Result<StoppingMetric, ConfigError> {
    s.parse().map_err(ConfigError::Invalid)
}
