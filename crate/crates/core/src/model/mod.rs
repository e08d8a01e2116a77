//! The labeller network: word + character embeddings, a word-level BiLSTM,
//! one attention head per token label, and a sentence classifier built on
//! the same attention evidence.

mod checkpoint;
mod layers;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{CorpusError, EncodedSentence, LabelScheme, SchemeMode, Vocabs};
use crate::engine::{argmax, glorot_uniform, ParamId, ParamStore, Tape, Tensor, TensorError, Var};

pub use checkpoint::{CheckpointError, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use layers::{
    attention_scores, attention_weights, collect_sentence_scores, pool_label_query, token_distributions,
};

#[derive(Debug, thiserror::Error)]
pub enum ModelError {
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error("empty sentence")]
    EmptySentence,
    #[error("empty token surface")]
    EmptySurface,
    #[error("head {head} out of range for {heads} heads")]
    HeadOutOfRange { head: usize, heads: usize },
    #[error("unsupported scheme: H={h}, S={s}")]
    UnsupportedScheme { h: usize, s: usize },
    #[error("invalid model config: {0}")]
    InvalidConfig(String),
}

/// Layer sizes. Defaults follow the published hyperparameter table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub word_emb_dim: usize,
    pub char_emb_dim: usize,
    /// Hidden size of each direction of the word BiLSTM.
    pub word_rnn_dim: usize,
    /// Hidden size of each direction of the character BiLSTM.
    pub char_rnn_dim: usize,
    /// Size of the compact token representation z_i.
    pub word_hidden_dim: usize,
    /// Size of the projected character representation.
    pub char_hidden_dim: usize,
    /// Size of keys, queries and values.
    pub attention_evidence_dim: usize,
    /// Size of the non-linear layer before each head's sentence score.
    pub sentence_hidden_dim: usize,
    /// Size of the non-linear layer in each language-model head.
    pub lm_hidden_dim: usize,
    pub input_dropout: f64,
    pub attention_dropout: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            word_emb_dim: 300,
            char_emb_dim: 100,
            word_rnn_dim: 300,
            char_rnn_dim: 100,
            word_hidden_dim: 50,
            char_hidden_dim: 50,
            attention_evidence_dim: 100,
            sentence_hidden_dim: 200,
            lm_hidden_dim: 50,
            input_dropout: 0.5,
            attention_dropout: 0.5,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        let dims = [
            ("word_emb_dim", self.word_emb_dim),
            ("char_emb_dim", self.char_emb_dim),
            ("word_rnn_dim", self.word_rnn_dim),
            ("char_rnn_dim", self.char_rnn_dim),
            ("word_hidden_dim", self.word_hidden_dim),
            ("char_hidden_dim", self.char_hidden_dim),
            ("attention_evidence_dim", self.attention_evidence_dim),
            ("sentence_hidden_dim", self.sentence_hidden_dim),
            ("lm_hidden_dim", self.lm_hidden_dim),
        ];
        if let Some((name, _)) = dims.iter().find(|(_, d)| *d == 0) {
            return Err(ModelError::InvalidConfig(format!("{name} must be >= 1")));
        }
        for (name, r) in [("input_dropout", self.input_dropout), ("attention_dropout", self.attention_dropout)] {
            if !(0.0..1.0).contains(&r) {
                return Err(ModelError::InvalidConfig(format!("{name}={r} outside [0, 1)")));
            }
        }
        Ok(())
    }

    /// Width of x_i: word embedding plus character representation.
    pub fn token_input_dim(&self) -> usize {
        self.word_emb_dim + self.char_hidden_dim
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) struct LstmParams {
    pub w: ParamId,
    pub u: ParamId,
    pub b: ParamId,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) struct Dense {
    pub w: ParamId,
    pub b: ParamId,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) struct HeadParams {
    pub key: Dense,
    pub query: Dense,
    pub value: Dense,
}

/// Parameter ids for every weight in the network.
///
/// | name                 | shape                              |
/// |----------------------|------------------------------------|
/// | `word_emb`           | `[V_word+1, word_emb_dim]`         |
/// | `char_emb`           | `[V_char+1, char_emb_dim]`         |
/// | `char_{fwd,bwd}_w`   | `[char_emb_dim, 4*char_rnn_dim]`   |
/// | `char_{fwd,bwd}_u`   | `[char_rnn_dim, 4*char_rnn_dim]`   |
/// | `char_{fwd,bwd}_b`   | `[1, 4*char_rnn_dim]`              |
/// | `char_proj_{w,b}`    | `[2*char_rnn_dim, char_hidden_dim]`|
/// | `word_{fwd,bwd}_w`   | `[token_input_dim, 4*word_rnn_dim]`|
/// | `word_{fwd,bwd}_u`   | `[word_rnn_dim, 4*word_rnn_dim]`   |
/// | `z_{w,b}`            | `[2*word_rnn_dim, word_hidden_dim]`|
/// | `head{h}_{key,query,value}_{w,b}` | `[word_hidden_dim, attention_evidence_dim]` |
/// | `sent_{w,b}`         | `[attention_evidence_dim, sentence_hidden_dim]` |
/// | `out_{w,b}`          | `[sentence_hidden_dim, 1]`         |
/// | `lm_{fwd,bwd}_hidden_{w,b}` | `[word_rnn_dim, lm_hidden_dim]` |
/// | `lm_{fwd,bwd}_out_{w,b}`    | `[lm_hidden_dim, V_lm+1]`    |
///
/// Biases are `[1, cols]` rows of the matching weight.
#[derive(Clone, Debug, PartialEq)]
pub(crate) struct Layout {
    pub word_emb: ParamId,
    pub char_emb: ParamId,
    pub char_fwd: LstmParams,
    pub char_bwd: LstmParams,
    pub char_proj: Dense,
    pub word_fwd: LstmParams,
    pub word_bwd: LstmParams,
    pub z: Dense,
    pub heads: Vec<HeadParams>,
    pub sent: Dense,
    pub out: Dense,
    pub lm_fwd_hidden: Dense,
    pub lm_fwd_out: Dense,
    pub lm_bwd_hidden: Dense,
    pub lm_bwd_out: Dense,
}

/// Every `(name, rows, cols)` the network owns, in a fixed order.
pub(crate) fn shape_table(config: &ModelConfig, heads: usize, vocabs: &Vocabs) -> Vec<(String, usize, usize)> {
    let mut t = Vec::new();
    let mut push = |name: String, r: usize, c: usize| t.push((name, r, c));
    push("word_emb".into(), vocabs.words.size(), config.word_emb_dim);
    push("char_emb".into(), vocabs.chars.size(), config.char_emb_dim);
    for dir in ["fwd", "bwd"] {
        push(format!("char_{dir}_w"), config.char_emb_dim, 4 * config.char_rnn_dim);
        push(format!("char_{dir}_u"), config.char_rnn_dim, 4 * config.char_rnn_dim);
        push(format!("char_{dir}_b"), 1, 4 * config.char_rnn_dim);
    }
    push("char_proj_w".into(), 2 * config.char_rnn_dim, config.char_hidden_dim);
    push("char_proj_b".into(), 1, config.char_hidden_dim);
    for dir in ["fwd", "bwd"] {
        push(format!("word_{dir}_w"), config.token_input_dim(), 4 * config.word_rnn_dim);
        push(format!("word_{dir}_u"), config.word_rnn_dim, 4 * config.word_rnn_dim);
        push(format!("word_{dir}_b"), 1, 4 * config.word_rnn_dim);
    }
    push("z_w".into(), 2 * config.word_rnn_dim, config.word_hidden_dim);
    push("z_b".into(), 1, config.word_hidden_dim);
    for h in 0..heads {
        for part in ["key", "query", "value"] {
            push(format!("head{h}_{part}_w"), config.word_hidden_dim, config.attention_evidence_dim);
            push(format!("head{h}_{part}_b"), 1, config.attention_evidence_dim);
        }
    }
    push("sent_w".into(), config.attention_evidence_dim, config.sentence_hidden_dim);
    push("sent_b".into(), 1, config.sentence_hidden_dim);
    push("out_w".into(), config.sentence_hidden_dim, 1);
    push("out_b".into(), 1, 1);
    for dir in ["fwd", "bwd"] {
        push(format!("lm_{dir}_hidden_w"), config.word_rnn_dim, config.lm_hidden_dim);
        push(format!("lm_{dir}_hidden_b"), 1, config.lm_hidden_dim);
        push(format!("lm_{dir}_out_w"), config.lm_hidden_dim, vocabs.lm.size());
        push(format!("lm_{dir}_out_b"), 1, vocabs.lm.size());
    }
    t
}

impl Layout {
    fn resolve(store: &ParamStore, heads: usize) -> Option<Self> {
        let id = |n: &str| store.id_of(n);
        let lstm = |p: &str| {
            Some(LstmParams {
                w: id(&format!("{p}_w"))?,
                u: id(&format!("{p}_u"))?,
                b: id(&format!("{p}_b"))?,
            })
        };
        let dense = |p: &str| {
            Some(Dense {
                w: id(&format!("{p}_w"))?,
                b: id(&format!("{p}_b"))?,
            })
        };
        let heads = (0..heads)
            .map(|h| {
                Some(HeadParams {
                    key: dense(&format!("head{h}_key"))?,
                    query: dense(&format!("head{h}_query"))?,
                    value: dense(&format!("head{h}_value"))?,
                })
            })
            .collect::<Option<Vec<_>>>()?;
        Some(Self {
            word_emb: id("word_emb")?,
            char_emb: id("char_emb")?,
            char_fwd: lstm("char_fwd")?,
            char_bwd: lstm("char_bwd")?,
            char_proj: dense("char_proj")?,
            word_fwd: lstm("word_fwd")?,
            word_bwd: lstm("word_bwd")?,
            z: dense("z")?,
            heads,
            sent: dense("sent")?,
            out: dense("out")?,
            lm_fwd_hidden: dense("lm_fwd_hidden")?,
            lm_fwd_out: dense("lm_fwd_out")?,
            lm_bwd_hidden: dense("lm_bwd_hidden")?,
            lm_bwd_out: dense("lm_bwd_out")?,
        })
    }
}

/// Handles to the intermediate values of one forward pass.
#[derive(Clone, Debug)]
pub struct ForwardVars {
    /// z_i as `[N x word_hidden_dim]`.
    pub token_reprs: Var,
    pub keys: Vec<Var>,
    pub queries: Vec<Var>,
    pub values: Vec<Var>,
    /// Per-head averaged query q_h, `[1 x attention_evidence_dim]`.
    pub pooled_queries: Vec<Var>,
    /// Attention evidence a_ih, `[N x H]`.
    pub scores: Var,
    /// t̃, `[N x H]`, rows sum to one.
    pub token_probs: Var,
    /// α, `[N x H]`, columns sum to one.
    pub attention: Var,
    /// s_h stacked as `[H x attention_evidence_dim]`.
    pub sentence_reps: Var,
    /// o_h as `[H x 1]`.
    pub head_scores: Var,
    /// õ, `[1 x S]`.
    pub collected: Var,
    /// ỹ, `[1 x S]`.
    pub sentence_probs: Var,
    pub forward_states: Var,
    pub backward_states: Var,
}

/// Plain-value copy of a forward pass.
#[derive(Clone, Debug, PartialEq)]
pub struct ForwardOutputs {
    pub token_reprs: Tensor,
    pub keys: Vec<Tensor>,
    pub queries: Vec<Tensor>,
    pub values: Vec<Tensor>,
    pub pooled_queries: Vec<Tensor>,
    pub scores: Tensor,
    pub token_probs: Tensor,
    pub attention: Tensor,
    pub sentence_reps: Tensor,
    pub head_scores: Vec<f64>,
    pub collected: Vec<f64>,
    pub sentence_probs: Vec<f64>,
    pub forward_states: Tensor,
    pub backward_states: Tensor,
}

impl ForwardVars {
    pub fn outputs(&self, tape: &Tape) -> ForwardOutputs {
        let v = |x: Var| tape.value(x).clone();
        let vs = |xs: &[Var]| xs.iter().map(|&x| v(x)).collect();
        ForwardOutputs {
            token_reprs: v(self.token_reprs),
            keys: vs(&self.keys),
            queries: vs(&self.queries),
            values: vs(&self.values),
            pooled_queries: vs(&self.pooled_queries),
            scores: v(self.scores),
            token_probs: v(self.token_probs),
            attention: v(self.attention),
            sentence_reps: v(self.sentence_reps),
            head_scores: tape.value(self.head_scores).data().to_vec(),
            collected: tape.value(self.collected).data().to_vec(),
            sentence_probs: tape.value(self.sentence_probs).data().to_vec(),
            forward_states: v(self.forward_states),
            backward_states: v(self.backward_states),
        }
    }
}

impl ForwardOutputs {
    /// argmax of t̃_i for every token (lowest index on ties).
    pub fn token_predictions(&self) -> Vec<usize> {
        (0..self.token_probs.rows())
            .map(|i| argmax(self.token_probs.row_slice(i)))
            .collect()
    }

    /// argmax of ỹ.
    pub fn sentence_prediction(&self) -> usize {
        argmax(&self.sentence_probs)
    }
}

/// Trainable network together with the tagsets and vocabularies it was
/// built for.
#[derive(Clone, Debug, PartialEq)]
pub struct Model {
    config: ModelConfig,
    scheme: LabelScheme,
    vocabs: Vocabs,
    params: ParamStore,
    layout: Layout,
}

impl Model {
    /// Glorot-uniform weights, zero biases.
    pub fn new<R: Rng + ?Sized>(
        config: ModelConfig,
        scheme: LabelScheme,
        vocabs: Vocabs,
        rng: &mut R,
    ) -> Result<Self, ModelError> {
        config.validate()?;
        check_scheme(&scheme)?;
        let heads = scheme.num_token_labels();
        let mut params = ParamStore::new();
        for (name, r, c) in shape_table(&config, heads, &vocabs) {
            let t = if name.ends_with("_b") {
                Tensor::zeros(1, c)
            } else {
                glorot_uniform(r, c, rng)
            };
            params.add(name, t);
        }
        let layout = Layout::resolve(&params, heads).expect("layout matches shape table");
        Ok(Self {
            config,
            scheme,
            vocabs,
            params,
            layout,
        })
    }

    pub(crate) fn from_parts(
        config: ModelConfig,
        scheme: LabelScheme,
        vocabs: Vocabs,
        params: ParamStore,
    ) -> Result<Self, ModelError> {
        config.validate()?;
        check_scheme(&scheme)?;
        let heads = scheme.num_token_labels();
        let expected = shape_table(&config, heads, &vocabs);
        if expected.len() != params.len() {
            return Err(ModelError::InvalidConfig(format!(
                "expected {} parameter tensors, found {}",
                expected.len(),
                params.len()
            )));
        }
        for (name, r, c) in &expected {
            let ok = params
                .id_of(name)
                .map(|id| params.get(id).shape() == [*r, *c])
                .unwrap_or(false);
            if !ok {
                return Err(ModelError::InvalidConfig(format!("parameter `{name}` missing or not [{r}, {c}]")));
            }
        }
        let layout = Layout::resolve(&params, heads).expect("names checked above");
        Ok(Self {
            config,
            scheme,
            vocabs,
            params,
            layout,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn scheme(&self) -> &LabelScheme {
        &self.scheme
    }

    pub fn vocabs(&self) -> &Vocabs {
        &self.vocabs
    }

    pub fn params(&self) -> &ParamStore {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.params
    }

    pub fn num_heads(&self) -> usize {
        self.layout.heads.len()
    }

    pub fn word_embeddings(&self) -> ParamId {
        self.layout.word_emb
    }

    /// Replaces the word-embedding table (e.g. with pretrained vectors).
    pub fn set_word_embeddings(&mut self, table: Tensor) -> Result<(), ModelError> {
        let cur = self.params.get(self.layout.word_emb);
        if cur.shape() != table.shape() {
            return Err(TensorError::ShapeMismatch {
                op: "set_word_embeddings",
                left: cur.shape().to_vec(),
                right: table.shape().to_vec(),
            }
            .into());
        }
        *self.params.get_mut(self.layout.word_emb) = table;
        Ok(())
    }

    pub fn encode(&self, sentence: &crate::corpus::Sentence) -> EncodedSentence {
        self.vocabs.encode(sentence)
    }

    fn dense(&self, tape: &mut Tape, x: Var, d: Dense) -> Result<Var, ModelError> {
        let w = tape.param(d.w);
        let b = tape.param(d.b);
        let xw = tape.matmul(x, w)?;
        Ok(tape.add_row(xw, b)?)
    }

    fn lstm(&self, tape: &mut Tape, x: Var, p: LstmParams, reverse: bool) -> Result<Var, ModelError> {
        let xw = self.dense(tape, x, Dense { w: p.w, b: p.b })?;
        let u = tape.param(p.u);
        Ok(tape.lstm(xw, u, reverse)?)
    }

    /// Character representation of one token: final states of the forward
    /// and backward character LSTMs, concatenated and tanh-projected.
    fn char_repr(&self, tape: &mut Tape, char_ids: &[usize]) -> Result<Var, ModelError> {
        if char_ids.is_empty() {
            return Err(ModelError::EmptySurface);
        }
        let e = tape.rows(self.layout.char_emb, char_ids)?;
        let fwd = self.lstm(tape, e, self.layout.char_fwd, false)?;
        let bwd = self.lstm(tape, e, self.layout.char_bwd, true)?;
        let last = tape.row(fwd, char_ids.len() - 1)?;
        let first = tape.row(bwd, 0)?;
        let both = tape.concat(&[last, first], 1)?;
        let proj = self.dense(tape, both, self.layout.char_proj)?;
        Ok(tape.tanh(proj))
    }

    /// x_i for a single surface form, `[1 x (word_emb_dim + char_hidden_dim)]`.
    pub fn embed_token(&self, tape: &mut Tape, surface: &str) -> Result<Var, ModelError> {
        if surface.is_empty() {
            return Err(ModelError::EmptySurface);
        }
        let enc = self.vocabs.encode_tokens([surface]);
        let w = tape.rows(self.layout.word_emb, &enc.word_ids)?;
        let c = self.char_repr(tape, &enc.char_ids[0])?;
        Ok(tape.concat(&[w, c], 1)?)
    }

    fn embed_sentence(&self, tape: &mut Tape, enc: &EncodedSentence) -> Result<Var, ModelError> {
        let words = tape.rows(self.layout.word_emb, &enc.word_ids)?;
        let chars = enc
            .char_ids
            .iter()
            .map(|c| self.char_repr(tape, c))
            .collect::<Result<Vec<_>, _>>()?;
        let chars = tape.concat(&chars, 0)?;
        Ok(tape.concat(&[words, chars], 1)?)
    }

    /// Word BiLSTM over x_1..x_N. Returns (z, forward states, backward states)
    /// with z_i = tanh([→z_i; ←z_i]·W_z + b_z).
    pub fn encode_sentence(&self, tape: &mut Tape, x: Var) -> Result<(Var, Var, Var), ModelError> {
        let fwd = self.lstm(tape, x, self.layout.word_fwd, false)?;
        let bwd = self.lstm(tape, x, self.layout.word_bwd, true)?;
        let both = tape.concat(&[fwd, bwd], 1)?;
        let z = self.dense(tape, both, self.layout.z)?;
        Ok((tape.tanh(z), fwd, bwd))
    }

    /// Keys, queries and values of head `h` for every token in `z`.
    pub fn head_projections(&self, tape: &mut Tape, z: Var, h: usize) -> Result<(Var, Var, Var), ModelError> {
        let head = *self.layout.heads.get(h).ok_or(ModelError::HeadOutOfRange {
            head: h,
            heads: self.num_heads(),
        })?;
        let k = self.dense(tape, z, head.key)?;
        let q = self.dense(tape, z, head.query)?;
        let v = self.dense(tape, z, head.value)?;
        Ok((tape.tanh(k), tape.tanh(q), tape.tanh(v)))
    }

    /// o_h = W_o·tanh(W_s·s_h + b_s) + b_o for every row of `reps` (`[H x e]`).
    pub fn sentence_head_scores(&self, tape: &mut Tape, reps: Var) -> Result<Var, ModelError> {
        let hidden = self.dense(tape, reps, self.layout.sent)?;
        let hidden = tape.tanh(hidden);
        self.dense(tape, hidden, self.layout.out)
    }

    /// Full forward pass. Dropout (on z and on the attention evidence) is
    /// only applied in [`Mode::Train`].
    pub fn forward<R: Rng + ?Sized>(
        &self,
        tape: &mut Tape,
        enc: &EncodedSentence,
        mode: Mode,
        rng: &mut R,
    ) -> Result<ForwardVars, ModelError> {
        if enc.word_ids.is_empty() {
            return Err(ModelError::EmptySentence);
        }
        let x = self.embed_sentence(tape, enc)?;
        let (mut z, forward_states, backward_states) = self.encode_sentence(tape, x)?;
        if mode == Mode::Train {
            z = tape.dropout(z, self.config.input_dropout, rng)?;
        }

        let heads = self.num_heads();
        let (mut keys, mut queries, mut values, mut pooled, mut cols) = (
            Vec::with_capacity(heads),
            Vec::with_capacity(heads),
            Vec::with_capacity(heads),
            Vec::with_capacity(heads),
            Vec::with_capacity(heads),
        );
        for h in 0..heads {
            let (k, q, v) = self.head_projections(tape, z, h)?;
            let qh = pool_label_query(tape, q)?;
            cols.push(attention_scores(tape, qh, k)?);
            keys.push(k);
            queries.push(q);
            values.push(v);
            pooled.push(qh);
        }
        let mut scores = tape.concat(&cols, 1)?;
        if mode == Mode::Train {
            scores = tape.dropout(scores, self.config.attention_dropout, rng)?;
        }
        let token_probs = token_distributions(tape, scores)?;
        let attention = attention_weights(tape, scores)?;

        let at = tape.transpose(attention);
        let reps = (0..heads)
            .map(|h| {
                let weights = tape.row(at, h)?;
                tape.matmul(weights, values[h])
            })
            .collect::<Result<Vec<_>, _>>()?;
        let sentence_reps = tape.concat(&reps, 0)?;
        let head_scores = self.sentence_head_scores(tape, sentence_reps)?;
        let collected = collect_sentence_scores(tape, head_scores, &self.scheme)?;
        let sentence_probs = tape.softmax(collected, 1)?;

        Ok(ForwardVars {
            token_reprs: z,
            keys,
            queries,
            values,
            pooled_queries: pooled,
            scores,
            token_probs,
            attention,
            sentence_reps,
            head_scores,
            collected,
            sentence_probs,
            forward_states,
            backward_states,
        })
    }

    /// Language-model logits: forward states at positions `0..N-1` predict
    /// the next word, backward states at `1..N` the previous one. `None` for
    /// single-token sentences.
    pub fn lm_logits(&self, tape: &mut Tape, vars: &ForwardVars) -> Result<Option<(Var, Var)>, ModelError> {
        let n = tape.value(vars.forward_states).rows();
        if n < 2 {
            return Ok(None);
        }
        let head = |tape: &mut Tape, states: Var, start: usize, hidden: Dense, out: Dense| {
            let s = tape.slice(states, 0, start, n - 1)?;
            let h = self.dense(tape, s, hidden)?;
            let h = tape.tanh(h);
            self.dense(tape, h, out)
        };
        let l = &self.layout;
        let fwd = head(tape, vars.forward_states, 0, l.lm_fwd_hidden, l.lm_fwd_out)?;
        let bwd = head(tape, vars.backward_states, 1, l.lm_bwd_hidden, l.lm_bwd_out)?;
        Ok(Some((fwd, bwd)))
    }

    /// Deterministic evaluation-mode forward pass.
    pub fn infer(&self, enc: &EncodedSentence) -> Result<ForwardOutputs, ModelError> {
        let mut tape = Tape::new(&self.params);
        let mut rng = rand::rngs::mock::StepRng::new(0, 0);
        let vars = self.forward(&mut tape, enc, Mode::Eval, &mut rng)?;
        Ok(vars.outputs(&tape))
    }
}

pub(crate) fn check_scheme(scheme: &LabelScheme) -> Result<(), ModelError> {
    let (h, s) = (scheme.num_token_labels(), scheme.num_sentence_labels());
    match scheme.mode() {
        SchemeMode::Identical if h == s => Ok(()),
        SchemeMode::Binary if s == 2 => Ok(()),
        _ => Err(ModelError::UnsupportedScheme { h, s }),
    }
}
