//! Training objectives and their weighted combination.

use serde::{Deserialize, Serialize};

use crate::corpus::{EncodedSentence, LabelScheme, SchemeMode, Sentence};
use crate::engine::{Tape, Tensor, TensorError, Var};
use crate::model::{ForwardVars, Model, ModelError};

/// Norm floor used by the query-diversity term.
pub const COSINE_FLOOR: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    pub sent: f64,
    pub tok: f64,
    pub attn: f64,
    pub rq: f64,
    pub lm: f64,
}

impl LossWeights {
    pub fn new(sent: f64, tok: f64, attn: f64, rq: f64, lm: f64) -> Self {
        Self { sent, tok, attn, rq, lm }
    }

    pub fn validate(&self) -> Result<(), String> {
        let all = [self.sent, self.tok, self.attn, self.rq, self.lm];
        if all.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(format!("loss weights must be finite and non-negative: {all:?}"));
        }
        if all.iter().all(|&w| w == 0.0) {
            return Err("at least one loss weight must be positive".into());
        }
        Ok(())
    }
}

/// Values of every term for one sentence (or summed over a batch).
/// Terms whose weight is zero are not computed and stay at 0.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub l_sent: f64,
    pub l_tok: f64,
    pub l_attn: f64,
    pub r_q: f64,
    pub l_lm: f64,
    pub total: f64,
}

impl std::ops::AddAssign for LossBreakdown {
    fn add_assign(&mut self, o: Self) {
        self.l_sent += o.l_sent;
        self.l_tok += o.l_tok;
        self.l_attn += o.l_attn;
        self.r_q += o.r_q;
        self.l_lm += o.l_lm;
        self.total += o.total;
    }
}

impl LossBreakdown {
    pub fn is_finite(&self) -> bool {
        [self.l_sent, self.l_tok, self.l_attn, self.r_q, self.l_lm, self.total]
            .iter()
            .all(|v| v.is_finite())
    }
}

/// `(1 - eps) * onehot(gold) + eps / k`.
pub fn smoothed_target(gold: usize, k: usize, eps: f64) -> Vec<f64> {
    let mut t = vec![eps / k as f64; k];
    t[gold] += 1.0 - eps;
    t
}

/// Smoothed cross-entropy of the sentence distribution softmax(`logits`).
pub fn loss_sentence(tape: &mut Tape, logits: Var, gold: usize, eps: f64) -> Result<Var, TensorError> {
    let k = tape.value(logits).cols();
    if gold >= k {
        return Err(TensorError::OutOfBounds {
            op: "loss_sentence",
            index: gold,
            extent: k,
        });
    }
    let target = Tensor::row(smoothed_target(gold, k, eps));
    tape.softmax_cross_entropy(logits, &target)
}

/// Smoothed cross-entropy of each token's softmax(`scores_i`), summed over
/// the tokens whose flag in `supervised` is set.
pub fn loss_token(
    tape: &mut Tape,
    scores: Var,
    gold: &[usize],
    supervised: &[bool],
    eps: f64,
) -> Result<Var, TensorError> {
    let (n, h) = (tape.value(scores).rows(), tape.value(scores).cols());
    if gold.len() != n || supervised.len() != n {
        return Err(TensorError::ShapeMismatch {
            op: "loss_token",
            left: vec![n, h],
            right: vec![gold.len(), supervised.len()],
        });
    }
    if !supervised.iter().any(|&s| s) {
        return Ok(tape.input(Tensor::scalar(0.0)));
    }
    let mut target = vec![0.0; n * h];
    for (i, (&g, &s)) in gold.iter().zip(supervised).enumerate() {
        if g >= h {
            return Err(TensorError::OutOfBounds {
                op: "loss_token",
                index: g,
                extent: h,
            });
        }
        if s {
            target[i * h..(i + 1) * h].copy_from_slice(&smoothed_target(g, h, eps));
        }
    }
    let target = Tensor::new(vec![n, h], target)?;
    tape.softmax_cross_entropy(scores, &target)
}

/// Attention-supervision penalty on the token distributions t̃ (`[N x H]`).
///
/// Two squared gaps are summed: the largest probability any token gives to
/// the sentence's own label, and the largest probability any token gives to
/// the default label, each measured against 1. When the sentence label is
/// the default the two coincide and a single gap is used. For a binary
/// sentence tagset a non-default sentence takes its maximum over every
/// non-default head.
pub fn loss_attention(
    tape: &mut Tape,
    token_probs: Var,
    sentence_label: usize,
    scheme: &LabelScheme,
) -> Result<Var, TensorError> {
    let (n, h) = (tape.value(token_probs).rows(), tape.value(token_probs).cols());
    let d = scheme.default_token();
    let column = |c: usize| (0..n).map(move |i| i * h + c);
    let gap = |tape: &mut Tape, idx: Vec<usize>| -> Result<Var, TensorError> {
        let sel = tape.select(token_probs, &idx)?;
        let m = tape.max_all(sel);
        let g = tape.add_scalar(m, -1.0);
        tape.mul(g, g)
    };
    let default_gap = gap(tape, column(d).collect())?;
    let label_cols: Vec<usize> = match scheme.mode() {
        SchemeMode::Identical => vec![sentence_label],
        SchemeMode::Binary if sentence_label == scheme.default_sentence() => vec![d],
        SchemeMode::Binary => (0..h).filter(|&c| c != d).collect(),
    };
    if label_cols.iter().any(|&c| c >= h) {
        return Err(TensorError::OutOfBounds {
            op: "loss_attention",
            index: sentence_label,
            extent: h,
        });
    }
    if label_cols == [d] {
        return Ok(default_gap);
    }
    let idx = label_cols.iter().flat_map(|&c| column(c)).collect();
    let label_gap = gap(tape, idx)?;
    tape.add(label_gap, default_gap)
}

/// Mean cosine similarity over all unordered pairs of label queries.
pub fn regularizer_queries(tape: &mut Tape, queries: &[Var]) -> Result<Var, TensorError> {
    if queries.len() < 2 {
        return Err(TensorError::EmptyAxis {
            op: "regularizer_queries",
        });
    }
    let mut pairs = Vec::new();
    for a in 0..queries.len() {
        for b in a + 1..queries.len() {
            pairs.push(tape.cosine(queries[a], queries[b], COSINE_FLOOR)?);
        }
    }
    let all = tape.concat(&pairs, 1)?;
    Ok(tape.mean_all(all))
}

/// Unsmoothed cross-entropy of next-word (forward) and previous-word
/// (backward) predictions, summed over positions and directions.
pub fn loss_lm(tape: &mut Tape, model: &Model, vars: &ForwardVars, lm_ids: &[usize]) -> Result<Var, ModelError> {
    let Some((fwd, bwd)) = model.lm_logits(tape, vars)? else {
        return Ok(tape.input(Tensor::scalar(0.0)));
    };
    let v = tape.value(fwd).cols();
    let onehot = |ids: &[usize]| {
        let mut t = vec![0.0; ids.len() * v];
        for (i, &w) in ids.iter().enumerate() {
            t[i * v + w] = 1.0;
        }
        Tensor::new(vec![ids.len(), v], t)
    };
    let n = lm_ids.len();
    let next = onehot(&lm_ids[1..])?;
    let prev = onehot(&lm_ids[..n - 1])?;
    let lf = tape.softmax_cross_entropy(fwd, &next)?;
    let lb = tape.softmax_cross_entropy(bwd, &prev)?;
    Ok(tape.add(lf, lb)?)
}

/// Handles to each computed term; `None` where the weight is zero.
#[derive(Clone, Copy, Debug)]
pub struct LossVars {
    pub total: Var,
    pub sent: Option<Var>,
    pub tok: Option<Var>,
    pub attn: Option<Var>,
    pub rq: Option<Var>,
    pub lm: Option<Var>,
}

impl LossVars {
    pub fn breakdown(&self, tape: &Tape) -> LossBreakdown {
        let v = |x: Option<Var>| x.map(|x| tape.scalar(x)).unwrap_or(0.0);
        LossBreakdown {
            l_sent: v(self.sent),
            l_tok: v(self.tok),
            l_attn: v(self.attn),
            r_q: v(self.rq),
            l_lm: v(self.lm),
            total: tape.scalar(self.total),
        }
    }
}

/// Weighted sum of the enabled objectives for one sentence.
pub fn total_loss(
    tape: &mut Tape,
    model: &Model,
    vars: &ForwardVars,
    sentence: &Sentence,
    enc: &EncodedSentence,
    weights: &LossWeights,
    eps: f64,
) -> Result<LossVars, ModelError> {
    let sent = if weights.sent > 0.0 {
        Some(loss_sentence(tape, vars.collected, sentence.label, eps)?)
    } else {
        None
    };
    let tok = if weights.tok > 0.0 {
        let gold = sentence.token_labels();
        let flags: Vec<bool> = sentence.tokens.iter().map(|t| t.supervised).collect();
        Some(loss_token(tape, vars.scores, &gold, &flags, eps)?)
    } else {
        None
    };
    let attn = if weights.attn > 0.0 {
        Some(loss_attention(tape, vars.token_probs, sentence.label, model.scheme())?)
    } else {
        None
    };
    let rq = if weights.rq > 0.0 {
        Some(regularizer_queries(tape, &vars.pooled_queries)?)
    } else {
        None
    };
    let lm = if weights.lm > 0.0 {
        Some(loss_lm(tape, model, vars, &enc.lm_ids)?)
    } else {
        None
    };
    let mut parts = Vec::with_capacity(5);
    for (term, w) in [
        (sent, weights.sent),
        (tok, weights.tok),
        (attn, weights.attn),
        (rq, weights.rq),
        (lm, weights.lm),
    ] {
        if let Some(t) = term {
            parts.push(tape.scale(t, w));
        }
    }
    let all = tape.concat(&parts, 1)?;
    let total = tape.sum_all(all);
    Ok(LossVars {
        total,
        sent,
        tok,
        attn,
        rq,
        lm,
    })
}
