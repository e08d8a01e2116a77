//! Precision, recall and F-scores at the token, span and sentence level.
//!
//! Every ratio uses the convention 0/0 = 0.

use std::fmt::Write as _;

use rand::Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum MetricsError {
    #[error("{what}: {pred} predictions for {gold} gold labels")]
    LengthMismatch { what: &'static str, pred: usize, gold: usize },
    #[error("label {label} outside a tagset of {size}")]
    LabelOutOfRange { label: usize, size: usize },
    #[error("random baseline needs at least one trial")]
    NoTrials,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counts {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
}

fn ratio(a: f64, b: f64) -> f64 {
    if b == 0.0 {
        0.0
    } else {
        a / b
    }
}

/// (1 + β²)·P·R / (β²·P + R).
pub fn f_beta(p: f64, r: f64, beta: f64) -> f64 {
    let b2 = beta * beta;
    ratio((1.0 + b2) * p * r, b2 * p + r)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Prf {
    pub p: f64,
    pub r: f64,
    pub f1: f64,
    pub f_beta: f64,
}

impl Prf {
    pub fn from_counts(c: Counts, beta: f64) -> Self {
        let p = ratio(c.tp as f64, (c.tp + c.fp) as f64);
        let r = ratio(c.tp as f64, (c.tp + c.fn_) as f64);
        Self {
            p,
            r,
            f1: f_beta(p, r, 1.0),
            f_beta: f_beta(p, r, beta),
        }
    }
}

/// Metrics for one level (tokens or sentences).
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LevelMetrics {
    /// Per-label counts, in tagset order.
    pub per_label: Vec<Counts>,
    /// Micro average over every label.
    pub all: Prf,
    /// Micro average over the non-default labels.
    pub starred: Prf,
    pub accuracy: f64,
}

fn check(what: &'static str, pred: &[usize], gold: &[usize], size: usize) -> Result<(), MetricsError> {
    if pred.len() != gold.len() {
        return Err(MetricsError::LengthMismatch {
            what,
            pred: pred.len(),
            gold: gold.len(),
        });
    }
    if let Some(&label) = pred.iter().chain(gold).find(|&&l| l >= size) {
        return Err(MetricsError::LabelOutOfRange { label, size });
    }
    Ok(())
}

fn level(pred: &[usize], gold: &[usize], size: usize, default: usize, beta: f64) -> LevelMetrics {
    let mut per_label = vec![Counts::default(); size];
    let mut correct = 0;
    for (&p, &g) in pred.iter().zip(gold) {
        if p == g {
            per_label[g].tp += 1;
            correct += 1;
        } else {
            per_label[p].fp += 1;
            per_label[g].fn_ += 1;
        }
    }
    let sum = |skip: Option<usize>| {
        per_label
            .iter()
            .enumerate()
            .filter(|(i, _)| Some(*i) != skip)
            .fold(Counts::default(), |a, (_, c)| Counts {
                tp: a.tp + c.tp,
                fp: a.fp + c.fp,
                fn_: a.fn_ + c.fn_,
            })
    };
    LevelMetrics {
        all: Prf::from_counts(sum(None), beta),
        starred: Prf::from_counts(sum(Some(default)), beta),
        accuracy: ratio(correct as f64, pred.len() as f64),
        per_label,
    }
}

/// Token-level micro metrics over flattened label sequences.
pub fn token_micro(
    pred: &[usize],
    gold: &[usize],
    num_labels: usize,
    default: usize,
    beta: f64,
) -> Result<LevelMetrics, MetricsError> {
    check("token_micro", pred, gold, num_labels)?;
    Ok(level(pred, gold, num_labels, default, beta))
}

/// Sentence-level counterpart of [`token_micro`].
pub fn sentence_metrics(
    pred: &[usize],
    gold: &[usize],
    num_labels: usize,
    default: usize,
    beta: f64,
) -> Result<LevelMetrics, MetricsError> {
    check("sentence_metrics", pred, gold, num_labels)?;
    Ok(level(pred, gold, num_labels, default, beta))
}

/// Maximal run of one non-default label, `start..=end`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Span {
    pub label: usize,
    pub start: usize,
    pub end: usize,
}

pub fn extract_spans(labels: &[usize], default: usize) -> Vec<Span> {
    let mut spans = Vec::new();
    let mut i = 0;
    while i < labels.len() {
        let l = labels[i];
        let start = i;
        while i + 1 < labels.len() && labels[i + 1] == l {
            i += 1;
        }
        if l != default {
            spans.push(Span { label: l, start, end: i });
        }
        i += 1;
    }
    spans
}

/// Exact-match span counts for one sequence.
pub fn span_counts(pred: &[usize], gold: &[usize], default: usize) -> Result<Counts, MetricsError> {
    if pred.len() != gold.len() {
        return Err(MetricsError::LengthMismatch {
            what: "span_f1",
            pred: pred.len(),
            gold: gold.len(),
        });
    }
    let p = extract_spans(pred, default);
    let g = extract_spans(gold, default);
    // both lists are sorted by start and non-overlapping
    let (mut i, mut j, mut tp) = (0, 0, 0);
    while i < p.len() && j < g.len() {
        match p[i].start.cmp(&g[j].start) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                if p[i] == g[j] {
                    tp += 1;
                }
                i += 1;
                j += 1;
            }
        }
    }
    Ok(Counts {
        tp,
        fp: p.len() - tp,
        fn_: g.len() - tp,
    })
}

/// Entity-level P/R/F over a set of sequences.
pub fn span_f1<P: AsRef<[usize]>, G: AsRef<[usize]>>(
    pred: &[P],
    gold: &[G],
    default: usize,
    beta: f64,
) -> Result<Prf, MetricsError> {
    if pred.len() != gold.len() {
        return Err(MetricsError::LengthMismatch {
            what: "span_f1",
            pred: pred.len(),
            gold: gold.len(),
        });
    }
    let mut total = Counts::default();
    for (p, g) in pred.iter().zip(gold) {
        let c = span_counts(p.as_ref(), g.as_ref(), default)?;
        total.tp += c.tp;
        total.fp += c.fp;
        total.fn_ += c.fn_;
    }
    Ok(Prf::from_counts(total, beta))
}

/// Token, span and sentence metrics for one evaluation set.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub beta: f64,
    pub token: LevelMetrics,
    pub span: Prf,
    pub sentence: LevelMetrics,
}

/// Gold and predicted labels for a set of sentences.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Labelled {
    pub tokens: Vec<Vec<usize>>,
    pub sentences: Vec<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Tagsets {
    pub num_token_labels: usize,
    pub num_sentence_labels: usize,
    pub default_token: usize,
    pub default_sentence: usize,
}

impl MetricsReport {
    pub fn compute(pred: &Labelled, gold: &Labelled, tags: Tagsets, beta: f64) -> Result<Self, MetricsError> {
        if pred.tokens.len() != gold.tokens.len() {
            return Err(MetricsError::LengthMismatch {
                what: "sentences",
                pred: pred.tokens.len(),
                gold: gold.tokens.len(),
            });
        }
        for (p, g) in pred.tokens.iter().zip(&gold.tokens) {
            if p.len() != g.len() {
                return Err(MetricsError::LengthMismatch {
                    what: "tokens",
                    pred: p.len(),
                    gold: g.len(),
                });
            }
        }
        let flat_p: Vec<usize> = pred.tokens.iter().flatten().copied().collect();
        let flat_g: Vec<usize> = gold.tokens.iter().flatten().copied().collect();
        Ok(Self {
            beta,
            token: token_micro(&flat_p, &flat_g, tags.num_token_labels, tags.default_token, beta)?,
            span: span_f1(&pred.tokens, &gold.tokens, tags.default_token, beta)?,
            sentence: sentence_metrics(
                &pred.sentences,
                &gold.sentences,
                tags.num_sentence_labels,
                tags.default_sentence,
                beta,
            )?,
        })
    }

    /// `name = value` lines with percentages, named after the usual table
    /// column heads (`P*`, `F1*`, `F0.5*`, `Acc`, `S-F1`, ...).
    pub fn render(&self) -> String {
        let fb = format!("F{}", self.beta);
        let mut out = String::new();
        let mut line = |k: &str, v: f64| {
            let _ = writeln!(out, "{k} = {:.2}", 100.0 * v);
        };
        for (prefix, lvl) in [("", &self.token), ("S-", &self.sentence)] {
            line(&format!("{prefix}P"), lvl.all.p);
            line(&format!("{prefix}R"), lvl.all.r);
            line(&format!("{prefix}F1"), lvl.all.f1);
            line(&format!("{prefix}{fb}"), lvl.all.f_beta);
            line(&format!("{prefix}P*"), lvl.starred.p);
            line(&format!("{prefix}R*"), lvl.starred.r);
            line(&format!("{prefix}F1*"), lvl.starred.f1);
            line(&format!("{prefix}{fb}*"), lvl.starred.f_beta);
            line(&format!("{prefix}Acc"), lvl.accuracy);
        }
        line("Span-P", self.span.p);
        line("Span-R", self.span.r);
        line("Span-F1", self.span.f1);
        out
    }

    fn scalars_mut(&mut self) -> Vec<&mut f64> {
        let mut v = Vec::new();
        for lvl in [&mut self.token, &mut self.sentence] {
            for prf in [&mut lvl.all, &mut lvl.starred] {
                v.extend([&mut prf.p, &mut prf.r, &mut prf.f1, &mut prf.f_beta]);
            }
            v.push(&mut lvl.accuracy);
        }
        v.extend([&mut self.span.p, &mut self.span.r, &mut self.span.f1, &mut self.span.f_beta]);
        v
    }

    /// Element-wise mean of the scalar metrics. Per-label counts of the
    /// result are empty.
    pub fn mean(reports: &[MetricsReport]) -> MetricsReport {
        let mut acc = MetricsReport {
            beta: reports.first().map(|r| r.beta).unwrap_or(1.0),
            ..Default::default()
        };
        if reports.is_empty() {
            return acc;
        }
        for r in reports {
            let mut r = r.clone();
            for (a, b) in acc.scalars_mut().into_iter().zip(r.scalars_mut()) {
                *a += *b;
            }
        }
        let n = reports.len() as f64;
        for a in acc.scalars_mut() {
            *a /= n;
        }
        acc
    }
}

/// Expected metrics when every token and sentence label is drawn uniformly
/// from its tagset, estimated as the mean over `trials` draws.
pub fn random_baseline<R: Rng + ?Sized>(
    gold: &Labelled,
    tags: Tagsets,
    beta: f64,
    rng: &mut R,
    trials: usize,
) -> Result<MetricsReport, MetricsError> {
    if trials == 0 {
        return Err(MetricsError::NoTrials);
    }
    let mut reports = Vec::with_capacity(trials);
    for _ in 0..trials {
        let pred = Labelled {
            tokens: gold
                .tokens
                .iter()
                .map(|s| s.iter().map(|_| rng.gen_range(0..tags.num_token_labels)).collect())
                .collect(),
            sentences: gold
                .sentences
                .iter()
                .map(|_| rng.gen_range(0..tags.num_sentence_labels))
                .collect(),
        };
        reports.push(MetricsReport::compute(&pred, gold, tags, beta)?);
    }
    Ok(MetricsReport::mean(&reports))
}
