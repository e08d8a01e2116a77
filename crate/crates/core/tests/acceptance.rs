//! Acceptance report: one PASS/FAIL line per criterion.
//!
//! Criteria 1-4 and 9 check implementation correctness and decide the exit
//! status. Criteria 5-8 are seeded desk-scale training experiments and
//! criterion 10 compares against published corpus statistics; their lines
//! are reported but do not fail the run.
//!
//! `ACCEPTANCE_ONLY=5,7` restricts the run to the listed criteria.

use std::collections::HashMap;
use std::time::{Duration, Instant};

use mhal::corpus::{
    build_vocabs, corpus_stats, generate_synthetic, mask_token_supervision, parse_conll_str, write_conll, Corpus,
    LabelScheme, ParseMode, Provenance, SchemeMode, Sentence, SyntheticSpec, Token,
};
use mhal::engine::{check_gradients, ParamStore, Tape, Tensor, Var};
use mhal::metrics::{f_beta, random_baseline, span_counts, token_micro, Counts, MetricsReport, Prf};
use mhal::model::{collect_sentence_scores, Mode, Model, ModelConfig, ModelError};
use mhal::objectives::{loss_attention, regularizer_queries, smoothed_target, total_loss, LossWeights};
use mhal::trainer::{
    evaluate, gold_labels, init_model, preset_variant, tagsets, train, StoppingMetric, TrainConfig, TrainOutcome,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const GRAD_STEP: f64 = 1e-5;
const GRAD_TOL: f64 = 1e-3;
const GRAD_BUDGET: Duration = Duration::from_secs(60);
const NORM_TOL: f64 = 1e-6;
const FIXTURE_TOL: f64 = 1e-9;
const ZERO_SHOT_MARGIN: f64 = 0.10;
const ZERO_SHOT_BUDGET: Duration = Duration::from_secs(15 * 60);
const SEMI_SUPERVISED_GAP: f64 = 0.05;
const STATS_ROUNDING: f64 = 5e-4;

const SEEDS: [u64; 5] = [1, 2, 3, 4, 5];
const CORPUS_SEED: u64 = 42;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}

// ---------------------------------------------------------------- fixtures

fn desk_spec() -> SyntheticSpec {
    let mut spec = SyntheticSpec::with_labels(5, SchemeMode::Binary, 200, 4);
    spec.marker_prob = 0.05;
    spec
}

fn desk_corpus() -> (Corpus, LabelScheme) {
    let spec = desk_spec();
    let mut rng = ChaCha8Rng::seed_from_u64(CORPUS_SEED);
    let corpus = Corpus::synthetic(&spec, (2000, 500, 500), &mut rng).expect("synthetic corpus");
    (corpus, spec.scheme().expect("scheme"))
}

fn desk_model() -> ModelConfig {
    ModelConfig {
        word_emb_dim: 16,
        char_emb_dim: 8,
        word_rnn_dim: 16,
        char_rnn_dim: 8,
        word_hidden_dim: 16,
        char_hidden_dim: 8,
        attention_evidence_dim: 16,
        sentence_hidden_dim: 16,
        lm_hidden_dim: 8,
        ..ModelConfig::default()
    }
}

fn desk_training() -> TrainConfig {
    TrainConfig {
        max_epochs: 12,
        patience: 4,
        batch_size: 8,
        ..TrainConfig::default()
    }
}

fn toy_config() -> ModelConfig {
    ModelConfig {
        word_emb_dim: 4,
        char_emb_dim: 3,
        word_rnn_dim: 4,
        char_rnn_dim: 3,
        word_hidden_dim: 4,
        char_hidden_dim: 3,
        attention_evidence_dim: 4,
        sentence_hidden_dim: 4,
        lm_hidden_dim: 3,
        ..ModelConfig::default()
    }
}

/// A seeded training run on the desk corpus with a fraction `p` of the
/// training sentences keeping their token labels.
struct Run {
    report: MetricsReport,
    outcome: TrainOutcome,
}

fn run(corpus: &Corpus, scheme: &LabelScheme, variant: &str, p: f64, seed: u64) -> Run {
    let mut train_s = corpus.train.clone();
    let mut mask_rng = ChaCha8Rng::seed_from_u64(seed);
    mask_rng.set_stream(u64::MAX);
    mask_token_supervision(&mut train_s, p, &mut mask_rng).expect("mask");
    let cfg = desk_training();
    let weights = preset_variant(variant).expect("variant");
    let model = init_model(&train_s, scheme, &desk_model(), cfg.lm_vocab_cap, seed).expect("model");
    let outcome = train(model, &train_s, &corpus.dev, &cfg, &weights, seed, None).expect("training");
    let report = evaluate(&outcome.model, &corpus.test, outcome.sentence_source, cfg.beta).expect("evaluation");
    Run { report, outcome }
}

/// Training runs shared between criteria, keyed by (variant, p, seed).
struct Runs {
    corpus: Corpus,
    scheme: LabelScheme,
    cache: HashMap<(String, u64, u64), Run>,
}

impl Runs {
    fn new() -> Self {
        let (corpus, scheme) = desk_corpus();
        Self {
            corpus,
            scheme,
            cache: HashMap::new(),
        }
    }

    fn get(&mut self, variant: &str, p: f64, seed: u64) -> &Run {
        let key = (variant.to_string(), p.to_bits(), seed);
        if !self.cache.contains_key(&key) {
            let r = run(&self.corpus, &self.scheme, variant, p, seed);
            self.cache.insert(key.clone(), r);
        }
        &self.cache[&key]
    }

    fn mean(&mut self, variant: &str, p: f64, f: impl Fn(&Run) -> f64) -> (f64, Vec<f64>) {
        let values: Vec<f64> = SEEDS.iter().map(|&s| f(self.get(variant, p, s))).collect();
        (values.iter().sum::<f64>() / values.len() as f64, values)
    }
}

fn fmt_values(v: &[f64]) -> String {
    v.iter().map(|x| format!("{:.4}", x)).collect::<Vec<_>>().join(" ")
}

// ---------------------------------------------------------------- criteria

fn gradient_suite() -> Outcome {
    let started = Instant::now();
    let spec = SyntheticSpec::with_labels(3, SchemeMode::Binary, 12, 2);
    let scheme = spec.scheme().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut sents = generate_synthetic(&spec, 20, &mut rng).unwrap();
    let marker = spec.markers[0].0.clone();
    sents[0].tokens = ["kalo", "mine", marker.as_str(), "kalo", "rune"]
        .iter()
        .map(|w| Token {
            surface: w.to_string(),
            label: usize::from(*w == marker),
            supervised: true,
        })
        .collect();
    sents[0].label = scheme.non_default_sentence();
    sents[0].provenance = Provenance::Derived;
    let vocabs = build_vocabs(&sents, 8);
    let model = Model::new(toy_config(), scheme, vocabs, &mut rng).unwrap();
    let s = &sents[0];
    let enc = model.encode(s);

    let cases = [
        ("L_sent", LossWeights::new(1.0, 0.0, 0.0, 0.0, 0.0)),
        ("L_tok", LossWeights::new(0.0, 1.0, 0.0, 0.0, 0.0)),
        ("L_attn", LossWeights::new(0.0, 0.0, 1.0, 0.0, 0.0)),
        ("R_q", LossWeights::new(0.0, 0.0, 0.0, 1.0, 0.0)),
        ("L_LM", LossWeights::new(0.0, 0.0, 0.0, 0.0, 1.0)),
        ("MHAL-joint+", preset_variant("MHAL-joint+").unwrap()),
    ];
    let mut worst: f64 = 0.0;
    let (mut failures, mut roundoff) = (0, 0);
    let mut parts = Vec::new();
    for (name, w) in cases {
        let report = check_gradients(model.params(), &[], GRAD_STEP, |tape| {
            let mut rng = ChaCha8Rng::seed_from_u64(3);
            let vars = model.forward(tape, &enc, Mode::Train, &mut rng)?;
            Ok::<_, ModelError>(total_loss(tape, &model, &vars, s, &enc, &w, 0.15)?.total)
        })
        .unwrap();
        worst = worst.max(report.max_rel_error);
        parts.push(format!("{name} {:.1e}", report.max_rel_error));
        failures += report.failures(GRAD_TOL);
        roundoff += report.within_roundoff(GRAD_TOL);
    }
    let elapsed = started.elapsed();
    outcome(
        failures == 0 && elapsed < GRAD_BUDGET,
        format!(
            "{failures} entries over tol {GRAD_TOL:.0e} of {} per term; {roundoff} above tol but within \
             central-difference roundoff; max rel error {worst:.2e}; {}; {:.1}s",
            model.params().numel(),
            parts.join(", "),
            elapsed.as_secs_f64()
        ),
    )
}

fn normalization_invariants() -> Outcome {
    let mut worst: f64 = 0.0;
    for mode in [SchemeMode::Binary, SchemeMode::Identical] {
        let spec = SyntheticSpec::with_labels(4, mode, 60, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let sents = generate_synthetic(&spec, 100, &mut rng).unwrap();
        let model = Model::new(desk_model(), spec.scheme().unwrap(), build_vocabs(&sents, 100), &mut rng).unwrap();
        for s in &sents {
            let o = model.infer(&model.encode(s)).unwrap();
            let n = s.len();
            let h = model.num_heads();
            for i in 0..n {
                worst = worst.max((o.token_probs.row_slice(i).iter().sum::<f64>() - 1.0).abs());
            }
            for c in 0..h {
                worst = worst.max(((0..n).map(|i| o.attention.get(i, c)).sum::<f64>() - 1.0).abs());
            }
            worst = worst.max((o.sentence_probs.iter().sum::<f64>() - 1.0).abs());
        }
    }
    outcome(
        worst <= NORM_TOL,
        format!("200 sentences (binary + identical), max deviation {worst:.2e}"),
    )
}

fn exact_fixtures() -> Outcome {
    let mut failures = Vec::new();
    let mut check = |name: &str, got: f64, want: f64| {
        if !close(got, want, FIXTURE_TOL) {
            failures.push(format!("{name}: {got} vs {want}"));
        }
    };
    for (got, want) in smoothed_target(0, 3, 0.15).iter().zip([0.90, 0.05, 0.05]) {
        check("smoothing", *got, want);
    }

    let store = ParamStore::new();
    let identical = LabelScheme::identical(vec!["O".into(), "N".into(), "P".into()], "O").unwrap();
    let mut tape = Tape::new(&store);
    let probs = tape.input(
        Tensor::from_rows(&[vec![0.8, 0.1, 0.1], vec![0.2, 0.2, 0.6], vec![0.5, 0.4, 0.1]]).unwrap(),
    );
    let l = loss_attention(&mut tape, probs, 2, &identical).unwrap();
    check("L_attn", tape.scalar(l), 0.20);

    let s = 0.5f64.sqrt();
    for (qs, want) in [
        (vec![vec![0.3, -0.2]; 3], 1.0),
        (vec![vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0]], 0.0),
        (vec![vec![1.0, 0.0], vec![s, s]], s),
    ] {
        let vars: Vec<Var> = qs.into_iter().map(|q| tape.input(Tensor::row(q))).collect();
        let r = regularizer_queries(&mut tape, &vars).unwrap();
        check("R_q", tape.scalar(r), want);
    }

    check("F0.5", f_beta(0.5, 0.25, 0.5), 1.25 * 0.125 / (0.25 * 0.5 + 0.25));

    let scores = tape.input(Tensor::new(vec![3, 1], vec![0.4, -1.2, 2.5]).unwrap());
    let c = collect_sentence_scores(&mut tape, scores, &identical).unwrap();
    for (got, want) in tape.value(c).data().iter().zip([0.4, -1.2, 2.5]) {
        check("collect identical", *got, want);
    }
    let binary = LabelScheme::binary(vec!["O".into(), "A".into(), "B".into(), "C".into()], "O").unwrap();
    let scores = tape.input(Tensor::new(vec![4, 1], vec![0.3, -0.7, 1.9, 0.2]).unwrap());
    let c = collect_sentence_scores(&mut tape, scores, &binary).unwrap();
    let d = binary.default_sentence();
    let mut want = [0.0; 2];
    want[d] = 0.3;
    want[1 - d] = 1.9;
    for (got, want) in tape.value(c).data().iter().zip(want) {
        check("collect binary", *got, want);
    }

    outcome(
        failures.is_empty(),
        if failures.is_empty() {
            "smoothing, L_attn 0.20, R_q {1, 0, 1/sqrt 2}, F0.5 0.4167, collection (identical + binary)".into()
        } else {
            failures.join("; ")
        },
    )
}

fn naive_spans(labels: &[usize], default: usize) -> Vec<(usize, usize, usize)> {
    let mut out = Vec::new();
    for start in 0..labels.len() {
        for end in start + 1..=labels.len() {
            let l = labels[start];
            let uniform = labels[start..end].iter().all(|&x| x == l);
            let left_open = start == 0 || labels[start - 1] != l;
            let right_open = end == labels.len() || labels[end] != l;
            if l != default && uniform && left_open && right_open {
                out.push((l, start, end));
            }
        }
    }
    out
}

fn metric_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut mismatches = 0;
    for _ in 0..1000 {
        let k = rng.gen_range(2..=6);
        let n = rng.gen_range(1..=20);
        let default = rng.gen_range(0..k);
        let gold: Vec<usize> = (0..n).map(|_| rng.gen_range(0..k)).collect();
        let pred: Vec<usize> = (0..n).map(|_| rng.gen_range(0..k)).collect();

        let mut star = Counts::default();
        let mut all = Counts::default();
        for (&p, &g) in pred.iter().zip(&gold) {
            if p == g {
                all.tp += 1;
            } else {
                all.fp += 1;
                all.fn_ += 1;
            }
            if p == g && g != default {
                star.tp += 1;
            }
            if p != default && p != g {
                star.fp += 1;
            }
            if g != default && p != g {
                star.fn_ += 1;
            }
        }
        let m = token_micro(&pred, &gold, k, default, 1.0).unwrap();
        let ps = naive_spans(&pred, default);
        let gs = naive_spans(&gold, default);
        let tp = ps.iter().filter(|s| gs.contains(s)).count();
        let span = Counts {
            tp,
            fp: ps.len() - tp,
            fn_: gs.len() - tp,
        };
        let ok = m.starred == Prf::from_counts(star, 1.0)
            && m.all == Prf::from_counts(all, 1.0)
            && span_counts(&pred, &gold, default).unwrap() == span;
        mismatches += usize::from(!ok);
    }
    outcome(mismatches == 0, format!("1000 random sequences, {mismatches} mismatches"))
}

fn zero_shot(runs: &mut Runs) -> Outcome {
    let started = Instant::now();
    let (f1, per_seed) = runs.mean("MHAL-sent+", 0.0, |r| r.report.token.starred.f1);
    let elapsed = started.elapsed();
    let gold = gold_labels(&runs.corpus.test);
    let tags = tagsets(&runs.scheme);
    let baseline = random_baseline(&gold, tags, 1.0, &mut ChaCha8Rng::seed_from_u64(0), 10).unwrap();
    let base = baseline.token.starred.f1;
    let elapsed_ok = elapsed <= ZERO_SHOT_BUDGET;
    outcome(
        f1 - base >= ZERO_SHOT_MARGIN && elapsed_ok,
        format!(
            "MHAL-sent+ test F1* {:.2}% vs random {:.2}% (margin {:+.2}, need +{:.0}); seeds [{}]; {:.0}s",
            100.0 * f1,
            100.0 * base,
            100.0 * (f1 - base),
            100.0 * ZERO_SHOT_MARGIN,
            fmt_values(&per_seed),
            elapsed.as_secs_f64()
        ),
    )
}

fn joint_beats_single(runs: &mut Runs) -> Outcome {
    let (joint_tok, jt) = runs.mean("MHAL-joint", 1.0, |r| r.report.token.starred.f1);
    let (single_tok, st) = runs.mean("BiLSTM-tok-equiv", 1.0, |r| r.report.token.starred.f1);
    let (joint_sent, _) = runs.mean("MHAL-joint", 1.0, |r| r.report.sentence.all.f1);
    let (single_sent, _) = runs.mean("BiLSTM-tok-equiv", 1.0, |r| r.report.sentence.all.f1);
    outcome(
        joint_tok >= single_tok && joint_sent >= single_sent,
        format!(
            "token F1* joint {:.2}% vs tok-only {:.2}% [{}] vs [{}]; sentence F1 joint {:.2}% vs tok-derived {:.2}%",
            100.0 * joint_tok,
            100.0 * single_tok,
            fmt_values(&jt),
            fmt_values(&st),
            100.0 * joint_sent,
            100.0 * single_sent
        ),
    )
}

fn semi_supervised(runs: &mut Runs) -> Outcome {
    let (full, full_seeds) = runs.mean("MHAL-joint+", 1.0, |r| r.report.token.starred.f1);
    let (half, per_seed) = runs.mean("MHAL-joint+", 0.5, |r| r.report.token.starred.f1);
    outcome(
        full - half <= SEMI_SUPERVISED_GAP,
        format!(
            "MHAL-joint+ F1* p=0.5 {:.2}% [{}] vs p=1.0 {:.2}% [{}] (gap {:.2}, limit {:.0})",
            100.0 * half,
            fmt_values(&per_seed),
            100.0 * full,
            fmt_values(&full_seeds),
            100.0 * (full - half),
            100.0 * SEMI_SUPERVISED_GAP
        ),
    )
}

/// Mean pairwise cosine between pooled head queries over test sentences.
fn query_similarity(model: &Model, sents: &[Sentence]) -> f64 {
    let mut total = 0.0;
    let mut n = 0usize;
    for s in sents.iter().take(200) {
        let o = model.infer(&model.encode(s)).unwrap();
        let q = &o.pooled_queries;
        for a in 0..q.len() {
            for b in a + 1..q.len() {
                let (x, y) = (q[a].data(), q[b].data());
                let dot: f64 = x.iter().zip(y).map(|(u, v)| u * v).sum();
                let nx = x.iter().map(|u| u * u).sum::<f64>().sqrt();
                let ny = y.iter().map(|u| u * u).sum::<f64>().sqrt();
                total += dot / (nx * ny).max(1e-12);
                n += 1;
            }
        }
    }
    total / n as f64
}

fn rq_effect(runs: &mut Runs) -> Outcome {
    let test = runs.corpus.test.clone();
    let (with_rq, a) = runs.mean("MHAL-joint+Rq", 1.0, |r| query_similarity(&r.outcome.model, &test));
    let (without, b) = runs.mean("MHAL-joint", 1.0, |r| query_similarity(&r.outcome.model, &test));
    outcome(
        with_rq < without,
        format!(
            "mean pairwise query cosine: lambda_Rq=0.5 {with_rq:.4} [{}] vs lambda_Rq=0 {without:.4} [{}]",
            fmt_values(&a),
            fmt_values(&b)
        ),
    )
}

fn early_stopping() -> Outcome {
    let spec = desk_spec();
    let scheme = spec.scheme().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let train_s = generate_synthetic(&spec, 120, &mut rng).unwrap();
    let mut quiet = spec.clone();
    quiet.marker_prob = 0.0;
    let frozen_dev = generate_synthetic(&quiet, 40, &mut rng).unwrap();
    let dev = generate_synthetic(&spec, 60, &mut rng).unwrap();
    let weights = preset_variant("MHAL-joint").unwrap();
    let small = ModelConfig {
        word_emb_dim: 8,
        char_emb_dim: 4,
        word_rnn_dim: 8,
        char_rnn_dim: 4,
        word_hidden_dim: 8,
        char_hidden_dim: 4,
        attention_evidence_dim: 8,
        sentence_hidden_dim: 8,
        lm_hidden_dim: 4,
        ..ModelConfig::default()
    };

    let patience = 3;
    let cfg = TrainConfig {
        max_epochs: 50,
        patience,
        batch_size: 16,
        stopping: Some(StoppingMetric::TokenF1Star),
        ..TrainConfig::default()
    };
    let m = init_model(&train_s, &scheme, &small, cfg.lm_vocab_cap, 1).unwrap();
    let frozen = train(m, &train_s, &frozen_dev, &cfg, &weights, 1, None).unwrap();
    let values: Vec<f64> = frozen.log.iter().map(|r| r.stopping_value).collect();
    let is_frozen = values.windows(2).all(|w| w[0] == w[1]);
    let halted = frozen.log.len() == patience + 1;

    let cfg = TrainConfig {
        max_epochs: 4,
        patience: 10,
        batch_size: 16,
        stopping: Some(StoppingMetric::Mean),
        ..TrainConfig::default()
    };
    let m = init_model(&train_s, &scheme, &small, cfg.lm_vocab_cap, 2).unwrap();
    let mean_run = train(m, &train_s, &dev, &cfg, &weights, 2, None).unwrap();
    let mean_ok = mean_run.log.iter().all(|r| {
        r.stopping_metric == StoppingMetric::Mean
            && close(r.stopping_value, (r.dev_sentence_f1_star + r.dev_token_f1_star) / 2.0, 1e-12)
    });
    outcome(
        is_frozen && halted && mean_ok,
        format!(
            "frozen metric ran {} epochs with patience {patience}; mean criterion logged correctly on {} epochs: {mean_ok}",
            frozen.log.len(),
            mean_run.log.len()
        ),
    )
}

/// A corpus with the SST training-split label counts, written as CoNLL
/// text and read back through the parser.
fn sst_shaped_fixture() -> (Vec<Sentence>, LabelScheme) {
    let scheme = LabelScheme::identical(vec!["O".into(), "N".into(), "P".into()], "O").unwrap();
    let sentence_counts = [1624usize, 3310, 3610];
    let token_counts = [128_156usize, 13_384, 22_026];
    let n_sent: usize = sentence_counts.iter().sum();
    let n_tok: usize = token_counts.iter().sum();
    let token_labels: Vec<usize> = token_counts
        .iter()
        .enumerate()
        .flat_map(|(l, &c)| std::iter::repeat(l).take(c))
        .collect();
    let sentence_labels: Vec<usize> = sentence_counts
        .iter()
        .enumerate()
        .flat_map(|(l, &c)| std::iter::repeat(l).take(c))
        .collect();
    let mut sents = Vec::with_capacity(n_sent);
    let mut cursor = 0;
    for (k, &label) in sentence_labels.iter().enumerate() {
        let end = n_tok * (k + 1) / n_sent;
        let tokens = token_labels[cursor..end]
            .iter()
            .enumerate()
            .map(|(i, &l)| Token {
                surface: format!("w{}", (cursor + i) % 997),
                label: l,
                supervised: true,
            })
            .collect();
        cursor = end;
        sents.push(Sentence {
            tokens,
            label,
            provenance: Provenance::Annotated,
        });
    }
    let text = write_conll(&sents, &scheme);
    let parsed = parse_conll_str(&text, &scheme, ParseMode::Labelled).unwrap();
    (parsed, scheme)
}

fn corpus_statistics() -> Outcome {
    let (sents, scheme) = sst_shaped_fixture();
    let stats = corpus_stats(&sents, &scheme);
    let prop_ok = close(stats.token.prop_default, 0.78, 5e-3);
    let entropy_ok = close(stats.sentence.full_entropy, 1.509, STATS_ROUNDING);
    outcome(
        prop_ok && entropy_ok,
        format!(
            "token prop-O {:.4} (want 0.78); sentence entropy {:.4} (want 1.509 +/- {STATS_ROUNDING}); \
             also sentence non-O entropy {:.3}, token entropy {:.3}, token non-O entropy {:.3}",
            stats.token.prop_default,
            stats.sentence.full_entropy,
            stats.sentence.non_default_entropy,
            stats.token.full_entropy,
            stats.token.non_default_entropy
        ),
    )
}

fn main() {
    let only: Option<Vec<u32>> = std::env::var("ACCEPTANCE_ONLY")
        .ok()
        .map(|v| v.split(',').filter_map(|x| x.trim().parse().ok()).collect());
    let selected = |k: u32| only.as_ref().map_or(true, |o| o.contains(&k));
    let gating = [1, 2, 3, 4, 9];
    let mut runs = Runs::new();

    type Criterion<'a> = (u32, &'a str, Box<dyn FnOnce(&mut Runs) -> Outcome + 'a>);
    let criteria: Vec<Criterion> = vec![
        (1, "gradient suite", Box::new(|_| gradient_suite())),
        (2, "normalization invariants", Box::new(|_| normalization_invariants())),
        (3, "exact-value fixtures", Box::new(|_| exact_fixtures())),
        (4, "metric oracle equivalence", Box::new(|_| metric_oracle())),
        (5, "zero-shot transfer", Box::new(zero_shot)),
        (6, "joint beats single-task", Box::new(joint_beats_single)),
        (7, "semi-supervised curve", Box::new(semi_supervised)),
        (8, "query regularizer effect", Box::new(rq_effect)),
        (9, "early stopping", Box::new(|_| early_stopping())),
        (10, "corpus statistics ingestion", Box::new(|_| corpus_statistics())),
    ];

    let mut gated_failures = Vec::new();
    for (k, name, f) in criteria {
        if !selected(k) {
            continue;
        }
        let started = Instant::now();
        let o = f(&mut runs);
        let verdict = if o.pass { "PASS" } else { "FAIL" };
        let note = if gating.contains(&k) { "" } else { " [reported]" };
        println!(
            "criterion {k:>2} {verdict}{note} {name}: {} ({:.1}s)",
            o.detail,
            started.elapsed().as_secs_f64()
        );
        if !o.pass && gating.contains(&k) {
            gated_failures.push(k);
        }
    }
    if !gated_failures.is_empty() {
        println!("acceptance: gating criteria failed: {gated_failures:?}");
        std::process::exit(1);
    }
}
