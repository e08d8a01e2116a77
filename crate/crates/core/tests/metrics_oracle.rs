//! Metrics checked against direct brute-force recomputation.

use mhal::metrics::{span_counts, token_micro, Counts};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn naive_spans(labels: &[usize], default: usize) -> Vec<(usize, usize, usize)> {
    let n = labels.len();
    let mut out = Vec::new();
    for start in 0..n {
        for end in start..n {
            let l = labels[start];
            let uniform = labels[start..=end].iter().all(|&x| x == l);
            let left_open = start == 0 || labels[start - 1] != l;
            let right_open = end + 1 == n || labels[end + 1] != l;
            if l != default && uniform && left_open && right_open {
                out.push((l, start, end));
            }
        }
    }
    out
}

fn naive_span_counts(pred: &[usize], gold: &[usize], d: usize) -> Counts {
    let p = naive_spans(pred, d);
    let g = naive_spans(gold, d);
    let tp = p.iter().filter(|s| g.contains(s)).count();
    Counts { tp, fp: p.len() - tp, fn_: g.len() - tp }
}

#[test]
fn metrics_equal_brute_force_reference() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for _ in 0..1000 {
        let k = rng.gen_range(2..=6);
        let n = rng.gen_range(1..=20);
        let d = rng.gen_range(0..k);
        let gold: Vec<usize> = (0..n).map(|_| rng.gen_range(0..k)).collect();
        let pred: Vec<usize> = (0..n).map(|_| rng.gen_range(0..k)).collect();

        let m = token_micro(&pred, &gold, k, d, 1.0).unwrap();
        let mut tp = 0;
        let mut tp_s = 0;
        let mut fp_s = 0;
        let mut fn_s = 0;
        for i in 0..n {
            if pred[i] == gold[i] {
                tp += 1;
                if gold[i] != d {
                    tp_s += 1;
                }
            } else {
                if pred[i] != d {
                    fp_s += 1;
                }
                if gold[i] != d {
                    fn_s += 1;
                }
            }
        }
        let prf = |tp: usize, fp: usize, fn_: usize| {
            let p = if tp + fp == 0 { 0.0 } else { tp as f64 / (tp + fp) as f64 };
            let r = if tp + fn_ == 0 { 0.0 } else { tp as f64 / (tp + fn_) as f64 };
            let f = if p + r == 0.0 { 0.0 } else { 2.0 * p * r / (p + r) };
            (p, r, f)
        };
        let (p, r, f) = prf(tp, n - tp, n - tp);
        assert_eq!((m.all.p, m.all.r, m.all.f1), (p, r, f));
        assert_eq!(m.accuracy, tp as f64 / n as f64);
        let (ps, rs, fs) = prf(tp_s, fp_s, fn_s);
        assert_eq!((m.starred.p, m.starred.r, m.starred.f1), (ps, rs, fs));

        assert_eq!(span_counts(&pred, &gold, d).unwrap(), naive_span_counts(&pred, &gold, d));
    }
}
