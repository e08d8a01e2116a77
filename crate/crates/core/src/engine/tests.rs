use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::*;

fn random_store(shapes: &[(usize, usize)], seed: u64) -> (ParamStore, Vec<ParamId>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut store = ParamStore::new();
    let ids = shapes
        .iter()
        .enumerate()
        .map(|(i, &(r, c))| store.add(format!("p{i}"), glorot_uniform(r, c, &mut rng)))
        .collect();
    (store, ids)
}

fn assert_grads(store: &ParamStore, f: impl Fn(&mut Tape) -> Result<Var, TensorError>, tol: f64) {
    let report = check_gradients(store, &[], 1e-5, f).unwrap();
    assert!(
        report.max_rel_error <= tol,
        "max relative error {} at {:?} (analytic {}, numeric {})",
        report.max_rel_error,
        report.worst,
        report.analytic,
        report.numeric
    );
}

#[test]
fn matmul_identity_and_scalar() {
    let store = ParamStore::new();
    let mut tape = Tape::new(&store);
    let eye = tape.input(Tensor::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap());
    let m = tape.input(Tensor::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap());
    let out = tape.matmul(eye, m).unwrap();
    assert_eq!(tape.value(out).data(), &[1.0, 2.0, 3.0, 4.0]);

    let a = tape.input(Tensor::scalar(3.0));
    let b = tape.input(Tensor::scalar(-2.5));
    let ab = tape.matmul(a, b).unwrap();
    assert_eq!(tape.scalar(ab), -7.5);
}

#[test]
fn matmul_shape_error_names_both_shapes() {
    let store = ParamStore::new();
    let mut tape = Tape::new(&store);
    let a = tape.input(Tensor::zeros(2, 3));
    let b = tape.input(Tensor::zeros(2, 3));
    let err = tape.matmul(a, b).unwrap_err();
    let msg = err.to_string();
    assert!(msg.contains("[2, 3]"), "{msg}");
    assert!(matches!(err, TensorError::ShapeMismatch { .. }));
}

#[test]
fn matmul_gradient_matches_finite_differences() {
    let (store, ids) = random_store(&[(3, 4), (4, 2)], 7);
    let report = check_gradients(&store, &[ids[0]], 1e-5, |t: &mut Tape| {
        let a = t.param(ids[0]);
        let b = t.param(ids[1]);
        let c = t.matmul(a, b)?;
        Ok::<_, TensorError>(t.sum_all(c))
    })
    .unwrap();
    assert_eq!(report.checked, 12);
    assert!(report.max_rel_error <= 1e-6, "{report:?}");
}

#[test]
fn elementwise_activations() {
    let store = ParamStore::new();
    let mut tape = Tape::new(&store);
    let z = tape.input(Tensor::scalar(0.0));
    let t = tape.tanh(z);
    let s = tape.sigmoid(z);
    let e = tape.exp(z);
    assert_eq!(tape.scalar(t), 0.0);
    assert_eq!(tape.scalar(s), 0.5);
    assert_eq!(tape.scalar(e), 1.0);
}

#[test]
fn tanh_gradient_at_point_three() {
    let mut store = ParamStore::new();
    let id = store.add("x", Tensor::scalar(0.3));
    let report = check_gradients(&store, &[], 1e-5, |t: &mut Tape| {
        let x = t.param(id);
        Ok::<_, TensorError>(t.tanh(x))
    })
    .unwrap();
    assert!(report.max_rel_error <= 1e-6, "{report:?}");
    let expected = 1.0 - 0.3f64.tanh().powi(2);
    assert!((report.analytic - expected).abs() < 1e-15);
}

#[test]
fn softmax_closed_forms() {
    let store = ParamStore::new();
    let mut tape = Tape::new(&store);
    let x = tape.input(Tensor::row(vec![0.0, 0.0, 0.0]));
    let y = tape.softmax(x, 1).unwrap();
    for &v in tape.value(y).data() {
        assert!((v - 1.0 / 3.0).abs() < 1e-12);
    }
    let x = tape.input(Tensor::row(vec![2f64.ln(), 0.0]));
    let y = tape.softmax(x, 1).unwrap();
    assert!((tape.value(y).data()[0] - 2.0 / 3.0).abs() < 1e-12);
    assert!((tape.value(y).data()[1] - 1.0 / 3.0).abs() < 1e-12);
    assert!(tape.softmax(x, 2).is_err());
}

#[test]
fn softmax_column_axis() {
    let store = ParamStore::new();
    let mut tape = Tape::new(&store);
    let x = tape.input(Tensor::from_rows(&[vec![0.0, 1.0], vec![0.0, 1.0]]).unwrap());
    let y = tape.softmax(x, 0).unwrap();
    assert_eq!(tape.value(y).data(), &[0.5, 0.5, 0.5, 0.5]);
}

#[test]
fn dropout_rate_zero_is_identity_and_rate_one_rejected() {
    let store = ParamStore::new();
    let mut tape = Tape::new(&store);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let x = tape.input(Tensor::row(vec![1.0, -2.0, 3.0]));
    let y = tape.dropout(x, 0.0, &mut rng).unwrap();
    assert_eq!(tape.value(y), tape.value(x));
    assert!(matches!(tape.dropout(x, 1.0, &mut rng), Err(TensorError::InvalidRate(_))));
    assert!(tape.dropout(x, -0.1, &mut rng).is_err());
}

#[test]
fn dropout_keeps_half_and_rescales() {
    let store = ParamStore::new();
    let mut tape = Tape::new(&store);
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let n = 100_000;
    let x = tape.input(Tensor::row(vec![1.0; n]));
    let y = tape.dropout(x, 0.5, &mut rng).unwrap();
    let vals = tape.value(y).data();
    let kept = vals.iter().filter(|&&v| v != 0.0).count() as f64 / n as f64;
    assert!((kept - 0.5).abs() <= 0.01, "kept fraction {kept}");
    assert!(vals.iter().all(|&v| v == 0.0 || v == 2.0));
}

#[test]
fn mean_over_axis_zero() {
    let store = ParamStore::new();
    let mut tape = Tape::new(&store);
    let x = tape.input(Tensor::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap());
    let m = tape.mean_axis(x, 0).unwrap();
    assert_eq!(tape.value(m).shape(), &[1, 2]);
    assert_eq!(tape.value(m).data(), &[0.5, 0.5]);
}

#[test]
fn fan_out_accumulates() {
    let mut store = ParamStore::new();
    let id = store.add("x", Tensor::scalar(1.7));
    let mut grads = Gradients::zeros_like(&store);
    let mut tape = Tape::new(&store);
    let x = tape.param(id);
    let y = tape.add(x, x).unwrap();
    tape.backward(y, &mut grads).unwrap();
    assert_eq!(grads.get(id), &[2.0]);
}

#[test]
fn identity_chain_and_untouched_params() {
    let mut store = ParamStore::new();
    let id = store.add("x", Tensor::scalar(0.4));
    let other = store.add("unused", Tensor::row(vec![1.0, 2.0]));
    let mut grads = Gradients::zeros_like(&store);
    let mut tape = Tape::new(&store);
    let x = tape.param(id);
    tape.backward(x, &mut grads).unwrap();
    assert_eq!(grads.get(id), &[1.0]);
    assert_eq!(grads.get(other), &[0.0, 0.0]);
}

#[test]
fn backward_rejects_non_scalar() {
    let mut store = ParamStore::new();
    let id = store.add("x", Tensor::row(vec![1.0, 2.0]));
    let mut grads = Gradients::zeros_like(&store);
    let mut tape = Tape::new(&store);
    let x = tape.param(id);
    assert!(matches!(tape.backward(x, &mut grads), Err(TensorError::NonScalarLoss(_))));
}

#[test]
fn every_primitive_matches_finite_differences() {
    let (store, ids) = random_store(&[(3, 4), (4, 4), (1, 4), (3, 4)], 11);
    assert_grads(
        &store,
        |t| {
            let a = t.param(ids[0]);
            let w = t.param(ids[1]);
            let b = t.param(ids[2]);
            let c = t.param(ids[3]);
            let h = t.matmul(a, w)?;
            let h = t.add_row(h, b)?;
            let h = t.tanh(h);
            let s = t.sigmoid(c);
            let p = t.mul(h, s)?;
            let q = t.div(p, s)?;
            let q = t.sub(q, c)?;
            let e = t.exp(q);
            let sm = t.softmax(e, 1)?;
            let nc = t.normalize(s, 0)?;
            let mix = t.add(sm, nc)?;
            let tr = t.transpose(mix);
            let sl = t.slice(tr, 0, 1, 2)?;
            let cl = t.slice(tr, 1, 0, 2)?;
            let clt = t.transpose(cl);
            let cat = t.concat(&[sl, clt], 1)?;
            let mean = t.mean_axis(cat, 0)?;
            let sums = t.sum_axis(cat, 1)?;
            let sel = t.select(cat, &[0, 3, 5])?;
            let mx = t.max_all(sel);
            let sq = t.sqrt(s);
            let head = t.slice(mean, 1, 0, 4)?;
            let a1 = t.row(a, 1)?;
            let cos = t.cosine(head, a1, 1e-12)?;
            let m1 = t.sum_all(mean);
            let m2 = t.sum_all(sums);
            let m3 = t.sum_all(sq);
            let m4 = t.scale(mx, 0.7);
            let m5 = t.add_scalar(cos, -1.0);
            let m5 = t.mul(m5, m5)?;
            let all = t.concat(&[m1, m2, m3, m4, m5], 1)?;
            Ok(t.sum_all(all))
        },
        1e-6,
    );
}

#[test]
fn cross_entropy_gradient_and_value() {
    let (store, ids) = random_store(&[(2, 3)], 3);
    let targets = Tensor::from_rows(&[vec![0.9, 0.05, 0.05], vec![0.0, 1.0, 0.0]]).unwrap();
    assert_grads(
        &store,
        |t| {
            let x = t.param(ids[0]);
            t.softmax_cross_entropy(x, &targets)
        },
        1e-6,
    );
    let store = ParamStore::new();
    let mut tape = Tape::new(&store);
    let x = tape.input(Tensor::row(vec![0.0; 3]));
    let l = tape.softmax_cross_entropy(x, &Tensor::row(vec![1.0, 0.0, 0.0])).unwrap();
    assert!((tape.scalar(l) - 3f64.ln()).abs() < 1e-12);
}

#[test]
fn lstm_gradients_both_directions() {
    let (store, ids) = random_store(&[(5, 3), (3, 12), (1, 12), (3, 12)], 5);
    for reverse in [false, true] {
        assert_grads(
            &store,
            |t| {
                let x = t.param(ids[0]);
                let w = t.param(ids[1]);
                let b = t.param(ids[2]);
                let u = t.param(ids[3]);
                let xw = t.matmul(x, w)?;
                let xw = t.add_row(xw, b)?;
                let h = t.lstm(xw, u, reverse)?;
                let h = t.mul(h, h)?;
                Ok(t.sum_all(h))
            },
            1e-6,
        );
    }
}

#[test]
fn lstm_reverse_reads_right_to_left() {
    let (store, ids) = random_store(&[(4, 8), (2, 8)], 21);
    let mut tape = Tape::new(&store);
    let xw = tape.param(ids[0]);
    let u = tape.param(ids[1]);
    let fwd = tape.lstm(xw, u, false).unwrap();
    let rev = tape.lstm(xw, u, true).unwrap();

    let flipped: Vec<Vec<f64>> = (0..4)
        .rev()
        .map(|r| store.get(ids[0]).row_slice(r).to_vec())
        .collect();
    let xw_flipped = tape.input(Tensor::from_rows(&flipped).unwrap());
    let fwd_of_flipped = tape.lstm(xw_flipped, u, false).unwrap();
    for r in 0..4 {
        let a = tape.value(rev).row_slice(r);
        let b = tape.value(fwd_of_flipped).row_slice(3 - r);
        assert_eq!(a, b);
    }
    assert_ne!(tape.value(fwd), tape.value(rev));
}

#[test]
fn rows_gather_scatters_gradient() {
    let (store, ids) = random_store(&[(5, 3)], 8);
    let mut grads = Gradients::zeros_like(&store);
    let mut tape = Tape::new(&store);
    let e = tape.rows(ids[0], &[4, 1, 4]).unwrap();
    assert_eq!(tape.value(e).row_slice(0), store.get(ids[0]).row_slice(4));
    let s = tape.sum_all(e);
    tape.backward(s, &mut grads).unwrap();
    let g = grads.get(ids[0]);
    assert_eq!(&g[12..15], &[2.0, 2.0, 2.0]);
    assert_eq!(&g[3..6], &[1.0, 1.0, 1.0]);
    assert_eq!(&g[0..3], &[0.0, 0.0, 0.0]);
    assert!(tape.rows(ids[0], &[5]).is_err());
}

#[test]
fn replay_is_bit_identical() {
    let (store, ids) = random_store(&[(4, 4), (2, 8)], 31);
    let run = || {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut grads = Gradients::zeros_like(&store);
        let mut tape = Tape::new(&store);
        let x = tape.param(ids[0]);
        let u = tape.param(ids[1]);
        let x = tape.dropout(x, 0.5, &mut rng).unwrap();
        let wide = tape.concat(&[x, x, x, x], 1).unwrap();
        let wide = tape.slice(wide, 1, 0, 8).unwrap();
        let h = tape.lstm(wide, u, false).unwrap();
        let l = tape.sum_all(h);
        tape.backward(l, &mut grads).unwrap();
        (tape.scalar(l), grads)
    };
    let (a, ga) = run();
    let (b, gb) = run();
    assert_eq!(a.to_bits(), b.to_bits());
    assert_eq!(ga, gb);
}

proptest! {
    #[test]
    fn softmax_is_shift_invariant_and_normalised(
        xs in prop::collection::vec(-30.0f64..30.0, 1..8),
        c in -100.0f64..100.0,
    ) {
        let store = ParamStore::new();
        let mut tape = Tape::new(&store);
        let x = tape.input(Tensor::row(xs.clone()));
        let shifted = tape.input(Tensor::row(xs.iter().map(|v| v + c).collect()));
        let a = tape.softmax(x, 1).unwrap();
        let b = tape.softmax(shifted, 1).unwrap();
        let sum: f64 = tape.value(a).data().iter().sum();
        prop_assert!((sum - 1.0).abs() < 1e-9);
        for (p, q) in tape.value(a).data().iter().zip(tape.value(b).data()) {
            prop_assert!((0.0..=1.0).contains(p));
            prop_assert!((p - q).abs() < 1e-9);
        }
    }

    #[test]
    fn sigmoid_is_symmetric(x in -50.0f64..50.0) {
        prop_assert!((sigmoid(x) + sigmoid(-x) - 1.0).abs() < 1e-12);
    }
}
