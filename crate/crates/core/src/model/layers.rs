use crate::corpus::{LabelScheme, SchemeMode};
use crate::engine::{Tape, TensorError, Var};

use super::{check_scheme, ModelError};

/// Averages a head's per-token queries into one label query, `[1 x e]`.
pub fn pool_label_query(tape: &mut Tape, queries: Var) -> Result<Var, TensorError> {
    tape.mean_axis(queries, 0)
}

/// a_ih = q_h · k_ih for every token, as an `[N x 1]` column.
pub fn attention_scores(tape: &mut Tape, query: Var, keys: Var) -> Result<Var, TensorError> {
    let qt = tape.transpose(query);
    tape.matmul(keys, qt)
}

/// Softmax over the heads of each token: row `i` is t̃_i.
pub fn token_distributions(tape: &mut Tape, scores: Var) -> Result<Var, TensorError> {
    tape.softmax(scores, 1)
}

/// Sigmoid of every score, normalised over the tokens of each head.
pub fn attention_weights(tape: &mut Tape, scores: Var) -> Result<Var, TensorError> {
    let s = tape.sigmoid(scores);
    tape.normalize(s, 0)
}

/// Maps per-head scores `[H x 1]` onto sentence-label logits `[1 x S]`.
///
/// With identical tagsets the head scores are used as they are. With a
/// binary sentence tagset the default slot takes the default head's score
/// and the other slot the best score among the remaining heads.
pub fn collect_sentence_scores(tape: &mut Tape, head_scores: Var, scheme: &LabelScheme) -> Result<Var, ModelError> {
    check_scheme(scheme)?;
    let h = tape.value(head_scores).rows();
    if h != scheme.num_token_labels() {
        return Err(ModelError::UnsupportedScheme {
            h,
            s: scheme.num_sentence_labels(),
        });
    }
    match scheme.mode() {
        SchemeMode::Identical => Ok(tape.transpose(head_scores)),
        SchemeMode::Binary => {
            let d = scheme.default_token();
            let others: Vec<usize> = (0..h).filter(|&i| i != d).collect();
            let default_score = tape.row(head_scores, d)?;
            let rest = tape.select(head_scores, &others)?;
            let best = tape.max_all(rest);
            let slots = if scheme.default_sentence() == 0 {
                [default_score, best]
            } else {
                [best, default_score]
            };
            Ok(tape.concat(&slots, 1)?)
        }
    }
}
