//! Central finite-difference oracle for analytic gradients.

use super::{Gradients, ParamId, ParamStore, Tape, Var};

/// Outcome of comparing analytic and numeric gradients.
#[derive(Clone, Debug, PartialEq)]
pub struct GradCheck {
    pub max_rel_error: f64,
    /// Parameter name and flat index of the worst entry.
    pub worst: Option<(String, usize)>,
    pub analytic: f64,
    pub numeric: f64,
    pub checked: usize,
    /// Loss at the unperturbed parameters.
    pub loss: f64,
    pub step: f64,
    /// `(analytic, numeric)` for every checked entry, in visiting order.
    pub entries: Vec<(f64, f64)>,
}

impl GradCheck {
    /// Absolute error a central difference can carry from cancellation
    /// alone: a few ulps of the loss divided by the step.
    pub fn roundoff_bound(&self) -> f64 {
        ROUNDOFF_ULPS * f64::EPSILON * self.loss.abs().max(1.0) / self.step
    }

    /// Entries whose relative error exceeds `tol` by more than cancellation
    /// in the difference quotient can explain.
    pub fn failures(&self, tol: f64) -> usize {
        let bound = self.roundoff_bound();
        self.entries
            .iter()
            .filter(|(a, n)| relative_error(*a, *n) > tol && (a - n).abs() > bound)
            .count()
    }

    /// Entries above `tol` in relative terms but within the roundoff bound.
    pub fn within_roundoff(&self, tol: f64) -> usize {
        self.entries.iter().filter(|(a, n)| relative_error(*a, *n) > tol).count() - self.failures(tol)
    }
}

/// Denominator floor for the relative error, so that entries whose true
/// gradient is zero are compared absolutely.
pub const REL_ERROR_FLOOR: f64 = 1e-7;

/// Multiple of machine epsilon (relative to the loss) allowed as rounding
/// error in one loss evaluation.
pub const ROUNDOFF_ULPS: f64 = 10.0;

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_ERROR_FLOOR)
}

/// Checks `d loss / d param` for every entry of every parameter in `only`
/// (or all parameters when `only` is empty) against central differences
/// with the given `step`. The closure must be deterministic.
pub fn check_gradients<F, E>(store: &ParamStore, only: &[ParamId], step: f64, f: F) -> Result<GradCheck, E>
where
    F: Fn(&mut Tape) -> Result<Var, E>,
    E: From<super::TensorError>,
{
    let mut grads = Gradients::zeros_like(store);
    let loss_value = {
        let mut tape = Tape::new(store);
        let loss = f(&mut tape)?;
        tape.backward(loss, &mut grads)?;
        tape.scalar(loss)
    };

    let eval = |s: &ParamStore| -> Result<f64, E> {
        let mut tape = Tape::new(s);
        let loss = f(&mut tape)?;
        Ok(tape.scalar(loss))
    };

    let ids: Vec<ParamId> = if only.is_empty() {
        store.ids().collect()
    } else {
        only.to_vec()
    };
    let mut work = store.clone();
    let mut report = GradCheck {
        max_rel_error: 0.0,
        worst: None,
        analytic: 0.0,
        numeric: 0.0,
        checked: 0,
        loss: loss_value,
        step,
        entries: Vec::new(),
    };
    for id in ids {
        for k in 0..store.get(id).len() {
            let orig = store.get(id).data()[k];
            work.get_mut(id).data_mut()[k] = orig + step;
            let plus = eval(&work)?;
            work.get_mut(id).data_mut()[k] = orig - step;
            let minus = eval(&work)?;
            work.get_mut(id).data_mut()[k] = orig;

            let numeric = (plus - minus) / (2.0 * step);
            let analytic = grads.get(id)[k];
            let err = relative_error(analytic, numeric);
            report.checked += 1;
            report.entries.push((analytic, numeric));
            if err > report.max_rel_error || report.worst.is_none() {
                report.max_rel_error = err;
                report.worst = Some((store.name(id).to_string(), k));
                report.analytic = analytic;
                report.numeric = numeric;
            }
        }
    }
    Ok(report)
}
