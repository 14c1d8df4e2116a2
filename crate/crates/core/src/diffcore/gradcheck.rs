use alloc::vec::Vec;

use super::tape::{Tape, Var};
use super::tensor::Tensor;
use crate::{Error, Result};

/// Outcome of [`grad_check`].
#[derive(Debug, Clone, PartialEq)]
pub struct GradCheck {
    /// `max_j |analytic_j − central_j| / max(1, |analytic_j|)` over the
    /// coordinates that were not excluded.
    pub max_relative_error: f64,
    /// Coordinates whose one-sided differences disagree (a kink lies within
    /// one step of the point); they carry no well-defined derivative and are
    /// left out of the maximum.
    pub excluded: Vec<usize>,
}

fn eval<F>(f: &F, point: &Tensor) -> Result<f64>
where
    F: Fn(&mut Tape, Var) -> Result<Var>,
{
    let mut tape = Tape::new();
    let x = tape.constant(point.clone());
    let y = f(&mut tape, x)?;
    tape.value(y).item()
}

/// Compares the tape gradient of scalar `f` at `point` against central
/// differences with the given step.
pub fn grad_check<F>(f: F, point: &Tensor, step: f64) -> Result<GradCheck>
where
    F: Fn(&mut Tape, Var) -> Result<Var>,
{
    if !point.is_finite() {
        return Err(Error::contract("grad_check point must be finite"));
    }
    let mut tape = Tape::new();
    let x = tape.leaf(point.clone());
    let y = f(&mut tape, x)?;
    let f0 = tape.value(y).item()?;
    if !f0.is_finite() {
        return Err(Error::Probe { coordinate: usize::MAX });
    }
    let grads = tape.backward(y)?;
    let analytic = grads.get(x).cloned().unwrap_or_else(|| Tensor::zeros(point.shape()));

    let mut max_rel: f64 = 0.0;
    let mut excluded = Vec::new();
    let mut probe = point.clone();
    for j in 0..point.len() {
        let orig = point.data()[j];
        probe.data_mut()[j] = orig + step;
        let fp = eval(&f, &probe).map_err(|_| Error::Probe { coordinate: j })?;
        probe.data_mut()[j] = orig - step;
        let fm = eval(&f, &probe).map_err(|_| Error::Probe { coordinate: j })?;
        probe.data_mut()[j] = orig;
        if !fp.is_finite() || !fm.is_finite() {
            return Err(Error::Probe { coordinate: j });
        }
        let central = (fp - fm) / (2.0 * step);
        let forward = (fp - f0) / step;
        let backward = (f0 - fm) / step;
        let scale = central.abs().max(1.0);
        if (forward - backward).abs() > 1e-2 * scale {
            excluded.push(j);
            continue;
        }
        let a = analytic.data()[j];
        let rel = (a - central).abs() / a.abs().max(1.0);
        max_rel = max_rel.max(rel);
    }
    Ok(GradCheck { max_relative_error: max_rel, excluded })
}
