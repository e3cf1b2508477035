//! Central finite-difference check of every trainable parameter.

use super::loss::rate_loss_and_grad;
use super::model::Beamformer;
use crate::error::Result;
use crate::scenario::TrainingSample;

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub n_checked: usize,
    pub max_rel_err: f64,
    /// (array, element) of the worst entry, in `Parameters::trainable` order.
    pub worst: (usize, usize),
    pub step: f64,
}

impl GradCheckReport {
    pub fn passed(&self, tol: f64) -> bool {
        self.max_rel_err < tol
    }
}

/// Denominator floor: gradients far below the loss's rounding level
/// are compared absolutely.
pub const REL_ERR_FLOOR: f64 = 1e-6;

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_ERR_FLOOR)
}

fn train_loss(model: &Beamformer, batch: &[&TrainingSample]) -> Result<f64> {
    // Training-mode forward mutates running statistics only, which the
    // training-mode output never reads; a clone keeps `model` untouched.
    let mut m = model.clone();
    let x = m.input_tensor(batch.iter().map(|s| s.input.as_slice()))?;
    let cache = m.forward_train(&x)?;
    Ok(rate_loss_and_grad(batch, cache.theta())?.0)
}

pub fn gradient_check(model: &Beamformer, batch: &[&TrainingSample], step: f64) -> Result<GradCheckReport> {
    let mut m = model.clone();
    let x = m.input_tensor(batch.iter().map(|s| s.input.as_slice()))?;
    let cache = m.forward_train(&x)?;
    let (_, dtheta) = rate_loss_and_grad(batch, cache.theta())?;
    let grads = model.backward(&cache, &dtheta)?;
    let analytic: Vec<Vec<f64>> = grads.trainable().into_iter().cloned().collect();

    let mut report = GradCheckReport {
        n_checked: 0,
        max_rel_err: 0.0,
        worst: (0, 0),
        step,
    };
    let mut probe = model.clone();
    for (ai, g) in analytic.iter().enumerate() {
        for ei in 0..g.len() {
            let orig = probe.params.trainable()[ai][ei];
            probe.params.trainable_mut()[ai][ei] = orig + step;
            let plus = train_loss(&probe, batch)?;
            probe.params.trainable_mut()[ai][ei] = orig - step;
            let minus = train_loss(&probe, batch)?;
            probe.params.trainable_mut()[ai][ei] = orig;
            let numeric = (plus - minus) / (2.0 * step);
            let err = relative_error(g[ei], numeric);
            report.n_checked += 1;
            if err > report.max_rel_err {
                report.max_rel_err = err;
                report.worst = (ai, ei);
            }
        }
    }
    Ok(report)
}
