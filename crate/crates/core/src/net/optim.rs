use super::model::Parameters;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub step: u64,
    /// First and second moments, one array per trainable parameter array.
    pub m: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
}

impl Adam {
    pub fn new(params: &Parameters, lr: f64) -> Self {
        let zeros: Vec<Vec<f64>> = params.trainable().iter().map(|a| vec![0.0; a.len()]).collect();
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            m: zeros.clone(),
            v: zeros,
        }
    }

    pub fn update(&mut self, params: &mut Parameters, grads: &Parameters) -> Result<()> {
        let grads = grads.trainable();
        let mut targets = params.trainable_mut();
        if grads.len() != targets.len() || targets.len() != self.m.len() {
            return Err(Error::Config("optimizer state does not match the parameters".into()));
        }
        self.step += 1;
        let c1 = 1.0 - self.beta1.powi(self.step as i32);
        let c2 = 1.0 - self.beta2.powi(self.step as i32);
        for (((p, g), m), v) in targets.iter_mut().zip(grads).zip(&mut self.m).zip(&mut self.v) {
            for i in 0..p.len() {
                m[i] = self.beta1 * m[i] + (1.0 - self.beta1) * g[i];
                v[i] = self.beta2 * v[i] + (1.0 - self.beta2) * g[i] * g[i];
                let mhat = m[i] / c1;
                let vhat = v[i] / c2;
                p[i] -= self.lr * mhat / (vhat.sqrt() + self.eps);
            }
        }
        Ok(())
    }
}

/// Halves the learning rate once the monitored loss has failed to improve
/// by a relative `threshold` for more than `patience` epochs.
#[derive(Debug, Clone, PartialEq)]
pub struct PlateauScheduler {
    pub factor: f64,
    pub patience: u32,
    pub min_lr: f64,
    pub threshold: f64,
    pub best: f64,
    pub bad_epochs: u32,
}

impl Default for PlateauScheduler {
    fn default() -> Self {
        Self {
            factor: 0.5,
            patience: 10,
            min_lr: 1e-5,
            threshold: 1e-4,
            best: f64::INFINITY,
            bad_epochs: 0,
        }
    }
}

impl PlateauScheduler {
    /// Returns the learning rate to use for the next epoch.
    pub fn observe(&mut self, metric: f64, lr: f64) -> f64 {
        // Works for negative losses too: the margin is on |best|.
        if !self.best.is_finite() || metric < self.best - self.best.abs() * self.threshold {
            self.best = metric;
            self.bad_epochs = 0;
            return lr;
        }
        self.bad_epochs += 1;
        if self.bad_epochs > self.patience {
            self.bad_epochs = 0;
            return (lr * self.factor).max(self.min_lr);
        }
        lr
    }
}
