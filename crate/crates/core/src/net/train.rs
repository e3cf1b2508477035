use std::io::Write;
use std::path::PathBuf;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::checkpoint::save_checkpoint;
use super::loss::{rate_loss, rate_loss_and_grad};
use super::model::{Beamformer, NetworkConfig};
use super::optim::{Adam, PlateauScheduler};
use crate::error::{Error, Result};
use crate::scenario::TrainingSample;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub lr: f64,
    pub batch_size: usize,
    pub epochs: usize,
    /// Shuffling seed; initialisation uses the network seed.
    pub seed: u64,
    pub scheduler: PlateauScheduler,
    /// Written when training diverges.
    pub failure_checkpoint: Option<PathBuf>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr: 1e-2,
            batch_size: 256,
            epochs: 1000,
            seed: 0,
            scheduler: PlateauScheduler::default(),
            failure_checkpoint: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::Config(format!("learning rate must be positive, got {}", self.lr)));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch size must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    /// Absent when no validation set was given.
    pub val_loss: Option<f64>,
    pub lr: f64,
}

/// Model plus everything needed to continue training bit-for-bit.
#[derive(Debug, Clone, PartialEq)]
pub struct Trainer {
    pub model: Beamformer,
    pub config: TrainConfig,
    pub adam: Adam,
    pub scheduler: PlateauScheduler,
    pub rng: ChaCha8Rng,
    pub epoch: usize,
    pub history: Vec<EpochRecord>,
}

impl Trainer {
    pub fn new(net: NetworkConfig, config: TrainConfig) -> Result<Self> {
        config.validate()?;
        let model = Beamformer::new(net)?;
        let adam = Adam::new(&model.params, config.lr);
        Ok(Self {
            adam,
            scheduler: config.scheduler.clone(),
            rng: ChaCha8Rng::seed_from_u64(config.seed),
            model,
            config,
            epoch: 0,
            history: Vec::new(),
        })
    }

    pub fn lr(&self) -> f64 {
        self.adam.lr
    }

    fn fail(&self, msg: String) -> Error {
        if let Some(path) = &self.config.failure_checkpoint {
            if let Err(e) = save_checkpoint(self, path) {
                return Error::Numeric(format!("{msg}; checkpoint not written: {e}"));
            }
            return Error::Numeric(format!("{msg}; checkpoint written to {}", path.display()));
        }
        Error::Numeric(msg)
    }

    /// One optimisation step on `batch`; returns the batch loss.
    pub fn step(&mut self, batch: &[&TrainingSample], batch_id: usize) -> Result<f64> {
        let x = self.model.input_tensor(batch.iter().map(|s| s.input.as_slice()))?;
        let cache = self.model.forward_train(&x)?;
        let (loss, dtheta) = rate_loss_and_grad(batch, cache.theta())?;
        if !loss.is_finite() || dtheta.iter().any(|g| !g.is_finite()) {
            return Err(self.fail(format!(
                "non-finite loss or gradient at epoch {} batch {batch_id}",
                self.epoch
            )));
        }
        let grads = self.model.backward(&cache, &dtheta)?;
        self.adam.update(&mut self.model.params, &grads)?;
        if !self.model.params.is_finite() {
            return Err(self.fail(format!(
                "non-finite parameters after epoch {} batch {batch_id}",
                self.epoch
            )));
        }
        Ok(loss)
    }

    pub fn run_epoch(&mut self, train: &[TrainingSample], val: &[TrainingSample]) -> Result<EpochRecord> {
        if train.is_empty() {
            return Err(Error::Config("empty training set".into()));
        }
        let mut order: Vec<usize> = (0..train.len()).collect();
        order.shuffle(&mut self.rng);
        let mut total = 0.0;
        for (batch_id, chunk) in order.chunks(self.config.batch_size).enumerate() {
            let batch: Vec<&TrainingSample> = chunk.iter().map(|&i| &train[i]).collect();
            total += self.step(&batch, batch_id)? * batch.len() as f64;
        }
        let train_loss = total / train.len() as f64;
        let val_loss = if val.is_empty() {
            None
        } else {
            Some(evaluate_loss(&self.model, val)?)
        };
        let lr = self.adam.lr;
        self.adam.lr = self.scheduler.observe(val_loss.unwrap_or(train_loss), lr);
        let record = EpochRecord {
            epoch: self.epoch,
            train_loss,
            val_loss,
            lr,
        };
        self.history.push(record);
        self.epoch += 1;
        Ok(record)
    }

    /// Runs until `config.epochs` epochs have completed in total.
    pub fn fit(&mut self, train: &[TrainingSample], val: &[TrainingSample]) -> Result<()> {
        while self.epoch < self.config.epochs {
            self.run_epoch(train, val)?;
        }
        Ok(())
    }
}

/// Convenience wrapper: fresh trainer, full run.
pub fn train(
    train_set: &[TrainingSample],
    val_set: &[TrainingSample],
    net: NetworkConfig,
    config: TrainConfig,
) -> Result<Trainer> {
    let mut t = Trainer::new(net, config)?;
    t.fit(train_set, val_set)?;
    Ok(t)
}

const EVAL_CHUNK: usize = 256;

/// Evaluation-mode loss over a whole set.
pub fn evaluate_loss(model: &Beamformer, samples: &[TrainingSample]) -> Result<f64> {
    let rates = evaluate_rates(model, samples)?;
    Ok(-rates.iter().sum::<f64>() / rates.len() as f64)
}

/// Per-sample achieved rate of the inferred beam.
pub fn evaluate_rates(model: &Beamformer, samples: &[TrainingSample]) -> Result<Vec<f64>> {
    if samples.is_empty() {
        return Err(Error::Config("nothing to evaluate".into()));
    }
    let mut out = Vec::with_capacity(samples.len());
    for chunk in samples.chunks(EVAL_CHUNK) {
        let weights = model.infer_batch(chunk.iter().map(|s| s.input.as_slice()))?;
        for (s, w) in chunk.iter().zip(&weights) {
            out.push(-rate_loss(&[s], std::slice::from_ref(w))?);
        }
    }
    Ok(out)
}

pub fn write_history_csv<W: Write>(history: &[EpochRecord], mut out: W) -> Result<()> {
    writeln!(out, "epoch,train_loss,val_loss,lr")?;
    for r in history {
        let val = r.val_loss.map(|v| v.to_string()).unwrap_or_default();
        writeln!(out, "{},{},{},{}", r.epoch, r.train_loss, val, r.lr)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::array::{ArrayGeometry, FsplMode, DEFAULT_REFERENCE_RANGE_M};
    use crate::scenario::{frames_to_samples, generate_frames, SnrPolicy, UserSpans};

    fn data(n: usize, frames: usize, seed: u64) -> Vec<TrainingSample> {
        let geom = ArrayGeometry::new(n, 50e9).unwrap();
        let fr = generate_frames(&UserSpans::default(), 3, frames, seed).unwrap();
        frames_to_samples(&fr, &geom, SnrPolicy::Fixed(10.0), FsplMode::Normalized, DEFAULT_REFERENCE_RANGE_M)
            .unwrap()
    }

    fn small_config() -> TrainConfig {
        TrainConfig {
            batch_size: 16,
            epochs: 3,
            seed: 9,
            ..Default::default()
        }
    }

    #[test]
    fn training_is_reproducible() {
        let train_set = data(8, 20, 1);
        let val = data(8, 5, 2);
        let a = train(&train_set, &val, NetworkConfig::toy(4), small_config()).unwrap();
        let b = train(&train_set, &val, NetworkConfig::toy(4), small_config()).unwrap();
        assert_eq!(a.history.len(), 3);
        assert_eq!(a.history, b.history);
        assert_eq!(a.model, b.model);
        let mut csv = Vec::new();
        write_history_csv(&a.history, &mut csv).unwrap();
        let text = String::from_utf8(csv).unwrap();
        assert!(text.starts_with("epoch,train_loss,val_loss,lr\n0,"));
        assert_eq!(text.lines().count(), 4);
    }

    #[test]
    fn small_step_increases_mean_rate() {
        let set = data(8, 6, 3);
        let refs: Vec<&TrainingSample> = set.iter().collect();
        let mut model = Beamformer::new(NetworkConfig::toy(5)).unwrap();
        let x = model.input_tensor(refs.iter().map(|s| s.input.as_slice())).unwrap();
        let cache = model.forward_train(&x).unwrap();
        let (before, dtheta) = rate_loss_and_grad(&refs, cache.theta()).unwrap();
        let grads = model.backward(&cache, &dtheta).unwrap();
        let mut stepped = model.clone();
        for (p, g) in stepped.params.trainable_mut().into_iter().zip(grads.trainable()) {
            for (pv, gv) in p.iter_mut().zip(g) {
                *pv -= 1e-3 * gv;
            }
        }
        let after = stepped.forward_train(&x).unwrap();
        let (after, _) = rate_loss_and_grad(&refs, after.theta()).unwrap();
        assert!(after < before, "{after} !< {before}");
    }

    #[test]
    fn divergence_is_reported_with_batch_id() {
        let mut set = data(8, 4, 6);
        set[0].noise.sigma2 = f64::NAN;
        let dir = std::env::temp_dir().join(format!("nfbeam-diverge-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("fail.ckpt");
        let cfg = TrainConfig {
            failure_checkpoint: Some(path.clone()),
            batch_size: 64,
            ..small_config()
        };
        let err = train(&set, &[], NetworkConfig::toy(1), cfg).unwrap_err();
        let msg = err.to_string();
        assert!(matches!(err, Error::Numeric(_)));
        assert!(msg.contains("batch 0"), "{msg}");
        assert!(path.exists());
        std::fs::remove_dir_all(dir).ok();
    }

    #[test]
    fn empty_train_set_rejected() {
        assert!(train(&[], &[], NetworkConfig::toy(1), small_config()).is_err());
    }
}
