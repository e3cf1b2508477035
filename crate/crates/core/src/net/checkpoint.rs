//! Versioned training checkpoint.
//!
//! Layout (little-endian):
//!
//! ```text
//! magic     8 bytes "NFBCKPT\0"
//! version   u32
//! network   u64 n, u64 c0, u64 c1, u64 c2, u8 tanh, u64 seed, f64 momentum, f64 eps
//! training  f64 lr, u64 batch, u64 epochs, u64 seed
//! scheduler f64 factor, u32 patience, f64 min_lr, f64 threshold, f64 best, u32 bad_epochs
//! adam      f64 lr, f64 beta1, f64 beta2, f64 eps, u64 step
//! rng       32-byte seed, u64 stream, u64 word_pos (low), u64 word_pos (high)
//! epoch     u64
//! arrays    trainable parameters, running statistics, Adam m, Adam v,
//!           each a u64 length followed by f64 values
//! history   u64 count, then per epoch: u64 epoch, f64 train, u8 has_val, f64 val, f64 lr
//! ```

use std::fs;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::model::{Beamformer, NetworkConfig};
use super::optim::{Adam, PlateauScheduler};
use super::train::{EpochRecord, TrainConfig, Trainer};
use crate::binio::{Reader, Writer};
use crate::error::{Error, Result};

pub const CHECKPOINT_VERSION: u32 = 1;
const MAGIC: &[u8; 8] = b"NFBCKPT\0";

pub fn write_checkpoint(t: &Trainer) -> Vec<u8> {
    let mut w = Writer::default();
    w.bytes(MAGIC);
    w.u32(CHECKPOINT_VERSION);
    let net = &t.model.config;
    w.u64(net.n_antennas as u64);
    for c in net.widths {
        w.u64(c as u64);
    }
    w.u8(net.tanh_head as u8);
    w.u64(net.seed);
    w.f64(net.bn_momentum);
    w.f64(net.bn_eps);

    w.f64(t.config.lr);
    w.u64(t.config.batch_size as u64);
    w.u64(t.config.epochs as u64);
    w.u64(t.config.seed);

    let s = &t.scheduler;
    w.f64(s.factor);
    w.u32(s.patience);
    w.f64(s.min_lr);
    w.f64(s.threshold);
    w.f64(s.best);
    w.u32(s.bad_epochs);

    w.f64(t.adam.lr);
    w.f64(t.adam.beta1);
    w.f64(t.adam.beta2);
    w.f64(t.adam.eps);
    w.u64(t.adam.step);

    w.bytes(&t.rng.get_seed());
    w.u64(t.rng.get_stream());
    let pos = t.rng.get_word_pos();
    w.u64(pos as u64);
    w.u64((pos >> 64) as u64);

    w.u64(t.epoch as u64);
    let p = &t.model.params;
    for a in p.trainable().into_iter().chain(p.running_stats()) {
        w.f64s(a);
    }
    for a in t.adam.m.iter().chain(&t.adam.v) {
        w.f64s(a);
    }

    w.u64(t.history.len() as u64);
    for r in &t.history {
        w.u64(r.epoch as u64);
        w.f64(r.train_loss);
        w.u8(r.val_loss.is_some() as u8);
        w.f64(r.val_loss.unwrap_or(0.0));
        w.f64(r.lr);
    }
    w.0
}

pub fn read_checkpoint(bytes: &[u8]) -> Result<Trainer> {
    let mut r = Reader::new(bytes);
    if r.take(8)? != MAGIC {
        return Err(Error::Format("not a checkpoint file".into()));
    }
    let version = r.u32()?;
    if version != CHECKPOINT_VERSION {
        return Err(Error::Format(format!(
            "checkpoint version {version}, expected {CHECKPOINT_VERSION}"
        )));
    }
    let n_antennas = r.usize()?;
    let widths = [r.usize()?, r.usize()?, r.usize()?];
    let net = NetworkConfig {
        n_antennas,
        widths,
        tanh_head: r.u8()? != 0,
        seed: r.u64()?,
        bn_momentum: r.f64()?,
        bn_eps: r.f64()?,
    };
    let mut model = Beamformer::new(net)?;

    let mut config = TrainConfig {
        lr: r.f64()?,
        batch_size: r.usize()?,
        epochs: r.usize()?,
        seed: r.u64()?,
        ..Default::default()
    };
    let scheduler = PlateauScheduler {
        factor: r.f64()?,
        patience: r.u32()?,
        min_lr: r.f64()?,
        threshold: r.f64()?,
        best: r.f64()?,
        bad_epochs: r.u32()?,
    };
    config.scheduler = PlateauScheduler {
        best: f64::INFINITY,
        bad_epochs: 0,
        ..scheduler.clone()
    };

    let mut adam = Adam::new(&model.params, r.f64()?);
    adam.beta1 = r.f64()?;
    adam.beta2 = r.f64()?;
    adam.eps = r.f64()?;
    adam.step = r.u64()?;

    let seed: [u8; 32] = r.take(32)?.try_into().expect("32 bytes");
    let mut rng = ChaCha8Rng::from_seed(seed);
    rng.set_stream(r.u64()?);
    let lo = r.u64()? as u128;
    let hi = r.u64()? as u128;
    rng.set_word_pos(lo | (hi << 64));

    let epoch = r.usize()?;
    for a in model.params.trainable_mut() {
        *a = r.f64s(a.len())?;
    }
    for a in model.params.running_stats_mut() {
        *a = r.f64s(a.len())?;
    }
    for a in adam.m.iter_mut().chain(adam.v.iter_mut()) {
        *a = r.f64s(a.len())?;
    }

    let count = r.usize()?;
    let mut history = Vec::with_capacity(count.min(1 << 20));
    for _ in 0..count {
        let epoch = r.usize()?;
        let train_loss = r.f64()?;
        let has_val = r.u8()? != 0;
        let val = r.f64()?;
        history.push(EpochRecord {
            epoch,
            train_loss,
            val_loss: has_val.then_some(val),
            lr: r.f64()?,
        });
    }
    r.finish()?;
    if !model.params.is_finite() {
        return Err(Error::Format("checkpoint holds non-finite parameters".into()));
    }
    Ok(Trainer {
        model,
        config,
        adam,
        scheduler,
        rng,
        epoch,
        history,
    })
}

pub fn save_checkpoint(t: &Trainer, path: &Path) -> Result<()> {
    fs::write(path, write_checkpoint(t))?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<Trainer> {
    read_checkpoint(&fs::read(path)?)
}
