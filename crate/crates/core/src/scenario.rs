//! Multi-user drops, per-user training samples and dataset persistence.

use std::io::Write;

use num_complex::Complex64;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::array::{near_field_channel, ArrayGeometry, ChannelVector, FsplMode, NoiseModel, PolarLocation};
use crate::codebook::Span;
use crate::error::{Error, Result};
use crate::search::Link;

mod dataset;

pub use dataset::{load_dataset, read_dataset, save_dataset, write_dataset, DATASET_VERSION};

/// How user ranges are drawn inside the range span.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RangeLaw {
    Uniform,
    InverseUniform,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UserSpans {
    pub angle: Span,
    pub range: Span,
    pub range_law: RangeLaw,
}

impl Default for UserSpans {
    /// 5–50 m, ±60°, uniform in r.
    fn default() -> Self {
        Self {
            angle: Span {
                min: (-60f64).to_radians(),
                max: 60f64.to_radians(),
            },
            range: Span { min: 5.0, max: 50.0 },
            range_law: RangeLaw::Uniform,
        }
    }
}

impl UserSpans {
    pub fn validate(&self) -> Result<()> {
        if !(self.range.min > 0.0) || self.range.max < self.range.min {
            return Err(Error::Config(format!(
                "range span [{}, {}] invalid",
                self.range.min, self.range.max
            )));
        }
        let half_pi = std::f64::consts::FRAC_PI_2;
        if self.angle.min < -half_pi || self.angle.max > half_pi || self.angle.max < self.angle.min {
            return Err(Error::Config(format!(
                "angle span [{}, {}] invalid",
                self.angle.min, self.angle.max
            )));
        }
        Ok(())
    }

    pub fn contains(&self, loc: &PolarLocation) -> bool {
        self.angle.contains(loc.angle_rad()) && self.range.contains(loc.range_m())
    }

    fn draw<R: Rng>(&self, rng: &mut R) -> Result<PolarLocation> {
        let u: f64 = rng.gen();
        let range = match self.range_law {
            RangeLaw::Uniform => self.range.min + u * self.range.width(),
            RangeLaw::InverseUniform => {
                let (a, b) = (1.0 / self.range.max, 1.0 / self.range.min);
                1.0 / (a + u * (b - a))
            }
        };
        let angle = self.angle.min + rng.gen::<f64>() * self.angle.width();
        PolarLocation::new(
            range.clamp(self.range.min, self.range.max),
            angle.clamp(self.angle.min, self.angle.max),
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioFrame {
    pub frame_index: usize,
    pub users: Vec<PolarLocation>,
}

/// `frames` drops of `users` i.i.d. locations. Frame `t` draws from its own
/// ChaCha stream, so frames can be produced in any order.
pub fn generate_frames(spans: &UserSpans, users: usize, frames: usize, seed: u64) -> Result<Vec<ScenarioFrame>> {
    if users < 1 || frames < 1 {
        return Err(Error::Config(format!(
            "need at least one user and one frame, got K={users}, T={frames}"
        )));
    }
    spans.validate()?;
    (0..frames)
        .map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(t as u64);
            let users = (0..users).map(|_| spans.draw(&mut rng)).collect::<Result<_>>()?;
            Ok(ScenarioFrame {
                frame_index: t,
                users,
            })
        })
        .collect()
}

pub fn write_frames_csv<W: Write>(frames: &[ScenarioFrame], mut out: W) -> Result<()> {
    writeln!(out, "frame,user,range_m,angle_rad")?;
    for f in frames {
        for (k, u) in f.users.iter().enumerate() {
            writeln!(out, "{},{},{},{}", f.frame_index, k, u.range_m(), u.angle_rad())?;
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SnrPolicy {
    /// Independent uniform draw per sample, dB.
    Uniform { min_db: f64, max_db: f64, seed: u64 },
    Fixed(f64),
}

impl SnrPolicy {
    /// Training default: uniform over [−20, 20] dB.
    pub fn training(seed: u64) -> Self {
        SnrPolicy::Uniform {
            min_db: -20.0,
            max_db: 20.0,
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSample {
    /// Row-major 2×N: real parts then imaginary parts of the target channel.
    pub input: Vec<f64>,
    pub target_channel: ChannelVector,
    pub interferer_channels: Vec<ChannelVector>,
    pub noise: NoiseModel,
    pub frame: usize,
    pub user: usize,
}

impl TrainingSample {
    pub fn link(&self) -> Link<'_> {
        Link::new(&self.target_channel, &self.interferer_channels, &self.noise)
    }

    pub fn n_antennas(&self) -> usize {
        self.target_channel.len()
    }

    /// Same users and geometry at a different SNR.
    pub fn with_snr(&self, geom: &ArrayGeometry, snr_db: f64) -> Self {
        let noise = NoiseModel::calibrated(
            snr_db,
            geom,
            self.target_channel.fspl_mode,
            self.noise.reference_range_m,
        );
        Self {
            noise: NoiseModel {
                tx_power: self.noise.tx_power,
                ..noise
            },
            ..self.clone()
        }
    }
}

pub fn realify(h: &[Complex64]) -> Vec<f64> {
    h.iter().map(|c| c.re).chain(h.iter().map(|c| c.im)).collect()
}

pub fn complexify(input: &[f64]) -> Result<Vec<Complex64>> {
    if input.len() % 2 != 0 {
        return Err(Error::Dimension {
            expected: "even length 2N".into(),
            got: input.len().to_string(),
        });
    }
    let n = input.len() / 2;
    Ok((0..n).map(|k| Complex64::new(input[k], input[n + k])).collect())
}

/// One sample per (frame, user): that user is the target, the other K−1
/// users of the frame interfere.
pub fn frames_to_samples(
    frames: &[ScenarioFrame],
    geom: &ArrayGeometry,
    snr: SnrPolicy,
    fspl_mode: FsplMode,
    reference_range_m: f64,
) -> Result<Vec<TrainingSample>> {
    if frames.is_empty() {
        return Err(Error::Config("no frames to convert".into()));
    }
    let mut snr_rng = match snr {
        SnrPolicy::Uniform { seed, .. } => Some(ChaCha8Rng::seed_from_u64(seed)),
        SnrPolicy::Fixed(_) => None,
    };
    let mut out = Vec::with_capacity(frames.len() * frames[0].users.len());
    for frame in frames {
        let channels: Vec<ChannelVector> = frame
            .users
            .iter()
            .map(|loc| near_field_channel(geom, loc, fspl_mode))
            .collect();
        for (k, target) in channels.iter().enumerate() {
            let snr_db = match (snr, snr_rng.as_mut()) {
                (SnrPolicy::Uniform { min_db, max_db, .. }, Some(rng)) => {
                    min_db + rng.gen::<f64>() * (max_db - min_db)
                }
                (SnrPolicy::Fixed(db), _) => db,
                _ => unreachable!(),
            };
            out.push(TrainingSample {
                input: realify(&target.coefficients),
                target_channel: target.clone(),
                interferer_channels: channels
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| *i != k)
                    .map(|(_, h)| h.clone())
                    .collect(),
                noise: NoiseModel::calibrated(snr_db, geom, fspl_mode, reference_range_m),
                frame: frame.frame_index,
                user: k,
            });
        }
    }
    Ok(out)
}

/// Everything needed to regenerate or interpret a stored dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetMeta {
    pub geometry: ArrayGeometry,
    pub spans: UserSpans,
    pub fspl_mode: FsplMode,
    pub users: usize,
    pub frames: usize,
    pub generation_seed: u64,
    pub reference_range_m: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetSplit {
    pub meta: DatasetMeta,
    pub train: Vec<TrainingSample>,
    pub test: Vec<TrainingSample>,
    pub ratio: f64,
    pub seed: u64,
}

impl DatasetSplit {
    pub fn len(&self) -> usize {
        self.train.len() + self.test.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Random disjoint partition with `round(ratio · total)` training samples.
pub fn split(
    samples: Vec<TrainingSample>,
    ratio: f64,
    seed: u64,
    meta: DatasetMeta,
) -> Result<DatasetSplit> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::Config(format!("split ratio must lie in (0, 1), got {ratio}")));
    }
    let total = samples.len();
    let n_train = (ratio * total as f64).round() as usize;
    let mut order: Vec<usize> = (0..total).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut slots: Vec<Option<TrainingSample>> = samples.into_iter().map(Some).collect();
    let mut take = |idx: &[usize]| -> Vec<TrainingSample> {
        idx.iter().map(|&i| slots[i].take().expect("index used once")).collect()
    };
    let train = take(&order[..n_train]);
    let test = take(&order[n_train..]);
    Ok(DatasetSplit {
        meta,
        train,
        test,
        ratio,
        seed,
    })
}

/// Frames, samples and a 75/25 split in one call.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetRecipe {
    pub geometry: ArrayGeometry,
    pub spans: UserSpans,
    pub fspl_mode: FsplMode,
    pub users: usize,
    pub frames: usize,
    pub seed: u64,
    pub snr: SnrPolicy,
    pub reference_range_m: f64,
    pub train_ratio: f64,
}

impl DatasetRecipe {
    pub fn new(geometry: ArrayGeometry, users: usize, frames: usize, seed: u64) -> Self {
        Self {
            geometry,
            spans: UserSpans::default(),
            fspl_mode: FsplMode::Normalized,
            users,
            frames,
            seed,
            snr: SnrPolicy::training(seed.wrapping_add(1)),
            reference_range_m: crate::array::DEFAULT_REFERENCE_RANGE_M,
            train_ratio: 0.75,
        }
    }

    pub fn build(&self) -> Result<DatasetSplit> {
        let frames = generate_frames(&self.spans, self.users, self.frames, self.seed)?;
        let samples = frames_to_samples(
            &frames,
            &self.geometry,
            self.snr,
            self.fspl_mode,
            self.reference_range_m,
        )?;
        split(
            samples,
            self.train_ratio,
            self.seed.wrapping_add(2),
            DatasetMeta {
                geometry: self.geometry,
                spans: self.spans,
                fspl_mode: self.fspl_mode,
                users: self.users,
                frames: self.frames,
                generation_seed: self.seed,
                reference_range_m: self.reference_range_m,
            },
        )
    }
}
