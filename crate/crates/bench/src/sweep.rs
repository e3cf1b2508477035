use std::path::Path;

use nfbeam::array::{matched_filter_bound, noise_power_for, ArrayGeometry, FsplMode, PolarLocation};
use nfbeam::codebook::{AngleSampling, HierarchySpec, PolarGrid, RangeSampling};
use nfbeam::net::{load_checkpoint, save_checkpoint, Beamformer, NetworkConfig, TrainConfig, Trainer};
use nfbeam::scenario::{frames_to_samples, generate_frames, DatasetRecipe, SnrPolicy, TrainingSample, UserSpans};
use nfbeam::search::{exhaustive_search, ff_hierarchical_search, nf_hierarchical_search, FarFieldHierarchy};

use crate::config::{Axis, ExperimentConfig, Scheme};
use crate::error::{BenchError, BenchResult};

/// Seed of the evaluation drops at axis point `i`.
pub fn eval_seed(base: u64, i: usize) -> u64 {
    base.wrapping_add(1000 + i as u64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub axis_value: f64,
    pub scheme: Scheme,
    pub mean_rate: f64,
    pub std_rate: f64,
    /// Codeword evaluations per decision, averaged over samples.
    pub overhead: f64,
    pub n: usize,
}

/// One-time cost of fitting a learned model.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingCost {
    pub n_antennas: usize,
    pub carrier_ghz: f64,
    pub epochs: usize,
    pub batches_per_epoch: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub axis: Axis,
    pub rows: Vec<SweepRow>,
    pub training: Vec<TrainingCost>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SchemeStats {
    pub mean_rate: f64,
    pub std_rate: f64,
    pub overhead: f64,
    pub n: usize,
}

fn stats(rates: &[f64], overheads: &[usize]) -> SchemeStats {
    let n = rates.len();
    let mean = rates.iter().sum::<f64>() / n as f64;
    let var = if n > 1 {
        rates.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (n - 1) as f64
    } else {
        0.0
    };
    SchemeStats {
        mean_rate: mean,
        std_rate: var.sqrt(),
        overhead: overheads.iter().sum::<usize>() as f64 / n as f64,
        n,
    }
}

/// Everything a scheme needs besides the samples.
pub struct EvalContext<'a> {
    pub geometry: ArrayGeometry,
    pub spans: UserSpans,
    pub grid: PolarGrid,
    pub budget: usize,
    pub hierarchy: HierarchySpec,
    pub far_field: FarFieldHierarchy,
    pub model: Option<&'a Beamformer>,
}

impl<'a> EvalContext<'a> {
    pub fn new(geometry: ArrayGeometry, cfg: &ExperimentConfig, model: Option<&'a Beamformer>) -> BenchResult<Self> {
        let spans = UserSpans::default();
        let grid = PolarGrid::sampled(
            spans.angle,
            cfg.codebook_angles,
            AngleSampling::UniformSine,
            spans.range,
            cfg.codebook_ranges,
            RangeSampling::InverseUniform,
        )?;
        Ok(Self {
            geometry,
            spans,
            grid,
            budget: cfg.budget,
            hierarchy: HierarchySpec::default(),
            far_field: FarFieldHierarchy::default(),
            model,
        })
    }

    /// Achieved rate and codeword evaluations for one decision.
    pub fn decide(&self, scheme: Scheme, s: &TrainingSample) -> BenchResult<(f64, usize)> {
        let link = s.link();
        let g = &self.geometry;
        Ok(match scheme {
            Scheme::Learned => {
                let model = self
                    .model
                    .ok_or_else(|| BenchError::Config("learned scheme needs a model".into()))?;
                (link.rate(&model.infer(&s.target_channel)?)?, 0)
            }
            Scheme::NfHier => {
                let r = nf_hierarchical_search(g, link, &self.hierarchy, (self.spans.angle, self.spans.range))?;
                (r.score, r.overhead)
            }
            Scheme::FfHier => {
                let r = ff_hierarchical_search(g, link, self.spans.angle, &self.far_field)?;
                (r.score, r.overhead)
            }
            Scheme::Exhaustive256 => {
                let r = exhaustive_search(g, link, &self.grid, Some(self.budget))?;
                (r.score, r.overhead)
            }
            Scheme::ExhaustiveUnlimited => {
                let r = exhaustive_search(g, link, &self.grid, None)?;
                (r.score, r.overhead)
            }
            Scheme::MatchedFilterBound => (matched_filter_bound(&s.target_channel, &s.noise), 0),
        })
    }

    pub fn evaluate(&self, scheme: Scheme, samples: &[TrainingSample]) -> BenchResult<SchemeStats> {
        if samples.is_empty() {
            return Err(BenchError::Config("no samples to evaluate".into()));
        }
        let mut rates = Vec::with_capacity(samples.len());
        let mut overheads = Vec::with_capacity(samples.len());
        for s in samples {
            let (r, o) = self.decide(scheme, s)?;
            rates.push(r);
            overheads.push(o);
        }
        Ok(stats(&rates, &overheads))
    }
}

pub fn base_geometry(cfg: &ExperimentConfig) -> BenchResult<ArrayGeometry> {
    geometry_for(cfg.n_antennas, cfg.carrier_ghz, cfg.spacing_m)
}

fn geometry_for(n: usize, carrier_ghz: f64, spacing: Option<f64>) -> BenchResult<ArrayGeometry> {
    Ok(match spacing {
        Some(d) => ArrayGeometry::with_spacing(n, carrier_ghz * 1e9, d)?,
        None => ArrayGeometry::new(n, carrier_ghz * 1e9)?,
    })
}

/// Geometry and path-loss mode at one axis value.
pub fn point_setup(cfg: &ExperimentConfig, value: f64) -> BenchResult<(ArrayGeometry, FsplMode)> {
    Ok(match cfg.axis {
        Axis::Carrier => (geometry_for(cfg.n_antennas, value, None)?, FsplMode::PaperFspl),
        Axis::Antennas => (geometry_for(value as usize, cfg.carrier_ghz, cfg.spacing_m)?, cfg.fspl),
        _ => (base_geometry(cfg)?, cfg.fspl),
    })
}

/// Evaluation samples at axis point `i`. Noise power is calibrated once on
/// the base geometry so carrier and antenna changes show up in the rate.
pub fn point_samples(cfg: &ExperimentConfig, i: usize) -> BenchResult<Vec<TrainingSample>> {
    let value = cfg.grid[i];
    let (geom, fspl) = point_setup(cfg, value)?;
    let mut frames = generate_frames(&UserSpans::default(), cfg.users, cfg.eval_frames, eval_seed(cfg.seed, i))?;
    for f in &mut frames {
        for u in &mut f.users {
            *u = match cfg.axis {
                Axis::Distance => PolarLocation::new(value, u.angle_rad())?,
                Axis::Angle => PolarLocation::new(u.range_m(), value.to_radians())?,
                _ => *u,
            };
        }
    }
    let snr = match cfg.axis {
        Axis::Snr => value,
        _ => cfg.snr_db,
    };
    let mut samples = frames_to_samples(&frames, &geom, SnrPolicy::Fixed(snr), fspl, cfg.reference_range_m)?;
    let base = base_geometry(cfg)?;
    let sigma2 = noise_power_for(snr, base.n_antennas(), fspl.beta(&base, cfg.reference_range_m));
    for s in &mut samples {
        s.noise.sigma2 = sigma2;
    }
    Ok(samples)
}

fn same_geometry(a: &ArrayGeometry, b: &ArrayGeometry) -> bool {
    a.n_antennas() == b.n_antennas() && a.carrier_hz() == b.carrier_hz() && a.spacing_m() == b.spacing_m()
}

/// Learned models keyed by the geometry and path-loss mode they were trained on.
#[derive(Default)]
pub struct ModelStore {
    entries: Vec<(ArrayGeometry, FsplMode, Beamformer)>,
    pub training: Vec<TrainingCost>,
}

impl ModelStore {
    pub fn insert(&mut self, geom: ArrayGeometry, fspl: FsplMode, model: Beamformer) -> BenchResult<()> {
        if model.n_antennas() != geom.n_antennas() {
            return Err(BenchError::Config(format!(
                "model has {} antennas but the geometry has {}",
                model.n_antennas(),
                geom.n_antennas()
            )));
        }
        self.entries.retain(|(g, f, _)| !(same_geometry(g, &geom) && *f == fspl));
        self.entries.push((geom, fspl, model));
        Ok(())
    }

    pub fn get(&self, geom: &ArrayGeometry, fspl: FsplMode) -> Option<&Beamformer> {
        self.entries
            .iter()
            .find(|(g, f, _)| same_geometry(g, geom) && *f == fspl)
            .map(|(_, _, m)| m)
    }
}

pub fn network_config(cfg: &ExperimentConfig, n_antennas: usize) -> NetworkConfig {
    NetworkConfig {
        widths: cfg.widths,
        ..NetworkConfig::new(n_antennas, cfg.tanh, cfg.seed)
    }
}

pub fn train_config(cfg: &ExperimentConfig, epochs: usize) -> TrainConfig {
    TrainConfig {
        lr: cfg.lr,
        batch_size: cfg.batch_size,
        epochs,
        seed: cfg.seed,
        ..Default::default()
    }
}

/// Trains on a fresh `DatasetRecipe` drop for `geom`.
pub fn train_for(
    cfg: &ExperimentConfig,
    geom: ArrayGeometry,
    fspl: FsplMode,
    epochs: usize,
    failure_checkpoint: Option<&Path>,
) -> BenchResult<(Trainer, TrainingCost)> {
    let mut recipe = DatasetRecipe::new(geom, cfg.users, cfg.frames, cfg.seed);
    recipe.fspl_mode = fspl;
    recipe.reference_range_m = cfg.reference_range_m;
    let split = recipe.build()?;
    let mut tc = train_config(cfg, epochs);
    tc.failure_checkpoint = failure_checkpoint.map(Path::to_path_buf);
    let mut trainer = Trainer::new(network_config(cfg, geom.n_antennas()), tc)?;
    trainer.fit(&split.train, &split.test)?;
    let cost = TrainingCost {
        n_antennas: geom.n_antennas(),
        carrier_ghz: geom.carrier_hz() / 1e9,
        epochs,
        batches_per_epoch: split.train.len().div_ceil(cfg.batch_size),
    };
    Ok((trainer, cost))
}

fn ensure_model(cfg: &ExperimentConfig, geom: ArrayGeometry, fspl: FsplMode, store: &mut ModelStore) -> BenchResult<()> {
    if store.get(&geom, fspl).is_some() {
        return Ok(());
    }
    let base = same_geometry(&geom, &base_geometry(cfg)?) && fspl == cfg.fspl;
    if base {
        if let Some(path) = &cfg.checkpoint {
            if path.exists() {
                let trainer = load_checkpoint(path)?;
                if trainer.model.n_antennas() != geom.n_antennas() {
                    return Err(BenchError::Config(format!(
                        "checkpoint {} was trained for N = {}, the sweep uses N = {}",
                        path.display(),
                        trainer.model.n_antennas(),
                        geom.n_antennas()
                    )));
                }
                return store.insert(geom, fspl, trainer.model);
            }
        }
    }
    let epochs = if base { cfg.epochs } else { cfg.retrain_epochs };
    let (trainer, cost) = train_for(cfg, geom, fspl, epochs, None)?;
    if base {
        if let Some(path) = &cfg.checkpoint {
            save_checkpoint(&trainer, path)?;
        }
    }
    store.training.push(cost);
    store.insert(geom, fspl, trainer.model)
}

pub fn run_sweep(cfg: &ExperimentConfig, store: &mut ModelStore) -> BenchResult<SweepResult> {
    cfg.validate()?;
    let mut rows = Vec::with_capacity(cfg.grid.len() * cfg.schemes.len());
    for (i, &value) in cfg.grid.iter().enumerate() {
        let (geom, fspl) = point_setup(cfg, value)?;
        if cfg.schemes.contains(&Scheme::Learned) {
            ensure_model(cfg, geom, fspl, store)?;
        }
        let samples = point_samples(cfg, i)?;
        let ctx = EvalContext::new(geom, cfg, store.get(&geom, fspl))?;
        for &scheme in &cfg.schemes {
            let s = ctx.evaluate(scheme, &samples)?;
            rows.push(SweepRow {
                axis_value: value,
                scheme,
                mean_rate: s.mean_rate,
                std_rate: s.std_rate,
                overhead: s.overhead,
                n: s.n,
            });
        }
    }
    Ok(SweepResult {
        axis: cfg.axis,
        rows,
        training: store.training.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stats_use_sample_deviation() {
        let s = stats(&[1.0, 2.0, 3.0], &[4, 4, 4]);
        assert_eq!(s.mean_rate, 2.0);
        assert_eq!(s.std_rate, 1.0);
        assert_eq!(s.overhead, 4.0);
        assert_eq!(stats(&[5.0], &[0]).std_rate, 0.0);
    }

    #[test]
    fn distance_points_pin_every_user() {
        let cfg = ExperimentConfig {
            axis: Axis::Distance,
            grid: vec![7.0, 30.0],
            eval_frames: 4,
            ..Default::default()
        };
        let s = point_samples(&cfg, 1).unwrap();
        assert_eq!(s.len(), 12);
        assert!(s.iter().all(|x| x.target_channel.location.range_m() == 30.0));
        assert!(s.iter().all(|x| x.interferer_channels.len() == 2));
    }

    #[test]
    fn carrier_points_use_half_wavelength_and_path_loss() {
        let cfg = ExperimentConfig {
            axis: Axis::Carrier,
            grid: vec![28.0, 100.0],
            ..Default::default()
        };
        let (g, f) = point_setup(&cfg, 100.0).unwrap();
        assert_eq!(f, FsplMode::PaperFspl);
        assert!((g.spacing_m() - g.wavelength_m() / 2.0).abs() < 1e-15);
        assert_eq!(g.n_antennas(), 64);
    }
}
