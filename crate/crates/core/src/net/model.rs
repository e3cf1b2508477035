use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::layers::{
    avg_pool, avg_pool_backward, pad1, pad1_backward, relu, relu_backward, BatchNorm,
    BatchNormCache, Conv2d, ConvTranspose, Linear,
};
use super::tensor::Tensor;
use crate::array::ChannelVector;
use crate::error::{dim_err, Error, Result};
use crate::scenario::realify;
use crate::weights::{BeamWeights, PhaseVector};

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkConfig {
    pub n_antennas: usize,
    /// Channel widths at full, half and quarter resolution. Each pooling
    /// keeps the channel count; the next block's first convolution expands it.
    pub widths: [usize; 3],
    pub tanh_head: bool,
    pub seed: u64,
    pub bn_momentum: f64,
    pub bn_eps: f64,
}

impl NetworkConfig {
    pub fn new(n_antennas: usize, tanh_head: bool, seed: u64) -> Self {
        Self {
            n_antennas,
            widths: [1, 8, 16],
            tanh_head,
            seed,
            bn_momentum: 0.1,
            bn_eps: 1e-5,
        }
    }

    /// Eight antennas, widths 1→2→4; small enough for finite differences.
    pub fn toy(seed: u64) -> Self {
        Self {
            widths: [1, 2, 4],
            ..Self::new(8, true, seed)
        }
    }

    pub fn validate(&self) -> Result<()> {
        // The quarter-resolution block needs width ≥ 2.
        if self.n_antennas < 8 || self.n_antennas % 4 != 0 {
            return Err(Error::Config(format!(
                "n_antennas must be a multiple of 4 and at least 8, got {}",
                self.n_antennas
            )));
        }
        if self.widths.contains(&0) {
            return Err(Error::Config("channel widths must be positive".into()));
        }
        if !(self.bn_momentum > 0.0 && self.bn_momentum <= 1.0) || !(self.bn_eps > 0.0) {
            return Err(Error::Config("invalid batch-norm momentum or epsilon".into()));
        }
        Ok(())
    }
}

/// pad → conv(2,2) → BN → ReLU → conv(2,2) → BN → ReLU.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureBlock {
    pub conv1: Conv2d,
    pub bn1: BatchNorm,
    pub conv2: Conv2d,
    pub bn2: BatchNorm,
}

impl FeatureBlock {
    fn new(c_in: usize, c_out: usize, cfg: &NetworkConfig, rng: &mut ChaCha8Rng) -> Self {
        Self {
            conv1: Conv2d::new(c_in, c_out, 2, 2, rng),
            bn1: BatchNorm::new(c_out, cfg.bn_momentum, cfg.bn_eps),
            conv2: Conv2d::new(c_out, c_out, 2, 2, rng),
            bn2: BatchNorm::new(c_out, cfg.bn_momentum, cfg.bn_eps),
        }
    }

    fn zeros_like(&self) -> Self {
        Self {
            conv1: self.conv1.zeros_like(),
            bn1: self.bn1.zeros_like(),
            conv2: self.conv2.zeros_like(),
            bn2: self.bn2.zeros_like(),
        }
    }
}

/// All learnable arrays plus batch-norm running statistics. Gradients use
/// the same type; their running-statistic fields stay zero.
#[derive(Debug, Clone, PartialEq)]
pub struct Parameters {
    /// Encoder blocks 0–2, decoder blocks 3–4.
    pub blocks: Vec<FeatureBlock>,
    pub up: Vec<ConvTranspose>,
    pub fc: Linear,
}

impl Parameters {
    pub fn init(cfg: &NetworkConfig) -> Result<Self> {
        cfg.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let [c0, c1, c2] = cfg.widths;
        let blocks = vec![
            FeatureBlock::new(1, c0, cfg, &mut rng),
            FeatureBlock::new(c0, c1, cfg, &mut rng),
            FeatureBlock::new(c1, c2, cfg, &mut rng),
            FeatureBlock::new(c1, c1, cfg, &mut rng),
            FeatureBlock::new(c0, c0, cfg, &mut rng),
        ];
        let up = vec![
            ConvTranspose::new(c2, c1, 2, &mut rng),
            ConvTranspose::new(c1, c0, 2, &mut rng),
        ];
        let n = cfg.n_antennas;
        let fc = Linear::new(c0 * 2 * n, n, &mut rng);
        Ok(Self { blocks, up, fc })
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            blocks: self.blocks.iter().map(FeatureBlock::zeros_like).collect(),
            up: self.up.iter().map(ConvTranspose::zeros_like).collect(),
            fc: self.fc.zeros_like(),
        }
    }

    /// Trainable arrays in a fixed order shared by gradients and optimizer state.
    pub fn trainable(&self) -> Vec<&Vec<f64>> {
        let mut out = Vec::new();
        for b in &self.blocks {
            out.extend([
                &b.conv1.weight,
                &b.conv1.bias,
                &b.bn1.gamma,
                &b.bn1.beta,
                &b.conv2.weight,
                &b.conv2.bias,
                &b.bn2.gamma,
                &b.bn2.beta,
            ]);
        }
        for u in &self.up {
            out.extend([&u.weight, &u.bias]);
        }
        out.extend([&self.fc.weight, &self.fc.bias]);
        out
    }

    pub fn trainable_mut(&mut self) -> Vec<&mut Vec<f64>> {
        let mut out = Vec::new();
        for b in &mut self.blocks {
            out.extend([
                &mut b.conv1.weight,
                &mut b.conv1.bias,
                &mut b.bn1.gamma,
                &mut b.bn1.beta,
                &mut b.conv2.weight,
                &mut b.conv2.bias,
                &mut b.bn2.gamma,
                &mut b.bn2.beta,
            ]);
        }
        for u in &mut self.up {
            out.extend([&mut u.weight, &mut u.bias]);
        }
        out.extend([&mut self.fc.weight, &mut self.fc.bias]);
        out
    }

    pub fn running_stats(&self) -> Vec<&Vec<f64>> {
        self.blocks
            .iter()
            .flat_map(|b| {
                [
                    &b.bn1.running_mean,
                    &b.bn1.running_var,
                    &b.bn2.running_mean,
                    &b.bn2.running_var,
                ]
            })
            .collect()
    }

    pub fn running_stats_mut(&mut self) -> Vec<&mut Vec<f64>> {
        self.blocks
            .iter_mut()
            .flat_map(|b| {
                [
                    &mut b.bn1.running_mean,
                    &mut b.bn1.running_var,
                    &mut b.bn2.running_mean,
                    &mut b.bn2.running_var,
                ]
            })
            .collect()
    }

    pub fn n_trainable(&self) -> usize {
        self.trainable().iter().map(|a| a.len()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.trainable()
            .into_iter()
            .chain(self.running_stats())
            .all(|a| a.iter().all(|v| v.is_finite()))
    }
}

/// Evaluation-mode feature block (running batch-norm statistics).
pub fn feature_block(x: &Tensor, block: &FeatureBlock) -> Result<Tensor> {
    check_block_input(x)?;
    let c1 = block.conv1.forward(&pad1(x))?;
    let r1 = relu(&block.bn1.forward_eval(&c1)?);
    let c2 = block.conv2.forward(&r1)?;
    Ok(relu(&block.bn2.forward_eval(&c2)?))
}

fn check_block_input(x: &Tensor) -> Result<()> {
    if x.height() < 2 || x.width() < 2 {
        return Err(dim_err("H ≥ 2 and W ≥ 2", format!("{:?}", x.shape)));
    }
    Ok(())
}

pub fn downsample(x: &Tensor) -> Result<Tensor> {
    avg_pool(x)
}

pub fn upsample(x: &Tensor, up: &ConvTranspose) -> Result<Tensor> {
    up.forward(x)
}

/// Flatten, fully connected to N, optional tanh. Returns θ row-major `B×N`.
pub fn head(x: &Tensor, fc: &Linear, tanh_head: bool) -> Result<Vec<f64>> {
    let [b, c, h, w] = x.shape;
    if c * h * w != fc.n_in || h != 2 {
        return Err(dim_err(format!("B×C×2×N with C·2N = {}", fc.n_in), format!("{:?}", x.shape)));
    }
    let mut z = fc.forward(&x.data, b)?;
    if tanh_head {
        z.iter_mut().for_each(|v| *v = v.tanh());
    }
    Ok(z)
}

/// Channel image `1×2×N` scaled to unit mean-square entry, so the network
/// sees the same dynamic range whatever the path loss.
pub fn normalized_input(input: &[f64]) -> Vec<f64> {
    let n = input.len() / 2;
    let power = input.iter().map(|v| v * v).sum::<f64>() / n.max(1) as f64;
    if power > 0.0 && power.is_finite() {
        let s = power.sqrt();
        input.iter().map(|v| v / s).collect()
    } else {
        input.to_vec()
    }
}

struct BlockCache {
    padded: Tensor,
    bn1: BatchNormCache,
    r1: Tensor,
    bn2: BatchNormCache,
    r2: Tensor,
}

fn block_train(block: &mut FeatureBlock, x: &Tensor) -> Result<BlockCache> {
    check_block_input(x)?;
    let padded = pad1(x);
    let c1 = block.conv1.forward(&padded)?;
    let (b1, bn1) = block.bn1.forward_train(&c1)?;
    let r1 = relu(&b1);
    let c2 = block.conv2.forward(&r1)?;
    let (b2, bn2) = block.bn2.forward_train(&c2)?;
    let r2 = relu(&b2);
    Ok(BlockCache {
        padded,
        bn1,
        r1,
        bn2,
        r2,
    })
}

fn block_backward(block: &FeatureBlock, cache: &BlockCache, dy: &Tensor, grad: &mut FeatureBlock) -> Tensor {
    let d = relu_backward(&cache.r2, dy);
    let d = block.bn2.backward(&cache.bn2, &d, &mut grad.bn2);
    let d = block.conv2.backward(&cache.r1, &d, &mut grad.conv2);
    let d = relu_backward(&cache.r1, &d);
    let d = block.bn1.backward(&cache.bn1, &d, &mut grad.bn1);
    let d = block.conv1.backward(&cache.padded, &d, &mut grad.conv1);
    pad1_backward(&d)
}

/// Intermediate values of a training-mode forward pass.
pub struct ForwardCache {
    blocks: Vec<BlockCache>,
    theta: Vec<f64>,
    batch: usize,
}

impl ForwardCache {
    /// θ row-major `B×N`.
    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn batch(&self) -> usize {
        self.batch
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Beamformer {
    pub config: NetworkConfig,
    pub params: Parameters,
}

impl Beamformer {
    pub fn new(config: NetworkConfig) -> Result<Self> {
        let params = Parameters::init(&config)?;
        Ok(Self { config, params })
    }

    pub fn n_antennas(&self) -> usize {
        self.config.n_antennas
    }

    /// Stacks normalized `2×N` inputs into a `B×1×2×N` tensor.
    pub fn input_tensor<'a, I>(&self, inputs: I) -> Result<Tensor>
    where
        I: IntoIterator<Item = &'a [f64]>,
    {
        let n = self.n_antennas();
        let mut data = Vec::new();
        let mut b = 0;
        for x in inputs {
            if x.len() != 2 * n {
                return Err(dim_err(2 * n, x.len()));
            }
            data.extend(normalized_input(x));
            b += 1;
        }
        if b == 0 {
            return Err(Error::Config("empty batch".into()));
        }
        Tensor::from_vec([b, 1, 2, n], data)
    }

    fn check_input(&self, x: &Tensor) -> Result<()> {
        let n = self.n_antennas();
        if x.shape[1..] != [1, 2, n] {
            return Err(dim_err(format!("B×1×2×{n}"), format!("{:?}", x.shape)));
        }
        Ok(())
    }

    /// Output of the last decoder block, `B×C0×2×N`.
    pub fn features(&self, x: &Tensor) -> Result<Tensor> {
        self.check_input(x)?;
        let p = &self.params;
        let e0 = feature_block(x, &p.blocks[0])?;
        let e1 = feature_block(&downsample(&e0)?, &p.blocks[1])?;
        let e2 = feature_block(&downsample(&e1)?, &p.blocks[2])?;
        let d0 = feature_block(&upsample(&e2, &p.up[0])?, &p.blocks[3])?;
        feature_block(&upsample(&d0, &p.up[1])?, &p.blocks[4])
    }

    /// Evaluation mode; θ row-major `B×N`.
    pub fn forward_eval(&self, x: &Tensor) -> Result<Vec<f64>> {
        let f = self.features(x)?;
        head(&f, &self.params.fc, self.config.tanh_head)
    }

    /// Single `2×N` channel image to weights, evaluation mode.
    pub fn forward(&self, input: &[f64]) -> Result<BeamWeights> {
        let x = self.input_tensor([input])?;
        Ok(BeamWeights::from_phases(&self.forward_eval(&x)?))
    }

    pub fn phases(&self, input: &[f64]) -> Result<PhaseVector> {
        let x = self.input_tensor([input])?;
        Ok(PhaseVector(self.forward_eval(&x)?))
    }

    /// No codeword is evaluated: inference costs zero pilot measurements.
    pub fn infer(&self, h: &ChannelVector) -> Result<BeamWeights> {
        if h.len() != self.n_antennas() {
            return Err(dim_err(self.n_antennas(), h.len()));
        }
        self.forward(&realify(&h.coefficients))
    }

    pub fn infer_batch<'a, I>(&self, inputs: I) -> Result<Vec<BeamWeights>>
    where
        I: IntoIterator<Item = &'a [f64]>,
    {
        let x = self.input_tensor(inputs)?;
        let theta = self.forward_eval(&x)?;
        Ok(theta
            .chunks_exact(self.n_antennas())
            .map(BeamWeights::from_phases)
            .collect())
    }

    /// Training mode: batch statistics, running averages updated.
    pub fn forward_train(&mut self, x: &Tensor) -> Result<ForwardCache> {
        self.check_input(x)?;
        let p = &mut self.params;
        let mut caches = Vec::with_capacity(5);
        caches.push(block_train(&mut p.blocks[0], x)?);
        let x1 = avg_pool(&caches[0].r2)?;
        caches.push(block_train(&mut p.blocks[1], &x1)?);
        let x2 = avg_pool(&caches[1].r2)?;
        caches.push(block_train(&mut p.blocks[2], &x2)?);
        let x3 = p.up[0].forward(&caches[2].r2)?;
        caches.push(block_train(&mut p.blocks[3], &x3)?);
        let x4 = p.up[1].forward(&caches[3].r2)?;
        caches.push(block_train(&mut p.blocks[4], &x4)?);
        let theta = head(&caches[4].r2, &p.fc, self.config.tanh_head)?;
        Ok(ForwardCache {
            blocks: caches,
            theta,
            batch: x.batch(),
        })
    }

    /// Gradients of a scalar loss given `∂L/∂θ` (row-major `B×N`).
    pub fn backward(&self, cache: &ForwardCache, dtheta: &[f64]) -> Result<Parameters> {
        if dtheta.len() != cache.theta.len() {
            return Err(dim_err(cache.theta.len(), dtheta.len()));
        }
        let p = &self.params;
        let mut g = p.zeros_like();
        let dz: Vec<f64> = if self.config.tanh_head {
            dtheta
                .iter()
                .zip(&cache.theta)
                .map(|(d, t)| d * (1.0 - t * t))
                .collect()
        } else {
            dtheta.to_vec()
        };
        let top = &cache.blocks[4].r2;
        let dflat = p.fc.backward(&top.data, &dz, cache.batch, &mut g.fc);
        let d = Tensor::from_vec(top.shape, dflat)?;
        let d = block_backward(&p.blocks[4], &cache.blocks[4], &d, &mut g.blocks[4]);
        let d = p.up[1].backward(&cache.blocks[3].r2, &d, &mut g.up[1]);
        let d = block_backward(&p.blocks[3], &cache.blocks[3], &d, &mut g.blocks[3]);
        let d = p.up[0].backward(&cache.blocks[2].r2, &d, &mut g.up[0]);
        let d = block_backward(&p.blocks[2], &cache.blocks[2], &d, &mut g.blocks[2]);
        let d = avg_pool_backward(&d);
        let d = block_backward(&p.blocks[1], &cache.blocks[1], &d, &mut g.blocks[1]);
        let d = avg_pool_backward(&d);
        block_backward(&p.blocks[0], &cache.blocks[0], &d, &mut g.blocks[0]);
        Ok(g)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toy_shape_chain() {
        let cfg = NetworkConfig::toy(1);
        let p = Parameters::init(&cfg).unwrap();
        let x = Tensor::from_vec([3, 1, 2, 8], (0..48).map(|i| (i as f64).sin()).collect()).unwrap();
        assert_eq!(pad1(&x).shape, [3, 1, 4, 10]);
        let e0 = feature_block(&x, &p.blocks[0]).unwrap();
        assert_eq!(e0.shape, [3, 1, 2, 8]);
        let e1 = feature_block(&downsample(&e0).unwrap(), &p.blocks[1]).unwrap();
        assert_eq!(e1.shape, [3, 2, 2, 4]);
        let e2 = feature_block(&downsample(&e1).unwrap(), &p.blocks[2]).unwrap();
        assert_eq!(e2.shape, [3, 4, 2, 2]);
        let u0 = upsample(&e2, &p.up[0]).unwrap();
        assert_eq!(u0.shape, [3, 2, 2, 4]);
        let d0 = feature_block(&u0, &p.blocks[3]).unwrap();
        let u1 = upsample(&d0, &p.up[1]).unwrap();
        assert_eq!(u1.shape, [3, 1, 2, 8]);
        let d1 = feature_block(&u1, &p.blocks[4]).unwrap();
        assert_eq!(d1.shape, [3, 1, 2, 8]);
        assert_eq!(head(&d1, &p.fc, true).unwrap().len(), 24);
    }

    #[test]
    fn zero_block_outputs_zero() {
        let cfg = NetworkConfig::toy(2);
        let mut block = Parameters::init(&cfg).unwrap().blocks[1].clone();
        block.conv1 = block.conv1.zeros_like();
        block.conv2 = block.conv2.zeros_like();
        let x = Tensor::from_vec([2, 1, 2, 4], vec![0.3; 16]).unwrap();
        let y = feature_block(&x, &block).unwrap();
        assert_eq!(y.shape, [2, 2, 2, 4]);
        assert!(y.data.iter().all(|v| *v == 0.0));
        let tiny = Tensor::zeros([1, 1, 1, 4]);
        assert!(feature_block(&tiny, &block).is_err());
    }

    #[test]
    fn zero_head_gives_zero_phase() {
        let cfg = NetworkConfig::toy(3);
        let mut model = Beamformer::new(cfg).unwrap();
        model.params.fc = model.params.fc.zeros_like();
        let input: Vec<f64> = (0..16).map(|i| i as f64 - 7.5).collect();
        let w = model.forward(&input).unwrap();
        assert!(w.as_slice().iter().all(|c| (c.re - 1.0).abs() < 1e-15 && c.im.abs() < 1e-15));
    }

    #[test]
    fn config_validation() {
        assert!(Beamformer::new(NetworkConfig::new(10, true, 0)).is_err());
        assert!(Beamformer::new(NetworkConfig::new(4, true, 0)).is_err());
        assert!(Beamformer::new(NetworkConfig::new(12, true, 0)).is_ok());
        let model = Beamformer::new(NetworkConfig::toy(0)).unwrap();
        assert!(model.forward(&[0.0; 12]).is_err());
    }

    #[test]
    fn normalization_is_scale_free() {
        let x: Vec<f64> = (0..16).map(|i| (i as f64 * 0.3).cos()).collect();
        let small: Vec<f64> = x.iter().map(|v| v * 1e-9).collect();
        let a = normalized_input(&x);
        let b = normalized_input(&small);
        for (p, q) in a.iter().zip(&b) {
            assert!((p - q).abs() < 1e-12);
        }
    }
}
