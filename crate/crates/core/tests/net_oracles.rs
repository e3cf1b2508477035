use nfbeam::array::{ArrayGeometry, FsplMode, DEFAULT_REFERENCE_RANGE_M};
use nfbeam::net::{gradient_check, Beamformer, NetworkConfig, Tensor};
use nfbeam::scenario::{frames_to_samples, generate_frames, SnrPolicy, TrainingSample, UserSpans};
use proptest::prelude::*;

fn samples(n: usize, frames: usize, snr: f64, fspl: FsplMode, seed: u64) -> Vec<TrainingSample> {
    let geom = ArrayGeometry::new(n, 50e9).unwrap();
    let fr = generate_frames(&UserSpans::default(), 3, frames, seed).unwrap();
    frames_to_samples(&fr, &geom, SnrPolicy::Fixed(snr), fspl, DEFAULT_REFERENCE_RANGE_M).unwrap()
}

#[test]
fn toy_network_gradients_match_finite_differences() {
    for (tanh, seed) in [(true, 1), (false, 2)] {
        let cfg = NetworkConfig {
            tanh_head: tanh,
            ..NetworkConfig::toy(seed)
        };
        let model = Beamformer::new(cfg).unwrap();
        let set = samples(8, 2, 0.0, FsplMode::Normalized, seed);
        let batch: Vec<&TrainingSample> = set.iter().collect();
        let report = gradient_check(&model, &batch, 1e-5).unwrap();
        assert_eq!(report.n_checked, model.params.n_trainable());
        println!("tanh={tanh}: {report:?}");
        assert!(report.passed(1e-4), "tanh={tanh}: {report:?}");
    }
}

#[test]
fn eval_mode_is_deterministic() {
    let model = Beamformer::new(NetworkConfig::new(64, true, 3)).unwrap();
    let s = &samples(64, 1, 10.0, FsplMode::PaperFspl, 4)[0];
    let a = model.infer(&s.target_channel).unwrap();
    let b = model.infer(&s.target_channel).unwrap();
    assert_eq!(a, b);
}

#[test]
fn rotated_channel_keeps_rate_of_rotated_beam() {
    let model = Beamformer::new(NetworkConfig::new(16, true, 8)).unwrap();
    let s = &samples(16, 1, 10.0, FsplMode::Normalized, 9)[0];
    let w = model.infer(&s.target_channel).unwrap();
    let base = s.link().rate(&w).unwrap();
    for phi in [0.3, 1.7, -2.9] {
        let h = s.target_channel.rotated(phi);
        let rate = nfbeam::array::achievable_rate(&w.rotated(phi), &h, &s.interferer_channels, &s.noise).unwrap();
        assert!((rate - base).abs() < 1e-12);
    }
}

fn check_shapes(n: usize, batch: usize, tanh: bool, seed: u64, scale: f64) -> Result<(), TestCaseError> {
    let model = Beamformer::new(NetworkConfig::new(n, tanh, seed)).unwrap();
    let data: Vec<f64> = (0..batch * 2 * n)
        .map(|i| scale * ((i as f64 + seed as f64) * 0.618).sin())
        .collect();
    let x = Tensor::from_vec([batch, 1, 2, n], data).unwrap();
    let f = model.features(&x).unwrap();
    prop_assert_eq!(f.shape, [batch, 1, 2, n]);
    let theta = model.forward_eval(&x).unwrap();
    prop_assert_eq!(theta.len(), batch * n);
    if tanh {
        prop_assert!(theta.iter().all(|t| t.abs() < 1.0));
    }
    let inputs: Vec<&[f64]> = x.data.chunks_exact(2 * n).collect();
    for w in model.infer_batch(inputs).unwrap() {
        prop_assert_eq!(w.len(), n);
        prop_assert!(w.max_modulus_error() <= 1e-12);
    }
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn shapes_and_unit_modulus(
        n in prop::sample::select(vec![8usize, 64, 256]),
        batch in 1usize..4,
        tanh in any::<bool>(),
        seed in 0u64..1000,
        scale in prop::sample::select(vec![1e-9, 1.0, 1e6]),
    ) {
        check_shapes(n, batch, tanh, seed, scale)?;
    }

    #[test]
    fn any_multiple_of_four_restores_shape(k in 2usize..20, seed in 0u64..100) {
        check_shapes(4 * k, 2, true, seed, 1.0)?;
    }
}
