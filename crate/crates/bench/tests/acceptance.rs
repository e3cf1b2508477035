//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any fails.
//!
//! Runs as a plain binary (`harness = false`) so every line is printed.

use std::path::PathBuf;
use std::process::{Command, ExitCode};
use std::time::Instant;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use nfbeam::array::{
    far_field_steering, inner, matched_filter_bound, near_field_channel, near_field_steering, rayleigh_distance,
    ArrayGeometry, FsplMode, NoiseModel, PolarLocation, DEFAULT_REFERENCE_RANGE_M,
};
use nfbeam::codebook::{AngleSampling, PolarGrid, RangeSampling};
use nfbeam::net::{gradient_check, Beamformer, NetworkConfig, Tensor, Trainer};
use nfbeam::scenario::{DatasetRecipe, DatasetSplit, TrainingSample, UserSpans};
use nfbeam::search::{exhaustive_search, Link};
use nfbeam::BeamWeights;
use nfbeam_bench::config::{Axis, ExperimentConfig, Scheme};
use nfbeam_bench::sweep::{run_sweep, train_config, EvalContext, ModelStore};

struct Line {
    id: &'static str,
    pass: bool,
}

fn line(id: &'static str, pass: bool, detail: String) -> Line {
    println!("[{}] criterion {id}: {detail}", if pass { "PASS" } else { "FAIL" });
    Line { id, pass }
}

fn criterion_1() -> Line {
    let t = Instant::now();
    let rows = [(50e6, "0.09"), (1e9, "1.7"), (5e9, "8.3"), (28e9, "47"), (60e9, "100")];
    let mut bad = Vec::new();
    let mut got = Vec::new();
    for (f, printed) in rows {
        let decimals = printed.split('.').nth(1).map_or(0, str::len);
        let r = rayleigh_distance(0.5, f).expect("valid inputs");
        let shown = format!("{r:.decimals$}");
        if shown != printed {
            bad.push(format!("{} GHz: {shown} ≠ {printed}", f / 1e9));
        }
        got.push(shown);
    }
    let secs = t.elapsed().as_secs_f64();
    let pass = bad.is_empty() && secs < 1.0;
    line("1", pass, format!("Rayleigh table {:?} in {secs:.3}s; mismatches {bad:?}", got))
}

fn criterion_2() -> Line {
    let geom = ArrayGeometry::new(256, 50e9).expect("geometry");
    let r = 1e4 * geom.aperture_m();
    let mut worst: f64 = 0.0;
    for deg in [-60.0f64, -30.0, 0.0, 30.0, 60.0] {
        let a = deg.to_radians();
        let nf = near_field_steering(&geom, &PolarLocation::new(r, a).expect("loc"));
        let ff = far_field_steering(&geom, a).expect("angle");
        for (x, y) in nf.iter().zip(&ff) {
            worst = worst.max((x * y.conj()).arg().abs());
        }
    }
    line("2", worst < 1e-3, format!("max near/far phase gap at r = 1e4·D = {r:.1} m: {worst:.3e} rad (< 1e-3)"))
}

fn criterion_3() -> Line {
    let t = Instant::now();
    let geom = ArrayGeometry::new(256, 50e9).expect("geometry");
    let spans = UserSpans::default();
    let grid = PolarGrid::sampled(spans.angle, 121, AngleSampling::UniformSine, spans.range, 40, RangeSampling::InverseUniform)
        .expect("grid");
    let noise = NoiseModel::calibrated(10.0, &geom, FsplMode::Normalized, DEFAULT_REFERENCE_RANGE_M);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst = f64::INFINITY;
    for _ in 0..100 {
        let (i, j) = (rng.gen_range(0..121), rng.gen_range(0..40));
        let loc = PolarLocation::new(grid.ranges_m()[j], grid.angles_rad()[i]).expect("loc");
        let h = near_field_channel(&geom, &loc, FsplMode::Normalized);
        let res = exhaustive_search(&geom, Link::new(&h, &[], &noise), &grid, None).expect("search");
        worst = worst.min(res.score / matched_filter_bound(&h, &noise));
    }
    let secs = t.elapsed().as_secs_f64();
    line(
        "3",
        worst >= 0.99 && secs < 60.0,
        format!("exhaustive-unlimited / bound, worst of 100 on-grid users: {worst:.4} (≥ 0.99) in {secs:.1}s"),
    )
}

fn criterion_4() -> Line {
    let t = Instant::now();
    let model = Beamformer::new(NetworkConfig::toy(1)).expect("toy");
    let split = DatasetRecipe::new(ArrayGeometry::new(8, 50e9).expect("geometry"), 3, 4, 1).build().expect("data");
    let batch: Vec<&TrainingSample> = split.train.iter().chain(&split.test).collect();
    let r = gradient_check(&model, &batch, 1e-5).expect("gradcheck");
    let secs = t.elapsed().as_secs_f64();
    line(
        "4",
        r.passed(1e-4) && secs < 60.0,
        format!("{} toy parameters, max rel. err {:.2e} (< 1e-4) in {secs:.2}s", r.n_checked, r.max_rel_err),
    )
}

fn criterion_5() -> Line {
    let mut checked = 0;
    let mut failures = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for n in [8usize, 64, 256] {
        for tanh in [true, false] {
            for seed in 0..3u64 {
                let model = Beamformer::new(NetworkConfig::new(n, tanh, seed)).expect("model");
                for batch in [1usize, 3] {
                    for scale in [1e-9, 1.0, 1e6] {
                        let data: Vec<f64> = (0..batch * 2 * n).map(|_| scale * rng.gen_range(-1.0..1.0)).collect();
                        let x = Tensor::from_vec([batch, 1, 2, n], data).expect("tensor");
                        let f = model.features(&x).expect("forward");
                        if f.shape != [batch, 1, 2, n] {
                            failures.push(format!("N={n}: shape {:?}", f.shape));
                        }
                        let ws = model.infer_batch(x.data.chunks_exact(2 * n)).expect("infer");
                        for w in ws {
                            checked += 1;
                            if w.len() != n || w.max_modulus_error() > 1e-12 {
                                failures.push(format!("N={n}: modulus error {:.1e}", w.max_modulus_error()));
                            }
                        }
                    }
                }
            }
        }
    }
    line(
        "5",
        failures.is_empty(),
        format!("{checked} beams over N ∈ {{8, 64, 256}}, shape restored and |w_n| = 1 ± 1e-12; failures {failures:?}"),
    )
}

/// The shared desk-scale runs.
struct Desk {
    geom: ArrayGeometry,
    split: DatasetSplit,
    tanh: Trainer,
    plain: Trainer,
    minutes: f64,
}

fn desk_config() -> ExperimentConfig {
    ExperimentConfig {
        n_antennas: 64,
        users: 3,
        frames: 500,
        epochs: 200,
        ..Default::default()
    }
}

fn desk() -> Desk {
    let t = Instant::now();
    let cfg = desk_config();
    let geom = ArrayGeometry::new(cfg.n_antennas, cfg.carrier_ghz * 1e9).expect("geometry");
    let split = DatasetRecipe::new(geom, cfg.users, cfg.frames, cfg.seed).build().expect("data");
    let fit = |tanh: bool| {
        let net = NetworkConfig {
            widths: cfg.widths,
            ..NetworkConfig::new(cfg.n_antennas, tanh, cfg.seed)
        };
        let mut tr = Trainer::new(net, train_config(&cfg, cfg.epochs)).expect("trainer");
        tr.fit(&split.train, &split.test).expect("training");
        tr
    };
    let tanh = fit(true);
    let plain = fit(false);
    Desk {
        geom,
        split,
        tanh,
        plain,
        minutes: t.elapsed().as_secs_f64() / 60.0,
    }
}

fn at_snr(d: &Desk, snr: f64) -> Vec<TrainingSample> {
    d.split.test.iter().map(|s| s.with_snr(&d.geom, snr)).collect()
}

fn criterion_6(d: &Desk) -> Line {
    let h = &d.tanh.history;
    // Smoothed curve: means of consecutive 10-epoch blocks over epochs 0–49.
    let blocks: Vec<f64> = h[..50]
        .chunks(10)
        .map(|c| c.iter().map(|r| r.train_loss).sum::<f64>() / c.len() as f64)
        .collect();
    let a = blocks.windows(2).all(|w| w[1] < w[0]);
    let v_tanh = h.last().and_then(|r| r.val_loss).expect("validation");
    let v_plain = d.plain.history.last().and_then(|r| r.val_loss).expect("validation");
    let b = v_tanh < v_plain;

    let test = at_snr(d, 10.0);
    let ctx = EvalContext::new(d.geom, &desk_config(), Some(&d.tanh.model)).expect("context");
    let learned = ctx.evaluate(Scheme::Learned, &test).expect("eval").mean_rate;
    let e256 = ctx.evaluate(Scheme::Exhaustive256, &test).expect("eval").mean_rate;
    let eun = ctx.evaluate(Scheme::ExhaustiveUnlimited, &test).expect("eval").mean_rate;
    let c = learned >= e256 && learned >= 0.85 * eun;
    line(
        "6",
        a && b && c,
        format!(
            "(a) 10-epoch block means {:?} strictly decreasing: {a}; \
             (b) val loss tanh {v_tanh:.4} < no-tanh {v_plain:.4}: {b}; \
             (c) @10 dB learned {learned:.3} vs exhaustive-256 {e256:.3}, 0.85·unlimited {:.3} ({:.1}% of {eun:.3}): {c}; \
             training {:.1} min",
            blocks.iter().map(|v| (v * 1e4).round() / 1e4).collect::<Vec<_>>(),
            0.85 * eun,
            100.0 * learned / eun,
            d.minutes
        ),
    )
}

fn criterion_7(d: &Desk) -> Line {
    let test = at_snr(d, 20.0);
    let ctx = EvalContext::new(d.geom, &desk_config(), Some(&d.tanh.model)).expect("context");
    let order = [Scheme::Learned, Scheme::NfHier, Scheme::FfHier, Scheme::Exhaustive256];
    let rates: Vec<f64> = order
        .iter()
        .map(|&s| ctx.evaluate(s, &test).expect("eval").mean_rate)
        .collect();
    let pass = rates.windows(2).all(|w| w[0] >= w[1]);
    let margins: Vec<String> = rates
        .windows(2)
        .zip(order.windows(2))
        .map(|(r, s)| format!("{} vs {}: {:+.1}%", s[0], s[1], 100.0 * (r[0] / r[1] - 1.0)))
        .collect();
    line(
        "7",
        pass,
        format!(
            "@20 dB learned {:.3} ≥ nf-hier {:.3} ≥ ff-hier {:.3} ≥ exhaustive-256 {:.3}; margins {margins:?}",
            rates[0], rates[1], rates[2], rates[3]
        ),
    )
}

fn gain_db(w: &[Complex64], h: &[Complex64]) -> f64 {
    let n = w.len() as f64;
    10.0 * (inner(w, h).norm_sqr() / (n * n)).log10()
}

fn criterion_8() -> Line {
    let geom = ArrayGeometry::new(256, 50e9).expect("geometry");
    let near = near_field_steering(&geom, &PolarLocation::new(10.0, 0.0).expect("loc"));
    let far_user = near_field_steering(&geom, &PolarLocation::new(30.0, 0.0).expect("loc"));
    let nf_beam = BeamWeights::from_unit_modulus(near.clone()).expect("unit modulus");
    let ff_beam = BeamWeights::from_unit_modulus(far_field_steering(&geom, 0.0).expect("angle")).expect("unit modulus");
    let nf_drop = gain_db(nf_beam.as_slice(), &near) - gain_db(nf_beam.as_slice(), &far_user);
    let ff_diff = (gain_db(ff_beam.as_slice(), &near) - gain_db(ff_beam.as_slice(), &far_user)).abs();
    line(
        "8",
        nf_drop >= 3.0 && ff_diff < 0.5,
        format!("near-field beam at (10 m, 0°) loses {nf_drop:.2} dB at 30 m (≥ 3); far-field beam differs by {ff_diff:.2} dB (< 0.5)"),
    )
}

fn criterion_9(d: &Desk) -> Line {
    let cfg = ExperimentConfig {
        axis: Axis::Distance,
        grid: (1..=10).map(|k| 5.0 * k as f64).collect(),
        schemes: vec![Scheme::Learned, Scheme::MatchedFilterBound],
        fspl: FsplMode::PaperFspl,
        ..desk_config()
    };
    let mut store = ModelStore::default();
    store.insert(d.geom, FsplMode::PaperFspl, d.tanh.model.clone()).expect("store");
    let res = run_sweep(&cfg, &mut store).expect("sweep");
    let series = |s: Scheme| -> Vec<f64> { res.rows.iter().filter(|r| r.scheme == s).map(|r| r.mean_rate).collect() };
    let bound = series(Scheme::MatchedFilterBound);
    let learned = series(Scheme::Learned);
    let monotone = bound.windows(2).all(|w| w[1] <= w[0]);
    let ratios: Vec<f64> = learned.iter().zip(&bound).map(|(l, b)| l / b).collect();
    let worst = ratios.iter().cloned().fold(f64::INFINITY, f64::min);
    line(
        "9",
        monotone && worst >= 0.85,
        format!(
            "bound non-increasing over 5..50 m: {monotone} ({:?}); learned/bound worst {worst:.3} (≥ 0.85) per point {:?}",
            bound.iter().map(|v| (v * 100.0).round() / 100.0).collect::<Vec<_>>(),
            ratios.iter().map(|v| (v * 1000.0).round() / 1000.0).collect::<Vec<_>>()
        ),
    )
}

fn criterion_10() -> Line {
    let root = std::env::temp_dir().join(format!("nfbeam-accept-{}", std::process::id()));
    std::fs::create_dir_all(&root).expect("temp dir");
    let cfg_path = root.join("repro.cfg");
    std::fs::write(
        &cfg_path,
        "axis = snr\ngrid = -10:10:10\nn_antennas = 16\nframes = 20\neval_frames = 4\nepochs = 3\nbatch_size = 16\n",
    )
    .expect("config");
    let run = |tag: &str| -> Option<Vec<u8>> {
        let out = root.join(tag);
        let status = Command::new(env!("CARGO_BIN_EXE_bench"))
            .args(["run", "--config"])
            .arg(&cfg_path)
            .env("NFBEAM_OUTPUT_ROOT", &out)
            .output()
            .ok()?;
        if !status.status.success() {
            eprintln!("{}", String::from_utf8_lossy(&status.stderr));
            return None;
        }
        std::fs::read(PathBuf::from(&out).join("out").join("sweep.csv")).ok()
    };
    let (a, b) = (run("a"), run("b"));
    let pass = matches!((&a, &b), (Some(x), Some(y)) if x == y && !x.is_empty());
    let rows = a.as_ref().map_or(0, |x| x.iter().filter(|c| **c == b'\n').count().saturating_sub(1));
    std::fs::remove_dir_all(&root).ok();
    line("10", pass, format!("two `bench run` invocations, identical sweep.csv bytes ({rows} rows)"))
}

fn main() -> ExitCode {
    let mut lines = vec![criterion_1(), criterion_2(), criterion_3(), criterion_4(), criterion_5()];
    let d = desk();
    lines.push(criterion_6(&d));
    lines.push(criterion_7(&d));
    lines.push(criterion_8());
    lines.push(criterion_9(&d));
    lines.push(criterion_10());
    let failed: Vec<&str> = lines.iter().filter(|l| !l.pass).map(|l| l.id).collect();
    println!(
        "acceptance: {}/{} criteria passed{}",
        lines.len() - failed.len(),
        lines.len(),
        if failed.is_empty() { String::new() } else { format!("; failed {failed:?}") }
    );
    if failed.is_empty() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
