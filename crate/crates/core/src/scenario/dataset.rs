//! Binary dataset container.
//!
//! Layout (little-endian throughout):
//!
//! ```text
//! magic    8 bytes  "NFBDSET\0"
//! version  u32
//! geometry u64 n_antennas, f64 carrier_hz, f64 spacing_m
//! spans    f64 angle_min, f64 angle_max, f64 range_min, f64 range_max, u8 range_law
//! fspl     u8 (0 normalized, 1 paper-fspl)
//! drop     u64 users, u64 frames, u64 generation_seed, f64 reference_range_m
//! split    f64 ratio, u64 split_seed, u64 n_train, u64 n_test
//! samples  n_train training records then n_test test records
//! ```
//!
//! A record is `u64 frame, u64 user, f64 snr_db, f64 sigma2, f64 r_ref,
//! f64 tx_power, u64 n_interferers` followed by `1 + n_interferers`
//! channels, each `f64 range, f64 angle, f64 beta, u8 fspl` and `2N` f64
//! (real parts, then imaginary parts).

use std::fs;
use std::path::Path;

use num_complex::Complex64;

use super::{realify, DatasetMeta, DatasetSplit, RangeLaw, TrainingSample, UserSpans};
use crate::array::{ArrayGeometry, ChannelVector, FsplMode, NoiseModel, PolarLocation};
use crate::binio::{Reader, Writer};
use crate::codebook::Span;
use crate::error::{Error, Result};

pub const DATASET_VERSION: u32 = 1;
const MAGIC: &[u8; 8] = b"NFBDSET\0";

fn fspl_from(code: u8) -> Result<FsplMode> {
    FsplMode::from_code(code).ok_or_else(|| Error::Format(format!("unknown fspl code {code}")))
}

fn put_channel(w: &mut Writer, h: &ChannelVector) {
    w.f64(h.location.range_m());
    w.f64(h.location.angle_rad());
    w.f64(h.beta);
    w.u8(h.fspl_mode.code());
    for v in realify(&h.coefficients) {
        w.f64(v);
    }
}

fn get_channel(r: &mut Reader<'_>, n: usize) -> Result<ChannelVector> {
    let range = r.f64()?;
    let angle = r.f64()?;
    let location = PolarLocation::new(range, angle)?;
    let beta = r.f64()?;
    let fspl_mode = fspl_from(r.u8()?)?;
    let mut re = Vec::with_capacity(n);
    for _ in 0..n {
        re.push(r.f64()?);
    }
    let mut coefficients = Vec::with_capacity(n);
    for k in 0..n {
        coefficients.push(Complex64::new(re[k], r.f64()?));
    }
    Ok(ChannelVector {
        coefficients,
        location,
        fspl_mode,
        beta,
    })
}

fn put_sample(w: &mut Writer, s: &TrainingSample) {
    w.u64(s.frame as u64);
    w.u64(s.user as u64);
    w.f64(s.noise.snr_db);
    w.f64(s.noise.sigma2);
    w.f64(s.noise.reference_range_m);
    w.f64(s.noise.tx_power);
    w.u64(s.interferer_channels.len() as u64);
    put_channel(w, &s.target_channel);
    for h in &s.interferer_channels {
        put_channel(w, h);
    }
}

fn get_sample(r: &mut Reader<'_>, n: usize) -> Result<TrainingSample> {
    let frame = r.usize()?;
    let user = r.usize()?;
    let noise = NoiseModel {
        snr_db: r.f64()?,
        sigma2: r.f64()?,
        reference_range_m: r.f64()?,
        tx_power: r.f64()?,
    };
    let n_interf = r.usize()?;
    let target_channel = get_channel(r, n)?;
    let interferer_channels = (0..n_interf).map(|_| get_channel(r, n)).collect::<Result<Vec<_>>>()?;
    Ok(TrainingSample {
        input: realify(&target_channel.coefficients),
        target_channel,
        interferer_channels,
        noise,
        frame,
        user,
    })
}

pub fn write_dataset(split: &DatasetSplit) -> Vec<u8> {
    let m = &split.meta;
    let mut w = Writer(Vec::new());
    w.0.extend_from_slice(MAGIC);
    w.u32(DATASET_VERSION);
    w.u64(m.geometry.n_antennas() as u64);
    w.f64(m.geometry.carrier_hz());
    w.f64(m.geometry.spacing_m());
    w.f64(m.spans.angle.min);
    w.f64(m.spans.angle.max);
    w.f64(m.spans.range.min);
    w.f64(m.spans.range.max);
    w.u8(match m.spans.range_law {
        RangeLaw::Uniform => 0,
        RangeLaw::InverseUniform => 1,
    });
    w.u8(m.fspl_mode.code());
    w.u64(m.users as u64);
    w.u64(m.frames as u64);
    w.u64(m.generation_seed);
    w.f64(m.reference_range_m);
    w.f64(split.ratio);
    w.u64(split.seed);
    w.u64(split.train.len() as u64);
    w.u64(split.test.len() as u64);
    for s in split.train.iter().chain(&split.test) {
        put_sample(&mut w, s);
    }
    w.0
}

pub fn read_dataset(bytes: &[u8]) -> Result<DatasetSplit> {
    let mut r = Reader::new(bytes);
    if r.take(8)? != MAGIC {
        return Err(Error::Format("not a dataset file (bad magic)".into()));
    }
    let version = r.u32()?;
    if version != DATASET_VERSION {
        return Err(Error::Format(format!(
            "dataset version {version} unsupported (expected {DATASET_VERSION})"
        )));
    }
    let n = r.usize()?;
    let geometry = ArrayGeometry::with_spacing(n, r.f64()?, r.f64()?)?;
    let angle = Span::new(r.f64()?, r.f64()?)?;
    let range = Span::new(r.f64()?, r.f64()?)?;
    let range_law = match r.u8()? {
        0 => RangeLaw::Uniform,
        1 => RangeLaw::InverseUniform,
        c => return Err(Error::Format(format!("unknown range law {c}"))),
    };
    let fspl_mode = fspl_from(r.u8()?)?;
    let meta = DatasetMeta {
        geometry,
        spans: UserSpans {
            angle,
            range,
            range_law,
        },
        fspl_mode,
        users: r.usize()?,
        frames: r.usize()?,
        generation_seed: r.u64()?,
        reference_range_m: r.f64()?,
    };
    let ratio = r.f64()?;
    let seed = r.u64()?;
    let n_train = r.usize()?;
    let n_test = r.usize()?;
    let train = (0..n_train).map(|_| get_sample(&mut r, n)).collect::<Result<Vec<_>>>()?;
    let test = (0..n_test).map(|_| get_sample(&mut r, n)).collect::<Result<Vec<_>>>()?;
    if r.pos != bytes.len() {
        return Err(Error::Format(format!(
            "{} trailing bytes after dataset",
            bytes.len() - r.pos
        )));
    }
    Ok(DatasetSplit {
        meta,
        train,
        test,
        ratio,
        seed,
    })
}

pub fn save_dataset(split: &DatasetSplit, path: &Path) -> Result<()> {
    fs::write(path, write_dataset(split))?;
    Ok(())
}

pub fn load_dataset(path: &Path) -> Result<DatasetSplit> {
    read_dataset(&fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::DatasetRecipe;

    fn small() -> DatasetSplit {
        let mut recipe = DatasetRecipe::new(ArrayGeometry::new(8, 28e9).unwrap(), 3, 20, 4);
        recipe.fspl_mode = FsplMode::PaperFspl;
        recipe.build().unwrap()
    }

    #[test]
    fn round_trip_is_exact() {
        let ds = small();
        let back = read_dataset(&write_dataset(&ds)).unwrap();
        assert_eq!(back, ds);
        let dir = std::env::temp_dir().join(format!("nfbeam-ds-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("d.bin");
        save_dataset(&ds, &path).unwrap();
        assert_eq!(load_dataset(&path).unwrap(), ds);
        std::fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn corrupt_and_truncated_files_fail() {
        let ds = small();
        let bytes = write_dataset(&ds);
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(matches!(read_dataset(&bad), Err(Error::Format(_))));
        let mut wrong_version = bytes.clone();
        wrong_version[8] = 99;
        assert!(matches!(read_dataset(&wrong_version), Err(Error::Format(_))));
        assert!(matches!(read_dataset(&bytes[..bytes.len() - 3]), Err(Error::Format(_))));
        let mut extra = bytes.clone();
        extra.push(0);
        assert!(read_dataset(&extra).is_err());
    }

    #[test]
    fn empty_split_round_trips() {
        let mut ds = small();
        ds.train.clear();
        ds.test.clear();
        let back = read_dataset(&write_dataset(&ds)).unwrap();
        assert!(back.is_empty());
        assert_eq!(back.meta, ds.meta);
    }
}
