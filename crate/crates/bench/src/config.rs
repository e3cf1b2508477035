//! Plain-text experiment configuration.
//!
//! One `key = value` pair per line; `#` starts a comment. Lists are comma
//! separated; a grid may also be written `start:step:stop` (inclusive).
//!
//! ```text
//! axis        = snr
//! grid        = -20:5:20
//! schemes     = learned, nf-hier, ff-hier, exhaustive-256, exhaustive-unlimited, matched-filter-bound
//! n_antennas  = 64
//! carrier_ghz = 50
//! fspl        = normalized
//! ```
//!
//! Every key is optional except `axis` and `grid`; see [`ExperimentConfig::default`].

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use nfbeam::array::FsplMode;

use crate::error::{BenchError, BenchResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Scheme {
    Learned,
    NfHier,
    FfHier,
    Exhaustive256,
    ExhaustiveUnlimited,
    MatchedFilterBound,
}

impl Scheme {
    pub const ALL: [Scheme; 6] = [
        Scheme::Learned,
        Scheme::NfHier,
        Scheme::FfHier,
        Scheme::Exhaustive256,
        Scheme::ExhaustiveUnlimited,
        Scheme::MatchedFilterBound,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Scheme::Learned => "learned",
            Scheme::NfHier => "nf-hier",
            Scheme::FfHier => "ff-hier",
            Scheme::Exhaustive256 => "exhaustive-256",
            Scheme::ExhaustiveUnlimited => "exhaustive-unlimited",
            Scheme::MatchedFilterBound => "matched-filter-bound",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Scheme {
    type Err = BenchError;
    fn from_str(s: &str) -> BenchResult<Self> {
        Scheme::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| BenchError::Config(format!("unknown scheme `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    /// dB
    Snr,
    /// GHz; N fixed, spacing λ/2 at each carrier, path loss on.
    Carrier,
    /// Metres; every user of a drop at this range.
    Distance,
    /// Degrees; every user of a drop at this angle.
    Angle,
    /// Element count; the learned scheme is retrained per value.
    Antennas,
}

impl Axis {
    pub fn as_str(self) -> &'static str {
        match self {
            Axis::Snr => "snr",
            Axis::Carrier => "carrier",
            Axis::Distance => "distance",
            Axis::Angle => "angle",
            Axis::Antennas => "antennas",
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Axis::Snr => "SNR (dB)",
            Axis::Carrier => "carrier (GHz)",
            Axis::Distance => "distance (m)",
            Axis::Angle => "angle (deg)",
            Axis::Antennas => "antennas",
        }
    }
}

impl FromStr for Axis {
    type Err = BenchError;
    fn from_str(s: &str) -> BenchResult<Self> {
        Ok(match s {
            "snr" => Axis::Snr,
            "carrier" => Axis::Carrier,
            "distance" => Axis::Distance,
            "angle" => Axis::Angle,
            "antennas" => Axis::Antennas,
            _ => return Err(BenchError::Config(format!("unknown axis `{s}`"))),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub axis: Axis,
    pub grid: Vec<f64>,
    pub schemes: Vec<Scheme>,
    pub n_antennas: usize,
    pub carrier_ghz: f64,
    /// Element spacing in metres; half a wavelength when absent.
    pub spacing_m: Option<f64>,
    pub fspl: FsplMode,
    /// Evaluation SNR for every axis except `snr`.
    pub snr_db: f64,
    pub users: usize,
    /// Training drops T.
    pub frames: usize,
    /// Evaluation drops per axis point.
    pub eval_frames: usize,
    pub seed: u64,
    pub reference_range_m: f64,
    pub codebook_angles: usize,
    pub codebook_ranges: usize,
    pub budget: usize,
    pub epochs: usize,
    /// Epochs when retraining for a geometry other than the base one.
    pub retrain_epochs: usize,
    pub lr: f64,
    pub batch_size: usize,
    pub tanh: bool,
    pub widths: [usize; 3],
    pub checkpoint: Option<PathBuf>,
    pub output: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            axis: Axis::Snr,
            grid: (-4..=4).map(|k| 5.0 * k as f64).collect(),
            schemes: Scheme::ALL.to_vec(),
            n_antennas: 64,
            carrier_ghz: 50.0,
            spacing_m: None,
            fspl: FsplMode::Normalized,
            snr_db: 10.0,
            users: 3,
            frames: 500,
            eval_frames: 100,
            seed: 1,
            reference_range_m: nfbeam::array::DEFAULT_REFERENCE_RANGE_M,
            codebook_angles: 121,
            codebook_ranges: 40,
            budget: 256,
            epochs: 200,
            retrain_epochs: 50,
            lr: 1e-2,
            batch_size: 256,
            tanh: true,
            widths: [1, 8, 16],
            checkpoint: None,
            output: PathBuf::from("out"),
        }
    }
}

fn parse<T: FromStr>(key: &str, v: &str) -> BenchResult<T> {
    v.parse()
        .map_err(|_| BenchError::Config(format!("bad value `{v}` for `{key}`")))
}

fn parse_grid(v: &str) -> BenchResult<Vec<f64>> {
    let parts: Vec<&str> = v.split(':').map(str::trim).collect();
    if parts.len() == 3 {
        let (start, step, stop): (f64, f64, f64) =
            (parse("grid", parts[0])?, parse("grid", parts[1])?, parse("grid", parts[2])?);
        if !(step > 0.0) || stop < start {
            return Err(BenchError::Config(format!("bad grid range `{v}`")));
        }
        let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
        return Ok((0..count).map(|i| start + step * i as f64).collect());
    }
    v.split(',').map(|s| parse("grid", s.trim())).collect()
}

fn parse_bool(key: &str, v: &str) -> BenchResult<bool> {
    match v {
        "true" | "yes" | "on" | "1" => Ok(true),
        "false" | "no" | "off" | "0" => Ok(false),
        _ => Err(BenchError::Config(format!("bad boolean `{v}` for `{key}`"))),
    }
}

impl ExperimentConfig {
    pub fn parse_str(text: &str) -> BenchResult<Self> {
        let mut cfg = Self::default();
        let mut seen_axis = false;
        let mut seen_grid = false;
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                BenchError::Config(format!("line {}: expected `key = value`", lineno + 1))
            })?;
            let (key, v) = (key.trim(), value.trim());
            match key {
                "axis" => {
                    cfg.axis = v.parse()?;
                    seen_axis = true;
                }
                "grid" => {
                    cfg.grid = parse_grid(v)?;
                    seen_grid = true;
                }
                "schemes" => {
                    cfg.schemes = v
                        .split(',')
                        .map(|s| s.trim())
                        .filter(|s| !s.is_empty())
                        .map(str::parse)
                        .collect::<BenchResult<_>>()?
                }
                "n_antennas" => cfg.n_antennas = parse(key, v)?,
                "carrier_ghz" => cfg.carrier_ghz = parse(key, v)?,
                "spacing_m" => cfg.spacing_m = Some(parse(key, v)?),
                "fspl" => {
                    cfg.fspl = v
                        .parse()
                        .map_err(|_| BenchError::Config(format!("bad fspl mode `{v}`")))?
                }
                "snr_db" => cfg.snr_db = parse(key, v)?,
                "users" => cfg.users = parse(key, v)?,
                "frames" => cfg.frames = parse(key, v)?,
                "eval_frames" => cfg.eval_frames = parse(key, v)?,
                "seed" => cfg.seed = parse(key, v)?,
                "reference_range_m" => cfg.reference_range_m = parse(key, v)?,
                "codebook_angles" => cfg.codebook_angles = parse(key, v)?,
                "codebook_ranges" => cfg.codebook_ranges = parse(key, v)?,
                "budget" => cfg.budget = parse(key, v)?,
                "epochs" => cfg.epochs = parse(key, v)?,
                "retrain_epochs" => cfg.retrain_epochs = parse(key, v)?,
                "lr" => cfg.lr = parse(key, v)?,
                "batch_size" => cfg.batch_size = parse(key, v)?,
                "tanh" => cfg.tanh = parse_bool(key, v)?,
                "widths" => {
                    let w: Vec<usize> = v
                        .split(',')
                        .map(|s| parse(key, s.trim()))
                        .collect::<BenchResult<_>>()?;
                    cfg.widths = w
                        .try_into()
                        .map_err(|_| BenchError::Config("widths needs three values".into()))?;
                }
                "checkpoint" => cfg.checkpoint = Some(PathBuf::from(v)),
                "output" => cfg.output = PathBuf::from(v),
                _ => return Err(BenchError::Config(format!("unknown key `{key}`"))),
            }
        }
        if !seen_axis || !seen_grid {
            return Err(BenchError::Config("`axis` and `grid` are required".into()));
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> BenchResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| BenchError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse_str(&text)
    }

    pub fn validate(&self) -> BenchResult<()> {
        let bad = |m: &str| Err(BenchError::Config(m.to_string()));
        if self.grid.is_empty() {
            return bad("axis grid is empty");
        }
        if self.grid.iter().any(|v| !v.is_finite()) || self.grid.windows(2).any(|w| w[0] >= w[1]) {
            return bad("axis grid must be finite and strictly increasing");
        }
        if self.schemes.is_empty() {
            return bad("no schemes selected");
        }
        let mut s = self.schemes.clone();
        s.sort();
        s.dedup();
        if s.len() != self.schemes.len() {
            return bad("duplicate scheme");
        }
        if self.users == 0 || self.frames == 0 || self.eval_frames == 0 {
            return bad("users, frames and eval_frames must be positive");
        }
        if self.budget == 0 || self.codebook_angles == 0 || self.codebook_ranges == 0 {
            return bad("codebook sizes must be positive");
        }
        if !(self.carrier_ghz > 0.0) {
            return bad("carrier must be positive");
        }
        match self.axis {
            Axis::Antennas if self.grid.iter().any(|v| v.fract() != 0.0 || *v < 8.0) => {
                return bad("antenna grid must hold integers >= 8")
            }
            Axis::Carrier if self.grid.iter().any(|v| *v <= 0.0) => {
                return bad("carrier grid must be positive")
            }
            Axis::Distance if self.grid.iter().any(|v| *v <= 0.0) => {
                return bad("distance grid must be positive")
            }
            Axis::Angle if self.grid.iter().any(|v| v.abs() >= 90.0) => {
                return bad("angle grid must lie inside (-90, 90) degrees")
            }
            _ => {}
        }
        Ok(())
    }

    /// Every setting as text, for the run manifest.
    pub fn to_pairs(&self) -> BTreeMap<&'static str, String> {
        let list = |v: &[String]| v.join(",");
        let mut m = BTreeMap::new();
        m.insert("axis", self.axis.as_str().to_string());
        m.insert("grid", list(&self.grid.iter().map(|g| g.to_string()).collect::<Vec<_>>()));
        m.insert(
            "schemes",
            list(&self.schemes.iter().map(|s| s.to_string()).collect::<Vec<_>>()),
        );
        m.insert("n_antennas", self.n_antennas.to_string());
        m.insert("carrier_ghz", self.carrier_ghz.to_string());
        if let Some(d) = self.spacing_m {
            m.insert("spacing_m", d.to_string());
        }
        m.insert("fspl", self.fspl.as_str().to_string());
        m.insert("snr_db", self.snr_db.to_string());
        m.insert("users", self.users.to_string());
        m.insert("frames", self.frames.to_string());
        m.insert("eval_frames", self.eval_frames.to_string());
        m.insert("seed", self.seed.to_string());
        m.insert("reference_range_m", self.reference_range_m.to_string());
        m.insert("codebook_angles", self.codebook_angles.to_string());
        m.insert("codebook_ranges", self.codebook_ranges.to_string());
        m.insert("budget", self.budget.to_string());
        m.insert("epochs", self.epochs.to_string());
        m.insert("retrain_epochs", self.retrain_epochs.to_string());
        m.insert("lr", self.lr.to_string());
        m.insert("batch_size", self.batch_size.to_string());
        m.insert("tanh", self.tanh.to_string());
        m.insert(
            "widths",
            list(&self.widths.iter().map(|w| w.to_string()).collect::<Vec<_>>()),
        );
        if let Some(c) = &self.checkpoint {
            m.insert("checkpoint", c.display().to_string());
        }
        m.insert("output", self.output.display().to_string());
        m
    }

    pub fn to_text(&self) -> String {
        self.to_pairs()
            .into_iter()
            .map(|(k, v)| format!("{k} = {v}\n"))
            .collect()
    }
}

/// Environment variable naming the directory relative outputs resolve against.
pub const OUTPUT_ROOT_ENV: &str = "NFBEAM_OUTPUT_ROOT";

pub fn resolve_output(path: &Path) -> PathBuf {
    if path.is_absolute() {
        return path.to_path_buf();
    }
    match std::env::var_os(OUTPUT_ROOT_ENV) {
        Some(root) => PathBuf::from(root).join(path),
        None => path.to_path_buf(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_documented_example() {
        let cfg = ExperimentConfig::parse_str(
            "# snr sweep\naxis = snr\ngrid = -20:5:20\nschemes = learned, exhaustive-256\nfspl = paper-fspl\n",
        )
        .unwrap();
        assert_eq!(cfg.grid.len(), 9);
        assert_eq!(cfg.grid[8], 20.0);
        assert_eq!(cfg.schemes, vec![Scheme::Learned, Scheme::Exhaustive256]);
        assert_eq!(cfg.fspl, FsplMode::PaperFspl);
    }

    #[test]
    fn round_trips_through_text() {
        let cfg = ExperimentConfig {
            axis: Axis::Distance,
            grid: vec![5.0, 10.0, 50.0],
            spacing_m: Some(0.003),
            checkpoint: Some("m.ckpt".into()),
            widths: [1, 4, 8],
            tanh: false,
            ..Default::default()
        };
        assert_eq!(ExperimentConfig::parse_str(&cfg.to_text()).unwrap(), cfg);
    }

    #[test]
    fn rejects_bad_configs() {
        for text in [
            "grid = 1,2",
            "axis = snr",
            "axis = snr\ngrid = 3,1",
            "axis = snr\ngrid = ",
            "axis = snr\ngrid = 1\nschemes = ",
            "axis = snr\ngrid = 1\nschemes = magic",
            "axis = snr\ngrid = 1\ncolour = red",
            "axis = antennas\ngrid = 4,8",
            "axis = snr\ngrid = 1\nwidths = 1,2",
            "axis = snr\ngrid = 1\nschemes = learned,learned",
        ] {
            assert!(ExperimentConfig::parse_str(text).is_err(), "{text}");
        }
    }
}
