//! Uniform linear array geometry, spherical-wavefront channels and the
//! SINR / achievable-rate objective every other module evaluates against.
//!
//! The array lies on the y-axis with element `n` at `(0, n·d)` for
//! `n ∈ {−N/2, …, N/2 − 1}`. A user at polar location `(r, α)` sits at
//! `(r cos α, r sin α)`.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{dim_err, Error, Result};
use crate::weights::BeamWeights;

/// Propagation speed used throughout, m/s.
pub const SPEED_OF_LIGHT: f64 = 2.998e8;

/// Far/near-field boundary `2 D² f_c / C`.
pub fn rayleigh_distance(aperture_m: f64, carrier_hz: f64) -> Result<f64> {
    if !(carrier_hz > 0.0) || !carrier_hz.is_finite() {
        return Err(Error::Domain(format!("carrier must be positive, got {carrier_hz}")));
    }
    if !(aperture_m >= 0.0) {
        return Err(Error::Domain(format!("aperture must be non-negative, got {aperture_m}")));
    }
    Ok(2.0 * aperture_m * aperture_m * carrier_hz / SPEED_OF_LIGHT)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArrayGeometry {
    n_antennas: usize,
    carrier_hz: f64,
    spacing_m: f64,
}

impl ArrayGeometry {
    /// Half-wavelength ULA.
    pub fn new(n_antennas: usize, carrier_hz: f64) -> Result<Self> {
        if !(carrier_hz > 0.0) || !carrier_hz.is_finite() {
            return Err(Error::Domain(format!("carrier must be positive, got {carrier_hz}")));
        }
        Self::with_spacing(n_antennas, carrier_hz, SPEED_OF_LIGHT / carrier_hz / 2.0)
    }

    pub fn with_spacing(n_antennas: usize, carrier_hz: f64, spacing_m: f64) -> Result<Self> {
        if n_antennas < 2 || n_antennas % 2 != 0 {
            return Err(Error::Config(format!(
                "antenna count must be even and >= 2, got {n_antennas}"
            )));
        }
        if !(carrier_hz > 0.0) || !carrier_hz.is_finite() {
            return Err(Error::Domain(format!("carrier must be positive, got {carrier_hz}")));
        }
        if !(spacing_m > 0.0) || !spacing_m.is_finite() {
            return Err(Error::Domain(format!("spacing must be positive, got {spacing_m}")));
        }
        Ok(Self {
            n_antennas,
            carrier_hz,
            spacing_m,
        })
    }

    pub fn n_antennas(&self) -> usize {
        self.n_antennas
    }

    pub fn carrier_hz(&self) -> f64 {
        self.carrier_hz
    }

    pub fn spacing_m(&self) -> f64 {
        self.spacing_m
    }

    pub fn wavelength_m(&self) -> f64 {
        SPEED_OF_LIGHT / self.carrier_hz
    }

    /// `2π f_c / C`, rad/m.
    pub fn wavenumber(&self) -> f64 {
        2.0 * PI * self.carrier_hz / SPEED_OF_LIGHT
    }

    pub fn aperture_m(&self) -> f64 {
        (self.n_antennas as f64 - 1.0) * self.spacing_m
    }

    pub fn rayleigh_distance_m(&self) -> f64 {
        2.0 * self.aperture_m().powi(2) * self.carrier_hz / SPEED_OF_LIGHT
    }

    pub fn min_index(&self) -> i64 {
        -(self.n_antennas as i64 / 2)
    }

    pub fn max_index(&self) -> i64 {
        self.n_antennas as i64 / 2 - 1
    }

    /// Element indices in storage order, `−N/2 ..= N/2 − 1`.
    pub fn indices(&self) -> impl Iterator<Item = i64> {
        self.min_index()..=self.max_index()
    }

    /// Storage slot of the reference element `n = 0`.
    pub fn center_slot(&self) -> usize {
        self.n_antennas / 2
    }

    pub fn element_position(&self, n: i64) -> Result<(f64, f64)> {
        self.check_index(n)?;
        Ok((0.0, n as f64 * self.spacing_m))
    }

    fn check_index(&self, n: i64) -> Result<()> {
        if n < self.min_index() || n > self.max_index() {
            return Err(Error::Index {
                index: n,
                lo: self.min_index(),
                hi: self.max_index(),
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolarLocation {
    range_m: f64,
    angle_rad: f64,
}

impl PolarLocation {
    pub fn new(range_m: f64, angle_rad: f64) -> Result<Self> {
        if !(range_m > 0.0) || !range_m.is_finite() {
            return Err(Error::Domain(format!("range must be positive, got {range_m}")));
        }
        if !(-PI / 2.0..=PI / 2.0).contains(&angle_rad) {
            return Err(Error::Domain(format!(
                "angle must lie in [-pi/2, pi/2], got {angle_rad}"
            )));
        }
        Ok(Self { range_m, angle_rad })
    }

    pub fn range_m(&self) -> f64 {
        self.range_m
    }

    pub fn angle_rad(&self) -> f64 {
        self.angle_rad
    }

    pub fn cartesian(&self) -> (f64, f64) {
        (
            self.range_m * self.angle_rad.cos(),
            self.range_m * self.angle_rad.sin(),
        )
    }
}

/// How the common amplitude coefficient β is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FsplMode {
    /// β = 1.
    Normalized,
    /// β = (λ / 4πr)², evaluated at the user range for every element.
    PaperFspl,
}

impl FsplMode {
    pub fn beta(self, geom: &ArrayGeometry, range_m: f64) -> f64 {
        match self {
            FsplMode::Normalized => 1.0,
            FsplMode::PaperFspl => (geom.wavelength_m() / (4.0 * PI * range_m)).powi(2),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            FsplMode::Normalized => "normalized",
            FsplMode::PaperFspl => "paper-fspl",
        }
    }

    pub fn code(self) -> u8 {
        match self {
            FsplMode::Normalized => 0,
            FsplMode::PaperFspl => 1,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(FsplMode::Normalized),
            1 => Some(FsplMode::PaperFspl),
            _ => None,
        }
    }
}

impl std::str::FromStr for FsplMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "normalized" | "none" | "off" => Ok(FsplMode::Normalized),
            "paper-fspl" | "fspl" | "on" => Ok(FsplMode::PaperFspl),
            other => Err(Error::Config(format!("unknown fspl mode `{other}`"))),
        }
    }
}

/// Distance from the user to element `n`, `√(r² + n²d² − 2rnd sin α)`.
pub fn element_distance(geom: &ArrayGeometry, loc: &PolarLocation, n: i64) -> Result<f64> {
    geom.check_index(n)?;
    Ok(distance_unchecked(geom, loc, n))
}

fn distance_unchecked(geom: &ArrayGeometry, loc: &PolarLocation, n: i64) -> f64 {
    let r = loc.range_m;
    let nd = n as f64 * geom.spacing_m;
    (r * r + nd * nd - 2.0 * r * nd * loc.angle_rad.sin())
        .max(0.0)
        .sqrt()
}

/// `r_n − r` computed without cancellation at large `r`.
fn path_difference(geom: &ArrayGeometry, loc: &PolarLocation, n: i64) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let r = loc.range_m;
    let nd = n as f64 * geom.spacing_m;
    let rn = distance_unchecked(geom, loc, n);
    (nd * nd - 2.0 * r * nd * loc.angle_rad.sin()) / (rn + r)
}

/// Spherical-wavefront steering vector, entry `n` = `e^{−jM(r_n − r)}`.
pub fn near_field_steering(geom: &ArrayGeometry, loc: &PolarLocation) -> Vec<Complex64> {
    let m = geom.wavenumber();
    geom.indices()
        .map(|n| Complex64::from_polar(1.0, -m * path_difference(geom, loc, n)))
        .collect()
}

/// Plane-wave steering vector, entry `n` = `e^{jMnd sin α}`.
pub fn far_field_steering(geom: &ArrayGeometry, angle_rad: f64) -> Result<Vec<Complex64>> {
    if !(-PI / 2.0..=PI / 2.0).contains(&angle_rad) {
        return Err(Error::Domain(format!(
            "angle must lie in [-pi/2, pi/2], got {angle_rad}"
        )));
    }
    let step = geom.wavenumber() * geom.spacing_m * angle_rad.sin();
    Ok(geom
        .indices()
        .map(|n| Complex64::from_polar(1.0, step * n as f64))
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelVector {
    pub coefficients: Vec<Complex64>,
    pub location: PolarLocation,
    pub fspl_mode: FsplMode,
    pub beta: f64,
}

impl ChannelVector {
    pub fn len(&self) -> usize {
        self.coefficients.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coefficients.is_empty()
    }

    /// Sum of coefficient moduli; the largest `|wᴴh|` any unit-modulus `w` can reach.
    pub fn modulus_sum(&self) -> f64 {
        self.coefficients.iter().map(|c| c.norm()).sum()
    }

    /// Copy with every coefficient multiplied by `e^{jφ}`.
    pub fn rotated(&self, phi: f64) -> Self {
        let rot = Complex64::from_polar(1.0, phi);
        Self {
            coefficients: self.coefficients.iter().map(|c| c * rot).collect(),
            ..self.clone()
        }
    }
}

pub fn near_field_channel(
    geom: &ArrayGeometry,
    loc: &PolarLocation,
    fspl_mode: FsplMode,
) -> ChannelVector {
    let beta = fspl_mode.beta(geom, loc.range_m);
    let coefficients = near_field_steering(geom, loc)
        .into_iter()
        .map(|b| b * beta)
        .collect();
    ChannelVector {
        coefficients,
        location: *loc,
        fspl_mode,
        beta,
    }
}

/// Default calibration distance: the nearest sampled user range.
pub const DEFAULT_REFERENCE_RANGE_M: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseModel {
    pub snr_db: f64,
    pub sigma2: f64,
    pub reference_range_m: f64,
    pub tx_power: f64,
}

impl NoiseModel {
    /// Noise calibrated so that a matched-filter link at `reference_range_m`
    /// sees exactly `snr_db`.
    pub fn calibrated(
        snr_db: f64,
        geom: &ArrayGeometry,
        fspl_mode: FsplMode,
        reference_range_m: f64,
    ) -> Self {
        Self {
            snr_db,
            sigma2: noise_power(snr_db, geom, fspl_mode, reference_range_m),
            reference_range_m,
            tx_power: 1.0,
        }
    }
}

/// `σ² = β(r_ref)² · N² · 10^(−snr/10)`.
pub fn noise_power(snr_db: f64, geom: &ArrayGeometry, fspl_mode: FsplMode, r_ref: f64) -> f64 {
    noise_power_for(snr_db, geom.n_antennas(), fspl_mode.beta(geom, r_ref))
}

pub fn noise_power_for(snr_db: f64, n_antennas: usize, beta_ref: f64) -> f64 {
    let n = n_antennas as f64;
    beta_ref * beta_ref * n * n * 10f64.powf(-snr_db / 10.0)
}

/// `wᴴh = Σ conj(w_n) h_n`.
pub fn inner(w: &[Complex64], h: &[Complex64]) -> Complex64 {
    w.iter().zip(h).map(|(a, b)| a.conj() * b).sum()
}

fn check_len(w: &BeamWeights, h: &ChannelVector) -> Result<()> {
    if w.len() != h.len() {
        return Err(dim_err(w.len(), h.len()));
    }
    Ok(())
}

pub fn sinr(
    w: &BeamWeights,
    target: &ChannelVector,
    interferers: &[ChannelVector],
    noise: &NoiseModel,
) -> Result<f64> {
    check_len(w, target)?;
    let signal = noise.tx_power * inner(w.as_slice(), &target.coefficients).norm_sqr();
    let mut interference = 0.0;
    for h in interferers {
        check_len(w, h)?;
        interference += inner(w.as_slice(), &h.coefficients).norm_sqr();
    }
    Ok(signal / (interference + noise.sigma2))
}

/// `log2(1 + SINR)`, bits/s/Hz.
pub fn achievable_rate(
    w: &BeamWeights,
    target: &ChannelVector,
    interferers: &[ChannelVector],
    noise: &NoiseModel,
) -> Result<f64> {
    Ok(rate_from_sinr(sinr(w, target, interferers, noise)?))
}

pub fn rate_from_sinr(sinr: f64) -> f64 {
    (1.0 + sinr).log2()
}

/// Interference-free rate of the phase-conjugate beam; no unit-modulus beam exceeds it.
pub fn matched_filter_bound(target: &ChannelVector, noise: &NoiseModel) -> f64 {
    let gain = target.modulus_sum();
    rate_from_sinr(noise.tx_power * gain * gain / noise.sigma2)
}

/// `√G·wᴴh·s + n` with `n ~ CN(0, σ²)`.
pub fn received_signal<R: Rng + ?Sized>(
    w: &BeamWeights,
    target: &ChannelVector,
    noise: &NoiseModel,
    symbol: Complex64,
    rng: &mut R,
) -> Result<Complex64> {
    check_len(w, target)?;
    if (symbol.norm() - 1.0).abs() > 1e-9 {
        return Err(Error::Domain(format!("symbol must have unit modulus, got {}", symbol.norm())));
    }
    let clean = noise.tx_power.sqrt() * inner(w.as_slice(), &target.coefficients) * symbol;
    if noise.sigma2 == 0.0 {
        return Ok(clean);
    }
    let std = (noise.sigma2 / 2.0).sqrt();
    let normal = Normal::new(0.0, std).map_err(|e| Error::Numeric(e.to_string()))?;
    Ok(clean + Complex64::new(normal.sample(rng), normal.sample(rng)))
}
