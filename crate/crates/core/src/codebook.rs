//! Polar-domain (angle × range) and far-field (angle only) codebooks, plus
//! the region refinement used by the hierarchical searches.
//!
//! A codeword for sampling point `(α, r)` is the steering vector `b(r, α)`
//! itself: the rate objective evaluates `wᴴh`, which already conjugates
//! `w`, so `b(r, α)ᴴ h` adds every element in phase when the user sits at
//! `(r, α)`.

use std::io::Write;

use crate::array::{far_field_steering, near_field_steering, ArrayGeometry, PolarLocation};
use crate::error::{Error, Result};
use crate::weights::BeamWeights;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Span {
    pub min: f64,
    pub max: f64,
}

impl Span {
    pub fn new(min: f64, max: f64) -> Result<Self> {
        if !(min <= max) || !min.is_finite() || !max.is_finite() {
            return Err(Error::Config(format!("invalid span [{min}, {max}]")));
        }
        Ok(Self { min, max })
    }

    pub fn width(&self) -> f64 {
        self.max - self.min
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.min && x <= self.max
    }

    pub fn center(&self) -> f64 {
        0.5 * (self.min + self.max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AngleSampling {
    /// Uniform in sin α.
    UniformSine,
    /// Uniform in α.
    Uniform,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RangeSampling {
    /// Uniform in 1/r.
    InverseUniform,
    /// Uniform in r.
    Uniform,
}

/// `count` points across `[lo, hi]` in the domain given by `fwd`/`inv`,
/// endpoints included; a single point lands on the domain midpoint.
fn sample_in(lo: f64, hi: f64, count: usize, fwd: impl Fn(f64) -> f64, inv: impl Fn(f64) -> f64) -> Vec<f64> {
    let (a, b) = (fwd(lo), fwd(hi));
    if count == 1 {
        return vec![inv(0.5 * (a + b)).clamp(lo, hi)];
    }
    let step = (b - a) / (count - 1) as f64;
    (0..count)
        .map(|i| {
            if i == 0 {
                lo
            } else if i == count - 1 {
                hi
            } else {
                inv(a + step * i as f64).clamp(lo, hi)
            }
        })
        .collect()
}

pub fn sample_angles(span: Span, count: usize, sampling: AngleSampling) -> Vec<f64> {
    match sampling {
        AngleSampling::UniformSine => sample_in(span.min, span.max, count, f64::sin, f64::asin),
        AngleSampling::Uniform => sample_in(span.min, span.max, count, |x| x, |x| x),
    }
}

pub fn sample_ranges(span: Span, count: usize, sampling: RangeSampling) -> Vec<f64> {
    match sampling {
        RangeSampling::InverseUniform => {
            let mut v = sample_in(span.min, span.max, count, |r| 1.0 / r, |u| 1.0 / u);
            v.sort_by(f64::total_cmp);
            v
        }
        RangeSampling::Uniform => sample_in(span.min, span.max, count, |x| x, |x| x),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolarGrid {
    angles_rad: Vec<f64>,
    ranges_m: Vec<f64>,
    angle_span: Span,
    range_span: Span,
    angle_sampling: AngleSampling,
    range_sampling: RangeSampling,
}

impl PolarGrid {
    pub fn sampled(
        angle_span: Span,
        n_angles: usize,
        angle_sampling: AngleSampling,
        range_span: Span,
        n_ranges: usize,
        range_sampling: RangeSampling,
    ) -> Result<Self> {
        if n_angles == 0 || n_ranges == 0 {
            return Err(Error::Config(format!(
                "grid needs at least one angle and one range, got {n_angles}x{n_ranges}"
            )));
        }
        Self::from_points(
            sample_angles(angle_span, n_angles, angle_sampling),
            sample_ranges(range_span, n_ranges, range_sampling),
            angle_span,
            range_span,
            angle_sampling,
            range_sampling,
        )
    }

    pub fn from_points(
        angles_rad: Vec<f64>,
        ranges_m: Vec<f64>,
        angle_span: Span,
        range_span: Span,
        angle_sampling: AngleSampling,
        range_sampling: RangeSampling,
    ) -> Result<Self> {
        if angles_rad.is_empty() || ranges_m.is_empty() {
            return Err(Error::Config("empty polar grid".into()));
        }
        let increasing = |v: &[f64]| v.windows(2).all(|w| w[0] < w[1]);
        if !increasing(&angles_rad) || !increasing(&ranges_m) {
            return Err(Error::Config("grid samples must be strictly increasing".into()));
        }
        if angles_rad.iter().any(|a| !angle_span.contains(*a))
            || angle_span.min < -std::f64::consts::FRAC_PI_2
            || angle_span.max > std::f64::consts::FRAC_PI_2
        {
            return Err(Error::Config("grid angle outside its span".into()));
        }
        if range_span.min <= 0.0 || ranges_m.iter().any(|r| !range_span.contains(*r)) {
            return Err(Error::Config("grid range outside its span or non-positive".into()));
        }
        Ok(Self {
            angles_rad,
            ranges_m,
            angle_span,
            range_span,
            angle_sampling,
            range_sampling,
        })
    }

    pub fn angles_rad(&self) -> &[f64] {
        &self.angles_rad
    }

    pub fn ranges_m(&self) -> &[f64] {
        &self.ranges_m
    }

    pub fn angle_span(&self) -> Span {
        self.angle_span
    }

    pub fn range_span(&self) -> Span {
        self.range_span
    }

    pub fn angle_sampling(&self) -> AngleSampling {
        self.angle_sampling
    }

    pub fn range_sampling(&self) -> RangeSampling {
        self.range_sampling
    }

    pub fn n_angles(&self) -> usize {
        self.angles_rad.len()
    }

    pub fn n_ranges(&self) -> usize {
        self.ranges_m.len()
    }

    pub fn len(&self) -> usize {
        self.n_angles() * self.n_ranges()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Same spans and sampling laws with new counts.
    pub fn resampled(&self, n_angles: usize, n_ranges: usize) -> Result<Self> {
        Self::sampled(
            self.angle_span,
            n_angles,
            self.angle_sampling,
            self.range_span,
            n_ranges,
            self.range_sampling,
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BeamLabel {
    Polar { angle_rad: f64, range_m: f64 },
    FarField { angle_rad: f64 },
}

impl BeamLabel {
    pub fn angle_rad(&self) -> f64 {
        match *self {
            BeamLabel::Polar { angle_rad, .. } | BeamLabel::FarField { angle_rad } => angle_rad,
        }
    }

    /// `None` for far-field beams.
    pub fn range_m(&self) -> Option<f64> {
        match *self {
            BeamLabel::Polar { range_m, .. } => Some(range_m),
            BeamLabel::FarField { .. } => None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Codebook {
    codewords: Vec<BeamWeights>,
    labels: Vec<BeamLabel>,
    geometry: ArrayGeometry,
    grid: Option<PolarGrid>,
}

impl Codebook {
    pub fn codewords(&self) -> &[BeamWeights] {
        &self.codewords
    }

    pub fn labels(&self) -> &[BeamLabel] {
        &self.labels
    }

    pub fn geometry(&self) -> &ArrayGeometry {
        &self.geometry
    }

    /// The polar grid this codebook was built from, if any.
    pub fn grid(&self) -> Option<&PolarGrid> {
        self.grid.as_ref()
    }

    pub fn len(&self) -> usize {
        self.codewords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.codewords.is_empty()
    }

    /// CSV dump: one row per codeword, `angle_rad,range_m,re_0..re_{N-1},im_0..im_{N-1}`.
    /// Far-field rows carry `inf` in the range column.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        let n = self.geometry.n_antennas();
        write!(out, "angle_rad,range_m")?;
        for k in 0..n {
            write!(out, ",re_{k}")?;
        }
        for k in 0..n {
            write!(out, ",im_{k}")?;
        }
        writeln!(out)?;
        for (w, label) in self.codewords.iter().zip(&self.labels) {
            let range = label.range_m().map_or("inf".to_string(), |r| format!("{r:e}"));
            write!(out, "{:e},{range}", label.angle_rad())?;
            for c in w.as_slice() {
                write!(out, ",{:e}", c.re)?;
            }
            for c in w.as_slice() {
                write!(out, ",{:e}", c.im)?;
            }
            writeln!(out)?;
        }
        Ok(())
    }
}

/// `I·J` codewords, angle-major: index `i·J + j` holds `b(α_i, r_j)`.
pub fn build_polar_codebook(geom: &ArrayGeometry, grid: &PolarGrid) -> Result<Codebook> {
    if grid.is_empty() {
        return Err(Error::Config("empty polar grid".into()));
    }
    let mut codewords = Vec::with_capacity(grid.len());
    let mut labels = Vec::with_capacity(grid.len());
    for &angle_rad in grid.angles_rad() {
        for &range_m in grid.ranges_m() {
            let loc = PolarLocation::new(range_m, angle_rad)?;
            codewords.push(BeamWeights::from_raw(near_field_steering(geom, &loc)));
            labels.push(BeamLabel::Polar { angle_rad, range_m });
        }
    }
    Ok(Codebook {
        codewords,
        labels,
        geometry: *geom,
        grid: Some(grid.clone()),
    })
}

/// Plane-wave beams sampled uniformly in sin α across `angle_span`.
pub fn build_far_field_codebook(
    geom: &ArrayGeometry,
    angle_span: Span,
    count: usize,
) -> Result<Codebook> {
    if count == 0 {
        return Err(Error::Config("far-field codebook needs at least one beam".into()));
    }
    let angles = sample_angles(angle_span, count, AngleSampling::UniformSine);
    let mut codewords = Vec::with_capacity(count);
    let mut labels = Vec::with_capacity(count);
    for angle_rad in angles {
        codewords.push(BeamWeights::from_raw(far_field_steering(geom, angle_rad)?));
        labels.push(BeamLabel::FarField { angle_rad });
    }
    Ok(Codebook {
        codewords,
        labels,
        geometry: *geom,
        grid: None,
    })
}

/// Per-level resolutions of a coarse-to-fine polar search.
#[derive(Debug, Clone, PartialEq)]
pub struct HierarchySpec {
    pub levels: usize,
    pub per_level_angles: Vec<usize>,
    pub per_level_ranges: Vec<usize>,
    pub shrink_factor: f64,
    /// Candidates carried from one level to the next.
    pub beam_width: usize,
    pub angle_sampling: AngleSampling,
    pub range_sampling: RangeSampling,
}

impl Default for HierarchySpec {
    fn default() -> Self {
        Self::uniform(3, 16, 4)
    }
}

impl HierarchySpec {
    pub fn uniform(levels: usize, angles: usize, ranges: usize) -> Self {
        Self {
            levels,
            per_level_angles: vec![angles; levels],
            per_level_ranges: vec![ranges; levels],
            shrink_factor: 2.0,
            beam_width: 1,
            angle_sampling: AngleSampling::UniformSine,
            range_sampling: RangeSampling::InverseUniform,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.levels == 0 {
            return Err(Error::Config("hierarchy needs at least one level".into()));
        }
        if self.per_level_angles.len() != self.levels || self.per_level_ranges.len() != self.levels {
            return Err(Error::Config("per-level counts must have one entry per level".into()));
        }
        if self.per_level_angles.iter().chain(&self.per_level_ranges).any(|&c| c == 0) {
            return Err(Error::Config("per-level counts must be >= 1".into()));
        }
        if !(self.shrink_factor > 1.0) {
            return Err(Error::Config(format!(
                "shrink factor must exceed 1, got {}",
                self.shrink_factor
            )));
        }
        if self.beam_width == 0 {
            return Err(Error::Config("beam width must be >= 1".into()));
        }
        Ok(())
    }

    /// Codewords evaluated over the whole hierarchy with beam width 1.
    pub fn total_codewords(&self) -> usize {
        self.per_level_angles
            .iter()
            .zip(&self.per_level_ranges)
            .map(|(i, j)| i * j)
            .sum()
    }
}

/// Window of width `current.width() / shrink` centred on `center`, shifted
/// back inside `global` when it would cross an edge.
pub fn contract_span(center: f64, current: Span, shrink: f64, global: Span) -> Span {
    let width = (current.width() / shrink).min(global.width());
    let mut lo = center - 0.5 * width;
    let mut hi = center + 0.5 * width;
    if lo < global.min {
        lo = global.min;
        hi = global.min + width;
    }
    if hi > global.max {
        hi = global.max;
        lo = global.max - width;
    }
    Span { min: lo, max: hi }
}

/// Grid for level `level + 1` (levels count from 1) around `parent`.
pub fn refine_region(
    parent: &BeamLabel,
    level: usize,
    spec: &HierarchySpec,
    current: (Span, Span),
    global: (Span, Span),
) -> Result<PolarGrid> {
    if level == 0 || level >= spec.levels {
        return Err(Error::Sequencing(format!(
            "cannot refine past level {level} of a {}-level hierarchy",
            spec.levels
        )));
    }
    let (cur_angle, cur_range) = current;
    let (global_angle, global_range) = global;
    let range = parent
        .range_m()
        .ok_or_else(|| Error::Config("polar refinement needs a polar parent label".into()))?;
    if !cur_angle.contains(parent.angle_rad()) || !cur_range.contains(range) {
        return Err(Error::Config("parent label outside current spans".into()));
    }
    let angle_span = contract_span(parent.angle_rad(), cur_angle, spec.shrink_factor, global_angle);
    let range_span = contract_span(range, cur_range, spec.shrink_factor, global_range);
    PolarGrid::sampled(
        angle_span,
        spec.per_level_angles[level],
        spec.angle_sampling,
        range_span,
        spec.per_level_ranges[level],
        spec.range_sampling,
    )
}
