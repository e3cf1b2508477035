//! Codebook-based beam training baselines.
//!
//! Every search scores candidates with the full multi-user rate (target
//! signal over interference plus noise) and counts each rate evaluation as
//! one pilot; `SearchResult::overhead` is that count.

use std::cmp::Ordering;

use crate::array::{achievable_rate, ArrayGeometry, ChannelVector, NoiseModel};
use crate::codebook::{
    build_far_field_codebook, build_polar_codebook, contract_span, refine_region, BeamLabel,
    Codebook, HierarchySpec, PolarGrid, Span,
};
use crate::error::{Error, Result};
use crate::weights::BeamWeights;

/// One target user, its co-scheduled interferers and the noise floor.
#[derive(Debug, Clone, Copy)]
pub struct Link<'a> {
    pub target: &'a ChannelVector,
    pub interferers: &'a [ChannelVector],
    pub noise: &'a NoiseModel,
}

impl<'a> Link<'a> {
    pub fn new(
        target: &'a ChannelVector,
        interferers: &'a [ChannelVector],
        noise: &'a NoiseModel,
    ) -> Self {
        Self {
            target,
            interferers,
            noise,
        }
    }

    pub fn rate(&self, w: &BeamWeights) -> Result<f64> {
        achievable_rate(w, self.target, self.interferers, self.noise)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchResult {
    pub weights: BeamWeights,
    pub label: BeamLabel,
    /// Achieved rate, bits/s/Hz.
    pub score: f64,
    /// Codewords evaluated.
    pub overhead: usize,
}

#[cfg(test)]
thread_local! {
    static RATE_CALLS: std::cell::Cell<usize> = const { std::cell::Cell::new(0) };
}

/// Rate evaluator that counts how often it is asked.
struct Scorer<'a> {
    link: Link<'a>,
    evaluations: usize,
}

impl<'a> Scorer<'a> {
    fn new(link: Link<'a>) -> Self {
        Self {
            link,
            evaluations: 0,
        }
    }

    fn score(&mut self, w: &BeamWeights) -> Result<f64> {
        self.evaluations += 1;
        #[cfg(test)]
        RATE_CALLS.with(|c| c.set(c.get() + 1));
        self.link.rate(w)
    }
}

#[derive(Debug, Clone, Copy)]
struct Candidate {
    index: usize,
    score: f64,
}

/// Higher score first, lower index on ties.
fn rank(a: &Candidate, b: &Candidate) -> Ordering {
    b.score
        .total_cmp(&a.score)
        .then_with(|| a.index.cmp(&b.index))
}

fn result_from(codebook: &Codebook, best: Candidate, overhead: usize) -> SearchResult {
    SearchResult {
        weights: codebook.codewords()[best.index].clone(),
        label: codebook.labels()[best.index],
        score: best.score,
        overhead,
    }
}

fn score_all(codebook: &Codebook, scorer: &mut Scorer<'_>) -> Result<Vec<Candidate>> {
    codebook
        .codewords()
        .iter()
        .enumerate()
        .map(|(index, w)| Ok(Candidate { index, score: scorer.score(w)? }))
        .collect()
}

/// Argmax of the rate over the codebook; ties go to the lowest index.
pub fn select_codeword(codebook: &Codebook, link: Link<'_>) -> Result<SearchResult> {
    if codebook.is_empty() {
        return Err(Error::Config("cannot select from an empty codebook".into()));
    }
    let mut scorer = Scorer::new(link);
    let scored = score_all(codebook, &mut scorer)?;
    let best = *scored.iter().min_by(|a, b| rank(a, b)).expect("non-empty");
    Ok(result_from(codebook, best, scorer.evaluations))
}

/// Shrinks `grid` until it fits `budget` codewords, aiming for a square
/// `⌊√budget⌋` grid and never exceeding the original per-axis counts.
pub fn budget_grid(grid: &PolarGrid, budget: usize) -> Result<PolarGrid> {
    if budget == 0 {
        return Err(Error::Config("search budget must be >= 1".into()));
    }
    if grid.len() <= budget {
        return Ok(grid.clone());
    }
    let side = (budget as f64).sqrt().floor() as usize;
    let side = (side..=side + 1).rev().find(|s| s * s <= budget).unwrap_or(1).max(1);
    let mut angles = grid.n_angles().min(side);
    let ranges = grid.n_ranges().min(budget / angles);
    angles = grid.n_angles().min(budget / ranges);
    grid.resampled(angles, ranges)
}

/// Polar exhaustive scan, optionally under a codeword budget.
pub fn exhaustive_search(
    geom: &ArrayGeometry,
    link: Link<'_>,
    grid: &PolarGrid,
    budget: Option<usize>,
) -> Result<SearchResult> {
    let grid = match budget {
        Some(b) => budget_grid(grid, b)?,
        None => grid.clone(),
    };
    let codebook = build_polar_codebook(geom, &grid)?;
    exhaustive_search_in(&codebook, link)
}

/// Exhaustive scan of a prebuilt polar codebook: the range loop is held
/// fixed while every angle is visited, then the next range.
pub fn exhaustive_search_in(codebook: &Codebook, link: Link<'_>) -> Result<SearchResult> {
    let grid = codebook
        .grid()
        .ok_or_else(|| Error::Config("exhaustive search needs a polar codebook".into()))?;
    if codebook.is_empty() {
        return Err(Error::Config("cannot search an empty codebook".into()));
    }
    let n_ranges = grid.n_ranges();
    let mut scorer = Scorer::new(link);
    let mut best: Option<Candidate> = None;
    for j in 0..n_ranges {
        for i in 0..grid.n_angles() {
            let index = i * n_ranges + j;
            let cand = Candidate {
                index,
                score: scorer.score(&codebook.codewords()[index])?,
            };
            if best.map_or(true, |b| rank(&cand, &b) == Ordering::Less) {
                best = Some(cand);
            }
        }
    }
    Ok(result_from(codebook, best.expect("non-empty"), scorer.evaluations))
}

/// Coarse-to-fine polar search. Level 1 covers `global`; each later level
/// samples a contracted window around the carried candidates.
pub fn nf_hierarchical_search(
    geom: &ArrayGeometry,
    link: Link<'_>,
    spec: &HierarchySpec,
    global: (Span, Span),
) -> Result<SearchResult> {
    spec.validate()?;
    let mut scorer = Scorer::new(link);
    let first = PolarGrid::sampled(
        global.0,
        spec.per_level_angles[0],
        spec.angle_sampling,
        global.1,
        spec.per_level_ranges[0],
        spec.range_sampling,
    )?;
    // (codebook, candidate) pairs carried into the next level
    let mut carried = keep_best(vec![build_polar_codebook(geom, &first)?], &mut scorer, spec.beam_width)?;
    for level in 1..spec.levels {
        let mut books = Vec::with_capacity(carried.len());
        for (book, cand) in &carried {
            let grid = book.grid().expect("polar");
            let current = (grid.angle_span(), grid.range_span());
            let label = book.labels()[cand.index];
            books.push(build_polar_codebook(
                geom,
                &refine_region(&label, level, spec, current, global)?,
            )?);
        }
        carried = keep_best(books, &mut scorer, spec.beam_width)?;
    }
    let (book, best) = &carried[0];
    Ok(result_from(book, *best, scorer.evaluations))
}

fn keep_best(
    books: Vec<Codebook>,
    scorer: &mut Scorer<'_>,
    width: usize,
) -> Result<Vec<(Codebook, Candidate)>> {
    let mut pooled: Vec<(usize, Candidate)> = Vec::new();
    let mut offset = 0;
    for (b, book) in books.iter().enumerate() {
        for cand in score_all(book, scorer)? {
            // pooled index keeps ties ordered across codebooks
            pooled.push((b, Candidate { index: offset + cand.index, score: cand.score }));
        }
        offset += book.len();
    }
    pooled.sort_by(|a, b| rank(&a.1, &b.1));
    let mut offsets = Vec::with_capacity(books.len());
    let mut acc = 0;
    for book in &books {
        offsets.push(acc);
        acc += book.len();
    }
    Ok(pooled
        .into_iter()
        .take(width)
        .map(|(b, c)| {
            (
                books[b].clone(),
                Candidate { index: c.index - offsets[b], score: c.score },
            )
        })
        .collect())
}

/// Angle-only hierarchical search over plane-wave beams.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FarFieldHierarchy {
    pub levels: usize,
    pub beams_per_level: usize,
    /// Angular window contraction per level; 2 is bisection.
    pub shrink_factor: f64,
}

impl Default for FarFieldHierarchy {
    fn default() -> Self {
        Self {
            levels: 4,
            beams_per_level: 8,
            shrink_factor: 2.0,
        }
    }
}

impl FarFieldHierarchy {
    pub fn total_codewords(&self) -> usize {
        self.levels * self.beams_per_level
    }
}

pub fn ff_hierarchical_search(
    geom: &ArrayGeometry,
    link: Link<'_>,
    angle_span: Span,
    hierarchy: &FarFieldHierarchy,
) -> Result<SearchResult> {
    if hierarchy.levels == 0 || hierarchy.beams_per_level == 0 {
        return Err(Error::Config("far-field hierarchy needs levels and beams >= 1".into()));
    }
    if !(hierarchy.shrink_factor > 1.0) {
        return Err(Error::Config("far-field shrink factor must exceed 1".into()));
    }
    let mut scorer = Scorer::new(link);
    let mut window = angle_span;
    let mut last = None;
    for _ in 0..hierarchy.levels {
        let book = build_far_field_codebook(geom, window, hierarchy.beams_per_level)?;
        let scored = score_all(&book, &mut scorer)?;
        let best = *scored.iter().min_by(|a, b| rank(a, b)).expect("non-empty");
        window = contract_span(
            book.labels()[best.index].angle_rad(),
            window,
            hierarchy.shrink_factor,
            angle_span,
        );
        last = Some((book, best));
    }
    let (book, best) = last.expect("levels >= 1");
    Ok(result_from(&book, best, scorer.evaluations))
}
