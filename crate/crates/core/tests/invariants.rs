use nfbeam::array::{
    achievable_rate, matched_filter_bound, near_field_channel, near_field_steering, ArrayGeometry, FsplMode,
    NoiseModel, PolarLocation, DEFAULT_REFERENCE_RANGE_M,
};
use nfbeam::codebook::{build_polar_codebook, AngleSampling, HierarchySpec, PolarGrid, RangeSampling, Span};
use nfbeam::scenario::{complexify, read_dataset, realify, write_dataset, DatasetRecipe, UserSpans};
use nfbeam::search::{
    exhaustive_search, exhaustive_search_in, ff_hierarchical_search, nf_hierarchical_search, FarFieldHierarchy,
    Link,
};
use nfbeam::BeamWeights;
use proptest::prelude::*;

fn loc() -> impl Strategy<Value = PolarLocation> {
    (5.0f64..50.0, -1.0f64..1.0).prop_map(|(r, a)| PolarLocation::new(r, a).unwrap())
}

fn geom() -> impl Strategy<Value = ArrayGeometry> {
    (prop::sample::select(vec![8usize, 16, 32, 64]), prop::sample::select(vec![28e9, 50e9, 100e9]))
        .prop_map(|(n, f)| ArrayGeometry::new(n, f).unwrap())
}

fn spans() -> (Span, Span) {
    let s = UserSpans::default();
    (s.angle, s.range)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn steering_is_unit_modulus_with_unit_center(g in geom(), l in loc()) {
        let b = near_field_steering(&g, &l);
        prop_assert_eq!(b.len(), g.n_antennas());
        prop_assert!(b.iter().all(|c| (c.norm() - 1.0).abs() < 1e-12));
        let c = b[g.center_slot()];
        prop_assert!((c.re - 1.0).abs() < 1e-15 && c.im.abs() < 1e-15);
    }

    #[test]
    fn no_beam_beats_the_matched_filter(g in geom(), l in loc(), snr in -20.0f64..20.0, phases in prop::collection::vec(-1.0f64..1.0, 64)) {
        let h = near_field_channel(&g, &l, FsplMode::PaperFspl);
        let noise = NoiseModel::calibrated(snr, &g, FsplMode::PaperFspl, DEFAULT_REFERENCE_RANGE_M);
        let bound = matched_filter_bound(&h, &noise);
        let w = BeamWeights::from_phases(&phases[..g.n_antennas()]);
        prop_assert!(achievable_rate(&w, &h, &[], &noise).unwrap() <= bound * (1.0 + 1e-12));
        let mf = BeamWeights::matched_filter(&h.coefficients);
        prop_assert!((achievable_rate(&mf, &h, &[], &noise).unwrap() - bound).abs() <= 1e-12 * bound.max(1.0));
    }

    #[test]
    fn searches_respect_bound_and_global_phase(l in loc(), phi in -3.0f64..3.0) {
        let g = ArrayGeometry::new(32, 50e9).unwrap();
        let h = near_field_channel(&g, &l, FsplMode::Normalized);
        let noise = NoiseModel::calibrated(10.0, &g, FsplMode::Normalized, DEFAULT_REFERENCE_RANGE_M);
        let bound = matched_filter_bound(&h, &noise);
        let (a, r) = spans();
        let grid = PolarGrid::sampled(a, 24, AngleSampling::UniformSine, r, 6, RangeSampling::InverseUniform).unwrap();
        let link = Link::new(&h, &[], &noise);
        let ex = exhaustive_search(&g, link, &grid, None).unwrap();
        let nf = nf_hierarchical_search(&g, link, &HierarchySpec::default(), (a, r)).unwrap();
        let ff = ff_hierarchical_search(&g, link, a, &FarFieldHierarchy::default()).unwrap();
        for s in [&ex, &nf, &ff] {
            prop_assert!(s.score >= 0.0 && s.score <= bound * (1.0 + 1e-12));
        }
        prop_assert_eq!(ex.overhead, 144);
        prop_assert_eq!(nf.overhead, HierarchySpec::default().total_codewords());
        prop_assert_eq!(ff.overhead, 32);

        let rotated = h.rotated(phi);
        let ex2 = exhaustive_search(&g, Link::new(&rotated, &[], &noise), &grid, None).unwrap();
        prop_assert_eq!(ex.label, ex2.label);
    }

    #[test]
    fn realify_round_trips(g in geom(), l in loc()) {
        let h = near_field_channel(&g, &l, FsplMode::Normalized);
        let x = realify(&h.coefficients);
        prop_assert_eq!(x.len(), 2 * g.n_antennas());
        prop_assert_eq!(complexify(&x).unwrap(), h.coefficients);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn datasets_round_trip(users in 1usize..4, frames in 2usize..8, seed in 0u64..1000, paper in any::<bool>()) {
        let mut recipe = DatasetRecipe::new(ArrayGeometry::new(8, 50e9).unwrap(), users, frames, seed);
        if paper {
            recipe.fspl_mode = FsplMode::PaperFspl;
        }
        let split = recipe.build().unwrap();
        prop_assert_eq!(split.len(), users * frames);
        prop_assert!(split.train.iter().chain(&split.test).all(|s| s.interferer_channels.len() == users - 1));
        prop_assert_eq!(read_dataset(&write_dataset(&split)).unwrap(), split);
    }
}

#[test]
fn polar_codebook_matches_exhaustive_oracle() {
    let g = ArrayGeometry::new(64, 50e9).unwrap();
    let (a, r) = spans();
    let grid = PolarGrid::sampled(a, 15, AngleSampling::UniformSine, r, 5, RangeSampling::InverseUniform).unwrap();
    let book = build_polar_codebook(&g, &grid).unwrap();
    assert_eq!(book.len(), 75);
    assert!(book.codewords().iter().all(|w| w.max_modulus_error() < 1e-12));
    let noise = NoiseModel::calibrated(0.0, &g, FsplMode::Normalized, DEFAULT_REFERENCE_RANGE_M);
    let users = [
        PolarLocation::new(grid.ranges_m()[2], grid.angles_rad()[7]).unwrap(),
        PolarLocation::new(grid.ranges_m()[4], grid.angles_rad()[1]).unwrap(),
    ];
    let h: Vec<_> = users.iter().map(|u| near_field_channel(&g, u, FsplMode::Normalized)).collect();
    let link = Link::new(&h[0], &h[1..], &noise);
    let best = exhaustive_search_in(&book, link).unwrap();
    let brute = book
        .codewords()
        .iter()
        .map(|w| link.rate(w).unwrap())
        .fold(f64::NEG_INFINITY, f64::max);
    assert_eq!(best.score, brute);
    assert_eq!(best.overhead, 75);
}
