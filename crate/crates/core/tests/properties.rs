//! Randomised invariants: monotone shortening, the composition lemmas on
//! seeded instances, and the sampled shortening family.

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::sync::Arc;

use geoloop_core::homotopy::{lemma_path_homotopy, lemma_sphere_contraction};
use geoloop_core::theorem_a::partial_shortening;
use geoloop_core::*;

fn sphere() -> Arc<ManifoldModel> {
    ManifoldModel::unit_sphere().shared()
}

const NORTH: [f64; 3] = [0.0, 0.0, 1.0];

/// A random point within `r` (chart units) of `center` after projection.
fn near(m: &ManifoldModel, rng: &mut ChaCha8Rng, center: &[f64; 3], r: f64) -> Point {
    let x: Vec<f64> = center.iter().map(|c| c + rng.gen_range(-r..r)).collect();
    m.project(&x)
}

/// A random broken geodesic from `p` to `q` through `k` intermediate points.
fn random_path(m: &Arc<ManifoldModel>, rng: &mut ChaCha8Rng, p: &Point, q: &Point, k: usize) -> Arc<PLCurve> {
    let mut way = vec![p.clone()];
    for _ in 0..k {
        way.push(near(m, rng, &[0.35, 0.2, 0.9], 0.45));
    }
    way.push(q.clone());
    Arc::new(PLCurve::from_waypoints(m.clone(), &way).unwrap())
}

fn waypoints() -> impl Strategy<Value = Vec<(f64, f64)>> {
    prop::collection::vec((-0.7f64..0.7, -0.7f64..0.7), 2..7)
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 200, ..ProptestConfig::default() })]

    #[test]
    fn based_shortening_is_monotone_and_keeps_the_base(w in waypoints()) {
        let m = sphere();
        let p = m.project(&NORTH);
        let mut way = vec![p.clone()];
        way.extend(w.iter().map(|&(x, y)| m.project(&[x, y, 1.0])));
        way.push(p.clone());
        let c = PLCurve::from_waypoints(m, &way).unwrap();
        let t = shorten_based_loop(&LoopAt::new(c.clone()).unwrap(), &BirkhoffConfig::default()).unwrap();
        prop_assert!(t.is_monotone());
        let lens = t.stage_lengths();
        prop_assert!(lens.windows(2).all(|x| x[1] <= x[0] + 1e-12));
        prop_assert!(t.limit().length() <= c.length() + 1e-12);
        prop_assert_eq!(t.limit().start(), &p);
        prop_assert_eq!(t.limit().end(), &p);
    }

    #[test]
    fn free_shortening_never_lengthens(w in waypoints()) {
        let m = ManifoldModel::flat_torus(&[1.0, 1.0]).unwrap().shared();
        let mut cover = vec![vec![0.2, 0.3]];
        cover.extend(w.iter().map(|&(x, y)| vec![0.2 + x, 0.3 + y]));
        cover.push(vec![1.2, 0.3]);
        let c = PLCurve::from_cover_polyline(m, &cover).unwrap();
        let t = shorten_free_loop(&c, &BirkhoffConfig::free()).unwrap();
        prop_assert!(t.is_monotone());
        // class (1, 0): nothing shorter than the systole
        prop_assert!(t.limit().length() >= 1.0 - 1e-9);
    }
}

#[test]
fn path_lemma_on_50_seeded_instances() {
    let m = sphere();
    let mut r = Remeasurer::new();
    for seed in 0..50u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = near(&m, &mut rng, &NORTH, 0.2);
        let q = near(&m, &mut rng, &[0.8, 0.3, 0.5], 0.2);
        let (k1, k2) = (rng.gen_range(1..4), rng.gen_range(0..3));
        let g1 = random_path(&m, &mut rng, &p, &q, k1);
        let g2 = random_path(&m, &mut rng, &p, &q, k2);
        let lp = g1.concat(&g2.reverse()).unwrap();
        let t = shorten_based_loop(&LoopAt::new(lp).unwrap(), &BirkhoffConfig::default()).unwrap();
        let h = LengthHomotopy::from_trace(&t);
        let slack = 1e-9;
        let out = lemma_path_homotopy(&Frame::of(&g1), &Frame::of(&g2), &h, slack).unwrap();
        let bound = h.certified_bound + g2.length();
        assert!(out.remeasure_max(&mut r) <= bound + slack, "seed {seed}");
        assert!(out.endpoints_fixed(), "seed {seed}");
        assert_eq!(out.first().start(), p);
        assert_eq!(out.first().end(), q);
        assert_eq!(out.last().end(), q);
        // ends on the shortened loop followed by g2
        let tail = out.last().length() - g2.length();
        assert!((tail - t.limit().length()).abs() <= 1e-9, "seed {seed}");
    }
}

#[test]
fn circle_lemma_on_20_seeded_instances() {
    let m = sphere();
    let mut r = Remeasurer::new();
    for seed in 100..120u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = m.project(&NORTH);
        let q = near(&m, &mut rng, &[0.5, 0.2, 0.85], 0.15);
        let n = rng.gen_range(3..7);
        let paths: Vec<Arc<PLCurve>> = (0..n)
            .map(|_| {
                let k = rng.gen_range(0..3);
                random_path(&m, &mut rng, &p, &q, k)
            })
            .collect();
        let frames: Vec<Frame> = paths.iter().map(Frame::of).collect();
        let x0 = rng.gen_range(0..n);
        // every loop stays in the northern hemisphere, where coning to the
        // pole does not lengthen it
        let fh: Vec<LengthHomotopy> = paths
            .iter()
            .map(|f| {
                let lp = Arc::new(f.concat(&paths[x0].reverse()).unwrap());
                LengthHomotopy::cone_contraction(&lp, &p, 24).unwrap()
            })
            .collect();
        let slack = 1e-9;
        let out = lemma_sphere_contraction(&frames, x0, &fh, slack).unwrap();
        let big_l = paths.iter().map(|c| c.length()).fold(0.0, f64::max);
        let l = paths[x0].length();
        for (i, h) in out.iter().enumerate() {
            assert!(h.remeasure_max(&mut r) <= big_l + 2.0 * l + slack, "seed {seed} node {i}");
            assert!(h.endpoints_fixed());
            assert_eq!(h.first().end(), q);
        }
    }
}

fn wiggle(seed: u64, len: f64) -> Arc<PLCurve> {
    let m = sphere();
    let p = m.project(&[0.6, 0.0, 0.8]);
    Arc::new(generators::random_wiggle(&m, &p, len, seed).unwrap())
}

#[test]
fn sampled_family_keeps_prefix_and_tail_together() {
    for seed in [1u64, 2, 3] {
        let alpha = wiggle(seed, 6.0);
        let pr = ShorteningParams::new(0.1, std::f64::consts::PI, 0.05).unwrap();
        let out = shorten_curve(&alpha, &pr).unwrap();
        let fam = &out.family;
        let smp = fam.sample();
        assert!(smp.tau.windows(2).all(|w| w[1] >= w[0]), "seed {seed}");
        assert!(smp.s.windows(2).all(|w| w[1] >= w[0]));
        let mut r = Remeasurer::new();
        for (f, &tau) in smp.frames.iter().zip(&smp.tau) {
            // γ_s ends on α at τ(s) and starts at p
            assert_eq!(f.start(), *alpha.start());
            let e = f.end();
            assert!(geoloop_core::point::dist_euclid(&e, &alpha.point_at(tau)) <= 1e-9);
            let full = fam.with_tail(f, tau);
            assert_eq!(full.end(), *alpha.end());
            assert!(r.frame_len(&full) <= alpha.length() + 2.0 * pr.a + pr.o1_slack());
        }
        assert!(fam.check_invariants().all(), "seed {seed}");
    }
}

#[test]
fn partial_shortening_runs_from_alpha_to_the_final_curve() {
    let alpha = wiggle(5, 5.0);
    let pr = ShorteningParams::new(0.1, std::f64::consts::PI, 0.05).unwrap();
    let out = shorten_curve(&alpha, &pr).unwrap();
    let start = partial_shortening(&out.family, &alpha, 0.0).unwrap();
    assert!((start.length() - alpha.length()).abs() <= 1e-9);
    let mid = partial_shortening(&out.family, &alpha, 0.5).unwrap();
    assert_eq!(mid.start(), alpha.start());
    assert_eq!(mid.end(), alpha.end());
    assert!(mid.remeasure() <= alpha.length() + 2.0 * pr.a + pr.o1_slack());
    let end = partial_shortening(&out.family, &alpha, 1.0).unwrap();
    assert!((end.remeasure() - out.final_curve.remeasure()).abs() <= 1e-9);
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 8, ..ProptestConfig::default() })]

    #[test]
    fn minimax_stage_maxima_never_increase(nodes in 4usize..24) {
        let m = sphere();
        let fam = generators::meridian_sweep(&m, nodes, 0.25).unwrap();
        let r = minimax_geodesic(&fam).unwrap();
        prop_assert!(r.stage_max.windows(2).all(|w| w[1] <= w[0]));
        prop_assert!(r.minimax_length <= r.stage_max[0] + 1e-12);
        prop_assert!(r.bound.pass);
    }
}
