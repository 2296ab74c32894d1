mod common;

use nnperc::pointproc::Point;
use nnperc::tiles::geometry::{lens_geometry, scan_geometry, LensGeometry, RegionId};
use nnperc::tiles::region_membership;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn doubling_the_angle_count_moves_no_verdict() {
    let coarse = lens_geometry();
    let fine = LensGeometry::new(8192).unwrap();
    let mut probes: Vec<Point> = RegionId::ALL.iter().map(|r| r.reference_center()).collect();
    probes.extend([Point::new(0.0, 0.0), Point::new(12.0, 0.0), Point::new(2.0, 0.0), Point::new(2.0, 1.5)]);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    probes.extend((0..100_000).map(|_| Point::new(rng.random_range(-6.0..6.0), rng.random_range(-6.0..6.0))));
    let moved = probes
        .iter()
        .filter(|&&q| RegionId::ALL.iter().any(|&r| coarse.contains(q, r) != fine.contains(q, r)))
        .count();
    assert_eq!(moved, 0);
}

#[test]
fn interior_margins_never_beat_the_boundary() {
    let geom = lens_geometry();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    // The margin is 2-Lipschitz in p, so the discretized boundary minimum
    // can exceed the true one by at most 2 * (half the angular spacing).
    let disc_err = 2.0 * std::f64::consts::PI / geom.angles() as f64;
    let mut violations = 0;
    for _ in 0..100_000 {
        let q = (rng.random_range(-1.0..6.0), rng.random_range(-4.0..4.0));
        let cx = if rng.random_bool(0.5) { 0.0 } else { 4.0 };
        let r = rng.random::<f64>().sqrt();
        let th = rng.random_range(0.0..std::f64::consts::TAU);
        let p = (cx + r * th.cos(), r * th.sin());
        let m = common::margin(q, p);
        // Exact form of the concavity argument: along any chord through p,
        // the margin at p is at least the smaller endpoint margin.
        let phi = rng.random_range(0.0..std::f64::consts::PI);
        let (dx, dy) = (phi.cos(), phi.sin());
        let (ox, oy) = (p.0 - cx, p.1);
        let b = ox * dx + oy * dy;
        let c = ox * ox + oy * oy - 1.0;
        let disc = (b * b - c).sqrt();
        let ends = [-b - disc, -b + disc].map(|t| common::margin(q, (p.0 + t * dx, p.1 + t * dy)));
        if m < ends[0].min(ends[1]) - 1e-12 {
            violations += 1;
        }
        if m < geom.min_margin(Point::new(q.0, q.1)) - disc_err {
            violations += 1;
        }
    }
    assert_eq!(violations, 0);
}

#[test]
fn scans_pass_at_two_resolutions() {
    let g = lens_geometry();
    let a = scan_geometry(g, 400);
    let b = scan_geometry(g, 800);
    assert!(a.passed(), "{a:?}");
    assert!(b.passed(), "{b:?}");
}

#[test]
fn lens_stays_in_its_quarter_and_tile() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..200_000 {
        let q = Point::new(rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0));
        if region_membership(q, RegionId::Er, 1.0).unwrap() {
            assert!(q.x > q.y.abs());
            assert!(q.x.hypot(q.y) > 1.0 && (q.x - 4.0).hypot(q.y) > 1.0);
        }
    }
}
