mod common;

use std::f64::consts::{PI, TAU};

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use common::{brute_force, circle, convex_masks, mask_field, random_mask};

use curvreg::field::{
    boundary_curvature_integral, curvature_line_integral, curve_field, distance_transform, geodesic_deviation, gradient_hessian,
    isocontours, plane_curvature, ScalarField,
};
use curvreg::geom::point_in_polygon;
use curvreg::raster::Mask;
use curvreg::{Contour, Vec2};

#[test]
fn edt_matches_brute_force_exactly() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..60 {
        let m = random_mask(&mut rng);
        let f = distance_transform(&m).unwrap();
        let bf = brute_force(&m);
        for (k, (a, b)) in f.values.iter().zip(&bf).enumerate() {
            assert_eq!(a, b, "cell {k} of {}x{}", m.width, m.height);
        }
    }
}

#[test]
fn disk_field_curvature_at_offsets() {
    for r in [20.0, 40.0] {
        let c = Vec2::new(2.0 * r, 2.0 * r);
        let f = curve_field(&circle(256, r, c), Vec2::ZERO, Vec2::new(4.0 * r, 4.0 * r), 1.0).unwrap();
        for d in [1.0, r / 4.0, r / 2.0] {
            for k in 0..12 {
                let p = c + Vec2::new(r + d, 0.0).rotate(TAU * k as f64 / 12.0 + 0.1);
                let s = plane_curvature(&f, p).unwrap();
                let want = 1.0 / (r + d);
                assert!((s.curvature - want).abs() / want <= 0.05, "r={r} d={d}: {} vs {want}", s.curvature);
            }
        }
    }
}

#[test]
fn traced_disk_curvature_at_offsets() {
    let r = 40.0;
    let centre = Vec2::new(100.0, 100.0);
    let (c, f) = mask_field(&Mask::disk(200, 200, centre, r), 30.0);
    let rb = c.points().iter().map(|p| p.dist(centre)).sum::<f64>() / c.len() as f64;
    // raster ripples remain locally; their mean around the loop is the offset circle's
    for d in [1.0, 5.0, 10.0, 20.0] {
        let mean = (0..64).map(|k| plane_curvature(&f, centre + Vec2::new(rb + d, 0.0).rotate(TAU * k as f64 / 64.0)).unwrap().curvature).sum::<f64>() / 64.0;
        let want = 1.0 / (rb + d);
        assert!((mean - want).abs() / want <= 0.05, "d={d}: {mean} vs {want}");
    }
}

#[test]
fn gauss_bonnet_on_convex_masks() {
    for m in &convex_masks() {
        let (c, f) = mask_field(m, 10.0);
        let total = boundary_curvature_integral(&f, &c, 1.0).unwrap();
        assert!((total - TAU).abs() / TAU < 0.05, "{total}");
    }
}

#[test]
fn gradient_matches_richer_stencil() {
    let f = ScalarField::from_fn(64, 64, 1.0, Vec2::ZERO, |p| (0.11 * p.x).sin() * (0.07 * p.y).cos() * 20.0);
    let h = 1.0;
    for &(x, y) in &[(20.0, 30.0), (31.0, 12.0), (44.0, 50.0)] {
        let p = Vec2::new(x, y);
        let (g, _) = gradient_hessian(&f, p).unwrap();
        let v = |dx: f64, dy: f64| f.sample(p + Vec2::new(dx, dy)).unwrap();
        let gx5 = (-v(2.0 * h, 0.0) + 8.0 * v(h, 0.0) - 8.0 * v(-h, 0.0) + v(-2.0 * h, 0.0)) / (12.0 * h);
        let gy5 = (-v(0.0, 2.0 * h) + 8.0 * v(0.0, h) - 8.0 * v(0.0, -h) + v(0.0, -2.0 * h)) / (12.0 * h);
        // O(h²) truncation with third derivatives bounded by 20·0.11³
        assert!((g.x - gx5).abs() < 0.01 && (g.y - gy5).abs() < 0.01);
    }
}

#[test]
fn curvature_agrees_with_divergence_of_normal() {
    let c = Vec2::new(60.0, 60.0);
    let pts: Vec<Vec2> =
        (0..256).map(|i| TAU * i as f64 / 256.0).map(|t| c + Vec2::new(t.cos(), t.sin()) * (30.0 * (1.0 + 0.2 * (3.0 * t).cos()))).collect();
    let f = curve_field(&Contour::new("b", pts).unwrap(), Vec2::ZERO, Vec2::new(120.0, 120.0), 1.0).unwrap();
    let unit = |p: Vec2| {
        let (g, _) = gradient_hessian(&f, p).unwrap();
        g * (1.0 / g.norm())
    };
    let mut checked = 0;
    for k in 0..24 {
        let t = TAU * k as f64 / 24.0;
        let p = c + Vec2::new(t.cos(), t.sin()) * (30.0 * (1.0 + 0.2 * (3.0 * t).cos()) + 6.0);
        let s = plane_curvature(&f, p).unwrap();
        if !s.valid {
            continue;
        }
        let e = 1.0;
        let div = (unit(p + Vec2::new(e, 0.0)).x - unit(p - Vec2::new(e, 0.0)).x) / (2.0 * e)
            + (unit(p + Vec2::new(0.0, e)).y - unit(p - Vec2::new(0.0, e)).y) / (2.0 * e);
        assert!((div - s.curvature).abs() <= 0.1 * s.curvature.abs().max(0.01), "{div} vs {}", s.curvature);
        checked += 1;
    }
    assert!(checked > 12);
}

#[test]
fn boundary_integral_refines() {
    let c = Vec2::new(60.0, 60.0);
    let blob = |n: usize| {
        let pts = (0..n).map(|i| TAU * i as f64 / n as f64).map(|t| c + Vec2::new(t.cos(), t.sin()) * (28.0 * (1.0 + 0.15 * (2.0 * t).sin())));
        Contour::new("b", pts.collect()).unwrap()
    };
    let f = curve_field(&blob(256), Vec2::ZERO, Vec2::new(120.0, 120.0), 1.0).unwrap();
    let loops = isocontours(&f, 1.0);
    let outer = loops.iter().max_by(|a, b| a.len().cmp(&b.len())).unwrap();
    let coarse = curvature_line_integral(&f, outer).unwrap();
    let fine: Vec<Vec2> = Contour::new("iso", outer.clone()).unwrap().resample(4 * outer.len()).unwrap().points().to_vec();
    let refined = curvature_line_integral(&f, &fine).unwrap();
    assert!((coarse - refined).abs() / refined.abs() < 0.01, "{coarse} vs {refined}");
}

#[test]
fn geodesic_deviation_of_offset_circle() {
    let (r, k) = (25.0, 4.0);
    let c = Vec2::new(50.0, 50.0);
    let f = curve_field(&circle(256, r, c), Vec2::ZERO, Vec2::new(100.0, 100.0), 1.0).unwrap();
    let d = geodesic_deviation(&f, &circle(512, r + k, c)).unwrap();
    let want = k * TAU * (r + k);
    assert!((d - want).abs() / want < 0.03);
    assert!(geodesic_deviation(&f, &circle(256, r, c)).unwrap() < 0.5 * TAU * r);
    assert!(geodesic_deviation(&f, &circle(64, r, c + Vec2::new(200.0, 0.0))).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn field_sign_marks_inside(r in 10.0..30.0f64, k in 0.0..0.3f64, phase in 0.0..PI) {
        let c = Vec2::new(50.0, 50.0);
        let pts: Vec<Vec2> = (0..128)
            .map(|i| TAU * i as f64 / 128.0)
            .map(|t| c + Vec2::new(t.cos(), t.sin()) * (r * (1.0 + k * (3.0 * t + phase).cos())))
            .collect();
        let curve = Contour::new("p", pts).unwrap();
        let f = curve_field(&curve, Vec2::ZERO, Vec2::new(100.0, 100.0), 1.0).unwrap();
        let dense = curve.spline_densified(0.25);
        for j in (0..f.height).step_by(7) {
            for i in (0..f.width).step_by(7) {
                let v = f.at(i, j);
                if v.abs() > 0.5 {
                    prop_assert_eq!(v < 0.0, point_in_polygon(f.node(i, j), &dense));
                }
            }
        }
    }

    #[test]
    fn samples_are_finite_and_sum_identity_holds(x in 5.0..95.0f64, y in 5.0..95.0f64) {
        let f = curve_field(&circle(128, 20.0, Vec2::new(50.0, 50.0)), Vec2::ZERO, Vec2::new(100.0, 100.0), 1.0).unwrap();
        let s = plane_curvature(&f, Vec2::new(x, y)).unwrap();
        prop_assert!(s.curvature.is_finite() && s.mu2.is_finite());
        prop_assert!((s.mu2 - s.gradient.norm2()).abs() <= 1e-9 * s.mu2.max(1.0));
        if s.valid {
            prop_assert!((s.g_a + s.g_b + s.mu2).abs() <= 1e-9 * s.mu2);
        }
    }

    #[test]
    fn edt_property_small_masks(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = random_mask(&mut rng);
        let f = distance_transform(&m).unwrap();
        prop_assert_eq!(f.values, brute_force(&m));
    }
}
