#![allow(dead_code)]
//! Oracles shared by the module tests and the acceptance run.

use std::f64::consts::{PI, TAU};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use curvreg::contour::contour_from_mask;
use curvreg::corpus::TRACE_SIGMA;
use curvreg::field::{curve_field, plane_curvature, ScalarField};
use curvreg::geom::point_in_polygon;
use curvreg::raster::Mask;
use curvreg::register::{scale_objective, Reference, RegisterOptions};
use curvreg::{Contour, Vec2};

pub fn brute_force(mask: &Mask) -> Vec<f64> {
    let fg: Vec<(usize, usize)> =
        (0..mask.height).flat_map(|j| (0..mask.width).map(move |i| (i, j))).filter(|&(i, j)| mask.get(i, j)).collect();
    let mut out = Vec::with_capacity(mask.width * mask.height);
    for j in 0..mask.height {
        for i in 0..mask.width {
            let d2 = fg
                .iter()
                .map(|&(x, y)| (x as i64 - i as i64).pow(2) + (y as i64 - j as i64).pow(2))
                .min()
                .unwrap();
            out.push((d2 as f64).sqrt());
        }
    }
    out
}

pub fn random_mask(rng: &mut ChaCha8Rng) -> Mask {
    let (w, h) = (rng.random_range(3..=64), rng.random_range(3..=64));
    let density = rng.random_range(0.001..0.3);
    let mut m = Mask::new(w, h);
    for j in 0..h {
        for i in 0..w {
            m.set(i, j, rng.random_bool(density));
        }
    }
    if m.count() == 0 {
        m.set(rng.random_range(0..w), rng.random_range(0..h), true);
    }
    m
}

pub fn circle(n: usize, r: f64, c: Vec2) -> Contour {
    Contour::new("circle", (0..n).map(|i| c + Vec2::new(r, 0.0).rotate(TAU * i as f64 / n as f64)).collect()).unwrap()
}

/// Field of the smoothed traced boundary of a mask, padded by `pad` cells.
pub fn mask_field(m: &Mask, pad: f64) -> (Contour, ScalarField) {
    let c = contour_from_mask(m, TRACE_SIGMA, 256).unwrap();
    let (lo, hi) = c.bounds();
    let f = curve_field(&c, lo - Vec2::new(pad, pad), hi + Vec2::new(pad, pad), 1.0).unwrap();
    (c, f)
}

pub fn blob(n: usize, c: Vec2, r: f64, k: f64) -> Contour {
    let pts = (0..n)
        .map(|i| {
            let t = TAU * i as f64 / n as f64;
            let rr = r * (1.0 + k * (0.25 * (2.0 * t).cos() + 0.12 * (3.0 * t + 1.0).sin() + 0.05 * (5.0 * t).cos()));
            c + Vec2::new(t.cos(), t.sin()) * rr
        })
        .collect();
    Contour::new("blob", pts).unwrap()
}

/// Argmin of the Stage-I objective over a 0.01 grid.
pub fn scale_grid_search(reference: &Reference, c2: &Contour, opts: &RegisterOptions, a: (f64, f64), b: (f64, f64)) -> (f64, f64) {
    let mut f = scale_objective(reference, c2, opts);
    let steps = |(lo, hi): (f64, f64)| ((hi - lo) / 0.01).round() as usize;
    let mut best = (f64::INFINITY, 0.0, 0.0);
    for i in 0..=steps(a) {
        for j in 0..=steps(b) {
            let (x, y) = (a.0 + 0.01 * i as f64, b.0 + 0.01 * j as f64);
            let v = f(&[x, y]);
            if v < best.0 {
                best = (v, x, y);
            }
        }
    }
    (best.1, best.2)
}

pub fn shaped(n: usize, c: Vec2, r: f64, k: f64, phase: f64) -> Contour {
    let pts = (0..n)
        .map(|i| {
            let t = TAU * i as f64 / n as f64;
            let rr = r * (1.0 + k * (0.25 * (2.0 * t + phase).cos() + 0.12 * (3.0 * t + 1.0).sin() + 0.05 * (5.0 * t).cos()));
            c + Vec2::new(t.cos(), t.sin()) * rr
        })
        .collect();
    Contour::new("shaped", pts).unwrap()
}

/// Argmins of the pixel sums of |C| and C² over the symmetric difference, for 21
/// translations of each Γ₂ family along x and y.
pub fn area_form_argmins() -> Vec<(usize, usize)> {
    let c = Vec2::new(64.0, 64.0);
    let c1 = shaped(128, c, 24.0, 1.0, 0.0);
    let field = curve_field(&c1, Vec2::ZERO, Vec2::new(127.0, 127.0), 1.0).unwrap();
    let reg1 = c1.spline_densified(0.25);
    let mut curv = Vec::with_capacity(field.width * field.height);
    for j in 0..field.height {
        for i in 0..field.width {
            curv.push(match plane_curvature(&field, field.node(i, j)) {
                Ok(s) if s.valid => Some(s.curvature),
                _ => None,
            });
        }
    }
    let ellipse = (0..128).map(|i| TAU * i as f64 / 128.0).map(|t| Vec2::new(60.0 + 28.0 * t.cos(), 66.0 + 20.0 * t.sin())).collect();
    let families = [
        c1.scaled(1.12, 0.9, c).unwrap(),
        c1.scaled(1.1, 1.1, c).unwrap(),
        c1.scaled(0.9, 0.9, c).unwrap(),
        c1.rotated(0.17, c),
        shaped(128, c, 24.0, 1.0, 0.5),
        shaped(128, c, 24.0, 0.7, 0.0),
        Contour::new("ellipse", ellipse).unwrap(),
    ];
    let argmin = |v: &[f64]| v.iter().enumerate().min_by(|a, b| a.1.total_cmp(b.1)).unwrap().0;
    let mut out = Vec::new();
    for c2 in &families {
        for axis in [Vec2::new(1.0, 0.0), Vec2::new(0.0, 1.0)] {
            let (mut abs_form, mut sq_form) = (Vec::new(), Vec::new());
            for k in 0..21 {
                let moved = c2.translated(axis * (k as f64 - 10.0 + 0.3));
                let (mut s1, mut s2) = (0.0, 0.0);
                for j in 0..field.height {
                    for i in 0..field.width {
                        let p = field.node(i, j);
                        if point_in_polygon(p, &reg1) != point_in_polygon(p, moved.points()) {
                            if let Some(v) = curv[j * field.width + i] {
                                s1 += v.abs();
                                s2 += v * v;
                            }
                        }
                    }
                }
                abs_form.push(s1);
                sq_form.push(s2);
            }
            out.push((argmin(&abs_form), argmin(&sq_form)));
        }
    }
    out
}

pub fn q(num: i64, den: i64) -> BigRational {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

pub fn f(r: &BigRational) -> f64 {
    r.to_f64().unwrap()
}

/// Exact Welch statistics from rational (mean, sd, n) pairs: t² and the Satterthwaite dof.
pub fn welch_exact(m1: &BigRational, s1: &BigRational, n1: i64, m2: &BigRational, s2: &BigRational, n2: i64) -> (BigRational, BigRational) {
    let v1 = s1 * s1 / q(n1, 1);
    let v2 = s2 * s2 / q(n2, 1);
    let d = m1 - m2;
    let t2 = &d * &d / (&v1 + &v2);
    let nu = (&v1 + &v2) * (&v1 + &v2) / (&v1 * &v1 / q(n1 - 1, 1) + &v2 * &v2 / q(n2 - 1, 1));
    (t2, nu)
}

/// Γ((ν+1)/2)/Γ(ν/2) as rational·√π^±1, via r(ν+2) = r(ν)·(ν+1)/ν.
pub fn gamma_ratio(dof: u64) -> f64 {
    let mut r = BigRational::one();
    let mut nu = if dof % 2 == 1 { 1 } else { 2 };
    while nu < dof {
        r *= q(nu as i64 + 1, nu as i64);
        nu += 2;
    }
    if dof % 2 == 1 {
        f(&r) / PI.sqrt()
    } else {
        f(&r) * PI.sqrt() / 2.0
    }
}

/// Density with the kernel (1 + t²/ν)^−(ν+1)/2 raised exactly when t is rational.
pub fn pdf_oracle(t: &BigRational, dof: u64) -> f64 {
    let base = BigRational::one() + t * t / q(dof as i64, 1);
    let kernel = if dof % 2 == 1 {
        1.0 / f(&num_traits::pow(base, (dof as usize + 1) / 2))
    } else {
        let p = num_traits::pow(base.clone(), dof as usize / 2);
        1.0 / (f(&p) * f(&base).sqrt())
    };
    gamma_ratio(dof) / (dof as f64 * PI).sqrt() * kernel
}

/// 2∫_t^∞ pdf by composite Simpson after x = t + u/(1−u), u ∈ [0, 1).
pub fn tail_oracle(t: f64, dof: u64) -> f64 {
    let nu = dof as f64;
    let c = gamma_ratio(dof) / (nu * PI).sqrt();
    let n = 40_000;
    let h = 1.0 / n as f64;
    let g = |u: f64| {
        if u >= 1.0 {
            // the transformed Cauchy integrand tends to c·ν; heavier decay gives 0
            return if dof == 1 { c * nu } else { 0.0 };
        }
        let x = t.abs() + u / (1.0 - u);
        c * (1.0 + x * x / nu).powf(-0.5 * (nu + 1.0)) / ((1.0 - u) * (1.0 - u))
    };
    let mut s = g(0.0) + g(1.0);
    for k in 1..n {
        s += if k % 2 == 1 { 4.0 } else { 2.0 } * g(k as f64 * h);
    }
    2.0 * s * h / 3.0
}

pub const DOFS: [u64; 10] = [1, 2, 3, 5, 8, 13, 20, 50, 100, 198];
pub const TS: [(i64, i64); 10] = [(0, 1), (1, 10), (1, 2), (1, 1), (3, 2), (2, 1), (3, 1), (4, 1), (6, 1), (10, 1)];

/// 100 rational summaries on a deterministic lattice.
pub fn welch_grid() -> Vec<(BigRational, BigRational, i64, BigRational, BigRational, i64)> {
    let mut out = Vec::new();
    for k in 0..100i64 {
        let m1 = q(k * 7 % 23 - 11, 4);
        let m2 = q(k * 5 % 17 - 8, 3);
        let s1 = q(1 + k % 9, 2 + k % 5);
        let s2 = q(1 + (k * 3) % 11, 3);
        let n1 = 2 + (k * 13) % 60;
        let n2 = 2 + (k * 29) % 150;
        out.push((m1, s1, n1, m2, s2, n2));
    }
    out
}


/// Disk, square and a random convex 7-gon.
pub fn convex_masks() -> Vec<Mask> {
    let mut masks = vec![Mask::disk(120, 120, Vec2::new(60.0, 60.0), 30.0)];
    let mut sq = Mask::new(100, 100);
    for j in 30..70 {
        for i in 30..70 {
            sq.set(i, j, true);
        }
    }
    masks.push(sq);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut angles: Vec<f64> = (0..7).map(|_| rng.random_range(0.0..TAU)).collect();
    angles.sort_by(f64::total_cmp);
    let poly: Vec<Vec2> = angles.iter().map(|&t| Vec2::new(60.0, 60.0) + Vec2::new(35.0, 0.0).rotate(t)).collect();
    masks.push(Mask::from_polygon(120, 120, &poly));
    masks
}
