//! SVG overlay of a registration: the fixed reference, the moving curve at its starting
//! placement, and the fitted curve.

use std::fmt::Write;

use crate::contour::Contour;
use crate::geom::Vec2;

fn path(c: &Contour, style: &str) -> String {
    let mut d = String::new();
    for (i, p) in c.points().iter().enumerate() {
        let _ = write!(d, "{}{:.3},{:.3} ", if i == 0 { "M" } else { "L" }, p.x, p.y);
    }
    format!("  <path d=\"{}Z\" {style}/>\n", d)
}

pub fn overlay(reference: &Contour, initial: &Contour, fitted: &Contour) -> String {
    let (mut lo, mut hi) = reference.bounds();
    for c in [initial, fitted] {
        let (l, h) = c.bounds();
        lo = Vec2::new(lo.x.min(l.x), lo.y.min(l.y));
        hi = Vec2::new(hi.x.max(h.x), hi.y.max(h.y));
    }
    let pad = 0.05 * (hi.x - lo.x).max(hi.y - lo.y) + 2.0;
    let (x, y, w, h) = (lo.x - pad, lo.y - pad, hi.x - lo.x + 2.0 * pad, hi.y - lo.y + 2.0 * pad);
    let stroke = 0.004 * w.max(h);
    let mut s = format!("<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"{x:.3} {y:.3} {w:.3} {h:.3}\">\n");
    s += &path(reference, &format!("fill=\"none\" stroke=\"black\" stroke-width=\"{stroke:.3}\""));
    s += &path(initial, &format!("fill=\"none\" stroke=\"gray\" stroke-dasharray=\"{0:.3} {0:.3}\" stroke-width=\"{stroke:.3}\"", 3.0 * stroke));
    s += &path(fitted, &format!("fill=\"none\" stroke=\"crimson\" stroke-width=\"{stroke:.3}\""));
    s += "</svg>\n";
    s
}
