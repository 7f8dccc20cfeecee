//! L1-type distances between patches by scanline rasterization.
//!
//! The symmetric difference |A Δ B| equals the L1 distance of the two patch
//! vorticities. Both polygons are swept row by row on a uniform grid over
//! the joint bounding box (10% margin); within each row the even-odd
//! crossing intervals are exact in x, so only the y direction is sampled.
//! This keeps the estimate robust for near-tangent filamenting boundaries
//! where exact polygon clipping is fragile.

use std::f64::consts::PI;

use crate::geometry::{NodeContour, Vec2};

/// Default number of scan rows; error scales like O(perimeter * height / n).
pub const DEFAULT_GRID: usize = 2048;

/// Relative tolerance for the m-fold symmetry check.
pub const MFOLD_TOL: f64 = 1e-6;

fn row_crossings(c: &NodeContour, y: f64, out: &mut Vec<f64>) {
    out.clear();
    let nodes = c.nodes();
    let n = nodes.len();
    for i in 0..n {
        let p = nodes[i];
        let q = nodes[(i + 1) % n];
        // half-open rule makes the count watertight at shared vertices
        if (p.y <= y && q.y > y) || (q.y <= y && p.y > y) {
            out.push(p.x + (y - p.y) * (q.x - p.x) / (q.y - p.y));
        }
    }
    out.sort_by(|a, b| a.partial_cmp(b).unwrap());
}

/// Length of the symmetric difference of two unions of intervals given by
/// sorted even-odd crossing lists.
fn xor_length(a: &[f64], b: &[f64]) -> f64 {
    let mut ia = 0;
    let mut ib = 0;
    let mut inside_a = false;
    let mut inside_b = false;
    let mut last = f64::NAN;
    let mut acc = 0.0;
    while ia < a.len() || ib < b.len() {
        let xa = a.get(ia).copied().unwrap_or(f64::INFINITY);
        let xb = b.get(ib).copied().unwrap_or(f64::INFINITY);
        let x = xa.min(xb);
        if (inside_a != inside_b) && last.is_finite() {
            acc += x - last;
        }
        if xa <= xb {
            inside_a = !inside_a;
            ia += 1;
        } else {
            inside_b = !inside_b;
            ib += 1;
        }
        last = x;
    }
    acc
}

fn joint_bbox(a: &NodeContour, b: &NodeContour) -> (Vec2, Vec2) {
    let (alo, ahi) = a.bounding_box();
    let (blo, bhi) = b.bounding_box();
    let lo = Vec2::new(alo.x.min(blo.x), alo.y.min(blo.y));
    let hi = Vec2::new(ahi.x.max(bhi.x), ahi.y.max(bhi.y));
    let span = (hi.x - lo.x).max(hi.y - lo.y).max(1e-12);
    let margin = 0.10 * span;
    (
        Vec2::new(lo.x - margin, lo.y - margin),
        Vec2::new(hi.x + margin, hi.y + margin),
    )
}

/// |A Δ B| on `rows` scan rows.
pub fn symmetric_difference_area_on_grid(a: &NodeContour, b: &NodeContour, rows: usize) -> f64 {
    let (lo, hi) = joint_bbox(a, b);
    let dy = (hi.y - lo.y) / rows as f64;
    let mut xs_a = Vec::with_capacity(32);
    let mut xs_b = Vec::with_capacity(32);
    let mut acc = 0.0;
    for j in 0..rows {
        let y = lo.y + (j as f64 + 0.5) * dy;
        row_crossings(a, y, &mut xs_a);
        row_crossings(b, y, &mut xs_b);
        acc += xor_length(&xs_a, &xs_b);
    }
    acc * dy
}

/// |A Δ B| at the default resolution.
pub fn symmetric_difference_area(a: &NodeContour, b: &NodeContour) -> f64 {
    symmetric_difference_area_on_grid(a, b, DEFAULT_GRID)
}

/// Result of the rotational alignment search.
#[derive(Debug, Clone, Copy)]
pub struct MinRotation {
    /// inf over alpha of |A Δ R_alpha B|
    pub distance: f64,
    /// minimizing angle, in [-pi/m, pi/m)
    pub angle: f64,
    /// false when the refinement stopped on its iteration cap
    pub converged: bool,
}

/// Minimize |a Δ R_alpha(reference)| over the torus of rotations
/// [-pi/m, pi/m): coarse 64-angle scan, then golden-section refinement.
/// Ties within the rasterization floor break toward the smallest |alpha|.
pub fn min_rotation_distance_on_grid(
    a: &NodeContour,
    reference: &NodeContour,
    m: u32,
    rows: usize,
) -> MinRotation {
    assert!(m >= 1);
    let period = 2.0 * PI / m as f64;
    let half = period / 2.0;
    let eval = |alpha: f64| symmetric_difference_area_on_grid(a, &reference.rotated(alpha), rows);

    const COARSE: usize = 64;
    let mut best = (f64::INFINITY, 0.0);
    let mut evaluated: Vec<(f64, f64)> = Vec::with_capacity(COARSE + 64);
    for k in 0..COARSE {
        let alpha = -half + period * k as f64 / COARSE as f64;
        let d = eval(alpha);
        evaluated.push((alpha, d));
        if d < best.0 {
            best = (d, alpha);
        }
    }

    // golden-section around the coarse winner
    let step = period / COARSE as f64;
    let mut lo = best.1 - step;
    let mut hi = best.1 + step;
    let inv_phi = 0.618_033_988_749_894_9;
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let mut f1 = eval(x1);
    let mut f2 = eval(x2);
    evaluated.push((x1, f1));
    evaluated.push((x2, f2));
    let mut converged = false;
    for _ in 0..60 {
        if hi - lo < 1e-6 {
            converged = true;
            break;
        }
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = eval(x1);
            evaluated.push((x1, f1));
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = eval(x2);
            evaluated.push((x2, f2));
        }
    }
    for &(alpha, d) in &evaluated {
        if d < best.0 {
            best = (d, alpha);
        }
    }
    // flat objectives near the orbit: prefer the smallest |alpha| among ties
    let floor = 1e-6 * (1.0 + a.area().abs());
    for &(alpha, d) in &evaluated {
        if d <= best.0 + floor && alpha.abs() < best.1.abs() {
            best = (best.0.min(d), alpha);
        }
    }
    MinRotation {
        distance: best.0,
        angle: crate::geometry::torus_project(best.1, m),
        converged,
    }
}

/// Rotational alignment at the default grid resolution.
pub fn min_rotation_distance(a: &NodeContour, reference: &NodeContour, m: u32) -> MinRotation {
    min_rotation_distance_on_grid(a, reference, m, DEFAULT_GRID)
}

/// True when |A Δ R_{2pi/m} A| < tol * |A|.
pub fn check_m_fold_with(c: &NodeContour, m: u32, tol: f64, rows: usize) -> bool {
    assert!(m >= 2);
    let d = symmetric_difference_area_on_grid(c, &c.rotated(2.0 * PI / m as f64), rows);
    d < tol * c.area()
}

/// m-fold symmetry check at the default tolerance and resolution.
pub fn check_m_fold(c: &NodeContour, m: u32) -> bool {
    check_m_fold_with(c, m, MFOLD_TOL, DEFAULT_GRID)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::FourierBoundary;

    fn circle(r: f64, n: usize) -> NodeContour {
        FourierBoundary::new(r, 1, vec![]).unwrap().to_contour(n).unwrap()
    }

    #[test]
    fn identical_contours_have_zero_distance() {
        let c = circle(1.0, 512);
        assert_eq!(symmetric_difference_area(&c, &c), 0.0);
    }

    #[test]
    fn nested_discs_annulus_area() {
        let a = circle(1.0, 2048);
        let b = circle(1.1, 2048);
        let d = symmetric_difference_area(&a, &b);
        assert!((d - 0.21 * PI).abs() < 1e-3, "got {d}");
    }

    #[test]
    fn disjoint_discs_sum_of_areas() {
        let a = circle(1.0, 1024);
        let b = a.translated(Vec2::new(2.5, 0.0));
        let d = symmetric_difference_area(&a, &b);
        assert!((d - 2.0 * PI).abs() < 1e-3, "got {d}");
    }

    #[test]
    fn mfold_checks() {
        let disc = circle(1.0, 640);
        assert!(check_m_fold(&disc, 5));
        // node count divisible by m: the rotation maps nodes onto nodes and
        // the check resolves true symmetry at the 1e-6 tolerance
        let fb = FourierBoundary::new(2.0, 3, vec![1.0]).unwrap();
        let c = fb.to_contour(768).unwrap();
        assert!(check_m_fold(&c, 3));
        assert!(!check_m_fold(&c, 2));
    }

    #[test]
    fn min_rotation_identity() {
        let fb = FourierBoundary::new(1.0, 3, vec![0.05]).unwrap();
        let c = fb.to_contour(384).unwrap();
        let r = min_rotation_distance(&c, &c, 3);
        assert!(r.distance < 1e-9, "distance {}", r.distance);
        assert!(r.angle.abs() < 1e-6, "angle {}", r.angle);
    }

    #[test]
    fn min_rotation_recovers_angle() {
        let fb = FourierBoundary::new(1.0, 3, vec![0.05]).unwrap();
        let c = fb.to_contour(384).unwrap();
        let a = c.rotated(0.1);
        let r = min_rotation_distance(&a, &c, 3);
        assert!(r.distance < 5e-4, "distance {}", r.distance);
        assert!((r.angle - 0.1).abs() < 2e-3, "angle {}", r.angle);
    }
}
