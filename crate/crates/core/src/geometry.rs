//! Patch boundary representations and geometric measures.
//!
//! A patch is the set enclosed by a closed counterclockwise node chain with
//! vorticity 1 inside and 0 outside. Moments that admit a radial
//! antiderivative (area, angular impulse, complex moment) are reduced to
//! boundary integrals by the divergence theorem and evaluated edge by edge,
//! exactly where the integrand is polynomial.

use std::f64::consts::PI;

use anyhow::{ensure, Result};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::kernel::gauss_legendre;

/// Minimum admissible spacing between consecutive nodes.
pub const MIN_NODE_SPACING: f64 = 1e-12;

/// Plane vector / point.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn norm_sq(self) -> f64 {
        self.x * self.x + self.y * self.y
    }

    pub fn dot(self, other: Self) -> f64 {
        self.x * other.x + self.y * other.y
    }

    /// z-component of the 3D cross product.
    pub fn cross(self, other: Self) -> f64 {
        self.x * other.y - self.y * other.x
    }

    pub fn angle(self) -> f64 {
        self.y.atan2(self.x)
    }

    pub fn rotated(self, alpha: f64) -> Self {
        let (s, c) = alpha.sin_cos();
        Self::new(c * self.x - s * self.y, s * self.x + c * self.y)
    }

    pub fn from_polar(r: f64, theta: f64) -> Self {
        let (s, c) = theta.sin_cos();
        Self::new(r * c, r * s)
    }
}

impl std::ops::Add for Vec2 {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self::new(self.x + o.x, self.y + o.y)
    }
}

impl std::ops::Sub for Vec2 {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Self::new(self.x - o.x, self.y - o.y)
    }
}

impl std::ops::Mul<f64> for Vec2 {
    type Output = Self;
    fn mul(self, s: f64) -> Self {
        Self::new(self.x * s, self.y * s)
    }
}

impl std::ops::Neg for Vec2 {
    type Output = Self;
    fn neg(self) -> Self {
        Self::new(-self.x, -self.y)
    }
}

/// Closed patch boundary as an ordered counterclockwise node chain; node N-1
/// connects back to node 0.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeContour {
    nodes: Vec<Vec2>,
}

impl Serialize for NodeContour {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let pairs: Vec<[f64; 2]> = self.nodes.iter().map(|p| [p.x, p.y]).collect();
        pairs.serialize(s)
    }
}

impl<'de> Deserialize<'de> for NodeContour {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let pairs: Vec<[f64; 2]> = Vec::deserialize(d)?;
        let nodes = pairs.into_iter().map(|[x, y]| Vec2::new(x, y)).collect();
        NodeContour::new(nodes).map_err(serde::de::Error::custom)
    }
}

impl NodeContour {
    /// Validates orientation, node spacing and simplicity.
    pub fn new(nodes: Vec<Vec2>) -> Result<Self> {
        ensure!(
            nodes.len() >= 3,
            "invalid contour: need at least 3 nodes, got {}",
            nodes.len()
        );
        let n = nodes.len();
        for i in 0..n {
            let d = (nodes[(i + 1) % n] - nodes[i]).norm();
            ensure!(
                d > MIN_NODE_SPACING,
                "invalid contour: consecutive nodes {} and {} coincide (spacing {:.3e})",
                i,
                (i + 1) % n,
                d
            );
        }
        let c = Self { nodes };
        ensure!(
            c.area() > 0.0,
            "invalid contour: orientation must be counterclockwise (signed area {:.3e})",
            c.area()
        );
        ensure!(c.is_simple(), "invalid contour: boundary self-intersects");
        Ok(c)
    }

    /// Skips the O(N^2) simplicity check; used on the evolution hot path where
    /// near-self-intersection is monitored but not aborted on.
    pub(crate) fn from_nodes_unchecked(nodes: Vec<Vec2>) -> Self {
        debug_assert!(nodes.len() >= 3);
        Self { nodes }
    }

    pub fn nodes(&self) -> &[Vec2] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Signed polygon area (shoelace); positive for counterclockwise chains.
    pub fn area(&self) -> f64 {
        let n = self.nodes.len();
        let mut sum = 0.0;
        for i in 0..n {
            sum += self.nodes[i].cross(self.nodes[(i + 1) % n]);
        }
        0.5 * sum
    }

    /// Sum of segment lengths.
    pub fn perimeter(&self) -> f64 {
        let n = self.nodes.len();
        (0..n)
            .map(|i| (self.nodes[(i + 1) % n] - self.nodes[i]).norm())
            .sum()
    }

    /// Angular impulse of the enclosed patch, int |x|^2 dx, reduced to the
    /// boundary through the radial field |x|^2 x / 4 and integrated exactly
    /// per edge.
    pub fn angular_impulse(&self) -> f64 {
        let n = self.nodes.len();
        let mut sum = 0.0;
        for i in 0..n {
            let p = self.nodes[i];
            let q = self.nodes[(i + 1) % n];
            let d = q - p;
            // int_0^1 |p + t d|^2 dt
            let seg = p.norm_sq() + p.dot(d) + d.norm_sq() / 3.0;
            sum += p.cross(q) * seg;
        }
        0.25 * sum
    }

    /// Lowest angular moment int_A e^{i m theta} dx of the patch.
    ///
    /// The radial antiderivative turns it into 1/2 oint e^{i m theta} x^n ds;
    /// the cross factor is constant per straight edge, the phase factor is
    /// integrated by Gauss-Legendre with subdivision for edges that subtend a
    /// wide angle at the origin.
    pub fn complex_moment(&self, m: u32) -> Result<Complex64> {
        ensure!(m >= 1, "complex moment needs m >= 1; use area for m = 0");
        let n = self.nodes.len();
        let mut sum = Complex64::new(0.0, 0.0);
        for i in 0..n {
            let p = self.nodes[i];
            let q = self.nodes[(i + 1) % n];
            sum += edge_phase_integral(p, q, m) * (0.5 * p.cross(q));
        }
        Ok(sum)
    }

    /// Area centroid of the enclosed patch.
    pub fn centroid(&self) -> Vec2 {
        let n = self.nodes.len();
        let a = self.area();
        let mut cx = 0.0;
        let mut cy = 0.0;
        for i in 0..n {
            let p = self.nodes[i];
            let q = self.nodes[(i + 1) % n];
            let w = p.cross(q);
            cx += (p.x + q.x) * w;
            cy += (p.y + q.y) * w;
        }
        Vec2::new(cx / (6.0 * a), cy / (6.0 * a))
    }

    /// Counterclockwise rotation of the whole patch about the origin.
    pub fn rotated(&self, alpha: f64) -> Self {
        Self::from_nodes_unchecked(self.nodes.iter().map(|p| p.rotated(alpha)).collect())
    }

    pub fn translated(&self, d: Vec2) -> Self {
        Self::from_nodes_unchecked(self.nodes.iter().map(|&p| p + d).collect())
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self::from_nodes_unchecked(self.nodes.iter().map(|&p| p * s).collect())
    }

    pub fn bounding_box(&self) -> (Vec2, Vec2) {
        let mut lo = Vec2::new(f64::INFINITY, f64::INFINITY);
        let mut hi = Vec2::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
        for p in &self.nodes {
            lo.x = lo.x.min(p.x);
            lo.y = lo.y.min(p.y);
            hi.x = hi.x.max(p.x);
            hi.y = hi.y.max(p.y);
        }
        (lo, hi)
    }

    pub fn max_radius(&self) -> f64 {
        self.nodes.iter().map(|p| p.norm()).fold(0.0, f64::max)
    }

    /// Resample the band-limited closed curve through the nodes onto a
    /// finer uniform grid (trigonometric interpolation); returns a clone
    /// when no refinement is requested. Useful before rasterized set
    /// comparisons, where raw polygon slivers would dominate the error.
    pub fn resampled(&self, n_out: usize) -> Self {
        if n_out <= self.nodes.len() {
            return self.clone();
        }
        Self::from_nodes_unchecked(crate::kernel::trig_resample(&self.nodes, n_out))
    }

    /// O(N^2) segment-pair test with adjacency exclusion.
    pub fn is_simple(&self) -> bool {
        let n = self.nodes.len();
        for i in 0..n {
            let a0 = self.nodes[i];
            let a1 = self.nodes[(i + 1) % n];
            for j in (i + 2)..n {
                if i == 0 && j == n - 1 {
                    continue; // closing edge is adjacent to edge 0
                }
                let b0 = self.nodes[j];
                let b1 = self.nodes[(j + 1) % n];
                if segments_intersect(a0, a1, b0, b1) {
                    return false;
                }
            }
        }
        true
    }
}

fn orient(a: Vec2, b: Vec2, c: Vec2) -> f64 {
    (b - a).cross(c - a)
}

fn segments_intersect(a0: Vec2, a1: Vec2, b0: Vec2, b1: Vec2) -> bool {
    let d1 = orient(b0, b1, a0);
    let d2 = orient(b0, b1, a1);
    let d3 = orient(a0, a1, b0);
    let d4 = orient(a0, a1, b1);
    ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
        && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
}

/// int_0^1 e^{i m theta(p + t (q-p))} dt, subdividing wide-angle edges.
fn edge_phase_integral(p: Vec2, q: Vec2, m: u32) -> Complex64 {
    let subtended = {
        let tp = p.angle();
        let tq = q.angle();
        let mut d = (tq - tp).abs();
        if d > PI {
            d = 2.0 * PI - d;
        }
        d
    };
    if subtended * m as f64 > 0.4 {
        let mid = (p + q) * 0.5;
        if mid.norm() > MIN_NODE_SPACING {
            return (edge_phase_integral(p, mid, m) + edge_phase_integral(mid, q, m)) * 0.5;
        }
    }
    let mut acc = Complex64::new(0.0, 0.0);
    for &(t, w) in gauss_legendre(12) {
        let u = 0.5 * (t + 1.0);
        let z = p + (q - p) * u;
        let r = z.norm();
        if r > MIN_NODE_SPACING {
            let unit = Complex64::new(z.x / r, z.y / r);
            acc += unit.powu(m) * (0.5 * w);
        }
    }
    acc
}

/// Wrap an angle into the fundamental torus interval [-pi/m, pi/m);
/// the input and output differ by an integer multiple of 2 pi / m.
pub fn torus_project(alpha: f64, m: u32) -> f64 {
    assert!(m >= 1, "torus projection needs m >= 1");
    let period = 2.0 * PI / m as f64;
    let mut a = alpha.rem_euclid(period);
    if a >= period / 2.0 {
        a -= period;
    }
    a
}

/// Star-shaped boundary r(theta) = r0 + sum_k a_k cos(k m theta); exactly
/// m-fold symmetric by construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FourierBoundary {
    pub r0: f64,
    pub m: u32,
    pub coeffs: Vec<f64>,
}

impl FourierBoundary {
    pub fn new(r0: f64, m: u32, coeffs: Vec<f64>) -> Result<Self> {
        ensure!(m >= 1, "symmetry order must be >= 1, got {m}");
        ensure!(r0 > 0.0, "base radius must be positive, got {r0}");
        let fb = Self { r0, m, coeffs };
        ensure!(
            fb.min_radius() > 0.0,
            "boundary radius reaches {:.3e}: not star-shaped about the origin",
            fb.min_radius()
        );
        Ok(fb)
    }

    /// Deviation g(theta) from the base radius.
    pub fn g(&self, theta: f64) -> f64 {
        let mt = self.m as f64 * theta;
        self.coeffs
            .iter()
            .enumerate()
            .map(|(k, a)| a * ((k + 1) as f64 * mt).cos())
            .sum()
    }

    pub fn g_prime(&self, theta: f64) -> f64 {
        let mf = self.m as f64;
        let mt = mf * theta;
        self.coeffs
            .iter()
            .enumerate()
            .map(|(k, a)| {
                let km = (k + 1) as f64 * mf;
                -a * km * (km / mf * mt).sin()
            })
            .sum()
    }

    pub fn radius(&self, theta: f64) -> f64 {
        self.r0 + self.g(theta)
    }

    fn min_radius(&self) -> f64 {
        let samples = 64 * (self.m as usize) * (self.coeffs.len() + 1);
        (0..samples)
            .map(|j| self.radius(2.0 * PI * j as f64 / samples as f64))
            .fold(f64::INFINITY, f64::min)
    }

    /// Sample the boundary at N uniform angles into a node contour.
    pub fn to_contour(&self, n: usize) -> Result<NodeContour> {
        ensure!(n >= 16, "need at least 16 nodes, got {n}");
        let mut nodes = Vec::with_capacity(n);
        for j in 0..n {
            let theta = 2.0 * PI * j as f64 / n as f64;
            let r = self.radius(theta);
            ensure!(
                r > 0.0,
                "invalid boundary: radius {r:.3e} at theta = {theta:.6}"
            );
            nodes.push(Vec2::from_polar(r, theta));
        }
        NodeContour::new(nodes)
    }

    /// Recover cos(k m theta) coefficients from a contour sampled at uniform
    /// angles (the inverse of `to_contour`).
    pub fn fit(contour: &NodeContour, r0: f64, m: u32, k_max: usize) -> Result<Self> {
        let n = contour.len();
        let nodes = contour.nodes();
        for (j, p) in nodes.iter().enumerate() {
            let expect = 2.0 * PI * j as f64 / n as f64;
            let got = p.angle().rem_euclid(2.0 * PI);
            let diff = torus_project(got - expect, 1).abs();
            ensure!(
                diff < 1e-9,
                "node {j} is not on the uniform angular grid (off by {diff:.2e} rad)"
            );
        }
        let mut coeffs = vec![0.0; k_max];
        for (k, c) in coeffs.iter_mut().enumerate() {
            let freq = (k + 1) as f64 * m as f64;
            let mut acc = 0.0;
            for (j, p) in nodes.iter().enumerate() {
                let theta = 2.0 * PI * j as f64 / n as f64;
                acc += (p.norm() - r0) * (freq * theta).cos();
            }
            *c = 2.0 * acc / n as f64;
        }
        Self::new(r0, m, coeffs)
    }
}

/// Snapshot of the conserved and monitored quantities of one patch.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Diagnostics {
    pub area: f64,
    pub impulse: f64,
    pub energy: f64,
    pub perimeter: f64,
    pub moment_re: f64,
    pub moment_im: f64,
    pub centroid: Vec2,
}

impl Diagnostics {
    pub fn moment(&self) -> Complex64 {
        Complex64::new(self.moment_re, self.moment_im)
    }
}
