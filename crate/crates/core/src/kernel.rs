//! Shared quadrature machinery: Gauss-Legendre nodes, the spectrally
//! accurate product rule for the periodic log kernel, and trigonometric
//! differentiation of uniformly sampled closed curves.
//!
//! The log-kernel rule integrates ln|2 sin((t-s)/2)| against trigonometric
//! polynomials exactly, using the Fourier series
//! ln|2 sin(u/2)| = -sum_k cos(k u)/k. Everything here assumes an even
//! number of uniform samples on [0, 2pi).

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

use crate::geometry::{NodeContour, Vec2};

fn gl_cache() -> &'static Mutex<HashMap<usize, &'static [(f64, f64)]>> {
    static CACHE: OnceLock<Mutex<HashMap<usize, &'static [(f64, f64)]>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

/// Gauss-Legendre nodes and weights on [-1, 1], cached per order.
pub(crate) fn gauss_legendre(n: usize) -> &'static [(f64, f64)] {
    assert!(n >= 1);
    let mut cache = gl_cache().lock().unwrap();
    if let Some(rule) = cache.get(&n) {
        return rule;
    }
    let mut rule = Vec::with_capacity(n);
    for i in 0..n {
        // Newton on P_n with the Chebyshev-like initial guess.
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre_and_derivative(n, x);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let (_, dp) = legendre_and_derivative(n, x);
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        rule.push((x, w));
    }
    rule.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    let leaked: &'static [(f64, f64)] = Box::leak(rule.into_boxed_slice());
    cache.insert(n, leaked);
    leaked
}

fn legendre_and_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    if n == 0 {
        return (1.0, 0.0);
    }
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

/// Quadrature weights R_d for the singular factor on an even uniform grid:
///
///   int_0^2pi ln|2 sin((t_i - s)/2)| f(s) ds  ~=  sum_j R_{|i-j|} f(s_j),
///
/// exact for trigonometric polynomials of degree < n/2.
#[derive(Debug, Clone)]
pub(crate) struct LogQuadRule {
    offsets: Arc<Vec<f64>>,
}

impl LogQuadRule {
    pub fn get(n: usize) -> Self {
        assert!(n >= 4, "log rule needs n >= 4, got {n}");
        static CACHE: OnceLock<Mutex<HashMap<usize, Arc<Vec<f64>>>>> = OnceLock::new();
        let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
        let mut map = cache.lock().unwrap();
        let offsets = map
            .entry(n)
            .or_insert_with(|| Arc::new(Self::build(n)))
            .clone();
        Self { offsets }
    }

    fn build(n: usize) -> Vec<f64> {
        let nf = n as f64;
        let h = 2.0 * PI / nf;
        (0..n)
            .map(|d| {
                let mut sum = 0.0;
                for m in 1..=(n - 1) / 2 {
                    sum += ((m * d) as f64 * h).cos() / m as f64;
                }
                // even grids carry a half-weight Nyquist cosine mode
                let nyquist = if n % 2 == 0 {
                    (if d % 2 == 0 { 1.0 } else { -1.0 }) / nf
                } else {
                    0.0
                };
                -(2.0 * PI / nf) * (sum + nyquist)
            })
            .collect()
    }

    #[inline]
    pub fn weight(&self, i: usize, j: usize) -> f64 {
        let d = if i >= j { i - j } else { j - i };
        self.offsets[d]
    }
}

/// R_j(t) weights for an arbitrary target parameter t against the grid
/// s_j = 2 pi j / n; reduces to `LogQuadRule` when t is a grid point.
pub(crate) fn log_weights_at(n: usize, t: f64) -> Vec<f64> {
    let nf = n as f64;
    (0..n)
        .map(|j| {
            let u = t - 2.0 * PI * j as f64 / nf;
            let mut sum = 0.0;
            for m in 1..=(n - 1) / 2 {
                sum += (m as f64 * u).cos() / m as f64;
            }
            let nyquist = if n % 2 == 0 {
                (nf / 2.0 * u).cos() / nf
            } else {
                0.0
            };
            -(2.0 * PI / nf) * (sum + nyquist)
        })
        .collect()
}

/// First row of the periodic spectral differentiation matrix:
/// c_0 = 0 and c_d = (-1)^d cot(d h / 2) / 2 on even grids,
/// c_d = (-1)^d csc(d h / 2) / 2 on odd grids. The derivative at node i is
/// sum_j c_{(i-j) mod n} f_j.
fn diff_row(n: usize) -> Arc<Vec<f64>> {
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<Vec<f64>>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut map = cache.lock().unwrap();
    map.entry(n)
        .or_insert_with(|| {
            let h = 2.0 * PI / n as f64;
            Arc::new(
                (0..n)
                    .map(|d| {
                        if d == 0 {
                            return 0.0;
                        }
                        let sign = if d % 2 == 0 { 1.0 } else { -1.0 };
                        let half = 0.5 * d as f64 * h;
                        if n % 2 == 0 {
                            0.5 * sign / half.tan()
                        } else {
                            0.5 * sign / half.sin()
                        }
                    })
                    .collect(),
            )
        })
        .clone()
}

/// Closed curve sampled at n uniform parameter values with tangents
/// dx/ds with respect to the parameter s in [0, 2pi).
#[derive(Debug, Clone)]
pub(crate) struct Curve {
    pub pts: Vec<Vec2>,
    pub tan: Vec<Vec2>,
}

impl Curve {
    /// Treat the node chain as uniform-parameter samples of a smooth closed
    /// curve; tangents by trigonometric differentiation.
    pub fn from_contour(c: &NodeContour) -> Self {
        let pts = c.nodes().to_vec();
        let tan = spectral_tangents(&pts);
        Self { pts, tan }
    }

    pub fn from_parts(pts: Vec<Vec2>, tan: Vec<Vec2>) -> Self {
        debug_assert_eq!(pts.len(), tan.len());
        Self { pts, tan }
    }

    pub fn n(&self) -> usize {
        self.pts.len()
    }

    pub fn h(&self) -> f64 {
        2.0 * PI / self.pts.len() as f64
    }
}

/// Trigonometric derivative of uniformly sampled closed-curve coordinates.
pub(crate) fn spectral_tangents(pts: &[Vec2]) -> Vec<Vec2> {
    let n = pts.len();
    if n < 8 {
        return finite_difference_tangents(pts);
    }
    let row = diff_row(n);
    let mut out = vec![Vec2::default(); n];
    for (i, o) in out.iter_mut().enumerate() {
        let mut tx = 0.0;
        let mut ty = 0.0;
        for (j, p) in pts.iter().enumerate() {
            let d = (i + n - j) % n;
            let c = row[d];
            tx += c * p.x;
            ty += c * p.y;
        }
        *o = Vec2::new(tx, ty);
    }
    out
}

/// Evaluate the trigonometric interpolant of uniformly sampled closed-curve
/// coordinates on a finer uniform grid; exact for band-limited curves.
pub(crate) fn trig_resample(pts: &[Vec2], n_out: usize) -> Vec<Vec2> {
    let n = pts.len();
    if n_out <= n {
        return pts.to_vec();
    }
    // DFT coefficients c_k, k = -n/2 .. n/2 - 1
    let mut coeff = vec![(0.0, 0.0, 0.0, 0.0); n]; // (re_x, im_x, re_y, im_y), index k + n/2
    for (idx, c) in coeff.iter_mut().enumerate() {
        let k = idx as isize - (n / 2) as isize;
        let mut rx = 0.0;
        let mut ix = 0.0;
        let mut ry = 0.0;
        let mut iy = 0.0;
        for (j, p) in pts.iter().enumerate() {
            let arg = -(k as f64) * 2.0 * PI * j as f64 / n as f64;
            let (s, co) = arg.sin_cos();
            rx += p.x * co;
            ix += p.x * s;
            ry += p.y * co;
            iy += p.y * s;
        }
        *c = (rx / n as f64, ix / n as f64, ry / n as f64, iy / n as f64);
    }
    (0..n_out)
        .map(|j| {
            let s = 2.0 * PI * j as f64 / n_out as f64;
            let mut x = 0.0;
            let mut y = 0.0;
            for (idx, &(rx, ix, ry, iy)) in coeff.iter().enumerate() {
                let k = idx as isize - (n / 2) as isize;
                // on even grids the k = -n/2 coefficient is the Nyquist
                // mode; split it symmetrically to keep the result real
                let nyquist = n % 2 == 0 && k == -((n / 2) as isize);
                let w = if nyquist { 0.5 } else { 1.0 };
                let arg = k as f64 * s;
                let (sn, co) = arg.sin_cos();
                x += w * (rx * co - ix * sn);
                y += w * (ry * co - iy * sn);
                if nyquist {
                    let arg2 = -(k as f64) * s;
                    let (sn2, co2) = arg2.sin_cos();
                    x += 0.5 * (rx * co2 + ix * sn2);
                    y += 0.5 * (ry * co2 + iy * sn2);
                }
            }
            Vec2::new(x, y)
        })
        .collect()
}

/// 4th-order central differences; fallback for odd node counts.
fn finite_difference_tangents(pts: &[Vec2]) -> Vec<Vec2> {
    let n = pts.len();
    let h = 2.0 * PI / n as f64;
    (0..n)
        .map(|i| {
            let p = |k: isize| pts[((i as isize + k).rem_euclid(n as isize)) as usize];
            let d = (p(-2) - p(2) + (p(1) - p(-1)) * 8.0) * (1.0 / (12.0 * h));
            d
        })
        .collect()
}
