//! Rotating vortex patches bifurcating from the disc (Kelvin m-waves),
//! computed by Newton iteration on the free-boundary condition.
//!
//! A patch with boundary r = 1 + g(theta) rotates rigidly with angular
//! velocity Omega exactly when the relative stream function
//!
//!   psi(x) = G(x) + Omega |x|^2 / 2 + C
//!
//! vanishes identically on the boundary. With g(theta) = sum a_k cos(k m
//! theta) and the amplitude chart a_1 = beta pinned, the unknowns are
//! {a_2..a_K, Omega, C}; psi is collocated at K+1 angles spanning one half
//! period [0, pi/m], which resolves the full cosine content by symmetry.
//! In the beta -> 0 limit Omega approaches (m - 1)/(2m).

use std::f64::consts::PI;

use anyhow::{anyhow, bail, ensure, Context, Result};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::field;
use crate::geometry::{FourierBoundary, NodeContour, Vec2};
use crate::kernel::{log_weights_at, Curve};

/// Largest amplitude accepted by a cold-started solve; beyond it the branch
/// must be reached by continuation.
pub fn beta_max(m: u32) -> f64 {
    0.3 / m as f64
}

/// Disc-limit angular velocity (m - 1)/(2m).
pub fn omega_limit(m: u32) -> f64 {
    0.5 - 0.5 / m as f64
}

/// A converged rotating m-wave with reference radius 1.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KelvinWave {
    pub m: u32,
    pub beta: f64,
    pub omega: f64,
    pub r0: f64,
    /// cos(k m theta) coefficients, k = 1..K; coeffs[0] = beta by the chart
    pub coeffs: Vec<f64>,
    /// max |psi| over an off-grid boundary sample at convergence
    pub residual: f64,
    /// gauge constant C of the relative stream function
    pub gauge: f64,
    /// raised when the Newton Jacobian was badly conditioned
    pub fold_warning: bool,
    #[serde(default)]
    pub n_quad: usize,
}

impl KelvinWave {
    /// The beta -> 0 member of the branch: the disc with the limit rotation
    /// speed and the gauge that zeroes psi on the unit circle.
    pub fn disc(m: u32) -> Self {
        let omega = omega_limit(m);
        Self {
            m,
            beta: 0.0,
            omega,
            r0: 1.0,
            coeffs: Vec::new(),
            residual: 0.0,
            gauge: -0.5 * omega,
            fold_warning: false,
            n_quad: 256,
        }
    }

    pub fn boundary(&self) -> FourierBoundary {
        FourierBoundary {
            r0: self.r0,
            m: self.m,
            coeffs: self.coeffs.clone(),
        }
    }

    pub fn contour(&self, n: usize) -> Result<NodeContour> {
        self.boundary().to_contour(n)
    }

    /// Boundary sampled with analytic tangents for spectral quadrature.
    pub(crate) fn curve(&self, n: usize) -> Curve {
        wave_curve(&self.boundary(), n)
    }

    /// Relative stream psi = G + Omega r^2 / 2 + C at a point off the
    /// boundary, using an n-node quadrature of the wave contour.
    pub fn relative_stream_at(&self, x: Vec2, n: usize) -> f64 {
        let curve = self.curve(n);
        let g = field::stream_off_boundary(&curve, x);
        g + 0.5 * self.omega * x.norm_sq() + self.gauge
    }

    /// psi exactly on the boundary at parameter t (any angle, not only grid
    /// nodes), singular factor integrated by its exact Fourier rule.
    pub fn boundary_relative_stream(&self, t: f64, n: usize) -> f64 {
        let fb = self.boundary();
        let curve = wave_curve(&fb, n);
        let g = stream_on_boundary_at(&curve, &fb, t);
        let r = fb.radius(t);
        g + 0.5 * self.omega * r * r + self.gauge
    }

    /// Ellipse semi-axes read off the boundary; meaningful for m = 2 where
    /// the branch consists of the classical rotating ellipses.
    pub fn semi_axes(&self) -> (f64, f64) {
        let a = self.boundary().radius(0.0);
        let b = self.boundary().radius(PI / self.m as f64);
        (a, b)
    }
}

/// Rotation rate of a uniform-vorticity ellipse with semi-axes (a, b).
pub fn kirchhoff_omega(a: f64, b: f64) -> f64 {
    a * b / ((a + b) * (a + b))
}

fn wave_curve(fb: &FourierBoundary, n: usize) -> Curve {
    let mut pts = Vec::with_capacity(n);
    let mut tan = Vec::with_capacity(n);
    for j in 0..n {
        let theta = 2.0 * PI * j as f64 / n as f64;
        let (s, c) = theta.sin_cos();
        let r = fb.radius(theta);
        let dr = fb.g_prime(theta);
        pts.push(Vec2::new(r * c, r * s));
        tan.push(Vec2::new(dr * c - r * s, dr * s + r * c));
    }
    Curve::from_parts(pts, tan)
}

/// Stream of the patch at the boundary point with parameter t, for a curve
/// sampled on the uniform grid.
fn stream_on_boundary_at(curve: &Curve, fb: &FourierBoundary, t: f64) -> f64 {
    let n = curve.n();
    let h = curve.h();
    let x = Vec2::from_polar(fb.radius(t), t);
    let weights = log_weights_at(n, t);
    let mut smooth = 0.0;
    let mut singular = 0.0;
    for j in 0..n {
        let s = 2.0 * PI * j as f64 / n as f64;
        let w = (curve.pts[j] - x).cross(curve.tan[j]);
        let chord = (curve.pts[j] - x).norm();
        let sine = 2.0 * (0.5 * (t - s)).sin().abs();
        let ln_m = if sine < 1e-12 {
            curve.tan[j].norm().ln()
        } else {
            (chord / sine).ln()
        };
        smooth += w * (0.25 - 0.5 * ln_m);
        singular += weights[j] * w;
    }
    (smooth * h - 0.5 * singular) / (2.0 * PI)
}

/// Solver knobs. The collocation grid size is rounded up to a multiple of
/// 2 m K so that the K+1 collocation angles j pi/(m K) are grid points.
#[derive(Debug, Clone, Copy)]
pub struct SolveOptions {
    pub k_modes: usize,
    pub n_colloc: usize,
    pub max_iter: usize,
    pub tol: f64,
}

impl SolveOptions {
    pub fn default_for(m: u32) -> Self {
        let k = 16;
        Self {
            k_modes: k,
            n_colloc: 8 * m as usize * k,
            max_iter: 25,
            tol: 1e-12,
        }
    }
}

struct Collocation {
    m: u32,
    k: usize,
    n: usize,
    indices: Vec<usize>,
}

impl Collocation {
    fn new(m: u32, opts: &SolveOptions) -> Result<Self> {
        let k = opts.k_modes;
        ensure!(k >= 4, "need at least 4 Fourier modes, got {k}");
        let block = 2 * m as usize * k;
        ensure!(
            opts.n_colloc >= 8 * m as usize * k,
            "collocation grid too coarse: n = {} < 8 m K = {}",
            opts.n_colloc,
            8 * m as usize * k
        );
        let n = opts.n_colloc.div_ceil(block) * block;
        let stride = n / block;
        let indices = (0..=k).map(|j| j * stride).collect();
        Ok(Self { m, k, n, indices })
    }

    /// psi at the collocation angles for the coefficient set (a_1..a_K).
    fn residual(&self, coeffs: &[f64], omega: f64, gauge: f64) -> Result<Vec<f64>> {
        let fb = FourierBoundary::new(1.0, self.m, coeffs.to_vec())?;
        let curve = wave_curve(&fb, self.n);
        let mut out = Vec::with_capacity(self.indices.len());
        for &i in &self.indices {
            let g = field::stream_on_boundary(&curve, i);
            let r = curve.pts[i].norm();
            out.push(g + 0.5 * omega * r * r + gauge);
        }
        Ok(out)
    }
}

/// Solve for the m-wave with amplitude beta from the disc initial guess.
pub fn solve_kelvin(m: u32, beta: f64) -> Result<KelvinWave> {
    solve_kelvin_with(m, beta, SolveOptions::default_for(m))
}

pub fn solve_kelvin_with(m: u32, beta: f64, opts: SolveOptions) -> Result<KelvinWave> {
    ensure!(
        beta <= beta_max(m),
        "beta = {beta} beyond the cold-start range {:.4} for m = {m}; use continuation",
        beta_max(m)
    );
    solve_kelvin_warm(m, beta, opts, None)
}

/// Newton solve warm-started from a nearby wave; no amplitude cap.
pub fn solve_kelvin_warm(
    m: u32,
    beta: f64,
    opts: SolveOptions,
    warm: Option<&KelvinWave>,
) -> Result<KelvinWave> {
    ensure!(m >= 2, "symmetry order must be >= 2, got {m}");
    ensure!(beta > 0.0, "amplitude beta must be positive, got {beta}");
    let colloc = Collocation::new(m, &opts)?;
    let k = colloc.k;
    let n_unknowns = k + 1; // a_2..a_K, omega, gauge

    // unknown vector u = [a_2..a_K, omega, C]
    let mut u = DVector::zeros(n_unknowns);
    match warm {
        Some(w) if w.m == m => {
            for j in 0..k - 1 {
                u[j] = w.coeffs.get(j + 1).copied().unwrap_or(0.0);
            }
            u[k - 1] = w.omega;
            u[k] = w.gauge;
        }
        _ => {
            u[k - 1] = omega_limit(m);
            u[k] = -0.5 * omega_limit(m);
        }
    }

    let assemble_coeffs = |u: &DVector<f64>| {
        let mut coeffs = vec![0.0; k];
        coeffs[0] = beta;
        for j in 0..k - 1 {
            coeffs[j + 1] = u[j];
        }
        coeffs
    };
    let eval = |u: &DVector<f64>| -> Result<DVector<f64>> {
        let coeffs = assemble_coeffs(u);
        Ok(DVector::from_vec(colloc.residual(
            &coeffs,
            u[k - 1],
            u[k],
        )?))
    };

    let mut f = eval(&u)?;
    let mut fold_warning = false;
    let mut converged = false;
    for _ in 0..opts.max_iter {
        let fnorm = f.amax();
        if fnorm < opts.tol {
            converged = true;
            break;
        }
        // finite-difference Jacobian
        let mut jac = DMatrix::zeros(n_unknowns, n_unknowns);
        for col in 0..n_unknowns {
            let h = 1e-7 * u[col].abs().max(1.0);
            let mut up = u.clone();
            up[col] += h;
            let fp = eval(&up)?;
            for row in 0..n_unknowns {
                jac[(row, col)] = (fp[row] - f[row]) / h;
            }
        }
        let svd = jac.clone().svd(false, false);
        let smax = svd.singular_values.max();
        let smin = svd.singular_values.min();
        if smin <= 0.0 || smax / smin > 1e10 {
            fold_warning = true;
        }
        let lu = jac.lu();
        let delta = lu
            .solve(&(-&f))
            .ok_or_else(|| anyhow!("singular Newton Jacobian at beta = {beta}"))?;
        // damped update: halve until the residual does not increase
        let mut step = 1.0;
        let mut accepted = false;
        for _ in 0..10 {
            let trial = &u + &delta * step;
            match eval(&trial) {
                Ok(ft) if ft.amax() < fnorm => {
                    u = trial;
                    f = ft;
                    accepted = true;
                    break;
                }
                _ => step *= 0.5,
            }
        }
        if !accepted {
            bail!(
                "Newton stalled for (m, beta) = ({m}, {beta}): residual {fnorm:.3e} not reduced"
            );
        }
    }
    if !converged && f.amax() >= opts.tol {
        bail!(
            "Newton did not converge in {} iterations for (m, beta) = ({m}, {beta}); last residual {:.3e}",
            opts.max_iter,
            f.amax()
        );
    }

    let mut wave = KelvinWave {
        m,
        beta,
        omega: u[k - 1],
        r0: 1.0,
        coeffs: assemble_coeffs(&u),
        residual: 0.0,
        gauge: u[k],
        fold_warning,
        n_quad: colloc.n,
    };
    wave.residual = relative_stream_residual(&wave, 3 * colloc.n / 2);
    ensure!(
        wave.residual < 1e-10,
        "off-grid boundary residual {:.3e} above 1e-10 for (m, beta) = ({m}, {beta})",
        wave.residual
    );
    Ok(wave)
}

/// Independent verification of the boundary condition: max |psi| over
/// n_check boundary angles offset from any collocation node.
pub fn relative_stream_residual(wave: &KelvinWave, n_check: usize) -> f64 {
    let n = wave.n_quad.max(128);
    let mut worst: f64 = 0.0;
    for i in 0..n_check {
        let t = 2.0 * PI * (i as f64 + 0.382) / n_check as f64;
        worst = worst.max(wave.boundary_relative_stream(t, n).abs());
    }
    worst
}

/// Waves at beta_j = j beta_target / steps, each warm-started from the
/// previous one.
pub fn continuation(m: u32, beta_target: f64, steps: usize) -> Result<Vec<KelvinWave>> {
    ensure!(steps >= 1, "continuation needs at least one step");
    ensure!(beta_target > 0.0, "target amplitude must be positive");
    let opts = SolveOptions::default_for(m);
    let mut out: Vec<KelvinWave> = Vec::with_capacity(steps);
    for j in 1..=steps {
        let beta_j = beta_target * j as f64 / steps as f64;
        let wave = solve_kelvin_warm(m, beta_j, opts, out.last())
            .with_context(|| format!("continuation failed at beta = {beta_j}"))?;
        out.push(wave);
    }
    Ok(out)
}

/// Critical radius of the disc-limit relative stream: the root r* > 1 of
/// -ln(r)/2 + (1/2)(1/2 - 1/(2m))(r^2 - 1), approximately 1.87, 1.46, 1.32
/// for m = 2, 3, 4.
pub fn critical_radius_kelvin(m: u32) -> f64 {
    assert!(m >= 2);
    let f = |r: f64| -0.5 * r.ln() + 0.5 * omega_limit(m) * (r * r - 1.0);
    let mut lo = 1.0 + 1e-9;
    let mut hi = 10.0;
    debug_assert!(f(lo) < 0.0 && f(hi) > 0.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-12 {
            break;
        }
    }
    0.5 * (lo + hi)
}
