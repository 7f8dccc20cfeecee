//! Variational stability of annular patches: closed-form relative stream
//! function, critical radius, and the per-mode quadratic form in the two
//! boundary graphs (h1, h2).
//!
//! For the annulus r1 < r < r2 with unit vorticity, the radial stream obeys
//! -dG/dr = (1/r) int_0^r s w(s) ds, and the relative stream
//!
//!   psi(r) = G(r) - G(0) - C1 r1^2 + C1 r^2,
//!   C1 = 1/4 - r1^2 ln(r2/r1) / (2 (r2^2 - r1^2)) > 0,
//!
//! vanishes on both rims, grows inward (d_r psi(r1) = 2 C1 r1 > 0), falls
//! outward (d_r psi(r2) < 0), and crosses zero again at a critical radius
//! r* > r2. A mode-n graph perturbation (h1, h2) = eps (a1, a2) cos(n
//! theta) changes the energy by pi eps^2 a^T Q_n a with
//!
//!   Q_n = [ -r1 s1/2 + r1^2/(4n),     -r1 r2 rho^n/(4n)        ]
//!         [ -r1 r2 rho^n/(4n),         r2 s2/2 + r2^2/(4n)     ],
//!
//! s1 = d_r psi(r1), s2 = d_r psi(r2), rho = r1/r2. The direct two-contour
//! energy difference below fixed this normalization (the off-diagonal is
//! half the convolution eigenvalue r1 r2 rho^n/(2n) because it multiplies
//! the cross product a1 a2 twice). Negativity of every Q_n over the modes
//! n in m N certifies the annulus as a strict constrained energy maximum
//! for m-fold perturbations once m is large enough.

use std::f64::consts::PI;

use anyhow::{bail, ensure, Result};
use serde::{Deserialize, Serialize};

use crate::field;
use crate::geometry::Vec2;
use crate::kernel::{gauss_legendre, Curve};
use crate::spectral::GraphPerturbation;

/// Annulus r1 < r < r2 with the derived constants of its relative stream.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AnnulusModel {
    pub r1: f64,
    pub r2: f64,
    pub c1: f64,
    /// -G(0) - C1 r1^2, the additive gauge of psi
    pub gauge_offset: f64,
    /// zero of psi beyond r2
    pub rstar: f64,
    /// d_r psi(r1) = 2 C1 r1 > 0
    pub slope_inner: f64,
    /// d_r psi(r2) < 0
    pub slope_outer: f64,
}

/// Build the model and verify its defining identities.
pub fn build_annulus(r1: f64, r2: f64) -> Result<AnnulusModel> {
    ensure!(r1 > 0.0, "inner radius must be positive, got {r1}");
    ensure!(r1 < r2, "need r1 < r2, got ({r1}, {r2})");
    let dr2 = r2 * r2 - r1 * r1;
    let c1 = 0.25 - r1 * r1 / (2.0 * dr2) * (r2 / r1).ln();
    let g0 = g_bar_origin(r1, r2);
    let gauge_offset = -g0 - c1 * r1 * r1;
    let slope_inner = 2.0 * c1 * r1;
    let slope_outer = -r1 * r1 * r2 / dr2 * (r2 / r1).ln() + r1 * r1 / (2.0 * r2);

    let mut model = AnnulusModel {
        r1,
        r2,
        c1,
        gauge_offset,
        rstar: f64::NAN,
        slope_inner,
        slope_outer,
    };
    model.rstar = critical_radius(&model)?;

    ensure!(model.c1 > 0.0, "C1 = {} not positive", model.c1);
    ensure!(
        model.stream(r1).abs() < 1e-12 && model.stream(r2).abs() < 1e-12,
        "boundary conditions violated: psi(r1) = {:.3e}, psi(r2) = {:.3e}",
        model.stream(r1),
        model.stream(r2)
    );
    ensure!(
        model.slope_inner > 0.0 && model.slope_outer < 0.0,
        "slope signs wrong: inner {}, outer {}",
        model.slope_inner,
        model.slope_outer
    );
    Ok(model)
}

/// G(0) = int_{r1}^{r2} r ln(1/r) dr in closed form.
fn g_bar_origin(r1: f64, r2: f64) -> f64 {
    let anti = |r: f64| -0.5 * r * r * r.ln() + 0.25 * r * r;
    anti(r2) - anti(r1)
}

impl AnnulusModel {
    /// Radial stream G(r) of the unperturbed annulus.
    pub fn g_bar(&self, r: f64) -> f64 {
        let g0 = g_bar_origin(self.r1, self.r2);
        if r <= self.r1 {
            g0
        } else if r <= self.r2 {
            g0 - (0.25 * (r * r - self.r1 * self.r1)
                - 0.5 * self.r1 * self.r1 * (r / self.r1).ln())
        } else {
            self.g_bar(self.r2)
                - 0.5 * (self.r2 * self.r2 - self.r1 * self.r1) * (r / self.r2).ln()
        }
    }

    /// Relative stream psi(r) = G(r) + gauge + C1 r^2.
    pub fn stream(&self, r: f64) -> f64 {
        assert!(r >= 0.0);
        self.g_bar(r) + self.gauge_offset + self.c1 * r * r
    }

    pub fn critical_radius(&self) -> f64 {
        self.rstar
    }

    pub fn mass(&self) -> f64 {
        PI * (self.r2 * self.r2 - self.r1 * self.r1)
    }

    pub fn impulse(&self) -> f64 {
        0.5 * PI * (self.r2.powi(4) - self.r1.powi(4))
    }

    /// E = <w, G w> / 2 by radial quadrature of the closed-form stream.
    pub fn energy_oracle(&self) -> f64 {
        let mut acc = 0.0;
        for &(t, w) in gauss_legendre(48) {
            let r = 0.5 * (self.r1 + self.r2) + 0.5 * (self.r2 - self.r1) * t;
            acc += w * self.g_bar(r) * 2.0 * PI * r;
        }
        0.25 * (self.r2 - self.r1) * acc
    }

    /// Convolution eigenvalue of the inner-outer coupling kernel on
    /// e^{i n theta}: (r1/r2)^n / (2n).
    pub fn coupling_eigenvalue(&self, n: u32) -> f64 {
        (self.r1 / self.r2).powi(n as i32) / (2.0 * n as f64)
    }

    /// Per-mode 2x2 symmetric matrix Q_n acting on the cos(n theta)
    /// amplitudes (a1, a2); the energy difference of the perturbation
    /// (h1, h2) = eps (a1, a2) cos(n theta) is pi eps^2 a^T Q_n a.
    pub fn mode_quadratic_form(&self, n: u32) -> Result<[[f64; 2]; 2]> {
        ensure!(
            n >= 1,
            "mode 0 is excluded: constants are removed by the small-mass condition"
        );
        let nf = n as f64;
        let q11 = -self.r1 * self.slope_inner / 2.0 + self.r1 * self.r1 / (4.0 * nf);
        let q22 = self.r2 * self.slope_outer / 2.0 + self.r2 * self.r2 / (4.0 * nf);
        let q12 = -0.5 * self.r1 * self.r2 * self.coupling_eigenvalue(n);
        Ok([[q11, q12], [q12, q22]])
    }

    /// Largest eigenvalue of Q_n.
    pub fn mode_max_eigenvalue(&self, n: u32) -> Result<f64> {
        let q = self.mode_quadratic_form(n)?;
        let tr_half = 0.5 * (q[0][0] + q[1][1]);
        let gap_half = 0.5 * (q[0][0] - q[1][1]);
        Ok(tr_half + (gap_half * gap_half + q[0][1] * q[0][1]).sqrt())
    }

    /// Smallest symmetry order m such that every mode n in {m, 2m, ...}
    /// carries a negative-definite Q_n; modes beyond n_max are covered by
    /// the monotone tail bound max(diag) + |offdiag|, all decreasing in n.
    pub fn coercivity_threshold(&self, n_max: Option<u32>) -> Result<u32> {
        for m in 2..=100_000u32 {
            let cap = n_max.unwrap_or(64 * m).max(m);
            let mut all_negative = true;
            let mut n = m;
            while n <= cap {
                if self.mode_max_eigenvalue(n)? >= 0.0 {
                    all_negative = false;
                    break;
                }
                n += m;
            }
            if !all_negative {
                continue;
            }
            // tail bound at the first uncovered multiple
            let q = self.mode_quadratic_form(n)?;
            let tail = q[0][0].max(q[1][1]) + q[0][1].abs();
            if tail < 0.0 {
                return Ok(m);
            }
        }
        bail!("no coercivity threshold found below m = 100000")
    }
}

/// Graph perturbations of the two annulus boundaries.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct AnnulusPerturbation {
    pub inner: GraphPerturbation,
    pub outer: GraphPerturbation,
}

impl AnnulusPerturbation {
    pub fn scaled(&self, s: f64) -> Self {
        Self {
            inner: self.inner.scaled(s),
            outer: self.outer.scaled(s),
        }
    }

    pub fn sup_norm_bound(&self) -> f64 {
        self.inner.sup_norm_bound().max(self.outer.sup_norm_bound())
    }
}

fn perturbed_circle(r0: f64, pert: &GraphPerturbation, n: usize) -> Curve {
    let mut pts = Vec::with_capacity(n);
    let mut tan = Vec::with_capacity(n);
    for j in 0..n {
        let theta = 2.0 * PI * j as f64 / n as f64;
        let (s, c) = theta.sin_cos();
        let r = r0 + pert.eval(theta);
        let dr = pert.eval_prime(theta);
        pts.push(Vec2::new(r * c, r * s));
        tan.push(Vec2::new(dr * c - r * s, dr * s + r * c));
    }
    Curve::from_parts(pts, tan)
}

/// Mass and impulse defects of the perturbed annulus against the base one.
fn annulus_defects(model: &AnnulusModel, pert: &AnnulusPerturbation, n: usize) -> [f64; 2] {
    let h = 2.0 * PI / n as f64;
    let mut d = [0.0; 2];
    for j in 0..n {
        let theta = 2.0 * PI * j as f64 / n as f64;
        let r2h = model.r2 + pert.outer.eval(theta);
        let r1h = model.r1 + pert.inner.eval(theta);
        d[0] += 0.5 * (r2h * r2h - model.r2 * model.r2)
            - 0.5 * (r1h * r1h - model.r1 * model.r1);
        d[1] += 0.25 * (r2h.powi(4) - model.r2.powi(4))
            - 0.25 * (r1h.powi(4) - model.r1.powi(4));
    }
    [d[0] * h, d[1] * h]
}

/// Add constants to (h1, h2) so that mass and impulse match the base
/// annulus exactly.
pub fn make_admissible_annulus(
    model: &AnnulusModel,
    pert: &AnnulusPerturbation,
) -> Result<AnnulusPerturbation> {
    let n = 4096;
    let mut adj = [0.0_f64; 2];
    let build = |adj: &[f64; 2]| -> AnnulusPerturbation {
        let mut p = pert.clone();
        p.inner.constant += adj[0];
        p.outer.constant += adj[1];
        p
    };
    for _ in 0..30 {
        let f = annulus_defects(model, &build(&adj), n);
        if f[0].abs().max(f[1].abs()) < 1e-14 {
            return Ok(build(&adj));
        }
        let step = 1e-8;
        let mut jac = [[0.0; 2]; 2];
        for col in 0..2 {
            let mut a2 = adj;
            a2[col] += step;
            let f2 = annulus_defects(model, &build(&a2), n);
            for row in 0..2 {
                jac[row][col] = (f2[row] - f[row]) / step;
            }
        }
        let det = jac[0][0] * jac[1][1] - jac[0][1] * jac[1][0];
        ensure!(det.abs() > 1e-12, "singular admissibility system");
        adj[0] += (-f[0] * jac[1][1] + f[1] * jac[0][1]) / det;
        adj[1] += (-f[1] * jac[0][0] + f[0] * jac[1][0]) / det;
    }
    bail!("annulus admissibility adjustment did not converge")
}

/// Direct energy difference E[perturbed annulus] - E[annulus] with the
/// perturbation scaled by eps; both energies use the same two-contour
/// double-boundary quadrature at n nodes per contour.
pub fn annulus_energy_bruteforce(
    model: &AnnulusModel,
    pert: &AnnulusPerturbation,
    eps: f64,
    n: usize,
) -> Result<f64> {
    let scaled = pert.scaled(eps);
    ensure!(
        eps.abs() * pert.sup_norm_bound() < 0.5 * (model.r2 - model.r1),
        "perturbation too large for the gap r2 - r1"
    );
    // reject inner boundary crossing the outer one
    let samples = 1024;
    for j in 0..samples {
        let theta = 2.0 * PI * j as f64 / samples as f64;
        let outer = model.r2 + scaled.outer.eval(theta);
        let inner = model.r1 + scaled.inner.eval(theta);
        ensure!(
            outer > inner && inner > 0.0,
            "boundary collision at theta = {theta:.4}: inner {inner:.4}, outer {outer:.4}"
        );
    }
    let zero = GraphPerturbation::default();
    let base = [
        (perturbed_circle(model.r2, &zero, n), 1.0),
        (perturbed_circle(model.r1, &zero, n), -1.0),
    ];
    let pert_curves = [
        (perturbed_circle(model.r2, &scaled.outer, n), 1.0),
        (perturbed_circle(model.r1, &scaled.inner, n), -1.0),
    ];
    Ok(field::energy_of_curves(&pert_curves) - field::energy_of_curves(&base))
}

fn critical_radius(model: &AnnulusModel) -> Result<f64> {
    // psi < 0 just outside r2 and eventually positive (C1 > 0)
    let mut lo = model.r2 * (1.0 + 1e-9);
    ensure!(model.stream(lo) < 0.0, "psi not negative just outside r2");
    let mut hi = model.r2 * 2.0;
    let mut expansions = 0;
    while model.stream(hi) < 0.0 {
        hi *= 2.0;
        expansions += 1;
        ensure!(
            expansions < 200,
            "no sign change found for the critical radius"
        );
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if model.stream(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-11 {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn half_one() -> AnnulusModel {
        build_annulus(0.5, 1.0).unwrap()
    }

    #[test]
    fn c1_and_slopes_closed_form() {
        let m = half_one();
        let c1_expect = 0.25 - 2.0_f64.ln() / 6.0;
        assert!((m.c1 - c1_expect).abs() < 1e-14, "C1 = {}", m.c1);
        let outer_expect = -2.0_f64.ln() / 3.0 + 0.125;
        assert!(
            (m.slope_outer - outer_expect).abs() < 1e-14,
            "slope_outer = {}",
            m.slope_outer
        );
        assert!((m.slope_inner - 2.0 * m.c1 * 0.5).abs() < 1e-15);
    }

    #[test]
    fn boundary_conditions_and_center_value() {
        let m = half_one();
        assert!(m.stream(m.r1).abs() < 1e-12);
        assert!(m.stream(m.r2).abs() < 1e-12);
        // psi(0) = -C1 r1^2
        assert!((m.stream(0.0) + m.c1 * m.r1 * m.r1).abs() < 1e-13);
        assert!(m.stream(0.0) < 0.0);
    }

    #[test]
    fn stream_negative_between_r2_and_rstar() {
        let m = half_one();
        assert!(m.rstar > m.r2);
        for j in 1..20 {
            let r = m.r2 + (m.rstar - m.r2) * j as f64 / 20.0;
            assert!(m.stream(r) < 0.0, "psi({r}) = {}", m.stream(r));
        }
        // root straddle
        assert!(m.stream(m.rstar - 1e-6) < 0.0);
        assert!(m.stream(m.rstar + 1e-6) > 0.0);
    }

    #[test]
    fn rstar_ratio_scale_invariant() {
        // psi scales exactly quadratically under (r1, r2) -> (s r1, s r2),
        // so rstar/r2 depends only on r1/r2
        let base = half_one();
        for s in [0.3, 2.0, 7.5] {
            let scaled = build_annulus(0.5 * s, s).unwrap();
            assert!(
                (scaled.rstar / scaled.r2 - base.rstar / base.r2).abs() < 1e-8,
                "ratio changed under rescaling by {s}"
            );
        }
        // and genuinely varies with r1/r2
        let thin = build_annulus(0.9, 1.0).unwrap();
        assert!((thin.rstar / thin.r2 - base.rstar / base.r2).abs() > 1e-3);
    }

    #[test]
    fn random_models_have_positive_c1_and_signed_slopes() {
        let mut rng = StdRng::seed_from_u64(11);
        for _ in 0..1000 {
            let r1: f64 = rng.gen_range(0.01..5.0);
            let r2 = r1 + rng.gen_range(0.01..5.0);
            let m = build_annulus(r1, r2).unwrap();
            assert!(m.c1 > 0.0);
            assert!(m.slope_inner > 0.0);
            assert!(m.slope_outer < 0.0);
        }
    }

    #[test]
    fn degenerate_annulus_rejected() {
        assert!(build_annulus(1.0, 1.0).is_err());
        assert!(build_annulus(0.0, 1.0).is_err());
        assert!(build_annulus(2.0, 1.0).is_err());
    }

    #[test]
    fn coupling_eigenvalue_value() {
        let m = half_one();
        assert!((m.coupling_eigenvalue(2) - 1.0 / 16.0).abs() < 1e-15);
    }

    #[test]
    fn mode_matrix_limits() {
        let m = half_one();
        let q = m.mode_quadratic_form(4000).unwrap();
        assert!((q[0][0] - (-m.r1 * m.slope_inner / 2.0)).abs() < 1e-4);
        assert!((q[1][1] - (m.r2 * m.slope_outer / 2.0)).abs() < 1e-4);
        assert!(q[0][0] < 0.0 && q[1][1] < 0.0);
        // off-diagonal decays exponentially
        let q8 = m.mode_quadratic_form(8).unwrap();
        let q16 = m.mode_quadratic_form(16).unwrap();
        assert!(q16[0][1].abs() < 1e-2 * q8[0][1].abs());
        assert!(m.mode_quadratic_form(0).is_err());
    }

    #[test]
    fn tail_eigenvalues_decreasing() {
        let models = [
            half_one(),
            build_annulus(0.9, 1.0).unwrap(),
            build_annulus(0.1, 1.0).unwrap(),
        ];
        for m in &models {
            let mut prev = m.mode_max_eigenvalue(8).unwrap();
            for n in 9..=64 {
                let cur = m.mode_max_eigenvalue(n).unwrap();
                assert!(cur < prev + 1e-14, "not decreasing at n = {n}");
                prev = cur;
            }
        }
    }

    #[test]
    fn threshold_for_half_one() {
        let m = half_one();
        let t = m.coercivity_threshold(None).unwrap();
        // stable under n_max doubling
        let t2 = m.coercivity_threshold(Some(128 * t)).unwrap();
        assert_eq!(t, t2);
        // minimality: below t some multiple is non-negative
        for below in 2..t {
            let mut bad = false;
            let mut n = below;
            while n <= 64 * below {
                if m.mode_max_eigenvalue(n).unwrap() >= 0.0 {
                    bad = true;
                    break;
                }
                n += below;
            }
            assert!(bad, "m = {below} below threshold but all modes negative");
        }
        // at the threshold everything is negative
        let mut n = t;
        while n <= 64 * t {
            assert!(m.mode_max_eigenvalue(n).unwrap() < 0.0);
            n += t;
        }
    }

    #[test]
    fn thin_vs_fat_threshold_reported() {
        let thin = build_annulus(0.9, 1.0)
            .unwrap()
            .coercivity_threshold(None)
            .unwrap();
        let fat = build_annulus(0.1, 1.0)
            .unwrap()
            .coercivity_threshold(None)
            .unwrap();
        // informational: no ordering asserted, both finite
        println!("thin annulus threshold m = {thin}, fat annulus threshold m = {fat}");
        assert!(thin >= 2 && fat >= 2);
    }

    #[test]
    fn energy_oracle_matches_boundary_reduction() {
        let m = half_one();
        let zero = AnnulusPerturbation::default();
        // bruteforce with eps = 0 exercises the two-contour energy path
        let de = annulus_energy_bruteforce(&m, &zero, 0.0, 512).unwrap();
        assert_eq!(de, 0.0);
        let base = [
            (perturbed_circle(m.r2, &GraphPerturbation::default(), 512), 1.0),
            (perturbed_circle(m.r1, &GraphPerturbation::default(), 512), -1.0),
        ];
        let e_num = field::energy_of_curves(&base);
        let e_ora = m.energy_oracle();
        assert!(
            (e_num - e_ora).abs() < 1e-10,
            "two-contour {e_num} vs radial oracle {e_ora}"
        );
    }

    #[test]
    fn single_mode_oracle_fixes_normalization() {
        let m = half_one();
        let eps = 1e-3;
        for n in [5u32, 10, 15] {
            let raw = AnnulusPerturbation {
                inner: GraphPerturbation::default(),
                outer: GraphPerturbation {
                    constant: 0.0,
                    cos_terms: vec![(n, eps)],
                    sin_terms: vec![],
                },
            };
            let adm = make_admissible_annulus(&m, &raw).unwrap();
            let de = annulus_energy_bruteforce(&m, &adm, 1.0, 720).unwrap();
            let q = m.mode_quadratic_form(n).unwrap();
            let predict = PI * eps * eps * q[1][1];
            let ratio = de / predict;
            assert!(
                (ratio - 1.0).abs() < 0.1,
                "mode {n}: direct {de:.4e} vs pi eps^2 Q22 {predict:.4e} (ratio {ratio})"
            );
        }
    }

    #[test]
    fn basis_perturbations_match_mode_matrix() {
        let m = half_one();
        let t = m.coercivity_threshold(None).unwrap();
        let eps = 1e-3;
        for k in 1..=3u32 {
            let n = k * t;
            let q = m.mode_quadratic_form(n).unwrap();
            for (a1, a2) in [(1.0, 0.0), (0.0, 1.0), (1.0, 1.0)] {
                let raw = AnnulusPerturbation {
                    inner: GraphPerturbation {
                        constant: 0.0,
                        cos_terms: vec![(n, eps * a1)],
                        sin_terms: vec![],
                    },
                    outer: GraphPerturbation {
                        constant: 0.0,
                        cos_terms: vec![(n, eps * a2)],
                        sin_terms: vec![],
                    },
                };
                let adm = make_admissible_annulus(&m, &raw).unwrap();
                let de = annulus_energy_bruteforce(&m, &adm, 1.0, 720).unwrap();
                let predict = PI
                    * eps
                    * eps
                    * (q[0][0] * a1 * a1 + 2.0 * q[0][1] * a1 * a2 + q[1][1] * a2 * a2);
                let ratio = de / predict;
                assert!(
                    (ratio - 1.0).abs() < 0.1,
                    "n = {n}, a = ({a1},{a2}): ratio {ratio} ({de:.4e} vs {predict:.4e})"
                );
                assert!(de < 0.0, "admissible m-fold perturbation raised the energy");
            }
        }
    }

    #[test]
    fn outer_inflation_scales_linearly() {
        // non-admissible inflation: the first-order term G(r2) * dMass
        // survives when ln(r2) != 0, so |dE| is linear in eps
        let m = build_annulus(0.5, 1.3).unwrap();
        let pert = AnnulusPerturbation {
            inner: GraphPerturbation::default(),
            outer: GraphPerturbation {
                constant: 1.0,
                cos_terms: vec![],
                sin_terms: vec![],
            },
        };
        let d1 = annulus_energy_bruteforce(&m, &pert, 1e-3, 512).unwrap();
        let d2 = annulus_energy_bruteforce(&m, &pert, 5e-4, 512).unwrap();
        let ratio = d1 / d2;
        assert!((ratio - 2.0).abs() < 0.02, "linear scaling ratio {ratio}");
    }

    #[test]
    fn collision_rejected() {
        let m = half_one();
        let pert = AnnulusPerturbation {
            inner: GraphPerturbation {
                constant: 0.6,
                cos_terms: vec![],
                sin_terms: vec![],
            },
            outer: GraphPerturbation::default(),
        };
        assert!(annulus_energy_bruteforce(&m, &pert, 1.0, 256).is_err());
    }
}
