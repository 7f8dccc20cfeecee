//! Linearized energy quadratic form for graph perturbations of a rotating
//! wave, and its constrained spectrum.
//!
//! For a boundary graph h on the wave's boundary coordinate, the second
//! variation of the energy under the mass / first-moment / impulse /
//! sin-moment constraints is E[omega_h] - E[omega*] ~ <q, L q> / 2 with
//! q = J0 h and
//!
//!   (L q)(eta) = I0(eta) q(eta) + int K(eta, eta') q(eta') d eta',
//!   I0 = d_xi psi / J0 on the boundary,
//!   K(eta, eta') = ln(1/|x(eta) - x(eta')|) / 2 pi.
//!
//! In the disc limit I0 = -1/(2m) and K acts on e^{i n eta} with eigenvalue
//! 1/(2n), so the admissible modes n = 2m, 3m, ... all carry negative
//! eigenvalues -1/(2m) + 1/(2n): the wave is a constrained energy maximum.
//! Without the m-fold restriction the mode n = 2 is admissible for m >= 3
//! and the form turns indefinite. The brute-force energy difference below
//! is the independent check that pins every normalization.

use std::f64::consts::PI;

use anyhow::{ensure, Result};
use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::field;
use crate::geometry::Vec2;
use crate::kernel::{Curve, LogQuadRule};
use crate::vstate::KelvinWave;

/// Collocation discretization of L = I0 + K on the wave boundary.
#[derive(Debug, Clone)]
pub struct LinearizedOperator {
    pub m: u32,
    pub beta: f64,
    /// collocation angles eta_j
    pub grid: Vec<f64>,
    /// multiplier part I0(eta_j)
    pub i0: Vec<f64>,
    /// quadrature matrix of the log kernel: (K q)_i = sum_j W_ij q_j
    pub kernel: DMatrix<f64>,
    /// boundary Jacobian J0(eta_j) = r0 + g(eta_j)
    pub j0: Vec<f64>,
}

/// Assemble the operator on an n-point grid (n a multiple of 2m, n >= 64).
pub fn assemble_linearized(wave: &KelvinWave, n: usize) -> Result<LinearizedOperator> {
    ensure!(n >= 64, "grid too coarse: n = {n} < 64");
    ensure!(
        n % (2 * wave.m as usize) == 0,
        "n = {n} must be a multiple of 2m = {}",
        2 * wave.m
    );
    ensure!(
        wave.beta == 0.0 || wave.residual < 1e-8,
        "wave not converged: boundary residual {:.3e}",
        wave.residual
    );

    let curve = wave.curve(n);
    let fb = wave.boundary();
    let velocities = field::boundary_velocities(&curve);
    let rule = LogQuadRule::get(n);
    let h = 2.0 * PI / n as f64;

    let mut grid = Vec::with_capacity(n);
    let mut i0 = Vec::with_capacity(n);
    let mut j0 = Vec::with_capacity(n);
    for j in 0..n {
        let eta = 2.0 * PI * j as f64 / n as f64;
        let r = fb.radius(eta);
        let u = velocities[j];
        // radial derivative of G from u = (dG/dy, -dG/dx)
        let dg_dr = -u.y * eta.cos() + u.x * eta.sin();
        let dpsi_dr = dg_dr + wave.omega * r;
        grid.push(eta);
        j0.push(r);
        i0.push(dpsi_dr / r);
    }

    let mut kernel = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let ln_m = field::ln_mollified_distance(&curve, i, j);
            kernel[(i, j)] = -(rule.weight(i, j) + h * ln_m) / (2.0 * PI);
        }
    }

    Ok(LinearizedOperator {
        m: wave.m,
        beta: wave.beta,
        grid,
        i0,
        kernel,
        j0,
    })
}

impl LinearizedOperator {
    pub fn n(&self) -> usize {
        self.grid.len()
    }

    /// L q = I0 q + K q on the grid.
    pub fn apply(&self, q: &[f64]) -> Vec<f64> {
        let n = self.n();
        let mut out = vec![0.0; n];
        for (i, o) in out.iter_mut().enumerate() {
            let mut acc = self.i0[i] * q[i];
            for (j, &qj) in q.iter().enumerate() {
                acc += self.kernel[(i, j)] * qj;
            }
            *o = acc;
        }
        out
    }

    /// L2(S^1) pairing <p, L q> by the trapezoid rule (spectrally exact on
    /// the periodic grid).
    pub fn pairing(&self, p: &[f64], q: &[f64]) -> f64 {
        let h = 2.0 * PI / self.n() as f64;
        let lq = self.apply(q);
        h * p.iter().zip(&lq).map(|(a, b)| a * b).sum::<f64>()
    }

    /// Predicted second-order energy difference <q, L q> / 2.
    pub fn half_quadratic_form(&self, q: &[f64]) -> f64 {
        0.5 * self.pairing(q, q)
    }

    /// Rayleigh quotient of the kernel part on the cos(f eta) grid mode;
    /// equals the exact eigenvalue 1/(2f) in the disc limit.
    pub fn kernel_eigenvalue(&self, f: u32) -> f64 {
        let n = self.n();
        let v: Vec<f64> = self.grid.iter().map(|e| (f as f64 * e).cos()).collect();
        let mut kv = vec![0.0; n];
        for (i, o) in kv.iter_mut().enumerate() {
            for (j, &vj) in v.iter().enumerate() {
                *o += self.kernel[(i, j)] * vj;
            }
        }
        let num: f64 = v.iter().zip(&kv).map(|(a, b)| a * b).sum();
        let den: f64 = v.iter().map(|a| a * a).sum();
        num / den
    }
}

/// Admissible subspace description: the cancellation conditions (mass,
/// first moment, impulse, sin moment) as grid vectors, plus optionally the
/// m-fold restriction to frequencies that are multiples of m.
#[derive(Debug, Clone)]
pub struct ConstraintSet {
    pub m: u32,
    pub n: usize,
    pub mfold_restricted: bool,
    /// constrained directions: 1, cos(eta), sin(eta), cos(m eta), sin(m eta)
    pub basis: Vec<Vec<f64>>,
    /// surviving Fourier frequencies
    pub admissible: Vec<u32>,
}

impl ConstraintSet {
    pub fn new(n: usize, m: u32, mfold_restricted: bool) -> Self {
        let grid: Vec<f64> = (0..n).map(|j| 2.0 * PI * j as f64 / n as f64).collect();
        let mf = m as f64;
        let basis = vec![
            vec![1.0; n],
            grid.iter().map(|e| e.cos()).collect(),
            grid.iter().map(|e| e.sin()).collect(),
            grid.iter().map(|e| (mf * e).cos()).collect(),
            grid.iter().map(|e| (mf * e).sin()).collect(),
        ];
        let f_max = (n / 2 - 1) as u32;
        let admissible = if mfold_restricted {
            (2..).map(|k| k * m).take_while(|&f| f <= f_max).collect()
        } else {
            (2..=f_max).filter(|&f| f != m).collect()
        };
        Self {
            m,
            n,
            mfold_restricted,
            basis,
            admissible,
        }
    }

    /// Component of q in the admissible subspace.
    pub fn project(&self, q: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut out = vec![0.0; n];
        for &f in &self.admissible {
            let ff = f as f64;
            let mut cc = 0.0;
            let mut cs = 0.0;
            for (j, &qj) in q.iter().enumerate() {
                let e = 2.0 * PI * j as f64 / n as f64;
                cc += qj * (ff * e).cos();
                cs += qj * (ff * e).sin();
            }
            let scale = 2.0 / n as f64;
            for (j, o) in out.iter_mut().enumerate() {
                let e = 2.0 * PI * j as f64 / n as f64;
                *o += scale * (cc * (ff * e).cos() + cs * (ff * e).sin());
            }
        }
        out
    }
}

/// Largest eigenvalue of the symmetrized quadratic form on the admissible
/// subspace; strictly negative when the wave is a constrained maximum.
pub fn constrained_max_eigenvalue(op: &LinearizedOperator, cs: &ConstraintSet) -> Result<f64> {
    ensure!(cs.n == op.n(), "grid mismatch: {} vs {}", cs.n, op.n());
    ensure!(!cs.admissible.is_empty(), "no admissible modes on this grid");
    let n = op.n();
    let h = 2.0 * PI / n as f64;

    // h-orthonormal trigonometric basis of the admissible subspace
    let norm = 1.0 / PI.sqrt();
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(2 * cs.admissible.len());
    for &f in &cs.admissible {
        let ff = f as f64;
        basis.push(
            (0..n)
                .map(|j| norm * (ff * 2.0 * PI * j as f64 / n as f64).cos())
                .collect(),
        );
        basis.push(
            (0..n)
                .map(|j| norm * (ff * 2.0 * PI * j as f64 / n as f64).sin())
                .collect(),
        );
    }

    let dim = basis.len();
    let images: Vec<Vec<f64>> = basis.iter().map(|v| op.apply(v)).collect();
    let mut b = DMatrix::zeros(dim, dim);
    for a in 0..dim {
        for c in 0..dim {
            let dot: f64 = basis[a].iter().zip(&images[c]).map(|(x, y)| x * y).sum();
            b[(a, c)] = h * dot;
        }
    }
    let sym = (&b + b.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    eig.eigenvalues
        .iter()
        .copied()
        .max_by(|a, b| a.partial_cmp(b).unwrap())
        .ok_or_else(|| anyhow::anyhow!("empty spectrum"))
}

/// Full constrained spectrum, descending; first entry equals
/// `constrained_max_eigenvalue`.
pub fn constrained_spectrum(op: &LinearizedOperator, cs: &ConstraintSet) -> Result<Vec<f64>> {
    ensure!(cs.n == op.n(), "grid mismatch");
    let n = op.n();
    let h = 2.0 * PI / n as f64;
    let norm = 1.0 / PI.sqrt();
    let mut basis: Vec<Vec<f64>> = Vec::new();
    for &f in &cs.admissible {
        let ff = f as f64;
        for phase in 0..2 {
            basis.push(
                (0..n)
                    .map(|j| {
                        let arg = ff * 2.0 * PI * j as f64 / n as f64;
                        norm * if phase == 0 { arg.cos() } else { arg.sin() }
                    })
                    .collect(),
            );
        }
    }
    let dim = basis.len();
    let images: Vec<Vec<f64>> = basis.iter().map(|v| op.apply(v)).collect();
    let mut b = DMatrix::zeros(dim, dim);
    for a in 0..dim {
        for c in 0..dim {
            let dot: f64 = basis[a].iter().zip(&images[c]).map(|(x, y)| x * y).sum();
            b[(a, c)] = h * dot;
        }
    }
    let sym = (&b + b.transpose()) * 0.5;
    let mut eigs: Vec<f64> = SymmetricEigen::new(sym).eigenvalues.iter().copied().collect();
    eigs.sort_by(|a, b| b.partial_cmp(a).unwrap());
    Ok(eigs)
}

/// Disc-limit eigenvalue of the constrained form on the mode n:
/// -1/(2m) + 1/(2n).
pub fn disc_limit_eigenvalue(m: u32, n: u32) -> f64 {
    assert!(n >= 1);
    -0.5 / m as f64 + 0.5 / n as f64
}

/// Trigonometric boundary graph h(theta).
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct GraphPerturbation {
    pub constant: f64,
    /// (frequency, amplitude) cosine terms
    pub cos_terms: Vec<(u32, f64)>,
    /// (frequency, amplitude) sine terms
    pub sin_terms: Vec<(u32, f64)>,
}

impl GraphPerturbation {
    pub fn eval(&self, theta: f64) -> f64 {
        let mut v = self.constant;
        for &(f, a) in &self.cos_terms {
            v += a * (f as f64 * theta).cos();
        }
        for &(f, a) in &self.sin_terms {
            v += a * (f as f64 * theta).sin();
        }
        v
    }

    pub fn eval_prime(&self, theta: f64) -> f64 {
        let mut v = 0.0;
        for &(f, a) in &self.cos_terms {
            v -= a * f as f64 * (f as f64 * theta).sin();
        }
        for &(f, a) in &self.sin_terms {
            v += a * f as f64 * (f as f64 * theta).cos();
        }
        v
    }

    pub fn sup_norm_bound(&self) -> f64 {
        self.constant.abs()
            + self.cos_terms.iter().map(|t| t.1.abs()).sum::<f64>()
            + self.sin_terms.iter().map(|t| t.1.abs()).sum::<f64>()
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            constant: self.constant * s,
            cos_terms: self.cos_terms.iter().map(|&(f, a)| (f, a * s)).collect(),
            sin_terms: self.sin_terms.iter().map(|&(f, a)| (f, a * s)).collect(),
        }
    }
}

/// Boundary curve of the perturbed patch r = r0 + g + h with analytic
/// tangents.
pub(crate) fn perturbed_curve(wave: &KelvinWave, pert: &GraphPerturbation, n: usize) -> Curve {
    let fb = wave.boundary();
    let mut pts = Vec::with_capacity(n);
    let mut tan = Vec::with_capacity(n);
    for j in 0..n {
        let theta = 2.0 * PI * j as f64 / n as f64;
        let (s, c) = theta.sin_cos();
        let r = fb.radius(theta) + pert.eval(theta);
        let dr = fb.g_prime(theta) + pert.eval_prime(theta);
        pts.push(Vec2::new(r * c, r * s));
        tan.push(Vec2::new(dr * c - r * s, dr * s + r * c));
    }
    Curve::from_parts(pts, tan)
}

/// Patch integrals of the perturbed wave minus the wave itself, by radial
/// antiderivatives and a high-resolution trapezoid in theta:
/// (mass, angular impulse, r^m sin(m theta) moment).
fn constraint_defects(wave: &KelvinWave, pert: &GraphPerturbation, n: usize) -> [f64; 3] {
    let fb = wave.boundary();
    let m = wave.m;
    let h = 2.0 * PI / n as f64;
    let mut d = [0.0; 3];
    for j in 0..n {
        let theta = 2.0 * PI * j as f64 / n as f64;
        let r = fb.radius(theta);
        let rh = r + pert.eval(theta);
        d[0] += 0.5 * (rh * rh - r * r);
        d[1] += 0.25 * (rh.powi(4) - r.powi(4));
        let p = (m + 2) as i32;
        d[2] += (m as f64 * theta).sin() * (rh.powi(p) - r.powi(p)) / p as f64;
    }
    [d[0] * h, d[1] * h, d[2] * h]
}

/// Adjust the constant and the cos/sin m-frequency components of h so that
/// the perturbed patch matches the wave's mass, angular impulse, and
/// r^m sin(m theta) moment exactly (Newton on the three defects).
pub fn make_admissible(wave: &KelvinWave, pert: &GraphPerturbation) -> Result<GraphPerturbation> {
    let m = wave.m;
    let n = 4096;
    let mut adj = [0.0_f64; 3];
    let build = |adj: &[f64; 3]| -> GraphPerturbation {
        let mut p = pert.clone();
        p.constant += adj[0];
        p.cos_terms.push((m, adj[1]));
        p.sin_terms.push((m, adj[2]));
        p
    };
    for _ in 0..30 {
        let f = constraint_defects(wave, &build(&adj), n);
        let worst = f.iter().fold(0.0_f64, |a, b| a.max(b.abs()));
        if worst < 1e-14 {
            return Ok(build(&adj));
        }
        let mut jac = [[0.0; 3]; 3];
        let step = 1e-8;
        for col in 0..3 {
            let mut a2 = adj;
            a2[col] += step;
            let f2 = constraint_defects(wave, &build(&a2), n);
            for row in 0..3 {
                jac[row][col] = (f2[row] - f[row]) / step;
            }
        }
        let delta = solve3(&jac, &[-f[0], -f[1], -f[2]])?;
        for k in 0..3 {
            adj[k] += delta[k];
        }
    }
    anyhow::bail!("constraint adjustment did not converge")
}

fn solve3(a: &[[f64; 3]; 3], b: &[f64; 3]) -> Result<[f64; 3]> {
    let mut m = DMatrix::zeros(3, 3);
    for i in 0..3 {
        for j in 0..3 {
            m[(i, j)] = a[i][j];
        }
    }
    let rhs = nalgebra::DVector::from_column_slice(b);
    let sol = m
        .lu()
        .solve(&rhs)
        .ok_or_else(|| anyhow::anyhow!("singular constraint Jacobian"))?;
    Ok([sol[0], sol[1], sol[2]])
}

/// Direct energy difference E[omega_h] - E[omega*], the independent oracle
/// for the quadratic form. Both energies use the same n-node double
/// boundary quadrature so the discretization bias cancels.
pub fn energy_difference_bruteforce(
    wave: &KelvinWave,
    pert: &GraphPerturbation,
    n: usize,
) -> Result<f64> {
    ensure!(
        pert.sup_norm_bound() <= 0.05,
        "perturbation sup bound {:.3} too large for the graph expansion",
        pert.sup_norm_bound()
    );
    let base = wave.curve(n);
    let perturbed = perturbed_curve(wave, pert, n);
    let e0 = field::energy_of_curves(&[(base, 1.0)]);
    let e1 = field::energy_of_curves(&[(perturbed, 1.0)]);
    Ok(e1 - e0)
}

/// q = J0 h sampled on the operator grid.
pub fn graph_to_q(op: &LinearizedOperator, pert: &GraphPerturbation) -> Vec<f64> {
    op.grid
        .iter()
        .zip(&op.j0)
        .map(|(&eta, &j0)| j0 * pert.eval(eta))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vstate::solve_kelvin;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    #[test]
    fn disc_limit_i0_uniform() {
        let m = 3;
        let op = assemble_linearized(&KelvinWave::disc(m), 192).unwrap();
        for &v in &op.i0 {
            assert!((v + 1.0 / (2.0 * m as f64)).abs() < 1e-8, "I0 = {v}");
        }
    }

    #[test]
    fn disc_limit_kernel_eigenvalues() {
        let op = assemble_linearized(&KelvinWave::disc(3), 192).unwrap();
        for f in 1..=16u32 {
            let lam = op.kernel_eigenvalue(f);
            assert!(
                (lam - 0.5 / f as f64).abs() < 1e-8,
                "f = {f}: {lam} vs {}",
                0.5 / f as f64
            );
        }
    }

    #[test]
    fn i0_first_order_in_beta() {
        let m = 3u32;
        let beta = 0.05;
        let w = solve_kelvin(m, beta).unwrap();
        let op = assemble_linearized(&w, 192).unwrap();
        let bound = 1.2 * (0.5 + 0.5 / m as f64) * beta;
        for &v in &op.i0 {
            assert!(
                (v + 0.5 / m as f64).abs() <= bound,
                "I0 deviation {} above first-order bound {bound}",
                (v + 0.5 / m as f64).abs()
            );
        }
    }

    #[test]
    fn kernel_matrix_symmetric() {
        let w = solve_kelvin(3, 0.03).unwrap();
        let op = assemble_linearized(&w, 126).unwrap();
        let mut worst: f64 = 0.0;
        for i in 0..op.n() {
            for j in 0..op.n() {
                worst = worst.max((op.kernel[(i, j)] - op.kernel[(j, i)]).abs());
            }
        }
        assert!(worst < 1e-12, "asymmetry {worst}");
    }

    #[test]
    fn pairing_symmetric_on_random_vectors() {
        let w = solve_kelvin(3, 0.02).unwrap();
        let op = assemble_linearized(&w, 126).unwrap();
        let mut rng = StdRng::seed_from_u64(7);
        for _ in 0..5 {
            let p: Vec<f64> = (0..op.n()).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let q: Vec<f64> = (0..op.n()).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let d = (op.pairing(&p, &q) - op.pairing(&q, &p)).abs();
            assert!(d < 1e-10, "pairing asymmetry {d}");
        }
    }

    #[test]
    fn constraint_basis_orthogonal() {
        let cs = ConstraintSet::new(126, 3, true);
        let h = 2.0 * PI / 126.0;
        for a in 0..cs.basis.len() {
            for b in (a + 1)..cs.basis.len() {
                let dot: f64 =
                    cs.basis[a].iter().zip(&cs.basis[b]).map(|(x, y)| x * y).sum::<f64>() * h;
                assert!(dot.abs() < 1e-12, "basis {a}.{b} overlap {dot}");
            }
        }
    }

    #[test]
    fn constrained_direction_projects_to_zero() {
        let cs = ConstraintSet::new(126, 3, true);
        let q: Vec<f64> = (0..126)
            .map(|j| (3.0 * 2.0 * PI * j as f64 / 126.0).cos())
            .collect();
        let p = cs.project(&q);
        let norm: f64 = p.iter().map(|x| x * x).sum::<f64>().sqrt();
        assert!(norm < 1e-10, "projection norm {norm}");
    }

    #[test]
    fn coercive_with_mfold_indefinite_without() {
        let m = 3;
        let w = solve_kelvin(m, 0.02).unwrap();
        let op = assemble_linearized(&w, 192).unwrap();
        let with = constrained_max_eigenvalue(&op, &ConstraintSet::new(192, m, true)).unwrap();
        assert!(with <= -0.02, "constrained max eigenvalue {with}");
        // disc-limit prediction for the leading admissible mode n = 2m
        let predict = disc_limit_eigenvalue(m, 2 * m);
        assert!((with - predict).abs() < 0.02, "{with} vs {predict}");
        let without =
            constrained_max_eigenvalue(&op, &ConstraintSet::new(192, m, false)).unwrap();
        assert!(without > 0.05, "unrestricted max eigenvalue {without}");
        assert!(
            (without - disc_limit_eigenvalue(m, 2)).abs() < 0.02,
            "{without} vs {}",
            disc_limit_eigenvalue(m, 2)
        );
    }

    #[test]
    fn disc_limit_eigenvalue_table() {
        assert_eq!(disc_limit_eigenvalue(3, 3), 0.0);
        assert!((disc_limit_eigenvalue(3, 6) + 1.0 / 12.0).abs() < 1e-15);
        assert!((disc_limit_eigenvalue(2, 4) + 1.0 / 8.0).abs() < 1e-15);
    }

    #[test]
    fn zero_perturbation_zero_energy_difference() {
        let w = solve_kelvin(3, 0.02).unwrap();
        let d = energy_difference_bruteforce(&w, &GraphPerturbation::default(), 256).unwrap();
        assert_eq!(d, 0.0);
    }

    #[test]
    fn single_mode_oracle_agreement() {
        let m = 3u32;
        let w = solve_kelvin(m, 0.02).unwrap();
        let op = assemble_linearized(&w, 252).unwrap();
        let eps = 1e-3;
        let raw = GraphPerturbation {
            constant: 0.0,
            cos_terms: vec![(2 * m, eps)],
            sin_terms: vec![],
        };
        let pert = make_admissible(&w, &raw).unwrap();
        let de = energy_difference_bruteforce(&w, &pert, 512).unwrap();
        let q = graph_to_q(&op, &pert);
        let predicted = op.half_quadratic_form(&q);
        let ratio = de / predicted;
        assert!(
            (ratio - 1.0).abs() < 0.1,
            "oracle ratio {ratio}: direct {de:.3e}, quadratic form {predicted:.3e}"
        );
        assert!(de < 0.0, "admissible perturbation must lower the energy");
        // disc-limit magnitude: dE ~ (pi eps^2 / 2) lambda_{2m}
        let scale = 0.5 * PI * eps * eps * disc_limit_eigenvalue(m, 2 * m);
        assert!(
            (de / scale - 1.0).abs() < 0.2,
            "dE {de:.3e} vs disc-limit scale {scale:.3e}"
        );
    }

    #[test]
    fn random_admissible_perturbations_match_form() {
        let m = 3u32;
        let w = solve_kelvin(m, 0.02).unwrap();
        let op = assemble_linearized(&w, 252).unwrap();
        let mut rng = StdRng::seed_from_u64(42);
        for trial in 0..5 {
            let mut raw = GraphPerturbation::default();
            for k in 2..=4u32 {
                raw.cos_terms.push((k * m, 1e-3 * rng.gen_range(-1.0..1.0)));
                raw.sin_terms.push((k * m, 1e-3 * rng.gen_range(-1.0..1.0)));
            }
            let pert = make_admissible(&w, &raw).unwrap();
            let de = energy_difference_bruteforce(&w, &pert, 512).unwrap();
            let q = graph_to_q(&op, &pert);
            let predicted = op.half_quadratic_form(&q);
            let ratio = de / predicted;
            assert!(
                (ratio - 1.0).abs() < 0.1,
                "trial {trial}: ratio {ratio} (direct {de:.3e}, form {predicted:.3e})"
            );
            assert!(de < 0.0, "trial {trial}: energy difference {de:.3e} not negative");
        }
    }

    #[test]
    fn inflation_violates_the_expansion() {
        // Pure inflation breaks the mass and impulse constraints, so the
        // constrained quadratic form does not describe its energy change.
        // At r0 = 1 the first variation under inflation is degenerate
        // (dE/dR = -pi R^3 ln R vanishes), leaving a true second variation
        // of -pi eps^2 / 2 against the form's -pi eps^2 / (2m): ratio ~ m.
        let w = solve_kelvin(3, 0.02).unwrap();
        let op = assemble_linearized(&w, 192).unwrap();
        let pert = GraphPerturbation {
            constant: 1e-3,
            ..Default::default()
        };
        let de = energy_difference_bruteforce(&w, &pert, 384).unwrap();
        let predicted = op.half_quadratic_form(&graph_to_q(&op, &pert));
        let ratio = de / predicted;
        assert!(
            ratio > 1.5,
            "expected the form to underestimate a non-admissible direction, ratio {ratio}"
        );
    }

    #[test]
    fn eigenvalue_stable_under_grid_doubling() {
        let m = 3;
        let w = solve_kelvin(m, 0.02).unwrap();
        let a = constrained_max_eigenvalue(
            &assemble_linearized(&w, 126).unwrap(),
            &ConstraintSet::new(126, m, true),
        )
        .unwrap();
        let b = constrained_max_eigenvalue(
            &assemble_linearized(&w, 252).unwrap(),
            &ConstraintSet::new(252, m, true),
        )
        .unwrap();
        assert!((a - b).abs() < 1e-8, "{a} vs {b}");
    }

    #[test]
    fn assemble_rejects_bad_grids() {
        let w = KelvinWave::disc(3);
        assert!(assemble_linearized(&w, 32).is_err());
        assert!(assemble_linearized(&w, 100).is_err()); // not a multiple of 6
        let mut unconverged = KelvinWave::disc(3);
        unconverged.beta = 0.01;
        unconverged.residual = 1.0;
        assert!(assemble_linearized(&unconverged, 96).is_err());
    }
}
