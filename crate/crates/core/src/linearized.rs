//! Linearized fluctuation dynamics around a steady state.
//!
//! Fluctuations `dz = -A z dt + B dW` in the doubled basis
//! `(da1, da1+, da2, da2+, da3, da3+)` with `D = B B^T`. The intracavity
//! spectral matrix is `S(w) = (A + iw)^-1 D (A^T - iw)^-1`; output quadrature
//! spectra follow from the input-output relations with vacuum normalized to 1.

use nalgebra::{Matrix6, SMatrix};
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::model::{FieldState, QuadCovariance, SystemParams};

pub type CMatrix6 = Matrix6<C64>;

/// Imaginary residue allowed in the output quadrature matrix.
pub const HERMITIAN_TOL: f64 = 1e-10;
const CONDITION_WARN: f64 = 1e12;

fn c(re: f64) -> C64 {
    C64::new(re, 0.0)
}

/// Drift matrix `A` at a steady state.
pub fn build_drift(p: &SystemParams, ss: &FieldState) -> CMatrix6 {
    let [a1, a2, a3] = ss.alpha;
    let [b1, b2, b3] = ss.alpha_plus;
    let (k1, k2) = (p.kappa1, p.kappa2);
    let z = C64::default();
    #[rustfmt::skip]
    let a = CMatrix6::new(
        c(p.gamma1), -k1 * a2,    -k1 * b1,    z,           z,           z,
        -k1 * b2,    c(p.gamma1), z,           -k1 * a1,    z,           z,
        k1 * a1,     z,           c(p.gamma2), -k2 * a3,    -k2 * b2,    z,
        z,           k1 * b1,     -k2 * b3,    c(p.gamma2), z,           -k2 * a2,
        z,           z,           k2 * a2,     z,           c(p.gamma3), z,
        z,           z,           z,           k2 * b2,     z,           c(p.gamma3),
    );
    a
}

/// Diagonal diffusion matrix `D`; the fourth-harmonic entries are zero.
pub fn build_diffusion(p: &SystemParams, ss: &FieldState) -> CMatrix6 {
    let mut d = CMatrix6::zeros();
    d[(0, 0)] = p.kappa1 * ss.alpha[1];
    d[(1, 1)] = p.kappa1 * ss.alpha_plus[1];
    d[(2, 2)] = p.kappa2 * ss.alpha[2];
    d[(3, 3)] = p.kappa2 * ss.alpha_plus[2];
    d
}

/// Drift and diffusion matrices at one steady state.
#[derive(Clone, Debug)]
pub struct DriftDiffusion {
    pub a_matrix: CMatrix6,
    pub d_matrix: CMatrix6,
    pub steady_state: FieldState,
    pub gammas: [f64; 3],
}

impl DriftDiffusion {
    pub fn new(p: &SystemParams, ss: &FieldState) -> Self {
        Self {
            a_matrix: build_drift(p, ss),
            d_matrix: build_diffusion(p, ss),
            steady_state: *ss,
            gammas: p.gammas(),
        }
    }

    pub fn eigenvalues(&self) -> Result<[C64; 6]> {
        stability_eigenvalues(&self.a_matrix)
    }

    /// Smallest real part among the eigenvalues of `A`; linearized spectra
    /// are only meaningful when this is positive.
    pub fn stability_margin(&self) -> Result<f64> {
        Ok(self.eigenvalues()?.iter().map(|l| l.re).fold(f64::INFINITY, f64::min))
    }

    pub fn spectrum(&self, omega: f64) -> Result<SpectrumResult> {
        let s_alpha = intracavity_spectrum(&self.a_matrix, &self.d_matrix, omega)?;
        let s_quad = output_from_intracavity(&self.gammas, &s_alpha, omega)?;
        Ok(SpectrumResult { omega, s_alpha, s_quad })
    }

    pub fn output_quad(&self, omega: f64) -> Result<QuadCovariance> {
        let s_alpha = intracavity_spectrum(&self.a_matrix, &self.d_matrix, omega)?;
        output_from_intracavity(&self.gammas, &s_alpha, omega)
    }
}

#[derive(Clone, Debug)]
pub struct SpectrumResult {
    pub omega: f64,
    pub s_alpha: CMatrix6,
    pub s_quad: QuadCovariance,
}

/// Eigenvalues of the drift matrix, ordered by ascending real part.
///
/// Real matrices (real steady states) go through the real Schur form.
pub fn stability_eigenvalues(a: &CMatrix6) -> Result<[C64; 6]> {
    // Schur convergence threshold scaled to the matrix entries
    let eps = 1e-13 * a.iter().map(|z| z.norm()).fold(1.0, f64::max);
    let mut ev: [C64; 6] = if a.iter().all(|z| z.im == 0.0) {
        let schur = a
            .map(|z| z.re)
            .try_schur(eps, 100_000)
            .ok_or(Error::EigenSolverFailure)?;
        let ev = schur.complex_eigenvalues();
        std::array::from_fn(|i| ev[i])
    } else {
        let schur = a.try_schur(eps, 100_000).ok_or(Error::EigenSolverFailure)?;
        let (_, t) = schur.unpack();
        std::array::from_fn(|i| t[(i, i)])
    };
    if ev.iter().any(|l| !l.re.is_finite() || !l.im.is_finite()) {
        return Err(Error::EigenSolverFailure);
    }
    ev.sort_by(|x, y| x.re.total_cmp(&y.re).then(x.im.total_cmp(&y.im)));
    Ok(ev)
}

fn lu_solve(m: CMatrix6, rhs: &CMatrix6, omega: f64) -> Result<CMatrix6> {
    let lu = m.lu();
    if log::log_enabled!(log::Level::Warn) {
        if let Some(inv) = lu.try_inverse() {
            let cond = norm1(&m) * norm1(&inv);
            if cond > CONDITION_WARN {
                log::warn!("ill-conditioned solve at omega = {omega}: cond ~ {cond:.3e}");
            }
        }
    }
    lu.solve(rhs).ok_or(Error::SingularMatrix { omega })
}

fn norm1(m: &CMatrix6) -> f64 {
    m.column_iter()
        .map(|col| col.iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Intracavity spectral matrix `(A + iw)^-1 D (A^T - iw)^-1` by two LU solves.
///
/// `A^T` is the plain transpose.
pub fn intracavity_spectrum(a: &CMatrix6, d: &CMatrix6, omega: f64) -> Result<CMatrix6> {
    let iw = CMatrix6::identity() * C64::new(0.0, omega);
    // X = (A + iw)^-1 D
    let x = lu_solve(a + iw, d, omega)?;
    // S = X (A^T - iw)^-1  <=>  S^T = (A - iw)^-1 X^T
    let st = lu_solve(a - iw, &x.transpose(), omega)?;
    Ok(st.transpose())
}

/// Map from the doubled amplitude basis to quadratures:
/// `X_i = da_i + da_i+`, `Y_i = -i (da_i - da_i+)`.
pub fn quadrature_transform() -> CMatrix6 {
    let mut t = CMatrix6::zeros();
    for m in 0..3 {
        let (r, col) = (2 * m, 2 * m);
        t[(r, col)] = c(1.0);
        t[(r, col + 1)] = c(1.0);
        t[(r + 1, col)] = C64::new(0.0, -1.0);
        t[(r + 1, col + 1)] = C64::new(0.0, 1.0);
    }
    t
}

/// Output quadrature spectra from an intracavity spectral matrix:
/// `S_out(Q_i, Q_j) = delta_ij + sqrt(g_i g_j) (S_ij + S_ji)` with `S` in the
/// quadrature basis.
pub fn output_from_intracavity(gammas: &[f64; 3], s_alpha: &CMatrix6, omega: f64) -> Result<QuadCovariance> {
    let t = quadrature_transform();
    let sq = t * s_alpha * t.transpose();
    let root: [f64; 6] = std::array::from_fn(|k| gammas[k / 2].sqrt());
    let mut out = SMatrix::<f64, 6, 6>::identity();
    let mut residue = 0.0f64;
    for i in 0..6 {
        for j in 0..6 {
            let v = root[i] * root[j] * (sq[(i, j)] + sq[(j, i)]);
            residue = residue.max(v.im.abs());
            out[(i, j)] += v.re;
        }
    }
    if !(residue <= HERMITIAN_TOL) {
        return Err(Error::NonHermitianResidue { omega, residue });
    }
    QuadCovariance::new(omega, out)
}

/// Output quadrature covariance at frequency `omega`.
pub fn output_quad_spectrum(p: &SystemParams, a: &CMatrix6, d: &CMatrix6, omega: f64) -> Result<QuadCovariance> {
    let s_alpha = intracavity_spectrum(a, d, omega)?;
    output_from_intracavity(&p.gammas(), &s_alpha, omega)
}

/// Stationary intracavity covariance `C` solving `A C + C A^T = D`.
///
/// Vectorizes the Lyapunov equation into a 36x36 complex linear system.
pub fn stationary_covariance(a: &CMatrix6, d: &CMatrix6) -> Result<CMatrix6> {
    // column-major vec: vec(A C) = (I (x) A) vec C, vec(C A^T) = (A (x) I) vec C
    let eye = CMatrix6::identity();
    let k = eye.kronecker(a) + a.kronecker(&eye);
    let rhs = nalgebra::SVector::<C64, 36>::from_column_slice(d.as_slice());
    let sol = k.lu().solve(&rhs).ok_or(Error::SingularMatrix { omega: 0.0 })?;
    Ok(CMatrix6::from_column_slice(sol.as_slice()))
}
