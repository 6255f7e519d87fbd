//! System parameters, doubled phase-space states and quadrature conventions.
//!
//! Mode indices run 1 = fundamental, 2 = second harmonic, 3 = fourth harmonic;
//! in code they are zero-based (`0`, `1`, `2`). Time is measured in units of
//! `1/gamma1`, and quadratures are normalized so that the vacuum variance is 1.

use nalgebra::{Matrix6, Vector6};
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

/// How [`validate_params`] treats a `gamma1` different from one.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Normalization {
    /// Rescale time so that `gamma1 == 1`.
    #[default]
    Rescale,
    /// Reject anything but `gamma1 == 1`.
    Reject,
}

/// Rates and pump amplitude for one cavity configuration.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SystemParams {
    /// Coupling between the fundamental and the second harmonic.
    pub kappa1: f64,
    /// Coupling between the second and the fourth harmonic.
    pub kappa2: f64,
    /// External pump amplitude at the fundamental.
    pub epsilon: C64,
    pub gamma1: f64,
    pub gamma2: f64,
    pub gamma3: f64,
}

impl SystemParams {
    pub fn new(kappa1: f64, kappa2: f64, epsilon: f64, gammas: [f64; 3]) -> Self {
        Self {
            kappa1,
            kappa2,
            epsilon: C64::new(epsilon, 0.0),
            gamma1: gammas[0],
            gamma2: gammas[1],
            gamma3: gammas[2],
        }
    }

    /// Loss rates indexed by mode.
    pub fn gammas(&self) -> [f64; 3] {
        [self.gamma1, self.gamma2, self.gamma3]
    }

    pub fn with_epsilon(mut self, epsilon: f64) -> Self {
        self.epsilon = C64::new(epsilon, 0.0);
        self
    }

    /// First parameter set: strong bipartite correlations, lower loss at
    /// the harmonics.
    pub fn regime1() -> Self {
        let kappa1 = 5e-3;
        Self::new(kappa1, 4.0 * kappa1, 105.0, [1.0, 0.5, 0.5])
    }

    /// Second parameter set: fast second-harmonic loss, slow fourth-harmonic loss.
    pub fn regime2() -> Self {
        let kappa1 = 1e-2;
        Self::new(kappa1, 0.5 * kappa1, 105.0, [1.0, 2.0, 0.25])
    }

    pub fn regime(n: u8) -> Option<Self> {
        match n {
            1 => Some(Self::regime1()),
            2 => Some(Self::regime2()),
            _ => None,
        }
    }
}

/// Validate rates and bring the parameters to canonical units (`gamma1 == 1`).
///
/// Rescaling divides every rate and the pump by `gamma1`; field amplitudes are
/// unchanged, only the time unit moves. The function is idempotent on its
/// output.
pub fn validate_params(p: SystemParams, norm: Normalization) -> Result<SystemParams> {
    let checks = [
        ("kappa1", p.kappa1),
        ("kappa2", p.kappa2),
        ("gamma1", p.gamma1),
        ("gamma2", p.gamma2),
        ("gamma3", p.gamma3),
    ];
    for (field, value) in checks {
        // NaN fails this comparison too
        if !(value > 0.0) || !value.is_finite() {
            return Err(Error::NonPositiveRate { field, value });
        }
    }
    if !p.epsilon.re.is_finite() || !p.epsilon.im.is_finite() {
        return Err(Error::InvalidConfig(format!("non-finite epsilon {}", p.epsilon)));
    }
    if p.gamma1 == 1.0 {
        return Ok(p);
    }
    match norm {
        Normalization::Reject => Err(Error::NotNormalized(p.gamma1)),
        Normalization::Rescale => {
            let s = p.gamma1;
            Ok(SystemParams {
                kappa1: p.kappa1 / s,
                kappa2: p.kappa2 / s,
                epsilon: p.epsilon / s,
                gamma1: 1.0,
                gamma2: p.gamma2 / s,
                gamma3: p.gamma3 / s,
            })
        }
    }
}

/// Six doubled phase-space amplitudes `(alpha_i, alpha_i^+)`.
///
/// On the classical manifold `alpha_plus[i] == alpha[i].conj()`; stochastic
/// trajectories leave it.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FieldState {
    pub alpha: [C64; 3],
    pub alpha_plus: [C64; 3],
}

impl FieldState {
    pub fn vacuum() -> Self {
        Self::classical([C64::new(0.0, 0.0); 3])
    }

    pub fn classical(alpha: [C64; 3]) -> Self {
        Self {
            alpha,
            alpha_plus: alpha.map(|a| a.conj()),
        }
    }

    pub fn is_classical(&self) -> bool {
        self.alpha.iter().zip(&self.alpha_plus).all(|(a, b)| a.conj() == *b)
    }

    /// Flatten to the ordering `(a1, a1+, a2, a2+, a3, a3+)` used by the
    /// drift and diffusion matrices.
    pub fn to_doubled(&self) -> [C64; 6] {
        let [a1, a2, a3] = self.alpha;
        let [b1, b2, b3] = self.alpha_plus;
        [a1, b1, a2, b2, a3, b3]
    }

    pub fn from_doubled(z: [C64; 6]) -> Self {
        Self {
            alpha: [z[0], z[2], z[4]],
            alpha_plus: [z[1], z[3], z[5]],
        }
    }

    /// Mean amplitude quadrature `X = a + a^+` of a mode.
    pub fn quadrature_x(&self, mode: usize) -> C64 {
        self.alpha[mode] + self.alpha_plus[mode]
    }

    /// Mean phase quadrature `Y = -i (a - a^+)` of a mode.
    pub fn quadrature_y(&self, mode: usize) -> C64 {
        -C64::i() * (self.alpha[mode] - self.alpha_plus[mode])
    }

    pub fn intensity(&self, mode: usize) -> f64 {
        (self.alpha_plus[mode] * self.alpha[mode]).re
    }

    pub fn is_finite(&self) -> bool {
        self.to_doubled().iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }
}

/// Deterministic part of the positive-P equations in the doubled space,
/// ordered like [`FieldState::to_doubled`].
pub fn positive_p_drift(s: &FieldState, p: &SystemParams) -> [C64; 6] {
    let [a1, a2, a3] = s.alpha;
    let [b1, b2, b3] = s.alpha_plus;
    let (k1, k2) = (p.kappa1, p.kappa2);
    [
        p.epsilon - p.gamma1 * a1 + k1 * b1 * a2,
        p.epsilon.conj() - p.gamma1 * b1 + k1 * a1 * b2,
        -p.gamma2 * a2 + k2 * b2 * a3 - 0.5 * k1 * a1 * a1,
        -p.gamma2 * b2 + k2 * a2 * b3 - 0.5 * k1 * b1 * b1,
        -p.gamma3 * a3 - 0.5 * k2 * a2 * a2,
        -p.gamma3 * b3 - 0.5 * k2 * b2 * b2,
    ]
}

/// Branch of the complex square root in the noise coefficients. Every
/// branch gives the same diffusion and hence the same moments; they differ
/// only pathwise.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum NoiseBranch {
    /// Cut along the negative real axis.
    #[default]
    Principal,
    /// `i sqrt(-z)`: cut along the positive real axis. The stationary
    /// harmonic amplitudes sit on the negative real axis, so this branch is
    /// continuous there and keeps trajectories driven by shared noise
    /// close together.
    PositiveCut,
}

impl NoiseBranch {
    pub fn sqrt(self, z: C64) -> C64 {
        match self {
            Self::Principal => z.sqrt(),
            Self::PositiveCut => C64::i() * (-z).sqrt(),
        }
    }
}

/// Positive-P noise coefficients `sqrt(k1 a2), sqrt(k1 a2+), sqrt(k2 a3), sqrt(k2 a3+)`
/// on the principal branch; they multiply independent real Wiener increments
/// on `a1, a1+, a2, a2+`.
pub fn noise_coefficients(s: &FieldState, p: &SystemParams) -> [C64; 4] {
    noise_coefficients_on(s, p, NoiseBranch::Principal)
}

pub fn noise_coefficients_on(s: &FieldState, p: &SystemParams, branch: NoiseBranch) -> [C64; 4] {
    [
        branch.sqrt(p.kappa1 * s.alpha[1]),
        branch.sqrt(p.kappa1 * s.alpha_plus[1]),
        branch.sqrt(p.kappa2 * s.alpha[2]),
        branch.sqrt(p.kappa2 * s.alpha_plus[2]),
    ]
}

/// Row/column of the `X` quadrature of a mode in a [`QuadCovariance`].
pub const fn x_index(mode: usize) -> usize {
    2 * mode
}

/// Row/column of the `Y` quadrature of a mode in a [`QuadCovariance`].
pub const fn y_index(mode: usize) -> usize {
    2 * mode + 1
}

/// Output spectral covariance at one analysis frequency in the basis
/// `(X1, Y1, X2, Y2, X3, Y3)`; the vacuum is the identity.
#[derive(Clone, Debug, PartialEq)]
pub struct QuadCovariance {
    pub omega: f64,
    pub matrix: Matrix6<f64>,
}

impl QuadCovariance {
    pub const SYMMETRY_TOL: f64 = 1e-10;

    pub fn new(omega: f64, matrix: Matrix6<f64>) -> Result<Self> {
        let asym = (matrix - matrix.transpose()).amax();
        if !(asym <= Self::SYMMETRY_TOL) {
            return Err(Error::Asymmetric(asym));
        }
        Ok(Self { omega, matrix })
    }

    pub fn vacuum(omega: f64) -> Self {
        Self {
            omega,
            matrix: Matrix6::identity(),
        }
    }

    /// Variance of the linear combination `sum_k u_k Q_k`.
    pub fn var(&self, u: &[f64; 6]) -> f64 {
        self.cov(u, u)
    }

    /// Covariance of two linear combinations of quadratures.
    pub fn cov(&self, u: &[f64; 6], v: &[f64; 6]) -> f64 {
        let u = Vector6::from_column_slice(u);
        let v = Vector6::from_column_slice(v);
        u.dot(&(self.matrix * v))
    }

    pub fn var_x(&self, mode: usize) -> f64 {
        self.matrix[(x_index(mode), x_index(mode))]
    }

    pub fn var_y(&self, mode: usize) -> f64 {
        self.matrix[(y_index(mode), y_index(mode))]
    }

    /// `V(X_i) V(Y_i)`, bounded below by one for physical states.
    pub fn uncertainty_product(&self, mode: usize) -> f64 {
        self.var_x(mode) * self.var_y(mode)
    }

    /// Largest magnitude among the `X`-`Y` cross entries.
    pub fn xy_cross_max(&self) -> f64 {
        let mut m = 0.0f64;
        for i in 0..3 {
            for j in 0..3 {
                m = m.max(self.matrix[(x_index(i), y_index(j))].abs());
            }
        }
        m
    }
}
