//! Tripartite inseparability, entanglement and steering witnesses evaluated
//! on an output quadrature covariance.
//!
//! Thresholds, with vacuum variance 1:
//! - `V_ij < 4` for any two pairs: inseparable; `sum V_ij < 8`: entangled;
//!   `sum V_ij < 4`: genuine tripartite steering.
//! - any `V_ijk < 4`: inseparable; `< 2`: genuine tripartite entanglement;
//!   `< 1`: genuine tripartite steering.
//! - `OBR_ijk < 1`: modes `j, k` jointly steer mode `i`;
//!   `OBR_123 + OBR_213 + OBR_312 < 1`: genuine tripartite steering.

use std::f64::consts::FRAC_1_SQRT_2;

use crate::error::{Error, Result};
use crate::model::{x_index, y_index, QuadCovariance};

const DEGENERATE: f64 = 1e-12;

/// Zero-based mode triples `(i, j, k)` labelling `V_12`, `V_13`, `V_23`
/// (the gain sits on `k`).
pub const PAIR_TRIPLES: [(usize, usize, usize); 3] = [(0, 1, 2), (0, 2, 1), (1, 2, 0)];
/// Triples labelling `V_123`, `V_231`, `V_312`.
pub const TRIPLE_TRIPLES: [(usize, usize, usize); 3] = [(0, 1, 2), (1, 2, 0), (2, 0, 1)];
/// Triples labelling `OBR_123`, `OBR_213`, `OBR_312` (mode `i` is steered).
pub const OBR_TRIPLES: [(usize, usize, usize); 3] = [(0, 1, 2), (1, 0, 2), (2, 0, 1)];

pub const PAIR_LABELS: [&str; 3] = ["V12", "V13", "V23"];
pub const TRIPLE_LABELS: [&str; 3] = ["V123", "V231", "V312"];
pub const OBR_LABELS: [&str; 3] = ["OBR123", "OBR213", "OBR312"];

/// Sign joining the two steering modes in the inferred variances.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum InferenceSign {
    #[default]
    Plus,
    Minus,
}

impl InferenceSign {
    fn factor(self) -> f64 {
        match self {
            Self::Plus => 1.0,
            Self::Minus => -1.0,
        }
    }
}

fn combo(terms: &[(usize, f64)]) -> [f64; 6] {
    let mut u = [0.0; 6];
    for &(idx, c) in terms {
        u[idx] += c;
    }
    u
}

/// Optimal gain on `Y_k` for the pair `(i, j)`: minimizes `V(Y_i + Y_j + g Y_k)`.
pub fn optimal_gain(s: &QuadCovariance, i: usize, j: usize, k: usize) -> Result<f64> {
    let (yi, yj, yk) = (y_index(i), y_index(j), y_index(k));
    let vk = s.matrix[(yk, yk)];
    if !(vk.abs() >= DEGENERATE) {
        return Err(Error::DegenerateVariance {
            context: format!("V(Y{})", k + 1),
            value: vk,
        });
    }
    Ok(-(s.matrix[(yk, yi)] + s.matrix[(yk, yj)]) / vk)
}

/// `V(X_i - X_j) + V(Y_i + Y_j + g Y_k)` for a given gain.
pub fn vlf_pair_with_gain(s: &QuadCovariance, i: usize, j: usize, k: usize, gain: f64) -> f64 {
    let dx = combo(&[(x_index(i), 1.0), (x_index(j), -1.0)]);
    let sy = combo(&[(y_index(i), 1.0), (y_index(j), 1.0), (y_index(k), gain)]);
    s.var(&dx) + s.var(&sy)
}

/// Pairwise inequality value `V_ij` with the optimized gain on mode `k`.
pub fn vlf_pair(s: &QuadCovariance, i: usize, j: usize, k: usize) -> Result<(f64, f64)> {
    let g = optimal_gain(s, i, j, k)?;
    Ok((vlf_pair_with_gain(s, i, j, k, g), g))
}

/// `V(X_i - (X_j + X_k)/sqrt2) + V(Y_i + (Y_j + Y_k)/sqrt2)`.
pub fn vlf_triple(s: &QuadCovariance, i: usize, j: usize, k: usize) -> f64 {
    let h = FRAC_1_SQRT_2;
    let x = combo(&[(x_index(i), 1.0), (x_index(j), -h), (x_index(k), -h)]);
    let y = combo(&[(y_index(i), 1.0), (y_index(j), h), (y_index(k), h)]);
    s.var(&x) + s.var(&y)
}

fn inferred(s: &QuadCovariance, target: usize, a: usize, b: usize, sign: f64, label: &str) -> Result<f64> {
    let u = combo(&[(target, 1.0)]);
    let w = combo(&[(a, 1.0), (b, sign)]);
    let vw = s.var(&w);
    if !(vw >= DEGENERATE) {
        return Err(Error::DegenerateVariance {
            context: label.to_string(),
            value: vw,
        });
    }
    let c = s.cov(&u, &w);
    Ok(s.var(&u) - c * c / vw)
}

/// Inferred variances of `X_i` and `Y_i` given joint measurements on `j, k`.
pub fn obr_inferred(s: &QuadCovariance, i: usize, j: usize, k: usize, sign: InferenceSign) -> Result<(f64, f64)> {
    let f = sign.factor();
    let vx = inferred(s, x_index(i), x_index(j), x_index(k), f, "X steering combination")?;
    let vy = inferred(s, y_index(i), y_index(j), y_index(k), f, "Y steering combination")?;
    Ok((vx, vy))
}

/// `OBR_ijk`, the product of the two inferred variances of mode `i`.
pub fn obr_product(s: &QuadCovariance, i: usize, j: usize, k: usize, sign: InferenceSign) -> Result<f64> {
    let (vx, vy) = obr_inferred(s, i, j, k, sign)?;
    Ok(vx * vy)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct CorrelationFlags {
    /// At least two `V_ij < 4`.
    pub inseparable_pairwise: bool,
    /// At least one `V_ijk < 4`.
    pub inseparable_triple: bool,
    pub tr_entangled_pairwise: bool,
    pub tr_genuine_steer_pairwise: bool,
    pub genuine_entangled_triple: bool,
    pub genuine_steer_triple: bool,
    /// `OBR_123 < 1`, `OBR_213 < 1`, `OBR_312 < 1`.
    pub steer_i_by_jk: [bool; 3],
    pub genuine_tri_steer: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CorrelationReport {
    pub omega: f64,
    /// `V_12, V_13, V_23`.
    pub v_pair: [f64; 3],
    /// Gains on modes 3, 2, 1 used for `v_pair`.
    pub gains: [f64; 3],
    /// `V_123, V_231, V_312`.
    pub v_triple: [f64; 3],
    /// `OBR_123, OBR_213, OBR_312`.
    pub obr: [f64; 3],
    pub sum_v_pair: f64,
    pub sum_obr: f64,
    pub flags: CorrelationFlags,
    /// Steering detected while no inseparability witness fires.
    pub witness_gap: bool,
}

/// Raw witness values at one frequency.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CorrelationValues {
    pub omega: f64,
    pub v_pair: [f64; 3],
    pub gains: [f64; 3],
    pub v_triple: [f64; 3],
    pub obr: [f64; 3],
}

pub fn evaluate(s: &QuadCovariance, sign: InferenceSign) -> Result<CorrelationValues> {
    let mut v_pair = [0.0; 3];
    let mut gains = [0.0; 3];
    for (n, &(i, j, k)) in PAIR_TRIPLES.iter().enumerate() {
        (v_pair[n], gains[n]) = vlf_pair(s, i, j, k)?;
    }
    let v_triple = TRIPLE_TRIPLES.map(|(i, j, k)| vlf_triple(s, i, j, k));
    let mut obr = [0.0; 3];
    for (n, &(i, j, k)) in OBR_TRIPLES.iter().enumerate() {
        obr[n] = obr_product(s, i, j, k, sign)?;
    }
    Ok(CorrelationValues {
        omega: s.omega,
        v_pair,
        gains,
        v_triple,
        obr,
    })
}

pub fn classify(v: &CorrelationValues) -> CorrelationReport {
    let sum_v_pair: f64 = v.v_pair.iter().sum();
    let sum_obr: f64 = v.obr.iter().sum();
    let flags = CorrelationFlags {
        inseparable_pairwise: v.v_pair.iter().filter(|&&x| x < 4.0).count() >= 2,
        inseparable_triple: v.v_triple.iter().any(|&x| x < 4.0),
        tr_entangled_pairwise: sum_v_pair < 8.0,
        tr_genuine_steer_pairwise: sum_v_pair < 4.0,
        genuine_entangled_triple: v.v_triple.iter().any(|&x| x < 2.0),
        genuine_steer_triple: v.v_triple.iter().any(|&x| x < 1.0),
        steer_i_by_jk: v.obr.map(|x| x < 1.0),
        genuine_tri_steer: sum_obr < 1.0,
    };
    let steering = flags.steer_i_by_jk.iter().any(|&b| b);
    let witnessed = flags.inseparable_pairwise || flags.inseparable_triple || flags.tr_entangled_pairwise;
    let witness_gap = steering && !witnessed;
    if witness_gap {
        log::debug!("omega = {}: steering without an inseparability witness", v.omega);
    }
    CorrelationReport {
        omega: v.omega,
        v_pair: v.v_pair,
        gains: v.gains,
        v_triple: v.v_triple,
        obr: v.obr,
        sum_v_pair,
        sum_obr,
        flags,
        witness_gap,
    }
}

/// All witnesses at one frequency with the default plus-sign inference.
pub fn report(s: &QuadCovariance) -> Result<CorrelationReport> {
    Ok(classify(&evaluate(s, InferenceSign::Plus)?))
}
