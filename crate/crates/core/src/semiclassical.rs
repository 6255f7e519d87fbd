//! Noise-free dynamics: stationary states and the self-pulsing instability.

use std::collections::VecDeque;

use nalgebra::{SMatrix, SVector};
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::linearized::{build_drift, DriftDiffusion};
use crate::model::{FieldState, SystemParams};
use crate::ode::{Dopri5, Tolerances};

/// Relative peak-to-peak modulation of `|a1|^2` above which a tail counts as pulsing.
pub const PULSING_THRESHOLD: f64 = 1e-6;
/// Shortest tail accepted by [`detect_pulsing`], in units of `1/gamma1`.
pub const MIN_TAIL_SPAN: f64 = 20.0;

/// Time derivative of the three mode amplitudes with `a+ = conj(a)`.
pub fn semiclassical_derivative(s: &FieldState, p: &SystemParams) -> [C64; 3] {
    let [a1, a2, a3] = s.alpha;
    let (k1, k2) = (p.kappa1, p.kappa2);
    [
        p.epsilon - p.gamma1 * a1 + k1 * a1.conj() * a2,
        -p.gamma2 * a2 + k2 * a2.conj() * a3 - 0.5 * k1 * a1 * a1,
        -p.gamma3 * a3 - 0.5 * k2 * a2 * a2,
    ]
}

/// Largest `|da_i/dt|` over the three modes.
pub fn residual(s: &FieldState, p: &SystemParams) -> f64 {
    semiclassical_derivative(s, p)
        .iter()
        .map(|d| d.norm())
        .fold(0.0, f64::max)
}

fn pack(alpha: &[C64; 3]) -> [f64; 6] {
    [
        alpha[0].re,
        alpha[0].im,
        alpha[1].re,
        alpha[1].im,
        alpha[2].re,
        alpha[2].im,
    ]
}

fn unpack(y: &[f64; 6]) -> [C64; 3] {
    [C64::new(y[0], y[1]), C64::new(y[2], y[3]), C64::new(y[4], y[5])]
}

#[derive(Clone, Copy, Debug)]
pub struct SteadyStateOptions {
    /// Residual (max `|da/dt|`) below which the state counts as stationary.
    pub tol: f64,
    pub t_max: f64,
    pub tolerances: Tolerances,
    /// Transient discarded before tail sampling.
    pub discard: f64,
    /// Length of the retained tail.
    pub tail_span: f64,
    pub sample_dt: f64,
    /// Displacement of every quadrature of the initial vacuum. With a real
    /// pump the real axis is invariant, so an unperturbed start can never
    /// leave an unstable fixed point through a phase-quadrature mode.
    pub seed_perturbation: f64,
}

impl Default for SteadyStateOptions {
    fn default() -> Self {
        Self {
            tol: 1e-12,
            t_max: 2000.0,
            tolerances: Tolerances::default(),
            discard: 50.0,
            tail_span: 100.0,
            sample_dt: 0.05,
            seed_perturbation: 1e-6,
        }
    }
}

/// Uniformly sampled trajectory segment.
#[derive(Clone, Debug, Default)]
pub struct TimeSeries {
    pub t: Vec<f64>,
    pub states: Vec<FieldState>,
}

impl TimeSeries {
    pub fn span(&self) -> f64 {
        match (self.t.first(), self.t.last()) {
            (Some(a), Some(b)) => b - a,
            _ => 0.0,
        }
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }
}

#[derive(Clone, Debug)]
pub struct SteadyStateResult {
    pub state: FieldState,
    pub residual: f64,
    pub converged: bool,
    /// Time at which integration stopped.
    pub t_final: f64,
    pub trajectory_tail: Option<TimeSeries>,
}

/// Integrate from the vacuum until the residual falls below `opts.tol`.
///
/// Returns `NotStationary` when the run reaches `t_max` on a sustained
/// oscillation, and an unconverged result (with its tail) when the
/// trajectory is still relaxing.
pub fn find_steady_state(p: &SystemParams, opts: &SteadyStateOptions) -> Result<SteadyStateResult> {
    let vac = FieldState::vacuum();
    if residual(&vac, p) < opts.tol {
        return Ok(SteadyStateResult {
            state: vac,
            residual: residual(&vac, p),
            converged: true,
            t_final: 0.0,
            trajectory_tail: None,
        });
    }
    let rhs = |_t: f64, y: &[f64; 6]| {
        let d = semiclassical_derivative(&FieldState::classical(unpack(y)), p);
        pack(&d)
    };
    let mut ode = Dopri5::new(rhs, 0.0, [opts.seed_perturbation; 6], opts.tolerances);
    let max_samples = (opts.tail_span / opts.sample_dt).ceil() as usize + 1;
    let mut tail: VecDeque<(f64, FieldState)> = VecDeque::with_capacity(max_samples + 1);
    let mut k = 0u64;
    loop {
        k += 1;
        let t_next = (k as f64 * opts.sample_dt).min(opts.t_max);
        ode.advance_to(t_next)?;
        let state = FieldState::classical(unpack(&ode.y));
        if !state.is_finite() {
            return Err(Error::IntegrationFailure {
                t: ode.t,
                reason: "non-finite state".into(),
            });
        }
        let res = residual(&state, p);
        if res < opts.tol {
            return Ok(SteadyStateResult {
                state,
                residual: res,
                converged: true,
                t_final: ode.t,
                trajectory_tail: None,
            });
        }
        if ode.t >= opts.discard {
            tail.push_back((ode.t, state));
            if tail.len() > max_samples {
                tail.pop_front();
            }
        }
        if ode.t >= opts.t_max {
            let (t, states) = tail.into_iter().unzip();
            let series = TimeSeries { t, states };
            let state = FieldState::classical(unpack(&ode.y));
            if series.span() >= MIN_TAIL_SPAN {
                let diag = detect_pulsing(&series, p)?;
                if diag.is_pulsing && modulation_plateaued(&series) {
                    return Err(Error::NotStationary {
                        period: diag.period_estimate.unwrap_or(f64::NAN),
                        modulation: diag.amplitude,
                    });
                }
            }
            return Ok(SteadyStateResult {
                residual: residual(&state, p),
                state,
                converged: false,
                t_final: ode.t,
                trajectory_tail: Some(series),
            });
        }
    }
}

fn peak_to_peak(xs: impl Iterator<Item = f64>) -> f64 {
    let (lo, hi) = xs.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| (lo.min(x), hi.max(x)));
    hi - lo
}

/// A decaying transient shrinks between the two halves of the tail; a limit
/// cycle does not.
fn modulation_plateaued(tail: &TimeSeries) -> bool {
    let n = tail.len() / 2;
    let first = peak_to_peak(tail.states[..n].iter().map(|s| s.intensity(0)));
    let second = peak_to_peak(tail.states[n..].iter().map(|s| s.intensity(0)));
    second >= 0.5 * first
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PulsingDiagnosis {
    pub is_pulsing: bool,
    /// Dominant period from upward mean crossings, when at least two exist.
    pub period_estimate: Option<f64>,
    /// Peak-to-peak `|a1|^2` over the last half of the tail, relative to its mean.
    pub amplitude: f64,
}

/// Classify a tail as self-pulsing from the modulation of `|a1|^2` over its
/// last half.
pub fn detect_pulsing(tail: &TimeSeries, p: &SystemParams) -> Result<PulsingDiagnosis> {
    let span_needed = MIN_TAIL_SPAN / p.gamma1;
    if tail.len() < 8 || tail.span() < span_needed {
        return Err(Error::InsufficientData(format!(
            "tail spans {:.3} with {} samples; need at least {span_needed}",
            tail.span(),
            tail.len()
        )));
    }
    let start = tail.len() / 2;
    let t = &tail.t[start..];
    let intensity: Vec<f64> = tail.states[start..].iter().map(|s| s.intensity(0)).collect();
    let mean = intensity.iter().sum::<f64>() / intensity.len() as f64;
    let ptp = peak_to_peak(intensity.iter().copied());
    let amplitude = if mean > 0.0 {
        ptp / mean
    } else if ptp > 0.0 {
        f64::INFINITY
    } else {
        0.0
    };
    let is_pulsing = amplitude > PULSING_THRESHOLD;

    let mut crossings = Vec::new();
    for k in 1..intensity.len() {
        let (u, v) = (intensity[k - 1] - mean, intensity[k] - mean);
        if u < 0.0 && v >= 0.0 {
            let frac = -u / (v - u);
            crossings.push(t[k - 1] + frac * (t[k] - t[k - 1]));
        }
    }
    let period_estimate = (is_pulsing && crossings.len() >= 2)
        .then(|| (crossings[crossings.len() - 1] - crossings[0]) / (crossings.len() - 1) as f64);
    Ok(PulsingDiagnosis {
        is_pulsing,
        period_estimate,
        amplitude,
    })
}

/// Newton iteration for a stationary point of the noise-free equations,
/// stable or not.
pub fn newton_stationary(p: &SystemParams, seed: &FieldState, tol: f64) -> Result<FieldState> {
    let mut alpha = seed.alpha;
    for _ in 0..100 {
        let s = FieldState::classical(alpha);
        let f = semiclassical_derivative(&s, p);
        if f.iter().all(|d| d.norm() < tol) {
            return Ok(s);
        }
        // real Jacobian from the complex one: F(a, a*) with a = x + iy
        let a = build_drift(p, &s);
        let mut jac = SMatrix::<f64, 6, 6>::zeros();
        for i in 0..3 {
            for j in 0..3 {
                let fa = -a[(2 * i, 2 * j)];
                let fac = -a[(2 * i, 2 * j + 1)];
                let dx = fa + fac;
                let dy = C64::i() * (fa - fac);
                jac[(2 * i, 2 * j)] = dx.re;
                jac[(2 * i + 1, 2 * j)] = dx.im;
                jac[(2 * i, 2 * j + 1)] = dy.re;
                jac[(2 * i + 1, 2 * j + 1)] = dy.im;
            }
        }
        let rhs = SVector::<f64, 6>::from(pack(&f));
        let delta = jac.lu().solve(&rhs).ok_or_else(|| Error::IntegrationFailure {
            t: 0.0,
            reason: "singular Newton Jacobian".into(),
        })?;
        let mut y = pack(&alpha);
        for k in 0..6 {
            y[k] -= delta[k];
        }
        alpha = unpack(&y);
    }
    Err(Error::IntegrationFailure {
        t: 0.0,
        reason: "Newton iteration did not converge".into(),
    })
}

fn margin_at(p: &SystemParams, eps: f64, seed: &FieldState) -> Result<(FieldState, f64)> {
    let q = p.with_epsilon(eps);
    let ss = newton_stationary(&q, seed, 1e-11)?;
    let m = DriftDiffusion::new(&q, &ss).stability_margin()?;
    Ok((ss, m))
}

#[derive(Clone, Copy, Debug)]
pub struct Threshold {
    /// Critical pump amplitude (midpoint of the final bracket).
    pub epsilon: f64,
    /// Last stable and first unstable pump values.
    pub bracket: (f64, f64),
}

/// Smallest real pump at which an eigenvalue of the drift matrix leaves the
/// right half-plane, located by a scan of `n_steps` followed by bisection.
///
/// The steady-state branch is followed by Newton continuation from the
/// stable state reached by integration at `eps_range.0`.
pub fn pulsing_threshold(p: &SystemParams, eps_range: (f64, f64), n_steps: usize) -> Result<Threshold> {
    let (lo, hi) = eps_range;
    let n = n_steps.max(1);
    let start = find_steady_state(&p.with_epsilon(lo), &SteadyStateOptions::default())?;
    let (mut prev_state, m0) = margin_at(p, lo, &start.state)?;
    if m0 <= 0.0 {
        return Err(Error::NoThresholdInRange { lo, hi });
    }
    let mut prev_eps = lo;
    for k in 1..=n {
        let eps = lo + (hi - lo) * k as f64 / n as f64;
        let (state, m) = margin_at(p, eps, &prev_state)?;
        if m <= 0.0 {
            let (mut a, mut b) = (prev_eps, eps);
            let mut seed = prev_state;
            while b - a > 1e-9 * b.abs().max(1.0) {
                let mid = 0.5 * (a + b);
                let (s, m) = margin_at(p, mid, &seed)?;
                if m > 0.0 {
                    a = mid;
                    seed = s;
                } else {
                    b = mid;
                }
            }
            return Ok(Threshold {
                epsilon: 0.5 * (a + b),
                bracket: (a, b),
            });
        }
        prev_state = state;
        prev_eps = eps;
    }
    Err(Error::NoThresholdInRange { lo, hi })
}

/// Pump values on `grid` at which forward integration ends in a limit cycle.
pub fn pulsing_scan(p: &SystemParams, grid: &[f64], opts: &SteadyStateOptions) -> Result<Vec<(f64, bool)>> {
    grid.iter()
        .map(|&eps| match find_steady_state(&p.with_epsilon(eps), opts) {
            Ok(_) => Ok((eps, false)),
            Err(Error::NotStationary { .. }) => Ok((eps, true)),
            Err(e) => Err(e),
        })
        .collect()
}
