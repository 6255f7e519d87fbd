//! Adaptive Dormand-Prince 5(4) integrator for small fixed-size systems.

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug)]
pub struct Tolerances {
    pub rtol: f64,
    pub atol: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            rtol: 1e-10,
            atol: 1e-12,
        }
    }
}

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
// 5th minus embedded 4th order weights
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

const MIN_STEP: f64 = 1e-14;

/// State of an adaptive integration of `dy/dt = f(t, y)`.
pub struct Dopri5<const N: usize, F> {
    f: F,
    tol: Tolerances,
    pub t: f64,
    pub y: [f64; N],
    h: f64,
    // first-same-as-last derivative
    k1: [f64; N],
    pub max_step: f64,
}

fn axpy<const N: usize>(y: &[f64; N], h: f64, terms: &[(f64, &[f64; N])]) -> [f64; N] {
    let mut out = *y;
    for (c, k) in terms {
        for i in 0..N {
            out[i] += h * c * k[i];
        }
    }
    out
}

impl<const N: usize, F> Dopri5<N, F>
where
    F: Fn(f64, &[f64; N]) -> [f64; N],
{
    pub fn new(f: F, t0: f64, y0: [f64; N], tol: Tolerances) -> Self {
        let k1 = f(t0, &y0);
        let scale = y0.iter().map(|v| v.abs()).fold(0.0, f64::max).max(1.0);
        let dnorm = k1.iter().map(|v| v.abs()).fold(0.0, f64::max);
        let h = if dnorm > 0.0 {
            (0.01 * scale / dnorm).min(0.1)
        } else {
            0.1
        };
        Self {
            f,
            tol,
            t: t0,
            y: y0,
            h,
            k1,
            max_step: f64::INFINITY,
        }
    }

    /// Derivative at the current point.
    pub fn derivative(&self) -> &[f64; N] {
        &self.k1
    }

    /// Take one accepted step, no longer than `t_limit - t`.
    pub fn step(&mut self, t_limit: f64) -> Result<()> {
        loop {
            let mut h = self.h.min(self.max_step);
            let last = self.t + h >= t_limit;
            if last {
                h = t_limit - self.t;
            }
            if h < MIN_STEP * self.t.abs().max(1.0) {
                return Err(Error::IntegrationFailure {
                    t: self.t,
                    reason: format!("step size underflow (h = {h:.3e})"),
                });
            }
            let (t, y, f) = (self.t, &self.y, &self.f);
            let k1 = self.k1;
            let k2 = f(t + C2 * h, &axpy(y, h, &[(A21, &k1)]));
            let k3 = f(t + C3 * h, &axpy(y, h, &[(A31, &k1), (A32, &k2)]));
            let k4 = f(t + C4 * h, &axpy(y, h, &[(A41, &k1), (A42, &k2), (A43, &k3)]));
            let k5 = f(
                t + C5 * h,
                &axpy(y, h, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)]),
            );
            let k6 = f(
                t + h,
                &axpy(y, h, &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)]),
            );
            let y_new = axpy(y, h, &[(B1, &k1), (B3, &k3), (B4, &k4), (B5, &k5), (B6, &k6)]);
            let k7 = f(t + h, &y_new);

            let mut err = 0.0f64;
            for i in 0..N {
                let e = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
                let sc = self.tol.atol + self.tol.rtol * y[i].abs().max(y_new[i].abs());
                err = err.max((e / sc).abs());
            }
            if !err.is_finite() || y_new.iter().any(|v| !v.is_finite()) {
                self.h = 0.25 * h;
                continue;
            }
            let factor = if err == 0.0 {
                5.0
            } else {
                (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
            };
            if err <= 1.0 {
                self.t = if last { t_limit } else { t + h };
                self.y = y_new;
                self.k1 = k7;
                // keep the natural step after clipping to t_limit
                if !last || factor < 1.0 {
                    self.h = h * factor;
                }
                return Ok(());
            }
            self.h = h * factor.min(1.0);
        }
    }

    /// Integrate up to `t_end`.
    pub fn advance_to(&mut self, t_end: f64) -> Result<()> {
        while self.t < t_end {
            self.step(t_end)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_decay() {
        let mut ode = Dopri5::new(|_, y: &[f64; 1]| [-y[0]], 0.0, [1.0], Tolerances::default());
        ode.advance_to(5.0).unwrap();
        assert!((ode.y[0] - (-5.0f64).exp()).abs() < 1e-11);
        assert_eq!(ode.t, 5.0);
    }

    #[test]
    fn harmonic_oscillator_phase() {
        let tol = Tolerances {
            rtol: 1e-11,
            atol: 1e-13,
        };
        let mut ode = Dopri5::new(|_, y: &[f64; 2]| [y[1], -y[0]], 0.0, [1.0, 0.0], tol);
        let t_end = 20.0 * std::f64::consts::PI;
        ode.advance_to(t_end).unwrap();
        assert!((ode.y[0] - 1.0).abs() < 1e-8, "{:?}", ode.y);
        assert!(ode.y[1].abs() < 1e-8);
    }

    #[test]
    fn unstable_fixed_point_is_left() {
        // an explicit method must follow a growing mode rather than damp it
        let mut ode = Dopri5::new(
            |_, y: &[f64; 1]| [0.1 * y[0]],
            0.0,
            [1e-12],
            Tolerances {
                rtol: 1e-10,
                atol: 1e-24,
            },
        );
        ode.advance_to(200.0).unwrap();
        assert!((ode.y[0] / (1e-12 * 20.0f64.exp()) - 1.0).abs() < 1e-6);
    }
}
