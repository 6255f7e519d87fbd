//! Positive-P ensemble integrator (Euler-Maruyama, fixed step).
//!
//! Each trajectory draws from its own ChaCha stream (`seed`, stream = index),
//! so results do not depend on scheduling and a run with fewer trajectories is
//! a nested subsample of a larger one with the same seed.

use num_complex::Complex64 as C64;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{noise_coefficients_on, positive_p_drift, FieldState, NoiseBranch, SystemParams};

/// Amplitude magnitude beyond which a trajectory is counted as divergent.
pub const DIVERGENCE_CAP: f64 = 1e6;
/// Largest tolerated fraction of divergent trajectories.
pub const MAX_DIVERGENT_FRACTION: f64 = 0.01;

/// One Euler-Maruyama step with explicit standard-normal draws for the four
/// noise channels.
pub fn step_with_noise(s: &FieldState, p: &SystemParams, dt: f64, noise: &[f64; 4]) -> FieldState {
    step_with_noise_on(s, p, dt, noise, NoiseBranch::Principal)
}

pub fn step_with_noise_on(
    s: &FieldState,
    p: &SystemParams,
    dt: f64,
    noise: &[f64; 4],
    branch: NoiseBranch,
) -> FieldState {
    let drift = positive_p_drift(s, p);
    let b = noise_coefficients_on(s, p, branch);
    let sdt = dt.sqrt();
    let mut z = s.to_doubled();
    for k in 0..6 {
        z[k] += drift[k] * dt;
    }
    for k in 0..4 {
        z[k] += b[k] * (sdt * noise[k]);
    }
    FieldState::from_doubled(z)
}

fn diverged(s: &FieldState) -> bool {
    s.to_doubled().iter().any(|z| !(z.norm() <= DIVERGENCE_CAP))
}

/// One Euler-Maruyama step drawing its noise from `rng`.
pub fn step_trajectory<R: Rng + ?Sized>(s: &FieldState, p: &SystemParams, dt: f64, rng: &mut R) -> Result<FieldState> {
    step_trajectory_on(s, p, dt, rng, NoiseBranch::Principal)
}

pub fn step_trajectory_on<R: Rng + ?Sized>(
    s: &FieldState,
    p: &SystemParams,
    dt: f64,
    rng: &mut R,
    branch: NoiseBranch,
) -> Result<FieldState> {
    let noise: [f64; 4] = std::array::from_fn(|_| rng.sample(StandardNormal));
    let next = step_with_noise_on(s, p, dt, &noise, branch);
    if diverged(&next) {
        return Err(Error::NonFinite { t: f64::NAN });
    }
    Ok(next)
}

#[derive(Clone, Debug)]
pub struct EnsembleSettings {
    pub dt: f64,
    pub t_end: f64,
    pub n_traj: usize,
    pub seed: u64,
    /// Snapshot times; rounded to the nearest step.
    pub t_grid: Vec<f64>,
    /// Start of a time-averaging window running to `t_end`.
    pub window_start: Option<f64>,
    /// Origin for the windowed products `(z_i - r_i)(z_j - r_j)`; zero when absent.
    pub reference: Option<FieldState>,
    pub branch: NoiseBranch,
}

impl EnsembleSettings {
    pub fn new(dt: f64, t_end: f64, n_traj: usize, seed: u64) -> Self {
        Self {
            dt,
            t_end,
            n_traj,
            seed,
            t_grid: vec![t_end],
            window_start: None,
            reference: None,
            branch: NoiseBranch::Principal,
        }
    }
}

/// Ensemble average with standard errors of the real and imaginary parts.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Estimate {
    pub value: C64,
    pub stderr_re: f64,
    pub stderr_im: f64,
}

impl Estimate {
    /// Whether `target` lies within `k` standard errors in both parts.
    pub fn agrees_with(&self, target: C64, k: f64) -> bool {
        (self.value.re - target.re).abs() <= k * self.stderr_re
            && (self.value.im - target.im).abs() <= k * self.stderr_im
    }

    /// Deviation from `target` in units of standard error (worst part).
    pub fn z_score(&self, target: C64) -> f64 {
        let zr = (self.value.re - target.re).abs() / self.stderr_re;
        let zi = (self.value.im - target.im).abs() / self.stderr_im;
        let zr = if zr.is_nan() { 0.0 } else { zr };
        let zi = if zi.is_nan() { 0.0 } else { zi };
        zr.max(zi)
    }
}

/// Moments at one snapshot time.
#[derive(Clone, Debug, PartialEq)]
pub struct Snapshot {
    pub t: f64,
    /// `<a_i>` and `<a_i+>` in doubled ordering.
    pub means: [Estimate; 6],
    /// Normally ordered `<a_i+ a_j>`.
    pub normal: [[Estimate; 3]; 3],
    /// `<a_i a_j>`.
    pub anomalous: [[Estimate; 3]; 3],
}

/// Time averages over `[t_start, t_end]`, one sample per trajectory.
#[derive(Clone, Debug, PartialEq)]
pub struct WindowMoments {
    pub t_start: f64,
    pub t_end: f64,
    pub reference: [C64; 6],
    pub means: [Estimate; 6],
    /// `<(z_i - r_i)(z_j - r_j)>` in doubled ordering.
    pub products: [[Estimate; 6]; 6],
}

#[derive(Clone, Debug, PartialEq)]
pub struct EnsembleMoments {
    pub n_traj: usize,
    pub n_diverged: usize,
    pub t_grid: Vec<f64>,
    pub snapshots: Vec<Snapshot>,
    pub window: Option<WindowMoments>,
}

struct TrajectoryRecord {
    snaps: Vec<[C64; 6]>,
    win_mean: [C64; 6],
    win_prod: [[C64; 6]; 6],
}

fn run_one(
    p: &SystemParams,
    set: &EnsembleSettings,
    snap_steps: &[usize],
    win_step: usize,
    idx: usize,
) -> Option<TrajectoryRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(set.seed);
    rng.set_stream(idx as u64);
    let n_steps = (set.t_end / set.dt).round() as usize;
    let r = set.reference.map(|s| s.to_doubled()).unwrap_or_default();
    let mut s = FieldState::vacuum();
    let mut snaps = Vec::with_capacity(snap_steps.len());
    let mut next_snap = 0;
    let mut win_mean = [C64::default(); 6];
    let mut win_prod = [[C64::default(); 6]; 6];
    let mut win_n = 0usize;
    let record = |z: [C64; 6], snaps: &mut Vec<[C64; 6]>, next: &mut usize, step: usize| {
        while *next < snap_steps.len() && snap_steps[*next] == step {
            snaps.push(z);
            *next += 1;
        }
    };
    record(s.to_doubled(), &mut snaps, &mut next_snap, 0);
    for step in 1..=n_steps {
        s = step_trajectory_on(&s, p, set.dt, &mut rng, set.branch).ok()?;
        let z = s.to_doubled();
        record(z, &mut snaps, &mut next_snap, step);
        if step >= win_step {
            let d: [C64; 6] = std::array::from_fn(|k| z[k] - r[k]);
            for i in 0..6 {
                win_mean[i] += z[i];
                for j in 0..6 {
                    win_prod[i][j] += d[i] * d[j];
                }
            }
            win_n += 1;
        }
    }
    if win_n > 0 {
        let inv = 1.0 / win_n as f64;
        for i in 0..6 {
            win_mean[i] *= inv;
            for j in 0..6 {
                win_prod[i][j] *= inv;
            }
        }
    }
    Some(TrajectoryRecord {
        snaps,
        win_mean,
        win_prod,
    })
}

/// Sum in a fixed binary-tree order.
fn pairwise_sum(xs: &[f64]) -> f64 {
    match xs.len() {
        0 => 0.0,
        1 => xs[0],
        n if n <= 8 => xs.iter().sum(),
        n => pairwise_sum(&xs[..n / 2]) + pairwise_sum(&xs[n / 2..]),
    }
}

fn mean_and_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = pairwise_sum(xs) / n;
    if xs.len() < 2 {
        return (mean, f64::NAN);
    }
    let dev: Vec<f64> = xs.iter().map(|x| (x - mean) * (x - mean)).collect();
    let var = pairwise_sum(&dev) / (n - 1.0);
    (mean, (var / n).sqrt())
}

fn estimate(samples: impl Iterator<Item = C64>) -> Estimate {
    let (re, im): (Vec<f64>, Vec<f64>) = samples.map(|z| (z.re, z.im)).unzip();
    let (mr, sr) = mean_and_stderr(&re);
    let (mi, si) = mean_and_stderr(&im);
    Estimate {
        value: C64::new(mr, mi),
        stderr_re: sr,
        stderr_im: si,
    }
}

/// Integrate `n_traj` positive-P trajectories from the vacuum.
pub fn run_ensemble(p: &SystemParams, set: &EnsembleSettings) -> Result<EnsembleMoments> {
    if !(set.dt > 0.0) || !(set.t_end > 0.0) || set.n_traj == 0 {
        return Err(Error::InvalidConfig(format!(
            "stochastic run needs dt > 0, t_end > 0, n_traj > 0 (got {}, {}, {})",
            set.dt, set.t_end, set.n_traj
        )));
    }
    let mut snap_steps: Vec<usize> = set
        .t_grid
        .iter()
        .map(|t| ((t / set.dt).round() as usize).min((set.t_end / set.dt).round() as usize))
        .collect();
    snap_steps.sort_unstable();
    let t_grid: Vec<f64> = snap_steps.iter().map(|&k| k as f64 * set.dt).collect();
    let win_step = set
        .window_start
        .map(|t| ((t / set.dt).round() as usize).max(1))
        .unwrap_or(usize::MAX);

    let records: Vec<Option<TrajectoryRecord>> = (0..set.n_traj)
        .into_par_iter()
        .map(|idx| run_one(p, set, &snap_steps, win_step, idx))
        .collect();
    let survivors: Vec<&TrajectoryRecord> = records.iter().flatten().collect();
    let n_diverged = set.n_traj - survivors.len();
    if n_diverged as f64 > MAX_DIVERGENT_FRACTION * set.n_traj as f64 {
        return Err(Error::ExcessiveDivergence {
            diverged: n_diverged,
            total: set.n_traj,
        });
    }
    if n_diverged > 0 {
        log::warn!("{n_diverged} of {} trajectories diverged and were dropped", set.n_traj);
    }

    let snapshots = t_grid
        .iter()
        .enumerate()
        .map(|(n, &t)| {
            let means = std::array::from_fn(|k| estimate(survivors.iter().map(|r| r.snaps[n][k])));
            let normal = std::array::from_fn(|i| {
                std::array::from_fn(|j| estimate(survivors.iter().map(|r| r.snaps[n][2 * i + 1] * r.snaps[n][2 * j])))
            });
            let anomalous = std::array::from_fn(|i| {
                std::array::from_fn(|j| estimate(survivors.iter().map(|r| r.snaps[n][2 * i] * r.snaps[n][2 * j])))
            });
            Snapshot {
                t,
                means,
                normal,
                anomalous,
            }
        })
        .collect();

    let window = set
        .window_start
        .filter(|&t| t < set.t_end)
        .map(|t_start| WindowMoments {
            t_start,
            t_end: set.t_end,
            reference: set.reference.map(|s| s.to_doubled()).unwrap_or_default(),
            means: std::array::from_fn(|k| estimate(survivors.iter().map(|r| r.win_mean[k]))),
            products: std::array::from_fn(|i| {
                std::array::from_fn(|j| estimate(survivors.iter().map(|r| r.win_prod[i][j])))
            }),
        });

    Ok(EnsembleMoments {
        n_traj: set.n_traj,
        n_diverged,
        t_grid,
        snapshots,
        window,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_noise_step_is_deterministic_euler() {
        let p = SystemParams::regime1();
        let s = FieldState::classical([C64::new(40.0, 1.0), C64::new(-10.0, 0.5), C64::new(-3.0, 0.0)]);
        let dt = 1e-3;
        let next = step_with_noise(&s, &p, dt, &[0.0; 4]);
        let drift = positive_p_drift(&s, &p);
        let z = s.to_doubled();
        for (k, w) in next.to_doubled().iter().enumerate() {
            assert_eq!(*w, z[k] + drift[k] * dt);
        }
    }

    #[test]
    fn fourth_harmonic_gets_no_noise() {
        let p = SystemParams::regime2();
        let s = FieldState::classical([C64::new(40.0, 0.0), C64::new(-10.0, 0.0), C64::new(-3.0, 0.0)]);
        let a = step_with_noise(&s, &p, 1e-3, &[0.0; 4]);
        let b = step_with_noise(&s, &p, 1e-3, &[1.0, -2.0, 0.5, 3.0]);
        assert_eq!(a.alpha[2], b.alpha[2]);
        assert_eq!(a.alpha_plus[2], b.alpha_plus[2]);
        assert_ne!(a.alpha[0], b.alpha[0]);
        // negative a2 gives a purely imaginary noise coefficient on a1
        let coeff = (b.alpha[0] - a.alpha[0]) / (1e-3f64.sqrt());
        assert!(coeff.re.abs() < 1e-9 && coeff.im > 0.0);
    }

    #[test]
    fn unpumped_vacuum_stays_zero() {
        let p = SystemParams::regime1().with_epsilon(0.0);
        let mut set = EnsembleSettings::new(1e-2, 2.0, 16, 3);
        set.t_grid = vec![0.0, 1.0, 2.0];
        set.window_start = Some(1.0);
        let m = run_ensemble(&p, &set).unwrap();
        assert_eq!(m.n_diverged, 0);
        for snap in &m.snapshots {
            assert!(snap.means.iter().all(|e| e.value == C64::default()));
            assert!(snap.normal.iter().flatten().all(|e| e.value == C64::default()));
        }
        let w = m.window.unwrap();
        assert!(w.products.iter().flatten().all(|e| e.value == C64::default()));
    }

    #[test]
    fn fixed_seed_is_reproducible() {
        let p = SystemParams::regime1();
        let mut set = EnsembleSettings::new(1e-2, 3.0, 24, 11);
        set.window_start = Some(1.0);
        let a = run_ensemble(&p, &set).unwrap();
        let b = run_ensemble(&p, &set).unwrap();
        assert_eq!(a, b);
        set.seed = 12;
        assert_ne!(a, run_ensemble(&p, &set).unwrap());
    }

    #[test]
    fn rejects_bad_settings() {
        let p = SystemParams::regime1();
        assert!(run_ensemble(&p, &EnsembleSettings::new(0.0, 1.0, 4, 0)).is_err());
        assert!(run_ensemble(&p, &EnsembleSettings::new(0.1, 1.0, 0, 0)).is_err());
    }

    #[test]
    fn pairwise_sum_matches_naive() {
        let xs: Vec<f64> = (0..1000).map(|k| (k as f64).sin()).collect();
        assert!((pairwise_sum(&xs) - xs.iter().sum::<f64>()).abs() < 1e-12);
        let (m, se) = mean_and_stderr(&[1.0, 3.0]);
        assert_eq!(m, 2.0);
        assert!((se - 1.0).abs() < 1e-15);
    }
}
