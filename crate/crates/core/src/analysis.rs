//! Frequency sweeps: steady state, spectra and correlation reports over a grid.

use rayon::prelude::*;

use crate::correlations::{self, CorrelationReport, OBR_LABELS, PAIR_LABELS, TRIPLE_LABELS};
use crate::error::{Error, Result};
use crate::linearized::DriftDiffusion;
use crate::model::{validate_params, Normalization, QuadCovariance, SystemParams};
use crate::semiclassical::{find_steady_state, SteadyStateOptions, SteadyStateResult};

/// `steps` evenly spaced frequencies in `[min, max]`, with `0` inserted when
/// the range straddles it and the spacing misses it.
pub fn omega_grid(min: f64, max: f64, steps: usize) -> Result<Vec<f64>> {
    if !(min < max) || steps < 2 {
        return Err(Error::InvalidConfig(format!("bad omega grid {min}:{max}:{steps}")));
    }
    let mut grid: Vec<f64> = (0..steps)
        .map(|k| min + (max - min) * k as f64 / (steps - 1) as f64)
        .collect();
    if min < 0.0 && max > 0.0 && !grid.contains(&0.0) {
        let pos = grid.partition_point(|&w| w < 0.0);
        grid.insert(pos, 0.0);
    }
    Ok(grid)
}

/// Default grid for figure reproduction: `[-20, 20]` in steps of 0.05.
pub fn figure_grid() -> Vec<f64> {
    omega_grid(-20.0, 20.0, 801).expect("static grid")
}

/// Steady state and linearization for one parameter set.
#[derive(Clone, Debug)]
pub struct Analysis {
    pub params: SystemParams,
    pub steady: SteadyStateResult,
    pub drift_diffusion: DriftDiffusion,
}

impl Analysis {
    /// Fails with `NotStationary` in the self-pulsing regime, where the
    /// linearized spectra do not exist.
    pub fn new(p: SystemParams) -> Result<Self> {
        Self::with_options(p, &SteadyStateOptions::default())
    }

    pub fn with_options(p: SystemParams, opts: &SteadyStateOptions) -> Result<Self> {
        let params = validate_params(p, Normalization::Rescale)?;
        let steady = find_steady_state(&params, opts)?;
        if !steady.converged {
            return Err(Error::IntegrationFailure {
                t: steady.t_final,
                reason: format!("residual {:.3e} still above tolerance", steady.residual),
            });
        }
        let drift_diffusion = DriftDiffusion::new(&params, &steady.state);
        let margin = drift_diffusion.stability_margin()?;
        if margin <= 0.0 {
            return Err(Error::NotStationary {
                period: f64::NAN,
                modulation: f64::NAN,
            });
        }
        Ok(Self {
            params,
            steady,
            drift_diffusion,
        })
    }

    pub fn spectra(&self, grid: &[f64]) -> Result<Vec<QuadCovariance>> {
        grid.par_iter().map(|&w| self.drift_diffusion.output_quad(w)).collect()
    }

    pub fn correlations(&self, grid: &[f64]) -> Result<Vec<CorrelationReport>> {
        grid.par_iter()
            .map(|&w| correlations::report(&self.drift_diffusion.output_quad(w)?))
            .collect()
    }
}

/// Minimum of one quantity over the grid and where it occurs.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridMin {
    pub value: f64,
    pub omega: f64,
}

fn grid_min(reports: &[CorrelationReport], f: impl Fn(&CorrelationReport) -> f64) -> GridMin {
    reports.iter().fold(
        GridMin {
            value: f64::INFINITY,
            omega: f64::NAN,
        },
        |m, r| {
            let v = f(r);
            if v < m.value {
                GridMin {
                    value: v,
                    omega: r.omega,
                }
            } else {
                m
            }
        },
    )
}

#[derive(Clone, Debug, PartialEq)]
pub struct GridSummary {
    pub v_pair: [GridMin; 3],
    pub v_triple: [GridMin; 3],
    pub obr: [GridMin; 3],
    pub sum_v_pair: GridMin,
    pub sum_obr: GridMin,
    /// Frequencies where steering is seen without any inseparability witness.
    pub witness_gaps: usize,
}

impl GridSummary {
    pub fn from_reports(reports: &[CorrelationReport]) -> Self {
        Self {
            v_pair: std::array::from_fn(|n| grid_min(reports, |r| r.v_pair[n])),
            v_triple: std::array::from_fn(|n| grid_min(reports, |r| r.v_triple[n])),
            obr: std::array::from_fn(|n| grid_min(reports, |r| r.obr[n])),
            sum_v_pair: grid_min(reports, |r| r.sum_v_pair),
            sum_obr: grid_min(reports, |r| r.sum_obr),
            witness_gaps: reports.iter().filter(|r| r.witness_gap).count(),
        }
    }

    /// `(label, minimum)` pairs in a fixed order.
    pub fn entries(&self) -> Vec<(&'static str, GridMin)> {
        let mut out = Vec::with_capacity(11);
        out.extend(PAIR_LABELS.into_iter().zip(self.v_pair));
        out.extend(TRIPLE_LABELS.into_iter().zip(self.v_triple));
        out.extend(OBR_LABELS.into_iter().zip(self.obr));
        out.push(("sumV", self.sum_v_pair));
        out.push(("sumOBR", self.sum_obr));
        out
    }
}
