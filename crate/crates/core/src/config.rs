//! Run configuration and the `key = value` configuration file format.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::model::SystemParams;

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Mode {
    Steady,
    Spectra,
    Correlations,
    Stochastic,
    Threshold,
    Figures,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Mode::Steady => "steady",
            Mode::Spectra => "spectra",
            Mode::Correlations => "correlations",
            Mode::Stochastic => "stochastic",
            Mode::Threshold => "threshold",
            Mode::Figures => "figures",
        };
        f.write_str(s)
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        <Mode as clap::ValueEnum>::from_str(s, true).map_err(|_| Error::InvalidConfig(format!("unknown mode `{s}`")))
    }
}

/// `MIN:MAX:STEPS`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Range {
    pub min: f64,
    pub max: f64,
    pub steps: usize,
}

impl FromStr for Range {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidConfig(format!("expected MIN:MAX:STEPS, got `{s}`"));
        let parts: Vec<&str> = s.split(':').collect();
        let [min, max, steps] = parts.as_slice() else {
            return Err(bad());
        };
        let r = Range {
            min: min.trim().parse().map_err(|_| bad())?,
            max: max.trim().parse().map_err(|_| bad())?,
            steps: steps.trim().parse().map_err(|_| bad())?,
        };
        if !(r.min < r.max) || r.steps < 2 {
            return Err(Error::InvalidConfig(format!(
                "range `{s}` needs MIN < MAX and STEPS >= 2"
            )));
        }
        Ok(r)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StochasticConfig {
    pub dt: f64,
    pub t_end: f64,
    pub n_traj: usize,
    /// Start of the time-averaging window.
    pub window_start: f64,
}

impl Default for StochasticConfig {
    fn default() -> Self {
        Self {
            dt: 1e-4,
            t_end: 100.0,
            n_traj: 1000,
            window_start: 50.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub params: SystemParams,
    pub omega: Range,
    pub mode: Mode,
    pub output_path: PathBuf,
    pub seed: u64,
    pub stochastic: StochasticConfig,
    /// Pump scan for `threshold` and `steady` scans.
    pub epsilon_range: Option<Range>,
    /// Preset the figures mode restricts itself to.
    pub regime: Option<u8>,
    pub gnuplot: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            params: SystemParams::regime1(),
            omega: Range {
                min: -20.0,
                max: 20.0,
                steps: 801,
            },
            mode: Mode::Correlations,
            output_path: PathBuf::from("."),
            seed: 1,
            stochastic: StochasticConfig::default(),
            epsilon_range: None,
            regime: None,
            gnuplot: false,
        }
    }
}

fn parse_f64(v: &str, line: usize) -> Result<f64> {
    v.parse().map_err(|_| Error::ConfigParse {
        line,
        msg: format!("`{v}` is not a number"),
    })
}

fn parse_usize(v: &str, line: usize) -> Result<usize> {
    v.parse().map_err(|_| Error::ConfigParse {
        line,
        msg: format!("`{v}` is not a non-negative integer"),
    })
}

impl RunConfig {
    /// Apply `key = value` lines on top of `self`. `#` starts a comment.
    pub fn apply_str(&mut self, text: &str) -> Result<()> {
        let mut eps = self.params.epsilon;
        for (n, raw) in text.lines().enumerate() {
            let line = n + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let Some((key, value)) = content.split_once('=') else {
                return Err(Error::ConfigParse {
                    line,
                    msg: format!("expected `key = value`, got `{content}`"),
                });
            };
            let (key, value) = (key.trim(), value.trim());
            let p = &mut self.params;
            match key {
                "kappa1" => p.kappa1 = parse_f64(value, line)?,
                "kappa2" => p.kappa2 = parse_f64(value, line)?,
                "epsilon" => eps.re = parse_f64(value, line)?,
                "epsilon_im" => eps.im = parse_f64(value, line)?,
                "gamma1" => p.gamma1 = parse_f64(value, line)?,
                "gamma2" => p.gamma2 = parse_f64(value, line)?,
                "gamma3" => p.gamma3 = parse_f64(value, line)?,
                "omega_min" => self.omega.min = parse_f64(value, line)?,
                "omega_max" => self.omega.max = parse_f64(value, line)?,
                "omega_steps" => self.omega.steps = parse_usize(value, line)?,
                "seed" => {
                    self.seed = value.parse().map_err(|_| Error::ConfigParse {
                        line,
                        msg: format!("`{value}` is not a seed"),
                    })?
                }
                "dt" => self.stochastic.dt = parse_f64(value, line)?,
                "t_end" => self.stochastic.t_end = parse_f64(value, line)?,
                "n_traj" => self.stochastic.n_traj = parse_usize(value, line)?,
                "window_start" => self.stochastic.window_start = parse_f64(value, line)?,
                "mode" => {
                    self.mode = value.parse().map_err(|_| Error::ConfigParse {
                        line,
                        msg: format!("unknown mode `{value}`"),
                    })?
                }
                _ => {
                    return Err(Error::ConfigParse {
                        line,
                        msg: format!("unknown key `{key}`"),
                    })
                }
            }
        }
        self.params.epsilon = C64::new(eps.re, eps.im);
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        let text = std::fs::read_to_string(path)?;
        self.apply_str(&text)
    }

    pub fn check(&self) -> Result<()> {
        if !(self.omega.min < self.omega.max) || self.omega.steps < 2 {
            return Err(Error::InvalidConfig(format!(
                "omega grid needs min < max and at least 2 steps (got {}:{}:{})",
                self.omega.min, self.omega.max, self.omega.steps
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_parameter_file() {
        let mut c = RunConfig::default();
        c.apply_str(
            "# second regime\nkappa1 = 1e-2\nkappa2=5e-3  # half\n\nepsilon = 105\ngamma1 = 1\ngamma2 = 2\ngamma3 = 0.25\n",
        )
        .unwrap();
        assert_eq!(c.params, SystemParams::regime2());
    }

    #[test]
    fn run_keys_and_errors() {
        let mut c = RunConfig::default();
        c.apply_str("omega_min = -5\nomega_steps = 11\nmode = spectra\nseed = 9\nepsilon_im = 2")
            .unwrap();
        assert_eq!(c.omega.min, -5.0);
        assert_eq!(c.omega.steps, 11);
        assert_eq!(c.mode, Mode::Spectra);
        assert_eq!(c.seed, 9);
        assert_eq!(c.params.epsilon, C64::new(105.0, 2.0));

        let err = RunConfig::default().apply_str("kappa1 = 1\nfoo = 2").unwrap_err();
        assert!(matches!(err, Error::ConfigParse { line: 2, .. }), "{err}");
        let err = RunConfig::default().apply_str("kappa1 1").unwrap_err();
        assert!(matches!(err, Error::ConfigParse { line: 1, .. }));
        let err = RunConfig::default().apply_str("gamma2 = fast").unwrap_err();
        assert!(matches!(err, Error::ConfigParse { line: 1, .. }));
    }

    #[test]
    fn range_syntax() {
        let r: Range = "-20:20:801".parse().unwrap();
        assert_eq!(
            r,
            Range {
                min: -20.0,
                max: 20.0,
                steps: 801
            }
        );
        assert!("1:0:5".parse::<Range>().is_err());
        assert!("0:1".parse::<Range>().is_err());
        assert!("0:1:1".parse::<Range>().is_err());
    }
}
