//! Command-line front end: turns flags and configuration files into a
//! [`RunConfig`] and writes CSV artifacts for each run mode.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::Parser;

use crate::analysis::{omega_grid, Analysis, GridSummary};
use crate::config::{Mode, Range, RunConfig};
use crate::correlations::{CorrelationReport, OBR_LABELS, PAIR_LABELS, TRIPLE_LABELS};
use crate::error::{Error, Result};
use crate::model::{validate_params, Normalization, SystemParams};
use crate::semiclassical::{find_steady_state, pulsing_threshold, SteadyStateOptions};
use crate::stochastic::{run_ensemble, EnsembleMoments, EnsembleSettings, Estimate};

pub const VERSION: &str = concat!(env!("CARGO_PKG_VERSION"), " (", env!("CASCADE_GIT_DESCRIBE"), ")");

#[derive(Debug, Parser)]
#[command(name = "cascade", version = VERSION, about = "Cascaded SHG/4HG steady states, output spectra and tripartite correlations")]
pub struct Cli {
    /// Run mode (alternatively `--mode`).
    #[arg(value_enum)]
    pub mode_arg: Option<Mode>,

    #[arg(long, value_enum)]
    pub mode: Option<Mode>,

    /// `key = value` configuration file.
    #[arg(long)]
    pub config: Option<PathBuf>,

    /// Built-in parameter preset.
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=2))]
    pub regime: Option<u8>,

    /// Frequency grid `MIN:MAX:STEPS`.
    #[arg(long, allow_hyphen_values = true)]
    pub omega_range: Option<Range>,

    /// Pump scan `MIN:MAX:STEPS` for `steady` and `threshold`.
    #[arg(long)]
    pub epsilon_range: Option<Range>,

    #[arg(long)]
    pub seed: Option<u64>,

    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,

    #[arg(long, allow_hyphen_values = true)]
    pub epsilon: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub epsilon_im: Option<f64>,
    #[arg(long)]
    pub kappa1: Option<f64>,
    #[arg(long)]
    pub kappa2: Option<f64>,
    #[arg(long)]
    pub gamma1: Option<f64>,
    #[arg(long)]
    pub gamma2: Option<f64>,
    #[arg(long)]
    pub gamma3: Option<f64>,

    /// Stochastic time step.
    #[arg(long)]
    pub dt: Option<f64>,
    #[arg(long)]
    pub t_end: Option<f64>,
    #[arg(long)]
    pub n_traj: Option<usize>,
    /// Start of the stochastic time-averaging window.
    #[arg(long)]
    pub window_start: Option<f64>,

    /// Also write gnuplot scripts next to the figure data.
    #[arg(long)]
    pub gnuplot: bool,
}

impl Cli {
    /// Preset, then configuration file, then individual flags.
    pub fn into_config(self) -> Result<RunConfig> {
        let mut c = RunConfig::default();
        if let Some(r) = self.regime {
            c.params = SystemParams::regime(r).ok_or_else(|| Error::InvalidConfig(format!("no regime {r}")))?;
            c.regime = Some(r);
        }
        let mut mode_from_file = None;
        if let Some(path) = &self.config {
            let text = fs::read_to_string(path)?;
            c.apply_str(&text)?;
            let sets_mode = text
                .lines()
                .filter_map(|l| l.split('#').next()?.split_once('='))
                .any(|(k, _)| k.trim() == "mode");
            if sets_mode {
                mode_from_file = Some(c.mode);
            }
        }
        c.mode = match (self.mode_arg, self.mode) {
            (Some(a), Some(b)) if a != b => {
                return Err(Error::InvalidConfig(format!("conflicting modes `{a}` and `{b}`")))
            }
            (Some(a), _) | (None, Some(a)) => a,
            (None, None) => mode_from_file.ok_or_else(|| Error::InvalidConfig("no run mode given".to_string()))?,
        };
        let p = &mut c.params;
        if let Some(v) = self.epsilon {
            p.epsilon.re = v;
        }
        if let Some(v) = self.epsilon_im {
            p.epsilon.im = v;
        }
        for (slot, v) in [
            (&mut p.kappa1, self.kappa1),
            (&mut p.kappa2, self.kappa2),
            (&mut p.gamma1, self.gamma1),
            (&mut p.gamma2, self.gamma2),
            (&mut p.gamma3, self.gamma3),
        ] {
            if let Some(v) = v {
                *slot = v;
            }
        }
        let st = &mut c.stochastic;
        for (slot, v) in [
            (&mut st.dt, self.dt),
            (&mut st.t_end, self.t_end),
            (&mut st.window_start, self.window_start),
        ] {
            if let Some(v) = v {
                *slot = v;
            }
        }
        if let Some(n) = self.n_traj {
            st.n_traj = n;
        }
        if let Some(r) = self.omega_range {
            c.omega = r;
        }
        if let Some(s) = self.seed {
            c.seed = s;
        }
        if let Some(o) = self.out {
            c.output_path = o;
        }
        c.epsilon_range = self.epsilon_range;
        c.gnuplot = self.gnuplot;
        c.check()?;
        Ok(c)
    }
}

/// Fixed 17-significant-digit float format.
pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

fn header(c: &RunConfig, p: &SystemParams, extra: &[(&str, String)]) -> String {
    let mut h = String::new();
    let _ = writeln!(h, "# cascade {VERSION}");
    let _ = writeln!(h, "# mode = {}", c.mode);
    for (k, v) in [
        ("kappa1", p.kappa1),
        ("kappa2", p.kappa2),
        ("epsilon", p.epsilon.re),
        ("epsilon_im", p.epsilon.im),
        ("gamma1", p.gamma1),
        ("gamma2", p.gamma2),
        ("gamma3", p.gamma3),
    ] {
        let _ = writeln!(h, "# {k} = {}", num(v));
    }
    for (k, v) in extra {
        let _ = writeln!(h, "# {k} = {v}");
    }
    h
}

fn omega_header(c: &RunConfig) -> Vec<(&'static str, String)> {
    vec![
        ("omega_min", num(c.omega.min)),
        ("omega_max", num(c.omega.max)),
        ("omega_steps", c.omega.steps.to_string()),
    ]
}

fn row(cells: impl IntoIterator<Item = String>) -> String {
    let mut s = cells.into_iter().collect::<Vec<_>>().join(",");
    s.push('\n');
    s
}

fn write_artifact(dir: &Path, name: &str, text: &str, written: &mut Vec<PathBuf>) -> Result<()> {
    fs::create_dir_all(dir)?;
    let path = dir.join(name);
    fs::write(&path, text)?;
    log::info!("wrote {}", path.display());
    written.push(path);
    Ok(())
}

fn flag(b: bool) -> String {
    u8::from(b).to_string()
}

const STEADY_COLUMNS: &str = "eps,re_a1,im_a1,re_a2,im_a2,re_a3,im_a3,residual,converged";

fn steady_row(p: &SystemParams, opts: &SteadyStateOptions, scanning: bool) -> Result<String> {
    match find_steady_state(p, opts) {
        Ok(r) => {
            if !r.converged {
                log::warn!(
                    "epsilon = {}: residual {:.3e} above tolerance",
                    p.epsilon.re,
                    r.residual
                );
            }
            let mut cells = vec![num(p.epsilon.re)];
            for a in r.state.alpha {
                cells.push(num(a.re));
                cells.push(num(a.im));
            }
            cells.push(num(r.residual));
            cells.push(r.converged.to_string());
            Ok(row(cells))
        }
        Err(e @ Error::NotStationary { .. }) if scanning => {
            log::warn!("epsilon = {}: {e}", p.epsilon.re);
            let mut cells = vec![num(p.epsilon.re)];
            cells.extend(std::iter::repeat_n(num(f64::NAN), 7));
            cells.push("false".to_string());
            Ok(row(cells))
        }
        Err(e) => Err(e),
    }
}

fn spectra_columns() -> Vec<String> {
    let names = ["X1", "Y1", "X2", "Y2", "X3", "Y3"];
    let mut cols = Vec::with_capacity(21);
    for a in 0..6 {
        for b in a..6 {
            // X-labelled quadrature first for mixed entries
            let (u, v) = if a % 2 == 1 && b % 2 == 0 { (b, a) } else { (a, b) };
            cols.push(format!("S{}{}", names[u], names[v]));
        }
    }
    cols
}

fn correlation_columns() -> Vec<String> {
    let mut cols = vec!["omega".to_string()];
    cols.extend(PAIR_LABELS.iter().map(|s| s.to_string()));
    cols.extend(PAIR_LABELS.iter().map(|s| format!("gain_{s}")));
    cols.extend(TRIPLE_LABELS.iter().map(|s| s.to_string()));
    cols.extend(OBR_LABELS.iter().map(|s| s.to_string()));
    cols.extend(
        [
            "sumV",
            "sumOBR",
            "inseparable_pairwise",
            "inseparable_triple",
            "tr_entangled_pairwise",
            "tr_genuine_steer_pairwise",
            "genuine_entangled_triple",
            "genuine_steer_triple",
            "steer_1_by_23",
            "steer_2_by_13",
            "steer_3_by_12",
            "genuine_tri_steer",
            "witness_gap",
        ]
        .map(String::from),
    );
    cols
}

fn correlation_row(r: &CorrelationReport) -> String {
    let f = &r.flags;
    let mut cells = vec![num(r.omega)];
    cells.extend(r.v_pair.map(num));
    cells.extend(r.gains.map(num));
    cells.extend(r.v_triple.map(num));
    cells.extend(r.obr.map(num));
    cells.push(num(r.sum_v_pair));
    cells.push(num(r.sum_obr));
    cells.extend(
        [
            f.inseparable_pairwise,
            f.inseparable_triple,
            f.tr_entangled_pairwise,
            f.tr_genuine_steer_pairwise,
            f.genuine_entangled_triple,
            f.genuine_steer_triple,
            f.steer_i_by_jk[0],
            f.steer_i_by_jk[1],
            f.steer_i_by_jk[2],
            f.genuine_tri_steer,
            r.witness_gap,
        ]
        .map(flag),
    );
    row(cells)
}

/// Table of `omega` plus selected per-frequency values.
fn family_table(
    hdr: &str,
    labels: &[&str],
    reports: &[CorrelationReport],
    pick: impl Fn(&CorrelationReport) -> Vec<f64>,
) -> String {
    let mut text = hdr.to_string();
    text.push_str(&row(
        std::iter::once("omega".to_string()).chain(labels.iter().map(|s| s.to_string()))
    ));
    for r in reports {
        text.push_str(&row(std::iter::once(num(r.omega)).chain(pick(r).into_iter().map(num))));
    }
    text
}

fn gnuplot_script(data: &str, title: &str, labels: &[&str], threshold: f64) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "# cascade {VERSION}");
    let _ = writeln!(s, "set datafile separator ','");
    let _ = writeln!(s, "set datafile commentschars '#'");
    let _ = writeln!(s, "set key autotitle columnhead");
    let _ = writeln!(s, "set title '{title}'");
    let _ = writeln!(s, "set xlabel 'omega / gamma1'");
    let _ = writeln!(s, "set terminal pngcairo size 800,560");
    let _ = writeln!(s, "set output '{}.png'", data.trim_end_matches(".csv"));
    let _ = writeln!(
        s,
        "set arrow from graph 0, first {threshold} to graph 1, first {threshold} nohead dashtype 2"
    );
    let plots: Vec<String> = (0..labels.len())
        .map(|n| format!("'{data}' using 1:{} with lines lw 2", n + 2))
        .collect();
    let _ = writeln!(s, "plot {}", plots.join(", \\\n     "));
    s
}

struct Figure {
    file: &'static str,
    title: &'static str,
    labels: &'static [&'static str],
    threshold: f64,
    pick: fn(&CorrelationReport) -> Vec<f64>,
}

const FIGURES: [(u8, Figure); 4] = [
    (
        1,
        Figure {
            file: "fig1_obr_regime1.csv",
            title: "OBR correlations, regime 1",
            labels: &["OBR123", "OBR213", "OBR312", "sumOBR"],
            threshold: 1.0,
            pick: |r| vec![r.obr[0], r.obr[1], r.obr[2], r.sum_obr],
        },
    ),
    (
        2,
        Figure {
            file: "fig2_vij_regime2.csv",
            title: "Pairwise vLF correlations, regime 2",
            labels: &["V12", "V13", "V23"],
            threshold: 4.0,
            pick: |r| r.v_pair.to_vec(),
        },
    ),
    (
        2,
        Figure {
            file: "fig3_vijk_regime2.csv",
            title: "Triple vLF correlations, regime 2",
            labels: &["V123", "V231", "V312"],
            threshold: 4.0,
            pick: |r| r.v_triple.to_vec(),
        },
    ),
    (
        2,
        Figure {
            file: "fig4_obr_regime2.csv",
            title: "OBR correlations, regime 2",
            labels: &["OBR123", "OBR213", "OBR312", "sumOBR"],
            threshold: 1.0,
            pick: |r| vec![r.obr[0], r.obr[1], r.obr[2], r.sum_obr],
        },
    ),
];

fn moment_rows(text: &mut String, t: f64, name: &str, e: &Estimate) {
    text.push_str(&row([
        num(t),
        name.to_string(),
        num(e.value.re),
        num(e.value.im),
        num(e.stderr_re),
        num(e.stderr_im),
    ]));
}

const DOUBLED_NAMES: [&str; 6] = ["a1", "a1+", "a2", "a2+", "a3", "a3+"];

fn moments_table(hdr: &str, m: &EnsembleMoments) -> String {
    let mut text = hdr.to_string();
    text.push_str("time,moment,real,imag,stderr_re,stderr_im\n");
    for snap in &m.snapshots {
        for (k, e) in snap.means.iter().enumerate() {
            moment_rows(&mut text, snap.t, &format!("<{}>", DOUBLED_NAMES[k]), e);
        }
        for i in 0..3 {
            for j in 0..3 {
                moment_rows(
                    &mut text,
                    snap.t,
                    &format!("<a{}+ a{}>", i + 1, j + 1),
                    &snap.normal[i][j],
                );
            }
        }
        for i in 0..3 {
            for j in i..3 {
                moment_rows(
                    &mut text,
                    snap.t,
                    &format!("<a{} a{}>", i + 1, j + 1),
                    &snap.anomalous[i][j],
                );
            }
        }
    }
    if let Some(w) = &m.window {
        for (k, e) in w.means.iter().enumerate() {
            moment_rows(&mut text, w.t_end, &format!("window <{}>", DOUBLED_NAMES[k]), e);
        }
        for i in 0..6 {
            for j in i..6 {
                let name = format!("window <d{} d{}>", DOUBLED_NAMES[i], DOUBLED_NAMES[j]);
                moment_rows(&mut text, w.t_end, &name, &w.products[i][j]);
            }
        }
    }
    let _ = writeln!(text, "# diverged = {} of {}", m.n_diverged, m.n_traj);
    text
}

/// Execute one run; returns the artifacts written.
pub fn run(config: &RunConfig) -> Result<Vec<PathBuf>> {
    config.check()?;
    let dir = &config.output_path;
    let mut written = Vec::new();
    let params = validate_params(config.params, Normalization::Rescale)?;
    let opts = SteadyStateOptions::default();
    match config.mode {
        Mode::Steady => {
            let mut extra = Vec::new();
            let eps_values: Vec<f64> = match config.epsilon_range {
                Some(r) => {
                    extra.push(("epsilon_range", format!("{}:{}:{}", num(r.min), num(r.max), r.steps)));
                    (0..r.steps)
                        .map(|n| r.min + (r.max - r.min) * n as f64 / (r.steps - 1) as f64)
                        .collect()
                }
                None => vec![params.epsilon.re],
            };
            let mut text = header(config, &params, &extra);
            text.push_str(STEADY_COLUMNS);
            text.push('\n');
            let scanning = config.epsilon_range.is_some();
            for eps in eps_values {
                let mut p = params;
                p.epsilon.re = eps;
                text.push_str(&steady_row(&p, &opts, scanning)?);
            }
            write_artifact(dir, "steady.csv", &text, &mut written)?;
        }
        Mode::Threshold => {
            let r = config.epsilon_range.unwrap_or(Range {
                min: params.epsilon.re,
                max: 20.0 * params.epsilon.re,
                steps: 200,
            });
            let th = pulsing_threshold(&params, (r.min, r.max), r.steps)?;
            let extra = [("epsilon_range", format!("{}:{}:{}", num(r.min), num(r.max), r.steps))];
            let mut text = header(config, &params, &extra);
            text.push_str("eps_crit,bracket_lo,bracket_hi\n");
            text.push_str(&row([num(th.epsilon), num(th.bracket.0), num(th.bracket.1)]));
            write_artifact(dir, "threshold.csv", &text, &mut written)?;
        }
        Mode::Spectra => {
            let analysis = Analysis::new(params)?;
            let grid = omega_grid(config.omega.min, config.omega.max, config.omega.steps)?;
            let spectra = analysis.spectra(&grid)?;
            let mut text = header(config, &params, &omega_header(config));
            text.push_str(&row(std::iter::once("omega".to_string()).chain(spectra_columns())));
            for s in &spectra {
                let mut cells = vec![num(s.omega)];
                for a in 0..6 {
                    for b in a..6 {
                        cells.push(num(s.matrix[(a, b)]));
                    }
                }
                text.push_str(&row(cells));
            }
            write_artifact(dir, "spectra.csv", &text, &mut written)?;
        }
        Mode::Correlations => {
            let analysis = Analysis::new(params)?;
            let grid = omega_grid(config.omega.min, config.omega.max, config.omega.steps)?;
            let reports = analysis.correlations(&grid)?;
            let hdr = header(config, &params, &omega_header(config));
            let mut text = hdr.clone();
            text.push_str(&row(correlation_columns()));
            for r in &reports {
                text.push_str(&correlation_row(r));
            }
            write_artifact(dir, "correlations.csv", &text, &mut written)?;

            let summary = GridSummary::from_reports(&reports);
            let mut text = hdr;
            let _ = writeln!(text, "# witness_gap_points = {}", summary.witness_gaps);
            text.push_str("quantity,min,omega\n");
            for (label, m) in summary.entries() {
                text.push_str(&row([label.to_string(), num(m.value), num(m.omega)]));
            }
            write_artifact(dir, "correlations_summary.csv", &text, &mut written)?;
        }
        Mode::Figures => {
            let regimes: Vec<u8> = match config.regime {
                Some(r) => vec![r],
                None => vec![1, 2],
            };
            let grid = omega_grid(config.omega.min, config.omega.max, config.omega.steps)?;
            for r in regimes {
                // an explicit preset keeps any flag overrides layered on top of it
                let p = match config.regime {
                    Some(_) => params,
                    None => validate_params(SystemParams::regime(r).expect("preset"), Normalization::Rescale)?,
                };
                let reports = Analysis::new(p)?.correlations(&grid)?;
                let hdr = header(config, &p, &omega_header(config));
                for (_, fig) in FIGURES.iter().filter(|(fr, _)| *fr == r) {
                    let text = family_table(&hdr, fig.labels, &reports, fig.pick);
                    write_artifact(dir, fig.file, &text, &mut written)?;
                    if config.gnuplot {
                        let script = gnuplot_script(fig.file, fig.title, fig.labels, fig.threshold);
                        write_artifact(dir, &fig.file.replace(".csv", ".gp"), &script, &mut written)?;
                    }
                }
            }
        }
        Mode::Stochastic => {
            let st = &config.stochastic;
            let reference = match find_steady_state(&params, &opts) {
                Ok(r) if r.converged => Some(r.state),
                Ok(_) => None,
                Err(e) => return Err(e),
            };
            let mut set = EnsembleSettings::new(st.dt, st.t_end, st.n_traj, config.seed);
            set.t_grid = (1..=10).map(|k| st.t_end * k as f64 / 10.0).collect();
            set.window_start = Some(st.window_start).filter(|&t| t < st.t_end);
            set.reference = reference;
            let m = run_ensemble(&params, &set)?;
            let extra = [
                ("seed", config.seed.to_string()),
                ("dt", num(st.dt)),
                ("t_end", num(st.t_end)),
                ("n_traj", st.n_traj.to_string()),
                ("window_start", num(st.window_start)),
            ];
            let text = moments_table(&header(config, &params, &extra), &m);
            write_artifact(dir, "moments.csv", &text, &mut written)?;
            println!("diverged: {} of {} trajectories", m.n_diverged, m.n_traj);
        }
    }
    Ok(written)
}
