//! Scenario files, bundled presets and output writers behind `sirctl`.
//!
//! A scenario is a TOML document with a top-level `kind` and one table per
//! concern:
//!
//! ```toml
//! kind = "mpc"          # uncontrolled | single-interval | optimal-interval
//!                       # | mpc | phase-portrait | s-infinity-sweep
//! t_end = 30.0          # horizon, in mean infectious periods
//! qss_threshold = 1e-4  # I below this counts as settled
//!
//! [model]               # r0 > r_min > 0, 0 < epsilon < 1
//! r0 = 3.0
//! r_min = 0.85
//! epsilon = 1e-3        # initial infected fraction
//!
//! [sampling]            # ts: controller sample period; dense_step: plant step
//! ts = 0.5
//! substeps = 8
//! dense_step = 0.0078125
//!
//! [mpc]
//! control_start = 2.0
//! horizon = 6
//! i_max = 0.05          # omit for no peak cap
//! ```
//!
//! Kind-specific tables are `[uncontrolled]` (`u`), `[interval]`
//! (`t_start`, `t_end`, `r_i`), `[optimal]` (`t_start`, `max_duration`),
//! `[mpc]` (`control_start`, `horizon`, `weight_q`, `weight_u`, `weight_p`,
//! `i_max`, `slack_weight`, `grid`), `[portrait]` (`r`, `starts` as
//! `[s, i, c]` triples) and `[sweep]` (`r`, `i0`, `s0_min`, `s0_max`,
//! `points`). Unknown keys, and tables that do not belong to the chosen kind,
//! are rejected with the line they appear on.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::ops::Range;
use std::path::{Path, PathBuf};

use serde::Deserialize;
use toml::Spanned;

use crate::analysis::{
    detect_events, herd_immunity, s_infinity, TrajectoryEvents, DEFAULT_QSS_THRESHOLD,
};
use crate::integrator::{dense_trajectory, InputSchedule, SamplingConfig};
use crate::model::{ControlGrid, EpidemicState, ModelParams};
use crate::mpc::{closed_loop, ClosedLoopStep, MpcConfig};
use crate::single_interval::{quasi_optimal_interval, SingleInterval};
use crate::trajectory::{Trajectory, TrajectoryPoint};
use crate::Error;

const TRAJECTORY_FILE: &str = "trajectory.csv";
const EVENTS_FILE: &str = "events.txt";
const CONTROLLER_FILE: &str = "controller.csv";
const PORTRAIT_FILE: &str = "portrait.csv";
const SWEEP_FILE: &str = "sweep.csv";

/// Name and TOML source of every bundled scenario.
pub const PRESETS: &[(&str, &str)] = &[
    (
        "fig1_portrait",
        include_str!("../presets/fig1_portrait.toml"),
    ),
    ("fig2_sweep", include_str!("../presets/fig2_sweep.toml")),
    ("fig3_blue", include_str!("../presets/fig3_blue.toml")),
    ("fig3_red", include_str!("../presets/fig3_red.toml")),
    ("fig3_opt", include_str!("../presets/fig3_opt.toml")),
    (
        "fig4_unconstrained",
        include_str!("../presets/fig4_unconstrained.toml"),
    ),
    ("fig4_ipp015", include_str!("../presets/fig4_ipp015.toml")),
    ("fig4_ipp010", include_str!("../presets/fig4_ipp010.toml")),
    ("fig4_ipp005", include_str!("../presets/fig4_ipp005.toml")),
];

pub fn preset_source(name: &str) -> Option<&'static str> {
    PRESETS
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, src)| *src)
}

#[derive(Debug, thiserror::Error)]
pub enum ScenarioError {
    #[error("config error{}: {message}", line.map(|l| format!(" at line {l}")).unwrap_or_default())]
    Config {
        line: Option<usize>,
        message: String,
    },

    #[error("numeric failure in module `{}`: {0}", .0.module())]
    Numeric(#[from] Error),

    #[error("cannot write {}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },
}

impl ScenarioError {
    /// Process exit status for the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            ScenarioError::Config { .. } => 2,
            ScenarioError::Numeric(_) => 3,
            ScenarioError::Io { .. } => 1,
        }
    }

    fn config(line: Option<usize>, message: impl Into<String>) -> Self {
        ScenarioError::Config {
            line,
            message: message.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScenarioKind {
    Uncontrolled,
    SingleInterval,
    OptimalInterval,
    Mpc,
    PhasePortrait,
    SInfinitySweep,
}

impl ScenarioKind {
    pub fn name(self) -> &'static str {
        match self {
            ScenarioKind::Uncontrolled => "uncontrolled",
            ScenarioKind::SingleInterval => "single-interval",
            ScenarioKind::OptimalInterval => "optimal-interval",
            ScenarioKind::Mpc => "mpc",
            ScenarioKind::PhasePortrait => "phase-portrait",
            ScenarioKind::SInfinitySweep => "s-infinity-sweep",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ScenarioDetail {
    Uncontrolled {
        u: f64,
    },
    SingleInterval(SingleInterval),
    OptimalInterval {
        t_start: f64,
        max_duration: f64,
    },
    Mpc {
        config: MpcConfig,
        control_start: f64,
    },
    PhasePortrait {
        starts: Vec<EpidemicState>,
    },
    Sweep {
        r: f64,
        i0: Vec<f64>,
        s0: Vec<f64>,
    },
}

/// A parsed and validated scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub params: ModelParams,
    pub sampling: SamplingConfig,
    pub t_end: f64,
    pub qss_threshold: f64,
    pub output: Option<PathBuf>,
    pub detail: ScenarioDetail,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    kind: Spanned<ScenarioKind>,
    t_end: Option<Spanned<f64>>,
    qss_threshold: Option<Spanned<f64>>,
    output: Option<String>,
    model: Option<Spanned<RawModel>>,
    sampling: Option<Spanned<RawSampling>>,
    uncontrolled: Option<Spanned<RawUncontrolled>>,
    interval: Option<Spanned<RawInterval>>,
    optimal: Option<Spanned<RawOptimal>>,
    mpc: Option<Spanned<RawMpc>>,
    portrait: Option<Spanned<RawPortrait>>,
    sweep: Option<Spanned<RawSweep>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawModel {
    r0: Option<f64>,
    r_min: Option<f64>,
    epsilon: Option<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSampling {
    ts: Option<f64>,
    substeps: Option<usize>,
    dense_step: Option<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawUncontrolled {
    u: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawInterval {
    t_start: f64,
    t_end: f64,
    r_i: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOptimal {
    t_start: f64,
    max_duration: Option<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMpc {
    control_start: f64,
    horizon: Option<usize>,
    weight_q: Option<f64>,
    weight_u: Option<f64>,
    weight_p: Option<f64>,
    i_max: Option<f64>,
    slack_weight: Option<f64>,
    grid: Option<Vec<f64>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPortrait {
    r: Option<f64>,
    starts: Vec<[f64; 3]>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSweep {
    r: Option<f64>,
    i0: Vec<f64>,
    s0_min: Option<f64>,
    s0_max: Option<f64>,
    points: Option<usize>,
}

const DEFAULT_T_END: f64 = 60.0;
const DEFAULT_MAX_HOLD: f64 = 200.0;
const DEFAULT_SWEEP_POINTS: usize = 101;

struct LineIndex<'a>(&'a str);

impl LineIndex<'_> {
    fn line(&self, offset: usize) -> usize {
        let end = offset.min(self.0.len());
        self.0.as_bytes()[..end]
            .iter()
            .filter(|&&b| b == b'\n')
            .count()
            + 1
    }

    fn of<T>(&self, spanned: &Spanned<T>) -> Option<usize> {
        Some(self.line(spanned.span().start))
    }

    fn invalid<T>(&self, spanned: &Spanned<T>, e: Error) -> ScenarioError {
        ScenarioError::config(self.of(spanned), e.to_string())
    }
}

impl ScenarioConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, ScenarioError> {
        let lines = LineIndex(text);
        let raw: RawConfig = toml::from_str(text).map_err(|e| {
            let line = e.span().map(|s: Range<usize>| lines.line(s.start));
            ScenarioError::config(line, e.message().to_string())
        })?;
        let kind = *raw.kind.get_ref();

        let foreign = [
            (
                "uncontrolled",
                raw.uncontrolled.as_ref().map(|s| s.span().start),
                ScenarioKind::Uncontrolled,
            ),
            (
                "interval",
                raw.interval.as_ref().map(|s| s.span().start),
                ScenarioKind::SingleInterval,
            ),
            (
                "optimal",
                raw.optimal.as_ref().map(|s| s.span().start),
                ScenarioKind::OptimalInterval,
            ),
            (
                "mpc",
                raw.mpc.as_ref().map(|s| s.span().start),
                ScenarioKind::Mpc,
            ),
            (
                "portrait",
                raw.portrait.as_ref().map(|s| s.span().start),
                ScenarioKind::PhasePortrait,
            ),
            (
                "sweep",
                raw.sweep.as_ref().map(|s| s.span().start),
                ScenarioKind::SInfinitySweep,
            ),
        ];
        for (table, at, owner) in foreign {
            if let Some(at) = at {
                if owner != kind {
                    return Err(ScenarioError::config(
                        Some(lines.line(at)),
                        format!("table [{table}] does not apply to kind \"{}\"", kind.name()),
                    ));
                }
            }
        }

        let defaults = ModelParams::default();
        let params = match &raw.model {
            None => defaults,
            Some(m) => {
                let v = m.get_ref();
                ModelParams::new(
                    v.r0.unwrap_or(defaults.r0()),
                    v.r_min.unwrap_or(defaults.r_min()),
                    v.epsilon.unwrap_or(defaults.epsilon()),
                )
                .map_err(|e| lines.invalid(m, e))?
            }
        };

        let sampling = match &raw.sampling {
            None => SamplingConfig::default(),
            Some(s) => {
                let v = s.get_ref();
                let ts = v.ts.unwrap_or(SamplingConfig::DEFAULT_TS);
                SamplingConfig::new(
                    ts,
                    v.substeps.unwrap_or(SamplingConfig::DEFAULT_SUBSTEPS),
                    v.dense_step.unwrap_or(ts / SamplingConfig::DENSE_DIVISOR),
                )
                .map_err(|e| lines.invalid(s, e))?
            }
        };

        let t_end = match &raw.t_end {
            None => DEFAULT_T_END,
            Some(t) if t.get_ref().is_finite() && *t.get_ref() >= 0.0 => *t.get_ref(),
            Some(t) => {
                return Err(ScenarioError::config(
                    lines.of(t),
                    "t_end must be finite and >= 0",
                ))
            }
        };
        let qss_threshold = match &raw.qss_threshold {
            None => DEFAULT_QSS_THRESHOLD,
            Some(q) if *q.get_ref() > 0.0 && *q.get_ref() < 1.0 => *q.get_ref(),
            Some(q) => {
                return Err(ScenarioError::config(
                    lines.of(q),
                    "qss_threshold must lie in (0, 1)",
                ))
            }
        };

        let missing = |table: &str| {
            ScenarioError::config(
                lines.of(&raw.kind),
                format!("kind \"{}\" requires a [{table}] table", kind.name()),
            )
        };

        let detail = match kind {
            ScenarioKind::Uncontrolled => {
                let u = match &raw.uncontrolled {
                    None => 0.0,
                    Some(t) => {
                        let u = t.get_ref().u;
                        params.effective_r(u).map_err(|e| lines.invalid(t, e))?;
                        u
                    }
                };
                ScenarioDetail::Uncontrolled { u }
            }
            ScenarioKind::SingleInterval => {
                let t = raw.interval.as_ref().ok_or_else(|| missing("interval"))?;
                let v = t.get_ref();
                let iv = SingleInterval::new(v.t_start, v.t_end, v.r_i)
                    .map_err(|e| lines.invalid(t, e))?;
                ScenarioDetail::SingleInterval(iv)
            }
            ScenarioKind::OptimalInterval => {
                let t = raw.optimal.as_ref().ok_or_else(|| missing("optimal"))?;
                let v = t.get_ref();
                let max_duration = v.max_duration.unwrap_or(DEFAULT_MAX_HOLD);
                if !(v.t_start.is_finite() && v.t_start >= 0.0) {
                    return Err(ScenarioError::config(
                        lines.of(t),
                        "t_start must be finite and >= 0",
                    ));
                }
                if !(max_duration.is_finite() && max_duration > 0.0) {
                    return Err(ScenarioError::config(
                        lines.of(t),
                        "max_duration must be finite and > 0",
                    ));
                }
                ScenarioDetail::OptimalInterval {
                    t_start: v.t_start,
                    max_duration,
                }
            }
            ScenarioKind::Mpc => {
                let t = raw.mpc.as_ref().ok_or_else(|| missing("mpc"))?;
                let v = t.get_ref();
                let d = MpcConfig::default();
                let grid = match &v.grid {
                    None => d.grid.clone(),
                    Some(levels) => {
                        ControlGrid::new(levels.clone()).map_err(|e| lines.invalid(t, e))?
                    }
                };
                let config = MpcConfig {
                    horizon: v.horizon.unwrap_or(d.horizon),
                    weight_q: v.weight_q.unwrap_or(d.weight_q),
                    weight_u: v.weight_u.unwrap_or(d.weight_u),
                    weight_p: v.weight_p.unwrap_or(d.weight_p),
                    i_max: v.i_max,
                    slack_weight: v.slack_weight.unwrap_or(d.slack_weight),
                    grid,
                    sampling,
                    qss_threshold,
                };
                config.validate().map_err(|e| lines.invalid(t, e))?;
                if !(v.control_start.is_finite() && v.control_start >= 0.0) {
                    return Err(ScenarioError::config(
                        lines.of(t),
                        "control_start must be finite and >= 0",
                    ));
                }
                ScenarioDetail::Mpc {
                    config,
                    control_start: v.control_start,
                }
            }
            ScenarioKind::PhasePortrait => {
                let t = raw.portrait.as_ref().ok_or_else(|| missing("portrait"))?;
                let v = t.get_ref();
                if let Some(r) = v.r {
                    herd_immunity(r).map_err(|e| lines.invalid(t, e))?;
                }
                let starts = v
                    .starts
                    .iter()
                    .map(|&[s, i, c]| EpidemicState::new(s, i, c))
                    .collect::<Result<Vec<_>, _>>()
                    .map_err(|e| lines.invalid(t, e))?;
                if starts.is_empty() {
                    return Err(ScenarioError::config(
                        lines.of(t),
                        "starts must not be empty",
                    ));
                }
                let params = portrait_params(&params, v.r).map_err(|e| lines.invalid(t, e))?;
                return Ok(ScenarioConfig {
                    params,
                    sampling,
                    t_end,
                    qss_threshold,
                    output: raw.output.map(PathBuf::from),
                    detail: ScenarioDetail::PhasePortrait { starts },
                });
            }
            ScenarioKind::SInfinitySweep => {
                let t = raw.sweep.as_ref().ok_or_else(|| missing("sweep"))?;
                let v = t.get_ref();
                let r = v.r.unwrap_or(params.r0());
                herd_immunity(r).map_err(|e| lines.invalid(t, e))?;
                let (lo, hi) = (v.s0_min.unwrap_or(0.0), v.s0_max.unwrap_or(1.0));
                let points = v.points.unwrap_or(DEFAULT_SWEEP_POINTS);
                if !(0.0..=1.0).contains(&lo) || !(0.0..=1.0).contains(&hi) || lo > hi {
                    return Err(ScenarioError::config(
                        lines.of(t),
                        "need 0 <= s0_min <= s0_max <= 1",
                    ));
                }
                if points < 2 {
                    return Err(ScenarioError::config(
                        lines.of(t),
                        "points must be at least 2",
                    ));
                }
                if v.i0.is_empty() || v.i0.iter().any(|i| !(0.0..=1.0).contains(i)) {
                    return Err(ScenarioError::config(
                        lines.of(t),
                        "i0 must be a non-empty list of values in [0, 1]",
                    ));
                }
                let s0 = (0..points)
                    .map(|k| lo + (hi - lo) * k as f64 / (points - 1) as f64)
                    .collect();
                ScenarioDetail::Sweep {
                    r,
                    i0: v.i0.clone(),
                    s0,
                }
            }
        };

        Ok(ScenarioConfig {
            params,
            sampling,
            t_end,
            qss_threshold,
            output: raw.output.map(PathBuf::from),
            detail,
        })
    }

    pub fn from_preset(name: &str) -> Result<Self, ScenarioError> {
        let src = preset_source(name).ok_or_else(|| {
            let known: Vec<&str> = PRESETS.iter().map(|(n, _)| *n).collect();
            ScenarioError::config(
                None,
                format!("unknown preset `{name}` (known: {})", known.join(", ")),
            )
        })?;
        Self::from_toml_str(src)
    }

    pub fn from_path(path: &Path) -> Result<Self, ScenarioError> {
        let text = fs::read_to_string(path).map_err(|e| {
            ScenarioError::config(None, format!("cannot read {}: {e}", path.display()))
        })?;
        Self::from_toml_str(&text)
    }

    pub fn kind(&self) -> ScenarioKind {
        match self.detail {
            ScenarioDetail::Uncontrolled { .. } => ScenarioKind::Uncontrolled,
            ScenarioDetail::SingleInterval(_) => ScenarioKind::SingleInterval,
            ScenarioDetail::OptimalInterval { .. } => ScenarioKind::OptimalInterval,
            ScenarioDetail::Mpc { .. } => ScenarioKind::Mpc,
            ScenarioDetail::PhasePortrait { .. } => ScenarioKind::PhasePortrait,
            ScenarioDetail::Sweep { .. } => ScenarioKind::SInfinitySweep,
        }
    }
}

/// The portrait's reproduction number replaces `r0`; `r_min` is pulled
/// below it if needed since no input is ever applied.
fn portrait_params(params: &ModelParams, r: Option<f64>) -> crate::Result<ModelParams> {
    match r {
        None => Ok(*params),
        Some(r) => ModelParams::new(r, params.r_min().min(r / 2.0), params.epsilon()),
    }
}

/// Uncontrolled trajectories from every start, at the dense plant step.
pub fn phase_portrait(
    params: &ModelParams,
    starts: &[EpidemicState],
    cfg: &SamplingConfig,
    t_end: f64,
) -> crate::Result<Vec<Trajectory>> {
    let schedule = InputSchedule::constant(params, 0.0)?;
    starts
        .iter()
        .map(|x0| dense_trajectory(x0, &schedule, cfg, t_end))
        .collect()
}

/// `s_infinity` tabulated over `i0` rows and `s0` columns.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepGrid {
    pub r: f64,
    pub i0: Vec<f64>,
    pub s0: Vec<f64>,
    /// `values[row][col]`; `None` where `s0 + i0 > 1`.
    pub values: Vec<Vec<Option<f64>>>,
}

pub fn s_infinity_sweep(r: f64, i0: &[f64], s0: &[f64]) -> crate::Result<SweepGrid> {
    let mut values = Vec::with_capacity(i0.len());
    for &i in i0 {
        let row = s0
            .iter()
            .map(|&s| {
                if s + i > 1.0 + crate::model::SIMPLEX_TOL {
                    Ok(None)
                } else {
                    s_infinity(s, i, r).map(Some)
                }
            })
            .collect::<crate::Result<Vec<_>>>()?;
        values.push(row);
    }
    Ok(SweepGrid {
        r,
        i0: i0.to_vec(),
        s0: s0.to_vec(),
        values,
    })
}

/// Everything a scenario run produced, before it is written out.
#[derive(Debug, Clone)]
pub enum ScenarioOutcome {
    Trajectory(TrajectoryReport),
    Portrait {
        r: f64,
        trajectories: Vec<Trajectory>,
        s_star: f64,
    },
    Sweep {
        grid: SweepGrid,
        s_star: f64,
    },
}

#[derive(Debug, Clone)]
pub struct TrajectoryReport {
    pub kind: ScenarioKind,
    pub trajectory: Trajectory,
    pub events: TrajectoryEvents,
    pub release_time: Option<f64>,
    pub distancing_duration: f64,
    pub s_star: f64,
    /// Kind-specific `key: value` lines appended to the events summary.
    pub extra: Vec<(&'static str, String)>,
    pub controller: Vec<ClosedLoopStep>,
}

impl TrajectoryReport {
    pub fn terminal_state(&self) -> EpidemicState {
        self.trajectory
            .terminal_state()
            .expect("trajectory is never empty")
    }

    pub fn max_infected(&self) -> f64 {
        self.trajectory.max_infected().map_or(0.0, |(_, i)| i)
    }
}

/// Time with a nonzero input on `[0, t_end]`.
fn distancing_time(traj: &Trajectory) -> f64 {
    traj.points()
        .windows(2)
        .filter(|w| w[0].u != 0.0)
        .map(|w| w[1].tau - w[0].tau)
        .sum()
}

pub fn execute(config: &ScenarioConfig) -> Result<ScenarioOutcome, ScenarioError> {
    let params = &config.params;
    let cfg = &config.sampling;
    let qss = config.qss_threshold;
    let s_star = herd_immunity(params.r0())?;
    let t_end = config.t_end;

    let (trajectory, release_time, extra, controller) = match &config.detail {
        ScenarioDetail::Uncontrolled { u } => {
            let schedule = InputSchedule::constant(params, *u)?;
            let traj = dense_trajectory(&params.initial_state(), &schedule, cfg, t_end)?;
            (traj, None, vec![], vec![])
        }
        ScenarioDetail::SingleInterval(iv) => {
            let traj =
                dense_trajectory(&params.initial_state(), &iv.schedule(params)?, cfg, t_end)?;
            let extra = vec![
                (
                    "interval",
                    format!("[{}, {}]", fmt(iv.t_start()), fmt(iv.t_end())),
                ),
                ("R_i", fmt(iv.r_i())),
                ("realizable", iv.is_realizable(params).to_string()),
            ];
            (traj, Some(iv.t_end()), extra, vec![])
        }
        ScenarioDetail::OptimalInterval {
            t_start,
            max_duration,
        } => {
            let (opt, iv) = quasi_optimal_interval(params, *t_start, cfg, qss, *max_duration)?;
            let traj =
                dense_trajectory(&params.initial_state(), &iv.schedule(params)?, cfg, t_end)?;
            let extra = vec![
                (
                    "interval",
                    format!("[{}, {}]", fmt(iv.t_start()), fmt(iv.t_end())),
                ),
                ("R_i_op", fmt(opt.r_i)),
                ("root_residual", fmt(opt.residual)),
                ("realizable", opt.realizable.to_string()),
            ];
            (traj, Some(iv.t_end()), extra, vec![])
        }
        ScenarioDetail::Mpc {
            config: mpc,
            control_start,
        } => {
            if t_end <= *control_start {
                let schedule = InputSchedule::constant(params, 0.0)?;
                let traj = dense_trajectory(&params.initial_state(), &schedule, cfg, t_end)?;
                (traj, None, vec![], vec![])
            } else {
                let run = closed_loop(params, mpc, *control_start, t_end)?;
                let mut extra = vec![
                    ("herd_immunity_time", opt_fmt(run.herd_immunity_time)),
                    ("max_I", fmt(run.max_infected())),
                    ("i_max", mpc.i_max.map_or_else(|| "none".to_string(), fmt)),
                ];
                extra.push((
                    "all_feasible",
                    run.steps.iter().all(|s| s.feasible).to_string(),
                ));
                (run.trajectory, run.release_time, extra, run.steps)
            }
        }
        ScenarioDetail::PhasePortrait { starts } => {
            let trajectories = phase_portrait(params, starts, cfg, t_end)?;
            return Ok(ScenarioOutcome::Portrait {
                r: params.r0(),
                trajectories,
                s_star,
            });
        }
        ScenarioDetail::Sweep { r, i0, s0 } => {
            let grid = s_infinity_sweep(*r, i0, s0)?;
            return Ok(ScenarioOutcome::Sweep {
                grid,
                s_star: herd_immunity(*r)?,
            });
        }
    };

    let events = detect_events(&trajectory, release_time, qss);
    Ok(ScenarioOutcome::Trajectory(TrajectoryReport {
        kind: config.kind(),
        distancing_duration: distancing_time(&trajectory),
        trajectory,
        events,
        release_time,
        s_star,
        extra,
        controller,
    }))
}

/// Runs the scenario and writes its files into `out_dir`, creating it if
/// needed. Returns the paths written.
pub fn run_scenario(
    config: &ScenarioConfig,
    out_dir: &Path,
) -> Result<Vec<PathBuf>, ScenarioError> {
    let outcome = execute(config)?;
    write_outcome(&outcome, out_dir)
}

pub fn write_outcome(
    outcome: &ScenarioOutcome,
    out_dir: &Path,
) -> Result<Vec<PathBuf>, ScenarioError> {
    fs::create_dir_all(out_dir).map_err(|source| ScenarioError::Io {
        path: out_dir.to_path_buf(),
        source,
    })?;
    let files: Vec<(&str, String)> = match outcome {
        ScenarioOutcome::Trajectory(rep) => {
            let mut files = vec![
                (TRAJECTORY_FILE, trajectory_csv(&rep.trajectory)),
                (EVENTS_FILE, events_summary(rep)),
            ];
            if !rep.controller.is_empty() {
                files.push((CONTROLLER_FILE, controller_csv(&rep.controller)));
            }
            files
        }
        ScenarioOutcome::Portrait {
            r,
            trajectories,
            s_star,
        } => vec![
            (PORTRAIT_FILE, portrait_csv(trajectories)),
            (EVENTS_FILE, portrait_summary(*r, trajectories, *s_star)),
        ],
        ScenarioOutcome::Sweep { grid, s_star } => vec![
            (SWEEP_FILE, sweep_csv(grid)),
            (
                EVENTS_FILE,
                format!(
                    "kind: s-infinity-sweep\nR: {}\nS_star: {}\n",
                    fmt(grid.r),
                    fmt(*s_star)
                ),
            ),
        ],
    };
    files
        .into_iter()
        .map(|(name, body)| {
            let path = out_dir.join(name);
            fs::write(&path, body).map_err(|source| ScenarioError::Io {
                path: path.clone(),
                source,
            })?;
            Ok(path)
        })
        .collect()
}

/// 17 significant digits, enough to round-trip any `f64`.
pub fn fmt(x: f64) -> String {
    format!("{x:.16e}")
}

fn opt_fmt(x: Option<f64>) -> String {
    x.map_or_else(|| "none".to_string(), fmt)
}

fn push_point(out: &mut String, p: &TrajectoryPoint) {
    let _ = writeln!(
        out,
        "{},{},{},{},{},{}",
        fmt(p.tau),
        fmt(p.state.s()),
        fmt(p.state.i()),
        fmt(p.state.c()),
        fmt(p.u),
        fmt(p.r_effective)
    );
}

pub fn trajectory_csv(traj: &Trajectory) -> String {
    let mut out = String::from("tau,S,I,C,u,R_effective\n");
    for p in traj.points() {
        push_point(&mut out, p);
    }
    out
}

fn controller_csv(steps: &[ClosedLoopStep]) -> String {
    let mut out = String::from("tau,S,I,C,u,cost,feasible,nodes_explored\n");
    for s in steps {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            fmt(s.tau),
            fmt(s.state.s()),
            fmt(s.state.i()),
            fmt(s.state.c()),
            fmt(s.u),
            fmt(s.cost),
            s.feasible,
            s.nodes_explored
        );
    }
    out
}

fn portrait_csv(trajectories: &[Trajectory]) -> String {
    let mut out = String::from("start,tau,S,I,C\n");
    for (k, traj) in trajectories.iter().enumerate() {
        for p in traj.points() {
            let _ = writeln!(
                out,
                "{k},{},{},{},{}",
                fmt(p.tau),
                fmt(p.state.s()),
                fmt(p.state.i()),
                fmt(p.state.c())
            );
        }
    }
    out
}

fn sweep_csv(grid: &SweepGrid) -> String {
    let mut out = String::from("i0,s0,s_infinity\n");
    for (row, &i0) in grid.values.iter().zip(&grid.i0) {
        for (v, &s0) in row.iter().zip(&grid.s0) {
            if let Some(v) = v {
                let _ = writeln!(out, "{},{},{}", fmt(i0), fmt(s0), fmt(*v));
            }
        }
    }
    out
}

pub fn events_summary(rep: &TrajectoryReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "kind: {}", rep.kind.name());
    let _ = writeln!(out, "peaks: {}", rep.events.peaks.len());
    for p in &rep.events.peaks {
        let _ = writeln!(out, "peak: tau={} I={}", fmt(p.tau), fmt(p.value));
    }
    let _ = writeln!(out, "qss_time: {}", opt_fmt(rep.events.qss_time));
    let _ = writeln!(out, "release_time: {}", opt_fmt(rep.release_time));
    match rep.events.second_wave {
        Some(p) => {
            let _ = writeln!(out, "second_wave: tau={} I={}", fmt(p.tau), fmt(p.value));
        }
        None => out.push_str("second_wave: none\n"),
    }
    let _ = writeln!(out, "distancing_duration: {}", fmt(rep.distancing_duration));
    let _ = writeln!(out, "terminal_S: {}", fmt(rep.terminal_state().s()));
    let _ = writeln!(out, "S_star: {}", fmt(rep.s_star));
    for (k, v) in &rep.extra {
        let _ = writeln!(out, "{k}: {v}");
    }
    out
}

fn portrait_summary(r: f64, trajectories: &[Trajectory], s_star: f64) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "kind: phase-portrait\nR: {}\nS_star: {}",
        fmt(r),
        fmt(s_star)
    );
    for (k, traj) in trajectories.iter().enumerate() {
        let x = traj.terminal_state().expect("trajectory is never empty");
        let _ = writeln!(
            out,
            "terminal[{k}]: S={} I={} C={}",
            fmt(x.s()),
            fmt(x.i()),
            fmt(x.c())
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_preset_parses() {
        for (name, _) in PRESETS {
            ScenarioConfig::from_preset(name).unwrap_or_else(|e| panic!("{name}: {e}"));
        }
    }

    #[test]
    fn unknown_key_reports_its_line() {
        let text = "kind = \"uncontrolled\"\n\n[model]\nr0 = 2.5\nrzero = 3.0\n";
        match ScenarioConfig::from_toml_str(text) {
            Err(ScenarioError::Config { line, message }) => {
                assert_eq!(line, Some(5));
                assert!(message.contains("rzero"), "{message}");
            }
            other => panic!("expected config error, got {other:?}"),
        }
    }

    #[test]
    fn invalid_values_point_at_their_table() {
        let text = "kind = \"uncontrolled\"\nt_end = 10.0\n\n[model]\nr0 = 0.5\nr_min = 0.85\n";
        let err = ScenarioConfig::from_toml_str(text).unwrap_err();
        assert!(
            matches!(err, ScenarioError::Config { line: Some(4), .. }),
            "{err}"
        );
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn tables_must_match_kind() {
        let text = "kind = \"uncontrolled\"\n[interval]\nt_start = 2.0\nt_end = 20.0\nr_i = 0.5\n";
        let err = ScenarioConfig::from_toml_str(text).unwrap_err();
        assert!(
            matches!(err, ScenarioError::Config { line: Some(2), .. }),
            "{err}"
        );
        let text = "kind = \"mpc\"\n";
        assert!(matches!(
            ScenarioConfig::from_toml_str(text),
            Err(ScenarioError::Config { line: Some(1), .. })
        ));
    }

    #[test]
    fn numeric_errors_name_the_module() {
        let text = "kind = \"optimal-interval\"\n[model]\nr0 = 2.5\n[optimal]\nt_start = 15.0\n";
        let cfg = ScenarioConfig::from_toml_str(text).unwrap();
        let err = execute(&cfg).unwrap_err();
        assert_eq!(err.exit_code(), 3);
        assert!(err.to_string().contains("single_interval"), "{err}");
    }

    #[test]
    fn empty_horizon_gives_one_row() {
        let text = "kind = \"uncontrolled\"\nt_end = 0.0\n";
        let cfg = ScenarioConfig::from_toml_str(text).unwrap();
        let ScenarioOutcome::Trajectory(rep) = execute(&cfg).unwrap() else {
            panic!()
        };
        assert_eq!(trajectory_csv(&rep.trajectory).lines().count(), 2);
        assert!(rep.events.peaks.is_empty());
        assert!(rep.events.second_wave.is_none());
    }

    #[test]
    fn number_format_round_trips() {
        for x in [0.1, 1.0 / 3.0, 1e-300, 2.5, 0.0, -7.25e-9] {
            let s = fmt(x);
            assert_eq!(s.parse::<f64>().unwrap(), x);
            let digits = s
                .split('e')
                .next()
                .unwrap()
                .chars()
                .filter(char::is_ascii_digit)
                .count();
            assert_eq!(digits, 17);
        }
    }

    #[test]
    fn sweep_skips_points_off_the_simplex() {
        let g = s_infinity_sweep(2.5, &[0.5], &[0.0, 0.5, 0.75]).unwrap();
        assert!(g.values[0][0].is_some());
        assert!(g.values[0][1].is_some());
        assert!(g.values[0][2].is_none());
    }
}
