//! Fixed-step RK4 integration of the controlled SIR system.
//!
//! [`sample_map`] is the discrete-time prediction model `x_{k+1} = F(x_k, u_k)`
//! used by the controller. [`dense_trajectory`] integrates the same field at a
//! much finer step and serves as the ground-truth plant.

use crate::error::{Error, Result};
use crate::model::{rhs, EpidemicState, ModelParams};
use crate::trajectory::{Trajectory, TrajectoryPoint};

/// Negative components above this magnitude are treated as integration failure.
pub const NEGATIVITY_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SamplingConfig {
    ts: f64,
    substeps: usize,
    dense_step: f64,
}

impl SamplingConfig {
    pub const DEFAULT_TS: f64 = 0.5;
    pub const DEFAULT_SUBSTEPS: usize = 8;
    /// Dense reference step as a fraction of `ts`.
    pub const DENSE_DIVISOR: f64 = 64.0;

    pub fn new(ts: f64, substeps: usize, dense_step: f64) -> Result<Self> {
        if !(ts.is_finite() && ts > 0.0) {
            return Err(Error::param("ts", format!("must be > 0, got {ts}")));
        }
        if substeps == 0 {
            return Err(Error::param("substeps", "must be at least 1"));
        }
        if !(dense_step > 0.0 && dense_step <= ts) {
            return Err(Error::param(
                "dense_step",
                format!("must lie in (0, ts = {ts}], got {dense_step}"),
            ));
        }
        Ok(SamplingConfig {
            ts,
            substeps,
            dense_step,
        })
    }

    /// `ts` with the default substep count and `dense_step = ts / 64`.
    pub fn with_ts(ts: f64) -> Result<Self> {
        Self::new(ts, Self::DEFAULT_SUBSTEPS, ts / Self::DENSE_DIVISOR)
    }

    pub fn ts(&self) -> f64 {
        self.ts
    }

    pub fn substeps(&self) -> usize {
        self.substeps
    }

    pub fn dense_step(&self) -> f64 {
        self.dense_step
    }

    /// RK4 step used by [`sample_map`].
    pub fn prediction_step(&self) -> f64 {
        self.ts / self.substeps as f64
    }
}

impl Default for SamplingConfig {
    fn default() -> Self {
        SamplingConfig {
            ts: Self::DEFAULT_TS,
            substeps: Self::DEFAULT_SUBSTEPS,
            dense_step: Self::DEFAULT_TS / Self::DENSE_DIVISOR,
        }
    }
}

/// One classical RK4 step on raw components. No sign checks.
#[inline]
pub(crate) fn rk4_raw(s: f64, i: f64, c: f64, r: f64, h: f64) -> (f64, f64, f64) {
    let k1 = rhs(s, i, r);
    let k2 = rhs(s + 0.5 * h * k1.ds, i + 0.5 * h * k1.di, r);
    let k3 = rhs(s + 0.5 * h * k2.ds, i + 0.5 * h * k2.di, r);
    let k4 = rhs(s + h * k3.ds, i + h * k3.di, r);
    let w = h / 6.0;
    (
        s + w * (k1.ds + 2.0 * k2.ds + 2.0 * k3.ds + k4.ds),
        i + w * (k1.di + 2.0 * k2.di + 2.0 * k3.di + k4.di),
        c + w * (k1.dc + 2.0 * k2.dc + 2.0 * k3.dc + k4.dc),
    )
}

fn check_component(v: f64, name: &'static str, tau: f64) -> Result<f64> {
    if v >= 0.0 {
        Ok(v)
    } else if v > -NEGATIVITY_TOL {
        Ok(0.0)
    } else {
        Err(Error::IntegrationFailure {
            tau,
            component: name,
            value: v,
        })
    }
}

pub(crate) fn rk4_step_at(
    state: &EpidemicState,
    r: f64,
    h: f64,
    tau: f64,
) -> Result<EpidemicState> {
    let (s, i, c) = rk4_raw(state.s(), state.i(), state.c(), r, h);
    if !(s.is_finite() && i.is_finite() && c.is_finite()) {
        return Err(Error::IntegrationFailure {
            tau,
            component: "state",
            value: f64::NAN,
        });
    }
    Ok(EpidemicState::from_raw(
        check_component(s, "S", tau)?,
        check_component(i, "I", tau)?,
        check_component(c, "C", tau)?,
    ))
}

/// Single RK4 step of length `h` under constant reproduction number `r`.
///
/// Round-off negativity below [`NEGATIVITY_TOL`] is clamped to zero; anything
/// larger is reported as an integration failure (time relative to the step start).
pub fn rk4_step(state: &EpidemicState, r: f64, h: f64) -> Result<EpidemicState> {
    if !(h.is_finite() && h > 0.0) {
        return Err(Error::param("h", format!("step must be > 0, got {h}")));
    }
    if !(r.is_finite() && r > 0.0) {
        return Err(Error::param("r_effective", format!("must be > 0, got {r}")));
    }
    rk4_step_at(state, r, h, h)
}

/// Advances one sampling period `ts` under constant input `u`.
pub fn sample_map(
    state: &EpidemicState,
    u: f64,
    params: &ModelParams,
    cfg: &SamplingConfig,
) -> Result<EpidemicState> {
    let r = params.effective_r(u)?;
    let h = cfg.prediction_step();
    let mut x = *state;
    for k in 0..cfg.substeps {
        x = rk4_step_at(&x, r, h, (k + 1) as f64 * h)?;
    }
    Ok(x)
}

/// Piece of an [`InputSchedule`] active from `start` until the next piece.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub start: f64,
    pub u: f64,
    pub r: f64,
}

/// Piecewise-constant input signal starting at `tau = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct InputSchedule {
    segments: Vec<Segment>,
}

impl InputSchedule {
    fn from_segments(segments: Vec<Segment>) -> Result<Self> {
        match segments.first() {
            None => return Err(Error::param("schedule", "needs at least one segment")),
            Some(s) if s.start != 0.0 => {
                return Err(Error::param(
                    "schedule",
                    "first segment must start at tau = 0",
                ))
            }
            _ => {}
        }
        if segments.windows(2).any(|w| !(w[0].start < w[1].start)) {
            return Err(Error::param(
                "schedule",
                "segment starts must be strictly increasing",
            ));
        }
        if segments.iter().any(|s| !(s.r.is_finite() && s.r > 0.0)) {
            return Err(Error::param("schedule", "reproduction numbers must be > 0"));
        }
        Ok(InputSchedule { segments })
    }

    pub fn constant(params: &ModelParams, u: f64) -> Result<Self> {
        Self::from_inputs(params, &[(0.0, u)])
    }

    /// Schedule from `(start, u)` pairs with `u ∈ [0, 1]`.
    pub fn from_inputs(params: &ModelParams, pieces: &[(f64, f64)]) -> Result<Self> {
        let segments = pieces
            .iter()
            .map(|&(start, u)| {
                Ok(Segment {
                    start,
                    u,
                    r: params.effective_r(u)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_segments(segments)
    }

    /// Schedule from `(start, R)` pairs. `u` is recorded through the inverse
    /// affine map and may fall outside `[0, 1]` for unrealizable `R`.
    pub fn from_reproduction(params: &ModelParams, pieces: &[(f64, f64)]) -> Result<Self> {
        let segments = pieces
            .iter()
            .map(|&(start, r)| Segment {
                start,
                u: params.input_for(r),
                r,
            })
            .collect();
        Self::from_segments(segments)
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn at(&self, tau: f64) -> &Segment {
        let idx = self.segments.partition_point(|s| s.start <= tau);
        &self.segments[idx.saturating_sub(1)]
    }
}

/// Integrates `[t0, t1]` at constant input, appending every dense step to `out`.
/// `out` must already end with the state at `t0`.
pub(crate) fn integrate_piece(
    out: &mut Trajectory,
    u: f64,
    r: f64,
    t1: f64,
    dense_step: f64,
) -> Result<()> {
    let last = *out.last().expect("trajectory seeded with an initial point");
    let t0 = last.tau;
    let span = t1 - t0;
    if span <= 0.0 {
        return Ok(());
    }
    out.set_last_input(u, r);
    let n = ((span / dense_step) - 1e-9).ceil().max(1.0) as usize;
    let h = span / n as f64;
    let mut x = last.state;
    for k in 1..=n {
        let tau = if k == n { t1 } else { t0 + k as f64 * h };
        x = rk4_step_at(&x, r, h, tau)?;
        out.push(TrajectoryPoint {
            tau,
            state: x,
            u,
            r_effective: r,
        });
    }
    Ok(())
}

/// Ground-truth trajectory from `tau = 0` to `t_end` at the configured dense step,
/// with every step recorded. Input switches fall exactly on step boundaries.
pub fn dense_trajectory(
    state0: &EpidemicState,
    schedule: &InputSchedule,
    cfg: &SamplingConfig,
    t_end: f64,
) -> Result<Trajectory> {
    if !(t_end.is_finite() && t_end >= 0.0) {
        return Err(Error::param("t_end", format!("must be >= 0, got {t_end}")));
    }
    let segs = schedule.segments();
    let capacity = (t_end / cfg.dense_step).ceil() as usize + segs.len() + 1;
    let mut traj = Trajectory::with_capacity(capacity);
    let first = schedule.at(0.0);
    traj.push(TrajectoryPoint {
        tau: 0.0,
        state: *state0,
        u: first.u,
        r_effective: first.r,
    });
    for (k, seg) in segs.iter().enumerate() {
        if seg.start >= t_end {
            break;
        }
        let stop = segs.get(k + 1).map_or(t_end, |next| next.start.min(t_end));
        integrate_piece(&mut traj, seg.u, seg.r, stop, cfg.dense_step)?;
    }
    Ok(traj)
}
