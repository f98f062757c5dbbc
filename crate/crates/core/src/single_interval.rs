//! Single-interval distancing: one reduced reproduction number held over
//! `[t_start, t_end]`, and the quasi-optimal choice of that number which
//! lands the final size exactly on the herd-immunity threshold.

use crate::analysis::{herd_immunity, s_infinity};
use crate::error::{Error, Result};
use crate::integrator::{dense_trajectory, InputSchedule, SamplingConfig};
use crate::model::{EpidemicState, ModelParams};
use crate::trajectory::Trajectory;

/// Lower end of the bisection bracket on the interval reproduction number.
pub const R_BRACKET_LOW: f64 = 1e-6;
/// Target on `|S∞(S(τ_i), I(τ_i); R_i) - S*|`.
pub const ROOT_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SingleInterval {
    t_start: f64,
    t_end: f64,
    r_i: f64,
}

impl SingleInterval {
    pub fn new(t_start: f64, t_end: f64, r_i: f64) -> Result<Self> {
        if !(t_start.is_finite() && t_start >= 0.0) {
            return Err(Error::param(
                "t_start",
                format!("must be >= 0, got {t_start}"),
            ));
        }
        if !(t_end.is_finite() && t_end > t_start) {
            return Err(Error::param(
                "t_end",
                format!("must exceed t_start = {t_start}, got {t_end}"),
            ));
        }
        if !(r_i.is_finite() && r_i > 0.0) {
            return Err(Error::param("r_i", format!("must be > 0, got {r_i}")));
        }
        Ok(SingleInterval {
            t_start,
            t_end,
            r_i,
        })
    }

    pub fn t_start(&self) -> f64 {
        self.t_start
    }

    pub fn t_end(&self) -> f64 {
        self.t_end
    }

    pub fn r_i(&self) -> f64 {
        self.r_i
    }

    /// Whether `r_i` lies within the distancing range `[r_min, r0]`.
    pub fn is_realizable(&self, params: &ModelParams) -> bool {
        (params.r_min()..=params.r0()).contains(&self.r_i)
    }

    pub fn schedule(&self, params: &ModelParams) -> Result<InputSchedule> {
        let r0 = params.r0();
        let mut pieces = Vec::with_capacity(3);
        if self.t_start > 0.0 {
            pieces.push((0.0, r0));
        }
        pieces.push((self.t_start, self.r_i));
        pieces.push((self.t_end, r0));
        InputSchedule::from_reproduction(params, &pieces)
    }
}

/// Trajectory from the outbreak state with `r_i` applied on the interval and
/// `r0` everywhere else.
pub fn simulate_single_interval(
    params: &ModelParams,
    interval: &SingleInterval,
    cfg: &SamplingConfig,
    t_end_sim: f64,
) -> Result<Trajectory> {
    if !(t_end_sim > interval.t_end) {
        return Err(Error::param(
            "t_end_sim",
            format!(
                "must exceed the interval end {}, got {t_end_sim}",
                interval.t_end
            ),
        ));
    }
    let schedule = interval.schedule(params)?;
    dense_trajectory(&params.initial_state(), &schedule, cfg, t_end_sim)
}

/// Asymptotic susceptible fraction after releasing the interval: the state at
/// `t_end` is simulated, then carried to `τ → ∞` under `r0` in closed form.
///
/// After a long hold I can be vanishingly small, and the second wave it still
/// seeds may take hundreds of time units to appear in a simulation.
pub fn released_final_size(
    params: &ModelParams,
    interval: &SingleInterval,
    cfg: &SamplingConfig,
) -> Result<f64> {
    let schedule = interval.schedule(params)?;
    let traj = dense_trajectory(&params.initial_state(), &schedule, cfg, interval.t_end)?;
    let x = traj.terminal_state().expect("trajectory is never empty");
    s_infinity(x.s(), x.i(), params.r0())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuasiOptimal {
    pub r_i: f64,
    /// `S∞(s, i; r_i) - S*` at the returned root.
    pub residual: f64,
    /// The state already settles at `S*` under `r0`; no distancing needed.
    pub unnecessary: bool,
}

/// Solves `S∞(s, i; R_i) = S*(r0)` for `R_i ∈ (0, r0]` by bisection.
///
/// `S∞` is decreasing in `R_i`, so a root exists iff the residual changes sign
/// over the bracket.
pub fn quasi_optimal_reproduction(state: &EpidemicState, r0: f64) -> Result<QuasiOptimal> {
    let s_star = herd_immunity(r0)?;
    let residual = |r: f64| s_infinity(state.s(), state.i(), r).map(|v| v - s_star);

    let at_r0 = residual(r0)?;
    if at_r0.abs() <= ROOT_TOL {
        return Ok(QuasiOptimal {
            r_i: r0,
            residual: at_r0,
            unnecessary: true,
        });
    }
    let at_low = residual(R_BRACKET_LOW)?;
    if !(at_low >= 0.0 && at_r0 < 0.0) {
        return Err(Error::Infeasible(format!(
            "S∞ - S* does not change sign over [{R_BRACKET_LOW:e}, {r0}] \
             (residuals {at_low:e}, {at_r0:e})"
        )));
    }

    let (mut lo, mut hi) = (R_BRACKET_LOW, r0);
    let mut mid = 0.5 * (lo + hi);
    let mut f_mid = residual(mid)?;
    for _ in 0..200 {
        if f_mid.abs() <= ROOT_TOL * 0.1 || hi - lo <= 4.0 * f64::EPSILON * hi {
            break;
        }
        if f_mid > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        mid = 0.5 * (lo + hi);
        f_mid = residual(mid)?;
    }
    Ok(QuasiOptimal {
        r_i: mid,
        residual: f_mid,
        unnecessary: false,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimalIntervention {
    pub r_i: f64,
    pub residual: f64,
    /// Uncontrolled state at the intervention start.
    pub start_state: EpidemicState,
    /// `r_i ∈ [r_min, r0]`. Not enforced; reported so callers can warn.
    pub realizable: bool,
}

/// Quasi-optimal interval reproduction number for distancing starting at
/// `t_start`, evaluated on the uncontrolled outbreak.
///
/// Fails with a precondition error when `t_start` is at or past the
/// uncontrolled peak (`S(t_start) <= S*`).
pub fn optimal_ri(
    params: &ModelParams,
    t_start: f64,
    cfg: &SamplingConfig,
) -> Result<OptimalIntervention> {
    let r0 = params.r0();
    let s_star = herd_immunity(r0)?;
    let start_state = uncontrolled_state_at(params, t_start, cfg)?;
    if start_state.s() <= s_star {
        return Err(Error::Precondition(format!(
            "t_start = {t_start} is not before the uncontrolled peak (S = {} <= S* = {s_star})",
            start_state.s()
        )));
    }
    let q = quasi_optimal_reproduction(&start_state, r0)?;
    Ok(OptimalIntervention {
        r_i: q.r_i,
        residual: q.residual,
        start_state,
        realizable: (params.r_min()..=r0).contains(&q.r_i),
    })
}

fn uncontrolled_state_at(
    params: &ModelParams,
    t: f64,
    cfg: &SamplingConfig,
) -> Result<EpidemicState> {
    if !(t.is_finite() && t >= 0.0) {
        return Err(Error::param("t_start", format!("must be >= 0, got {t}")));
    }
    let schedule = InputSchedule::constant(params, 0.0)?;
    let traj = dense_trajectory(&params.initial_state(), &schedule, cfg, t)?;
    Ok(traj.terminal_state().expect("trajectory is never empty"))
}

/// Quasi-optimal interval with the release time chosen as the first instant
/// after `t_start` at which I drops below `qss_threshold` under `R_i^op`.
pub fn quasi_optimal_interval(
    params: &ModelParams,
    t_start: f64,
    cfg: &SamplingConfig,
    qss_threshold: f64,
    max_duration: f64,
) -> Result<(OptimalIntervention, SingleInterval)> {
    let opt = optimal_ri(params, t_start, cfg)?;
    let schedule = InputSchedule::from_reproduction(params, &[(0.0, opt.r_i)])?;
    let held = dense_trajectory(&opt.start_state, &schedule, cfg, max_duration)?;
    let release = held
        .points()
        .iter()
        .find(|p| p.tau > 0.0 && p.state.i() < qss_threshold)
        .map(|p| t_start + p.tau)
        .ok_or_else(|| {
            Error::Infeasible(format!(
                "I stays above {qss_threshold:e} for {max_duration} time units under R_i = {}",
                opt.r_i
            ))
        })?;
    Ok((opt, SingleInterval::new(t_start, release, opt.r_i)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params() -> ModelParams {
        ModelParams::new(2.5, 0.85, 1e-3).unwrap()
    }

    #[test]
    fn interval_validation() {
        assert!(SingleInterval::new(2.0, 20.0, 0.5).is_ok());
        assert!(SingleInterval::new(2.0, 2.0, 0.5).is_err());
        assert!(SingleInterval::new(-1.0, 2.0, 0.5).is_err());
        assert!(SingleInterval::new(2.0, 20.0, 0.0).is_err());
        let p = params();
        assert!(!SingleInterval::new(2.0, 20.0, 0.5)
            .unwrap()
            .is_realizable(&p));
        assert!(SingleInterval::new(2.0, 20.0, 1.9)
            .unwrap()
            .is_realizable(&p));
    }

    #[test]
    fn no_op_interval_matches_uncontrolled() {
        let p = params();
        let cfg = SamplingConfig::default();
        let noop = SingleInterval::new(2.0, 20.0, p.r0()).unwrap();
        let a = simulate_single_interval(&p, &noop, &cfg, 60.0).unwrap();
        let sched = InputSchedule::constant(&p, 0.0).unwrap();
        let b = dense_trajectory(&p.initial_state(), &sched, &cfg, 60.0).unwrap();
        assert_eq!(a.len(), b.len());
        for (x, y) in a.points().iter().zip(b.points()) {
            assert!((x.tau - y.tau).abs() <= 1e-12);
            assert!((x.state.s() - y.state.s()).abs() <= 1e-12);
            assert!((x.state.i() - y.state.i()).abs() <= 1e-12);
        }
    }

    #[test]
    fn simulate_requires_horizon_past_release() {
        let p = params();
        let iv = SingleInterval::new(2.0, 20.0, 0.5).unwrap();
        assert!(simulate_single_interval(&p, &iv, &SamplingConfig::default(), 20.0).is_err());
    }

    #[test]
    fn root_residual_is_tight() {
        let opt = optimal_ri(&params(), 2.0, &SamplingConfig::default()).unwrap();
        assert!(opt.residual.abs() <= ROOT_TOL);
        let s = opt.start_state;
        let check = s_infinity(s.s(), s.i(), opt.r_i).unwrap() - 0.4;
        assert!(check.abs() <= ROOT_TOL);
        assert!(opt.realizable);
    }

    #[test]
    fn already_at_threshold_needs_nothing() {
        let x = EpidemicState::equilibrium(0.4).unwrap();
        let q = quasi_optimal_reproduction(&x, 2.5).unwrap();
        assert!(q.unnecessary);
        assert_eq!(q.residual, 0.0);
    }

    #[test]
    fn below_threshold_is_infeasible() {
        let x = EpidemicState::from_si(0.3, 0.01).unwrap();
        assert!(matches!(
            quasi_optimal_reproduction(&x, 2.5),
            Err(Error::Infeasible(_))
        ));
    }

    #[test]
    fn optimal_interval_settles_at_herd_immunity() {
        let p = params();
        let cfg = SamplingConfig::default();
        let opt = optimal_ri(&p, 2.0, &cfg).unwrap();
        let iv = SingleInterval::new(2.0, 60.0, opt.r_i).unwrap();
        let final_size = released_final_size(&p, &iv, &cfg).unwrap();
        assert!((final_size - 0.4).abs() <= 5e-3, "{final_size}");
        let t = simulate_single_interval(&p, &iv, &cfg, 120.0).unwrap();
        assert!((t.terminal_state().unwrap().s() - 0.4).abs() <= 5e-3);
        assert!(crate::analysis::detect_events(&t, Some(60.0), 1e-4)
            .second_wave
            .is_none());
    }

    #[test]
    fn quasi_optimal_release_follows_qss() {
        let p = params();
        let cfg = SamplingConfig::default();
        let (opt, iv) = quasi_optimal_interval(&p, 2.0, &cfg, 1e-4, 500.0).unwrap();
        assert_eq!(iv.r_i(), opt.r_i);
        let t = simulate_single_interval(&p, &iv, &cfg, iv.t_end() + 1.0).unwrap();
        let at_release = t.state_at(iv.t_end()).unwrap();
        assert!(at_release.i() < 1e-4);
        let before = t.state_at(iv.t_end() - 0.1).unwrap();
        assert!(before.i() >= 1e-4);
    }

    #[test]
    fn late_start_violates_precondition() {
        let err = optimal_ri(&params(), 15.0, &SamplingConfig::default()).unwrap_err();
        assert!(matches!(err, Error::Precondition(_)), "{err:?}");
    }
}
