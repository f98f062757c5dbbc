//! Closed-form and trajectory-based epidemic analysis: herd immunity, final
//! size through the Lambert W function, peak prevalence, equilibrium
//! stability, mean infection time and wave detection.

use std::f64::consts::E;

use crate::error::{Error, Result};
use crate::trajectory::Trajectory;

/// Default threshold on I below which the system is considered at a
/// quasi-steady state.
pub const DEFAULT_QSS_THRESHOLD: f64 = 1e-4;

/// Arguments below `-1/e` by at most this much are clamped to the branch point.
pub const LAMBERT_DOMAIN_SLACK: f64 = 1e-12;

const INV_E: f64 = 1.0 / E;
const HALLEY_MAX_ITER: usize = 50;

/// Principal branch `W0` of the Lambert W function on `[-1/e, 0]`.
///
/// Halley iteration seeded by the branch-point expansion for `x < -1/4` and by
/// the Taylor series at the origin otherwise.
pub fn lambert_w0(x: f64) -> Result<f64> {
    if !(-INV_E - LAMBERT_DOMAIN_SLACK..=0.0).contains(&x) {
        return Err(Error::LambertDomain { x });
    }
    if x == 0.0 {
        return Ok(0.0);
    }
    if x <= -INV_E {
        return Ok(-1.0);
    }

    let mut w = if x < -0.25 {
        let p = (2.0 * (E * x + 1.0)).max(0.0).sqrt();
        let guess = -1.0 + p * (1.0 + p * (-1.0 / 3.0 + p * (11.0 / 72.0 + p * (-43.0 / 540.0))));
        if p < 1e-4 {
            // Truncation error is O(p^5); Halley's denominator degenerates here.
            return Ok(guess);
        }
        guess
    } else {
        x * (1.0 + x * (-1.0 + 1.5 * x))
    };

    for _ in 0..HALLEY_MAX_ITER {
        let ew = w.exp();
        let f = w * ew - x;
        let wp1 = w + 1.0;
        if wp1 <= 0.0 {
            break;
        }
        let step = f / (ew * wp1 - (w + 2.0) * f / (2.0 * wp1));
        let next = (w - step).clamp(-1.0, 0.0);
        let done = (next - w).abs() <= 1e-15 * (1.0 + next.abs());
        w = next;
        if done {
            break;
        }
    }
    Ok(w)
}

/// Herd-immunity threshold `S* = min(1, 1/R)`.
pub fn herd_immunity(r: f64) -> Result<f64> {
    if !(r.is_finite() && r > 0.0) {
        return Err(Error::param("r", format!("must be > 0, got {r}")));
    }
    Ok((1.0 / r).min(1.0))
}

fn check_fractions(s0: f64, i0: f64) -> Result<()> {
    if !(s0 >= 0.0 && i0 >= 0.0 && s0 + i0 <= 1.0 + 1e-12) {
        return Err(Error::InvalidState(format!(
            "need s0, i0 >= 0 and s0 + i0 <= 1, got s0 = {s0}, i0 = {i0}"
        )));
    }
    Ok(())
}

/// Terminal susceptible fraction reached from `(s0, i0)` under constant `r`:
/// `S∞ = -W0(-r s0 exp(-r (s0 + i0))) / r`.
pub fn s_infinity(s0: f64, i0: f64, r: f64) -> Result<f64> {
    check_fractions(s0, i0)?;
    if !(r.is_finite() && r > 0.0) {
        return Err(Error::param("r", format!("must be > 0, got {r}")));
    }
    if i0 == 0.0 && r * s0 <= 1.0 {
        return Ok(s0);
    }
    let arg = -r * s0 * (-r * (s0 + i0)).exp();
    let w = lambert_w0(arg)?;
    Ok((-w / r).clamp(0.0, s0))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeakPrevalence {
    pub value: f64,
    /// `s0 · r <= 1`: I only declines from the initial instant.
    pub monotone_decline: bool,
}

/// Maximum of I reached from `(s0, i0)` under constant `r`.
pub fn peak_prevalence(s0: f64, i0: f64, r: f64) -> Result<PeakPrevalence> {
    check_fractions(s0, i0)?;
    if !(r.is_finite() && r > 0.0) {
        return Err(Error::param("r", format!("must be > 0, got {r}")));
    }
    if i0 <= 0.0 {
        return Err(Error::DegenerateEpidemic(
            "no infected at the initial instant".into(),
        ));
    }
    if s0 * r <= 1.0 {
        return Ok(PeakPrevalence {
            value: i0,
            monotone_decline: true,
        });
    }
    let value = s0 + i0 - (1.0 + (s0 * r).ln()) / r;
    Ok(PeakPrevalence {
        value: value.max(i0),
        monotone_decline: false,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stability {
    AsymptoticallyStable,
    Unstable,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EquilibriumClassification {
    pub s_bar: f64,
    pub stability: Stability,
}

/// Equilibria `(s̄, 0, 1 - s̄)` are asymptotically stable iff `s̄ <= S*`.
pub fn classify_equilibrium(s_bar: f64, r: f64) -> Result<EquilibriumClassification> {
    if !(0.0..=1.0).contains(&s_bar) {
        return Err(Error::InvalidState(format!(
            "s_bar = {s_bar} outside [0, 1]"
        )));
    }
    let stability = if s_bar <= herd_immunity(r)? {
        Stability::AsymptoticallyStable
    } else {
        Stability::Unstable
    };
    Ok(EquilibriumClassification { s_bar, stability })
}

/// Mean time of infection, `∫ τ R(τ) S I dτ / (1 - S_end)` by trapezoidal
/// quadrature over the recorded points.
///
/// The trajectory must have settled (terminal I below `qss_threshold`).
pub fn average_infection_time(trajectory: &Trajectory, qss_threshold: f64) -> Result<f64> {
    let pts = trajectory.points();
    let last = pts
        .last()
        .ok_or_else(|| Error::DegenerateEpidemic("empty trajectory".into()))?;
    if pts.iter().all(|p| p.state.i() == 0.0) {
        return Err(Error::DegenerateEpidemic("I is identically zero".into()));
    }
    if last.state.i() >= qss_threshold {
        return Err(Error::InsufficientHorizon {
            terminal_i: last.state.i(),
            threshold: qss_threshold,
        });
    }
    let attack = 1.0 - last.state.s();
    if attack <= 0.0 {
        return Err(Error::DegenerateEpidemic("no one was ever infected".into()));
    }
    let integrand = |k: usize| {
        let p = &pts[k];
        p.tau * p.r_effective * p.state.s() * p.state.i()
    };
    let integral: f64 = (1..pts.len())
        .map(|k| 0.5 * (pts[k].tau - pts[k - 1].tau) * (integrand(k) + integrand(k - 1)))
        .sum();
    Ok((integral / attack).max(0.0))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Peak {
    pub tau: f64,
    pub value: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrajectoryEvents {
    pub peaks: Vec<Peak>,
    pub qss_time: Option<f64>,
    pub second_wave: Option<Peak>,
}

impl TrajectoryEvents {
    pub fn has_second_wave(&self) -> bool {
        self.second_wave.is_some()
    }
}

/// Interior local maxima of `values` (plateaus count once, at their first
/// index) together with their topographic prominence.
fn local_maxima(values: &[f64]) -> Vec<(usize, f64)> {
    let n = values.len();
    let mut out = Vec::new();
    let mut k = 1;
    while k + 1 < n {
        if values[k] > values[k - 1] {
            let mut j = k + 1;
            while j < n && values[j] == values[k] {
                j += 1;
            }
            if j < n && values[j] < values[k] {
                let h = values[k];
                let left_min = values[..k]
                    .iter()
                    .rev()
                    .take_while(|&&v| v <= h)
                    .fold(h, |m, &v| m.min(v));
                let right_min = values[j..]
                    .iter()
                    .take_while(|&&v| v <= h)
                    .fold(h, |m, &v| m.min(v));
                out.push((k, h - left_min.max(right_min)));
            }
            k = j;
        } else {
            k += 1;
        }
    }
    out
}

/// Waves, quasi-steady-state entry and post-release resurgence of I.
///
/// Peaks with prominence at or below `qss_threshold / 10` are discarded as
/// ripple. `second_wave` is the first retained peak strictly after
/// `release_time`.
pub fn detect_events(
    trajectory: &Trajectory,
    release_time: Option<f64>,
    qss_threshold: f64,
) -> TrajectoryEvents {
    let pts = trajectory.points();
    let infected: Vec<f64> = trajectory.infected().collect();
    let min_prominence = qss_threshold / 10.0;

    let peaks: Vec<Peak> = local_maxima(&infected)
        .into_iter()
        .filter(|&(_, prominence)| prominence > min_prominence)
        .map(|(k, _)| Peak {
            tau: pts[k].tau,
            value: infected[k],
        })
        .collect();

    let qss_time = match infected.iter().rposition(|&v| v >= qss_threshold) {
        None => pts.first().map(|p| p.tau),
        Some(k) => pts.get(k + 1).map(|p| p.tau),
    };

    let second_wave = release_time.and_then(|t| peaks.iter().copied().find(|p| p.tau > t));

    TrajectoryEvents {
        peaks,
        qss_time,
        second_wave,
    }
}

/// First time S is within `margin` above `s_star` (or below it) while I is
/// under `qss_threshold`.
pub fn herd_immunity_arrival(
    trajectory: &Trajectory,
    s_star: f64,
    margin: f64,
    qss_threshold: f64,
) -> Option<f64> {
    trajectory
        .points()
        .iter()
        .find(|p| p.state.s() <= s_star + margin && p.state.i() < qss_threshold)
        .map(|p| p.tau)
}
