//! Switching nonlinear MPC over a quantized distancing input.
//!
//! At every sample the controller minimizes
//!
//! ```text
//! V = Σ_{j<N} [ Q (S_j - S*)² + W u_j² + Λ max(0, I_j - I_max)² ] + P |S_N - S*|
//! ```
//!
//! over all sequences in `grid^N`, with the peak cap softened into the
//! quadratic slack term `Λ`. The minimization is exact: depth-first
//! branch-and-bound in lexicographic input order. A prefix is cut when its
//! accumulated cost plus a look-ahead term exceeds the incumbent. All terms
//! are non-negative and predicted S never increases, so once S is below `S*`
//! the remaining state and terminal terms are bounded below by the current
//! gap. The closed loop seeds each solve with the previous solution shifted by
//! one sample, which changes the effort but never the result.

use crate::analysis::{detect_events, herd_immunity, herd_immunity_arrival, DEFAULT_QSS_THRESHOLD};
use crate::error::{Error, Result};
use crate::integrator::{integrate_piece, rk4_raw, SamplingConfig, NEGATIVITY_TOL};
use crate::model::{ControlGrid, EpidemicState, ModelParams};
use crate::trajectory::{Trajectory, TrajectoryPoint};

/// Margin above `S*` that counts as having reached herd immunity.
pub const HERD_IMMUNITY_MARGIN: f64 = 5e-3;

#[derive(Debug, Clone, PartialEq)]
pub struct MpcConfig {
    /// Prediction horizon in samples.
    pub horizon: usize,
    /// Stage weight on `(S - S*)²`.
    pub weight_q: f64,
    /// Stage weight on `u²`.
    pub weight_u: f64,
    /// Terminal weight on `|S_N - S*|`.
    pub weight_p: f64,
    /// Cap on predicted I; `None` leaves the peak unconstrained.
    pub i_max: Option<f64>,
    /// Weight on squared cap violation.
    pub slack_weight: f64,
    pub grid: ControlGrid,
    pub sampling: SamplingConfig,
    /// I below which the closed loop counts as settled.
    pub qss_threshold: f64,
}

impl Default for MpcConfig {
    fn default() -> Self {
        MpcConfig {
            horizon: 6,
            weight_q: 1.0,
            weight_u: 0.002,
            weight_p: 10.0,
            i_max: None,
            slack_weight: 1e6,
            grid: ControlGrid::default(),
            sampling: SamplingConfig::default(),
            qss_threshold: DEFAULT_QSS_THRESHOLD,
        }
    }
}

impl MpcConfig {
    pub fn validate(&self) -> Result<()> {
        if self.horizon == 0 {
            return Err(Error::param("horizon", "must be at least 1"));
        }
        for (name, w) in [
            ("weight_q", self.weight_q),
            ("weight_u", self.weight_u),
            ("weight_p", self.weight_p),
        ] {
            if !(w.is_finite() && w >= 0.0) {
                return Err(Error::param(
                    name,
                    format!("must be finite and >= 0, got {w}"),
                ));
            }
        }
        if let Some(cap) = self.i_max {
            if !(cap > 0.0 && cap <= 1.0) {
                return Err(Error::param(
                    "i_max",
                    format!("must lie in (0, 1], got {cap}"),
                ));
            }
            if !(self.slack_weight.is_finite() && self.slack_weight > 0.0) {
                return Err(Error::param(
                    "slack_weight",
                    "must be > 0 when i_max is set",
                ));
            }
        }
        if !(self.qss_threshold > 0.0) {
            return Err(Error::param("qss_threshold", "must be > 0"));
        }
        Ok(())
    }

    #[inline]
    fn slack(&self, i: f64) -> f64 {
        match self.i_max {
            Some(cap) if i > cap => {
                let v = i - cap;
                self.slack_weight * v * v
            }
            _ => 0.0,
        }
    }

    #[inline]
    fn state_term(&self, s: f64, s_star: f64) -> f64 {
        let d = s - s_star;
        self.weight_q * d * d
    }

    #[inline]
    fn input_term(&self, u: f64) -> f64 {
        self.weight_u * u * u
    }

    #[inline]
    fn terminal_term(&self, s: f64, s_star: f64) -> f64 {
        self.weight_p * (s - s_star).abs()
    }
}

/// `Q (S - S*)² + W u²`.
pub fn stage_cost(state: &EpidemicState, u: f64, s_star: f64, cfg: &MpcConfig) -> f64 {
    cfg.state_term(state.s(), s_star) + cfg.input_term(u)
}

/// Prediction model: one sampling period under constant `r`, on raw components.
#[inline]
fn predict(s: f64, i: f64, c: f64, r: f64, h: f64, substeps: usize) -> Result<(f64, f64, f64)> {
    let (mut s, mut i, mut c) = (s, i, c);
    for _ in 0..substeps {
        (s, i, c) = rk4_raw(s, i, c, r, h);
    }
    for (name, v) in [("S", &mut s), ("I", &mut i), ("C", &mut c)] {
        if *v < 0.0 {
            if *v > -NEGATIVITY_TOL {
                *v = 0.0;
            } else {
                return Err(Error::IntegrationFailure {
                    tau: h * substeps as f64,
                    component: name,
                    value: *v,
                });
            }
        }
    }
    Ok((s, i, c))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SequenceEvaluation {
    pub cost: f64,
    /// Predicted states `x_0 ..= x_N`.
    pub states: Vec<EpidemicState>,
    pub max_infected: f64,
    /// `Σ max(0, I_j - I_max)²` over `j < N`, unweighted.
    pub slack: f64,
}

impl SequenceEvaluation {
    pub fn feasible(&self) -> bool {
        self.slack == 0.0
    }
}

/// Rolls the prediction model over `seq` and evaluates the objective.
pub fn evaluate_sequence(
    x0: &EpidemicState,
    seq: &[f64],
    params: &ModelParams,
    cfg: &MpcConfig,
) -> Result<SequenceEvaluation> {
    cfg.validate()?;
    if seq.len() != cfg.horizon {
        return Err(Error::param(
            "sequence",
            format!(
                "length {} does not match horizon {}",
                seq.len(),
                cfg.horizon
            ),
        ));
    }
    let s_star = herd_immunity(params.r0())?;
    let h = cfg.sampling.prediction_step();
    let n_sub = cfg.sampling.substeps();

    let mut states = Vec::with_capacity(seq.len() + 1);
    states.push(*x0);
    let (mut s, mut i, mut c) = (x0.s(), x0.i(), x0.c());
    let mut cost = 0.0;
    let mut slack = 0.0;
    let mut max_infected = i;
    for &u in seq {
        let r = params.effective_r(u)?;
        cost += cfg.state_term(s, s_star);
        cost += cfg.slack(i);
        cost += cfg.input_term(u);
        if let Some(cap) = cfg.i_max {
            if i > cap {
                slack += (i - cap) * (i - cap);
            }
        }
        (s, i, c) = predict(s, i, c, r, h, n_sub)?;
        max_infected = max_infected.max(i);
        states.push(EpidemicState::from_raw(s, i, c));
    }
    cost += cfg.terminal_term(s, s_star);
    Ok(SequenceEvaluation {
        cost,
        states,
        max_infected,
        slack,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct MpcSolution {
    pub input_sequence: Vec<f64>,
    pub cost: f64,
    /// The cap held along the prediction without slack.
    pub feasible: bool,
    /// Complete input sequences reached by the search (leaves of the tree).
    pub nodes_explored: u64,
}

struct Search<'a> {
    cfg: &'a MpcConfig,
    levels: &'a [f64],
    rates: Vec<f64>,
    s_star: f64,
    h: f64,
    substeps: usize,
    path: Vec<usize>,
    best_cost: f64,
    best_path: Vec<usize>,
    leaves: u64,
}

/// Relative slack on the look-ahead bound so float rounding in it can never
/// cut off a true minimizer.
const BOUND_SAFETY: f64 = 1e-12;

impl Search<'_> {
    /// Lower bound on the terms after `depth` that depend only on S.
    ///
    /// Predicted S never increases, so once it is below `S*` every later stage
    /// term is at least `Q (S* - S)²` and the terminal term at least `P (S* - S)`.
    fn lookahead(&self, depth: usize, s: f64) -> f64 {
        let gap = self.s_star - s;
        if gap <= 0.0 {
            return 0.0;
        }
        let remaining = (self.cfg.horizon - depth - 1) as f64;
        remaining * self.cfg.weight_q * gap * gap + self.cfg.weight_p * gap
    }

    fn prune(&self, bound: f64) -> bool {
        bound > self.best_cost
    }

    fn record_leaf(&mut self, total: f64) {
        self.leaves += 1;
        if total < self.best_cost || (total == self.best_cost && self.path < self.best_path) {
            self.best_cost = total;
            self.best_path.clone_from(&self.path);
        }
    }

    /// `acc` already contains every term indexed below `depth`.
    fn descend(&mut self, depth: usize, s: f64, i: f64, c: f64, acc: f64) -> Result<()> {
        if depth == self.cfg.horizon {
            let total = acc + self.cfg.terminal_term(s, self.s_star);
            self.record_leaf(total);
            return Ok(());
        }
        let mut acc = acc + self.cfg.state_term(s, self.s_star);
        acc += self.cfg.slack(i);
        let ahead = self.lookahead(depth, s) * (1.0 - BOUND_SAFETY);
        if self.prune(acc + ahead) {
            return Ok(());
        }
        for k in 0..self.levels.len() {
            let bound = acc + self.cfg.input_term(self.levels[k]);
            if self.prune(bound + ahead) {
                // input_term grows with the level index
                break;
            }
            let (s1, i1, c1) = predict(s, i, c, self.rates[k], self.h, self.substeps)?;
            self.path.push(k);
            self.descend(depth + 1, s1, i1, c1, bound)?;
            self.path.pop();
        }
        Ok(())
    }
}

/// Global minimizer of the slack-augmented objective over `grid^N`.
///
/// Among sequences of equal cost the lexicographically smallest one (least
/// restriction at the earliest differing step) is returned.
pub fn solve(x0: &EpidemicState, params: &ModelParams, cfg: &MpcConfig) -> Result<MpcSolution> {
    solve_with_hint(x0, params, cfg, None)
}

/// [`solve`] seeded with a candidate sequence whose cost becomes the initial
/// incumbent. The result does not depend on the hint, only the search effort.
pub fn solve_with_hint(
    x0: &EpidemicState,
    params: &ModelParams,
    cfg: &MpcConfig,
    hint: Option<&[f64]>,
) -> Result<MpcSolution> {
    cfg.validate()?;
    let levels = cfg.grid.levels();
    let mut search = Search {
        cfg,
        levels,
        rates: cfg.grid.reproduction_numbers(params),
        s_star: herd_immunity(params.r0())?,
        h: cfg.sampling.prediction_step(),
        substeps: cfg.sampling.substeps(),
        path: Vec::with_capacity(cfg.horizon),
        best_cost: f64::INFINITY,
        best_path: Vec::new(),
        leaves: 0,
    };
    if let Some(seq) = hint {
        let idx: Option<Vec<usize>> = seq
            .iter()
            .map(|u| levels.iter().position(|l| l == u))
            .collect();
        if let Some(idx) = idx.filter(|v| v.len() == cfg.horizon) {
            search.best_cost = evaluate_sequence(x0, seq, params, cfg)?.cost;
            search.best_path = idx;
        }
    }
    search.descend(0, x0.s(), x0.i(), x0.c(), 0.0)?;

    let input_sequence: Vec<f64> = search.best_path.iter().map(|&k| levels[k]).collect();
    let eval = evaluate_sequence(x0, &input_sequence, params, cfg)?;
    Ok(MpcSolution {
        input_sequence,
        cost: search.best_cost,
        feasible: eval.feasible(),
        nodes_explored: search.leaves,
    })
}

/// One receding-horizon decision.
#[derive(Debug, Clone, PartialEq)]
pub struct ClosedLoopStep {
    pub tau: f64,
    pub state: EpidemicState,
    pub u: f64,
    pub cost: f64,
    pub feasible: bool,
    pub nodes_explored: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClosedLoopRun {
    /// Plant trajectory at the dense step, with applied inputs.
    pub trajectory: Trajectory,
    pub steps: Vec<ClosedLoopStep>,
    /// Total time with `u > 0`.
    pub distancing_duration: f64,
    /// End of the last interval with `u > 0`.
    pub release_time: Option<f64>,
    /// First time `S <= S* + 5e-3` with I below the QSS threshold.
    pub herd_immunity_time: Option<f64>,
    pub s_star: f64,
}

impl ClosedLoopRun {
    pub fn max_infected(&self) -> f64 {
        self.trajectory.max_infected().map_or(0.0, |(_, i)| i)
    }

    pub fn terminal_state(&self) -> EpidemicState {
        self.trajectory
            .terminal_state()
            .expect("closed loop records at least one point")
    }

    /// Whether the plant shows a new wave after distancing ends.
    pub fn has_second_wave(&self, qss_threshold: f64) -> bool {
        let release = self.release_time.unwrap_or(f64::NEG_INFINITY);
        detect_events(&self.trajectory, Some(release), qss_threshold).has_second_wave()
    }
}

/// Receding-horizon simulation: the outbreak runs uncontrolled until
/// `t_start_control`, then every `ts` the controller is re-solved from the
/// measured plant state and only its first input is applied.
pub fn closed_loop(
    params: &ModelParams,
    cfg: &MpcConfig,
    t_start_control: f64,
    t_end: f64,
) -> Result<ClosedLoopRun> {
    cfg.validate()?;
    if !(t_start_control.is_finite() && t_start_control >= 0.0) {
        return Err(Error::param(
            "t_start_control",
            format!("must be >= 0, got {t_start_control}"),
        ));
    }
    if !(t_end.is_finite() && t_end > t_start_control) {
        return Err(Error::param(
            "t_end",
            format!("must exceed the control start, got {t_end}"),
        ));
    }
    let s_star = herd_immunity(params.r0())?;
    let ts = cfg.sampling.ts();
    let dense = cfg.sampling.dense_step();

    let mut traj = Trajectory::new();
    traj.push(TrajectoryPoint {
        tau: 0.0,
        state: params.initial_state(),
        u: 0.0,
        r_effective: params.r0(),
    });
    integrate_piece(&mut traj, 0.0, params.r0(), t_start_control, dense)?;

    let mut steps = Vec::new();
    let mut distancing_duration = 0.0;
    let mut release_time = None;
    let mut hint: Option<Vec<f64>> = None;
    let mut k = 0usize;
    loop {
        let tau = t_start_control + k as f64 * ts;
        if tau >= t_end - 1e-12 {
            break;
        }
        let stop = (tau + ts).min(t_end);
        let x = traj.terminal_state().expect("seeded");
        let sol = solve_with_hint(&x, params, cfg, hint.as_deref())?;
        let u = sol.input_sequence[0];
        let mut shifted = sol.input_sequence[1..].to_vec();
        shifted.push(*sol.input_sequence.last().expect("horizon >= 1"));
        hint = Some(shifted);
        integrate_piece(&mut traj, u, params.r_of(u), stop, dense)?;
        if u > 0.0 {
            distancing_duration += stop - tau;
            release_time = Some(stop);
        }
        steps.push(ClosedLoopStep {
            tau,
            state: x,
            u,
            cost: sol.cost,
            feasible: sol.feasible,
            nodes_explored: sol.nodes_explored,
        });
        k += 1;
    }

    let herd_immunity_time =
        herd_immunity_arrival(&traj, s_star, HERD_IMMUNITY_MARGIN, cfg.qss_threshold);
    Ok(ClosedLoopRun {
        trajectory: traj,
        steps,
        distancing_duration,
        release_time,
        herd_immunity_time,
        s_star,
    })
}
