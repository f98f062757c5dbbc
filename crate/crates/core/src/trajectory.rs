use crate::model::EpidemicState;

/// One recorded sample of a simulated trajectory.
///
/// `u` and `r_effective` are the input active on the interval that starts at
/// `tau`; the final point repeats the last active input.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryPoint {
    pub tau: f64,
    pub state: EpidemicState,
    pub u: f64,
    pub r_effective: f64,
}

/// Time-ordered sequence of states with the inputs that produced them.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Trajectory {
    points: Vec<TrajectoryPoint>,
}

impl Trajectory {
    pub fn new() -> Self {
        Trajectory { points: Vec::new() }
    }

    pub(crate) fn with_capacity(n: usize) -> Self {
        Trajectory {
            points: Vec::with_capacity(n),
        }
    }

    pub(crate) fn push(&mut self, p: TrajectoryPoint) {
        self.points.push(p);
    }

    /// Overwrites the input annotation of the last point, used when a new
    /// input segment starts at that instant.
    pub(crate) fn set_last_input(&mut self, u: f64, r: f64) {
        if let Some(p) = self.points.last_mut() {
            p.u = u;
            p.r_effective = r;
        }
    }

    pub fn points(&self) -> &[TrajectoryPoint] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn first(&self) -> Option<&TrajectoryPoint> {
        self.points.first()
    }

    pub fn last(&self) -> Option<&TrajectoryPoint> {
        self.points.last()
    }

    pub fn terminal_state(&self) -> Option<EpidemicState> {
        self.points.last().map(|p| p.state)
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        self.points.iter().map(|p| p.tau)
    }

    pub fn infected(&self) -> impl Iterator<Item = f64> + '_ {
        self.points.iter().map(|p| p.state.i())
    }

    /// `(tau, I)` of the sampled global maximum of I.
    pub fn max_infected(&self) -> Option<(f64, f64)> {
        self.points
            .iter()
            .map(|p| (p.tau, p.state.i()))
            .fold(None, |best, cur| match best {
                Some((_, bi)) if bi >= cur.1 => best,
                _ => Some(cur),
            })
    }

    /// State at the last recorded time `<= tau`.
    pub fn state_at(&self, tau: f64) -> Option<EpidemicState> {
        let idx = self.points.partition_point(|p| p.tau <= tau);
        idx.checked_sub(1).map(|k| self.points[k].state)
    }

    /// Largest `|S + I + C - 1|` over all points.
    pub fn max_conservation_error(&self) -> f64 {
        self.points
            .iter()
            .map(|p| (p.state.total() - 1.0).abs())
            .fold(0.0, f64::max)
    }

    /// S non-increasing and C non-decreasing along the whole trajectory.
    pub fn is_monotone(&self) -> bool {
        self.points
            .windows(2)
            .all(|w| w[1].state.s() <= w[0].state.s() && w[1].state.c() >= w[0].state.c())
    }
}
