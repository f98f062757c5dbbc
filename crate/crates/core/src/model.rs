//! State, parameter and input-set types of the controlled SIR model, and its
//! non-dimensional vector field
//!
//! ```text
//! dS/dτ = -R(τ) S I
//! dI/dτ =  R(τ) S I - I
//! dC/dτ =  I
//! ```
//!
//! Time is measured in units of the mean infectious period, so the removal
//! rate is 1 and transmission enters only through the reproduction number.

use crate::error::{Error, Result};

/// Tolerance on `S + I + C = 1` when a state is constructed.
pub const SIMPLEX_TOL: f64 = 1e-12;

/// Population fractions (S, I, C) at one instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpidemicState {
    s: f64,
    i: f64,
    c: f64,
}

impl EpidemicState {
    pub fn new(s: f64, i: f64, c: f64) -> Result<Self> {
        for (name, v) in [("S", s), ("I", i), ("C", c)] {
            if !v.is_finite() {
                return Err(Error::InvalidState(format!("{name} is not finite")));
            }
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::InvalidState(format!("{name} = {v} outside [0, 1]")));
            }
        }
        let total = s + i + c;
        if (total - 1.0).abs() > SIMPLEX_TOL {
            return Err(Error::InvalidState(format!(
                "S + I + C = {total:.17} is not 1 within {SIMPLEX_TOL:e}"
            )));
        }
        Ok(EpidemicState { s, i, c })
    }

    /// State with the removed fraction filled in as `1 - s - i`.
    pub fn from_si(s: f64, i: f64) -> Result<Self> {
        Self::new(s, i, 1.0 - s - i)
    }

    /// Equilibrium with no infected and `s` susceptible.
    pub fn equilibrium(s: f64) -> Result<Self> {
        Self::new(s, 0.0, 1.0 - s)
    }

    /// Skips the simplex check. The integrator checks sign separately and
    /// conservation is asserted by tests rather than enforced here.
    pub(crate) fn from_raw(s: f64, i: f64, c: f64) -> Self {
        EpidemicState { s, i, c }
    }

    pub fn s(&self) -> f64 {
        self.s
    }

    pub fn i(&self) -> f64 {
        self.i
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn total(&self) -> f64 {
        self.s + self.i + self.c
    }

    pub fn is_equilibrium(&self) -> bool {
        self.i == 0.0
    }
}

/// Time derivative of an [`EpidemicState`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Derivative {
    pub ds: f64,
    pub di: f64,
    pub dc: f64,
}

impl Derivative {
    pub fn sum(&self) -> f64 {
        self.ds + self.dc + self.di
    }
}

/// Right-hand side of the controlled SIR system under reproduction number `r`.
pub fn vector_field(state: &EpidemicState, r: f64) -> Result<Derivative> {
    if !r.is_finite() || r <= 0.0 {
        return Err(Error::param(
            "r_effective",
            format!("must be finite and > 0, got {r}"),
        ));
    }
    if !(state.s.is_finite() && state.i.is_finite() && state.c.is_finite()) {
        return Err(Error::InvalidState("non-finite component".into()));
    }
    Ok(rhs(state.s, state.i, r))
}

#[inline]
pub(crate) fn rhs(s: f64, i: f64, r: f64) -> Derivative {
    let infection = r * s * i;
    Derivative {
        ds: -infection,
        di: infection - i,
        dc: i,
    }
}

/// Reproduction numbers and initial seeding of an outbreak.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    r0: f64,
    r_min: f64,
    epsilon: f64,
}

impl ModelParams {
    pub const DEFAULT_EPSILON: f64 = 1e-3;

    pub fn new(r0: f64, r_min: f64, epsilon: f64) -> Result<Self> {
        if !(r_min.is_finite() && r_min > 0.0) {
            return Err(Error::param("r_min", format!("must be > 0, got {r_min}")));
        }
        if !(r0.is_finite() && r0 > r_min) {
            return Err(Error::param(
                "r0",
                format!("must exceed r_min = {r_min}, got {r0}"),
            ));
        }
        if !(epsilon > 0.0 && epsilon < 1.0) {
            return Err(Error::param(
                "epsilon",
                format!("must lie in (0, 1), got {epsilon}"),
            ));
        }
        Ok(ModelParams { r0, r_min, epsilon })
    }

    pub fn r0(&self) -> f64 {
        self.r0
    }

    pub fn r_min(&self) -> f64 {
        self.r_min
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    /// Outbreak state `(1 - ε, ε, 0)`.
    pub fn initial_state(&self) -> EpidemicState {
        EpidemicState::from_raw(1.0 - self.epsilon, self.epsilon, 0.0)
    }

    /// `R(u) = r0 + (r_min - r0) u` for a distancing level `u ∈ [0, 1]`.
    pub fn effective_r(&self, u: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&u) {
            return Err(Error::param(
                "u",
                format!("input must lie in [0, 1], got {u}"),
            ));
        }
        Ok(self.r_of(u))
    }

    #[inline]
    pub(crate) fn r_of(&self, u: f64) -> f64 {
        // Same affine map, written to be exact at both endpoints.
        self.r0 * (1.0 - u) + self.r_min * u
    }

    /// Inverse of the affine input map. Values outside `[0, 1]` mean `r` is
    /// not realizable with the available distancing range.
    pub fn input_for(&self, r: f64) -> f64 {
        (self.r0 - r) / (self.r0 - self.r_min)
    }
}

impl Default for ModelParams {
    fn default() -> Self {
        ModelParams {
            r0: 3.0,
            r_min: 0.85,
            epsilon: Self::DEFAULT_EPSILON,
        }
    }
}

/// Admissible quantized distancing levels, strictly increasing from 0 to 1.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlGrid {
    levels: Vec<f64>,
}

impl ControlGrid {
    pub fn new(levels: Vec<f64>) -> Result<Self> {
        if levels.len() < 2 {
            return Err(Error::param("levels", "need at least the levels 0 and 1"));
        }
        if levels[0] != 0.0 || *levels.last().unwrap() != 1.0 {
            return Err(Error::param(
                "levels",
                "first level must be 0 and last must be 1",
            ));
        }
        if levels.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::param("levels", "levels must be strictly increasing"));
        }
        Ok(ControlGrid { levels })
    }

    /// `{0, 1/4, 1/2, 3/4, 1}`.
    pub fn five_level() -> Self {
        ControlGrid {
            levels: vec![0.0, 0.25, 0.5, 0.75, 1.0],
        }
    }

    /// `{0, 0.25, 0.5, 1}`, the set written in the optimization problem.
    pub fn four_level() -> Self {
        ControlGrid {
            levels: vec![0.0, 0.25, 0.5, 1.0],
        }
    }

    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }

    pub fn contains(&self, u: f64) -> bool {
        self.levels.contains(&u)
    }

    /// Switching-mode reproduction numbers `R_σ`, one per level.
    pub fn reproduction_numbers(&self, params: &ModelParams) -> Vec<f64> {
        self.levels.iter().map(|&u| params.r_of(u)).collect()
    }
}

impl Default for ControlGrid {
    fn default() -> Self {
        Self::five_level()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn state_validation() {
        assert!(EpidemicState::new(0.5, 0.25, 0.25).is_ok());
        assert!(EpidemicState::new(0.5, 0.25, 0.2).is_err());
        assert!(EpidemicState::new(1.1, -0.1, 0.0).is_err());
        assert!(EpidemicState::new(f64::NAN, 0.0, 1.0).is_err());
        assert!(EpidemicState::new(0.5, 0.5, 1e-13).is_ok());
    }

    #[test]
    fn vector_field_examples() {
        let eq = EpidemicState::new(0.5, 0.0, 0.5).unwrap();
        let d = vector_field(&eq, 2.5).unwrap();
        assert_eq!((d.ds, d.di, d.dc), (0.0, 0.0, 0.0));

        let herd = EpidemicState::new(0.4, 0.1, 0.5).unwrap();
        let d = vector_field(&herd, 2.5).unwrap();
        assert!(close(d.ds, -0.1, 1e-15));
        assert!(close(d.di, 0.0, 1e-15));
        assert!(close(d.dc, 0.1, 1e-15));

        let early = EpidemicState::new(0.999, 0.001, 0.0).unwrap();
        let d = vector_field(&early, 2.5).unwrap();
        assert!(close(d.ds, -0.0024975, 1e-15));
        assert!(close(d.di, 0.0014975, 1e-15));
        assert!(close(d.dc, 0.001, 1e-15));
    }

    #[test]
    fn vector_field_rejects_bad_r() {
        let x = EpidemicState::new(0.9, 0.1, 0.0).unwrap();
        assert!(vector_field(&x, 0.0).is_err());
        assert!(vector_field(&x, f64::INFINITY).is_err());
        assert!(vector_field(&x, f64::NAN).is_err());
    }

    #[test]
    fn effective_r_examples() {
        let p = ModelParams::new(3.0, 0.85, 1e-3).unwrap();
        assert_eq!(p.effective_r(0.0).unwrap(), 3.0);
        assert_eq!(p.effective_r(1.0).unwrap(), 0.85);
        assert!(close(p.effective_r(0.5).unwrap(), 1.925, 1e-15));
        assert!(p.effective_r(-0.01).is_err());
        assert!(p.effective_r(1.01).is_err());
        assert!(close(p.input_for(1.925), 0.5, 1e-15));
    }

    #[test]
    fn params_validation() {
        assert!(ModelParams::new(0.8, 0.85, 1e-3).is_err());
        assert!(ModelParams::new(3.0, 0.0, 1e-3).is_err());
        assert!(ModelParams::new(3.0, 0.85, 0.0).is_err());
        assert!(ModelParams::new(3.0, 0.85, 1.0).is_err());
        let p = ModelParams::default();
        let x0 = p.initial_state();
        assert_eq!((x0.s(), x0.i(), x0.c()), (0.999, 0.001, 0.0));
    }

    #[test]
    fn grid_validation() {
        assert!(ControlGrid::new(vec![0.0, 0.5, 1.0]).is_ok());
        assert!(ControlGrid::new(vec![0.1, 1.0]).is_err());
        assert!(ControlGrid::new(vec![0.0, 0.5, 0.5, 1.0]).is_err());
        assert!(ControlGrid::new(vec![0.0, 0.9]).is_err());
        let p = ModelParams::default();
        let rs = ControlGrid::five_level().reproduction_numbers(&p);
        assert_eq!(rs.len(), 5);
        assert_eq!(rs[0], 3.0);
        assert_eq!(rs[4], 0.85);
        assert!(rs.windows(2).all(|w| w[0] > w[1]));
        assert_eq!(ControlGrid::four_level().len(), 4);
    }

    fn simplex_state() -> impl Strategy<Value = EpidemicState> {
        (0.0..=1.0f64, 0.0..=1.0f64).prop_map(|(a, b)| {
            let s = a;
            let i = (1.0 - s) * b;
            EpidemicState::from_si(s, i).unwrap()
        })
    }

    proptest! {
        #[test]
        fn field_conserves_and_is_monotone(x in simplex_state(), r in 0.01..20.0f64) {
            let d = vector_field(&x, r).unwrap();
            prop_assert!(d.sum().abs() <= 1e-15);
            prop_assert!(d.ds <= 0.0);
            prop_assert!(d.dc >= 0.0);
            if x.i() > 0.0 {
                let growth = r * x.s() - 1.0;
                if growth.abs() > 1e-12 {
                    prop_assert_eq!(d.di > 0.0, growth > 0.0);
                }
            }
        }

        #[test]
        fn effective_r_is_affine_and_decreasing(u1 in 0.0..=1.0f64, u2 in 0.0..=1.0f64) {
            let p = ModelParams::new(3.0, 0.85, 1e-3).unwrap();
            let (r1, r2) = (p.effective_r(u1).unwrap(), p.effective_r(u2).unwrap());
            prop_assert!((0.85..=3.0).contains(&r1));
            if u1 < u2 {
                prop_assert!(r1 > r2);
            }
            let mid = p.effective_r(0.5 * (u1 + u2)).unwrap();
            prop_assert!((mid - 0.5 * (r1 + r2)).abs() <= 1e-14);
        }
    }
}
