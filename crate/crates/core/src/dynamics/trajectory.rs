//! No-jump pure-state trajectory.

use std::f64::consts::FRAC_1_SQRT_2;

use crate::error::{Error, Result};
use crate::hilbert::{PureState, KAPPA};
use crate::pulses::PulseShape;

use super::ode::{self, IntegratorConfig, OdeSystem, Span};

/// Allowed drift of `|α₁|² + |α₂|² + |β_a|²` away from one.
pub const NORM_DRIFT_LIMIT: f64 = 1e-6;

/// Pure-state trajectory with the zero-jump residual at each stored time.
#[derive(Debug, Clone)]
pub struct Trajectory {
    solution: ode::Solution,
    residuals: Vec<f64>,
    pub max_norm_drift: f64,
}

impl Trajectory {
    pub fn times(&self) -> &[f64] {
        self.solution.times()
    }

    pub fn len(&self) -> usize {
        self.solution.len()
    }

    pub fn is_empty(&self) -> bool {
        self.solution.is_empty()
    }

    pub fn states(&self) -> impl Iterator<Item = PureState> + '_ {
        self.solution.iter().map(|(t, y)| to_state(y, t))
    }

    /// `κβ_a + g₁α₁/√2 + g₂α₂/√2` at each stored time.
    pub fn residuals(&self) -> &[f64] {
        &self.residuals
    }

    pub fn max_residual(&self) -> f64 {
        self.residuals.iter().map(|r| r.abs()).fold(0.0, f64::max)
    }

    pub fn at(&self, t: f64) -> Option<PureState> {
        let y = self.solution.eval(t)?;
        Some(to_state(&y, t))
    }

    pub fn last(&self) -> PureState {
        to_state(self.solution.last_state(), self.solution.last_time())
    }
}

fn to_state(y: &[f64], t: f64) -> PureState {
    PureState::new(y[0], y[1], 0.0, y[2], t)
}

/// Residual of the `β_s` equation when `β_s` is held at zero.
pub fn zero_jump_residual(state: &PureState, g1: f64, g2: f64) -> f64 {
    KAPPA * state.beta_a + (g1 * state.alpha1 + g2 * state.alpha2) * FRAC_1_SQRT_2
}

struct TrajectorySystem<'a> {
    shape: &'a PulseShape,
}

impl OdeSystem for TrajectorySystem<'_> {
    fn dim(&self) -> usize {
        3
    }

    fn rhs(&self, t: f64, y: &[f64], dy: &mut [f64]) {
        let (g1, g2) = (self.shape.g1(t), self.shape.g2(t));
        let (a1, a2, ba) = (y[0], y[1], y[2]);
        dy[0] = g1 * ba * FRAC_1_SQRT_2;
        dy[1] = -g2 * ba * FRAC_1_SQRT_2;
        dy[2] = (-g1 * a1 + g2 * a2) * FRAC_1_SQRT_2;
    }
}

/// Integrates `(α₁, α₂, β_a)` from `(1, 0, 0)` at `cfg.t_start`.
pub fn integrate_trajectory(shape: &PulseShape, cfg: &IntegratorConfig) -> Result<Trajectory> {
    cfg.validate()?;
    let sys = TrajectorySystem { shape };
    let solution = ode::integrate(&sys, &[1.0, 0.0, 0.0], Span::from(cfg), &shape.breakpoints())?;
    let mut residuals = Vec::with_capacity(solution.len());
    let mut max_norm_drift = 0.0f64;
    for (t, y) in solution.iter() {
        let state = to_state(y, t);
        let drift = (state.norm_sq() - 1.0).abs();
        if drift > NORM_DRIFT_LIMIT {
            return Err(Error::IntegrationFailure { t, reason: format!("norm drifted by {drift:e}") });
        }
        max_norm_drift = max_norm_drift.max(drift);
        residuals.push(zero_jump_residual(&state, shape.g1(t), shape.g2(t)));
    }
    Ok(Trajectory { solution, residuals, max_norm_drift })
}

/// Emitted photon norm `∫ β_a(t)² dt` over the window of `cfg`.
pub fn photon_norm(shape: &PulseShape, cfg: &IntegratorConfig) -> Result<f64> {
    cfg.validate()?;
    let inner = TrajectorySystem { shape };
    let sys = ode::FnSystem::new(4, |t, y: &[f64], dy: &mut [f64]| {
        inner.rhs(t, &y[..3], &mut dy[..3]);
        dy[3] = y[2] * y[2];
    });
    let mut span = Span::from(cfg);
    span.dense = false;
    let solution = ode::integrate(&sys, &[1.0, 0.0, 0.0, 0.0], span, &shape.breakpoints())?;
    Ok(solution.last_state()[3] * KAPPA)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pulses::{sech_pulse, sech_reference_state, zero_pulse};

    #[test]
    fn sech_matches_closed_form() {
        // starting from (1, 0, 0) at -15 is already ~4e-7 off the exact tail
        let cfg = IntegratorConfig::default().symmetric(20.0);
        let traj = integrate_trajectory(&sech_pulse(), &cfg).unwrap();
        for &t in &[-2.0, 0.0, 2.0] {
            let s = traj.at(t).unwrap();
            let r = sech_reference_state(t);
            assert!((s.alpha1 - r.alpha1).abs() < 1e-7, "alpha1 at {t}");
            assert!((s.alpha2 - r.alpha2).abs() < 1e-7, "alpha2 at {t}");
            assert!((s.beta_a - r.beta_a).abs() < 1e-7, "beta_a at {t}");
        }
        assert!(traj.max_residual() < 1e-6);
    }

    #[test]
    fn sech_photon_norm_is_one() {
        let norm = photon_norm(&sech_pulse(), &IntegratorConfig::default()).unwrap();
        assert!((norm - 1.0).abs() < 1e-5, "norm = {norm}");
    }

    #[test]
    fn zero_pulse_is_constant() {
        let traj = integrate_trajectory(&zero_pulse(), &IntegratorConfig::default()).unwrap();
        for s in traj.states() {
            assert_eq!((s.alpha1, s.alpha2, s.beta_a), (1.0, 0.0, 0.0));
        }
    }

    /// One explicit Euler step of the four-amplitude equations, with `β_s`
    /// evolved from its own equation, against the integrator over a tiny step.
    #[test]
    fn single_step_matches_euler() {
        let shape = sech_pulse();
        let t0 = -0.4;
        let cfg = IntegratorConfig::default();
        let traj = integrate_trajectory(&shape, &cfg).unwrap();
        let s0 = traj.at(t0).unwrap();
        let h = 1e-5;
        let (g1, g2) = (shape.g1(t0), shape.g2(t0));
        let a1 = s0.alpha1 + h * g1 * s0.beta_a * FRAC_1_SQRT_2;
        let a2 = s0.alpha2 - h * g2 * s0.beta_a * FRAC_1_SQRT_2;
        let bs = h * (g1 * s0.alpha1 * FRAC_1_SQRT_2 + g2 * s0.alpha2 * FRAC_1_SQRT_2 + KAPPA * s0.beta_a);
        let s1 = traj.at(t0 + h).unwrap();
        assert!((s1.alpha1 - a1).abs() < 1e-8);
        assert!((s1.alpha2 - a2).abs() < 1e-8);
        assert!(bs.abs() < 1e-8, "sech keeps beta_s at zero");
        let ba = (1.0 - a1 * a1 - a2 * a2 - bs * bs).sqrt();
        assert!((s1.beta_a.abs() - ba).abs() < 1e-8);
    }
}
