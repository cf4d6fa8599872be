//! Mirror construction of a transfer pulse from its `t ≥ 0` half.
//!
//! Given `g₁(t)` for `t ≥ 0`, the reduced zero-jump system
//!
//! ```text
//! α̇₁ = g₁ β_a / √2
//! β̇_a = −√2 g₁ α₁ − κ β_a
//! ```
//!
//! is integrated forward from the symmetric initial point at `t = 0`, and the
//! negative-time half follows from the zero-jump condition:
//! `g₁(−u) = −(√2 κ β_a(u) + g₁(u) α₁(u)) / α₂(u)` with
//! `α₂ = √(1 − α₁² − β_a²)`.

use std::f64::consts::SQRT_2;
use std::sync::Arc;

use crate::dynamics::ode::{self, FnSystem, Span};
use crate::error::{Error, Result};
use crate::hilbert::KAPPA;

use super::SeedPulse;

/// Below this value of `α₂` the mirrored coupling is considered singular.
pub const ALPHA2_FLOOR: f64 = 1e-8;

/// Tolerance for treating a constructed coupling as negative.
const NEGATIVE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstructionConfig {
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Integration horizon for seeds without a finite end time.
    pub horizon: f64,
}

impl Default for ConstructionConfig {
    fn default() -> Self {
        Self { rel_tol: 1e-12, abs_tol: 1e-14, horizon: 40.0 }
    }
}

/// Symmetric starting point `(α₁(0), β_a(0))` for a seed value `g₁(0)`.
pub fn initial_point(g0: f64) -> (f64, f64) {
    let alpha1 = KAPPA / (2.0 * (g0 * g0 + KAPPA * KAPPA)).sqrt();
    let beta_a = -(1.0 - 2.0 * alpha1 * alpha1).max(0.0).sqrt();
    (alpha1, beta_a)
}

pub(crate) fn reduced_rhs(g: f64, y: &[f64], dy: &mut [f64]) {
    dy[0] = g * y[1] / SQRT_2;
    dy[1] = -SQRT_2 * g * y[0] - KAPPA * y[1];
}

/// Integrates the reduced system over `[0, end]` for a seed. Shared by the
/// full construction and the optimizer's constraint solve.
pub(crate) fn integrate_reduced(
    seed: &dyn SeedPulse,
    end: f64,
    rel_tol: f64,
    abs_tol: f64,
    dense: bool,
) -> Result<ode::Solution> {
    let g0 = seed.value(0.0);
    let (a0, b0) = initial_point(g0);
    let sys = FnSystem::new(2, |t, y: &[f64], dy: &mut [f64]| reduced_rhs(seed.value(t), y, dy));
    let span = Span { t_start: 0.0, t_end: end, rel_tol, abs_tol, dense };
    ode::integrate(&sys, &[a0, b0], span, &seed.knots())
}

#[derive(Clone)]
pub(crate) struct Construction {
    pub seed: Arc<dyn SeedPulse>,
    solution: ode::Solution,
    horizon: f64,
}

impl Construction {
    pub fn build(seed: Arc<dyn SeedPulse>, cfg: &ConstructionConfig) -> Result<Self> {
        let g0 = seed.value(0.0);
        if !(g0 > 0.0) || !g0.is_finite() {
            return Err(Error::InvalidSeed(format!("seed must be positive at t = 0, got {g0}")));
        }
        let horizon = seed.end_time().unwrap_or(cfg.horizon);
        if !(horizon > 0.0) {
            return Err(Error::InvalidSeed(format!("seed end time must be positive, got {horizon}")));
        }
        let solution = integrate_reduced(seed.as_ref(), horizon, cfg.rel_tol, cfg.abs_tol, true)?;
        let c = Self { seed, solution, horizon };
        c.validate()?;
        Ok(c)
    }

    /// Checks the mirrored half at every accepted node and step midpoint.
    fn validate(&self) -> Result<()> {
        let times = self.solution.times();
        let mut probes: Vec<f64> = Vec::with_capacity(2 * times.len());
        for w in times.windows(2) {
            probes.push(w[0]);
            probes.push(0.5 * (w[0] + w[1]));
        }
        probes.push(self.horizon);
        // tail beyond the horizon
        probes.extend((1..=20).map(|k| self.horizon + k as f64));
        for u in probes {
            let seed_value = self.seed_value(u);
            if seed_value < -NEGATIVE_TOL {
                return Err(Error::InvalidSeed(format!("seed is negative ({seed_value:e}) at t = {u}")));
            }
            let (alpha1, beta_a) = self.state(u);
            let alpha2 = alpha2_from(alpha1, beta_a);
            let numerator = -(SQRT_2 * KAPPA * beta_a + seed_value * alpha1);
            if alpha2 < ALPHA2_FLOOR {
                if numerator.abs() > 1e-10 {
                    return Err(Error::ConstructionSingular { t: u, alpha2 });
                }
                continue;
            }
            let mirrored = numerator / alpha2;
            if mirrored < -NEGATIVE_TOL {
                return Err(Error::InvalidSeed(format!(
                    "construction produced negative coupling g1({}) = {mirrored:e}",
                    -u
                )));
            }
        }
        Ok(())
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    /// Seed value on `t ≥ 0`, cut to zero past the horizon.
    pub fn seed_value(&self, u: f64) -> f64 {
        if u > self.horizon {
            0.0
        } else {
            self.seed.value(u)
        }
    }

    pub fn seed_derivative(&self, u: f64) -> f64 {
        if u > self.horizon {
            0.0
        } else {
            self.seed.derivative(u)
        }
    }

    /// `(α₁(u), β_a(u))` along the reduced trajectory, `u ≥ 0`. Past the
    /// horizon the seed is taken as zero: `α₁` freezes and `β_a` decays.
    pub fn state(&self, u: f64) -> (f64, f64) {
        let u = u.max(0.0);
        if u <= self.horizon {
            let mut y = [0.0; 2];
            self.solution.eval_into(u, &mut y).expect("construction solution spans [0, horizon] with dense output");
            (y[0], y[1])
        } else {
            let y = self.solution.last_state();
            (y[0], y[1] * (-KAPPA * (u - self.horizon)).exp())
        }
    }

    /// Constructed `g₁(−u)` for `u > 0`.
    pub fn mirrored_value(&self, u: f64) -> f64 {
        let (alpha1, beta_a) = self.state(u);
        let g = self.seed_value(u);
        let alpha2 = alpha2_from(alpha1, beta_a);
        let numerator = -(SQRT_2 * KAPPA * beta_a + g * alpha1);
        numerator / alpha2.max(ALPHA2_FLOOR)
    }

    /// `d/du` of [`Self::mirrored_value`], from the reduced equations.
    pub fn mirrored_derivative(&self, u: f64) -> f64 {
        let (alpha1, beta_a) = self.state(u);
        let g = self.seed_value(u);
        let dg = self.seed_derivative(u);
        let mut d = [0.0; 2];
        reduced_rhs(g, &[alpha1, beta_a], &mut d);
        let (da1, dba) = (d[0], d[1]);
        let alpha2 = alpha2_from(alpha1, beta_a).max(ALPHA2_FLOOR);
        let da2 = -(alpha1 * da1 + beta_a * dba) / alpha2;
        let num = -(SQRT_2 * KAPPA * beta_a + g * alpha1);
        let dnum = -(SQRT_2 * KAPPA * dba + dg * alpha1 + g * da1);
        (dnum * alpha2 - num * da2) / (alpha2 * alpha2)
    }

    /// Residual photon amplitude leaving the seed half: `α₁` at the horizon.
    pub fn final_alpha1(&self) -> f64 {
        self.solution.last_state()[0]
    }

    /// Maximum zero-jump residual `κβ_a + g₁α₁/√2 + g₂α₂/√2` over the
    /// accepted nodes of the reduced trajectory.
    pub fn max_residual(&self) -> f64 {
        self.solution
            .iter()
            .map(|(u, y)| {
                let (alpha1, beta_a) = (y[0], y[1]);
                let alpha2 = alpha2_from(alpha1, beta_a);
                let g1 = self.seed_value(u);
                let g2 = self.mirrored_value(u);
                (KAPPA * beta_a + g1 * alpha1 / SQRT_2 + g2 * alpha2 / SQRT_2).abs()
            })
            .fold(0.0, f64::max)
    }
}

pub(crate) fn alpha2_from(alpha1: f64, beta_a: f64) -> f64 {
    (1.0 - alpha1 * alpha1 - beta_a * beta_a).max(0.0).sqrt()
}
