//! Pulse optimization by numerical substitution: `g₀` is solved from the
//! transfer constraint and the remaining knot values are free.

mod fit;
pub mod nelder_mead;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{evolve_master, photon_norm, IntegratorConfig};
use crate::error::{Error, Result};
use crate::hilbert::BasisState;
use crate::pulses::{integrate_reduced, sampled_seed, sampled_to_shape, sech, NoiseKind, PulseShape, SampledPulse};
use crate::sensitivity::{comparison_model, noise_sensitivity, window_for};

pub use fit::{fit_hyperbolic, FitResult};
pub use nelder_mead::{SimplexOptions, SimplexOutcome};

/// Target for `|α₁(T)|` when solving for `g₀`.
pub const CONSTRAINT_TOLERANCE: f64 = 1e-9;

/// Initial bracket for `g₀` and the largest upper end it may grow to.
pub const G0_BRACKET: (f64, f64) = (1e-3, 20.0);
pub const G0_BRACKET_LIMIT: f64 = 1e3;

const BRACKET_SAMPLES: usize = 24;
const REDUCED_RTOL: f64 = 1e-12;
const REDUCED_ATOL: f64 = 1e-14;

/// Peak of the sech start; the smallest scale for initial simplex steps.
const SIMPLEX_SCALE_FLOOR: f64 = 1.0;

/// Smallest objective improvement that triggers another restart.
const RESTART_GAIN: f64 = 1e-6;

/// Objective value assigned to points where no transfer pulse exists.
const PENALTY: f64 = 1e3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizationProblem {
    /// Number of knots carrying a value, `g₀ … g_{n−1}`.
    pub n: usize,
    pub end_time: f64,
    pub noise: NoiseKind,
    /// Upper bound for each free knot value.
    pub g_max: f64,
    pub simplex: SimplexOptions,
    /// Relative size of the initial simplex around the sech start.
    pub initial_spread: f64,
    pub seed: u64,
    pub integrator: IntegratorConfig,
}

impl OptimizationProblem {
    pub fn new(n: usize, end_time: f64, noise: NoiseKind) -> Self {
        Self {
            n,
            end_time,
            noise,
            g_max: G0_BRACKET.1,
            simplex: SimplexOptions { max_evaluations: 4000, ..SimplexOptions::default() },
            initial_spread: 0.1,
            seed: 0,
            integrator: IntegratorConfig::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::Contract(format!("need at least 2 knots, got {}", self.n)));
        }
        if !(self.end_time > 0.0) || !self.end_time.is_finite() {
            return Err(Error::Contract(format!("end time must be positive, got {}", self.end_time)));
        }
        if !(self.g_max > 0.0) {
            return Err(Error::Contract(format!("g_max must be positive, got {}", self.g_max)));
        }
        if !(self.initial_spread > 0.0 && self.initial_spread < 1.0) {
            return Err(Error::Contract(format!("initial spread must lie in (0, 1), got {}", self.initial_spread)));
        }
        if self.simplex.max_evaluations == 0 {
            return Err(Error::Contract("evaluation budget must be positive".into()));
        }
        self.integrator.validate()
    }

    /// Knot times `t_j = jT/n` of the free points, `j = 1..n−1`.
    pub fn free_knot_times(&self) -> Vec<f64> {
        (1..self.n).map(|j| j as f64 * self.end_time / self.n as f64).collect()
    }

    /// Sech sampled at the free knots.
    pub fn sech_start(&self) -> Vec<f64> {
        self.free_knot_times().into_iter().map(sech).collect()
    }
}

/// `α₁(T)` of the reduced construction for knot values `points = [g₀, …]`.
pub fn constraint_residual(points: &[f64], end_time: f64) -> Result<f64> {
    let pulse = SampledPulse::new(end_time, points.to_vec())?;
    let seed = sampled_seed(&pulse)?;
    let sol = integrate_reduced(&seed, end_time, REDUCED_RTOL, REDUCED_ATOL, false)?;
    Ok(sol.last_state()[0])
}

/// Finds `g₀ > 0` such that the pulse through `[g₀, free…]` leaves `α₁(T) = 0`.
/// The lowest root in the bracket is returned.
pub fn solve_constraint(free: &[f64], end_time: f64) -> Result<f64> {
    let f = |g0: f64| -> Result<f64> {
        let mut points = Vec::with_capacity(free.len() + 1);
        points.push(g0);
        points.extend_from_slice(free);
        constraint_residual(&points, end_time)
    };

    let (lo, mut hi) = G0_BRACKET;
    let mut scanned_from = lo;
    let mut prev = (lo, f(lo)?);
    loop {
        let ratio = (hi / scanned_from).powf(1.0 / BRACKET_SAMPLES as f64);
        let mut x = scanned_from;
        for _ in 0..BRACKET_SAMPLES {
            x = (x * ratio).min(hi);
            let v = f(x)?;
            if v == 0.0 {
                return Ok(x);
            }
            if v.signum() != prev.1.signum() {
                return refine_root(&f, prev, (x, v));
            }
            prev = (x, v);
        }
        if hi >= G0_BRACKET_LIMIT {
            return Err(Error::ConstraintInfeasible { lo, hi });
        }
        scanned_from = hi;
        hi = (hi * 2.0).min(G0_BRACKET_LIMIT);
    }
}

/// Brent's method on a sign-changing bracket.
fn refine_root<F>(f: &F, a: (f64, f64), b: (f64, f64)) -> Result<f64>
where
    F: Fn(f64) -> Result<f64>,
{
    let (mut a, mut fa) = a;
    let (mut b, mut fb) = b;
    if fa.abs() < fb.abs() {
        std::mem::swap(&mut a, &mut b);
        std::mem::swap(&mut fa, &mut fb);
    }
    let (mut c, mut fc) = (a, fa);
    let mut d = b - a;
    let mut bisected = true;
    for _ in 0..200 {
        if fb.abs() < CONSTRAINT_TOLERANCE * 1e-3 || (b - a).abs() < 1e-15 * b.abs() {
            break;
        }
        let mut s = if fa != fc && fb != fc {
            a * fb * fc / ((fa - fb) * (fa - fc))
                + b * fa * fc / ((fb - fa) * (fb - fc))
                + c * fa * fb / ((fc - fa) * (fc - fb))
        } else {
            b - fb * (b - a) / (fb - fa)
        };
        let lo = (3.0 * a + b) / 4.0;
        let outside = !((s > lo.min(b)) && (s < lo.max(b)));
        let slow = if bisected { (s - b).abs() >= (b - c).abs() / 2.0 } else { (s - b).abs() >= (c - d).abs() / 2.0 };
        if outside || slow {
            s = 0.5 * (a + b);
            bisected = true;
        } else {
            bisected = false;
        }
        let fs = f(s)?;
        d = c;
        c = b;
        fc = fb;
        if fa.signum() != fs.signum() {
            b = s;
            fb = fs;
        } else {
            a = s;
            fa = fs;
        }
        if fa.abs() < fb.abs() {
            std::mem::swap(&mut a, &mut b);
            std::mem::swap(&mut fa, &mut fb);
        }
    }
    if fb.abs() > CONSTRAINT_TOLERANCE {
        return Err(Error::OptimizationFailed(format!("constraint solve stalled at g0 = {b} with alpha1(T) = {fb:e}")));
    }
    Ok(b)
}

/// A feasible transfer pulse with its noise sensitivity.
#[derive(Debug, Clone)]
pub struct Candidate {
    pub pulse: SampledPulse,
    pub shape: PulseShape,
    pub eta_final: f64,
    pub constraint_residual: f64,
}

/// Builds and scores the pulse for a vector of free knot values.
pub fn evaluate(problem: &OptimizationProblem, free: &[f64]) -> Result<Candidate> {
    if free.len() + 1 != problem.n {
        return Err(Error::Contract(format!("expected {} free points, got {}", problem.n - 1, free.len())));
    }
    if let Some(v) = free.iter().find(|v| !(**v >= 0.0 && **v <= problem.g_max)) {
        return Err(Error::Domain(format!("free point {v} outside [0, {}]", problem.g_max)));
    }
    let g0 = solve_constraint(free, problem.end_time)?;
    let mut values = Vec::with_capacity(problem.n);
    values.push(g0);
    values.extend_from_slice(free);
    let pulse = SampledPulse::new(problem.end_time, values)?;
    let constraint_residual = constraint_residual(&pulse.values, pulse.end_time)?;
    let shape = sampled_to_shape(&pulse)?;
    let cfg = window_for(&shape, &problem.integrator);
    let model = comparison_model(&shape, problem.noise)?;
    let report = noise_sensitivity(&shape, std::slice::from_ref(&model), &cfg)?;
    Ok(Candidate { pulse, shape, eta_final: report.eta[0].eta_final, constraint_residual })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OptimizationResult {
    pub n: usize,
    pub end_time: f64,
    pub noise: NoiseKind,
    /// `g₀ … g_{n−1}` at `t_j = jT/n`.
    pub points: Vec<f64>,
    pub eta_final: f64,
    /// `ρ₄₄(t_end)` from an independent master-equation run.
    pub fidelity: f64,
    /// `∫ β_a² dt` (should be `1/κ`).
    pub photon_norm: f64,
    pub constraint_residual: f64,
    pub evaluations: usize,
    pub infeasible_evaluations: usize,
    pub converged: bool,
}

impl OptimizationResult {
    pub fn pulse(&self) -> SampledPulse {
        SampledPulse { end_time: self.end_time, values: self.points.clone() }
    }

    pub fn shape(&self) -> Result<PulseShape> {
        sampled_to_shape(&self.pulse())
    }
}

fn initial_simplex(center: &[f64], spread: f64, rng: &mut ChaCha8Rng, g_max: f64) -> Vec<Vec<f64>> {
    let mut simplex = vec![center.to_vec()];
    for k in 0..center.len() {
        let mut v = center.to_vec();
        let mut sign = if rng.gen::<bool>() { 1.0 } else { -1.0 };
        // steps are relative to the pulse peak for knots far out in the tail
        let step = spread * v[k].abs().max(SIMPLEX_SCALE_FLOOR);
        if v[k] - step < 0.0 {
            sign = 1.0;
        }
        v[k] = (v[k] + sign * step).min(g_max);
        simplex.push(v);
    }
    simplex
}

/// Nelder–Mead on `−η(+∞)` over the free knots, restarted from the best point
/// until a restart gains less than `RESTART_GAIN` or the budget runs out.
pub fn optimize(problem: &OptimizationProblem) -> Result<OptimizationResult> {
    problem.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(problem.seed);
    let mut infeasible = 0usize;
    let mut best: Option<Candidate> = None;

    let mut objective = |x: &[f64]| -> f64 {
        match evaluate(problem, x) {
            Ok(c) => {
                let value = -c.eta_final;
                if best.as_ref().is_none_or(|b| c.eta_final > b.eta_final) {
                    best = Some(c);
                }
                value
            }
            Err(_) => {
                infeasible += 1;
                let excess: f64 = x.iter().map(|v| (-v).max(0.0) + (v - problem.g_max).max(0.0)).sum();
                PENALTY * (1.0 + excess)
            }
        }
    };

    let start = problem.sech_start();
    let first = nelder_mead::minimize(
        &mut objective,
        initial_simplex(&start, problem.initial_spread, &mut rng, problem.g_max),
        &problem.simplex,
    );
    let mut evaluations = first.evaluations;
    let mut converged = first.converged;
    let mut current = first;
    // a collapsed simplex on a flat ridge is not a minimum; rebuild it while that still pays
    loop {
        let remaining = problem.simplex.max_evaluations.saturating_sub(evaluations);
        if remaining <= problem.n + 1 {
            break;
        }
        let opts = SimplexOptions { max_evaluations: remaining, ..problem.simplex };
        let simplex = initial_simplex(&current.x, problem.initial_spread, &mut rng, problem.g_max);
        let next = nelder_mead::minimize(&mut objective, simplex, &opts);
        evaluations += next.evaluations;
        converged = next.converged;
        let gain = current.value - next.value;
        if next.value < current.value {
            current = next;
        }
        if gain <= RESTART_GAIN {
            break;
        }
    }

    let Some(best) = best else {
        return Err(Error::OptimizationFailed(format!("no feasible pulse in {infeasible} evaluations")));
    };
    let window = window_for(&best.shape, &problem.integrator);
    let fidelity = evolve_master(&best.shape, &window)?.last().population(BasisState::G0E0);
    let norm = photon_norm(&best.shape, &window)?;
    Ok(OptimizationResult {
        n: problem.n,
        end_time: problem.end_time,
        noise: problem.noise,
        points: best.pulse.values,
        eta_final: best.eta_final,
        fidelity,
        photon_norm: norm,
        constraint_residual: best.constraint_residual,
        evaluations,
        infeasible_evaluations: infeasible,
        converged,
    })
}

#[derive(Debug)]
pub struct SweepEntry {
    pub end_time: f64,
    pub result: Result<OptimizationResult>,
}

/// Independent optimizations at each end time, in parallel, ordered by `T`.
pub fn sweep_end_time(base: &OptimizationProblem, end_times: &[f64]) -> Result<Vec<SweepEntry>> {
    if end_times.is_empty() {
        return Err(Error::Contract("sweep needs at least one end time".into()));
    }
    let mut times = end_times.to_vec();
    times.sort_by(f64::total_cmp);
    Ok(times
        .par_iter()
        .map(|&end_time| {
            let problem = OptimizationProblem { end_time, ..base.clone() };
            SweepEntry { end_time, result: optimize(&problem) }
        })
        .collect())
}
