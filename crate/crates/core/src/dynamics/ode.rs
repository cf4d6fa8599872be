//! Dormand–Prince 5(4) integrator with step-size control and continuous
//! (dense) output.
//!
//! Every equation set in the crate is integrated with this one engine: the
//! pulse-construction ODE, the zero-jump trajectory and the combined
//! master/correction system.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A first-order system `y' = f(t, y)` of fixed dimension.
pub trait OdeSystem {
    fn dim(&self) -> usize;
    fn rhs(&self, t: f64, y: &[f64], dy: &mut [f64]);
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegratorConfig {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub t_start: f64,
    pub t_end: f64,
    pub dense_output: bool,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            rel_tol: 1e-9,
            abs_tol: 1e-11,
            t_start: -DEFAULT_HALF_WINDOW,
            t_end: DEFAULT_HALF_WINDOW,
            dense_output: true,
        }
    }
}

/// Default half-width of the simulation window, in `1/κ`.
pub const DEFAULT_HALF_WINDOW: f64 = 15.0;

impl IntegratorConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.rel_tol > 0.0) || !(self.abs_tol > 0.0) {
            return Err(Error::Contract(format!(
                "tolerances must be positive (rel_tol = {}, abs_tol = {})",
                self.rel_tol, self.abs_tol
            )));
        }
        if !(self.t_end > self.t_start) || !self.t_start.is_finite() || !self.t_end.is_finite() {
            return Err(Error::Contract(format!(
                "integration window must satisfy t_start < t_end, got [{}, {}]",
                self.t_start, self.t_end
            )));
        }
        Ok(())
    }

    pub fn with_window(mut self, t_start: f64, t_end: f64) -> Self {
        self.t_start = t_start;
        self.t_end = t_end;
        self
    }

    /// Symmetric window `[−half_width, half_width]`.
    pub fn symmetric(self, half_width: f64) -> Self {
        self.with_window(-half_width, half_width)
    }

    pub fn with_tolerances(mut self, rel_tol: f64, abs_tol: f64) -> Self {
        self.rel_tol = rel_tol;
        self.abs_tol = abs_tol;
        self
    }
}

const MAX_STEPS: usize = 2_000_000;

// Dormand–Prince tableau.
const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
// Dense output (Shampine) coefficients.
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

/// Result of one integration: accepted step endpoints and, optionally, the
/// continuous extension over every step.
#[derive(Debug, Clone)]
pub struct Solution {
    dim: usize,
    times: Vec<f64>,
    states: Vec<f64>,
    /// Per step: five coefficient blocks of length `dim`.
    dense: Option<Vec<f64>>,
    rejected: usize,
    evaluations: usize,
}

impl Solution {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn state(&self, k: usize) -> &[f64] {
        &self.states[k * self.dim..(k + 1) * self.dim]
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, &[f64])> + '_ {
        self.times.iter().copied().zip(self.states.chunks_exact(self.dim))
    }

    pub fn first_time(&self) -> f64 {
        self.times[0]
    }

    pub fn last_time(&self) -> f64 {
        *self.times.last().expect("solution holds at least the initial state")
    }

    pub fn last_state(&self) -> &[f64] {
        self.state(self.times.len() - 1)
    }

    pub fn rejected_steps(&self) -> usize {
        self.rejected
    }

    pub fn rhs_evaluations(&self) -> usize {
        self.evaluations
    }

    pub fn has_dense_output(&self) -> bool {
        self.dense.is_some()
    }

    /// Continuous extension at `t`, which must lie inside the integrated span.
    /// Returns `None` outside the span or when dense output was not recorded.
    pub fn eval_into(&self, t: f64, out: &mut [f64]) -> Option<()> {
        let dense = self.dense.as_ref()?;
        let n = self.times.len();
        if n == 1 {
            if t == self.times[0] {
                out.copy_from_slice(self.state(0));
                return Some(());
            }
            return None;
        }
        if !(t >= self.times[0] && t <= self.times[n - 1]) {
            return None;
        }
        // index of the step [times[k], times[k+1]] containing t
        let k = match self.times.partition_point(|&x| x <= t) {
            0 => 0,
            p if p >= n => n - 2,
            p => p - 1,
        };
        let t0 = self.times[k];
        let h = self.times[k + 1] - t0;
        let theta = if h > 0.0 { (t - t0) / h } else { 0.0 };
        let theta1 = 1.0 - theta;
        let d = self.dim;
        let block = &dense[k * 5 * d..(k + 1) * 5 * d];
        for i in 0..d {
            let r1 = block[i];
            let r2 = block[d + i];
            let r3 = block[2 * d + i];
            let r4 = block[3 * d + i];
            let r5 = block[4 * d + i];
            out[i] = r1 + theta * (r2 + theta1 * (r3 + theta * (r4 + theta1 * r5)));
        }
        Some(())
    }

    pub fn eval(&self, t: f64) -> Option<Vec<f64>> {
        let mut out = vec![0.0; self.dim];
        self.eval_into(t, &mut out).map(|_| out)
    }
}

/// Tolerances and span for one call to [`integrate`].
#[derive(Debug, Clone, Copy)]
pub struct Span {
    pub t_start: f64,
    pub t_end: f64,
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub dense: bool,
}

impl From<&IntegratorConfig> for Span {
    fn from(cfg: &IntegratorConfig) -> Self {
        Span {
            t_start: cfg.t_start,
            t_end: cfg.t_end,
            rel_tol: cfg.rel_tol,
            abs_tol: cfg.abs_tol,
            dense: cfg.dense_output,
        }
    }
}

/// Integrates `sys` from `y0` over `span`. Steps never straddle any of the
/// supplied `breakpoints`, so kinks in the right-hand side (pulse knots, the
/// pulse end time) are landed on exactly.
pub fn integrate<S: OdeSystem + ?Sized>(sys: &S, y0: &[f64], span: Span, breakpoints: &[f64]) -> Result<Solution> {
    let dim = sys.dim();
    assert_eq!(y0.len(), dim, "initial state has wrong dimension");
    if !(span.t_end > span.t_start) {
        return Err(Error::Contract(format!(
            "integration span must be increasing, got [{}, {}]",
            span.t_start, span.t_end
        )));
    }

    // stops closer than a few ulps would force an unrepresentable step
    let gap = |t: f64| 1e-12 * t.abs().max(1.0);
    let mut stops: Vec<f64> =
        breakpoints.iter().copied().filter(|&b| b - span.t_start > gap(b) && span.t_end - b > gap(b)).collect();
    stops.sort_by(f64::total_cmp);
    stops.dedup_by(|b, a| *b - *a <= gap(*b));
    stops.push(span.t_end);

    let mut sol = Solution {
        dim,
        times: vec![span.t_start],
        states: y0.to_vec(),
        dense: span.dense.then(Vec::new),
        rejected: 0,
        evaluations: 0,
    };

    let mut work = Workspace::new(dim);
    let mut y = y0.to_vec();
    let mut t = span.t_start;
    sys.rhs(t, &y, &mut work.k[0]);
    sol.evaluations += 1;
    let f0 = work.k[0].clone();
    let mut h = initial_step(sys, t, &y, &f0, span, stops[0] - t, &mut work);
    sol.evaluations += 1;
    let mut steps = 0usize;

    for &stop in &stops {
        while t < stop {
            if steps >= MAX_STEPS {
                return Err(Error::IntegrationFailure { t, reason: format!("step budget of {MAX_STEPS} exhausted") });
            }
            let remaining = stop - t;
            let last = 1.01 * h >= remaining;
            let h_try = if last { remaining } else { h };
            if h_try <= f64::EPSILON * t.abs().max(1.0) * 4.0 {
                return Err(Error::IntegrationFailure { t, reason: format!("step size underflow (h = {h_try:e})") });
            }

            let err = work.step(sys, t, &y, h_try, span);
            sol.evaluations += 6;
            if !err.is_finite() {
                return Err(Error::IntegrationFailure { t, reason: "non-finite state".into() });
            }
            steps += 1;

            let fac = if err == 0.0 { 10.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 10.0) };
            if err <= 1.0 {
                let t_new = if last { stop } else { t + h_try };
                if let Some(dense) = sol.dense.as_mut() {
                    work.append_dense(&y, h_try, dense);
                }
                y.copy_from_slice(&work.y_new);
                work.k.swap(0, 6);
                t = t_new;
                sol.times.push(t);
                sol.states.extend_from_slice(&y);
                h = h_try * fac;
            } else {
                sol.rejected += 1;
                h = h_try * fac.min(1.0);
            }
        }
        // derivative at a breakpoint is re-evaluated on the far side
        if stop < span.t_end {
            sys.rhs(t, &y, &mut work.k[0]);
            sol.evaluations += 1;
        }
    }
    Ok(sol)
}

fn initial_step<S: OdeSystem + ?Sized>(
    sys: &S,
    t: f64,
    y: &[f64],
    f0: &[f64],
    span: Span,
    max_h: f64,
    work: &mut Workspace,
) -> f64 {
    // Hairer–Wanner starting step heuristic
    let scale = |yi: f64| span.abs_tol + span.rel_tol * yi.abs();
    let d0 = rms(y.iter().map(|&yi| yi / scale(yi)));
    let d1 = rms(y.iter().zip(f0).map(|(&yi, &fi)| fi / scale(yi)));
    let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    let h0 = h0.min(max_h);
    for (yt, (&yi, &fi)) in work.y_stage.iter_mut().zip(y.iter().zip(f0)) {
        *yt = yi + h0 * fi;
    }
    sys.rhs(t + h0, &work.y_stage, &mut work.k[1]);
    let d2 = rms(y.iter().zip(f0.iter().zip(&work.k[1])).map(|(&yi, (&a, &b))| (b - a) / scale(yi))) / h0;
    let h1 = if d1.max(d2) <= 1e-15 { (h0 * 1e-3).max(1e-6) } else { (0.01 / d1.max(d2)).powf(0.2) };
    (100.0 * h0).min(h1).min(max_h)
}

fn rms(it: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = it.fold((0.0, 0usize), |(s, n), v| (s + v * v, n + 1));
    if n == 0 {
        0.0
    } else {
        (sum / n as f64).sqrt()
    }
}

struct Workspace {
    k: [Vec<f64>; 7],
    y_stage: Vec<f64>,
    y_new: Vec<f64>,
}

impl Workspace {
    fn new(dim: usize) -> Self {
        Self { k: std::array::from_fn(|_| vec![0.0; dim]), y_stage: vec![0.0; dim], y_new: vec![0.0; dim] }
    }

    /// Takes one trial step; `k[0]` must hold `f(t, y)`. Returns the scaled
    /// error norm; on return `k[6]` holds `f(t + h, y_new)`.
    #[allow(clippy::needless_range_loop)]
    fn step<S: OdeSystem + ?Sized>(&mut self, sys: &S, t: f64, y: &[f64], h: f64, span: Span) -> f64 {
        let dim = y.len();
        macro_rules! stage {
            ($dst:expr, $c:expr, $( ($a:expr, $ki:expr) ),+ ) => {{
                for i in 0..dim {
                    let mut acc = 0.0;
                    $( acc += $a * self.k[$ki][i]; )+
                    self.y_stage[i] = y[i] + h * acc;
                }
                sys.rhs(t + $c * h, &self.y_stage, &mut self.k[$dst]);
            }};
        }
        stage!(1, C2, (A21, 0));
        stage!(2, C3, (A31, 0), (A32, 1));
        stage!(3, C4, (A41, 0), (A42, 1), (A43, 2));
        stage!(4, C5, (A51, 0), (A52, 1), (A53, 2), (A54, 3));
        stage!(5, 1.0, (A61, 0), (A62, 1), (A63, 2), (A64, 3), (A65, 4));
        for i in 0..dim {
            self.y_new[i] = y[i]
                + h * (A71 * self.k[0][i]
                    + A73 * self.k[2][i]
                    + A74 * self.k[3][i]
                    + A75 * self.k[4][i]
                    + A76 * self.k[5][i]);
        }
        sys.rhs(t + h, &self.y_new, &mut self.k[6]);

        let mut sum = 0.0;
        for i in 0..dim {
            let e = h
                * (E1 * self.k[0][i]
                    + E3 * self.k[2][i]
                    + E4 * self.k[3][i]
                    + E5 * self.k[4][i]
                    + E6 * self.k[5][i]
                    + E7 * self.k[6][i]);
            let sc = span.abs_tol + span.rel_tol * y[i].abs().max(self.y_new[i].abs());
            sum += (e / sc) * (e / sc);
        }
        (sum / dim as f64).sqrt()
    }

    fn append_dense(&self, y: &[f64], h: f64, out: &mut Vec<f64>) {
        let dim = y.len();
        let base = out.len();
        out.resize(base + 5 * dim, 0.0);
        let (r1, rest) = out[base..].split_at_mut(dim);
        let (r2, rest) = rest.split_at_mut(dim);
        let (r3, rest) = rest.split_at_mut(dim);
        let (r4, r5) = rest.split_at_mut(dim);
        for i in 0..dim {
            let dy = self.y_new[i] - y[i];
            let bspl = h * self.k[0][i] - dy;
            r1[i] = y[i];
            r2[i] = dy;
            r3[i] = bspl;
            r4[i] = dy - h * self.k[6][i] - bspl;
            r5[i] = h
                * (D1 * self.k[0][i]
                    + D3 * self.k[2][i]
                    + D4 * self.k[3][i]
                    + D5 * self.k[4][i]
                    + D6 * self.k[5][i]
                    + D7 * self.k[6][i]);
        }
    }
}

/// Adapter turning a closure into an [`OdeSystem`].
pub struct FnSystem<F> {
    dim: usize,
    f: F,
}

impl<F: Fn(f64, &[f64], &mut [f64])> FnSystem<F> {
    pub fn new(dim: usize, f: F) -> Self {
        Self { dim, f }
    }
}

impl<F: Fn(f64, &[f64], &mut [f64])> OdeSystem for FnSystem<F> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn rhs(&self, t: f64, y: &[f64], dy: &mut [f64]) {
        (self.f)(t, y, dy)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn span(t0: f64, t1: f64, tol: f64) -> Span {
        Span { t_start: t0, t_end: t1, rel_tol: tol, abs_tol: tol * 1e-2, dense: true }
    }

    #[test]
    fn exponential_decay() {
        let sys = FnSystem::new(1, |_t, y: &[f64], dy: &mut [f64]| dy[0] = -y[0]);
        let sol = integrate(&sys, &[1.0], span(0.0, 5.0, 1e-10), &[]).unwrap();
        assert!((sol.last_state()[0] - (-5.0f64).exp()).abs() < 1e-10);
        assert_eq!(sol.last_time(), 5.0);
    }

    #[test]
    fn harmonic_oscillator_dense_output() {
        let sys = FnSystem::new(2, |_t, y: &[f64], dy: &mut [f64]| {
            dy[0] = y[1];
            dy[1] = -y[0];
        });
        let sol = integrate(&sys, &[0.0, 1.0], span(0.0, 10.0, 1e-10), &[]).unwrap();
        for k in 0..=200 {
            let t = 10.0 * k as f64 / 200.0;
            let y = sol.eval(t).unwrap();
            assert!((y[0] - t.sin()).abs() < 1e-8, "t = {t}: {}", y[0] - t.sin());
            assert!((y[1] - t.cos()).abs() < 1e-8);
        }
        assert!(sol.eval(10.5).is_none());
        assert!(sol.eval(-0.1).is_none());
    }

    #[test]
    fn near_duplicate_breakpoints_are_merged() {
        let sys = FnSystem::new(1, |t, _y: &[f64], dy: &mut [f64]| dy[0] = t.abs());
        let b = 5.533914786481477f64;
        let sol =
            integrate(&sys, &[0.0], span(-6.0, 6.0, 1e-10), &[-b, -b - 8.9e-16, 0.0, 1e-17, 6.0 - 1e-15]).unwrap();
        assert!((sol.last_state()[0] - 36.0).abs() < 1e-8);
    }

    #[test]
    fn breakpoints_are_hit_exactly() {
        // |t| has a kink at 0
        let sys = FnSystem::new(1, |t, _y: &[f64], dy: &mut [f64]| dy[0] = t.abs());
        let sol = integrate(&sys, &[0.0], span(-1.0, 2.0, 1e-10), &[0.0, 5.0]).unwrap();
        assert!(sol.times().contains(&0.0));
        let exact = 0.5 + 2.0;
        assert!((sol.last_state()[0] - exact).abs() < 1e-12);
    }

    #[test]
    fn convergence_order_is_at_least_four() {
        // error should shrink by roughly tol ratio
        let sys = FnSystem::new(1, |t, y: &[f64], dy: &mut [f64]| dy[0] = y[0] * t.cos());
        let exact = (3.0f64.sin()).exp();
        let e1 = (integrate(&sys, &[1.0], span(0.0, 3.0, 1e-6), &[]).unwrap().last_state()[0] - exact).abs();
        let e2 = (integrate(&sys, &[1.0], span(0.0, 3.0, 1e-10), &[]).unwrap().last_state()[0] - exact).abs();
        assert!(e2 < e1 * 1e-2 || e2 < 1e-13, "e1 = {e1:e}, e2 = {e2:e}");
    }

    #[test]
    fn rejects_bad_config() {
        let cfg = IntegratorConfig { rel_tol: 0.0, ..Default::default() };
        assert!(cfg.validate().is_err());
        let cfg = IntegratorConfig::default().with_window(1.0, 1.0);
        assert!(cfg.validate().is_err());
        assert!(IntegratorConfig::default().validate().is_ok());
    }
}
