//! Least-squares fit of `a + b/(c + T)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    /// Euclidean norm of the residual vector.
    pub residual: f64,
    pub iterations: usize,
}

impl FitResult {
    pub fn predict(&self, t: f64) -> f64 {
        self.a + self.b / (self.c + t)
    }
}

const MAX_ITERATIONS: usize = 500;

/// Fits `η(T) ≈ a + b/(c + T)` by damped Gauss–Newton.
pub fn fit_hyperbolic(points: &[(f64, f64)]) -> Result<FitResult> {
    if points.len() < 3 {
        return Err(Error::Contract(format!("hyperbolic fit needs at least 3 points, got {}", points.len())));
    }
    if points.iter().any(|(t, y)| !t.is_finite() || !y.is_finite()) {
        return Err(Error::Contract("fit points must be finite".into()));
    }
    let mut ts: Vec<f64> = points.iter().map(|p| p.0).collect();
    ts.sort_by(f64::total_cmp);
    if ts.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::Contract("fit points need distinct T values".into()));
    }
    let t_min = ts[0];

    let (t_first, y_first) = points[0];
    let a0 = points[points.len() - 1].1;
    let c0 = 1.0f64.max(1e-3 - t_min);
    let b0 = (y_first - a0) * (c0 + t_first);
    let mut p = [a0, b0, c0];

    let residuals = |p: &[f64; 3]| -> Vec<f64> { points.iter().map(|&(t, y)| p[0] + p[1] / (p[2] + t) - y).collect() };
    let cost = |r: &[f64]| r.iter().map(|v| v * v).sum::<f64>();
    let feasible = |p: &[f64; 3]| p[2] + t_min > 0.0;

    let mut r = residuals(&p);
    let mut f = cost(&r);
    let mut lambda = 1e-3;
    let mut iterations = 0;
    let mut converged = false;

    while iterations < MAX_ITERATIONS {
        iterations += 1;
        // normal equations J^T J and J^T r
        let mut jtj = [[0.0; 3]; 3];
        let mut jtr = [0.0; 3];
        for (&(t, _), &ri) in points.iter().zip(&r) {
            let d = p[2] + t;
            let row = [1.0, 1.0 / d, -p[1] / (d * d)];
            for i in 0..3 {
                jtr[i] += row[i] * ri;
                for j in 0..3 {
                    jtj[i][j] += row[i] * row[j];
                }
            }
        }
        let grad = jtr.iter().map(|v| v.abs()).fold(0.0, f64::max);
        if grad < 1e-15 || f < 1e-30 {
            converged = true;
            break;
        }

        let mut improved = false;
        for _ in 0..60 {
            let mut m = jtj;
            for (i, row) in m.iter_mut().enumerate() {
                row[i] += lambda * jtj[i][i].max(1e-12);
            }
            let Some(step) = solve3(m, jtr.map(|v| -v)) else {
                lambda *= 10.0;
                continue;
            };
            let trial = [p[0] + step[0], p[1] + step[1], p[2] + step[2]];
            if feasible(&trial) {
                let rt = residuals(&trial);
                let ft = cost(&rt);
                if ft < f {
                    let rel = (f - ft) / f.max(1e-300);
                    let step_size =
                        step.iter().zip(&trial).map(|(s, v)| s.abs() / (v.abs() + 1e-12)).fold(0.0, f64::max);
                    p = trial;
                    r = rt;
                    f = ft;
                    lambda = (lambda / 10.0).max(1e-15);
                    improved = true;
                    if rel < 1e-15 || step_size < 1e-13 {
                        converged = true;
                    }
                    break;
                }
            }
            lambda *= 10.0;
        }
        if !improved {
            // no descent direction left at any damping
            converged = true;
            break;
        }
        if converged {
            break;
        }
    }

    let residual = f.sqrt();
    if !converged || !p.iter().all(|v| v.is_finite()) {
        return Err(Error::FitFailed { reason: format!("no convergence after {iterations} iterations"), residual });
    }
    Ok(FitResult { a: p[0], b: p[1], c: p[2], residual, iterations })
}

fn solve3(m: [[f64; 3]; 3], rhs: [f64; 3]) -> Option<[f64; 3]> {
    let det = |m: &[[f64; 3]; 3]| {
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    };
    let d = det(&m);
    let scale = m.iter().flatten().map(|v| v.abs()).fold(0.0, f64::max).powi(3);
    if !(d.abs() > 1e-300 && d.abs() > 1e-14 * scale) {
        return None;
    }
    let mut out = [0.0; 3];
    for (k, o) in out.iter_mut().enumerate() {
        let mut mk = m;
        for i in 0..3 {
            mk[i][k] = rhs[i];
        }
        *o = det(&mk) / d;
    }
    Some(out)
}
