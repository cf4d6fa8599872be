//! Derivative-free downhill simplex.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimplexOptions {
    /// Converged once every vertex is within this distance (max-norm) of the best.
    pub x_tol: f64,
    /// ... and every vertex value is within this of the best value.
    pub f_tol: f64,
    pub max_evaluations: usize,
}

impl Default for SimplexOptions {
    fn default() -> Self {
        Self { x_tol: 1e-4, f_tol: 1e-7, max_evaluations: 1000 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimplexOutcome {
    pub x: Vec<f64>,
    pub value: f64,
    pub evaluations: usize,
    pub converged: bool,
}

const REFLECT: f64 = 1.0;
const EXPAND: f64 = 2.0;
const CONTRACT: f64 = 0.5;
const SHRINK: f64 = 0.5;

/// Minimizes `f` starting from the given simplex (`d + 1` vertices of
/// dimension `d`).
pub fn minimize<F>(mut f: F, simplex: Vec<Vec<f64>>, opts: &SimplexOptions) -> SimplexOutcome
where
    F: FnMut(&[f64]) -> f64,
{
    let dim = simplex[0].len();
    assert_eq!(simplex.len(), dim + 1, "simplex needs dim + 1 vertices");
    let mut evaluations = 0usize;
    let mut eval = |x: &[f64], count: &mut usize| {
        *count += 1;
        let v = f(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };

    let mut verts: Vec<(Vec<f64>, f64)> = simplex
        .into_iter()
        .map(|x| {
            let v = eval(&x, &mut evaluations);
            (x, v)
        })
        .collect();

    let mut converged = false;
    loop {
        verts.sort_by(|a, b| a.1.total_cmp(&b.1));
        let (best_x, best_f) = (&verts[0].0, verts[0].1);
        let x_spread =
            verts[1..].iter().flat_map(|(x, _)| x.iter().zip(best_x).map(|(a, b)| (a - b).abs())).fold(0.0, f64::max);
        let f_spread = verts[1..].iter().map(|(_, v)| (v - best_f).abs()).fold(0.0, f64::max);
        if x_spread <= opts.x_tol && f_spread <= opts.f_tol {
            converged = true;
            break;
        }
        if evaluations >= opts.max_evaluations {
            break;
        }

        let centroid: Vec<f64> =
            (0..dim).map(|k| verts[..dim].iter().map(|(x, _)| x[k]).sum::<f64>() / dim as f64).collect();
        let worst = verts[dim].clone();
        let along =
            |coef: f64| -> Vec<f64> { centroid.iter().zip(&worst.0).map(|(c, w)| c + coef * (c - w)).collect() };

        let xr = along(REFLECT);
        let fr = eval(&xr, &mut evaluations);
        if fr < verts[0].1 {
            let xe = along(REFLECT * EXPAND);
            let fe = eval(&xe, &mut evaluations);
            verts[dim] = if fe < fr { (xe, fe) } else { (xr, fr) };
            continue;
        }
        if fr < verts[dim - 1].1 {
            verts[dim] = (xr, fr);
            continue;
        }
        // contraction, outside or inside
        let (xc, fc, accept) = if fr < worst.1 {
            let xc = along(REFLECT * CONTRACT);
            let fc = eval(&xc, &mut evaluations);
            let ok = fc <= fr;
            (xc, fc, ok)
        } else {
            let xc = along(-CONTRACT);
            let fc = eval(&xc, &mut evaluations);
            let ok = fc < worst.1;
            (xc, fc, ok)
        };
        if accept {
            verts[dim] = (xc, fc);
            continue;
        }
        let best = verts[0].0.clone();
        for vert in verts.iter_mut().skip(1) {
            let x: Vec<f64> = best.iter().zip(&vert.0).map(|(b, v)| b + SHRINK * (v - b)).collect();
            let v = eval(&x, &mut evaluations);
            *vert = (x, v);
        }
    }

    verts.sort_by(|a, b| a.1.total_cmp(&b.1));
    let (x, value) = verts.swap_remove(0);
    SimplexOutcome { x, value, evaluations, converged }
}
