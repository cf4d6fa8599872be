//! Acceptance suite. Runs without the libtest harness so every criterion
//! prints exactly one PASS/FAIL line; the process exits nonzero on any FAIL.

use std::process::ExitCode;
use std::sync::Arc;
use std::time::{Duration, Instant};

use cascade_core::dynamics::{
    evolve_master, evolve_with_correction, integrate_trajectory, lindblad_rhs, photon_norm, IntegratorConfig,
    NoiseModel,
};
use cascade_core::hilbert::{pure_to_density, BasisState, Cavity, DensityMatrix, Operator, KAPPA};
use cascade_core::optimizer::{
    fit_hyperbolic, solve_constraint, sweep_end_time, OptimizationProblem, OptimizationResult,
};
use cascade_core::pulses::{
    cirac_construct, perturbation, sampled_to_shape, sech_pulse, sech_reference_state, NoiseKind, PulseShape,
    ReferenceSeed, SampledPulse, SechSeed,
};
use cascade_core::sensitivity::{compare_pulses, comparison_model, noise_sensitivity, window_for};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SWEEP_TIMES: [f64; 5] = [2.0, 4.0, 6.0, 8.0, 10.0];

struct Report {
    failures: usize,
}

impl Report {
    fn line(&mut self, id: &str, pass: bool, detail: String) {
        if !pass {
            self.failures += 1;
        }
        println!("{} criterion {id}: {detail}", if pass { "PASS" } else { "FAIL" });
    }

    fn error(&mut self, id: &str, err: impl std::fmt::Display) {
        self.line(id, false, format!("error: {err}"));
    }
}

fn secs(d: Duration) -> f64 {
    d.as_secs_f64()
}

fn criterion_1(r: &mut Report) {
    let start = Instant::now();
    let shape = sech_pulse();
    let traj = match integrate_trajectory(&shape, &IntegratorConfig::default().symmetric(20.0)) {
        Ok(t) => t,
        Err(e) => return r.error("1", e),
    };
    let mut err = 0.0f64;
    for k in 0..50 {
        let t = -10.0 + 20.0 * k as f64 / 49.0;
        let s = traj.at(t).expect("probe inside window");
        let exact = sech_reference_state(t);
        err = err
            .max((s.alpha1 - exact.alpha1).abs())
            .max((s.alpha2 - exact.alpha2).abs())
            .max((s.beta_a - exact.beta_a).abs())
            .max((s.beta_s - exact.beta_s).abs());
    }
    let elapsed = start.elapsed();
    r.line(
        "1",
        err <= 1e-7 && elapsed < Duration::from_secs(1),
        format!("sech trajectory vs closed form, max error {err:.2e} (<= 1e-7), {:.3} s (< 1 s)", secs(elapsed)),
    );
}

fn criterion_2(r: &mut Report) {
    let start = Instant::now();
    let master = match evolve_master(&sech_pulse(), &IntegratorConfig::default()) {
        Ok(m) => m,
        Err(e) => return r.error("2", e),
    };
    let elapsed = start.elapsed();
    let fidelity = master.fidelity();
    r.line(
        "2",
        fidelity >= 1.0 - 1e-6 && master.max_trace_drift <= 1e-9 && elapsed < Duration::from_secs(1),
        format!(
            "sech transfer, rho44 = {fidelity:.10} (>= 1 - 1e-6), trace drift {:.2e} (<= 1e-9), {:.3} s (< 1 s)",
            master.max_trace_drift,
            secs(elapsed)
        ),
    );
}

fn criterion_3(r: &mut Report) {
    let shape = sech_pulse();
    let cfg = IntegratorConfig::default();
    let (master, traj) = match (evolve_master(&shape, &cfg), integrate_trajectory(&shape, &cfg)) {
        (Ok(m), Ok(t)) => (m, t),
        (Err(e), _) | (_, Err(e)) => return r.error("3", e),
    };
    let mut err = 0.0f64;
    for rho in master.states() {
        let psi = traj.at(rho.time).expect("same window");
        let pure = pure_to_density(&psi).expect("normalized state");
        err = err.max(rho.max_abs_diff(&pure));
    }
    r.line("3", err <= 1e-6, format!("master vs pure-state density over the full window, max {err:.2e} (<= 1e-6)"));
}

fn criterion_4(r: &mut Report) {
    let rebuilt = match cirac_construct(Arc::new(SechSeed)) {
        Ok(s) => s,
        Err(e) => return r.error("4", e),
    };
    let sech = sech_pulse();
    let err =
        (0..1000).map(|k| -10.0 + 0.01 * k as f64).map(|t| (rebuilt.g1(t) - sech.g1(t)).abs()).fold(0.0, f64::max);
    r.line(
        "4",
        err <= 1e-6,
        format!("construction from the sech half reproduces t < 0, max error {err:.2e} (<= 1e-6)"),
    );
}

fn random_hermitian(rng: &mut ChaCha8Rng) -> Operator {
    let mut m = Operator::zeros();
    for i in 0..5 {
        m[(i, i)] = Complex64::new(rng.gen_range(-1.0..1.0), 0.0);
        for j in i + 1..5 {
            let z = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            m[(i, j)] = z;
            m[(j, i)] = z.conj();
        }
    }
    m
}

fn criterion_5(r: &mut Report) {
    use BasisState::*;
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut err = 0.0f64;
    for _ in 0..100 {
        let rho = DensityMatrix::new(random_hermitian(&mut rng), 0.0);
        let (g1, g2) = (rng.gen_range(0.0..3.0), rng.gen_range(0.0..3.0));
        let d = lindblad_rhs(&rho, g1, g2).get(G0G1, G0G1);
        let expected = g2 * (rho.get(G0E0, G0G1) + rho.get(G0G1, G0E0)).re
            - 2.0 * KAPPA * (rho.get(G1G0, G0G1) + rho.get(G0G1, G1G0) + rho.get(G0G1, G0G1)).re;
        err = err.max((d - Complex64::new(expected, 0.0)).norm());
    }
    r.line(
        "5",
        err <= 1e-12,
        format!("d(rho55)/dt against the closed expression, 100 matrices, max {err:.2e} (<= 1e-12)"),
    );
}

fn criterion_6(r: &mut Report) {
    let start = Instant::now();
    let shape = sech_pulse();
    let models: Result<Vec<_>, _> = [Cavity::Left, Cavity::Right]
        .into_iter()
        .map(|c| NoiseModel::new(perturbation(&shape, NoiseKind::Amplitude, c)?, 1.0))
        .collect();
    let report = match models.and_then(|m| noise_sensitivity(&shape, &m, &IntegratorConfig::default())) {
        Ok(rep) => rep,
        Err(e) => return r.error("6", e),
    };
    let elapsed = start.elapsed();
    let (e1, e2) = (report.eta[0].eta_final, report.eta[1].eta_final);
    r.line(
        "6",
        (e1 + 1.0).abs() <= 1e-2 && (e2 + 1.0).abs() <= 1e-2 && (e1 - e2).abs() <= 1e-6 && elapsed < Duration::from_secs(5),
        format!(
            "sech amplitude noise, eta1 = {e1:.8}, eta2 = {e2:.8} (-1 +- 1e-2), |eta1 - eta2| = {:.2e} (<= 1e-6), {:.2} s (< 5 s)",
            (e1 - e2).abs(),
            secs(elapsed)
        ),
    );
}

fn criterion_7(r: &mut Report) {
    let shape = sech_pulse();
    let model = perturbation(&shape, NoiseKind::Timing, Cavity::Right).and_then(|p| NoiseModel::new(p, 1.0));
    let report = match model.and_then(|m| noise_sensitivity(&shape, &[m], &IntegratorConfig::default())) {
        Ok(rep) => rep,
        Err(e) => return r.error("7", e),
    };
    let e = &report.eta[0];
    r.line(
        "7",
        e.eta_final <= 0.0 && e.endpoint_shift < 1e-6,
        format!(
            "sech timing noise, eta = {:.8} (<= 0), shift over final 1/kappa {:.2e} (< 1e-6)",
            e.eta_final, e.endpoint_shift
        ),
    );
}

fn criterion_8(r: &mut Report, sweeps: &[(usize, Vec<OptimizationResult>)]) {
    let sech = match photon_norm(&sech_pulse(), &IntegratorConfig::default()) {
        Ok(v) => v,
        Err(e) => return r.error("8", e),
    };
    let target = 1.0 / KAPPA;
    let worst =
        sweeps.iter().flat_map(|(_, rs)| rs.iter()).map(|res| (res.photon_norm - target).abs()).fold(0.0, f64::max);
    let count: usize = sweeps.iter().map(|(_, rs)| rs.len()).sum();
    r.line(
        "8",
        (sech - target).abs() <= 1e-5 && worst <= 1e-4 && count == 2 * SWEEP_TIMES.len(),
        format!(
            "photon norm, sech off by {:.2e} (<= 1e-5), worst of {count} optimized pulses off by {worst:.2e} (<= 1e-4)",
            (sech - target).abs()
        ),
    );
}

/// Runs one sweep, returning the successful results in `T` order.
fn run_sweep(n: usize) -> (Vec<OptimizationResult>, Vec<String>, Duration) {
    let start = Instant::now();
    let base = OptimizationProblem::new(n, 10.0, NoiseKind::Amplitude);
    let entries = sweep_end_time(&base, &SWEEP_TIMES).expect("nonempty sweep");
    let elapsed = start.elapsed();
    let mut ok = Vec::new();
    let mut errors = Vec::new();
    for e in entries {
        match e.result {
            Ok(res) => ok.push(res),
            Err(err) => errors.push(format!("T={}: {err}", e.end_time)),
        }
    }
    (ok, errors, elapsed)
}

fn criterion_9(r: &mut Report, sweeps: &[(usize, Vec<OptimizationResult>)], errors: &[String], elapsed: Duration) {
    if !errors.is_empty() {
        return r.error("9", errors.join("; "));
    }
    let n3: Vec<f64> = sweeps[0].1.iter().map(|res| res.eta_final).collect();
    let six_at_10 = sweeps[1].1.iter().find(|res| res.end_time == 10.0).map(|res| res.eta_final).unwrap_or(f64::NAN);
    let improving = n3.windows(2).all(|w| w[1] > w[0]);
    let listing: Vec<String> = n3.iter().map(|v| format!("{v:.5}")).collect();
    r.line(
        "9",
        (six_at_10 + 0.58).abs() <= 0.02 && improving && elapsed <= Duration::from_secs(15 * 60),
        format!(
            "six-point T=10 eta = {six_at_10:.5} (-0.58 +- 0.02), three-point sweep [{}] strictly improving: {improving}, sweeps took {:.1} s (<= 900 s)",
            listing.join(", "),
            secs(elapsed)
        ),
    );
}

fn criterion_10(r: &mut Report, sweeps: &[(usize, Vec<OptimizationResult>)]) {
    let mut pass = true;
    let mut parts = Vec::new();
    for (n, results) in sweeps {
        let points: Vec<(f64, f64)> = results.iter().map(|res| (res.end_time, res.eta_final)).collect();
        match fit_hyperbolic(&points) {
            Ok(fit) if points.len() == SWEEP_TIMES.len() => {
                pass &= (fit.a + 0.5).abs() <= 5e-3;
                parts.push(format!("n={n}: a = {:.5}", fit.a));
            }
            Ok(_) => {
                pass = false;
                parts.push(format!("n={n}: only {} points", points.len()));
            }
            Err(e) => {
                pass = false;
                parts.push(format!("n={n}: {e}"));
            }
        }
    }
    r.line("10", pass, format!("hyperbolic fit, {} (-0.5 +- 5e-3)", parts.join(", ")));
}

/// Worst value of each property over one pulse.
#[derive(Default)]
struct Properties {
    trace_drift: f64,
    hermiticity: f64,
    correction_trace: f64,
    block_leak: f64,
    halving_shift: f64,
}

fn block_leak(shape: &PulseShape, rng: &mut ChaCha8Rng) -> f64 {
    let right = [BasisState::G0E0.index(), BasisState::G0G1.index()];
    let left = [BasisState::E0G0.index(), BasisState::G1G0.index()];
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let t = rng.gen_range(-8.0..8.0);
        let base = random_hermitian(rng);
        let mut bumped = base;
        for &i in &right {
            for &j in &right {
                if i <= j {
                    let z =
                        Complex64::new(rng.gen_range(-1.0..1.0), if i == j { 0.0 } else { rng.gen_range(-1.0..1.0) });
                    bumped[(i, j)] += z;
                    if i != j {
                        bumped[(j, i)] += z.conj();
                    }
                }
            }
        }
        let (g1, g2) = (shape.g1(t), shape.g2(t));
        let a = lindblad_rhs(&DensityMatrix::new(base, t), g1, g2);
        let b = lindblad_rhs(&DensityMatrix::new(bumped, t), g1, g2);
        for &i in &left {
            for &j in &left {
                worst = worst.max((a.entries[(i, j)] - b.entries[(i, j)]).norm());
            }
        }
    }
    worst
}

fn properties(shape: &PulseShape, rng: &mut ChaCha8Rng) -> cascade_core::Result<Properties> {
    let cfg = window_for(shape, &IntegratorConfig::default());
    let models = vec![comparison_model(shape, NoiseKind::Amplitude)?, comparison_model(shape, NoiseKind::Timing)?];
    let joint = evolve_with_correction(shape, &models, &cfg)?;
    let mut p = Properties {
        trace_drift: joint.max_trace_drift,
        correction_trace: joint.max_correction_trace,
        ..Properties::default()
    };
    for rho in joint.rho0() {
        p.hermiticity = p.hermiticity.max(rho.hermiticity_defect());
    }
    for m in 0..models.len() {
        for d in joint.delta_rho(m) {
            p.hermiticity = p.hermiticity.max(d.hermiticity_defect());
        }
    }
    p.block_leak = block_leak(shape, rng);

    let coarse = noise_sensitivity(shape, &models, &cfg)?;
    let fine_cfg = cfg.with_tolerances(cfg.rel_tol / 2.0, cfg.abs_tol / 2.0);
    let fine = noise_sensitivity(shape, &models, &fine_cfg)?;
    for (a, b) in coarse.eta.iter().zip(&fine.eta) {
        p.halving_shift = p.halving_shift.max((a.eta_final - b.eta_final).abs());
    }
    Ok(p)
}

fn criterion_11(r: &mut Report, optimized: Option<&OptimizationResult>) {
    let mut corpus: Vec<PulseShape> = vec![sech_pulse()];
    let built = [
        cirac_construct(Arc::new(SechSeed)),
        cirac_construct(Arc::new(ReferenceSeed::default())),
        solve_constraint(&[0.6, 0.3], 4.0)
            .and_then(|g0| SampledPulse::new(4.0, vec![g0, 0.6, 0.3]))
            .and_then(|p| sampled_to_shape(&p)),
    ];
    for b in built {
        match b {
            Ok(s) => corpus.push(s),
            Err(e) => return r.error("11", e),
        }
    }
    if let Some(res) = optimized {
        match res.shape() {
            Ok(s) => corpus.push(s),
            Err(e) => return r.error("11", e),
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst = Properties::default();
    for shape in &corpus {
        match properties(shape, &mut rng) {
            Ok(p) => {
                worst.trace_drift = worst.trace_drift.max(p.trace_drift);
                worst.hermiticity = worst.hermiticity.max(p.hermiticity);
                worst.correction_trace = worst.correction_trace.max(p.correction_trace);
                worst.block_leak = worst.block_leak.max(p.block_leak);
                worst.halving_shift = worst.halving_shift.max(p.halving_shift);
            }
            Err(e) => return r.error("11", format!("{}: {e}", shape.describe())),
        }
    }
    let pass = worst.trace_drift <= 1e-8
        && worst.hermiticity <= 1e-12
        && worst.correction_trace <= 1e-8
        && worst.block_leak == 0.0
        && worst.halving_shift < 1e-8;
    r.line(
        "11",
        pass,
        format!(
            "{} pulses: trace drift {:.1e} (<= 1e-8), hermiticity {:.1e} (<= 1e-12), tr(delta rho) {:.1e} (<= 1e-8), block leak {:.1e} (= 0), tolerance-halving eta shift {:.1e} (< 1e-8)",
            corpus.len(),
            worst.trace_drift,
            worst.hermiticity,
            worst.correction_trace,
            worst.block_leak,
            worst.halving_shift
        ),
    );
}

fn supplements(r: &mut Report, sweeps: &[(usize, Vec<OptimizationResult>)]) {
    let all = || sweeps.iter().flat_map(|(_, rs)| rs.iter());
    let fidelity = all().map(|res| res.fidelity).fold(1.0, f64::min);
    let residual = all().map(|res| res.constraint_residual.abs()).fold(0.0, f64::max);
    r.line(
        "opt-revalidation",
        fidelity >= 1.0 - 1e-6 && residual <= 1e-8,
        format!(
            "optimized pulses, worst fidelity {fidelity:.9} (>= 1 - 1e-6), worst |alpha1(T)| {residual:.1e} (<= 1e-8)"
        ),
    );

    let (three, six) = (&sweeps[0].1, &sweeps[1].1);
    let gap = three.iter().zip(six).map(|(a, b)| a.eta_final - b.eta_final).fold(f64::NEG_INFINITY, f64::max);
    r.line(
        "opt-dominance",
        gap <= 0.02,
        format!("six-point sweep no worse than three-point minus 0.02, worst gap {gap:.4}"),
    );

    let Some(best) = six.iter().find(|res| res.end_time == 10.0) else {
        return r.error("opt-ranking", "six-point T=10 result missing");
    };
    let shapes = match best.shape() {
        Ok(s) => vec![sech_pulse(), s],
        Err(e) => return r.error("opt-ranking", e),
    };
    let rows = compare_pulses(&shapes, &[NoiseKind::Amplitude, NoiseKind::Timing], &IntegratorConfig::default());
    let first_is_optimized = rows.first().is_some_and(|row| row.pulse == shapes[1].describe());
    r.line(
        "opt-ranking",
        first_is_optimized && rows.iter().all(|row| row.eta.iter().all(|(_, v)| v.is_ok())),
        format!("amplitude-noise ranking puts the optimized pulse first: {first_is_optimized}"),
    );
}

fn main() -> ExitCode {
    let mut r = Report { failures: 0 };
    criterion_1(&mut r);
    criterion_2(&mut r);
    criterion_3(&mut r);
    criterion_4(&mut r);
    criterion_5(&mut r);
    criterion_6(&mut r);
    criterion_7(&mut r);

    let (three, mut errors, t3) = run_sweep(3);
    let (six, errors6, t6) = run_sweep(6);
    errors.extend(errors6);
    let sweeps = vec![(3, three), (6, six)];
    criterion_8(&mut r, &sweeps);
    criterion_9(&mut r, &sweeps, &errors, t3 + t6);
    criterion_10(&mut r, &sweeps);
    criterion_11(&mut r, sweeps[1].1.iter().find(|res| res.end_time == 10.0));
    if errors.is_empty() {
        supplements(&mut r, &sweeps);
    }

    if r.failures == 0 {
        println!("acceptance: all criteria passed");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: {} criteria failed", r.failures);
        ExitCode::FAILURE
    }
}
