use std::fs::File;
use std::io::BufReader;
use std::path::Path;
use std::sync::Arc;

use cascade_core::dynamics::{evolve_master, integrate_trajectory, photon_norm, IntegratorConfig, NoiseModel};
use cascade_core::hilbert::{BasisState, Cavity};
use cascade_core::io::{
    eta_table, master_table, pulse_table, read_pulse_table, read_sweep_points, sample_grid, sweep_table,
    trajectory_table, Table,
};
use cascade_core::optimizer::{fit_hyperbolic, optimize, sweep_end_time, OptimizationProblem, SimplexOptions};
use cascade_core::pulses::{
    cirac_construct, perturbation, sampled_to_shape, sech_pulse, sech_reference_state, zero_pulse, NoiseKind,
    PulseShape, ReferenceSeed,
};
use cascade_core::sensitivity::{noise_sensitivity, window_for};
use serde::Serialize;
use serde_json::json;

use crate::config::{PulseChoice, RunConfig};
use crate::output::Output;
use crate::CliError;

fn read_table(path: &Path) -> Result<Table, CliError> {
    let file = File::open(path).map_err(|e| CliError::Io(format!("cannot read {}: {e}", path.display())))?;
    Ok(Table::read(BufReader::new(file))?)
}

pub fn build_pulse(cfg: &RunConfig) -> Result<PulseShape, CliError> {
    Ok(match cfg.pulse {
        PulseChoice::Sech => sech_pulse(),
        PulseChoice::Zero => zero_pulse(),
        PulseChoice::Reference => cirac_construct(Arc::new(ReferenceSeed::default()))?,
        PulseChoice::Sampled => {
            let path = cfg.pulse_table.as_ref().expect("validated config has a pulse table");
            sampled_to_shape(&read_pulse_table(&read_table(path)?)?)?
        }
    })
}

fn window(cfg: &RunConfig, shape: &PulseShape) -> IntegratorConfig {
    window_for(shape, &cfg.integrator())
}

#[derive(Serialize)]
struct SimulationSummary {
    pulse: String,
    t_start: f64,
    t_end: f64,
    fidelity: f64,
    max_trace_drift: f64,
    max_norm_drift: f64,
    max_zero_jump_residual: f64,
    photon_norm: f64,
    trajectory_points: usize,
    master_points: usize,
}

pub fn simulate(cfg: &RunConfig, out: &Output) -> Result<(), CliError> {
    let shape = build_pulse(cfg)?;
    let integ = window(cfg, &shape);
    let traj = integrate_trajectory(&shape, &integ)?;
    let master = evolve_master(&shape, &integ)?;
    let norm = photon_norm(&shape, &integ)?;
    let grid =
        if cfg.sample_step > 0.0 { Some(sample_grid(integ.t_start, integ.t_end, cfg.sample_step)?) } else { None };
    out.table("trajectory.csv", &trajectory_table(&traj, &shape, grid.as_deref()))?;
    out.table("master.csv", &master_table(&master, grid.as_deref()))?;
    let summary = SimulationSummary {
        pulse: shape.describe(),
        t_start: integ.t_start,
        t_end: integ.t_end,
        fidelity: master.fidelity(),
        max_trace_drift: master.max_trace_drift,
        max_norm_drift: traj.max_norm_drift,
        max_zero_jump_residual: traj.max_residual(),
        photon_norm: norm,
        trajectory_points: traj.len(),
        master_points: master.times().len(),
    };
    out.json("simulate.json", &summary)?;
    println!("fidelity {:.12}  photon norm {:.9}", summary.fidelity, summary.photon_norm);
    Ok(())
}

pub fn sensitivity(cfg: &RunConfig, out: &Output) -> Result<(), CliError> {
    let shape = build_pulse(cfg)?;
    let integ = window(cfg, &shape);
    let models = cfg
        .noise
        .iter()
        .map(|spec| NoiseModel::new(perturbation(&shape, spec.kind, spec.target)?, cfg.epsilon))
        .collect::<Result<Vec<_>, _>>()?;
    let report = noise_sensitivity(&shape, &models, &integ)?;
    for series in &report.eta {
        let mut table = Table::new(["t", "eta"]);
        for (t, v) in report.times.iter().zip(&series.values) {
            table.push(vec![*t, *v]);
        }
        out.table(&format!("eta_{}.csv", series.label), &table)?;
    }
    if report.eta.len() > 1 {
        out.table("eta.csv", &eta_table(&report))?;
    }
    let models: Vec<_> = report
        .eta
        .iter()
        .map(|e| {
            json!({
                "model": e.label,
                "epsilon": e.epsilon,
                "eta_final": e.eta_final,
                "success_probability": e.success_probability(),
                "endpoint_slope": e.endpoint_slope,
                "endpoint_shift": e.endpoint_shift,
            })
        })
        .collect();
    let summary = json!({
        "pulse": report.pulse,
        "t_start": integ.t_start,
        "t_end": integ.t_end,
        "fidelity": report.fidelity,
        "models": models,
        "max_zero_jump_residual": report.max_zero_jump_residual,
        "max_trace_drift": report.max_trace_drift,
        "max_correction_trace": report.max_correction_trace,
    });
    out.json("sensitivity.json", &summary)?;
    for e in &report.eta {
        println!("eta_{} = {:.10}", e.label, e.eta_final);
    }
    Ok(())
}

fn problem(cfg: &RunConfig, end_time: f64) -> OptimizationProblem {
    OptimizationProblem {
        n: cfg.n,
        end_time,
        noise: cfg.objective,
        g_max: cfg.g_max,
        simplex: SimplexOptions { x_tol: cfg.x_tol, f_tol: cfg.f_tol, max_evaluations: cfg.max_evaluations },
        initial_spread: cfg.initial_spread,
        seed: cfg.seed,
        integrator: IntegratorConfig::default().with_tolerances(cfg.rel_tol, cfg.abs_tol),
    }
}

pub fn optimize_cmd(cfg: &RunConfig, out: &Output) -> Result<(), CliError> {
    let result = optimize(&problem(cfg, cfg.end_time))?;
    out.json("optimize.json", &result)?;
    out.table("pulse.csv", &pulse_table(&result.pulse()))?;
    println!(
        "n={} T={} eta_final = {:.10} (converged: {})",
        result.n, result.end_time, result.eta_final, result.converged
    );
    Ok(())
}

fn t_label(t: f64) -> String {
    format!("{t}")
}

pub fn sweep(cfg: &RunConfig, out: &Output) -> Result<(), CliError> {
    let entries = sweep_end_time(&problem(cfg, cfg.end_time), &cfg.end_times)?;
    let mut status = Vec::new();
    for e in &entries {
        match &e.result {
            Ok(r) => {
                out.json(&format!("optimize_T{}.json", t_label(e.end_time)), r)?;
                out.table(&format!("pulse_T{}.csv", t_label(e.end_time)), &pulse_table(&r.pulse()))?;
                println!("T={} eta_final = {:.10}", e.end_time, r.eta_final);
                status.push(json!({ "T": e.end_time, "status": "ok", "eta_final": r.eta_final }));
            }
            Err(err) => {
                eprintln!("T={} failed: {err}", e.end_time);
                status.push(
                    json!({ "T": e.end_time, "status": "error", "error": err.tag(), "message": err.to_string() }),
                );
            }
        }
    }
    out.table("sweep.csv", &sweep_table(&entries))?;
    out.json("sweep.json", &json!({ "n": cfg.n, "objective": cfg.objective.to_string(), "entries": status }))?;
    // surface the first failure after the partial results are on disk
    if let Some(pos) = entries.iter().position(|e| e.result.is_err()) {
        let mut entries = entries;
        let err = entries.swap_remove(pos).result.unwrap_err();
        return Err(err.into());
    }
    Ok(())
}

pub fn fit(cfg: &RunConfig, out: &Output) -> Result<(), CliError> {
    let path = cfg.sweep_table.clone().unwrap_or_else(|| out.dir.join("sweep.csv"));
    let points = read_sweep_points(&read_table(&path)?)?;
    let result = fit_hyperbolic(&points)?;
    out.json("fit.json", &json!({ "points": points, "fit": result }))?;
    println!("a = {:.6}  b = {:.6}  c = {:.6}  residual = {:.3e}", result.a, result.b, result.c, result.residual);
    Ok(())
}

/// Fast end-to-end checks of the numerical core.
pub fn selftest(out: &Output) -> Result<(), CliError> {
    let shape = sech_pulse();
    let cfg = IntegratorConfig::default();
    let mut checks: Vec<(&str, f64, f64)> = Vec::new();

    let traj = integrate_trajectory(&shape, &cfg.symmetric(20.0))?;
    let mut err = 0.0f64;
    for k in 0..=20 {
        let t = -10.0 + k as f64;
        let s = traj.at(t).expect("inside window");
        let r = sech_reference_state(t);
        err = err.max((s.alpha1 - r.alpha1).abs()).max((s.alpha2 - r.alpha2).abs()).max((s.beta_a - r.beta_a).abs());
    }
    checks.push(("sech trajectory vs closed form", err, 1e-7));

    let master = evolve_master(&shape, &cfg)?;
    checks.push(("sech transfer infidelity", 1.0 - master.last().population(BasisState::G0E0), 1e-6));

    let model = NoiseModel::new(perturbation(&shape, NoiseKind::Amplitude, Cavity::Left)?, 1.0)?;
    let report = noise_sensitivity(&shape, &[model], &cfg)?;
    checks.push(("sech amplitude eta + 1", (report.eta[0].eta_final + 1.0).abs(), 1e-2));

    let rebuilt = cirac_construct(Arc::new(cascade_core::pulses::SechSeed))?;
    let fp = (1..=100).map(|k| -0.1 * k as f64).map(|t| (rebuilt.g1(t) - shape.g1(t)).abs()).fold(0.0, f64::max);
    checks.push(("construction fixed point", fp, 1e-6));

    let mut ok = true;
    let mut rows = Vec::new();
    for (name, value, tol) in &checks {
        let pass = *value <= *tol;
        ok &= pass;
        println!("{} {name}: {value:.3e} (tolerance {tol:.0e})", if pass { "PASS" } else { "FAIL" });
        rows.push(json!({ "check": name, "value": value, "tolerance": tol, "pass": pass }));
    }
    out.json("selftest.json", &rows)?;
    if ok {
        Ok(())
    } else {
        Err(CliError::SelfTest)
    }
}
