//! Noise sensitivities `η_j` and pulse comparison.

use serde::{Deserialize, Serialize};

use crate::dynamics::{evolve_with_correction, integrate_trajectory, IntegratorConfig, NoiseModel};
use crate::error::{Error, Result};
use crate::hilbert::{BasisState, Cavity};
use crate::pulses::{perturbation, NoiseKind, PerturbationKind, PulseShape};

/// Minimum `ρ₄₄(t_end)` for a pulse to count as a transfer pulse.
pub const FIDELITY_GATE: f64 = 1.0 - 1e-4;

/// Maximum `|dη/dt|` at the end of the window.
pub const STATIONARITY_LIMIT: f64 = 1e-8;

/// Maximum `|η(t_end) − η(t_end − 1/κ)|`.
pub const ENDPOINT_SHIFT_LIMIT: f64 = 1e-6;

/// Integration window wide enough for the pulse tails, keeping the
/// tolerances of `base`. A window in `base` that is already wider is kept.
pub fn window_for(shape: &PulseShape, base: &IntegratorConfig) -> IntegratorConfig {
    let half = shape.recommended_half_window();
    let start = base.t_start.min(-half);
    let end = base.t_end.max(half);
    base.with_window(start, end)
}

/// `η_j(t)` for one noise model.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EtaSeries {
    pub label: String,
    pub target: u8,
    pub epsilon: f64,
    pub values: Vec<f64>,
    pub eta_final: f64,
    /// `dη/dt` at `t_end`.
    pub endpoint_slope: f64,
    /// `|η(t_end) − η(t_end − 1)|`.
    pub endpoint_shift: f64,
}

impl EtaSeries {
    /// First-order transfer probability `1 + ε η(+∞)`.
    pub fn success_probability(&self) -> f64 {
        1.0 + self.epsilon * self.eta_final
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SensitivityReport {
    pub pulse: String,
    pub times: Vec<f64>,
    pub eta: Vec<EtaSeries>,
    /// `ρ₄₄(t_end)` of the noiseless evolution.
    pub fidelity: f64,
    pub max_zero_jump_residual: f64,
    pub max_trace_drift: f64,
    pub max_correction_trace: f64,
}

impl SensitivityReport {
    pub fn eta_final(&self) -> Vec<f64> {
        self.eta.iter().map(|e| e.eta_final).collect()
    }
}

fn model_label(model: &NoiseModel) -> String {
    let kind = match model.profile.kind() {
        PerturbationKind::Amplitude => "amplitude",
        PerturbationKind::Timing => "timing",
        PerturbationKind::Null => "null",
    };
    format!("{kind}{}", model.profile.target().number())
}

/// Runs the corrected evolution and extracts `η_j(t) = ⟨g0e0|Δρ_j(t)|g0e0⟩`.
pub fn noise_sensitivity(
    shape: &PulseShape,
    models: &[NoiseModel],
    cfg: &IntegratorConfig,
) -> Result<SensitivityReport> {
    let joint = evolve_with_correction(shape, models, cfg)?;
    let (rho_end, _) = joint.last();
    let fidelity = rho_end.population(BasisState::G0E0);
    if !(fidelity >= FIDELITY_GATE) {
        return Err(Error::NotTransferPulse { fidelity, threshold: FIDELITY_GATE });
    }
    let t_end = cfg.t_end;
    let probe = t_end - 1.0;
    let shifts: Vec<f64> = match joint.at(probe) {
        Some((_, deltas)) => deltas
            .iter()
            .zip(joint.last().1.iter())
            .map(|(a, b)| (b.population(BasisState::G0E0) - a.population(BasisState::G0E0)).abs())
            .collect(),
        None => vec![f64::NAN; models.len()],
    };

    let mut eta = Vec::with_capacity(models.len());
    for (m, model) in models.iter().enumerate() {
        let values = joint.eta_trace(m);
        let eta_final = *values.last().expect("solution has at least one point");
        let slope = joint.final_eta_rate()[m];
        let label = model_label(model);
        if !(slope.abs() < STATIONARITY_LIMIT) {
            return Err(Error::WindowTooShort { model: label, measure: "|d(eta)/dt|", delta: slope.abs() });
        }
        if !(shifts[m] < ENDPOINT_SHIFT_LIMIT) {
            return Err(Error::WindowTooShort {
                model: label,
                measure: "eta change over the last 1/kappa",
                delta: shifts[m],
            });
        }
        eta.push(EtaSeries {
            label,
            target: model.profile.target().number(),
            epsilon: model.epsilon,
            values,
            eta_final,
            endpoint_slope: slope,
            endpoint_shift: shifts[m],
        });
    }

    let trajectory = integrate_trajectory(shape, cfg)?;
    Ok(SensitivityReport {
        pulse: shape.describe(),
        times: joint.times().to_vec(),
        eta,
        fidelity,
        max_zero_jump_residual: trajectory.max_residual(),
        max_trace_drift: joint.max_trace_drift,
        max_correction_trace: joint.max_correction_trace,
    })
}

/// Noise model used for a comparison column: amplitude noise on the emitting
/// pulse, timing noise on the receiving pulse.
pub fn comparison_model(shape: &PulseShape, kind: NoiseKind) -> Result<NoiseModel> {
    let target = match kind {
        NoiseKind::Amplitude => Cavity::Left,
        NoiseKind::Timing => Cavity::Right,
    };
    NoiseModel::new(perturbation(shape, kind, target)?, 1.0)
}

/// One pulse of a comparison table; each noise kind succeeds or fails on
/// its own.
#[derive(Debug)]
pub struct ComparisonRow {
    pub pulse: String,
    pub eta: Vec<(NoiseKind, Result<f64>)>,
}

impl ComparisonRow {
    fn key(&self) -> f64 {
        match self.eta.first() {
            Some((_, Ok(v))) => *v,
            _ => f64::NEG_INFINITY,
        }
    }
}

/// `η(+∞)` of each shape under each noise kind, rows sorted by the first kind,
/// closest to zero first. Failed rows sort last.
pub fn compare_pulses(shapes: &[PulseShape], kinds: &[NoiseKind], cfg: &IntegratorConfig) -> Vec<ComparisonRow> {
    let mut rows: Vec<ComparisonRow> = shapes
        .iter()
        .map(|shape| {
            let window = window_for(shape, cfg);
            let eta = kinds
                .iter()
                .map(|&kind| {
                    let value = comparison_model(shape, kind)
                        .and_then(|model| noise_sensitivity(shape, std::slice::from_ref(&model), &window))
                        .map(|report| report.eta[0].eta_final);
                    (kind, value)
                })
                .collect();
            ComparisonRow { pulse: shape.describe(), eta }
        })
        .collect();
    rows.sort_by(|a, b| b.key().total_cmp(&a.key()));
    rows
}
