//! Cascaded master equation and its first-order stochastic-noise correction.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hilbert::{
    coupling_hamiltonian, read_operator_flat, write_operator_flat, BasisState, Cavity, DensityMatrix, Operator,
    FLAT_LEN, KAPPA,
};
use crate::pulses::{PerturbationProfile, PulseShape};

use super::ode::{self, IntegratorConfig, OdeSystem, Span};

const I: Complex64 = Complex64::new(0.0, 1.0);
const HALF: Complex64 = Complex64::new(0.5, 0.0);

// Basis indices.
const VAC: usize = 0;
const E1: usize = 1;
const P1: usize = 2;
const E2: usize = 3;
const P2: usize = 4;

// Real part of the `|g0e0⟩⟨g0e0|` entry in the flat layout.
const ETA_OFFSET: usize = 2 * (5 * E2 + E2);

/// Allowed drift of `tr ρ₀` away from one during integration.
pub const TRACE_DRIFT_LIMIT: f64 = 1e-8;

/// Frobenius norm of `Δρ_j` above which the first-order expansion is
/// considered broken.
pub const CORRECTION_NORM_GUARD: f64 = 1e6;

/// `H ρ` for `H = H₁(g₁) + H₂(g₂)`, using the two-entry sparsity of each node.
fn hamiltonian_left(g1: f64, g2: f64, rho: &Operator) -> Operator {
    let mut out = Operator::zeros();
    for j in 0..5 {
        out[(E1, j)] = -I * g1 * rho[(P1, j)];
        out[(P1, j)] = I * g1 * rho[(E1, j)];
        out[(E2, j)] = -I * g2 * rho[(P2, j)];
        out[(P2, j)] = I * g2 * rho[(E2, j)];
    }
    out
}

/// `ρ H` for `H = H₁(g₁) + H₂(g₂)`.
fn hamiltonian_right(g1: f64, g2: f64, rho: &Operator) -> Operator {
    let mut out = Operator::zeros();
    for i in 0..5 {
        out[(i, P1)] = -I * g1 * rho[(i, E1)];
        out[(i, E1)] = I * g1 * rho[(i, P1)];
        out[(i, P2)] = -I * g2 * rho[(i, E2)];
        out[(i, E2)] = I * g2 * rho[(i, P2)];
    }
    out
}

/// `[H₁(g₁) + H₂(g₂), ρ]`.
fn coupling_commutator(g1: f64, g2: f64, rho: &Operator) -> Operator {
    hamiltonian_left(g1, g2, rho) - hamiltonian_right(g1, g2, rho)
}

/// The cascaded dissipator `𝓛{ρ}` (without the κ prefactor).
pub fn dissipator(rho: &Operator) -> Operator {
    let mut out = Operator::zeros();
    // a_j ρ a_j† feeds the vacuum population
    out[(VAC, VAC)] += 2.0 * (rho[(P1, P1)] + rho[(P2, P2)]);
    // −a_j†a_j ρ − ρ a_j†a_j damps rows/columns of the photon states
    for k in 0..5 {
        out[(P1, k)] -= rho[(P1, k)];
        out[(k, P1)] -= rho[(k, P1)];
        out[(P2, k)] -= rho[(P2, k)];
        out[(k, P2)] -= rho[(k, P2)];
    }
    // −2([a₂†, a₁ρ] + [ρa₁†, a₂]): left photon feeds the right cavity
    for k in 0..5 {
        out[(P2, k)] -= 2.0 * rho[(P1, k)];
        out[(k, P2)] -= 2.0 * rho[(k, P1)];
    }
    out[(VAC, VAC)] += 2.0 * (rho[(P1, P2)] + rho[(P2, P1)]);
    out
}

/// Right-hand side of the cascaded master equation,
/// `−i[H₁ + H₂, ρ] + κ𝓛{ρ}`. Only the upper triangle is computed; the lower
/// triangle is its conjugate mirror, so Hermitian input gives exactly
/// Hermitian output.
pub fn lindblad_rhs(rho: &DensityMatrix, g1: f64, g2: f64) -> DensityMatrix {
    DensityMatrix::new(lindblad_operator(&rho.entries, g1, g2), rho.time)
}

pub(crate) fn lindblad_operator(rho: &Operator, g1: f64, g2: f64) -> Operator {
    let mut out = coupling_commutator(g1, g2, rho) * (-I) + dissipator(rho) * Complex64::from(KAPPA);
    hermitize(&mut out);
    out
}

fn hermitize(m: &mut Operator) {
    for i in 0..5 {
        m[(i, i)].im = 0.0;
        for j in (i + 1)..5 {
            m[(j, i)] = m[(i, j)].conj();
        }
    }
}

/// First-order Hamiltonian response `h_j(t)` to the pulse perturbation.
pub fn noise_hamiltonian(profile: &PerturbationProfile, t: f64) -> Operator {
    coupling_hamiltonian(profile.target(), profile.delta_g(t))
}

/// `[h, [h, ρ]]` for `h = coupling_hamiltonian(cavity, dg)`.
pub(crate) fn double_commutator(cavity: Cavity, dg: f64, rho: &Operator) -> Operator {
    let (g1, g2) = match cavity {
        Cavity::Left => (dg, 0.0),
        Cavity::Right => (0.0, dg),
    };
    let inner = coupling_commutator(g1, g2, rho);
    coupling_commutator(g1, g2, &inner)
}

/// A white-noise source on one pulse, `⟨ξ_j(t)ξ_j(t′)⟩ = ε_j δ(t − t′)`.
#[derive(Debug, Clone)]
pub struct NoiseModel {
    pub profile: PerturbationProfile,
    /// Variance scale `ε_j` (units of time).
    pub epsilon: f64,
}

impl NoiseModel {
    pub fn new(profile: PerturbationProfile, epsilon: f64) -> Result<Self> {
        if !(epsilon >= 0.0) || !epsilon.is_finite() {
            return Err(Error::Contract(format!("noise variance must be finite and >= 0, got {epsilon}")));
        }
        Ok(Self { profile, epsilon })
    }
}

/// Density-matrix trajectory from [`evolve_master`].
#[derive(Debug, Clone)]
pub struct MasterTrajectory {
    solution: ode::Solution,
    pub max_trace_drift: f64,
}

impl MasterTrajectory {
    pub fn times(&self) -> &[f64] {
        self.solution.times()
    }

    pub fn states(&self) -> impl Iterator<Item = DensityMatrix> + '_ {
        self.solution.iter().map(|(t, y)| DensityMatrix::from_flat(y, t))
    }

    pub fn at(&self, t: f64) -> Option<DensityMatrix> {
        let y = self.solution.eval(t)?;
        Some(DensityMatrix::from_flat(&y, t))
    }

    pub fn last(&self) -> DensityMatrix {
        DensityMatrix::from_flat(self.solution.last_state(), self.solution.last_time())
    }

    /// Population of `|g0e0⟩` at the end of the window.
    pub fn fidelity(&self) -> f64 {
        self.last().population(BasisState::G0E0)
    }
}

struct MasterSystem<'a> {
    shape: &'a PulseShape,
}

impl OdeSystem for MasterSystem<'_> {
    fn dim(&self) -> usize {
        FLAT_LEN
    }

    fn rhs(&self, t: f64, y: &[f64], dy: &mut [f64]) {
        let rho = read_operator_flat(y);
        let d = lindblad_operator(&rho, self.shape.g1(t), self.shape.g2(t));
        write_operator_flat(&d, dy);
    }
}

fn initial_density(t: f64) -> DensityMatrix {
    DensityMatrix::projector(BasisState::E0G0, t)
}

/// Integrates the master equation from `|e0g0⟩⟨e0g0|` over the window of `cfg`.
pub fn evolve_master(shape: &PulseShape, cfg: &IntegratorConfig) -> Result<MasterTrajectory> {
    cfg.validate()?;
    let mut y0 = [0.0; FLAT_LEN];
    initial_density(cfg.t_start).write_flat(&mut y0);
    let sys = MasterSystem { shape };
    let solution = ode::integrate(&sys, &y0, Span::from(cfg), &shape.breakpoints())?;
    let mut max_trace_drift = 0.0f64;
    for (t, y) in solution.iter() {
        let drift = (trace_of_flat(y) - 1.0).abs();
        max_trace_drift = max_trace_drift.max(drift);
        if drift > TRACE_DRIFT_LIMIT {
            return Err(Error::IntegrationFailure { t, reason: format!("trace drifted by {drift:e}") });
        }
    }
    Ok(MasterTrajectory { solution, max_trace_drift })
}

fn trace_of_flat(y: &[f64]) -> f64 {
    (0..5).map(|i| y[2 * (5 * i + i)]).sum()
}

/// `ρ₀` together with one first-order correction `Δρ_j` per noise model.
#[derive(Debug, Clone)]
pub struct JointSolution {
    solution: ode::Solution,
    models: usize,
    final_eta_rate: Vec<f64>,
    pub max_trace_drift: f64,
    pub max_correction_trace: f64,
}

impl JointSolution {
    pub fn times(&self) -> &[f64] {
        self.solution.times()
    }

    pub fn model_count(&self) -> usize {
        self.models
    }

    pub fn rho0(&self) -> impl Iterator<Item = DensityMatrix> + '_ {
        self.solution.iter().map(|(t, y)| DensityMatrix::from_flat(&y[..FLAT_LEN], t))
    }

    pub fn delta_rho(&self, model: usize) -> impl Iterator<Item = DensityMatrix> + '_ {
        assert!(model < self.models, "model index out of range");
        let off = FLAT_LEN * (model + 1);
        self.solution.iter().map(move |(t, y)| DensityMatrix::from_flat(&y[off..off + FLAT_LEN], t))
    }

    /// `(ρ₀(t), [Δρ_j(t)])` from the continuous extension.
    pub fn at(&self, t: f64) -> Option<(DensityMatrix, Vec<DensityMatrix>)> {
        let y = self.solution.eval(t)?;
        Some(split_state(&y, self.models, t))
    }

    pub fn last(&self) -> (DensityMatrix, Vec<DensityMatrix>) {
        split_state(self.solution.last_state(), self.models, self.solution.last_time())
    }

    /// `⟨g0e0|Δρ_j(t)|g0e0⟩` at every stored time.
    pub fn eta_trace(&self, model: usize) -> Vec<f64> {
        let k = FLAT_LEN * (model + 1) + ETA_OFFSET;
        self.solution.iter().map(|(_, y)| y[k]).collect()
    }

    pub fn has_dense_output(&self) -> bool {
        self.solution.has_dense_output()
    }

    /// `dη_j/dt` at the end of the window, from the right-hand side.
    pub fn final_eta_rate(&self) -> &[f64] {
        &self.final_eta_rate
    }
}

fn split_state(y: &[f64], models: usize, t: f64) -> (DensityMatrix, Vec<DensityMatrix>) {
    let rho0 = DensityMatrix::from_flat(&y[..FLAT_LEN], t);
    let deltas = (0..models)
        .map(|m| {
            let off = FLAT_LEN * (m + 1);
            DensityMatrix::from_flat(&y[off..off + FLAT_LEN], t)
        })
        .collect();
    (rho0, deltas)
}

struct JointSystem<'a> {
    shape: &'a PulseShape,
    models: &'a [NoiseModel],
}

impl OdeSystem for JointSystem<'_> {
    fn dim(&self) -> usize {
        FLAT_LEN * (1 + self.models.len())
    }

    fn rhs(&self, t: f64, y: &[f64], dy: &mut [f64]) {
        let (g1, g2) = (self.shape.g1(t), self.shape.g2(t));
        let rho0 = read_operator_flat(&y[..FLAT_LEN]);
        write_operator_flat(&lindblad_operator(&rho0, g1, g2), &mut dy[..FLAT_LEN]);
        for (m, model) in self.models.iter().enumerate() {
            let off = FLAT_LEN * (m + 1);
            let delta = read_operator_flat(&y[off..off + FLAT_LEN]);
            let mut d = lindblad_operator(&delta, g1, g2);
            let dg = model.profile.delta_g(t);
            if dg != 0.0 {
                let mut source = double_commutator(model.profile.target(), dg, &rho0) * HALF;
                hermitize(&mut source);
                d -= source;
            }
            write_operator_flat(&d, &mut dy[off..off + FLAT_LEN]);
        }
    }
}

/// Co-integrates `ρ₀` and the corrections
/// `Δρ̇_j = −i[H, Δρ_j] + κ𝓛{Δρ_j} − ½[h_j, [h_j, ρ₀]]` with `Δρ_j(t_start) = 0`.
pub fn evolve_with_correction(
    shape: &PulseShape,
    models: &[NoiseModel],
    cfg: &IntegratorConfig,
) -> Result<JointSolution> {
    cfg.validate()?;
    let dim = FLAT_LEN * (1 + models.len());
    let mut y0 = vec![0.0; dim];
    initial_density(cfg.t_start).write_flat(&mut y0[..FLAT_LEN]);
    let sys = JointSystem { shape, models };
    let solution = ode::integrate(&sys, &y0, Span::from(cfg), &shape.breakpoints())?;

    let mut max_trace_drift = 0.0f64;
    let mut max_correction_trace = 0.0f64;
    for (t, y) in solution.iter() {
        let drift = (trace_of_flat(&y[..FLAT_LEN]) - 1.0).abs();
        max_trace_drift = max_trace_drift.max(drift);
        if drift > TRACE_DRIFT_LIMIT {
            return Err(Error::IntegrationFailure { t, reason: format!("trace drifted by {drift:e}") });
        }
        for m in 0..models.len() {
            let block = &y[FLAT_LEN * (m + 1)..FLAT_LEN * (m + 2)];
            max_correction_trace = max_correction_trace.max(trace_of_flat(block).abs());
            let norm = block.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm > CORRECTION_NORM_GUARD {
                return Err(Error::PerturbativeOverflow { t, norm });
            }
        }
    }
    let mut rate = vec![0.0; dim];
    sys.rhs(solution.last_time(), solution.last_state(), &mut rate);
    let final_eta_rate = (0..models.len()).map(|m| rate[FLAT_LEN * (m + 1) + ETA_OFFSET]).collect();
    Ok(JointSolution { solution, models: models.len(), final_eta_rate, max_trace_drift, max_correction_trace })
}

/// Frobenius norm of the correction source `½[h_j,[h_j,ρ]]`.
pub fn correction_source_norm(profile: &PerturbationProfile, t: f64, rho: &DensityMatrix) -> f64 {
    let dg = profile.delta_g(t);
    (double_commutator(profile.target(), dg, &rho.entries) * HALF).iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Serializable summary of a master-equation run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MasterSummary {
    pub fidelity: f64,
    pub max_trace_drift: f64,
    pub steps: usize,
}

impl From<&MasterTrajectory> for MasterSummary {
    fn from(m: &MasterTrajectory) -> Self {
        Self { fidelity: m.fidelity(), max_trace_drift: m.max_trace_drift, steps: m.times().len() - 1 }
    }
}
