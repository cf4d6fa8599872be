//! Truncated single-excitation Hilbert space of the two atom–cavity nodes.
//!
//! Kets are labelled `|atom₁ photon₁ atom₂ photon₂⟩` and ordered as
//! `{g0g0, e0g0, g1g0, g0e0, g0g1}`. Only one excitation is ever present, so
//! every operator is a 5×5 complex matrix and images of double excitations are
//! truncated to zero.

use std::fmt;
use std::sync::Arc;

use nalgebra::{Matrix5, Vector5};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Cavity decay rate. Every time and coupling in the crate is measured in
/// units of this rate.
pub const KAPPA: f64 = 1.0;

/// Allowed deviation of a pure state's squared norm from one.
pub const NORM_TOLERANCE: f64 = 1e-6;

pub type Operator = Matrix5<Complex64>;
pub type Ket = Vector5<Complex64>;

const ONE: Complex64 = Complex64::new(1.0, 0.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BasisState {
    G0G0,
    E0G0,
    G1G0,
    G0E0,
    G0G1,
}

impl BasisState {
    pub const ALL: [BasisState; 5] =
        [BasisState::G0G0, BasisState::E0G0, BasisState::G1G0, BasisState::G0E0, BasisState::G0G1];

    /// Zero-based row/column index.
    pub fn index(self) -> usize {
        match self {
            BasisState::G0G0 => 0,
            BasisState::E0G0 => 1,
            BasisState::G1G0 => 2,
            BasisState::G0E0 => 3,
            BasisState::G0G1 => 4,
        }
    }

    /// One-based position, as used when quoting matrix elements `ρᵢⱼ`.
    pub fn position(self) -> usize {
        self.index() + 1
    }

    pub fn from_index(index: usize) -> Option<Self> {
        Self::ALL.get(index).copied()
    }

    pub fn label(self) -> &'static str {
        match self {
            BasisState::G0G0 => "g0g0",
            BasisState::E0G0 => "e0g0",
            BasisState::G1G0 => "g1g0",
            BasisState::G0E0 => "g0e0",
            BasisState::G0G1 => "g0g1",
        }
    }
}

impl fmt::Display for BasisState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "|{}⟩", self.label())
    }
}

/// One of the two atom–cavity nodes. The left node emits, the right absorbs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Cavity {
    Left,
    Right,
}

impl Cavity {
    /// Accepts the conventional labels `1` and `2`.
    pub fn from_number(n: u8) -> Result<Self> {
        match n {
            1 => Ok(Cavity::Left),
            2 => Ok(Cavity::Right),
            other => Err(Error::Contract(format!("cavity index must be 1 or 2, got {other}"))),
        }
    }

    pub fn number(self) -> u8 {
        match self {
            Cavity::Left => 1,
            Cavity::Right => 2,
        }
    }

    /// `(excited atom, one photon)` basis pair coupled by this node's pulse.
    pub(crate) fn coupled_pair(self) -> (usize, usize) {
        match self {
            Cavity::Left => (BasisState::E0G0.index(), BasisState::G1G0.index()),
            Cavity::Right => (BasisState::G0E0.index(), BasisState::G0G1.index()),
        }
    }
}

/// Real amplitudes of the open-system state vector in the zero-jump frame.
///
/// `beta_s` and `beta_a` are the symmetric and antisymmetric combinations of
/// the two single-photon amplitudes; the cavity amplitudes are recovered as
/// `β₁ = (β_s − β_a)/√2` and `β₂ = (β_s + β_a)/√2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PureState {
    pub alpha1: f64,
    pub alpha2: f64,
    pub beta_s: f64,
    pub beta_a: f64,
    pub time: f64,
}

impl PureState {
    pub fn new(alpha1: f64, alpha2: f64, beta_s: f64, beta_a: f64, time: f64) -> Self {
        Self { alpha1, alpha2, beta_s, beta_a, time }
    }

    /// Excitation in the left atom, nothing else.
    pub fn initial(time: f64) -> Self {
        Self::new(1.0, 0.0, 0.0, 0.0, time)
    }

    pub fn norm_sq(&self) -> f64 {
        self.alpha1 * self.alpha1 + self.alpha2 * self.alpha2 + self.beta_s * self.beta_s + self.beta_a * self.beta_a
    }

    /// Photon amplitude in the left cavity.
    pub fn beta_left(&self) -> f64 {
        (self.beta_s - self.beta_a) / std::f64::consts::SQRT_2
    }

    /// Photon amplitude in the right cavity.
    pub fn beta_right(&self) -> f64 {
        (self.beta_s + self.beta_a) / std::f64::consts::SQRT_2
    }

    pub fn to_ket(&self) -> Ket {
        let mut ket = Ket::zeros();
        ket[BasisState::E0G0.index()] = Complex64::new(self.alpha1, 0.0);
        ket[BasisState::G1G0.index()] = Complex64::new(self.beta_left(), 0.0);
        ket[BasisState::G0E0.index()] = Complex64::new(self.alpha2, 0.0);
        ket[BasisState::G0G1.index()] = Complex64::new(self.beta_right(), 0.0);
        ket
    }
}

/// 5×5 density matrix (or first-order correction to one) at a given time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DensityMatrix {
    pub entries: Operator,
    pub time: f64,
}

impl DensityMatrix {
    pub fn new(entries: Operator, time: f64) -> Self {
        Self { entries, time }
    }

    pub fn zeros(time: f64) -> Self {
        Self::new(Operator::zeros(), time)
    }

    /// `|b⟩⟨b|` for a basis ket.
    pub fn projector(state: BasisState, time: f64) -> Self {
        let mut m = Operator::zeros();
        m[(state.index(), state.index())] = ONE;
        Self::new(m, time)
    }

    pub fn get(&self, row: BasisState, col: BasisState) -> Complex64 {
        self.entries[(row.index(), col.index())]
    }

    /// Real population of a basis state.
    pub fn population(&self, state: BasisState) -> f64 {
        self.get(state, state).re
    }

    pub fn trace(&self) -> Complex64 {
        self.entries.trace()
    }

    /// `tr(ρ²)`.
    pub fn purity(&self) -> f64 {
        (self.entries * self.entries).trace().re
    }

    /// Largest `|ρᵢⱼ − conj(ρⱼᵢ)|`.
    pub fn hermiticity_defect(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..5 {
            for j in 0..5 {
                worst = worst.max((self.entries[(i, j)] - self.entries[(j, i)].conj()).norm());
            }
        }
        worst
    }

    /// Largest entrywise modulus of `self − other`.
    pub fn max_abs_diff(&self, other: &DensityMatrix) -> f64 {
        (self.entries - other.entries).iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.entries.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Row-major interleaved `(re, im)` layout used by the integrator state.
    pub fn write_flat(&self, out: &mut [f64]) {
        write_operator_flat(&self.entries, out);
    }

    pub fn from_flat(flat: &[f64], time: f64) -> Self {
        Self::new(read_operator_flat(flat), time)
    }
}

pub(crate) fn write_operator_flat(m: &Operator, out: &mut [f64]) {
    for i in 0..5 {
        for j in 0..5 {
            let z = m[(i, j)];
            let k = 2 * (5 * i + j);
            out[k] = z.re;
            out[k + 1] = z.im;
        }
    }
}

pub(crate) fn read_operator_flat(flat: &[f64]) -> Operator {
    Operator::from_fn(|i, j| {
        let k = 2 * (5 * i + j);
        Complex64::new(flat[k], flat[k + 1])
    })
}

/// Number of reals in the flattened form of one 5×5 complex matrix.
pub const FLAT_LEN: usize = 50;

/// Lab-frame description of one node's drive, from which the effective
/// Raman coupling is derived.
#[derive(Clone)]
pub struct LabFrameParams {
    /// Laser angular frequency `ω_L`.
    pub omega_laser: f64,
    /// Atomic transition frequency `ω_0`.
    pub omega_atom: f64,
    /// Bare cavity–atom coupling `g`.
    pub g_bare: f64,
    /// Classical Rabi frequency `Ω(t)`.
    pub rabi: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    /// Laser phase `φ(t)`.
    pub phase: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
}

impl fmt::Debug for LabFrameParams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("LabFrameParams")
            .field("omega_laser", &self.omega_laser)
            .field("omega_atom", &self.omega_atom)
            .field("g_bare", &self.g_bare)
            .finish_non_exhaustive()
    }
}

impl LabFrameParams {
    pub fn detuning(&self) -> f64 {
        self.omega_laser - self.omega_atom
    }

    /// Phase sweep rate `Ω²/(4(ω_L − ω_0))` that removes the level shift from
    /// the effective dynamics.
    pub fn phase_rate(&self, t: f64) -> Result<f64> {
        let detuning = self.checked_detuning()?;
        let omega = (self.rabi)(t);
        Ok(omega * omega / (4.0 * detuning))
    }

    fn checked_detuning(&self) -> Result<f64> {
        let detuning = self.detuning();
        if detuning == 0.0 || !detuning.is_finite() {
            return Err(Error::Domain(format!(
                "laser detuning omega_L - omega_0 must be nonzero and finite, got {detuning}"
            )));
        }
        Ok(detuning)
    }
}

/// Annihilation operator of the given cavity on the truncated basis.
pub fn annihilation_operator(cavity: Cavity) -> Operator {
    let mut a = Operator::zeros();
    let photon = match cavity {
        Cavity::Left => BasisState::G1G0,
        Cavity::Right => BasisState::G0G1,
    };
    a[(BasisState::G0G0.index(), photon.index())] = ONE;
    a
}

/// Excitation-exchange Hamiltonian `−i g (σ₊ a − a† σ₋)` of one node.
pub fn coupling_hamiltonian(cavity: Cavity, g_value: f64) -> Operator {
    let mut h = Operator::zeros();
    let (atom, photon) = cavity.coupled_pair();
    h[(atom, photon)] = Complex64::new(0.0, -g_value);
    h[(photon, atom)] = Complex64::new(0.0, g_value);
    h
}

/// Effective Raman coupling `g Ω(t)/(ω_L − ω_0)`.
pub fn effective_coupling(params: &LabFrameParams, t: f64) -> Result<f64> {
    let detuning = params.checked_detuning()?;
    Ok(params.g_bare * (params.rabi)(t) / detuning)
}

/// `|ψ⟩⟨ψ|` for a normalised pure state.
pub fn pure_to_density(state: &PureState) -> Result<DensityMatrix> {
    let norm_sq = state.norm_sq();
    if !norm_sq.is_finite() || (norm_sq - 1.0).abs() > NORM_TOLERANCE {
        return Err(Error::Contract(format!("pure state must be normalised: squared norm is {norm_sq}")));
    }
    let ket = state.to_ket();
    Ok(DensityMatrix::new(ket * ket.adjoint(), state.time))
}

pub fn commutator(a: &Operator, b: &Operator) -> Operator {
    a * b - b * a
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn unit(i: usize) -> Ket {
        let mut v = Ket::zeros();
        v[i] = ONE;
        v
    }

    #[test]
    fn basis_indexing_is_stable() {
        for (k, b) in BasisState::ALL.iter().enumerate() {
            assert_eq!(b.index(), k);
            assert_eq!(b.position(), k + 1);
            assert_eq!(BasisState::from_index(k), Some(*b));
        }
        assert_eq!(BasisState::from_index(5), None);
    }

    #[test]
    fn annihilation_acts_on_single_photon() {
        let a1 = annihilation_operator(Cavity::Left);
        let a2 = annihilation_operator(Cavity::Right);
        assert_eq!(a1 * unit(2), unit(0));
        assert_eq!(a2 * unit(2), Ket::zeros());
        assert_eq!(a2 * unit(4), unit(0));
        assert_eq!(a1 * a1, Operator::zeros());
        assert_eq!(a2 * a2, Operator::zeros());
    }

    #[test]
    fn coupling_hamiltonian_blocks() {
        assert_eq!(coupling_hamiltonian(Cavity::Left, 0.0), Operator::zeros());
        let h2 = coupling_hamiltonian(Cavity::Right, 1.0);
        let h1 = coupling_hamiltonian(Cavity::Left, 1.0);
        for i in 0..5 {
            for j in 0..5 {
                let in_right = matches!((i, j), (3, 4) | (4, 3));
                let in_left = matches!((i, j), (1, 2) | (2, 1));
                assert_eq!(h2[(i, j)] != Complex64::ZERO, in_right, "H2 entry ({i},{j})");
                assert_eq!(h1[(i, j)] != Complex64::ZERO, in_left, "H1 entry ({i},{j})");
            }
        }
        assert_eq!(h1, h1.adjoint());
        assert_eq!(h2, h2.adjoint());
    }

    fn params(g: f64, rabi: f64, detuning: f64) -> LabFrameParams {
        LabFrameParams {
            omega_laser: 10.0 + detuning,
            omega_atom: 10.0,
            g_bare: g,
            rabi: Arc::new(move |_| rabi),
            phase: Arc::new(|_| 0.0),
        }
    }

    #[test]
    fn effective_coupling_formula() {
        assert_eq!(effective_coupling(&params(2.0, 0.0, 6.0), 0.0).unwrap(), 0.0);
        assert_abs_diff_eq!(effective_coupling(&params(2.0, 3.0, 6.0), 0.0).unwrap(), 1.0);
        let single = effective_coupling(&params(2.0, 1.5, 6.0), 0.3).unwrap();
        let double = effective_coupling(&params(2.0, 3.0, 6.0), 0.3).unwrap();
        assert_abs_diff_eq!(double, 2.0 * single, epsilon = 1e-15);
        assert!(matches!(effective_coupling(&params(2.0, 3.0, 0.0), 0.0), Err(Error::Domain(_))));
        assert_abs_diff_eq!(params(1.0, 2.0, 4.0).phase_rate(0.0).unwrap(), 0.25);
    }

    #[test]
    fn pure_to_density_examples() {
        let rho = pure_to_density(&PureState::new(1.0, 0.0, 0.0, 0.0, 0.0)).unwrap();
        assert_eq!(rho.entries, {
            let mut m = Operator::zeros();
            m[(1, 1)] = ONE;
            m
        });

        let b = 0.6;
        let rho = pure_to_density(&PureState::new(0.8, 0.0, 0.0, b, 0.0)).unwrap();
        assert_abs_diff_eq!(rho.population(BasisState::G1G0), b * b / 2.0, epsilon = 1e-15);

        let s = PureState::new(0.5, 0.5, 0.0, -std::f64::consts::FRAC_1_SQRT_2, 0.0);
        let rho = pure_to_density(&s).unwrap();
        assert_abs_diff_eq!(rho.trace().re, 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(rho.purity(), 1.0, epsilon = 1e-14);
        // rank one: every 2x2 minor vanishes
        let m = rho.entries;
        for i in 0..5 {
            for j in 0..5 {
                let minor = m[(i, i)] * m[(j, j)] - m[(i, j)] * m[(j, i)];
                assert!(minor.norm() < 1e-15);
            }
        }
    }

    #[test]
    fn pure_to_density_rejects_unnormalised() {
        let s = PureState::new(1.0, 0.1, 0.0, 0.0, 0.0);
        assert!(matches!(pure_to_density(&s), Err(Error::Contract(_))));
    }

    #[test]
    fn flat_layout_round_trips() {
        let s = PureState::new(0.6, 0.0, 0.0, -0.8, 1.5);
        let rho = pure_to_density(&s).unwrap();
        let mut flat = [0.0; FLAT_LEN];
        rho.write_flat(&mut flat);
        assert_eq!(DensityMatrix::from_flat(&flat, 1.5), rho);
    }
}
