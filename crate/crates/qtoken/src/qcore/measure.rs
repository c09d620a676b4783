//! Phase-basis and Bell measurements.
//!
//! The phase basis at angle phi is {|+_phi>, |-_phi>} with
//! |+-_phi> = (|E> +- e^{i phi} |L>)/sqrt(2); bit 0 means the + outcome.
//!
//! Bell outcomes are labeled so that the bit pair (r1, r2) directly encodes
//! the teleportation corrections: r1 = 1 marks the bit-flip (Psi) pair and
//! r1 XOR r2 = 1 marks the phase flip. Concretely
//! (0,0) = Phi+, (0,1) = Phi-, (1,1) = Psi+, (1,0) = Psi-.

use std::f64::consts::TAU;

use rand::Rng;

use super::matrix::C64;
use super::state::{QubitLabel, StateVector};
use crate::error::{Error, Result};

/// A time-bin measurement basis parameterized by its interferometer phase,
/// stored modulo 2 pi.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PhaseBasis {
    phi: f64,
}

impl PhaseBasis {
    pub fn new(phi: f64) -> Self {
        PhaseBasis { phi: phi.rem_euclid(TAU) }
    }

    pub fn phi(&self) -> f64 {
        self.phi
    }

    /// Basis state for the given outcome bit: bit 0 is |+_phi>.
    pub fn state(&self, bit: u8) -> [C64; 2] {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let sign = if bit == 0 { 1.0 } else { -1.0 };
        [C64::new(s, 0.0), C64::from_polar(sign * s, self.phi)]
    }

    /// The basis at the negated angle. Measuring in it undoes the phase
    /// conjugation a Born projection writes into the partner qubit, which is
    /// what a decoding measurement needs.
    pub fn conjugate(&self) -> PhaseBasis {
        PhaseBasis::new(-self.phi)
    }
}

/// Born probabilities of the two phase-basis outcomes on `target`.
pub fn phase_basis_probabilities(
    state: &StateVector,
    target: QubitLabel,
    basis: &PhaseBasis,
) -> Result<(f64, f64)> {
    let (p0, _) = state.partial_project(&[target], &basis.state(0))?;
    let (p1, _) = state.partial_project(&[target], &basis.state(1))?;
    Ok((p0, p1))
}

/// Samples a phase-basis measurement on `target` and collapses the register.
pub fn measure_phase_basis<R: Rng + ?Sized>(
    state: &mut StateVector,
    target: QubitLabel,
    basis: &PhaseBasis,
    rng: &mut R,
) -> Result<u8> {
    let (p0, p1) = phase_basis_probabilities(state, target, basis)?;
    if p0 < 1e-15 && p1 < 1e-15 {
        return Err(Error::DegenerateMeasurement);
    }
    let bit = if rng.gen::<f64>() * (p0 + p1) < p0 { 0 } else { 1 };
    state.collapse_onto(&[target], &basis.state(bit))?;
    Ok(bit)
}

/// Bell state amplitudes over a qubit pair, indexed 0..4 in the order
/// Phi+, Phi-, Psi+, Psi-.
pub fn bell_state(index: usize) -> [C64; 4] {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let z = C64::new(0.0, 0.0);
    let p = C64::new(s, 0.0);
    let m = C64::new(-s, 0.0);
    match index {
        0 => [p, z, z, p],
        1 => [p, z, z, m],
        2 => [z, p, p, z],
        3 => [z, p, m, z],
        _ => panic!("Bell index out of range"),
    }
}

/// Mapping from Bell outcome index to the announced bit pair (r1, r2).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BellLabeling {
    bits: [(u8, u8); 4],
}

impl BellLabeling {
    /// The crate-wide convention described in the module docs.
    pub fn standard() -> Self {
        BellLabeling { bits: [(0, 0), (0, 1), (1, 1), (1, 0)] }
    }

    /// A deliberately wrong mapping (Phi- and Psi+ exchanged), used as a
    /// negative control: verification checks must fail under it.
    pub fn corrupted() -> Self {
        BellLabeling { bits: [(0, 0), (1, 1), (0, 1), (1, 0)] }
    }

    pub fn bits(&self, index: usize) -> (u8, u8) {
        self.bits[index]
    }
}

impl Default for BellLabeling {
    fn default() -> Self {
        BellLabeling::standard()
    }
}

/// Born probabilities of the four Bell outcomes on the qubit pair
/// (first, second), first qubit most significant.
pub fn bell_probabilities(
    state: &StateVector,
    pair: (QubitLabel, QubitLabel),
) -> Result<[f64; 4]> {
    let targets = [pair.0, pair.1];
    let mut probs = [0.0; 4];
    for (i, p) in probs.iter_mut().enumerate() {
        let (prob, _) = state.partial_project(&targets, &bell_state(i))?;
        *p = prob;
    }
    Ok(probs)
}

/// Samples a Bell measurement on the pair, collapses the register, and
/// returns the announced bits under the given labeling.
pub fn measure_bell<R: Rng + ?Sized>(
    state: &mut StateVector,
    pair: (QubitLabel, QubitLabel),
    labeling: &BellLabeling,
    rng: &mut R,
) -> Result<(u8, u8)> {
    let probs = bell_probabilities(state, pair)?;
    let total: f64 = probs.iter().sum();
    if total < 1e-15 {
        return Err(Error::DegenerateMeasurement);
    }
    let draw = rng.gen::<f64>() * total;
    let mut acc = 0.0;
    let mut outcome = 3;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if draw < acc {
            outcome = i;
            break;
        }
    }
    state.collapse_onto(&[pair.0, pair.1], &bell_state(outcome))?;
    Ok(labeling.bits(outcome))
}
