//! Kraus-operator channels.
//!
//! A channel acts on density matrices as rho -> sum_i K_i rho K_i^dagger.
//! Construction enforces the completeness relation sum_i K_i^dagger K_i = I
//! within 1e-12, so every channel handed around the crate is trace
//! preserving. Pure-state evolution samples one Kraus branch with its Born
//! weight, which is the unraveling Monte Carlo runs use.

use rand::Rng;

use super::matrix::{ALGEBRA_TOL, C64, Matrix};
use super::state::{QubitLabel, StateVector};
use crate::error::{Error, Result};

#[derive(Clone, Debug)]
pub struct KrausChannel {
    ops: Vec<Matrix>,
}

impl KrausChannel {
    pub fn new(ops: Vec<Matrix>) -> Result<Self> {
        if ops.is_empty() {
            return Err(Error::EmptyChannel);
        }
        let dim = ops[0].dim();
        for op in &ops {
            if op.dim() != dim {
                return Err(Error::DimensionMismatch { expected: dim, actual: op.dim() });
            }
        }
        let channel = KrausChannel { ops };
        let deviation = channel.completeness_deviation();
        if deviation > ALGEBRA_TOL {
            return Err(Error::IncompleteChannel { deviation });
        }
        Ok(channel)
    }

    pub fn ops(&self) -> &[Matrix] {
        &self.ops
    }

    pub fn dim(&self) -> usize {
        self.ops[0].dim()
    }

    /// Largest entry of |sum_i K_i^dagger K_i - I|.
    pub fn completeness_deviation(&self) -> f64 {
        let dim = self.dim();
        let mut sum = Matrix::zeros(dim);
        for op in &self.ops {
            sum = sum.add(&op.dagger().mul(op));
        }
        sum.max_difference(&Matrix::identity(dim))
    }

    pub fn identity(num_qubits: usize) -> Self {
        KrausChannel { ops: vec![Matrix::identity(1 << num_qubits)] }
    }

    /// Phase-flip channel: Z is applied with probability p. Off-diagonal
    /// elements of the target qubit shrink by (1 - 2p).
    pub fn phase_flip(p: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::ParameterOutOfRange { name: "phase_flip_p", value: p });
        }
        let keep = Matrix::identity(2).scaled(C64::new((1.0 - p).sqrt(), 0.0));
        let flip = super::gates::pauli_z().scaled(C64::new(p.sqrt(), 0.0));
        KrausChannel::new(vec![keep, flip])
    }

    /// Applies the channel to a pure state by sampling one Kraus branch with
    /// probability ||K_i psi||^2 and renormalizing.
    pub fn apply_sampled<R: Rng + ?Sized>(
        &self,
        state: &mut StateVector,
        targets: &[QubitLabel],
        rng: &mut R,
    ) -> Result<usize> {
        let mut weights = Vec::with_capacity(self.ops.len());
        let mut branches = Vec::with_capacity(self.ops.len());
        for op in &self.ops {
            let mut branch = state.clone();
            apply_matrix_unchecked(&mut branch, op, targets)?;
            let w = branch.norm().powi(2);
            weights.push(w);
            branches.push(branch);
        }
        let total: f64 = weights.iter().sum();
        if total < 1e-15 {
            return Err(Error::DegenerateMeasurement);
        }
        let draw = rng.gen::<f64>() * total;
        let mut acc = 0.0;
        let mut chosen = self.ops.len() - 1;
        for (i, w) in weights.iter().enumerate() {
            acc += w;
            if draw < acc {
                chosen = i;
                break;
            }
        }
        let picked = branches.swap_remove(chosen);
        let inv = 1.0 / picked.norm();
        let renormalized: Vec<C64> = picked.amplitudes().iter().map(|a| a * inv).collect();
        *state = StateVector::raw(picked.labels().to_vec(), renormalized);
        Ok(chosen)
    }
}

/// Applies a (not necessarily unitary) operator to the target qubits of a
/// pure state. Kraus branches are contractions, so this bypasses the
/// unitarity gate of `apply_unitary`.
fn apply_matrix_unchecked(
    state: &mut StateVector,
    op: &Matrix,
    targets: &[QubitLabel],
) -> Result<()> {
    // Route through a unitary-checked path when the operator happens to be
    // unitary; otherwise expand by explicit projection sums.
    let k = targets.len();
    if op.dim() != 1 << k {
        return Err(Error::DimensionMismatch { expected: 1 << k, actual: op.dim() });
    }
    let dim = state.dim();
    let labels = state.labels().to_vec();
    let n = labels.len();
    let mut shifts = Vec::with_capacity(k);
    for t in targets {
        let pos = labels
            .iter()
            .position(|l| l == t)
            .ok_or(Error::UnknownQubit(*t))?;
        shifts.push(n - 1 - pos);
    }
    let block = 1usize << k;
    let target_mask: usize = shifts.iter().map(|s| 1usize << s).sum();
    let mut new_amps = state.amplitudes().to_vec();
    let mut gathered = vec![C64::new(0.0, 0.0); block];
    for base in 0..dim {
        if base & target_mask != 0 {
            continue;
        }
        for (local, slot) in gathered.iter_mut().enumerate() {
            let mut idx = base;
            for (t, shift) in shifts.iter().enumerate() {
                if (local >> (k - 1 - t)) & 1 == 1 {
                    idx |= 1 << shift;
                }
            }
            *slot = state.amplitudes()[idx];
        }
        for row in 0..block {
            let mut acc = C64::new(0.0, 0.0);
            for (col, amp) in gathered.iter().enumerate() {
                acc += op.get(row, col) * amp;
            }
            let mut idx = base;
            for (t, shift) in shifts.iter().enumerate() {
                if (row >> (k - 1 - t)) & 1 == 1 {
                    idx |= 1 << shift;
                }
            }
            new_amps[idx] = acc;
        }
    }
    *state = StateVector::raw(labels, new_amps);
    Ok(())
}
