//! Pure-state register over labeled qubits.
//!
//! The register is an ordered list of labels; the basis index is read with
//! the first label as the most significant bit. The protocol always keeps
//! its joint register in (Ancilla, Memory, Photon) order.

use std::fmt;

use serde::{Deserialize, Serialize};

use super::matrix::{ALGEBRA_TOL, C64, Matrix};
use crate::error::{Error, Result};

/// Largest admissible overlap deficit when factoring a known tensor factor
/// out of the register.
pub const PRODUCT_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum QubitLabel {
    /// Electron spin, the communication qubit.
    Ancilla,
    /// Nuclear spin holding the stored token.
    Memory,
    /// Time-bin photon; early = |0>, late = |1>. Loss is handled classically
    /// before any measurement, so one label covers both photon uses.
    Photon,
}

impl fmt::Display for QubitLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            QubitLabel::Ancilla => write!(f, "A"),
            QubitLabel::Memory => write!(f, "M"),
            QubitLabel::Photon => write!(f, "P"),
        }
    }
}

#[derive(Clone, Debug)]
pub struct StateVector {
    labels: Vec<QubitLabel>,
    amps: Vec<C64>,
}

fn check_labels_unique(labels: &[QubitLabel]) -> Result<()> {
    for (i, l) in labels.iter().enumerate() {
        if labels[..i].contains(l) {
            return Err(Error::DuplicateTarget(*l));
        }
    }
    Ok(())
}

impl StateVector {
    /// Computational basis state |index> over the given labels.
    pub fn basis_state(labels: &[QubitLabel], index: usize) -> Result<Self> {
        check_labels_unique(labels)?;
        let dim = 1usize << labels.len();
        if index >= dim {
            return Err(Error::DimensionMismatch { expected: dim, actual: index });
        }
        let mut amps = vec![C64::new(0.0, 0.0); dim];
        amps[index] = C64::new(1.0, 0.0);
        Ok(StateVector { labels: labels.to_vec(), amps })
    }

    /// Builds a register from explicit amplitudes; the vector must be
    /// normalized within 1e-12 and of power-of-two length matching the labels.
    pub fn from_amplitudes(labels: &[QubitLabel], amps: Vec<C64>) -> Result<Self> {
        check_labels_unique(labels)?;
        let dim = 1usize << labels.len();
        if amps.len() != dim {
            return Err(Error::BadDimension(amps.len()));
        }
        let norm: f64 = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > ALGEBRA_TOL {
            return Err(Error::NotNormalized { norm });
        }
        Ok(StateVector { labels: labels.to_vec(), amps })
    }

    /// Internal constructor bypassing validation; used by channel
    /// unraveling, where intermediate branches are unnormalized.
    pub(crate) fn raw(labels: Vec<QubitLabel>, amps: Vec<C64>) -> Self {
        StateVector { labels, amps }
    }

    pub fn labels(&self) -> &[QubitLabel] {
        &self.labels
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amps
    }

    pub fn num_qubits(&self) -> usize {
        self.labels.len()
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn norm(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn contains(&self, label: QubitLabel) -> bool {
        self.labels.contains(&label)
    }

    fn position_of(&self, label: QubitLabel) -> Result<usize> {
        self.labels
            .iter()
            .position(|l| *l == label)
            .ok_or(Error::UnknownQubit(label))
    }

    /// Bit shift of the given register position in a basis index.
    fn shift_of(&self, position: usize) -> usize {
        self.num_qubits() - 1 - position
    }

    fn target_shifts(&self, targets: &[QubitLabel]) -> Result<Vec<usize>> {
        check_labels_unique(targets)?;
        targets
            .iter()
            .map(|t| self.position_of(*t).map(|p| self.shift_of(p)))
            .collect()
    }

    /// Tensor product; the labels of `other` are appended after `self`'s.
    pub fn tensor(&self, other: &StateVector) -> Result<StateVector> {
        for l in &other.labels {
            if self.labels.contains(l) {
                return Err(Error::OverlappingLabels(*l));
            }
        }
        let mut labels = self.labels.clone();
        labels.extend_from_slice(&other.labels);
        let mut amps = Vec::with_capacity(self.dim() * other.dim());
        for a in &self.amps {
            for b in &other.amps {
                amps.push(a * b);
            }
        }
        Ok(StateVector { labels, amps })
    }

    /// Returns an equivalent register with the qubits permuted into
    /// `new_order`, which must be a permutation of the current labels.
    pub fn reordered(&self, new_order: &[QubitLabel]) -> Result<StateVector> {
        check_labels_unique(new_order)?;
        if new_order.len() != self.labels.len() {
            return Err(Error::LabelMismatch);
        }
        let positions: Vec<usize> = new_order
            .iter()
            .map(|l| self.position_of(*l))
            .collect::<Result<_>>()?;
        let n = self.num_qubits();
        let mut amps = vec![C64::new(0.0, 0.0); self.dim()];
        for (new_idx, amp) in amps.iter_mut().enumerate() {
            let mut old_idx = 0usize;
            for (new_pos, old_pos) in positions.iter().enumerate() {
                let bit = (new_idx >> (n - 1 - new_pos)) & 1;
                old_idx |= bit << self.shift_of(*old_pos);
            }
            *amp = self.amps[old_idx];
        }
        Ok(StateVector { labels: new_order.to_vec(), amps })
    }

    /// Applies a k-qubit unitary to the listed targets. The first target is
    /// the most significant bit of the gate's own basis convention. The
    /// matrix must be unitary within 1e-12.
    pub fn apply_unitary(&mut self, u: &Matrix, targets: &[QubitLabel]) -> Result<()> {
        let k = targets.len();
        if u.dim() != 1 << k {
            return Err(Error::DimensionMismatch { expected: 1 << k, actual: u.dim() });
        }
        let deviation = u.unitarity_deviation();
        if deviation > ALGEBRA_TOL {
            return Err(Error::NonUnitary { deviation });
        }
        let shifts = self.target_shifts(targets)?;
        let target_mask: usize = shifts.iter().map(|s| 1usize << s).sum();
        let block = 1usize << k;
        let mut gathered = vec![C64::new(0.0, 0.0); block];
        for base in 0..self.dim() {
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
                *slot = self.amps[idx];
            }
            for row in 0..block {
                let mut acc = C64::new(0.0, 0.0);
                for (col, amp) in gathered.iter().enumerate() {
                    acc += u.get(row, col) * amp;
                }
                let mut idx = base;
                for (t, shift) in shifts.iter().enumerate() {
                    if (row >> (k - 1 - t)) & 1 == 1 {
                        idx |= 1 << shift;
                    }
                }
                self.amps[idx] = acc;
            }
        }
        debug_assert!((self.norm() - 1.0).abs() < 1e-9, "unitary broke normalization");
        Ok(())
    }

    /// Projects the listed targets onto the given local state without
    /// collapsing. Returns the Born probability and the unnormalized
    /// amplitudes of the remaining qubits, in their original order.
    pub fn partial_project(
        &self,
        targets: &[QubitLabel],
        local: &[C64],
    ) -> Result<(f64, Vec<C64>)> {
        let k = targets.len();
        if local.len() != 1 << k {
            return Err(Error::BadDimension(local.len()));
        }
        let shifts = self.target_shifts(targets)?;
        let rest_dim = self.dim() >> k;
        let mut rest = vec![C64::new(0.0, 0.0); rest_dim];
        let rest_shifts: Vec<usize> = (0..self.num_qubits())
            .filter(|p| !shifts.contains(&self.shift_of(*p)))
            .map(|p| self.shift_of(p))
            .collect();
        for idx in 0..self.dim() {
            if self.amps[idx] == C64::new(0.0, 0.0) {
                continue;
            }
            let mut local_idx = 0usize;
            for (t, shift) in shifts.iter().enumerate() {
                local_idx |= ((idx >> shift) & 1) << (k - 1 - t);
            }
            let mut rest_idx = 0usize;
            for (t, shift) in rest_shifts.iter().enumerate() {
                rest_idx |= ((idx >> shift) & 1) << (rest_shifts.len() - 1 - t);
            }
            rest[rest_idx] += local[local_idx].conj() * self.amps[idx];
        }
        let prob: f64 = rest.iter().map(|a| a.norm_sqr()).sum();
        Ok((prob, rest))
    }

    /// Collapses the listed targets onto the given local state and
    /// renormalizes the full register.
    pub fn collapse_onto(&mut self, targets: &[QubitLabel], local: &[C64]) -> Result<()> {
        let (prob, rest) = self.partial_project(targets, local)?;
        if prob < 1e-30 {
            return Err(Error::DegenerateMeasurement);
        }
        let k = targets.len();
        let shifts = self.target_shifts(targets)?;
        let rest_shifts: Vec<usize> = (0..self.num_qubits())
            .filter(|p| !shifts.contains(&self.shift_of(*p)))
            .map(|p| self.shift_of(p))
            .collect();
        let scale = 1.0 / prob.sqrt();
        for (idx, amp) in self.amps.iter_mut().enumerate() {
            let mut local_idx = 0usize;
            for (t, shift) in shifts.iter().enumerate() {
                local_idx |= ((idx >> shift) & 1) << (k - 1 - t);
            }
            let mut rest_idx = 0usize;
            for (t, shift) in rest_shifts.iter().enumerate() {
                rest_idx |= ((idx >> shift) & 1) << (rest_shifts.len() - 1 - t);
            }
            *amp = local[local_idx] * rest[rest_idx] * scale;
        }
        Ok(())
    }

    /// Removes qubits known to sit in the given local state, returning the
    /// normalized remainder. Errors if the register is not actually a
    /// product with that factor.
    pub fn factor_out(&self, targets: &[QubitLabel], local: &[C64]) -> Result<StateVector> {
        let (prob, mut rest) = self.partial_project(targets, local)?;
        let residual = (1.0 - prob).abs();
        if residual > PRODUCT_TOL {
            return Err(Error::NotProductState { residual });
        }
        let scale = 1.0 / prob.sqrt();
        for a in &mut rest {
            *a *= scale;
        }
        let remaining: Vec<QubitLabel> = self
            .labels
            .iter()
            .copied()
            .filter(|l| !targets.contains(l))
            .collect();
        Ok(StateVector { labels: remaining, amps: rest })
    }

    pub fn inner(&self, other: &StateVector) -> Result<C64> {
        if self.labels != other.labels {
            return Err(Error::LabelMismatch);
        }
        Ok(self
            .amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| a.conj() * b)
            .sum())
    }

    /// |<self|other>|^2 for pure states over the same register.
    pub fn overlap(&self, other: &StateVector) -> Result<f64> {
        Ok(self.inner(other)?.norm_sqr())
    }

    /// Strips the unobservable global phase: the first amplitude of
    /// non-negligible magnitude is made real and positive. Detection events
    /// herald a state only up to such a phase, so comparisons between
    /// physically identical preparations go through this form.
    pub fn normalize_global_phase(&mut self) {
        if let Some(a) = self.amps.iter().find(|a| a.norm() > 1e-9) {
            let phase = a / a.norm();
            let correction = phase.conj();
            for amp in &mut self.amps {
                *amp *= correction;
            }
        }
    }

    pub fn max_difference(&self, other: &StateVector) -> Result<f64> {
        if self.labels != other.labels {
            return Err(Error::LabelMismatch);
        }
        Ok(self
            .amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max))
    }
}
