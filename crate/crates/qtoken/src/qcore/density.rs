//! Mixed-state registers.
//!
//! Density matrices carry the same labeled-qubit convention as
//! `StateVector`. Validated constructors enforce Hermiticity and unit trace
//! within 1e-12 and positivity down to a -1e-10 floor; the eigenvalue floor
//! absorbs roundoff from channel composition.
//!
//! Operators act through explicit embedding into the full register, which
//! keeps the code one obvious loop away from the definitions. Registers top
//! out at three qubits, so none of this needs to be fast.

use super::channel::KrausChannel;
use super::matrix::{ALGEBRA_TOL, C64, Matrix};
use super::state::{QubitLabel, StateVector};
use crate::error::{Error, Result};

/// Eigenvalues this far below zero are treated as numerical noise.
pub const POSITIVITY_FLOOR: f64 = -1e-10;

#[derive(Clone, Debug)]
pub struct DensityMatrix {
    labels: Vec<QubitLabel>,
    entries: Matrix,
}

impl DensityMatrix {
    pub fn from_pure(state: &StateVector) -> Self {
        let dim = state.dim();
        let mut entries = Matrix::zeros(dim);
        for i in 0..dim {
            for j in 0..dim {
                entries.set(i, j, state.amplitudes()[i] * state.amplitudes()[j].conj());
            }
        }
        DensityMatrix { labels: state.labels().to_vec(), entries }
    }

    /// Validated constructor: Hermitian and unit trace within 1e-12,
    /// eigenvalues above the positivity floor.
    pub fn from_entries(labels: &[QubitLabel], entries: Matrix) -> Result<Self> {
        let dim = 1usize << labels.len();
        if entries.dim() != dim {
            return Err(Error::DimensionMismatch { expected: dim, actual: entries.dim() });
        }
        let herm_dev = hermiticity_deviation(&entries);
        if herm_dev > ALGEBRA_TOL {
            return Err(Error::NotHermitian(herm_dev));
        }
        let trace = trace_of(&entries);
        if (trace.re - 1.0).abs() > ALGEBRA_TOL || trace.im.abs() > ALGEBRA_TOL {
            return Err(Error::BadTrace((trace - C64::new(1.0, 0.0)).norm()));
        }
        let dm = DensityMatrix { labels: labels.to_vec(), entries };
        let min = dm.min_eigenvalue();
        if min < POSITIVITY_FLOOR {
            return Err(Error::NotPositive(min));
        }
        Ok(dm)
    }

    pub fn labels(&self) -> &[QubitLabel] {
        &self.labels
    }

    pub fn dim(&self) -> usize {
        self.entries.dim()
    }

    pub fn num_qubits(&self) -> usize {
        self.labels.len()
    }

    pub fn entry(&self, row: usize, col: usize) -> C64 {
        self.entries.get(row, col)
    }

    pub fn matrix(&self) -> &Matrix {
        &self.entries
    }

    pub fn trace(&self) -> f64 {
        trace_of(&self.entries).re
    }

    /// tr(rho^2); 1 for pure states.
    pub fn purity(&self) -> f64 {
        let sq = self.entries.mul(&self.entries);
        trace_of(&sq).re
    }

    pub fn min_eigenvalue(&self) -> f64 {
        hermitian_eigenvalues(&self.entries)
            .into_iter()
            .fold(f64::INFINITY, f64::min)
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        hermitian_eigenvalues(&self.entries)
    }

    fn positions(&self, targets: &[QubitLabel]) -> Result<Vec<usize>> {
        targets
            .iter()
            .map(|t| {
                self.labels
                    .iter()
                    .position(|l| l == t)
                    .ok_or(Error::UnknownQubit(*t))
            })
            .collect()
    }

    /// Embeds a k-qubit operator on the listed targets into the full
    /// register dimension.
    fn embed(&self, op: &Matrix, targets: &[QubitLabel]) -> Result<Matrix> {
        let k = targets.len();
        if op.dim() != 1 << k {
            return Err(Error::DimensionMismatch { expected: 1 << k, actual: op.dim() });
        }
        let positions = self.positions(targets)?;
        let n = self.num_qubits();
        let shifts: Vec<usize> = positions.iter().map(|p| n - 1 - p).collect();
        let rest_shifts: Vec<usize> = (0..n)
            .map(|p| n - 1 - p)
            .filter(|s| !shifts.contains(s))
            .collect();
        let dim = self.dim();
        let mut full = Matrix::zeros(dim);
        for row in 0..dim {
            for col in 0..dim {
                // row and col must agree on every non-target bit
                let mut same_rest = true;
                for s in &rest_shifts {
                    if (row >> s) & 1 != (col >> s) & 1 {
                        same_rest = false;
                        break;
                    }
                }
                if !same_rest {
                    continue;
                }
                let mut local_row = 0usize;
                let mut local_col = 0usize;
                for (t, s) in shifts.iter().enumerate() {
                    local_row |= ((row >> s) & 1) << (k - 1 - t);
                    local_col |= ((col >> s) & 1) << (k - 1 - t);
                }
                full.set(row, col, op.get(local_row, local_col));
            }
        }
        Ok(full)
    }

    pub fn apply_unitary(&mut self, u: &Matrix, targets: &[QubitLabel]) -> Result<()> {
        let deviation = u.unitarity_deviation();
        if deviation > ALGEBRA_TOL {
            return Err(Error::NonUnitary { deviation });
        }
        let full = self.embed(u, targets)?;
        self.entries = full.mul(&self.entries).mul(&full.dagger());
        Ok(())
    }

    pub fn apply_channel(&mut self, channel: &KrausChannel, targets: &[QubitLabel]) -> Result<()> {
        let mut out = Matrix::zeros(self.dim());
        for op in channel.ops() {
            let full = self.embed(op, targets)?;
            out = out.add(&full.mul(&self.entries).mul(&full.dagger()));
        }
        self.entries = out;
        Ok(())
    }

    /// Projects the targets onto a local pure state (unnormalized branch).
    /// Returns the branch probability and the renormalized collapsed
    /// register; the collapsed register is meaningless when the probability
    /// vanishes, so it is `None` below 1e-15.
    pub fn project(
        &self,
        targets: &[QubitLabel],
        local: &[C64],
    ) -> Result<(f64, Option<DensityMatrix>)> {
        let k = targets.len();
        if local.len() != 1 << k {
            return Err(Error::BadDimension(local.len()));
        }
        let mut proj = Matrix::zeros(1 << k);
        for i in 0..1 << k {
            for j in 0..1 << k {
                proj.set(i, j, local[i] * local[j].conj());
            }
        }
        let full = self.embed(&proj, targets)?;
        let collapsed = full.mul(&self.entries).mul(&full.dagger());
        let p = trace_of(&collapsed).re;
        if p < 1e-15 {
            return Ok((p.max(0.0), None));
        }
        let scaled = collapsed.scaled(C64::new(1.0 / p, 0.0));
        Ok((p, Some(DensityMatrix { labels: self.labels.clone(), entries: scaled })))
    }

    /// Traces out every qubit not in `keep`; `keep` preserves register
    /// order and must be non-empty.
    pub fn partial_trace(&self, keep: &[QubitLabel]) -> Result<DensityMatrix> {
        if keep.is_empty() {
            return Err(Error::EmptyKeepList);
        }
        let keep_positions = self.positions(keep)?;
        let n = self.num_qubits();
        let keep_shifts: Vec<usize> = keep_positions.iter().map(|p| n - 1 - p).collect();
        let traced_shifts: Vec<usize> = (0..n)
            .map(|p| n - 1 - p)
            .filter(|s| !keep_shifts.contains(s))
            .collect();
        let kd = 1usize << keep.len();
        let td = 1usize << traced_shifts.len();
        let mut out = Matrix::zeros(kd);
        for i in 0..kd {
            for j in 0..kd {
                let mut acc = C64::new(0.0, 0.0);
                for t in 0..td {
                    let mut row = 0usize;
                    let mut col = 0usize;
                    for (b, s) in keep_shifts.iter().enumerate() {
                        row |= ((i >> (keep.len() - 1 - b)) & 1) << s;
                        col |= ((j >> (keep.len() - 1 - b)) & 1) << s;
                    }
                    for (b, s) in traced_shifts.iter().enumerate() {
                        let bit = (t >> (traced_shifts.len() - 1 - b)) & 1;
                        row |= bit << s;
                        col |= bit << s;
                    }
                    acc += self.entries.get(row, col);
                }
                out.set(i, j, acc);
            }
        }
        Ok(DensityMatrix { labels: keep.to_vec(), entries: out })
    }

    /// <psi| rho |psi> for a pure reference over the same register.
    pub fn fidelity(&self, psi: &StateVector) -> Result<f64> {
        if self.labels != psi.labels() {
            return Err(Error::LabelMismatch);
        }
        let mut acc = C64::new(0.0, 0.0);
        for i in 0..self.dim() {
            for j in 0..self.dim() {
                acc += psi.amplitudes()[i].conj() * self.entries.get(i, j) * psi.amplitudes()[j];
            }
        }
        debug_assert!(acc.im.abs() < 1e-12, "fidelity picked up an imaginary part");
        Ok(acc.re)
    }

    pub fn max_difference(&self, other: &DensityMatrix) -> Result<f64> {
        if self.labels != other.labels {
            return Err(Error::LabelMismatch);
        }
        Ok(self.entries.max_difference(&other.entries))
    }
}

fn trace_of(m: &Matrix) -> C64 {
    (0..m.dim()).map(|i| m.get(i, i)).sum()
}

fn hermiticity_deviation(m: &Matrix) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..m.dim() {
        for j in 0..m.dim() {
            worst = worst.max((m.get(i, j) - m.get(j, i).conj()).norm());
        }
    }
    worst
}

/// Eigenvalues of a Hermitian matrix by cyclic complex Jacobi rotations.
/// Dimensions here never exceed 8, where this converges in a handful of
/// sweeps to well below 1e-13.
fn hermitian_eigenvalues(m: &Matrix) -> Vec<f64> {
    let n = m.dim();
    let mut a = m.clone();
    for _sweep in 0..100 {
        let mut off: f64 = 0.0;
        for p in 0..n {
            for q in (p + 1)..n {
                off += a.get(p, q).norm_sqr();
            }
        }
        if off < 1e-28 {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a.get(p, q);
                let b = apq.norm();
                if b < 1e-18 {
                    continue;
                }
                // diag(1, e^{-i arg}) makes the 2x2 block real symmetric,
                // then a real rotation annihilates it
                let phase = apq / b;
                let app = a.get(p, p).re;
                let aqq = a.get(q, q).re;
                let angle = 0.5 * (2.0 * b).atan2(app - aqq);
                let (s, c) = angle.sin_cos();
                let u_pp = C64::new(c, 0.0);
                let u_pq = C64::new(-s, 0.0);
                let u_qp = phase.conj() * s;
                let u_qq = phase.conj() * c;
                // columns: A <- A U
                for k in 0..n {
                    let akp = a.get(k, p);
                    let akq = a.get(k, q);
                    a.set(k, p, akp * u_pp + akq * u_qp);
                    a.set(k, q, akp * u_pq + akq * u_qq);
                }
                // rows: A <- U^dagger A
                for k in 0..n {
                    let apk = a.get(p, k);
                    let aqk = a.get(q, k);
                    a.set(p, k, u_pp.conj() * apk + u_qp.conj() * aqk);
                    a.set(q, k, u_pq.conj() * apk + u_qq.conj() * aqk);
                }
            }
        }
    }
    (0..n).map(|i| a.get(i, i).re).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qcore::gates;
    use QubitLabel::{Ancilla, Memory, Photon};

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn bell_pair() -> StateVector {
        let r = std::f64::consts::FRAC_1_SQRT_2;
        StateVector::from_amplitudes(
            &[Ancilla, Memory],
            vec![c(r, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(r, 0.0)],
        )
        .unwrap()
    }

    #[test]
    fn jacobi_reproduces_known_spectra() {
        // Pauli Z: eigenvalues +-1.
        let mut z = gates::pauli_z();
        let mut eig = hermitian_eigenvalues(&z);
        eig.sort_by(f64::total_cmp);
        assert!((eig[0] + 1.0).abs() < 1e-13 && (eig[1] - 1.0).abs() < 1e-13);

        // A dense Hermitian 2x2 with hand-computed spectrum:
        // [[1, 1-i], [1+i, 0]]: eigenvalues (1 +- sqrt(1 + 8))/2 = 2, -1.
        z = Matrix::zeros(2);
        z.set(0, 0, c(1.0, 0.0));
        z.set(0, 1, c(1.0, -1.0));
        z.set(1, 0, c(1.0, 1.0));
        z.set(1, 1, c(0.0, 0.0));
        let mut eig = hermitian_eigenvalues(&z);
        eig.sort_by(f64::total_cmp);
        assert!((eig[0] + 1.0).abs() < 1e-12);
        assert!((eig[1] - 2.0).abs() < 1e-12);

        // Bell projector: spectrum {1, 0, 0, 0}.
        let rho = DensityMatrix::from_pure(&bell_pair());
        let mut eig = rho.eigenvalues();
        eig.sort_by(f64::total_cmp);
        assert!(eig[..3].iter().all(|v| v.abs() < 1e-12));
        assert!((eig[3] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn validated_constructor_rejects_bad_matrices() {
        // Non-Hermitian.
        let mut m = Matrix::identity(2).scaled(c(0.5, 0.0));
        m.set(0, 1, c(0.3, 0.0));
        assert!(matches!(
            DensityMatrix::from_entries(&[Memory], m),
            Err(Error::NotHermitian(_))
        ));
        // Wrong trace.
        let m = Matrix::identity(2);
        assert!(matches!(
            DensityMatrix::from_entries(&[Memory], m),
            Err(Error::BadTrace(_))
        ));
        // Hermitian, trace one, but indefinite.
        let mut m = Matrix::zeros(2);
        m.set(0, 0, c(1.5, 0.0));
        m.set(1, 1, c(-0.5, 0.0));
        assert!(matches!(
            DensityMatrix::from_entries(&[Memory], m),
            Err(Error::NotPositive(_))
        ));
    }

    #[test]
    fn purity_and_partial_trace_of_bell_pair() {
        let rho = DensityMatrix::from_pure(&bell_pair());
        assert!((rho.purity() - 1.0).abs() < 1e-12);
        let reduced = rho.partial_trace(&[Ancilla]).unwrap();
        // Maximally mixed marginal.
        assert!((reduced.entry(0, 0).re - 0.5).abs() < 1e-12);
        assert!((reduced.entry(1, 1).re - 0.5).abs() < 1e-12);
        assert!(reduced.entry(0, 1).norm() < 1e-12);
        assert!((reduced.purity() - 0.5).abs() < 1e-12);
        assert!(matches!(rho.partial_trace(&[]), Err(Error::EmptyKeepList)));
    }

    #[test]
    fn unitary_conjugation_matches_pure_state_path() {
        let mut psi = StateVector::basis_state(&[Ancilla, Memory], 0).unwrap();
        let mut rho = DensityMatrix::from_pure(&psi);
        psi.apply_unitary(&gates::hadamard(), &[Ancilla]).unwrap();
        psi.apply_unitary(&gates::cnot(), &[Ancilla, Memory]).unwrap();
        rho.apply_unitary(&gates::hadamard(), &[Ancilla]).unwrap();
        rho.apply_unitary(&gates::cnot(), &[Ancilla, Memory]).unwrap();
        let from_pure = DensityMatrix::from_pure(&psi);
        assert!(rho.max_difference(&from_pure).unwrap() < 1e-13);
    }

    #[test]
    fn fidelity_against_pure_reference() {
        let rho = DensityMatrix::from_pure(&bell_pair());
        assert!((rho.fidelity(&bell_pair()).unwrap() - 1.0).abs() < 1e-12);
        let orth = StateVector::basis_state(&[Ancilla, Memory], 1).unwrap();
        assert!(rho.fidelity(&orth).unwrap() < 1e-12);
        let other_labels = StateVector::basis_state(&[Ancilla, Photon], 0).unwrap();
        assert!(matches!(rho.fidelity(&other_labels), Err(Error::LabelMismatch)));
    }

    #[test]
    fn phase_flip_channel_shrinks_off_diagonals() {
        let r = std::f64::consts::FRAC_1_SQRT_2;
        let plus =
            StateVector::from_amplitudes(&[Memory], vec![c(r, 0.0), c(r, 0.0)]).unwrap();
        let mut rho = DensityMatrix::from_pure(&plus);
        let p = 0.2;
        rho.apply_channel(&KrausChannel::phase_flip(p).unwrap(), &[Memory]).unwrap();
        // Hand-computed action: off-diagonals scale by 1-2p.
        assert!((rho.entry(0, 1).re - 0.5 * (1.0 - 2.0 * p)).abs() < 1e-14);
        assert!((rho.entry(0, 0).re - 0.5).abs() < 1e-14);
        assert!((rho.trace() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn projection_branches_sum_to_one() {
        let rho = DensityMatrix::from_pure(&bell_pair());
        let (p0, b0) = rho.project(&[Ancilla], &[c(1.0, 0.0), c(0.0, 0.0)]).unwrap();
        let (p1, b1) = rho.project(&[Ancilla], &[c(0.0, 0.0), c(1.0, 0.0)]).unwrap();
        assert!((p0 + p1 - 1.0).abs() < 1e-12);
        assert!((p0 - 0.5).abs() < 1e-12);
        let b0 = b0.unwrap();
        assert!((b0.trace() - 1.0).abs() < 1e-12);
        // Collapsed branch is |00><00|.
        assert!((b0.entry(0, 0).re - 1.0).abs() < 1e-12);
        let b1 = b1.unwrap();
        assert!((b1.entry(3, 3).re - 1.0).abs() < 1e-12);
    }
}
