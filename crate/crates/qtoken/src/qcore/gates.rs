//! Fixed gate set used by the protocol circuits.
//!
//! Multi-qubit matrices follow the register convention of the whole crate:
//! the first qubit of a gate's target list is the most significant bit of
//! the basis index.

use super::matrix::{C64, Matrix};

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn pauli_x() -> Matrix {
    Matrix::from_rows(2, &[c(0.0, 0.0), c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)])
}

pub fn pauli_y() -> Matrix {
    Matrix::from_rows(2, &[c(0.0, 0.0), c(0.0, -1.0), c(0.0, 1.0), c(0.0, 0.0)])
}

pub fn pauli_z() -> Matrix {
    Matrix::from_rows(2, &[c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(-1.0, 0.0)])
}

pub fn hadamard() -> Matrix {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    Matrix::from_rows(2, &[c(s, 0.0), c(s, 0.0), c(s, 0.0), c(-s, 0.0)])
}

/// diag(1, e^{i phi}): phase on the |1> (late) component.
pub fn phase_shift(phi: f64) -> Matrix {
    Matrix::from_rows(2, &[c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), C64::from_polar(1.0, phi)])
}

/// Rotation about Y: ry(a)|0> = cos(a/2)|0> + sin(a/2)|1>.
pub fn ry(angle: f64) -> Matrix {
    let (s, co) = (angle / 2.0).sin_cos();
    Matrix::from_rows(2, &[c(co, 0.0), c(-s, 0.0), c(s, 0.0), c(co, 0.0)])
}

/// Control on the first (most significant) qubit, target on the second.
pub fn cnot() -> Matrix {
    let mut m = Matrix::zeros(4);
    m.set(0, 0, c(1.0, 0.0));
    m.set(1, 1, c(1.0, 0.0));
    m.set(2, 3, c(1.0, 0.0));
    m.set(3, 2, c(1.0, 0.0));
    m
}

pub fn swap() -> Matrix {
    let mut m = Matrix::zeros(4);
    m.set(0, 0, c(1.0, 0.0));
    m.set(1, 2, c(1.0, 0.0));
    m.set(2, 1, c(1.0, 0.0));
    m.set(3, 3, c(1.0, 0.0));
    m
}

/// Embeds a single-qubit operator behind one control qubit. The control is
/// the most significant qubit of the resulting two-qubit gate.
pub fn controlled(u: &Matrix) -> Matrix {
    assert_eq!(u.dim(), 2, "controlled() embeds single-qubit operators");
    let mut m = Matrix::identity(4);
    for i in 0..2 {
        for j in 0..2 {
            m.set(2 + i, 2 + j, u.get(i, j));
        }
    }
    m
}

/// Photon emission conditioned on the spin: |1>_spin flips the time bin and
/// stamps it with the apparatus phase theta. Control first, photon second.
pub fn controlled_emission(theta: f64) -> Matrix {
    controlled(&pauli_x().scaled(C64::from_polar(1.0, theta)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn standard_gates_are_unitary() {
        for g in [pauli_x(), pauli_y(), pauli_z(), hadamard(), phase_shift(1.3), ry(0.7)] {
            assert!(g.is_unitary(1e-14), "single-qubit gate failed unitarity");
        }
        for g in [cnot(), swap(), controlled_emission(2.1)] {
            assert!(g.is_unitary(1e-14), "two-qubit gate failed unitarity");
        }
    }

    #[test]
    fn cnot_truth_table() {
        let g = cnot();
        // columns are images of basis states |ct>
        assert_eq!(g.get(3, 2).re, 1.0); // |10> -> |11>
        assert_eq!(g.get(2, 3).re, 1.0); // |11> -> |10>
        assert_eq!(g.get(0, 0).re, 1.0);
        assert_eq!(g.get(1, 1).re, 1.0);
    }

    #[test]
    fn controlled_emission_stamps_phase_on_late_branch() {
        let g = controlled_emission(std::f64::consts::FRAC_PI_2);
        // |10> (spin 1, photon early) -> i |11>
        let v = g.get(3, 2);
        assert!((v.re - 0.0).abs() < 1e-15 && (v.im - 1.0).abs() < 1e-15);
        // |00> untouched
        assert_eq!(g.get(0, 0).re, 1.0);
    }

    #[test]
    fn ry_prepares_unbalanced_superposition() {
        let alpha: f64 = 0.25;
        let g = ry(2.0 * alpha.sqrt().acos());
        // image of |0>
        assert!((g.get(0, 0).re - alpha.sqrt()).abs() < 1e-15);
        assert!((g.get(1, 0).re - (1.0 - alpha).sqrt()).abs() < 1e-15);
    }
}
