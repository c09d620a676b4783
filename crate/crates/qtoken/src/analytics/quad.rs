//! Quadrature for the fidelity averages.
//!
//! Two engines, hand-rolled on purpose. Adaptive Simpson carries an
//! absolute-tolerance guarantee it can report on failure, which is what
//! the closed-form cross-check needs. Fixed-order Gauss rules (Legendre
//! for compact intervals, Hermite for Gaussian weights, trapezoid for
//! periodic averages) cost a known number of integrand evaluations,
//! which is what the branch-sum evaluator needs: its integrand walks
//! the full protocol state machinery, so evaluations are the budget.
//! All integrands here are entire functions, where the Gauss rules
//! converge faster than any power of the order. Every engine accepts
//! fallible integrands so layers can nest.

use crate::error::{Error, Result};

/// Hard cap on interval halvings; 2^-48 of the original width is far
/// below any tolerance used in this crate, so hitting the cap means the
/// integrand is unsuitable, not that more depth would help.
const MAX_DEPTH: u32 = 48;

fn simpson(fa: f64, fm: f64, fb: f64, width: f64) -> f64 {
    width / 6.0 * (fa + 4.0 * fm + fb)
}

#[allow(clippy::too_many_arguments)]
fn refine(
    f: &mut dyn FnMut(f64) -> Result<f64>,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> Result<f64> {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm)?;
    let frm = f(rm)?;
    let left = simpson(fa, flm, fm, m - a);
    let right = simpson(fm, frm, fb, b - m);
    let delta = left + right - whole;
    if delta.abs() <= 15.0 * tol {
        return Ok(left + right + delta / 15.0);
    }
    if depth == 0 {
        return Err(Error::QuadratureNoConvergence {
            achieved: delta.abs() / 15.0,
            requested: tol,
        });
    }
    let half_tol = 0.5 * tol;
    Ok(refine(f, a, m, fa, flm, fm, left, half_tol, depth - 1)?
        + refine(f, m, b, fm, frm, fb, right, half_tol, depth - 1)?)
}

/// Integrates `f` over [a, b] to absolute tolerance `tol`.
pub fn adaptive_simpson(
    f: &mut dyn FnMut(f64) -> Result<f64>,
    a: f64,
    b: f64,
    tol: f64,
) -> Result<f64> {
    if a == b {
        return Ok(0.0);
    }
    let fa = f(a)?;
    let m = 0.5 * (a + b);
    let fm = f(m)?;
    let fb = f(b)?;
    let whole = simpson(fa, fm, fb, b - a);
    refine(f, a, b, fa, fm, fb, whole, tol, MAX_DEPTH)
}

/// Average of `g` over alpha uniform on [0, 1]. The substitution
/// alpha = sin^2(u) removes the square-root cusps at the endpoints that
/// the fidelity integrand otherwise has.
pub fn uniform_alpha_average(
    g: &mut dyn FnMut(f64) -> Result<f64>,
    tol: f64,
) -> Result<f64> {
    adaptive_simpson(
        &mut |u: f64| {
            let alpha = u.sin().powi(2);
            Ok(g(alpha)? * (2.0 * u).sin())
        },
        0.0,
        std::f64::consts::FRAC_PI_2,
        tol,
    )
}

/// Expectation of `g` under a centered Gaussian with standard deviation
/// `sigma`. Zero sigma is the point mass at 0. The integration window
/// [-10 sigma, 10 sigma] leaves out less than 2e-23 of the mass.
pub fn gaussian_average(
    g: &mut dyn FnMut(f64) -> Result<f64>,
    sigma: f64,
    tol: f64,
) -> Result<f64> {
    if sigma == 0.0 {
        return g(0.0);
    }
    let norm = 1.0 / (sigma * (2.0 * std::f64::consts::PI).sqrt());
    adaptive_simpson(
        &mut |x: f64| Ok(g(x)? * norm * (-0.5 * (x / sigma).powi(2)).exp()),
        -10.0 * sigma,
        10.0 * sigma,
        tol,
    )
}

/// Nodes and weights of the n-point Gauss-Legendre rule on [-1, 1],
/// by Newton iteration on the Legendre recurrence. Only the lower half
/// is solved; the rule is symmetric.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 2, "a Gauss rule needs at least two nodes");
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut converged = false;
        for _ in 0..100 {
            let mut p1 = 1.0;
            let mut p2 = 0.0;
            for j in 0..n {
                let p3 = p2;
                p2 = p1;
                let jf = j as f64;
                p1 = ((2.0 * jf + 1.0) * z * p2 - jf * p3) / (jf + 1.0);
            }
            let dp = n as f64 * (z * p1 - p2) / (z * z - 1.0);
            let step = p1 / dp;
            z -= step;
            if step.abs() < 1e-15 {
                let w = 2.0 / ((1.0 - z * z) * dp * dp);
                nodes[i] = -z;
                nodes[n - 1 - i] = z;
                weights[i] = w;
                weights[n - 1 - i] = w;
                converged = true;
                break;
            }
        }
        assert!(converged, "Legendre node {i} of {n} stalled");
    }
    (nodes, weights)
}

/// n-point Gauss-Legendre integral of `f` over [a, b].
pub fn legendre_integral(
    f: &mut dyn FnMut(f64) -> Result<f64>,
    a: f64,
    b: f64,
    n: usize,
) -> Result<f64> {
    let (nodes, weights) = gauss_legendre(n);
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let mut sum = 0.0;
    for (x, w) in nodes.iter().zip(&weights) {
        sum += w * f(mid + half * x)?;
    }
    Ok(sum * half)
}

/// Nodes and weights of the n-point Gauss-Hermite rule for the weight
/// e^{-x^2}, by Newton iteration on the normalized Hermite recurrence.
pub fn gauss_hermite(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 2, "a Gauss rule needs at least two nodes");
    let inv_pi_quarter = std::f64::consts::PI.powf(-0.25);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    let nf = n as f64;
    let mut z = 0.0f64;
    for i in 0..m {
        // Largest roots first; each later root seeded from its
        // predecessors (the classic ladder of asymptotic guesses).
        z = match i {
            0 => (2.0 * nf + 1.0).sqrt() - 1.85575 * (2.0 * nf + 1.0).powf(-1.0 / 6.0),
            1 => z - 1.14 * nf.powf(0.426) / z,
            2 => 1.86 * z - 0.86 * nodes[0],
            3 => 1.91 * z - 0.91 * nodes[1],
            _ => 2.0 * z - nodes[i - 2],
        };
        let mut converged = false;
        for _ in 0..100 {
            let mut p1 = inv_pi_quarter;
            let mut p2 = 0.0;
            for j in 1..=n {
                let p3 = p2;
                p2 = p1;
                let jf = j as f64;
                p1 = z * (2.0 / jf).sqrt() * p2 - ((jf - 1.0) / jf).sqrt() * p3;
            }
            let dp = (2.0 * nf).sqrt() * p2;
            let step = p1 / dp;
            z -= step;
            if step.abs() < 1e-14 {
                nodes[i] = z;
                nodes[n - 1 - i] = -z;
                let w = 2.0 / (dp * dp);
                weights[i] = w;
                weights[n - 1 - i] = w;
                converged = true;
                break;
            }
        }
        assert!(converged, "Hermite node {i} of {n} stalled");
    }
    (nodes, weights)
}

/// Expectation of `g` under a centered Gaussian with standard deviation
/// `sigma`, by an n-point Gauss-Hermite rule. Zero sigma is the point
/// mass at 0.
pub fn gaussian_expectation(
    g: &mut dyn FnMut(f64) -> Result<f64>,
    sigma: f64,
    n: usize,
) -> Result<f64> {
    if sigma == 0.0 {
        return g(0.0);
    }
    let (nodes, weights) = gauss_hermite(n);
    let scale = std::f64::consts::SQRT_2 * sigma;
    let mut sum = 0.0;
    for (x, w) in nodes.iter().zip(&weights) {
        sum += w * g(scale * x)?;
    }
    Ok(sum / std::f64::consts::PI.sqrt())
}

/// Average of `g` over one period [0, 2 pi), by the n-point trapezoid
/// rule, which is spectrally accurate for periodic analytic integrands.
pub fn periodic_average(g: &mut dyn FnMut(f64) -> Result<f64>, n: usize) -> Result<f64> {
    let mut sum = 0.0;
    for i in 0..n {
        sum += g(std::f64::consts::TAU * i as f64 / n as f64)?;
    }
    Ok(sum / n as f64)
}

/// Average of `g` over alpha uniform on [0, 1] by an n-point Legendre
/// rule on the sin^2 substitution (same change of variables as
/// [`uniform_alpha_average`], fixed cost instead of adaptive).
pub fn uniform_alpha_expectation(
    g: &mut dyn FnMut(f64) -> Result<f64>,
    n: usize,
) -> Result<f64> {
    legendre_integral(
        &mut |u: f64| {
            let alpha = u.sin().powi(2);
            Ok(g(alpha)? * (2.0 * u).sin())
        },
        0.0,
        std::f64::consts::FRAC_PI_2,
        n,
    )
}
