//! Closed-form security metrics and their quadrature cross-checks.
//!
//! Everything here is a plain function of protocol parameters; nothing
//! samples or touches quantum state. The simulator in `harness` is judged
//! against these formulas, and the formulas in turn are judged against
//! [`mean_verification_fidelity_numeric`], which integrates the per-run
//! fidelity directly and shares no algebra with the closed forms beyond
//! the integrand itself.

pub mod quad;

use crate::error::{Error, Result};
use crate::noise::AlphaMode;
use crate::protocol::ProtocolConfig;
use serde::{Deserialize, Serialize};
use std::f64::consts::FRAC_PI_4;

/// Probability that verification accepts a single honest run at fixed
/// parameters: 1/2 [1 + 2 sqrt(alpha(1-alpha)) cos(delta_theta - delta_phi)].
///
/// `delta_theta` is the net time-bin phase offset between issuance and
/// verification and `delta_phi` the offset between the bank's encoding
/// basis and the verifier's decoding basis. Angles are unrestricted;
/// `alpha` must be a weight in [0, 1].
pub fn verification_fidelity(alpha: f64, delta_theta: f64, delta_phi: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::ParameterOutOfRange { name: "alpha", value: alpha });
    }
    let interference = 2.0 * (alpha * (1.0 - alpha)).sqrt();
    Ok(0.5 * (1.0 + interference * (delta_theta - delta_phi).cos()))
}

/// Mean acceptance probability over uniform alpha and Gaussian phase
/// noise, with memory decay over the storage interval:
/// 1/2 [1 + (pi/4) e^{-t_s/t_m} e^{-sigma^2/2} cos(delta_phi)].
///
/// The pi/4 is the uniform-alpha average of the interference weight
/// 2 sqrt(alpha(1-alpha)); the Gaussian factor is the characteristic
/// function of the phase jitter.
pub fn mean_verification_fidelity(
    t_s: f64,
    t_m: f64,
    sigma_theta: f64,
    delta_phi: f64,
) -> Result<f64> {
    if t_m <= 0.0 {
        return Err(Error::ParameterOutOfRange { name: "t_m", value: t_m });
    }
    if t_s < 0.0 {
        return Err(Error::ParameterOutOfRange { name: "t_s", value: t_s });
    }
    if sigma_theta < 0.0 {
        return Err(Error::ParameterOutOfRange {
            name: "sigma_theta",
            value: sigma_theta,
        });
    }
    let damping = (-t_s / t_m).exp() * (-0.5 * sigma_theta * sigma_theta).exp();
    Ok(0.5 * (1.0 + FRAC_PI_4 * damping * delta_phi.cos()))
}

/// Tolerance the quadrature oracle is driven to. Well below the 1e-8
/// agreement the closed form is held to, so quadrature error never masks
/// a formula error.
const NUMERIC_TOL: f64 = 1e-9;

/// Quadrature oracle for [`mean_verification_fidelity`]: averages
/// [`verification_fidelity`] over alpha uniform on [0, 1] and the phase
/// offset Gaussian with standard deviation `sigma_theta`, the memory
/// decay damping only the interference term. No product-of-averages
/// shortcut: the two averages are nested as written.
pub fn mean_verification_fidelity_numeric(
    t_s: f64,
    t_m: f64,
    sigma_theta: f64,
    delta_phi: f64,
) -> Result<f64> {
    if t_m <= 0.0 {
        return Err(Error::ParameterOutOfRange { name: "t_m", value: t_m });
    }
    if t_s < 0.0 {
        return Err(Error::ParameterOutOfRange { name: "t_s", value: t_s });
    }
    if sigma_theta < 0.0 {
        return Err(Error::ParameterOutOfRange {
            name: "sigma_theta",
            value: sigma_theta,
        });
    }
    let decay = (-t_s / t_m).exp();
    quad::uniform_alpha_average(
        &mut |alpha: f64| {
            quad::gaussian_average(
                &mut |delta_theta: f64| {
                    let ideal = verification_fidelity(alpha, delta_theta, delta_phi)?;
                    // Damp only the interference part; the 1/2 floor is
                    // basis-independent shot noise and does not decay.
                    Ok(0.5 + decay * (ideal - 0.5))
                },
                sigma_theta,
                NUMERIC_TOL / 50.0,
            )
        },
        NUMERIC_TOL,
    )
}

/// Gap between honest acceptance and the best forgery acceptance. The
/// protocol is useful only while this is positive.
pub fn soundness_gap(mean_fidelity: f64, forgery_acceptance: f64) -> f64 {
    mean_fidelity - forgery_acceptance
}

/// Probability that a forger with per-round acceptance bounded by
/// `mean_fidelity` survives `n_rounds` independent verifications.
pub fn forgery_bound(mean_fidelity: f64, n_rounds: u32) -> f64 {
    mean_fidelity.powi(n_rounds as i32)
}

/// Headline security numbers for one parameter point.
///
/// `soundness_gap` is the honest-minus-forger acceptance difference;
/// `forgery_acceptance_single` and `forgery_acceptance_n_rounds` are the
/// forger's conventional acceptance probabilities, reported alongside the
/// gap so neither convention has to be inferred from the other.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SecurityMetrics {
    pub mean_fidelity: f64,
    pub forgery_acceptance_single: f64,
    pub soundness_gap: f64,
    pub forgery_acceptance_n_rounds: f64,
}

impl SecurityMetrics {
    /// Metrics for a token holder facing `n_rounds` verifications, with
    /// the forger held to the guessing baseline of 1/2 per round.
    pub fn new(mean_fidelity: f64, n_rounds: u32) -> Self {
        SecurityMetrics {
            mean_fidelity,
            forgery_acceptance_single: 0.5,
            soundness_gap: soundness_gap(mean_fidelity, 0.5),
            forgery_acceptance_n_rounds: forgery_bound(mean_fidelity, n_rounds),
        }
    }
}

/// Two-sided 95% normal quantile, frozen to a literal so confidence
/// intervals are bit-reproducible across platforms.
pub const WILSON_Z: f64 = 1.959_963_984_540_054;

/// Wilson score interval for a binomial proportion at 95% confidence.
/// Chosen over the normal approximation because it stays a valid,
/// nondegenerate interval at proportions near 0 and 1, where acceptance
/// estimates in this crate actually live. Always contains the point
/// estimate. Zero trials means total ignorance: (0, 1).
pub fn wilson_interval(successes: u64, trials: u64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    debug_assert!(successes <= trials);
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = WILSON_Z * WILSON_Z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = WILSON_Z / denom * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
    // The boundary endpoints are exactly 0 and 1 analytically; snap them
    // so rounding cannot pull an all-successes interval below 1.
    let lo = if successes == 0 { 0.0 } else { (center - half).max(0.0) };
    let hi = if successes == trials { 1.0 } else { (center + half).min(1.0) };
    (lo, hi)
}

/// Honest acceptance probability predicted for a full protocol
/// configuration, used as the analytic reference in parameter sweeps.
///
/// Three effects fold into the base formula:
/// - fixed alpha replaces the pi/4 average with 2 sqrt(alpha(1-alpha));
/// - independently drawn issue and verify phases double the jitter
///   variance, since every teleportation branch sees theta1 +/- theta2;
/// - an unfaithful Bell measurement mixes in a guessing branch. Both
///   readout and depolarizing models land on f * p + (1 - f)/2: a
///   uniformly random Pauli pair twirls the delivered photon state to
///   the maximally mixed one, which accepts with probability exactly 1/2,
///   the same as a scrambled readout.
///
/// Photon loss changes how often a run completes, never the acceptance
/// of a completed run, so it does not appear here.
pub fn predicted_acceptance(config: &ProtocolConfig) -> Result<f64> {
    config.validate()?;
    let noise = &config.noise;
    let weight = match noise.alpha_mode {
        AlphaMode::Fixed(alpha) => 2.0 * (alpha * (1.0 - alpha)).sqrt(),
        AlphaMode::Uniform => FRAC_PI_4,
    };
    let variance = if config.delta_mode {
        noise.sigma_theta * noise.sigma_theta
    } else {
        2.0 * noise.sigma_theta * noise.sigma_theta
    };
    let damping = (-noise.t_s / noise.t_m).exp() * (-0.5 * variance).exp();
    let ideal = 0.5 * (1.0 + weight * damping * noise.delta_phi.cos());
    Ok(noise.f_bsm * ideal + (1.0 - noise.f_bsm) * 0.5)
}
