//! Experiment orchestration: exact branch-sum evaluation, Monte Carlo
//! batches, parameter sweeps, and report assembly.
//!
//! The exact path walks the same state machinery the sampled path walks,
//! but instead of drawing outcomes it sums every measurement branch with
//! its Born weight: two issuance outcomes, the two dephasing branches of
//! the storage channel, every Bell outcome with every possible
//! announcement, and both decoder outcomes. Continuous parameters
//! (uniform token weight, Gaussian phase jitter, a randomized basis
//! angle) are then averaged by adaptive quadrature. No probability in
//! this module comes from the closed-form formulas, so agreement with
//! `analytics` is evidence, not circularity.

use crate::analytics::{
    SecurityMetrics, predicted_acceptance, wilson_interval,
};
use crate::analytics::quad::{
    gaussian_expectation, periodic_average, uniform_alpha_expectation,
};
use crate::adversary::ForgeryReport;
use crate::error::{Error, Result};
use crate::noise::{AlphaMode, BsmModel};
use crate::protocol::{
    PhiMode, ProtocolConfig, RunOutcome, bank_issue_branch, decoding_basis,
    entangle_photon_timebin, prepare_am_entanglement, reentangle_photon, run_honest_protocol,
    store_token, swap_memory_to_ancilla,
};
use crate::qcore::{
    BellLabeling, Matrix, PhaseBasis, QubitLabel, StateVector, bell_probabilities, bell_state,
    gates, phase_basis_probabilities,
};
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Branches below this weight contribute nothing at double precision
/// and are skipped rather than renormalized.
const BRANCH_FLOOR: f64 = 1e-15;

/// Legendre order for the token-weight average. The substituted
/// integrand is a low-degree trig expression, so this is far past the
/// point of double-precision saturation.
const ALPHA_ORDER: usize = 40;

/// Trapezoid points for averaging over a randomized basis angle; the
/// acceptance is a trig polynomial of tiny degree in that angle.
const PHI_ORDER: usize = 64;

/// Hermite order for the phase-jitter average. The integrand oscillates
/// on the scale of sigma, so the order grows with it; the floor of 48
/// is already saturated for the sigma <= 1 regime the sweeps use.
fn gauss_order(sigma: f64) -> usize {
    48.max((32.0 * sigma).ceil() as usize)
}

fn exact_pair() -> (QubitLabel, QubitLabel) {
    // Must mirror the pair order the sampled path hands to the Bell
    // measurement.
    (QubitLabel::Ancilla, QubitLabel::Memory)
}

/// Acceptance probability of the decoder for one delivered photon state,
/// given the bank's bit and the announced teleportation bits.
fn decode_acceptance(
    photon: &StateVector,
    m1: u8,
    announced: (u8, u8),
    decode: &PhaseBasis,
    config: &ProtocolConfig,
) -> Result<f64> {
    let mut photon = photon.clone();
    if config.active_correction && announced.0 == 1 {
        photon.apply_unitary(&gates::pauli_x(), &[QubitLabel::Photon])?;
    }
    let (p0, p1) = phase_basis_probabilities(&photon, QubitLabel::Photon, decode)?;
    let expected = m1 ^ announced.0 ^ announced.1;
    Ok(if expected == 0 { p0 } else { p1 })
}

/// The photon state left behind by collapsing the spin pair onto Bell
/// state `index`, normalized by the branch weight `prob`.
fn collapse_to_photon(state: &StateVector, index: usize, prob: f64) -> Result<StateVector> {
    let (_, residual) = state.partial_project(
        &[exact_pair().0, exact_pair().1],
        &bell_state(index),
    )?;
    let scale = prob.sqrt();
    let amps = residual.into_iter().map(|a| a / scale).collect();
    StateVector::from_amplitudes(&[QubitLabel::Photon], amps)
}

/// Sum over Bell outcomes and announcements for a readout-model
/// measurement at fidelity `f`: truthful announcement with probability
/// f, two fresh uniform bits otherwise. `f = 1` is the ideal sum.
fn readout_acceptance(
    state: &StateVector,
    m1: u8,
    decode: &PhaseBasis,
    config: &ProtocolConfig,
    f: f64,
) -> Result<f64> {
    let probs = bell_probabilities(state, exact_pair())?;
    let mut acc = 0.0;
    for (index, &prob) in probs.iter().enumerate() {
        if prob < BRANCH_FLOOR {
            continue;
        }
        let photon = collapse_to_photon(state, index, prob)?;
        let truthful = config.bell_labeling.bits(index);
        for announced in [(0u8, 0u8), (0, 1), (1, 0), (1, 1)] {
            let weight = if announced == truthful {
                f + (1.0 - f) * 0.25
            } else {
                (1.0 - f) * 0.25
            };
            if weight < BRANCH_FLOOR {
                continue;
            }
            acc += prob * weight * decode_acceptance(&photon, m1, announced, decode, config)?;
        }
    }
    Ok(acc)
}

/// Bell-measurement branch sum under the configured infidelity model.
fn bsm_acceptance(
    state: &StateVector,
    m1: u8,
    decode: &PhaseBasis,
    config: &ProtocolConfig,
) -> Result<f64> {
    let f = config.noise.f_bsm;
    match config.bsm_model {
        BsmModel::Readout => readout_acceptance(state, m1, decode, config, f),
        BsmModel::Depolarizing => {
            let ideal = readout_acceptance(state, m1, decode, config, 1.0)?;
            if f >= 1.0 {
                return Ok(ideal);
            }
            let paulis: [Matrix; 4] = [
                Matrix::identity(2),
                gates::pauli_x(),
                gates::pauli_y(),
                gates::pauli_z(),
            ];
            let mut scrambled = 0.0;
            for first in &paulis {
                for second in &paulis {
                    let mut kicked = state.clone();
                    kicked.apply_unitary(first, &[exact_pair().0])?;
                    kicked.apply_unitary(second, &[exact_pair().1])?;
                    scrambled += readout_acceptance(&kicked, m1, decode, config, 1.0)? / 16.0;
                }
            }
            Ok(f * ideal + (1.0 - f) * scrambled)
        }
    }
}

/// Acceptance probability with every continuous parameter pinned:
/// issuance and storage and verification walked branch by branch.
fn exact_fixed_point(
    alpha: f64,
    theta1: f64,
    theta2: f64,
    phi1: f64,
    config: &ProtocolConfig,
) -> Result<f64> {
    let noise = &config.noise;
    let basis1 = PhaseBasis::new(phi1);
    let decode = decoding_basis(phi1 - noise.delta_phi);
    let joint = entangle_photon_timebin(prepare_am_entanglement(alpha)?, theta1)?;
    // Phase-flip unraveling of the storage channel: identity or Z with
    // fixed weights, exactly reproducing the off-diagonal decay.
    let p_flip = 0.5 * (1.0 - (-noise.t_s / noise.t_m).exp());

    let mut total = 0.0;
    for m1 in 0u8..2 {
        let (p_m1, spins) = bank_issue_branch(&joint, &basis1, m1)?;
        if p_m1 < BRANCH_FLOOR {
            continue;
        }
        let token = store_token(spins)?;
        for (p_branch, flip) in [(1.0 - p_flip, false), (p_flip, true)] {
            if p_branch < BRANCH_FLOOR {
                continue;
            }
            let mut stored = token.clone();
            if flip {
                stored.apply_unitary(&gates::pauli_z(), &[QubitLabel::Memory])?;
            }
            let mut state = reentangle_photon(stored, theta2)?;
            if config.swap_variant {
                swap_memory_to_ancilla(&mut state)?;
            }
            total += p_m1 * p_branch * bsm_acceptance(&state, m1, &decode, config)?;
        }
    }
    Ok(total)
}

/// Gaussian layer over the phase jitter. Delta mode puts the whole
/// offset in the issuance phase; independent mode averages both draws.
fn theta_average(alpha: f64, phi1: f64, config: &ProtocolConfig) -> Result<f64> {
    let sigma = config.noise.sigma_theta;
    if sigma == 0.0 {
        return exact_fixed_point(alpha, 0.0, 0.0, phi1, config);
    }
    let order = gauss_order(sigma);
    if config.delta_mode {
        gaussian_expectation(
            &mut |t1| exact_fixed_point(alpha, t1, 0.0, phi1, config),
            sigma,
            order,
        )
    } else {
        gaussian_expectation(
            &mut |t1| {
                gaussian_expectation(
                    &mut |t2| exact_fixed_point(alpha, t1, t2, phi1, config),
                    sigma,
                    order,
                )
            },
            sigma,
            order,
        )
    }
}

fn alpha_average(phi1: f64, config: &ProtocolConfig) -> Result<f64> {
    match config.noise.alpha_mode {
        AlphaMode::Fixed(alpha) => theta_average(alpha, phi1, config),
        AlphaMode::Uniform => {
            uniform_alpha_expectation(&mut |alpha| theta_average(alpha, phi1, config), ALPHA_ORDER)
        }
    }
}

/// Honest acceptance probability of a completed run, by branch
/// summation and quadrature alone. Photon loss and the retry budget
/// only decide whether a run completes, so they do not enter.
///
/// A randomized basis angle is averaged only when it matters: with the
/// standard Bell labeling acceptance is angle-independent (verified by
/// test), so a representative angle is evaluated; a corrupted labeling
/// breaks that symmetry and gets the full average.
pub fn exact_acceptance(config: &ProtocolConfig) -> Result<f64> {
    config.validate()?;
    let p = match config.phi1 {
        PhiMode::Fixed(phi1) => alpha_average(phi1, config),
        PhiMode::Random => {
            if config.bell_labeling == BellLabeling::standard() {
                alpha_average(0.0, config)
            } else {
                periodic_average(&mut |phi1| alpha_average(phi1, config), PHI_ORDER)
            }
        }
    }?;
    // Branch sums overshoot the endpoints by a few ulps; this is still a
    // probability.
    Ok(p.clamp(0.0, 1.0))
}

/// Runs `n_trials` honest sessions, trial i on stream i of the master
/// seed, so the outcome set is identical for any worker count.
pub fn run_trials(
    config: &ProtocolConfig,
    n_trials: u64,
    master_seed: u64,
) -> Result<Vec<RunOutcome>> {
    config.validate()?;
    (0..n_trials)
        .into_par_iter()
        .map(|trial| {
            let mut rng = ChaCha12Rng::seed_from_u64(master_seed);
            rng.set_stream(trial);
            run_honest_protocol(config, trial, &mut rng)
        })
        .collect()
}

/// Aggregate of a Monte Carlo batch. The estimate and interval are over
/// completed runs; runs that exhausted the retry budget are counted
/// separately, never folded into the acceptance rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McResult {
    pub n_trials: u64,
    pub completed: u64,
    pub exhausted: u64,
    pub accepted: u64,
    pub estimate: f64,
    pub ci: (f64, f64),
}

/// Monte Carlo acceptance estimate with a Wilson 95% interval.
pub fn run_mc(config: &ProtocolConfig, n_trials: u64, master_seed: u64) -> Result<McResult> {
    if n_trials < 1 {
        return Err(Error::ParameterOutOfRange { name: "n_trials", value: n_trials as f64 });
    }
    let outcomes = run_trials(config, n_trials, master_seed)?;
    let mut completed = 0u64;
    let mut accepted = 0u64;
    for outcome in &outcomes {
        if let Some(t) = outcome.transcript() {
            completed += 1;
            accepted += u64::from(t.accepted);
        }
    }
    if completed == 0 {
        return Err(Error::AllTrialsExhausted);
    }
    Ok(McResult {
        n_trials,
        completed,
        exhausted: n_trials - completed,
        accepted,
        estimate: accepted as f64 / completed as f64,
        ci: wilson_interval(accepted, completed),
    })
}

/// Which noise knob a sweep varies.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SweepParameter {
    #[serde(rename = "t_s")]
    StorageTime,
    #[serde(rename = "t_m")]
    MemoryLifetime,
    #[serde(rename = "sigma_theta")]
    SigmaTheta,
    #[serde(rename = "delta_phi")]
    DeltaPhi,
    #[serde(rename = "f_bsm")]
    BsmFidelity,
    #[serde(rename = "p_loss")]
    LossProbability,
    #[serde(rename = "alpha")]
    Alpha,
}

impl SweepParameter {
    pub fn name(self) -> &'static str {
        match self {
            SweepParameter::StorageTime => "t_s",
            SweepParameter::MemoryLifetime => "t_m",
            SweepParameter::SigmaTheta => "sigma_theta",
            SweepParameter::DeltaPhi => "delta_phi",
            SweepParameter::BsmFidelity => "f_bsm",
            SweepParameter::LossProbability => "p_loss",
            SweepParameter::Alpha => "alpha",
        }
    }

    /// The base configuration with this knob set to `value`. Sweeping
    /// alpha pins the token weight to the value, whatever mode the base
    /// config used.
    pub fn apply(self, base: &ProtocolConfig, value: f64) -> ProtocolConfig {
        let mut config = *base;
        match self {
            SweepParameter::StorageTime => config.noise.t_s = value,
            SweepParameter::MemoryLifetime => config.noise.t_m = value,
            SweepParameter::SigmaTheta => config.noise.sigma_theta = value,
            SweepParameter::DeltaPhi => config.noise.delta_phi = value,
            SweepParameter::BsmFidelity => config.noise.f_bsm = value,
            SweepParameter::LossProbability => config.noise.p_loss = value,
            SweepParameter::Alpha => config.noise.alpha_mode = AlphaMode::Fixed(value),
        }
        config
    }
}

/// A grid of values for one knob, with the Monte Carlo budget per point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub parameter: SweepParameter,
    pub values: Vec<f64>,
    pub trials: u64,
    pub seed: u64,
    /// Rounds used for the n-round forgery bound column.
    pub n_rounds: u32,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        if self.values.is_empty() {
            return Err(Error::EmptySweep);
        }
        if self.trials < 1 {
            return Err(Error::ParameterOutOfRange {
                name: "trials",
                value: self.trials as f64,
            });
        }
        if self.n_rounds < 1 {
            return Err(Error::ParameterOutOfRange {
                name: "n_rounds",
                value: self.n_rounds as f64,
            });
        }
        Ok(())
    }
}

/// One experiment point: simulation against prediction, with the
/// security metrics derived from the analytic acceptance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SecurityReport {
    /// Swept value when this row belongs to a sweep table.
    pub parameter_value: Option<f64>,
    pub exact_p: f64,
    pub mc: McResult,
    pub analytic_p: f64,
    pub metrics: SecurityMetrics,
    /// Filled by forgery experiments; sweep rows carry the analytic
    /// bound in `metrics` instead of re-running the forger per point.
    pub forgery: Option<ForgeryReport>,
}

impl SecurityReport {
    pub fn csv_header() -> &'static str {
        "parameter_value,exact_p,mc_p,ci_lo,ci_hi,analytic_p,soundness,forge_n"
    }

    pub fn csv_row(&self) -> String {
        let value = self
            .parameter_value
            .map(|v| format!("{v:.8e}"))
            .unwrap_or_default();
        format!(
            "{},{:.8e},{:.8e},{:.8e},{:.8e},{:.8e},{:.8e},{:.8e}",
            value,
            self.exact_p,
            self.mc.estimate,
            self.mc.ci.0,
            self.mc.ci.1,
            self.analytic_p,
            self.metrics.soundness_gap,
            self.metrics.forgery_acceptance_n_rounds,
        )
    }
}

/// Builds the report for one configuration: exact, sampled, and
/// analytic acceptance side by side.
pub fn report_point(
    config: &ProtocolConfig,
    trials: u64,
    seed: u64,
    n_rounds: u32,
) -> Result<SecurityReport> {
    let exact_p = exact_acceptance(config)?;
    let mc = run_mc(config, trials, seed)?;
    let analytic_p = predicted_acceptance(config)?;
    Ok(SecurityReport {
        parameter_value: None,
        exact_p,
        mc,
        analytic_p,
        metrics: SecurityMetrics::new(analytic_p, n_rounds),
        forgery: None,
    })
}

/// Runs the grid. Each point derives its own master seed on a fixed
/// odd stride so no two points share trial streams.
pub fn sweep(spec: &SweepSpec, base: &ProtocolConfig) -> Result<Vec<SecurityReport>> {
    spec.validate()?;
    spec.values
        .iter()
        .enumerate()
        .map(|(i, &value)| {
            let config = spec.parameter.apply(base, value);
            let point_seed = spec
                .seed
                .wrapping_add((i as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
            let mut report = report_point(&config, spec.trials, point_seed, spec.n_rounds)?;
            report.parameter_value = Some(value);
            Ok(report)
        })
        .collect()
}

/// Renders sweep rows as the pinned CSV table.
pub fn sweep_csv(rows: &[SecurityReport]) -> String {
    let mut out = String::from(SecurityReport::csv_header());
    out.push('\n');
    for row in rows {
        out.push_str(&row.csv_row());
        out.push('\n');
    }
    out
}
