//! The seven-step token lifecycle.
//!
//! A run proceeds: entangle ancilla and memory with weight alpha, emit the
//! first time-bin photon, let the bank project it in its secret phase
//! basis (collapsing the spins onto the token state), disentangle the
//! ancilla to park the token in memory, re-entangle the ancilla with a
//! second photon, Bell-measure the two spins to teleport the token onto
//! that photon, and let the verifier decode it against the bank's record.
//!
//! Phase bookkeeping: projecting the first photon onto |+-_phi1> writes
//! the conjugated basis phase into the token, so the stored token is
//! sqrt(alpha)|up> +- sqrt(1-alpha) e^{i(theta1-phi1)}|down>. Teleportation
//! adds +theta2 on the Phi Bell branches and -theta2 on the Psi branches
//! (the X correction restores the time-bin order but not the emission
//! phase). The verifier therefore decodes at the negated basis angle, see
//! [`decoding_basis`]; with matched bases and no jitter every branch then
//! satisfies m2 = m1 XOR (r1 XOR r2) deterministically.
//!
//! The functions here are the pure quantum steps; [`session`] wires them
//! into a three-party message exchange with custody tracking.

pub mod session;

use rand::Rng;
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::noise::{BsmModel, NoiseConfig, noisy_bsm};
use crate::qcore::{
    BellLabeling, C64, DensityMatrix, Matrix, PhaseBasis, QubitLabel, StateVector, gates,
    measure_phase_basis,
};

pub use session::{
    LogEntry, Message, Role, RunOutcome, SessionLog, SessionRun, TransmissionPhase,
    run_honest_protocol, run_honest_session,
};

/// How the bank chooses its secret basis angle per run.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum PhiMode {
    /// Fresh uniform angle in [0, 2 pi) each run.
    Random,
    /// Every run uses this angle.
    Fixed(f64),
}

impl PhiMode {
    /// The basis angle for one run; `Random` consumes one draw.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            PhiMode::Random => rng.gen::<f64>() * std::f64::consts::TAU,
            PhiMode::Fixed(phi) => *phi,
        }
    }
}

impl Serialize for PhiMode {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            PhiMode::Fixed(phi) => serializer.serialize_f64(*phi),
            PhiMode::Random => serializer.serialize_str("random"),
        }
    }
}

impl<'de> Deserialize<'de> for PhiMode {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Number(f64),
            Word(String),
        }
        match Raw::deserialize(deserializer)? {
            Raw::Number(phi) => Ok(PhiMode::Fixed(phi)),
            Raw::Word(w) if w == "random" => Ok(PhiMode::Random),
            Raw::Word(w) => Err(D::Error::custom(format!(
                "phi1 must be an angle in radians or the string \"random\", got \"{w}\""
            ))),
        }
    }
}

/// Everything a protocol run depends on besides its RNG stream.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProtocolConfig {
    pub noise: NoiseConfig,
    /// When set (the default), the issuing emission phase is drawn as the
    /// whole phase difference theta1 - theta2 ~ N(0, sigma^2) and the
    /// verification emission is taken phase-clean. When cleared, both
    /// emissions draw independent N(0, sigma^2) phases.
    pub delta_mode: bool,
    pub bsm_model: BsmModel,
    /// Whether the verifier applies the conditional time-bin swap on the
    /// arriving photon when r1 = 1. Without it the Psi Bell branches
    /// decode in the wrong basis; the toggle exists to demonstrate that.
    pub active_correction: bool,
    /// Route the token through the memory-to-ancilla SWAP before the Bell
    /// measurement. Outcome distributions are provably identical either
    /// way; the variant mirrors hardware where the nuclear spin is too
    /// slow to measure directly.
    pub swap_variant: bool,
    pub phi1: PhiMode,
    /// Announcement wiring of the Bell analyzer. Only self-test code ever
    /// installs the corrupted labeling, so this never comes from a
    /// configuration file.
    #[serde(skip)]
    pub bell_labeling: BellLabeling,
}

impl Default for ProtocolConfig {
    fn default() -> Self {
        ProtocolConfig {
            noise: NoiseConfig::default(),
            delta_mode: true,
            bsm_model: BsmModel::Readout,
            active_correction: true,
            swap_variant: false,
            phi1: PhiMode::Random,
            bell_labeling: BellLabeling::standard(),
        }
    }
}

impl ProtocolConfig {
    pub fn validate(&self) -> Result<()> {
        self.noise.validate()?;
        if let PhiMode::Fixed(phi) = self.phi1 {
            if !phi.is_finite() {
                return Err(Error::ParameterOutOfRange { name: "phi1", value: phi });
            }
        }
        Ok(())
    }
}

/// The bank's private record for one issued token.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TokenRecord {
    /// Secret basis angle, reduced to [0, 2 pi).
    pub phi: f64,
    /// Issuance measurement outcome.
    pub m1: u8,
    /// Logical issuance timestamp.
    pub issued_at: u64,
}

/// Classical record of one complete run. `accepted` is always derived
/// from the other bits via [`verify`], never stored independently.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Transcript {
    /// Per-run RNG stream identifier.
    pub seed: u64,
    pub m1: u8,
    pub r1: u8,
    pub r2: u8,
    pub m2: u8,
    pub accepted: bool,
    /// Largest attempt count over the two photon transmissions.
    pub repetitions_used: u32,
    pub sampled_alpha: f64,
    pub sampled_theta1: f64,
    pub sampled_theta2: f64,
}

impl Transcript {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        seed: u64,
        m1: u8,
        r1: u8,
        r2: u8,
        m2: u8,
        repetitions_used: u32,
        sampled_alpha: f64,
        sampled_theta1: f64,
        sampled_theta2: f64,
    ) -> Self {
        Transcript {
            seed,
            m1,
            r1,
            r2,
            m2,
            accepted: verify(m1, m2, r1, r2),
            repetitions_used,
            sampled_alpha,
            sampled_theta1,
            sampled_theta2,
        }
    }

    pub fn csv_header() -> &'static str {
        "seed,m1,r1,r2,m2,accepted,repetitions_used,sampled_alpha,sampled_theta1,sampled_theta2"
    }

    /// One CSV row in header order; reals carry 9 significant digits.
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{:.8e},{:.8e},{:.8e}",
            self.seed,
            self.m1,
            self.r1,
            self.r2,
            self.m2,
            self.accepted,
            self.repetitions_used,
            self.sampled_alpha,
            self.sampled_theta1,
            self.sampled_theta2,
        )
    }

    /// One JSON object per line; float fields keep full double precision
    /// (shortest representation that parses back to the same bits).
    pub fn json_line(&self) -> String {
        serde_json::to_string(self).expect("transcript serializes")
    }
}

/// The strong verification condition m2 = m1 XOR (r1 XOR r2).
pub fn verify(m1: u8, m2: u8, r1: u8, r2: u8) -> bool {
    m2 == m1 ^ (r1 ^ r2)
}

/// Step 1: entangle ancilla and memory as
/// sqrt(alpha)|0 up> + sqrt(1-alpha)|1 down>, built the way the hardware
/// would: rotate the memory spin, then a memory-controlled NOT on the
/// ancilla.
pub fn prepare_am_entanglement(alpha: f64) -> Result<StateVector> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::ParameterOutOfRange { name: "alpha", value: alpha });
    }
    let mut state = StateVector::basis_state(&[QubitLabel::Ancilla, QubitLabel::Memory], 0)?;
    state.apply_unitary(&gates::ry(2.0 * alpha.sqrt().acos()), &[QubitLabel::Memory])?;
    state.apply_unitary(&gates::cnot(), &[QubitLabel::Memory, QubitLabel::Ancilla])?;
    Ok(state)
}

/// Step 2: emit a time-bin photon entangled with the ancilla. The late
/// branch (ancilla excited) carries the apparatus phase e^{i theta}.
pub fn entangle_photon_timebin(state: StateVector, theta: f64) -> Result<StateVector> {
    if state.contains(QubitLabel::Photon) {
        return Err(Error::PhotonAlreadyPresent);
    }
    let photon = StateVector::basis_state(&[QubitLabel::Photon], 0)?;
    let mut joint = state.tensor(&photon)?;
    joint.apply_unitary(
        &gates::controlled_emission(theta),
        &[QubitLabel::Ancilla, QubitLabel::Photon],
    )?;
    Ok(joint)
}

/// Step 3: the bank measures the photon in its secret phase basis. The
/// outcome bit is m1; the spins collapse onto the token state
/// sqrt(alpha)|0 up> +- sqrt(1-alpha) e^{i(theta1-phi1)}|1 down> and the
/// photon leaves the register.
pub fn bank_issue<R: Rng + ?Sized>(
    mut state: StateVector,
    basis: &PhaseBasis,
    rng: &mut R,
) -> Result<(u8, StateVector)> {
    let m1 = measure_phase_basis(&mut state, QubitLabel::Photon, basis, rng)?;
    let spins = state.factor_out(&[QubitLabel::Photon], &basis.state(m1))?;
    Ok((m1, spins))
}

/// Deterministic branch of [`bank_issue`]: probability of outcome `m1`
/// and the collapsed spin state, without sampling. Used by the exact
/// acceptance computation and by oracle tests.
pub fn bank_issue_branch(
    state: &StateVector,
    basis: &PhaseBasis,
    m1: u8,
) -> Result<(f64, StateVector)> {
    let (prob, _) = state.partial_project(&[QubitLabel::Photon], &basis.state(m1))?;
    let mut collapsed = state.clone();
    collapsed.collapse_onto(&[QubitLabel::Photon], &basis.state(m1))?;
    let spins = collapsed.factor_out(&[QubitLabel::Photon], &basis.state(m1))?;
    Ok((prob, spins))
}

/// Which detector clicked behind the bank's interferometer.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Detector {
    D1,
    D2,
}

impl Detector {
    /// D1 announces m1 = 0, D2 announces m1 = 1.
    pub fn bit(self) -> u8 {
        match self {
            Detector::D1 => 0,
            Detector::D2 => 1,
        }
    }
}

/// Step 3, realized as hardware would build it: an unbalanced
/// Mach-Zehnder interferometer. The early bin takes the long arm and
/// picks up the stretcher phase phi1, the late bin takes the short arm,
/// and the two recombine on a 50/50 splitter feeding detectors D1/D2.
/// A D1 click is exactly a |+_phi1> projection (D2: minus), so the
/// collapsed spin state matches [`bank_issue`]'s; the arm phase only
/// contributes an overall factor, which is stripped before returning.
pub fn interferometer_issue<R: Rng + ?Sized>(
    mut state: StateVector,
    phi1: f64,
    rng: &mut R,
) -> Result<(Detector, StateVector)> {
    let one = C64::new(1.0, 0.0);
    let zero = C64::new(0.0, 0.0);
    // Early -> long arm with the stretcher phase, late -> short arm.
    let arms = Matrix::from_rows(2, &[C64::from_polar(1.0, phi1), zero, zero, one]);
    state.apply_unitary(&arms, &[QubitLabel::Photon])?;
    // 50/50 recombination; rows are the detector modes.
    state.apply_unitary(&gates::hadamard(), &[QubitLabel::Photon])?;

    let click_states = [[one, zero], [zero, one]];
    let (p1, _) = state.partial_project(&[QubitLabel::Photon], &click_states[0])?;
    let (p2, _) = state.partial_project(&[QubitLabel::Photon], &click_states[1])?;
    if p1 < 1e-15 && p2 < 1e-15 {
        return Err(Error::DegenerateMeasurement);
    }
    let detector = if rng.gen::<f64>() * (p1 + p2) < p1 { Detector::D1 } else { Detector::D2 };
    let click = &click_states[detector.bit() as usize];
    state.collapse_onto(&[QubitLabel::Photon], click)?;
    let mut spins = state.factor_out(&[QubitLabel::Photon], click)?;
    spins.normalize_global_phase();
    Ok((detector, spins))
}

/// How far the ancilla's reduced purity may fall below 1 after the
/// disentangling step before the state is rejected.
pub const DISENTANGLE_TOL: f64 = 1e-10;

/// Step 4: park the token in memory. The same memory-controlled NOT used
/// for entangling now disentangles the ancilla, which must come out in a
/// pure |0>; the memory keeps the full phase-encoded superposition.
pub fn store_token(mut state: StateVector) -> Result<StateVector> {
    state.apply_unitary(&gates::cnot(), &[QubitLabel::Memory, QubitLabel::Ancilla])?;
    let purity = DensityMatrix::from_pure(&state)
        .partial_trace(&[QubitLabel::Ancilla])?
        .purity();
    if purity < 1.0 - DISENTANGLE_TOL {
        return Err(Error::AncillaStillEntangled { purity });
    }
    let zero = [C64::new(1.0, 0.0), C64::new(0.0, 0.0)];
    state.factor_out(&[QubitLabel::Ancilla], &zero)
}

/// Step 5: fresh ancilla-photon pair (|0 E> + e^{i theta2}|1 L>)/sqrt(2)
/// tensored next to the stored token; the memory is untouched.
pub fn reentangle_photon(memory_state: StateVector, theta2: f64) -> Result<StateVector> {
    let mut pair = StateVector::basis_state(&[QubitLabel::Ancilla, QubitLabel::Photon], 0)?;
    pair.apply_unitary(&gates::ry(std::f64::consts::FRAC_PI_2), &[QubitLabel::Ancilla])?;
    pair.apply_unitary(
        &gates::controlled_emission(theta2),
        &[QubitLabel::Ancilla, QubitLabel::Photon],
    )?;
    memory_state.tensor(&pair)
}

/// Hardware detour: exchange the token between memory and ancilla before
/// the Bell measurement. The Bell projectors are symmetric under this
/// exchange, so every downstream distribution is unchanged.
pub fn swap_memory_to_ancilla(state: &mut StateVector) -> Result<()> {
    state.apply_unitary(&gates::swap(), &[QubitLabel::Memory, QubitLabel::Ancilla])
}

/// The verifier's measurement basis for a token issued at basis angle
/// `phi2`. Issuance conjugates the basis phase into the token
/// (e^{-i phi1} on the late branch), so the decoding interferometer runs
/// at the negated angle; this is the one place that convention lives.
pub fn decoding_basis(phi2: f64) -> PhaseBasis {
    PhaseBasis::new(-phi2)
}

/// Step 6, user side: Bell-measure the two spins, teleporting the token
/// onto the second photon. Returns the announced bits (r1, r2).
pub fn user_bell_measurement<R: Rng + ?Sized>(
    state: &mut StateVector,
    config: &ProtocolConfig,
    rng: &mut R,
) -> Result<(u8, u8)> {
    if config.swap_variant {
        swap_memory_to_ancilla(state)?;
    }
    noisy_bsm(
        state,
        (QubitLabel::Ancilla, QubitLabel::Memory),
        config.noise.f_bsm,
        config.bsm_model,
        &config.bell_labeling,
        rng,
    )
}

/// Step 7, verifier side: apply the time-bin swap announced by r1, then
/// measure the photon against the recorded basis angle. Returns m2.
pub fn verifier_decode<R: Rng + ?Sized>(
    state: &mut StateVector,
    phi2: f64,
    r1: u8,
    config: &ProtocolConfig,
    rng: &mut R,
) -> Result<u8> {
    if config.active_correction && r1 == 1 {
        state.apply_unitary(&gates::pauli_x(), &[QubitLabel::Photon])?;
    }
    measure_phase_basis(state, QubitLabel::Photon, &decoding_basis(phi2), rng)
}

/// Steps 6 and 7 composed: Bell-measure the spins, apply the announced
/// correction, and decode. Returns (r1, r2, m2).
pub fn teleport_and_verify<R: Rng + ?Sized>(
    state: &mut StateVector,
    phi2: f64,
    config: &ProtocolConfig,
    rng: &mut R,
) -> Result<(u8, u8, u8)> {
    let (r1, r2) = user_bell_measurement(state, config, rng)?;
    let m2 = verifier_decode(state, phi2, r1, config, rng)?;
    Ok((r1, r2, m2))
}
