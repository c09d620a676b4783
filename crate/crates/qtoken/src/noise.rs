//! Physical imperfection model and its samplers.
//!
//! Five imperfections are modeled: an unbalanced or randomly drawn
//! issuance weight alpha, Gaussian phase jitter on the entangling
//! emissions, a fixed offset between the issuing and decoding basis
//! angles, memory dephasing over the storage interval, and an imperfect
//! Bell-state measurement. Photon transmission is lossy with a bounded
//! retry budget per transmission.
//!
//! Every sampler draws from a caller-supplied RNG, so a run's noise
//! trajectory is a pure function of its seed.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::qcore::{
    BellLabeling, KrausChannel, QubitLabel, StateVector, gates, measure_bell,
};

/// How the issuance weight alpha is chosen for a run.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum AlphaMode {
    /// Every run uses this weight.
    Fixed(f64),
    /// Each run draws a fresh weight uniformly from [0, 1).
    Uniform,
}

impl Serialize for AlphaMode {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            AlphaMode::Fixed(a) => serializer.serialize_f64(*a),
            AlphaMode::Uniform => serializer.serialize_str("uniform"),
        }
    }
}

impl<'de> Deserialize<'de> for AlphaMode {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Number(f64),
            Word(String),
        }
        match Raw::deserialize(deserializer)? {
            Raw::Number(a) => Ok(AlphaMode::Fixed(a)),
            Raw::Word(w) if w == "uniform" => Ok(AlphaMode::Uniform),
            Raw::Word(w) => Err(D::Error::custom(format!(
                "alpha_mode must be a number in [0, 1] or the string \"uniform\", got \"{w}\""
            ))),
        }
    }
}

/// How Bell-measurement infidelity enters the simulation.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BsmModel {
    /// The measurement collapses ideally but the announced bits are
    /// replaced by fresh uniform bits with probability 1 - f_bsm.
    #[default]
    Readout,
    /// With probability 1 - f_bsm a uniformly random two-qubit Pauli hits
    /// the measured pair first; the announcement is then truthful.
    Depolarizing,
}

/// All physical imperfection parameters. The default is the noiseless
/// point: balanced fixed alpha, no jitter, matched bases, no storage
/// decay, perfect Bell measurement, lossless transmission.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseConfig {
    /// Issuance weight of the spin-up branch, or a fresh uniform draw per
    /// run.
    pub alpha_mode: AlphaMode,
    /// Standard deviation of the Gaussian phase jitter on each entangling
    /// emission, in radians.
    pub sigma_theta: f64,
    /// Fixed offset between the issuing and decoding basis angles, in
    /// radians.
    pub delta_phi: f64,
    /// Storage time between issuance and teleportation.
    pub t_s: f64,
    /// Memory coherence lifetime, in the same units as `t_s`.
    pub t_m: f64,
    /// Probability that the Bell measurement behaves ideally.
    pub f_bsm: f64,
    /// Per-attempt probability that a transmitted photon is lost.
    pub p_loss: f64,
    /// Attempt budget for each of the two photon transmissions.
    pub max_repetitions: u32,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        NoiseConfig {
            alpha_mode: AlphaMode::Fixed(0.5),
            sigma_theta: 0.0,
            delta_phi: 0.0,
            t_s: 0.0,
            t_m: 1.0,
            f_bsm: 1.0,
            p_loss: 0.0,
            max_repetitions: 20,
        }
    }
}

impl NoiseConfig {
    pub fn validate(&self) -> Result<()> {
        if let AlphaMode::Fixed(a) = self.alpha_mode {
            if !(0.0..=1.0).contains(&a) {
                return Err(Error::ParameterOutOfRange { name: "alpha_mode", value: a });
            }
        }
        if !self.sigma_theta.is_finite() || self.sigma_theta < 0.0 {
            return Err(Error::ParameterOutOfRange {
                name: "sigma_theta",
                value: self.sigma_theta,
            });
        }
        if !self.delta_phi.is_finite() {
            return Err(Error::ParameterOutOfRange { name: "delta_phi", value: self.delta_phi });
        }
        if !self.t_s.is_finite() || self.t_s < 0.0 {
            return Err(Error::ParameterOutOfRange { name: "t_s", value: self.t_s });
        }
        if !self.t_m.is_finite() || self.t_m <= 0.0 {
            return Err(Error::ParameterOutOfRange { name: "t_m", value: self.t_m });
        }
        if !(0.0..=1.0).contains(&self.f_bsm) {
            return Err(Error::ParameterOutOfRange { name: "f_bsm", value: self.f_bsm });
        }
        if !(0.0..=1.0).contains(&self.p_loss) {
            return Err(Error::ParameterOutOfRange { name: "p_loss", value: self.p_loss });
        }
        if self.max_repetitions == 0 {
            return Err(Error::ParameterOutOfRange { name: "max_repetitions", value: 0.0 });
        }
        Ok(())
    }

    /// True when every parameter sits at its noiseless default (alpha may
    /// still differ from 1/2).
    pub fn is_noiseless(&self) -> bool {
        self.sigma_theta == 0.0
            && self.delta_phi == 0.0
            && self.t_s == 0.0
            && self.f_bsm == 1.0
            && self.p_loss == 0.0
    }
}

pub fn sample_alpha<R: Rng + ?Sized>(mode: AlphaMode, rng: &mut R) -> f64 {
    match mode {
        AlphaMode::Fixed(a) => a,
        AlphaMode::Uniform => rng.gen::<f64>(),
    }
}

/// One Gaussian phase-jitter draw; sigma = 0 returns exactly 0 without
/// consuming randomness.
pub fn sample_phase_noise<R: Rng + ?Sized>(sigma: f64, rng: &mut R) -> f64 {
    if sigma == 0.0 {
        return 0.0;
    }
    // sigma has been validated non-negative and finite.
    Normal::new(0.0, sigma).expect("validated sigma").sample(rng)
}

/// Phase-flip channel whose off-diagonal damping over the storage interval
/// is exactly e^{-t_s/t_m}.
pub fn memory_dephasing_channel(t_s: f64, t_m: f64) -> Result<KrausChannel> {
    if !t_m.is_finite() || t_m <= 0.0 {
        return Err(Error::ParameterOutOfRange { name: "t_m", value: t_m });
    }
    if !(t_s >= 0.0) {
        return Err(Error::ParameterOutOfRange { name: "t_s", value: t_s });
    }
    let p = 0.5 * (1.0 - (-t_s / t_m).exp());
    KrausChannel::phase_flip(p)
}

/// One transmission attempt; `true` means the photon arrived.
pub fn attempt_photon<R: Rng + ?Sized>(p_loss: f64, rng: &mut R) -> bool {
    rng.gen::<f64>() >= p_loss
}

/// Bell measurement at fidelity `f_bsm` under the chosen infidelity model.
/// The register always collapses onto a Bell state; only what gets
/// announced (readout model) or what gets measured (depolarizing model)
/// degrades.
pub fn noisy_bsm<R: Rng + ?Sized>(
    state: &mut StateVector,
    pair: (QubitLabel, QubitLabel),
    f_bsm: f64,
    model: BsmModel,
    labeling: &BellLabeling,
    rng: &mut R,
) -> Result<(u8, u8)> {
    if !(0.0..=1.0).contains(&f_bsm) {
        return Err(Error::ParameterOutOfRange { name: "f_bsm", value: f_bsm });
    }
    match model {
        BsmModel::Readout => {
            let truth = measure_bell(state, pair, labeling, rng)?;
            if rng.gen::<f64>() < f_bsm {
                Ok(truth)
            } else {
                Ok((rng.gen::<bool>() as u8, rng.gen::<bool>() as u8))
            }
        }
        BsmModel::Depolarizing => {
            if rng.gen::<f64>() >= f_bsm {
                let paulis = [
                    crate::qcore::Matrix::identity(2),
                    gates::pauli_x(),
                    gates::pauli_y(),
                    gates::pauli_z(),
                ];
                let pick = rng.gen_range(0..16usize);
                state.apply_unitary(&paulis[pick / 4], &[pair.0])?;
                state.apply_unitary(&paulis[pick % 4], &[pair.1])?;
            }
            measure_bell(state, pair, labeling, rng)
        }
    }
}
