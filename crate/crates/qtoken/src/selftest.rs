//! Built-in invariant suite behind the `selftest` subcommand.
//!
//! Every check is deterministic: fixed seeds, fixed grids, exact
//! tolerances. A check whose machinery errors out counts as failed with
//! the error text as its detail, so a broken build cannot pass by
//! crashing early.

use std::f64::consts::{FRAC_PI_2, PI};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use crate::analytics::{mean_verification_fidelity, mean_verification_fidelity_numeric};
use crate::error::Result;
use crate::harness::{exact_acceptance, run_mc};
use crate::noise::{AlphaMode, memory_dephasing_channel};
use crate::protocol::{
    ProtocolConfig, bank_issue_branch, decoding_basis, entangle_photon_timebin,
    interferometer_issue, prepare_am_entanglement, reentangle_photon, store_token,
};
use crate::qcore::{
    BellLabeling, C64, DensityMatrix, KrausChannel, Matrix, PhaseBasis, QubitLabel, StateVector,
    bell_probabilities, bell_state, gates, phase_basis_probabilities,
};

/// One line of selftest output.
#[derive(Clone, Debug)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl CheckResult {
    fn from_deviation(name: &'static str, deviation: f64, tol: f64) -> Self {
        CheckResult {
            name,
            passed: deviation.is_finite() && deviation <= tol,
            detail: format!("max deviation {deviation:.3e}, tolerance {tol:.0e}"),
        }
    }
}

fn guarded(name: &'static str, body: impl FnOnce() -> Result<CheckResult>) -> CheckResult {
    body().unwrap_or_else(|e| CheckResult {
        name,
        passed: false,
        detail: format!("did not run: {e}"),
    })
}

/// Runs every check. The Bell labeling is injectable so the negative
/// control (a miswired analyzer must fail the teleportation check) can
/// be demonstrated from the command line; normal operation passes
/// [`BellLabeling::standard`].
pub fn run_selftest(labeling: BellLabeling) -> Vec<CheckResult> {
    vec![
        guarded("gate unitarity", gate_unitarity),
        guarded("channel completeness", channel_completeness),
        guarded("Bell basis completeness", bell_completeness),
        guarded("teleportation determinism", || teleportation_determinism(labeling)),
        guarded("closed form vs quadrature", closed_form_vs_quadrature),
        guarded("interferometer equivalence", interferometer_equivalence),
        guarded("dephasing exactness", dephasing_exactness),
        guarded("channel mixture agreement", channel_mixture_agreement),
        guarded("norm preservation", norm_preservation),
        guarded("exact vs sampled acceptance", exact_vs_sampled),
    ]
}

/// True when every check passed.
pub fn all_passed(results: &[CheckResult]) -> bool {
    results.iter().all(|r| r.passed)
}

fn gate_unitarity() -> Result<CheckResult> {
    let zoo: Vec<(&str, Matrix)> = vec![
        ("x", gates::pauli_x()),
        ("y", gates::pauli_y()),
        ("z", gates::pauli_z()),
        ("h", gates::hadamard()),
        ("phase", gates::phase_shift(0.7)),
        ("ry", gates::ry(1.1)),
        ("cnot", gates::cnot()),
        ("swap", gates::swap()),
        ("emission", gates::controlled_emission(0.9)),
        ("cphase", gates::controlled(&gates::phase_shift(2.3))),
    ];
    let mut worst = 0.0f64;
    for (_, gate) in &zoo {
        worst = worst.max(gate.unitarity_deviation());
    }
    Ok(CheckResult::from_deviation("gate unitarity", worst, 1e-12))
}

fn channel_completeness() -> Result<CheckResult> {
    let mut worst = 0.0f64;
    for &p in &[0.0, 0.3, 1.0] {
        worst = worst.max(KrausChannel::phase_flip(p)?.completeness_deviation());
    }
    worst = worst.max(memory_dephasing_channel(1.3, 2.0)?.completeness_deviation());
    worst = worst.max(KrausChannel::identity(2).completeness_deviation());
    Ok(CheckResult::from_deviation("channel completeness", worst, 1e-12))
}

fn bell_completeness() -> Result<CheckResult> {
    let mut worst = 0.0f64;
    for i in 0..4 {
        for j in 0..4 {
            let a = bell_state(i);
            let b = bell_state(j);
            let inner: C64 = a.iter().zip(&b).map(|(x, y)| x.conj() * y).sum();
            let expect = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((inner - expect).norm());
        }
    }
    // The four projectors must resolve the identity on any state.
    let mut rng = ChaCha12Rng::seed_from_u64(5);
    let pair = (QubitLabel::Ancilla, QubitLabel::Memory);
    for _ in 0..5 {
        let state = random_state(&[QubitLabel::Ancilla, QubitLabel::Memory], &mut rng)?;
        let total: f64 = bell_probabilities(&state, pair)?.iter().sum();
        worst = worst.max((total - 1.0).abs());
    }
    Ok(CheckResult::from_deviation("Bell basis completeness", worst, 1e-12))
}

/// Brute-force teleportation: every Bell branch occurs with probability
/// 1/4 and, after the announced correction, decodes to m2 = m1 xor
/// (r1 xor r2) with certainty. A miswired labeling applies the
/// correction on the wrong branches and loses determinism away from the
/// symmetric angles.
fn teleportation_determinism(labeling: BellLabeling) -> Result<CheckResult> {
    let pair = [QubitLabel::Ancilla, QubitLabel::Memory];
    let mut worst_quarter = 0.0f64;
    let mut worst_decode = 0.0f64;
    for &phi in &[0.0, PI / 7.0, FRAC_PI_2, 1.3] {
        let basis = PhaseBasis::new(phi);
        for m1 in 0..2u8 {
            let joint = entangle_photon_timebin(prepare_am_entanglement(0.5)?, 0.0)?;
            let (_, spins) = bank_issue_branch(&joint, &basis, m1)?;
            let state = reentangle_photon(store_token(spins)?, 0.0)?;
            let probs = bell_probabilities(&state, (pair[0], pair[1]))?;
            for (index, &prob) in probs.iter().enumerate() {
                worst_quarter = worst_quarter.max((prob - 0.25).abs());
                let mut branch = state.clone();
                branch.collapse_onto(&pair, &bell_state(index))?;
                let mut photon = branch.factor_out(&pair, &bell_state(index))?;
                let (r1, r2) = labeling.bits(index);
                if r1 == 1 {
                    photon.apply_unitary(&gates::pauli_x(), &[QubitLabel::Photon])?;
                }
                let (p0, p1) =
                    phase_basis_probabilities(&photon, QubitLabel::Photon, &decoding_basis(phi))?;
                let wanted = if m1 ^ r1 ^ r2 == 0 { p0 } else { p1 };
                worst_decode = worst_decode.max(1.0 - wanted);
            }
        }
    }
    let worst = worst_quarter.max(worst_decode);
    Ok(CheckResult::from_deviation("teleportation determinism", worst, 1e-9))
}

fn closed_form_vs_quadrature() -> Result<CheckResult> {
    let mut worst = 0.0f64;
    for &ratio in &[0.0, 1.5] {
        for &sigma in &[0.0, 0.6] {
            for &delta_phi in &[0.0, 0.8] {
                let closed = mean_verification_fidelity(ratio, 1.0, sigma, delta_phi)?;
                let numeric = mean_verification_fidelity_numeric(ratio, 1.0, sigma, delta_phi)?;
                worst = worst.max((closed - numeric).abs());
            }
        }
    }
    let origin = mean_verification_fidelity(0.0, 1.0, 0.0, 0.0)?;
    worst = worst.max((origin - 0.5 * (1.0 + PI / 4.0)).abs());
    Ok(CheckResult::from_deviation("closed form vs quadrature", worst, 1e-8))
}

fn interferometer_equivalence() -> Result<CheckResult> {
    let mut rng = ChaCha12Rng::seed_from_u64(12);
    let mut worst = 0.0f64;
    for _ in 0..6 {
        let alpha = rng.gen::<f64>();
        let theta = rng.gen::<f64>() * std::f64::consts::TAU;
        let phi = rng.gen::<f64>() * std::f64::consts::TAU;
        let joint = entangle_photon_timebin(prepare_am_entanglement(alpha)?, theta)?;
        let basis = PhaseBasis::new(phi);

        // Same draw on cloned streams, so differing click statistics
        // would surface as differing outcomes.
        let mut fork = rng.clone();
        let (detector, mut hardware) = interferometer_issue(joint.clone(), phi, &mut rng)?;
        let (m1, p0) = {
            let (p0, _) = phase_basis_probabilities(&joint, QubitLabel::Photon, &basis)?;
            let draw = fork.gen::<f64>();
            (u8::from(draw >= p0), p0)
        };
        if m1 != detector.bit() {
            return Ok(CheckResult {
                name: "interferometer equivalence",
                passed: false,
                detail: format!("detector {detector:?} disagrees with projection bit {m1}"),
            });
        }
        let (branch_prob, mut reference) = bank_issue_branch(&joint, &basis, detector.bit())?;
        let click_prob = if detector.bit() == 0 { p0 } else { 1.0 - p0 };
        worst = worst.max((branch_prob - click_prob).abs());

        hardware.normalize_global_phase();
        reference.normalize_global_phase();
        worst = worst.max(hardware.max_difference(&reference)?);
    }
    Ok(CheckResult::from_deviation("interferometer equivalence", worst, 1e-12))
}

fn dephasing_exactness() -> Result<CheckResult> {
    let mut rng = ChaCha12Rng::seed_from_u64(21);
    let scale = (-0.7f64 / 1.3).exp();
    let channel = memory_dephasing_channel(0.7, 1.3)?;
    let mut worst = 0.0f64;
    for _ in 0..4 {
        let state = random_state(&[QubitLabel::Memory], &mut rng)?;
        let mut rho = DensityMatrix::from_pure(&state);
        let before = rho.matrix().clone();
        rho.apply_channel(&channel, &[QubitLabel::Memory])?;
        worst = worst.max((rho.entry(0, 0) - before.get(0, 0)).norm());
        worst = worst.max((rho.entry(1, 1) - before.get(1, 1)).norm());
        worst = worst.max((rho.entry(0, 1) - before.get(0, 1) * scale).norm());
    }
    // Semigroup: storing for 0.4 then 0.9 lifetimes equals storing for 1.3.
    let state = random_state(&[QubitLabel::Memory], &mut rng)?;
    let mut split = DensityMatrix::from_pure(&state);
    split.apply_channel(&memory_dephasing_channel(0.4, 1.0)?, &[QubitLabel::Memory])?;
    split.apply_channel(&memory_dephasing_channel(0.9, 1.0)?, &[QubitLabel::Memory])?;
    let mut whole = DensityMatrix::from_pure(&state);
    whole.apply_channel(&memory_dephasing_channel(1.3, 1.0)?, &[QubitLabel::Memory])?;
    worst = worst.max(split.max_difference(&whole)?);
    Ok(CheckResult::from_deviation("dephasing exactness", worst, 1e-12))
}

/// The Kraus application must equal the hand-built mixture
/// (1-p) rho + p Z rho Z.
fn channel_mixture_agreement() -> Result<CheckResult> {
    let mut rng = ChaCha12Rng::seed_from_u64(34);
    let p = 0.23;
    let channel = KrausChannel::phase_flip(p)?;
    let mut worst = 0.0f64;
    for _ in 0..4 {
        let state = random_state(&[QubitLabel::Memory, QubitLabel::Ancilla], &mut rng)?;
        let mut via_channel = DensityMatrix::from_pure(&state);
        via_channel.apply_channel(&channel, &[QubitLabel::Memory])?;

        let mut flipped = state.clone();
        flipped.apply_unitary(&gates::pauli_z(), &[QubitLabel::Memory])?;
        let plain = DensityMatrix::from_pure(&state);
        let kicked = DensityMatrix::from_pure(&flipped);
        let mixture = plain.matrix().scaled(C64::new(1.0 - p, 0.0)).add(
            &kicked.matrix().scaled(C64::new(p, 0.0)),
        );
        let mixture = DensityMatrix::from_entries(plain.labels(), mixture)?;
        worst = worst.max(via_channel.max_difference(&mixture)?);
    }
    Ok(CheckResult::from_deviation("channel mixture agreement", worst, 1e-12))
}

fn norm_preservation() -> Result<CheckResult> {
    let labels = [QubitLabel::Memory, QubitLabel::Ancilla, QubitLabel::Photon];
    let mut rng = ChaCha12Rng::seed_from_u64(55);
    let mut state = random_state(&labels, &mut rng)?;
    let mut worst = 0.0f64;
    for _ in 0..25 {
        let target = labels[rng.gen_range(0..3)];
        match rng.gen_range(0..3) {
            0 => state.apply_unitary(&gates::ry(rng.gen::<f64>() * PI), &[target])?,
            1 => state.apply_unitary(
                &gates::phase_shift(rng.gen::<f64>() * std::f64::consts::TAU),
                &[target],
            )?,
            _ => {
                let other = labels[(labels.iter().position(|&l| l == target).unwrap() + 1) % 3];
                state.apply_unitary(&gates::cnot(), &[target, other])?;
            }
        }
        worst = worst.max((state.norm() - 1.0).abs());
    }
    Ok(CheckResult::from_deviation("norm preservation", worst, 1e-12))
}

/// The exact branch-sum acceptance and the sampled estimate must agree
/// within the Monte Carlo interval, noiseless and noisy alike.
fn exact_vs_sampled() -> Result<CheckResult> {
    let noiseless = ProtocolConfig::default();
    let exact = exact_acceptance(&noiseless)?;
    let mc = run_mc(&noiseless, 2_000, 11)?;
    if (exact - 1.0).abs() > 1e-12 || mc.accepted != mc.completed {
        return Ok(CheckResult {
            name: "exact vs sampled acceptance",
            passed: false,
            detail: format!("noiseless point: exact {exact}, sampled {}", mc.estimate),
        });
    }

    let mut noisy = ProtocolConfig::default();
    noisy.noise.alpha_mode = AlphaMode::Uniform;
    noisy.noise.sigma_theta = 0.3;
    noisy.noise.t_s = 0.5;
    noisy.noise.f_bsm = 0.95;
    let exact = exact_acceptance(&noisy)?;
    let mc = run_mc(&noisy, 2_000, 11)?;
    let halfwidth = 0.5 * (mc.ci.1 - mc.ci.0);
    let gap = (mc.estimate - exact).abs();
    Ok(CheckResult {
        name: "exact vs sampled acceptance",
        passed: gap <= 4.0 * halfwidth,
        detail: format!("|sampled - exact| = {gap:.3e}, 4 sigma = {:.3e}", 4.0 * halfwidth),
    })
}

fn random_state(labels: &[QubitLabel], rng: &mut ChaCha12Rng) -> Result<StateVector> {
    let dim = 1 << labels.len();
    let mut amps: Vec<C64> = (0..dim)
        .map(|_| C64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5))
        .collect();
    let norm: f64 = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
    for a in &mut amps {
        *a /= norm;
    }
    StateVector::from_amplitudes(labels, amps)
}
