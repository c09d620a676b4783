//! End-to-end checks of the simulator against independent oracles.
//!
//! One test per claim. The oracles live at the top of the file and use
//! nothing but plain quadrature and the textbook definitions, so they
//! cannot inherit a bug from the library code they judge.

use std::f64::consts::{FRAC_PI_2, PI};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use qtoken::adversary::{AdversaryStrategy, run_forgery_experiment};
use qtoken::analytics::{WILSON_Z, mean_verification_fidelity, predicted_acceptance};
use qtoken::harness::{
    SweepParameter, SweepSpec, exact_acceptance, run_mc, run_trials, sweep,
};
use qtoken::noise::{AlphaMode, memory_dephasing_channel};
use qtoken::protocol::{
    PhiMode, ProtocolConfig, RunOutcome, bank_issue, bank_issue_branch, decoding_basis,
    entangle_photon_timebin, interferometer_issue, prepare_am_entanglement, reentangle_photon,
    store_token, verify,
};
use qtoken::qcore::{
    C64, DensityMatrix, PhaseBasis, QubitLabel, StateVector, bell_probabilities, bell_state,
    gates, phase_basis_probabilities,
};

// ---------------------------------------------------------------------
// Test-local oracles.

/// Composite Simpson rule with a fixed panel count.
fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, panels: usize) -> f64 {
    let h = (b - a) / panels as f64;
    let mut sum = f(a) + f(b);
    for i in 1..panels {
        let x = a + i as f64 * h;
        sum += f(x) * if i % 2 == 0 { 2.0 } else { 4.0 };
    }
    sum * h / 3.0
}

/// Interference weight 2 sqrt(alpha (1 - alpha)) averaged over uniform
/// alpha. Substituting alpha = sin^2 u maps both the weight and the
/// measure onto sin(2u), leaving a smooth integrand.
fn numeric_alpha_weight() -> f64 {
    simpson(|u| (2.0 * u).sin() * (2.0 * u).sin(), 0.0, FRAC_PI_2, 2_000)
}

/// cos(t - delta_phi) averaged over t ~ N(0, sigma^2), integrated
/// numerically over eight standard deviations.
fn numeric_phase_damping(sigma: f64, delta_phi: f64) -> f64 {
    if sigma == 0.0 {
        return delta_phi.cos();
    }
    let pdf = |t: f64| (-t * t / (2.0 * sigma * sigma)).exp() / (sigma * (2.0 * PI).sqrt());
    simpson(|t| pdf(t) * (t - delta_phi).cos(), -8.0 * sigma, 8.0 * sigma, 4_000)
}

/// The averaged acceptance the library's closed form is measured
/// against: interference scaled by storage decay and phase jitter.
fn oracle_mean_fidelity(ts_over_tm: f64, sigma: f64, delta_phi: f64) -> f64 {
    let weight = numeric_alpha_weight();
    0.5 * (1.0 + (-ts_over_tm).exp() * weight * numeric_phase_damping(sigma, delta_phi))
}

fn random_qubit(rng: &mut ChaCha12Rng) -> StateVector {
    let mut amps: Vec<C64> = (0..2)
        .map(|_| C64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5))
        .collect();
    let norm: f64 = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
    for a in &mut amps {
        *a /= norm;
    }
    StateVector::from_amplitudes(&[QubitLabel::Memory], amps).unwrap()
}

/// Decode probabilities for every Bell branch of a freshly issued and
/// re-entangled token: (branch probability, probability of the expected
/// second outcome) per branch, with or without the announced
/// correction.
fn branch_decode_table(
    phi: f64,
    m1: u8,
    apply_correction: bool,
) -> Vec<(f64, f64)> {
    let pair = [QubitLabel::Ancilla, QubitLabel::Memory];
    let joint = entangle_photon_timebin(prepare_am_entanglement(0.5).unwrap(), 0.0).unwrap();
    let (_, spins) = bank_issue_branch(&joint, &PhaseBasis::new(phi), m1).unwrap();
    let state = reentangle_photon(store_token(spins).unwrap(), 0.0).unwrap();
    let probs = bell_probabilities(&state, (pair[0], pair[1])).unwrap();

    let labeling = ProtocolConfig::default().bell_labeling;
    let mut table = Vec::new();
    for (index, &prob) in probs.iter().enumerate() {
        let mut branch = state.clone();
        branch.collapse_onto(&pair, &bell_state(index)).unwrap();
        let mut photon = branch.factor_out(&pair, &bell_state(index)).unwrap();
        let (r1, r2) = labeling.bits(index);
        if apply_correction && r1 == 1 {
            photon.apply_unitary(&gates::pauli_x(), &[QubitLabel::Photon]).unwrap();
        }
        let (p0, p1) =
            phase_basis_probabilities(&photon, QubitLabel::Photon, &decoding_basis(phi)).unwrap();
        let expected = if m1 ^ r1 ^ r2 == 0 { p0 } else { p1 };
        table.push((prob, expected));
    }
    table
}

fn noisy_reference_config() -> ProtocolConfig {
    let mut config = ProtocolConfig::default();
    config.noise.alpha_mode = AlphaMode::Uniform;
    config.noise.sigma_theta = 0.4;
    config.noise.delta_phi = 0.3;
    config.noise.f_bsm = 0.95;
    config
}

// ---------------------------------------------------------------------
// The claims.

#[test]
fn noiseless_runs_always_accept() {
    let config = ProtocolConfig::default();
    assert!(
        (exact_acceptance(&config).unwrap() - 1.0).abs() < 1e-12,
        "exact acceptance is not 1 at the noiseless point"
    );

    let outcomes = run_trials(&config, 10_000, 42).unwrap();
    let mut accepted = 0u64;
    for outcome in &outcomes {
        let t = outcome.transcript().expect("lossless runs always complete");
        assert_eq!(
            t.accepted,
            verify(t.m1, t.m2, t.r1, t.r2),
            "transcript verdict disagrees with the parity condition"
        );
        assert!(t.accepted, "a noiseless run was rejected: {t:?}");
        accepted += 1;
    }
    assert_eq!(accepted, 10_000);
    let mc = run_mc(&config, 10_000, 42).unwrap();
    assert!(mc.estimate >= 0.999, "sampled acceptance {}", mc.estimate);
}

#[test]
fn teleportation_is_deterministic_only_with_the_announced_correction() {
    for &phi in &[0.0, PI / 7.0, FRAC_PI_2, 1.3] {
        for m1 in 0..2u8 {
            for (index, &(prob, expected)) in
                branch_decode_table(phi, m1, true).iter().enumerate()
            {
                assert!(
                    (prob - 0.25).abs() < 1e-12,
                    "branch {index} probability {prob} at phi {phi}, m1 {m1}"
                );
                assert!(
                    expected > 1.0 - 1e-9,
                    "branch {index} decodes at {expected} with phi {phi}, m1 {m1}"
                );
            }
        }
    }

    // Dropping the correction at a generic angle leaves branches that
    // decode to either outcome, so the parity condition cannot be
    // deterministic.
    let worst = branch_decode_table(PI / 7.0, 0, false)
        .iter()
        .map(|&(_, expected)| expected.min(1.0 - expected))
        .fold(0.0f64, f64::max);
    assert!(
        worst > 0.05,
        "decode stayed near-deterministic without the correction (margin {worst})"
    );
}

#[test]
fn averaged_fidelity_matches_the_quadrature_oracle() {
    let mut worst = 0.0f64;
    for i in 0..5 {
        let ratio = 3.0 * i as f64 / 4.0;
        for j in 0..5 {
            let sigma = j as f64 / 4.0;
            for k in 0..5 {
                let delta_phi = FRAC_PI_2 * k as f64 / 4.0;
                let closed = mean_verification_fidelity(ratio, 1.0, sigma, delta_phi).unwrap();
                let gap = (closed - oracle_mean_fidelity(ratio, sigma, delta_phi)).abs();
                worst = worst.max(gap);
            }
        }
    }
    assert!(worst < 1e-8, "closed form drifts {worst:.3e} from the oracle");

    let origin = mean_verification_fidelity(0.0, 1.0, 0.0, 0.0).unwrap();
    assert!((origin - 0.5 * (1.0 + PI / 4.0)).abs() < 1e-12);
    assert!((origin - 0.892_699_081_698_724_1).abs() < 1e-12);

    // Interference dies with either long storage or heavy jitter.
    let stored_out = mean_verification_fidelity(35.0, 1.0, 0.0, 0.0).unwrap();
    assert!((stored_out - 0.5).abs() < 1e-12);
    let jittered_out = mean_verification_fidelity(0.0, 1.0, 8.0, 0.0).unwrap();
    assert!((jittered_out - 0.5).abs() < 1e-12);
}

#[test]
fn storage_sweep_follows_the_exponential_decay_curve() {
    // Uniform issuance weight and a jittered, offset decoding basis; the
    // Bell measurement stays ideal so the bare interference curve is the
    // whole prediction.
    let mut base = ProtocolConfig::default();
    base.noise.alpha_mode = AlphaMode::Uniform;
    base.noise.sigma_theta = 0.4;
    base.noise.delta_phi = 0.3;
    let spec = SweepSpec {
        parameter: SweepParameter::StorageTime,
        values: vec![0.0, 1.0, 2.0, 3.0],
        trials: 100_000,
        seed: 4242,
        n_rounds: 10,
    };
    let rows = sweep(&spec, &base).unwrap();

    let sigma = base.noise.sigma_theta;
    let delta_phi = base.noise.delta_phi;
    let mut previous = f64::INFINITY;
    for (row, &x) in rows.iter().zip(&spec.values) {
        let formula = 0.5
            * (1.0
                + (PI / 4.0) * (-x).exp() * (-sigma * sigma / 2.0).exp() * delta_phi.cos());
        let se = 0.5 * (row.mc.ci.1 - row.mc.ci.0) / WILSON_Z;
        let gap = (row.mc.estimate - formula).abs();
        assert!(
            gap <= 4.0 * se,
            "sampled {} vs formula {formula} at x {x}: gap {gap:.2e} > 4 se {:.2e}",
            row.mc.estimate,
            4.0 * se
        );
        assert!(row.mc.estimate < previous, "curve is not decreasing at x {x}");
        previous = row.mc.estimate;
    }
    // The tail has decayed most of the way to chance but stays above it.
    assert!(rows[3].mc.estimate > 0.5);
    assert!(rows[3].analytic_p - 0.5 < 0.02);
}

#[test]
fn forgers_without_the_token_stay_at_chance() {
    let honest = ProtocolConfig::default();

    // Guessing: the per-round rate is 1/2 and n rounds compound it.
    for &n_rounds in &[1u32, 2, 5, 10] {
        let report =
            run_forgery_experiment(AdversaryStrategy::BlindGuess, &honest, n_rounds, 100_000, 77)
                .unwrap();
        assert!(
            report.round_ci.0 <= 0.5 && 0.5 <= report.round_ci.1,
            "blind round rate {} outside its interval at n {n_rounds}",
            report.round_acceptance
        );
        let target = 0.5f64.powi(n_rounds as i32);
        assert_eq!(report.guessing_bound, target);
        assert!(
            report.full_ci.0 <= target && target <= report.full_ci.1,
            "{n_rounds}-round rate {} inconsistent with {target}",
            report.full_acceptance
        );
        assert!(report.ci_warning.is_none());
    }

    // A forged state drawn uniformly at random does no better.
    let report =
        run_forgery_experiment(AdversaryStrategy::RandomState, &honest, 5, 20_000, 78).unwrap();
    assert!(
        report.round_ci.0 <= 0.5 && 0.5 <= report.round_ci.1,
        "random-state round rate {} outside its interval",
        report.round_acceptance
    );

    // Every strategy respects the fidelity ceiling, with or without
    // noise on the honest channel.
    for config in [honest, noisy_reference_config()] {
        let honest_rate = predicted_acceptance(&config).unwrap();
        for strategy in [
            AdversaryStrategy::BlindGuess,
            AdversaryStrategy::RandomState,
            AdversaryStrategy::InterceptP2,
        ] {
            let report = run_forgery_experiment(strategy, &config, 3, 10_000, 79).unwrap();
            let round_margin = 3.0 * 0.5 * (report.round_ci.1 - report.round_ci.0);
            assert!(
                report.round_acceptance <= honest_rate + round_margin,
                "{strategy:?} beats the honest rate: {} vs {honest_rate}",
                report.round_acceptance
            );
            let full_margin = 3.0 * 0.5 * (report.full_ci.1 - report.full_ci.0);
            assert!(
                report.full_acceptance <= report.fidelity_bound + full_margin,
                "{strategy:?} beats the compounded bound: {} vs {}",
                report.full_acceptance, report.fidelity_bound
            );
        }
    }
}

#[test]
fn dephasing_is_exact_to_the_lifetime_exponential() {
    let mut rng = ChaCha12Rng::seed_from_u64(6);
    for &(t_s, t_m) in &[(0.0, 1.0), (0.7, 1.3), (2.0, 0.5)] {
        let channel = memory_dephasing_channel(t_s, t_m).unwrap();
        let scale = (-t_s / t_m).exp();
        for _ in 0..5 {
            let state = random_qubit(&mut rng);
            let mut rho = DensityMatrix::from_pure(&state);
            let before = rho.entry(0, 1);
            rho.apply_channel(&channel, &[QubitLabel::Memory]).unwrap();
            assert!(
                (rho.entry(0, 1) - before * scale).norm() < 1e-12,
                "off-diagonal scaling wrong at t_s {t_s}, t_m {t_m}"
            );
        }
    }

    // Two storage intervals compose like one of their sum.
    let state = random_qubit(&mut rng);
    let mut split = DensityMatrix::from_pure(&state);
    split
        .apply_channel(&memory_dephasing_channel(0.4, 1.0).unwrap(), &[QubitLabel::Memory])
        .unwrap();
    split
        .apply_channel(&memory_dephasing_channel(0.9, 1.0).unwrap(), &[QubitLabel::Memory])
        .unwrap();
    let mut whole = DensityMatrix::from_pure(&state);
    whole
        .apply_channel(&memory_dephasing_channel(1.3, 1.0).unwrap(), &[QubitLabel::Memory])
        .unwrap();
    assert!(split.max_difference(&whole).unwrap() < 1e-12);

    // One lifetime of storage on a balanced token. The acceptance labels
    // the midpoint between perfect interference and fully dephased.
    let mut config = ProtocolConfig::default();
    config.noise.t_s = 1.0;
    config.noise.t_m = 1.0;
    config.phi1 = PhiMode::Fixed(0.9);
    let exact = exact_acceptance(&config).unwrap();
    assert!(
        (exact - 0.5 * (1.0 + (-1.0f64).exp())).abs() < 1e-10,
        "one-lifetime acceptance {exact}"
    );
}

#[test]
fn interferometer_issuance_equals_projective_issuance() {
    let mut rng = ChaCha12Rng::seed_from_u64(17);
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let alpha = rng.gen::<f64>();
        let theta = rng.gen::<f64>() * std::f64::consts::TAU;
        let phi = rng.gen::<f64>() * std::f64::consts::TAU;
        let joint = entangle_photon_timebin(prepare_am_entanglement(alpha).unwrap(), theta)
            .unwrap();
        let basis = PhaseBasis::new(phi);

        // Identical draws on forked streams: any difference in click
        // statistics would separate the outcomes.
        let mut fork = rng.clone();
        let (detector, mut hardware) = interferometer_issue(joint.clone(), phi, &mut rng).unwrap();
        let (m1, mut reference) = bank_issue(joint.clone(), &basis, &mut fork).unwrap();
        assert_eq!(detector.bit(), m1, "outcomes split at alpha {alpha}");

        let (p0, _) = phase_basis_probabilities(&joint, QubitLabel::Photon, &basis).unwrap();
        for bit in 0..2u8 {
            let (branch_prob, _) = bank_issue_branch(&joint, &basis, bit).unwrap();
            let click_prob = if bit == 0 { p0 } else { 1.0 - p0 };
            worst = worst.max((branch_prob - click_prob).abs());
        }
        hardware.normalize_global_phase();
        reference.normalize_global_phase();
        worst = worst.max(hardware.max_difference(&reference).unwrap());
    }
    assert!(worst < 1e-12, "interferometer deviates by {worst:.3e}");
}

#[test]
fn transcripts_are_identical_for_any_worker_count() {
    let mut config = noisy_reference_config();
    config.noise.t_s = 0.4;
    config.noise.p_loss = 0.2;
    config.noise.max_repetitions = 5;

    let streams: Vec<Vec<RunOutcome>> = [1usize, 4, 8]
        .iter()
        .map(|&workers| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(workers)
                .build()
                .unwrap()
                .install(|| run_trials(&config, 500, 99).unwrap())
        })
        .collect();

    assert_eq!(streams[0], streams[1], "1 and 4 workers disagree");
    assert_eq!(streams[0], streams[2], "1 and 8 workers disagree");

    let render = |outcomes: &[RunOutcome]| -> String {
        outcomes
            .iter()
            .filter_map(|o| o.transcript().map(|t| t.csv_row()))
            .collect::<Vec<_>>()
            .join("\n")
    };
    assert_eq!(render(&streams[0]), render(&streams[2]));
}
