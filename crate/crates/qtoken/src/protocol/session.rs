//! Three-party session: who does what, who holds which qubit, and what
//! crosses the wire.
//!
//! The session wraps the pure quantum steps of the parent module in an
//! operation log and a custody map. Every quantum operation names its
//! actor and the qubits it touches; acting on a qubit another party holds
//! is a programming error and panics. The memory spin never leaves the
//! user, which the log makes checkable after the fact.
//!
//! RNG draw order is fixed so a run is a pure function of (config, rng
//! stream): alpha, then phi1, then per-attempt delivery coins and the
//! issuance emission phase, the bank's Born draw, the storage-decay
//! branch, the verification delivery coins and emission phase, the Bell
//! measurement draws, and finally the verifier's Born draw.

use std::collections::HashMap;
use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::noise::{attempt_photon, memory_dephasing_channel, sample_alpha, sample_phase_noise};
use crate::qcore::{PhaseBasis, QubitLabel};

use super::{
    ProtocolConfig, TokenRecord, Transcript, bank_issue, entangle_photon_timebin,
    prepare_am_entanglement, reentangle_photon, store_token, user_bell_measurement,
    verifier_decode,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Role {
    User,
    Bank,
    Verifier,
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Role::User => write!(f, "user"),
            Role::Bank => write!(f, "bank"),
            Role::Verifier => write!(f, "verifier"),
        }
    }
}

/// One quantum operation performed by one party on its own qubits.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct LogEntry {
    pub role: Role,
    pub action: &'static str,
    pub qubits: Vec<QubitLabel>,
}

/// One transmission between parties.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub enum Message {
    Photon { from: Role, to: Role },
    Bits { from: Role, to: Role, description: &'static str, bits: Vec<u8> },
    Record { from: Role, to: Role, record: TokenRecord },
}

/// Complete trace of a session: every local operation and every message,
/// in order.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct SessionLog {
    pub entries: Vec<LogEntry>,
    pub messages: Vec<Message>,
}

impl SessionLog {
    /// The custody invariant the protocol promises: every operation that
    /// touches the memory spin is performed by the user.
    pub fn memory_stays_with_user(&self) -> bool {
        self.entries
            .iter()
            .filter(|e| e.qubits.contains(&QubitLabel::Memory))
            .all(|e| e.role == Role::User)
    }
}

/// Which of the two photon transmissions ran out of attempts.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum TransmissionPhase {
    Issuance,
    Verification,
}

/// Terminal state of one run. An exhausted repetition budget is a failed
/// run, tallied separately from a rejected token.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum RunOutcome {
    Completed(Transcript),
    BudgetExhausted { phase: TransmissionPhase },
}

impl RunOutcome {
    pub fn transcript(&self) -> Option<&Transcript> {
        match self {
            RunOutcome::Completed(t) => Some(t),
            RunOutcome::BudgetExhausted { .. } => None,
        }
    }
}

/// A finished session: the outcome plus the full trace.
#[derive(Clone, Debug)]
pub struct SessionRun {
    pub outcome: RunOutcome,
    pub log: SessionLog,
}

/// Custody map plus log. Panics on custody violations: the protocol code
/// below is the only caller, so a violation is a bug, not an input error.
struct Session {
    custody: HashMap<QubitLabel, Role>,
    log: SessionLog,
}

impl Session {
    fn new() -> Self {
        let mut custody = HashMap::new();
        custody.insert(QubitLabel::Ancilla, Role::User);
        custody.insert(QubitLabel::Memory, Role::User);
        Session { custody, log: SessionLog::default() }
    }

    fn op(&mut self, role: Role, action: &'static str, qubits: &[QubitLabel]) {
        for q in qubits {
            let holder = self.custody.get(q);
            assert!(
                holder == Some(&role),
                "{role} acted on {q} held by {holder:?} during {action}"
            );
        }
        self.log.entries.push(LogEntry { role, action, qubits: qubits.to_vec() });
    }

    fn create_photon(&mut self, at: Role) {
        let previous = self.custody.insert(QubitLabel::Photon, at);
        assert!(previous.is_none(), "photon created while one is still in flight");
    }

    fn absorb_photon(&mut self, by: Role, action: &'static str) {
        self.op(by, action, &[QubitLabel::Photon]);
        self.custody.remove(&QubitLabel::Photon);
    }

    fn send_photon(&mut self, from: Role, to: Role) {
        let holder = self.custody.insert(QubitLabel::Photon, to);
        assert!(holder == Some(from), "photon sent by {from} but held by {holder:?}");
        self.log.messages.push(Message::Photon { from, to });
    }

    fn send_bits(&mut self, from: Role, to: Role, description: &'static str, bits: Vec<u8>) {
        self.log.messages.push(Message::Bits { from, to, description, bits });
    }

    fn send_record(&mut self, from: Role, to: Role, record: TokenRecord) {
        self.log.messages.push(Message::Record { from, to, record });
    }

    fn clock(&self) -> u64 {
        self.log.entries.len() as u64
    }
}

/// Repeats delivery attempts until a photon arrives or the budget runs
/// out; returns the attempts used and whether the last one succeeded.
fn transmit<R: Rng + ?Sized>(
    session: &mut Session,
    loss_action: &'static str,
    p_loss: f64,
    max_repetitions: u32,
    rng: &mut R,
) -> (u32, bool) {
    let mut attempts = 0;
    loop {
        attempts += 1;
        if attempt_photon(p_loss, rng) {
            return (attempts, true);
        }
        session.log.entries.push(LogEntry {
            role: Role::User,
            action: loss_action,
            qubits: vec![],
        });
        if attempts >= max_repetitions {
            return (attempts, false);
        }
    }
}

/// One honest end-to-end run, returning the outcome together with the
/// operation and message trace. `seed` is recorded in the transcript
/// verbatim; the caller owns the RNG stream it names.
pub fn run_honest_session<R: Rng + ?Sized>(
    config: &ProtocolConfig,
    seed: u64,
    rng: &mut R,
) -> Result<SessionRun> {
    config.validate()?;
    let noise = &config.noise;
    let mut session = Session::new();

    let alpha = sample_alpha(noise.alpha_mode, rng);
    let phi1 = config.phi1.sample(rng);
    let basis1 = PhaseBasis::new(phi1);

    // Issuance: delivery is heralded by the bank's detector, so the
    // attempt coin is resolved before any state evolves; a lost photon
    // means a fresh preparation next attempt.
    let (issue_attempts, delivered) =
        transmit(&mut session, "issue_photon_lost", noise.p_loss, noise.max_repetitions, rng);
    if !delivered {
        return Ok(SessionRun {
            outcome: RunOutcome::BudgetExhausted { phase: TransmissionPhase::Issuance },
            log: session.log,
        });
    }
    let theta1 = sample_phase_noise(noise.sigma_theta, rng);

    let spins = prepare_am_entanglement(alpha)?;
    session.op(Role::User, "prepare_entanglement", &[QubitLabel::Ancilla, QubitLabel::Memory]);
    session.create_photon(Role::User);
    let joint = entangle_photon_timebin(spins, theta1)?;
    session.op(Role::User, "emit_issue_photon", &[QubitLabel::Ancilla, QubitLabel::Photon]);
    session.send_photon(Role::User, Role::Bank);

    let (m1, spins) = bank_issue(joint, &basis1, rng)?;
    session.absorb_photon(Role::Bank, "measure_issue_photon");
    let record = TokenRecord { phi: basis1.phi(), m1, issued_at: session.clock() };

    let mut memory = store_token(spins)?;
    session.op(Role::User, "store_token", &[QubitLabel::Memory, QubitLabel::Ancilla]);

    let decay = memory_dephasing_channel(noise.t_s, noise.t_m)?;
    decay.apply_sampled(&mut memory, &[QubitLabel::Memory], rng)?;
    session.op(Role::User, "storage_decay", &[QubitLabel::Memory]);

    // The verifier decodes against the bank's secret record, shared
    // out-of-band over the authenticated classical channel.
    session.send_record(Role::Bank, Role::Verifier, record);

    // Verification: the retried unit is the ancilla-photon entanglement
    // plus delivery, all heralded before the Bell measurement commits.
    let (verify_attempts, delivered) =
        transmit(&mut session, "verify_photon_lost", noise.p_loss, noise.max_repetitions, rng);
    if !delivered {
        return Ok(SessionRun {
            outcome: RunOutcome::BudgetExhausted { phase: TransmissionPhase::Verification },
            log: session.log,
        });
    }
    let theta2 =
        if config.delta_mode { 0.0 } else { sample_phase_noise(noise.sigma_theta, rng) };

    session.create_photon(Role::User);
    let mut full = reentangle_photon(memory, theta2)?;
    session.op(Role::User, "emit_verify_photon", &[QubitLabel::Ancilla, QubitLabel::Photon]);
    session.send_photon(Role::User, Role::Verifier);

    if config.swap_variant {
        session.op(
            Role::User,
            "swap_token_to_ancilla",
            &[QubitLabel::Memory, QubitLabel::Ancilla],
        );
    }
    let (r1, r2) = user_bell_measurement(&mut full, config, rng)?;
    session.op(Role::User, "bell_measurement", &[QubitLabel::Ancilla, QubitLabel::Memory]);
    session.send_bits(Role::User, Role::Verifier, "teleportation_outcome", vec![r1, r2]);

    let phi2 = record.phi - noise.delta_phi;
    let m2 = verifier_decode(&mut full, phi2, r1, config, rng)?;
    if config.active_correction && r1 == 1 {
        session.op(Role::Verifier, "time_bin_correction", &[QubitLabel::Photon]);
    }
    session.absorb_photon(Role::Verifier, "decode_photon");

    let transcript = Transcript::new(
        seed,
        record.m1,
        r1,
        r2,
        m2,
        issue_attempts.max(verify_attempts),
        alpha,
        theta1,
        theta2,
    );
    Ok(SessionRun { outcome: RunOutcome::Completed(transcript), log: session.log })
}

/// [`run_honest_session`] without the trace.
pub fn run_honest_protocol<R: Rng + ?Sized>(
    config: &ProtocolConfig,
    seed: u64,
    rng: &mut R,
) -> Result<RunOutcome> {
    run_honest_session(config, seed, rng).map(|run| run.outcome)
}
