//! Simulator for a three-party quantum-token protocol.
//!
//! A bank issues a phase-encoded token into a user's spin memory via an
//! entangled photon, the user later teleports the token state onto a fresh
//! photon, and a verifier checks it against the bank's secret record. The
//! crate models the full quantum evolution exactly (state vectors for
//! sampled runs, density matrices for closed-form acceptance
//! probabilities) under configurable imperfections: memory dephasing,
//! photon loss, phase jitter between the two entangling emissions, and an
//! imperfect Bell-state measurement.
//!
//! Layering, bottom up:
//! - [`qcore`]: dense state vectors, gates, measurements, channels,
//!   density matrices.
//! - [`noise`]: the imperfection model and its samplers.
//! - [`protocol`]: the issue / store / teleport / verify steps and a
//!   message-passing session that enforces who holds which qubit.
//! - [`analytics`]: closed-form fidelity and soundness expressions with
//!   quadrature cross-checks.
//! - [`adversary`]: forgery strategies that never see the bank's secrets.
//! - [`harness`]: Monte Carlo driver, exact acceptance computation,
//!   parameter sweeps, and report assembly.
//! - [`config`]: the TOML run-configuration file shared by every
//!   subcommand of the companion binary.
//! - [`selftest`]: deterministic invariant suite with an injectable
//!   negative control.

pub mod adversary;
pub mod analytics;
pub mod config;
pub mod error;
pub mod harness;
pub mod noise;
pub mod protocol;
pub mod qcore;
pub mod selftest;

pub use error::{Error, Result};
