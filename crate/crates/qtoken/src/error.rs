use thiserror::Error;

use crate::qcore::QubitLabel;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("qubit registers overlap on label {0}")]
    OverlappingLabels(QubitLabel),
    #[error("qubit {0} is not part of this register")]
    UnknownQubit(QubitLabel),
    #[error("qubit {0} appears more than once in the target list")]
    DuplicateTarget(QubitLabel),
    #[error("amplitude vector of length {0} does not describe a qubit register")]
    BadDimension(usize),
    #[error("state norm {norm} is too far from 1")]
    NotNormalized { norm: f64 },
    #[error("matrix is not unitary (deviation {deviation:.3e})")]
    NonUnitary { deviation: f64 },
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("registers carry different qubit labels")]
    LabelMismatch,
    #[error("measurement is degenerate: all outcome probabilities vanish")]
    DegenerateMeasurement,
    #[error("register is not a product state with the given factor (residual {residual:.3e})")]
    NotProductState { residual: f64 },
    #[error("Kraus operators do not sum to identity (deviation {deviation:.3e})")]
    IncompleteChannel { deviation: f64 },
    #[error("channel has no Kraus operators")]
    EmptyChannel,
    #[error("density matrix is not Hermitian (deviation {0:.3e})")]
    NotHermitian(f64),
    #[error("density matrix trace deviates from 1 by {0:.3e}")]
    BadTrace(f64),
    #[error("density matrix has eigenvalue {0:.3e} below the positivity floor")]
    NotPositive(f64),
    #[error("cannot trace out every qubit of the register")]
    EmptyKeepList,
    #[error("parameter {name} = {value} is out of range")]
    ParameterOutOfRange { name: &'static str, value: f64 },
    #[error("ancilla is still entangled after the disentangling step (purity {purity})")]
    AncillaStillEntangled { purity: f64 },
    #[error("photon register is already present")]
    PhotonAlreadyPresent,
    #[error("quadrature did not converge: achieved {achieved:.3e}, requested {requested:.3e}")]
    QuadratureNoConvergence { achieved: f64, requested: f64 },
    #[error("sweep grid is empty")]
    EmptySweep,
    #[error("no completed trials: every run exhausted its repetition budget")]
    AllTrialsExhausted,
    #[error("configuration error: {0}")]
    Config(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
