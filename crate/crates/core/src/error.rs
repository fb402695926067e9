use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("qubit index {qubit} out of range for {n_qubits} qubits")]
    QubitOutOfRange { qubit: usize, n_qubits: usize },
    #[error("control and target qubit are both {0}")]
    SameQubit(usize),
    #[error("unsupported register size: {0} qubits")]
    RegisterSize(usize),
    #[error("probability {0} outside [0, 1]")]
    Probability(f64),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("empty input: {0}")]
    Empty(&'static str),
    #[error("labels contain a single class")]
    SingleClass,
    #[error("label {0} is not binary")]
    Label(u8),
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("kernel matrix is not symmetric: |K[{row}][{col}] - K[{col}][{row}]| = {gap}")]
    KernelAsymmetric { row: usize, col: usize, gap: f64 },
    #[error("column '{0}' not found")]
    MissingColumn(String),
    #[error("duplicate column name '{0}'")]
    DuplicateColumn(String),
    #[error("column '{column}': unseen category '{value}'")]
    UnseenCategory { column: String, value: String },
    #[error("class {class} has {count} samples, need at least {needed}")]
    TooFewSamples { class: u8, count: usize, needed: usize },
    #[error("model has not been fitted")]
    NotFitted,
}
