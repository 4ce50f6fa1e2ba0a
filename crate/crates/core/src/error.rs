use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dense table needs {required} entries, budget is {budget}")]
    BudgetExceeded { required: u128, budget: usize },
    #[error("variable {index} out of range for {n} variables")]
    VariableOutOfRange { index: usize, n: usize },
    #[error("variable {0} listed twice")]
    DuplicateVariable(usize),
    #[error("variable sets overlap at {0}")]
    OverlappingSets(usize),
    #[error("variable set must be nonempty")]
    EmptySet,
    #[error("alphabet mismatch: {left:?} vs {right:?}")]
    AlphabetMismatch { left: Vec<usize>, right: Vec<usize> },
    #[error("invalid alphabet: {0}")]
    InvalidAlphabet(String),
    #[error("invalid probability table: {0}")]
    InvalidTable(String),
    #[error("invalid graph: {0}")]
    InvalidGraph(String),
    #[error("not a forest: edge {u}-{v} closes a cycle")]
    NotAForest { u: usize, v: usize },
    #[error("invalid CPT at node {node}: {reason}")]
    InvalidCpt { node: usize, reason: String },
    #[error("edge {u}-{v} is absent or already oriented")]
    NotUnoriented { u: usize, v: usize },
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("CPT resampling gave up after {attempts} attempts (weakest edge {parent}->{child} at {mi:.3e} bits)")]
    ResampleExhausted { attempts: usize, parent: usize, child: usize, mi: f64 },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
