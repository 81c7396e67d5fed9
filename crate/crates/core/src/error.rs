use thiserror::Error;

/// Crate-wide error type. Variants are grouped by the subsystem that raises them.
#[derive(Debug, Error)]
pub enum Error {
    // dataset
    #[error("missing column `{0}`")]
    MissingColumn(String),
    #[error("label at row {row} is `{value}`, expected 0 or 1")]
    NonBinaryLabel { row: usize, value: String },
    #[error("non-finite feature value at row {row}, column {col}")]
    NonFiniteFeature { row: usize, col: usize },
    #[error("feature count {found} does not match layout ({expected} expected)")]
    LayoutMismatch { expected: usize, found: usize },
    #[error("dataset contains no samples")]
    EmptyDataset,
    #[error("duplicate sample id `{0}`")]
    DuplicateId(String),
    #[error("expected {expected} regions, found {found}")]
    RegionCountMismatch { expected: usize, found: usize },
    #[error("region `{region}` has {found} timepoints, expected {expected}")]
    TimepointMismatch {
        region: String,
        expected: usize,
        found: usize,
    },
    #[error("split fractions {0:?} do not sum to 1")]
    BadSplitFractions([f64; 3]),
    #[error("class {class} has only {n} samples, need at least {min}")]
    ClassTooSmall { class: u8, n: usize, min: usize },
    #[error("dataset is missing one of the two classes")]
    MissingClass,

    // cgp engine
    #[error("probability {0} outside [0, 1]")]
    InvalidProbability(f64),
    #[error("input vector has length {found}, genome expects {expected}")]
    InputLengthMismatch { expected: usize, found: usize },
    #[error("non-finite input value at position {0}")]
    NonFiniteInput(usize),
    #[error("streamed execution requires a recurrent genome")]
    NotRecurrent,
    #[error("streamed execution received an empty series")]
    EmptySeries,
    #[error("sample length {len} is not a multiple of {n_inputs} inputs")]
    BadFrameShape { len: usize, n_inputs: usize },
    #[error("invalid genome: {0}")]
    InvalidGenome(String),
    #[error("malformed genome file: {0}")]
    MalformedGenomeFile(String),

    // evolution
    #[error("invalid evolution config: {0}")]
    InvalidEvolutionConfig(String),

    // adasyn
    #[error("minority class has {0} samples, need at least 2")]
    MinorityTooSmall(usize),
    #[error("cannot balance a single-class dataset")]
    SingleClass,
    #[error("neighbour pool has {pool} points, need at least {k}")]
    PoolTooSmall { pool: usize, k: usize },

    // crossval
    #[error("class {class} has {n} samples, fewer than k = {k}")]
    ClassSmallerThanK { class: u8, n: usize, k: usize },
    #[error("invalid cross-validation plan: {0}")]
    InvalidCvPlan(String),

    // datagen
    #[error("invalid generator spec: {0}")]
    InvalidSpec(String),

    // io
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
