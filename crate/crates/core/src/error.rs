use thiserror::Error;

use crate::ot::CouplingMatrix;

/// Errors produced anywhere in the transport pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("vector has (near) zero norm")]
    ZeroVector,

    #[error("vector is not unit-norm (norm = {0})")]
    NotUnitNorm(f64),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("points are antipodal; the connecting geodesic is not unique")]
    AntipodalPoints,

    #[error("all weights are zero")]
    AllZeroWeights,

    #[error("weighted mean of the support has (near) zero norm")]
    DegenerateSupport,

    #[error("invalid weights: {0}")]
    InvalidWeights(String),

    #[error("prototype set is empty")]
    EmptyPrototypeSet,

    #[error("empty input")]
    EmptyInput,

    #[error("k = {k} exceeds the number of items ({n})")]
    KTooLarge { k: usize, n: usize },

    #[error("no object survives filtering")]
    EmptySelection,

    #[error("all kept objects have zero likelihood")]
    AllZeroLikelihoods,

    #[error("action weights are degenerate (every action matches an object exactly)")]
    DegenerateWeights,

    #[error("weights are not on the probability simplex: {0}")]
    InfeasibleWeights(String),

    #[error("transport solver hit the iteration cap ({iterations}) before proving optimality")]
    NonConvergence {
        iterations: usize,
        plan: Box<CouplingMatrix>,
    },

    #[error("numerical underflow in entropic solver: {0}")]
    NumericalUnderflow(String),

    #[error("coupling has no positive entry")]
    ZeroCoupling,

    #[error("coupling row {0} carries no mass")]
    EmptyRow(usize),

    #[error("index sets do not match: {0}")]
    IndexMismatch(String),

    #[error("tube {0:?} maps to no scored video")]
    UnmappedTube(String),

    #[error("no ground-truth label for item {0:?}")]
    MissingTruth(String),

    #[error("class {0:?} has no items")]
    EmptyClass(String),

    #[error("T = {t} exceeds the number of objects ({n})")]
    TTooLarge { t: usize, n: usize },

    #[error("duplicate identifier {0:?}")]
    DuplicateId(String),

    #[error("cannot place {n_classes} centers with pairwise angle > {min_angle:.4} rad")]
    InfeasibleSeparation { n_classes: usize, min_angle: f64 },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("bad magic bytes in embedding file")]
    BadMagic,

    #[error("embedding payload truncated: expected {expected} bytes, found {found}")]
    TruncatedPayload { expected: usize, found: usize },

    #[error("id count {ids} does not match row count {rows}")]
    IdCountMismatch { ids: usize, rows: usize },

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for errors caused by the filesystem rather than by the data.
    pub fn is_io(&self) -> bool {
        matches!(self, Error::Io(_))
    }

    /// Stable snake_case identifier of the variant.
    pub fn code(&self) -> &'static str {
        match self {
            Error::ZeroVector => "zero_vector",
            Error::NotUnitNorm(_) => "not_unit_norm",
            Error::DimensionMismatch { .. } => "dimension_mismatch",
            Error::AntipodalPoints => "antipodal_points",
            Error::AllZeroWeights => "all_zero_weights",
            Error::DegenerateSupport => "degenerate_support",
            Error::InvalidWeights(_) => "invalid_weights",
            Error::EmptyPrototypeSet => "empty_prototype_set",
            Error::EmptyInput => "empty_input",
            Error::KTooLarge { .. } => "k_too_large",
            Error::EmptySelection => "empty_selection",
            Error::AllZeroLikelihoods => "all_zero_likelihoods",
            Error::DegenerateWeights => "degenerate_weights",
            Error::InfeasibleWeights(_) => "infeasible_weights",
            Error::NonConvergence { .. } => "non_convergence",
            Error::NumericalUnderflow(_) => "numerical_underflow",
            Error::ZeroCoupling => "zero_coupling",
            Error::EmptyRow(_) => "empty_row",
            Error::IndexMismatch(_) => "index_mismatch",
            Error::UnmappedTube(_) => "unmapped_tube",
            Error::MissingTruth(_) => "missing_truth",
            Error::EmptyClass(_) => "empty_class",
            Error::TTooLarge { .. } => "t_too_large",
            Error::DuplicateId(_) => "duplicate_id",
            Error::InfeasibleSeparation { .. } => "infeasible_separation",
            Error::InvalidConfig(_) => "invalid_config",
            Error::BadMagic => "bad_magic",
            Error::TruncatedPayload { .. } => "truncated_payload",
            Error::IdCountMismatch { .. } => "id_count_mismatch",
            Error::Parse(_) => "parse",
            Error::Io(_) => "io",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
