//! Crate-wide error type.
//!
//! Variants are grouped by the stage that raises them so binaries can map
//! them onto coarse exit classes (configuration, data, pipeline) without
//! string-matching messages.

use thiserror::Error;

/// Convenience alias used across the crate.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// The run configuration could not be parsed or failed validation.
    #[error("config: {0}")]
    Config(String),

    /// The declared schema does not line up with the data file.
    #[error("schema: {0}")]
    Schema(String),

    /// Input data is unusable: missing file, malformed CSV, empty after cleaning.
    #[error("data: {0}")]
    Data(String),

    /// A library operation was called with arguments outside its domain.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Training cannot proceed, e.g. the training set holds a single class.
    #[error("training: {0}")]
    DegenerateTraining(String),

    /// A cross-validation fold lost one of the two classes.
    #[error("fold {fold} of {folds} trains on a single class; use fewer folds or more data")]
    DegenerateFold { fold: usize, folds: usize },

    /// The rebalancing quadratic has no root inside the feasible box.
    #[error(
        "rebalancing infeasible: roots {root_low:.6} and {root_high:.6} both leave \
         the feasible range (0..={max_dr} deprived removals, favored share capped at {max_fg})"
    )]
    InfeasibleRebalance {
        root_low: f64,
        root_high: f64,
        max_dr: u64,
        max_fg: u64,
    },

    /// Too few donor rows to synthesize from.
    #[error(
        "synthesis: subgroup {subgroup} has {available} donor rows, cannot generate {requested}"
    )]
    SynthesisInfeasible {
        subgroup: String,
        available: usize,
        requested: usize,
    },

    /// A metric's denominator group is empty on this data.
    #[error("metric {metric} undefined: {reason}")]
    UndefinedMetric { metric: String, reason: String },

    /// Model or baseline selection failed for every candidate.
    #[error("selection: {0}")]
    Selection(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Coarse classification used by the CLI to pick an exit code.
    pub fn exit_class(&self) -> ExitClass {
        match self {
            Error::Config(_) | Error::Schema(_) => ExitClass::Config,
            Error::Data(_) => ExitClass::Data,
            _ => ExitClass::Pipeline,
        }
    }
}

/// What kind of failure an [`Error`] represents, from a caller's viewpoint.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitClass {
    /// The run was misconfigured; fix the config file or flags.
    Config,
    /// The input data is missing or unusable.
    Data,
    /// A pipeline stage failed on valid inputs.
    Pipeline,
}

impl ExitClass {
    /// Process exit code: 2 configuration, 3 data, 4 pipeline.
    /// (0 is success; 1 is left to the runtime for panics.)
    pub fn code(self) -> i32 {
        match self {
            ExitClass::Config => 2,
            ExitClass::Data => 3,
            ExitClass::Pipeline => 4,
        }
    }
}
