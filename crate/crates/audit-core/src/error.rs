//! Crate-wide error type.
//!
//! Variants are grouped by the exit code the CLI maps them to:
//! configuration problems (1), provider problems (2), everything
//! else is an analysis/data error (3).

use std::path::PathBuf;

/// One grid cell that could not be generated or embedded.
#[derive(Debug, Clone)]
pub struct CellFailure {
    pub concept: String,
    pub culture: String,
    pub run_index: usize,
    pub cause: String,
}

impl std::fmt::Display for CellFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "({}, {}, run {}): {}",
            self.concept, self.culture, self.run_index, self.cause
        )
    }
}

#[derive(Debug, thiserror::Error)]
pub enum AuditError {
    /// Invalid configuration (bad grid, missing conditions, bad parameters).
    #[error("configuration error: {0}")]
    Config(String),

    /// A provider call failed after exhausting retries.
    #[error("provider error: {0}")]
    Provider(String),

    /// One or more grid cells could not be completed; nothing is dropped
    /// silently, the run aborts with the full list.
    #[error("{} grid cell(s) failed:\n{}", failures.len(), failures.iter().map(|c| format!("  {c}")).collect::<Vec<_>>().join("\n"))]
    CellFailures { failures: Vec<CellFailure> },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// Malformed corpus or fixture file.
    #[error("parse error in {path} at line {line}: {detail}")]
    Parse {
        path: PathBuf,
        line: usize,
        detail: String,
    },

    /// Corpus-level consistency violation (duplicate keys, unbalanced grid,
    /// missing embeddings).
    #[error("audit integrity error: {0}")]
    Integrity(String),

    #[error("dimension mismatch{}: expected {expected}, got {got}", context.as_deref().map(|c| format!(" ({c})")).unwrap_or_default())]
    DimensionMismatch {
        expected: usize,
        got: usize,
        context: Option<String>,
    },

    /// A vector with zero Euclidean norm cannot participate in cosine
    /// distance.
    #[error("zero-norm vector{}", context.as_deref().map(|c| format!(" ({c})")).unwrap_or_default())]
    ZeroNorm { context: Option<String> },

    /// A cluster whose mean vanishes has no usable centroid.
    #[error("degenerate cluster{}: centroid has zero norm", context.as_deref().map(|c| format!(" ({c})")).unwrap_or_default())]
    DegenerateCluster { context: Option<String> },

    /// Invalid argument to an analysis operation.
    #[error("invalid argument: {0}")]
    Argument(String),

    /// Perplexity bisection failed to converge for a row.
    #[error("affinity bisection did not converge for row {row} (target perplexity {target})")]
    BisectionNonConvergence { row: usize, target: f64 },

    /// Non-finite values appeared during optimization.
    #[error("numerical overflow during {0}")]
    Overflow(String),

    /// A computed quantity violated an internal bound by more than the
    /// clamp tolerance.
    #[error("internal consistency error: {0}")]
    InternalConsistency(String),
}

impl AuditError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        AuditError::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code for the CLI: 1 configuration, 2 provider, 3 analysis.
    pub fn exit_code(&self) -> i32 {
        match self {
            AuditError::Config(_) => 1,
            AuditError::Provider(_) | AuditError::CellFailures { .. } => 2,
            _ => 3,
        }
    }
}

pub type Result<T> = std::result::Result<T, AuditError>;
