//! Scripted pipeline behind the `liftkit` binary: configuration loading,
//! command implementations, and run-manifest emission.
//!
//! Exit-code contract: 0 success, 1 usage error, 2 data/validation error,
//! 3 internal error.

pub mod commands;
pub mod config;
pub mod manifest;

pub use commands::*;
pub use config::{pick, pick_required, PipelineConfig};
pub use manifest::{sha256_file, ManifestBuilder, RunManifest};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum PipelineError {
    /// Bad invocation: unknown flag values, missing required settings.
    #[error("usage error: {0}")]
    Usage(String),
    /// The inputs are wrong: unreadable, unparsable, or invariant-violating.
    #[error("data error: {0}")]
    Data(String),
    /// The pipeline itself failed: output IO, serialization.
    #[error("internal error: {0}")]
    Internal(String),
}

impl PipelineError {
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Usage(_) => 1,
            PipelineError::Data(_) => 2,
            PipelineError::Internal(_) => 3,
        }
    }
}

pub type Result<T> = std::result::Result<T, PipelineError>;

pub(crate) fn internal<E: std::fmt::Display>(e: E) -> PipelineError {
    PipelineError::Internal(e.to_string())
}

pub(crate) fn data<E: std::fmt::Display>(e: E) -> PipelineError {
    PipelineError::Data(e.to_string())
}

macro_rules! impl_data_from {
    ($($t:ty),*) => {$(
        impl From<$t> for PipelineError {
            fn from(e: $t) -> Self {
                PipelineError::Data(e.to_string())
            }
        }
    )*};
}

impl_data_from!(
    crate::imu_core::ImuError,
    crate::windowing::WindowingError,
    crate::fusion_filters::FilterError,
    crate::liftnet::LiftnetError,
    crate::attribution::AttributionError,
    crate::evalkit::EvalError,
    crate::synthgen::SynthError
);

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes() {
        assert_eq!(PipelineError::Usage("x".into()).exit_code(), 1);
        assert_eq!(PipelineError::Data("x".into()).exit_code(), 2);
        assert_eq!(PipelineError::Internal("x".into()).exit_code(), 3);
    }

    #[test]
    fn library_errors_map_to_data() {
        let e: PipelineError = crate::imu_core::ImuError::Parse("bad".into()).into();
        assert_eq!(e.exit_code(), 2);
    }
}
