//! Simulation runs, verification experiments and file formats for the
//! Atlas particle system.

pub mod config;
pub mod error;
pub mod experiments;
pub mod io;
pub mod report;

pub use config::{ExperimentConfig, ExperimentTag, Overrides};
pub use error::{LabError, Result};
pub use report::{ReportFormat, Verdict, VerificationRecord, VerificationReport};
