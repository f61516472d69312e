//! Convergence-study harness: configuration, error metrics, studies and
//! report emission.

pub mod config;
pub mod metrics;
pub mod report;
pub mod study;

pub use config::{StudyConfig, TestId};
pub use metrics::{error_metrics, positivity_error, rates, ErrorPair};
pub use report::{emit_report, ConvergenceReport, FieldReport, PlotData, ReportRow, RunDiagnostics};
pub use study::run_study;
