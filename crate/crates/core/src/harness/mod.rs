//! Study driver: configuration, convergence studies, diagnostics and reports.

pub mod config;
pub mod diagnostics;
pub mod report;
pub mod study;

pub use config::StudyConfig;
pub use diagnostics::{nearest_rotation_table, q2_table, rigidity_probe, run_diagnostics};
pub use report::{StudyReport, REPORT_COLUMNS};
pub use study::{run_full_gamma_study, run_minimize_2d, run_recovery_study, FullGammaStudy};
