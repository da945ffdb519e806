//! Configuration-driven experiments: coverage studies, single-run traces,
//! reports and the optimal step-size exponent.

pub mod alpha;
pub mod config;
pub mod coverage;
pub mod problem;
pub mod report;
pub mod trace;

pub use alpha::{optimal_alpha, AlphaStar, Regime};
pub use config::{ExperimentConfig, Method, ProblemKind};
pub use coverage::{run_coverage, Estimator};
pub use report::{emit_report, parse_report, CoverageReport, ReportRow};
pub use trace::{single_run, Trace};
