//! Experiment orchestration: configuration, offline stages, online runs,
//! learning curves and grid reports.

pub mod config;
pub mod curve;
pub mod pipeline;
pub mod report;
pub mod rundir;

pub use config::{Config, ExperimentConfig, InitKind};
pub use curve::{CurveRow, CurveWriter, LearningCurve, RollingSuccess};
pub use pipeline::{run_grid, run_online, OfflineData, OnlineRun, PretrainReport, Resources, RunStats};
pub use report::{report_csv, summarize, ReportRow};
pub use rundir::{Manifest, RunDir};
