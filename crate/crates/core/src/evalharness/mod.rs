//! Metrics, experiment recipes, the matrix runner, reports and the leakage audit.

pub mod audit;
pub mod metrics;
pub mod preset;
pub mod recipe;
pub mod report;
pub mod runner;

pub use audit::{leakage_audit, plant_duplicates, AuditReport, ClassBalance};
pub use metrics::{
    confusion, format4, macro_metrics, metrics, ConfusionCounts, MetricAverage, MetricsReport,
};
pub use preset::{Preset, TableDef, PAPER_MATRIX};
pub use recipe::{ExperimentSpec, FeatureSource, ModelKind, Recipe, Settings, WordVectors};
pub use report::{emit_report, ReportFormat, ResultRow, ResultTable};
pub use runner::{
    build_block, featurize, fit_and_evaluate, run_experiment, run_matrix, run_matrix_in,
    CellOutcome, CellResult, ExperimentContext, FeatureBlock, FittedModel, HygieneMonitor,
    MatrixOptions, PreparedDoc, TestPartition,
};
