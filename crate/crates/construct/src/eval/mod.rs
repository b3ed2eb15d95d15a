//! Benchmark evaluation: dataset loading, correctness judging against ground
//! truth, and detector quality metrics.

mod correctness;
mod dataset;
mod metrics;
mod runner;

pub use correctness::{
    document_accuracy, field_accuracy, field_correct, ComparisonProfile, NUMERIC_TOLERANCE,
};
pub use dataset::{load_dataset, BenchmarkExample, DatasetError};
pub use metrics::{
    auroc, confidence_gap, precision_at_num_errors, DetectorEvaluation, MetricBundle,
    MetricError, MetricValue,
};
pub use runner::{
    evaluate_dataset, load_outputs, DetectorKind, DetectorScores, EvaluationReport,
    ExampleEvaluation, GeneratedOutput,
};
