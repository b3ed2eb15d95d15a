//! Runs detectors over a benchmark dataset and assembles the evaluation
//! report.

use std::sync::Arc;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use tokio::sync::Semaphore;

use crate::baselines::logprob_score;
use crate::engine::TrustScorer;
use crate::types::{parse_lenient_json, ScoringTask, StructuredOutput, Value};

use super::correctness::{document_accuracy, field_accuracy, field_correct};
use super::dataset::BenchmarkExample;
use super::metrics::{DetectorEvaluation, MetricBundle};

/// A detector selectable by name on the command line.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DetectorKind {
    Construct,
    JudgeDoc,
    JudgeFieldsSingle,
    JudgeFieldsMulti,
    Logprob,
}

impl DetectorKind {
    pub fn name(self) -> &'static str {
        match self {
            DetectorKind::Construct => "construct",
            DetectorKind::JudgeDoc => "judge_doc",
            DetectorKind::JudgeFieldsSingle => "judge_fields_single",
            DetectorKind::JudgeFieldsMulti => "judge_fields_multi",
            DetectorKind::Logprob => "logprob",
        }
    }
}

impl std::str::FromStr for DetectorKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "construct" => Ok(DetectorKind::Construct),
            "judge_doc" => Ok(DetectorKind::JudgeDoc),
            "judge_fields_single" => Ok(DetectorKind::JudgeFieldsSingle),
            "judge_fields_multi" => Ok(DetectorKind::JudgeFieldsMulti),
            "logprob" => Ok(DetectorKind::Logprob),
            other => Err(format!(
                "unknown detector {other:?} (expected construct | judge_doc | \
                 judge_fields_single | judge_fields_multi | logprob)"
            )),
        }
    }
}

/// One stored generation: the structured output produced for a dataset
/// example, or the failure that prevented it.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GeneratedOutput {
    pub id: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output: Option<Value>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub logprobs: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Reads an outputs file (newline-delimited JSON records).
pub fn load_outputs(path: &std::path::Path) -> Result<Vec<GeneratedOutput>, String> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| format!("failed to read {}: {e}", path.display()))?;
    let mut outputs = Vec::new();
    for (index, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let value = parse_lenient_json(line).map_err(|e| format!("line {}: {e}", index + 1))?;
        let record: GeneratedOutput =
            serde_json::from_value(value).map_err(|e| format!("line {}: {e}", index + 1))?;
        outputs.push(record);
    }
    Ok(outputs)
}

/// One detector's scores for one example.
#[derive(Debug, Clone, Serialize)]
pub struct DetectorScores {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub doc: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fields: Option<IndexMap<String, f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Labels and detector scores for one evaluated example.
#[derive(Debug, Clone, Serialize)]
pub struct ExampleEvaluation {
    pub id: String,
    pub field_correct: IndexMap<String, bool>,
    pub document_error: bool,
    pub detectors: IndexMap<String, DetectorScores>,
}

/// The full evaluation artifact: accuracy of the generated outputs, one
/// metric row per detector and level, and per-example scores/labels.
#[derive(Debug, Clone, Serialize)]
pub struct EvaluationReport {
    pub inputs_digest: String,
    pub num_examples: usize,
    pub num_evaluated: usize,
    pub skipped: Vec<String>,
    pub document_accuracy: f64,
    pub field_accuracy: f64,
    pub detectors: Vec<DetectorEvaluation>,
    pub examples: Vec<ExampleEvaluation>,
}

impl EvaluationReport {
    /// Fixed-width table mirroring the report's headline quantities.
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "Examples evaluated: {} of {} | Document accuracy: {:.4} | Field accuracy: {:.4}\n\n",
            self.num_evaluated, self.num_examples, self.document_accuracy, self.field_accuracy
        ));
        out.push_str(&format!(
            "{:<22} {:<9} {:>8} {:>14} {:>9} {:>6} {:>7}\n",
            "detector", "level", "AUROC", "P@NumErrors", "ConfGap", "N", "errors"
        ));
        for row in &self.detectors {
            if let Some(reason) = &row.unavailable {
                out.push_str(&format!("{:<22} unavailable: {reason}\n", row.detector));
                continue;
            }
            for (level, bundle) in
                [("document", &row.document), ("field", &row.field)]
            {
                if let Some(bundle) = bundle {
                    out.push_str(&format!(
                        "{:<22} {:<9} {:>8} {:>14} {:>9} {:>6} {:>7}\n",
                        row.detector,
                        level,
                        bundle.auroc.to_string(),
                        bundle.precision_at_num_errors.to_string(),
                        bundle.confidence_gap.to_string(),
                        bundle.num_examples,
                        bundle.num_errors
                    ));
                }
            }
        }
        out
    }
}

struct ExampleRun {
    id: String,
    field_correct: IndexMap<String, bool>,
    detectors: IndexMap<String, DetectorScores>,
}

/// Evaluates every named detector over the dataset's generated outputs.
/// Examples run concurrently up to `concurrency`; results are assembled in
/// dataset order so reports are reproducible.
pub async fn evaluate_dataset(
    scorer: &TrustScorer,
    examples: &[BenchmarkExample],
    outputs: &[GeneratedOutput],
    detectors: &[DetectorKind],
    concurrency: usize,
    inputs_digest: String,
) -> EvaluationReport {
    let semaphore = Arc::new(Semaphore::new(concurrency.max(1)));
    let mut handles = Vec::new();
    let mut skipped = Vec::new();

    for example in examples {
        let output = outputs
            .iter()
            .find(|o| o.id == example.id)
            .and_then(|o| o.output.clone().map(|v| (v, o.logprobs.clone())));
        let Some((output_value, logprobs)) = output else {
            skipped.push(example.id.clone());
            continue;
        };
        let example = example.clone();
        let detectors = detectors.to_vec();
        let scorer = scorer.clone();
        let semaphore = Arc::clone(&semaphore);
        handles.push(tokio::spawn(async move {
            let _permit = semaphore.acquire_owned().await.expect("semaphore open");
            run_example(&scorer, &example, output_value, logprobs, &detectors).await
        }));
    }

    let mut runs = Vec::with_capacity(handles.len());
    for handle in handles {
        runs.push(handle.await.expect("example evaluation task panicked"));
    }

    build_report(examples, detectors, runs, skipped, inputs_digest)
}

async fn run_example(
    scorer: &TrustScorer,
    example: &BenchmarkExample,
    output_value: Value,
    logprobs: Option<Vec<f64>>,
    detectors: &[DetectorKind],
) -> ExampleRun {
    let fields = example.output_schema.top_level_fields();

    let output = StructuredOutput::from_value(output_value.clone()).ok();
    let mut field_correct_map = IndexMap::new();
    for field in &fields {
        let predicted = output
            .as_ref()
            .and_then(|o| o.get(field))
            .cloned()
            .unwrap_or(Value::Null);
        let truth = example.ground_truth.get(field).cloned().unwrap_or(Value::Null);
        field_correct_map.insert(
            field.clone(),
            field_correct(&predicted, &truth, example.comparison_profile),
        );
    }

    let task = output.and_then(|output| {
        ScoringTask::new(
            example.system_message.clone(),
            example.user_message.clone(),
            example.output_schema.clone(),
            output,
            logprobs,
        )
        .ok()
    });

    let scoped = scorer.with_tag_scope(&example.id);
    let mut detector_scores = IndexMap::new();
    for &detector in detectors {
        let scores = match &task {
            Some(task) => run_detector(&scoped, detector, task).await,
            None => DetectorScores {
                doc: None,
                fields: None,
                error: Some("generated output does not fit the schema".to_string()),
            },
        };
        detector_scores.insert(detector.name().to_string(), scores);
    }

    ExampleRun {
        id: example.id.clone(),
        field_correct: field_correct_map,
        detectors: detector_scores,
    }
}

async fn run_detector(
    scorer: &TrustScorer,
    detector: DetectorKind,
    task: &ScoringTask,
) -> DetectorScores {
    match detector {
        DetectorKind::Construct => match scorer.score(task).await {
            Ok(report) => DetectorScores {
                doc: Some(report.trustworthiness_score),
                fields: Some(report.per_field_scores),
                error: None,
            },
            Err(e) => DetectorScores { doc: None, fields: None, error: Some(e.to_string()) },
        },
        DetectorKind::JudgeDoc => match scorer.judge_document(task).await {
            Ok(score) => DetectorScores { doc: Some(score), fields: None, error: None },
            Err(e) => DetectorScores { doc: None, fields: None, error: Some(e.to_string()) },
        },
        DetectorKind::JudgeFieldsSingle => match scorer.judge_fields_single_call(task).await {
            Ok(fields) => DetectorScores { doc: None, fields: Some(fields), error: None },
            Err(e) => DetectorScores { doc: None, fields: None, error: Some(e.to_string()) },
        },
        DetectorKind::JudgeFieldsMulti => match scorer.judge_fields_multi_call(task).await {
            Ok(result) => DetectorScores {
                doc: None,
                fields: Some(result.scores),
                error: if result.failures.is_empty() {
                    None
                } else {
                    Some(format!(
                        "failed fields: {}",
                        result.failures.keys().cloned().collect::<Vec<_>>().join(", ")
                    ))
                },
            },
            Err(e) => DetectorScores { doc: None, fields: None, error: Some(e.to_string()) },
        },
        DetectorKind::Logprob => match logprob_score(task) {
            Ok(score) => DetectorScores { doc: Some(score), fields: None, error: None },
            Err(e) => DetectorScores { doc: None, fields: None, error: Some(e.to_string()) },
        },
    }
}

fn build_report(
    examples: &[BenchmarkExample],
    detectors: &[DetectorKind],
    runs: Vec<ExampleRun>,
    skipped: Vec<String>,
    inputs_digest: String,
) -> EvaluationReport {
    // Reassemble in dataset order.
    let mut by_id: IndexMap<String, ExampleRun> =
        runs.into_iter().map(|run| (run.id.clone(), run)).collect();
    let mut ordered: Vec<ExampleRun> = Vec::with_capacity(by_id.len());
    for example in examples {
        if let Some(run) = by_id.shift_remove(&example.id) {
            ordered.push(run);
        }
    }

    let correctness: Vec<Vec<bool>> = ordered
        .iter()
        .map(|run| run.field_correct.values().copied().collect())
        .collect();
    let (doc_accuracy, fld_accuracy) = if correctness.is_empty() {
        (0.0, 0.0)
    } else {
        (document_accuracy(&correctness), field_accuracy(&correctness))
    };

    let mut detector_rows = Vec::new();
    for &detector in detectors {
        let name = detector.name();

        let mut doc_scores = Vec::new();
        let mut doc_labels = Vec::new();
        let mut field_scores = Vec::new();
        let mut field_labels = Vec::new();
        let mut first_error: Option<String> = None;

        for run in &ordered {
            let Some(scores) = run.detectors.get(name) else { continue };
            if first_error.is_none() {
                first_error = scores.error.clone();
            }
            let doc_error = run.field_correct.values().any(|correct| !correct);
            if let Some(doc) = scores.doc {
                doc_scores.push(doc);
                doc_labels.push(doc_error);
            }
            if let Some(fields) = &scores.fields {
                for (field, score) in fields {
                    if let Some(correct) = run.field_correct.get(field) {
                        field_scores.push(*score);
                        field_labels.push(!correct);
                    }
                }
            }
        }

        let row = if doc_scores.is_empty() && field_scores.is_empty() {
            DetectorEvaluation {
                detector: name.to_string(),
                document: None,
                field: None,
                unavailable: Some(
                    first_error.unwrap_or_else(|| "no scores produced".to_string()),
                ),
            }
        } else {
            DetectorEvaluation {
                detector: name.to_string(),
                document: (!doc_scores.is_empty())
                    .then(|| MetricBundle::compute(&doc_scores, &doc_labels)),
                field: (!field_scores.is_empty())
                    .then(|| MetricBundle::compute(&field_scores, &field_labels)),
                unavailable: None,
            }
        };
        detector_rows.push(row);
    }

    let example_rows = ordered
        .into_iter()
        .map(|run| ExampleEvaluation {
            document_error: run.field_correct.values().any(|correct| !correct),
            id: run.id,
            field_correct: run.field_correct,
            detectors: run.detectors,
        })
        .collect();

    EvaluationReport {
        inputs_digest,
        num_examples: examples.len(),
        num_evaluated: correctness.len(),
        skipped,
        document_accuracy: doc_accuracy,
        field_accuracy: fld_accuracy,
        detectors: detector_rows,
        examples: example_rows,
    }
}
