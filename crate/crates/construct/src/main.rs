//! Command-line entry point: score structured outputs, generate benchmark
//! outputs, and evaluate detectors.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Parser, Subcommand};
use sha2::{Digest, Sha256};
use tokio::sync::Semaphore;

use construct::backend::{ChatBackend, ChatMessage, ChatRequest, HttpBackend, MockBackend};
use construct::config::FileConfig;
use construct::engine::{ScoringConfig, TrustScorer};
use construct::eval::{
    evaluate_dataset, load_dataset, load_outputs, DetectorKind, GeneratedOutput,
};
use construct::templates::TemplateSet;
use construct::types::{parse_lenient_json, ScoringTask, StructuredOutput};

const EXIT_INVALID_INPUT: u8 = 2;
const EXIT_BACKEND_FAILURE: u8 = 3;

#[derive(Parser)]
#[command(name = "construct", version, about = "Trustworthiness scoring for LLM structured outputs")]
struct Cli {
    /// TOML config file; flags override file settings.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Chat-completions base URL (or CONSTRUCT_BASE_URL).
    #[arg(long, global = true)]
    base_url: Option<String>,

    /// Model used for verifier and judge calls.
    #[arg(long, global = true)]
    model: Option<String>,

    /// Per-batch call deadline in milliseconds.
    #[arg(long, global = true)]
    deadline_ms: Option<u64>,

    /// Fields scoring below this are flagged for review.
    #[arg(long, global = true)]
    field_threshold: Option<f64>,

    /// Directory of prompt-template overrides.
    #[arg(long, global = true)]
    template_dir: Option<PathBuf>,

    /// Scripted mock backend (JSON array of replies) instead of HTTP.
    #[arg(long, global = true)]
    mock_script: Option<PathBuf>,

    /// Maximum examples processed concurrently in batch commands.
    #[arg(long, global = true, default_value_t = 4)]
    concurrency: usize,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Score one task file and print the trust report.
    Score {
        /// Task file: {system, user, schema, generated_output, logprobs?}.
        #[arg(long)]
        task: PathBuf,
        /// Emit the report as a single JSON document instead of text.
        #[arg(long)]
        json: bool,
    },
    /// Run the generator model over a dataset and store its outputs.
    Generate {
        #[arg(long)]
        dataset: PathBuf,
        /// Where the newline-delimited output records go.
        #[arg(long)]
        outputs: PathBuf,
        /// Skip examples whose ids already appear in the outputs file.
        #[arg(long)]
        resume: bool,
    },
    /// Judge stored outputs against ground truth and score detectors.
    Evaluate {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        outputs: PathBuf,
        /// Comma-separated detector names.
        #[arg(long)]
        detectors: String,
        /// Directory for the content-addressed report file.
        #[arg(long, default_value = "reports")]
        report_dir: PathBuf,
        /// Print the report JSON to stdout instead of the table.
        #[arg(long)]
        json: bool,
    },
}

fn fail(code: u8, message: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {message}");
    ExitCode::from(code)
}

#[tokio::main]
async fn main() -> ExitCode {
    let cli = Cli::parse();

    let mut config = ScoringConfig::default();
    let mut file_base_url = None;
    if let Some(path) = &cli.config {
        match FileConfig::load(path) {
            Ok(file) => {
                file.apply(&mut config);
                file_base_url = file.base_url.clone();
            }
            Err(e) => return fail(EXIT_INVALID_INPUT, e),
        }
    }
    if let Some(model) = &cli.model {
        config.model = model.clone();
    }
    if let Some(deadline) = cli.deadline_ms {
        config.deadline_ms = deadline;
    }
    if let Some(threshold) = cli.field_threshold {
        config.field_threshold = threshold;
    }

    let templates = match &cli.template_dir {
        Some(dir) => match TemplateSet::with_overrides(dir) {
            Ok(set) => set,
            Err(e) => return fail(EXIT_INVALID_INPUT, e),
        },
        None => TemplateSet::builtin(),
    };

    let backend: Arc<dyn ChatBackend> = if let Some(script) = &cli.mock_script {
        match MockBackend::from_script_file(script) {
            Ok(mock) => Arc::new(mock),
            Err(e) => return fail(EXIT_INVALID_INPUT, format!("mock script: {e}")),
        }
    } else {
        let base_url = cli.base_url.clone().or(file_base_url);
        match HttpBackend::from_env(base_url.as_deref()) {
            Ok(http) => Arc::new(http),
            Err(e) => return fail(EXIT_BACKEND_FAILURE, e),
        }
    };

    let scorer = TrustScorer::new(backend, templates, config);
    match cli.command {
        Command::Score { task, json } => cmd_score(&scorer, &task, json).await,
        Command::Generate { dataset, outputs, resume } => {
            cmd_generate(&scorer, &dataset, &outputs, resume, cli.concurrency).await
        }
        Command::Evaluate { dataset, outputs, detectors, report_dir, json } => {
            cmd_evaluate(&scorer, &dataset, &outputs, &detectors, &report_dir, json, cli.concurrency)
                .await
        }
    }
}

async fn cmd_score(scorer: &TrustScorer, task_path: &Path, json: bool) -> ExitCode {
    let text = match std::fs::read_to_string(task_path) {
        Ok(text) => text,
        Err(e) => return fail(EXIT_INVALID_INPUT, format!("{}: {e}", task_path.display())),
    };
    let task = match ScoringTask::from_json_text(&text) {
        Ok(task) => task,
        Err(e) => {
            return fail(EXIT_INVALID_INPUT, format!("{}: {e}", task_path.display()))
        }
    };

    match scorer.score(&task).await {
        Ok(report) => {
            if json {
                println!(
                    "{}",
                    serde_json::to_string_pretty(&report).expect("report serializes")
                );
            } else {
                print!("{}", report.to_text(&task.generated_output));
            }
            ExitCode::SUCCESS
        }
        Err(e) => fail(EXIT_BACKEND_FAILURE, e),
    }
}

async fn cmd_generate(
    scorer: &TrustScorer,
    dataset_path: &Path,
    outputs_path: &Path,
    resume: bool,
    concurrency: usize,
) -> ExitCode {
    let examples = match load_dataset(dataset_path) {
        Ok(examples) => examples,
        Err(e) => return fail(EXIT_INVALID_INPUT, e),
    };

    let mut records: Vec<GeneratedOutput> = Vec::new();
    if resume && outputs_path.exists() {
        match load_outputs(outputs_path) {
            Ok(existing) => records = existing,
            Err(e) => return fail(EXIT_INVALID_INPUT, e),
        }
    }
    let existing_ids: Vec<String> = records.iter().map(|r| r.id.clone()).collect();

    let semaphore = Arc::new(Semaphore::new(concurrency.max(1)));
    let mut handles = Vec::new();
    for example in &examples {
        if existing_ids.contains(&example.id) {
            continue;
        }
        let example = example.clone();
        let scorer = scorer.clone();
        let semaphore = Arc::clone(&semaphore);
        handles.push(tokio::spawn(async move {
            let _permit = semaphore.acquire_owned().await.expect("semaphore open");
            generate_one(&scorer, &example).await
        }));
    }

    let mut generated = Vec::new();
    for handle in handles {
        generated.push(handle.await.expect("generation task panicked"));
    }
    // Keep dataset order in the file.
    for example in &examples {
        if let Some(pos) = generated.iter().position(|r: &GeneratedOutput| r.id == example.id) {
            records.push(generated.swap_remove(pos));
        }
    }

    let mut lines = String::new();
    for record in &records {
        lines.push_str(&serde_json::to_string(record).expect("record serializes"));
        lines.push('\n');
    }
    if let Err(e) = write_atomically(outputs_path, lines.as_bytes()) {
        return fail(EXIT_INVALID_INPUT, format!("{}: {e}", outputs_path.display()));
    }

    let failures = records.iter().filter(|r| r.error.is_some()).count();
    println!(
        "generated {} outputs ({failures} failures) -> {}",
        records.len(),
        outputs_path.display()
    );
    ExitCode::SUCCESS
}

async fn generate_one(
    scorer: &TrustScorer,
    example: &construct::eval::BenchmarkExample,
) -> GeneratedOutput {
    let schema_value = match parse_lenient_json(example.output_schema.raw_schema_text()) {
        Ok(value) => value,
        Err(e) => {
            return GeneratedOutput {
                id: example.id.clone(),
                output: None,
                logprobs: None,
                error: Some(format!("schema unusable as response format: {e}")),
            }
        }
    };

    let mut messages = Vec::new();
    if !example.system_message.is_empty() {
        messages.push(ChatMessage::system(&example.system_message));
    }
    messages.push(ChatMessage::user(&example.user_message));
    let request = ChatRequest::new(messages, &scorer.config().model)
        .with_temperature(scorer.config().temperature)
        .with_response_format(schema_value)
        .with_logprobs()
        .with_tag(format!("{}/generate", example.id));

    let outcome = scorer.backend().complete(&request).await;
    if !outcome.is_completed() {
        return GeneratedOutput {
            id: example.id.clone(),
            output: None,
            logprobs: None,
            error: Some(outcome.diagnostic.unwrap_or_else(|| format!("{:?}", outcome.status))),
        };
    }

    let output = match &outcome.structured_payload {
        Some(payload) => Some(payload.clone()),
        None => outcome
            .content
            .as_deref()
            .and_then(|content| StructuredOutput::from_text(content).ok()),
    };
    match output {
        Some(output) => GeneratedOutput {
            id: example.id.clone(),
            output: Some(output.into_value()),
            logprobs: outcome.token_logprobs,
            error: None,
        },
        None => GeneratedOutput {
            id: example.id.clone(),
            output: None,
            logprobs: None,
            error: Some("reply was not a JSON object".to_string()),
        },
    }
}

#[allow(clippy::too_many_arguments)]
async fn cmd_evaluate(
    scorer: &TrustScorer,
    dataset_path: &Path,
    outputs_path: &Path,
    detector_list: &str,
    report_dir: &Path,
    json: bool,
    concurrency: usize,
) -> ExitCode {
    let detector_names: Vec<&str> =
        detector_list.split(',').map(str::trim).filter(|s| !s.is_empty()).collect();
    if detector_names.is_empty() {
        return fail(EXIT_INVALID_INPUT, "no detectors named; pass --detectors <name,...>");
    }
    let mut detectors = Vec::new();
    for name in detector_names {
        match name.parse::<DetectorKind>() {
            Ok(kind) => detectors.push(kind),
            Err(e) => return fail(EXIT_INVALID_INPUT, e),
        }
    }

    let examples = match load_dataset(dataset_path) {
        Ok(examples) => examples,
        Err(e) => return fail(EXIT_INVALID_INPUT, e),
    };
    let outputs = match load_outputs(outputs_path) {
        Ok(outputs) => outputs,
        Err(e) => return fail(EXIT_INVALID_INPUT, e),
    };

    let digest = match inputs_digest(dataset_path, outputs_path, detector_list) {
        Ok(digest) => digest,
        Err(e) => return fail(EXIT_INVALID_INPUT, e),
    };

    let report =
        evaluate_dataset(scorer, &examples, &outputs, &detectors, concurrency, digest.clone())
            .await;

    let report_json = serde_json::to_string_pretty(&report).expect("report serializes");
    if let Err(e) = std::fs::create_dir_all(report_dir) {
        return fail(EXIT_INVALID_INPUT, format!("{}: {e}", report_dir.display()));
    }
    let report_path = report_dir.join(format!("report-{digest}.json"));
    if let Err(e) = write_atomically(&report_path, report_json.as_bytes()) {
        return fail(EXIT_INVALID_INPUT, format!("{}: {e}", report_path.display()));
    }

    if json {
        println!("{report_json}");
    } else {
        print!("{}", report.to_table());
        println!("\nreport written to {}", report_path.display());
    }
    ExitCode::SUCCESS
}

/// Digest identifying an evaluation's exact inputs, used to name the report
/// file so different datasets or outputs never collide.
fn inputs_digest(dataset: &Path, outputs: &Path, detectors: &str) -> Result<String, String> {
    let mut hasher = Sha256::new();
    let dataset_bytes =
        std::fs::read(dataset).map_err(|e| format!("{}: {e}", dataset.display()))?;
    let outputs_bytes =
        std::fs::read(outputs).map_err(|e| format!("{}: {e}", outputs.display()))?;
    hasher.update(&dataset_bytes);
    hasher.update(&outputs_bytes);
    hasher.update(detectors.as_bytes());
    let digest = hasher.finalize();
    Ok(digest.iter().take(8).map(|b| format!("{b:02x}")).collect())
}

/// Writes through a temp file and renames, so report and output files are
/// never observed half-written.
fn write_atomically(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, bytes)?;
    std::fs::rename(&tmp, path)
}
