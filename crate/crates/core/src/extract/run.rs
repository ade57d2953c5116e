//! Running a strategy over a dataset, and the run file format.
//!
//! A run file holds one JSON record per line: a `run` header first, then
//! `prediction` and `failure` records in dataset order.

use std::collections::BTreeMap;
use std::fs;
use std::io::BufRead;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::clock::Clock;
use crate::corpus::{AnnotatedText, Dataset, TopConcept, Triple};
use crate::llm::Gateway;
use crate::markup::{DroppedTerm, MarkerMap};
use crate::text::short_hash;

use super::demos::{demo_candidates, select_demonstrations};
use super::infer::{self, keep_listed};
use super::prompts::{relations_repr, ZERO_SHOT_PROFILES};
use super::zero_shot::extract_zero_shot;
use super::{Demonstration, ExtractError, Strategy, Task, DEFAULT_MAX_DRIFT};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunParams {
    /// Base model for zero-shot and k-shot runs, tuned model id otherwise.
    pub model: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    pub marker_map: MarkerMap,
    pub max_drift: f64,
    pub temperature: f64,
    pub max_output_tokens: u32,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub profile: Option<String>,
    pub concurrency: usize,
}

impl Default for RunParams {
    fn default() -> Self {
        RunParams {
            model: crate::llm::DEFAULT_BASE_MODEL.into(),
            k: None,
            marker_map: MarkerMap::default(),
            max_drift: DEFAULT_MAX_DRIFT,
            temperature: 0.0,
            max_output_tokens: 4096,
            profile: None,
            concurrency: 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunHeader {
    pub run_id: String,
    pub strategy: Strategy,
    pub task: Task,
    pub dataset: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub train_dataset: Option<String>,
    pub params: RunParams,
    /// Documents not sent to the model (relation runs with fewer than two terms).
    #[serde(default)]
    pub skipped: Vec<String>,
    pub started_at: DateTime<Utc>,
    pub finished_at: DateTime<Utc>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PredictedTerm {
    pub surface: String,
    pub concept: TopConcept,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub start: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub end: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignmentSummary {
    pub drift_ratio: f64,
    pub recovered: usize,
    pub dropped: Vec<DroppedTerm>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub doc: String,
    #[serde(default)]
    pub terms: Vec<PredictedTerm>,
    #[serde(default)]
    pub triples: Vec<Triple>,
    #[serde(default)]
    pub warnings: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alignment: Option<AlignmentSummary>,
    /// Ids of the demonstrations in prompt order.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub demos: Vec<String>,
    /// Fingerprint of the model request, matching the gateway audit log.
    pub request_hash: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Failure {
    pub doc: String,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExtractionRun {
    pub header: RunHeader,
    pub predictions: Vec<Prediction>,
    pub failures: Vec<Failure>,
}

impl ExtractionRun {
    pub fn prediction(&self, doc: &str) -> Option<&Prediction> {
        self.predictions.iter().find(|p| p.doc == doc)
    }

    /// Distinct predicted term surfaces per document, in prediction order.
    pub fn term_lists(&self) -> BTreeMap<String, Vec<String>> {
        self.predictions
            .iter()
            .map(|p| {
                let mut seen = Vec::<String>::new();
                for t in &p.terms {
                    if !seen.contains(&t.surface) {
                        seen.push(t.surface.clone());
                    }
                }
                (p.doc.clone(), seen)
            })
            .collect()
    }
}

pub struct RunInputs<'a> {
    pub dataset: &'a Dataset,
    /// Demonstration pool; required for k-shot runs.
    pub train: Option<&'a Dataset>,
    /// Term lists for relation runs. Defaults to the dataset's gold terms.
    pub term_lists: Option<&'a BTreeMap<String, Vec<String>>>,
}

impl<'a> RunInputs<'a> {
    pub fn new(dataset: &'a Dataset) -> Self {
        RunInputs {
            dataset,
            train: None,
            term_lists: None,
        }
    }
}

fn checked_params(
    strategy: Strategy,
    params: &RunParams,
    train: Option<&Dataset>,
) -> Result<RunParams, ExtractError> {
    let mut p = params.clone();
    let cfg = |m: String| Err(ExtractError::Config(m));
    if p.model.trim().is_empty() {
        return cfg("model is empty".into());
    }
    if !(0.0..=1.0).contains(&p.max_drift) {
        return cfg(format!("max_drift {} outside [0, 1]", p.max_drift));
    }
    if !p.temperature.is_finite() || p.temperature < 0.0 {
        return cfg(format!("invalid temperature {}", p.temperature));
    }
    if p.max_output_tokens == 0 {
        return cfg("max_output_tokens must be positive".into());
    }
    match strategy {
        Strategy::Icl => {
            match p.k {
                None => return cfg("k-shot runs need k".into()),
                Some(0) => return cfg("k must be at least 1".into()),
                Some(_) => {}
            }
            if train.is_none_or(|t| t.items.is_empty()) {
                return cfg("k-shot runs need a non-empty training set".into());
            }
            p.profile = None;
        }
        Strategy::ZeroShot => {
            p.k = None;
            let profile = p
                .profile
                .get_or_insert_with(|| ZERO_SHOT_PROFILES[0].to_string());
            if !ZERO_SHOT_PROFILES.contains(&profile.as_str()) {
                return cfg(format!("unknown zero-shot profile `{profile}`"));
            }
        }
        Strategy::FineTuned => {
            p.k = None;
            p.profile = None;
        }
    }
    p.concurrency = p.concurrency.max(1);
    Ok(p)
}

fn spans_to_terms(a: &AnnotatedText) -> Vec<PredictedTerm> {
    a.spans
        .iter()
        .map(|s| PredictedTerm {
            surface: s.surface.clone(),
            concept: s.concept,
            start: Some(s.start),
            end: Some(s.end),
        })
        .collect()
}

struct Job<'a> {
    item: &'a AnnotatedText,
    terms: Vec<String>,
}

fn process(
    job: &Job<'_>,
    strategy: Strategy,
    task: Task,
    params: &RunParams,
    candidates: &[Demonstration],
    gw: &Gateway,
) -> Result<Prediction, ExtractError> {
    let doc = &job.item.doc;
    let mut pred = Prediction {
        doc: doc.id.clone(),
        terms: Vec::new(),
        triples: Vec::new(),
        warnings: Vec::new(),
        alignment: None,
        demos: Vec::new(),
        request_hash: String::new(),
    };
    let demos = if strategy == Strategy::Icl {
        let probe = match task {
            Task::Terms => doc.text.clone(),
            Task::Relations => relations_repr(&job.terms, &doc.text),
        };
        let sel = select_demonstrations(candidates, &probe, params.k.unwrap_or(1), gw)?;
        pred.warnings.extend(sel.warnings);
        pred.demos = sel.demos.iter().map(|d| d.id.clone()).collect();
        sel.demos
    } else {
        Vec::new()
    };
    match (strategy, task) {
        (Strategy::ZeroShot, Task::Terms) => {
            let z = extract_zero_shot(doc, gw, params, None)?;
            pred.terms = z
                .output
                .terms
                .into_iter()
                .map(|t| PredictedTerm {
                    surface: t.name,
                    concept: t.concept,
                    start: None,
                    end: None,
                })
                .collect();
            pred.warnings.extend(z.warnings);
            pred.request_hash = z.request_hash;
        }
        (Strategy::ZeroShot, Task::Relations) => {
            let z = extract_zero_shot(doc, gw, params, Some(&job.terms))?;
            pred.warnings.extend(z.warnings);
            pred.triples = keep_listed(z.output.relations, &job.terms, &mut pred.warnings);
            pred.request_hash = z.request_hash;
        }
        (_, Task::Terms) => {
            let t = if strategy == Strategy::Icl {
                infer::extract_terms_icl(doc, &demos, gw, params)?
            } else {
                infer::extract_terms_finetuned(doc, &params.model, gw, params)?
            };
            pred.terms = spans_to_terms(&t.annotated);
            for d in &t.report.dropped {
                pred.warnings.push(format!(
                    "term `{}` not recovered ({:?})",
                    d.surface, d.reason
                ));
            }
            pred.alignment = Some(AlignmentSummary {
                drift_ratio: t.report.drift_ratio,
                recovered: t.report.recovered.len(),
                dropped: t.report.dropped,
            });
            pred.request_hash = t.request_hash;
        }
        (_, Task::Relations) => {
            let r = if strategy == Strategy::Icl {
                infer::extract_relations_icl(&job.terms, doc, &demos, gw, params)?
            } else {
                infer::extract_relations_finetuned(&job.terms, doc, &params.model, gw, params)?
            };
            pred.triples = r.triples;
            pred.warnings.extend(r.warnings);
            pred.request_hash = r.request_hash;
        }
    }
    Ok(pred)
}

/// Run one strategy over every eligible document.
///
/// Only configuration problems abort; a document that fails is recorded as
/// a failure and the run continues. Documents may be processed
/// concurrently, but results are assembled in dataset order.
pub fn run_strategy(
    inputs: &RunInputs<'_>,
    strategy: Strategy,
    task: Task,
    params: &RunParams,
    gw: &Gateway,
    clock: &Clock,
) -> Result<ExtractionRun, ExtractError> {
    let started_at = clock.now();
    let params = checked_params(strategy, params, inputs.train)?;
    let candidates = match (strategy, inputs.train) {
        (Strategy::Icl, Some(train)) => {
            let c = demo_candidates(train, task, &params.marker_map)?;
            if c.is_empty() {
                return Err(ExtractError::Config(format!(
                    "training set `{}` has no eligible demonstrations",
                    train.name
                )));
            }
            c
        }
        _ => Vec::new(),
    };

    let mut jobs = Vec::new();
    let mut skipped = Vec::new();
    for item in &inputs.dataset.items {
        let terms = match task {
            Task::Terms => Vec::new(),
            Task::Relations => match inputs.term_lists {
                Some(lists) => lists.get(&item.doc.id).cloned().unwrap_or_default(),
                None => item.term_list(),
            },
        };
        if task == Task::Relations && terms.len() < 2 {
            skipped.push(item.doc.id.clone());
            continue;
        }
        jobs.push(Job { item, terms });
    }

    let results: Vec<Mutex<Option<Result<Prediction, String>>>> =
        jobs.iter().map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    std::thread::scope(|s| {
        for _ in 0..params.concurrency.min(jobs.len()) {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some(job) = jobs.get(i) else { break };
                let r = process(job, strategy, task, &params, &candidates, gw)
                    .map_err(|e| e.to_string());
                *results[i].lock().unwrap() = Some(r);
            });
        }
    });

    let mut predictions = Vec::new();
    let mut failures = Vec::new();
    for (job, slot) in jobs.iter().zip(results) {
        match slot.into_inner().unwrap().expect("every job ran") {
            Ok(p) => predictions.push(p),
            Err(error) => {
                log::warn!("{}: {error}", job.item.doc.id);
                failures.push(Failure {
                    doc: job.item.doc.id.clone(),
                    error,
                })
            }
        }
    }

    let identity = serde_json::json!({
        "strategy": strategy,
        "task": task,
        "dataset": inputs.dataset.name,
        "train": inputs.train.map(|t| t.name.clone()),
        "params": params,
        "docs": jobs.iter().map(|j| &j.item.doc.id).collect::<Vec<_>>(),
    });
    let run_id = format!(
        "{}-{}-{}",
        strategy,
        task,
        &short_hash(identity.to_string().as_bytes())[..8]
    );
    Ok(ExtractionRun {
        header: RunHeader {
            run_id,
            strategy,
            task,
            dataset: inputs.dataset.name.clone(),
            train_dataset: inputs.train.map(|t| t.name.clone()),
            params,
            skipped,
            started_at,
            finished_at: clock.now(),
        },
        predictions,
        failures,
    })
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum RunRecord {
    Run(RunHeader),
    Prediction(Prediction),
    Failure(Failure),
}

pub fn run_to_string(run: &ExtractionRun) -> String {
    let mut out = String::new();
    let mut push = |r: &RunRecord| {
        out.push_str(&serde_json::to_string(r).expect("run record serializes"));
        out.push('\n');
    };
    push(&RunRecord::Run(run.header.clone()));
    for p in &run.predictions {
        push(&RunRecord::Prediction(p.clone()));
    }
    for f in &run.failures {
        push(&RunRecord::Failure(f.clone()));
    }
    out
}

pub fn write_run(run: &ExtractionRun, path: impl AsRef<Path>) -> Result<(), ExtractError> {
    let path = path.as_ref();
    fs::write(path, run_to_string(run)).map_err(|source| ExtractError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn read_run(reader: impl BufRead) -> Result<ExtractionRun, ExtractError> {
    let mut header = None;
    let mut predictions = Vec::new();
    let mut failures = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|e| ExtractError::RunFile {
            line: line_no,
            message: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: RunRecord = serde_json::from_str(&line).map_err(|e| ExtractError::RunFile {
            line: line_no,
            message: e.to_string(),
        })?;
        match rec {
            RunRecord::Run(h) if header.is_none() => header = Some(h),
            RunRecord::Run(_) => {
                return Err(ExtractError::RunFile {
                    line: line_no,
                    message: "second run header".into(),
                })
            }
            RunRecord::Prediction(p) => predictions.push(p),
            RunRecord::Failure(f) => failures.push(f),
        }
    }
    let header = header.ok_or(ExtractError::RunFile {
        line: 1,
        message: "missing run header".into(),
    })?;
    Ok(ExtractionRun {
        header,
        predictions,
        failures,
    })
}

pub fn load_run(path: impl AsRef<Path>) -> Result<ExtractionRun, ExtractError> {
    let path = path.as_ref();
    let f = fs::File::open(path).map_err(|source| ExtractError::Io {
        path: path.display().to_string(),
        source,
    })?;
    read_run(std::io::BufReader::new(f))
}
