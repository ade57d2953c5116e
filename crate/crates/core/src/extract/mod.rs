//! Term and relation extraction with three strategies: zero-shot prompting,
//! k-shot in-context learning and fine-tuned models.

mod demos;
mod finetune;
mod infer;
pub mod prompts;
mod run;
mod zero_shot;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::TopConcept;
use crate::llm::GatewayError;
use crate::markup::MarkupError;

pub use demos::{demo_candidates, rank_by_similarity, select_demonstrations, DemoSelection};
pub use finetune::{export_finetune_dataset, finetune_records};
pub use infer::{
    extract_relations_finetuned, extract_relations_icl, extract_terms_finetuned, extract_terms_icl,
    RelationExtraction, TermExtraction,
};
pub use run::{
    load_run, read_run, run_strategy, run_to_string, write_run, AlignmentSummary, ExtractionRun,
    Failure, PredictedTerm, Prediction, RunHeader, RunInputs, RunParams,
};
pub use zero_shot::{extract_zero_shot, parse_zero_shot, ZeroShotOutput, ZeroShotParse};

pub const DEFAULT_K: usize = 16;
pub const DEFAULT_MAX_DRIFT: f64 = 0.25;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    ZeroShot,
    Icl,
    FineTuned,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Terms,
    Relations,
}

impl Strategy {
    pub fn as_str(self) -> &'static str {
        match self {
            Strategy::ZeroShot => "zero_shot",
            Strategy::Icl => "icl",
            Strategy::FineTuned => "fine_tuned",
        }
    }
}

impl Task {
    pub fn as_str(self) -> &'static str {
        match self {
            Task::Terms => "terms",
            Task::Relations => "relations",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Strategy {
    type Err = String;
    /// Accepts `-` or `_` as separator.
    fn from_str(s: &str) -> Result<Self, String> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "zero_shot" => Ok(Strategy::ZeroShot),
            "icl" => Ok(Strategy::Icl),
            "fine_tuned" => Ok(Strategy::FineTuned),
            other => Err(format!("unknown strategy `{other}`")),
        }
    }
}

impl FromStr for Task {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.trim().to_ascii_lowercase().as_str() {
            "terms" => Ok(Task::Terms),
            "relations" => Ok(Task::Relations),
            other => Err(format!("unknown task `{other}`")),
        }
    }
}

/// One retrieved training example placed in a k-shot prompt.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Demonstration {
    pub id: String,
    /// Text embedded and compared against the probe.
    pub input_repr: String,
    pub prompt_input: String,
    pub prompt_output: String,
}

#[derive(Debug, Error)]
pub enum ExtractError {
    #[error("invalid input: {0}")]
    Precondition(String),
    #[error("configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error(transparent)]
    Markup(#[from] MarkupError),
    #[error("item `{id}`: {source}")]
    Item {
        id: String,
        #[source]
        source: MarkupError,
    },
    #[error("unparseable structured output: {0}")]
    ZeroShotParse(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("run file line {line}: {message}")]
    RunFile { line: usize, message: String },
}

/// A name-level term, as produced by zero-shot extraction.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NamedTerm {
    pub name: String,
    pub concept: TopConcept,
}
