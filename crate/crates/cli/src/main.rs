mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use ontoforge::extract::{Strategy, Task};
use ontoforge::TopConcept;

/// Ontology learning from domain text with LLM-based extraction.
#[derive(Debug, Parser)]
#[command(name = "ontoforge", version)]
pub struct Cli {
    /// Pipeline configuration (TOML). Defaults apply when omitted.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Log more; repeat for debug output.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Distill question-answer documents per top concept from a corpus.
    Distill(DistillArgs),
    /// Write a fine-tuning file from an annotated training set.
    ExportFinetune(ExportFinetuneArgs),
    /// Create or poll fine-tuning jobs.
    #[command(subcommand)]
    Finetune(FinetuneCommand),
    /// Run term or relation extraction over a dataset.
    Extract(ExtractArgs),
    /// Score a run file against gold annotations.
    Evaluate(EvaluateArgs),
    /// Score several run files side by side.
    Compare(CompareArgs),
    /// Serve the review API and UI.
    ReviewServe(ReviewServeArgs),
    /// Consolidate triples into a concept graph.
    BuildGraph(BuildGraphArgs),
    /// Convert a graph file to Cypher, GraphML or the native graph format.
    Export(ExportArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum StrategyArg {
    ZeroShot,
    Icl,
    FineTuned,
}

impl From<StrategyArg> for Strategy {
    fn from(s: StrategyArg) -> Self {
        match s {
            StrategyArg::ZeroShot => Strategy::ZeroShot,
            StrategyArg::Icl => Strategy::Icl,
            StrategyArg::FineTuned => Strategy::FineTuned,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum TaskArg {
    Terms,
    Relations,
}

impl From<TaskArg> for Task {
    fn from(t: TaskArg) -> Self {
        match t {
            TaskArg::Terms => Task::Terms,
            TaskArg::Relations => Task::Relations,
        }
    }
}

#[derive(Debug, Args)]
pub struct DistillArgs {
    /// Dataset file whose documents form the source corpus.
    #[arg(long)]
    pub corpus: PathBuf,
    /// Topics to distill; all six when omitted.
    #[arg(long = "topic", value_parser = parse_concept)]
    pub topics: Vec<TopConcept>,
    /// Output dataset file of distilled documents.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ExportFinetuneArgs {
    #[arg(long)]
    pub train: PathBuf,
    #[arg(long, value_enum)]
    pub task: TaskArg,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Subcommand)]
pub enum FinetuneCommand {
    /// Upload a fine-tuning file and start a job.
    Create {
        #[arg(long)]
        file: PathBuf,
        /// Selects the configured hyperparameters.
        #[arg(long, value_enum)]
        task: TaskArg,
        /// Overrides the configured base model.
        #[arg(long)]
        base_model: Option<String>,
    },
    /// Show the current state of a job.
    Poll {
        #[arg(long)]
        job: String,
    },
}

#[derive(Debug, Args)]
pub struct ExtractArgs {
    #[arg(long, value_enum)]
    pub strategy: StrategyArg,
    #[arg(long, value_enum)]
    pub task: TaskArg,
    /// Dataset to extract from.
    #[arg(long)]
    pub dataset: PathBuf,
    /// Demonstration pool for k-shot runs.
    #[arg(long)]
    pub train: Option<PathBuf>,
    /// Model id; required for fine-tuned runs.
    #[arg(long)]
    pub model: Option<String>,
    /// Number of demonstrations; overrides the configured k.
    #[arg(long)]
    pub k: Option<usize>,
    /// Term run whose predictions supply the term lists of a relation run.
    #[arg(long)]
    pub terms_run: Option<PathBuf>,
    /// Output run file.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub run: PathBuf,
    #[arg(long)]
    pub gold: PathBuf,
    /// Also write the report as JSON.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    #[arg(long = "run", required = true)]
    pub runs: Vec<PathBuf>,
    #[arg(long)]
    pub gold: PathBuf,
}

#[derive(Debug, Args)]
pub struct ReviewServeArgs {
    /// Overrides `review.listen`.
    #[arg(long)]
    pub listen: Option<String>,
    /// Overrides `review.data_dir`.
    #[arg(long)]
    pub data_dir: Option<PathBuf>,
    /// Overrides `review.ui_dir`.
    #[arg(long)]
    pub ui_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BuildGraphArgs {
    /// Relation run file; every predicted triple is used.
    #[arg(
        long,
        conflicts_with = "from_review",
        required_unless_present = "from_review"
    )]
    pub run: Option<PathBuf>,
    /// Review run id; only accepted and edited triples are used.
    #[arg(long)]
    pub from_review: Option<String>,
    /// Overrides `review.data_dir` for `--from-review`.
    #[arg(long)]
    pub review_dir: Option<PathBuf>,
    /// Gold dataset supplying term concepts.
    #[arg(long)]
    pub gold: Option<PathBuf>,
    /// Term run supplying term concepts.
    #[arg(long)]
    pub terms_run: Option<PathBuf>,
    /// Output graph file.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Format {
    Cypher,
    Graphml,
    Graph,
}

#[derive(Debug, Args)]
pub struct ExportArgs {
    #[arg(long)]
    pub graph: PathBuf,
    #[arg(long, value_enum)]
    pub format: Format,
    /// Output path; standard output when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn parse_concept(s: &str) -> Result<TopConcept, String> {
    s.parse::<TopConcept>().map_err(|e| e.to_string())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(2)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
