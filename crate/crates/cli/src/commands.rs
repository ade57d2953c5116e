use std::collections::BTreeMap;
use std::io::Write;
use std::sync::Arc;

use anyhow::{bail, Context, Result};

use ontoforge::clock::Clock;
use ontoforge::config::PipelineConfig;
use ontoforge::corpus::Dataset;
use ontoforge::distill::{chunk_documents, distill_topic, ChunkIndex};
use ontoforge::evaluate::{evaluate_run, render_comparison, render_report};
use ontoforge::extract::{
    export_finetune_dataset, load_run, run_strategy, write_run, RunInputs, Strategy, Task,
};
use ontoforge::llm::{validate_training_file, Gateway};
use ontoforge::ontology::{
    build_graph, consolidate, dataset_concepts, export_cypher, export_graph_file, export_graphml,
    graph_to_string, import_graph_file, run_concepts, EdgeKind,
};
use ontoforge::review::ReviewStore;
use ontoforge::{load_dataset, write_dataset, AnnotatedText, TopConcept, Triple};
use ontoforge_review::{run_server, ServerSettings};

use crate::{
    BuildGraphArgs, Cli, Command, CompareArgs, DistillArgs, EvaluateArgs, ExportArgs,
    ExportFinetuneArgs, ExtractArgs, FinetuneCommand, Format, ReviewServeArgs,
};

pub fn run(cli: Cli) -> Result<()> {
    let cfg = match &cli.config {
        Some(p) => {
            PipelineConfig::load(p).with_context(|| format!("loading config {}", p.display()))?
        }
        None => PipelineConfig::default(),
    };
    match cli.command {
        Command::Distill(a) => distill(&cfg, a),
        Command::ExportFinetune(a) => export_finetune(&cfg, a),
        Command::Finetune(c) => finetune(&cfg, c),
        Command::Extract(a) => extract(&cfg, a),
        Command::Evaluate(a) => evaluate(&cfg, a),
        Command::Compare(a) => compare(&cfg, a),
        Command::ReviewServe(a) => review_serve(&cfg, a),
        Command::BuildGraph(a) => build(&cfg, a),
        Command::Export(a) => export(a),
    }
}

fn gateway(cfg: &PipelineConfig) -> Result<Gateway> {
    cfg.provider
        .build_gateway()
        .context("setting up the model provider")
}

fn dataset(path: &std::path::Path) -> Result<Dataset> {
    load_dataset(path).with_context(|| format!("loading dataset {}", path.display()))
}

fn distill(cfg: &PipelineConfig, a: DistillArgs) -> Result<()> {
    let corpus = dataset(&a.corpus)?;
    let docs: Vec<_> = corpus.items.iter().map(|i| i.doc.clone()).collect();
    let gw = gateway(cfg)?;
    let chunks = chunk_documents(&docs, cfg.distill.max_chars);
    let n_chunks = chunks.len();
    let index = ChunkIndex::build(chunks, &gw)?;
    let topics = if a.topics.is_empty() {
        TopConcept::ALL.to_vec()
    } else {
        a.topics
    };
    let mut out = Dataset::new("distilled");
    for topic in &topics {
        let result = distill_topic(&index, *topic, &gw, &cfg.distill)
            .with_context(|| format!("distilling {topic}"))?;
        for w in &result.warnings {
            log::warn!("{topic}: {w}");
        }
        out.items.extend(
            result
                .documents
                .into_iter()
                .map(|d| AnnotatedText::new(d, Vec::new())),
        );
    }
    write_dataset(&out, &a.out)?;
    println!(
        "{} documents for {} topics from {n_chunks} chunks -> {}",
        out.items.len(),
        topics.len(),
        a.out.display()
    );
    Ok(())
}

fn export_finetune(cfg: &PipelineConfig, a: ExportFinetuneArgs) -> Result<()> {
    let train = dataset(&a.train)?;
    let n = export_finetune_dataset(&train, a.task.into(), &cfg.markers, &a.out)?;
    println!("{n} records -> {}", a.out.display());
    Ok(())
}

fn finetune(cfg: &PipelineConfig, c: FinetuneCommand) -> Result<()> {
    let gw = gateway(cfg)?;
    let job = match c {
        FinetuneCommand::Create {
            file,
            task,
            base_model,
        } => {
            let n = validate_training_file(&file).map_err(anyhow::Error::msg)?;
            log::info!("{}: {n} records", file.display());
            let hp = match Task::from(task) {
                Task::Terms => cfg.finetune.terms,
                Task::Relations => cfg.finetune.relations,
            };
            let base = base_model.unwrap_or_else(|| cfg.finetune.base_model.clone());
            gw.create_finetune_job(&file, &base, &hp)?
        }
        FinetuneCommand::Poll { job } => gw.poll_job(&job)?,
    };
    println!("{}", serde_json::to_string_pretty(&job)?);
    Ok(())
}

fn extract(cfg: &PipelineConfig, a: ExtractArgs) -> Result<()> {
    let strategy = Strategy::from(a.strategy);
    let task = Task::from(a.task);
    let ds = dataset(&a.dataset)?;
    let train = a.train.as_deref().map(dataset).transpose()?;
    let mut params = cfg.run_params(strategy, a.model.as_deref())?;
    if let Some(k) = a.k {
        if strategy != Strategy::Icl {
            bail!("--k applies to icl runs only");
        }
        params.k = Some(k);
    }
    let term_lists = match &a.terms_run {
        Some(p) => {
            if task != Task::Relations {
                bail!("--terms-run applies to relation runs only");
            }
            Some(
                load_run(p)
                    .with_context(|| format!("loading {}", p.display()))?
                    .term_lists(),
            )
        }
        None => None,
    };
    let inputs = RunInputs {
        dataset: &ds,
        train: train.as_ref(),
        term_lists: term_lists.as_ref(),
    };
    let gw = gateway(cfg)?;
    let run = run_strategy(&inputs, strategy, task, &params, &gw, &Clock::from_env())?;
    for f in &run.failures {
        log::warn!("{}: {}", f.doc, f.error);
    }
    write_run(&run, &a.out)?;
    println!(
        "{}: {} predictions, {} failures, {} skipped -> {}",
        run.header.run_id,
        run.predictions.len(),
        run.failures.len(),
        run.header.skipped.len(),
        a.out.display()
    );
    Ok(())
}

fn evaluate(cfg: &PipelineConfig, a: EvaluateArgs) -> Result<()> {
    let run = load_run(&a.run).with_context(|| format!("loading {}", a.run.display()))?;
    let gold = dataset(&a.gold)?;
    let report = evaluate_run(&run, &gold, &cfg.evaluate)?;
    print!("{}", render_report(&report));
    if let Some(out) = &a.out {
        std::fs::write(out, serde_json::to_string_pretty(&report)? + "\n")
            .with_context(|| format!("writing {}", out.display()))?;
    }
    Ok(())
}

fn compare(cfg: &PipelineConfig, a: CompareArgs) -> Result<()> {
    let gold = dataset(&a.gold)?;
    let mut reports = Vec::new();
    for p in &a.runs {
        let run = load_run(p).with_context(|| format!("loading {}", p.display()))?;
        reports.push(evaluate_run(&run, &gold, &cfg.evaluate)?);
    }
    print!("{}", render_comparison(&reports));
    Ok(())
}

fn review_serve(cfg: &PipelineConfig, a: ReviewServeArgs) -> Result<()> {
    let listen = a.listen.unwrap_or_else(|| cfg.review.listen.clone());
    let data_dir = a.data_dir.unwrap_or_else(|| cfg.review.data_dir.clone());
    let store = ReviewStore::open(&data_dir, Clock::from_env())
        .with_context(|| format!("opening review store {}", data_dir.display()))?;
    let settings = ServerSettings {
        page_size: cfg.review.page_size,
        ui_dir: a.ui_dir.or_else(|| cfg.review.ui_dir.clone()),
    };
    eprintln!(
        "serving review runs from {} on http://{listen}",
        data_dir.display()
    );
    run_server(&listen, Arc::new(store), &settings).with_context(|| format!("serving on {listen}"))
}

fn build(cfg: &PipelineConfig, a: BuildGraphArgs) -> Result<()> {
    let triples: Vec<Triple> = match (&a.run, &a.from_review) {
        (Some(p), _) => {
            let run = load_run(p).with_context(|| format!("loading {}", p.display()))?;
            if run.header.task != Task::Relations {
                bail!(
                    "{} is a {} run; a relation run is needed",
                    p.display(),
                    run.header.task
                );
            }
            run.predictions
                .into_iter()
                .flat_map(|p| p.triples)
                .collect()
        }
        (None, Some(id)) => {
            let dir = a
                .review_dir
                .clone()
                .unwrap_or_else(|| cfg.review.data_dir.clone());
            let store = ReviewStore::open(&dir, Clock::from_env())
                .with_context(|| format!("opening review store {}", dir.display()))?;
            store.export_accepted(id)?
        }
        (None, None) => bail!("one of --run or --from-review is required"),
    };
    let mut concepts: BTreeMap<String, TopConcept> = BTreeMap::new();
    if let Some(p) = &a.terms_run {
        concepts.extend(run_concepts(
            &load_run(p).with_context(|| format!("loading {}", p.display()))?,
        ));
    }
    if let Some(p) = &a.gold {
        // Gold labels win over predicted ones.
        concepts.extend(dataset_concepts(&dataset(p)?));
    }
    if concepts.is_empty() {
        bail!("no term concepts: pass --gold and/or --terms-run");
    }
    let merged = consolidate(&triples, &concepts);
    for w in &merged.warnings {
        log::warn!("{w}");
    }
    let graph = build_graph(merged.nodes, &merged.triples)?;
    export_graph_file(&graph, &a.out)?;
    let is_a = graph
        .edges
        .iter()
        .filter(|e| e.kind == EdgeKind::IsA)
        .count();
    println!(
        "{} concepts, {} relation edges, {is_a} is-a edges, {} warnings -> {}",
        graph.nodes.len(),
        graph.edges.len() - is_a,
        merged.warnings.len(),
        a.out.display()
    );
    Ok(())
}

fn export(a: ExportArgs) -> Result<()> {
    let graph = import_graph_file(&a.graph)?;
    let text = match a.format {
        Format::Cypher => export_cypher(&graph),
        Format::Graphml => export_graphml(&graph),
        Format::Graph => graph_to_string(&graph),
    };
    match &a.out {
        Some(p) => std::fs::write(p, text).with_context(|| format!("writing {}", p.display()))?,
        None => std::io::stdout().write_all(text.as_bytes())?,
    }
    Ok(())
}
