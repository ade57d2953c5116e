//! Shared fixtures and brute-force oracles for the integration tests.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use ontoforge::clock::Clock;
use ontoforge::evaluate::{evaluate_run, EvalReport, MatchConfig};
use ontoforge::extract::{
    run_strategy, run_to_string, ExtractionRun, RunInputs, RunParams, Strategy, Task,
};
use ontoforge::llm::{Gateway, MockProvider, MockScript, RetryPolicy, DEFAULT_BASE_MODEL};
use ontoforge::ontology::{
    build_graph, consolidate, dataset_concepts, export_cypher, OntologyGraph,
};
use ontoforge::review::{create_review, Decision, ReviewStats, ReviewStatus, ReviewStore};
use ontoforge::{load_dataset, Dataset, Triple};

pub mod props;

pub const FT_TERMS: &str = "ft:gpt-4.1-mini-2025-04-14:ontoforge:terms:mock";
pub const FT_RELATIONS: &str = "ft:gpt-4.1-mini-2025-04-14:ontoforge:relations:mock";

pub fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
}

pub fn test_set() -> Dataset {
    load_dataset(fixture("test.jsonl")).expect("test fixture loads")
}

pub fn train_set() -> Dataset {
    load_dataset(fixture("train.jsonl")).expect("train fixture loads")
}

pub fn gateway(script: MockScript) -> Gateway {
    Gateway::new(MockProvider::new(script))
        .with_retry(RetryPolicy::immediate(2))
        .with_concurrency(4)
}

pub fn fixture_gateway() -> Gateway {
    gateway(MockScript::load(fixture("mock.json")).expect("mock script loads"))
}

pub fn params(model: &str, k: Option<usize>) -> RunParams {
    RunParams {
        model: model.to_string(),
        k,
        concurrency: 4,
        ..RunParams::default()
    }
}

/// The four runs of the golden pipeline, in file-name order.
pub const RUNS: [(&str, Strategy, Task); 4] = [
    ("icl-terms", Strategy::Icl, Task::Terms),
    ("icl-relations", Strategy::Icl, Task::Relations),
    ("fine_tuned-terms", Strategy::FineTuned, Task::Terms),
    ("fine_tuned-relations", Strategy::FineTuned, Task::Relations),
];

pub fn model_for(strategy: Strategy, task: Task) -> &'static str {
    match (strategy, task) {
        (Strategy::FineTuned, Task::Terms) => FT_TERMS,
        (Strategy::FineTuned, Task::Relations) => FT_RELATIONS,
        _ => DEFAULT_BASE_MODEL,
    }
}

pub struct GoldenOutput {
    pub runs: Vec<(String, ExtractionRun)>,
    pub reports: Vec<(String, EvalReport)>,
    pub review: ReviewStats,
    pub graph: OntologyGraph,
    pub cypher: String,
}

impl GoldenOutput {
    /// Every artifact as (file name, bytes) for comparison with the checked-in copies.
    pub fn files(&self) -> Vec<(String, String)> {
        let mut out = Vec::new();
        for (name, run) in &self.runs {
            out.push((format!("{name}.run.jsonl"), run_to_string(run)));
        }
        for (name, r) in &self.reports {
            out.push((
                format!("{name}.report.json"),
                serde_json::to_string_pretty(r).unwrap() + "\n",
            ));
        }
        out.push(("ontology.cypher".to_string(), self.cypher.clone()));
        out
    }

    pub fn report(&self, name: &str) -> &EvalReport {
        &self
            .reports
            .iter()
            .find(|(n, _)| n == name)
            .expect("report exists")
            .1
    }

    pub fn run(&self, name: &str) -> &ExtractionRun {
        &self
            .runs
            .iter()
            .find(|(n, _)| n == name)
            .expect("run exists")
            .1
    }
}

/// Fixture corpus through both strategies and both tasks, then review of the
/// fine-tuned relation run, consolidation and Cypher export. `review_dir`
/// must be empty.
pub fn golden_pipeline(review_dir: &Path) -> GoldenOutput {
    let test = test_set();
    let train = train_set();
    let gw = fixture_gateway();
    let clock = Clock::epoch();
    let cfg = MatchConfig::default();
    let mut runs = Vec::new();
    let mut reports = Vec::new();
    for (name, strategy, task) in RUNS {
        let mut inputs = RunInputs::new(&test);
        inputs.train = Some(&train);
        let k = (strategy == Strategy::Icl).then_some(3);
        let run = run_strategy(
            &inputs,
            strategy,
            task,
            &params(model_for(strategy, task), k),
            &gw,
            &clock,
        )
        .expect("run completes");
        reports.push((
            name.to_string(),
            evaluate_run(&run, &test, &cfg).expect("run evaluates"),
        ));
        runs.push((name.to_string(), run));
    }

    let store = ReviewStore::open(review_dir, clock).expect("store opens");
    let ft = &runs[3].1;
    create_review(&store, "golden", ft, Some(&test)).expect("review created");
    let items = store.state("golden").unwrap().items;
    for item in items {
        let t = &item.triple;
        let decision = if t.subject == "thixomolding" {
            Decision::Reject
        } else if t.relation == "feeds" {
            Decision::Edit {
                edited_triple: Triple::new(&t.subject, &t.object, "charges"),
            }
        } else {
            Decision::Accept
        };
        store
            .decide("golden", &item.id, decision, "expert")
            .expect("decision recorded");
    }
    let review = store.stats("golden").unwrap();
    assert_eq!(
        store
            .items("golden", Some(ReviewStatus::Pending), 1, 50)
            .unwrap()
            .total,
        0
    );
    let accepted = store.export_accepted("golden").unwrap();

    let merged = consolidate(&accepted, &dataset_concepts(&test));
    let graph = build_graph(merged.nodes, &merged.triples).expect("graph is valid");
    let cypher = export_cypher(&graph);
    GoldenOutput {
        runs,
        reports,
        review,
        graph,
        cypher,
    }
}

/// Compare against `tests/fixtures/golden`, or rewrite the copies when
/// `ONTOFORGE_BLESS` is set. Returns the names of differing files.
pub fn golden_diff(out: &GoldenOutput) -> Vec<String> {
    let dir = fixture("golden");
    let bless = std::env::var_os("ONTOFORGE_BLESS").is_some();
    if bless {
        std::fs::create_dir_all(&dir).unwrap();
    }
    let mut differing = Vec::new();
    for (name, bytes) in out.files() {
        let path = dir.join(&name);
        if bless {
            std::fs::write(&path, &bytes).unwrap();
        } else if std::fs::read_to_string(&path).ok().as_deref() != Some(bytes.as_str()) {
            differing.push(name);
        }
    }
    differing
}

/// Brute-force ranking: full sort by similarity descending, then id.
pub fn brute_force_rank(ids: &[String], sims: &[f64], k: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..ids.len()).collect();
    order.sort_by(|&a, &b| {
        sims[b]
            .partial_cmp(&sims[a])
            .unwrap()
            .then_with(|| ids[a].cmp(&ids[b]))
    });
    order.truncate(k);
    order
}

/// Connected components by repeated flood fill over an adjacency matrix.
pub fn brute_force_components(n: usize, edges: &[(usize, usize)]) -> BTreeSet<BTreeSet<usize>> {
    let mut adj = vec![vec![false; n]; n];
    for &(a, b) in edges {
        adj[a][b] = true;
        adj[b][a] = true;
    }
    let mut seen = vec![false; n];
    let mut out = BTreeSet::new();
    for start in 0..n {
        if seen[start] {
            continue;
        }
        let mut comp = BTreeSet::from([start]);
        seen[start] = true;
        let mut changed = true;
        while changed {
            changed = false;
            for a in comp.clone() {
                for b in 0..n {
                    if adj[a][b] && !seen[b] {
                        seen[b] = true;
                        comp.insert(b);
                        changed = true;
                    }
                }
            }
        }
        out.insert(comp);
    }
    out
}

/// Mock script that answers every test document with its gold annotation.
pub fn identity_script(ds: &Dataset) -> MockScript {
    let mut rules = Vec::new();
    for item in &ds.items {
        let probe: String = item.doc.text.chars().take(40).collect();
        let terms = ontoforge::render_markup(item, &Default::default()).expect("gold renders");
        let triples = ontoforge::render_triples(&ds.relation_gold(&item.doc.id));
        for (sys, reply) in [("term extraction", terms), ("relation extraction", triples)] {
            let mut r = ontoforge::llm::MockRule::text(probe.clone(), reply);
            r.system_contains = Some(sys.to_string());
            rules.push(r);
        }
    }
    MockScript {
        rules,
        ..MockScript::default()
    }
}

/// Gold concept table keyed by normalized term, used by several oracles.
pub fn gold_concepts(ds: &Dataset) -> BTreeMap<String, ontoforge::TopConcept> {
    dataset_concepts(ds)
}
