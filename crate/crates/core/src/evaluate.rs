//! Scoring extraction runs against gold annotations.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;
use std::hash::Hash;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Dataset, TopConcept, Triple, SYNONYM_RELATION};
use crate::extract::{ExtractionRun, Strategy, Task};

pub use crate::text::normalize;

pub const MAX_ERROR_SAMPLES: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TermMode {
    /// Normalized surface only.
    #[default]
    Surface,
    /// Normalized surface and concept.
    Strict,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TripleMode {
    #[default]
    Full,
    TermsOnly,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MatchConfig {
    pub term_mode: TermMode,
    pub triple_mode: TripleMode,
    pub dedupe_predictions: bool,
    /// Relations whose endpoints match in either order.
    pub symmetric_relations: Vec<String>,
}

impl Default for MatchConfig {
    fn default() -> Self {
        MatchConfig {
            term_mode: TermMode::Surface,
            triple_mode: TripleMode::Full,
            dedupe_predictions: true,
            symmetric_relations: vec![SYNONYM_RELATION.to_string()],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Counts {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl Counts {
    pub fn add(&mut self, o: Counts) {
        self.tp += o.tp;
        self.fp += o.fp;
        self.fn_ += o.fn_;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Precision, recall and F1, each 0 when its denominator is 0.
pub fn prf(tp: usize, fp: usize, fn_: usize) -> Prf {
    let ratio = |n: usize, d: usize| if d == 0 { 0.0 } else { n as f64 / d as f64 };
    let precision = ratio(tp, tp + fp);
    let recall = ratio(tp, tp + fn_);
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    Prf {
        precision,
        recall,
        f1,
    }
}

/// Outcome of one-to-one matching: which predictions and gold entries found a partner.
struct Matching {
    pred_hit: Vec<bool>,
    gold_hit: Vec<bool>,
}

fn dedupe<K: Eq + Hash + Clone, T: Clone>(items: Vec<(K, T)>) -> Vec<(K, T)> {
    let mut seen = std::collections::HashSet::new();
    items
        .into_iter()
        .filter(|(k, _)| seen.insert(k.clone()))
        .collect()
}

/// Greedy one-to-one matching on equal keys, in prediction order.
fn match_keys<K: Eq + Hash>(pred: &[K], gold: &[K]) -> Matching {
    let mut free: HashMap<&K, Vec<usize>> = HashMap::new();
    for (i, g) in gold.iter().enumerate().rev() {
        free.entry(g).or_default().push(i);
    }
    let mut m = Matching {
        pred_hit: vec![false; pred.len()],
        gold_hit: vec![false; gold.len()],
    };
    for (i, p) in pred.iter().enumerate() {
        if let Some(j) = free.get_mut(p).and_then(Vec::pop) {
            m.pred_hit[i] = true;
            m.gold_hit[j] = true;
        }
    }
    m
}

fn count(m: &Matching) -> Counts {
    let tp = m.pred_hit.iter().filter(|h| **h).count();
    Counts {
        tp,
        fp: m.pred_hit.len() - tp,
        fn_: m.gold_hit.len() - tp,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct TermMatch {
    pub counts: Counts,
    pub per_concept: BTreeMap<TopConcept, Counts>,
    pub false_positives: Vec<(String, TopConcept)>,
    pub false_negatives: Vec<(String, TopConcept)>,
}

fn term_key(s: &str, c: TopConcept, mode: TermMode) -> (String, Option<TopConcept>) {
    (normalize(s), (mode == TermMode::Strict).then_some(c))
}

/// Match the terms of one document. Gold is always deduplicated by key;
/// predictions only when the config says so. True positives and misses are
/// attributed to the gold concept, false positives to the predicted one.
pub fn match_terms(
    pred: &[(String, TopConcept)],
    gold: &[(String, TopConcept)],
    cfg: &MatchConfig,
) -> TermMatch {
    type Keyed = ((String, Option<TopConcept>), (String, TopConcept));
    let keyed = |v: &[(String, TopConcept)]| -> Vec<Keyed> {
        v.iter()
            .map(|(s, c)| (term_key(s, *c, cfg.term_mode), (s.clone(), *c)))
            .collect()
    };
    let mut p = keyed(pred);
    if cfg.dedupe_predictions {
        p = dedupe(p);
    }
    let g = dedupe(keyed(gold));
    let pk: Vec<_> = p.iter().map(|x| &x.0).collect();
    let gk: Vec<_> = g.iter().map(|x| &x.0).collect();
    let m = match_keys(&pk, &gk);
    let mut out = TermMatch {
        counts: count(&m),
        ..Default::default()
    };
    for (i, (_, (s, c))) in p.iter().enumerate() {
        if !m.pred_hit[i] {
            out.per_concept.entry(*c).or_default().fp += 1;
            out.false_positives.push((s.clone(), *c));
        }
    }
    for (j, (_, (s, c))) in g.iter().enumerate() {
        let e = out.per_concept.entry(*c).or_default();
        if m.gold_hit[j] {
            e.tp += 1;
        } else {
            e.fn_ += 1;
            out.false_negatives.push((s.clone(), *c));
        }
    }
    out
}

fn triple_key(t: &Triple, cfg: &MatchConfig) -> (String, String, String) {
    let (mut s, mut o) = (normalize(&t.subject), normalize(&t.object));
    let r = normalize(&t.relation);
    if cfg.symmetric_relations.iter().any(|x| normalize(x) == r) && o < s {
        std::mem::swap(&mut s, &mut o);
    }
    let r = match cfg.triple_mode {
        TripleMode::Full => r,
        TripleMode::TermsOnly => String::new(),
    };
    (s, o, r)
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct TripleMatch {
    pub counts: Counts,
    pub false_positives: Vec<Triple>,
    pub false_negatives: Vec<Triple>,
}

/// Match the triples of one document on normalized fields.
pub fn match_triples(pred: &[Triple], gold: &[Triple], cfg: &MatchConfig) -> TripleMatch {
    let keyed = |v: &[Triple]| -> Vec<((String, String, String), Triple)> {
        v.iter().map(|t| (triple_key(t, cfg), t.clone())).collect()
    };
    let mut p = keyed(pred);
    if cfg.dedupe_predictions {
        p = dedupe(p);
    }
    let g = dedupe(keyed(gold));
    let pk: Vec<_> = p.iter().map(|x| &x.0).collect();
    let gk: Vec<_> = g.iter().map(|x| &x.0).collect();
    let m = match_keys(&pk, &gk);
    TripleMatch {
        counts: count(&m),
        false_positives: p
            .iter()
            .zip(&m.pred_hit)
            .filter(|(_, h)| !**h)
            .map(|(x, _)| x.1.clone())
            .collect(),
        false_negatives: g
            .iter()
            .zip(&m.gold_hit)
            .filter(|(_, h)| !**h)
            .map(|(x, _)| x.1.clone())
            .collect(),
    }
}

fn pair_key(a: &str, b: &str) -> (String, String) {
    let (a, b) = (normalize(a), normalize(b));
    if a <= b {
        (a, b)
    } else {
        (b, a)
    }
}

/// Unordered normalized pair sets: `(distinct predicted, matched)`.
pub fn match_synonyms(pred: &[(String, String)], gold: &[(String, String)]) -> (usize, usize) {
    let p: BTreeSet<_> = pred.iter().map(|(a, b)| pair_key(a, b)).collect();
    let g: BTreeSet<_> = gold.iter().map(|(a, b)| pair_key(a, b)).collect();
    (p.len(), p.intersection(&g).count())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SynonymStats {
    pub gold: usize,
    pub predicted: usize,
    pub matched: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ErrorSamples {
    pub false_positives: Vec<String>,
    pub false_negatives: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub run_id: String,
    pub strategy: Strategy,
    pub task: Task,
    pub dataset: String,
    pub documents: usize,
    pub failed_documents: usize,
    pub counts: Counts,
    pub precision: f64,
    /// Absent for name-level zero-shot term runs.
    pub recall: Option<f64>,
    pub f1: Option<f64>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub per_concept: BTreeMap<TopConcept, Counts>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub synonyms: Option<SynonymStats>,
    pub errors: ErrorSamples,
    pub config: MatchConfig,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum EvalError {
    #[error("run predicts document `{0}`, which is not in the gold dataset")]
    UnknownDocument(String),
}

fn sample(into: &mut Vec<String>, items: impl IntoIterator<Item = String>) {
    for x in items {
        if into.len() >= MAX_ERROR_SAMPLES {
            break;
        }
        into.push(x);
    }
}

fn show_triple(t: &Triple) -> String {
    format!(
        "{}: [{}, {}, {}]",
        t.source_doc, t.subject, t.object, t.relation
    )
}

/// Score a run against gold. Every gold document counts: documents that
/// failed or were skipped contribute their gold entries as misses.
pub fn evaluate_run(
    run: &ExtractionRun,
    gold: &Dataset,
    cfg: &MatchConfig,
) -> Result<EvalReport, EvalError> {
    for p in &run.predictions {
        if gold.item(&p.doc).is_none() {
            return Err(EvalError::UnknownDocument(p.doc.clone()));
        }
    }
    let mut counts = Counts::default();
    let mut per_concept = BTreeMap::new();
    let mut errors = ErrorSamples::default();
    let mut syn_pred = Vec::new();
    let mut syn_gold = Vec::new();

    for item in &gold.items {
        let id = &item.doc.id;
        let pred = run.prediction(id);
        match run.header.task {
            Task::Terms => {
                let p: Vec<(String, TopConcept)> = pred
                    .map(|p| {
                        p.terms
                            .iter()
                            .map(|t| (t.surface.clone(), t.concept))
                            .collect()
                    })
                    .unwrap_or_default();
                let g: Vec<(String, TopConcept)> = item
                    .spans
                    .iter()
                    .map(|s| (s.surface.clone(), s.concept))
                    .collect();
                let m = match_terms(&p, &g, cfg);
                counts.add(m.counts);
                for (c, k) in m.per_concept {
                    per_concept.entry(c).or_insert_with(Counts::default).add(k);
                }
                sample(
                    &mut errors.false_positives,
                    m.false_positives
                        .iter()
                        .map(|(s, c)| format!("{id}: {s} ({c})")),
                );
                sample(
                    &mut errors.false_negatives,
                    m.false_negatives
                        .iter()
                        .map(|(s, c)| format!("{id}: {s} ({c})")),
                );
            }
            Task::Relations => {
                let p: Vec<Triple> = pred.map(|p| p.triples.clone()).unwrap_or_default();
                let g = gold.relation_gold(id);
                let m = match_triples(&p, &g, cfg);
                counts.add(m.counts);
                sample(
                    &mut errors.false_positives,
                    m.false_positives.iter().map(show_triple),
                );
                sample(
                    &mut errors.false_negatives,
                    m.false_negatives.iter().map(show_triple),
                );
                syn_pred.extend(
                    p.iter()
                        .filter(|t| t.is_synonym())
                        .map(|t| (t.subject.clone(), t.object.clone())),
                );
                syn_gold.extend(
                    g.iter()
                        .filter(|t| t.is_synonym())
                        .map(|t| (t.subject.clone(), t.object.clone())),
                );
            }
        }
    }

    let scores = prf(counts.tp, counts.fp, counts.fn_);
    let name_level = run.header.strategy == Strategy::ZeroShot && run.header.task == Task::Terms;
    let synonyms = (run.header.task == Task::Relations).then(|| {
        let (predicted, matched) = match_synonyms(&syn_pred, &syn_gold);
        SynonymStats {
            gold: match_synonyms(&syn_gold, &[]).0,
            predicted,
            matched,
        }
    });
    Ok(EvalReport {
        run_id: run.header.run_id.clone(),
        strategy: run.header.strategy,
        task: run.header.task,
        dataset: gold.name.clone(),
        documents: gold.items.len(),
        failed_documents: run.failures.len(),
        counts,
        precision: scores.precision,
        recall: (!name_level).then_some(scores.recall),
        f1: (!name_level).then_some(scores.f1),
        per_concept,
        synonyms,
        errors,
        config: cfg.clone(),
    })
}

fn pct(x: Option<f64>) -> String {
    x.map_or_else(|| "n/a".to_string(), |v| format!("{v:.3}"))
}

/// Human-readable report.
pub fn render_report(r: &EvalReport) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "run {} ({} {}) on {}",
        r.run_id, r.strategy, r.task, r.dataset
    );
    let _ = writeln!(
        s,
        "documents {}  failed {}",
        r.documents, r.failed_documents
    );
    let _ = writeln!(
        s,
        "tp {}  fp {}  fn {}",
        r.counts.tp, r.counts.fp, r.counts.fn_
    );
    let _ = writeln!(
        s,
        "precision {}  recall {}  f1 {}",
        pct(Some(r.precision)),
        pct(r.recall),
        pct(r.f1)
    );
    if !r.per_concept.is_empty() {
        let _ = writeln!(
            s,
            "\n{:<20} {:>5} {:>5} {:>5} {:>7} {:>7}",
            "concept", "tp", "fp", "fn", "P", "R"
        );
        for (c, k) in &r.per_concept {
            let p = prf(k.tp, k.fp, k.fn_);
            let _ = writeln!(
                s,
                "{:<20} {:>5} {:>5} {:>5} {:>7.3} {:>7.3}",
                c.label(),
                k.tp,
                k.fp,
                k.fn_,
                p.precision,
                p.recall
            );
        }
    }
    if let Some(syn) = r.synonyms {
        let _ = writeln!(
            s,
            "\nsynonym pairs: gold {}  predicted {}  matched {}",
            syn.gold, syn.predicted, syn.matched
        );
    }
    s
}

/// Side-by-side table of several reports.
pub fn render_comparison(reports: &[EvalReport]) -> String {
    let width = reports
        .iter()
        .map(|r| r.run_id.len())
        .max()
        .unwrap_or(3)
        .max(3);
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{:<width$}  {:<10} {:<9} {:>5} {:>5} {:>5} {:>6} {:>6} {:>6}",
        "run", "strategy", "task", "tp", "fp", "fn", "P", "R", "F1"
    );
    for r in reports {
        let _ = writeln!(
            s,
            "{:<width$}  {:<10} {:<9} {:>5} {:>5} {:>5} {:>6} {:>6} {:>6}",
            r.run_id,
            r.strategy.as_str(),
            r.task.as_str(),
            r.counts.tp,
            r.counts.fp,
            r.counts.fn_,
            pct(Some(r.precision)),
            pct(r.recall),
            pct(r.f1)
        );
    }
    s
}
