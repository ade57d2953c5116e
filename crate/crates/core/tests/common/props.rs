//! Generators and property checks shared by the proptest suite and the
//! acceptance runner.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use proptest::prelude::*;
use proptest::test_runner::TestCaseError;

use ontoforge::clock::Clock;
use ontoforge::distill::{chunk_documents, retrieve, Chunk, ChunkIndex, MIN_CHUNK_CHARS};
use ontoforge::evaluate::{match_terms, match_triples, prf, MatchConfig};
use ontoforge::extract::{rank_by_similarity, select_demonstrations, Demonstration};
use ontoforge::llm::{EmbeddingVector, MockScript};
use ontoforge::ontology::{build_graph, consolidate};
use ontoforge::review::{Decision, ReviewRunState, ReviewStatus, ReviewStore};
use ontoforge::{
    parse_markup, parse_triples, render_markup, render_triples, AnnotatedText, Document, MarkerMap,
    TermSpan, TopConcept, Triple,
};

use super::{brute_force_components, brute_force_rank, gateway};

pub fn concept() -> impl Strategy<Value = TopConcept> {
    (0..6usize).prop_map(|i| TopConcept::ALL[i])
}

/// Text with non-overlapping spans, possibly adjacent, possibly at either end.
pub fn annotated_text() -> impl Strategy<Value = AnnotatedText> {
    let piece = (
        "[a-z .,;:()'é0-9-]{0,6}",
        "[A-Za-z0-9éß中]{1,6}( [A-Za-z0-9]{1,5}){0,2}",
        concept(),
        any::<bool>(),
    );
    (prop::collection::vec(piece, 0..8), "[a-z .,é]{0,6}").prop_map(|(pieces, tail)| {
        let mut text = String::new();
        let mut spans = Vec::new();
        for (sep, word, c, labeled) in pieces {
            text.push_str(&sep);
            let start = text.chars().count();
            text.push_str(&word);
            if labeled {
                let end = text.chars().count();
                spans.push(TermSpan::from_text(&text, start, end, c).unwrap());
            }
        }
        text.push_str(&tail);
        AnnotatedText::new(Document::new("", text), spans)
    })
}

fn field() -> impl Strategy<Value = String> {
    "[A-Za-z0-9éß:;,\\[\\]\\\\ -]{1,10}".prop_filter_map("blank field", |s| {
        let t = s.trim().to_string();
        (!t.is_empty()).then_some(t)
    })
}

pub fn triple_list() -> impl Strategy<Value = Vec<Triple>> {
    prop::collection::vec(
        (field(), field(), field()).prop_map(|(s, o, r)| Triple::new(s, o, r)),
        0..6,
    )
}

pub fn check_markup_round_trip(a: &AnnotatedText) -> Result<(), TestCaseError> {
    let m = MarkerMap::default();
    let labeled = render_markup(a, &m).map_err(|e| TestCaseError::fail(e.to_string()))?;
    let back = parse_markup(&labeled, &m).map_err(|e| TestCaseError::fail(e.to_string()))?;
    prop_assert_eq!(&back.doc.text, &a.doc.text);
    prop_assert_eq!(&back.spans, &a.spans);
    Ok(())
}

pub fn check_triples_round_trip(ts: &[Triple]) -> Result<(), TestCaseError> {
    let parsed = parse_triples(&render_triples(ts));
    prop_assert!(
        parsed.warnings.is_empty(),
        "warnings: {:?}",
        parsed.warnings
    );
    prop_assert_eq!(parsed.triples.as_slice(), ts);
    Ok(())
}

/// Candidate vectors drawn from a small pool so equal similarities are common.
#[derive(Debug, Clone)]
pub struct RankCase {
    pub ids: Vec<String>,
    pub vectors: Vec<Vec<f64>>,
    pub probe: Vec<f64>,
    pub k: usize,
}

pub fn rank_case() -> impl Strategy<Value = RankCase> {
    let vector = prop::collection::vec(-3i32..=3, 3)
        .prop_map(|v| v.into_iter().map(f64::from).collect::<Vec<f64>>());
    (
        prop::collection::vec(vector.clone(), 1..5),
        vector,
        1..12usize,
        1..15usize,
    )
        .prop_flat_map(|(pool, probe, n, k)| {
            let picks = prop::collection::vec(0..pool.len(), n);
            let order = Just((0..n).collect::<Vec<usize>>()).prop_shuffle();
            (Just(pool), Just(probe), picks, order, Just(k))
        })
        .prop_map(|(pool, probe, picks, order, k)| RankCase {
            // Ids are a shuffled labelling so id order differs from index order.
            ids: order.iter().map(|i| format!("c{i:02}")).collect(),
            vectors: picks.iter().map(|&p| pool[p].clone()).collect(),
            probe,
            k,
        })
}

fn oracle_cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}

impl RankCase {
    fn sims(&self) -> Vec<f64> {
        self.vectors
            .iter()
            .map(|v| oracle_cosine(&self.probe, v))
            .collect()
    }

    fn script(&self) -> MockScript {
        let mut script = MockScript::default();
        for (id, v) in self.ids.iter().zip(&self.vectors) {
            script.embeddings.insert(format!("text of {id}"), v.clone());
        }
        script.embeddings.insert("probe".into(), self.probe.clone());
        script
    }
}

pub fn check_rank(c: &RankCase) -> Result<(), TestCaseError> {
    let sims = c.sims();
    let want = brute_force_rank(&c.ids, &sims, c.k);
    let refs: Vec<(&str, &[f64])> = c
        .ids
        .iter()
        .map(String::as_str)
        .zip(c.vectors.iter().map(Vec::as_slice))
        .collect();
    let got = rank_by_similarity(&refs, &c.probe, c.k);
    prop_assert_eq!(got.iter().map(|x| x.0).collect::<Vec<_>>(), want.clone());
    for (i, s) in got {
        prop_assert!((s - sims[i]).abs() < 1e-12);
    }
    Ok(())
}

pub fn check_select(c: &RankCase) -> Result<(), TestCaseError> {
    let want: Vec<String> = brute_force_rank(&c.ids, &c.sims(), c.k)
        .into_iter()
        .rev()
        .map(|i| c.ids[i].clone())
        .collect();
    let candidates: Vec<Demonstration> = c
        .ids
        .iter()
        .map(|id| Demonstration {
            id: id.clone(),
            input_repr: format!("text of {id}"),
            prompt_input: String::new(),
            prompt_output: String::new(),
        })
        .collect();
    let gw = gateway(c.script());
    let sel = select_demonstrations(&candidates, "probe", c.k, &gw)
        .map_err(|e| TestCaseError::fail(e.to_string()))?;
    prop_assert_eq!(
        sel.demos.iter().map(|d| d.id.clone()).collect::<Vec<_>>(),
        want
    );
    prop_assert_eq!(sel.warnings.is_empty(), c.k <= c.ids.len());
    Ok(())
}

pub fn check_retrieve(c: &RankCase) -> Result<(), TestCaseError> {
    // Chunks across two documents; the tie order is (doc_id, ordinal).
    let chunks: Vec<Chunk> = c
        .ids
        .iter()
        .enumerate()
        .map(|(i, id)| Chunk {
            doc_id: if i % 2 == 0 {
                "doc-b".into()
            } else {
                "doc-a".into()
            },
            ordinal: i / 2,
            start: 0,
            end: 1,
            text: format!("text of {id}"),
        })
        .collect();
    let keys: Vec<String> = chunks
        .iter()
        .map(|ch| format!("{}#{:04}", ch.doc_id, ch.ordinal))
        .collect();
    let want = brute_force_rank(&keys, &c.sims(), c.k);
    let index = ChunkIndex {
        entries: chunks
            .iter()
            .cloned()
            .zip(&c.vectors)
            .map(|(ch, v)| {
                (
                    ch,
                    EmbeddingVector {
                        values: v.clone(),
                        model: "m".into(),
                    },
                )
            })
            .collect(),
    };
    let gw = gateway(c.script());
    let got =
        retrieve(&index, "probe", c.k, &gw).map_err(|e| TestCaseError::fail(e.to_string()))?;
    let got_keys: Vec<String> = got
        .iter()
        .map(|s| format!("{}#{:04}", s.chunk.doc_id, s.chunk.ordinal))
        .collect();
    prop_assert_eq!(
        got_keys,
        want.iter().map(|&i| keys[i].clone()).collect::<Vec<_>>()
    );
    Ok(())
}

/// Random synonym graph over `term00..` plus a few ordinary triples.
#[derive(Debug, Clone)]
pub struct SynonymGraph {
    pub n: usize,
    pub synonyms: Vec<(usize, usize)>,
    pub relations: Vec<(usize, usize)>,
    pub concepts: Vec<TopConcept>,
}

pub fn synonym_graph() -> impl Strategy<Value = SynonymGraph> {
    (1..=30usize)
        .prop_flat_map(|n| {
            (
                Just(n),
                prop::collection::vec((0..n, 0..n), 0..n * 2),
                prop::collection::vec((0..n, 0..n), 0..n),
                prop::collection::vec(concept(), n),
            )
        })
        .prop_map(|(n, synonyms, relations, concepts)| SynonymGraph {
            n,
            synonyms,
            relations,
            concepts,
        })
}

fn term(i: usize) -> String {
    format!("term{i:02}")
}

pub fn check_consolidation(g: &SynonymGraph) -> Result<(), TestCaseError> {
    let mut triples: Vec<Triple> = g
        .synonyms
        .iter()
        .map(|&(a, b)| Triple::new(term(a), term(b), "synonym of"))
        .collect();
    triples.extend(
        g.relations
            .iter()
            .map(|&(a, b)| Triple::new(term(a), term(b), "uses")),
    );
    let concepts: BTreeMap<String, TopConcept> =
        (0..g.n).map(|i| (term(i), g.concepts[i])).collect();
    let out = consolidate(&triples, &concepts);

    // Every mentioned term is a node of the oracle; unmentioned ones are not.
    let mentioned: BTreeSet<usize> = g
        .synonyms
        .iter()
        .chain(&g.relations)
        .flat_map(|&(a, b)| [a, b])
        .collect();
    let want: BTreeSet<BTreeSet<usize>> = brute_force_components(g.n, &g.synonyms)
        .into_iter()
        .map(|c| {
            c.intersection(&mentioned)
                .copied()
                .collect::<BTreeSet<usize>>()
        })
        .filter(|c| !c.is_empty())
        .collect();
    let index: HashMap<String, usize> = (0..g.n).map(|i| (term(i), i)).collect();
    let mut all_names = BTreeSet::new();
    let mut got = BTreeSet::new();
    for node in &out.nodes {
        prop_assert!(!node.synonyms.contains(&node.canonical));
        let mut group = BTreeSet::new();
        for name in std::iter::once(&node.canonical).chain(&node.synonyms) {
            prop_assert!(
                all_names.insert(name.clone()),
                "name {} appears twice",
                name
            );
            group.insert(index[name]);
        }
        got.insert(group);
    }
    prop_assert_eq!(got, want);
    // Rewritten triples only reference canonical names and never loop.
    let canon: BTreeSet<&String> = out.nodes.iter().map(|n| &n.canonical).collect();
    for t in &out.triples {
        prop_assert!(canon.contains(&t.subject) && canon.contains(&t.object));
        prop_assert_ne!(&t.subject, &t.object);
    }
    build_graph(out.nodes, &out.triples).map_err(|e| TestCaseError::fail(e.to_string()))?;
    Ok(())
}

pub fn term_list() -> impl Strategy<Value = Vec<(String, TopConcept)>> {
    prop::collection::vec(("[a-d]{1,2}( [A-B])?", concept()), 0..12)
}

fn normalized_set(v: &[(String, TopConcept)]) -> BTreeSet<String> {
    v.iter()
        .map(|(s, _)| {
            s.to_lowercase()
                .split_whitespace()
                .collect::<Vec<_>>()
                .join(" ")
        })
        .collect()
}

pub fn check_term_accounting(
    pred: &[(String, TopConcept)],
    gold: &[(String, TopConcept)],
) -> Result<(), TestCaseError> {
    let m = match_terms(pred, gold, &MatchConfig::default());
    let (p, g) = (normalized_set(pred), normalized_set(gold));
    prop_assert_eq!(m.counts.tp, p.intersection(&g).count());
    prop_assert_eq!(m.counts.tp + m.counts.fn_, g.len());
    prop_assert_eq!(m.counts.tp + m.counts.fp, p.len());
    let per: usize = m.per_concept.values().map(|c| c.tp + c.fp + c.fn_).sum();
    prop_assert_eq!(per, m.counts.tp + m.counts.fp + m.counts.fn_);
    Ok(())
}

pub fn check_prf_scale_free(
    tp: usize,
    fp: usize,
    fn_: usize,
    c: usize,
) -> Result<(), TestCaseError> {
    let a = prf(tp, fp, fn_);
    let b = prf(tp * c, fp * c, fn_ * c);
    prop_assert!((a.precision - b.precision).abs() < 1e-12);
    prop_assert!((a.recall - b.recall).abs() < 1e-12);
    prop_assert!((a.f1 - b.f1).abs() < 1e-12);
    for x in [a.precision, a.recall, a.f1] {
        prop_assert!((0.0..=1.0).contains(&x));
    }
    Ok(())
}

pub fn check_triple_permutation(
    pred: &[Triple],
    gold: &[Triple],
    pp: &[Triple],
    gp: &[Triple],
) -> Result<(), TestCaseError> {
    let cfg = MatchConfig::default();
    prop_assert_eq!(
        match_triples(pred, gold, &cfg).counts,
        match_triples(pp, gp, &cfg).counts
    );
    Ok(())
}

/// Random prose with paragraph breaks and the occasional overlong word.
pub fn chunk_docs() -> impl Strategy<Value = (Vec<Document>, usize)> {
    let word = prop_oneof![8 => "[a-zé]{1,12}[.,]?", 1 => "[a-z]{150,260}"];
    let sep =
        prop_oneof![10 => Just(" "), 2 => Just("\n"), 2 => Just("\n\n"), 1 => Just(" \n \n\t")];
    let doc = prop::collection::vec((word, sep), 0..120).prop_map(|ws| {
        ws.into_iter()
            .map(|(w, s)| format!("{w}{s}"))
            .collect::<String>()
    });
    (prop::collection::vec(doc, 1..4), 0..600usize).prop_map(|(texts, max)| {
        let docs = texts
            .into_iter()
            .enumerate()
            .map(|(i, t)| Document::new(format!("d{i}"), t))
            .collect();
        (docs, max)
    })
}

pub fn check_chunk_reconstruction(
    docs: &[Document],
    max_chars: usize,
) -> Result<(), TestCaseError> {
    let chunks = chunk_documents(docs, max_chars);
    let max = max_chars.max(MIN_CHUNK_CHARS);
    for doc in docs {
        let chars: Vec<char> = doc.text.chars().collect();
        let mine: Vec<&Chunk> = chunks.iter().filter(|c| c.doc_id == doc.id).collect();
        let mut pos = 0;
        for (i, c) in mine.iter().enumerate() {
            prop_assert_eq!(c.ordinal, i);
            prop_assert!(c.start >= pos && c.start < c.end);
            prop_assert!(
                chars[pos..c.start].iter().all(|ch| ch.is_whitespace()),
                "non-whitespace gap"
            );
            prop_assert_eq!(&c.text, &chars[c.start..c.end].iter().collect::<String>());
            prop_assert!(c.end - c.start <= max);
            pos = c.end;
        }
        prop_assert!(chars[pos..].iter().all(|ch| ch.is_whitespace()));
    }
    Ok(())
}

#[derive(Debug, Clone)]
pub enum Step {
    Decide(usize, u8),
    Kill,
}

pub fn review_script() -> impl Strategy<Value = (usize, Vec<Step>)> {
    (1..8usize).prop_flat_map(|n| {
        let step = prop_oneof![4 => (0..n, 0..3u8).prop_map(|(i, a)| Step::Decide(i, a)), 1 => Just(Step::Kill)];
        (Just(n), prop::collection::vec(step, 0..16))
    })
}

fn decision(kind: u8, i: usize) -> Decision {
    match kind {
        0 => Decision::Accept,
        1 => Decision::Reject,
        _ => Decision::Edit {
            edited_triple: Triple::new(format!("s{i}"), format!("o{i}"), "edited"),
        },
    }
}

/// Decisions against a store that is dropped and reopened at random points.
/// After every step the reopened state equals a replay of the events so far,
/// and every earlier prefix replays to the state seen at that point.
pub fn check_review_replay(n: usize, steps: &[Step]) -> Result<(), TestCaseError> {
    let dir = tempfile::tempdir().unwrap();
    let triples: Vec<Triple> = (0..n)
        .map(|i| Triple::new(format!("s{i}"), format!("o{i}"), "uses").with_source("d"))
        .collect();
    let mut store = ReviewStore::open(dir.path(), Clock::epoch()).unwrap();
    store.create("run", &triples, &HashMap::new()).unwrap();
    let items = store.state("run").unwrap().items;
    let mut snapshots = vec![store.state("run").unwrap()];
    for step in steps {
        match step {
            Step::Kill => {
                drop(store);
                store = ReviewStore::open(dir.path(), Clock::epoch()).unwrap();
                prop_assert_eq!(&store.state("run").unwrap(), snapshots.last().unwrap());
            }
            Step::Decide(i, kind) => {
                let id = &items[*i].id;
                let before = store.state("run").unwrap();
                let res = store.decide("run", id, decision(*kind, *i), "r");
                if before.item(id).unwrap().status == ReviewStatus::Pending {
                    prop_assert!(res.is_ok());
                    snapshots.push(store.state("run").unwrap());
                } else {
                    prop_assert!(res.is_err());
                    prop_assert_eq!(&store.state("run").unwrap(), &before);
                }
            }
        }
    }
    let last = snapshots.last().unwrap();
    for (i, snap) in snapshots.iter().enumerate() {
        let replayed = ReviewRunState::replay("run", items.clone(), &last.events[..i]).unwrap();
        prop_assert_eq!(&replayed, snap);
    }
    let accepted = last.export_accepted();
    let want = last
        .items
        .iter()
        .filter(|it| matches!(it.status, ReviewStatus::Accepted | ReviewStatus::Edited))
        .count();
    prop_assert_eq!(accepted.len(), want);
    Ok(())
}
