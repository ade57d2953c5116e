//! From accepted triples to a typed concept graph.

mod export;
mod union_find;

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Dataset, TopConcept, Triple};
use crate::extract::ExtractionRun;
use crate::text::normalize;

pub use export::{
    cypher_literal, export_cypher, export_graph_file, export_graphml, graph_to_string,
    import_graph_file, parse_cypher_literal, read_graph, sanitize_relation,
};
pub use union_find::UnionFind;

pub const IS_A: &str = "is a";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConceptNode {
    pub canonical: String,
    pub synonyms: Vec<String>,
    pub concept_type: TopConcept,
    pub support: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeKind {
    Extracted,
    IsA,
}

/// Directed edge. The target of an `is_a` edge is a top concept's graph label.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Edge {
    pub source: String,
    pub target: String,
    pub relation: String,
    pub kind: EdgeKind,
}

/// Concept nodes sorted by canonical name and edges in a fixed order. The
/// six top concept nodes are implicit.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct OntologyGraph {
    pub nodes: Vec<ConceptNode>,
    pub edges: Vec<Edge>,
}

#[derive(Debug, Error)]
pub enum OntologyError {
    #[error("graph invariant violated: {0}")]
    Invariant(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("graph file line {line}: {message}")]
    Parse { line: usize, message: String },
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Consolidation {
    pub nodes: Vec<ConceptNode>,
    /// Non-synonym triples with endpoints rewritten to canonical names,
    /// self-loops dropped and duplicates collapsed.
    pub triples: Vec<Triple>,
    pub warnings: Vec<String>,
}

/// Most frequent concept; ties go to the earlier one in `TopConcept::ALL`.
fn majority(concepts: &[TopConcept]) -> TopConcept {
    let mut counts: BTreeMap<TopConcept, usize> = BTreeMap::new();
    for c in concepts {
        *counts.entry(*c).or_default() += 1;
    }
    let best = counts.values().copied().max().unwrap_or(0);
    TopConcept::ALL
        .into_iter()
        .find(|c| counts.get(c) == Some(&best))
        .expect("non-empty group")
}

/// Merge synonym groups and rewrite the remaining triples.
///
/// Term names are normalized. Triples touching a term without a known
/// concept are dropped with a warning.
pub fn consolidate(
    triples: &[Triple],
    term_concepts: &BTreeMap<String, TopConcept>,
) -> Consolidation {
    let concepts: HashMap<String, TopConcept> = term_concepts
        .iter()
        .map(|(k, v)| (normalize(k), *v))
        .collect();
    let mut warnings = Vec::new();
    let mut kept: Vec<(String, String, Triple)> = Vec::new();
    for t in triples {
        let (s, o) = (normalize(&t.subject), normalize(&t.object));
        let unknown: Vec<&String> = [&s, &o]
            .into_iter()
            .filter(|x| !concepts.contains_key(*x))
            .collect();
        if s.is_empty() || o.is_empty() {
            warnings.push(format!("dropped triple with empty term: {t:?}"));
        } else if !unknown.is_empty() {
            warnings.push(format!(
                "dropped [{}, {}, {}]: no concept for {}",
                t.subject,
                t.object,
                t.relation,
                unknown
                    .iter()
                    .map(|u| format!("`{u}`"))
                    .collect::<Vec<_>>()
                    .join(", ")
            ));
        } else {
            kept.push((s, o, t.clone()));
        }
    }

    // Index terms and count mentions.
    let mut index: BTreeMap<String, usize> = BTreeMap::new();
    for (s, o, _) in &kept {
        for x in [s, o] {
            let n = index.len();
            index.entry(x.clone()).or_insert(n);
        }
    }
    let names: Vec<String> = {
        let mut v = vec![String::new(); index.len()];
        for (k, i) in &index {
            v[*i] = k.clone();
        }
        v
    };
    let mut support = vec![0usize; names.len()];
    let mut uf = UnionFind::new(names.len());
    for (s, o, t) in &kept {
        support[index[s]] += 1;
        support[index[o]] += 1;
        if t.is_synonym() {
            uf.union(index[s], index[o]);
        }
    }

    let mut canonical_of = vec![0usize; names.len()];
    let mut nodes = Vec::new();
    for group in uf.groups() {
        let canon = *group
            .iter()
            .max_by(|&&a, &&b| {
                support[a]
                    .cmp(&support[b])
                    .then_with(|| names[b].cmp(&names[a]))
            })
            .expect("non-empty group");
        let types: Vec<TopConcept> = group.iter().map(|&i| concepts[&names[i]]).collect();
        let concept_type = majority(&types);
        if types.iter().any(|t| *t != concept_type) {
            warnings.push(format!(
                "synonym group of `{}` mixes concepts; typed as {concept_type}",
                names[canon]
            ));
        }
        let mut synonyms: Vec<String> = group
            .iter()
            .filter(|&&i| i != canon)
            .map(|&i| names[i].clone())
            .collect();
        synonyms.sort();
        for &i in &group {
            canonical_of[i] = canon;
        }
        nodes.push(ConceptNode {
            canonical: names[canon].clone(),
            synonyms,
            concept_type,
            support: group.iter().map(|&i| support[i]).sum(),
        });
    }
    nodes.sort_by(|a, b| a.canonical.cmp(&b.canonical));

    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for (s, o, t) in &kept {
        if t.is_synonym() {
            continue;
        }
        let cs = names[canonical_of[index[s]]].clone();
        let co = names[canonical_of[index[o]]].clone();
        if cs == co {
            continue;
        }
        let rel = normalize(&t.relation);
        if rel.is_empty() || !seen.insert((cs.clone(), co.clone(), rel)) {
            continue;
        }
        out.push(Triple {
            subject: cs,
            object: co,
            relation: t.relation.trim().to_string(),
            source_doc: t.source_doc.clone(),
        });
    }
    Consolidation {
        nodes,
        triples: out,
        warnings,
    }
}

/// Concept per normalized term name, by majority over the given labels.
pub fn concept_table(
    labels: impl IntoIterator<Item = (String, TopConcept)>,
) -> BTreeMap<String, TopConcept> {
    let mut seen: BTreeMap<String, Vec<TopConcept>> = BTreeMap::new();
    for (name, c) in labels {
        let n = normalize(&name);
        if !n.is_empty() {
            seen.entry(n).or_default().push(c);
        }
    }
    seen.into_iter().map(|(k, v)| (k, majority(&v))).collect()
}

/// Concept table from the gold spans of a dataset.
pub fn dataset_concepts(ds: &Dataset) -> BTreeMap<String, TopConcept> {
    concept_table(
        ds.items
            .iter()
            .flat_map(|i| i.spans.iter().map(|s| (s.surface.clone(), s.concept))),
    )
}

/// Concept table from the predicted terms of a term extraction run.
pub fn run_concepts(run: &ExtractionRun) -> BTreeMap<String, TopConcept> {
    concept_table(
        run.predictions
            .iter()
            .flat_map(|p| p.terms.iter().map(|t| (t.surface.clone(), t.concept))),
    )
}

/// Add the `is_a` hierarchy and validate the result.
pub fn build_graph(
    nodes: Vec<ConceptNode>,
    triples: &[Triple],
) -> Result<OntologyGraph, OntologyError> {
    let mut edges: Vec<Edge> = triples
        .iter()
        .map(|t| Edge {
            source: t.subject.clone(),
            target: t.object.clone(),
            relation: t.relation.clone(),
            kind: EdgeKind::Extracted,
        })
        .collect();
    edges.extend(nodes.iter().map(|n| Edge {
        source: n.canonical.clone(),
        target: n.concept_type.graph_label().to_string(),
        relation: IS_A.to_string(),
        kind: EdgeKind::IsA,
    }));
    let mut g = OntologyGraph { nodes, edges };
    g.nodes.sort_by(|a, b| a.canonical.cmp(&b.canonical));
    g.edges.sort();
    g.validate()?;
    Ok(g)
}

impl OntologyGraph {
    /// Concept nodes plus the six top nodes.
    pub fn node_count(&self) -> usize {
        self.nodes.len() + TopConcept::ALL.len()
    }

    pub fn node(&self, name: &str) -> Option<&ConceptNode> {
        self.nodes.iter().find(|n| n.canonical == name)
    }

    pub fn validate(&self) -> Result<(), OntologyError> {
        let bad = |m: String| Err(OntologyError::Invariant(m));
        let mut names: BTreeSet<&str> = BTreeSet::new();
        for n in &self.nodes {
            if n.canonical.is_empty() {
                return bad("node with empty name".into());
            }
            for name in std::iter::once(&n.canonical).chain(&n.synonyms) {
                if !names.insert(name) {
                    return bad(format!(
                        "name `{name}` used by more than one node or synonym"
                    ));
                }
            }
        }
        let canon: HashMap<&str, &ConceptNode> = self
            .nodes
            .iter()
            .map(|n| (n.canonical.as_str(), n))
            .collect();
        let mut seen = BTreeSet::new();
        let mut is_a: HashMap<&str, usize> = HashMap::new();
        for e in &self.edges {
            let Some(src) = canon.get(e.source.as_str()) else {
                return bad(format!("edge source `{}` is not a node", e.source));
            };
            match e.kind {
                EdgeKind::Extracted => {
                    if !canon.contains_key(e.target.as_str()) {
                        return bad(format!("edge target `{}` is not a node", e.target));
                    }
                    if e.source == e.target {
                        return bad(format!("self-loop on `{}`", e.source));
                    }
                }
                EdgeKind::IsA => {
                    if e.target != src.concept_type.graph_label() || e.relation != IS_A {
                        return bad(format!(
                            "`{}` has a wrong is_a edge to `{}`",
                            e.source, e.target
                        ));
                    }
                    *is_a.entry(e.source.as_str()).or_default() += 1;
                }
            }
            if !seen.insert((&e.source, &e.target, &e.relation)) {
                return bad(format!(
                    "duplicate edge `{}` -[{}]-> `{}`",
                    e.source, e.relation, e.target
                ));
            }
        }
        for n in &self.nodes {
            if is_a.get(n.canonical.as_str()) != Some(&1) {
                return bad(format!("`{}` needs exactly one is_a edge", n.canonical));
            }
        }
        Ok(())
    }
}
