//! Cypher script, GraphML and native graph file output.

use std::fmt::Write as _;
use std::fs;
use std::io::BufRead;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{ConceptNode, Edge, EdgeKind, OntologyError, OntologyGraph};
use crate::corpus::TopConcept;

/// Relation name as a Cypher relationship type: uppercase ASCII letters,
/// digits and single underscores, starting with a letter.
pub fn sanitize_relation(original: &str) -> String {
    let mut out = String::new();
    for c in original.chars() {
        if c.is_ascii_alphanumeric() {
            out.push(c.to_ascii_uppercase());
        } else if !out.ends_with('_') {
            out.push('_');
        }
    }
    let out = out.trim_matches('_').to_string();
    match out.chars().next() {
        Some(c) if c.is_ascii_alphabetic() => out,
        Some(_) => format!("REL_{out}"),
        None => "RELATED_TO".to_string(),
    }
}

/// Single-quoted Cypher string literal.
pub fn cypher_literal(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('\'');
    for c in s.chars() {
        match c {
            '\\' => out.push_str("\\\\"),
            '\'' => out.push_str("\\'"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            '\t' => out.push_str("\\t"),
            c => out.push(c),
        }
    }
    out.push('\'');
    out
}

/// Parse a literal produced by [`cypher_literal`] at the start of `input`.
/// Returns the value and the number of bytes consumed.
pub fn parse_cypher_literal(input: &str) -> Option<(String, usize)> {
    let mut chars = input.char_indices();
    if chars.next()?.1 != '\'' {
        return None;
    }
    let mut value = String::new();
    while let Some((i, c)) = chars.next() {
        match c {
            '\'' => return Some((value, i + 1)),
            '\\' => {
                let (_, e) = chars.next()?;
                value.push(match e {
                    'n' => '\n',
                    'r' => '\r',
                    't' => '\t',
                    '\\' | '\'' => e,
                    _ => return None,
                });
            }
            c => value.push(c),
        }
    }
    None
}

fn list_literal(items: &[String]) -> String {
    let inner: Vec<String> = items.iter().map(|s| cypher_literal(s)).collect();
    format!("[{}]", inner.join(", "))
}

/// One idempotent `MERGE` statement per node and per edge, one per line.
/// Top nodes come first, then concept nodes and edges in name order.
pub fn export_cypher(g: &OntologyGraph) -> String {
    let mut out = String::new();
    for t in TopConcept::ALL {
        let _ = writeln!(
            out,
            "MERGE (n:TopConcept {{name: {}}});",
            cypher_literal(t.graph_label())
        );
    }
    let mut nodes: Vec<&ConceptNode> = g.nodes.iter().collect();
    nodes.sort_by(|a, b| a.canonical.cmp(&b.canonical));
    for n in nodes {
        let _ = writeln!(
            out,
            "MERGE (n:Concept:{} {{name: {}}}) SET n.synonyms = {}, n.support = {};",
            n.concept_type.graph_label(),
            cypher_literal(&n.canonical),
            list_literal(&n.synonyms),
            n.support
        );
    }
    let mut edges: Vec<&Edge> = g.edges.iter().collect();
    edges.sort();
    for e in edges {
        let target_label = match e.kind {
            EdgeKind::Extracted => "Concept",
            EdgeKind::IsA => "TopConcept",
        };
        let _ = writeln!(
            out,
            "MATCH (a:Concept {{name: {}}}), (b:{target_label} {{name: {}}}) MERGE (a)-[r:{} {{original_name: {}}}]->(b);",
            cypher_literal(&e.source),
            cypher_literal(&e.target),
            sanitize_relation(&e.relation),
            cypher_literal(&e.relation)
        );
    }
    out
}

fn xml_escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            c => out.push(c),
        }
    }
    out
}

pub fn export_graphml(g: &OntologyGraph) -> String {
    let mut out = String::from(
        "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<graphml xmlns=\"http://graphml.graphdrawing.org/xmlns\">\n",
    );
    for (id, target, ty) in [
        ("name", "node", "string"),
        ("node_kind", "node", "string"),
        ("concept_type", "node", "string"),
        ("synonyms", "node", "string"),
        ("support", "node", "int"),
        ("relation", "edge", "string"),
        ("relation_type", "edge", "string"),
        ("edge_kind", "edge", "string"),
    ] {
        let _ = writeln!(
            out,
            "  <key id=\"{id}\" for=\"{target}\" attr.name=\"{id}\" attr.type=\"{ty}\"/>"
        );
    }
    out.push_str("  <graph id=\"ontology\" edgedefault=\"directed\">\n");
    let data = |k: &str, v: &str| format!("<data key=\"{k}\">{}</data>", xml_escape(v));
    for t in TopConcept::ALL {
        let _ = writeln!(
            out,
            "    <node id=\"top:{}\">{}{}{}</node>",
            t.graph_label(),
            data("name", t.graph_label()),
            data("node_kind", "top"),
            data("concept_type", t.label())
        );
    }
    let mut ids = std::collections::HashMap::new();
    for (i, n) in g.nodes.iter().enumerate() {
        ids.insert(n.canonical.as_str(), format!("c{i}"));
        let synonyms = serde_json::to_string(&n.synonyms).expect("strings serialize");
        let _ = writeln!(
            out,
            "    <node id=\"c{i}\">{}{}{}{}{}</node>",
            data("name", &n.canonical),
            data("node_kind", "concept"),
            data("concept_type", n.concept_type.label()),
            data("synonyms", &synonyms),
            data("support", &n.support.to_string())
        );
    }
    for (i, e) in g.edges.iter().enumerate() {
        let target = match e.kind {
            EdgeKind::IsA => format!("top:{}", e.target),
            EdgeKind::Extracted => ids.get(e.target.as_str()).cloned().unwrap_or_default(),
        };
        let kind = match e.kind {
            EdgeKind::Extracted => "extracted",
            EdgeKind::IsA => "is_a",
        };
        let _ = writeln!(
            out,
            "    <edge id=\"e{i}\" source=\"{}\" target=\"{}\">{}{}{}</edge>",
            ids.get(e.source.as_str()).cloned().unwrap_or_default(),
            xml_escape(&target),
            data("relation", &e.relation),
            data("relation_type", &sanitize_relation(&e.relation)),
            data("edge_kind", kind)
        );
    }
    out.push_str("  </graph>\n</graphml>\n");
    out
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum GraphRecord {
    Node(ConceptNode),
    Edge {
        source: String,
        target: String,
        relation: String,
        edge_kind: EdgeKind,
    },
}

/// Native graph file: one `node` or `edge` record per line.
pub fn graph_to_string(g: &OntologyGraph) -> String {
    let mut out = String::new();
    let mut push = |r: GraphRecord| {
        out.push_str(&serde_json::to_string(&r).expect("graph record serializes"));
        out.push('\n');
    };
    for n in &g.nodes {
        push(GraphRecord::Node(n.clone()));
    }
    for e in &g.edges {
        push(GraphRecord::Edge {
            source: e.source.clone(),
            target: e.target.clone(),
            relation: e.relation.clone(),
            edge_kind: e.kind,
        });
    }
    out
}

pub fn export_graph_file(g: &OntologyGraph, path: impl AsRef<Path>) -> Result<(), OntologyError> {
    let path = path.as_ref();
    fs::write(path, graph_to_string(g)).map_err(|source| OntologyError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Read and validate a graph file.
pub fn read_graph(reader: impl BufRead) -> Result<OntologyGraph, OntologyError> {
    let mut g = OntologyGraph::default();
    for (i, line) in reader.lines().enumerate() {
        let parse_err = |message: String| OntologyError::Parse {
            line: i + 1,
            message,
        };
        let line = line.map_err(|e| parse_err(e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str(&line).map_err(|e| parse_err(e.to_string()))? {
            GraphRecord::Node(n) => g.nodes.push(n),
            GraphRecord::Edge {
                source,
                target,
                relation,
                edge_kind,
            } => g.edges.push(Edge {
                source,
                target,
                relation,
                kind: edge_kind,
            }),
        }
    }
    g.validate()?;
    Ok(g)
}

pub fn import_graph_file(path: impl AsRef<Path>) -> Result<OntologyGraph, OntologyError> {
    let path = path.as_ref();
    let f = fs::File::open(path).map_err(|source| OntologyError::Io {
        path: path.display().to_string(),
        source,
    })?;
    read_graph(std::io::BufReader::new(f))
}
