//! Documents, annotated datasets and the line-delimited dataset file format.
//!
//! A dataset file holds one JSON record per line. Every record carries a
//! `kind` tag:
//!
//! | kind      | fields                                              |
//! |-----------|-----------------------------------------------------|
//! | `dataset` | `name` (optional header, first line)                |
//! | `doc`     | `id`, `text`, `provenance`, `topic` (optional)      |
//! | `span`    | `doc`, `start`, `end`, `concept`, `surface` (opt.)  |
//! | `triple`  | `doc`, `subject`, `object`, `relation`              |
//! | `synonym` | `doc`, `a`, `b`                                     |
//!
//! Span offsets are unicode scalar positions into the document text,
//! half-open. Triple records whose relation normalizes to `synonym of` are
//! folded into the dataset's synonym pairs on load.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::text::{char_len, char_slice, normalize};

/// Relation name used for synonym triples.
pub const SYNONYM_RELATION: &str = "synonym of";

/// The six expert-defined root categories every term is classified under.
///
/// Declaration order doubles as the priority order used to break ties when a
/// synonym group mixes categories.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TopConcept {
    Materials,
    CastingProcess,
    ProductProperty,
    CastingParameter,
    CastingDefect,
    CastingEquipment,
}

impl TopConcept {
    pub const ALL: [TopConcept; 6] = [
        TopConcept::Materials,
        TopConcept::CastingProcess,
        TopConcept::ProductProperty,
        TopConcept::CastingParameter,
        TopConcept::CastingDefect,
        TopConcept::CastingEquipment,
    ];

    /// Stable kebab-case label, as used in files.
    pub fn label(self) -> &'static str {
        match self {
            TopConcept::Materials => "materials",
            TopConcept::CastingProcess => "casting-process",
            TopConcept::ProductProperty => "product-property",
            TopConcept::CastingParameter => "casting-parameter",
            TopConcept::CastingDefect => "casting-defect",
            TopConcept::CastingEquipment => "casting-equipment",
        }
    }

    /// Human-readable name used inside prompts.
    pub fn display_name(self) -> &'static str {
        match self {
            TopConcept::Materials => "materials",
            TopConcept::CastingProcess => "casting process",
            TopConcept::ProductProperty => "product property",
            TopConcept::CastingParameter => "casting parameter",
            TopConcept::CastingDefect => "casting defect",
            TopConcept::CastingEquipment => "casting equipment",
        }
    }

    /// Graph label, e.g. `CastingProcess`.
    pub fn graph_label(self) -> &'static str {
        match self {
            TopConcept::Materials => "Materials",
            TopConcept::CastingProcess => "CastingProcess",
            TopConcept::ProductProperty => "ProductProperty",
            TopConcept::CastingParameter => "CastingParameter",
            TopConcept::CastingDefect => "CastingDefect",
            TopConcept::CastingEquipment => "CastingEquipment",
        }
    }
}

impl fmt::Display for TopConcept {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown top concept `{0}`")]
pub struct UnknownConcept(pub String);

impl FromStr for TopConcept {
    type Err = UnknownConcept;

    /// Lenient: accepts labels, display names and CamelCase graph labels in any case,
    /// with `-`, `_` or spaces as separators. A trailing `s` on the last word is tolerated.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let key: String = s
            .trim()
            .chars()
            .filter(|c| c.is_alphanumeric())
            .flat_map(char::to_lowercase)
            .collect();
        let key = key.as_str();
        let found = match key {
            "materials" | "material" => TopConcept::Materials,
            "castingprocess" | "castingprocesses" | "process" => TopConcept::CastingProcess,
            "productproperty" | "productproperties" | "property" => TopConcept::ProductProperty,
            "castingparameter" | "castingparameters" | "parameter" => TopConcept::CastingParameter,
            "castingdefect" | "castingdefects" | "defect" => TopConcept::CastingDefect,
            "castingequipment" | "castingequipments" | "equipment" => TopConcept::CastingEquipment,
            _ => return Err(UnknownConcept(s.to_string())),
        };
        Ok(found)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Paper,
    Book,
    Distilled,
    #[default]
    Other,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub id: String,
    pub text: String,
    #[serde(default)]
    pub provenance: Provenance,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub topic: Option<TopConcept>,
}

impl Document {
    pub fn new(id: impl Into<String>, text: impl Into<String>) -> Self {
        Document {
            id: id.into(),
            text: text.into(),
            provenance: Provenance::Other,
            topic: None,
        }
    }

    pub fn with_provenance(mut self, provenance: Provenance) -> Self {
        self.provenance = provenance;
        self
    }

    pub fn with_topic(mut self, topic: TopConcept) -> Self {
        self.topic = Some(topic);
        self
    }
}

/// A concept-labeled term occurrence, `[start, end)` in unicode scalars.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TermSpan {
    pub start: usize,
    pub end: usize,
    pub surface: String,
    pub concept: TopConcept,
}

impl TermSpan {
    /// Build a span by slicing `text`. Returns `None` when the range is invalid.
    pub fn from_text(text: &str, start: usize, end: usize, concept: TopConcept) -> Option<Self> {
        if start >= end {
            return None;
        }
        let surface = char_slice(text, start, end)?;
        Some(TermSpan {
            start,
            end,
            surface: surface.to_string(),
            concept,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotatedText {
    pub doc: Document,
    pub spans: Vec<TermSpan>,
}

impl AnnotatedText {
    pub fn new(doc: Document, spans: Vec<TermSpan>) -> Self {
        AnnotatedText { doc, spans }
    }

    /// Check span bounds, surfaces, ordering and non-overlap.
    pub fn validate(&self) -> Result<(), String> {
        let len = char_len(&self.doc.text);
        let mut prev_end = 0usize;
        for (i, span) in self.spans.iter().enumerate() {
            if span.start >= span.end || span.end > len {
                return Err(format!(
                    "doc `{}`: span [{}, {}) out of bounds (text has {} chars)",
                    self.doc.id, span.start, span.end, len
                ));
            }
            let slice = char_slice(&self.doc.text, span.start, span.end).unwrap_or_default();
            if slice != span.surface {
                return Err(format!(
                    "doc `{}`: span [{}, {}) surface `{}` does not match text `{}`",
                    self.doc.id, span.start, span.end, span.surface, slice
                ));
            }
            if i > 0 && span.start < prev_end {
                return Err(format!(
                    "doc `{}`: span [{}, {}) overlaps or precedes the previous span",
                    self.doc.id, span.start, span.end
                ));
            }
            prev_end = span.end;
        }
        Ok(())
    }

    /// Distinct span surfaces in order of first appearance.
    pub fn term_list(&self) -> Vec<String> {
        let mut seen = HashSet::new();
        self.spans
            .iter()
            .filter(|s| seen.insert(s.surface.clone()))
            .map(|s| s.surface.clone())
            .collect()
    }

    /// Start offset of the first span whose normalized surface equals `term`'s.
    pub fn first_occurrence(&self, term: &str) -> Option<usize> {
        let key = normalize(term);
        self.spans
            .iter()
            .find(|s| normalize(&s.surface) == key)
            .map(|s| s.start)
    }

    pub fn is_multi_term(&self) -> bool {
        self.spans.len() >= 2
    }
}

/// Directed `(subject, object, relation)` assertion over term surfaces.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Triple {
    pub subject: String,
    pub object: String,
    pub relation: String,
    #[serde(default, rename = "doc")]
    pub source_doc: String,
}

impl Triple {
    pub fn new(
        subject: impl Into<String>,
        object: impl Into<String>,
        relation: impl Into<String>,
    ) -> Self {
        Triple {
            subject: subject.into(),
            object: object.into(),
            relation: relation.into(),
            source_doc: String::new(),
        }
    }

    pub fn with_source(mut self, doc: impl Into<String>) -> Self {
        self.source_doc = doc.into();
        self
    }

    pub fn is_synonym(&self) -> bool {
        normalize(&self.relation) == SYNONYM_RELATION
    }

    /// Build a triple from annotated data, ordering endpoints by first appearance.
    pub fn from_annotated(
        item: &AnnotatedText,
        a: &str,
        b: &str,
        relation: impl Into<String>,
    ) -> Result<Self, String> {
        let pa = item
            .first_occurrence(a)
            .ok_or_else(|| format!("term `{a}` is not annotated in doc `{}`", item.doc.id))?;
        let pb = item
            .first_occurrence(b)
            .ok_or_else(|| format!("term `{b}` is not annotated in doc `{}`", item.doc.id))?;
        let (s, o) = if pa <= pb { (a, b) } else { (b, a) };
        Ok(Triple::new(s, o, relation).with_source(item.doc.id.clone()))
    }
}

/// Unordered pair of synonymous terms found in one document.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SynonymPair {
    pub a: String,
    pub b: String,
    #[serde(rename = "doc")]
    pub source_doc: String,
}

impl SynonymPair {
    /// Normalized key independent of member order.
    pub fn key(&self) -> (String, String) {
        let (x, y) = (normalize(&self.a), normalize(&self.b));
        if x <= y {
            (x, y)
        } else {
            (y, x)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Dataset {
    pub name: String,
    pub items: Vec<AnnotatedText>,
    pub triples: Vec<Triple>,
    pub synonym_pairs: Vec<SynonymPair>,
}

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("{}{message}", line.map(|l| format!("line {l}: ")).unwrap_or_default())]
    Invariant {
        line: Option<usize>,
        message: String,
    },
}

impl CorpusError {
    fn invariant(line: Option<usize>, message: impl Into<String>) -> Self {
        CorpusError::Invariant {
            line,
            message: message.into(),
        }
    }
}

impl Dataset {
    pub fn new(name: impl Into<String>) -> Self {
        Dataset {
            name: name.into(),
            ..Default::default()
        }
    }

    pub fn item(&self, id: &str) -> Option<&AnnotatedText> {
        self.items.iter().find(|i| i.doc.id == id)
    }

    /// Gold relation triples for one document: its triples followed by its
    /// synonym pairs rendered as `synonym of` triples (earlier term first).
    pub fn relation_gold(&self, doc_id: &str) -> Vec<Triple> {
        let mut out: Vec<Triple> = self
            .triples
            .iter()
            .filter(|t| t.source_doc == doc_id)
            .cloned()
            .collect();
        let item = self.item(doc_id);
        for pair in self.synonym_pairs.iter().filter(|p| p.source_doc == doc_id) {
            let triple = item
                .and_then(|it| Triple::from_annotated(it, &pair.a, &pair.b, SYNONYM_RELATION).ok())
                .unwrap_or_else(|| {
                    Triple::new(&pair.a, &pair.b, SYNONYM_RELATION).with_source(doc_id)
                });
            out.push(triple);
        }
        out
    }

    /// Validate every dataset invariant.
    pub fn validate(&self) -> Result<(), CorpusError> {
        self.validate_with_lines(&LineInfo::default())
    }

    fn validate_with_lines(&self, lines: &LineInfo) -> Result<(), CorpusError> {
        let mut ids: HashMap<&str, usize> = HashMap::new();
        for (idx, item) in self.items.iter().enumerate() {
            let line = lines.docs.get(idx).copied();
            if item.doc.id.is_empty() {
                return Err(CorpusError::invariant(line, "document id is empty"));
            }
            if item.doc.text.is_empty() {
                return Err(CorpusError::invariant(
                    line,
                    format!("doc `{}` has empty text", item.doc.id),
                ));
            }
            if ids.insert(item.doc.id.as_str(), idx).is_some() {
                return Err(CorpusError::invariant(
                    line,
                    format!("duplicate doc id `{}`", item.doc.id),
                ));
            }
            item.validate()
                .map_err(|m| CorpusError::invariant(line, m))?;
        }
        for (idx, t) in self.triples.iter().enumerate() {
            let line = lines.triples.get(idx).copied();
            let item = ids
                .get(t.source_doc.as_str())
                .map(|&i| &self.items[i])
                .ok_or_else(|| {
                    CorpusError::invariant(
                        line,
                        format!("triple references unknown doc id `{}`", t.source_doc),
                    )
                })?;
            check_triple(item, t).map_err(|m| CorpusError::invariant(line, m))?;
        }
        for (idx, p) in self.synonym_pairs.iter().enumerate() {
            let line = lines.synonyms.get(idx).copied();
            let item = ids
                .get(p.source_doc.as_str())
                .map(|&i| &self.items[i])
                .ok_or_else(|| {
                    CorpusError::invariant(
                        line,
                        format!("synonym pair references unknown doc id `{}`", p.source_doc),
                    )
                })?;
            for term in [&p.a, &p.b] {
                if item.first_occurrence(term).is_none() {
                    return Err(CorpusError::invariant(
                        line,
                        format!(
                            "synonym term `{term}` is not annotated in doc `{}`",
                            p.source_doc
                        ),
                    ));
                }
            }
            if normalize(&p.a) == normalize(&p.b) {
                return Err(CorpusError::invariant(
                    line,
                    format!("synonym pair joins `{}` with itself", p.a),
                ));
            }
        }
        Ok(())
    }
}

fn check_triple(item: &AnnotatedText, t: &Triple) -> Result<(), String> {
    if t.subject.trim().is_empty() || t.object.trim().is_empty() || t.relation.trim().is_empty() {
        return Err("triple has an empty field".into());
    }
    let s = item.first_occurrence(&t.subject).ok_or_else(|| {
        format!(
            "triple subject `{}` is not annotated in doc `{}`",
            t.subject, item.doc.id
        )
    })?;
    let o = item.first_occurrence(&t.object).ok_or_else(|| {
        format!(
            "triple object `{}` is not annotated in doc `{}`",
            t.object, item.doc.id
        )
    })?;
    if s >= o {
        return Err(format!(
            "triple ({}, {}, {}): subject must occur before object in doc `{}`",
            t.subject, t.object, t.relation, item.doc.id
        ));
    }
    Ok(())
}

#[derive(Default)]
struct LineInfo {
    docs: Vec<usize>,
    triples: Vec<usize>,
    synonyms: Vec<usize>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum Record {
    Dataset {
        name: String,
    },
    Doc(Document),
    Span {
        doc: String,
        start: usize,
        end: usize,
        concept: TopConcept,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        surface: Option<String>,
    },
    Triple {
        doc: String,
        subject: String,
        object: String,
        relation: String,
    },
    Synonym {
        doc: String,
        a: String,
        b: String,
    },
}

/// Load and validate a dataset file.
pub fn load_dataset(path: impl AsRef<Path>) -> Result<Dataset, CorpusError> {
    let path = path.as_ref();
    let file = fs::File::open(path).map_err(|source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let default_name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    read_dataset(BufReader::new(file), &default_name).map_err(|e| match e {
        CorpusError::Io { source, .. } => CorpusError::Io {
            path: path.to_path_buf(),
            source,
        },
        other => other,
    })
}

/// Parse a dataset from any line reader. `default_name` applies when the
/// stream has no `dataset` header record.
pub fn read_dataset(reader: impl BufRead, default_name: &str) -> Result<Dataset, CorpusError> {
    let mut name = None;
    let mut items: Vec<AnnotatedText> = Vec::new();
    let mut index: HashMap<String, usize> = HashMap::new();
    let mut lines = LineInfo::default();
    let mut pending_spans: Vec<(usize, String, usize, usize, TopConcept, Option<String>)> =
        Vec::new();
    let mut ds = Dataset::default();

    for (n, line) in reader.lines().enumerate() {
        let line_no = n + 1;
        let line = line.map_err(|source| CorpusError::Io {
            path: PathBuf::new(),
            source,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let record: Record = serde_json::from_str(&line).map_err(|e| CorpusError::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
        match record {
            Record::Dataset { name: n } => {
                if name.is_some() {
                    return Err(CorpusError::Parse {
                        line: line_no,
                        message: "duplicate dataset header".into(),
                    });
                }
                name = Some(n);
            }
            Record::Doc(doc) => {
                if index.contains_key(&doc.id) {
                    return Err(CorpusError::invariant(
                        Some(line_no),
                        format!("duplicate doc id `{}`", doc.id),
                    ));
                }
                index.insert(doc.id.clone(), items.len());
                lines.docs.push(line_no);
                items.push(AnnotatedText::new(doc, Vec::new()));
            }
            Record::Span {
                doc,
                start,
                end,
                concept,
                surface,
            } => pending_spans.push((line_no, doc, start, end, concept, surface)),
            Record::Triple {
                doc,
                subject,
                object,
                relation,
            } => {
                let triple = Triple::new(subject, object, relation).with_source(doc);
                if triple.is_synonym() {
                    lines.synonyms.push(line_no);
                    ds.synonym_pairs.push(SynonymPair {
                        a: triple.subject,
                        b: triple.object,
                        source_doc: triple.source_doc,
                    });
                } else {
                    lines.triples.push(line_no);
                    ds.triples.push(triple);
                }
            }
            Record::Synonym { doc, a, b } => {
                lines.synonyms.push(line_no);
                ds.synonym_pairs.push(SynonymPair {
                    a,
                    b,
                    source_doc: doc,
                });
            }
        }
    }

    for (line_no, doc, start, end, concept, surface) in pending_spans {
        let idx = *index.get(&doc).ok_or_else(|| {
            CorpusError::invariant(
                Some(line_no),
                format!("span references unknown doc id `{doc}`"),
            )
        })?;
        let item = &mut items[idx];
        let span = TermSpan::from_text(&item.doc.text, start, end, concept).ok_or_else(|| {
            CorpusError::invariant(
                Some(line_no),
                format!("span [{start}, {end}) is out of bounds for doc `{doc}`"),
            )
        })?;
        if let Some(expected) = surface {
            if expected != span.surface {
                return Err(CorpusError::invariant(
                    Some(line_no),
                    format!(
                        "span surface `{expected}` does not match text `{}`",
                        span.surface
                    ),
                ));
            }
        }
        item.spans.push(span);
    }
    for item in &mut items {
        item.spans.sort_by_key(|s| (s.start, s.end));
    }

    ds.name = name.unwrap_or_else(|| default_name.to_string());
    ds.items = items;
    ds.validate_with_lines(&lines)?;
    Ok(ds)
}

/// Serialize a dataset to its line format.
pub fn dataset_to_string(d: &Dataset) -> String {
    let mut out = String::new();
    let mut push = |r: &Record| {
        out.push_str(&serde_json::to_string(r).expect("records serialize"));
        out.push('\n');
    };
    push(&Record::Dataset {
        name: d.name.clone(),
    });
    for item in &d.items {
        push(&Record::Doc(item.doc.clone()));
        for s in &item.spans {
            push(&Record::Span {
                doc: item.doc.id.clone(),
                start: s.start,
                end: s.end,
                concept: s.concept,
                surface: Some(s.surface.clone()),
            });
        }
    }
    for t in &d.triples {
        push(&Record::Triple {
            doc: t.source_doc.clone(),
            subject: t.subject.clone(),
            object: t.object.clone(),
            relation: t.relation.clone(),
        });
    }
    for p in &d.synonym_pairs {
        push(&Record::Synonym {
            doc: p.source_doc.clone(),
            a: p.a.clone(),
            b: p.b.clone(),
        });
    }
    out
}

/// Write a dataset file. The dataset is validated first.
pub fn write_dataset(d: &Dataset, path: impl AsRef<Path>) -> Result<(), CorpusError> {
    d.validate()?;
    let path = path.as_ref();
    let io_err = |source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    };
    let file = fs::File::create(path).map_err(io_err)?;
    let mut w = BufWriter::new(file);
    w.write_all(dataset_to_string(d).as_bytes())
        .map_err(io_err)?;
    w.flush().map_err(io_err)
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize)]
pub struct StatsReport {
    pub items: usize,
    pub terms: usize,
    /// Relation triples including synonym pairs.
    pub triples: usize,
    pub synonym_pairs: usize,
    pub per_concept: BTreeMap<TopConcept, usize>,
    pub multi_term_items: usize,
}

pub fn dataset_stats(d: &Dataset) -> StatsReport {
    let mut per_concept = BTreeMap::new();
    for span in d.items.iter().flat_map(|i| &i.spans) {
        *per_concept.entry(span.concept).or_insert(0) += 1;
    }
    StatsReport {
        items: d.items.len(),
        terms: d.items.iter().map(|i| i.spans.len()).sum(),
        triples: d.triples.len() + d.synonym_pairs.len(),
        synonym_pairs: d.synonym_pairs.len(),
        per_concept,
        multi_term_items: d.items.iter().filter(|i| i.is_multi_term()).count(),
    }
}

impl fmt::Display for StatsReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "items             {}", self.items)?;
        writeln!(f, "terms             {}", self.terms)?;
        writeln!(f, "multi-term items  {}", self.multi_term_items)?;
        writeln!(f, "triples           {}", self.triples)?;
        writeln!(f, "synonym pairs     {}", self.synonym_pairs)?;
        for c in TopConcept::ALL {
            writeln!(
                f,
                "  {:<18}{}",
                c.label(),
                self.per_concept.get(&c).copied().unwrap_or(0)
            )?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fixture() -> Dataset {
        let text = "Sand casting uses silica sand as mold material.";
        let doc = Document::new("d1", text).with_provenance(Provenance::Book);
        let spans = vec![
            TermSpan::from_text(text, 0, 12, TopConcept::CastingProcess).unwrap(),
            TermSpan::from_text(text, 18, 29, TopConcept::Materials).unwrap(),
        ];
        let item = AnnotatedText::new(doc, spans);
        let triple =
            Triple::from_annotated(&item, "silica sand", "sand casting", "used in").unwrap();
        Dataset {
            name: "fx".into(),
            items: vec![item],
            triples: vec![triple],
            synonym_pairs: vec![],
        }
    }

    #[test]
    fn fixture_loads_field_by_field() {
        let ds = fixture();
        let text = dataset_to_string(&ds);
        let back = read_dataset(text.as_bytes(), "x").unwrap();
        assert_eq!(back.name, "fx");
        assert_eq!(back.items.len(), 1);
        assert_eq!(back.triples.len(), 1);
        let t = &back.triples[0];
        assert_eq!(t.subject, "sand casting");
        assert_eq!(t.object, "silica sand");
        assert_eq!(t.relation, "used in");
        assert_eq!(t.source_doc, "d1");
        assert_eq!(back.items[0].spans[1].surface, "silica sand");
        assert_eq!(back.items[0].doc.provenance, Provenance::Book);
        assert_eq!(back, ds);
    }

    #[test]
    fn empty_dataset_is_valid() {
        let ds = read_dataset("".as_bytes(), "empty").unwrap();
        assert_eq!(ds.items.len(), 0);
        assert_eq!(ds.name, "empty");
        assert_eq!(dataset_stats(&ds), StatsReport::default());
    }

    #[test]
    fn dangling_triple_names_the_id() {
        let input = concat!(
            r#"{"kind":"doc","id":"d1","text":"metal and mold"}"#,
            "\n",
            r#"{"kind":"triple","doc":"ghost","subject":"metal","object":"mold","relation":"fills"}"#,
            "\n"
        );
        let err = read_dataset(input.as_bytes(), "x").unwrap_err();
        match err {
            CorpusError::Invariant { line, message } => {
                assert_eq!(line, Some(2));
                assert!(message.contains("ghost"), "{message}");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn malformed_line_reports_line_number() {
        let input = "{\"kind\":\"doc\",\"id\":\"d1\",\"text\":\"x\"}\nnot json\n";
        match read_dataset(input.as_bytes(), "x").unwrap_err() {
            CorpusError::Parse { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn overlapping_spans_rejected() {
        let input = concat!(
            r#"{"kind":"doc","id":"d1","text":"molten metal flow"}"#,
            "\n",
            r#"{"kind":"span","doc":"d1","start":0,"end":12,"concept":"materials"}"#,
            "\n",
            r#"{"kind":"span","doc":"d1","start":7,"end":17,"concept":"materials"}"#,
            "\n"
        );
        assert!(matches!(
            read_dataset(input.as_bytes(), "x"),
            Err(CorpusError::Invariant { .. })
        ));
    }

    #[test]
    fn triple_order_enforced_on_gold() {
        let mut ds = fixture();
        let t = &mut ds.triples[0];
        std::mem::swap(&mut t.subject, &mut t.object);
        assert!(ds.validate().is_err());
    }

    #[test]
    fn synonym_triples_fold_into_pairs() {
        let input = concat!(
            r#"{"kind":"doc","id":"d1","text":"melting point or melting temperature"}"#,
            "\n",
            r#"{"kind":"span","doc":"d1","start":0,"end":13,"concept":"product-property"}"#,
            "\n",
            r#"{"kind":"span","doc":"d1","start":17,"end":36,"concept":"product-property"}"#,
            "\n",
            r#"{"kind":"triple","doc":"d1","subject":"melting point","object":"melting temperature","relation":"Synonym of"}"#,
            "\n"
        );
        let ds = read_dataset(input.as_bytes(), "x").unwrap();
        assert!(ds.triples.is_empty());
        assert_eq!(ds.synonym_pairs.len(), 1);
        let gold = ds.relation_gold("d1");
        assert_eq!(
            gold,
            vec![
                Triple::new("melting point", "melting temperature", "synonym of").with_source("d1")
            ]
        );
        let stats = dataset_stats(&ds);
        assert_eq!((stats.triples, stats.synonym_pairs), (1, 1));
    }

    #[test]
    fn stats_counts_multi_term_items() {
        let t1 = "gate riser and sprue";
        let t2 = "porosity";
        let ds = Dataset {
            name: "s".into(),
            items: vec![
                AnnotatedText::new(
                    Document::new("a", t1),
                    vec![
                        TermSpan::from_text(t1, 0, 4, TopConcept::CastingEquipment).unwrap(),
                        TermSpan::from_text(t1, 5, 10, TopConcept::CastingEquipment).unwrap(),
                        TermSpan::from_text(t1, 15, 20, TopConcept::CastingEquipment).unwrap(),
                    ],
                ),
                AnnotatedText::new(
                    Document::new("b", t2),
                    vec![TermSpan::from_text(t2, 0, 8, TopConcept::CastingDefect).unwrap()],
                ),
            ],
            ..Default::default()
        };
        let stats = dataset_stats(&ds);
        assert_eq!(stats.terms, 4);
        assert_eq!(stats.multi_term_items, 1);
        assert_eq!(stats.per_concept[&TopConcept::CastingEquipment], 3);
        assert_eq!(stats.per_concept[&TopConcept::CastingDefect], 1);
    }

    #[test]
    fn concept_parsing_is_lenient() {
        assert_eq!(
            "Casting Process".parse::<TopConcept>().unwrap(),
            TopConcept::CastingProcess
        );
        assert_eq!(
            "casting_defects".parse::<TopConcept>().unwrap(),
            TopConcept::CastingDefect
        );
        assert_eq!(
            "Materials".parse::<TopConcept>().unwrap(),
            TopConcept::Materials
        );
        assert!("rubber-things".parse::<TopConcept>().is_err());
    }

    #[test]
    fn unwritable_path_is_io_error() {
        let err = write_dataset(&fixture(), "/nonexistent-dir/x/y.jsonl").unwrap_err();
        assert!(matches!(err, CorpusError::Io { .. }));
    }
}
