//! Retrieval-backed distillation of source documents into short
//! question-answer texts, one topic at a time.

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Document, Provenance, TopConcept};
use crate::llm::{ChatMessage, ChatRequest, EmbeddingVector, Gateway, GatewayError};
use crate::text::{char_boundaries, short_hash};

pub const MIN_CHUNK_CHARS: usize = 200;

/// A contiguous piece of one document, `[start, end)` in chars.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Chunk {
    pub doc_id: String,
    pub ordinal: usize,
    pub start: usize,
    pub end: usize,
    pub text: String,
}

#[derive(Debug, Error)]
pub enum DistillError {
    #[error("invalid input: {0}")]
    Precondition(String),
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error("no parseable question-answer pairs ({} warnings)", warnings.len())]
    NoPairs { warnings: Vec<String> },
}

/// Split documents into chunks of at most `max_chars` chars.
///
/// Each paragraph (separated by a blank line) becomes its own chunk. Longer
/// paragraphs are packed sentence by sentence; a single overlong sentence is
/// cut at the last whitespace that fits. Only whitespace is left between
/// chunks, so the document is recovered by re-inserting the gaps.
/// `max_chars` below [`MIN_CHUNK_CHARS`] is raised to it.
pub fn chunk_documents(docs: &[Document], max_chars: usize) -> Vec<Chunk> {
    let max = max_chars.max(MIN_CHUNK_CHARS);
    let mut out = Vec::new();
    for doc in docs {
        let chars: Vec<char> = doc.text.chars().collect();
        let bounds = char_boundaries(&doc.text);
        let mut ordinal = 0;
        for (ps, pe) in paragraphs(&chars) {
            for (s, e) in split_paragraph(&chars, ps, pe, max) {
                out.push(Chunk {
                    doc_id: doc.id.clone(),
                    ordinal,
                    start: s,
                    end: e,
                    text: doc.text[bounds[s]..bounds[e]].to_string(),
                });
                ordinal += 1;
            }
        }
    }
    out
}

/// Trim whitespace off both ends of `[s, e)`.
fn trim_range(chars: &[char], mut s: usize, mut e: usize) -> Option<(usize, usize)> {
    while s < e && chars[s].is_whitespace() {
        s += 1;
    }
    while e > s && chars[e - 1].is_whitespace() {
        e -= 1;
    }
    (s < e).then_some((s, e))
}

fn paragraphs(chars: &[char]) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let mut start = 0;
    let mut i = 0;
    while i < chars.len() {
        if chars[i].is_whitespace() {
            let run_start = i;
            let mut newlines = 0;
            while i < chars.len() && chars[i].is_whitespace() {
                if chars[i] == '\n' {
                    newlines += 1;
                }
                i += 1;
            }
            if newlines >= 2 {
                out.extend(trim_range(chars, start, run_start));
                start = i;
            }
        } else {
            i += 1;
        }
    }
    out.extend(trim_range(chars, start, chars.len()));
    out
}

fn sentences(chars: &[char], s: usize, e: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let mut start = s;
    for i in s..e {
        let ends_sentence =
            matches!(chars[i], '.' | '!' | '?') && (i + 1 == e || chars[i + 1].is_whitespace());
        if ends_sentence {
            out.extend(trim_range(chars, start, i + 1));
            start = i + 1;
        }
    }
    out.extend(trim_range(chars, start, e));
    out
}

fn split_paragraph(chars: &[char], s: usize, e: usize, max: usize) -> Vec<(usize, usize)> {
    if e - s <= max {
        return vec![(s, e)];
    }
    let mut pieces = Vec::new();
    for (ss, se) in sentences(chars, s, e) {
        let mut cur = ss;
        while se - cur > max {
            let limit = cur + max;
            let cut = (cur + 1..=limit)
                .rev()
                .find(|&k| chars[k].is_whitespace())
                .unwrap_or(limit);
            pieces.extend(trim_range(chars, cur, cut));
            cur = cut;
            while cur < se && chars[cur].is_whitespace() {
                cur += 1;
            }
        }
        pieces.extend(trim_range(chars, cur, se));
    }
    // Greedy packing of consecutive pieces.
    let mut out: Vec<(usize, usize)> = Vec::new();
    for (ps, pe) in pieces {
        match out.last_mut() {
            Some(last) if pe - last.0 <= max => last.1 = pe,
            _ => out.push((ps, pe)),
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChunkIndex {
    pub entries: Vec<(Chunk, EmbeddingVector)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoredChunk {
    pub chunk: Chunk,
    pub similarity: f64,
}

impl ChunkIndex {
    /// Embed every chunk through the gateway.
    pub fn build(chunks: Vec<Chunk>, gw: &Gateway) -> Result<Self, DistillError> {
        if chunks.is_empty() {
            return Ok(ChunkIndex {
                entries: Vec::new(),
            });
        }
        let texts: Vec<String> = chunks.iter().map(|c| c.text.clone()).collect();
        let vectors = gw.embed(&texts)?;
        Ok(ChunkIndex {
            entries: chunks.into_iter().zip(vectors).collect(),
        })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Exact top-`m` by cosine similarity; ties by `(doc_id, ordinal)`.
    pub fn top_m(&self, query: &EmbeddingVector, m: usize) -> Vec<ScoredChunk> {
        let mut scored: Vec<ScoredChunk> = self
            .entries
            .iter()
            .map(|(c, v)| ScoredChunk {
                chunk: c.clone(),
                similarity: query.cosine(v),
            })
            .collect();
        scored.sort_by(compare_scored);
        scored.truncate(m);
        scored
    }
}

pub fn retrieve(
    index: &ChunkIndex,
    query: &str,
    m: usize,
    gw: &Gateway,
) -> Result<Vec<ScoredChunk>, DistillError> {
    if m == 0 {
        return Err(DistillError::Precondition("m must be at least 1".into()));
    }
    if index.is_empty() {
        return Err(DistillError::Precondition("index is empty".into()));
    }
    let q = gw.embed(&[query.to_string()])?.remove(0);
    Ok(index.top_m(&q, m))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DistillConfig {
    pub max_chars: usize,
    pub m: usize,
    pub n_pairs: usize,
    pub model: String,
    pub temperature: f64,
    pub max_output_tokens: u32,
    /// Retrieval query per topic; missing topics use the built-in template.
    pub queries: BTreeMap<TopConcept, String>,
}

impl Default for DistillConfig {
    fn default() -> Self {
        DistillConfig {
            max_chars: 1500,
            m: 8,
            n_pairs: 5,
            model: "gpt-4.1-mini".into(),
            temperature: 0.0,
            max_output_tokens: 2048,
            queries: BTreeMap::new(),
        }
    }
}

impl DistillConfig {
    pub fn query_for(&self, topic: TopConcept) -> String {
        if let Some(q) = self.queries.get(&topic) {
            return q.clone();
        }
        let description = match topic {
            TopConcept::Materials => "alloys, metals, sands, binders and other materials used for casting and their composition",
            TopConcept::CastingProcess => "classes of casting processes and how each process forms a part",
            TopConcept::ProductProperty => "mechanical, physical and surface properties of cast products",
            TopConcept::CastingParameter => "controllable process parameters such as temperatures, speeds, pressures and times",
            TopConcept::CastingDefect => "casting defects, their appearance, causes and prevention",
            TopConcept::CastingEquipment => "machines, tools, molds, dies and other equipment used in casting",
        };
        format!("{}: {description}.", topic.display_name())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DistillOutput {
    pub documents: Vec<Document>,
    pub warnings: Vec<String>,
}

const DISTILL_SYSTEM: &str = "You are an expert in casting. You condense technical source passages into focused question-answer pairs that keep the essential domain knowledge.";

fn distill_prompt(topic: TopConcept, passages: &[ScoredChunk], n_pairs: usize) -> String {
    let mut user = format!("Topic: {}\n\nSource passages:\n", topic.display_name());
    for (i, p) in passages.iter().enumerate() {
        user.push_str(&format!("[{}] {}\n", i + 1, p.chunk.text));
    }
    user.push_str(&format!(
        "\nWrite {n_pairs} question-answer pairs about the topic, using only the passages. \
         Write every pair as two lines:\nQ: <question>\nA: <answer>"
    ));
    user
}

/// Parse `Q:`/`A:` blocks. Returns the pairs and one warning per malformed block.
pub fn parse_qa_pairs(raw: &str) -> (Vec<(String, String)>, Vec<String>) {
    #[derive(PartialEq)]
    enum Field {
        None,
        Q,
        A,
    }
    let mut pairs = Vec::new();
    let mut warnings = Vec::new();
    let mut q: Option<String> = None;
    let mut a: Option<String> = None;
    let mut field = Field::None;

    let flush = |q: &mut Option<String>,
                 a: &mut Option<String>,
                 pairs: &mut Vec<(String, String)>,
                 warnings: &mut Vec<String>| {
        match (q.take(), a.take()) {
            (Some(qq), Some(aa)) if !qq.trim().is_empty() && !aa.trim().is_empty() => {
                pairs.push((qq.trim().to_string(), aa.trim().to_string()))
            }
            (None, None) => {}
            (qq, aa) => warnings.push(format!(
                "incomplete pair (question: {:?}, answer: {:?})",
                qq.map(|s| s.trim().to_string()),
                aa.map(|s| s.trim().to_string())
            )),
        }
    };

    for line in raw.lines() {
        let stripped = line
            .trim()
            .trim_start_matches(|c: char| {
                c.is_ascii_digit() || matches!(c, '.' | ')' | '-' | '*' | '#')
            })
            .trim_start()
            .trim_start_matches("**");
        let upper: String = stripped.chars().take(2).collect::<String>().to_uppercase();
        if upper == "Q:" {
            flush(&mut q, &mut a, &mut pairs, &mut warnings);
            q = Some(stripped[2..].trim().trim_end_matches("**").to_string());
            field = Field::Q;
        } else if upper == "A:" {
            if a.is_some() || q.is_none() {
                flush(&mut q, &mut a, &mut pairs, &mut warnings);
                if q.is_none() && a.is_none() {
                    warnings.push(format!("answer without question: {}", stripped[2..].trim()));
                    field = Field::None;
                    continue;
                }
            }
            a = Some(stripped[2..].trim().to_string());
            field = Field::A;
        } else if !line.trim().is_empty() {
            let target = match field {
                Field::Q => q.as_mut(),
                Field::A => a.as_mut(),
                Field::None => None,
            };
            if let Some(t) = target {
                t.push(' ');
                t.push_str(line.trim());
            }
        }
    }
    flush(&mut q, &mut a, &mut pairs, &mut warnings);
    (pairs, warnings)
}

/// Distill one topic into question-answer documents.
pub fn distill_topic(
    index: &ChunkIndex,
    topic: TopConcept,
    gw: &Gateway,
    cfg: &DistillConfig,
) -> Result<DistillOutput, DistillError> {
    let passages = retrieve(index, &cfg.query_for(topic), cfg.m.max(1), gw)?;
    let mut req = ChatRequest::new(
        cfg.model.clone(),
        vec![
            ChatMessage::system(DISTILL_SYSTEM),
            ChatMessage::user(distill_prompt(topic, &passages, cfg.n_pairs)),
        ],
    );
    req.temperature = cfg.temperature;
    req.max_output_tokens = cfg.max_output_tokens;
    let reply = gw.chat(&req)?;
    let (pairs, mut warnings) = parse_qa_pairs(&reply);
    if pairs.is_empty() {
        return Err(DistillError::NoPairs { warnings });
    }
    let mut seen = HashSet::new();
    let mut documents = Vec::new();
    for (q, a) in pairs {
        let text = format!("Q: {q}\nA: {a}");
        let id = format!(
            "distilled-{}-{}",
            topic.label(),
            short_hash(text.as_bytes())
        );
        if !seen.insert(id.clone()) {
            warnings.push(format!("duplicate pair skipped: {q}"));
            continue;
        }
        documents.push(
            Document::new(id, text)
                .with_provenance(Provenance::Distilled)
                .with_topic(topic),
        );
    }
    Ok(DistillOutput {
        documents,
        warnings,
    })
}

/// Similarity descending, then `(doc_id, ordinal)` ascending.
pub fn compare_scored(a: &ScoredChunk, b: &ScoredChunk) -> Ordering {
    b.similarity
        .total_cmp(&a.similarity)
        .then_with(|| a.chunk.doc_id.cmp(&b.chunk.doc_id))
        .then_with(|| a.chunk.ordinal.cmp(&b.chunk.ordinal))
}
