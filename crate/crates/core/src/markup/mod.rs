//! Inline symbol-pair annotation and the bracketed triple-list grammar.
//!
//! A labeled term is written `<open>term<close>`, where the close marker
//! identifies the top concept: `molten @@metal$$` marks `metal` as a material.
//! Annotation is flat; a second open marker before a close is an error.

mod align;
mod triples;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{AnnotatedText, Document, TermSpan, TopConcept};

pub use align::{align_labeled_output, AlignmentReport, DropReason, DroppedTerm};
pub use triples::{parse_triples, render_triples, ParsedTriples};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MarkupError {
    #[error("invalid marker map: {0}")]
    InvalidMarkers(String),
    #[error("unmatched open marker at position {pos}")]
    UnmatchedOpen { pos: usize },
    #[error("close marker `{marker}` without an open marker at position {pos}")]
    UnmatchedClose { pos: usize, marker: String },
    #[error("unknown close marker `{marker}` at position {pos}")]
    UnknownClose { pos: usize, marker: String },
    #[error("nested open marker at position {pos}")]
    NestedOpen { pos: usize },
    #[error("empty term at position {pos}")]
    EmptySpan { pos: usize },
    #[error("doc `{doc}`: {reason}")]
    Unrepresentable { doc: String, reason: String },
    #[error("source text is empty")]
    EmptySource,
    #[error("alignment failed: drift {:.3} exceeds {max_drift:.3}", report.drift_ratio)]
    AlignmentFailed {
        report: Box<AlignmentReport>,
        max_drift: f64,
    },
}

/// Open marker plus one close marker per top concept.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawMarkerMap", into = "RawMarkerMap")]
pub struct MarkerMap {
    open: String,
    close: BTreeMap<TopConcept, String>,
}

/// Serialized form. Missing close markers fall back to the defaults.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawMarkerMap {
    #[serde(default = "default_open")]
    pub open: String,
    #[serde(default)]
    pub close: BTreeMap<TopConcept, String>,
}

fn default_open() -> String {
    "@@".to_string()
}

impl TryFrom<RawMarkerMap> for MarkerMap {
    type Error = MarkupError;

    fn try_from(raw: RawMarkerMap) -> Result<Self, Self::Error> {
        let mut close = MarkerMap::default().close;
        close.extend(raw.close);
        MarkerMap::new(raw.open, close)
    }
}

impl From<MarkerMap> for RawMarkerMap {
    fn from(m: MarkerMap) -> Self {
        RawMarkerMap {
            open: m.open,
            close: m.close,
        }
    }
}

impl Default for MarkerMap {
    /// `%%` for defects is a local choice; the other five follow the
    /// published prompt examples.
    fn default() -> Self {
        let close = [
            (TopConcept::CastingProcess, "##"),
            (TopConcept::Materials, "$$"),
            (TopConcept::CastingEquipment, "^^"),
            (TopConcept::CastingParameter, "&&"),
            (TopConcept::ProductProperty, "||"),
            (TopConcept::CastingDefect, "%%"),
        ]
        .into_iter()
        .map(|(c, m)| (c, m.to_string()))
        .collect();
        MarkerMap {
            open: default_open(),
            close,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Marker {
    Open,
    Close(TopConcept),
}

impl MarkerMap {
    pub fn new(
        open: impl Into<String>,
        close: BTreeMap<TopConcept, String>,
    ) -> Result<Self, MarkupError> {
        let map = MarkerMap {
            open: open.into(),
            close,
        };
        map.validate()?;
        Ok(map)
    }

    fn validate(&self) -> Result<(), MarkupError> {
        for c in TopConcept::ALL {
            if !self.close.contains_key(&c) {
                return Err(MarkupError::InvalidMarkers(format!(
                    "no close marker for {c}"
                )));
            }
        }
        let all: Vec<&str> = self.all_markers().collect();
        for (i, a) in all.iter().enumerate() {
            if a.is_empty() {
                return Err(MarkupError::InvalidMarkers("empty marker".into()));
            }
            if a.chars().any(char::is_whitespace) {
                return Err(MarkupError::InvalidMarkers(format!(
                    "marker `{a}` contains whitespace"
                )));
            }
            for (j, b) in all.iter().enumerate() {
                if i != j && b.starts_with(a) {
                    return Err(MarkupError::InvalidMarkers(format!(
                        "marker `{a}` is a prefix of (or equal to) `{b}`"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn open(&self) -> &str {
        &self.open
    }

    pub fn close(&self, concept: TopConcept) -> &str {
        &self.close[&concept]
    }

    fn all_markers(&self) -> impl Iterator<Item = &str> {
        std::iter::once(self.open.as_str()).chain(self.close.values().map(String::as_str))
    }

    /// Marker starting at `chars[i]`, with its length in chars.
    fn marker_at(&self, chars: &[char], i: usize) -> Option<(Marker, usize)> {
        let matches = |m: &str| {
            let mut n = 0;
            for (k, mc) in m.chars().enumerate() {
                if chars.get(i + k) != Some(&mc) {
                    return None;
                }
                n += 1;
            }
            Some(n)
        };
        if let Some(n) = matches(&self.open) {
            return Some((Marker::Open, n));
        }
        self.close
            .iter()
            .find_map(|(c, m)| matches(m).map(|n| (Marker::Close(*c), n)))
    }

    fn first_marker_in(&self, s: &str) -> Option<String> {
        self.all_markers()
            .find(|m| s.contains(m))
            .map(str::to_string)
    }
}

/// A doubled ASCII punctuation character that is not a configured marker.
fn unknown_close_at(chars: &[char], i: usize) -> Option<String> {
    let (a, b) = (chars.get(i)?, chars.get(i + 1)?);
    (a == b && a.is_ascii_punctuation()).then(|| format!("{a}{b}"))
}

/// Parse labeled text into the stripped text and its spans.
///
/// Offsets refer to the stripped text. The returned document has an empty id.
pub fn parse_markup(labeled: &str, m: &MarkerMap) -> Result<AnnotatedText, MarkupError> {
    let chars: Vec<char> = labeled.chars().collect();
    let mut text = String::with_capacity(labeled.len());
    let mut text_len = 0usize;
    let mut spans: Vec<(usize, usize, TopConcept)> = Vec::new();
    let mut open: Option<(usize, usize)> = None; // (labeled pos, stripped start)
    let mut i = 0;
    while i < chars.len() {
        match m.marker_at(&chars, i) {
            Some((Marker::Open, n)) => {
                if open.is_some() {
                    return Err(MarkupError::NestedOpen { pos: i });
                }
                open = Some((i, text_len));
                i += n;
            }
            Some((Marker::Close(concept), n)) => {
                let (pos, start) = open.take().ok_or_else(|| MarkupError::UnmatchedClose {
                    pos: i,
                    marker: m.close(concept).to_string(),
                })?;
                if start == text_len {
                    return Err(MarkupError::EmptySpan { pos });
                }
                spans.push((start, text_len, concept));
                i += n;
            }
            None => {
                if open.is_some() {
                    if let Some(marker) = unknown_close_at(&chars, i) {
                        return Err(MarkupError::UnknownClose { pos: i, marker });
                    }
                }
                text.push(chars[i]);
                text_len += 1;
                i += 1;
            }
        }
    }
    if let Some((pos, _)) = open {
        return Err(MarkupError::UnmatchedOpen { pos });
    }
    let spans = spans
        .into_iter()
        .map(|(s, e, c)| TermSpan::from_text(&text, s, e, c).expect("span within stripped text"))
        .collect();
    Ok(AnnotatedText::new(Document::new("", text), spans))
}

/// Render spans back into labeled text.
///
/// Fails when the text contains a marker string or when the rendering would
/// not parse back to the same spans (for example a `$` adjacent to `$$`).
pub fn render_markup(a: &AnnotatedText, m: &MarkerMap) -> Result<String, MarkupError> {
    let unrepresentable = |reason: String| MarkupError::Unrepresentable {
        doc: a.doc.id.clone(),
        reason,
    };
    a.validate().map_err(unrepresentable)?;
    if let Some(marker) = m.first_marker_in(&a.doc.text) {
        return Err(unrepresentable(format!("text contains marker `{marker}`")));
    }
    let mut out = String::with_capacity(a.doc.text.len() + a.spans.len() * 4);
    let mut spans = a.spans.iter().peekable();
    let mut current: Option<&TermSpan> = None;
    for (pos, ch) in a.doc.text.chars().enumerate() {
        if let Some(span) = current {
            if span.end == pos {
                out.push_str(m.close(span.concept));
                current = None;
            }
        }
        if let Some(span) = spans.peek() {
            if span.start == pos {
                out.push_str(m.open());
                current = spans.next();
            }
        }
        out.push(ch);
    }
    if let Some(span) = current {
        out.push_str(m.close(span.concept));
    }
    match parse_markup(&out, m) {
        Ok(back) if back.doc.text == a.doc.text && back.spans == a.spans => Ok(out),
        Ok(_) => Err(unrepresentable(
            "marker characters adjacent to a term".into(),
        )),
        Err(e) => Err(unrepresentable(e.to_string())),
    }
}

/// Lenient parse result used by alignment.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct LenientParse {
    pub text: String,
    /// `(start, end, concept)` in stripped-text chars.
    pub terms: Vec<(usize, usize, TopConcept)>,
    pub notes: Vec<String>,
}

/// Parse without failing: stray markers are stripped and noted.
pub(crate) fn parse_markup_lenient(labeled: &str, m: &MarkerMap) -> LenientParse {
    let chars: Vec<char> = labeled.chars().collect();
    let mut text = String::with_capacity(labeled.len());
    let mut text_len = 0usize;
    let mut terms = Vec::new();
    let mut notes = Vec::new();
    let mut open: Option<(usize, usize)> = None;
    let mut i = 0;
    while i < chars.len() {
        match m.marker_at(&chars, i) {
            Some((Marker::Open, n)) => {
                if let Some((pos, _)) = open {
                    notes.push(format!("open marker at {pos} was never closed"));
                }
                open = Some((i, text_len));
                i += n;
            }
            Some((Marker::Close(concept), n)) => {
                match open.take() {
                    Some((_, start)) if start < text_len => terms.push((start, text_len, concept)),
                    Some((pos, _)) => notes.push(format!("empty term at {pos}")),
                    None => notes.push(format!("close marker at {i} without open")),
                }
                i += n;
            }
            None => {
                text.push(chars[i]);
                text_len += 1;
                i += 1;
            }
        }
    }
    if let Some((pos, _)) = open {
        notes.push(format!("open marker at {pos} was never closed"));
    }
    LenientParse { text, terms, notes }
}
