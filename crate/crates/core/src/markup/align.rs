//! Map terms from model-labeled output back onto the source text.
//!
//! Models sometimes rewrite the text they were asked to label. Recovery runs
//! in two passes: a char-level diff between the stripped output and the
//! source maps terms that sit inside unchanged regions; terms touched by an
//! edit fall back to a substring search in the source, preferring the
//! occurrence nearest to where the diff says the term should be.

use serde::{Deserialize, Serialize};
use similar::{capture_diff_slices, Algorithm, DiffOp};

use super::{parse_markup_lenient, MarkerMap, MarkupError};
use crate::corpus::{TermSpan, TopConcept};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DropReason {
    /// The surface does not occur in the source text.
    NotInSource,
    /// Every occurrence collides with an already recovered term.
    Overlap,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DroppedTerm {
    pub surface: String,
    pub concept: TopConcept,
    pub reason: DropReason,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignmentReport {
    /// Spans valid against the source text, sorted and non-overlapping.
    pub recovered: Vec<TermSpan>,
    pub dropped: Vec<DroppedTerm>,
    /// Fraction of source chars not matched by the diff.
    pub drift_ratio: f64,
}

struct Candidate {
    out_start: usize,
    out_end: usize,
    concept: TopConcept,
}

/// Recover source-offset spans from model output.
///
/// Errors with [`MarkupError::AlignmentFailed`] (carrying the full report)
/// when the drift ratio exceeds `max_drift`.
pub fn align_labeled_output(
    source: &str,
    model_labeled: &str,
    m: &MarkerMap,
    max_drift: f64,
) -> Result<AlignmentReport, MarkupError> {
    if source.is_empty() {
        return Err(MarkupError::EmptySource);
    }
    let parsed = parse_markup_lenient(model_labeled, m);
    let src: Vec<char> = source.chars().collect();
    let out: Vec<char> = parsed.text.chars().collect();

    let mut map: Vec<Option<usize>> = vec![None; out.len()];
    let mut matched = 0usize;
    for op in capture_diff_slices(Algorithm::Myers, &src, &out) {
        if let DiffOp::Equal {
            old_index,
            new_index,
            len,
        } = op
        {
            for k in 0..len {
                map[new_index + k] = Some(old_index + k);
            }
            matched += len;
        }
    }
    let drift_ratio = 1.0 - matched as f64 / src.len() as f64;

    let terms: Vec<Candidate> = parsed
        .terms
        .iter()
        .map(|&(s, e, c)| Candidate {
            out_start: s,
            out_end: e,
            concept: c,
        })
        .collect();

    let mut taken: Vec<(usize, usize, TopConcept)> = Vec::new();
    let mut fallback = Vec::new();
    for t in &terms {
        match direct_mapping(&map, t.out_start, t.out_end) {
            Some((s, e)) => taken.push((s, e, t.concept)),
            None => fallback.push(t),
        }
    }

    let mut dropped = Vec::new();
    for t in fallback {
        let surface: Vec<char> = out[t.out_start..t.out_end].to_vec();
        let surface_str: String = surface.iter().collect();
        let mut hits = find_chars(&src, &surface, false);
        if hits.is_empty() {
            hits = find_chars(&src, &surface, true);
        }
        if hits.is_empty() {
            dropped.push(DroppedTerm {
                surface: surface_str,
                concept: t.concept,
                reason: DropReason::NotInSource,
            });
            continue;
        }
        let estimate = estimate_position(&map, t.out_start);
        hits.sort_by_key(|&h| (h.abs_diff(estimate), h));
        let len = surface.len();
        let free = hits
            .into_iter()
            .find(|&h| taken.iter().all(|&(s, e, _)| h + len <= s || h >= e));
        match free {
            Some(h) => taken.push((h, h + len, t.concept)),
            None => dropped.push(DroppedTerm {
                surface: surface_str,
                concept: t.concept,
                reason: DropReason::Overlap,
            }),
        }
    }

    taken.sort_by_key(|&(s, e, _)| (s, e));
    let recovered = taken
        .into_iter()
        .map(|(s, e, c)| TermSpan {
            start: s,
            end: e,
            surface: src[s..e].iter().collect(),
            concept: c,
        })
        .collect();
    let report = AlignmentReport {
        recovered,
        dropped,
        drift_ratio,
    };
    if drift_ratio > max_drift {
        return Err(MarkupError::AlignmentFailed {
            report: Box::new(report),
            max_drift,
        });
    }
    Ok(report)
}

/// Source range when every char of the term maps to consecutive source chars.
fn direct_mapping(map: &[Option<usize>], start: usize, end: usize) -> Option<(usize, usize)> {
    let first = map[start]?;
    for (k, slot) in map[start..end].iter().enumerate() {
        if *slot != Some(first + k) {
            return None;
        }
    }
    Some((first, first + (end - start)))
}

/// Best guess of the source position corresponding to output position `pos`.
fn estimate_position(map: &[Option<usize>], pos: usize) -> usize {
    for back in (0..=pos.min(map.len().saturating_sub(1))).rev() {
        if let Some(src) = map[back] {
            return src + (pos - back);
        }
    }
    map.iter().flatten().next().copied().unwrap_or(0)
}

fn find_chars(hay: &[char], needle: &[char], ignore_case: bool) -> Vec<usize> {
    if needle.is_empty() || needle.len() > hay.len() {
        return Vec::new();
    }
    let eq = |a: char, b: char| {
        if ignore_case {
            a == b || a.to_lowercase().eq(b.to_lowercase())
        } else {
            a == b
        }
    };
    (0..=hay.len() - needle.len())
        .filter(|&i| needle.iter().enumerate().all(|(k, &c)| eq(hay[i + k], c)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::markup::{parse_markup, render_markup};

    fn m() -> MarkerMap {
        MarkerMap::default()
    }

    #[test]
    fn identical_output_recovers_exactly() {
        let labeled = "pouring molten @@metal$$ from @@ladles^^ at controlled @@pour rates&&";
        let gold = parse_markup(labeled, &m()).unwrap();
        let report = align_labeled_output(&gold.doc.text, labeled, &m(), 0.25).unwrap();
        assert_eq!(report.recovered, gold.spans);
        assert!(report.dropped.is_empty());
        assert_eq!(report.drift_ratio, 0.0);
        assert_eq!(render_markup(&gold, &m()).unwrap(), labeled);
    }

    #[test]
    fn paraphrased_clause_keeps_terms() {
        let source =
            "The melt is poured into a sand mold. Afterwards the casting cools slowly in the mold.";
        // Model rewrote the second sentence but kept both terms.
        let labeled = "The melt is poured into a @@sand mold^^. After that the @@casting$$ is cooled slowly in the mold.";
        let report = align_labeled_output(source, labeled, &m(), 0.25).unwrap();
        let got: Vec<(usize, usize, &str)> = report
            .recovered
            .iter()
            .map(|s| (s.start, s.end, s.surface.as_str()))
            .collect();
        // Offsets counted by hand against `source`.
        assert_eq!(got, vec![(26, 35, "sand mold"), (52, 59, "casting")]);
        assert!(report.drift_ratio > 0.0);
    }

    #[test]
    fn hallucinated_term_is_dropped() {
        let source = "Die casting produces thin walls.";
        let labeled = "@@Die casting##, using @@rubber$$, produces thin walls.";
        let report = align_labeled_output(source, labeled, &m(), 0.5).unwrap();
        assert_eq!(report.recovered.len(), 1);
        assert_eq!(report.recovered[0].surface, "Die casting");
        assert_eq!(
            report.dropped,
            vec![DroppedTerm {
                surface: "rubber".into(),
                concept: TopConcept::Materials,
                reason: DropReason::NotInSource,
            }]
        );
    }

    #[test]
    fn unrelated_output_fails_with_report() {
        let source = "Gravity die casting fills the mold by gravity alone.";
        let labeled = "I cannot help with @@that$$ request, sorry.";
        match align_labeled_output(source, labeled, &m(), 0.25) {
            Err(MarkupError::AlignmentFailed { report, .. }) => assert!(report.drift_ratio > 0.25),
            other => panic!("expected failure, got {other:?}"),
        }
    }

    #[test]
    fn case_changed_term_found_case_insensitively() {
        let source = "Squeeze casting reduces porosity.";
        let labeled = "@@squeeze Casting## reduces @@porosity%%.";
        let report = align_labeled_output(source, labeled, &m(), 0.25).unwrap();
        assert_eq!(report.recovered[0].surface, "Squeeze casting");
        assert_eq!(report.recovered[1].surface, "porosity");
    }

    #[test]
    fn empty_source_rejected() {
        assert_eq!(
            align_labeled_output("", "x", &m(), 0.25),
            Err(MarkupError::EmptySource)
        );
    }
}
