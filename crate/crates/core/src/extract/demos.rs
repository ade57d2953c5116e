use std::cmp::Ordering;

use crate::corpus::Dataset;
use crate::llm::{cosine, Gateway};
use crate::markup::{render_markup, render_triples, MarkerMap};

use super::prompts::{relations_input, relations_repr, terms_input};
use super::{Demonstration, ExtractError, Task};

#[derive(Debug, Clone, PartialEq)]
pub struct DemoSelection {
    /// Prompt order: least similar first.
    pub demos: Vec<Demonstration>,
    /// Similarity of each entry in `demos`.
    pub similarities: Vec<f64>,
    pub warnings: Vec<String>,
}

/// Build every eligible demonstration from a training set. Relation
/// demonstrations come only from items with two or more distinct terms.
pub fn demo_candidates(
    train: &Dataset,
    task: Task,
    m: &MarkerMap,
) -> Result<Vec<Demonstration>, ExtractError> {
    let mut out = Vec::new();
    for item in &train.items {
        let text = &item.doc.text;
        match task {
            Task::Terms => {
                let rendered = render_markup(item, m).map_err(|source| ExtractError::Item {
                    id: item.doc.id.clone(),
                    source,
                })?;
                out.push(Demonstration {
                    id: item.doc.id.clone(),
                    input_repr: text.clone(),
                    prompt_input: terms_input(text),
                    prompt_output: rendered,
                });
            }
            Task::Relations => {
                if !item.is_multi_term() {
                    continue;
                }
                let terms = item.term_list();
                out.push(Demonstration {
                    id: item.doc.id.clone(),
                    input_repr: relations_repr(&terms, text),
                    prompt_input: relations_input(&terms, text),
                    prompt_output: render_triples(&train.relation_gold(&item.doc.id)),
                });
            }
        }
    }
    Ok(out)
}

/// Indices of the `k` most similar candidates, most similar first.
/// Equal similarities are ordered by candidate id.
pub fn rank_by_similarity(
    candidates: &[(&str, &[f64])],
    probe: &[f64],
    k: usize,
) -> Vec<(usize, f64)> {
    let mut scored: Vec<(usize, f64)> = candidates
        .iter()
        .enumerate()
        .map(|(i, (_, v))| (i, cosine(probe, v)))
        .collect();
    scored.sort_by(|a, b| match b.1.total_cmp(&a.1) {
        Ordering::Equal => candidates[a.0].0.cmp(candidates[b.0].0),
        o => o,
    });
    scored.truncate(k);
    scored
}

/// Pick the `k` candidates most similar to `probe` and return them in prompt
/// order, least similar first, so the closest example sits next to the input.
pub fn select_demonstrations(
    candidates: &[Demonstration],
    probe: &str,
    k: usize,
    gw: &Gateway,
) -> Result<DemoSelection, ExtractError> {
    if k == 0 {
        return Err(ExtractError::Precondition("k must be at least 1".into()));
    }
    if candidates.is_empty() {
        return Err(ExtractError::Precondition(
            "no demonstration candidates".into(),
        ));
    }
    let mut warnings = Vec::new();
    if k > candidates.len() {
        warnings.push(format!(
            "k={k} exceeds the {} available candidates; using all of them",
            candidates.len()
        ));
    }
    let mut texts: Vec<String> = candidates.iter().map(|d| d.input_repr.clone()).collect();
    texts.push(probe.to_string());
    let mut vectors = gw.embed(&texts)?;
    let probe_vec = vectors.pop().expect("probe embedded").values;
    let refs: Vec<(&str, &[f64])> = candidates
        .iter()
        .zip(&vectors)
        .map(|(d, v)| (d.id.as_str(), v.values.as_slice()))
        .collect();
    let ranked = rank_by_similarity(&refs, &probe_vec, k);
    let (demos, similarities) = ranked
        .into_iter()
        .rev()
        .map(|(i, s)| (candidates[i].clone(), s))
        .unzip();
    Ok(DemoSelection {
        demos,
        similarities,
        warnings,
    })
}
