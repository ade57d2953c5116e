use crate::corpus::{AnnotatedText, Document, Triple};
use crate::llm::{ChatMessage, ChatRequest, Gateway};
use crate::markup::{align_labeled_output, parse_triples, AlignmentReport};
use crate::text::normalize;

use super::prompts::{relations_system, relations_user, terms_system, terms_user};
use super::{Demonstration, ExtractError, RunParams};

#[derive(Debug, Clone, PartialEq)]
pub struct TermExtraction {
    pub annotated: AnnotatedText,
    pub report: AlignmentReport,
    pub request_hash: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RelationExtraction {
    pub triples: Vec<Triple>,
    pub warnings: Vec<String>,
    pub request_hash: String,
}

fn ask(
    gw: &Gateway,
    params: &RunParams,
    model: &str,
    system: String,
    user: String,
) -> Result<(String, String), ExtractError> {
    let mut req = ChatRequest::new(
        model,
        vec![ChatMessage::system(system), ChatMessage::user(user)],
    );
    req.temperature = params.temperature;
    req.max_output_tokens = params.max_output_tokens;
    let reply = gw.chat(&req)?;
    Ok((reply, req.fingerprint()))
}

fn terms_with(
    doc: &Document,
    demos: &[Demonstration],
    model: &str,
    gw: &Gateway,
    params: &RunParams,
) -> Result<TermExtraction, ExtractError> {
    let system = terms_system(&params.marker_map, !demos.is_empty());
    let (reply, request_hash) = ask(gw, params, model, system, terms_user(demos, &doc.text))?;
    let report = align_labeled_output(&doc.text, &reply, &params.marker_map, params.max_drift)?;
    Ok(TermExtraction {
        annotated: AnnotatedText::new(doc.clone(), report.recovered.clone()),
        report,
        request_hash,
    })
}

pub fn extract_terms_icl(
    doc: &Document,
    demos: &[Demonstration],
    gw: &Gateway,
    params: &RunParams,
) -> Result<TermExtraction, ExtractError> {
    if demos.is_empty() {
        return Err(ExtractError::Precondition(
            "k-shot extraction needs demonstrations".into(),
        ));
    }
    terms_with(doc, demos, &params.model, gw, params)
}

pub fn extract_terms_finetuned(
    doc: &Document,
    model_id: &str,
    gw: &Gateway,
    params: &RunParams,
) -> Result<TermExtraction, ExtractError> {
    terms_with(doc, &[], model_id, gw, params)
}

/// Drop triples whose subject or object is not in `terms` (normalized match).
pub(crate) fn keep_listed(
    triples: Vec<Triple>,
    terms: &[String],
    warnings: &mut Vec<String>,
) -> Vec<Triple> {
    let listed: Vec<String> = terms.iter().map(|t| normalize(t)).collect();
    triples
        .into_iter()
        .filter(|t| {
            let missing: Vec<&str> = [&t.subject, &t.object]
                .into_iter()
                .filter(|x| !listed.contains(&normalize(x)))
                .map(String::as_str)
                .collect();
            if missing.is_empty() {
                true
            } else {
                warnings.push(format!(
                    "dropped [{}, {}, {}]: unlisted term {}",
                    t.subject,
                    t.object,
                    t.relation,
                    missing
                        .iter()
                        .map(|m| format!("`{m}`"))
                        .collect::<Vec<_>>()
                        .join(", ")
                ));
                false
            }
        })
        .collect()
}

fn relations_with(
    terms: &[String],
    doc: &Document,
    demos: &[Demonstration],
    model: &str,
    gw: &Gateway,
    params: &RunParams,
) -> Result<RelationExtraction, ExtractError> {
    if terms.len() < 2 {
        return Err(ExtractError::Precondition(format!(
            "relation extraction needs at least two terms, `{}` has {}",
            doc.id,
            terms.len()
        )));
    }
    let system = relations_system(!demos.is_empty());
    let (reply, request_hash) = ask(
        gw,
        params,
        model,
        system,
        relations_user(demos, terms, &doc.text),
    )?;
    let parsed = parse_triples(&reply);
    let mut warnings = parsed.warnings;
    let triples = parsed
        .triples
        .into_iter()
        .map(|t| t.with_source(doc.id.clone()))
        .collect();
    let triples = keep_listed(triples, terms, &mut warnings);
    Ok(RelationExtraction {
        triples,
        warnings,
        request_hash,
    })
}

pub fn extract_relations_icl(
    terms: &[String],
    doc: &Document,
    demos: &[Demonstration],
    gw: &Gateway,
    params: &RunParams,
) -> Result<RelationExtraction, ExtractError> {
    if demos.is_empty() {
        return Err(ExtractError::Precondition(
            "k-shot extraction needs demonstrations".into(),
        ));
    }
    relations_with(terms, doc, demos, &params.model, gw, params)
}

pub fn extract_relations_finetuned(
    terms: &[String],
    doc: &Document,
    model_id: &str,
    gw: &Gateway,
    params: &RunParams,
) -> Result<RelationExtraction, ExtractError> {
    relations_with(terms, doc, &[], model_id, gw, params)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{TermSpan, TopConcept};
    use crate::llm::{MockProvider, MockRule, MockScript, RetryPolicy};
    use crate::markup::{render_markup, MarkupError};

    fn gw(reply: &str) -> Gateway {
        let script = MockScript {
            rules: vec![
                MockRule::text("Input:", reply),
                MockRule::text("Terms:", reply),
            ],
            ..Default::default()
        };
        Gateway::new(MockProvider::new(script)).with_retry(RetryPolicy::immediate(1))
    }

    fn demo() -> Demonstration {
        Demonstration {
            id: "t".into(),
            input_repr: "x".into(),
            prompt_input: "Input: x".into(),
            prompt_output: "x".into(),
        }
    }

    fn gold() -> AnnotatedText {
        let text = "Pour molten aluminium into the sand mold.";
        let doc = Document::new("d1", text);
        let spans = vec![
            TermSpan::from_text(text, 12, 21, TopConcept::Materials).unwrap(),
            TermSpan::from_text(text, 31, 40, TopConcept::CastingEquipment).unwrap(),
        ];
        AnnotatedText::new(doc, spans)
    }

    #[test]
    fn echo_recovers_gold() {
        let g = gold();
        let params = RunParams::default();
        let reply = render_markup(&g, &params.marker_map).unwrap();
        let gw = gw(&reply);
        let icl = extract_terms_icl(&g.doc, &[demo()], &gw, &params).unwrap();
        assert_eq!(icl.annotated, g);
        let ft = extract_terms_finetuned(&g.doc, "ft:model", &gw, &params).unwrap();
        assert_eq!(ft.annotated, g);
    }

    #[test]
    fn unrelated_reply_fails_alignment() {
        let g = gold();
        let gw = gw("The weather today is @@sunny$$ with a light breeze from the west.");
        let err =
            extract_terms_finetuned(&g.doc, "ft:model", &gw, &RunParams::default()).unwrap_err();
        assert!(matches!(
            err,
            ExtractError::Markup(MarkupError::AlignmentFailed { .. })
        ));
    }

    #[test]
    fn icl_needs_demos() {
        let g = gold();
        let gw = gw("x");
        assert!(matches!(
            extract_terms_icl(&g.doc, &[], &gw, &RunParams::default()),
            Err(ExtractError::Precondition(_))
        ));
    }

    #[test]
    fn relation_reply_parsing() {
        let doc = Document::new(
            "d",
            "most alloy can be cast by semisolid casting, which processes magnesium",
        );
        let terms: Vec<String> = vec![
            "alloy".into(),
            "semisolid casting".into(),
            "magnesium".into(),
        ];
        let p = RunParams::default();
        let gw1 = gw("[subject: alloy, object: semisolid casting, relation: processed by]; [subject: semisolid casting, object: magnesium, relation: processes]");
        let r = extract_relations_icl(&terms, &doc, &[demo()], &gw1, &p).unwrap();
        assert_eq!(r.triples.len(), 2);
        assert!(r.triples.iter().all(|t| t.source_doc == "d"));

        let r = extract_relations_finetuned(&terms, &doc, "ft:m", &gw("None"), &p).unwrap();
        assert!(r.triples.is_empty());

        let gw3 = gw("[subject: rubber, object: alloy, relation: coats]; [subject: alloy, object: magnesium, relation: contains]");
        let r = extract_relations_icl(&terms, &doc, &[demo()], &gw3, &p).unwrap();
        assert_eq!(r.triples.len(), 1);
        assert_eq!(r.warnings.len(), 1);
        assert!(r.warnings[0].contains("rubber"));
    }

    #[test]
    fn single_term_rejected() {
        let doc = Document::new("d", "alloy");
        assert!(matches!(
            extract_relations_finetuned(
                &["alloy".into()],
                &doc,
                "m",
                &gw("None"),
                &RunParams::default()
            ),
            Err(ExtractError::Precondition(_))
        ));
    }
}
