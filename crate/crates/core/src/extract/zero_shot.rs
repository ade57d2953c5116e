use serde_json::Value;

use crate::corpus::{Document, TopConcept, Triple};
use crate::llm::{ChatMessage, ChatRequest, Gateway};

use super::prompts::{zero_shot_system, zero_shot_user};
use super::{ExtractError, NamedTerm, RunParams};

/// Name-level extraction result. Terms carry no offsets.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ZeroShotOutput {
    pub terms: Vec<NamedTerm>,
    pub relations: Vec<Triple>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ZeroShotParse {
    pub output: ZeroShotOutput,
    pub warnings: Vec<String>,
    pub request_hash: String,
}

fn strip_fences(raw: &str) -> &str {
    let Some(open) = raw.find("```") else {
        return raw;
    };
    let after = &raw[open + 3..];
    // Skip an info string such as `json`.
    let body_start = after.find('\n').map(|i| i + 1).unwrap_or(0);
    let body = &after[body_start..];
    match body.find("```") {
        Some(close) => &body[..close],
        None => body,
    }
}

fn str_field<'a>(v: &'a Value, key: &str) -> Option<&'a str> {
    v.get(key)
        .and_then(Value::as_str)
        .map(str::trim)
        .filter(|s| !s.is_empty())
}

/// Lenient parse of a structured reply: code fences and surrounding prose
/// are ignored, unknown keys are skipped, and entries with missing fields or
/// unknown concept labels are dropped with a warning.
pub fn parse_zero_shot(raw: &str) -> Result<ZeroShotParse, ExtractError> {
    let body = strip_fences(raw);
    let (Some(start), Some(end)) = (body.find('{'), body.rfind('}')) else {
        return Err(ExtractError::ZeroShotParse(
            "no JSON object in reply".into(),
        ));
    };
    if end < start {
        return Err(ExtractError::ZeroShotParse(
            "no JSON object in reply".into(),
        ));
    }
    let v: Value = serde_json::from_str(&body[start..=end])
        .map_err(|e| ExtractError::ZeroShotParse(e.to_string()))?;
    if !v.is_object() {
        return Err(ExtractError::ZeroShotParse("reply is not an object".into()));
    }
    let mut out = ZeroShotParse::default();
    let list = |key: &str, warnings: &mut Vec<String>| -> Vec<Value> {
        match v.get(key) {
            None | Some(Value::Null) => Vec::new(),
            Some(Value::Array(a)) => a.clone(),
            Some(_) => {
                warnings.push(format!("`{key}` is not a list"));
                Vec::new()
            }
        }
    };
    for t in list("terms", &mut out.warnings) {
        let (Some(name), Some(concept)) = (str_field(&t, "name"), str_field(&t, "concept")) else {
            out.warnings
                .push(format!("term entry without name or concept: {t}"));
            continue;
        };
        match concept.parse::<TopConcept>() {
            Ok(concept) => out.output.terms.push(NamedTerm {
                name: name.to_string(),
                concept,
            }),
            Err(_) => out
                .warnings
                .push(format!("term `{name}` has unknown concept `{concept}`")),
        }
    }
    for r in list("relations", &mut out.warnings) {
        match (
            str_field(&r, "subject"),
            str_field(&r, "object"),
            str_field(&r, "relation"),
        ) {
            (Some(s), Some(o), Some(rel)) => out.output.relations.push(Triple::new(s, o, rel)),
            _ => out.warnings.push(format!("incomplete relation entry: {r}")),
        }
    }
    Ok(out)
}

/// Prompt with a shipped profile and parse the structured reply. Relation
/// runs pass the allowed term list, which is included in the prompt.
pub fn extract_zero_shot(
    doc: &Document,
    gw: &Gateway,
    params: &RunParams,
    terms: Option<&[String]>,
) -> Result<ZeroShotParse, ExtractError> {
    let profile = params
        .profile
        .as_deref()
        .unwrap_or(super::prompts::ZERO_SHOT_PROFILES[0]);
    let system = zero_shot_system(profile)
        .ok_or_else(|| ExtractError::Config(format!("unknown zero-shot profile `{profile}`")))?;
    let mut req = ChatRequest::new(
        params.model.clone(),
        vec![
            ChatMessage::system(system),
            ChatMessage::user(zero_shot_user(&doc.text, terms)),
        ],
    );
    req.temperature = params.temperature;
    req.max_output_tokens = params.max_output_tokens;
    let reply = gw.chat(&req)?;
    let mut parsed = parse_zero_shot(&reply)?;
    for t in &mut parsed.output.relations {
        t.source_doc = doc.id.clone();
    }
    parsed.request_hash = req.fingerprint();
    Ok(parsed)
}
