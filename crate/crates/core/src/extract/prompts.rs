//! Prompt text for every strategy and task.

use crate::corpus::TopConcept;
use crate::markup::MarkerMap;

use super::Demonstration;

pub const EXAMPLES_INTRO: &str = "Here are some examples.";

/// What the model is told to look for, and the noun used when labeling.
fn concept_phrases(c: TopConcept) -> (&'static str, &'static str) {
    match c {
        TopConcept::CastingProcess => ("a class of casting process", "casting process"),
        TopConcept::Materials => ("a type of material used for casting", "material"),
        TopConcept::CastingEquipment => ("a piece of equipment used for casting", "equipment"),
        TopConcept::CastingParameter => ("a parameter that controls casting", "parameter"),
        TopConcept::ProductProperty => ("a property of a cast product", "property"),
        TopConcept::CastingDefect => ("a defect of a cast product", "defect"),
    }
}

/// Order in which concepts are introduced in the term instruction.
const PROMPT_ORDER: [TopConcept; 6] = [
    TopConcept::CastingProcess,
    TopConcept::Materials,
    TopConcept::CastingEquipment,
    TopConcept::CastingParameter,
    TopConcept::ProductProperty,
    TopConcept::CastingDefect,
];

/// System prompt for term labeling. The k-shot variant ends with the
/// examples introduction; the fine-tuned variant omits it.
pub fn terms_system(m: &MarkerMap, with_examples: bool) -> String {
    let mut s = String::from("You are an expert in casting and term extraction. Given a context, ");
    for (i, c) in PROMPT_ORDER.iter().enumerate() {
        let (what, noun) = concept_phrases(*c);
        let lead = if i == 0 { "if" } else { " If" };
        s.push_str(&format!(
            "{lead} the context explicitly mentions {what}, use {} and {} label the {noun}.",
            m.open(),
            m.close(*c)
        ));
    }
    s.push_str(
        " Only add labels around terms that are mentioned in the context as related to casting.",
    );
    if with_examples {
        s.push(' ');
        s.push_str(EXAMPLES_INTRO);
    }
    s
}

pub fn relations_system(with_examples: bool) -> String {
    let mut s = String::from(
        "You are an expert in casting and relation extraction. Please extract relations between the listed terms from the context as triples. Do not use any term that is not listed before the context.",
    );
    if with_examples {
        s.push(' ');
        s.push_str(EXAMPLES_INTRO);
    }
    s
}

pub fn terms_input(text: &str) -> String {
    format!("Input: {text}")
}

/// `Terms: a, b\nContext: text`.
pub fn relations_input(terms: &[String], text: &str) -> String {
    format!("Terms: {}\nContext: {text}", terms.join(", "))
}

/// Text embedded for relation demonstrations and probes.
pub fn relations_repr(terms: &[String], text: &str) -> String {
    format!("Terms: {}\n{text}", terms.join(", "))
}

pub fn terms_user(demos: &[Demonstration], text: &str) -> String {
    let mut s = String::new();
    for d in demos {
        s.push_str(&format!(
            "{}\nOutput: {}\n\n",
            d.prompt_input, d.prompt_output
        ));
    }
    s.push_str(&format!("{}\nOutput:", terms_input(text)));
    s
}

pub fn relations_user(demos: &[Demonstration], terms: &[String], text: &str) -> String {
    let mut s = String::new();
    for d in demos {
        s.push_str(&format!(
            "{}\nTriples: {}\n\n",
            d.prompt_input, d.prompt_output
        ));
    }
    s.push_str(&format!("{}\nTriples:", relations_input(terms, text)));
    s
}

/// Shipped zero-shot prompt profiles.
pub const ZERO_SHOT_PROFILES: [&str; 2] = ["cot", "direct"];

const ZERO_SHOT_SCHEMA: &str = r#"Reply with one JSON object and nothing else:
{"terms": [{"name": "<term as written in the text>", "concept": "<one of the concept labels>"}],
 "relations": [{"subject": "<term>", "object": "<term>", "relation": "<verb or phrase from the text>"}]}"#;

fn concept_catalogue() -> String {
    TopConcept::ALL
        .iter()
        .map(|c| format!("- {}: {}", c.label(), concept_phrases(*c).0))
        .collect::<Vec<_>>()
        .join("\n")
}

/// System prompt for a zero-shot profile, or `None` for an unknown name.
pub fn zero_shot_system(profile: &str) -> Option<String> {
    let base = format!(
        "You are an expert in casting and ontology construction. Every domain term belongs to exactly one of these concepts:\n{}\n",
        concept_catalogue()
    );
    let body = match profile {
        "cot" => "Work step by step. Step 1: read the context and list every casting-related term it explicitly mentions. \
                  Step 2: assign each term one concept label. \
                  Step 3: for terms that are related in the context, write triples where the subject is the term that appears first. \
                  Step 4: mark terms with the same meaning with the relation \"synonym of\". \
                  Keep your reasoning internal and output only the final JSON.",
        "direct" => "Extract the casting-related terms the context explicitly mentions, label each with one concept, \
                     and list the relations between them with the earlier term as subject.",
        _ => return None,
    };
    Some(format!("{base}{body}\n{ZERO_SHOT_SCHEMA}"))
}

/// User prompt for zero-shot extraction. Relation runs list the allowed terms.
pub fn zero_shot_user(text: &str, terms: Option<&[String]>) -> String {
    match terms {
        Some(t) => format!(
            "{}\nOnly use the listed terms in relations.",
            relations_input(t, text)
        ),
        None => format!("Context: {text}"),
    }
}
