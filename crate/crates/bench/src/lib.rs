//! Seeded synthetic inputs for the benchmarks.

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use ontoforge::{AnnotatedText, Document, TermSpan, TopConcept, Triple};

const WORDS: [&str; 16] = [
    "molten",
    "alloy",
    "die",
    "casting",
    "mold",
    "pressure",
    "porosity",
    "ladle",
    "pour",
    "rate",
    "sand",
    "core",
    "shrinkage",
    "furnace",
    "temperature",
    "strength",
];

pub fn rng() -> StdRng {
    StdRng::seed_from_u64(7)
}

pub fn prose(rng: &mut StdRng, words: usize) -> String {
    let mut out = String::new();
    for i in 0..words {
        if i > 0 {
            out.push_str(if i % 97 == 0 {
                "\n\n"
            } else if i % 13 == 0 {
                ". "
            } else {
                " "
            });
        }
        out.push_str(WORDS[rng.random_range(0..WORDS.len())]);
    }
    out
}

/// Prose with every fifth word labeled.
pub fn annotated(rng: &mut StdRng, words: usize) -> AnnotatedText {
    let mut text = String::new();
    let mut spans = Vec::new();
    for i in 0..words {
        if i > 0 {
            text.push(' ');
        }
        let start = text.chars().count();
        text.push_str(WORDS[rng.random_range(0..WORDS.len())]);
        if i % 5 == 0 {
            let c = TopConcept::ALL[rng.random_range(0..6)];
            spans.push(
                TermSpan::from_text(&text, start, text.chars().count(), c).expect("span in range"),
            );
        }
    }
    AnnotatedText::new(Document::new("bench", text), spans)
}

/// Triples over `terms` names, a quarter of them synonym links.
pub fn triples(rng: &mut StdRng, n: usize, terms: usize) -> Vec<Triple> {
    (0..n)
        .map(|i| {
            let a = rng.random_range(0..terms);
            let b = rng.random_range(0..terms);
            let rel = if i % 4 == 0 { "synonym of" } else { "uses" };
            Triple::new(format!("term {a}"), format!("term {b}"), rel)
        })
        .collect()
}

pub fn vectors(rng: &mut StdRng, n: usize, dim: usize) -> Vec<Vec<f64>> {
    (0..n)
        .map(|_| (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect())
        .collect()
}
