//! Ontology learning from domain text with LLM-based extraction.
//!
//! The crate covers the whole pipeline: corpus files and annotation grammars,
//! an LLM gateway with a scripted mock provider, retrieval-backed
//! distillation, three extraction strategies, evaluation against gold, graph
//! building with Cypher/GraphML export, and the expert review log.

pub mod clock;
pub mod config;
pub mod corpus;
pub mod distill;
pub mod evaluate;
pub mod extract;
pub mod llm;
pub mod markup;
pub mod ontology;
pub mod review;
pub mod text;

pub use corpus::{
    load_dataset, write_dataset, AnnotatedText, Dataset, Document, Provenance, SynonymPair,
    TermSpan, TopConcept, Triple,
};
pub use markup::{
    align_labeled_output, parse_markup, parse_triples, render_markup, render_triples,
    AlignmentReport, MarkerMap,
};
