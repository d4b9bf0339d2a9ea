//! Participant-weighted thematic word clouds from interview transcripts.
//!
//! The pipeline runs in three stages. A language model proposes a short
//! vocabulary of concept phrases per condition ([`concepts`]); every
//! transcript is then judged against that fixed vocabulary ([`mapping`]);
//! finally each concept is sized by how many participants mentioned it
//! ([`salience`], [`layout`]). The assignment table produced by the mapping
//! stage is the audit trail: every cloud can be rebuilt from it, and analysts
//! can correct individual judgments.
//!
//! [`baseline`] provides the conventional token-frequency cloud for
//! comparison, and [`llm`] the model gateway with live, fixture-replay and
//! mock backends.

pub mod baseline;
pub mod concepts;
pub mod corpus;
pub mod layout;
pub mod llm;
pub mod mapping;
pub mod salience;
pub mod synth;
pub mod util;

pub use concepts::{normalize_phrase, ConceptPhrase, ConceptVocabulary};
pub use corpus::{load_corpus, Corpus, CorpusFormat, Transcript};
pub use mapping::{AssignmentCell, AssignmentTable, MappingMode};
pub use salience::{
    compute_breadth, diff_breadth, scale_weights, BreadthCounts, DiffResult, ScaleMode,
};
