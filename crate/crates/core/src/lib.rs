//! Generative agents of individual people.
//!
//! The crate covers the whole offline pipeline: interview transcripts and
//! response sets ([`corpus`]), a pluggable chat backend ([`llm`]), the
//! semi-structured interviewer ([`interviewer`]), agent construction and
//! prompting ([`agent`]), instruments and scoring ([`battery`]), fidelity
//! metrics ([`metrics`]), hypothesis tests ([`stats`]) and study orchestration
//! ([`runner`]).

// `!(x >= 0.0)` style checks are meant to reject NaN too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod agent;
pub mod battery;
pub mod corpus;
pub mod interviewer;
pub mod llm;
pub mod metrics;
pub mod runner;
pub mod stats;
