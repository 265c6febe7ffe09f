//! Audit kernel for measuring cultural inclusivity of LLM-generated
//! metaphors.
//!
//! The toolkit covers the full offline protocol:
//!
//! * [`corpus`] — audit grid definition, prompt rendering, generation and
//!   embedding against pluggable providers, JSON-lines persistence.
//! * [`geometry`] — cosine distances, distance matrices and centroids.
//! * [`diversity`] — intra-cultural semantic diversity grid (heatmap data).
//! * [`projection`] — from-scratch exact t-SNE, one 2D layout per culture.
//! * [`randtest`] — one-sided Fisher randomization test for cultural
//!   defaultism, with directional significance table.
//! * [`report`] — pipeline orchestration and deterministic CSV/SVG/Markdown
//!   emitters.
//! * [`fixtures`] — deterministic synthetic corpora with plantable effects,
//!   used by the offline test suite and the demos.

pub mod config;
pub mod corpus;
pub mod diversity;
pub mod error;
pub mod fixtures;
pub mod geometry;
pub mod projection;
pub mod randtest;
pub mod report;
pub mod rng;

pub use config::AuditConfig;
pub use error::{AuditError, Result};
