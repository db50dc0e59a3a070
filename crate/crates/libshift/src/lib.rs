//! Toolkit for synthesizing reusable library-migration scripts.
//!
//! The pipeline has two halves. The distillation half samples a chat model
//! for use cases, implementations, tests, and migrations, then validates the
//! lot in a sandboxed test runner to produce migration triples. The synthesis
//! half diffs each triple, anti-unifies the hunks into atomic rewrite rules,
//! and drives an agent loop that composes those rules into a scoped rule
//! graph executed by the built-in structural rewrite engine.

pub mod agent;
pub mod chat;
pub mod cli;
pub mod config;
pub mod distill;
pub mod inference;
pub mod pattern;
pub mod rulegraph;
pub mod sandbox;
pub mod tokentree;

pub use pattern::{Binding, Match, Pattern};
pub use rulegraph::{ExecutionLimits, RuleGraph};
pub use sandbox::{SandboxConfig, TestReport};
pub use tokentree::{LanguageProfile, ScopeLabel, Span};
