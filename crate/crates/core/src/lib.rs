//! Pharmacovigilance event extraction with chat LLMs: prompt construction,
//! demonstration retrieval, structured-output parsing, data synthesis,
//! confidence filtering and hierarchical-argument evaluation.

pub mod corpus;
pub mod filtering;
pub mod llm;
pub mod metrics;
pub mod prompting;
pub mod retrieval;
pub mod schema;
pub mod synthesis;
pub mod text;
