//! Chat-completions access with caching and retry, tolerant output
//! parsing, and extraction runs over a dataset.

mod client;
mod parse;
mod run;

use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::prompting::PromptError;
use crate::retrieval::RetrievalError;

pub use client::{
    CacheMode, ChatClient, ChatResponse, HttpTransport, ResponseCache, RetryPolicy, Transport,
    TransportError, Usage,
};
pub use parse::{
    extract_json, is_null_answer, parse_events_output, parse_stage1_output, parse_stage2_answer,
    parse_synthesis_output, ParsedOutput, Unparseable,
};
pub use run::{
    read_predictions, run_extraction, write_predictions, ExtractStats, ExtractionConfig,
    ExtractionRun, InstanceStats, PredictionRecord,
};

#[derive(Debug, Error)]
pub enum LlmError {
    #[error("request failed after {attempts} attempt(s): {message}")]
    Network { attempts: u32, message: String },
    #[error("authentication rejected: {0}")]
    Auth(String),
    #[error("cache miss for {0} in cache-only mode")]
    CacheMiss(String),
    #[error("no endpoint configured")]
    NoEndpoint,
    #[error("configuration error: {0}")]
    Config(String),
    #[error("corrupt cache entry {path}: {message}")]
    CacheFormat { path: PathBuf, message: String },
    #[error("{0}")]
    Format(String),
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error(transparent)]
    Retrieval(#[from] RetrievalError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl LlmError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        LlmError::Io { path: path.to_path_buf(), source }
    }
}
