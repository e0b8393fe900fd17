//! Language-model side of the pipeline: one-shot prompt assembly, a
//! chat-completion client with digest-keyed record/replay fixtures, and
//! extraction of planning files from model output.

pub mod config;
pub mod extract;
pub mod fixture;
pub mod prompt;
pub mod request;
pub mod transport;

use thiserror::Error;

pub use config::{credential_from_env, LlmConfig, CREDENTIAL_ENV};
pub use extract::{extract_expressions, extract_item_ids, extract_listed_ids, extract_pddl};
pub use fixture::FixtureStore;
pub use prompt::{
    build_decomposition_prompt, build_domain_prompt, build_problem_prompt, build_pruning_prompt, DecompositionExample,
    DomainExample, ProblemExample, PromptError, PromptTemplate, PruningExample,
};
pub use request::{CompletionRequest, Message};
pub use transport::{
    complete, Backend, ForbiddenTransport, HttpTransport, RecordTransport, ReplayTransport, Transport,
};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LlmError {
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error("configuration: {0}")]
    Config(String),
    #[error("network: {0}")]
    Network(String),
    #[error("HTTP {status}: {body}")]
    Http { status: u16, body: String },
    #[error("malformed response: {0}")]
    MalformedResponse(String),
    #[error("no fixture recorded for digest {digest}")]
    MissingFixture { digest: String },
    #[error("malformed fixture: {0}")]
    MalformedFixture(String),
    #[error("i/o: {0}")]
    Io(String),
    #[error("no planning file found in response")]
    NoPlanningFileFound,
}
