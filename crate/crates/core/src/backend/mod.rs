//! Completion backends and prompt assembly.
//!
//! Every model call goes through [`CompletionBackend::complete`] with a
//! [`PromptBundle`]. Three implementations ship: a remote HTTP endpoint, a
//! deterministic scripted backend driven by the task oracle, and transcript
//! record/replay wrappers.

mod http;
pub mod prompt;
mod scripted;
mod transcript;

pub use http::{HttpBackend, HttpConfig};
pub use prompt::{PromptBundle, PromptKind, DEFAULT_CONTEXT_BUDGET};
pub use scripted::{perturb, Fault, ScriptedBackend};
pub use transcript::{read_transcript, write_transcript, RecordingBackend, ReplayBackend, TranscriptEntry};

#[derive(Debug, thiserror::Error)]
pub enum BackendError {
    #[error("transport error: {0}")]
    Transport(String),
    #[error("replay mismatch at call {index}{}: {detail}", position.map(|p| format!(", char {p}")).unwrap_or_default())]
    ReplayMismatch { index: usize, position: Option<usize>, detail: String },
    #[error("backend misconfigured: {0}")]
    Config(String),
    #[error("transcript: {0}")]
    Io(#[from] std::io::Error),
}

pub trait CompletionBackend: Send {
    fn complete(&mut self, prompt: &PromptBundle) -> Result<String, BackendError>;

    /// Called before each trial (1-based) of an episode.
    fn begin_trial(&mut self, _trial: usize) {}

    fn identity(&self) -> String;
}

impl<B: CompletionBackend + ?Sized> CompletionBackend for Box<B> {
    fn complete(&mut self, prompt: &PromptBundle) -> Result<String, BackendError> {
        (**self).complete(prompt)
    }

    fn begin_trial(&mut self, trial: usize) {
        (**self).begin_trial(trial)
    }

    fn identity(&self) -> String {
        (**self).identity()
    }
}

/// Replies with canned text in order, then with empty strings. Handy in tests.
#[derive(Debug, Clone, Default)]
pub struct FixedBackend {
    replies: std::collections::VecDeque<String>,
    pub prompts: Vec<PromptBundle>,
}

impl FixedBackend {
    pub fn new<I: IntoIterator<Item = S>, S: Into<String>>(replies: I) -> Self {
        FixedBackend { replies: replies.into_iter().map(Into::into).collect(), prompts: Vec::new() }
    }
}

impl CompletionBackend for FixedBackend {
    fn complete(&mut self, prompt: &PromptBundle) -> Result<String, BackendError> {
        self.prompts.push(prompt.clone());
        Ok(self.replies.pop_front().unwrap_or_default())
    }

    fn identity(&self) -> String {
        "fixed".to_string()
    }
}
