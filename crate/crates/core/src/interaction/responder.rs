use std::sync::mpsc::{channel, Receiver, RecvTimeoutError, Sender};
use std::sync::Mutex;
use std::time::Duration;

use thiserror::Error;

use crate::dataset::Instance;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ResponderError {
    #[error("instance `{0}` has no annotated answer")]
    NoAnnotatedAnswer(String),
    #[error("the answering side has gone away")]
    Closed,
    #[error("no answer within {0:?}")]
    TimedOut(Duration),
}

/// The human side of the loop.
pub trait HumanResponder: Send + Sync {
    /// Answer to `query`, asked on `inst`.
    fn respond(&self, inst: &Instance, query: &str) -> Result<String, ResponderError>;
}

/// Returns the annotated answer whatever the query says.
#[derive(Debug, Clone, Copy, Default)]
pub struct OracleResponder;

impl HumanResponder for OracleResponder {
    fn respond(&self, inst: &Instance, _query: &str) -> Result<String, ResponderError> {
        inst.answer.clone().filter(|a| !a.trim().is_empty()).ok_or_else(|| ResponderError::NoAnnotatedAnswer(inst.id.clone()))
    }
}

/// A question waiting for a person.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PendingQuery {
    pub instance_id: String,
    pub query: String,
}

/// Blocks the calling session until [`AnswerDesk::answer`] is called.
pub struct InteractiveResponder {
    queries: Mutex<Sender<PendingQuery>>,
    answers: Mutex<Receiver<String>>,
    timeout: Option<Duration>,
}

/// The other end of an [`InteractiveResponder`].
pub struct AnswerDesk {
    queries: Receiver<PendingQuery>,
    answers: Sender<String>,
}

impl InteractiveResponder {
    pub fn new(timeout: Option<Duration>) -> (InteractiveResponder, AnswerDesk) {
        let (query_tx, query_rx) = channel();
        let (answer_tx, answer_rx) = channel();
        (
            InteractiveResponder { queries: Mutex::new(query_tx), answers: Mutex::new(answer_rx), timeout },
            AnswerDesk { queries: query_rx, answers: answer_tx },
        )
    }
}

impl HumanResponder for InteractiveResponder {
    fn respond(&self, inst: &Instance, query: &str) -> Result<String, ResponderError> {
        // Holding the answer lock across the send keeps question/answer pairs
        // from crossing between sessions that share one responder.
        let answers = self.answers.lock().map_err(|_| ResponderError::Closed)?;
        self.queries
            .lock()
            .map_err(|_| ResponderError::Closed)?
            .send(PendingQuery { instance_id: inst.id.clone(), query: query.to_string() })
            .map_err(|_| ResponderError::Closed)?;
        match self.timeout {
            None => answers.recv().map_err(|_| ResponderError::Closed),
            Some(limit) => answers.recv_timeout(limit).map_err(|e| match e {
                RecvTimeoutError::Timeout => ResponderError::TimedOut(limit),
                RecvTimeoutError::Disconnected => ResponderError::Closed,
            }),
        }
    }
}

impl AnswerDesk {
    /// Waits for the next question.
    pub fn next_query(&self) -> Option<PendingQuery> {
        self.queries.recv().ok()
    }

    pub fn answer(&self, text: impl Into<String>) -> Result<(), ResponderError> {
        self.answers.send(text.into()).map_err(|_| ResponderError::Closed)
    }
}
