use std::collections::VecDeque;

use parking_lot::Mutex;

use super::{CompletionBackend, CompletionRequest};
use crate::error::{Error, Result};

enum Step {
    Generations(Vec<String>),
    Outage(String),
}

/// Replays a fixed queue of generations, one entry per request, and records
/// every request it receives. An exhausted script behaves like an outage.
#[derive(Default)]
pub struct ScriptedBackend {
    script: Mutex<VecDeque<Step>>,
    requests: Mutex<Vec<CompletionRequest>>,
}

impl ScriptedBackend {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push<I, S>(&self, generations: I) -> &Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.script
            .lock()
            .push_back(Step::Generations(generations.into_iter().map(Into::into).collect()));
        self
    }

    /// Queues emotion generations described as `(label, count)` runs.
    pub fn push_emotions(&self, runs: &[(&str, usize)]) -> &Self {
        self.push(
            runs.iter()
                .flat_map(|(label, n)| std::iter::repeat_n(label.to_string(), *n)),
        )
    }

    pub fn push_outage(&self, reason: impl Into<String>) -> &Self {
        self.script.lock().push_back(Step::Outage(reason.into()));
        self
    }

    pub fn remaining(&self) -> usize {
        self.script.lock().len()
    }

    pub fn requests(&self) -> Vec<CompletionRequest> {
        self.requests.lock().clone()
    }
}

impl CompletionBackend for ScriptedBackend {
    fn complete(&self, request: &CompletionRequest) -> Result<Vec<String>> {
        self.requests.lock().push(request.clone());
        match self.script.lock().pop_front() {
            Some(Step::Generations(g)) => Ok(g),
            Some(Step::Outage(reason)) => Err(Error::BackendUnavailable { attempts: 1, reason }),
            None => Err(Error::BackendUnavailable {
                attempts: 1,
                reason: "script exhausted".into(),
            }),
        }
    }
}
