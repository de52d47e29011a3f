use std::collections::{HashMap, VecDeque};
use std::fs;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::Deserialize;

use super::{ChatBackend, ChatRequest, ChatResponse, LlmError};

type Responder = Box<dyn Fn(&ChatRequest) -> Option<String> + Send + Sync>;

/// How a [`MockBackend`] answers.
pub enum MockScript {
    /// Prompt digest (see [`ChatRequest::prompt_digest`]) to response text.
    ByDigest(HashMap<String, String>),
    /// Responses handed out in order, one per call.
    Sequence(Mutex<VecDeque<String>>),
    /// Computed responses; `None` is a miss.
    Responder(Responder),
}

/// Deterministic test backend. Records every request it receives and never
/// invents an answer: unscripted prompts fail with [`LlmError::MockMiss`].
pub struct MockBackend {
    script: MockScript,
    failures: Mutex<VecDeque<LlmError>>,
    transcript: Mutex<Vec<ChatRequest>>,
    calls: AtomicUsize,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum ScriptFile {
    Map(HashMap<String, String>),
    List(Vec<String>),
    Constant(String),
}

impl MockBackend {
    pub fn new(script: MockScript) -> Self {
        MockBackend {
            script,
            failures: Mutex::default(),
            transcript: Mutex::default(),
            calls: AtomicUsize::new(0),
        }
    }

    pub fn by_digest<I, K, V>(entries: I) -> Self
    where
        I: IntoIterator<Item = (K, V)>,
        K: Into<String>,
        V: Into<String>,
    {
        Self::new(MockScript::ByDigest(
            entries.into_iter().map(|(k, v)| (k.into(), v.into())).collect(),
        ))
    }

    pub fn sequence<I, V>(responses: I) -> Self
    where
        I: IntoIterator<Item = V>,
        V: Into<String>,
    {
        Self::new(MockScript::Sequence(Mutex::new(
            responses.into_iter().map(Into::into).collect(),
        )))
    }

    pub fn responder(f: impl Fn(&ChatRequest) -> Option<String> + Send + Sync + 'static) -> Self {
        Self::new(MockScript::Responder(Box::new(f)))
    }

    /// Loads a script file: a JSON object maps prompt digests to responses, a
    /// JSON array is an ordered response list and a JSON string answers every
    /// prompt.
    pub fn from_file(path: &Path) -> Result<Self, LlmError> {
        let text = fs::read_to_string(path)
            .map_err(|e| LlmError::Unavailable(format!("mock script {}: {e}", path.display())))?;
        let parsed: ScriptFile = serde_json::from_str(&text)
            .map_err(|e| LlmError::Unavailable(format!("mock script {}: {e}", path.display())))?;
        Ok(match parsed {
            ScriptFile::Map(map) => Self::new(MockScript::ByDigest(map)),
            ScriptFile::List(list) => Self::sequence(list),
            ScriptFile::Constant(text) => Self::responder(move |_| Some(text.clone())),
        })
    }

    /// The next `n` calls fail with `error` before the script is consulted.
    pub fn fail_next(&self, n: usize, error: LlmError) {
        let mut f = self.failures.lock().unwrap();
        for _ in 0..n {
            f.push_back(error.clone());
        }
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::Relaxed)
    }

    pub fn transcript(&self) -> Vec<ChatRequest> {
        self.transcript.lock().unwrap().clone()
    }
}

impl ChatBackend for MockBackend {
    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, LlmError> {
        self.calls.fetch_add(1, Ordering::Relaxed);
        self.transcript.lock().unwrap().push(request.clone());
        if let Some(err) = self.failures.lock().unwrap().pop_front() {
            return Err(err);
        }
        let answer = match &self.script {
            MockScript::ByDigest(map) => map.get(&request.prompt_digest()).cloned(),
            MockScript::Sequence(queue) => queue.lock().unwrap().pop_front(),
            MockScript::Responder(f) => f(request),
        };
        answer.map(ChatResponse::text).ok_or_else(|| LlmError::MockMiss {
            digest: request.prompt_digest(),
        })
    }
}
