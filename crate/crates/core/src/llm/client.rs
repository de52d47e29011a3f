use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use super::{ChatBackend, ChatRequest, ChatResponse, LlmError, ResponseCache, RetryPolicy};

/// A backend wrapped with caching (temperature 0 only) and retries.
pub struct LlmClient {
    backend: Arc<dyn ChatBackend>,
    cache: Option<Arc<ResponseCache>>,
    retry: RetryPolicy,
    backend_calls: AtomicUsize,
}

impl LlmClient {
    pub fn new(backend: Arc<dyn ChatBackend>) -> Self {
        LlmClient {
            backend,
            cache: Some(Arc::new(ResponseCache::in_memory())),
            retry: RetryPolicy::default(),
            backend_calls: AtomicUsize::new(0),
        }
    }

    pub fn with_cache(mut self, cache: Option<Arc<ResponseCache>>) -> Self {
        self.cache = cache;
        self
    }

    pub fn with_retry(mut self, retry: RetryPolicy) -> Self {
        self.retry = retry;
        self
    }

    pub fn retry_policy(&self) -> &RetryPolicy {
        &self.retry
    }

    /// Requests sent to the backend so far, retries included.
    pub fn backend_calls(&self) -> usize {
        self.backend_calls.load(Ordering::Relaxed)
    }

    pub fn chat(&self, request: &ChatRequest) -> Result<ChatResponse, LlmError> {
        request.validate()?;
        let cacheable = request.is_deterministic();
        let key = cacheable.then(|| request.cache_key());

        if let (Some(cache), Some(key)) = (&self.cache, &key) {
            if let Some(mut hit) = cache.get(key) {
                hit.from_cache = true;
                return Ok(hit);
            }
        }

        let response = self.with_retries(request)?;

        if let (Some(cache), Some(key)) = (&self.cache, &key) {
            if let Err(e) = cache.put(key, &response) {
                log::warn!("{e}");
            }
        }
        Ok(response)
    }

    fn with_retries(&self, request: &ChatRequest) -> Result<ChatResponse, LlmError> {
        let max = self.retry.max_attempts.max(1);
        let mut attempt = 1;
        loop {
            self.backend_calls.fetch_add(1, Ordering::Relaxed);
            match self.backend.complete(request) {
                Ok(mut resp) => {
                    if resp.content.trim().is_empty() && resp.finish_reason == "stop" {
                        return Err(LlmError::MalformedResponse("empty completion".into()));
                    }
                    resp.from_cache = false;
                    return Ok(resp);
                }
                Err(e) if e.is_retryable() && attempt < max => {
                    let hint = match &e {
                        LlmError::RateLimited { retry_after } => *retry_after,
                        _ => None,
                    };
                    let delay = self.retry.delay_after(attempt, hint);
                    log::debug!("attempt {attempt}/{max} failed ({e}); retrying in {delay:?}");
                    if !delay.is_zero() {
                        std::thread::sleep(delay);
                    }
                    attempt += 1;
                }
                Err(e) => return Err(e),
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::llm::{ChatMessage, MockBackend};

    fn prompt(text: &str) -> ChatRequest {
        ChatRequest::new("mock", vec![ChatMessage::user(text)])
    }

    fn client(mock: &Arc<MockBackend>, attempts: u32) -> LlmClient {
        LlmClient::new(mock.clone()).with_retry(RetryPolicy::no_delay(attempts))
    }

    #[test]
    fn scripted_lookup() {
        let p = prompt("P");
        let mock = Arc::new(MockBackend::by_digest([(p.prompt_digest(), "R".to_string())]));
        let resp = client(&mock, 3).chat(&p).unwrap();
        assert_eq!(resp.content, "R");
        assert!(!resp.from_cache);
    }

    #[test]
    fn deterministic_requests_hit_the_cache() {
        let p = prompt("P");
        let mock = Arc::new(MockBackend::by_digest([(p.prompt_digest(), "R".to_string())]));
        let c = client(&mock, 3);
        c.chat(&p).unwrap();
        let second = c.chat(&p).unwrap();
        assert!(second.from_cache);
        assert_eq!(second.content, "R");
        assert_eq!(mock.calls(), 1);
    }

    #[test]
    fn sampled_requests_bypass_the_cache() {
        let p = prompt("P").with_temperature(1.0);
        let mock = Arc::new(MockBackend::by_digest([(p.prompt_digest(), "R".to_string())]));
        let c = client(&mock, 3);
        c.chat(&p).unwrap();
        let second = c.chat(&p).unwrap();
        assert!(!second.from_cache);
        assert_eq!(mock.calls(), 2);
        // and they never populate it for the deterministic twin either
        let det = prompt("P");
        assert!(!c.chat(&det).unwrap().from_cache);
    }

    #[test]
    fn retries_until_success() {
        let p = prompt("P");
        let mock = Arc::new(MockBackend::by_digest([(p.prompt_digest(), "R".to_string())]));
        mock.fail_next(2, LlmError::RateLimited { retry_after: None });
        let resp = client(&mock, 3).chat(&p).unwrap();
        assert_eq!(resp.content, "R");
        assert_eq!(mock.calls(), 3);
    }

    #[test]
    fn gives_up_after_max_attempts() {
        let p = prompt("P");
        let mock = Arc::new(MockBackend::by_digest([(p.prompt_digest(), "R".to_string())]));
        mock.fail_next(4, LlmError::RateLimited { retry_after: None });
        let err = client(&mock, 3).chat(&p).unwrap_err();
        assert!(matches!(err, LlmError::RateLimited { .. }));
        assert_eq!(mock.calls(), 3);
    }

    #[test]
    fn non_retryable_errors_fail_fast() {
        let p = prompt("P");
        let mock = Arc::new(MockBackend::by_digest([(p.prompt_digest(), "R".to_string())]));
        mock.fail_next(1, LlmError::AuthFailure("bad key".into()));
        assert!(matches!(client(&mock, 3).chat(&p), Err(LlmError::AuthFailure(_))));
        assert_eq!(mock.calls(), 1);
    }

    #[test]
    fn unscripted_prompt_is_a_mock_miss() {
        let mock = Arc::new(MockBackend::by_digest(Vec::<(String, String)>::new()));
        assert!(matches!(
            client(&mock, 3).chat(&prompt("?")),
            Err(LlmError::MockMiss { .. })
        ));
    }
}
