use std::time::Duration;

use reqwest::blocking::{Client, Response};
use reqwest::header::RETRY_AFTER;
use reqwest::StatusCode;
use serde::{Deserialize, Serialize};

use super::{ChatBackend, ChatMessage, ChatRequest, ChatResponse, LlmError, Usage};

pub const BASE_URL_ENV: &str = "CMO_LLM_BASE_URL";
pub const API_KEY_ENV: &str = "CMO_LLM_API_KEY";
pub const MODEL_ENV: &str = "CMO_LLM_MODEL";

/// Client for the chat-completions JSON interface
/// (`POST <base>/chat/completions`, bearer auth).
pub struct HttpBackend {
    base_url: String,
    api_key: Option<String>,
    client: Client,
}

#[derive(Serialize)]
struct WireRequest<'a> {
    model: &'a str,
    messages: &'a [ChatMessage],
    temperature: f64,
    max_tokens: u32,
}

#[derive(Deserialize)]
struct WireResponse {
    choices: Vec<WireChoice>,
    #[serde(default)]
    usage: Option<Usage>,
}

#[derive(Deserialize)]
struct WireChoice {
    message: WireMessage,
    #[serde(default)]
    finish_reason: Option<String>,
}

#[derive(Deserialize)]
struct WireMessage {
    #[serde(default)]
    content: Option<String>,
}

impl HttpBackend {
    pub fn new(base_url: impl Into<String>, api_key: Option<String>, timeout: Duration) -> Result<Self, LlmError> {
        let client = Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| LlmError::Transport(e.to_string()))?;
        Ok(HttpBackend {
            base_url: base_url.into().trim_end_matches('/').to_string(),
            api_key,
            client,
        })
    }

    pub fn base_url(&self) -> &str {
        &self.base_url
    }

    pub(crate) fn post_json<T: Serialize>(&self, path: &str, body: &T) -> Result<Response, LlmError> {
        let mut req = self.client.post(format!("{}/{}", self.base_url, path)).json(body);
        if let Some(key) = &self.api_key {
            req = req.bearer_auth(key);
        }
        let resp = req.send().map_err(map_transport)?;
        check_status(resp)
    }
}

pub(crate) fn map_transport(e: reqwest::Error) -> LlmError {
    if e.is_timeout() {
        LlmError::Timeout
    } else {
        LlmError::Transport(e.to_string())
    }
}

pub(crate) fn check_status(resp: Response) -> Result<Response, LlmError> {
    let status = resp.status();
    if status.is_success() {
        return Ok(resp);
    }
    let retry_after = resp
        .headers()
        .get(RETRY_AFTER)
        .and_then(|v| v.to_str().ok())
        .and_then(|v| v.trim().parse::<u64>().ok())
        .map(Duration::from_secs);
    let body = resp.text().unwrap_or_default();
    Err(match status {
        StatusCode::UNAUTHORIZED | StatusCode::FORBIDDEN => LlmError::AuthFailure(body),
        StatusCode::TOO_MANY_REQUESTS => LlmError::RateLimited { retry_after },
        StatusCode::REQUEST_TIMEOUT | StatusCode::GATEWAY_TIMEOUT => LlmError::Timeout,
        s => LlmError::Server {
            status: s.as_u16(),
            body,
        },
    })
}

impl ChatBackend for HttpBackend {
    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, LlmError> {
        let wire = WireRequest {
            model: &request.model_id,
            messages: &request.messages,
            temperature: request.temperature,
            max_tokens: request.max_tokens,
        };
        let resp = self.post_json("chat/completions", &wire)?;
        let parsed: WireResponse = resp.json().map_err(|e| LlmError::MalformedResponse(e.to_string()))?;
        let choice = parsed
            .choices
            .into_iter()
            .next()
            .ok_or_else(|| LlmError::MalformedResponse("no choices".into()))?;
        let finish_reason = choice.finish_reason.unwrap_or_else(|| "stop".into());
        let content = match choice.message.content {
            Some(c) => c,
            None => {
                return Err(LlmError::MalformedResponse(format!(
                    "missing content (finish_reason={finish_reason})"
                )))
            }
        };
        Ok(ChatResponse {
            content,
            finish_reason,
            usage: parsed.usage.unwrap_or_default(),
            from_cache: false,
        })
    }
}

#[cfg(test)]
pub(crate) mod test_server {
    use std::io::{BufRead, BufReader, Read, Write};
    use std::net::TcpListener;
    use std::sync::{Arc, Mutex};
    use std::thread;

    /// Serves the canned `(status line, headers, body)` responses in order and
    /// records each request body.
    pub fn serve(responses: Vec<(u16, Vec<(&'static str, String)>, String)>) -> (String, Arc<Mutex<Vec<String>>>) {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let addr = listener.local_addr().unwrap();
        let seen = Arc::new(Mutex::new(Vec::new()));
        let seen2 = seen.clone();
        thread::spawn(move || {
            for (status, headers, body) in responses {
                let Ok((mut stream, _)) = listener.accept() else { return };
                let mut reader = BufReader::new(stream.try_clone().unwrap());
                let mut len = 0usize;
                let mut auth = String::new();
                loop {
                    let mut line = String::new();
                    reader.read_line(&mut line).unwrap();
                    let l = line.trim_end();
                    if l.is_empty() {
                        break;
                    }
                    let lower = l.to_ascii_lowercase();
                    if let Some(v) = lower.strip_prefix("content-length:") {
                        len = v.trim().parse().unwrap();
                    }
                    if lower.starts_with("authorization:") {
                        auth = l.to_string();
                    }
                }
                let mut buf = vec![0; len];
                reader.read_exact(&mut buf).unwrap();
                seen2
                    .lock()
                    .unwrap()
                    .push(format!("{auth}\n{}", String::from_utf8_lossy(&buf)));
                let mut out = format!(
                    "HTTP/1.1 {status} X\r\ncontent-type: application/json\r\ncontent-length: {}\r\nconnection: close\r\n",
                    body.len()
                );
                for (k, v) in headers {
                    out.push_str(&format!("{k}: {v}\r\n"));
                }
                out.push_str("\r\n");
                out.push_str(&body);
                stream.write_all(out.as_bytes()).unwrap();
            }
        });
        (format!("http://{addr}"), seen)
    }
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::llm::{LlmClient, RetryPolicy};

    const OK_BODY: &str = r#"{"choices":[{"message":{"role":"assistant","content":"fix: x"},"finish_reason":"stop"}],"usage":{"prompt_tokens":3,"completion_tokens":2,"total_tokens":5}}"#;

    fn request() -> ChatRequest {
        ChatRequest::new("gpt-test", vec![ChatMessage::user("hello")])
    }

    #[test]
    fn posts_chat_completion_with_bearer_auth() {
        let (url, seen) = test_server::serve(vec![(200, vec![], OK_BODY.into())]);
        let backend = HttpBackend::new(url, Some("sk-1".into()), Duration::from_secs(5)).unwrap();
        let resp = backend.complete(&request()).unwrap();
        assert_eq!(resp.content, "fix: x");
        assert_eq!(resp.usage.total_tokens, 5);
        let seen = seen.lock().unwrap();
        assert!(seen[0].contains("Bearer sk-1"));
        assert!(seen[0].contains(r#""model":"gpt-test""#));
        assert!(seen[0].contains(r#""max_tokens":1024"#));
    }

    #[test]
    fn status_mapping() {
        let (url, _) = test_server::serve(vec![
            (401, vec![], "{}".into()),
            (429, vec![("retry-after", "7".into())], "{}".into()),
            (503, vec![], "down".into()),
            (200, vec![], r#"{"choices":[]}"#.into()),
        ]);
        let backend = HttpBackend::new(url, None, Duration::from_secs(5)).unwrap();
        assert!(matches!(backend.complete(&request()), Err(LlmError::AuthFailure(_))));
        match backend.complete(&request()) {
            Err(LlmError::RateLimited { retry_after }) => {
                assert_eq!(retry_after, Some(Duration::from_secs(7)))
            }
            other => panic!("{other:?}"),
        }
        assert!(matches!(
            backend.complete(&request()),
            Err(LlmError::Server { status: 503, .. })
        ));
        assert!(matches!(
            backend.complete(&request()),
            Err(LlmError::MalformedResponse(_))
        ));
    }

    #[test]
    fn client_retries_rate_limits_over_http() {
        let (url, seen) = test_server::serve(vec![
            (429, vec![], "{}".into()),
            (500, vec![], "oops".into()),
            (200, vec![], OK_BODY.into()),
        ]);
        let backend = HttpBackend::new(url, None, Duration::from_secs(5)).unwrap();
        let client = LlmClient::new(Arc::new(backend)).with_retry(RetryPolicy::no_delay(3));
        assert_eq!(client.chat(&request()).unwrap().content, "fix: x");
        assert_eq!(seen.lock().unwrap().len(), 3);
    }
}
