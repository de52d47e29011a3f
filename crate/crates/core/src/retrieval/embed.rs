use std::marker::PhantomData;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{RetrievalError, UnitVector};
use crate::llm::HttpBackend;
use crate::scalar::Scalar;

/// Maps text (a diff or a commit message) to a fixed-dimension unit vector.
pub trait Embedder<S: Scalar>: Send + Sync {
    /// Stable identifier persisted in corpus headers.
    fn id(&self) -> &str;
    fn dim(&self) -> usize;
    fn embed(&self, text: &str) -> Result<UnitVector<S>, RetrievalError>;
}

/// Feature-hashing bag of words and word bigrams, L2-normalized. Fully
/// deterministic and offline; its id is `hash-<dim>`.
#[derive(Debug, Clone)]
pub struct HashEmbedder<S> {
    dim: usize,
    id: String,
    _scalar: PhantomData<fn() -> S>,
}

impl<S: Scalar> HashEmbedder<S> {
    pub fn new(dim: usize) -> Self {
        assert!(dim > 0, "embedding dimension must be positive");
        HashEmbedder {
            dim,
            id: format!("hash-{dim}"),
            _scalar: PhantomData,
        }
    }

    fn bucket(&self, feature: &str) -> usize {
        (fnv1a(feature.as_bytes()) % self.dim as u64) as usize
    }
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

pub(crate) fn word_tokens(text: &str) -> Vec<String> {
    text.split(|c: char| !(c.is_alphanumeric() || c == '_'))
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

impl<S: Scalar> Embedder<S> for HashEmbedder<S> {
    fn id(&self) -> &str {
        &self.id
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn embed(&self, text: &str) -> Result<UnitVector<S>, RetrievalError> {
        let tokens = word_tokens(text);
        let mut v = vec![S::zero(); self.dim];
        for t in &tokens {
            v[self.bucket(t)] = v[self.bucket(t)] + S::one();
        }
        for pair in tokens.windows(2) {
            let b = self.bucket(&format!("{} {}", pair[0], pair[1]));
            v[b] = v[b] + S::lit(0.5);
        }
        if tokens.is_empty() {
            v[self.bucket("\u{0}empty")] = S::one();
        }
        UnitVector::normalize(&v)
    }
}

/// Embeddings from an OpenAI-compatible `POST <base>/embeddings` endpoint.
/// Its id is `http:<model>`.
pub struct HttpEmbedder<S> {
    backend: HttpBackend,
    model: String,
    id: String,
    dim: usize,
    _scalar: PhantomData<fn() -> S>,
}

#[derive(Serialize)]
struct EmbeddingRequest<'a> {
    model: &'a str,
    input: &'a str,
}

#[derive(Deserialize)]
struct EmbeddingResponse {
    data: Vec<EmbeddingDatum>,
}

#[derive(Deserialize)]
struct EmbeddingDatum {
    embedding: Vec<f64>,
}

impl<S: Scalar> HttpEmbedder<S> {
    pub fn new(base_url: &str, api_key: Option<String>, model: &str, dim: usize) -> Result<Self, RetrievalError> {
        let backend = HttpBackend::new(base_url, api_key, Duration::from_secs(60))?;
        Ok(HttpEmbedder {
            backend,
            model: model.to_string(),
            id: format!("http:{model}"),
            dim,
            _scalar: PhantomData,
        })
    }
}

impl<S: Scalar> Embedder<S> for HttpEmbedder<S> {
    fn id(&self) -> &str {
        &self.id
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn embed(&self, text: &str) -> Result<UnitVector<S>, RetrievalError> {
        let resp = self.backend.post_json(
            "embeddings",
            &EmbeddingRequest {
                model: &self.model,
                input: text,
            },
        )?;
        let parsed: EmbeddingResponse = resp
            .json()
            .map_err(|e| RetrievalError::Embed(format!("bad embeddings response: {e}")))?;
        let raw = parsed
            .data
            .into_iter()
            .next()
            .ok_or_else(|| RetrievalError::Embed("empty embeddings response".into()))?
            .embedding;
        if raw.len() != self.dim {
            return Err(RetrievalError::DimMismatch {
                expected: self.dim,
                got: raw.len(),
            });
        }
        let raw: Vec<S> = raw.into_iter().map(S::lit).collect();
        UnitVector::normalize(&raw)
    }
}
