use serde::{Deserialize, Serialize};

use super::{EmbedPayload, Embedder, EmbedderKind};
use crate::error::Result;
use crate::transport::JsonClient;

/// Body of `POST /embed`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbedRequest {
    pub kind: EmbedderKind,
    pub dim: usize,
    pub payload: EmbedPayload,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbedResponse {
    pub vector: Vec<f64>,
}

/// Embedder reached over HTTP; one request per vector.
#[derive(Debug, Clone)]
pub struct HttpEmbedder {
    kind: EmbedderKind,
    dim: usize,
    client: JsonClient,
}

impl HttpEmbedder {
    pub fn new(kind: EmbedderKind, address: impl Into<String>, dim: usize, timeout_ms: u64) -> Self {
        HttpEmbedder {
            kind,
            dim,
            client: JsonClient::new(address, timeout_ms),
        }
    }
}

impl Embedder for HttpEmbedder {
    fn kind(&self) -> EmbedderKind {
        self.kind
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn embed(&self, payload: &EmbedPayload) -> Result<Vec<f64>> {
        let req = EmbedRequest {
            kind: self.kind,
            dim: self.dim,
            payload: payload.clone(),
        };
        let resp: EmbedResponse = self.client.post("/embed", &req)?;
        Ok(resp.vector)
    }
}
