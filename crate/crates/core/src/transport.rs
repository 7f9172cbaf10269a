//! Blocking JSON-over-HTTP helper shared by the external client slots
//! (embedders, corpus processors, synthesizer).

use std::time::Duration;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{Error, Result};

pub const DEFAULT_TIMEOUT_MS: u64 = 5_000;

#[derive(Debug, Clone)]
pub struct JsonClient {
    base: String,
    agent: ureq::Agent,
}

impl JsonClient {
    pub fn new(base: impl Into<String>, timeout_ms: u64) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_millis(timeout_ms.max(1))))
            .http_status_as_error(false)
            .build()
            .into();
        JsonClient {
            base: base.into().trim_end_matches('/').to_string(),
            agent,
        }
    }

    pub fn base(&self) -> &str {
        &self.base
    }

    /// POSTs `body` to `base + path`. Transport failures and non-200
    /// responses both map to `EndpointUnavailable`.
    pub fn post<B: Serialize, R: DeserializeOwned>(&self, path: &str, body: &B) -> Result<R> {
        let url = format!("{}{}", self.base, path);
        let mut resp = self
            .agent
            .post(&url)
            .send_json(body)
            .map_err(|e| Error::unavailable(&url, e))?;
        let status = resp.status();
        if status != 200 {
            return Err(Error::unavailable(&url, format!("status {status}")));
        }
        resp.body_mut()
            .read_json::<R>()
            .map_err(|e| Error::unavailable(&url, format!("bad response body: {e}")))
    }
}

/// True for locators handled by [`JsonClient`].
pub fn is_http(locator: &str) -> bool {
    locator.starts_with("http://") || locator.starts_with("https://")
}
