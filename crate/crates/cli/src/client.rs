use reqwest::blocking::{Client, Response};
use reqwest::StatusCode;
use serde_json::Value;

use crate::CliError;

/// Thin JSON client for the node API. Error envelopes are handed back untouched.
pub struct NodeClient {
    base: String,
    http: Client,
}

impl NodeClient {
    pub fn new(base: &str) -> Self {
        NodeClient {
            base: base.trim_end_matches('/').to_owned(),
            http: Client::new(),
        }
    }

    pub fn get(&self, path: &str) -> Result<Value, CliError> {
        tracing::debug!(path, "GET");
        let resp = self.http.get(self.url(path)).send().map_err(|e| self.unreachable(e))?;
        Self::decode(resp)
    }

    pub fn post(&self, path: &str, body: &Value) -> Result<Value, CliError> {
        tracing::debug!(path, "POST");
        let resp = self
            .http
            .post(self.url(path))
            .json(body)
            .send()
            .map_err(|e| self.unreachable(e))?;
        Self::decode(resp)
    }

    /// Next nonce for `address`, counting transactions still in the mempool.
    pub fn next_nonce(&self, address: &str) -> Result<u64, CliError> {
        match self.get(&format!("/state/accounts/{address}")) {
            Ok(acct) => acct["pending_nonce"]
                .as_u64()
                .map(|n| n + 1)
                .ok_or_else(|| CliError::local("ProtocolError", "account view lacks pending_nonce")),
            Err(CliError::Api { status, .. }) if status == StatusCode::NOT_FOUND => Ok(1),
            Err(e) => Err(e),
        }
    }

    fn url(&self, path: &str) -> String {
        format!("{}{path}", self.base)
    }

    fn unreachable(&self, e: reqwest::Error) -> CliError {
        CliError::local("ConnectionError", format!("{}: {e}", self.base))
    }

    fn decode(resp: Response) -> Result<Value, CliError> {
        let status = resp.status();
        let text = resp
            .text()
            .map_err(|e| CliError::local("ConnectionError", e.to_string()))?;
        let body: Value = serde_json::from_str(&text)
            .map_err(|_| CliError::local("ProtocolError", format!("{status}: non-JSON response")))?;
        if status.is_success() {
            Ok(body)
        } else {
            Err(CliError::Api { status, envelope: body })
        }
    }
}
