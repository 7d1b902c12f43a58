use std::time::Duration;

use ureq::Agent;

use super::FetchError;
use crate::controller::PolicySource;
use crate::policy::PolicyDocument;

/// HTTP client for a policy database.
#[derive(Clone)]
pub struct NwpdClient {
    url: String,
    agent: Agent,
}

impl NwpdClient {
    /// Accepts either the service root or the full `/policy` URL.
    pub fn new(endpoint: &str) -> Self {
        let trimmed = endpoint.trim_end_matches('/');
        let url = if trimmed.ends_with("/policy") {
            trimmed.to_string()
        } else {
            format!("{trimmed}/policy")
        };
        let agent: Agent = Agent::config_builder()
            .http_status_as_error(false)
            .timeout_global(Some(Duration::from_secs(10)))
            .build()
            .into();
        NwpdClient { url, agent }
    }

    pub fn url(&self) -> &str {
        &self.url
    }

    /// Raw response body of `GET /policy`.
    pub fn fetch_bytes(&self) -> Result<Vec<u8>, FetchError> {
        let mut resp = self
            .agent
            .get(&self.url)
            .call()
            .map_err(|e| FetchError::Unreachable(format!("{}: {e}", self.url)))?;
        let status = resp.status().as_u16();
        let body = resp
            .body_mut()
            .read_to_vec()
            .map_err(|e| FetchError::Unreachable(e.to_string()))?;
        match status {
            200 => Ok(body),
            404 => Err(FetchError::NoPolicy),
            other => Err(FetchError::Http {
                status: other,
                body: String::from_utf8_lossy(&body).into_owned(),
            }),
        }
    }

    pub fn fetch_policy(&self) -> Result<PolicyDocument, FetchError> {
        let body = self.fetch_bytes()?;
        let doc: PolicyDocument = serde_json::from_slice(&body)
            .map_err(|e| FetchError::MalformedPolicy(e.to_string()))?;
        doc.validate()
            .map_err(|e| FetchError::MalformedPolicy(e.to_string()))?;
        Ok(doc)
    }

    /// `PUT /policy`; returns the accepted version.
    pub fn put_policy(&self, doc: &PolicyDocument) -> Result<u64, FetchError> {
        let mut resp = self
            .agent
            .put(&self.url)
            .header("Content-Type", "application/json")
            .send(&doc.to_json_bytes()[..])
            .map_err(|e| FetchError::Unreachable(format!("{}: {e}", self.url)))?;
        let status = resp.status().as_u16();
        let body = resp
            .body_mut()
            .read_to_string()
            .map_err(|e| FetchError::Unreachable(e.to_string()))?;
        match status {
            200 => {
                let v: serde_json::Value = serde_json::from_str(&body)
                    .map_err(|e| FetchError::Http { status, body: e.to_string() })?;
                v["version"].as_u64().ok_or(FetchError::Http { status, body })
            }
            400 => Err(FetchError::Rejected(body)),
            409 => Err(FetchError::Stale(body)),
            other => Err(FetchError::Http {
                status: other,
                body,
            }),
        }
    }
}

impl PolicySource for NwpdClient {
    fn describe(&self) -> String {
        self.url.clone()
    }

    fn fetch(&self) -> Result<PolicyDocument, FetchError> {
        self.fetch_policy()
    }
}
