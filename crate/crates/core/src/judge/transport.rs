use std::fs;
use std::path::{Path, PathBuf};
use std::time::Duration;

use serde_json::Value;
use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TransportError {
    #[error("HTTP status {0}")]
    Status(u16),
    #[error("timed out")]
    Timeout,
    #[error("connection failed: {0}")]
    Connection(String),
    #[error("bad response body: {0}")]
    Body(String),
    #[error("no stored response: {0}")]
    Replay(String),
}

/// Posts a JSON request and returns the response body of a 2xx reply.
pub trait Transport: Send + Sync {
    fn post(&self, request: &Value) -> Result<String, TransportError>;
}

impl<T: Transport + ?Sized> Transport for Box<T> {
    fn post(&self, request: &Value) -> Result<String, TransportError> {
        (**self).post(request)
    }
}

/// Chat-completion endpoint over HTTP.
pub struct HttpTransport {
    agent: ureq::Agent,
    endpoint: String,
    api_key: Option<String>,
}

impl HttpTransport {
    pub fn new(endpoint: impl Into<String>, timeout: Duration, api_key: Option<String>) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .http_status_as_error(false)
            .build()
            .into();
        HttpTransport {
            agent,
            endpoint: endpoint.into(),
            api_key,
        }
    }
}

impl Transport for HttpTransport {
    fn post(&self, request: &Value) -> Result<String, TransportError> {
        let mut req = self.agent.post(&self.endpoint).header("Content-Type", "application/json");
        if let Some(key) = &self.api_key {
            req = req.header("Authorization", format!("Bearer {key}"));
        }
        let mut resp = req.send(request.to_string()).map_err(|e| match e {
            ureq::Error::Timeout(_) => TransportError::Timeout,
            ureq::Error::StatusCode(s) => TransportError::Status(s),
            other => TransportError::Connection(other.to_string()),
        })?;
        let status = resp.status().as_u16();
        if !(200..300).contains(&status) {
            return Err(TransportError::Status(status));
        }
        resp.body_mut().read_to_string().map_err(|e| match e {
            ureq::Error::Timeout(_) => TransportError::Timeout,
            other => TransportError::Body(other.to_string()),
        })
    }
}

/// Hex SHA-256 of the compact request JSON; names replay files.
pub fn request_key(request: &Value) -> String {
    let digest = Sha256::digest(request.to_string().as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

/// Serves stored response bodies from `<dir>/<request_key>.json`.
pub struct ReplayTransport {
    dir: PathBuf,
}

impl ReplayTransport {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        ReplayTransport { dir: dir.into() }
    }

    pub fn path_for(dir: &Path, request: &Value) -> PathBuf {
        dir.join(format!("{}.json", request_key(request)))
    }
}

impl Transport for ReplayTransport {
    fn post(&self, request: &Value) -> Result<String, TransportError> {
        let path = Self::path_for(&self.dir, request);
        fs::read_to_string(&path).map_err(|e| TransportError::Replay(format!("{}: {e}", path.display())))
    }
}

/// Forwards to another transport and stores each successful body where
/// [`ReplayTransport`] will find it.
pub struct RecordingTransport<T> {
    inner: T,
    dir: PathBuf,
}

impl<T: Transport> RecordingTransport<T> {
    pub fn new(inner: T, dir: impl Into<PathBuf>) -> Self {
        RecordingTransport { inner, dir: dir.into() }
    }
}

impl<T: Transport> Transport for RecordingTransport<T> {
    fn post(&self, request: &Value) -> Result<String, TransportError> {
        let body = self.inner.post(request)?;
        fs::create_dir_all(&self.dir)
            .and_then(|_| fs::write(ReplayTransport::path_for(&self.dir, request), &body))
            .map_err(|e| TransportError::Connection(format!("recording: {e}")))?;
        Ok(body)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    struct Fixed(&'static str);

    impl Transport for Fixed {
        fn post(&self, _: &Value) -> Result<String, TransportError> {
            Ok(self.0.to_string())
        }
    }

    #[test]
    fn record_then_replay() {
        let dir = tempfile::tempdir().unwrap();
        let req = json!({"model": "m", "messages": []});
        let rec = RecordingTransport::new(Fixed("{\"ok\":1}"), dir.path());
        assert_eq!(rec.post(&req).unwrap(), "{\"ok\":1}");
        let replay = ReplayTransport::new(dir.path());
        assert_eq!(replay.post(&req).unwrap(), "{\"ok\":1}");
        let other = json!({"model": "n", "messages": []});
        assert!(matches!(replay.post(&other), Err(TransportError::Replay(_))));
        assert_eq!(request_key(&req).len(), 64);
    }
}
