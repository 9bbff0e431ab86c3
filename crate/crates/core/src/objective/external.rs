//! HTTP client for out-of-process scorers.
//!
//! Wire protocol: `POST {endpoint}/score` with the PNG bytes as body and
//! `Content-Type: image/png`. A conforming reply is HTTP 200 with an
//! `application/json` body that is exactly `{"score": <finite number>}`.

use std::sync::{Condvar, Mutex};
use std::time::Duration;

use super::{Scorer, ScorerError};
use crate::image::Image;

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(30);
const MAX_REPLY_BYTES: u64 = 64 * 1024;

struct Permits {
    free: Mutex<usize>,
    cv: Condvar,
}

impl Permits {
    fn acquire(&self) -> PermitGuard<'_> {
        let mut free = self.free.lock().unwrap_or_else(|e| e.into_inner());
        while *free == 0 {
            free = self.cv.wait(free).unwrap_or_else(|e| e.into_inner());
        }
        *free -= 1;
        PermitGuard(self)
    }
}

struct PermitGuard<'a>(&'a Permits);

impl Drop for PermitGuard<'_> {
    fn drop(&mut self) {
        *self.0.free.lock().unwrap_or_else(|e| e.into_inner()) += 1;
        self.0.cv.notify_one();
    }
}

pub struct HttpScorer {
    endpoint: String,
    url: String,
    timeout: Duration,
    agent: ureq::Agent,
    permits: Permits,
    name: String,
}

impl HttpScorer {
    pub fn new(endpoint: &str, timeout: Duration, max_connections: usize) -> Self {
        let endpoint = endpoint.trim_end_matches('/').to_string();
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .http_status_as_error(false)
            .build()
            .into();
        Self {
            url: format!("{endpoint}/score"),
            name: format!("http:{endpoint}"),
            endpoint,
            timeout,
            agent,
            permits: Permits {
                free: Mutex::new(max_connections.max(1)),
                cv: Condvar::new(),
            },
        }
    }

    pub fn endpoint(&self) -> &str {
        &self.endpoint
    }

    fn transport_error(&self, err: ureq::Error) -> ScorerError {
        match err {
            ureq::Error::Timeout(_) => ScorerError::Timeout {
                endpoint: self.endpoint.clone(),
                seconds: self.timeout.as_secs_f64(),
            },
            ureq::Error::Io(e) if e.kind() == std::io::ErrorKind::TimedOut => ScorerError::Timeout {
                endpoint: self.endpoint.clone(),
                seconds: self.timeout.as_secs_f64(),
            },
            other => ScorerError::Transport {
                endpoint: self.endpoint.clone(),
                reason: other.to_string(),
            },
        }
    }
}

/// Validates a reply body against the protocol.
pub fn parse_score_reply(body: &str) -> Result<f64, ScorerError> {
    let value: serde_json::Value =
        serde_json::from_str(body).map_err(|e| ScorerError::Protocol(format!("reply is not JSON: {e}")))?;
    let obj = value
        .as_object()
        .ok_or_else(|| ScorerError::Protocol("reply is not a JSON object".into()))?;
    if obj.len() != 1 {
        return Err(ScorerError::Protocol(format!(
            "reply must contain only \"score\", found keys {:?}",
            obj.keys().collect::<Vec<_>>()
        )));
    }
    let score = obj
        .get("score")
        .ok_or_else(|| ScorerError::Protocol("reply has no \"score\" field".into()))?;
    let v = score
        .as_f64()
        .ok_or_else(|| ScorerError::Protocol(format!("\"score\" is not a number: {score}")))?;
    if !v.is_finite() {
        return Err(ScorerError::Protocol(format!("\"score\" is not finite: {v}")));
    }
    Ok(v)
}

impl Scorer for HttpScorer {
    fn name(&self) -> &str {
        &self.name
    }

    fn score(&self, image: &Image) -> Result<f64, ScorerError> {
        let png = image.encode_png()?;
        let _permit = self.permits.acquire();
        let mut resp = self
            .agent
            .post(&self.url)
            .header("Content-Type", "image/png")
            .send(&png[..])
            .map_err(|e| self.transport_error(e))?;
        let status = resp.status().as_u16();
        if status != 200 {
            return Err(ScorerError::Status {
                endpoint: self.endpoint.clone(),
                status,
            });
        }
        let content_type = resp
            .headers()
            .get("content-type")
            .and_then(|v| v.to_str().ok())
            .unwrap_or("")
            .to_ascii_lowercase();
        if !content_type.starts_with("application/json") {
            return Err(ScorerError::Protocol(format!(
                "reply content type is {content_type:?}, expected application/json"
            )));
        }
        let body = resp
            .body_mut()
            .with_config()
            .limit(MAX_REPLY_BYTES)
            .read_to_string()
            .map_err(|e| self.transport_error(e))?;
        parse_score_reply(&body)
    }

    fn is_deterministic(&self) -> bool {
        false
    }
}
