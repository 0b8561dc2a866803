use std::sync::Arc;
use std::thread;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use super::queue::{global_queue, GenerationQueue};
use super::request::{GenerationRequest, GenerationResult, RequestError, SubmitResponse};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClientConfig {
    pub endpoint: String,
    /// Bound on each individual HTTP exchange.
    pub request_timeout_ms: u64,
    /// Bound on waiting for a submitted job to finish.
    pub timeout_ms: u64,
    pub poll_interval_ms: u64,
    /// Extra attempts after a transport failure or busy answer.
    pub retries: u32,
    /// First retry delay; doubles on each further attempt.
    pub backoff_ms: u64,
}

impl Default for ClientConfig {
    fn default() -> Self {
        ClientConfig {
            endpoint: "http://127.0.0.1:7860".into(),
            request_timeout_ms: 30_000,
            timeout_ms: 600_000,
            poll_interval_ms: 500,
            retries: 3,
            backoff_ms: 200,
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ClientError {
    #[error("could not reach {endpoint} after {attempts} attempts: {message}")]
    Connect {
        endpoint: String,
        attempts: u32,
        message: String,
    },
    #[error("backend answered HTTP {status}: {body}")]
    Backend { status: u16, body: String },
    #[error("timed out waiting for job {}", job_id.as_deref().unwrap_or("(not yet submitted)"))]
    Timeout { job_id: Option<String> },
    #[error("protocol error: {0}")]
    Protocol(String),
    #[error("invalid request: {0}")]
    Request(#[from] RequestError),
}

impl ClientError {
    pub fn job_id(&self) -> Option<&str> {
        match self {
            ClientError::Timeout { job_id } => job_id.as_deref(),
            _ => None,
        }
    }
}

/// Statuses that mean the backend did not take the request and a retry
/// may succeed.
const BUSY: [u16; 3] = [502, 503, 504];

/// HTTP client for the generation protocol. Cheap to clone and safe to
/// share between threads.
#[derive(Clone)]
pub struct BackendClient {
    config: ClientConfig,
    agent: ureq::Agent,
    queue: Option<Arc<GenerationQueue>>,
}

impl std::fmt::Debug for BackendClient {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("BackendClient")
            .field("config", &self.config)
            .finish_non_exhaustive()
    }
}

fn is_transport(e: &ureq::Error) -> bool {
    matches!(
        e,
        ureq::Error::Io(_)
            | ureq::Error::ConnectionFailed
            | ureq::Error::HostNotFound
            | ureq::Error::Timeout(_)
    )
}

impl BackendClient {
    pub fn new(config: ClientConfig) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_millis(
                config.request_timeout_ms.max(1),
            )))
            .http_status_as_error(false)
            .build()
            .into();
        BackendClient {
            config,
            agent,
            queue: None,
        }
    }

    /// Uses `queue` instead of the process-wide one.
    pub fn with_queue(mut self, queue: Arc<GenerationQueue>) -> Self {
        self.queue = Some(queue);
        self
    }

    pub fn config(&self) -> &ClientConfig {
        &self.config
    }

    fn url(&self, path: &str) -> String {
        format!("{}{}", self.config.endpoint.trim_end_matches('/'), path)
    }

    /// One HTTP exchange. Transport failures and busy answers are retried
    /// with backoff; returns the final status and body.
    fn exchange(&self, path: &str, body: Option<&[u8]>) -> Result<(u16, String), ClientError> {
        let url = self.url(path);
        let mut delay = Duration::from_millis(self.config.backoff_ms);
        let mut attempt = 0;
        loop {
            attempt += 1;
            let result = match body {
                Some(b) => self
                    .agent
                    .post(&url)
                    .header("Content-Type", "application/json")
                    .send(b),
                None => self.agent.get(&url).call(),
            };
            match result {
                Ok(resp)
                    if BUSY.contains(&resp.status().as_u16()) && attempt <= self.config.retries =>
                {
                    thread::sleep(delay);
                    delay *= 2;
                }
                Ok(mut resp) => {
                    let status = resp.status().as_u16();
                    let text = resp
                        .body_mut()
                        .with_config()
                        .limit(u64::MAX)
                        .read_to_string()
                        .map_err(|e| ClientError::Protocol(e.to_string()))?;
                    return Ok((status, text));
                }
                Err(e) if is_transport(&e) && attempt <= self.config.retries => {
                    thread::sleep(delay);
                    delay *= 2;
                }
                Err(e) if is_transport(&e) => {
                    return Err(ClientError::Connect {
                        endpoint: self.config.endpoint.clone(),
                        attempts: attempt,
                        message: e.to_string(),
                    })
                }
                Err(e) => return Err(ClientError::Protocol(e.to_string())),
            }
        }
    }

    fn ok_body(status: u16, body: String) -> Result<String, ClientError> {
        if (200..300).contains(&status) {
            Ok(body)
        } else {
            Err(ClientError::Backend { status, body })
        }
    }

    /// Posts the request; returns the job id.
    pub fn submit(&self, request: &GenerationRequest) -> Result<String, ClientError> {
        request.validate()?;
        let (status, body) = self.exchange("/generate", Some(&request.to_canonical_json()))?;
        let body = Self::ok_body(status, body)?;
        let resp: SubmitResponse =
            serde_json::from_str(&body).map_err(|e| ClientError::Protocol(e.to_string()))?;
        Ok(resp.job_id)
    }

    pub fn status(&self, job_id: &str) -> Result<GenerationResult, ClientError> {
        let (status, body) = self.exchange(&format!("/jobs/{job_id}"), None)?;
        let body = Self::ok_body(status, body)?;
        let result: GenerationResult =
            serde_json::from_str(&body).map_err(|e| ClientError::Protocol(e.to_string()))?;
        if !result.is_consistent() {
            return Err(ClientError::Protocol(format!(
                "job {job_id}: image must be present exactly when done"
            )));
        }
        Ok(result)
    }

    /// Submits and polls until the job is done or failed. The wait is
    /// bounded by `timeout_ms`, which also covers time spent queued.
    pub fn generate(&self, request: &GenerationRequest) -> Result<GenerationResult, ClientError> {
        let deadline = Instant::now() + Duration::from_millis(self.config.timeout_ms);
        let queue: &GenerationQueue = match &self.queue {
            Some(q) => q,
            None => global_queue(),
        };
        let _permit = queue
            .acquire_until(deadline)
            .ok_or(ClientError::Timeout { job_id: None })?;
        let job_id = self.submit(request)?;
        let poll = Duration::from_millis(self.config.poll_interval_ms.max(1));
        loop {
            let result = self.status(&job_id)?;
            if result.status.is_terminal() {
                return Ok(result);
            }
            let now = Instant::now();
            if now >= deadline {
                return Err(ClientError::Timeout {
                    job_id: Some(job_id),
                });
            }
            thread::sleep(poll.min(deadline - now));
        }
    }
}

/// One-shot helper: submit `request` to `endpoint` and wait up to
/// `timeout` for the terminal result.
pub fn submit_generation(
    request: &GenerationRequest,
    endpoint: &str,
    timeout: Duration,
) -> Result<GenerationResult, ClientError> {
    let config = ClientConfig {
        endpoint: endpoint.to_string(),
        timeout_ms: timeout.as_millis() as u64,
        ..ClientConfig::default()
    };
    BackendClient::new(config).generate(request)
}
