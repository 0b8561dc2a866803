//! In-process HTTP server speaking the generation protocol, backed by
//! [`mock_generate`]. Used by tests and by `sitblend mock-backend`.

use std::collections::HashMap;
use std::net::SocketAddr;
use std::sync::atomic::{AtomicBool, AtomicU32, AtomicU64, Ordering};
use std::sync::{Arc, Mutex};
use std::thread::{self, JoinHandle};
use std::time::{Duration, Instant};

use tiny_http::{Header, Method, Response, Server};

use super::mock::{mock_generate, MOCK_BACKEND_INFO};
use super::request::{GenerationRequest, GenerationResult, JobStatus, SubmitResponse};

#[derive(Debug, Clone, Default)]
pub struct MockServerOptions {
    /// How long a job reports `running` before it completes.
    pub delay: Duration,
    /// Number of initial `POST /generate` calls answered with HTTP 503.
    pub fail_submissions: u32,
    /// Report every job as failed with this message.
    pub fail_jobs: Option<String>,
}

struct Job {
    submitted: Instant,
    result: GenerationResult,
}

struct State {
    options: MockServerOptions,
    jobs: Mutex<HashMap<String, Job>>,
    submissions: AtomicU32,
    counter: AtomicU64,
}

pub struct MockServer {
    addr: SocketAddr,
    shutdown: Arc<AtomicBool>,
    state: Arc<State>,
    handle: Option<JoinHandle<()>>,
}

fn json_response(status: u16, body: Vec<u8>) -> Response<std::io::Cursor<Vec<u8>>> {
    Response::from_data(body)
        .with_status_code(status)
        .with_header(
            Header::from_bytes(&b"Content-Type"[..], &b"application/json"[..])
                .expect("static header"),
        )
}

fn error_body(message: &str) -> Vec<u8> {
    serde_json::to_vec(&serde_json::json!({ "error": message })).expect("json")
}

impl State {
    fn handle(&self, method: &Method, url: &str, body: &[u8]) -> (u16, Vec<u8>) {
        match (method, url) {
            (Method::Post, "/generate") => {
                let n = self.submissions.fetch_add(1, Ordering::SeqCst);
                if n < self.options.fail_submissions {
                    return (503, error_body("backend busy"));
                }
                let request: GenerationRequest = match serde_json::from_slice(body) {
                    Ok(r) => r,
                    Err(e) => return (400, error_body(&format!("bad request: {e}"))),
                };
                if let Err(e) = request.validate() {
                    return (422, error_body(&e.to_string()));
                }
                let mut result = mock_generate(&request);
                let job_id = format!(
                    "{}-{}",
                    result.job_id,
                    self.counter.fetch_add(1, Ordering::SeqCst)
                );
                result.job_id = job_id.clone();
                if let Some(msg) = &self.options.fail_jobs {
                    result.status = JobStatus::Failed;
                    result.image = None;
                    result.error = Some(msg.clone());
                }
                self.jobs.lock().unwrap().insert(
                    job_id.clone(),
                    Job {
                        submitted: Instant::now(),
                        result,
                    },
                );
                (
                    200,
                    serde_json::to_vec(&SubmitResponse { job_id }).expect("json"),
                )
            }
            (Method::Get, path) if path.starts_with("/jobs/") => {
                let id = &path["/jobs/".len()..];
                let jobs = self.jobs.lock().unwrap();
                let Some(job) = jobs.get(id) else {
                    return (404, error_body(&format!("unknown job {id}")));
                };
                let elapsed = job.submitted.elapsed();
                let result = if elapsed < self.options.delay {
                    GenerationResult {
                        job_id: id.to_string(),
                        status: JobStatus::Running,
                        image: None,
                        backend_info: MOCK_BACKEND_INFO.into(),
                        timing_ms: elapsed.as_millis() as u64,
                        error: None,
                    }
                } else {
                    let mut r = job.result.clone();
                    r.timing_ms = self.options.delay.as_millis() as u64;
                    r
                };
                (200, serde_json::to_vec(&result).expect("json"))
            }
            (Method::Get, "/health") => (200, br#"{"status":"ok"}"#.to_vec()),
            _ => (404, error_body("no such route")),
        }
    }
}

impl MockServer {
    /// Binds to `addr` (use port 0 for an ephemeral port) and serves on a
    /// background thread until dropped.
    pub fn start_on(addr: &str, options: MockServerOptions) -> std::io::Result<MockServer> {
        let server = Server::http(addr).map_err(std::io::Error::other)?;
        let addr = server
            .server_addr()
            .to_ip()
            .ok_or_else(|| std::io::Error::other("server is not bound to an IP address"))?;
        let shutdown = Arc::new(AtomicBool::new(false));
        let state = Arc::new(State {
            options,
            jobs: Mutex::new(HashMap::new()),
            submissions: AtomicU32::new(0),
            counter: AtomicU64::new(0),
        });
        let (flag, st) = (shutdown.clone(), state.clone());
        let handle = thread::spawn(move || {
            while !flag.load(Ordering::SeqCst) {
                let mut req = match server.recv_timeout(Duration::from_millis(50)) {
                    Ok(Some(r)) => r,
                    Ok(None) => continue,
                    Err(_) => break,
                };
                let mut body = Vec::new();
                let (status, bytes) = match req.as_reader().read_to_end(&mut body) {
                    Ok(_) => st.handle(req.method(), req.url(), &body),
                    Err(e) => (400, error_body(&e.to_string())),
                };
                let _ = req.respond(json_response(status, bytes));
            }
        });
        Ok(MockServer {
            addr,
            shutdown,
            state,
            handle: Some(handle),
        })
    }

    pub fn start(options: MockServerOptions) -> std::io::Result<MockServer> {
        Self::start_on("127.0.0.1:0", options)
    }

    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn url(&self) -> String {
        format!("http://{}", self.addr)
    }

    /// Number of `POST /generate` calls seen so far.
    pub fn submissions(&self) -> u32 {
        self.state.submissions.load(Ordering::SeqCst)
    }

    /// Blocks until the server thread exits (it never does unless dropped
    /// from another handle); used by the CLI.
    pub fn join(mut self) {
        if let Some(h) = self.handle.take() {
            let _ = h.join();
        }
    }
}

impl Drop for MockServer {
    fn drop(&mut self) {
        self.shutdown.store(true, Ordering::SeqCst);
        if let Some(h) = self.handle.take() {
            let _ = h.join();
        }
    }
}
