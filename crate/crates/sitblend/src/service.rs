//! JSON-over-HTTP service for the studio front end.
//!
//! | method | path | body | reply |
//! |---|---|---|---|
//! | POST | `/api/sessions` | `{spec, background: {path} or {png_base64}, params}` | `201 {id}` |
//! | GET | `/api/sessions` | | `[summary]` |
//! | GET | `/api/sessions/{id}` | | session with `in_flight` |
//! | POST | `/api/sessions/{id}/iterations` | `{prompt, overrides}` | `202 {iteration, job}` |
//! | GET | `/api/sessions/{id}/iterations/{n}/artifact/{name}` | | PNG |
//! | GET | `/api/jobs/{id}` | | job status |
//! | GET | `/api/health` | | `{status: "ok"}` |
//!
//! Errors are `{stage, message}` with a 4xx/5xx status. Iterations run on
//! a background thread; clients poll the job.

use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::thread::{self, JoinHandle};
use std::time::Duration;

use base64::Engine;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use tiny_http::{Header, Method, Response, Server};

use crate::error::{Stage, StageError};
use crate::pipeline::{BACKGROUND, CHART, OUTLINE, OUTPUT, UPSCALED};
use crate::session::{InFlight, JobInfo, JobState, Session, SessionError, SessionStore};

/// Files an iteration exposes through the artifact route.
pub const ARTIFACTS: [(&str, &str); 5] = [CHART, OUTLINE, BACKGROUND, OUTPUT, UPSCALED];

#[derive(Debug, Clone, PartialEq)]
pub struct Reply {
    pub status: u16,
    pub content_type: &'static str,
    pub body: Vec<u8>,
}

impl Reply {
    fn json<T: Serialize>(status: u16, value: &T) -> Reply {
        let mut body = serde_json::to_vec(value).expect("reply serialises");
        body.push(b'\n');
        Reply {
            status,
            content_type: "application/json",
            body,
        }
    }

    fn error(status: u16, error: &StageError) -> Reply {
        Reply::json(
            status,
            &json!({ "stage": error.stage, "message": error.message }),
        )
    }

    fn session_error(e: &SessionError) -> Reply {
        let status = match e {
            SessionError::NotFound(_) => 404,
            SessionError::Conflict { .. } => 409,
            SessionError::Invalid(_) => 422,
            SessionError::Storage(_) => 500,
        };
        Reply::error(status, &e.stage_error())
    }

    fn not_found(what: &str) -> Reply {
        Reply::error(
            404,
            &StageError::new(Stage::Session, format!("not found: {what}")),
        )
    }

    fn bad_request(message: impl std::fmt::Display) -> Reply {
        Reply::error(400, &StageError::new(Stage::Request, message))
    }

    /// Parsed JSON body, for tests and clients.
    pub fn json_body(&self) -> Value {
        serde_json::from_slice(&self.body).unwrap_or(Value::Null)
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "snake_case")]
enum BackgroundRef {
    Path(PathBuf),
    PngBase64(String),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct CreateBody {
    /// A chart spec object, or its JSON text.
    spec: Value,
    background: BackgroundRef,
    #[serde(default)]
    params: Value,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct IterateBody {
    #[serde(default)]
    prompt: Option<String>,
    #[serde(default)]
    overrides: Value,
}

#[derive(Debug, Serialize)]
struct SessionView {
    #[serde(flatten)]
    session: Session,
    in_flight: Option<InFlight>,
}

#[derive(Clone)]
pub struct Service {
    store: SessionStore,
    static_dir: Option<PathBuf>,
}

fn content_type_for(path: &Path) -> &'static str {
    match path.extension().and_then(|e| e.to_str()) {
        Some("html") => "text/html; charset=utf-8",
        Some("js") => "text/javascript",
        Some("css") => "text/css",
        Some("png") => "image/png",
        Some("json") => "application/json",
        Some("svg") => "image/svg+xml",
        _ => "application/octet-stream",
    }
}

impl Service {
    pub fn new(store: SessionStore) -> Service {
        Service {
            store,
            static_dir: None,
        }
    }

    /// Serves files under `dir` for paths outside `/api`.
    pub fn with_static_dir(mut self, dir: PathBuf) -> Service {
        self.static_dir = Some(dir);
        self
    }

    pub fn store(&self) -> &SessionStore {
        &self.store
    }

    /// Routes one request. `path` excludes the query string.
    pub fn handle(&self, method: &str, path: &str, body: &[u8]) -> Reply {
        let parts: Vec<&str> = path.trim_matches('/').split('/').collect();
        match (method, parts.as_slice()) {
            ("GET", ["api", "health"]) => Reply::json(200, &json!({ "status": "ok" })),
            ("GET", ["api", "sessions"]) => match self.store.list() {
                Ok(list) => Reply::json(200, &list),
                Err(e) => Reply::session_error(&e),
            },
            ("POST", ["api", "sessions"]) => self.create(body),
            ("GET", ["api", "sessions", id]) => match self.store.get(id) {
                Ok(session) => Reply::json(
                    200,
                    &SessionView {
                        in_flight: self.store.in_flight(id),
                        session,
                    },
                ),
                Err(e) => Reply::session_error(&e),
            },
            ("POST", ["api", "sessions", id, "iterations"]) => self.iterate(id, body),
            ("GET", ["api", "sessions", id, "iterations", n, "artifact", name]) => {
                self.artifact(id, n, name)
            }
            ("GET", ["api", "jobs", job]) => match self.job(job) {
                Some(info) => Reply::json(200, &info),
                None => Reply::not_found(&format!("job {job}")),
            },
            (_, ["api", ..]) => Reply::not_found(path),
            ("GET", _) => self.static_file(path),
            _ => Reply::not_found(path),
        }
    }

    fn create(&self, body: &[u8]) -> Reply {
        let req: CreateBody = match serde_json::from_slice(body) {
            Ok(r) => r,
            Err(e) => return Reply::bad_request(e),
        };
        let spec_text = match req.spec {
            Value::String(s) => s,
            other => other.to_string(),
        };
        let background = match req.background {
            BackgroundRef::Path(p) => match std::fs::read(&p) {
                Ok(b) => b,
                Err(e) => {
                    return Reply::error(
                        422,
                        &StageError::new(Stage::LoadBackground, format!("{}: {e}", p.display())),
                    )
                }
            },
            BackgroundRef::PngBase64(s) => {
                match base64::engine::general_purpose::STANDARD.decode(s.trim()) {
                    Ok(b) => b,
                    Err(e) => {
                        return Reply::error(
                            422,
                            &StageError::new(Stage::LoadBackground, format!("png_base64: {e}")),
                        )
                    }
                }
            }
        };
        match self.store.create(&spec_text, &background, req.params) {
            Ok(session) => Reply::json(201, &json!({ "id": session.id })),
            Err(e) => Reply::session_error(&e),
        }
    }

    fn iterate(&self, id: &str, body: &[u8]) -> Reply {
        let req: IterateBody = if body.iter().all(u8::is_ascii_whitespace) {
            IterateBody::default()
        } else {
            match serde_json::from_slice(body) {
                Ok(r) => r,
                Err(e) => return Reply::bad_request(e),
            }
        };
        let pending = match self.store.begin_iteration(id, req.prompt, req.overrides) {
            Ok(p) => p,
            Err(e) => return Reply::session_error(&e),
        };
        let reply = Reply::json(
            202,
            &json!({ "iteration": pending.index(), "job": pending.job_id() }),
        );
        thread::spawn(move || {
            // Failures are recorded on the session and the job.
            let _ = pending.run();
        });
        reply
    }

    fn artifact(&self, id: &str, n: &str, name: &str) -> Reply {
        let Some((_, file)) = ARTIFACTS.iter().find(|(a, _)| *a == name) else {
            return Reply::not_found(&format!("artifact {name}"));
        };
        let session = match self.store.get(id) {
            Ok(s) => s,
            Err(e) => return Reply::session_error(&e),
        };
        let Some(it) = n
            .parse::<usize>()
            .ok()
            .and_then(|n| session.iterations.get(n))
        else {
            return Reply::not_found(&format!("iteration {n}"));
        };
        match std::fs::read(self.store.session_dir(id).join(&it.run_dir).join(file)) {
            Ok(body) => Reply {
                status: 200,
                content_type: "image/png",
                body,
            },
            Err(_) => Reply::not_found(&format!("iteration {n} has no {name}")),
        }
    }

    fn job(&self, job_id: &str) -> Option<JobInfo> {
        if let Some(info) = self.store.job(job_id) {
            return Some(info);
        }
        // Jobs from before a restart are answered from the history.
        let (id, n) = job_id.rsplit_once('-')?;
        let index: usize = n.parse().ok()?;
        let it = self.store.get(id).ok()?.iterations.get(index)?.clone();
        Some(JobInfo {
            job_id: job_id.to_string(),
            session_id: id.to_string(),
            iteration: index,
            state: if it.error.is_some() {
                JobState::Failed
            } else {
                JobState::Done
            },
            error: it.error,
        })
    }

    fn static_file(&self, path: &str) -> Reply {
        let Some(dir) = &self.static_dir else {
            return Reply::not_found(path);
        };
        let rel = path.trim_start_matches('/');
        if rel.split('/').any(|c| c == "..") {
            return Reply::not_found(path);
        }
        let file = if rel.is_empty() {
            dir.join("index.html")
        } else {
            dir.join(rel)
        };
        match std::fs::read(&file) {
            Ok(body) => Reply {
                status: 200,
                content_type: content_type_for(&file),
                body,
            },
            Err(_) => Reply::not_found(path),
        }
    }
}

/// A running service bound to a local address. Dropping it stops the
/// accept loop.
pub struct ServiceHandle {
    addr: SocketAddr,
    shutdown: Arc<AtomicBool>,
    handle: Option<JoinHandle<()>>,
}

impl ServiceHandle {
    pub fn start(addr: &str, service: Service) -> Result<ServiceHandle, StageError> {
        let server = Server::http(addr)
            .map_err(|e| StageError::new(Stage::Session, format!("bind {addr}: {e}")))?;
        let addr = server
            .server_addr()
            .to_ip()
            .ok_or_else(|| StageError::new(Stage::Session, "service needs an IP address"))?;
        let shutdown = Arc::new(AtomicBool::new(false));
        let stop = shutdown.clone();
        let handle = thread::spawn(move || {
            while !stop.load(Ordering::SeqCst) {
                let Ok(Some(req)) = server.recv_timeout(Duration::from_millis(50)) else {
                    continue;
                };
                let service = service.clone();
                thread::spawn(move || respond(&service, req));
            }
        });
        Ok(ServiceHandle {
            addr,
            shutdown,
            handle: Some(handle),
        })
    }

    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn url(&self) -> String {
        format!("http://{}", self.addr)
    }

    /// Blocks until the accept loop ends.
    pub fn join(mut self) {
        if let Some(h) = self.handle.take() {
            let _ = h.join();
        }
    }
}

impl Drop for ServiceHandle {
    fn drop(&mut self) {
        self.shutdown.store(true, Ordering::SeqCst);
        if let Some(h) = self.handle.take() {
            let _ = h.join();
        }
    }
}

fn respond(service: &Service, mut req: tiny_http::Request) {
    let mut body = Vec::new();
    let reply = match req.as_reader().read_to_end(&mut body) {
        Ok(_) => {
            let method = match req.method() {
                Method::Get => "GET",
                Method::Post => "POST",
                Method::Put => "PUT",
                Method::Delete => "DELETE",
                _ => "OTHER",
            };
            let path = req.url().split('?').next().unwrap_or("").to_string();
            service.handle(method, &path, &body)
        }
        Err(e) => Reply::bad_request(e),
    };
    let response = Response::from_data(reply.body)
        .with_status_code(reply.status)
        .with_header(
            Header::from_bytes(&b"Content-Type"[..], reply.content_type.as_bytes())
                .expect("static header"),
        );
    let _ = req.respond(response);
}
