//! Iteration sessions: fixed inputs plus an append-only history of runs.
//!
//! Layout on disk:
//!
//! ```text
//! <data>/sessions/<id>/session.json
//! <data>/sessions/<id>/inputs/{chart.json, background.png}
//! <data>/sessions/<id>/iterations/<n>/...   (one run directory each)
//! ```

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::backend::Generator;
use crate::error::{Stage, StageError};
use crate::hashing::sha256_hex;
use crate::pipeline::{run_pipeline_with, PipelineConfig, RunOptions, RunStatus};
use crate::png_io::decode_png;
use crate::spec_format::{parse_spec, serialize_spec};

pub const SESSION_FILE: &str = "session.json";
pub const DATA_DIR_ENV: &str = "SITBLEND_DATA_DIR";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SessionInputs {
    pub spec: String,
    pub background: String,
    pub spec_sha256: String,
    pub background_sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IterationRecord {
    pub index: usize,
    pub job_id: String,
    pub prompt: Option<String>,
    pub overrides: Value,
    pub status: RunStatus,
    pub error: Option<StageError>,
    /// Relative to the session directory.
    pub run_dir: String,
    pub manifest_hash: Option<String>,
    pub edge_alignment: Option<f64>,
    /// Hash over the previous link and this iteration's outcome.
    pub chain_hash: String,
    pub started: String,
    pub finished: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Session {
    pub id: String,
    pub created: String,
    pub inputs: SessionInputs,
    /// Overrides applied to the default config for every iteration.
    pub params: Value,
    pub iterations: Vec<IterationRecord>,
}

impl Session {
    /// Recomputes the hash chain; true when every stored link matches.
    pub fn chain_is_valid(&self) -> bool {
        let mut prev = chain_root(&self.id);
        for (i, it) in self.iterations.iter().enumerate() {
            if it.index != i {
                return false;
            }
            let link = chain_link(&prev, it);
            if link != it.chain_hash {
                return false;
            }
            prev = link;
        }
        true
    }
}

fn chain_root(id: &str) -> String {
    sha256_hex(id.as_bytes())
}

fn chain_link(prev: &str, it: &IterationRecord) -> String {
    let outcome = match (&it.manifest_hash, &it.error) {
        (Some(h), _) => h.clone(),
        (None, Some(e)) => format!("failed:{e}"),
        (None, None) => String::new(),
    };
    sha256_hex(format!("{prev}\n{}\n{}\n{outcome}", it.index, it.job_id).as_bytes())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionSummary {
    pub id: String,
    pub created: String,
    pub iterations: usize,
    pub in_flight: Option<InFlight>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InFlight {
    pub iteration: usize,
    pub job_id: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum JobState {
    Running,
    Done,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JobInfo {
    pub job_id: String,
    pub session_id: String,
    pub iteration: usize,
    pub state: JobState,
    pub error: Option<StageError>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SessionError {
    #[error("no session {0}")]
    NotFound(String),
    #[error("session {id} already has iteration {iteration} in flight")]
    Conflict { id: String, iteration: usize },
    #[error("{0}")]
    Invalid(StageError),
    #[error("{0}")]
    Storage(StageError),
}

impl SessionError {
    pub fn stage_error(&self) -> StageError {
        match self {
            SessionError::Invalid(e) | SessionError::Storage(e) => e.clone(),
            other => StageError::new(Stage::Session, other),
        }
    }
}

fn storage(e: impl std::fmt::Display) -> SessionError {
    SessionError::Storage(StageError::new(Stage::Session, e))
}

fn now() -> String {
    chrono::Utc::now().to_rfc3339()
}

#[derive(Default)]
struct Registry {
    busy: HashMap<String, InFlight>,
    jobs: HashMap<String, JobInfo>,
}

/// Session storage rooted at a data directory. Cheap to clone; clones
/// share the in-flight bookkeeping.
#[derive(Clone)]
pub struct SessionStore {
    root: PathBuf,
    registry: Arc<Mutex<Registry>>,
    generator: Option<Arc<dyn Generator>>,
    /// Serialises writes of session.json.
    write_lock: Arc<Mutex<()>>,
}

impl SessionStore {
    pub fn open(data_dir: &Path) -> Result<SessionStore, SessionError> {
        let root = data_dir.join("sessions");
        std::fs::create_dir_all(&root).map_err(|e| storage(format!("{}: {e}", root.display())))?;
        Ok(SessionStore {
            root,
            registry: Arc::default(),
            generator: None,
            write_lock: Arc::default(),
        })
    }

    /// Uses `generator` for every iteration instead of the one each
    /// iteration's config selects.
    pub fn with_generator(mut self, generator: Arc<dyn Generator>) -> SessionStore {
        self.generator = Some(generator);
        self
    }

    pub fn session_dir(&self, id: &str) -> PathBuf {
        self.root.join(id)
    }

    fn checked_dir(&self, id: &str) -> Result<PathBuf, SessionError> {
        let ok = !id.is_empty() && id.chars().all(|c| c.is_ascii_alphanumeric() || c == '-');
        let dir = self.session_dir(id);
        if ok && dir.join(SESSION_FILE).is_file() {
            Ok(dir)
        } else {
            Err(SessionError::NotFound(id.to_string()))
        }
    }

    /// Stores the inputs and returns the new session. Identical inputs
    /// still get a fresh session.
    pub fn create(
        &self,
        spec_text: &str,
        background_png: &[u8],
        params: Value,
    ) -> Result<Session, SessionError> {
        let spec = parse_spec(spec_text)
            .map_err(|e| SessionError::Invalid(StageError::new(Stage::ParseSpec, e)))?;
        decode_png(background_png)
            .map_err(|e| SessionError::Invalid(StageError::new(Stage::LoadBackground, e)))?;
        let params = if params.is_null() {
            Value::Object(Default::default())
        } else {
            params
        };
        let config = PipelineConfig::default()
            .with_overrides(&params)
            .map_err(SessionError::Invalid)?;
        config.validate().map_err(SessionError::Invalid)?;

        let id = uuid::Uuid::new_v4().to_string();
        let dir = self.session_dir(&id);
        let inputs = dir.join("inputs");
        std::fs::create_dir_all(&inputs).map_err(storage)?;
        std::fs::create_dir_all(dir.join("iterations")).map_err(storage)?;
        let spec_text = serialize_spec(&spec);
        std::fs::write(inputs.join("chart.json"), &spec_text).map_err(storage)?;
        std::fs::write(inputs.join("background.png"), background_png).map_err(storage)?;
        let session = Session {
            id,
            created: now(),
            inputs: SessionInputs {
                spec: "inputs/chart.json".into(),
                background: "inputs/background.png".into(),
                spec_sha256: sha256_hex(spec_text.as_bytes()),
                background_sha256: sha256_hex(background_png),
            },
            params,
            iterations: Vec::new(),
        };
        self.save(&session)?;
        Ok(session)
    }

    fn save(&self, session: &Session) -> Result<(), SessionError> {
        let _guard = self.write_lock.lock().unwrap_or_else(|p| p.into_inner());
        let dir = self.session_dir(&session.id);
        let mut bytes = serde_json::to_vec_pretty(session).map_err(storage)?;
        bytes.push(b'\n');
        let tmp = dir.join("session.json.tmp");
        std::fs::write(&tmp, bytes).map_err(storage)?;
        std::fs::rename(&tmp, dir.join(SESSION_FILE)).map_err(storage)
    }

    pub fn get(&self, id: &str) -> Result<Session, SessionError> {
        let dir = self.checked_dir(id)?;
        let bytes = std::fs::read(dir.join(SESSION_FILE)).map_err(storage)?;
        serde_json::from_slice(&bytes).map_err(|e| storage(format!("{id}/{SESSION_FILE}: {e}")))
    }

    pub fn in_flight(&self, id: &str) -> Option<InFlight> {
        self.registry
            .lock()
            .unwrap_or_else(|p| p.into_inner())
            .busy
            .get(id)
            .cloned()
    }

    /// Sessions ordered by creation time.
    pub fn list(&self) -> Result<Vec<SessionSummary>, SessionError> {
        let mut out = Vec::new();
        for entry in std::fs::read_dir(&self.root).map_err(storage)? {
            let name = entry
                .map_err(storage)?
                .file_name()
                .to_string_lossy()
                .into_owned();
            let Ok(session) = self.get(&name) else {
                continue;
            };
            out.push(SessionSummary {
                in_flight: self.in_flight(&session.id),
                id: session.id,
                created: session.created,
                iterations: session.iterations.len(),
            });
        }
        out.sort_by(|a, b| (&a.created, &a.id).cmp(&(&b.created, &b.id)));
        Ok(out)
    }

    pub fn job(&self, job_id: &str) -> Option<JobInfo> {
        self.registry
            .lock()
            .unwrap_or_else(|p| p.into_inner())
            .jobs
            .get(job_id)
            .cloned()
    }

    /// Reserves the next iteration of `id`. Fails with `Conflict` while
    /// another iteration of the same session is pending.
    pub fn begin_iteration(
        &self,
        id: &str,
        prompt: Option<String>,
        overrides: Value,
    ) -> Result<PendingIteration, SessionError> {
        let session = self.get(id)?;
        let mut reg = self.registry.lock().unwrap_or_else(|p| p.into_inner());
        if let Some(busy) = reg.busy.get(id) {
            return Err(SessionError::Conflict {
                id: id.to_string(),
                iteration: busy.iteration,
            });
        }
        let index = session.iterations.len();
        let job_id = format!("{id}-{index}");
        reg.busy.insert(
            id.to_string(),
            InFlight {
                iteration: index,
                job_id: job_id.clone(),
            },
        );
        reg.jobs.insert(
            job_id.clone(),
            JobInfo {
                job_id: job_id.clone(),
                session_id: id.to_string(),
                iteration: index,
                state: JobState::Running,
                error: None,
            },
        );
        drop(reg);
        let overrides = if overrides.is_null() {
            Value::Object(Default::default())
        } else {
            overrides
        };
        Ok(PendingIteration {
            store: self.clone(),
            session_id: id.to_string(),
            index,
            job_id,
            prompt,
            overrides,
            done: false,
        })
    }

    /// Runs one iteration to completion.
    pub fn iterate(
        &self,
        id: &str,
        prompt: Option<String>,
        overrides: Value,
    ) -> Result<IterationRecord, SessionError> {
        self.begin_iteration(id, prompt, overrides)?.run()
    }

    fn iteration_config(
        &self,
        session: &Session,
        pending: &PendingIteration,
    ) -> Result<PipelineConfig, StageError> {
        let dir = self.session_dir(&session.id);
        let mut config = PipelineConfig::default()
            .with_overrides(&session.params)?
            .with_overrides(&pending.overrides)?;
        if let Some(p) = &pending.prompt {
            config.prompt.template = p.clone();
        }
        config.spec_path = dir.join(&session.inputs.spec);
        config.background_path = dir.join(&session.inputs.background);
        config.out_dir = dir.join("iterations");
        Ok(config)
    }

    fn release(&self, pending: &PendingIteration, error: Option<StageError>) {
        let mut reg = self.registry.lock().unwrap_or_else(|p| p.into_inner());
        reg.busy.remove(&pending.session_id);
        if let Some(job) = reg.jobs.get_mut(&pending.job_id) {
            job.state = if error.is_some() {
                JobState::Failed
            } else {
                JobState::Done
            };
            job.error = error;
        }
    }
}

/// An iteration that holds its session's in-flight slot. Dropping it
/// without running releases the slot and marks the job failed.
pub struct PendingIteration {
    store: SessionStore,
    session_id: String,
    index: usize,
    job_id: String,
    prompt: Option<String>,
    overrides: Value,
    done: bool,
}

impl PendingIteration {
    pub fn index(&self) -> usize {
        self.index
    }

    pub fn job_id(&self) -> &str {
        &self.job_id
    }

    pub fn session_id(&self) -> &str {
        &self.session_id
    }

    /// Runs the pipeline and appends the outcome to the history. Stage
    /// errors become a failed iteration; only storage errors are returned.
    pub fn run(mut self) -> Result<IterationRecord, SessionError> {
        let result = self.execute();
        let error = match &result {
            Ok(rec) => rec.error.clone(),
            Err(e) => Some(e.stage_error()),
        };
        self.store.release(&self, error);
        self.done = true;
        result
    }

    fn execute(&self) -> Result<IterationRecord, SessionError> {
        let store = &self.store;
        let mut session = store.get(&self.session_id)?;
        if session.iterations.len() != self.index {
            return Err(storage(format!(
                "session {} history changed under iteration {}",
                session.id, self.index
            )));
        }
        let started = now();
        let run_rel = format!("iterations/{}", self.index);
        let run_dir = store.session_dir(&session.id).join(&run_rel);
        let (status, error, manifest_hash, edge_alignment) =
            match store.iteration_config(&session, self) {
                Err(e) => {
                    std::fs::create_dir_all(&run_dir).map_err(storage)?;
                    (RunStatus::Failed, Some(e), None, None)
                }
                Ok(config) => {
                    let options = RunOptions {
                        run_id: Some(format!("{}-{}", session.id, self.index)),
                        run_dir: Some(run_dir),
                        generator: store.generator.clone(),
                    };
                    match run_pipeline_with(&config, options) {
                        Ok(out) => (
                            RunStatus::Completed,
                            None,
                            Some(out.manifest.manifest_hash.clone()),
                            out.manifest.legibility.as_ref().map(|l| l.edge_alignment),
                        ),
                        Err(e) => (
                            RunStatus::Failed,
                            Some(e.error.clone()),
                            e.manifest.map(|m| m.manifest_hash),
                            None,
                        ),
                    }
                }
            };
        let prev = session
            .iterations
            .last()
            .map(|i| i.chain_hash.clone())
            .unwrap_or_else(|| chain_root(&session.id));
        let mut record = IterationRecord {
            index: self.index,
            job_id: self.job_id.clone(),
            prompt: self.prompt.clone(),
            overrides: self.overrides.clone(),
            status,
            error,
            run_dir: run_rel,
            manifest_hash,
            edge_alignment,
            chain_hash: String::new(),
            started,
            finished: now(),
        };
        record.chain_hash = chain_link(&prev, &record);
        session.iterations.push(record.clone());
        store.save(&session)?;
        Ok(record)
    }
}

impl Drop for PendingIteration {
    fn drop(&mut self) {
        if !self.done {
            self.store.release(
                self,
                Some(StageError::new(Stage::Session, "iteration abandoned")),
            );
        }
    }
}
