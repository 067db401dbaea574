//! On-disk datasets and session event logs.
//!
//! Layout under the data directory:
//!
//! ```text
//! datasets/<id>/data.csv
//! datasets/<id>/schema.json
//! datasets/<id>/dataset.json
//! sessions/<id>.jsonl        one event per line, append-only
//! ```
//!
//! Sessions are materialized in memory and rebuilt from their logs on
//! [`Store::open`]. Each session sits behind its own lock, so mutations and
//! finalization are serialized per session while other sessions proceed.

use std::collections::HashMap;
use std::fs::{self, OpenOptions};
use std::io::{self, BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::{Arc, RwLock};

use chrono::{DateTime, Utc};
use dp_planner::query::{ingest_csv, Dataset, QuerySpec, Schema};
use dp_planner::release::{
    BudgetMutation, BudgetUpdate, Finalized, ReleaseDocument, RiskSummary, Session, SessionView, WhatIfPayload,
    WhatIfRequest,
};
use dp_planner::rng::RandomSeed;
use dp_planner::{SCHEMA_VERSION, inference::DEFAULT_REPLICATES};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum StoreError {
    #[error(transparent)]
    Core(#[from] dp_planner::Error),
    #[error("dataset `{0}` not found")]
    DatasetNotFound(String),
    #[error("session `{0}` not found")]
    SessionNotFound(String),
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("corrupt store file {path}: {message}")]
    Corrupt { path: PathBuf, message: String },
}

impl From<dp_planner::query::IngestError> for StoreError {
    fn from(e: dp_planner::query::IngestError) -> Self {
        StoreError::Core(e.into())
    }
}

pub type StoreResult<T> = Result<T, StoreError>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetRecord {
    pub schema_version: u32,
    pub id: String,
    pub source: String,
    pub n: u64,
    pub schema: Schema,
}

fn default_replicates() -> usize {
    DEFAULT_REPLICATES
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CreateSession {
    pub dataset_id: String,
    pub queries: Vec<QuerySpec>,
    pub total_budget: f64,
    /// Drawn from the OS when absent; recorded in the log either way.
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default = "default_replicates")]
    pub replicates: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
enum Event {
    Created {
        session_id: String,
        dataset_id: String,
        queries: Vec<QuerySpec>,
        total_budget: f64,
        seed: u64,
        replicates: usize,
        at: DateTime<Utc>,
    },
    Budget {
        mutation: BudgetMutation,
        at: DateTime<Utc>,
    },
    Finalized {
        document: ReleaseDocument,
        at: DateTime<Utc>,
    },
}

type Shared = Arc<RwLock<Session>>;

pub struct Store {
    root: PathBuf,
    sessions: RwLock<HashMap<String, Shared>>,
    datasets: RwLock<HashMap<String, Arc<Dataset>>>,
}

fn corrupt(path: &Path, message: impl Into<String>) -> StoreError {
    StoreError::Corrupt {
        path: path.to_owned(),
        message: message.into(),
    }
}

fn valid_id(id: &str) -> bool {
    !id.is_empty() && id.len() <= 64 && id.bytes().all(|b| b.is_ascii_alphanumeric() || b == b'-')
}

impl Store {
    /// Open (or create) a store and replay every session log.
    pub fn open(root: impl Into<PathBuf>) -> StoreResult<Store> {
        let root = root.into();
        fs::create_dir_all(root.join("datasets"))?;
        fs::create_dir_all(root.join("sessions"))?;
        let store = Store {
            root,
            sessions: RwLock::new(HashMap::new()),
            datasets: RwLock::new(HashMap::new()),
        };
        let mut logs: Vec<PathBuf> = fs::read_dir(store.root.join("sessions"))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "jsonl"))
            .collect();
        logs.sort();
        for path in logs {
            let session = store.replay(&path)?;
            store
                .sessions
                .write()
                .unwrap()
                .insert(session.id().to_owned(), Arc::new(RwLock::new(session)));
        }
        Ok(store)
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn replay(&self, path: &Path) -> StoreResult<Session> {
        let reader = BufReader::new(fs::File::open(path)?);
        let mut session: Option<Session> = None;
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let event: Event =
                serde_json::from_str(&line).map_err(|e| corrupt(path, format!("line {}: {e}", i + 1)))?;
            match (event, session.as_mut()) {
                (
                    Event::Created {
                        session_id,
                        dataset_id,
                        queries,
                        total_budget,
                        seed,
                        replicates,
                        ..
                    },
                    None,
                ) => {
                    let ds = self.dataset(&dataset_id)?;
                    let s = Session::create(session_id, dataset_id, &ds, queries, total_budget, RandomSeed(seed))?
                        .with_replicates(replicates)?;
                    session = Some(s);
                }
                (Event::Budget { mutation, .. }, Some(s)) => {
                    s.update_budget(&mutation)?;
                }
                (Event::Finalized { document, .. }, Some(s)) => s.restore_release(document)?,
                _ => return Err(corrupt(path, format!("line {}: event out of order", i + 1))),
            }
        }
        session.ok_or_else(|| corrupt(path, "log has no creation event"))
    }

    fn append(&self, session_id: &str, event: &Event) -> StoreResult<()> {
        let path = self.root.join("sessions").join(format!("{session_id}.jsonl"));
        let mut f = OpenOptions::new().create(true).append(true).open(path)?;
        let mut line = serde_json::to_vec(event).map_err(io::Error::other)?;
        line.push(b'\n');
        f.write_all(&line)?;
        f.sync_data()?;
        Ok(())
    }

    fn dataset_dir(&self, id: &str) -> PathBuf {
        self.root.join("datasets").join(id)
    }

    /// Validate and persist a CSV. The id is content-derived, so ingesting the
    /// same bytes twice yields the same dataset.
    pub fn ingest(&self, csv: &[u8], schema_json: &str, source: &str) -> StoreResult<DatasetRecord> {
        let schema = Schema::from_json(schema_json)?;
        let ds = ingest_csv(csv, &schema, source)?;
        let canonical = serde_json::to_vec(&schema).map_err(io::Error::other)?;
        let mut h = Sha256::new();
        h.update(&canonical);
        h.update([0u8]);
        h.update(source.as_bytes());
        h.update([0u8]);
        h.update(csv);
        let id = hex::encode(&h.finalize()[..8]);
        let record = DatasetRecord {
            schema_version: SCHEMA_VERSION,
            id: id.clone(),
            source: source.to_owned(),
            n: ds.len() as u64,
            schema,
        };
        let dir = self.dataset_dir(&id);
        if !dir.join("dataset.json").exists() {
            fs::create_dir_all(&dir)?;
            fs::write(dir.join("data.csv"), csv)?;
            fs::write(dir.join("schema.json"), &canonical)?;
            fs::write(
                dir.join("dataset.json"),
                serde_json::to_vec_pretty(&record).map_err(io::Error::other)?,
            )?;
        }
        self.datasets.write().unwrap().insert(id, Arc::new(ds));
        Ok(record)
    }

    pub fn dataset_record(&self, id: &str) -> StoreResult<DatasetRecord> {
        if !valid_id(id) {
            return Err(StoreError::DatasetNotFound(id.to_owned()));
        }
        let path = self.dataset_dir(id).join("dataset.json");
        let bytes = fs::read(&path).map_err(|e| match e.kind() {
            io::ErrorKind::NotFound => StoreError::DatasetNotFound(id.to_owned()),
            _ => e.into(),
        })?;
        serde_json::from_slice(&bytes).map_err(|e| corrupt(&path, e.to_string()))
    }

    pub fn dataset(&self, id: &str) -> StoreResult<Arc<Dataset>> {
        if let Some(ds) = self.datasets.read().unwrap().get(id) {
            return Ok(ds.clone());
        }
        let record = self.dataset_record(id)?;
        let csv = fs::read(self.dataset_dir(id).join("data.csv"))?;
        let ds = Arc::new(ingest_csv(&csv, &record.schema, &record.source)?);
        self.datasets.write().unwrap().insert(id.to_owned(), ds.clone());
        Ok(ds)
    }

    pub fn create_session(&self, req: CreateSession) -> StoreResult<SessionView> {
        let ds = self.dataset(&req.dataset_id)?;
        let seed = req.seed.unwrap_or_else(rand::random);
        let id = uuid::Uuid::new_v4().simple().to_string();
        let session = Session::create(
            id.clone(),
            req.dataset_id.clone(),
            &ds,
            req.queries.clone(),
            req.total_budget,
            RandomSeed(seed),
        )?
        .with_replicates(req.replicates)?;
        self.append(
            &id,
            &Event::Created {
                session_id: id.clone(),
                dataset_id: req.dataset_id,
                queries: req.queries,
                total_budget: req.total_budget,
                seed,
                replicates: req.replicates,
                at: Utc::now(),
            },
        )?;
        let view = session.view();
        self.sessions
            .write()
            .unwrap()
            .insert(id, Arc::new(RwLock::new(session)));
        Ok(view)
    }

    fn session(&self, id: &str) -> StoreResult<Shared> {
        self.sessions
            .read()
            .unwrap()
            .get(id)
            .cloned()
            .ok_or_else(|| StoreError::SessionNotFound(id.to_owned()))
    }

    pub fn session_ids(&self) -> Vec<String> {
        let mut ids: Vec<String> = self.sessions.read().unwrap().keys().cloned().collect();
        ids.sort();
        ids
    }

    pub fn view(&self, id: &str) -> StoreResult<SessionView> {
        Ok(self.session(id)?.read().unwrap().view())
    }

    pub fn whatif(&self, id: &str, req: &WhatIfRequest) -> StoreResult<WhatIfPayload> {
        Ok(self.session(id)?.read().unwrap().whatif(req)?)
    }

    pub fn risk(&self, id: &str) -> StoreResult<RiskSummary> {
        Ok(self.session(id)?.read().unwrap().risk_summary()?)
    }

    pub fn update_budget(&self, id: &str, mutation: &BudgetMutation) -> StoreResult<BudgetUpdate> {
        let shared = self.session(id)?;
        let mut session = shared.write().unwrap();
        let mut next = session.clone();
        let update = next.update_budget(mutation)?;
        self.append(
            id,
            &Event::Budget {
                mutation: mutation.clone(),
                at: Utc::now(),
            },
        )?;
        *session = next;
        Ok(update)
    }

    /// Finalize under the session's write lock. The log is written before the
    /// in-memory state flips, so a crash never loses a document that was
    /// handed out.
    pub fn finalize(&self, id: &str) -> StoreResult<Finalized> {
        let shared = self.session(id)?;
        let mut session = shared.write().unwrap();
        if session.is_finalized() {
            return Ok(session.finalize(Utc::now())?);
        }
        let mut next = session.clone();
        let out = next.finalize(Utc::now())?;
        self.append(
            id,
            &Event::Finalized {
                document: out.document.clone(),
                at: out.document.created_at,
            },
        )?;
        *session = next;
        Ok(out)
    }

    pub fn release(&self, id: &str) -> StoreResult<ReleaseDocument> {
        Ok(self.session(id)?.read().unwrap().release()?.clone())
    }

    /// Laplace draws the session has spent on its release.
    pub fn release_draw_count(&self, id: &str) -> StoreResult<u64> {
        Ok(self.session(id)?.read().unwrap().release_draw_count())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use dp_planner::budget::Mode;

    const SCHEMA: &str = r#"{"g": {"type": "categorical"}, "x": {"type": "boolean", "is_phi": true}}"#;

    fn csv() -> String {
        let mut s = String::from("g,x\n");
        for i in 0..60 {
            s.push_str(&format!("{},{}\n", ["a", "b"][i % 2], i % 3 == 0));
        }
        s
    }

    fn request(dataset_id: &str) -> CreateSession {
        serde_json::from_value(serde_json::json!({
            "dataset_id": dataset_id,
            "queries": [
                {"name": "by_g", "group_by": "g", "where": {"attribute": "x", "comparator": "=", "literal": true}, "extrapolation": true},
                {"name": "all"}
            ],
            "total_budget": 1.0,
            "seed": 9,
            "replicates": 20
        }))
        .unwrap()
    }

    #[test]
    fn ingest_is_content_addressed() {
        let dir = tempfile::tempdir().unwrap();
        let store = Store::open(dir.path()).unwrap();
        let a = store.ingest(csv().as_bytes(), SCHEMA, "unit").unwrap();
        let b = store.ingest(csv().as_bytes(), SCHEMA, "unit").unwrap();
        assert_eq!(a, b);
        assert_eq!(a.n, 60);
        assert!(dir.path().join("datasets").join(&a.id).join("data.csv").exists());
        assert!(matches!(store.dataset("nope"), Err(StoreError::DatasetNotFound(_))));
        assert!(matches!(store.dataset("../x"), Err(StoreError::DatasetNotFound(_))));
    }

    #[test]
    fn sessions_survive_reopen() {
        let dir = tempfile::tempdir().unwrap();
        let (id, doc) = {
            let store = Store::open(dir.path()).unwrap();
            let ds = store.ingest(csv().as_bytes(), SCHEMA, "unit").unwrap();
            let view = store.create_session(request(&ds.id)).unwrap();
            store
                .update_budget(&view.id, &BudgetMutation::SetMode { mode: Mode::Responsive })
                .unwrap();
            store
                .update_budget(&view.id, &BudgetMutation::SetEpsilon { query: "by_g".into(), value: 0.7 })
                .unwrap();
            assert!(store
                .update_budget(&view.id, &BudgetMutation::SetTotal { value: 99.0 })
                .is_err());
            let doc = store.finalize(&view.id).unwrap().document;
            (view.id, doc)
        };
        let store = Store::open(dir.path()).unwrap();
        let view = store.view(&id).unwrap();
        assert!(view.finalized);
        assert!((view.allocation.epsilon("all").unwrap() - 0.3).abs() < 1e-12);
        assert_eq!(store.release(&id).unwrap(), doc);
        let again = store.finalize(&id).unwrap();
        assert!(again.idempotent_replay);
        assert_eq!(again.document, doc);
        assert_eq!(store.release_draw_count(&id).unwrap(), 0);
        let lines = fs::read_to_string(dir.path().join("sessions").join(format!("{id}.jsonl"))).unwrap();
        assert_eq!(lines.lines().count(), 4);
    }

    #[test]
    fn corrupt_log_is_reported() {
        let dir = tempfile::tempdir().unwrap();
        fs::create_dir_all(dir.path().join("sessions")).unwrap();
        fs::write(dir.path().join("sessions").join("x.jsonl"), "{not json\n").unwrap();
        assert!(matches!(Store::open(dir.path()), Err(StoreError::Corrupt { .. })));
    }
}
