//! Session store: every piece of session state lives here, never in handlers.

use std::collections::{BTreeMap, HashMap};
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, RwLock};
use std::time::{SystemTime, UNIX_EPOCH};

use montage_core::graph::MemoryGraph;
use montage_core::lexicon::Lexicon;
use montage_core::session::{config_digest, AssistantResponse, Session, SessionEvent};
use montage_core::story::StoryEngine;
use montage_core::{Error, Result};
use tokio::sync::Mutex;

/// A graph with the lexicon bound to its vocabulary.
pub struct Grounding {
    pub graph: Arc<MemoryGraph>,
    pub lexicon: Lexicon,
}

#[derive(Debug)]
pub enum StoreError {
    UnknownSession(String),
    UnknownGraph(String),
    Core(Error),
}

impl From<Error> for StoreError {
    fn from(e: Error) -> Self {
        StoreError::Core(e)
    }
}

type Handle = Arc<Mutex<Session>>;

pub struct SessionStore {
    graphs: BTreeMap<String, Grounding>,
    default_graph: String,
    engine: StoryEngine,
    sessions: RwLock<HashMap<String, Handle>>,
    log_dir: Option<PathBuf>,
    counter: AtomicU64,
    /// Distinguishes ids across server restarts sharing a log directory.
    instance: String,
}

fn now() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0, |d| d.as_secs())
}

impl SessionStore {
    /// `graphs` must be non-empty; the first one is the default.
    pub fn new(graphs: Vec<MemoryGraph>, log_dir: Option<PathBuf>) -> Result<Self> {
        let default_graph = graphs.first().map(|g| g.graph_id.clone()).ok_or_else(|| {
            Error::Validation("the server needs at least one memory graph".into())
        })?;
        let mut grounded = BTreeMap::new();
        for g in graphs {
            let lexicon = Lexicon::for_vocabulary(&g.vocabulary)?;
            grounded.insert(
                g.graph_id.clone(),
                Grounding {
                    graph: Arc::new(g),
                    lexicon,
                },
            );
        }
        if let Some(dir) = &log_dir {
            std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        let nanos = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map_or(0, |d| d.as_nanos());
        let store = SessionStore {
            graphs: grounded,
            default_graph,
            engine: StoryEngine::default(),
            sessions: RwLock::new(HashMap::new()),
            log_dir,
            counter: AtomicU64::new(0),
            instance: format!("{:08x}", (nanos as u64) as u32),
        };
        store.recover()?;
        Ok(store)
    }

    pub fn engine(&self) -> &StoryEngine {
        &self.engine
    }

    pub fn grounding(&self, graph_id: Option<&str>) -> std::result::Result<&Grounding, StoreError> {
        let id = graph_id.unwrap_or(&self.default_graph);
        self.graphs
            .get(id)
            .ok_or_else(|| StoreError::UnknownGraph(id.to_string()))
    }

    fn log_path(&self, session_id: &str) -> Option<PathBuf> {
        self.log_dir
            .as_ref()
            .map(|d| d.join(format!("{session_id}.jsonl")))
    }

    fn append(&self, session_id: &str, event: &SessionEvent) -> Result<()> {
        let Some(path) = self.log_path(session_id) else {
            return Ok(());
        };
        let mut file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&path)
            .map_err(|e| Error::io(&path, e))?;
        let mut line = serde_json::to_vec(event).expect("events serialize");
        line.push(b'\n');
        file.write_all(&line).map_err(|e| Error::io(&path, e))
    }

    /// Reloads live sessions from the log directory.
    fn recover(&self) -> Result<()> {
        let Some(dir) = &self.log_dir else {
            return Ok(());
        };
        let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)
            .map_err(|e| Error::io(dir, e))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "jsonl"))
            .collect();
        paths.sort();
        let mut sessions = self.sessions.write().expect("session map lock");
        for path in paths {
            let events = read_log(&path)?;
            if events.iter().any(|e| matches!(e, SessionEvent::Deleted)) {
                continue;
            }
            let Some(SessionEvent::Created { graph_id, .. }) = events.first() else {
                return Err(Error::Input(format!(
                    "{}: log does not start with a created event",
                    path.display()
                )));
            };
            let Some(g) = self.graphs.get(graph_id) else {
                return Err(Error::Input(format!(
                    "{}: unknown graph {graph_id}",
                    path.display()
                )));
            };
            let session = Session::restore(&events, g.graph.clone(), &self.engine)?;
            sessions.insert(session.session_id.clone(), Arc::new(Mutex::new(session)));
        }
        Ok(())
    }

    pub fn create(&self, graph_id: Option<&str>) -> std::result::Result<Session, StoreError> {
        let g = self.grounding(graph_id)?;
        let n = self.counter.fetch_add(1, Ordering::Relaxed) + 1;
        let id = format!("s{}-{n:04}", self.instance);
        let session = Session::new(
            id.clone(),
            g.graph.clone(),
            now(),
            config_digest(&self.engine, &g.lexicon),
        );
        self.append(&id, &session.created_event())?;
        self.sessions
            .write()
            .expect("session map lock")
            .insert(id, Arc::new(Mutex::new(session.clone())));
        Ok(session)
    }

    fn handle(&self, session_id: &str) -> std::result::Result<Handle, StoreError> {
        self.sessions
            .read()
            .expect("session map lock")
            .get(session_id)
            .cloned()
            .ok_or_else(|| StoreError::UnknownSession(session_id.to_string()))
    }

    /// Runs `f` with exclusive access to one session.
    pub async fn with_session<T>(
        &self,
        session_id: &str,
        f: impl FnOnce(&Session) -> T,
    ) -> std::result::Result<T, StoreError> {
        let handle = self.handle(session_id)?;
        let session = handle.lock().await;
        Ok(f(&session))
    }

    /// Handles one message; messages to the same session are serialized.
    pub async fn message(
        &self,
        session_id: &str,
        text: &str,
    ) -> std::result::Result<AssistantResponse, StoreError> {
        let handle = self.handle(session_id)?;
        let mut session = handle.lock().await;
        let g = self.grounding(Some(&session.graph.graph_id))?;
        let mut draft = session.clone();
        let (response, event) = draft.handle_message(text, &self.engine, &g.lexicon)?;
        // Persist before committing so the log never lags the live state.
        self.append(session_id, &event)?;
        *session = draft;
        Ok(response)
    }

    pub async fn delete(&self, session_id: &str) -> std::result::Result<(), StoreError> {
        let handle = self.handle(session_id)?;
        let _guard = handle.lock().await;
        self.append(session_id, &SessionEvent::Deleted)?;
        self.sessions
            .write()
            .expect("session map lock")
            .remove(session_id);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.sessions.read().expect("session map lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

pub fn read_log(path: &Path) -> Result<Vec<SessionEvent>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (index, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| Error::Record {
            index,
            message: e.to_string(),
        })?);
    }
    Ok(out)
}
