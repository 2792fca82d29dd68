//! HTTP edit service over a corpus of annotation-graph documents.
//!
//! Mutations on one document are serialized through its queue; reads serve
//! the last committed snapshot without waiting for the queue.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;
use std::sync::{Arc, RwLock};

use axum::extract::{Path as UrlPath, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;
use tokio::sync::Mutex;

use treegraph::constituency::read_tree;
use treegraph::formats::{self, native, FormatError, FormatId, Sentence};
use treegraph::graph::{Family, GraphDelta};
use treegraph::propbank;
use treegraph::script::{Command, EditSession, ScriptError, OPERATIONS};
use treegraph::{AnnotationGraph, ArcId, ArcType};

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error("{0}")]
    NotFound(String),
    #[error("revision {given} is stale; the document is at revision {current}")]
    Stale { given: u64, current: u64 },
    #[error("{0}")]
    BadRequest(String),
    #[error("{message}")]
    Precondition { code: &'static str, message: String },
}

impl ServiceError {
    fn status(&self) -> StatusCode {
        match self {
            ServiceError::NotFound(_) => StatusCode::NOT_FOUND,
            ServiceError::Stale { .. } => StatusCode::CONFLICT,
            ServiceError::BadRequest(_) => StatusCode::BAD_REQUEST,
            ServiceError::Precondition { .. } => StatusCode::UNPROCESSABLE_ENTITY,
        }
    }

    pub fn code(&self) -> &'static str {
        match self {
            ServiceError::NotFound(_) => "not_found",
            ServiceError::Stale { .. } => "stale_revision",
            ServiceError::BadRequest(_) => "bad_request",
            ServiceError::Precondition { code, .. } => code,
        }
    }
}

impl From<ScriptError> for ServiceError {
    fn from(e: ScriptError) -> Self {
        let code = match &e {
            ScriptError::Parse(_) => return ServiceError::BadRequest(e.to_string()),
            ScriptError::Selector { .. } => "no_such_node",
            ScriptError::NoSelection => "no_selection",
            ScriptError::Edit(_) => "precondition_failed",
            ScriptError::Prop(_) => "proposition_error",
            ScriptError::Graph(_) => "graph_error",
        };
        ServiceError::Precondition {
            code,
            message: e.to_string(),
        }
    }
}

impl IntoResponse for ServiceError {
    fn into_response(self) -> Response {
        let body = json!({ "code": self.code(), "message": self.to_string() });
        (self.status(), Json(body)).into_response()
    }
}

#[derive(Debug, Error)]
pub enum LoadError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Format { path: String, source: FormatError },
    #[error("{0}: unknown file type")]
    UnknownType(String),
    #[error("duplicate document id {0:?}")]
    Duplicate(String),
}

/// One entry of a document's operation log.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
pub struct LogEntry {
    /// The revision this entry produced.
    pub revision: u64,
    /// 1-based sentence the command ran on; 0 for undo.
    pub sentence: usize,
    /// The command in edit-script syntax, or `undo`.
    pub command: String,
}

struct UndoEntry {
    sentence: usize,
    root: ArcId,
    delta: GraphDelta,
    pending: Option<propbank::Proposition>,
}

/// Mutable editing state of one document.
pub struct Session {
    origin: Vec<Sentence>,
    edit: EditSession,
    revision: u64,
    undo: Vec<UndoEntry>,
    log: Vec<LogEntry>,
}

impl Session {
    pub fn new(sentences: Vec<Sentence>) -> Session {
        Session {
            origin: sentences.clone(),
            edit: EditSession::new(sentences),
            revision: 0,
            undo: Vec::new(),
            log: Vec::new(),
        }
    }

    pub fn revision(&self) -> u64 {
        self.revision
    }

    pub fn sentences(&self) -> &[Sentence] {
        &self.edit.sentences
    }

    pub fn log(&self) -> &[LogEntry] {
        &self.log
    }

    /// Applies one command to a 1-based sentence. Nothing changes on error.
    pub fn apply(&mut self, sentence: usize, cmd: &Command) -> Result<(), ServiceError> {
        if cmd.op == "sentence" {
            return Err(ServiceError::BadRequest(
                "choose the sentence with the request's sentence field".into(),
            ));
        }
        let index = self.sentence_index(sentence)?;
        if index != self.edit.current() {
            self.edit.apply(&Command::from_tokens("sentence", &[sentence.to_string()])?)?;
        }
        let before = self.edit.sentences[index].clone();
        let pending = self.edit.pending().cloned();
        self.edit.apply(cmd)?;
        let after = &self.edit.sentences[index];
        self.undo.push(UndoEntry {
            sentence: index,
            root: before.root,
            delta: before.graph.delta_to(&after.graph),
            pending,
        });
        self.revision += 1;
        self.log.push(LogEntry {
            revision: self.revision,
            sentence,
            command: cmd.to_string(),
        });
        Ok(())
    }

    /// Reverts the most recent mutation. This is itself a mutation.
    pub fn undo(&mut self) -> Result<(), ServiceError> {
        let entry = self.undo.pop().ok_or(ServiceError::Precondition {
            code: "nothing_to_undo",
            message: "there is nothing to undo".into(),
        })?;
        let s = &mut self.edit.sentences[entry.sentence];
        s.graph.apply_delta(&entry.delta);
        s.root = entry.root;
        self.edit.set_pending(entry.pending);
        self.revision += 1;
        self.log.push(LogEntry {
            revision: self.revision,
            sentence: 0,
            command: "undo".into(),
        });
        Ok(())
    }

    fn sentence_index(&self, sentence: usize) -> Result<usize, ServiceError> {
        if sentence == 0 || sentence > self.edit.sentences.len() {
            return Err(ServiceError::NotFound(format!("no sentence {sentence}")));
        }
        Ok(sentence - 1)
    }

    /// Re-runs the operation log from revision 0.
    pub fn replay(&self) -> Result<Session, ServiceError> {
        let mut fresh = Session::new(self.origin.clone());
        for entry in &self.log {
            if entry.command == "undo" {
                fresh.undo()?;
            } else {
                let cmd = Command::parse_line(&entry.command)?
                    .ok_or_else(|| ServiceError::BadRequest("empty log entry".into()))?;
                fresh.apply(entry.sentence, &cmd)?;
            }
        }
        Ok(fresh)
    }
}

/// What readers see: the state as of the last committed mutation.
#[derive(Debug, Clone)]
pub struct Snapshot {
    pub revision: u64,
    pub sentences: Vec<Sentence>,
}

pub struct Document {
    pub id: String,
    pub format: FormatId,
    queue: Mutex<Session>,
    committed: RwLock<Arc<Snapshot>>,
}

impl Document {
    pub fn new(id: &str, format: FormatId, sentences: Vec<Sentence>) -> Document {
        let snapshot = Snapshot {
            revision: 0,
            sentences: sentences.clone(),
        };
        Document {
            id: id.to_string(),
            format,
            queue: Mutex::new(Session::new(sentences)),
            committed: RwLock::new(Arc::new(snapshot)),
        }
    }

    pub fn snapshot(&self) -> Arc<Snapshot> {
        self.committed.read().expect("snapshot lock").clone()
    }

    /// Runs `f` with exclusive access to the session, then publishes the
    /// result if the revision moved.
    pub async fn mutate<T>(
        &self,
        f: impl FnOnce(&mut Session) -> Result<T, ServiceError>,
    ) -> Result<T, ServiceError> {
        let mut session = self.queue.lock().await;
        let out = f(&mut session)?;
        let snapshot = Snapshot {
            revision: session.revision,
            sentences: session.sentences().to_vec(),
        };
        *self.committed.write().expect("snapshot lock") = Arc::new(snapshot);
        Ok(out)
    }

    pub async fn log(&self) -> Vec<LogEntry> {
        self.queue.lock().await.log().to_vec()
    }

    /// Replays the log and checks that it reproduces the committed state.
    pub async fn replay_matches(&self) -> Result<bool, ServiceError> {
        let session = self.queue.lock().await;
        let replayed = session.replay()?;
        Ok(replayed.sentences() == session.sentences() && replayed.revision == session.revision)
    }
}

#[derive(Default)]
pub struct Store {
    docs: BTreeMap<String, Arc<Document>>,
}

impl Store {
    pub fn new() -> Store {
        Store::default()
    }

    pub fn insert(&mut self, doc: Document) -> Result<(), LoadError> {
        if self.docs.contains_key(&doc.id) {
            return Err(LoadError::Duplicate(doc.id));
        }
        self.docs.insert(doc.id.clone(), Arc::new(doc));
        Ok(())
    }

    pub fn get(&self, id: &str) -> Result<Arc<Document>, ServiceError> {
        self.docs
            .get(id)
            .cloned()
            .ok_or_else(|| ServiceError::NotFound(format!("no document {id:?}")))
    }

    pub fn documents(&self) -> impl Iterator<Item = &Arc<Document>> {
        self.docs.values()
    }

    /// Loads one file, or every file with a known extension in a directory.
    /// `fallback` is used for files whose extension says nothing.
    pub fn load(path: &Path, fallback: Option<FormatId>) -> Result<Store, LoadError> {
        let io = |e| LoadError::Io {
            path: path.display().to_string(),
            source: e,
        };
        let mut store = Store::new();
        if path.is_dir() {
            let mut entries: Vec<_> = std::fs::read_dir(path)
                .map_err(io)?
                .filter_map(Result::ok)
                .map(|e| e.path())
                .filter(|p| p.is_file())
                .collect();
            entries.sort();
            for p in entries {
                if format_of(&p).or(fallback).is_some() {
                    store.insert(load_file(&p, fallback)?)?;
                }
            }
        } else {
            store.insert(load_file(path, fallback)?)?;
        }
        Ok(store)
    }
}

fn format_of(path: &Path) -> Option<FormatId> {
    path.extension()
        .and_then(|e| e.to_str())
        .and_then(FormatId::from_extension)
}

fn load_file(path: &Path, fallback: Option<FormatId>) -> Result<Document, LoadError> {
    let name = path.display().to_string();
    let format = format_of(path)
        .or(fallback)
        .ok_or_else(|| LoadError::UnknownType(name.clone()))?;
    let text = std::fs::read_to_string(path).map_err(|source| LoadError::Io {
        path: name.clone(),
        source,
    })?;
    let sentences = formats::read(format, &text).map_err(|source| LoadError::Format {
        path: name.clone(),
        source,
    })?;
    let id = path
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("document")
        .to_string();
    Ok(Document::new(&id, format, sentences))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Serialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Layer {
    #[default]
    Constituency,
    Dependency,
    Propbank,
}

#[derive(Debug, Deserialize)]
pub struct TreeQuery {
    #[serde(default)]
    pub layer: Layer,
    #[serde(default = "first")]
    pub sentence: usize,
}

fn first() -> usize {
    1
}

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(untagged)]
pub enum Selectors {
    #[default]
    None,
    One(String),
    Many(Vec<String>),
}

impl Selectors {
    fn tokens(&self) -> Vec<String> {
        match self {
            Selectors::None => Vec::new(),
            Selectors::One(s) => vec![s.clone()],
            Selectors::Many(v) => v.clone(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
pub struct OpRequest {
    pub revision: u64,
    pub op: String,
    #[serde(default)]
    pub selector: Selectors,
    #[serde(default)]
    pub params: BTreeMap<String, String>,
    #[serde(default = "first")]
    pub sentence: usize,
}

impl OpRequest {
    pub fn command(&self) -> Result<Command, ServiceError> {
        let mut tokens = self.selector.tokens();
        if let Some(bad) = tokens.iter().find(|t| t.contains('=')) {
            return Err(ServiceError::BadRequest(format!("selector {bad:?} contains '='")));
        }
        tokens.extend(self.params.iter().map(|(k, v)| format!("{k}={v}")));
        Ok(Command::from_tokens(&self.op, &tokens)?)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct NodeView {
    pub id: String,
    pub kind: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub form: Option<String>,
    pub fields: BTreeMap<String, String>,
    pub start: usize,
    pub end: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub parent: Option<String>,
    pub children: Vec<NodeView>,
}

fn node_view(g: &AnnotationGraph, id: ArcId) -> NodeView {
    let arc = g.arc(id).expect("arc listed by the graph");
    let (start, end) = g.span(id).unwrap_or((0, 0));
    let children = g
        .children_in_order(id)
        .into_iter()
        .filter(|c| g.arc(*c).map(|a| a.kind.family() == Family::Syntax).unwrap_or(false))
        .map(|c| node_view(g, c))
        .collect();
    NodeView {
        id: id.to_string(),
        kind: arc.kind.as_str(),
        label: arc.label().map(str::to_string),
        form: arc.form().map(str::to_string),
        fields: arc.fields.iter().map(|(k, v)| (k.clone(), v.clone())).collect(),
        start,
        end,
        parent: arc.parent.map(|p| p.to_string()),
        children,
    }
}

fn ids(s: &BTreeSet<ArcId>) -> Vec<String> {
    s.iter().map(ToString::to_string).collect()
}

fn roles<'a>(m: impl IntoIterator<Item = (&'a String, &'a BTreeSet<ArcId>)>) -> Vec<Value> {
    m.into_iter()
        .map(|(k, v)| json!({ "label": k, "nodes": ids(v) }))
        .collect()
}

fn proposition_views(g: &AnnotationGraph) -> Result<Vec<Value>, ServiceError> {
    let props = propbank::extract(g).map_err(|e| ServiceError::Precondition {
        code: "proposition_error",
        message: e.to_string(),
    })?;
    Ok(props
        .iter()
        .map(|p| {
            json!({
                "predicate": ids(&p.predicate),
                "arguments": roles(&p.arguments),
                "modifiers": roles(&p.modifiers),
                "equivalences": p.equivalences.iter().map(ids).collect::<Vec<_>>(),
                "text": propbank::format_proposition(g, p),
            })
        })
        .collect())
}

/// The tree view of one sentence plus its native serialization.
pub fn tree_view(
    id: &str,
    snapshot: &Snapshot,
    layer: Layer,
    sentence: usize,
) -> Result<Value, ServiceError> {
    let s = sentence
        .checked_sub(1)
        .and_then(|i| snapshot.sentences.get(i))
        .ok_or_else(|| ServiceError::NotFound(format!("no sentence {sentence}")))?;
    let g = &s.graph;
    let nodes: Vec<NodeView> = g.top_level().into_iter().map(|t| node_view(g, t)).collect();
    let mut view = json!({
        "document": id,
        "revision": snapshot.revision,
        "sentence": sentence,
        "sentences": snapshot.sentences.len(),
        "layer": layer,
        "root": s.root.to_string(),
        "surface": g.surface(),
        "nodes": nodes,
        "native": native::to_json(g),
    });
    match layer {
        Layer::Constituency => {
            view["bracketed"] = match read_tree(g, s.root) {
                Ok(t) => Value::String(t.to_string()),
                Err(_) => Value::Null,
            };
        }
        Layer::Dependency => {
            let heads: Vec<Value> = g
                .terminals()
                .into_iter()
                .filter_map(|t| g.arc(t).ok())
                .filter(|a| a.kind == ArcType::Word)
                .map(|a| json!({ "word": a.id.to_string(), "head": a.parent.map(|p| p.to_string()) }))
                .collect();
            view["heads"] = Value::Array(heads);
        }
        Layer::Propbank => {
            view["propositions"] = Value::Array(proposition_views(g)?);
        }
    }
    Ok(view)
}

type Shared = Arc<Store>;

async fn list(State(store): State<Shared>) -> Json<Value> {
    let docs: Vec<Value> = store
        .documents()
        .map(|d| {
            let snap = d.snapshot();
            json!({
                "id": d.id,
                "format": d.format.as_str(),
                "sentences": snap.sentences.len(),
                "revision": snap.revision,
            })
        })
        .collect();
    Json(Value::Array(docs))
}

async fn operations() -> Json<Value> {
    Json(json!(OPERATIONS))
}

async fn tree(
    State(store): State<Shared>,
    UrlPath(id): UrlPath<String>,
    Query(q): Query<TreeQuery>,
) -> Result<Json<Value>, ServiceError> {
    let doc = store.get(&id)?;
    Ok(Json(tree_view(&id, &doc.snapshot(), q.layer, q.sentence)?))
}

async fn op(
    State(store): State<Shared>,
    UrlPath(id): UrlPath<String>,
    Json(req): Json<OpRequest>,
) -> Result<Json<Value>, ServiceError> {
    let doc = store.get(&id)?;
    let cmd = req.command()?;
    let revision = doc
        .mutate(|s| {
            if req.revision != s.revision() {
                return Err(ServiceError::Stale {
                    given: req.revision,
                    current: s.revision(),
                });
            }
            s.apply(req.sentence, &cmd)?;
            Ok(s.revision())
        })
        .await
        .inspect_err(|e| tracing::debug!(document = %id, op = %req.op, "refused: {e}"))?;
    tracing::info!(document = %id, revision, "applied {cmd}");
    let view = tree_view(&id, &doc.snapshot(), Layer::Constituency, req.sentence)?;
    Ok(Json(json!({ "revision": revision, "tree": view })))
}

#[derive(Debug, Deserialize, Default)]
pub struct UndoQuery {
    #[serde(default = "first")]
    pub sentence: usize,
}

async fn undo(
    State(store): State<Shared>,
    UrlPath(id): UrlPath<String>,
    Query(q): Query<UndoQuery>,
) -> Result<Json<Value>, ServiceError> {
    let doc = store.get(&id)?;
    let revision = doc.mutate(|s| s.undo().map(|_| s.revision())).await?;
    tracing::info!(document = %id, revision, "undo");
    let view = tree_view(&id, &doc.snapshot(), Layer::Constituency, q.sentence)?;
    Ok(Json(json!({ "revision": revision, "tree": view })))
}

async fn log(
    State(store): State<Shared>,
    UrlPath(id): UrlPath<String>,
) -> Result<Json<Value>, ServiceError> {
    let doc = store.get(&id)?;
    let entries = doc.log().await;
    Ok(Json(json!({ "revision": doc.snapshot().revision, "entries": entries })))
}

pub fn router(store: Store) -> Router {
    Router::new()
        .route("/documents", get(list))
        .route("/operations", get(operations))
        .route("/documents/{id}/tree", get(tree))
        .route("/documents/{id}/op", post(op))
        .route("/documents/{id}/undo", post(undo))
        .route("/documents/{id}/log", get(log))
        .with_state(Arc::new(store))
}

/// Serves `store` on `listener` until the process stops.
pub async fn serve(listener: tokio::net::TcpListener, store: Store) -> std::io::Result<()> {
    axum::serve(listener, router(store)).await
}
