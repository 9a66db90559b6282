//! JSON-over-HTTP API: define an activity, confirm it, step the plan and
//! ask questions while it runs.
//!
//! With a log directory every session appends its events to `{id}.jsonl`.
//! Mutating commands are logged as `command` events together with their
//! reply, so [`AppState::open`] can rebuild each session by replaying them.

use std::collections::{BTreeMap, HashMap};
use std::fs::{self, File, OpenOptions};
use std::io::Write;
use std::path::{Path as FsPath, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};
use std::time::{SystemTime, UNIX_EPOCH};

use axum::body::Bytes;
use axum::extract::{Path, Query, Request, State};
use axum::http::{header, StatusCode};
use axum::middleware::{self, Next};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use tower_http::services::ServeDir;

use procmon_core::executor::{ExecError, Session, StepOutcome};
use procmon_core::llmclient::{BackendConfig, LlmClient};
use procmon_core::ltlf::{parse_ltlf, Formula};
use procmon_core::monitor::{
    ask, extract_fluents, run_experiments, score, Admissible, ExperimentConfig, MonitorError, QueryContext, Question,
    Scenario,
};
use procmon_core::nlfront::{Candidate, Frontend, NlError, SymbolAlphabet, Translation};
use procmon_core::pipeline::{plan_compiled, PipelineError, Planned, Workspace};
use procmon_core::planner::{Chooser, InteractiveChooser, PlanError, ScriptEntry, SeededChooser, SolveOptions};

use crate::AppConfig;

#[derive(Clone, Debug, Serialize)]
pub struct ApiError {
    #[serde(skip)]
    pub status: StatusCode,
    pub code: &'static str,
    pub message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub candidates: Option<Vec<Candidate>>,
}

impl ApiError {
    fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        ApiError {
            status,
            code,
            message: message.into(),
            candidates: None,
        }
    }

    fn bad(code: &'static str, message: impl Into<String>) -> Self {
        ApiError::new(StatusCode::BAD_REQUEST, code, message)
    }

    fn conflict(code: &'static str, message: impl Into<String>) -> Self {
        ApiError::new(StatusCode::CONFLICT, code, message)
    }

    fn not_found(what: &str, id: &str) -> Self {
        ApiError::new(StatusCode::NOT_FOUND, "not_found", format!("no {what} `{id}`"))
    }

    fn internal(message: impl Into<String>) -> Self {
        ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", message)
    }

    fn unprocessable(code: &'static str, message: impl Into<String>) -> Self {
        ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, code, message)
    }
}

impl From<NlError> for ApiError {
    fn from(e: NlError) -> Self {
        match e {
            NlError::Unresolved { ref candidates, .. } => ApiError {
                candidates: Some(candidates.clone()),
                ..ApiError::bad("unresolved", e.to_string())
            },
            NlError::Backend(b) => ApiError::new(StatusCode::BAD_GATEWAY, "backend", b.to_string()),
            e => ApiError::bad("translation_failed", e.to_string()),
        }
    }
}

impl From<PipelineError> for ApiError {
    fn from(e: PipelineError) -> Self {
        match e {
            PipelineError::UnknownAtom(_) => ApiError::bad("unknown_atom", e.to_string()),
            PipelineError::Plan(PlanError::Unsolvable) => ApiError::unprocessable("unsolvable", e.to_string()),
            PipelineError::Pddl(_) => ApiError::bad("parse_error", e.to_string()),
            PipelineError::Landmarks(_) => ApiError::bad("bad_landmarks", e.to_string()),
            e => ApiError::unprocessable("planning_failed", e.to_string()),
        }
    }
}

impl From<MonitorError> for ApiError {
    fn from(e: MonitorError) -> Self {
        match e {
            MonitorError::EmptyQuestion => ApiError::bad("empty_question", e.to_string()),
            MonitorError::Backend(_) => ApiError::new(StatusCode::BAD_GATEWAY, "backend", e.to_string()),
            e => ApiError::unprocessable("query_failed", e.to_string()),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(json!({ "error": self }))).into_response()
    }
}

type ApiResult = Result<Json<Value>, ApiError>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Defined,
    Translated,
    Compiled,
    Planned,
    Executing,
    Done,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChoiceMode {
    /// Nondeterministic outcomes come from the caller.
    #[default]
    Interactive,
    Seeded,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ServiceEvent {
    pub seq: u64,
    pub timestamp_ms: u64,
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t: Option<usize>,
    pub data: Value,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(default)]
struct DomainBody {
    #[serde(skip_serializing_if = "Option::is_none")]
    fixture: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    domain: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    problem: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    landmarks: Option<String>,
}

impl DomainBody {
    fn build(&self) -> Result<Workspace, ApiError> {
        if let Some(name) = &self.fixture {
            return match name.as_str() {
                "vineyard" => Ok(Workspace::vineyard()),
                other => Err(ApiError::bad("unknown_fixture", format!("no fixture `{other}`"))),
            };
        }
        let (Some(d), Some(p)) = (&self.domain, &self.problem) else {
            return Err(ApiError::bad("bad_request", "give `fixture` or both `domain` and `problem`"));
        };
        let alphabet = match &self.landmarks {
            Some(t) => SymbolAlphabet::parse(t).map_err(|e| ApiError::bad("bad_landmarks", e.to_string()))?,
            None => SymbolAlphabet::default(),
        };
        Ok(Workspace::new(d, p, alphabet)?)
    }
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(default)]
struct ActivityBody {
    #[serde(skip_serializing_if = "Option::is_none")]
    sentence: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    ltlf: Option<String>,
    #[serde(skip_serializing)]
    seq: Option<u64>,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(default)]
struct StepBody {
    #[serde(skip_serializing_if = "Option::is_none")]
    choice: Option<ScriptEntry>,
    #[serde(skip_serializing)]
    seq: Option<u64>,
}

/// A state-changing request as it is logged for replay.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
enum Command {
    Activity(ActivityBody),
    Confirm,
    Step(StepBody),
}

struct Entry {
    workspace: Arc<Workspace>,
    seed: u64,
    mode: ChoiceMode,
    phase: Phase,
    translation: Option<Translation>,
    formula: Option<Formula>,
    planned: Option<Planned>,
    session: Option<Session>,
    events: Vec<ServiceEvent>,
    mirrored: u64,
    replies: HashMap<u64, Result<Value, ApiError>>,
    log: Option<File>,
}

fn now_ms() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis() as u64)
        .unwrap_or(0)
}

fn open_log(path: &FsPath) -> Result<File, ApiError> {
    OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(|e| ApiError::internal(format!("session log {}: {e}", path.display())))
}

impl Entry {
    fn new(workspace: Arc<Workspace>, seed: u64, mode: ChoiceMode) -> Entry {
        Entry {
            workspace,
            seed,
            mode,
            phase: Phase::Defined,
            translation: None,
            formula: None,
            planned: None,
            session: None,
            events: Vec::new(),
            mirrored: 0,
            replies: HashMap::new(),
            log: None,
        }
    }

    fn push(&mut self, kind: &str, t: Option<usize>, data: Value) {
        let event = ServiceEvent {
            seq: self.events.len() as u64 + 1,
            timestamp_ms: now_ms(),
            kind: kind.to_string(),
            t,
            data,
        };
        if let Some(f) = &mut self.log {
            let line = serde_json::to_string(&event).expect("events serialize");
            if let Err(e) = writeln!(f, "{line}") {
                log::warn!("cannot append to the session log: {e}");
            }
        }
        self.events.push(event);
    }

    /// Copies executor events not yet in the session log.
    fn mirror(&mut self) {
        let Some(s) = &self.session else { return };
        let new: Vec<_> = s.events_since(self.mirrored).to_vec();
        for e in new {
            self.mirrored = e.seq;
            let kind = serde_json::to_value(&e.kind).ok().and_then(|v| v.as_str().map(String::from));
            let data = serde_json::to_value(&e).unwrap_or(Value::Null);
            self.push(kind.as_deref().unwrap_or("executor"), Some(e.t), data);
        }
    }

    /// Replays the stored reply of a repeated command number.
    fn once(&mut self, seq: Option<u64>, f: impl FnOnce(&mut Entry) -> Result<Value, ApiError>) -> Result<Value, ApiError> {
        if let Some(n) = seq {
            if let Some(r) = self.replies.get(&n) {
                return r.clone();
            }
        }
        let mut r = f(self);
        if let Ok(Value::Object(m)) = &mut r {
            m.entry("phase").or_insert(json!(self.phase));
        }
        if let Some(n) = seq {
            self.replies.insert(n, r.clone());
        }
        r
    }

    fn session(&self) -> Result<&Session, ApiError> {
        self.session
            .as_ref()
            .ok_or_else(|| ApiError::conflict("not_planned", "confirm the activity first"))
    }

    fn snapshot(&self) -> Value {
        let mut v = json!({
            "phase": self.phase,
            "formula": self.formula.as_ref().map(|f| f.to_string()),
            "events": self.events,
        });
        if let Some(s) = &self.session {
            v["t"] = json!(s.t());
            v["goal_reached"] = json!(s.goal_reached());
            v["knowledge_base"] = json!(s.knowledge_base());
            v["trace"] = json!(s.trace());
            v["pending"] = json!(s.pending());
        }
        v
    }

    fn apply(&mut self, config: &AppConfig, cmd: &Command) -> Result<Value, ApiError> {
        match cmd {
            Command::Activity(b) => self.activity(config, b),
            Command::Confirm => self.confirm(),
            Command::Step(b) => self.step(b.choice.as_ref()),
        }
    }

    /// Runs a command and logs it with its reply.
    fn command(&mut self, config: &AppConfig, seq: Option<u64>, cmd: Command) -> Result<Value, ApiError> {
        self.once(seq, |e| {
            let mut reply = e.apply(config, &cmd)?;
            reply["phase"] = json!(e.phase);
            e.push("command", None, json!({ "seq": seq, "command": cmd, "reply": reply }));
            Ok(reply)
        })
    }

    fn set_activity(&mut self, formula: Formula, translation: Option<Translation>) -> Result<Value, ApiError> {
        let bindings: BTreeMap<String, String> = self
            .workspace
            .resolve_atoms(&formula)?
            .into_iter()
            .map(|(a, b)| (a.to_string(), b.to_string()))
            .collect();
        self.phase = Phase::Translated;
        let reply = json!({
            "phase": self.phase,
            "formula": formula.to_string(),
            "bindings": bindings,
            "translation": translation,
        });
        self.formula = Some(formula);
        self.translation = translation;
        Ok(reply)
    }

    fn activity(&mut self, config: &AppConfig, b: &ActivityBody) -> Result<Value, ApiError> {
        if self.phase > Phase::Translated {
            return Err(ApiError::conflict("already_confirmed", "the activity is already confirmed"));
        }
        let (formula, translation) = match (&b.sentence, &b.ltlf) {
            (Some(s), None) => {
                let client = LlmClient::new(config.nl.clone()).map_err(|e| ApiError::bad("backend", e.to_string()))?;
                let t = Frontend::new(self.workspace.alphabet.clone(), client, config.frontend).translate(s, None)?;
                (t.grounded.clone(), Some(t))
            }
            (None, Some(f)) => (parse_ltlf(f).map_err(|x| ApiError::bad("bad_formula", x.to_string()))?, None),
            _ => return Err(ApiError::bad("bad_request", "give exactly one of `sentence` and `ltlf`")),
        };
        self.set_activity(formula, translation)
    }

    /// Replays a logged activity from its reply; translation backends need
    /// not be deterministic.
    fn restore_activity(&mut self, reply: &Value) -> Result<(), ApiError> {
        let text = reply["formula"].as_str().ok_or_else(|| ApiError::internal("logged activity lacks a formula"))?;
        let formula = parse_ltlf(text).map_err(|e| ApiError::internal(e.to_string()))?;
        let translation = serde_json::from_value(reply["translation"].clone()).unwrap_or(None);
        self.set_activity(formula, translation).map(|_| ())
    }

    fn confirm(&mut self) -> Result<Value, ApiError> {
        match self.phase {
            Phase::Defined => return Err(ApiError::conflict("not_translated", "define an activity first")),
            Phase::Translated => {}
            _ => return Err(ApiError::conflict("already_confirmed", "the activity is already confirmed")),
        }
        let formula = self.formula.clone().expect("translated sessions have a formula");
        let compiled = self.workspace.compile(&formula)?;
        let compiled_info = json!({
            "task": compiled.task().summary(),
            "automaton_states": compiled.dfa().num_states(),
        });
        let planned = plan_compiled(compiled, SolveOptions::default())?;
        self.phase = Phase::Compiled;
        self.push("compiled", None, compiled_info.clone());
        let chooser: Box<dyn Chooser> = match self.mode {
            ChoiceMode::Interactive => Box::new(InteractiveChooser::new()),
            ChoiceMode::Seeded => Box::new(SeededChooser::new(self.seed)),
        };
        let session = Session::start_verified(
            planned.compiled.clone(),
            planned.policy.clone(),
            planned.graph.clone(),
            chooser,
        );
        let policy = json!({ "class": planned.policy.class(), "states": planned.policy.len() });
        self.phase = if session.goal_reached() { Phase::Done } else { Phase::Planned };
        let reply = json!({
            "compiled": compiled_info,
            "policy": policy,
            "graph": planned.graph.to_json(planned.compiled.task()),
            "t": session.t(),
            "knowledge_base": session.knowledge_base(),
        });
        self.push("planned", None, policy);
        self.planned = Some(planned);
        self.session = Some(session);
        self.mirror();
        Ok(reply)
    }

    fn step(&mut self, choice: Option<&ScriptEntry>) -> Result<Value, ApiError> {
        if self.phase == Phase::Done {
            return Err(ApiError::conflict("session_done", "the goal has been reached"));
        }
        let s = self
            .session
            .as_mut()
            .ok_or_else(|| ApiError::conflict("not_planned", "confirm the activity first"))?;
        let out = s.step(choice).map_err(|x| match x {
            ExecError::InvalidChoice { .. } => ApiError::bad("invalid_choice", x.to_string()),
            x => ApiError::unprocessable("execution_failed", x.to_string()),
        })?;
        let reply = json!(out);
        match &out {
            StepOutcome::Stepped(t) => {
                self.phase = if t.goal_reached { Phase::Done } else { Phase::Executing };
            }
            StepOutcome::NeedsChoice(p) => self.push("needs_choice", Some(p.t), reply.clone()),
        }
        self.mirror();
        Ok(reply)
    }

    fn query(&mut self, config: &AppConfig, b: &QueryBody) -> Result<Value, ApiError> {
        let text = match (&b.question, b.scenario) {
            (Some(q), _) if q.trim().is_empty() => return Err(ApiError::bad("empty_question", "the question is empty")),
            (Some(q), _) => q.clone(),
            (None, Some(s)) => s.exemplar().to_string(),
            (None, None) => return Err(ApiError::bad("bad_request", "give a `question` or a `scenario`")),
        };
        let scenario = b.scenario.unwrap_or_else(|| Scenario::classify(&text));
        let question = Question::new(scenario, text);
        let session = self.session()?;
        let plan = session
            .completion(&mut SeededChooser::new(self.seed))
            .map_err(|x| ApiError::unprocessable("execution_failed", x.to_string()))?;
        let client = |c: &BackendConfig| LlmClient::new(c.clone()).map_err(|x| ApiError::bad("backend", x.to_string()));
        let ctx = QueryContext {
            workspace: &self.workspace,
            session,
            plan: &plan,
        };
        let answer = ask(&ctx, &question, &client(&config.answer)?)?;
        let admissible = Admissible::new(&self.workspace.domain, &self.workspace.problem).with_landmarks(&self.workspace.alphabet);
        let extraction = extract_fluents(&answer.text, &admissible, &client(&config.extractor)?)?;
        let evaluation = score(&extraction.prediction, &plan.fluent_sets(), answer.t, scenario)
            .map_err(|x| ApiError::internal(x.to_string()))?;
        let reply = json!({
            "phase": self.phase,
            "question": question,
            "scenario": scenario,
            "t": answer.t,
            "answer": answer.text,
            "predicted": extraction.prediction.all(),
            "dropped": extraction.dropped,
            "evaluation": evaluation,
        });
        self.push("query", Some(answer.t), reply.clone());
        Ok(reply)
    }
}

struct Shared {
    config: AppConfig,
    log_dir: Option<PathBuf>,
    static_dir: Option<PathBuf>,
    token: Option<String>,
    counter: AtomicU64,
    domains: Mutex<HashMap<String, Arc<Workspace>>>,
    sessions: Mutex<HashMap<String, Arc<Mutex<Entry>>>>,
}

#[derive(Clone)]
pub struct AppState(Arc<Shared>);

fn id_number(id: &str) -> u64 {
    id.trim_start_matches(|c: char| c.is_ascii_alphabetic()).parse().unwrap_or(0)
}

impl AppState {
    /// A fresh service. Nothing is read from `log_dir`; see [`AppState::open`].
    pub fn new(config: AppConfig, log_dir: Option<PathBuf>) -> AppState {
        AppState(Arc::new(Shared {
            config,
            log_dir,
            static_dir: None,
            token: None,
            counter: AtomicU64::new(0),
            domains: Mutex::new(HashMap::new()),
            sessions: Mutex::new(HashMap::new()),
        }))
    }

    fn shared_mut(&mut self) -> &mut Shared {
        Arc::get_mut(&mut self.0).expect("configure the service before serving")
    }

    /// Requests other than `/health` must carry `Authorization: Bearer <token>`.
    pub fn with_token(mut self, token: Option<String>) -> Self {
        self.shared_mut().token = token.filter(|t| !t.is_empty());
        self
    }

    /// Serves files under `dir` for paths no endpoint claims.
    pub fn with_static_dir(mut self, dir: Option<PathBuf>) -> Self {
        self.shared_mut().static_dir = dir;
        self
    }

    /// Restores the domains and sessions logged in `log_dir`.
    pub fn open(config: AppConfig, log_dir: PathBuf) -> Result<AppState, String> {
        fs::create_dir_all(&log_dir).map_err(|e| format!("cannot create {}: {e}", log_dir.display()))?;
        let state = AppState::new(config, Some(log_dir.clone()));
        let mut files: Vec<PathBuf> = fs::read_dir(&log_dir)
            .map_err(|e| format!("cannot read {}: {e}", log_dir.display()))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .collect();
        files.sort();
        let mut top = 0;
        for path in files.iter().filter(|p| p.extension().is_some_and(|x| x == "json")) {
            let id = path.file_stem().and_then(|s| s.to_str()).unwrap_or_default().to_string();
            let text = fs::read_to_string(path).map_err(|e| e.to_string())?;
            let source: DomainBody = serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))?;
            let ws = source.build().map_err(|e| format!("{}: {}", path.display(), e.message))?;
            top = top.max(id_number(&id));
            state.0.domains.lock().expect("domain table").insert(id, Arc::new(ws));
        }
        for path in files.iter().filter(|p| p.extension().is_some_and(|x| x == "jsonl")) {
            let id = path.file_stem().and_then(|s| s.to_str()).unwrap_or_default().to_string();
            let entry = state.replay(path).map_err(|e| format!("{}: {e}", path.display()))?;
            top = top.max(id_number(&id));
            state.0.sessions.lock().expect("session table").insert(id, Arc::new(Mutex::new(entry)));
        }
        state.0.counter.store(top, Ordering::Relaxed);
        Ok(state)
    }

    fn replay(&self, path: &FsPath) -> Result<Entry, String> {
        let text = fs::read_to_string(path).map_err(|e| e.to_string())?;
        let events: Vec<ServiceEvent> = text
            .lines()
            .filter(|l| !l.trim().is_empty())
            .map(serde_json::from_str)
            .collect::<Result<_, _>>()
            .map_err(|e| e.to_string())?;
        let created = events.first().filter(|e| e.kind == "created").ok_or("log does not start with `created`")?;
        let domain_id = created.data["domain_id"].as_str().unwrap_or_default();
        let ws = self
            .0
            .domains
            .lock()
            .expect("domain table")
            .get(domain_id)
            .cloned()
            .ok_or_else(|| format!("unknown domain `{domain_id}`"))?;
        let mode = serde_json::from_value(created.data["mode"].clone()).unwrap_or_default();
        let seed = created.data["seed"].as_u64().unwrap_or(self.0.config.seed);
        let mut entry = Entry::new(ws, seed, mode);
        for e in events.iter().filter(|e| e.kind == "command") {
            let cmd: Command = serde_json::from_value(e.data["command"].clone()).map_err(|x| x.to_string())?;
            let mut reply = e.data["reply"].clone();
            match &cmd {
                Command::Activity(_) => entry.restore_activity(&reply).map_err(|x| x.message)?,
                cmd => {
                    let mut again = entry.apply(&self.0.config, cmd).map_err(|x| x.message)?;
                    again["phase"] = json!(entry.phase);
                    if again != reply {
                        log::warn!("replayed {cmd:?} in {} answers differently", path.display());
                        reply = again;
                    }
                }
            }
            if let Some(n) = e.data["seq"].as_u64() {
                entry.replies.insert(n, Ok(reply));
            }
        }
        entry.mirrored = entry.session.as_ref().and_then(|s| s.events().last()).map_or(0, |e| e.seq);
        entry.events = events;
        entry.log = Some(open_log(path).map_err(|e| e.message)?);
        Ok(entry)
    }

    fn next_id(&self, prefix: &str) -> String {
        format!("{prefix}{}", self.0.counter.fetch_add(1, Ordering::Relaxed) + 1)
    }

    fn entry(&self, id: &str) -> Result<Arc<Mutex<Entry>>, ApiError> {
        self.0
            .sessions
            .lock()
            .expect("session table")
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::not_found("session", id))
    }

    fn domain(&self, id: &str) -> Result<Arc<Workspace>, ApiError> {
        self.0
            .domains
            .lock()
            .expect("domain table")
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::not_found("domain", id))
    }
}

fn body<T: DeserializeOwned + Default>(bytes: &Bytes) -> Result<T, ApiError> {
    if bytes.iter().all(u8::is_ascii_whitespace) {
        return Ok(T::default());
    }
    serde_json::from_slice(bytes).map_err(|e| ApiError::bad("bad_request", e.to_string()))
}

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> Result<T, ApiError> + Send + 'static) -> Result<T, ApiError> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::internal(e.to_string()))?
}

/// Runs `f` on a session under its lock.
async fn with_entry(
    state: &AppState,
    id: &str,
    f: impl FnOnce(&mut Entry, &AppConfig) -> Result<Value, ApiError> + Send + 'static,
) -> ApiResult {
    let entry = state.entry(id)?;
    let shared = state.0.clone();
    blocking(move || {
        let mut e = entry.lock().map_err(|_| ApiError::internal("session lock poisoned"))?;
        f(&mut e, &shared.config)
    })
    .await
    .map(Json)
}

async fn run_command(state: &AppState, id: &str, seq: Option<u64>, cmd: Command) -> ApiResult {
    with_entry(state, id, move |e, config| e.command(config, seq, cmd)).await
}

async fn create_domain(State(state): State<AppState>, raw: Bytes) -> Result<(StatusCode, Json<Value>), ApiError> {
    let source: DomainBody = body(&raw)?;
    let (ws, source) = blocking(move || Ok((source.build()?, source))).await?;
    let id = state.next_id("d");
    if let Some(dir) = &state.0.log_dir {
        let text = serde_json::to_string(&source).expect("domain sources serialize");
        fs::write(dir.join(format!("{id}.json")), text).map_err(|e| ApiError::internal(format!("domain store: {e}")))?;
    }
    let reply = json!({
        "id": id,
        "domain": ws.domain.name,
        "problem": ws.problem.name,
        "task": ws.task.summary(),
        "landmarks": ws.alphabet.len(),
    });
    state.0.domains.lock().expect("domain table").insert(id, Arc::new(ws));
    Ok((StatusCode::CREATED, Json(reply)))
}

#[derive(Default, Deserialize)]
#[serde(default)]
struct SessionBody {
    domain_id: String,
    seed: Option<u64>,
    mode: ChoiceMode,
}

async fn create_session(State(state): State<AppState>, raw: Bytes) -> Result<(StatusCode, Json<Value>), ApiError> {
    let b: SessionBody = body(&raw)?;
    let ws = state.domain(&b.domain_id)?;
    let id = state.next_id("s");
    let mut entry = Entry::new(ws, b.seed.unwrap_or(state.0.config.seed), b.mode);
    if let Some(dir) = &state.0.log_dir {
        entry.log = Some(open_log(&dir.join(format!("{id}.jsonl")))?);
    }
    entry.push("created", None, json!({ "domain_id": b.domain_id, "mode": b.mode, "seed": entry.seed }));
    state
        .0
        .sessions
        .lock()
        .expect("session table")
        .insert(id.clone(), Arc::new(Mutex::new(entry)));
    Ok((StatusCode::CREATED, Json(json!({ "id": id, "phase": Phase::Defined }))))
}

async fn activity(State(state): State<AppState>, Path(id): Path<String>, raw: Bytes) -> ApiResult {
    let b: ActivityBody = body(&raw)?;
    run_command(&state, &id, b.seq, Command::Activity(b)).await
}

#[derive(Default, Deserialize)]
#[serde(default)]
struct SeqBody {
    seq: Option<u64>,
}

async fn confirm(State(state): State<AppState>, Path(id): Path<String>, raw: Bytes) -> ApiResult {
    let b: SeqBody = body(&raw)?;
    run_command(&state, &id, b.seq, Command::Confirm).await
}

async fn step(State(state): State<AppState>, Path(id): Path<String>, raw: Bytes) -> ApiResult {
    let b: StepBody = body(&raw)?;
    run_command(&state, &id, b.seq, Command::Step(b)).await
}

#[derive(Default, Deserialize)]
#[serde(default)]
struct QueryBody {
    question: Option<String>,
    scenario: Option<Scenario>,
    seq: Option<u64>,
}

async fn query(State(state): State<AppState>, Path(id): Path<String>, raw: Bytes) -> ApiResult {
    let b: QueryBody = body(&raw)?;
    with_entry(&state, &id, move |e, config| e.once(b.seq, |e| e.query(config, &b))).await
}

async fn trace(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult {
    with_entry(&state, &id, |e, _| Ok(e.snapshot())).await
}

#[derive(Deserialize)]
struct Since {
    #[serde(default)]
    since: u64,
}

async fn events(State(state): State<AppState>, Path(id): Path<String>, Query(q): Query<Since>) -> ApiResult {
    with_entry(&state, &id, move |e, _| {
        let start = e.events.partition_point(|x| x.seq <= q.since);
        Ok(json!({ "phase": e.phase, "events": e.events[start..], "next": e.events.len() }))
    })
    .await
}

#[derive(Default, Deserialize)]
#[serde(default)]
struct ExperimentBody {
    domain_id: Option<String>,
    #[serde(flatten)]
    config: ExperimentConfig,
}

async fn experiments(State(state): State<AppState>, raw: Bytes) -> ApiResult {
    let b: ExperimentBody = body(&raw)?;
    let ws = match &b.domain_id {
        Some(id) => state.domain(id)?,
        None => Arc::new(Workspace::vineyard()),
    };
    blocking(move || {
        let report = run_experiments(&ws, &b.config).map_err(|e| ApiError::bad("experiment_failed", e.to_string()))?;
        Ok(Json(json!({
            "table": report.to_string(),
            "rows": report.rows,
            "records": report.records,
            "past_histogram": report.past_histogram,
            "future_histogram": report.future_histogram,
            "past_csv": report.past_histogram.to_csv(),
            "future_csv": report.future_histogram.to_csv(),
        })))
    })
    .await
}

async fn authorize(State(state): State<AppState>, req: Request, next: Next) -> Response {
    if let Some(token) = &state.0.token {
        let given = req
            .headers()
            .get(header::AUTHORIZATION)
            .and_then(|v| v.to_str().ok())
            .and_then(|v| v.strip_prefix("Bearer "));
        if req.uri().path() != "/health" && given != Some(token.as_str()) {
            return ApiError::new(StatusCode::UNAUTHORIZED, "unauthorized", "missing or wrong bearer token").into_response();
        }
    }
    next.run(req).await
}

pub fn router(state: AppState) -> Router {
    let mut r = Router::new()
        .route("/health", get(|| async { "ok" }))
        .route("/domains", post(create_domain))
        .route("/sessions", post(create_session))
        .route("/sessions/{id}/activity", post(activity))
        .route("/sessions/{id}/confirm", post(confirm))
        .route("/sessions/{id}/step", post(step))
        .route("/sessions/{id}/query", post(query))
        .route("/sessions/{id}/trace", get(trace))
        .route("/sessions/{id}/events", get(events))
        .route("/experiments", post(experiments));
    if let Some(dir) = &state.0.static_dir {
        r = r.fallback_service(ServeDir::new(dir));
    }
    r.layer(middleware::from_fn_with_state(state.clone(), authorize))
        .with_state(state)
}

pub async fn serve(listener: tokio::net::TcpListener, state: AppState) -> std::io::Result<()> {
    axum::serve(listener, router(state)).await
}
