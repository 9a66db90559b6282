//! The task manager: runs a verified policy one world action at a time and
//! keeps the knowledge base of world fluents.
//!
//! Time is 1-based. `t = 1` is the initial state and the state after the
//! i-th world action is `s_{i+1}`. Automaton bookkeeping steps of the
//! compiled task are applied inside `step` and never show up in the trace.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::sync::Arc;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::compiler::CompiledTask;
use crate::pddl::{GroundAtom, State};
use crate::planner::{
    fair_outcome, verify_policy, ChoiceContext, Chooser, ChooserError, PlanGraph, PlanStep, Policy, ScriptEntry,
    VerifyError, DEFAULT_FAIRNESS,
};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ExecError {
    #[error("policy does not fit the task: {0}")]
    PolicyMismatch(#[from] VerifyError),
    #[error("the goal has already been reached")]
    GoalReached,
    #[error("policy has no action for the current state {0}")]
    NoAction(String),
    #[error(transparent)]
    Chooser(#[from] ChooserError),
    #[error("outcome `{choice}` is not one of {options:?}")]
    InvalidChoice { choice: String, options: Vec<String> },
    #[error("no goal after {0} steps")]
    StepLimit(usize),
    #[error("activity binding refers to unknown action `{0}`")]
    UnknownBinding(String),
}

/// A multi-step activity standing for one PDDL action schema. Sub-steps are
/// labels only; they are logged but do not change the state.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActivityBinding {
    pub action: String,
    pub label: String,
    #[serde(default)]
    pub steps: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceState {
    pub t: usize,
    pub fluents: Vec<String>,
    /// The world action and outcome that produced this state; `None` at t = 1.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub action: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub outcome: Option<String>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExecutionTrace {
    pub states: Vec<TraceState>,
}

impl ExecutionTrace {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    /// `f_1 .. f_T` as string sets.
    pub fn fluent_sets(&self) -> Vec<BTreeSet<String>> {
        self.states.iter().map(|s| s.fluents.iter().cloned().collect()).collect()
    }

    /// The world actions with their outcome labels, in order.
    pub fn actions(&self) -> Vec<(String, String)> {
        self.states
            .iter()
            .filter_map(|s| Some((s.action.clone()?, s.outcome.clone()?)))
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    Start,
    Step,
    Substep,
    Goal,
}

/// One line of the event log.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Event {
    pub seq: u64,
    pub timestamp_ms: u64,
    pub t: usize,
    pub kind: EventKind,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub action: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub outcome: Option<String>,
    pub goal: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transition {
    pub t: usize,
    pub action: String,
    pub outcome: String,
    pub outcome_index: usize,
    pub state: Vec<String>,
    pub goal_reached: bool,
    /// True when the fairness guard overrode the chooser.
    pub forced: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub activity: Option<String>,
}

/// The action waiting for an outcome choice from outside.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PendingChoice {
    pub t: usize,
    pub action: String,
    pub options: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum StepOutcome {
    Stepped(Transition),
    NeedsChoice(PendingChoice),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Snapshot {
    pub t: usize,
    pub knowledge_base: Vec<String>,
    pub goal_reached: bool,
    pub trace: ExecutionTrace,
}

#[derive(Clone, Copy, Debug)]
pub struct SessionOptions {
    pub fairness: usize,
    pub max_steps: usize,
}

impl Default for SessionOptions {
    fn default() -> Self {
        SessionOptions {
            fairness: DEFAULT_FAIRNESS,
            max_steps: 100_000,
        }
    }
}

pub struct Session {
    compiled: Arc<CompiledTask>,
    policy: Arc<Policy>,
    graph: Arc<PlanGraph>,
    chooser: Box<dyn Chooser>,
    options: SessionOptions,
    bindings: BTreeMap<String, ActivityBinding>,
    state: State,
    world: Vec<State>,
    steps: Vec<PlanStep>,
    trace: ExecutionTrace,
    visits: HashMap<(usize, usize), usize>,
    events: Vec<Event>,
    goal_reached: bool,
}

fn now_ms() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis() as u64)
        .unwrap_or(0)
}

fn atom_strings(atoms: Vec<GroundAtom>) -> Vec<String> {
    atoms.iter().map(|a| a.to_string()).collect()
}

impl Session {
    /// Verifies the policy and starts at the initial state.
    pub fn start(compiled: Arc<CompiledTask>, policy: Arc<Policy>, chooser: Box<dyn Chooser>) -> Result<Session, ExecError> {
        let graph = Arc::new(verify_policy(compiled.task(), &policy)?);
        Ok(Session::start_verified(compiled, policy, graph, chooser))
    }

    /// For callers that already hold the verified plan graph of `policy`.
    pub fn start_verified(
        compiled: Arc<CompiledTask>,
        policy: Arc<Policy>,
        graph: Arc<PlanGraph>,
        chooser: Box<dyn Chooser>,
    ) -> Session {
        let state = compiled.task().init().clone();
        let goal = compiled.task().is_goal(&state);
        let mut s = Session {
            compiled,
            policy,
            graph,
            chooser,
            options: SessionOptions::default(),
            bindings: BTreeMap::new(),
            world: Vec::new(),
            steps: Vec::new(),
            trace: ExecutionTrace::default(),
            visits: HashMap::new(),
            events: Vec::new(),
            goal_reached: goal,
            state,
        };
        let kb = s.knowledge_base();
        s.world.push(s.compiled.project(&s.state));
        s.trace.states.push(TraceState {
            t: 1,
            fluents: kb,
            action: None,
            outcome: None,
        });
        s.log(EventKind::Start, None, None, None);
        if goal {
            s.log(EventKind::Goal, None, None, None);
        }
        s
    }

    pub fn with_options(mut self, options: SessionOptions) -> Self {
        self.options = options;
        self
    }

    pub fn bind_activity(&mut self, binding: ActivityBinding) -> Result<(), ExecError> {
        let known = self.compiled.task().actions()[..self.compiled.world_actions()]
            .iter()
            .any(|a| a.schema == binding.action);
        if !known {
            return Err(ExecError::UnknownBinding(binding.action));
        }
        self.bindings.insert(binding.action.clone(), binding);
        Ok(())
    }

    pub fn compiled(&self) -> &CompiledTask {
        &self.compiled
    }

    pub fn policy(&self) -> &Policy {
        &self.policy
    }

    pub fn graph(&self) -> &PlanGraph {
        &self.graph
    }

    pub fn t(&self) -> usize {
        self.trace.len()
    }

    pub fn goal_reached(&self) -> bool {
        self.goal_reached
    }

    pub fn trace(&self) -> &ExecutionTrace {
        &self.trace
    }

    /// World states `s_1 .. s_t` over the original fluents.
    pub fn world_states(&self) -> &[State] {
        &self.world
    }

    /// Every compiled action applied so far, bookkeeping included.
    pub fn applied(&self) -> &[PlanStep] {
        &self.steps
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn events_since(&self, since: u64) -> &[Event] {
        let start = self.events.partition_point(|e| e.seq <= since);
        &self.events[start..]
    }

    pub fn events_jsonl(&self) -> String {
        self.events
            .iter()
            .map(|e| serde_json::to_string(e).expect("events serialize") + "\n")
            .collect()
    }

    /// Current world fluents, bookkeeping stripped.
    pub fn knowledge_base(&self) -> Vec<String> {
        let task = self.compiled.task();
        atom_strings(task.atoms(&self.compiled.project(&self.state)))
    }

    pub fn snapshot(&self) -> Snapshot {
        Snapshot {
            t: self.t(),
            knowledge_base: self.knowledge_base(),
            goal_reached: self.goal_reached,
            trace: self.trace.clone(),
        }
    }

    /// The action the policy prescribes now and its outcome labels.
    pub fn pending(&self) -> Option<PendingChoice> {
        if self.goal_reached {
            return None;
        }
        let a = self.policy.action(&self.state)?;
        let action = self.compiled.task().action(a);
        Some(PendingChoice {
            t: self.t(),
            action: action.name(),
            options: action.outcomes.iter().map(|o| o.label.clone()).collect(),
        })
    }

    fn log(&mut self, kind: EventKind, action: Option<String>, outcome: Option<String>, detail: Option<String>) {
        let seq = self.events.len() as u64 + 1;
        self.events.push(Event {
            seq,
            timestamp_ms: now_ms(),
            t: self.trace.len(),
            kind,
            action,
            outcome,
            goal: self.goal_reached,
            detail,
        });
    }

    fn apply(&mut self, action: usize, outcome: usize) {
        self.state = self.compiled.task().apply(&self.state, action, outcome);
        self.steps.push(PlanStep { action, outcome });
    }

    fn describe_state(&self) -> String {
        format!("{{{}}}", self.knowledge_base().join(" "))
    }

    /// Executes one world action and the bookkeeping that follows it.
    /// `choice` overrides the chooser for a nondeterministic action; without
    /// one, a chooser that defers to the caller yields `NeedsChoice`.
    pub fn step(&mut self, choice: Option<&ScriptEntry>) -> Result<StepOutcome, ExecError> {
        if self.goal_reached {
            return Err(ExecError::GoalReached);
        }
        if self.t() > self.options.max_steps {
            return Err(ExecError::StepLimit(self.options.max_steps));
        }
        let a = self
            .policy
            .action(&self.state)
            .ok_or_else(|| ExecError::NoAction(self.describe_state()))?;
        let node = self
            .graph
            .node(&self.state)
            .ok_or_else(|| ExecError::NoAction(self.describe_state()))?;
        let action = self.compiled.task().action(a).clone();
        let labels: Vec<String> = action.outcomes.iter().map(|o| o.label.clone()).collect();
        let name = action.name();
        let mut forced = false;
        let outcome = if action.is_deterministic() {
            0
        } else if let Some(c) = choice {
            let idx = match c {
                ScriptEntry::Index(i) if *i < labels.len() => Some(*i),
                ScriptEntry::Index(_) => None,
                ScriptEntry::Label(l) => labels.iter().position(|x| x.eq_ignore_ascii_case(l)),
            };
            idx.ok_or_else(|| ExecError::InvalidChoice {
                choice: c.to_string(),
                options: labels.clone(),
            })?
        } else if self.visits.get(&(node, a)).copied().unwrap_or(0) >= self.options.fairness {
            forced = true;
            fair_outcome(&self.graph, node)
        } else {
            let ctx = ChoiceContext {
                state: &self.state,
                action: a,
                action_name: &name,
                labels: &labels,
            };
            match self.chooser.choose(&ctx)? {
                Some(i) => i,
                None => {
                    return Ok(StepOutcome::NeedsChoice(PendingChoice {
                        t: self.t(),
                        action: name,
                        options: labels,
                    }))
                }
            }
        };
        *self.visits.entry((node, a)).or_insert(0) += 1;
        self.apply(a, outcome);
        // bookkeeping moves until the world has the turn again
        while !self.compiled.is_world_turn(&self.state) && !self.compiled.task().is_goal(&self.state) {
            let b = self
                .policy
                .action(&self.state)
                .ok_or_else(|| ExecError::NoAction(self.describe_state()))?;
            self.apply(b, 0);
        }
        self.goal_reached = self.compiled.task().is_goal(&self.state);
        let kb = self.knowledge_base();
        self.world.push(self.compiled.project(&self.state));
        let label = labels[outcome].clone();
        self.trace.states.push(TraceState {
            t: self.trace.len() + 1,
            fluents: kb.clone(),
            action: Some(name.clone()),
            outcome: Some(label.clone()),
        });
        let activity = self.bindings.get(&action.schema).cloned();
        self.log(
            EventKind::Step,
            Some(name.clone()),
            Some(label.clone()),
            activity.as_ref().map(|b| b.label.clone()),
        );
        if let Some(b) = &activity {
            for sub in &b.steps {
                self.log(EventKind::Substep, Some(name.clone()), None, Some(sub.clone()));
            }
        }
        if self.goal_reached {
            self.log(EventKind::Goal, None, None, None);
        }
        Ok(StepOutcome::Stepped(Transition {
            t: self.t(),
            action: name,
            outcome: label,
            outcome_index: outcome,
            state: kb,
            goal_reached: self.goal_reached,
            forced,
            activity: activity.map(|b| b.label),
        }))
    }

    /// The executed prefix followed by the path the policy takes from here
    /// when `chooser` resolves the remaining outcomes under the same
    /// fairness guard. This is the determinized plan future questions are
    /// scored against.
    pub fn completion(&self, chooser: &mut dyn Chooser) -> Result<ExecutionTrace, ExecError> {
        let task = self.compiled.task();
        let mut trace = self.trace.clone();
        let mut s = self.state.clone();
        let mut visits = self.visits.clone();
        let mut steps = 0;
        while !task.is_goal(&s) {
            steps += 1;
            if steps > self.options.max_steps {
                return Err(ExecError::StepLimit(self.options.max_steps));
            }
            let a = self.policy.action(&s).ok_or_else(|| ExecError::NoAction(format!("{s:?}")))?;
            let node = self.graph.node(&s).ok_or_else(|| ExecError::NoAction(format!("{s:?}")))?;
            let action = task.action(a);
            let count = visits.entry((node, a)).or_insert(0);
            *count += 1;
            let outcome = if action.is_deterministic() {
                0
            } else if *count > self.options.fairness {
                fair_outcome(&self.graph, node)
            } else {
                let labels: Vec<String> = action.outcomes.iter().map(|o| o.label.clone()).collect();
                let name = action.name();
                let ctx = ChoiceContext {
                    state: &s,
                    action: a,
                    action_name: &name,
                    labels: &labels,
                };
                chooser
                    .choose(&ctx)?
                    .ok_or_else(|| ChooserError::Aborted(format!("{name} needs an outcome choice")))?
            };
            s = task.apply(&s, a, outcome);
            let fluents = atom_strings(task.atoms(&self.compiled.project(&s)));
            if self.compiled.is_world_action(a) {
                trace.states.push(TraceState {
                    t: trace.len() + 1,
                    fluents,
                    action: Some(action.name()),
                    outcome: Some(action.outcomes[outcome].label.clone()),
                });
            } else if let Some(last) = trace.states.last_mut() {
                last.fluents = fluents;
            }
        }
        Ok(trace)
    }

    /// Steps until the goal. Fails if the chooser defers to the caller.
    pub fn run_to_goal(&mut self) -> Result<Vec<Transition>, ExecError> {
        let mut out = Vec::new();
        while !self.goal_reached {
            match self.step(None)? {
                StepOutcome::Stepped(t) => out.push(t),
                StepOutcome::NeedsChoice(p) => {
                    return Err(ExecError::Chooser(ChooserError::Aborted(format!(
                        "{} needs an outcome choice",
                        p.action
                    ))))
                }
            }
        }
        Ok(out)
    }
}

/// The world trace a determinized plan induces: the initial state and the
/// state after every world action.
pub fn plan_trace(compiled: &CompiledTask, plan: &[PlanStep]) -> ExecutionTrace {
    let task = compiled.task();
    let mut s = task.init().clone();
    let kb = |s: &State| atom_strings(task.atoms(&compiled.project(s)));
    let mut trace = ExecutionTrace {
        states: vec![TraceState {
            t: 1,
            fluents: kb(&s),
            action: None,
            outcome: None,
        }],
    };
    for step in plan {
        s = task.apply(&s, step.action, step.outcome);
        if compiled.is_world_action(step.action) {
            let a = task.action(step.action);
            trace.states.push(TraceState {
                t: trace.len() + 1,
                fluents: kb(&s),
                action: Some(a.name()),
                outcome: Some(a.outcomes[step.outcome].label.clone()),
            });
        } else if let Some(last) = trace.states.last_mut() {
            // bookkeeping only touches compiled fluents
            last.fluents = kb(&s);
        }
    }
    trace
}
