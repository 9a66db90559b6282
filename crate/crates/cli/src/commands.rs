//! The `procmon` subcommands. Each one returns its report as text so the
//! binary only has to print it.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use procmon_core::executor::Session;
use procmon_core::llmclient::LlmClient;
use procmon_core::ltlf::{parse_ltlf, Formula};
use procmon_core::monitor::{
    ask, extract_fluents, run_experiments, score, Admissible, ExperimentConfig, QueryContext, Question, Scenario,
};
use procmon_core::nlfront::{Frontend, SymbolAlphabet, Translation};
use procmon_core::pddl::GroundOptions;
use procmon_core::pipeline::{Planned, Workspace};
use procmon_core::planner::{solve, verify_policy, SeededChooser};
use procmon_core::fixtures;

use crate::service::{serve, AppState};
use crate::AppConfig;

#[derive(Debug, Parser)]
#[command(name = "procmon", version, about = "Plan, execute and question temporally extended robot tasks")]
pub struct Cli {
    /// Log at debug level.
    #[arg(long, short, global = true)]
    pub verbose: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Translate a sentence into an LTLf formula over landmark symbols.
    Translate(TranslateArgs),
    /// Compile a goal into a FOND task and write it as PDDL.
    Compile(GoalArgs),
    /// Compile and solve a goal, then print the policy.
    Plan(GoalArgs),
    /// Translate, plan, execute and ask one question about the run.
    Run(RunArgs),
    /// Repeat the question-answering experiment and print the summary table.
    Experiment(ExperimentArgs),
    /// Serve the HTTP API.
    Serve(ServeArgs),
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Domain file; the built-in vineyard domain when absent.
    #[arg(long)]
    pub domain: Option<PathBuf>,
    /// Problem file; the built-in vineyard problem when absent.
    #[arg(long)]
    pub problem: Option<PathBuf>,
    /// Landmark file; the vineyard landmarks when no domain is given.
    #[arg(long)]
    pub landmarks: Option<PathBuf>,
    /// TOML settings file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Backend for every role: `mock`, `mock-lossy:RATE`, `mock-hallucinating:RATE` or `http:URL`.
    #[arg(long)]
    pub backend: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub max_ground_actions: Option<usize>,
}

#[derive(Debug, Args)]
pub struct TranslateArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub sentence: String,
}

#[derive(Debug, Args)]
pub struct GoalArgs {
    #[command(flatten)]
    pub common: Common,
    /// LTLf goal over landmark, fluent or action names. `plan` without a
    /// goal solves the problem's own PDDL goal.
    #[arg(long, conflicts_with = "sentence")]
    pub goal: Option<String>,
    /// Natural language goal, translated first.
    #[arg(long)]
    pub sentence: Option<String>,
    /// Directory for generated files.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    /// Write the policy as JSON here.
    #[arg(long)]
    pub policy_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub goal: GoalArgs,
    /// Asked once the goal is reached.
    #[arg(long, default_value = "What are you doing now?")]
    pub question: String,
}

#[derive(Debug, Args)]
pub struct ExperimentArgs {
    #[command(flatten)]
    pub common: Common,
    /// Runs per scenario.
    #[arg(long, default_value_t = 30)]
    pub runs: usize,
    /// Scenarios to run (present, past, future); all when absent.
    #[arg(long = "scenario")]
    pub scenarios: Vec<Scenario>,
    #[arg(long)]
    pub goal: Option<String>,
    /// Writes records.jsonl, past_histogram.csv and future_histogram.csv.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[command(flatten)]
    pub common: Common,
    /// 0 picks a free port.
    #[arg(long, default_value_t = 8080)]
    pub port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    pub host: String,
    /// Directory for session event logs; sessions found there are restored.
    #[arg(long)]
    pub log_dir: Option<PathBuf>,
    /// Shared bearer token required on every request but `/health`.
    #[arg(long, env = "PROCMON_TOKEN", hide_env_values = true)]
    pub token: Option<String>,
    /// Static files (the web console bundle) served for unmatched paths.
    #[arg(long)]
    pub static_dir: Option<PathBuf>,
}

/// A failed command. Usage errors exit with 1, everything else with 2.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Failed(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Failed(_) => 2,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Failed(m) => f.write_str(m),
        }
    }
}

fn failed(e: impl std::fmt::Display) -> CliError {
    CliError::Failed(e.to_string())
}

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))
}

fn write(path: &Path, text: &str) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| failed(format!("cannot create {}: {e}", dir.display())))?;
    }
    fs::write(path, text).map_err(|e| failed(format!("cannot write {}: {e}", path.display())))
}

impl Common {
    pub fn app_config(&self) -> Result<AppConfig, CliError> {
        let mut c = match &self.config {
            Some(p) => AppConfig::load(p).map_err(CliError::Usage)?,
            None => AppConfig::default(),
        };
        if let Some(b) = &self.backend {
            c = c.with_backend(b).map_err(CliError::Usage)?;
        }
        if let Some(s) = self.seed {
            c.seed = s;
        }
        Ok(c)
    }

    pub fn alphabet(&self) -> Result<SymbolAlphabet, CliError> {
        match (&self.landmarks, &self.domain) {
            (Some(p), _) => SymbolAlphabet::parse(&read(p)?).map_err(failed),
            (None, None) => Ok(SymbolAlphabet::vineyard()),
            (None, Some(_)) => Ok(SymbolAlphabet::default()),
        }
    }

    pub fn workspace(&self) -> Result<Workspace, CliError> {
        let domain = match &self.domain {
            Some(p) => read(p)?,
            None => fixtures::VINEYARD_DOMAIN.to_string(),
        };
        let problem = match &self.problem {
            Some(p) => read(p)?,
            None if self.domain.is_none() => fixtures::VINEYARD_PROBLEM.to_string(),
            None => return Err(CliError::Usage("--domain needs --problem".into())),
        };
        let mut options = GroundOptions::default();
        if let Some(n) = self.max_ground_actions {
            options.max_ground_actions = n;
        }
        Workspace::with_options(&domain, &problem, self.alphabet()?, options).map_err(failed)
    }
}

fn translate(alphabet: SymbolAlphabet, config: &AppConfig, sentence: &str) -> Result<Translation, CliError> {
    let client = LlmClient::new(config.nl.clone()).map_err(failed)?;
    Frontend::new(alphabet, client, config.frontend)
        .translate(sentence, None)
        .map_err(failed)
}

fn write_translation(out: &mut String, t: &Translation) {
    let _ = writeln!(out, "sentence: {}", t.sentence);
    let exprs: Vec<&str> = t.expressions.iter().map(|e| e.text.as_str()).collect();
    let _ = writeln!(out, "referring expressions: {}", exprs.join("; "));
    let _ = writeln!(out, "symbolic: {}", t.symbolic);
    if let Some(p) = t.pattern {
        let _ = writeln!(out, "pattern: {p}");
    }
    for m in &t.matches {
        let _ = writeln!(out, "  {} -> {} ({:.3})", m.placeholder, m.identifier, m.score);
    }
    let _ = writeln!(out, "formula: {}", t.grounded);
}

pub fn cmd_translate(args: &TranslateArgs) -> Result<String, CliError> {
    let config = args.common.app_config()?;
    let t = translate(args.common.alphabet()?, &config, &args.sentence)?;
    let mut out = String::new();
    write_translation(&mut out, &t);
    Ok(out)
}

/// The goal formula, translating the sentence when one is given.
fn goal_formula(args: &GoalArgs, ws: &Workspace, config: &AppConfig, out: &mut String) -> Result<Formula, CliError> {
    match (&args.goal, &args.sentence) {
        (Some(g), _) => {
            let f = parse_ltlf(g).map_err(|e| CliError::Usage(format!("bad goal: {e}")))?;
            let _ = writeln!(out, "formula: {f}");
            Ok(f)
        }
        (None, Some(s)) => {
            let t = translate(ws.alphabet.clone(), config, s)?;
            write_translation(out, &t);
            Ok(t.grounded)
        }
        (None, None) => Err(CliError::Usage("give --goal or --sentence".into())),
    }
}

pub fn cmd_compile(args: &GoalArgs) -> Result<String, CliError> {
    let config = args.common.app_config()?;
    let ws = args.common.workspace()?;
    let mut out = String::new();
    let goal = goal_formula(args, &ws, &config, &mut out)?;
    let compiled = ws.compile(&goal).map_err(failed)?;
    let _ = writeln!(out, "world: {}", ws.task.summary());
    let _ = writeln!(out, "automaton states: {}", compiled.dfa().num_states());
    let _ = writeln!(out, "compiled: {}", compiled.task().summary());
    let (domain, problem) = compiled.to_pddl();
    match &args.out_dir {
        Some(dir) => {
            write(&dir.join("domain.pddl"), &domain)?;
            write(&dir.join("problem.pddl"), &problem)?;
            let _ = writeln!(out, "wrote {}", dir.display());
        }
        None => {
            out.push('\n');
            out.push_str(&domain);
            out.push('\n');
            out.push_str(&problem);
        }
    }
    Ok(out)
}

fn plan_goal(args: &GoalArgs, out: &mut String) -> Result<(Workspace, AppConfig, Planned), CliError> {
    let config = args.common.app_config()?;
    let ws = args.common.workspace()?;
    let goal = goal_formula(args, &ws, &config, out)?;
    let planned = ws.plan(&goal).map_err(failed)?;
    let c = &planned.compiled;
    let _ = writeln!(
        out,
        "compiled: {} fluents, {} actions, {} automaton states",
        c.task().num_fluents(),
        c.task().actions().len(),
        c.dfa().num_states()
    );
    let _ = writeln!(out, "policy: {}, {} states", planned.policy.class(), planned.policy.len());
    if let Some(p) = &args.policy_out {
        let json = serde_json::to_string_pretty(&planned.graph.to_json(c.task())).map_err(failed)?;
        write(p, &json)?;
    }
    Ok((ws, config, planned))
}

pub fn cmd_plan(args: &GoalArgs) -> Result<String, CliError> {
    let mut out = String::new();
    if args.goal.is_none() && args.sentence.is_none() {
        let ws = args.common.workspace()?;
        let policy = solve(&ws.task).map_err(failed)?;
        let graph = verify_policy(&ws.task, &policy).map_err(failed)?;
        let _ = writeln!(out, "task: {}", ws.task.summary());
        let _ = writeln!(out, "policy: {}, {} states", policy.class(), policy.len());
        if let Some(p) = &args.policy_out {
            write(p, &serde_json::to_string_pretty(&graph.to_json(&ws.task)).map_err(failed)?)?;
        }
        out.push_str(&policy.to_lines(&ws.task));
        return Ok(out);
    }
    let (_, _, planned) = plan_goal(args, &mut out)?;
    out.push_str(&planned.policy.to_lines(planned.compiled.task()));
    Ok(out)
}

pub fn cmd_run(args: &RunArgs) -> Result<String, CliError> {
    let mut out = String::new();
    let (ws, config, planned) = plan_goal(&args.goal, &mut out)?;
    let mut session = Session::start_verified(
        planned.compiled.clone(),
        planned.policy.clone(),
        planned.graph.clone(),
        Box::new(SeededChooser::new(config.seed)),
    );
    let _ = writeln!(out, "t=1 {}", session.knowledge_base().join(" "));
    for tr in session.run_to_goal().map_err(failed)? {
        let _ = writeln!(out, "t={} {}/{} -> {}", tr.t, tr.action, tr.outcome, tr.state.join(" "));
    }
    let _ = writeln!(out, "goal reached at t={}", session.t());

    let scenario = Scenario::classify(&args.question);
    let question = Question::new(scenario, args.question.clone());
    let plan = session.trace().clone();
    let ctx = QueryContext {
        workspace: &ws,
        session: &session,
        plan: &plan,
    };
    let answer = ask(&ctx, &question, &LlmClient::new(config.answer.clone()).map_err(failed)?).map_err(failed)?;
    let admissible = Admissible::new(&ws.domain, &ws.problem).with_landmarks(&ws.alphabet);
    let extractor = LlmClient::new(config.extractor.clone()).map_err(failed)?;
    let extraction = extract_fluents(&answer.text, &admissible, &extractor).map_err(failed)?;
    let eval = score(&extraction.prediction, &plan.fluent_sets(), answer.t, scenario).map_err(failed)?;
    let predicted: Vec<String> = extraction.prediction.all().into_iter().collect();
    let _ = writeln!(out, "question ({scenario}, t={}): {}", answer.t, question.text);
    let _ = writeln!(out, "answer: {}", answer.text);
    let _ = writeln!(out, "extracted: {}", predicted.join(" "));
    let _ = writeln!(out, "soundness: {:.3}", eval.soundness);
    let _ = writeln!(out, "completeness: {:.3}", eval.completeness);
    Ok(out)
}

pub fn cmd_experiment(args: &ExperimentArgs) -> Result<String, CliError> {
    let app = args.common.app_config()?;
    let ws = args.common.workspace()?;
    let mut config = ExperimentConfig {
        runs: args.runs,
        seed: app.seed,
        answer_backend: app.answer.clone(),
        extractor_backend: app.extractor.clone(),
        ..ExperimentConfig::default()
    };
    if !args.scenarios.is_empty() {
        config.scenarios = args.scenarios.clone();
    }
    if let Some(g) = &args.goal {
        config.goal = g.clone();
    }
    let report = run_experiments(&ws, &config).map_err(failed)?;
    if let Some(dir) = &args.out_dir {
        write(&dir.join("records.jsonl"), &report.records_jsonl())?;
        write(&dir.join("past_histogram.csv"), &report.past_histogram.to_csv())?;
        write(&dir.join("future_histogram.csv"), &report.future_histogram.to_csv())?;
    }
    Ok(report.to_string())
}

pub fn cmd_serve(args: &ServeArgs) -> Result<String, CliError> {
    let config = args.common.app_config()?;
    let state = match &args.log_dir {
        Some(d) => AppState::open(config, d.clone()).map_err(failed)?,
        None => AppState::new(config, None),
    };
    let state = state.with_token(args.token.clone()).with_static_dir(args.static_dir.clone());
    let rt = tokio::runtime::Runtime::new().map_err(failed)?;
    rt.block_on(async {
        let listener = tokio::net::TcpListener::bind((args.host.as_str(), args.port))
            .await
            .map_err(|e| failed(format!("cannot bind {}:{}: {e}", args.host, args.port)))?;
        let addr = listener.local_addr().map_err(failed)?;
        println!("listening on http://{addr}");
        serve(listener, state).await.map_err(failed)
    })?;
    Ok(String::new())
}

pub fn dispatch(cli: &Cli) -> Result<String, CliError> {
    match &cli.command {
        Command::Translate(a) => cmd_translate(a),
        Command::Compile(a) => cmd_compile(a),
        Command::Plan(a) => cmd_plan(a),
        Command::Run(a) => cmd_run(a),
        Command::Experiment(a) => cmd_experiment(a),
        Command::Serve(a) => cmd_serve(a),
    }
}
