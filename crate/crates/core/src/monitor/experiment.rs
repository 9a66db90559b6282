use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::executor::{plan_trace, Session, StepOutcome};
use crate::llmclient::{BackendConfig, LlmClient};
use crate::ltlf::parse_ltlf;
use crate::pipeline::{Planned, Workspace};
use crate::planner::{determinize, DeterminizeOptions, SeededChooser};

use super::{
    ask, extract_fluents, offset_histogram, score, Admissible, AnswerEvaluation, MonitorError, OffsetHistogram,
    QueryContext, QuestionPool, Scenario,
};

/// `p_k = min(1, base + increment * k)` after the k-th world action.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct QuerySchedule {
    pub base: f64,
    pub increment: f64,
}

impl Default for QuerySchedule {
    fn default() -> Self {
        QuerySchedule {
            base: 0.1,
            increment: 0.1,
        }
    }
}

impl QuerySchedule {
    pub fn probability(&self, k: usize) -> f64 {
        (self.base + self.increment * k as f64).clamp(0.0, 1.0)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub scenarios: Vec<Scenario>,
    pub runs: usize,
    pub seed: u64,
    pub schedule: QuerySchedule,
    pub goal: String,
    pub answer_backend: BackendConfig,
    pub extractor_backend: BackendConfig,
    /// Fresh draws allowed for a run whose execution leaves its plan.
    pub max_redraws: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            scenarios: Scenario::ALL.to_vec(),
            runs: 30,
            seed: 0,
            schedule: QuerySchedule::default(),
            goal: "F(harvested_g1 & F robot_at_loc_l0)".into(),
            answer_backend: BackendConfig::oracle(),
            extractor_backend: BackendConfig::oracle(),
            max_redraws: 10,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub scenario: Scenario,
    pub run: usize,
    pub seed: u64,
    pub redraws: usize,
    pub question: String,
    pub t: usize,
    #[serde(rename = "T")]
    pub horizon: usize,
    pub answer: String,
    pub predicted: Vec<String>,
    pub dropped: Vec<String>,
    pub soundness: Option<f64>,
    pub completeness: Option<f64>,
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSummary {
    pub scenario: Scenario,
    pub category: String,
    pub runs: usize,
    pub failed: usize,
    pub redrawn: usize,
    pub soundness_mean: f64,
    pub soundness_std: f64,
    pub completeness_mean: f64,
    pub completeness_std: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub rows: Vec<ScenarioSummary>,
    pub records: Vec<RunRecord>,
    pub evaluations: Vec<AnswerEvaluation>,
    pub past_histogram: OffsetHistogram,
    pub future_histogram: OffsetHistogram,
}

impl ExperimentReport {
    pub fn row(&self, scenario: Scenario) -> Option<&ScenarioSummary> {
        self.rows.iter().find(|r| r.scenario == scenario)
    }

    pub fn records_jsonl(&self) -> String {
        self.records
            .iter()
            .map(|r| serde_json::to_string(r).expect("records serialize") + "\n")
            .collect()
    }
}

impl fmt::Display for ExperimentReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{:<34}{:<16}{:<16}{}", "Category", "Soundness", "Completeness", "Runs")?;
        for r in &self.rows {
            let runs = if r.failed > 0 {
                format!("{} ({} failed)", r.runs, r.failed)
            } else {
                r.runs.to_string()
            };
            writeln!(
                f,
                "{:<34}{:<16}{:<16}{}",
                r.category,
                format!("{:.2} ± {:.2}", r.soundness_mean, r.soundness_std),
                format!("{:.2} ± {:.2}", r.completeness_mean, r.completeness_std),
                runs
            )?;
        }
        Ok(())
    }
}

/// Mean and sample standard deviation; 0 spread for fewer than two values.
pub(crate) fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (0.0, 0.0);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

fn splitmix(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

fn run_seed(master: u64, scenario: Scenario, run: usize, attempt: usize) -> u64 {
    splitmix(splitmix(splitmix(master ^ scenario as u64) ^ run as u64) ^ attempt as u64)
}

enum RunOutcome {
    Scored(RunRecord, AnswerEvaluation),
    Diverged,
}

struct Harness<'a> {
    workspace: &'a Workspace,
    planned: &'a Planned,
    admissible: Admissible,
    config: &'a ExperimentConfig,
}

impl Harness<'_> {
    fn run_once(&self, scenario: Scenario, run: usize, seed: u64) -> Result<RunOutcome, (RunRecord, MonitorError)> {
        let blank = |error: &MonitorError| RunRecord {
            scenario,
            run,
            seed,
            redraws: 0,
            question: String::new(),
            t: 0,
            horizon: 0,
            answer: String::new(),
            predicted: Vec::new(),
            dropped: Vec::new(),
            soundness: None,
            completeness: None,
            error: Some(error.to_string()),
        };
        let fail = |e: MonitorError| (blank(&e), e);
        let p = self.planned;
        let task = p.compiled.task();
        let plan = determinize(task, &p.policy, &p.graph, &mut SeededChooser::new(seed), DeterminizeOptions::default())
            .map_err(|e| fail(e.into()))?;
        let full = plan_trace(&p.compiled, &plan);
        let mut session = Session::start_verified(
            p.compiled.clone(),
            p.policy.clone(),
            p.graph.clone(),
            Box::new(SeededChooser::new(seed)),
        );
        let mut rng = ChaCha8Rng::seed_from_u64(splitmix(seed ^ 0x7175_6572_7921));
        let world_steps = full.len() - 1;
        for k in 1..=world_steps {
            match session.step(None).map_err(|e| fail(e.into()))? {
                StepOutcome::Stepped(_) => {}
                StepOutcome::NeedsChoice(_) => return Ok(RunOutcome::Diverged),
            }
            if k == world_steps || rng.random_bool(self.config.schedule.probability(k)) {
                break;
            }
        }
        let question = QuestionPool::builtin().sample(scenario, &mut rng);
        let answer_client =
            LlmClient::new(self.config.answer_backend.clone().with_seed(splitmix(seed ^ 1))).map_err(|e| fail(e.into()))?;
        let extractor =
            LlmClient::new(self.config.extractor_backend.clone().with_seed(splitmix(seed ^ 2))).map_err(|e| fail(e.into()))?;
        let ctx = QueryContext {
            workspace: self.workspace,
            session: &session,
            plan: &full,
        };
        let answer = match ask(&ctx, &question, &answer_client) {
            Ok(a) => a,
            Err(MonitorError::Diverged(_)) => return Ok(RunOutcome::Diverged),
            Err(e) => return Err(fail(e)),
        };
        let extraction = extract_fluents(&answer.text, &self.admissible, &extractor).map_err(fail)?;
        let eval = score(&extraction.prediction, &full.fluent_sets(), answer.t, scenario).map_err(fail)?;
        session.run_to_goal().map_err(|e| fail(e.into()))?;
        if session.trace() != &full {
            return Ok(RunOutcome::Diverged);
        }
        Ok(RunOutcome::Scored(
            RunRecord {
                scenario,
                run,
                seed,
                redraws: 0,
                question: question.text,
                t: answer.t,
                horizon: full.len(),
                answer: answer.text,
                predicted: extraction.prediction.all().into_iter().collect(),
                dropped: extraction.dropped,
                soundness: Some(eval.soundness),
                completeness: Some(eval.completeness),
                error: None,
            },
            eval,
        ))
    }
}

/// Runs `config.runs` simulated executions per scenario, each questioned
/// once at a random instant, and aggregates the scores.
pub fn run_experiments(workspace: &Workspace, config: &ExperimentConfig) -> Result<ExperimentReport, MonitorError> {
    if config.runs == 0 {
        return Err(MonitorError::Config("runs must be at least 1".into()));
    }
    if config.scenarios.is_empty() {
        return Err(MonitorError::Config("no scenarios".into()));
    }
    let goal = parse_ltlf(&config.goal).map_err(|e| MonitorError::Config(format!("goal: {e}")))?;
    let planned = workspace.plan(&goal)?;
    let harness = Harness {
        workspace,
        planned: &planned,
        admissible: Admissible::new(&workspace.domain, &workspace.problem).with_landmarks(&workspace.alphabet),
        config,
    };
    let mut rows = Vec::new();
    let mut records = Vec::new();
    let mut evaluations = Vec::new();
    for &scenario in &config.scenarios {
        let mut s = Vec::new();
        let mut c = Vec::new();
        let mut failed = 0;
        let mut redrawn = 0;
        for run in 0..config.runs {
            let mut attempt = 0;
            loop {
                let seed = run_seed(config.seed, scenario, run, attempt);
                match harness.run_once(scenario, run, seed) {
                    Ok(RunOutcome::Scored(mut rec, eval)) => {
                        rec.redraws = attempt;
                        s.push(eval.soundness);
                        c.push(eval.completeness);
                        records.push(rec);
                        evaluations.push(eval);
                        break;
                    }
                    Ok(RunOutcome::Diverged) if attempt < config.max_redraws => {
                        log::info!("{scenario} run {run} left its plan, drawing again");
                        redrawn += 1;
                        attempt += 1;
                    }
                    Ok(RunOutcome::Diverged) => {
                        let e = MonitorError::Diverged(0);
                        log::warn!("{scenario} run {run}: {e}");
                        failed += 1;
                        break;
                    }
                    Err((mut rec, e)) => {
                        log::warn!("{scenario} run {run} failed: {e}");
                        rec.redraws = attempt;
                        records.push(rec);
                        failed += 1;
                        break;
                    }
                }
            }
        }
        let (sm, ss) = mean_std(&s);
        let (cm, cs) = mean_std(&c);
        rows.push(ScenarioSummary {
            scenario,
            category: scenario.exemplar().to_string(),
            runs: s.len(),
            failed,
            redrawn,
            soundness_mean: sm,
            soundness_std: ss,
            completeness_mean: cm,
            completeness_std: cs,
        });
    }
    let past_histogram = offset_histogram(evaluations.iter().filter(|e| e.scenario == Scenario::Past));
    let future_histogram = offset_histogram(evaluations.iter().filter(|e| e.scenario == Scenario::Future));
    Ok(ExperimentReport {
        rows,
        records,
        evaluations,
        past_histogram,
        future_histogram,
    })
}
