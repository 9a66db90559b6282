use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;

use super::{Attachment, BackendConfig, BackendKind, ChatRequest, ChatResponse, LlmError, ScriptRule};

pub const MOCK_EMBEDDING_DIM: usize = 64;

#[derive(Clone, Debug)]
pub(super) struct MockBackend {
    name: String,
    kind: BackendKind,
    seed: u64,
    rules: Vec<ScriptRule>,
}

#[derive(Deserialize)]
struct ScriptFile {
    #[serde(default)]
    rule: Vec<ScriptRule>,
}

impl MockBackend {
    pub(super) fn new(config: &BackendConfig) -> Result<Self, LlmError> {
        let mut rules = Vec::new();
        if let BackendKind::MockScripted { rules: inline, file } = &config.kind {
            rules.extend(inline.iter().cloned());
            if let Some(path) = file {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| LlmError::Config(format!("cannot read {}: {e}", path.display())))?;
                let parsed: ScriptFile = toml::from_str(&text)
                    .map_err(|e| LlmError::Config(format!("bad script {}: {e}", path.display())))?;
                rules.extend(parsed.rule);
            }
        }
        Ok(MockBackend {
            name: config.name(),
            kind: config.kind.clone(),
            seed: config.seed,
            rules,
        })
    }

    pub(super) fn chat(&self, req: &ChatRequest) -> Result<ChatResponse, LlmError> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed ^ req.fingerprint());
        let text = match &self.kind {
            BackendKind::MockScripted { .. } => {
                let user = req.user.to_lowercase();
                self.rules
                    .iter()
                    .find(|r| user.contains(&r.when.to_lowercase()))
                    .map(|r| r.answer.clone())
                    .ok_or_else(|| LlmError::Mock("no scripted answer matches the request".into()))?
            }
            kind => {
                let a = req
                    .attachment
                    .as_ref()
                    .ok_or_else(|| LlmError::Mock("mock backend needs ground truth on the request".into()))?;
                let a = match kind {
                    BackendKind::MockLossy { rate } => drop_items(a, *rate, &mut rng),
                    BackendKind::MockHallucinating { rate } => add_spurious(a, *rate, &mut rng),
                    _ => a.clone(),
                };
                render(&a)
            }
        };
        Ok(ChatResponse {
            text,
            backend: self.name.clone(),
            latency_ms: 0,
            attempts: 1,
            prompt_tokens: None,
            completion_tokens: None,
        })
    }
}

fn drop_items(a: &Attachment, rate: f64, rng: &mut ChaCha8Rng) -> Attachment {
    let mut keep = |v: &[String]| -> Vec<String> { v.iter().filter(|_| !rng.random_bool(rate)).cloned().collect() };
    match a {
        Attachment::Facts {
            steps,
            universe,
            per_instant,
        } => Attachment::Facts {
            steps: steps.iter().map(|(i, f)| (*i, keep(f))).collect(),
            universe: universe.clone(),
            per_instant: *per_instant,
        },
        Attachment::Items(v) => Attachment::Items(keep(v)),
        Attachment::Text(t) => Attachment::Text(t.clone()),
    }
}

fn add_spurious(a: &Attachment, rate: f64, rng: &mut ChaCha8Rng) -> Attachment {
    match a {
        Attachment::Facts {
            steps,
            universe,
            per_instant,
        } => {
            let steps = steps
                .iter()
                .map(|(i, facts)| {
                    let mut out = facts.clone();
                    let pool: Vec<&String> = universe.iter().filter(|u| !facts.contains(u)).collect();
                    for _ in facts {
                        if !pool.is_empty() && rng.random_bool(rate) {
                            let pick = pool[rng.random_range(0..pool.len())].clone();
                            if !out.contains(&pick) {
                                out.push(pick);
                            }
                        }
                    }
                    (*i, out)
                })
                .collect();
            Attachment::Facts {
                steps,
                universe: universe.clone(),
                per_instant: *per_instant,
            }
        }
        other => other.clone(),
    }
}

fn fact_list(facts: &[String]) -> String {
    if facts.is_empty() {
        "nothing of note holds".into()
    } else {
        facts.join(", ")
    }
}

/// The oracle's sentence frames.
pub(super) fn render(a: &Attachment) -> String {
    match a {
        Attachment::Facts {
            steps, per_instant, ..
        } => {
            if *per_instant {
                steps
                    .iter()
                    .map(|(i, f)| format!("At step {i}: {}.", fact_list(f)))
                    .collect::<Vec<_>>()
                    .join("\n")
            } else {
                let all: Vec<String> = steps.iter().flat_map(|(_, f)| f.iter().cloned()).collect();
                format!("Right now {}.", fact_list(&all))
            }
        }
        Attachment::Items(v) => v.join("\n"),
        Attachment::Text(t) => t.clone(),
    }
}

fn fnv(token: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in token.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}

/// Sum of per-token ±1 vectors (bit j of the token's FNV-1a hash picks the
/// sign of coordinate j), normalised to unit length. Tokens are lowercase
/// alphanumeric runs.
pub fn mock_embedding(text: &str) -> Vec<f32> {
    let mut v = vec![0f32; MOCK_EMBEDDING_DIM];
    for token in text
        .to_lowercase()
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
    {
        let h = fnv(token);
        for (j, x) in v.iter_mut().enumerate() {
            *x += if (h >> j) & 1 == 1 { 1.0 } else { -1.0 };
        }
    }
    let norm: f32 = v.iter().map(|x| x * x).sum::<f32>().sqrt();
    if norm > 0.0 {
        for x in &mut v {
            *x /= norm;
        }
    }
    v
}
