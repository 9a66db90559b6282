use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write;
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::llmclient::{Attachment, BackendKind, ChatRequest, LlmClient};
use crate::nlfront::text::normalize;
use crate::nlfront::SymbolAlphabet;
use crate::pddl::{Domain, GroundAtom, Problem};

use super::{FluentSet, MonitorError, Prediction};

pub const EXTRACTOR_SYSTEM_PROMPT: &str = "You are a FluentExtractor. Given a sentence describing the state of \
a robot and its environment, a list of admissible fluents in general form and a list of admissible objects, \
output the grounded fluents the sentence states to be true, one PDDL atom per line. When the sentence talks \
about several time steps, start each group with `At step N:`. Output nothing else.";

/// The fluents and objects an extraction may produce.
#[derive(Clone, Debug)]
pub struct Admissible {
    domain: Domain,
    predicates: Vec<(String, Vec<String>)>,
    objects: Vec<(String, String)>,
    mentions: Vec<(String, String)>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Extraction {
    pub prediction: Prediction,
    /// Candidates the backend proposed that are not admissible groundings.
    pub dropped: Vec<String>,
    pub empty: bool,
    pub raw: String,
}

impl Admissible {
    pub fn new(domain: &Domain, problem: &Problem) -> Self {
        let predicates = domain
            .predicates
            .iter()
            .map(|p| (p.name.clone(), p.params.iter().map(|t| t.ty.clone()).collect()))
            .collect();
        let objects = problem
            .objects
            .iter()
            .chain(&domain.constants)
            .map(|o| (o.name.clone(), o.ty.clone()))
            .collect();
        Admissible {
            domain: domain.clone(),
            predicates,
            objects,
            mentions: Vec::new(),
        }
    }

    /// Lets the mock extractor recognise landmark descriptions and aliases.
    pub fn with_landmarks(mut self, alphabet: &SymbolAlphabet) -> Self {
        for l in alphabet.landmarks() {
            let Some(f) = l.fluent.as_deref() else { continue };
            for m in l.mentions() {
                self.mentions.push((normalize(m), f.to_string()));
            }
        }
        self.mentions.sort_by(|a, b| b.0.len().cmp(&a.0.len()).then(a.cmp(b)));
        self
    }

    /// `(robot-at ?var1)` style forms.
    pub fn general_forms(&self) -> Vec<String> {
        self.predicates
            .iter()
            .map(|(name, params)| {
                let mut s = format!("({name}");
                for i in 1..=params.len() {
                    let _ = write!(s, " ?var{i}");
                }
                s + ")"
            })
            .collect()
    }

    pub fn object_names(&self) -> Vec<String> {
        self.objects.iter().map(|(n, _)| n.clone()).collect()
    }

    /// Why `atom` is not an admissible grounding, if it is not.
    pub fn check(&self, atom: &GroundAtom) -> Result<(), String> {
        let (_, params) = self
            .predicates
            .iter()
            .find(|(n, _)| *n == atom.predicate)
            .ok_or_else(|| format!("unknown predicate `{}`", atom.predicate))?;
        if params.len() != atom.args.len() {
            return Err(format!("`{}` takes {} arguments", atom.predicate, params.len()));
        }
        for (arg, ty) in atom.args.iter().zip(params) {
            let (_, oty) = self
                .objects
                .iter()
                .find(|(n, _)| n == arg)
                .ok_or_else(|| format!("unknown object `{arg}`"))?;
            if !self.domain.is_subtype(oty, ty) {
                return Err(format!("`{arg}` is a {oty}, not a {ty}"));
            }
        }
        Ok(())
    }
}

fn step_marker() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(?i)\bat step (\d+)\s*:").unwrap())
}

fn atom_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"\([^()]*\)").unwrap())
}

/// Splits an answer into an unscoped part and `At step N:` parts.
fn segments(text: &str) -> (String, Vec<(usize, String)>) {
    let re = step_marker();
    let mut scoped = Vec::new();
    let first = re.find(text).map_or(text.len(), |m| m.start());
    let caps: Vec<_> = re.captures_iter(text).collect();
    for (k, c) in caps.iter().enumerate() {
        let whole = c.get(0).unwrap();
        let end = caps.get(k + 1).map_or(text.len(), |n| n.get(0).unwrap().start());
        let n: usize = c[1].parse().unwrap_or(0);
        scoped.push((n, text[whole.end()..end].to_string()));
    }
    (text[..first].to_string(), scoped)
}

/// Candidate atoms of an answer: the unscoped ones and those per step.
pub fn parse_fluent_answer(text: &str) -> (Vec<String>, BTreeMap<usize, Vec<String>>) {
    let atoms = |s: &str| atom_re().find_iter(s).map(|m| m.as_str().to_string()).collect::<Vec<_>>();
    let (head, scoped) = segments(text);
    let mut steps: BTreeMap<usize, Vec<String>> = BTreeMap::new();
    for (n, body) in scoped {
        steps.entry(n).or_default().extend(atoms(&body));
    }
    (atoms(&head), steps)
}

/// Deterministic stand-in for the extractor model: keeps the atoms written in
/// the sentence and adds the fluents of landmarks it mentions.
fn mock_extract(sentence: &str, admissible: &Admissible) -> String {
    let scan = |s: &str| -> Vec<String> {
        let mut found: Vec<String> = atom_re().find_iter(s).map(|m| m.as_str().to_string()).collect();
        let rest = format!(" {} ", normalize(&atom_re().replace_all(s, " ")));
        for (phrase, fluent) in &admissible.mentions {
            if rest.contains(&format!(" {phrase} ")) && !found.contains(fluent) {
                found.push(fluent.clone());
            }
        }
        found
    };
    let (head, scoped) = segments(sentence);
    let mut out: Vec<String> = scan(&head);
    for (n, body) in scoped {
        out.push(format!("At step {n}: {}", scan(&body).join(" ")));
    }
    out.join("\n")
}

/// Turns a state description into grounded fluents of the task. Candidates
/// outside `admissible` are dropped and logged.
pub fn extract_fluents(sentence: &str, admissible: &Admissible, client: &LlmClient) -> Result<Extraction, MonitorError> {
    if admissible.predicates.is_empty() {
        return Err(MonitorError::NothingAdmissible("fluents"));
    }
    if admissible.objects.is_empty() {
        return Err(MonitorError::NothingAdmissible("objects"));
    }
    let user = format!(
        "SENTENCE:\n{}\n\nADMISSIBLE FLUENTS:\n{}\n\nADMISSIBLE OBJECTS:\n{}\n",
        sentence.trim(),
        admissible.general_forms().join("\n"),
        admissible.object_names().join(" ")
    );
    let mut req = ChatRequest::new(EXTRACTOR_SYSTEM_PROMPT, user);
    let cfg = client.config();
    if cfg.is_mock() && !matches!(cfg.kind, BackendKind::MockScripted { .. }) {
        req = req.with_attachment(Attachment::Text(mock_extract(sentence, admissible)));
    }
    let raw = client.chat(&req)?.text;
    let (head, steps) = parse_fluent_answer(&raw);
    let mut dropped = Vec::new();
    let mut keep = |cands: Vec<String>| -> FluentSet {
        let mut out = BTreeSet::new();
        for c in cands {
            let verdict = GroundAtom::parse(&c)
                .ok_or_else(|| "not an atom".to_string())
                .and_then(|a| admissible.check(&a).map(|_| a));
            match verdict {
                Ok(a) => {
                    out.insert(a.to_string());
                }
                Err(why) => {
                    log::warn!("dropping extracted fluent {c}: {why}");
                    dropped.push(c);
                }
            }
        }
        out
    };
    let unscoped = keep(head);
    let prediction = if steps.is_empty() {
        Prediction::Single(unscoped)
    } else {
        let steps = steps.into_iter().map(|(n, c)| (n, keep(c))).collect();
        Prediction::PerInstant { steps, unscoped }
    };
    Ok(Extraction {
        empty: prediction.is_empty(),
        prediction,
        dropped,
        raw,
    })
}
