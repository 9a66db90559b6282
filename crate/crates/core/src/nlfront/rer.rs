//! Referring-expression recognition.
//!
//! The recogniser asks the chat backend for the spans of a sentence that
//! denote domain concepts, one per line. Mock backends answer from ground
//! truth attached to the request: the caller's expected spans when known,
//! else the hand-labelled oracle table, else the spans captured by the slots
//! of a matching pattern phrasing.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use super::patterns::{pieces, Pattern, Piece};
use super::text::normalize;
use super::NlError;
use crate::fixtures;
use crate::llmclient::{Attachment, BackendKind, ChatRequest, LlmClient};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReferringExpression {
    pub text: String,
    /// Byte offset of the first occurrence in the sentence.
    pub offset: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RerExample {
    pub sentence: String,
    pub expressions: Vec<String>,
}

/// `sentence<TAB>span | span` per line; `#` lines are comments.
pub fn parse_examples(text: &str) -> Result<Vec<RerExample>, NlError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty() && !l.trim_start().starts_with('#'))
        .map(|(n, l)| {
            let (sentence, spans) = l
                .split_once('\t')
                .ok_or_else(|| NlError::Fixture(format!("line {}: expected sentence<TAB>spans", n + 1)))?;
            Ok(RerExample {
                sentence: sentence.trim().to_string(),
                expressions: spans
                    .split('|')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(str::to_string)
                    .collect(),
            })
        })
        .collect()
}

/// Few-shot prompt variants.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum RerProfile {
    #[serde(rename = "vanilla-16")]
    Vanilla16,
    #[serde(rename = "augmented-34-11sym")]
    Augmented11,
    #[serde(rename = "augmented-34-18sym")]
    Augmented18,
}

impl RerProfile {
    pub const ALL: [RerProfile; 3] = [RerProfile::Vanilla16, RerProfile::Augmented11, RerProfile::Augmented18];

    pub fn name(self) -> &'static str {
        match self {
            RerProfile::Vanilla16 => "vanilla-16",
            RerProfile::Augmented11 => "augmented-34-11sym",
            RerProfile::Augmented18 => "augmented-34-18sym",
        }
    }

    /// Row label used in extraction reports.
    pub fn label(self) -> &'static str {
        match self {
            RerProfile::Vanilla16 => "vanilla prompt (16 examples)",
            RerProfile::Augmented11 => "augmented prompt 1 (34 examples, 11 symbols)",
            RerProfile::Augmented18 => "augmented prompt 2 (34 examples, 18 symbols)",
        }
    }

    pub fn examples(self) -> Vec<RerExample> {
        let mut out = parse_examples(fixtures::RER_VANILLA).expect("fixture examples parse");
        let extra = match self {
            RerProfile::Vanilla16 => "",
            RerProfile::Augmented11 => fixtures::RER_GENERIC_11,
            RerProfile::Augmented18 => fixtures::RER_GENERIC_18,
        };
        out.extend(parse_examples(extra).expect("fixture examples parse"));
        out
    }

    pub fn system_prompt(self) -> String {
        static PROMPTS: OnceLock<[String; 3]> = OnceLock::new();
        let all = PROMPTS.get_or_init(|| RerProfile::ALL.map(RerProfile::build_prompt));
        all[self as usize].clone()
    }

    fn build_prompt(self) -> String {
        let mut s = String::from(
            "Extract the referring expressions of the sentence: the phrases that name a place, \
             a condition of the world or an action. Answer with one expression per line, copied \
             verbatim from the sentence, and nothing else.\n\n",
        );
        for ex in self.examples() {
            s.push_str(&format!("Sentence: {}\nExpressions:\n{}\n\n", ex.sentence, ex.expressions.join("\n")));
        }
        s
    }
}

impl fmt::Display for RerProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for RerProfile {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        RerProfile::ALL
            .into_iter()
            .find(|p| p.name() == s.trim())
            .ok_or_else(|| format!("unknown prompt profile `{s}` (expected vanilla-16, augmented-34-11sym or augmented-34-18sym)"))
    }
}

/// Hand-labelled sentence to spans table, keyed by normalised sentence.
#[derive(Clone, Debug, Default)]
pub struct OracleTable {
    rows: BTreeMap<String, Vec<String>>,
}

impl OracleTable {
    pub fn parse(text: &str) -> Result<Self, NlError> {
        Ok(OracleTable {
            rows: parse_examples(text)?
                .into_iter()
                .map(|e| (normalize(&e.sentence), e.expressions))
                .collect(),
        })
    }

    pub fn builtin() -> Self {
        OracleTable::parse(fixtures::RER_ORACLE).expect("fixture oracle table parses")
    }

    pub fn lookup(&self, sentence: &str) -> Option<&[String]> {
        self.rows.get(&normalize(sentence)).map(Vec::as_slice)
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

/// Spans filling the slots of the first phrasing that matches the sentence.
/// Phrasings with more literal text are tried first.
pub fn capture_slots(sentence: &str) -> Option<Vec<String>> {
    static SHAPES: OnceLock<Vec<Regex>> = OnceLock::new();
    let shapes = SHAPES.get_or_init(|| {
        let mut phrasings: Vec<&str> = Pattern::ALL
            .iter()
            .flat_map(|p| p.phrasings().iter().map(|ph| ph.text))
            .collect();
        let literal_len = |t: &str| -> usize {
            pieces(t)
                .iter()
                .map(|p| match p {
                    Piece::Text(s) => s.len(),
                    Piece::Slot { .. } => 0,
                })
                .sum()
        };
        phrasings.sort_by_key(|t| std::cmp::Reverse(literal_len(t)));
        phrasings
            .into_iter()
            .map(|text| {
                let mut re = String::from("^");
                for p in pieces(text) {
                    match p {
                        Piece::Text(t) => re.push_str(&regex::escape(t)),
                        Piece::Slot { .. } => re.push_str("(.+?)"),
                    }
                }
                re.push('$');
                Regex::new(&re).expect("phrasing regex")
            })
            .collect()
    });
    let norm = normalize(sentence);
    let c = shapes.iter().find_map(|re| re.captures(&norm))?;
    let mut spans: Vec<String> = Vec::new();
    for m in c.iter().skip(1).flatten() {
        let s = m.as_str().trim().to_string();
        if !spans.contains(&s) {
            spans.push(s);
        }
    }
    Some(spans)
}

fn mock_spans(sentence: &str, truth: Option<&[String]>, oracle: &OracleTable) -> Option<Vec<String>> {
    if let Some(t) = truth {
        return Some(t.to_vec());
    }
    if let Some(t) = oracle.lookup(sentence) {
        return Some(t.to_vec());
    }
    capture_slots(sentence)
}

/// Parses a backend answer into spans of `sentence`: one per line (`|` also
/// separates), list markers and quotes stripped, spans not found in the
/// sentence dropped, duplicates removed, ordered by position.
pub fn parse_spans(sentence: &str, answer: &str) -> Vec<ReferringExpression> {
    let hay = sentence.to_lowercase();
    let mut out: Vec<ReferringExpression> = Vec::new();
    for raw in answer.lines().flat_map(|l| l.split('|')) {
        let span = raw
            .trim()
            .trim_start_matches(['-', '*', '•'])
            .trim()
            .trim_matches(['"', '\'', '`'])
            .trim();
        if span.is_empty() {
            continue;
        }
        let needle = span.to_lowercase();
        match hay.find(&needle) {
            Some(offset) => {
                if !out.iter().any(|e| e.text.to_lowercase() == needle) {
                    out.push(ReferringExpression {
                        text: sentence[offset..offset + needle.len()].to_string(),
                        offset,
                    });
                }
            }
            None => log::warn!("dropping expression `{span}`: not in sentence"),
        }
    }
    out.sort_by_key(|e| e.offset);
    out
}

pub fn recognize_referring_expressions(
    sentence: &str,
    profile: RerProfile,
    client: &LlmClient,
    truth: Option<&[String]>,
    oracle: &OracleTable,
) -> Result<Vec<ReferringExpression>, NlError> {
    if sentence.trim().is_empty() {
        return Err(NlError::EmptySentence);
    }
    let mut req = ChatRequest::new(profile.system_prompt(), format!("Sentence: {}\nExpressions:", sentence.trim()));
    let cfg = client.config();
    if cfg.is_mock() && !matches!(cfg.kind, BackendKind::MockScripted { .. }) {
        let spans = mock_spans(sentence, truth, oracle).ok_or_else(|| NlError::EmptyExtraction(sentence.to_string()))?;
        req = req.with_attachment(Attachment::Items(spans));
    }
    let resp = client.chat(&req)?;
    let spans = parse_spans(sentence, &resp.text);
    if spans.is_empty() {
        return Err(NlError::EmptyExtraction(sentence.to_string()));
    }
    Ok(spans)
}
