use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write;

use serde::{Deserialize, Serialize};

use super::{MonitorError, Scenario};

pub type FluentSet = BTreeSet<String>;

/// Fluents read off an answer. Answers about several instants may scope
/// facts to a step; scoped facts count only at their instant, unscoped ones
/// at every instant.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum Prediction {
    Single(FluentSet),
    PerInstant {
        steps: BTreeMap<usize, FluentSet>,
        unscoped: FluentSet,
    },
}

impl Prediction {
    pub fn single<I: IntoIterator<Item = S>, S: Into<String>>(fluents: I) -> Self {
        Prediction::Single(fluents.into_iter().map(Into::into).collect())
    }

    /// f̂ as judged at instant `i`.
    pub fn at(&self, i: usize) -> FluentSet {
        match self {
            Prediction::Single(f) => f.clone(),
            Prediction::PerInstant { steps, unscoped } => {
                let mut f = unscoped.clone();
                if let Some(s) = steps.get(&i) {
                    f.extend(s.iter().cloned());
                }
                f
            }
        }
    }

    /// Every predicted fluent regardless of scope.
    pub fn all(&self) -> FluentSet {
        match self {
            Prediction::Single(f) => f.clone(),
            Prediction::PerInstant { steps, unscoped } => {
                steps.values().flatten().chain(unscoped).cloned().collect()
            }
        }
    }

    pub fn is_empty(&self) -> bool {
        self.all().is_empty()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InstantScore {
    pub i: usize,
    pub soundness: f64,
    pub completeness: f64,
    pub predicted: usize,
    pub actual: usize,
    pub correct: usize,
    pub hallucinated: usize,
    pub missing: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnswerEvaluation {
    pub scenario: Scenario,
    pub t: usize,
    #[serde(rename = "T")]
    pub horizon: usize,
    pub prediction: Prediction,
    pub instants: Vec<InstantScore>,
    pub soundness: f64,
    pub completeness: f64,
    /// Some instant had an empty prediction.
    pub empty_prediction: bool,
    /// The range is outside `1 <= t < T` (past) or `1 < t <= T` (future).
    pub degenerate: bool,
}

/// Soundness and completeness of one prediction against one state. An empty
/// prediction is sound and, unless the state is empty too, has completeness
/// 0. An empty state is fully covered by any prediction.
pub fn instant_score(i: usize, predicted: &FluentSet, actual: &FluentSet) -> InstantScore {
    let correct = predicted.intersection(actual).count();
    let soundness = if predicted.is_empty() {
        1.0
    } else {
        correct as f64 / predicted.len() as f64
    };
    let completeness = if actual.is_empty() {
        1.0
    } else {
        correct as f64 / actual.len() as f64
    };
    InstantScore {
        i,
        soundness,
        completeness,
        predicted: predicted.len(),
        actual: actual.len(),
        correct,
        hallucinated: predicted.len() - correct,
        missing: actual.len() - correct,
    }
}

/// Scores `prediction` against the states `trace[0] = f_1 .. f_T` at query
/// instant `t` (1-based).
pub fn score(
    prediction: &Prediction,
    trace: &[FluentSet],
    t: usize,
    scenario: Scenario,
) -> Result<AnswerEvaluation, MonitorError> {
    let horizon = trace.len();
    if t == 0 || t > horizon {
        return Err(MonitorError::InstantOutOfRange { t, horizon });
    }
    let range = match scenario {
        Scenario::Present => t..=t,
        Scenario::Past => 1..=t,
        Scenario::Future => t..=horizon,
    };
    let degenerate = match scenario {
        Scenario::Present => false,
        Scenario::Past => t >= horizon,
        Scenario::Future => t <= 1,
    };
    let instants: Vec<InstantScore> = range
        .map(|i| instant_score(i, &prediction.at(i), &trace[i - 1]))
        .collect();
    let n = instants.len() as f64;
    let soundness = instants.iter().map(|s| s.soundness).sum::<f64>() / n;
    let completeness = instants.iter().map(|s| s.completeness).sum::<f64>() / n;
    Ok(AnswerEvaluation {
        scenario,
        t,
        horizon,
        empty_prediction: instants.iter().any(|s| s.predicted == 0),
        prediction: prediction.clone(),
        instants,
        soundness,
        completeness,
        degenerate,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HistogramBin {
    pub offset: usize,
    pub correct: f64,
    pub hallucinated: f64,
    pub missing: f64,
    pub n: usize,
}

/// Fractions of correct, hallucinated and missing fluents by `|i - t|`.
/// Correct and missing are shares of `|f_i|`, hallucinated a share of
/// `|f̂_i|`; each bin averages its samples.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct OffsetHistogram {
    pub bins: Vec<HistogramBin>,
    pub skipped: usize,
}

impl OffsetHistogram {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("offset,correct,hallucinated,missing,n\n");
        for b in &self.bins {
            let _ = writeln!(
                out,
                "{},{:.6},{:.6},{:.6},{}",
                b.offset, b.correct, b.hallucinated, b.missing, b.n
            );
        }
        out
    }

    pub fn is_empty(&self) -> bool {
        self.bins.is_empty()
    }
}

pub fn offset_histogram<'a>(evaluations: impl IntoIterator<Item = &'a AnswerEvaluation>) -> OffsetHistogram {
    let mut sums: BTreeMap<usize, (f64, f64, f64, usize)> = BTreeMap::new();
    let mut skipped = 0;
    for e in evaluations {
        if e.scenario == Scenario::Present {
            continue;
        }
        if e.horizon <= 1 {
            log::warn!("skipping a {} evaluation over a single-state trace", e.scenario);
            skipped += 1;
            continue;
        }
        for s in &e.instants {
            let (correct, missing) = if s.actual == 0 {
                (1.0, 0.0)
            } else {
                (s.correct as f64 / s.actual as f64, s.missing as f64 / s.actual as f64)
            };
            let hallucinated = if s.predicted == 0 {
                0.0
            } else {
                s.hallucinated as f64 / s.predicted as f64
            };
            let bin = sums.entry(s.i.abs_diff(e.t)).or_default();
            bin.0 += correct;
            bin.1 += hallucinated;
            bin.2 += missing;
            bin.3 += 1;
        }
    }
    OffsetHistogram {
        bins: sums
            .into_iter()
            .map(|(offset, (c, h, m, n))| HistogramBin {
                offset,
                correct: c / n as f64,
                hallucinated: h / n as f64,
                missing: m / n as f64,
                n,
            })
            .collect(),
        skipped,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(v: &[&str]) -> FluentSet {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn hand_example() {
        let trace = [set(&["a"]), set(&["a", "b"])];
        let e = score(&Prediction::single(["a"]), &trace, 2, Scenario::Past).unwrap();
        assert_eq!(e.completeness, 0.75);
        assert_eq!(e.soundness, 1.0);
        assert!(e.degenerate);
    }

    #[test]
    fn half_overlap() {
        let trace = [set(&["b", "c"])];
        let e = score(&Prediction::single(["a", "b"]), &trace, 1, Scenario::Present).unwrap();
        assert_eq!((e.soundness, e.completeness), (0.5, 0.5));
    }

    #[test]
    fn identity_and_empty_conventions() {
        let trace = [set(&["a"]), set(&["b"])];
        let e = score(&Prediction::single(["b"]), &trace, 2, Scenario::Present).unwrap();
        assert_eq!((e.soundness, e.completeness), (1.0, 1.0));
        let e = score(&Prediction::Single(FluentSet::new()), &trace, 1, Scenario::Present).unwrap();
        assert_eq!((e.soundness, e.completeness), (1.0, 0.0));
        assert!(e.empty_prediction);
        assert!(matches!(
            score(&Prediction::single(["a"]), &trace, 3, Scenario::Past),
            Err(MonitorError::InstantOutOfRange { t: 3, horizon: 2 })
        ));
        assert!(score(&Prediction::single(["a"]), &trace, 0, Scenario::Past).is_err());
    }

    #[test]
    fn per_instant_predictions_score_each_step() {
        let trace = [set(&["a"]), set(&["b"]), set(&["c"])];
        let p = Prediction::PerInstant {
            steps: [(2, set(&["b"])), (3, set(&["c"]))].into_iter().collect(),
            unscoped: FluentSet::new(),
        };
        let e = score(&p, &trace, 2, Scenario::Future).unwrap();
        assert_eq!((e.soundness, e.completeness), (1.0, 1.0));
        assert!(!e.degenerate);
        let e = score(&p, &trace, 2, Scenario::Past).unwrap();
        assert_eq!(e.completeness, 0.5);
    }

    #[test]
    fn histogram_offsets() {
        let trace = [set(&["a", "x"]), set(&["b", "x"]), set(&["c", "x"])];
        let e = score(&Prediction::single(["b", "x"]), &trace, 2, Scenario::Future).unwrap();
        let h = offset_histogram([&e]);
        assert_eq!(h.bins.len(), 2);
        assert_eq!((h.bins[0].correct, h.bins[0].hallucinated, h.bins[0].missing), (1.0, 0.0, 0.0));
        assert_eq!((h.bins[1].correct, h.bins[1].hallucinated, h.bins[1].missing), (0.5, 0.5, 0.5));
        for b in &h.bins {
            assert!((b.correct + b.missing - 1.0).abs() < 1e-12);
        }
        assert!(h.to_csv().starts_with("offset,correct,hallucinated,missing,n\n0,1.000000"));
    }

    #[test]
    fn single_state_past_is_skipped() {
        let e = score(&Prediction::single(["a"]), &[set(&["a"])], 1, Scenario::Past).unwrap();
        let h = offset_histogram([&e]);
        assert!(h.is_empty());
        assert_eq!(h.skipped, 1);
    }
}
