use std::collections::BTreeSet;

use super::{Atom, Formula, LtlfError};

/// Atoms true at one instant.
pub type Interpretation = BTreeSet<Atom>;

/// A non-empty finite sequence of interpretations.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Trace {
    steps: Vec<Interpretation>,
}

impl Trace {
    pub fn new(steps: Vec<Interpretation>) -> Result<Self, LtlfError> {
        if steps.is_empty() {
            return Err(LtlfError::EmptyTrace);
        }
        Ok(Trace { steps })
    }

    /// Convenience constructor from atom names.
    pub fn from_names(steps: &[&[&str]]) -> Result<Self, LtlfError> {
        let steps = steps
            .iter()
            .map(|s| s.iter().map(|n| Atom::new(*n)).collect::<Result<_, _>>())
            .collect::<Result<Vec<_>, _>>()?;
        Trace::new(steps)
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn steps(&self) -> &[Interpretation] {
        &self.steps
    }
}

/// Finite-trace satisfaction at the first instant.
///
/// Computed bottom-up: one truth vector per subformula, filled from the last
/// instant backwards, so the cost is linear in `|f| * |t|`.
pub fn evaluate(f: &Formula, t: &Trace) -> bool {
    truth(f, t.steps())[0]
}

fn truth(f: &Formula, steps: &[Interpretation]) -> Vec<bool> {
    let n = steps.len();
    match f {
        Formula::True => vec![true; n],
        Formula::False => vec![false; n],
        Formula::Atom(a) => steps.iter().map(|s| s.contains(a)).collect(),
        Formula::Not(g) => truth(g, steps).into_iter().map(|v| !v).collect(),
        Formula::And(l, r) => zip(truth(l, steps), truth(r, steps), |a, b| a && b),
        Formula::Or(l, r) => zip(truth(l, steps), truth(r, steps), |a, b| a || b),
        Formula::Implies(l, r) => zip(truth(l, steps), truth(r, steps), |a, b| !a || b),
        Formula::Iff(l, r) => zip(truth(l, steps), truth(r, steps), |a, b| a == b),
        Formula::Next(g) => {
            let v = truth(g, steps);
            (0..n).map(|i| i + 1 < n && v[i + 1]).collect()
        }
        Formula::WeakNext(g) => {
            let v = truth(g, steps);
            (0..n).map(|i| i + 1 >= n || v[i + 1]).collect()
        }
        Formula::Eventually(g) => {
            let v = truth(g, steps);
            let mut out = vec![false; n];
            let mut acc = false;
            for i in (0..n).rev() {
                acc = acc || v[i];
                out[i] = acc;
            }
            out
        }
        Formula::Globally(g) => {
            let v = truth(g, steps);
            let mut out = vec![false; n];
            let mut acc = true;
            for i in (0..n).rev() {
                acc = acc && v[i];
                out[i] = acc;
            }
            out
        }
        Formula::Until(l, r) => {
            let lv = truth(l, steps);
            let rv = truth(r, steps);
            let mut out = vec![false; n];
            let mut acc = false;
            for i in (0..n).rev() {
                acc = rv[i] || (lv[i] && acc);
                out[i] = acc;
            }
            out
        }
    }
}

fn zip(a: Vec<bool>, b: Vec<bool>, op: impl Fn(bool, bool) -> bool) -> Vec<bool> {
    a.into_iter().zip(b).map(|(x, y)| op(x, y)).collect()
}
