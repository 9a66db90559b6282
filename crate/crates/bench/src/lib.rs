//! Inputs shared by the benchmarks.

use std::collections::BTreeSet;

use procmon_core::ltlf::{parse_ltlf, Formula};
use procmon_core::Workspace;

pub const GOALS: &[&str] = &[
    "F robot_at_loc_l1",
    "F(harvested_g1 & F robot_at_loc_l0)",
    "G(robot_at_loc_l1 <-> X call_support)",
    "!robot_at_loc_l2 U harvested_g1",
];

pub fn goals() -> Vec<(&'static str, Formula)> {
    GOALS.iter().map(|g| (*g, parse_ltlf(g).expect("valid goal"))).collect()
}

pub fn workspace() -> Workspace {
    Workspace::vineyard()
}

/// `len` instants over `width` fluents; fluent k holds at instant i when
/// (i + k) is not a multiple of 3.
pub fn synthetic_trace(len: usize, width: usize) -> Vec<BTreeSet<String>> {
    (0..len)
        .map(|i| (0..width).filter(|k| (i + k) % 3 != 0).map(|k| format!("(f{k})")).collect())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inputs_are_usable() {
        let w = workspace();
        for (_, g) in goals() {
            w.resolve_atoms(&g).unwrap();
        }
        let t = synthetic_trace(4, 3);
        assert_eq!(t.len(), 4);
        assert!(!t[0].contains("(f0)") && t[0].contains("(f1)"));
    }
}
