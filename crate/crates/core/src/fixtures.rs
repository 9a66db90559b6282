//! The vineyard example shipped with the crate.

pub const VINEYARD_DOMAIN: &str = include_str!("../fixtures/vineyard/domain.pddl");
pub const VINEYARD_PROBLEM: &str = include_str!("../fixtures/vineyard/problem.pddl");
pub const VINEYARD_HARVEST_PROBLEM: &str = include_str!("../fixtures/vineyard/problem-harvest.pddl");
pub const VINEYARD_UNSOLVABLE_PROBLEM: &str = include_str!("../fixtures/vineyard/problem-unsolvable.pddl");
pub const VINEYARD_LANDMARKS: &str = include_str!("../fixtures/vineyard/landmarks.toml");

pub const PATTERN_TRACES: &str = include_str!("../fixtures/nl/pattern_traces.toml");
pub const RER_ORACLE: &str = include_str!("../fixtures/nl/rer_oracle.tsv");
pub const RER_VANILLA: &str = include_str!("../fixtures/nl/rer/vanilla-16.tsv");
pub const RER_GENERIC_11: &str = include_str!("../fixtures/nl/rer/generic-11.tsv");
pub const RER_GENERIC_18: &str = include_str!("../fixtures/nl/rer/generic-18.tsv");
pub const QUESTIONS: &str = include_str!("../fixtures/nl/questions.toml");
