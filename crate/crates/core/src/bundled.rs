//! Example diagrams shipped with the crate.

use crate::graph::{parse_graph, CausalGraph};

pub const FIG1: &str = include_str!("../graphs/fig1.dag");
pub const FIG1_TEMPLATE: &str = include_str!("../graphs/fig1_template.dag");
/// Drops `X -> Z` in the pattern with X missing.
pub const FIG1_MODS: &str = include_str!("../graphs/fig1.mods.toml");
pub const FIG6: &str = include_str!("../graphs/fig6.dag");
pub const MOTIVATING: &str = include_str!("../graphs/motivating.dag");
pub const MOTIVATING_MODS: &str = include_str!("../graphs/motivating.mods.toml");
/// Hand-drawn template for the subgroup with both confounders missing
/// (no roles block).
pub const MOTIVATING_NEITHER: &str = include_str!("../graphs/motivating_neither.dag");

/// `(name, source, mods)` for every bundled diagram that has roles.
pub const ALL: [(&str, &str, Option<&str>); 4] = [
    ("fig1", FIG1, Some(FIG1_MODS)),
    ("fig1_template", FIG1_TEMPLATE, Some(FIG1_MODS)),
    ("fig6", FIG6, None),
    ("motivating", MOTIVATING, Some(MOTIVATING_MODS)),
];

pub fn graph(source: &str) -> CausalGraph {
    parse_graph(source).expect("bundled diagrams parse")
}
