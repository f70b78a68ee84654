//! Pattern-modification files.
//!
//! ```toml
//! [[pattern]]
//! missing = ["Ckd", "Eth"]      # or: pattern = "00"
//! remove = ["Ckd -> Ace", "Eth -> Ace"]
//! ```

use serde::Deserialize;
use thiserror::Error;

use crate::graph::CausalGraph;
use crate::transforms::{Pattern, PatternModification};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModsError {
    #[error("invalid modifications file: {0}")]
    Toml(String),
    #[error("pattern entry {0}: give exactly one of `missing` or `pattern`")]
    AmbiguousPattern(usize),
    #[error("pattern entry {index}: `{value}` is not a bit string of length {expected}")]
    BadBits {
        index: usize,
        value: String,
        expected: usize,
    },
    #[error("pattern entry {index}: `{name}` is not a partially observed confounder")]
    UnknownConfounder { index: usize, name: String },
    #[error("pattern entry {index}: cannot read edge `{text}` (expected `A -> B`)")]
    BadEdge { index: usize, text: String },
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct File {
    #[serde(default)]
    pattern: Vec<Entry>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct Entry {
    missing: Option<Vec<String>>,
    pattern: Option<String>,
    #[serde(default)]
    remove: Vec<String>,
}

fn parse_edge(text: &str) -> Option<(String, String)> {
    let (a, b) = text.split_once("->")?;
    let (a, b) = (a.trim(), b.trim());
    let ok = |s: &str| crate::graph::valid_name(s);
    (ok(a) && ok(b)).then(|| (a.to_string(), b.to_string()))
}

/// Reads a modifications file against `graph`, whose partial confounders fix
/// the bit order.
pub fn parse_mods(src: &str, graph: &CausalGraph) -> Result<Vec<PatternModification>, ModsError> {
    let file: File = toml::from_str(src).map_err(|e| ModsError::Toml(e.to_string()))?;
    let partial = graph.partial_confounders();
    let mut out = Vec::with_capacity(file.pattern.len());
    for (index, entry) in file.pattern.into_iter().enumerate() {
        let pattern = match (entry.missing, entry.pattern) {
            (Some(missing), None) => {
                for name in &missing {
                    if !partial.contains(&name.as_str()) {
                        return Err(ModsError::UnknownConfounder {
                            index,
                            name: name.clone(),
                        });
                    }
                }
                Pattern(
                    partial
                        .iter()
                        .map(|x| !missing.iter().any(|m| m == x))
                        .collect(),
                )
            }
            (None, Some(bits)) => {
                let parsed: Option<Vec<bool>> = bits
                    .chars()
                    .map(|c| match c {
                        '1' => Some(true),
                        '0' => Some(false),
                        _ => None,
                    })
                    .collect();
                match parsed {
                    Some(v) if v.len() == partial.len() => Pattern(v),
                    _ => {
                        return Err(ModsError::BadBits {
                            index,
                            value: bits,
                            expected: partial.len(),
                        })
                    }
                }
            }
            _ => return Err(ModsError::AmbiguousPattern(index)),
        };
        let removed_edges = entry
            .remove
            .iter()
            .map(|t| {
                parse_edge(t).ok_or_else(|| ModsError::BadEdge {
                    index,
                    text: t.clone(),
                })
            })
            .collect::<Result<_, _>>()?;
        out.push(PatternModification {
            pattern,
            removed_edges,
        });
    }
    Ok(out)
}
