//! Derived graphs: single-world intervention templates, twin networks and
//! pattern-restricted subgroup graphs.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{
    BaseKind, CausalGraph, GraphError, Node, NodeRole, Provenance, Restriction, World,
};

/// Suffix that marks potential (counterfactual) versions of variables.
pub const POTENTIAL_SUFFIX: &str = "_z";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TransformError {
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("graph is already transformed (provenance {0})")]
    AlreadyTransformed(String),
    #[error("expected a template or twin network, got provenance {0}")]
    NotDerived(String),
    #[error("treatment `{treatment}` is a descendant of outcome `{outcome}`")]
    TreatmentAfterOutcome { treatment: String, outcome: String },
    #[error("derived node name `{0}` collides with an existing node")]
    NameCollision(String),
    #[error("removed edge {0} -> {1} is not present in the graph")]
    EdgeNotPresent(String, String),
    #[error("removed edge {0} -> {1} does not leave a partially observed confounder")]
    EdgeNotFromConfounder(String, String),
    #[error("removed edge {0} -> {1} enters a partially observed confounder; only arrows out of a confounder may be pattern-modified")]
    EdgeIntoConfounder(String, String),
    #[error("pattern has {got} entries but the graph has {expected} partially observed confounders")]
    PatternDimension { expected: usize, got: usize },
    #[error("graph is already restricted to pattern `{0}`")]
    AlreadyRestricted(String),
}

/// Observed-ness of each partially observed confounder, in the graph's
/// partial-confounder order (sorted by name). `true` means observed.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Pattern(pub Vec<bool>);

impl Pattern {
    pub fn all_observed(k: usize) -> Self {
        Pattern(vec![true; k])
    }

    /// Builds the pattern in which exactly `missing` are unobserved.
    pub fn from_missing(graph: &CausalGraph, missing: &[&str]) -> Result<Self, GraphError> {
        let partial = graph.partial_confounders();
        for m in missing {
            if !partial.contains(m) {
                return Err(GraphError::UnknownNode((*m).to_string()));
            }
        }
        Ok(Pattern(
            partial.iter().map(|p| !missing.contains(p)).collect(),
        ))
    }

    /// Every pattern over `k` confounders, all-observed first.
    pub fn enumerate(k: usize) -> Vec<Pattern> {
        let mut out: Vec<Pattern> = (0..1u64 << k)
            .map(|bits| Pattern((0..k).map(|j| bits >> (k - 1 - j) & 1 == 1).collect()))
            .collect();
        out.reverse();
        out
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn missing_count(&self) -> usize {
        self.0.iter().filter(|b| !**b).count()
    }

    /// `R_1=0, R_2=1` style label using the graph's indicator names.
    pub fn label(&self, graph: &CausalGraph) -> String {
        graph
            .partial_confounders()
            .iter()
            .zip(&self.0)
            .map(|(x, bit)| {
                let r = graph.indicator_of(x).unwrap_or(x);
                format!("{r}={}", u8::from(*bit))
            })
            .collect::<Vec<_>>()
            .join(", ")
    }
}

impl fmt::Display for Pattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for b in &self.0 {
            f.write_str(if *b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PatternModification {
    pub pattern: Pattern,
    /// Edges asserted absent in this subgroup, named as in the raw diagram.
    pub removed_edges: Vec<(String, String)>,
}

fn require_roles(graph: &CausalGraph) -> Result<(String, String), TransformError> {
    if *graph.provenance() != Provenance::Raw {
        return Err(TransformError::AlreadyTransformed(
            graph.provenance().to_string(),
        ));
    }
    let t = graph
        .treatment()
        .ok_or(GraphError::MissingRole("treatment"))?
        .to_string();
    let y = graph
        .outcome()
        .ok_or(GraphError::MissingRole("outcome"))?
        .to_string();
    if graph.ancestors(&t)?.contains(&y) {
        return Err(TransformError::TreatmentAfterOutcome {
            treatment: t,
            outcome: y,
        });
    }
    Ok((t, y))
}

/// Name of the intervened half of treatment `t`.
pub fn intervened_name(t: &str) -> String {
    let lower = t.to_lowercase();
    if lower == t {
        format!("{t}_do")
    } else {
        lower
    }
}

pub fn potential_name(v: &str) -> String {
    format!("{v}{POTENTIAL_SUFFIX}")
}

fn fresh(graph: &CausalGraph, name: &str) -> Result<String, TransformError> {
    if graph.contains(name) {
        Err(TransformError::NameCollision(name.to_string()))
    } else {
        Ok(name.to_string())
    }
}

/// Splits the treatment node. `Z` keeps its incoming edges; a fresh
/// intervened node `z` takes over every outgoing edge; every descendant of
/// the treatment becomes a potential variable `V_z`.
pub fn to_swit(graph: &CausalGraph) -> Result<CausalGraph, TransformError> {
    let (t, _) = require_roles(graph)?;
    let z = fresh(graph, &intervened_name(&t))?;
    let desc = graph.descendants(&t)?;
    let mut rename: BTreeMap<String, String> = BTreeMap::new();
    for v in &desc {
        rename.insert(v.clone(), fresh(graph, &potential_name(v))?);
    }
    let name_of = |v: &str| rename.get(v).cloned().unwrap_or_else(|| v.to_string());

    let mut nodes = Vec::with_capacity(graph.len() + 1);
    for node in graph.nodes() {
        let potential = desc.contains(&node.name);
        let role = match &node.role {
            NodeRole::Outcome if potential => NodeRole::PotentialOutcome,
            NodeRole::MissingnessIndicator { target } => NodeRole::MissingnessIndicator {
                target: name_of(target),
            },
            r => r.clone(),
        };
        nodes.push(Node {
            name: name_of(&node.name),
            role,
            origin: node.name.clone(),
            world: if potential {
                World::Counterfactual
            } else {
                World::Shared
            },
        });
    }
    nodes.push(Node {
        name: z.clone(),
        role: NodeRole::IntervenedTreatment,
        origin: t.clone(),
        world: World::Counterfactual,
    });
    let edges: Vec<(String, String)> = graph
        .edges()
        .into_iter()
        .map(|(a, b)| {
            let a = if a == t { z.clone() } else { name_of(&a) };
            (a, name_of(&b))
        })
        .collect();
    Ok(CausalGraph::from_parts(nodes, edges, Provenance::Swit, None)?)
}

/// Factual graph plus a counterfactual copy of every descendant of the
/// treatment. Each factual/counterfactual pair shares a latent error node
/// `e_V`; non-descendants feed both worlds.
pub fn to_twin_network(graph: &CausalGraph) -> Result<CausalGraph, TransformError> {
    let (t, _) = require_roles(graph)?;
    let z = fresh(graph, &intervened_name(&t))?;
    let desc = graph.descendants(&t)?;
    let mut copy: BTreeMap<String, String> = BTreeMap::new();
    let mut errors: BTreeMap<String, String> = BTreeMap::new();
    for v in &desc {
        copy.insert(v.clone(), fresh(graph, &potential_name(v))?);
        errors.insert(v.clone(), fresh(graph, &format!("e_{v}"))?);
    }

    let mut nodes = Vec::new();
    for node in graph.nodes() {
        let factual = desc.contains(&node.name) || node.name == t;
        nodes.push(Node {
            world: if factual { World::Factual } else { World::Shared },
            ..node.clone()
        });
    }
    nodes.push(Node {
        name: z.clone(),
        role: NodeRole::IntervenedTreatment,
        origin: t.clone(),
        world: World::Counterfactual,
    });
    for v in &desc {
        let role = match graph.role(v) {
            Some(NodeRole::Outcome) => NodeRole::PotentialOutcome,
            Some(NodeRole::Latent) => NodeRole::Latent,
            _ => NodeRole::Auxiliary,
        };
        nodes.push(Node {
            name: copy[v].clone(),
            role,
            origin: v.clone(),
            world: World::Counterfactual,
        });
        nodes.push(Node {
            name: errors[v].clone(),
            role: NodeRole::Latent,
            origin: errors[v].clone(),
            world: World::Shared,
        });
    }

    let mut edges = graph.edges();
    for (a, b) in graph.edges() {
        if let Some(b_cf) = copy.get(&b) {
            let a_cf = if a == t {
                z.clone()
            } else {
                copy.get(&a).cloned().unwrap_or(a)
            };
            edges.push((a_cf, b_cf.clone()));
        }
    }
    for v in &desc {
        edges.push((errors[v].clone(), v.clone()));
        edges.push((errors[v].clone(), copy[v].clone()));
    }
    Ok(CausalGraph::from_parts(nodes, edges, Provenance::Twin, None)?)
}

/// Inverse of the split: folds the intervened node back into the treatment
/// and restores raw names. Accepts generated or hand-drawn templates.
pub fn merge_intervention(graph: &CausalGraph) -> Result<CausalGraph, TransformError> {
    if *graph.provenance() != Provenance::Swit {
        return Err(TransformError::NotDerived(graph.provenance().to_string()));
    }
    let t = graph
        .treatment()
        .ok_or(GraphError::MissingRole("treatment"))?
        .to_string();
    let z = graph
        .intervened()
        .ok_or(GraphError::MissingRole("intervened treatment"))?
        .to_string();
    let origin: BTreeMap<&str, &str> = graph
        .nodes()
        .iter()
        .map(|n| (n.name.as_str(), n.origin.as_str()))
        .collect();
    let raw = |v: &str| -> String {
        if v == z {
            t.clone()
        } else {
            origin.get(v).copied().unwrap_or(v).to_string()
        }
    };
    let nodes = graph
        .nodes()
        .iter()
        .filter(|n| n.name != z)
        .map(|n| {
            let role = match &n.role {
                NodeRole::PotentialOutcome => NodeRole::Outcome,
                NodeRole::MissingnessIndicator { target } => NodeRole::MissingnessIndicator {
                    target: raw(target),
                },
                r => r.clone(),
            };
            Node::new(raw(&n.name), role)
        })
        .collect();
    let edges = graph
        .edges()
        .into_iter()
        .map(|(a, b)| (raw(&a), raw(&b)));
    Ok(CausalGraph::from_parts(nodes, edges, Provenance::Raw, None)?)
}

/// Restricts a template or twin network to the subgroup with the given
/// missingness pattern: the asserted-absent edges are deleted (in every
/// world) and the pattern's indicators are annotated as fixed, which puts
/// them in every later conditioning set.
pub fn restrict_to_pattern(
    graph: &CausalGraph,
    modification: &PatternModification,
) -> Result<CausalGraph, TransformError> {
    let base = match graph.provenance() {
        Provenance::Swit => BaseKind::Swit,
        Provenance::Twin => BaseKind::Twin,
        Provenance::PatternRestricted { base, .. } => *base,
        p => return Err(TransformError::NotDerived(p.to_string())),
    };
    let partial = graph.partial_confounders();
    if modification.pattern.len() != partial.len() {
        return Err(TransformError::PatternDimension {
            expected: partial.len(),
            got: modification.pattern.len(),
        });
    }
    let label = modification.pattern.label(graph);
    let previous = match graph.restriction() {
        Some(r) if r.pattern != label => {
            return Err(TransformError::AlreadyRestricted(r.pattern.clone()))
        }
        Some(r) => r.removed_edges.clone(),
        None => BTreeSet::new(),
    };

    let origin = |v: &str| -> String {
        graph
            .node(v)
            .map(|n| n.origin.clone())
            .unwrap_or_else(|| v.to_string())
    };
    let mut drop: BTreeSet<(String, String)> = BTreeSet::new();
    let mut removed = previous.clone();
    for (a, b) in &modification.removed_edges {
        let source_partial = graph.role(a).is_some_and(NodeRole::is_partial_confounder);
        let target_partial = graph.role(b).is_some_and(NodeRole::is_partial_confounder);
        if target_partial {
            return Err(TransformError::EdgeIntoConfounder(a.clone(), b.clone()));
        }
        if !source_partial {
            return Err(TransformError::EdgeNotFromConfounder(a.clone(), b.clone()));
        }
        let matches: Vec<(String, String)> = graph
            .edges()
            .into_iter()
            .filter(|(f, t)| {
                (f == a || origin(f) == *a) && (t == b || origin(t) == *b)
            })
            .collect();
        if matches.is_empty() && !previous.contains(&(a.clone(), b.clone())) {
            return Err(TransformError::EdgeNotPresent(a.clone(), b.clone()));
        }
        drop.extend(matches);
        removed.insert((a.clone(), b.clone()));
    }

    let mut fixed = BTreeMap::new();
    for (x, bit) in partial.iter().zip(&modification.pattern.0) {
        if let Some(r) = graph.indicator_of(x) {
            fixed.insert(r.to_string(), *bit);
        }
    }
    let edges = graph
        .edges()
        .into_iter()
        .filter(|e| !drop.contains(e));
    Ok(CausalGraph::from_parts(
        graph.nodes().to_vec(),
        edges,
        Provenance::PatternRestricted {
            base,
            pattern: label.clone(),
        },
        Some(Restriction {
            pattern: label,
            fixed,
            removed_edges: removed,
        }),
    )?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::parse_graph;

    fn confounding() -> CausalGraph {
        parse_graph(
            "dag { X -> Z X -> Y Z -> Y }\nroles {\ntreatment Z\noutcome Y\nconfounder X full\n}",
        )
        .unwrap()
    }

    #[test]
    fn swit_of_simple_confounding() {
        let s = to_swit(&confounding()).unwrap();
        let edges: BTreeSet<_> = s.edges().into_iter().collect();
        let want: BTreeSet<_> = [("X", "Z"), ("X", "Y_z"), ("z", "Y_z")]
            .iter()
            .map(|(a, b)| (a.to_string(), b.to_string()))
            .collect();
        assert_eq!(edges, want);
        assert_eq!(s.potential_outcome(), Some("Y_z"));
        assert_eq!(s.intervened(), Some("z"));
        assert!(!s.requires_twin_network());
    }

    #[test]
    fn swit_with_childless_treatment() {
        let g = parse_graph("dag { X -> Z X -> Y }\nroles {\ntreatment Z\noutcome Y\n}").unwrap();
        let s = to_swit(&g).unwrap();
        assert!(s.contains("z"));
        assert!(s.children("z").unwrap().is_empty());
        assert_eq!(s.potential_outcome(), None);
        assert!(s.contains("Y"));
    }

    #[test]
    fn treatment_causing_missingness_needs_twin() {
        let g = parse_graph(
            "dag { X -> Z X -> Y Z -> Y Z -> R }\nroles {\ntreatment Z\noutcome Y\nconfounder X partial\nmissing R of X\n}",
        )
        .unwrap();
        let s = to_swit(&g).unwrap();
        assert!(s.contains("R_z"));
        assert!(s.requires_twin_network());
    }

    #[test]
    fn swit_requires_raw_graph_with_roles() {
        let s = to_swit(&confounding()).unwrap();
        assert!(matches!(
            to_swit(&s),
            Err(TransformError::AlreadyTransformed(_))
        ));
        let g = parse_graph("dag { A -> B }").unwrap();
        assert!(matches!(
            to_swit(&g),
            Err(TransformError::Graph(GraphError::MissingRole("treatment")))
        ));
    }

    #[test]
    fn twin_with_single_descendant_adds_one_error_node() {
        let t = to_twin_network(&confounding()).unwrap();
        assert!(t.contains("e_Y"));
        assert_eq!(t.latents(), vec!["e_Y"]);
        assert!(t.has_edge("e_Y", "Y") && t.has_edge("e_Y", "Y_z"));
        assert!(t.has_edge("X", "Y") && t.has_edge("X", "Y_z"));
        assert!(t.has_edge("z", "Y_z") && t.has_edge("Z", "Y"));
    }

    #[test]
    fn merge_undoes_split() {
        let g = confounding();
        let back = merge_intervention(&to_swit(&g).unwrap()).unwrap();
        assert_eq!(back.structure(), g.structure());
    }

    #[test]
    fn pattern_enumeration_order() {
        let p = Pattern::enumerate(2);
        let labels: Vec<String> = p.iter().map(|p| p.to_string()).collect();
        assert_eq!(labels, vec!["11", "10", "01", "00"]);
    }
}
