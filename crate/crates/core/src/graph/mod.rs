//! Annotated causal diagrams.
//!
//! A [`CausalGraph`] is an immutable DAG whose nodes carry a [`NodeRole`]
//! (treatment, outcome, confounder, missingness indicator, ...). Graphs are
//! produced by [`parse_graph`] from the dagitty-style DSL or by the
//! transforms in [`crate::transforms`]; every constructor validates the
//! structural and role invariants, so a `CausalGraph` value is always
//! well-formed.

mod parse;
mod render;

pub use parse::{parse_graph, ParseError};

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Observability {
    Full,
    Partial,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NodeRole {
    Treatment,
    /// The intervened-on half `z` of a split treatment node.
    IntervenedTreatment,
    Outcome,
    PotentialOutcome,
    Confounder { observability: Observability },
    /// `R`: 1 when `target` is observed.
    MissingnessIndicator { target: String },
    Latent,
    Auxiliary,
}

impl NodeRole {
    pub fn is_latent(&self) -> bool {
        matches!(self, NodeRole::Latent)
    }

    pub fn is_partial_confounder(&self) -> bool {
        matches!(
            self,
            NodeRole::Confounder {
                observability: Observability::Partial
            }
        )
    }
}

/// Which world of a twin network a node lives in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum World {
    Shared,
    Factual,
    Counterfactual,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaseKind {
    Swit,
    Twin,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Raw,
    Swit,
    Twin,
    PatternRestricted { base: BaseKind, pattern: String },
}

impl Provenance {
    pub fn base(&self) -> Option<BaseKind> {
        match self {
            Provenance::Raw => None,
            Provenance::Swit => Some(BaseKind::Swit),
            Provenance::Twin => Some(BaseKind::Twin),
            Provenance::PatternRestricted { base, .. } => Some(*base),
        }
    }

    pub fn is_twin(&self) -> bool {
        self.base() == Some(BaseKind::Twin)
    }
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Provenance::Raw => f.write_str("raw"),
            Provenance::Swit => f.write_str("swit"),
            Provenance::Twin => f.write_str("twin"),
            Provenance::PatternRestricted { base, pattern } => {
                let base = match base {
                    BaseKind::Swit => "swit",
                    BaseKind::Twin => "twin",
                };
                write!(f, "pattern_restricted({base}; {pattern})")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Node {
    pub name: String,
    pub role: NodeRole,
    /// Name of the node in the raw diagram this node was derived from.
    pub origin: String,
    pub world: World,
}

impl Node {
    pub fn new(name: impl Into<String>, role: NodeRole) -> Self {
        let name = name.into();
        Node {
            origin: name.clone(),
            name,
            role,
            world: World::Shared,
        }
    }
}

/// Annotation left by a pattern restriction: the indicators whose value is
/// fixed for the subgroup (they join every conditioning set) and the edges
/// asserted absent there.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Restriction {
    pub pattern: String,
    pub fixed: BTreeMap<String, bool>,
    pub removed_edges: BTreeSet<(String, String)>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GraphError {
    #[error("unknown node `{0}`")]
    UnknownNode(String),
    #[error("invalid node name `{0}` (expected [A-Za-z][A-Za-z0-9_]*)")]
    InvalidName(String),
    #[error("node `{0}` declared twice")]
    DuplicateNode(String),
    #[error("self-loop on `{0}`")]
    SelfLoop(String),
    #[error("duplicate edge {0} -> {1}")]
    DuplicateEdge(String, String),
    #[error("cycle detected: {}", .0.join(" -> "))]
    Cycle(Vec<String>),
    #[error("role conflict: {0}")]
    RoleConflict(String),
    #[error("missingness indicator `{indicator}` targets `{target}`, which is not a partially observed confounder")]
    DanglingIndicator { indicator: String, target: String },
    #[error("partially observed confounder `{0}` has no missingness indicator")]
    MissingIndicator(String),
    #[error("intervened node `{0}` must not have incoming edges")]
    IntervenedHasParents(String),
    #[error("graph has no {0} role assigned")]
    MissingRole(&'static str),
}

#[derive(Debug, Clone, PartialEq)]
pub struct CausalGraph {
    nodes: Vec<Node>,
    index: BTreeMap<String, usize>,
    parents: Vec<Vec<usize>>,
    children: Vec<Vec<usize>>,
    provenance: Provenance,
    restriction: Option<Restriction>,
}

pub(crate) fn valid_name(name: &str) -> bool {
    let mut chars = name.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

impl CausalGraph {
    /// Builds and validates a graph. Nodes are stored in lexicographic order
    /// so that every traversal is deterministic.
    pub fn from_parts(
        mut nodes: Vec<Node>,
        edges: impl IntoIterator<Item = (String, String)>,
        provenance: Provenance,
        restriction: Option<Restriction>,
    ) -> Result<Self, GraphError> {
        nodes.sort_by(|a, b| a.name.cmp(&b.name));
        let mut index = BTreeMap::new();
        for (i, node) in nodes.iter().enumerate() {
            if !valid_name(&node.name) {
                return Err(GraphError::InvalidName(node.name.clone()));
            }
            if index.insert(node.name.clone(), i).is_some() {
                return Err(GraphError::DuplicateNode(node.name.clone()));
            }
        }
        let n = nodes.len();
        let mut parents = vec![Vec::new(); n];
        let mut children = vec![Vec::new(); n];
        let mut seen = BTreeSet::new();
        for (from, to) in edges {
            let f = *index
                .get(&from)
                .ok_or_else(|| GraphError::UnknownNode(from.clone()))?;
            let t = *index
                .get(&to)
                .ok_or_else(|| GraphError::UnknownNode(to.clone()))?;
            if f == t {
                return Err(GraphError::SelfLoop(from));
            }
            if !seen.insert((f, t)) {
                return Err(GraphError::DuplicateEdge(from, to));
            }
            children[f].push(t);
            parents[t].push(f);
        }
        for list in parents.iter_mut().chain(children.iter_mut()) {
            list.sort_unstable();
        }
        let graph = CausalGraph {
            nodes,
            index,
            parents,
            children,
            provenance,
            restriction,
        };
        graph.check_acyclic()?;
        graph.check_roles()?;
        Ok(graph)
    }

    fn check_acyclic(&self) -> Result<(), GraphError> {
        // 0 = unvisited, 1 = on stack, 2 = done
        let n = self.nodes.len();
        let mut state = vec![0u8; n];
        let mut stack: Vec<usize> = Vec::new();
        for start in 0..n {
            if state[start] != 0 {
                continue;
            }
            // iterative DFS with explicit child cursor
            let mut cursor: Vec<(usize, usize)> = vec![(start, 0)];
            state[start] = 1;
            stack.push(start);
            while let Some(&mut (v, ref mut next)) = cursor.last_mut() {
                if *next < self.children[v].len() {
                    let w = self.children[v][*next];
                    *next += 1;
                    match state[w] {
                        0 => {
                            state[w] = 1;
                            stack.push(w);
                            cursor.push((w, 0));
                        }
                        1 => {
                            let pos = stack.iter().position(|&s| s == w).unwrap_or(0);
                            let mut cycle: Vec<String> = stack[pos..]
                                .iter()
                                .map(|&i| self.nodes[i].name.clone())
                                .collect();
                            cycle.push(self.nodes[w].name.clone());
                            return Err(GraphError::Cycle(cycle));
                        }
                        _ => {}
                    }
                } else {
                    state[v] = 2;
                    stack.pop();
                    cursor.pop();
                }
            }
        }
        Ok(())
    }

    fn check_roles(&self) -> Result<(), GraphError> {
        let count = |role: &NodeRole| self.nodes.iter().filter(|n| &n.role == role).count();
        for (label, role) in [
            ("treatment", NodeRole::Treatment),
            ("intervened treatment", NodeRole::IntervenedTreatment),
            ("outcome", NodeRole::Outcome),
            ("potential outcome", NodeRole::PotentialOutcome),
        ] {
            if count(&role) > 1 {
                return Err(GraphError::RoleConflict(format!(
                    "more than one {label} node"
                )));
            }
        }
        let has_intervened = count(&NodeRole::IntervenedTreatment) == 1;
        if self.provenance == Provenance::Raw {
            if has_intervened {
                return Err(GraphError::RoleConflict(
                    "raw graph contains an intervened treatment node".into(),
                ));
            }
            if count(&NodeRole::PotentialOutcome) > 0 {
                return Err(GraphError::RoleConflict(
                    "potential outcome declared without an intervened treatment".into(),
                ));
            }
        } else if !has_intervened {
            return Err(GraphError::MissingRole("intervened treatment"));
        }
        if has_intervened && count(&NodeRole::Treatment) == 0 {
            return Err(GraphError::MissingRole("treatment"));
        }
        if let Some(i) = self.find_role(&NodeRole::IntervenedTreatment) {
            if !self.parents[i].is_empty() {
                return Err(GraphError::IntervenedHasParents(self.nodes[i].name.clone()));
            }
        }

        let mut indicator_count: BTreeMap<&str, usize> = BTreeMap::new();
        for node in &self.nodes {
            if let NodeRole::MissingnessIndicator { target } = &node.role {
                let ok = self
                    .index
                    .get(target)
                    .map(|&t| self.nodes[t].role.is_partial_confounder())
                    .unwrap_or(false);
                if !ok {
                    return Err(GraphError::DanglingIndicator {
                        indicator: node.name.clone(),
                        target: target.clone(),
                    });
                }
                *indicator_count.entry(target.as_str()).or_default() += 1;
            }
        }
        for node in &self.nodes {
            if node.role.is_partial_confounder() {
                match indicator_count.get(node.name.as_str()) {
                    None => return Err(GraphError::MissingIndicator(node.name.clone())),
                    Some(&c) if c > 1 => {
                        return Err(GraphError::RoleConflict(format!(
                            "partially observed confounder `{}` has {c} missingness indicators",
                            node.name
                        )))
                    }
                    _ => {}
                }
            }
        }
        Ok(())
    }

    fn find_role(&self, role: &NodeRole) -> Option<usize> {
        self.nodes.iter().position(|n| &n.role == role)
    }

    pub(crate) fn idx(&self, name: &str) -> Result<usize, GraphError> {
        self.index
            .get(name)
            .copied()
            .ok_or_else(|| GraphError::UnknownNode(name.to_string()))
    }

    pub(crate) fn name_of(&self, i: usize) -> &str {
        &self.nodes[i].name
    }

    pub(crate) fn parents_idx(&self, i: usize) -> &[usize] {
        &self.parents[i]
    }

    pub(crate) fn children_idx(&self, i: usize) -> &[usize] {
        &self.children[i]
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn edge_count(&self) -> usize {
        self.children.iter().map(Vec::len).sum()
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    pub fn restriction(&self) -> Option<&Restriction> {
        self.restriction.as_ref()
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn node(&self, name: &str) -> Option<&Node> {
        self.index.get(name).map(|&i| &self.nodes[i])
    }

    pub fn contains(&self, name: &str) -> bool {
        self.index.contains_key(name)
    }

    pub fn role(&self, name: &str) -> Option<&NodeRole> {
        self.node(name).map(|n| &n.role)
    }

    /// Edges as `(from, to)` pairs in lexicographic order.
    pub fn edges(&self) -> Vec<(String, String)> {
        let mut out = Vec::with_capacity(self.edge_count());
        for (f, kids) in self.children.iter().enumerate() {
            for &t in kids {
                out.push((self.nodes[f].name.clone(), self.nodes[t].name.clone()));
            }
        }
        out
    }

    pub fn has_edge(&self, from: &str, to: &str) -> bool {
        match (self.index.get(from), self.index.get(to)) {
            (Some(&f), Some(&t)) => self.children[f].binary_search(&t).is_ok(),
            _ => false,
        }
    }

    pub fn parents(&self, name: &str) -> Result<Vec<&str>, GraphError> {
        let i = self.idx(name)?;
        Ok(self.parents[i].iter().map(|&p| self.name_of(p)).collect())
    }

    pub fn children(&self, name: &str) -> Result<Vec<&str>, GraphError> {
        let i = self.idx(name)?;
        Ok(self.children[i].iter().map(|&c| self.name_of(c)).collect())
    }

    /// Transitive closure over reversed edges, excluding `name` itself.
    pub fn ancestors(&self, name: &str) -> Result<BTreeSet<String>, GraphError> {
        let i = self.idx(name)?;
        let mark = self.closure(&[i], &self.parents);
        Ok(self.names_where(&mark, Some(i)))
    }

    /// Transitive closure over edges, excluding `name` itself.
    pub fn descendants(&self, name: &str) -> Result<BTreeSet<String>, GraphError> {
        let i = self.idx(name)?;
        let mark = self.closure(&[i], &self.children);
        Ok(self.names_where(&mark, Some(i)))
    }

    /// Marks `start` and everything reachable from it along `adj`.
    pub(crate) fn closure(&self, start: &[usize], adj: &[Vec<usize>]) -> Vec<bool> {
        let mut mark = vec![false; self.nodes.len()];
        let mut queue: VecDeque<usize> = VecDeque::new();
        for &s in start {
            if !mark[s] {
                mark[s] = true;
                queue.push_back(s);
            }
        }
        while let Some(v) = queue.pop_front() {
            for &w in &adj[v] {
                if !mark[w] {
                    mark[w] = true;
                    queue.push_back(w);
                }
            }
        }
        mark
    }

    /// Nodes in `set` together with all their ancestors.
    pub(crate) fn ancestral_mask(&self, set: &[usize]) -> Vec<bool> {
        self.closure(set, &self.parents)
    }

    fn names_where(&self, mark: &[bool], skip: Option<usize>) -> BTreeSet<String> {
        mark.iter()
            .enumerate()
            .filter(|&(i, &m)| m && Some(i) != skip)
            .map(|(i, _)| self.nodes[i].name.clone())
            .collect()
    }

    /// Kahn order, ties broken lexicographically.
    pub fn topological_order(&self) -> Vec<String> {
        let n = self.nodes.len();
        let mut indeg: Vec<usize> = self.parents.iter().map(Vec::len).collect();
        let mut ready: BTreeSet<usize> = (0..n).filter(|&i| indeg[i] == 0).collect();
        let mut out = Vec::with_capacity(n);
        while let Some(v) = ready.pop_first() {
            out.push(self.nodes[v].name.clone());
            for &w in &self.children[v] {
                indeg[w] -= 1;
                if indeg[w] == 0 {
                    ready.insert(w);
                }
            }
        }
        out
    }

    fn name_with_role(&self, role: &NodeRole) -> Option<&str> {
        self.find_role(role).map(|i| self.name_of(i))
    }

    pub fn treatment(&self) -> Option<&str> {
        self.name_with_role(&NodeRole::Treatment)
    }

    pub fn intervened(&self) -> Option<&str> {
        self.name_with_role(&NodeRole::IntervenedTreatment)
    }

    pub fn outcome(&self) -> Option<&str> {
        self.name_with_role(&NodeRole::Outcome)
    }

    pub fn potential_outcome(&self) -> Option<&str> {
        self.name_with_role(&NodeRole::PotentialOutcome)
    }

    /// Partially observed confounders, sorted by name. This is the bit order
    /// of every missingness pattern.
    pub fn partial_confounders(&self) -> Vec<&str> {
        self.nodes
            .iter()
            .filter(|n| n.role.is_partial_confounder())
            .map(|n| n.name.as_str())
            .collect()
    }

    pub fn full_confounders(&self) -> Vec<&str> {
        self.nodes
            .iter()
            .filter(|n| {
                n.role
                    == NodeRole::Confounder {
                        observability: Observability::Full,
                    }
            })
            .map(|n| n.name.as_str())
            .collect()
    }

    pub fn indicators(&self) -> Vec<&str> {
        self.nodes
            .iter()
            .filter(|n| matches!(n.role, NodeRole::MissingnessIndicator { .. }))
            .map(|n| n.name.as_str())
            .collect()
    }

    pub fn indicator_of(&self, confounder: &str) -> Option<&str> {
        self.nodes.iter().find_map(|n| match &n.role {
            NodeRole::MissingnessIndicator { target } if target == confounder => {
                Some(n.name.as_str())
            }
            _ => None,
        })
    }

    pub fn latents(&self) -> Vec<&str> {
        self.nodes
            .iter()
            .filter(|n| n.role.is_latent())
            .map(|n| n.name.as_str())
            .collect()
    }

    /// True when a missingness indicator descends from the intervened node,
    /// i.e. the template holds `R(z)` rather than the observed `R`.
    pub fn requires_twin_network(&self) -> bool {
        let Some(z) = self.intervened() else {
            return false;
        };
        let Ok(desc) = self.descendants(z) else {
            return false;
        };
        self.indicators().iter().any(|r| desc.contains(*r))
    }

    /// Returns a copy with `from` renamed to `to`; all role references and
    /// restriction annotations follow.
    pub fn relabel(&self, from: &str, to: &str) -> Result<CausalGraph, GraphError> {
        self.idx(from)?;
        if self.contains(to) {
            return Err(GraphError::DuplicateNode(to.to_string()));
        }
        let rename = |s: &str| -> String {
            if s == from {
                to.to_string()
            } else {
                s.to_string()
            }
        };
        let nodes = self
            .nodes
            .iter()
            .map(|n| {
                let role = match &n.role {
                    NodeRole::MissingnessIndicator { target } => NodeRole::MissingnessIndicator {
                        target: rename(target),
                    },
                    r => r.clone(),
                };
                Node {
                    name: rename(&n.name),
                    role,
                    origin: rename(&n.origin),
                    world: n.world,
                }
            })
            .collect();
        let edges = self.edges().into_iter().map(|(a, b)| (rename(&a), rename(&b)));
        let restriction = self.restriction.as_ref().map(|r| Restriction {
            pattern: r.pattern.clone(),
            fixed: r.fixed.iter().map(|(k, v)| (rename(k), *v)).collect(),
            removed_edges: r
                .removed_edges
                .iter()
                .map(|(a, b)| (rename(a), rename(b)))
                .collect(),
        });
        CausalGraph::from_parts(nodes, edges, self.provenance.clone(), restriction)
    }

    /// Same graph with the given nodes re-declared as measured auxiliaries
    /// (used when an analyst claims a former latent can be measured).
    pub fn with_measured(&self, names: &BTreeSet<String>) -> Result<CausalGraph, GraphError> {
        for name in names {
            self.idx(name)?;
        }
        let nodes = self
            .nodes
            .iter()
            .map(|n| {
                let mut n = n.clone();
                if names.contains(&n.name) && n.role.is_latent() {
                    n.role = NodeRole::Auxiliary;
                }
                n
            })
            .collect();
        CausalGraph::from_parts(
            nodes,
            self.edges(),
            self.provenance.clone(),
            self.restriction.clone(),
        )
    }

    /// Node/edge/role sets, for structural comparisons that ignore provenance.
    pub fn structure(&self) -> (BTreeMap<String, NodeRole>, BTreeSet<(String, String)>) {
        (
            self.nodes
                .iter()
                .map(|n| (n.name.clone(), n.role.clone()))
                .collect(),
            self.edges().into_iter().collect(),
        )
    }
}
