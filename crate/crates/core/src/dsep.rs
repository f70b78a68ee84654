//! d-separation queries with path witnesses.
//!
//! The decision uses Bayes-ball reachability, linear in the size of the
//! graph. Simple paths are only enumerated for witnesses and for
//! [`list_paths`].

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{CausalGraph, GraphError};

/// Simple-path enumeration gives up past this many paths.
pub const PATH_LIMIT: usize = 100_000;

/// At most this many open paths are attached to a verdict.
pub const WITNESS_LIMIT: usize = 64;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DsepError {
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("`{0}` is latent and cannot be conditioned on")]
    LatentInConditioningSet(String),
    #[error("`{0}` is an endpoint of the query and also in the conditioning set")]
    EndpointInConditioningSet(String),
    #[error("query endpoints must differ (both are `{0}`)")]
    SameEndpoints(String),
    #[error("more than {0} simple paths; narrow the query")]
    TooManyPaths(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    /// `path[i] -> path[i+1]`
    Forward,
    /// `path[i] <- path[i+1]`
    Backward,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PathStatus {
    Open,
    Blocked,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BlockReason {
    NonColliderConditioned,
    ColliderUnconditioned,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OpenVia {
    InSet,
    DescendantInSet,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Caution {
    /// Non-separation in a twin network does not imply dependence.
    IncompleteTwinDsep,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PathReport {
    pub nodes: Vec<String>,
    pub directions: Vec<Direction>,
    pub status: PathStatus,
    pub blocking_nodes: Vec<(String, BlockReason)>,
    pub opening_colliders: Vec<(String, OpenVia)>,
}

impl PathReport {
    pub fn is_open(&self) -> bool {
        self.status == PathStatus::Open
    }
}

impl fmt::Display for PathReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.nodes[0])?;
        for (dir, node) in self.directions.iter().zip(&self.nodes[1..]) {
            let arrow = match dir {
                Direction::Forward => "->",
                Direction::Backward => "<-",
            };
            write!(f, " {arrow} {node}")?;
        }
        if self.is_open() {
            f.write_str(" [open]")
        } else {
            f.write_str(" [blocked")?;
            for (node, _) in &self.blocking_nodes {
                write!(f, " @{node}")?;
            }
            f.write_str("]")
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DsepVerdict {
    pub separated: bool,
    /// Open paths between the endpoints, in lexicographic order.
    pub open_paths: Vec<PathReport>,
    pub witnesses_truncated: bool,
    pub caution: Option<Caution>,
}

/// Validated query in index form.
struct Query<'g> {
    graph: &'g CausalGraph,
    a: usize,
    b: usize,
    in_cond: Vec<bool>,
    /// Members of the conditioning set and their ancestors.
    opens: Vec<bool>,
}

impl<'g> Query<'g> {
    fn new(
        graph: &'g CausalGraph,
        a: &str,
        b: &str,
        cond: &BTreeSet<String>,
    ) -> Result<Self, DsepError> {
        let ai = graph.idx(a)?;
        let bi = graph.idx(b)?;
        if ai == bi {
            return Err(DsepError::SameEndpoints(a.to_string()));
        }
        let mut in_cond = vec![false; graph.len()];
        for c in cond {
            let ci = graph.idx(c)?;
            if ci == ai || ci == bi {
                return Err(DsepError::EndpointInConditioningSet(c.clone()));
            }
            if graph.nodes()[ci].role.is_latent() {
                return Err(DsepError::LatentInConditioningSet(c.clone()));
            }
            in_cond[ci] = true;
        }
        // indicators fixed by a pattern restriction are implicitly conditioned
        if let Some(r) = graph.restriction() {
            for name in r.fixed.keys() {
                let ci = graph.idx(name)?;
                if ci != ai && ci != bi {
                    in_cond[ci] = true;
                }
            }
        }
        let members: Vec<usize> = (0..graph.len()).filter(|&i| in_cond[i]).collect();
        let opens = graph.ancestral_mask(&members);
        Ok(Query {
            graph,
            a: ai,
            b: bi,
            in_cond,
            opens,
        })
    }

    /// Bayes-ball: is `b` reachable from `a` along an active trail?
    fn connected(&self) -> bool {
        let n = self.graph.len();
        // visited[v][0]: arrived from a child (moving up); [1]: from a parent
        let mut visited = vec![[false; 2]; n];
        let mut stack = vec![(self.a, 0usize)];
        while let Some((v, d)) = stack.pop() {
            if visited[v][d] {
                continue;
            }
            visited[v][d] = true;
            if v == self.b {
                return true;
            }
            let blocked_here = self.in_cond[v];
            if d == 0 {
                if !blocked_here {
                    stack.extend(self.graph.parents_idx(v).iter().map(|&p| (p, 0)));
                    stack.extend(self.graph.children_idx(v).iter().map(|&c| (c, 1)));
                }
            } else {
                if !blocked_here {
                    stack.extend(self.graph.children_idx(v).iter().map(|&c| (c, 1)));
                }
                if self.opens[v] {
                    stack.extend(self.graph.parents_idx(v).iter().map(|&p| (p, 0)));
                }
            }
        }
        false
    }

    fn neighbours(&self, v: usize) -> Vec<usize> {
        let mut out: Vec<usize> = self
            .graph
            .parents_idx(v)
            .iter()
            .chain(self.graph.children_idx(v))
            .copied()
            .collect();
        out.sort_unstable();
        out
    }

    /// Status of interior node `v` between `prev` and `next`.
    fn judge(&self, prev: usize, v: usize, next: usize) -> Judgement {
        let g = self.graph;
        let collider = g.children_idx(prev).binary_search(&v).is_ok()
            && g.children_idx(next).binary_search(&v).is_ok();
        if collider {
            if self.in_cond[v] {
                Judgement::Opens(OpenVia::InSet)
            } else if self.opens[v] {
                Judgement::Opens(OpenVia::DescendantInSet)
            } else {
                Judgement::Blocks(BlockReason::ColliderUnconditioned)
            }
        } else if self.in_cond[v] {
            Judgement::Blocks(BlockReason::NonColliderConditioned)
        } else {
            Judgement::Passes
        }
    }

    fn report(&self, path: &[usize]) -> PathReport {
        let g = self.graph;
        let directions = path
            .windows(2)
            .map(|w| {
                if g.children_idx(w[0]).binary_search(&w[1]).is_ok() {
                    Direction::Forward
                } else {
                    Direction::Backward
                }
            })
            .collect();
        let mut blocking_nodes = Vec::new();
        let mut opening_colliders = Vec::new();
        for w in path.windows(3) {
            let name = g.name_of(w[1]).to_string();
            match self.judge(w[0], w[1], w[2]) {
                Judgement::Blocks(r) => blocking_nodes.push((name, r)),
                Judgement::Opens(v) => opening_colliders.push((name, v)),
                Judgement::Passes => {}
            }
        }
        PathReport {
            nodes: path.iter().map(|&i| g.name_of(i).to_string()).collect(),
            directions,
            status: if blocking_nodes.is_empty() {
                PathStatus::Open
            } else {
                PathStatus::Blocked
            },
            blocking_nodes,
            opening_colliders,
        }
    }

    /// Depth-first simple-path enumeration in lexicographic order. With
    /// `open_only`, prefixes that are already blocked are pruned. Stops
    /// (returning `false`) once `visit` returns `false`.
    fn walk(&self, open_only: bool, visit: &mut dyn FnMut(&[usize]) -> bool) -> bool {
        let mut on_path = vec![false; self.graph.len()];
        let mut path = vec![self.a];
        on_path[self.a] = true;
        self.walk_from(open_only, &mut path, &mut on_path, visit)
    }

    fn walk_from(
        &self,
        open_only: bool,
        path: &mut Vec<usize>,
        on_path: &mut [bool],
        visit: &mut dyn FnMut(&[usize]) -> bool,
    ) -> bool {
        let v = *path.last().expect("path is never empty");
        for w in self.neighbours(v) {
            if on_path[w] {
                continue;
            }
            if open_only && path.len() >= 2 {
                let prev = path[path.len() - 2];
                if matches!(self.judge(prev, v, w), Judgement::Blocks(_)) {
                    continue;
                }
            }
            path.push(w);
            let keep_going = if w == self.b {
                visit(path)
            } else {
                on_path[w] = true;
                let k = self.walk_from(open_only, path, on_path, visit);
                on_path[w] = false;
                k
            };
            path.pop();
            if !keep_going {
                return false;
            }
        }
        true
    }
}

enum Judgement {
    Passes,
    Blocks(BlockReason),
    Opens(OpenVia),
}

/// Decides whether `a` and `b` are d-separated given `cond`. Indicators
/// fixed by a pattern restriction are added to `cond` automatically.
pub fn d_separated(
    graph: &CausalGraph,
    a: &str,
    b: &str,
    cond: &BTreeSet<String>,
) -> Result<DsepVerdict, DsepError> {
    let q = Query::new(graph, a, b, cond)?;
    if !q.connected() {
        return Ok(DsepVerdict {
            separated: true,
            open_paths: Vec::new(),
            witnesses_truncated: false,
            caution: None,
        });
    }
    let mut open_paths = Vec::new();
    let mut truncated = false;
    q.walk(true, &mut |path| {
        if open_paths.len() == WITNESS_LIMIT {
            truncated = true;
            return false;
        }
        open_paths.push(q.report(path));
        true
    });
    Ok(DsepVerdict {
        separated: false,
        open_paths,
        witnesses_truncated: truncated,
        caution: graph
            .provenance()
            .is_twin()
            .then_some(Caution::IncompleteTwinDsep),
    })
}

/// Boolean form of [`d_separated`] without witness enumeration.
pub fn is_d_separated(
    graph: &CausalGraph,
    a: &str,
    b: &str,
    cond: &BTreeSet<String>,
) -> Result<bool, DsepError> {
    Ok(!Query::new(graph, a, b, cond)?.connected())
}

/// Every simple path between `a` and `b` with its status under `cond`,
/// ordered lexicographically by node sequence.
pub fn list_paths(
    graph: &CausalGraph,
    a: &str,
    b: &str,
    cond: &BTreeSet<String>,
) -> Result<Vec<PathReport>, DsepError> {
    let q = Query::new(graph, a, b, cond)?;
    let mut out = Vec::new();
    let mut overflow = false;
    q.walk(false, &mut |path| {
        if out.len() == PATH_LIMIT {
            overflow = true;
            return false;
        }
        out.push(q.report(path));
        true
    });
    if overflow {
        return Err(DsepError::TooManyPaths(PATH_LIMIT));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::parse_graph;

    fn set(names: &[&str]) -> BTreeSet<String> {
        names.iter().map(|s| s.to_string()).collect()
    }

    fn fig1() -> CausalGraph {
        parse_graph(
            "dag { z -> Yz  Z <- X -> Yz  R <- U_Z -> Z  R <- U_Y -> Yz }\n\
             roles {\ntreatment Z\nintervened z\noutcome Yz\nconfounder X partial\nmissing R of X\nlatent U_Z U_Y\n}",
        )
        .unwrap()
    }

    #[test]
    fn figure1_separated_without_r() {
        let v = d_separated(&fig1(), "Z", "Yz", &set(&["X", "z"])).unwrap();
        assert!(v.separated);
        assert!(v.open_paths.is_empty());
    }

    #[test]
    fn figure1_collider_opened_by_r() {
        let g = fig1();
        let v = d_separated(&g, "Z", "Yz", &set(&["X", "R", "z"])).unwrap();
        assert!(!v.separated);
        assert_eq!(v.open_paths.len(), 1);
        assert_eq!(v.open_paths[0].to_string(), "Z <- U_Z -> R <- U_Y -> Yz [open]");
        assert_eq!(v.caution, None);

        let all = list_paths(&g, "Z", "Yz", &set(&["X", "R", "z"])).unwrap();
        let rendered: Vec<String> = all.iter().map(|p| p.to_string()).collect();
        assert_eq!(
            rendered,
            vec![
                "Z <- U_Z -> R <- U_Y -> Yz [open]",
                "Z <- X -> Yz [blocked @X]",
            ]
        );
    }

    #[test]
    fn isolated_pair() {
        let g = parse_graph("dag { A B }").unwrap();
        assert!(is_d_separated(&g, "A", "B", &BTreeSet::new()).unwrap());
        assert!(list_paths(&g, "A", "B", &BTreeSet::new()).unwrap().is_empty());
    }

    #[test]
    fn chain_blocked_by_middle() {
        let g = parse_graph("dag { A -> B -> C }").unwrap();
        let p = list_paths(&g, "A", "C", &set(&["B"])).unwrap();
        assert_eq!(p.len(), 1);
        assert_eq!(
            p[0].blocking_nodes,
            vec![("B".to_string(), BlockReason::NonColliderConditioned)]
        );
    }

    #[test]
    fn descendant_of_collider_opens() {
        let g = parse_graph("dag { A -> C <- B  C -> D }").unwrap();
        assert!(is_d_separated(&g, "A", "B", &BTreeSet::new()).unwrap());
        let v = d_separated(&g, "A", "B", &set(&["D"])).unwrap();
        assert!(!v.separated);
        assert_eq!(
            v.open_paths[0].opening_colliders,
            vec![("C".to_string(), OpenVia::DescendantInSet)]
        );
    }

    #[test]
    fn query_errors() {
        let g = fig1();
        assert!(matches!(
            d_separated(&g, "Z", "Yz", &set(&["U_Z"])),
            Err(DsepError::LatentInConditioningSet(_))
        ));
        assert!(matches!(
            d_separated(&g, "Z", "Yz", &set(&["Z"])),
            Err(DsepError::EndpointInConditioningSet(_))
        ));
        assert!(matches!(
            d_separated(&g, "Z", "Q", &BTreeSet::new()),
            Err(DsepError::Graph(GraphError::UnknownNode(_)))
        ));
    }
}
