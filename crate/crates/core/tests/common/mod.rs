//! Test oracles shared by the core integration tests and the acceptance
//! suite.
#![allow(dead_code)]

use std::collections::{BTreeSet, VecDeque};

use mpa_core::graph::{CausalGraph, Node, NodeRole, Provenance};
use rand::seq::SliceRandom;
use rand::Rng;

/// Random DAG on `n` nodes named `V0..`: a random topological order, then
/// each forward pair gets an edge with probability `p`.
pub fn random_dag<R: Rng>(rng: &mut R, n: usize, p: f64) -> CausalGraph {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if rng.random_bool(p) {
                edges.push((format!("V{}", order[i]), format!("V{}", order[j])));
            }
        }
    }
    let nodes = (0..n)
        .map(|i| Node::new(format!("V{i}"), NodeRole::Auxiliary))
        .collect();
    CausalGraph::from_parts(nodes, edges, Provenance::Raw, None).unwrap()
}

/// d-separation by moralization: restrict to the ancestral set of
/// `{a, b} ∪ cond`, marry co-parents, drop directions, delete `cond`, and
/// test undirected connectivity.
pub fn moral_separated(g: &CausalGraph, a: &str, b: &str, cond: &BTreeSet<String>) -> bool {
    let mut keep: BTreeSet<String> = cond.clone();
    keep.insert(a.to_string());
    keep.insert(b.to_string());
    for v in keep.clone() {
        keep.extend(g.ancestors(&v).unwrap());
    }
    let names: Vec<&String> = keep.iter().collect();
    let pos = |s: &str| names.iter().position(|n| n.as_str() == s);
    let k = names.len();
    let mut adj = vec![vec![false; k]; k];
    for v in &names {
        let parents: Vec<&str> = g
            .parents(v)
            .unwrap()
            .into_iter()
            .filter(|p| keep.contains(*p))
            .collect();
        let vi = pos(v).unwrap();
        for (i, p) in parents.iter().enumerate() {
            let pi = pos(p).unwrap();
            adj[vi][pi] = true;
            adj[pi][vi] = true;
            for q in &parents[i + 1..] {
                let qi = pos(q).unwrap();
                adj[pi][qi] = true;
                adj[qi][pi] = true;
            }
        }
    }
    let start = pos(a).unwrap();
    let goal = pos(b).unwrap();
    let blocked: Vec<bool> = names.iter().map(|n| cond.contains(*n)).collect();
    let mut seen = vec![false; k];
    let mut queue = VecDeque::from([start]);
    seen[start] = true;
    while let Some(v) = queue.pop_front() {
        if v == goal {
            return false;
        }
        for w in 0..k {
            if adj[v][w] && !seen[w] && !blocked[w] {
                seen[w] = true;
                queue.push_back(w);
            }
        }
    }
    true
}

/// Every `(a, b, S)` with `a < b`, `S` disjoint from both, `|S| <= max`.
pub fn triples(names: &[String], max: usize) -> Vec<(String, String, BTreeSet<String>)> {
    let mut out = Vec::new();
    for (i, a) in names.iter().enumerate() {
        for b in &names[i + 1..] {
            let rest: Vec<&String> = names.iter().filter(|n| *n != a && *n != b).collect();
            let mut sets: Vec<BTreeSet<String>> = vec![BTreeSet::new()];
            for r in &rest {
                let grown: Vec<BTreeSet<String>> = sets
                    .iter()
                    .filter(|s| s.len() < max)
                    .map(|s| {
                        let mut t = s.clone();
                        t.insert((*r).clone());
                        t
                    })
                    .collect();
                sets.extend(grown);
            }
            for s in sets {
                out.push((a.clone(), b.clone(), s));
            }
        }
    }
    out
}

pub fn names(g: &CausalGraph) -> Vec<String> {
    g.nodes().iter().map(|n| n.name.clone()).collect()
}
