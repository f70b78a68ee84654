//! Executable mSITA / CIT / CIO checks.
//!
//! mSITA: `Z ⊥ Y(z) | X, R`. CIT: `Z ⊥ X_mis | X_obs, R`. CIO:
//! `Y(z) ⊥ X_mis | X_obs, R`. The latter two are judged per missingness
//! pattern on the graph restricted to that pattern.

pub mod catalog;
mod framework;
mod mods;

pub use framework::{run_framework, FrameworkReport, PatternSummary, Route, ScenarioFlag};
pub use mods::{parse_mods, ModsError};

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dsep::{d_separated, Caution, DsepError, PathReport};
use crate::graph::{CausalGraph, GraphError, NodeRole, Provenance};
use crate::transforms::{
    restrict_to_pattern, to_swit, to_twin_network, Pattern, PatternModification, TransformError,
};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CheckError {
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Transform(#[from] TransformError),
    #[error(transparent)]
    Dsep(#[from] DsepError),
    #[error("confounder `{0}` is a descendant of the treatment")]
    ConfounderAfterTreatment(String),
    #[error("the template contains a missingness indicator downstream of the intervened node; supply the raw diagram so a twin network can be built")]
    NeedsTwinNetwork,
    #[error("graph with provenance {0} cannot be checked; supply a raw diagram or a template")]
    UnsupportedProvenance(String),
    #[error("two modifications given for pattern {0}")]
    DuplicatePattern(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Assumption {
    #[serde(rename = "mSITA")]
    Msita,
    #[serde(rename = "CIT")]
    Cit,
    #[serde(rename = "CIO")]
    Cio,
}

impl fmt::Display for Assumption {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Assumption::Msita => "mSITA",
            Assumption::Cit => "CIT",
            Assumption::Cio => "CIO",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VerdictNote {
    /// No unobserved confounders in the pattern.
    TriviallyTrue,
    /// The analyst gave no modification for the pattern; the unmodified
    /// graph was used.
    Unassessed,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueryVerdict {
    pub assumption: Assumption,
    /// Pattern bit string (1 = observed), absent for mSITA.
    pub pattern: Option<String>,
    pub pattern_label: Option<String>,
    pub holds: bool,
    pub witnesses: Vec<PathReport>,
    pub caution: Option<Caution>,
    pub statement: String,
    pub note: Option<VerdictNote>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AssumptionSpec {
    /// Raw diagram or hand-drawn template.
    pub graph: CausalGraph,
    pub pattern_mods: Vec<PatternModification>,
    /// Former latents the analyst can measure, plus any other nodes to add
    /// to every conditioning set.
    pub extra_conditioning: BTreeSet<String>,
}

impl AssumptionSpec {
    pub fn new(graph: CausalGraph) -> Self {
        AssumptionSpec {
            graph,
            pattern_mods: Vec::new(),
            extra_conditioning: BTreeSet::new(),
        }
    }

    pub fn with_mods(mut self, mods: Vec<PatternModification>) -> Self {
        self.pattern_mods = mods;
        self
    }

    pub fn condition_on<I, S>(mut self, names: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.extra_conditioning
            .extend(names.into_iter().map(Into::into));
        self
    }
}

/// The graph the queries run on plus the names they need.
#[derive(Debug, Clone)]
pub(crate) struct Prepared {
    pub base: CausalGraph,
    pub treatment: String,
    pub intervened: String,
    pub outcome: String,
    pub extra: BTreeSet<String>,
}

pub(crate) fn prepare(spec: &AssumptionSpec) -> Result<Prepared, CheckError> {
    let graph = spec.graph.with_measured(&spec.extra_conditioning)?;
    let treatment = graph
        .treatment()
        .ok_or(GraphError::MissingRole("treatment"))?
        .to_string();
    let base = match graph.provenance() {
        Provenance::Raw => {
            let outcome = graph.outcome().ok_or(GraphError::MissingRole("outcome"))?;
            let desc = graph.descendants(&treatment)?;
            let twin = graph.indicators().iter().any(|r| {
                desc.contains(*r) || graph.parents(r).is_ok_and(|ps| ps.contains(&outcome))
            });
            if twin {
                to_twin_network(&graph)?
            } else {
                to_swit(&graph)?
            }
        }
        Provenance::Swit => {
            if graph.requires_twin_network() {
                return Err(CheckError::NeedsTwinNetwork);
            }
            graph
        }
        Provenance::Twin => graph,
        p => return Err(CheckError::UnsupportedProvenance(p.to_string())),
    };
    let intervened = base
        .intervened()
        .ok_or(GraphError::MissingRole("intervened treatment"))?
        .to_string();
    let outcome = base
        .potential_outcome()
        .or(base.outcome())
        .ok_or(GraphError::MissingRole("outcome"))?
        .to_string();
    let downstream: BTreeSet<String> = base
        .descendants(&treatment)?
        .union(&base.descendants(&intervened)?)
        .cloned()
        .collect();
    for x in base.partial_confounders().into_iter().chain(base.full_confounders()) {
        if downstream.contains(x) {
            return Err(CheckError::ConfounderAfterTreatment(x.to_string()));
        }
    }
    Ok(Prepared {
        base,
        treatment,
        intervened,
        outcome,
        extra: spec.extra_conditioning.clone(),
    })
}

impl Prepared {
    fn indicators(&self) -> Vec<String> {
        self.base
            .nodes()
            .iter()
            .filter(|n| matches!(n.role, NodeRole::MissingnessIndicator { .. }))
            .map(|n| n.name.clone())
            .collect()
    }

    /// Conditioning list in display order: indicators, observed partial
    /// confounders, full confounders, extra nodes, intervened node.
    fn conditioning(&self, observed_partial: &[&str]) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        let mut push = |s: &str| {
            if !out.iter().any(|o| o == s) {
                out.push(s.to_string());
            }
        };
        for r in self.indicators() {
            push(&r);
        }
        for x in observed_partial {
            push(x);
        }
        for c in self.base.full_confounders() {
            push(c);
        }
        for e in &self.extra {
            push(e);
        }
        push(&self.intervened);
        out
    }

    pub fn pattern_count(&self) -> usize {
        self.base.partial_confounders().len()
    }
}

fn merge_caution(acc: &mut Option<Caution>, c: Option<Caution>) {
    if acc.is_none() {
        *acc = c;
    }
}

pub(crate) fn msita(p: &Prepared) -> Result<QueryVerdict, CheckError> {
    let partial = p.base.partial_confounders();
    let cond_list = p.conditioning(&partial);
    let cond: BTreeSet<String> = cond_list.iter().cloned().collect();
    let v = d_separated(&p.base, &p.treatment, &p.outcome, &cond)?;
    Ok(QueryVerdict {
        assumption: Assumption::Msita,
        pattern: None,
        pattern_label: None,
        holds: v.separated,
        witnesses: v.open_paths,
        caution: v.caution,
        statement: format!(
            "{} ⊥ {} | {}",
            p.treatment,
            p.outcome,
            cond_list.join(", ")
        ),
        note: None,
    })
}

fn find_mod<'a>(
    mods: &'a [PatternModification],
    pattern: &Pattern,
) -> Result<Option<&'a PatternModification>, CheckError> {
    let mut hits = mods.iter().filter(|m| &m.pattern == pattern);
    let first = hits.next();
    if hits.next().is_some() {
        return Err(CheckError::DuplicatePattern(pattern.to_string()));
    }
    Ok(first)
}

pub(crate) fn per_pattern(
    p: &Prepared,
    mods: &[PatternModification],
    assumption: Assumption,
    pattern: &Pattern,
) -> Result<QueryVerdict, CheckError> {
    let partial = p.base.partial_confounders();
    let observed: Vec<&str> = partial
        .iter()
        .zip(&pattern.0)
        .filter(|(_, o)| **o)
        .map(|(x, _)| *x)
        .collect();
    let missing: Vec<&str> = partial
        .iter()
        .zip(&pattern.0)
        .filter(|(_, o)| !**o)
        .map(|(x, _)| *x)
        .collect();
    let subject = match assumption {
        Assumption::Cit => p.treatment.clone(),
        _ => p.outcome.clone(),
    };
    let cond_list = p.conditioning(&observed);
    let label = pattern.label(&p.base);
    let fixed: BTreeSet<String> = p.indicators().into_iter().collect();
    let shown: Vec<String> = label
        .split(", ")
        .map(str::to_string)
        .chain(cond_list.iter().filter(|c| !fixed.contains(*c)).cloned())
        .collect();
    let target = if missing.len() == 1 {
        missing[0].to_string()
    } else {
        format!("({})", missing.join(", "))
    };
    let mut verdict = QueryVerdict {
        assumption,
        pattern: Some(pattern.to_string()),
        pattern_label: Some(label),
        holds: true,
        witnesses: Vec::new(),
        caution: None,
        statement: format!("{subject} ⊥ {target} | {}", shown.join(", ")),
        note: None,
    };
    if missing.is_empty() {
        verdict.note = Some(VerdictNote::TriviallyTrue);
        verdict.statement = format!("{subject} ⊥ ∅ | {}", shown.join(", "));
        return Ok(verdict);
    }
    let modification = match find_mod(mods, pattern)? {
        Some(m) => m.clone(),
        None => {
            verdict.note = Some(VerdictNote::Unassessed);
            PatternModification {
                pattern: pattern.clone(),
                removed_edges: Vec::new(),
            }
        }
    };
    let restricted = restrict_to_pattern(&p.base, &modification)?;
    let cond: BTreeSet<String> = cond_list.into_iter().collect();
    for w in missing {
        let v = d_separated(&restricted, &subject, w, &cond)?;
        if !v.separated {
            verdict.holds = false;
            verdict.witnesses.extend(v.open_paths);
            merge_caution(&mut verdict.caution, v.caution);
        }
    }
    Ok(verdict)
}

fn all_patterns(p: &Prepared) -> Vec<Pattern> {
    Pattern::enumerate(p.pattern_count())
}

/// mSITA on the template (or twin network when treatment or outcome cause
/// missingness).
pub fn check_msita(spec: &AssumptionSpec) -> Result<QueryVerdict, CheckError> {
    msita(&prepare(spec)?)
}

/// CIT for every pattern, all-observed first.
pub fn check_cit(spec: &AssumptionSpec) -> Result<Vec<QueryVerdict>, CheckError> {
    let p = prepare(spec)?;
    all_patterns(&p)
        .iter()
        .map(|pat| per_pattern(&p, &spec.pattern_mods, Assumption::Cit, pat))
        .collect()
}

/// CIO for every pattern, all-observed first.
pub fn check_cio(spec: &AssumptionSpec) -> Result<Vec<QueryVerdict>, CheckError> {
    let p = prepare(spec)?;
    all_patterns(&p)
        .iter()
        .map(|pat| per_pattern(&p, &spec.pattern_mods, Assumption::Cio, pat))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::parse_graph;

    const FIG1: &str = "dag { X -> Z X -> Y Z -> Y U_Z -> Z U_Z -> R U_Y -> Y U_Y -> R }
roles {
  treatment Z
  outcome Y
  confounder X partial
  missing R of X
  latent U_Z U_Y
}";

    fn fig1_spec() -> AssumptionSpec {
        AssumptionSpec::new(parse_graph(FIG1).unwrap())
    }

    fn drop_x_to_z() -> Vec<PatternModification> {
        vec![PatternModification {
            pattern: Pattern(vec![false]),
            removed_edges: vec![("X".into(), "Z".into())],
        }]
    }

    #[test]
    fn figure1_msita_violated_with_witness() {
        let v = check_msita(&fig1_spec()).unwrap();
        assert!(!v.holds);
        assert_eq!(v.statement, "Z ⊥ Y_z | R, X, z");
        let paths: Vec<String> = v.witnesses.iter().map(|p| p.to_string()).collect();
        assert_eq!(paths, vec!["Z <- U_Z -> R <- U_Y -> Y_z [open]"]);
    }

    #[test]
    fn measuring_u_z_repairs_msita() {
        let v = check_msita(&fig1_spec().condition_on(["U_Z"])).unwrap();
        assert!(v.holds);
        assert_eq!(v.statement, "Z ⊥ Y_z | R, X, U_Z, z");
    }

    #[test]
    fn figure2_cit_holds_cio_fails() {
        let spec = fig1_spec().with_mods(drop_x_to_z());
        let cit = check_cit(&spec).unwrap();
        let cio = check_cio(&spec).unwrap();
        assert_eq!(cit.len(), 2);
        assert_eq!(cit[0].note, Some(VerdictNote::TriviallyTrue));
        assert!(cit[1].holds);
        assert_eq!(cit[1].statement, "Z ⊥ X | R=0, z");
        assert!(!cio[1].holds);
        assert_eq!(cio[1].witnesses[0].to_string(), "Y_z <- X [open]");
    }

    #[test]
    fn missing_modification_is_unassessed() {
        let cit = check_cit(&fig1_spec()).unwrap();
        assert_eq!(cit[1].note, Some(VerdictNote::Unassessed));
        assert!(!cit[1].holds);
    }

    #[test]
    fn outcome_causing_missingness_uses_twin() {
        let g = parse_graph(
            "dag { X -> Z X -> Y Z -> Y Y -> R }\nroles {\ntreatment Z\noutcome Y\nconfounder X partial\nmissing R of X\n}",
        )
        .unwrap();
        let v = check_msita(&AssumptionSpec::new(g)).unwrap();
        assert!(!v.holds);
        assert_eq!(v.caution, Some(Caution::IncompleteTwinDsep));
        let paths: Vec<String> = v.witnesses.iter().map(|p| p.to_string()).collect();
        assert!(paths.contains(&"Z -> Y <- e_Y -> Y_z [open]".to_string()));
    }

    #[test]
    fn confounder_downstream_of_treatment_is_rejected() {
        let g = parse_graph(
            "dag { Z -> X X -> Y Z -> Y }\nroles {\ntreatment Z\noutcome Y\nconfounder X full\n}",
        )
        .unwrap();
        assert!(matches!(
            check_msita(&AssumptionSpec::new(g)),
            Err(CheckError::ConfounderAfterTreatment(_))
        ));
    }
}
