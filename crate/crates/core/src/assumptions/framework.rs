use std::collections::BTreeSet;
use std::fmt::Write;

use serde::{Deserialize, Serialize};

use super::{msita, per_pattern, prepare, Assumption, AssumptionSpec, CheckError, QueryVerdict, VerdictNote};
use crate::graph::{CausalGraph, Provenance};
use crate::transforms::{merge_intervention, Pattern};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Route {
    Cit,
    Cio,
    /// Both hold in every pattern.
    Both,
    /// Each pattern has one of them, but neither holds throughout.
    Mixed,
}

impl Route {
    fn phrase(self) -> &'static str {
        match self {
            Route::Cit => "CIT",
            Route::Cio => "CIO",
            Route::Both => "CIT and CIO",
            Route::Mixed => "CIT or CIO (pattern-specific)",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScenarioFlag {
    /// "I", "II" or "III".
    pub scenario: String,
    /// Edges of the matched structure, `A -> B`.
    pub matched: Vec<String>,
    pub variant: Option<String>,
    /// True when the match alone makes the approach inadmissible.
    pub decisive: bool,
    pub note: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Assertion {
    pub pattern: String,
    pub pattern_label: String,
    pub removed_edges: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PatternSummary {
    pub pattern: String,
    pub pattern_label: String,
    pub cit: bool,
    pub cio: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrameworkReport {
    pub treatment: String,
    pub outcome: String,
    /// `swit` or `twin`.
    pub base_graph: String,
    pub assertions: Vec<Assertion>,
    pub scenario_flags: Vec<ScenarioFlag>,
    /// mSITA first, then CIT and CIO per pattern.
    pub verdicts: Vec<QueryVerdict>,
    pub patterns: Vec<PatternSummary>,
    pub admissible: bool,
    pub failed_step: Option<u8>,
    pub route: Option<Route>,
    pub narrative: String,
}

impl FrameworkReport {
    pub fn msita(&self) -> &QueryVerdict {
        &self.verdicts[0]
    }

    pub fn of(&self, assumption: Assumption) -> impl Iterator<Item = &QueryVerdict> {
        self.verdicts.iter().filter(move |v| v.assumption == assumption)
    }
}

fn edge(a: &str, b: &str) -> String {
    format!("{a} -> {b}")
}

fn raw_view(graph: &CausalGraph) -> Result<CausalGraph, CheckError> {
    Ok(match graph.provenance() {
        Provenance::Swit => merge_intervention(graph)?,
        _ => graph.clone(),
    })
}

/// Structural screen for the three key scenarios. Works on raw names.
pub(crate) fn screen(spec: &AssumptionSpec) -> Result<Vec<ScenarioFlag>, CheckError> {
    let g = raw_view(&spec.graph)?;
    let mut flags = Vec::new();
    let (Some(z), Some(y)) = (g.treatment(), g.outcome()) else {
        return Ok(flags);
    };
    let indicators = g.indicators();
    let measured = &spec.extra_conditioning;
    let is_latent = |v: &str| g.role(v).is_some_and(|r| r.is_latent()) && !measured.contains(v);

    let y_to_r: Vec<String> = indicators
        .iter()
        .filter(|r| g.has_edge(y, r))
        .map(|r| edge(y, r))
        .collect();
    if !y_to_r.is_empty() {
        flags.push(ScenarioFlag {
            scenario: "I".into(),
            matched: y_to_r,
            variant: None,
            decisive: true,
            note: "the outcome affects missingness of a confounder; mSITA cannot hold".into(),
        });
    }

    let mut ii = Vec::new();
    for l in g.latents() {
        if !is_latent(l) || !g.has_edge(l, y) {
            continue;
        }
        for r in &indicators {
            if g.has_edge(l, r) {
                ii.push(edge(l, y));
                ii.push(edge(l, r));
            }
        }
    }
    if !ii.is_empty() {
        let mut zr = Vec::new();
        for w in g.parents(z)? {
            for r in &indicators {
                if g.has_edge(w, r) {
                    zr.push(edge(w, z));
                    zr.push(edge(w, r));
                }
            }
        }
        if !zr.is_empty() {
            ii.extend(zr);
            ii.sort();
            ii.dedup();
            flags.push(ScenarioFlag {
                scenario: "II".into(),
                matched: ii,
                variant: None,
                decisive: false,
                note: "missingness shares an unmeasured cause with the outcome and a cause with the treatment; verdict deferred to d-separation".into(),
            });
        }
    }

    let partial = g.partial_confounders();
    for x in &partial {
        let Some(r) = g.indicator_of(x) else { continue };
        if !(g.has_edge(x, r) && g.has_edge(z, r)) {
            continue;
        }
        let k = partial.len();
        let idx = partial.iter().position(|p| p == x).unwrap_or(0);
        let missing_patterns: Vec<Pattern> = Pattern::enumerate(k)
            .into_iter()
            .filter(|p| !p.0[idx])
            .collect();
        let direct_retained = g.has_edge(x, y)
            && missing_patterns.iter().any(|p| {
                !spec.pattern_mods.iter().any(|m| {
                    &m.pattern == p
                        && m.removed_edges.iter().any(|(a, b)| a == x && raw_target(&g, b) == y)
                })
            });
        let latent_links: Vec<&str> = g
            .latents()
            .into_iter()
            .filter(|l| is_latent(l) && g.has_edge(l, x) && g.has_edge(l, y))
            .collect();
        let mut variants = Vec::new();
        let mut matched = vec![edge(x, r), edge(z, r)];
        if direct_retained {
            variants.push("direct");
            matched.push(edge(x, y));
        }
        if !latent_links.is_empty() {
            variants.push("latent_common_cause");
            for l in latent_links {
                matched.push(edge(l, x));
                matched.push(edge(l, y));
            }
        }
        if !variants.is_empty() {
            flags.push(ScenarioFlag {
                scenario: "III".into(),
                matched,
                variant: Some(variants.join("+")),
                decisive: false,
                note: "confounder and treatment both affect the confounder's missingness and the confounder stays associated with the outcome when missing; association through a latent common cause is flagged too, although whether it counts is ambiguous".into(),
            });
        }
    }
    Ok(flags)
}

/// Outcome names may be given with the potential suffix in a mods file.
fn raw_target<'a>(g: &'a CausalGraph, b: &'a str) -> &'a str {
    if g.contains(b) {
        return b;
    }
    b.strip_suffix(crate::transforms::POTENTIAL_SUFFIX).unwrap_or(b)
}

/// Runs the whole sequence: assertions, key-scenario screen, mSITA, then CIT
/// and CIO for each pattern. Admissible when mSITA holds and every pattern
/// satisfies CIT or CIO (and no decisive scenario was matched).
pub fn run_framework(spec: &AssumptionSpec) -> Result<FrameworkReport, CheckError> {
    let p = prepare(spec)?;
    let mut seen = BTreeSet::new();
    for m in &spec.pattern_mods {
        if !seen.insert(m.pattern.clone()) {
            return Err(CheckError::DuplicatePattern(m.pattern.to_string()));
        }
    }
    let assertions: Vec<Assertion> = spec
        .pattern_mods
        .iter()
        .map(|m| Assertion {
            pattern: m.pattern.to_string(),
            pattern_label: m.pattern.label(&p.base),
            removed_edges: m.removed_edges.iter().map(|(a, b)| edge(a, b)).collect(),
        })
        .collect();
    let scenario_flags = screen(spec)?;
    let ms = msita(&p)?;
    let patterns_all = Pattern::enumerate(p.pattern_count());
    let mut cit = Vec::new();
    let mut cio = Vec::new();
    for pat in &patterns_all {
        cit.push(per_pattern(&p, &spec.pattern_mods, Assumption::Cit, pat)?);
        cio.push(per_pattern(&p, &spec.pattern_mods, Assumption::Cio, pat)?);
    }
    let patterns: Vec<PatternSummary> = cit
        .iter()
        .zip(&cio)
        .map(|(a, b)| PatternSummary {
            pattern: a.pattern.clone().unwrap_or_default(),
            pattern_label: a.pattern_label.clone().unwrap_or_default(),
            cit: a.holds,
            cio: b.holds,
        })
        .collect();

    let decisive = scenario_flags.iter().any(|f| f.decisive);
    let every_pattern = patterns.iter().all(|s| s.cit || s.cio);
    let failed_step = if decisive {
        Some(2)
    } else if !ms.holds {
        Some(3)
    } else if !every_pattern {
        Some(4)
    } else {
        None
    };
    let admissible = failed_step.is_none();
    let route = admissible.then(|| {
        let all_cit = patterns.iter().all(|s| s.cit);
        let all_cio = patterns.iter().all(|s| s.cio);
        match (all_cit, all_cio) {
            (true, true) => Route::Both,
            (true, false) => Route::Cit,
            (false, true) => Route::Cio,
            _ => Route::Mixed,
        }
    });

    let mut verdicts = vec![ms];
    verdicts.extend(cit);
    verdicts.extend(cio);
    let mut report = FrameworkReport {
        treatment: p.treatment.clone(),
        outcome: p.outcome.clone(),
        base_graph: match p.base.provenance().base() {
            Some(crate::graph::BaseKind::Twin) => "twin".into(),
            _ => "swit".into(),
        },
        assertions,
        scenario_flags,
        verdicts,
        patterns,
        admissible,
        failed_step,
        route,
        narrative: String::new(),
    };
    report.narrative = narrative(&report);
    Ok(report)
}

fn holds_word(v: &QueryVerdict) -> &'static str {
    match (v.holds, v.note) {
        (true, Some(VerdictNote::TriviallyTrue)) => "holds trivially",
        (true, _) => "holds",
        (false, _) => "violated",
    }
}

fn write_verdict(out: &mut String, indent: &str, v: &QueryVerdict) {
    let _ = write!(out, "{indent}{}: {}  [{}]", v.assumption, v.statement, holds_word(v));
    if v.note == Some(VerdictNote::Unassessed) {
        out.push_str(" (no modification given; unmodified graph used)");
    }
    if v.caution.is_some() {
        out.push_str(" (caution: d-separation is incomplete on twin networks)");
    }
    out.push('\n');
    for w in &v.witnesses {
        let _ = writeln!(out, "{indent}    {w}");
    }
}

fn narrative(r: &FrameworkReport) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "Treatment {}, potential outcome {}, checked on the {} graph.",
        r.treatment, r.outcome, r.base_graph
    );
    out.push_str("Step 1. Confounder-only-when-observed assertions:\n");
    if r.assertions.is_empty() {
        out.push_str("  none given\n");
    }
    for a in &r.assertions {
        let removed = if a.removed_edges.is_empty() {
            "no edges removed".to_string()
        } else {
            format!("removes {}", a.removed_edges.join(", "))
        };
        let _ = writeln!(out, "  {} ({}): {removed}", a.pattern_label, a.pattern);
    }
    out.push_str("Step 2. Key scenario screen:\n");
    if r.scenario_flags.is_empty() {
        out.push_str("  no key scenario matched\n");
    }
    for f in &r.scenario_flags {
        let variant = f
            .variant
            .as_ref()
            .map(|v| format!(" [{v}]"))
            .unwrap_or_default();
        let _ = writeln!(
            out,
            "  scenario {}{variant}: {} ({})",
            f.scenario,
            f.matched.join(", "),
            f.note
        );
    }
    out.push_str("Step 3. mSITA:\n");
    write_verdict(&mut out, "  ", r.msita());
    out.push_str("Step 4. CIT and CIO per pattern:\n");
    for v in r.verdicts.iter().skip(1) {
        write_verdict(&mut out, "  ", v);
    }
    match (r.admissible, r.route, r.failed_step) {
        (true, Some(route), _) => {
            let _ = write!(out, "Result: admissible via {}", route.phrase());
        }
        (_, _, Some(step)) => {
            let _ = write!(out, "Result: inadmissible at step {step}");
        }
        _ => out.push_str("Result: inadmissible"),
    }
    out.push('\n');
    out
}
