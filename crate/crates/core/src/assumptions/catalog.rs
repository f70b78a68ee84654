//! Library of small diagrams that violate one of the assumptions, each with
//! the expected verdict.
//!
//! Every entry extends the skeleton `X -> Z, X -> Y, Z -> Y` (X partially
//! observed, indicator R). Entries that involve a fully observed confounder C
//! also add `C -> Z, C -> Y`. CIT/CIO entries are judged in the pattern with
//! X missing.

use std::collections::BTreeSet;

use serde::Serialize;

use super::{check_cio, check_cit, check_msita, Assumption, AssumptionSpec, CheckError};
use crate::graph::{parse_graph, CausalGraph};
use crate::transforms::{Pattern, PatternModification};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Group {
    /// A Z-to-R pattern combined with an R-to-Y pattern, or sufficient alone.
    Msita,
    /// A: X still acts as a confounder when missing. B: collider bias via R.
    CitCioA,
    CitCioB,
    /// Violations in which treatment or outcome cause missingness.
    Additional,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CatalogEntry {
    pub id: String,
    pub group: Group,
    pub assumption: Assumption,
    pub description: String,
    /// Edges beyond the skeleton.
    pub edges: Vec<(String, String)>,
    pub latents: Vec<String>,
    pub uses_c: bool,
    /// Edges removed in the X-missing pattern.
    pub removed: Vec<(String, String)>,
    /// Node whose measurement removes the violation, if any.
    pub repair: Option<String>,
    /// Violation that no extra conditioning can remove.
    pub no_fix: bool,
}

fn e(a: &str, b: &str) -> (String, String) {
    (a.to_string(), b.to_string())
}

struct Piece {
    key: &'static str,
    text: &'static str,
    edges: &'static [(&'static str, &'static str)],
    uses_c: bool,
}

const Z_TO_R: [Piece; 4] = [
    Piece {
        key: "direct",
        text: "Z -> R",
        edges: &[("Z", "R")],
        uses_c: false,
    },
    Piece {
        key: "uz",
        text: "U_Z common cause of Z and R",
        edges: &[("U_Z", "Z"), ("U_Z", "R")],
        uses_c: false,
    },
    Piece {
        key: "via_x",
        text: "Z <- U_XZ -> X <- U_X -> R",
        edges: &[("U_XZ", "X"), ("U_XZ", "Z"), ("U_X", "X"), ("U_X", "R")],
        uses_c: false,
    },
    Piece {
        key: "via_c",
        text: "Z <- U_CZ -> C <- U_C -> R",
        edges: &[("U_CZ", "C"), ("U_CZ", "Z"), ("U_C", "C"), ("U_C", "R")],
        uses_c: true,
    },
];

const R_TO_Y: [Piece; 3] = [
    Piece {
        key: "uy",
        text: "U_Y common cause of R and Y",
        edges: &[("U_Y", "Y"), ("U_Y", "R")],
        uses_c: false,
    },
    Piece {
        key: "via_x",
        text: "R <- U_X -> X <- U_XY -> Y",
        edges: &[("U_XY", "X"), ("U_XY", "Y"), ("U_X", "X"), ("U_X", "R")],
        uses_c: false,
    },
    Piece {
        key: "via_c",
        text: "R <- U_C -> C <- U_CY -> Y",
        edges: &[("U_CY", "C"), ("U_CY", "Y"), ("U_C", "C"), ("U_C", "R")],
        uses_c: true,
    },
];

fn latents_of(edges: &[(String, String)]) -> Vec<String> {
    let set: BTreeSet<String> = edges
        .iter()
        .flat_map(|(a, b)| [a, b])
        .filter(|n| n.starts_with("U_"))
        .cloned()
        .collect();
    set.into_iter().collect()
}

fn dedup(mut edges: Vec<(String, String)>) -> Vec<(String, String)> {
    let mut seen = BTreeSet::new();
    edges.retain(|x| seen.insert(x.clone()));
    edges
}

fn entry(
    id: String,
    group: Group,
    assumption: Assumption,
    description: String,
    edges: Vec<(String, String)>,
    uses_c: bool,
    removed: Vec<(String, String)>,
    repair: Option<&str>,
    no_fix: bool,
) -> CatalogEntry {
    let edges = dedup(edges);
    CatalogEntry {
        id,
        group,
        assumption,
        description,
        latents: latents_of(&edges),
        edges,
        uses_c,
        removed,
        repair: repair.map(str::to_string),
        no_fix,
    }
}

/// Every catalog entry, in a fixed order.
pub fn catalog() -> Vec<CatalogEntry> {
    let mut out = Vec::new();

    for zr in &Z_TO_R {
        for ry in &R_TO_Y {
            let edges: Vec<_> = zr.edges.iter().chain(ry.edges).map(|(a, b)| e(a, b)).collect();
            out.push(entry(
                format!("msita_{}_{}", zr.key, ry.key),
                Group::Msita,
                Assumption::Msita,
                format!("Z-to-R: {}; R-to-Y: {}", zr.text, ry.text),
                edges,
                zr.uses_c || ry.uses_c,
                vec![],
                None,
                false,
            ));
        }
    }
    out.push(entry(
        "msita_y_to_r".into(),
        Group::Msita,
        Assumption::Msita,
        "Y -> R, sufficient on its own".into(),
        vec![e("Y", "R")],
        false,
        vec![],
        None,
        false,
    ));
    out.push(entry(
        "msita_z_to_r_r_to_y".into(),
        Group::Additional,
        Assumption::Msita,
        "Z -> R together with R -> Y".into(),
        vec![e("Z", "R"), e("R", "Y")],
        false,
        vec![],
        None,
        false,
    ));

    // CIT and CIO mirror each other: the "subject" is Z for CIT and Y for
    // CIO, and the analyst removes the X arrow into the other variable.
    for (assumption, s, u_s, tag) in [
        (Assumption::Cit, "Z", "U_Z", "cit"),
        (Assumption::Cio, "Y", "U_Y", "cio"),
    ] {
        let cut = vec![e("X", s)];
        let u_xs = format!("U_X{s}");
        let u_cs = format!("U_C{s}");
        out.push(entry(
            format!("{tag}_a_retained"),
            Group::CitCioA,
            assumption,
            format!("X -> {s} retained when X is missing"),
            vec![],
            false,
            vec![],
            None,
            false,
        ));
        out.push(entry(
            format!("{tag}_a_common_cause"),
            Group::CitCioA,
            assumption,
            format!("{u_xs} common cause of X and {s} when X is missing"),
            vec![e(&u_xs, "X"), e(&u_xs, s)],
            false,
            cut.clone(),
            None,
            false,
        ));
        let s_to_r_u = vec![e(u_s, s), e(u_s, "R")];
        let s_to_r_c = vec![e(&u_cs, "C"), e(&u_cs, s), e("U_C", "C"), e("U_C", "R")];
        let x_to_r = vec![e("X", "R")];
        let ux_to_r = vec![e("U_X", "X"), e("U_X", "R")];
        for (key, text, sr, xr, repair, uses_c) in [
            ("b_u_x", format!("{u_s} -> R with X -> R"), &s_to_r_u, &x_to_r, u_s, false),
            ("b_u_ux", format!("{u_s} -> R with U_X -> R"), &s_to_r_u, &ux_to_r, u_s, false),
            ("b_c_x", format!("{s} <- {u_cs} -> C <- U_C -> R with X -> R"), &s_to_r_c, &x_to_r, "U_C", true),
            ("b_c_ux", format!("{s} <- {u_cs} -> C <- U_C -> R with U_X -> R"), &s_to_r_c, &ux_to_r, "U_C", true),
        ] {
            out.push(entry(
                format!("{tag}_{key}"),
                Group::CitCioB,
                assumption,
                text,
                sr.iter().chain(xr.iter()).cloned().collect(),
                uses_c,
                cut.clone(),
                Some(repair),
                false,
            ));
        }
        out.push(entry(
            format!("{tag}_{}_to_r_x_to_r", s.to_lowercase()),
            Group::Additional,
            assumption,
            format!("{s} -> R and X -> R"),
            vec![e(s, "R"), e("X", "R")],
            false,
            cut.clone(),
            None,
            true,
        ));
        out.push(entry(
            format!("{tag}_{}_to_r_ux", s.to_lowercase()),
            Group::Additional,
            assumption,
            format!("{s} -> R and U_X -> R"),
            vec![e(s, "R"), e("U_X", "X"), e("U_X", "R")],
            false,
            cut,
            None,
            false,
        ));
    }
    out
}

pub fn find(id: &str) -> Option<CatalogEntry> {
    catalog().into_iter().find(|c| c.id == id)
}

impl CatalogEntry {
    /// Raw diagram in the graph DSL.
    pub fn source(&self) -> String {
        let mut edges = vec![e("X", "Z"), e("X", "Y"), e("Z", "Y")];
        if self.uses_c {
            edges.push(e("C", "Z"));
            edges.push(e("C", "Y"));
        }
        edges.extend(self.edges.iter().cloned());
        let mut s = String::from("dag {\n");
        for (a, b) in dedup(edges) {
            s.push_str(&format!("  {a} -> {b}\n"));
        }
        s.push_str("  R\n}\nroles {\n  treatment Z\n  outcome Y\n  confounder X partial\n  missing R of X\n");
        if self.uses_c {
            s.push_str("  confounder C full\n");
        }
        if !self.latents.is_empty() {
            s.push_str(&format!("  latent {}\n", self.latents.join(" ")));
        }
        s.push_str("}\n");
        s
    }

    pub fn graph(&self) -> CausalGraph {
        parse_graph(&self.source()).expect("catalog sources are well-formed")
    }

    pub fn mods(&self) -> Vec<PatternModification> {
        if self.assumption == Assumption::Msita {
            return Vec::new();
        }
        vec![PatternModification {
            pattern: Pattern(vec![false]),
            removed_edges: self.removed.clone(),
        }]
    }

    pub fn mods_toml(&self) -> String {
        let mut s = String::new();
        for m in self.mods() {
            let removed: Vec<String> = m
                .removed_edges
                .iter()
                .map(|(a, b)| format!("\"{a} -> {b}\""))
                .collect();
            s.push_str(&format!(
                "[[pattern]]\npattern = \"{}\"\nremove = [{}]\n",
                m.pattern,
                removed.join(", ")
            ));
        }
        s
    }

    pub fn spec(&self) -> AssumptionSpec {
        AssumptionSpec::new(self.graph()).with_mods(self.mods())
    }

    /// Verdict for the entry's assumption (in the X-missing pattern for CIT
    /// and CIO), conditioning additionally on `extra`.
    pub fn holds(&self, extra: &[&str]) -> Result<bool, CheckError> {
        let spec = self.spec().condition_on(extra.iter().copied());
        Ok(match self.assumption {
            Assumption::Msita => check_msita(&spec)?.holds,
            Assumption::Cit => check_cit(&spec)?[1].holds,
            Assumption::Cio => check_cio(&spec)?[1].holds,
        })
    }
}
