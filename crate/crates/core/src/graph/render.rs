use std::fmt::{self, Write};

use super::{CausalGraph, NodeRole, Observability};

impl CausalGraph {
    /// Canonical DSL form: a `# provenance:` header, isolated nodes and edges
    /// one per line in lexicographic order, then the roles block.
    pub fn to_dsl(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# provenance: {}", self.provenance);
        if let Some(r) = &self.restriction {
            let fixed: Vec<String> = r
                .fixed
                .iter()
                .map(|(k, v)| format!("{k}={}", u8::from(*v)))
                .collect();
            let _ = writeln!(out, "# restricted to: {}", fixed.join(", "));
            for (a, b) in &r.removed_edges {
                let _ = writeln!(out, "# removed: {a} -> {b}");
            }
        }
        out.push_str("dag {\n");
        for (i, node) in self.nodes.iter().enumerate() {
            if self.parents[i].is_empty() && self.children[i].is_empty() {
                let _ = writeln!(out, "  {}", node.name);
            }
        }
        for (a, b) in self.edges() {
            let _ = writeln!(out, "  {a} -> {b}");
        }
        out.push_str("}\n");

        let mut lines = Vec::new();
        for node in &self.nodes {
            let line = match &node.role {
                NodeRole::Treatment => format!("treatment {}", node.name),
                NodeRole::IntervenedTreatment => format!("intervened {}", node.name),
                NodeRole::Outcome => format!("outcome {}", node.name),
                NodeRole::PotentialOutcome => format!("potential {}", node.name),
                NodeRole::Confounder { observability } => format!(
                    "confounder {} {}",
                    node.name,
                    match observability {
                        Observability::Full => "full",
                        Observability::Partial => "partial",
                    }
                ),
                NodeRole::MissingnessIndicator { target } => {
                    format!("missing {} of {target}", node.name)
                }
                NodeRole::Latent => format!("latent {}", node.name),
                NodeRole::Auxiliary => continue,
            };
            lines.push(line);
        }
        if !lines.is_empty() {
            out.push_str("roles {\n");
            for line in lines {
                let _ = writeln!(out, "  {line}");
            }
            out.push_str("}\n");
        }
        out
    }
}

impl fmt::Display for CausalGraph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_dsl())
    }
}

#[cfg(test)]
mod tests {
    use crate::graph::parse_graph;

    #[test]
    fn canonical_form_sorts_edges() {
        let g = parse_graph("dag { B -> C A -> B Q }").unwrap();
        assert_eq!(
            g.to_dsl(),
            "# provenance: raw\ndag {\n  Q\n  A -> B\n  B -> C\n}\n"
        );
    }
}
