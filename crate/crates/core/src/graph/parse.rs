//! Parser for the `dag { ... } roles { ... }` diagram language.
//!
//! The `dag` block accepts the subset of dagitty syntax used for plain DAGs:
//! bare node names and chains of `->` / `<-` clauses (`Z <- X -> Yz` is two
//! edges sharing `X`). The optional `roles` block is line oriented:
//!
//! ```text
//! treatment Z
//! intervened z          # present only in hand-drawn templates
//! outcome Y             # or `potential Yz`
//! confounder X partial  # or `full`
//! missing R of X
//! latent U_Z U_Y
//! auxiliary Hosp
//! ```

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use super::{valid_name, CausalGraph, GraphError, Node, NodeRole, Observability, Provenance};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("syntax error at {line}:{col} near `{token}`: {message}")]
    Syntax {
        line: usize,
        col: usize,
        token: String,
        message: String,
    },
    #[error(transparent)]
    Graph(#[from] GraphError),
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Ident(String),
    Forward,
    Backward,
    Open,
    Close,
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    text: String,
    line: usize,
    col: usize,
}

fn syntax(line: usize, col: usize, token: &str, message: impl Into<String>) -> ParseError {
    ParseError::Syntax {
        line,
        col,
        token: token.to_string(),
        message: message.into(),
    }
}

fn lex(src: &str) -> Result<Vec<Token>, ParseError> {
    let mut out = Vec::new();
    for (lineno, line) in src.lines().enumerate() {
        let line_no = lineno + 1;
        let chars: Vec<char> = line.chars().collect();
        let mut i = 0;
        while i < chars.len() {
            let c = chars[i];
            let col = i + 1;
            if c == '#' {
                break;
            }
            if c.is_whitespace() || c == ';' || c == ',' {
                i += 1;
                continue;
            }
            let rest: String = chars[i..chars.len().min(i + 3)].iter().collect();
            if rest.starts_with("<->") {
                return Err(syntax(
                    line_no,
                    col,
                    "<->",
                    "bidirected edges are not supported; declare the latent common cause as an explicit node",
                ));
            }
            if rest.starts_with("->") || rest.starts_with("<-") {
                let tok = if rest.starts_with("->") {
                    Tok::Forward
                } else {
                    Tok::Backward
                };
                out.push(Token {
                    tok,
                    text: rest[..2].to_string(),
                    line: line_no,
                    col,
                });
                i += 2;
                continue;
            }
            if rest.starts_with("--") {
                return Err(syntax(line_no, col, "--", "undirected edges are not supported"));
            }
            match c {
                '{' | '}' => {
                    out.push(Token {
                        tok: if c == '{' { Tok::Open } else { Tok::Close },
                        text: c.to_string(),
                        line: line_no,
                        col,
                    });
                    i += 1;
                }
                '[' | ']' => {
                    return Err(syntax(
                        line_no,
                        col,
                        &c.to_string(),
                        "node attributes (coordinates, latent/exposure markers) are not supported; use the roles block",
                    ));
                }
                c if c.is_ascii_alphanumeric() || c == '_' => {
                    let start = i;
                    while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                        i += 1;
                    }
                    let word: String = chars[start..i].iter().collect();
                    if !valid_name(&word) {
                        return Err(syntax(line_no, col, &word, "invalid node name"));
                    }
                    out.push(Token {
                        tok: Tok::Ident(word.clone()),
                        text: word,
                        line: line_no,
                        col,
                    });
                }
                other => {
                    return Err(syntax(
                        line_no,
                        col,
                        &other.to_string(),
                        "unexpected character",
                    ))
                }
            }
        }
    }
    Ok(out)
}

struct Cursor {
    toks: Vec<Token>,
    pos: usize,
    end_line: usize,
}

impl Cursor {
    fn peek(&self) -> Option<&Token> {
        self.toks.get(self.pos)
    }

    fn next(&mut self) -> Option<Token> {
        let t = self.toks.get(self.pos).cloned();
        self.pos += 1;
        t
    }

    fn eof_error(&self, message: &str) -> ParseError {
        syntax(self.end_line, 1, "<eof>", message)
    }

    fn expect_keyword(&mut self, kw: &str) -> Result<(), ParseError> {
        match self.next() {
            Some(Token {
                tok: Tok::Ident(w), ..
            }) if w == kw => Ok(()),
            Some(t) => Err(syntax(t.line, t.col, &t.text, format!("expected `{kw}`"))),
            None => Err(self.eof_error(&format!("expected `{kw}`"))),
        }
    }

    fn expect(&mut self, want: Tok, what: &str) -> Result<Token, ParseError> {
        match self.next() {
            Some(t) if t.tok == want => Ok(t),
            Some(t) => Err(syntax(t.line, t.col, &t.text, format!("expected {what}"))),
            None => Err(self.eof_error(&format!("expected {what}"))),
        }
    }
}

/// Parses a diagram. Graphs declaring an `intervened` node are hand-drawn
/// templates and get `Provenance::Swit`; everything else is `Raw`.
pub fn parse_graph(src: &str) -> Result<CausalGraph, ParseError> {
    let toks = lex(src)?;
    let mut cur = Cursor {
        toks,
        pos: 0,
        end_line: src.lines().count().max(1),
    };

    cur.expect_keyword("dag")?;
    cur.expect(Tok::Open, "`{`")?;
    let mut order: Vec<String> = Vec::new();
    let mut declared: BTreeSet<String> = BTreeSet::new();
    let mut edges: Vec<(String, String)> = Vec::new();
    let mut declare = |name: &str, order: &mut Vec<String>| {
        if declared.insert(name.to_string()) {
            order.push(name.to_string());
        }
    };
    loop {
        let t = cur.next().ok_or_else(|| cur.eof_error("unterminated `dag` block"))?;
        let mut current = match t.tok {
            Tok::Close => break,
            Tok::Ident(name) => name,
            _ => {
                return Err(syntax(
                    t.line,
                    t.col,
                    &t.text,
                    "expected a node name",
                ))
            }
        };
        declare(&current, &mut order);
        while let Some(op) = cur.peek().cloned() {
            let forward = match op.tok {
                Tok::Forward => true,
                Tok::Backward => false,
                _ => break,
            };
            cur.next();
            let target = match cur.next() {
                Some(Token {
                    tok: Tok::Ident(n), ..
                }) => n,
                Some(t) => {
                    return Err(syntax(t.line, t.col, &t.text, "expected a node name after arrow"))
                }
                None => return Err(cur.eof_error("expected a node name after arrow")),
            };
            declare(&target, &mut order);
            if forward {
                edges.push((current.clone(), target.clone()));
            } else {
                edges.push((target.clone(), current.clone()));
            }
            current = target;
        }
    }

    let mut roles: BTreeMap<String, NodeRole> = BTreeMap::new();
    if let Some(t) = cur.next() {
        match &t.tok {
            Tok::Ident(w) if w == "roles" => {}
            _ => {
                return Err(syntax(
                    t.line,
                    t.col,
                    &t.text,
                    "expected `roles` block or end of input",
                ))
            }
        }
        cur.expect(Tok::Open, "`{`")?;
        let mut body: Vec<Token> = Vec::new();
        loop {
            let t = cur
                .next()
                .ok_or_else(|| cur.eof_error("unterminated `roles` block"))?;
            match t.tok {
                Tok::Close => break,
                Tok::Ident(_) => body.push(t),
                _ => return Err(syntax(t.line, t.col, &t.text, "unexpected token in roles block")),
            }
        }
        let mut lines: BTreeMap<usize, Vec<Token>> = BTreeMap::new();
        for t in body {
            lines.entry(t.line).or_default().push(t);
        }
        for words in lines.values() {
            parse_role_line(words, &declared, &mut roles)?;
        }
        if let Some(t) = cur.next() {
            return Err(syntax(t.line, t.col, &t.text, "trailing input after roles block"));
        }
    }

    let swit = roles.values().any(|r| *r == NodeRole::IntervenedTreatment);
    let provenance = if swit { Provenance::Swit } else { Provenance::Raw };
    let build = |roles: &BTreeMap<String, NodeRole>| {
        let nodes = order
            .iter()
            .map(|name| {
                Node::new(
                    name.clone(),
                    roles.get(name).cloned().unwrap_or(NodeRole::Auxiliary),
                )
            })
            .collect();
        CausalGraph::from_parts(nodes, edges.clone(), provenance.clone(), None)
    };
    let graph = build(&roles)?;
    // in a template the outcome is potential when the intervened node reaches it
    if let (Some(z), Some(y)) = (graph.intervened(), graph.outcome()) {
        if graph.descendants(z)?.contains(y) {
            let y = y.to_string();
            roles.insert(y, NodeRole::PotentialOutcome);
            return Ok(build(&roles)?);
        }
    }
    Ok(graph)
}

fn parse_role_line(
    words: &[Token],
    declared: &BTreeSet<String>,
    roles: &mut BTreeMap<String, NodeRole>,
) -> Result<(), ParseError> {
    let word = |i: usize| -> Option<&str> {
        words.get(i).map(|t| t.text.as_str())
    };
    let head = &words[0];
    let arity_err = |msg: &str| syntax(head.line, head.col, &head.text, msg.to_string());
    let mut assign = |tok: &Token, role: NodeRole| -> Result<(), ParseError> {
        if !declared.contains(&tok.text) {
            return Err(syntax(
                tok.line,
                tok.col,
                &tok.text,
                "role declared for a node that does not appear in the dag block",
            ));
        }
        match roles.get(&tok.text) {
            Some(existing) if *existing != role => Err(ParseError::Graph(GraphError::RoleConflict(
                format!("`{}` declared with two different roles", tok.text),
            ))),
            _ => {
                roles.insert(tok.text.clone(), role);
                Ok(())
            }
        }
    };
    match head.text.as_str() {
        "treatment" | "intervened" | "outcome" | "potential" => {
            if words.len() != 2 {
                return Err(arity_err("expected exactly one node name"));
            }
            let role = match head.text.as_str() {
                "treatment" => NodeRole::Treatment,
                "intervened" => NodeRole::IntervenedTreatment,
                "outcome" => NodeRole::Outcome,
                _ => NodeRole::PotentialOutcome,
            };
            assign(&words[1], role)
        }
        "confounder" => {
            let observability = match (words.len(), word(2)) {
                (2, None) => Observability::Full,
                (3, Some("full")) => Observability::Full,
                (3, Some("partial")) => Observability::Partial,
                (3, Some(_)) => {
                    let t = &words[2];
                    return Err(syntax(t.line, t.col, &t.text, "expected `partial` or `full`"));
                }
                _ => return Err(arity_err("expected `confounder NAME partial|full`")),
            };
            assign(&words[1], NodeRole::Confounder { observability })
        }
        "missing" => {
            if words.len() != 4 || word(2) != Some("of") {
                return Err(arity_err("expected `missing R of X`"));
            }
            if !declared.contains(&words[3].text) {
                let t = &words[3];
                return Err(ParseError::Graph(GraphError::DanglingIndicator {
                    indicator: words[1].text.clone(),
                    target: t.text.clone(),
                }));
            }
            assign(
                &words[1],
                NodeRole::MissingnessIndicator {
                    target: words[3].text.clone(),
                },
            )
        }
        "latent" | "auxiliary" => {
            if words.len() < 2 {
                return Err(arity_err("expected at least one node name"));
            }
            let role = if head.text == "latent" {
                NodeRole::Latent
            } else {
                NodeRole::Auxiliary
            };
            for t in &words[1..] {
                assign(t, role.clone())?;
            }
            Ok(())
        }
        _ => Err(syntax(head.line, head.col, &head.text, "unknown role keyword")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_graph() {
        let g = parse_graph(
            "dag { X -> Z X -> Yz }\nroles {\n treatment Z\n outcome Yz\n confounder X full\n}",
        )
        .unwrap();
        assert_eq!(g.len(), 3);
        assert_eq!(g.edge_count(), 2);
        assert_eq!(g.treatment(), Some("Z"));
        assert_eq!(g.outcome(), Some("Yz"));
        assert_eq!(*g.provenance(), Provenance::Raw);
    }

    #[test]
    fn template_source_from_appendix() {
        let src = "dag { z -> Yz  Z <- X -> Yz  R <- U_Z -> Z  R <- U_Y -> Yz }
roles {
  treatment Z
  intervened z
  outcome Yz
  confounder X partial
  missing R of X
  latent U_Z U_Y
}";
        let g = parse_graph(src).unwrap();
        assert_eq!(g.len(), 7);
        assert_eq!(g.edge_count(), 7);
        assert_eq!(g.latents(), vec!["U_Y", "U_Z"]);
        assert_eq!(*g.provenance(), Provenance::Swit);
        assert_eq!(g.potential_outcome(), Some("Yz"));
    }

    #[test]
    fn two_cycle_is_reported() {
        match parse_graph("dag { A -> B B -> A }") {
            Err(ParseError::Graph(GraphError::Cycle(c))) => {
                assert!(c.contains(&"A".to_string()) && c.contains(&"B".to_string()));
            }
            other => panic!("expected cycle, got {other:?}"),
        }
    }

    #[test]
    fn syntax_errors_carry_position() {
        match parse_graph("dag {\n  A -> \n}") {
            Err(ParseError::Syntax { line, token, .. }) => {
                assert_eq!(line, 3);
                assert_eq!(token, "}");
            }
            other => panic!("{other:?}"),
        }
        assert!(matches!(
            parse_graph("dag { A <-> B }"),
            Err(ParseError::Syntax { col: 9, .. })
        ));
        assert!(matches!(
            parse_graph("dag { A [pos=\"1,2\"] }"),
            Err(ParseError::Syntax { .. })
        ));
        assert!(matches!(parse_graph("graph { A }"), Err(ParseError::Syntax { .. })));
    }

    #[test]
    fn role_conflicts() {
        let two_treatments = "dag { A -> B }\nroles {\ntreatment A\ntreatment B\n}";
        assert!(matches!(
            parse_graph(two_treatments),
            Err(ParseError::Graph(GraphError::RoleConflict(_)))
        ));
        let dangling = "dag { R X }\nroles {\nmissing R of X\n}";
        assert!(matches!(
            parse_graph(dangling),
            Err(ParseError::Graph(GraphError::DanglingIndicator { .. }))
        ));
        let unknown_target = "dag { R }\nroles {\nmissing R of Q\n}";
        assert!(matches!(
            parse_graph(unknown_target),
            Err(ParseError::Graph(GraphError::DanglingIndicator { .. }))
        ));
    }

    #[test]
    fn comments_and_bare_nodes() {
        let g = parse_graph("# header\ndag {\n  A # lonely\n  B -> C\n}\n").unwrap();
        assert_eq!(g.len(), 3);
        assert_eq!(g.edge_count(), 1);
    }
}
