//! Reader and writer for the `.bn` network text format, evidence strings, and
//! the bundled networks.
//!
//! ```text
//! network AB
//! node A { outcomes: t, f }
//! node B { outcomes: t, f }
//! parents B: A
//! cpt A:
//!   0.5 0.5
//! cpt B:
//!   0.9 0.1
//!   0.2 0.8
//! ```
//!
//! `cpt` rows carry one number per outcome and enumerate parent configurations
//! with the last declared parent varying fastest. Rows are not delimited; the
//! number stream is split by the node's outcome count. `#` starts a comment.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::network::{BeliefNetwork, Evidence, Issue, Node, ROW_TOLERANCE};

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Ident(String),
    Number(f64),
    LBrace,
    RBrace,
    Colon,
    Comma,
}

#[derive(Clone, Debug)]
struct Token {
    tok: Tok,
    line: usize,
    column: usize,
}

fn syntax(line: usize, column: usize, message: impl Into<String>) -> Error {
    Error::Syntax { line, column, message: message.into() }
}

fn semantic(line: usize, message: impl Into<String>) -> Error {
    Error::Semantic { line, message: message.into() }
}

fn tokenize(text: &str) -> Result<Vec<Token>> {
    let mut tokens = Vec::new();
    for (lno, raw) in text.lines().enumerate() {
        let line = lno + 1;
        let content = match raw.find('#') {
            Some(i) => &raw[..i],
            None => raw,
        };
        let chars: Vec<(usize, char)> = content.char_indices().collect();
        let mut k = 0;
        while k < chars.len() {
            let (_, c) = chars[k];
            let column = k + 1;
            let single = match c {
                '{' => Some(Tok::LBrace),
                '}' => Some(Tok::RBrace),
                ':' => Some(Tok::Colon),
                ',' => Some(Tok::Comma),
                _ => None,
            };
            if let Some(tok) = single {
                tokens.push(Token { tok, line, column });
                k += 1;
            } else if c.is_whitespace() {
                k += 1;
            } else if c.is_ascii_alphabetic() || c == '_' {
                let start = k;
                while k < chars.len() && (chars[k].1.is_ascii_alphanumeric() || chars[k].1 == '_') {
                    k += 1;
                }
                let word: String = chars[start..k].iter().map(|&(_, c)| c).collect();
                tokens.push(Token { tok: Tok::Ident(word), line, column });
            } else if c.is_ascii_digit() || matches!(c, '.' | '+' | '-') {
                let start = k;
                while k < chars.len()
                    && (chars[k].1.is_ascii_alphanumeric() || matches!(chars[k].1, '.' | '+' | '-'))
                {
                    k += 1;
                }
                let lexeme: String = chars[start..k].iter().map(|&(_, c)| c).collect();
                let value: f64 = lexeme
                    .parse()
                    .map_err(|_| syntax(line, column, format!("malformed number '{lexeme}'")))?;
                if !value.is_finite() {
                    return Err(syntax(line, column, format!("non-finite number '{lexeme}'")));
                }
                tokens.push(Token { tok: Tok::Number(value), line, column });
            } else {
                return Err(syntax(line, column, format!("unexpected character '{c}'")));
            }
        }
    }
    Ok(tokens)
}

struct Cursor {
    tokens: Vec<Token>,
    pos: usize,
    last_line: usize,
}

impl Cursor {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn next(&mut self, what: &str) -> Result<Token> {
        match self.tokens.get(self.pos) {
            Some(t) => {
                self.pos += 1;
                Ok(t.clone())
            }
            None => Err(syntax(self.last_line, 1, format!("unexpected end of input, expected {what}"))),
        }
    }

    fn ident(&mut self, what: &str) -> Result<(String, usize)> {
        let t = self.next(what)?;
        match t.tok {
            Tok::Ident(s) => Ok((s, t.line)),
            other => Err(syntax(t.line, t.column, format!("expected {what}, found {}", describe(&other)))),
        }
    }

    fn keyword(&mut self, kw: &str) -> Result<usize> {
        let t = self.next(&format!("'{kw}'"))?;
        match &t.tok {
            Tok::Ident(s) if s == kw => Ok(t.line),
            other => Err(syntax(t.line, t.column, format!("expected '{kw}', found {}", describe(other)))),
        }
    }

    fn punct(&mut self, want: Tok) -> Result<()> {
        let t = self.next(describe(&want).as_str())?;
        if t.tok == want {
            Ok(())
        } else {
            Err(syntax(
                t.line,
                t.column,
                format!("expected {}, found {}", describe(&want), describe(&t.tok)),
            ))
        }
    }

    fn eat(&mut self, want: &Tok) -> bool {
        if self.peek().map(|t| &t.tok) == Some(want) {
            self.pos += 1;
            true
        } else {
            false
        }
    }
}

fn describe(t: &Tok) -> String {
    match t {
        Tok::Ident(s) => format!("'{s}'"),
        Tok::Number(v) => format!("number {v}"),
        Tok::LBrace => "'{'".into(),
        Tok::RBrace => "'}'".into(),
        Tok::Colon => "':'".into(),
        Tok::Comma => "','".into(),
    }
}

struct NodeDecl {
    name: String,
    outcomes: Vec<String>,
    line: usize,
}

struct ParentsDecl {
    node: String,
    parents: Vec<String>,
    line: usize,
}

struct CptDecl {
    node: String,
    numbers: Vec<f64>,
    line: usize,
}

/// Parses and validates a network document.
pub fn parse_network(text: &str) -> Result<BeliefNetwork> {
    let tokens = tokenize(text)?;
    if tokens.is_empty() {
        return Err(syntax(1, 1, "no network declared"));
    }
    let last_line = tokens.last().map(|t| t.line).unwrap_or(1);
    let mut cur = Cursor { tokens, pos: 0, last_line };

    cur.keyword("network")?;
    let (net_name, _) = cur.ident("network name")?;

    let mut decls = Vec::new();
    let mut parents_decls = Vec::new();
    let mut cpt_decls = Vec::new();

    while let Some(t) = cur.peek().cloned() {
        match &t.tok {
            Tok::Ident(kw) if kw == "node" => {
                cur.pos += 1;
                let (name, line) = cur.ident("node name")?;
                cur.punct(Tok::LBrace)?;
                cur.keyword("outcomes")?;
                cur.punct(Tok::Colon)?;
                let mut outcomes = vec![cur.ident("outcome label")?.0];
                while cur.eat(&Tok::Comma) {
                    outcomes.push(cur.ident("outcome label")?.0);
                }
                if outcomes.len() < 2 {
                    return Err(syntax(line, t.column, format!("node '{name}' needs at least 2 outcomes")));
                }
                cur.punct(Tok::RBrace)?;
                decls.push(NodeDecl { name, outcomes, line });
            }
            Tok::Ident(kw) if kw == "parents" => {
                cur.pos += 1;
                let (node, line) = cur.ident("node name")?;
                cur.punct(Tok::Colon)?;
                let mut parents = vec![cur.ident("parent name")?.0];
                while cur.eat(&Tok::Comma) {
                    parents.push(cur.ident("parent name")?.0);
                }
                parents_decls.push(ParentsDecl { node, parents, line });
            }
            Tok::Ident(kw) if kw == "cpt" => {
                cur.pos += 1;
                let (node, line) = cur.ident("node name")?;
                cur.punct(Tok::Colon)?;
                let mut numbers = Vec::new();
                while let Some(Token { tok: Tok::Number(v), .. }) = cur.peek() {
                    numbers.push(*v);
                    cur.pos += 1;
                }
                if numbers.is_empty() {
                    let (l, c) = cur.peek().map(|t| (t.line, t.column)).unwrap_or((line, 1));
                    return Err(syntax(l, c, format!("cpt of '{node}' has no rows")));
                }
                cpt_decls.push(CptDecl { node, numbers, line });
            }
            other => {
                return Err(syntax(
                    t.line,
                    t.column,
                    format!("expected 'node', 'parents' or 'cpt', found {}", describe(other)),
                ))
            }
        }
    }

    resolve(net_name, decls, parents_decls, cpt_decls)
}

fn resolve(
    net_name: String,
    decls: Vec<NodeDecl>,
    parents_decls: Vec<ParentsDecl>,
    cpt_decls: Vec<CptDecl>,
) -> Result<BeliefNetwork> {
    let mut index: HashMap<&str, usize> = HashMap::new();
    for (i, d) in decls.iter().enumerate() {
        if index.insert(d.name.as_str(), i).is_some() {
            return Err(semantic(d.line, format!("node '{}' declared twice", d.name)));
        }
        for (k, o) in d.outcomes.iter().enumerate() {
            if d.outcomes[..k].contains(o) {
                return Err(semantic(d.line, format!("node '{}' repeats outcome '{o}'", d.name)));
            }
        }
    }

    let n = decls.len();
    let mut parents: Vec<Option<Vec<usize>>> = vec![None; n];
    let mut parents_line = vec![0; n];
    for p in &parents_decls {
        let &i = index
            .get(p.node.as_str())
            .ok_or_else(|| semantic(p.line, format!("parents declared for unknown node '{}'", p.node)))?;
        if parents[i].is_some() {
            return Err(semantic(p.line, format!("parents of '{}' declared twice", p.node)));
        }
        let mut resolved = Vec::with_capacity(p.parents.len());
        for name in &p.parents {
            let &j = index
                .get(name.as_str())
                .ok_or_else(|| semantic(p.line, format!("node '{}' has unknown parent '{name}'", p.node)))?;
            if resolved.contains(&j) {
                return Err(semantic(p.line, format!("node '{}' lists parent '{name}' twice", p.node)));
            }
            resolved.push(j);
        }
        parents[i] = Some(resolved);
        parents_line[i] = p.line;
    }

    let mut tables: Vec<Option<(Vec<f64>, usize)>> = vec![None; n];
    for c in cpt_decls {
        let &i = index
            .get(c.node.as_str())
            .ok_or_else(|| semantic(c.line, format!("cpt given for unknown node '{}'", c.node)))?;
        if tables[i].is_some() {
            return Err(semantic(c.line, format!("cpt of '{}' given twice", c.node)));
        }
        tables[i] = Some((c.numbers, c.line));
    }

    let mut nodes = Vec::with_capacity(n);
    let mut cpt_line = vec![0; n];
    for (i, d) in decls.iter().enumerate() {
        let parent_list = parents[i].clone().unwrap_or_default();
        let (numbers, line) = tables[i]
            .take()
            .ok_or_else(|| semantic(d.line, format!("node '{}' has no cpt", d.name)))?;
        cpt_line[i] = line;
        let arity = d.outcomes.len();
        let expected_rows: usize = parent_list.iter().map(|&p| decls[p].outcomes.len()).product();
        if numbers.len() != expected_rows * arity {
            return Err(semantic(
                line,
                format!(
                    "cpt of '{}' has {} numbers, expected {} rows of {} ({} numbers)",
                    d.name,
                    numbers.len(),
                    expected_rows,
                    arity,
                    expected_rows * arity
                ),
            ));
        }
        let rows: Vec<Vec<f64>> = numbers.chunks(arity).map(|r| r.to_vec()).collect();
        for (r, row) in rows.iter().enumerate() {
            if let Some(v) = row.iter().find(|v| !(0.0..=1.0).contains(*v)) {
                return Err(semantic(line, format!("cpt of '{}' row {r} has entry {v} outside [0, 1]", d.name)));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > ROW_TOLERANCE {
                return Err(semantic(line, format!("cpt of '{}' row {r} sums to {sum}, not 1", d.name)));
            }
        }
        nodes.push(Node {
            name: d.name.clone(),
            outcomes: d.outcomes.clone(),
            parents: parent_list,
            cpt: crate::network::Cpt::new(rows),
        });
    }

    BeliefNetwork::new(net_name, nodes).map_err(|e| match e {
        Error::InvalidNetwork(report) => {
            let line = report
                .issues
                .iter()
                .find_map(|issue| match issue {
                    Issue::Cycle { nodes } => nodes
                        .first()
                        .and_then(|name| index.get(name.as_str()))
                        .map(|&i| parents_line[i]),
                    _ => None,
                })
                .unwrap_or(1);
            semantic(line, report.to_string())
        }
        other => other,
    })
}

/// A parsed document together with its line-tagged diagnostics.
#[derive(Clone, Debug)]
pub struct NetworkDocument {
    pub source: String,
    pub network: Option<BeliefNetwork>,
    pub diagnostics: Vec<Diagnostic>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Diagnostic {
    pub line: usize,
    pub column: Option<usize>,
    pub message: String,
}

impl NetworkDocument {
    pub fn load(source: impl Into<String>) -> Self {
        let source = source.into();
        match parse_network(&source) {
            Ok(net) => NetworkDocument { source, network: Some(net), diagnostics: Vec::new() },
            Err(e) => {
                let diag = match e {
                    Error::Syntax { line, column, message } => {
                        Diagnostic { line, column: Some(column), message }
                    }
                    Error::Semantic { line, message } => Diagnostic { line, column: None, message },
                    other => Diagnostic { line: 1, column: None, message: other.to_string() },
                };
                NetworkDocument { source, network: None, diagnostics: vec![diag] }
            }
        }
    }
}

/// 17 significant digits; plain decimal for moderate magnitudes.
fn format_probability(v: f64) -> String {
    if v == 0.0 {
        return "0".to_string();
    }
    let sci = format!("{v:.16e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-5..=0).contains(&exp) {
        return sci;
    }
    let digits: String = mantissa.chars().filter(|c| c.is_ascii_digit()).collect();
    if exp == 0 {
        format!("{}.{}", &digits[..1], &digits[1..])
    } else {
        format!("0.{}{}", "0".repeat((-exp - 1) as usize), digits)
    }
}

/// Canonical text form: node blocks, then parents lines, then one cpt block per node.
pub fn serialize_network(net: &BeliefNetwork) -> String {
    let mut out = format!("network {}\n", net.name());
    for node in net.nodes() {
        out.push_str(&format!("node {} {{ outcomes: {} }}\n", node.name, node.outcomes.join(", ")));
    }
    for node in net.nodes() {
        if !node.parents.is_empty() {
            let names: Vec<&str> = node.parents.iter().map(|&p| net.node(p).name.as_str()).collect();
            out.push_str(&format!("parents {}: {}\n", node.name, names.join(", ")));
        }
    }
    for node in net.nodes() {
        out.push_str(&format!("cpt {}:\n", node.name));
        for row in &node.cpt.rows {
            let cells: Vec<String> = row.iter().map(|&p| format_probability(p)).collect();
            out.push_str("  ");
            out.push_str(&cells.join(" "));
            out.push('\n');
        }
    }
    out
}

/// Parses `Name=outcome(,Name=outcome)*`; blank input is empty evidence.
pub fn parse_evidence(spec: &str, net: &BeliefNetwork) -> Result<Evidence> {
    if spec.trim().is_empty() {
        return Ok(Evidence::empty());
    }
    let mut pairs = Vec::new();
    for item in spec.split(',') {
        let (name, label) = item
            .split_once('=')
            .ok_or_else(|| Error::Evidence(format!("expected Name=outcome, found '{}'", item.trim())))?;
        let (name, label) = (name.trim(), label.trim());
        let node = net
            .node_index(name)
            .ok_or_else(|| Error::Evidence(format!("unknown node '{name}'")))?;
        let value = net
            .node(node)
            .outcome_index(label)
            .ok_or_else(|| Error::Evidence(format!("unknown outcome '{label}' for node '{name}'")))?;
        if pairs.iter().any(|&(n, _)| n == node) {
            return Err(Error::Evidence(format!("duplicate node '{name}'")));
        }
        pairs.push((node, value));
    }
    Evidence::new(net, pairs)
}

const BUILTIN_SOURCES: &[(&str, &str)] = &[
    ("AB", include_str!("../networks/ab.bn")),
    ("PATH2", include_str!("../networks/path2.bn")),
    ("CHAIN5", include_str!("../networks/chain5.bn")),
    ("MINIALARM", include_str!("../networks/minialarm.bn")),
];

pub fn builtin_names() -> impl Iterator<Item = &'static str> {
    BUILTIN_SOURCES.iter().map(|(n, _)| *n)
}

pub fn builtin_source(name: &str) -> Option<&'static str> {
    BUILTIN_SOURCES.iter().find(|(n, _)| *n == name).map(|(_, s)| *s)
}

pub fn builtin_network(name: &str) -> Option<BeliefNetwork> {
    builtin_source(name).map(|s| parse_network(s).expect("bundled network parses"))
}

/// All bundled networks, in catalog order.
pub fn builtin_networks() -> Vec<(&'static str, BeliefNetwork)> {
    BUILTIN_SOURCES
        .iter()
        .map(|(n, s)| (*n, parse_network(s).expect("bundled network parses")))
        .collect()
}
