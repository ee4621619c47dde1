//! Belief-network data model: nodes with conditional probability tables over
//! a directed acyclic graph, evidence, and full joint states.
//!
//! Outcomes are referenced by index everywhere below; labels only matter at
//! the I/O boundary. CPT rows enumerate parent configurations with the last
//! declared parent varying fastest.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::error::{Error, Result};

/// Maximum deviation of a CPT row sum from 1 accepted on construction.
pub const ROW_TOLERANCE: f64 = 1e-9;

/// Conditional probability table, one probability vector per parent configuration.
#[derive(Clone, Debug, PartialEq)]
pub struct Cpt {
    pub rows: Vec<Vec<f64>>,
}

impl Cpt {
    pub fn new(rows: Vec<Vec<f64>>) -> Self {
        Cpt { rows }
    }

    /// True iff every entry lies strictly inside (0, 1).
    pub fn is_positive(&self) -> bool {
        self.rows.iter().flatten().all(|&p| p > 0.0 && p < 1.0)
    }

    pub fn min_entry(&self) -> f64 {
        self.rows.iter().flatten().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_entry(&self) -> f64 {
        self.rows.iter().flatten().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Node {
    pub name: String,
    pub outcomes: Vec<String>,
    /// Indices into the owning network's node list, in declaration order.
    pub parents: Vec<usize>,
    pub cpt: Cpt,
}

impl Node {
    pub fn new(
        name: impl Into<String>,
        outcomes: &[&str],
        parents: Vec<usize>,
        rows: Vec<Vec<f64>>,
    ) -> Self {
        Node {
            name: name.into(),
            outcomes: outcomes.iter().map(|s| s.to_string()).collect(),
            parents,
            cpt: Cpt::new(rows),
        }
    }

    pub fn arity(&self) -> usize {
        self.outcomes.len()
    }

    pub fn outcome_index(&self, label: &str) -> Option<usize> {
        self.outcomes.iter().position(|o| o == label)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Issue {
    DuplicateNode(String),
    TooFewOutcomes { node: String },
    DuplicateOutcome { node: String, outcome: String },
    UnknownParent { node: String, parent: usize },
    DuplicateParent { node: String, parent: String },
    Cycle { nodes: Vec<String> },
    RowCount { node: String, expected: usize, found: usize },
    RowWidth { node: String, row: usize, expected: usize, found: usize },
    EntryRange { node: String, row: usize, value: f64 },
    RowSum { node: String, row: usize, sum: f64 },
}

impl fmt::Display for Issue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Issue::DuplicateNode(n) => write!(f, "node '{n}' declared more than once"),
            Issue::TooFewOutcomes { node } => write!(f, "node '{node}' needs at least 2 outcomes"),
            Issue::DuplicateOutcome { node, outcome } => {
                write!(f, "node '{node}' repeats outcome '{outcome}'")
            }
            Issue::UnknownParent { node, parent } => {
                write!(f, "node '{node}' references unknown parent #{parent}")
            }
            Issue::DuplicateParent { node, parent } => {
                write!(f, "node '{node}' lists parent '{parent}' twice")
            }
            Issue::Cycle { nodes } => write!(f, "cycle through {}", nodes.join(", ")),
            Issue::RowCount { node, expected, found } => {
                write!(f, "cpt of '{node}' has {found} rows, expected {expected}")
            }
            Issue::RowWidth { node, row, expected, found } => write!(
                f,
                "cpt of '{node}' row {row} has {found} entries, expected {expected}"
            ),
            Issue::EntryRange { node, row, value } => {
                write!(f, "cpt of '{node}' row {row} has entry {value} outside [0, 1]")
            }
            Issue::RowSum { node, row, sum } => {
                write!(f, "cpt of '{node}' row {row} sums to {sum}, not 1")
            }
        }
    }
}

/// Outcome of structural and numeric checks on a set of nodes.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ValidationReport {
    pub issues: Vec<Issue>,
    /// Every CPT entry strictly inside (0, 1).
    pub positive: bool,
    /// (node, row) pairs holding a 0 or 1 entry.
    pub deterministic_rows: Vec<(String, usize)>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.issues.is_empty()
    }

    pub fn is_acyclic(&self) -> bool {
        !self.issues.iter().any(|i| matches!(i, Issue::Cycle { .. }))
    }

    pub fn is_normalized(&self) -> bool {
        !self
            .issues
            .iter()
            .any(|i| matches!(i, Issue::RowSum { .. } | Issue::EntryRange { .. }))
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.issues.is_empty() {
            return write!(f, "ok");
        }
        let msgs: Vec<String> = self.issues.iter().map(|i| i.to_string()).collect();
        write!(f, "{}", msgs.join("; "))
    }
}

/// Checks a node list: names, outcomes, parent references, acyclicity, CPT shape,
/// row normalization and positivity.
pub fn validate_nodes(nodes: &[Node]) -> ValidationReport {
    let mut issues = Vec::new();
    let mut deterministic_rows = Vec::new();

    let mut seen = BTreeSet::new();
    for node in nodes {
        if !seen.insert(node.name.as_str()) {
            issues.push(Issue::DuplicateNode(node.name.clone()));
        }
        if node.outcomes.len() < 2 {
            issues.push(Issue::TooFewOutcomes { node: node.name.clone() });
        }
        let mut labels = BTreeSet::new();
        for o in &node.outcomes {
            if !labels.insert(o.as_str()) {
                issues.push(Issue::DuplicateOutcome {
                    node: node.name.clone(),
                    outcome: o.clone(),
                });
            }
        }
        let mut parents_seen = BTreeSet::new();
        for &p in &node.parents {
            if p >= nodes.len() {
                issues.push(Issue::UnknownParent { node: node.name.clone(), parent: p });
            } else if !parents_seen.insert(p) {
                issues.push(Issue::DuplicateParent {
                    node: node.name.clone(),
                    parent: nodes[p].name.clone(),
                });
            }
        }
    }
    let structural_ok = issues.is_empty();

    if structural_ok {
        if let Err(stuck) = kahn_order(nodes) {
            issues.push(Issue::Cycle {
                nodes: stuck.iter().map(|&i| nodes[i].name.clone()).collect(),
            });
        }
    }

    for node in nodes {
        if structural_ok {
            let expected: usize = node.parents.iter().map(|&p| nodes[p].arity()).product();
            if node.cpt.rows.len() != expected {
                issues.push(Issue::RowCount {
                    node: node.name.clone(),
                    expected,
                    found: node.cpt.rows.len(),
                });
            }
        }
        for (r, row) in node.cpt.rows.iter().enumerate() {
            if row.len() != node.arity() {
                issues.push(Issue::RowWidth {
                    node: node.name.clone(),
                    row: r,
                    expected: node.arity(),
                    found: row.len(),
                });
                continue;
            }
            if let Some(&bad) = row.iter().find(|p| !(0.0..=1.0).contains(*p)) {
                issues.push(Issue::EntryRange { node: node.name.clone(), row: r, value: bad });
                continue;
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > ROW_TOLERANCE {
                issues.push(Issue::RowSum { node: node.name.clone(), row: r, sum });
            }
            if row.iter().any(|&p| p == 0.0 || p == 1.0) {
                deterministic_rows.push((node.name.clone(), r));
            }
        }
    }

    ValidationReport {
        positive: deterministic_rows.is_empty() && issues.is_empty(),
        issues,
        deterministic_rows,
    }
}

/// Kahn's algorithm, always releasing the lowest declared index first.
/// On a cycle, returns the nodes that could not be ordered.
fn kahn_order(nodes: &[Node]) -> std::result::Result<Vec<usize>, Vec<usize>> {
    let n = nodes.len();
    let mut indegree: Vec<usize> = nodes.iter().map(|node| node.parents.len()).collect();
    let mut children = vec![Vec::new(); n];
    for (i, node) in nodes.iter().enumerate() {
        for &p in &node.parents {
            children[p].push(i);
        }
    }
    let mut ready: BTreeSet<usize> = (0..n).filter(|&i| indegree[i] == 0).collect();
    let mut order = Vec::with_capacity(n);
    while let Some(i) = ready.pop_first() {
        order.push(i);
        for &c in &children[i] {
            indegree[c] -= 1;
            if indegree[c] == 0 {
                ready.insert(c);
            }
        }
    }
    if order.len() == n {
        Ok(order)
    } else {
        Err((0..n).filter(|&i| indegree[i] > 0).collect())
    }
}

/// Topological order of a node list; ties go to declaration order.
pub fn topological_order(nodes: &[Node]) -> Result<Vec<usize>> {
    kahn_order(nodes).map_err(|stuck| {
        Error::InvalidNetwork(ValidationReport {
            issues: vec![Issue::Cycle {
                nodes: stuck.iter().map(|&i| nodes[i].name.clone()).collect(),
            }],
            positive: false,
            deterministic_rows: Vec::new(),
        })
    })
}

/// Pulls a row within tolerance back to an exact sum of 1 by letting its
/// largest entry absorb the residual. Applying it twice is a no-op.
fn normalize_row(row: &mut [f64]) {
    let sum: f64 = row.iter().sum();
    if sum == 1.0 {
        return;
    }
    let (imax, _) = row
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |acc, (i, &p)| if p > acc.1 { (i, p) } else { acc });
    let rest: f64 = row
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != imax)
        .map(|(_, &p)| p)
        .sum();
    row[imax] = (1.0 - rest).max(0.0);
}

/// A validated, immutable belief network.
#[derive(Clone, Debug)]
pub struct BeliefNetwork {
    name: String,
    nodes: Vec<Node>,
    children: Vec<Vec<usize>>,
    /// Per node: row stride of each parent, aligned with `Node::parents`.
    strides: Vec<Vec<usize>>,
    /// Per node: (child, stride of this node within the child's CPT rows).
    child_links: Vec<Vec<(usize, usize)>>,
    /// Flattened CPT, row-major.
    tables: Vec<Vec<f64>>,
    order: Vec<usize>,
    positive: bool,
}

impl PartialEq for BeliefNetwork {
    fn eq(&self, other: &Self) -> bool {
        self.name == other.name && self.nodes == other.nodes
    }
}

impl BeliefNetwork {
    pub fn new(name: impl Into<String>, mut nodes: Vec<Node>) -> Result<Self> {
        let report = validate_nodes(&nodes);
        if !report.is_valid() {
            return Err(Error::InvalidNetwork(report));
        }
        for node in &mut nodes {
            for row in &mut node.cpt.rows {
                normalize_row(row);
            }
        }

        let n = nodes.len();
        let mut children = vec![Vec::new(); n];
        for (i, node) in nodes.iter().enumerate() {
            for &p in &node.parents {
                children[p].push(i);
            }
        }
        let strides: Vec<Vec<usize>> = nodes
            .iter()
            .map(|node| {
                let mut s = vec![0; node.parents.len()];
                let mut acc = 1;
                for k in (0..node.parents.len()).rev() {
                    s[k] = acc;
                    acc *= nodes[node.parents[k]].arity();
                }
                s
            })
            .collect();
        let mut child_links = vec![Vec::new(); n];
        for (c, node) in nodes.iter().enumerate() {
            for (k, &p) in node.parents.iter().enumerate() {
                child_links[p].push((c, strides[c][k]));
            }
        }
        let tables = nodes
            .iter()
            .map(|node| node.cpt.rows.iter().flatten().copied().collect())
            .collect();
        let order = kahn_order(&nodes).expect("validated acyclic");

        Ok(BeliefNetwork {
            name: name.into(),
            positive: report.positive,
            nodes,
            children,
            strides,
            child_links,
            tables,
            order,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn node(&self, i: usize) -> &Node {
        &self.nodes[i]
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn arity(&self, i: usize) -> usize {
        self.nodes[i].arity()
    }

    pub fn node_index(&self, name: &str) -> Option<usize> {
        self.nodes.iter().position(|n| n.name == name)
    }

    pub fn children(&self, i: usize) -> &[usize] {
        &self.children[i]
    }

    pub fn child_links(&self, i: usize) -> &[(usize, usize)] {
        &self.child_links[i]
    }

    pub fn table(&self, i: usize) -> &[f64] {
        &self.tables[i]
    }

    /// Every CPT entry strictly inside (0, 1).
    pub fn is_positive(&self) -> bool {
        self.positive
    }

    pub fn topological_order(&self) -> &[usize] {
        &self.order
    }

    /// CPT row selected by the parents' values in `state`.
    pub fn row_index(&self, i: usize, state: &JointState) -> usize {
        self.nodes[i]
            .parents
            .iter()
            .zip(&self.strides[i])
            .map(|(&p, &s)| state.0[p] * s)
            .sum()
    }

    /// P(node = value | parents as assigned in `state`).
    pub fn conditional_probability(&self, i: usize, value: usize, state: &JointState) -> f64 {
        self.tables[i][self.row_index(i, state) * self.arity(i) + value]
    }

    /// Product of every node's conditional probability under `state`.
    pub fn joint_probability(&self, state: &JointState) -> f64 {
        (0..self.len())
            .map(|i| self.conditional_probability(i, state.0[i], state))
            .product()
    }

    /// Parents, children and co-parents of children, excluding the node itself.
    pub fn markov_blanket(&self, i: usize) -> BTreeSet<usize> {
        let mut blanket: BTreeSet<usize> = self.nodes[i].parents.iter().copied().collect();
        for &c in &self.children[i] {
            blanket.insert(c);
            blanket.extend(self.nodes[c].parents.iter().copied());
        }
        blanket.remove(&i);
        blanket
    }

    /// Nodes not clamped by `ev`, in declaration order.
    pub fn free_nodes(&self, ev: &Evidence) -> Vec<usize> {
        (0..self.len()).filter(|i| !ev.contains(*i)).collect()
    }
}

/// Re-runs the full node checks on an already constructed network.
pub fn validate_network(net: &BeliefNetwork) -> ValidationReport {
    validate_nodes(net.nodes())
}

/// Observed nodes clamped to outcome indices.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Evidence {
    assignments: BTreeMap<usize, usize>,
}

impl Evidence {
    pub fn empty() -> Self {
        Evidence::default()
    }

    pub fn new(
        net: &BeliefNetwork,
        pairs: impl IntoIterator<Item = (usize, usize)>,
    ) -> Result<Self> {
        let mut assignments = BTreeMap::new();
        for (node, value) in pairs {
            if node >= net.len() {
                return Err(Error::Evidence(format!("unknown node #{node}")));
            }
            if value >= net.arity(node) {
                return Err(Error::Evidence(format!(
                    "outcome #{value} out of range for '{}'",
                    net.node(node).name
                )));
            }
            if assignments.insert(node, value).is_some() {
                return Err(Error::Evidence(format!(
                    "node '{}' assigned twice",
                    net.node(node).name
                )));
            }
        }
        Ok(Evidence { assignments })
    }

    pub fn get(&self, node: usize) -> Option<usize> {
        self.assignments.get(&node).copied()
    }

    pub fn contains(&self, node: usize) -> bool {
        self.assignments.contains_key(&node)
    }

    pub fn len(&self) -> usize {
        self.assignments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assignments.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.assignments.iter().map(|(&k, &v)| (k, v))
    }

    /// `Name=outcome` pairs joined by commas; empty string for no evidence.
    pub fn describe(&self, net: &BeliefNetwork) -> String {
        self.iter()
            .map(|(n, v)| format!("{}={}", net.node(n).name, net.node(n).outcomes[v]))
            .collect::<Vec<_>>()
            .join(",")
    }
}

/// One outcome index per node.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct JointState(pub Vec<usize>);

impl JointState {
    pub fn new(net: &BeliefNetwork, values: Vec<usize>) -> Result<Self> {
        if values.len() != net.len() {
            return Err(Error::ShapeMismatch(format!(
                "state has {} values for {} nodes",
                values.len(),
                net.len()
            )));
        }
        if let Some(i) = (0..values.len()).find(|&i| values[i] >= net.arity(i)) {
            return Err(Error::ShapeMismatch(format!(
                "value {} out of range for '{}'",
                values[i],
                net.node(i).name
            )));
        }
        Ok(JointState(values))
    }

    /// All zeros, with evidence nodes clamped.
    pub fn clamped(net: &BeliefNetwork, ev: &Evidence) -> Self {
        let mut values = vec![0; net.len()];
        for (n, v) in ev.iter() {
            values[n] = v;
        }
        JointState(values)
    }

    pub fn values(&self) -> &[usize] {
        &self.0
    }

    pub fn get(&self, i: usize) -> usize {
        self.0[i]
    }

    pub fn set(&mut self, i: usize, v: usize) {
        self.0[i] = v;
    }

    pub fn consistent_with(&self, ev: &Evidence) -> bool {
        ev.iter().all(|(n, v)| self.0[n] == v)
    }
}
