//! Single-atom landmarks and their ordering graph.
//!
//! Landmarks are found by backchaining from the goals through the shared
//! preconditions of first achievers. Orderings carry one of four labels;
//! only the strongest proven label is stored per node pair.

mod extract;
mod mutex;
mod oracle;
mod reasonable;

use std::collections::{BTreeMap, HashMap};
use std::fmt::{self, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ground::{ActionId, AtomId, GroundProblem};

pub use extract::extract_landmarks;
pub use mutex::MutexTable;
pub use oracle::{brute_force_landmark_oracle, count_reachable_states, OracleVerdict};
pub use reasonable::{add_reasonable_orders, ReasonableMode};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LandmarkError {
    #[error("goal atom {atom} is unreachable even under delete relaxation")]
    RelaxedUnreachableGoal { atom: String },
    #[error("landmark graph has a cycle among {0:?}")]
    Cycle(Vec<String>),
    #[error("state budget of {limit} exceeded")]
    BudgetExceeded { limit: usize },
    #[error("unknown landmark atom `{0}`")]
    UnknownAtom(String),
}

/// Ordered from weakest to strongest.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum OrderingKind {
    #[serde(rename = "r")]
    Reasonable,
    #[serde(rename = "n")]
    Natural,
    #[serde(rename = "nec")]
    Necessary,
    #[serde(rename = "gn")]
    GreedyNecessary,
}

impl OrderingKind {
    pub fn label(self) -> &'static str {
        match self {
            OrderingKind::Reasonable => "r",
            OrderingKind::Natural => "n",
            OrderingKind::Necessary => "nec",
            OrderingKind::GreedyNecessary => "gn",
        }
    }

    /// Natural, necessary and greedy-necessary orders must stay acyclic.
    pub fn is_strict(self) -> bool {
        self != OrderingKind::Reasonable
    }
}

impl fmt::Display for OrderingKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for OrderingKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "r" => Ok(OrderingKind::Reasonable),
            "n" => Ok(OrderingKind::Natural),
            "nec" => Ok(OrderingKind::Necessary),
            "gn" => Ok(OrderingKind::GreedyNecessary),
            other => Err(format!("unknown ordering label `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LandmarkNode {
    pub atom: AtomId,
    /// Printed atom, e.g. `(clear C)`.
    pub text: String,
    pub initial: bool,
    pub goal: bool,
    /// Additive relaxed cost of the atom from the initial state.
    pub cost: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LandmarkEdge {
    pub from: usize,
    pub to: usize,
    pub kind: OrderingKind,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LandmarkGraph {
    pub nodes: Vec<LandmarkNode>,
    edges: BTreeMap<(usize, usize), OrderingKind>,
    index: HashMap<AtomId, usize>,
    /// First achievers per node; empty for nodes true initially.
    first_achievers: Vec<Vec<ActionId>>,
}

impl LandmarkGraph {
    pub(crate) fn add_node(&mut self, gp: &GroundProblem, atom: AtomId, first_achievers: Vec<ActionId>) -> usize {
        if let Some(&i) = self.index.get(&atom) {
            return i;
        }
        let i = self.nodes.len();
        self.nodes.push(LandmarkNode {
            atom,
            text: gp.atom_text(atom),
            initial: gp.init().contains(atom),
            goal: gp.goal().contains(&atom),
            cost: crate::search::h_add(gp, gp.init(), &[atom]),
        });
        self.index.insert(atom, i);
        self.first_achievers.push(first_achievers);
        i
    }

    pub fn node_of(&self, atom: AtomId) -> Option<usize> {
        self.index.get(&atom).copied()
    }

    pub fn first_achievers(&self, node: usize) -> &[ActionId] {
        &self.first_achievers[node]
    }

    pub(crate) fn set_first_achievers(&mut self, node: usize, achievers: Vec<ActionId>) {
        self.first_achievers[node] = achievers;
    }

    pub fn edges(&self) -> impl Iterator<Item = LandmarkEdge> + '_ {
        self.edges
            .iter()
            .map(|(&(from, to), &kind)| LandmarkEdge { from, to, kind })
    }

    pub fn edge(&self, from: usize, to: usize) -> Option<OrderingKind> {
        self.edges.get(&(from, to)).copied()
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn parents(&self, node: usize) -> impl Iterator<Item = (usize, OrderingKind)> + '_ {
        self.edges
            .iter()
            .filter(move |((_, t), _)| *t == node)
            .map(|(&(f, _), &k)| (f, k))
    }

    pub fn children(&self, node: usize) -> impl Iterator<Item = (usize, OrderingKind)> + '_ {
        self.edges
            .range((node, 0)..(node + 1, 0))
            .map(|(&(_, t), &k)| (t, k))
    }

    fn reaches(&self, from: usize, to: usize) -> bool {
        let mut stack = vec![from];
        let mut seen = vec![false; self.nodes.len()];
        while let Some(n) = stack.pop() {
            if n == to {
                return true;
            }
            if std::mem::replace(&mut seen[n], true) || self.nodes[n].initial {
                continue;
            }
            stack.extend(self.children(n).map(|(c, _)| c));
        }
        false
    }

    /// Inserts or strengthens `from → to`. Returns false (and logs) when the
    /// edge would close a cycle. Orders out of a node true in s0 already hold
    /// at the start, so cycles through them are allowed.
    pub fn add_edge(&mut self, from: usize, to: usize, kind: OrderingKind) -> bool {
        if from == to {
            return false;
        }
        if let Some(existing) = self.edges.get_mut(&(from, to)) {
            if kind > *existing {
                *existing = kind;
            }
            return true;
        }
        if self.reaches(to, from) {
            log::debug!(
                "dropping {} edge {} -> {}: would create a cycle",
                kind,
                self.nodes[from].text,
                self.nodes[to].text
            );
            return false;
        }
        self.edges.insert((from, to), kind);
        true
    }

    /// Landmark atoms in an order extending the graph. Nodes true initially
    /// are dropped unless they are goals, and their outgoing orders count as
    /// met. Among ready nodes the one with the lowest relaxed cost from the
    /// initial state comes first, then the smallest printed atom.
    pub fn topo_sequence(&self) -> Result<Vec<AtomId>, LandmarkError> {
        let keep: Vec<bool> = self.nodes.iter().map(|n| n.goal || !n.initial).collect();
        let mut indegree = vec![0usize; self.nodes.len()];
        for e in self.edges() {
            if keep[e.from] && keep[e.to] && !self.nodes[e.from].initial {
                indegree[e.to] += 1;
            }
        }
        let rank = |i: usize| (self.nodes[i].cost.unwrap_or(u64::MAX), self.nodes[i].text.as_str(), i);
        let mut ready: std::collections::BTreeSet<(u64, &str, usize)> =
            (0..self.nodes.len()).filter(|&i| keep[i] && indegree[i] == 0).map(rank).collect();
        let mut out = Vec::new();
        while let Some(first) = ready.iter().next().copied() {
            ready.remove(&first);
            let (_, _, n) = first;
            out.push(self.nodes[n].atom);
            if self.nodes[n].initial {
                continue;
            }
            for (c, _) in self.children(n) {
                if !keep[c] {
                    continue;
                }
                indegree[c] -= 1;
                if indegree[c] == 0 {
                    ready.insert(rank(c));
                }
            }
        }
        let kept = keep.iter().filter(|&&k| k).count();
        if out.len() != kept {
            let stuck = self
                .nodes
                .iter()
                .enumerate()
                .filter(|(i, _)| keep[*i] && indegree[*i] > 0)
                .map(|(_, n)| n.text.clone())
                .collect();
            return Err(LandmarkError::Cycle(stuck));
        }
        Ok(out)
    }

    /// Graphviz rendering: dashed nodes hold initially, filled nodes are goals.
    pub fn to_dot(&self) -> String {
        let mut out = String::from("digraph landmarks {\n  node [shape=ellipse];\n");
        for (i, n) in self.nodes.iter().enumerate() {
            let mut style = Vec::new();
            if n.initial {
                style.push("dashed");
            }
            if n.goal {
                style.push("filled");
            }
            let _ = write!(out, "  n{i} [label=\"{}\"", n.text);
            if !style.is_empty() {
                let _ = write!(out, ", style=\"{}\"", style.join(","));
            }
            out.push_str("];\n");
        }
        for e in self.edges() {
            let _ = writeln!(out, "  n{} -> n{} [label=\"{}\"];", e.from, e.to, e.kind);
        }
        out.push_str("}\n");
        out
    }

    pub fn to_json(&self) -> GraphJson {
        GraphJson {
            nodes: self
                .nodes
                .iter()
                .enumerate()
                .map(|(id, n)| NodeJson {
                    id,
                    atom: n.text.clone(),
                    initial: n.initial,
                    goal: n.goal,
                })
                .collect(),
            edges: self
                .edges()
                .map(|e| EdgeJson {
                    from: e.from,
                    to: e.to,
                    kind: e.kind,
                })
                .collect(),
        }
    }

    /// Rebuilds a graph from its JSON form against the same grounding.
    /// First-achiever data is not part of the JSON and stays empty.
    pub fn from_json(gp: &GroundProblem, json: &GraphJson) -> Result<Self, LandmarkError> {
        let mut g = LandmarkGraph::default();
        let mut ids = HashMap::new();
        for n in &json.nodes {
            let atom = gp
                .parse_atom(&n.atom)
                .map_err(|_| LandmarkError::UnknownAtom(n.atom.clone()))?;
            ids.insert(n.id, g.add_node(gp, atom, Vec::new()));
        }
        for e in &json.edges {
            let (Some(&f), Some(&t)) = (ids.get(&e.from), ids.get(&e.to)) else {
                return Err(LandmarkError::UnknownAtom(format!("node {} or {}", e.from, e.to)));
            };
            if !g.add_edge(f, t, e.kind) {
                return Err(LandmarkError::Cycle(vec![
                    g.nodes[f].text.clone(),
                    g.nodes[t].text.clone(),
                ]));
            }
        }
        Ok(g)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphJson {
    pub nodes: Vec<NodeJson>,
    pub edges: Vec<EdgeJson>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeJson {
    pub id: usize,
    pub atom: String,
    pub initial: bool,
    pub goal: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EdgeJson {
    pub from: usize,
    pub to: usize,
    pub kind: OrderingKind,
}

/// Extraction followed by reasonable orders in the given mode.
pub fn landmark_graph(gp: &GroundProblem, mode: ReasonableMode) -> Result<LandmarkGraph, LandmarkError> {
    let g = extract_landmarks(gp)?;
    Ok(add_reasonable_orders(g, gp, mode))
}
