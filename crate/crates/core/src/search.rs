//! Forward state-space search with delete-relaxation heuristics.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashMap};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ground::{ActionId, AtomId, GroundProblem, State};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Strategy {
    #[default]
    GreedyBestFirst,
    AStar,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum HeuristicKind {
    #[default]
    HAdd,
    HMax,
}

impl FromStr for Strategy {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "gbfs" | "greedy" | "greedy-best-first" => Ok(Strategy::GreedyBestFirst),
            "astar" | "a-star" | "a*" => Ok(Strategy::AStar),
            other => Err(format!("unknown strategy `{other}`")),
        }
    }
}

impl FromStr for HeuristicKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "hadd" | "h-add" | "add" => Ok(HeuristicKind::HAdd),
            "hmax" | "h-max" | "max" => Ok(HeuristicKind::HMax),
            other => Err(format!("unknown heuristic `{other}`")),
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Strategy::GreedyBestFirst => "greedy-best-first",
            Strategy::AStar => "a-star",
        })
    }
}

impl fmt::Display for HeuristicKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            HeuristicKind::HAdd => "h-add",
            HeuristicKind::HMax => "h-max",
        })
    }
}

/// Ties on the priority are broken first-in first-out.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct SearchConfig {
    pub strategy: Strategy,
    pub heuristic: HeuristicKind,
    pub max_expansions: usize,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            strategy: Strategy::GreedyBestFirst,
            heuristic: HeuristicKind::HAdd,
            max_expansions: 1_000_000,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SearchError {
    #[error("goal is unreachable (search space exhausted after {expansions} expansions)")]
    Unsolvable { expansions: usize },
    #[error("expansion budget of {limit} exhausted")]
    BudgetExceeded { limit: usize },
}

/// Scratch buffers for relaxed cost computation over one grounding.
pub struct RelaxedCosts<'a> {
    gp: &'a GroundProblem,
    cost: Vec<u64>,
    pending: Vec<u32>,
    acc: Vec<u64>,
    heap: BinaryHeap<Reverse<(u64, u32)>>,
}

const UNREACHED: u64 = u64::MAX;

impl<'a> RelaxedCosts<'a> {
    pub fn new(gp: &'a GroundProblem) -> Self {
        RelaxedCosts {
            gp,
            cost: vec![UNREACHED; gp.n_atoms()],
            pending: vec![0; gp.actions().len()],
            acc: vec![0; gp.actions().len()],
            heap: BinaryHeap::new(),
        }
    }

    /// Unit-cost relaxed estimate of reaching `goal` from `s`; `None` means infinity.
    pub fn estimate(&mut self, kind: HeuristicKind, s: &State, goal: &[AtomId]) -> Option<u64> {
        if s.contains_all(goal) {
            return Some(0);
        }
        self.compute(kind, s);
        let mut total = 0u64;
        for g in goal {
            let c = self.cost[g.index()];
            if c == UNREACHED {
                return None;
            }
            total = match kind {
                HeuristicKind::HAdd => total.saturating_add(c),
                HeuristicKind::HMax => total.max(c),
            };
        }
        Some(total)
    }

    /// Generalized Dijkstra over atoms; leaves per-atom costs in `self.cost`.
    fn compute(&mut self, kind: HeuristicKind, s: &State) {
        let gp = self.gp;
        self.cost.fill(UNREACHED);
        self.acc.fill(0);
        self.heap.clear();
        for (i, a) in gp.actions().iter().enumerate() {
            self.pending[i] = a.pre.len() as u32;
        }
        for p in s.atoms() {
            self.cost[p.index()] = 0;
            self.heap.push(Reverse((0, p.0)));
        }
        for a in gp.actions() {
            if a.pre.is_empty() {
                for &p in &a.add {
                    if self.cost[p.index()] > 1 {
                        self.cost[p.index()] = 1;
                        self.heap.push(Reverse((1, p.0)));
                    }
                }
            }
        }
        while let Some(Reverse((c, p))) = self.heap.pop() {
            if c > self.cost[p as usize] {
                continue;
            }
            for &aid in gp.consumers(AtomId(p)) {
                let i = aid.index();
                self.acc[i] = match kind {
                    HeuristicKind::HAdd => self.acc[i].saturating_add(c),
                    HeuristicKind::HMax => self.acc[i].max(c),
                };
                self.pending[i] -= 1;
                if self.pending[i] == 0 {
                    let ac = self.acc[i].saturating_add(1);
                    for &q in &gp.action(aid).add {
                        if ac < self.cost[q.index()] {
                            self.cost[q.index()] = ac;
                            self.heap.push(Reverse((ac, q.0)));
                        }
                    }
                }
            }
        }
    }
}

pub fn h_add(gp: &GroundProblem, s: &State, goal: &[AtomId]) -> Option<u64> {
    RelaxedCosts::new(gp).estimate(HeuristicKind::HAdd, s, goal)
}

pub fn h_max(gp: &GroundProblem, s: &State, goal: &[AtomId]) -> Option<u64> {
    RelaxedCosts::new(gp).estimate(HeuristicKind::HMax, s, goal)
}

struct Node {
    parent: Option<(usize, ActionId)>,
    g: u64,
}

fn extract(nodes: &[Node], mut i: usize) -> Vec<ActionId> {
    let mut plan = Vec::new();
    while let Some((p, a)) = nodes[i].parent {
        plan.push(a);
        i = p;
    }
    plan.reverse();
    plan
}

/// Plan from `s` to a state containing `goal`. The returned plan is empty
/// exactly when `goal ⊆ s`.
pub fn classical_plan(
    gp: &GroundProblem,
    s: &State,
    goal: &[AtomId],
    cfg: &SearchConfig,
) -> Result<Vec<ActionId>, SearchError> {
    assert!(cfg.max_expansions > 0, "max_expansions must be positive");
    if s.contains_all(goal) {
        return Ok(Vec::new());
    }
    let mut heur = RelaxedCosts::new(gp);
    let Some(h0) = heur.estimate(cfg.heuristic, s, goal) else {
        return Err(SearchError::Unsolvable { expansions: 0 });
    };
    let mut nodes: Vec<Node> = vec![Node { parent: None, g: 0 }];
    let mut states: Vec<State> = vec![s.clone()];
    let mut best_g: HashMap<State, usize> = HashMap::new();
    best_g.insert(s.clone(), 0);
    let mut hcache: Vec<u64> = vec![h0];
    // (priority, secondary, insertion counter, node)
    let mut open: BinaryHeap<Reverse<(u64, u64, u64, usize)>> = BinaryHeap::new();
    let mut counter = 0u64;
    let priority = |g: u64, h: u64| match cfg.strategy {
        Strategy::GreedyBestFirst => (h, 0),
        Strategy::AStar => (g + h, h),
    };
    let (p0, q0) = priority(0, h0);
    open.push(Reverse((p0, q0, counter, 0)));
    let mut expansions = 0usize;

    while let Some(Reverse((_, _, _, ni))) = open.pop() {
        let g = nodes[ni].g;
        if best_g.get(&states[ni]).is_some_and(|&b| nodes[b].g < g) {
            continue;
        }
        if states[ni].contains_all(goal) {
            log::debug!("search: plan of length {g} after {expansions} expansions");
            return Ok(extract(&nodes, ni));
        }
        if expansions >= cfg.max_expansions {
            return Err(SearchError::BudgetExceeded {
                limit: cfg.max_expansions,
            });
        }
        expansions += 1;
        for act in gp.actions() {
            let Some(next) = gp.successor(&states[ni], act.id) else {
                continue;
            };
            let ng = g + 1;
            match best_g.get(&next) {
                Some(&b) if nodes[b].g <= ng => continue,
                Some(_) if cfg.strategy == Strategy::GreedyBestFirst => continue,
                _ => {}
            }
            let h = match best_g.get(&next) {
                Some(&b) => hcache[b],
                None => match heur.estimate(cfg.heuristic, &next, goal) {
                    Some(h) => h,
                    None => {
                        // dead end; remember it so it is not evaluated again
                        let idx = nodes.len();
                        nodes.push(Node {
                            parent: Some((ni, act.id)),
                            g: ng,
                        });
                        states.push(next.clone());
                        hcache.push(u64::MAX);
                        best_g.insert(next, idx);
                        continue;
                    }
                },
            };
            let idx = nodes.len();
            nodes.push(Node {
                parent: Some((ni, act.id)),
                g: ng,
            });
            states.push(next.clone());
            hcache.push(h);
            best_g.insert(next, idx);
            counter += 1;
            let (p, q) = priority(ng, h);
            open.push(Reverse((p, q, counter, idx)));
        }
    }
    Err(SearchError::Unsolvable { expansions })
}
