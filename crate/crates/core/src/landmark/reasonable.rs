use std::collections::BTreeSet;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{LandmarkGraph, MutexTable, OrderingKind};
use crate::ground::{AtomId, GroundProblem};

/// Which interference tests back a reasonable order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReasonableMode {
    /// Mutexes, shared effects, gn-predecessors and deletes.
    #[default]
    Full,
    /// Only "every first achiever deletes it".
    DeletesOnly,
    Off,
}

impl FromStr for ReasonableMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "full" => Ok(ReasonableMode::Full),
            "deletes-only" | "deletes" => Ok(ReasonableMode::DeletesOnly),
            "off" | "none" => Ok(ReasonableMode::Off),
            other => Err(format!("unknown reasonable-order mode `{other}`")),
        }
    }
}

struct Interference<'a> {
    gp: &'a GroundProblem,
    g: &'a LandmarkGraph,
    mutex: Option<MutexTable>,
}

impl Interference<'_> {
    fn achievers(&self, node: usize) -> Vec<crate::ground::ActionId> {
        let first = self.g.first_achievers(node);
        if first.is_empty() {
            self.gp.achievers(self.g.nodes[node].atom).to_vec()
        } else {
            first.to_vec()
        }
    }

    fn is_mutex(&self, p: AtomId, q: AtomId) -> bool {
        self.mutex.as_ref().is_some_and(|m| m.mutex(p, q))
    }

    /// Achieving `a` makes `b` false, so `b` has to come after `a`.
    fn interferes(&self, a: usize, b: usize) -> bool {
        let (pa, pb) = (self.g.nodes[a].atom, self.g.nodes[b].atom);
        let achievers = self.achievers(a);
        if achievers.is_empty() {
            return false;
        }
        if achievers.iter().all(|&x| self.gp.action(x).del.contains(&pb)) {
            return true;
        }
        if self.mutex.is_none() {
            return false;
        }
        if self.is_mutex(pa, pb) {
            return true;
        }
        let mut shared: Vec<AtomId> = self.gp.action(achievers[0]).add.clone();
        for &x in &achievers[1..] {
            let add = &self.gp.action(x).add;
            shared.retain(|p| add.contains(p));
        }
        if shared.iter().any(|&x| x != pa && self.is_mutex(x, pb)) {
            return true;
        }
        self.g
            .parents(a)
            .any(|(x, k)| k == OrderingKind::GreedyNecessary && self.is_mutex(self.g.nodes[x].atom, pb))
    }
}

fn ancestors(g: &LandmarkGraph, node: usize, out: &mut BTreeSet<usize>) {
    let mut stack = vec![node];
    while let Some(n) = stack.pop() {
        for (p, k) in g.parents(n) {
            if k >= OrderingKind::Natural && out.insert(p) {
                stack.push(p);
            }
        }
    }
}

/// Adds approximate reasonable orders `q →r p`, where achieving `q` after
/// `p` would destroy `p` while `p` is still needed. For a goal `p` every other
/// landmark is a candidate; otherwise the candidates are the co-parents (and
/// their ancestors) of the nodes `p` is greedy-necessary for. Candidate edges
/// that would close a cycle are dropped.
pub fn add_reasonable_orders(mut g: LandmarkGraph, gp: &GroundProblem, mode: ReasonableMode) -> LandmarkGraph {
    if mode == ReasonableMode::Off || g.nodes.len() < 2 {
        return g;
    }
    let mutex = (mode == ReasonableMode::Full).then(|| MutexTable::compute(gp));
    let pruned = |g: &LandmarkGraph, n: usize| g.nodes[n].initial && !g.nodes[n].goal;
    let mut candidates = Vec::new();
    {
        let test = Interference { gp, g: &g, mutex };
        for p in 0..g.nodes.len() {
            if pruned(&g, p) {
                continue;
            }
            let interesting: BTreeSet<usize> = if g.nodes[p].goal {
                (0..g.nodes.len()).collect()
            } else {
                let mut set = BTreeSet::new();
                for (c, k) in g.children(p) {
                    if k < OrderingKind::GreedyNecessary {
                        continue;
                    }
                    for (par, k2) in g.parents(c) {
                        if par != p && k2 >= OrderingKind::Natural && set.insert(par) {
                            ancestors(&g, par, &mut set);
                        }
                    }
                }
                set
            };
            for q in interesting {
                // an atom true in s0 is only reached again after it was lost,
                // which is the order being decided here
                if q == p || g.nodes[q].initial {
                    continue;
                }
                if test.interferes(q, p) {
                    candidates.push((q, p));
                }
            }
        }
    }
    for (q, p) in candidates {
        g.add_edge(q, p, OrderingKind::Reasonable);
    }
    g
}
