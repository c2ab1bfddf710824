use std::collections::VecDeque;

use fixedbitset::FixedBitSet;

use super::{LandmarkError, LandmarkGraph, OrderingKind};
use crate::ground::{relaxed_reachable, ActionId, AtomId, GroundProblem};

/// Atoms reachable from the initial state without any action that adds `atom`.
fn reachable_without(gp: &GroundProblem, atom: AtomId) -> FixedBitSet {
    let adders = gp.achievers(atom);
    relaxed_reachable(gp, gp.init(), &|a: ActionId| adders.contains(&a))
}

/// Achievers of `atom` whose preconditions are reachable before `atom` is.
fn first_achievers(gp: &GroundProblem, atom: AtomId, without: &FixedBitSet) -> Vec<ActionId> {
    gp.achievers(atom)
        .iter()
        .copied()
        .filter(|&a| gp.action(a).pre.iter().all(|p| without.contains(p.index())))
        .collect()
}

/// Landmark graph with greedy-necessary and natural orderings.
///
/// Nodes are the goal atoms, every atom true initially, and every atom in
/// the shared preconditions of the first achievers of a node. Each shared
/// precondition `p` of node `l` yields `p →gn l`. Natural orders `l′ →n l`
/// are added between nodes when `l` is relaxed-unreachable without the
/// achievers of `l′` and no single action adds both.
pub fn extract_landmarks(gp: &GroundProblem) -> Result<LandmarkGraph, LandmarkError> {
    let everything = relaxed_reachable(gp, gp.init(), &|_| false);
    for &g in gp.goal() {
        if !everything.contains(g.index()) {
            return Err(LandmarkError::RelaxedUnreachableGoal { atom: gp.atom_text(g) });
        }
    }

    let mut graph = LandmarkGraph::default();
    let mut queue: VecDeque<usize> = VecDeque::new();
    for &g in gp.goal() {
        if graph.node_of(g).is_none() {
            queue.push_back(graph.add_node(gp, g, Vec::new()));
        }
    }
    for a in gp.init().atoms() {
        graph.add_node(gp, a, Vec::new());
    }

    let mut gn_edges: Vec<(usize, usize)> = Vec::new();
    while let Some(n) = queue.pop_front() {
        let atom = graph.nodes[n].atom;
        if graph.nodes[n].initial {
            continue;
        }
        let without = reachable_without(gp, atom);
        let achievers = first_achievers(gp, atom, &without);
        let mut shared: Vec<AtomId> = match achievers.first() {
            Some(&a) => gp.action(a).pre.clone(),
            None => Vec::new(),
        };
        for &a in achievers.iter().skip(1) {
            let pre = &gp.action(a).pre;
            shared.retain(|p| pre.contains(p));
        }
        graph.set_first_achievers(n, achievers);
        for p in shared {
            let known = graph.node_of(p).is_some();
            let pn = graph.add_node(gp, p, Vec::new());
            if !known {
                queue.push_back(pn);
            }
            gn_edges.push((pn, n));
        }
    }
    for (from, to) in gn_edges {
        graph.add_edge(from, to, OrderingKind::GreedyNecessary);
    }

    let n_nodes = graph.nodes.len();
    for from in 0..n_nodes {
        if graph.nodes[from].initial {
            continue;
        }
        let from_atom = graph.nodes[from].atom;
        let without = reachable_without(gp, from_atom);
        for to in 0..n_nodes {
            let to_atom = graph.nodes[to].atom;
            if to == from || without.contains(to_atom.index()) {
                continue;
            }
            let shares_adder = gp
                .achievers(to_atom)
                .iter()
                .any(|a| gp.achievers(from_atom).contains(a));
            if !shares_adder {
                graph.add_edge(from, to, OrderingKind::Natural);
            }
        }
    }
    Ok(graph)
}
