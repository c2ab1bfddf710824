#![allow(dead_code)]

use std::collections::{HashMap, HashSet, VecDeque};
use std::sync::Arc;

use htnlearn::gen::{blocks_domain, gen_blocks, gen_logistics, logistics_domain, LogisticsParams};
use htnlearn::{ActionId, GroundProblem, State};

pub fn blocks(n: usize, moves: usize, seed: u64) -> GroundProblem {
    let dom = Arc::new(blocks_domain());
    let p = gen_blocks(n, moves, seed, &dom);
    GroundProblem::new(dom, Arc::new(p))
}

pub fn logistics(cities: usize, locs: usize, seed: u64) -> GroundProblem {
    let dom = Arc::new(logistics_domain());
    let params = LogisticsParams {
        cities,
        locs_per_city: locs,
        ..LogisticsParams::default()
    };
    let p = gen_logistics(params, seed, &dom);
    GroundProblem::new(dom, Arc::new(p))
}

/// Shortest plan by breadth-first search over explicit states.
pub fn bfs_plan(gp: &GroundProblem, limit: usize) -> Option<Vec<ActionId>> {
    let start = gp.init().clone();
    let mut parent: HashMap<State, Option<(State, ActionId)>> = HashMap::new();
    parent.insert(start.clone(), None);
    let mut queue = VecDeque::from([start]);
    while let Some(s) = queue.pop_front() {
        if s.contains_all(gp.goal()) {
            let mut plan = Vec::new();
            let mut cur = s;
            while let Some(Some((prev, a))) = parent.get(&cur).cloned() {
                plan.push(a);
                cur = prev;
            }
            plan.reverse();
            return Some(plan);
        }
        for a in gp.actions() {
            if !a.pre.iter().all(|&p| s.contains(p)) {
                continue;
            }
            let mut next = s.clone();
            for &d in &a.del {
                next.remove(d);
            }
            for &p in &a.add {
                next.insert(p);
            }
            if !parent.contains_key(&next) {
                if parent.len() >= limit {
                    return None;
                }
                parent.insert(next.clone(), Some((s.clone(), a.id)));
                queue.push_back(next);
            }
        }
    }
    None
}

/// Every state reachable from the initial state, if there are at most `limit`.
pub fn reachable_states(gp: &GroundProblem, limit: usize) -> Option<Vec<State>> {
    let mut seen: HashSet<State> = HashSet::from([gp.init().clone()]);
    let mut order = vec![gp.init().clone()];
    let mut i = 0;
    while i < order.len() {
        let s = order[i].clone();
        i += 1;
        for a in gp.actions() {
            if let Some(n) = gp.successor(&s, a.id) {
                if seen.insert(n.clone()) {
                    if seen.len() > limit {
                        return None;
                    }
                    order.push(n);
                }
            }
        }
    }
    Some(order)
}
