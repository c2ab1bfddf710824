//! Checks against independent, deliberately naive reimplementations.

mod common;

use std::collections::{BTreeSet, HashSet, VecDeque};

use htnlearn::landmark::{
    brute_force_landmark_oracle, landmark_graph, LandmarkGraph, MutexTable, OracleVerdict, OrderingKind,
    ReasonableMode,
};
use htnlearn::pddl::Term;
use htnlearn::search::{classical_plan, h_add, h_max, HeuristicKind, SearchConfig, Strategy};
use htnlearn::{AtomId, GroundProblem, State};

use common::{bfs_plan, blocks, logistics, reachable_states};

fn small_suite() -> Vec<GroundProblem> {
    let mut v = Vec::new();
    for seed in 0..12 {
        v.push(blocks(1 + (seed as usize % 4), 4, seed));
    }
    for seed in 0..6 {
        v.push(logistics(1 + (seed as usize % 2), 2, seed));
    }
    v
}

type TextState = BTreeSet<String>;

fn text_state(gp: &GroundProblem, s: &State) -> TextState {
    s.atoms().map(|a| gp.atom_text(a).to_ascii_lowercase()).collect()
}

/// Applicable actions and successors straight from the schemas.
fn naive_successors(gp: &GroundProblem, s: &TextState) -> BTreeSet<(String, TextState)> {
    let dom = &gp.domain;
    let objects: Vec<(String, htnlearn::Name)> = gp
        .problem
        .all_objects(dom)
        .map(|(n, t)| (n.key().to_string(), t.clone()))
        .collect();
    let mut out = BTreeSet::new();
    for schema in &dom.action_schemas {
        let choices: Vec<Vec<&str>> = schema
            .params
            .iter()
            .map(|p| {
                objects
                    .iter()
                    .filter(|(_, t)| dom.is_subtype(t, &p.ty))
                    .map(|(n, _)| n.as_str())
                    .collect()
            })
            .collect();
        if choices.iter().any(|c| c.is_empty()) {
            continue;
        }
        let mut idx = vec![0usize; choices.len()];
        loop {
            let binding: Vec<&str> = idx.iter().zip(&choices).map(|(&i, c)| c[i]).collect();
            let ground = |a: &htnlearn::pddl::AtomSchema| {
                let mut t = format!("({}", a.predicate.key());
                for arg in &a.args {
                    t.push(' ');
                    match arg {
                        Term::Var(v) => t.push_str(binding[*v]),
                        Term::Const(c) => t.push_str(c.key()),
                    }
                }
                t.push(')');
                t
            };
            if schema.preconditions.iter().all(|p| s.contains(&ground(p))) {
                let mut next = s.clone();
                for d in &schema.del_effects {
                    next.remove(&ground(d));
                }
                for a in &schema.add_effects {
                    next.insert(ground(a));
                }
                let name = format!("(!{} {})", schema.name.key(), binding.join(" "));
                out.insert((name.replace(" )", ")"), next));
            }
            // odometer over parameter choices
            let mut k = choices.len();
            while k > 0 {
                k -= 1;
                idx[k] += 1;
                if idx[k] < choices[k].len() {
                    break;
                }
                idx[k] = 0;
            }
            if idx.iter().all(|&i| i == 0) {
                break;
            }
        }
    }
    out
}

#[test]
fn grounding_matches_schema_semantics() {
    let mut checked = 0;
    for gp in small_suite() {
        let Some(states) = reachable_states(&gp, 3000) else {
            continue;
        };
        for s in states.iter().take(400) {
            let ours: BTreeSet<(String, TextState)> = gp
                .actions()
                .iter()
                .filter_map(|a| {
                    let next = gp.successor(s, a.id)?;
                    Some((gp.action_text(a.id).to_ascii_lowercase(), text_state(&gp, &next)))
                })
                .collect();
            let naive = naive_successors(&gp, &text_state(&gp, s));
            assert_eq!(ours, naive, "{} in {:?}", gp.name(), gp.state_text(s));
        }
        checked += 1;
    }
    assert!(checked >= 10, "only {checked} problems checked");
}

#[test]
fn astar_with_h_max_is_optimal_and_greedy_is_complete() {
    let astar = SearchConfig {
        strategy: Strategy::AStar,
        heuristic: HeuristicKind::HMax,
        max_expansions: 500_000,
    };
    let greedy = SearchConfig::default();
    let mut checked = 0;
    for gp in small_suite() {
        let Some(opt) = bfs_plan(&gp, 200_000) else {
            continue;
        };
        let a = classical_plan(&gp, gp.init(), gp.goal(), &astar).unwrap();
        assert_eq!(a.len(), opt.len(), "{}", gp.name());
        let g = classical_plan(&gp, gp.init(), gp.goal(), &greedy).unwrap();
        assert!(g.len() >= opt.len());
        checked += 1;
    }
    assert!(checked >= 10, "only {checked} problems checked");
}

/// Relaxed costs by repeated sweeps over all actions until nothing changes.
fn naive_relaxed(gp: &GroundProblem, s: &State, goal: &[AtomId], sum: bool) -> Option<u64> {
    let mut cost: Vec<Option<u64>> = (0..gp.n_atoms())
        .map(|i| s.contains(AtomId(i as u32)).then_some(0))
        .collect();
    loop {
        let mut changed = false;
        for a in gp.actions() {
            let pre: Option<Vec<u64>> = a.pre.iter().map(|p| cost[p.index()]).collect();
            let Some(pre) = pre else { continue };
            let c = 1 + if sum { pre.iter().sum() } else { pre.iter().copied().max().unwrap_or(0) };
            for p in &a.add {
                if cost[p.index()].is_none_or(|old| c < old) {
                    cost[p.index()] = Some(c);
                    changed = true;
                }
            }
        }
        if !changed {
            break;
        }
    }
    let g: Option<Vec<u64>> = goal.iter().map(|p| cost[p.index()]).collect();
    let g = g?;
    Some(if sum { g.iter().sum() } else { g.iter().copied().max().unwrap_or(0) })
}

#[test]
fn relaxed_costs_match_fixpoint() {
    for gp in small_suite() {
        let states = reachable_states(&gp, 500).unwrap_or_else(|| vec![gp.init().clone()]);
        for (i, s) in states.iter().enumerate().step_by(7) {
            let mut goals: Vec<Vec<AtomId>> = vec![gp.goal().to_vec()];
            let n = gp.n_atoms();
            goals.push((0..3).map(|k| AtomId(((i * 31 + k * 17) % n) as u32)).collect());
            for goal in goals {
                assert_eq!(h_add(&gp, s, &goal), naive_relaxed(&gp, s, &goal, true), "{}", gp.name());
                assert_eq!(h_max(&gp, s, &goal), naive_relaxed(&gp, s, &goal, false), "{}", gp.name());
            }
        }
    }
}

/// Whether every path from s0 to the goal passes through a state with `p`.
fn is_landmark(gp: &GroundProblem, p: AtomId) -> bool {
    if gp.init().contains(p) {
        return true;
    }
    let mut seen: HashSet<State> = HashSet::from([gp.init().clone()]);
    let mut queue = VecDeque::from([gp.init().clone()]);
    while let Some(s) = queue.pop_front() {
        if s.contains_all(gp.goal()) {
            return false;
        }
        for a in gp.actions() {
            if let Some(n) = gp.successor(&s, a.id) {
                if !n.contains(p) && seen.insert(n.clone()) {
                    queue.push_back(n);
                }
            }
        }
    }
    true
}

fn oracle_sized(gp: &GroundProblem) -> bool {
    reachable_states(gp, 5000).is_some()
}

#[test]
fn every_landmark_is_confirmed() {
    let mut checked = 0;
    for gp in small_suite() {
        if !oracle_sized(&gp) {
            continue;
        }
        let g = landmark_graph(&gp, ReasonableMode::Full).unwrap();
        for n in &g.nodes {
            assert!(is_landmark(&gp, n.atom), "{}: {}", gp.name(), n.text);
            assert_eq!(
                brute_force_landmark_oracle(&gp, n.atom, 64, 100_000).unwrap(),
                OracleVerdict::Landmark
            );
        }
        for &goal in gp.goal() {
            assert!(g.node_of(goal).is_some());
        }
        let seq = g.topo_sequence().unwrap();
        assert!(seq.len() <= g.nodes.len());
        for a in &seq {
            let n = &g.nodes[g.node_of(*a).unwrap()];
            assert!(!n.initial || n.goal, "{} kept", n.text);
        }
        // the library oracle agrees with ours on non-landmarks too
        for i in (0..gp.n_atoms()).step_by(5) {
            let p = AtomId(i as u32);
            let verdict = brute_force_landmark_oracle(&gp, p, 64, 100_000).unwrap();
            assert_eq!(verdict == OracleVerdict::Landmark, is_landmark(&gp, p), "{}", gp.atom_text(p));
        }
        checked += 1;
    }
    assert!(checked >= 10, "only {checked} problems checked");
}

/// Whether `p` holds right before `q` is first made true, on every path.
fn always_before_first(gp: &GroundProblem, p: AtomId, q: AtomId) -> bool {
    if gp.init().contains(q) {
        return true;
    }
    let mut seen: HashSet<State> = HashSet::from([gp.init().clone()]);
    let mut queue = VecDeque::from([gp.init().clone()]);
    while let Some(s) = queue.pop_front() {
        for a in gp.actions() {
            let Some(n) = gp.successor(&s, a.id) else { continue };
            if n.contains(q) {
                if !s.contains(p) {
                    return false;
                }
            } else if seen.insert(n.clone()) {
                queue.push_back(n);
            }
        }
    }
    true
}

fn first_achievers_or_all(gp: &GroundProblem, g: &LandmarkGraph, node: usize) -> Vec<htnlearn::ActionId> {
    let f = g.first_achievers(node);
    if f.is_empty() {
        gp.achievers(g.nodes[node].atom).to_vec()
    } else {
        f.to_vec()
    }
}

#[test]
fn greedy_necessary_orders_hold_and_are_not_understated() {
    let mut checked = 0;
    for gp in small_suite() {
        if !oracle_sized(&gp) {
            continue;
        }
        let g = landmark_graph(&gp, ReasonableMode::Off).unwrap();
        for e in g.edges() {
            let (p, q) = (g.nodes[e.from].atom, g.nodes[e.to].atom);
            match e.kind {
                OrderingKind::GreedyNecessary => {
                    assert!(always_before_first(&gp, p, q), "{} gn {}", g.nodes[e.from].text, g.nodes[e.to].text);
                }
                OrderingKind::Natural => {
                    // a natural edge would be greedy-necessary if every first achiever needed p
                    let fa = g.first_achievers(e.to);
                    assert!(
                        fa.is_empty() || !fa.iter().all(|&a| gp.action(a).pre.contains(&p)),
                        "{} stored as natural",
                        g.nodes[e.from].text
                    );
                }
                _ => {}
            }
        }
        checked += 1;
    }
    assert!(checked >= 10, "only {checked} problems checked");
}

#[test]
fn reasonable_orders_follow_their_tests() {
    for gp in small_suite() {
        let off = landmark_graph(&gp, ReasonableMode::Off).unwrap();
        assert!(off.edges().all(|e| e.kind != OrderingKind::Reasonable));
        let del = landmark_graph(&gp, ReasonableMode::DeletesOnly).unwrap();
        for e in del.edges().filter(|e| e.kind == OrderingKind::Reasonable) {
            let p = del.nodes[e.to].atom;
            let achievers = first_achievers_or_all(&gp, &del, e.from);
            assert!(!achievers.is_empty());
            assert!(achievers.iter().all(|&a| gp.action(a).del.contains(&p)));
            assert!(!del.nodes[e.from].initial);
        }
        // strict edges do not depend on the mode
        let strict = |g: &LandmarkGraph| -> Vec<(usize, usize, OrderingKind)> {
            g.edges().filter(|e| e.kind.is_strict()).map(|e| (e.from, e.to, e.kind)).collect()
        };
        let full = landmark_graph(&gp, ReasonableMode::Full).unwrap();
        assert_eq!(strict(&off), strict(&full));
    }
}

#[test]
fn mutexes_never_co_occur() {
    let mut checked = 0;
    for gp in small_suite() {
        let Some(states) = reachable_states(&gp, 5000) else {
            continue;
        };
        let m = MutexTable::compute(&gp);
        let n = gp.n_atoms();
        let mut co = vec![false; n * n];
        for s in &states {
            let atoms: Vec<AtomId> = s.atoms().collect();
            for &p in &atoms {
                assert!(m.is_reachable(p));
                for &q in &atoms {
                    co[p.index() * n + q.index()] = true;
                }
            }
        }
        for p in 0..n {
            for q in 0..n {
                if m.mutex(AtomId(p as u32), AtomId(q as u32)) {
                    assert!(!co[p * n + q], "{} {}", gp.atom_text(AtomId(p as u32)), gp.atom_text(AtomId(q as u32)));
                }
            }
        }
        checked += 1;
    }
    assert!(checked >= 10, "only {checked} problems checked");
}
