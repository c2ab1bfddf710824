mod common;

use std::sync::Arc;

use proptest::prelude::*;

use htnlearn::curricula::curricugen;
use htnlearn::gen::{blocks_domain, gen_blocks, gen_logistics, logistics_domain, LogisticsParams};
use htnlearn::htn::{htn_solve, root_tasks_from_goal, HtnConfig};
use htnlearn::learn::{rename_equivalent, Added, Method, MethodLibrary};
use htnlearn::pipeline::learn_from_problem;
use htnlearn::search::{classical_plan, h_add, HeuristicKind, SearchConfig, Strategy as SearchStrategy};
use htnlearn::{gamma_apply, parse_domain, parse_problem, validate_plan, ActionId, AtomId, GroundProblem, State};

use common::{blocks, logistics};

fn any_problem() -> impl Strategy<Value = GroundProblem> {
    prop_oneof![
        (1usize..=5, 0usize..=6, any::<u64>()).prop_map(|(n, m, s)| blocks(n, m, s)),
        (1usize..=3, 1usize..=2, any::<u64>()).prop_map(|(c, l, s)| logistics(c, l, s)),
    ]
}

/// Random walk of up to `steps` applicable actions; returns the visited states
/// and the actions taken.
fn walk(gp: &GroundProblem, steps: usize, picks: &[usize]) -> (Vec<State>, Vec<ActionId>) {
    let mut states = vec![gp.init().clone()];
    let mut plan = Vec::new();
    for &pick in picks.iter().take(steps) {
        let s = states.last().unwrap();
        let app: Vec<ActionId> = gp.actions().iter().map(|a| a.id).filter(|&a| gp.is_applicable(s, a)).collect();
        if app.is_empty() {
            break;
        }
        let a = app[pick % app.len()];
        states.push(gamma_apply(gp, s, a).unwrap());
        plan.push(a);
    }
    (states, plan)
}

fn permute(m: &Method, perm: &[usize]) -> Method {
    let mut out = m.clone();
    for (i, v) in m.vars.iter().enumerate() {
        out.vars[perm[i]] = v.clone();
    }
    out.head = m.head.iter().map(|&v| perm[v]).collect();
    for p in &mut out.preconditions {
        p.args = p.args.iter().map(|&v| perm[v]).collect();
    }
    for s in &mut out.subtasks {
        s.args = s.args.iter().map(|&v| perm[v]).collect();
    }
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn pddl_round_trip(n in 1usize..=6, moves in 0usize..=8, cities in 1usize..=3, seed in any::<u64>()) {
        let bdom = blocks_domain();
        let ldom = logistics_domain();
        for dom in [&bdom, &ldom] {
            let again = parse_domain(&dom.to_string()).unwrap();
            prop_assert_eq!(&again, dom);
        }
        let b = gen_blocks(n, moves, seed, &bdom);
        prop_assert_eq!(parse_problem(&b.to_pddl(&bdom), &bdom).unwrap(), b.clone());
        let params = LogisticsParams { cities, ..LogisticsParams::default() };
        let l = gen_logistics(params, seed, &ldom);
        prop_assert_eq!(parse_problem(&l.to_pddl(&ldom), &ldom).unwrap(), l);

        // two parses intern the same atoms
        let dom = Arc::new(bdom.clone());
        let g1 = GroundProblem::new(dom.clone(), Arc::new(b.clone()));
        let g2 = GroundProblem::new(dom, Arc::new(parse_problem(&b.to_pddl(&bdom), &bdom).unwrap()));
        prop_assert_eq!(g1.n_atoms(), g2.n_atoms());
        prop_assert_eq!(g1.actions().len(), g2.actions().len());
    }

    #[test]
    fn gamma_is_deterministic_and_keeps_the_frame(gp in any_problem(), picks in prop::collection::vec(any::<usize>(), 1..12)) {
        let (states, plan) = walk(&gp, picks.len(), &picks);
        for (k, &a) in plan.iter().enumerate() {
            let s = &states[k];
            let t1 = gamma_apply(&gp, s, a).unwrap();
            let t2 = gamma_apply(&gp, s, a).unwrap();
            prop_assert_eq!(&t1, &t2);
            let act = gp.action(a);
            for i in 0..gp.n_atoms() {
                let p = AtomId(i as u32);
                if act.add.contains(&p) {
                    prop_assert!(t1.contains(p));
                } else if act.del.contains(&p) {
                    prop_assert!(!t1.contains(p));
                } else {
                    prop_assert_eq!(t1.contains(p), s.contains(p));
                }
            }
        }
    }

    #[test]
    fn validation_agrees_with_folding(gp in any_problem(), raw in prop::collection::vec(any::<usize>(), 0..8)) {
        let n = gp.actions().len();
        prop_assume!(n > 0);
        let plan: Vec<ActionId> = raw.iter().map(|&r| ActionId((r % n) as u32)).collect();
        let mut s = Some(gp.init().clone());
        for &a in &plan {
            s = s.and_then(|st| gamma_apply(&gp, &st, a).ok());
        }
        let folded = s.is_some_and(|st| st.contains_all(gp.goal()));
        prop_assert_eq!(validate_plan(&gp, &plan, gp.goal()).is_ok(), folded);
    }

    #[test]
    fn h_add_is_zero_exactly_on_satisfied_goals(
        gp in any_problem(),
        picks in prop::collection::vec(any::<usize>(), 0..10),
        mask in prop::collection::vec(any::<bool>(), 64),
    ) {
        let (states, _) = walk(&gp, picks.len(), &picks);
        let s = states.last().unwrap();
        let goal: Vec<AtomId> = (0..gp.n_atoms())
            .filter(|&i| mask[i % mask.len()] && (i / mask.len()) % 2 == 0)
            .map(|i| AtomId(i as u32))
            .take(4)
            .collect();
        let h = h_add(&gp, s, &goal);
        prop_assert_eq!(h == Some(0), s.contains_all(&goal));
    }

    #[test]
    fn classical_plans_validate_and_repeat(gp in any_problem(), astar in any::<bool>()) {
        let cfg = SearchConfig {
            strategy: if astar { SearchStrategy::AStar } else { SearchStrategy::GreedyBestFirst },
            heuristic: if astar { HeuristicKind::HMax } else { HeuristicKind::HAdd },
            max_expansions: 200_000,
        };
        let plan = classical_plan(&gp, gp.init(), gp.goal(), &cfg).unwrap();
        prop_assert!(validate_plan(&gp, &plan, gp.goal()).is_ok());
        prop_assert_eq!(classical_plan(&gp, gp.init(), gp.goal(), &cfg).unwrap(), plan);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn curriculum_steps_are_well_formed(gp in any_problem()) {
        let mut lib = MethodLibrary::default();
        let out = curricugen(&gp, &Default::default(), &mut lib.tasks).unwrap();
        let trace = &out.trace;
        prop_assert!(validate_plan(&gp, &trace.actions, gp.goal()).is_ok());
        let steps = &out.curriculum.steps;
        for s in steps {
            prop_assert!(1 <= s.begin && s.begin <= s.end && s.end <= trace.len());
            let goals = lib.tasks.ground_goals(&gp, &s.task).unwrap().unwrap();
            prop_assert!(trace.state(s.end).contains_all(&goals));
        }
        // blocks of descending begin; two landmarks may close at the same index
        for w in steps.windows(2) {
            prop_assert!(w[1].end >= w[0].end);
        }
        let distinct: std::collections::HashSet<_> = steps.iter().map(|s| (s.begin, s.end, s.task.clone())).collect();
        prop_assert_eq!(distinct.len(), steps.len());
    }

    #[test]
    fn learned_methods_hold_at_their_source(gp in any_problem()) {
        let mut lib = MethodLibrary::default();
        let before = lib.len();
        let l = learn_from_problem(&gp, &mut lib, &Default::default(), 1).unwrap();
        prop_assert!(lib.len() >= before);
        let trace = &l.generated.trace;
        for inst in &l.report.instances {
            let m = lib.method(inst.method);
            let pre = m.ground_preconditions(&gp, &inst.binding).unwrap();
            prop_assert!(trace.state(inst.begin - 1).contains_all(&pre));
        }
        // every stored method is distinct up to renaming
        for (i, a) in lib.methods().iter().enumerate() {
            for b in &lib.methods()[i + 1..] {
                prop_assert!(!rename_equivalent(a, b));
            }
        }
        let roots = root_tasks_from_goal(&gp, Default::default()).unwrap();
        let (plan, dt) = htn_solve(&gp, &lib, gp.init(), &roots, &HtnConfig::default()).unwrap();
        prop_assert_eq!(dt.leaves(), plan.clone());
        prop_assert!(validate_plan(&gp, &plan, gp.goal()).is_ok());
    }

    #[test]
    fn renamed_methods_are_duplicates(gp in any_problem(), shuffle in any::<u64>()) {
        let mut lib = MethodLibrary::default();
        learn_from_problem(&gp, &mut lib, &Default::default(), 1).unwrap();
        for m in lib.methods().to_vec() {
            let n = m.vars.len();
            // a rotation followed by a swap, both seeded
            let mut perm: Vec<usize> = (0..n).map(|i| (i + shuffle as usize) % n.max(1)).collect();
            if n >= 2 {
                perm.swap(0, (shuffle as usize / 7) % n);
            }
            let p = permute(&m, &perm);
            prop_assert!(rename_equivalent(&m, &p));
            let mut copy = lib.clone();
            prop_assert_eq!(copy.add(p).0, Added::Existing(m.id));
        }
    }
}
