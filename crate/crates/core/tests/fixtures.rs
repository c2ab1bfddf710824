mod common;

use std::sync::Arc;

use htnlearn::gen::{blocks_domain, gen_blocks};
use htnlearn::ground::parse_plan;
use htnlearn::search::{classical_plan, SearchConfig};
use htnlearn::{validate_plan, GroundProblem};

const BLOCKS_5_7: &str = "(define (problem blocks-5-7)
  (:domain blocks)
  (:objects b5 - block b4 - block b3 - block b1 - block b2 - block)
  (:init
    (on-table b5)
    (on b4 b5)
    (on b3 b4)
    (on b1 b3)
    (on b2 b1)
    (clear b2)
    (hand-empty))
  (:goal (and
    (on-table b5)
    (on b4 b5)
    (on b3 b4)
    (on-table b2)
    (on-table b1))))
";

const BLOCKS_5_7_PLAN: &str = "(!Unstack b2 b1)
(!Putdown b2)
(!Unstack b1 b3)
(!Putdown b1)
";

#[test]
fn five_blocks_seed_seven_is_frozen() {
    let dom = Arc::new(blocks_domain());
    let p = gen_blocks(5, 5, 7, &dom);
    assert_eq!(p.to_pddl(&dom), BLOCKS_5_7);
    let gp = GroundProblem::new(dom, Arc::new(p));
    let plan = parse_plan(&gp, BLOCKS_5_7_PLAN).unwrap();
    assert!(validate_plan(&gp, &plan, gp.goal()).is_ok());
    assert_eq!(common::bfs_plan(&gp, 100_000).unwrap().len(), plan.len());
    let found = classical_plan(&gp, gp.init(), gp.goal(), &SearchConfig::default()).unwrap();
    assert!(validate_plan(&gp, &found, gp.goal()).is_ok());
}

#[test]
fn single_block_is_well_formed() {
    for seed in 0..5 {
        let gp = common::blocks(1, 5, seed);
        assert_eq!(gp.goal().len(), 1);
        assert!(gp.init().contains_all(gp.goal()));
        assert_eq!(classical_plan(&gp, gp.init(), gp.goal(), &SearchConfig::default()).unwrap(), vec![]);
    }
}
