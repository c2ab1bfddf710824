//! Fixed problems shared by the benches in `benches/`.

use std::sync::Arc;

use htnlearn::gen::{blocks_domain, tower4_problem, gen_blocks, gen_logistics, logistics_domain, LogisticsParams};
use htnlearn::learn::MethodLibrary;
use htnlearn::pipeline::learn_from_problem;
use htnlearn::search::{classical_plan, SearchConfig};
use htnlearn::GroundProblem;

pub fn tower4() -> GroundProblem {
    let dom = Arc::new(blocks_domain());
    let p = tower4_problem(&dom);
    GroundProblem::new(dom, Arc::new(p))
}

pub fn blocks(n: usize, seed: u64) -> GroundProblem {
    let dom = Arc::new(blocks_domain());
    let p = gen_blocks(n, 5, seed, &dom);
    GroundProblem::new(dom, Arc::new(p))
}

/// First generated `n`-block problem whose plan needs at least `n` actions.
pub fn blocks_hard(n: usize) -> GroundProblem {
    (0..)
        .map(|seed| blocks(n, seed))
        .find(|gp| {
            classical_plan(gp, gp.init(), gp.goal(), &SearchConfig::default()).is_ok_and(|p| p.len() >= n)
        })
        .expect("some seed gives a long enough plan")
}

/// Three cities, two locations each, one package.
pub fn logistics(seed: u64) -> GroundProblem {
    let dom = Arc::new(logistics_domain());
    let p = gen_logistics(LogisticsParams::default(), seed, &dom);
    GroundProblem::new(dom, Arc::new(p))
}

/// Library learned from `problems` in order, skipping failures.
pub fn trained(problems: &[GroundProblem]) -> MethodLibrary {
    let mut lib = MethodLibrary::default();
    for (i, gp) in problems.iter().enumerate() {
        let _ = learn_from_problem(gp, &mut lib, &Default::default(), i + 1);
    }
    lib
}
