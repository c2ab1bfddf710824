use fixedbitset::FixedBitSet;

use crate::ground::{AtomId, GroundProblem};

/// Pairwise mutexes from h² reachability over the initial state.
pub struct MutexTable {
    n: usize,
    reached: FixedBitSet,
    pairs: FixedBitSet,
}

impl MutexTable {
    pub fn compute(gp: &GroundProblem) -> Self {
        let n = gp.n_atoms();
        let mut t = MutexTable {
            n,
            reached: FixedBitSet::with_capacity(n),
            pairs: FixedBitSet::with_capacity(n * n),
        };
        let init: Vec<AtomId> = gp.init().atoms().collect();
        for &p in &init {
            t.reached.insert(p.index());
            for &q in &init {
                t.set_pair(p, q);
            }
        }
        loop {
            let mut changed = false;
            for a in gp.actions() {
                let applicable = a.pre.iter().all(|p| t.reached.contains(p.index()))
                    && a.pre.iter().all(|&p| a.pre.iter().all(|&q| t.pair(p, q)));
                if !applicable {
                    continue;
                }
                for &p in &a.add {
                    if !t.reached.contains(p.index()) {
                        t.reached.insert(p.index());
                        changed = true;
                    }
                    for &q in &a.add {
                        if !t.pair(p, q) {
                            t.set_pair(p, q);
                            changed = true;
                        }
                    }
                }
                // atoms that survive the action alongside its adds
                for qi in t.reached.ones().collect::<Vec<_>>() {
                    let q = AtomId(qi as u32);
                    if a.del.contains(&q) || a.add.contains(&q) {
                        continue;
                    }
                    if !a.pre.iter().all(|&r| t.pair(q, r)) {
                        continue;
                    }
                    for &p in &a.add {
                        if !t.pair(p, q) {
                            t.set_pair(p, q);
                            changed = true;
                        }
                    }
                }
            }
            if !changed {
                break;
            }
        }
        t
    }

    fn pair(&self, p: AtomId, q: AtomId) -> bool {
        self.pairs.contains(p.index() * self.n + q.index())
    }

    fn set_pair(&mut self, p: AtomId, q: AtomId) {
        self.pairs.insert(p.index() * self.n + q.index());
        self.pairs.insert(q.index() * self.n + p.index());
    }

    pub fn is_reachable(&self, p: AtomId) -> bool {
        self.reached.contains(p.index())
    }

    /// Both atoms reachable but never true together.
    pub fn mutex(&self, p: AtomId, q: AtomId) -> bool {
        p != q && self.is_reachable(p) && self.is_reachable(q) && !self.pair(p, q)
    }
}
