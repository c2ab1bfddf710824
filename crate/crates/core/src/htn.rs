//! Total-order HTN planning with a learned method library.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::rc::Rc;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::ground::{gamma_apply, ActionId, AtomId, GroundProblem, ObjId, State};
use crate::landmark::{landmark_graph, LandmarkError, ReasonableMode};
use crate::learn::{IndexedMethodInstance, Method, MethodLibrary, SubtaskKind};
use crate::task::{TaskError, TaskInstance, TaskTable};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HtnError {
    #[error("no decomposition found after {decompositions} decompositions")]
    NoSolution { decompositions: usize },
    #[error("no decomposition found; branches were cut at depth {limit}")]
    DepthLimitExceeded { limit: usize },
    #[error("decomposition budget of {limit} exhausted")]
    BudgetExceeded { limit: usize },
    #[error(transparent)]
    Task(#[from] TaskError),
    #[error("instance {index} does not decompose along its provenance: {reason}")]
    Reconstruction { index: usize, reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct HtnConfig {
    pub max_decompositions: usize,
    /// Maximum nesting of open tasks.
    pub depth_limit: usize,
}

impl Default for HtnConfig {
    fn default() -> Self {
        HtnConfig {
            max_decompositions: 100_000,
            depth_limit: 500,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DecompNode {
    Task {
        task: TaskInstance,
        method: usize,
        binding: Vec<ObjId>,
        children: Vec<DecompNode>,
    },
    Action(ActionId),
}

impl DecompNode {
    fn collect_leaves(&self, out: &mut Vec<ActionId>) {
        match self {
            DecompNode::Action(a) => out.push(*a),
            DecompNode::Task { children, .. } => children.iter().for_each(|c| c.collect_leaves(out)),
        }
    }

    fn to_json(&self, gp: &GroundProblem) -> Value {
        match self {
            DecompNode::Action(a) => json!({ "action": gp.action_text(*a) }),
            DecompNode::Task {
                task,
                method,
                binding,
                children,
            } => json!({
                "task": task.text(gp),
                "method": method,
                "binding": binding.iter().map(|&o| gp.object(o).name.to_string()).collect::<Vec<_>>(),
                "children": children.iter().map(|c| c.to_json(gp)).collect::<Vec<_>>(),
            }),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DecompositionTrace {
    pub roots: Vec<DecompNode>,
}

impl DecompositionTrace {
    pub fn leaves(&self) -> Vec<ActionId> {
        let mut out = Vec::new();
        self.roots.iter().for_each(|r| r.collect_leaves(&mut out));
        out
    }

    pub fn to_json(&self, gp: &GroundProblem) -> Value {
        Value::Array(self.roots.iter().map(|r| r.to_json(gp)).collect())
    }
}

/// All bindings of `m`'s variables that agree with the task arguments, respect
/// variable types and make every precondition true in `s`. Sorted by bound
/// objects.
pub fn applicable_instances(gp: &GroundProblem, m: &Method, task: &TaskInstance, s: &State) -> Vec<Vec<ObjId>> {
    if m.task != task.name || m.head.len() != task.args.len() {
        return Vec::new();
    }
    let dom = &gp.domain;
    let fits = |v: usize, o: ObjId| dom.is_subtype(&gp.object(o).ty, &m.vars[v].ty);
    let mut binding: Vec<Option<ObjId>> = vec![None; m.vars.len()];
    for (&v, &o) in m.head.iter().zip(&task.args) {
        match binding[v] {
            Some(b) if b != o => return Vec::new(),
            _ if !fits(v, o) => return Vec::new(),
            _ => binding[v] = Some(o),
        }
    }

    // most-constrained precondition first
    let mut order: Vec<usize> = Vec::with_capacity(m.preconditions.len());
    let mut bound: Vec<bool> = binding.iter().map(Option::is_some).collect();
    let mut left: Vec<usize> = (0..m.preconditions.len()).collect();
    while !left.is_empty() {
        let (pos, _) = left
            .iter()
            .enumerate()
            .max_by_key(|(_, &i)| {
                let p = &m.preconditions[i];
                let unbound = p.args.iter().filter(|&&v| !bound[v]).count();
                (std::cmp::Reverse(unbound), std::cmp::Reverse(i))
            })
            .expect("non-empty");
        let i = left.remove(pos);
        for &v in &m.preconditions[i].args {
            bound[v] = true;
        }
        order.push(i);
    }
    let free: Vec<usize> = (0..m.vars.len()).filter(|&v| !bound[v]).collect();

    let mut out = Vec::new();
    join(gp, m, s, &order, &free, &fits, &mut binding, &mut out);
    out.sort();
    out.dedup();
    out
}

#[allow(clippy::too_many_arguments)]
fn join(
    gp: &GroundProblem,
    m: &Method,
    s: &State,
    order: &[usize],
    free: &[usize],
    fits: &dyn Fn(usize, ObjId) -> bool,
    binding: &mut Vec<Option<ObjId>>,
    out: &mut Vec<Vec<ObjId>>,
) {
    let Some((&first, rest)) = order.split_first() else {
        enumerate_free(gp, m, free, binding, out);
        return;
    };
    let pre = &m.preconditions[first];
    for &atom in gp.atoms_with_predicate(pre.predicate) {
        if !s.contains(atom) {
            continue;
        }
        let args = &gp.atom(atom).args;
        let mut newly = Vec::new();
        let mut ok = true;
        for (&v, &o) in pre.args.iter().zip(args) {
            match binding[v] {
                Some(b) if b == o => {}
                Some(_) => ok = false,
                None if fits(v, o) => {
                    binding[v] = Some(o);
                    newly.push(v);
                }
                None => ok = false,
            }
            if !ok {
                break;
            }
        }
        if ok {
            join(gp, m, s, rest, free, fits, binding, out);
        }
        for v in newly {
            binding[v] = None;
        }
    }
}

fn enumerate_free(gp: &GroundProblem, m: &Method, free: &[usize], binding: &mut Vec<Option<ObjId>>, out: &mut Vec<Vec<ObjId>>) {
    let Some((&v, rest)) = free.split_first() else {
        out.push(binding.iter().map(|b| b.expect("all bound")).collect());
        return;
    };
    let Some(ty) = gp.domain.type_index(m.vars[v].ty.key()) else {
        return;
    };
    for &o in gp.objects_of_type(ty) {
        binding[v] = Some(o);
        enumerate_free(gp, m, rest, binding, out);
    }
    binding[v] = None;
}

/// Ground subtasks of a method under a full binding; `None` if some primitive
/// is not part of the grounding.
fn ground_subtasks(gp: &GroundProblem, m: &Method, binding: &[ObjId]) -> Option<Vec<Item>> {
    m.subtasks
        .iter()
        .map(|st| {
            let args: Vec<ObjId> = st.args.iter().map(|&v| binding[v]).collect();
            match &st.kind {
                SubtaskKind::Primitive(schema) => gp.action_id(*schema, &args).map(Item::Prim),
                SubtaskKind::Task(name) => Some(Item::Task(TaskInstance {
                    name: name.clone(),
                    args,
                })),
            }
        })
        .collect()
}

#[derive(Clone)]
enum Item {
    Prim(ActionId),
    Task(TaskInstance),
}

/// Persistent list of decomposition children, newest first.
struct Cons {
    head: Child,
    tail: Children,
}

type Children = Option<Rc<Cons>>;

#[derive(Clone)]
enum Child {
    Action(ActionId),
    Task(Rc<Expansion>),
}

/// One way of accomplishing a task.
struct Expansion {
    task: TaskInstance,
    method: usize,
    binding: Vec<ObjId>,
    children: Children,
}

impl Expansion {
    fn to_node(&self) -> DecompNode {
        let mut kids: Vec<DecompNode> = Vec::new();
        let mut cur = self.children.as_deref();
        while let Some(c) = cur {
            kids.push(match &c.head {
                Child::Action(a) => DecompNode::Action(*a),
                Child::Task(e) => e.to_node(),
            });
            cur = c.tail.as_deref();
        }
        kids.reverse();
        DecompNode::Task {
            task: self.task.clone(),
            method: self.method,
            binding: self.binding.clone(),
            children: kids,
        }
    }
}

type GenId = usize;

struct Frame {
    pos: usize,
    state: State,
    children: Children,
    /// Next outcome to take when `pos` is a compound task.
    k: usize,
}

/// Lazily extended stream of the distinct end states of one task started in
/// one state. It walks the task's methods and bindings in order and the
/// subtask sequence of each depth first, taking the outcomes of compound
/// subtasks from their own streams.
struct Gen {
    task: TaskInstance,
    start: State,
    goals: Vec<AtomId>,
    /// Atoms the caller needs at the end besides the goals.
    required: Vec<AtomId>,
    outcomes: Vec<(State, Rc<Expansion>)>,
    seen: HashSet<State>,
    method_pos: usize,
    bindings: Vec<Vec<ObjId>>,
    binding_pos: usize,
    method: usize,
    binding: Vec<ObjId>,
    items: Vec<Item>,
    /// Atoms that must hold after each subtask for the method to end in the
    /// goals and required atoms, counting on task subtasks for their goals only.
    needs: Vec<Vec<AtomId>>,
    frames: Vec<Frame>,
    active: bool,
    done: bool,
}

struct Abort(HtnError);

struct Solver<'a> {
    gp: &'a GroundProblem,
    lib: &'a MethodLibrary,
    cfg: &'a HtnConfig,
    /// Pass the atoms a caller needs afterwards down to its subtasks.
    propagate: bool,
    gens: Vec<Gen>,
    index: HashMap<(TaskInstance, State, Vec<AtomId>), GenId>,
    depth: usize,
    decompositions: usize,
    depth_cut: bool,
}

impl Solver<'_> {
    /// Stream for `task` from `s`; `after` are atoms needed once it is done.
    fn gen_for(&mut self, task: &TaskInstance, s: &State, after: &[AtomId]) -> Option<GenId> {
        let goals = task_goals(&self.lib.tasks, self.gp, task)?;
        let required: Vec<AtomId> = if self.propagate {
            after.iter().copied().filter(|a| !goals.contains(a)).collect()
        } else {
            Vec::new()
        };
        let key = (task.clone(), s.clone(), required);
        if let Some(&g) = self.index.get(&key) {
            return Some(g);
        }
        if !task_preconditions_hold(&self.lib.tasks, self.gp, task, s) {
            return None;
        }
        let id = self.gens.len();
        self.gens.push(Gen {
            task: task.clone(),
            start: s.clone(),
            goals,
            required: key.2.clone(),
            outcomes: Vec::new(),
            seen: HashSet::new(),
            method_pos: 0,
            bindings: Vec::new(),
            binding_pos: 0,
            method: 0,
            binding: Vec::new(),
            items: Vec::new(),
            needs: Vec::new(),
            frames: Vec::new(),
            active: false,
            done: false,
        });
        self.index.insert(key, id);
        Some(id)
    }

    /// Outcome `k` of stream `g`, extending the stream as needed. `None` once
    /// the stream is exhausted, and for a task that is already open in the
    /// same state (a loop) or lies beyond the depth limit.
    fn request(&mut self, g: GenId, k: usize) -> Result<Option<(State, Rc<Expansion>)>, Abort> {
        if let Some(o) = self.gens[g].outcomes.get(k) {
            return Ok(Some(o.clone()));
        }
        if self.gens[g].done || self.gens[g].active {
            return Ok(None);
        }
        if self.depth >= self.cfg.depth_limit {
            self.depth_cut = true;
            return Ok(None);
        }
        self.gens[g].active = true;
        self.depth += 1;
        let r = self.extend(g, k);
        self.depth -= 1;
        self.gens[g].active = false;
        r
    }

    fn extend(&mut self, g: GenId, k: usize) -> Result<Option<(State, Rc<Expansion>)>, Abort> {
        while self.gens[g].outcomes.len() <= k {
            if self.gens[g].frames.is_empty() && !self.next_alternative(g)? {
                self.gens[g].done = true;
                return Ok(None);
            }
            self.advance(g)?;
        }
        Ok(Some(self.gens[g].outcomes[k].clone()))
    }

    /// Starts the next applicable method binding; false when none is left.
    fn next_alternative(&mut self, g: GenId) -> Result<bool, Abort> {
        let lib = self.lib;
        loop {
            let gen = &mut self.gens[g];
            if gen.binding_pos < gen.bindings.len() {
                let binding = std::mem::take(&mut gen.bindings[gen.binding_pos]);
                gen.binding_pos += 1;
                let m = lib.method(gen.method);
                let Some(items) = ground_subtasks(self.gp, m, &binding) else {
                    continue;
                };
                let mut end = gen.goals.clone();
                end.extend(gen.required.iter().copied());
                let Some(needs) = subtask_needs(self.gp, &lib.tasks, &items, &end) else {
                    continue;
                };
                self.decompositions += 1;
                if self.decompositions > self.cfg.max_decompositions {
                    return Err(Abort(HtnError::BudgetExceeded {
                        limit: self.cfg.max_decompositions,
                    }));
                }
                gen.items = items;
                gen.needs = needs;
                gen.binding = binding;
                gen.frames.push(Frame {
                    pos: 0,
                    state: gen.start.clone(),
                    children: None,
                    k: 0,
                });
                return Ok(true);
            }
            let Some(m) = lib.methods_for(gen.task.name.key()).nth(gen.method_pos) else {
                return Ok(false);
            };
            gen.method_pos += 1;
            gen.method = m.id;
            gen.bindings = applicable_instances(self.gp, m, &gen.task, &gen.start);
            gen.binding_pos = 0;
        }
    }

    /// One step of the depth-first walk over the current alternative.
    fn advance(&mut self, g: GenId) -> Result<(), Abort> {
        let gen = &mut self.gens[g];
        let f = gen.frames.last_mut().expect("a live alternative");
        let pos = f.pos;
        if pos == gen.items.len() {
            let f = gen.frames.pop().expect("checked");
            if f.state.contains_all(&gen.goals)
                && f.state.contains_all(&gen.required)
                && gen.seen.insert(f.state.clone())
            {
                let exp = Expansion {
                    task: gen.task.clone(),
                    method: gen.method,
                    binding: gen.binding.clone(),
                    children: f.children,
                };
                gen.outcomes.push((f.state, Rc::new(exp)));
            }
            return Ok(());
        }
        match gen.items[pos].clone() {
            Item::Prim(a) => {
                let f = gen.frames.pop().expect("checked");
                if let Some(next) = self.gp.successor(&f.state, a).filter(|n| n.contains_all(&gen.needs[pos])) {
                    gen.frames.push(Frame {
                        pos: pos + 1,
                        state: next,
                        children: push(Child::Action(a), &f.children),
                        k: 0,
                    });
                }
            }
            Item::Task(t) => {
                let k = f.k;
                f.k += 1;
                let state = f.state.clone();
                let after = gen.needs[pos].clone();
                let outcome = match self.gen_for(&t, &state, &after) {
                    Some(child) => self.request(child, k)?,
                    None => None,
                };
                let gen = &mut self.gens[g];
                match outcome {
                    Some((end, _)) if !end.contains_all(&gen.needs[pos]) => {}
                    Some((end, exp)) => {
                        let f = gen.frames.last().expect("still there");
                        let frame = Frame {
                            pos: pos + 1,
                            state: end,
                            children: push(Child::Task(exp), &f.children),
                            k: 0,
                        };
                        gen.frames.push(frame);
                    }
                    None => {
                        gen.frames.pop();
                    }
                }
            }
        }
        Ok(())
    }
}

/// For each subtask position, the atoms the rest of the method needs
/// afterwards; `None` when one of them does not exist in the grounding.
fn subtask_needs(gp: &GroundProblem, tasks: &TaskTable, items: &[Item], end: &[AtomId]) -> Option<Vec<Vec<AtomId>>> {
    let mut needs = vec![Vec::new(); items.len()];
    let mut r: BTreeSet<AtomId> = end.iter().copied().collect();
    for (j, item) in items.iter().enumerate().rev() {
        needs[j] = r.iter().copied().collect();
        match item {
            Item::Prim(a) => {
                let act = gp.action(*a);
                for q in &act.add {
                    r.remove(q);
                }
                r.extend(act.pre.iter().copied());
            }
            Item::Task(t) => {
                for q in task_goals(tasks, gp, t)? {
                    r.remove(&q);
                }
            }
        }
    }
    Some(needs)
}

fn push(head: Child, tail: &Children) -> Children {
    Some(Rc::new(Cons {
        head,
        tail: tail.clone(),
    }))
}

fn task_goals(tasks: &TaskTable, gp: &GroundProblem, inst: &TaskInstance) -> Option<Vec<AtomId>> {
    tasks.ground_goals(gp, inst).ok().flatten()
}

fn task_preconditions_hold(tasks: &TaskTable, gp: &GroundProblem, inst: &TaskInstance, s: &State) -> bool {
    let Some(t) = tasks.get(inst.name.key()) else {
        return false;
    };
    t.preconditions
        .iter()
        .all(|p| p.ground(gp, &inst.args).is_some_and(|a| s.contains(a)))
}

/// Depth-first search over the root task list, one pass of the solver.
fn solve_roots(
    solver: &mut Solver<'_>,
    s0: &State,
    tasks: &[TaskInstance],
    root_goals: &[Vec<AtomId>],
) -> Result<Option<Vec<Rc<Expansion>>>, Abort> {
    // atoms that must hold after root i: the goals not left to a later root
    let mut after: Vec<Vec<AtomId>> = vec![Vec::new(); tasks.len()];
    let mut r: BTreeSet<AtomId> = root_goals.iter().flatten().copied().collect();
    for i in (0..tasks.len()).rev() {
        after[i] = r.iter().copied().collect();
        for q in &root_goals[i] {
            r.remove(q);
        }
    }
    let mut frames: Vec<(State, Vec<Rc<Expansion>>, usize)> = vec![(s0.clone(), Vec::new(), 0)];
    let mut tried: HashSet<(usize, State)> = HashSet::new();
    while let Some(f) = frames.last_mut() {
        let i = f.1.len();
        if i == tasks.len() {
            let (state, chosen, _) = frames.pop().expect("checked");
            if state.contains_all(&after[tasks.len() - 1]) {
                return Ok(Some(chosen));
            }
            continue;
        }
        if f.2 == 0 && !tried.insert((i, f.0.clone())) {
            frames.pop();
            continue;
        }
        let k = f.2;
        f.2 += 1;
        let state = f.0.clone();
        let next = match solver.gen_for(&tasks[i], &state, &after[i]) {
            Some(g) => solver.request(g, k)?,
            None => None,
        };
        match next {
            Some((end, _)) if solver.propagate && !end.contains_all(&after[i]) => {}
            Some((end, exp)) => {
                let mut chosen = frames.last().expect("checked").1.clone();
                chosen.push(exp);
                frames.push((end, chosen, 0));
            }
            None => {
                frames.pop();
            }
        }
    }
    Ok(None)
}

/// Total-order decomposition of `tasks` from `s0`: depth-first and left to
/// right, methods in library order, bindings in sorted order, until the goals
/// of every root task hold at the end. A task is not re-entered in a state
/// where it is already open. The distinct end states of each task started in
/// each state are memoized as they are found.
///
/// A first pass passes down the atoms each subtask has to leave intact,
/// assuming a task subtask brings about only its goals; when that pass runs
/// out of alternatives the search is repeated without the assumption. Both
/// passes share the decomposition budget.
pub fn htn_solve(
    gp: &GroundProblem,
    lib: &MethodLibrary,
    s0: &State,
    tasks: &[TaskInstance],
    cfg: &HtnConfig,
) -> Result<(Vec<ActionId>, DecompositionTrace), HtnError> {
    let mut root_goals = Vec::new();
    for t in tasks {
        match lib.tasks.ground_goals(gp, t)? {
            Some(g) => root_goals.push(g),
            None => return Err(HtnError::NoSolution { decompositions: 0 }),
        }
    }
    if tasks.is_empty() {
        return Ok((Vec::new(), DecompositionTrace { roots: Vec::new() }));
    }
    let mut decompositions = 0;
    let mut depth_cut = false;
    for propagate in [true, false] {
        let mut solver = Solver {
            gp,
            lib,
            cfg,
            propagate,
            gens: Vec::new(),
            index: HashMap::new(),
            depth: 0,
            decompositions,
            depth_cut: false,
        };
        let found = solve_roots(&mut solver, s0, tasks, &root_goals).map_err(|Abort(e)| e)?;
        if let Some(chosen) = found {
            let trace = DecompositionTrace {
                roots: chosen.iter().map(|e| e.to_node()).collect(),
            };
            return Ok((trace.leaves(), trace));
        }
        decompositions = solver.decompositions;
        depth_cut |= solver.depth_cut;
    }
    if depth_cut {
        Err(HtnError::DepthLimitExceeded { limit: cfg.depth_limit })
    } else {
        Err(HtnError::NoSolution { decompositions })
    }
}

/// Root tasks of the equivalent hierarchical problem: one `Achieve-<pred>`
/// task per goal atom, in landmark order (goals missing from the sequence
/// follow in problem order).
pub fn root_tasks_from_goal(gp: &GroundProblem, mode: ReasonableMode) -> Result<Vec<TaskInstance>, LandmarkError> {
    let seq = landmark_graph(gp, mode)?.topo_sequence()?;
    let goal = gp.goal();
    let mut atoms: Vec<AtomId> = seq.into_iter().filter(|a| goal.contains(a)).collect();
    for &g in goal {
        if !atoms.contains(&g) {
            atoms.push(g);
        }
    }
    let mut scratch = TaskTable::default();
    Ok(atoms.into_iter().map(|a| scratch.make_annotated_task(gp, a)).collect())
}

/// Decomposes indexed instance `root` exactly along the cover it was learned
/// from, starting in `s`: every method must be applicable under its recorded
/// binding, every primitive applicable, and every task goal achieved.
pub fn decompose_instance(
    gp: &GroundProblem,
    lib: &MethodLibrary,
    instances: &[IndexedMethodInstance],
    root: usize,
    s: &State,
) -> Result<(Vec<ActionId>, DecompNode), HtnError> {
    let mut state = s.clone();
    let mut plan = Vec::new();
    let node = guided(gp, lib, instances, root, &mut state, &mut plan)?;
    Ok((plan, node))
}

fn guided(
    gp: &GroundProblem,
    lib: &MethodLibrary,
    instances: &[IndexedMethodInstance],
    index: usize,
    state: &mut State,
    plan: &mut Vec<ActionId>,
) -> Result<DecompNode, HtnError> {
    let fail = |reason: String| HtnError::Reconstruction { index, reason };
    let inst = &instances[index];
    let m = lib.method(inst.method);
    if !applicable_instances(gp, m, &inst.task, state).contains(&inst.binding) {
        return Err(fail(format!("method {} not applicable", m.id)));
    }
    let subtasks = ground_subtasks(gp, m, &inst.binding).ok_or_else(|| fail("unknown primitive".into()))?;
    let mut children = Vec::with_capacity(subtasks.len());
    for (st, child) in subtasks.into_iter().zip(&inst.children) {
        match (st, child) {
            (Item::Prim(a), None) => {
                *state = gamma_apply(gp, state, a).map_err(|e| fail(e.to_string()))?;
                plan.push(a);
                children.push(DecompNode::Action(a));
            }
            (Item::Task(t), Some(c)) => {
                if instances[*c].task != t {
                    return Err(fail(format!("subtask {} does not match its instance", t.text(gp))));
                }
                children.push(guided(gp, lib, instances, *c, state, plan)?);
            }
            _ => return Err(fail("cover and subtasks disagree".into())),
        }
    }
    let goals = task_goals(&lib.tasks, gp, &inst.task).ok_or_else(|| fail("task goals do not ground".into()))?;
    if !state.contains_all(&goals) {
        return Err(fail(format!("{} not achieved", inst.task.text(gp))));
    }
    Ok(DecompNode::Task {
        task: inst.task.clone(),
        method: inst.method,
        binding: inst.binding.clone(),
        children,
    })
}
