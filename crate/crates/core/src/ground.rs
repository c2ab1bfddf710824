//! Grounding, the state-transition function and plan validation.
//!
//! Atoms, objects and actions get dense ids at grounding time; a [`State`] is
//! a bitset over atom ids.

use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

use fixedbitset::FixedBitSet;
use thiserror::Error;

use crate::pddl::{Atom, DomainModel, Name, ProblemModel, Term};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ObjId(pub u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct AtomId(pub u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ActionId(pub u32);

impl AtomId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl ActionId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl ObjId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GroundError {
    #[error("action {action} is not applicable")]
    Inapplicable { action: String },
    #[error("step {step} ({action}) is not applicable")]
    StepInapplicable { step: usize, action: String },
    #[error("goal not achieved; missing {missing:?}")]
    GoalNotAchieved { missing: Vec<String> },
    #[error("line {line}: `{text}` is not a reachable ground action")]
    UnknownAction { line: usize, text: String },
    #[error("unknown atom `{0}`")]
    UnknownAtom(String),
}

/// Predicate index (into the domain's predicate list) plus object arguments.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct GroundAtom {
    pub predicate: usize,
    pub args: Vec<ObjId>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroundAction {
    pub id: ActionId,
    pub schema: usize,
    pub args: Vec<ObjId>,
    pub pre: Vec<AtomId>,
    pub add: Vec<AtomId>,
    /// Never overlaps `add`.
    pub del: Vec<AtomId>,
}

#[derive(Debug, Clone)]
pub struct ObjectInfo {
    pub name: Name,
    pub ty: Name,
}

/// Set of true atoms.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct State {
    bits: FixedBitSet,
}

impl State {
    pub fn empty(n_atoms: usize) -> Self {
        State {
            bits: FixedBitSet::with_capacity(n_atoms),
        }
    }

    pub fn from_atoms(n_atoms: usize, atoms: impl IntoIterator<Item = AtomId>) -> Self {
        let mut s = State::empty(n_atoms);
        for a in atoms {
            s.insert(a);
        }
        s
    }

    pub fn contains(&self, a: AtomId) -> bool {
        self.bits.contains(a.index())
    }

    pub fn insert(&mut self, a: AtomId) {
        self.bits.insert(a.index());
    }

    pub fn remove(&mut self, a: AtomId) {
        self.bits.set(a.index(), false);
    }

    pub fn contains_all(&self, atoms: &[AtomId]) -> bool {
        atoms.iter().all(|&a| self.contains(a))
    }

    pub fn atoms(&self) -> impl Iterator<Item = AtomId> + '_ {
        self.bits.ones().map(|i| AtomId(i as u32))
    }

    pub fn len(&self) -> usize {
        self.bits.count_ones(..)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn bits(&self) -> &FixedBitSet {
        &self.bits
    }
}

impl fmt::Debug for State {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.atoms().map(|a| a.0)).finish()
    }
}

/// Grounded task: interned atoms, reachable ground actions, initial state and goal.
#[derive(Debug, Clone)]
pub struct GroundProblem {
    pub domain: Arc<DomainModel>,
    pub problem: Arc<ProblemModel>,
    objects: Vec<ObjectInfo>,
    object_index: HashMap<String, ObjId>,
    /// Objects per domain type index (including subtypes), sorted.
    objects_of_type: Vec<Vec<ObjId>>,
    atoms: Vec<GroundAtom>,
    atom_index: HashMap<GroundAtom, AtomId>,
    atoms_by_predicate: Vec<Vec<AtomId>>,
    actions: Vec<GroundAction>,
    action_index: HashMap<(usize, Vec<ObjId>), ActionId>,
    achievers: Vec<Vec<ActionId>>,
    precondition_of: Vec<Vec<ActionId>>,
    init: State,
    goal: Vec<AtomId>,
}

struct Interner {
    atoms: Vec<GroundAtom>,
    index: HashMap<GroundAtom, AtomId>,
}

impl Interner {
    fn intern(&mut self, atom: GroundAtom) -> AtomId {
        if let Some(&id) = self.index.get(&atom) {
            return id;
        }
        let id = AtomId(self.atoms.len() as u32);
        self.atoms.push(atom.clone());
        self.index.insert(atom, id);
        id
    }
}

struct SchemaPlan {
    /// For each parameter position, preconditions whose last variable is that position.
    checks_at: Vec<Vec<usize>>,
    /// Preconditions without variables.
    ground_checks: Vec<usize>,
    candidates: Vec<Vec<ObjId>>,
}

impl GroundProblem {
    /// Grounds every action schema against the problem objects, keeping only
    /// actions reachable from the initial state under delete relaxation.
    /// Actions are sorted by (schema name, arguments).
    pub fn new(dom: Arc<DomainModel>, prob: Arc<ProblemModel>) -> Self {
        let mut objects: Vec<ObjectInfo> = prob
            .all_objects(&dom)
            .map(|(n, t)| ObjectInfo {
                name: n.clone(),
                ty: t.clone(),
            })
            .collect();
        objects.sort_by(|a, b| a.name.cmp(&b.name));
        let object_index: HashMap<String, ObjId> = objects
            .iter()
            .enumerate()
            .map(|(i, o)| (o.name.key().to_string(), ObjId(i as u32)))
            .collect();
        let objects_of_type: Vec<Vec<ObjId>> = dom
            .types
            .iter()
            .map(|t| {
                objects
                    .iter()
                    .enumerate()
                    .filter(|(_, o)| dom.is_subtype(&o.ty, &t.name))
                    .map(|(i, _)| ObjId(i as u32))
                    .collect()
            })
            .collect();

        let mut interner = Interner {
            atoms: Vec::new(),
            index: HashMap::new(),
        };
        let to_ground = |a: &Atom| GroundAtom {
            predicate: dom.predicate_index(a.predicate.key()).expect("validated predicate"),
            args: a
                .args
                .iter()
                .map(|n| object_index[n.key()])
                .collect(),
        };
        let init_ids: Vec<AtomId> = prob.init.iter().map(|a| interner.intern(to_ground(a))).collect();
        let goal_ids: Vec<AtomId> = prob.goal.iter().map(|a| interner.intern(to_ground(a))).collect();

        let mut reached: Vec<bool> = vec![false; interner.atoms.len()];
        for &a in &init_ids {
            reached[a.index()] = true;
        }

        let schema_order: Vec<usize> = {
            let mut v: Vec<usize> = (0..dom.action_schemas.len()).collect();
            v.sort_by(|&a, &b| dom.action_schemas[a].name.cmp(&dom.action_schemas[b].name));
            v
        };
        let plans: Vec<SchemaPlan> = dom
            .action_schemas
            .iter()
            .map(|s| {
                let mut checks_at = vec![Vec::new(); s.params.len()];
                let mut ground_checks = Vec::new();
                for (pi, p) in s.preconditions.iter().enumerate() {
                    let last = p
                        .args
                        .iter()
                        .filter_map(|t| match t {
                            Term::Var(i) => Some(*i),
                            Term::Const(_) => None,
                        })
                        .max();
                    match last {
                        Some(i) => checks_at[i].push(pi),
                        None => ground_checks.push(pi),
                    }
                }
                let candidates = s
                    .params
                    .iter()
                    .map(|v| {
                        let ti = dom.type_index(v.ty.key()).expect("validated type");
                        objects_of_type[ti].clone()
                    })
                    .collect();
                SchemaPlan {
                    checks_at,
                    ground_checks,
                    candidates,
                }
            })
            .collect();

        let ground_term = |t: &Term, binding: &[ObjId]| match t {
            Term::Var(i) => binding[*i],
            Term::Const(c) => object_index[c.key()],
        };
        let instantiate = |a: &crate::pddl::AtomSchema, binding: &[ObjId]| GroundAtom {
            predicate: dom.predicate_index(a.predicate.key()).expect("validated predicate"),
            args: a.args.iter().map(|t| ground_term(t, binding)).collect(),
        };

        let mut found: Vec<(usize, Vec<ObjId>)> = Vec::new();
        let mut found_index: HashMap<(usize, Vec<ObjId>), ()> = HashMap::new();
        loop {
            let mut changed = false;
            for &si in &schema_order {
                let schema = &dom.action_schemas[si];
                let plan = &plans[si];
                let is_reached = |atom: &GroundAtom, interner: &Interner, reached: &[bool]| {
                    interner
                        .index
                        .get(atom)
                        .is_some_and(|id| reached[id.index()])
                };
                if !plan
                    .ground_checks
                    .iter()
                    .all(|&pi| is_reached(&instantiate(&schema.preconditions[pi], &[]), &interner, &reached))
                {
                    continue;
                }
                let mut bindings: Vec<Vec<ObjId>> = Vec::new();
                let mut binding: Vec<ObjId> = Vec::with_capacity(schema.params.len());
                // depth-first enumeration with precondition pruning
                fn enumerate(
                    depth: usize,
                    binding: &mut Vec<ObjId>,
                    out: &mut Vec<Vec<ObjId>>,
                    plan: &SchemaPlan,
                    check: &dyn Fn(usize, &[ObjId]) -> bool,
                ) {
                    if depth == plan.candidates.len() {
                        out.push(binding.clone());
                        return;
                    }
                    for &o in &plan.candidates[depth] {
                        binding.push(o);
                        if plan.checks_at[depth].iter().all(|&pi| check(pi, binding)) {
                            enumerate(depth + 1, binding, out, plan, check);
                        }
                        binding.pop();
                    }
                }
                let check = |pi: usize, b: &[ObjId]| {
                    is_reached(&instantiate(&schema.preconditions[pi], b), &interner, &reached)
                };
                enumerate(0, &mut binding, &mut bindings, plan, &check);
                for b in bindings {
                    let key = (si, b);
                    if found_index.contains_key(&key) {
                        continue;
                    }
                    for add in &schema.add_effects {
                        let id = interner.intern(instantiate(add, &key.1));
                        if id.index() >= reached.len() {
                            reached.resize(id.index() + 1, false);
                        }
                        reached[id.index()] = true;
                    }
                    found_index.insert(key.clone(), ());
                    found.push(key);
                    changed = true;
                }
            }
            if !changed {
                break;
            }
        }

        found.sort_by(|(sa, aa), (sb, ab)| {
            dom.action_schemas[*sa]
                .name
                .cmp(&dom.action_schemas[*sb].name)
                .then_with(|| aa.cmp(ab))
        });
        let mut actions = Vec::with_capacity(found.len());
        let mut action_index = HashMap::new();
        for (i, (si, args)) in found.into_iter().enumerate() {
            let schema = &dom.action_schemas[si];
            let mut pre: Vec<AtomId> = schema
                .preconditions
                .iter()
                .map(|p| interner.intern(instantiate(p, &args)))
                .collect();
            let mut add: Vec<AtomId> = schema
                .add_effects
                .iter()
                .map(|p| interner.intern(instantiate(p, &args)))
                .collect();
            let mut del: Vec<AtomId> = schema
                .del_effects
                .iter()
                .map(|p| interner.intern(instantiate(p, &args)))
                .collect();
            for v in [&mut pre, &mut add, &mut del] {
                v.sort();
                v.dedup();
            }
            del.retain(|d| !add.contains(d));
            let id = ActionId(i as u32);
            action_index.insert((si, args.clone()), id);
            actions.push(GroundAction {
                id,
                schema: si,
                args,
                pre,
                add,
                del,
            });
        }

        let n_atoms = interner.atoms.len();
        let mut achievers = vec![Vec::new(); n_atoms];
        let mut precondition_of = vec![Vec::new(); n_atoms];
        for a in &actions {
            for &p in &a.add {
                achievers[p.index()].push(a.id);
            }
            for &p in &a.pre {
                precondition_of[p.index()].push(a.id);
            }
        }
        let mut atoms_by_predicate = vec![Vec::new(); dom.predicates.len()];
        for (i, a) in interner.atoms.iter().enumerate() {
            atoms_by_predicate[a.predicate].push(AtomId(i as u32));
        }
        let mut goal = goal_ids;
        goal.sort();
        goal.dedup();

        GroundProblem {
            init: State::from_atoms(n_atoms, init_ids),
            goal,
            domain: dom,
            problem: prob,
            objects,
            object_index,
            objects_of_type,
            atoms: interner.atoms,
            atom_index: interner.index,
            atoms_by_predicate,
            actions,
            action_index,
            achievers,
            precondition_of,
        }
    }

    /// Convenience wrapper over owned models.
    pub fn from_models(dom: DomainModel, prob: ProblemModel) -> Self {
        GroundProblem::new(Arc::new(dom), Arc::new(prob))
    }

    pub fn name(&self) -> &str {
        self.problem.name.as_str()
    }

    pub fn n_atoms(&self) -> usize {
        self.atoms.len()
    }

    pub fn atoms(&self) -> &[GroundAtom] {
        &self.atoms
    }

    pub fn atom(&self, id: AtomId) -> &GroundAtom {
        &self.atoms[id.index()]
    }

    pub fn atom_id(&self, atom: &GroundAtom) -> Option<AtomId> {
        self.atom_index.get(atom).copied()
    }

    pub fn atoms_with_predicate(&self, predicate: usize) -> &[AtomId] {
        &self.atoms_by_predicate[predicate]
    }

    pub fn actions(&self) -> &[GroundAction] {
        &self.actions
    }

    pub fn action(&self, id: ActionId) -> &GroundAction {
        &self.actions[id.index()]
    }

    pub fn action_id(&self, schema: usize, args: &[ObjId]) -> Option<ActionId> {
        self.action_index.get(&(schema, args.to_vec())).copied()
    }

    /// Actions that add `atom`.
    pub fn achievers(&self, atom: AtomId) -> &[ActionId] {
        &self.achievers[atom.index()]
    }

    /// Actions that require `atom`.
    pub fn consumers(&self, atom: AtomId) -> &[ActionId] {
        &self.precondition_of[atom.index()]
    }

    pub fn objects(&self) -> &[ObjectInfo] {
        &self.objects
    }

    pub fn object(&self, id: ObjId) -> &ObjectInfo {
        &self.objects[id.index()]
    }

    pub fn object_id(&self, name: &str) -> Option<ObjId> {
        self.object_index.get(&name.to_ascii_lowercase()).copied()
    }

    /// Objects belonging to the domain type with index `ty` (subtypes included).
    pub fn objects_of_type(&self, ty: usize) -> &[ObjId] {
        &self.objects_of_type[ty]
    }

    pub fn init(&self) -> &State {
        &self.init
    }

    pub fn goal(&self) -> &[AtomId] {
        &self.goal
    }

    pub fn empty_state(&self) -> State {
        State::empty(self.n_atoms())
    }

    /// Looks up an atom from its predicate name and object names.
    pub fn lookup_atom(&self, predicate: &str, args: &[&str]) -> Option<AtomId> {
        let p = self.domain.predicate_index(predicate)?;
        let args = args
            .iter()
            .map(|a| self.object_id(a))
            .collect::<Option<Vec<_>>>()?;
        self.atom_id(&GroundAtom { predicate: p, args })
    }

    /// Parses `(pred a b)` into an interned atom id.
    pub fn parse_atom(&self, text: &str) -> Result<AtomId, GroundError> {
        let words = split_call(text).ok_or_else(|| GroundError::UnknownAtom(text.to_string()))?;
        let (head, args) = words.split_first().ok_or_else(|| GroundError::UnknownAtom(text.to_string()))?;
        self.lookup_atom(head, args)
            .ok_or_else(|| GroundError::UnknownAtom(text.to_string()))
    }

    pub fn atom_text(&self, id: AtomId) -> String {
        let atom = self.atom(id);
        let mut s = format!("({}", self.domain.predicates[atom.predicate].name);
        for o in &atom.args {
            s.push(' ');
            s.push_str(self.object(*o).name.as_str());
        }
        s.push(')');
        s
    }

    /// `(!Name a b)`
    pub fn action_text(&self, id: ActionId) -> String {
        let a = self.action(id);
        let mut s = format!("(!{}", self.domain.action_schemas[a.schema].name);
        for o in &a.args {
            s.push(' ');
            s.push_str(self.object(*o).name.as_str());
        }
        s.push(')');
        s
    }

    pub fn state_text(&self, s: &State) -> Vec<String> {
        let mut v: Vec<String> = s.atoms().map(|a| self.atom_text(a)).collect();
        v.sort();
        v
    }

    /// Resolves `(!name a b)` (the `!` is optional) to a ground action.
    pub fn parse_action(&self, text: &str) -> Option<ActionId> {
        let words = split_call(text)?;
        let (head, args) = words.split_first()?;
        let schema = self.domain.action_index(head.trim_start_matches('!'))?;
        let args = args
            .iter()
            .map(|a| self.object_id(a))
            .collect::<Option<Vec<_>>>()?;
        self.action_id(schema, &args)
    }

    pub fn is_applicable(&self, s: &State, a: ActionId) -> bool {
        s.contains_all(&self.action(a).pre)
    }

    /// Successor state; `None` when a precondition is missing.
    pub fn successor(&self, s: &State, a: ActionId) -> Option<State> {
        let act = self.action(a);
        if !s.contains_all(&act.pre) {
            return None;
        }
        let mut next = s.clone();
        for &d in &act.del {
            next.remove(d);
        }
        for &p in &act.add {
            next.insert(p);
        }
        Some(next)
    }
}

/// Splits `(a b c)` into words.
fn split_call(text: &str) -> Option<Vec<&str>> {
    let t = text.trim();
    let inner = t.strip_prefix('(')?.strip_suffix(')')?;
    let words: Vec<&str> = inner.split_whitespace().collect();
    if words.is_empty() {
        None
    } else {
        Some(words)
    }
}

/// γ(s, a) = (s \ del(a)) ∪ add(a).
pub fn gamma_apply(gp: &GroundProblem, s: &State, a: ActionId) -> Result<State, GroundError> {
    gp.successor(s, a).ok_or_else(|| GroundError::Inapplicable {
        action: gp.action_text(a),
    })
}

/// Executes `plan` from `start` and returns the full trajectory ⟨s0, …, sn⟩;
/// fails on the first inapplicable step (1-based) or if `goal` does not hold at the end.
pub fn validate_from(
    gp: &GroundProblem,
    start: &State,
    plan: &[ActionId],
    goal: &[AtomId],
) -> Result<Vec<State>, GroundError> {
    let mut trajectory = Vec::with_capacity(plan.len() + 1);
    trajectory.push(start.clone());
    for (k, &a) in plan.iter().enumerate() {
        let next = gp
            .successor(trajectory.last().unwrap(), a)
            .ok_or_else(|| GroundError::StepInapplicable {
                step: k + 1,
                action: gp.action_text(a),
            })?;
        trajectory.push(next);
    }
    let last = trajectory.last().unwrap();
    let missing: Vec<String> = goal
        .iter()
        .filter(|&&g| !last.contains(g))
        .map(|&g| gp.atom_text(g))
        .collect();
    if !missing.is_empty() {
        return Err(GroundError::GoalNotAchieved { missing });
    }
    Ok(trajectory)
}

/// Validates `plan` from the problem's initial state.
pub fn validate_plan(gp: &GroundProblem, plan: &[ActionId], goal: &[AtomId]) -> Result<Vec<State>, GroundError> {
    validate_from(gp, gp.init(), plan, goal)
}

/// Renders a plan file: one `(!name args)` per line.
pub fn format_plan(gp: &GroundProblem, plan: &[ActionId]) -> String {
    let mut s = String::new();
    for &a in plan {
        s.push_str(&gp.action_text(a));
        s.push('\n');
    }
    s
}

/// Parses a plan file; blank lines and `;` comments are skipped.
pub fn parse_plan(gp: &GroundProblem, text: &str) -> Result<Vec<ActionId>, GroundError> {
    let mut plan = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split(';').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let a = gp.parse_action(line).ok_or_else(|| GroundError::UnknownAction {
            line: i + 1,
            text: line.to_string(),
        })?;
        plan.push(a);
    }
    Ok(plan)
}

/// Atoms reachable from `from` under delete relaxation, ignoring actions for
/// which `excluded` returns true.
pub fn relaxed_reachable(gp: &GroundProblem, from: &State, excluded: &dyn Fn(ActionId) -> bool) -> FixedBitSet {
    let mut reached = FixedBitSet::with_capacity(gp.n_atoms());
    let mut pending: Vec<usize> = gp.actions().iter().map(|a| a.pre.len()).collect();
    let mut queue: Vec<AtomId> = Vec::new();
    for a in from.atoms() {
        reached.insert(a.index());
        queue.push(a);
    }
    let fire = |a: &GroundAction, reached: &mut FixedBitSet, queue: &mut Vec<AtomId>| {
        for &p in &a.add {
            if !reached.contains(p.index()) {
                reached.insert(p.index());
                queue.push(p);
            }
        }
    };
    for a in gp.actions() {
        if a.pre.is_empty() && !excluded(a.id) {
            fire(a, &mut reached, &mut queue);
        }
    }
    while let Some(p) = queue.pop() {
        for &aid in gp.consumers(p) {
            let slot = &mut pending[aid.index()];
            *slot -= 1;
            if *slot == 0 && !excluded(aid) {
                fire(gp.action(aid), &mut reached, &mut queue);
            }
        }
    }
    reached
}
