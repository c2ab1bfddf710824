//! Method learning by hierarchical goal regression over curriculum subtraces.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::curricula::{Curriculum, PlanTrace};
use crate::ground::{AtomId, GroundProblem, ObjId};
use crate::pddl::{DomainModel, Name};
use crate::task::{var_name, LiftedAtom, Param, TaskError, TaskInstance, TaskJson, TaskTable};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LearnError {
    #[error("curriculum step {index} spans [{begin}, {end}] but the trace has {len} actions")]
    TraceMismatch {
        index: usize,
        begin: usize,
        end: usize,
        len: usize,
    },
    #[error(transparent)]
    Task(#[from] TaskError),
    #[error("malformed library: {0}")]
    Library(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum SubtaskKind {
    /// Index of an action schema.
    Primitive(usize),
    Task(Name),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Subtask {
    pub kind: SubtaskKind,
    pub args: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Provenance {
    pub problem: String,
    /// 1-based curriculum step; `None` for trivial methods.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub step: Option<usize>,
    pub begin: usize,
    pub end: usize,
    pub training_ordinal: usize,
}

/// Lifted decomposition rule. All variables live in `vars`; `head` lists the
/// variables bound by the task arguments.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Method {
    pub id: usize,
    pub task: Name,
    pub head: Vec<usize>,
    pub vars: Vec<Param>,
    pub preconditions: Vec<LiftedAtom>,
    pub subtasks: Vec<Subtask>,
    pub provenance: Provenance,
}

impl Method {
    pub fn is_trivial(&self) -> bool {
        self.subtasks.is_empty()
    }

    /// Ground preconditions under a full binding; `None` if some atom is not
    /// part of the grounding.
    pub fn ground_preconditions(&self, gp: &GroundProblem, binding: &[ObjId]) -> Option<Vec<AtomId>> {
        self.preconditions.iter().map(|p| p.ground(gp, binding)).collect()
    }

    pub fn head_text(&self) -> String {
        let args: Vec<String> = self.head.iter().map(|&v| self.vars[v].var.to_string()).collect();
        format!("({} {})", self.task, args.join(" "))
    }
}

/// A learned method applied to a subtrace `[begin, end]` of the current trace.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IndexedMethodInstance {
    pub method: usize,
    pub task: TaskInstance,
    pub binding: Vec<ObjId>,
    pub begin: usize,
    pub end: usize,
    /// Per subtask, the instance that covered it (`None` for primitives).
    pub children: Vec<Option<usize>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
struct Signature {
    task: String,
    head: usize,
    vars: usize,
    preconditions: Vec<usize>,
    subtasks: Vec<(SubtaskKind, usize)>,
}

fn signature(m: &Method) -> Signature {
    let mut preconditions: Vec<usize> = m.preconditions.iter().map(|p| p.predicate).collect();
    preconditions.sort_unstable();
    Signature {
        task: m.task.key().to_string(),
        head: m.head.len(),
        vars: m.vars.len(),
        preconditions,
        subtasks: m.subtasks.iter().map(|s| (s.kind.clone(), s.args.len())).collect(),
    }
}

/// Variable map `a → b` under which the two methods coincide, if any.
pub fn find_renaming(a: &Method, b: &Method) -> Option<Vec<usize>> {
    if a.task != b.task
        || a.head.len() != b.head.len()
        || a.vars.len() != b.vars.len()
        || a.preconditions.len() != b.preconditions.len()
        || a.subtasks.len() != b.subtasks.len()
    {
        return None;
    }
    let n = a.vars.len();
    let mut map = Renaming {
        fwd: vec![None; n],
        bwd: vec![None; n],
    };
    let bind_all = |map: &mut Renaming, xs: &[usize], ys: &[usize]| {
        xs.len() == ys.len() && xs.iter().zip(ys).all(|(&x, &y)| map.bind(a, b, x, y))
    };
    if !bind_all(&mut map, &a.head, &b.head) {
        return None;
    }
    for (sa, sb) in a.subtasks.iter().zip(&b.subtasks) {
        if sa.kind != sb.kind || !bind_all(&mut map, &sa.args, &sb.args) {
            return None;
        }
    }
    let mut used = vec![false; b.preconditions.len()];
    if !match_preconditions(a, b, 0, &mut used, &mut map) {
        return None;
    }
    map.fwd.into_iter().collect()
}

#[derive(Clone)]
struct Renaming {
    fwd: Vec<Option<usize>>,
    bwd: Vec<Option<usize>>,
}

impl Renaming {
    fn bind(&mut self, a: &Method, b: &Method, x: usize, y: usize) -> bool {
        match (self.fwd[x], self.bwd[y]) {
            (Some(fy), _) => fy == y,
            (None, Some(_)) => false,
            (None, None) => {
                if a.vars[x].ty != b.vars[y].ty {
                    return false;
                }
                self.fwd[x] = Some(y);
                self.bwd[y] = Some(x);
                true
            }
        }
    }
}

fn match_preconditions(a: &Method, b: &Method, k: usize, used: &mut [bool], map: &mut Renaming) -> bool {
    if k == a.preconditions.len() {
        return true;
    }
    let pa = &a.preconditions[k];
    for j in 0..b.preconditions.len() {
        let pb = &b.preconditions[j];
        if used[j] || pb.predicate != pa.predicate {
            continue;
        }
        let saved = map.clone();
        if pa.args.iter().zip(&pb.args).all(|(&x, &y)| map.bind(a, b, x, y)) {
            used[j] = true;
            if match_preconditions(a, b, k + 1, used, map) {
                return true;
            }
            used[j] = false;
        }
        *map = saved;
    }
    false
}

/// True when a bijective, type-preserving variable renaming maps `a` onto `b`.
pub fn rename_equivalent(a: &Method, b: &Method) -> bool {
    find_renaming(a, b).is_some()
}

/// Methods in insertion order, with the task definitions they refer to.
#[derive(Debug, Clone, Default)]
pub struct MethodLibrary {
    pub tasks: TaskTable,
    methods: Vec<Method>,
    by_task: HashMap<String, Vec<usize>>,
    buckets: HashMap<Signature, Vec<usize>>,
}

impl PartialEq for MethodLibrary {
    fn eq(&self, other: &Self) -> bool {
        self.tasks == other.tasks && self.methods == other.methods
    }
}

/// Where a candidate method ended up.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Added {
    New(usize),
    /// Equivalent to an existing method; carries its id.
    Existing(usize),
}

impl MethodLibrary {
    pub fn methods(&self) -> &[Method] {
        &self.methods
    }

    pub fn len(&self) -> usize {
        self.methods.len()
    }

    pub fn is_empty(&self) -> bool {
        self.methods.is_empty()
    }

    pub fn method(&self, id: usize) -> &Method {
        &self.methods[id]
    }

    /// Methods for a task, in insertion order.
    pub fn methods_for<'a>(&'a self, task: &str) -> impl Iterator<Item = &'a Method> + 'a {
        self.by_task
            .get(&task.to_ascii_lowercase())
            .into_iter()
            .flatten()
            .map(move |&i| &self.methods[i])
    }

    /// Finds an equivalent stored method and the renaming onto it.
    pub fn find_equivalent(&self, m: &Method) -> Option<(usize, Vec<usize>)> {
        self.buckets
            .get(&signature(m))?
            .iter()
            .find_map(|&i| find_renaming(m, &self.methods[i]).map(|r| (i, r)))
    }

    /// Stores `m` under the next id unless an equivalent method exists.
    pub fn add(&mut self, mut m: Method) -> (Added, Option<Vec<usize>>) {
        if let Some((id, renaming)) = self.find_equivalent(&m) {
            return (Added::Existing(id), Some(renaming));
        }
        let id = self.methods.len();
        m.id = id;
        self.by_task.entry(m.task.key().to_string()).or_default().push(id);
        self.buckets.entry(signature(&m)).or_default().push(id);
        self.methods.push(m);
        (Added::New(id), None)
    }

    /// Order-preserving union; returns how many methods were new.
    pub fn merge(&mut self, other: &MethodLibrary) -> Result<usize, LearnError> {
        for t in other.tasks.tasks() {
            self.tasks.insert(t.clone())?;
        }
        let mut added = 0;
        for m in &other.methods {
            if let (Added::New(_), _) = self.add(m.clone()) {
                added += 1;
            }
        }
        Ok(added)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SkipReason {
    GoalsNotHeld,
    /// A regressed atom is deleted by an earlier subtask.
    Inconsistent,
    RepeatedArguments,
    UnknownAtom,
}

/// A method learned from one subtrace before deduplication.
#[derive(Debug, Clone)]
pub struct Candidate {
    pub method: Method,
    pub binding: Vec<ObjId>,
    pub children: Vec<Option<usize>>,
}

enum Cover {
    Prim(crate::ground::ActionId),
    Inst(usize),
}

/// Learns one method for `task` over the subtrace `[b, e]` (empty when `b > e`).
///
/// The span is covered left to right by the longest indexed instance that
/// starts at the current position and ends by `e` (earliest learned on ties;
/// the exact span `[b, e]` itself is excluded), falling back to primitive
/// actions. The task goals are then regressed backwards through the cover.
/// An instance is relied on for its task goals only and contributes its
/// method's preconditions; any other regressed atom must hold both before
/// and after its subtrace, otherwise the instance is dropped from the cover
/// and the cover is rebuilt. Finally every object becomes a typed variable:
/// head arguments first, then subtask arguments, then the rest.
pub fn learn_method(
    gp: &GroundProblem,
    trace: &PlanTrace,
    tasks: &TaskTable,
    task: &TaskInstance,
    x: &[IndexedMethodInstance],
    lib: &MethodLibrary,
    b: usize,
    e: usize,
) -> Result<Candidate, SkipReason> {
    let goals = tasks
        .ground_goals(gp, task)
        .map_err(|_| SkipReason::UnknownAtom)?
        .ok_or(SkipReason::GoalsNotHeld)?;
    if !trace.state(e).contains_all(&goals) {
        return Err(SkipReason::GoalsNotHeld);
    }
    for (i, a) in task.args.iter().enumerate() {
        if task.args[..i].contains(a) {
            return Err(SkipReason::RepeatedArguments);
        }
    }

    // An indexed instance only promises its task's goals. One whose other
    // effects the rest of the cover would rely on is banned and the cover is
    // rebuilt without it.
    let mut banned: HashSet<usize> = HashSet::new();
    let (cover, r) = 'cover: loop {
        let mut cover = Vec::new();
        let mut p = b;
        while p <= e {
            let best = x
                .iter()
                .enumerate()
                .filter(|(i, m)| {
                    m.begin == p && m.end <= e && m.begin <= m.end && (m.begin, m.end) != (b, e) && !banned.contains(i)
                })
                .fold(None::<(usize, usize)>, |acc, (i, m)| match acc {
                    Some((_, end)) if end >= m.end => acc,
                    _ => Some((i, m.end)),
                });
            match best {
                Some((i, end)) => {
                    cover.push(Cover::Inst(i));
                    p = end + 1;
                }
                None => {
                    cover.push(Cover::Prim(trace.action(p)));
                    p += 1;
                }
            }
        }

        let mut r: BTreeSet<AtomId> = goals.iter().copied().collect();
        for c in cover.iter().rev() {
            match *c {
                Cover::Prim(a) => {
                    let act = gp.action(a);
                    if act.del.iter().any(|d| r.contains(d) && !act.add.contains(d)) {
                        return Err(SkipReason::Inconsistent);
                    }
                    for q in &act.add {
                        r.remove(q);
                    }
                    r.extend(act.pre.iter().copied());
                }
                Cover::Inst(i) => {
                    let inst = &x[i];
                    let child_goals = tasks
                        .ground_goals(gp, &inst.task)
                        .ok()
                        .flatten()
                        .ok_or(SkipReason::UnknownAtom)?;
                    let before = trace.state(inst.begin - 1);
                    let after = trace.state(inst.end);
                    r.retain(|q| !child_goals.contains(q));
                    if r.iter().any(|&q| !before.contains(q) || !after.contains(q)) {
                        banned.insert(i);
                        continue 'cover;
                    }
                    let pre = lib
                        .method(inst.method)
                        .ground_preconditions(gp, &inst.binding)
                        .ok_or(SkipReason::UnknownAtom)?;
                    r.extend(pre);
                }
            }
        }
        break (cover, r);
    };

    // lifting
    let mut vars: Vec<Param> = Vec::new();
    let mut var_of: HashMap<ObjId, usize> = HashMap::new();
    let mut binding: Vec<ObjId> = Vec::new();
    let mut lift = |o: ObjId, vars: &mut Vec<Param>, binding: &mut Vec<ObjId>| -> usize {
        *var_of.entry(o).or_insert_with(|| {
            let i = vars.len();
            vars.push(Param {
                var: var_name(i),
                ty: gp.object(o).ty.clone(),
            });
            binding.push(o);
            i
        })
    };
    let head: Vec<usize> = task.args.iter().map(|&o| lift(o, &mut vars, &mut binding)).collect();
    let mut subtasks = Vec::with_capacity(cover.len());
    let mut children = Vec::with_capacity(cover.len());
    for c in &cover {
        let (kind, args, child) = match *c {
            Cover::Prim(a) => {
                let act = gp.action(a);
                (SubtaskKind::Primitive(act.schema), act.args.clone(), None)
            }
            Cover::Inst(i) => (SubtaskKind::Task(x[i].task.name.clone()), x[i].task.args.clone(), Some(i)),
        };
        subtasks.push(Subtask {
            kind,
            args: args.into_iter().map(|o| lift(o, &mut vars, &mut binding)).collect(),
        });
        children.push(child);
    }
    let mut ground_pre: Vec<AtomId> = r.into_iter().collect();
    ground_pre.sort_by_cached_key(|&q| gp.atom_text(q));
    let mut preconditions: Vec<LiftedAtom> = ground_pre
        .iter()
        .map(|&q| {
            let ga = gp.atom(q);
            LiftedAtom {
                predicate: ga.predicate,
                args: ga.args.iter().map(|&o| lift(o, &mut vars, &mut binding)).collect(),
            }
        })
        .collect();
    preconditions.sort();

    Ok(Candidate {
        method: Method {
            id: usize::MAX,
            task: task.name.clone(),
            head,
            vars,
            preconditions,
            subtasks,
            provenance: Provenance {
                problem: gp.name().to_string(),
                step: None,
                begin: b,
                end: e,
                training_ordinal: 0,
            },
        },
        binding,
        children,
    })
}

#[derive(Debug, Clone, Default)]
pub struct LearnReport {
    pub instances: Vec<IndexedMethodInstance>,
    pub new_methods: Vec<usize>,
    pub duplicates: usize,
    pub skipped: Vec<(Option<usize>, SkipReason)>,
}

/// Runs the learner over a curriculum, growing `lib`. Trivial entries are
/// learned first, then the steps in order; each learned (or rediscovered)
/// method is indexed by its span for reuse by later steps.
pub fn curriculearn(
    gp: &GroundProblem,
    trace: &PlanTrace,
    curriculum: &Curriculum,
    lib: &mut MethodLibrary,
    training_ordinal: usize,
) -> Result<LearnReport, LearnError> {
    for (index, s) in curriculum.steps.iter().enumerate() {
        if s.begin < 1 || s.begin > s.end || s.end > trace.len() {
            return Err(LearnError::TraceMismatch {
                index,
                begin: s.begin,
                end: s.end,
                len: trace.len(),
            });
        }
    }
    for (index, t) in curriculum.trivial.iter().enumerate() {
        if t.at > trace.len() {
            return Err(LearnError::TraceMismatch {
                index,
                begin: t.at + 1,
                end: t.at,
                len: trace.len(),
            });
        }
    }
    for s in curriculum.steps.iter().map(|s| &s.task).chain(curriculum.trivial.iter().map(|t| &t.task)) {
        lib.tasks.resolve(gp, s.name.as_str())?;
    }

    let mut report = LearnReport::default();
    let work = curriculum
        .trivial
        .iter()
        .map(|t| (None, t.at + 1, t.at, &t.task))
        .chain(
            curriculum
                .steps
                .iter()
                .enumerate()
                .map(|(i, s)| (Some(i + 1), s.begin, s.end, &s.task)),
        );
    for (step, b, e, task) in work {
        let cand = match learn_method(gp, trace, &lib.tasks, task, &report.instances, lib, b, e) {
            Ok(c) => c,
            Err(reason) => {
                log::debug!("step {step:?} [{b}, {e}] {}: skipped ({reason:?})", task.text(gp));
                report.skipped.push((step, reason));
                continue;
            }
        };
        let mut method = cand.method;
        method.provenance.step = step;
        method.provenance.training_ordinal = training_ordinal;
        let (added, renaming) = lib.add(method);
        let (id, binding) = match added {
            Added::New(id) => {
                report.new_methods.push(id);
                (id, cand.binding)
            }
            Added::Existing(id) => {
                report.duplicates += 1;
                let renaming = renaming.expect("duplicates carry a renaming");
                let mut binding = cand.binding.clone();
                for (i, &j) in renaming.iter().enumerate() {
                    binding[j] = cand.binding[i];
                }
                (id, binding)
            }
        };
        if b <= e {
            report.instances.push(IndexedMethodInstance {
                method: id,
                task: task.clone(),
                binding,
                begin: b,
                end: e,
                children: cand.children,
            });
        }
    }
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HeadJson {
    pub name: String,
    pub params: Vec<Param>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubtaskJson {
    pub kind: String,
    pub name: String,
    pub args: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MethodJson {
    pub id: usize,
    pub head: HeadJson,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub variables: Vec<Param>,
    pub preconditions: Vec<String>,
    pub subtasks: Vec<SubtaskJson>,
    pub provenance: Provenance,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LibraryJson {
    pub domain: String,
    pub tasks: Vec<TaskJson>,
    pub methods: Vec<MethodJson>,
}

impl MethodLibrary {
    pub fn to_json(&self, dom: &DomainModel) -> LibraryJson {
        let methods = self
            .methods
            .iter()
            .map(|m| {
                let var = |v: usize| m.vars[v].var.to_string();
                MethodJson {
                    id: m.id,
                    head: HeadJson {
                        name: m.task.to_string(),
                        params: m.head.iter().map(|&v| m.vars[v].clone()).collect(),
                    },
                    variables: (0..m.vars.len())
                        .filter(|v| !m.head.contains(v))
                        .map(|v| m.vars[v].clone())
                        .collect(),
                    preconditions: m.preconditions.iter().map(|p| p.text(dom, &m.vars)).collect(),
                    subtasks: m
                        .subtasks
                        .iter()
                        .map(|s| {
                            let (kind, name) = match &s.kind {
                                SubtaskKind::Primitive(i) => ("primitive", dom.action_schemas[*i].name.to_string()),
                                SubtaskKind::Task(n) => ("task", n.to_string()),
                            };
                            SubtaskJson {
                                kind: kind.into(),
                                name,
                                args: s.args.iter().map(|&v| var(v)).collect(),
                            }
                        })
                        .collect(),
                    provenance: m.provenance.clone(),
                }
            })
            .collect();
        LibraryJson {
            domain: dom.name.to_string(),
            tasks: {
                // by name, so the file does not depend on task creation order
                let mut t = self.tasks.to_json(dom);
                t.sort_by(|a, b| a.name.cmp(&b.name));
                t
            },
            methods,
        }
    }

    /// Loads a library; methods are re-added in id order, so ids are kept.
    pub fn from_json(json: &LibraryJson, dom: &DomainModel) -> Result<Self, LearnError> {
        let mut lib = MethodLibrary {
            tasks: TaskTable::from_json(&json.tasks, dom)?,
            ..MethodLibrary::default()
        };
        let mut sorted: Vec<&MethodJson> = json.methods.iter().collect();
        sorted.sort_by_key(|m| m.id);
        for (expected, mj) in sorted.into_iter().enumerate() {
            if mj.id != expected {
                return Err(LearnError::Library(format!("method ids must be 0..n, found {}", mj.id)));
            }
            let vars: Vec<Param> = mj.head.params.iter().chain(&mj.variables).cloned().collect();
            let find = |v: &str| {
                vars.iter()
                    .position(|p| p.var.key() == v.to_ascii_lowercase())
                    .ok_or_else(|| LearnError::Library(format!("method {}: unknown variable {v}", mj.id)))
            };
            let preconditions = mj
                .preconditions
                .iter()
                .map(|t| LiftedAtom::parse(t, dom, &vars))
                .collect::<Result<Vec<_>, _>>()?;
            let mut subtasks = Vec::new();
            for s in &mj.subtasks {
                let kind = match s.kind.as_str() {
                    "primitive" => SubtaskKind::Primitive(
                        dom.action_index(&s.name)
                            .ok_or_else(|| LearnError::Library(format!("unknown action {}", s.name)))?,
                    ),
                    "task" => SubtaskKind::Task(Name::new(&s.name)),
                    other => return Err(LearnError::Library(format!("unknown subtask kind {other}"))),
                };
                subtasks.push(Subtask {
                    kind,
                    args: s.args.iter().map(|a| find(a)).collect::<Result<_, _>>()?,
                });
            }
            let m = Method {
                id: mj.id,
                task: Name::new(&mj.head.name),
                head: (0..mj.head.params.len()).collect(),
                vars,
                preconditions,
                subtasks,
                provenance: mj.provenance.clone(),
            };
            if let (Added::Existing(other), _) = lib.add(m) {
                return Err(LearnError::Library(format!("method {} duplicates method {other}", mj.id)));
            }
        }
        Ok(lib)
    }

    /// Human-readable SHOP-style listing.
    pub fn to_shop(&self, dom: &DomainModel) -> String {
        let mut out = String::new();
        for m in &self.methods {
            let var = |v: usize| m.vars[v].var.to_string();
            let _ = writeln!(out, "(:method {}", m.head_text());
            let _ = writeln!(out, "  method-{}", m.id);
            let pre: Vec<String> = m.preconditions.iter().map(|p| p.text(dom, &m.vars)).collect();
            let _ = writeln!(out, "  ({})", pre.join(" "));
            let subs: Vec<String> = m
                .subtasks
                .iter()
                .map(|s| {
                    let name = match &s.kind {
                        SubtaskKind::Primitive(i) => format!("!{}", dom.action_schemas[*i].name),
                        SubtaskKind::Task(n) => n.to_string(),
                    };
                    let args: Vec<String> = s.args.iter().map(|&v| var(v)).collect();
                    if args.is_empty() {
                        format!("({name})")
                    } else {
                        format!("({name} {})", args.join(" "))
                    }
                })
                .collect();
            let _ = writeln!(out, "  ({}))", subs.join(" "));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curricula::{curricugen, CurriculumConfig};
    use crate::gen::{blocks_domain, tower4_problem};

    fn tower4_run() -> (GroundProblem, crate::curricula::GeneratedCurriculum, MethodLibrary, LearnReport) {
        let dom = blocks_domain();
        let p = tower4_problem(&dom);
        let gp = GroundProblem::from_models(dom, p);
        let mut lib = MethodLibrary::default();
        let gen = curricugen(&gp, &CurriculumConfig::default(), &mut lib.tasks).unwrap();
        let report = curriculearn(&gp, &gen.trace, &gen.curriculum, &mut lib, 1).unwrap();
        (gp, gen, lib, report)
    }

    fn shop(lib: &MethodLibrary, gp: &GroundProblem, id: usize) -> String {
        let all = lib.to_shop(&gp.domain);
        all.split("(:method")
            .filter(|s| !s.is_empty())
            .nth(id)
            .unwrap()
            .to_string()
    }

    #[test]
    fn first_step_learns_unstack_method() {
        let (gp, _, lib, report) = tower4_run();
        let m1 = lib.method(0);
        assert_eq!(m1.provenance.step, Some(1));
        assert_eq!(m1.subtasks.len(), 1);
        assert_eq!(m1.subtasks[0].kind, SubtaskKind::Primitive(gp.domain.action_index("Unstack").unwrap()));
        // head variable is the unstacked-from block
        assert_eq!(m1.subtasks[0].args[1], m1.head[0]);
        let pre: Vec<String> = m1.preconditions.iter().map(|p| p.text(&gp.domain, &m1.vars)).collect();
        assert_eq!(pre.len(), 3);
        assert!(pre.contains(&"(hand-empty)".to_string()));
        // regression soundness at the source span
        let inst = &report.instances[0];
        let ground = m1.ground_preconditions(&gp, &inst.binding).unwrap();
        assert!(gp.init().contains_all(&ground));
    }

    #[test]
    fn later_steps_reuse_earlier_methods() {
        let (gp, _, lib, report) = tower4_run();
        // step (1,3): the [1,1] instance only promises (clear C) but the rest
        // needs (holding D), so Unstack stays primitive before Achieve-clear(B)
        let step4 = report
            .instances
            .iter()
            .find(|i| (i.begin, i.end) == (1, 3))
            .unwrap();
        let m2 = lib.method(step4.method);
        let kinds: Vec<bool> = m2.subtasks.iter().map(|s| matches!(s.kind, SubtaskKind::Task(_))).collect();
        assert_eq!(kinds, vec![false, true]);
        let c = step4.children[1].unwrap();
        assert_eq!((report.instances[c].begin, report.instances[c].end), (2, 3));
        assert_eq!(lib.method(report.instances[0].method).subtasks.len(), 1);
        let step9 = report
            .instances
            .iter()
            .find(|i| (i.begin, i.end) == (1, 5))
            .unwrap();
        let m3 = lib.method(step9.method);
        assert!(matches!(m3.subtasks[1].kind, SubtaskKind::Task(_)));
        let c = step9.children[1].unwrap();
        assert_eq!((report.instances[c].begin, report.instances[c].end), (2, 5));
        // same subtask shape, stronger preconditions
        assert!(m3.preconditions.len() > m2.preconditions.len());
        assert!(!rename_equivalent(m2, m3));
        let _ = shop(&lib, &gp, 0);
    }

    #[test]
    fn relearning_adds_nothing() {
        let (gp, gen, mut lib, _) = tower4_run();
        let before = lib.clone();
        let again = curriculearn(&gp, &gen.trace, &gen.curriculum, &mut lib, 2).unwrap();
        assert!(again.new_methods.is_empty());
        assert_eq!(lib, before);
    }

    #[test]
    fn empty_curriculum_keeps_library() {
        let (gp, gen, mut lib, _) = tower4_run();
        let before = lib.clone();
        let empty = Curriculum::default();
        curriculearn(&gp, &gen.trace, &empty, &mut lib, 3).unwrap();
        assert_eq!(lib, before);
    }

    #[test]
    fn renaming_detects_swaps() {
        let (_, _, lib, _) = tower4_run();
        for m in lib.methods() {
            assert!(rename_equivalent(m, m));
            let n = m.vars.len();
            if n < 2 {
                continue;
            }
            // permute the last two variables everywhere
            let perm = |v: usize| if v == n - 1 { n - 2 } else if v == n - 2 { n - 1 } else { v };
            let mut swapped = m.clone();
            swapped.vars.swap(n - 1, n - 2);
            swapped.head = m.head.iter().map(|&v| perm(v)).collect();
            for p in &mut swapped.preconditions {
                p.args = p.args.iter().map(|&v| perm(v)).collect();
            }
            for s in &mut swapped.subtasks {
                s.args = s.args.iter().map(|&v| perm(v)).collect();
            }
            assert!(rename_equivalent(m, &swapped));
        }
    }

    #[test]
    fn json_round_trip_keeps_ids() {
        let (gp, _, lib, _) = tower4_run();
        let json = lib.to_json(&gp.domain);
        let text = serde_json::to_string(&json).unwrap();
        let back = MethodLibrary::from_json(&serde_json::from_str(&text).unwrap(), &gp.domain).unwrap();
        assert_eq!(back, lib);
    }

    #[test]
    fn trivial_method_for_empty_span() {
        let (gp, gen, lib, _) = tower4_run();
        let task = TaskInstance::parse("Achieve-clear(D)", &gp).unwrap();
        let c = learn_method(&gp, &gen.trace, &lib.tasks, &task, &[], &lib, 1, 0).unwrap();
        assert!(c.method.is_trivial());
        assert_eq!(c.method.preconditions.len(), 1);
        assert_eq!(c.method.preconditions[0].text(&gp.domain, &c.method.vars), "(clear ?a)");
    }
}
