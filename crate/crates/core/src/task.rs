//! Annotated tasks and their ground instances.

use std::collections::HashMap;
use std::fmt::{self, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ground::{AtomId, GroundAtom, GroundProblem, ObjId};
use crate::pddl::{DomainModel, Name};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TaskError {
    #[error("unknown task `{0}`")]
    UnknownTask(String),
    #[error("task `{name}` expects {expected} arguments, got {found}")]
    Arity { name: String, expected: usize, found: usize },
    #[error("unknown object `{0}`")]
    UnknownObject(String),
    #[error("malformed literal `{0}`")]
    Literal(String),
    #[error("conflicting definitions for task `{0}`")]
    Conflict(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Param {
    pub var: Name,
    #[serde(rename = "type")]
    pub ty: Name,
}

/// Atom over variable indices of an enclosing parameter list.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LiftedAtom {
    pub predicate: usize,
    pub args: Vec<usize>,
}

impl LiftedAtom {
    pub fn ground(&self, gp: &GroundProblem, binding: &[ObjId]) -> Option<AtomId> {
        gp.atom_id(&GroundAtom {
            predicate: self.predicate,
            args: self.args.iter().map(|&v| binding[v]).collect(),
        })
    }

    pub fn text(&self, dom: &DomainModel, vars: &[Param]) -> String {
        let mut s = format!("({}", dom.predicates[self.predicate].name);
        for &v in &self.args {
            let _ = write!(s, " {}", vars[v].var);
        }
        s.push(')');
        s
    }

    /// Parses `(pred ?x ?y)` against a variable list.
    pub fn parse(text: &str, dom: &DomainModel, vars: &[Param]) -> Result<Self, TaskError> {
        let bad = || TaskError::Literal(text.to_string());
        let inner = text
            .trim()
            .strip_prefix('(')
            .and_then(|t| t.strip_suffix(')'))
            .ok_or_else(bad)?;
        let mut words = inner.split_whitespace();
        let predicate = dom.predicate_index(words.next().ok_or_else(bad)?).ok_or_else(bad)?;
        let args = words
            .map(|w| vars.iter().position(|p| p.var.key() == w.to_ascii_lowercase()).ok_or_else(bad))
            .collect::<Result<Vec<_>, _>>()?;
        if args.len() != dom.predicates[predicate].params.len() {
            return Err(bad());
        }
        Ok(LiftedAtom { predicate, args })
    }
}

/// Task with typed parameters, preconditions (usually empty) and goals that
/// must hold once the task is done.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AnnotatedTask {
    pub name: Name,
    pub params: Vec<Param>,
    pub preconditions: Vec<LiftedAtom>,
    pub goals: Vec<LiftedAtom>,
}

/// Ground task such as `Achieve-clear(A)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TaskInstance {
    pub name: Name,
    pub args: Vec<ObjId>,
}

impl TaskInstance {
    pub fn text(&self, gp: &GroundProblem) -> String {
        let args: Vec<&str> = self.args.iter().map(|&o| gp.object(o).name.as_str()).collect();
        format!("{}({})", self.name, args.join(", "))
    }

    /// Parses `Name(a, b)` or `Name a b`.
    pub fn parse(text: &str, gp: &GroundProblem) -> Result<Self, TaskError> {
        let t = text.trim();
        let (name, rest) = match t.find('(') {
            Some(i) => (
                &t[..i],
                t[i + 1..]
                    .strip_suffix(')')
                    .ok_or_else(|| TaskError::Literal(text.to_string()))?,
            ),
            None => t.split_once(char::is_whitespace).unwrap_or((t, "")),
        };
        let args = rest
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|w| !w.is_empty())
            .map(|w| gp.object_id(w).ok_or_else(|| TaskError::UnknownObject(w.to_string())))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(TaskInstance {
            name: Name::new(name.trim()),
            args,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskJson {
    pub name: String,
    pub params: Vec<Param>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub preconditions: Vec<String>,
    pub goals: Vec<String>,
}

impl AnnotatedTask {
    pub fn to_json(&self, dom: &DomainModel) -> TaskJson {
        TaskJson {
            name: self.name.to_string(),
            params: self.params.clone(),
            preconditions: self.preconditions.iter().map(|a| a.text(dom, &self.params)).collect(),
            goals: self.goals.iter().map(|a| a.text(dom, &self.params)).collect(),
        }
    }

    pub fn from_json(json: &TaskJson, dom: &DomainModel) -> Result<Self, TaskError> {
        let parse = |v: &Vec<String>| {
            v.iter()
                .map(|t| LiftedAtom::parse(t, dom, &json.params))
                .collect::<Result<Vec<_>, _>>()
        };
        Ok(AnnotatedTask {
            name: Name::new(&json.name),
            params: json.params.clone(),
            preconditions: parse(&json.preconditions)?,
            goals: parse(&json.goals)?,
        })
    }
}

/// Variable name for position `i`: `?a` … `?z`, then `?v26` and up.
pub fn var_name(i: usize) -> Name {
    if i < 26 {
        Name::new(&format!("?{}", (b'a' + i as u8) as char))
    } else {
        Name::new(&format!("?v{i}"))
    }
}

/// Task definitions in insertion order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TaskTable {
    tasks: Vec<AnnotatedTask>,
    index: HashMap<String, usize>,
}

impl TaskTable {
    pub fn tasks(&self) -> &[AnnotatedTask] {
        &self.tasks
    }

    pub fn get(&self, name: &str) -> Option<&AnnotatedTask> {
        self.index.get(&name.to_ascii_lowercase()).map(|&i| &self.tasks[i])
    }

    /// Adds a definition; an existing task of the same name must be identical.
    pub fn insert(&mut self, task: AnnotatedTask) -> Result<(), TaskError> {
        match self.get(task.name.key()) {
            Some(t) if *t == task => Ok(()),
            Some(_) => Err(TaskError::Conflict(task.name.to_string())),
            None => {
                self.index.insert(task.name.key().to_string(), self.tasks.len());
                self.tasks.push(task);
                Ok(())
            }
        }
    }

    /// Task `Achieve-<predicate>` for a landmark atom, created on first use,
    /// together with the instance binding its parameters to the atom's arguments.
    pub fn make_annotated_task(&mut self, gp: &GroundProblem, atom: AtomId) -> TaskInstance {
        let ga = gp.atom(atom);
        let pred = &gp.domain.predicates[ga.predicate];
        let name = Name::new(&format!("Achieve-{}", pred.name));
        if self.get(name.key()).is_none() {
            let params = pred
                .params
                .iter()
                .enumerate()
                .map(|(i, p)| Param {
                    var: var_name(i),
                    ty: p.ty.clone(),
                })
                .collect();
            let goals = vec![LiftedAtom {
                predicate: ga.predicate,
                args: (0..pred.params.len()).collect(),
            }];
            self.insert(AnnotatedTask {
                name: name.clone(),
                params,
                preconditions: Vec::new(),
                goals,
            })
            .expect("fresh task name");
        }
        TaskInstance {
            name,
            args: ga.args.clone(),
        }
    }

    /// Resolves a task name, creating `Achieve-<predicate>` tasks on demand.
    pub fn resolve(&mut self, gp: &GroundProblem, name: &str) -> Result<&AnnotatedTask, TaskError> {
        if self.get(name).is_none() {
            let lower = name.to_ascii_lowercase();
            let pred = lower
                .strip_prefix("achieve-")
                .and_then(|p| gp.domain.predicate_index(p))
                .ok_or_else(|| TaskError::UnknownTask(name.to_string()))?;
            let p = &gp.domain.predicates[pred];
            self.insert(AnnotatedTask {
                name: Name::new(&format!("Achieve-{}", p.name)),
                params: p
                    .params
                    .iter()
                    .enumerate()
                    .map(|(i, q)| Param {
                        var: var_name(i),
                        ty: q.ty.clone(),
                    })
                    .collect(),
                preconditions: Vec::new(),
                goals: vec![LiftedAtom {
                    predicate: pred,
                    args: (0..p.params.len()).collect(),
                }],
            })?;
        }
        Ok(self.get(name).expect("just inserted"))
    }

    /// Checks arity and returns the instance's ground goals; `None` when a goal
    /// atom does not exist in this grounding (it can never hold).
    pub fn ground_goals(&self, gp: &GroundProblem, inst: &TaskInstance) -> Result<Option<Vec<AtomId>>, TaskError> {
        let task = self
            .get(inst.name.key())
            .ok_or_else(|| TaskError::UnknownTask(inst.name.to_string()))?;
        if task.params.len() != inst.args.len() {
            return Err(TaskError::Arity {
                name: task.name.to_string(),
                expected: task.params.len(),
                found: inst.args.len(),
            });
        }
        Ok(task
            .goals
            .iter()
            .map(|g| g.ground(gp, &inst.args))
            .collect::<Option<Vec<_>>>())
    }

    pub fn to_json(&self, dom: &DomainModel) -> Vec<TaskJson> {
        self.tasks.iter().map(|t| t.to_json(dom)).collect()
    }

    pub fn from_json(json: &[TaskJson], dom: &DomainModel) -> Result<Self, TaskError> {
        let mut t = TaskTable::default();
        for j in json {
            t.insert(AnnotatedTask::from_json(j, dom)?)?;
        }
        Ok(t)
    }
}

impl fmt::Display for Param {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} - {}", self.var, self.ty)
    }
}
