//! STRIPS + typing fragment of PDDL.
//!
//! Symbols are case-insensitive: every [`Name`] compares by its lower-cased
//! key while remembering the spelling it was first seen with, so printed
//! output keeps the author's casing.

mod domain;
mod print;
mod problem;
pub mod sexpr;

use std::collections::HashMap;
use std::fmt;
use std::hash::{Hash, Hasher};
use std::sync::Arc;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

pub use domain::parse_domain;
pub use problem::parse_problem;

/// Name of the implicit root type.
pub const ROOT_TYPE: &str = "object";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PddlError {
    #[error("syntax error at {line}:{col}: {msg}")]
    Syntax { line: usize, col: usize, msg: String },
    #[error("unsupported requirement `{keyword}` at {line}:{col}")]
    UnsupportedRequirement {
        keyword: String,
        line: usize,
        col: usize,
    },
    #[error("undeclared type `{name}` at {line}:{col}")]
    UndeclaredType { name: String, line: usize, col: usize },
    #[error("undeclared predicate `{name}` at {line}:{col}")]
    UndeclaredPredicate { name: String, line: usize, col: usize },
    #[error("unknown object `{name}` at {line}:{col}")]
    UnknownObject { name: String, line: usize, col: usize },
    #[error("variable `{name}` at {line}:{col} is not a parameter")]
    UnboundVariable { name: String, line: usize, col: usize },
    #[error("duplicate {what} `{name}` at {line}:{col}")]
    Duplicate {
        what: &'static str,
        name: String,
        line: usize,
        col: usize,
    },
    #[error("`{name}` at {line}:{col} expects {expected} arguments, got {found}")]
    Arity {
        name: String,
        expected: usize,
        found: usize,
        line: usize,
        col: usize,
    },
    #[error("ill-typed atom at {line}:{col}: {msg}")]
    IllTyped { msg: String, line: usize, col: usize },
    #[error("problem refers to domain `{found}` but `{expected}` was supplied")]
    DomainMismatch { expected: String, found: String },
    #[error("type hierarchy is cyclic through `{name}`")]
    CyclicTypes { name: String },
}

/// Case-insensitive identifier that remembers its first-seen spelling.
#[derive(Clone)]
pub struct Name {
    key: Arc<str>,
    display: Arc<str>,
}

impl Name {
    pub fn new(text: &str) -> Self {
        Name {
            key: text.to_ascii_lowercase().into(),
            display: text.into(),
        }
    }

    /// Lower-cased comparison key.
    pub fn key(&self) -> &str {
        &self.key
    }

    /// First-seen spelling.
    pub fn as_str(&self) -> &str {
        &self.display
    }
}

impl PartialEq for Name {
    fn eq(&self, other: &Self) -> bool {
        self.key == other.key
    }
}

impl Eq for Name {}

impl Hash for Name {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.key.hash(state)
    }
}

impl PartialOrd for Name {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Name {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.key.cmp(&other.key)
    }
}

impl fmt::Display for Name {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.display)
    }
}

impl fmt::Debug for Name {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", &*self.display)
    }
}

impl From<&str> for Name {
    fn from(s: &str) -> Self {
        Name::new(s)
    }
}

impl Serialize for Name {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.display)
    }
}

impl<'de> Deserialize<'de> for Name {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        Ok(Name::new(&s))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TypeDecl {
    pub name: Name,
    /// `None` only for the root type.
    pub parent: Option<Name>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TypedVar {
    /// Variable name including the leading `?`.
    pub var: Name,
    pub ty: Name,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PredicateSchema {
    pub name: Name,
    pub params: Vec<TypedVar>,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Term {
    /// Index into the enclosing schema's parameter list.
    Var(usize),
    Const(Name),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AtomSchema {
    pub predicate: Name,
    pub args: Vec<Term>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ActionSchema {
    pub name: Name,
    pub params: Vec<TypedVar>,
    pub preconditions: Vec<AtomSchema>,
    pub add_effects: Vec<AtomSchema>,
    pub del_effects: Vec<AtomSchema>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DomainModel {
    pub name: Name,
    pub requirements: Vec<Name>,
    /// Always starts with the root type `object`.
    pub types: Vec<TypeDecl>,
    pub constants: Vec<(Name, Name)>,
    pub predicates: Vec<PredicateSchema>,
    pub action_schemas: Vec<ActionSchema>,
    lookup: Lookup,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
struct Lookup {
    types: HashMap<String, usize>,
    predicates: HashMap<String, usize>,
    actions: HashMap<String, usize>,
}

impl DomainModel {
    pub(crate) fn assemble(
        name: Name,
        requirements: Vec<Name>,
        types: Vec<TypeDecl>,
        constants: Vec<(Name, Name)>,
        predicates: Vec<PredicateSchema>,
        action_schemas: Vec<ActionSchema>,
    ) -> Self {
        let lookup = Lookup {
            types: key_index(types.iter().map(|t| &t.name)),
            predicates: key_index(predicates.iter().map(|p| &p.name)),
            actions: key_index(action_schemas.iter().map(|a| &a.name)),
        };
        DomainModel {
            name,
            requirements,
            types,
            constants,
            predicates,
            action_schemas,
            lookup,
        }
    }

    pub fn type_index(&self, name: &str) -> Option<usize> {
        self.lookup.types.get(&name.to_ascii_lowercase()).copied()
    }

    pub fn predicate_index(&self, name: &str) -> Option<usize> {
        self.lookup.predicates.get(&name.to_ascii_lowercase()).copied()
    }

    pub fn predicate(&self, name: &str) -> Option<&PredicateSchema> {
        self.predicate_index(name).map(|i| &self.predicates[i])
    }

    pub fn action_index(&self, name: &str) -> Option<usize> {
        self.lookup.actions.get(&name.to_ascii_lowercase()).copied()
    }

    pub fn action(&self, name: &str) -> Option<&ActionSchema> {
        self.action_index(name).map(|i| &self.action_schemas[i])
    }

    /// Whether `ty` equals `ancestor` or descends from it.
    pub fn is_subtype(&self, ty: &Name, ancestor: &Name) -> bool {
        let mut current = Some(ty.clone());
        let mut steps = 0;
        while let Some(t) = current {
            if &t == ancestor {
                return true;
            }
            steps += 1;
            if steps > self.types.len() {
                return false;
            }
            current = self
                .type_index(t.key())
                .and_then(|i| self.types[i].parent.clone());
        }
        false
    }
}

fn key_index<'a>(names: impl Iterator<Item = &'a Name>) -> HashMap<String, usize> {
    names
        .enumerate()
        .map(|(i, n)| (n.key().to_string(), i))
        .collect()
}

/// A ground atom by name, as written in a problem file.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Atom {
    pub predicate: Name,
    pub args: Vec<Name>,
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}", self.predicate)?;
        for a in &self.args {
            write!(f, " {a}")?;
        }
        f.write_str(")")
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProblemModel {
    pub name: Name,
    pub domain_ref: Name,
    /// Declared objects with their types; domain constants are not repeated here.
    pub objects: Vec<(Name, Name)>,
    pub init: Vec<Atom>,
    pub goal: Vec<Atom>,
}

impl ProblemModel {
    /// Domain constants followed by declared objects.
    pub fn all_objects<'a>(&'a self, dom: &'a DomainModel) -> impl Iterator<Item = &'a (Name, Name)> {
        dom.constants.iter().chain(self.objects.iter())
    }
}
