//! Learning HTN methods from classical planning problems.
//!
//! The pipeline: parse PDDL, ground, extract a landmark graph, turn the
//! landmark sequence into a curriculum over a plan trace, and learn lifted
//! methods by regressing task goals through subtraces. Learned libraries are
//! checked with a total-order HTN planner.

pub mod curricula;
pub mod experiment;
pub mod gen;
pub mod ground;
pub mod htn;
pub mod landmark;
pub mod learn;
pub mod pddl;
pub mod pipeline;
pub mod search;
pub mod task;

pub use ground::{gamma_apply, validate_plan, ActionId, AtomId, GroundAction, GroundAtom, GroundProblem, State};
pub use pddl::{parse_domain, parse_problem, Atom, DomainModel, Name, PddlError, ProblemModel};
