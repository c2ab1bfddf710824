//! Curriculum generation from a landmark sequence.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ground::{validate_from, ActionId, AtomId, GroundError, GroundProblem, State};
use crate::landmark::{landmark_graph, LandmarkError, ReasonableMode};
use crate::search::{classical_plan, SearchConfig, SearchError};
pub use crate::task::{AnnotatedTask, TaskInstance, TaskTable};
use crate::task::{TaskError, TaskJson};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CurriculumError {
    #[error(transparent)]
    Landmark(#[from] LandmarkError),
    #[error("cannot reach landmark {landmark}: {source}")]
    Unreachable { landmark: String, source: SearchError },
    #[error("invalid trace: {0}")]
    Trace(#[from] GroundError),
    #[error(transparent)]
    Task(#[from] TaskError),
    #[error("step {index} spans [{begin}, {end}] outside a trace of length {len}")]
    Span {
        index: usize,
        begin: usize,
        end: usize,
        len: usize,
    },
}

/// Actions with the states they visit; `trajectory[k]` follows action `k` (1-based).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlanTrace {
    pub actions: Vec<ActionId>,
    pub trajectory: Vec<State>,
}

impl PlanTrace {
    pub fn empty(s0: State) -> Self {
        PlanTrace {
            actions: Vec::new(),
            trajectory: vec![s0],
        }
    }

    pub fn from_actions(gp: &GroundProblem, s0: &State, actions: Vec<ActionId>) -> Result<Self, GroundError> {
        let trajectory = validate_from(gp, s0, &actions, &[])?;
        Ok(PlanTrace { actions, trajectory })
    }

    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    /// Action at 1-based position `k`.
    pub fn action(&self, k: usize) -> ActionId {
        self.actions[k - 1]
    }

    pub fn state(&self, k: usize) -> &State {
        &self.trajectory[k]
    }

    pub fn last_state(&self) -> &State {
        self.trajectory.last().expect("trajectory is never empty")
    }

    fn extend(&mut self, gp: &GroundProblem, plan: &[ActionId]) {
        for &a in plan {
            let next = gp
                .successor(self.last_state(), a)
                .expect("planner output is applicable");
            self.actions.push(a);
            self.trajectory.push(next);
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CurriculumStep {
    pub begin: usize,
    pub end: usize,
    pub task: TaskInstance,
}

/// A landmark that already held when its turn came; `at` is the trace
/// position at that moment.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrivialStep {
    pub at: usize,
    pub task: TaskInstance,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Curriculum {
    pub trace_ref: String,
    pub steps: Vec<CurriculumStep>,
    pub trivial: Vec<TrivialStep>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct CurriculumConfig {
    pub search: SearchConfig,
    pub reasonable: ReasonableMode,
    /// Longest subtrace a step may span; `None` keeps every step.
    pub max_span: Option<usize>,
    /// Keep already processed goal atoms true while planning for later landmarks.
    pub protect_goals: bool,
}

impl Default for CurriculumConfig {
    fn default() -> Self {
        CurriculumConfig {
            search: SearchConfig::default(),
            reasonable: ReasonableMode::Full,
            max_span: None,
            protect_goals: true,
        }
    }
}

#[derive(Debug, Clone)]
pub struct GeneratedCurriculum {
    pub sequence: Vec<AtomId>,
    pub trace: PlanTrace,
    pub curriculum: Curriculum,
}

/// Walks the landmark sequence, planning from the current state to each
/// landmark in turn. A landmark reached at cumulative trace length `i`
/// contributes the steps `(i, i), (i-1, i), …, (1, i)`. One that already held
/// (empty subplan) gets a trivial entry at `i` and only the steps `(k, i)`
/// whose subtrace starts with it false.
pub fn curricugen_from_sequence(
    gp: &GroundProblem,
    sequence: &[AtomId],
    cfg: &CurriculumConfig,
    tasks: &mut TaskTable,
) -> Result<GeneratedCurriculum, CurriculumError> {
    let mut trace = PlanTrace::empty(gp.init().clone());
    let mut curriculum = Curriculum {
        trace_ref: gp.name().to_string(),
        ..Curriculum::default()
    };
    let mut protected: Vec<AtomId> = Vec::new();
    let emit = |trace: &PlanTrace, curriculum: &mut Curriculum, inst: TaskInstance, atom: AtomId, subplan_len: usize| {
        let i = trace.len();
        if subplan_len == 0 {
            let entry = TrivialStep {
                at: i,
                task: inst.clone(),
            };
            if !curriculum.trivial.contains(&entry) {
                curriculum.trivial.push(entry);
            }
        }
        for k in (1..=i).rev() {
            if cfg.max_span.is_some_and(|m| i - k + 1 > m) {
                continue;
            }
            if subplan_len == 0 && trace.state(k - 1).contains(atom) {
                continue;
            }
            curriculum.steps.push(CurriculumStep {
                begin: k,
                end: i,
                task: inst.clone(),
            });
        }
    };

    for &v in sequence {
        let inst = tasks.make_annotated_task(gp, v);
        let s = trace.last_state().clone();
        let mut goal = vec![v];
        if cfg.protect_goals {
            goal.extend(protected.iter().copied().filter(|&g| g != v && s.contains(g)));
        }
        let plan = match classical_plan(gp, &s, &goal, &cfg.search) {
            Ok(p) => p,
            Err(e) if goal.len() > 1 => {
                log::debug!("protected goals block {}: {e}; retrying unprotected", gp.atom_text(v));
                classical_plan(gp, &s, &[v], &cfg.search).map_err(|source| CurriculumError::Unreachable {
                    landmark: gp.atom_text(v),
                    source,
                })?
            }
            Err(source) => {
                return Err(CurriculumError::Unreachable {
                    landmark: gp.atom_text(v),
                    source,
                })
            }
        };
        trace.extend(gp, &plan);
        emit(&trace, &mut curriculum, inst, v, plan.len());
        if gp.goal().contains(&v) && !protected.contains(&v) {
            protected.push(v);
        }
    }

    if !trace.last_state().contains_all(gp.goal()) {
        let s = trace.last_state().clone();
        let plan = classical_plan(gp, &s, gp.goal(), &cfg.search).map_err(|source| CurriculumError::Unreachable {
            landmark: "goal".into(),
            source,
        })?;
        log::debug!("appending {} actions to restore the goal", plan.len());
        trace.extend(gp, &plan);
        // every goal task may come last in a serialized task list
        for &g in gp.goal() {
            let inst = tasks.make_annotated_task(gp, g);
            emit(&trace, &mut curriculum, inst.clone(), g, plan.len());
            curriculum.trivial.push(TrivialStep {
                at: trace.len(),
                task: inst,
            });
        }
    }
    Ok(GeneratedCurriculum {
        sequence: sequence.to_vec(),
        trace,
        curriculum,
    })
}

/// Landmark extraction, reasonable orders, sequencing and curriculum generation.
pub fn curricugen(
    gp: &GroundProblem,
    cfg: &CurriculumConfig,
    tasks: &mut TaskTable,
) -> Result<GeneratedCurriculum, CurriculumError> {
    let graph = landmark_graph(gp, cfg.reasonable)?;
    let sequence = graph.topo_sequence()?;
    curricugen_from_sequence(gp, &sequence, cfg, tasks)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskRefJson {
    pub name: String,
    pub args: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepJson {
    pub begin: usize,
    pub end: usize,
    pub task: TaskRefJson,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrivialJson {
    pub at: usize,
    pub task: TaskRefJson,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CurriculumJson {
    #[serde(default)]
    pub problem: String,
    pub trace: Vec<String>,
    pub steps: Vec<StepJson>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub trivial: Vec<TrivialJson>,
    /// Definitions for tasks that are not of the `Achieve-<predicate>` form.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub tasks: Vec<TaskJson>,
}

fn task_ref(gp: &GroundProblem, t: &TaskInstance) -> TaskRefJson {
    TaskRefJson {
        name: t.name.to_string(),
        args: t.args.iter().map(|&o| gp.object(o).name.to_string()).collect(),
    }
}

fn task_from_ref(gp: &GroundProblem, r: &TaskRefJson, tasks: &mut TaskTable) -> Result<TaskInstance, CurriculumError> {
    let args = r
        .args
        .iter()
        .map(|a| gp.object_id(a).ok_or_else(|| TaskError::UnknownObject(a.clone())))
        .collect::<Result<Vec<_>, _>>()?;
    let task = tasks.resolve(gp, &r.name)?;
    if task.params.len() != args.len() {
        return Err(TaskError::Arity {
            name: r.name.clone(),
            expected: task.params.len(),
            found: args.len(),
        }
        .into());
    }
    Ok(TaskInstance {
        name: task.name.clone(),
        args,
    })
}

impl Curriculum {
    pub fn to_json(&self, gp: &GroundProblem, trace: &PlanTrace, tasks: &TaskTable) -> CurriculumJson {
        let used = |name: &crate::pddl::Name| {
            self.steps.iter().any(|s| &s.task.name == name) || self.trivial.iter().any(|s| &s.task.name == name)
        };
        CurriculumJson {
            problem: self.trace_ref.clone(),
            trace: trace.actions.iter().map(|&a| gp.action_text(a)).collect(),
            steps: self
                .steps
                .iter()
                .map(|s| StepJson {
                    begin: s.begin,
                    end: s.end,
                    task: task_ref(gp, &s.task),
                })
                .collect(),
            trivial: self
                .trivial
                .iter()
                .map(|t| TrivialJson {
                    at: t.at,
                    task: task_ref(gp, &t.task),
                })
                .collect(),
            tasks: tasks
                .tasks()
                .iter()
                .filter(|t| used(&t.name) && !t.name.key().starts_with("achieve-"))
                .map(|t| t.to_json(&gp.domain))
                .collect(),
        }
    }

    /// Rebuilds a curriculum and its trace; the trace must execute from the
    /// initial state and every step must fit inside it.
    pub fn from_json(
        gp: &GroundProblem,
        json: &CurriculumJson,
        tasks: &mut TaskTable,
    ) -> Result<(PlanTrace, Curriculum), CurriculumError> {
        for t in &json.tasks {
            tasks.insert(AnnotatedTask::from_json(t, &gp.domain)?)?;
        }
        let actions = crate::ground::parse_plan(gp, &json.trace.join("\n"))?;
        let trace = PlanTrace::from_actions(gp, gp.init(), actions)?;
        let mut steps = Vec::with_capacity(json.steps.len());
        for (index, s) in json.steps.iter().enumerate() {
            if s.begin < 1 || s.begin > s.end || s.end > trace.len() {
                return Err(CurriculumError::Span {
                    index,
                    begin: s.begin,
                    end: s.end,
                    len: trace.len(),
                });
            }
            steps.push(CurriculumStep {
                begin: s.begin,
                end: s.end,
                task: task_from_ref(gp, &s.task, tasks)?,
            });
        }
        let mut trivial = Vec::new();
        for (index, t) in json.trivial.iter().enumerate() {
            if t.at > trace.len() {
                return Err(CurriculumError::Span {
                    index,
                    begin: t.at + 1,
                    end: t.at,
                    len: trace.len(),
                });
            }
            trivial.push(TrivialStep {
                at: t.at,
                task: task_from_ref(gp, &t.task, tasks)?,
            });
        }
        let trace_ref = if json.problem.is_empty() {
            gp.name().to_string()
        } else {
            json.problem.clone()
        };
        Ok((
            trace,
            Curriculum {
                trace_ref,
                steps,
                trivial,
            },
        ))
    }
}
