//! One training problem through landmarks, curriculum and method learning.

use std::time::Instant;

use thiserror::Error;

use crate::curricula::{curricugen_from_sequence, CurriculumConfig, CurriculumError, GeneratedCurriculum};
use crate::ground::GroundProblem;
use crate::landmark::{landmark_graph, LandmarkError, LandmarkGraph};
use crate::learn::{curriculearn, LearnError, LearnReport, MethodLibrary};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Landmark(#[from] LandmarkError),
    #[error(transparent)]
    Curriculum(#[from] CurriculumError),
    #[error(transparent)]
    Learn(#[from] LearnError),
}

/// Wall-clock seconds per stage.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct LearnTimings {
    pub landmarks_s: f64,
    pub plan_s: f64,
    pub methods_s: f64,
    pub total_s: f64,
}

impl LearnTimings {
    pub fn parts_sum(&self) -> f64 {
        self.landmarks_s + self.plan_s + self.methods_s
    }
}

#[derive(Debug, Clone)]
pub struct ProblemLearning {
    pub graph: LandmarkGraph,
    pub generated: GeneratedCurriculum,
    pub report: LearnReport,
    pub timings: LearnTimings,
}

/// Extracts landmarks, builds the curriculum and grows `lib` from it.
pub fn learn_from_problem(
    gp: &GroundProblem,
    lib: &mut MethodLibrary,
    cfg: &CurriculumConfig,
    training_ordinal: usize,
) -> Result<ProblemLearning, PipelineError> {
    let start = Instant::now();
    let graph = landmark_graph(gp, cfg.reasonable)?;
    let sequence = graph.topo_sequence()?;
    let t_landmarks = start.elapsed();
    let generated = curricugen_from_sequence(gp, &sequence, cfg, &mut lib.tasks)?;
    let t_plan = start.elapsed();
    let report = curriculearn(gp, &generated.trace, &generated.curriculum, lib, training_ordinal)?;
    let t_total = start.elapsed();
    let timings = LearnTimings {
        landmarks_s: t_landmarks.as_secs_f64(),
        plan_s: (t_plan - t_landmarks).as_secs_f64(),
        methods_s: (t_total - t_plan).as_secs_f64(),
        total_s: t_total.as_secs_f64(),
    };
    Ok(ProblemLearning {
        graph,
        generated,
        report,
        timings,
    })
}
