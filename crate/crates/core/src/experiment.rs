//! Train/test experiment loop: learn from training problems one at a time
//! and after each one try to solve every test problem with the library.

use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;
use std::time::Instant;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::curricula::CurriculumConfig;
use crate::gen::{blocks_domain, gen_blocks, gen_logistics, logistics_domain, LogisticsParams};
use crate::ground::{validate_plan, GroundProblem};
use crate::htn::{htn_solve, root_tasks_from_goal, HtnConfig};
use crate::learn::MethodLibrary;
use crate::pddl::{DomainModel, ProblemModel};
use crate::pipeline::learn_from_problem;
use crate::task::TaskInstance;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("cannot read configuration: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed configuration: {0}")]
    Parse(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DomainKind {
    #[default]
    Blocks,
    Logistics,
}

impl FromStr for DomainKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "blocks" | "blocksworld" => Ok(DomainKind::Blocks),
            "logistics" => Ok(DomainKind::Logistics),
            other => Err(format!("unknown domain `{other}`")),
        }
    }
}

impl fmt::Display for DomainKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DomainKind::Blocks => "blocks",
            DomainKind::Logistics => "logistics",
        })
    }
}

impl DomainKind {
    pub fn domain(self) -> DomainModel {
        match self {
            DomainKind::Blocks => blocks_domain(),
            DomainKind::Logistics => logistics_domain(),
        }
    }
}

/// Block counts are drawn uniformly from `min_blocks..=max_blocks`; goals are
/// `scramble_moves` random block moves away from the initial arrangement.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct BlocksParams {
    pub min_blocks: usize,
    pub max_blocks: usize,
    pub scramble_moves: usize,
}

impl Default for BlocksParams {
    fn default() -> Self {
        BlocksParams {
            min_blocks: 5,
            max_blocks: 5,
            scramble_moves: 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub domain: DomainKind,
    pub n_train: usize,
    pub n_test: usize,
    pub n_trials: usize,
    pub seed: u64,
    pub blocks: BlocksParams,
    pub logistics: LogisticsParams,
    pub curriculum: CurriculumConfig,
    pub htn: HtnConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            domain: DomainKind::Blocks,
            n_train: 30,
            n_test: 20,
            n_trials: 3,
            seed: 0,
            blocks: BlocksParams::default(),
            logistics: LogisticsParams::default(),
            curriculum: CurriculumConfig::default(),
            htn: HtnConfig::default(),
            output_dir: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    Train,
    Test,
}

impl ExperimentConfig {
    /// Reads TOML, or JSON when the file name ends in `.json`.
    pub fn from_file(path: &Path) -> Result<Self, ExperimentError> {
        let text = std::fs::read_to_string(path)?;
        let cfg: ExperimentConfig = if path.extension().is_some_and(|e| e == "json") {
            serde_json::from_str(&text).map_err(|e| ExperimentError::Parse(e.to_string()))?
        } else {
            toml::from_str(&text).map_err(|e| ExperimentError::Parse(e.to_string()))?
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        let bad = |m: &str| Err(ExperimentError::Config(m.to_string()));
        if self.n_test == 0 {
            return bad("n_test must be at least 1");
        }
        if self.n_trials == 0 {
            return bad("n_trials must be at least 1");
        }
        if self.blocks.min_blocks == 0 || self.blocks.min_blocks > self.blocks.max_blocks {
            return bad("blocks: need 1 <= min_blocks <= max_blocks");
        }
        let l = &self.logistics;
        if l.cities == 0 || l.locs_per_city == 0 || l.packages == 0 || l.trucks == 0 || l.airplanes == 0 {
            return bad("logistics: all counts must be at least 1");
        }
        Ok(())
    }

    /// Seed of one generated problem, independent of every other problem.
    pub fn problem_seed(&self, trial: usize, role: Role, index: usize) -> u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let role_bit = match role {
            Role::Train => 0,
            Role::Test => 1,
        };
        rng.set_stream(((trial as u64) << 33) | (role_bit << 32) | index as u64);
        rng.next_u64()
    }

    pub fn generate(&self, dom: &DomainModel, trial: usize, role: Role, index: usize) -> ProblemModel {
        let seed = self.problem_seed(trial, role, index);
        match self.domain {
            DomainKind::Blocks => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let n = rng.gen_range(self.blocks.min_blocks..=self.blocks.max_blocks);
                gen_blocks(n, self.blocks.scramble_moves, seed, dom)
            }
            DomainKind::Logistics => gen_logistics(self.logistics, seed, dom),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub trial: usize,
    pub train_count: usize,
    pub fraction_solved: f64,
    /// Over solved problems; 0 when none was solved.
    pub avg_plan_length: f64,
    /// Over all attempts.
    pub avg_planning_time_s: f64,
    pub method_count: usize,
    pub learn_time_landmarks_s: f64,
    pub learn_time_plan_s: f64,
    pub learn_time_methods_s: f64,
    pub learn_time_total_s: f64,
}

const TIME_COLUMNS: [&str; 5] = [
    "avg_planning_time_s",
    "learn_time_landmarks_s",
    "learn_time_plan_s",
    "learn_time_methods_s",
    "learn_time_total_s",
];

#[derive(Debug, Clone)]
pub struct TrialResult {
    pub trial: usize,
    pub rows: Vec<MetricsRow>,
    pub library: MethodLibrary,
    /// Training problems the pipeline could not learn from.
    pub learn_failures: Vec<(String, String)>,
    /// `(problem name, landmark graph in DOT)` per training problem.
    pub dots: Vec<(String, String)>,
}

#[derive(Debug, Clone)]
pub struct ExperimentResult {
    pub config: ExperimentConfig,
    pub domain: Arc<DomainModel>,
    pub trials: Vec<TrialResult>,
}

struct TestCase {
    gp: GroundProblem,
    roots: Option<Vec<TaskInstance>>,
}

struct Attempt {
    plan_len: Option<usize>,
    seconds: f64,
}

fn attempt(case: &TestCase, lib: &MethodLibrary, cfg: &HtnConfig) -> Attempt {
    let start = Instant::now();
    let plan_len = case.roots.as_ref().and_then(|roots| {
        let (plan, _) = htn_solve(&case.gp, lib, case.gp.init(), roots, cfg).ok()?;
        validate_plan(&case.gp, &plan, case.gp.goal()).ok()?;
        Some(plan.len())
    });
    Attempt {
        plan_len,
        seconds: start.elapsed().as_secs_f64(),
    }
}

fn summarize(trial: usize, train_count: usize, attempts: &[Attempt], method_count: usize) -> MetricsRow {
    let solved: Vec<usize> = attempts.iter().filter_map(|a| a.plan_len).collect();
    let n = attempts.len().max(1) as f64;
    MetricsRow {
        trial,
        train_count,
        fraction_solved: solved.len() as f64 / n,
        avg_plan_length: if solved.is_empty() {
            0.0
        } else {
            solved.iter().sum::<usize>() as f64 / solved.len() as f64
        },
        avg_planning_time_s: attempts.iter().map(|a| a.seconds).sum::<f64>() / n,
        method_count,
        learn_time_landmarks_s: 0.0,
        learn_time_plan_s: 0.0,
        learn_time_methods_s: 0.0,
        learn_time_total_s: 0.0,
    }
}

fn run_trial(cfg: &ExperimentConfig, dom: &Arc<DomainModel>, trial: usize) -> TrialResult {
    let ground = |role, i| GroundProblem::new(dom.clone(), Arc::new(cfg.generate(dom, trial, role, i)));
    let tests: Vec<TestCase> = (0..cfg.n_test)
        .into_par_iter()
        .map(|i| {
            let gp = ground(Role::Test, i);
            let roots = root_tasks_from_goal(&gp, cfg.curriculum.reasonable).ok();
            TestCase { gp, roots }
        })
        .collect();

    let mut result = TrialResult {
        trial,
        rows: Vec::new(),
        library: MethodLibrary::default(),
        learn_failures: Vec::new(),
        dots: Vec::new(),
    };
    if cfg.n_train == 0 {
        let attempts: Vec<Attempt> = tests
            .iter()
            .map(|t| Attempt {
                plan_len: t.gp.init().contains_all(t.gp.goal()).then_some(0),
                seconds: 0.0,
            })
            .collect();
        result.rows.push(summarize(trial, 0, &attempts, 0));
        return result;
    }
    for i in 0..cfg.n_train {
        let gp = ground(Role::Train, i);
        let learned = learn_from_problem(&gp, &mut result.library, &cfg.curriculum, i + 1);
        let timings = match learned {
            Ok(l) => {
                log::info!(
                    "trial {trial} train {}: {} landmarks, trace {}, {} steps, {} new methods",
                    i + 1,
                    l.graph.nodes.len(),
                    l.generated.trace.len(),
                    l.generated.curriculum.steps.len(),
                    l.report.new_methods.len()
                );
                result.dots.push((gp.name().to_string(), l.graph.to_dot()));
                l.timings
            }
            Err(e) => {
                log::warn!("trial {trial} train {}: {e}", i + 1);
                result.learn_failures.push((gp.name().to_string(), e.to_string()));
                Default::default()
            }
        };
        let attempts: Vec<Attempt> = tests
            .par_iter()
            .map(|t| attempt(t, &result.library, &cfg.htn))
            .collect();
        let mut row = summarize(trial, i + 1, &attempts, result.library.len());
        row.learn_time_landmarks_s = timings.landmarks_s;
        row.learn_time_plan_s = timings.plan_s;
        row.learn_time_methods_s = timings.methods_s;
        row.learn_time_total_s = timings.total_s;
        result.rows.push(row);
    }
    result
}

/// Runs every trial; trials and test solves run in parallel, results are in
/// `(trial, train_count)` order.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentResult, ExperimentError> {
    cfg.validate()?;
    let domain = Arc::new(cfg.domain.domain());
    let trials = (0..cfg.n_trials)
        .into_par_iter()
        .map(|t| run_trial(cfg, &domain, t))
        .collect();
    Ok(ExperimentResult {
        config: cfg.clone(),
        domain,
        trials,
    })
}

impl ExperimentResult {
    pub fn rows(&self) -> impl Iterator<Item = &MetricsRow> {
        self.trials.iter().flat_map(|t| t.rows.iter())
    }

    /// CSV with a header row; times in seconds with millisecond resolution.
    /// Without `with_times` the wall-clock columns are left out.
    pub fn write_csv<W: Write>(&self, w: W, with_times: bool) -> Result<(), ExperimentError> {
        let mut out = csv::Writer::from_writer(w);
        let header = [
            "trial",
            "train_count",
            "fraction_solved",
            "avg_plan_length",
            "avg_planning_time_s",
            "method_count",
            "learn_time_landmarks_s",
            "learn_time_plan_s",
            "learn_time_methods_s",
            "learn_time_total_s",
        ];
        let keep: Vec<bool> = header.iter().map(|h| with_times || !TIME_COLUMNS.contains(h)).collect();
        let pick = |fields: Vec<String>| -> Vec<String> {
            fields.into_iter().zip(&keep).filter(|(_, &k)| k).map(|(f, _)| f).collect()
        };
        out.write_record(pick(header.iter().map(|h| h.to_string()).collect()))?;
        let ms = |x: f64| format!("{x:.3}");
        for r in self.rows() {
            out.write_record(pick(vec![
                r.trial.to_string(),
                r.train_count.to_string(),
                format!("{:.4}", r.fraction_solved),
                format!("{:.4}", r.avg_plan_length),
                ms(r.avg_planning_time_s),
                r.method_count.to_string(),
                ms(r.learn_time_landmarks_s),
                ms(r.learn_time_plan_s),
                ms(r.learn_time_methods_s),
                ms(r.learn_time_total_s),
            ]))?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn csv_string(&self, with_times: bool) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf, with_times).expect("writing to memory");
        String::from_utf8(buf).expect("csv is utf-8")
    }

    pub fn summary_json(&self) -> serde_json::Value {
        let trials: Vec<serde_json::Value> = self
            .trials
            .iter()
            .map(|t| {
                let last = t.rows.last();
                serde_json::json!({
                    "trial": t.trial,
                    "final_fraction_solved": last.map(|r| r.fraction_solved),
                    "first_full_solve": t.rows.iter().find(|r| r.fraction_solved >= 1.0).map(|r| r.train_count),
                    "method_count": t.library.len(),
                    "learn_time_total_s": t.rows.iter().map(|r| r.learn_time_total_s).sum::<f64>(),
                    "learn_failures": t.learn_failures.iter()
                        .map(|(p, e)| serde_json::json!({"problem": p, "error": e}))
                        .collect::<Vec<_>>(),
                })
            })
            .collect();
        serde_json::json!({ "config": self.config, "trials": trials })
    }

    /// Writes `metrics.csv`, `summary.json`, `library-trial<k>.json` and
    /// `landmarks/trial<k>/<problem>.dot` under `dir`.
    pub fn write_artifacts(&self, dir: &Path) -> Result<(), ExperimentError> {
        std::fs::create_dir_all(dir)?;
        self.write_csv(std::fs::File::create(dir.join("metrics.csv"))?, true)?;
        let pretty = |v: &serde_json::Value| serde_json::to_string_pretty(v).expect("json") + "\n";
        std::fs::write(dir.join("summary.json"), pretty(&self.summary_json()))?;
        for t in &self.trials {
            let lib = serde_json::to_value(t.library.to_json(&self.domain)).expect("json");
            std::fs::write(dir.join(format!("library-trial{}.json", t.trial)), pretty(&lib))?;
            let dot_dir = dir.join("landmarks").join(format!("trial{}", t.trial));
            std::fs::create_dir_all(&dot_dir)?;
            for (name, dot) in &t.dots {
                std::fs::write(dot_dir.join(format!("{name}.dot")), dot)?;
            }
        }
        Ok(())
    }
}
