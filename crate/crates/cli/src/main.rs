use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use htnlearn::curricula::{curricugen_from_sequence, Curriculum, CurriculumConfig, CurriculumJson, TaskTable};
use htnlearn::experiment::{run_experiment, DomainKind, ExperimentConfig};
use htnlearn::gen::{gen_blocks, gen_logistics, LogisticsParams};
use htnlearn::ground::{format_plan, parse_plan, validate_plan};
use htnlearn::htn::{htn_solve, root_tasks_from_goal, HtnConfig};
use htnlearn::landmark::{landmark_graph, GraphJson, LandmarkGraph, ReasonableMode};
use htnlearn::learn::{curriculearn, LibraryJson, MethodLibrary};
use htnlearn::pipeline::learn_from_problem;
use htnlearn::search::{classical_plan, HeuristicKind, SearchConfig, Strategy};
use htnlearn::{parse_domain, parse_problem, DomainModel, GroundProblem, ProblemModel};

const EXIT_PARSE: u8 = 2;
const EXIT_PLANNING: u8 = 3;
const EXIT_INTERNAL: u8 = 4;

/// Error carrying the process exit status.
struct Failure {
    code: u8,
    error: anyhow::Error,
}

type CmdResult = Result<(), Failure>;

trait ExitWith<T> {
    fn exit(self, code: u8) -> Result<T, Failure>;
}

impl<T, E: Into<anyhow::Error>> ExitWith<T> for Result<T, E> {
    fn exit(self, code: u8) -> Result<T, Failure> {
        self.map_err(|e| Failure { code, error: e.into() })
    }
}

#[derive(Parser)]
#[command(name = "htnlearn", version, about = "Landmark curricula and HTN method learning for PDDL problems")]
struct Cli {
    /// Seed for every random choice (problem generation, experiment sampling).
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// More log output; repeat for more.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    format: Format,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Json,
}

#[derive(Subcommand)]
enum Command {
    /// Parse a domain and optionally problems, and summarize them.
    Parse {
        #[arg(short, long)]
        domain: PathBuf,
        #[arg(short, long)]
        problem: Vec<PathBuf>,
    },
    /// Solve a problem with forward search.
    PlanClassical {
        #[command(flatten)]
        input: ProblemArgs,
        #[command(flatten)]
        search: SearchArgs,
        /// Write the plan here, one action per line.
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Extract the landmark graph and its sequence.
    Landmarks {
        #[command(flatten)]
        input: ProblemArgs,
        #[arg(long, default_value = "full")]
        reasonable: ReasonableMode,
        /// Write the graph as JSON.
        #[arg(short, long)]
        out: Option<PathBuf>,
        /// Write the graph in Graphviz format.
        #[arg(long)]
        dot: Option<PathBuf>,
    },
    /// Build a curriculum over a plan trace.
    Curriculum {
        #[command(flatten)]
        input: ProblemArgs,
        #[command(flatten)]
        learn: CurriculumArgs,
        /// Use this landmark graph (from `landmarks --out`) instead of extracting one.
        #[arg(long)]
        graph: Option<PathBuf>,
        /// Write the curriculum as JSON.
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Learn methods from problems, in the given order.
    Learn {
        #[arg(short, long)]
        domain: PathBuf,
        #[arg(short, long)]
        problem: Vec<PathBuf>,
        /// Library to start from.
        #[arg(short = 'm', long)]
        methods_in: Option<PathBuf>,
        /// Where to write the library.
        #[arg(short, long)]
        out: PathBuf,
        /// Curricula to learn from instead of generating them, one per problem.
        #[arg(long)]
        curriculum: Vec<PathBuf>,
        /// Also write the library in SHOP-like syntax.
        #[arg(long)]
        shop: Option<PathBuf>,
        /// Log and skip problems that fail instead of stopping.
        #[arg(long)]
        keep_going: bool,
        #[command(flatten)]
        learn: CurriculumArgs,
    },
    /// Solve a problem with a learned library.
    PlanHtn {
        #[command(flatten)]
        input: ProblemArgs,
        #[arg(short = 'm', long)]
        methods: PathBuf,
        #[arg(long, default_value = "full")]
        reasonable: ReasonableMode,
        #[arg(long, default_value_t = HtnConfig::default().max_decompositions)]
        max_decompositions: usize,
        #[arg(long, default_value_t = HtnConfig::default().depth_limit)]
        depth_limit: usize,
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Run the train/test experiment and write its CSV.
    Experiment(ExperimentArgs),
    /// Generate a problem.
    Gen {
        #[arg(value_enum)]
        kind: GenKind,
        #[arg(long, default_value_t = 5)]
        blocks: usize,
        #[arg(long, default_value_t = 5)]
        moves: usize,
        #[arg(long, default_value_t = LogisticsParams::default().cities)]
        cities: usize,
        #[arg(long, default_value_t = LogisticsParams::default().locs_per_city)]
        locations: usize,
        #[arg(long, default_value_t = LogisticsParams::default().packages)]
        packages: usize,
        /// Write the problem here instead of stdout.
        #[arg(short, long)]
        out: Option<PathBuf>,
        /// Also write the domain.
        #[arg(long)]
        domain_out: Option<PathBuf>,
    },
    /// Check that a plan executes and reaches the goal.
    Validate {
        #[command(flatten)]
        input: ProblemArgs,
        #[arg(long)]
        plan: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum GenKind {
    Blocks,
    Logistics,
}

#[derive(Args)]
struct ProblemArgs {
    #[arg(short, long)]
    domain: PathBuf,
    #[arg(short, long)]
    problem: PathBuf,
}

#[derive(Args)]
struct SearchArgs {
    #[arg(long, default_value = "gbfs")]
    strategy: Strategy,
    #[arg(long, default_value = "h-add")]
    heuristic: HeuristicKind,
    #[arg(long, default_value_t = SearchConfig::default().max_expansions)]
    max_expansions: usize,
}

impl SearchArgs {
    fn config(&self) -> SearchConfig {
        SearchConfig {
            strategy: self.strategy,
            heuristic: self.heuristic,
            max_expansions: self.max_expansions.max(1),
        }
    }
}

#[derive(Args)]
struct CurriculumArgs {
    #[arg(long, default_value = "full")]
    reasonable: ReasonableMode,
    #[command(flatten)]
    search: SearchArgs,
    /// Drop steps longer than this.
    #[arg(long)]
    max_span: Option<usize>,
    /// Let later landmark plans undo goal atoms reached earlier.
    #[arg(long)]
    no_protect_goals: bool,
}

impl CurriculumArgs {
    fn config(&self) -> CurriculumConfig {
        CurriculumConfig {
            search: self.search.config(),
            reasonable: self.reasonable,
            max_span: self.max_span,
            protect_goals: !self.no_protect_goals,
        }
    }
}

#[derive(Args)]
struct ExperimentArgs {
    /// TOML or JSON file with experiment settings; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    domain: Option<DomainKind>,
    #[arg(long)]
    n_train: Option<usize>,
    #[arg(long)]
    n_test: Option<usize>,
    #[arg(long)]
    n_trials: Option<usize>,
    #[arg(long)]
    min_blocks: Option<usize>,
    #[arg(long)]
    max_blocks: Option<usize>,
    #[arg(long)]
    reasonable: Option<ReasonableMode>,
    #[arg(long)]
    max_decompositions: Option<usize>,
    /// Directory for metrics.csv, summary.json, libraries and landmark graphs.
    #[arg(short, long)]
    output_dir: Option<PathBuf>,
    /// Leave the timing columns out of the printed CSV.
    #[arg(long)]
    no_times: bool,
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path)
        .with_context(|| format!("cannot read {}", path.display()))
        .exit(EXIT_PARSE)
}

fn write(path: &Path, text: &str) -> CmdResult {
    fs::write(path, text)
        .with_context(|| format!("cannot write {}", path.display()))
        .exit(EXIT_INTERNAL)
}

fn load_domain(path: &Path) -> Result<Arc<DomainModel>, Failure> {
    let text = read(path)?;
    let dom = parse_domain(&text)
        .with_context(|| format!("in {}", path.display()))
        .exit(EXIT_PARSE)?;
    Ok(Arc::new(dom))
}

fn load_problem(dom: &Arc<DomainModel>, path: &Path) -> Result<GroundProblem, Failure> {
    let text = read(path)?;
    let prob = parse_problem(&text, dom)
        .with_context(|| format!("in {}", path.display()))
        .exit(EXIT_PARSE)?;
    Ok(GroundProblem::new(dom.clone(), Arc::new(prob)))
}

fn load(input: &ProblemArgs) -> Result<GroundProblem, Failure> {
    let dom = load_domain(&input.domain)?;
    load_problem(&dom, &input.problem)
}

fn load_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, Failure> {
    let text = read(path)?;
    serde_json::from_str(&text)
        .with_context(|| format!("in {}", path.display()))
        .exit(EXIT_PARSE)
}

fn pretty(v: &Value) -> String {
    serde_json::to_string_pretty(v).expect("json values serialize") + "\n"
}

fn library_text(lib: &MethodLibrary, dom: &DomainModel) -> String {
    pretty(&serde_json::to_value(lib.to_json(dom)).expect("library serializes"))
}

fn cmd_parse(cli: &Cli, domain: &Path, problems: &[PathBuf]) -> CmdResult {
    let dom = load_domain(domain)?;
    let mut probs: Vec<(ProblemModel, usize, usize)> = Vec::new();
    for p in problems {
        let gp = load_problem(&dom, p)?;
        probs.push(((*gp.problem).clone(), gp.n_atoms(), gp.actions().len()));
    }
    match cli.format {
        Format::Json => {
            let problems: Vec<Value> = probs
                .iter()
                .map(|(p, atoms, actions)| {
                    json!({
                        "name": p.name.as_str(),
                        "objects": p.objects.len(),
                        "init": p.init.len(),
                        "goal": p.goal.iter().map(|a| a.to_string()).collect::<Vec<_>>(),
                        "ground_atoms": atoms,
                        "ground_actions": actions,
                    })
                })
                .collect();
            print!(
                "{}",
                pretty(&json!({
                    "domain": dom.name.as_str(),
                    "types": dom.types.len(),
                    "predicates": dom.predicates.len(),
                    "actions": dom.action_schemas.iter().map(|a| a.name.as_str()).collect::<Vec<_>>(),
                    "problems": problems,
                }))
            );
        }
        Format::Text => {
            println!("domain {}", dom.name);
            println!("types {}", dom.types.len());
            println!("predicates {}", dom.predicates.len());
            let names: Vec<&str> = dom.action_schemas.iter().map(|a| a.name.as_str()).collect();
            println!("actions {} {}", names.len(), names.join(" "));
            for (p, atoms, actions) in &probs {
                println!(
                    "problem {} objects {} init {} goal {} ground-atoms {} ground-actions {}",
                    p.name,
                    p.objects.len(),
                    p.init.len(),
                    p.goal.len(),
                    atoms,
                    actions
                );
            }
        }
    }
    Ok(())
}

fn cmd_plan_classical(cli: &Cli, input: &ProblemArgs, search: &SearchArgs, out: Option<&Path>) -> CmdResult {
    let gp = load(input)?;
    let plan = classical_plan(&gp, gp.init(), gp.goal(), &search.config()).exit(EXIT_PLANNING)?;
    validate_plan(&gp, &plan, gp.goal()).exit(EXIT_INTERNAL)?;
    let text = format_plan(&gp, &plan);
    if let Some(path) = out {
        write(path, &text)?;
    }
    match cli.format {
        Format::Json => {
            let actions: Vec<String> = plan.iter().map(|&a| gp.action_text(a)).collect();
            print!("{}", pretty(&json!({ "length": plan.len(), "plan": actions })));
        }
        Format::Text => {
            print!("{text}");
            println!("; length {}", plan.len());
        }
    }
    Ok(())
}

fn graph_summary(gp: &GroundProblem, g: &LandmarkGraph, seq: &[htnlearn::AtomId]) -> Value {
    json!({
        "graph": g.to_json(),
        "sequence": seq.iter().map(|&a| gp.atom_text(a)).collect::<Vec<_>>(),
    })
}

fn cmd_landmarks(
    cli: &Cli,
    input: &ProblemArgs,
    mode: ReasonableMode,
    out: Option<&Path>,
    dot: Option<&Path>,
) -> CmdResult {
    let gp = load(input)?;
    let g = landmark_graph(&gp, mode).exit(EXIT_PLANNING)?;
    let seq = g.topo_sequence().exit(EXIT_INTERNAL)?;
    if let Some(path) = out {
        write(path, &pretty(&serde_json::to_value(g.to_json()).expect("graph serializes")))?;
    }
    if let Some(path) = dot {
        write(path, &g.to_dot())?;
    }
    match cli.format {
        Format::Json => print!("{}", pretty(&graph_summary(&gp, &g, &seq))),
        Format::Text => {
            for n in &g.nodes {
                let mut tags = Vec::new();
                if n.initial {
                    tags.push("initial");
                }
                if n.goal {
                    tags.push("goal");
                }
                println!("landmark {} {}", n.text, tags.join(" "));
            }
            for e in g.edges() {
                println!(
                    "order {} {} {}",
                    g.nodes[e.from].text,
                    e.kind.label(),
                    g.nodes[e.to].text
                );
            }
            let seq: Vec<String> = seq.iter().map(|&a| gp.atom_text(a)).collect();
            println!("sequence {}", seq.join(" "));
        }
    }
    Ok(())
}

fn cmd_curriculum(
    cli: &Cli,
    input: &ProblemArgs,
    args: &CurriculumArgs,
    graph: Option<&Path>,
    out: Option<&Path>,
) -> CmdResult {
    let gp = load(input)?;
    let cfg = args.config();
    let g = match graph {
        Some(path) => {
            let json: GraphJson = load_json(path)?;
            LandmarkGraph::from_json(&gp, &json).exit(EXIT_PARSE)?
        }
        None => landmark_graph(&gp, cfg.reasonable).exit(EXIT_PLANNING)?,
    };
    let seq = g.topo_sequence().exit(EXIT_INTERNAL)?;
    let mut tasks = TaskTable::default();
    let generated = curricugen_from_sequence(&gp, &seq, &cfg, &mut tasks).exit(EXIT_PLANNING)?;
    let json = generated.curriculum.to_json(&gp, &generated.trace, &tasks);
    let value = serde_json::to_value(&json).expect("curriculum serializes");
    if let Some(path) = out {
        write(path, &pretty(&value))?;
    }
    match cli.format {
        Format::Json => print!("{}", pretty(&value)),
        Format::Text => {
            for (i, a) in json.trace.iter().enumerate() {
                println!("trace {} {a}", i + 1);
            }
            for (i, s) in generated.curriculum.steps.iter().enumerate() {
                println!("step {} ({}, {}) {}", i + 1, s.begin, s.end, s.task.text(&gp));
            }
            for t in &generated.curriculum.trivial {
                println!("trivial {} {}", t.at, t.task.text(&gp));
            }
        }
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_learn(
    cli: &Cli,
    domain: &Path,
    problems: &[PathBuf],
    methods_in: Option<&Path>,
    out: &Path,
    curricula: &[PathBuf],
    shop: Option<&Path>,
    keep_going: bool,
    args: &CurriculumArgs,
) -> CmdResult {
    if !curricula.is_empty() && curricula.len() != problems.len() {
        return Err(anyhow!("{} curricula given for {} problems", curricula.len(), problems.len())).exit(EXIT_PARSE);
    }
    let dom = load_domain(domain)?;
    let mut lib = match methods_in {
        Some(path) => {
            let json: LibraryJson = load_json(path)?;
            MethodLibrary::from_json(&json, &dom).exit(EXIT_PARSE)?
        }
        None => MethodLibrary::default(),
    };
    let cfg = args.config();
    let mut stats = Vec::new();
    let mut failed = 0;
    for (i, path) in problems.iter().enumerate() {
        let gp = load_problem(&dom, path)?;
        let ordinal = i + 1;
        let outcome = match curricula.get(i) {
            Some(cpath) => {
                let json: CurriculumJson = load_json(cpath)?;
                let (trace, curriculum) = Curriculum::from_json(&gp, &json, &mut lib.tasks).exit(EXIT_PARSE)?;
                curriculearn(&gp, &trace, &curriculum, &mut lib, ordinal)
                    .map(|r| (None, trace.len(), curriculum.steps.len(), r.new_methods.len()))
                    .map_err(anyhow::Error::from)
            }
            None => learn_from_problem(&gp, &mut lib, &cfg, ordinal)
                .map(|l| {
                    (
                        Some(l.graph.nodes.len()),
                        l.generated.trace.len(),
                        l.generated.curriculum.steps.len(),
                        l.report.new_methods.len(),
                    )
                })
                .map_err(anyhow::Error::from),
        };
        match outcome {
            Ok((landmarks, trace, steps, new)) => stats.push((gp.name().to_string(), landmarks, trace, steps, new)),
            Err(e) if keep_going => {
                log::warn!("{}: {e:#}; skipped", path.display());
                failed += 1;
            }
            Err(e) => return Err(e.context(format!("learning from {}", path.display()))).exit(EXIT_PLANNING),
        }
    }
    write(out, &library_text(&lib, &dom))?;
    if let Some(path) = shop {
        write(path, &lib.to_shop(&dom))?;
    }
    match cli.format {
        Format::Json => {
            let per: Vec<Value> = stats
                .iter()
                .map(|(name, landmarks, trace, steps, new)| {
                    json!({"problem": name, "landmarks": landmarks, "trace_length": trace, "steps": steps, "new_methods": new})
                })
                .collect();
            print!("{}", pretty(&json!({"problems": per, "failed": failed, "methods": lib.len()})));
        }
        Format::Text => {
            for (name, landmarks, trace, steps, new) in &stats {
                let landmarks = landmarks.map_or("-".to_string(), |n| n.to_string());
                println!("{name} landmarks {landmarks} trace {trace} steps {steps} new-methods {new}");
            }
            if failed > 0 {
                println!("failed {failed}");
            }
            println!("methods {}", lib.len());
        }
    }
    Ok(())
}

fn cmd_plan_htn(
    cli: &Cli,
    input: &ProblemArgs,
    methods: &Path,
    mode: ReasonableMode,
    cfg: HtnConfig,
    out: Option<&Path>,
) -> CmdResult {
    let gp = load(input)?;
    let json: LibraryJson = load_json(methods)?;
    let lib = MethodLibrary::from_json(&json, &gp.domain).exit(EXIT_PARSE)?;
    let roots = root_tasks_from_goal(&gp, mode).exit(EXIT_PLANNING)?;
    let (plan, trace) = htn_solve(&gp, &lib, gp.init(), &roots, &cfg).exit(EXIT_PLANNING)?;
    validate_plan(&gp, &plan, gp.goal()).exit(EXIT_INTERNAL)?;
    let text = format_plan(&gp, &plan);
    if let Some(path) = out {
        write(path, &text)?;
    }
    match cli.format {
        Format::Json => {
            let actions: Vec<String> = plan.iter().map(|&a| gp.action_text(a)).collect();
            print!(
                "{}",
                pretty(&json!({
                    "roots": roots.iter().map(|r| r.text(&gp)).collect::<Vec<_>>(),
                    "length": plan.len(),
                    "plan": actions,
                    "decomposition": trace.to_json(&gp),
                }))
            );
        }
        Format::Text => {
            let roots: Vec<String> = roots.iter().map(|r| r.text(&gp)).collect();
            println!("; roots {}", roots.join(" "));
            print!("{text}");
            println!("; length {}", plan.len());
        }
    }
    Ok(())
}

fn cmd_experiment(cli: &Cli, args: &ExperimentArgs) -> CmdResult {
    let mut cfg = match &args.config {
        Some(path) => ExperimentConfig::from_file(path)
            .with_context(|| format!("in {}", path.display()))
            .exit(EXIT_PARSE)?,
        None => ExperimentConfig::default(),
    };
    cfg.seed = cli.seed;
    if let Some(d) = args.domain {
        cfg.domain = d;
    }
    if let Some(n) = args.n_train {
        cfg.n_train = n;
    }
    if let Some(n) = args.n_test {
        cfg.n_test = n;
    }
    if let Some(n) = args.n_trials {
        cfg.n_trials = n;
    }
    if let Some(n) = args.min_blocks {
        cfg.blocks.min_blocks = n;
    }
    if let Some(n) = args.max_blocks {
        cfg.blocks.max_blocks = n;
    }
    if let Some(m) = args.reasonable {
        cfg.curriculum.reasonable = m;
    }
    if let Some(n) = args.max_decompositions {
        cfg.htn.max_decompositions = n;
    }
    if args.output_dir.is_some() {
        cfg.output_dir = args.output_dir.clone();
    }
    let result = run_experiment(&cfg).exit(EXIT_PARSE)?;
    if let Some(dir) = &cfg.output_dir {
        result.write_artifacts(dir).exit(EXIT_INTERNAL)?;
    }
    match cli.format {
        Format::Json => print!("{}", pretty(&result.summary_json())),
        Format::Text => print!("{}", result.csv_string(!args.no_times)),
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_gen(
    cli: &Cli,
    kind: GenKind,
    blocks: usize,
    moves: usize,
    logistics: LogisticsParams,
    out: Option<&Path>,
    domain_out: Option<&Path>,
) -> CmdResult {
    let (dom, prob) = match kind {
        GenKind::Blocks => {
            if blocks == 0 {
                return Err(anyhow!("need at least one block")).exit(EXIT_PARSE);
            }
            let dom = DomainKind::Blocks.domain();
            let p = gen_blocks(blocks, moves, cli.seed, &dom);
            (dom, p)
        }
        GenKind::Logistics => {
            if logistics.cities == 0 || logistics.locs_per_city == 0 || logistics.packages == 0 {
                return Err(anyhow!("logistics counts must be at least 1")).exit(EXIT_PARSE);
            }
            let dom = DomainKind::Logistics.domain();
            let p = gen_logistics(logistics, cli.seed, &dom);
            (dom, p)
        }
    };
    let text = prob.to_pddl(&dom);
    if let Some(path) = domain_out {
        write(path, &dom.to_string())?;
    }
    match out {
        Some(path) => write(path, &text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn cmd_validate(cli: &Cli, input: &ProblemArgs, plan: &Path) -> CmdResult {
    let gp = load(input)?;
    let text = read(plan)?;
    let actions = parse_plan(&gp, &text).exit(EXIT_PARSE)?;
    let verdict = validate_plan(&gp, &actions, gp.goal());
    match cli.format {
        Format::Json => print!(
            "{}",
            pretty(&json!({
                "valid": verdict.is_ok(),
                "length": actions.len(),
                "error": verdict.as_ref().err().map(|e| e.to_string()),
            }))
        ),
        Format::Text => match &verdict {
            Ok(_) => println!("valid length {}", actions.len()),
            Err(e) => println!("invalid {e}"),
        },
    }
    verdict.map(|_| ()).exit(EXIT_PLANNING)
}

fn run(cli: &Cli) -> CmdResult {
    match &cli.command {
        Command::Parse { domain, problem } => cmd_parse(cli, domain, problem),
        Command::PlanClassical { input, search, out } => cmd_plan_classical(cli, input, search, out.as_deref()),
        Command::Landmarks {
            input,
            reasonable,
            out,
            dot,
        } => cmd_landmarks(cli, input, *reasonable, out.as_deref(), dot.as_deref()),
        Command::Curriculum {
            input,
            learn,
            graph,
            out,
        } => cmd_curriculum(cli, input, learn, graph.as_deref(), out.as_deref()),
        Command::Learn {
            domain,
            problem,
            methods_in,
            out,
            curriculum,
            shop,
            keep_going,
            learn,
        } => cmd_learn(
            cli,
            domain,
            problem,
            methods_in.as_deref(),
            out,
            curriculum,
            shop.as_deref(),
            *keep_going,
            learn,
        ),
        Command::PlanHtn {
            input,
            methods,
            reasonable,
            max_decompositions,
            depth_limit,
            out,
        } => cmd_plan_htn(
            cli,
            input,
            methods,
            *reasonable,
            HtnConfig {
                max_decompositions: *max_decompositions,
                depth_limit: *depth_limit,
            },
            out.as_deref(),
        ),
        Command::Experiment(args) => cmd_experiment(cli, args),
        Command::Gen {
            kind,
            blocks,
            moves,
            cities,
            locations,
            packages,
            out,
            domain_out,
        } => cmd_gen(
            cli,
            *kind,
            *blocks,
            *moves,
            LogisticsParams {
                cities: *cities,
                locs_per_city: *locations,
                packages: *packages,
                ..LogisticsParams::default()
            },
            out.as_deref(),
            domain_out.as_deref(),
        ),
        Command::Validate { input, plan } => cmd_validate(cli, input, plan),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}
