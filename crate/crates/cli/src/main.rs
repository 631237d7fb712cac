use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Instant;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use serde_json::json;

use opinet::dynamics::{default_max_steps, run_episode, DynamicsConfig};
use opinet::harness::{
    compare_rewards, evaluate_dataset, generate_dataset, write_eval_csv, write_raw_csv,
    write_reward_csv, DatasetSpec, DatasetVersion, EvalSpec, PlannerEntry,
};
use opinet::neural::{load_model, load_model_with_head, save_model};
use opinet::oracle::{rank_with_fallback, SearchSpace};
use opinet::rng::derived_rng;
use opinet::scenario_io::{encode_scenario, import_edge_list, read_dataset, read_scenario};
use opinet::training::{train_rl, train_sl, write_manifest, RunManifest, SlConfig, TrainConfig};
use opinet::{
    init_state, Case, ErrorKind, GcnModel, Head, InfectedCount, InitParams, PlannerKind,
    Propagation, RewardKind, Scenario, ScenarioTemplate, StandardPlanner, TrustModel,
};

#[derive(Parser)]
#[command(
    name = "opinet",
    version,
    about = "Misinformation blocking on opinion networks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw one random scenario (or build one from an edge list) as JSON.
    GenGraph(GenGraphArgs),
    /// Write a v1 or v2 evaluation dataset.
    GenDataset(GenDatasetArgs),
    /// Train a classifier on oracle labels.
    TrainSl(TrainSlArgs),
    /// Train a value network with experience replay.
    TrainRl(TrainRlArgs),
    /// Run one episode with a planner and print the trajectory.
    Simulate(SimulateArgs),
    /// Print the exact best blocker set for a scenario.
    Oracle(OracleArgs),
    /// Evaluate planners on dataset files and write a CSV.
    Evaluate(EvaluateArgs),
    /// Evaluate one value model per reward kind and write a pivot CSV.
    CompareRewards(CompareArgs),
}

#[derive(Args, Clone)]
struct ScenarioArgs {
    #[arg(long, default_value = "1")]
    case: Case,
    /// Defaults to the case's own propagation rule.
    #[arg(long)]
    propagation: Option<Propagation>,
    #[arg(long, default_value_t = 10)]
    nodes: usize,
    /// Initially infected nodes; a range such as `1-3` draws uniformly.
    #[arg(long, default_value = "1")]
    infected: String,
    #[arg(long, default_value_t = 1.0)]
    source_trust: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl ScenarioArgs {
    fn infected(&self) -> Result<InfectedCount> {
        let parse = |s: &str| {
            s.trim()
                .parse::<usize>()
                .map_err(|_| config_err(format!("bad --infected `{}`", self.infected)))
        };
        Ok(match self.infected.split_once('-') {
            Some((a, b)) => InfectedCount::Uniform {
                min: parse(a)?,
                max: parse(b)?,
            },
            None => InfectedCount::Fixed(parse(&self.infected)?),
        })
    }

    fn template(&self) -> Result<ScenarioTemplate> {
        let mut t = ScenarioTemplate::new(self.case, self.nodes);
        if let Some(p) = self.propagation {
            t.propagation = p;
        }
        t.infected = self.infected()?;
        t.source_trust = self.source_trust;
        Ok(t)
    }
}

#[derive(Args)]
struct GenGraphArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    /// Build the network from a whitespace edge list instead of drawing it.
    #[arg(long)]
    edge_list: Option<PathBuf>,
    /// Output file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct GenDatasetArgs {
    #[arg(long, default_value = "1")]
    case: Case,
    #[arg(long = "dataset-version", default_value = "v1")]
    version: DatasetVersion,
    #[arg(long, value_delimiter = ',', default_value = "10,25,50")]
    nodes: Vec<usize>,
    #[arg(long, default_value_t = 1000)]
    states: usize,
    #[arg(long, default_value_t = 1.0)]
    source_trust: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct TrainSlArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    #[arg(long, default_value_t = 1)]
    budget: usize,
    #[arg(long, default_value_t = 1000)]
    epochs: usize,
    #[arg(long, default_value_t = 1e-3)]
    lr: f64,
    #[arg(long, default_value_t = 128)]
    hidden: usize,
    #[arg(long)]
    max_steps: Option<usize>,
    /// Checkpoint path; the run manifest is written beside it.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct TrainRlArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    #[arg(long, default_value = "r1")]
    reward: RewardKind,
    #[arg(long, default_value_t = 1)]
    budget: usize,
    #[arg(long, default_value_t = 300)]
    episodes: usize,
    /// Parallel environments per episode.
    #[arg(long, default_value_t = 200)]
    states: usize,
    #[arg(long, default_value_t = 100)]
    batch: usize,
    #[arg(long, default_value_t = 5e-4)]
    lr: f64,
    /// Environment transitions between target-network syncs.
    #[arg(long, default_value_t = 200)]
    target_interval: usize,
    /// Timesteps over which epsilon anneals; defaults to three per episode.
    #[arg(long)]
    epsilon_steps: Option<usize>,
    #[arg(long, default_value_t = 50)]
    validation: usize,
    #[arg(long, default_value_t = 128)]
    hidden: usize,
    #[arg(long)]
    max_steps: Option<usize>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    /// Scenario file; drawn from the scenario flags when omitted.
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long, default_value = "random")]
    planner: PlannerKind,
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    budget: usize,
    #[arg(long)]
    max_steps: Option<usize>,
}

#[derive(Args)]
struct OracleArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    budget: usize,
    /// Search the whole susceptible set rather than the frontier.
    #[arg(long)]
    all_susceptible: bool,
    #[arg(long)]
    max_steps: Option<usize>,
}

#[derive(Args)]
struct EvaluateArgs {
    /// Dataset files (JSONL).
    #[arg(long = "dataset", required = true)]
    datasets: Vec<PathBuf>,
    #[arg(
        long,
        value_delimiter = ',',
        default_value = "random,maxdeg-static,maxdeg-dyn"
    )]
    planner: Vec<PlannerKind>,
    /// Checkpoints for learned planners, matched by head.
    #[arg(long)]
    model: Vec<PathBuf>,
    #[arg(long, value_delimiter = ',', default_value = "1,2,3")]
    budget: Vec<usize>,
    #[arg(long)]
    max_steps: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Aggregate CSV; per-episode rows go to `<stem>.raw.csv` beside it.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct CompareArgs {
    #[arg(long)]
    dataset: PathBuf,
    /// `<reward>=<checkpoint>`, repeated once per reward kind.
    #[arg(long, required = true)]
    model: Vec<String>,
    #[arg(long, value_delimiter = ',', default_value = "1,2,3")]
    budget: Vec<usize>,
    #[arg(long)]
    max_steps: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

fn config_err(msg: impl Into<String>) -> anyhow::Error {
    anyhow::Error::new(opinet::Error::Config(msg.into()))
}

fn load_scenario(input: Option<&Path>, args: &ScenarioArgs) -> Result<Scenario> {
    match input {
        Some(path) => Ok(read_scenario(path)?),
        None => Ok(args.template()?.sample(args.seed)?.0),
    }
}

fn gen_graph(args: GenGraphArgs) -> Result<()> {
    let s = &args.scenario;
    let scenario = match &args.edge_list {
        Some(path) => {
            let trust = match TrustModel::for_case(s.case) {
                TrustModel::Binary => 1.0,
                TrustModel::Uniform { high, .. } => high,
            };
            let network = Arc::new(import_edge_list(path, trust)?);
            let count = match s.infected()? {
                InfectedCount::Fixed(k) => k,
                InfectedCount::Uniform { min, .. } => min,
            };
            let state = init_state(network, &InitParams::new(s.case, count), s.seed)?;
            let propagation = s.propagation.unwrap_or(s.case.default_propagation());
            Scenario::new(state, s.case, propagation, s.source_trust, s.seed)?
        }
        None => s.template()?.sample(s.seed)?.0,
    };
    let text = encode_scenario(&scenario)?;
    match &args.out {
        Some(path) => {
            if let Some(dir) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
                fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
            }
            fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display()))?;
        }
        None => println!("{text}"),
    }
    Ok(())
}

fn gen_dataset(args: GenDatasetArgs) -> Result<()> {
    let mut spec = DatasetSpec::new(args.version, args.case, args.nodes, args.seed);
    spec.states_per_config = args.states;
    spec.source_trust = args.source_trust;
    for f in generate_dataset(&spec, &args.out)? {
        if f.reseeds > 0 {
            eprintln!(
                "{}: {} network redraws to meet constraints",
                f.path.display(),
                f.reseeds
            );
        }
        println!("{}\t{}", f.path.display(), f.scenarios);
    }
    Ok(())
}

fn manifest_path(checkpoint: &Path) -> PathBuf {
    checkpoint.with_extension("manifest.json")
}

fn train_sl_cmd(args: TrainSlArgs) -> Result<()> {
    let start = Instant::now();
    let mut cfg = SlConfig::new(args.scenario.seed);
    cfg.template = args.scenario.template()?;
    cfg.budget = args.budget;
    cfg.epochs = args.epochs;
    cfg.lr = args.lr;
    cfg.arch.hidden = args.hidden;
    cfg.max_steps = args.max_steps;
    let out = train_sl(&cfg)?;
    save_model(&args.out, &out.model, Some(&out.adam))?;
    write_manifest(
        manifest_path(&args.out),
        &RunManifest {
            trainer: "sl",
            config: &cfg,
            seed: cfg.seed,
            loss_log: &out.loss_log,
            reward_log: &[],
            validation_log: &[],
            wall_time_secs: start.elapsed().as_secs_f64(),
        },
    )?;
    if out.fallback_labels > 0 {
        eprintln!(
            "{} of {} labels used greedy fallback",
            out.fallback_labels, out.labels
        );
    }
    println!("{}", args.out.display());
    Ok(())
}

fn train_rl_cmd(args: TrainRlArgs) -> Result<()> {
    let start = Instant::now();
    let s = &args.scenario;
    let mut cfg = TrainConfig::new(s.case, s.nodes, args.reward, s.seed);
    cfg.template = s.template()?;
    cfg.budget = args.budget;
    cfg.episodes = args.episodes;
    cfg.states_per_episode = args.states;
    cfg.batch_size = args.batch;
    cfg.lr = args.lr;
    cfg.target_update_interval = args.target_interval;
    cfg.epsilon_decay_steps = args.epsilon_steps.unwrap_or(3 * args.episodes);
    cfg.validation_size = args.validation;
    cfg.arch.hidden = args.hidden;
    cfg.max_steps = args.max_steps;
    let out = train_rl(&cfg)?;
    save_model(&args.out, &out.model, Some(&out.adam))?;
    write_manifest(
        manifest_path(&args.out),
        &RunManifest {
            trainer: "rl",
            config: &cfg,
            seed: cfg.seed,
            loss_log: &out.loss_log,
            reward_log: &out.reward_log,
            validation_log: &out.validation_log,
            wall_time_secs: start.elapsed().as_secs_f64(),
        },
    )?;
    println!("{}", args.out.display());
    Ok(())
}

fn planner_model(kind: PlannerKind, path: Option<&Path>) -> Result<Option<Arc<GcnModel>>> {
    match (kind.required_head(), path) {
        (Some(head), Some(p)) => Ok(Some(Arc::new(load_model_with_head(p, head)?))),
        (Some(_), None) => Err(config_err(format!("planner `{kind}` needs --model"))),
        (None, _) => Ok(None),
    }
}

fn simulate(args: SimulateArgs) -> Result<()> {
    let scenario = load_scenario(args.input.as_deref(), &args.scenario)?;
    let model = planner_model(args.planner, args.model.as_deref())?;
    let mut planner = StandardPlanner::new(args.planner, model)?;
    let max_steps = args
        .max_steps
        .unwrap_or_else(|| default_max_steps(scenario.state.num_nodes()));
    let mut rng = derived_rng(scenario.seed, &[args.planner.index(), args.budget as u64]);
    let traj = run_episode(&scenario, &mut planner, args.budget, max_steps, &mut rng)?;
    let steps: Vec<_> = traj
        .steps
        .iter()
        .enumerate()
        .map(|(t, s)| {
            json!({
                "t": t + 1,
                "blockers": s.blockers,
                "newly_infected": s.outcome.newly_infected,
                "candidates": s.outcome.candidate_count_after,
                "infection_rate": s.outcome.infection_rate_after,
            })
        })
        .collect();
    let report = json!({
        "planner": args.planner.id(),
        "budget": args.budget,
        "initial_infection_rate": traj.initial_infection_rate,
        "final_infection_rate": traj.final_infection_rate,
        "steps": steps,
    });
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(())
}

fn oracle(args: OracleArgs) -> Result<()> {
    let scenario = load_scenario(args.input.as_deref(), &args.scenario)?;
    let cfg = DynamicsConfig::from_scenario(&scenario);
    let horizon = args
        .max_steps
        .unwrap_or_else(|| default_max_steps(scenario.state.num_nodes()));
    let space = if args.all_susceptible {
        SearchSpace::Susceptible
    } else {
        SearchSpace::Candidates
    };
    let (result, fell_back) =
        rank_with_fallback(&scenario.state, args.budget, &cfg, horizon, space)?;
    let report = json!({
        "best_set": result.best_set,
        "min_rate": result.min_rate,
        "target": result.target,
        "greedy_fallback": fell_back,
    });
    println!("{}", serde_json::to_string(&report)?);
    Ok(())
}

fn evaluate_cmd(args: EvaluateArgs) -> Result<()> {
    let mut by_head: Vec<(Head, Arc<GcnModel>)> = Vec::new();
    for path in &args.model {
        let (model, _) = load_model(path)?;
        by_head.push((model.head(), Arc::new(model)));
    }
    let planners = args
        .planner
        .iter()
        .map(|&kind| {
            let model = match kind.required_head() {
                Some(head) => Some(
                    by_head
                        .iter()
                        .find(|(h, _)| *h == head)
                        .map(|(_, m)| m.clone())
                        .ok_or_else(|| {
                            config_err(format!(
                                "planner `{kind}` needs a {} checkpoint",
                                head.name()
                            ))
                        })?,
                ),
                None => None,
            };
            Ok(PlannerEntry::new(kind, model)?)
        })
        .collect::<Result<Vec<_>>>()?;
    let spec = EvalSpec {
        planners,
        budgets: args.budget,
        max_steps: args.max_steps,
        seed: args.seed,
    };
    let mut records = Vec::new();
    let mut episodes = Vec::new();
    for path in &args.datasets {
        let report = evaluate_dataset(path, &spec)?;
        records.extend(report.records);
        episodes.extend(report.episodes);
    }
    write_eval_csv(&args.out, &records)?;
    let raw = args.out.with_extension("raw.csv");
    if write_raw_csv(&raw, &episodes)? {
        eprintln!("per-episode output truncated in {}", raw.display());
    }
    for r in &records {
        if r.failures > 0 {
            eprintln!(
                "{} budget {}: {} failed episodes",
                r.planner, r.budget, r.failures
            );
        }
    }
    println!("{}", args.out.display());
    Ok(())
}

fn compare_cmd(args: CompareArgs) -> Result<()> {
    let mut models = Vec::new();
    for entry in &args.model {
        let (kind, path) = entry
            .split_once('=')
            .ok_or_else(|| config_err(format!("--model expects <reward>=<path>, got `{entry}`")))?;
        let kind: RewardKind = kind.parse()?;
        if !Path::new(path).exists() {
            return Err(config_err(format!("missing checkpoint for {kind}: {path}")));
        }
        let model = load_model_with_head(path, Head::Value)?;
        models.push((kind, Arc::new(model)));
    }
    let scenarios = read_dataset(&args.dataset)?;
    let rows = compare_rewards(&models, &scenarios, &args.budget, args.max_steps, args.seed)?;
    write_reward_csv(&args.out, &rows)?;
    println!("{}", args.out.display());
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::GenGraph(a) => gen_graph(a),
        Command::GenDataset(a) => gen_dataset(a),
        Command::TrainSl(a) => train_sl_cmd(a),
        Command::TrainRl(a) => train_rl_cmd(a),
        Command::Simulate(a) => simulate(a),
        Command::Oracle(a) => oracle(a),
        Command::Evaluate(a) => evaluate_cmd(a),
        Command::CompareRewards(a) => compare_cmd(a),
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<opinet::Error>().map(|e| e.kind()) {
        Some(ErrorKind::Config) => 2,
        Some(ErrorKind::Contract) => 4,
        Some(ErrorKind::Data) | None => 3,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
