use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use crate::dynamics::{default_max_steps, run_episode};
use crate::error::{Error, Result};
use crate::graph::{Case, Scenario};
use crate::neural::GcnModel;
use crate::planners::{PlannerKind, StandardPlanner};
use crate::rng::derived_rng;
use crate::scenario_io::read_dataset;
use crate::training::RewardKind;

pub const EVAL_CSV_HEADER: &str =
    "planner,case,n,budget,degree,episodes,mean_rate,std_rate,mean_steps";
pub const RAW_CSV_HEADER: &str = "planner,budget,scenario,final_rate,steps,error";
pub const REWARD_CSV_HEADER: &str = "budget,reward,episodes,mean_rate,std_rate,mean_steps";
pub const MAX_RAW_ROWS: usize = 1_000_000;
/// Largest tolerated share of failed episodes in one cell.
pub const MAX_FAILURE_FRACTION: f64 = 0.01;

/// A planner plus the label it reports under.
#[derive(Debug, Clone)]
pub struct PlannerEntry {
    pub label: String,
    pub kind: PlannerKind,
    pub model: Option<Arc<GcnModel>>,
}

impl PlannerEntry {
    pub fn new(kind: PlannerKind, model: Option<Arc<GcnModel>>) -> Result<Self> {
        StandardPlanner::new(kind, model.clone())?;
        Ok(PlannerEntry {
            label: kind.id().to_string(),
            kind,
            model,
        })
    }

    pub fn labelled(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }
}

#[derive(Debug, Clone)]
pub struct EvalSpec {
    pub planners: Vec<PlannerEntry>,
    pub budgets: Vec<usize>,
    /// `None` means four times the node count.
    pub max_steps: Option<usize>,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpisodeRecord {
    pub planner: String,
    pub budget: usize,
    pub scenario: usize,
    pub final_rate: f64,
    pub steps: usize,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalRecord {
    pub planner: String,
    pub case: Case,
    pub n: usize,
    pub budget: usize,
    pub degree: Option<usize>,
    /// Successful episodes.
    pub episodes: usize,
    pub mean_rate: f64,
    pub std_rate: f64,
    pub mean_steps: f64,
    pub failures: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub records: Vec<EvalRecord>,
    pub episodes: Vec<EpisodeRecord>,
}

fn aggregate(
    entry: &str,
    scenarios: &[Scenario],
    degree: Option<usize>,
    budget: usize,
    rows: &[EpisodeRecord],
) -> Result<EvalRecord> {
    let ok: Vec<&EpisodeRecord> = rows.iter().filter(|r| r.error.is_none()).collect();
    let failures = rows.len() - ok.len();
    if failures as f64 > MAX_FAILURE_FRACTION * rows.len() as f64 {
        let first = rows
            .iter()
            .find_map(|r| r.error.clone())
            .unwrap_or_default();
        return Err(Error::Contract(format!(
            "planner {entry} at budget {budget}: {failures} of {} episodes failed; first: {first}",
            rows.len()
        )));
    }
    let count = ok.len().max(1) as f64;
    let mean_rate = ok.iter().map(|r| r.final_rate).sum::<f64>() / count;
    let var = ok
        .iter()
        .map(|r| (r.final_rate - mean_rate).powi(2))
        .sum::<f64>()
        / count;
    let mean_steps = ok.iter().map(|r| r.steps as f64).sum::<f64>() / count;
    let first = &scenarios[0];
    Ok(EvalRecord {
        planner: entry.to_string(),
        case: first.case,
        n: first.state.num_nodes(),
        budget,
        degree,
        episodes: ok.len(),
        mean_rate,
        std_rate: var.sqrt(),
        mean_steps,
        failures,
    })
}

fn run_cell(
    entry: &PlannerEntry,
    scenarios: &[Scenario],
    budget: usize,
    spec: &EvalSpec,
) -> Result<Vec<EpisodeRecord>> {
    scenarios
        .par_iter()
        .enumerate()
        .map(|(idx, scenario)| {
            let mut planner = StandardPlanner::new(entry.kind, entry.model.clone())?;
            let mut rng = derived_rng(spec.seed, &[idx as u64, entry.kind.index(), budget as u64]);
            let max_steps = spec
                .max_steps
                .unwrap_or_else(|| default_max_steps(scenario.state.num_nodes()));
            let record = |final_rate, steps, error| EpisodeRecord {
                planner: entry.label.clone(),
                budget,
                scenario: idx,
                final_rate,
                steps,
                error,
            };
            match run_episode(scenario, &mut planner, budget, max_steps, &mut rng) {
                Ok(t) => Ok(record(t.final_infection_rate, t.len(), None)),
                Err(Error::Contract(m)) => Ok(record(f64::NAN, 0, Some(m))),
                Err(e) => Err(e),
            }
        })
        .collect()
}

/// Runs every (planner, budget) pair over every scenario.
pub fn evaluate(
    scenarios: &[Scenario],
    degree: Option<usize>,
    spec: &EvalSpec,
) -> Result<EvalReport> {
    if scenarios.is_empty() {
        return Err(Error::Parameter("no scenarios to evaluate".into()));
    }
    if spec.budgets.contains(&0) {
        return Err(Error::Parameter("budgets must be at least 1".into()));
    }
    let mut records = Vec::new();
    let mut episodes = Vec::new();
    for entry in &spec.planners {
        for &budget in &spec.budgets {
            let rows = run_cell(entry, scenarios, budget, spec)?;
            records.push(aggregate(&entry.label, scenarios, degree, budget, &rows)?);
            episodes.extend(rows);
        }
    }
    Ok(EvalReport { records, episodes })
}

/// Loads and validates a dataset file, then evaluates it. The degree column
/// comes from a `deg<k>` file name.
pub fn evaluate_dataset(path: &Path, spec: &EvalSpec) -> Result<EvalReport> {
    let scenarios = read_dataset(path)?;
    let degree = path
        .file_stem()
        .and_then(|s| s.to_str())
        .and_then(|s| s.strip_prefix("deg"))
        .and_then(|k| k.parse().ok());
    evaluate(&scenarios, degree, spec)
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn write_eval_csv(path: &Path, records: &[EvalRecord]) -> Result<()> {
    let mut out = String::from(EVAL_CSV_HEADER);
    out.push('\n');
    for r in records {
        let degree = r.degree.map(|d| d.to_string()).unwrap_or_default();
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            r.planner,
            r.case.name(),
            r.n,
            r.budget,
            degree,
            r.episodes,
            r.mean_rate,
            r.std_rate,
            r.mean_steps
        )
        .unwrap();
    }
    write_text(path, &out)
}

/// Per-episode rows, capped at [`MAX_RAW_ROWS`]. Returns whether rows were
/// dropped; a trailing comment line records how many.
pub fn write_raw_csv(path: &Path, episodes: &[EpisodeRecord]) -> Result<bool> {
    let mut out = String::from(RAW_CSV_HEADER);
    out.push('\n');
    for e in episodes.iter().take(MAX_RAW_ROWS) {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            e.planner,
            e.budget,
            e.scenario,
            e.final_rate,
            e.steps,
            e.error.as_deref().unwrap_or("").replace([',', '\n'], ";")
        )
        .unwrap();
    }
    let truncated = episodes.len() > MAX_RAW_ROWS;
    if truncated {
        writeln!(
            out,
            "# truncated: {} rows omitted",
            episodes.len() - MAX_RAW_ROWS
        )
        .unwrap();
    }
    write_text(path, &out)?;
    Ok(truncated)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RewardRow {
    pub budget: usize,
    pub reward: RewardKind,
    pub episodes: usize,
    pub mean_rate: f64,
    pub std_rate: f64,
    pub mean_steps: f64,
}

/// Evaluates one value model per reward kind; one row per (budget, kind).
pub fn compare_rewards(
    models: &[(RewardKind, Arc<GcnModel>)],
    scenarios: &[Scenario],
    budgets: &[usize],
    max_steps: Option<usize>,
    seed: u64,
) -> Result<Vec<RewardRow>> {
    let planners = models
        .iter()
        .map(|(kind, m)| {
            Ok(PlannerEntry::new(PlannerKind::ValueGreedy, Some(m.clone()))?.labelled(kind.id()))
        })
        .collect::<Result<Vec<_>>>()?;
    let spec = EvalSpec {
        planners,
        budgets: budgets.to_vec(),
        max_steps,
        seed,
    };
    let report = evaluate(scenarios, None, &spec)?;
    let mut rows: Vec<RewardRow> = report
        .records
        .iter()
        .zip(
            models
                .iter()
                .flat_map(|(k, _)| budgets.iter().map(move |_| *k)),
        )
        .map(|(r, kind)| RewardRow {
            budget: r.budget,
            reward: kind,
            episodes: r.episodes,
            mean_rate: r.mean_rate,
            std_rate: r.std_rate,
            mean_steps: r.mean_steps,
        })
        .collect();
    rows.sort_by_key(|r| (r.budget, r.reward.id()));
    Ok(rows)
}

pub fn write_reward_csv(path: &Path, rows: &[RewardRow]) -> Result<()> {
    let mut out = String::from(REWARD_CSV_HEADER);
    out.push('\n');
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            r.budget, r.reward, r.episodes, r.mean_rate, r.std_rate, r.mean_steps
        )
        .unwrap();
    }
    write_text(path, &out)
}
