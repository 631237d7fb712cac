//! Blocker-selection strategies behind a single [`Planner`] interface.
//!
//! Every planner picks at most `budget` nodes from the current candidate set.
//! Deterministic planners break score ties toward the lower node id.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rand::seq::index::sample;

use crate::dynamics::{default_max_steps, step_unchecked, DynamicsConfig};
use crate::error::{Error, Result};
use crate::features::{effective_degree, feature_matrix, NUM_FEATURES};
use crate::graph::{Network, NetworkState, Scenario};
use crate::neural::{normalize_adjacency, GcnModel, Head, NormalizedAdjacency};
use crate::oracle::{rank_with_fallback, SearchSpace};
use crate::rng::Rng;

pub trait Planner {
    fn name(&self) -> &str;

    /// Called once before each episode.
    fn reset(&mut self, _scenario: &Scenario) {}

    fn select(
        &mut self,
        state: &NetworkState,
        config: &DynamicsConfig,
        budget: usize,
        rng: &mut Rng,
    ) -> Result<Vec<usize>>;
}

/// Top `budget` candidates by score, ties to the lower id, returned ascending.
fn top_by_score(mut scored: Vec<(usize, f64)>, budget: usize) -> Vec<usize> {
    scored.sort_by(|a, b| {
        let (x, y) = (a.1, b.1);
        match y.partial_cmp(&x) {
            Some(Ordering::Equal) | None => {
                // NaN scores rank last.
                match (x.is_nan(), y.is_nan()) {
                    (true, false) => Ordering::Greater,
                    (false, true) => Ordering::Less,
                    _ => a.0.cmp(&b.0),
                }
            }
            Some(o) => o,
        }
    });
    let mut picked: Vec<usize> = scored.into_iter().take(budget).map(|(i, _)| i).collect();
    picked.sort_unstable();
    picked
}

/// Uniform sample without replacement from the candidate set.
pub fn plan_random(state: &NetworkState, budget: usize, rng: &mut Rng) -> Vec<usize> {
    let candidates = state.candidates();
    let k = budget.min(candidates.len());
    let mut picked: Vec<usize> = sample(rng, candidates.len(), k)
        .into_iter()
        .map(|i| candidates[i])
        .collect();
    picked.sort_unstable();
    picked
}

/// Highest-degree candidates according to a degree table fixed at episode
/// start.
pub fn plan_max_degree_static(
    state: &NetworkState,
    initial_degrees: &[usize],
    budget: usize,
) -> Vec<usize> {
    let scored = state
        .candidates()
        .into_iter()
        .map(|i| (i, initial_degrees[i] as f64))
        .collect();
    top_by_score(scored, budget)
}

/// Highest effective-degree candidates in the current state.
pub fn plan_max_degree_dynamic(state: &NetworkState, budget: usize) -> Vec<usize> {
    let scored = state
        .candidates()
        .into_iter()
        .map(|i| (i, effective_degree(state, i) as f64))
        .collect();
    top_by_score(scored, budget)
}

fn check_model(model: &GcnModel, head: Head) -> Result<()> {
    model.require_head(head)?;
    if model.architecture().input != NUM_FEATURES {
        return Err(Error::Config(format!(
            "model input width {} differs from the {NUM_FEATURES} node features",
            model.architecture().input
        )));
    }
    Ok(())
}

/// Value of the state reached by blocking each candidate on its own.
pub fn value_scores(
    state: &NetworkState,
    model: &GcnModel,
    adjacency: &NormalizedAdjacency,
    config: &DynamicsConfig,
) -> Result<Vec<(usize, f64)>> {
    check_model(model, Head::Value)?;
    state
        .candidates()
        .into_iter()
        .map(|u| {
            let next = step_unchecked(state, &[u], config).next_state;
            Ok((u, model.value(&feature_matrix(&next), adjacency)?))
        })
        .collect()
}

/// Candidates whose single-node hypothetical successors score highest under
/// the value model. Rewards are penalties, so a higher value means less
/// predicted spread.
pub fn plan_value_greedy(
    state: &NetworkState,
    budget: usize,
    model: &GcnModel,
    adjacency: &NormalizedAdjacency,
    config: &DynamicsConfig,
) -> Result<Vec<usize>> {
    Ok(top_by_score(
        value_scores(state, model, adjacency, config)?,
        budget,
    ))
}

/// Candidates with the highest classifier probability.
pub fn plan_topk_classifier(
    state: &NetworkState,
    budget: usize,
    model: &GcnModel,
    adjacency: &NormalizedAdjacency,
) -> Result<Vec<usize>> {
    check_model(model, Head::Classifier)?;
    let probs = model.probabilities(&feature_matrix(state), adjacency)?;
    let scored = state
        .candidates()
        .into_iter()
        .map(|i| (i, probs[i]))
        .collect();
    Ok(top_by_score(scored, budget))
}

/// Exact search restricted to the frontier (greedy when the search is too
/// large).
pub fn plan_oracle(
    state: &NetworkState,
    budget: usize,
    config: &DynamicsConfig,
) -> Result<Vec<usize>> {
    if state.candidates().is_empty() {
        return Ok(Vec::new());
    }
    let horizon = default_max_steps(state.num_nodes());
    let (result, _) = rank_with_fallback(state, budget, config, horizon, SearchSpace::Candidates)?;
    Ok(result.best_set)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PlannerKind {
    Random,
    MaxDegreeStatic,
    MaxDegreeDynamic,
    OracleExact,
    ValueGreedy,
    TopKClassifier,
}

impl PlannerKind {
    pub const ALL: [PlannerKind; 6] = [
        PlannerKind::Random,
        PlannerKind::MaxDegreeStatic,
        PlannerKind::MaxDegreeDynamic,
        PlannerKind::OracleExact,
        PlannerKind::ValueGreedy,
        PlannerKind::TopKClassifier,
    ];

    pub fn id(self) -> &'static str {
        match self {
            PlannerKind::Random => "random",
            PlannerKind::MaxDegreeStatic => "maxdeg-static",
            PlannerKind::MaxDegreeDynamic => "maxdeg-dyn",
            PlannerKind::OracleExact => "oracle",
            PlannerKind::ValueGreedy => "rl",
            PlannerKind::TopKClassifier => "sl",
        }
    }

    /// Stable small integer used when deriving random streams.
    pub fn index(self) -> u64 {
        PlannerKind::ALL.iter().position(|&k| k == self).unwrap() as u64
    }

    pub fn required_head(self) -> Option<Head> {
        match self {
            PlannerKind::ValueGreedy => Some(Head::Value),
            PlannerKind::TopKClassifier => Some(Head::Classifier),
            _ => None,
        }
    }
}

impl fmt::Display for PlannerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for PlannerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        PlannerKind::ALL
            .into_iter()
            .find(|k| k.id() == s)
            .ok_or_else(|| Error::Config(format!("unknown planner `{s}`")))
    }
}

/// Normalized adjacency cached per network instance.
#[derive(Debug, Default, Clone)]
struct AdjacencyCache {
    entry: Option<(Arc<Network>, Arc<NormalizedAdjacency>)>,
}

impl AdjacencyCache {
    fn get(&mut self, network: &Arc<Network>) -> Arc<NormalizedAdjacency> {
        match &self.entry {
            Some((net, adj)) if Arc::ptr_eq(net, network) => adj.clone(),
            _ => {
                let adj = Arc::new(normalize_adjacency(network));
                self.entry = Some((network.clone(), adj.clone()));
                adj
            }
        }
    }
}

/// Concrete planner for any [`PlannerKind`].
#[derive(Debug, Clone)]
pub struct StandardPlanner {
    kind: PlannerKind,
    model: Option<Arc<GcnModel>>,
    initial_degrees: Vec<usize>,
    adjacency: AdjacencyCache,
}

impl StandardPlanner {
    pub fn new(kind: PlannerKind, model: Option<Arc<GcnModel>>) -> Result<Self> {
        match (kind.required_head(), &model) {
            (Some(head), Some(m)) => check_model(m, head)?,
            (Some(_), None) => {
                return Err(Error::Config(format!(
                    "planner `{kind}` needs a model checkpoint"
                )))
            }
            (None, _) => {}
        }
        Ok(StandardPlanner {
            kind,
            model,
            initial_degrees: Vec::new(),
            adjacency: AdjacencyCache::default(),
        })
    }

    pub fn kind(&self) -> PlannerKind {
        self.kind
    }
}

impl Planner for StandardPlanner {
    fn name(&self) -> &str {
        self.kind.id()
    }

    fn reset(&mut self, scenario: &Scenario) {
        let net = &scenario.state.network;
        self.initial_degrees = (0..net.num_nodes()).map(|i| net.degree(i)).collect();
    }

    fn select(
        &mut self,
        state: &NetworkState,
        config: &DynamicsConfig,
        budget: usize,
        rng: &mut Rng,
    ) -> Result<Vec<usize>> {
        match self.kind {
            PlannerKind::Random => Ok(plan_random(state, budget, rng)),
            PlannerKind::MaxDegreeStatic => {
                if self.initial_degrees.len() != state.num_nodes() {
                    let net = &state.network;
                    self.initial_degrees = (0..net.num_nodes()).map(|i| net.degree(i)).collect();
                }
                Ok(plan_max_degree_static(state, &self.initial_degrees, budget))
            }
            PlannerKind::MaxDegreeDynamic => Ok(plan_max_degree_dynamic(state, budget)),
            PlannerKind::OracleExact => plan_oracle(state, budget, config),
            PlannerKind::ValueGreedy => {
                let adj = self.adjacency.get(&state.network);
                let model = self.model.as_ref().expect("checked at construction");
                plan_value_greedy(state, budget, model, &adj, config)
            }
            PlannerKind::TopKClassifier => {
                let adj = self.adjacency.get(&state.network);
                let model = self.model.as_ref().expect("checked at construction");
                plan_topk_classifier(state, budget, model, &adj)
            }
        }
    }
}
