use std::sync::Arc;

use rand::Rng as _;
use rayon::prelude::*;
use serde::Serialize;

use super::replay::{ReplayBuffer, Transition, DEFAULT_REPLAY_CAPACITY};
use super::reward::{reward, EpisodeContext, RewardKind};
use super::{epsilon_at, ModelInit};
use crate::dynamics::{default_max_steps, run_episode, step_unchecked, DynamicsConfig};
use crate::error::{Error, Result};
use crate::features::feature_matrix;
use crate::graph::{Case, NetworkState, Scenario};
use crate::neural::{
    adam_step, normalize_adjacency, td_loss, AdamState, Architecture, DenseMatrix, GcnModel, Head,
    NormalizedAdjacency,
};
use crate::planners::{plan_random, plan_value_greedy, PlannerKind, StandardPlanner};
use crate::rng::{derive_seed, derived_rng, Rng};
use crate::template::ScenarioTemplate;

const MODEL_STREAM: u64 = 1;
const SCENARIO_STREAM: u64 = 2;
const ACTION_STREAM: u64 = 3;
const REPLAY_STREAM: u64 = 4;
const VALIDATION_STREAM: u64 = 5;

#[derive(Debug, Clone, Serialize)]
pub struct TrainConfig {
    pub template: ScenarioTemplate,
    pub budget: usize,
    pub reward: RewardKind,
    pub episodes: usize,
    /// Parallel environments per episode.
    pub states_per_episode: usize,
    pub batch_size: usize,
    pub lr: f64,
    /// Environment transitions between target-network syncs.
    pub target_update_interval: usize,
    pub epsilon_start: f64,
    pub epsilon_end: f64,
    /// Global timesteps over which epsilon anneals.
    pub epsilon_decay_steps: usize,
    pub replay_capacity: usize,
    pub validation_size: usize,
    /// Episode cap; `None` means four times the node count.
    pub max_steps: Option<usize>,
    pub arch: Architecture,
    pub init: ModelInit,
    pub seed: u64,
}

impl TrainConfig {
    pub fn new(case: Case, num_nodes: usize, reward: RewardKind, seed: u64) -> Self {
        let episodes = 300;
        TrainConfig {
            template: ScenarioTemplate::new(case, num_nodes),
            budget: 1,
            reward,
            episodes,
            states_per_episode: 200,
            batch_size: 100,
            lr: 5e-4,
            target_update_interval: 200,
            epsilon_start: 1.0,
            epsilon_end: 0.1,
            epsilon_decay_steps: 3 * episodes,
            replay_capacity: DEFAULT_REPLAY_CAPACITY,
            validation_size: 50,
            max_steps: None,
            arch: Architecture::default(),
            init: ModelInit::Glorot,
            seed,
        }
    }

    pub fn max_steps(&self) -> usize {
        self.max_steps
            .unwrap_or_else(|| default_max_steps(self.template.num_nodes))
    }

    pub fn validate(&self) -> Result<()> {
        let counts = [
            ("budget", self.budget),
            ("episodes", self.episodes),
            ("states_per_episode", self.states_per_episode),
            ("batch_size", self.batch_size),
            ("target_update_interval", self.target_update_interval),
            ("replay_capacity", self.replay_capacity),
            ("max_steps", self.max_steps()),
        ];
        if let Some((name, _)) = counts.iter().find(|(_, v)| *v == 0) {
            return Err(Error::Parameter(format!("{name} must be positive")));
        }
        if self.batch_size > self.replay_capacity {
            return Err(Error::Parameter(
                "batch_size exceeds replay capacity".into(),
            ));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::Parameter(format!(
                "learning rate must be positive, got {}",
                self.lr
            )));
        }
        let unit = |x: f64| (0.0..=1.0).contains(&x);
        if !(unit(self.epsilon_start)
            && unit(self.epsilon_end)
            && self.epsilon_end <= self.epsilon_start)
        {
            return Err(Error::Parameter(format!(
                "epsilon schedule {} -> {} must lie in [0, 1] and not increase",
                self.epsilon_start, self.epsilon_end
            )));
        }
        self.template.validate()
    }
}

#[derive(Debug, Clone)]
pub struct RlOutcome {
    /// Weights with the lowest validation infection rate.
    pub model: GcnModel,
    pub final_model: GcnModel,
    pub adam: AdamState,
    /// Loss of every gradient update, in order.
    pub loss_log: Vec<f64>,
    /// Mean per-environment return of each episode.
    pub reward_log: Vec<f64>,
    /// Mean final infection rate on the validation set after each episode.
    pub validation_log: Vec<f64>,
    pub best_episode: usize,
    pub target_syncs: usize,
}

struct Env {
    state: NetworkState,
    adjacency: Arc<NormalizedAdjacency>,
    features: DenseMatrix,
    config: DynamicsConfig,
    rng: Rng,
    t: usize,
    ret: f64,
    done: bool,
}

struct EnvStep {
    transition: Transition,
    next_state: NetworkState,
    done: bool,
}

fn act(
    env: &mut Env,
    model: &GcnModel,
    cfg: &TrainConfig,
    epsilon: f64,
    max_steps: usize,
) -> Result<EnvStep> {
    let explore = env.rng.gen::<f64>() < epsilon;
    let blockers = if explore {
        plan_random(&env.state, cfg.budget, &mut env.rng)
    } else {
        plan_value_greedy(&env.state, cfg.budget, model, &env.adjacency, &env.config)?
    };
    let outcome = step_unchecked(&env.state, &blockers, &env.config);
    let t = env.t + 1;
    let ctx = EpisodeContext {
        t,
        max_steps,
        terminal: outcome.terminal,
    };
    let r = reward(cfg.reward, &outcome, ctx);
    let next_features = feature_matrix(&outcome.next_state);
    Ok(EnvStep {
        transition: Transition {
            adjacency: env.adjacency.clone(),
            features: env.features.clone(),
            blockers,
            reward: r,
            next_features,
            terminal: outcome.terminal,
        },
        done: outcome.terminal || t >= max_steps,
        next_state: outcome.next_state,
    })
}

fn validation_rate(
    model: &Arc<GcnModel>,
    scenarios: &[Scenario],
    budget: usize,
    max_steps: usize,
) -> Result<f64> {
    let rates = scenarios
        .par_iter()
        .map(|s| {
            let mut planner = StandardPlanner::new(PlannerKind::ValueGreedy, Some(model.clone()))?;
            let mut rng = derived_rng(s.seed, &[]);
            Ok(run_episode(s, &mut planner, budget, max_steps, &mut rng)?.final_infection_rate)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(rates.iter().sum::<f64>() / rates.len().max(1) as f64)
}

/// Value-network training with experience replay and a lagged target
/// network. Deterministic for a fixed config.
pub fn train_rl(config: &TrainConfig) -> Result<RlOutcome> {
    config.validate()?;
    let seed = config.seed;
    let max_steps = config.max_steps();
    let mut model = match config.init {
        ModelInit::Glorot => {
            GcnModel::new(config.arch, Head::Value, derive_seed(seed, &[MODEL_STREAM]))
        }
        ModelInit::Zeros => GcnModel::zeros(config.arch, Head::Value),
    };
    let mut target = model.clone();
    let mut target_checksum = target.checksum();
    let mut adam = AdamState::new(&model);
    let mut replay = ReplayBuffer::new(config.replay_capacity, derive_seed(seed, &[REPLAY_STREAM]));

    let validation: Vec<Scenario> = (0..config.validation_size)
        .map(|j| {
            config
                .template
                .sample(derive_seed(
                    seed.wrapping_add(1),
                    &[VALIDATION_STREAM, j as u64],
                ))
                .map(|(s, _)| s)
        })
        .collect::<Result<_>>()?;

    let mut best: Option<(f64, GcnModel, usize)> = None;
    let mut loss_log = Vec::new();
    let mut reward_log = Vec::with_capacity(config.episodes);
    let mut validation_log = Vec::with_capacity(config.episodes);
    let mut global_step = 0;
    let mut since_sync = 0;
    let mut target_syncs = 0;

    for episode in 0..config.episodes {
        let mut envs: Vec<Env> = (0..config.states_per_episode)
            .map(|i| {
                let path = [SCENARIO_STREAM, episode as u64, i as u64];
                let (scenario, _) = config.template.sample(derive_seed(seed, &path))?;
                Ok(Env {
                    adjacency: Arc::new(normalize_adjacency(&scenario.state.network)),
                    features: feature_matrix(&scenario.state),
                    config: DynamicsConfig::from_scenario(&scenario),
                    state: scenario.state,
                    rng: derived_rng(seed, &[ACTION_STREAM, episode as u64, i as u64]),
                    t: 0,
                    ret: 0.0,
                    done: false,
                })
            })
            .collect::<Result<_>>()?;

        while envs.iter().any(|e| !e.done) {
            let epsilon = epsilon_at(
                config.epsilon_start,
                config.epsilon_end,
                global_step,
                config.epsilon_decay_steps,
            );
            let stepped: Vec<(usize, Result<EnvStep>)> = envs
                .par_iter_mut()
                .enumerate()
                .filter(|(_, e)| !e.done)
                .map(|(i, e)| (i, act(e, &model, config, epsilon, max_steps)))
                .collect();
            let mut pushed = 0;
            for (i, result) in stepped {
                let EnvStep {
                    transition,
                    next_state,
                    done,
                } = result.map_err(|e| match e {
                    Error::Contract(m) => Error::Contract(format!(
                        "episode {episode}, env {i}, step {}: {m}",
                        envs[i].t + 1
                    )),
                    other => other,
                })?;
                let env = &mut envs[i];
                env.t += 1;
                env.ret += transition.reward;
                env.features = transition.next_features.clone();
                env.state = next_state;
                env.done = done;
                replay.push(transition);
                pushed += 1;
            }

            if replay.len() >= config.batch_size {
                let batch = replay.sample(config.batch_size)?;
                let (loss, grads) = td_loss(&batch, &model, &target)?;
                adam_step(&mut model, &grads, &mut adam, config.lr)?;
                loss_log.push(loss);
            }

            since_sync += pushed;
            if since_sync >= config.target_update_interval {
                if target.checksum() != target_checksum {
                    return Err(Error::Contract(
                        "target network changed between syncs".into(),
                    ));
                }
                target.copy_from(&model);
                target_checksum = target.checksum();
                target_syncs += 1;
                since_sync = 0;
            }
            global_step += 1;
        }

        reward_log.push(envs.iter().map(|e| e.ret).sum::<f64>() / envs.len() as f64);
        let snapshot = Arc::new(model.clone());
        let rate = validation_rate(&snapshot, &validation, config.budget, max_steps)?;
        validation_log.push(rate);
        if best.as_ref().is_none_or(|(r, _, _)| rate < *r) {
            best = Some((rate, model.clone(), episode));
        }
    }

    let (_, best_model, best_episode) = best.expect("at least one episode");
    Ok(RlOutcome {
        model: best_model,
        final_model: model,
        adam,
        loss_log,
        reward_log,
        validation_log,
        best_episode,
        target_syncs,
    })
}
