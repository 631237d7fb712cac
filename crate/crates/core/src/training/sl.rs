use serde::Serialize;

use super::ModelInit;
use crate::dynamics::{default_max_steps, step_unchecked, DynamicsConfig};
use crate::error::{Error, Result};
use crate::features::feature_matrix;
use crate::graph::Case;
use crate::neural::{
    adam_step, bce_loss, gcn_backward, normalize_adjacency, AdamState, Architecture, GcnModel, Head,
};
use crate::oracle::{rank_with_fallback, with_blocked, SearchSpace};
use crate::rng::derive_seed;
use crate::template::ScenarioTemplate;

const MODEL_STREAM: u64 = 1;
const SCENARIO_STREAM: u64 = 2;

#[derive(Debug, Clone, Serialize)]
pub struct SlConfig {
    pub template: ScenarioTemplate,
    /// Size of the oracle's label set.
    pub budget: usize,
    pub epochs: usize,
    pub lr: f64,
    pub arch: Architecture,
    pub init: ModelInit,
    /// Step cap per epoch; `None` means four times the node count.
    pub max_steps: Option<usize>,
    pub seed: u64,
}

impl SlConfig {
    /// Case-1 graphs of 25 nodes, one label per state, lr 0.001.
    pub fn new(seed: u64) -> Self {
        SlConfig {
            template: ScenarioTemplate::new(Case::Case1, 25),
            budget: 1,
            epochs: 1000,
            lr: 1e-3,
            arch: Architecture::default(),
            init: ModelInit::Glorot,
            max_steps: None,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.budget == 0 || self.epochs == 0 {
            return Err(Error::Parameter(
                "budget and epochs must be positive".into(),
            ));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::Parameter(format!(
                "learning rate must be positive, got {}",
                self.lr
            )));
        }
        if self.max_steps == Some(0) {
            return Err(Error::Parameter("max_steps must be positive".into()));
        }
        self.template.validate()
    }
}

#[derive(Debug, Clone)]
pub struct SlOutcome {
    pub model: GcnModel,
    pub adam: AdamState,
    /// Mean BCE per epoch.
    pub loss_log: Vec<f64>,
    /// Loss of the very first labelled state, before any update.
    pub first_loss: f64,
    pub labels: usize,
    /// Labels produced by greedy search because the exact search was too
    /// large.
    pub fallback_labels: usize,
}

/// Trains a classifier to reproduce oracle blocker sets. Each epoch draws one
/// scenario and walks it to the end, updating after every labelled state.
pub fn train_sl(config: &SlConfig) -> Result<SlOutcome> {
    config.validate()?;
    let mut model = match config.init {
        ModelInit::Glorot => GcnModel::new(
            config.arch,
            Head::Classifier,
            derive_seed(config.seed, &[MODEL_STREAM]),
        ),
        ModelInit::Zeros => GcnModel::zeros(config.arch, Head::Classifier),
    };
    let mut adam = AdamState::new(&model);
    let mut loss_log = Vec::with_capacity(config.epochs);
    let mut first_loss = None;
    let (mut labels, mut fallback_labels) = (0, 0);
    for epoch in 0..config.epochs {
        let seed = derive_seed(config.seed, &[SCENARIO_STREAM, epoch as u64]);
        let (scenario, _) = config.template.sample(seed)?;
        let dyn_cfg = DynamicsConfig::from_scenario(&scenario);
        let horizon = default_max_steps(scenario.state.num_nodes());
        let max_steps = config.max_steps.unwrap_or(horizon);
        let adj = normalize_adjacency(&scenario.state.network);
        let mut state = scenario.state;
        let mut epoch_loss = 0.0;
        let mut steps = 0;
        while steps < max_steps && !state.candidates().is_empty() {
            let features = feature_matrix(&state);
            let pass = model.forward(&features, &adj)?;
            let (label, fell_back) = rank_with_fallback(
                &state,
                config.budget,
                &dyn_cfg,
                horizon,
                SearchSpace::Susceptible,
            )?;
            labels += 1;
            fallback_labels += usize::from(fell_back);
            let (loss, grad) = bce_loss(&pass.output, &label.target)?;
            first_loss.get_or_insert(loss);
            let grads = gcn_backward(&model, &adj, &pass, &grad)?;
            adam_step(&mut model, &grads, &mut adam, config.lr)?;
            epoch_loss += loss;
            steps += 1;
            // Label nodes may sit off the frontier, so they are pinned
            // directly rather than run through the blocking phase.
            let blocked = with_blocked(&state, &label.best_set);
            state = step_unchecked(&blocked, &[], &dyn_cfg).next_state;
        }
        loss_log.push(epoch_loss / steps.max(1) as f64);
    }
    Ok(SlOutcome {
        model,
        adam,
        loss_log,
        first_loss: first_loss.unwrap_or(f64::NAN),
        labels,
        fallback_labels,
    })
}
