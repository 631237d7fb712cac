//! Recipes for drawing random scenarios, shared by dataset generation and the
//! trainers.

use std::sync::Arc;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{
    generate_network, init_state, Case, InitParams, Propagation, Scenario, Topology, TrustModel,
};
use crate::rng::{derive_seed, rng_from_seed};

/// Network redraws allowed before a template gives up.
pub const MAX_RESEEDS: usize = 64;

/// Number of initially infected nodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InfectedCount {
    Fixed(usize),
    /// Uniform over `min..=max`.
    Uniform {
        min: usize,
        max: usize,
    },
}

impl InfectedCount {
    fn draw(self, seed: u64) -> usize {
        match self {
            InfectedCount::Fixed(k) => k,
            InfectedCount::Uniform { min, max } => rng_from_seed(seed).gen_range(min..=max),
        }
    }

    fn max(self) -> usize {
        match self {
            InfectedCount::Fixed(k) => k,
            InfectedCount::Uniform { max, .. } => max,
        }
    }

    fn min(self) -> usize {
        match self {
            InfectedCount::Fixed(k) => k,
            InfectedCount::Uniform { min, .. } => min,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScenarioTemplate {
    pub case: Case,
    pub propagation: Propagation,
    pub topology: Topology,
    pub num_nodes: usize,
    pub infected: InfectedCount,
    pub opinion_low: f64,
    pub opinion_high: f64,
    pub degree_target: Option<usize>,
    pub source_trust: f64,
}

impl ScenarioTemplate {
    /// Small-world network, 1 to 3 sources, the case's default propagation.
    pub fn new(case: Case, num_nodes: usize) -> Self {
        ScenarioTemplate {
            case,
            propagation: case.default_propagation(),
            topology: Topology::small_world(),
            num_nodes,
            infected: InfectedCount::Uniform { min: 1, max: 3 },
            opinion_low: -0.5,
            opinion_high: 0.6,
            degree_target: None,
            source_trust: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = (self.infected.min(), self.infected.max());
        if lo == 0 || lo > hi || hi >= self.num_nodes {
            return Err(Error::Parameter(format!(
                "infected count range {lo}..={hi} invalid for {} nodes",
                self.num_nodes
            )));
        }
        if !(self.source_trust > 0.0 && self.source_trust <= 1.0) {
            return Err(Error::Parameter(format!(
                "source trust must be in (0, 1], got {}",
                self.source_trust
            )));
        }
        if self.propagation == Propagation::DeGroot && self.case != Case::Case3 {
            return Err(Error::Parameter(
                "DeGroot propagation requires case3".into(),
            ));
        }
        Ok(())
    }

    /// Draws a scenario with a non-empty frontier. Networks that cannot meet
    /// the degree target (or have no frontier) are redrawn; the second value
    /// counts those redraws.
    pub fn sample(&self, seed: u64) -> Result<(Scenario, usize)> {
        self.validate()?;
        let trust = TrustModel::for_case(self.case);
        let mut last_err = None;
        for attempt in 0..MAX_RESEEDS {
            let attempt_seed = derive_seed(seed, &[attempt as u64]);
            let network = Arc::new(generate_network(
                self.topology,
                self.num_nodes,
                trust,
                derive_seed(attempt_seed, &[0]),
            )?);
            let params = InitParams {
                case: self.case,
                num_infected: self.infected.draw(derive_seed(attempt_seed, &[1])),
                opinion_low: self.opinion_low,
                opinion_high: self.opinion_high,
                degree_target: self.degree_target,
            };
            match init_state(network, &params, derive_seed(attempt_seed, &[2])) {
                Ok(state) if !state.candidates().is_empty() => {
                    let scenario =
                        Scenario::new(state, self.case, self.propagation, self.source_trust, seed)?;
                    return Ok((scenario, attempt));
                }
                Ok(_) => {}
                Err(e @ Error::Generation(_)) => last_err = Some(e),
                Err(e) => return Err(e),
            }
        }
        Err(last_err.unwrap_or_else(|| {
            Error::Generation(format!(
                "no scenario with a non-empty frontier after {MAX_RESEEDS} network draws"
            ))
        }))
    }
}
