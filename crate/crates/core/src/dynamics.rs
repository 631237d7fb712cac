//! One-timestep environment transition and full-episode rollout.
//!
//! A timestep runs two phases in order: trusted-source influence on the
//! designated blockers, then misinformation propagation from the nodes that
//! were infected when the step began. Statuses are derived from opinions, so
//! bookkeeping is a recount after both phases.

use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::graph::{NetworkState, Propagation, Scenario, Status, BLOCKED_THRESHOLD};
use crate::planners::Planner;
use crate::rng::Rng;

/// Environment rules for one scenario.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DynamicsConfig {
    pub propagation: Propagation,
    pub source_trust: f64,
    /// Unnormalized trust a node places in itself under DeGroot averaging.
    pub degroot_self_weight: f64,
}

impl DynamicsConfig {
    pub fn new(propagation: Propagation, source_trust: f64) -> Self {
        DynamicsConfig {
            propagation,
            source_trust,
            degroot_self_weight: 1.0,
        }
    }

    pub fn from_scenario(scenario: &Scenario) -> Self {
        DynamicsConfig::new(scenario.propagation, scenario.source_trust)
    }
}

/// Horizon used when the caller does not pick one.
pub fn default_max_steps(num_nodes: usize) -> usize {
    4 * num_nodes
}

pub fn node_status(state: &NetworkState, i: usize) -> Status {
    state.status(i)
}

pub fn candidate_set(state: &NetworkState) -> Vec<usize> {
    state.candidates()
}

pub fn infection_rate(state: &NetworkState) -> f64 {
    state.infection_rate()
}

fn check_blockers(state: &NetworkState, blockers: &[usize]) -> Result<()> {
    let candidates = state.candidates();
    let mut seen = BTreeSet::new();
    for &b in blockers {
        if candidates.binary_search(&b).is_err() {
            return Err(Error::Contract(format!(
                "blocker {b} is not in the candidate set {candidates:?}"
            )));
        }
        if !seen.insert(b) {
            return Err(Error::Contract(format!("blocker {b} listed twice")));
        }
    }
    Ok(())
}

/// Moves the given candidates and every pending blocker toward opinion +1.
///
/// Nodes pushed past the blocking threshold leave the pending set.
pub fn apply_blocking(
    state: &NetworkState,
    blockers: &[usize],
    source_trust: f64,
) -> Result<NetworkState> {
    check_blockers(state, blockers)?;
    Ok(apply_blocking_unchecked(state, blockers, source_trust))
}

pub(crate) fn apply_blocking_unchecked(
    state: &NetworkState,
    blockers: &[usize],
    source_trust: f64,
) -> NetworkState {
    let mut next = state.clone();
    next.active_blockers.extend(blockers.iter().copied());
    let mut finished = Vec::new();
    for &b in &next.active_blockers {
        let x = next.opinions[b];
        let moved = (x + source_trust * (1.0 - x)).clamp(-1.0, 1.0);
        next.opinions[b] = moved;
        if moved > BLOCKED_THRESHOLD {
            finished.push(b);
        }
    }
    for b in finished {
        next.active_blockers.remove(&b);
    }
    next
}

/// Spreads misinformation for one timestep. Returns the new state and the
/// nodes that became infected during it.
pub fn propagate_step(state: &NetworkState, config: &DynamicsConfig) -> (NetworkState, Vec<usize>) {
    let n = state.num_nodes();
    let net = &state.network;
    let mut next = state.clone();
    match config.propagation {
        Propagation::DiscreteSwitch | Propagation::LinearAdjust => {
            let mut updated = vec![false; n];
            let sources: Vec<usize> = state.infected().collect();
            for k in sources {
                let xk = state.opinions[k];
                for nb in net.neighbors(k) {
                    let i = nb.node;
                    if updated[i] || nb.trust <= 0.0 || !state.is_susceptible(i) {
                        continue;
                    }
                    let xi = next.opinions[i];
                    next.opinions[i] = (xi + nb.trust * (xk - xi)).clamp(-1.0, 1.0);
                    updated[i] = true;
                }
            }
        }
        Propagation::DeGroot => {
            for i in 0..n {
                if !state.is_susceptible(i) {
                    continue;
                }
                let mut weight = config.degroot_self_weight;
                let mut acc = config.degroot_self_weight * state.opinions[i];
                for nb in net.neighbors(i) {
                    // Blocked neighbors still show their frozen opinion.
                    if nb.trust > 0.0 {
                        weight += nb.trust;
                        acc += nb.trust * state.opinions[nb.node];
                    }
                }
                if weight > 0.0 {
                    next.opinions[i] = (acc / weight).clamp(-1.0, 1.0);
                }
            }
        }
    }
    let newly: Vec<usize> = (0..n)
        .filter(|&i| !state.is_infected(i) && next.is_infected(i))
        .collect();
    for i in &newly {
        next.active_blockers.remove(i);
    }
    (next, newly)
}

/// Result of one environment transition.
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub next_state: NetworkState,
    pub newly_infected: Vec<usize>,
    pub candidate_count_before: usize,
    pub candidate_count_after: usize,
    pub infection_rate_before: f64,
    pub infection_rate_after: f64,
    pub terminal: bool,
}

/// Blocks, propagates and recounts. `blockers` must come from the current
/// candidate set.
pub fn step(
    state: &NetworkState,
    blockers: &[usize],
    config: &DynamicsConfig,
) -> Result<StepOutcome> {
    check_blockers(state, blockers)?;
    Ok(step_unchecked(state, blockers, config))
}

pub(crate) fn step_unchecked(
    state: &NetworkState,
    blockers: &[usize],
    config: &DynamicsConfig,
) -> StepOutcome {
    let candidate_count_before = state.candidates().len();
    let infection_rate_before = state.infection_rate();
    let blocked = apply_blocking_unchecked(state, blockers, config.source_trust);
    let (mut next, newly_infected) = propagate_step(&blocked, config);
    next.time += 1;
    let candidate_count_after = next.candidates().len();
    let infection_rate_after = next.infection_rate();
    StepOutcome {
        next_state: next,
        newly_infected,
        candidate_count_before,
        candidate_count_after,
        infection_rate_before,
        infection_rate_after,
        terminal: candidate_count_after == 0,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryStep {
    pub blockers: Vec<usize>,
    pub outcome: StepOutcome,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub steps: Vec<TrajectoryStep>,
    pub initial_infection_rate: f64,
    pub final_infection_rate: f64,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn final_state(&self) -> Option<&NetworkState> {
        self.steps.last().map(|s| &s.outcome.next_state)
    }
}

/// Checks a planner's answer against the budget and the candidate set.
pub fn validate_selection(state: &NetworkState, selection: &[usize], budget: usize) -> Result<()> {
    if selection.len() > budget {
        return Err(Error::Contract(format!(
            "planner returned {} blockers for budget {budget}",
            selection.len()
        )));
    }
    check_blockers(state, selection)
}

/// Runs a planner from the scenario's initial state until the frontier is
/// empty or `max_steps` transitions have been taken.
pub fn run_episode(
    scenario: &Scenario,
    planner: &mut dyn Planner,
    budget: usize,
    max_steps: usize,
    rng: &mut Rng,
) -> Result<Trajectory> {
    if budget == 0 || max_steps == 0 {
        return Err(Error::Parameter(
            "budget and max_steps must both be at least 1".into(),
        ));
    }
    let config = DynamicsConfig::from_scenario(scenario);
    planner.reset(scenario);
    let mut state = scenario.state.clone();
    let initial = state.infection_rate();
    let mut steps = Vec::new();
    while steps.len() < max_steps && !state.candidates().is_empty() {
        let selection = planner.select(&state, &config, budget, rng)?;
        validate_selection(&state, &selection, budget).map_err(|e| match e {
            Error::Contract(m) => Error::Contract(format!("{} planner: {m}", planner.name())),
            other => other,
        })?;
        let outcome = step_unchecked(&state, &selection, &config);
        state = outcome.next_state.clone();
        steps.push(TrajectoryStep {
            blockers: selection,
            outcome,
        });
    }
    Ok(Trajectory {
        steps,
        initial_infection_rate: initial,
        final_infection_rate: state.infection_rate(),
    })
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::graph::Network;

    fn state(net: Network, opinions: Vec<f64>) -> NetworkState {
        NetworkState::new(Arc::new(net), opinions).unwrap()
    }

    fn linear(trust: f64) -> DynamicsConfig {
        DynamicsConfig::new(Propagation::LinearAdjust, trust)
    }

    #[test]
    fn statuses() {
        let s = state(Network::path(3), vec![-1.0, 0.96, -0.95]);
        assert_eq!(node_status(&s, 0), Status::Infected);
        assert_eq!(node_status(&s, 1), Status::Blocked);
        assert_eq!(node_status(&s, 2), Status::Susceptible);
    }

    #[test]
    fn candidate_examples() {
        let s = state(Network::path(4), vec![-1.0, 0.0, 0.0, 0.0]);
        assert_eq!(candidate_set(&s), vec![1]);
        let s = state(Network::star(4), vec![-1.0, 0.0, 0.0, 0.0, 0.0]);
        assert_eq!(candidate_set(&s), vec![1, 2, 3, 4]);
        let s = state(Network::star(2), vec![-1.0, 1.0, 1.0]);
        assert!(candidate_set(&s).is_empty());
    }

    #[test]
    fn zero_trust_edge_does_not_create_candidate() {
        let net = Network::new(2, [(0, 1, 0.0)], crate::graph::TopologyTag::Imported).unwrap();
        let s = state(net, vec![-1.0, 0.0]);
        assert!(candidate_set(&s).is_empty());
    }

    #[test]
    fn blocking_with_full_trust() {
        let s = state(Network::path(2), vec![-1.0, 0.0]);
        let b = apply_blocking(&s, &[1], 1.0).unwrap();
        assert_eq!(b.opinions[1], 1.0);
        assert!(b.is_blocked(1));
        assert!(b.active_blockers.is_empty());
    }

    #[test]
    fn blocking_with_partial_trust_takes_two_steps() {
        let s = state(Network::path(3), vec![-1.0, 0.0, 0.0]);
        let once = apply_blocking(&s, &[1], 0.8).unwrap();
        assert!((once.opinions[1] - 0.8).abs() < 1e-12);
        assert!(once.active_blockers.contains(&1));
        let twice = apply_blocking(&once, &[], 0.8).unwrap();
        assert!((twice.opinions[1] - 0.96).abs() < 1e-12);
        assert!(twice.is_blocked(1));
        assert!(twice.active_blockers.is_empty());
    }

    #[test]
    fn empty_blocking_is_identity() {
        let s = state(Network::path(3), vec![-1.0, 0.2, 0.0]);
        assert_eq!(apply_blocking(&s, &[], 0.8).unwrap(), s);
    }

    #[test]
    fn blocking_outside_frontier_is_contract_violation() {
        let s = state(Network::path(3), vec![-1.0, 0.0, 0.0]);
        assert!(matches!(
            apply_blocking(&s, &[2], 1.0),
            Err(Error::Contract(_))
        ));
    }

    #[test]
    fn linear_adjustment_examples() {
        let s = state(Network::path(2), vec![-1.0, 0.5]);
        let (next, newly) = propagate_step(&s, &linear(1.0));
        assert_eq!(next.opinions[1], -1.0);
        assert_eq!(newly, vec![1]);

        let net = Network::new(2, [(0, 1, 0.5)], crate::graph::TopologyTag::Imported).unwrap();
        let s = state(net, vec![-1.0, 0.5]);
        let (next, newly) = propagate_step(&s, &linear(1.0));
        assert!((next.opinions[1] + 0.25).abs() < 1e-12);
        assert!(newly.is_empty());
    }

    #[test]
    fn one_influence_per_step() {
        // Node 1 sits between two sources with trust 0.5; only the first
        // (lower id) source moves it this step.
        let net = Network::new(
            3,
            [(0, 1, 0.5), (1, 2, 0.5)],
            crate::graph::TopologyTag::Imported,
        )
        .unwrap();
        let s = state(net, vec![-1.0, 0.0, -1.0]);
        let (next, _) = propagate_step(&s, &linear(1.0));
        assert!((next.opinions[1] + 0.5).abs() < 1e-12);
    }

    #[test]
    fn newly_infected_wait_a_step() {
        let s = state(Network::path(3), vec![-1.0, 0.0, 0.0]);
        let (next, newly) = propagate_step(&s, &linear(1.0));
        assert_eq!(newly, vec![1]);
        assert_eq!(next.opinions[2], 0.0);
    }

    #[test]
    fn degroot_symmetric_neighbors() {
        let mut cfg = DynamicsConfig::new(Propagation::DeGroot, 1.0);
        cfg.degroot_self_weight = 0.0;
        let net = Network::new(
            3,
            [(0, 1, 0.5), (1, 2, 0.5)],
            crate::graph::TopologyTag::Imported,
        )
        .unwrap();
        let s = state(net, vec![1.0, 0.4, -1.0]);
        let (next, newly) = propagate_step(&s, &cfg);
        assert!(next.opinions[1].abs() < 1e-12);
        assert!(newly.is_empty());
    }

    #[test]
    fn degroot_leaves_blocked_and_infected_fixed() {
        let cfg = DynamicsConfig::new(Propagation::DeGroot, 1.0);
        let s = state(Network::path(3), vec![1.0, 0.0, -1.0]);
        let (next, _) = propagate_step(&s, &cfg);
        assert!(next.opinions[1].abs() < 1e-12);
        assert_eq!(next.opinions[0], 1.0);
        assert_eq!(next.opinions[2], -1.0);
    }

    #[test]
    fn infection_rate_examples() {
        let mut ops = vec![0.0; 50];
        ops[..5].fill(-1.0);
        assert!((state(Network::path(50), ops).infection_rate() - 0.1).abs() < 1e-15);
        assert_eq!(state(Network::path(3), vec![0.0; 3]).infection_rate(), 0.0);
        assert_eq!(state(Network::path(3), vec![-1.0; 3]).infection_rate(), 1.0);
    }

    #[test]
    fn step_blocks_before_propagating() {
        let s = state(Network::star(3), vec![-1.0, 0.0, 0.0, 0.0]);
        let out = step(&s, &[2], &linear(1.0)).unwrap();
        assert!(out.next_state.is_blocked(2));
        assert!(out.next_state.is_infected(1));
        assert!(out.next_state.is_infected(3));
        assert_eq!(out.newly_infected, vec![1, 3]);
        assert_eq!(out.candidate_count_before, 3);
        assert_eq!(out.candidate_count_after, 0);
        assert!(out.terminal);
        assert_eq!(out.next_state.time, 1);
    }

    #[test]
    fn step_without_blockers_on_star() {
        let s = state(Network::star(4), vec![-1.0, 0.0, 0.0, 0.0, 0.0]);
        let out = step(&s, &[], &linear(1.0)).unwrap();
        assert_eq!(out.infection_rate_after, 1.0);
        assert!(out.terminal);
    }

    #[test]
    fn blocking_whole_frontier_reports_new_frontier() {
        let s = state(Network::path(4), vec![-1.0, 0.0, 0.0, 0.0]);
        let out = step(&s, &[1], &linear(1.0)).unwrap();
        assert_eq!(out.candidate_count_after, 0);
        assert!(out.terminal);
        let s = state(Network::star(2), vec![0.0, -1.0, 0.0]);
        let out = step(&s, &[0], &linear(1.0)).unwrap();
        assert!(out.terminal);
        assert_eq!(out.infection_rate_after, 1.0 / 3.0);
    }

    #[test]
    fn pending_blocker_can_still_be_infected() {
        let s = state(Network::path(3), vec![-1.0, 0.0, 0.0]);
        let out = step(&s, &[1], &linear(0.8)).unwrap();
        // Trusted influence lands first (0 -> 0.8), then the source flips it.
        assert!(out.next_state.is_infected(1));
        assert!(out.next_state.active_blockers.is_empty());
    }
}
