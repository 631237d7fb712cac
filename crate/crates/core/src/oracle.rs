//! Infection projection and brute-force search for the best blocker subset.
//!
//! The exhaustive search is the label generator for supervised training: for
//! every `K`-subset of the search space it pins the subset's opinions to +1,
//! projects the final infection rate, and keeps the first subset (in
//! lexicographic order) achieving the minimum.

use serde::Serialize;

use crate::dynamics::{step_unchecked, DynamicsConfig};
use crate::error::{Error, Result};
use crate::graph::{NetworkState, Propagation};

/// Largest number of subsets the exhaustive search will evaluate.
pub const MAX_SUBSETS: u128 = 1_000_000;

/// Final infection rate if nothing else is blocked.
///
/// Discrete switching is projected exactly by reachability: every node
/// connected to a source through non-blocked nodes ends up infected. The
/// continuous models are simulated for at most `horizon` steps.
pub fn project_final_infection(
    state: &NetworkState,
    config: &DynamicsConfig,
    horizon: usize,
) -> f64 {
    match config.propagation {
        Propagation::DiscreteSwitch => reachable_infection(state),
        Propagation::LinearAdjust | Propagation::DeGroot => {
            let mut current = state.clone();
            for _ in 0..horizon.max(1) {
                if current.candidates().is_empty() {
                    break;
                }
                current = step_unchecked(&current, &[], config).next_state;
            }
            current.infection_rate()
        }
    }
}

fn reachable_infection(state: &NetworkState) -> f64 {
    let n = state.num_nodes();
    let mut reached = vec![false; n];
    let mut stack: Vec<usize> = state.infected().collect();
    for &s in &stack {
        reached[s] = true;
    }
    let mut count = stack.len();
    while let Some(u) = stack.pop() {
        for nb in state.network.neighbors(u) {
            let v = nb.node;
            if reached[v] || nb.trust <= 0.0 || state.is_blocked(v) {
                continue;
            }
            reached[v] = true;
            count += 1;
            stack.push(v);
        }
    }
    count as f64 / n as f64
}

/// Which nodes the search may pick from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SearchSpace {
    /// Every susceptible node.
    Susceptible,
    /// Only the current frontier.
    Candidates,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RankingResult {
    pub best_set: Vec<usize>,
    pub min_rate: f64,
    /// One-hot indicator of `best_set` over all nodes.
    pub target: Vec<f64>,
}

impl RankingResult {
    fn new(n: usize, best_set: Vec<usize>, min_rate: f64) -> Self {
        let mut target = vec![0.0; n];
        for &i in &best_set {
            target[i] = 1.0;
        }
        RankingResult {
            best_set,
            min_rate,
            target,
        }
    }
}

pub fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc
}

/// Lexicographic `k`-combinations of `0..n` as index vectors.
struct Combinations {
    n: usize,
    idx: Vec<usize>,
    done: bool,
}

impl Combinations {
    fn new(n: usize, k: usize) -> Self {
        Combinations {
            n,
            idx: (0..k).collect(),
            done: k > n,
        }
    }

    fn advance(&mut self) {
        let k = self.idx.len();
        let mut i = k;
        while i > 0 {
            i -= 1;
            if self.idx[i] < self.n - k + i {
                self.idx[i] += 1;
                for j in (i + 1)..k {
                    self.idx[j] = self.idx[j - 1] + 1;
                }
                return;
            }
        }
        self.done = true;
    }
}

impl Iterator for Combinations {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        if self.done {
            return None;
        }
        let out = self.idx.clone();
        if out.is_empty() {
            self.done = true;
        } else {
            self.advance();
        }
        Some(out)
    }
}

/// Copy of `state` with `nodes` pinned to opinion +1.
pub(crate) fn with_blocked(state: &NetworkState, nodes: &[usize]) -> NetworkState {
    let mut temp = state.clone();
    for &i in nodes {
        temp.opinions[i] = 1.0;
        temp.active_blockers.remove(&i);
    }
    temp
}

fn search_space(state: &NetworkState, space: SearchSpace) -> Vec<usize> {
    match space {
        SearchSpace::Susceptible => state.susceptible().collect(),
        SearchSpace::Candidates => state.candidates(),
    }
}

/// Exhaustive minimum-infection subset of size `min(budget, |space|)`.
///
/// Refuses with [`Error::TooManySubsets`] when the enumeration would exceed
/// [`MAX_SUBSETS`].
pub fn optimal_blocker_set(
    state: &NetworkState,
    budget: usize,
    config: &DynamicsConfig,
    horizon: usize,
    space: SearchSpace,
) -> Result<RankingResult> {
    if budget == 0 {
        return Err(Error::Parameter("budget must be at least 1".into()));
    }
    let pool = search_space(state, space);
    let n = state.num_nodes();
    if pool.is_empty() {
        let rate = project_final_infection(state, config, horizon);
        return Ok(RankingResult::new(n, Vec::new(), rate));
    }
    let k = budget.min(pool.len());
    let subsets = binomial(pool.len(), k);
    if subsets > MAX_SUBSETS {
        return Err(Error::TooManySubsets {
            subsets,
            limit: MAX_SUBSETS,
        });
    }
    let mut best: Option<(Vec<usize>, f64)> = None;
    let mut chosen = Vec::with_capacity(k);
    for combo in Combinations::new(pool.len(), k) {
        chosen.clear();
        chosen.extend(combo.iter().map(|&c| pool[c]));
        let rate = project_final_infection(&with_blocked(state, &chosen), config, horizon);
        if best.as_ref().is_none_or(|(_, r)| rate < *r) {
            best = Some((chosen.clone(), rate));
        }
    }
    let (set, rate) = best.expect("at least one subset");
    Ok(RankingResult::new(n, set, rate))
}

/// Picks blockers one at a time, each the best single addition given the
/// ones already chosen.
pub fn greedy_blocker_set(
    state: &NetworkState,
    budget: usize,
    config: &DynamicsConfig,
    horizon: usize,
    space: SearchSpace,
) -> Result<RankingResult> {
    if budget == 0 {
        return Err(Error::Parameter("budget must be at least 1".into()));
    }
    let pool = search_space(state, space);
    let mut chosen: Vec<usize> = Vec::new();
    let mut rate = project_final_infection(state, config, horizon);
    for _ in 0..budget.min(pool.len()) {
        let base = with_blocked(state, &chosen);
        let mut best: Option<(usize, f64)> = None;
        for &c in pool.iter().filter(|c| !chosen.contains(c)) {
            let r = project_final_infection(&with_blocked(&base, &[c]), config, horizon);
            if best.is_none_or(|(_, b)| r < b) {
                best = Some((c, r));
            }
        }
        let (c, r) = best.expect("pool not exhausted");
        chosen.push(c);
        rate = r;
    }
    chosen.sort_unstable();
    Ok(RankingResult::new(state.num_nodes(), chosen, rate))
}

/// Exhaustive search, falling back to greedy selection when the subset count
/// is over the limit. The flag reports whether the fallback was used.
pub fn rank_with_fallback(
    state: &NetworkState,
    budget: usize,
    config: &DynamicsConfig,
    horizon: usize,
    space: SearchSpace,
) -> Result<(RankingResult, bool)> {
    match optimal_blocker_set(state, budget, config, horizon, space) {
        Ok(r) => Ok((r, false)),
        Err(Error::TooManySubsets { .. }) => {
            greedy_blocker_set(state, budget, config, horizon, space).map(|r| (r, true))
        }
        Err(e) => Err(e),
    }
}
