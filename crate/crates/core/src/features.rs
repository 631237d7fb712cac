//! Per-node GCN inputs: opinion, effective degree, distance to the nearest
//! infected node.

use std::collections::VecDeque;

use crate::graph::{NetworkState, Status};
use crate::neural::DenseMatrix;

pub const NUM_FEATURES: usize = 3;

/// Number of susceptible neighbors of `i`.
pub fn effective_degree(state: &NetworkState, i: usize) -> usize {
    state
        .network
        .neighbors(i)
        .iter()
        .filter(|n| state.is_susceptible(n.node))
        .count()
}

/// Hop distance from `i` to the nearest infected node, never passing through
/// blocked nodes. Infected nodes score 0; blocked and unreachable nodes score
/// the node count.
pub fn min_distance_to_infected(state: &NetworkState, i: usize) -> usize {
    let n = state.num_nodes();
    match state.status(i) {
        Status::Infected => return 0,
        Status::Blocked => return n,
        Status::Susceptible => {}
    }
    let mut dist = vec![usize::MAX; n];
    dist[i] = 0;
    let mut queue = VecDeque::from([i]);
    while let Some(u) = queue.pop_front() {
        for nb in state.network.neighbors(u) {
            let v = nb.node;
            if dist[v] != usize::MAX || state.is_blocked(v) {
                continue;
            }
            dist[v] = dist[u] + 1;
            if state.is_infected(v) {
                return dist[v];
            }
            queue.push_back(v);
        }
    }
    n
}

/// Distances for every node from one multi-source BFS.
fn all_distances(state: &NetworkState) -> Vec<usize> {
    let n = state.num_nodes();
    let mut dist = vec![n; n];
    let mut queue = VecDeque::new();
    for i in state.infected() {
        dist[i] = 0;
        queue.push_back(i);
    }
    while let Some(u) = queue.pop_front() {
        for nb in state.network.neighbors(u) {
            let v = nb.node;
            if dist[v] != n || !state.is_susceptible(v) {
                continue;
            }
            dist[v] = dist[u] + 1;
            queue.push_back(v);
        }
    }
    dist
}

/// `N x 3` matrix of raw (unnormalized) features.
pub fn feature_matrix(state: &NetworkState) -> DenseMatrix {
    let n = state.num_nodes();
    let dist = all_distances(state);
    let mut data = Vec::with_capacity(n * NUM_FEATURES);
    for (i, d) in dist.into_iter().enumerate() {
        data.push(state.opinions[i]);
        data.push(effective_degree(state, i) as f64);
        data.push(d as f64);
    }
    DenseMatrix::from_vec(n, NUM_FEATURES, data)
}
