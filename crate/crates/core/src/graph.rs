//! Network topology, mutable opinion state and scenario definitions.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rand::seq::index::sample;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::rng_from_seed;

/// Opinions strictly below this value mark a node as a misinformation source.
pub const INFECTED_THRESHOLD: f64 = -0.95;
/// Opinions strictly above this value mark a node as blocked.
pub const BLOCKED_THRESHOLD: f64 = 0.95;

/// Resamples allowed when hunting for an infected set with a given frontier size.
pub const DEGREE_TARGET_RETRIES: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TopologyTag {
    WattsStrogatz,
    ErdosRenyi,
    Tree,
    Imported,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbor {
    pub node: usize,
    pub trust: f64,
}

/// Undirected edge with `u < v`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub u: usize,
    pub v: usize,
    pub trust: f64,
}

/// Immutable undirected topology with symmetric per-edge trust.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    num_nodes: usize,
    edges: Vec<Edge>,
    adjacency: Vec<Vec<Neighbor>>,
    tag: TopologyTag,
}

impl Network {
    /// Builds a network from `(u, v, trust)` triples.
    ///
    /// Rejects self-loops, duplicate pairs (in either orientation), endpoints
    /// outside `0..num_nodes` and trust outside `[0, 1]`.
    pub fn new(
        num_nodes: usize,
        edges: impl IntoIterator<Item = (usize, usize, f64)>,
        tag: TopologyTag,
    ) -> Result<Self> {
        if num_nodes == 0 {
            return Err(Error::Parameter("network needs at least one node".into()));
        }
        let mut seen = BTreeSet::new();
        let mut list = Vec::new();
        for (a, b, trust) in edges {
            if a >= num_nodes || b >= num_nodes {
                return Err(Error::decode(
                    "edges",
                    format!("endpoint out of range: ({a}, {b}) with {num_nodes} nodes"),
                ));
            }
            if a == b {
                return Err(Error::decode("edges", format!("self-loop on node {a}")));
            }
            if !(0.0..=1.0).contains(&trust) {
                return Err(Error::decode(
                    "edges",
                    format!("trust out of range: {trust} on ({a}, {b})"),
                ));
            }
            let (u, v) = if a < b { (a, b) } else { (b, a) };
            if !seen.insert((u, v)) {
                return Err(Error::decode("edges", format!("duplicate edge ({u}, {v})")));
            }
            list.push(Edge { u, v, trust });
        }
        list.sort_by_key(|e| (e.u, e.v));
        let mut adjacency = vec![Vec::new(); num_nodes];
        for e in &list {
            adjacency[e.u].push(Neighbor {
                node: e.v,
                trust: e.trust,
            });
            adjacency[e.v].push(Neighbor {
                node: e.u,
                trust: e.trust,
            });
        }
        for nbrs in &mut adjacency {
            nbrs.sort_by_key(|n| n.node);
        }
        Ok(Network {
            num_nodes,
            edges: list,
            adjacency,
            tag,
        })
    }

    /// Unit-trust network from plain pairs; handy for hand-built fixtures.
    pub fn from_pairs(num_nodes: usize, pairs: &[(usize, usize)]) -> Result<Self> {
        Network::new(
            num_nodes,
            pairs.iter().map(|&(u, v)| (u, v, 1.0)),
            TopologyTag::Imported,
        )
    }

    /// Path `0 - 1 - ... - (n-1)` with unit trust.
    pub fn path(n: usize) -> Self {
        let pairs: Vec<_> = (1..n).map(|i| (i - 1, i)).collect();
        Network::from_pairs(n, &pairs).expect("valid path")
    }

    /// Star with center 0 and leaves `1..=leaves`, unit trust.
    pub fn star(leaves: usize) -> Self {
        let pairs: Vec<_> = (1..=leaves).map(|i| (0, i)).collect();
        Network::from_pairs(leaves + 1, &pairs).expect("valid star")
    }

    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn tag(&self) -> TopologyTag {
        self.tag
    }

    /// Neighbors of `i` in ascending id order.
    pub fn neighbors(&self, i: usize) -> &[Neighbor] {
        &self.adjacency[i]
    }

    pub fn degree(&self, i: usize) -> usize {
        self.adjacency[i].len()
    }

    pub fn trust(&self, u: usize, v: usize) -> Option<f64> {
        self.adjacency
            .get(u)?
            .binary_search_by_key(&v, |n| n.node)
            .ok()
            .map(|idx| self.adjacency[u][idx].trust)
    }

    pub fn has_binary_trust(&self) -> bool {
        self.edges.iter().all(|e| e.trust == 0.0 || e.trust == 1.0)
    }

    /// Same topology with every edge's trust replaced.
    pub fn with_trust(&self, mut trust: impl FnMut(&Edge) -> f64) -> Result<Self> {
        Network::new(
            self.num_nodes,
            self.edges.iter().map(|e| (e.u, e.v, trust(e))),
            self.tag,
        )
    }
}

/// Random graph families.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Topology {
    /// Ring lattice of mean degree `k` with rewiring probability `p`.
    WattsStrogatz { k: usize, p: f64 },
    /// G(n, p) with `p = branching / (n - 1)`.
    ErdosRenyi { branching: f64 },
    /// Breadth-first tree where each parent draws its child count from
    /// `min_branch..=max_branch`.
    Tree {
        min_branch: usize,
        max_branch: usize,
    },
}

impl Topology {
    pub const fn small_world() -> Self {
        Topology::WattsStrogatz { k: 3, p: 0.4 }
    }

    pub fn tag(&self) -> TopologyTag {
        match self {
            Topology::WattsStrogatz { .. } => TopologyTag::WattsStrogatz,
            Topology::ErdosRenyi { .. } => TopologyTag::ErdosRenyi,
            Topology::Tree { .. } => TopologyTag::Tree,
        }
    }
}

/// How edge trust is assigned after the topology is drawn.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum TrustModel {
    /// Every edge gets trust 1.
    Binary,
    /// Every edge draws trust uniformly from `[low, high]`.
    Uniform { low: f64, high: f64 },
}

impl TrustModel {
    pub const FLOATING: TrustModel = TrustModel::Uniform {
        low: 0.3,
        high: 1.0,
    };

    pub fn for_case(case: Case) -> Self {
        match case {
            Case::Case1 | Case::Case2 => TrustModel::Binary,
            Case::Case3 => TrustModel::FLOATING,
        }
    }
}

/// Draws a random network. Deterministic for fixed arguments.
pub fn generate_network(
    topology: Topology,
    n: usize,
    trust: TrustModel,
    seed: u64,
) -> Result<Network> {
    if n < 2 {
        return Err(Error::Parameter(format!("need at least 2 nodes, got {n}")));
    }
    if let TrustModel::Uniform { low, high } = trust {
        if !(0.0 < low && low <= high && high <= 1.0) {
            return Err(Error::Parameter(format!(
                "trust range [{low}, {high}] must lie in (0, 1]"
            )));
        }
    }
    let mut rng = rng_from_seed(seed);
    let pairs = match topology {
        Topology::WattsStrogatz { k, p } => {
            if k == 0 || n <= k {
                return Err(Error::Parameter(format!(
                    "Watts-Strogatz needs 0 < k < n, got k={k}, n={n}"
                )));
            }
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Parameter(format!("rewiring probability {p}")));
            }
            watts_strogatz(n, k, p, &mut rng)
        }
        Topology::ErdosRenyi { branching } => {
            if branching.is_nan() || branching < 0.0 {
                return Err(Error::Parameter(format!("branching factor {branching}")));
            }
            let p = (branching / (n - 1) as f64).min(1.0);
            let mut pairs = Vec::new();
            for u in 0..n {
                for v in (u + 1)..n {
                    if rng.gen::<f64>() < p {
                        pairs.push((u, v));
                    }
                }
            }
            pairs
        }
        Topology::Tree {
            min_branch,
            max_branch,
        } => {
            if min_branch == 0 || min_branch > max_branch {
                return Err(Error::Parameter(format!(
                    "tree branching range [{min_branch}, {max_branch}]"
                )));
            }
            let mut pairs = Vec::with_capacity(n - 1);
            let mut next = 1;
            let mut parent = 0;
            while next < n {
                let children = rng.gen_range(min_branch..=max_branch);
                for _ in 0..children {
                    if next == n {
                        break;
                    }
                    pairs.push((parent, next));
                    next += 1;
                }
                parent += 1;
            }
            pairs
        }
    };
    let weights: Vec<f64> = match trust {
        TrustModel::Binary => vec![1.0; pairs.len()],
        TrustModel::Uniform { low, high } => (0..pairs.len())
            .map(|_| {
                if low == high {
                    low
                } else {
                    rng.gen_range(low..=high)
                }
            })
            .collect(),
    };
    Network::new(
        n,
        pairs.into_iter().zip(weights).map(|((u, v), t)| (u, v, t)),
        topology.tag(),
    )
}

/// Ring lattice plus rewiring. Even-indexed nodes originate `ceil(k/2)`
/// clockwise links and odd-indexed nodes `floor(k/2)`, so the mean degree is
/// `k` for even `n` (and every node gets `k` for even `k`).
fn watts_strogatz(n: usize, k: usize, p: f64, rng: &mut crate::rng::Rng) -> Vec<(usize, usize)> {
    let key = |a: usize, b: usize| if a < b { (a, b) } else { (b, a) };
    let mut originated: Vec<(usize, usize)> = Vec::new();
    for i in 0..n {
        let reach = if i % 2 == 0 { k.div_ceil(2) } else { k / 2 };
        for off in 1..=reach {
            originated.push((i, (i + off) % n));
        }
    }
    let mut present: BTreeSet<(usize, usize)> = BTreeSet::new();
    let mut ring = Vec::new();
    for (s, t) in originated {
        if s != t && present.insert(key(s, t)) {
            ring.push((s, t));
        }
    }
    let mut degree = vec![0usize; n];
    for &(s, t) in &ring {
        degree[s] += 1;
        degree[t] += 1;
    }
    for slot in ring.iter_mut() {
        let (s, t) = *slot;
        if rng.gen::<f64>() >= p {
            continue;
        }
        if degree[s] >= n - 1 {
            continue;
        }
        let target = loop {
            let c = rng.gen_range(0..n);
            if c != s && !present.contains(&key(s, c)) {
                break c;
            }
        };
        present.remove(&key(s, t));
        present.insert(key(s, target));
        degree[t] -= 1;
        degree[target] += 1;
        *slot = (s, target);
    }
    ring
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Status {
    Infected,
    Blocked,
    Susceptible,
}

pub fn status_of(opinion: f64) -> Status {
    if opinion < INFECTED_THRESHOLD {
        Status::Infected
    } else if opinion > BLOCKED_THRESHOLD {
        Status::Blocked
    } else {
        Status::Susceptible
    }
}

/// Opinion vector over a shared network plus pending blockers.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkState {
    pub network: Arc<Network>,
    pub opinions: Vec<f64>,
    /// Nodes still receiving trusted-source influence (not yet past the
    /// blocking threshold).
    pub active_blockers: BTreeSet<usize>,
    pub time: u32,
}

impl NetworkState {
    pub fn new(network: Arc<Network>, opinions: Vec<f64>) -> Result<Self> {
        if opinions.len() != network.num_nodes() {
            return Err(Error::decode(
                "opinions",
                format!(
                    "expected {} opinions, got {}",
                    network.num_nodes(),
                    opinions.len()
                ),
            ));
        }
        if let Some(x) = opinions.iter().find(|x| !(-1.0..=1.0).contains(*x)) {
            return Err(Error::decode(
                "opinions",
                format!("opinion out of range: {x}"),
            ));
        }
        Ok(NetworkState {
            network,
            opinions,
            active_blockers: BTreeSet::new(),
            time: 0,
        })
    }

    pub fn num_nodes(&self) -> usize {
        self.opinions.len()
    }

    pub fn status(&self, i: usize) -> Status {
        status_of(self.opinions[i])
    }

    pub fn is_infected(&self, i: usize) -> bool {
        self.status(i) == Status::Infected
    }

    pub fn is_blocked(&self, i: usize) -> bool {
        self.status(i) == Status::Blocked
    }

    pub fn is_susceptible(&self, i: usize) -> bool {
        self.status(i) == Status::Susceptible
    }

    pub fn infected(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.num_nodes()).filter(|&i| self.is_infected(i))
    }

    pub fn susceptible(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.num_nodes()).filter(|&i| self.is_susceptible(i))
    }

    /// Susceptible nodes with a positive-trust edge to an infected node, ascending.
    pub fn candidates(&self) -> Vec<usize> {
        (0..self.num_nodes())
            .filter(|&i| {
                self.is_susceptible(i)
                    && self
                        .network
                        .neighbors(i)
                        .iter()
                        .any(|n| n.trust > 0.0 && self.is_infected(n.node))
            })
            .collect()
    }

    pub fn infected_count(&self) -> usize {
        self.infected().count()
    }

    pub fn infection_rate(&self) -> f64 {
        self.infected_count() as f64 / self.num_nodes() as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Case {
    #[serde(rename = "case1")]
    Case1,
    #[serde(rename = "case2")]
    Case2,
    #[serde(rename = "case3")]
    Case3,
}

impl Case {
    pub fn default_propagation(self) -> Propagation {
        match self {
            Case::Case1 => Propagation::DiscreteSwitch,
            Case::Case2 | Case::Case3 => Propagation::LinearAdjust,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Case::Case1 => "case1",
            Case::Case2 => "case2",
            Case::Case3 => "case3",
        }
    }
}

impl fmt::Display for Case {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Case {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "1" | "case1" => Ok(Case::Case1),
            "2" | "case2" => Ok(Case::Case2),
            "3" | "case3" => Ok(Case::Case3),
            _ => Err(Error::Config(format!("unknown case `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Propagation {
    #[serde(rename = "switch")]
    DiscreteSwitch,
    #[serde(rename = "linear")]
    LinearAdjust,
    #[serde(rename = "degroot")]
    DeGroot,
}

impl Propagation {
    pub fn name(self) -> &'static str {
        match self {
            Propagation::DiscreteSwitch => "switch",
            Propagation::LinearAdjust => "linear",
            Propagation::DeGroot => "degroot",
        }
    }
}

impl fmt::Display for Propagation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Propagation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "switch" => Ok(Propagation::DiscreteSwitch),
            "linear" => Ok(Propagation::LinearAdjust),
            "degroot" => Ok(Propagation::DeGroot),
            _ => Err(Error::Config(format!("unknown propagation `{s}`"))),
        }
    }
}

/// A full simulation setup: initial state plus the rules that drive it.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub state: NetworkState,
    pub case: Case,
    pub propagation: Propagation,
    pub source_trust: f64,
    pub seed: u64,
}

impl Scenario {
    pub fn new(
        state: NetworkState,
        case: Case,
        propagation: Propagation,
        source_trust: f64,
        seed: u64,
    ) -> Result<Self> {
        let scenario = Scenario {
            state,
            case,
            propagation,
            source_trust,
            seed,
        };
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.source_trust > 0.0 && self.source_trust <= 1.0) {
            return Err(Error::decode(
                "source_trust",
                format!("source trust out of range: {}", self.source_trust),
            ));
        }
        if self.propagation == Propagation::DeGroot && self.case != Case::Case3 {
            return Err(Error::decode(
                "propagation",
                "DeGroot propagation requires case3",
            ));
        }
        if self.case == Case::Case1 {
            if let Some(x) = self
                .state
                .opinions
                .iter()
                .find(|&&x| x != -1.0 && x != 0.0 && x != 1.0)
            {
                return Err(Error::decode(
                    "opinions",
                    format!("case1 opinion must be -1, 0 or 1, got {x}"),
                ));
            }
        }
        if matches!(self.case, Case::Case1 | Case::Case2) && !self.state.network.has_binary_trust()
        {
            return Err(Error::decode("edges", "case1/case2 require binary trust"));
        }
        for &b in &self.state.active_blockers {
            if b >= self.state.num_nodes() {
                return Err(Error::decode(
                    "active_blockers",
                    format!("endpoint out of range: blocker {b}"),
                ));
            }
            if self.state.is_infected(b) {
                return Err(Error::decode(
                    "active_blockers",
                    format!("blocker {b} is infected"),
                ));
            }
        }
        Ok(())
    }
}

/// Opinion initialization parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InitParams {
    pub case: Case,
    pub num_infected: usize,
    pub opinion_low: f64,
    pub opinion_high: f64,
    /// Required initial frontier size, if any.
    pub degree_target: Option<usize>,
}

impl InitParams {
    pub fn new(case: Case, num_infected: usize) -> Self {
        InitParams {
            case,
            num_infected,
            opinion_low: -0.5,
            opinion_high: 0.6,
            degree_target: None,
        }
    }

    pub fn with_degree_target(mut self, target: usize) -> Self {
        self.degree_target = Some(target);
        self
    }
}

/// Seeds `num_infected` sources at opinion -1 and draws the rest.
pub fn init_state(network: Arc<Network>, params: &InitParams, seed: u64) -> Result<NetworkState> {
    let n = network.num_nodes();
    let InitParams {
        case,
        num_infected,
        opinion_low: low,
        opinion_high: high,
        degree_target,
    } = *params;
    if num_infected == 0 || num_infected >= n {
        return Err(Error::Parameter(format!(
            "num_infected must be in 1..{n}, got {num_infected}"
        )));
    }
    let open = |x: f64| x > INFECTED_THRESHOLD && x <= BLOCKED_THRESHOLD;
    if !(low <= high && open(low) && open(high)) {
        return Err(Error::Parameter(format!(
            "opinion range [{low}, {high}] must be ordered and within (-0.95, 0.95]"
        )));
    }
    let mut rng = rng_from_seed(seed);
    let mut opinions = vec![0.0; n];
    let pick = |rng: &mut crate::rng::Rng| {
        let mut set = sample(rng, n, num_infected).into_vec();
        set.sort_unstable();
        set
    };
    let mut infected = pick(&mut rng);
    if let Some(target) = degree_target {
        let frontier = |set: &[usize]| {
            let mut marks = vec![false; n];
            for &s in set {
                marks[s] = true;
            }
            (0..n)
                .filter(|&i| {
                    !marks[i]
                        && network
                            .neighbors(i)
                            .iter()
                            .any(|nb| nb.trust > 0.0 && marks[nb.node])
                })
                .count()
        };
        let mut tries = 1;
        while frontier(&infected) != target {
            if tries == DEGREE_TARGET_RETRIES {
                return Err(Error::Generation(format!(
                    "no infected set of size {num_infected} with candidate count {target} \
                     after {DEGREE_TARGET_RETRIES} resamples"
                )));
            }
            infected = pick(&mut rng);
            tries += 1;
        }
    }
    for &i in &infected {
        opinions[i] = -1.0;
    }
    let mut is_source = vec![false; n];
    for &i in &infected {
        is_source[i] = true;
    }
    for (i, x) in opinions.iter_mut().enumerate() {
        if is_source[i] {
            continue;
        }
        *x = match case {
            Case::Case1 => 0.0,
            _ if low == high => low,
            _ => rng.gen_range(low..=high),
        };
    }
    NetworkState::new(network, opinions)
}
