//! Scenario files, JSON-lines datasets and plain edge-list import.
//!
//! Scenario documents look like
//!
//! ```json
//! {"num_nodes":3,"edges":[[0,1,1.0],[1,2,1.0]],"opinions":[-1.0,0.0,0.0],
//!  "case":"case1","propagation":"switch","source_trust":1.0,"seed":7,
//!  "topology":"watts_strogatz"}
//! ```
//!
//! Floats are written in shortest round-trip form, so decoding an encoded
//! scenario reproduces every opinion and trust value bit for bit.

use std::collections::HashMap;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Case, Network, NetworkState, Propagation, Scenario, TopologyTag};

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioDoc {
    num_nodes: usize,
    edges: Vec<(usize, usize, f64)>,
    opinions: Vec<f64>,
    case: Case,
    propagation: Propagation,
    source_trust: f64,
    seed: u64,
    #[serde(default = "imported")]
    topology: TopologyTag,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    active_blockers: Vec<usize>,
    #[serde(default, skip_serializing_if = "is_zero")]
    time: u32,
}

fn imported() -> TopologyTag {
    TopologyTag::Imported
}

fn is_zero(t: &u32) -> bool {
    *t == 0
}

impl ScenarioDoc {
    fn from_scenario(s: &Scenario) -> Self {
        let net = &s.state.network;
        ScenarioDoc {
            num_nodes: net.num_nodes(),
            edges: net.edges().iter().map(|e| (e.u, e.v, e.trust)).collect(),
            opinions: s.state.opinions.clone(),
            case: s.case,
            propagation: s.propagation,
            source_trust: s.source_trust,
            seed: s.seed,
            topology: net.tag(),
            active_blockers: s.state.active_blockers.iter().copied().collect(),
            time: s.state.time,
        }
    }

    fn into_scenario(self) -> Result<Scenario> {
        if self.num_nodes == 0 {
            return Err(Error::decode("num_nodes", "must be positive"));
        }
        if self.opinions.len() != self.num_nodes {
            return Err(Error::decode(
                "opinions",
                format!(
                    "expected {} opinions, found {}",
                    self.num_nodes,
                    self.opinions.len()
                ),
            ));
        }
        let network = Network::new(self.num_nodes, self.edges, self.topology)?;
        let mut state = NetworkState::new(Arc::new(network), self.opinions)?;
        state.time = self.time;
        for b in self.active_blockers {
            if !state.active_blockers.insert(b) {
                return Err(Error::decode(
                    "active_blockers",
                    format!("duplicate blocker {b}"),
                ));
            }
        }
        Scenario::new(
            state,
            self.case,
            self.propagation,
            self.source_trust,
            self.seed,
        )
    }
}

/// Encodes a scenario as one line of JSON (no trailing newline).
pub fn encode_scenario(scenario: &Scenario) -> Result<String> {
    scenario.validate()?;
    Ok(serde_json::to_string(&ScenarioDoc::from_scenario(scenario)).expect("plain data"))
}

pub fn decode_scenario(text: &str) -> Result<Scenario> {
    let doc: ScenarioDoc =
        serde_json::from_str(text).map_err(|e| Error::decode("document", e.to_string()))?;
    doc.into_scenario()
}

pub fn write_scenario(path: impl AsRef<Path>, scenario: &Scenario) -> Result<()> {
    let path = path.as_ref();
    let mut text = encode_scenario(scenario)?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_scenario(path: impl AsRef<Path>) -> Result<Scenario> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    decode_scenario(&text)
}

/// Writes one scenario per line.
pub fn write_dataset(path: impl AsRef<Path>, scenarios: &[Scenario]) -> Result<()> {
    let path = path.as_ref();
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    for s in scenarios {
        writeln!(out, "{}", encode_scenario(s)?).map_err(|e| Error::io(path, e))?;
    }
    out.flush().map_err(|e| Error::io(path, e))
}

/// Reads and validates every line of a dataset file.
pub fn read_dataset(path: impl AsRef<Path>) -> Result<Vec<Scenario>> {
    let path = path.as_ref();
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let scenario = decode_scenario(&line).map_err(|e| match e {
            Error::Decode { field, message } => Error::Decode {
                field: format!("line {}: {field}", idx + 1),
                message,
            },
            other => other,
        })?;
        out.push(scenario);
    }
    Ok(out)
}

/// Parses whitespace-separated `u v` pairs. Ids are compacted to `0..N` in
/// order of first appearance; reversed and repeated pairs collapse into one
/// edge and self-loops are dropped.
pub fn parse_edge_list(text: &str, default_trust: f64) -> Result<Network> {
    if !(0.0..=1.0).contains(&default_trust) {
        return Err(Error::Parameter(format!(
            "default trust {default_trust} outside [0, 1]"
        )));
    }
    let mut ids: HashMap<u64, usize> = HashMap::new();
    let mut intern = |raw: u64| {
        let next = ids.len();
        *ids.entry(raw).or_insert(next)
    };
    let mut seen = std::collections::HashSet::new();
    let mut edges = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let content = line.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let tokens: Vec<&str> = content.split_whitespace().collect();
        if tokens.len() != 2 {
            return Err(Error::Parse {
                line: idx + 1,
                message: format!("expected two node ids, found {}", tokens.len()),
            });
        }
        let mut parsed = [0u64; 2];
        for (slot, tok) in parsed.iter_mut().zip(&tokens) {
            *slot = tok.parse().map_err(|_| Error::Parse {
                line: idx + 1,
                message: format!("`{tok}` is not a non-negative integer"),
            })?;
        }
        let (a, b) = (intern(parsed[0]), intern(parsed[1]));
        if a == b {
            continue;
        }
        let key = (a.min(b), a.max(b));
        if seen.insert(key) {
            edges.push((key.0, key.1, default_trust));
        }
    }
    if ids.is_empty() {
        return Err(Error::Parse {
            line: 0,
            message: "edge list contains no edges".into(),
        });
    }
    Network::new(ids.len(), edges, TopologyTag::Imported)
}

pub fn import_edge_list(path: impl AsRef<Path>, default_trust: f64) -> Result<Network> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_edge_list(&text, default_trust)
}
