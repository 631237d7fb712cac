use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Case, Topology};
use crate::rng::derive_seed;
use crate::scenario_io::write_dataset;
use crate::template::{InfectedCount, ScenarioTemplate};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DatasetVersion {
    /// One file per initial infected count 1, 2, 3.
    V1,
    /// One file per initial frontier size 1..=4, infected count drawn
    /// uniformly from 1..=3.
    V2,
}

impl DatasetVersion {
    fn index(self) -> u64 {
        match self {
            DatasetVersion::V1 => 1,
            DatasetVersion::V2 => 2,
        }
    }

    /// Values of the per-file parameter.
    pub fn keys(self) -> std::ops::RangeInclusive<usize> {
        match self {
            DatasetVersion::V1 => 1..=3,
            DatasetVersion::V2 => 1..=4,
        }
    }

    fn prefix(self) -> &'static str {
        match self {
            DatasetVersion::V1 => "d",
            DatasetVersion::V2 => "deg",
        }
    }
}

impl fmt::Display for DatasetVersion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "v{}", self.index())
    }
}

impl FromStr for DatasetVersion {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "1" | "v1" => Ok(DatasetVersion::V1),
            "2" | "v2" => Ok(DatasetVersion::V2),
            _ => Err(Error::Config(format!("unknown dataset version `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSpec {
    pub version: DatasetVersion,
    pub sizes: Vec<usize>,
    pub case: Case,
    pub states_per_config: usize,
    pub opinion_low: f64,
    pub opinion_high: f64,
    pub topology: Topology,
    pub source_trust: f64,
    pub seed: u64,
}

impl DatasetSpec {
    pub fn new(version: DatasetVersion, case: Case, sizes: Vec<usize>, seed: u64) -> Self {
        DatasetSpec {
            version,
            sizes,
            case,
            states_per_config: 1000,
            opinion_low: -0.5,
            opinion_high: 0.6,
            topology: Topology::small_world(),
            source_trust: 1.0,
            seed,
        }
    }

    /// Scenario recipe behind one file.
    pub fn template(&self, n: usize, key: usize) -> ScenarioTemplate {
        let mut t = ScenarioTemplate::new(self.case, n);
        t.topology = self.topology;
        t.opinion_low = self.opinion_low;
        t.opinion_high = self.opinion_high;
        t.source_trust = self.source_trust;
        match self.version {
            DatasetVersion::V1 => t.infected = InfectedCount::Fixed(key),
            DatasetVersion::V2 => {
                t.infected = InfectedCount::Uniform { min: 1, max: 3 };
                t.degree_target = Some(key);
            }
        }
        t
    }
}

/// `<out>/<case>/v<1|2>/n<N>/<d|deg><k>.jsonl`
pub fn dataset_path(
    out: &Path,
    case: Case,
    version: DatasetVersion,
    n: usize,
    key: usize,
) -> PathBuf {
    out.join(case.name())
        .join(version.to_string())
        .join(format!("n{n}"))
        .join(format!("{}{key}.jsonl", version.prefix()))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DatasetFile {
    pub path: PathBuf,
    pub num_nodes: usize,
    pub key: usize,
    pub scenarios: usize,
    /// Network redraws needed to meet the file's constraints.
    pub reseeds: usize,
}

/// Writes every file of the spec. Deterministic per seed.
pub fn generate_dataset(spec: &DatasetSpec, out: &Path) -> Result<Vec<DatasetFile>> {
    if spec.sizes.is_empty() || spec.states_per_config == 0 {
        return Err(Error::Parameter(
            "dataset needs at least one size and one state".into(),
        ));
    }
    let mut files = Vec::new();
    for &n in &spec.sizes {
        for key in spec.version.keys() {
            let template = spec.template(n, key);
            let mut reseeds = 0;
            let scenarios = (0..spec.states_per_config)
                .map(|j| {
                    let seed = derive_seed(
                        spec.seed,
                        &[spec.version.index(), n as u64, key as u64, j as u64],
                    );
                    let (s, r) = template.sample(seed)?;
                    reseeds += r;
                    Ok(s)
                })
                .collect::<Result<Vec<_>>>()?;
            let path = dataset_path(out, spec.case, spec.version, n, key);
            write_dataset(&path, &scenarios)?;
            files.push(DatasetFile {
                path,
                num_nodes: n,
                key,
                scenarios: scenarios.len(),
                reseeds,
            });
        }
    }
    Ok(files)
}
