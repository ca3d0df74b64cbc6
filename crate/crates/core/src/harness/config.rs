use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::data::{self, SparseColMatrix, SyntheticSpec};
use crate::engine::{self, CertSettings, CostModel, EngineConfig, FailureModel, Network, SigmaPrimeMode};
use crate::local_solver::{Sampling, SolverBudget};
use crate::problem::{self, Formulation, Problem};
use crate::topology::{self, Graph, GraphKind};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProblemConfig {
    Lasso {
        lambda: f64,
        /// Support radius `L`; derived from the data when absent.
        #[serde(default)]
        radius: Option<f64>,
    },
    Ridge {
        lambda: f64,
        orientation: Formulation,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case", deny_unknown_fields)]
pub enum DataConfig {
    Synthetic {
        rows: usize,
        cols: usize,
        density: f64,
        noise: f64,
        #[serde(default = "default_support")]
        support: f64,
        seed: u64,
    },
    /// LIBSVM file; relative paths are resolved against the config file.
    Libsvm { path: PathBuf },
}

fn default_support() -> f64 {
    0.1
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TopologyConfig {
    Ring,
    Cycle2,
    Cycle3,
    Grid2d,
    Grid2dOpen,
    Complete,
    Star,
    /// Alternates the two perfect matchings of an even ring.
    RingMatchings,
    /// One `i j` edge per line.
    Custom(PathBuf),
}

impl TopologyConfig {
    pub fn graph_kind(&self) -> Option<GraphKind> {
        Some(match self {
            TopologyConfig::Ring => GraphKind::Ring,
            TopologyConfig::Cycle2 => GraphKind::Cycle2,
            TopologyConfig::Cycle3 => GraphKind::Cycle3,
            TopologyConfig::Grid2d => GraphKind::Grid2d,
            TopologyConfig::Grid2dOpen => GraphKind::Grid2dOpen,
            TopologyConfig::Complete => GraphKind::Complete,
            TopologyConfig::Star => GraphKind::Star,
            TopologyConfig::RingMatchings | TopologyConfig::Custom(_) => return None,
        })
    }

    /// Short label used in output filenames.
    pub fn label(&self) -> String {
        match self {
            TopologyConfig::RingMatchings => "ring_matchings".into(),
            TopologyConfig::Custom(p) => {
                let stem = p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
                format!("custom-{stem}")
            }
            other => other.graph_kind().expect("standard kind").name().into(),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Seeds {
    #[serde(default)]
    pub partition: u64,
    #[serde(default)]
    pub solver: u64,
    #[serde(default)]
    pub dropout: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Baseline {
    Diging,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_name")]
    pub name: String,
    pub problem: ProblemConfig,
    pub data: DataConfig,
    pub topology: TopologyConfig,
    pub nodes: usize,
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    #[serde(default)]
    pub sigma_prime: SigmaPrimeMode,
    pub kappa: usize,
    #[serde(default)]
    pub sampling: Sampling,
    pub rounds: usize,
    #[serde(default = "default_p")]
    pub dropout_p: f64,
    #[serde(default)]
    pub failure: FailureModel,
    #[serde(default = "default_b")]
    pub gossip_b: usize,
    #[serde(default)]
    pub seeds: Seeds,
    #[serde(default)]
    pub cert_epsilon: Option<f64>,
    #[serde(default = "default_cert_every")]
    pub cert_every: usize,
    #[serde(default)]
    pub threads: Option<usize>,
    #[serde(default)]
    pub cost: CostModel,
    #[serde(default)]
    pub baseline: Option<Baseline>,
    #[serde(default)]
    pub alpha_candidates: Vec<f64>,
    #[serde(default = "default_alpha_budget")]
    pub alpha_budget: usize,
}

fn default_name() -> String {
    "run".into()
}
fn default_gamma() -> f64 {
    1.0
}
fn default_p() -> f64 {
    1.0
}
fn default_b() -> usize {
    1
}
fn default_cert_every() -> usize {
    10
}
fn default_alpha_budget() -> usize {
    200
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepAxes {
    #[serde(default)]
    pub kappa: Vec<usize>,
    #[serde(default)]
    pub topology: Vec<TopologyConfig>,
    #[serde(default)]
    pub dropout: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub run: RunConfig,
    #[serde(default)]
    pub sweep: SweepAxes,
    /// Coordinate updates allowed for the centralized reference solve.
    #[serde(default = "default_reference_budget")]
    pub reference_budget: u64,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

fn default_reference_budget() -> u64 {
    50_000_000
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::file(path, e))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// One run config per sweep combination (axes left empty keep the base
    /// value), with collision-free names encoding every axis.
    pub fn sweep_points(&self) -> Result<Vec<RunConfig>> {
        let base = &self.run;
        let kappas = if self.sweep.kappa.is_empty() { vec![base.kappa] } else { self.sweep.kappa.clone() };
        let topologies = if self.sweep.topology.is_empty() {
            vec![base.topology.clone()]
        } else {
            self.sweep.topology.clone()
        };
        let ps = if self.sweep.dropout.is_empty() { vec![base.dropout_p] } else { self.sweep.dropout.clone() };

        let mut points = Vec::new();
        let mut names = BTreeSet::new();
        for topo in &topologies {
            for &kappa in &kappas {
                for &p in &ps {
                    let mut run = base.clone();
                    run.kappa = kappa;
                    run.topology = topo.clone();
                    run.dropout_p = p;
                    run.name = format!("{}_kappa{}_{}_p{}", base.name, kappa, topo.label(), p);
                    if !names.insert(run.name.clone()) {
                        return Err(Error::config(format!("sweep produces duplicate output {:?}", run.name)));
                    }
                    points.push(run);
                }
            }
        }
        Ok(points)
    }
}

/// Loaded data: a sample-major matrix and its targets.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub samples: SparseColMatrix,
    pub targets: Vec<f64>,
}

pub fn load_data(cfg: &DataConfig, base_dir: &Path) -> Result<Dataset> {
    match cfg {
        DataConfig::Synthetic { rows, cols, density, noise, support, seed } => {
            let s = data::synthesize_regression(&SyntheticSpec {
                rows: *rows,
                cols: *cols,
                density: *density,
                noise: *noise,
                support: *support,
                seed: *seed,
            })?;
            Ok(Dataset { samples: s.matrix, targets: s.target })
        }
        DataConfig::Libsvm { path } => {
            let path = base_dir.join(path);
            let file = fs::File::open(&path).map_err(|e| Error::file(&path, e))?;
            let d = data::parse_libsvm(std::io::BufReader::new(file))?;
            Ok(Dataset { samples: d.samples, targets: d.labels })
        }
    }
}

pub fn build_problem(cfg: &ProblemConfig, data: &Dataset) -> Result<Problem> {
    match *cfg {
        ProblemConfig::Lasso { lambda, radius } => problem::make_lasso(
            Arc::new(data.samples.clone()),
            data.targets.clone(),
            lambda,
            radius,
        ),
        ProblemConfig::Ridge { lambda, orientation } => {
            problem::make_ridge(&data.samples, data.targets.clone(), lambda, orientation)
        }
    }
}

fn ring_matchings(k: usize) -> Result<[Graph; 2]> {
    if k < 4 || !k.is_multiple_of(2) {
        return Err(Error::config(format!("ring matchings need an even node count of at least 4, got {k}")));
    }
    let even: Vec<_> = (0..k).step_by(2).map(|i| (i, i + 1)).collect();
    let odd: Vec<_> = (1..k).step_by(2).map(|i| (i, (i + 1) % k)).collect();
    Ok([Graph::from_edges(k, &even)?, Graph::from_edges(k, &odd)?])
}

pub fn build_network(run: &RunConfig, base_dir: &Path) -> Result<Network> {
    let k = run.nodes;
    if k == 1 {
        return Ok(Network::from_matrix(topology::MixingMatrix::identity(1)));
    }
    match &run.topology {
        TopologyConfig::RingMatchings => Network::time_varying(&ring_matchings(k)?, run.gossip_b),
        TopologyConfig::Custom(path) => {
            let path = base_dir.join(path);
            let file = fs::File::open(&path).map_err(|e| Error::file(&path, e))?;
            let g = topology::parse_edge_list(std::io::BufReader::new(file), Some(k))?;
            Network::repeated(g, run.gossip_b)
        }
        other => {
            let kind = other.graph_kind().expect("standard kind");
            Network::repeated(topology::build_graph(kind, k)?, run.gossip_b)
        }
    }
}

pub fn engine_config(run: &RunConfig) -> Result<EngineConfig> {
    if run.kappa == 0 {
        return Err(Error::config("kappa must be at least 1"));
    }
    Ok(EngineConfig {
        gamma: run.gamma,
        sigma_prime: run.sigma_prime,
        budget: SolverBudget { kappa: run.kappa, sampling: run.sampling },
        rounds: run.rounds,
        dropout_p: run.dropout_p,
        failure: run.failure,
        solver_seed: run.seeds.solver,
        dropout_seed: run.seeds.dropout,
        certificates: run.cert_epsilon.map(|epsilon| CertSettings { epsilon, every: run.cert_every }),
        cost: run.cost,
        threads: run.threads,
    })
}

/// Everything needed to start a run, validated.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub data: Dataset,
    pub problem: Problem,
    pub partition: data::Partition,
    pub network: Network,
    pub engine: EngineConfig,
}

pub fn prepare(run: &RunConfig, base_dir: &Path) -> Result<Prepared> {
    let data = load_data(&run.data, base_dir)?;
    let problem = build_problem(&run.problem, &data)?;
    let partition = data::partition_columns(problem.n_cols(), run.nodes, run.seeds.partition)?;
    let network = build_network(run, base_dir)?;
    let engine = engine_config(run)?;
    engine::preflight(&network, &engine)?;
    Ok(Prepared { data, problem, partition, network, engine })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> ExperimentConfig {
        ExperimentConfig::from_json(
            r#"{
                "run": {
                    "problem": {"kind": "lasso", "lambda": 0.01},
                    "data": {"source": "synthetic", "rows": 10, "cols": 20, "density": 0.5, "noise": 0.1, "seed": 1},
                    "topology": "ring",
                    "nodes": 4,
                    "kappa": 2,
                    "rounds": 5,
                    "sigma_prime": {"fixed": 3.0}
                },
                "sweep": {"kappa": [1, 5], "topology": ["ring", "complete"]}
            }"#,
        )
        .unwrap()
    }

    #[test]
    fn json_round_trip() {
        let c = sample();
        assert_eq!(ExperimentConfig::from_json(&c.to_json()).unwrap(), c);
    }

    #[test]
    fn unknown_keys_rejected() {
        let bad = sample().to_json().replace("\"kappa\": 2", "\"kapa\": 2");
        assert!(ExperimentConfig::from_json(&bad).is_err());
    }

    #[test]
    fn sweep_names_are_distinct() {
        let pts = sample().sweep_points().unwrap();
        assert_eq!(pts.len(), 4);
        let names: BTreeSet<_> = pts.iter().map(|p| p.name.clone()).collect();
        assert_eq!(names.len(), 4);
        assert!(names.contains("run_kappa5_complete_p1"));
    }

    #[test]
    fn duplicate_sweep_values_rejected() {
        let mut c = sample();
        c.sweep.kappa = vec![3, 3];
        assert!(c.sweep_points().is_err());
    }

    #[test]
    fn matchings_cover_ring() {
        let [a, b] = ring_matchings(6).unwrap();
        assert_eq!(a.n_edges() + b.n_edges(), 6);
        assert!(ring_matchings(5).is_err());
    }
}
