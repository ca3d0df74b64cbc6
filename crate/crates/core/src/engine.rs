//! The decentralized round loop.
//!
//! Round `t` for every active node `k`:
//!
//! 1. gossip `B` times: `v_k <- sum_l W_kl v_l`;
//! 2. approximately solve the local subproblem anchored at the mixed `v_k`
//!    with `kappa * n_k` coordinate updates;
//! 3. `x_[k] += γ Δx_[k]` and `v_k += γ K A_[k] Δx_[k]`.
//!
//! Inactive nodes are isolated in the mixing matrix, so their `v_k` and
//! `x_[k]` stay put and the identity `1/K sum_k v_k = Ax` keeps holding.
//! A node that leaves is removed: its coordinates are frozen and its share
//! of the estimates is handed to the remaining nodes.

use std::sync::Arc;

use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::certificates::{self, CertConstants, GapReport};
use crate::data::{DataConstants, Partition};
use crate::linalg;
use crate::local_solver::{solve_subproblem, SolverBudget, SubproblemView};
use crate::problem::Problem;
use crate::rng::{self, Rng};
use crate::topology::{self, Graph, MixingMatrix, Schedule};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SigmaPrimeMode {
    /// `σ' = γ K`.
    #[default]
    Safe,
    /// `σ' = γ λ_max(sum_k P_k)` with `P_k` the projector onto the range of
    /// `A_[k]` (estimated by power iteration, never above `γ K`).
    Refined,
    /// A user-supplied value.
    Fixed(f64),
}

/// What happens to a node's coordinates while it is absent.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureModel {
    /// `x_[k]` and `v_k` are kept unchanged.
    #[default]
    Freeze,
    /// `x_[k]` is reset to zero and `v_k` corrected so the average of the
    /// estimates still equals `Ax`.
    Reset,
}

/// Deterministic simulated time per round: every gossip step costs
/// `gossip_ms`, and a node's solve costs `ms_per_nnz` per stored entry
/// visited; the slowest active node sets the pace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostModel {
    pub gossip_ms: f64,
    pub ms_per_nnz: f64,
}

impl Default for CostModel {
    fn default() -> Self {
        Self { gossip_ms: 1.0, ms_per_nnz: 1e-5 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CertSettings {
    pub epsilon: f64,
    /// Evaluate every this many rounds (and after the last round).
    pub every: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EngineConfig {
    pub gamma: f64,
    pub sigma_prime: SigmaPrimeMode,
    pub budget: SolverBudget,
    pub rounds: usize,
    pub dropout_p: f64,
    pub failure: FailureModel,
    pub solver_seed: u64,
    pub dropout_seed: u64,
    pub certificates: Option<CertSettings>,
    pub cost: CostModel,
    /// Worker threads for node solves; `None` uses the global pool.
    pub threads: Option<usize>,
}

impl Default for EngineConfig {
    fn default() -> Self {
        Self {
            gamma: 1.0,
            sigma_prime: SigmaPrimeMode::Safe,
            budget: SolverBudget::new(1),
            rounds: 100,
            dropout_p: 1.0,
            failure: FailureModel::Freeze,
            solver_seed: 0,
            dropout_seed: 0,
            certificates: None,
            cost: CostModel::default(),
            threads: None,
        }
    }
}

/// Communication pattern: the graph, the per-round gossip schedule and the
/// symmetric matrix used for certificate neighbourhoods.
#[derive(Debug, Clone)]
pub struct Network {
    graph: Graph,
    schedule: Schedule,
    time_varying: bool,
    cert_matrix: MixingMatrix,
}

impl Network {
    /// One Metropolis gossip step per round on a connected graph.
    pub fn fixed(graph: Graph) -> Result<Self> {
        let w = topology::metropolis_weights(&graph)?;
        Ok(Self { graph, schedule: Schedule::fixed(w.clone()), time_varying: false, cert_matrix: w })
    }

    /// Explicit fixed weights on the support graph of `w`.
    pub fn from_matrix(w: MixingMatrix) -> Self {
        Self {
            graph: w.support(),
            schedule: Schedule::fixed(w.clone()),
            time_varying: false,
            cert_matrix: w,
        }
    }

    /// Cycles through the Metropolis matrices of `graphs`, `b` steps per
    /// round. Certificates use Metropolis weights on the union graph.
    pub fn time_varying(graphs: &[Graph], b: usize) -> Result<Self> {
        let schedule = topology::gossip_schedule(graphs, b)?;
        let n = schedule.n_nodes();
        let mut union = Graph::empty(n);
        for g in graphs {
            for (i, j) in g.edges() {
                union.add_edge(i, j)?;
            }
        }
        let cert_matrix = topology::metropolis_weights(&union)?;
        Ok(Self { graph: union, schedule, time_varying: true, cert_matrix })
    }

    /// Repeats a single connected graph `b` times per round.
    pub fn repeated(graph: Graph, b: usize) -> Result<Self> {
        let w = topology::metropolis_weights(&graph)?;
        let schedule = Schedule::new(vec![w.clone()], b)?;
        Ok(Self { graph, schedule, time_varying: false, cert_matrix: w })
    }

    pub fn graph(&self) -> &Graph {
        &self.graph
    }

    pub fn schedule(&self) -> &Schedule {
        &self.schedule
    }

    pub fn cert_matrix(&self) -> &MixingMatrix {
        &self.cert_matrix
    }

    pub fn n_nodes(&self) -> usize {
        self.schedule.n_nodes()
    }

    /// Contraction factor of one round of gossip.
    pub fn beta(&self) -> f64 {
        if self.schedule.matrices().len() == 1 && self.schedule.steps_per_round() == 1 {
            self.schedule.matrices()[0].beta()
        } else {
            self.schedule.worst_beta()
        }
    }
}

#[derive(Debug, Clone)]
pub struct NodeState {
    pub id: usize,
    pub block: Vec<usize>,
    /// Values of the owned coordinates, aligned with `block`.
    pub x: Vec<f64>,
    pub v: Vec<f64>,
    /// Took part in the most recent round.
    pub active: bool,
    rng: Rng,
    nnz: usize,
}

/// Metrics logged after every round (round 0 is the initial state).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub round: usize,
    pub fa: f64,
    pub ha: f64,
    pub gap: f64,
    /// `sum_k ‖v_k - Ax‖²`
    pub consensus_violation: f64,
    /// `‖1/K sum_k v_k - Ax‖ / (1 + ‖Ax‖)`
    pub identity_error: f64,
    pub active_nodes: usize,
    pub cert_all_pass: Option<bool>,
    pub elapsed_ms: f64,
    pub coordinate_updates: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CertVariant {
    /// Certificates on the post-update estimates `v_k`.
    Post,
    /// Certificates on the mixed points `sum_l W_kl v_l`.
    Mixed,
}

impl CertVariant {
    pub fn name(self) -> &'static str {
        match self {
            CertVariant::Post => "post",
            CertVariant::Mixed => "mixed",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertRecord {
    pub round: usize,
    pub variant: CertVariant,
    pub report: GapReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMeta {
    pub n_nodes: usize,
    pub sigma_prime: f64,
    pub beta: f64,
    pub tau: f64,
    pub radius: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunTrace {
    pub meta: RunMeta,
    pub records: Vec<RoundRecord>,
    pub certs: Vec<CertRecord>,
}

impl RunTrace {
    /// First round whose `metric` is at most `target`.
    pub fn rounds_to(&self, target: f64, metric: impl Fn(&RoundRecord) -> f64) -> Option<usize> {
        self.records.iter().find(|r| metric(r) <= target).map(|r| r.round)
    }
}

/// `v_k <- sum_l W_kl v_l`
pub fn gossip_step(vs: &[Vec<f64>], w: &MixingMatrix) -> Vec<Vec<f64>> {
    w.mix(vs)
}

/// Keeps edges between active nodes and moves the weight of every other edge
/// onto the diagonal, so inactive nodes are isolated.
pub fn restrict_to_active(w: &MixingMatrix, active: &[bool]) -> MixingMatrix {
    let n = w.n_nodes();
    assert_eq!(active.len(), n);
    if active.iter().all(|&a| a) {
        return w.clone();
    }
    let mut out = w.weights().to_vec();
    for i in 0..n {
        let mut absorbed = 0.0;
        for j in 0..n {
            if i != j && !(active[i] && active[j]) {
                absorbed += out[i * n + j];
                out[i * n + j] = 0.0;
            }
        }
        out[i * n + i] += absorbed;
    }
    MixingMatrix::new_unchecked(n, out)
}

/// Draws each node active with probability `p` and restricts `w` accordingly.
pub fn apply_dropout(w: &MixingMatrix, p: f64, rng: &mut Rng) -> (Vec<bool>, MixingMatrix) {
    let active = sample_active(w.n_nodes(), p, rng);
    let restricted = restrict_to_active(w, &active);
    (active, restricted)
}

fn sample_active(n: usize, p: f64, rng: &mut Rng) -> Vec<bool> {
    if p >= 1.0 {
        return vec![true; n];
    }
    (0..n).map(|_| rng.random_bool(p)).collect()
}

/// Orthonormal basis of the span of the given columns (modified
/// Gram-Schmidt, dropping numerically dependent columns).
fn range_basis(problem: &Problem, block: &[usize]) -> Vec<Vec<f64>> {
    let d = problem.dim();
    let mut basis: Vec<Vec<f64>> = Vec::new();
    for &i in block {
        let mut q = vec![0.0; d];
        problem.matrix.col(i).axpy(1.0, &mut q);
        let n0 = linalg::norm(&q);
        if n0 == 0.0 {
            continue;
        }
        for _ in 0..2 {
            for b in &basis {
                let c = linalg::dot(b, &q);
                linalg::axpy(-c, b, &mut q);
            }
        }
        let n1 = linalg::norm(&q);
        if n1 > 1e-10 * n0 {
            q.iter_mut().for_each(|e| *e /= n1);
            basis.push(q);
        }
    }
    basis
}

/// `γ λ_max(sum_k P_k)`, the smallest `σ'` that keeps the subproblems upper
/// bounds of the global objective, estimated by power iteration and capped at
/// `γ K`.
pub fn sigma_prime_min(problem: &Problem, blocks: &[Vec<usize>], gamma: f64) -> f64 {
    let bases: Vec<Vec<Vec<f64>>> = blocks.iter().map(|b| range_basis(problem, b)).collect();
    let k_eff = bases.iter().filter(|b| !b.is_empty()).count();
    if k_eff <= 1 {
        return gamma;
    }
    let d = problem.dim();
    let apply = |x: &[f64]| {
        let mut y = vec![0.0; d];
        for basis in &bases {
            for q in basis {
                linalg::axpy(linalg::dot(q, x), q, &mut y);
            }
        }
        y
    };
    let mut x: Vec<f64> = (0..d).map(|j| 1.0 + ((j as f64 + 1.0) * 0.618_033_988_749_895).fract()).collect();
    let nx = linalg::norm(&x);
    x.iter_mut().for_each(|e| *e /= nx);
    let (mut rho, mut resid) = (0.0, f64::INFINITY);
    for _ in 0..crate::data::SIGMA_MAX_ITERS {
        let y = apply(&x);
        rho = linalg::dot(&x, &y);
        resid = y.iter().zip(&x).map(|(a, b)| (a - rho * b).powi(2)).sum::<f64>().sqrt();
        let ny = linalg::norm(&y);
        if ny == 0.0 {
            break;
        }
        x = y.into_iter().map(|e| e / ny).collect();
        if resid <= 1e-12 * rho {
            break;
        }
    }
    let estimate = (rho * (1.0 + 1e-6) + resid).max(1.0);
    gamma * estimate.min(blocks.len() as f64)
}

pub struct Engine {
    problem: Problem,
    network: Network,
    nodes: Vec<NodeState>,
    owner: Vec<Option<usize>>,
    /// Coordinates of departed nodes.
    frozen: Vec<f64>,
    next_id: usize,
    config: EngineConfig,
    sigma_prime: f64,
    round: usize,
    dropout_rng: Rng,
    elapsed_ms: f64,
    updates: u64,
    pool: Option<Arc<rayon::ThreadPool>>,
}

impl Engine {
    pub fn new(problem: Problem, partition: &Partition, network: Network, config: EngineConfig) -> Result<Self> {
        if partition.n_cols() != problem.n_cols() {
            return Err(Error::Dimension { expected: problem.n_cols(), got: partition.n_cols() });
        }
        Self::with_blocks(problem, partition.blocks().to_vec(), network, config)
    }

    /// Like [`Engine::new`] but columns not listed in any block stay at zero.
    pub fn with_blocks(
        problem: Problem,
        blocks: Vec<Vec<usize>>,
        network: Network,
        config: EngineConfig,
    ) -> Result<Self> {
        let k = blocks.len();
        if network.n_nodes() != k {
            return Err(Error::Dimension { expected: k, got: network.n_nodes() });
        }
        let mut owner = vec![None; problem.n_cols()];
        for (node, block) in blocks.iter().enumerate() {
            for &c in block {
                if c >= owner.len() {
                    return Err(Error::config(format!("column {c} out of range")));
                }
                if owner[c].is_some() {
                    return Err(Error::ColumnCollision(c));
                }
                owner[c] = Some(node);
            }
        }
        preflight(&network, &config)?;

        let d = problem.dim();
        let n_cols = problem.n_cols();
        let nodes = blocks
            .into_iter()
            .enumerate()
            .map(|(id, block)| new_node(&problem, id, block, vec![0.0; d], config.solver_seed))
            .collect();
        let pool = match config.threads {
            Some(n) => Some(Arc::new(
                rayon::ThreadPoolBuilder::new()
                    .num_threads(n)
                    .build()
                    .map_err(|e| Error::config(format!("cannot start worker pool: {e}")))?,
            )),
            None => None,
        };
        let mut engine = Self {
            problem,
            network,
            nodes,
            owner,
            frozen: vec![0.0; n_cols],
            next_id: k,
            dropout_rng: rng::stream(config.dropout_seed, rng::DROPOUT_STREAM),
            config,
            sigma_prime: 0.0,
            round: 0,
            elapsed_ms: 0.0,
            updates: 0,
            pool,
        };
        engine.sigma_prime = engine.compute_sigma_prime()?;
        Ok(engine)
    }

    fn compute_sigma_prime(&self) -> Result<f64> {
        let gamma = self.config.gamma;
        let k = self.nodes.len() as f64;
        let s = match self.config.sigma_prime {
            SigmaPrimeMode::Safe => gamma * k,
            SigmaPrimeMode::Refined => sigma_prime_min(&self.problem, &self.blocks(), gamma),
            SigmaPrimeMode::Fixed(s) => s,
        };
        if !(s >= gamma) {
            return Err(Error::Preflight(format!("sigma' = {s} is below gamma = {gamma}")));
        }
        Ok(s)
    }

    pub fn problem(&self) -> &Problem {
        &self.problem
    }

    pub fn network(&self) -> &Network {
        &self.network
    }

    pub fn nodes(&self) -> &[NodeState] {
        &self.nodes
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn sigma_prime(&self) -> f64 {
        self.sigma_prime
    }

    pub fn round(&self) -> usize {
        self.round
    }

    pub fn config(&self) -> &EngineConfig {
        &self.config
    }

    pub fn blocks(&self) -> Vec<Vec<usize>> {
        self.nodes.iter().map(|n| n.block.clone()).collect()
    }

    /// Full model vector; unowned coordinates are zero.
    pub fn x(&self) -> Vec<f64> {
        let mut x = self.frozen.clone();
        for node in &self.nodes {
            for (&i, &xi) in node.block.iter().zip(&node.x) {
                x[i] = xi;
            }
        }
        x
    }

    pub fn estimates(&self) -> Vec<Vec<f64>> {
        self.nodes.iter().map(|n| n.v.clone()).collect()
    }

    /// `sum_l W_kl v_l` with the certificate matrix.
    pub fn mixed_estimates(&self) -> Vec<Vec<f64>> {
        self.network.cert_matrix().mix(&self.estimates())
    }

    pub fn data_constants(&self) -> DataConstants {
        let blocks = self.blocks();
        let refs: Vec<&[usize]> = blocks.iter().map(Vec::as_slice).collect();
        DataConstants::from_blocks(&self.problem.matrix, &refs)
    }

    pub fn cert_constants(&self, epsilon: f64) -> Option<CertConstants> {
        let radius = self.problem.separable().radius()?;
        Some(CertConstants::new(
            epsilon,
            radius,
            self.network.cert_matrix().beta(),
            &self.data_constants(),
            self.problem.tau(),
        ))
    }

    pub fn meta(&self) -> RunMeta {
        RunMeta {
            n_nodes: self.nodes.len(),
            sigma_prime: self.sigma_prime,
            beta: self.network.beta(),
            tau: self.problem.tau(),
            radius: self.problem.separable().radius(),
        }
    }

    /// Runs `f` on the configured worker pool.
    fn install<R: Send>(&self, f: impl FnOnce() -> R + Send) -> R {
        match &self.pool {
            Some(pool) => pool.install(f),
            None => f(),
        }
    }

    /// Executes one round and returns its metrics.
    pub fn step(&mut self) -> RoundRecord {
        let t = self.round;
        let k = self.nodes.len();
        let sampled = sample_active(k, self.config.dropout_p, &mut self.dropout_rng);
        let active = sampled;

        if self.config.failure == FailureModel::Reset {
            for (node, &a) in self.nodes.iter_mut().zip(&active) {
                if !a && node.x.iter().any(|&xi| xi != 0.0) {
                    let ax = self.problem.matrix.mul_block(&node.block, &node.x);
                    linalg::axpy(-(k as f64), &ax, &mut node.v);
                    node.x.iter_mut().for_each(|xi| *xi = 0.0);
                }
            }
        }

        let mut vs = self.estimates();
        let steps = self.network.schedule.round(t);
        for w in &steps {
            vs = restrict_to_active(w, &active).mix(&vs);
        }

        let n_active = active.iter().filter(|&&a| a).count();
        let problem = &self.problem;
        let budget = self.config.budget;
        let gamma = self.config.gamma;
        let coef = self.sigma_prime / problem.tau();
        let scale = gamma * k as f64;
        let mut nodes = std::mem::take(&mut self.nodes);
        self.install(|| {
            nodes.par_iter_mut().zip(vs.into_par_iter()).zip(active.par_iter()).for_each(
                |((node, mixed), &is_active)| {
                    node.active = is_active;
                    node.v = mixed;
                    if !is_active || node.block.is_empty() {
                        return;
                    }
                    let mut anchor = vec![0.0; node.v.len()];
                    problem.smooth().grad_into(&node.v, &mut anchor);
                    let NodeState { block, x, rng, v, .. } = node;
                    let mut view =
                        SubproblemView::new(&problem.matrix, block, problem.separable(), x, anchor, coef);
                    solve_subproblem(&mut view, &budget, rng);
                    let (delta, _) = view.into_parts();
                    let dv = problem.matrix.mul_block(block, &delta);
                    for (xi, di) in x.iter_mut().zip(&delta) {
                        *xi += gamma * di;
                    }
                    linalg::axpy(scale, &dv, v);
                },
            );
        });
        self.nodes = nodes;

        let slowest = self
            .nodes
            .iter()
            .filter(|n| n.active)
            .map(|n| (budget.kappa * n.nnz) as f64 * self.config.cost.ms_per_nnz)
            .fold(0.0, f64::max);
        self.elapsed_ms += steps.len() as f64 * self.config.cost.gossip_ms + slowest;
        self.updates += self
            .nodes
            .iter()
            .filter(|n| n.active)
            .map(|n| (budget.kappa * n.block.len()) as u64)
            .sum::<u64>();
        self.round += 1;

        let mut record = self.record();
        record.active_nodes = n_active;
        record
    }

    /// Metrics of the current state.
    pub fn record(&self) -> RoundRecord {
        let x = self.x();
        let ax = self.problem.matrix.mul_vec(&x);
        let smooth = self.problem.smooth();
        let g = self.problem.g_total(&x);
        let k = self.nodes.len() as f64;
        let mut mean = vec![0.0; ax.len()];
        let mut f_sum = 0.0;
        let mut violation = 0.0;
        for node in &self.nodes {
            f_sum += smooth.value_unchecked(&node.v);
            violation += linalg::dist_sq(&node.v, &ax);
            linalg::axpy(1.0 / k, &node.v, &mut mean);
        }
        let vs = self.estimates();
        RoundRecord {
            round: self.round,
            fa: smooth.value_unchecked(&ax) + g,
            ha: f_sum / k + g,
            gap: certificates::decentralized_gap(&self.problem, &x, &vs),
            consensus_violation: violation,
            identity_error: linalg::dist_sq(&mean, &ax).sqrt() / (1.0 + linalg::norm(&ax)),
            active_nodes: self.nodes.len(),
            cert_all_pass: None,
            elapsed_ms: self.elapsed_ms,
            coordinate_updates: self.updates,
        }
    }

    /// Certificates on both variants, when the problem has bounded support.
    pub fn certify(&self, epsilon: f64) -> Result<Option<[GapReport; 2]>> {
        let Some(constants) = self.cert_constants(epsilon) else {
            return Ok(None);
        };
        let x = self.x();
        let blocks = self.blocks();
        let w = self.network.cert_matrix();
        let post = certificates::evaluate(&self.problem, &x, &self.estimates(), &blocks, w, &constants)?;
        let mixed = certificates::evaluate(&self.problem, &x, &self.mixed_estimates(), &blocks, w, &constants)?;
        Ok(Some([post, mixed]))
    }

    /// Runs the configured number of rounds from the current state.
    pub fn run(&mut self) -> Result<RunTrace> {
        let rounds = self.config.rounds;
        let mut records = Vec::with_capacity(rounds + 1);
        let mut certs = Vec::new();
        let start = self.round;
        let mut first = self.record();
        self.attach_certs(&mut first, &mut certs, start, rounds)?;
        records.push(first);
        for _ in 0..rounds {
            let mut rec = self.step();
            self.attach_certs(&mut rec, &mut certs, start, rounds)?;
            records.push(rec);
        }
        Ok(RunTrace { meta: self.meta(), records, certs })
    }

    fn attach_certs(
        &self,
        rec: &mut RoundRecord,
        certs: &mut Vec<CertRecord>,
        start: usize,
        rounds: usize,
    ) -> Result<()> {
        let Some(settings) = self.config.certificates else {
            return Ok(());
        };
        let offset = rec.round - start;
        let due = offset == rounds || (settings.every > 0 && offset.is_multiple_of(settings.every));
        if !due {
            return Ok(());
        }
        if let Some([post, mixed]) = self.certify(settings.epsilon)? {
            rec.cert_all_pass = Some(post.all_pass());
            certs.push(CertRecord { round: rec.round, variant: CertVariant::Post, report: post });
            certs.push(CertRecord { round: rec.round, variant: CertVariant::Mixed, report: mixed });
        }
        Ok(())
    }

    /// Adds a node owning `block` and linked to `neighbours`. Its
    /// coordinates start at zero and its estimate at the network average, so
    /// `1/K sum_k v_k = Ax` holds for the enlarged network.
    pub fn join_node(&mut self, block: Vec<usize>, neighbours: &[usize]) -> Result<usize> {
        if self.network.time_varying {
            return Err(Error::config("nodes cannot join a time-varying schedule"));
        }
        let index = self.nodes.len();
        for &c in &block {
            if c >= self.owner.len() {
                return Err(Error::config(format!("column {c} out of range")));
            }
            if self.owner[c].is_some() {
                return Err(Error::ColumnCollision(c));
            }
        }
        if let Some(&j) = neighbours.iter().find(|&&j| j >= index) {
            return Err(Error::config(format!("unknown neighbour {j}")));
        }
        let mut graph = self.network.graph.clone();
        graph.add_node(neighbours)?;
        let steps = self.network.schedule.steps_per_round();
        let network = Network::repeated(graph, steps)?;

        let d = self.problem.dim();
        let mut avg = vec![0.0; d];
        for node in &self.nodes {
            linalg::axpy(1.0, &node.v, &mut avg);
        }
        avg.iter_mut().for_each(|e| *e /= index as f64);

        let id = self.next_id;
        for &c in &block {
            self.owner[c] = Some(id);
        }
        self.nodes.push(new_node(&self.problem, id, block, avg, self.config.solver_seed));
        self.next_id += 1;
        self.network = network;
        self.sigma_prime = self.compute_sigma_prime()?;
        Ok(index)
    }

    /// Removes the node at index `k` for good. Its coordinates keep their
    /// current values, and `(v_k - Ax) / (K - 1)` is added to every remaining
    /// estimate so `1/(K-1) sum_j v_j = Ax` holds for the smaller network.
    /// Later nodes shift down by one index. Fails if the remaining graph
    /// would be disconnected.
    pub fn leave_node(&mut self, k: usize) -> Result<()> {
        if self.network.time_varying {
            return Err(Error::config("nodes cannot leave a time-varying schedule"));
        }
        let n = self.nodes.len();
        if k >= n {
            return Err(Error::config(format!("unknown node {k}")));
        }
        if n == 1 {
            return Err(Error::config("the last node cannot leave"));
        }
        let old = self.network.graph();
        let map = |i: usize| if i > k { i - 1 } else { i };
        let mut graph = Graph::empty(n - 1);
        for (i, j) in old.edges() {
            if i != k && j != k {
                graph.add_edge(map(i), map(j))?;
            }
        }
        let network = if n - 1 == 1 {
            Network::from_matrix(MixingMatrix::identity(1))
        } else {
            if !graph.is_connected() {
                return Err(Error::Disconnected);
            }
            Network::repeated(graph, self.network.schedule.steps_per_round())?
        };

        let x = self.x();
        let ax = self.problem.matrix.mul_vec(&x);
        let node = self.nodes.remove(k);
        for (&i, &xi) in node.block.iter().zip(&node.x) {
            self.frozen[i] = xi;
        }
        let mut share = node.v;
        linalg::axpy(-1.0, &ax, &mut share);
        for other in &mut self.nodes {
            linalg::axpy(1.0 / (n - 1) as f64, &share, &mut other.v);
        }
        self.network = network;
        self.sigma_prime = self.compute_sigma_prime()?;
        Ok(())
    }
}

fn new_node(problem: &Problem, id: usize, block: Vec<usize>, v: Vec<f64>, seed: u64) -> NodeState {
    let nnz = block.iter().map(|&i| problem.matrix.col(i).nnz()).sum();
    NodeState {
        id,
        x: vec![0.0; block.len()],
        block,
        v,
        active: true,
        rng: rng::stream(seed, id as u64),
        nnz,
    }
}

/// Rejects configurations the round loop cannot run meaningfully.
pub fn preflight(network: &Network, config: &EngineConfig) -> Result<()> {
    if !(config.gamma > 0.0 && config.gamma <= 1.0) {
        return Err(Error::Preflight(format!("gamma must lie in (0, 1], got {}", config.gamma)));
    }
    if config.budget.kappa == 0 {
        return Err(Error::Preflight("kappa must be at least 1".into()));
    }
    if !(config.dropout_p > 0.0 && config.dropout_p <= 1.0) {
        return Err(Error::Preflight(format!(
            "dropout probability must lie in (0, 1], got {}",
            config.dropout_p
        )));
    }
    if let Some(c) = config.certificates {
        if !(c.epsilon > 0.0) {
            return Err(Error::Preflight("certificate epsilon must be positive".into()));
        }
    }
    if network.n_nodes() >= 2 {
        let beta = network.beta();
        if !(beta < 1.0 - 1e-12) {
            return Err(Error::Preflight(format!(
                "spectral gap is zero (beta = {beta}); gossip cannot reach consensus"
            )));
        }
    }
    Ok(())
}
