//! Communication graphs, Metropolis-Hastings mixing matrices and gossip
//! schedules.

use std::collections::VecDeque;
use std::io::BufRead;

use serde::{Deserialize, Serialize};

use crate::linalg;
use crate::{Error, Result};

/// Tolerance on row and column sums of a mixing matrix.
pub const STOCHASTIC_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GraphKind {
    Ring,
    /// Each node linked to its 2 nearest neighbours on either side.
    Cycle2,
    /// Each node linked to its 3 nearest neighbours on either side.
    Cycle3,
    /// `r x c` lattice with wraparound in both directions.
    Grid2d,
    /// `r x c` lattice without wraparound.
    Grid2dOpen,
    Complete,
    /// Node 0 linked to every other node.
    Star,
}

impl GraphKind {
    pub fn name(self) -> &'static str {
        match self {
            GraphKind::Ring => "ring",
            GraphKind::Cycle2 => "cycle2",
            GraphKind::Cycle3 => "cycle3",
            GraphKind::Grid2d => "grid2d",
            GraphKind::Grid2dOpen => "grid2d_open",
            GraphKind::Complete => "complete",
            GraphKind::Star => "star",
        }
    }
}

/// Undirected simple graph on nodes `0..n`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    adjacency: Vec<Vec<usize>>,
}

impl Graph {
    pub fn empty(n: usize) -> Self {
        Self { adjacency: vec![Vec::new(); n] }
    }

    /// Duplicate edges are merged; self-loops are rejected.
    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut g = Self::empty(n);
        for &(i, j) in edges {
            g.add_edge(i, j)?;
        }
        Ok(g)
    }

    pub fn add_edge(&mut self, i: usize, j: usize) -> Result<()> {
        let n = self.n_nodes();
        if i >= n || j >= n {
            return Err(Error::config(format!("edge ({i}, {j}) out of range for {n} nodes")));
        }
        if i == j {
            return Err(Error::config(format!("self-loop at node {i}")));
        }
        for (a, b) in [(i, j), (j, i)] {
            if let Err(pos) = self.adjacency[a].binary_search(&b) {
                self.adjacency[a].insert(pos, b);
            }
        }
        Ok(())
    }

    /// Appends a node linked to `neighbours` and returns its id.
    pub fn add_node(&mut self, neighbours: &[usize]) -> Result<usize> {
        let id = self.n_nodes();
        self.adjacency.push(Vec::new());
        for &j in neighbours {
            self.add_edge(id, j)?;
        }
        Ok(id)
    }

    pub fn n_nodes(&self) -> usize {
        self.adjacency.len()
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.adjacency[i]
    }

    pub fn degree(&self, i: usize) -> usize {
        self.adjacency[i].len()
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.adjacency[i].binary_search(&j).is_ok()
    }

    /// Edges `(i, j)` with `i < j`, in lexicographic order.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for (i, nb) in self.adjacency.iter().enumerate() {
            out.extend(nb.iter().filter(|&&j| j > i).map(|&j| (i, j)));
        }
        out
    }

    pub fn n_edges(&self) -> usize {
        self.adjacency.iter().map(Vec::len).sum::<usize>() / 2
    }

    pub fn is_connected(&self) -> bool {
        let n = self.n_nodes();
        if n == 0 {
            return true;
        }
        let mut seen = vec![false; n];
        let mut queue = VecDeque::from([0]);
        seen[0] = true;
        let mut count = 1;
        while let Some(i) = queue.pop_front() {
            for &j in &self.adjacency[i] {
                if !seen[j] {
                    seen[j] = true;
                    count += 1;
                    queue.push_back(j);
                }
            }
        }
        count == n
    }
}

/// Factorization `rows x cols = k` with `rows` the largest divisor at most
/// `sqrt(k)`.
pub fn grid_shape(k: usize) -> Result<(usize, usize)> {
    let rows = (1..=k).take_while(|r| r * r <= k).filter(|r| k.is_multiple_of(*r)).last().unwrap_or(1);
    if rows < 2 {
        return Err(Error::config(format!("a 2D grid needs a composite node count, got {k}")));
    }
    Ok((rows, k / rows))
}

fn circulant(k: usize, reach: usize) -> Result<Graph> {
    let mut g = Graph::empty(k);
    for i in 0..k {
        for s in 1..=reach {
            let j = (i + s) % k;
            if j != i {
                g.add_edge(i, j)?;
            }
        }
    }
    Ok(g)
}

fn grid(k: usize, wrap: bool) -> Result<Graph> {
    let (rows, cols) = grid_shape(k)?;
    let id = |r: usize, c: usize| r * cols + c;
    let mut g = Graph::empty(k);
    for r in 0..rows {
        for c in 0..cols {
            if c + 1 < cols || (wrap && cols > 2) {
                g.add_edge(id(r, c), id(r, (c + 1) % cols))?;
            }
            if r + 1 < rows || (wrap && rows > 2) {
                g.add_edge(id(r, c), id((r + 1) % rows, c))?;
            }
        }
    }
    Ok(g)
}

pub fn build_graph(kind: GraphKind, k: usize) -> Result<Graph> {
    if k < 2 {
        return Err(Error::config(format!("{} topology needs at least 2 nodes, got {k}", kind.name())));
    }
    match kind {
        GraphKind::Ring => circulant(k, 1),
        GraphKind::Cycle2 => circulant(k, 2),
        GraphKind::Cycle3 => circulant(k, 3),
        GraphKind::Grid2d => grid(k, true),
        GraphKind::Grid2dOpen => grid(k, false),
        GraphKind::Complete => circulant(k, k - 1),
        GraphKind::Star => {
            let edges: Vec<_> = (1..k).map(|j| (0, j)).collect();
            Graph::from_edges(k, &edges)
        }
    }
}

/// Reads one `i j` edge per line (0-based). `#` comments and blank lines are
/// skipped. The node count is `n_nodes` if given, else the largest id plus one.
pub fn parse_edge_list<R: BufRead>(reader: R, n_nodes: Option<usize>) -> Result<Graph> {
    let mut edges = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        let content = line.split('#').next().unwrap_or("");
        let toks: Vec<&str> = content.split_whitespace().collect();
        if toks.is_empty() {
            continue;
        }
        let parse = |t: &str| {
            t.parse::<usize>().map_err(|_| Error::Parse {
                line: lineno + 1,
                msg: format!("invalid node id {t:?}"),
            })
        };
        if toks.len() != 2 {
            return Err(Error::Parse { line: lineno + 1, msg: "expected `i j`".into() });
        }
        edges.push((parse(toks[0])?, parse(toks[1])?));
    }
    let n = n_nodes.unwrap_or_else(|| edges.iter().map(|&(i, j)| i.max(j) + 1).max().unwrap_or(0));
    Graph::from_edges(n, &edges)
}

/// Symmetric doubly stochastic gossip weights.
#[derive(Debug, Clone, PartialEq)]
pub struct MixingMatrix {
    n: usize,
    weights: Vec<f64>,
    beta: f64,
}

impl MixingMatrix {
    /// Validates a dense row-major `n x n` matrix: exact symmetry,
    /// nonnegativity and unit row sums.
    pub fn from_weights(n: usize, weights: Vec<f64>) -> Result<Self> {
        if weights.len() != n * n {
            return Err(Error::Dimension { expected: n * n, got: weights.len() });
        }
        for i in 0..n {
            let mut sum = 0.0;
            for j in 0..n {
                let w = weights[i * n + j];
                if !(w >= 0.0) {
                    return Err(Error::config(format!("negative or NaN weight at ({i}, {j})")));
                }
                if w != weights[j * n + i] {
                    return Err(Error::config(format!("weights not symmetric at ({i}, {j})")));
                }
                sum += w;
            }
            if (sum - 1.0).abs() > STOCHASTIC_TOL {
                return Err(Error::config(format!("row {i} sums to {sum}, not 1")));
            }
        }
        Ok(Self::new_unchecked(n, weights))
    }

    pub(crate) fn new_unchecked(n: usize, weights: Vec<f64>) -> Self {
        let beta = spectral_beta(&weights, n);
        Self { n, weights, beta }
    }

    pub fn identity(n: usize) -> Self {
        let mut w = vec![0.0; n * n];
        for i in 0..n {
            w[i * n + i] = 1.0;
        }
        Self::new_unchecked(n, w)
    }

    pub fn n_nodes(&self) -> usize {
        self.n
    }

    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.weights[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.weights[i * self.n..(i + 1) * self.n]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// `out_k = sum_l W_kl v_l`
    pub fn mix(&self, vs: &[Vec<f64>]) -> Vec<Vec<f64>> {
        assert_eq!(vs.len(), self.n);
        (0..self.n)
            .map(|k| {
                let mut out = vec![0.0; vs[k].len()];
                for (l, &w) in self.row(k).iter().enumerate() {
                    if w != 0.0 {
                        linalg::axpy(w, &vs[l], &mut out);
                    }
                }
                out
            })
            .collect()
    }

    /// Graph of the nonzero off-diagonal entries.
    pub fn support(&self) -> Graph {
        let mut g = Graph::empty(self.n);
        for i in 0..self.n {
            for j in (i + 1)..self.n {
                if self.weight(i, j) > 0.0 {
                    g.add_edge(i, j).expect("indices in range");
                }
            }
        }
        g
    }
}

/// Metropolis-Hastings weights on any graph, connected or not.
pub(crate) fn metropolis_unchecked(graph: &Graph) -> MixingMatrix {
    let n = graph.n_nodes();
    let mut w = vec![0.0; n * n];
    for i in 0..n {
        for &j in graph.neighbors(i) {
            w[i * n + j] = 1.0 / (1.0 + graph.degree(i).max(graph.degree(j)) as f64);
        }
    }
    for i in 0..n {
        let off: f64 = graph.neighbors(i).iter().map(|&j| w[i * n + j]).sum();
        w[i * n + i] = 1.0 - off;
    }
    MixingMatrix::new_unchecked(n, w)
}

/// `W_ij = 1 / (1 + max(d_i, d_j))` on edges, diagonal absorbs the rest.
pub fn metropolis_weights(graph: &Graph) -> Result<MixingMatrix> {
    if !graph.is_connected() {
        return Err(Error::Disconnected);
    }
    Ok(metropolis_unchecked(graph))
}

/// `max(|lambda_2|, |lambda_n|)` of a symmetric `n x n` matrix.
pub fn spectral_beta(weights: &[f64], n: usize) -> f64 {
    if n < 2 {
        return 0.0;
    }
    let eig = linalg::symmetric_eigenvalues(weights, n);
    eig[1].abs().max(eig[n - 1].abs())
}

/// Largest singular value of `P - 11^T / n`, the contraction factor of the
/// (generally nonsymmetric) product `P` of several mixing matrices.
pub fn product_beta(product: &[f64], n: usize) -> f64 {
    if n < 2 {
        return 0.0;
    }
    let j = 1.0 / n as f64;
    let m: Vec<f64> = product.iter().map(|p| p - j).collect();
    let mut mtm = vec![0.0; n * n];
    for a in 0..n {
        for b in 0..n {
            mtm[a * n + b] = (0..n).map(|r| m[r * n + a] * m[r * n + b]).sum();
        }
    }
    linalg::symmetric_eigenvalues(&mtm, n)[0].max(0.0).sqrt()
}

/// Per-round ordered list of mixing matrices. Step `s` of round `t` uses
/// matrix `(t * B + s) mod len`.
#[derive(Debug, Clone)]
pub struct Schedule {
    matrices: Vec<MixingMatrix>,
    steps: usize,
}

impl Schedule {
    pub fn new(matrices: Vec<MixingMatrix>, steps: usize) -> Result<Self> {
        if steps == 0 {
            return Err(Error::config("gossip steps per round must be at least 1"));
        }
        let Some(first) = matrices.first() else {
            return Err(Error::config("gossip schedule needs at least one matrix"));
        };
        let n = first.n_nodes();
        if matrices.iter().any(|m| m.n_nodes() != n) {
            return Err(Error::config("all scheduled matrices must have the same size"));
        }
        Ok(Self { matrices, steps })
    }

    pub fn fixed(w: MixingMatrix) -> Self {
        Self { matrices: vec![w], steps: 1 }
    }

    pub fn steps_per_round(&self) -> usize {
        self.steps
    }

    pub fn matrices(&self) -> &[MixingMatrix] {
        &self.matrices
    }

    pub fn n_nodes(&self) -> usize {
        self.matrices[0].n_nodes()
    }

    pub fn round(&self, t: usize) -> Vec<&MixingMatrix> {
        (0..self.steps).map(|s| &self.matrices[(t * self.steps + s) % self.matrices.len()]).collect()
    }

    /// Dense product `W_{B-1} ... W_0` applied in round `t`.
    pub fn round_product(&self, t: usize) -> Vec<f64> {
        let n = self.n_nodes();
        let mut p = MixingMatrix::identity(n).weights;
        for w in self.round(t) {
            p = linalg::matmul(w.weights(), &p, n);
        }
        p
    }

    /// Worst contraction factor over one full period of the schedule.
    pub fn worst_beta(&self) -> f64 {
        let period = self.matrices.len();
        (0..period)
            .map(|t| product_beta(&self.round_product(t), self.n_nodes()))
            .fold(0.0, f64::max)
    }
}

/// Metropolis weights for each base graph, applied `b` steps per round. The
/// base graphs need not be connected individually.
pub fn gossip_schedule(graphs: &[Graph], b: usize) -> Result<Schedule> {
    Schedule::new(graphs.iter().map(metropolis_unchecked).collect(), b)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ring_four() {
        let g = build_graph(GraphKind::Ring, 4).unwrap();
        assert_eq!(g.n_edges(), 4);
        assert!((0..4).all(|i| g.degree(i) == 2));
        let w = metropolis_weights(&g).unwrap();
        assert_eq!(w.weight(0, 1), 1.0 / 3.0);
        assert_eq!(w.weight(0, 3), 1.0 / 3.0);
        assert!((w.weight(0, 0) - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(w.weight(0, 2), 0.0);
    }

    #[test]
    fn complete_five() {
        let g = build_graph(GraphKind::Complete, 5).unwrap();
        assert_eq!(g.n_edges(), 10);
        let w = metropolis_weights(&g).unwrap();
        for i in 0..5 {
            for j in 0..5 {
                assert!((w.weight(i, j) - 0.2).abs() < 1e-15);
            }
        }
        assert!(w.beta() < 1e-12);
    }

    #[test]
    fn cycle2_six() {
        let g = build_graph(GraphKind::Cycle2, 6).unwrap();
        assert!((0..6).all(|i| g.degree(i) == 4));
    }

    #[test]
    fn star_three() {
        let g = build_graph(GraphKind::Star, 3).unwrap();
        let w = metropolis_weights(&g).unwrap();
        assert_eq!(w.weight(0, 1), 1.0 / 3.0);
        assert!((w.weight(0, 0) - 1.0 / 3.0).abs() < 1e-15);
        assert!((w.weight(1, 1) - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn grid_shapes() {
        assert_eq!(grid_shape(16).unwrap(), (4, 4));
        assert_eq!(grid_shape(12).unwrap(), (3, 4));
        assert!(grid_shape(7).is_err());
        assert!(build_graph(GraphKind::Grid2d, 13).is_err());
        let torus = build_graph(GraphKind::Grid2d, 16).unwrap();
        assert!((0..16).all(|i| torus.degree(i) == 4));
        let open = build_graph(GraphKind::Grid2dOpen, 16).unwrap();
        assert_eq!(open.n_edges(), 24);
    }

    #[test]
    fn disconnected_rejected() {
        let g = Graph::from_edges(4, &[(0, 1), (2, 3)]).unwrap();
        assert!(matches!(metropolis_weights(&g), Err(Error::Disconnected)));
    }

    #[test]
    fn identity_beta_is_one() {
        assert_eq!(MixingMatrix::identity(3).beta(), 1.0);
    }

    #[test]
    fn self_loops_rejected() {
        assert!(Graph::from_edges(3, &[(1, 1)]).is_err());
    }

    #[test]
    fn from_weights_validation() {
        assert!(MixingMatrix::from_weights(2, vec![0.5, 0.5, 0.5, 0.5]).is_ok());
        assert!(MixingMatrix::from_weights(2, vec![0.6, 0.4, 0.5, 0.5]).is_err());
        assert!(MixingMatrix::from_weights(2, vec![0.7, 0.4, 0.4, 0.7]).is_err());
        assert!(MixingMatrix::from_weights(2, vec![1.5, -0.5, -0.5, 1.5]).is_err());
    }

    #[test]
    fn edge_list_parsing() {
        let g = parse_edge_list("# ring\n0 1\n1 2\n\n2 0\n".as_bytes(), None).unwrap();
        assert_eq!(g.n_nodes(), 3);
        assert_eq!(g.n_edges(), 3);
        assert!(parse_edge_list("0 1 2\n".as_bytes(), None).is_err());
        assert!(parse_edge_list("0 x\n".as_bytes(), None).is_err());
    }

    #[test]
    fn fixed_schedule_repeats() {
        let w = metropolis_weights(&build_graph(GraphKind::Ring, 5).unwrap()).unwrap();
        let s = Schedule::fixed(w.clone());
        assert_eq!(s.round(7), vec![&w]);
    }
}
