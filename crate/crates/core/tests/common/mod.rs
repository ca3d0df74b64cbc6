#![allow(dead_code)]

use std::path::PathBuf;
use std::sync::Arc;

use cola::data::{self, SparseColMatrix, SyntheticSpec};
use cola::engine::{Engine, EngineConfig, Network};
use cola::local_solver::SolverBudget;
use cola::problem::{self, Formulation, Problem};
use cola::topology::{build_graph, GraphKind};

pub fn repo_root() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..")
}

pub fn config_path(name: &str) -> PathBuf {
    repo_root().join("configs").join(name)
}

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

pub fn synthetic(rows: usize, cols: usize, density: f64, seed: u64) -> data::SyntheticRegression {
    data::synthesize_regression(&SyntheticSpec { rows, cols, density, noise: 0.1, support: 0.3, seed }).unwrap()
}

pub fn small_lasso(rows: usize, cols: usize, lambda: f64, seed: u64) -> Problem {
    let s = synthetic(rows, cols, 1.0, seed);
    problem::make_lasso(Arc::new(s.matrix), s.target, lambda, Some(5.0)).unwrap()
}

pub fn small_ridge(samples: usize, features: usize, lambda: f64, seed: u64, formulation: Formulation) -> Problem {
    let s = synthetic(samples, features, 1.0, seed);
    problem::make_ridge(&s.matrix, s.target, lambda, formulation).unwrap()
}

/// Engine on a Metropolis ring (complete graph for two nodes).
pub fn engine(problem: Problem, kind: GraphKind, k: usize, kappa: usize, seed: u64) -> Engine {
    let partition = data::partition_columns(problem.n_cols(), k, seed).unwrap();
    let network = Network::fixed(build_graph(kind, k).unwrap()).unwrap();
    let config = EngineConfig { budget: SolverBudget::new(kappa), solver_seed: seed, ..EngineConfig::default() };
    Engine::new(problem, &partition, network, config).unwrap()
}

pub fn dense(m: &SparseColMatrix) -> nalgebra::DMatrix<f64> {
    let rows = m.to_dense_rows();
    nalgebra::DMatrix::from_fn(m.n_rows(), m.n_cols(), |i, j| rows[i][j])
}

/// Cyclic Jacobi eigenvalue iteration for a symmetric row-major matrix.
pub fn jacobi_eigenvalues(a: &[f64], n: usize) -> Vec<f64> {
    let mut m = a.to_vec();
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| m[i * n + j].powi(2))
            .sum();
        if off < 1e-30 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[p * n + q];
                if apq.abs() < 1e-300 {
                    continue;
                }
                let theta = (m[q * n + q] - m[p * n + p]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = m[k * n + p];
                    let akq = m[k * n + q];
                    m[k * n + p] = c * akp - s * akq;
                    m[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = m[p * n + k];
                    let aqk = m[q * n + k];
                    m[p * n + k] = c * apk - s * aqk;
                    m[q * n + k] = s * apk + c * aqk;
                }
            }
        }
    }
    let mut ev: Vec<f64> = (0..n).map(|i| m[i * n + i]).collect();
    ev.sort_by(|a, b| b.total_cmp(a));
    ev
}

/// Second largest eigenvalue magnitude of a doubly stochastic matrix,
/// i.e. the largest after dropping the eigenvalue at 1.
pub fn oracle_beta(w: &[f64], n: usize) -> f64 {
    let ev = jacobi_eigenvalues(w, n);
    let one = ev.iter().enumerate().min_by(|a, b| (a.1 - 1.0).abs().total_cmp(&(b.1 - 1.0).abs())).unwrap().0;
    ev.iter().enumerate().filter(|(i, _)| *i != one).map(|(_, e)| e.abs()).fold(0.0, f64::max)
}

pub fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}
