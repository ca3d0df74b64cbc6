//! DIGing gradient tracking for ridge regression split by samples.
//!
//! Node `k` holds `F_k(w) = λ/(2K) ‖w‖² + ½ sum_{i in P_k} (a_i^T w - b_i)²`
//! and iterates
//!
//! ```text
//! w⁺ = W w - α y
//! y⁺ = W y + ∇F(w⁺) - ∇F(w)
//! ```
//!
//! starting from `w = 0`, `y_k = ∇F_k(0)`.

use std::sync::Arc;

use crate::data::{Partition, SparseColMatrix};
use crate::linalg;
use crate::topology::MixingMatrix;
use crate::{Error, Result};

/// Ridge objective `½‖Xw - b‖² + λ/2 ‖w‖²` with samples stored as the columns
/// of `A = X^T`, distributed by a sample partition.
#[derive(Debug, Clone)]
pub struct RidgeSplit {
    a: Arc<SparseColMatrix>,
    b: Vec<f64>,
    lambda: f64,
    blocks: Vec<Vec<usize>>,
}

impl RidgeSplit {
    pub fn new(a: Arc<SparseColMatrix>, b: Vec<f64>, lambda: f64, partition: &Partition) -> Result<Self> {
        if b.len() != a.n_cols() {
            return Err(Error::Dimension { expected: a.n_cols(), got: b.len() });
        }
        if partition.n_cols() != a.n_cols() {
            return Err(Error::Dimension { expected: a.n_cols(), got: partition.n_cols() });
        }
        if !(lambda > 0.0) {
            return Err(Error::config("ridge lambda must be positive"));
        }
        Ok(Self { a, b, lambda, blocks: partition.blocks().to_vec() })
    }

    pub fn n_nodes(&self) -> usize {
        self.blocks.len()
    }

    pub fn dim(&self) -> usize {
        self.a.n_rows()
    }

    pub fn local_grad(&self, k: usize, w: &[f64]) -> Vec<f64> {
        let mut g: Vec<f64> = w.iter().map(|wi| self.lambda / self.n_nodes() as f64 * wi).collect();
        for &i in &self.blocks[k] {
            let col = self.a.col(i);
            col.axpy(col.dot(w) - self.b[i], &mut g);
        }
        g
    }

    pub fn local_objective(&self, k: usize, w: &[f64]) -> f64 {
        let reg = self.lambda / (2.0 * self.n_nodes() as f64) * linalg::norm_sq(w);
        reg + self.blocks[k]
            .iter()
            .map(|&i| 0.5 * (self.a.col(i).dot(w) - self.b[i]).powi(2))
            .sum::<f64>()
    }

    pub fn objective(&self, w: &[f64]) -> f64 {
        let pred = self.a.tr_mul_vec(w);
        0.5 * linalg::dist_sq(&pred, &self.b) + 0.5 * self.lambda * linalg::norm_sq(w)
    }

    /// Exact minimizer from the normal equations `(A A^T + λI) w = A b`.
    pub fn solve_exact(&self) -> Option<Vec<f64>> {
        let m = self.dim();
        let mut gram = vec![0.0; m * m];
        for i in 0..self.a.n_cols() {
            let col = self.a.col(i);
            for (&r, &vr) in col.indices.iter().zip(col.values) {
                for (&c, &vc) in col.indices.iter().zip(col.values) {
                    gram[r * m + c] += vr * vc;
                }
            }
        }
        for j in 0..m {
            gram[j * m + j] += self.lambda;
        }
        let rhs = self.a.mul_vec(&self.b);
        linalg::cholesky_solve(&gram, m, &rhs)
    }
}

#[derive(Debug, Clone)]
pub struct DigingState {
    pub w: Vec<Vec<f64>>,
    pub y: Vec<Vec<f64>>,
    grads: Vec<Vec<f64>>,
    pub alpha: f64,
}

impl DigingState {
    pub fn new(split: &RidgeSplit, alpha: f64) -> Self {
        let zero = vec![0.0; split.dim()];
        let grads: Vec<Vec<f64>> = (0..split.n_nodes()).map(|k| split.local_grad(k, &zero)).collect();
        Self { w: vec![zero; split.n_nodes()], y: grads.clone(), grads, alpha }
    }

    pub fn mean_iterate(&self) -> Vec<f64> {
        mean(&self.w)
    }

    /// `‖mean(y) - mean(∇F_k(w_k))‖`
    pub fn tracking_error(&self) -> f64 {
        linalg::dist_sq(&mean(&self.y), &mean(&self.grads)).sqrt()
    }

    pub fn mean_tracker(&self) -> Vec<f64> {
        mean(&self.y)
    }

    pub fn mean_gradient(&self) -> Vec<f64> {
        mean(&self.grads)
    }
}

fn mean(vs: &[Vec<f64>]) -> Vec<f64> {
    let mut m = vec![0.0; vs[0].len()];
    for v in vs {
        linalg::axpy(1.0 / vs.len() as f64, v, &mut m);
    }
    m
}

pub fn diging_step(state: &mut DigingState, w: &MixingMatrix, split: &RidgeSplit) {
    let mut w_next = w.mix(&state.w);
    for (wk, yk) in w_next.iter_mut().zip(&state.y) {
        linalg::axpy(-state.alpha, yk, wk);
    }
    let grads_next: Vec<Vec<f64>> = (0..split.n_nodes()).map(|k| split.local_grad(k, &w_next[k])).collect();
    let mut y_next = w.mix(&state.y);
    for ((yk, gn), go) in y_next.iter_mut().zip(&grads_next).zip(&state.grads) {
        linalg::axpy(1.0, gn, yk);
        linalg::axpy(-1.0, go, yk);
    }
    state.w = w_next;
    state.y = y_next;
    state.grads = grads_next;
}

/// Objective of the mean iterate after every step (index 0 is the start).
#[derive(Debug, Clone, PartialEq)]
pub struct DigingTrace {
    pub alpha: f64,
    pub objective: Vec<f64>,
    pub final_mean: Vec<f64>,
}

impl DigingTrace {
    pub fn rounds_to(&self, f_star: f64, rel_target: f64) -> Option<usize> {
        self.objective.iter().position(|&f| (f - f_star) / f_star.abs() <= rel_target)
    }
}

pub fn run_diging(split: &RidgeSplit, w: &MixingMatrix, alpha: f64, rounds: usize) -> DigingTrace {
    let mut state = DigingState::new(split, alpha);
    let mut objective = Vec::with_capacity(rounds + 1);
    objective.push(split.objective(&state.mean_iterate()));
    for _ in 0..rounds {
        diging_step(&mut state, w, split);
        objective.push(split.objective(&state.mean_iterate()));
    }
    DigingTrace { alpha, objective, final_mean: state.mean_iterate() }
}

/// Runs each candidate for `budget` steps and returns the one with the
/// lowest final objective. A candidate is disqualified as soon as its
/// objective exceeds ten times the initial value or stops being finite.
pub fn grid_search_alpha(split: &RidgeSplit, w: &MixingMatrix, candidates: &[f64], budget: usize) -> Result<f64> {
    if candidates.is_empty() {
        return Err(Error::config("step-size grid is empty"));
    }
    let mut best: Option<(f64, f64)> = None;
    for &alpha in candidates {
        let mut state = DigingState::new(split, alpha);
        let initial = split.objective(&state.mean_iterate());
        let mut value = initial;
        let mut diverged = false;
        for _ in 0..budget {
            diging_step(&mut state, w, split);
            value = split.objective(&state.mean_iterate());
            if !value.is_finite() || value > 10.0 * initial {
                diverged = true;
                break;
            }
        }
        if diverged {
            continue;
        }
        if best.is_none_or(|(_, v)| value < v) {
            best = Some((alpha, value));
        }
    }
    best.map(|(a, _)| a).ok_or(Error::AllDiverged)
}
