//! Randomized coordinate descent on the node-local quadratic subproblem
//!
//! ```text
//! G_k(Δ) = <∇f(v'), A_[k]Δ> + σ'/(2τ) ‖A_[k]Δ‖² + sum_{i in P_k} g_i(x_i + Δ_i)
//! ```
//!
//! (the constant `f(v')/K` is dropped). The residual `r = A_[k]Δ` is kept
//! incrementally so each coordinate step costs one pass over a column.

use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::data::SparseColMatrix;
use crate::linalg;
use crate::problem::SeparablePart;
use crate::rng::Rng;

/// Coordinate updates between exact recomputations of the residual.
pub const RESIDUAL_REFRESH: usize = 1000;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sampling {
    /// Uniform coordinate choice per update.
    #[default]
    WithReplacement,
    /// A fresh random permutation for every pass.
    Permutation,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SolverBudget {
    /// Local data passes; a node performs `kappa * n_k` coordinate updates.
    pub kappa: usize,
    #[serde(default)]
    pub sampling: Sampling,
}

impl SolverBudget {
    pub fn new(kappa: usize) -> Self {
        assert!(kappa >= 1, "kappa must be at least 1");
        Self { kappa, sampling: Sampling::WithReplacement }
    }
}

/// Subproblem of one node for one round.
#[derive(Debug, Clone)]
pub struct SubproblemView<'a> {
    matrix: &'a SparseColMatrix,
    block: &'a [usize],
    separable: &'a SeparablePart,
    x: &'a [f64],
    anchor: Vec<f64>,
    coef: f64,
    col_sq: Vec<f64>,
    delta: Vec<f64>,
    residual: Vec<f64>,
    since_refresh: usize,
}

impl<'a> SubproblemView<'a> {
    /// `x_block[j]` is the current value of coordinate `block[j]`,
    /// `anchor` is `∇f(v')` and `coef` is `σ'/τ`.
    pub fn new(
        matrix: &'a SparseColMatrix,
        block: &'a [usize],
        separable: &'a SeparablePart,
        x_block: &'a [f64],
        anchor: Vec<f64>,
        coef: f64,
    ) -> Self {
        assert_eq!(block.len(), x_block.len());
        assert_eq!(anchor.len(), matrix.n_rows());
        let col_sq = block.iter().map(|&i| matrix.col(i).norm_sq()).collect();
        Self {
            matrix,
            block,
            separable,
            x: x_block,
            anchor,
            coef,
            col_sq,
            delta: vec![0.0; block.len()],
            residual: vec![0.0; matrix.n_rows()],
            since_refresh: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.block.len()
    }

    pub fn is_empty(&self) -> bool {
        self.block.is_empty()
    }

    pub fn delta(&self) -> &[f64] {
        &self.delta
    }

    /// Cached `A_[k]Δ`.
    pub fn residual(&self) -> &[f64] {
        &self.residual
    }

    pub fn into_parts(self) -> (Vec<f64>, Vec<f64>) {
        (self.delta, self.residual)
    }

    pub fn recompute_residual(&self) -> Vec<f64> {
        self.matrix.mul_block(self.block, &self.delta)
    }

    pub fn refresh_residual(&mut self) {
        self.residual = self.recompute_residual();
        self.since_refresh = 0;
    }

    /// Replaces `Δ` and resynchronizes the residual.
    pub fn set_delta(&mut self, delta: &[f64]) {
        assert_eq!(delta.len(), self.delta.len());
        self.delta.copy_from_slice(delta);
        self.refresh_residual();
    }

    /// `G_k` at the current `Δ`.
    pub fn objective(&self) -> f64 {
        self.value(&self.delta, &self.residual)
    }

    /// `G_k` at an arbitrary `Δ`.
    pub fn objective_at(&self, delta: &[f64]) -> f64 {
        let r = self.matrix.mul_block(self.block, delta);
        self.value(delta, &r)
    }

    fn value(&self, delta: &[f64], r: &[f64]) -> f64 {
        let sep: f64 = self
            .block
            .iter()
            .zip(self.x.iter().zip(delta))
            .map(|(&i, (x, d))| self.separable.eval(i, x + d))
            .sum();
        linalg::dot(&self.anchor, r) + 0.5 * self.coef * linalg::norm_sq(r) + sep
    }

    /// Exactly minimizes `G_k` along local coordinate `j` and returns the new
    /// `Δ_j`.
    pub fn coordinate_update(&mut self, j: usize) -> f64 {
        let i = self.block[j];
        let col = self.matrix.col(i);
        let a = self.coef * self.col_sq[j];
        let c = col.dot(&self.anchor) + self.coef * col.dot(&self.residual);
        let u0 = self.x[j] + self.delta[j];
        let u = self.separable.minimize_coordinate(i, u0, c, a);
        let step = u - u0;
        if step != 0.0 {
            self.delta[j] += step;
            col.axpy(step, &mut self.residual);
        }
        self.since_refresh += 1;
        if self.since_refresh >= RESIDUAL_REFRESH {
            self.refresh_residual();
        }
        self.delta[j]
    }
}

/// Performs `kappa * n_k` coordinate updates drawn from `rng`.
pub fn solve_subproblem(view: &mut SubproblemView<'_>, budget: &SolverBudget, rng: &mut Rng) {
    let n = view.len();
    if n == 0 {
        return;
    }
    match budget.sampling {
        Sampling::WithReplacement => {
            for _ in 0..budget.kappa * n {
                let j = rng.random_range(0..n);
                view.coordinate_update(j);
            }
        }
        Sampling::Permutation => {
            let mut order: Vec<usize> = (0..n).collect();
            for _ in 0..budget.kappa {
                order.shuffle(rng);
                for &j in &order {
                    view.coordinate_update(j);
                }
            }
        }
    }
}

/// Cyclic coordinate descent until a full pass changes no coordinate by more
/// than `tol` or `max_passes` is reached. Diagnostic use only.
pub fn solve_to_tolerance(view: &mut SubproblemView<'_>, max_passes: usize, tol: f64) {
    for _ in 0..max_passes {
        let mut biggest: f64 = 0.0;
        for j in 0..view.len() {
            let before = view.delta[j];
            let after = view.coordinate_update(j);
            biggest = biggest.max((after - before).abs());
        }
        if biggest <= tol {
            break;
        }
    }
    view.refresh_residual();
}

/// `(G(Δ) - G(Δ*)) / (G(0) - G(Δ*))`, clipped to `[0, 1]`; `0` when the zero
/// step is already optimal.
pub fn measure_theta(view: &SubproblemView<'_>, delta: &[f64], exact: &[f64]) -> f64 {
    let zero = vec![0.0; view.len()];
    let g0 = view.objective_at(&zero);
    let gs = view.objective_at(exact);
    let gd = view.objective_at(delta);
    let denom = g0 - gs;
    if !(denom > 0.0) {
        return 0.0;
    }
    ((gd - gs) / denom).clamp(0.0, 1.0)
}
