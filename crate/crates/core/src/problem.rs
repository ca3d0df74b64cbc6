//! Composite objectives `F_A(x) = f(Ax) + sum_i g_i(x_i)`.
//!
//! `f` is always a quadratic `‖v - b‖² / (2τ)` (possibly with `b = 0`), so
//! `∇f` is `1/τ`-Lipschitz and `f*(w) = τ/2 ‖w‖² + <w, b>`. The separable part
//! is either an L1 penalty restricted to an `L`-ball (so `g_i*` is
//! `L`-Lipschitz and duality gaps stay finite) or a strongly convex quadratic.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::data::SparseColMatrix;
use crate::linalg;
use crate::{Error, Result};

/// Largest Lipschitzing radius used when none is given.
pub const MAX_DEFAULT_RADIUS: f64 = 1e6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SmoothKind {
    /// `½‖v - b‖²`
    LeastSquares,
    /// `‖v - b‖² / (2τ)`
    ScaledQuadratic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmoothPart {
    kind: SmoothKind,
    tau: f64,
    offset: Vec<f64>,
}

impl SmoothPart {
    pub fn least_squares(b: Vec<f64>) -> Self {
        Self { kind: SmoothKind::LeastSquares, tau: 1.0, offset: b }
    }

    pub fn scaled_quadratic(tau: f64, offset: Vec<f64>) -> Self {
        assert!(tau > 0.0, "tau must be positive");
        Self { kind: SmoothKind::ScaledQuadratic, tau, offset }
    }

    pub fn kind(&self) -> SmoothKind {
        self.kind
    }

    /// Inverse of the gradient's Lipschitz constant.
    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn dim(&self) -> usize {
        self.offset.len()
    }

    pub fn offset(&self) -> &[f64] {
        &self.offset
    }

    fn check(&self, v: &[f64]) -> Result<()> {
        if v.len() != self.dim() {
            return Err(Error::Dimension { expected: self.dim(), got: v.len() });
        }
        Ok(())
    }

    pub fn value(&self, v: &[f64]) -> Result<f64> {
        self.check(v)?;
        Ok(self.value_unchecked(v))
    }

    pub fn grad(&self, v: &[f64]) -> Result<Vec<f64>> {
        self.check(v)?;
        let mut out = vec![0.0; v.len()];
        self.grad_into(v, &mut out);
        Ok(out)
    }

    pub fn conj(&self, w: &[f64]) -> Result<f64> {
        self.check(w)?;
        Ok(self.conj_unchecked(w))
    }

    pub(crate) fn value_unchecked(&self, v: &[f64]) -> f64 {
        linalg::dist_sq(v, &self.offset) / (2.0 * self.tau)
    }

    pub(crate) fn grad_into(&self, v: &[f64], out: &mut [f64]) {
        for ((o, vi), bi) in out.iter_mut().zip(v).zip(&self.offset) {
            *o = (vi - bi) / self.tau;
        }
    }

    pub(crate) fn conj_unchecked(&self, w: &[f64]) -> f64 {
        0.5 * self.tau * linalg::norm_sq(w) + linalg::dot(w, &self.offset)
    }
}

/// The separable regularizer, identical in form for every coordinate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SeparablePart {
    /// `g_i(u) = λ|u|` for `|u| ≤ L`, `+∞` otherwise.
    L1Bounded { lambda: f64, radius: f64 },
    /// `g_i(u) = ½u² - c_i u`; an empty `linear` means `c = 0`.
    Quadratic { linear: Vec<f64> },
}

impl SeparablePart {
    fn linear(&self, i: usize) -> f64 {
        match self {
            SeparablePart::Quadratic { linear } => linear.get(i).copied().unwrap_or(0.0),
            SeparablePart::L1Bounded { .. } => 0.0,
        }
    }

    pub fn eval(&self, i: usize, u: f64) -> f64 {
        match *self {
            SeparablePart::L1Bounded { lambda, radius } => {
                if u.abs() <= radius {
                    lambda * u.abs()
                } else {
                    f64::INFINITY
                }
            }
            SeparablePart::Quadratic { .. } => 0.5 * u * u - self.linear(i) * u,
        }
    }

    pub fn conj(&self, i: usize, s: f64) -> f64 {
        match *self {
            SeparablePart::L1Bounded { lambda, radius } => radius * (s.abs() - lambda).max(0.0),
            SeparablePart::Quadratic { .. } => {
                let t = s + self.linear(i);
                0.5 * t * t
            }
        }
    }

    /// `argmin_u g_i(u) + (u - z)² / (2 step)`
    pub fn prox(&self, i: usize, z: f64, step: f64) -> f64 {
        match *self {
            SeparablePart::L1Bounded { lambda, radius } => {
                soft_threshold(z, step * lambda).clamp(-radius, radius)
            }
            SeparablePart::Quadratic { .. } => (z + step * self.linear(i)) / (1.0 + step),
        }
    }

    /// Minimizer of `c (u - u0) + a/2 (u - u0)² + g_i(u)` for `a ≥ 0`.
    pub fn minimize_coordinate(&self, i: usize, u0: f64, c: f64, a: f64) -> f64 {
        if a > 0.0 {
            return self.prox(i, u0 - c / a, 1.0 / a);
        }
        // Degenerate direction (empty column): only the linear term remains.
        match *self {
            SeparablePart::L1Bounded { lambda, radius } => {
                if c.abs() <= lambda {
                    0.0
                } else {
                    -c.signum() * radius
                }
            }
            SeparablePart::Quadratic { .. } => self.linear(i) - c,
        }
    }

    /// Strong convexity modulus shared by all `g_i`.
    pub fn strong_convexity(&self) -> f64 {
        match self {
            SeparablePart::L1Bounded { .. } => 0.0,
            SeparablePart::Quadratic { .. } => 1.0,
        }
    }

    /// Support radius `L` when `g_i` has bounded support.
    pub fn radius(&self) -> Option<f64> {
        match *self {
            SeparablePart::L1Bounded { radius, .. } => Some(radius),
            SeparablePart::Quadratic { .. } => None,
        }
    }
}

pub fn soft_threshold(z: f64, t: f64) -> f64 {
    if z > t {
        z - t
    } else if z < -t {
        z + t
    } else {
        0.0
    }
}

/// Which side of the training problem is laid out as `min f(Ax) + g(x)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Formulation {
    /// Columns of `A` are features and `x` is the model.
    Primal,
    /// Columns of `A` are samples; the model is recovered as `∇f(Ax)`.
    Dual,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemSpec {
    pub smooth: SmoothPart,
    pub separable: SeparablePart,
    pub mu_g: f64,
    pub formulation: Formulation,
}

/// A problem instance: the objective pair together with the matrix `A` whose
/// columns are distributed over nodes.
#[derive(Debug, Clone)]
pub struct Problem {
    pub spec: ProblemSpec,
    pub matrix: Arc<SparseColMatrix>,
}

impl Problem {
    pub fn new(spec: ProblemSpec, matrix: Arc<SparseColMatrix>) -> Result<Self> {
        if spec.smooth.dim() != matrix.n_rows() {
            return Err(Error::Dimension { expected: matrix.n_rows(), got: spec.smooth.dim() });
        }
        if let SeparablePart::Quadratic { linear } = &spec.separable {
            if !linear.is_empty() && linear.len() != matrix.n_cols() {
                return Err(Error::Dimension { expected: matrix.n_cols(), got: linear.len() });
            }
        }
        Ok(Self { spec, matrix })
    }

    pub fn n_cols(&self) -> usize {
        self.matrix.n_cols()
    }

    pub fn dim(&self) -> usize {
        self.matrix.n_rows()
    }

    pub fn smooth(&self) -> &SmoothPart {
        &self.spec.smooth
    }

    pub fn separable(&self) -> &SeparablePart {
        &self.spec.separable
    }

    pub fn tau(&self) -> f64 {
        self.spec.smooth.tau()
    }

    pub fn g_total(&self, x: &[f64]) -> f64 {
        x.iter().enumerate().map(|(i, &u)| self.spec.separable.eval(i, u)).sum()
    }

    /// `F_A(x) = f(Ax) + g(x)`
    pub fn objective(&self, x: &[f64]) -> f64 {
        let v = self.matrix.mul_vec(x);
        self.spec.smooth.value_unchecked(&v) + self.g_total(x)
    }

    /// `F_B(w) = f*(w) + sum_i g_i*(-A_i^T w)`
    pub fn dual_objective(&self, w: &[f64]) -> f64 {
        let sep = &self.spec.separable;
        let tail: f64 = (0..self.n_cols())
            .map(|i| sep.conj(i, -self.matrix.col(i).dot(w)))
            .sum();
        self.spec.smooth.conj_unchecked(w) + tail
    }

    /// Model weights of the underlying training problem.
    pub fn model(&self, x: &[f64]) -> Vec<f64> {
        match self.spec.formulation {
            Formulation::Primal => x.to_vec(),
            Formulation::Dual => {
                let v = self.matrix.mul_vec(x);
                let mut w = vec![0.0; v.len()];
                self.spec.smooth.grad_into(&v, &mut w);
                w
            }
        }
    }

    /// Predictions of the training model on the training samples.
    pub fn predictions(&self, x: &[f64]) -> Vec<f64> {
        match self.spec.formulation {
            Formulation::Primal => self.matrix.mul_vec(x),
            Formulation::Dual => self.matrix.tr_mul_vec(&self.model(x)),
        }
    }
}

/// Default Lipschitzing radius for Lasso: `‖b‖² / (2λ)`, capped at
/// [`MAX_DEFAULT_RADIUS`]. Since `F(x*) ≤ F(0) = ½‖b‖²`, this bounds
/// `λ‖x*‖₁` and therefore `‖x*‖_∞`.
pub fn default_lasso_radius(b: &[f64], lambda: f64) -> f64 {
    let r = linalg::norm_sq(b) / (2.0 * lambda);
    if r > 0.0 {
        r.min(MAX_DEFAULT_RADIUS)
    } else {
        1.0
    }
}

/// Lasso `½‖Ax - b‖² + λ‖x‖₁` with columns of `A` as features.
pub fn make_lasso(
    matrix: Arc<SparseColMatrix>,
    b: Vec<f64>,
    lambda: f64,
    radius: Option<f64>,
) -> Result<Problem> {
    if !(lambda > 0.0) {
        return Err(Error::config(format!("lasso lambda must be positive, got {lambda}")));
    }
    let radius = radius.unwrap_or_else(|| default_lasso_radius(&b, lambda));
    if !(radius > 0.0) {
        return Err(Error::config(format!("support radius must be positive, got {radius}")));
    }
    let spec = ProblemSpec {
        smooth: SmoothPart::least_squares(b),
        separable: SeparablePart::L1Bounded { lambda, radius },
        mu_g: 0.0,
        formulation: Formulation::Primal,
    };
    Problem::new(spec, matrix)
}

/// Ridge regression `½‖Xw - b‖² + λ/2 ‖w‖²` for a sample-major `X`.
///
/// - [`Formulation::Primal`]: `A = X`, `f(v) = ‖v - b‖² / (2λ)`, `g_i(u) = ½u²`.
///   This is the ridge objective divided by `λ`.
/// - [`Formulation::Dual`]: `A = X^T`, `f(v) = ‖v‖² / (2λ)`,
///   `g_i(u) = ½u² - b_i u`; the model is `w = ∇f(Ax) = Ax / λ`.
///
/// Both have `τ = λ` and `μ_g = 1`.
pub fn make_ridge(
    samples: &SparseColMatrix,
    b: Vec<f64>,
    lambda: f64,
    formulation: Formulation,
) -> Result<Problem> {
    if !(lambda > 0.0) {
        return Err(Error::config(format!("ridge lambda must be positive, got {lambda}")));
    }
    if b.len() != samples.n_rows() {
        return Err(Error::Dimension { expected: samples.n_rows(), got: b.len() });
    }
    let (matrix, smooth, linear) = match formulation {
        Formulation::Primal => (
            samples.clone(),
            SmoothPart::scaled_quadratic(lambda, b),
            Vec::new(),
        ),
        Formulation::Dual => {
            let a = samples.transpose();
            let d = a.n_rows();
            (a, SmoothPart::scaled_quadratic(lambda, vec![0.0; d]), b)
        }
    };
    let spec = ProblemSpec {
        smooth,
        separable: SeparablePart::Quadratic { linear },
        mu_g: 1.0,
        formulation,
    };
    Problem::new(spec, Arc::new(matrix))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn least_squares_at_target() {
        let f = SmoothPart::least_squares(vec![1.0, -2.0]);
        assert_eq!(f.value(&[1.0, -2.0]).unwrap(), 0.0);
        assert_eq!(f.grad(&[1.0, -2.0]).unwrap(), vec![0.0, 0.0]);
        assert_eq!(f.conj(&[0.0, 0.0]).unwrap(), 0.0);
    }

    #[test]
    fn least_squares_unit_offset() {
        let f = SmoothPart::least_squares(vec![1.0, -2.0]);
        assert_eq!(f.value(&[2.0, -2.0]).unwrap(), 0.5);
        assert_eq!(f.grad(&[2.0, -2.0]).unwrap(), vec![1.0, 0.0]);
    }

    #[test]
    fn dimension_mismatch() {
        let f = SmoothPart::least_squares(vec![0.0; 3]);
        assert!(matches!(f.value(&[0.0; 2]), Err(Error::Dimension { expected: 3, got: 2 })));
        assert!(f.grad(&[0.0; 4]).is_err());
        assert!(f.conj(&[0.0; 1]).is_err());
    }

    #[test]
    fn l1_conjugate_inside_ball() {
        let g = SeparablePart::L1Bounded { lambda: 0.1, radius: 10.0 };
        assert_eq!(g.conj(0, 0.05), 0.0);
    }

    #[test]
    fn l1_conjugate_outside_ball() {
        // sup_{|u| ≤ 10} 0.3 u - 0.1 |u| is attained at u = 10.
        let g = SeparablePart::L1Bounded { lambda: 0.1, radius: 10.0 };
        assert!((g.conj(0, 0.3) - 2.0).abs() < 1e-15);
        assert!((g.conj(0, -0.3) - 2.0).abs() < 1e-15);
    }

    #[test]
    fn l1_outside_support_is_infinite() {
        let g = SeparablePart::L1Bounded { lambda: 1.0, radius: 2.0 };
        assert_eq!(g.eval(0, 2.0), 2.0);
        assert!(g.eval(0, 2.5).is_infinite());
    }

    #[test]
    fn quadratic_vertex() {
        let g = SeparablePart::Quadratic { linear: vec![1.0] };
        assert_eq!(g.eval(0, 1.0), -0.5);
        assert!(g.eval(0, 0.9) > -0.5 && g.eval(0, 1.1) > -0.5);
        assert_eq!(g.minimize_coordinate(0, 5.0, 0.0, 0.0), 1.0);
    }

    #[test]
    fn l1_prox_thresholds_then_clamps() {
        let g = SeparablePart::L1Bounded { lambda: 1.0, radius: 3.0 };
        assert_eq!(g.prox(0, 0.5, 1.0), 0.0);
        assert_eq!(g.prox(0, 2.5, 1.0), 1.5);
        assert_eq!(g.prox(0, 10.0, 1.0), 3.0);
        assert_eq!(g.prox(0, -10.0, 2.0), -3.0);
    }

    #[test]
    fn degenerate_coordinate() {
        let g = SeparablePart::L1Bounded { lambda: 1.0, radius: 3.0 };
        assert_eq!(g.minimize_coordinate(0, 2.0, 0.0, 0.0), 0.0);
        assert_eq!(g.minimize_coordinate(0, 2.0, 2.0, 0.0), -3.0);
    }

    #[test]
    fn lasso_at_zero() {
        let a = Arc::new(SparseColMatrix::from_dense_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]]));
        let p = make_lasso(a, vec![3.0, 4.0], 0.5, None).unwrap();
        assert_eq!(p.objective(&[0.0, 0.0]), 12.5);
        assert_eq!(p.spec.mu_g, 0.0);
        assert_eq!(p.separable().radius(), Some(25.0));
    }

    #[test]
    fn scalar_lasso_optimum() {
        // min ½(2x - 4)² + |x|: stationarity 2(2x - 4) + 1 = 0 gives x = 7/4.
        let a = Arc::new(SparseColMatrix::from_dense_rows(&[vec![2.0]]));
        let p = make_lasso(a, vec![4.0], 1.0, None).unwrap();
        let xs = 1.75;
        let fs = p.objective(&[xs]);
        for dx in [-1e-3, 1e-3] {
            assert!(p.objective(&[xs + dx]) > fs);
        }
    }

    #[test]
    fn ridge_strong_convexity_flags() {
        let x = SparseColMatrix::from_dense_rows(&[vec![1.0, 2.0], vec![3.0, 4.0], vec![5.0, 6.0]]);
        for form in [Formulation::Primal, Formulation::Dual] {
            let p = make_ridge(&x, vec![1.0, 0.0, -1.0], 0.1, form).unwrap();
            assert_eq!(p.spec.mu_g, 1.0);
            assert_eq!(p.spec.separable.strong_convexity(), 1.0);
            assert_eq!(p.tau(), 0.1);
        }
        assert!(make_ridge(&x, vec![1.0, 0.0, -1.0], 0.0, Formulation::Dual).is_err());
    }
}
