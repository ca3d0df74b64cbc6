use rand::seq::index;
use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::SparseColMatrix;
use crate::{rng, Error, Result};

/// Parameters of a synthetic sparse regression instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    /// Rows of `A` (length of `b`).
    pub rows: usize,
    /// Columns of `A` (length of the planted model).
    pub cols: usize,
    /// Probability that an entry of `A` is stored.
    pub density: f64,
    /// Standard deviation of the additive noise on `b`.
    pub noise: f64,
    /// Fraction of nonzero coordinates in the planted model.
    #[serde(default = "default_support")]
    pub support: f64,
    pub seed: u64,
}

fn default_support() -> f64 {
    0.1
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticRegression {
    pub matrix: SparseColMatrix,
    pub target: Vec<f64>,
    pub planted: Vec<f64>,
}

/// Sparse Gaussian design with a planted sparse model: `b = A x + noise * z`.
///
/// Stored entries are `N(0, 1 / (density * rows))`, so columns have unit norm
/// in expectation. Planted coefficients are `±(1 + |N(0,1)|)`.
pub fn synthesize_regression(spec: &SyntheticSpec) -> Result<SyntheticRegression> {
    let SyntheticSpec { rows, cols, density, noise, support, seed } = *spec;
    if rows == 0 || cols == 0 {
        return Err(Error::config("synthetic data needs at least one row and one column"));
    }
    if !(density > 0.0 && density <= 1.0) {
        return Err(Error::config(format!("density must lie in (0, 1], got {density}")));
    }
    if !(0.0..=1.0).contains(&support) {
        return Err(Error::config(format!("support fraction must lie in [0, 1], got {support}")));
    }

    let mut rng = rng::stream(seed, 1);
    let scale = 1.0 / (density * rows as f64).sqrt();
    let mut columns = Vec::with_capacity(cols);
    for _ in 0..cols {
        let mut col = Vec::new();
        for r in 0..rows {
            if density >= 1.0 || rng.random::<f64>() < density {
                let z: f64 = rng.sample(StandardNormal);
                col.push((r, z * scale));
            }
        }
        columns.push(col);
    }
    let matrix = SparseColMatrix::from_columns(rows, columns)?;

    let n_support = ((support * cols as f64).round() as usize).clamp(usize::from(support > 0.0), cols);
    let mut planted = vec![0.0; cols];
    for c in index::sample(&mut rng, cols, n_support) {
        let z: f64 = rng.sample(StandardNormal);
        let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
        planted[c] = sign * (1.0 + z.abs());
    }

    let mut target = matrix.mul_vec(&planted);
    if noise > 0.0 {
        for t in &mut target {
            let z: f64 = rng.sample(StandardNormal);
            *t += noise * z;
        }
    }
    Ok(SyntheticRegression { matrix, target, planted })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(density: f64, seed: u64) -> SyntheticSpec {
        SyntheticSpec { rows: 20, cols: 30, density, noise: 0.1, support: 0.2, seed }
    }

    #[test]
    fn full_density_stores_everything() {
        let s = synthesize_regression(&spec(1.0, 3)).unwrap();
        assert_eq!(s.matrix.nnz(), 20 * 30);
    }

    #[test]
    fn deterministic_per_seed() {
        let a = synthesize_regression(&spec(0.3, 5)).unwrap();
        let b = synthesize_regression(&spec(0.3, 5)).unwrap();
        assert_eq!(a, b);
        let c = synthesize_regression(&spec(0.3, 6)).unwrap();
        assert_ne!(a.target, c.target);
    }

    #[test]
    fn planted_support_size() {
        let s = synthesize_regression(&spec(0.5, 1)).unwrap();
        assert_eq!(s.planted.iter().filter(|x| **x != 0.0).count(), 6);
    }

    #[test]
    fn rejects_bad_density() {
        assert!(synthesize_regression(&spec(0.0, 1)).is_err());
        assert!(synthesize_regression(&spec(1.5, 1)).is_err());
    }
}
