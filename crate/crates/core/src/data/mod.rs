//! Data representation: sparse columns, LIBSVM ingestion, synthetic
//! regression data, column partitions and the spectral constants of blocks.

mod libsvm;
mod partition;
mod sparse;
mod synth;

pub use libsvm::{parse_libsvm, write_libsvm, LibsvmData};
pub use partition::{partition_columns, Partition};
pub use sparse::{transpose_to_columns, Orientation, SparseCol, SparseColMatrix};
pub use synth::{synthesize_regression, SyntheticRegression, SyntheticSpec};

use serde::{Deserialize, Serialize};

use crate::linalg;

pub const SIGMA_MAX_ITERS: usize = 10_000;
pub const SIGMA_TOL: f64 = 1e-9;

/// Largest eigenvalue of `A_[k]^T A_[k]` for the columns in `block`.
///
/// Power iteration stops once the eigen-residual is below `tol` times the
/// current Rayleigh quotient, or after [`SIGMA_MAX_ITERS`] steps. The result
/// is never below the largest squared column norm of the block.
pub fn compute_sigma_k(matrix: &SparseColMatrix, block: &[usize], tol: f64) -> f64 {
    let max_col = block
        .iter()
        .map(|&i| matrix.col(i).norm_sq())
        .fold(0.0, f64::max);
    if max_col == 0.0 {
        return 0.0;
    }
    if block.len() == 1 {
        return max_col;
    }

    // Deterministic start with no special alignment to any eigenvector.
    let mut x: Vec<f64> = (0..block.len())
        .map(|j| 1.0 + ((j as f64 + 1.0) * 0.618_033_988_749_895).fract())
        .collect();
    let nrm = linalg::norm(&x);
    x.iter_mut().for_each(|e| *e /= nrm);

    let mut rho = 0.0;
    for _ in 0..SIGMA_MAX_ITERS {
        let ax = matrix.mul_block(block, &x);
        let y: Vec<f64> = block.iter().map(|&i| matrix.col(i).dot(&ax)).collect();
        rho = linalg::dot(&x, &y);
        let resid = y
            .iter()
            .zip(&x)
            .map(|(yi, xi)| (yi - rho * xi).powi(2))
            .sum::<f64>()
            .sqrt();
        let ny = linalg::norm(&y);
        if ny == 0.0 {
            break;
        }
        x = y.into_iter().map(|e| e / ny).collect();
        if resid <= tol * rho {
            break;
        }
    }
    rho.max(max_col)
}

/// Per-block spectral constants used by rates, certificates and `sigma'`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataConstants {
    pub sigma_k: Vec<f64>,
    pub block_sizes: Vec<usize>,
    pub sigma_max: f64,
    /// `sum_k sigma_k * n_k`
    pub sigma: f64,
    /// `sum_k n_k^2 * sigma_k`
    pub sum_nk2_sigma: f64,
}

impl DataConstants {
    pub fn compute(matrix: &SparseColMatrix, partition: &Partition) -> Self {
        let blocks: Vec<&[usize]> = partition.blocks().iter().map(Vec::as_slice).collect();
        Self::from_blocks(matrix, &blocks)
    }

    pub fn from_blocks(matrix: &SparseColMatrix, blocks: &[&[usize]]) -> Self {
        let sigma_k: Vec<f64> = blocks
            .iter()
            .map(|b| if b.is_empty() { 0.0 } else { compute_sigma_k(matrix, b, SIGMA_TOL) })
            .collect();
        let block_sizes: Vec<usize> = blocks.iter().map(|b| b.len()).collect();
        Self::from_parts(sigma_k, block_sizes)
    }

    pub fn from_parts(sigma_k: Vec<f64>, block_sizes: Vec<usize>) -> Self {
        let sigma_max = sigma_k.iter().copied().fold(0.0, f64::max);
        let sigma = sigma_k.iter().zip(&block_sizes).map(|(s, &n)| s * n as f64).sum();
        let sum_nk2_sigma = sigma_k
            .iter()
            .zip(&block_sizes)
            .map(|(s, &n)| s * (n * n) as f64)
            .sum();
        Self { sigma_k, block_sizes, sigma_max, sigma, sum_nk2_sigma }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rank_one_block() {
        let a = SparseColMatrix::from_dense_rows(&[vec![0.0], vec![2.0]]);
        assert_eq!(compute_sigma_k(&a, &[0], SIGMA_TOL), 4.0);
    }

    #[test]
    fn orthonormal_columns() {
        let a = SparseColMatrix::from_dense_rows(&[vec![1.0, 0.0], vec![0.0, 1.0], vec![0.0, 0.0]]);
        assert!((compute_sigma_k(&a, &[0, 1], SIGMA_TOL) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_block() {
        let a = SparseColMatrix::zeros(3, 2);
        assert_eq!(compute_sigma_k(&a, &[0, 1], SIGMA_TOL), 0.0);
    }

    #[test]
    fn constants_aggregate_exactly() {
        let c = DataConstants::from_parts(vec![2.0, 3.0], vec![4, 5]);
        assert_eq!(c.sigma_max, 3.0);
        assert_eq!(c.sigma, 2.0 * 4.0 + 3.0 * 5.0);
        assert_eq!(c.sum_nk2_sigma, 2.0 * 16.0 + 3.0 * 25.0);
    }
}
