use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::{rng, Error, Result};

/// Assignment of the `n` columns of `A` to `K` nodes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Partition {
    assignments: Vec<usize>,
    blocks: Vec<Vec<usize>>,
}

impl Partition {
    /// Splits `0..n` into `k` contiguous blocks without shuffling. The first
    /// `n % k` blocks receive one extra column.
    pub fn contiguous(n: usize, k: usize) -> Result<Self> {
        let order: Vec<usize> = (0..n).collect();
        Self::split(&order, n, k)
    }

    /// Builds a partition from explicit blocks, which must be disjoint and
    /// cover `0..n`.
    pub fn from_blocks(n: usize, blocks: Vec<Vec<usize>>) -> Result<Self> {
        let mut assignments = vec![usize::MAX; n];
        for (k, block) in blocks.iter().enumerate() {
            for &c in block {
                if c >= n {
                    return Err(Error::config(format!("column {c} out of range for n = {n}")));
                }
                if assignments[c] != usize::MAX {
                    return Err(Error::ColumnCollision(c));
                }
                assignments[c] = k;
            }
        }
        if let Some(c) = assignments.iter().position(|&a| a == usize::MAX) {
            return Err(Error::config(format!("column {c} is not assigned to any node")));
        }
        Ok(Self { assignments, blocks })
    }

    fn split(order: &[usize], n: usize, k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::config("number of nodes must be at least 1"));
        }
        if n < k {
            return Err(Error::config(format!("cannot split {n} columns over {k} nodes")));
        }
        let (base, extra) = (n / k, n % k);
        let mut blocks = Vec::with_capacity(k);
        let mut start = 0;
        for node in 0..k {
            let size = base + usize::from(node < extra);
            let mut block = order[start..start + size].to_vec();
            block.sort_unstable();
            blocks.push(block);
            start += size;
        }
        Self::from_blocks(n, blocks)
    }

    pub fn n_nodes(&self) -> usize {
        self.blocks.len()
    }

    pub fn n_cols(&self) -> usize {
        self.assignments.len()
    }

    pub fn blocks(&self) -> &[Vec<usize>] {
        &self.blocks
    }

    pub fn block(&self, k: usize) -> &[usize] {
        &self.blocks[k]
    }

    pub fn owner(&self, col: usize) -> usize {
        self.assignments[col]
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.blocks.iter().map(Vec::len).collect()
    }
}

/// Shuffles the columns once with the seeded stream, then splits them into
/// `k` balanced contiguous blocks (larger blocks go to lower node ids).
pub fn partition_columns(n: usize, k: usize, seed: u64) -> Result<Partition> {
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = rng::stream(seed, 0);
    order.shuffle(&mut rng);
    Partition::split(&order, n, k)
}
