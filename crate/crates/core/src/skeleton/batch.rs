//! Mixed two-domain batching: every batch draws half its examples from
//! each dataset, without replacement within an epoch.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use super::dataset::Dataset;

#[derive(Debug, Error)]
pub enum BatchError {
    #[error("batch_size must be even and positive, got {0}")]
    OddBatchSize(usize),
    #[error("both datasets must be nonempty")]
    EmptyDataset,
    #[error("batch_size {batch_size} too large for datasets of sizes {a} and {b}")]
    BatchTooLarge { batch_size: usize, a: usize, b: usize },
}

/// Index batch: `a` indexes the first dataset, `b` the second; each holds
/// batch_size/2 entries.
#[derive(Debug, Clone, PartialEq)]
pub struct MixedBatch {
    pub a: Vec<usize>,
    pub b: Vec<usize>,
}

/// Deterministic mixed-batch plan over two datasets.
///
/// Epoch length is floor(2*min(|A|,|B|)/batch_size); each epoch reshuffles
/// both datasets from the seed and walks them without replacement.
#[derive(Debug, Clone)]
pub struct MixedBatcher {
    len_a: usize,
    len_b: usize,
    batch_size: usize,
    seed: u64,
}

impl MixedBatcher {
    pub fn new(
        ds_a: &Dataset,
        ds_b: &Dataset,
        batch_size: usize,
        seed: u64,
    ) -> Result<Self, BatchError> {
        if batch_size == 0 || batch_size % 2 != 0 {
            return Err(BatchError::OddBatchSize(batch_size));
        }
        if ds_a.is_empty() || ds_b.is_empty() {
            return Err(BatchError::EmptyDataset);
        }
        let half = batch_size / 2;
        if half > ds_a.len() || half > ds_b.len() {
            return Err(BatchError::BatchTooLarge {
                batch_size,
                a: ds_a.len(),
                b: ds_b.len(),
            });
        }
        Ok(Self {
            len_a: ds_a.len(),
            len_b: ds_b.len(),
            batch_size,
            seed,
        })
    }

    pub fn batches_per_epoch(&self) -> usize {
        2 * self.len_a.min(self.len_b) / self.batch_size
    }

    /// The batches of one epoch; a pure function of (seed, epoch).
    pub fn epoch(&self, epoch: usize) -> Vec<MixedBatch> {
        let mut perm_a: Vec<usize> = (0..self.len_a).collect();
        let mut perm_b: Vec<usize> = (0..self.len_b).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(epoch_seed(self.seed, epoch));
        perm_a.shuffle(&mut rng);
        perm_b.shuffle(&mut rng);
        let half = self.batch_size / 2;
        (0..self.batches_per_epoch())
            .map(|k| MixedBatch {
                a: perm_a[k * half..(k + 1) * half].to_vec(),
                b: perm_b[k * half..(k + 1) * half].to_vec(),
            })
            .collect()
    }
}

fn epoch_seed(seed: u64, epoch: usize) -> u64 {
    // splitmix64 of (seed, epoch) so epochs are independently addressable
    let mut x = seed ^ (epoch as u64).wrapping_mul(0x9e3779b97f4a7c15);
    x = x.wrapping_add(0x9e3779b97f4a7c15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}
