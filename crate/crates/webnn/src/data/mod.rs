//! Dataset ingestion, deterministic splits and mini-batching.

mod mnist;
mod titanic;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::tensor::{Real, Tensor};

pub use mnist::{
    encode_idx_images, encode_idx_labels, load_mnist_idx, parse_mnist_idx, MnistSet, IDX_IMAGES_MAGIC, IDX_LABELS_MAGIC,
};
pub use titanic::{
    load_titanic_csv, parse_titanic_csv, preprocess_titanic, Embarked, FeatureStats, Sex, TitanicFeatures,
    TitanicRecord, TITANIC_FEATURES,
};

/// Features (first axis = samples) with one class label per sample.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset<T> {
    pub features: Tensor<T>,
    pub labels: Vec<usize>,
}

impl<T: Real> Dataset<T> {
    pub fn new(features: Tensor<T>, labels: Vec<usize>) -> Result<Self> {
        if features.shape().first() != Some(&labels.len()) {
            return Err(Error::shape("dataset", features.shape(), &[labels.len()]));
        }
        Ok(Self { features, labels })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        Ok(Self {
            features: self.features.select_rows(indices)?,
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
        })
    }

    /// Consecutive mini-batches, optionally after a seeded shuffle.
    pub fn batches(&self, batch_size: usize, shuffle_seed: Option<u64>) -> Result<Vec<Self>> {
        let order = match shuffle_seed {
            Some(seed) => batch_indices(self.len(), batch_size, Some(&mut ChaCha8Rng::seed_from_u64(seed))),
            None => batch_indices(self.len(), batch_size, None::<&mut ChaCha8Rng>),
        }?;
        order.iter().map(|idx| self.subset(idx)).collect()
    }
}

/// Sample indices of a train/validation split.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TrainValSplit {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
}

/// Seeded permutation of `0..n`; the first `n − ⌊n·val_fraction⌋` go to
/// train and the rest to validation.
pub fn split_train_val(n: usize, val_fraction: f64, seed: u64) -> Result<TrainValSplit> {
    if !(val_fraction > 0.0 && val_fraction < 1.0) {
        return Err(Error::Config(format!(
            "val fraction must be in (0, 1), got {val_fraction}"
        )));
    }
    let n_val = (n as f64 * val_fraction).floor() as usize;
    if n_val == 0 || n_val == n {
        return Err(Error::Validation(format!(
            "val fraction {val_fraction} of {n} samples leaves an empty split"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let val = order.split_off(n - n_val);
    Ok(TrainValSplit { train: order, val })
}

/// Partitions `0..n` into batches of `batch_size` (the last may be
/// shorter), shuffled first when `rng` is given.
pub fn batch_indices<R: rand::Rng>(n: usize, batch_size: usize, rng: Option<&mut R>) -> Result<Vec<Vec<usize>>> {
    if batch_size == 0 {
        return Err(Error::Config("batch size must be >= 1".into()));
    }
    let mut order: Vec<usize> = (0..n).collect();
    if let Some(rng) = rng {
        order.shuffle(rng);
    }
    Ok(order.chunks(batch_size).map(<[usize]>::to_vec).collect())
}

/// Train and validation datasets of one seeded split.
#[derive(Clone, Debug, PartialEq)]
pub struct Prepared<T> {
    pub train: Dataset<T>,
    pub val: Dataset<T>,
    pub split: TrainValSplit,
}

/// Splits labelled Titanic records and standardizes both sides with
/// statistics fitted on the training side only (or `stats` when given).
pub fn prepare_titanic<T: Real>(
    records: &[TitanicRecord],
    val_fraction: f64,
    seed: u64,
    stats: Option<&FeatureStats>,
) -> Result<(Prepared<T>, FeatureStats)> {
    if let Some(r) = records.iter().find(|r| r.survived.is_none()) {
        return Err(Error::Validation(format!(
            "passenger {} has no Survived label",
            r.passenger_id
        )));
    }
    let split = split_train_val(records.len(), val_fraction, seed)?;
    let pick = |idx: &[usize]| idx.iter().map(|&i| records[i].clone()).collect::<Vec<_>>();
    let train = preprocess_titanic::<T>(&pick(&split.train), stats)?;
    let stats = train.stats.clone();
    let val = preprocess_titanic::<T>(&pick(&split.val), Some(&stats))?;
    let dataset = |f: TitanicFeatures<T>| Dataset::new(f.features, f.labels.expect("labels checked above"));
    Ok((
        Prepared {
            train: dataset(train)?,
            val: dataset(val)?,
            split,
        },
        stats,
    ))
}

/// Keeps the first `limit` images (all when `None`) and splits them.
pub fn prepare_mnist<T: Real>(
    set: MnistSet<T>,
    limit: Option<usize>,
    val_fraction: f64,
    seed: u64,
) -> Result<Prepared<T>> {
    let all = Dataset::new(set.images, set.labels)?;
    let n = limit.map_or(all.len(), |l| l.min(all.len()));
    let split = split_train_val(n, val_fraction, seed)?;
    Ok(Prepared {
        train: all.subset(&split.train)?,
        val: all.subset(&split.val)?,
        split,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn split_sizes() {
        let s = split_train_val(891, 0.2, 42).unwrap();
        assert_eq!((s.train.len(), s.val.len()), (713, 178));
        assert_eq!(s, split_train_val(891, 0.2, 42).unwrap());
        assert_ne!(s, split_train_val(891, 0.2, 43).unwrap());

        let mut all: Vec<_> = s.train.iter().chain(&s.val).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..891).collect::<Vec<_>>());
    }

    #[test]
    fn split_rejects_empty_side() {
        assert!(split_train_val(3, 0.2, 0).is_err());
        assert!(split_train_val(10, 0.0, 0).is_err());
        assert!(split_train_val(10, 1.0, 0).is_err());
    }

    #[test]
    fn batch_sizes_and_order() {
        let b = batch_indices(10, 4, None::<&mut ChaCha8Rng>).unwrap();
        assert_eq!(b.iter().map(Vec::len).collect::<Vec<_>>(), vec![4, 4, 2]);
        assert_eq!(b.concat(), (0..10).collect::<Vec<_>>());

        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut shuffled = batch_indices(10, 4, Some(&mut rng)).unwrap().concat();
        shuffled.sort_unstable();
        assert_eq!(shuffled, (0..10).collect::<Vec<_>>());
        assert!(batch_indices(10, 0, None::<&mut ChaCha8Rng>).is_err());
    }

    #[test]
    fn dataset_batches_cover_once() {
        let x = Tensor::<f32>::from_f64([5, 1], &[0., 1., 2., 3., 4.]).unwrap();
        let d = Dataset::new(x, vec![0, 1, 0, 1, 0]).unwrap();
        let batches = d.batches(2, Some(9)).unwrap();
        let mut seen: Vec<f32> = batches.iter().flat_map(|b| b.features.data().to_vec()).collect();
        seen.sort_by(f32::total_cmp);
        assert_eq!(seen, vec![0., 1., 2., 3., 4.]);
        assert!(Dataset::new(Tensor::<f32>::zeros([2, 1]), vec![0]).is_err());
    }
}
