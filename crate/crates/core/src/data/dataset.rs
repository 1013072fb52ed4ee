use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::table::{DatasetSchema, RawTable};
use super::vocab::Vocabulary;
use crate::error::{Error, Result};

/// Records as per-field vocabulary indices with binary labels.
///
/// `row_ids[i]` is the position of record `i` in the source table, so splits
/// can be traced back to raw rows.
#[derive(Debug, Clone)]
pub struct EncodedDataset {
    pub schema: DatasetSchema,
    pub vocab: Arc<Vocabulary>,
    /// Flat `[N × m]`.
    pub records: Vec<u32>,
    pub labels: Vec<u8>,
    pub row_ids: Vec<usize>,
}

impl EncodedDataset {
    pub fn num_fields(&self) -> usize {
        self.schema.num_fields()
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn record(&self, i: usize) -> &[u32] {
        let m = self.num_fields();
        &self.records[i * m..(i + 1) * m]
    }

    pub fn label_mean(&self) -> f64 {
        if self.is_empty() {
            return 0.0;
        }
        self.labels.iter().map(|&l| l as f64).sum::<f64>() / self.len() as f64
    }

    /// Records at `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> EncodedDataset {
        let mut records = Vec::with_capacity(indices.len() * self.num_fields());
        for &i in indices {
            records.extend_from_slice(self.record(i));
        }
        EncodedDataset {
            schema: self.schema.clone(),
            vocab: Arc::clone(&self.vocab),
            records,
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            row_ids: indices.iter().map(|&i| self.row_ids[i]).collect(),
        }
    }

    /// Checks every index against the vocabulary and every label is binary.
    pub fn validate(&self) -> Result<()> {
        let sizes = self.vocab.sizes();
        for (i, &idx) in self.records.iter().enumerate() {
            let field = i % self.num_fields();
            if idx as usize >= sizes[field] {
                return Err(Error::OutOfVocabulary {
                    field: self.schema.fields[field].clone(),
                    index: idx as usize,
                    size: sizes[field],
                });
            }
        }
        if self.labels.iter().any(|&l| l > 1) {
            return Err(Error::InvalidArgument("labels must be 0 or 1".into()));
        }
        Ok(())
    }
}

pub fn encode(table: &RawTable, vocab: Arc<Vocabulary>) -> Result<EncodedDataset> {
    if vocab.fields.len() != table.schema.num_fields() {
        return Err(Error::shape(
            "vocabulary fields",
            table.schema.num_fields(),
            vocab.fields.len(),
        ));
    }
    let mut records = Vec::with_capacity(table.len() * table.schema.num_fields());
    for row in &table.rows {
        for (j, token) in row.iter().enumerate() {
            records.push(vocab.encode(j, token));
        }
    }
    Ok(EncodedDataset {
        schema: table.schema.clone(),
        vocab,
        records,
        labels: table.labels.clone(),
        row_ids: (0..table.len()).collect(),
    })
}

/// Seeded permutation followed by contiguous slicing into train, validation
/// and test parts.
pub fn split(
    dataset: &EncodedDataset,
    ratios: [f64; 3],
    seed: u64,
) -> Result<(EncodedDataset, EncodedDataset, EncodedDataset)> {
    if ratios.iter().any(|&r| !(r > 0.0)) || (ratios.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidArgument(format!(
            "split ratios must be positive and sum to 1, got {ratios:?}"
        )));
    }
    let n = dataset.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_train = (ratios[0] * n as f64).round() as usize;
    let n_valid = ((ratios[1] * n as f64).round() as usize).min(n - n_train.min(n));
    let n_train = n_train.min(n);
    let parts = [
        &order[..n_train],
        &order[n_train..n_train + n_valid],
        &order[n_train + n_valid..],
    ];
    for (name, part) in ["train", "validation", "test"].iter().zip(&parts) {
        if part.is_empty() {
            return Err(Error::InvalidArgument(format!(
                "{name} split is empty ({n} records, ratios {ratios:?})"
            )));
        }
    }
    Ok((
        dataset.subset(parts[0]),
        dataset.subset(parts[1]),
        dataset.subset(parts[2]),
    ))
}

/// One minibatch: flat `[B × m]` records and `B` labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    pub records: Vec<u32>,
    pub labels: Vec<u8>,
}

impl Batch {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

pub struct Batches<'a> {
    dataset: &'a EncodedDataset,
    order: Vec<usize>,
    batch_size: usize,
    pos: usize,
}

impl Iterator for Batches<'_> {
    type Item = Batch;

    fn next(&mut self) -> Option<Batch> {
        if self.pos >= self.order.len() {
            return None;
        }
        let end = (self.pos + self.batch_size).min(self.order.len());
        let idx = &self.order[self.pos..end];
        self.pos = end;
        let m = self.dataset.num_fields();
        let mut records = Vec::with_capacity(idx.len() * m);
        for &i in idx {
            records.extend_from_slice(self.dataset.record(i));
        }
        Some(Batch {
            records,
            labels: idx.iter().map(|&i| self.dataset.labels[i]).collect(),
        })
    }
}

/// Iterates the dataset in batches of `batch_size` (the last may be short),
/// in dataset order or in a seeded permutation.
pub fn batches(dataset: &EncodedDataset, batch_size: usize, shuffle_seed: Option<u64>) -> Result<Batches<'_>> {
    if batch_size == 0 {
        return Err(Error::InvalidArgument("batch_size must be at least 1".into()));
    }
    let mut order: Vec<usize> = (0..dataset.len()).collect();
    if let Some(seed) = shuffle_seed {
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    }
    Ok(Batches {
        dataset,
        order,
        batch_size,
        pos: 0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::build_vocab;

    fn dataset(n: usize) -> EncodedDataset {
        let schema = DatasetSchema::new(vec!["a".into(), "b".into()], "y").unwrap();
        let table = RawTable {
            schema,
            rows: (0..n).map(|i| vec![format!("a{}", i % 3), format!("b{i}")]).collect(),
            labels: (0..n).map(|i| (i % 2) as u8).collect(),
        };
        let vocab = Arc::new(build_vocab(&table, 1));
        encode(&table, vocab).unwrap()
    }

    #[test]
    fn split_sizes_and_partition() {
        let d = dataset(100);
        let (tr, va, te) = split(&d, [0.8, 0.1, 0.1], 4).unwrap();
        assert_eq!((tr.len(), va.len(), te.len()), (80, 10, 10));
        let mut all: Vec<usize> = tr
            .row_ids
            .iter()
            .chain(&va.row_ids)
            .chain(&te.row_ids)
            .copied()
            .collect();
        all.sort_unstable();
        assert_eq!(all, (0..100).collect::<Vec<_>>());
        for part in [&tr, &va, &te] {
            for (i, &row) in part.row_ids.iter().enumerate() {
                assert_eq!(part.record(i), d.record(row));
                assert_eq!(part.labels[i], d.labels[row]);
            }
        }
        let (tr2, _, _) = split(&d, [0.8, 0.1, 0.1], 4).unwrap();
        assert_eq!(tr.row_ids, tr2.row_ids);
    }

    #[test]
    fn split_errors() {
        let d = dataset(100);
        assert!(split(&d, [0.8, 0.1, 0.2], 0).is_err());
        assert!(split(&d, [1.0, 0.0, 0.0], 0).is_err());
        assert!(split(&dataset(3), [0.98, 0.01, 0.01], 0).is_err());
    }

    #[test]
    fn batch_sizes() {
        let d = dataset(10);
        let sizes: Vec<usize> = batches(&d, 4, None).unwrap().map(|b| b.len()).collect();
        assert_eq!(sizes, vec![4, 4, 2]);
        assert!(batches(&d, 0, None).is_err());
    }

    #[test]
    fn unshuffled_preserves_order() {
        let d = dataset(7);
        let flat: Vec<u32> = batches(&d, 3, None).unwrap().flat_map(|b| b.records).collect();
        assert_eq!(flat, d.records);
    }

    #[test]
    fn shuffled_is_reproducible() {
        let d = dataset(50);
        let a: Vec<Batch> = batches(&d, 8, Some(3)).unwrap().collect();
        let b: Vec<Batch> = batches(&d, 8, Some(3)).unwrap().collect();
        assert_eq!(a, b);
        let c: Vec<Batch> = batches(&d, 8, Some(4)).unwrap().collect();
        assert_ne!(a, c);
    }

    #[test]
    fn validate_catches_bad_index() {
        let mut d = dataset(5);
        d.validate().unwrap();
        d.records[1] = 999;
        assert!(matches!(d.validate(), Err(Error::OutOfVocabulary { .. })));
    }
}
