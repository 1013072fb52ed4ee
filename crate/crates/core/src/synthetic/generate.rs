use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::pattern::{ground_truth_prob, SyntheticPattern};
use crate::data::{DatasetSchema, RawTable};
use crate::error::{Error, Result};
use crate::train::binary_entropy;

pub const FEATURES_PER_FIELD: usize = 1000;
/// Feature probabilities are drawn uniformly from `[PROB_LOW, PROB_HIGH)`.
pub const PROB_LOW: f64 = 0.02;
pub const PROB_HIGH: f64 = 0.98;
/// Records per independently seeded chunk.
const CHUNK: usize = 1 << 16;

/// Per-field, per-feature probabilities `[m × FEATURES_PER_FIELD]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureProbTable {
    pub seed: u64,
    pub probs: Array2<f64>,
}

impl FeatureProbTable {
    pub fn num_fields(&self) -> usize {
        self.probs.nrows()
    }

    pub fn validate(&self) -> Result<()> {
        if self.probs.iter().any(|&p| !(p > 0.0 && p < 1.0)) {
            return Err(Error::InvalidArgument(
                "feature probabilities must lie strictly inside (0, 1)".into(),
            ));
        }
        Ok(())
    }

    /// Feature probabilities of one record given its feature ids.
    pub fn lookup(&self, features: &[u32]) -> Result<Vec<f64>> {
        if features.len() != self.num_fields() {
            return Err(Error::shape("feature record", self.num_fields(), features.len()));
        }
        features
            .iter()
            .enumerate()
            .map(|(f, &id)| {
                self.probs
                    .get((f, id as usize))
                    .copied()
                    .ok_or_else(|| Error::OutOfVocabulary {
                        field: format!("f{}", f + 1),
                        index: id as usize,
                        size: self.probs.ncols(),
                    })
            })
            .collect()
    }
}

/// Generated records with their planted click probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticDataset {
    pub pattern: SyntheticPattern,
    pub table: FeatureProbTable,
    /// Feature ids, `[n × m]` row-major.
    pub features: Vec<u32>,
    pub labels: Vec<u8>,
    pub true_probs: Vec<f64>,
}

impl SyntheticDataset {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn schema(&self) -> DatasetSchema {
        let m = self.table.num_fields();
        DatasetSchema {
            fields: (1..=m).map(|f| format!("f{f}")).collect(),
            label: "label".into(),
        }
    }

    /// Tabular form with feature ids as tokens.
    pub fn to_table(&self) -> RawTable {
        let m = self.table.num_fields();
        RawTable {
            schema: self.schema(),
            rows: self
                .features
                .chunks(m)
                .map(|r| r.iter().map(|id| id.to_string()).collect())
                .collect(),
            labels: self.labels.clone(),
        }
    }
}

fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Draws the probability table, then `n_records` records with one uniform
/// feature per field and a Bernoulli label of the planted probability.
///
/// Chunk `c` of records uses its own stream of `seed`, so chunks can be
/// produced in any order with the same result.
pub fn generate(pattern: &SyntheticPattern, n_records: usize, seed: u64) -> Result<SyntheticDataset> {
    if n_records == 0 {
        return Err(Error::InvalidArgument("n_records must be at least 1".into()));
    }
    let m = pattern.num_fields();
    let mut table_rng = stream_rng(seed, 0);
    let probs = Array2::from_shape_simple_fn((m, FEATURES_PER_FIELD), || table_rng.random_range(PROB_LOW..PROB_HIGH));
    let table = FeatureProbTable { seed, probs };

    let mut features = Vec::with_capacity(n_records * m);
    let mut labels = Vec::with_capacity(n_records);
    let mut true_probs = Vec::with_capacity(n_records);
    let mut p = vec![0.0; m];
    for (c, start) in (0..n_records).step_by(CHUNK).enumerate() {
        let mut rng = stream_rng(seed, c as u64 + 1);
        for _ in start..(start + CHUNK).min(n_records) {
            for (f, pf) in p.iter_mut().enumerate() {
                let id = rng.random_range(0..FEATURES_PER_FIELD);
                features.push(id as u32);
                *pf = table.probs[[f, id]];
            }
            let q = ground_truth_prob(pattern, &p)?;
            labels.push((rng.random::<f64>() < q) as u8);
            true_probs.push(q);
        }
    }
    Ok(SyntheticDataset {
        pattern: pattern.clone(),
        table,
        features,
        labels,
        true_probs,
    })
}

/// Expected LogLoss of the true probabilities: mean binary entropy, clamped
/// like the training loss.
pub fn bayes_logloss(true_probs: &[f64]) -> f64 {
    true_probs.iter().map(|&q| binary_entropy(q)).sum::<f64>() / true_probs.len().max(1) as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    fn builtin_r1() -> SyntheticPattern {
        SyntheticPattern::builtin("R1").unwrap()
    }

    #[test]
    fn deterministic_and_structural() {
        let r1 = builtin_r1();
        let a = generate(&r1, 3000, 5).unwrap();
        let b = generate(&builtin_r1(), 3000, 5).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.features, generate(&builtin_r1(), 3000, 6).unwrap().features);
        assert_eq!(a.features.len(), 3000 * 7);
        assert!(a.features.iter().all(|&id| id < 1000));
        assert!(a.table.probs.iter().all(|&p| (PROB_LOW..PROB_HIGH).contains(&p)));
        a.table.validate().unwrap();
        for (i, rec) in a.features.chunks(7).enumerate() {
            let q = ground_truth_prob(&r1, &a.table.lookup(rec).unwrap()).unwrap();
            assert_eq!(q, a.true_probs[i]);
        }
    }

    #[test]
    fn prefix_stable_across_chunk_boundary() {
        let small = generate(&builtin_r1(), 10, 2).unwrap();
        let big = generate(&builtin_r1(), CHUNK + 10, 2).unwrap();
        assert_eq!(small.features[..], big.features[..70]);
        assert_eq!(small.labels[..], big.labels[..10]);
    }

    #[test]
    fn label_mean_tracks_true_probabilities() {
        let n = 100_000;
        let r1 = builtin_r1();
        let d = generate(&r1, n, 11).unwrap();
        let mean_q = d.true_probs.iter().sum::<f64>() / n as f64;
        let mean_y = d.labels.iter().map(|&y| y as f64).sum::<f64>() / n as f64;
        let se = (mean_q * (1.0 - mean_q) / n as f64).sqrt();
        assert!((mean_y - mean_q).abs() < 3.0 * se, "{mean_y} vs {mean_q}");

        // independent Monte-Carlo estimate of E[R1] under the same table
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let mc: f64 = (0..n)
            .map(|_| {
                let p: Vec<f64> = (0..7).map(|f| d.table.probs[[f, rng.random_range(0..1000)]]).collect();
                ground_truth_prob(&r1, &p).unwrap()
            })
            .sum::<f64>()
            / n as f64;
        let se_mc = (mean_y * (1.0 - mean_y) / n as f64).sqrt() + (mc * (1.0 - mc) / n as f64).sqrt();
        assert!((mean_y - mc).abs() < 3.0 * se_mc, "{mean_y} vs {mc}");
    }

    #[test]
    fn bayes_examples() {
        assert!((bayes_logloss(&[0.5, 0.5]) - std::f64::consts::LN_2).abs() < 1e-15);
        assert!(bayes_logloss(&[0.0, 1.0]) < 2e-6);
        let want = -(0.2f64 * 0.2f64.ln() + 0.8 * 0.8f64.ln());
        assert!((bayes_logloss(&[0.2, 0.8]) - want).abs() < 1e-15);
        assert!((want - 0.500402).abs() < 1e-6);
    }

    #[test]
    fn zero_records_rejected() {
        assert!(generate(&builtin_r1(), 0, 0).is_err());
    }

    #[test]
    fn table_tokens_are_feature_ids() {
        let d = generate(&builtin_r1(), 5, 1).unwrap();
        let t = d.to_table();
        assert_eq!(t.schema.fields[6], "f7");
        assert_eq!(t.rows[2][3], d.features[2 * 7 + 3].to_string());
    }
}
