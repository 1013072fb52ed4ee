use serde::{Deserialize, Serialize};

use super::loss::log_loss;
use crate::error::{Error, Result};

/// Area under the ROC curve from the Mann-Whitney rank statistic; tied
/// scores share their average rank (a tie counts one half).
pub fn auc(scores: &[f64], labels: &[u8]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::shape("auc inputs", scores.len(), labels.len()));
    }
    let positives = labels.iter().filter(|&&l| l == 1).count();
    let negatives = labels.len() - positives;
    if positives == 0 || negatives == 0 {
        return Err(Error::SingleClass { positives, negatives });
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));

    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        // ranks i+1 ..= j+1 share their mean
        let mean_rank = (i + j + 2) as f64 / 2.0;
        let tied_pos = order[i..=j].iter().filter(|&&k| labels[k] == 1).count();
        rank_sum += mean_rank * tied_pos as f64;
        i = j + 1;
    }
    let (p, n) = (positives as f64, negatives as f64);
    Ok((rank_sum - p * (p + 1.0) / 2.0) / (p * n))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub split: String,
    pub epoch: usize,
    pub auc: f64,
    pub logloss: f64,
}

impl MetricsReport {
    pub fn evaluate(split: &str, epoch: usize, preds: &[f64], labels: &[u8]) -> Result<Self> {
        Ok(Self {
            split: split.to_string(),
            epoch,
            auc: auc(preds, labels)?,
            logloss: log_loss(preds, labels),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pair_count_auc(scores: &[f64], labels: &[u8]) -> f64 {
        let mut num = 0.0;
        let mut den = 0.0;
        for (i, &si) in scores.iter().enumerate() {
            for (j, &sj) in scores.iter().enumerate() {
                if labels[i] == 1 && labels[j] == 0 {
                    den += 1.0;
                    if si > sj {
                        num += 1.0;
                    } else if si == sj {
                        num += 0.5;
                    }
                }
            }
        }
        num / den
    }

    #[test]
    fn examples() {
        assert_eq!(auc(&[0.1, 0.2, 0.8, 0.9], &[0, 0, 1, 1]).unwrap(), 1.0);
        assert_eq!(auc(&[0.3; 6], &[0, 1, 0, 1, 1, 0]).unwrap(), 0.5);
        assert_eq!(auc(&[0.1, 0.4, 0.35, 0.8], &[0, 0, 1, 1]).unwrap(), 0.75);
    }

    #[test]
    fn single_class_is_error() {
        assert!(matches!(
            auc(&[0.1, 0.2], &[1, 1]),
            Err(Error::SingleClass {
                positives: 2,
                negatives: 0
            })
        ));
    }

    #[test]
    fn matches_pair_counting_with_ties() {
        let scores = [0.2, 0.5, 0.5, 0.1, 0.9, 0.5, 0.2, 0.7];
        let labels = [0, 1, 0, 0, 1, 1, 1, 0];
        let fast = auc(&scores, &labels).unwrap();
        assert!((fast - pair_count_auc(&scores, &labels)).abs() < 1e-15);
    }
}
