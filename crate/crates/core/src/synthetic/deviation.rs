use serde::{Deserialize, Serialize};

use super::pattern::SyntheticPattern;
use crate::error::{Error, Result};
use crate::model::ModelParams;

pub const HISTOGRAM_WIDTH: f64 = 0.5;

/// One row of the first layer's order matrix and its total order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderVector {
    pub exponents: Vec<f64>,
    pub total: f64,
}

/// Rows of the first Euler layer's order matrix.
pub fn extract_orders(params: &ModelParams) -> Vec<OrderVector> {
    params.layers[0]
        .orders
        .rows()
        .into_iter()
        .map(|r| OrderVector {
            exponents: r.to_vec(),
            total: r.sum(),
        })
        .collect()
}

/// Bin `[lower, upper)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistogramBin {
    pub lower: f64,
    pub upper: f64,
    pub count: usize,
}

/// Counts over contiguous bins of `width` aligned to multiples of `width`,
/// from the bin holding the smallest value to the one holding the largest.
pub fn order_histogram(totals: &[f64], width: f64) -> Vec<HistogramBin> {
    let finite: Vec<f64> = totals.iter().copied().filter(|t| t.is_finite()).collect();
    if finite.is_empty() {
        return Vec::new();
    }
    let bin = |t: f64| (t / width).floor() as i64;
    let lo = finite.iter().map(|&t| bin(t)).min().unwrap();
    let hi = finite.iter().map(|&t| bin(t)).max().unwrap();
    let mut bins: Vec<HistogramBin> = (lo..=hi)
        .map(|k| HistogramBin {
            lower: k as f64 * width,
            upper: (k + 1) as f64 * width,
            count: 0,
        })
        .collect();
    for t in finite {
        bins[(bin(t) - lo) as usize].count += 1;
    }
    bins
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviationReport {
    /// Learned vector matched to each pattern term.
    pub matched: Vec<Vec<f64>>,
    /// Index of that vector among the learned ones.
    pub matched_index: Vec<usize>,
    /// Sum over fields of absolute exponent differences, per term.
    pub deviations: Vec<f64>,
    pub mean_deviation: f64,
}

/// Matches every pattern term to a distinct learned vector so that the total
/// L1 distance is minimal, and reports the per-term distances.
///
/// Exact: dynamic programming over subsets of terms, scanning the learned
/// vectors in order.
pub fn fitting_deviation(learned: &[Vec<f64>], pattern: &SyntheticPattern) -> Result<DeviationReport> {
    let terms = pattern.terms();
    let t = terms.len();
    if learned.len() < t {
        return Err(Error::InvalidArgument(format!(
            "{} learned vectors cannot cover {t} pattern terms",
            learned.len()
        )));
    }
    let m = pattern.num_fields();
    if let Some(v) = learned.iter().find(|v| v.len() != m) {
        return Err(Error::shape("learned order vector", m, v.len()));
    }
    let cost: Vec<Vec<f64>> = learned
        .iter()
        .map(|v| {
            terms
                .iter()
                .map(|term| v.iter().zip(&term.exponents).map(|(a, b)| (a - b).abs()).sum())
                .collect()
        })
        .collect();

    let full = 1usize << t;
    // best[i][mask]: cheapest way to cover `mask` with the first i vectors;
    // take[i][mask]: term given to vector i-1 on that path, if any.
    let mut best = vec![vec![f64::INFINITY; full]; learned.len() + 1];
    let mut take = vec![vec![None; full]; learned.len() + 1];
    best[0][0] = 0.0;
    for i in 0..learned.len() {
        for mask in 0..full {
            let here = best[i][mask];
            if here.is_infinite() {
                continue;
            }
            if here < best[i + 1][mask] {
                best[i + 1][mask] = here;
                take[i + 1][mask] = None;
            }
            for k in (0..t).filter(|k| mask & (1 << k) == 0) {
                let next = mask | (1 << k);
                let c = here + cost[i][k];
                if c < best[i + 1][next] {
                    best[i + 1][next] = c;
                    take[i + 1][next] = Some(k);
                }
            }
        }
    }

    let mut matched_index = vec![0; t];
    let mut mask = full - 1;
    for i in (1..=learned.len()).rev() {
        if let Some(k) = take[i][mask] {
            matched_index[k] = i - 1;
            mask &= !(1 << k);
        }
    }
    let deviations: Vec<f64> = (0..t).map(|k| cost[matched_index[k]][k]).collect();
    Ok(DeviationReport {
        matched: matched_index.iter().map(|&i| learned[i].clone()).collect(),
        mean_deviation: deviations.iter().sum::<f64>() / t as f64,
        matched_index,
        deviations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{init_params, ModelConfig};
    use crate::synthetic::PatternTerm;
    use ndarray::array;

    fn r3() -> SyntheticPattern {
        SyntheticPattern::builtin("R3").unwrap()
    }

    /// Minimum over all injective term-to-vector maps.
    fn brute_force(learned: &[Vec<f64>], pattern: &SyntheticPattern) -> f64 {
        fn go(k: usize, used: &mut Vec<bool>, learned: &[Vec<f64>], p: &SyntheticPattern) -> f64 {
            if k == p.terms().len() {
                return 0.0;
            }
            let mut best = f64::INFINITY;
            for i in 0..learned.len() {
                if used[i] {
                    continue;
                }
                used[i] = true;
                let c: f64 = learned[i]
                    .iter()
                    .zip(&p.terms()[k].exponents)
                    .map(|(a, b)| (a - b).abs())
                    .sum();
                best = best.min(c + go(k + 1, used, learned, p));
                used[i] = false;
            }
            best
        }
        go(0, &mut vec![false; learned.len()], learned, pattern) / pattern.terms().len() as f64
    }

    fn r3_fit() -> Vec<Vec<f64>> {
        vec![
            vec![1.12, 0.0, 1.90, 0.0, 1.48, 0.0, 0.0],
            vec![0.0, 0.36, 0.0, 0.37, 0.0, 0.38, 0.0],
            vec![0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.67],
        ]
    }

    #[test]
    fn r3_reference_fit() {
        let r = fitting_deviation(&r3_fit(), &r3()).unwrap();
        let want = [0.70, 0.39, 0.33];
        for (d, w) in r.deviations.iter().zip(want) {
            assert!((d - w).abs() < 1e-12, "{:?}", r.deviations);
        }
        assert!((r.mean_deviation - 1.42 / 3.0).abs() < 1e-12);
        assert!((r.mean_deviation - 0.473).abs() < 1e-3);
        assert_eq!(r.matched_index, vec![0, 1, 2]);
    }

    #[test]
    fn exact_rows_and_permutation() {
        let exact: Vec<Vec<f64>> = r3().terms().iter().map(|t| t.exponents.clone()).collect();
        assert_eq!(fitting_deviation(&exact, &r3()).unwrap().mean_deviation, 0.0);
        let mut shuffled = r3_fit();
        shuffled.reverse();
        shuffled.push(vec![0.1; 7]);
        let a = fitting_deviation(&r3_fit(), &r3()).unwrap();
        let b = fitting_deviation(&shuffled, &r3()).unwrap();
        assert_eq!(a.deviations, b.deviations);
        assert_eq!(a.matched, b.matched);
    }

    #[test]
    fn matches_brute_force() {
        let pattern = SyntheticPattern::new(
            "three",
            vec![
                PatternTerm::new(0.3, vec![1.0, 0.0, 2.0]),
                PatternTerm::new(0.3, vec![0.5, 0.5, 0.0]),
                PatternTerm::new(0.3, vec![0.0, 3.0, 0.0]),
            ],
        )
        .unwrap();
        let mut state = 17u64;
        let mut next = || {
            state = state
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            (state >> 11) as f64 / (1u64 << 53) as f64 * 4.0 - 1.0
        };
        for n in 3..7 {
            let learned: Vec<Vec<f64>> = (0..n).map(|_| (0..3).map(|_| next()).collect()).collect();
            let fast = fitting_deviation(&learned, &pattern).unwrap();
            assert!((fast.mean_deviation - brute_force(&learned, &pattern)).abs() < 1e-12);
            let mut idx = fast.matched_index.clone();
            idx.sort_unstable();
            idx.dedup();
            assert_eq!(idx.len(), 3);
        }
    }

    #[test]
    fn too_few_vectors() {
        assert!(fitting_deviation(&r3_fit()[..2], &r3()).is_err());
        assert!(fitting_deviation(&vec![vec![0.0; 6]; 3], &r3()).is_err());
    }

    #[test]
    fn orders_and_histogram() {
        let config = ModelConfig::new(7, 4, vec![7]);
        let mut p = init_params(&config, &[2; 7], 0).unwrap();
        for o in extract_orders(&p) {
            assert!((o.total - 1.0).abs() < 0.5, "{o:?}");
        }
        p.layers[0]
            .orders
            .row_mut(0)
            .assign(&array![1.12, 0.0, 1.90, 0.0, 1.48, 0.0, 0.0]);
        assert!((extract_orders(&p)[0].total - 4.50).abs() < 1e-12);

        let h = order_histogram(&[0.9, 1.1, 1.2, 2.6, 4.5], HISTOGRAM_WIDTH);
        let edges: Vec<(f64, f64, usize)> = h.iter().map(|b| (b.lower, b.upper, b.count)).collect();
        assert_eq!(
            edges,
            vec![
                (0.5, 1.0, 1),
                (1.0, 1.5, 2),
                (1.5, 2.0, 0),
                (2.0, 2.5, 0),
                (2.5, 3.0, 1),
                (3.0, 3.5, 0),
                (3.5, 4.0, 0),
                (4.0, 4.5, 0),
                (4.5, 5.0, 1),
            ]
        );
        assert!(order_histogram(&[], 0.5).is_empty());
        assert_eq!(order_histogram(&[-0.2], 0.5)[0].lower, -0.5);
    }
}
