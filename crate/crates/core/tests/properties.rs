use eulernet::complex::{complex_power_oracle, from_polar, polar_mix, to_polar, ComplexTensor, PolarTensor};
use eulernet::model::{init_params, predict, ModelConfig};
use eulernet::synthetic::{fitting_deviation, SyntheticPattern};
use eulernet::tape::sigmoid;
use eulernet::train::auc;
use ndarray::Array2;
use proptest::prelude::*;

fn tensor(max_rows: usize, max_cols: usize, lo: f64, hi: f64) -> impl Strategy<Value = Array2<f64>> {
    (1..=max_rows, 1..=max_cols).prop_flat_map(move |(r, c)| {
        proptest::collection::vec(lo..hi, r * c).prop_map(move |v| Array2::from_shape_vec((r, c), v).unwrap())
    })
}

proptest! {
    #[test]
    fn polar_round_trip(re in tensor(6, 8, -10.0, 10.0), seed in any::<u64>()) {
        let im = re.mapv(|v| (v * 7.3 + seed as f64 % 5.0).sin() * 10.0);
        let c = ComplexTensor::new(re.clone(), im.clone()).unwrap();
        let back = from_polar(&to_polar(&c));
        for (a, b) in back.real().iter().zip(&re).chain(back.imag().iter().zip(&im)) {
            prop_assert!((a - b).abs() <= 1e-9 * b.abs().max(1.0));
        }
    }

    #[test]
    fn mix_matches_oracle(
        (m, d) in (1usize..=5, 1usize..=8),
        raw in proptest::collection::vec((0.5f64..2.0, -3.1f64..3.1, -2.0f64..2.0), 40),
    ) {
        let modulus = Array2::from_shape_fn((m, d), |(j, k)| raw[j * 8 + k].0);
        let phase = Array2::from_shape_fn((m, d), |(j, k)| raw[j * 8 + k].1);
        let alpha: Vec<f64> = (0..m).map(|j| raw[j].2).collect();
        let c = from_polar(&PolarTensor::new(modulus, phase).unwrap());
        let orders = Array2::from_shape_vec((1, m), alpha.clone()).unwrap();
        let zeros = Array2::zeros((1, d));
        let mixed = from_polar(&polar_mix(&to_polar(&c), &orders, &zeros, &zeros).unwrap());
        let oracle = complex_power_oracle(&c, &alpha).unwrap();
        for k in 0..d {
            let (a, b) = (mixed.get(0, k), oracle.get(0, k));
            prop_assert!((a - b).norm() / b.norm() < 1e-8, "{a} vs {b}");
        }
    }

    #[test]
    fn sigmoid_open_interval(x in -1e6f64..1e6) {
        let y = sigmoid(x);
        prop_assert!(y > 0.0 && y < 1.0);
    }

    #[test]
    fn auc_is_rank_based(scores in proptest::collection::vec(-5.0f64..5.0, 4..40), flip in any::<u64>()) {
        let labels: Vec<u8> = (0..scores.len()).map(|i| ((flip >> (i % 64)) & 1) as u8).collect();
        prop_assume!(labels.contains(&0) && labels.contains(&1));
        let a = auc(&scores, &labels).unwrap();
        prop_assert!((0.0..=1.0).contains(&a));
        let squashed: Vec<f64> = scores.iter().map(|&s| sigmoid(s)).collect();
        prop_assert!((auc(&squashed, &labels).unwrap() - a).abs() < 1e-12);
        let negated: Vec<f64> = scores.iter().map(|s| -s).collect();
        prop_assert!((auc(&negated, &labels).unwrap() - (1.0 - a)).abs() < 1e-12);
    }

    #[test]
    fn deviation_ignores_vector_order(
        learned in proptest::collection::vec(proptest::collection::vec(-1.0f64..3.0, 7), 3..8),
        rot in 0usize..8,
    ) {
        let r3 = SyntheticPattern::builtin("R3").unwrap();
        let mut rotated = learned.clone();
        rotated.rotate_left(rot % learned.len());
        let a = fitting_deviation(&learned, &r3).unwrap();
        let b = fitting_deviation(&rotated, &r3).unwrap();
        prop_assert!((a.mean_deviation - b.mean_deviation).abs() < 1e-12);
        prop_assert!(a.mean_deviation >= 0.0);
        let mean = a.deviations.iter().sum::<f64>() / a.deviations.len() as f64;
        prop_assert!((a.mean_deviation - mean).abs() < 1e-12);
    }

    #[test]
    fn predictions_are_probabilities(seed in any::<u64>(), norm in any::<bool>()) {
        let config = ModelConfig::new(3, 4, vec![3, 2]).with_normalization(norm);
        let mut p = init_params(&config, &[5, 5, 5], seed).unwrap();
        p.head.w.mapv_inplace(|v| v * 1e4);
        let records: Vec<u32> = (0..30).map(|i| (i * 7 % 5) as u32).collect();
        for y in predict(&p, &records).unwrap() {
            prop_assert!(y > 0.0 && y < 1.0);
        }
    }
}
