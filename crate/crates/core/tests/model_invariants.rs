use eulernet::complex::{complex_power_oracle, euler_map, ComplexTensor};
use eulernet::model::{
    embed_record, forward, forward_batch, init_params, layer_forward, EulerLayerParams, Mode, ModelConfig,
};
use ndarray::{array, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random(rows: usize, cols: usize, lo: f64, hi: f64, rng: &mut ChaCha8Rng) -> Array2<f64> {
    Array2::from_shape_fn((rows, cols), |_| rng.random_range(lo..hi))
}

fn random_input(m: usize, d: usize, rng: &mut ChaCha8Rng) -> ComplexTensor {
    euler_map(&random(m, d, -3.0, 3.0, rng), &random(m, d, 0.5, 2.0, rng)).unwrap()
}

#[test]
fn explicit_branch_is_a_product_of_powers() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (m, n, d) = (4, 3, 5);
    let input = random_input(m, d, &mut rng);
    let orders = random(n, m, -1.5, 2.5, &mut rng);
    let layer = EulerLayerParams::from_orders(orders.clone(), d, false);
    let out = layer_forward(&layer, &input, Mode::ExplicitOnly).unwrap();
    for k in 0..n {
        let alpha: Vec<f64> = orders.row(k).to_vec();
        let oracle = complex_power_oracle(&input, &alpha).unwrap();
        for c in 0..d {
            let (a, b) = (out.get(k, c), oracle.get(0, c));
            assert!(
                (a - b).norm() <= 1e-9 * b.norm().max(1.0),
                "row {k} col {c}: {a} vs {b}"
            );
        }
    }
}

#[test]
fn full_layer_is_sum_of_branches() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let (m, n, d) = (3, 4, 2);
    let input = random_input(m, d, &mut rng);
    let mut layer = EulerLayerParams::from_orders(random(n, m, -1.0, 1.0, &mut rng), d, false);
    layer.bias_phase = random(n, d, -0.5, 0.5, &mut rng);
    layer.bias_log_mod = random(n, d, -0.5, 0.5, &mut rng);
    layer.implicit_weight = random(n * d, m * d, -1.0, 1.0, &mut rng);
    layer.implicit_bias = random(n, d, -0.5, 0.5, &mut rng);

    let full = layer_forward(&layer, &input, Mode::Full).unwrap();
    let ex = layer_forward(&layer, &input, Mode::ExplicitOnly).unwrap();
    let im = layer_forward(&layer, &input, Mode::ImplicitOnly).unwrap();
    for k in 0..n {
        for c in 0..d {
            let diff = full.get(k, c) - ex.get(k, c) - im.get(k, c);
            assert!(diff.norm() < 1e-12);
        }
    }
    // the implicit branch is non-negative in both parts
    assert!(im.real().iter().chain(im.imag().iter()).all(|&v| v >= 0.0));
}

#[test]
fn implicit_only_with_zero_weights_is_zero() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let input = random_input(2, 3, &mut rng);
    let layer = EulerLayerParams::from_orders(Array2::ones((2, 2)), 3, false);
    let out = layer_forward(&layer, &input, Mode::ImplicitOnly).unwrap();
    assert!(out.real().iter().chain(out.imag().iter()).all(|&v| v == 0.0));
}

#[test]
fn hand_evaluated_layer() {
    let input = ComplexTensor::new(array![[1.0], [0.0]], array![[0.0], [1.0]]).unwrap();
    let mut layer = EulerLayerParams::from_orders(array![[1.0, 1.0]], 1, false);
    layer.implicit_weight = array![[1.0, 1.0]];
    let out = layer_forward(&layer, &input, Mode::Full).unwrap();
    assert!((out.get(0, 0) - num_complex::Complex64::new(1.0, 2.0)).norm() < 1e-12);
}

#[test]
fn features_of_a_field_share_modulus() {
    let config = ModelConfig::new(2, 3, vec![2]);
    let mut p = init_params(&config, &[4, 4], 5).unwrap();
    p.modulus.mu = array![[0.5, 1.5, 2.0], [1.0, 1.0, 3.0]];
    for local in 0..4u32 {
        let e = embed_record(&p, &[local, 3 - local]).unwrap();
        let c = euler_map(&e, &p.modulus.mu).unwrap();
        for (f, row) in p.modulus.mu.rows().into_iter().enumerate() {
            for (k, &mu) in row.iter().enumerate() {
                assert!((c.get(f, k).norm() - mu).abs() < 1e-12);
            }
        }
    }
}

#[test]
fn batch_matches_single_records() {
    let config = ModelConfig::new(3, 4, vec![3, 2]).with_normalization(true);
    let p = init_params(&config, &[3, 3, 3], 9).unwrap();
    let records: Vec<u32> = vec![0, 1, 2, 2, 1, 0, 1, 1, 1];
    let batch = forward_batch(&p, &records).unwrap();
    for (i, rec) in records.chunks(3).enumerate() {
        let single = forward(&p, rec).unwrap();
        assert!((single.probabilities()[0] - batch.probabilities()[i]).abs() < 1e-12);
    }
}
