//! End-to-end comparison of tape gradients against central differences.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::loss::bce_l2_loss;
use super::trainer::loss_and_grads;
use crate::error::Result;
use crate::model::{init_params, predict, ModelConfig, ModelParams};

/// Central-difference step.
pub const FD_STEP: f64 = 1e-6;
/// Gradients smaller than this are compared in absolute terms.
pub const REL_FLOOR: f64 = 1e-3;
/// L2 weight used by the check so the penalty path is exercised.
const CHECK_GAMMA: f64 = 1e-3;
const CHECK_RECORDS: usize = 4;
const CHECK_VOCAB: usize = 3;

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    /// Parameter and flat index of the worst entry.
    pub worst: (String, usize),
    pub analytic: f64,
    pub numeric: f64,
    pub entries_checked: usize,
}

pub fn rel_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_FLOOR)
}

/// Parameters with every group moved off its initialization so that no
/// gradient is structurally zero.
pub fn random_params(config: &ModelConfig, seed: u64) -> Result<ModelParams> {
    let mut p = init_params(config, &vec![CHECK_VOCAB; config.num_fields], seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    let mut normal = |std: f64, a: &mut ndarray::Array2<f64>| {
        let dist = Normal::new(0.0, std).unwrap();
        a.mapv_inplace(|v| v + dist.sample(&mut rng));
    };
    normal(0.6, &mut p.embedding.vectors);
    normal(0.2, &mut p.modulus.mu);
    for layer in &mut p.layers {
        normal(0.3, &mut layer.orders);
        normal(0.2, &mut layer.bias_phase);
        normal(0.2, &mut layer.bias_log_mod);
        normal(0.2, &mut layer.implicit_bias);
        if let Some(norm) = &mut layer.norm {
            normal(0.2, &mut norm.gain);
            normal(0.2, &mut norm.shift);
        }
    }
    normal(0.3, &mut p.head.w);
    Ok(p)
}

/// Builds random parameters and a random batch from `seed`, then returns the
/// worst relative error between tape and finite-difference gradients over
/// every parameter entry.
pub fn grad_check(config: &ModelConfig, seed: u64) -> Result<GradCheckReport> {
    let params = random_params(config, seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(1));
    let records: Vec<u32> = (0..CHECK_RECORDS * config.num_fields)
        .map(|_| rng.random_range(0..CHECK_VOCAB as u32))
        .collect();
    let mut labels: Vec<u8> = (0..CHECK_RECORDS).map(|_| rng.random_range(0..2)).collect();
    labels[0] = 1;
    labels[1] = 0;

    let (_, grads) = loss_and_grads(&params, &records, &labels, CHECK_GAMMA)?;
    let objective =
        |p: &ModelParams| -> Result<f64> { Ok(bce_l2_loss(&predict(p, &records)?, &labels, p, CHECK_GAMMA)) };

    let names: Vec<String> = params.tensors().into_iter().map(|(n, _)| n).collect();
    let analytic: Vec<Vec<f64>> = grads
        .tensors()
        .into_iter()
        .map(|(_, a)| a.iter().copied().collect())
        .collect();
    let mut probe = params.clone();
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst: (String::new(), 0),
        analytic: 0.0,
        numeric: 0.0,
        entries_checked: 0,
    };
    for (t, name) in names.iter().enumerate() {
        let len = analytic[t].len();
        for i in 0..len {
            let original = probe.tensors_mut()[t].as_slice_mut().unwrap()[i];
            probe.tensors_mut()[t].as_slice_mut().unwrap()[i] = original + FD_STEP;
            let plus = objective(&probe)?;
            probe.tensors_mut()[t].as_slice_mut().unwrap()[i] = original - FD_STEP;
            let minus = objective(&probe)?;
            probe.tensors_mut()[t].as_slice_mut().unwrap()[i] = original;

            let numeric = (plus - minus) / (2.0 * FD_STEP);
            let err = rel_error(analytic[t][i], numeric);
            report.entries_checked += 1;
            if err > report.max_rel_error {
                report.max_rel_error = err;
                report.worst = (name.clone(), i);
                report.analytic = analytic[t][i];
                report.numeric = numeric;
            }
        }
    }
    Ok(report)
}
