//! Slice kernels and their adjoints.
//!
//! Every tensor here is a flat row-major `[rows × d]` slice. Adjoint functions
//! accumulate (`+=`) into the provided gradient buffers.

use std::f64::consts::PI;

use super::MOD_EPS;
use crate::error::{Error, Result};

#[inline]
fn phase_of(re: f64, im: f64) -> f64 {
    if re == 0.0 && im == 0.0 {
        return 0.0;
    }
    let theta = im.atan2(re);
    // atan2 returns -pi for (negative, -0.0)
    if theta == -PI {
        PI
    } else {
        theta
    }
}

pub fn to_polar(re: &[f64], im: &[f64], modulus: &mut [f64], phase: &mut [f64]) {
    for i in 0..re.len() {
        modulus[i] = re[i].hypot(im[i]).max(MOD_EPS);
        phase[i] = phase_of(re[i], im[i]);
    }
}

/// Adjoint of the clamped modulus. Zero below the clamp.
pub fn modulus_adjoint(re: &[f64], im: &[f64], grad_out: &[f64], grad_re: &mut [f64], grad_im: &mut [f64]) {
    for i in 0..re.len() {
        let r = re[i].hypot(im[i]);
        if r > MOD_EPS {
            grad_re[i] += grad_out[i] * re[i] / r;
            grad_im[i] += grad_out[i] * im[i] / r;
        }
    }
}

/// Adjoint of `atan2(im, re)`: d/dre = -im / r^2, d/dim = re / r^2.
pub fn phase_adjoint(re: &[f64], im: &[f64], grad_out: &[f64], grad_re: &mut [f64], grad_im: &mut [f64]) {
    for i in 0..re.len() {
        let r2 = re[i] * re[i] + im[i] * im[i];
        if r2 > 0.0 {
            grad_re[i] -= grad_out[i] * im[i] / r2;
            grad_im[i] += grad_out[i] * re[i] / r2;
        }
    }
}

pub fn from_polar(modulus: &[f64], phase: &[f64], re: &mut [f64], im: &mut [f64]) {
    for i in 0..modulus.len() {
        let (s, c) = phase[i].sin_cos();
        re[i] = modulus[i] * c;
        im[i] = modulus[i] * s;
    }
}

/// `euler_map` is `from_polar` with the embedding as phase and `mu` as modulus.
pub fn euler_map(embedding: &[f64], mu: &[f64], re: &mut [f64], im: &mut [f64]) {
    from_polar(mu, embedding, re, im);
}

/// Adjoint of `re = modulus * cos(phase)`.
pub fn polar_real_adjoint(
    modulus: &[f64],
    phase: &[f64],
    grad_out: &[f64],
    grad_modulus: &mut [f64],
    grad_phase: &mut [f64],
) {
    for i in 0..modulus.len() {
        let (s, c) = phase[i].sin_cos();
        grad_modulus[i] += grad_out[i] * c;
        grad_phase[i] -= grad_out[i] * modulus[i] * s;
    }
}

/// Adjoint of `im = modulus * sin(phase)`.
pub fn polar_imag_adjoint(
    modulus: &[f64],
    phase: &[f64],
    grad_out: &[f64],
    grad_modulus: &mut [f64],
    grad_phase: &mut [f64],
) {
    for i in 0..modulus.len() {
        let (s, c) = phase[i].sin_cos();
        grad_modulus[i] += grad_out[i] * s;
        grad_phase[i] += grad_out[i] * modulus[i] * c;
    }
}

/// Dimensions of one polar mix: `m` input features, `n` order rows, `d` dims.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MixShape {
    pub m: usize,
    pub n: usize,
    pub d: usize,
}

/// `out[k] = sum_j orders[k,j] * input[j] + bias[k]`, rows of length `d`.
fn mix_linear(shape: MixShape, input: &[f64], orders: &[f64], bias: &[f64], out: &mut [f64]) {
    let MixShape { m, n, d } = shape;
    for k in 0..n {
        let out_row = &mut out[k * d..(k + 1) * d];
        out_row.copy_from_slice(&bias[k * d..(k + 1) * d]);
        for j in 0..m {
            let a = orders[k * m + j];
            let in_row = &input[j * d..(j + 1) * d];
            for (o, &x) in out_row.iter_mut().zip(in_row) {
                *o += a * x;
            }
        }
    }
}

fn mix_linear_adjoint(
    shape: MixShape,
    input: &[f64],
    orders: &[f64],
    grad_out: &[f64],
    grad_input: &mut [f64],
    grad_orders: &mut [f64],
    grad_bias: &mut [f64],
) {
    let MixShape { m, n, d } = shape;
    for k in 0..n {
        let g_row = &grad_out[k * d..(k + 1) * d];
        for (gb, &g) in grad_bias[k * d..(k + 1) * d].iter_mut().zip(g_row) {
            *gb += g;
        }
        for j in 0..m {
            let a = orders[k * m + j];
            let in_row = &input[j * d..(j + 1) * d];
            let mut dot = 0.0;
            for ((gi, &x), &g) in grad_input[j * d..(j + 1) * d].iter_mut().zip(in_row).zip(g_row) {
                *gi += a * g;
                dot += x * g;
            }
            grad_orders[k * m + j] += dot;
        }
    }
}

pub fn mix_phase(shape: MixShape, phase: &[f64], orders: &[f64], bias: &[f64], out: &mut [f64]) {
    mix_linear(shape, phase, orders, bias, out);
}

pub fn mix_phase_adjoint(
    shape: MixShape,
    phase: &[f64],
    orders: &[f64],
    grad_out: &[f64],
    grad_phase: &mut [f64],
    grad_orders: &mut [f64],
    grad_bias: &mut [f64],
) {
    mix_linear_adjoint(shape, phase, orders, grad_out, grad_phase, grad_orders, grad_bias);
}

/// `out[k] = exp(sum_j orders[k,j] * ln modulus[j] + bias[k])`.
pub fn mix_modulus(shape: MixShape, modulus: &[f64], orders: &[f64], bias: &[f64], out: &mut [f64]) -> Result<()> {
    let log_mod: Vec<f64> = modulus.iter().map(|v| v.ln()).collect();
    mix_linear(shape, &log_mod, orders, bias, out);
    for (idx, v) in out.iter_mut().enumerate() {
        *v = v.exp();
        if !v.is_finite() {
            return Err(Error::Overflow {
                row: idx / shape.d,
                dim: idx % shape.d,
            });
        }
    }
    Ok(())
}

/// Adjoint of [`mix_modulus`] given its cached output.
pub fn mix_modulus_adjoint(
    shape: MixShape,
    modulus: &[f64],
    orders: &[f64],
    out: &[f64],
    grad_out: &[f64],
    grad_modulus: &mut [f64],
    grad_orders: &mut [f64],
    grad_bias: &mut [f64],
) {
    let log_mod: Vec<f64> = modulus.iter().map(|v| v.ln()).collect();
    let grad_pre: Vec<f64> = out.iter().zip(grad_out).map(|(o, g)| o * g).collect();
    let mut grad_log = vec![0.0; modulus.len()];
    mix_linear_adjoint(
        shape,
        &log_mod,
        orders,
        &grad_pre,
        &mut grad_log,
        grad_orders,
        grad_bias,
    );
    for i in 0..modulus.len() {
        grad_modulus[i] += grad_log[i] / modulus[i];
    }
}
