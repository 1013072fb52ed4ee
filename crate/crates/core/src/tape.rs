//! Reverse-mode gradient tape over batched dense buffers.
//!
//! Every node holds a flat row-major value of shape `[batch × rows × cols]`.
//! Parameter leaves are recorded with `batch == 1` and broadcast against the
//! batch of the data they combine with; their gradients are summed over the
//! batch on the way back.

use ndarray::{ArrayView2, ArrayViewMut2};

use crate::complex::kernels::{self, MixShape};
use crate::error::{Error, Result};

/// Epsilon added to the variance in layer normalization.
pub const NORM_EPS: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Shape {
    pub batch: usize,
    pub rows: usize,
    pub cols: usize,
}

impl Shape {
    pub fn new(batch: usize, rows: usize, cols: usize) -> Self {
        Self { batch, rows, cols }
    }

    pub fn item(self) -> usize {
        self.rows * self.cols
    }

    pub fn len(self) -> usize {
        self.batch * self.item()
    }

    pub fn is_empty(self) -> bool {
        self.len() == 0
    }
}

/// Handle to a node on a [`GradientTape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

/// A complex tensor on the tape.
#[derive(Debug, Clone, Copy)]
pub struct ComplexVar {
    pub re: Var,
    pub im: Var,
}

/// A polar tensor on the tape.
#[derive(Debug, Clone, Copy)]
pub struct PolarVar {
    pub modulus: Var,
    pub phase: Var,
}

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    EulerReal {
        embedding: Var,
        mu: Var,
    },
    EulerImag {
        embedding: Var,
        mu: Var,
    },
    Modulus {
        re: Var,
        im: Var,
    },
    Phase {
        re: Var,
        im: Var,
    },
    MixPhase {
        phase: Var,
        orders: Var,
        bias: Var,
    },
    MixModulus {
        modulus: Var,
        orders: Var,
        bias: Var,
    },
    PolarReal {
        modulus: Var,
        phase: Var,
    },
    PolarImag {
        modulus: Var,
        phase: Var,
    },
    Linear {
        x: Var,
        weight: Var,
        bias: Var,
    },
    Relu(Var),
    Add(Var, Var),
    LayerNorm {
        x: Var,
        gain: Var,
        shift: Var,
        xhat: Vec<f64>,
        inv_std: Vec<f64>,
    },
    Head {
        x: Var,
        w: Var,
    },
    Sigmoid(Var),
}

#[derive(Debug, Clone)]
struct Node {
    shape: Shape,
    value: Vec<f64>,
    op: Op,
}

/// Ordered record of executed kernels with the forward values each adjoint
/// needs. One tape per training step; not shared across threads.
#[derive(Debug, Clone, Default)]
pub struct GradientTape {
    nodes: Vec<Node>,
}

/// Adjoints produced by [`GradientTape::backward`], indexed by [`Var`].
#[derive(Debug, Clone)]
pub struct Gradients(Vec<Option<Vec<f64>>>);

impl Gradients {
    /// `None` when the node does not influence the output.
    pub fn get(&self, var: Var) -> Option<&[f64]> {
        self.0[var.0].as_deref()
    }
}

fn broadcast_slice(value: &[f64], shape: Shape, b: usize) -> &[f64] {
    let item = shape.item();
    if shape.batch == 1 {
        value
    } else {
        &value[b * item..(b + 1) * item]
    }
}

fn broadcast_slice_mut(value: &mut [f64], shape: Shape, b: usize) -> &mut [f64] {
    let item = shape.item();
    if shape.batch == 1 {
        value
    } else {
        &mut value[b * item..(b + 1) * item]
    }
}

impl GradientTape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, var: Var) -> &[f64] {
        &self.nodes[var.0].value
    }

    pub fn shape(&self, var: Var) -> Shape {
        self.nodes[var.0].shape
    }

    fn push(&mut self, shape: Shape, value: Vec<f64>, op: Op) -> Var {
        debug_assert_eq!(shape.len(), value.len());
        self.nodes.push(Node { shape, value, op });
        Var(self.nodes.len() - 1)
    }

    pub fn leaf(&mut self, shape: Shape, value: Vec<f64>) -> Result<Var> {
        if shape.len() != value.len() {
            return Err(Error::shape("tape leaf", shape.len(), value.len()));
        }
        Ok(self.push(shape, value, Op::Leaf))
    }

    fn check_broadcast(&self, context: &str, data: Var, param: Var, rows: usize, cols: usize) -> Result<Shape> {
        let ds = self.shape(data);
        let ps = self.shape(param);
        if (ps.rows, ps.cols) != (rows, cols) || !(ps.batch == 1 || ps.batch == ds.batch) {
            return Err(Error::shape(
                context,
                (ds.batch, rows, cols),
                (ps.batch, ps.rows, ps.cols),
            ));
        }
        Ok(ds)
    }

    fn check_same(&self, context: &str, a: Var, b: Var) -> Result<Shape> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa != sb {
            return Err(Error::shape(context, sa, sb));
        }
        Ok(sa)
    }

    // ----- complex kernels -------------------------------------------------

    /// Records `re = mu cos(e)`, `im = mu sin(e)`. `mu` may have batch 1.
    pub fn euler_map(&mut self, embedding: Var, mu: Var) -> Result<ComplexVar> {
        let es = self.shape(embedding);
        let shape = self.check_broadcast("euler_map", embedding, mu, es.rows, es.cols)?;
        let mut re = vec![0.0; shape.len()];
        let mut im = vec![0.0; shape.len()];
        let item = shape.item();
        let (ev, mv, ms) = (self.value(embedding), self.value(mu), self.shape(mu));
        for b in 0..shape.batch {
            let range = b * item..(b + 1) * item;
            kernels::euler_map(
                &ev[range.clone()],
                broadcast_slice(mv, ms, b),
                &mut re[range.clone()],
                &mut im[range],
            );
        }
        Ok(ComplexVar {
            re: self.push(shape, re, Op::EulerReal { embedding, mu }),
            im: self.push(shape, im, Op::EulerImag { embedding, mu }),
        })
    }

    pub fn to_polar(&mut self, c: ComplexVar) -> Result<PolarVar> {
        let shape = self.check_same("to_polar", c.re, c.im)?;
        let mut modulus = vec![0.0; shape.len()];
        let mut phase = vec![0.0; shape.len()];
        kernels::to_polar(self.value(c.re), self.value(c.im), &mut modulus, &mut phase);
        Ok(PolarVar {
            modulus: self.push(shape, modulus, Op::Modulus { re: c.re, im: c.im }),
            phase: self.push(shape, phase, Op::Phase { re: c.re, im: c.im }),
        })
    }

    pub fn from_polar(&mut self, p: PolarVar) -> Result<ComplexVar> {
        let shape = self.check_same("from_polar", p.modulus, p.phase)?;
        let mut re = vec![0.0; shape.len()];
        let mut im = vec![0.0; shape.len()];
        kernels::from_polar(self.value(p.modulus), self.value(p.phase), &mut re, &mut im);
        let (modulus, phase) = (p.modulus, p.phase);
        Ok(ComplexVar {
            re: self.push(shape, re, Op::PolarReal { modulus, phase }),
            im: self.push(shape, im, Op::PolarImag { modulus, phase }),
        })
    }

    /// Records the polar mix of `p` with `orders` `[n × m]` and biases `[n × d]`.
    pub fn polar_mix(&mut self, p: PolarVar, orders: Var, delta: Var, delta_log_mod: Var) -> Result<PolarVar> {
        let input = self.check_same("polar_mix input", p.modulus, p.phase)?;
        let os = self.shape(orders);
        let mix = MixShape {
            m: input.rows,
            n: os.rows,
            d: input.cols,
        };
        if os.batch != 1 || os.cols != mix.m {
            return Err(Error::shape("polar_mix orders", (1, mix.n, mix.m), os));
        }
        for bias in [delta, delta_log_mod] {
            let bs = self.shape(bias);
            if bs != Shape::new(1, mix.n, mix.d) {
                return Err(Error::shape("polar_mix bias", (1, mix.n, mix.d), bs));
            }
        }
        let out_shape = Shape::new(input.batch, mix.n, mix.d);
        let (in_item, out_item) = (input.item(), out_shape.item());
        let mut phase = vec![0.0; out_shape.len()];
        let mut modulus = vec![0.0; out_shape.len()];
        {
            let (pv, mv) = (self.value(p.phase), self.value(p.modulus));
            let (ov, dv, dpv) = (self.value(orders), self.value(delta), self.value(delta_log_mod));
            for b in 0..input.batch {
                let src = b * in_item..(b + 1) * in_item;
                let dst = b * out_item..(b + 1) * out_item;
                kernels::mix_phase(mix, &pv[src.clone()], ov, dv, &mut phase[dst.clone()]);
                kernels::mix_modulus(mix, &mv[src], ov, dpv, &mut modulus[dst])?;
            }
        }
        Ok(PolarVar {
            modulus: self.push(
                out_shape,
                modulus,
                Op::MixModulus {
                    modulus: p.modulus,
                    orders,
                    bias: delta_log_mod,
                },
            ),
            phase: self.push(
                out_shape,
                phase,
                Op::MixPhase {
                    phase: p.phase,
                    orders,
                    bias: delta,
                },
            ),
        })
    }

    // ----- dense network ops ----------------------------------------------

    /// `y[b] = W vec(x[b]) + bias`, with `weight` `[out_rows·out_cols × in_item]`
    /// and `bias` `[out_rows × out_cols]`.
    pub fn linear(&mut self, x: Var, weight: Var, bias: Var) -> Result<Var> {
        let xs = self.shape(x);
        let (ws, bs) = (self.shape(weight), self.shape(bias));
        if ws.batch != 1 || ws.cols != xs.item() || bs.batch != 1 || ws.rows != bs.item() {
            return Err(Error::shape(
                "linear",
                format!("weight [? × {}] with bias of matching rows", xs.item()),
                (ws, bs),
            ));
        }
        let out_shape = Shape::new(xs.batch, bs.rows, bs.cols);
        let xv = ArrayView2::from_shape((xs.batch, xs.item()), self.value(x)).unwrap();
        let wv = ArrayView2::from_shape((ws.rows, ws.cols), self.value(weight)).unwrap();
        let mut y = xv.dot(&wv.t());
        let bias_v = self.value(bias);
        for mut row in y.rows_mut() {
            for (o, &bb) in row.iter_mut().zip(bias_v) {
                *o += bb;
            }
        }
        let value = y.into_raw_vec_and_offset().0;
        Ok(self.push(out_shape, value, Op::Linear { x, weight, bias }))
    }

    pub fn relu(&mut self, x: Var) -> Var {
        let value = self.value(x).iter().map(|&v| v.max(0.0)).collect();
        self.push(self.shape(x), value, Op::Relu(x))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let shape = self.check_same("add", a, b)?;
        let value = self.value(a).iter().zip(self.value(b)).map(|(x, y)| x + y).collect();
        Ok(self.push(shape, value, Op::Add(a, b)))
    }

    /// Per-item normalization to zero mean and unit variance over all
    /// `rows × cols` entries, then `gain * xhat + shift`.
    pub fn layer_norm(&mut self, x: Var, gain: Var, shift: Var) -> Result<Var> {
        let xs = self.shape(x);
        for p in [gain, shift] {
            if self.shape(p) != Shape::new(1, xs.rows, xs.cols) {
                return Err(Error::shape("layer_norm", (1, xs.rows, xs.cols), self.shape(p)));
            }
        }
        let item = xs.item();
        let mut xhat = vec![0.0; xs.len()];
        let mut inv_std = vec![0.0; xs.batch];
        let mut value = vec![0.0; xs.len()];
        let (xv, gv, sv) = (self.value(x), self.value(gain), self.value(shift));
        for b in 0..xs.batch {
            let row = &xv[b * item..(b + 1) * item];
            let mean = row.iter().sum::<f64>() / item as f64;
            let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / item as f64;
            let is = 1.0 / (var + NORM_EPS).sqrt();
            inv_std[b] = is;
            for i in 0..item {
                let h = (row[i] - mean) * is;
                xhat[b * item + i] = h;
                value[b * item + i] = gv[i] * h + sv[i];
            }
        }
        Ok(self.push(
            xs,
            value,
            Op::LayerNorm {
                x,
                gain,
                shift,
                xhat,
                inv_std,
            },
        ))
    }

    /// `z[b] = <w, x[b]>` producing `[batch × 1 × 1]`.
    pub fn head(&mut self, x: Var, w: Var) -> Result<Var> {
        let xs = self.shape(x);
        let ws = self.shape(w);
        if ws.batch != 1 || ws.item() != xs.item() {
            return Err(Error::shape("head", (1, xs.rows, xs.cols), ws));
        }
        let item = xs.item();
        let (xv, wv) = (self.value(x), self.value(w));
        let value = (0..xs.batch)
            .map(|b| xv[b * item..(b + 1) * item].iter().zip(wv).map(|(a, c)| a * c).sum())
            .collect();
        Ok(self.push(Shape::new(xs.batch, 1, 1), value, Op::Head { x, w }))
    }

    /// Logistic function, clamped to stay strictly inside `(0, 1)`.
    pub fn sigmoid(&mut self, x: Var) -> Var {
        let value = self.value(x).iter().map(|&v| sigmoid(v)).collect();
        self.push(self.shape(x), value, Op::Sigmoid(x))
    }

    // ----- reverse pass ----------------------------------------------------

    /// Replays adjoints from `output` (seeded with `seed`) back to every node.
    pub fn backward(&self, output: Var, seed: Vec<f64>) -> Result<Gradients> {
        let out_shape = self.shape(output);
        if seed.len() != out_shape.len() {
            return Err(Error::shape("backward seed", out_shape.len(), seed.len()));
        }
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; self.nodes.len()];
        grads[output.0] = Some(seed);

        for idx in (0..=output.0).rev() {
            let Some(g) = grads[idx].take() else { continue };
            let node = &self.nodes[idx];
            let shape = node.shape;
            let item = shape.item();
            match &node.op {
                Op::Leaf => {}
                Op::EulerReal { embedding, mu } | Op::EulerImag { embedding, mu } => {
                    let (ev, mv, ms) = (self.value(*embedding), self.value(*mu), self.shape(*mu));
                    let mut ge = vec![0.0; ev.len()];
                    let mut gm = vec![0.0; mv.len()];
                    let real = matches!(node.op, Op::EulerReal { .. });
                    for b in 0..shape.batch {
                        let r = b * item..(b + 1) * item;
                        let adjoint = if real {
                            kernels::polar_real_adjoint
                        } else {
                            kernels::polar_imag_adjoint
                        };
                        adjoint(
                            broadcast_slice(mv, ms, b),
                            &ev[r.clone()],
                            &g[r.clone()],
                            broadcast_slice_mut(&mut gm, ms, b),
                            &mut ge[r],
                        );
                    }
                    accumulate(&mut grads, *embedding, ge);
                    accumulate(&mut grads, *mu, gm);
                }
                Op::Modulus { re, im } | Op::Phase { re, im } => {
                    let (rv, iv) = (self.value(*re), self.value(*im));
                    let mut gr = vec![0.0; rv.len()];
                    let mut gi = vec![0.0; iv.len()];
                    if matches!(node.op, Op::Modulus { .. }) {
                        kernels::modulus_adjoint(rv, iv, &g, &mut gr, &mut gi);
                    } else {
                        kernels::phase_adjoint(rv, iv, &g, &mut gr, &mut gi);
                    }
                    accumulate(&mut grads, *re, gr);
                    accumulate(&mut grads, *im, gi);
                }
                Op::PolarReal { modulus, phase } | Op::PolarImag { modulus, phase } => {
                    let (mv, pv) = (self.value(*modulus), self.value(*phase));
                    let mut gm = vec![0.0; mv.len()];
                    let mut gp = vec![0.0; pv.len()];
                    if matches!(node.op, Op::PolarReal { .. }) {
                        kernels::polar_real_adjoint(mv, pv, &g, &mut gm, &mut gp);
                    } else {
                        kernels::polar_imag_adjoint(mv, pv, &g, &mut gm, &mut gp);
                    }
                    accumulate(&mut grads, *modulus, gm);
                    accumulate(&mut grads, *phase, gp);
                }
                Op::MixPhase {
                    phase: input,
                    orders,
                    bias,
                }
                | Op::MixModulus {
                    modulus: input,
                    orders,
                    bias,
                } => {
                    let in_shape = self.shape(*input);
                    let mix = MixShape {
                        m: in_shape.rows,
                        n: shape.rows,
                        d: shape.cols,
                    };
                    let (iv, ov) = (self.value(*input), self.value(*orders));
                    let in_item = in_shape.item();
                    let mut gi = vec![0.0; iv.len()];
                    let mut go = vec![0.0; ov.len()];
                    let mut gb = vec![0.0; shape.item()];
                    for b in 0..shape.batch {
                        let src = b * in_item..(b + 1) * in_item;
                        let dst = b * item..(b + 1) * item;
                        if matches!(node.op, Op::MixPhase { .. }) {
                            kernels::mix_phase_adjoint(
                                mix,
                                &iv[src.clone()],
                                ov,
                                &g[dst],
                                &mut gi[src],
                                &mut go,
                                &mut gb,
                            );
                        } else {
                            kernels::mix_modulus_adjoint(
                                mix,
                                &iv[src.clone()],
                                ov,
                                &node.value[dst.clone()],
                                &g[dst],
                                &mut gi[src],
                                &mut go,
                                &mut gb,
                            );
                        }
                    }
                    accumulate(&mut grads, *input, gi);
                    accumulate(&mut grads, *orders, go);
                    accumulate(&mut grads, *bias, gb);
                }
                Op::Linear { x, weight, bias } => {
                    let (xs, ws) = (self.shape(*x), self.shape(*weight));
                    let xv = ArrayView2::from_shape((xs.batch, xs.item()), self.value(*x)).unwrap();
                    let wv = ArrayView2::from_shape((ws.rows, ws.cols), self.value(*weight)).unwrap();
                    let gv = ArrayView2::from_shape((shape.batch, item), &g[..]).unwrap();
                    let gx = gv.dot(&wv);
                    let mut gw = vec![0.0; ws.len()];
                    ndarray::linalg::general_mat_mul(
                        1.0,
                        &gv.t(),
                        &xv,
                        0.0,
                        &mut ArrayViewMut2::from_shape((ws.rows, ws.cols), &mut gw[..]).unwrap(),
                    );
                    let mut gb = vec![0.0; item];
                    for row in gv.rows() {
                        for (acc, &v) in gb.iter_mut().zip(row) {
                            *acc += v;
                        }
                    }
                    accumulate(&mut grads, *x, gx.into_raw_vec_and_offset().0);
                    accumulate(&mut grads, *weight, gw);
                    accumulate(&mut grads, *bias, gb);
                }
                Op::Relu(x) => {
                    let gx = g
                        .iter()
                        .zip(&node.value)
                        .map(|(&gi, &y)| if y > 0.0 { gi } else { 0.0 })
                        .collect();
                    accumulate(&mut grads, *x, gx);
                }
                Op::Add(a, b) => {
                    accumulate(&mut grads, *a, g.clone());
                    accumulate(&mut grads, *b, g.clone());
                }
                Op::LayerNorm {
                    x,
                    gain,
                    shift,
                    xhat,
                    inv_std,
                } => {
                    let gain_v = self.value(*gain);
                    let mut gx = vec![0.0; shape.len()];
                    let mut gg = vec![0.0; item];
                    let mut gs = vec![0.0; item];
                    for b in 0..shape.batch {
                        let r = b * item..(b + 1) * item;
                        let (gy, h) = (&g[r.clone()], &xhat[r.clone()]);
                        let mut mean_gh = 0.0;
                        let mut mean_ghh = 0.0;
                        for i in 0..item {
                            gg[i] += gy[i] * h[i];
                            gs[i] += gy[i];
                            let gh = gy[i] * gain_v[i];
                            mean_gh += gh;
                            mean_ghh += gh * h[i];
                        }
                        mean_gh /= item as f64;
                        mean_ghh /= item as f64;
                        for i in 0..item {
                            let gh = gy[i] * gain_v[i];
                            gx[r.start + i] = inv_std[b] * (gh - mean_gh - h[i] * mean_ghh);
                        }
                    }
                    accumulate(&mut grads, *x, gx);
                    accumulate(&mut grads, *gain, gg);
                    accumulate(&mut grads, *shift, gs);
                }
                Op::Head { x, w } => {
                    let xs = self.shape(*x);
                    let xi = xs.item();
                    let (xv, wv) = (self.value(*x), self.value(*w));
                    let mut gx = vec![0.0; xv.len()];
                    let mut gw = vec![0.0; wv.len()];
                    for b in 0..xs.batch {
                        for i in 0..xi {
                            gx[b * xi + i] = g[b] * wv[i];
                            gw[i] += g[b] * xv[b * xi + i];
                        }
                    }
                    accumulate(&mut grads, *x, gx);
                    accumulate(&mut grads, *w, gw);
                }
                Op::Sigmoid(x) => {
                    let gx = g.iter().zip(&node.value).map(|(&gi, &y)| gi * y * (1.0 - y)).collect();
                    accumulate(&mut grads, *x, gx);
                }
            }
            grads[idx] = Some(g);
        }
        Ok(Gradients(grads))
    }
}

fn accumulate(grads: &mut [Option<Vec<f64>>], var: Var, g: Vec<f64>) {
    match &mut grads[var.0] {
        Some(acc) => {
            for (a, v) in acc.iter_mut().zip(&g) {
                *a += v;
            }
        }
        slot @ None => *slot = Some(g),
    }
}

/// Numerically stable logistic function kept strictly inside `(0, 1)`.
pub fn sigmoid(x: f64) -> f64 {
    let y = if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    };
    y.clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON / 2.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sigmoid_strictly_inside_unit_interval() {
        for x in [-1e4, -800.0, -40.0, 0.0, 40.0, 800.0, 1e4] {
            let y = sigmoid(x);
            assert!(y > 0.0 && y < 1.0, "sigmoid({x}) = {y}");
        }
        assert_eq!(sigmoid(0.0), 0.5);
    }

    #[test]
    fn leaf_rejects_wrong_length() {
        let mut tape = GradientTape::new();
        assert!(tape.leaf(Shape::new(1, 2, 2), vec![0.0; 3]).is_err());
    }

    #[test]
    fn unused_leaf_has_no_gradient() {
        let mut tape = GradientTape::new();
        let a = tape.leaf(Shape::new(1, 1, 2), vec![1.0, -2.0]).unwrap();
        let unused = tape.leaf(Shape::new(1, 1, 1), vec![3.0]).unwrap();
        let r = tape.relu(a);
        let grads = tape.backward(r, vec![1.0, 1.0]).unwrap();
        assert_eq!(grads.get(a).unwrap(), &[1.0, 0.0]);
        assert!(grads.get(unused).is_none());
    }

    #[test]
    fn broadcast_param_gradient_sums_over_batch() {
        let mut tape = GradientTape::new();
        let x = tape
            .leaf(Shape::new(3, 1, 2), vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0])
            .unwrap();
        let w = tape.leaf(Shape::new(1, 1, 2), vec![0.5, -1.0]).unwrap();
        let z = tape.head(x, w).unwrap();
        assert_eq!(tape.value(z), &[-1.5, -2.5, -3.5]);
        let grads = tape.backward(z, vec![1.0; 3]).unwrap();
        assert_eq!(grads.get(w).unwrap(), &[9.0, 12.0]);
    }
}
