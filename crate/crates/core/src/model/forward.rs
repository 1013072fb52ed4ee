use ndarray::Array2;

use super::config::Mode;
use super::params::{EulerLayerParams, ModelParams};
use crate::complex::ComplexTensor;
use crate::error::{Error, Result};
use crate::tape::{ComplexVar, GradientTape, Gradients, Shape, Var};

/// Tape handles of one layer's parameter leaves.
#[derive(Debug, Clone)]
pub struct LayerVars {
    pub orders: Var,
    pub bias_phase: Var,
    pub bias_log_mod: Var,
    pub implicit_weight: Var,
    pub implicit_bias: Var,
    pub norm: Option<(Var, Var)>,
}

/// A forward pass recorded on a tape, with the handles needed to read back
/// parameter gradients.
#[derive(Debug, Clone)]
pub struct TapeForward {
    pub tape: GradientTape,
    /// Global embedding rows gathered for the batch, in leaf order.
    pub rows: Vec<usize>,
    pub embedding: Var,
    pub mu: Var,
    pub layers: Vec<LayerVars>,
    pub head: Var,
    /// Final layer output, before the head.
    pub output: ComplexVar,
    /// `z_re + z_im`, shape `[batch × 1 × 1]`.
    pub logits: Var,
    pub probs: Var,
}

impl TapeForward {
    pub fn batch(&self) -> usize {
        self.tape.shape(self.logits).batch
    }

    pub fn probabilities(&self) -> &[f64] {
        self.tape.value(self.probs)
    }

    pub fn logits(&self) -> &[f64] {
        self.tape.value(self.logits)
    }

    /// Backpropagates `grad_logits` (dL/dz per record) and adds the parameter
    /// adjoints into `grads`, which must mirror `params`.
    pub fn accumulate_grads(&self, grad_logits: Vec<f64>, grads: &mut ModelParams) -> Result<()> {
        let g = self.tape.backward(self.logits, grad_logits)?;
        self.scatter(&g, grads);
        Ok(())
    }

    fn scatter(&self, g: &Gradients, grads: &mut ModelParams) {
        fn add(dst: &mut Array2<f64>, src: Option<&[f64]>) {
            if let Some(src) = src {
                for (d, s) in dst.iter_mut().zip(src) {
                    *d += s;
                }
            }
        }
        if let Some(ge) = g.get(self.embedding) {
            let d = grads.embedding.vectors.ncols();
            for (i, &row) in self.rows.iter().enumerate() {
                let mut dst = grads.embedding.vectors.row_mut(row);
                for (a, s) in dst.iter_mut().zip(&ge[i * d..(i + 1) * d]) {
                    *a += s;
                }
            }
        }
        add(&mut grads.modulus.mu, g.get(self.mu));
        for (vars, layer) in self.layers.iter().zip(&mut grads.layers) {
            add(&mut layer.orders, g.get(vars.orders));
            add(&mut layer.bias_phase, g.get(vars.bias_phase));
            add(&mut layer.bias_log_mod, g.get(vars.bias_log_mod));
            add(&mut layer.implicit_weight, g.get(vars.implicit_weight));
            add(&mut layer.implicit_bias, g.get(vars.implicit_bias));
            if let (Some((gain, shift)), Some(norm)) = (vars.norm, layer.norm.as_mut()) {
                add(&mut norm.gain, g.get(gain));
                add(&mut norm.shift, g.get(shift));
            }
        }
        add(&mut grads.head.w, g.get(self.head));
    }
}

fn param_leaf(tape: &mut GradientTape, a: &Array2<f64>) -> Result<Var> {
    let (rows, cols) = a.dim();
    tape.leaf(Shape::new(1, rows, cols), a.iter().copied().collect())
}

fn record_layer(
    tape: &mut GradientTape,
    layer: &EulerLayerParams,
    input: ComplexVar,
    mode: Mode,
) -> Result<(ComplexVar, LayerVars)> {
    let vars = LayerVars {
        orders: param_leaf(tape, &layer.orders)?,
        bias_phase: param_leaf(tape, &layer.bias_phase)?,
        bias_log_mod: param_leaf(tape, &layer.bias_log_mod)?,
        implicit_weight: param_leaf(tape, &layer.implicit_weight)?,
        implicit_bias: param_leaf(tape, &layer.implicit_bias)?,
        norm: match &layer.norm {
            Some(norm) => Some((param_leaf(tape, &norm.gain)?, param_leaf(tape, &norm.shift)?)),
            None => None,
        },
    };

    let explicit = if mode.explicit() {
        let polar = tape.to_polar(input)?;
        let mixed = tape.polar_mix(polar, vars.orders, vars.bias_phase, vars.bias_log_mod)?;
        Some(tape.from_polar(mixed)?)
    } else {
        None
    };
    let implicit = if mode.implicit() {
        let re = tape.linear(input.re, vars.implicit_weight, vars.implicit_bias)?;
        let im = tape.linear(input.im, vars.implicit_weight, vars.implicit_bias)?;
        Some(ComplexVar {
            re: tape.relu(re),
            im: tape.relu(im),
        })
    } else {
        None
    };
    let mut out = match (explicit, implicit) {
        (Some(e), Some(i)) => ComplexVar {
            re: tape.add(e.re, i.re)?,
            im: tape.add(e.im, i.im)?,
        },
        (Some(e), None) => e,
        (None, Some(i)) => i,
        (None, None) => unreachable!("every mode has a branch"),
    };
    if let Some((gain, shift)) = vars.norm {
        out = ComplexVar {
            re: tape.layer_norm(out.re, gain, shift)?,
            im: tape.layer_norm(out.im, gain, shift)?,
        };
    }
    Ok((out, vars))
}

fn global_rows(params: &ModelParams, records: &[u32]) -> Result<Vec<usize>> {
    let m = params.config.num_fields;
    if m == 0 || !records.len().is_multiple_of(m) {
        return Err(Error::shape("record batch", format!("multiple of {m}"), records.len()));
    }
    records
        .iter()
        .enumerate()
        .map(|(i, &local)| params.embedding.row_of(i % m, local as usize))
        .collect()
}

/// Row `j` is the embedding of the record's feature in field `j`.
pub fn embed_record(params: &ModelParams, record: &[u32]) -> Result<Array2<f64>> {
    let m = params.config.num_fields;
    if record.len() != m {
        return Err(Error::shape("record", m, record.len()));
    }
    let rows = global_rows(params, record)?;
    Ok(params.embedding.vectors.select(ndarray::Axis(0), &rows))
}

/// Records the full forward pass for a flat batch of records
/// (`batch × num_fields` local feature indices).
pub fn forward_batch(params: &ModelParams, records: &[u32]) -> Result<TapeForward> {
    let config = &params.config;
    let (m, d) = (config.num_fields, config.embed_dim);
    let rows = global_rows(params, records)?;
    let batch = rows.len() / m;

    let mut tape = GradientTape::new();
    let mut gathered = Vec::with_capacity(rows.len() * d);
    for &row in &rows {
        gathered.extend(params.embedding.vectors.row(row).iter().copied());
    }
    let embedding = tape.leaf(Shape::new(batch, m, d), gathered)?;
    let mu = param_leaf(&mut tape, &params.modulus.mu)?;
    let mut x = tape.euler_map(embedding, mu)?;

    let mut layers = Vec::with_capacity(params.layers.len());
    for layer in &params.layers {
        let (out, vars) = record_layer(&mut tape, layer, x, config.mode)?;
        x = out;
        layers.push(vars);
    }
    let head = param_leaf(&mut tape, &params.head.w)?;
    let z_re = tape.head(x.re, head)?;
    let z_im = tape.head(x.im, head)?;
    let logits = tape.add(z_re, z_im)?;
    let probs = tape.sigmoid(logits);
    Ok(TapeForward {
        tape,
        rows,
        embedding,
        mu,
        layers,
        head,
        output: x,
        logits,
        probs,
    })
}

/// Forward pass for a single record.
pub fn forward(params: &ModelParams, record: &[u32]) -> Result<TapeForward> {
    if record.len() != params.config.num_fields {
        return Err(Error::shape("record", params.config.num_fields, record.len()));
    }
    forward_batch(params, record)
}

/// Click probabilities for a flat batch of records, evaluated in chunks.
pub fn predict(params: &ModelParams, records: &[u32]) -> Result<Vec<f64>> {
    const CHUNK: usize = 4096;
    let m = params.config.num_fields;
    let mut out = Vec::with_capacity(records.len() / m.max(1));
    for chunk in records.chunks(CHUNK * m) {
        out.extend_from_slice(forward_batch(params, chunk)?.probabilities());
    }
    Ok(out)
}

/// Applies one Euler interaction layer to a single complex input `[m_in × d]`.
pub fn layer_forward(layer: &EulerLayerParams, input: &ComplexTensor, mode: Mode) -> Result<ComplexTensor> {
    let (m_in, d) = input.dim();
    if m_in != layer.inputs() || d != layer.dim() {
        return Err(Error::shape("layer input", (layer.inputs(), layer.dim()), (m_in, d)));
    }
    let mut tape = GradientTape::new();
    let shape = Shape::new(1, m_in, d);
    let re = tape.leaf(shape, input.real().iter().copied().collect())?;
    let im = tape.leaf(shape, input.imag().iter().copied().collect())?;
    let (out, _) = record_layer(&mut tape, layer, ComplexVar { re, im }, mode)?;
    let n = layer.width();
    ComplexTensor::new(
        Array2::from_shape_vec((n, d), tape.value(out.re).to_vec()).unwrap(),
        Array2::from_shape_vec((n, d), tape.value(out.im).to_vec()).unwrap(),
    )
}
