use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::config::ModelConfig;
use crate::error::{Error, Result};

/// Feature embeddings for every field's vocabulary, stacked by field.
///
/// Field `j` owns global rows `offsets[j]..offsets[j + 1]`; local index 0 of
/// every field is the reserved unknown-token row.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    pub vectors: Array2<f64>,
    offsets: Vec<usize>,
}

impl EmbeddingTable {
    pub fn new(vectors: Array2<f64>, field_vocab: &[usize]) -> Result<Self> {
        let mut offsets = Vec::with_capacity(field_vocab.len() + 1);
        offsets.push(0);
        for (j, &v) in field_vocab.iter().enumerate() {
            if v == 0 {
                return Err(Error::InvalidArgument(format!("field {j} has an empty vocabulary")));
            }
            offsets.push(offsets[j] + v);
        }
        if vectors.nrows() != offsets[field_vocab.len()] {
            return Err(Error::shape(
                "embedding rows",
                offsets[field_vocab.len()],
                vectors.nrows(),
            ));
        }
        Ok(Self { vectors, offsets })
    }

    pub fn num_fields(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn field_vocab(&self) -> Vec<usize> {
        self.offsets.windows(2).map(|w| w[1] - w[0]).collect()
    }

    /// Field owning global row `row`.
    pub fn field_of(&self, row: usize) -> Option<usize> {
        if row >= *self.offsets.last().unwrap() {
            return None;
        }
        Some(self.offsets.partition_point(|&o| o <= row) - 1)
    }

    /// Global row of `local` index within `field`.
    pub fn row_of(&self, field: usize, local: usize) -> Result<usize> {
        let size = self.offsets[field + 1] - self.offsets[field];
        if local >= size {
            return Err(Error::OutOfVocabulary {
                field: format!("#{field}"),
                index: local,
                size,
            });
        }
        Ok(self.offsets[field] + local)
    }
}

/// Modulus vectors shared by all features of a field.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldModulus {
    pub mu: Array2<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerNormParams {
    pub gain: Array2<f64>,
    pub shift: Array2<f64>,
}

/// Parameters of one Euler interaction layer with `m_in` inputs and `n`
/// outputs.
#[derive(Debug, Clone, PartialEq)]
pub struct EulerLayerParams {
    /// `[n × m_in]` order vectors.
    pub orders: Array2<f64>,
    /// `[n × d]` phase bias.
    pub bias_phase: Array2<f64>,
    /// `[n × d]` log-modulus bias.
    pub bias_log_mod: Array2<f64>,
    /// `[n·d × m_in·d]`; block `k` (rows `k·d..(k+1)·d`) maps the flattened
    /// input to output feature `k`. Shared by the real and imaginary parts.
    pub implicit_weight: Array2<f64>,
    /// `[n × d]`.
    pub implicit_bias: Array2<f64>,
    pub norm: Option<LayerNormParams>,
}

impl EulerLayerParams {
    pub fn inputs(&self) -> usize {
        self.orders.ncols()
    }

    pub fn width(&self) -> usize {
        self.orders.nrows()
    }

    pub fn dim(&self) -> usize {
        self.bias_phase.ncols()
    }

    /// Zero biases and weights around the given order matrix.
    pub fn from_orders(orders: Array2<f64>, dim: usize, normalization: bool) -> Self {
        let (n, m_in) = orders.dim();
        Self {
            orders,
            bias_phase: Array2::zeros((n, dim)),
            bias_log_mod: Array2::zeros((n, dim)),
            implicit_weight: Array2::zeros((n * dim, m_in * dim)),
            implicit_bias: Array2::zeros((n, dim)),
            norm: normalization.then(|| LayerNormParams {
                gain: Array2::ones((n, dim)),
                shift: Array2::zeros((n, dim)),
            }),
        }
    }

    fn check(&self, m_in: usize, n: usize, d: usize, normalization: bool) -> Result<()> {
        let expect = |name: &str, a: &Array2<f64>, shape: (usize, usize)| {
            if a.dim() == shape {
                Ok(())
            } else {
                Err(Error::shape(name, shape, a.dim()))
            }
        };
        expect("orders", &self.orders, (n, m_in))?;
        expect("bias_phase", &self.bias_phase, (n, d))?;
        expect("bias_log_mod", &self.bias_log_mod, (n, d))?;
        expect("implicit_weight", &self.implicit_weight, (n * d, m_in * d))?;
        expect("implicit_bias", &self.implicit_bias, (n, d))?;
        match (&self.norm, normalization) {
            (Some(norm), true) => {
                expect("norm_gain", &norm.gain, (n, d))?;
                expect("norm_shift", &norm.shift, (n, d))
            }
            (None, false) => Ok(()),
            _ => Err(Error::shape(
                "normalization parameters",
                normalization,
                self.norm.is_some(),
            )),
        }
    }
}

/// Output regression weights `[n_L × d]`, applied to both parts.
#[derive(Debug, Clone, PartialEq)]
pub struct OutputHead {
    pub w: Array2<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub config: ModelConfig,
    pub embedding: EmbeddingTable,
    pub modulus: FieldModulus,
    pub layers: Vec<EulerLayerParams>,
    pub head: OutputHead,
}

fn normal_matrix(rng: &mut ChaCha8Rng, shape: (usize, usize), mean: f64, std: f64) -> Array2<f64> {
    let dist = Normal::new(mean, std).expect("finite std");
    Array2::from_shape_fn(shape, |_| dist.sample(rng))
}

/// Standard deviation of the head weights at initialization.
pub const HEAD_INIT_STD: f64 = 0.01;

/// Draws initial parameters. Deterministic in `seed`.
///
/// Embeddings ~ N(0, 0.01), `mu` = 1, order entries ~ 1/m_in + N(0, 0.01),
/// biases 0, implicit weights ~ N(0, sqrt(2 / (m_in·d))), head ~ N(0, 0.01).
pub fn init_params(config: &ModelConfig, field_vocab: &[usize], seed: u64) -> Result<ModelParams> {
    config.validate()?;
    if field_vocab.len() != config.num_fields {
        return Err(Error::shape(
            "field vocabulary count",
            config.num_fields,
            field_vocab.len(),
        ));
    }
    let d = config.embed_dim;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let vocab: usize = field_vocab.iter().sum();
    let embedding = EmbeddingTable::new(normal_matrix(&mut rng, (vocab, d), 0.0, 0.01), field_vocab)?;
    let modulus = FieldModulus {
        mu: Array2::ones((config.num_fields, d)),
    };
    let mut layers = Vec::with_capacity(config.layer_widths.len());
    for (l, &n) in config.layer_widths.iter().enumerate() {
        let m_in = config.layer_input(l);
        let orders = normal_matrix(&mut rng, (n, m_in), 1.0 / m_in as f64, 0.01);
        let mut layer = EulerLayerParams::from_orders(orders, d, config.normalization);
        let std = (2.0 / (m_in * d) as f64).sqrt();
        layer.implicit_weight = normal_matrix(&mut rng, (n * d, m_in * d), 0.0, std);
        layers.push(layer);
    }
    let head = OutputHead {
        w: normal_matrix(&mut rng, (config.output_width(), d), 0.0, HEAD_INIT_STD),
    };
    Ok(ModelParams {
        config: config.clone(),
        embedding,
        modulus,
        layers,
        head,
    })
}

impl ModelParams {
    /// Checks every array against the shapes implied by `config`.
    pub fn validate(&self) -> Result<()> {
        let c = &self.config;
        c.validate()?;
        let d = c.embed_dim;
        if self.embedding.num_fields() != c.num_fields {
            return Err(Error::shape(
                "embedding fields",
                c.num_fields,
                self.embedding.num_fields(),
            ));
        }
        if self.embedding.vectors.ncols() != d {
            return Err(Error::shape("embedding dim", d, self.embedding.vectors.ncols()));
        }
        if self.modulus.mu.dim() != (c.num_fields, d) {
            return Err(Error::shape("modulus", (c.num_fields, d), self.modulus.mu.dim()));
        }
        if self.layers.len() != c.layer_widths.len() {
            return Err(Error::shape("layer count", c.layer_widths.len(), self.layers.len()));
        }
        for (l, layer) in self.layers.iter().enumerate() {
            layer.check(c.layer_input(l), c.layer_widths[l], d, c.normalization)?;
        }
        if self.head.w.dim() != (c.output_width(), d) {
            return Err(Error::shape("head", (c.output_width(), d), self.head.w.dim()));
        }
        Ok(())
    }

    /// Every parameter array in the stable order used by the optimizer and
    /// the archive.
    pub fn tensors(&self) -> Vec<(String, &Array2<f64>)> {
        let mut out = vec![
            ("embedding".to_string(), &self.embedding.vectors),
            ("modulus".to_string(), &self.modulus.mu),
        ];
        for (l, layer) in self.layers.iter().enumerate() {
            out.push((format!("layers.{l}.orders"), &layer.orders));
            out.push((format!("layers.{l}.bias_phase"), &layer.bias_phase));
            out.push((format!("layers.{l}.bias_log_mod"), &layer.bias_log_mod));
            out.push((format!("layers.{l}.implicit_weight"), &layer.implicit_weight));
            out.push((format!("layers.{l}.implicit_bias"), &layer.implicit_bias));
            if let Some(norm) = &layer.norm {
                out.push((format!("layers.{l}.norm_gain"), &norm.gain));
                out.push((format!("layers.{l}.norm_shift"), &norm.shift));
            }
        }
        out.push(("head.w".to_string(), &self.head.w));
        out
    }

    /// Mutable counterpart of [`ModelParams::tensors`], same order.
    pub fn tensors_mut(&mut self) -> Vec<&mut Array2<f64>> {
        let mut out = vec![&mut self.embedding.vectors, &mut self.modulus.mu];
        for layer in &mut self.layers {
            out.push(&mut layer.orders);
            out.push(&mut layer.bias_phase);
            out.push(&mut layer.bias_log_mod);
            out.push(&mut layer.implicit_weight);
            out.push(&mut layer.implicit_bias);
            if let Some(norm) = &mut layer.norm {
                out.push(&mut norm.gain);
                out.push(&mut norm.shift);
            }
        }
        out.push(&mut self.head.w);
        out
    }

    pub fn parameter_count(&self) -> usize {
        self.tensors().iter().map(|(_, a)| a.len()).sum()
    }

    /// Same structure, every entry zero. Used as a gradient accumulator.
    pub fn zeros_like(&self) -> ModelParams {
        let mut z = self.clone();
        for t in z.tensors_mut() {
            t.fill(0.0);
        }
        z
    }

    /// Sum of squares of every parameter.
    pub fn squared_norm(&self) -> f64 {
        self.tensors().iter().flat_map(|(_, a)| a.iter()).map(|v| v * v).sum()
    }
}
