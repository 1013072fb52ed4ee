//! Complex-vector kernels in paired-array form.
//!
//! A complex tensor of `m` feature vectors with `d` dimensions is stored as two
//! `[m × d]` real arrays (rectangular form) or as a modulus/phase pair (polar
//! form). Explicit interactions are evaluated in polar form, where raising a
//! feature to a real power `a` scales its phase by `a` and its log-modulus by
//! `a`:
//!
//! ```text
//! prod_j (lambda_j e^{i theta_j})^{a_j}
//!     = exp(sum_j a_j log lambda_j) * exp(i sum_j a_j theta_j)
//! ```
//!
//! The slice-level kernels in [`kernels`] are shared by these array-level
//! functions and by the differentiable ops in [`crate::tape`].

pub mod kernels;

use ndarray::Array2;
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Lower clamp on moduli before taking logarithms.
pub const MOD_EPS: f64 = 1e-10;

/// `m` complex vectors of dimension `d` in rectangular form.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexTensor {
    real: Array2<f64>,
    imag: Array2<f64>,
}

impl ComplexTensor {
    pub fn new(real: Array2<f64>, imag: Array2<f64>) -> Result<Self> {
        if real.dim() != imag.dim() {
            return Err(Error::shape("ComplexTensor parts", real.dim(), imag.dim()));
        }
        Ok(Self {
            real: real.as_standard_layout().into_owned(),
            imag: imag.as_standard_layout().into_owned(),
        })
    }

    pub fn zeros(rows: usize, dim: usize) -> Self {
        Self {
            real: Array2::zeros((rows, dim)),
            imag: Array2::zeros((rows, dim)),
        }
    }

    pub fn real(&self) -> &Array2<f64> {
        &self.real
    }

    pub fn imag(&self) -> &Array2<f64> {
        &self.imag
    }

    /// `(rows, dim)`.
    pub fn dim(&self) -> (usize, usize) {
        self.real.dim()
    }

    pub fn get(&self, row: usize, col: usize) -> Complex64 {
        Complex64::new(self.real[[row, col]], self.imag[[row, col]])
    }

    pub fn into_parts(self) -> (Array2<f64>, Array2<f64>) {
        (self.real, self.imag)
    }

    pub fn is_finite(&self) -> bool {
        self.real.iter().chain(self.imag.iter()).all(|v| v.is_finite())
    }
}

/// `m` complex vectors of dimension `d` in polar form.
#[derive(Debug, Clone, PartialEq)]
pub struct PolarTensor {
    modulus: Array2<f64>,
    phase: Array2<f64>,
}

impl PolarTensor {
    pub fn new(modulus: Array2<f64>, phase: Array2<f64>) -> Result<Self> {
        if modulus.dim() != phase.dim() {
            return Err(Error::shape("PolarTensor parts", modulus.dim(), phase.dim()));
        }
        if modulus.iter().any(|&v| v < 0.0) {
            return Err(Error::InvalidArgument("negative modulus".into()));
        }
        Ok(Self {
            modulus: modulus.as_standard_layout().into_owned(),
            phase: phase.as_standard_layout().into_owned(),
        })
    }

    pub fn modulus(&self) -> &Array2<f64> {
        &self.modulus
    }

    pub fn phase(&self) -> &Array2<f64> {
        &self.phase
    }

    pub fn dim(&self) -> (usize, usize) {
        self.modulus.dim()
    }

    pub fn into_parts(self) -> (Array2<f64>, Array2<f64>) {
        (self.modulus, self.phase)
    }
}

fn slice(a: &Array2<f64>) -> &[f64] {
    a.as_slice().expect("tensors are kept in standard layout")
}

/// Rectangular to polar form. Moduli are clamped to at least [`MOD_EPS`] and
/// the phase at the origin is 0.
pub fn to_polar(c: &ComplexTensor) -> PolarTensor {
    let (rows, dim) = c.dim();
    let mut modulus = vec![0.0; rows * dim];
    let mut phase = vec![0.0; rows * dim];
    kernels::to_polar(slice(&c.real), slice(&c.imag), &mut modulus, &mut phase);
    PolarTensor {
        modulus: Array2::from_shape_vec((rows, dim), modulus).unwrap(),
        phase: Array2::from_shape_vec((rows, dim), phase).unwrap(),
    }
}

pub fn from_polar(p: &PolarTensor) -> ComplexTensor {
    let (rows, dim) = p.dim();
    let mut real = vec![0.0; rows * dim];
    let mut imag = vec![0.0; rows * dim];
    kernels::from_polar(slice(&p.modulus), slice(&p.phase), &mut real, &mut imag);
    ComplexTensor {
        real: Array2::from_shape_vec((rows, dim), real).unwrap(),
        imag: Array2::from_shape_vec((rows, dim), imag).unwrap(),
    }
}

/// Maps real embeddings to complex vectors, reading each embedding as a phase
/// and `mu` as its modulus.
pub fn euler_map(embedding: &Array2<f64>, mu: &Array2<f64>) -> Result<ComplexTensor> {
    if embedding.dim() != mu.dim() {
        return Err(Error::shape("euler_map", embedding.dim(), mu.dim()));
    }
    let (rows, dim) = embedding.dim();
    let e = embedding.as_standard_layout();
    let mu = mu.as_standard_layout();
    let mut real = vec![0.0; rows * dim];
    let mut imag = vec![0.0; rows * dim];
    kernels::euler_map(e.as_slice().unwrap(), mu.as_slice().unwrap(), &mut real, &mut imag);
    Ok(ComplexTensor {
        real: Array2::from_shape_vec((rows, dim), real).unwrap(),
        imag: Array2::from_shape_vec((rows, dim), imag).unwrap(),
    })
}

/// Linear mixing in the polar domain: row `k` of `orders` gives the exponents
/// of output feature `k`.
///
/// `phase_out[k] = sum_j orders[k,j] * phase[j] + delta[k]` and
/// `modulus_out[k] = exp(sum_j orders[k,j] * ln modulus[j] + delta_log_mod[k])`.
/// Output phases are not wrapped.
pub fn polar_mix(
    p: &PolarTensor,
    orders: &Array2<f64>,
    delta: &Array2<f64>,
    delta_log_mod: &Array2<f64>,
) -> Result<PolarTensor> {
    let (m, d) = p.dim();
    let (n, m_orders) = orders.dim();
    if m_orders != m {
        return Err(Error::shape("polar_mix orders", (n, m), orders.dim()));
    }
    for (name, bias) in [("delta", delta), ("delta_log_mod", delta_log_mod)] {
        if bias.dim() != (n, d) {
            return Err(Error::shape(format!("polar_mix {name}"), (n, d), bias.dim()));
        }
    }
    let orders = orders.as_standard_layout();
    let delta = delta.as_standard_layout();
    let delta_log_mod = delta_log_mod.as_standard_layout();
    let shape = kernels::MixShape { m, n, d };

    let mut phase = vec![0.0; n * d];
    kernels::mix_phase(
        shape,
        slice(&p.phase),
        orders.as_slice().unwrap(),
        delta.as_slice().unwrap(),
        &mut phase,
    );
    let mut modulus = vec![0.0; n * d];
    kernels::mix_modulus(
        shape,
        slice(&p.modulus),
        orders.as_slice().unwrap(),
        delta_log_mod.as_slice().unwrap(),
        &mut modulus,
    )?;
    Ok(PolarTensor {
        modulus: Array2::from_shape_vec((n, d), modulus).unwrap(),
        phase: Array2::from_shape_vec((n, d), phase).unwrap(),
    })
}

/// Reference product `prod_j c_j^{alpha_j}` evaluated elementwise with
/// principal-branch complex powers.
///
/// Shares no code with [`polar_mix`]; it is the oracle the polar pipeline is
/// checked against.
pub fn complex_power_oracle(c: &ComplexTensor, alpha: &[f64]) -> Result<ComplexTensor> {
    let (m, d) = c.dim();
    if alpha.len() != m {
        return Err(Error::shape("complex_power_oracle alpha", m, alpha.len()));
    }
    let mut real = Array2::zeros((1, d));
    let mut imag = Array2::zeros((1, d));
    for col in 0..d {
        let mut acc = Complex64::new(1.0, 0.0);
        for (j, &a) in alpha.iter().enumerate() {
            let z = c.get(j, col);
            if z.re == 0.0 && z.im == 0.0 {
                return Err(Error::OriginPower { feature: j, dim: col });
            }
            acc *= z.powf(a);
        }
        real[[0, col]] = acc.re;
        imag[[0, col]] = acc.im;
    }
    Ok(ComplexTensor { real, imag })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn c(real: Array2<f64>, imag: Array2<f64>) -> ComplexTensor {
        ComplexTensor::new(real, imag).unwrap()
    }

    #[test]
    fn to_polar_examples() {
        let p = to_polar(&c(array![[1.0, -8.0, 0.0]], array![[0.0, 1.0, 0.0]]));
        assert_eq!(p.modulus()[[0, 0]], 1.0);
        assert_eq!(p.phase()[[0, 0]], 0.0);
        assert!((p.modulus()[[0, 1]] - 65f64.sqrt()).abs() < 1e-12);
        assert!((p.modulus()[[0, 1]] - 8.06226).abs() < 1e-5);
        assert!((p.phase()[[0, 1]] - 3.017_237_659).abs() < 1e-9);
        assert_eq!(p.modulus()[[0, 2]], MOD_EPS);
        assert_eq!(p.phase()[[0, 2]], 0.0);
    }

    #[test]
    fn to_polar_phase_range() {
        let p = to_polar(&c(array![[-1.0, -1.0]], array![[0.0, -0.0]]));
        for &ph in p.phase() {
            assert!(ph > -PI && ph <= PI, "{ph}");
        }
        assert_eq!(p.phase()[[0, 0]], PI);
        assert_eq!(p.phase()[[0, 1]], PI);
    }

    #[test]
    fn from_polar_examples() {
        let r = from_polar(&PolarTensor::new(array![[1.0, 2.0]], array![[0.0, FRAC_PI_2]]).unwrap());
        assert_eq!(r.real()[[0, 0]], 1.0);
        assert_eq!(r.imag()[[0, 0]], 0.0);
        assert!(r.real()[[0, 1]].abs() < 1e-12);
        assert_eq!(r.imag()[[0, 1]], 2.0);
    }

    #[test]
    fn euler_map_examples() {
        let r = euler_map(&array![[0.0, FRAC_PI_2, 0.7]], &array![[1.0, 2.0, -1.5]]).unwrap();
        assert_eq!((r.real()[[0, 0]], r.imag()[[0, 0]]), (1.0, 0.0));
        assert!(r.real()[[0, 1]].abs() < 1e-15);
        assert_eq!(r.imag()[[0, 1]], 2.0);
        let norm = r.real()[[0, 2]].powi(2) + r.imag()[[0, 2]].powi(2);
        assert!((norm - 2.25).abs() / 2.25 < 1e-12);
        assert!(euler_map(&array![[0.0]], &array![[1.0, 1.0]]).is_err());
    }

    #[test]
    fn one_hot_mix_selects_feature() {
        let p = PolarTensor::new(array![[2.0, 0.5], [3.0, 4.0]], array![[0.3, -1.0], [2.0, 0.1]]).unwrap();
        let zeros = Array2::zeros((1, 2));
        let out = polar_mix(&p, &array![[1.0, 0.0]], &zeros, &zeros).unwrap();
        assert_eq!(out.modulus().row(0), p.modulus().row(0));
        assert_eq!(out.phase().row(0), p.phase().row(0));
    }

    #[test]
    fn unit_orders_multiply() {
        let p = PolarTensor::new(array![[2.0, 0.5], [3.0, 4.0]], array![[0.3, -1.0], [2.0, 0.1]]).unwrap();
        let zeros = Array2::zeros((1, 2));
        let out = polar_mix(&p, &array![[1.0, 1.0]], &zeros, &zeros).unwrap();
        for col in 0..2 {
            let want = p.modulus()[[0, col]] * p.modulus()[[1, col]];
            assert!((out.modulus()[[0, col]] - want).abs() < 1e-12 * want);
            let want = p.phase()[[0, col]] + p.phase()[[1, col]];
            assert!((out.phase()[[0, col]] - want).abs() < 1e-15);
        }
    }

    #[test]
    fn mix_overflow_names_index() {
        let p = PolarTensor::new(array![[1.0, 1e300]], array![[0.0, 0.0]]).unwrap();
        let zeros = Array2::zeros((2, 2));
        let err = polar_mix(&p, &array![[1.0], [2.0]], &zeros, &zeros).unwrap_err();
        assert!(matches!(err, Error::Overflow { row: 1, dim: 1 }), "{err}");
    }

    #[test]
    fn mix_output_phase_not_wrapped() {
        let p = PolarTensor::new(array![[1.0], [1.0]], array![[3.0], [3.0]]).unwrap();
        let zeros = Array2::zeros((1, 1));
        let out = polar_mix(&p, &array![[1.0, 1.0]], &zeros, &zeros).unwrap();
        assert_eq!(out.phase()[[0, 0]], 6.0);
    }

    #[test]
    fn oracle_rejects_origin() {
        let t = c(array![[0.0], [1.0]], array![[0.0], [0.0]]);
        assert!(matches!(
            complex_power_oracle(&t, &[1.0, 1.0]),
            Err(Error::OriginPower { feature: 0, dim: 0 })
        ));
    }

    #[test]
    fn oracle_identity_for_unit_power() {
        let t = c(array![[-0.3, 2.0]], array![[1.1, -0.4]]);
        let out = complex_power_oracle(&t, &[1.0]).unwrap();
        for col in 0..2 {
            assert!((out.real()[[0, col]] - t.real()[[0, col]]).abs() < 1e-14);
            assert!((out.imag()[[0, col]] - t.imag()[[0, col]]).abs() < 1e-14);
        }
    }

    // e1 = [-8, 1], e2 = [-16, 4], exponents (0.33, 0.25).
    #[test]
    fn worked_example_oracle_and_polar_route() {
        let t = c(array![[-8.0, 1.0], [-16.0, 4.0]], Array2::zeros((2, 2)));
        let want_re = [-0.99, 1.41];
        let want_im = [3.85, 0.0];

        let oracle = complex_power_oracle(&t, &[0.33, 0.25]).unwrap();
        let zeros = Array2::zeros((1, 2));
        let polar = from_polar(&polar_mix(&to_polar(&t), &array![[0.33, 0.25]], &zeros, &zeros).unwrap());
        for out in [&oracle, &polar] {
            for col in 0..2 {
                assert!((out.real()[[0, col]] - want_re[col]).abs() < 0.01);
                assert!((out.imag()[[0, col]] - want_im[col]).abs() < 0.01);
            }
        }
        for col in 0..2 {
            assert!((oracle.real()[[0, col]] - polar.real()[[0, col]]).abs() < 1e-12);
            assert!((oracle.imag()[[0, col]] - polar.imag()[[0, col]]).abs() < 1e-12);
        }
    }
}
