use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Upper bound on pattern terms; deviation matching is exponential in it.
pub const MAX_TERMS: usize = 16;
const VALIDATION_SAMPLES: usize = 2000;

/// `weight * prod_i p_i^exponents[i]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PatternTerm {
    pub weight: f64,
    pub exponents: Vec<f64>,
}

impl PatternTerm {
    pub fn new(weight: f64, exponents: Vec<f64>) -> Self {
        Self { weight, exponents }
    }

    fn eval(&self, p: &[f64]) -> f64 {
        self.weight
            * self
                .exponents
                .iter()
                .zip(p)
                .map(|(&a, &pi)| pi.powf(a))
                .product::<f64>()
    }
}

/// A click probability as a weighted sum of monomials in per-field feature
/// probabilities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawPattern", into = "RawPattern")]
pub struct SyntheticPattern {
    name: String,
    terms: Vec<PatternTerm>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPattern {
    name: String,
    terms: Vec<PatternTerm>,
}

impl TryFrom<RawPattern> for SyntheticPattern {
    type Error = Error;

    fn try_from(raw: RawPattern) -> Result<Self> {
        Self::new(raw.name, raw.terms)
    }
}

impl From<SyntheticPattern> for RawPattern {
    fn from(p: SyntheticPattern) -> Self {
        Self {
            name: p.name,
            terms: p.terms,
        }
    }
}

impl SyntheticPattern {
    /// Checks arity and finiteness, then samples the unit cube to confirm the
    /// output stays within [0, 1].
    pub fn new(name: impl Into<String>, terms: Vec<PatternTerm>) -> Result<Self> {
        let name = name.into();
        let bad = |msg: String| Err(Error::InvalidArgument(format!("pattern `{name}`: {msg}")));
        if terms.is_empty() || terms.len() > MAX_TERMS {
            return bad(format!("needs 1..={MAX_TERMS} terms, got {}", terms.len()));
        }
        let m = terms[0].exponents.len();
        if m == 0 {
            return bad("terms need at least one exponent".into());
        }
        for (k, t) in terms.iter().enumerate() {
            if t.exponents.len() != m {
                return bad(format!("term {k} has {} exponents, expected {m}", t.exponents.len()));
            }
            if !t.weight.is_finite() || t.weight < 0.0 || t.exponents.iter().any(|a| !a.is_finite()) {
                return bad(format!("term {k} has a negative or non-finite coefficient"));
            }
        }
        let pattern = Self { name, terms };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut p = vec![1.0; m];
        for s in 0..=VALIDATION_SAMPLES {
            if s > 0 {
                p.iter_mut().for_each(|v| *v = 1.0 - rng.random::<f64>());
            }
            let raw = pattern.raw_value(&p);
            if !(0.0..=1.0 + 1e-12).contains(&raw) {
                return Err(Error::InvalidArgument(format!(
                    "pattern `{}` evaluates to {raw} at {p:?}, outside [0, 1]",
                    pattern.name
                )));
            }
        }
        Ok(pattern)
    }

    /// `R1`, `R2` or `R3`.
    pub fn builtin(name: &str) -> Result<Self> {
        let t = PatternTerm::new;
        let terms = match name {
            "R1" => vec![t(1.0, vec![0.3, 0.0, 1.7, 2.5, 0.0, 0.0, 0.0])],
            "R2" => vec![
                t(0.5, vec![1.7, 1.7, 0.0, 0.0, 0.0, 0.0, 0.0]),
                t(0.5, vec![0.0, 0.0, 0.5, 2.5, 0.0, 0.0, 0.0]),
            ],
            "R3" => vec![
                t(1.0 / 3.0, vec![1.3, 0.0, 2.2, 0.0, 1.7, 0.0, 0.0]),
                t(1.0 / 3.0, vec![0.0, 0.5, 0.0, 0.5, 0.0, 0.5, 0.0]),
                t(1.0 / 3.0, vec![0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0]),
            ],
            other => {
                return Err(Error::InvalidArgument(format!(
                    "unknown pattern `{other}` (built-ins: R1, R2, R3)"
                )))
            }
        };
        Self::new(name, terms)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn terms(&self) -> &[PatternTerm] {
        &self.terms
    }

    pub fn num_fields(&self) -> usize {
        self.terms[0].exponents.len()
    }

    fn raw_value(&self, p: &[f64]) -> f64 {
        self.terms.iter().map(|t| t.eval(p)).sum()
    }
}

/// Planted click probability for per-field feature probabilities `p`,
/// clamped to [0, 1].
pub fn ground_truth_prob(pattern: &SyntheticPattern, p: &[f64]) -> Result<f64> {
    if p.len() != pattern.num_fields() {
        return Err(Error::shape("pattern input", pattern.num_fields(), p.len()));
    }
    if let Some(bad) = p.iter().find(|&&v| !(v > 0.0)) {
        return Err(Error::InvalidArgument(format!(
            "feature probabilities must be positive, got {bad}"
        )));
    }
    Ok(pattern.raw_value(p).clamp(0.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn at(pattern: &str, p: &[f64]) -> f64 {
        ground_truth_prob(&SyntheticPattern::builtin(pattern).unwrap(), p).unwrap()
    }

    #[test]
    fn builtin_values() {
        assert_eq!(at("R1", &[1.0, 0.3, 1.0, 1.0, 0.7, 0.2, 0.9]), 1.0);
        assert!((at("R3", &[1.0; 7]) - 1.0).abs() < 1e-15);
        let r2 = at("R2", &[0.5; 7]);
        let direct = 0.5 * (0.5f64.powf(3.4) + 0.5f64.powf(3.0));
        assert!((r2 - direct).abs() < 1e-15);
        assert!((r2 - 0.10987).abs() < 1e-5);
    }

    #[test]
    fn non_positive_input_rejected() {
        let r1 = SyntheticPattern::builtin("R1").unwrap();
        assert!(ground_truth_prob(&r1, &[0.5, 0.5, 0.0, 0.5, 0.5, 0.5, 0.5]).is_err());
        assert!(ground_truth_prob(&r1, &[0.5; 6]).is_err());
    }

    #[test]
    fn registration_rejects_out_of_range() {
        // weights summing above one exceed 1 at p = 1
        assert!(SyntheticPattern::new("heavy", vec![PatternTerm::new(0.7, vec![1.0, 0.0]); 2]).is_err());
        // negative exponents blow up near zero
        assert!(SyntheticPattern::new("neg", vec![PatternTerm::new(0.1, vec![-1.0, 0.0])]).is_err());
        assert!(SyntheticPattern::new(
            "ragged",
            vec![PatternTerm::new(0.5, vec![1.0, 0.0]), PatternTerm::new(0.5, vec![1.0]),]
        )
        .is_err());
        assert!(SyntheticPattern::builtin("R4").is_err());
        assert!(SyntheticPattern::new("ok", vec![PatternTerm::new(0.5, vec![1.0, 2.0])]).is_ok());
    }

    #[test]
    fn serde_validates() {
        let json = r#"{"name":"x","terms":[{"weight":2.0,"exponents":[1.0]}]}"#;
        assert!(serde_json::from_str::<SyntheticPattern>(json).is_err());
        let r3 = SyntheticPattern::builtin("R3").unwrap();
        let back: SyntheticPattern = serde_json::from_str(&serde_json::to_string(&r3).unwrap()).unwrap();
        assert_eq!(back, r3);
    }
}
