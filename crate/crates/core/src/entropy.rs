//! Shannon entropy of message and outcome distributions, in bits.

use num_traits::{Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rational::{self, Rational};

/// Absolute tolerance for float comparisons unless an operation says otherwise.
pub const FLOAT_TOL: f64 = 1e-9;

/// Tolerance on the normalization of float-valued distributions.
pub const FLOAT_NORM_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "values", rename_all = "lowercase")]
pub enum Weights {
    Exact(#[serde(with = "vec_rational")] Vec<Rational>),
    Float(Vec<f64>),
}

/// A probability vector over labelled messages or outcomes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Distribution {
    weights: Weights,
    labels: Vec<String>,
}

impl Distribution {
    pub fn exact(weights: Vec<Rational>) -> Result<Self> {
        let labels = (0..weights.len()).map(|i| i.to_string()).collect();
        Self::exact_labelled(weights, labels)
    }

    pub fn exact_labelled(weights: Vec<Rational>, labels: Vec<String>) -> Result<Self> {
        if labels.len() != weights.len() {
            return Err(Error::InvalidDistribution(format!(
                "{} labels for {} weights",
                labels.len(),
                weights.len()
            )));
        }
        if weights.is_empty() {
            return Err(Error::InvalidDistribution("empty distribution".into()));
        }
        if let Some((i, w)) = weights.iter().enumerate().find(|(_, w)| w.is_negative()) {
            return Err(Error::InvalidDistribution(format!(
                "negative weight {} at index {i}",
                rational::format_rational(w)
            )));
        }
        let total = rational::sum(&weights);
        if total != rational::int(1) {
            return Err(Error::InvalidDistribution(format!(
                "weights sum to {}",
                rational::format_rational(&total)
            )));
        }
        Ok(Self { weights: Weights::Exact(weights), labels })
    }

    pub fn float(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::InvalidDistribution("empty distribution".into()));
        }
        if let Some((i, w)) = weights.iter().enumerate().find(|(_, w)| !w.is_finite() || **w < 0.0) {
            return Err(Error::InvalidDistribution(format!("invalid weight {w} at index {i}")));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > FLOAT_NORM_TOL {
            return Err(Error::InvalidDistribution(format!("weights sum to {total}")));
        }
        let labels = (0..weights.len()).map(|i| i.to_string()).collect();
        Ok(Self { weights: Weights::Float(weights), labels })
    }

    /// Uniform distribution over `size` labels.
    pub fn uniform(size: usize) -> Result<Self> {
        if size == 0 {
            return Err(Error::InvalidDistribution("empty distribution".into()));
        }
        Self::exact(vec![rational::rat(1, size as i64); size])
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn weights(&self) -> &Weights {
        &self.weights
    }

    /// Exact weights, if this distribution carries them.
    pub fn exact_weights(&self) -> Option<&[Rational]> {
        match &self.weights {
            Weights::Exact(w) => Some(w),
            Weights::Float(_) => None,
        }
    }

    pub fn to_f64(&self) -> Vec<f64> {
        match &self.weights {
            Weights::Exact(w) => w.iter().map(rational::to_f64).collect(),
            Weights::Float(w) => w.clone(),
        }
    }

    /// Number of labels with nonzero weight.
    pub fn support_size(&self) -> usize {
        match &self.weights {
            Weights::Exact(w) => w.iter().filter(|x| !x.is_zero()).count(),
            Weights::Float(w) => w.iter().filter(|x| **x > 0.0).count(),
        }
    }

    /// Merges label `b` into label `a`, keeping `a`'s name.
    pub fn merge_labels(&self, a: usize, b: usize) -> Result<Self> {
        if a == b || a >= self.len() || b >= self.len() {
            return Err(Error::OutOfRange(format!("cannot merge labels {a} and {b}")));
        }
        let keep: Vec<usize> = (0..self.len()).filter(|&i| i != b).collect();
        let labels = keep.iter().map(|&i| self.labels[i].clone()).collect();
        let weights = match &self.weights {
            Weights::Exact(w) => Weights::Exact(
                keep.iter().map(|&i| if i == a { &w[a] + &w[b] } else { w[i].clone() }).collect(),
            ),
            Weights::Float(w) => {
                Weights::Float(keep.iter().map(|&i| if i == a { w[a] + w[b] } else { w[i] }).collect())
            }
        };
        Ok(Self { weights, labels })
    }
}

/// `-Σ p log₂ p` with `0·log 0 = 0`.
pub fn shannon_entropy(dist: &Distribution) -> f64 {
    entropy_bits(&dist.to_f64())
}

/// Entropy of a raw probability slice. No validation; zero and negative
/// entries contribute nothing.
pub fn entropy_bits(p: &[f64]) -> f64 {
    let h: f64 = p.iter().filter(|&&x| x > 0.0).map(|&x| -x * x.log2()).sum();
    // -0.0 for point masses reads badly in output files.
    if h <= 0.0 {
        0.0
    } else {
        h
    }
}

/// Entropy of an exact probability vector, evaluated in floating point.
pub fn entropy_exact(p: &[Rational]) -> f64 {
    let f: Vec<f64> = p.iter().map(rational::to_f64).collect();
    entropy_bits(&f)
}

/// `H_bin(x) = -x log₂ x - (1-x) log₂(1-x)`.
pub fn binary_entropy(x: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::OutOfRange(format!("binary entropy argument {x} outside [0, 1]")));
    }
    Ok(entropy_bits(&[x, 1.0 - x]))
}

mod vec_rational {
    use super::*;
    use serde::{Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &[Rational], s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_seq(v.iter().map(rational::format_rational))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Vec<Rational>, D::Error> {
        let raw: Vec<serde_json::Value> = Vec::deserialize(d)?;
        raw.iter()
            .map(|v| rational::serde_str::from_json(v).map_err(serde::de::Error::custom))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::rat;

    #[test]
    fn uniform_over_four_is_two_bits() {
        let d = Distribution::uniform(4).unwrap();
        assert!((shannon_entropy(&d) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn point_mass_is_zero() {
        let d = Distribution::exact(vec![rat(1, 1), rat(0, 1)]).unwrap();
        assert_eq!(shannon_entropy(&d), 0.0);
    }

    #[test]
    fn three_point_distribution() {
        let d = Distribution::exact(vec![rat(1, 3), rat(1, 2), rat(1, 6)]).unwrap();
        let direct = -(1.0f64 / 3.0) * (1.0f64 / 3.0).log2()
            - 0.5 * 0.5f64.log2()
            - (1.0f64 / 6.0) * (1.0f64 / 6.0).log2();
        assert!((shannon_entropy(&d) - direct).abs() < 1e-12);
        assert!((shannon_entropy(&d) - 1.459148).abs() < 1e-6);
    }

    #[test]
    fn binary_entropy_values() {
        assert_eq!(binary_entropy(0.5).unwrap(), 1.0);
        assert_eq!(binary_entropy(0.0).unwrap(), 0.0);
        assert_eq!(binary_entropy(1.0).unwrap(), 0.0);
        assert!((binary_entropy(0.25).unwrap() - 0.811278).abs() < 1e-6);
        assert!(binary_entropy(-0.1).is_err());
        assert!(binary_entropy(1.5).is_err());
    }

    #[test]
    fn rejects_invalid_distributions() {
        assert!(Distribution::exact(vec![rat(1, 2), rat(1, 3)]).is_err());
        assert!(Distribution::exact(vec![rat(3, 2), rat(-1, 2)]).is_err());
        assert!(Distribution::float(vec![0.5, 0.5 + 1e-9]).is_err());
        assert!(Distribution::float(vec![0.5, 0.5 + 1e-14]).is_ok());
        assert!(Distribution::float(vec![f64::NAN, 1.0]).is_err());
    }

    #[test]
    fn merging_labels_adds_weight() {
        let d = Distribution::exact(vec![rat(1, 2), rat(1, 3), rat(1, 6)]).unwrap();
        let m = d.merge_labels(1, 2).unwrap();
        assert_eq!(m.exact_weights().unwrap(), &[rat(1, 2), rat(1, 2)]);
        assert_eq!(m.labels(), &["0".to_string(), "1".to_string()]);
    }
}
