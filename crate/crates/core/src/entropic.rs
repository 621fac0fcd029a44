//! Evaluation of the entropic witnesses on observed behaviors.
//!
//! For one copy of the input the bound is `I(X:Y,B) ≤ H(M)`. With the
//! preparation split into a tuple `(X_1, …, X_l)` and `B_i` the outcome of
//! measurement `i`, the general form is
//! `Σ I(X_i:B_i) + Σ_{i≥2} I(X_1:X_i|B_i) − Σ H(X_i) + H(X_1…X_l) ≤ H(M)`,
//! which also bounds the von Neumann entropy of a quantum message.

use serde::{Deserialize, Serialize};

use crate::cone::{JointTable, Mask};
use crate::error::{Error, Result};
use crate::rational::to_f64;
use crate::scenario::Behavior;

/// Joint distribution of the input tuple, given as one tuple per
/// preparation plus the preparation weights. Tuples that no preparation
/// maps to carry probability zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputJoint {
    tuples: Vec<Vec<usize>>,
    weights: Vec<f64>,
}

impl InputJoint {
    pub fn new(tuples: Vec<Vec<usize>>, weights: Vec<f64>) -> Result<Self> {
        if tuples.is_empty() || tuples.len() != weights.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} tuples but {} weights",
                tuples.len(),
                weights.len()
            )));
        }
        let l = tuples[0].len();
        if l == 0 || tuples.iter().any(|t| t.len() != l) {
            return Err(Error::DimensionMismatch("input tuples must share a nonzero length".into()));
        }
        let mut sorted = tuples.clone();
        sorted.sort();
        sorted.dedup();
        if sorted.len() != tuples.len() {
            return Err(Error::DimensionMismatch("two preparations map to the same input tuple".into()));
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) || (weights.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidDistribution("tuple weights must be a probability vector".into()));
        }
        Ok(Self { tuples, weights })
    }

    /// Each preparation is its own single-component tuple.
    pub fn plain(weights: Vec<f64>) -> Result<Self> {
        Self::new((0..weights.len()).map(|x| vec![x]).collect(), weights)
    }

    /// `n` preparations over `n − 1` dichotomic components: the first
    /// preparation is the all-zero tuple and preparation `j ≥ 1` sets
    /// component `n − 1 − j` (zero-based) to one. Uniform weights.
    pub fn one_hot(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidScenario("one-hot joint needs n >= 2".into()));
        }
        let l = n - 1;
        let tuples = (0..n)
            .map(|x| {
                let mut t = vec![0; l];
                if x > 0 {
                    t[l - x] = 1;
                }
                t
            })
            .collect();
        Self::new(tuples, vec![1.0 / n as f64; n])
    }

    pub fn len(&self) -> usize {
        self.tuples[0].len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn tuples(&self) -> &[Vec<usize>] {
        &self.tuples
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    fn cards(&self) -> Vec<usize> {
        (0..self.len()).map(|i| self.tuples.iter().map(|t| t[i] + 1).max().unwrap_or(1).max(2)).collect()
    }

    /// Joint table over `(X_1, …, X_l, B)` with `B` the outcome of
    /// measurement `y`.
    fn with_outcome(&self, b: &Behavior, y: usize) -> Result<JointTable> {
        let s = b.scenario();
        if self.tuples.len() != s.n() {
            return Err(Error::DimensionMismatch(format!(
                "{} input tuples for {} preparations",
                self.tuples.len(),
                s.n()
            )));
        }
        let mut cards = self.cards();
        let l = cards.len();
        cards.push(s.k());
        let size: usize = cards.iter().product();
        let mut probs = vec![0.0; size];
        for (x, t) in self.tuples.iter().enumerate() {
            let base = t.iter().zip(&cards).fold(0, |acc, (&v, &c)| acc * c + v);
            for bb in 0..s.k() {
                probs[base * cards[l] + bb] += self.weights[x] * to_f64(b.p(x, y, bb));
            }
        }
        JointTable::new(cards, probs)
    }
}

/// Value of an entropic witness with its individual terms.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EntropicBound {
    /// Left-hand side in bits; a lower bound on `H(M)` and on `S(ρ)`.
    pub lhs: f64,
    pub terms: Vec<(String, f64)>,
    pub statement: String,
}

/// `I(X:Y,B)` with `p(x)` from `weights` and `p(y)` from the scenario.
pub fn holevo_bound(b: &Behavior, weights: &[f64]) -> Result<EntropicBound> {
    let s = b.scenario();
    if weights.len() != s.n() {
        return Err(Error::DimensionMismatch(format!("{} weights for {} preparations", weights.len(), s.n())));
    }
    let (n, l, k) = (s.n(), s.l(), s.k());
    let py: Vec<f64> = s.measurement_weights().iter().map(to_f64).collect();
    let mut probs = vec![0.0; n * l * k];
    for x in 0..n {
        for y in 0..l {
            for bb in 0..k {
                probs[(x * l + y) * k + bb] = weights[x] * py[y] * to_f64(b.p(x, y, bb));
            }
        }
    }
    let joint = JointTable::new(vec![n, l, k], probs)?;
    let lhs = joint.mutual_info(0b001, 0b110, 0);
    Ok(EntropicBound {
        lhs,
        terms: vec![("I(X:Y,B)".into(), lhs)],
        statement: format!("I(X:Y,B) = {lhs:.12} <= H(M)"),
    })
}

/// The pairwise inequality `I(X_a:B_a) + I(X_c:B_c) + I(X_a:X_c|B_a) − I(X_a:X_c) ≤ H(M)`
/// for components `a ≠ c` of the joint, with `B_i` the outcome of measurement `i`.
pub fn pairwise_bound(b: &Behavior, joint: &InputJoint, a: usize, c: usize) -> Result<EntropicBound> {
    let l = joint.len();
    if a == c || a >= l || c >= l {
        return Err(Error::OutOfRange(format!("components {a}, {c} of a {l}-tuple")));
    }
    check_measurements(b, l)?;
    let ta = joint.with_outcome(b, a)?;
    let tc = joint.with_outcome(b, c)?;
    let bit = |i: usize| -> Mask { 1 << i };
    let out = bit(l);
    let name = |i: usize| format!("X{}", i + 1);
    let meas = |i: usize| format!("B{}", i + 1);
    let terms = vec![
        (format!("I({}:{})", name(a), meas(a)), ta.mutual_info(bit(a), out, 0)),
        (format!("I({}:{})", name(c), meas(c)), tc.mutual_info(bit(c), out, 0)),
        (format!("I({}:{}|{})", name(a), name(c), meas(a)), ta.mutual_info(bit(a), bit(c), out)),
        (format!("-I({}:{})", name(a), name(c)), -ta.mutual_info(bit(a), bit(c), 0)),
    ];
    Ok(finish(terms))
}

/// The general tuple inequality; a one-component joint gives `I(X:Y,B)`
/// with `p(y)` from the scenario.
pub fn evaluate_entropic_witness(b: &Behavior, joint: &InputJoint) -> Result<EntropicBound> {
    let l = joint.len();
    if l == 1 {
        return holevo_bound(b, joint.weights());
    }
    check_measurements(b, l)?;
    let tables: Vec<JointTable> = (0..l).map(|i| joint.with_outcome(b, i)).collect::<Result<_>>()?;
    let bit = |i: usize| -> Mask { 1 << i };
    let out = bit(l);
    let all_x: Mask = (1 << l) - 1;
    let mut terms = Vec::new();
    for (i, t) in tables.iter().enumerate() {
        terms.push((format!("I(X{}:B{})", i + 1, i + 1), t.mutual_info(bit(i), out, 0)));
    }
    for (i, t) in tables.iter().enumerate().skip(1) {
        terms.push((format!("I(X1:X{}|B{})", i + 1, i + 1), t.mutual_info(bit(0), bit(i), out)));
    }
    for i in 0..l {
        terms.push((format!("-H(X{})", i + 1), -tables[0].entropy(bit(i))));
    }
    let names: Vec<String> = (1..=l).map(|i| format!("X{i}")).collect();
    terms.push((format!("H({})", names.join(",")), tables[0].entropy(all_x)));
    Ok(finish(terms))
}

fn check_measurements(b: &Behavior, l: usize) -> Result<()> {
    if b.scenario().l() < l {
        return Err(Error::DimensionMismatch(format!(
            "{l} input components need {l} measurements, behavior has {}",
            b.scenario().l()
        )));
    }
    Ok(())
}

fn finish(terms: Vec<(String, f64)>) -> EntropicBound {
    let lhs: f64 = terms.iter().map(|(_, v)| v).sum();
    EntropicBound { lhs, statement: format!("{lhs:.12} <= H(M)"), terms }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{int, rat};
    use crate::scenario::Scenario;
    use crate::strategies::DeterministicStrategy;
    use crate::witness::make_in;

    fn max_in_behavior(n: usize) -> Behavior {
        let w = make_in(n).unwrap();
        let g: Vec<usize> = (0..n).collect();
        let (f, value) = w.best_response(&g, n);
        assert_eq!(value, *w.bound(n).unwrap());
        DeterministicStrategy::new(n, g, f).unwrap().behavior(w.scenario()).unwrap()
    }

    #[test]
    fn independent_outcomes_give_zero() {
        let s = Scenario::new(3, 2, 2).unwrap();
        let b = Behavior::uniform(s.clone());
        let j = InputJoint::one_hot(3).unwrap();
        assert!(evaluate_entropic_witness(&b, &j).unwrap().lhs.abs() < 1e-12);
        let p = InputJoint::plain(vec![1.0 / 3.0; 3]).unwrap();
        assert!(evaluate_entropic_witness(&b, &p).unwrap().lhs.abs() < 1e-12);
    }

    #[test]
    fn perfect_channel() {
        let s = Scenario::new(4, 1, 4).unwrap();
        let b = Behavior::from_fn(s.clone(), |x, _, bb| if x == bb { int(1) } else { int(0) }).unwrap();
        let lhs = holevo_bound(&b, &[0.25; 4]).unwrap().lhs;
        assert!((lhs - 2.0).abs() < 1e-12);
    }

    #[test]
    fn maximal_in_needs_full_entropy() {
        for n in [3, 4, 5] {
            let b = max_in_behavior(n);
            let lhs = evaluate_entropic_witness(&b, &InputJoint::one_hot(n).unwrap()).unwrap().lhs;
            assert!(lhs >= (n as f64).log2() - 1e-9, "n={n}: {lhs}");
        }
    }

    #[test]
    fn general_form_matches_pairwise_with_roles_swapped() {
        let s = Scenario::new(3, 2, 2).unwrap();
        let b = Behavior::from_fn(s.clone(), |x, y, bb| {
            let p0 = rat((x + 2 * y + 1) as i64, 7);
            if bb == 0 {
                p0
            } else {
                int(1) - p0
            }
        })
        .unwrap();
        let j = InputJoint::one_hot(3).unwrap();
        let general = evaluate_entropic_witness(&b, &j).unwrap().lhs;
        let pair = pairwise_bound(&b, &j, 1, 0).unwrap().lhs;
        assert!((general - pair).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_joints() {
        assert!(InputJoint::new(vec![vec![0], vec![0]], vec![0.5, 0.5]).is_err());
        assert!(InputJoint::new(vec![vec![0], vec![1, 0]], vec![0.5, 0.5]).is_err());
        assert!(InputJoint::new(vec![vec![0], vec![1]], vec![0.5, 0.6]).is_err());
        let s = Scenario::new(3, 1, 2).unwrap();
        let b = Behavior::uniform(s.clone());
        assert!(evaluate_entropic_witness(&b, &InputJoint::one_hot(3).unwrap()).is_err());
        assert!(pairwise_bound(&b, &InputJoint::one_hot(3).unwrap(), 0, 0).is_err());
    }
}
