//! Deterministic classical strategies `(g, f)` and their convex mixtures.
//!
//! A strategy sends message `g(x) ∈ 0..d` on input `x` and answers
//! `f(y, m)` on measurement `y`. Its deterministic point is
//! `A[(x,y,b), λ] = [b = f(y, g(x))]` and its message marginal is
//! `B[m, λ] = Σ_x [m = g(x)] p(x)`.

use std::collections::HashSet;

use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::entropy::{entropy_exact, Distribution};
use crate::error::{Error, Result};
use crate::rational::{self, Rational};
use crate::scenario::{Behavior, Scenario};
use crate::witness::{self, LinearWitness};

/// Default cap on the number of strategies enumerated before deduplication.
pub const DEFAULT_STRATEGY_CAP: u128 = 10_000_000;

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DeterministicStrategy {
    pub d: usize,
    pub g: Vec<usize>,
    /// `f[y][m]`: outcome for measurement `y` given message `m`.
    pub f: Vec<Vec<usize>>,
}

impl DeterministicStrategy {
    pub fn new(d: usize, g: Vec<usize>, f: Vec<Vec<usize>>) -> Result<Self> {
        let s = Self { d, g, f };
        if d == 0 {
            return Err(Error::OutOfRange("message size d must be >= 1".into()));
        }
        if let Some(m) = s.g.iter().find(|&&m| m >= d) {
            return Err(Error::OutOfRange(format!("g sends message {m} but d = {d}")));
        }
        if s.f.iter().any(|row| row.len() != d) {
            return Err(Error::DimensionMismatch(format!("every f[y] must have {d} entries")));
        }
        Ok(s)
    }

    /// Checks that the strategy is total on the scenario's inputs and outcomes.
    pub fn check_compatible(&self, s: &Scenario) -> Result<()> {
        if self.g.len() != s.n() || self.f.len() != s.l() {
            return Err(Error::DimensionMismatch(format!(
                "strategy covers n={}, l={} but scenario has n={}, l={}",
                self.g.len(),
                self.f.len(),
                s.n(),
                s.l()
            )));
        }
        if self.f.iter().flatten().any(|&b| b >= s.k()) {
            return Err(Error::DimensionMismatch(format!("outcome outside 0..{}", s.k())));
        }
        Ok(())
    }

    #[inline]
    pub fn outcome(&self, x: usize, y: usize) -> usize {
        self.f[y][self.g[x]]
    }

    /// The deterministic point `A_λ` as a 0/1 behavior.
    pub fn behavior(&self, s: &Scenario) -> Result<Behavior> {
        self.check_compatible(s)?;
        Behavior::from_fn(s.clone(), |x, y, b| {
            if self.outcome(x, y) == b {
                Rational::one()
            } else {
                Rational::zero()
            }
        })
    }

    /// Message marginal `B_{·,λ}` under the scenario's input weights.
    pub fn marginal(&self, s: &Scenario) -> Vec<Rational> {
        let mut out = vec![Rational::zero(); self.d];
        for (x, &m) in self.g.iter().enumerate() {
            out[m] += &s.input_weights()[x];
        }
        out
    }

    /// Outcome table `o[x·l + y] = f(y, g(x))`; equal tables mean equal points.
    pub fn point_key(&self) -> Vec<u8> {
        let l = self.f.len();
        let mut key = Vec::with_capacity(self.g.len() * l);
        for x in 0..self.g.len() {
            for y in 0..l {
                key.push(self.outcome(x, y) as u8);
            }
        }
        key
    }

    /// Relabels messages by order of first appearance in `g`; unused labels
    /// go last and their outcomes are reset to 0.
    pub fn canonicalized(&self) -> Self {
        let mut map = vec![usize::MAX; self.d];
        let mut next = 0;
        for &m in &self.g {
            if map[m] == usize::MAX {
                map[m] = next;
                next += 1;
            }
        }
        let g = self.g.iter().map(|&m| map[m]).collect();
        let mut f = vec![vec![0; self.d]; self.f.len()];
        for (y, row) in self.f.iter().enumerate() {
            for (m, &b) in row.iter().enumerate() {
                if map[m] != usize::MAX {
                    f[y][map[m]] = b;
                }
            }
        }
        Self { d: self.d, g, f }
    }
}

/// `d^n · k^(l·d)`, or `None` on overflow.
pub fn strategy_count(s: &Scenario, d: usize) -> Option<u128> {
    let dn = (d as u128).checked_pow(s.n() as u32)?;
    let kl = (s.k() as u128).checked_pow((s.l() * d) as u32)?;
    dn.checked_mul(kl)
}

#[derive(Debug, Clone)]
pub struct EnumerationOptions {
    /// Maximum strategy count before deduplication.
    pub cap: u128,
    /// Keep one strategy per (deterministic point, message marginal) pair.
    pub dedup: bool,
}

impl Default for EnumerationOptions {
    fn default() -> Self {
        Self { cap: DEFAULT_STRATEGY_CAP, dedup: false }
    }
}

/// Odometer over `{0..radix}^len`.
pub(crate) struct Odometer {
    digits: Vec<usize>,
    radix: usize,
    done: bool,
}

impl Odometer {
    pub(crate) fn new(len: usize, radix: usize) -> Self {
        Self { digits: vec![0; len], radix, done: radix == 0 && len > 0 }
    }

    pub(crate) fn next(&mut self) -> Option<&[usize]> {
        if self.done {
            return None;
        }
        // Emit current, then advance lazily on the following call.
        self.done = true;
        Some(&self.digits)
    }

    pub(crate) fn advance(&mut self) {
        for d in self.digits.iter_mut().rev() {
            *d += 1;
            if *d < self.radix {
                self.done = false;
                return;
            }
            *d = 0;
        }
        self.done = true;
    }
}

/// Calls `visit` once per message function `g: 0..n → 0..d`.
pub(crate) fn for_each_message_map(n: usize, d: usize, mut visit: impl FnMut(&[usize])) {
    let mut odo = Odometer::new(n, d);
    while let Some(g) = odo.next() {
        visit(g);
        odo.advance();
    }
}

/// Enumerates deterministic strategies with message size `d`.
///
/// Without deduplication all `d^n · k^(l·d)` strategies are returned. With it,
/// answers on unused messages are fixed to 0 and strategies sharing both
/// their deterministic point and their message marginal are collapsed.
pub fn enumerate_strategies(
    s: &Scenario,
    d: usize,
    opts: &EnumerationOptions,
) -> Result<Vec<DeterministicStrategy>> {
    if d == 0 {
        return Err(Error::OutOfRange("message size d must be >= 1".into()));
    }
    let needed = strategy_count(s, d).unwrap_or(u128::MAX);
    if needed > opts.cap {
        return Err(Error::CapExceeded { what: format!("strategy enumeration (d={d})"), needed, cap: opts.cap });
    }
    let (l, k) = (s.l(), s.k());
    let mut out = Vec::new();
    let mut seen: HashSet<(Vec<u8>, Vec<Rational>)> = HashSet::new();
    for_each_message_map(s.n(), d, |g| {
        let used: Vec<usize> = if opts.dedup {
            let mut u: Vec<usize> = g.to_vec();
            u.sort_unstable();
            u.dedup();
            u
        } else {
            (0..d).collect()
        };
        let mut odo = Odometer::new(l * used.len(), k);
        while let Some(answers) = odo.next() {
            let mut f = vec![vec![0; d]; l];
            for y in 0..l {
                for (j, &m) in used.iter().enumerate() {
                    f[y][m] = answers[y * used.len() + j];
                }
            }
            let strat = DeterministicStrategy { d, g: g.to_vec(), f };
            if opts.dedup {
                if seen.insert((strat.point_key(), strat.marginal(s))) {
                    out.push(strat);
                }
            } else {
                out.push(strat);
            }
            odo.advance();
        }
    });
    Ok(out)
}

/// Convex combination `Σ q_λ λ` of deterministic strategies.
#[derive(Debug, Clone, PartialEq)]
pub struct StrategyMixture {
    strategies: Vec<DeterministicStrategy>,
    weights: Vec<Rational>,
}

impl StrategyMixture {
    pub fn new(strategies: Vec<DeterministicStrategy>, weights: Vec<Rational>) -> Result<Self> {
        if strategies.is_empty() || strategies.len() != weights.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} strategies with {} weights",
                strategies.len(),
                weights.len()
            )));
        }
        if weights.iter().any(|w| w.is_negative()) {
            return Err(Error::InvalidDistribution("negative mixture weight".into()));
        }
        if !rational::sum(&weights).is_one() {
            return Err(Error::InvalidDistribution("mixture weights do not sum to 1".into()));
        }
        Ok(Self { strategies, weights })
    }

    pub fn single(strategy: DeterministicStrategy) -> Self {
        Self { strategies: vec![strategy], weights: vec![Rational::one()] }
    }

    pub fn strategies(&self) -> &[DeterministicStrategy] {
        &self.strategies
    }

    pub fn weights(&self) -> &[Rational] {
        &self.weights
    }

    /// Largest message size among the components.
    pub fn message_size(&self) -> usize {
        self.strategies.iter().map(|s| s.d).max().unwrap_or(1)
    }
}

/// `p(b|x,y) = Σ_λ q_λ [b = f_λ(y, g_λ(x))]`, exactly.
pub fn behavior_from_mixture(mix: &StrategyMixture, s: &Scenario) -> Result<Behavior> {
    let mut table = vec![Rational::zero(); s.table_len()];
    for (strat, q) in mix.strategies.iter().zip(&mix.weights) {
        strat.check_compatible(s)?;
        for x in 0..s.n() {
            for y in 0..s.l() {
                table[s.index(x, y, strat.outcome(x, y))] += q;
            }
        }
    }
    Behavior::new(s.clone(), table)
}

/// `p(m) = Σ_λ q_λ Σ_x [m = g_λ(x)] p(x)` over `0..max d`.
pub fn message_marginal(mix: &StrategyMixture, s: &Scenario) -> Result<Distribution> {
    let d = mix.message_size();
    let mut p = vec![Rational::zero(); d];
    for (strat, q) in mix.strategies.iter().zip(&mix.weights) {
        strat.check_compatible(s)?;
        for (m, b) in strat.marginal(s).into_iter().enumerate() {
            p[m] += b * q;
        }
    }
    Distribution::exact(p)
}

/// Data with vanishing message entropy that still needs a large alphabet.
#[derive(Debug, Clone)]
pub struct ZeroEntropyExample {
    pub d: usize,
    pub strategy: DeterministicStrategy,
    pub behavior: Behavior,
    pub witness: LinearWitness,
    pub witness_value: Rational,
    /// Classical bound `L_d` that the witness value exceeds.
    pub bound: Rational,
    pub marginal: Distribution,
    pub entropy: f64,
}

/// `(2/d) log₂ d − (1 − 1/d) log₂(1 − 1/d)`.
pub fn zero_entropy_closed_form(d: usize) -> f64 {
    let d = d as f64;
    let q = 1.0 - 1.0 / d;
    (2.0 / d) * d.log2() - q * q.log2()
}

/// Largest `d` accepted by [`zero_entropy_example`] (n = d² preparations).
pub const ZERO_ENTROPY_MAX_D: usize = 12;

/// Builds the example with `n = d²` preparations and `l = n − 1` binary
/// measurements: inputs `x < d` get their own message `x + 1`, all other
/// inputs share message `0`. Each answer `f(y, m)` maximizes the `I_n`
/// terms seen by message `m` at measurement `y`.
pub fn zero_entropy_example(d: usize) -> Result<ZeroEntropyExample> {
    if d < 2 {
        return Err(Error::OutOfRange(format!("zero-entropy example needs d >= 2, got {d}")));
    }
    if d > ZERO_ENTROPY_MAX_D {
        return Err(Error::CapExceeded {
            what: "zero-entropy example size".into(),
            needed: d as u128,
            cap: ZERO_ENTROPY_MAX_D as u128,
        });
    }
    let n = d * d;
    let witness = witness::make_in(n)?;
    let s = witness.scenario().clone();
    let g: Vec<usize> = (0..n).map(|x| if x < d { x + 1 } else { 0 }).collect();
    let (f, _) = witness.best_response(&g, d + 1);
    let strategy = DeterministicStrategy::new(d + 1, g, f)?;
    let behavior = strategy.behavior(&s)?;
    let witness_value = witness.evaluate(&behavior)?;
    let bound = witness
        .bound(d)
        .cloned()
        .ok_or_else(|| Error::OutOfRange(format!("no bound L_{d} for I_{n}")))?;
    let marginal = message_marginal(&StrategyMixture::single(strategy.clone()), &s)?;
    let entropy = entropy_exact(marginal.exact_weights().expect("exact marginal"));
    Ok(ZeroEntropyExample { d, strategy, behavior, witness, witness_value, bound, marginal, entropy })
}

/// One JSON line per strategy: `{"d":..,"g":[..],"f":[[..]]}`.
pub fn strategies_to_json_lines(strategies: &[DeterministicStrategy]) -> String {
    let mut out = String::new();
    for s in strategies {
        out.push_str(&serde_json::to_string(s).expect("strategy serializes"));
        out.push('\n');
    }
    out
}

pub fn strategies_from_json_lines(text: &str) -> Result<Vec<DeterministicStrategy>> {
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            let raw: DeterministicStrategy = serde_json::from_str(l)?;
            DeterministicStrategy::new(raw.d, raw.g, raw.f)
        })
        .collect()
}
