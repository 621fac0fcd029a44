//! Prepare-and-measure scenarios and the behaviors `p(b|x,y)` they produce.
//!
//! Indices are zero-based throughout: preparations `x ∈ 0..n`, measurements
//! `y ∈ 0..l`, outcomes `b ∈ 0..k`.

use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::rational::{self, format_rational, Rational};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Scenario {
    n: usize,
    l: usize,
    k: usize,
    input_weights: Vec<Rational>,
    measurement_weights: Vec<Rational>,
}

impl Scenario {
    /// Scenario with uniform input and measurement weights.
    pub fn new(n: usize, l: usize, k: usize) -> Result<Self> {
        if n == 0 || l == 0 {
            return Err(Error::InvalidScenario(format!("need n >= 1 and l >= 1, got n={n}, l={l}")));
        }
        let px = vec![rational::rat(1, n as i64); n];
        let py = vec![rational::rat(1, l as i64); l];
        Self::with_weights(n, l, k, px, py)
    }

    pub fn with_weights(
        n: usize,
        l: usize,
        k: usize,
        input_weights: Vec<Rational>,
        measurement_weights: Vec<Rational>,
    ) -> Result<Self> {
        if n == 0 || l == 0 || k < 2 {
            return Err(Error::InvalidScenario(format!(
                "need n >= 1, l >= 1, k >= 2; got n={n}, l={l}, k={k}"
            )));
        }
        check_weights("p(x)", &input_weights, n)?;
        check_weights("p(y)", &measurement_weights, l)?;
        Ok(Self { n, l, k, input_weights, measurement_weights })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn l(&self) -> usize {
        self.l
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn input_weights(&self) -> &[Rational] {
        &self.input_weights
    }

    pub fn measurement_weights(&self) -> &[Rational] {
        &self.measurement_weights
    }

    /// Length `n·l·k` of the flattened behavior vector.
    pub fn table_len(&self) -> usize {
        self.n * self.l * self.k
    }

    #[inline]
    pub fn index(&self, x: usize, y: usize, b: usize) -> usize {
        (x * self.l + y) * self.k + b
    }

    /// Same `(n, l, k)` shape, ignoring the weights.
    pub fn same_shape(&self, other: &Scenario) -> bool {
        self.n == other.n && self.l == other.l && self.k == other.k
    }

    pub fn has_uniform_inputs(&self) -> bool {
        let u = rational::rat(1, self.n as i64);
        self.input_weights.iter().all(|w| *w == u)
    }
}

fn check_weights(name: &str, w: &[Rational], len: usize) -> Result<()> {
    if w.len() != len {
        return Err(Error::InvalidScenario(format!("{name} has {} entries, expected {len}", w.len())));
    }
    if w.iter().any(|v| v.is_negative()) {
        return Err(Error::InvalidScenario(format!("{name} has a negative entry")));
    }
    if !rational::sum(w).is_one() {
        return Err(Error::InvalidScenario(format!("{name} does not sum to 1")));
    }
    Ok(())
}

/// One failed check reported by [`validate_behavior`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    Negative { x: usize, y: usize, b: usize, value: Rational },
    AboveOne { x: usize, y: usize, b: usize, value: Rational },
    Normalization { x: usize, y: usize, sum: Rational },
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Violation::Negative { x, y, b, value } => {
                write!(f, "p(b={b}|x={x},y={y}) = {} is negative", format_rational(value))
            }
            Violation::AboveOne { x, y, b, value } => {
                write!(f, "p(b={b}|x={x},y={y}) = {} exceeds 1", format_rational(value))
            }
            Violation::Normalization { x, y, sum } => {
                write!(f, "row (x={x},y={y}) sums to {}", format_rational(sum))
            }
        }
    }
}

/// Conditional probabilities `p(b|x,y)` stored flat, `(x, y, b)` row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Behavior {
    scenario: Scenario,
    table: Vec<Rational>,
}

impl Behavior {
    /// Checks shape and every normalization/positivity invariant.
    pub fn new(scenario: Scenario, table: Vec<Rational>) -> Result<Self> {
        let b = Self::unchecked(scenario, table)?;
        let violations = validate_behavior(&b);
        if !violations.is_empty() {
            let msg: Vec<String> = violations.iter().map(|v| v.to_string()).collect();
            return Err(Error::InvalidBehavior(msg.join("; ")));
        }
        Ok(b)
    }

    /// Checks only the table length; use [`validate_behavior`] to inspect it.
    pub fn unchecked(scenario: Scenario, table: Vec<Rational>) -> Result<Self> {
        if table.len() != scenario.table_len() {
            return Err(Error::DimensionMismatch(format!(
                "table has {} entries, scenario needs {}",
                table.len(),
                scenario.table_len()
            )));
        }
        Ok(Self { scenario, table })
    }

    /// Builds the table from a closure `p(x, y, b)`.
    pub fn from_fn(scenario: Scenario, mut p: impl FnMut(usize, usize, usize) -> Rational) -> Result<Self> {
        let mut table = Vec::with_capacity(scenario.table_len());
        for x in 0..scenario.n() {
            for y in 0..scenario.l() {
                for b in 0..scenario.k() {
                    table.push(p(x, y, b));
                }
            }
        }
        Self::new(scenario, table)
    }

    /// `p(b|x,y) = 1/k` everywhere.
    pub fn uniform(scenario: Scenario) -> Self {
        let v = rational::rat(1, scenario.k() as i64);
        let table = vec![v; scenario.table_len()];
        Self { scenario, table }
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    pub fn table(&self) -> &[Rational] {
        &self.table
    }

    pub fn p(&self, x: usize, y: usize, b: usize) -> &Rational {
        &self.table[self.scenario.index(x, y, b)]
    }

    /// Same table under different input/measurement weights.
    pub fn with_scenario(&self, scenario: Scenario) -> Result<Self> {
        if !scenario.same_shape(&self.scenario) {
            return Err(Error::DimensionMismatch("scenario shape differs".into()));
        }
        Ok(Self { scenario, table: self.table.clone() })
    }

    pub fn to_json(&self) -> BehaviorJson {
        let s = &self.scenario;
        let p = (0..s.n())
            .map(|x| {
                (0..s.l())
                    .map(|y| (0..s.k()).map(|b| format_rational(self.p(x, y, b))).collect())
                    .collect()
            })
            .collect();
        BehaviorJson {
            n: s.n(),
            l: s.l(),
            k: s.k(),
            p,
            px: Some(s.input_weights().iter().map(format_rational).collect()),
            py: Some(s.measurement_weights().iter().map(format_rational).collect()),
        }
    }

    pub fn from_json(json: &BehaviorJson) -> Result<Self> {
        let b = Self::from_json_unchecked(json)?;
        Self::new(b.scenario, b.table)
    }

    /// Like [`Behavior::from_json`] but keeps tables that fail validation.
    pub fn from_json_unchecked(json: &BehaviorJson) -> Result<Self> {
        let (n, l, k) = (json.n, json.l, json.k);
        let px = match &json.px {
            Some(v) => v.iter().map(|s| rational::parse_rational(s)).collect::<Result<Vec<_>>>()?,
            None if n > 0 => vec![rational::rat(1, n as i64); n],
            None => vec![],
        };
        let py = match &json.py {
            Some(v) => v.iter().map(|s| rational::parse_rational(s)).collect::<Result<Vec<_>>>()?,
            None if l > 0 => vec![rational::rat(1, l as i64); l],
            None => vec![],
        };
        let scenario = Scenario::with_weights(n, l, k, px, py)?;
        if json.p.len() != n {
            return Err(Error::Parse(format!("p has {} rows for x, expected {n}", json.p.len())));
        }
        let mut table = Vec::with_capacity(scenario.table_len());
        for (x, rows) in json.p.iter().enumerate() {
            if rows.len() != l {
                return Err(Error::Parse(format!("p[{x}] has {} rows for y, expected {l}", rows.len())));
            }
            for (y, row) in rows.iter().enumerate() {
                if row.len() != k {
                    return Err(Error::Parse(format!("p[{x}][{y}] has {} outcomes, expected {k}", row.len())));
                }
                for s in row {
                    table.push(rational::parse_rational(s)?);
                }
            }
        }
        Self::unchecked(scenario, table)
    }

    /// Parses the behavior JSON format; numbers are accepted as well as strings.
    pub fn from_json_str(text: &str) -> Result<Self> {
        let value: Value = serde_json::from_str(text)?;
        let json = BehaviorJson::from_value(&value)?;
        Self::from_json(&json)
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(&self.to_json()).expect("behavior json serializes")
    }
}

/// All normalization and positivity violations, in `(x, y, b)` order.
pub fn validate_behavior(behavior: &Behavior) -> Vec<Violation> {
    let s = behavior.scenario();
    let mut out = Vec::new();
    for x in 0..s.n() {
        for y in 0..s.l() {
            let mut total = Rational::zero();
            for b in 0..s.k() {
                let v = behavior.p(x, y, b);
                if v.is_negative() {
                    out.push(Violation::Negative { x, y, b, value: v.clone() });
                } else if *v > Rational::one() {
                    out.push(Violation::AboveOne { x, y, b, value: v.clone() });
                }
                total += v;
            }
            if !total.is_one() {
                out.push(Violation::Normalization { x, y, sum: total });
            }
        }
    }
    out
}

/// Wire format: `{ "n", "l", "k", "p": [[[..]]], "px"?, "py"? }` with
/// rationals written as `"num/den"` strings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BehaviorJson {
    pub n: usize,
    pub l: usize,
    pub k: usize,
    pub p: Vec<Vec<Vec<String>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub px: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub py: Option<Vec<String>>,
}

impl BehaviorJson {
    /// Lenient reader: numeric entries are converted to their string form.
    pub fn from_value(v: &Value) -> Result<Self> {
        fn to_strings(v: &Value) -> Value {
            match v {
                Value::Array(a) => Value::Array(a.iter().map(to_strings).collect()),
                Value::Number(n) => Value::String(n.to_string()),
                other => other.clone(),
            }
        }
        let mut v = v.clone();
        if let Value::Object(map) = &mut v {
            for key in ["p", "px", "py"] {
                if let Some(entry) = map.get_mut(key) {
                    *entry = to_strings(entry);
                }
            }
        }
        Ok(serde_json::from_value(v)?)
    }
}
