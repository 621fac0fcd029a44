//! Linear dimension witnesses in correlator form.
//!
//! A witness stores `v_xy` and is evaluated as `Σ v_xy E_xy` with
//! `E_xy = p(0|x,y) − p(1|x,y)`; outcome 0 plays the role of `+1`.

use std::collections::BTreeMap;

use num_traits::{Signed, Zero};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::rational::{self, format_rational, int, Rational};
use crate::scenario::{Behavior, Scenario};
use crate::strategies::for_each_message_map;

#[derive(Debug, Clone, PartialEq)]
pub struct LinearWitness {
    name: String,
    scenario: Scenario,
    vxy: Vec<Vec<Rational>>,
    bounds: BTreeMap<usize, Rational>,
}

impl LinearWitness {
    pub fn new(
        name: impl Into<String>,
        scenario: Scenario,
        vxy: Vec<Vec<Rational>>,
        bounds: BTreeMap<usize, Rational>,
    ) -> Result<Self> {
        if scenario.k() != 2 {
            return Err(Error::Unsupported(format!(
                "correlator witnesses need k = 2, got k = {}",
                scenario.k()
            )));
        }
        if vxy.len() != scenario.n() || vxy.iter().any(|row| row.len() != scenario.l()) {
            return Err(Error::DimensionMismatch(format!(
                "coefficients must form an {}x{} table",
                scenario.n(),
                scenario.l()
            )));
        }
        if bounds.keys().any(|&d| d == 0) {
            return Err(Error::OutOfRange("bound keys start at d = 1".into()));
        }
        let values: Vec<&Rational> = bounds.values().collect();
        if values.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::OutOfRange("bounds must be nondecreasing in d".into()));
        }
        Ok(Self { name: name.into(), scenario, vxy, bounds })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    pub fn n(&self) -> usize {
        self.scenario.n()
    }

    pub fn l(&self) -> usize {
        self.scenario.l()
    }

    pub fn vxy(&self) -> &[Vec<Rational>] {
        &self.vxy
    }

    pub fn coefficient(&self, x: usize, y: usize) -> &Rational {
        &self.vxy[x][y]
    }

    pub fn bounds(&self) -> &BTreeMap<usize, Rational> {
        &self.bounds
    }

    /// Classical bound `L_d`, if declared.
    pub fn bound(&self, d: usize) -> Option<&Rational> {
        self.bounds.get(&d)
    }

    /// Largest `d` with a declared bound.
    pub fn max_dimension(&self) -> usize {
        self.bounds.keys().next_back().copied().unwrap_or(0)
    }

    /// Smallest declared `d` with `value ≤ L_d`.
    pub fn active_dimension(&self, value: &Rational) -> Option<usize> {
        self.bounds.iter().find(|(_, b)| value <= *b).map(|(&d, _)| d)
    }

    /// `v_xyb = ±v_xy` over the flattened `(x, y, b)` index.
    pub fn coefficients_xyb(&self) -> Vec<Rational> {
        let s = &self.scenario;
        let mut out = vec![Rational::zero(); s.table_len()];
        for x in 0..s.n() {
            for y in 0..s.l() {
                out[s.index(x, y, 0)] = self.vxy[x][y].clone();
                out[s.index(x, y, 1)] = -self.vxy[x][y].clone();
            }
        }
        out
    }

    /// `Σ_xy v_xy E_xy`, exactly.
    pub fn evaluate(&self, b: &Behavior) -> Result<Rational> {
        if !b.scenario().same_shape(&self.scenario) {
            return Err(Error::DimensionMismatch(format!(
                "witness {} expects (n,l,k) = ({},{},2)",
                self.name,
                self.n(),
                self.l()
            )));
        }
        let mut total = Rational::zero();
        for x in 0..self.n() {
            for y in 0..self.l() {
                let v = &self.vxy[x][y];
                if !v.is_zero() {
                    total += v * (b.p(x, y, 0) - b.p(x, y, 1));
                }
            }
        }
        Ok(total)
    }

    /// `Σ |v_xy|`, the value reached when every correlator is saturated.
    pub fn algebraic_max(&self) -> Rational {
        self.vxy.iter().flatten().fold(Rational::zero(), |acc, v| acc + v.abs())
    }

    /// Per `(y, m)` sums `Σ_{x: g(x)=m} v_xy`, laid out as `[y][m]`.
    pub fn grouped_sums(&self, g: &[usize], d: usize) -> Vec<Vec<Rational>> {
        let mut sums = vec![vec![Rational::zero(); d]; self.l()];
        for (x, &m) in g.iter().enumerate() {
            for (y, row) in sums.iter_mut().enumerate() {
                row[m] += &self.vxy[x][y];
            }
        }
        sums
    }

    /// Witness-maximizing answers `f[y][m]` for the message map `g`, and the
    /// resulting value `Σ_{y,m} |Σ_{x∈g⁻¹(m)} v_xy|`. Ties answer outcome 0.
    pub fn best_response(&self, g: &[usize], d: usize) -> (Vec<Vec<usize>>, Rational) {
        let sums = self.grouped_sums(g, d);
        let mut value = Rational::zero();
        let f = sums
            .iter()
            .map(|row| {
                row.iter()
                    .map(|s| {
                        value += s.abs();
                        usize::from(s.is_negative())
                    })
                    .collect()
            })
            .collect();
        (f, value)
    }

    /// Largest value reachable by deterministic strategies with `d` messages.
    pub fn classical_max(&self, d: usize) -> Rational {
        let mut best = None::<Rational>;
        for_each_message_map(self.n(), d.max(1), |g| {
            let (_, v) = self.best_response(g, d.max(1));
            if best.as_ref().map_or(true, |b| v > *b) {
                best = Some(v);
            }
        });
        best.unwrap_or_else(Rational::zero)
    }

    pub fn to_json(&self) -> WitnessJson {
        WitnessJson {
            name: self.name.clone(),
            n: self.n(),
            l: self.l(),
            vxy: self.vxy.iter().map(|r| r.iter().map(format_rational).collect()).collect(),
            bounds: self.bounds.iter().map(|(d, b)| (d.to_string(), format_rational(b))).collect(),
        }
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(&self.to_json()).expect("witness serializes")
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let v: Value = serde_json::from_str(text)?;
        Self::from_json_value(&v)
    }

    /// Reads the witness wire format; coefficients may be strings or numbers.
    pub fn from_json_value(v: &Value) -> Result<Self> {
        let field = |k: &str| v.get(k).ok_or_else(|| Error::Parse(format!("witness JSON lacks {k:?}")));
        let name = field("name")?.as_str().ok_or_else(|| Error::Parse("name must be a string".into()))?;
        let as_count = |k: &str| -> Result<usize> {
            field(k)?
                .as_u64()
                .map(|u| u as usize)
                .ok_or_else(|| Error::Parse(format!("{k} must be a nonnegative integer")))
        };
        let (n, l) = (as_count("n")?, as_count("l")?);
        let rows = field("vxy")?.as_array().ok_or_else(|| Error::Parse("vxy must be an array".into()))?;
        let vxy = rows
            .iter()
            .map(|row| {
                row.as_array()
                    .ok_or_else(|| Error::Parse("vxy rows must be arrays".into()))?
                    .iter()
                    .map(rational::serde_str::from_json)
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        let mut bounds = BTreeMap::new();
        if let Some(map) = v.get("bounds") {
            let map = map.as_object().ok_or_else(|| Error::Parse("bounds must be an object".into()))?;
            for (d, b) in map {
                let d: usize = d.parse().map_err(|_| Error::Parse(format!("bad bound key {d:?}")))?;
                bounds.insert(d, rational::serde_str::from_json(b)?);
            }
        }
        Self::new(name, Scenario::new(n, l, 2)?, vxy, bounds)
    }
}

/// Wire format `{ "name", "n", "l", "vxy": [[..]], "bounds": {"1": ..} }`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WitnessJson {
    pub name: String,
    pub n: usize,
    pub l: usize,
    pub vxy: Vec<Vec<String>>,
    pub bounds: BTreeMap<String, String>,
}

/// The `I_n` family: `l = n − 1`, row `x = 1` all `+1`, and for `x ≥ 2`
/// `v_xy = +1` when `x + y ≤ n`, `−1` when `x + y = n + 1`, else absent.
pub fn make_in(n: usize) -> Result<LinearWitness> {
    if n < 3 {
        return Err(Error::OutOfRange(format!("I_n needs n >= 3, got {n}")));
    }
    let l = n - 1;
    let mut vxy = vec![vec![Rational::zero(); l]; n];
    for (xi, row) in vxy.iter_mut().enumerate() {
        let x = xi + 1;
        for (yi, v) in row.iter_mut().enumerate() {
            let y = yi + 1;
            *v = if x == 1 || x + y <= n {
                int(1)
            } else if x + y == n + 1 {
                int(-1)
            } else {
                Rational::zero()
            };
        }
    }
    let base = (n * (n - 3) / 2) as i64;
    let bounds = (1..=n).map(|d| (d, int(base + 2 * d as i64 - 1))).collect();
    LinearWitness::new(format!("I{n}"), Scenario::new(n, l, 2)?, vxy, bounds)
}

/// `R_4 = E11 + E12 + E21 − E22 − E31 + E32 − E41 − E42`.
pub fn make_r4() -> Result<LinearWitness> {
    let signs = [[1, 1], [1, -1], [-1, 1], [-1, -1]];
    let vxy = signs.iter().map(|r| r.iter().map(|&s| int(s)).collect()).collect();
    let bounds = (1..=4).map(|d| (d, int(if d == 1 { 0 } else { 2 * d as i64 }))).collect();
    LinearWitness::new("R4", Scenario::new(4, 2, 2)?, vxy, bounds)
}

/// Resolves `I3`, `I_4`, `R4`, ... (case-insensitive).
pub fn builtin(name: &str) -> Result<LinearWitness> {
    let key = name.trim().to_ascii_uppercase().replace('_', "");
    if key == "R4" {
        return make_r4();
    }
    if let Some(rest) = key.strip_prefix('I') {
        if let Ok(n) = rest.parse::<usize>() {
            return make_in(n);
        }
    }
    Err(Error::Parse(format!("unknown witness {name:?}; expected In (n >= 3) or R4")))
}
