//! Minimum classical message entropy compatible with observed data.
//!
//! The set of message distributions `p(m)` compatible with a behavior (or
//! with a single witness value) is a polytope `P`. Entropy is concave, so its
//! minimum over `P` sits at a vertex. `P` is reconstructed exactly from a
//! linear-optimization oracle over the strategy columns.

use std::collections::BTreeMap;

use num_traits::{One, Signed, Zero};
use rayon::prelude::*;

use crate::entropy::{binary_entropy, entropy_exact};
use crate::error::{Error, Result};
use crate::lp::{phase_one, Feasibility};
use crate::polytope::hull_from_oracle;
use crate::rational::{self, dot, format_rational, int, Rational};
use crate::scenario::Behavior;
use crate::strategies::{
    enumerate_strategies, for_each_message_map, DeterministicStrategy, EnumerationOptions, StrategyMixture,
};
use crate::witness::{make_in, make_r4, LinearWitness};

/// Cap on the number of points gathered while reconstructing a polytope.
pub const DEFAULT_POINT_CAP: usize = 20_000;

/// Cap on `d^n` message maps for witness signature columns.
pub const DEFAULT_MESSAGE_MAP_CAP: u128 = 10_000_000;

#[derive(Debug, Clone, PartialEq)]
pub enum Provenance {
    Witness { name: String, value: Rational },
    Behavior,
}

/// Message distributions compatible with a constraint set.
#[derive(Debug, Clone, PartialEq)]
pub struct MessagePolytope {
    pub d: usize,
    /// Vertices as full `p(m)` vectors, lexicographically ordered.
    pub vertices: Vec<Vec<Rational>>,
    /// `a·p ≤ h`, over full `p(m)` vectors.
    pub facets: Vec<(Vec<Rational>, Rational)>,
    /// `a·p = h` cutting out the affine hull (normalization excluded).
    pub equalities: Vec<(Vec<Rational>, Rational)>,
    pub provenance: Provenance,
    pub oracle_calls: usize,
}

/// Extremes of one label, and of a second label on the two extreme faces.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionalExtrema {
    pub p_min: Rational,
    pub p_max: Rational,
    /// `min p(second)` subject to `p(first) = p_min`.
    pub p_prime_min: Rational,
    /// `max p(second)` subject to `p(first) = p_max`.
    pub p_prime_max: Rational,
}

impl MessagePolytope {
    /// `oracle(c)` must return a maximizer of `c·p` over `P` (full coordinates).
    fn from_oracle(
        d: usize,
        provenance: Provenance,
        cap: usize,
        mut oracle: impl FnMut(&[Rational]) -> Result<Vec<Rational>>,
    ) -> Result<Self> {
        let r = d - 1;
        let poly = hull_from_oracle(r, cap, |a| {
            let mut c = a.to_vec();
            c.push(Rational::zero());
            let p = oracle(&c)?;
            Ok(p[..r].to_vec())
        })?;
        let complete = |v: &[Rational]| {
            let mut full = v.to_vec();
            full.push(Rational::one() - rational::sum(v));
            full
        };
        let lift = |(a, h): &(Vec<Rational>, Rational)| {
            let mut a = a.clone();
            a.push(Rational::zero());
            (a, h.clone())
        };
        Ok(Self {
            d,
            vertices: poly.vertices.iter().map(|v| complete(v)).collect(),
            facets: poly.hrep.facets.iter().map(lift).collect(),
            equalities: poly.hrep.equalities.iter().map(lift).collect(),
            provenance,
            oracle_calls: poly.oracle_calls,
        })
    }

    /// `(min, max)` of `p(m)` for each label.
    pub fn coordinate_bounds(&self) -> Vec<(Rational, Rational)> {
        (0..self.d).map(|m| self.subset_bounds(&[m])).collect()
    }

    /// `(min, max)` of `Σ_{m∈subset} p(m)`.
    pub fn subset_bounds(&self, subset: &[usize]) -> (Rational, Rational) {
        let sums: Vec<Rational> =
            self.vertices.iter().map(|v| subset.iter().fold(Rational::zero(), |acc, &m| acc + &v[m])).collect();
        let lo = sums.iter().min().cloned().unwrap_or_else(Rational::zero);
        let hi = sums.iter().max().cloned().unwrap_or_else(Rational::zero);
        (lo, hi)
    }

    pub fn conditional_extrema(&self, first: usize, second: usize) -> ConditionalExtrema {
        let (p_min, p_max) = self.subset_bounds(&[first]);
        let on = |target: &Rational| -> Vec<Rational> {
            self.vertices.iter().filter(|v| v[first] == *target).map(|v| v[second].clone()).collect()
        };
        ConditionalExtrema {
            p_prime_min: on(&p_min).into_iter().min().unwrap_or_else(Rational::zero),
            p_prime_max: on(&p_max).into_iter().max().unwrap_or_else(Rational::zero),
            p_min,
            p_max,
        }
    }

    pub fn contains(&self, p: &[Rational]) -> bool {
        p.len() == self.d
            && rational::sum(p).is_one()
            && self.equalities.iter().all(|(a, h)| dot(a, p) == *h)
            && self.facets.iter().all(|(a, h)| dot(a, p) <= *h)
    }

    /// Smallest vertex entropy and the first vertex attaining it.
    pub fn min_entropy_vertex(&self) -> (f64, &[Rational]) {
        let mut best: Option<(f64, &[Rational])> = None;
        for v in &self.vertices {
            let h = entropy_exact(v);
            if best.map_or(true, |(b, _)| h < b) {
                best = Some((h, v));
            }
        }
        best.expect("polytope has at least one vertex")
    }
}

/// One deduplicated column `(w_λ, B_{·,λ})` of the witness-constrained LP.
#[derive(Debug, Clone, PartialEq)]
pub struct SignatureColumn {
    pub value: Rational,
    pub marginal: Vec<Rational>,
    /// A message map realizing the column.
    pub g: Vec<usize>,
    /// Whether the answers maximize (`true`) or minimize the witness.
    pub maximizing: bool,
}

/// Extreme signature columns for message size `d`.
///
/// For a fixed message map `g` the marginal is fixed while the answers `f`
/// move the witness anywhere in `[−w(g), w(g)]`, so only the two extremes
/// are kept.
#[derive(Debug, Clone)]
pub struct WitnessColumns {
    d: usize,
    columns: Vec<SignatureColumn>,
}

impl WitnessColumns {
    pub fn new(w: &LinearWitness, d: usize) -> Result<Self> {
        if d == 0 {
            return Err(Error::OutOfRange("message size d must be >= 1".into()));
        }
        let needed = (d as u128).checked_pow(w.n() as u32).unwrap_or(u128::MAX);
        if needed > DEFAULT_MESSAGE_MAP_CAP {
            return Err(Error::CapExceeded { what: format!("message maps (d={d})"), needed, cap: DEFAULT_MESSAGE_MAP_CAP });
        }
        let weights = w.scenario().input_weights();
        let mut unique: BTreeMap<(Rational, Vec<Rational>), (Vec<usize>, bool)> = BTreeMap::new();
        for_each_message_map(w.n(), d, |g| {
            let (_, top) = w.best_response(g, d);
            let mut marginal = vec![Rational::zero(); d];
            for (x, &m) in g.iter().enumerate() {
                marginal[m] += &weights[x];
            }
            unique.entry((-top.clone(), marginal.clone())).or_insert_with(|| (g.to_vec(), false));
            unique.entry((top, marginal)).or_insert_with(|| (g.to_vec(), true));
        });
        let columns = unique
            .into_iter()
            .map(|((value, marginal), (g, maximizing))| SignatureColumn { value, marginal, g, maximizing })
            .collect();
        Ok(Self { d, columns })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn columns(&self) -> &[SignatureColumn] {
        &self.columns
    }

    /// Largest witness value reachable with these columns.
    pub fn max_value(&self) -> &Rational {
        &self.columns.last().expect("non-empty").value
    }

    pub fn min_value(&self) -> &Rational {
        &self.columns.first().expect("non-empty").value
    }

    pub fn is_feasible(&self, value: &Rational) -> bool {
        self.min_value() <= value && value <= self.max_value()
    }

    /// Maximizes `c·p(m)` over mixtures with witness value `value`: the upper
    /// concave envelope of `(w_λ, c·B_λ)` evaluated at `value`.
    pub fn support_point(&self, value: &Rational, c: &[Rational]) -> Result<Vec<Rational>> {
        if !self.is_feasible(value) {
            return Err(Error::Infeasible(format!(
                "witness value {} outside [{}, {}] for d = {}",
                format_rational(value),
                format_rational(self.min_value()),
                format_rational(self.max_value()),
                self.d
            )));
        }
        // Best column per distinct witness value, in increasing order.
        let mut best: Vec<(&Rational, Rational, usize)> = Vec::new();
        for (i, col) in self.columns.iter().enumerate() {
            let y = dot(c, &col.marginal);
            match best.last_mut() {
                Some(last) if last.0 == &col.value => {
                    if y > last.1 {
                        *last = (&col.value, y, i);
                    }
                }
                _ => best.push((&col.value, y, i)),
            }
        }
        let mut hull: Vec<(&Rational, Rational, usize)> = Vec::new();
        for p in best {
            while hull.len() >= 2 {
                let (o, a) = (&hull[hull.len() - 2], &hull[hull.len() - 1]);
                let cross = (a.0 - o.0) * (&p.1 - &o.1) - (&a.1 - &o.1) * (p.0 - o.0);
                if cross.is_negative() {
                    break;
                }
                hull.pop();
            }
            hull.push(p);
        }
        let k = hull.iter().position(|h| h.0 >= value).expect("value within range");
        if hull[k].0 == value {
            return Ok(self.columns[hull[k].2].marginal.clone());
        }
        let (lo, hi) = (&hull[k - 1], &hull[k]);
        let t = (hi.0 - value) / (hi.0 - lo.0);
        let s = Rational::one() - &t;
        let (a, b) = (&self.columns[lo.2].marginal, &self.columns[hi.2].marginal);
        Ok(a.iter().zip(b).map(|(x, y)| &t * x + &s * y).collect())
    }

    /// The deterministic strategy behind a column.
    pub fn strategy(&self, w: &LinearWitness, col: &SignatureColumn) -> DeterministicStrategy {
        let (mut f, _) = w.best_response(&col.g, self.d);
        if !col.maximizing {
            f.iter_mut().flatten().for_each(|b| *b = 1 - *b);
        }
        DeterministicStrategy { d: self.d, g: col.g.clone(), f }
    }

    /// A mixture of deterministic strategies with witness value `value`
    /// and message marginal `target`.
    pub fn mixture_for(&self, w: &LinearWitness, value: &Rational, target: &[Rational]) -> Result<StrategyMixture> {
        let mut a: Vec<Vec<Rational>> = vec![self.columns.iter().map(|c| c.value.clone()).collect()];
        for m in 0..self.d {
            a.push(self.columns.iter().map(|c| c.marginal[m].clone()).collect());
        }
        a.push(vec![Rational::one(); self.columns.len()]);
        let mut b = vec![value.clone()];
        b.extend(target.iter().cloned());
        b.push(Rational::one());
        let Feasibility::Feasible(t) = phase_one(&a, &b)? else {
            return Err(Error::Infeasible("target marginal not reachable at this witness value".into()));
        };
        let q = t.point();
        let (strategies, weights) = q
            .iter()
            .enumerate()
            .filter(|(_, qi)| qi.is_positive())
            .map(|(i, qi)| (self.strategy(w, &self.columns[i]), qi.clone()))
            .unzip();
        StrategyMixture::new(strategies, weights)
    }
}

/// Message polytope for a witness value, with message size `d`.
pub fn message_polytope(w: &LinearWitness, value: &Rational, d: usize) -> Result<MessagePolytope> {
    let cols = WitnessColumns::new(w, d)?;
    message_polytope_from_columns(w, &cols, value)
}

pub fn message_polytope_from_columns(
    w: &LinearWitness,
    cols: &WitnessColumns,
    value: &Rational,
) -> Result<MessagePolytope> {
    let provenance = Provenance::Witness { name: w.name().to_string(), value: value.clone() };
    cols.support_point(value, &vec![Rational::zero(); cols.d()])?;
    MessagePolytope::from_oracle(cols.d(), provenance, DEFAULT_POINT_CAP, |c| cols.support_point(value, c))
}

#[derive(Debug, Clone, PartialEq)]
pub struct DimensionResult {
    pub d: usize,
    /// `None` when the value is out of reach with `d` messages.
    pub h_min: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WitnessMinEntropy {
    pub value: Rational,
    pub h_min: f64,
    /// A minimizing vertex `p(m)`.
    pub argmin: Vec<Rational>,
    /// Message size of the minimizing polytope (smallest on ties).
    pub d_argmin: usize,
    pub per_dimension: Vec<DimensionResult>,
}

/// Precomputed signature columns for `d = 1..=d_max`.
#[derive(Debug, Clone)]
pub struct WitnessEntropySolver {
    witness: LinearWitness,
    columns: Vec<WitnessColumns>,
}

impl WitnessEntropySolver {
    pub fn new(w: &LinearWitness, d_max: usize) -> Result<Self> {
        if d_max == 0 {
            return Err(Error::OutOfRange("d_max must be >= 1".into()));
        }
        let columns = (1..=d_max).map(|d| WitnessColumns::new(w, d)).collect::<Result<_>>()?;
        Ok(Self { witness: w.clone(), columns })
    }

    pub fn witness(&self) -> &LinearWitness {
        &self.witness
    }

    pub fn columns(&self, d: usize) -> Option<&WitnessColumns> {
        self.columns.get(d.checked_sub(1)?)
    }

    pub fn polytope(&self, value: &Rational, d: usize) -> Result<MessagePolytope> {
        let cols = self.columns(d).ok_or_else(|| Error::OutOfRange(format!("d = {d} beyond solver range")))?;
        message_polytope_from_columns(&self.witness, cols, value)
    }

    pub fn solve(&self, value: &Rational) -> Result<WitnessMinEntropy> {
        let mut per_dimension = Vec::new();
        let mut best: Option<(f64, Vec<Rational>, usize)> = None;
        for cols in &self.columns {
            if !cols.is_feasible(value) {
                per_dimension.push(DimensionResult { d: cols.d(), h_min: None });
                continue;
            }
            let poly = message_polytope_from_columns(&self.witness, cols, value)?;
            let (h, v) = poly.min_entropy_vertex();
            per_dimension.push(DimensionResult { d: cols.d(), h_min: Some(h) });
            if best.as_ref().map_or(true, |(b, _, _)| h < *b) {
                best = Some((h, v.to_vec(), cols.d()));
            }
        }
        let Some((h_min, argmin, d_argmin)) = best else {
            let top = self.columns.last().expect("d_max >= 1");
            return Err(Error::Infeasible(format!(
                "witness value {} exceeds the classical maximum {} for d <= {}",
                format_rational(value),
                format_rational(top.max_value()),
                top.d()
            )));
        };
        Ok(WitnessMinEntropy { value: value.clone(), h_min, argmin, d_argmin, per_dimension })
    }
}

/// `min H(M)` over message sizes `1..=d_max` given only a witness value.
pub fn min_entropy_witness(w: &LinearWitness, value: &Rational, d_max: usize) -> Result<WitnessMinEntropy> {
    WitnessEntropySolver::new(w, d_max)?.solve(value)
}

#[derive(Debug, Clone)]
pub struct ExactMinEntropy {
    pub h_min: f64,
    /// Minimizing message distribution.
    pub marginal: Vec<Rational>,
    /// A strategy mixture reproducing the behavior with that marginal.
    pub mixture: StrategyMixture,
    pub polytope: MessagePolytope,
}

/// `min H(M)` over all mixtures of `d`-message strategies reproducing `b`.
pub fn min_entropy_exact(b: &Behavior, d: usize) -> Result<ExactMinEntropy> {
    min_entropy_exact_with(b, d, &EnumerationOptions { dedup: true, ..Default::default() })
}

pub fn min_entropy_exact_with(b: &Behavior, d: usize, opts: &EnumerationOptions) -> Result<ExactMinEntropy> {
    let s = b.scenario();
    let strategies = enumerate_strategies(s, d, opts)?;
    let marginals: Vec<Vec<Rational>> = strategies.iter().map(|t| t.marginal(s)).collect();

    let mut a: Vec<Vec<Rational>> = Vec::new();
    let mut rhs: Vec<Rational> = Vec::new();
    for x in 0..s.n() {
        for y in 0..s.l() {
            for o in 0..s.k() - 1 {
                a.push(strategies.iter().map(|t| if t.outcome(x, y) == o { int(1) } else { int(0) }).collect());
                rhs.push(b.p(x, y, o).clone());
            }
        }
    }
    a.push(vec![Rational::one(); strategies.len()]);
    rhs.push(Rational::one());

    let tableau = match phase_one(&a, &rhs)? {
        Feasibility::Feasible(t) => t,
        Feasibility::Infeasible { .. } => {
            return Err(Error::Infeasible(format!("behavior is not reproducible with d = {d} messages")))
        }
    };
    let polytope = MessagePolytope::from_oracle(d, Provenance::Behavior, DEFAULT_POINT_CAP, |c| {
        let obj: Vec<Rational> = marginals.iter().map(|bm| dot(c, bm)).collect();
        let sol = tableau.maximize(&obj)?;
        let mut p = vec![Rational::zero(); d];
        for (q, bm) in sol.x.iter().zip(&marginals) {
            if !q.is_zero() {
                for (pm, bmm) in p.iter_mut().zip(bm) {
                    *pm += q * bmm;
                }
            }
        }
        Ok(p)
    })?;
    let (h_min, v) = polytope.min_entropy_vertex();
    let marginal = v.to_vec();

    for m in 0..d {
        a.push(marginals.iter().map(|bm| bm[m].clone()).collect());
        rhs.push(marginal[m].clone());
    }
    let Feasibility::Feasible(t) = phase_one(&a, &rhs)? else {
        return Err(Error::Numerical("minimizing vertex has no strategy decomposition".into()));
    };
    let (strats, weights): (Vec<_>, Vec<_>) = t
        .point()
        .into_iter()
        .enumerate()
        .filter(|(_, q)| q.is_positive())
        .map(|(i, q)| (strategies[i].clone(), q))
        .unzip();
    let mixture = StrategyMixture::new(strats, weights)?;
    Ok(ExactMinEntropy { h_min, marginal, mixture, polytope })
}

/// Witness families with a closed-form entropy curve.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WitnessFamily {
    In(usize),
    R4,
}

pub fn witness_family(w: &LinearWitness) -> Option<WitnessFamily> {
    let n = w.n();
    if n >= 3 && w.l() == n - 1 {
        if let Ok(reference) = make_in(n) {
            if reference.vxy() == w.vxy() {
                return Some(WitnessFamily::In(n));
            }
        }
    }
    if n == 4 && w.l() == 2 && make_r4().ok()?.vxy() == w.vxy() {
        return Some(WitnessFamily::R4);
    }
    None
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClosedFormBranch {
    /// Value at or below `L_1`: a single message.
    Trivial,
    /// `{1/n × (d−2), α, β}`.
    Interpolated,
    /// `H_bin(R_4/16)` on `R_4 ∈ [0, 4]`.
    RandomAccess,
}

/// A point of the conjectured minimum-entropy curve.
#[derive(Debug, Clone, PartialEq)]
pub struct ClosedFormPoint {
    pub value: Rational,
    /// Active dimension with `L_{d−1} < value ≤ L_d`.
    pub d: usize,
    pub p: Rational,
    pub alpha: Rational,
    pub beta: Rational,
    pub distribution: Vec<Rational>,
    pub entropy: f64,
    pub branch: ClosedFormBranch,
}

fn interpolated_point(value: &Rational, n: usize, d: usize, l_d: &Rational) -> ClosedFormPoint {
    let nn = int(n as i64);
    let p = (l_d - value) / int(2);
    let alpha = (Rational::one() - &p) / &nn;
    let beta = Rational::one() - &alpha - int(d as i64 - 2) / &nn;
    let mut distribution = vec![Rational::one() / &nn; d - 2];
    distribution.push(alpha.clone());
    distribution.push(beta.clone());
    let entropy = entropy_exact(&distribution);
    ClosedFormPoint { value: value.clone(), d, p, alpha, beta, distribution, entropy, branch: ClosedFormBranch::Interpolated }
}

fn trivial_point(value: &Rational) -> ClosedFormPoint {
    ClosedFormPoint {
        value: value.clone(),
        d: 1,
        p: Rational::one(),
        alpha: Rational::zero(),
        beta: Rational::one(),
        distribution: vec![Rational::one()],
        entropy: 0.0,
        branch: ClosedFormBranch::Trivial,
    }
}

/// The conjectured minimum entropy, from the explicit message distribution
/// of the interpolating strategy.
pub fn conjectured_min_entropy(w: &LinearWitness, value: &Rational) -> Result<ClosedFormPoint> {
    let out_of_range = |lo: &Rational, hi: &Rational| {
        Error::OutOfRange(format!(
            "{} value {} outside [{}, {}]",
            w.name(),
            format_rational(value),
            format_rational(lo),
            format_rational(hi)
        ))
    };
    match witness_family(w) {
        Some(WitnessFamily::In(n)) => {
            let top = w.bound(n).expect("I_n declares L_n");
            if value > top {
                return Err(out_of_range(&-top.clone(), top));
            }
            if value <= w.bound(1).expect("I_n declares L_1") {
                return Ok(trivial_point(value));
            }
            let d = w.active_dimension(value).expect("value <= L_n");
            Ok(interpolated_point(value, n, d, w.bound(d).expect("bound exists")))
        }
        Some(WitnessFamily::R4) => {
            let (zero, four, eight) = (int(0), int(4), int(8));
            if value.is_negative() || *value > eight {
                return Err(out_of_range(&zero, &eight));
            }
            if value.is_zero() {
                return Ok(trivial_point(value));
            }
            if *value <= four {
                let alpha = value / int(16);
                let beta = Rational::one() - &alpha;
                let entropy = binary_entropy(rational::to_f64(&alpha))?;
                return Ok(ClosedFormPoint {
                    value: value.clone(),
                    d: 2,
                    p: Rational::one() - value / int(4),
                    distribution: vec![alpha.clone(), beta.clone()],
                    alpha,
                    beta,
                    entropy,
                    branch: ClosedFormBranch::RandomAccess,
                });
            }
            let d = w.active_dimension(value).expect("value <= 8");
            Ok(interpolated_point(value, 4, d, w.bound(d).expect("bound exists")))
        }
        None => Err(Error::Unsupported(format!("no closed-form curve for witness {}", w.name()))),
    }
}

/// The closed form read literally, with the `(d−2) log n` term unweighted.
pub fn literal_closed_form_entropy(point: &ClosedFormPoint, n: usize) -> f64 {
    let plogp = |x: &Rational| {
        let x = rational::to_f64(x);
        if x > 0.0 {
            -x * x.log2()
        } else {
            0.0
        }
    };
    (point.d as f64 - 2.0).max(0.0) * (n as f64).log2() + plogp(&point.alpha) + plogp(&point.beta)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurveRow {
    pub value: Rational,
    pub h_min: f64,
    pub h_closed_form: Option<f64>,
    /// Smallest `d` with `value ≤ L_d`.
    pub d_active: usize,
}

/// `count` evenly spaced rationals from `lo` to `hi` inclusive.
pub fn linear_grid(lo: &Rational, hi: &Rational, count: usize) -> Result<Vec<Rational>> {
    if count == 0 || lo > hi {
        return Err(Error::OutOfRange("grid needs min <= max and at least one point".into()));
    }
    if count == 1 {
        return Ok(vec![lo.clone()]);
    }
    let step = (hi - lo) / int(count as i64 - 1);
    Ok((0..count).map(|i| lo + &step * int(i as i64)).collect())
}

/// Minimum entropy and closed form over a grid of witness values, in grid order.
pub fn min_entropy_curve(w: &LinearWitness, grid: &[Rational], d_max: usize) -> Result<Vec<CurveRow>> {
    let solver = WitnessEntropySolver::new(w, d_max)?;
    let family = witness_family(w);
    grid.par_iter()
        .map(|value| {
            let context = |e: Error| match e {
                Error::Infeasible(m) => Error::Infeasible(format!("at value {}: {m}", format_rational(value))),
                other => other,
            };
            let res = solver.solve(value).map_err(context)?;
            let h_closed_form = match family {
                Some(_) => Some(conjectured_min_entropy(w, value)?.entropy),
                None => None,
            };
            let d_active = w.active_dimension(value).unwrap_or(res.d_argmin);
            Ok(CurveRow { value: value.clone(), h_min: res.h_min, h_closed_form, d_active })
        })
        .collect()
}

/// `value,H_min_bits,H_closed_form_bits,d_active`
pub fn curve_csv(rows: &[CurveRow]) -> String {
    let mut out = String::from("value,H_min_bits,H_closed_form_bits,d_active\n");
    for r in rows {
        let closed = r.h_closed_form.map(|h| format!("{h:.12}")).unwrap_or_default();
        out.push_str(&format!(
            "{},{:.12},{},{}\n",
            format_decimal(&r.value),
            r.h_min,
            closed,
            r.d_active
        ));
    }
    out
}

/// Decimal rendering with up to 12 fractional digits.
pub fn format_decimal(r: &Rational) -> String {
    let s = format!("{:.12}", rational::to_f64(r));
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".into()
    } else {
        s.into()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::rat;
    use crate::scenario::Scenario;
    use crate::strategies::{behavior_from_mixture, message_marginal};

    const TOL: f64 = 1e-9;

    #[test]
    fn i3_value_4_coordinate_bounds() {
        let w = make_in(3).unwrap();
        let poly = message_polytope(&w, &int(4), 3).unwrap();
        for (lo, hi) in poly.coordinate_bounds() {
            assert_eq!(lo, rat(1, 6));
            assert_eq!(hi, rat(1, 2));
        }
        let ce = poly.conditional_extrema(0, 1);
        let (smin, smax) = poly.subset_bounds(&[0, 1]);
        assert_eq!(smin, &ce.p_min + &ce.p_prime_min);
        assert_eq!(smax, &ce.p_max + &ce.p_prime_max);
        for v in &poly.vertices {
            assert!(poly.contains(v));
        }
    }

    #[test]
    fn extreme_values_collapse_polytope() {
        let w = make_in(3).unwrap();
        let top = message_polytope(&w, &int(5), 3).unwrap();
        assert_eq!(top.vertices, vec![vec![rat(1, 3), rat(1, 3), rat(1, 3)]]);
        let low = message_polytope(&w, &int(1), 1).unwrap();
        assert_eq!(low.vertices, vec![vec![int(1)]]);
        assert!(matches!(message_polytope(&w, &int(6), 3), Err(Error::Infeasible(_))));
    }

    #[test]
    fn i3_min_entropy_values() {
        let w = make_in(3).unwrap();
        let r = min_entropy_witness(&w, &int(4), 3).unwrap();
        assert!((r.h_min - 1.459147917027245).abs() < TOL);
        let mut sorted = r.argmin.clone();
        sorted.sort();
        assert_eq!(sorted, vec![rat(1, 6), rat(1, 3), rat(1, 2)]);
        let top = min_entropy_witness(&w, &int(5), 3).unwrap();
        assert!((top.h_min - 3f64.log2()).abs() < TOL);
        assert!(min_entropy_witness(&w, &int(6), 3).is_err());
    }

    #[test]
    fn closed_form_anchor_points() {
        let w = make_in(3).unwrap();
        let p = conjectured_min_entropy(&w, &int(4)).unwrap();
        assert_eq!((p.d, p.p.clone(), p.alpha.clone(), p.beta.clone()), (3, rat(1, 2), rat(1, 6), rat(1, 2)));
        assert!((p.entropy - 1.459148).abs() < 1e-6);
        assert!(literal_closed_form_entropy(&p, 3) - p.entropy > 1.0);
        let q = conjectured_min_entropy(&w, &int(3)).unwrap();
        assert_eq!((q.d, q.p.clone(), q.alpha.clone(), q.beta.clone()), (2, int(0), rat(1, 3), rat(2, 3)));
        assert!((q.entropy - 0.918296).abs() < 1e-6);
        assert_eq!(conjectured_min_entropy(&w, &int(-2)).unwrap().entropy, 0.0);
        assert!(conjectured_min_entropy(&w, &int(6)).is_err());

        let r4 = make_r4().unwrap();
        let a = conjectured_min_entropy(&r4, &int(4)).unwrap();
        assert!((a.entropy - 0.811278).abs() < 1e-6);
        let b = conjectured_min_entropy(&r4, &(int(4) + rat(1, 1_000_000))).unwrap();
        assert!((a.entropy - b.entropy).abs() < 1e-4);
        assert!(conjectured_min_entropy(&r4, &int(-1)).is_err());
    }

    #[test]
    fn closed_form_invariants() {
        let w = make_in(4).unwrap();
        for v in linear_grid(&int(3), &int(9), 25).unwrap() {
            let p = conjectured_min_entropy(&w, &v).unwrap();
            if p.d >= 2 {
                assert!(!p.p.is_negative() && p.p <= int(1));
                assert!(!p.alpha.is_negative() && !p.beta.is_negative());
                assert_eq!(rational::sum(&p.distribution), int(1));
            }
        }
    }

    #[test]
    fn exact_min_entropy_small_cases() {
        let s = Scenario::new(2, 1, 2).unwrap();
        let constant = Behavior::from_fn(s.clone(), |_, _, b| int(i64::from(b == 0))).unwrap();
        let r = min_entropy_exact(&constant, 2).unwrap();
        assert_eq!(r.h_min, 0.0);

        let copy = Behavior::from_fn(s.clone(), |x, _, b| int(i64::from(b == x))).unwrap();
        let r = min_entropy_exact(&copy, 2).unwrap();
        assert!((r.h_min - 1.0).abs() < TOL);
        assert_eq!(behavior_from_mixture(&r.mixture, &s).unwrap(), copy);
        assert!(matches!(min_entropy_exact(&copy, 1), Err(Error::Infeasible(_))));
    }

    #[test]
    fn exact_mixture_reproduces_marginal() {
        let s = Scenario::new(3, 2, 2).unwrap();
        let b = Behavior::from_fn(s.clone(), |x, y, o| {
            let p = rat(((x + 2 * y) % 4) as i64 + 1, 6);
            if o == 0 {
                p
            } else {
                int(1) - p
            }
        })
        .unwrap();
        let r = min_entropy_exact(&b, 3).unwrap();
        assert_eq!(behavior_from_mixture(&r.mixture, &s).unwrap(), b);
        let m = message_marginal(&r.mixture, &s).unwrap();
        assert_eq!(m.exact_weights().unwrap(), &r.marginal[..]);
    }

    #[test]
    fn witness_mixture_reconstruction() {
        let w = make_in(3).unwrap();
        let cols = WitnessColumns::new(&w, 3).unwrap();
        let r = min_entropy_witness(&w, &int(4), 3).unwrap();
        let mix = cols.mixture_for(&w, &int(4), &r.argmin).unwrap();
        let b = behavior_from_mixture(&mix, w.scenario()).unwrap();
        assert_eq!(w.evaluate(&b).unwrap(), int(4));
        let m = message_marginal(&mix, w.scenario()).unwrap();
        assert_eq!(m.exact_weights().unwrap(), &r.argmin[..]);
    }

    #[test]
    fn curve_rows_and_csv() {
        let w = make_in(3).unwrap();
        let grid = linear_grid(&int(1), &int(5), 5).unwrap();
        let rows = min_entropy_curve(&w, &grid, 3).unwrap();
        let expect = [0.0, 0.650022, 0.918296, 1.459148, 3f64.log2()];
        for (row, e) in rows.iter().zip(expect) {
            assert!((row.h_min - e).abs() < 1e-6, "{row:?}");
            assert!((row.h_min - row.h_closed_form.unwrap()).abs() < 1e-9);
        }
        let csv = curve_csv(&rows);
        assert!(csv.starts_with("value,H_min_bits,H_closed_form_bits,d_active\n1,0.000000000000,"));
        assert_eq!(csv.lines().count(), 6);
    }

    #[test]
    fn grid_construction() {
        let g = linear_grid(&int(1), &int(5), 41).unwrap();
        assert_eq!(g.len(), 41);
        assert_eq!(g[1], rat(11, 10));
        assert_eq!(g[40], int(5));
        assert!(linear_grid(&int(2), &int(1), 3).is_err());
        assert_eq!(format_decimal(&rat(11, 10)), "1.1");
        assert_eq!(format_decimal(&int(0)), "0");
    }
}
