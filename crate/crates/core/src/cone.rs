//! Entropy vectors, the Shannon cone, causal constraints and
//! Fourier–Motzkin projection onto observable coordinates.
//!
//! A coordinate is a nonempty subset of variables, encoded as a bitmask
//! `S`; its slot in a dense row is `S − 1`. Constraints are homogeneous:
//! `a·h ≥ 0` or `a·h = 0`, with integer coefficients.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt;

use num_bigint::BigInt;
use num_traits::Zero;
use num_integer::Integer;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lp::{cone_implies, conic_support_f64};
use crate::polytope::{cone_generators, rank};
use crate::rational::{dot, int, Rational};

/// Largest variable count accepted by [`shannon_cone`].
pub const MAX_SHANNON_VARIABLES: usize = 6;
/// Largest DAG accepted by [`dag_system`]; elimination tracks row supports
/// in a `u128`, which fits the 127 coordinates of seven variables.
pub const MAX_DAG_VARIABLES: usize = 7;

/// Default cap on intermediate rows during elimination.
pub const DEFAULT_ROW_CAP: usize = 200_000;

pub type Mask = u32;

/// Renders a subset as `X,Y,B` in declaration order.
pub fn subset_name(variables: &[String], mask: Mask) -> String {
    let names: Vec<&str> =
        variables.iter().enumerate().filter(|(i, _)| mask & (1 << i) != 0).map(|(_, n)| n.as_str()).collect();
    names.join(",")
}

fn full_mask(v: usize) -> Mask {
    ((1u64 << v) - 1) as Mask
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Relation {
    /// `a·h ≥ 0`
    Geq,
    /// `a·h = 0`
    Eq,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ConstraintKind {
    Monotonicity,
    Submodularity,
    Causal,
    Derived,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Constraint {
    /// Dense coefficients, slot `S − 1` for subset `S`.
    pub coeffs: Vec<i64>,
    pub relation: Relation,
    pub kind: ConstraintKind,
}

impl Constraint {
    pub fn coefficient(&self, mask: Mask) -> i64 {
        self.coeffs[mask as usize - 1]
    }

    /// Nonzero `(subset, coefficient)` pairs.
    pub fn terms(&self) -> impl Iterator<Item = (Mask, i64)> + '_ {
        self.coeffs.iter().enumerate().filter(|(_, &c)| c != 0).map(|(i, &c)| (i as Mask + 1, c))
    }

    pub fn evaluate(&self, h: &EntropyVector) -> f64 {
        self.terms().map(|(m, c)| c as f64 * h.h(m)).sum()
    }

    pub fn holds(&self, h: &EntropyVector, tol: f64) -> bool {
        let v = self.evaluate(h);
        match self.relation {
            Relation::Geq => v >= -tol,
            Relation::Eq => v.abs() <= tol,
        }
    }
}

/// Linear constraints over the entropy coordinates of a variable set.
#[derive(Debug, Clone, PartialEq)]
pub struct InequalitySystem {
    variables: Vec<String>,
    constraints: Vec<Constraint>,
}

impl InequalitySystem {
    pub fn new(variables: Vec<String>, constraints: Vec<Constraint>) -> Result<Self> {
        if variables.is_empty() || variables.len() > 16 {
            return Err(Error::OutOfRange(format!("{} variables; expected 1..=16", variables.len())));
        }
        let dim = (1usize << variables.len()) - 1;
        if constraints.iter().any(|c| c.coeffs.len() != dim) {
            return Err(Error::DimensionMismatch(format!("constraints must have {dim} coefficients")));
        }
        Ok(Self { variables, constraints })
    }

    pub fn variables(&self) -> &[String] {
        &self.variables
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    pub fn dim(&self) -> usize {
        (1 << self.variables.len()) - 1
    }

    pub fn len(&self) -> usize {
        self.constraints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.constraints.is_empty()
    }

    pub fn inequalities(&self) -> impl Iterator<Item = &Constraint> {
        self.constraints.iter().filter(|c| c.relation == Relation::Geq)
    }

    pub fn equalities(&self) -> impl Iterator<Item = &Constraint> {
        self.constraints.iter().filter(|c| c.relation == Relation::Eq)
    }

    /// Concatenates the constraints of two systems over the same variables.
    pub fn join(&self, other: &InequalitySystem) -> Result<Self> {
        if self.variables != other.variables {
            return Err(Error::DimensionMismatch("systems over different variables".into()));
        }
        let mut constraints = self.constraints.clone();
        constraints.extend(other.constraints.iter().cloned());
        Ok(Self { variables: self.variables.clone(), constraints })
    }

    /// Mask of a variable name.
    pub fn mask_of(&self, names: &[&str]) -> Result<Mask> {
        mask_of(&self.variables, names)
    }

    pub fn format_constraint(&self, c: &Constraint) -> String {
        format_constraint(&self.variables, c)
    }

    /// One constraint per line, in the human-readable form.
    pub fn to_text(&self) -> String {
        self.constraints.iter().map(|c| self.format_constraint(c) + "\n").collect()
    }

    pub fn to_json(&self) -> serde_json::Value {
        let rows: Vec<serde_json::Value> = self
            .constraints
            .iter()
            .map(|c| {
                let coeffs: BTreeMap<String, i64> =
                    c.terms().map(|(m, v)| (subset_name(&self.variables, m), v)).collect();
                serde_json::json!({
                    "coefficients": coeffs,
                    "relation": c.relation,
                    "kind": c.kind,
                    "text": self.format_constraint(c),
                })
            })
            .collect();
        serde_json::json!({ "variables": self.variables, "constraints": rows })
    }
}

pub fn mask_of(variables: &[String], names: &[&str]) -> Result<Mask> {
    let mut m = 0;
    for n in names {
        let i = variables
            .iter()
            .position(|v| v == n)
            .ok_or_else(|| Error::Parse(format!("unknown variable {n:?}")))?;
        m |= 1 << i;
    }
    Ok(m)
}

/// Linear form builder: `H(A)` terms with integer coefficients.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Form(BTreeMap<Mask, i64>);

impl Form {
    pub fn h(mask: Mask) -> Self {
        let mut f = Form::default();
        f.add(mask, 1);
        f
    }

    pub fn add(&mut self, mask: Mask, c: i64) {
        if mask == 0 || c == 0 {
            return;
        }
        let e = self.0.entry(mask).or_insert(0);
        *e += c;
        if *e == 0 {
            self.0.remove(&mask);
        }
    }

    pub fn plus(mut self, other: &Form, c: i64) -> Self {
        for (&m, &v) in &other.0 {
            self.add(m, c * v);
        }
        self
    }

    /// `H(A|C) = H(AC) − H(C)`.
    pub fn cond_entropy(a: Mask, c: Mask) -> Self {
        let mut f = Form::h(a | c);
        f.add(c, -1);
        f
    }

    /// `I(A:B|C) = H(AC) + H(BC) − H(ABC) − H(C)`.
    pub fn mutual_info(a: Mask, b: Mask, c: Mask) -> Self {
        let mut f = Form::default();
        f.add(a | c, 1);
        f.add(b | c, 1);
        f.add(a | b | c, -1);
        f.add(c, -1);
        f
    }

    pub fn to_dense(&self, v: usize) -> Vec<i64> {
        let mut out = vec![0; (1 << v) - 1];
        for (&m, &c) in &self.0 {
            out[m as usize - 1] = c;
        }
        out
    }

    pub fn constraint(&self, v: usize, relation: Relation, kind: ConstraintKind) -> Constraint {
        Constraint { coeffs: self.to_dense(v), relation, kind }
    }
}

/// Elemental Shannon inequalities: `n + C(n,2)·2^(n−2)` rows.
pub fn shannon_cone(variables: &[String]) -> Result<InequalitySystem> {
    if variables.len() > MAX_SHANNON_VARIABLES {
        return Err(Error::CapExceeded {
            what: "Shannon cone variables".into(),
            needed: variables.len() as u128,
            cap: MAX_SHANNON_VARIABLES as u128,
        });
    }
    shannon_cone_uncapped(variables)
}

pub(crate) fn shannon_cone_uncapped(variables: &[String]) -> Result<InequalitySystem> {
    let v = variables.len();
    if v == 0 {
        return Err(Error::OutOfRange("empty variable set".into()));
    }
    let all = full_mask(v);
    let mut rows = Vec::new();
    for i in 0..v {
        rows.push(Form::cond_entropy(1 << i, all & !(1 << i)).constraint(v, Relation::Geq, ConstraintKind::Monotonicity));
    }
    for i in 0..v {
        for j in i + 1..v {
            let rest = all & !(1 << i) & !(1 << j);
            let mut k = rest;
            let mut ks = Vec::new();
            loop {
                ks.push(k);
                if k == 0 {
                    break;
                }
                k = (k - 1) & rest;
            }
            ks.sort_unstable();
            for k in ks {
                rows.push(
                    Form::mutual_info(1 << i, 1 << j, k).constraint(v, Relation::Geq, ConstraintKind::Submodularity),
                );
            }
        }
    }
    InequalitySystem::new(variables.to_vec(), rows)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NodeRole {
    /// Jointly independent sources.
    Exogenous,
    /// A function of its parents.
    Deterministic,
}

/// A DAG with role annotations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CausalDag {
    pub nodes: Vec<String>,
    pub roles: Vec<NodeRole>,
    /// `(parent, child)` index pairs.
    pub edges: Vec<(usize, usize)>,
    /// Exogenous nodes whose joint is not assumed to factorize
    /// (e.g. correlated inputs `X₁, X₂`).
    #[serde(default)]
    pub correlated_groups: Vec<Vec<usize>>,
    /// Unobserved sources, eliminated together with the message.
    #[serde(default)]
    pub latent: Vec<usize>,
    /// The communicated system; only `H(M)` survives marginalization.
    #[serde(default)]
    pub message: Option<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct DagJson {
    nodes: Vec<DagNodeJson>,
    edges: Vec<(String, String)>,
    #[serde(default)]
    correlated: Vec<Vec<String>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct DagNodeJson {
    name: String,
    role: NodeRole,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    latent: bool,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    message: bool,
}

impl CausalDag {
    pub fn new(
        nodes: Vec<String>,
        roles: Vec<NodeRole>,
        edges: Vec<(usize, usize)>,
        correlated_groups: Vec<Vec<usize>>,
    ) -> Result<Self> {
        let dag = Self { nodes, roles, edges, correlated_groups, latent: vec![], message: None };
        dag.check()?;
        Ok(dag)
    }

    pub fn with_marginal(mut self, latent: Vec<usize>, message: Option<usize>) -> Result<Self> {
        self.latent = latent;
        self.message = message;
        self.check()?;
        Ok(self)
    }

    /// Coordinates kept by marginalization: every subset of the observed
    /// sources together with one outcome (a childless non-message node),
    /// plus `H(M)`.
    pub fn marginal_keep(&self) -> Result<Vec<Mask>> {
        let Some(m) = self.message else {
            return Err(Error::Unsupported("DAG has no message node".into()));
        };
        let n = self.nodes.len();
        let sources = (0..n)
            .filter(|&i| self.roles[i] == NodeRole::Exogenous && !self.latent.contains(&i))
            .fold(0 as Mask, |acc, i| acc | 1 << i);
        let outcomes: Vec<usize> = (0..n)
            .filter(|&i| i != m && !self.latent.contains(&i) && self.roles[i] == NodeRole::Deterministic)
            .filter(|&i| self.edges.iter().all(|&(a, _)| a != i))
            .collect();
        if outcomes.is_empty() {
            return Err(Error::Unsupported("DAG has no observed outcome".into()));
        }
        let groups: Vec<Mask> = outcomes.iter().map(|&o| sources | 1 << o).collect();
        Ok(keep_subsets(&groups, &[1 << m]))
    }

    fn check(&self) -> Result<()> {
        let n = self.nodes.len();
        if self.roles.len() != n {
            return Err(Error::DimensionMismatch("one role per node".into()));
        }
        if self.edges.iter().any(|&(a, b)| a >= n || b >= n || a == b) {
            return Err(Error::InvalidScenario("edge endpoint out of range or self-loop".into()));
        }
        if self.latent.iter().chain(&self.message).any(|&i| i >= n) {
            return Err(Error::InvalidScenario("latent or message node out of range".into()));
        }
        self.topological_order().map(|_| ())
    }

    /// Kahn's algorithm; fails on a directed cycle.
    pub fn topological_order(&self) -> Result<Vec<usize>> {
        let n = self.nodes.len();
        let mut indeg = vec![0; n];
        for &(_, b) in &self.edges {
            indeg[b] += 1;
        }
        let mut ready: BTreeSet<usize> = (0..n).filter(|&i| indeg[i] == 0).collect();
        let mut order = Vec::with_capacity(n);
        while let Some(&i) = ready.iter().next() {
            ready.remove(&i);
            order.push(i);
            for &(a, b) in &self.edges {
                if a == i {
                    indeg[b] -= 1;
                    if indeg[b] == 0 {
                        ready.insert(b);
                    }
                }
            }
        }
        if order.len() != n {
            return Err(Error::InvalidScenario("graph has a directed cycle".into()));
        }
        Ok(order)
    }

    pub fn parents(&self, child: usize) -> Vec<usize> {
        self.edges.iter().filter(|&&(_, b)| b == child).map(|&(a, _)| a).collect()
    }

    fn mask(idx: &[usize]) -> Mask {
        idx.iter().fold(0, |m, &i| m | (1 << i))
    }

    /// Prepare-and-measure: `X, Y, Λ → M → B` with `Y, Λ → B`.
    pub fn prepare_measure() -> Self {
        let nodes = ["X", "Y", "B", "M", "L"].map(String::from).to_vec();
        use NodeRole::*;
        let roles = vec![Exogenous, Exogenous, Deterministic, Deterministic, Exogenous];
        let edges = vec![(0, 3), (4, 3), (1, 2), (3, 2), (4, 2)];
        Self { nodes, roles, edges, correlated_groups: vec![], latent: vec![4], message: Some(3) }
    }

    /// Two measurements: `X₁, X₂, Λ → M`, `M, Λ → B₁, B₂`.
    pub fn two_measurements() -> Self {
        let nodes = ["X1", "X2", "B1", "B2", "M", "L"].map(String::from).to_vec();
        use NodeRole::*;
        let roles = vec![Exogenous, Exogenous, Deterministic, Deterministic, Deterministic, Exogenous];
        let edges = vec![(0, 4), (1, 4), (5, 4), (4, 2), (5, 2), (4, 3), (5, 3)];
        Self { nodes, roles, edges, correlated_groups: vec![vec![0, 1]], latent: vec![5], message: Some(4) }
    }

    /// The two-measurement DAG with the shared source split into `Λ₁ → M`
    /// and `Λ₂ → B₁, B₂`.
    pub fn two_measurements_split() -> Self {
        let nodes = ["X1", "X2", "B1", "B2", "M", "L1", "L2"].map(String::from).to_vec();
        use NodeRole::*;
        let roles = vec![Exogenous, Exogenous, Deterministic, Deterministic, Deterministic, Exogenous, Exogenous];
        let edges = vec![(0, 4), (1, 4), (5, 4), (4, 2), (6, 2), (4, 3), (6, 3)];
        Self { nodes, roles, edges, correlated_groups: vec![vec![0, 1]], latent: vec![5, 6], message: Some(4) }
    }

    /// `fig1b`, `fig1c`, `fig1c-split`.
    pub fn template(name: &str) -> Result<Self> {
        match name {
            "fig1b" => Ok(Self::prepare_measure()),
            "fig1c" => Ok(Self::two_measurements()),
            "fig1c-split" => Ok(Self::two_measurements_split()),
            other => Err(Error::Parse(format!("unknown DAG template {other:?}; expected fig1b, fig1c, fig1c-split"))),
        }
    }

    /// Edge-list JSON: `{"nodes":[{"name","role"}],"edges":[["X","M"]],"correlated":[["X1","X2"]]}`.
    pub fn from_json_str(text: &str) -> Result<Self> {
        let raw: DagJson = serde_json::from_str(text)?;
        let nodes: Vec<String> = raw.nodes.iter().map(|n| n.name.clone()).collect();
        let idx = |s: &str| {
            nodes.iter().position(|n| n == s).ok_or_else(|| Error::Parse(format!("edge references unknown node {s:?}")))
        };
        let edges = raw.edges.iter().map(|(a, b)| Ok((idx(a)?, idx(b)?))).collect::<Result<Vec<_>>>()?;
        let correlated = raw
            .correlated
            .iter()
            .map(|g| g.iter().map(|s| idx(s)).collect::<Result<Vec<_>>>())
            .collect::<Result<Vec<_>>>()?;
        let latent = (0..nodes.len()).filter(|&i| raw.nodes[i].latent).collect();
        let flagged: Vec<usize> = (0..nodes.len()).filter(|&i| raw.nodes[i].message).collect();
        if flagged.len() > 1 {
            return Err(Error::Parse("more than one message node".into()));
        }
        Self::new(nodes, raw.nodes.iter().map(|n| n.role).collect(), edges, correlated)?
            .with_marginal(latent, flagged.first().copied())
    }

    pub fn to_json_string(&self) -> String {
        let raw = DagJson {
            nodes: (0..self.nodes.len())
                .map(|i| DagNodeJson {
                    name: self.nodes[i].clone(),
                    role: self.roles[i],
                    latent: self.latent.contains(&i),
                    message: self.message == Some(i),
                })
                .collect(),
            edges: self.edges.iter().map(|&(a, b)| (self.nodes[a].clone(), self.nodes[b].clone())).collect(),
            correlated: self
                .correlated_groups
                .iter()
                .map(|g| g.iter().map(|&i| self.nodes[i].clone()).collect())
                .collect(),
        };
        serde_json::to_string_pretty(&raw).expect("dag serializes")
    }
}

/// Independence of the exogenous blocks and `H(child | parents) = 0` for
/// deterministic nodes. Deterministic siblings sharing the same parent set
/// are grouped into one constraint.
pub fn causal_constraints(dag: &CausalDag) -> Result<InequalitySystem> {
    dag.check()?;
    let v = dag.nodes.len();
    if v > 16 {
        return Err(Error::Unsupported("more than 16 nodes".into()));
    }
    let mut rows = Vec::new();

    let exo: Vec<usize> = (0..v).filter(|&i| dag.roles[i] == NodeRole::Exogenous).collect();
    if exo.iter().any(|&i| !dag.parents(i).is_empty()) {
        return Err(Error::Unsupported("exogenous nodes must be parentless".into()));
    }
    let mut blocks: Vec<Mask> = Vec::new();
    let mut grouped: HashSet<usize> = HashSet::new();
    for g in &dag.correlated_groups {
        if g.iter().any(|i| !exo.contains(i)) {
            return Err(Error::Unsupported("correlated groups must contain exogenous nodes only".into()));
        }
        blocks.push(CausalDag::mask(g));
        grouped.extend(g.iter().copied());
    }
    blocks.extend(exo.iter().filter(|i| !grouped.contains(i)).map(|&i| 1 << i));
    blocks.sort_unstable();
    if blocks.len() >= 2 {
        let all = blocks.iter().fold(0, |m, b| m | b);
        let mut f = Form::h(all);
        for &b in &blocks {
            f.add(b, -1);
        }
        rows.push(f.constraint(v, Relation::Eq, ConstraintKind::Causal));
    }

    let mut by_parents: BTreeMap<Mask, Mask> = BTreeMap::new();
    for c in dag.topological_order()? {
        if dag.roles[c] == NodeRole::Deterministic {
            let parents = dag.parents(c);
            if parents.is_empty() {
                return Err(Error::Unsupported(format!("deterministic node {} has no parents", dag.nodes[c])));
            }
            *by_parents.entry(CausalDag::mask(&parents)).or_insert(0) |= 1 << c;
        }
    }
    // Order: the deterministic groups as they appear topologically.
    let mut groups: Vec<(Mask, Mask)> = by_parents.into_iter().collect();
    let order = dag.topological_order()?;
    let rank = |m: Mask| order.iter().position(|&i| m & (1 << i) != 0).unwrap_or(usize::MAX);
    groups.sort_by_key(|&(_, children)| rank(children));
    for (parents, children) in groups {
        rows.push(Form::cond_entropy(children, parents).constraint(v, Relation::Eq, ConstraintKind::Causal));
    }
    InequalitySystem::new(dag.nodes.clone(), rows)
}

/// Rendering of a constraint as `lhs <= 0` / `lhs = 0`, using mutual
/// information terms where a short decomposition exists.
pub fn format_constraint(variables: &[String], c: &Constraint) -> String {
    // Internally `a·h ≥ 0`; print `−a·h ≤ 0`.
    let neg: Vec<i64> = c.coeffs.iter().map(|x| -x).collect();
    let lhs = describe_form(variables, &neg);
    match c.relation {
        Relation::Geq => format!("{lhs} <= 0"),
        Relation::Eq => format!("{lhs} = 0"),
    }
}

#[derive(Clone)]
struct Term {
    text: String,
    coeffs: Vec<i64>,
    /// Sort key: mutual informations first, then by size.
    rank: (u8, u32),
}

fn term_library(variables: &[String], support: Mask) -> Vec<Term> {
    let v = variables.len();
    let dim = (1usize << v) - 1;
    let subsets = |m: Mask| -> Vec<Mask> {
        let mut out = Vec::new();
        let mut s = m;
        while s != 0 {
            out.push(s);
            s = (s - 1) & m;
        }
        out.sort_unstable();
        out
    };
    let dense = |f: &Form| {
        let mut d = vec![0i64; dim];
        for (&m, &c) in &f.0 {
            d[m as usize - 1] = c;
        }
        d
    };
    let fits = |f: &Form| f.0.keys().all(|&m| m & !support == 0);
    let all_vars = full_mask(v);
    let mut terms = Vec::new();
    for a in subsets(all_vars) {
        let f = Form::h(a);
        if fits(&f) {
            terms.push(Term { text: format!("H({})", subset_name(variables, a)), coeffs: dense(&f), rank: (1, a.count_ones()) });
        }
    }
    for a in subsets(all_vars) {
        for b in subsets(all_vars & !a) {
            if a > b {
                continue;
            }
            let rest = all_vars & !a & !b;
            let mut cs = subsets(rest);
            cs.insert(0, 0);
            for c in cs {
                let f = Form::mutual_info(a, b, c);
                if f.0.is_empty() || !fits(&f) {
                    continue;
                }
                let text = if c == 0 {
                    format!("I({}:{})", subset_name(variables, a), subset_name(variables, b))
                } else {
                    format!(
                        "I({}:{}|{})",
                        subset_name(variables, a),
                        subset_name(variables, b),
                        subset_name(variables, c)
                    )
                };
                terms.push(Term { text, coeffs: dense(&f), rank: (0, (a | b | c).count_ones()) });
            }
        }
    }
    terms
}

/// Human-readable linear form. Tries sums of at most four `±I(..)`/`±H(..)`
/// terms before falling back to plain joint entropies.
pub fn describe_form(variables: &[String], coeffs: &[i64]) -> String {
    if coeffs.iter().all(|&c| c == 0) {
        return "0".into();
    }
    let support = coeffs
        .iter()
        .enumerate()
        .filter(|(_, &c)| c != 0)
        .fold(0 as Mask, |m, (i, _)| m | (i as Mask + 1));
    let nonzero = coeffs.iter().filter(|&&c| c != 0).count();
    if variables.len() <= 8 && nonzero <= 16 {
        if let Some(text) = decompose(variables, coeffs, support) {
            return text;
        }
    }
    plain_form(variables, coeffs)
}

fn plain_form(variables: &[String], coeffs: &[i64]) -> String {
    let mut terms: Vec<(Mask, i64)> =
        coeffs.iter().enumerate().filter(|(_, &c)| c != 0).map(|(i, &c)| (i as Mask + 1, c)).collect();
    terms.sort_by_key(|&(m, c)| (c < 0, m.count_ones(), m));
    join_terms(terms.iter().map(|&(m, c)| (c, format!("H({})", subset_name(variables, m)))))
}

fn join_terms(terms: impl Iterator<Item = (i64, String)>) -> String {
    let mut out = String::new();
    for (c, t) in terms {
        let mag = c.unsigned_abs();
        let body = if mag == 1 { t } else { format!("{mag}{t}") };
        if out.is_empty() {
            if c < 0 {
                out.push('-');
            }
            out.push_str(&body);
        } else {
            out.push_str(if c < 0 { " - " } else { " + " });
            out.push_str(&body);
        }
    }
    out
}

/// `support` is the union of the variables touched by the form; library
/// terms stay inside it.
fn decompose(variables: &[String], coeffs: &[i64], support: Mask) -> Option<String> {
    let mut lib = term_library(variables, support);
    lib.sort_by(|a, b| a.rank.cmp(&b.rank).then_with(|| a.text.cmp(&b.text)));
    let signed: Vec<(i64, usize)> = (0..lib.len()).flat_map(|i| [(1, i), (-1, i)]).collect();
    let key = |v: &[i64]| v.to_vec();

    let mut singles: HashMap<Vec<i64>, (i64, usize)> = HashMap::new();
    for &(s, i) in &signed {
        let v: Vec<i64> = lib[i].coeffs.iter().map(|&c| s * c).collect();
        singles.entry(key(&v)).or_insert((s, i));
    }
    let render = |parts: &mut Vec<(i64, usize)>| {
        parts.sort_by(|a, b| (a.0 < 0, lib[a.1].rank, &lib[a.1].text).cmp(&(b.0 < 0, lib[b.1].rank, &lib[b.1].text)));
        join_terms(parts.iter().map(|&(s, i)| (s, lib[i].text.clone())))
    };
    if let Some(&(s, i)) = singles.get(coeffs) {
        return Some(render(&mut vec![(s, i)]));
    }
    let sub = |a: &[i64], b: &[i64], s: i64| -> Vec<i64> { a.iter().zip(b).map(|(x, y)| x - s * y).collect() };
    let mut best: Option<(usize, String)> = None;
    let consider = |parts: &mut Vec<(i64, usize)>, best: &mut Option<(usize, String)>| {
        let text = render(parts);
        let score = parts.len() * 1000 + text.len();
        if best.as_ref().map_or(true, |(b, _)| score < *b) {
            *best = Some((score, text));
        }
    };
    for &(s1, i1) in &signed {
        let r1 = sub(coeffs, &lib[i1].coeffs, s1);
        if let Some(&(s2, i2)) = singles.get(&r1) {
            consider(&mut vec![(s1, i1), (s2, i2)], &mut best);
        }
    }
    if best.is_some() {
        return best.map(|(_, t)| t);
    }
    for (a, &(s1, i1)) in signed.iter().enumerate() {
        let r1 = sub(coeffs, &lib[i1].coeffs, s1);
        for &(s2, i2) in &signed[a + 1..] {
            if i2 == i1 {
                continue;
            }
            let r2 = sub(&r1, &lib[i2].coeffs, s2);
            if let Some(&(s3, i3)) = singles.get(&r2) {
                consider(&mut vec![(s1, i1), (s2, i2), (s3, i3)], &mut best);
            }
        }
    }
    if best.is_some() {
        return best.map(|(_, t)| t);
    }
    if lib.len() <= 400 {
        let mut pairs: HashMap<Vec<i64>, (usize, usize)> = HashMap::new();
        for (a, &(s1, i1)) in signed.iter().enumerate() {
            for (b, &(s2, i2)) in signed.iter().enumerate().skip(a + 1) {
                if i1 == i2 {
                    continue;
                }
                let v: Vec<i64> = lib[i1].coeffs.iter().zip(&lib[i2].coeffs).map(|(x, y)| s1 * x + s2 * y).collect();
                pairs.entry(v).or_insert((a, b));
            }
        }
        for (&ref v, &(a, b)) in &pairs {
            let r = sub(coeffs, v, 1);
            if let Some(&(c, e)) = pairs.get(&r) {
                let mut parts = vec![signed[a], signed[b], signed[c], signed[e]];
                let distinct: HashSet<usize> = parts.iter().map(|p| p.1).collect();
                if distinct.len() == 4 {
                    consider(&mut parts, &mut best);
                }
            }
        }
    }
    best.map(|(_, t)| t)
}

/// Entropies of every nonempty subset of a finite joint distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct EntropyVector {
    variables: Vec<String>,
    coords: Vec<f64>,
}

impl EntropyVector {
    pub fn new(variables: Vec<String>, coords: Vec<f64>) -> Result<Self> {
        if coords.len() != (1 << variables.len()) - 1 {
            return Err(Error::DimensionMismatch("one coordinate per nonempty subset".into()));
        }
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::Numerical("entropy coordinates must be finite".into()));
        }
        Ok(Self { variables, coords })
    }

    /// From a joint probability table over variables with the given
    /// cardinalities (row-major, first variable slowest).
    pub fn from_joint(variables: Vec<String>, cards: &[usize], probs: &[f64]) -> Result<Self> {
        let joint = JointTable::new(cards.to_vec(), probs.to_vec())?;
        if variables.len() != cards.len() {
            return Err(Error::DimensionMismatch("one cardinality per variable".into()));
        }
        let v = cards.len();
        let coords = (1..=full_mask(v)).map(|m| joint.entropy(m)).collect();
        Self::new(variables, coords)
    }

    pub fn variables(&self) -> &[String] {
        &self.variables
    }

    /// `H(S)`; `H(∅) = 0`.
    pub fn h(&self, mask: Mask) -> f64 {
        if mask == 0 {
            0.0
        } else {
            self.coords[mask as usize - 1]
        }
    }

    pub fn mutual_info(&self, a: Mask, b: Mask, c: Mask) -> f64 {
        self.h(a | c) + self.h(b | c) - self.h(a | b | c) - self.h(c)
    }
}

/// A joint table `p(v₁, …, v_k)` in floating point.
#[derive(Debug, Clone, PartialEq)]
pub struct JointTable {
    cards: Vec<usize>,
    probs: Vec<f64>,
}

impl JointTable {
    pub fn new(cards: Vec<usize>, probs: Vec<f64>) -> Result<Self> {
        let size: usize = cards.iter().product();
        if cards.is_empty() || cards.iter().any(|&c| c == 0) || probs.len() != size {
            return Err(Error::DimensionMismatch(format!("joint table needs {size} entries, got {}", probs.len())));
        }
        if probs.iter().any(|&p| p < -1e-12 || !p.is_finite()) {
            return Err(Error::InvalidDistribution("negative joint probability".into()));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidDistribution(format!("joint table sums to {total}")));
        }
        Ok(Self { cards, probs })
    }

    pub fn cards(&self) -> &[usize] {
        &self.cards
    }

    /// Entropy (bits) of the marginal on the variables in `mask`.
    pub fn entropy(&self, mask: Mask) -> f64 {
        let k = self.cards.len();
        let mut marg: HashMap<usize, f64> = HashMap::new();
        let mut idx = vec![0usize; k];
        for &p in &self.probs {
            if p > 0.0 {
                let mut key = 0;
                for i in 0..k {
                    if mask & (1 << i) != 0 {
                        key = key * self.cards[i] + idx[i];
                    }
                }
                *marg.entry(key).or_insert(0.0) += p;
            }
            for i in (0..k).rev() {
                idx[i] += 1;
                if idx[i] < self.cards[i] {
                    break;
                }
                idx[i] = 0;
            }
        }
        let mut keys: Vec<usize> = marg.keys().copied().collect();
        keys.sort_unstable();
        let ps: Vec<f64> = keys.iter().map(|k| marg[k]).collect();
        crate::entropy::entropy_bits(&ps)
    }

    pub fn mutual_info(&self, a: Mask, b: Mask, c: Mask) -> f64 {
        let h = |m: Mask| if m == 0 { 0.0 } else { self.entropy(m) };
        h(a | c) + h(b | c) - h(a | b | c) - h(c)
    }
}

#[derive(Clone, PartialEq, Eq, Hash)]
struct History(Vec<u64>);

impl History {
    fn single(i: usize, words: usize) -> Self {
        let mut h = History(vec![0; words]);
        h.0[i / 64] |= 1 << (i % 64);
        h
    }
    fn union(&self, o: &History) -> History {
        History(self.0.iter().zip(&o.0).map(|(a, b)| a | b).collect())
    }
    fn count(&self) -> usize {
        self.0.iter().map(|w| w.count_ones() as usize).sum()
    }
    fn strict_subset_of(&self, o: &History) -> bool {
        self != o && self.0.iter().zip(&o.0).all(|(a, b)| a & !b == 0)
    }
}

#[derive(Clone)]
struct FmRow {
    c: Vec<i64>,
    hist: History,
    /// Coordinates touched by any row in the history.
    support: u128,
}

fn support_of(c: &[i64]) -> u128 {
    c.iter().enumerate().filter(|(_, &x)| x != 0).fold(0, |m, (i, _)| m | 1 << i)
}

fn normalize(c: &mut [i64]) {
    let g = c.iter().fold(0i64, |g, &x| g.gcd(&x));
    if g > 1 {
        c.iter_mut().for_each(|x| *x /= g);
    }
}

fn overflow() -> Error {
    Error::Numerical("coefficient overflow during elimination".into())
}

/// `α·a − β·b`, normalized; `None` on overflow.
fn lin_comb(alpha: i64, a: &[i64], beta: i64, b: &[i64]) -> Option<Vec<i64>> {
    let mut out = Vec::with_capacity(a.len());
    for (&x, &y) in a.iter().zip(b) {
        out.push(alpha.checked_mul(x)?.checked_sub(beta.checked_mul(y)?)?);
    }
    normalize(&mut out);
    Some(out)
}

#[derive(Debug, Clone)]
pub struct FmOptions {
    pub row_cap: usize,
    /// Run a redundancy sweep after any step that leaves more rows than this.
    pub sweep_above: usize,
}

impl Default for FmOptions {
    fn default() -> Self {
        Self { row_cap: DEFAULT_ROW_CAP, sweep_above: 50 }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FmStats {
    pub substituted: usize,
    pub eliminated: usize,
    pub peak_rows: usize,
    pub redundant_removed: usize,
}

/// A projected system with trivial/non-trivial classification.
#[derive(Debug, Clone)]
pub struct Projection {
    /// Irredundant constraints over the kept coordinates.
    pub system: InequalitySystem,
    pub kept: Vec<Mask>,
    /// Indices into `system.constraints()` not implied by the Shannon cone
    /// of the variables appearing in the kept coordinates.
    pub nontrivial: Vec<usize>,
    pub stats: FmStats,
}

impl Projection {
    pub fn nontrivial_constraints(&self) -> impl Iterator<Item = &Constraint> {
        self.nontrivial.iter().map(|&i| &self.system.constraints()[i])
    }

    pub fn nontrivial_text(&self) -> Vec<String> {
        self.nontrivial_constraints().map(|c| self.system.format_constraint(c)).collect()
    }
}

/// Every nonempty subset of each group, plus the listed extra singletons.
pub fn keep_subsets(groups: &[Mask], extra: &[Mask]) -> Vec<Mask> {
    let mut out = BTreeSet::new();
    for &g in groups {
        let mut s = g;
        while s != 0 {
            out.insert(s);
            s = (s - 1) & g;
        }
    }
    out.extend(extra.iter().copied().filter(|&m| m != 0));
    out.into_iter().collect()
}

/// Projects the cone onto the coordinates in `keep` by equality
/// substitution followed by Fourier–Motzkin elimination, then removes
/// redundancy exactly and classifies the resulting constraints.
pub fn fm_eliminate(system: &InequalitySystem, keep: &[Mask]) -> Result<Projection> {
    fm_eliminate_with(system, keep, &FmOptions::default())
}

pub fn fm_eliminate_with(system: &InequalitySystem, keep: &[Mask], opts: &FmOptions) -> Result<Projection> {
    let dim = system.dim();
    if keep.iter().any(|&m| m == 0 || m as usize > dim) {
        return Err(Error::OutOfRange("kept coordinate outside the variable set".into()));
    }
    if dim > 128 {
        return Err(Error::Unsupported("elimination supports at most 7 variables".into()));
    }
    let keep_set: BTreeSet<usize> = keep.iter().map(|&m| m as usize - 1).collect();
    let mut stats = FmStats::default();

    let ineq_src: Vec<&Constraint> = system.inequalities().collect();
    let words = ineq_src.len().div_ceil(64).max(1);
    let mut rows: Vec<FmRow> = ineq_src
        .iter()
        .enumerate()
        .map(|(i, c)| FmRow { c: c.coeffs.clone(), hist: History::single(i, words), support: 0 })
        .collect();
    let mut eqs: Vec<Vec<i64>> = system.equalities().map(|c| c.coeffs.clone()).collect();
    let mut to_eliminate: BTreeSet<usize> = (0..dim).filter(|i| !keep_set.contains(i)).collect();

    // Equality substitution.
    let mut kept_eqs: Vec<Vec<i64>> = Vec::new();
    while let Some(mut e) = eqs.pop() {
        normalize(&mut e);
        let Some(&p) = to_eliminate.iter().rev().find(|&&i| e[i] != 0) else {
            if e.iter().any(|&x| x != 0) {
                kept_eqs.push(e);
            }
            continue;
        };
        let (cp, sign) = (e[p].abs(), e[p].signum());
        for r in rows.iter_mut() {
            if r.c[p] != 0 {
                r.c = lin_comb(cp, &r.c, sign * r.c[p], &e).ok_or_else(overflow)?;
            }
        }
        for other in eqs.iter_mut().chain(kept_eqs.iter_mut()) {
            if other[p] != 0 {
                *other = lin_comb(cp, other, sign * other[p], &e).ok_or_else(overflow)?;
            }
        }
        to_eliminate.remove(&p);
        stats.substituted += 1;
    }
    rows.retain(|r| r.c.iter().any(|&x| x != 0));
    dedup_rows(&mut rows);
    for r in rows.iter_mut() {
        r.support = support_of(&r.c);
    }
    let trace = std::env::var_os("PMENTROPY_TRACE").is_some();
    let started = std::time::Instant::now();
    if trace {
        eprintln!("substituted {} -> {} rows, {} to eliminate", stats.substituted, rows.len(), to_eliminate.len());
    }

    // Fourier–Motzkin on the remaining coordinates.
    let mut steps = 0usize;
    while !to_eliminate.is_empty() {
        let &c = to_eliminate
            .iter()
            .min_by_key(|&&c| {
                let pos = rows.iter().filter(|r| r.c[c] > 0).count();
                let neg = rows.iter().filter(|r| r.c[c] < 0).count();
                (pos * neg) as i64 - (pos + neg) as i64
            })
            .expect("non-empty");
        to_eliminate.remove(&c);
        steps += 1;
        let (mut pos, mut neg, mut next) = (Vec::new(), Vec::new(), Vec::new());
        for r in rows.drain(..) {
            match r.c[c].signum() {
                1 => pos.push(r),
                -1 => neg.push(r),
                _ => next.push(r),
            }
        }
        for p in &pos {
            for n in &neg {
                let hist = p.hist.union(&n.hist);
                let count = hist.count();
                if count > steps + 1 {
                    continue;
                }
                // (−n_c)·p + p_c·n
                let c_new = lin_comb(-n.c[c], &p.c, -p.c[c], &n.c).ok_or_else(overflow)?;
                let support = p.support | n.support;
                let vanished = (support & !support_of(&c_new)).count_ones() as usize;
                if vanished == support.count_ones() as usize || count > vanished + 1 {
                    continue;
                }
                next.push(FmRow { c: c_new, hist, support });
            }
        }
        dedup_rows(&mut next);
        minimal_histories(&mut next);
        if next.len() > opts.sweep_above {
            stats.redundant_removed += redundancy_sweep(&mut next)?;
        }
        stats.peak_rows = stats.peak_rows.max(next.len());
        if next.len() > opts.row_cap {
            return Err(Error::CapExceeded {
                what: "Fourier-Motzkin intermediate rows".into(),
                needed: next.len() as u128,
                cap: opts.row_cap as u128,
            });
        }
        if trace {
            eprintln!("fm step {steps}: coord {c} -> {} rows ({:?})", next.len(), started.elapsed());
        }
        rows = next;
        stats.eliminated += 1;
    }

    // Work in the kept coordinates from here on.
    let kept_idx: Vec<usize> = keep_set.iter().copied().collect();
    let project = |c: &[i64]| -> Vec<i64> { kept_idx.iter().map(|&i| c[i]).collect() };
    let ineqs: Vec<Vec<i64>> = rows.iter().map(|r| project(&r.c)).collect();
    let eqs: Vec<Vec<i64>> = kept_eqs.iter().map(|e| project(e)).collect();
    let (eqs, ineqs, removed) = clean_projected(eqs, ineqs)?;
    stats.redundant_removed += removed;
    if trace {
        eprintln!("cleanup: {} eqs, {} ineqs", eqs.len(), ineqs.len());
    }

    let lift = |c: &[i64], relation| {
        let mut full = vec![0; dim];
        for (k, &i) in kept_idx.iter().enumerate() {
            full[i] = c[k];
        }
        Constraint { coeffs: full, relation, kind: ConstraintKind::Derived }
    };
    let mut constraints: Vec<Constraint> = eqs.iter().map(|e| lift(e, Relation::Eq)).collect();
    constraints.extend(ineqs.iter().map(|r| lift(r, Relation::Geq)));
    let projected = InequalitySystem::new(system.variables().to_vec(), constraints)?;

    let nontrivial = classify(&projected, keep)?;
    Ok(Projection { system: projected, kept: keep.to_vec(), nontrivial, stats })
}

/// Drops rows implied by the others. Candidates come from a floating-point
/// screen and are confirmed by an exact LP on the screened support.
fn redundancy_sweep(rows: &mut Vec<FmRow>) -> Result<usize> {
    let active: Vec<usize> = {
        let all = rows.iter().fold(0u128, |m, r| m | support_of(&r.c));
        (0..128).filter(|i| all & (1 << i) != 0).collect()
    };
    let dense: Vec<Vec<f64>> = rows.iter().map(|r| active.iter().map(|&i| r.c[i] as f64).collect()).collect();
    let mut order: Vec<usize> = (0..rows.len()).collect();
    order.sort_by_key(|&i| std::cmp::Reverse(rows[i].hist.count()));
    let mut alive = vec![true; rows.len()];
    let mut removed = 0;
    for i in order {
        let others: Vec<usize> = (0..rows.len()).filter(|&j| j != i && alive[j]).collect();
        let cols: Vec<Vec<f64>> = others.iter().map(|&j| dense[j].clone()).collect();
        let Some(support) = conic_support_f64(&cols, &dense[i]) else { continue };
        let sup: Vec<Vec<Rational>> =
            support.iter().map(|&k| active.iter().map(|&c| int(rows[others[k]].c[c])).collect()).collect();
        let sr: Vec<&[Rational]> = sup.iter().map(|r| r.as_slice()).collect();
        let target: Vec<Rational> = active.iter().map(|&c| int(rows[i].c[c])).collect();
        if cone_implies(&sr, &[], &target)? {
            alive[i] = false;
            removed += 1;
        }
    }
    let mut k = alive.into_iter();
    rows.retain(|_| k.next().unwrap());
    Ok(removed)
}

fn dedup_rows(rows: &mut Vec<FmRow>) {
    let mut seen: HashMap<Vec<i64>, usize> = HashMap::new();
    let mut out: Vec<FmRow> = Vec::with_capacity(rows.len());
    for r in rows.drain(..) {
        match seen.get(&r.c) {
            Some(&k) => {
                if r.hist.count() < out[k].hist.count() {
                    out[k] = r;
                }
            }
            None => {
                seen.insert(r.c.clone(), out.len());
                out.push(r);
            }
        }
    }
    *rows = out;
}

/// Drops rows whose history strictly contains another row's history.
fn minimal_histories(rows: &mut Vec<FmRow>) {
    if rows.len() < 2 {
        return;
    }
    let mut order: Vec<usize> = (0..rows.len()).collect();
    order.sort_by_key(|&i| rows[i].hist.count());
    let keep: Vec<bool> = (0..rows.len())
        .into_par_iter()
        .map(|i| {
            let hi = &rows[i].hist;
            let ci = hi.count();
            !order.iter().take_while(|&&j| rows[j].hist.count() < ci).any(|&j| rows[j].hist.strict_subset_of(hi))
        })
        .collect();
    let mut k = keep.into_iter();
    rows.retain(|_| k.next().unwrap());
}

fn to_rat(c: &[i64]) -> Vec<Rational> {
    c.iter().map(|&x| int(x)).collect()
}

/// Detects implicit equalities, reduces modulo the equalities, and removes
/// redundant inequalities. Works from the extreme rays of the projected cone:
/// a row is kept iff its tight generators span a hyperplane of the cone.
fn clean_projected(eqs: Vec<Vec<i64>>, ineqs: Vec<Vec<i64>>) -> Result<(Vec<Vec<i64>>, Vec<Vec<i64>>, usize)> {
    let ineqs: Vec<Vec<i64>> = ineqs
        .into_iter()
        .filter(|r| r.iter().any(|&x| x != 0))
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let before = ineqs.len();
    let dim = eqs.first().or(ineqs.first()).map_or(0, |r| r.len());
    let big = |r: &[i64]| -> Vec<BigInt> { r.iter().map(|&x| BigInt::from(x)).collect() };
    let mut all: Vec<Vec<BigInt>> = Vec::new();
    for e in &eqs {
        all.push(big(e));
        all.push(e.iter().map(|&x| BigInt::from(-x)).collect());
    }
    all.extend(ineqs.iter().map(|r| big(r)));
    let gens = cone_generators(&all, dim);
    let gen_rat: Vec<Vec<Rational>> =
        gens.rays.iter().chain(&gens.lineality).map(|v| v.iter().cloned().map(Rational::from_integer).collect()).collect();
    let cone_rank = rank(&gen_rat);
    let lin_rat: Vec<Vec<Rational>> = gen_rat[gens.rays.len()..].to_vec();

    let mut eqs = eqs;
    let mut candidates = Vec::new();
    for r in ineqs {
        let rr = to_rat(&r);
        let tight: Vec<usize> = (0..gens.rays.len()).filter(|&k| dot(&rr, &gen_rat[k]).is_zero()).collect();
        if tight.len() == gens.rays.len() {
            eqs.push(r);
        } else {
            candidates.push((r, tight));
        }
    }
    let eqs = reduced_row_echelon(eqs)?;
    let mut seen: BTreeSet<Vec<usize>> = BTreeSet::new();
    let mut kept = Vec::new();
    for (r, tight) in candidates {
        if seen.contains(&tight) {
            continue;
        }
        let mut span: Vec<Vec<Rational>> = tight.iter().map(|&k| gen_rat[k].clone()).collect();
        span.extend(lin_rat.iter().cloned());
        if rank(&span) + 1 == cone_rank {
            seen.insert(tight);
            kept.push(reduce_modulo(&r, &eqs)?);
        }
    }
    kept.sort();
    kept.dedup();
    let removed = before - kept.len();
    Ok((eqs, kept, removed))
}

/// Integer RREF, pivoting on the highest-index coordinate of each row.
fn reduced_row_echelon(rows: Vec<Vec<i64>>) -> Result<Vec<Vec<i64>>> {
    let mut basis: Vec<(usize, Vec<i64>)> = Vec::new();
    for r in rows {
        let mut r = reduce_modulo(&r, &basis.iter().map(|(_, b)| b.clone()).collect::<Vec<_>>())?;
        let Some(p) = (0..r.len()).rev().find(|&i| r[i] != 0) else { continue };
        if r[p] < 0 {
            r.iter_mut().for_each(|x| *x = -*x);
        }
        for (_, b) in basis.iter_mut() {
            if b[p] != 0 {
                *b = lin_comb(r[p], b, b[p], &r).ok_or_else(overflow)?;
            }
        }
        basis.push((p, r));
    }
    basis.sort_by_key(|(p, _)| *p);
    Ok(basis.into_iter().map(|(_, b)| b).collect())
}

/// Eliminates each equality's pivot (its highest nonzero slot) from `row`,
/// keeping a positive multiple of `row`.
fn reduce_modulo(row: &[i64], eqs: &[Vec<i64>]) -> Result<Vec<i64>> {
    let mut r = row.to_vec();
    for e in eqs {
        let Some(p) = (0..e.len()).rev().find(|&i| e[i] != 0) else { continue };
        if r[p] != 0 {
            r = lin_comb(e[p].abs(), &r, e[p].signum() * r[p], e).ok_or_else(overflow)?;
        }
    }
    normalize(&mut r);
    Ok(r)
}

/// Indices of constraints not implied by the Shannon cone of the variables
/// that appear in `keep`.
fn classify(projected: &InequalitySystem, keep: &[Mask]) -> Result<Vec<usize>> {
    let vars_mask = keep.iter().fold(0 as Mask, |m, &k| m | k);
    let var_idx: Vec<usize> = (0..projected.variables().len()).filter(|&i| vars_mask & (1 << i) != 0).collect();
    let sub_vars: Vec<String> = var_idx.iter().map(|&i| projected.variables()[i].clone()).collect();
    let cone = shannon_cone_uncapped(&sub_vars)?;
    // Map a mask over the full variable list to one over `sub_vars`.
    let remap = |m: Mask| -> Mask {
        var_idx.iter().enumerate().fold(0, |acc, (k, &i)| if m & (1 << i) != 0 { acc | (1 << k) } else { acc })
    };
    let sub_dim = cone.dim();
    let cone_rows: Vec<Vec<Rational>> = cone.constraints().iter().map(|c| to_rat(&c.coeffs)).collect();
    let cr: Vec<&[Rational]> = cone_rows.iter().map(|r| r.as_slice()).collect();
    let lift = |coeffs: &[i64]| -> Vec<Rational> {
        let mut t = vec![Rational::from_integer(0.into()); sub_dim];
        for (i, &c) in coeffs.iter().enumerate() {
            if c != 0 {
                t[remap(i as Mask + 1) as usize - 1] = int(c);
            }
        }
        t
    };
    // Inequalities count as trivial when they follow from the cone together
    // with the projected equalities.
    let eq_rows: Vec<Vec<Rational>> = projected.equalities().map(|c| lift(&c.coeffs)).collect();
    let er: Vec<&[Rational]> = eq_rows.iter().map(|r| r.as_slice()).collect();
    let flags: Vec<bool> = projected
        .constraints()
        .par_iter()
        .map(|c| {
            let t = lift(&c.coeffs);
            Ok(match c.relation {
                Relation::Geq => !cone_implies(&cr, &er, &t)?,
                Relation::Eq => {
                    let neg: Vec<Rational> = t.iter().map(|x| -x).collect();
                    !(cone_implies(&cr, &[], &t)? && cone_implies(&cr, &[], &neg)?)
                }
            })
        })
        .collect::<Result<_>>()?;
    Ok(flags.iter().enumerate().filter(|(_, &f)| f).map(|(i, _)| i).collect())
}

/// Marginalizes the DAG's entropic description onto its observed
/// coordinates and `H(M)`.
pub fn derive_facets(dag: &CausalDag) -> Result<Projection> {
    fm_eliminate(&dag_system(dag)?, &dag.marginal_keep()?)
}

/// Builds the Shannon cone plus causal constraints of a DAG.
pub fn dag_system(dag: &CausalDag) -> Result<InequalitySystem> {
    if dag.nodes.len() > MAX_DAG_VARIABLES {
        return Err(Error::CapExceeded {
            what: "DAG variables".into(),
            needed: dag.nodes.len() as u128,
            cap: MAX_DAG_VARIABLES as u128,
        });
    }
    let cone = shannon_cone_uncapped(&dag.nodes)?;
    cone.join(&causal_constraints(dag)?)?.join(&implied_equalities(dag)?)
}

/// Equalities that follow from the causal constraints and the Shannon cone:
/// `H(T) = H(cl(T))` where `cl` adds every deterministic node whose parents
/// are already present, and additivity of entropy over independent source
/// blocks. Substituting them first keeps elimination small.
pub fn implied_equalities(dag: &CausalDag) -> Result<InequalitySystem> {
    dag.check()?;
    let v = dag.nodes.len();
    let full: Mask = ((1u64 << v) - 1) as Mask;
    let det: Vec<(usize, Mask)> = dag
        .topological_order()?
        .into_iter()
        .filter(|&c| dag.roles[c] == NodeRole::Deterministic)
        .map(|c| (c, CausalDag::mask(&dag.parents(c))))
        .collect();
    let closure = |mut t: Mask| loop {
        let before = t;
        for &(c, p) in &det {
            if t & p == p {
                t |= 1 << c;
            }
        }
        if t == before {
            return t;
        }
    };
    let mut rows = Vec::new();
    for t in 1..=full {
        let c = closure(t);
        if c != t {
            let mut f = Form::h(c);
            f.add(t, -1);
            rows.push(f.constraint(v, Relation::Eq, ConstraintKind::Derived));
        }
    }

    let exo: Mask = (0..v).filter(|&i| dag.roles[i] == NodeRole::Exogenous).fold(0, |m, i| m | 1 << i);
    let mut blocks: Vec<Mask> = dag.correlated_groups.iter().map(|g| CausalDag::mask(g)).collect();
    let grouped = blocks.iter().fold(0, |m, b| m | b);
    blocks.extend((0..v).filter(|&i| exo & !grouped & (1 << i) != 0).map(|i| 1 << i));
    let mut s = exo;
    while s != 0 {
        let parts: Vec<Mask> = blocks.iter().map(|b| b & s).filter(|&m| m != 0).collect();
        if parts.len() >= 2 {
            let mut f = Form::h(s);
            for p in parts {
                f.add(p, -1);
            }
            rows.push(f.constraint(v, Relation::Eq, ConstraintKind::Derived));
        }
        s = (s - 1) & exo;
    }
    InequalitySystem::new(dag.nodes.clone(), rows)
}

impl fmt::Display for InequalitySystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_text())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn names(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn elemental_counts() {
        assert_eq!(shannon_cone(&names(&["A", "B"])).unwrap().len(), 3);
        assert_eq!(shannon_cone(&names(&["A", "B", "C"])).unwrap().len(), 9);
        assert_eq!(shannon_cone(&names(&["A", "B", "C", "D", "E"])).unwrap().len(), 85);
        assert_eq!(shannon_cone(&names(&["A", "B", "C", "D", "E", "F"])).unwrap().len(), 246);
        assert!(matches!(
            shannon_cone(&names(&["A", "B", "C", "D", "E", "F", "G"])),
            Err(Error::CapExceeded { .. })
        ));
    }

    #[test]
    fn prepare_measure_causal_constraints() {
        let dag = CausalDag::prepare_measure();
        let sys = causal_constraints(&dag).unwrap();
        let m = |n: &[&str]| sys.mask_of(n).unwrap();
        let mut indep = Form::h(m(&["X", "Y", "L"]));
        indep.add(m(&["X"]), -1);
        indep.add(m(&["Y"]), -1);
        indep.add(m(&["L"]), -1);
        let expected = [
            indep.to_dense(5),
            Form::cond_entropy(m(&["M"]), m(&["X", "L"])).to_dense(5),
            Form::cond_entropy(m(&["B"]), m(&["Y", "M", "L"])).to_dense(5),
        ];
        let got: Vec<Vec<i64>> = sys.constraints().iter().map(|c| c.coeffs.clone()).collect();
        assert_eq!(got, expected.to_vec());
        assert!(sys.constraints().iter().all(|c| c.relation == Relation::Eq));
    }

    #[test]
    fn two_measurement_causal_constraints() {
        let sys = causal_constraints(&CausalDag::two_measurements()).unwrap();
        let text = sys.to_text();
        assert_eq!(sys.len(), 3);
        assert!(text.contains("H(M,L)"), "{text}");
        let m = |n: &[&str]| sys.mask_of(n).unwrap();
        let joint = Form::cond_entropy(m(&["B1", "B2"]), m(&["M", "L"])).to_dense(6);
        assert!(sys.constraints().iter().any(|c| c.coeffs == joint));
        let split = causal_constraints(&CausalDag::two_measurements_split()).unwrap();
        assert_eq!(split.len(), 3);
    }

    #[test]
    fn identity_projection_keeps_the_cone() {
        let sys = shannon_cone(&names(&["A", "B", "C"])).unwrap();
        let keep: Vec<Mask> = (1..8).collect();
        let p = fm_eliminate(&sys, &keep).unwrap();
        let mut a: Vec<Vec<i64>> = sys.constraints().iter().map(|c| c.coeffs.clone()).collect();
        let mut b: Vec<Vec<i64>> = p.system.constraints().iter().map(|c| c.coeffs.clone()).collect();
        a.sort();
        b.sort();
        assert_eq!(a, b);
        assert!(p.nontrivial.is_empty());
    }

    #[test]
    fn prepare_measure_facets() {
        let p = derive_facets(&CausalDag::prepare_measure()).unwrap();
        let mut text = p.nontrivial_text();
        text.sort();
        assert_eq!(text, vec!["I(X:Y) = 0".to_string(), "I(X:Y,B) - H(M) <= 0".to_string()]);
        assert!(p.system.to_text().contains("I(X:Y,B) - H(M) <= 0"));
    }

    #[test]
    fn projection_is_implied_by_input() {
        let sys = dag_system(&CausalDag::prepare_measure()).unwrap();
        let p = fm_eliminate(&sys, &CausalDag::prepare_measure().marginal_keep().unwrap()).unwrap();
        let ineq: Vec<Vec<Rational>> = sys.inequalities().map(|c| to_rat(&c.coeffs)).collect();
        let eq: Vec<Vec<Rational>> = sys.equalities().map(|c| to_rat(&c.coeffs)).collect();
        let ir: Vec<&[Rational]> = ineq.iter().map(|r| r.as_slice()).collect();
        let er: Vec<&[Rational]> = eq.iter().map(|r| r.as_slice()).collect();
        for c in p.system.constraints() {
            assert!(cone_implies(&ir, &er, &to_rat(&c.coeffs)).unwrap());
        }
    }

    #[test]
    fn keep_sets() {
        let keep = CausalDag::prepare_measure().marginal_keep().unwrap();
        assert_eq!(keep.len(), 8);
        let keep = CausalDag::two_measurements().marginal_keep().unwrap();
        // Subsets of {X1,X2,B1} and {X1,X2,B2} share the three subsets of {X1,X2}.
        assert_eq!(keep.len(), 7 + 7 - 3 + 1);
    }

    #[test]
    fn dag_json_round_trip() {
        for name in ["fig1b", "fig1c", "fig1c-split"] {
            let dag = CausalDag::template(name).unwrap();
            let back = CausalDag::from_json_str(&dag.to_json_string()).unwrap();
            assert_eq!(back, dag);
        }
        let cyclic = r#"{"nodes":[{"name":"A","role":"deterministic"},{"name":"B","role":"deterministic"}],
            "edges":[["A","B"],["B","A"]]}"#;
        assert!(CausalDag::from_json_str(cyclic).is_err());
        assert!(CausalDag::template("fig9").is_err());
    }

    #[test]
    fn rendering() {
        let v = names(&["X", "Y", "B", "M"]);
        let f = Form::mutual_info(1, 6, 0).plus(&Form::h(8), -1);
        assert_eq!(describe_form(&v, &f.to_dense(4)), "I(X:Y,B) - H(M)");
        assert_eq!(describe_form(&v, &Form::h(3).to_dense(4)), "H(X,Y)");
        assert_eq!(describe_form(&v, &vec![0; 15]), "0");
    }

    #[test]
    fn implied_equalities_hold_on_a_model() {
        // X, Y, L uniform bits; M = X xor L; B = Y and M, with L ignored by B.
        let dag = CausalDag::prepare_measure();
        let mut probs = vec![0.0; 32];
        for x in 0..2 {
            for y in 0..2 {
                for l in 0..2 {
                    let m = x ^ l;
                    let b = y & m;
                    // order: X, Y, B, M, L
                    probs[(((x * 2 + y) * 2 + b) * 2 + m) * 2 + l] = 0.125;
                }
            }
        }
        let h = EntropyVector::from_joint(dag.nodes.clone(), &[2; 5], &probs).unwrap();
        for c in dag_system(&dag).unwrap().constraints() {
            assert!(c.holds(&h, 1e-9), "{}", format_constraint(&dag.nodes, c));
        }
    }

    proptest! {
        #[test]
        fn entropy_vectors_satisfy_elemental_inequalities(raw in prop::collection::vec(0.0f64..1.0, 24)) {
            let total: f64 = raw.iter().sum::<f64>().max(1e-9);
            let probs: Vec<f64> = raw.iter().map(|p| p / total).collect();
            let vars = names(&["A", "B", "C"]);
            let h = EntropyVector::from_joint(vars.clone(), &[2, 3, 4], &probs).unwrap();
            for c in shannon_cone(&vars).unwrap().constraints() {
                prop_assert!(c.holds(&h, 1e-9));
            }
        }
    }
}
