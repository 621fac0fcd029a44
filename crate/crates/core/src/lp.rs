//! Exact two-phase simplex over rationals for `A x = b, x ≥ 0`.
//!
//! Dense tableau, Bland's rule. Phase 1 is run once; its feasible basis can
//! then be reused for any number of phase-2 objectives.

use num_traits::{One, Signed, Zero};

use crate::error::{Error, Result};
use crate::rational::Rational;

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    /// Optimal objective value (of the minimization).
    pub value: Rational,
    pub x: Vec<Rational>,
    /// Row multipliers `y` with `c_j − y·A_j ≥ 0` at the optimum.
    pub duals: Vec<Rational>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Feasibility {
    Feasible(FeasibleTableau),
    /// `y` with `y·A ≤ 0` componentwise and `y·b > 0`.
    Infeasible { farkas: Vec<Rational> },
}

/// Simplex tableau `[B⁻¹A | B⁻¹ | B⁻¹b]` with a primal feasible basis.
#[derive(Debug, Clone, PartialEq)]
pub struct FeasibleTableau {
    rows: Vec<Vec<Rational>>,
    basis: Vec<usize>,
    n: usize,
    m: usize,
    /// `-1` where the input row was negated to make `b ≥ 0`.
    row_sign: Vec<bool>,
}

/// Runs phase 1 on `A x = b, x ≥ 0`.
pub fn phase_one(a: &[Vec<Rational>], b: &[Rational]) -> Result<Feasibility> {
    let m = a.len();
    if b.len() != m {
        return Err(Error::DimensionMismatch(format!("{m} rows but {} right-hand sides", b.len())));
    }
    let n = a.first().map_or(0, |r| r.len());
    if a.iter().any(|r| r.len() != n) {
        return Err(Error::DimensionMismatch("ragged constraint matrix".into()));
    }
    let width = n + m + 1;
    let mut rows = Vec::with_capacity(m);
    let mut row_sign = Vec::with_capacity(m);
    for (i, (ar, bi)) in a.iter().zip(b).enumerate() {
        let flip = bi.is_negative();
        let mut row = Vec::with_capacity(width);
        row.extend(ar.iter().map(|v| if flip { -v } else { v.clone() }));
        row.extend((0..m).map(|j| if j == i { Rational::one() } else { Rational::zero() }));
        row.push(if flip { -bi } else { bi.clone() });
        rows.push(row);
        row_sign.push(flip);
    }
    let mut t = FeasibleTableau { rows, basis: (n..n + m).collect(), n, m, row_sign };

    // Phase-1 cost: 1 on every artificial column.
    let mut cost = vec![Rational::zero(); n + m];
    for c in cost.iter_mut().skip(n) {
        *c = Rational::one();
    }
    let mut rc = t.reduced_costs(&cost);
    t.optimize(&mut rc, n + m)?;
    let objective = -rc[n + m].clone();
    if objective.is_positive() {
        // y_i = 1 − rc(artificial_i), mapped back through the row signs.
        let farkas = (0..m)
            .map(|i| {
                let y = Rational::one() - &rc[n + i];
                if t.row_sign[i] {
                    -y
                } else {
                    y
                }
            })
            .collect();
        return Ok(Feasibility::Infeasible { farkas });
    }
    t.drive_out_artificials();
    Ok(Feasibility::Feasible(t))
}

/// Phase 1 followed by a single phase-2 minimization.
pub fn minimize(a: &[Vec<Rational>], b: &[Rational], c: &[Rational]) -> Result<LpSolution> {
    match phase_one(a, b)? {
        Feasibility::Feasible(t) => t.minimize(c),
        Feasibility::Infeasible { .. } => Err(Error::Infeasible("linear program has no feasible point".into())),
    }
}

impl FeasibleTableau {
    pub fn num_vars(&self) -> usize {
        self.n
    }

    pub fn num_rows(&self) -> usize {
        self.m
    }

    /// The basic feasible solution found by phase 1.
    pub fn point(&self) -> Vec<Rational> {
        self.solution()
    }

    pub fn minimize(&self, c: &[Rational]) -> Result<LpSolution> {
        if c.len() != self.n {
            return Err(Error::DimensionMismatch(format!("objective has {} entries, expected {}", c.len(), self.n)));
        }
        let mut t = self.clone();
        let mut cost = c.to_vec();
        cost.extend((0..self.m).map(|_| Rational::zero()));
        let mut rc = t.reduced_costs(&cost);
        t.optimize(&mut rc, self.n)?;
        let duals = (0..self.m)
            .map(|i| {
                let y = -rc[self.n + i].clone();
                if t.row_sign[i] {
                    -y
                } else {
                    y
                }
            })
            .collect();
        Ok(LpSolution { value: -rc[self.n + self.m].clone(), x: t.solution(), duals })
    }

    pub fn maximize(&self, c: &[Rational]) -> Result<LpSolution> {
        let neg: Vec<Rational> = c.iter().map(|v| -v).collect();
        let mut sol = self.minimize(&neg)?;
        sol.value = -sol.value;
        sol.duals.iter_mut().for_each(|y| *y = -y.clone());
        Ok(sol)
    }

    fn solution(&self) -> Vec<Rational> {
        let mut x = vec![Rational::zero(); self.n];
        let rhs = self.n + self.m;
        for (i, &j) in self.basis.iter().enumerate() {
            if j < self.n {
                x[j] = self.rows[i][rhs].clone();
            }
        }
        x
    }

    /// `c_j − c_B B⁻¹ A_j` for every column, with `−c_B B⁻¹ b` in the last slot.
    fn reduced_costs(&self, cost: &[Rational]) -> Vec<Rational> {
        let width = self.n + self.m + 1;
        let mut rc: Vec<Rational> = cost.to_vec();
        rc.push(Rational::zero());
        debug_assert_eq!(rc.len(), width);
        for (i, &j) in self.basis.iter().enumerate() {
            let cb = &cost[j];
            if cb.is_zero() {
                continue;
            }
            for (r, v) in rc.iter_mut().zip(&self.rows[i]) {
                if !v.is_zero() {
                    *r -= cb * v;
                }
            }
        }
        rc
    }

    /// Bland's-rule pivoting over columns `0..allowed` until optimal.
    fn optimize(&mut self, rc: &mut [Rational], allowed: usize) -> Result<()> {
        let rhs = self.n + self.m;
        loop {
            let Some(enter) = (0..allowed).find(|&j| rc[j].is_negative()) else {
                return Ok(());
            };
            let mut leave: Option<(usize, Rational)> = None;
            for i in 0..self.m {
                let a = &self.rows[i][enter];
                if !a.is_positive() {
                    continue;
                }
                let ratio = &self.rows[i][rhs] / a;
                let better = match &leave {
                    None => true,
                    Some((li, lr)) => ratio < *lr || (ratio == *lr && self.basis[i] < self.basis[*li]),
                };
                if better {
                    leave = Some((i, ratio));
                }
            }
            let Some((row, _)) = leave else {
                return Err(Error::Numerical("linear program is unbounded".into()));
            };
            self.pivot(row, enter, Some(rc));
        }
    }

    fn pivot(&mut self, row: usize, col: usize, rc: Option<&mut [Rational]>) {
        let piv = self.rows[row][col].clone();
        if !piv.is_one() {
            for v in self.rows[row].iter_mut() {
                if !v.is_zero() {
                    *v /= &piv;
                }
            }
        }
        let prow = std::mem::take(&mut self.rows[row]);
        let nz: Vec<usize> = (0..prow.len()).filter(|&j| !prow[j].is_zero()).collect();
        for (i, r) in self.rows.iter_mut().enumerate() {
            if i == row {
                continue;
            }
            let f = r[col].clone();
            if f.is_zero() {
                continue;
            }
            for &j in &nz {
                r[j] -= &f * &prow[j];
            }
        }
        if let Some(rc) = rc {
            let f = rc[col].clone();
            if !f.is_zero() {
                for &j in &nz {
                    rc[j] -= &f * &prow[j];
                }
            }
        }
        self.rows[row] = prow;
        self.basis[row] = col;
    }

    /// Replaces zero-level basic artificials by structural columns where
    /// possible; rows where that fails are redundant and left untouched.
    fn drive_out_artificials(&mut self) {
        for i in 0..self.m {
            if self.basis[i] < self.n {
                continue;
            }
            if let Some(j) = (0..self.n).find(|&j| !self.rows[i][j].is_zero()) {
                self.pivot(i, j, None);
            }
        }
    }
}

/// Is `target ≥ 0` implied by `rows_i ≥ 0` (i ∈ ineq) and `rows_j = 0`
/// (j ∈ eq) for all real vectors? Decided by the Farkas LP
/// `target = Σ λ_i a_i + Σ μ_j e_j`, `λ ≥ 0`, `μ` free.
pub fn cone_implies(ineq: &[&[Rational]], eq: &[&[Rational]], target: &[Rational]) -> Result<bool> {
    let dim = target.len();
    let cols = ineq.len() + 2 * eq.len();
    let mut a = vec![Vec::with_capacity(cols); dim];
    for (k, row) in a.iter_mut().enumerate() {
        row.extend(ineq.iter().map(|r| r[k].clone()));
        for e in eq {
            row.push(e[k].clone());
            row.push(-e[k].clone());
        }
    }
    Ok(matches!(phase_one(&a, target)?, Feasibility::Feasible(_)))
}

/// Floating-point phase 1 for `Σ λ_j cols_j = target, λ ≥ 0`. Returns the
/// columns carrying positive weight when a solution is found. Only a
/// screening step: callers must confirm the support exactly.
pub fn conic_support_f64(cols: &[Vec<f64>], target: &[f64]) -> Option<Vec<usize>> {
    const EPS: f64 = 1e-9;
    let m = target.len();
    let n = cols.len();
    let width = n + m + 1;
    let mut t: Vec<Vec<f64>> = (0..m)
        .map(|i| {
            let flip = if target[i] < 0.0 { -1.0 } else { 1.0 };
            let mut row = Vec::with_capacity(width);
            row.extend(cols.iter().map(|c| flip * c[i]));
            row.extend((0..m).map(|j| if j == i { 1.0 } else { 0.0 }));
            row.push(flip * target[i]);
            row
        })
        .collect();
    let mut basis: Vec<usize> = (n..n + m).collect();
    // Phase-1 reduced costs: minus the column sums over artificial rows.
    let mut cost = vec![0.0; width];
    for row in &t {
        for (c, v) in cost.iter_mut().zip(row) {
            *c -= v;
        }
    }
    for c in cost.iter_mut().skip(n).take(m) {
        *c += 1.0;
    }
    let limit = 50 * (n + m) + 1000;
    for iter in 0..limit {
        let bland = iter > limit / 2;
        let mut enter = None;
        let mut best = -EPS;
        for (j, &c) in cost.iter().enumerate().take(n + m) {
            if c < best {
                enter = Some(j);
                if bland {
                    break;
                }
                best = c;
            }
        }
        let Some(e) = enter else { break };
        let mut leave: Option<(usize, f64)> = None;
        for (i, row) in t.iter().enumerate() {
            if row[e] > EPS {
                let ratio = row[width - 1] / row[e];
                if leave.map_or(true, |(k, r)| ratio < r - EPS || (ratio <= r + EPS && basis[i] < basis[k])) {
                    leave = Some((i, ratio));
                }
            }
        }
        let (r, _) = leave?;
        let piv = t[r][e];
        t[r].iter_mut().for_each(|v| *v /= piv);
        let pivot_row = t[r].clone();
        for (i, row) in t.iter_mut().enumerate() {
            if i != r && row[e] != 0.0 {
                let f = row[e];
                row.iter_mut().zip(&pivot_row).for_each(|(v, p)| *v -= f * p);
            }
        }
        let f = cost[e];
        cost.iter_mut().zip(&pivot_row).for_each(|(v, p)| *v -= f * p);
        basis[r] = e;
    }
    let infeas: f64 = t.iter().zip(&basis).filter(|(_, &b)| b >= n).map(|(row, _)| row[width - 1]).sum();
    if infeas > 1e-7 {
        return None;
    }
    Some(t.iter().zip(&basis).filter(|(row, &b)| b < n && row[width - 1] > EPS).map(|(_, &b)| b).collect())
}
