//! Quantum ensembles and numerical upper bounds on the least von Neumann
//! entropy compatible with a witness value.
//!
//! For fixed states the best two-outcome measurements are known in closed
//! form: measurement `y` should be `±1` on the eigenspaces of
//! `ρ'_y = Σ_x v_xy ρ_x`, which scores `Σ_k |λ_yk|`. Only the states are
//! optimized, by Nelder-Mead under an exterior entropy penalty.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rational::to_f64;
use crate::strategies::for_each_message_map;
use crate::witness::LinearWitness;

/// Complex amplitude type used throughout.
pub type Complex = Complex64;
type C = Complex64;

const HERMITIAN_TOL: f64 = 1e-12;
const EIGEN_TOL: f64 = 1e-10;
const TRACE_TOL: f64 = 1e-10;
/// Largest Hilbert dimension handled by the optimizer.
pub const MAX_QUANTUM_DIM: usize = 4;

/// Dense complex `d × d` matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct CMatrix {
    d: usize,
    a: Vec<C>,
}

impl CMatrix {
    pub fn zeros(d: usize) -> Self {
        Self { d, a: vec![C::new(0.0, 0.0); d * d] }
    }

    pub fn identity(d: usize) -> Self {
        let mut m = Self::zeros(d);
        for i in 0..d {
            m.a[i * d + i] = C::new(1.0, 0.0);
        }
        m
    }

    pub fn from_rows(rows: &[Vec<C>]) -> Result<Self> {
        let d = rows.len();
        if rows.iter().any(|r| r.len() != d) {
            return Err(Error::DimensionMismatch("matrix must be square".into()));
        }
        Ok(Self { d, a: rows.concat() })
    }

    /// `|ψ⟩⟨ψ|` for the normalized `ψ`.
    pub fn projector(psi: &[C]) -> Result<Self> {
        let norm: f64 = psi.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if norm < 1e-300 || !norm.is_finite() {
            return Err(Error::Numerical("zero state vector".into()));
        }
        let d = psi.len();
        let mut m = Self::zeros(d);
        for i in 0..d {
            for j in 0..d {
                m.a[i * d + j] = psi[i] * psi[j].conj() / (norm * norm);
            }
        }
        Ok(m)
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn get(&self, i: usize, j: usize) -> C {
        self.a[i * self.d + j]
    }

    pub fn rows(&self) -> Vec<Vec<C>> {
        self.a.chunks(self.d).map(|r| r.to_vec()).collect()
    }

    pub fn adjoint(&self) -> Self {
        let d = self.d;
        let mut m = Self::zeros(d);
        for i in 0..d {
            for j in 0..d {
                m.a[j * d + i] = self.a[i * d + j].conj();
            }
        }
        m
    }

    pub fn mul(&self, o: &CMatrix) -> Self {
        let d = self.d;
        let mut m = Self::zeros(d);
        for i in 0..d {
            for k in 0..d {
                let x = self.a[i * d + k];
                if x == C::new(0.0, 0.0) {
                    continue;
                }
                for j in 0..d {
                    m.a[i * d + j] += x * o.a[k * d + j];
                }
            }
        }
        m
    }

    pub fn add_scaled(&mut self, c: f64, o: &CMatrix) {
        self.a.iter_mut().zip(&o.a).for_each(|(x, y)| *x += y * c);
    }

    pub fn scale(&mut self, c: f64) {
        self.a.iter_mut().for_each(|x| *x *= c);
    }

    pub fn trace(&self) -> C {
        (0..self.d).map(|i| self.a[i * self.d + i]).sum()
    }

    /// `U A U†`.
    pub fn conjugate(&self, u: &CMatrix) -> Self {
        u.mul(self).mul(&u.adjoint())
    }

    pub fn hermiticity_error(&self) -> f64 {
        let d = self.d;
        let mut worst: f64 = 0.0;
        for i in 0..d {
            for j in i..d {
                worst = worst.max((self.a[i * d + j] - self.a[j * d + i].conj()).norm());
            }
        }
        worst
    }

    /// Eigenvalues in ascending order, via cyclic Jacobi on the real
    /// symmetric embedding `[[Re, −Im], [Im, Re]]`, whose spectrum is that
    /// of the matrix with every value doubled.
    pub fn hermitian_eigenvalues(&self) -> Vec<f64> {
        let d = self.d;
        let n = 2 * d;
        let mut m = vec![0.0; n * n];
        for i in 0..d {
            for j in 0..d {
                let z = self.a[i * d + j];
                // Symmetrize away rounding noise.
                let w = self.a[j * d + i].conj();
                let (re, im) = ((z.re + w.re) / 2.0, (z.im + w.im) / 2.0);
                m[i * n + j] = re;
                m[(i + d) * n + (j + d)] = re;
                m[(i + d) * n + j] = im;
                m[i * n + (j + d)] = -im;
            }
        }
        let mut all = jacobi_eigenvalues(m, n);
        all.sort_by(f64::total_cmp);
        all.chunks(2).map(|p| (p[0] + p[1]) / 2.0).collect()
    }
}

/// Cyclic Jacobi rotations on a symmetric matrix; returns the diagonal once
/// the off-diagonal norm drops below the tolerance.
fn jacobi_eigenvalues(mut a: Vec<f64>, n: usize) -> Vec<f64> {
    for _sweep in 0..100 {
        let off: f64 = (0..n).flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j))).map(|(i, j)| a[i * n + j].powi(2)).sum();
        if off.sqrt() < HERMITIAN_TOL {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[p * n + q];
                if apq.abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q * n + q] - a[p * n + p]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[k * n + p], a[k * n + q]);
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[p * n + k], a[q * n + k]);
                    a[p * n + k] = c * apk - s * aqk;
                    a[q * n + k] = s * apk + c * aqk;
                }
            }
        }
    }
    (0..n).map(|i| a[i * n + i]).collect()
}

/// States `ρ_x` with preparation weights `p(x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantumEnsemble {
    d: usize,
    states: Vec<CMatrix>,
    weights: Vec<f64>,
    real_only: bool,
}

impl QuantumEnsemble {
    pub fn new(states: Vec<CMatrix>, weights: Vec<f64>, real_only: bool) -> Result<Self> {
        let Some(d) = states.first().map(|s| s.d) else {
            return Err(Error::DimensionMismatch("ensemble needs at least one state".into()));
        };
        if weights.len() != states.len() {
            return Err(Error::DimensionMismatch(format!("{} states but {} weights", states.len(), weights.len())));
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) || (weights.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidDistribution("ensemble weights must be a probability vector".into()));
        }
        for (x, s) in states.iter().enumerate() {
            if s.d != d {
                return Err(Error::DimensionMismatch(format!("state {x} has dimension {}, expected {d}", s.d)));
            }
            check_density(s).map_err(|e| Error::InvalidBehavior(format!("state {x}: {e}")))?;
            if real_only && s.a.iter().any(|z| z.im.abs() > HERMITIAN_TOL) {
                return Err(Error::InvalidBehavior(format!("state {x} has complex entries in real mode")));
            }
        }
        Ok(Self { d, states, weights, real_only })
    }

    /// Pure states from (unnormalized) amplitude vectors.
    pub fn from_pure(vectors: &[Vec<C>], weights: Vec<f64>, real_only: bool) -> Result<Self> {
        let states = vectors.iter().map(|v| CMatrix::projector(v)).collect::<Result<Vec<_>>>()?;
        Self::new(states, weights, real_only)
    }

    /// Orthogonal basis states `|g(x)⟩`: the embedding of a classical
    /// message map.
    pub fn classical(g: &[usize], d: usize, weights: Vec<f64>) -> Result<Self> {
        if g.iter().any(|&m| m >= d) {
            return Err(Error::OutOfRange(format!("message label outside 0..{d}")));
        }
        let vectors: Vec<Vec<C>> = g
            .iter()
            .map(|&m| (0..d).map(|i| C::new(if i == m { 1.0 } else { 0.0 }, 0.0)).collect())
            .collect();
        Self::from_pure(&vectors, weights, true)
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn states(&self) -> &[CMatrix] {
        &self.states
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn real_only(&self) -> bool {
        self.real_only
    }

    /// `ρ = Σ p(x) ρ_x`.
    pub fn average(&self) -> CMatrix {
        let mut m = CMatrix::zeros(self.d);
        for (s, &w) in self.states.iter().zip(&self.weights) {
            m.add_scaled(w, s);
        }
        m
    }

    /// Same ensemble with every state replaced by `U ρ_x U†`.
    pub fn conjugated(&self, u: &CMatrix) -> Result<Self> {
        Self::new(self.states.iter().map(|s| s.conjugate(u)).collect(), self.weights.clone(), false)
    }

    pub fn to_json(&self) -> serde_json::Value {
        let raw = EnsembleJson {
            d: self.d,
            real_only: self.real_only,
            weights: self.weights.clone(),
            states: self
                .states
                .iter()
                .map(|s| s.rows().into_iter().map(|r| r.into_iter().map(|z| [z.re, z.im]).collect()).collect())
                .collect(),
        };
        serde_json::to_value(raw).expect("ensemble serializes")
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let raw: EnsembleJson = serde_json::from_str(text)?;
        let states = raw
            .states
            .iter()
            .map(|rows| {
                let rows: Vec<Vec<C>> = rows.iter().map(|r| r.iter().map(|&[re, im]| C::new(re, im)).collect()).collect();
                CMatrix::from_rows(&rows)
            })
            .collect::<Result<Vec<_>>>()?;
        if states.iter().any(|s| s.d != raw.d) {
            return Err(Error::DimensionMismatch("state size differs from declared d".into()));
        }
        Self::new(states, raw.weights, raw.real_only)
    }
}

#[derive(Serialize, Deserialize)]
struct EnsembleJson {
    d: usize,
    real_only: bool,
    weights: Vec<f64>,
    states: Vec<Vec<Vec<[f64; 2]>>>,
}

fn check_density(s: &CMatrix) -> Result<()> {
    if s.hermiticity_error() > HERMITIAN_TOL {
        return Err(Error::Numerical("not Hermitian".into()));
    }
    if (s.trace().re - 1.0).abs() > TRACE_TOL {
        return Err(Error::Numerical(format!("trace {} != 1", s.trace().re)));
    }
    if s.hermitian_eigenvalues().first().is_some_and(|&l| l < -EIGEN_TOL) {
        return Err(Error::Numerical("negative eigenvalue".into()));
    }
    Ok(())
}

fn entropy_of_spectrum(eigs: &[f64]) -> f64 {
    eigs.iter().filter(|&&m| m > 0.0).map(|&m| -m * m.log2()).sum::<f64>().max(0.0)
}

/// `S(ρ)` of the average state, in bits.
pub fn ensemble_entropy(e: &QuantumEnsemble) -> Result<f64> {
    let avg = e.average();
    check_density(&avg)?;
    Ok(entropy_of_spectrum(&avg.hermitian_eigenvalues()))
}

fn reduced_operators(states: &[CMatrix], w: &LinearWitness) -> Vec<CMatrix> {
    let d = states[0].d;
    (0..w.l())
        .map(|y| {
            let mut m = CMatrix::zeros(d);
            for (x, s) in states.iter().enumerate() {
                let v = to_f64(w.coefficient(x, y));
                if v != 0.0 {
                    m.add_scaled(v, s);
                }
            }
            m
        })
        .collect()
}

fn check_shape(e: &QuantumEnsemble, w: &LinearWitness) -> Result<()> {
    if e.states.len() != w.n() {
        return Err(Error::DimensionMismatch(format!(
            "witness {} has {} preparations, ensemble has {}",
            w.name(),
            w.n(),
            e.states.len()
        )));
    }
    Ok(())
}

/// Witness value with the best `±1` observables: `Σ_y Σ_k |λ_k(ρ'_y)|`.
pub fn optimal_witness_value(e: &QuantumEnsemble, w: &LinearWitness) -> Result<f64> {
    check_shape(e, w)?;
    let mut total = 0.0;
    for m in reduced_operators(&e.states, w) {
        if m.hermiticity_error() > 1e-9 {
            return Err(Error::Numerical("reduced operator is not Hermitian".into()));
        }
        total += m.hermitian_eigenvalues().iter().map(|l| l.abs()).sum::<f64>();
    }
    Ok(total)
}

/// Witness value for explicit observables `M_y`: `Σ_y tr(M_y ρ'_y)`.
pub fn witness_value_with(e: &QuantumEnsemble, w: &LinearWitness, observables: &[CMatrix]) -> Result<f64> {
    check_shape(e, w)?;
    if observables.len() != w.l() {
        return Err(Error::DimensionMismatch(format!("{} observables for {} measurements", observables.len(), w.l())));
    }
    Ok(reduced_operators(&e.states, w).iter().zip(observables).map(|(r, m)| m.mul(r).trace().re).sum())
}

/// Random unitary from Gram–Schmidt on uniform complex vectors.
pub fn random_unitary(d: usize, rng: &mut impl Rng) -> CMatrix {
    loop {
        let mut cols: Vec<Vec<C>> = Vec::with_capacity(d);
        let mut ok = true;
        for _ in 0..d {
            let mut v: Vec<C> = (0..d).map(|_| C::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
            for c in &cols {
                let ip: C = c.iter().zip(&v).map(|(a, b)| a.conj() * b).sum();
                v.iter_mut().zip(c).for_each(|(x, y)| *x -= ip * y);
            }
            let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            if norm < 1e-6 {
                ok = false;
                break;
            }
            v.iter_mut().for_each(|z| *z /= norm);
            cols.push(v);
        }
        if ok {
            let mut u = CMatrix::zeros(d);
            for (j, c) in cols.iter().enumerate() {
                for i in 0..d {
                    u.a[i * d + j] = c[i];
                }
            }
            return u;
        }
    }
}

/// How states are parametrized during the search.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum StateMode {
    /// Unnormalized amplitude vectors.
    #[default]
    Pure,
    /// `ρ = T T† / tr(T T†)` for a square factor `T`.
    Mixed,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuantumOptions {
    pub restarts: usize,
    pub seed: u64,
    pub real_only: bool,
    pub mode: StateMode,
    /// Objective evaluations per Nelder-Mead run.
    pub max_evals: usize,
    pub initial_penalty: f64,
    /// Penalty is multiplied by 10 this many times.
    pub escalations: usize,
    /// Also start from embedded classical strategies.
    pub classical_seeds: bool,
}

impl Default for QuantumOptions {
    fn default() -> Self {
        Self {
            restarts: 50,
            seed: 0,
            real_only: false,
            mode: StateMode::Pure,
            max_evals: 4000,
            initial_penalty: 10.0,
            escalations: 3,
            classical_seeds: true,
        }
    }
}

/// Where a local search started.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum StartKind {
    Random,
    Classical,
    Warm,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RestartOutcome {
    pub kind: StartKind,
    /// Seed of the random start; 0 otherwise.
    pub seed: u64,
    pub value: f64,
    pub entropy: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuantumOptimum {
    pub value: f64,
    pub entropy: f64,
    pub ensemble: QuantumEnsemble,
    /// Index into `restarts` of the winning start.
    pub best_restart: usize,
    pub seed: u64,
    pub restarts: Vec<RestartOutcome>,
    params: Vec<f64>,
}

struct Problem<'a> {
    w: &'a LinearWitness,
    d: usize,
    n: usize,
    weights: Vec<f64>,
    real_only: bool,
    mode: StateMode,
    cap: f64,
}

impl Problem<'_> {
    fn per_state(&self) -> usize {
        let entries = match self.mode {
            StateMode::Pure => self.d,
            StateMode::Mixed => self.d * self.d,
        };
        if self.real_only {
            entries
        } else {
            2 * entries
        }
    }

    fn num_params(&self) -> usize {
        self.n * self.per_state()
    }

    fn entry(&self, chunk: &[f64], i: usize) -> C {
        if self.real_only {
            C::new(chunk[i], 0.0)
        } else {
            C::new(chunk[2 * i], chunk[2 * i + 1])
        }
    }

    fn states(&self, p: &[f64]) -> Option<Vec<CMatrix>> {
        let d = self.d;
        p.chunks(self.per_state())
            .map(|chunk| match self.mode {
                StateMode::Pure => {
                    let psi: Vec<C> = (0..d).map(|i| self.entry(chunk, i)).collect();
                    CMatrix::projector(&psi).ok()
                }
                StateMode::Mixed => {
                    let t = CMatrix { d, a: (0..d * d).map(|i| self.entry(chunk, i)).collect() };
                    let mut rho = t.mul(&t.adjoint());
                    let tr = rho.trace().re;
                    if tr < 1e-300 || !tr.is_finite() {
                        return None;
                    }
                    rho.scale(1.0 / tr);
                    Some(rho)
                }
            })
            .collect()
    }

    /// `(value, entropy)` at a parameter vector.
    fn evaluate(&self, p: &[f64]) -> Option<(f64, f64)> {
        let states = self.states(p)?;
        let mut avg = CMatrix::zeros(self.d);
        for (s, &w) in states.iter().zip(&self.weights) {
            avg.add_scaled(w, s);
        }
        let s = entropy_of_spectrum(&avg.hermitian_eigenvalues());
        let v = reduced_operators(&states, self.w)
            .iter()
            .map(|m| m.hermitian_eigenvalues().iter().map(|l| l.abs()).sum::<f64>())
            .sum();
        Some((v, s))
    }

    fn feasible(&self, s: f64) -> bool {
        s <= self.cap + 1e-13
    }

    /// Parameters with every state equal to a single pure state, whose
    /// average has zero entropy.
    fn collapsed(&self, p: &[f64]) -> Vec<f64> {
        let k = self.per_state();
        let mut first: Vec<f64> = p[..k].to_vec();
        if self.mode == StateMode::Mixed {
            // Keep only the first column of T.
            let d = self.d;
            for row in 0..d {
                for col in 1..d {
                    let i = row * d + col;
                    if self.real_only {
                        first[i] = 0.0;
                    } else {
                        first[2 * i] = 0.0;
                        first[2 * i + 1] = 0.0;
                    }
                }
            }
        }
        if first.iter().all(|&x| x.abs() < 1e-12) {
            first[0] = 1.0;
        }
        first.repeat(self.n)
    }

    /// Moves an infeasible point toward its collapsed version until the
    /// entropy cap holds.
    fn repair(&self, p: &[f64]) -> Option<(Vec<f64>, f64, f64)> {
        let (v, s) = self.evaluate(p)?;
        if self.feasible(s) {
            return Some((p.to_vec(), v, s));
        }
        let target = self.collapsed(p);
        let mix = |t: f64| -> Vec<f64> { p.iter().zip(&target).map(|(a, b)| (1.0 - t) * a + t * b).collect() };
        let (mut lo, mut hi) = (0.0, 1.0);
        let end = mix(1.0);
        let (ve, se) = self.evaluate(&end)?;
        if !self.feasible(se) {
            return None;
        }
        let mut best = (end, ve, se);
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            let q = mix(mid);
            match self.evaluate(&q) {
                Some((vq, sq)) if self.feasible(sq) => {
                    hi = mid;
                    best = (q, vq, sq);
                }
                _ => lo = mid,
            }
        }
        Some(best)
    }

    fn local_search(&self, start: &[f64], opts: &QuantumOptions) -> Option<(Vec<f64>, f64, f64)> {
        let mut x = start.to_vec();
        let mut penalty = opts.initial_penalty;
        for stage in 0..=opts.escalations {
            if stage > 0 {
                penalty *= 10.0;
            }
            let f = |p: &[f64]| match self.evaluate(p) {
                Some((v, s)) => -v + penalty * (s - self.cap).max(0.0),
                None => f64::INFINITY,
            };
            x = nelder_mead(&f, &x, 0.25, opts.max_evals, 1e-13);
        }
        let repaired = self.repair(&x);
        // The start itself is a candidate when feasible.
        let own = self.evaluate(start).filter(|&(_, s)| self.feasible(s)).map(|(v, s)| (start.to_vec(), v, s));
        match (repaired, own) {
            (Some(a), Some(b)) => Some(if b.1 > a.1 { b } else { a }),
            (a, b) => a.or(b),
        }
    }

    fn random_start(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        (0..self.num_params()).map(|_| rng.gen_range(-1.0..1.0)).collect()
    }

    fn classical_params(&self, g: &[usize]) -> Vec<f64> {
        let k = self.per_state();
        let mut p = vec![0.0; self.num_params()];
        for (x, &m) in g.iter().enumerate() {
            let i = match self.mode {
                StateMode::Pure => m,
                StateMode::Mixed => m * self.d + m,
            };
            let slot = if self.real_only { i } else { 2 * i };
            p[x * k + slot] = 1.0;
        }
        p
    }

    /// Best few embedded classical strategies within the cap.
    fn classical_starts(&self, keep: usize) -> Vec<Vec<f64>> {
        let mut found: Vec<(f64, Vec<usize>)> = Vec::new();
        for_each_message_map(self.n, self.d, |g| {
            let mut pm = vec![0.0; self.d];
            for (x, &m) in g.iter().enumerate() {
                pm[m] += self.weights[x];
            }
            if self.feasible(entropy_of_spectrum(&pm)) {
                if let Some((v, _)) = self.evaluate(&self.classical_params(g)) {
                    found.push((v, g.to_vec()));
                }
            }
        });
        found.sort_by(|a, b| b.0.total_cmp(&a.0).then_with(|| a.1.cmp(&b.1)));
        found.dedup_by(|a, b| (a.0 - b.0).abs() < 1e-12);
        found.into_iter().take(keep).map(|(_, g)| self.classical_params(&g)).collect()
    }
}

/// Derives the seed of random start `i` from the run seed.
pub fn restart_seed(seed: u64, i: usize) -> u64 {
    let mut z = seed ^ (i as u64).wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Best witness value found with `S(ρ) ≤ s` over qudits of dimension `d`.
/// The result is attained by the returned ensemble, so it bounds the true
/// constrained maximum from below.
pub fn max_witness_given_entropy(w: &LinearWitness, d: usize, s: f64, opts: &QuantumOptions) -> Result<QuantumOptimum> {
    max_witness_warm(w, d, s, opts, None)
}

fn max_witness_warm(
    w: &LinearWitness,
    d: usize,
    s: f64,
    opts: &QuantumOptions,
    warm: Option<&[f64]>,
) -> Result<QuantumOptimum> {
    if !(2..=MAX_QUANTUM_DIM).contains(&d) {
        return Err(Error::OutOfRange(format!("Hilbert dimension must be in 2..={MAX_QUANTUM_DIM}, got {d}")));
    }
    if !(s >= 0.0) {
        return Err(Error::Infeasible(format!("entropy cap {s} is negative")));
    }
    let weights: Vec<f64> = w.scenario().input_weights().iter().map(to_f64).collect();
    let problem = Problem {
        w,
        d,
        n: w.n(),
        weights: weights.clone(),
        real_only: opts.real_only,
        mode: opts.mode,
        cap: s,
    };

    let mut starts: Vec<(StartKind, u64, Vec<f64>)> = (0..opts.restarts)
        .map(|i| {
            let seed = restart_seed(opts.seed, i);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (StartKind::Random, seed, problem.random_start(&mut rng))
        })
        .collect();
    if opts.classical_seeds {
        starts.extend(problem.classical_starts(3).into_iter().map(|p| (StartKind::Classical, 0, p)));
    }
    if let Some(p) = warm {
        if p.len() == problem.num_params() {
            starts.push((StartKind::Warm, 0, p.to_vec()));
        }
    }
    if starts.is_empty() {
        return Err(Error::OutOfRange("no restarts requested".into()));
    }

    let results: Vec<Option<(Vec<f64>, f64, f64)>> =
        starts.par_iter().map(|(_, _, p)| problem.local_search(p, opts)).collect();
    let mut outcomes = Vec::with_capacity(starts.len());
    let mut best: Option<(usize, Vec<f64>, f64, f64)> = None;
    for (i, ((kind, seed, _), r)) in starts.iter().zip(results).enumerate() {
        let (value, entropy) = r.as_ref().map_or((f64::NEG_INFINITY, f64::NAN), |(_, v, s)| (*v, *s));
        outcomes.push(RestartOutcome { kind: *kind, seed: *seed, value, entropy });
        if let Some((p, v, s)) = r {
            if best.as_ref().map_or(true, |b| v > b.2) {
                best = Some((i, p, v, s));
            }
        }
    }
    let Some((idx, params, value, entropy)) = best else {
        return Err(Error::Numerical("no restart produced a feasible ensemble".into()));
    };
    let states = problem.states(&params).ok_or_else(|| Error::Numerical("degenerate optimum".into()))?;
    let ensemble = QuantumEnsemble::new(states, weights, opts.real_only)?;
    Ok(QuantumOptimum {
        value,
        entropy,
        ensemble,
        best_restart: idx,
        seed: outcomes[idx].seed,
        restarts: outcomes,
        params,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QuantumCurvePoint {
    pub s_bits: f64,
    pub witness_value: f64,
    /// Entropy actually reached, at most `s_bits`.
    pub entropy: f64,
    pub restart_best_index: usize,
    pub seed: u64,
    #[serde(skip)]
    pub ensemble: QuantumEnsemble,
}

/// Best value at each entropy cap. Caps are processed in ascending order,
/// each warm-started from the previous optimum, so values never decrease.
pub fn quantum_entropy_curve(
    w: &LinearWitness,
    d: usize,
    grid: &[f64],
    opts: &QuantumOptions,
) -> Result<Vec<QuantumCurvePoint>> {
    let mut caps = grid.to_vec();
    caps.sort_by(f64::total_cmp);
    let mut out = Vec::with_capacity(caps.len());
    let mut warm: Option<Vec<f64>> = None;
    for s in caps {
        let r = max_witness_warm(w, d, s, opts, warm.as_deref())?;
        out.push(QuantumCurvePoint {
            s_bits: s,
            witness_value: r.value,
            entropy: r.entropy,
            restart_best_index: r.best_restart,
            seed: r.seed,
            ensemble: r.ensemble,
        });
        warm = Some(r.params);
    }
    Ok(out)
}

/// Smallest cap on the curve whose best value reaches `value`.
pub fn inverted_entropy(curve: &[QuantumCurvePoint], value: f64) -> Option<f64> {
    curve.iter().filter(|p| p.witness_value >= value).map(|p| p.s_bits).min_by(f64::total_cmp)
}

pub fn quantum_curve_csv(curve: &[QuantumCurvePoint]) -> String {
    let mut out = String::from("s_bits,witness_value,restart_best_index,seed\n");
    for p in curve {
        out.push_str(&format!("{:.12},{:.12},{},{}\n", p.s_bits, p.witness_value, p.restart_best_index, p.seed));
    }
    out
}

/// Plain Nelder-Mead minimization with a fixed-size initial simplex.
pub fn nelder_mead(f: &dyn Fn(&[f64]) -> f64, x0: &[f64], step: f64, max_evals: usize, tol: f64) -> Vec<f64> {
    let n = x0.len();
    if n == 0 {
        return Vec::new();
    }
    let mut simplex: Vec<Vec<f64>> = vec![x0.to_vec()];
    for i in 0..n {
        let mut v = x0.to_vec();
        v[i] += if v[i].abs() > 1e-8 { step * v[i].abs().max(0.5) } else { step };
        simplex.push(v);
    }
    let mut vals: Vec<f64> = simplex.iter().map(|v| f(v)).collect();
    let mut evals = n + 1;
    while evals < max_evals {
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&a, &b| vals[a].total_cmp(&vals[b]));
        simplex = order.iter().map(|&i| simplex[i].clone()).collect();
        vals = order.iter().map(|&i| vals[i]).collect();
        if (vals[n] - vals[0]).abs() <= tol * (1.0 + vals[0].abs()) {
            break;
        }
        let centroid: Vec<f64> = (0..n).map(|j| simplex[..n].iter().map(|v| v[j]).sum::<f64>() / n as f64).collect();
        let along = |t: f64| -> Vec<f64> { centroid.iter().zip(&simplex[n]).map(|(c, w)| c + t * (c - w)).collect() };
        let xr = along(1.0);
        let fr = f(&xr);
        evals += 1;
        if fr < vals[0] {
            let xe = along(2.0);
            let fe = f(&xe);
            evals += 1;
            if fe < fr {
                simplex[n] = xe;
                vals[n] = fe;
            } else {
                simplex[n] = xr;
                vals[n] = fr;
            }
        } else if fr < vals[n - 1] {
            simplex[n] = xr;
            vals[n] = fr;
        } else {
            let (xc, fc) = if fr < vals[n] {
                let x = along(0.5);
                let v = f(&x);
                (x, v)
            } else {
                let x = along(-0.5);
                let v = f(&x);
                (x, v)
            };
            evals += 1;
            if fc < vals[n].min(fr) {
                simplex[n] = xc;
                vals[n] = fc;
            } else {
                let best = simplex[0].clone();
                for i in 1..=n {
                    simplex[i] = best.iter().zip(&simplex[i]).map(|(b, v)| b + 0.5 * (v - b)).collect();
                    vals[i] = f(&simplex[i]);
                }
                evals += n;
            }
        }
    }
    let best = (0..=n).min_by(|&a, &b| vals[a].total_cmp(&vals[b])).unwrap_or(0);
    simplex.swap_remove(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::witness::{make_in, make_r4};

    fn ket(v: &[(f64, f64)]) -> Vec<C> {
        v.iter().map(|&(a, b)| C::new(a, b)).collect()
    }

    fn random_ensemble(n: usize, d: usize, rng: &mut ChaCha8Rng) -> QuantumEnsemble {
        let states = (0..n)
            .map(|_| {
                let t = CMatrix {
                    d,
                    a: (0..d * d).map(|_| C::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect(),
                };
                let mut r = t.mul(&t.adjoint());
                let tr = r.trace().re;
                r.scale(1.0 / tr);
                r
            })
            .collect();
        QuantumEnsemble::new(states, vec![1.0 / n as f64; n], false).unwrap()
    }

    #[test]
    fn eigenvalues_of_a_complex_hermitian() {
        // Pauli Y has eigenvalues ±1.
        let y = CMatrix::from_rows(&[ket(&[(0.0, 0.0), (0.0, -1.0)]), ket(&[(0.0, 1.0), (0.0, 0.0)])]).unwrap();
        let e = y.hermitian_eigenvalues();
        assert!((e[0] + 1.0).abs() < 1e-12 && (e[1] - 1.0).abs() < 1e-12);
        let m = CMatrix::from_rows(&[ket(&[(2.0, 0.0), (1.0, 1.0)]), ket(&[(1.0, -1.0), (3.0, 0.0)])]).unwrap();
        let e = m.hermitian_eigenvalues();
        // trace 5, det 4
        assert!((e[0] + e[1] - 5.0).abs() < 1e-12);
        assert!((e[0] * e[1] - 4.0).abs() < 1e-12);
    }

    #[test]
    fn entropy_examples() {
        let same = QuantumEnsemble::from_pure(&vec![ket(&[(1.0, 0.0), (1.0, 0.0)]); 3], vec![1.0 / 3.0; 3], true).unwrap();
        assert!(ensemble_entropy(&same).unwrap().abs() < 1e-12);
        let two = QuantumEnsemble::classical(&[0, 1], 2, vec![0.5, 0.5]).unwrap();
        assert!((ensemble_entropy(&two).unwrap() - 1.0).abs() < 1e-12);
        for d in 2..=4 {
            let g: Vec<usize> = (0..d).collect();
            let e = QuantumEnsemble::classical(&g, d, vec![1.0 / d as f64; d]).unwrap();
            assert!((ensemble_entropy(&e).unwrap() - (d as f64).log2()).abs() < 1e-12);
        }
    }

    #[test]
    fn invalid_states_are_rejected() {
        let bad = CMatrix::from_rows(&[ket(&[(1.0, 0.0), (1.0, 0.0)]), ket(&[(0.0, 0.0), (0.0, 0.0)])]).unwrap();
        assert!(QuantumEnsemble::new(vec![bad], vec![1.0], false).is_err());
        let neg = CMatrix::from_rows(&[ket(&[(2.0, 0.0), (0.0, 0.0)]), ket(&[(0.0, 0.0), (-1.0, 0.0)])]).unwrap();
        assert!(QuantumEnsemble::new(vec![neg], vec![1.0], false).is_err());
        let plus = CMatrix::projector(&ket(&[(1.0, 0.0), (0.0, 1.0)])).unwrap();
        assert!(QuantumEnsemble::new(vec![plus], vec![1.0], true).is_err());
    }

    #[test]
    fn identical_states_score_one_on_i3() {
        let w = make_in(3).unwrap();
        let psi = ket(&[(0.6, 0.0), (0.0, 0.8), (0.0, 0.0)]);
        let e = QuantumEnsemble::from_pure(&[psi.clone(), psi.clone(), psi], vec![1.0 / 3.0; 3], false).unwrap();
        assert!((optimal_witness_value(&e, &w).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn classical_embedding_reaches_the_classical_maximum() {
        for n in 3..=4 {
            let w = make_in(n).unwrap();
            let g: Vec<usize> = (0..n).collect();
            let e = QuantumEnsemble::classical(&g, n, vec![1.0 / n as f64; n]).unwrap();
            let want = to_f64(w.bound(n).unwrap());
            assert_eq!(want, (n * (n + 1) / 2 - 1) as f64);
            assert!((optimal_witness_value(&e, &w).unwrap() - want).abs() < 1e-12);
            assert!((to_f64(&w.classical_max(n)) - want).abs() < 1e-12);
        }
    }

    #[test]
    fn explicit_observables_never_beat_the_optimum() {
        let w = make_in(3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..200 {
            let d = rng.gen_range(2..=4);
            let e = random_ensemble(3, d, &mut rng);
            let obs: Vec<CMatrix> = (0..w.l())
                .map(|_| {
                    let u = random_unitary(d, &mut rng);
                    let mut diag = CMatrix::zeros(d);
                    for i in 0..d {
                        diag.a[i * d + i] = C::new(if rng.gen_bool(0.5) { 1.0 } else { -1.0 }, 0.0);
                    }
                    diag.conjugate(&u)
                })
                .collect();
            let v = witness_value_with(&e, &w, &obs).unwrap();
            assert!(v <= optimal_witness_value(&e, &w).unwrap() + 1e-9);
        }
    }

    #[test]
    fn unitary_invariance_and_convexity() {
        let w = make_r4().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let e = random_ensemble(4, 3, &mut rng);
            let u = random_unitary(3, &mut rng);
            let c = e.conjugated(&u).unwrap();
            assert!((ensemble_entropy(&e).unwrap() - ensemble_entropy(&c).unwrap()).abs() < 1e-9);
            let (a, b) = (optimal_witness_value(&e, &w).unwrap(), optimal_witness_value(&c, &w).unwrap());
            assert!((a - b).abs() < 1e-9);

            let f = random_ensemble(4, 3, &mut rng);
            let x = rng.gen_range(0..4);
            let mut mid = e.states.clone();
            let mut other = e.states.clone();
            other[x] = f.states[x].clone();
            let mut m = e.states[x].clone();
            m.scale(0.5);
            m.add_scaled(0.5, &f.states[x]);
            mid[x] = m;
            let val = |s: Vec<CMatrix>| optimal_witness_value(&QuantumEnsemble::new(s, vec![0.25; 4], false).unwrap(), &w).unwrap();
            let (v0, v1, vm) = (val(e.states.clone()), val(other), val(mid));
            assert!(vm <= 0.5 * (v0 + v1) + 1e-9);
        }
    }

    #[test]
    fn json_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let e = random_ensemble(3, 2, &mut rng);
        let text = e.to_json().to_string();
        let back = QuantumEnsemble::from_json_str(&text).unwrap();
        assert_eq!(back, e);
    }

    #[test]
    fn nelder_mead_finds_a_quadratic_minimum() {
        let f = |x: &[f64]| (x[0] - 1.0).powi(2) + 3.0 * (x[1] + 2.0).powi(2);
        let x = nelder_mead(&f, &[0.0, 0.0], 0.5, 5000, 1e-15);
        assert!((x[0] - 1.0).abs() < 1e-5 && (x[1] + 2.0).abs() < 1e-5);
    }

    #[test]
    fn zero_entropy_cap_gives_one_message_bound() {
        let w = make_in(3).unwrap();
        let opts = QuantumOptions { restarts: 4, max_evals: 1500, ..Default::default() };
        let r = max_witness_given_entropy(&w, 2, 0.0, &opts).unwrap();
        assert!(r.entropy <= 1e-9);
        assert!((r.value - to_f64(w.bound(1).unwrap())).abs() < 1e-6, "{}", r.value);
    }

    #[test]
    fn qubits_beat_the_two_dimensional_classical_bound() {
        let w = make_in(3).unwrap();
        let opts = QuantumOptions { restarts: 6, max_evals: 2000, ..Default::default() };
        let r = max_witness_given_entropy(&w, 2, 1.0, &opts).unwrap();
        assert!(r.value > 3.0 + 1e-3, "{}", r.value);
        assert!(ensemble_entropy(&r.ensemble).unwrap() <= 1.0 + 1e-9);
        assert!((optimal_witness_value(&r.ensemble, &w).unwrap() - r.value).abs() < 1e-9);
    }

    #[test]
    fn curves_are_monotone_and_reproducible() {
        let w = make_in(3).unwrap();
        let opts = QuantumOptions { restarts: 3, max_evals: 800, seed: 5, ..Default::default() };
        let grid = [0.0, 0.3, 0.6, 1.0];
        let a = quantum_entropy_curve(&w, 2, &grid, &opts).unwrap();
        assert!(a.windows(2).all(|p| p[1].witness_value >= p[0].witness_value));
        let b = quantum_entropy_curve(&w, 2, &grid, &opts).unwrap();
        assert_eq!(quantum_curve_csv(&a), quantum_curve_csv(&b));
        assert!(quantum_curve_csv(&a).starts_with("s_bits,witness_value,restart_best_index,seed\n"));
    }

    #[test]
    fn rejects_bad_arguments() {
        let w = make_in(3).unwrap();
        let opts = QuantumOptions { restarts: 1, max_evals: 50, ..Default::default() };
        assert!(matches!(max_witness_given_entropy(&w, 2, -0.1, &opts), Err(Error::Infeasible(_))));
        assert!(max_witness_given_entropy(&w, 5, 1.0, &opts).is_err());
    }
}
