//! Exact convex hulls by double description, and polytope reconstruction
//! from a linear-optimization oracle.

use std::collections::{BTreeSet, HashSet};

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, Zero};

use crate::error::{Error, Result};
use crate::rational::{dot, Rational};

/// Generators of `{z : M z ≥ 0}`: a lineality basis plus extreme rays.
#[derive(Debug, Clone, PartialEq)]
pub struct ConeGenerators {
    pub lineality: Vec<Vec<BigInt>>,
    pub rays: Vec<Vec<BigInt>>,
}

#[derive(Clone)]
struct Ray {
    v: Vec<BigInt>,
    zeros: Bits,
}

#[derive(Clone, PartialEq, Eq, Hash)]
struct Bits(Vec<u64>);

impl Bits {
    fn new(len: usize) -> Self {
        Bits(vec![0; len.div_ceil(64).max(1)])
    }
    fn set(&mut self, i: usize) {
        self.0[i / 64] |= 1 << (i % 64);
    }
    fn and(&self, o: &Bits) -> Bits {
        Bits(self.0.iter().zip(&o.0).map(|(a, b)| a & b).collect())
    }
    fn subset_of(&self, o: &Bits) -> bool {
        self.0.iter().zip(&o.0).all(|(a, b)| a & !b == 0)
    }
    fn count(&self) -> usize {
        self.0.iter().map(|w| w.count_ones() as usize).sum()
    }
}

fn idot(a: &[BigInt], b: &[BigInt]) -> BigInt {
    a.iter().zip(b).fold(BigInt::zero(), |acc, (x, y)| acc + x * y)
}

/// Divides by the gcd of the entries.
pub fn primitive(v: &mut [BigInt]) {
    let g = v.iter().fold(BigInt::zero(), |g, x| g.gcd(x));
    if !g.is_zero() && !g.is_one() {
        v.iter_mut().for_each(|x| *x /= &g);
    }
}

fn combine(alpha: &BigInt, a: &[BigInt], beta: &BigInt, b: &[BigInt]) -> Vec<BigInt> {
    let mut v: Vec<BigInt> = a.iter().zip(b).map(|(x, y)| alpha * x - beta * y).collect();
    primitive(&mut v);
    v
}

/// Double description with lineality handling and the combinatorial
/// adjacency test.
pub fn cone_generators(constraints: &[Vec<BigInt>], dim: usize) -> ConeGenerators {
    let mut lineality: Vec<Vec<BigInt>> = (0..dim)
        .map(|i| (0..dim).map(|j| if i == j { BigInt::one() } else { BigInt::zero() }).collect())
        .collect();
    let mut rays: Vec<Ray> = Vec::new();
    let total = constraints.len();

    for (i, m) in constraints.iter().enumerate() {
        if let Some(pos) = lineality.iter().position(|l| !idot(m, l).is_zero()) {
            let mut l0 = lineality.swap_remove(pos);
            let mut s0 = idot(m, &l0);
            if s0.is_negative() {
                l0.iter_mut().for_each(|x| *x = -x.clone());
                s0 = -s0;
            }
            for l in lineality.iter_mut() {
                let s = idot(m, l);
                if !s.is_zero() {
                    *l = combine(&s0, l, &s, &l0);
                }
            }
            for r in rays.iter_mut() {
                let s = idot(m, &r.v);
                if !s.is_zero() {
                    r.v = combine(&s0, &r.v, &s, &l0);
                }
                r.zeros.set(i);
            }
            let mut zeros = Bits::new(total);
            for j in 0..i {
                zeros.set(j);
            }
            rays.push(Ray { v: l0, zeros });
            continue;
        }

        let vals: Vec<BigInt> = rays.iter().map(|r| idot(m, &r.v)).collect();
        let pointed_dim = dim - lineality.len();
        let mut next: Vec<Ray> = Vec::new();
        for (r, s) in rays.iter().zip(&vals) {
            if !s.is_negative() {
                let mut r = r.clone();
                if s.is_zero() {
                    r.zeros.set(i);
                }
                next.push(r);
            }
        }
        let pos: Vec<usize> = (0..rays.len()).filter(|&k| vals[k].is_positive()).collect();
        let neg: Vec<usize> = (0..rays.len()).filter(|&k| vals[k].is_negative()).collect();
        for &p in &pos {
            for &q in &neg {
                let common = rays[p].zeros.and(&rays[q].zeros);
                if common.count() + 2 < pointed_dim {
                    continue;
                }
                let blocked = rays
                    .iter()
                    .enumerate()
                    .any(|(k, r)| k != p && k != q && common.subset_of(&r.zeros));
                if blocked {
                    continue;
                }
                let v = combine(&vals[p], &rays[q].v, &vals[q], &rays[p].v);
                let mut zeros = common;
                zeros.set(i);
                next.push(Ray { v, zeros });
            }
        }
        rays = next;
    }
    ConeGenerators { lineality, rays: rays.into_iter().map(|r| r.v).collect() }
}

/// Affine description `{p : eq·p = h (each), a·p ≤ h (each)}`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct HalfspaceRep {
    pub equalities: Vec<(Vec<Rational>, Rational)>,
    pub facets: Vec<(Vec<Rational>, Rational)>,
}

impl HalfspaceRep {
    pub fn contains(&self, p: &[Rational]) -> bool {
        self.equalities.iter().all(|(a, h)| dot(a, p) == *h) && self.facets.iter().all(|(a, h)| dot(a, p) <= *h)
    }
}

fn to_rational(v: &[BigInt]) -> Vec<Rational> {
    v.iter().map(|x| Rational::from_integer(x.clone())).collect()
}

/// Scales a rational vector to a primitive integer vector.
fn integer_row(v: &[Rational]) -> Vec<BigInt> {
    let l = v.iter().fold(BigInt::one(), |l, x| l.lcm(x.denom()));
    let mut out: Vec<BigInt> = v.iter().map(|x| (x * Rational::from_integer(l.clone())).to_integer()).collect();
    primitive(&mut out);
    out
}

/// Facets and affine hull of `conv(points)`.
pub fn hull(points: &[Vec<Rational>]) -> Result<HalfspaceRep> {
    let Some(first) = points.first() else {
        return Err(Error::InvalidBehavior("convex hull of an empty point set".into()));
    };
    let r = first.len();
    // z = (h, a) with h − a·v ≥ 0 for every point v.
    let constraints: Vec<Vec<BigInt>> = points
        .iter()
        .map(|v| {
            let mut row = vec![Rational::one()];
            row.extend(v.iter().map(|x| -x.clone()));
            integer_row(&row)
        })
        .collect();
    let gens = cone_generators(&constraints, r + 1);
    let split = |z: &[BigInt]| {
        let z = to_rational(z);
        (z[1..].to_vec(), z[0].clone())
    };
    let equalities = gens.lineality.iter().map(|z| split(z)).collect();
    let facets = gens.rays.iter().filter(|z| z[1..].iter().any(|x| !x.is_zero())).map(|z| split(z)).collect();
    Ok(HalfspaceRep { equalities, facets })
}

/// Rank of a set of rational rows.
pub fn rank(rows: &[Vec<Rational>]) -> usize {
    let mut m: Vec<Vec<Rational>> = rows.to_vec();
    let cols = m.first().map_or(0, |r| r.len());
    let mut rank = 0;
    for c in 0..cols {
        let Some(p) = (rank..m.len()).find(|&i| !m[i][c].is_zero()) else { continue };
        m.swap(rank, p);
        let piv = m[rank][c].clone();
        let prow: Vec<Rational> = m[rank].iter().map(|x| x / &piv).collect();
        for (i, row) in m.iter_mut().enumerate() {
            if i != rank && !row[c].is_zero() {
                let f = row[c].clone();
                for (x, y) in row.iter_mut().zip(&prow) {
                    *x -= &f * y;
                }
            }
        }
        m[rank] = prow;
        rank += 1;
    }
    rank
}

/// Points of `points` that are vertices of their convex hull, in
/// lexicographic order.
pub fn extreme_points(points: &[Vec<Rational>], h: &HalfspaceRep) -> Vec<Vec<Rational>> {
    let Some(first) = points.first() else { return Vec::new() };
    let r = first.len();
    let unique: BTreeSet<&Vec<Rational>> = points.iter().collect();
    unique
        .into_iter()
        .filter(|v| {
            let mut rows: Vec<Vec<Rational>> = h.equalities.iter().map(|(a, _)| a.clone()).collect();
            rows.extend(h.facets.iter().filter(|(a, b)| dot(a, v) == *b).map(|(a, _)| a.clone()));
            rank(&rows) == r
        })
        .cloned()
        .collect()
}

/// Result of [`hull_from_oracle`].
#[derive(Debug, Clone, PartialEq)]
pub struct OraclePolytope {
    pub vertices: Vec<Vec<Rational>>,
    pub hrep: HalfspaceRep,
    pub oracle_calls: usize,
}

/// Reconstructs a polytope `P ⊂ R^r` from `oracle(a) ∈ argmax_{p∈P} a·p`.
///
/// The hull of the points found so far is refined until every facet and
/// every affine-hull equation is certified by the oracle.
pub fn hull_from_oracle(
    r: usize,
    max_points: usize,
    mut oracle: impl FnMut(&[Rational]) -> Result<Vec<Rational>>,
) -> Result<OraclePolytope> {
    let mut calls = 0;
    let mut ask = |a: &[Rational], calls: &mut usize| -> Result<Vec<Rational>> {
        *calls += 1;
        oracle(a)
    };
    let mut points: BTreeSet<Vec<Rational>> = BTreeSet::new();
    if r == 0 {
        points.insert(ask(&[], &mut calls)?);
        let pts: Vec<_> = points.into_iter().collect();
        return Ok(OraclePolytope { vertices: pts, hrep: HalfspaceRep::default(), oracle_calls: calls });
    }
    let mut seeds: Vec<Vec<Rational>> = Vec::new();
    for i in 0..r {
        let e: Vec<Rational> = (0..r).map(|j| if i == j { Rational::one() } else { Rational::zero() }).collect();
        seeds.push(e.iter().map(|x| -x.clone()).collect());
        seeds.push(e);
    }
    seeds.push(vec![Rational::one(); r]);
    seeds.push(vec![-Rational::one(); r]);
    for a in &seeds {
        points.insert(ask(a, &mut calls)?);
    }

    let mut certified: HashSet<(Vec<Rational>, Rational)> = HashSet::new();
    loop {
        let pts: Vec<Vec<Rational>> = points.iter().cloned().collect();
        let h = hull(&pts)?;
        let mut queries: Vec<(Vec<Rational>, Rational)> = h.facets.clone();
        for (a, b) in &h.equalities {
            queries.push((a.clone(), b.clone()));
            queries.push((a.iter().map(|x| -x.clone()).collect(), -b.clone()));
        }
        let mut grew = false;
        for (a, b) in queries {
            if certified.contains(&(a.clone(), b.clone())) {
                continue;
            }
            let q = ask(&a, &mut calls)?;
            if dot(&a, &q) > b {
                grew |= points.insert(q);
            } else {
                certified.insert((a, b));
            }
        }
        if points.len() > max_points {
            return Err(Error::CapExceeded {
                what: "polytope reconstruction points".into(),
                needed: points.len() as u128,
                cap: max_points as u128,
            });
        }
        if !grew {
            let vertices = extreme_points(&pts, &h);
            return Ok(OraclePolytope { vertices, hrep: h, oracle_calls: calls });
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{int, rat};

    fn pts(v: &[&[i64]]) -> Vec<Vec<Rational>> {
        v.iter().map(|p| p.iter().map(|&x| int(x)).collect()).collect()
    }

    #[test]
    fn square_hull() {
        let p = pts(&[&[0, 0], &[1, 0], &[0, 1], &[1, 1], &[0, 0]]);
        let mut with_centre = p.clone();
        with_centre.push(vec![rat(1, 2), rat(1, 2)]);
        let h = hull(&with_centre).unwrap();
        assert_eq!(h.facets.len(), 4);
        assert!(h.equalities.is_empty());
        assert_eq!(extreme_points(&with_centre, &h).len(), 4);
        assert!(h.contains(&[rat(1, 3), rat(2, 3)]));
        assert!(!h.contains(&[rat(4, 3), rat(2, 3)]));
    }

    #[test]
    fn lower_dimensional_hulls() {
        let seg = pts(&[&[0, 0, 1], &[1, 1, 1], &[2, 2, 1]]);
        let h = hull(&seg).unwrap();
        assert_eq!(h.equalities.len(), 2);
        assert_eq!(h.facets.len(), 2);
        assert_eq!(extreme_points(&seg, &h), pts(&[&[0, 0, 1], &[2, 2, 1]]));

        let single = pts(&[&[3, 4]]);
        let h = hull(&single).unwrap();
        assert_eq!(h.equalities.len(), 2);
        assert!(h.facets.is_empty());
        assert_eq!(extreme_points(&single, &h).len(), 1);
    }

    #[test]
    fn cube_facets() {
        let mut p = Vec::new();
        for m in 0..8i64 {
            p.push(vec![int(m & 1), int((m >> 1) & 1), int((m >> 2) & 1)]);
        }
        let h = hull(&p).unwrap();
        assert_eq!(h.facets.len(), 6);
        // octahedron
        let mut o = Vec::new();
        for i in 0..3 {
            for s in [-1, 1] {
                let mut v = vec![int(0); 3];
                v[i] = int(s);
                o.push(v);
            }
        }
        assert_eq!(hull(&o).unwrap().facets.len(), 8);
    }

    #[test]
    fn oracle_reconstructs_simplex_face() {
        // P = triangle with vertices (0,0), (2,0), (0,1) given only by its vertex list.
        let verts = pts(&[&[0, 0], &[2, 0], &[0, 1]]);
        let oracle = |a: &[Rational]| -> Result<Vec<Rational>> {
            Ok(verts.iter().max_by(|u, v| dot(a, u).cmp(&dot(a, v))).unwrap().clone())
        };
        let poly = hull_from_oracle(2, 100, oracle).unwrap();
        assert_eq!(poly.vertices, pts(&[&[0, 0], &[0, 1], &[2, 0]]));
        assert_eq!(poly.hrep.facets.len(), 3);
    }

    #[test]
    fn rank_of_rows() {
        assert_eq!(rank(&pts(&[&[1, 2], &[2, 4]])), 1);
        assert_eq!(rank(&pts(&[&[1, 2], &[2, 5], &[0, 1]])), 2);
        assert_eq!(rank(&[]), 0);
    }
}
