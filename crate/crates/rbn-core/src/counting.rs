//! Cubes and counting constraints.
//!
//! A cube is a per-state interval `L(q)..U(q)` where the upper bound may be
//! infinite; a counting constraint is a finite union of cubes. These sets are
//! closed under union, intersection and complement, and (per the closure
//! module) under forward and backward reachability.
//!
//! Bounds are arbitrary-precision integers: refinement thresholds produced by
//! the symbolic analysis are exponential in the model size and must not wrap.

use std::collections::BTreeSet;

use num_bigint::BigUint;
use num_traits::{One, ToPrimitive, Zero};

use crate::error::{Error, Result};
use crate::model::Configuration;

/// An upper bound: a natural number or infinity. Infinity compares greater
/// than every integer.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Bound {
    Finite(BigUint),
    Infinite,
}

impl Bound {
    pub fn finite_u64(n: u64) -> Bound {
        Bound::Finite(BigUint::from(n))
    }

    pub fn is_infinite(&self) -> bool {
        matches!(self, Bound::Infinite)
    }

    pub fn as_finite(&self) -> Option<&BigUint> {
        match self {
            Bound::Finite(n) => Some(n),
            Bound::Infinite => None,
        }
    }

    fn ge_big(&self, n: &BigUint) -> bool {
        match self {
            Bound::Finite(u) => u >= n,
            Bound::Infinite => true,
        }
    }

    fn ge_u64(&self, n: u64) -> bool {
        match self {
            Bound::Finite(u) => *u >= BigUint::from(n),
            Bound::Infinite => true,
        }
    }

    fn min_ref<'a>(a: &'a Bound, b: &'a Bound) -> &'a Bound {
        match (a, b) {
            (Bound::Infinite, _) => b,
            (_, Bound::Infinite) => a,
            (Bound::Finite(x), Bound::Finite(y)) => {
                if x <= y {
                    a
                } else {
                    b
                }
            }
        }
    }
}

impl PartialOrd for Bound {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Bound {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        match (self, other) {
            (Bound::Infinite, Bound::Infinite) => std::cmp::Ordering::Equal,
            (Bound::Infinite, _) => std::cmp::Ordering::Greater,
            (_, Bound::Infinite) => std::cmp::Ordering::Less,
            (Bound::Finite(a), Bound::Finite(b)) => a.cmp(b),
        }
    }
}

/// The set of configurations `{C : L <= C <= U}` componentwise.
/// `L(q) > U(q)` for some coordinate is legal and denotes the empty set.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Cube {
    lower: Vec<BigUint>,
    upper: Vec<Bound>,
}

impl Cube {
    pub fn new(lower: Vec<BigUint>, upper: Vec<Bound>) -> Cube {
        assert_eq!(lower.len(), upper.len(), "cube bound vectors must align");
        Cube { lower, upper }
    }

    /// Cube from small bounds; `None` as upper bound means infinity.
    pub fn from_u64(lower: Vec<u64>, upper: Vec<Option<u64>>) -> Cube {
        Cube::new(
            lower.into_iter().map(BigUint::from).collect(),
            upper
                .into_iter()
                .map(|u| match u {
                    Some(n) => Bound::finite_u64(n),
                    None => Bound::Infinite,
                })
                .collect(),
        )
    }

    /// The universal cube: `0 <= C(q) <= inf` everywhere.
    pub fn universal(arity: usize) -> Cube {
        Cube {
            lower: vec![BigUint::zero(); arity],
            upper: vec![Bound::Infinite; arity],
        }
    }

    /// The cube containing exactly `c`.
    pub fn exactly(c: &Configuration) -> Cube {
        Cube {
            lower: c.counts().iter().map(|&n| BigUint::from(n)).collect(),
            upper: c
                .counts()
                .iter()
                .map(|&n| Bound::finite_u64(n))
                .collect(),
        }
    }

    pub fn arity(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[BigUint] {
        &self.lower
    }

    pub fn upper(&self) -> &[Bound] {
        &self.upper
    }

    /// True iff some coordinate has `L(q) > U(q)`, i.e. the cube denotes the
    /// empty set.
    pub fn is_empty(&self) -> bool {
        self.lower
            .iter()
            .zip(&self.upper)
            .any(|(l, u)| !u.ge_big(l))
    }

    pub fn contains(&self, c: &Configuration) -> Result<bool> {
        if c.arity() != self.arity() {
            return Err(Error::DimensionMismatch {
                expected: self.arity(),
                got: c.arity(),
            });
        }
        Ok(self
            .lower
            .iter()
            .zip(&self.upper)
            .zip(c.counts())
            .all(|((l, u), &n)| BigUint::from(n) >= *l && u.ge_u64(n)))
    }

    /// Componentwise interval intersection: max of lower bounds, min of upper
    /// bounds.
    pub fn intersect(&self, other: &Cube) -> Cube {
        Cube {
            lower: self
                .lower
                .iter()
                .zip(&other.lower)
                .map(|(a, b)| a.max(b).clone())
                .collect(),
            upper: self
                .upper
                .iter()
                .zip(&other.upper)
                .map(|(a, b)| Bound::min_ref(a, b).clone())
                .collect(),
        }
    }

    /// True iff `self` contains `other` as a set (trivially true when `other`
    /// is empty).
    pub fn subsumes(&self, other: &Cube) -> bool {
        if other.is_empty() {
            return true;
        }
        self.lower
            .iter()
            .zip(&other.lower)
            .all(|(a, b)| a <= b)
            && self
                .upper
                .iter()
                .zip(&other.upper)
                .all(|(a, b)| a >= b)
    }

    /// `max(sum of lower bounds, sum of finite upper bounds)`.
    pub fn norm(&self) -> BigUint {
        let lo: BigUint = self.lower.iter().sum();
        let hi: BigUint = self
            .upper
            .iter()
            .filter_map(Bound::as_finite)
            .sum();
        lo.max(hi)
    }
}

/// A finite union of cubes over a fixed state set; the empty list denotes
/// the empty set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CountingConstraint {
    arity: usize,
    cubes: Vec<Cube>,
}

impl CountingConstraint {
    pub fn new(arity: usize, cubes: Vec<Cube>) -> CountingConstraint {
        for c in &cubes {
            assert_eq!(c.arity(), arity, "all cubes must share the state set");
        }
        CountingConstraint { arity, cubes }
    }

    pub fn empty(arity: usize) -> CountingConstraint {
        CountingConstraint {
            arity,
            cubes: Vec::new(),
        }
    }

    pub fn universal(arity: usize) -> CountingConstraint {
        CountingConstraint {
            arity,
            cubes: vec![Cube::universal(arity)],
        }
    }

    pub fn from_cube(cube: Cube) -> CountingConstraint {
        CountingConstraint {
            arity: cube.arity(),
            cubes: vec![cube],
        }
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn cubes(&self) -> &[Cube] {
        &self.cubes
    }

    fn check_arity(&self, other: &CountingConstraint) -> Result<()> {
        if self.arity != other.arity {
            return Err(Error::DimensionMismatch {
                expected: self.arity,
                got: other.arity,
            });
        }
        Ok(())
    }

    pub fn contains(&self, c: &Configuration) -> Result<bool> {
        if c.arity() != self.arity {
            return Err(Error::DimensionMismatch {
                expected: self.arity,
                got: c.arity(),
            });
        }
        for cube in &self.cubes {
            if cube.contains(c)? {
                return Ok(true);
            }
        }
        Ok(false)
    }

    /// Union by list concatenation.
    pub fn union(&self, other: &CountingConstraint) -> Result<CountingConstraint> {
        self.check_arity(other)?;
        let mut cubes = self.cubes.clone();
        cubes.extend(other.cubes.iter().cloned());
        Ok(CountingConstraint {
            arity: self.arity,
            cubes,
        })
    }

    /// Pairwise cube intersection.
    pub fn intersect(&self, other: &CountingConstraint) -> Result<CountingConstraint> {
        self.check_arity(other)?;
        let mut cubes = Vec::new();
        for a in &self.cubes {
            for b in &other.cubes {
                let c = a.intersect(b);
                if !c.is_empty() {
                    cubes.push(c);
                }
            }
        }
        Ok(CountingConstraint {
            arity: self.arity,
            cubes,
        }
        .simplify())
    }

    /// Complement. For a single cube the complement is the union over
    /// coordinates of `{C : C(q) <= L(q)-1}` and, where `U(q)` is finite,
    /// `{C : C(q) >= U(q)+1}`, each unconstrained elsewhere; the complement
    /// of a union is the intersection of the cube complements, folded with a
    /// simplification pass at every step to curb representation growth.
    pub fn complement(&self) -> Result<CountingConstraint> {
        let mut acc = CountingConstraint::universal(self.arity);
        for cube in &self.cubes {
            let comp = complement_cube(cube);
            acc = acc.intersect(&comp)?;
        }
        Ok(acc)
    }

    /// Representation norm: max over cubes of
    /// `max(sum of L, sum of finite U)`; 0 for the empty union. An upper
    /// bound on the norm of the denoted set.
    pub fn norm(&self) -> BigUint {
        self.cubes
            .iter()
            .map(Cube::norm)
            .max()
            .unwrap_or_else(BigUint::zero)
    }

    /// Norm as a machine integer, for use as an enumeration limit.
    pub fn norm_u64(&self) -> Result<u64> {
        self.norm()
            .to_u64()
            .ok_or_else(|| Error::TooLarge("constraint norm exceeds u64".into()))
    }

    /// True iff the denoted set is finite: every cube is empty or has only
    /// finite upper bounds.
    pub fn is_finite(&self) -> bool {
        self.cubes
            .iter()
            .all(|c| c.is_empty() || c.upper.iter().all(|u| !u.is_infinite()))
    }

    /// Exactly the members of the denoted set that have the given size.
    pub fn enumerate_size(&self, size: u64) -> Vec<Configuration> {
        let mut out: BTreeSet<Configuration> = BTreeSet::new();
        for cube in &self.cubes {
            if cube.is_empty() {
                continue;
            }
            enumerate_cube_size(cube, size, &mut out);
        }
        out.into_iter().collect()
    }

    /// Drops empty cubes, then drops cubes subsumed by another remaining
    /// cube, then merges pairs of cubes that differ in a single coordinate
    /// whose intervals join into one interval. Denotation is unchanged.
    pub fn simplify(mut self) -> CountingConstraint {
        self.cubes.retain(|c| !c.is_empty());
        self.cubes.sort_by(|a, b| a.norm().cmp(&b.norm()));
        self.cubes.dedup();
        // Subsumption: keep a cube only if no other kept/later cube contains it.
        let mut kept: Vec<Cube> = Vec::new();
        'outer: for (i, c) in self.cubes.iter().enumerate() {
            for k in &kept {
                if k.subsumes(c) {
                    continue 'outer;
                }
            }
            for later in &self.cubes[i + 1..] {
                if later != c && later.subsumes(c) {
                    continue 'outer;
                }
            }
            kept.push(c.clone());
        }
        // Interval merging until fixpoint.
        loop {
            let mut merged = None;
            'search: for i in 0..kept.len() {
                for j in i + 1..kept.len() {
                    if let Some(m) = merge_cubes(&kept[i], &kept[j]) {
                        merged = Some((i, j, m));
                        break 'search;
                    }
                }
            }
            match merged {
                Some((i, j, m)) => {
                    kept.remove(j);
                    kept.remove(i);
                    kept.push(m);
                }
                None => break,
            }
        }
        CountingConstraint {
            arity: self.arity,
            cubes: kept,
        }
    }
}

fn complement_cube(cube: &Cube) -> CountingConstraint {
    let arity = cube.arity();
    let mut cubes = Vec::new();
    for q in 0..arity {
        if !cube.lower[q].is_zero() {
            let mut c = Cube::universal(arity);
            c.upper[q] = Bound::Finite(&cube.lower[q] - BigUint::one());
            cubes.push(c);
        }
        if let Bound::Finite(u) = &cube.upper[q] {
            let mut c = Cube::universal(arity);
            c.lower[q] = u + BigUint::one();
            cubes.push(c);
        }
    }
    CountingConstraint { arity, cubes }
}

/// Merges two cubes that agree on all coordinates except one where their
/// intervals overlap or are adjacent; returns the single covering cube.
fn merge_cubes(a: &Cube, b: &Cube) -> Option<Cube> {
    let mut diff = None;
    for q in 0..a.arity() {
        if a.lower[q] != b.lower[q] || a.upper[q] != b.upper[q] {
            if diff.is_some() {
                return None;
            }
            diff = Some(q);
        }
    }
    let q = match diff {
        Some(q) => q,
        // Identical cubes: return one of them.
        None => return Some(a.clone()),
    };
    // Order so that lo has the smaller lower bound.
    let (lo, hi) = if a.lower[q] <= b.lower[q] { (a, b) } else { (b, a) };
    // Intervals join iff hi.lower <= lo.upper + 1.
    let joins = match &lo.upper[q] {
        Bound::Infinite => true,
        Bound::Finite(u) => hi.lower[q] <= u + BigUint::one(),
    };
    if !joins {
        return None;
    }
    let mut m = lo.clone();
    m.upper[q] = lo.upper[q].clone().max(hi.upper[q].clone());
    Some(m)
}

fn enumerate_cube_size(cube: &Cube, size: u64, out: &mut BTreeSet<Configuration>) {
    let arity = cube.arity();
    let mut cur = vec![0u64; arity];
    fn rec(
        cube: &Cube,
        i: usize,
        rem: u64,
        cur: &mut Vec<u64>,
        out: &mut BTreeSet<Configuration>,
    ) {
        if i == cube.arity() {
            if rem == 0 {
                out.insert(Configuration::new(cur.clone()));
            }
            return;
        }
        let lo = match cube.lower()[i].to_u64() {
            Some(l) => l,
            None => return, // lower bound alone exceeds any u64 size
        };
        if lo > rem {
            return;
        }
        let hi = match &cube.upper()[i] {
            Bound::Infinite => rem,
            Bound::Finite(u) => u.to_u64().map_or(rem, |u| u.min(rem)),
        };
        for v in lo..=hi {
            cur[i] = v;
            rec(cube, i + 1, rem - v, cur, out);
        }
        cur[i] = 0;
    }
    if arity == 0 {
        if size == 0 {
            out.insert(Configuration::new(vec![]));
        }
        return;
    }
    rec(cube, 0, size, &mut cur, out);
}
