//! Order-theoretic ground floor: arbitrary-precision rationals with a fixed
//! deterministic gap-picking rule, generic union of partial injections, and a
//! small transitively-closed finite poset.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use num::bigint::BigInt;
use num::rational::BigRational;
use num::{One, Signed, Zero};
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

/// Arbitrary-precision rational, always kept in lowest terms by the backing
/// `BigRational`. Text form is `p` or `p/q` with `q > 0`.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Q(BigRational);

impl Q {
    pub fn new(num: i64, den: i64) -> Q {
        assert!(den != 0, "zero denominator");
        Q(BigRational::new(BigInt::from(num), BigInt::from(den)))
    }

    pub fn int(n: i64) -> Q {
        Q(BigRational::from_integer(BigInt::from(n)))
    }

    pub fn zero() -> Q {
        Q(BigRational::zero())
    }

    pub fn one() -> Q {
        Q(BigRational::one())
    }

    pub fn plus_int(&self, n: i64) -> Q {
        Q(&self.0 + BigRational::from_integer(BigInt::from(n)))
    }

    /// Exact midpoint of `self` and `other`.
    pub fn mid(&self, other: &Q) -> Q {
        Q((&self.0 + &other.0) / BigRational::from_integer(BigInt::from(2)))
    }

    pub fn abs(&self) -> Q {
        Q(self.0.abs())
    }
}

impl std::ops::Add<&Q> for &Q {
    type Output = Q;
    fn add(self, rhs: &Q) -> Q {
        Q(&self.0 + &rhs.0)
    }
}

impl std::ops::Sub<&Q> for &Q {
    type Output = Q;
    fn sub(self, rhs: &Q) -> Q {
        Q(&self.0 - &rhs.0)
    }
}

impl std::ops::Mul<&Q> for &Q {
    type Output = Q;
    fn mul(self, rhs: &Q) -> Q {
        Q(&self.0 * &rhs.0)
    }
}

/// The point a fraction `j/parts` of the way from `lo` to `hi`.
pub fn subdivide(lo: &Q, hi: &Q, j: i64, parts: i64) -> Q {
    lo + &(&(hi - lo) * &Q::new(j, parts))
}

impl fmt::Display for Q {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.denom().is_one() {
            write!(f, "{}", self.0.numer())
        } else {
            write!(f, "{}/{}", self.0.numer(), self.0.denom())
        }
    }
}

impl fmt::Debug for Q {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum OrderError {
    #[error("malformed rational literal {0:?}")]
    BadRational(String),
    #[error("two maps assign different images to {0}")]
    DomainClash(String),
    #[error("two maps hit the same image {0}")]
    RangeClash(String),
    #[error("union is not an isomorphism: {0}")]
    NotIso(String),
    #[error("empty open interval: no rational strictly between {0} and {1}")]
    EmptyInterval(String, String),
}

impl FromStr for Q {
    type Err = OrderError;

    fn from_str(s: &str) -> Result<Q, OrderError> {
        let bad = || OrderError::BadRational(s.to_string());
        let mut parts = s.splitn(2, '/');
        let num: BigInt = parts.next().ok_or_else(bad)?.trim().parse().map_err(|_| bad())?;
        let den: BigInt = match parts.next() {
            Some(d) => d.trim().parse().map_err(|_| bad())?,
            None => BigInt::one(),
        };
        if den.is_zero() {
            return Err(bad());
        }
        Ok(Q(BigRational::new(num, den)))
    }
}

impl Serialize for Q {
    fn serialize<S: Serializer>(&self, ser: S) -> Result<S::Ok, S::Error> {
        ser.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Q {
    fn deserialize<D: Deserializer<'de>>(de: D) -> Result<Q, D::Error> {
        let s = String::deserialize(de)?;
        s.parse().map_err(|e| D::Error::custom(format!("{e}")))
    }
}

/// Endpoint of an open interval over the rationals.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Bound {
    NegInf,
    Fin(Q),
    PosInf,
}

/// Deterministic choice of a rational in the open interval `(a, b)` avoiding a
/// finite exclusion set.
///
/// * both ends finite: the midpoint, then midpoints sliding toward `a`
///   (`(a+b)/2`, `(a+m)/2`, ...) until clear of `exclude`;
/// * `b = +inf`: `max(a, max exclude) + 1`;
/// * `a = -inf`: `min(b, min exclude) - 1`;
/// * both infinite: `0`, or `max exclude + 1` when `0` is excluded.
pub fn pick_between(a: &Bound, b: &Bound, exclude: &BTreeSet<Q>) -> Result<Q, OrderError> {
    match (a, b) {
        (Bound::Fin(lo), Bound::Fin(hi)) => {
            if lo >= hi {
                return Err(OrderError::EmptyInterval(lo.to_string(), hi.to_string()));
            }
            let mut m = lo.mid(hi);
            while exclude.contains(&m) {
                m = lo.mid(&m);
            }
            Ok(m)
        }
        (lo, Bound::PosInf) => {
            let mut cand = match lo {
                Bound::Fin(a) => a.clone(),
                Bound::NegInf => Q::zero(),
                Bound::PosInf => unreachable!(),
            };
            if let Bound::NegInf = lo {
                if !exclude.contains(&cand) {
                    return Ok(cand);
                }
            }
            if let Some(mx) = exclude.iter().next_back() {
                if *mx > cand {
                    cand = mx.clone();
                }
            }
            Ok(cand.plus_int(1))
        }
        (Bound::NegInf, Bound::Fin(hi)) => {
            let mut cand = hi.clone();
            if let Some(mn) = exclude.iter().next() {
                if *mn < cand {
                    cand = mn.clone();
                }
            }
            Ok(cand.plus_int(-1))
        }
        (_, Bound::NegInf) | (Bound::PosInf, _) => Err(OrderError::EmptyInterval(
            "+inf".into(),
            "-inf".into(),
        )),
    }
}

/// Finite partial injection between ordered value sets, with an inverse index.
/// The generic building block behind every structure-specific isomorphism.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PartialMap<P: Ord + Clone> {
    fwd: BTreeMap<P, P>,
    bwd: BTreeMap<P, P>,
}

impl<P: Ord + Clone> Default for PartialMap<P> {
    fn default() -> Self {
        PartialMap::new()
    }
}

impl<P: Ord + Clone> PartialMap<P> {
    pub fn new() -> Self {
        PartialMap { fwd: BTreeMap::new(), bwd: BTreeMap::new() }
    }

    pub fn from_pairs<I: IntoIterator<Item = (P, P)>>(pairs: I) -> Result<Self, OrderError>
    where
        P: fmt::Debug,
    {
        let mut m = PartialMap::new();
        for (x, y) in pairs {
            m.insert(x, y)?;
        }
        Ok(m)
    }

    pub fn insert(&mut self, x: P, y: P) -> Result<(), OrderError>
    where
        P: fmt::Debug,
    {
        if let Some(old) = self.fwd.get(&x) {
            if *old != y {
                return Err(OrderError::DomainClash(format!("{x:?}")));
            }
            return Ok(());
        }
        if self.bwd.contains_key(&y) {
            return Err(OrderError::RangeClash(format!("{y:?}")));
        }
        self.fwd.insert(x.clone(), y.clone());
        self.bwd.insert(y, x);
        Ok(())
    }

    pub fn apply(&self, x: &P) -> Option<&P> {
        self.fwd.get(x)
    }

    pub fn apply_inv(&self, y: &P) -> Option<&P> {
        self.bwd.get(y)
    }

    pub fn contains_dom(&self, x: &P) -> bool {
        self.fwd.contains_key(x)
    }

    pub fn contains_rng(&self, y: &P) -> bool {
        self.bwd.contains_key(y)
    }

    pub fn len(&self) -> usize {
        self.fwd.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fwd.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&P, &P)> {
        self.fwd.iter()
    }

    pub fn dom(&self) -> impl Iterator<Item = &P> {
        self.fwd.keys()
    }

    pub fn rng(&self) -> impl Iterator<Item = &P> {
        self.bwd.keys()
    }

    /// Is every pair of `other` also a pair of `self`?
    pub fn extends(&self, other: &Self) -> bool {
        other.iter().all(|(x, y)| self.apply(x) == Some(y))
    }
}

/// Union of two partial injections. Fails on a domain or range clash, and then
/// hands the union to `is_iso` for the structure-specific order check.
pub fn union_compatible<P, F>(
    h0: &PartialMap<P>,
    h1: &PartialMap<P>,
    is_iso: F,
) -> Result<PartialMap<P>, OrderError>
where
    P: Ord + Clone + fmt::Debug,
    F: Fn(&PartialMap<P>) -> bool,
{
    let mut u = h0.clone();
    for (x, y) in h1.iter() {
        u.insert(x.clone(), y.clone())?;
    }
    if !is_iso(&u) {
        return Err(OrderError::NotIso("union violates the order".into()));
    }
    Ok(u)
}

pub type ElemId = u32;

/// Finite strict partial order on element ids, stored transitively closed.
/// Relations are only ever added, never retracted, and existing pairs never
/// change truth value once both elements are present.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct FinitePoset {
    elems: BTreeSet<ElemId>,
    below: BTreeSet<(ElemId, ElemId)>,
}

impl FinitePoset {
    pub fn new() -> Self {
        FinitePoset::default()
    }

    pub fn add_element(&mut self, id: ElemId) {
        self.elems.insert(id);
    }

    pub fn elements(&self) -> impl Iterator<Item = ElemId> + '_ {
        self.elems.iter().copied()
    }

    pub fn contains(&self, id: ElemId) -> bool {
        self.elems.contains(&id)
    }

    pub fn len(&self) -> usize {
        self.elems.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elems.is_empty()
    }

    pub fn lt(&self, a: ElemId, b: ElemId) -> bool {
        self.below.contains(&(a, b))
    }

    pub fn leq(&self, a: ElemId, b: ElemId) -> bool {
        a == b || self.lt(a, b)
    }

    pub fn incomparable(&self, a: ElemId, b: ElemId) -> bool {
        a != b && !self.lt(a, b) && !self.lt(b, a)
    }

    pub fn relations(&self) -> impl Iterator<Item = (ElemId, ElemId)> + '_ {
        self.below.iter().copied()
    }

    /// All strictly below / strictly above a given element.
    pub fn down_set(&self, a: ElemId) -> BTreeSet<ElemId> {
        self.elems.iter().copied().filter(|&x| self.lt(x, a)).collect()
    }

    pub fn up_set(&self, a: ElemId) -> BTreeSet<ElemId> {
        self.elems.iter().copied().filter(|&x| self.lt(a, x)).collect()
    }

    /// Insert strict relations and re-close. Fails if antisymmetry would
    /// break; on failure the poset is left untouched.
    pub fn insert_relations(&mut self, pairs: &[(ElemId, ElemId)]) -> Result<(), OrderError> {
        let mut below = self.below.clone();
        for &(a, b) in pairs {
            assert!(self.elems.contains(&a) && self.elems.contains(&b), "unknown element");
            below.insert((a, b));
        }
        let closed = transitive_closure(&below);
        for &(a, b) in &closed {
            if a == b || closed.contains(&(b, a)) {
                return Err(OrderError::NotIso(format!(
                    "antisymmetry fails between {a} and {b}"
                )));
            }
        }
        self.below = closed;
        Ok(())
    }

    /// Covering pairs (no intermediate element); enough to reconstruct the
    /// closure, used for serialization.
    pub fn cover_pairs(&self) -> Vec<(ElemId, ElemId)> {
        self.below
            .iter()
            .copied()
            .filter(|&(a, b)| {
                !self
                    .elems
                    .iter()
                    .any(|&c| c != a && c != b && self.lt(a, c) && self.lt(c, b))
            })
            .collect()
    }
}

/// Transitive closure of a strict relation given as a pair set.
pub fn transitive_closure(pairs: &BTreeSet<(ElemId, ElemId)>) -> BTreeSet<(ElemId, ElemId)> {
    let mut closed = pairs.clone();
    loop {
        let mut new = Vec::new();
        for &(a, b) in &closed {
            for &(c, d) in closed.range((b, ElemId::MIN)..=(b, ElemId::MAX)) {
                debug_assert_eq!(b, c);
                if !closed.contains(&(a, d)) {
                    new.push((a, d));
                }
            }
        }
        if new.is_empty() {
            return closed;
        }
        closed.extend(new);
    }
}

/// Is the reflexive closure of `below` a partial order on `elems`? Checks
/// antisymmetry and transitivity of the relation exactly as given; a relation
/// that is not yet transitively closed fails.
pub fn is_partial_order(elems: &BTreeSet<ElemId>, below: &BTreeSet<(ElemId, ElemId)>) -> bool {
    for &(a, b) in below {
        if !elems.contains(&a) || !elems.contains(&b) {
            return false;
        }
        if a != b && below.contains(&(b, a)) {
            return false;
        }
    }
    for &(a, b) in below {
        for &(c, d) in below.range((b, ElemId::MIN)..=(b, ElemId::MAX)) {
            debug_assert_eq!(b, c);
            if a != d && !below.contains(&(a, d)) {
                return false;
            }
        }
    }
    true
}
