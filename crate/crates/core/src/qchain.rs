//! Positive partial order-isomorphisms of the rational line, with the
//! one-point extensions and the word-killing construction built from them.
//!
//! "Positive" means f(x) > x everywhere on the domain. One-point extensions
//! pick the new endpoint deterministically inside the free gap between
//! neighbors, so the whole construction replays bit for bit.

use std::collections::BTreeSet;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::order::{pick_between, Bound, OrderError, PartialMap, Q};
use crate::words::{evaluate, Letter, PointMap, Word};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum QChainError {
    #[error(transparent)]
    Order(#[from] OrderError),
    #[error("map must be positive")]
    NotPositive,
    #[error("{0} is already in the domain")]
    InDomain(Q),
    #[error("{0} is already in the range")]
    InRange(Q),
    #[error("{value} must lie above {bound}")]
    NotAbove { value: Q, bound: Q },
    #[error("word must be nonempty")]
    EmptyWord,
}

/// Finite strictly order-preserving partial injection of ℚ.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct QPartialIso(PartialMap<Q>);

impl QPartialIso {
    pub fn new() -> Self {
        QPartialIso(PartialMap::new())
    }

    pub fn from_pairs<I: IntoIterator<Item = (Q, Q)>>(pairs: I) -> Result<Self, QChainError> {
        let mut out = QPartialIso::new();
        for (x, y) in pairs {
            out.insert(x, y)?;
        }
        Ok(out)
    }

    /// Inserts one pair, rejecting clashes and order violations.
    pub fn insert(&mut self, x: Q, y: Q) -> Result<(), QChainError> {
        for (u, v) in self.0.iter() {
            if (*u < x) != (*v < y) && *u != x {
                return Err(OrderError::NotIso(format!("({x},{y}) against ({u},{v})")).into());
            }
        }
        self.0.insert(x, y)?;
        Ok(())
    }

    pub fn apply(&self, x: &Q) -> Option<&Q> {
        self.0.apply(x)
    }

    pub fn apply_inv(&self, y: &Q) -> Option<&Q> {
        self.0.apply_inv(y)
    }

    pub fn contains_dom(&self, x: &Q) -> bool {
        self.0.contains_dom(x)
    }

    pub fn contains_rng(&self, y: &Q) -> bool {
        self.0.contains_rng(y)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Q, &Q)> {
        self.0.iter()
    }

    pub fn dom(&self) -> impl Iterator<Item = &Q> {
        self.0.dom()
    }

    pub fn rng(&self) -> impl Iterator<Item = &Q> {
        self.0.rng()
    }

    pub fn support(&self) -> BTreeSet<Q> {
        self.dom().chain(self.rng()).cloned().collect()
    }

    pub fn extends(&self, other: &Self) -> bool {
        self.0.extends(&other.0)
    }

    /// f(x) > x on the whole domain.
    pub fn is_positive(&self) -> bool {
        self.iter().all(|(x, y)| y > x)
    }

    /// Every domain point lies strictly above m.
    pub fn dom_above(&self, m: &Q) -> bool {
        self.dom().all(|x| x > m)
    }

    /// Full strict-monotonicity rescan; internal state cannot violate it, so
    /// this is for validating deserialized or recombined maps.
    pub fn is_strictly_monotone(&self) -> bool {
        let pairs: Vec<_> = self.iter().collect();
        pairs.windows(2).all(|w| w[0].1 < w[1].1)
    }

    /// Union of both maps when the result is again an order-isomorphism.
    pub fn union_with(&self, other: &QPartialIso) -> Result<QPartialIso, QChainError> {
        let mut out = self.clone();
        for (x, y) in other.iter() {
            if out.apply(x) == Some(y) {
                continue;
            }
            out.insert(x.clone(), y.clone())?;
        }
        Ok(out)
    }
}

impl PointMap for QPartialIso {
    type Point = Q;

    fn fwd(&self, x: &Q) -> Option<Q> {
        self.apply(x).cloned()
    }

    fn bwd(&self, y: &Q) -> Option<Q> {
        self.apply_inv(y).cloned()
    }
}

impl Serialize for QPartialIso {
    fn serialize<S: Serializer>(&self, ser: S) -> Result<S::Ok, S::Error> {
        let pairs: Vec<(&Q, &Q)> = self.iter().collect();
        pairs.serialize(ser)
    }
}

impl<'de> Deserialize<'de> for QPartialIso {
    fn deserialize<D: Deserializer<'de>>(de: D) -> Result<QPartialIso, D::Error> {
        let pairs = Vec::<(Q, Q)>::deserialize(de)?;
        QPartialIso::from_pairs(pairs).map_err(serde::de::Error::custom)
    }
}

/// Extends a positive map by a new domain point `x`: the image is picked in
/// the gap `(max{f(a), x}, f(b))` over the domain neighbors `a < x < b`,
/// avoiding `avoid` and the support of `f`.
pub fn extend_dom_q(
    f: &QPartialIso,
    x: &Q,
    avoid: &BTreeSet<Q>,
) -> Result<QPartialIso, QChainError> {
    if !f.is_positive() {
        return Err(QChainError::NotPositive);
    }
    if f.contains_dom(x) {
        return Err(QChainError::InDomain(x.clone()));
    }
    let below = f.dom().filter(|u| *u < x).max();
    let above = f.dom().filter(|u| *u > x).min();
    let lo = match below {
        Some(a) => {
            let fa = f.apply(a).unwrap();
            Bound::Fin(if fa > x { fa.clone() } else { x.clone() })
        }
        None => Bound::Fin(x.clone()),
    };
    let hi = match above {
        Some(b) => Bound::Fin(f.apply(b).unwrap().clone()),
        None => Bound::PosInf,
    };
    let mut exclude = avoid.clone();
    exclude.extend(f.support());
    let y = pick_between(&lo, &hi, &exclude)?;
    let mut out = f.clone();
    out.insert(x.clone(), y)?;
    Ok(out)
}

/// Extends a positive map with domain above `m` by a new range point `y > m`:
/// the preimage is picked in `(max{m, f⁻¹(c)}, min{f⁻¹(d), y})` over the
/// range neighbors `c < y < d`, avoiding `avoid` and the support of `f`.
pub fn extend_rng_q(
    f: &QPartialIso,
    y: &Q,
    m: &Q,
    avoid: &BTreeSet<Q>,
) -> Result<QPartialIso, QChainError> {
    if !f.is_positive() {
        return Err(QChainError::NotPositive);
    }
    if y <= m {
        return Err(QChainError::NotAbove { value: y.clone(), bound: m.clone() });
    }
    if !f.dom_above(m) {
        return Err(QChainError::NotAbove {
            value: f.dom().min().unwrap().clone(),
            bound: m.clone(),
        });
    }
    if f.contains_rng(y) {
        return Err(QChainError::InRange(y.clone()));
    }
    let below = f.rng().filter(|v| *v < y).max();
    let above = f.rng().filter(|v| *v > y).min();
    let lo = match below {
        Some(c) => {
            let fc = f.apply_inv(c).unwrap();
            Bound::Fin(if fc > m { fc.clone() } else { m.clone() })
        }
        None => Bound::Fin(m.clone()),
    };
    let hi = match above {
        Some(d) => {
            let fd = f.apply_inv(d).unwrap();
            Bound::Fin(if fd < y { fd.clone() } else { y.clone() })
        }
        None => Bound::Fin(y.clone()),
    };
    let mut exclude = avoid.clone();
    exclude.extend(f.support());
    let x = pick_between(&lo, &hi, &exclude)?;
    let mut out = f.clone();
    out.insert(x, y.clone())?;
    Ok(out)
}

/// Which clearance the current prefix value must keep, keyed by the leading
/// letter of the prefix.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SideCondition {
    /// leading b-power negative: value avoids dom s, rng s, rng r
    LeadingBNeg,
    /// leading b-power positive: value avoids dom s, rng s, dom r
    LeadingBPos,
    /// leading a-power negative: value avoids dom r, rng r, rng s
    LeadingANeg,
    /// leading a-power positive: value avoids dom r, rng r, dom s
    LeadingAPos,
}

impl SideCondition {
    pub fn for_unit(unit: (Letter, i64)) -> SideCondition {
        match unit {
            (Letter::B, sg) if sg < 0 => SideCondition::LeadingBNeg,
            (Letter::B, _) => SideCondition::LeadingBPos,
            (Letter::A, sg) if sg < 0 => SideCondition::LeadingANeg,
            (Letter::A, _) => SideCondition::LeadingAPos,
        }
    }

    pub fn holds(&self, s: &QPartialIso, r: &QPartialIso, x: &Q) -> bool {
        let (first, second, third) = match self {
            SideCondition::LeadingBNeg => (s.contains_dom(x), s.contains_rng(x), r.contains_rng(x)),
            SideCondition::LeadingBPos => (s.contains_dom(x), s.contains_rng(x), r.contains_dom(x)),
            SideCondition::LeadingANeg => (r.contains_dom(x), r.contains_rng(x), s.contains_rng(x)),
            SideCondition::LeadingAPos => (r.contains_dom(x), r.contains_rng(x), s.contains_dom(x)),
        };
        !first && !second && !third
    }
}

/// One step of the word-killing induction: after prepending `unit`, the
/// prefix evaluates `p` to `value` and must satisfy `condition`.
#[derive(Clone, Debug)]
pub struct KillStep {
    pub unit: (Letter, i64),
    pub value: Q,
    pub condition: SideCondition,
    pub holds: bool,
}

#[derive(Clone, Debug)]
pub struct KillWordQ {
    pub s: QPartialIso,
    pub r: QPartialIso,
    pub p: Q,
    pub trace: Vec<KillStep>,
}

/// Builds positive maps `s`, `r` with domains above `m` and a point `p > m`
/// that the word moves: `w(s, r)(p) ≠ p`.
///
/// Induction over the word from its rightmost letter, one one-point extension
/// per letter. The base case pins `s(m+1) = m+2`, `r(m+3) = m+4`; each
/// prepended letter extends the matching map at the current value, keeping
/// the other map's support plus `p` out of reach so the side conditions carry
/// over.
pub fn kill_word_q(w: &Word, m: &Q) -> Result<KillWordQ, QChainError> {
    let mut units = w.units_applied_first();
    let first = units.next().ok_or(QChainError::EmptyWord)?;
    let mut s = QPartialIso::from_pairs([(m.plus_int(1), m.plus_int(2))])?;
    let mut r = QPartialIso::from_pairs([(m.plus_int(3), m.plus_int(4))])?;
    let (p, mut x) = match first {
        (Letter::A, sg) if sg > 0 => (m.plus_int(1), m.plus_int(2)),
        (Letter::A, _) => (m.plus_int(2), m.plus_int(1)),
        (Letter::B, sg) if sg > 0 => (m.plus_int(3), m.plus_int(4)),
        (Letter::B, _) => (m.plus_int(4), m.plus_int(3)),
    };
    let record = |unit: (Letter, i64), x: &Q, s: &QPartialIso, r: &QPartialIso| {
        let condition = SideCondition::for_unit(unit);
        KillStep { unit, value: x.clone(), condition, holds: condition.holds(s, r, x) }
    };
    let mut trace = vec![record(first, &x, &s, &r)];
    for unit in units {
        let avoid_for = |other: &QPartialIso| {
            let mut a = other.support();
            a.insert(p.clone());
            a
        };
        match unit {
            (Letter::A, sg) if sg > 0 => {
                s = extend_dom_q(&s, &x, &avoid_for(&r))?;
                x = s.apply(&x).unwrap().clone();
            }
            (Letter::A, _) => {
                s = extend_rng_q(&s, &x, m, &avoid_for(&r))?;
                x = s.apply_inv(&x).unwrap().clone();
            }
            (Letter::B, sg) if sg > 0 => {
                r = extend_dom_q(&r, &x, &avoid_for(&s))?;
                x = r.apply(&x).unwrap().clone();
            }
            (Letter::B, _) => {
                r = extend_rng_q(&r, &x, m, &avoid_for(&s))?;
                x = r.apply_inv(&x).unwrap().clone();
            }
        }
        trace.push(record(unit, &x, &s, &r));
    }
    debug_assert_eq!(evaluate(w, &s, &r, p.clone()).as_ref(), Some(&x));
    debug_assert_ne!(x, p);
    Ok(KillWordQ { s, r, p, trace })
}
