//! The antichain of n chains: points (k, p) with k a row in 1..=n and p
//! rational; two points are comparable only within a row. A partial
//! isomorphism decomposes into a row permutation and per-row strictly
//! increasing maps; each value here carries an explicitly chosen total row
//! permutation, since a partial map does not determine one.
//!
//! Positivity, one-point extensions and the climbing constructions mirror the
//! rational-chain module row-wise. All choices route through the same
//! deterministic gap picks, so constructions replay exactly.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::order::{pick_between, subdivide, Bound, OrderError, Q};
use crate::qchain::{kill_word_q, QChainError, QPartialIso};
use crate::sym::{generates, word_for_permutation, Perm, SymError};
use crate::words::{evaluate, Letter, PointMap, Word, WordError};

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct BnPoint {
    pub row: u32,
    pub value: Q,
}

impl BnPoint {
    pub fn new(row: u32, value: Q) -> BnPoint {
        BnPoint { row, value }
    }
}

impl fmt::Display for BnPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.row, self.value)
    }
}

impl Serialize for BnPoint {
    fn serialize<S: Serializer>(&self, ser: S) -> Result<S::Ok, S::Error> {
        (self.row, &self.value).serialize(ser)
    }
}

impl<'de> Deserialize<'de> for BnPoint {
    fn deserialize<D: Deserializer<'de>>(de: D) -> Result<BnPoint, D::Error> {
        let (row, value) = <(u32, Q)>::deserialize(de)?;
        Ok(BnPoint { row, value })
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum BnError {
    #[error(transparent)]
    Order(#[from] OrderError),
    #[error(transparent)]
    Chain(#[from] QChainError),
    #[error(transparent)]
    Sym(#[from] SymError),
    #[error(transparent)]
    Word(#[from] WordError),
    #[error("row {row} is outside 1..={n}")]
    RowOutOfBounds { row: u32, n: u32 },
    #[error("row {row} maps to both {first} and {second}")]
    RowConflict { row: u32, first: u32, second: u32 },
    #[error("permutation degree {got}, expected {want}")]
    DegreeMismatch { got: usize, want: usize },
    #[error("carried row permutations disagree")]
    TauMismatch,
    #[error("map must be positive")]
    NotPositive,
    #[error("{value} must lie above {bound}")]
    NotAbove { value: Q, bound: Q },
    #[error("{0} is already in the domain")]
    InDomain(BnPoint),
    #[error("{0} is already in the range")]
    InRange(BnPoint),
    #[error("sections mismatch: {0}")]
    Sections(String),
    #[error("carried row permutations do not generate the symmetric group")]
    NotGenerating,
}

/// Finite positive-capable partial isomorphism of the n-row structure:
/// a committed total row permutation plus per-row strictly increasing maps
/// keyed by domain row.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BnPartialIso {
    n: u32,
    tau: Perm,
    rows: BTreeMap<u32, QPartialIso>,
}

impl BnPartialIso {
    pub fn empty(n: u32, tau: Perm) -> Result<BnPartialIso, BnError> {
        if tau.n() != n as usize {
            return Err(BnError::DegreeMismatch { got: tau.n(), want: n as usize });
        }
        Ok(BnPartialIso { n, tau, rows: BTreeMap::new() })
    }

    pub fn from_pairs<I>(n: u32, tau: Perm, pairs: I) -> Result<BnPartialIso, BnError>
    where
        I: IntoIterator<Item = (BnPoint, BnPoint)>,
    {
        let mut out = BnPartialIso::empty(n, tau)?;
        for (x, y) in pairs {
            out.insert(x, y)?;
        }
        Ok(out)
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn tau(&self) -> &Perm {
        &self.tau
    }

    pub fn tau_of_row(&self, k: u32) -> u32 {
        self.tau.apply(k - 1) + 1
    }

    pub fn tau_inv_of_row(&self, l: u32) -> u32 {
        self.tau.apply_inv(l - 1) + 1
    }

    fn check_row(&self, row: u32) -> Result<(), BnError> {
        if row == 0 || row > self.n {
            return Err(BnError::RowOutOfBounds { row, n: self.n });
        }
        Ok(())
    }

    pub fn insert(&mut self, x: BnPoint, y: BnPoint) -> Result<(), BnError> {
        self.check_row(x.row)?;
        self.check_row(y.row)?;
        if y.row != self.tau_of_row(x.row) {
            return Err(BnError::TauMismatch);
        }
        self.rows.entry(x.row).or_default().insert(x.value, y.value)?;
        Ok(())
    }

    pub fn apply(&self, x: &BnPoint) -> Option<BnPoint> {
        let v = self.rows.get(&x.row)?.apply(&x.value)?;
        Some(BnPoint::new(self.tau_of_row(x.row), v.clone()))
    }

    pub fn apply_inv(&self, y: &BnPoint) -> Option<BnPoint> {
        if y.row == 0 || y.row > self.n {
            return None;
        }
        let k = self.tau_inv_of_row(y.row);
        let v = self.rows.get(&k)?.apply_inv(&y.value)?;
        Some(BnPoint::new(k, v.clone()))
    }

    pub fn apply_pow(&self, x: &BnPoint, k: i64) -> Option<BnPoint> {
        let mut cur = x.clone();
        for _ in 0..k.unsigned_abs() {
            cur = if k > 0 { self.apply(&cur)? } else { self.apply_inv(&cur)? };
        }
        Some(cur)
    }

    pub fn contains_dom(&self, x: &BnPoint) -> bool {
        self.rows.get(&x.row).is_some_and(|rm| rm.contains_dom(&x.value))
    }

    pub fn contains_rng(&self, y: &BnPoint) -> bool {
        if y.row == 0 || y.row > self.n {
            return false;
        }
        let k = self.tau_inv_of_row(y.row);
        self.rows.get(&k).is_some_and(|rm| rm.contains_rng(&y.value))
    }

    pub fn len(&self) -> usize {
        self.rows.values().map(|rm| rm.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.values().all(|rm| rm.is_empty())
    }

    pub fn row_map(&self, k: u32) -> Option<&QPartialIso> {
        self.rows.get(&k)
    }

    pub fn pairs(&self) -> Vec<(BnPoint, BnPoint)> {
        let mut out = Vec::with_capacity(self.len());
        for (&k, rm) in &self.rows {
            let l = self.tau_of_row(k);
            for (p, q) in rm.iter() {
                out.push((BnPoint::new(k, p.clone()), BnPoint::new(l, q.clone())));
            }
        }
        out
    }

    pub fn dom_points(&self) -> impl Iterator<Item = BnPoint> + '_ {
        self.rows
            .iter()
            .flat_map(|(&k, rm)| rm.dom().map(move |v| BnPoint::new(k, v.clone())))
    }

    pub fn rng_points(&self) -> impl Iterator<Item = BnPoint> + '_ {
        self.rows.iter().flat_map(|(&k, rm)| {
            let l = self.tau_of_row(k);
            rm.rng().map(move |v| BnPoint::new(l, v.clone()))
        })
    }

    /// Second coordinates of the whole domain.
    pub fn dom_values(&self) -> BTreeSet<Q> {
        self.rows.values().flat_map(|rm| rm.dom().cloned()).collect()
    }

    /// Second coordinates of the whole range.
    pub fn rng_values(&self) -> BTreeSet<Q> {
        self.rows.values().flat_map(|rm| rm.rng().cloned()).collect()
    }

    /// Second coordinates of domain and range together.
    pub fn support_values(&self) -> BTreeSet<Q> {
        self.rows.values().flat_map(|rm| rm.support()).collect()
    }

    pub fn is_positive(&self) -> bool {
        self.rows.values().all(|rm| rm.is_positive())
    }

    pub fn dom_above(&self, m: &Q) -> bool {
        self.rows.values().all(|rm| rm.dom_above(m))
    }

    pub fn support_above(&self, m: &Q) -> bool {
        self.support_values().iter().all(|v| v > m)
    }

    pub fn extends(&self, other: &BnPartialIso) -> bool {
        other
            .pairs()
            .into_iter()
            .all(|(x, y)| self.apply(&x) == Some(y))
    }

    /// Union with a map over the same rows and row permutation. Fails when
    /// the merged rows stop being order-isomorphisms.
    pub fn union_with(&self, other: &BnPartialIso) -> Result<BnPartialIso, BnError> {
        if self.n != other.n {
            return Err(BnError::DegreeMismatch { got: other.n as usize, want: self.n as usize });
        }
        if self.tau != other.tau {
            return Err(BnError::TauMismatch);
        }
        let mut out = self.clone();
        for (x, y) in other.pairs() {
            if out.apply(&x).as_ref() == Some(&y) {
                continue;
            }
            out.insert(x, y)?;
        }
        Ok(out)
    }
}

impl PointMap for BnPartialIso {
    type Point = BnPoint;

    fn fwd(&self, x: &BnPoint) -> Option<BnPoint> {
        self.apply(x)
    }

    fn bwd(&self, y: &BnPoint) -> Option<BnPoint> {
        self.apply_inv(y)
    }
}

#[derive(Serialize, Deserialize)]
struct BnIsoRepr {
    n: u32,
    tau: String,
    pairs: Vec<(BnPoint, BnPoint)>,
}

impl Serialize for BnPartialIso {
    fn serialize<S: Serializer>(&self, ser: S) -> Result<S::Ok, S::Error> {
        BnIsoRepr { n: self.n, tau: self.tau.to_cycles(), pairs: self.pairs() }.serialize(ser)
    }
}

impl<'de> Deserialize<'de> for BnPartialIso {
    fn deserialize<D: Deserializer<'de>>(de: D) -> Result<BnPartialIso, D::Error> {
        let repr = BnIsoRepr::deserialize(de)?;
        let tau = Perm::from_cycles(&repr.tau, repr.n as usize)
            .map_err(|e| D::Error::custom(format!("{e}")))?;
        BnPartialIso::from_pairs(repr.n, tau, repr.pairs)
            .map_err(|e| D::Error::custom(format!("{e}")))
    }
}

/// Builds a map from raw pairs, completing the partial row permutation to a
/// total one by the least-available-image rule.
pub fn decompose(pairs: &[(BnPoint, BnPoint)], n: u32) -> Result<BnPartialIso, BnError> {
    let mut row_to: BTreeMap<u32, u32> = BTreeMap::new();
    for (x, y) in pairs {
        if x.row == 0 || x.row > n {
            return Err(BnError::RowOutOfBounds { row: x.row, n });
        }
        if y.row == 0 || y.row > n {
            return Err(BnError::RowOutOfBounds { row: y.row, n });
        }
        match row_to.get(&x.row) {
            Some(&l) if l != y.row => {
                return Err(BnError::RowConflict { row: x.row, first: l, second: y.row });
            }
            _ => {
                row_to.insert(x.row, y.row);
            }
        }
    }
    let mut taken: BTreeSet<u32> = row_to.values().copied().collect();
    if taken.len() != row_to.len() {
        return Err(BnError::Sections("two rows map into one row".into()));
    }
    let mut images = Vec::with_capacity(n as usize);
    for k in 1..=n {
        let l = match row_to.get(&k) {
            Some(&l) => l,
            None => {
                let free = (1..=n).find(|cand| !taken.contains(cand)).unwrap();
                taken.insert(free);
                free
            }
        };
        images.push(l - 1);
    }
    let tau = Perm::from_images(images)?;
    BnPartialIso::from_pairs(n, tau, pairs.iter().cloned())
}

/// One-point domain extension inside the row gap, the image avoiding `avoid`
/// and every second coordinate of the domain.
pub fn extend_dom_bn(
    f: &BnPartialIso,
    x: &BnPoint,
    avoid: &BTreeSet<Q>,
) -> Result<BnPartialIso, BnError> {
    if !f.is_positive() {
        return Err(BnError::NotPositive);
    }
    f.check_row(x.row)?;
    if f.contains_dom(x) {
        return Err(BnError::InDomain(x.clone()));
    }
    let empty = QPartialIso::new();
    let rm = f.row_map(x.row).unwrap_or(&empty);
    let below = rm.dom().filter(|v| *v < &x.value).max();
    let above = rm.dom().filter(|v| *v > &x.value).min();
    let lo = match below {
        Some(a) => {
            let fa = rm.apply(a).unwrap();
            Bound::Fin(if fa > &x.value { fa.clone() } else { x.value.clone() })
        }
        None => Bound::Fin(x.value.clone()),
    };
    let hi = match above {
        Some(b) => Bound::Fin(rm.apply(b).unwrap().clone()),
        None => Bound::PosInf,
    };
    let mut exclude = avoid.clone();
    exclude.extend(f.dom_values());
    let y = pick_between(&lo, &hi, &exclude)?;
    let mut out = f.clone();
    let target = BnPoint::new(f.tau_of_row(x.row), y);
    out.insert(x.clone(), target)?;
    Ok(out)
}

/// One-point range extension: the preimage lands in `(m, y)` within the row
/// gap, avoiding `avoid` and every second coordinate of the range.
pub fn extend_rng_bn(
    f: &BnPartialIso,
    y: &BnPoint,
    m: &Q,
    avoid: &BTreeSet<Q>,
) -> Result<BnPartialIso, BnError> {
    if !f.is_positive() {
        return Err(BnError::NotPositive);
    }
    f.check_row(y.row)?;
    if y.value <= *m {
        return Err(BnError::NotAbove { value: y.value.clone(), bound: m.clone() });
    }
    if !f.dom_above(m) {
        return Err(BnError::NotAbove {
            value: f.dom_values().into_iter().next().unwrap(),
            bound: m.clone(),
        });
    }
    if f.contains_rng(y) {
        return Err(BnError::InRange(y.clone()));
    }
    let k = f.tau_inv_of_row(y.row);
    let empty = QPartialIso::new();
    let rm = f.row_map(k).unwrap_or(&empty);
    let below = rm.rng().filter(|v| *v < &y.value).max();
    let above = rm.rng().filter(|v| *v > &y.value).min();
    let lo = match below {
        Some(c) => {
            let fc = rm.apply_inv(c).unwrap();
            Bound::Fin(if fc > m { fc.clone() } else { m.clone() })
        }
        None => Bound::Fin(m.clone()),
    };
    let hi = match above {
        Some(d) => {
            let fd = rm.apply_inv(d).unwrap();
            Bound::Fin(if fd < &y.value { fd.clone() } else { y.value.clone() })
        }
        None => Bound::Fin(y.value.clone()),
    };
    let mut exclude = avoid.clone();
    exclude.extend(f.rng_values());
    let xv = pick_between(&lo, &hi, &exclude)?;
    let mut out = f.clone();
    out.insert(BnPoint::new(k, xv), y.clone())?;
    Ok(out)
}

/// Extends so that (k, p0) lies in both domain and range for every row k.
pub fn close_point_bn(f: &BnPartialIso, p0: &Q) -> Result<BnPartialIso, BnError> {
    if !f.is_positive() {
        return Err(BnError::NotPositive);
    }
    let mut out = f.clone();
    for k in 1..=f.n() {
        let x = BnPoint::new(k, p0.clone());
        if !out.contains_dom(&x) {
            out = extend_dom_bn(&out, &x, &BTreeSet::new())?;
        }
    }
    let mut floor = p0.clone();
    if let Some(lo) = out.dom_values().into_iter().next() {
        if lo < floor {
            floor = lo;
        }
    }
    let m = floor.plus_int(-1);
    for k in 1..=f.n() {
        let y = BnPoint::new(k, p0.clone());
        if !out.contains_rng(&y) {
            out = extend_rng_bn(&out, &y, &m, &BTreeSet::new())?;
        }
    }
    Ok(out)
}

/// Extends `f` so that some iterate of `x` of exponent `l >= m` lands above
/// `big_m` in the second coordinate.
///
/// Walks the existing orbit of `x`, then escapes through the free gaps of the
/// successive rows (the gap pick is fresh for the whole support, so each step
/// strictly raises the value) and finally climbs straight up on fresh values
/// above everything. Returns the extension and the witnessing exponent.
pub fn push_point_high(
    f: &BnPartialIso,
    x: &BnPoint,
    m: u64,
    big_m: &Q,
) -> Result<(BnPartialIso, u64), BnError> {
    if !f.is_positive() {
        return Err(BnError::NotPositive);
    }
    f.check_row(x.row)?;
    let mut f = f.clone();
    let mut cur = x.clone();
    let mut steps: u64 = 0;
    loop {
        let settled = steps > 0 || f.contains_dom(x);
        if settled && steps >= m && cur.value > *big_m {
            return Ok((f, steps));
        }
        match f.apply(&cur) {
            Some(next) => {
                cur = next;
                steps += 1;
            }
            None => break,
        }
    }
    // cur is outside the domain now; escape upward through row gaps
    let escape_bound = (f.len() as u64 + f.n() as u64 + 2) * (f.n() as u64 + 1);
    let mut escape_steps = 0u64;
    loop {
        let gap = f.row_map(cur.row).and_then(|rm| {
            let a_i = rm.dom().filter(|v| **v > cur.value).min()?.clone();
            let b_i = rm.apply(&a_i).unwrap().clone();
            let b_prev = rm
                .dom()
                .filter(|v| **v < cur.value)
                .max()
                .map(|a| rm.apply(a).unwrap().clone());
            Some((a_i, b_prev, b_i))
        });
        let Some((a_i, b_prev, b_i)) = gap else { break };
        escape_steps += 1;
        assert!(escape_steps <= escape_bound, "gap escape must terminate");
        let lo = match b_prev {
            Some(bp) if bp > a_i => bp,
            _ => a_i,
        };
        let hole = pick_between(&Bound::Fin(lo), &Bound::Fin(b_i), &f.support_values())?;
        let target = BnPoint::new(f.tau_of_row(cur.row), hole);
        f.insert(cur, target.clone())?;
        cur = target;
        steps += 1;
        if steps >= m && cur.value > *big_m {
            return Ok((f, steps));
        }
    }
    // straight climb on fresh values above the bound and the whole support
    let climb = (m as i64 - steps as i64).max(1) as u64;
    let mut v = {
        let mut base = big_m.clone();
        if cur.value > base {
            base = cur.value.clone();
        }
        if let Some(top) = f.support_values().into_iter().next_back() {
            if top > base {
                base = top;
            }
        }
        base.plus_int(1)
    };
    for _ in 0..climb {
        let target = BnPoint::new(f.tau_of_row(cur.row), v.clone());
        f.insert(cur, target.clone())?;
        cur = target;
        steps += 1;
        v = v.plus_int(1);
    }
    Ok((f, steps))
}

/// Pushes every point of `c` above `big_m` with one shared exponent `l >= m`,
/// then pads each orbit so the next `t` iterates stay defined. Along an orbit
/// of a positive map the value only grows, so the whole window
/// `l..l+t-1` sits above `big_m`.
pub fn push_set_high(
    f: &BnPartialIso,
    c: &BTreeSet<BnPoint>,
    m: u64,
    t: u64,
    big_m: &Q,
) -> Result<(BnPartialIso, u64), BnError> {
    let mut f = f.clone();
    let mut l = m;
    for x in c {
        let (nf, li) = push_point_high(&f, x, m, big_m)?;
        f = nf;
        l = l.max(li);
    }
    for x in c {
        let mut cur = x.clone();
        for _ in 0..(l + t) {
            match f.apply(&cur) {
                Some(next) => cur = next,
                None => {
                    f = extend_dom_bn(&f, &cur, &BTreeSet::new())?;
                    cur = f.apply(&cur).unwrap();
                }
            }
        }
    }
    Ok((f, l))
}

fn sorted_section(set: &BTreeSet<BnPoint>, row: u32) -> Vec<Q> {
    set.iter()
        .filter(|p| p.row == row)
        .map(|p| p.value.clone())
        .collect()
}

fn section_sizes(set: &BTreeSet<BnPoint>, n: u32) -> Vec<usize> {
    let mut out = vec![0usize; n as usize];
    for p in set {
        out[p.row as usize - 1] += 1;
    }
    out
}

/// out[p(l)] = sizes[l], rows 0-based.
fn permute_rows(sizes: &[usize], p: &Perm) -> Vec<usize> {
    let mut out = vec![0usize; sizes.len()];
    for (l, &z) in sizes.iter().enumerate() {
        out[p.apply(l as u32) as usize] = z;
    }
    out
}

/// Evenly spaced fresh sections inside the open band (lo, hi), one per row.
fn place_band(sizes: &[usize], lo: &Q, hi: &Q) -> BTreeSet<BnPoint> {
    let mut out = BTreeSet::new();
    for (idx, &z) in sizes.iter().enumerate() {
        for j in 1..=z {
            let v = subdivide(lo, hi, j as i64, z as i64 + 1);
            out.insert(BnPoint::new(idx as u32 + 1, v));
        }
    }
    out
}

fn set_values(set: &BTreeSet<BnPoint>) -> impl Iterator<Item = &Q> {
    set.iter().map(|p| &p.value)
}

/// The canonical positive pair of a family adjusted to a positive-terms word:
/// position i maps onto position i+1 through the letter's permutation, row
/// section onto row section in sorted order. `s` collects the a-steps, `r`
/// the b-steps.
pub fn canonical_pair(
    w: &Word,
    eta: &Perm,
    xi: &Perm,
    family: &[BTreeSet<BnPoint>],
) -> Result<(BnPartialIso, BnPartialIso), BnError> {
    let n = eta.n();
    if xi.n() != n {
        return Err(BnError::DegreeMismatch { got: xi.n(), want: n });
    }
    if !w.is_positive() {
        return Err(BnError::Sections("word must have positive terms".into()));
    }
    let m = w.total_length() as usize;
    if family.len() != m + 1 {
        return Err(BnError::Sections(format!(
            "family has {} sets, word needs {}",
            family.len(),
            m + 1
        )));
    }
    for set in family {
        for p in set {
            if p.row == 0 || p.row > n as u32 {
                return Err(BnError::RowOutOfBounds { row: p.row, n: n as u32 });
            }
        }
    }
    // positions must be ordered within every row
    for k in 1..=n as u32 {
        let mut last_max: Option<Q> = None;
        for set in family {
            let sec = sorted_section(set, k);
            if sec.is_empty() {
                continue;
            }
            if let Some(prev) = &last_max {
                if sec[0] <= *prev {
                    return Err(BnError::Sections(format!("row {k} sections out of order")));
                }
            }
            last_max = Some(sec.last().unwrap().clone());
        }
    }
    let mut s = BnPartialIso::empty(n as u32, eta.clone())?;
    let mut r = BnPartialIso::empty(n as u32, xi.clone())?;
    let mut front: Vec<u32> = (1..=n as u32).collect(); // rows hosting each chain at this position
    for (i, (letter, _)) in w.units_applied_first().enumerate() {
        let step = match letter {
            Letter::A => eta,
            Letter::B => xi,
        };
        for from_row in std::mem::take(&mut front) {
            let to_row = step.apply(from_row - 1) + 1;
            let from = sorted_section(&family[i], from_row);
            let to = sorted_section(&family[i + 1], to_row);
            if from.len() != to.len() {
                return Err(BnError::Sections(format!(
                    "position {} row {} has {} points, position {} row {} has {}",
                    i + 1,
                    from_row,
                    from.len(),
                    i + 2,
                    to_row,
                    to.len()
                )));
            }
            let target = match letter {
                Letter::A => &mut s,
                Letter::B => &mut r,
            };
            for (p, q) in from.into_iter().zip(to) {
                target.insert(BnPoint::new(from_row, p), BnPoint::new(to_row, q))?;
            }
            front.push(to_row);
        }
    }
    if !s.is_positive() || !r.is_positive() {
        return Err(BnError::NotPositive);
    }
    Ok((s, r))
}

/// Lifts the rational word-killing maps to every row: `a` permutes rows by
/// `eta`, `b` by `xi`, and the witness sits in row 1.
pub fn kill_word_bn(
    w: &Word,
    m: &Q,
    eta: &Perm,
    xi: &Perm,
) -> Result<(BnPartialIso, BnPartialIso, BnPoint), BnError> {
    let n = eta.n();
    if xi.n() != n {
        return Err(BnError::DegreeMismatch { got: xi.n(), want: n });
    }
    let kq = kill_word_q(w, m)?;
    let mut s = BnPartialIso::empty(n as u32, eta.clone())?;
    let mut r = BnPartialIso::empty(n as u32, xi.clone())?;
    for l in 1..=n as u32 {
        for (p, q) in kq.s.iter() {
            s.insert(
                BnPoint::new(l, p.clone()),
                BnPoint::new(eta.apply(l - 1) + 1, q.clone()),
            )?;
        }
        for (p, q) in kq.r.iter() {
            r.insert(
                BnPoint::new(l, p.clone()),
                BnPoint::new(xi.apply(l - 1) + 1, q.clone()),
            )?;
        }
    }
    Ok((s, r, BnPoint::new(1, kq.p)))
}

/// True when every pair of `h` is a pair of `f`.
pub fn check_section_extension(h: &BnPartialIso, f: &BnPartialIso) -> bool {
    f.extends(h)
}

/// Builds positive maps and a word moving `a_set` exactly onto `b_set`.
///
/// Both sets are first shifted into fresh bands above everything by an
/// initial b-map; a shortest positive-terms word realizing `tau * xi^-1`
/// then walks the image of `a_set` rightward through one band per letter; a
/// ladder of `b`-sets threaded through the tail positions and an `a`-ladder
/// closing at the top let the final word return onto the shifted `b_set`.
/// Everything sits above `m` except the initial shift, whose domain is the
/// input sets themselves.
///
/// Requires `eta`, `xi` generating, matching section sizes `|A^k| =
/// |B^{tau(k)}|`, all of `a_set` above `m_prime`, and `a_set` entirely below
/// `b_set` in second coordinate.
pub fn killing_isom(
    a_set: &BTreeSet<BnPoint>,
    b_set: &BTreeSet<BnPoint>,
    tau: &Perm,
    eta: &Perm,
    xi: &Perm,
    m: &Q,
    m_prime: &Q,
) -> Result<(BnPartialIso, BnPartialIso, Word), BnError> {
    let n = eta.n();
    if xi.n() != n || tau.n() != n {
        return Err(BnError::DegreeMismatch { got: xi.n().max(tau.n()), want: n });
    }
    for set in [a_set, b_set] {
        for p in set {
            if p.row == 0 || p.row > n as u32 {
                return Err(BnError::RowOutOfBounds { row: p.row, n: n as u32 });
            }
        }
    }
    if !generates(&[eta.clone(), xi.clone()], n) {
        return Err(BnError::NotGenerating);
    }
    let sizes_a = section_sizes(a_set, n as u32);
    let sizes_b = section_sizes(b_set, n as u32);
    for k in 0..n {
        if sizes_a[k] != sizes_b[tau.apply(k as u32) as usize] {
            return Err(BnError::Sections(format!(
                "|A^{}| = {} but |B^{}| = {}",
                k + 1,
                sizes_a[k],
                tau.apply(k as u32) + 1,
                sizes_b[tau.apply(k as u32) as usize]
            )));
        }
    }
    if let Some(bad) = set_values(a_set).find(|v| *v <= m_prime) {
        return Err(BnError::NotAbove { value: bad.clone(), bound: m_prime.clone() });
    }
    if let (Some(amax), Some(bmin)) = (set_values(a_set).max(), set_values(b_set).min()) {
        if amax >= bmin {
            return Err(BnError::Sections(
                "first set must lie entirely below the second".into(),
            ));
        }
    }

    // fresh bands for the shifted copies
    let mut c = m.clone();
    if let Some(top) = set_values(a_set).chain(set_values(b_set)).max() {
        if *top > c {
            c = top.clone();
        }
    }
    let c = c.plus_int(1);
    let d = c.plus_int(1);
    let a_tilde = place_band(&permute_rows(&sizes_a, xi), &c, &d);
    let b_tilde = place_band(&permute_rows(&sizes_b, xi), &d, &d.plus_int(1));
    let mut r0 = BnPartialIso::empty(n as u32, xi.clone())?;
    for k in 1..=n as u32 {
        let to = xi.apply(k - 1) + 1;
        for (p, q) in sorted_section(a_set, k).into_iter().zip(sorted_section(&a_tilde, to)) {
            r0.insert(BnPoint::new(k, p), BnPoint::new(to, q))?;
        }
        for (p, q) in sorted_section(b_set, k).into_iter().zip(sorted_section(&b_tilde, to)) {
            r0.insert(BnPoint::new(k, p), BnPoint::new(to, q))?;
        }
    }

    let w_hat = word_for_permutation(&tau.compose(&xi.inverse()), eta, xi, true)?;
    let m_len = w_hat.total_length() as usize;
    let units: Vec<Letter> = w_hat.units_applied_first().map(|(l, _)| l).collect();
    let half = Q::new(1, 2);

    // c_i = d + 1 + i; the walking family occupies (c_i, c_i + 1/2)
    let c_at = |i: usize| d.plus_int(1 + i as i64);
    let cm = c_at(m_len);

    let mut fam: Vec<BTreeSet<BnPoint>> = vec![a_tilde.clone()];
    let mut sizes_cur = section_sizes(&a_tilde, n as u32);
    for (i, letter) in units.iter().enumerate() {
        let step = match letter {
            Letter::A => eta,
            Letter::B => xi,
        };
        sizes_cur = permute_rows(&sizes_cur, step);
        let lo = c_at(i + 1);
        fam.push(place_band(&sizes_cur, &lo, &(&lo + &half)));
    }
    let (s1, r1) = canonical_pair(&w_hat, eta, xi, &fam)?;

    let t = units.iter().filter(|l| **l == Letter::B).count();
    let b_positions: Vec<usize> = (1..=m_len).filter(|i| units[i - 1] == Letter::B).collect();
    let chi: usize = if units.first() == Some(&Letter::B) { 0 } else { 1 };
    let ord_xi = xi.order() as usize;
    let t0 = ord_xi * (t + 3).div_ceil(ord_xi) - 1;
    let i0 = eta.order() as usize;

    let mut bfam: Vec<BTreeSet<BnPoint>> = vec![b_tilde.clone()];
    let mut sizes_bt = section_sizes(&b_tilde, n as u32);
    for j in 2..=(t0 + 1) {
        sizes_bt = permute_rows(&sizes_bt, xi);
        let set = if j >= 2 && j <= t + chi {
            // interleave inside the gap after the b-position's band
            let li = b_positions[j - chi - 1];
            let lo = &c_at(li - 1) + &half;
            place_band(&sizes_bt, &lo, &c_at(li - 1).plus_int(1))
        } else {
            // tail bands above the walking family
            let jj = (j - t - chi) as i64;
            let lo = cm.plus_int(jj);
            place_band(&sizes_bt, &lo, &(&lo + &half))
        };
        bfam.push(set);
    }
    let (_, r2) = canonical_pair(&Word::letter(Letter::B, t0 as i64), eta, xi, &bfam)?;

    let mut dfam: Vec<BTreeSet<BnPoint>> = vec![fam[m_len].clone()];
    let mut sizes_d = section_sizes(&fam[m_len], n as u32);
    let delta = Q::new(1, 2 * i0 as i64);
    for j in 1..i0 {
        sizes_d = permute_rows(&sizes_d, eta);
        let lo = &(&cm + &half) + &(&delta * &Q::int(j as i64 - 1));
        dfam.push(place_band(&sizes_d, &lo, &(&lo + &delta)));
    }
    dfam.push(bfam[t0].clone());
    let (s2, _) = canonical_pair(&Word::letter(Letter::A, i0 as i64), eta, xi, &dfam)?;

    let s = s1.union_with(&s2)?;
    let r = r0.union_with(&r1)?.union_with(&r2)?;
    let w = Word::concat(&[
        &Word::letter(Letter::B, -(t0 as i64) - 1),
        &Word::letter(Letter::A, i0 as i64),
        &w_hat,
        &Word::letter(Letter::B, 1),
    ]);

    debug_assert!(s.is_positive() && r.is_positive());
    debug_assert!({
        let weval = (0..n as u32).map(|k| evaluate(&w, eta, xi, k).unwrap()).collect::<Vec<_>>();
        Perm::from_images(weval).unwrap() == *tau
    });
    debug_assert!((1..=n as u32).all(|k| {
        let to = tau.apply(k - 1) + 1;
        sorted_section(a_set, k)
            .into_iter()
            .zip(sorted_section(b_set, to))
            .all(|(p, q)| {
                evaluate(&w, &s, &r, BnPoint::new(k, p)) == Some(BnPoint::new(to, q))
            })
    }));
    Ok((s, r, w))
}

#[derive(Clone, Debug)]
pub struct KeyLemmaBn {
    pub f_out: BnPartialIso,
    pub g_out: BnPartialIso,
    pub w_bar: Word,
    pub y: BnPoint,
}

fn max_q<'a, I: Iterator<Item = &'a Q>>(iter: I, floor: &Q) -> Q {
    let mut out = floor.clone();
    for v in iter {
        if *v > out {
            out = v.clone();
        }
    }
    out
}

/// Smallest multiple of `ord` inside the window `[l, l + ord - 1]`; zero for
/// an empty push.
fn multiple_in_window(l: u64, ord: u64) -> u64 {
    if l == 0 {
        0
    } else {
        l.div_ceil(ord) * ord
    }
}

/// Extends a positive `f` and an arbitrary `g` so that `h` agrees with a
/// word in the pair on its whole domain while `w` moves some fresh point.
pub fn key_lemma_bn(
    f: &BnPartialIso,
    g: &BnPartialIso,
    h: &BnPartialIso,
    w: &Word,
) -> Result<KeyLemmaBn, BnError> {
    let n = f.n();
    if g.n() != n || h.n() != n {
        return Err(BnError::DegreeMismatch { got: g.n().max(h.n()) as usize, want: n as usize });
    }
    if !f.is_positive() {
        return Err(BnError::NotPositive);
    }
    let eta = f.tau().clone();
    let xi = g.tau().clone();
    if !generates(&[eta.clone(), xi.clone()], n as usize) {
        return Err(BnError::NotGenerating);
    }
    let ord_eta = eta.order();

    let zero = Q::zero();
    let m0 = max_q(
        f.support_values()
            .iter()
            .chain(g.support_values().iter())
            .chain(h.support_values().iter()),
        &zero,
    )
    .plus_int(1);

    let dom_h: BTreeSet<BnPoint> = h.dom_points().collect();
    let rng_h: BTreeSet<BnPoint> = h.rng_points().collect();

    let (f0, l) = push_set_high(f, &dom_h, 1, ord_eta, &m0)?;
    let m_exp = multiple_in_window(if dom_h.is_empty() { 0 } else { l }, ord_eta);
    let m1 = max_q(f0.support_values().iter(), &m0).plus_int(1);
    let (f1, l2) = push_set_high(&f0, &rng_h, 1, ord_eta, &m1)?;
    let m_exp2 = multiple_in_window(if rng_h.is_empty() { 0 } else { l2 }, ord_eta);

    let a_set: BTreeSet<BnPoint> = dom_h
        .iter()
        .map(|x| f1.apply_pow(x, m_exp as i64).expect("orbit was padded"))
        .collect();
    let b_set: BTreeSet<BnPoint> = rng_h
        .iter()
        .map(|x| f1.apply_pow(x, m_exp2 as i64).expect("orbit was padded"))
        .collect();

    let m2 = max_q(f1.support_values().iter(), &m1).plus_int(1);
    let (s, r, w_prime) = killing_isom(&a_set, &b_set, h.tau(), &eta, &xi, &m2, &m0)?;
    let f2 = f1.union_with(&s)?;
    let g2 = g.union_with(&r)?;
    let w_bar = Word::concat(&[
        &Word::letter(Letter::A, -(m_exp2 as i64)),
        &w_prime,
        &Word::letter(Letter::A, m_exp as i64),
    ]);

    let m3 = max_q(f2.support_values().iter().chain(g2.support_values().iter()), &m2).plus_int(1);
    let (s3, r3, y) = kill_word_bn(w, &m3, &eta, &xi)?;
    let f_out = f2.union_with(&s3)?;
    let g_out = g2.union_with(&r3)?;

    debug_assert!(f_out.extends(f) && g_out.extends(g));
    debug_assert!(h.pairs().into_iter().all(|(x, img)| {
        evaluate(&w_bar, &f_out, &g_out, x) == Some(img)
    }));
    debug_assert_ne!(evaluate(w, &f_out, &g_out, y.clone()), Some(y.clone()));
    Ok(KeyLemmaBn { f_out, g_out, w_bar, y })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(v: i64) -> Q {
        Q::int(v)
    }

    fn pt(row: u32, v: i64) -> BnPoint {
        BnPoint::new(row, q(v))
    }

    fn id(n: usize) -> Perm {
        Perm::identity(n)
    }

    fn cyc(s: &str, n: usize) -> Perm {
        Perm::from_cycles(s, n).unwrap()
    }

    fn iso(n: u32, tau: Perm, pairs: &[((u32, i64), (u32, i64))]) -> BnPartialIso {
        BnPartialIso::from_pairs(
            n,
            tau,
            pairs.iter().map(|&((k, p), (l, v))| (pt(k, p), pt(l, v))),
        )
        .unwrap()
    }

    #[test]
    fn decompose_completes_tau_least_available() {
        let f = decompose(&[(pt(1, 0), pt(2, 1))], 2).unwrap();
        assert_eq!(f.tau(), &cyc("(1 2)", 2));
        assert_eq!(f.apply(&pt(1, 0)), Some(pt(2, 1)));
        assert!(f.is_positive());

        let err = decompose(&[(pt(1, 0), pt(2, 1)), (pt(1, 5), pt(1, 6))], 2);
        assert_eq!(err, Err(BnError::RowConflict { row: 1, first: 2, second: 1 }));

        let err = decompose(&[(pt(1, 0), pt(1, 1)), (pt(1, 2), pt(1, 1))], 1);
        assert!(matches!(err, Err(BnError::Chain(_))));

        let err = decompose(&[(pt(1, 0), pt(3, 1)), (pt(2, 0), pt(3, 5))], 3);
        assert!(matches!(err, Err(BnError::Sections(_))));
    }

    #[test]
    fn insert_enforces_rows_and_order() {
        let mut f = BnPartialIso::empty(2, cyc("(1 2)", 2)).unwrap();
        f.insert(pt(1, 0), pt(2, 1)).unwrap();
        assert_eq!(f.insert(pt(1, 5), pt(1, 6)), Err(BnError::TauMismatch));
        assert_eq!(
            f.insert(pt(3, 0), pt(1, 1)),
            Err(BnError::RowOutOfBounds { row: 3, n: 2 })
        );
        assert!(f.insert(pt(1, 5), pt(2, 0)).is_err()); // breaks row order
        assert_eq!(f.apply_inv(&pt(2, 1)), Some(pt(1, 0)));
        assert_eq!(f.apply_inv(&pt(1, 1)), None);
    }

    #[test]
    fn extend_dom_examples() {
        let f = BnPartialIso::empty(2, id(2)).unwrap();
        let f = extend_dom_bn(&f, &pt(1, 0), &BTreeSet::new()).unwrap();
        assert_eq!(f.apply(&pt(1, 0)), Some(pt(1, 1)));

        let g = iso(2, cyc("(1 2)", 2), &[((1, 0), (2, 1))]);
        let g = extend_dom_bn(&g, &pt(2, 0), &BTreeSet::new()).unwrap();
        let img = g.apply(&pt(2, 0)).unwrap();
        assert_eq!(img.row, 1);
        assert!(img.value > q(0));
        assert!(g.is_positive());

        assert_eq!(
            extend_dom_bn(&g, &pt(2, 0), &BTreeSet::new()),
            Err(BnError::InDomain(pt(2, 0)))
        );
    }

    #[test]
    fn extend_rng_examples() {
        let f = BnPartialIso::empty(1, id(1)).unwrap();
        let f = extend_rng_bn(&f, &pt(1, 5), &q(0), &BTreeSet::new()).unwrap();
        assert_eq!(f.apply_inv(&pt(1, 5)), Some(BnPoint::new(1, Q::new(5, 2))));
        assert!(f.is_positive());

        assert_eq!(
            extend_rng_bn(&f, &pt(1, 1), &q(2), &BTreeSet::new()),
            Err(BnError::NotAbove { value: q(1), bound: q(2) })
        );

        let avoid: BTreeSet<Q> = [Q::new(5, 2)].into();
        let g = BnPartialIso::empty(1, id(1)).unwrap();
        let g = extend_rng_bn(&g, &pt(1, 5), &q(0), &avoid).unwrap();
        let x = g.apply_inv(&pt(1, 5)).unwrap();
        assert!(!avoid.contains(&x.value));
        assert!(x.value > q(0) && x.value < q(5));
    }

    #[test]
    fn close_point_touches_every_row() {
        let f = BnPartialIso::empty(2, id(2)).unwrap();
        let closed = close_point_bn(&f, &q(0)).unwrap();
        assert_eq!(closed.len(), 4);
        for k in 1..=2 {
            assert!(closed.contains_dom(&pt(k, 0)));
            assert!(closed.contains_rng(&pt(k, 0)));
        }
        assert!(closed.is_positive());
        assert_eq!(close_point_bn(&closed, &q(0)).unwrap(), closed);
    }

    #[test]
    fn push_point_high_fresh_map() {
        let f = BnPartialIso::empty(1, id(1)).unwrap();
        let (ff, l) = push_point_high(&f, &pt(1, 0), 1, &q(100)).unwrap();
        assert!(l >= 1);
        let end = ff.apply_pow(&pt(1, 0), l as i64).unwrap();
        assert!(end.value > q(100));
        assert!(ff.is_positive());
    }

    #[test]
    fn push_point_high_early_return() {
        let f = iso(1, id(1), &[((1, 0), (1, 101))]);
        let (ff, l) = push_point_high(&f, &pt(1, 0), 1, &q(100)).unwrap();
        assert_eq!(l, 1);
        assert_eq!(ff, f);
    }

    #[test]
    fn push_point_high_escapes_interleaved_gaps() {
        let f = iso(
            2,
            cyc("(1 2)", 2),
            &[
                ((1, 0), (2, 1)),
                ((1, 4), (2, 5)),
                ((1, 8), (2, 9)),
                ((2, 2), (1, 3)),
                ((2, 6), (1, 7)),
                ((2, 10), (1, 11)),
            ],
        );
        let x = BnPoint::new(1, Q::new(1, 2));
        let (ff, l) = push_point_high(&f, &x, 3, &q(50)).unwrap();
        assert!(l >= 3);
        assert!(ff.extends(&f) && ff.is_positive());
        let end = ff.apply_pow(&x, l as i64).unwrap();
        assert!(end.value > q(50));
        // escape is bounded by the size of the original map
        assert!(ff.len() <= f.len() + 14, "len {}", ff.len());
    }

    #[test]
    fn push_set_high_window() {
        let f = BnPartialIso::empty(2, id(2)).unwrap();
        let c: BTreeSet<BnPoint> = [pt(1, 0), pt(2, 0)].into();
        let (ff, l) = push_set_high(&f, &c, 2, 3, &q(50)).unwrap();
        assert!(l >= 2);
        for x in &c {
            for i in l..l + 3 {
                let p = ff.apply_pow(x, i as i64).unwrap();
                assert!(p.value > q(50), "exponent {i}");
            }
            assert!(ff.apply_pow(x, (l + 3) as i64).is_some());
        }
    }

    #[test]
    fn push_set_matches_push_point_on_singletons() {
        let f = iso(1, id(1), &[((1, 0), (1, 2))]);
        let c: BTreeSet<BnPoint> = [pt(1, 0)].into();
        let (fs, ls) = push_set_high(&f, &c, 1, 0, &q(30)).unwrap();
        let (fp, lp) = push_point_high(&f, &pt(1, 0), 1, &q(30)).unwrap();
        assert_eq!(ls, lp);
        assert_eq!(fs, fp);
    }

    #[test]
    fn canonical_pair_single_letter() {
        let fam = [[pt(1, 0)].into(), [pt(1, 1)].into()];
        let (s, r) = canonical_pair(&"a".parse().unwrap(), &id(1), &id(1), &fam).unwrap();
        assert_eq!(s.apply(&pt(1, 0)), Some(pt(1, 1)));
        assert!(r.is_empty());
    }

    #[test]
    fn canonical_pair_two_letters_with_row_swap() {
        let eta = cyc("(1 2)", 2);
        let xi = id(2);
        let w: Word = "a b".parse().unwrap();
        let fam = [
            [pt(1, 10), pt(2, 20)].into(),
            [pt(1, 30), pt(2, 40)].into(),
            [pt(1, 60), pt(2, 50)].into(),
        ];
        let (s, r) = canonical_pair(&w, &eta, &xi, &fam).unwrap();
        assert_eq!(evaluate(&w, &s, &r, pt(1, 10)), Some(pt(2, 50)));
        assert_eq!(evaluate(&w, &s, &r, pt(2, 20)), Some(pt(1, 60)));
        assert!(s.is_positive() && r.is_positive());
    }

    #[test]
    fn canonical_pair_rejects_bad_families() {
        let fam = [[pt(1, 0), pt(1, 1)].into(), [pt(1, 2)].into()];
        assert!(matches!(
            canonical_pair(&"a".parse().unwrap(), &id(1), &id(1), &fam),
            Err(BnError::Sections(_))
        ));
        let fam = [[pt(1, 0)].into(), [pt(1, 1)].into()];
        assert!(matches!(
            canonical_pair(&"a^-1".parse().unwrap(), &id(1), &id(1), &fam),
            Err(BnError::Sections(_))
        ));
        // order violated within the row
        let fam = [[pt(1, 5)].into(), [pt(1, 1)].into()];
        assert!(matches!(
            canonical_pair(&"a".parse().unwrap(), &id(1), &id(1), &fam),
            Err(BnError::Sections(_))
        ));
    }

    #[test]
    fn kill_word_bn_lifts_row_wise() {
        let w: Word = "a".parse().unwrap();
        let (s, r, x) = kill_word_bn(&w, &q(0), &id(2), &id(2)).unwrap();
        assert_eq!(x, pt(1, 1));
        assert_eq!(evaluate(&w, &s, &r, x.clone()), Some(pt(1, 2)));
        for l in 1..=2 {
            assert_eq!(s.apply(&pt(l, 1)), Some(pt(l, 2)));
            assert_eq!(r.apply(&pt(l, 3)), Some(pt(l, 4)));
        }

        let eta = cyc("(1 2)", 2);
        let (s, r, x) = kill_word_bn(&w, &q(0), &eta, &id(2)).unwrap();
        let val = evaluate(&w, &s, &r, x.clone()).unwrap();
        assert_eq!(val, pt(2, 2));
        assert_ne!(val, x);

        assert!(matches!(
            kill_word_bn(&Word::empty(), &q(0), &id(2), &id(2)),
            Err(BnError::Chain(QChainError::EmptyWord))
        ));
    }

    fn check_killing_isom_clauses(
        a_set: &BTreeSet<BnPoint>,
        b_set: &BTreeSet<BnPoint>,
        tau: &Perm,
        eta: &Perm,
        xi: &Perm,
        m: &Q,
        m_prime: &Q,
    ) {
        let (s, r, w) = killing_isom(a_set, b_set, tau, eta, xi, m, m_prime).unwrap();
        // (a) the word carries the first set exactly onto the second
        let n = eta.n() as u32;
        let mut image = BTreeSet::new();
        for k in 1..=n {
            let to = tau.apply(k - 1) + 1;
            let av = sorted_section(a_set, k);
            let bv = sorted_section(b_set, to);
            assert_eq!(av.len(), bv.len());
            for (p, qv) in av.into_iter().zip(bv) {
                let img = evaluate(&w, &s, &r, BnPoint::new(k, p)).unwrap();
                assert_eq!(img, BnPoint::new(to, qv));
                image.insert(img);
            }
        }
        assert_eq!(&image, b_set);
        // (b) carried permutations and the word's permutation
        assert_eq!(s.tau(), eta);
        assert_eq!(r.tau(), xi);
        let weval: Vec<u32> = (0..n).map(|k| evaluate(&w, eta, xi, k).unwrap()).collect();
        assert_eq!(&Perm::from_images(weval).unwrap(), tau);
        // (c) the b-map sends both sets above m
        for x in a_set.iter().chain(b_set) {
            assert!(r.apply(x).unwrap().value > *m);
        }
        // (d) support bounds
        assert!(r.support_values().iter().all(|v| v > m_prime));
        assert!(s.support_above(m));
        assert!(s.is_positive() && r.is_positive());
    }

    #[test]
    fn killing_isom_single_row() {
        check_killing_isom_clauses(
            &[pt(1, 0)].into(),
            &[pt(1, 10)].into(),
            &id(1),
            &id(1),
            &id(1),
            &q(20),
            &q(-1),
        );
    }

    #[test]
    fn killing_isom_row_swap() {
        let (eta, xi) = crate::sym::find_generator_pair(2);
        check_killing_isom_clauses(
            &[pt(1, 0), pt(2, 1)].into(),
            &[pt(1, 5), pt(2, 6)].into(),
            &cyc("(1 2)", 2),
            &eta,
            &xi,
            &q(10),
            &q(-1),
        );
    }

    #[test]
    fn killing_isom_bigger_sections() {
        let (eta, xi) = crate::sym::find_generator_pair(3);
        let a_set: BTreeSet<BnPoint> =
            [pt(1, 0), pt(1, 2), pt(2, 1), pt(3, 0), pt(3, 1), pt(3, 2)].into();
        let b_set: BTreeSet<BnPoint> =
            [pt(2, 10), pt(2, 12), pt(3, 11), pt(1, 10), pt(1, 11), pt(1, 12)].into();
        check_killing_isom_clauses(
            &a_set,
            &b_set,
            &cyc("(1 2 3)", 3),
            &eta,
            &xi,
            &q(30),
            &q(-5),
        );
    }

    #[test]
    fn killing_isom_rejects_bad_input() {
        assert!(matches!(
            killing_isom(
                &[pt(1, 0)].into(),
                &[pt(1, 10), pt(1, 11)].into(),
                &id(1),
                &id(1),
                &id(1),
                &q(20),
                &q(-1),
            ),
            Err(BnError::Sections(_))
        ));
        assert_eq!(
            killing_isom(
                &[pt(1, 0), pt(2, 0)].into(),
                &[pt(1, 10), pt(2, 10)].into(),
                &id(2),
                &id(2),
                &id(2),
                &q(20),
                &q(-1),
            ),
            Err(BnError::NotGenerating)
        );
        // overlap between the two sets
        assert!(matches!(
            killing_isom(
                &[pt(1, 10)].into(),
                &[pt(1, 5)].into(),
                &id(1),
                &id(1),
                &id(1),
                &q(20),
                &q(-1),
            ),
            Err(BnError::Sections(_))
        ));
    }

    #[test]
    fn section_extension_check() {
        let f = iso(1, id(1), &[((1, 0), (1, 1)), ((1, 2), (1, 3))]);
        let h = iso(1, id(1), &[((1, 0), (1, 1))]);
        assert!(check_section_extension(&h, &f));
        let h2 = iso(1, id(1), &[((1, 0), (1, 3))]);
        assert!(!check_section_extension(&h2, &f));
    }

    fn check_key_lemma_clauses(f: &BnPartialIso, g: &BnPartialIso, h: &BnPartialIso, w: &Word) {
        let out = key_lemma_bn(f, g, h, w).unwrap();
        assert!(out.f_out.extends(f) && out.g_out.extends(g));
        assert_eq!(out.f_out.tau(), f.tau());
        assert_eq!(out.g_out.tau(), g.tau());
        assert!(out.f_out.is_positive());
        for (x, img) in h.pairs() {
            assert_eq!(evaluate(&out.w_bar, &out.f_out, &out.g_out, x), Some(img));
        }
        let moved = evaluate(w, &out.f_out, &out.g_out, out.y.clone()).unwrap();
        assert_ne!(moved, out.y);
    }

    #[test]
    fn key_lemma_single_row() {
        let f = BnPartialIso::empty(1, id(1)).unwrap();
        let g = BnPartialIso::empty(1, id(1)).unwrap();
        let h = iso(1, id(1), &[((1, 0), (1, 1))]);
        check_key_lemma_clauses(&f, &g, &h, &"a".parse().unwrap());
    }

    #[test]
    fn key_lemma_two_rows() {
        let swap = cyc("(1 2)", 2);
        let f = BnPartialIso::empty(2, swap.clone()).unwrap();
        let g = BnPartialIso::empty(2, swap.clone()).unwrap();
        let h = iso(2, swap, &[((1, 0), (2, 1)), ((2, 0), (1, 1))]);
        check_key_lemma_clauses(&f, &g, &h, &"a b^-1".parse().unwrap());
    }

    #[test]
    fn key_lemma_nonempty_seeds_and_empty_h() {
        let swap = cyc("(1 2)", 2);
        let f = iso(2, swap.clone(), &[((1, 0), (2, 1))]);
        let g = iso(2, id(2), &[((1, 0), (1, 2)), ((2, 5), (2, 7))]);
        let h = iso(2, swap.clone(), &[((1, 1), (2, 3)), ((1, 4), (2, 9)), ((2, 2), (1, 0))]);
        check_key_lemma_clauses(&f, &g, &h, &"b a^2".parse().unwrap());

        let h_empty = BnPartialIso::empty(2, swap).unwrap();
        check_key_lemma_clauses(&f, &g, &h_empty, &"a".parse().unwrap());
    }

    #[test]
    fn key_lemma_rejects_non_generating_taus() {
        let f = BnPartialIso::empty(2, id(2)).unwrap();
        let g = BnPartialIso::empty(2, id(2)).unwrap();
        let h = BnPartialIso::empty(2, id(2)).unwrap();
        assert!(matches!(
            key_lemma_bn(&f, &g, &h, &"a".parse().unwrap()),
            Err(BnError::NotGenerating)
        ));
    }

    #[test]
    fn serde_round_trip() {
        let f = iso(2, cyc("(1 2)", 2), &[((1, 0), (2, 1)), ((2, 3), (1, 5))]);
        let json = serde_json::to_string(&f).unwrap();
        let back: BnPartialIso = serde_json::from_str(&json).unwrap();
        assert_eq!(back, f);
        // row order violations rejected on the way in
        let bad = r#"{"n":1,"tau":"()","pairs":[[[1,"0"],[1,"5"]],[[1,"1"],[1,"2"]]]}"#;
        assert!(serde_json::from_str::<BnPartialIso>(bad).is_err());
    }
}
