//! The chain of antichains: points (k, p) with column k and level p, ordered
//! by level alone; points sharing a level are incomparable. A partial
//! isomorphism is a strictly increasing map on the touched levels together
//! with one injective column map per level. Columns run over 1..=n or over
//! all positive integers.
//!
//! Positive maps raise every level, which gives the same climbing toolkit as
//! the other structures: one-point extensions through level gaps, pushing
//! points above a threshold, and unions of maps separated by a level.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::order::{pick_between, Bound, OrderError, Q};
use crate::qchain::{kill_word_q, QChainError};
use crate::words::{evaluate, PointMap, Word};

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct CnPoint {
    pub col: u32,
    pub level: Q,
}

impl CnPoint {
    pub fn new(col: u32, level: Q) -> CnPoint {
        CnPoint { col, level }
    }
}

impl fmt::Display for CnPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.col, self.level)
    }
}

impl Serialize for CnPoint {
    fn serialize<S: Serializer>(&self, ser: S) -> Result<S::Ok, S::Error> {
        (self.col, &self.level).serialize(ser)
    }
}

impl<'de> Deserialize<'de> for CnPoint {
    fn deserialize<D: Deserializer<'de>>(de: D) -> Result<CnPoint, D::Error> {
        let (col, level) = <(u32, Q)>::deserialize(de)?;
        Ok(CnPoint { col, level })
    }
}

/// Column bound: n columns or countably many.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum ColBound {
    Finite(u32),
    Omega,
}

impl ColBound {
    pub fn allows(&self, col: u32) -> bool {
        col >= 1
            && match self {
                ColBound::Finite(n) => col <= *n,
                ColBound::Omega => true,
            }
    }
}

impl fmt::Display for ColBound {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ColBound::Finite(n) => write!(f, "{n}"),
            ColBound::Omega => write!(f, "omega"),
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CnError {
    #[error(transparent)]
    Order(#[from] OrderError),
    #[error(transparent)]
    Chain(#[from] QChainError),
    #[error("column bound must be at least 2")]
    BadBound,
    #[error("column bounds disagree")]
    BoundMismatch,
    #[error("column {col} is outside 1..={n}")]
    ColOutOfBounds { col: u32, n: u32 },
    #[error("level {level} maps to both {first} and {second}")]
    LevelConflict { level: Q, first: Q, second: Q },
    #[error("levels cross: {0}")]
    NotIso(String),
    #[error("map must be positive")]
    NotPositive,
    #[error("{0} is already in the domain")]
    InDomain(CnPoint),
    #[error("{0} is already in the range")]
    InRange(CnPoint),
    #[error("supports must be separated by level {0}")]
    SeparationViolated(Q),
}

#[derive(Clone, Debug, PartialEq, Eq)]
struct CnLevel {
    image: Q,
    cols: BTreeMap<u32, u32>,
}

/// Finite partial isomorphism of the chain of antichains: a strictly
/// increasing level map plus per-level injective column maps.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CnPartialIso {
    bound: ColBound,
    levels: BTreeMap<Q, CnLevel>,
}

impl CnPartialIso {
    pub fn empty(bound: ColBound) -> Result<CnPartialIso, CnError> {
        if let ColBound::Finite(n) = bound {
            if n < 2 {
                return Err(CnError::BadBound);
            }
        }
        Ok(CnPartialIso { bound, levels: BTreeMap::new() })
    }

    pub fn from_pairs<I>(bound: ColBound, pairs: I) -> Result<CnPartialIso, CnError>
    where
        I: IntoIterator<Item = (CnPoint, CnPoint)>,
    {
        let mut out = CnPartialIso::empty(bound)?;
        for (x, y) in pairs {
            out.insert(x, y)?;
        }
        Ok(out)
    }

    pub fn bound(&self) -> ColBound {
        self.bound
    }

    fn check_col(&self, col: u32) -> Result<(), CnError> {
        if !self.bound.allows(col) {
            let n = match self.bound {
                ColBound::Finite(n) => n,
                ColBound::Omega => u32::MAX,
            };
            return Err(CnError::ColOutOfBounds { col, n });
        }
        Ok(())
    }

    pub fn insert(&mut self, x: CnPoint, y: CnPoint) -> Result<(), CnError> {
        self.check_col(x.col)?;
        self.check_col(y.col)?;
        match self.levels.get_mut(&x.level) {
            Some(lv) => {
                if lv.image != y.level {
                    return Err(CnError::LevelConflict {
                        level: x.level,
                        first: lv.image.clone(),
                        second: y.level,
                    });
                }
                match lv.cols.get(&x.col) {
                    Some(&l) if l == y.col => Ok(()),
                    Some(_) => Err(CnError::InDomain(x)),
                    None => {
                        if lv.cols.values().any(|&l| l == y.col) {
                            return Err(CnError::InRange(y));
                        }
                        lv.cols.insert(x.col, y.col);
                        Ok(())
                    }
                }
            }
            None => {
                for (p, lv) in &self.levels {
                    if lv.image == y.level {
                        return Err(CnError::NotIso(format!(
                            "levels {} and {} share the image level {}",
                            p, x.level, y.level
                        )));
                    }
                    if (*p < x.level) != (lv.image < y.level) {
                        return Err(CnError::NotIso(format!(
                            "levels {} -> {} and {} -> {} cross",
                            p, lv.image, x.level, y.level
                        )));
                    }
                }
                self.levels.insert(
                    x.level,
                    CnLevel { image: y.level, cols: [(x.col, y.col)].into() },
                );
                Ok(())
            }
        }
    }

    pub fn apply(&self, x: &CnPoint) -> Option<CnPoint> {
        let lv = self.levels.get(&x.level)?;
        let col = *lv.cols.get(&x.col)?;
        Some(CnPoint::new(col, lv.image.clone()))
    }

    pub fn apply_inv(&self, y: &CnPoint) -> Option<CnPoint> {
        for (p, lv) in &self.levels {
            if lv.image == y.level {
                let (&k, _) = lv.cols.iter().find(|(_, &l)| l == y.col)?;
                return Some(CnPoint::new(k, p.clone()));
            }
        }
        None
    }

    pub fn apply_pow(&self, x: &CnPoint, k: i64) -> Option<CnPoint> {
        let mut cur = x.clone();
        for _ in 0..k.unsigned_abs() {
            cur = if k > 0 { self.apply(&cur)? } else { self.apply_inv(&cur)? };
        }
        Some(cur)
    }

    pub fn contains_dom(&self, x: &CnPoint) -> bool {
        self.levels
            .get(&x.level)
            .is_some_and(|lv| lv.cols.contains_key(&x.col))
    }

    pub fn contains_rng(&self, y: &CnPoint) -> bool {
        self.apply_inv(y).is_some()
    }

    pub fn len(&self) -> usize {
        self.levels.values().map(|lv| lv.cols.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }

    pub fn pairs(&self) -> Vec<(CnPoint, CnPoint)> {
        let mut out = Vec::with_capacity(self.len());
        for (p, lv) in &self.levels {
            for (&k, &l) in &lv.cols {
                out.push((CnPoint::new(k, p.clone()), CnPoint::new(l, lv.image.clone())));
            }
        }
        out
    }

    pub fn dom_points(&self) -> impl Iterator<Item = CnPoint> + '_ {
        self.levels
            .iter()
            .flat_map(|(p, lv)| lv.cols.keys().map(move |&k| CnPoint::new(k, p.clone())))
    }

    pub fn rng_points(&self) -> impl Iterator<Item = CnPoint> + '_ {
        self.levels.values().flat_map(|lv| {
            lv.cols.values().map(move |&l| CnPoint::new(l, lv.image.clone()))
        })
    }

    /// The increasing level map p -> f(p).
    pub fn level_map(&self) -> impl Iterator<Item = (&Q, &Q)> {
        self.levels.iter().map(|(p, lv)| (p, &lv.image))
    }

    pub fn level_image(&self, p: &Q) -> Option<&Q> {
        self.levels.get(p).map(|lv| &lv.image)
    }

    /// Domain and image levels together.
    pub fn support_levels(&self) -> BTreeSet<Q> {
        self.levels
            .iter()
            .flat_map(|(p, lv)| [p.clone(), lv.image.clone()])
            .collect()
    }

    pub fn is_positive(&self) -> bool {
        self.levels.iter().all(|(p, lv)| lv.image > *p)
    }

    pub fn extends(&self, other: &CnPartialIso) -> bool {
        other
            .pairs()
            .into_iter()
            .all(|(x, y)| self.apply(&x) == Some(y))
    }
}

impl PointMap for CnPartialIso {
    type Point = CnPoint;

    fn fwd(&self, x: &CnPoint) -> Option<CnPoint> {
        self.apply(x)
    }

    fn bwd(&self, y: &CnPoint) -> Option<CnPoint> {
        self.apply_inv(y)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum ColBoundRepr {
    Num(u32),
    Tag(String),
}

#[derive(Serialize, Deserialize)]
struct CnIsoRepr {
    n: ColBoundRepr,
    pairs: Vec<(CnPoint, CnPoint)>,
}

impl Serialize for CnPartialIso {
    fn serialize<S: Serializer>(&self, ser: S) -> Result<S::Ok, S::Error> {
        let n = match self.bound {
            ColBound::Finite(n) => ColBoundRepr::Num(n),
            ColBound::Omega => ColBoundRepr::Tag("omega".into()),
        };
        CnIsoRepr { n, pairs: self.pairs() }.serialize(ser)
    }
}

impl<'de> Deserialize<'de> for CnPartialIso {
    fn deserialize<D: Deserializer<'de>>(de: D) -> Result<CnPartialIso, D::Error> {
        let repr = CnIsoRepr::deserialize(de)?;
        let bound = match repr.n {
            ColBoundRepr::Num(n) => ColBound::Finite(n),
            ColBoundRepr::Tag(s) if s == "omega" => ColBound::Omega,
            ColBoundRepr::Tag(s) => {
                return Err(D::Error::custom(format!("unknown column bound {s:?}")));
            }
        };
        CnPartialIso::from_pairs(bound, repr.pairs).map_err(|e| D::Error::custom(format!("{e}")))
    }
}

/// Builds a map from raw pairs, validating the level decomposition.
pub fn decompose_c(
    pairs: &[(CnPoint, CnPoint)],
    bound: ColBound,
) -> Result<CnPartialIso, CnError> {
    CnPartialIso::from_pairs(bound, pairs.iter().cloned())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    Dom,
    Rng,
}

/// Positive one-point extension. A point at a touched level reuses the level
/// with the least available column; a fresh level gets its image (column 1)
/// from the gap between the neighboring images, above the point itself.
pub fn extend_point_c(
    f: &CnPartialIso,
    x: &CnPoint,
    dir: Direction,
) -> Result<CnPartialIso, CnError> {
    if !f.is_positive() {
        return Err(CnError::NotPositive);
    }
    f.check_col(x.col)?;
    let mut out = f.clone();
    match dir {
        Direction::Dom => {
            if f.contains_dom(x) {
                return Ok(out);
            }
            if let Some(lv) = f.levels.get(&x.level) {
                let col = free_col(f.bound, lv.cols.values().copied());
                let image = lv.image.clone();
                out.insert(x.clone(), CnPoint::new(col, image))?;
            } else {
                let below = f.levels.range(..x.level.clone()).next_back();
                let above = f.levels.range(x.level.clone()..).next();
                let lo = match below {
                    Some((_, lv)) if lv.image > x.level => lv.image.clone(),
                    _ => x.level.clone(),
                };
                let hi = match above {
                    Some((_, lv)) => Bound::Fin(lv.image.clone()),
                    None => Bound::PosInf,
                };
                let q = pick_between(&Bound::Fin(lo), &hi, &BTreeSet::new())?;
                out.insert(x.clone(), CnPoint::new(1, q))?;
            }
        }
        Direction::Rng => {
            if f.contains_rng(x) {
                return Ok(out);
            }
            let host = f.levels.iter().find(|(_, lv)| lv.image == x.level);
            if let Some((p, lv)) = host {
                let col = free_col(f.bound, lv.cols.keys().copied());
                let p = p.clone();
                out.insert(CnPoint::new(col, p), x.clone())?;
            } else {
                let below = f
                    .levels
                    .iter()
                    .filter(|(_, lv)| lv.image < x.level)
                    .next_back();
                let above = f
                    .levels
                    .iter()
                    .find(|(_, lv)| lv.image > x.level);
                let lo = match below {
                    Some((p, _)) => Bound::Fin(p.clone()),
                    None => Bound::NegInf,
                };
                let hi = match above {
                    Some((p, _)) if *p < x.level => p.clone(),
                    _ => x.level.clone(),
                };
                let q = pick_between(&lo, &Bound::Fin(hi), &BTreeSet::new())?;
                out.insert(CnPoint::new(1, q), x.clone())?;
            }
        }
    }
    Ok(out)
}

fn free_col<I: Iterator<Item = u32>>(bound: ColBound, used: I) -> u32 {
    let used: BTreeSet<u32> = used.collect();
    let mut c = 1;
    while used.contains(&c) {
        c += 1;
    }
    debug_assert!(bound.allows(c), "an injective column map always has room");
    c
}

/// Extends `f` so that the k-th image of `x` has level above `m`. Each climb
/// step lands strictly past the next touched level, so the walk crosses the
/// level list once and finishes with one jump clear over `m`.
pub fn push_point_high_c(
    f: &CnPartialIso,
    x: &CnPoint,
    m: &Q,
) -> Result<(CnPartialIso, u64), CnError> {
    if !f.is_positive() {
        return Err(CnError::NotPositive);
    }
    f.check_col(x.col)?;
    let guard = f.levels.len() as u64 + 3;
    let mut f = f.clone();
    let mut cur = x.clone();
    let mut k = 0u64;
    loop {
        if !f.contains_dom(&cur) {
            let top = f.levels.keys().next_back().cloned();
            match top {
                Some(pm) if cur.level <= pm => {
                    if f.levels.contains_key(&cur.level) {
                        f = extend_point_c(&f, &cur, Direction::Dom)?;
                    } else {
                        // land past the next touched level
                        let (pa, above) = f.levels.range(cur.level.clone()..).next().unwrap();
                        let lo = match f.levels.range(..cur.level.clone()).next_back() {
                            Some((_, lv)) if lv.image > *pa => lv.image.clone(),
                            _ => pa.clone(),
                        };
                        let q = pick_between(
                            &Bound::Fin(lo),
                            &Bound::Fin(above.image.clone()),
                            &BTreeSet::new(),
                        )?;
                        f.insert(cur.clone(), CnPoint::new(1, q))?;
                    }
                }
                _ => {
                    // already above every touched level: jump clear over m
                    let mut q = if cur.level > *m { cur.level.clone() } else { m.clone() };
                    if let Some(pm) = &top {
                        let img = f.level_image(pm).unwrap();
                        if *img > q {
                            q = img.clone();
                        }
                    }
                    f.insert(cur.clone(), CnPoint::new(1, q.plus_int(1)))?;
                }
            }
        }
        cur = f.apply(&cur).unwrap();
        k += 1;
        if cur.level > *m {
            return Ok((f, k));
        }
        assert!(k <= guard, "the climb ascends the level list");
    }
}

/// One shared exponent pushing all of `c` above `m`, orbits padded so the
/// k-th image exists everywhere.
pub fn push_set_high_c(
    f: &CnPartialIso,
    c: &BTreeSet<CnPoint>,
    m: &Q,
) -> Result<(CnPartialIso, u64), CnError> {
    let mut f = f.clone();
    let mut k = 1u64;
    for x in c {
        let (nf, ki) = push_point_high_c(&f, x, m)?;
        f = nf;
        k = k.max(ki);
    }
    for x in c {
        let mut cur = x.clone();
        for _ in 0..k {
            if !f.contains_dom(&cur) {
                f = extend_point_c(&f, &cur, Direction::Dom)?;
            }
            cur = f.apply(&cur).unwrap();
        }
        debug_assert!(cur.level > *m);
    }
    Ok((f, k))
}

/// Union of a map living entirely below level `m` with one living entirely
/// above it. Cross pairs then always relate and stay related.
pub fn union_levels_separated(
    h0: &CnPartialIso,
    h1: &CnPartialIso,
    m: &Q,
) -> Result<CnPartialIso, CnError> {
    if h0.bound != h1.bound {
        return Err(CnError::BoundMismatch);
    }
    if h0.support_levels().iter().any(|p| p >= m)
        || h1.support_levels().iter().any(|p| p <= m)
    {
        return Err(CnError::SeparationViolated(m.clone()));
    }
    let mut out = h0.clone();
    for (x, y) in h1.pairs() {
        out.insert(x, y)?;
    }
    Ok(out)
}

#[derive(Clone, Debug)]
pub struct KeyLemmaCn {
    pub f_out: CnPartialIso,
    pub g_out: CnPartialIso,
    pub k: u64,
    pub y: CnPoint,
}

/// Extends positive `f` and arbitrary `g` so that `w` moves a witness in
/// column 1 and one iterate of `f_out` lifts `x_set` above every level the
/// inputs mention, making unions across the two sides valid.
pub fn key_lemma_cn(
    f: &CnPartialIso,
    g: &CnPartialIso,
    x_set: &BTreeSet<CnPoint>,
    w: &Word,
) -> Result<KeyLemmaCn, CnError> {
    if f.bound != g.bound {
        return Err(CnError::BoundMismatch);
    }
    if !f.is_positive() {
        return Err(CnError::NotPositive);
    }
    for x in x_set {
        f.check_col(x.col)?;
    }
    let mut m = Q::zero();
    for lvl in f
        .support_levels()
        .into_iter()
        .chain(g.support_levels())
        .chain(x_set.iter().map(|x| x.level.clone()))
    {
        if lvl > m {
            m = lvl;
        }
    }
    let m = m.plus_int(1);
    let kq = kill_word_q(w, &m)?;
    let s_block = CnPartialIso::from_pairs(
        f.bound,
        kq.s.iter().map(|(p, q)| (CnPoint::new(1, p.clone()), CnPoint::new(1, q.clone()))),
    )?;
    let r_block = CnPartialIso::from_pairs(
        f.bound,
        kq.r.iter().map(|(p, q)| (CnPoint::new(1, p.clone()), CnPoint::new(1, q.clone()))),
    )?;
    let f1 = union_levels_separated(f, &s_block, &m)?;
    let g_out = union_levels_separated(g, &r_block, &m)?;
    let (f_out, k) = push_set_high_c(&f1, x_set, &m)?;
    let y = CnPoint::new(1, kq.p.clone());
    debug_assert!(f_out.is_positive());
    debug_assert_ne!(evaluate(w, &f_out, &g_out, y.clone()), Some(y.clone()));
    Ok(KeyLemmaCn { f_out, g_out, k, y })
}
