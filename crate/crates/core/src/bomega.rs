//! The infinite antichain of chains: rows indexed by all positive integers.
//! A finite partial isomorphism only determines a partial injection on rows,
//! so no total permutation is carried; instead the row map is derived from
//! the pairs. The distinguished class here consists of maps whose row
//! injection has no finite cycles, so every row chain eventually escapes its
//! own domain. That freedom replaces positivity: points are moved away by
//! escaping to fresh rows rather than climbing within one.

use std::collections::{BTreeMap, BTreeSet};

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::bn::BnPoint;
use crate::order::{pick_between, Bound, OrderError, Q};
use crate::qchain::{QChainError, QPartialIso};
use crate::words::{evaluate, word_lemma, PointMap, Word, WordError};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum BOmegaError {
    #[error(transparent)]
    Order(#[from] OrderError),
    #[error(transparent)]
    Chain(#[from] QChainError),
    #[error(transparent)]
    Word(#[from] WordError),
    #[error("rows are positive integers")]
    RowZero,
    #[error("row {row} maps to both {first} and {second}")]
    RowConflict { row: u32, first: u32, second: u32 },
    #[error("rows {first} and {second} both map to row {to}")]
    RowCollision { first: u32, second: u32, to: u32 },
    #[error("maps mention a common row")]
    RowOverlap,
    #[error("row map has a finite cycle")]
    NotInX0,
}

/// Finite partial isomorphism of the infinite antichain of chains. The row
/// injection `tau` is derived from the pairs and kept in sync.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct BOmegaPartialIso {
    rows: BTreeMap<u32, QPartialIso>,
    tau: BTreeMap<u32, u32>,
}

impl BOmegaPartialIso {
    pub fn new() -> BOmegaPartialIso {
        BOmegaPartialIso::default()
    }

    pub fn from_pairs<I>(pairs: I) -> Result<BOmegaPartialIso, BOmegaError>
    where
        I: IntoIterator<Item = (BnPoint, BnPoint)>,
    {
        let mut out = BOmegaPartialIso::new();
        for (x, y) in pairs {
            out.insert(x, y)?;
        }
        Ok(out)
    }

    pub fn insert(&mut self, x: BnPoint, y: BnPoint) -> Result<(), BOmegaError> {
        if x.row == 0 || y.row == 0 {
            return Err(BOmegaError::RowZero);
        }
        match self.tau.get(&x.row) {
            Some(&l) if l != y.row => {
                return Err(BOmegaError::RowConflict { row: x.row, first: l, second: y.row });
            }
            Some(_) => {}
            None => {
                if let Some((&other, _)) = self.tau.iter().find(|(_, &v)| v == y.row) {
                    return Err(BOmegaError::RowCollision { first: other, second: x.row, to: y.row });
                }
                self.tau.insert(x.row, y.row);
            }
        }
        if let Err(e) = self.rows.entry(x.row).or_default().insert(x.value, y.value) {
            // roll back a row entry added for a failed first pair
            if self.rows.get(&x.row).is_some_and(|rm| rm.is_empty()) {
                self.rows.remove(&x.row);
                self.tau.remove(&x.row);
            }
            return Err(e.into());
        }
        Ok(())
    }

    pub fn tau(&self) -> &BTreeMap<u32, u32> {
        &self.tau
    }

    pub fn row_map(&self, k: u32) -> Option<&QPartialIso> {
        self.rows.get(&k)
    }

    pub fn apply(&self, x: &BnPoint) -> Option<BnPoint> {
        let v = self.rows.get(&x.row)?.apply(&x.value)?;
        Some(BnPoint::new(self.tau[&x.row], v.clone()))
    }

    pub fn apply_inv(&self, y: &BnPoint) -> Option<BnPoint> {
        let (&k, _) = self.tau.iter().find(|(_, &v)| v == y.row)?;
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
        self.apply_inv(y).is_some()
    }

    pub fn len(&self) -> usize {
        self.rows.values().map(|rm| rm.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn pairs(&self) -> Vec<(BnPoint, BnPoint)> {
        let mut out = Vec::with_capacity(self.len());
        for (&k, rm) in &self.rows {
            let l = self.tau[&k];
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
            let l = self.tau[&k];
            rm.rng().map(move |v| BnPoint::new(l, v.clone()))
        })
    }

    /// Every row appearing in the domain or range.
    pub fn rows_mentioned(&self) -> BTreeSet<u32> {
        self.tau.iter().flat_map(|(&k, &v)| [k, v]).collect()
    }

    pub fn max_row_mentioned(&self) -> u32 {
        self.rows_mentioned().into_iter().next_back().unwrap_or(0)
    }

    pub fn extends(&self, other: &BOmegaPartialIso) -> bool {
        other
            .pairs()
            .into_iter()
            .all(|(x, y)| self.apply(&x) == Some(y))
    }
}

impl PointMap for BOmegaPartialIso {
    type Point = BnPoint;

    fn fwd(&self, x: &BnPoint) -> Option<BnPoint> {
        self.apply(x)
    }

    fn bwd(&self, y: &BnPoint) -> Option<BnPoint> {
        self.apply_inv(y)
    }
}

impl Serialize for BOmegaPartialIso {
    fn serialize<S: Serializer>(&self, ser: S) -> Result<S::Ok, S::Error> {
        self.pairs().serialize(ser)
    }
}

impl<'de> Deserialize<'de> for BOmegaPartialIso {
    fn deserialize<D: Deserializer<'de>>(de: D) -> Result<BOmegaPartialIso, D::Error> {
        let pairs = Vec::<(BnPoint, BnPoint)>::deserialize(de)?;
        BOmegaPartialIso::from_pairs(pairs).map_err(|e| D::Error::custom(format!("{e}")))
    }
}

/// True when every row chain escapes: no finite cycles in the row map.
pub fn in_x0(f: &BOmegaPartialIso) -> bool {
    for &start in f.tau.keys() {
        let mut cur = start;
        let mut steps = 0usize;
        while let Some(&next) = f.tau.get(&cur) {
            cur = next;
            steps += 1;
            if steps > f.tau.len() {
                return false;
            }
        }
    }
    true
}

/// One forward step of `cur`, extending `f` when needed: inside a mapped row
/// the value goes through the free gap; an unmapped row jumps to value 0 of a
/// fresh row above everything mentioned, `floor` included.
fn advance(f: &mut BOmegaPartialIso, cur: &BnPoint, floor: u32) -> Result<BnPoint, BOmegaError> {
    if !f.contains_dom(cur) {
        match f.tau.get(&cur.row).copied() {
            Some(to) => {
                let rm = f.rows.get(&cur.row).unwrap();
                let lo = rm
                    .dom()
                    .filter(|v| **v < cur.value)
                    .max()
                    .map(|a| Bound::Fin(rm.apply(a).unwrap().clone()))
                    .unwrap_or(Bound::NegInf);
                let hi = rm
                    .dom()
                    .filter(|v| **v > cur.value)
                    .min()
                    .map(|b| Bound::Fin(rm.apply(b).unwrap().clone()))
                    .unwrap_or(Bound::PosInf);
                let exclude = rm.rng().cloned().collect();
                let y = pick_between(&lo, &hi, &exclude)?;
                f.insert(cur.clone(), BnPoint::new(to, y))?;
            }
            None => {
                let m = f.max_row_mentioned().max(cur.row).max(floor) + 1;
                f.insert(cur.clone(), BnPoint::new(m, Q::zero()))?;
            }
        }
    }
    Ok(f.apply(cur).unwrap())
}

/// Extends `f` so that the k-th image of `x` exists and sits in a row outside
/// the input's row-map domain. When the starting row is already unmapped,
/// k = 1 through a fresh row at value 0.
pub fn escape_extend(
    f: &BOmegaPartialIso,
    x: &BnPoint,
) -> Result<(BOmegaPartialIso, u64), BOmegaError> {
    if x.row == 0 {
        return Err(BOmegaError::RowZero);
    }
    if !in_x0(f) {
        return Err(BOmegaError::NotInX0);
    }
    let guard = f.tau.len() as u64 + 2;
    let mut f = f.clone();
    let mut cur = x.clone();
    let mut k = 0u64;
    loop {
        let escapes = !f.tau.contains_key(&cur.row);
        cur = advance(&mut f, &cur, x.row)?;
        k += 1;
        assert!(k <= guard, "row chains are cycle free");
        if escapes {
            debug_assert!(in_x0(&f));
            return Ok((f, k));
        }
    }
}

/// Extends `f` so that one common iterate moves every point of `a` into rows
/// disjoint from the rows of `a`.
pub fn push_rows_away(
    f: &BOmegaPartialIso,
    a: &BTreeSet<BnPoint>,
) -> Result<(BOmegaPartialIso, u64), BOmegaError> {
    if !in_x0(f) {
        return Err(BOmegaError::NotInX0);
    }
    if a.iter().any(|p| p.row == 0) {
        return Err(BOmegaError::RowZero);
    }
    let mut f = f.clone();
    if a.is_empty() {
        return Ok((f, 1));
    }
    let max_row = a.iter().map(|p| p.row).max().unwrap();
    let mut k = 0u64;
    for x in a {
        let guard = f.tau.len() as u64 + 2;
        let mut cur = x.clone();
        let mut steps = 0u64;
        while steps == 0 || cur.row <= max_row || f.tau.contains_key(&cur.row) {
            cur = advance(&mut f, &cur, max_row)?;
            steps += 1;
            assert!(steps <= guard, "row chains are cycle free");
        }
        k = k.max(steps);
    }
    for x in a {
        let mut cur = x.clone();
        for _ in 0..k {
            cur = advance(&mut f, &cur, max_row)?;
        }
        debug_assert!(cur.row > max_row);
    }
    debug_assert!(in_x0(&f));
    Ok((f, k))
}

/// Union of two maps mentioning disjoint row sets. Any cross pair is
/// incomparable on both sides, so the union stays an isomorphism.
pub fn union_rows_disjoint(
    h0: &BOmegaPartialIso,
    h1: &BOmegaPartialIso,
) -> Result<BOmegaPartialIso, BOmegaError> {
    if !h0.rows_mentioned().is_disjoint(&h1.rows_mentioned()) {
        return Err(BOmegaError::RowOverlap);
    }
    let mut out = h0.clone();
    for (x, y) in h1.pairs() {
        out.insert(x, y)?;
    }
    Ok(out)
}

#[derive(Clone, Debug)]
pub struct KeyLemmaBOmega {
    pub f_out: BOmegaPartialIso,
    pub g_out: BOmegaPartialIso,
    pub k: u64,
    pub y: BnPoint,
}

/// Extends `f` (no finite row cycles) and `g` so that `w` moves a witness
/// point and one iterate of `f_out` carries `x_set` into rows disjoint from
/// its own, making unions over the two sides always valid.
///
/// The witness block realizes the free-group embedding of `w` on rows
/// N+1..N+M+1 at value 0, where N clears every row of `f`, `g` and `x_set`.
pub fn key_lemma_bomega(
    f: &BOmegaPartialIso,
    g: &BOmegaPartialIso,
    x_set: &BTreeSet<BnPoint>,
    w: &Word,
) -> Result<KeyLemmaBOmega, BOmegaError> {
    if !in_x0(f) {
        return Err(BOmegaError::NotInX0);
    }
    let wl = word_lemma(w)?;
    let n_shift = f
        .max_row_mentioned()
        .max(g.max_row_mentioned())
        .max(a_rows_max(x_set)) as u64;
    let mut f1 = f.clone();
    for (l, ul) in wl.u.iter() {
        f1.insert(
            BnPoint::new((l + n_shift) as u32, Q::zero()),
            BnPoint::new((ul + n_shift) as u32, Q::zero()),
        )?;
    }
    let mut g1 = g.clone();
    for (l, vl) in wl.v.iter() {
        g1.insert(
            BnPoint::new((l + n_shift) as u32, Q::zero()),
            BnPoint::new((vl + n_shift) as u32, Q::zero()),
        )?;
    }
    debug_assert!(in_x0(&f1));
    let (f_out, k) = push_rows_away(&f1, x_set)?;
    let y = BnPoint::new((n_shift + 1) as u32, Q::zero());
    debug_assert_eq!(
        evaluate(w, &f_out, &g1, y.clone()),
        Some(BnPoint::new((n_shift + wl.total + 1) as u32, Q::zero()))
    );
    Ok(KeyLemmaBOmega { f_out, g_out: g1, k, y })
}

fn a_rows_max(a: &BTreeSet<BnPoint>) -> u32 {
    a.iter().map(|p| p.row).max().unwrap_or(0)
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

    fn iso(pairs: &[((u32, i64), (u32, i64))]) -> BOmegaPartialIso {
        BOmegaPartialIso::from_pairs(
            pairs.iter().map(|&((k, p), (l, v))| (pt(k, p), pt(l, v))),
        )
        .unwrap()
    }

    #[test]
    fn x0_membership() {
        assert!(in_x0(&iso(&[((1, 0), (2, 0))])));
        assert!(!in_x0(&iso(&[((1, 0), (2, 0)), ((2, 0), (1, 0))])));
        assert!(!in_x0(&iso(&[((1, 0), (1, 1))])));
        assert!(in_x0(&BOmegaPartialIso::new()));
        assert!(in_x0(&iso(&[((1, 0), (2, 0)), ((2, 0), (3, 0)), ((5, 0), (6, 0))])));
    }

    #[test]
    fn insert_keeps_rows_consistent() {
        let mut f = iso(&[((1, 0), (2, 0))]);
        assert_eq!(
            f.insert(pt(1, 5), pt(3, 1)),
            Err(BOmegaError::RowConflict { row: 1, first: 2, second: 3 })
        );
        assert_eq!(
            f.insert(pt(4, 0), pt(2, 1)),
            Err(BOmegaError::RowCollision { first: 1, second: 4, to: 2 })
        );
        f.insert(pt(1, 5), pt(2, 9)).unwrap();
        assert_eq!(f.apply(&pt(1, 5)), Some(pt(2, 9)));
        // value order violation inside a row, map left unchanged
        assert!(f.insert(pt(1, 3), pt(2, 0)).is_err());
        assert_eq!(f.len(), 2);
    }

    #[test]
    fn escape_extend_fresh_row() {
        let (f, k) = escape_extend(&BOmegaPartialIso::new(), &pt(1, 5)).unwrap();
        assert_eq!(k, 1);
        assert_eq!(f.apply(&pt(1, 5)), Some(pt(2, 0)));
        assert!(in_x0(&f));
    }

    #[test]
    fn escape_extend_walks_the_chain() {
        let f = iso(&[((1, 0), (2, 0)), ((2, 0), (3, 0))]);
        let (ff, k) = escape_extend(&f, &pt(1, 0)).unwrap();
        assert_eq!(k, 3);
        let end = ff.apply_pow(&pt(1, 0), 3).unwrap();
        assert!(!f.tau().contains_key(&end.row));
        assert!(ff.extends(&f) && in_x0(&ff));
    }

    #[test]
    fn escape_extend_fills_row_gaps() {
        let f = iso(&[((1, 0), (2, 0))]);
        let (ff, k) = escape_extend(&f, &pt(1, 5)).unwrap();
        assert_eq!(k, 2);
        let mid = ff.apply(&pt(1, 5)).unwrap();
        assert_eq!(mid.row, 2);
        assert!(mid.value > q(0)); // slots above the image of (1,0)
        assert_eq!(ff.apply(&mid).unwrap(), pt(3, 0));
    }

    #[test]
    fn push_rows_away_examples() {
        let (f, k) = push_rows_away(&BOmegaPartialIso::new(), &[pt(1, 0)].into()).unwrap();
        assert_eq!(k, 1);
        assert_eq!(f.apply(&pt(1, 0)), Some(pt(2, 0)));

        let a: BTreeSet<BnPoint> = [pt(1, 0), pt(2, 7)].into();
        let (f, k) = push_rows_away(&BOmegaPartialIso::new(), &a).unwrap();
        for x in &a {
            let img = f.apply_pow(x, k as i64).unwrap();
            assert!(img.row > 2);
        }

        // an existing chain that already separates is reused untouched
        let f = iso(&[((1, 0), (5, 0))]);
        let (ff, k) = push_rows_away(&f, &[pt(1, 0)].into()).unwrap();
        assert_eq!(k, 1);
        assert_eq!(ff, f);
    }

    #[test]
    fn push_rows_away_common_exponent() {
        let f = iso(&[((1, 0), (2, 0)), ((2, 0), (3, 0)), ((3, 0), (4, 0))]);
        let a: BTreeSet<BnPoint> = [pt(1, 0), pt(3, 0)].into();
        let (ff, k) = push_rows_away(&f, &a).unwrap();
        let rows_a: BTreeSet<u32> = a.iter().map(|p| p.row).collect();
        for x in &a {
            let img = ff.apply_pow(x, k as i64).unwrap();
            assert!(!rows_a.contains(&img.row));
        }
        assert!(in_x0(&ff) && ff.extends(&f));
    }

    #[test]
    fn union_checks_row_disjointness() {
        let h0 = iso(&[((1, 0), (2, 5))]);
        let h1 = iso(&[((3, 0), (4, 1))]);
        let u = union_rows_disjoint(&h0, &h1).unwrap();
        assert_eq!(u.len(), 2);
        let h2 = iso(&[((2, 0), (5, 0))]); // row 2 is h0's range row
        assert_eq!(union_rows_disjoint(&h0, &h2), Err(BOmegaError::RowOverlap));
    }

    fn check_key_lemma_clauses(
        f: &BOmegaPartialIso,
        g: &BOmegaPartialIso,
        x_set: &BTreeSet<BnPoint>,
        w: &Word,
    ) -> KeyLemmaBOmega {
        let out = key_lemma_bomega(f, g, x_set, w).unwrap();
        assert!(out.f_out.extends(f) && out.g_out.extends(g));
        assert!(in_x0(&out.f_out));
        let rows_x: BTreeSet<u32> = x_set.iter().map(|p| p.row).collect();
        for x in x_set {
            let img = out.f_out.apply_pow(x, out.k as i64).unwrap();
            assert!(!rows_x.contains(&img.row));
        }
        let moved = evaluate(w, &out.f_out, &out.g_out, out.y.clone()).unwrap();
        assert_ne!(moved, out.y);
        out
    }

    #[test]
    fn key_lemma_basic() {
        let out = check_key_lemma_clauses(
            &BOmegaPartialIso::new(),
            &BOmegaPartialIso::new(),
            &[pt(1, 0)].into(),
            &"a".parse().unwrap(),
        );
        assert_eq!(out.y, pt(2, 0));
        assert_eq!(
            evaluate(&"a".parse::<Word>().unwrap(), &out.f_out, &out.g_out, pt(2, 0)),
            Some(pt(3, 0))
        );
        assert_eq!(out.k, 1);
    }

    #[test]
    fn key_lemma_mixed_word_and_seeds() {
        let f = iso(&[((1, 0), (2, 0)), ((2, 0), (3, 0))]);
        let g = iso(&[((1, 0), (4, 0)), ((5, 2), (6, 3))]);
        let x_set: BTreeSet<BnPoint> = [pt(1, 0), pt(4, 2), pt(7, 0)].into();
        let w: Word = "a b^-1 a^2".parse().unwrap();
        let out = check_key_lemma_clauses(&f, &g, &x_set, &w);
        // unions across the two sides always work
        let h1 = BOmegaPartialIso::from_pairs(x_set.iter().map(|p| (p.clone(), p.clone())))
            .unwrap();
        let image: Vec<BnPoint> = x_set
            .iter()
            .map(|p| out.f_out.apply_pow(p, out.k as i64).unwrap())
            .collect();
        let h2 = BOmegaPartialIso::from_pairs(image.iter().map(|p| (p.clone(), p.clone())))
            .unwrap();
        union_rows_disjoint(&h1, &h2).unwrap();
    }

    #[test]
    fn key_lemma_rejects_cyclic_f() {
        let f = iso(&[((1, 0), (1, 1))]);
        assert!(matches!(
            key_lemma_bomega(&f, &BOmegaPartialIso::new(), &BTreeSet::new(), &"a".parse().unwrap()),
            Err(BOmegaError::NotInX0)
        ));
        assert!(matches!(
            key_lemma_bomega(
                &BOmegaPartialIso::new(),
                &BOmegaPartialIso::new(),
                &BTreeSet::new(),
                &Word::empty()
            ),
            Err(BOmegaError::Word(WordError::Empty))
        ));
    }

    #[test]
    fn serde_round_trip() {
        let f = iso(&[((1, 0), (2, 5)), ((2, 1), (4, 0))]);
        let json = serde_json::to_string(&f).unwrap();
        let back: BOmegaPartialIso = serde_json::from_str(&json).unwrap();
        assert_eq!(back, f);
        let bad = r#"[[[1,"0"],[2,"0"]],[[1,"1"],[3,"0"]]]"#;
        assert!(serde_json::from_str::<BOmegaPartialIso>(bad).is_err());
    }
}
