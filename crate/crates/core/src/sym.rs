//! Brute-force ground truth on finite symmetric groups.
//!
//! Everything here is desk scale: degrees are capped where noted and the
//! searches are exhaustive, so results double as oracles for the structural
//! modules.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;

use num::integer::lcm;
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::words::{Letter, PointMap, Syllable, Word};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SymError {
    #[error("degree {n} exceeds cap {cap}")]
    CapExceeded { n: usize, cap: usize },
    #[error("images are not a bijection: {0:?}")]
    NotBijection(Vec<u32>),
    #[error("malformed cycle notation {0:?}")]
    BadCycles(String),
    #[error("pair does not generate the symmetric group")]
    NotGenerating,
}

/// Permutation of `{0, ..., n-1}` by its image sequence. Cycle notation and
/// JSON both use 1-based points.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Perm(Vec<u32>);

impl Perm {
    pub fn identity(n: usize) -> Perm {
        Perm((0..n as u32).collect())
    }

    pub fn from_images(images: Vec<u32>) -> Result<Perm, SymError> {
        let n = images.len();
        let mut seen = vec![false; n];
        for &y in &images {
            if (y as usize) >= n || seen[y as usize] {
                return Err(SymError::NotBijection(images));
            }
            seen[y as usize] = true;
        }
        Ok(Perm(images))
    }

    /// Parses cycle notation like `(1 2 3)(4 5)`; `()` is the identity.
    pub fn from_cycles(s: &str, n: usize) -> Result<Perm, SymError> {
        let bad = || SymError::BadCycles(s.to_string());
        let mut images: Vec<u32> = (0..n as u32).collect();
        let mut moved = vec![false; n];
        let body = s.trim();
        let mut rest = body;
        while !rest.is_empty() {
            let open = rest.strip_prefix('(').ok_or_else(bad)?;
            let close = open.find(')').ok_or_else(bad)?;
            let inner = &open[..close];
            rest = open[close + 1..].trim_start();
            let pts: Vec<usize> = inner
                .split_whitespace()
                .map(|t| t.parse::<usize>().map_err(|_| bad()))
                .collect::<Result<_, _>>()?;
            if pts.is_empty() {
                continue;
            }
            for &p in &pts {
                if p == 0 || p > n || moved[p - 1] {
                    return Err(bad());
                }
                moved[p - 1] = true;
            }
            for i in 0..pts.len() {
                images[pts[i] - 1] = (pts[(i + 1) % pts.len()] - 1) as u32;
            }
        }
        Ok(Perm(images))
    }

    pub fn n(&self) -> usize {
        self.0.len()
    }

    pub fn images(&self) -> &[u32] {
        &self.0
    }

    pub fn apply(&self, x: u32) -> u32 {
        self.0[x as usize]
    }

    pub fn apply_inv(&self, y: u32) -> u32 {
        self.0.iter().position(|&v| v == y).expect("bijection") as u32
    }

    /// `self` after `other`: the right factor acts first.
    pub fn compose(&self, other: &Perm) -> Perm {
        debug_assert_eq!(self.n(), other.n());
        Perm(other.0.iter().map(|&x| self.0[x as usize]).collect())
    }

    pub fn inverse(&self) -> Perm {
        let mut images = vec![0u32; self.n()];
        for (x, &y) in self.0.iter().enumerate() {
            images[y as usize] = x as u32;
        }
        Perm(images)
    }

    pub fn is_identity(&self) -> bool {
        self.0.iter().enumerate().all(|(x, &y)| x as u32 == y)
    }

    pub fn pow(&self, k: i64) -> Perm {
        let base = if k >= 0 { self.clone() } else { self.inverse() };
        let mut out = Perm::identity(self.n());
        for _ in 0..k.unsigned_abs() {
            out = base.compose(&out);
        }
        out
    }

    /// Cycle lengths in decreasing order, fixed points included.
    pub fn cycle_type(&self) -> Vec<usize> {
        let mut seen = vec![false; self.n()];
        let mut out = Vec::new();
        for start in 0..self.n() {
            if seen[start] {
                continue;
            }
            let mut len = 0;
            let mut cur = start;
            while !seen[cur] {
                seen[cur] = true;
                len += 1;
                cur = self.0[cur] as usize;
            }
            out.push(len);
        }
        out.sort_unstable_by(|a, b| b.cmp(a));
        out
    }

    pub fn order(&self) -> u64 {
        self.cycle_type().iter().fold(1u64, |acc, &l| lcm(acc, l as u64))
    }

    /// Cycle notation, fixed points omitted, cycles sorted by least point.
    pub fn to_cycles(&self) -> String {
        let mut seen = vec![false; self.n()];
        let mut out = String::new();
        for start in 0..self.n() {
            if seen[start] || self.0[start] as usize == start {
                seen[start] = true;
                continue;
            }
            out.push('(');
            let mut cur = start;
            let mut first = true;
            while !seen[cur] {
                seen[cur] = true;
                if !first {
                    out.push(' ');
                }
                first = false;
                out.push_str(&(cur + 1).to_string());
                cur = self.0[cur] as usize;
            }
            out.push(')');
        }
        if out.is_empty() {
            out.push_str("()");
        }
        out
    }
}

impl fmt::Display for Perm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_cycles())
    }
}

impl PointMap for Perm {
    type Point = u32;

    fn fwd(&self, x: &u32) -> Option<u32> {
        Some(self.apply(*x))
    }

    fn bwd(&self, y: &u32) -> Option<u32> {
        Some(self.apply_inv(*y))
    }
}

impl Serialize for Perm {
    fn serialize<S: Serializer>(&self, ser: S) -> Result<S::Ok, S::Error> {
        // 1-based images, matching cycle notation.
        let one_based: Vec<u32> = self.0.iter().map(|&y| y + 1).collect();
        one_based.serialize(ser)
    }
}

impl<'de> Deserialize<'de> for Perm {
    fn deserialize<D: Deserializer<'de>>(de: D) -> Result<Perm, D::Error> {
        let one_based = Vec::<u32>::deserialize(de)?;
        if one_based.iter().any(|&y| y == 0) {
            return Err(D::Error::custom("permutation images are 1-based"));
        }
        Perm::from_images(one_based.into_iter().map(|y| y - 1).collect())
            .map_err(|e| D::Error::custom(format!("{e}")))
    }
}

/// All of Sₙ in lexicographic image order.
pub fn all_perms(n: usize) -> Vec<Perm> {
    fn go(out: &mut Vec<Perm>, prefix: &mut Vec<u32>, free: &mut BTreeSet<u32>) {
        if free.is_empty() {
            out.push(Perm(prefix.clone()));
            return;
        }
        for y in free.iter().copied().collect::<Vec<_>>() {
            free.remove(&y);
            prefix.push(y);
            go(out, prefix, free);
            prefix.pop();
            free.insert(y);
        }
    }
    let mut out = Vec::new();
    go(&mut out, &mut Vec::new(), &mut (0..n as u32).collect());
    out
}

fn factorial(n: usize) -> usize {
    (1..=n).product()
}

/// Closure of `perms` under composition equals all of Sₙ.
pub fn generates(perms: &[Perm], n: usize) -> bool {
    if perms.iter().any(|p| p.n() != n) {
        return false;
    }
    let mut closure: BTreeSet<Perm> = [Perm::identity(n)].into();
    let mut queue: Vec<Perm> = closure.iter().cloned().collect();
    while let Some(p) = queue.pop() {
        for g in perms {
            let q = g.compose(&p);
            if closure.insert(q.clone()) {
                queue.push(q);
            }
        }
    }
    closure.len() == factorial(n)
}

/// Lexicographically least ordered pair generating Sₙ (images compared as
/// sequences). For n = 1 this is (id, id).
pub fn find_generator_pair(n: usize) -> (Perm, Perm) {
    let perms = all_perms(n);
    for p in &perms {
        for q in &perms {
            if generates(&[p.clone(), q.clone()], n) {
                return (p.clone(), q.clone());
            }
        }
    }
    unreachable!("transposition plus full cycle always generates")
}

/// Shortest word with `w(eta, xi) = target`, breadth-first over the Cayley
/// graph; under `positive_terms_only` only the plain letters `a`, `b` are
/// used, which still reaches everything the pair generates. Identity gives
/// the empty word.
pub fn word_for_permutation(
    target: &Perm,
    eta: &Perm,
    xi: &Perm,
    positive_terms_only: bool,
) -> Result<Word, SymError> {
    let n = eta.n();
    let steps: Vec<(Perm, Syllable)> = {
        let mut v = vec![
            (eta.clone(), Syllable { letter: Letter::A, exp: 1 }),
            (xi.clone(), Syllable { letter: Letter::B, exp: 1 }),
        ];
        if !positive_terms_only {
            v.push((eta.inverse(), Syllable { letter: Letter::A, exp: -1 }));
            v.push((xi.inverse(), Syllable { letter: Letter::B, exp: -1 }));
        }
        v
    };
    // parent pointer and the leftmost letter of the shortest word reaching it
    let mut seen: BTreeMap<Perm, Option<(Perm, Syllable)>> = BTreeMap::new();
    seen.insert(Perm::identity(n), None);
    let mut queue = VecDeque::from([Perm::identity(n)]);
    while let Some(p) = queue.pop_front() {
        if &p == target {
            let mut letters = Vec::new();
            let mut cur = &p;
            while let Some((parent, syll)) = &seen[cur] {
                letters.push(*syll);
                cur = parent;
            }
            return Ok(Word::from_syllables(letters));
        }
        for (g, syll) in &steps {
            let q = g.compose(&p);
            seen.entry(q.clone()).or_insert_with(|| {
                queue.push_back(q.clone());
                Some((p.clone(), *syll))
            });
        }
    }
    Err(SymError::NotGenerating)
}

/// Landau's number: the largest lcm over integer partitions of n, which is
/// the maximum element order in Sₙ.
pub fn landau(n: usize) -> u64 {
    fn go(rest: usize, max_part: usize, acc: u64) -> u64 {
        let mut best = acc;
        for part in 1..=rest.min(max_part) {
            best = best.max(go(rest - part, part, lcm(acc, part as u64)));
        }
        best
    }
    go(n, n, 1)
}

/// True when no set `{sigma^k rho sigma^-k : k}` is all of Sₙ; checked
/// exhaustively over ordered pairs.
pub fn no_conjugate_closure(n: usize) -> bool {
    let perms = all_perms(n);
    let full = factorial(n);
    for sigma in &perms {
        for rho in &perms {
            let mut orbit: BTreeSet<Perm> = BTreeSet::new();
            let mut cur = rho.clone();
            let sigma_inv = sigma.inverse();
            for _ in 0..sigma.order() {
                orbit.insert(cur.clone());
                cur = sigma.compose(&cur).compose(&sigma_inv);
            }
            if orbit.len() == full {
                return false;
            }
        }
    }
    true
}

pub const COMPLEXITY_CAP: usize = 5;

/// The alternating-product complexity of Sₙ under both exponent conventions.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct Complexity {
    /// Exponents range over all of ℤ, so blocks may collapse.
    pub with_zero_exponents: u64,
    /// Exponents range over nonzero integers only.
    pub nonzero_exponents: u64,
}

/// Smallest k such that some generating pair (a, b) gives
/// Sₙ = {a^{n_1} b^{m_1} ... a^{n_k} b^{m_k}}.
///
/// Integer exponents act through their residues mod the element order, and
/// a^ord realizes the zero residue with a nonzero integer, so the two
/// conventions define the same product sets; both are computed from their own
/// exponent ranges and reported.
pub fn complexity_cn(n: usize) -> Result<Complexity, SymError> {
    if n > COMPLEXITY_CAP {
        return Err(SymError::CapExceeded { n, cap: COMPLEXITY_CAP });
    }
    if n == 1 {
        // Trivial group: the empty product already covers it.
        return Ok(Complexity { with_zero_exponents: 0, nonzero_exponents: 0 });
    }
    let perms = all_perms(n);
    let full = perms.len();
    assert!(full <= 128, "subset bitmasks are u128");
    let index: BTreeMap<&Perm, usize> = perms.iter().zip(0..).collect();
    let mut table = vec![vec![0u16; full]; full];
    for (i, p) in perms.iter().enumerate() {
        for (j, q) in perms.iter().enumerate() {
            table[i][j] = index[&p.compose(q)] as u16;
        }
    }
    let full_mask: u128 = if full == 128 { u128::MAX } else { (1u128 << full) - 1 };

    let block_set = |a: usize, b: usize, zero_exp: bool| -> Vec<u16> {
        let orda = perms[a].order() as i64;
        let ordb = perms[b].order() as i64;
        let (loa, lob) = if zero_exp { (0, 0) } else { (1, 1) };
        let mut out = BTreeSet::new();
        for i in loa..=orda {
            for j in lob..=ordb {
                let ai = index[&perms[a].pow(i)];
                let bj = index[&perms[b].pow(j)];
                out.insert(table[ai][bj]);
            }
        }
        out.into_iter().collect()
    };

    let mut best = [u64::MAX; 2];
    for a in 0..full {
        for b in 0..full {
            for (slot, zero_exp) in [(0usize, true), (1, false)] {
                let blocks = block_set(a, b, zero_exp);
                let mut cur: u128 = blocks.iter().fold(0, |m, &x| m | (1u128 << x));
                let mut k = 1u64;
                loop {
                    if cur == full_mask {
                        best[slot] = best[slot].min(k);
                        break;
                    }
                    if k >= best[slot] {
                        break;
                    }
                    let mut next = cur;
                    for p in 0..full {
                        if cur >> p & 1 == 1 {
                            for &q in &blocks {
                                next |= 1u128 << table[p][q as usize];
                            }
                        }
                    }
                    if next == cur {
                        break; // pair does not generate
                    }
                    cur = next;
                    k += 1;
                }
            }
        }
    }
    if best[0] == u64::MAX {
        return Err(SymError::NotGenerating);
    }
    Ok(Complexity { with_zero_exponents: best[0], nonzero_exponents: best[1] })
}
