//! Reduced words over two letters and their evaluation through partial maps.
//!
//! A word is a sequence of syllables `letter^exp` with nonzero exponents and
//! adjacent letters distinct. Words act on points from the right: in `a b^-1`
//! the `b^-1` applies first. Text form: `a^2 b^-1 a`.

use std::fmt;
use std::str::FromStr;

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::order::PartialMap;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Letter {
    A,
    B,
}

impl Letter {
    pub fn other(self) -> Letter {
        match self {
            Letter::A => Letter::B,
            Letter::B => Letter::A,
        }
    }
}

impl fmt::Display for Letter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Letter::A => write!(f, "a"),
            Letter::B => write!(f, "b"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Syllable {
    pub letter: Letter,
    pub exp: i64,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum WordError {
    #[error("malformed word token {0:?}")]
    BadToken(String),
    #[error("word must be nonempty")]
    Empty,
}

/// A freely reduced word. The syllable list is in display order, so the last
/// syllable acts first under evaluation.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Default)]
pub struct Word(Vec<Syllable>);

impl Word {
    pub fn empty() -> Word {
        Word(Vec::new())
    }

    /// Free reduction: merges adjacent equal letters, drops zero exponents.
    pub fn from_syllables<I: IntoIterator<Item = Syllable>>(raw: I) -> Word {
        let mut out: Vec<Syllable> = Vec::new();
        for s in raw {
            if s.exp == 0 {
                continue;
            }
            match out.last_mut() {
                Some(top) if top.letter == s.letter => {
                    top.exp += s.exp;
                    if top.exp == 0 {
                        out.pop();
                    }
                }
                _ => out.push(s),
            }
        }
        Word(out)
    }

    pub fn letter(letter: Letter, exp: i64) -> Word {
        Word::from_syllables([Syllable { letter, exp }])
    }

    pub fn concat(parts: &[&Word]) -> Word {
        Word::from_syllables(parts.iter().flat_map(|w| w.0.iter().copied()))
    }

    pub fn inverse(&self) -> Word {
        Word(self
            .0
            .iter()
            .rev()
            .map(|s| Syllable { letter: s.letter, exp: -s.exp })
            .collect())
    }

    pub fn syllables(&self) -> &[Syllable] {
        &self.0
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Signed exponent sum, the image of the word under both letters mapping
    /// to 1.
    pub fn exponent_sum(&self) -> i64 {
        self.0.iter().map(|s| s.exp).sum()
    }

    /// Total number of letters after reduction.
    pub fn total_length(&self) -> u64 {
        self.0.iter().map(|s| s.exp.unsigned_abs()).sum()
    }

    /// All exponents strictly positive.
    pub fn is_positive(&self) -> bool {
        self.0.iter().all(|s| s.exp > 0)
    }

    /// Unit letters in application order (rightmost syllable first), each with
    /// its sign.
    pub fn units_applied_first(&self) -> impl Iterator<Item = (Letter, i64)> + '_ {
        self.0.iter().rev().flat_map(|s| {
            let sign = s.exp.signum();
            (0..s.exp.unsigned_abs()).map(move |_| (s.letter, sign))
        })
    }
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for s in &self.0 {
            if !first {
                write!(f, " ")?;
            }
            first = false;
            if s.exp == 1 {
                write!(f, "{}", s.letter)?;
            } else {
                write!(f, "{}^{}", s.letter, s.exp)?;
            }
        }
        Ok(())
    }
}

impl FromStr for Word {
    type Err = WordError;

    fn from_str(s: &str) -> Result<Word, WordError> {
        let mut raw = Vec::new();
        for tok in s.split_whitespace() {
            let (head, exp) = match tok.split_once('^') {
                Some((h, e)) => {
                    let exp: i64 = e.parse().map_err(|_| WordError::BadToken(tok.into()))?;
                    (h, exp)
                }
                None => (tok, 1),
            };
            let letter = match head {
                "a" => Letter::A,
                "b" => Letter::B,
                _ => return Err(WordError::BadToken(tok.into())),
            };
            raw.push(Syllable { letter, exp });
        }
        Ok(Word::from_syllables(raw))
    }
}

impl Serialize for Word {
    fn serialize<S: Serializer>(&self, ser: S) -> Result<S::Ok, S::Error> {
        ser.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Word {
    fn deserialize<D: Deserializer<'de>>(de: D) -> Result<Word, D::Error> {
        let s = String::deserialize(de)?;
        s.parse().map_err(|e| D::Error::custom(format!("{e}")))
    }
}

/// Anything a word can be evaluated through: a partial injection with an
/// inverse.
pub trait PointMap {
    type Point: Clone;

    fn fwd(&self, x: &Self::Point) -> Option<Self::Point>;
    fn bwd(&self, y: &Self::Point) -> Option<Self::Point>;
}

impl<P: Ord + Clone> PointMap for PartialMap<P> {
    type Point = P;

    fn fwd(&self, x: &P) -> Option<P> {
        self.apply(x).cloned()
    }

    fn bwd(&self, y: &P) -> Option<P> {
        self.apply_inv(y).cloned()
    }
}

/// Evaluates `w` at `x`, reading `a` as `f` and `b` as `g`, rightmost syllable
/// first. `None` as soon as a step leaves the relevant domain or range.
pub fn evaluate<M: PointMap>(w: &Word, f: &M, g: &M, x: M::Point) -> Option<M::Point> {
    let mut cur = x;
    for (letter, sign) in w.units_applied_first() {
        let map = match letter {
            Letter::A => f,
            Letter::B => g,
        };
        cur = if sign > 0 { map.fwd(&cur)? } else { map.bwd(&cur)? };
    }
    Some(cur)
}

/// Output of [`word_lemma`]: cycle-free partial injections `u`, `v` on
/// `{1, ..., total+1}` with `w(u, v)(1) = total + 1`.
#[derive(Clone, Debug)]
pub struct WordLemmaMaps {
    pub u: PartialMap<u64>,
    pub v: PartialMap<u64>,
    pub total: u64,
}

/// Realizes a nonempty reduced word as a pair of cycle-free partial
/// injections of `{1, ..., M+1}` moving `1` to `M+1`, where `M` is the total
/// length.
///
/// Built block by block from the right: each `a^m b^n` block occupies a fresh
/// interval and is a monotone unit shift, so the blocks share only their
/// endpoints and no cycles can form. When the word starts with an `a`
/// syllable, `M+1` stays clear of `v`'s domain and range; unions with later
/// blocks rely on that.
pub fn word_lemma(w: &Word) -> Result<WordLemmaMaps, WordError> {
    if w.is_empty() {
        return Err(WordError::Empty);
    }
    // Blocks (m_i, n_i) with w = a^{m_K} b^{n_K} ... a^{m_0} b^{n_0}; only the
    // outermost exponents may be zero.
    let sylls = w.syllables();
    let mut blocks: Vec<(i64, i64)> = Vec::new();
    let mut idx = sylls.len() as isize - 1;
    while idx >= 0 {
        let mut n = 0;
        if sylls[idx as usize].letter == Letter::B {
            n = sylls[idx as usize].exp;
            idx -= 1;
        }
        let mut m = 0;
        if idx >= 0 {
            debug_assert_eq!(sylls[idx as usize].letter, Letter::A);
            m = sylls[idx as usize].exp;
            idx -= 1;
        }
        blocks.push((m, n));
    }

    let mut u = PartialMap::new();
    let mut v = PartialMap::new();
    let mut base = 0u64; // block i starts at value base+1 and ends at base + |n_i| + |m_i| + 1
    for (m, n) in blocks {
        let shift = |map: &mut PartialMap<u64>, exp: i64, off: u64| {
            // exp > 0: x -> x+1 on off+1 ..= off+exp, climbing forward;
            // exp < 0: x -> x-1 on off+2 ..= off+|exp|+1, so the inverse climbs.
            for i in 0..exp.unsigned_abs() {
                let (x, y) = if exp > 0 {
                    (off + i + 1, off + i + 2)
                } else {
                    (off + i + 2, off + i + 1)
                };
                map.insert(x, y).expect("word blocks share only endpoints");
            }
        };
        shift(&mut v, n, base);
        shift(&mut u, m, base + n.unsigned_abs());
        base += n.unsigned_abs() + m.unsigned_abs();
    }
    debug_assert_eq!(base, w.total_length());
    Ok(WordLemmaMaps { u, v, total: base })
}

/// Collects every irreducible word with total length in `1..=max_total`.
/// Useful for exhaustive sweeps.
pub fn all_irreducible_words(max_total: u64) -> Vec<Word> {
    let mut out = Vec::new();
    fn go(out: &mut Vec<Word>, prefix: &mut Vec<Syllable>, budget: u64, next: Option<Letter>) {
        if !prefix.is_empty() {
            out.push(Word(prefix.clone()));
        }
        let letters: &[Letter] = match next {
            Some(l) => &[l],
            None => &[Letter::A, Letter::B],
        };
        for &letter in letters {
            for mag in 1..=budget {
                for sign in [1i64, -1] {
                    prefix.push(Syllable { letter, exp: sign * mag as i64 });
                    go(out, prefix, budget - mag, Some(letter.other()));
                    prefix.pop();
                }
            }
        }
    }
    go(&mut out, &mut Vec::new(), max_total, None);
    out.sort_by_key(|w| (w.total_length(), format!("{w}")));
    out
}

/// Letter-set sanity helper for sweeps: fails when the map has a cycle.
pub fn has_cycle<P: Ord + Clone>(map: &PartialMap<P>) -> bool {
    for start in map.dom() {
        let mut cur = start;
        let mut steps = 0usize;
        while let Some(next) = map.apply(cur) {
            if next == start {
                return true;
            }
            steps += 1;
            if steps > map.len() {
                return true;
            }
            cur = next;
        }
    }
    false
}
