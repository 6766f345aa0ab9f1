//! The generic poset, approximated by a growing finite poset of opaque
//! elements. New elements come from one-point extensions realized minimally:
//! a fresh element is related exactly by the transitive closure of its
//! prescribed seeds, and existing relations never change.
//!
//! Partial isomorphisms here are plain id maps. The interesting structure
//! lives on their orbits: a map is correctly orbitally incomparable when each
//! orbit is an antichain and the induced relation on orbits is a partial
//! order. That property survives good one-point extensions, which is what
//! every lemma in this module exploits.

use std::collections::{BTreeMap, BTreeSet};

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::order::{ElemId, FinitePoset};
use crate::words::{evaluate, word_lemma, PointMap, Word, WordError};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CoiKind {
    OrbitComparable,
    NotAntisymmetric,
    NotTransitive,
}

/// Failure of correct orbital incomparability, with element witnesses: the
/// comparable pair for OrbitComparable, orbit representatives otherwise.
#[derive(Clone, Debug, PartialEq, Eq, Error)]
#[error("orbit relation fails ({kind:?}): witnesses {witnesses:?}")]
pub struct CoiViolation {
    pub kind: CoiKind,
    pub witnesses: Vec<(ElemId, ElemId)>,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum DError {
    #[error(transparent)]
    Word(#[from] WordError),
    #[error(transparent)]
    Coi(#[from] CoiViolation),
    #[error("seeds force {lo} < new < {hi} but not {lo} < {hi}")]
    InconsistentExtension { lo: ElemId, hi: ElemId },
    #[error("element {0} is not in the store")]
    UnknownElement(ElemId),
    #[error("{0} is already in the domain")]
    InDomain(ElemId),
    #[error("{0} is already in the range")]
    InRange(ElemId),
    #[error("{0} is not in the domain")]
    NotInDomain(ElemId),
    #[error("pairs {x0}->{y0} and {x1}->{y1} disagree on order")]
    NotIso { x0: ElemId, y0: ElemId, x1: ElemId, y1: ElemId },
    #[error("elements {0} and {1} are comparable")]
    NotIncomparable(ElemId, ElemId),
    #[error("bad extension request: {0}")]
    BadExtension(String),
}

/// One realized extension call, kept for construction traces.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EcCall {
    pub below: Vec<ElemId>,
    pub above: Vec<ElemId>,
    pub id: ElemId,
}

/// Growing finite approximation of the generic poset. Ids are never reused
/// and relations between existing elements never change.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct DStore {
    poset: FinitePoset,
    next_id: ElemId,
    trace: Vec<EcCall>,
}

impl DStore {
    pub fn new() -> DStore {
        DStore::default()
    }

    pub fn poset(&self) -> &FinitePoset {
        &self.poset
    }

    pub fn contains(&self, id: ElemId) -> bool {
        self.poset.contains(id)
    }

    pub fn lt(&self, a: ElemId, b: ElemId) -> bool {
        self.poset.lt(a, b)
    }

    pub fn incomparable(&self, a: ElemId, b: ElemId) -> bool {
        self.poset.incomparable(a, b)
    }

    pub fn elements(&self) -> impl Iterator<Item = ElemId> + '_ {
        self.poset.elements()
    }

    pub fn len(&self) -> usize {
        self.poset.len()
    }

    pub fn is_empty(&self) -> bool {
        self.poset.is_empty()
    }

    pub fn trace(&self) -> &[EcCall] {
        &self.trace
    }

    /// Fresh element incomparable to everything.
    pub fn fresh(&mut self) -> ElemId {
        self.ec_extend(&BTreeSet::new(), &BTreeSet::new())
            .expect("an unrelated element always extends")
    }

    /// Realizes a one-point extension: a fresh element above every seed in
    /// `below`, below every seed in `above`, with exactly the transitive
    /// closure of those relations and nothing else.
    pub fn ec_extend(
        &mut self,
        below: &BTreeSet<ElemId>,
        above: &BTreeSet<ElemId>,
    ) -> Result<ElemId, DError> {
        for &z in below.iter().chain(above) {
            if !self.poset.contains(z) {
                return Err(DError::UnknownElement(z));
            }
        }
        let mut lo = below.clone();
        for &b in below {
            lo.extend(self.poset.down_set(b));
        }
        let mut hi = above.clone();
        for &a in above {
            hi.extend(self.poset.up_set(a));
        }
        for &v in &lo {
            for &u in &hi {
                if !self.poset.lt(v, u) {
                    return Err(DError::InconsistentExtension { lo: v, hi: u });
                }
            }
        }
        let id = self.next_id;
        self.next_id += 1;
        self.poset.add_element(id);
        let mut rels: Vec<(ElemId, ElemId)> = lo.iter().map(|&v| (v, id)).collect();
        rels.extend(hi.iter().map(|&u| (id, u)));
        self.poset
            .insert_relations(&rels)
            .expect("seed compatibility was checked");
        self.trace.push(EcCall {
            below: below.iter().copied().collect(),
            above: above.iter().copied().collect(),
            id,
        });
        Ok(id)
    }
}

#[derive(Serialize, Deserialize)]
struct DStoreRepr {
    elements: Vec<ElemId>,
    covers: Vec<(ElemId, ElemId)>,
    trace: Vec<EcCall>,
}

impl Serialize for DStore {
    fn serialize<S: Serializer>(&self, ser: S) -> Result<S::Ok, S::Error> {
        DStoreRepr {
            elements: self.poset.elements().collect(),
            covers: self.poset.cover_pairs(),
            trace: self.trace.clone(),
        }
        .serialize(ser)
    }
}

impl<'de> Deserialize<'de> for DStore {
    fn deserialize<D: Deserializer<'de>>(de: D) -> Result<DStore, D::Error> {
        let repr = DStoreRepr::deserialize(de)?;
        let mut poset = FinitePoset::new();
        for &e in &repr.elements {
            poset.add_element(e);
        }
        poset
            .insert_relations(&repr.covers)
            .map_err(|e| D::Error::custom(format!("{e}")))?;
        let next_id = repr.elements.iter().max().map_or(0, |m| m + 1);
        Ok(DStore { poset, next_id, trace: repr.trace })
    }
}

/// Finite order isomorphism between subsets of the store.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct DPartialIso {
    map: BTreeMap<ElemId, ElemId>,
}

impl DPartialIso {
    pub fn empty() -> DPartialIso {
        DPartialIso::default()
    }

    pub fn from_pairs<I>(store: &DStore, pairs: I) -> Result<DPartialIso, DError>
    where
        I: IntoIterator<Item = (ElemId, ElemId)>,
    {
        let mut out = DPartialIso::empty();
        for (x, y) in pairs {
            out.insert(store, x, y)?;
        }
        Ok(out)
    }

    pub fn insert(&mut self, store: &DStore, x: ElemId, y: ElemId) -> Result<(), DError> {
        if !store.contains(x) {
            return Err(DError::UnknownElement(x));
        }
        if !store.contains(y) {
            return Err(DError::UnknownElement(y));
        }
        match self.map.get(&x) {
            Some(&old) if old == y => return Ok(()),
            Some(_) => return Err(DError::InDomain(x)),
            None => {}
        }
        if self.map.values().any(|&v| v == y) {
            return Err(DError::InRange(y));
        }
        for (&x0, &y0) in &self.map {
            if store.lt(x, x0) != store.lt(y, y0) || store.lt(x0, x) != store.lt(y0, y) {
                return Err(DError::NotIso { x0, y0, x1: x, y1: y });
            }
        }
        self.map.insert(x, y);
        Ok(())
    }

    pub fn apply(&self, x: ElemId) -> Option<ElemId> {
        self.map.get(&x).copied()
    }

    pub fn apply_inv(&self, y: ElemId) -> Option<ElemId> {
        self.map.iter().find(|(_, &v)| v == y).map(|(&k, _)| k)
    }

    pub fn apply_pow(&self, x: ElemId, k: i64) -> Option<ElemId> {
        let mut cur = x;
        for _ in 0..k.unsigned_abs() {
            cur = if k > 0 { self.apply(cur)? } else { self.apply_inv(cur)? };
        }
        Some(cur)
    }

    pub fn contains_dom(&self, x: ElemId) -> bool {
        self.map.contains_key(&x)
    }

    pub fn contains_rng(&self, y: ElemId) -> bool {
        self.map.values().any(|&v| v == y)
    }

    pub fn dom(&self) -> impl Iterator<Item = ElemId> + '_ {
        self.map.keys().copied()
    }

    pub fn rng(&self) -> impl Iterator<Item = ElemId> + '_ {
        self.map.values().copied()
    }

    pub fn support(&self) -> BTreeSet<ElemId> {
        self.map.iter().flat_map(|(&k, &v)| [k, v]).collect()
    }

    pub fn pairs(&self) -> impl Iterator<Item = (ElemId, ElemId)> + '_ {
        self.map.iter().map(|(&k, &v)| (k, v))
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    pub fn extends(&self, other: &DPartialIso) -> bool {
        other.pairs().all(|(x, y)| self.apply(x) == Some(y))
    }

    pub fn inverse(&self) -> DPartialIso {
        DPartialIso { map: self.map.iter().map(|(&k, &v)| (v, k)).collect() }
    }
}

impl PointMap for DPartialIso {
    type Point = ElemId;

    fn fwd(&self, x: &ElemId) -> Option<ElemId> {
        self.apply(*x)
    }

    fn bwd(&self, y: &ElemId) -> Option<ElemId> {
        self.apply_inv(*y)
    }
}

impl Serialize for DPartialIso {
    fn serialize<S: Serializer>(&self, ser: S) -> Result<S::Ok, S::Error> {
        self.pairs().collect::<Vec<_>>().serialize(ser)
    }
}

impl<'de> Deserialize<'de> for DPartialIso {
    fn deserialize<D: Deserializer<'de>>(de: D) -> Result<DPartialIso, D::Error> {
        let pairs = Vec::<(ElemId, ElemId)>::deserialize(de)?;
        let mut map = BTreeMap::new();
        let mut seen = BTreeSet::new();
        for (x, y) in pairs {
            if map.insert(x, y).is_some() || !seen.insert(y) {
                return Err(D::Error::custom("pairs are not injective"));
            }
        }
        Ok(DPartialIso { map })
    }
}

/// Orbits of a correctly orbitally incomparable map, each a chain
/// x, h(x), ..., with the induced strict order between them.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OrbitPoset {
    orbits: Vec<Vec<ElemId>>,
    below: BTreeSet<(usize, usize)>,
}

impl OrbitPoset {
    pub fn orbits(&self) -> &[Vec<ElemId>] {
        &self.orbits
    }

    pub fn num_orbits(&self) -> usize {
        self.orbits.len()
    }

    pub fn orbit_index(&self, x: ElemId) -> Option<usize> {
        self.orbits.iter().position(|o| o.contains(&x))
    }

    /// First element of the orbit; it is the one outside rng h.
    pub fn rep(&self, i: usize) -> ElemId {
        self.orbits[i][0]
    }

    /// Number of map applications from one end of the orbit to the other.
    pub fn length(&self, i: usize) -> u64 {
        self.orbits[i].len() as u64 - 1
    }

    pub fn precedes(&self, i: usize, j: usize) -> bool {
        self.below.contains(&(i, j))
    }

    pub fn comparable(&self, i: usize, j: usize) -> bool {
        i == j || self.precedes(i, j) || self.precedes(j, i)
    }

    fn is_cover(&self, i: usize, j: usize) -> bool {
        self.precedes(i, j)
            && !(0..self.orbits.len())
                .any(|t| self.precedes(i, t) && self.precedes(t, j))
    }
}

fn collect_orbits(h: &DPartialIso) -> Result<Vec<Vec<ElemId>>, CoiViolation> {
    let mut orbits = Vec::new();
    let mut seen = BTreeSet::new();
    for x in h.dom() {
        if h.contains_rng(x) {
            continue;
        }
        let mut orbit = vec![x];
        let mut cur = x;
        while let Some(next) = h.apply(cur) {
            orbit.push(next);
            seen.insert(cur);
            cur = next;
        }
        seen.insert(cur);
        orbits.push(orbit);
    }
    if let Some(x) = h.dom().find(|x| !seen.contains(x)) {
        // not reachable from any start, so the point lies on a cycle
        return Err(CoiViolation { kind: CoiKind::OrbitComparable, witnesses: vec![(x, x)] });
    }
    Ok(orbits)
}

fn orbit_relation(orbits: &[Vec<ElemId>], store: &DStore) -> BTreeSet<(usize, usize)> {
    let mut below = BTreeSet::new();
    for (i, oi) in orbits.iter().enumerate() {
        for (j, oj) in orbits.iter().enumerate() {
            if i != j && oi.iter().any(|&u| oj.iter().any(|&v| store.lt(u, v))) {
                below.insert((i, j));
            }
        }
    }
    below
}

/// Computes the orbit poset, or the first witnessed way `h` fails to be
/// correctly orbitally incomparable.
pub fn orbit_poset(h: &DPartialIso, store: &DStore) -> Result<OrbitPoset, CoiViolation> {
    let orbits = collect_orbits(h)?;
    for orbit in &orbits {
        for (a, &u) in orbit.iter().enumerate() {
            for &v in &orbit[a + 1..] {
                if !store.incomparable(u, v) {
                    return Err(CoiViolation {
                        kind: CoiKind::OrbitComparable,
                        witnesses: vec![(u, v)],
                    });
                }
            }
        }
    }
    let below = orbit_relation(&orbits, store);
    for &(i, j) in &below {
        if below.contains(&(j, i)) {
            return Err(CoiViolation {
                kind: CoiKind::NotAntisymmetric,
                witnesses: vec![(orbits[i][0], orbits[j][0])],
            });
        }
    }
    for &(i, j) in &below {
        for k in 0..orbits.len() {
            if below.contains(&(j, k)) && i != k && !below.contains(&(i, k)) {
                return Err(CoiViolation {
                    kind: CoiKind::NotTransitive,
                    witnesses: vec![(orbits[i][0], orbits[j][0]), (orbits[j][0], orbits[k][0])],
                });
            }
        }
    }
    Ok(OrbitPoset { orbits, below })
}

/// The prescribed relations of the new value at `x`: pull each range element
/// through h. Everything else the new value must relate to lies in the
/// closure of these seeds, which the extension call adds itself.
fn good_extension_seeds(
    h: &DPartialIso,
    x: ElemId,
    store: &DStore,
) -> (BTreeSet<ElemId>, BTreeSet<ElemId>) {
    let mut below = BTreeSet::new();
    let mut above = BTreeSet::new();
    for (pre, z) in h.pairs() {
        if store.lt(x, pre) {
            above.insert(z);
        }
        if store.lt(pre, x) {
            below.insert(z);
        }
    }
    (below, above)
}

fn good_ext_unchecked(
    h: &DPartialIso,
    x: ElemId,
    store: &mut DStore,
) -> Result<DPartialIso, DError> {
    let (below, above) = good_extension_seeds(h, x, store);
    let y = store.ec_extend(&below, &above)?;
    let mut out = h.clone();
    out.insert(store, x, y)?;
    Ok(out)
}

#[cfg(debug_assertions)]
fn assert_orbit_posets_match(before: &OrbitPoset, after: &OrbitPoset) {
    for i in 0..before.num_orbits() {
        let i2 = after.orbit_index(before.rep(i)).expect("orbits only grow");
        for j in 0..before.num_orbits() {
            let j2 = after.orbit_index(before.rep(j)).expect("orbits only grow");
            assert_eq!(
                before.precedes(i, j),
                after.precedes(i2, j2),
                "extension changed the orbit poset"
            );
        }
    }
}

/// Extends `h` by one point at `x`, which must be a top of an existing orbit
/// or a fresh element whose singleton orbit fits into the orbit poset. The
/// new value is related to old elements exactly as the orbit structure
/// dictates, so the orbit poset is unchanged up to the obvious relabeling.
pub fn good_x_extension(
    h: &DPartialIso,
    x: ElemId,
    store: &mut DStore,
) -> Result<DPartialIso, DError> {
    if !store.contains(x) {
        return Err(DError::UnknownElement(x));
    }
    if h.contains_dom(x) {
        return Err(DError::InDomain(x));
    }
    let op = orbit_poset(h, store)?;
    if !h.contains_rng(x) {
        // fresh singleton: check it fits the orbit poset
        let lx: BTreeSet<usize> = (0..op.num_orbits())
            .filter(|&i| op.orbits()[i].iter().any(|&u| store.lt(u, x)))
            .collect();
        let ux: BTreeSet<usize> = (0..op.num_orbits())
            .filter(|&i| op.orbits()[i].iter().any(|&u| store.lt(x, u)))
            .collect();
        if let Some(&i) = lx.intersection(&ux).next() {
            return Err(CoiViolation {
                kind: CoiKind::NotAntisymmetric,
                witnesses: vec![(op.rep(i), x)],
            }
            .into());
        }
        for &j in &ux {
            for k in 0..op.num_orbits() {
                if op.precedes(j, k) && !ux.contains(&k) {
                    return Err(CoiViolation {
                        kind: CoiKind::NotTransitive,
                        witnesses: vec![(x, op.rep(j)), (op.rep(j), op.rep(k))],
                    }
                    .into());
                }
            }
        }
        for &j in &lx {
            for i in 0..op.num_orbits() {
                if op.precedes(i, j) && !lx.contains(&i) {
                    return Err(CoiViolation {
                        kind: CoiKind::NotTransitive,
                        witnesses: vec![(op.rep(i), op.rep(j)), (op.rep(j), x)],
                    }
                    .into());
                }
            }
        }
    }
    let out = good_ext_unchecked(h, x, store)?;
    #[cfg(debug_assertions)]
    {
        let after = orbit_poset(&out, store).expect("good extensions stay c.o.i.");
        assert_orbit_posets_match(&op, &after);
    }
    Ok(out)
}

/// Walks the full orbit of `x` under `h`: back to the bottom, then forward.
fn orbit_chain(h: &DPartialIso, x: ElemId) -> Vec<ElemId> {
    let mut bottom = x;
    while let Some(prev) = h.apply_inv(bottom) {
        bottom = prev;
    }
    let mut chain = vec![bottom];
    let mut cur = bottom;
    while let Some(next) = h.apply(cur) {
        chain.push(next);
        cur = next;
    }
    chain
}

fn grow_orbit_forward(
    h: &DPartialIso,
    member: ElemId,
    steps: u64,
    store: &mut DStore,
) -> Result<DPartialIso, DError> {
    let mut h = h.clone();
    for _ in 0..steps {
        let top = *orbit_chain(&h, member).last().unwrap();
        h = good_x_extension(&h, top, store)?;
    }
    Ok(h)
}

fn grow_orbit_backward(
    h: &DPartialIso,
    member: ElemId,
    steps: u64,
    store: &mut DStore,
) -> Result<DPartialIso, DError> {
    let mut h = h.clone();
    for _ in 0..steps {
        let bottom = orbit_chain(&h, member)[0];
        h = good_x_extension(&h.inverse(), bottom, store)?.inverse();
    }
    Ok(h)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BridgeCase {
    /// [y] below [z] below [x]; afterwards [y] sits below [x].
    YBelowX,
    /// [y] above [z] above [x]; afterwards [y] sits above [x].
    YAboveX,
}

/// Makes the orbit of `y_id` comparable with the outside element `x` by
/// stretching that one orbit until an iterate lands on the far side of the
/// orbit of `z_id`. No other orbit changes, and the orbit poset keeps its
/// shape.
pub fn bridge_orbits(
    h: &DPartialIso,
    x: ElemId,
    y_id: ElemId,
    z_id: ElemId,
    case: BridgeCase,
    store: &mut DStore,
) -> Result<DPartialIso, DError> {
    let op = orbit_poset(h, store)?;
    if h.contains_dom(x) || h.contains_rng(x) {
        return Err(DError::BadExtension(format!("{x} is not outside the map")));
    }
    let oy = op
        .orbit_index(y_id)
        .ok_or(DError::BadExtension(format!("{y_id} is in no orbit")))?;
    let oz = op
        .orbit_index(z_id)
        .ok_or(DError::BadExtension(format!("{z_id} is in no orbit")))?;
    if oy == oz {
        return Err(DError::BadExtension("orbits must be distinct".into()));
    }
    let (ys, zs) = (&op.orbits()[oy], &op.orbits()[oz]);
    let goal_met = |store: &DStore, h: &DPartialIso| {
        orbit_chain(h, y_id).iter().any(|&u| match case {
            BridgeCase::YBelowX => store.lt(u, x),
            BridgeCase::YAboveX => store.lt(x, u),
        })
    };
    let pre_ok = match case {
        BridgeCase::YBelowX => {
            op.precedes(oy, oz) && zs.iter().any(|&v| store.lt(v, x))
        }
        BridgeCase::YAboveX => {
            op.precedes(oz, oy) && zs.iter().any(|&v| store.lt(x, v))
        }
    };
    if !pre_ok {
        return Err(DError::BadExtension("orbits are not positioned for a bridge".into()));
    }
    if goal_met(store, h) {
        return Ok(h.clone());
    }
    // indices witnessing [y] vs [z] and [z] vs [x]
    let mut wit = None;
    'outer: for (i, &u) in ys.iter().enumerate() {
        for (j, &v) in zs.iter().enumerate() {
            let rel = match case {
                BridgeCase::YBelowX => store.lt(u, v),
                BridgeCase::YAboveX => store.lt(v, u),
            };
            if rel {
                wit = Some((i as i64, j as i64));
                break 'outer;
            }
        }
    }
    let (i, j) = wit.expect("precedes was checked");
    let k = zs
        .iter()
        .position(|&v| match case {
            BridgeCase::YBelowX => store.lt(v, x),
            BridgeCase::YAboveX => store.lt(x, v),
        })
        .expect("precondition was checked") as i64;
    let t = i - j + k;
    let top = op.length(oy) as i64;
    assert!(
        !(0..=top).contains(&t),
        "an in-range landing index already met the goal"
    );
    let out = if t > top {
        grow_orbit_forward(h, y_id, (t - top) as u64, store)?
    } else {
        grow_orbit_backward(h, y_id, (-t) as u64, store)?
    };
    assert!(goal_met(store, &out), "the stretched orbit reaches past the middle one");
    Ok(out)
}

/// Brings the outside element `x` into the domain: repairs every orbit pair
/// whose transitivity the singleton [x] would break, then attaches a fresh
/// image to `x` itself.
pub fn add_to_domain(
    h: &DPartialIso,
    x: ElemId,
    store: &mut DStore,
) -> Result<DPartialIso, DError> {
    if !store.contains(x) {
        return Err(DError::UnknownElement(x));
    }
    if h.contains_dom(x) || h.contains_rng(x) {
        return Err(DError::BadExtension(format!("{x} is not outside the map")));
    }
    let op = orbit_poset(h, store)?;
    let n = op.num_orbits();
    let lx: BTreeSet<usize> = (0..n)
        .filter(|&i| op.orbits()[i].iter().any(|&u| store.lt(u, x)))
        .collect();
    let ux: BTreeSet<usize> = (0..n)
        .filter(|&i| op.orbits()[i].iter().any(|&u| store.lt(x, u)))
        .collect();
    assert!(
        lx.intersection(&ux).next().is_none(),
        "an orbit around x contradicts orbital incomparability"
    );
    let mut fixes = Vec::new();
    for &j in &lx {
        for i in 0..n {
            if op.precedes(i, j) && !lx.contains(&i) && !ux.contains(&i) {
                fixes.push((op.rep(i), op.rep(j), BridgeCase::YBelowX));
            }
        }
    }
    for &j in &ux {
        for i in 0..n {
            if op.precedes(j, i) && !ux.contains(&i) && !lx.contains(&i) {
                fixes.push((op.rep(i), op.rep(j), BridgeCase::YAboveX));
            }
        }
    }
    let mut cur = h.clone();
    for (y_id, z_id, case) in fixes {
        cur = bridge_orbits(&cur, x, y_id, z_id, case, store)?;
    }
    good_x_extension(&cur, x, store)
}

/// Longest sum of orbit lengths along cover chains from orbit `u` to orbit
/// `v`, in the given direction.
fn chain_sum(op: &OrbitPoset, u: usize, v: usize, ascending: bool) -> u64 {
    if u == v {
        return 0;
    }
    let mut best = 0;
    for w in 0..op.num_orbits() {
        let cover = if ascending { op.is_cover(u, w) } else { op.is_cover(w, u) };
        let toward = w == v
            || if ascending { op.precedes(w, v) } else { op.precedes(v, w) };
        if cover && toward {
            best = best.max(op.length(u) + chain_sum(op, w, v, ascending));
        }
    }
    best
}

/// An exponent bound past which every good orbit extension keeps iterates of
/// `x` incomparable with `y`: zero for incomparable orbits, the maximal sum
/// of orbit lengths along cover chains otherwise, corrected by the length of
/// the target orbit when either point sits mid-orbit.
pub fn chain_bound(
    h: &DPartialIso,
    x: ElemId,
    y: ElemId,
    store: &DStore,
) -> Result<u64, DError> {
    if !h.contains_dom(x) {
        return Err(DError::NotInDomain(x));
    }
    if !h.contains_dom(y) {
        return Err(DError::NotInDomain(y));
    }
    if x == y {
        return Ok(0);
    }
    let op = orbit_poset(h, store)?;
    let ox = op.orbit_index(x).unwrap();
    let oy = op.orbit_index(y).unwrap();
    if !op.comparable(ox, oy) {
        return Ok(0);
    }
    let base = if ox == oy {
        0
    } else {
        chain_sum(&op, ox, oy, op.precedes(ox, oy))
    };
    if op.rep(ox) == x && op.rep(oy) == y {
        Ok(base)
    } else {
        Ok(base + op.length(oy))
    }
}

/// Stretches orbits so one exponent `m` makes all of `a` incomparable with
/// its m-th image, and verifies that directly before returning.
pub fn separate_set(
    h: &DPartialIso,
    a: &BTreeSet<ElemId>,
    store: &mut DStore,
) -> Result<(DPartialIso, u64), DError> {
    for &x in a {
        if !h.contains_dom(x) {
            return Err(DError::NotInDomain(x));
        }
    }
    let mut bound = 0;
    for &x in a {
        for &y in a {
            bound = bound.max(chain_bound(h, x, y, store)?);
        }
    }
    let mut g = h.clone();
    let mut m = bound + 1;
    for _ in 0..8 {
        for &x in a {
            let chain = orbit_chain(&g, x);
            let pos = chain.iter().position(|&u| u == x).unwrap() as u64;
            let need = pos + m;
            let top = chain.len() as u64 - 1;
            if need > top {
                g = grow_orbit_forward(&g, x, need - top, store)?;
            }
        }
        let separated = a.iter().all(|&x| {
            a.iter().all(|&y| {
                let ym = g.apply_pow(y, m as i64).unwrap();
                store.incomparable(x, ym)
            })
        });
        if separated {
            return Ok((g, m));
        }
        m += 1;
    }
    panic!("the chain bound did not separate the set");
}

/// Union of two isomorphisms with fully incomparable supports.
pub fn glue_incomparable(
    h0: &DPartialIso,
    h1: &DPartialIso,
    store: &DStore,
) -> Result<DPartialIso, DError> {
    for &u in &h0.support() {
        for &v in &h1.support() {
            if !store.incomparable(u, v) {
                return Err(DError::NotIncomparable(u, v));
            }
        }
    }
    let mut out = h0.clone();
    for (x, y) in h1.pairs() {
        out.insert(store, x, y)?;
    }
    Ok(out)
}

/// Completes an orbitally incomparable map to a correctly orbitally
/// incomparable extension by stretching orbits until the orbit relation is
/// transitively closed.
///
/// The underlying result picks its comparability witnesses from an ambient
/// automorphism, which a finite approximation cannot inspect. The witnesses
/// used here are the comparabilities already present in the store; stretching
/// the lower orbit of each failing pair onto the far side of the middle one
/// realizes the same closure one pair at a time.
pub fn normalize_coi(f: &DPartialIso, store: &mut DStore) -> Result<DPartialIso, DError> {
    let mut cur = f.clone();
    loop {
        let orbits = collect_orbits(&cur)?;
        for orbit in &orbits {
            for (a, &u) in orbit.iter().enumerate() {
                for &v in &orbit[a + 1..] {
                    if !store.incomparable(u, v) {
                        return Err(CoiViolation {
                            kind: CoiKind::OrbitComparable,
                            witnesses: vec![(u, v)],
                        }
                        .into());
                    }
                }
            }
        }
        let below = orbit_relation(&orbits, store);
        for &(i, j) in &below {
            if below.contains(&(j, i)) {
                return Err(CoiViolation {
                    kind: CoiKind::NotAntisymmetric,
                    witnesses: vec![(orbits[i][0], orbits[j][0])],
                }
                .into());
            }
        }
        let mut violation = None;
        'scan: for &(i, j) in &below {
            for k in 0..orbits.len() {
                if below.contains(&(j, k)) && i != k && !below.contains(&(i, k)) {
                    violation = Some((i, j, k));
                    break 'scan;
                }
            }
        }
        let Some((i, j, k)) = violation else {
            debug_assert!(orbit_poset(&cur, store).is_ok());
            return Ok(cur);
        };
        // stretch orbit i until an iterate lands under orbit k
        let (oi, oj, ok) = (&orbits[i], &orbits[j], &orbits[k]);
        let (mut a, mut b) = (0, 0);
        'wit: for (p, &u) in oi.iter().enumerate() {
            for (q, &v) in oj.iter().enumerate() {
                if store.lt(u, v) {
                    (a, b) = (p as i64, q as i64);
                    break 'wit;
                }
            }
        }
        let c = oj
            .iter()
            .position(|&u| ok.iter().any(|&v| store.lt(u, v)))
            .expect("the orbit relation was witnessed") as i64;
        let t = a - b + c;
        let top = oi.len() as i64 - 1;
        assert!(
            !(0..=top).contains(&t),
            "an in-range landing index would close the pair already"
        );
        let member = oi[0];
        cur = if t > top {
            let mut next = cur.clone();
            for _ in 0..(t - top) {
                let end = *orbit_chain(&next, member).last().unwrap();
                next = good_ext_unchecked(&next, end, store)?;
            }
            next
        } else {
            let mut next = cur.clone();
            for _ in 0..(-t) {
                let bottom = orbit_chain(&next, member)[0];
                next = good_ext_unchecked(&next.inverse(), bottom, store)?.inverse();
            }
            next
        };
    }
}

#[derive(Clone, Debug)]
pub struct KeyLemmaD {
    pub f_out: DPartialIso,
    pub g_out: DPartialIso,
    pub k: u64,
    pub y: ElemId,
}

/// Extends correctly orbitally incomparable `f` and arbitrary `g` so that one
/// exponent of `f_out` carries `x_set` onto an incomparable copy, and `w`
/// moves a witness inside a fresh antichain block carrying the word maps.
pub fn key_lemma_d(
    f: &DPartialIso,
    g: &DPartialIso,
    x_set: &BTreeSet<ElemId>,
    w: &Word,
    store: &mut DStore,
) -> Result<KeyLemmaD, DError> {
    let wl = word_lemma(w)?;
    let mut f0 = f.clone();
    for &x in x_set {
        if f0.contains_dom(x) {
            continue;
        }
        f0 = if f0.contains_rng(x) {
            good_x_extension(&f0, x, store)?
        } else {
            add_to_domain(&f0, x, store)?
        };
    }
    let (f0, k) = separate_set(&f0, x_set, store)?;
    let block: Vec<ElemId> = (0..=wl.total).map(|_| store.fresh()).collect();
    let mut f1 = DPartialIso::empty();
    for (&i, &ui) in wl.u.iter() {
        f1.insert(store, block[i as usize - 1], block[ui as usize - 1])?;
    }
    let mut g1 = DPartialIso::empty();
    for (&i, &vi) in wl.v.iter() {
        g1.insert(store, block[i as usize - 1], block[vi as usize - 1])?;
    }
    let f_out = glue_incomparable(&f0, &f1, store)?;
    let g_out = glue_incomparable(g, &g1, store)?;
    let y = block[0];
    debug_assert_eq!(evaluate(w, &f_out, &g_out, y), Some(block[wl.total as usize]));
    debug_assert!(orbit_poset(&f_out, store).is_ok());
    Ok(KeyLemmaD { f_out, g_out, k, y })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::order::is_partial_order;

    fn set(ids: &[ElemId]) -> BTreeSet<ElemId> {
        ids.iter().copied().collect()
    }

    /// Fresh store with n loose elements 0..n.
    fn store_with(n: u32) -> DStore {
        let mut s = DStore::new();
        for _ in 0..n {
            s.fresh();
        }
        s
    }

    fn relate(s: &mut DStore, pairs: &[(ElemId, ElemId)]) {
        let mut p = s.poset.clone();
        p.insert_relations(pairs).unwrap();
        s.poset = p;
    }

    #[test]
    fn ec_extend_minimal_realization() {
        let mut s = DStore::new();
        let a = s.fresh();
        let b = s.fresh();
        assert!(s.incomparable(a, b));

        // closure through existing relations
        relate(&mut s, &[(a, b)]);
        let c = s.ec_extend(&set(&[]), &set(&[a])).unwrap();
        assert!(s.lt(c, a) && s.lt(c, b), "c < a and a < b force c < b");
        let elems: BTreeSet<ElemId> = s.elements().collect();
        let rels: BTreeSet<(ElemId, ElemId)> = s.poset().relations().collect();
        assert!(is_partial_order(&elems, &rels));

        // incompatible seeds fail and leave the store untouched
        let d = s.fresh();
        let before = s.clone();
        assert_eq!(
            s.ec_extend(&set(&[d]), &set(&[a])),
            Err(DError::InconsistentExtension { lo: d, hi: a })
        );
        assert_eq!(s, before);
    }

    #[test]
    fn ec_extend_freezes_history() {
        let mut s = store_with(3);
        relate(&mut s, &[(0, 1)]);
        let old: BTreeSet<(ElemId, ElemId)> = s.poset().relations().collect();
        let d = s.ec_extend(&set(&[1]), &set(&[])).unwrap();
        let new: BTreeSet<(ElemId, ElemId)> = s.poset().relations().collect();
        assert!(new.is_superset(&old));
        assert!(new.difference(&old).all(|&(u, v)| u == d || v == d));
        assert!(s.lt(0, d), "0 < 1 < d closes");
        assert!(s.incomparable(2, d));
    }

    #[test]
    fn iso_insert_checks_order() {
        let mut s = store_with(4);
        relate(&mut s, &[(0, 1)]);
        let mut h = DPartialIso::empty();
        h.insert(&s, 0, 2).unwrap();
        assert_eq!(
            h.insert(&s, 1, 3),
            Err(DError::NotIso { x0: 0, y0: 2, x1: 1, y1: 3 })
        );
        let e = s.ec_extend(&set(&[2]), &set(&[])).unwrap();
        h.insert(&s, 1, e).unwrap();
        assert_eq!(h.apply_pow(0, 1), Some(2));
        assert_eq!(h.inverse().apply(e), Some(1));
    }

    #[test]
    fn orbit_poset_paper_counterexample() {
        let mut s = store_with(4);
        let (a, b, c, d) = (0, 1, 2, 3);
        relate(&mut s, &[(a, d), (b, c)]);
        let h = DPartialIso::from_pairs(&s, [(a, c), (b, d)]).unwrap();
        let err = orbit_poset(&h, &s).unwrap_err();
        assert_eq!(err.kind, CoiKind::NotAntisymmetric);
        assert_eq!(err.witnesses, vec![(a, b)]);
    }

    #[test]
    fn orbit_poset_shapes() {
        let s0 = store_with(2);
        let h = DPartialIso::from_pairs(&s0, [(0, 1)]).unwrap();
        let op = orbit_poset(&h, &s0).unwrap();
        assert_eq!(op.num_orbits(), 1);
        assert_eq!(op.orbits()[0], vec![0, 1]);
        assert_eq!(op.length(0), 1);

        let mut s1 = store_with(2);
        relate(&mut s1, &[(0, 1)]);
        let up = DPartialIso::from_pairs(&s1, [(0, 1)]).unwrap();
        let err = orbit_poset(&up, &s1).unwrap_err();
        assert_eq!(err.kind, CoiKind::OrbitComparable);

        // a two-cycle is comparable with itself
        let s2 = store_with(2);
        let cyc = DPartialIso::from_pairs(&s2, [(0, 1), (1, 0)]).unwrap();
        assert_eq!(orbit_poset(&cyc, &s2).unwrap_err().kind, CoiKind::OrbitComparable);

        // transitivity failure across three orbits: the two witness
        // diagonals miss each other, so no closure relates ends
        let mut s3 = store_with(6);
        relate(&mut s3, &[(1, 2), (3, 4)]);
        let h3 = DPartialIso::from_pairs(&s3, [(0, 1), (2, 3), (4, 5)]).unwrap();
        let err = orbit_poset(&h3, &s3).unwrap_err();
        assert_eq!(err.kind, CoiKind::NotTransitive);
        assert_eq!(err.witnesses, vec![(0, 2), (2, 4)]);
    }

    #[test]
    fn good_extension_on_fresh_antichain() {
        let mut s = store_with(2);
        let h = DPartialIso::from_pairs(&s, [(0, 1)]).unwrap();
        let h2 = good_x_extension(&h, 1, &mut s).unwrap();
        let z = h2.apply(1).unwrap();
        assert!(s.incomparable(0, z) && s.incomparable(1, z));
        assert_eq!(orbit_poset(&h2, &s).unwrap().orbits()[0], vec![0, 1, z]);
    }

    #[test]
    fn good_extension_inherits_relations() {
        // two orbits [0,1] and [2,3] with 1 < 2, so [0] precedes [2]
        let mut s = store_with(4);
        relate(&mut s, &[(1, 2)]);
        let h = DPartialIso::from_pairs(&s, [(0, 1), (2, 3)]).unwrap();
        let h2 = good_x_extension(&h, 1, &mut s).unwrap();
        let y = h2.apply(1).unwrap();
        // y < 3 exactly: 1 < pre(3) = 2 pulls the relation up
        assert!(s.lt(y, 3));
        assert!(s.incomparable(y, 0) && s.incomparable(y, 1) && s.incomparable(y, 2));
        let op = orbit_poset(&h2, &s).unwrap();
        let a = op.orbit_index(0).unwrap();
        let b = op.orbit_index(2).unwrap();
        assert!(op.precedes(a, b));
    }

    #[test]
    fn good_extension_case_b_rejects_broken_poset() {
        // orbits [0,1] < [2,3] < [4,5]; x sits below the middle orbit only,
        // so the singleton [x] breaks transitivity
        let mut s = store_with(6);
        relate(&mut s, &[(0, 2), (1, 3), (3, 4)]);
        let h = DPartialIso::from_pairs(&s, [(0, 1), (2, 3), (4, 5)]).unwrap();
        let x = s.ec_extend(&set(&[]), &set(&[2])).unwrap();
        match good_x_extension(&h, x, &mut s) {
            Err(DError::Coi(v)) => {
                assert_eq!(v.kind, CoiKind::NotTransitive);
                assert_eq!(v.witnesses, vec![(x, 2), (2, 4)]);
            }
            other => panic!("expected a transitivity failure, got {other:?}"),
        }
    }

    #[test]
    fn good_extension_case_b_attaches_singleton() {
        let mut s = store_with(2);
        let h = DPartialIso::from_pairs(&s, [(0, 1)]).unwrap();
        let x = s.fresh();
        let h2 = good_x_extension(&h, x, &mut s).unwrap();
        let y = h2.apply(x).unwrap();
        assert!(s.incomparable(x, y));
        assert_eq!(orbit_poset(&h2, &s).unwrap().num_orbits(), 2);
    }

    fn bridge_fixture() -> (DStore, DPartialIso, ElemId) {
        // orbit Y = [0,1], orbit Z = [2,3,4] with 0 < 2 and 1 < 3;
        // x sits above the far end of Z only
        let mut s = store_with(5);
        relate(&mut s, &[(0, 2), (1, 3)]);
        let h = DPartialIso::from_pairs(&s, [(0, 1), (2, 3), (3, 4)]).unwrap();
        let x = s.ec_extend(&set(&[4]), &set(&[])).unwrap();
        (s, h, x)
    }

    #[test]
    fn bridge_stretches_lower_orbit() {
        let (mut s, h, x) = bridge_fixture();
        let before = orbit_poset(&h, &s).unwrap();
        let h2 = bridge_orbits(&h, x, 0, 2, BridgeCase::YBelowX, &mut s).unwrap();
        let chain = orbit_chain(&h2, 0);
        assert_eq!(chain.len(), 3, "one forward step");
        assert!(s.lt(*chain.last().unwrap(), x));
        let after = orbit_poset(&h2, &s).unwrap();
        assert_eq!(before.num_orbits(), after.num_orbits());
        assert!(h2.extends(&h));
    }

    #[test]
    fn bridge_mirror_case() {
        // orbit Z = [2,3,4] below orbit Y = [0,1]: 2 < 0, 3 < 1; x < 4 only
        let mut s = store_with(5);
        relate(&mut s, &[(2, 0), (3, 1)]);
        let h = DPartialIso::from_pairs(&s, [(0, 1), (2, 3), (3, 4)]).unwrap();
        let x = s.ec_extend(&set(&[]), &set(&[4])).unwrap();
        let h2 = bridge_orbits(&h, x, 0, 2, BridgeCase::YAboveX, &mut s).unwrap();
        assert!(orbit_chain(&h2, 0).iter().any(|&u| s.lt(x, u)));
    }

    #[test]
    fn bridge_returns_input_when_already_related() {
        let (mut s, h, x) = bridge_fixture();
        // make the top of Y directly below x as well
        relate(&mut s, &[(1, x)]);
        let h2 = bridge_orbits(&h, x, 0, 2, BridgeCase::YBelowX, &mut s).unwrap();
        assert_eq!(h2, h);
    }

    #[test]
    fn add_to_domain_fresh_and_repairing() {
        let mut s = DStore::new();
        let x = s.fresh();
        let h = add_to_domain(&DPartialIso::empty(), x, &mut s).unwrap();
        assert!(h.contains_dom(x));
        assert!(s.incomparable(x, h.apply(x).unwrap()));

        // one orbit below x
        let mut s = store_with(2);
        let h = DPartialIso::from_pairs(&s, [(0, 1)]).unwrap();
        let x = s.ec_extend(&set(&[0]), &set(&[])).unwrap();
        let h2 = add_to_domain(&h, x, &mut s).unwrap();
        assert!(h2.contains_dom(x) && h2.extends(&h));
        assert!(orbit_poset(&h2, &s).is_ok());
    }

    #[test]
    fn add_to_domain_bridges_both_sides() {
        // stacked orbits Y=[0,1] < Z=[2,3,4] < V=[5,6,7] < W=[8,9];
        // x is wedged between Z's top and V's top: 4 < x < 7. Then
        // (Y, Z) needs a bridge below x and (W, V) one above it.
        let mut s = store_with(10);
        relate(
            &mut s,
            &[(0, 2), (1, 3), (2, 5), (3, 6), (4, 7), (5, 8), (6, 9)],
        );
        let h = DPartialIso::from_pairs(
            &s,
            [(0, 1), (2, 3), (3, 4), (5, 6), (6, 7), (8, 9)],
        )
        .unwrap();
        let x = s.ec_extend(&set(&[4]), &set(&[7])).unwrap();
        let before = orbit_poset(&h, &s).unwrap();
        let h2 = add_to_domain(&h, x, &mut s).unwrap();
        assert!(h2.contains_dom(x) && h2.extends(&h));
        let after = orbit_poset(&h2, &s).unwrap();
        assert_eq!(after.num_orbits(), before.num_orbits() + 1);
        // Y reaches below x, W reaches above x
        assert!(orbit_chain(&h2, 0).iter().any(|&u| s.lt(u, x)));
        assert!(orbit_chain(&h2, 8).iter().any(|&u| s.lt(x, u)));
    }

    #[test]
    fn chain_bound_examples() {
        // three stacked orbits: A=[0,1] < B=[2,3,4] < C=[5,6], cover steps
        let mut s = store_with(7);
        relate(&mut s, &[(0, 2), (1, 3), (2, 5), (3, 6)]);
        let h = DPartialIso::from_pairs(&s, [(0, 1), (2, 3), (3, 4), (5, 6)]).unwrap();
        assert_eq!(chain_bound(&h, 0, 0, &s).unwrap(), 0);
        assert_eq!(chain_bound(&h, 0, 2, &s).unwrap(), 1, "cover pair gives |[0]|");
        assert_eq!(chain_bound(&h, 2, 5, &s).unwrap(), 2);
        assert_eq!(chain_bound(&h, 0, 5, &s).unwrap(), 3, "1 + 2 along the chain");
        assert_eq!(chain_bound(&h, 5, 0, &s).unwrap(), 2 + 1, "descending chain");
        // mid-orbit target pays the target orbit length
        assert_eq!(chain_bound(&h, 0, 3, &s).unwrap(), 1 + 2);
        // incomparable orbits cost nothing
        let s2 = store_with(4);
        let h2 = DPartialIso::from_pairs(&s2, [(0, 1), (2, 3)]).unwrap();
        assert_eq!(chain_bound(&h2, 0, 2, &s2).unwrap(), 0);
    }

    #[test]
    fn separate_set_verifies_incomparability() {
        // A = {0, 2} over orbits A=[0,1] < B=[2,3] (cover)
        let mut s = store_with(4);
        relate(&mut s, &[(0, 2), (1, 3)]);
        let h = DPartialIso::from_pairs(&s, [(0, 1), (2, 3)]).unwrap();
        let a = set(&[0, 2]);
        let (g, m) = separate_set(&h, &a, &mut s).unwrap();
        assert!(m >= 1);
        assert!(g.extends(&h));
        for &x in &a {
            for &y in &a {
                assert!(s.incomparable(x, g.apply_pow(y, m as i64).unwrap()));
            }
        }

        // two incomparable orbits need only the minimum stretch
        let mut s2 = store_with(4);
        let h2 = DPartialIso::from_pairs(&s2, [(0, 1), (2, 3)]).unwrap();
        let (g2, m2) = separate_set(&h2, &set(&[0, 2]), &mut s2).unwrap();
        assert_eq!(m2, 1);
        assert!(s2.incomparable(0, g2.apply_pow(0, 1).unwrap()));
    }

    #[test]
    fn glue_checks_incomparability() {
        let mut s = store_with(0);
        let h0 = {
            let a = s.fresh();
            let b = s.fresh();
            DPartialIso::from_pairs(&s, [(a, b)]).unwrap()
        };
        let h1 = {
            let a = s.fresh();
            let b = s.fresh();
            DPartialIso::from_pairs(&s, [(a, b)]).unwrap()
        };
        let g = glue_incomparable(&h0, &h1, &s).unwrap();
        assert_eq!(g.len(), 2);
        assert!(orbit_poset(&g, &s).is_ok());

        let mut s2 = store_with(4);
        relate(&mut s2, &[(0, 2)]);
        let p = DPartialIso::from_pairs(&s2, [(0, 1)]).unwrap();
        let q = DPartialIso::from_pairs(&s2, [(2, 3)]).unwrap();
        assert_eq!(glue_incomparable(&p, &q, &s2), Err(DError::NotIncomparable(0, 2)));
    }

    #[test]
    fn normalize_returns_coi_input_unchanged() {
        let s0 = store_with(2);
        let mut s = s0.clone();
        let h = DPartialIso::from_pairs(&s, [(0, 1)]).unwrap();
        let out = normalize_coi(&h, &mut s).unwrap();
        assert_eq!(out, h);
        assert_eq!(s, s0, "nothing to stretch");
    }

    #[test]
    fn normalize_closes_transitivity_gap() {
        // A=[0,1] < B=[2,3] via 1<2, B < C=[4,5] via 3<4: the witness
        // diagonals do not chain, so A and C stay unrelated
        let mut s = store_with(6);
        relate(&mut s, &[(1, 2), (3, 4)]);
        let f = DPartialIso::from_pairs(&s, [(0, 1), (2, 3), (4, 5)]).unwrap();
        assert_eq!(orbit_poset(&f, &s).unwrap_err().kind, CoiKind::NotTransitive);
        let out = normalize_coi(&f, &mut s).unwrap();
        assert!(out.extends(&f));
        assert!(orbit_poset(&out, &s).is_ok());

        let mut s2 = store_with(2);
        relate(&mut s2, &[(0, 1)]);
        let bad = DPartialIso::from_pairs(&s2, [(0, 1)]).unwrap();
        assert!(matches!(
            normalize_coi(&bad, &mut s2),
            Err(DError::Coi(CoiViolation { kind: CoiKind::OrbitComparable, .. }))
        ));
    }

    fn check_key_lemma(
        f: &DPartialIso,
        g: &DPartialIso,
        x_set: &BTreeSet<ElemId>,
        w: &Word,
        store: &mut DStore,
    ) -> KeyLemmaD {
        let out = key_lemma_d(f, g, x_set, w, store).unwrap();
        assert!(out.f_out.extends(f) && out.g_out.extends(g));
        assert!(orbit_poset(&out.f_out, store).is_ok());
        for &x in x_set {
            let xi = out.f_out.apply_pow(x, out.k as i64).unwrap();
            for &y in x_set {
                assert!(store.incomparable(y, xi));
            }
        }
        let moved = evaluate(w, &out.f_out, &out.g_out, out.y).unwrap();
        assert_ne!(moved, out.y);
        out
    }

    #[test]
    fn key_lemma_single_point() {
        let mut s = DStore::new();
        let x = s.fresh();
        let w: Word = "a".parse().unwrap();
        let out = check_key_lemma(
            &DPartialIso::empty(),
            &DPartialIso::empty(),
            &set(&[x]),
            &w,
            &mut s,
        );
        // clause two: unions across the separated copies glue
        let xi = out.f_out.apply_pow(x, out.k as i64).unwrap();
        let h0 = DPartialIso::from_pairs(&s, [(x, x)]).unwrap();
        let h1 = DPartialIso::from_pairs(&s, [(xi, xi)]).unwrap();
        glue_incomparable(&h0, &h1, &s).unwrap();
    }

    #[test]
    fn key_lemma_longer_word_and_related_seeds() {
        let mut s = DStore::new();
        let x0 = s.fresh();
        let x1 = s.ec_extend(&set(&[x0]), &set(&[])).unwrap();
        let x2 = s.ec_extend(&set(&[x1]), &set(&[])).unwrap();
        let w: Word = "a b^-1 a".parse().unwrap();
        let wl = word_lemma(&w).unwrap();
        let out = check_key_lemma(
            &DPartialIso::empty(),
            &DPartialIso::empty(),
            &set(&[x0, x1, x2]),
            &w,
            &mut s,
        );
        let moved = evaluate(&w, &out.f_out, &out.g_out, out.y).unwrap();
        // the word walks the whole fresh block
        assert_eq!(out.y + wl.total as u32, moved);
    }

    #[test]
    fn serde_round_trips() {
        let mut s = store_with(3);
        relate(&mut s, &[(0, 1)]);
        s.ec_extend(&set(&[1]), &set(&[])).unwrap();
        let json = serde_json::to_string(&s).unwrap();
        let back: DStore = serde_json::from_str(&json).unwrap();
        assert_eq!(back.poset(), s.poset());
        assert_eq!(back.trace(), s.trace());

        let h = DPartialIso::from_pairs(&s, [(0, 1), (1, 3)]).unwrap();
        let json = serde_json::to_string(&h).unwrap();
        let back: DPartialIso = serde_json::from_str(&json).unwrap();
        assert_eq!(back, h);
        assert!(serde_json::from_str::<DPartialIso>("[[0,1],[0,2]]").is_err());
    }
}
