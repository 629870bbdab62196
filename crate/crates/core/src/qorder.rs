//! Total quasi-orders stored as rank functions onto dense levels.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::carrier::{Carrier, Element};
use crate::error::{domain, invalid, Result};

/// Rank of elements that the quasi-order leaves undetermined (outside its window).
pub const UNRANKED: u32 = u32::MAX;

/// A total quasi-order on the term universe of a carrier. Level 0 is lowest.
/// Elements may be unranked; comparisons involving them return `None`.
#[derive(Clone, Debug)]
pub struct QuasiOrder {
    carrier: Arc<Carrier>,
    rank: Vec<u32>,
    levels: u32,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConvexCase {
    Convex,
    RightConvexMin,
    LeftConvexMax,
    BothEnds,
    NotStrictlyConvex,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SubsetClassification {
    pub case: ConvexCase,
    /// Convexity complement, sorted; empty for non-strictly-convex sets.
    pub complement: Vec<usize>,
    /// `(s, a, t)` with `s < a < t`, `s, t` in the set and `a` outside it.
    pub witness: Option<(usize, usize, usize)>,
}

impl QuasiOrder {
    /// Builds from a rank per term-universe element; ranks are compressed to dense levels.
    pub fn from_ranks(carrier: Arc<Carrier>, ranks: &[Option<u64>]) -> Result<QuasiOrder> {
        if ranks.len() != carrier.size() {
            return invalid("rank vector must cover the term universe");
        }
        Self::from_key_fn(carrier, |i| ranks[i])
    }

    /// Builds from a sort key: `a <= b` iff `key(a) <= key(b)`; `None` leaves `a` unranked.
    pub fn from_key_fn<K, F>(carrier: Arc<Carrier>, key: F) -> Result<QuasiOrder>
    where
        K: Ord + Send,
        F: Fn(usize) -> Option<K> + Sync,
    {
        let keys: Vec<Option<K>> = (0..carrier.size()).into_par_iter().map(&key).collect();
        let mut order: Vec<usize> = (0..keys.len()).filter(|&i| keys[i].is_some()).collect();
        order.sort_by(|&a, &b| keys[a].cmp(&keys[b]));
        let mut rank = vec![UNRANKED; keys.len()];
        let mut level = 0u32;
        for (pos, &i) in order.iter().enumerate() {
            if pos > 0 && keys[order[pos - 1]] != keys[i] {
                level += 1;
            }
            rank[i] = level;
        }
        let levels = if order.is_empty() { 0 } else { level + 1 };
        Ok(QuasiOrder {
            carrier,
            rank,
            levels,
        })
    }

    /// Builds from a comparator on indices that must be a total preorder on the
    /// elements accepted by `domain`. Verified exhaustively on that set.
    pub fn from_leq<D, F>(carrier: Arc<Carrier>, domain_of: D, leq: F) -> Result<QuasiOrder>
    where
        D: Fn(usize) -> bool + Sync,
        F: Fn(usize, usize) -> bool + Sync,
    {
        let dom: Vec<usize> = (0..carrier.size()).filter(|&i| domain_of(i)).collect();
        let below: Vec<usize> = dom
            .par_iter()
            .map(|&a| dom.iter().filter(|&&b| leq(b, a)).count())
            .collect();
        let mut pos = vec![usize::MAX; carrier.size()];
        for (k, &a) in dom.iter().enumerate() {
            pos[a] = k;
        }
        let bad = dom.par_iter().find_map_first(|&a| {
            dom.iter()
                .find(|&&b| leq(a, b) != (below[pos[a]] <= below[pos[b]]))
                .map(|&b| (a, b))
        });
        if let Some((a, b)) = bad {
            return invalid(format!(
                "comparator is not a total preorder near ({}, {})",
                carrier.label(a),
                carrier.label(b)
            ));
        }
        Self::from_key_fn(carrier, |i| (pos[i] != usize::MAX).then(|| below[pos[i]]))
    }

    /// The one-class quasi-order on the whole term universe.
    pub fn trivial(carrier: Arc<Carrier>) -> QuasiOrder {
        let n = carrier.size();
        QuasiOrder {
            carrier,
            rank: vec![0; n],
            levels: u32::from(n > 0),
        }
    }

    pub fn carrier(&self) -> &Arc<Carrier> {
        &self.carrier
    }

    pub fn levels(&self) -> u32 {
        self.levels
    }

    pub fn rank(&self, a: usize) -> Option<u32> {
        let r = self.rank[a];
        (r != UNRANKED).then_some(r)
    }

    pub fn ranks(&self) -> &[u32] {
        &self.rank
    }

    pub fn is_ranked(&self, a: usize) -> bool {
        self.rank[a] != UNRANKED
    }

    pub fn leq(&self, a: usize, b: usize) -> Option<bool> {
        Some(self.rank(a)? <= self.rank(b)?)
    }

    pub fn sim(&self, a: usize, b: usize) -> Option<bool> {
        Some(self.rank(a)? == self.rank(b)?)
    }

    pub fn lt(&self, a: usize, b: usize) -> Option<bool> {
        Some(self.rank(a)? < self.rank(b)?)
    }

    /// Index of a payload, or a domain error when it is outside the ranked window.
    pub fn index(&self, e: &Element) -> Result<usize> {
        match self.carrier.index_of(e) {
            Some(i) if self.is_ranked(i) => Ok(i),
            _ => domain(format!("{e} is outside the quasi-order's universe")),
        }
    }

    pub fn leq_el(&self, a: &Element, b: &Element) -> Result<bool> {
        Ok(self.rank[self.index(a)?] <= self.rank[self.index(b)?])
    }

    pub fn sim_el(&self, a: &Element, b: &Element) -> Result<bool> {
        Ok(self.rank[self.index(a)?] == self.rank[self.index(b)?])
    }

    pub fn lt_el(&self, a: &Element, b: &Element) -> Result<bool> {
        Ok(self.rank[self.index(a)?] < self.rank[self.index(b)?])
    }

    /// `c` between `a` and `b` (non-strictly, in either direction).
    pub fn between(&self, a: usize, c: usize, b: usize) -> Option<bool> {
        let (ra, rc, rb) = (self.rank(a)?, self.rank(c)?, self.rank(b)?);
        Some((ra <= rc && rc <= rb) || (rb <= rc && rc <= ra))
    }

    pub fn strictly_between(&self, a: usize, c: usize, b: usize) -> Option<bool> {
        let (ra, rc, rb) = (self.rank(a)?, self.rank(c)?, self.rank(b)?);
        Some((ra < rc && rc < rb) || (rb < rc && rc < ra))
    }

    /// Quantification domain: ranked elements of the eval universe.
    pub fn scope(&self) -> Vec<usize> {
        self.carrier
            .eval()
            .iter()
            .copied()
            .filter(|&i| self.is_ranked(i))
            .collect()
    }

    /// Members of the scope in the class of `a`.
    pub fn class_of(&self, a: usize) -> Vec<usize> {
        let r = self.rank[a];
        self.scope()
            .into_iter()
            .filter(|&i| self.rank[i] == r)
            .collect()
    }

    /// Scope members grouped by level, lowest first; levels with no scope member are omitted.
    pub fn scope_levels(&self) -> Vec<Vec<usize>> {
        let mut by: BTreeMap<u32, Vec<usize>> = BTreeMap::new();
        for i in self.scope() {
            by.entry(self.rank[i]).or_default().push(i);
        }
        by.into_values().collect()
    }

    fn rank_bounds(&self, s: &[usize]) -> Option<(u32, u32)> {
        let rs = s.iter().filter_map(|&i| self.rank(i));
        let lo = rs.clone().min()?;
        Some((lo, rs.max()?))
    }

    pub fn min_of(&self, s: &[usize]) -> Vec<usize> {
        match self.rank_bounds(s) {
            Some((lo, _)) => sorted(s.iter().copied().filter(|&i| self.rank[i] == lo)),
            None => Vec::new(),
        }
    }

    pub fn max_of(&self, s: &[usize]) -> Vec<usize> {
        match self.rank_bounds(s) {
            Some((_, hi)) => sorted(s.iter().copied().filter(|&i| self.rank[i] == hi)),
            None => Vec::new(),
        }
    }

    /// First scope element outside `s` whose rank satisfies `inside`.
    fn outsider(&self, s: &[usize], inside: impl Fn(u32) -> bool) -> Option<usize> {
        let set: BTreeSet<usize> = s.iter().copied().collect();
        self.scope()
            .into_iter()
            .find(|i| !set.contains(i) && inside(self.rank[*i]))
    }

    pub fn is_initial_segment(&self, s: &[usize]) -> bool {
        match self.rank_bounds(s) {
            Some((_, hi)) => self.outsider(s, |r| r <= hi).is_none(),
            None => true,
        }
    }

    pub fn is_convex(&self, s: &[usize]) -> bool {
        match self.rank_bounds(s) {
            Some((lo, hi)) => self.outsider(s, |r| lo <= r && r <= hi).is_none(),
            None => true,
        }
    }

    pub fn is_strictly_convex(&self, s: &[usize]) -> bool {
        match self.rank_bounds(s) {
            Some((lo, hi)) => self.outsider(s, |r| lo < r && r < hi).is_none(),
            None => true,
        }
    }

    pub fn is_left_convex(&self, s: &[usize]) -> bool {
        match self.rank_bounds(s) {
            Some((lo, hi)) => self.outsider(s, |r| lo <= r && r < hi).is_none(),
            None => true,
        }
    }

    pub fn is_right_convex(&self, s: &[usize]) -> bool {
        match self.rank_bounds(s) {
            Some((lo, hi)) => self.outsider(s, |r| lo < r && r <= hi).is_none(),
            None => true,
        }
    }

    /// Dispatches the four strict-convexity cases in order, reporting the first that applies.
    pub fn classify_strict_convex(&self, s: &[usize]) -> SubsetClassification {
        let done = |case, complement| SubsetClassification {
            case,
            complement,
            witness: None,
        };
        let Some((lo, hi)) = self.rank_bounds(s) else {
            return done(ConvexCase::Convex, Vec::new());
        };
        let set: BTreeSet<usize> = s.iter().copied().collect();
        let outside: Vec<usize> = self
            .scope()
            .into_iter()
            .filter(|i| !set.contains(i))
            .collect();
        let none_in = |f: &dyn Fn(u32) -> bool| outside.iter().all(|&i| !f(self.rank[i]));
        let at = |r: u32| sorted(outside.iter().copied().filter(|&i| self.rank[i] == r));
        if none_in(&|r| lo <= r && r <= hi) {
            return done(ConvexCase::Convex, Vec::new());
        }
        if none_in(&|r| lo < r && r <= hi) {
            return done(ConvexCase::RightConvexMin, at(lo));
        }
        if none_in(&|r| lo <= r && r < hi) {
            return done(ConvexCase::LeftConvexMax, at(hi));
        }
        if none_in(&|r| lo < r && r < hi) {
            let mut c = at(lo);
            c.extend(at(hi));
            return done(ConvexCase::BothEnds, sorted(c));
        }
        let a = *outside
            .iter()
            .find(|&&i| lo < self.rank[i] && self.rank[i] < hi)
            .expect("gap exists");
        let s0 = self.min_of(s)[0];
        let t0 = self.max_of(s)[0];
        SubsetClassification {
            case: ConvexCase::NotStrictlyConvex,
            complement: Vec::new(),
            witness: Some((s0, a, t0)),
        }
    }

    pub fn convexity_complement(&self, s: &[usize]) -> Result<Vec<usize>> {
        let c = self.classify_strict_convex(s);
        if c.case == ConvexCase::NotStrictlyConvex {
            let (a, b, t) = c.witness.expect("witness present");
            return domain(format!(
                "set is not strictly convex: {} < {} < {}",
                self.carrier.label(a),
                self.carrier.label(b),
                self.carrier.label(t)
            ));
        }
        Ok(c.complement)
    }

    /// Merges each listed pair of adjacent levels `(l, l + 1)`.
    pub fn coarsen(&self, merges: &[(u32, u32)]) -> Result<QuasiOrder> {
        let mut joined = vec![false; self.levels as usize];
        for &(a, b) in merges {
            let (lo, hi) = (a.min(b), a.max(b));
            if hi != lo + 1 || hi >= self.levels {
                return invalid(format!("levels {a} and {b} are not adjacent"));
            }
            joined[hi as usize] = true;
        }
        let mut remap = Vec::with_capacity(self.levels as usize);
        let mut cur = 0u32;
        for (l, &j) in joined.iter().enumerate() {
            if l > 0 && !j {
                cur += 1;
            }
            remap.push(cur);
        }
        let rank = self
            .rank
            .iter()
            .map(|&r| {
                if r == UNRANKED {
                    UNRANKED
                } else {
                    remap[r as usize]
                }
            })
            .collect();
        Ok(QuasiOrder {
            carrier: self.carrier.clone(),
            rank,
            levels: if self.levels == 0 { 0 } else { cur + 1 },
        })
    }

    /// Whether `other` is a coarsening of `self` on elements ranked by both.
    pub fn is_coarsening(&self, other: &QuasiOrder) -> bool {
        let both: Vec<usize> = (0..self.rank.len().min(other.rank.len()))
            .filter(|&i| self.is_ranked(i) && other.is_ranked(i))
            .collect();
        both.par_iter().all(|&a| {
            both.iter()
                .all(|&b| self.rank[a] > self.rank[b] || other.rank[a] <= other.rank[b])
        })
    }

    /// First pair of scope elements on which the two quasi-orders disagree.
    pub fn first_difference(&self, other: &QuasiOrder) -> Option<(usize, usize)> {
        let scope = self.scope();
        scope.par_iter().find_map_first(|&a| {
            scope
                .iter()
                .find(|&&b| self.leq(a, b) != other.leq(a, b))
                .map(|&b| (a, b))
        })
    }

    /// Pointwise equality on the scope.
    pub fn agrees_with(&self, other: &QuasiOrder) -> bool {
        self.first_difference(other).is_none()
    }

    /// Restricts to elements accepted by `keep`; the rest become unranked.
    pub fn restrict(&self, keep: impl Fn(usize) -> bool) -> QuasiOrder {
        let ranks: Vec<Option<u64>> = (0..self.rank.len())
            .map(|i| (keep(i) && self.is_ranked(i)).then(|| u64::from(self.rank[i])))
            .collect();
        QuasiOrder::from_ranks(self.carrier.clone(), &ranks).expect("same carrier")
    }
}

/// A total order, stored as a quasi-order whose ranked classes are singletons.
#[derive(Clone, Debug)]
pub struct TotalOrder {
    qo: QuasiOrder,
}

impl TotalOrder {
    pub fn new(qo: QuasiOrder) -> Result<TotalOrder> {
        let mut seen = vec![usize::MAX; qo.levels as usize];
        for (i, &r) in qo.rank.iter().enumerate() {
            if r == UNRANKED {
                continue;
            }
            if seen[r as usize] != usize::MAX {
                return invalid(format!(
                    "order is not antisymmetric: {} and {} are equivalent",
                    qo.carrier.label(seen[r as usize]),
                    qo.carrier.label(i)
                ));
            }
            seen[r as usize] = i;
        }
        Ok(TotalOrder { qo })
    }

    pub fn from_key_fn<K, F>(carrier: Arc<Carrier>, key: F) -> Result<TotalOrder>
    where
        K: Ord + Send,
        F: Fn(usize) -> Option<K> + Sync,
    {
        TotalOrder::new(QuasiOrder::from_key_fn(carrier, key)?)
    }

    /// Lexicographic order on integer-vector payloads.
    pub fn lexicographic(carrier: Arc<Carrier>) -> Result<TotalOrder> {
        let c = carrier.clone();
        if (0..c.size()).any(|i| c.element(i).coords().is_none()) {
            return invalid("lexicographic order needs integer-vector elements");
        }
        TotalOrder::from_key_fn(carrier, move |i| c.element(i).coords().map(|v| v.to_vec()))
    }

    pub fn qo(&self) -> &QuasiOrder {
        &self.qo
    }

    pub fn carrier(&self) -> &Arc<Carrier> {
        &self.qo.carrier
    }

    pub fn le(&self, a: usize, b: usize) -> Option<bool> {
        self.qo.leq(a, b)
    }

    pub fn lt(&self, a: usize, b: usize) -> Option<bool> {
        self.qo.lt(a, b)
    }
}

fn sorted(it: impl IntoIterator<Item = usize>) -> Vec<usize> {
    let mut v: Vec<usize> = it.into_iter().collect();
    v.sort_unstable();
    v.dedup();
    v
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::carrier::{make_cyclic, Group, WindowPolicy};
    use proptest::prelude::*;

    fn on_cyclic(n: usize, ranks: &[u64]) -> QuasiOrder {
        let c = Arc::new(make_cyclic(n).unwrap());
        let r: Vec<Option<u64>> = ranks.iter().map(|&x| Some(x)).collect();
        QuasiOrder::from_ranks(c, &r).unwrap()
    }

    fn brute_strict(q: &QuasiOrder, s: &[usize]) -> bool {
        let u = q.scope();
        s.iter().all(|&a| {
            s.iter().all(|&b| {
                u.iter()
                    .all(|&x| !(q.lt(a, x).unwrap() && q.lt(x, b).unwrap()) || s.contains(&x))
            })
        })
    }

    fn brute_convex_with(q: &QuasiOrder, s: &[usize], extra: &[usize]) -> bool {
        let mut all: Vec<usize> = s.to_vec();
        all.extend_from_slice(extra);
        let u = q.scope();
        all.iter().all(|&a| {
            all.iter().all(|&b| {
                u.iter()
                    .all(|&x| !(q.leq(a, x).unwrap() && q.leq(x, b).unwrap()) || all.contains(&x))
            })
        })
    }

    #[test]
    fn trivial_is_one_class() {
        let c = Arc::new(make_cyclic(5).unwrap());
        let q = QuasiOrder::trivial(c);
        assert_eq!(q.levels(), 1);
        assert!((0..5).all(|a| (0..5).all(|b| q.sim(a, b).unwrap())));
    }

    #[test]
    fn dense_levels() {
        let q = on_cyclic(4, &[10, 3, 10, 7]);
        assert_eq!(q.levels(), 3);
        assert_eq!(q.ranks(), &[2, 0, 2, 1]);
    }

    #[test]
    fn between_basics() {
        let q = on_cyclic(3, &[0, 1, 2]);
        assert_eq!(q.between(1, 1, 1), Some(true));
        assert_eq!(q.strictly_between(0, 1, 2), Some(true));
        assert_eq!(q.strictly_between(1, 0, 1), Some(false));
        assert_eq!(q.strictly_between(1, 1, 1), Some(false));
    }

    #[test]
    fn min_max() {
        let q = on_cyclic(4, &[0, 1, 1, 2]);
        assert_eq!(q.max_of(&[1, 2]), vec![1, 2]);
        assert_eq!(q.min_of(&[1, 2]), vec![1, 2]);
        assert_eq!(q.max_of(&[]), Vec::<usize>::new());
    }

    #[test]
    fn endpoints_of_three_levels() {
        let q = on_cyclic(3, &[0, 1, 2]);
        let c = q.classify_strict_convex(&[0, 2]);
        assert_eq!(c.case, ConvexCase::NotStrictlyConvex);
        assert_eq!(c.witness, Some((0, 1, 2)));
        assert!(q.convexity_complement(&[0, 2]).is_err());
        assert_eq!(
            q.classify_strict_convex(&[0, 1, 2]).case,
            ConvexCase::Convex
        );
    }

    #[test]
    fn coarsen_all_is_trivial() {
        let q = on_cyclic(4, &[0, 1, 2, 3]);
        let t = q.coarsen(&[(0, 1), (1, 2), (2, 3)]).unwrap();
        assert_eq!(t.levels(), 1);
        assert!(q.is_coarsening(&t));
        assert!(!t.is_coarsening(&q));
        assert!(q.is_coarsening(&q));
        assert!(q.coarsen(&[(0, 2)]).is_err());
    }

    #[test]
    fn element_lookup_outside_window_is_domain_error() {
        let c = Arc::new(
            Carrier::new(
                Group::free_abelian(1).unwrap(),
                WindowPolicy::new(1, 2).unwrap(),
            )
            .unwrap(),
        );
        let q = QuasiOrder::trivial(c);
        assert!(q.leq_el(&Element::int(0), &Element::int(9)).is_err());
        assert_eq!(q.leq_el(&Element::int(0), &Element::int(2)), Ok(true));
    }

    #[test]
    fn from_leq_rejects_non_preorder() {
        let c = Arc::new(make_cyclic(3).unwrap());
        assert!(QuasiOrder::from_leq(c.clone(), |_| true, |a, b| a != b || a == 0).is_err());
        let q = QuasiOrder::from_leq(c, |_| true, |a, b| a % 2 <= b % 2).unwrap();
        assert_eq!(q.ranks(), &[0, 1, 0]);
    }

    proptest! {
        #[test]
        fn strict_convexity_matches_brute_force(
            n in 1usize..=12,
            raw in proptest::collection::vec(0u64..5, 12),
            mask in 0u32..4096,
        ) {
            let q = on_cyclic(n, &raw[..n]);
            let s: Vec<usize> = (0..n).filter(|i| mask >> i & 1 == 1).collect();
            let c = q.classify_strict_convex(&s);
            prop_assert_eq!(c.case != ConvexCase::NotStrictlyConvex, brute_strict(&q, &s));
            if c.case != ConvexCase::NotStrictlyConvex {
                prop_assert!(brute_convex_with(&q, &s, &c.complement));
                for drop in &c.complement {
                    let smaller: Vec<usize> = c.complement.iter().copied().filter(|x| x != drop).collect();
                    prop_assert!(!brute_convex_with(&q, &s, &smaller));
                }
            } else {
                let (a, b, t) = c.witness.unwrap();
                prop_assert!(q.lt(a, b).unwrap() && q.lt(b, t).unwrap() && !s.contains(&b));
            }
            if q.is_left_convex(&s) || q.is_right_convex(&s) {
                prop_assert!(q.is_strictly_convex(&s));
            }
            if q.is_convex(&s) {
                prop_assert_eq!(c.case, ConvexCase::Convex);
            }
            if q.is_initial_segment(&s) {
                prop_assert!(q.is_strictly_convex(&s));
            }
        }

        #[test]
        fn totality_and_transitivity(n in 1usize..=10, raw in proptest::collection::vec(0u64..4, 10)) {
            let q = on_cyclic(n, &raw[..n]);
            for a in 0..n {
                for b in 0..n {
                    prop_assert!(q.leq(a, b).unwrap() || q.leq(b, a).unwrap());
                    for c in 0..n {
                        if q.leq(a, b).unwrap() && q.leq(b, c).unwrap() {
                            prop_assert!(q.leq(a, c).unwrap());
                        }
                    }
                }
            }
        }
    }
}
