//! Exact group arithmetic and finite windows over it.
//!
//! A [`Group`] knows how to multiply payloads exactly. A [`Carrier`] is a
//! finite window of a group: a term universe (everything within the term
//! radius) containing an eval universe (everything within the eval radius).
//! Quantifiers range over the eval universe; a formula instance is checkable
//! only when all of its subterms land in the term universe.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::sync::atomic::{AtomicU32, Ordering};
use std::sync::Arc;

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

pub type Int = BigInt;

/// Group element payload. Equality and ordering are structural; the derived
/// ordering is the enumeration order used everywhere.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Element {
    /// Index into a multiplication table.
    Idx(usize),
    /// Integer vector of a free abelian group.
    Vec(Vec<Int>),
    /// Finitely supported coefficient sequence; identity coefficients are never stored.
    Seq(BTreeMap<Int, Element>),
    /// Semidirect product pair (left, right).
    Pair(Box<Element>, Box<Element>),
}

impl Element {
    pub fn vec<I: Into<Int>>(coords: impl IntoIterator<Item = I>) -> Element {
        Element::Vec(coords.into_iter().map(Into::into).collect())
    }

    pub fn int(k: impl Into<Int>) -> Element {
        Element::Vec(vec![k.into()])
    }

    pub fn seq<I: Into<Int>>(terms: impl IntoIterator<Item = (I, Element)>) -> Element {
        Element::Seq(terms.into_iter().map(|(i, c)| (i.into(), c)).collect())
    }

    pub fn pair(left: Element, right: Element) -> Element {
        Element::Pair(Box::new(left), Box::new(right))
    }

    pub fn coords(&self) -> Option<&[Int]> {
        match self {
            Element::Vec(v) => Some(v),
            _ => None,
        }
    }
}

impl fmt::Display for Element {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Element::Idx(i) => write!(f, "{i}"),
            Element::Vec(v) if v.len() == 1 => write!(f, "{}", v[0]),
            Element::Vec(v) => {
                write!(f, "(")?;
                for (k, c) in v.iter().enumerate() {
                    if k > 0 {
                        write!(f, ",")?;
                    }
                    write!(f, "{c}")?;
                }
                write!(f, ")")
            }
            Element::Seq(m) if m.is_empty() => write!(f, "0"),
            Element::Seq(m) => {
                for (k, (i, c)) in m.iter().enumerate() {
                    if k > 0 {
                        write!(f, "+")?;
                    }
                    write!(f, "{c}t{i}")?;
                }
                Ok(())
            }
            Element::Pair(a, b) => write!(f, "<{a}|{b}>"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CarrierKind {
    Table,
    Cyclic,
    FreeAbelian,
    HahnWindow,
    Semidirect,
    Quotient,
}

/// Finite group given by its multiplication table.
#[derive(Debug)]
pub struct TableGroup {
    name: String,
    n: usize,
    mul: Vec<usize>,
    inv: Vec<usize>,
    id: usize,
    cyclic: bool,
    abelian: bool,
}

impl TableGroup {
    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn order(&self) -> usize {
        self.n
    }

    pub fn rows(&self) -> Vec<Vec<usize>> {
        self.mul.chunks(self.n).map(|r| r.to_vec()).collect()
    }
}

pub type ActionFn = dyn Fn(&Element, &Element) -> Element + Send + Sync;

/// Automorphism family used to build a semidirect product.
#[derive(Clone)]
pub enum Action {
    Identity,
    /// `k` moves the coefficient at index `n` to index `n + k`.
    Shift,
    Custom(Arc<ActionFn>),
}

impl fmt::Debug for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Action::Identity => write!(f, "Identity"),
            Action::Shift => write!(f, "Shift"),
            Action::Custom(_) => write!(f, "Custom"),
        }
    }
}

/// Exact group arithmetic on payloads.
#[derive(Clone, Debug)]
pub enum Group {
    Table(Arc<TableGroup>),
    FreeAbelian {
        rank: usize,
    },
    Hahn {
        index_set: Vec<Int>,
        base: Box<Group>,
    },
    Semidirect {
        left: Box<Group>,
        right: Box<Group>,
        action: Action,
    },
}

impl Group {
    pub fn cyclic(n: usize) -> Result<Group> {
        if n == 0 {
            return invalid("cyclic group order must be at least 1");
        }
        let mul = (0..n * n).map(|k| (k / n + k % n) % n).collect();
        let inv = (0..n).map(|i| (n - i) % n).collect();
        Ok(Group::Table(Arc::new(TableGroup {
            name: format!("Z{n}"),
            n,
            mul,
            inv,
            id: 0,
            cyclic: true,
            abelian: true,
        })))
    }

    /// Builds a group from a full multiplication table, verifying the group axioms.
    pub fn table(name: impl Into<String>, rows: &[Vec<usize>]) -> Result<Group> {
        let n = rows.len();
        if n == 0 {
            return invalid("empty multiplication table");
        }
        if rows
            .iter()
            .any(|r| r.len() != n || r.iter().any(|&x| x >= n))
        {
            return invalid("multiplication table must be square with entries below its order");
        }
        let mul: Vec<usize> = rows.iter().flatten().copied().collect();
        let at = |a: usize, b: usize| mul[a * n + b];
        let id = match (0..n).find(|&e| (0..n).all(|x| at(e, x) == x && at(x, e) == x)) {
            Some(e) => e,
            None => return invalid("table has no two-sided identity"),
        };
        let mut inv = vec![0; n];
        for (x, slot) in inv.iter_mut().enumerate() {
            match (0..n).find(|&y| at(x, y) == id && at(y, x) == id) {
                Some(y) => *slot = y,
                None => return invalid(format!("element {x} has no inverse")),
            }
        }
        for a in 0..n {
            for b in 0..n {
                for c in 0..n {
                    if at(at(a, b), c) != at(a, at(b, c)) {
                        return invalid(format!("table is not associative at ({a},{b},{c})"));
                    }
                }
            }
        }
        let abelian = (0..n).all(|a| (0..n).all(|b| at(a, b) == at(b, a)));
        Ok(Group::Table(Arc::new(TableGroup {
            name: name.into(),
            n,
            mul,
            inv,
            id,
            cyclic: false,
            abelian,
        })))
    }

    /// Direct product of two table groups, indexed as `i * |b| + j`.
    pub fn table_product(a: &Group, b: &Group) -> Result<Group> {
        let (Group::Table(ta), Group::Table(tb)) = (a, b) else {
            return invalid("table_product needs two table groups");
        };
        let (na, nb) = (ta.n, tb.n);
        let rows: Vec<Vec<usize>> = (0..na * nb)
            .map(|x| {
                (0..na * nb)
                    .map(|y| ta.mul[(x / nb) * na + y / nb] * nb + tb.mul[(x % nb) * nb + y % nb])
                    .collect()
            })
            .collect();
        Group::table(format!("{}x{}", ta.name, tb.name), &rows)
    }

    /// Symmetric group on three letters; permutations listed lexicographically.
    pub fn symmetric3() -> Group {
        let perms: Vec<[usize; 3]> = vec![
            [0, 1, 2],
            [0, 2, 1],
            [1, 0, 2],
            [1, 2, 0],
            [2, 0, 1],
            [2, 1, 0],
        ];
        let pos = |p: [usize; 3]| perms.iter().position(|q| *q == p).unwrap();
        let rows: Vec<Vec<usize>> = perms
            .iter()
            .map(|p| {
                perms
                    .iter()
                    .map(|q| pos([p[q[0]], p[q[1]], p[q[2]]]))
                    .collect()
            })
            .collect();
        Group::table("S3", &rows).expect("S3 table is a group")
    }

    pub fn free_abelian(rank: usize) -> Result<Group> {
        if rank == 0 {
            return invalid("free abelian rank must be at least 1");
        }
        Ok(Group::FreeAbelian { rank })
    }

    pub fn hahn(index_set: &[Int], base: Group) -> Result<Group> {
        if !base.is_abelian() {
            return invalid("Hahn sum needs an abelian base group");
        }
        let index_set: Vec<Int> = index_set
            .iter()
            .cloned()
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        Ok(Group::Hahn {
            index_set,
            base: Box::new(base),
        })
    }

    pub fn semidirect(left: Group, right: Group, action: Action) -> Result<Group> {
        match &action {
            Action::Identity => {}
            Action::Shift => {
                if !matches!(left, Group::FreeAbelian { rank: 1 })
                    || !matches!(right, Group::Hahn { .. })
                {
                    return invalid("shift action needs left = Z and right = a Hahn sum");
                }
            }
            Action::Custom(f) => verify_action(&left, &right, f.as_ref())?,
        }
        Ok(Group::Semidirect {
            left: Box::new(left),
            right: Box::new(right),
            action,
        })
    }

    pub fn kind(&self) -> CarrierKind {
        match self {
            Group::Table(t) if t.cyclic => CarrierKind::Cyclic,
            Group::Table(_) => CarrierKind::Table,
            Group::FreeAbelian { .. } => CarrierKind::FreeAbelian,
            Group::Hahn { .. } => CarrierKind::HahnWindow,
            Group::Semidirect { .. } => CarrierKind::Semidirect,
        }
    }

    pub fn is_abelian(&self) -> bool {
        match self {
            Group::Table(t) => t.abelian,
            Group::FreeAbelian { .. } | Group::Hahn { .. } => true,
            Group::Semidirect {
                left,
                right,
                action,
            } => matches!(action, Action::Identity) && left.is_abelian() && right.is_abelian(),
        }
    }

    pub fn id(&self) -> Element {
        match self {
            Group::Table(t) => Element::Idx(t.id),
            Group::FreeAbelian { rank } => Element::Vec(vec![Int::zero(); *rank]),
            Group::Hahn { .. } => Element::Seq(BTreeMap::new()),
            Group::Semidirect { left, right, .. } => Element::pair(left.id(), right.id()),
        }
    }

    /// Whether the payload is a valid element of this group.
    pub fn contains(&self, e: &Element) -> bool {
        match (self, e) {
            (Group::Table(t), Element::Idx(i)) => *i < t.n,
            (Group::FreeAbelian { rank }, Element::Vec(v)) => v.len() == *rank,
            (Group::Hahn { base, .. }, Element::Seq(m)) => {
                let id = base.id();
                m.values().all(|c| base.contains(c) && *c != id)
            }
            (Group::Semidirect { left, right, .. }, Element::Pair(a, b)) => {
                left.contains(a) && right.contains(b)
            }
            _ => false,
        }
    }

    pub fn op(&self, a: &Element, b: &Element) -> Element {
        match (self, a, b) {
            (Group::Table(t), Element::Idx(x), Element::Idx(y)) => Element::Idx(t.mul[x * t.n + y]),
            (Group::FreeAbelian { .. }, Element::Vec(x), Element::Vec(y)) => {
                Element::Vec(x.iter().zip(y).map(|(p, q)| p + q).collect())
            }
            (Group::Hahn { base, .. }, Element::Seq(x), Element::Seq(y)) => {
                let id = base.id();
                let mut out = x.clone();
                for (i, c) in y {
                    let cur = out.remove(i).unwrap_or_else(|| id.clone());
                    let v = base.op(&cur, c);
                    if v != id {
                        out.insert(i.clone(), v);
                    }
                }
                Element::Seq(out)
            }
            (
                Group::Semidirect {
                    left,
                    right,
                    action,
                },
                Element::Pair(g1, h1),
                Element::Pair(g2, h2),
            ) => {
                let moved = action.apply(g1, h2);
                Element::pair(left.op(g1, g2), right.op(h1, &moved))
            }
            _ => panic!("payload does not belong to this group: {a} * {b}"),
        }
    }

    pub fn inv(&self, a: &Element) -> Element {
        match (self, a) {
            (Group::Table(t), Element::Idx(x)) => Element::Idx(t.inv[*x]),
            (Group::FreeAbelian { .. }, Element::Vec(x)) => {
                Element::Vec(x.iter().map(|p| -p).collect())
            }
            (Group::Hahn { base, .. }, Element::Seq(x)) => {
                Element::Seq(x.iter().map(|(i, c)| (i.clone(), base.inv(c))).collect())
            }
            (
                Group::Semidirect {
                    left,
                    right,
                    action,
                },
                Element::Pair(g, h),
            ) => {
                let gi = left.inv(g);
                let hi = action.apply(&gi, &right.inv(h));
                Element::pair(gi, hi)
            }
            _ => panic!("payload does not belong to this group: {a}"),
        }
    }

    /// `z * g * z^-1`.
    pub fn conjugate(&self, g: &Element, z: &Element) -> Element {
        self.op(&self.op(z, g), &self.inv(z))
    }

    /// Support minimum of a Hahn element; `None` stands for the identity (infinite value).
    pub fn support_min(&self, e: &Element) -> Option<Int> {
        match e {
            Element::Seq(m) => m.keys().next().cloned(),
            _ => None,
        }
    }

    /// Size of a payload for window purposes; `None` when a Hahn support leaves the index set.
    pub fn norm(&self, e: &Element) -> Option<Int> {
        match (self, e) {
            (Group::Table(t), Element::Idx(i)) => {
                Some(if *i == t.id { Int::zero() } else { Int::one() })
            }
            (Group::FreeAbelian { .. }, Element::Vec(v)) => {
                Some(v.iter().map(|c| c.abs()).max().unwrap_or_default())
            }
            (Group::Hahn { index_set, base }, Element::Seq(m)) => {
                let mut total = Int::zero();
                for (i, c) in m {
                    if index_set.binary_search(i).is_err() {
                        return None;
                    }
                    total += base.norm(c)?;
                }
                Some(total)
            }
            (Group::Semidirect { left, right, .. }, Element::Pair(g, h)) => {
                Some(left.norm(g)?.max(right.norm(h)?))
            }
            _ => None,
        }
    }

    pub fn in_window(&self, e: &Element, radius: u64) -> bool {
        match (self, e) {
            (Group::Table(t), Element::Idx(i)) => *i < t.n,
            // Both `h` and the right part of the inverse must fit, so windows are inverse-closed.
            (
                Group::Semidirect {
                    left,
                    right,
                    action,
                },
                Element::Pair(g, h),
            ) => {
                left.in_window(g, radius)
                    && right.in_window(h, radius)
                    && right.in_window(&action.apply(&left.inv(g), h), radius)
            }
            _ => self.norm(e).is_some_and(|n| n <= Int::from(radius)),
        }
    }

    /// All elements within the radius, in enumeration order.
    pub fn universe(&self, radius: u64) -> Vec<Element> {
        let mut out = match self {
            Group::Table(t) => (0..t.n).map(Element::Idx).collect(),
            Group::FreeAbelian { rank } => {
                let r = radius as i64;
                let mut acc: Vec<Vec<Int>> = vec![vec![]];
                for _ in 0..*rank {
                    acc = acc
                        .into_iter()
                        .flat_map(|p| {
                            (-r..=r).map(move |c| {
                                let mut q = p.clone();
                                q.push(Int::from(c));
                                q
                            })
                        })
                        .collect();
                }
                acc.into_iter().map(Element::Vec).collect()
            }
            Group::Hahn { index_set, base } => {
                let id = base.id();
                let coeffs: Vec<(Element, Int)> = base
                    .universe(radius)
                    .into_iter()
                    .filter(|c| *c != id)
                    .map(|c| {
                        let n = base.norm(&c).unwrap_or_default();
                        (c, n)
                    })
                    .collect();
                let mut out = Vec::new();
                hahn_fill(
                    index_set,
                    0,
                    &coeffs,
                    Int::from(radius),
                    &mut BTreeMap::new(),
                    &mut out,
                );
                out
            }
            Group::Semidirect { left, right, .. } => {
                let ls = left.universe(radius);
                let rs = right.universe(radius);
                ls.iter()
                    .flat_map(|g| rs.iter().map(move |h| Element::pair(g.clone(), h.clone())))
                    .filter(|e| self.in_window(e, radius))
                    .collect()
            }
        };
        out.sort();
        out
    }
}

fn hahn_fill(
    index_set: &[Int],
    pos: usize,
    coeffs: &[(Element, Int)],
    budget: Int,
    cur: &mut BTreeMap<Int, Element>,
    out: &mut Vec<Element>,
) {
    if pos == index_set.len() {
        out.push(Element::Seq(cur.clone()));
        return;
    }
    hahn_fill(index_set, pos + 1, coeffs, budget.clone(), cur, out);
    for (c, n) in coeffs {
        if *n <= budget {
            cur.insert(index_set[pos].clone(), c.clone());
            hahn_fill(index_set, pos + 1, coeffs, &budget - n, cur, out);
            cur.remove(&index_set[pos]);
        }
    }
}

impl Action {
    pub fn apply(&self, g: &Element, h: &Element) -> Element {
        match self {
            Action::Identity => h.clone(),
            Action::Shift => match (g, h) {
                (Element::Vec(k), Element::Seq(m)) => {
                    Element::Seq(m.iter().map(|(i, c)| (i + &k[0], c.clone())).collect())
                }
                _ => panic!("shift action applied to {g} and {h}"),
            },
            Action::Custom(f) => f(g, h),
        }
    }
}

/// Checks a custom action on a small sample: homomorphism into Aut(right), bijectivity.
fn verify_action(left: &Group, right: &Group, f: &ActionFn) -> Result<()> {
    let gs = left.universe(1);
    let hs = right.universe(1);
    for g in &gs {
        let gi = left.inv(g);
        for h1 in &hs {
            let img = f(g, h1);
            if !right.contains(&img) {
                return invalid(format!("action of {g} sends {h1} outside the right group"));
            }
            if f(&gi, &img) != *h1 {
                return invalid(format!("action of {g} is not invertible at {h1}"));
            }
            for h2 in &hs {
                if f(g, &right.op(h1, h2)) != right.op(&img, &f(g, h2)) {
                    return invalid(format!(
                        "action of {g} is not a homomorphism at ({h1}, {h2})"
                    ));
                }
            }
            for g2 in &gs {
                if f(&left.op(g, g2), h1) != f(g, &f(g2, h1)) {
                    return invalid(format!(
                        "action is not multiplicative at ({g}, {g2}) on {h1}"
                    ));
                }
            }
        }
    }
    Ok(())
}

/// Radii of the eval universe and of the term universe.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowPolicy {
    pub eval_radius: u64,
    pub term_radius: u64,
}

impl WindowPolicy {
    pub fn new(eval_radius: u64, term_radius: u64) -> Result<WindowPolicy> {
        if term_radius < eval_radius {
            return invalid(format!(
                "term radius {term_radius} is below eval radius {eval_radius}"
            ));
        }
        Ok(WindowPolicy {
            eval_radius,
            term_radius,
        })
    }

    /// Term radius twice the eval radius.
    pub fn with_radius(eval_radius: u64) -> WindowPolicy {
        WindowPolicy {
            eval_radius,
            term_radius: 2 * eval_radius,
        }
    }
}

impl Default for WindowPolicy {
    fn default() -> Self {
        WindowPolicy::with_radius(4)
    }
}

/// True iff every term lies within the term radius; always true for table groups.
pub fn is_window_closed(group: &Group, terms: &[Element], policy: &WindowPolicy) -> bool {
    terms.iter().all(|t| group.in_window(t, policy.term_radius))
}

const CACHE_LIMIT: usize = 1 << 24;

struct MulCache(Vec<AtomicU32>);

impl MulCache {
    fn new(n: usize) -> MulCache {
        if n.saturating_mul(n) <= CACHE_LIMIT {
            MulCache(
                std::iter::repeat_with(|| AtomicU32::new(0))
                    .take(n * n)
                    .collect(),
            )
        } else {
            MulCache(Vec::new())
        }
    }
}

enum Backend {
    Group {
        group: Group,
        elems: Vec<Element>,
        index: HashMap<Element, usize>,
    },
    Quotient(QuotientData),
}

struct QuotientData {
    parent: Arc<Carrier>,
    reps: Vec<usize>,
    lower: Vec<bool>,
    upper: Vec<bool>,
    /// Parent-indexed class lookup: 0 unknown, 1 none, k + 2 class k.
    class_cache: Vec<AtomicU32>,
}

/// Finite window of a group: a term universe with an eval universe inside it,
/// and partial multiplication (products leaving the term universe are `None`).
pub struct Carrier {
    kind: CarrierKind,
    policy: WindowPolicy,
    backend: Backend,
    eval: Vec<usize>,
    in_eval: Vec<bool>,
    id: usize,
    inv: Vec<usize>,
    abelian: bool,
    cache: MulCache,
}

impl fmt::Debug for Carrier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Carrier")
            .field("kind", &self.kind)
            .field("policy", &self.policy)
            .field("size", &self.size())
            .field("eval_size", &self.eval.len())
            .finish()
    }
}

impl Carrier {
    pub fn new(group: Group, policy: WindowPolicy) -> Result<Carrier> {
        if policy.term_radius < policy.eval_radius {
            return invalid("term radius must be at least the eval radius");
        }
        let elems = group.universe(policy.term_radius);
        let index: HashMap<Element, usize> = elems
            .iter()
            .cloned()
            .enumerate()
            .map(|(i, e)| (e, i))
            .collect();
        let in_eval: Vec<bool> = elems
            .iter()
            .map(|e| group.in_window(e, policy.eval_radius))
            .collect();
        let eval = (0..elems.len()).filter(|&i| in_eval[i]).collect();
        let id = index[&group.id()];
        let mut inv = Vec::with_capacity(elems.len());
        for e in &elems {
            match index.get(&group.inv(e)) {
                Some(&j) => inv.push(j),
                None => return invalid(format!("window is not closed under inverses at {e}")),
            }
        }
        let n = elems.len();
        Ok(Carrier {
            kind: group.kind(),
            policy,
            abelian: group.is_abelian(),
            backend: Backend::Group {
                group,
                elems,
                index,
            },
            eval,
            in_eval,
            id,
            inv,
            cache: MulCache::new(n),
        })
    }

    /// Coset carrier `upper / lower` over the term-universe members of `upper`.
    /// Cosets are found by joining members `a, b` with `a b^-1` in `lower`; each
    /// coset is represented by its least eval member, or its least member when it
    /// misses the eval universe. The eval universe of the quotient is the cosets
    /// meeting the parent's eval universe.
    pub fn quotient(parent: &Arc<Carrier>, upper: Vec<bool>, lower: Vec<bool>) -> Result<Carrier> {
        let n = parent.size();
        if upper.len() != n || lower.len() != n {
            return invalid("membership vectors must cover the parent universe");
        }
        if !lower[parent.id] || !upper[parent.id] {
            return invalid("subgroups must contain the identity");
        }
        // Eval members first, so cosets meeting the eval universe get the low indices.
        let mut members: Vec<usize> = parent.eval.iter().copied().filter(|&i| upper[i]).collect();
        members.extend((0..n).filter(|&i| upper[i] && !parent.in_eval[i]));
        let mut uf: Vec<usize> = (0..members.len()).collect();
        fn find(uf: &mut [usize], mut x: usize) -> usize {
            while uf[x] != x {
                uf[x] = uf[uf[x]];
                x = uf[x];
            }
            x
        }
        for a in 0..members.len() {
            for b in a + 1..members.len() {
                if let Some(t) = parent.div(members[a], members[b]) {
                    if lower[t] {
                        let (ra, rb) = (find(&mut uf, a), find(&mut uf, b));
                        if ra != rb {
                            uf[ra.max(rb)] = ra.min(rb);
                        }
                    }
                }
            }
        }
        let mut class_of_member = vec![usize::MAX; members.len()];
        let mut reps = Vec::new();
        let mut root_class: HashMap<usize, usize> = HashMap::new();
        for m in 0..members.len() {
            let r = find(&mut uf, m);
            let c = *root_class.entry(r).or_insert_with(|| {
                reps.push(members[m]);
                reps.len() - 1
            });
            class_of_member[m] = c;
        }
        let class_cache: Vec<AtomicU32> = std::iter::repeat_with(|| AtomicU32::new(0))
            .take(n)
            .collect();
        for (m, &pi) in members.iter().enumerate() {
            class_cache[pi].store(class_of_member[m] as u32 + 2, Ordering::Relaxed);
        }
        let k = reps.len();
        let k_eval = reps.iter().filter(|&&r| parent.in_eval[r]).count();
        let data = QuotientData {
            parent: parent.clone(),
            reps,
            lower,
            upper,
            class_cache,
        };
        let id = data
            .class_of(parent.id)
            .expect("identity is an eval member");
        let mut inv = Vec::with_capacity(k);
        for c in 0..k {
            match data.class_of(parent.inv[data.reps[c]]) {
                Some(j) => inv.push(j),
                None => return invalid("coset inverses fall outside the window"),
            }
        }
        Ok(Carrier {
            kind: CarrierKind::Quotient,
            policy: parent.policy,
            abelian: parent.abelian,
            backend: Backend::Quotient(data),
            eval: (0..k_eval).collect(),
            in_eval: (0..k).map(|c| c < k_eval).collect(),
            id,
            inv,
            cache: MulCache::new(k),
        })
    }

    pub fn kind(&self) -> CarrierKind {
        self.kind
    }

    pub fn policy(&self) -> WindowPolicy {
        self.policy
    }

    pub fn is_abelian(&self) -> bool {
        self.abelian
    }

    /// Size of the term universe.
    pub fn size(&self) -> usize {
        self.inv.len()
    }

    /// Eval universe as increasing indices (enumeration order).
    pub fn eval(&self) -> &[usize] {
        &self.eval
    }

    pub fn is_eval(&self, i: usize) -> bool {
        self.in_eval[i]
    }

    pub fn id(&self) -> usize {
        self.id
    }

    pub fn inv(&self, a: usize) -> usize {
        self.inv[a]
    }

    pub fn group(&self) -> Option<&Group> {
        match &self.backend {
            Backend::Group { group, .. } => Some(group),
            Backend::Quotient(_) => None,
        }
    }

    /// Payload of an element; for coset carriers, the payload of the representative.
    pub fn element(&self, i: usize) -> Element {
        match &self.backend {
            Backend::Group { elems, .. } => elems[i].clone(),
            Backend::Quotient(q) => q.parent.element(q.reps[i]),
        }
    }

    pub fn index_of(&self, e: &Element) -> Option<usize> {
        match &self.backend {
            Backend::Group { index, .. } => index.get(e).copied(),
            Backend::Quotient(q) => q.class_of(q.parent.index_of(e)?),
        }
    }

    pub fn label(&self, i: usize) -> String {
        match &self.backend {
            Backend::Group { elems, .. } => elems[i].to_string(),
            Backend::Quotient(q) => format!("[{}]", q.parent.label(q.reps[i])),
        }
    }

    /// Parent carrier and coset representatives, for coset carriers.
    pub fn quotient_parts(&self) -> Option<(&Arc<Carrier>, &[usize])> {
        match &self.backend {
            Backend::Quotient(q) => Some((&q.parent, &q.reps)),
            Backend::Group { .. } => None,
        }
    }

    /// Coset of a parent element, when it can be decided inside the window.
    pub fn class_of_parent(&self, parent_index: usize) -> Option<usize> {
        match &self.backend {
            Backend::Quotient(q) => q.class_of(parent_index),
            Backend::Group { .. } => None,
        }
    }

    /// Product `a * b`, or `None` when it leaves the term universe.
    pub fn mul(&self, a: usize, b: usize) -> Option<usize> {
        let n = self.size();
        if let Some(slot) = self.cache.0.get(a * n + b) {
            match slot.load(Ordering::Relaxed) {
                0 => {}
                1 => return None,
                v => return Some(v as usize - 2),
            }
            let r = self.raw_mul(a, b);
            slot.store(r.map_or(1, |v| v as u32 + 2), Ordering::Relaxed);
            return r;
        }
        self.raw_mul(a, b)
    }

    fn raw_mul(&self, a: usize, b: usize) -> Option<usize> {
        match &self.backend {
            Backend::Group {
                group,
                elems,
                index,
            } => index.get(&group.op(&elems[a], &elems[b])).copied(),
            Backend::Quotient(q) => q.class_of(q.parent.mul(q.reps[a], q.reps[b])?),
        }
    }

    /// `a * b^-1`.
    pub fn div(&self, a: usize, b: usize) -> Option<usize> {
        self.mul(a, self.inv[b])
    }

    /// `z * g * z^-1`.
    pub fn conj(&self, g: usize, z: usize) -> Option<usize> {
        self.mul(self.mul(z, g)?, self.inv[z])
    }

    pub fn labels(&self, xs: &[usize]) -> Vec<String> {
        xs.iter().map(|&x| self.label(x)).collect()
    }
}

impl QuotientData {
    fn class_of(&self, p: usize) -> Option<usize> {
        match self.class_cache[p].load(Ordering::Relaxed) {
            0 => {}
            1 => return None,
            v => return Some(v as usize - 2),
        }
        let found = if self.upper[p] {
            self.reps
                .iter()
                .position(|&r| self.parent.div(p, r).is_some_and(|t| self.lower[t]))
        } else {
            None
        };
        self.class_cache[p].store(found.map_or(1, |c| c as u32 + 2), Ordering::Relaxed);
        found
    }
}

pub fn make_cyclic(n: usize) -> Result<Carrier> {
    Carrier::new(Group::cyclic(n)?, WindowPolicy::with_radius(1))
}

pub fn make_free_abelian(rank: usize, policy: WindowPolicy) -> Result<Carrier> {
    Carrier::new(Group::free_abelian(rank)?, policy)
}

pub fn make_hahn(index_set: &[Int], base: Group, policy: WindowPolicy) -> Result<Carrier> {
    Carrier::new(Group::hahn(index_set, base)?, policy)
}

pub fn make_semidirect(
    left: Group,
    right: Group,
    action: Action,
    policy: WindowPolicy,
) -> Result<Carrier> {
    Carrier::new(Group::semidirect(left, right, action)?, policy)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn z2() -> Group {
        Group::free_abelian(2).unwrap()
    }

    #[test]
    fn cyclic_arithmetic() {
        let g = Group::cyclic(6).unwrap();
        assert_eq!(g.op(&Element::Idx(2), &Element::Idx(5)), Element::Idx(1));
        let g4 = Group::cyclic(4).unwrap();
        assert_eq!(g4.inv(&Element::Idx(3)), Element::Idx(1));
        let c = make_cyclic(1).unwrap();
        assert_eq!(c.size(), 1);
        assert_eq!(c.element(0), Element::Idx(0));
        assert!(make_cyclic(0).is_err());
    }

    #[test]
    fn free_abelian_universe_and_sum() {
        let c = make_free_abelian(2, WindowPolicy::new(1, 1).unwrap()).unwrap();
        assert_eq!(c.size(), 9);
        assert_eq!(
            z2().op(&Element::vec([1, 0]), &Element::vec([0, 1])),
            Element::vec([1, 1])
        );
        let c5 = make_free_abelian(2, WindowPolicy::new(5, 5).unwrap()).unwrap();
        assert_eq!(c5.size(), (2 * 5 + 1) * (2 * 5 + 1));
        assert!(Group::free_abelian(0).is_err());
    }

    #[test]
    fn eval_inside_term_universe() {
        let c = make_free_abelian(2, WindowPolicy::new(2, 4).unwrap()).unwrap();
        assert_eq!(c.size(), 81);
        assert_eq!(c.eval().len(), 25);
        let a = c.index_of(&Element::vec([2, 2])).unwrap();
        let b = c.index_of(&Element::vec([-2, -2])).unwrap();
        assert_eq!(
            c.div(a, b).map(|i| c.element(i)),
            Some(Element::vec([4, 4]))
        );
        let far = c.index_of(&Element::vec([4, 0])).unwrap();
        assert_eq!(c.mul(far, far), None);
    }

    #[test]
    fn hahn_singleton_index_is_base_copy() {
        let h = Group::hahn(&[Int::from(0)], z2()).unwrap();
        let c = Carrier::new(h, WindowPolicy::new(1, 1).unwrap()).unwrap();
        assert_eq!(c.size(), 9);
    }

    #[test]
    fn hahn_support_min() {
        let h = Group::hahn(&[-2, -1, 0, 1, 2].map(Int::from), z2()).unwrap();
        let e = Element::seq([(-1, Element::vec([1, 0])), (2, Element::vec([0, 1]))]);
        assert_eq!(h.support_min(&e), Some(Int::from(-1)));
        assert_eq!(h.support_min(&h.id()), None);
    }

    #[test]
    fn hahn_needs_abelian_base() {
        assert!(Group::hahn(&[Int::from(0)], Group::symmetric3()).is_err());
    }

    #[test]
    fn shift_moves_index_up() {
        let h = Group::hahn(&[-2, -1, 0, 1, 2].map(Int::from), z2()).unwrap();
        let f = Group::semidirect(Group::free_abelian(1).unwrap(), h, Action::Shift).unwrap();
        let g0 = Element::seq([(0, Element::vec([1, 0]))]);
        let Group::Semidirect { action, .. } = &f else {
            unreachable!()
        };
        assert_eq!(
            action.apply(&Element::int(1), &g0),
            Element::seq([(1, Element::vec([1, 0]))])
        );
        let z = Element::pair(Element::int(-1), Element::seq::<i32>([]));
        let fe = Element::pair(Element::int(0), g0);
        let fz = f.conjugate(&fe, &z);
        assert_eq!(
            fz,
            Element::pair(Element::int(0), Element::seq([(-1, Element::vec([1, 0]))]))
        );
    }

    #[test]
    fn identity_action_is_direct_product() {
        let f = Group::semidirect(
            Group::cyclic(2).unwrap(),
            Group::cyclic(3).unwrap(),
            Action::Identity,
        )
        .unwrap();
        let a = Element::pair(Element::Idx(1), Element::Idx(2));
        let b = Element::pair(Element::Idx(1), Element::Idx(2));
        assert_eq!(
            f.op(&a, &b),
            Element::pair(Element::Idx(0), Element::Idx(1))
        );
        assert!(f.is_abelian());
    }

    #[test]
    fn bad_custom_action_rejected() {
        let bad: Arc<ActionFn> = Arc::new(|_g, h| match h {
            Element::Vec(v) => Element::Vec(v.iter().map(|c| c + 1).collect()),
            _ => h.clone(),
        });
        let r = Group::semidirect(
            Group::free_abelian(1).unwrap(),
            Group::free_abelian(1).unwrap(),
            Action::Custom(bad),
        );
        assert!(r.is_err());
    }

    #[test]
    fn window_closed_terms() {
        let g = z2();
        let p2 = WindowPolicy::new(2, 2).unwrap();
        assert!(!is_window_closed(&g, &[Element::vec([3, 0])], &p2));
        let p4 = WindowPolicy::new(2, 4).unwrap();
        assert!(is_window_closed(&g, &[Element::vec([3, 0])], &p4));
        assert!(is_window_closed(
            &Group::cyclic(5).unwrap(),
            &[Element::Idx(4)],
            &p2
        ));
    }

    #[test]
    fn s3_is_nonabelian() {
        let s = Group::symmetric3();
        assert!(!s.is_abelian());
        let c = Carrier::new(s, WindowPolicy::with_radius(1)).unwrap();
        assert_eq!(c.size(), 6);
    }

    #[test]
    fn quotient_of_z2_by_vertical_axis() {
        let c = Arc::new(make_free_abelian(2, WindowPolicy::new(2, 4).unwrap()).unwrap());
        let lower: Vec<bool> = (0..c.size())
            .map(|i| c.element(i).coords().unwrap()[0].is_zero())
            .collect();
        let q = Carrier::quotient(&c, vec![true; c.size()], lower).unwrap();
        assert_eq!((q.eval().len(), q.size()), (5, 9));
        let one = q.index_of(&Element::vec([1, 2])).unwrap();
        let two = q.mul(one, one).unwrap();
        assert_eq!(q.label(two), "[(2,-2)]");
        assert_eq!(q.label(q.inv(one)), "[(-1,-2)]");
    }
}
