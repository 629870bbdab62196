//! Type-components, the subgroups below and around them, quotients, lifting,
//! welding and the decomposition of a C-quasi-order into elementary pieces.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::carrier::{Carrier, CarrierKind, Group};
use crate::classify::{
    check_cqo_axioms, element_type, elementary_kind, ElementType, ElementaryKind, ElementaryTag,
};
use crate::crel::{qo_from_crel, CRelation, Valuation, Value};
use crate::error::{domain, internal, invalid, Error, Result};
use crate::qorder::{ConvexCase, QuasiOrder};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ComponentKind {
    VComponent,
    OComponent,
    IdentityComponent,
}

/// A type-component. All element sets are term-universe indices, increasing.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TypeComponent {
    pub anchor: usize,
    pub kind: ComponentKind,
    pub members: Vec<usize>,
    /// `(T+, T-)` for o-type components.
    pub split: Option<(Vec<usize>, Vec<usize>)>,
    /// Elements welded to the component's edge. For o-type components: the
    /// class of the o-minus part minus the component (all v-type). For v-type
    /// components: the o-minus elements equivalent to the component's maximum.
    pub fringe: Vec<usize>,
}

impl TypeComponent {
    pub fn contains(&self, g: usize) -> bool {
        self.members.binary_search(&g).is_ok()
    }

    /// Members inside the eval universe.
    pub fn eval_members(&self, c: &Carrier) -> Vec<usize> {
        self.members
            .iter()
            .copied()
            .filter(|&g| c.is_eval(g))
            .collect()
    }
}

/// Per-level type summary over the ranked term universe.
struct Profile {
    types: Vec<Option<ElementType>>,
    levels: Vec<Vec<usize>>,
    has_plus: Vec<bool>,
    only_plus: Vec<bool>,
}

impl Profile {
    fn new(q: &QuasiOrder) -> Profile {
        let n = q.carrier().size();
        let types: Vec<Option<ElementType>> = (0..n).map(|g| element_type(q, g)).collect();
        let mut levels = vec![Vec::new(); q.levels() as usize];
        for g in 0..n {
            if let Some(r) = q.rank(g) {
                levels[r as usize].push(g);
            }
        }
        let is_plus = |g: &usize| types[*g] == Some(ElementType::OPlus);
        let has_plus = levels.iter().map(|l| l.iter().any(is_plus)).collect();
        let only_plus = levels
            .iter()
            .map(|l| !l.is_empty() && l.iter().all(is_plus))
            .collect();
        Profile {
            types,
            levels,
            has_plus,
            only_plus,
        }
    }

    /// Maximal run of levels around `r` on which `ok` holds (always contains `r`).
    fn run(&self, r: usize, ok: &[bool]) -> (usize, usize) {
        let (mut lo, mut hi) = (r, r);
        while lo > 0 && ok[lo - 1] {
            lo -= 1;
        }
        while hi + 1 < ok.len() && ok[hi + 1] {
            hi += 1;
        }
        (lo, hi)
    }
}

fn component_in(q: &QuasiOrder, p: &Profile, g: usize) -> Result<TypeComponent> {
    let c = q.carrier();
    let Some(t) = p.types[g] else {
        return domain(format!("{} is outside the ranked window", c.label(g)));
    };
    match t {
        ElementType::Identity => Ok(TypeComponent {
            anchor: g,
            kind: ComponentKind::IdentityComponent,
            members: vec![g],
            split: None,
            fringe: Vec::new(),
        }),
        ElementType::VType => {
            let no_plus: Vec<bool> = p.has_plus.iter().map(|&b| !b).collect();
            let (lo, hi) = p.run(q.ranks()[g] as usize, &no_plus);
            let mut members: Vec<usize> = p.levels[lo..=hi]
                .iter()
                .flatten()
                .copied()
                .filter(|&h| p.types[h] == Some(ElementType::VType))
                .collect();
            members.sort_unstable();
            let top = members
                .iter()
                .map(|&h| q.ranks()[h])
                .max()
                .expect("anchor is a member");
            let mut fringe: Vec<usize> = p.levels[top as usize]
                .iter()
                .copied()
                .filter(|&h| p.types[h] == Some(ElementType::OMinus))
                .collect();
            fringe.sort_unstable();
            Ok(TypeComponent {
                anchor: g,
                kind: ComponentKind::VComponent,
                members,
                split: None,
                fringe,
            })
        }
        ElementType::OPlus | ElementType::OMinus => {
            let a = if t == ElementType::OPlus { g } else { c.inv(g) };
            let (lo, hi) = p.run(q.ranks()[a] as usize, &p.only_plus);
            let mut plus: Vec<usize> = p.levels[lo..=hi]
                .iter()
                .flatten()
                .copied()
                .filter(|&h| p.types[h] == Some(ElementType::OPlus))
                .collect();
            plus.sort_unstable();
            let mut minus: Vec<usize> = plus.iter().map(|&h| c.inv(h)).collect();
            minus.sort_unstable();
            let mut members: Vec<usize> = plus.iter().chain(&minus).copied().collect();
            members.sort_unstable();
            let below = q.ranks()[c.inv(a)] as usize;
            let mut fringe: Vec<usize> = p.levels[below]
                .iter()
                .copied()
                .filter(|h| minus.binary_search(h).is_err())
                .collect();
            fringe.sort_unstable();
            Ok(TypeComponent {
                anchor: g,
                kind: ComponentKind::OComponent,
                members,
                split: Some((plus, minus)),
                fringe,
            })
        }
    }
}

/// The type-component of `g`. Betweenness is quantified over the ranked term universe.
pub fn type_component(q: &QuasiOrder, g: usize) -> Result<TypeComponent> {
    component_in(q, &Profile::new(q), g)
}

/// Type-components of each listed element, computed from one shared level profile.
pub fn type_components(q: &QuasiOrder, elements: &[usize]) -> Result<Vec<TypeComponent>> {
    let p = Profile::new(q);
    elements.iter().map(|&g| component_in(q, &p, g)).collect()
}

/// Result of the window checks on a candidate subgroup pair.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubgroupCheck {
    pub lower_closed: bool,
    pub upper_closed: bool,
    pub lower_normal: bool,
    /// Instances skipped because a product left the term universe.
    pub skipped: u64,
    pub window_incomplete: bool,
    /// First genuine violation, as element labels.
    pub violation: Option<Vec<String>>,
}

impl SubgroupCheck {
    pub fn holds(&self) -> bool {
        self.lower_closed && self.upper_closed && self.lower_normal
    }
}

/// `G_g` (lower) and `G^g` (upper) as membership vectors over the term universe.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SubgroupPair {
    pub lower: Vec<bool>,
    pub upper: Vec<bool>,
    pub check: SubgroupCheck,
}

impl SubgroupPair {
    pub fn lower_members(&self) -> Vec<usize> {
        members_of(&self.lower)
    }

    pub fn upper_members(&self) -> Vec<usize> {
        members_of(&self.upper)
    }
}

fn members_of(set: &[bool]) -> Vec<usize> {
    (0..set.len()).filter(|&i| set[i]).collect()
}

/// `G_g` for an o-type component whose o-minus class has rank `t`: `{h | h, h^-1 <= g^-1}`.
fn lower_below(q: &QuasiOrder, t: u32) -> Vec<bool> {
    let c = q.carrier();
    (0..c.size())
        .map(|h| matches!((q.rank(h), q.rank(c.inv(h))), (Some(a), Some(b)) if a <= t && b <= t))
        .collect()
}

/// `(G_g, G^g)` of a component as membership vectors over the term universe, without window checks.
pub fn subgroups_in(q: &QuasiOrder, t: &TypeComponent) -> (Vec<bool>, Vec<bool>) {
    let c = q.carrier();
    let n = c.size();
    let lower = match t.kind {
        ComponentKind::IdentityComponent => (0..n).map(|h| h == c.id()).collect(),
        ComponentKind::VComponent => {
            let lo = t
                .members
                .iter()
                .map(|&h| q.ranks()[h])
                .min()
                .expect("nonempty component");
            (0..n).map(|h| q.rank(h).is_some_and(|r| r < lo)).collect()
        }
        ComponentKind::OComponent => {
            let (_, minus) = t.split.as_ref().expect("o-type split");
            lower_below(q, q.ranks()[minus[0]])
        }
    };
    let mut upper = lower.clone();
    for &m in &t.members {
        upper[m] = true;
    }
    (lower, upper)
}

/// Window checks: both sets closed under `a b^-1`, lower normal in upper.
/// Products that leave the term universe or are unranked by `q` are skipped.
pub fn check_subgroups(q: &QuasiOrder, lower: &[bool], upper: &[bool]) -> SubgroupCheck {
    let c = &**q.carrier();
    let low: Vec<usize> = c.eval().iter().copied().filter(|&i| lower[i]).collect();
    let up: Vec<usize> = c.eval().iter().copied().filter(|&i| upper[i]).collect();
    let closure = |set: &[usize], mem: &[bool]| -> (u64, Option<Vec<usize>>) {
        let found: Vec<(u64, Option<Vec<usize>>)> = set
            .par_iter()
            .map(|&a| {
                let mut skipped = 0;
                for &b in set {
                    match c.div(a, b).filter(|&d| q.is_ranked(d)) {
                        None => skipped += 1,
                        Some(d) if !mem[d] => return (skipped, Some(vec![a, b, d])),
                        _ => {}
                    }
                }
                (skipped, None)
            })
            .collect();
        let skipped = found.iter().map(|f| f.0).sum();
        (skipped, found.into_iter().find_map(|f| f.1))
    };
    let (s1, v1) = closure(&low, lower);
    let (s2, v2) = closure(&up, upper);
    let norm: Vec<(u64, Option<Vec<usize>>)> = low
        .par_iter()
        .map(|&x| {
            let mut skipped = 0;
            for &z in &up {
                match c.conj(x, z).filter(|&y| q.is_ranked(y)) {
                    None => skipped += 1,
                    Some(y) if !lower[y] => return (skipped, Some(vec![x, z, y])),
                    _ => {}
                }
            }
            (skipped, None)
        })
        .collect();
    let s3: u64 = norm.iter().map(|f| f.0).sum();
    let v3 = norm.into_iter().find_map(|f| f.1);
    let skipped = s1 + s2 + s3;
    SubgroupCheck {
        lower_closed: v1.is_none(),
        upper_closed: v2.is_none(),
        lower_normal: v3.is_none(),
        skipped,
        window_incomplete: skipped > 0,
        violation: v1.or(v2).or(v3).map(|v| c.labels(&v)),
    }
}

/// `G_g` and `G^g = G_g ∪ T_g`, with window checks.
pub fn component_subgroups(q: &QuasiOrder, g: usize) -> Result<SubgroupPair> {
    let t = type_component(q, g)?;
    let (lower, upper) = subgroups_in(q, &t);
    let check = check_subgroups(q, &lower, &upper);
    Ok(SubgroupPair {
        lower,
        upper,
        check,
    })
}

/// One component per cell, in order of least member; covers every typed element.
pub fn components_partition(q: &QuasiOrder) -> Result<Vec<TypeComponent>> {
    let p = Profile::new(q);
    let n = q.carrier().size();
    let mut owner = vec![usize::MAX; n];
    let mut out: Vec<TypeComponent> = Vec::new();
    for g in 0..n {
        if p.types[g].is_none() || owner[g] != usize::MAX {
            continue;
        }
        let t = component_in(q, &p, g)?;
        if !t.contains(g) {
            return internal(format!(
                "{} is missing from its own component",
                q.carrier().label(g)
            ));
        }
        for &m in &t.members {
            if owner[m] != usize::MAX {
                return internal(format!(
                    "components of {} and {} overlap at {}",
                    q.carrier().label(out[owner[m]].anchor),
                    q.carrier().label(g),
                    q.carrier().label(m)
                ));
            }
            owner[m] = out.len();
        }
        out.push(t);
    }
    Ok(out)
}

fn rank_span(q: &QuasiOrder, t: &TypeComponent) -> (u32, u32) {
    let rs = t.members.iter().map(|&h| q.ranks()[h]);
    (
        rs.clone().min().expect("nonempty"),
        rs.max().expect("nonempty"),
    )
}

/// `T_g <= T_h` iff they are equal or every member of `T_g` is `<=` every member of `T_h`.
pub fn component_leq(q: &QuasiOrder, a: &TypeComponent, b: &TypeComponent) -> bool {
    a.members == b.members || rank_span(q, a).1 <= rank_span(q, b).0
}

/// Indices of `components` in ascending component order; fails if two are incomparable.
pub fn component_order(q: &QuasiOrder, components: &[TypeComponent]) -> Result<Vec<usize>> {
    let spans: Vec<(u32, u32)> = components.iter().map(|t| rank_span(q, t)).collect();
    let mut idx: Vec<usize> = (0..components.len()).collect();
    idx.sort_by_key(|&i| spans[i]);
    for w in idx.windows(2) {
        if spans[w[0]].1 > spans[w[1]].0 {
            return internal(format!(
                "components of {} and {} are incomparable",
                q.carrier().label(components[w[0]].anchor),
                q.carrier().label(components[w[1]].anchor)
            ));
        }
    }
    Ok(idx)
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
struct GammaKey {
    index: u32,
    label: String,
}

impl fmt::Display for GammaKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label)
    }
}

/// The type-valuation with its value set: `components[γ]` is the fiber of `Fin(γ)`,
/// listed in ascending Γ order (descending component order); the identity
/// component, valued ∞, comes last.
#[derive(Clone, Debug)]
pub struct TypeValuation {
    pub valuation: Valuation,
    pub components: Vec<TypeComponent>,
}

impl TypeValuation {
    pub fn gamma_len(&self) -> usize {
        self.components.len().saturating_sub(1)
    }
}

pub fn type_valuation(q: &QuasiOrder) -> Result<TypeValuation> {
    let c = q.carrier().clone();
    let comps = components_partition(q)?;
    let asc = component_order(q, &comps)?;
    let mut ordered: Vec<TypeComponent> = asc.iter().rev().map(|&i| comps[i].clone()).collect();
    match ordered.last() {
        Some(t) if t.kind == ComponentKind::IdentityComponent => {}
        _ => return internal("identity component is not the least component"),
    }
    let gammas = ordered.len() - 1;
    let mut owner: Vec<Option<usize>> = vec![None; c.size()];
    for (k, t) in ordered.iter().enumerate() {
        for &m in &t.members {
            owner[m] = Some(k);
        }
    }
    let labels: Vec<String> = ordered
        .iter()
        .map(|t| format!("T{}", c.label(t.anchor)))
        .collect();
    let valuation = Valuation::from_key_fn(c.clone(), |i| {
        let k = owner[i]?;
        Some((k < gammas).then(|| GammaKey {
            index: k as u32,
            label: labels[k].clone(),
        }))
    });
    ordered.shrink_to_fit();
    Ok(TypeValuation {
        valuation,
        components: ordered,
    })
}

/// Coset carrier of `upper / lower` over the eval members of `upper`, with enumeration-least representatives.
pub fn section_carrier(
    parent: &Arc<Carrier>,
    upper: &[bool],
    lower: &[bool],
) -> Result<Arc<Carrier>> {
    Ok(Arc::new(Carrier::quotient(
        parent,
        upper.to_vec(),
        lower.to_vec(),
    )?))
}

/// Quotient quasi-order on `upper / lower`:
/// `gH <= hH` iff `g` in `H`, or `h` not in `H` and `g <= h`.
pub fn section_qo(q: &QuasiOrder, upper: &[bool], lower: &[bool]) -> Result<QuasiOrder> {
    let c = q.carrier();
    let n = c.size();
    if upper.len() != n || lower.len() != n {
        return invalid("membership vectors must cover the term universe");
    }
    if let Some(i) = (0..n).find(|&i| lower[i] && !upper[i]) {
        return invalid(format!(
            "{} lies in the subgroup but not in the ambient set",
            c.label(i)
        ));
    }
    let check = check_subgroups(q, lower, upper);
    if !check.holds() {
        return domain(format!(
            "not a normal subgroup pair: violation at {:?}",
            check.violation.unwrap_or_default()
        ));
    }
    let inside = q.restrict(|i| upper[i]);
    let sub: Vec<usize> = inside.scope().into_iter().filter(|&i| lower[i]).collect();
    let cls = inside.classify_strict_convex(&sub);
    if cls.case == ConvexCase::NotStrictlyConvex {
        let (s, a, t) = cls.witness.expect("witness present");
        return domain(format!(
            "subgroup is not strictly convex: {} < {} < {}",
            c.label(s),
            c.label(a),
            c.label(t)
        ));
    }
    let qc = section_carrier(c, upper, lower)?;
    let (_, reps) = qc.quotient_parts().expect("coset carrier");
    for &m in inside.scope().iter() {
        if lower[m] {
            continue;
        }
        let k = qc.class_of_parent(m).expect("eval member has a coset");
        if q.rank(m) != q.rank(reps[k]) {
            return domain(format!(
                "coset of {} is not inside one class ({} differs)",
                c.label(reps[k]),
                c.label(m)
            ));
        }
    }
    let reps = reps.to_vec();
    QuasiOrder::from_key_fn(qc, |k| {
        let r = reps[k];
        if lower[r] {
            Some((0u8, 0u32))
        } else {
            q.rank(r).map(|x| (1, x))
        }
    })
}

/// Quotient by a strictly convex normal subgroup given as a membership vector.
pub fn quotient_qo(q: &QuasiOrder, subgroup: &[bool]) -> Result<QuasiOrder> {
    let upper: Vec<bool> = (0..q.carrier().size()).map(|i| q.is_ranked(i)).collect();
    section_qo(q, &upper, subgroup)
}

/// Coset carrier `G^γ / G_γ` of a valuation.
pub fn fiber_carrier(v: &Valuation, gamma: u32) -> Result<Arc<Carrier>> {
    if gamma as usize >= v.gamma_len() {
        return domain(format!("value index {gamma} is outside the value set"));
    }
    section_carrier(v.carrier(), &v.upper(gamma), &v.lower(gamma))
}

fn fiber_rank(fibers: &[QuasiOrder], gamma: u32, g: usize) -> Option<u32> {
    let f = &fibers[gamma as usize];
    f.rank(f.carrier().class_of_parent(g)?)
}

fn lift_unchecked(v: &Valuation, fibers: &[QuasiOrder]) -> Result<QuasiOrder> {
    QuasiOrder::from_key_fn(v.carrier().clone(), |g| match v.value(g)? {
        Value::Inf => Some((std::cmp::Reverse(Value::Inf), 0)),
        Value::Fin(y) => Some((std::cmp::Reverse(Value::Fin(y)), fiber_rank(fibers, y, g)?)),
    })
}

fn check_fibers(v: &Valuation, fibers: &[QuasiOrder]) -> Result<()> {
    if fibers.len() != v.gamma_len() {
        return invalid(format!(
            "expected {} fiber quasi-orders, got {}",
            v.gamma_len(),
            fibers.len()
        ));
    }
    for (y, f) in fibers.iter().enumerate() {
        match f.carrier().quotient_parts() {
            Some((p, _)) if Arc::ptr_eq(p, v.carrier()) => {}
            _ => {
                return invalid(format!(
                    "fiber {y} is not a coset carrier of the valuation's carrier"
                ))
            }
        }
    }
    Ok(())
}

/// Lifting: `g <= h` iff `v(g) > v(h)`, or `v(g) = v(h) = γ` and `g G_γ <= h G_γ`.
/// `fibers[γ]` lives on `fiber_carrier(v, γ)`. Each fiber must be a C-quasi-order and
/// conjugation must carry fibers onto fibers order-preservingly (checked on the window).
pub fn lift(v: &Valuation, fibers: &[QuasiOrder]) -> Result<QuasiOrder> {
    check_fibers(v, fibers)?;
    for (y, f) in fibers.iter().enumerate() {
        if let Some(e) = check_cqo_axioms(f).first_failure() {
            return domain(format!(
                "fiber {y} is not a C-quasi-order: {} fails at {:?}",
                e.name, e.counterexample_labels
            ));
        }
    }
    let c = v.carrier();
    let dom: Vec<usize> = c
        .eval()
        .iter()
        .copied()
        .filter(|&g| matches!(v.value(g), Some(Value::Fin(_))))
        .collect();
    let bad = dom.par_iter().find_map_first(|&z| {
        for &x in &dom {
            let Some(Value::Fin(y)) = v.value(x) else {
                continue;
            };
            let Some(xz) = c.conj(x, z) else { continue };
            let Some(Value::Fin(yz)) = v.value(xz) else {
                continue;
            };
            for &w in &dom {
                if v.value(w) != Some(Value::Fin(y)) {
                    continue;
                }
                let Some(wz) = c.conj(w, z) else { continue };
                let before = fiber_rank(fibers, y, x)
                    .zip(fiber_rank(fibers, y, w))
                    .map(|(a, b)| a <= b);
                let after = fiber_rank(fibers, yz, xz)
                    .zip(fiber_rank(fibers, yz, wz))
                    .map(|(a, b)| a <= b);
                if let (Some(a), Some(b)) = (before, after) {
                    if a != b {
                        return Some((z, y, x, w));
                    }
                }
            }
        }
        None
    });
    if let Some((z, y, x, w)) = bad {
        return domain(format!(
            "conjugation by {} does not preserve the fiber order at value {}: pair ({}, {})",
            c.label(z),
            v.gamma_label(y),
            c.label(x),
            c.label(w)
        ));
    }
    lift_unchecked(v, fibers)
}

/// C-quasi-order on a semidirect product from quasi-orders on its factors:
/// `(g1,h1) <= (g2,h2)` iff `g1 <= g2` and (`g2 != 1` or `h1 <= h2`).
pub fn semidirect_lift(
    carrier: Arc<Carrier>,
    left: &QuasiOrder,
    right: &QuasiOrder,
) -> Result<QuasiOrder> {
    let Some(Group::Semidirect { action, .. }) = carrier.group() else {
        return invalid("semidirect lifting needs a semidirect carrier");
    };
    for (name, f) in [("left", left), ("right", right)] {
        if let Some(e) = check_cqo_axioms(f).first_failure() {
            return domain(format!(
                "{name} factor is not a C-quasi-order: {} fails at {:?}",
                e.name, e.counterexample_labels
            ));
        }
    }
    let (lc, rc) = (left.carrier(), right.carrier());
    let hs = right.scope();
    let bad = left.scope().par_iter().find_map_first(|&g| {
        let ge = lc.element(g);
        let moved: Vec<Option<usize>> = hs
            .iter()
            .map(|&h| rc.index_of(&action.apply(&ge, &rc.element(h))))
            .collect();
        for (i, &h1) in hs.iter().enumerate() {
            for (j, &h2) in hs.iter().enumerate() {
                let (Some(a), Some(b)) = (moved[i], moved[j]) else {
                    continue;
                };
                if let (Some(x), Some(y)) = (right.leq(h1, h2), right.leq(a, b)) {
                    if x != y {
                        return Some((g, h1, h2));
                    }
                }
            }
        }
        None
    });
    if let Some((g, h1, h2)) = bad {
        return domain(format!(
            "action of {} does not preserve the right quasi-order at ({}, {})",
            lc.label(g),
            rc.label(h1),
            rc.label(h2)
        ));
    }
    let c = carrier.clone();
    let lid = lc.id();
    QuasiOrder::from_key_fn(carrier, |i| {
        let crate::carrier::Element::Pair(g, h) = c.element(i) else {
            return None;
        };
        let gi = lc.index_of(&g)?;
        if gi == lid {
            Some((0, right.rank(rc.index_of(&h)?)?))
        } else {
            Some((left.rank(gi)?, 0))
        }
    })
}

/// Welding at an o-minus element `g`: merges the class of each conjugate `g^z`
/// (`z` in the eval universe) with the maximum of `G_{g^z}`.
pub fn weld(q: &QuasiOrder, g: usize) -> Result<QuasiOrder> {
    let c = q.carrier();
    if element_type(q, g) != Some(ElementType::OMinus) {
        return domain(format!("{} is not o-minus type", c.label(g)));
    }
    let id_rank = q.rank(c.id()).expect("identity is ranked");
    let mut merges = BTreeSet::new();
    for &z in c.eval() {
        let Some(gz) = c.conj(g, z) else { continue };
        let Some(t) = q.rank(gz) else { continue };
        let lower = lower_below(q, t);
        let top = (0..c.size())
            .filter(|&h| lower[h])
            .map(|h| q.ranks()[h])
            .max()
            .expect("identity is below");
        if top == id_rank {
            return domain(format!(
                "the maximum of the subgroup below {} is trivial",
                c.label(gz)
            ));
        }
        if top == t {
            continue;
        }
        // A genuine maximum of G_g consists of v-type elements; an o-type top class is a window edge.
        if let Some(h) = (0..c.size()).find(|&h| {
            lower[h] && q.ranks()[h] == top && element_type(q, h) != Some(ElementType::VType)
        }) {
            return domain(format!(
                "the subgroup below {} has no maximum: its top class in the window holds {}, which is not v-type",
                c.label(gz),
                c.label(h)
            ));
        }
        if top + 1 != t {
            return domain(format!(
                "classes of {} and of the maximum below it are not adjacent",
                c.label(gz)
            ));
        }
        merges.insert((top, t));
    }
    let merges: Vec<(u32, u32)> = merges.into_iter().collect();
    q.coarsen(&merges)
}

/// One quotient of the decomposition.
#[derive(Clone, Debug)]
pub struct Fiber {
    pub gamma: u32,
    pub qo: QuasiOrder,
    pub kind: ElementaryKind,
}

/// A merge of two adjacent classes of the plain lift: `minus` is o-minus type,
/// `max` is v-type and maximal in `G_minus`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Weld {
    pub minus: usize,
    pub max: usize,
}

#[derive(Clone, Debug)]
pub struct Decomposition {
    pub type_valuation: TypeValuation,
    pub fibers: Vec<Fiber>,
    pub welds: Vec<Weld>,
}

impl Decomposition {
    pub fn valuation(&self) -> &Valuation {
        &self.type_valuation.valuation
    }

    /// Consecutive values whose fibers are both valuational.
    pub fn adjacent_valuational(&self) -> Option<(u32, u32)> {
        self.fibers
            .windows(2)
            .find(|w| w.iter().all(|f| f.kind.tag == ElementaryTag::Valuational))
            .map(|w| (w[0].gamma, w[1].gamma))
    }

    pub fn report(&self) -> DecompositionReport {
        let v = self.valuation();
        let c = v.carrier();
        let gammas = self.type_valuation.gamma_len();
        let components = self
            .type_valuation
            .components
            .iter()
            .enumerate()
            .map(|(k, t)| ComponentReport {
                gamma: (k < gammas).then_some(k as u32),
                anchor: c.label(t.anchor),
                kind: t.kind,
                size: t.members.len(),
                members: c.labels(&t.eval_members(c)),
            })
            .collect();
        let fibers = self
            .fibers
            .iter()
            .map(|f| {
                let fc = f.qo.carrier();
                let order = f.kind.order.as_ref().map(|o| {
                    let mut s = o.qo().scope();
                    s.sort_by_key(|&k| o.qo().ranks()[k]);
                    fc.labels(&s)
                });
                let valuation = f.kind.valuation.as_ref().map(|w| {
                    fc.eval()
                        .iter()
                        .filter_map(|&k| Some((fc.label(k), w.value_label(w.value(k)?))))
                        .collect()
                });
                FiberReport {
                    gamma: f.gamma,
                    carrier_kind: fc.kind(),
                    cosets: fc.size(),
                    levels: f.qo.levels(),
                    elementary: f.kind.tag,
                    ranks: (0..fc.size())
                        .filter_map(|k| Some((fc.label(k), f.qo.rank(k)?)))
                        .collect(),
                    order,
                    valuation,
                }
            })
            .collect();
        let welds = self
            .welds
            .iter()
            .map(|w| WeldReport {
                minus: c.label(w.minus),
                max: c.label(w.max),
            })
            .collect();
        let type_valuation = (0..c.size())
            .filter_map(|i| {
                let val = v.value(i)?;
                Some(ValueEntry {
                    element: c.label(i),
                    gamma: match val {
                        Value::Fin(y) => Some(y),
                        Value::Inf => None,
                    },
                })
            })
            .collect();
        DecompositionReport {
            components,
            fibers,
            welded: !self.welds.is_empty(),
            welds,
            type_valuation,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComponentReport {
    /// `None` for the identity component (value ∞).
    pub gamma: Option<u32>,
    pub anchor: String,
    pub kind: ComponentKind,
    /// Member count over the term universe.
    pub size: usize,
    /// Members inside the eval universe.
    pub members: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FiberReport {
    pub gamma: u32,
    pub carrier_kind: CarrierKind,
    pub cosets: usize,
    pub levels: u32,
    pub elementary: ElementaryTag,
    /// Rank of each ranked coset of the term universe, keyed by the coset label.
    pub ranks: Vec<(String, u32)>,
    /// Extracted total order (ascending) for order-type fibers.
    pub order: Option<Vec<String>>,
    /// Extracted valuation for valuational fibers.
    pub valuation: Option<Vec<(String, String)>>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct WeldReport {
    pub minus: String,
    pub max: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValueEntry {
    pub element: String,
    /// `None` stands for ∞.
    pub gamma: Option<u32>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecompositionReport {
    /// Ascending value order; the identity component comes last.
    pub components: Vec<ComponentReport>,
    pub fibers: Vec<FiberReport>,
    pub welds: Vec<WeldReport>,
    pub welded: bool,
    /// Type-valuation on the whole term universe.
    pub type_valuation: Vec<ValueEntry>,
}

/// Type-valuation, elementary quotients and the welds separating `q` from the plain lift.
pub fn decompose(q: &QuasiOrder) -> Result<Decomposition> {
    if let Some(e) = check_cqo_axioms(q).first_failure() {
        return domain(format!(
            "not a C-quasi-order: {} fails at {:?}",
            e.name, e.counterexample_labels
        ));
    }
    let c = q.carrier();
    let tv = type_valuation(q)?;
    let v = &tv.valuation;
    let fibers: Vec<Fiber> = (0..v.gamma_len() as u32)
        .into_par_iter()
        .map(|y| {
            let qo = section_qo(q, &v.upper(y), &v.lower(y)).map_err(|e| {
                Error::Internal(format!("quotient at {} failed: {e}", v.gamma_label(y)))
            })?;
            let kind = elementary_kind(&qo);
            if kind.tag == ElementaryTag::Neither {
                return internal(format!(
                    "quotient at {} is of neither elementary type",
                    v.gamma_label(y)
                ));
            }
            Ok(Fiber { gamma: y, qo, kind })
        })
        .collect::<Result<_>>()?;
    let qos: Vec<QuasiOrder> = fibers.iter().map(|f| f.qo.clone()).collect();
    let lifted = lift_unchecked(v, &qos)?;
    if !lifted.is_coarsening(q) {
        return internal("input is not a coarsening of the plain lift");
    }
    let levels = lifted.scope_levels();
    let mut welds = Vec::new();
    for w in levels.windows(2) {
        let (below, above) = (&w[0], &w[1]);
        if q.sim(below[0], above[0]) != Some(true) {
            continue;
        }
        for &g in above {
            if element_type(q, g) != Some(ElementType::OMinus) {
                return internal(format!(
                    "merged class of {} is not o-minus type",
                    c.label(g)
                ));
            }
            let lower = lower_below(q, q.ranks()[g]);
            let inside: Vec<usize> = lifted.scope().into_iter().filter(|&h| lower[h]).collect();
            if lifted.max_of(&inside) != *below {
                return internal(format!(
                    "merge at {} does not reach the maximum below it",
                    c.label(g)
                ));
            }
        }
        if let Some(&h) = below
            .iter()
            .find(|&&h| element_type(q, h) != Some(ElementType::VType))
        {
            return internal(format!(
                "element {} welded below an o-minus class is not v-type",
                c.label(h)
            ));
        }
        welds.push(Weld {
            minus: above[0],
            max: below[0],
        });
    }
    let d = Decomposition {
        type_valuation: tv,
        fibers,
        welds,
    };
    let back = reconstruct(&d)?;
    if let Some((a, b)) = back.first_difference(q) {
        return internal(format!(
            "reconstruction differs at ({}, {})",
            c.label(a),
            c.label(b)
        ));
    }
    Ok(d)
}

/// Lift of the fibers over the valuation, then the welds.
pub fn reconstruct_parts(
    v: &Valuation,
    fibers: &[QuasiOrder],
    welds: &[Weld],
) -> Result<QuasiOrder> {
    check_fibers(v, fibers)?;
    let lifted = lift_unchecked(v, fibers)?;
    let c = v.carrier();
    let mut merges = Vec::with_capacity(welds.len());
    for w in welds {
        match (lifted.rank(w.max), lifted.rank(w.minus)) {
            (Some(a), Some(b)) if a + 1 == b => merges.push((a, b)),
            _ => {
                return invalid(format!(
                    "weld ({}, {}) does not join adjacent classes of the lift",
                    c.label(w.minus),
                    c.label(w.max)
                ))
            }
        }
    }
    lifted.coarsen(&merges)
}

pub fn reconstruct(d: &Decomposition) -> Result<QuasiOrder> {
    let qos: Vec<QuasiOrder> = d.fibers.iter().map(|f| f.qo.clone()).collect();
    reconstruct_parts(d.valuation(), &qos, &d.welds)
}

/// Rebuilds the quasi-order described by a serialized decomposition on `carrier`.
pub fn reconstruct_report(carrier: Arc<Carrier>, r: &DecompositionReport) -> Result<QuasiOrder> {
    let index: HashMap<String, usize> =
        (0..carrier.size()).map(|i| (carrier.label(i), i)).collect();
    let find = |s: &str| {
        index
            .get(s)
            .copied()
            .ok_or_else(|| Error::InvalidParameter(format!("unknown element {s}")))
    };
    let mut values: Vec<Option<Option<u32>>> = vec![None; carrier.size()];
    for e in &r.type_valuation {
        values[find(&e.element)?] = Some(e.gamma);
    }
    let v = Valuation::from_key_fn(carrier.clone(), |i| values[i]);
    if v.gamma_len() != r.fibers.len() {
        return invalid(format!(
            "{} values but {} fibers",
            v.gamma_len(),
            r.fibers.len()
        ));
    }
    let mut fibers = Vec::with_capacity(r.fibers.len());
    for (y, f) in r.fibers.iter().enumerate() {
        if f.gamma as usize != y {
            return invalid("fibers must be listed in value order");
        }
        let fc = fiber_carrier(&v, f.gamma)?;
        let ranks: HashMap<&str, u32> = f.ranks.iter().map(|(l, k)| (l.as_str(), *k)).collect();
        let labels: Vec<String> = (0..fc.size()).map(|k| fc.label(k)).collect();
        fibers.push(QuasiOrder::from_key_fn(fc, |k| {
            ranks.get(labels[k].as_str()).copied()
        })?);
    }
    let welds = r
        .welds
        .iter()
        .map(|w| {
            Ok(Weld {
                minus: find(&w.minus)?,
                max: find(&w.max)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    reconstruct_parts(&v, &fibers, &welds)
}

/// Relation induced on `G^γ / G_γ` of the type-valuation:
/// `C_γ(fG, gG, hG)` iff `f h^-1` not in `G_γ` and (`g h^-1` in `G_γ` or `C(f, g, h)`).
pub fn quotient_crel(rel: &CRelation, gamma: u32) -> Result<CRelation> {
    let q = qo_from_crel(rel)?;
    let tv = type_valuation(&q)?;
    let v = &tv.valuation;
    if gamma as usize >= v.gamma_len() {
        return domain(format!("value index {gamma} is outside the value set"));
    }
    let lower = v.lower(gamma);
    let qc = section_carrier(v.carrier(), &v.upper(gamma), &lower)?;
    let (parent, reps) = qc.quotient_parts().expect("coset carrier");
    let (parent, reps) = (parent.clone(), reps.to_vec());
    let rel = rel.clone();
    Ok(CRelation::from_fn(qc, move |a, b, k| {
        let (f, g, h) = (reps[a], reps[b], reps[k]);
        if lower[parent.div(f, h)?] {
            return Some(false);
        }
        if lower[parent.div(g, h)?] {
            return Some(true);
        }
        rel.holds(f, g, h)
    }))
}
