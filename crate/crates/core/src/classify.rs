//! C-quasi-order axioms, element types, welding, elementary-type recognition
//! and the bridge from compatible quasi-orders on abelian groups.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::crel::{check_og, implies, sweep, AxiomReport, Valuation};
use crate::error::{domain, invalid, Result};
use crate::qorder::{QuasiOrder, TotalOrder};

/// Checks CQ1-CQ3 in their one-directional forms on the scope.
pub fn check_cqo_axioms(q: &QuasiOrder) -> AxiomReport {
    let c = &**q.carrier();
    let dom = q.scope();
    let id = c.id();
    let mut r = AxiomReport::default();
    r.push(
        c,
        "CQ1",
        sweep::<1, _>(&dom, |[x]| if x == id { Some(true) } else { q.lt(id, x) }),
    );
    r.push(
        c,
        "CQ2",
        sweep::<2, _>(&dom, |[x, y]| {
            implies(q.leq(x, y), || q.leq(c.div(x, y)?, c.inv(y)))
        }),
    );
    r.push(
        c,
        "CQ3",
        sweep::<3, _>(&dom, |[x, y, z]| {
            implies(q.leq(x, y), || q.leq(c.conj(x, z)?, c.conj(y, z)?))
        }),
    );
    r
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ElementType {
    Identity,
    VType,
    OPlus,
    OMinus,
}

impl ElementType {
    pub fn is_o(self) -> bool {
        matches!(self, ElementType::OPlus | ElementType::OMinus)
    }

    pub fn is_v(self) -> bool {
        self == ElementType::VType
    }
}

/// Type of `g`; `None` when `g` or its inverse is unranked.
pub fn element_type(q: &QuasiOrder, g: usize) -> Option<ElementType> {
    let c = q.carrier();
    if g == c.id() {
        return q.is_ranked(g).then_some(ElementType::Identity);
    }
    let (a, b) = (q.rank(g)?, q.rank(c.inv(g))?);
    Some(match a.cmp(&b) {
        std::cmp::Ordering::Equal => ElementType::VType,
        std::cmp::Ordering::Greater => ElementType::OPlus,
        std::cmp::Ordering::Less => ElementType::OMinus,
    })
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TypeReport {
    /// Type per term-universe element.
    pub types: Vec<Option<ElementType>>,
    /// Scope elements equivalent to a typed element of the other kind (v versus o).
    pub welding_points: Vec<usize>,
    pub is_welded: bool,
}

impl TypeReport {
    pub fn of(&self, g: usize) -> Option<ElementType> {
        self.types[g]
    }
}

pub fn type_report(q: &QuasiOrder) -> TypeReport {
    let c = q.carrier();
    let types: Vec<Option<ElementType>> = (0..c.size()).map(|g| element_type(q, g)).collect();
    let levels = q.levels() as usize;
    let (mut has_v, mut has_o) = (vec![false; levels], vec![false; levels]);
    for (g, t) in types.iter().enumerate() {
        match t {
            Some(ElementType::VType) => has_v[q.ranks()[g] as usize] = true,
            Some(ElementType::OPlus | ElementType::OMinus) => has_o[q.ranks()[g] as usize] = true,
            _ => {}
        }
    }
    let welding_points: Vec<usize> = q
        .scope()
        .into_iter()
        .filter(|&h| {
            let r = q.ranks()[h] as usize;
            match types[h] {
                Some(ElementType::VType) => has_o[r],
                Some(t) if t.is_o() => has_v[r],
                _ => false,
            }
        })
        .collect();
    let is_welded = !welding_points.is_empty();
    TypeReport {
        types,
        welding_points,
        is_welded,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ElementaryTag {
    Valuational,
    OrderType,
    Neither,
}

#[derive(Clone, Debug)]
pub struct ElementaryKind {
    pub tag: ElementaryTag,
    pub valuation: Option<Valuation>,
    pub order: Option<TotalOrder>,
}

fn tag_of(q: &QuasiOrder) -> ElementaryTag {
    let scope = q.scope();
    let types: Vec<ElementType> = scope.iter().filter_map(|&g| element_type(q, g)).collect();
    if types
        .iter()
        .all(|t| matches!(t, ElementType::Identity | ElementType::VType))
    {
        return ElementaryTag::Valuational;
    }
    if types.iter().any(|t| t.is_v()) {
        return ElementaryTag::Neither;
    }
    let mut minus_levels: Vec<u32> = scope
        .iter()
        .filter(|&&g| element_type(q, g) == Some(ElementType::OMinus))
        .map(|&g| q.ranks()[g])
        .collect();
    minus_levels.sort_unstable();
    minus_levels.dedup();
    if minus_levels.len() == 1 {
        ElementaryTag::OrderType
    } else {
        ElementaryTag::Neither
    }
}

pub fn elementary_kind(q: &QuasiOrder) -> ElementaryKind {
    let tag = tag_of(q);
    let valuation = (tag == ElementaryTag::Valuational).then(|| Valuation::from_levels(q));
    let order = if tag == ElementaryTag::OrderType {
        extract_order(q).ok()
    } else {
        None
    };
    ElementaryKind {
        tag,
        valuation,
        order,
    }
}

/// The total order of an order-type quasi-order: `G- < 1 < G+`, with `G+`
/// ordered as in `q` and `G-` ordered by reversed inverses.
pub fn extract_order(q: &QuasiOrder) -> Result<TotalOrder> {
    if tag_of(q) != ElementaryTag::OrderType && q.scope().len() > 1 {
        return domain("quasi-order is not order-type");
    }
    let c = q.carrier().clone();
    let key = |g: usize| -> Option<(u8, i64)> {
        Some(match element_type(q, g)? {
            ElementType::Identity => (1, 0),
            ElementType::OPlus => (2, i64::from(q.rank(g)?)),
            ElementType::OMinus => (0, -i64::from(q.rank(c.inv(g))?)),
            ElementType::VType => return None,
        })
    };
    TotalOrder::from_key_fn(c.clone(), key)
        .or_else(|e| domain(format!("order extraction failed: {e}")))
}

/// Valuation whose induced quasi-order is `q`.
pub fn extract_valuation(q: &QuasiOrder) -> Result<Valuation> {
    if tag_of(q) != ElementaryTag::Valuational {
        return domain("quasi-order is not valuational");
    }
    Ok(Valuation::from_levels(q))
}

/// Order-type C-quasi-order of an ordered group: `1 < (G-, trivial) < (G+, <=)`.
pub fn order_cqo_from_order(order: &TotalOrder) -> Result<QuasiOrder> {
    let og = check_og(order);
    if let Some(e) = og.first_failure() {
        return invalid(format!(
            "order is not a group order: fails at {:?}",
            e.counterexample_labels
        ));
    }
    let c = order.carrier().clone();
    let id = c.id();
    let rid = order
        .qo()
        .rank(id)
        .ok_or_else(|| crate::Error::InvalidParameter("identity is unranked".into()))?;
    QuasiOrder::from_key_fn(c, |g| {
        let r = order.qo().rank(g)?;
        Some(if g == id {
            (0, 0)
        } else if r < rid {
            (1, 0)
        } else {
            (2, r)
        })
    })
}

/// `gh <= max(g, h)` for all `g, h` in `t` whose product is in the window.
pub fn is_valuational_like(q: &QuasiOrder, t: &[usize]) -> bool {
    let c = q.carrier();
    t.iter().all(|&g| {
        t.iter().all(|&h| {
            let m = if q.leq(g, h) == Some(true) { h } else { g };
            c.mul(g, h).and_then(|p| q.leq(p, m)).unwrap_or(true)
        })
    })
}

/// `t` splits into o-plus part `T+` and `T- = (T+)^-1` with `T- < T+` and `T-` a single class.
pub fn is_order_type_like(q: &QuasiOrder, t: &[usize]) -> bool {
    let c = q.carrier();
    let mut plus = Vec::new();
    let mut minus = Vec::new();
    for &g in t {
        match element_type(q, g) {
            Some(ElementType::OPlus) => plus.push(g),
            Some(ElementType::OMinus) => minus.push(g),
            _ => return false,
        }
    }
    let mut inv_plus: Vec<usize> = plus.iter().map(|&g| c.inv(g)).collect();
    inv_plus.sort_unstable();
    minus.sort_unstable();
    if inv_plus != minus {
        return false;
    }
    let all_below = minus
        .iter()
        .all(|&m| plus.iter().all(|&p| q.lt(m, p) == Some(true)));
    let flat = minus.windows(2).all(|w| q.sim(w[0], w[1]) == Some(true));
    all_below && flat
}

/// Checks Q1 (`x ~ 0 => x = 0`) and Q2 (`x <= y, y !~ z => x + z <= y + z`).
pub fn check_compatible_qo_axioms(q: &QuasiOrder) -> Result<AxiomReport> {
    let c = &**q.carrier();
    if !c.is_abelian() {
        return domain("compatible quasi-orders are defined on abelian groups");
    }
    let dom = q.scope();
    let id = c.id();
    let mut r = AxiomReport::default();
    r.push(
        c,
        "Q1",
        sweep::<1, _>(&dom, |[x]| implies(q.sim(x, id), || Some(x == id))),
    );
    r.push(
        c,
        "Q2",
        sweep::<3, _>(&dom, |[x, y, z]| {
            let pre = Some(q.leq(x, y)? && !q.sim(y, z)?);
            implies(pre, || q.leq(c.mul(x, z)?, c.mul(y, z)?))
        }),
    );
    Ok(r)
}

/// Turns a compatible quasi-order into a C-quasi-order: the order-type
/// C-quasi-order on the o-type part, the original quasi-order on the v-type
/// part, o-type part strictly below v-type part, identity alone at the bottom.
pub fn cqo_from_compatible_qo(q: &QuasiOrder) -> Result<QuasiOrder> {
    let report = check_compatible_qo_axioms(q)?;
    if let Some(e) = report.first_failure() {
        return invalid(format!(
            "not a compatible quasi-order: {} fails at {:?}",
            e.name, e.counterexample_labels
        ));
    }
    let c: Arc<_> = q.carrier().clone();
    let id = c.id();
    QuasiOrder::from_key_fn(c.clone(), |g| {
        let r = q.rank(g)?;
        Some(match element_type(q, g)? {
            ElementType::Identity => (0, 0),
            ElementType::OMinus => (1, 0),
            ElementType::OPlus => (2, r),
            ElementType::VType => {
                debug_assert_ne!(g, id);
                (3, r)
            }
        })
    })
}
