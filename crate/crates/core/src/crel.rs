//! Ternary C-relations, group valuations, axiom sweeps and the conversions
//! between orders, valuations, C-relations and quasi-orders.

use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::carrier::Carrier;
use crate::classify::check_cqo_axioms;
use crate::error::{domain, invalid, Result};
use crate::qorder::{QuasiOrder, TotalOrder};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AxiomStatus {
    Holds,
    Fails,
    PartiallyChecked,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AxiomEntry {
    pub name: String,
    pub status: AxiomStatus,
    pub checked: u64,
    pub skipped: u64,
    /// Indices into the carrier's term universe.
    pub counterexample: Option<Vec<usize>>,
    pub counterexample_labels: Option<Vec<String>>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AxiomReport {
    pub entries: Vec<AxiomEntry>,
}

impl AxiomReport {
    /// No axiom fails (partially checked axioms count as holding).
    pub fn holds(&self) -> bool {
        self.entries.iter().all(|e| e.status != AxiomStatus::Fails)
    }

    pub fn get(&self, name: &str) -> Option<&AxiomEntry> {
        self.entries.iter().find(|e| e.name == name)
    }

    pub fn first_failure(&self) -> Option<&AxiomEntry> {
        self.entries.iter().find(|e| e.status == AxiomStatus::Fails)
    }

    pub fn push(&mut self, carrier: &Carrier, name: &str, s: Sweep) {
        let status = if s.counterexample.is_some() {
            AxiomStatus::Fails
        } else if s.skipped > 0 {
            AxiomStatus::PartiallyChecked
        } else {
            AxiomStatus::Holds
        };
        let labels = s.counterexample.as_ref().map(|c| carrier.labels(c));
        self.entries.push(AxiomEntry {
            name: name.to_string(),
            status,
            checked: s.checked,
            skipped: s.skipped,
            counterexample: s.counterexample,
            counterexample_labels: labels,
        });
    }

    pub fn extend(&mut self, other: AxiomReport) {
        self.entries.extend(other.entries);
    }
}

impl fmt::Display for AxiomReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for e in &self.entries {
            write!(
                f,
                "{:<24} {:?} checked={} skipped={}",
                e.name, e.status, e.checked, e.skipped
            )?;
            if let Some(l) = &e.counterexample_labels {
                write!(f, " counterexample=({})", l.join(", "))?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

/// Outcome of one exhaustive sweep.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Sweep {
    pub checked: u64,
    pub skipped: u64,
    pub counterexample: Option<Vec<usize>>,
}

/// Evaluates `f` on every `K`-tuple over `domain` in lexicographic order.
/// `f` returns `None` when the instance is not window-closed (skipped) and
/// `Some(false)` on a violation. Work is split over the first coordinate;
/// each slice stops at its first violation and the least violating tuple wins.
pub fn sweep<const K: usize, F>(domain: &[usize], f: F) -> Sweep
where
    F: Fn([usize; K]) -> Option<bool> + Sync,
{
    let m = domain.len();
    if K == 0 || m == 0 {
        return Sweep::default();
    }
    let parts: Vec<Sweep> = (0..m)
        .into_par_iter()
        .map(|first| {
            let mut pos = [0usize; K];
            pos[0] = first;
            let mut out = Sweep::default();
            loop {
                let t: [usize; K] = std::array::from_fn(|k| domain[pos[k]]);
                match f(t) {
                    Some(true) => out.checked += 1,
                    None => out.skipped += 1,
                    Some(false) => {
                        out.checked += 1;
                        out.counterexample = Some(t.to_vec());
                        return out;
                    }
                }
                let mut k = K - 1;
                loop {
                    if k == 0 {
                        return out;
                    }
                    pos[k] += 1;
                    if pos[k] < m {
                        break;
                    }
                    pos[k] = 0;
                    k -= 1;
                }
            }
        })
        .collect();
    let mut total = Sweep::default();
    for p in parts {
        total.checked += p.checked;
        total.skipped += p.skipped;
        if total.counterexample.is_none() && p.counterexample.is_some() {
            total.counterexample = p.counterexample;
            break;
        }
    }
    total
}

/// `a => b` where either side may be undetermined.
pub fn implies(a: Option<bool>, b: impl FnOnce() -> Option<bool>) -> Option<bool> {
    match a? {
        false => Some(true),
        true => b(),
    }
}

/// Value of a valuation: `Fin(i)` is the `i`-th point of Γ (ascending), `Inf` is ∞.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Value {
    Fin(u32),
    Inf,
}

/// Group valuation on a carrier window; elements outside the window are unvalued.
#[derive(Clone, Debug)]
pub struct Valuation {
    carrier: Arc<Carrier>,
    values: Vec<Option<Value>>,
    labels: Vec<String>,
}

impl Valuation {
    /// `key(i)` is `None` for unvalued elements, `Some(None)` for ∞ and
    /// `Some(Some(k))` for a finite value; Γ is the sorted set of keys seen.
    pub fn from_key_fn<K, F>(carrier: Arc<Carrier>, key: F) -> Valuation
    where
        K: Ord + fmt::Display + Send,
        F: Fn(usize) -> Option<Option<K>> + Sync,
    {
        let keys: Vec<Option<Option<K>>> = (0..carrier.size()).into_par_iter().map(&key).collect();
        let mut finite: Vec<&K> = keys.iter().filter_map(|k| k.as_ref()?.as_ref()).collect();
        finite.sort();
        finite.dedup();
        let labels = finite.iter().map(|k| k.to_string()).collect();
        let values = keys
            .iter()
            .map(|k| {
                k.as_ref().map(|k| match k {
                    None => Value::Inf,
                    Some(k) => Value::Fin(finite.binary_search(&k).expect("key present") as u32),
                })
            })
            .collect();
        Valuation {
            carrier,
            values,
            labels,
        }
    }

    /// The valuation whose induced quasi-order is `q`: Γ is the levels reversed and
    /// the identity's level maps to ∞. Meaningful only for valuational quasi-orders.
    pub fn from_levels(q: &QuasiOrder) -> Valuation {
        let id = q.carrier().id();
        let top = q.levels();
        let id_rank = q.rank(id);
        Valuation::from_key_fn(q.carrier().clone(), |i| {
            let r = q.rank(i)?;
            Some((Some(r) != id_rank).then_some(top - r))
        })
    }

    pub fn carrier(&self) -> &Arc<Carrier> {
        &self.carrier
    }

    pub fn value(&self, a: usize) -> Option<Value> {
        self.values[a]
    }

    pub fn values(&self) -> &[Option<Value>] {
        &self.values
    }

    /// Number of finite values.
    pub fn gamma_len(&self) -> usize {
        self.labels.len()
    }

    pub fn gamma_label(&self, g: u32) -> &str {
        &self.labels[g as usize]
    }

    pub fn value_label(&self, v: Value) -> String {
        match v {
            Value::Fin(g) => self.labels[g as usize].clone(),
            Value::Inf => "inf".into(),
        }
    }

    /// Membership in `G^γ = {v >= γ}` over the term universe.
    pub fn upper(&self, g: u32) -> Vec<bool> {
        self.values
            .iter()
            .map(|v| v.is_some_and(|v| v >= Value::Fin(g)))
            .collect()
    }

    /// Membership in `G_γ = {v > γ}` over the term universe.
    pub fn lower(&self, g: u32) -> Vec<bool> {
        self.values
            .iter()
            .map(|v| v.is_some_and(|v| v > Value::Fin(g)))
            .collect()
    }

    /// The induced quasi-order `g <= h` iff `v(g) >= v(h)`.
    pub fn induced_qo(&self) -> QuasiOrder {
        QuasiOrder::from_key_fn(self.carrier.clone(), |i| {
            self.values[i].map(std::cmp::Reverse)
        })
        .expect("keys cover the carrier")
    }

    fn domain(&self) -> Vec<usize> {
        self.carrier
            .eval()
            .iter()
            .copied()
            .filter(|&i| self.values[i].is_some())
            .collect()
    }
}

pub fn check_valuation_axioms(v: &Valuation) -> AxiomReport {
    let c = &v.carrier;
    let dom = v.domain();
    let val = |a: Option<usize>| v.values[a?];
    let mut r = AxiomReport::default();
    r.push(
        c,
        "valuation_ii",
        sweep::<1, _>(&dom, |[g]| {
            Some((v.values[g]? == Value::Inf) == (g == c.id()))
        }),
    );
    r.push(
        c,
        "valuation_iii",
        sweep::<2, _>(&dom, |[g, h]| {
            Some(val(c.div(g, h))? >= v.values[g]?.min(v.values[h]?))
        }),
    );
    r.push(
        c,
        "valuation_iv",
        sweep::<3, _>(&dom, |[g, h, z]| {
            let before = v.values[g]? <= v.values[h]?;
            Some(before == (val(c.conj(g, z))? <= val(c.conj(h, z))?))
        }),
    );
    r.push(
        c,
        "valuation_remark_a",
        sweep::<3, _>(&dom, |[g, h, z]| {
            let (a, b) = (v.values[g]?, v.values[h]?);
            let (az, bz) = (val(c.conj(g, z))?, val(c.conj(h, z))?);
            Some((a < b) == (az < bz) && (a == b) == (az == bz))
        }),
    );
    r.push(
        c,
        "valuation_remark_b",
        sweep::<2, _>(&dom, |[g, h]| {
            implies(Some(v.values[g]? < v.values[h]?), || {
                let a = v.values[g]?;
                Some(val(c.mul(g, h))? == a && val(c.mul(h, g))? == a)
            })
        }),
    );
    let gammas: Vec<u32> = (0..v.gamma_len() as u32).collect();
    r.push(
        c,
        "valuation_remark_c",
        sweep::<2, _>(&dom, |[g, z]| {
            let (vg, vz) = (v.values[g]?, v.values[z]?);
            let vgz = val(c.conj(g, z))?;
            Some(gammas.iter().all(|&y| {
                let y = Value::Fin(y);
                !(vg > y && vz >= y) || vgz > y
            }))
        }),
    );
    r
}

pub type TernaryFn = dyn Fn(usize, usize, usize) -> Option<bool> + Send + Sync;

#[derive(Clone)]
enum Kind {
    /// Per-triple state over the term universe: 0 false, 1 true, 2 undetermined.
    Table(Arc<Vec<u8>>),
    Order(TotalOrder),
    Valuation(Valuation),
    Qo(QuasiOrder),
    Fn(Arc<TernaryFn>),
}

/// A ternary relation on a carrier window.
#[derive(Clone)]
pub struct CRelation {
    carrier: Arc<Carrier>,
    kind: Kind,
}

impl fmt::Debug for CRelation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let k = match &self.kind {
            Kind::Table(_) => "table",
            Kind::Order(_) => "order",
            Kind::Valuation(_) => "valuation",
            Kind::Qo(_) => "qo",
            Kind::Fn(_) => "fn",
        };
        write!(f, "CRelation({k}, {:?})", self.carrier)
    }
}

const TABLE_LIMIT: usize = 1 << 24;

impl CRelation {
    pub fn from_fn(
        carrier: Arc<Carrier>,
        f: impl Fn(usize, usize, usize) -> Option<bool> + Send + Sync + 'static,
    ) -> CRelation {
        CRelation {
            carrier,
            kind: Kind::Fn(Arc::new(f)),
        }
    }

    /// Relation holding exactly on the listed triples of a finite carrier.
    pub fn from_triples(carrier: Arc<Carrier>, triples: &[[usize; 3]]) -> Result<CRelation> {
        let n = carrier.size();
        if n.saturating_pow(3) > TABLE_LIMIT {
            return invalid("carrier too large for a tabulated relation");
        }
        let mut t = vec![0u8; n * n * n];
        for &[x, y, z] in triples {
            if x >= n || y >= n || z >= n {
                return invalid("triple index outside the carrier");
            }
            t[(x * n + y) * n + z] = 1;
        }
        Ok(CRelation {
            carrier,
            kind: Kind::Table(Arc::new(t)),
        })
    }

    /// The quasi-order-derived relation `C(x,y,z) <=> y z^-1 < x z^-1`, without checking that `q` is a C-quasi-order.
    pub fn derived_from_qo(q: &QuasiOrder) -> CRelation {
        CRelation {
            carrier: q.carrier().clone(),
            kind: Kind::Qo(q.clone()),
        }
    }

    pub fn carrier(&self) -> &Arc<Carrier> {
        &self.carrier
    }

    /// `C(x, y, z)`, or `None` when the instance leaves the window.
    pub fn holds(&self, x: usize, y: usize, z: usize) -> Option<bool> {
        let c = &*self.carrier;
        match &self.kind {
            Kind::Table(t) => {
                let n = c.size();
                match t[(x * n + y) * n + z] {
                    2 => None,
                    b => Some(b == 1),
                }
            }
            Kind::Order(o) => {
                let (lyx, lzx) = (o.lt(y, x)?, o.lt(z, x)?);
                Some((lyx && lzx) || (y == z && z != x))
            }
            Kind::Valuation(v) => {
                let a = v.value(c.div(y, z)?)?;
                let b = v.value(c.div(x, z)?)?;
                Some(a > b)
            }
            Kind::Qo(q) => q.lt(c.div(y, z)?, c.div(x, z)?),
            Kind::Fn(f) => f(x, y, z),
        }
    }

    /// Tabulates the relation over the term universe when it is small enough.
    pub fn materialize(&self) -> Result<CRelation> {
        let n = self.carrier.size();
        if n.saturating_pow(3) > TABLE_LIMIT {
            return invalid("carrier too large for a tabulated relation");
        }
        let t: Vec<u8> = (0..n * n * n)
            .into_par_iter()
            .map(|k| match self.holds(k / (n * n), k / n % n, k % n) {
                None => 2,
                Some(b) => u8::from(b),
            })
            .collect();
        Ok(CRelation {
            carrier: self.carrier.clone(),
            kind: Kind::Table(Arc::new(t)),
        })
    }

    /// First eval triple on which the two relations are both determined and differ.
    pub fn first_difference(&self, other: &CRelation) -> Option<[usize; 3]> {
        let dom = self.carrier.eval();
        let s = sweep::<3, _>(dom, |[x, y, z]| {
            match (self.holds(x, y, z), other.holds(x, y, z)) {
                (Some(a), Some(b)) => Some(a == b),
                _ => None,
            }
        });
        s.counterexample.map(|c| [c[0], c[1], c[2]])
    }
}

pub fn check_c_axioms(rel: &CRelation) -> AxiomReport {
    let c = &*rel.carrier;
    let dom = c.eval();
    let mut r = AxiomReport::default();
    r.push(
        c,
        "C1",
        sweep::<3, _>(dom, |[x, y, z]| {
            implies(rel.holds(x, y, z), || rel.holds(x, z, y))
        }),
    );
    r.push(
        c,
        "C2",
        sweep::<3, _>(dom, |[x, y, z]| {
            implies(rel.holds(x, y, z), || rel.holds(y, x, z).map(|b| !b))
        }),
    );
    r.push(
        c,
        "C3",
        sweep::<4, _>(dom, |[x, y, z, w]| {
            implies(rel.holds(x, y, z), || match rel.holds(w, y, z) {
                Some(true) => Some(true),
                other => match (other, rel.holds(x, w, z)) {
                    (_, Some(true)) => Some(true),
                    (Some(false), Some(false)) => Some(false),
                    _ => None,
                },
            })
        }),
    );
    r.push(
        c,
        "C4",
        sweep::<2, _>(dom, |[x, y]| {
            if x == y {
                Some(true)
            } else {
                rel.holds(x, y, y)
            }
        }),
    );
    r
}

/// Translation invariance, swept separately on the left and on the right:
/// `C(x,y,z) => C(ux,uy,uz)` and `C(x,y,z) => C(xu,yu,zu)`. Together they give
/// invariance under `x -> v x u`.
pub fn check_compatibility(rel: &CRelation) -> AxiomReport {
    let c = &*rel.carrier;
    let dom = c.eval();
    let mut r = AxiomReport::default();
    r.push(
        c,
        "compatibility_left",
        sweep::<4, _>(dom, |[x, y, z, u]| {
            implies(rel.holds(x, y, z), || {
                rel.holds(c.mul(u, x)?, c.mul(u, y)?, c.mul(u, z)?)
            })
        }),
    );
    r.push(
        c,
        "compatibility_right",
        sweep::<4, _>(dom, |[x, y, z, u]| {
            implies(rel.holds(x, y, z), || {
                rel.holds(c.mul(x, u)?, c.mul(y, u)?, c.mul(z, u)?)
            })
        }),
    );
    r
}

/// Ordered-group axiom: `x <= y => xz <= yz and zx <= zy`.
pub fn check_og(order: &TotalOrder) -> AxiomReport {
    let c = &**order.carrier();
    let dom = order.qo().scope();
    let mut r = AxiomReport::default();
    r.push(
        c,
        "OG",
        sweep::<3, _>(&dom, |[x, y, z]| {
            implies(order.le(x, y), || {
                Some(
                    order.le(c.mul(x, z)?, c.mul(y, z)?)?
                        && order.le(c.mul(z, x)?, c.mul(z, y)?)?,
                )
            })
        }),
    );
    r
}

/// Order-type relation `(y < x and z < x) or (y = z != x)`.
pub fn crel_from_order(order: &TotalOrder) -> CRelation {
    CRelation {
        carrier: order.carrier().clone(),
        kind: Kind::Order(order.clone()),
    }
}

/// Valuational relation `v(y z^-1) > v(x z^-1)`; the valuation axioms are checked first.
pub fn crel_from_valuation(v: &Valuation) -> Result<CRelation> {
    let report = check_valuation_axioms(v);
    if let Some(e) = report.first_failure() {
        return invalid(format!(
            "not a valuation: {} fails at {:?}",
            e.name, e.counterexample_labels
        ));
    }
    Ok(CRelation {
        carrier: v.carrier.clone(),
        kind: Kind::Valuation(v.clone()),
    })
}

/// Unique compatible relation inducing `q`; fails unless `q` is a C-quasi-order.
pub fn crel_from_qo(q: &QuasiOrder) -> Result<CRelation> {
    let report = check_cqo_axioms(q);
    if let Some(e) = report.first_failure() {
        return domain(format!(
            "not a C-quasi-order: {} fails at {:?}",
            e.name, e.counterexample_labels
        ));
    }
    Ok(CRelation::derived_from_qo(q))
}

/// Induced quasi-order `x <= y <=> not C(x, y, 1)`.
///
/// Validation: the comparator must be a total preorder on the term universe,
/// the result must satisfy the C-quasi-order axioms, and `C` must coincide with
/// the relation derived back from it on every determined eval triple. These
/// conditions together are equivalent to `C` being a compatible C-relation.
pub fn qo_from_crel(rel: &CRelation) -> Result<QuasiOrder> {
    let c = rel.carrier.clone();
    let id = c.id();
    let defined = |a: usize| rel.holds(a, a, id).is_some();
    let q = QuasiOrder::from_leq(c.clone(), defined, |a, b| {
        rel.holds(a, b, id) == Some(false)
    })
    .or_else(|e| domain(format!("induced relation is not a total preorder: {e}")))?;
    let report = check_cqo_axioms(&q);
    if let Some(e) = report.first_failure() {
        return domain(format!(
            "induced quasi-order fails {} at {:?}",
            e.name, e.counterexample_labels
        ));
    }
    if let Some([x, y, z]) = rel.first_difference(&CRelation::derived_from_qo(&q)) {
        return domain(format!(
            "relation is not a compatible C-relation: differs from its induced quasi-order at ({}, {}, {})",
            c.label(x),
            c.label(y),
            c.label(z)
        ));
    }
    Ok(q)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DensityReport {
    pub dense: bool,
    /// Pair `(x, y)`, `x != y`, with no eval `z != y` such that `C(x, y, z)`.
    pub witness: Option<(usize, usize)>,
    /// True when the carrier is a window of an infinite group, so a missing `z`
    /// may lie outside the window.
    pub window_limited: bool,
}

pub fn is_dense(rel: &CRelation) -> DensityReport {
    let c = &*rel.carrier;
    let dom = c.eval();
    let window_limited = c.group().is_some_and(|g| {
        !matches!(
            g.kind(),
            crate::carrier::CarrierKind::Table | crate::carrier::CarrierKind::Cyclic
        )
    });
    if dom.len() < 2 {
        return DensityReport {
            dense: false,
            witness: None,
            window_limited,
        };
    }
    let witness = dom.iter().find_map(|&x| {
        dom.iter()
            .find(|&&y| {
                y != x
                    && !dom
                        .iter()
                        .any(|&z| z != y && rel.holds(x, y, z) == Some(true))
            })
            .map(|&y| (x, y))
    });
    DensityReport {
        dense: witness.is_none(),
        witness,
        window_limited,
    }
}
