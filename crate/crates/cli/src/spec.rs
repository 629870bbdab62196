//! JSON job files: a group, a window, and one of a quasi-order, a C-relation or
//! a valuation, each described by a tagged tree of constructions.

use std::collections::BTreeMap;
use std::sync::Arc;

use cqo::carrier::{Action, Carrier, Element, Group, Int, WindowPolicy};
use cqo::classify::{cqo_from_compatible_qo, extract_valuation, order_cqo_from_order};
use cqo::crel::{
    crel_from_order, crel_from_qo, crel_from_valuation, qo_from_crel, CRelation, Valuation,
};
use cqo::fixtures::{example_on, support_valuation, trivial_valuation_qo, ExampleName};
use cqo::qorder::{QuasiOrder, TotalOrder};
use cqo::structure::{fiber_carrier, lift, semidirect_lift, weld};
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum GroupSpec {
    Cyclic {
        n: usize,
    },
    Symmetric3,
    /// Multiplication table with identity 0.
    Table {
        name: String,
        rows: Vec<Vec<usize>>,
    },
    /// Direct product of two table groups.
    Product {
        left: Box<GroupSpec>,
        right: Box<GroupSpec>,
    },
    FreeAbelian {
        rank: usize,
    },
    Hahn {
        index_set: Vec<i64>,
        base: Box<GroupSpec>,
    },
    Semidirect {
        left: Box<GroupSpec>,
        right: Box<GroupSpec>,
        action: ActionSpec,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActionSpec {
    Identity,
    Shift,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WindowSpec {
    pub eval_radius: u64,
    pub term_radius: u64,
}

impl Default for WindowSpec {
    fn default() -> WindowSpec {
        WindowSpec {
            eval_radius: 4,
            term_radius: 8,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum QoSpec {
    /// Rank per element label; unlisted elements are unranked.
    Ranks {
        ranks: BTreeMap<String, u64>,
    },
    /// Lexicographic order on coordinates, read as a quasi-order.
    NaturalOrder,
    /// C-quasi-order of a total order: the functional applied to coordinates, or lexicographic.
    OrderType {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        functional: Option<Vec<i64>>,
    },
    TrivialValuation,
    Valuation {
        valuation: ValSpec,
    },
    /// Lift over a valuation; `fibers[k]` lives on the coset carrier of the k-th value.
    Lift {
        valuation: ValSpec,
        fibers: Vec<QoSpec>,
    },
    /// Lift over the support-minimum valuation of a Hahn group, every fiber ordered by
    /// the leading coefficient under `coefficient`.
    LeadingCoefficient {
        coefficient: Box<QoSpec>,
    },
    SemidirectLift {
        left: Box<QoSpec>,
        right: Box<QoSpec>,
    },
    Weld {
        base: Box<QoSpec>,
        at: String,
    },
    /// C-quasi-order attached to a compatible quasi-order.
    Compatible {
        base: Box<QoSpec>,
    },
    FromCrel {
        crel: Box<CrelSpec>,
    },
    /// Closed form of a named example.
    Example {
        name: ExampleName,
    },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ValSpec {
    /// Value per element label; `null` is infinity. Unlisted elements are unvalued.
    Values {
        values: BTreeMap<String, Option<i64>>,
    },
    /// Position of the first nonzero coordinate.
    FirstNonzero,
    /// Smallest index in the support of a Hahn element.
    SupportMin,
    Trivial,
    /// Valuation of a valuational quasi-order.
    FromQo {
        qo: Box<QoSpec>,
    },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CrelSpec {
    Qo {
        qo: QoSpec,
    },
    Order {
        order: QoSpec,
    },
    Valuation {
        valuation: ValSpec,
    },
    /// Explicit list of triples; the relation holds exactly on them.
    Triples {
        triples: Vec<[String; 3]>,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JobSpec {
    pub group: GroupSpec,
    #[serde(default)]
    pub window: WindowSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub qo: Option<QoSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub crel: Option<CrelSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub valuation: Option<ValSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub command: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metadata: Option<serde_json::Value>,
}

/// What a job file describes, built on its carrier.
#[derive(Clone, Debug)]
pub enum Subject {
    Qo(QuasiOrder),
    Crel(CRelation),
    Valuation(Valuation),
}

pub fn build_group(g: &GroupSpec) -> cqo::Result<Group> {
    match g {
        GroupSpec::Cyclic { n } => Group::cyclic(*n),
        GroupSpec::Symmetric3 => Ok(Group::symmetric3()),
        GroupSpec::Table { name, rows } => Group::table(name.clone(), rows),
        GroupSpec::Product { left, right } => {
            Group::table_product(&build_group(left)?, &build_group(right)?)
        }
        GroupSpec::FreeAbelian { rank } => Group::free_abelian(*rank),
        GroupSpec::Hahn { index_set, base } => {
            let idx: Vec<Int> = index_set.iter().map(|&i| Int::from(i)).collect();
            Group::hahn(&idx, build_group(base)?)
        }
        GroupSpec::Semidirect {
            left,
            right,
            action,
        } => {
            let action = match action {
                ActionSpec::Identity => Action::Identity,
                ActionSpec::Shift => Action::Shift,
            };
            Group::semidirect(build_group(left)?, build_group(right)?, action)
        }
    }
}

pub fn build_carrier(g: &GroupSpec, w: WindowSpec) -> cqo::Result<Arc<Carrier>> {
    let policy = WindowPolicy::new(w.eval_radius, w.term_radius)?;
    Ok(Arc::new(Carrier::new(build_group(g)?, policy)?))
}

fn bad<T>(msg: impl Into<String>) -> cqo::Result<T> {
    Err(cqo::Error::InvalidParameter(msg.into()))
}

fn labels_index(c: &Carrier) -> BTreeMap<String, usize> {
    (0..c.size()).map(|i| (c.label(i), i)).collect()
}

fn lookup(index: &BTreeMap<String, usize>, label: &str) -> cqo::Result<usize> {
    match index.get(label) {
        Some(&i) => Ok(i),
        None => bad(format!("unknown element {label}")),
    }
}

fn coords_i64(e: &Element) -> Option<Vec<i64>> {
    e.coords()?.iter().map(|x| i64::try_from(x).ok()).collect()
}

fn total_order(c: Arc<Carrier>, functional: Option<&[i64]>) -> cqo::Result<TotalOrder> {
    let cc = c.clone();
    TotalOrder::from_key_fn(c, |i| {
        let x = coords_i64(&cc.element(i))?;
        Some(match functional {
            Some(f) => vec![f.iter().zip(&x).map(|(a, b)| a * b).sum()],
            None => x,
        })
    })
}

/// Builds a quasi-order on `c`; group-specific constructions read the group from `g`.
pub fn build_qo(spec: &QoSpec, c: Arc<Carrier>, g: Option<&Group>) -> cqo::Result<QuasiOrder> {
    match spec {
        QoSpec::Ranks { ranks } => {
            let index = labels_index(&c);
            let mut r = vec![None; c.size()];
            for (label, &k) in ranks {
                r[lookup(&index, label)?] = Some(k);
            }
            QuasiOrder::from_ranks(c, &r)
        }
        QoSpec::NaturalOrder => Ok(total_order(c, None)?.qo().clone()),
        QoSpec::OrderType { functional } => {
            order_cqo_from_order(&total_order(c, functional.as_deref())?)
        }
        QoSpec::TrivialValuation => Ok(trivial_valuation_qo(c)),
        QoSpec::Valuation { valuation } => Ok(build_valuation(valuation, c, g)?.induced_qo()),
        QoSpec::Lift { valuation, fibers } => {
            let v = build_valuation(valuation, c, g)?;
            if fibers.len() != v.gamma_len() {
                return bad(format!(
                    "valuation has {} values but {} fibers are given",
                    v.gamma_len(),
                    fibers.len()
                ));
            }
            let qos = fibers
                .iter()
                .enumerate()
                .map(|(k, f)| build_qo(f, fiber_carrier(&v, k as u32)?, None))
                .collect::<cqo::Result<Vec<_>>>()?;
            lift(&v, &qos)
        }
        QoSpec::LeadingCoefficient { coefficient } => {
            let Some(Group::Hahn { base, .. }) = g else {
                return bad("leading_coefficient needs a Hahn group");
            };
            let t = c.policy().term_radius;
            let cc = Arc::new(Carrier::new((**base).clone(), WindowPolicy::new(t, t)?)?);
            let inner = build_qo(coefficient, cc.clone(), Some(base))?;
            let v = support_valuation(c);
            let qos = (0..v.gamma_len() as u32)
                .map(|y| {
                    let fc = fiber_carrier(&v, y)?;
                    let f = fc.clone();
                    QuasiOrder::from_key_fn(fc, |k| {
                        let Element::Seq(m) = f.element(k) else {
                            return None;
                        };
                        let (_, coef) = m.iter().next()?;
                        inner.rank(cc.index_of(coef)?)
                    })
                })
                .collect::<cqo::Result<Vec<_>>>()?;
            lift(&v, &qos)
        }
        QoSpec::SemidirectLift { left, right } => {
            let Some(Group::Semidirect {
                left: lg,
                right: rg,
                ..
            }) = g
            else {
                return bad("semidirect_lift needs a semidirect group");
            };
            let policy = c.policy();
            let lc = Arc::new(Carrier::new((**lg).clone(), policy)?);
            let rc = Arc::new(Carrier::new((**rg).clone(), policy)?);
            let lq = build_qo(left, lc, Some(lg))?;
            let rq = build_qo(right, rc, Some(rg))?;
            semidirect_lift(c, &lq, &rq)
        }
        QoSpec::Weld { base, at } => {
            let q = build_qo(base, c.clone(), g)?;
            let i = lookup(&labels_index(&c), at)?;
            weld(&q, i)
        }
        QoSpec::Compatible { base } => cqo_from_compatible_qo(&build_qo(base, c, g)?),
        QoSpec::FromCrel { crel } => qo_from_crel(&build_crel(crel, c, g)?),
        QoSpec::Example { name } => example_on(*name, c),
    }
}

pub fn build_valuation(
    spec: &ValSpec,
    c: Arc<Carrier>,
    g: Option<&Group>,
) -> cqo::Result<Valuation> {
    let cc = c.clone();
    match spec {
        ValSpec::Values { values } => {
            let index = labels_index(&c);
            let mut v: Vec<Option<Option<i64>>> = vec![None; c.size()];
            for (label, &k) in values {
                v[lookup(&index, label)?] = Some(k);
            }
            Ok(Valuation::from_key_fn(c, |i| v[i]))
        }
        ValSpec::FirstNonzero => Ok(Valuation::from_key_fn(c, |i| {
            let x = coords_i64(&cc.element(i))?;
            Some(x.iter().position(|&t| t != 0))
        })),
        ValSpec::SupportMin => match g {
            Some(Group::Hahn { .. }) | None => Ok(support_valuation(c)),
            _ => bad("support_min needs a Hahn group"),
        },
        ValSpec::Trivial => {
            let id = c.id();
            Ok(Valuation::from_key_fn(c, |i| {
                Some((i != id).then_some(0u8))
            }))
        }
        ValSpec::FromQo { qo } => extract_valuation(&build_qo(qo, c, g)?),
    }
}

pub fn build_crel(spec: &CrelSpec, c: Arc<Carrier>, g: Option<&Group>) -> cqo::Result<CRelation> {
    match spec {
        CrelSpec::Qo { qo } => crel_from_qo(&build_qo(qo, c, g)?),
        CrelSpec::Order { order } => Ok(crel_from_order(&TotalOrder::new(build_qo(order, c, g)?)?)),
        CrelSpec::Valuation { valuation } => {
            crel_from_valuation(&build_valuation(valuation, c, g)?)
        }
        CrelSpec::Triples { triples } => {
            let index = labels_index(&c);
            let t = triples
                .iter()
                .map(|[x, y, z]| Ok([lookup(&index, x)?, lookup(&index, y)?, lookup(&index, z)?]))
                .collect::<cqo::Result<Vec<_>>>()?;
            CRelation::from_triples(c, &t)
        }
    }
}

impl JobSpec {
    pub fn parse(text: &str) -> Result<JobSpec, String> {
        let spec: JobSpec =
            serde_json::from_str(text).map_err(|e| format!("malformed job file: {e}"))?;
        let given = [
            spec.qo.is_some(),
            spec.crel.is_some(),
            spec.valuation.is_some(),
        ];
        if given.iter().filter(|&&b| b).count() != 1 {
            return Err("a job file needs exactly one of \"qo\", \"crel\" or \"valuation\"".into());
        }
        Ok(spec)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("job specs serialize")
    }

    pub fn carrier(&self) -> cqo::Result<Arc<Carrier>> {
        build_carrier(&self.group, self.window)
    }

    pub fn build(&self) -> cqo::Result<Subject> {
        let c = self.carrier()?;
        let g = build_group(&self.group)?;
        if let Some(q) = &self.qo {
            Ok(Subject::Qo(build_qo(q, c, Some(&g))?))
        } else if let Some(r) = &self.crel {
            Ok(Subject::Crel(build_crel(r, c, Some(&g))?))
        } else if let Some(v) = &self.valuation {
            Ok(Subject::Valuation(build_valuation(v, c, Some(&g))?))
        } else {
            bad("nothing to build")
        }
    }

    pub fn from_qo(group: GroupSpec, window: WindowSpec, q: &QuasiOrder) -> JobSpec {
        let c = q.carrier();
        let ranks = (0..c.size())
            .filter_map(|i| Some((c.label(i), u64::from(q.rank(i)?))))
            .collect();
        JobSpec {
            group,
            window,
            qo: Some(QoSpec::Ranks { ranks }),
            crel: None,
            valuation: None,
            command: None,
            metadata: None,
        }
    }
}
