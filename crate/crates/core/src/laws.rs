//! Element- and component-level laws satisfied by every C-quasi-order,
//! swept exhaustively over the eval universe.

use std::collections::{HashMap, HashSet};

use crate::classify::{element_type, elementary_kind, type_report, ElementType, ElementaryTag};
use crate::crel::{implies, sweep, AxiomReport};
use crate::error::Result;
use crate::qorder::QuasiOrder;
use crate::structure::{check_subgroups, section_qo, subgroups_in, type_components, ComponentKind};

/// Every listed element is defined and all are pairwise equivalent.
fn all_sim(q: &QuasiOrder, xs: &[Option<usize>]) -> Option<bool> {
    let r = q.rank((*xs.first()?)?)?;
    for x in &xs[1..] {
        if q.rank((*x)?)? != r {
            return Some(false);
        }
    }
    Some(true)
}

/// Laws on pairs and triples of elements.
pub fn element_laws(q: &QuasiOrder) -> AxiomReport {
    let c = &**q.carrier();
    let dom = q.scope();
    let m = |a: usize, b: usize| c.mul(a, b);
    let i = |a: usize| c.inv(a);
    let ty = |a: usize| element_type(q, a);
    let mut r = AxiomReport::default();

    r.push(
        c,
        "commuting_equivalence",
        sweep::<2, _>(&dom, |[g, h]| {
            Some(q.sim(m(h, g)?, g)? == q.sim(m(g, h)?, g)?)
        }),
    );

    r.push(
        c,
        "absorption_below_inverse",
        sweep::<2, _>(&dom, |[g, h]| {
            implies(q.lt(h, i(g)), || all_sim(q, &[Some(g), m(h, g), m(g, h)]))
        }),
    );

    r.push(
        c,
        "absorption_below_both",
        sweep::<2, _>(&dom, |[g, h]| {
            let (gi, hi) = (i(g), i(h));
            implies(Some(q.lt(h, gi)? && q.lt(h, g)?), || {
                Some(
                    q.lt(hi, g)?
                        && q.lt(hi, gi)?
                        && all_sim(q, &[m(g, h), Some(g), m(g, hi)])?
                        && all_sim(q, &[Some(gi), m(h, gi), m(hi, gi)])?,
                )
            })
        }),
    );

    r.push(
        c,
        "absorption_below_o_plus",
        sweep::<2, _>(&dom, |[g, h]| {
            let (gi, hi) = (i(g), i(h));
            implies(
                Some(q.leq(h, gi)? && q.leq(hi, gi)? && q.lt(gi, g)?),
                || {
                    Some(
                        all_sim(q, &[Some(g), m(g, h), m(g, hi), m(h, g), m(hi, g)])?
                            && all_sim(q, &[Some(gi), m(gi, hi), m(gi, h), m(hi, gi), m(h, gi)])?,
                    )
                },
            )
        }),
    );

    r.push(
        c,
        "v_type_equivalences",
        sweep::<2, _>(&dom, |[g, h]| {
            let (gi, hi) = (i(g), i(h));
            implies(Some(ty(g)? == ElementType::VType && q.lt(h, g)?), || {
                Some(
                    q.lt(hi, g)?
                        && all_sim(
                            q,
                            &[
                                m(h, g),
                                m(hi, g),
                                m(g, hi),
                                m(g, h),
                                Some(g),
                                Some(gi),
                                m(gi, h),
                                m(gi, hi),
                                m(hi, gi),
                                m(h, gi),
                            ],
                        )?,
                )
            })
        }),
    );

    r.push(
        c,
        "o_plus_equivalences",
        sweep::<2, _>(&dom, |[g, h]| {
            let (gi, hi) = (i(g), i(h));
            implies(
                Some(ty(g)? == ElementType::OPlus && q.leq(h, gi)? && q.leq(hi, gi)?),
                || {
                    Some(
                        all_sim(q, &[m(gi, hi), m(gi, h), Some(gi)])?
                            && q.lt(gi, g)?
                            && all_sim(q, &[Some(g), m(g, h), m(g, hi), m(h, g), m(hi, g)])?,
                    )
                },
            )
        }),
    );

    r.push(
        c,
        "o_type_inverse_class",
        sweep::<2, _>(&dom, |[g, h]| {
            implies(Some(q.lt(i(g), h)? && q.leq(h, g)?), || {
                Some(q.sim(i(h), i(g))? && ty(h)? == ElementType::OPlus)
            })
        }),
    );

    r.push(
        c,
        "translation_monotone",
        sweep::<3, _>(&dom, |[f, g, h]| {
            let hi = i(h);
            let side = !q.sim(g, hi)? || (q.leq(h, g)? && q.leq(hi, g)? && q.lt(g, i(g))?);
            implies(Some(q.leq(f, g)? && side), || {
                Some(q.leq(m(f, h)?, m(g, h)?)? && q.leq(m(h, f)?, m(h, g)?)?)
            })
        }),
    );
    r
}

/// Laws on type-components and their subgroups.
pub fn component_laws(q: &QuasiOrder) -> Result<AxiomReport> {
    let c = &**q.carrier();
    let dom: Vec<usize> = q.scope().into_iter().filter(|&g| g != c.id()).collect();
    let comps = type_components(q, &dom)?;
    let pos: HashMap<usize, usize> = dom.iter().enumerate().map(|(k, &g)| (g, k)).collect();
    let subs: Vec<(Vec<bool>, Vec<bool>)> = comps.iter().map(|t| subgroups_in(q, t)).collect();
    let welding: HashSet<usize> = type_report(q).welding_points.into_iter().collect();
    let in_eval =
        |s: &[usize]| -> Vec<usize> { s.iter().copied().filter(|&g| c.is_eval(g)).collect() };
    let eval_of =
        |set: &[bool]| -> Vec<usize> { c.eval().iter().copied().filter(|&g| set[g]).collect() };
    let sorted = |mut v: Vec<usize>| {
        v.sort_unstable();
        v.dedup();
        v
    };

    // One representative per component, o-type components represented by an o-plus member.
    let mut seen: HashSet<&Vec<usize>> = HashSet::new();
    let mut reps: Vec<usize> = Vec::new();
    for (k, t) in comps.iter().enumerate() {
        if seen.insert(&t.members) {
            let g = match &t.split {
                Some((plus, _)) => plus
                    .iter()
                    .copied()
                    .find(|p| pos.contains_key(p))
                    .unwrap_or(dom[k]),
                None => dom[k],
            };
            reps.push(g);
        }
    }
    let comp = |g: usize| &comps[pos[&g]];
    let subs_of = |g: usize| &subs[pos[&g]];

    let mut r = AxiomReport::default();
    r.push(
        c,
        "component_partition",
        sweep::<2, _>(&dom, |[g, h]| {
            let (tg, th) = (comp(g), comp(h));
            let (sg, sh) = (subs_of(g), subs_of(h));
            let meet = tg.members.iter().any(|m| th.contains(*m));
            let facts = [
                th.contains(g),
                tg.contains(h),
                tg.members == th.members,
                meet,
                sg.0 == sh.0,
                sg.1 == sh.1,
            ];
            Some(facts.iter().all(|&b| b == facts[0]))
        }),
    );

    let is_o = |g: usize| comp(g).kind == ComponentKind::OComponent;
    r.push(
        c,
        "o_component_shape",
        sweep::<1, _>(&reps, |[a]| {
            if !is_o(a) {
                return Some(true);
            }
            let t = comp(a);
            let (_, minus) = t.split.as_ref()?;
            let fringe = in_eval(&t.fringe);
            let class = q.class_of(c.inv(a));
            Some(
                q.is_right_convex(&t.members)
                    && q.convexity_complement(&t.members).ok()? == fringe
                    && class == sorted(fringe.iter().chain(&in_eval(minus)).copied().collect())
                    && fringe
                        .iter()
                        .all(|&f| element_type(q, f) == Some(ElementType::VType))
                    && q.is_convex(&t.members) != welding.contains(&c.inv(a)),
            )
        }),
    );

    r.push(
        c,
        "o_component_monotone",
        sweep::<3, _>(&dom, |[f1, f2, h]| {
            let plus = |x| element_type(q, x) == Some(ElementType::OPlus);
            let t = comp(f1);
            if !(plus(f1) && plus(f2) && plus(h) && t.contains(f2) && t.contains(h)) {
                return Some(true);
            }
            implies(q.leq(f1, f2), || {
                Some(q.leq(c.mul(f1, h)?, c.mul(f2, h)?)? && q.leq(c.mul(h, f1)?, c.mul(h, f2)?)?)
            })
        }),
    );

    r.push(
        c,
        "o_lower_subgroup_shape",
        sweep::<1, _>(&reps, |[a]| {
            if !is_o(a) {
                return Some(true);
            }
            let t = comp(a);
            let (_, minus) = t.split.as_ref()?;
            let lower = eval_of(&subs_of(a).0);
            let fringe = in_eval(&t.fringe);
            let ai = c.inv(a);
            let mut expect: Vec<usize> = q
                .scope()
                .into_iter()
                .filter(|&h| q.lt(h, ai) == Some(true))
                .collect();
            expect.extend(&fringe);
            let convex = q.is_convex(&lower);
            let mut ok = lower == sorted(expect)
                && q.is_left_convex(&lower)
                && convex == fringe.is_empty()
                && convex == q.is_convex(&t.members);
            if !convex {
                ok = ok
                    && q.convexity_complement(&lower).ok()? == in_eval(minus)
                    && q.max_of(&lower) == fringe;
            }
            Some(ok)
        }),
    );

    r.push(
        c,
        "o_upper_initial_segment",
        sweep::<1, _>(&reps, |[a]| {
            Some(!is_o(a) || q.is_initial_segment(&eval_of(&subs_of(a).1)))
        }),
    );

    r.push(
        c,
        "v_subgroup_shape",
        sweep::<1, _>(&reps, |[g]| {
            let t = comp(g);
            if t.kind != ComponentKind::VComponent {
                return Some(true);
            }
            let (lower, upper) = subs_of(g);
            let up = eval_of(upper);
            Some(
                q.is_left_convex(&up)
                    && q.convexity_complement(&up).ok()? == in_eval(&t.fringe)
                    && q.is_convex(&eval_of(lower)),
            )
        }),
    );

    r.push(
        c,
        "component_subgroups",
        sweep::<1, _>(&reps, |[g]| {
            let (lower, upper) = subs_of(g);
            Some(check_subgroups(q, lower, upper).holds())
        }),
    );

    r.push(
        c,
        "quotient_minimality",
        sweep::<1, _>(&reps, |[g]| {
            let (lower, upper) = subs_of(g);
            let want = match comp(g).kind {
                ComponentKind::OComponent => ElementaryTag::OrderType,
                _ => ElementaryTag::Valuational,
            };
            let low_rank = eval_of(lower).iter().filter_map(|&h| q.rank(h)).max()?;
            for k in 1..=low_rank {
                let smaller: Vec<bool> = (0..c.size())
                    .map(|h| lower[h] && q.rank(h).is_some_and(|r| r < k))
                    .collect();
                if smaller == *lower || !check_subgroups(q, &smaller, upper).holds() {
                    continue;
                }
                if let Ok(sq) = section_qo(q, upper, &smaller) {
                    if elementary_kind(&sq).tag == want {
                        return Some(false);
                    }
                }
            }
            Some(true)
        }),
    );
    Ok(r)
}

/// Element laws followed by component laws.
pub fn lemma_suite(q: &QuasiOrder) -> Result<AxiomReport> {
    let mut r = element_laws(q);
    r.extend(component_laws(q)?);
    Ok(r)
}
