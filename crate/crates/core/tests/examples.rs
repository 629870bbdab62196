//! Worked examples: element types, components and subgroups, lifting
//! constructions and the type-valuation of the semidirect example.

use std::sync::Arc;

use cqo::carrier::{Carrier, Element, Group, WindowPolicy};
use cqo::classify::{
    check_cqo_axioms, element_type, elementary_kind, type_report, ElementType, ElementaryTag,
};
use cqo::crel::{check_valuation_axioms, Value};
use cqo::fixtures::*;
use cqo::qorder::QuasiOrder;
use cqo::structure::*;

fn coords(c: &Carrier, i: usize) -> (i64, i64) {
    let v = c.element(i);
    let [a, b] = v.coords().unwrap() else {
        panic!("not planar")
    };
    (i64::try_from(a).unwrap(), i64::try_from(b).unwrap())
}

fn eval_where(c: &Carrier, f: impl Fn(i64, i64) -> bool) -> Vec<usize> {
    c.eval()
        .iter()
        .copied()
        .filter(|&i| {
            let (a, b) = coords(c, i);
            f(a, b)
        })
        .collect()
}

fn eval_part(c: &Carrier, set: &[usize]) -> Vec<usize> {
    set.iter().copied().filter(|&i| c.is_eval(i)).collect()
}

fn eval_of(c: &Carrier, set: &[bool]) -> Vec<usize> {
    c.eval().iter().copied().filter(|&i| set[i]).collect()
}

const PLANAR: [ExampleName; 3] = [ExampleName::A, ExampleName::B, ExampleName::C];

#[test]
fn planar_types_match_closed_form() {
    for name in PLANAR {
        let q = example_default(name).unwrap();
        let c = q.carrier();
        for &i in c.eval() {
            let (a, b) = coords(c, i);
            assert_eq!(
                element_type(&q, i),
                Some(planar_type(name, a, b)),
                "{name} at ({a},{b})"
            );
        }
        assert!(check_cqo_axioms(&q).holds(), "{name}");
    }
}

#[test]
fn welding_points_of_planar_examples() {
    let a = example_default(ExampleName::A).unwrap();
    assert!(type_report(&a).welding_points.is_empty());
    let q = example_default(ExampleName::B).unwrap();
    let c = q.carrier();
    let r = type_report(&q);
    let o_minus: Vec<usize> = r
        .welding_points
        .iter()
        .copied()
        .filter(|&i| r.types[i] == Some(ElementType::OMinus))
        .collect();
    assert_eq!(o_minus, eval_where(c, |x, _| x < 0));
    assert_eq!(
        r.welding_points,
        eval_where(c, |x, y| x < 0 || (x == 0 && y != 0))
    );
    let z = q.index(&Element::vec([0, 3])).unwrap();
    for p in eval_where(c, |x, _| x < 0) {
        assert_eq!(q.sim(p, z), Some(true));
    }
}

#[test]
fn components_and_subgroups_of_planar_examples() {
    for name in PLANAR {
        let q = example_default(name).unwrap();
        let c = q.carrier();
        let g = q.index(&Element::vec([0, 1])).unwrap();
        let h = q.index(&Element::vec([1, 0])).unwrap();
        let tg = type_component(&q, g).unwrap();
        let th = type_component(&q, h).unwrap();
        assert_eq!(
            eval_part(c, &tg.members),
            eval_where(c, |x, y| x == 0 && y != 0),
            "{name}"
        );
        assert_eq!(
            eval_part(c, &th.members),
            eval_where(c, |x, _| x != 0),
            "{name}"
        );
        assert_eq!(
            eval_part(c, &th.split.clone().unwrap().0),
            eval_where(c, |x, _| x > 0),
            "{name}"
        );
        let sg = component_subgroups(&q, g).unwrap();
        let sh = component_subgroups(&q, h).unwrap();
        assert_eq!(eval_of(c, &sg.lower), vec![c.id()], "{name}");
        assert_eq!(
            eval_of(c, &sg.upper),
            eval_where(c, |x, _| x == 0),
            "{name}"
        );
        assert_eq!(
            eval_of(c, &sh.lower),
            eval_where(c, |x, _| x == 0),
            "{name}"
        );
        assert_eq!(eval_of(c, &sh.upper), c.eval().to_vec(), "{name}");
        assert!(sg.check.holds() && sh.check.holds());

        let convex = name != ExampleName::B;
        assert_eq!(q.is_convex(&tg.members), convex, "{name}");
        assert_eq!(q.is_convex(&th.members), convex, "{name}");
        assert_eq!(q.is_convex(&eval_of(c, &sh.lower)), convex, "{name}");
        assert_eq!(q.is_convex(&eval_of(c, &sg.upper)), convex, "{name}");
        for s in [&tg.members, &th.members] {
            assert!(q.is_strictly_convex(s));
        }

        let upper_kind = elementary_kind(&section_qo(&q, &sh.upper, &sh.lower).unwrap()).tag;
        let lower_kind = elementary_kind(&section_qo(&q, &sg.upper, &sg.lower).unwrap()).tag;
        assert_eq!(upper_kind, ElementaryTag::OrderType, "{name}");
        let expected = if name == ExampleName::C {
            ElementaryTag::OrderType
        } else {
            ElementaryTag::Valuational
        };
        assert_eq!(lower_kind, expected, "{name}");
    }
}

fn order_type_key(x: i64) -> Vec<i64> {
    match x {
        0 => vec![0],
        _ if x < 0 => vec![1],
        _ => vec![2, x],
    }
}

fn planar_fibers(v: &cqo::crel::Valuation, upper: fn(i64) -> Vec<i64>) -> Vec<QuasiOrder> {
    fibers_from_key(v, |gamma, e| {
        let [a, b] = e.coords()? else { return None };
        let (a, b) = (i64::try_from(a).ok()?, i64::try_from(b).ok()?);
        Some(if gamma == 0 {
            order_type_key(a)
        } else {
            upper(b)
        })
    })
    .unwrap()
}

#[test]
fn planar_examples_are_lifts() {
    let c = Arc::new(Carrier::new(z2_group(), WindowPolicy::default()).unwrap());
    let v = base_valuation(c.clone());
    assert_eq!(v.gamma_len(), 2);
    let trivial = |b: i64| vec![i64::from(b != 0)];
    let a = lift(&v, &planar_fibers(&v, trivial)).unwrap();
    assert!(a.agrees_with(&example_on(ExampleName::A, c.clone()).unwrap()));
    let cc = lift(&v, &planar_fibers(&v, order_type_key)).unwrap();
    assert!(cc.agrees_with(&example_on(ExampleName::C, c.clone()).unwrap()));
    let b = weld(&a, a.index(&Element::vec([-1, 0])).unwrap()).unwrap();
    assert!(b.agrees_with(&example_on(ExampleName::B, c).unwrap()));
}

#[test]
fn lift_over_single_value_is_the_fiber() {
    let q = order_type_z(WindowPolicy::with_radius(3)).unwrap();
    let c = q.carrier().clone();
    let v = cqo::crel::Valuation::from_key_fn(c.clone(), |i| Some((i != c.id()).then_some(0u8)));
    let fibers = fibers_from_key(&v, |_, e| {
        Some(order_type_key(i64::try_from(&e.coords()?[0]).ok()?))
    })
    .unwrap();
    assert!(lift(&v, &fibers).unwrap().agrees_with(&q));
}

#[test]
fn hahn_example_is_lift_of_leading_coefficient() {
    let q = example_default(ExampleName::D).unwrap();
    let c = q.carrier().clone();
    assert!(check_cqo_axioms(&q).holds());
    let v = support_valuation(c);
    let fibers = fibers_from_key(&v, |_, e| {
        let Element::Seq(m) = e else { return None };
        let (_, coef) = m.iter().next()?;
        let [a, b] = coef.coords()? else { return None };
        Some(planar_key(
            ExampleName::A,
            i64::try_from(a).ok()?,
            i64::try_from(b).ok()?,
        ))
    })
    .unwrap();
    for f in &fibers {
        assert_eq!(elementary_kind(f).tag, ElementaryTag::Neither);
    }
    assert!(lift(&v, &fibers).unwrap().agrees_with(&q));
    let d = decompose(&q).unwrap();
    assert!(reconstruct(&d).unwrap().agrees_with(&q));
    assert!(d.adjacent_valuational().is_none());
    assert!(d
        .fibers
        .iter()
        .all(|f| f.kind.tag != ElementaryTag::Neither));
}

#[test]
fn semidirect_example_is_semidirect_lift() {
    let q = example_default(ExampleName::E).unwrap();
    let policy = ExampleName::E.default_policy();
    let left = Arc::new(Carrier::new(Group::free_abelian(1).unwrap(), policy).unwrap());
    let right = Arc::new(Carrier::new(hahn_group(IndexSpan::default()).unwrap(), policy).unwrap());
    let lq = trivial_valuation_qo(left);
    let rq = example_on(ExampleName::D, right).unwrap();
    let lifted = semidirect_lift(q.carrier().clone(), &lq, &rq).unwrap();
    assert!(lifted.agrees_with(&q));
    assert!(check_cqo_axioms(&q).holds());
    let d = decompose(&q).unwrap();
    assert!(reconstruct(&d).unwrap().agrees_with(&q));
    assert!(d.welds.is_empty());
}

/// Sort key of a closed-form type value with the identity (no value) on top.
fn closed_key(e: &Element) -> (bool, (u8, i64, u8)) {
    match semidirect_type_value(e).unwrap() {
        Some(t) => (false, t),
        None => (true, (0, 0, 0)),
    }
}

#[test]
fn semidirect_type_valuation_matches_closed_form() {
    let q = example_default(ExampleName::E).unwrap();
    let c = q.carrier();
    let tv = type_valuation(&q).unwrap();
    let v = &tv.valuation;
    assert!(check_valuation_axioms(v).holds());
    let dom = c.eval();
    for &x in dom {
        for &y in dom {
            let computed = v.value(x).unwrap() <= v.value(y).unwrap();
            let closed = closed_key(&c.element(x)) <= closed_key(&c.element(y));
            assert_eq!(computed, closed, "{} vs {}", c.label(x), c.label(y));
        }
    }
    let f = c
        .index_of(&Element::pair(
            Element::int(0),
            Element::seq([(0, Element::vec([1, 0]))]),
        ))
        .unwrap();
    let z = c
        .index_of(&Element::pair(
            Element::int(-1),
            Element::seq(Vec::<(i64, Element)>::new()),
        ))
        .unwrap();
    let fz = c.mul(c.mul(z, f).unwrap(), c.inv(z)).unwrap();
    assert_eq!(semidirect_type_value(&c.element(f)), Some(Some((1, 0, 1))));
    assert_eq!(
        semidirect_type_value(&c.element(fz)),
        Some(Some((1, -1, 1)))
    );
    assert_ne!(v.value(f), v.value(fz));
    assert!(matches!(v.value(f), Some(Value::Fin(_))));
}

#[test]
fn type_valuations_pass_axioms() {
    for name in ExampleName::ALL {
        let q = example_default(name).unwrap();
        let tv = type_valuation(&q).unwrap();
        assert!(check_valuation_axioms(&tv.valuation).holds(), "{name}");
    }
    for seed in 0..10 {
        for q in [
            random_valuational(seed).unwrap(),
            random_lifted(seed).unwrap(),
        ] {
            let tv = type_valuation(&q).unwrap();
            assert!(check_valuation_axioms(&tv.valuation).holds(), "seed {seed}");
        }
    }
}

#[test]
fn valuational_qo_has_one_v_component() {
    let q = trivial_valuation_cyclic(6).unwrap();
    let comps = components_partition(&q).unwrap();
    assert_eq!(comps.len(), 2);
    let d = decompose(&q).unwrap();
    assert!(d.welds.is_empty());
    assert_eq!(d.type_valuation.gamma_len(), 1);
}
