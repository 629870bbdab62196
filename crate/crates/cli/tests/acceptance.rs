//! Acceptance run: one PASS/FAIL line per criterion, then a single assertion
//! that all of them passed.

use std::collections::BTreeSet;
use std::io::Write;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::Arc;
use std::time::{Duration, Instant};

use cqo::carrier::{make_cyclic, Carrier, Element, Group, WindowPolicy};
use cqo::classify::{
    check_cqo_axioms, cqo_from_compatible_qo, element_type, extract_valuation,
    order_cqo_from_order, type_report, ElementType, ElementaryTag,
};
use cqo::crel::{
    check_c_axioms, check_compatibility, check_valuation_axioms, crel_from_order, crel_from_qo,
    crel_from_valuation, qo_from_crel, CRelation, Value,
};
use cqo::ctree::{build_tree, classify_pair, orbit_trichotomy, orbits, OrbitClass, Trichotomy};
use cqo::fixtures::{
    base_valuation, compatible_fixtures, example_default, example_key, normal_subgroups,
    order_type_z, random_lifted, random_valuational, random_welded, semidirect_type_value,
    trivial_valuation_cyclic, trivial_valuation_qo, z2_group, ExampleName,
};
use cqo::laws::lemma_suite;
use cqo::qorder::{ConvexCase, QuasiOrder, TotalOrder};
use cqo::structure::{
    component_subgroups, decompose, reconstruct, reconstruct_report, type_component, type_valuation,
};
use cqo_cli::commands::{classify, cmd_decompose, cmd_reconstruct, gen_example, Format, EXIT_OK};
use cqo_cli::spec::{JobSpec, Subject, WindowSpec};

const PLANAR: [ExampleName; 3] = [ExampleName::A, ExampleName::B, ExampleName::C];

fn built(spec: &JobSpec) -> QuasiOrder {
    match spec.build().expect("job builds") {
        Subject::Qo(q) => q,
        _ => panic!("expected a quasi-order job"),
    }
}

fn generated(name: ExampleName, radius: u64) -> (JobSpec, QuasiOrder) {
    let window = WindowSpec {
        eval_radius: radius,
        term_radius: 2 * radius,
    };
    let spec = gen_example(name, Some(window), Default::default());
    let q = built(&spec);
    (spec, q)
}

fn planar(c: &Carrier, i: usize) -> (i64, i64) {
    let e = c.element(i);
    let p = e.coords().expect("planar element");
    (i64::try_from(&p[0]).unwrap(), i64::try_from(&p[1]).unwrap())
}

fn parse_label(s: &str) -> (i64, i64) {
    let (a, b) = s
        .trim_start_matches('(')
        .trim_end_matches(')')
        .split_once(',')
        .expect("planar label");
    (a.trim().parse().unwrap(), b.trim().parse().unwrap())
}

fn eval_where(c: &Carrier, f: impl Fn(i64, i64) -> bool) -> BTreeSet<(i64, i64)> {
    c.eval()
        .iter()
        .map(|&i| planar(c, i))
        .filter(|&(a, b)| f(a, b))
        .collect()
}

fn eval_in(c: &Carrier, members: impl IntoIterator<Item = usize>) -> BTreeSet<(i64, i64)> {
    members
        .into_iter()
        .filter(|&i| c.is_eval(i))
        .map(|i| planar(c, i))
        .collect()
}

fn flags(set: &[bool]) -> Vec<usize> {
    (0..set.len()).filter(|&i| set[i]).collect()
}

fn timed(limit: Duration, f: impl FnOnce()) {
    let start = Instant::now();
    f();
    let took = start.elapsed();
    assert!(took < limit, "took {took:?}, limit {limit:?}");
}

fn axiom_fixtures() {
    let policy = WindowPolicy::new(4, 8).unwrap();
    timed(Duration::from_secs(10), || {
        let z = Arc::new(Carrier::new(Group::free_abelian(1).unwrap(), policy).unwrap());
        let rel = crel_from_order(&TotalOrder::lexicographic(z).unwrap());
        let mut r = check_c_axioms(&rel);
        r.extend(check_compatibility(&rel));
        assert!(r.holds(), "order on Z: {r}");
        assert!(r.entries.iter().all(|e| e.checked > 0), "order on Z: {r}");
    });
    timed(Duration::from_secs(10), || {
        let z2 = Arc::new(Carrier::new(z2_group(), policy).unwrap());
        let rel = crel_from_valuation(&base_valuation(z2)).unwrap();
        let mut r = check_c_axioms(&rel);
        r.extend(check_compatibility(&rel));
        assert!(r.holds(), "valuation on Z^2: {r}");
        assert!(
            r.entries.iter().all(|e| e.checked > 0),
            "valuation on Z^2: {r}"
        );
    });
}

fn round_trips(label: &str, q: &QuasiOrder, rel: &CRelation) {
    let q_back = qo_from_crel(rel).unwrap_or_else(|e| panic!("{label}: {e}"));
    assert_eq!(
        q_back.first_difference(q),
        None,
        "{label}: quasi-order from relation"
    );
    let rel_back = crel_from_qo(&q_back).unwrap();
    assert_eq!(
        rel_back.first_difference(rel),
        None,
        "{label}: relation round trip"
    );
    let q_again = qo_from_crel(&crel_from_qo(q).unwrap()).unwrap();
    assert_eq!(
        q_again.first_difference(q),
        None,
        "{label}: quasi-order round trip"
    );
}

fn correspondence() {
    for name in ExampleName::ALL {
        let q = example_default(name).unwrap();
        let c = q.carrier().clone();
        let keys: Vec<Option<Vec<i64>>> = (0..c.size())
            .map(|i| example_key(name, &c.element(i)))
            .collect();
        let cc = c.clone();
        let rel = CRelation::from_fn(c, move |x, y, z| {
            let near = keys[cc.div(y, z)?].as_ref()?;
            let far = keys[cc.div(x, z)?].as_ref()?;
            Some(near < far)
        });
        round_trips(&format!("example {name}"), &q, &rel);
    }
    for seed in 0..10 {
        let q = random_valuational(seed).unwrap();
        assert!(q.carrier().size() <= 12);
        let table = crel_from_qo(&q).unwrap().materialize().unwrap();
        round_trips(&format!("random valuational {seed}"), &q, &table);
    }
}

fn example_reproduction() {
    for name in PLANAR {
        let (_, q) = generated(name, 4);
        let c = q.carrier().clone();
        let report = classify(&q).unwrap();

        let expected = |x: i64, y: i64| match (name, x.signum(), y.signum()) {
            (_, 0, 0) => ElementType::Identity,
            (ExampleName::C, 0, -1) => ElementType::OMinus,
            (ExampleName::C, 0, _) => ElementType::OPlus,
            (_, 0, _) => ElementType::VType,
            (_, -1, _) => ElementType::OMinus,
            _ => ElementType::OPlus,
        };
        assert_eq!(report.types.len(), c.eval().len(), "{name}");
        for (label, t) in &report.types {
            let (x, y) = parse_label(label);
            assert_eq!(*t, expected(x, y), "{name} at {label}");
        }

        let g = q.index(&Element::vec([0, 1])).unwrap();
        let h = q.index(&Element::vec([1, 0])).unwrap();
        let tg = type_component(&q, g).unwrap();
        assert_eq!(
            eval_in(&c, tg.members.iter().copied()),
            eval_where(&c, |x, y| x == 0 && y != 0),
            "{name}: T_g"
        );
        let sg = component_subgroups(&q, g).unwrap();
        let sh = component_subgroups(&q, h).unwrap();
        assert_eq!(
            eval_in(&c, flags(&sg.lower)),
            eval_where(&c, |x, y| x == 0 && y == 0)
        );
        assert_eq!(eval_in(&c, flags(&sg.upper)), eval_where(&c, |x, _| x == 0));
        assert_eq!(eval_in(&c, flags(&sh.upper)), eval_where(&c, |_, _| true));
        assert_eq!(eval_in(&c, flags(&sh.lower)), eval_where(&c, |x, _| x == 0));

        let points: BTreeSet<(i64, i64)> = report
            .welding_points
            .iter()
            .map(|l| parse_label(l))
            .collect();
        let minus_points: BTreeSet<(i64, i64)> = report
            .welding_points
            .iter()
            .filter(|l| report.types[*l] == ElementType::OMinus)
            .map(|l| parse_label(l))
            .collect();
        match name {
            ExampleName::B => {
                assert_eq!(
                    minus_points,
                    eval_where(&c, |x, _| x < 0),
                    "b: o-minus welding points"
                );
                assert_eq!(
                    points,
                    eval_where(&c, |x, y| x < 0 || (x == 0 && y != 0)),
                    "b: all welding points"
                );
                assert!(report.welded);
            }
            _ => {
                assert!(points.is_empty(), "{name}: welding points");
                assert!(!report.welded);
            }
        }
    }
}

fn check_decomposition(label: &str, q: &QuasiOrder) {
    assert!(check_cqo_axioms(q).holds(), "{label}: not a C-quasi-order");
    let d = decompose(q).unwrap_or_else(|e| panic!("{label}: {e}"));
    let back = reconstruct(&d).unwrap();
    assert_eq!(back.first_difference(q), None, "{label}: reconstruction");
    let from_report = reconstruct_report(q.carrier().clone(), &d.report()).unwrap();
    assert_eq!(
        from_report.first_difference(q),
        None,
        "{label}: report reconstruction"
    );
    assert_eq!(
        d.welds.is_empty(),
        type_report(q).welding_points.is_empty(),
        "{label}: welds versus welding points"
    );
    for f in &d.fibers {
        assert_ne!(
            f.kind.tag,
            ElementaryTag::Neither,
            "{label}: fiber {}",
            f.gamma
        );
    }
    assert_eq!(
        d.adjacent_valuational(),
        None,
        "{label}: adjacent valuational fibers"
    );
}

fn structure_round_trip() {
    for name in ExampleName::ALL {
        let q = example_default(name).unwrap();
        check_decomposition(&format!("example {name}"), &q);

        let spec = gen_example(name, None, Default::default());
        let out = cmd_decompose(&spec, Format::Json);
        assert_eq!(out.code, EXIT_OK, "{name}: {}", out.stderr);
        let back = cmd_reconstruct(&out.stdout, Some(&spec), Format::Json);
        assert_eq!(back.code, EXIT_OK, "{name}: {}", back.stderr);
    }
    let mut welded = 0;
    for seed in 0..10 {
        let q = random_welded(seed).unwrap();
        assert!(type_report(&q).is_welded, "welded seed {seed}");
        check_decomposition(&format!("welded seed {seed}"), &q);
        welded += usize::from(!decompose(&q).unwrap().welds.is_empty());
    }
    assert_eq!(welded, 10);
    for seed in 0..10 {
        check_decomposition(
            &format!("lifted seed {seed}"),
            &random_lifted(seed).unwrap(),
        );
    }
}

/// Direct evaluation of the three C-quasi-order axioms in their two-sided forms.
fn cq_oracle(c: &Carrier, r: &[u64]) -> bool {
    let n = c.size();
    let (id, le) = (c.id(), |a: usize, b: usize| r[a] <= r[b]);
    let m = |a, b| c.mul(a, b).unwrap();
    let cq1 = (0..n).all(|x| x == id || r[id] < r[x]);
    let cq2 = (0..n).all(|x| (0..n).all(|y| le(x, y) == le(m(x, c.inv(y)), c.inv(y))));
    let conj = |g, z| m(m(c.inv(z), g), z);
    let cq3 =
        (0..n).all(|x| (0..n).all(|y| (0..n).all(|z| le(x, y) == le(conj(x, z), conj(y, z)))));
    cq1 && cq2 && cq3
}

/// Valuational quasi-orders: every element has the rank of its inverse; the
/// extracted valuation sends the identity to infinity and reverses ranks
/// elsewhere, and must satisfy the valuation axioms.
fn valuation_oracle(c: &Carrier, r: &[u64]) -> bool {
    let n = c.size();
    let id = c.id();
    if (0..n).any(|x| r[x] != r[c.inv(x)]) {
        return false;
    }
    let top = *r.iter().max().unwrap() + 1;
    let v = |x: usize| -> Option<u64> { (x != id && r[x] != r[id]).then(|| top - r[x]) };
    let at_least = |a: Option<u64>, b: Option<u64>| match (a, b) {
        (None, _) => true,
        (Some(_), None) => false,
        (Some(a), Some(b)) => a >= b,
    };
    let m = |a, b| c.mul(a, b).unwrap();
    // The induced quasi-order must be the one we started from.
    let induced = (0..n).all(|x| (0..n).all(|y| (r[x] <= r[y]) == at_least(v(x), v(y))));
    let infinite_at_identity_only = (0..n).all(|g| v(g).is_none() == (g == id));
    let ultrametric = (0..n).all(|g| {
        (0..n).all(|h| {
            let low = if at_least(v(g), v(h)) { v(h) } else { v(g) };
            at_least(v(m(g, c.inv(h))), low)
        })
    });
    let conj = |g, z| m(m(c.inv(z), g), z);
    let conjugation = (0..n).all(|g| {
        (0..n)
            .all(|h| (0..n).all(|z| at_least(v(h), v(g)) == at_least(v(conj(h, z)), v(conj(g, z)))))
    });
    induced && infinite_at_identity_only && ultrametric && conjugation
}

fn surjective_rankings(n: usize) -> Vec<Vec<u64>> {
    let mut out = Vec::new();
    let total = n.pow(n as u32);
    for code in 0..total {
        let mut r = Vec::with_capacity(n);
        let mut k = code;
        for _ in 0..n {
            r.push((k % n) as u64);
            k /= n;
        }
        let used: BTreeSet<u64> = r.iter().copied().collect();
        if used.iter().copied().eq(0..used.len() as u64) {
            out.push(r);
        }
    }
    out
}

fn small_group_sweep() {
    timed(Duration::from_secs(60), || {
        let c2 = Group::cyclic(2).unwrap();
        let groups = [
            ("Z2", c2.clone()),
            ("Z3", Group::cyclic(3).unwrap()),
            ("Z4", Group::cyclic(4).unwrap()),
            ("Z2xZ2", Group::table_product(&c2, &c2).unwrap()),
        ];
        for (label, g) in groups {
            let c = Arc::new(Carrier::new(g, WindowPolicy::with_radius(1)).unwrap());
            let (mut cq, mut val) = (BTreeSet::new(), BTreeSet::new());
            for r in surjective_rankings(c.size()) {
                let ranks: Vec<Option<u64>> = r.iter().map(|&x| Some(x)).collect();
                let q = QuasiOrder::from_ranks(c.clone(), &ranks).unwrap();
                let cq_lib = check_cqo_axioms(&q).holds();
                let val_lib = extract_valuation(&q)
                    .map(|v| check_valuation_axioms(&v).holds() && v.induced_qo().agrees_with(&q))
                    .unwrap_or(false);
                let (cq_direct, val_direct) = (cq_oracle(&c, &r), valuation_oracle(&c, &r));
                assert_eq!(cq_lib, cq_direct, "{label} {r:?}: CQ axioms");
                assert_eq!(val_lib, val_direct, "{label} {r:?}: valuation axioms");
                if cq_direct {
                    cq.insert(r.clone());
                }
                if val_direct {
                    val.insert(r);
                }
            }
            assert!(!cq.is_empty(), "{label}: no C-quasi-orders");
            assert_eq!(cq, val, "{label}");
        }
    });
}

/// First matching case of the strict-convexity characterization, read off
/// directly from the convex hull of `s` and the classes of its extremes.
fn convexity_oracle(q: &QuasiOrder, s: &[usize]) -> (ConvexCase, Vec<usize>) {
    let scope = q.scope();
    let r = |a: usize| q.rank(a).unwrap();
    let convex = |set: &BTreeSet<usize>| {
        scope.iter().all(|&a| {
            set.contains(&a)
                || !(set.iter().any(|&x| r(x) <= r(a)) && set.iter().any(|&y| r(a) <= r(y)))
        })
    };
    let strict = scope.iter().all(|&a| {
        s.contains(&a) || !(s.iter().any(|&x| r(x) < r(a)) && s.iter().any(|&y| r(a) < r(y)))
    });
    let set: BTreeSet<usize> = s.iter().copied().collect();
    let Some(lo) = s.iter().map(|&a| r(a)).min() else {
        assert!(strict);
        return (ConvexCase::Convex, Vec::new());
    };
    let hi = s.iter().map(|&a| r(a)).max().unwrap();
    let class = |k: u32| scope.iter().copied().filter(move |&a| r(a) == k);
    let with = |ks: &[u32]| {
        let mut t = set.clone();
        for &k in ks {
            t.extend(class(k));
        }
        t
    };
    let outside = |t: BTreeSet<usize>| t.difference(&set).copied().collect::<Vec<_>>();
    let found = if convex(&set) {
        Some((ConvexCase::Convex, Vec::new()))
    } else if convex(&with(&[lo])) {
        Some((ConvexCase::RightConvexMin, outside(with(&[lo]))))
    } else if convex(&with(&[hi])) {
        Some((ConvexCase::LeftConvexMax, outside(with(&[hi]))))
    } else if convex(&with(&[lo, hi])) {
        Some((ConvexCase::BothEnds, outside(with(&[lo, hi]))))
    } else {
        None
    };
    assert_eq!(
        found.is_some(),
        strict,
        "characterization of strict convexity"
    );
    found.unwrap_or((ConvexCase::NotStrictlyConvex, Vec::new()))
}

fn finite_fixtures() -> Vec<(String, QuasiOrder)> {
    let mut out: Vec<(String, QuasiOrder)> = (0..10)
        .map(|s| {
            (
                format!("random valuational {s}"),
                random_valuational(s).unwrap(),
            )
        })
        .collect();
    out.push(("trivial Z6".into(), trivial_valuation_cyclic(6).unwrap()));
    out.push(("trivial Z5".into(), trivial_valuation_cyclic(5).unwrap()));
    let s3 = Arc::new(Carrier::new(Group::symmetric3(), WindowPolicy::with_radius(1)).unwrap());
    out.push(("trivial S3".into(), trivial_valuation_qo(s3.clone())));
    out.push(("chain S3".into(), chain_qo(s3)));
    for n in [4, 12] {
        out.push((
            format!("chain Z{n}"),
            chain_qo(Arc::new(make_cyclic(n).unwrap())),
        ));
    }
    out
}

/// Valuational quasi-order from a maximal chain of normal subgroups, each step one level.
fn chain_qo(c: Arc<Carrier>) -> QuasiOrder {
    let subs = normal_subgroups(&c);
    let mut chain = vec![vec![c.id()]];
    while let Some(next) = subs.iter().find(|s| {
        let cur = chain.last().unwrap();
        s.len() > cur.len() && cur.iter().all(|x| s.binary_search(x).is_ok())
    }) {
        chain.push(next.clone());
    }
    QuasiOrder::from_key_fn(c, |i| {
        chain.iter().position(|s| s.binary_search(&i).is_ok())
    })
    .unwrap()
}

fn all_fixtures() -> Vec<(String, QuasiOrder)> {
    let mut out: Vec<(String, QuasiOrder)> = ExampleName::ALL
        .iter()
        .map(|&n| (format!("example {n}"), example_default(n).unwrap()))
        .collect();
    out.extend(finite_fixtures());
    for s in 0..10 {
        out.push((format!("lifted {s}"), random_lifted(s).unwrap()));
        out.push((format!("welded {s}"), random_welded(s).unwrap()));
    }
    out.push((
        "order-type Z".into(),
        order_type_z(WindowPolicy::default()).unwrap(),
    ));
    for (label, q, is_cqo) in compatible_fixtures().unwrap() {
        if is_cqo {
            out.push((label, q));
        }
    }
    out
}

fn lemma_suite_and_convexity() {
    for (label, q) in all_fixtures() {
        let r = lemma_suite(&q).unwrap_or_else(|e| panic!("{label}: {e}"));
        assert!(r.holds(), "{label}: {r}");
    }
    let mut subsets = 0;
    for (label, q) in finite_fixtures() {
        let scope = q.scope();
        assert!(scope.len() <= 12, "{label}");
        for mask in 0u32..(1 << scope.len()) {
            let s: Vec<usize> = (0..scope.len())
                .filter(|&k| mask & (1 << k) != 0)
                .map(|k| scope[k])
                .collect();
            let (case, complement) = convexity_oracle(&q, &s);
            let got = q.classify_strict_convex(&s);
            assert_eq!(
                (got.case, &got.complement),
                (case, &complement),
                "{label} {s:?}"
            );
            assert_eq!(
                q.is_strictly_convex(&s),
                case != ConvexCase::NotStrictlyConvex
            );
            subsets += 1;
        }
    }
    assert!(subsets > 4096, "{subsets} subsets");
}

/// Sort key of the closed-form type value, with the identity on top.
fn closed_key(e: &Element) -> (bool, (u8, i64, u8)) {
    match semidirect_type_value(e).expect("semidirect element") {
        Some(t) => (false, t),
        None => (true, (0, 0, 0)),
    }
}

fn type_valuations() {
    for (label, q) in all_fixtures() {
        let tv = type_valuation(&q).unwrap_or_else(|e| panic!("{label}: {e}"));
        let r = check_valuation_axioms(&tv.valuation);
        assert!(r.holds(), "{label}: {r}");
    }
    let (_, q) = {
        let spec = gen_example(ExampleName::E, None, Default::default());
        let q = built(&spec);
        (spec, q)
    };
    let c = q.carrier().clone();
    let v = type_valuation(&q).unwrap().valuation;
    for &x in c.eval() {
        for &y in c.eval() {
            assert_eq!(
                v.value(x).unwrap() <= v.value(y).unwrap(),
                closed_key(&c.element(x)) <= closed_key(&c.element(y)),
                "{} vs {}",
                c.label(x),
                c.label(y)
            );
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
    // Leading tag 1 marks the zero left part; the rest is (index, base value).
    assert_eq!(semidirect_type_value(&c.element(f)), Some(Some((1, 0, 1))));
    assert_eq!(
        semidirect_type_value(&c.element(fz)),
        Some(Some((1, -1, 1)))
    );
    let (vf, vfz) = (v.value(f).unwrap(), v.value(fz).unwrap());
    assert!(matches!(vf, Value::Fin(_)) && matches!(vfz, Value::Fin(_)));
    assert!(vfz < vf, "conjugate valued below f");
}

fn canonical_trees() {
    let q = order_type_z(WindowPolicy::default()).unwrap();
    let t = build_tree(&q);
    let distinct: Vec<usize> = (0..t.len())
        .filter(|&a| t.nodes()[a].rep.0 != t.nodes()[a].rep.1)
        .collect();
    let orbs = orbits(&t, q.carrier().eval());
    let chain = orbs
        .iter()
        .find(|o| o.nodes.contains(&distinct[0]))
        .unwrap();
    assert_eq!(chain.class, OrbitClass::NontrivialChain);
    let mut nodes = chain.nodes.clone();
    nodes.sort_unstable();
    assert_eq!(nodes, distinct, "order-type: one orbit of distinct pairs");

    let z6 = trivial_valuation_cyclic(6).unwrap();
    let t6 = build_tree(&z6);
    for o in orbits(&t6, z6.carrier().eval()) {
        assert!(matches!(
            o.class,
            OrbitClass::Antichain | OrbitClass::Singleton
        ));
        assert!(!o.window_incomplete);
    }
    assert_eq!(
        orbit_trichotomy(&z6, &t6).unwrap().case,
        Trichotomy::AllAntichains
    );

    for (name, want) in [
        (ExampleName::A, Trichotomy::HasChain),
        (ExampleName::E, Trichotomy::Mixed),
    ] {
        let q = built(&gen_example(name, None, Default::default()));
        let t = build_tree(&q);
        let r = orbit_trichotomy(&q, &t).unwrap();
        assert_eq!(r.case, want, "{name}");
        assert!(r.cross_check, "{name}: {r:?}");
    }

    let mut complete = 0;
    let fixtures = finite_fixtures();
    for (label, q) in &fixtures {
        assert!(check_cqo_axioms(q).holds(), "{label}");
        let c = q.carrier().clone();
        let t = build_tree(q);
        for &x in c.eval() {
            let upper = component_subgroups(q, x).unwrap().upper;
            for &y in c.eval() {
                if !upper[y] {
                    continue;
                }
                let p = classify_pair(q, &t, x, y).unwrap();
                if !p.window_incomplete {
                    assert!(p.consistent, "{label}: {p:?}");
                    complete += 1;
                }
            }
        }
    }
    assert!(complete > 100, "{complete} complete orbits");
}

fn compatible_bridge() {
    let z =
        Arc::new(Carrier::new(Group::free_abelian(1).unwrap(), WindowPolicy::default()).unwrap());
    let natural = TotalOrder::lexicographic(z).unwrap();
    let q = cqo_from_compatible_qo(natural.qo()).unwrap();
    let r = check_cqo_axioms(&q);
    assert!(r.holds(), "{r}");
    let direct = order_cqo_from_order(&natural).unwrap();
    assert_eq!(q.first_difference(&direct), None);

    for (label, q, expected) in compatible_fixtures().unwrap() {
        let c = q.carrier();
        let all_v = q
            .scope()
            .into_iter()
            .all(|g| g == c.id() || element_type(&q, g) == Some(ElementType::VType));
        let is_cqo = check_cqo_axioms(&q).holds();
        assert_eq!(is_cqo, expected, "{label}");
        assert_eq!(is_cqo, all_v, "{label}");
    }
}

#[test]
fn acceptance() {
    let criteria: [(&str, fn()); 9] = [
        ("axiom fixtures", axiom_fixtures),
        ("bijective correspondence", correspondence),
        ("example reproduction", example_reproduction),
        ("structure round trip", structure_round_trip),
        ("small-group sweep", small_group_sweep),
        (
            "lemma suite and strict convexity",
            lemma_suite_and_convexity,
        ),
        ("type-valuation", type_valuations),
        ("canonical tree", canonical_trees),
        ("compatible quasi-orders", compatible_bridge),
    ];
    let mut failed = Vec::new();
    for (k, (label, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let ok = catch_unwind(AssertUnwindSafe(run)).is_ok();
        let status = if ok { "PASS" } else { "FAIL" };
        // Written past the test harness's capture so the lines show in every run.
        writeln!(
            std::io::stdout().lock(),
            "criterion {}: {status} ({label}, {:.1?})",
            k + 1,
            start.elapsed()
        )
        .unwrap();
        if !ok {
            failed.push(k + 1);
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
