//! Reference quasi-ordered groups: the five worked examples on `Z^2` and its
//! Hahn and semidirect extensions (closed forms), small elementary examples,
//! compatible quasi-orders, and seeded random families.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use num_traits::ToPrimitive;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::carrier::{Action, Carrier, Element, Group, Int, WindowPolicy};
use crate::classify::{check_cqo_axioms, element_type, ElementType};
use crate::crel::Valuation;
use crate::error::{invalid, Error, Result};
use crate::qorder::QuasiOrder;
use crate::structure::{fiber_carrier, weld};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExampleName {
    A,
    B,
    C,
    D,
    E,
}

impl ExampleName {
    pub const ALL: [ExampleName; 5] = [
        ExampleName::A,
        ExampleName::B,
        ExampleName::C,
        ExampleName::D,
        ExampleName::E,
    ];

    /// Default window: radius 4/8 on `Z^2`, 1/2 for the Hahn-based examples.
    pub fn default_policy(self) -> WindowPolicy {
        match self {
            ExampleName::A | ExampleName::B | ExampleName::C => WindowPolicy::default(),
            ExampleName::D | ExampleName::E => WindowPolicy::new(1, 2).expect("valid radii"),
        }
    }
}

impl fmt::Display for ExampleName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ExampleName::A => "a",
            ExampleName::B => "b",
            ExampleName::C => "c",
            ExampleName::D => "d",
            ExampleName::E => "e",
        };
        f.write_str(s)
    }
}

impl FromStr for ExampleName {
    type Err = Error;

    fn from_str(s: &str) -> Result<ExampleName> {
        match s {
            "a" => Ok(ExampleName::A),
            "b" => Ok(ExampleName::B),
            "c" => Ok(ExampleName::C),
            "d" => Ok(ExampleName::D),
            "e" => Ok(ExampleName::E),
            _ => invalid(format!("unknown example {s:?} (expected a, b, c, d or e)")),
        }
    }
}

/// Index set of the Hahn window, both ends included.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct IndexSpan {
    pub lo: i64,
    pub hi: i64,
}

impl Default for IndexSpan {
    fn default() -> IndexSpan {
        IndexSpan { lo: -2, hi: 2 }
    }
}

impl IndexSpan {
    pub fn indices(self) -> Vec<Int> {
        (self.lo..=self.hi).map(Int::from).collect()
    }
}

fn small(x: &Int) -> Option<i64> {
    x.to_i64()
}

fn pair_of(e: &Element) -> Option<(i64, i64)> {
    match e.coords()? {
        [a, b] => Some((small(a)?, small(b)?)),
        _ => None,
    }
}

/// Value of the base valuation on `Z^2`: 1 off the vertical axis, 2 on it, `None` at 0.
pub fn base_value(a: i64, b: i64) -> Option<u8> {
    match (a, b) {
        (0, 0) => None,
        (0, _) => Some(2),
        _ => Some(1),
    }
}

/// Sort key of an example quasi-order on `Z^2` (a, b or c).
pub fn planar_key(name: ExampleName, a: i64, b: i64) -> Vec<i64> {
    match name {
        ExampleName::A => match (a, b) {
            (0, 0) => vec![0],
            (0, _) => vec![1],
            _ if a < 0 => vec![2],
            _ => vec![3, a],
        },
        ExampleName::B => match (a, b) {
            (0, 0) => vec![0],
            _ if a <= 0 => vec![1],
            _ => vec![2, a],
        },
        ExampleName::C => match (a, b) {
            (0, 0) => vec![0],
            (0, _) if b < 0 => vec![1],
            (0, _) => vec![2, b],
            _ if a < 0 => vec![3],
            _ => vec![4, a],
        },
        ExampleName::D | ExampleName::E => panic!("example {name} is not planar"),
    }
}

/// Element types of the planar examples.
pub fn planar_type(name: ExampleName, a: i64, b: i64) -> ElementType {
    match (name, a, b) {
        (_, 0, 0) => ElementType::Identity,
        (ExampleName::C, 0, _) if b < 0 => ElementType::OMinus,
        (ExampleName::C, 0, _) => ElementType::OPlus,
        (_, 0, _) => ElementType::VType,
        _ if a < 0 => ElementType::OMinus,
        _ => ElementType::OPlus,
    }
}

/// Key of the Hahn example: larger support minimum is lower, then Example (a) on the leading coefficient.
pub fn hahn_key(h: &Element) -> Option<Vec<i64>> {
    let Element::Seq(m) = h else { return None };
    let Some((w, coef)) = m.iter().next() else {
        return Some(vec![0]);
    };
    let (a, b) = pair_of(coef)?;
    let mut k = vec![1, -small(w)?];
    k.extend(planar_key(ExampleName::A, a, b));
    Some(k)
}

/// Key of the semidirect example: nonzero left part on top, one class.
pub fn semidirect_key(e: &Element) -> Option<Vec<i64>> {
    let Element::Pair(k, h) = e else { return None };
    let k = small(&k.coords()?[0])?;
    if k != 0 {
        return Some(vec![1]);
    }
    let mut out = vec![0];
    out.extend(hahn_key(h)?);
    Some(out)
}

pub fn z2_group() -> Group {
    Group::free_abelian(2).expect("rank 2")
}

pub fn hahn_group(span: IndexSpan) -> Result<Group> {
    if span.lo > span.hi {
        return invalid("empty index span");
    }
    Group::hahn(&span.indices(), z2_group())
}

pub fn semidirect_group(span: IndexSpan) -> Result<Group> {
    Group::semidirect(Group::free_abelian(1)?, hahn_group(span)?, Action::Shift)
}

pub fn example_group(name: ExampleName, span: IndexSpan) -> Result<Group> {
    match name {
        ExampleName::A | ExampleName::B | ExampleName::C => Ok(z2_group()),
        ExampleName::D => hahn_group(span),
        ExampleName::E => semidirect_group(span),
    }
}

/// Closed-form sort key of a named example on payloads of its group.
pub fn example_key(name: ExampleName, e: &Element) -> Option<Vec<i64>> {
    match name {
        ExampleName::A | ExampleName::B | ExampleName::C => {
            let (a, b) = pair_of(e)?;
            Some(planar_key(name, a, b))
        }
        ExampleName::D => hahn_key(e),
        ExampleName::E => semidirect_key(e),
    }
}

/// The named example on a carrier of its group.
pub fn example_on(name: ExampleName, carrier: Arc<Carrier>) -> Result<QuasiOrder> {
    let c = carrier.clone();
    QuasiOrder::from_key_fn(carrier, |i| example_key(name, &c.element(i)))
}

pub fn example(name: ExampleName, policy: WindowPolicy, span: IndexSpan) -> Result<QuasiOrder> {
    let carrier = Arc::new(Carrier::new(example_group(name, span)?, policy)?);
    example_on(name, carrier)
}

/// Example at its default window.
pub fn example_default(name: ExampleName) -> Result<QuasiOrder> {
    example(name, name.default_policy(), IndexSpan::default())
}

/// Base valuation on a `Z^2` carrier (values 1 and 2).
pub fn base_valuation(carrier: Arc<Carrier>) -> Valuation {
    let c = carrier.clone();
    Valuation::from_key_fn(carrier, |i| {
        let (a, b) = pair_of(&c.element(i))?;
        Some(base_value(a, b))
    })
}

/// Support-minimum valuation on a Hahn carrier.
pub fn support_valuation(carrier: Arc<Carrier>) -> Valuation {
    let c = carrier.clone();
    Valuation::from_key_fn(carrier, |i| match c.element(i) {
        Element::Seq(m) => Some(m.keys().next().and_then(small)),
        _ => None,
    })
}

/// Type-valuation of the semidirect example in closed form: `(0, 0)` for a
/// nonzero left part, otherwise `(1, w, base value of the leading coefficient)`.
pub fn semidirect_type_value(e: &Element) -> Option<Option<(u8, i64, u8)>> {
    let Element::Pair(k, h) = e else { return None };
    if small(&k.coords()?[0])? != 0 {
        return Some(Some((0, 0, 0)));
    }
    let Element::Seq(m) = &**h else { return None };
    let Some((w, coef)) = m.iter().next() else {
        return Some(None);
    };
    let (a, b) = pair_of(coef)?;
    Some(Some((1, small(w)?, base_value(a, b)?)))
}

/// Fiber quasi-orders over `v` from a key on coset representatives.
pub fn fibers_from_key<K, F>(v: &Valuation, key: F) -> Result<Vec<QuasiOrder>>
where
    K: Ord + Send,
    F: Fn(u32, &Element) -> Option<K> + Sync,
{
    (0..v.gamma_len() as u32)
        .map(|y| {
            let fc = fiber_carrier(v, y)?;
            let c = fc.clone();
            QuasiOrder::from_key_fn(fc, |k| key(y, &c.element(k)))
        })
        .collect()
}

/// Order-type C-quasi-order on a windowed `Z`: `0 < negatives < 1 < 2 < ...`.
pub fn order_type_z(policy: WindowPolicy) -> Result<QuasiOrder> {
    let c = Arc::new(Carrier::new(Group::free_abelian(1)?, policy)?);
    let cc = c.clone();
    QuasiOrder::from_key_fn(c, |i| {
        let x = small(&cc.element(i).coords()?[0])?;
        Some(match x {
            0 => vec![0],
            _ if x < 0 => vec![1],
            _ => vec![2, x],
        })
    })
}

/// Trivial valuation: identity below one class holding everything else.
pub fn trivial_valuation_qo(carrier: Arc<Carrier>) -> QuasiOrder {
    let id = carrier.id();
    QuasiOrder::from_key_fn(carrier, |i| Some(u8::from(i != id))).expect("total key")
}

pub fn trivial_valuation_cyclic(n: usize) -> Result<QuasiOrder> {
    Ok(trivial_valuation_qo(Arc::new(crate::carrier::make_cyclic(
        n,
    )?)))
}

/// Compatible quasi-orders on abelian windows, with whether each is a C-quasi-order.
pub fn compatible_fixtures() -> Result<Vec<(String, QuasiOrder, bool)>> {
    let z = Arc::new(Carrier::new(
        Group::free_abelian(1)?,
        WindowPolicy::default(),
    )?);
    let z2 = Arc::new(Carrier::new(z2_group(), WindowPolicy::new(3, 6)?)?);
    let coords = |c: &Arc<Carrier>, i: usize| -> Option<Vec<i64>> {
        c.element(i).coords()?.iter().map(small).collect()
    };
    let natural = {
        let c = z.clone();
        QuasiOrder::from_key_fn(z.clone(), |i| coords(&c, i))?
    };
    let lex = {
        let c = z2.clone();
        QuasiOrder::from_key_fn(z2.clone(), |i| coords(&c, i))?
    };
    let first_nonzero = {
        let c = z2.clone();
        QuasiOrder::from_key_fn(z2.clone(), |i| {
            let v = coords(&c, i)?;
            Some(match v.iter().position(|&x| x != 0) {
                None => 0,
                Some(p) => 2 - p,
            })
        })?
    };
    let mixed = {
        let c = z2.clone();
        QuasiOrder::from_key_fn(z2.clone(), |i| {
            let v = coords(&c, i)?;
            Some(if v[0] == 0 { (0, v[1]) } else { (1, 0) })
        })?
    };
    Ok(vec![
        ("natural_z".into(), natural, false),
        (
            "trivial_valuation_z6".into(),
            trivial_valuation_cyclic(6)?,
            true,
        ),
        (
            "trivial_valuation_z5".into(),
            trivial_valuation_cyclic(5)?,
            true,
        ),
        ("lexicographic_z2".into(), lex, false),
        ("first_nonzero_z2".into(), first_nonzero, true),
        ("mixed_z2".into(), mixed, false),
    ])
}

/// Table groups of order at most 12.
pub fn small_table_groups() -> Vec<Group> {
    let cyc = |n: usize| Group::cyclic(n).expect("positive order");
    let mut out: Vec<Group> = (1..=12).map(cyc).collect();
    let prod = |a: &Group, b: &Group| Group::table_product(a, b).expect("table groups");
    out.push(prod(&cyc(2), &cyc(2)));
    out.push(prod(&cyc(2), &cyc(4)));
    out.push(prod(&cyc(3), &cyc(3)));
    out.push(prod(&cyc(2), &cyc(6)));
    out.push(Group::symmetric3());
    out.push(prod(&cyc(2), &Group::symmetric3()));
    out
}

/// Normal subgroups of a finite carrier as sorted index sets, generated by at most two elements.
pub fn normal_subgroups(c: &Carrier) -> Vec<Vec<usize>> {
    let n = c.size();
    let generate = |gens: &[usize]| -> Vec<usize> {
        let mut set = vec![false; n];
        set[c.id()] = true;
        let mut frontier = vec![c.id()];
        while let Some(x) = frontier.pop() {
            for &g in gens {
                let y = c.mul(x, g).expect("finite group");
                if !set[y] {
                    set[y] = true;
                    frontier.push(y);
                }
            }
        }
        (0..n).filter(|&i| set[i]).collect()
    };
    let mut subs: Vec<Vec<usize>> = Vec::new();
    for a in 0..n {
        for b in a..n {
            let s = generate(&[a, b]);
            if !subs.contains(&s) {
                subs.push(s);
            }
        }
    }
    subs.retain(|s| {
        s.iter().all(|&x| {
            (0..n).all(|z| {
                s.binary_search(&c.conj(x, z).expect("finite group"))
                    .is_ok()
            })
        })
    });
    subs.sort_by_key(|s| (s.len(), s.clone()));
    subs
}

/// Random valuational quasi-order on a table group of order at most 12: a
/// random chain of normal subgroups, each step one level.
pub fn random_valuational(seed: u64) -> Result<QuasiOrder> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let groups: Vec<Group> = small_table_groups()
        .into_iter()
        .filter(|g| g.universe(0).len() > 1)
        .collect();
    let g = groups.choose(&mut rng).expect("nonempty list").clone();
    let c = Arc::new(Carrier::new(g, WindowPolicy::with_radius(1))?);
    let subs = normal_subgroups(&c);
    let mut chain = vec![vec![c.id()]];
    while chain.last().expect("nonempty").len() < c.size() {
        let cur = chain.last().expect("nonempty");
        let bigger: Vec<&Vec<usize>> = subs
            .iter()
            .filter(|s| s.len() > cur.len() && cur.iter().all(|x| s.binary_search(x).is_ok()))
            .collect();
        chain.push((*bigger.choose(&mut rng).expect("whole group qualifies")).clone());
    }
    QuasiOrder::from_key_fn(c, |i| {
        chain.iter().position(|s| s.binary_search(&i).is_ok())
    })
}

#[derive(Clone, Debug)]
enum BlockFiber {
    Order(Vec<i64>),
    Trivial,
    FirstNonzero,
}

/// Lift over a random block decomposition of `Z^2` (window 3/6) or `Z^3` (window 2/4):
/// each block of coordinates carries an order-type, trivial-valuation or
/// first-nonzero fiber; with probability one half a weld is applied at a random o-minus class.
pub fn random_lifted(seed: u64) -> Result<QuasiOrder> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let q = block_lift(&mut rng)?;
    if !rng.gen_bool(0.5) {
        return Ok(q);
    }
    Ok(try_weld(&q, &mut rng).unwrap_or(q))
}

/// Like [`random_lifted`], but always welded: block layouts are redrawn until a weld applies.
pub fn random_welded(seed: u64) -> Result<QuasiOrder> {
    for attempt in 0..256u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(
            seed.wrapping_mul(0x9e37_79b9_7f4a_7c15)
                .wrapping_add(attempt),
        );
        let q = block_lift(&mut rng)?;
        if let Some(w) = try_weld(&q, &mut rng) {
            return Ok(w);
        }
    }
    Err(Error::Internal(format!(
        "no weldable layout found for seed {seed}"
    )))
}

fn block_lift(rng: &mut ChaCha8Rng) -> Result<QuasiOrder> {
    let k: usize = rng.gen_range(2..=3);
    let policy = if k == 2 {
        WindowPolicy::new(3, 6)?
    } else {
        WindowPolicy::new(2, 4)?
    };
    let mut bounds = vec![0];
    for i in 1..k {
        if rng.gen_bool(0.5) {
            bounds.push(i);
        }
    }
    bounds.push(k);
    let blocks: Vec<(usize, usize)> = bounds.windows(2).map(|w| (w[0], w[1])).collect();
    let fibers: Vec<BlockFiber> = blocks
        .iter()
        .map(|&(s, e)| match rng.gen_range(0..3) {
            0 => BlockFiber::Order(
                (s..e)
                    .map(|_| if rng.gen_bool(0.5) { 1 } else { -1 })
                    .collect(),
            ),
            1 => BlockFiber::Trivial,
            _ => BlockFiber::FirstNonzero,
        })
        .collect();
    let c = Arc::new(Carrier::new(Group::free_abelian(k)?, policy)?);
    let cc = c.clone();
    let nb = blocks.len() as i64;
    let q = QuasiOrder::from_key_fn(c.clone(), |i| {
        let x: Vec<i64> = cc
            .element(i)
            .coords()?
            .iter()
            .map(small)
            .collect::<Option<_>>()?;
        let Some(b) = blocks
            .iter()
            .position(|&(s, e)| x[s..e].iter().any(|&t| t != 0))
        else {
            return Some(vec![0]);
        };
        let y = &x[blocks[b].0..blocks[b].1];
        let mut key = vec![1, nb - b as i64];
        match &fibers[b] {
            BlockFiber::Order(signs) => {
                let s: Vec<i64> = y.iter().zip(signs).map(|(a, b)| a * b).collect();
                if s.iter().find(|&&t| t != 0).is_some_and(|&t| t < 0) {
                    key.push(1);
                } else {
                    key.push(2);
                    key.extend(s);
                }
            }
            BlockFiber::Trivial => key.push(1),
            BlockFiber::FirstNonzero => {
                let p = y.iter().position(|&t| t != 0).expect("nonzero block");
                key.push(1 + (y.len() - p) as i64);
            }
        }
        Some(key)
    })?;
    Ok(q)
}

/// Welds at a random o-minus class when that changes the quasi-order and keeps the axioms.
fn try_weld(q: &QuasiOrder, rng: &mut ChaCha8Rng) -> Option<QuasiOrder> {
    let mut minus_levels: Vec<usize> = Vec::new();
    for g in q.scope() {
        if element_type(q, g) == Some(ElementType::OMinus)
            && !minus_levels.iter().any(|&h| q.sim(g, h) == Some(true))
        {
            minus_levels.push(g);
        }
    }
    minus_levels.shuffle(rng);
    minus_levels.into_iter().find_map(|g| {
        let w = weld(q, g).ok()?;
        (w.levels() != q.levels() && check_cqo_axioms(&w).holds()).then_some(w)
    })
}
