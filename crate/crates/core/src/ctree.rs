//! Canonical tree of the C-relation of a C-quasi-order, the right action of
//! the group on it, orbits and the chain/antichain trichotomy.
//!
//! A node is a class of eval pairs `(x, y)` under the equivalence induced by
//! `(x,y) <= (u,v)  iff  {u y^-1, v y^-1} <= x y^-1`. Each pair is grouped by its
//! ball `{u | u y^-1 <= x y^-1}`; pairs with equal balls are equivalent.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::carrier::Carrier;
use crate::classify::{element_type, ElementType};
use crate::error::{domain, Result};
use crate::qorder::QuasiOrder;
use crate::structure::{component_subgroups, type_component, type_valuation, ComponentKind};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TreeNode {
    /// Enumeration-least member pair.
    pub rep: (usize, usize),
    pub members: Vec<(usize, usize)>,
}

#[derive(Clone, Debug)]
pub struct CanonicalTree {
    carrier: Arc<Carrier>,
    nodes: Vec<TreeNode>,
    /// Position of each eval element in the eval list.
    pos: HashMap<usize, usize>,
    /// Node of each pair, indexed by eval positions.
    pair_node: Vec<Option<usize>>,
    /// Ball of each node as a bitset over eval positions.
    balls: Vec<Vec<u64>>,
    cover: Vec<Vec<usize>>,
    /// Pairs left out because their ball could not be decided inside the window.
    pub undecided_pairs: usize,
}

fn bit(set: &[u64], i: usize) -> bool {
    set[i / 64] >> (i % 64) & 1 == 1
}

fn set_bit(set: &mut [u64], i: usize) {
    set[i / 64] |= 1 << (i % 64);
}

/// Builds the tree on the eval universe of `q`'s carrier.
///
/// Membership of `u` in the ball of `(x, y)` is read from `u y^-1 <= x y^-1`, or
/// from `u x^-1 <= y x^-1` when the first comparison leaves the window. Pairs whose
/// ball is not fully decided are left out of the tree and counted in `undecided_pairs`.
pub fn build_tree(q: &QuasiOrder) -> CanonicalTree {
    let c = q.carrier().clone();
    let dom: Vec<usize> = q.scope();
    let m = dom.len();
    let words = m.div_ceil(64);
    let pos: HashMap<usize, usize> = dom.iter().enumerate().map(|(k, &x)| (x, k)).collect();
    let side = |u: usize, y: usize, x: usize| -> Option<bool> {
        let r = q.rank(c.div(x, y)?)?;
        Some(q.rank(c.div(u, y)?)? <= r)
    };
    let rows: Vec<Vec<Option<Vec<u64>>>> = dom
        .par_iter()
        .map(|&x| {
            dom.iter()
                .map(|&y| {
                    let mut ball = vec![0u64; words];
                    for (k, &u) in dom.iter().enumerate() {
                        match side(u, y, x).or_else(|| side(u, x, y)) {
                            Some(true) => set_bit(&mut ball, k),
                            Some(false) => {}
                            None => return None,
                        }
                    }
                    Some(ball)
                })
                .collect()
        })
        .collect();
    let mut index: HashMap<&Vec<u64>, usize> = HashMap::new();
    let mut nodes: Vec<TreeNode> = Vec::new();
    let mut balls: Vec<Vec<u64>> = Vec::new();
    let mut pair_node = vec![None; m * m];
    let mut undecided_pairs = 0;
    for (px, row) in rows.iter().enumerate() {
        for (py, ball) in row.iter().enumerate() {
            let Some(ball) = ball else {
                undecided_pairs += 1;
                continue;
            };
            let id = *index.entry(ball).or_insert_with(|| {
                nodes.push(TreeNode {
                    rep: (dom[px], dom[py]),
                    members: Vec::new(),
                });
                balls.push(ball.clone());
                nodes.len() - 1
            });
            nodes[id].members.push((dom[px], dom[py]));
            pair_node[px * m + py] = Some(id);
        }
    }
    let mut tree = CanonicalTree {
        carrier: c,
        nodes,
        pos,
        pair_node,
        balls,
        cover: Vec::new(),
        undecided_pairs,
    };
    tree.cover = tree.compute_cover();
    tree
}

impl CanonicalTree {
    pub fn carrier(&self) -> &Arc<Carrier> {
        &self.carrier
    }

    pub fn nodes(&self) -> &[TreeNode] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Node of an eval pair.
    pub fn node_of(&self, x: usize, y: usize) -> Option<usize> {
        let (px, py) = (self.pos.get(&x)?, self.pos.get(&y)?);
        self.pair_node[px * self.pos.len() + py]
    }

    /// Leaf `(x, x)` of an eval element.
    pub fn leaf(&self, x: usize) -> Option<usize> {
        self.node_of(x, x)
    }

    pub fn is_leaf(&self, a: usize) -> bool {
        let (x, y) = self.nodes[a].rep;
        x == y
    }

    /// `a <= b`: both coordinates of `b`'s representative lie in the ball of `a`.
    pub fn le(&self, a: usize, b: usize) -> bool {
        let (u, v) = self.nodes[b].rep;
        bit(&self.balls[a], self.pos[&u]) && bit(&self.balls[a], self.pos[&v])
    }

    pub fn lt(&self, a: usize, b: usize) -> bool {
        a != b && self.le(a, b)
    }

    pub fn comparable(&self, a: usize, b: usize) -> bool {
        self.le(a, b) || self.le(b, a)
    }

    /// Covering pairs: `cover()[a]` lists the nodes immediately above `a`.
    pub fn cover(&self) -> &[Vec<usize>] {
        &self.cover
    }

    fn compute_cover(&self) -> Vec<Vec<usize>> {
        let n = self.nodes.len();
        let words = n.div_ceil(64);
        let above: Vec<Vec<u64>> = (0..n)
            .into_par_iter()
            .map(|a| {
                let mut s = vec![0u64; words];
                for b in 0..n {
                    if self.lt(a, b) {
                        set_bit(&mut s, b);
                    }
                }
                s
            })
            .collect();
        (0..n)
            .into_par_iter()
            .map(|a| {
                let mut reach = vec![0u64; words];
                for c in (0..n).filter(|&c| bit(&above[a], c)) {
                    for (r, w) in reach.iter_mut().zip(&above[c]) {
                        *r |= w;
                    }
                }
                (0..n)
                    .filter(|&b| bit(&above[a], b) && !bit(&reach, b))
                    .collect()
            })
            .collect()
    }

    /// Right action `(x, y).g = (xg, yg)` on the representative; `None` when it leaves the eval universe.
    pub fn act(&self, a: usize, g: usize) -> Option<usize> {
        let (x, y) = self.nodes[a].rep;
        let c = &self.carrier;
        let (xg, yg) = (c.mul(x, g)?, c.mul(y, g)?);
        self.node_of(xg, yg)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OrbitClass {
    Singleton,
    Antichain,
    NontrivialChain,
    Neither,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Orbit {
    pub nodes: Vec<usize>,
    pub class: OrbitClass,
    /// Some action step from this orbit left the window: the orbit may be a fragment.
    pub window_incomplete: bool,
}

fn classify_nodes(tree: &CanonicalTree, nodes: &[usize]) -> OrbitClass {
    if nodes.len() == 1 {
        return OrbitClass::Singleton;
    }
    let mut any = false;
    let mut all = true;
    for (i, &a) in nodes.iter().enumerate() {
        for &b in &nodes[i + 1..] {
            let cmp = tree.comparable(a, b);
            any |= cmp;
            all &= cmp;
        }
    }
    match (any, all) {
        (false, _) => OrbitClass::Antichain,
        (true, true) => OrbitClass::NontrivialChain,
        _ => OrbitClass::Neither,
    }
}

/// Orbits of all nodes under the elements of `acting`, computed as connected
/// components of the partial action inside the window.
pub fn orbits(tree: &CanonicalTree, acting: &[usize]) -> Vec<Orbit> {
    let n = tree.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    let steps: Vec<(Vec<usize>, bool)> = (0..n)
        .into_par_iter()
        .map(|a| {
            let mut out = Vec::new();
            let mut cut = false;
            for &g in acting {
                match tree.act(a, g) {
                    Some(b) => out.push(b),
                    None => cut = true,
                }
            }
            (out, cut)
        })
        .collect();
    for (a, (targets, _)) in steps.iter().enumerate() {
        for &b in targets {
            let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
            if ra != rb {
                parent[ra.max(rb)] = ra.min(rb);
            }
        }
    }
    let mut groups: HashMap<usize, Vec<usize>> = HashMap::new();
    for a in 0..n {
        let r = find(&mut parent, a);
        groups.entry(r).or_default().push(a);
    }
    let mut out: Vec<Orbit> = groups
        .into_values()
        .map(|nodes| {
            let window_incomplete = nodes.iter().any(|&a| steps[a].1);
            let class = classify_nodes(tree, &nodes);
            Orbit {
                nodes,
                class,
                window_incomplete,
            }
        })
        .collect();
    out.sort_by_key(|o| o.nodes[0]);
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairPrediction {
    /// `x y^-1` is v-type (or trivial): the orbit is an antichain.
    Antichain,
    /// `x` is o-type and `x y^-1` lies in its component: the orbit under `G^x` is a nontrivial chain.
    NontrivialChain,
    /// `x y^-1` lies outside the component of `x`: the orbit under `G^x` is not a chain.
    NotChain,
}

impl PairPrediction {
    /// Whether an observed orbit (or window fragment of one) is consistent with the prediction.
    pub fn matches(self, class: OrbitClass, complete: bool) -> bool {
        match self {
            PairPrediction::Antichain => {
                matches!(class, OrbitClass::Antichain | OrbitClass::Singleton)
            }
            PairPrediction::NontrivialChain => {
                class == OrbitClass::NontrivialChain
                    || (!complete && class == OrbitClass::Singleton)
            }
            PairPrediction::NotChain => {
                !complete || matches!(class, OrbitClass::Antichain | OrbitClass::Neither)
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairClassification {
    pub predicted: PairPrediction,
    /// Orbit of the node of `(x, y)` under the eval members of `G^x`.
    pub observed: OrbitClass,
    pub window_incomplete: bool,
    /// `x y^-1` is v-type but shares its class with an o-type element.
    pub welded: bool,
    pub consistent: bool,
}

/// Predicts the orbit class of `(x, y)` from element types and compares it with
/// the orbit computed in `tree` under `G^x`. Requires `y` in `G^x`.
pub fn classify_pair(
    q: &QuasiOrder,
    tree: &CanonicalTree,
    x: usize,
    y: usize,
) -> Result<PairClassification> {
    let c = q.carrier();
    let sub = component_subgroups(q, x)?;
    if !sub.upper[y] {
        return domain(format!(
            "{} is not in the subgroup generated up to the component of {}",
            c.label(y),
            c.label(x)
        ));
    }
    let Some(d) = c.div(x, y) else {
        return domain("x y^-1 leaves the window");
    };
    let t = type_component(q, x)?;
    let dt = element_type(q, d);
    let predicted = match dt {
        Some(ElementType::VType | ElementType::Identity) => PairPrediction::Antichain,
        _ if element_type(q, x).is_some_and(|k| k.is_o()) && t.contains(d) => {
            PairPrediction::NontrivialChain
        }
        _ => PairPrediction::NotChain,
    };
    let acting: Vec<usize> = c.eval().iter().copied().filter(|&g| sub.upper[g]).collect();
    let Some(node) = tree.node_of(x, y) else {
        return domain("pair is outside the tree's window");
    };
    let orbit = orbits(tree, &acting)
        .into_iter()
        .find(|o| o.nodes.contains(&node))
        .expect("every node has an orbit");
    let welded = dt == Some(ElementType::VType)
        && q.class_of(d)
            .into_iter()
            .any(|h| element_type(q, h).is_some_and(|k| k.is_o()));
    Ok(PairClassification {
        predicted,
        welded,
        observed: orbit.class,
        window_incomplete: orbit.window_incomplete,
        consistent: predicted.matches(orbit.class, !orbit.window_incomplete),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Trichotomy {
    AllAntichains,
    HasChain,
    Mixed,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrichotomyReport {
    pub case: Trichotomy,
    /// An o-type element whose component is maximal, in the chain case.
    pub witness: Option<String>,
    pub orbit_count: usize,
    /// Orbit sweep under the whole eval universe agrees with the case.
    pub cross_check: bool,
    pub window_incomplete: bool,
}

/// Trichotomy from element types and the component order, cross-checked against an orbit sweep.
pub fn orbit_trichotomy(q: &QuasiOrder, tree: &CanonicalTree) -> Result<TrichotomyReport> {
    let c = q.carrier();
    let scope = q.scope();
    let all_v = scope
        .iter()
        .all(|&g| !element_type(q, g).is_some_and(|t| t.is_o()));
    let tv = type_valuation(q)?;
    let top = tv
        .components
        .first()
        .filter(|t| t.kind == ComponentKind::OComponent);
    let (case, witness) = if all_v {
        (Trichotomy::AllAntichains, None)
    } else if let Some(t) = top {
        {
            let w = t
                .members
                .iter()
                .copied()
                .find(|&m| c.is_eval(m))
                .unwrap_or(t.anchor);
            (Trichotomy::HasChain, Some(c.label(w)))
        }
    } else {
        (Trichotomy::Mixed, None)
    };
    let orbs = orbits(tree, c.eval());
    let window_incomplete = tree.undecided_pairs > 0 || orbs.iter().any(|o| o.window_incomplete);
    let all_anti = orbs
        .iter()
        .all(|o| matches!(o.class, OrbitClass::Antichain | OrbitClass::Singleton));
    let some_chain = orbs.iter().any(|o| o.class == OrbitClass::NontrivialChain);
    let cross_check = match case {
        Trichotomy::AllAntichains => all_anti,
        Trichotomy::HasChain => some_chain,
        Trichotomy::Mixed => !all_anti && (window_incomplete || !some_chain),
    };
    Ok(TrichotomyReport {
        case,
        witness,
        orbit_count: orbs.len(),
        cross_check,
        window_incomplete,
    })
}

/// DOT digraph of the covering relation; edges point from a node to the nodes covering it.
pub fn export_dot(tree: &CanonicalTree) -> String {
    let c = &tree.carrier;
    let mut out = String::from("digraph canonical_tree {\n");
    for (i, n) in tree.nodes.iter().enumerate() {
        let (x, y) = n.rep;
        let shape = if x == y { "box" } else { "ellipse" };
        let _ = writeln!(
            out,
            "  n{i} [label=\"({}, {})\", shape={shape}];",
            c.label(x),
            c.label(y)
        );
    }
    for (a, ups) in tree.cover.iter().enumerate() {
        for b in ups {
            let _ = writeln!(out, "  n{a} -> n{b};");
        }
    }
    out.push_str("}\n");
    out
}
