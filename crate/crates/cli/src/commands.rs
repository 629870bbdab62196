//! Subcommand bodies. Each returns an [`Outcome`] carrying the exit code and the rendered report.

use std::collections::BTreeMap;

use cqo::classify::{check_cqo_axioms, elementary_kind, type_report, ElementType, ElementaryTag};
use cqo::crel::{check_c_axioms, check_compatibility, check_valuation_axioms, AxiomReport};
use cqo::ctree::{build_tree, export_dot, orbit_trichotomy, TrichotomyReport};
use cqo::fixtures::{ExampleName, IndexSpan};
use cqo::qorder::QuasiOrder;
use cqo::structure::{
    decompose, reconstruct_report, subgroups_in, type_valuation, ComponentKind, DecompositionReport,
};
use serde::{Deserialize, Serialize};

use crate::spec::{ActionSpec, GroupSpec, JobSpec, QoSpec, Subject, ValSpec, WindowSpec};

pub const EXIT_OK: i32 = 0;
pub const EXIT_COUNTEREXAMPLE: i32 = 1;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_INTERNAL: i32 = 3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Json,
    Text,
    Dot,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Outcome {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

impl Outcome {
    fn ok(stdout: String) -> Outcome {
        Outcome {
            code: EXIT_OK,
            stdout,
            stderr: String::new(),
        }
    }

    fn with_code(code: i32, stdout: String) -> Outcome {
        Outcome {
            code,
            stdout,
            stderr: String::new(),
        }
    }

    pub fn fail(code: i32, msg: impl Into<String>) -> Outcome {
        Outcome {
            code,
            stdout: String::new(),
            stderr: msg.into(),
        }
    }
}

/// Exit code of a library error raised while building the input.
fn load_error(e: cqo::Error) -> Outcome {
    match e {
        cqo::Error::Internal(_) => Outcome::fail(EXIT_INTERNAL, e.to_string()),
        _ => Outcome::fail(EXIT_INPUT, e.to_string()),
    }
}

/// Exit code of a library error raised by an analysis of a well-formed input.
fn run_error(e: cqo::Error) -> Outcome {
    match e {
        cqo::Error::Internal(_) => Outcome::fail(EXIT_INTERNAL, e.to_string()),
        cqo::Error::Domain(_) => Outcome::fail(EXIT_COUNTEREXAMPLE, e.to_string()),
        cqo::Error::InvalidParameter(_) => Outcome::fail(EXIT_INPUT, e.to_string()),
    }
}

fn json<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("reports serialize");
    s.push('\n');
    s
}

fn no_dot(format: Format) -> Option<Outcome> {
    (format == Format::Dot).then(|| {
        Outcome::fail(
            EXIT_INPUT,
            "dot output is only available for the tree command",
        )
    })
}

/// Parses a job file and applies window overrides.
pub fn load(text: &str, radius: Option<u64>, term_radius: Option<u64>) -> Result<JobSpec, Outcome> {
    let mut spec = JobSpec::parse(text).map_err(|e| Outcome::fail(EXIT_INPUT, e))?;
    if let Some(r) = radius {
        spec.window.eval_radius = r;
        if term_radius.is_none() {
            spec.window.term_radius = spec.window.term_radius.max(2 * r);
        }
    }
    if let Some(t) = term_radius {
        spec.window.term_radius = t;
    }
    Ok(spec)
}

fn load_qo(spec: &JobSpec) -> Result<QuasiOrder, Outcome> {
    match spec.build().map_err(load_error)? {
        Subject::Qo(q) => Ok(q),
        _ => Err(Outcome::fail(EXIT_INPUT, "this command needs a \"qo\" job")),
    }
}

/// Builds a quasi-order and insists on the C-quasi-order axioms.
fn load_cqo(spec: &JobSpec) -> Result<QuasiOrder, Outcome> {
    let q = load_qo(spec)?;
    let report = check_cqo_axioms(&q);
    if let Some(e) = report.first_failure() {
        return Err(Outcome::fail(
            EXIT_COUNTEREXAMPLE,
            format!(
                "not a C-quasi-order: {} fails at ({})",
                e.name,
                e.counterexample_labels
                    .clone()
                    .unwrap_or_default()
                    .join(", ")
            ),
        ));
    }
    Ok(q)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CheckReport {
    pub subject: String,
    pub holds: bool,
    pub report: AxiomReport,
}

pub fn cmd_check(spec: &JobSpec, format: Format) -> Outcome {
    if let Some(o) = no_dot(format) {
        return o;
    }
    let subject = match spec.build() {
        Ok(s) => s,
        Err(e) => return load_error(e),
    };
    let (kind, report) = match &subject {
        Subject::Qo(q) => ("quasi_order", check_cqo_axioms(q)),
        Subject::Crel(r) => {
            let mut rep = check_c_axioms(r);
            rep.extend(check_compatibility(r));
            ("c_relation", rep)
        }
        Subject::Valuation(v) => ("valuation", check_valuation_axioms(v)),
    };
    let out = CheckReport {
        subject: kind.into(),
        holds: report.holds(),
        report,
    };
    let code = if out.holds {
        EXIT_OK
    } else {
        EXIT_COUNTEREXAMPLE
    };
    let text = match format {
        Format::Json => json(&out),
        _ => {
            let verdict = if out.holds {
                "all axioms hold"
            } else {
                "counterexample found"
            };
            format!("{}: {verdict}\n{}", out.subject, out.report)
        }
    };
    Outcome::with_code(code, text)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComponentSummary {
    pub anchor: String,
    pub kind: ComponentKind,
    /// Eval members of the component.
    pub members: Vec<String>,
    /// Eval members of the subgroup below the component.
    pub lower: Vec<String>,
    /// Eval members of the subgroup generated up to the component.
    pub upper: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassifyReport {
    pub elementary: ElementaryTag,
    /// Number of finite values of the extracted valuation, for valuational quasi-orders.
    pub gamma_size: Option<usize>,
    /// Ascending eval elements of the extracted order, for order-type quasi-orders.
    pub order: Option<Vec<String>>,
    pub types: BTreeMap<String, ElementType>,
    pub welding_points: Vec<String>,
    pub welded: bool,
    /// Components in decreasing component order, identity last.
    pub components: Vec<ComponentSummary>,
}

pub fn classify(q: &QuasiOrder) -> cqo::Result<ClassifyReport> {
    let c = q.carrier();
    let kind = elementary_kind(q);
    let tr = type_report(q);
    let types = c
        .eval()
        .iter()
        .filter_map(|&g| Some((c.label(g), tr.of(g)?)))
        .collect();
    let eval_labels = |set: &[bool]| -> Vec<String> {
        c.eval()
            .iter()
            .filter(|&&g| set[g])
            .map(|&g| c.label(g))
            .collect()
    };
    let tv = type_valuation(q)?;
    let components = tv
        .components
        .iter()
        .map(|t| {
            let (lower, upper) = subgroups_in(q, t);
            ComponentSummary {
                anchor: c.label(
                    t.members
                        .iter()
                        .copied()
                        .find(|&m| c.is_eval(m))
                        .unwrap_or(t.anchor),
                ),
                kind: t.kind,
                members: c.labels(&t.eval_members(c)),
                lower: eval_labels(&lower),
                upper: eval_labels(&upper),
            }
        })
        .collect();
    let order = kind.order.as_ref().map(|o| {
        let mut s: Vec<usize> = c
            .eval()
            .iter()
            .copied()
            .filter(|&g| o.qo().is_ranked(g))
            .collect();
        s.sort_by_key(|&g| o.qo().ranks()[g]);
        c.labels(&s)
    });
    Ok(ClassifyReport {
        elementary: kind.tag,
        gamma_size: kind.valuation.as_ref().map(|v| v.gamma_len()),
        order,
        types,
        welding_points: c.labels(
            &tr.welding_points
                .iter()
                .copied()
                .filter(|&g| c.is_eval(g))
                .collect::<Vec<_>>(),
        ),
        welded: tr.is_welded,
        components,
    })
}

pub fn cmd_classify(spec: &JobSpec, format: Format) -> Outcome {
    if let Some(o) = no_dot(format) {
        return o;
    }
    let q = match load_cqo(spec) {
        Ok(q) => q,
        Err(o) => return o,
    };
    let r = match classify(&q) {
        Ok(r) => r,
        Err(e) => return run_error(e),
    };
    let text = match format {
        Format::Json => json(&r),
        _ => {
            let mut s = format!("elementary: {}\n", tag_name(r.elementary));
            if let Some(n) = r.gamma_size {
                s += &format!("gamma size: {n}\n");
            }
            s += &format!("welding points: {}\n", r.welding_points.join(" "));
            for t in &r.components {
                s += &format!(
                    "component {:?} at {}: {} eval members\n",
                    t.kind,
                    t.anchor,
                    t.members.len()
                );
            }
            s
        }
    };
    Outcome::ok(text)
}

fn tag_name(t: ElementaryTag) -> &'static str {
    match t {
        ElementaryTag::Valuational => "valuational",
        ElementaryTag::OrderType => "order_type",
        ElementaryTag::Neither => "neither",
    }
}

/// Decomposition together with what is needed to rebuild its carrier.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecompositionFile {
    pub group: GroupSpec,
    pub window: WindowSpec,
    pub decomposition: DecompositionReport,
}

pub fn cmd_decompose(spec: &JobSpec, format: Format) -> Outcome {
    if let Some(o) = no_dot(format) {
        return o;
    }
    let q = match load_cqo(spec) {
        Ok(q) => q,
        Err(o) => return o,
    };
    let d = match decompose(&q) {
        Ok(d) => d,
        Err(e) => return run_error(e),
    };
    let file = DecompositionFile {
        group: spec.group.clone(),
        window: spec.window,
        decomposition: d.report(),
    };
    let text = match format {
        Format::Json => json(&file),
        _ => {
            let r = &file.decomposition;
            let mut s = format!("components: {}\n", r.components.len());
            for f in &r.fibers {
                s += &format!(
                    "fiber {}: {} ({} cosets)\n",
                    f.gamma,
                    tag_name(f.elementary),
                    f.cosets
                );
            }
            s += &format!("welds: {}\n", r.welds.len());
            s
        }
    };
    Outcome::ok(text)
}

pub fn cmd_reconstruct(text: &str, original: Option<&JobSpec>, format: Format) -> Outcome {
    if let Some(o) = no_dot(format) {
        return o;
    }
    let file: DecompositionFile = match serde_json::from_str(text) {
        Ok(f) => f,
        Err(e) => return Outcome::fail(EXIT_INPUT, format!("malformed decomposition file: {e}")),
    };
    let carrier = match crate::spec::build_carrier(&file.group, file.window) {
        Ok(c) => c,
        Err(e) => return load_error(e),
    };
    let q = match reconstruct_report(carrier, &file.decomposition) {
        Ok(q) => q,
        Err(e) => return load_error(e),
    };
    if let Some(orig) = original {
        let o = match load_qo(orig) {
            Ok(o) => o,
            Err(out) => return out,
        };
        if o.carrier().size() != q.carrier().size() {
            return Outcome::fail(EXIT_INPUT, "original job uses a different window");
        }
        let c = q.carrier();
        let o2 = match QuasiOrder::from_ranks(
            c.clone(),
            &(0..c.size())
                .map(|i| o.rank(i).map(u64::from))
                .collect::<Vec<_>>(),
        ) {
            Ok(o2) => o2,
            Err(e) => return load_error(e),
        };
        if let Some((a, b)) = q.first_difference(&o2) {
            return Outcome::fail(
                EXIT_COUNTEREXAMPLE,
                format!(
                    "reconstruction differs from the original at ({}, {})",
                    c.label(a),
                    c.label(b)
                ),
            );
        }
    }
    let out = JobSpec::from_qo(file.group, file.window, &q);
    match format {
        Format::Json => Outcome::ok(out.to_json() + "\n"),
        _ => {
            let levels = q.scope_levels();
            let mut s = String::new();
            for (k, l) in levels.iter().enumerate() {
                s += &format!("level {k}: {}\n", q.carrier().labels(l).join(" "));
            }
            Outcome::ok(s)
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeReport {
    pub id: usize,
    pub rep: (String, String),
    pub size: usize,
    pub leaf: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TreeReport {
    pub nodes: Vec<NodeReport>,
    /// Covering pairs `(lower, upper)`.
    pub edges: Vec<(usize, usize)>,
    pub undecided_pairs: usize,
    pub trichotomy: TrichotomyReport,
}

fn case_name(r: &TrichotomyReport) -> String {
    serde_json::to_value(r.case)
        .ok()
        .and_then(|v| v.as_str().map(str::to_string))
        .unwrap_or_default()
}

pub fn cmd_tree(spec: &JobSpec, format: Format) -> Outcome {
    let q = match load_cqo(spec) {
        Ok(q) => q,
        Err(o) => return o,
    };
    let tree = build_tree(&q);
    let tri = match orbit_trichotomy(&q, &tree) {
        Ok(t) => t,
        Err(e) => return run_error(e),
    };
    let c = tree.carrier();
    let line = format!("trichotomy: {}", case_name(&tri));
    match format {
        Format::Dot => Outcome::ok(format!("// {line}\n{}", export_dot(&tree))),
        Format::Text => {
            let edges: usize = tree.cover().iter().map(Vec::len).sum();
            Outcome::ok(format!(
                "nodes: {}\nedges: {edges}\nundecided pairs: {}\n{line}\n",
                tree.len(),
                tree.undecided_pairs
            ))
        }
        Format::Json => {
            let nodes = tree
                .nodes()
                .iter()
                .enumerate()
                .map(|(i, n)| NodeReport {
                    id: i,
                    rep: (c.label(n.rep.0), c.label(n.rep.1)),
                    size: n.members.len(),
                    leaf: tree.is_leaf(i),
                })
                .collect();
            let edges = tree
                .cover()
                .iter()
                .enumerate()
                .flat_map(|(a, ups)| ups.iter().map(move |&b| (a, b)))
                .collect();
            Outcome::ok(json(&TreeReport {
                nodes,
                edges,
                undecided_pairs: tree.undecided_pairs,
                trichotomy: tri,
            }))
        }
    }
}

fn planar_lift(upper: QoSpec) -> QoSpec {
    QoSpec::Lift {
        valuation: ValSpec::FirstNonzero,
        fibers: vec![
            QoSpec::OrderType {
                functional: Some(vec![1, 0]),
            },
            upper,
        ],
    }
}

fn example_a() -> QoSpec {
    planar_lift(QoSpec::TrivialValuation)
}

/// Job file reproducing a named example as a construction, with its closed form as metadata.
pub fn gen_example(name: ExampleName, window: Option<WindowSpec>, span: IndexSpan) -> JobSpec {
    let z2 = GroupSpec::FreeAbelian { rank: 2 };
    let hahn = GroupSpec::Hahn {
        index_set: (span.lo..=span.hi).collect(),
        base: Box::new(z2.clone()),
    };
    let leading = QoSpec::LeadingCoefficient {
        coefficient: Box::new(example_a()),
    };
    let (group, qo, predicates): (GroupSpec, QoSpec, serde_json::Value) = match name {
        ExampleName::A => (
            z2,
            example_a(),
            serde_json::json!({
                "order": "(0,0) < {0}x(Z\\0) < {x<0} < (x,_) for x>0, increasing in x",
                "v_type": "{0}x(Z\\0)", "o_minus": "{(x,y) | x<0}", "o_plus": "{(x,y) | x>0}",
                "welding_points": "none",
            }),
        ),
        ExampleName::B => (
            z2,
            QoSpec::Weld {
                base: Box::new(example_a()),
                at: "(-1,0)".into(),
            },
            serde_json::json!({
                "order": "(0,0) < {x<=0}\\(0,0) < (x,_) for x>0, increasing in x",
                "v_type": "{0}x(Z\\0)", "o_minus": "{(x,y) | x<0}", "o_plus": "{(x,y) | x>0}",
                "welding_points": "{(x,y) | x<0} and {0}x(Z\\0)",
            }),
        ),
        ExampleName::C => (
            z2,
            planar_lift(QoSpec::OrderType {
                functional: Some(vec![0, 1]),
            }),
            serde_json::json!({
                "order": "(0,0) < {(0,y) | y<0} < (0,y) for y>0 < {x<0} < (x,_) for x>0",
                "v_type": "none", "o_minus": "{x<0} and {(0,y) | y<0}", "o_plus": "{x>0} and {(0,y) | y>0}",
                "welding_points": "none",
            }),
        ),
        ExampleName::D => (
            hahn,
            leading,
            serde_json::json!({
                "order": "by largest support minimum first, then example a on the leading coefficient",
                "valuation": "support minimum",
            }),
        ),
        ExampleName::E => (
            GroupSpec::Semidirect {
                left: Box::new(GroupSpec::FreeAbelian { rank: 1 }),
                right: Box::new(hahn),
                action: ActionSpec::Shift,
            },
            QoSpec::SemidirectLift {
                left: Box::new(QoSpec::TrivialValuation),
                right: Box::new(leading),
            },
            serde_json::json!({
                "order": "pairs with nonzero left part form the top class; below it example d on the right part",
                "action": "k shifts every index by k",
            }),
        ),
    };
    let policy = name.default_policy();
    let window = window.unwrap_or(WindowSpec {
        eval_radius: policy.eval_radius,
        term_radius: policy.term_radius,
    });
    JobSpec {
        group,
        window,
        qo: Some(qo),
        crel: None,
        valuation: None,
        command: None,
        metadata: Some(
            serde_json::json!({ "example": name.to_string(), "closed_form": predicates }),
        ),
    }
}
