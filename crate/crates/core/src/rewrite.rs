//! Axiom catalogs and positioned rewriting.
//!
//! Axioms are equations between patterns. A pattern is an ordinary
//! [`Formula`] whose variables are metavariables: `x1` is `x`, `x2` is `y`,
//! `x3` is `z`. A metavariable matches any subformula.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::formula::{Formula, Node, Substitution};
use crate::graph::{GraphError, SubstitutionGraph};
use crate::network::NodeRef;
use crate::numerics::Rational;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Direction {
    #[serde(rename = "LR")]
    LeftToRight,
    #[serde(rename = "RL")]
    RightToLeft,
}

/// Which axiom system.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Catalog {
    Mv,
    /// finitely valued, truth values `{0, 1/k, ..., 1}`
    Mvk(u32),
    /// divisible, `delta_n` for `n <= max`
    Dmv(u32),
    /// scalar multiplication by the listed rationals
    Rmv(Vec<Rational>),
}

impl Catalog {
    /// Grid resolution used to check soundness.
    pub fn grid(&self) -> u32 {
        match self {
            Catalog::Mvk(k) => *k,
            _ => 12,
        }
    }

    pub fn axioms(&self) -> Vec<Axiom> {
        catalog(self)
    }
}

impl FromStr for Catalog {
    type Err = String;

    /// `MV`, `MVk:<k>`, `DMV:<n>`, `RMV` or `RMV:<r>,<r>,...`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || format!("unknown axiom set {s:?} (MV | MVk:<k> | DMV:<n> | RMV[:r,...])");
        let (name, arg) = match s.split_once(':') {
            Some((n, a)) => (n, Some(a)),
            None => (s, None),
        };
        let count = |a: Option<&str>| -> Result<u32, String> {
            a.and_then(|a| a.parse().ok()).filter(|&k| k >= 1).ok_or_else(bad)
        };
        match name {
            "MV" if arg.is_none() => Ok(Catalog::Mv),
            "MVk" => Ok(Catalog::Mvk(count(arg)?)),
            "DMV" => Ok(Catalog::Dmv(count(arg)?)),
            "RMV" => {
                let scalars = match arg {
                    None => vec![Rational::new(1, 2)],
                    Some(a) => a
                        .split(',')
                        .map(|r| r.parse::<Rational>().map_err(|_| bad()))
                        .collect::<Result<Vec<_>, _>>()?,
                };
                if scalars.iter().any(|r| !r.in_unit_interval()) {
                    return Err(bad());
                }
                Ok(Catalog::Rmv(scalars))
            }
            _ => Err(bad()),
        }
    }
}

impl fmt::Display for Catalog {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Catalog::Mv => write!(f, "MV"),
            Catalog::Mvk(k) => write!(f, "MVk:{k}"),
            Catalog::Dmv(n) => write!(f, "DMV:{n}"),
            Catalog::Rmv(rs) => {
                let rs: Vec<String> = rs.iter().map(ToString::to_string).collect();
                write!(f, "RMV:{}", rs.join(","))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Axiom {
    pub id: String,
    pub lhs: Formula,
    pub rhs: Formula,
    /// the system that introduces the axiom; `Mv` for the shared base
    pub tag: Catalog,
}

impl Axiom {
    fn new(id: impl Into<String>, lhs: Formula, rhs: Formula) -> Axiom {
        Axiom {
            id: id.into(),
            lhs,
            rhs,
            tag: Catalog::Mv,
        }
    }

    pub fn sides(&self, dir: Direction) -> (&Formula, &Formula) {
        match dir {
            Direction::LeftToRight => (&self.lhs, &self.rhs),
            Direction::RightToLeft => (&self.rhs, &self.lhs),
        }
    }

    /// Number of metavariables (largest index used).
    pub fn arity(&self) -> u32 {
        self.lhs.max_var().max(self.rhs.max_var())
    }
}

impl fmt::Display for Axiom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}: {} = {}",
            self.id,
            show_pattern(&self.lhs),
            show_pattern(&self.rhs)
        )
    }
}

/// Name of metavariable `i`: `x`, `y`, `z`, then `m4`, `m5`, ...
pub fn metavar_name(i: u32) -> String {
    match i {
        1 => "x".into(),
        2 => "y".into(),
        3 => "z".into(),
        _ => format!("m{i}"),
    }
}

pub fn metavar_index(name: &str) -> Option<u32> {
    match name {
        "x" => Some(1),
        "y" => Some(2),
        "z" => Some(3),
        _ => name.strip_prefix('m')?.parse().ok().filter(|&i| i >= 4),
    }
}

/// A pattern printed with metavariable names instead of `x1, x2, ...`.
pub fn show_pattern(p: &Formula) -> String {
    match p.node() {
        Node::Var(i) => metavar_name(*i),
        Node::Zero => "0".into(),
        Node::One => "1".into(),
        Node::Not(a) => format!("(not {})", show_pattern(a)),
        Node::Oplus(a, b) => format!("(oplus {} {})", show_pattern(a), show_pattern(b)),
        Node::Odot(a, b) => format!("(odot {} {})", show_pattern(a), show_pattern(b)),
        Node::Delta(i, a) => format!("(delta {i} {})", show_pattern(a)),
        Node::Scale(r, a) => format!("(scale {r} {})", show_pattern(a)),
    }
}

fn x() -> Formula {
    Formula::var(1)
}
fn y() -> Formula {
    Formula::var(2)
}
fn z() -> Formula {
    Formula::var(3)
}
fn not(a: Formula) -> Formula {
    Formula::not(a)
}
fn oplus(a: Formula, b: Formula) -> Formula {
    Formula::oplus(a, b)
}
fn odot(a: Formula, b: Formula) -> Formula {
    Formula::odot(a, b)
}

fn mv_axioms() -> Vec<Axiom> {
    let zero = Formula::zero;
    let one = Formula::one;
    vec![
        Axiom::new("Ax1", oplus(x(), y()), oplus(y(), x())),
        Axiom::new("Ax1p", odot(x(), y()), odot(y(), x())),
        Axiom::new("Ax2", oplus(x(), oplus(y(), z())), oplus(oplus(x(), y()), z())),
        Axiom::new("Ax2p", odot(x(), odot(y(), z())), odot(odot(x(), y()), z())),
        Axiom::new("Ax3", oplus(x(), not(x())), one()),
        Axiom::new("Ax3p", odot(x(), not(x())), zero()),
        Axiom::new("Ax4", oplus(x(), one()), one()),
        Axiom::new("Ax4p", odot(x(), zero()), zero()),
        Axiom::new("Ax5", oplus(x(), zero()), x()),
        Axiom::new("Ax5p", odot(x(), one()), x()),
        Axiom::new("Ax6", not(oplus(x(), y())), odot(not(x()), not(y()))),
        Axiom::new("Ax6p", not(odot(x(), y())), oplus(not(x()), not(y()))),
        Axiom::new("Ax7", x(), not(not(x()))),
        Axiom::new("Ax8", not(zero()), one()),
        Axiom::new(
            "Ax9",
            oplus(odot(x(), not(y())), y()),
            oplus(odot(y(), not(x())), x()),
        ),
        Axiom::new(
            "Ax9p",
            odot(oplus(x(), not(y())), y()),
            odot(oplus(y(), not(x())), x()),
        ),
    ]
}

/// The axioms of a catalog, base MV axioms first.
pub fn catalog(c: &Catalog) -> Vec<Axiom> {
    let mut out = mv_axioms();
    let base = out.len();
    match c {
        Catalog::Mv => {}
        Catalog::Mvk(1) => {
            out.push(Axiom::new("F1", oplus(x(), x()), x()));
            out.push(Axiom::new("F1p", odot(x(), x()), x()));
        }
        Catalog::Mvk(k) => {
            let k = *k;
            for j in (2..k).filter(|j| k % j != 0) {
                let a = odot(
                    Formula::oplus_power(&x(), j),
                    oplus(not(x()), not(Formula::odot_power(&x(), j - 1))),
                );
                out.push(Axiom::new(
                    format!("K{k}j{j}"),
                    Formula::odot_power(&a, k),
                    Formula::zero(),
                ));
                let b = oplus(
                    Formula::odot_power(&x(), j),
                    odot(not(x()), not(Formula::oplus_power(&x(), j - 1))),
                );
                out.push(Axiom::new(
                    format!("K{k}j{j}p"),
                    Formula::oplus_power(&b, k),
                    Formula::one(),
                ));
            }
        }
        Catalog::Dmv(max) => {
            for n in 1..=*max {
                let d = Formula::delta(n, x());
                out.push(Axiom::new(format!("D{n}"), Formula::oplus_power(&d, n), x()));
                out.push(Axiom::new(
                    format!("D{n}p"),
                    odot(d.clone(), Formula::oplus_power(&d, n - 1)),
                    Formula::zero(),
                ));
            }
        }
        Catalog::Rmv(scalars) => {
            let s = |r: &Rational, f: Formula| Formula::scale(r.clone(), f);
            for r in scalars {
                out.push(Axiom::new(
                    format!("R1({r})"),
                    s(r, odot(x(), not(y()))),
                    odot(s(r, x()), not(s(r, y()))),
                ));
            }
            for r in scalars {
                for q in scalars {
                    let diff = (r - q).max(Rational::zero());
                    out.push(Axiom::new(
                        format!("R2({r},{q})"),
                        s(&diff, x()),
                        odot(s(r, x()), not(s(q, x()))),
                    ));
                    out.push(Axiom::new(
                        format!("R3({r},{q})"),
                        s(r, s(q, x())),
                        s(&(r * q), x()),
                    ));
                }
            }
            out.push(Axiom::new("R4", s(&Rational::one(), x()), x()));
        }
    }
    for a in &mut out[base..] {
        a.tag = c.clone();
    }
    out
}

/// Syntactic matching; the unique binding of the pattern's metavariables.
pub fn match_instantiation(pattern: &Formula, target: &Formula) -> Option<Substitution> {
    let mut b = Substitution::new();
    match_into(pattern, target, &mut b).then_some(b)
}

fn match_into(p: &Formula, t: &Formula, b: &mut Substitution) -> bool {
    match (p.node(), t.node()) {
        (Node::Var(i), _) => match b.get(*i) {
            Some(bound) => bound == t,
            None => {
                b.insert(*i, t.clone());
                true
            }
        },
        (Node::Zero, Node::Zero) | (Node::One, Node::One) => true,
        (Node::Not(a), Node::Not(c)) => match_into(a, c, b),
        (Node::Oplus(a1, a2), Node::Oplus(c1, c2)) | (Node::Odot(a1, a2), Node::Odot(c1, c2)) => {
            match_into(a1, c1, b) && match_into(a2, c2, b)
        }
        (Node::Delta(i, a), Node::Delta(j, c)) => i == j && match_into(a, c, b),
        (Node::Scale(r, a), Node::Scale(s, c)) => r == s && match_into(a, c, b),
        _ => false,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RewriteError {
    #[error("no subformula at position {0:?}")]
    InvalidPosition(Vec<usize>),
    #[error("{axiom} ({dir:?}) does not match at position {pos:?}")]
    NoMatchAtPosition {
        axiom: String,
        dir: Direction,
        pos: Vec<usize>,
    },
    #[error("binding for {name} disagrees with the matched subformula")]
    BindingConflict { name: String },
    #[error("metavariable {0} is not bound")]
    UnboundMetavariable(String),
    #[error("metavariable {0} does not occur in the axiom")]
    UnknownMetavariable(String),
    #[error("unknown axiom {0:?}")]
    UnknownAxiom(String),
    #[error("node {0} is an input node")]
    InputNodeTarget(NodeRef),
    #[error("no node {0} in this graph")]
    InvalidNode(NodeRef),
    #[error("rewritten formula of node {node} mentions x{var}, beyond width {width}")]
    VariableEscape { node: NodeRef, var: u32, width: usize },
    #[error(transparent)]
    Graph(#[from] GraphError),
}

/// Rewrite the subformula at `pos` with one side of `axiom`.
///
/// `bind` supplies metavariables that only occur on the produced side and may
/// restate matched ones; it must agree with the match.
pub fn apply_axiom(
    f: &Formula,
    axiom: &Axiom,
    dir: Direction,
    pos: &[usize],
    bind: &Substitution,
) -> Result<Formula, RewriteError> {
    let (from, to) = axiom.sides(dir);
    let sub = f
        .at(pos)
        .ok_or_else(|| RewriteError::InvalidPosition(pos.to_vec()))?;
    let mut b = match_instantiation(from, sub).ok_or_else(|| RewriteError::NoMatchAtPosition {
        axiom: axiom.id.clone(),
        dir,
        pos: pos.to_vec(),
    })?;
    let arity = axiom.arity();
    for (k, v) in bind.iter() {
        if k > arity || !(axiom.lhs.vars().contains(&k) || axiom.rhs.vars().contains(&k)) {
            return Err(RewriteError::UnknownMetavariable(metavar_name(k)));
        }
        match b.get(k) {
            Some(m) if m != v => {
                return Err(RewriteError::BindingConflict {
                    name: metavar_name(k),
                })
            }
            Some(_) => {}
            None => {
                b.insert(k, v.clone());
            }
        }
    }
    if let Some(k) = to.vars().into_iter().find(|k| b.get(*k).is_none()) {
        return Err(RewriteError::UnboundMetavariable(metavar_name(k)));
    }
    let replacement = to.substitute(&b);
    Ok(f.replace_at(pos, replacement).expect("position checked"))
}

/// Rewrite inside one node of a graph; see [`SubstitutionGraph::with_node_formula`]
/// for what happens to its certificate.
pub fn apply_axiom_on_graph(
    g: &SubstitutionGraph,
    node: NodeRef,
    axiom: &Axiom,
    dir: Direction,
    pos: &[usize],
    bind: &Substitution,
) -> Result<SubstitutionGraph, RewriteError> {
    if node.layer == 0 {
        return Err(RewriteError::InputNodeTarget(node));
    }
    let n = g.node(node).ok_or(RewriteError::InvalidNode(node))?;
    let f = apply_axiom(&n.formula, axiom, dir, pos, bind)?;
    let width = g.widths()[node.layer - 1];
    let var = f.max_var();
    if var as usize > width {
        return Err(RewriteError::VariableEscape { node, var, width });
    }
    Ok(g.with_node_formula(node, f)?)
}

/// One rewrite step as stored in a trace file line.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Step {
    pub axiom: String,
    pub dir: Direction,
    pub pos: Vec<usize>,
    #[serde(default)]
    pub bind: BTreeMap<String, Formula>,
    /// `[layer, index]` of the graph node to rewrite; the output node if absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub node: Option<[usize; 2]>,
}

impl Step {
    pub fn new(axiom: &str, dir: Direction, pos: &[usize]) -> Step {
        Step {
            axiom: axiom.into(),
            dir,
            pos: pos.to_vec(),
            bind: BTreeMap::new(),
            node: None,
        }
    }

    pub fn with_bind(mut self, name: &str, f: Formula) -> Step {
        self.bind.insert(name.into(), f);
        self
    }

    pub fn binding(&self) -> Result<Substitution, RewriteError> {
        self.bind
            .iter()
            .map(|(k, v)| {
                metavar_index(k)
                    .map(|i| (i, v.clone()))
                    .ok_or_else(|| RewriteError::UnknownMetavariable(k.clone()))
            })
            .collect()
    }
}

/// Parse a JSON-lines trace; blank lines are skipped.
pub fn parse_trace(text: &str) -> Result<Vec<Step>, String> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| format!("line {}: {e}", i + 1)))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DerivationTrace {
    pub start: Formula,
    pub steps: Vec<Step>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("step {index} failed: {reason}")]
pub struct StepFailure {
    pub index: usize,
    pub reason: RewriteError,
}

fn find<'a>(axioms: &'a [Axiom], id: &str) -> Result<&'a Axiom, RewriteError> {
    axioms
        .iter()
        .find(|a| a.id == id)
        .ok_or_else(|| RewriteError::UnknownAxiom(id.into()))
}

/// Replay every step; the formula after each step, start included.
pub fn replay(axioms: &[Axiom], trace: &DerivationTrace) -> Result<Vec<Formula>, StepFailure> {
    let mut out = vec![trace.start.clone()];
    for (index, step) in trace.steps.iter().enumerate() {
        let fail = |reason| StepFailure { index, reason };
        let ax = find(axioms, &step.axiom).map_err(fail)?;
        let bind = step.binding().map_err(fail)?;
        let next = apply_axiom(out.last().unwrap(), ax, step.dir, &step.pos, &bind).map_err(fail)?;
        out.push(next);
    }
    Ok(out)
}

/// Replays the trace and compares the result with `expected_end`.
pub fn check_derivation(
    axioms: &[Axiom],
    trace: &DerivationTrace,
    expected_end: &Formula,
) -> Result<bool, StepFailure> {
    Ok(replay(axioms, trace)?.last() == Some(expected_end))
}

/// Apply a trace to a graph, step by step.
pub fn rewrite_graph(
    axioms: &[Axiom],
    g: &SubstitutionGraph,
    steps: &[Step],
) -> Result<SubstitutionGraph, StepFailure> {
    let mut g = g.clone();
    for (index, step) in steps.iter().enumerate() {
        let fail = |reason| StepFailure { index, reason };
        let ax = find(axioms, &step.axiom).map_err(fail)?;
        let bind = step.binding().map_err(fail)?;
        let node = match step.node {
            Some([j, i]) => NodeRef::new(j, i),
            None => NodeRef::new(g.depth(), 1),
        };
        g = apply_axiom_on_graph(&g, node, ax, step.dir, &step.pos, &bind).map_err(fail)?;
    }
    Ok(g)
}

/// Affine combination of ReLU terms.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RhoExpr(Vec<(Rational, RhoTerm)>);

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RhoTerm {
    One,
    Var(u32),
    Relu(RhoExpr),
}

impl RhoExpr {
    /// MV formula as ReLU arithmetic: `a ⊙ b = ρ(a + b - 1)`,
    /// `a ⊕ b = 1 - ρ(-a - b + 1)`, `¬a = 1 - a`.
    /// `None` for formulas using `delta` or `scale`.
    pub fn render(f: &Formula) -> Option<RhoExpr> {
        let one = Rational::one();
        let neg = |e: RhoExpr| RhoExpr(e.0.into_iter().map(|(c, t)| (-c, t)).collect());
        Some(match f.node() {
            Node::Var(i) => RhoExpr(vec![(one, RhoTerm::Var(*i))]),
            Node::Zero => RhoExpr(vec![(Rational::zero(), RhoTerm::One)]),
            Node::One => RhoExpr(vec![(one, RhoTerm::One)]),
            Node::Not(a) => {
                let mut v = vec![(one, RhoTerm::One)];
                v.extend(neg(Self::render(a)?).0);
                RhoExpr(v)
            }
            Node::Odot(a, b) => {
                let mut v = Self::render(a)?.0;
                v.extend(Self::render(b)?.0);
                v.push((-one.clone(), RhoTerm::One));
                RhoExpr(vec![(one, RhoTerm::Relu(RhoExpr(v)))])
            }
            Node::Oplus(a, b) => {
                let mut v = neg(Self::render(a)?).0;
                v.extend(neg(Self::render(b)?).0);
                v.push((one.clone(), RhoTerm::One));
                RhoExpr(vec![(one.clone(), RhoTerm::One), (-one, RhoTerm::Relu(RhoExpr(v)))])
            }
            Node::Delta(..) | Node::Scale(..) => return None,
        })
    }

    /// Evaluate at metavariable values `x[0] = x`, `x[1] = y`, ...
    pub fn eval(&self, x: &[Rational]) -> Rational {
        self.0
            .iter()
            .map(|(c, t)| {
                c * match t {
                    RhoTerm::One => Rational::one(),
                    RhoTerm::Var(i) => x[*i as usize - 1].clone(),
                    RhoTerm::Relu(e) => e.eval(x).relu(),
                }
            })
            .sum()
    }
}

impl fmt::Display for RhoExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, (c, t)) in self.0.iter().enumerate() {
            let body = match t {
                RhoTerm::One => None,
                RhoTerm::Var(i) => Some(metavar_name(*i)),
                RhoTerm::Relu(e) => Some(format!("ρ({e})")),
            };
            let mag = c.abs();
            let sign = if c.is_negative() { "-" } else { "+" };
            match k {
                0 if c.is_negative() => write!(f, "-")?,
                0 => {}
                _ => write!(f, " {sign} ")?,
            }
            match body {
                None => write!(f, "{mag}")?,
                Some(b) if mag.is_one() => write!(f, "{b}")?,
                Some(b) => write!(f, "{mag}{b}")?,
            }
        }
        Ok(())
    }
}

/// Both sides of an MV axiom in ReLU form.
pub fn render_symmetry(a: &Axiom) -> Option<(RhoExpr, RhoExpr)> {
    Some((RhoExpr::render(&a.lhs)?, RhoExpr::render(&a.rhs)?))
}
