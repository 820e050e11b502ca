//! Lukasiewicz formulas with the divisible (`delta`) and scalar (`scale`) extensions.
//!
//! A [`Formula`] is an immutable tree with shared subtrees. Sharing keeps
//! substitution linear in the size of the outer formula; every traversal in
//! this module memoizes on node identity so shared subtrees are visited once.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::numerics::Rational;

#[derive(Debug)]
pub enum Node {
    Var(u32),
    Zero,
    One,
    Not(Formula),
    Oplus(Formula, Formula),
    Odot(Formula, Formula),
    /// `x / i`
    Delta(u32, Formula),
    /// `r * x` with `r` in `[0, 1]`
    Scale(Rational, Formula),
}

#[derive(Clone)]
pub struct Formula(Arc<Node>);

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EvalError {
    #[error("variable x{index} is not covered by an assignment of length {len}")]
    UnboundVariable { index: u32, len: usize },
    #[error("assignment value {value} at position {position} is outside [0, 1]")]
    OutOfDomain { position: usize, value: Rational },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("syntax error at byte {offset}: {message}")]
pub struct SyntaxError {
    pub offset: usize,
    pub message: String,
}

impl Formula {
    fn mk(node: Node) -> Formula {
        Formula(Arc::new(node))
    }

    pub fn var(index: u32) -> Formula {
        assert!(index >= 1, "variable indices start at 1");
        Formula::mk(Node::Var(index))
    }

    pub fn zero() -> Formula {
        Formula::mk(Node::Zero)
    }

    pub fn one() -> Formula {
        Formula::mk(Node::One)
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(f: Formula) -> Formula {
        Formula::mk(Node::Not(f))
    }

    pub fn oplus(a: Formula, b: Formula) -> Formula {
        Formula::mk(Node::Oplus(a, b))
    }

    pub fn odot(a: Formula, b: Formula) -> Formula {
        Formula::mk(Node::Odot(a, b))
    }

    pub fn delta(i: u32, f: Formula) -> Formula {
        assert!(i >= 1, "delta divisor must be positive");
        Formula::mk(Node::Delta(i, f))
    }

    pub fn scale(r: Rational, f: Formula) -> Formula {
        assert!(r.in_unit_interval(), "scale factor {r} outside [0, 1]");
        Formula::mk(Node::Scale(r, f))
    }

    /// `f ⊕ f ⊕ ... ⊕ f` (`n` copies, left-associated); `0` when `n = 0`.
    pub fn oplus_power(f: &Formula, n: u32) -> Formula {
        Self::power(f, n, Formula::zero, Formula::oplus)
    }

    /// `f ⊙ f ⊙ ... ⊙ f` (`n` copies, left-associated); `1` when `n = 0`.
    pub fn odot_power(f: &Formula, n: u32) -> Formula {
        Self::power(f, n, Formula::one, Formula::odot)
    }

    fn power(
        f: &Formula,
        n: u32,
        unit: fn() -> Formula,
        op: fn(Formula, Formula) -> Formula,
    ) -> Formula {
        if n == 0 {
            return unit();
        }
        let mut acc = f.clone();
        for _ in 1..n {
            acc = op(acc, f.clone());
        }
        acc
    }

    pub fn node(&self) -> &Node {
        &self.0
    }

    pub fn ptr_eq(&self, other: &Formula) -> bool {
        Arc::ptr_eq(&self.0, &other.0)
    }

    fn key(&self) -> usize {
        Arc::as_ptr(&self.0) as usize
    }

    pub fn is_zero(&self) -> bool {
        matches!(self.node(), Node::Zero)
    }

    pub fn is_one(&self) -> bool {
        matches!(self.node(), Node::One)
    }

    pub fn children(&self) -> Vec<&Formula> {
        match self.node() {
            Node::Var(_) | Node::Zero | Node::One => vec![],
            Node::Not(a) | Node::Delta(_, a) | Node::Scale(_, a) => vec![a],
            Node::Oplus(a, b) | Node::Odot(a, b) => vec![a, b],
        }
    }

    /// Same head with new children (arity must match).
    pub fn with_children(&self, mut kids: Vec<Formula>) -> Formula {
        match self.node() {
            Node::Var(_) | Node::Zero | Node::One => self.clone(),
            Node::Not(_) => Formula::not(kids.remove(0)),
            Node::Delta(i, _) => Formula::delta(*i, kids.remove(0)),
            Node::Scale(r, _) => Formula::scale(r.clone(), kids.remove(0)),
            Node::Oplus(..) => {
                let b = kids.pop().unwrap();
                Formula::oplus(kids.pop().unwrap(), b)
            }
            Node::Odot(..) => {
                let b = kids.pop().unwrap();
                Formula::odot(kids.pop().unwrap(), b)
            }
        }
    }

    /// Exact truth value under the standard semantics.
    pub fn eval(&self, x: &[Rational]) -> Result<Rational, EvalError> {
        for (position, value) in x.iter().enumerate() {
            if !value.in_unit_interval() {
                return Err(EvalError::OutOfDomain {
                    position,
                    value: value.clone(),
                });
            }
        }
        let mut memo = HashMap::new();
        self.eval_memo(x, &mut memo)
    }

    fn eval_memo(
        &self,
        x: &[Rational],
        memo: &mut HashMap<usize, Rational>,
    ) -> Result<Rational, EvalError> {
        let shared = Arc::strong_count(&self.0) > 1;
        if shared {
            if let Some(v) = memo.get(&self.key()) {
                return Ok(v.clone());
            }
        }
        let one = Rational::one();
        let v = match self.node() {
            Node::Var(i) => x
                .get(*i as usize - 1)
                .cloned()
                .ok_or(EvalError::UnboundVariable {
                    index: *i,
                    len: x.len(),
                })?,
            Node::Zero => Rational::zero(),
            Node::One => one,
            Node::Not(a) => one - a.eval_memo(x, memo)?,
            Node::Oplus(a, b) => (a.eval_memo(x, memo)? + b.eval_memo(x, memo)?).min(one),
            Node::Odot(a, b) => {
                (a.eval_memo(x, memo)? + b.eval_memo(x, memo)? - one).max(Rational::zero())
            }
            Node::Delta(i, a) => a.eval_memo(x, memo)? / Rational::from(*i as i64),
            Node::Scale(r, a) => r * a.eval_memo(x, memo)?,
        };
        if shared {
            memo.insert(self.key(), v.clone());
        }
        Ok(v)
    }

    /// Simultaneous replacement of every mapped variable.
    pub fn substitute(&self, z: &Substitution) -> Formula {
        let mut memo = HashMap::new();
        self.substitute_memo(z, &mut memo)
    }

    fn substitute_memo(&self, z: &Substitution, memo: &mut HashMap<usize, Formula>) -> Formula {
        if let Some(f) = memo.get(&self.key()) {
            return f.clone();
        }
        let out = match self.node() {
            Node::Var(i) => z.get(*i).cloned().unwrap_or_else(|| self.clone()),
            Node::Zero | Node::One => self.clone(),
            _ => {
                let kids: Vec<Formula> = self
                    .children()
                    .into_iter()
                    .map(|c| c.substitute_memo(z, memo))
                    .collect();
                if kids.iter().zip(self.children()).all(|(a, b)| a.ptr_eq(b)) {
                    self.clone()
                } else {
                    self.with_children(kids)
                }
            }
        };
        memo.insert(self.key(), out.clone());
        out
    }

    /// Number of variable occurrences in the tree.
    pub fn length(&self) -> u128 {
        self.fold_memo(&mut HashMap::new(), &|f, kids: &[u128]| match f.node() {
            Node::Var(_) => 1,
            _ => kids.iter().fold(0u128, |a, b| a.saturating_add(*b)),
        })
    }

    /// Number of tree nodes.
    pub fn size(&self) -> u128 {
        self.fold_memo(&mut HashMap::new(), &|_, kids: &[u128]| {
            kids.iter().fold(1u128, |a, b| a.saturating_add(*b))
        })
    }

    /// Largest variable index, 0 if there is none.
    pub fn max_var(&self) -> u32 {
        self.fold_memo(&mut HashMap::new(), &|f, kids: &[u32]| match f.node() {
            Node::Var(i) => *i,
            _ => kids.iter().copied().max().unwrap_or(0),
        })
    }

    pub fn vars(&self) -> BTreeSet<u32> {
        let mut out = BTreeSet::new();
        let mut seen = HashSet::new();
        let mut stack = vec![self];
        while let Some(f) = stack.pop() {
            if !seen.insert(f.key()) {
                continue;
            }
            if let Node::Var(i) = f.node() {
                out.insert(*i);
            }
            stack.extend(f.children());
        }
        out
    }

    fn fold_memo<T: Clone>(
        &self,
        memo: &mut HashMap<usize, T>,
        step: &dyn Fn(&Formula, &[T]) -> T,
    ) -> T {
        if let Some(v) = memo.get(&self.key()) {
            return v.clone();
        }
        let kids: Vec<T> = self
            .children()
            .into_iter()
            .map(|c| c.fold_memo(memo, step))
            .collect();
        let v = step(self, &kids);
        memo.insert(self.key(), v.clone());
        v
    }

    /// Subformula at a pre-order path of child indices.
    pub fn at(&self, path: &[usize]) -> Option<&Formula> {
        let mut cur = self;
        for &i in path {
            cur = *cur.children().get(i)?;
        }
        Some(cur)
    }

    /// Copy with the subformula at `path` replaced.
    pub fn replace_at(&self, path: &[usize], new: Formula) -> Option<Formula> {
        match path.split_first() {
            None => Some(new),
            Some((&i, rest)) => {
                let kids = self.children();
                let child = kids.get(i)?.replace_at(rest, new)?;
                let mut kids: Vec<Formula> = kids.into_iter().cloned().collect();
                kids[i] = child;
                Some(self.with_children(kids))
            }
        }
    }

    /// All positions in pre-order.
    pub fn positions(&self) -> Vec<Vec<usize>> {
        let mut out = Vec::new();
        let mut path = Vec::new();
        self.collect_positions(&mut path, &mut out);
        out
    }

    fn collect_positions(&self, path: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        out.push(path.clone());
        for (i, c) in self.children().into_iter().enumerate() {
            path.push(i);
            c.collect_positions(path, out);
            path.pop();
        }
    }

    pub fn parse(text: &str) -> Result<Formula, SyntaxError> {
        let mut p = Parser { src: text, pos: 0 };
        p.skip_ws();
        let f = p.formula()?;
        p.skip_ws();
        if p.pos != text.len() {
            return Err(p.error("trailing input"));
        }
        Ok(f)
    }

    fn structural_eq(&self, other: &Formula, seen: &mut HashSet<(usize, usize)>) -> bool {
        if self.ptr_eq(other) || seen.contains(&(self.key(), other.key())) {
            return true;
        }
        let heads = match (self.node(), other.node()) {
            (Node::Var(a), Node::Var(b)) => a == b,
            (Node::Zero, Node::Zero) | (Node::One, Node::One) => true,
            (Node::Not(_), Node::Not(_))
            | (Node::Oplus(..), Node::Oplus(..))
            | (Node::Odot(..), Node::Odot(..)) => true,
            (Node::Delta(a, _), Node::Delta(b, _)) => a == b,
            (Node::Scale(a, _), Node::Scale(b, _)) => a == b,
            _ => false,
        };
        let eq = heads
            && self
                .children()
                .into_iter()
                .zip(other.children())
                .all(|(a, b)| a.structural_eq(b, seen));
        if eq {
            seen.insert((self.key(), other.key()));
        }
        eq
    }
}

impl PartialEq for Formula {
    fn eq(&self, other: &Formula) -> bool {
        self.structural_eq(other, &mut HashSet::new())
    }
}

impl Eq for Formula {}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.node() {
            Node::Var(i) => write!(f, "x{i}"),
            Node::Zero => write!(f, "0"),
            Node::One => write!(f, "1"),
            Node::Not(a) => write!(f, "(not {a})"),
            Node::Oplus(a, b) => write!(f, "(oplus {a} {b})"),
            Node::Odot(a, b) => write!(f, "(odot {a} {b})"),
            Node::Delta(i, a) => write!(f, "(delta {i} {a})"),
            Node::Scale(r, a) => write!(f, "(scale {r} {a})"),
        }
    }
}

impl fmt::Debug for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl FromStr for Formula {
    type Err = SyntaxError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Formula::parse(s)
    }
}

impl Serialize for Formula {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Formula {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        Formula::parse(&s).map_err(serde::de::Error::custom)
    }
}

struct Parser<'a> {
    src: &'a str,
    pos: usize,
}

impl Parser<'_> {
    fn error(&self, message: impl Into<String>) -> SyntaxError {
        SyntaxError {
            offset: self.pos,
            message: message.into(),
        }
    }

    fn skip_ws(&mut self) {
        while self.src[self.pos..].starts_with(|c: char| c.is_ascii_whitespace()) {
            self.pos += 1;
        }
    }

    fn atom(&mut self) -> (usize, &str) {
        let start = self.pos;
        let len = self.src[start..]
            .find(|c: char| c.is_ascii_whitespace() || c == '(' || c == ')')
            .unwrap_or(self.src.len() - start);
        self.pos += len;
        (start, &self.src[start..start + len])
    }

    fn expect_ws(&mut self) -> Result<(), SyntaxError> {
        let before = self.pos;
        self.skip_ws();
        if self.pos == before {
            return Err(self.error("expected whitespace"));
        }
        Ok(())
    }

    fn index(&mut self, what: &str) -> Result<u32, SyntaxError> {
        let (start, tok) = self.atom();
        let bad = || SyntaxError {
            offset: start,
            message: format!("expected {what}, found {tok:?}"),
        };
        if tok.is_empty() || !tok.bytes().all(|b| b.is_ascii_digit()) {
            return Err(bad());
        }
        match tok.parse::<u32>() {
            Ok(n) if n >= 1 => Ok(n),
            _ => Err(bad()),
        }
    }

    fn formula(&mut self) -> Result<Formula, SyntaxError> {
        if self.pos >= self.src.len() {
            return Err(self.error("unexpected end of input"));
        }
        if !self.src[self.pos..].starts_with('(') {
            let (start, tok) = self.atom();
            return match tok {
                "0" => Ok(Formula::zero()),
                "1" => Ok(Formula::one()),
                _ if tok.starts_with('x') => {
                    self.pos = start + 1;
                    self.index("a positive variable index").map(Formula::var)
                }
                _ => Err(SyntaxError {
                    offset: start,
                    message: format!("unexpected token {tok:?}"),
                }),
            };
        }
        self.pos += 1;
        self.skip_ws();
        let (start, head) = self.atom();
        let head = head.to_string();
        if !["not", "oplus", "odot", "delta", "scale"].contains(&head.as_str()) {
            return Err(SyntaxError {
                offset: start,
                message: format!("unknown operator {head:?}"),
            });
        }
        self.expect_ws()?;
        let f = match head.as_str() {
            "not" => Formula::not(self.formula()?),
            "oplus" | "odot" => {
                let a = self.formula()?;
                self.expect_ws()?;
                let b = self.formula()?;
                if head == "oplus" {
                    Formula::oplus(a, b)
                } else {
                    Formula::odot(a, b)
                }
            }
            "delta" => {
                let i = self.index("a positive divisor")?;
                self.expect_ws()?;
                Formula::delta(i, self.formula()?)
            }
            "scale" => {
                let (rstart, tok) = self.atom();
                let r: Rational = tok.parse().map_err(|_| SyntaxError {
                    offset: rstart,
                    message: format!("expected a rational, found {tok:?}"),
                })?;
                if !r.in_unit_interval() {
                    return Err(SyntaxError {
                        offset: rstart,
                        message: format!("scale factor {r} outside [0, 1]"),
                    });
                }
                self.expect_ws()?;
                Formula::scale(r, self.formula()?)
            }
            _ => unreachable!("operator checked above"),
        };
        self.skip_ws();
        if !self.src[self.pos..].starts_with(')') {
            return Err(self.error("expected ')'"));
        }
        self.pos += 1;
        Ok(f)
    }
}

/// Simultaneous substitution: variable index to substitutor.
#[derive(Clone, PartialEq, Eq, Default)]
pub struct Substitution(BTreeMap<u32, Formula>);

impl Substitution {
    pub fn new() -> Self {
        Substitution(BTreeMap::new())
    }

    /// `x_i ↦ fs[i-1]`.
    pub fn from_list(fs: impl IntoIterator<Item = Formula>) -> Self {
        Substitution(
            fs.into_iter()
                .enumerate()
                .map(|(i, f)| (i as u32 + 1, f))
                .collect(),
        )
    }

    pub fn identity(n: u32) -> Self {
        Substitution::from_list((1..=n).map(Formula::var))
    }

    pub fn insert(&mut self, k: u32, f: Formula) -> Option<Formula> {
        self.0.insert(k, f)
    }

    pub fn get(&self, k: u32) -> Option<&Formula> {
        self.0.get(&k)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn keys(&self) -> impl Iterator<Item = u32> + '_ {
        self.0.keys().copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (u32, &Formula)> {
        self.0.iter().map(|(k, v)| (*k, v))
    }

    /// `self • other`: each key `k` of `self` maps to `self[k]` with `other` applied.
    pub fn compose(&self, other: &Substitution) -> Substitution {
        Substitution(
            self.0
                .iter()
                .map(|(k, v)| (*k, v.substitute(other)))
                .collect(),
        )
    }
}

impl FromIterator<(u32, Formula)> for Substitution {
    fn from_iter<I: IntoIterator<Item = (u32, Formula)>>(iter: I) -> Self {
        Substitution(iter.into_iter().collect())
    }
}

impl fmt::Debug for Substitution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_map()
            .entries(self.0.iter().map(|(k, v)| (format!("x{k}"), v)))
            .finish()
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use proptest::prelude::*;

    fn p(s: &str) -> Formula {
        Formula::parse(s).unwrap()
    }

    fn q(s: &str) -> Rational {
        s.parse().unwrap()
    }

    #[test]
    fn eval_examples() {
        let x = [q("3/4"), q("1/2")];
        assert_eq!(p("(odot x1 x2)").eval(&x).unwrap(), q("1/4"));
        assert_eq!(p("(not x1)").eval(&[q("1")]).unwrap(), q("0"));
        assert_eq!(
            p("(delta 2 (odot x1 x2))").eval(&[q("1"), q("1")]).unwrap(),
            q("1/2")
        );
        assert_eq!(p("(scale 1/3 x1)").eval(&[q("3/4")]).unwrap(), q("1/4"));
    }

    #[test]
    fn eval_errors() {
        assert_eq!(
            p("(oplus x1 x3)").eval(&[q("0"), q("0")]),
            Err(EvalError::UnboundVariable { index: 3, len: 2 })
        );
        assert_eq!(
            p("x1").eval(&[q("3/2")]),
            Err(EvalError::OutOfDomain {
                position: 0,
                value: q("3/2")
            })
        );
    }

    #[test]
    fn substitution_examples() {
        let z: Substitution = [(1, p("(oplus x1 x1)"))].into_iter().collect();
        assert_eq!(p("x2").substitute(&z), p("x2"));
        let z: Substitution = [(1, p("(oplus x1 x2)"))].into_iter().collect();
        assert_eq!(
            p("(odot x1 (not x1))").substitute(&z),
            p("(odot (oplus x1 x2) (not (oplus x1 x2)))")
        );
        assert_eq!(p("0").substitute(&z), p("0"));
    }

    #[test]
    fn compose_examples() {
        let a: Substitution = [(1, p("x2"))].into_iter().collect();
        let b: Substitution = [(2, p("0"))].into_iter().collect();
        let c: Substitution = [(1, p("0"))].into_iter().collect();
        assert_eq!(a.compose(&b), c);
        let id: Substitution = [(1, p("x1"))].into_iter().collect();
        let tau: Substitution = [(1, p("(odot x2 x3)"))].into_iter().collect();
        assert_eq!(id.compose(&tau), tau);
    }

    #[test]
    fn parse_examples() {
        assert_eq!(
            p("(odot x1 (not x2))"),
            Formula::odot(Formula::var(1), Formula::not(Formula::var(2)))
        );
        assert_eq!(p("(delta 3 x1)"), Formula::delta(3, Formula::var(1)));
        let s = "(oplus (scale 2/3 x12) (delta 7 (not 1)))";
        assert_eq!(p(s).to_string(), s);
        assert_eq!(p("  ( not   x1 ) ").to_string(), "(not x1)");
    }

    #[test]
    fn parse_errors_carry_offsets() {
        let cases = [
            ("(not x1", 7),
            ("(foo x1)", 1),
            ("x0", 1),
            ("(delta 0 x1)", 7),
            ("(scale 3/2 x1)", 7),
            ("(oplus x1)", 9),
            ("x1 x2", 3),
            ("", 0),
            ("(notx1)", 1),
        ];
        for (s, off) in cases {
            let e = Formula::parse(s).unwrap_err();
            assert_eq!(e.offset, off, "{s}: {e}");
        }
    }

    #[test]
    fn powers() {
        let x = Formula::var(1);
        assert_eq!(Formula::oplus_power(&x, 0), p("0"));
        assert_eq!(Formula::odot_power(&x, 0), p("1"));
        assert_eq!(Formula::odot_power(&x, 1), p("x1"));
        assert_eq!(
            Formula::odot_power(&x, 3),
            p("(odot (odot x1 x1) x1)")
        );
    }

    #[test]
    fn positions_and_replace() {
        let f = p("(oplus (odot x1 (not x2)) x3)");
        assert_eq!(f.positions().len(), 6);
        assert_eq!(f.at(&[0, 1, 0]).unwrap(), &p("x2"));
        assert!(f.at(&[1, 0]).is_none());
        let g = f.replace_at(&[0, 1], p("0")).unwrap();
        assert_eq!(g, p("(oplus (odot x1 0) x3)"));
        assert!(f.replace_at(&[2], p("0")).is_none());
    }

    #[test]
    fn shared_substitution_stays_small() {
        // 40 levels of x1 -> x1 ⊕ x1 has 2^40 leaves as a tree.
        let z: Substitution = [(1, p("(oplus x1 x1)"))].into_iter().collect();
        let mut f = p("x1");
        for _ in 0..40 {
            f = f.substitute(&z);
        }
        assert_eq!(f.length(), 1u128 << 40);
        assert_eq!(f.eval(&[q("1/3")]).unwrap(), q("1"));
        assert_eq!(f.max_var(), 1);
        assert_eq!(f, f.clone().substitute(&Substitution::new()));
    }

    pub(crate) fn arb_formula(nvars: u32) -> impl Strategy<Value = Formula> {
        let leaf = prop_oneof![
            (1..=nvars).prop_map(Formula::var),
            Just(Formula::zero()),
            Just(Formula::one()),
        ];
        leaf.prop_recursive(5, 40, 2, |inner| {
            prop_oneof![
                inner.clone().prop_map(Formula::not),
                (inner.clone(), inner.clone()).prop_map(|(a, b)| Formula::oplus(a, b)),
                (inner.clone(), inner.clone()).prop_map(|(a, b)| Formula::odot(a, b)),
                (1u32..4, inner.clone()).prop_map(|(i, a)| Formula::delta(i, a)),
                ((0i64..=4), inner).prop_map(|(n, a)| Formula::scale(Rational::new(n, 4), a)),
            ]
        })
    }

    /// Formulas over the MV connectives only.
    pub(crate) fn arb_mv_formula(nvars: u32) -> impl Strategy<Value = Formula> {
        let leaf = prop_oneof![
            (1..=nvars).prop_map(Formula::var),
            Just(Formula::zero()),
            Just(Formula::one()),
        ];
        leaf.prop_recursive(5, 40, 2, |inner| {
            prop_oneof![
                inner.clone().prop_map(Formula::not),
                (inner.clone(), inner.clone()).prop_map(|(a, b)| Formula::oplus(a, b)),
                (inner.clone(), inner).prop_map(|(a, b)| Formula::odot(a, b)),
            ]
        })
    }

    fn arb_point(n: usize) -> impl Strategy<Value = Vec<Rational>> {
        proptest::collection::vec((0i64..=12).prop_map(|k| Rational::new(k, 12)), n)
    }

    fn arb_subst(nvars: u32) -> impl Strategy<Value = Substitution> {
        proptest::collection::btree_map(1..=nvars, arb_formula(nvars), 1..=nvars as usize)
            .prop_map(|m| m.into_iter().collect())
    }

    /// Covers every variable a formula over `nvars` variables can mention.
    fn arb_total_subst(nvars: u32) -> impl Strategy<Value = Substitution> {
        proptest::collection::vec(arb_formula(nvars), nvars as usize).prop_map(Substitution::from_list)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(300))]

        #[test]
        fn print_parse_roundtrip(f in arb_formula(3)) {
            let s = f.to_string();
            let g = Formula::parse(&s).unwrap();
            prop_assert_eq!(&g, &f);
            prop_assert_eq!(g.to_string(), s);
        }

        #[test]
        fn de_morgan(a in arb_formula(3), b in arb_formula(3), x in arb_point(3)) {
            let l = Formula::not(Formula::oplus(a.clone(), b.clone()));
            let r = Formula::odot(Formula::not(a), Formula::not(b));
            prop_assert_eq!(l.eval(&x).unwrap(), r.eval(&x).unwrap());
        }

        #[test]
        fn unit_operators(a in arb_formula(3), x in arb_point(3)) {
            let v = a.eval(&x).unwrap();
            prop_assert!(v.in_unit_interval());
            prop_assert_eq!(Formula::scale(Rational::one(), a.clone()).eval(&x).unwrap(), v.clone());
            prop_assert_eq!(Formula::delta(1, a).eval(&x).unwrap(), v);
        }

        #[test]
        fn substitute_homomorphic(a in arb_formula(3), b in arb_formula(3), z in arb_subst(3)) {
            let (sa, sb) = (a.substitute(&z), b.substitute(&z));
            prop_assert_eq!(Formula::oplus(a.clone(), b.clone()).substitute(&z), Formula::oplus(sa.clone(), sb.clone()));
            prop_assert_eq!(Formula::odot(a.clone(), b.clone()).substitute(&z), Formula::odot(sa.clone(), sb.clone()));
            prop_assert_eq!(Formula::not(a.clone()).substitute(&z), Formula::not(sa.clone()));
            prop_assert_eq!(Formula::delta(2, a.clone()).substitute(&z), Formula::delta(2, sa.clone()));
            prop_assert_eq!(Formula::scale(Rational::new(1, 2), a).substitute(&z), Formula::scale(Rational::new(1, 2), sa));
        }

        #[test]
        fn length_additive(a in arb_formula(3), b in arb_formula(3)) {
            prop_assert_eq!(Formula::oplus(a.clone(), b.clone()).length(), a.length() + b.length());
            prop_assert_eq!(Formula::odot(a.clone(), b.clone()).length(), a.length() + b.length());
            prop_assert_eq!(Formula::not(a.clone()).length(), a.length());
            prop_assert_eq!(Formula::delta(3, a.clone()).length(), a.length());
            prop_assert_eq!(Formula::scale(Rational::zero(), a.clone()).length(), a.length());
        }

        #[test]
        fn composition_law(t in arb_formula(3), z1 in arb_total_subst(3), z2 in arb_subst(3)) {
            prop_assert_eq!(t.substitute(&z1.compose(&z2)), t.substitute(&z1).substitute(&z2));
        }
    }
}
