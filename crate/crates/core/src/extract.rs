//! From ReLU networks to substitution graphs.
//!
//! Three steps: replace every hidden `relu` by `clip` nodes ([`rho_to_sigma`]),
//! turn every clipped affine neuron into a formula ([`extr`],
//! [`extr_rational`], [`extr_real`]) and assemble the graph
//! ([`extract_graph`]).

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use num_traits::ToPrimitive;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bounds::{exact_extrema_with, Budget, BoundsError, Target, Value};
use crate::formula::Formula;
use crate::graph::{GraphNode, SubstitutionGraph};
use crate::network::{input_interval, Activation, Layer, LocalMap, Network, NodeRef, Violation};
use crate::numerics::{lcm_denominators, Interval, Rational};

/// Which calculus a neuron is extracted into.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Flavor {
    /// integer weights, plain MV formulas
    #[serde(rename = "integer")]
    Integer,
    /// rational weights, formulas with `delta`
    #[serde(rename = "dmv", alias = "rational")]
    Rational,
    /// rational weights, formulas with `scale`
    #[serde(rename = "rmv", alias = "real")]
    Real,
}

impl FromStr for Flavor {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "integer" => Ok(Flavor::Integer),
            "rational" | "dmv" => Ok(Flavor::Rational),
            "real" | "rmv" => Ok(Flavor::Real),
            _ => Err(format!("unknown flavor {s:?} (integer|rational|real)")),
        }
    }
}

impl fmt::Display for Flavor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Flavor::Integer => "integer",
            Flavor::Rational => "rational",
            Flavor::Real => "real",
        })
    }
}

/// The affine neuron a node formula was extracted from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MintermCertificate {
    pub m: Vec<Rational>,
    pub b: Rational,
    pub flavor: Flavor,
}

impl MintermCertificate {
    /// Re-runs extraction; `None` for an integer certificate with fractional entries.
    pub fn formula(&self) -> Option<Formula> {
        match self.flavor {
            Flavor::Integer => {
                if self.m.iter().chain([&self.b]).all(Rational::is_integer) {
                    Some(extr(&self.m, &self.b))
                } else {
                    None
                }
            }
            Flavor::Rational => Some(extr_rational(&self.m, &self.b)),
            Flavor::Real => Some(extr_real(&self.m, &self.b)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ExtractError {
    #[error("network is degenerate: {0}")]
    Degenerate(Violation),
    #[error("node {node} has weight {value}, which is not allowed for the {flavor} flavor")]
    FlavorMismatch {
        node: NodeRef,
        value: Rational,
        flavor: Flavor,
    },
    #[error("node {0} uses the identity activation")]
    HiddenIdentity(NodeRef),
    #[error("network output ranges over {0}, outside [0, 1]")]
    RangeViolation(Interval),
    #[error(transparent)]
    Bounds(#[from] BoundsError),
}

/// `σ(m.x + b)` as an MV formula. Entries must be integers.
pub fn extr(m: &[Rational], b: &Rational) -> Formula {
    assert!(
        m.iter().chain([b]).all(Rational::is_integer),
        "extr needs integer coefficients"
    );
    Extractor::default().run(m.to_vec(), b.clone())
}

/// `σ(m.x + b)` as a formula with `delta`, via `σ(t) = ⊕_i δ_s σ(s t - i)`.
pub fn extr_rational(m: &[Rational], b: &Rational) -> Formula {
    let s = lcm_denominators(m.iter().chain([b]));
    if s == 1.into() {
        return extr(m, b);
    }
    let s_q = Rational::from(s.clone());
    let s_u32 = s.to_u32().expect("denominator lcm fits in u32");
    let sm: Vec<Rational> = m.iter().map(|v| v * &s_q).collect();
    let sb = b * &s_q;
    let mut ex = Extractor::default();
    let mut acc: Option<Formula> = None;
    for i in 0..s_u32 {
        let term = Formula::delta(s_u32, ex.run(sm.clone(), &sb - Rational::from(i as i64)));
        acc = Some(match acc {
            None => term,
            Some(a) => Formula::oplus(a, term),
        });
    }
    acc.expect("s >= 1")
}

/// `σ(m.x + b)` as a formula with `scale` for the fractional parts.
pub fn extr_real(m: &[Rational], b: &Rational) -> Formula {
    Extractor::default().run(m.to_vec(), b.clone())
}

#[derive(Default)]
struct Extractor {
    memo: HashMap<(Vec<Rational>, Rational), Formula>,
}

impl Extractor {
    fn run(&mut self, m: Vec<Rational>, b: Rational) -> Formula {
        let key = (m, b);
        if let Some(f) = self.memo.get(&key) {
            return f.clone();
        }
        let f = self.step(&key.0, &key.1);
        self.memo.insert(key, f.clone());
        f
    }

    fn step(&mut self, m: &[Rational], b: &Rational) -> Formula {
        let one = Rational::one();
        let iv = input_interval(m, b);
        if iv.lo >= one {
            return Formula::one();
        }
        if !iv.hi.is_positive() {
            return Formula::zero();
        }
        if let Some(chain) = odot_chain(m, b) {
            return chain;
        }
        let Some(k) = m.iter().position(|v| !v.is_zero()) else {
            // 0 < b < 1 here, so b is fractional.
            return Formula::scale(b.clone(), Formula::one());
        };
        let xk = Formula::var(k as u32 + 1);
        if m[k].is_negative() {
            let neg: Vec<Rational> = m.iter().map(|v| -v).collect();
            return Formula::not(self.run(neg, &one - b));
        }
        let frac = m[k].fract();
        let (peel, atom) = if frac.is_zero() {
            (one.clone(), xk)
        } else {
            (frac.clone(), Formula::scale(frac, xk))
        };
        let mut rest = m.to_vec();
        rest[k] -= &peel;
        let low = self.run(rest.clone(), b.clone());
        let high = self.run(rest, b + &one);
        Formula::odot(Formula::oplus(low, atom), high)
    }
}

/// `σ(Σ m_i x_i + 1 - Σ m_i)` for nonnegative integers `m_i` is the
/// `⊙`-product of the variables, each repeated `m_i` times.
fn odot_chain(m: &[Rational], b: &Rational) -> Option<Formula> {
    if !m.iter().all(|v| v.is_integer() && !v.is_negative()) {
        return None;
    }
    let total: Rational = m.iter().sum();
    if total < Rational::one() || *b != Rational::one() - &total {
        return None;
    }
    let mut acc: Option<Formula> = None;
    for (i, v) in m.iter().enumerate() {
        let reps = v.to_i64().expect("small coefficient");
        for _ in 0..reps {
            let x = Formula::var(i as u32 + 1);
            acc = Some(match acc {
                None => x,
                Some(a) => Formula::odot(a, x),
            });
        }
    }
    acc
}

/// Options for [`extract_graph_with`].
#[derive(Debug, Clone, Copy)]
pub struct ExtractOptions {
    pub flavor: Flavor,
    pub budget: Budget,
    /// Verify that the output stays inside `[0, 1]`.
    pub check_range: bool,
}

impl ExtractOptions {
    pub fn new(flavor: Flavor) -> Self {
        ExtractOptions {
            flavor,
            budget: Budget::unlimited(),
            check_range: false,
        }
    }
}

fn check_network(net: &Network, flavor: Flavor, budget: Budget) -> Result<(), ExtractError> {
    for (j, layer) in net.layers().iter().enumerate() {
        for i in 0..layer.width() {
            let node = NodeRef::new(j + 1, i + 1);
            if j + 1 < net.depth() && layer.activation[i] == Activation::None {
                return Err(ExtractError::HiddenIdentity(node));
            }
            if flavor == Flavor::Integer {
                let lm = layer.local_map(i);
                let bad = lm.weights.iter().chain([&lm.bias]).find(|v| !v.is_integer()).cloned();
                if let Some(value) = bad {
                    return Err(ExtractError::FlavorMismatch { node, value, flavor });
                }
            }
        }
    }
    if let Some(v) = net.non_degeneracy_violation_with(budget)? {
        return Err(ExtractError::Degenerate(v));
    }
    Ok(())
}

/// Replace hidden `relu` nodes by equivalent stacks of `clip` nodes.
pub fn rho_to_sigma(net: &Network) -> Result<Network, ExtractError> {
    check_network(net, Flavor::Real, Budget::unlimited())?;
    Ok(rho_to_sigma_unchecked(net))
}

/// `ρ(t) = σ(t) + σ(t-1) + ... + σ(t-⌈L⌉+1)` for `t ≤ L`; copies follow the original node.
pub(crate) fn rho_to_sigma_unchecked(net: &Network) -> Network {
    let mut layers: Vec<Layer> = net.layers().to_vec();
    let depth = layers.len();
    for j in 0..depth - 1 {
        let mut new_layer = Layer::from_nodes([]);
        let mut copies = vec![];
        for i in 0..layers[j].width() {
            let lm = layers[j].local_map(i);
            let hi = lm.input_interval().hi;
            let n = if lm.activation == Activation::Relu && hi > Rational::one() {
                hi.ceil().to_i64().expect("small interval")
            } else {
                1
            };
            for t in 0..n {
                new_layer.push(LocalMap {
                    weights: lm.weights.clone(),
                    bias: &lm.bias - Rational::from(t),
                    activation: Activation::Clip,
                });
            }
            copies.push(n as usize);
        }
        layers[j] = new_layer;
        for row in layers[j + 1].weights.iter_mut() {
            *row = row
                .iter()
                .zip(&copies)
                .flat_map(|(w, &n)| std::iter::repeat_n(w.clone(), n))
                .collect();
        }
    }
    layers[depth - 1].activation[0] = Activation::Clip;
    Network::new(net.input_dim(), layers).expect("shape preserved")
}

pub fn extract_graph(net: &Network, flavor: Flavor) -> Result<SubstitutionGraph, ExtractError> {
    extract_graph_with(net, ExtractOptions::new(flavor))
}

pub fn extract_graph_with(
    net: &Network,
    opts: ExtractOptions,
) -> Result<SubstitutionGraph, ExtractError> {
    check_network(net, opts.flavor, opts.budget)?;
    if opts.check_range {
        let r = exact_extrema_with(net, Target::Output, Value::Post, opts.budget)?;
        if r.lo.is_negative() || r.hi > Rational::one() {
            return Err(ExtractError::RangeViolation(r));
        }
    }
    let sigma = rho_to_sigma_unchecked(net);
    let layers = sigma
        .layers()
        .iter()
        .map(|layer| {
            (0..layer.width())
                .map(|i| {
                    let cert = MintermCertificate {
                        m: layer.weights[i].clone(),
                        b: layer.biases[i].clone(),
                        flavor: opts.flavor,
                    };
                    GraphNode {
                        formula: cert.formula().expect("flavor checked"),
                        certificate: Some(cert),
                    }
                })
                .collect()
        })
        .collect();
    Ok(SubstitutionGraph::new(net.input_dim(), layers).expect("extracted graph is well-formed"))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(s: &str) -> Rational {
        s.parse().unwrap()
    }

    fn qs(v: &[&str]) -> Vec<Rational> {
        v.iter().map(|s| q(s)).collect()
    }

    fn p(s: &str) -> Formula {
        Formula::parse(s).unwrap()
    }

    #[test]
    fn extr_examples() {
        assert_eq!(
            extr(&qs(&["1", "-1", "1"]), &q("-1")).to_string(),
            "(odot (oplus 0 x1) (not (odot (oplus (not x3) x2) 1)))"
        );
        assert_eq!(extr(&qs(&["0", "-1", "1"]), &q("-1")), p("0"));
        assert_eq!(extr(&qs(&["1", "1"]), &q("2")), p("1"));
        assert_eq!(extr(&qs(&["1", "1"]), &q("-1")), p("(odot x1 x2)"));
        assert_eq!(extr(&qs(&["1"]), &q("0")), p("x1"));
        assert_eq!(extr(&qs(&["2"]), &q("0")), p("(odot (oplus x1 x1) 1)"));
        assert_eq!(extr(&qs(&["-1"]), &q("1")), p("(not x1)"));
        assert_eq!(
            extr(&qs(&["4"]), &q("-3")),
            p("(odot (odot (odot x1 x1) x1) x1)")
        );
    }

    #[test]
    fn extr_rational_examples() {
        assert_eq!(
            extr_rational(&qs(&["1/2", "1/2"]), &q("-1/2")).to_string(),
            "(oplus (delta 2 (odot x1 x2)) (delta 2 0))"
        );
        assert_eq!(
            extr_rational(&qs(&["1/3"]), &q("0")),
            p("(oplus (oplus (delta 3 x1) (delta 3 0)) (delta 3 0))")
        );
        let m = qs(&["2", "-3", "1"]);
        assert_eq!(extr_rational(&m, &q("1")), extr(&m, &q("1")));
    }

    #[test]
    fn extr_real_examples() {
        assert_eq!(
            extr_real(&qs(&["1/2"]), &q("0")),
            p("(odot (oplus 0 (scale 1/2 x1)) 1)")
        );
        assert_eq!(extr_real(&qs(&["0"]), &q("1/3")), p("(scale 1/3 1)"));
        let m = qs(&["1", "-2", "3"]);
        assert_eq!(extr_real(&m, &q("-1")), extr(&m, &q("-1")));
    }

    fn grid(n: usize, k: i64) -> Vec<Vec<Rational>> {
        let mut pts = vec![vec![]];
        for _ in 0..n {
            pts = pts
                .into_iter()
                .flat_map(|p| {
                    (0..=k).map(move |i| {
                        let mut p = p.clone();
                        p.push(Rational::new(i, k));
                        p
                    })
                })
                .collect();
        }
        pts
    }

    fn sigma(m: &[Rational], b: &Rational, x: &[Rational]) -> Rational {
        (m.iter().zip(x).map(|(a, v)| a * v).sum::<Rational>() + b).clip()
    }

    #[test]
    fn extr_exhaustive_small() {
        // every neuron with |m_i| <= 3, |b| <= 3, n <= 2 on the 12-grid (n = 3 runs in the acceptance suite)
        for n in 1..=2usize {
            let pts = grid(n, 12);
            let mut ms = vec![vec![]];
            for _ in 0..n {
                ms = ms
                    .into_iter()
                    .flat_map(|m: Vec<i64>| {
                        (-3..=3).map(move |v| {
                            let mut m = m.clone();
                            m.push(v);
                            m
                        })
                    })
                    .collect();
            }
            for m in &ms {
                let m: Vec<Rational> = m.iter().map(|&v| Rational::from(v)).collect();
                for b in -3..=3 {
                    let b = Rational::from(b);
                    let f = extr(&m, &b);
                    for x in &pts {
                        assert_eq!(f.eval(x).unwrap(), sigma(&m, &b, x), "{m:?} {b} at {x:?}");
                    }
                }
            }
        }
    }

    #[test]
    fn rational_and_real_semantics() {
        let pts = grid(2, 12);
        let cases = [
            (qs(&["1/2", "-3/4"]), q("1/3")),
            (qs(&["5/3", "1/6"]), q("-1/2")),
            (qs(&["-7/4", "2"]), q("1/4")),
            (qs(&["0", "3/2"]), q("-1/5")),
        ];
        for (m, b) in cases {
            let fr = extr_rational(&m, &b);
            let fre = extr_real(&m, &b);
            for x in &pts {
                let want = sigma(&m, &b, x);
                assert_eq!(fr.eval(x).unwrap(), want);
                assert_eq!(fre.eval(x).unwrap(), want);
            }
        }
    }

    fn net(s: &str) -> Network {
        Network::from_json(s).unwrap()
    }

    fn dag() -> Network {
        net(r#"{"input_dim":2,"layers":[
            {"weights":[["1","2"],["-2","0"]],"biases":["-1","1"],"activation":["relu","relu"]},
            {"weights":[["-1","1"],["1","-1"]],"biases":["1","-1"],"activation":["relu","relu"]},
            {"weights":[["-1","-1"]],"biases":["1"],"activation":["relu"]},
            {"weights":[["1"]],"biases":["0"],"activation":["none"]}]}"#)
    }

    #[test]
    fn rho_to_sigma_dag() {
        let s = rho_to_sigma(&dag()).unwrap();
        assert_eq!(s.widths(), vec![2, 3, 3, 1, 1]);
        assert_eq!(s.layer(1).biases, qs(&["-1", "-2", "1"]));
        assert_eq!(s.layer(2).biases, qs(&["1", "0", "-1"]));
        assert_eq!(s.layer(2).weights[0], qs(&["-1", "-1", "1"]));
        assert!(s.layers().iter().all(|l| l.activation.iter().all(|a| *a == Activation::Clip)));
        let n = dag();
        for x in grid(2, 12) {
            assert_eq!(s.eval(&x).unwrap(), n.eval(&x).unwrap());
        }
    }

    #[test]
    fn rho_sigma_identity_point() {
        // ρ(3/2) = σ(3/2) + σ(1/2)
        assert_eq!(q("3/2").relu(), q("3/2").clip() + q("1/2").clip());
    }

    #[test]
    fn extract_errors() {
        let dead = net(r#"{"input_dim":1,"layers":[
            {"weights":[["1"]],"biases":["-5"],"activation":["relu"]},
            {"weights":[["1"]],"biases":["0"],"activation":["none"]}]}"#);
        assert!(matches!(
            extract_graph(&dead, Flavor::Integer),
            Err(ExtractError::Degenerate(_))
        ));
        let half = net(r#"{"input_dim":1,"layers":[{"weights":[["1/2"]],"biases":["0"],"activation":["none"]}]}"#);
        assert!(matches!(
            extract_graph(&half, Flavor::Integer),
            Err(ExtractError::FlavorMismatch { .. })
        ));
        let g = extract_graph(&half, Flavor::Rational).unwrap();
        assert_eq!(g.represented_formula(), p("(oplus (delta 2 x1) (delta 2 0))"));
        let wide = net(r#"{"input_dim":1,"layers":[{"weights":[["2"]],"biases":["0"],"activation":["none"]}]}"#);
        let mut opts = ExtractOptions::new(Flavor::Integer);
        opts.check_range = true;
        assert!(matches!(
            extract_graph_with(&wide, opts),
            Err(ExtractError::RangeViolation(_))
        ));
    }

    #[test]
    fn depth_one_graph() {
        let n = net(r#"{"input_dim":3,"layers":[{"weights":[["1","-1","1"]],"biases":["-1"],"activation":["none"]}]}"#);
        let g = extract_graph(&n, Flavor::Integer).unwrap();
        assert_eq!(g.depth(), 1);
        assert_eq!(g.represented_formula(), extr(&qs(&["1", "-1", "1"]), &q("-1")));
    }

    #[test]
    fn certificate_json_names() {
        let c = MintermCertificate {
            m: qs(&["1", "-1"]),
            b: q("0"),
            flavor: Flavor::Rational,
        };
        let s = serde_json::to_string(&c).unwrap();
        assert_eq!(s, r#"{"m":["1","-1"],"b":"0","flavor":"dmv"}"#);
        assert_eq!(serde_json::from_str::<MintermCertificate>(&s).unwrap(), c);
    }
}
