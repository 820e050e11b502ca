//! Exact extrema of node values over the unit cube.
//!
//! Branch and bound over activation regimes. Nodes are fixed upstream to
//! downstream; a node is only split when an LP shows both (or all three)
//! regimes are reachable in the current region. Each leaf is an exact LP.

use thiserror::Error;

use crate::network::{Activation, Network, NodeRef};
use crate::numerics::{lp_extremum, Affine, Interval, LpError, Rational, Sense};

/// Environment variable holding the default branch-and-bound node budget.
pub const BUDGET_ENV: &str = "LUK_NODE_BUDGET";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Budget(Option<u64>);

impl Budget {
    pub fn unlimited() -> Self {
        Budget(None)
    }

    pub fn nodes(n: u64) -> Self {
        Budget(Some(n))
    }

    /// Reads [`BUDGET_ENV`]; unset means unlimited.
    pub fn from_env() -> Result<Self, BoundsError> {
        match std::env::var(BUDGET_ENV) {
            Err(_) => Ok(Budget::unlimited()),
            Ok(s) => s
                .trim()
                .parse()
                .map(Budget::nodes)
                .map_err(|_| BoundsError::BadBudget(s)),
        }
    }

    pub fn limit(&self) -> Option<u64> {
        self.0
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BoundsError {
    #[error("branch and bound exceeded its budget of {0} nodes")]
    BudgetExceeded(u64),
    #[error("invalid node budget {0:?}")]
    BadBudget(String),
    #[error("no node {0} in this network")]
    InvalidNode(NodeRef),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Target {
    Node(NodeRef),
    Output,
}

/// Which value of the node to bound.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Value {
    /// the affine input of the activation
    Pre,
    /// after the activation
    Post,
}

/// Exact `[min, max]` of the selected value over `[0,1]^d0`.
///
/// Panics on an invalid node reference.
pub fn exact_extrema(net: &Network, target: Target, value: Value) -> Interval {
    exact_extrema_with(net, target, value, Budget::unlimited()).expect("valid target")
}

pub fn exact_extrema_with(
    net: &Network,
    target: Target,
    value: Value,
    budget: Budget,
) -> Result<Interval, BoundsError> {
    let node = match target {
        Target::Output => net.output(),
        Target::Node(v) => v,
    };
    net.node_local_map(node)
        .map_err(|_| BoundsError::InvalidNode(node))?;

    let d = net.input_dim();
    // needed[j][i]: node (j+1, i+1) influences the target.
    let mut needed: Vec<Vec<bool>> = net
        .layers()
        .iter()
        .map(|l| vec![false; l.width()])
        .collect();
    needed[node.layer - 1][node.index - 1] = true;
    for j in (1..node.layer).rev() {
        let next = net.layer(j + 1);
        for i in 0..net.layer(j).width() {
            needed[j - 1][i] = (0..next.width())
                .any(|k| needed[j][k] && !next.weights[k][i].is_zero());
        }
    }
    let order: Vec<NodeRef> = (1..=node.layer)
        .flat_map(|j| {
            let needed = &needed;
            (1..=net.layer(j).width())
                .filter(move |&i| needed[j - 1][i - 1])
                .map(move |i| NodeRef::new(j, i))
        })
        .collect();

    let values: Vec<Vec<Option<Affine>>> = net
        .layers()
        .iter()
        .map(|l| vec![None; l.width()])
        .collect();
    let mut search = Search {
        net,
        order,
        value,
        budget: budget.limit(),
        visited: 0,
        best: None,
        d,
    };
    let mut constraints = vec![];
    search.explore(0, values, &mut constraints)?;
    Ok(search.best.expect("the unit cube is nonempty"))
}

struct Search<'a> {
    net: &'a Network,
    order: Vec<NodeRef>,
    value: Value,
    budget: Option<u64>,
    visited: u64,
    best: Option<Interval>,
    d: usize,
}

impl Search<'_> {
    fn tick(&mut self) -> Result<(), BoundsError> {
        self.visited += 1;
        match self.budget {
            Some(limit) if self.visited > limit => Err(BoundsError::BudgetExceeded(limit)),
            _ => Ok(()),
        }
    }

    fn pre_activation(&self, v: NodeRef, values: &[Vec<Option<Affine>>]) -> Affine {
        let lm = self.net.layer(v.layer).local_map(v.index - 1);
        let mut acc = Affine::constant(self.d, lm.bias);
        for (c, w) in lm.weights.iter().enumerate() {
            if w.is_zero() {
                continue;
            }
            if v.layer == 1 {
                acc.add_scaled(&Affine::coordinate(self.d, c), w);
            } else {
                let src = values[v.layer - 2][c]
                    .as_ref()
                    .expect("upstream node fixed before its successors");
                acc.add_scaled(src, w);
            }
        }
        acc
    }

    fn range(&self, f: &Affine, constraints: &[Affine]) -> Option<Interval> {
        let lo = lp_extremum(f, constraints, Sense::Min);
        let hi = lp_extremum(f, constraints, Sense::Max);
        match (lo, hi) {
            (Ok(lo), Ok(hi)) => Some(Interval::new(lo, hi)),
            (Err(LpError::Infeasible), _) | (_, Err(LpError::Infeasible)) => None,
            (Err(e), _) | (_, Err(e)) => panic!("internal LP error: {e}"),
        }
    }

    fn record(&mut self, r: Interval) {
        self.best = Some(match self.best.take() {
            None => r,
            Some(b) => b.hull(&r),
        });
    }

    fn explore(
        &mut self,
        k: usize,
        mut values: Vec<Vec<Option<Affine>>>,
        constraints: &mut Vec<Affine>,
    ) -> Result<(), BoundsError> {
        self.tick()?;
        let v = self.order[k];
        let last = k + 1 == self.order.len();
        let pre = self.pre_activation(v, &values);
        let Some(range) = self.range(&pre, constraints) else {
            return Ok(());
        };
        if last && self.value == Value::Pre {
            self.record(range);
            return Ok(());
        }

        let one = Rational::one();
        let zero_fn = || Affine::constant(self.d, Rational::zero());
        let one_fn = || Affine::constant(self.d, Rational::one());
        // (extra constraints, value) per reachable regime
        let mut regimes: Vec<(Vec<Affine>, Affine)> = vec![];
        match self.net.layer(v.layer).activation[v.index - 1] {
            Activation::None => regimes.push((vec![], pre.clone())),
            Activation::Relu => {
                if !range.hi.is_positive() {
                    regimes.push((vec![], zero_fn()));
                } else if !range.lo.is_negative() {
                    regimes.push((vec![], pre.clone()));
                } else {
                    regimes.push((vec![pre.clone()], zero_fn()));
                    regimes.push((vec![pre.neg()], pre.clone()));
                }
            }
            Activation::Clip => {
                let mut shifted = pre.clone();
                shifted.constant -= &one;
                if !range.hi.is_positive() {
                    regimes.push((vec![], zero_fn()));
                } else if range.lo >= one {
                    regimes.push((vec![], one_fn()));
                } else if !range.lo.is_negative() && range.hi <= one {
                    regimes.push((vec![], pre.clone()));
                } else {
                    if range.lo.is_negative() {
                        regimes.push((vec![pre.clone()], zero_fn()));
                    }
                    regimes.push((vec![pre.neg(), shifted.clone()], pre.clone()));
                    if range.hi > one {
                        regimes.push((vec![shifted.neg()], one_fn()));
                    }
                }
            }
        }

        let n = regimes.len();
        for (idx, (extra, val)) in regimes.into_iter().enumerate() {
            let added = extra.len();
            constraints.extend(extra);
            if last {
                if let Some(r) = self.range(&val, constraints) {
                    self.tick()?;
                    self.record(r);
                }
            } else {
                let mut vals = if idx + 1 == n {
                    std::mem::take(&mut values)
                } else {
                    values.clone()
                };
                vals[v.layer - 1][v.index - 1] = Some(val);
                self.explore(k + 1, vals, constraints)?;
            }
            constraints.truncate(constraints.len() - added);
        }
        Ok(())
    }
}
