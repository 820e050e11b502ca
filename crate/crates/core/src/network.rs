//! Layered feedforward networks with `relu`, `clip` and identity activations.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bounds::{self, Budget, BoundsError, Target, Value};
use crate::numerics::{Interval, Rational};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    /// `max(0, t)`
    Relu,
    /// `max(0, min(1, t))`
    Clip,
    /// identity, output node only
    None,
}

impl Activation {
    pub fn apply(self, t: &Rational) -> Rational {
        match self {
            Activation::Relu => t.relu(),
            Activation::Clip => t.clip(),
            Activation::None => t.clone(),
        }
    }
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Activation::Relu => "relu",
            Activation::Clip => "clip",
            Activation::None => "none",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Layer {
    pub weights: Vec<Vec<Rational>>,
    pub biases: Vec<Rational>,
    pub activation: Vec<Activation>,
}

impl Layer {
    pub fn width(&self) -> usize {
        self.biases.len()
    }

    pub fn local_map(&self, i: usize) -> LocalMap {
        LocalMap {
            weights: self.weights[i].clone(),
            bias: self.biases[i].clone(),
            activation: self.activation[i],
        }
    }

    pub fn push(&mut self, node: LocalMap) {
        self.weights.push(node.weights);
        self.biases.push(node.bias);
        self.activation.push(node.activation);
    }

    pub fn from_nodes(nodes: impl IntoIterator<Item = LocalMap>) -> Layer {
        let mut layer = Layer {
            weights: vec![],
            biases: vec![],
            activation: vec![],
        };
        for n in nodes {
            layer.push(n);
        }
        layer
    }
}

/// One node's affine row and activation.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct LocalMap {
    pub weights: Vec<Rational>,
    pub bias: Rational,
    pub activation: Activation,
}

impl LocalMap {
    pub fn pre_activation(&self, inputs: &[Rational]) -> Rational {
        self.weights
            .iter()
            .zip(inputs)
            .map(|(w, x)| w * x)
            .sum::<Rational>()
            + &self.bias
    }

    pub fn input_interval(&self) -> Interval {
        input_interval(&self.weights, &self.bias)
    }
}

/// 1-based node address: layer `1..=L`, position `1..=d_j`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeRef {
    pub layer: usize,
    pub index: usize,
}

impl NodeRef {
    pub fn new(layer: usize, index: usize) -> Self {
        NodeRef { layer, index }
    }
}

impl fmt::Display for NodeRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.layer, self.index)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum NetworkError {
    #[error("network has no layers")]
    Empty,
    #[error("input dimension must be positive")]
    ZeroInputDim,
    #[error("layer {layer}: {what}")]
    Shape { layer: usize, what: String },
    #[error("output layer has width {0}, expected 1")]
    OutputWidth(usize),
    #[error("node {0} uses the identity activation, which is reserved for the output")]
    HiddenIdentity(NodeRef),
    #[error("input of dimension {found} given to a network of input dimension {expected}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("input coordinate {position} is {value}, outside [0, 1]")]
    OutOfDomain { position: usize, value: Rational },
    #[error("no node {0} in this network")]
    InvalidNode(NodeRef),
    #[error("malformed network JSON: {0}")]
    Json(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Network {
    input_dim: usize,
    layers: Vec<Layer>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawNetwork {
    input_dim: usize,
    layers: Vec<Layer>,
}

/// First failed clause of the non-degeneracy condition.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    /// Pre-activation value is never positive.
    NeverPositive { node: NodeRef, max: Rational },
    /// Pre-activation value never reaches 0 or below.
    NeverNonPositive { node: NodeRef, min: Rational },
    DuplicateLocalMap { node: NodeRef, same_as: NodeRef },
    ZeroOutputWeights,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::NeverPositive { node, max } => {
                write!(f, "hidden node {node} is never positive (max {max})")
            }
            Violation::NeverNonPositive { node, min } => {
                write!(f, "hidden node {node} is always positive (min {min})")
            }
            Violation::DuplicateLocalMap { node, same_as } => {
                write!(f, "node {node} has the same local map as {same_as}")
            }
            Violation::ZeroOutputWeights => write!(f, "output node has no nonzero incoming weight"),
        }
    }
}

/// `[b + Σ(w-|w|)/2, b + Σ(w+|w|)/2]`, the range of `w.x + b` over the unit cube.
pub fn input_interval(weights: &[Rational], bias: &Rational) -> Interval {
    let two = Rational::from(2);
    let mut lo = bias.clone();
    let mut hi = bias.clone();
    for w in weights {
        lo += (w - &w.abs()) / &two;
        hi += (w + &w.abs()) / &two;
    }
    Interval::new(lo, hi)
}

impl Network {
    pub fn new(input_dim: usize, layers: Vec<Layer>) -> Result<Network, NetworkError> {
        if input_dim == 0 {
            return Err(NetworkError::ZeroInputDim);
        }
        if layers.is_empty() {
            return Err(NetworkError::Empty);
        }
        let mut prev = input_dim;
        let depth = layers.len();
        for (j, layer) in layers.iter().enumerate() {
            let shape = |what: String| NetworkError::Shape {
                layer: j + 1,
                what,
            };
            let d = layer.biases.len();
            if d == 0 {
                return Err(shape("layer has no nodes".into()));
            }
            if layer.weights.len() != d || layer.activation.len() != d {
                return Err(shape(format!(
                    "{} weight rows, {} biases and {} activations",
                    layer.weights.len(),
                    d,
                    layer.activation.len()
                )));
            }
            if let Some(i) = layer.weights.iter().position(|r| r.len() != prev) {
                return Err(shape(format!(
                    "row {} has {} entries, expected {prev}",
                    i + 1,
                    layer.weights[i].len()
                )));
            }
            if j + 1 < depth {
                if let Some(i) = layer.activation.iter().position(|a| *a == Activation::None) {
                    return Err(NetworkError::HiddenIdentity(NodeRef::new(j + 1, i + 1)));
                }
            }
            prev = d;
        }
        if prev != 1 {
            return Err(NetworkError::OutputWidth(prev));
        }
        Ok(Network { input_dim, layers })
    }

    pub fn from_json(text: &str) -> Result<Network, NetworkError> {
        let raw: RawNetwork =
            serde_json::from_str(text).map_err(|e| NetworkError::Json(e.to_string()))?;
        Network::new(raw.input_dim, raw.layers)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("network serializes")
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn into_layers(self) -> Vec<Layer> {
        self.layers
    }

    /// Layer `j` (1-based).
    pub fn layer(&self, j: usize) -> &Layer {
        &self.layers[j - 1]
    }

    /// `[d_0, d_1, ..., d_L]`
    pub fn widths(&self) -> Vec<usize> {
        std::iter::once(self.input_dim)
            .chain(self.layers.iter().map(Layer::width))
            .collect()
    }

    pub fn output(&self) -> NodeRef {
        NodeRef::new(self.depth(), 1)
    }

    pub fn node_local_map(&self, v: NodeRef) -> Result<LocalMap, NetworkError> {
        if v.layer == 0 || v.layer > self.depth() || v.index == 0 {
            return Err(NetworkError::InvalidNode(v));
        }
        let layer = self.layer(v.layer);
        if v.index > layer.width() {
            return Err(NetworkError::InvalidNode(v));
        }
        Ok(layer.local_map(v.index - 1))
    }

    fn check_input(&self, x: &[Rational]) -> Result<(), NetworkError> {
        if x.len() != self.input_dim {
            return Err(NetworkError::DimensionMismatch {
                expected: self.input_dim,
                found: x.len(),
            });
        }
        if let Some(position) = x.iter().position(|v| !v.in_unit_interval()) {
            return Err(NetworkError::OutOfDomain {
                position,
                value: x[position].clone(),
            });
        }
        Ok(())
    }

    /// Post-activation values of every layer, input layer first.
    pub fn eval_layers(&self, x: &[Rational]) -> Result<Vec<Vec<Rational>>, NetworkError> {
        self.check_input(x)?;
        let mut out = vec![x.to_vec()];
        for layer in &self.layers {
            let prev = out.last().unwrap();
            let next = (0..layer.width())
                .map(|i| {
                    let lm = layer.local_map(i);
                    lm.activation.apply(&lm.pre_activation(prev))
                })
                .collect();
            out.push(next);
        }
        Ok(out)
    }

    pub fn eval(&self, x: &[Rational]) -> Result<Rational, NetworkError> {
        let mut layers = self.eval_layers(x)?;
        Ok(layers.pop().unwrap().remove(0))
    }

    pub fn is_non_degenerate(&self) -> bool {
        self.non_degeneracy_violation().is_none()
    }

    pub fn non_degeneracy_violation(&self) -> Option<Violation> {
        self.non_degeneracy_violation_with(Budget::unlimited())
            .expect("unlimited budget")
    }

    /// First violated clause, hidden layers in order, then the output clause.
    pub fn non_degeneracy_violation_with(
        &self,
        budget: Budget,
    ) -> Result<Option<Violation>, BoundsError> {
        for j in 1..self.depth() {
            let layer = self.layer(j);
            for i in 0..layer.width() {
                let node = NodeRef::new(j, i + 1);
                if let Some(k) = (0..i).find(|&k| layer.local_map(k) == layer.local_map(i)) {
                    return Ok(Some(Violation::DuplicateLocalMap {
                        node,
                        same_as: NodeRef::new(j, k + 1),
                    }));
                }
                let range =
                    bounds::exact_extrema_with(self, Target::Node(node), Value::Pre, budget)?;
                if !range.hi.is_positive() {
                    return Ok(Some(Violation::NeverPositive {
                        node,
                        max: range.hi,
                    }));
                }
                if range.lo.is_positive() {
                    return Ok(Some(Violation::NeverNonPositive {
                        node,
                        min: range.lo,
                    }));
                }
            }
        }
        if self.layers.last().unwrap().weights[0]
            .iter()
            .all(Rational::is_zero)
        {
            return Ok(Some(Violation::ZeroOutputWeights));
        }
        Ok(None)
    }

    /// Human-readable structural differences, empty when the networks are identical.
    pub fn diff(&self, other: &Network) -> Vec<String> {
        let mut out = vec![];
        if self.input_dim != other.input_dim {
            out.push(format!(
                "input_dim: {} vs {}",
                self.input_dim, other.input_dim
            ));
        }
        if self.widths() != other.widths() {
            out.push(format!(
                "widths: {:?} vs {:?}",
                self.widths(),
                other.widths()
            ));
            return out;
        }
        for (j, (a, b)) in self.layers.iter().zip(&other.layers).enumerate() {
            for i in 0..a.width() {
                let (x, y) = (a.local_map(i), b.local_map(i));
                if x != y {
                    out.push(format!(
                        "node ({},{}): {} vs {}",
                        j + 1,
                        i + 1,
                        fmt_local(&x),
                        fmt_local(&y)
                    ));
                }
            }
        }
        out
    }

    /// Structural equality up to reordering the nodes inside each hidden layer.
    pub fn equal_up_to_permutation(&self, other: &Network) -> bool {
        if self.widths() != other.widths() {
            return false;
        }
        let perm: Vec<usize> = (0..self.input_dim).collect();
        self.match_layer(other, 0, &perm)
    }

    /// `prev[c]` is the column of `other` matching column `c` of `self`.
    fn match_layer(&self, other: &Network, j: usize, prev: &[usize]) -> bool {
        if j == self.depth() {
            return true;
        }
        let (a, b) = (&self.layers[j], &other.layers[j]);
        let permuted = |i: usize| -> LocalMap {
            let lm = a.local_map(i);
            let mut w = vec![Rational::zero(); lm.weights.len()];
            for (c, v) in lm.weights.into_iter().enumerate() {
                w[prev[c]] = v;
            }
            LocalMap {
                weights: w,
                ..lm
            }
        };
        let rows: Vec<LocalMap> = (0..a.width()).map(permuted).collect();
        let mut assignment = vec![usize::MAX; a.width()];
        let mut used = vec![false; b.width()];
        self.assign(other, j, &rows, 0, &mut assignment, &mut used)
    }

    fn assign(
        &self,
        other: &Network,
        j: usize,
        rows: &[LocalMap],
        i: usize,
        assignment: &mut Vec<usize>,
        used: &mut Vec<bool>,
    ) -> bool {
        if i == rows.len() {
            return self.match_layer(other, j + 1, assignment);
        }
        let b = &other.layers[j];
        for k in 0..b.width() {
            if !used[k] && b.local_map(k) == rows[i] {
                used[k] = true;
                assignment[i] = k;
                if self.assign(other, j, rows, i + 1, assignment, used) {
                    return true;
                }
                used[k] = false;
            }
        }
        false
    }
}

fn fmt_local(lm: &LocalMap) -> String {
    let w: Vec<String> = lm.weights.iter().map(|r| r.to_string()).collect();
    format!("{}(w=[{}], b={})", lm.activation, w.join(", "), lm.bias)
}
