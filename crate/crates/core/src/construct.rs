//! From normal substitution graphs back to ReLU networks.

use thiserror::Error;

use crate::bounds::{exact_extrema_with, Budget, BoundsError, Target, Value};
use crate::extract::{extract_graph_with, ExtractError, ExtractOptions, Flavor};
use crate::graph::{GraphNode, SubstitutionGraph};
use crate::network::{Activation, Layer, LocalMap, Network, NodeRef};
use crate::numerics::Rational;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConstructError {
    #[error("node {0} has no certificate")]
    MissingCertificate(NodeRef),
    #[error("certificate of node {0} does not reproduce its formula")]
    CertificateMismatch(NodeRef),
    #[error("graph is not normal at node {node}: {reason}")]
    NotNormal { node: NodeRef, reason: String },
    #[error(transparent)]
    Extract(#[from] ExtractError),
    #[error(transparent)]
    Bounds(#[from] BoundsError),
}

/// What a normal node turns back into.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Kappa {
    /// `σ(weights . x + bias)`
    Neuron { weights: Vec<Rational>, bias: Rational },
    Const0,
    Const1,
}

/// Map a certified node back to its neuron; `node` only labels errors.
pub fn kappa(n: &GraphNode, node: NodeRef) -> Result<Kappa, ConstructError> {
    let cert = n
        .certificate
        .as_ref()
        .ok_or(ConstructError::MissingCertificate(node))?;
    if cert.formula().as_ref() != Some(&n.formula) {
        return Err(ConstructError::CertificateMismatch(node));
    }
    Ok(if n.formula.is_zero() {
        Kappa::Const0
    } else if n.formula.is_one() {
        Kappa::Const1
    } else {
        Kappa::Neuron {
            weights: cert.m.clone(),
            bias: cert.b.clone(),
        }
    })
}

fn not_normal(node: NodeRef, e: ConstructError) -> ConstructError {
    ConstructError::NotNormal {
        node,
        reason: e.to_string(),
    }
}

/// Clipped network computing the graph's represented formula.
///
/// Constant hidden nodes are removed: a `0` node with its edges, a `1` node
/// with its outgoing weights folded into the successors' biases. If a whole
/// hidden level is constant, its first node stays as a weightless neuron.
/// The output node always keeps its certificate's affine map.
pub fn graph_to_sigma(g: &SubstitutionGraph) -> Result<Network, ConstructError> {
    let mut layers: Vec<Layer> = vec![];
    // value of each removed node of the level below (None = kept)
    let mut below: Vec<Option<Rational>> = vec![None; g.input_dim()];
    let depth = g.depth();
    for (j, level) in g.levels().iter().enumerate() {
        let mut kept = vec![];
        let mut removed = vec![];
        for (i, n) in level.iter().enumerate() {
            let v = NodeRef::new(j + 1, i + 1);
            let k = kappa(n, v).map_err(|e| not_normal(v, e))?;
            let cert = n.certificate.as_ref().expect("checked by kappa");
            if cert.m.len() != below.len() {
                return Err(not_normal(
                    v,
                    ConstructError::CertificateMismatch(v),
                ));
            }
            let (weights, mut bias) = match &k {
                Kappa::Neuron { weights, bias } => (weights.clone(), bias.clone()),
                _ => (cert.m.clone(), cert.b.clone()),
            };
            let mut row = vec![];
            for (w, b) in weights.into_iter().zip(&below) {
                match b {
                    None => row.push(w),
                    Some(c) => bias += &w * c,
                }
            }
            let lm = LocalMap {
                weights: row,
                bias,
                activation: Activation::Clip,
            };
            match k {
                _ if j + 1 == depth => kept.push(lm),
                Kappa::Neuron { .. } => kept.push(lm),
                Kappa::Const0 => removed.push((i, Rational::zero())),
                Kappa::Const1 => removed.push((i, Rational::one())),
            }
        }
        if kept.is_empty() {
            let (_, c) = removed.remove(0);
            kept.push(LocalMap {
                weights: vec![Rational::zero(); below.iter().filter(|b| b.is_none()).count()],
                bias: c,
                activation: Activation::Clip,
            });
        }
        let mut next_below = vec![None; level.len()];
        for (r, c) in removed {
            next_below[r] = Some(c);
        }
        below = next_below;
        layers.push(Layer::from_nodes(kept));
    }
    Ok(Network::new(g.input_dim(), layers).expect("shape follows the graph"))
}

/// Replace clipped nodes by ReLU nodes, from the last hidden layer down.
pub fn sigma_to_rho(m: &Network) -> Result<Network, ConstructError> {
    sigma_to_rho_with(m, Budget::unlimited())
}

struct Entry {
    map: LocalMap,
    column: Vec<Rational>,
    primary: bool,
}

pub fn sigma_to_rho_with(m: &Network, budget: Budget) -> Result<Network, ConstructError> {
    let mut layers: Vec<Layer> = m.layers().to_vec();
    let depth = layers.len();
    for j in (0..depth - 1).rev() {
        let layer = &layers[j];
        let next = &layers[j + 1];
        let column = |i: usize| -> Vec<Rational> { next.weights.iter().map(|r| r[i].clone()).collect() };
        let mut entries: Vec<Entry> = vec![];
        for i in 0..layer.width() {
            let lm = layer.local_map(i);
            let col = column(i);
            if lm.activation != Activation::Clip {
                entries.push(Entry {
                    map: lm,
                    column: col,
                    primary: true,
                });
                continue;
            }
            let continuation = i > 0 && {
                let prev = layer.local_map(i - 1);
                prev.activation == Activation::Clip
                    && prev.weights == lm.weights
                    && prev.bias == &lm.bias + Rational::one()
                    && column(i - 1) == col
            };
            let hi = lm.input_interval().hi;
            let relu = LocalMap {
                activation: Activation::Relu,
                ..lm
            };
            let twin = (hi > Rational::one()).then(|| Entry {
                map: LocalMap {
                    bias: &relu.bias - Rational::one(),
                    ..relu.clone()
                },
                column: col.iter().map(|w| -w).collect(),
                primary: false,
            });
            entries.push(Entry {
                map: relu,
                column: col,
                primary: !continuation,
            });
            entries.extend(twin);
        }

        // merge identical local maps: (map, summed column, primary, position)
        let mut groups: Vec<(LocalMap, Vec<Rational>, bool, usize)> = vec![];
        for (pos, e) in entries.into_iter().enumerate() {
            match groups.iter_mut().find(|g| g.0 == e.map) {
                Some(g) => {
                    for (a, b) in g.1.iter_mut().zip(&e.column) {
                        *a += b;
                    }
                    if e.primary && !g.2 {
                        g.2 = true;
                        g.3 = pos;
                    }
                }
                None => groups.push((e.map, e.column, e.primary, pos)),
            }
        }
        groups.retain(|g| g.2 || g.1.iter().any(|w| !w.is_zero()));
        groups.sort_by_key(|g| g.3);

        let rows = layers[j + 1].width();
        let mut new_next: Vec<Vec<Rational>> = vec![vec![]; rows];
        for g in &groups {
            for (r, w) in g.1.iter().enumerate() {
                new_next[r].push(w.clone());
            }
        }
        layers[j + 1].weights = new_next;
        layers[j] = Layer::from_nodes(groups.into_iter().map(|g| g.0));
    }

    let out = layers[depth - 1].local_map(0);
    if out.activation == Activation::None {
        return Ok(Network::new(m.input_dim(), layers).expect("well-formed"));
    }
    let current = Network::new(m.input_dim(), layers.clone()).expect("well-formed");
    let r = exact_extrema_with(&current, Target::Output, Value::Pre, budget)?;
    let fits = match out.activation {
        Activation::Clip => !r.lo.is_negative() && r.hi <= Rational::one(),
        _ => !r.lo.is_negative(),
    };
    if fits {
        layers[depth - 1].activation[0] = Activation::None;
    } else if out.activation == Activation::Clip {
        // σ(t) = ρ(t) - ρ(t - 1)
        let relu = LocalMap {
            activation: Activation::Relu,
            ..out
        };
        let twin = LocalMap {
            bias: &relu.bias - Rational::one(),
            ..relu.clone()
        };
        layers[depth - 1] = Layer::from_nodes([relu, twin]);
        layers.push(Layer::from_nodes([LocalMap {
            weights: vec![Rational::one(), -Rational::one()],
            bias: Rational::zero(),
            activation: Activation::None,
        }]));
    }
    Ok(Network::new(m.input_dim(), layers).expect("well-formed"))
}

/// `graph_to_sigma` followed by `sigma_to_rho`.
pub fn construct(g: &SubstitutionGraph, budget: Budget) -> Result<Network, ConstructError> {
    sigma_to_rho_with(&graph_to_sigma(g)?, budget)
}

/// Extract, rebuild and return the rebuilt network.
///
/// Integer networks use the integer flavor, others the rational one.
pub fn roundtrip(net: &Network) -> Result<Network, ConstructError> {
    roundtrip_with(net, Budget::unlimited())
}

pub fn roundtrip_with(net: &Network, budget: Budget) -> Result<Network, ConstructError> {
    let integer = net
        .layers()
        .iter()
        .all(|l| l.weights.iter().flatten().chain(&l.biases).all(Rational::is_integer));
    let mut opts = ExtractOptions::new(if integer {
        Flavor::Integer
    } else {
        Flavor::Rational
    });
    opts.budget = budget;
    let g = extract_graph_with(net, opts)?;
    construct(&g, budget)
}
