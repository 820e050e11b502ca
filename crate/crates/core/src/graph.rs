//! Substitution graphs: layered graphs whose nodes carry formulas.
//!
//! Node `i` of level `j` holds a formula over `x_1 .. x_{d_{j-1}}`, where
//! `x_c` stands for node `c` of level `j-1` (or input `c` when `j = 1`).

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::extract::MintermCertificate;
use crate::formula::{Formula, Substitution};
use crate::network::NodeRef;
use crate::numerics::Rational;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphNode {
    pub formula: Formula,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub certificate: Option<MintermCertificate>,
}

impl GraphNode {
    pub fn bare(formula: Formula) -> Self {
        GraphNode {
            formula,
            certificate: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GraphError {
    #[error("malformed graph: {0}")]
    Shape(String),
    #[error("node {node} mentions x{var}, but the level below has width {width}")]
    VariableOutOfRange { node: NodeRef, var: u32, width: usize },
    #[error("node {0} has no certificate")]
    MissingCertificate(NodeRef),
    #[error("level {level} is out of range for a graph of depth {depth}")]
    LevelOutOfRange { level: usize, depth: usize },
    #[error("factorization does not reproduce the formula of node {0}")]
    FactorizationMismatch(NodeRef),
    #[error("invalid factorization: {0}")]
    BadFactorization(String),
    #[error("malformed graph JSON: {0}")]
    Json(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SubstitutionGraph {
    widths: Vec<usize>,
    nodes: Vec<Vec<GraphNode>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGraph {
    widths: Vec<usize>,
    nodes: Vec<Vec<GraphNode>>,
}

impl SubstitutionGraph {
    /// `levels[j-1]` holds the nodes of level `j`.
    pub fn new(input_dim: usize, levels: Vec<Vec<GraphNode>>) -> Result<Self, GraphError> {
        if input_dim == 0 {
            return Err(GraphError::Shape("input width must be positive".into()));
        }
        if levels.is_empty() {
            return Err(GraphError::Shape("graph has no levels".into()));
        }
        if let Some(j) = levels.iter().position(Vec::is_empty) {
            return Err(GraphError::Shape(format!("level {} is empty", j + 1)));
        }
        if levels.last().unwrap().len() != 1 {
            return Err(GraphError::Shape("output level must have exactly one node".into()));
        }
        let mut width = input_dim;
        for (j, level) in levels.iter().enumerate() {
            for (i, n) in level.iter().enumerate() {
                let var = n.formula.max_var();
                if var as usize > width {
                    return Err(GraphError::VariableOutOfRange {
                        node: NodeRef::new(j + 1, i + 1),
                        var,
                        width,
                    });
                }
            }
            width = level.len();
        }
        let widths = std::iter::once(input_dim)
            .chain(levels.iter().map(Vec::len))
            .collect();
        Ok(SubstitutionGraph {
            widths,
            nodes: levels,
        })
    }

    /// Depth-1 graph whose output holds `f`.
    pub fn from_formula(input_dim: usize, f: Formula) -> Result<Self, GraphError> {
        SubstitutionGraph::new(input_dim, vec![vec![GraphNode::bare(f)]])
    }

    pub fn from_json(text: &str) -> Result<Self, GraphError> {
        let raw: RawGraph =
            serde_json::from_str(text).map_err(|e| GraphError::Json(e.to_string()))?;
        let Some(&d0) = raw.widths.first() else {
            return Err(GraphError::Shape("widths is empty".into()));
        };
        let g = SubstitutionGraph::new(d0, raw.nodes)?;
        if g.widths != raw.widths {
            return Err(GraphError::Shape(format!(
                "widths {:?} do not match the node lists {:?}",
                raw.widths, g.widths
            )));
        }
        Ok(g)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("graph serializes")
    }

    pub fn widths(&self) -> &[usize] {
        &self.widths
    }

    pub fn input_dim(&self) -> usize {
        self.widths[0]
    }

    pub fn depth(&self) -> usize {
        self.nodes.len()
    }

    /// Nodes of level `j` (1-based).
    pub fn level(&self, j: usize) -> &[GraphNode] {
        &self.nodes[j - 1]
    }

    pub fn levels(&self) -> &[Vec<GraphNode>] {
        &self.nodes
    }

    pub fn node(&self, v: NodeRef) -> Option<&GraphNode> {
        self.nodes.get(v.layer.checked_sub(1)?)?.get(v.index.checked_sub(1)?)
    }

    pub fn output(&self) -> &GraphNode {
        &self.nodes.last().unwrap()[0]
    }

    /// `x_i ↦ [v_i]` for the nodes of level `j`.
    pub fn level_substitution(&self, j: usize) -> Substitution {
        Substitution::from_list(self.level(j).iter().map(|n| n.formula.clone()))
    }

    /// Output formula with the levels below substituted in, top level first.
    pub fn represented_formula(&self) -> Formula {
        let mut f = self.output().formula.clone();
        for j in (1..self.depth()).rev() {
            f = f.substitute(&self.level_substitution(j));
        }
        f
    }

    /// Same formula, built from the inputs upward.
    pub fn represented_formula_input_first(&self) -> Formula {
        let mut below = self.level_substitution(1);
        for j in 2..=self.depth() {
            below = self.level_substitution(j).compose(&below);
        }
        below.get(1).expect("output level has one node").clone()
    }

    /// Numeric propagation level by level.
    pub fn eval_layerwise(
        &self,
        x: &[Rational],
    ) -> Result<Rational, crate::formula::EvalError> {
        let mut vals = x.to_vec();
        for level in &self.nodes {
            vals = level
                .iter()
                .map(|n| n.formula.eval(&vals))
                .collect::<Result<_, _>>()?;
        }
        Ok(vals.remove(0))
    }

    /// Every node has a certificate that reproduces its formula.
    pub fn is_normal(&self) -> Result<bool, GraphError> {
        let mut normal = true;
        for (j, level) in self.nodes.iter().enumerate() {
            for (i, n) in level.iter().enumerate() {
                let cert = n
                    .certificate
                    .as_ref()
                    .ok_or(GraphError::MissingCertificate(NodeRef::new(j + 1, i + 1)))?;
                if cert.m.len() != self.widths[j] || cert.formula().as_ref() != Some(&n.formula) {
                    normal = false;
                }
            }
        }
        Ok(normal)
    }

    /// Copy with one node's formula replaced. The certificate stays as
    /// provenance; the node is normal again only once the formula matches it.
    pub fn with_node_formula(&self, v: NodeRef, f: Formula) -> Result<Self, GraphError> {
        if self.node(v).is_none() {
            return Err(GraphError::Shape(format!("no node {v}")));
        }
        let mut levels = self.nodes.clone();
        levels[v.layer - 1][v.index - 1].formula = f;
        SubstitutionGraph::new(self.input_dim(), levels)
    }

    /// Substitute level `k` into level `k+1` and remove level `k`.
    pub fn collapse(&self, k: usize) -> Result<Self, GraphError> {
        if k == 0 || k >= self.depth() {
            return Err(GraphError::LevelOutOfRange {
                level: k,
                depth: self.depth(),
            });
        }
        let z = self.level_substitution(k);
        let mut levels = self.nodes.clone();
        let upper = levels.remove(k);
        levels[k - 1] = upper
            .into_iter()
            .map(|n| GraphNode::bare(n.formula.substitute(&z)))
            .collect();
        SubstitutionGraph::new(self.input_dim(), levels)
    }

    /// Like [`collapse`](Self::collapse), also returning the factors that undo it.
    pub fn collapse_recorded(
        &self,
        k: usize,
    ) -> Result<(Self, Vec<Formula>, Substitution), GraphError> {
        let g = self.collapse(k)?;
        let factors = self.level(k + 1).iter().map(|n| n.formula.clone()).collect();
        Ok((g, factors, self.level_substitution(k)))
    }

    /// Collapse down to depth 1.
    pub fn collapse_all(&self) -> Self {
        let mut g = self.clone();
        while g.depth() > 1 {
            g = g.collapse(1).expect("depth > 1");
        }
        g
    }

    /// Split level `k`: its nodes become `factors`, and a new level holding
    /// the substitutors of `z` is inserted right below it.
    pub fn expand(
        &self,
        k: usize,
        factors: Vec<Formula>,
        z: &Substitution,
    ) -> Result<Self, GraphError> {
        if k == 0 || k > self.depth() {
            return Err(GraphError::LevelOutOfRange {
                level: k,
                depth: self.depth(),
            });
        }
        let level = self.level(k);
        if factors.len() != level.len() {
            return Err(GraphError::BadFactorization(format!(
                "{} factors for a level of width {}",
                factors.len(),
                level.len()
            )));
        }
        let width = z.len();
        if width == 0 || !z.keys().eq(1..=width as u32) {
            return Err(GraphError::BadFactorization(
                "substitution keys must be exactly x1..xd".into(),
            ));
        }
        for (i, (t, n)) in factors.iter().zip(level).enumerate() {
            if t.max_var() as usize > width || t.substitute(z) != n.formula {
                return Err(GraphError::FactorizationMismatch(NodeRef::new(k, i + 1)));
            }
        }
        let mut levels = self.nodes.clone();
        levels[k - 1] = factors.into_iter().map(GraphNode::bare).collect();
        levels.insert(
            k - 1,
            z.iter().map(|(_, f)| GraphNode::bare(f.clone())).collect(),
        );
        SubstitutionGraph::new(self.input_dim(), levels)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::extract::{extract_graph, Flavor};
    use crate::network::Network;

    fn p(s: &str) -> Formula {
        Formula::parse(s).unwrap()
    }

    fn two_level() -> SubstitutionGraph {
        SubstitutionGraph::new(
            2,
            vec![
                vec![GraphNode::bare(p("(oplus x1 x2)"))],
                vec![GraphNode::bare(p("(odot x1 x1)"))],
            ],
        )
        .unwrap()
    }

    #[test]
    fn collapse_and_expand() {
        let g = two_level();
        let c = g.collapse(1).unwrap();
        assert_eq!(c.depth(), 1);
        assert_eq!(c.output().formula, p("(odot (oplus x1 x2) (oplus x1 x2))"));
        let z = Substitution::from_list([p("(oplus x1 x2)")]);
        let e = c.expand(1, vec![p("(odot x1 x1)")], &z).unwrap();
        assert_eq!(e, g);
        assert!(matches!(
            c.expand(1, vec![p("(odot x1 x2)")], &z),
            Err(GraphError::FactorizationMismatch(_))
        ));
        assert!(matches!(g.collapse(2), Err(GraphError::LevelOutOfRange { .. })));
    }

    #[test]
    fn vacuous_substitutor() {
        let g = SubstitutionGraph::from_formula(2, p("(odot x1 x1)")).unwrap();
        let z = Substitution::from_list([p("x1"), p("(not x1)")]);
        let e = g.expand(1, vec![p("(odot x1 x1)")], &z).unwrap();
        assert_eq!(e.widths(), &[2, 2, 1]);
        assert_eq!(e.represented_formula(), g.represented_formula());
        let bad: Substitution = [(2, p("x1"))].into_iter().collect();
        assert!(matches!(
            g.expand(1, vec![p("(odot x2 x2)")], &bad),
            Err(GraphError::BadFactorization(_))
        ));
    }

    #[test]
    fn orders_agree() {
        let g = two_level();
        assert_eq!(g.represented_formula(), g.represented_formula_input_first());
        assert_eq!(g.collapse_all().output().formula, g.represented_formula());
    }

    #[test]
    fn variable_range_checked() {
        let r = SubstitutionGraph::new(
            1,
            vec![vec![GraphNode::bare(p("x1"))], vec![GraphNode::bare(p("x2"))]],
        );
        assert!(matches!(r, Err(GraphError::VariableOutOfRange { .. })));
    }

    #[test]
    fn normality() {
        let n = Network::from_json(
            r#"{"input_dim":1,"layers":[
                {"weights":[["-1"]],"biases":["1"],"activation":["relu"]},
                {"weights":[["-1"]],"biases":["1"],"activation":["none"]}]}"#,
        )
        .unwrap();
        let g = extract_graph(&n, Flavor::Integer).unwrap();
        assert_eq!(g.is_normal(), Ok(true));
        let c = g.collapse(1).unwrap();
        assert_eq!(c.is_normal(), Err(GraphError::MissingCertificate(NodeRef::new(1, 1))));
        let bad = SubstitutionGraph::new(
            1,
            vec![vec![GraphNode {
                formula: p("(oplus x1 x1)"),
                certificate: Some(MintermCertificate {
                    m: vec![Rational::from(2)],
                    b: Rational::zero(),
                    flavor: Flavor::Integer,
                }),
            }]],
        )
        .unwrap();
        assert_eq!(bad.is_normal(), Ok(false));
    }

    #[test]
    fn json_roundtrip() {
        let text = r#"{"widths":[2,1],"nodes":[[{"formula":"(odot x1 x2)","certificate":{"m":["1","1"],"b":"-1","flavor":"integer"}}]]}"#;
        let g = SubstitutionGraph::from_json(text).unwrap();
        assert_eq!(g.is_normal(), Ok(true));
        assert_eq!(serde_json::to_string(&g).unwrap(), text);
        assert!(SubstitutionGraph::from_json(r#"{"widths":[2,2],"nodes":[[{"formula":"x1","certificate":null}]]}"#).is_err());
    }
}
