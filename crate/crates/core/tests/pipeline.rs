mod common;

use common::*;
use luk_core::construct::{construct, graph_to_sigma, sigma_to_rho};
use luk_core::bounds::Budget;
use luk_core::equiv::{grid_equal, sample_equal, FormulaFn};
use luk_core::extract::{extract_graph, rho_to_sigma, Flavor};
use luk_core::formula::Substitution;
use luk_core::rewrite::{rewrite_graph, catalog, Catalog, Direction, Step};
use luk_core::{Formula, Network, NodeRef};

fn small_corpus() -> Vec<Network> {
    corpus(24, 11)
}

#[test]
fn rho_to_sigma_preserves_function() {
    for net in small_corpus() {
        let s = rho_to_sigma(&net).unwrap();
        for x in grid(net.input_dim(), 12) {
            assert_eq!(s.eval(&x).unwrap(), net.eval(&x).unwrap());
        }
    }
}

#[test]
fn graph_to_sigma_realizes_the_graph() {
    for net in small_corpus() {
        let g = extract_graph(&net, Flavor::Integer).unwrap();
        let m = graph_to_sigma(&g).unwrap();
        assert!(grid_equal(&m, &g, 12).unwrap().is_equal());
        let r = sigma_to_rho(&m).unwrap();
        assert!(grid_equal(&r, &net, 12).unwrap().is_equal());
    }
}

#[test]
fn layerwise_and_represented_agree() {
    for net in small_corpus() {
        let g = extract_graph(&net, Flavor::Integer).unwrap();
        let f = FormulaFn::with_arity(g.represented_formula(), net.input_dim());
        assert!(grid_equal(&f, &g, 12).unwrap().is_equal());
        assert!(sample_equal(&f, &net, 50, 1).unwrap().is_equal());
    }
}

#[test]
fn rewrite_back_and_forth_keeps_construction() {
    let net = Network::from_json(&std::fs::read_to_string(fixture("dag.json")).unwrap()).unwrap();
    let g = extract_graph(&net, Flavor::Integer).unwrap();
    // commute the top connective of a hidden node, then commute it back
    let node = NodeRef::new(1, 1);
    let f = &g.node(node).unwrap().formula;
    let id = match f.node() {
        luk_core::formula::Node::Oplus(..) => "Ax1",
        luk_core::formula::Node::Odot(..) => "Ax1p",
        other => panic!("unexpected top connective {other:?}"),
    };
    let there = Step {
        node: Some([1, 1]),
        ..Step::new(id, Direction::LeftToRight, &[])
    };
    let axioms = catalog(&Catalog::Mv);
    let moved = rewrite_graph(&axioms, &g, std::slice::from_ref(&there)).unwrap();
    assert!(!moved.is_normal().unwrap());
    assert!(construct(&moved, Budget::unlimited()).is_err());
    assert!(grid_equal(&moved, &net, 12).unwrap().is_equal());
    let back = rewrite_graph(&axioms, &moved, &[there]).unwrap();
    assert_eq!(back, g);
    assert_eq!(construct(&back, Budget::unlimited()).unwrap(), net);
}

#[test]
fn bound_target_metavariables_in_traces() {
    let g = luk_core::graph::SubstitutionGraph::from_formula(2, Formula::parse("1").unwrap()).unwrap();
    let step = Step::new("Ax3", Direction::RightToLeft, &[]).with_bind("x", Formula::parse("(odot x1 x2)").unwrap());
    let out = rewrite_graph(&catalog(&Catalog::Mv), &g, &[step]).unwrap();
    assert_eq!(out.output().formula.to_string(), "(oplus (odot x1 x2) (not (odot x1 x2)))");
    assert!(grid_equal(&out, &g, 12).unwrap().is_equal());
    assert_eq!(
        out.output().formula.substitute(&Substitution::identity(2)),
        out.output().formula
    );
}
