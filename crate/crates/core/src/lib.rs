//! Exact translation between ReLU networks on the unit cube and Lukasiewicz
//! logic formulas, organised as substitution graphs.

// Errors carry exact rationals and are off the hot path.
#![allow(clippy::result_large_err)]

pub mod bounds;
pub mod construct;
pub mod equiv;
pub mod extract;
pub mod formula;
pub mod graph;
pub mod network;
pub mod numerics;
pub mod rewrite;

pub use formula::{Formula, Substitution};
pub use network::{Activation, Network, NodeRef};
pub use numerics::{Interval, Rational};
