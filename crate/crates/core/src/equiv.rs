//! Functional equivalence: exhaustive grids and seeded random sampling.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::formula::Formula;
use crate::graph::SubstitutionGraph;
use crate::network::Network;
use crate::numerics::Rational;

/// Largest denominator drawn by [`sample_equal`].
pub const SAMPLE_DENOMINATOR: i64 = 10_000;

/// Anything with a truth function on `[0,1]^n`.
pub trait TruthFunction {
    fn arity(&self) -> usize;
    fn value_at(&self, x: &[Rational]) -> Result<Rational, String>;
}

impl TruthFunction for Network {
    fn arity(&self) -> usize {
        self.input_dim()
    }
    fn value_at(&self, x: &[Rational]) -> Result<Rational, String> {
        self.eval(x).map_err(|e| e.to_string())
    }
}

impl TruthFunction for SubstitutionGraph {
    fn arity(&self) -> usize {
        self.input_dim()
    }
    fn value_at(&self, x: &[Rational]) -> Result<Rational, String> {
        self.eval_layerwise(x).map_err(|e| e.to_string())
    }
}

/// A formula read as a function of `x1..xn`.
#[derive(Debug, Clone)]
pub struct FormulaFn {
    pub formula: Formula,
    pub arity: usize,
}

impl FormulaFn {
    /// Arity is the largest variable index, at least 1.
    pub fn new(formula: Formula) -> Self {
        let arity = (formula.max_var() as usize).max(1);
        FormulaFn { formula, arity }
    }

    pub fn with_arity(formula: Formula, arity: usize) -> Self {
        FormulaFn { formula, arity }
    }
}

impl TruthFunction for FormulaFn {
    fn arity(&self) -> usize {
        self.arity
    }
    fn value_at(&self, x: &[Rational]) -> Result<Rational, String> {
        self.formula.eval(x).map_err(|e| e.to_string())
    }
}

/// The points `{0, 1/k, ..., 1}^n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FiniteGrid {
    pub k: u32,
    pub n: usize,
}

impl FiniteGrid {
    pub fn new(k: u32, n: usize) -> Self {
        assert!(k >= 1, "grid resolution must be positive");
        FiniteGrid { k, n }
    }

    pub fn len(&self) -> u128 {
        (self.k as u128 + 1).pow(self.n as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Lexicographic order, first coordinate most significant.
    pub fn points(&self) -> impl Iterator<Item = Vec<Rational>> + '_ {
        let k = self.k as i64;
        let mut idx = Some(vec![0i64; self.n]);
        std::iter::from_fn(move || {
            let cur = idx.take()?;
            let point = cur.iter().map(|&i| Rational::new(i, k)).collect();
            let mut next = cur;
            for pos in (0..next.len()).rev() {
                if next[pos] < k {
                    next[pos] += 1;
                    idx = Some(next);
                    break;
                }
                next[pos] = 0;
            }
            Some(point)
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Verdict {
    /// every checked point agrees; a proof only for grids
    Equal,
    Counterexample {
        point: Vec<Rational>,
        lhs: Rational,
        rhs: Rational,
    },
}

impl Verdict {
    pub fn is_equal(&self) -> bool {
        matches!(self, Verdict::Equal)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EquivError {
    #[error("arity mismatch: {0} vs {1}")]
    ArityMismatch(usize, usize),
    #[error("evaluation failed at {point:?}: {message}")]
    Eval { point: Vec<Rational>, message: String },
}

fn compare_at(
    f: &dyn TruthFunction,
    g: &dyn TruthFunction,
    x: Vec<Rational>,
) -> Result<Option<Verdict>, EquivError> {
    let ev = |h: &dyn TruthFunction, x: &Vec<Rational>| {
        h.value_at(x).map_err(|message| EquivError::Eval {
            point: x.clone(),
            message,
        })
    };
    let lhs = ev(f, &x)?;
    let rhs = ev(g, &x)?;
    Ok((lhs != rhs).then_some(Verdict::Counterexample { point: x, lhs, rhs }))
}

fn check_arity(f: &dyn TruthFunction, g: &dyn TruthFunction) -> Result<usize, EquivError> {
    if f.arity() != g.arity() {
        return Err(EquivError::ArityMismatch(f.arity(), g.arity()));
    }
    Ok(f.arity())
}

/// Exact comparison on `I_k^n`; the lexicographically first disagreement.
pub fn grid_equal(
    f: &dyn TruthFunction,
    g: &dyn TruthFunction,
    k: u32,
) -> Result<Verdict, EquivError> {
    let n = check_arity(f, g)?;
    for x in FiniteGrid::new(k, n).points() {
        if let Some(c) = compare_at(f, g, x)? {
            return Ok(c);
        }
    }
    Ok(Verdict::Equal)
}

/// A point with coordinates `p/q`, `1 <= q <= 10^4`.
pub fn random_point(rng: &mut impl Rng, n: usize) -> Vec<Rational> {
    (0..n)
        .map(|_| {
            let q = rng.gen_range(1..=SAMPLE_DENOMINATOR);
            Rational::new(rng.gen_range(0..=q), q)
        })
        .collect()
}

/// Comparison at `trials` seeded random rational points.
pub fn sample_equal(
    f: &dyn TruthFunction,
    g: &dyn TruthFunction,
    trials: u64,
    seed: u64,
) -> Result<Verdict, EquivError> {
    let n = check_arity(f, g)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..trials {
        if let Some(c) = compare_at(f, g, random_point(&mut rng, n))? {
            return Ok(c);
        }
    }
    Ok(Verdict::Equal)
}
