//! Exact rationals, closed intervals and a small exact LP solver.
//!
//! Everything here is exact. There is no floating point anywhere in the crate.

use std::fmt;
use std::iter::Sum;
use std::ops::{Add, AddAssign, Div, Mul, MulAssign, Neg, Sub, SubAssign};
use std::str::FromStr;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

/// Arbitrary precision rational number in lowest terms.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Rational(BigRational);

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("invalid rational literal {0:?}")]
pub struct ParseRationalError(pub String);

impl Rational {
    pub fn new(numer: i64, denom: i64) -> Self {
        assert!(denom != 0, "zero denominator");
        Rational(BigRational::new(numer.into(), denom.into()))
    }

    pub fn from_integer(n: i64) -> Self {
        Rational(BigRational::from_integer(n.into()))
    }

    pub fn from_bigint(n: BigInt) -> Self {
        Rational(BigRational::from_integer(n))
    }

    pub fn from_ratio(numer: BigInt, denom: BigInt) -> Self {
        assert!(!denom.is_zero(), "zero denominator");
        Rational(BigRational::new(numer, denom))
    }

    pub fn zero() -> Self {
        Rational(BigRational::zero())
    }

    pub fn one() -> Self {
        Rational(BigRational::one())
    }

    pub fn numer(&self) -> &BigInt {
        self.0.numer()
    }

    pub fn denom(&self) -> &BigInt {
        self.0.denom()
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_zero()
    }

    pub fn is_one(&self) -> bool {
        self.0.is_one()
    }

    pub fn is_integer(&self) -> bool {
        self.0.is_integer()
    }

    pub fn is_negative(&self) -> bool {
        self.0.is_negative()
    }

    pub fn is_positive(&self) -> bool {
        self.0.is_positive()
    }

    pub fn abs(&self) -> Self {
        Rational(self.0.abs())
    }

    pub fn floor(&self) -> Self {
        Rational(self.0.floor())
    }

    pub fn ceil(&self) -> Self {
        Rational(self.0.ceil())
    }

    /// `self - floor(self)`, always in `[0, 1)`.
    pub fn fract(&self) -> Self {
        self - &self.floor()
    }

    pub fn min(self, other: Self) -> Self {
        std::cmp::min(self, other)
    }

    pub fn max(self, other: Self) -> Self {
        std::cmp::max(self, other)
    }

    /// Clamp into `[0, 1]`.
    pub fn clip(&self) -> Self {
        if self.is_negative() {
            Rational::zero()
        } else if *self > Rational::one() {
            Rational::one()
        } else {
            self.clone()
        }
    }

    /// `max(0, self)`.
    pub fn relu(&self) -> Self {
        if self.is_negative() {
            Rational::zero()
        } else {
            self.clone()
        }
    }

    pub fn in_unit_interval(&self) -> bool {
        !self.is_negative() && *self <= Rational::one()
    }

    /// Integer value if this is an integer that fits in `i64`.
    pub fn to_i64(&self) -> Option<i64> {
        if self.is_integer() {
            self.numer().to_i64()
        } else {
            None
        }
    }

    pub fn as_big(&self) -> &BigRational {
        &self.0
    }
}

/// Least common multiple of the denominators.
pub fn lcm_denominators<'a>(values: impl IntoIterator<Item = &'a Rational>) -> BigInt {
    values
        .into_iter()
        .fold(BigInt::one(), |acc, r| acc.lcm(r.denom()))
}

impl From<i64> for Rational {
    fn from(n: i64) -> Self {
        Rational::from_integer(n)
    }
}

impl From<BigInt> for Rational {
    fn from(n: BigInt) -> Self {
        Rational::from_bigint(n)
    }
}

impl fmt::Display for Rational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_integer() {
            write!(f, "{}", self.0.numer())
        } else {
            write!(f, "{}/{}", self.0.numer(), self.0.denom())
        }
    }
}

impl fmt::Debug for Rational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

fn parse_int(s: &str, allow_sign: bool) -> Option<BigInt> {
    let digits = if allow_sign {
        s.strip_prefix('-').unwrap_or(s)
    } else {
        s
    };
    if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    s.parse().ok()
}

impl FromStr for Rational {
    type Err = ParseRationalError;

    /// Accepts `p` or `p/q` with the sign on `p` only and `q > 0`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = || ParseRationalError(s.to_string());
        match s.split_once('/') {
            None => parse_int(s, true).map(Rational::from_bigint).ok_or_else(err),
            Some((p, q)) => {
                let p = parse_int(p, true).ok_or_else(err)?;
                let q = parse_int(q, false).ok_or_else(err)?;
                if q.is_zero() {
                    return Err(err());
                }
                Ok(Rational::from_ratio(p, q))
            }
        }
    }
}

impl Serialize for Rational {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Rational {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

macro_rules! binop {
    ($trait:ident, $method:ident) => {
        impl $trait<Rational> for Rational {
            type Output = Rational;
            fn $method(self, rhs: Rational) -> Rational {
                Rational(self.0.$method(rhs.0))
            }
        }
        impl<'a> $trait<&'a Rational> for Rational {
            type Output = Rational;
            fn $method(self, rhs: &'a Rational) -> Rational {
                Rational(self.0.$method(&rhs.0))
            }
        }
        impl<'a> $trait<Rational> for &'a Rational {
            type Output = Rational;
            fn $method(self, rhs: Rational) -> Rational {
                Rational((&self.0).$method(rhs.0))
            }
        }
        impl<'a, 'b> $trait<&'b Rational> for &'a Rational {
            type Output = Rational;
            fn $method(self, rhs: &'b Rational) -> Rational {
                Rational((&self.0).$method(&rhs.0))
            }
        }
    };
}

binop!(Add, add);
binop!(Sub, sub);
binop!(Mul, mul);
binop!(Div, div);

impl AddAssign<&Rational> for Rational {
    fn add_assign(&mut self, rhs: &Rational) {
        self.0 += &rhs.0;
    }
}

impl AddAssign<Rational> for Rational {
    fn add_assign(&mut self, rhs: Rational) {
        self.0 += rhs.0;
    }
}

impl SubAssign<&Rational> for Rational {
    fn sub_assign(&mut self, rhs: &Rational) {
        self.0 -= &rhs.0;
    }
}

impl MulAssign<&Rational> for Rational {
    fn mul_assign(&mut self, rhs: &Rational) {
        self.0 *= &rhs.0;
    }
}

impl Neg for Rational {
    type Output = Rational;
    fn neg(self) -> Rational {
        Rational(-self.0)
    }
}

impl Neg for &Rational {
    type Output = Rational;
    fn neg(self) -> Rational {
        Rational(-&self.0)
    }
}

impl Sum for Rational {
    fn sum<I: Iterator<Item = Rational>>(iter: I) -> Rational {
        iter.fold(Rational::zero(), |a, b| a + b)
    }
}

impl<'a> Sum<&'a Rational> for Rational {
    fn sum<I: Iterator<Item = &'a Rational>>(iter: I) -> Rational {
        iter.fold(Rational::zero(), |a, b| a + b)
    }
}

/// Closed interval `[lo, hi]` with `lo <= hi`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Interval {
    pub lo: Rational,
    pub hi: Rational,
}

impl Interval {
    pub fn new(lo: Rational, hi: Rational) -> Self {
        assert!(lo <= hi, "interval with lo > hi: [{lo}, {hi}]");
        Interval { lo, hi }
    }

    pub fn point(v: Rational) -> Self {
        Interval {
            lo: v.clone(),
            hi: v,
        }
    }

    pub fn contains(&self, v: &Rational) -> bool {
        self.lo <= *v && *v <= self.hi
    }

    pub fn contains_interval(&self, other: &Interval) -> bool {
        self.lo <= other.lo && other.hi <= self.hi
    }

    pub fn hull(&self, other: &Interval) -> Interval {
        Interval {
            lo: self.lo.clone().min(other.lo.clone()),
            hi: self.hi.clone().max(other.hi.clone()),
        }
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {}]", self.lo, self.hi)
    }
}

/// Affine functional `coeffs . x + constant`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Affine {
    pub coeffs: Vec<Rational>,
    pub constant: Rational,
}

impl Affine {
    pub fn new(coeffs: Vec<Rational>, constant: Rational) -> Self {
        Affine { coeffs, constant }
    }

    pub fn constant(dim: usize, c: Rational) -> Self {
        Affine {
            coeffs: vec![Rational::zero(); dim],
            constant: c,
        }
    }

    /// The coordinate function `x_i` (0-based).
    pub fn coordinate(dim: usize, i: usize) -> Self {
        let mut coeffs = vec![Rational::zero(); dim];
        coeffs[i] = Rational::one();
        Affine {
            coeffs,
            constant: Rational::zero(),
        }
    }

    pub fn dim(&self) -> usize {
        self.coeffs.len()
    }

    pub fn eval(&self, x: &[Rational]) -> Rational {
        self.coeffs
            .iter()
            .zip(x)
            .map(|(c, v)| c * v)
            .sum::<Rational>()
            + &self.constant
    }

    pub fn scale(&self, k: &Rational) -> Affine {
        Affine {
            coeffs: self.coeffs.iter().map(|c| c * k).collect(),
            constant: &self.constant * k,
        }
    }

    pub fn add_scaled(&mut self, other: &Affine, k: &Rational) {
        for (c, o) in self.coeffs.iter_mut().zip(&other.coeffs) {
            *c += o * k;
        }
        self.constant += &other.constant * k;
    }

    pub fn neg(&self) -> Affine {
        self.scale(&-Rational::one())
    }

    pub fn is_constant(&self) -> bool {
        self.coeffs.iter().all(Rational::is_zero)
    }
}

/// Optimization direction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Min,
    Max,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LpError {
    #[error("feasible region is empty")]
    Infeasible,
    #[error("constraint dimension {found} does not match objective dimension {expected}")]
    DimensionMismatch { expected: usize, found: usize },
}

/// Optimum of `objective` over the unit cube intersected with `{x : c(x) <= 0}`
/// for every `c` in `constraints`.
///
/// Dense two-phase simplex with Bland's rule.
pub fn lp_extremum(
    objective: &Affine,
    constraints: &[Affine],
    sense: Sense,
) -> Result<Rational, LpError> {
    let d = objective.dim();
    if let Some(c) = constraints.iter().find(|c| c.dim() != d) {
        return Err(LpError::DimensionMismatch {
            expected: d,
            found: c.dim(),
        });
    }
    // Rows: a.x <= rhs. User constraints first, then the cube bounds x_i <= 1.
    let mut rows: Vec<(Vec<Rational>, Rational)> = constraints
        .iter()
        .filter(|c| !c.is_constant())
        .map(|c| (c.coeffs.clone(), -&c.constant))
        .collect();
    if constraints
        .iter()
        .any(|c| c.is_constant() && c.constant.is_positive())
    {
        return Err(LpError::Infeasible);
    }
    for i in 0..d {
        rows.push((Affine::coordinate(d, i).coeffs, Rational::one()));
    }
    let mut c = objective.coeffs.clone();
    if sense == Sense::Min {
        c.iter_mut().for_each(|v| *v = -&*v);
    }
    let best = Simplex::solve(&rows, &c)?;
    Ok(match sense {
        Sense::Max => best + &objective.constant,
        Sense::Min => -best + &objective.constant,
    })
}

struct Simplex {
    rows: Vec<Vec<Rational>>,
    basis: Vec<usize>,
    ncols: usize,
}

impl Simplex {
    /// Maximize `c.x` subject to `rows` and `x >= 0`; returns the optimum.
    fn solve(rows: &[(Vec<Rational>, Rational)], c: &[Rational]) -> Result<Rational, LpError> {
        let d = c.len();
        let m = rows.len();
        let n_art = rows.iter().filter(|(_, b)| b.is_negative()).count();
        let ncols = d + m + n_art;
        let mut tab = Simplex {
            rows: Vec::with_capacity(m),
            basis: Vec::with_capacity(m),
            ncols,
        };
        let mut next_art = d + m;
        for (i, (a, b)) in rows.iter().enumerate() {
            let mut row = vec![Rational::zero(); ncols + 1];
            let flip = b.is_negative();
            let sign = if flip { -Rational::one() } else { Rational::one() };
            for (j, v) in a.iter().enumerate() {
                row[j] = v * &sign;
            }
            row[d + i] = sign.clone();
            row[ncols] = b * &sign;
            if flip {
                row[next_art] = Rational::one();
                tab.basis.push(next_art);
                next_art += 1;
            } else {
                tab.basis.push(d + i);
            }
            tab.rows.push(row);
        }

        if n_art > 0 {
            let mut cost = vec![Rational::zero(); ncols];
            for v in cost.iter_mut().skip(d + m) {
                *v = -Rational::one();
            }
            let mut obj = tab.objective_row(&cost);
            tab.optimize(&mut obj, |_| true);
            if !obj[ncols].is_zero() {
                return Err(LpError::Infeasible);
            }
            tab.drive_out_artificials(d + m);
        }

        let mut cost = vec![Rational::zero(); ncols];
        cost[..d].clone_from_slice(c);
        let mut obj = tab.objective_row(&cost);
        let limit = d + m;
        tab.optimize(&mut obj, |j| j < limit);
        Ok(obj[ncols].clone())
    }

    /// Reduced-cost row for maximizing `cost . x` under the current basis.
    fn objective_row(&self, cost: &[Rational]) -> Vec<Rational> {
        let mut obj: Vec<Rational> = cost.iter().map(|v| -v).collect();
        obj.push(Rational::zero());
        for (r, &b) in self.basis.iter().enumerate() {
            if !obj[b].is_zero() {
                let k = obj[b].clone();
                for (o, v) in obj.iter_mut().zip(&self.rows[r]) {
                    *o -= &(&k * v);
                }
            }
        }
        obj
    }

    fn pivot(&mut self, obj: &mut [Rational], r: usize, c: usize) {
        let p = self.rows[r][c].clone();
        for v in self.rows[r].iter_mut() {
            *v = &*v / &p;
        }
        let pivot_row = self.rows[r].clone();
        for (i, row) in self.rows.iter_mut().enumerate() {
            if i == r || row[c].is_zero() {
                continue;
            }
            let k = row[c].clone();
            for (v, pv) in row.iter_mut().zip(&pivot_row) {
                *v -= &(&k * pv);
            }
        }
        if !obj[c].is_zero() {
            let k = obj[c].clone();
            for (v, pv) in obj.iter_mut().zip(&pivot_row) {
                *v -= &(&k * pv);
            }
        }
        self.basis[r] = c;
    }

    /// Bland's rule: lowest-index improving column, lowest-index leaving variable on ties.
    fn optimize(&mut self, obj: &mut [Rational], allowed: impl Fn(usize) -> bool) {
        let n = self.ncols;
        loop {
            let Some(enter) = (0..n).find(|&j| allowed(j) && obj[j].is_negative()) else {
                return;
            };
            let mut leave: Option<(usize, Rational)> = None;
            for (i, row) in self.rows.iter().enumerate() {
                if !row[enter].is_positive() {
                    continue;
                }
                let ratio = &row[n] / &row[enter];
                let better = match &leave {
                    None => true,
                    Some((li, lr)) => {
                        ratio < *lr || (ratio == *lr && self.basis[i] < self.basis[*li])
                    }
                };
                if better {
                    leave = Some((i, ratio));
                }
            }
            // The feasible region lies in the unit cube, so the problem is bounded.
            let (r, _) = leave.expect("bounded LP has a leaving row");
            self.pivot(obj, r, enter);
        }
    }

    fn drive_out_artificials(&mut self, first_art: usize) {
        let mut dummy = vec![Rational::zero(); self.ncols + 1];
        let mut r = 0;
        while r < self.rows.len() {
            if self.basis[r] >= first_art {
                match (0..first_art).find(|&j| !self.rows[r][j].is_zero()) {
                    Some(c) => {
                        self.pivot(&mut dummy, r, c);
                        r += 1;
                    }
                    None => {
                        self.rows.remove(r);
                        self.basis.remove(r);
                    }
                }
            } else {
                r += 1;
            }
        }
    }
}
