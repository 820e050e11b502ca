#![allow(dead_code)]

use std::path::PathBuf;

use luk_core::bounds::{exact_extrema, Target, Value};
use luk_core::graph::{GraphNode, SubstitutionGraph};
use luk_core::network::Layer;
use luk_core::{Activation, Formula, Interval, Network, Rational};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(name)
}

pub fn q(s: &str) -> Rational {
    s.parse().unwrap()
}

pub fn int(n: i64) -> Rational {
    Rational::from_integer(n)
}

/// `{0, 1/k, ..., 1}^n` in lexicographic order.
pub fn grid(n: usize, k: i64) -> Vec<Vec<Rational>> {
    let mut pts = vec![vec![]];
    for _ in 0..n {
        pts = pts
            .into_iter()
            .flat_map(|p: Vec<Rational>| {
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

#[derive(Debug, Clone, Copy)]
pub enum Ops {
    Mv,
    /// MV plus `delta_i`, `i <= n`
    Dmv(u32),
}

pub fn random_formula(rng: &mut impl Rng, nvars: u32, depth: u32, ops: Ops) -> Formula {
    if depth == 0 || rng.gen_ratio(1, 4) {
        return match rng.gen_range(0..6) {
            0 => Formula::zero(),
            1 => Formula::one(),
            _ => Formula::var(rng.gen_range(1..=nvars)),
        };
    }
    let sub = |rng: &mut _| random_formula(rng, nvars, depth - 1, ops);
    let pick = match ops {
        Ops::Mv => rng.gen_range(0..3),
        Ops::Dmv(_) => rng.gen_range(0..4),
    };
    match pick {
        0 => Formula::not(sub(rng)),
        1 => Formula::oplus(sub(rng), sub(rng)),
        2 => Formula::odot(sub(rng), sub(rng)),
        _ => {
            let Ops::Dmv(n) = ops else { unreachable!() };
            Formula::delta(rng.gen_range(1..=n), sub(rng))
        }
    }
}

/// Levels with the given widths (`widths[0]` is the input dimension).
pub fn random_graph(rng: &mut impl Rng, widths: &[usize], depth: u32) -> SubstitutionGraph {
    let levels = widths
        .windows(2)
        .map(|w| {
            (0..w[1])
                .map(|_| GraphNode::bare(random_formula(rng, w[0] as u32, depth, Ops::Mv)))
                .collect()
        })
        .collect();
    SubstitutionGraph::new(widths[0], levels).unwrap()
}

fn random_layer(rng: &mut impl Rng, fan_in: usize, width: usize, act: Activation, w: i64) -> Layer {
    Layer {
        weights: (0..width)
            .map(|_| (0..fan_in).map(|_| int(rng.gen_range(-w..=w))).collect())
            .collect(),
        biases: (0..width).map(|_| int(rng.gen_range(-w..=w))).collect(),
        activation: vec![act; width],
    }
}

/// Hidden relu layers with the given widths and an affine output.
pub fn random_relu_network(rng: &mut impl Rng, input_dim: usize, hidden: &[usize], w: i64) -> Network {
    let mut layers = vec![];
    let mut fan_in = input_dim;
    for &h in hidden {
        layers.push(random_layer(rng, fan_in, h, Activation::Relu, w));
        fan_in = h;
    }
    layers.push(random_layer(rng, fan_in, 1, Activation::None, w));
    Network::new(input_dim, layers).unwrap()
}

fn has_dead_outgoing(net: &Network) -> bool {
    (1..net.depth()).any(|j| {
        let next = net.layer(j + 1);
        (0..net.layer(j).width()).any(|i| next.weights.iter().all(|row| row[i].is_zero()))
    })
}

/// Weight in `[-3, 3]`, mostly small.
fn small_weight(rng: &mut impl Rng) -> Rational {
    int(match rng.gen_range(0..10) {
        0 => rng.gen_range(-3..=3),
        1..=2 => 0,
        _ => rng.gen_range(-1..=1),
    })
}

fn small_layer(rng: &mut impl Rng, fan_in: usize, width: usize, act: Activation) -> Layer {
    Layer {
        weights: (0..width)
            .map(|_| (0..fan_in).map(|_| small_weight(rng)).collect())
            .collect(),
        biases: (0..width).map(|_| int(rng.gen_range(-2..=2))).collect(),
        activation: vec![act; width],
    }
}

/// A node that is positive at some sample point and not at another.
fn live_node(rng: &mut impl Rng, below: &[Vec<Rational>], shift: i64) -> Option<(Vec<Rational>, Rational)> {
    let fan_in = below[0].len();
    for _ in 0..50 {
        let w: Vec<Rational> = (0..fan_in).map(|_| small_weight(rng)).collect();
        let b = int(rng.gen_range(-2..=2));
        let lives = |s: i64| {
            let pre = below.iter().map(|x| w.iter().zip(x).map(|(a, v)| a * v).sum::<Rational>() + &b - int(s));
            let (mut pos, mut non) = (false, false);
            for p in pre {
                if p.is_positive() { pos = true } else { non = true }
            }
            pos && non
        };
        if lives(0) && lives(shift) {
            return Some((w, b));
        }
    }
    None
}

fn relu_all(below: &[Vec<Rational>], w: &[Vec<Rational>], b: &[Rational]) -> Vec<Vec<Rational>> {
    below
        .iter()
        .map(|x| {
            w.iter()
                .zip(b)
                .map(|(row, bi)| (row.iter().zip(x).map(|(a, v)| a * v).sum::<Rational>() + bi).relu())
                .collect()
        })
        .collect()
}

/// A candidate with `depth` layers whose hidden nodes are live on a sample grid.
fn candidate(rng: &mut impl Rng, depth: usize) -> Option<Network> {
    let n = rng.gen_range(1..=3);
    let mut layers = vec![];
    let mut below = grid(n, 4);
    let pair = depth >= 2 && rng.gen_ratio(1, 3);
    for j in 1..depth {
        let (mut w, mut b) = (vec![], vec![]);
        if pair && j + 1 == depth {
            // relu(t) - relu(t - 1) stays in [0, 1]
            let (wt, bt) = live_node(rng, &below, 1)?;
            w = vec![wt.clone(), wt];
            b = vec![bt.clone(), bt - Rational::one()];
        } else {
            for _ in 0..rng.gen_range(1..=4) {
                let (wi, bi) = live_node(rng, &below, 0)?;
                if !w.iter().zip(&b).any(|(x, y)| x == &wi && y == &bi) {
                    w.push(wi);
                    b.push(bi);
                }
            }
        }
        below = relu_all(&below, &w, &b);
        let width = b.len();
        layers.push(Layer { weights: w, biases: b, activation: vec![Activation::Relu; width] });
    }
    let fan_in = below[0].len();
    let out = if pair {
        Layer {
            weights: vec![vec![int(1), int(-1)]],
            biases: vec![int(0)],
            activation: vec![Activation::None],
        }
    } else {
        small_layer(rng, fan_in, 1, Activation::None)
    };
    layers.push(out);
    Some(Network::new(n, layers).unwrap())
}

/// Non-degenerate integer relu networks with range inside `[0, 1]`:
/// `n <= 3`, depth `<= 4`, width `<= 4`, `|w| <= 3`. Depths 1 to 4 take
/// turns so deep networks are not crowded out.
pub fn corpus(count: usize, seed: u64) -> Vec<Network> {
    let mut rng = rng(seed);
    let mut out = vec![];
    for idx in 0..count {
        let depth = 1 + idx % 4;
        let mut tries = 0;
        let net = loop {
            tries += 1;
            assert!(tries < 100_000, "no depth-{depth} network found");
            let Some(net) = candidate(&mut rng, depth) else { continue };
            if has_dead_outgoing(&net) {
                continue;
            }
            // cheap rejection: sampled values already spread too far
            let vals: Vec<Rational> = grid(net.input_dim(), 4).iter().map(|x| net.eval(x).unwrap()).collect();
            let lo = vals.iter().min().unwrap();
            let hi = vals.iter().max().unwrap();
            if hi - lo > Rational::one() {
                continue;
            }
            // shift the output by an integer so the range lands in [0, 1], if it can
            let r = exact_extrema(&net, Target::Output, Value::Post);
            let shift = (-r.lo.clone()).ceil();
            if &r.hi + &shift > Rational::one() {
                continue;
            }
            let mut layers = net.clone().into_layers();
            let last = layers.last_mut().unwrap();
            last.biases[0] = &last.biases[0] + &shift;
            let net = Network::new(net.input_dim(), layers).unwrap();
            if net.is_non_degenerate() {
                break net;
            }
        };
        out.push(net);
    }
    out
}

/// Solve a square system exactly; `None` if singular.
fn solve(mut a: Vec<Vec<Rational>>, mut b: Vec<Rational>) -> Option<Vec<Rational>> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).find(|&r| !a[r][col].is_zero())?;
        a.swap(col, piv);
        b.swap(col, piv);
        for r in 0..n {
            if r != col && !a[r][col].is_zero() {
                let f = &a[r][col] / &a[col][col];
                let pivot_row = a[col].clone();
                for (x, p) in a[r].iter_mut().zip(&pivot_row).skip(col) {
                    *x = &*x - &(&f * p);
                }
                let d = &f * &b[col];
                b[r] = &b[r] - &d;
            }
        }
    }
    Some((0..n).map(|i| &b[i] / &a[i][i]).collect())
}

/// Affine function as (coefficients, constant).
type Aff = (Vec<Rational>, Rational);

fn aff_eval(f: &Aff, x: &[Rational]) -> Rational {
    f.0.iter().zip(x).map(|(c, v)| c * v).sum::<Rational>() + &f.1
}

/// Range of the output of a relu network by enumerating every activation
/// pattern and every vertex of its region.
pub fn brute_force_output_range(net: &Network) -> Interval {
    let d = net.input_dim();
    let hidden: Vec<(usize, usize)> = (1..net.depth())
        .flat_map(|j| (0..net.layer(j).width()).map(move |i| (j, i)))
        .collect();
    let mut best: Option<Interval> = None;
    for pattern in 0u32..(1 << hidden.len()) {
        // pre-activation of every hidden node under this pattern, and the output
        let mut prev: Vec<Aff> = (0..d)
            .map(|c| {
                let mut e = vec![Rational::zero(); d];
                e[c] = Rational::one();
                (e, Rational::zero())
            })
            .collect();
        let mut signs: Vec<(Aff, bool)> = vec![];
        let mut h = 0;
        let mut output = None;
        for j in 1..=net.depth() {
            let layer = net.layer(j);
            let mut cur = vec![];
            for i in 0..layer.width() {
                let mut pre: Aff = (vec![Rational::zero(); d], layer.biases[i].clone());
                for (k, w) in layer.weights[i].iter().enumerate() {
                    for c in 0..d {
                        pre.0[c] = &pre.0[c] + &(w * &prev[k].0[c]);
                    }
                    pre.1 = &pre.1 + &(w * &prev[k].1);
                }
                if j == net.depth() {
                    output = Some(pre);
                    continue;
                }
                let on = pattern >> h & 1 == 1;
                h += 1;
                signs.push((pre.clone(), on));
                cur.push(if on { pre } else { (vec![Rational::zero(); d], Rational::zero()) });
            }
            prev = cur;
        }
        let output = output.unwrap();
        // hyperplanes a.x = c bounding the region
        let mut planes: Vec<Aff> = vec![];
        for c in 0..d {
            let mut e = vec![Rational::zero(); d];
            e[c] = Rational::one();
            planes.push((e.clone(), Rational::zero()));
            planes.push((e, Rational::one()));
        }
        for (s, _) in &signs {
            planes.push((s.0.clone(), -s.1.clone()));
        }
        let feasible = |x: &[Rational]| {
            x.iter().all(|v| v.in_unit_interval())
                && signs.iter().all(|(s, on)| {
                    let v = aff_eval(s, x);
                    if *on {
                        !v.is_negative()
                    } else {
                        !v.is_positive()
                    }
                })
        };
        for combo in combinations(planes.len(), d) {
            let a = combo.iter().map(|&p| planes[p].0.clone()).collect();
            let b = combo.iter().map(|&p| planes[p].1.clone()).collect();
            let Some(x) = solve(a, b) else { continue };
            if feasible(&x) {
                let v = aff_eval(&output, &x);
                let p = Interval::point(v);
                best = Some(match best {
                    None => p,
                    Some(b) => b.hull(&p),
                });
            }
        }
    }
    best.expect("some vertex is feasible")
}

fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    if k == 0 {
        return vec![vec![]];
    }
    if n < k {
        return vec![];
    }
    let mut out = combinations(n - 1, k);
    for mut c in combinations(n - 1, k - 1) {
        c.push(n - 1);
        out.push(c);
    }
    out
}
