//! Classical baseline: randomized depth-first evaluation that visits the
//! children of every node in a fresh uniformly random order and stops at the
//! first child evaluating to 0.

use std::fmt;

use num_rational::Ratio;
use num_traits::{CheckedAdd, CheckedMul, ToPrimitive};
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Serialize, Serializer};

use crate::caps::{check_cap, Caps};
use crate::error::{CertifyError, Result};
use crate::exec::Exec;
use crate::formula::{eval_block, evaluate, FormulaShape, InputAssignment};
use crate::stats::{trial_rng, MeanEstimate};

/// Denominators above this bound switch the expectation DP to `f64`.
pub const DEFAULT_MAX_DENOMINATOR: i128 = 1_000_000_000_000_000;

/// `(d - 1 + sqrt(d^2 + 14 d + 1)) / 4`, the growth rate of the worst-case
/// expected cost per level.
pub fn lambda(d: usize) -> Result<f64> {
    if d < 2 {
        return Err(CertifyError::InvalidShape(format!(
            "branching factor must be at least 2, got {d}"
        )));
    }
    let d = d as f64;
    Ok((d - 1.0 + (d * d + 14.0 * d + 1.0).sqrt()) / 4.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct EvalTrace {
    pub value: bool,
    pub queries: usize,
}

pub fn randomized_evaluate(shape: &FormulaShape, x: &InputAssignment, seed: u64) -> Result<EvalTrace> {
    randomized_evaluate_with(shape, x, &mut trial_rng(seed, 0))
}

pub fn randomized_evaluate_with<R: Rng + ?Sized>(
    shape: &FormulaShape,
    x: &InputAssignment,
    rng: &mut R,
) -> Result<EvalTrace> {
    x.check_shape(shape)?;
    let mut queries = 0;
    let mut order: Vec<Vec<usize>> = vec![(0..shape.d()).collect(); shape.k() as usize];
    let value = eval_random(x.bits(), shape.d(), 0, rng, &mut order, &mut queries);
    Ok(EvalTrace { value, queries })
}

fn eval_random<R: Rng + ?Sized>(
    bits: &[bool],
    d: usize,
    depth: usize,
    rng: &mut R,
    scratch: &mut [Vec<usize>],
    queries: &mut usize,
) -> bool {
    if bits.len() == 1 {
        *queries += 1;
        return bits[0];
    }
    let m = bits.len() / d;
    scratch[depth].shuffle(rng);
    for slot in 0..d {
        let child = scratch[depth][slot];
        if !eval_random(&bits[child * m..(child + 1) * m], d, depth + 1, rng, scratch, queries) {
            return true;
        }
    }
    false
}

/// An expected query count, exact while the rational fits the configured
/// denominator bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Expectation {
    Exact(Ratio<i128>),
    Approx(f64),
}

impl Expectation {
    pub fn integer(v: i128) -> Self {
        Expectation::Exact(Ratio::from_integer(v))
    }

    pub fn to_f64(&self) -> f64 {
        match self {
            Expectation::Exact(r) => r.to_f64().unwrap_or(f64::NAN),
            Expectation::Approx(v) => *v,
        }
    }

    pub fn is_exact(&self) -> bool {
        matches!(self, Expectation::Exact(_))
    }

    fn add(self, other: Self, bound: i128) -> Self {
        match (self, other) {
            (Expectation::Exact(a), Expectation::Exact(b)) => exact_or_approx(a.checked_add(&b), a, b, bound, |x, y| x + y),
            (a, b) => Expectation::Approx(a.to_f64() + b.to_f64()),
        }
    }

    fn scale(self, num: i128, den: i128, bound: i128) -> Self {
        let factor = Ratio::new(num, den);
        match self {
            Expectation::Exact(a) => exact_or_approx(a.checked_mul(&factor), a, factor, bound, |x, y| x * y),
            Expectation::Approx(v) => Expectation::Approx(v * num as f64 / den as f64),
        }
    }

    fn greater_than(&self, other: &Self) -> bool {
        match (self, other) {
            (Expectation::Exact(a), Expectation::Exact(b)) => a > b,
            (a, b) => a.to_f64() > b.to_f64(),
        }
    }

    fn max(self, other: Self) -> Self {
        if other.greater_than(&self) {
            other
        } else {
            self
        }
    }
}

fn exact_or_approx(
    exact: Option<Ratio<i128>>,
    a: Ratio<i128>,
    b: Ratio<i128>,
    bound: i128,
    float_op: impl Fn(f64, f64) -> f64,
) -> Expectation {
    match exact {
        Some(r) if *r.denom() <= bound => Expectation::Exact(r),
        _ => Expectation::Approx(float_op(
            a.to_f64().unwrap_or(f64::NAN),
            b.to_f64().unwrap_or(f64::NAN),
        )),
    }
}

impl fmt::Display for Expectation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expectation::Exact(r) => write!(f, "{r}"),
            Expectation::Approx(v) => write!(f, "~{v}"),
        }
    }
}

impl Serialize for Expectation {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_f64(self.to_f64())
    }
}

/// Expected cost of a node from its children's `(value, expected cost)`.
///
/// With `z >= 1` zero-children in a uniformly random order, a given 1-child is
/// evaluated iff it precedes all zero-children (probability `1/(z+1)`) and a
/// given 0-child iff it is the first of them (probability `1/z`). With no
/// zero-child every child is evaluated.
fn combine_children(children: &[(bool, Expectation)], bound: i128) -> (bool, Expectation) {
    let zeros = children.iter().filter(|(v, _)| !v).count() as i128;
    let mut total = Expectation::integer(0);
    if zeros == 0 {
        for (_, c) in children {
            total = total.add(*c, bound);
        }
        return (false, total);
    }
    for (v, c) in children {
        let term = if *v { c.scale(1, zeros + 1, bound) } else { c.scale(1, zeros, bound) };
        total = total.add(term, bound);
    }
    (true, total)
}

fn expected_block(bits: &[bool], d: usize, bound: i128) -> (bool, Expectation) {
    if bits.len() == 1 {
        return (bits[0], Expectation::integer(1));
    }
    let m = bits.len() / d;
    let children: Vec<_> = bits.chunks(m).map(|c| expected_block(c, d, bound)).collect();
    combine_children(&children, bound)
}

/// Exact expectation of [`EvalTrace::queries`] under [`randomized_evaluate`].
pub fn exact_expected_queries(shape: &FormulaShape, x: &InputAssignment, caps: &Caps) -> Result<Expectation> {
    exact_expected_queries_bounded(shape, x, caps, DEFAULT_MAX_DENOMINATOR)
}

pub fn exact_expected_queries_bounded(
    shape: &FormulaShape,
    x: &InputAssignment,
    caps: &Caps,
    max_denominator: i128,
) -> Result<Expectation> {
    x.check_shape(shape)?;
    check_cap("expectation leaf count", shape.n(), caps.expectation_leaves)?;
    Ok(expected_block(x.bits(), shape.d(), max_denominator).1)
}

/// Per-value maxima of the expected cost over all inputs of a subtree shape.
#[derive(Debug, Clone, Copy)]
struct WorstPair {
    /// Largest expectation over inputs evaluating to 0 (index 0) / 1 (index 1).
    cost: [Expectation; 2],
    /// Number of 0-children in the maximizing configuration for value 1.
    zeros_for_one: usize,
}

/// Children of a node are independent subtrees, so the maximum expected cost
/// for a given node value is attained by giving every child its own
/// per-value maximum and picking the best count of 0-children.
fn worst_pairs(d: usize, k: u32, bound: i128) -> Vec<WorstPair> {
    let mut levels = vec![WorstPair {
        cost: [Expectation::integer(1), Expectation::integer(1)],
        zeros_for_one: 0,
    }];
    for _ in 0..k {
        let child = *levels.last().unwrap();
        let all_ones: Vec<_> = (0..d).map(|_| (true, child.cost[1])).collect();
        let (_, zero_cost) = combine_children(&all_ones, bound);
        let mut best: Option<(Expectation, usize)> = None;
        for z in 1..=d {
            let config: Vec<_> = (0..d)
                .map(|j| if j < z { (false, child.cost[0]) } else { (true, child.cost[1]) })
                .collect();
            let (_, c) = combine_children(&config, bound);
            if best.is_none_or(|(b, _)| c.greater_than(&b)) {
                best = Some((c, z));
            }
        }
        let (one_cost, zeros_for_one) = best.unwrap();
        levels.push(WorstPair {
            cost: [zero_cost, one_cost],
            zeros_for_one,
        });
    }
    levels
}

fn build_worst(levels: &[WorstPair], d: usize, level: usize, value: bool, out: &mut Vec<bool>) {
    if level == 0 {
        out.push(value);
        return;
    }
    let zeros = if value { levels[level].zeros_for_one } else { 0 };
    for j in 0..d {
        build_worst(levels, d, level - 1, j >= zeros, out);
    }
}

/// The input maximizing [`exact_expected_queries`] and the maximum. Ties
/// between root values go to value 0.
pub fn worst_case_expected(shape: &FormulaShape, caps: &Caps) -> Result<(InputAssignment, Expectation)> {
    check_cap("worst-case leaf count", shape.n(), caps.expectation_leaves)?;
    let levels = worst_pairs(shape.d(), shape.k(), DEFAULT_MAX_DENOMINATOR);
    let top = levels[shape.k() as usize];
    let value = top.cost[1].greater_than(&top.cost[0]);
    let mut bits = Vec::with_capacity(shape.n());
    build_worst(&levels, shape.d(), shape.k() as usize, value, &mut bits);
    debug_assert_eq!(eval_block(&bits, shape.d()), value);
    Ok((InputAssignment::new(bits), top.cost[usize::from(value)]))
}

/// Worst-case expected cost for `k = 0..=k_max` (no input is materialized).
pub fn worst_case_series(d: usize, k_max: u32) -> Result<Vec<Expectation>> {
    lambda(d)?;
    Ok(worst_pairs(d, k_max, DEFAULT_MAX_DENOMINATOR)
        .into_iter()
        .map(|w| w.cost[0].max(w.cost[1]))
        .collect())
}

#[derive(Debug, Clone, Serialize)]
pub struct ClassicalMonteCarlo {
    pub estimate: MeanEstimate,
    /// Runs whose value disagreed with the exact evaluation (always 0).
    pub wrong_values: usize,
}

/// `trials` independent runs, trial `t` drawing from stream `t` of `seed`.
pub fn monte_carlo(
    shape: &FormulaShape,
    x: &InputAssignment,
    trials: usize,
    seed: u64,
    exec: Exec,
) -> Result<ClassicalMonteCarlo> {
    let truth = evaluate(shape, x)?;
    let runs = exec.map_range(trials, |t| {
        let trace = randomized_evaluate_with(shape, x, &mut trial_rng(seed, t as u64))
            .expect("shape checked above");
        (trace.value, trace.queries)
    });
    let wrong_values = runs.iter().filter(|(v, _)| *v != truth).count();
    let samples: Vec<f64> = runs.iter().map(|&(_, q)| q as f64).collect();
    Ok(ClassicalMonteCarlo {
        estimate: MeanEstimate::from_samples(&samples),
        wrong_values,
    })
}
