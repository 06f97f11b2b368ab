//! Spectral adversary bounds for finite partial functions `f: S -> Σ`.
//!
//! For a symmetric nonnegative `Γ` that vanishes on equal-label pairs,
//! `‖Γ‖ / max_i ‖Γ ∘ D_i‖` is a lower bound on the adversary value; for any
//! family of distributions `p_x` over input positions,
//! `max_{f(x) != f(y)} 1 / Σ_{i: x_i != y_i} sqrt(p_x(i) p_y(i))` is an upper
//! bound. `D_i` (pairs differing in bit `i`) is applied as a predicate and
//! never stored.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::caps::{check_cap, Caps};
use crate::error::{CertifyError, Result};
use crate::exec::Exec;
use crate::formula::{evaluate, FormulaShape, InputAssignment};
use crate::linalg::{spectral_norm_with, SymMatrix};

pub type Label = u32;

/// Largest supported input length (inputs are packed into a `u128`).
pub const MAX_INPUT_BITS: usize = 128;

/// Row access shared by explicit tables and lazily generated product tables.
pub trait LabeledInputs: Sync {
    /// Input length in bits.
    fn n(&self) -> usize;
    /// Number of rows `|S|`.
    fn len(&self) -> usize;
    /// Row `row` packed as bits: position `i` (1-based) is bit `i - 1`.
    fn input(&self, row: usize) -> u128;
    fn same_label(&self, a: usize, b: usize) -> bool;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn differs_at(&self, a: usize, b: usize, i: usize) -> bool {
        ((self.input(a) ^ self.input(b)) >> (i - 1)) & 1 == 1
    }
}

/// An explicit function table. Row order is the canonical order of every
/// matrix and witness built over it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FunctionTable {
    n: usize,
    inputs: Vec<u128>,
    labels: Vec<Label>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct TableJson {
    n: usize,
    rows: Vec<RowJson>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct RowJson {
    x: String,
    label: Label,
}

impl FunctionTable {
    pub fn new(n: usize, rows: Vec<(u128, Label)>) -> Result<Self> {
        if n == 0 || n > MAX_INPUT_BITS {
            return Err(CertifyError::InvalidTable(format!(
                "input length {n} outside 1..={MAX_INPUT_BITS}"
            )));
        }
        let mut seen = HashSet::new();
        for &(x, _) in &rows {
            if n < 128 && x >> n != 0 {
                return Err(CertifyError::InvalidTable(format!("input {x:#x} has more than {n} bits")));
            }
            if !seen.insert(x) {
                return Err(CertifyError::InvalidTable(format!(
                    "duplicate input {}",
                    bits_to_string(x, n)
                )));
            }
        }
        let labels: HashSet<Label> = rows.iter().map(|r| r.1).collect();
        if labels.len() < 2 {
            return Err(CertifyError::InvalidTable("fewer than two distinct labels".into()));
        }
        let (inputs, labels) = rows.into_iter().unzip();
        Ok(Self { n, inputs, labels })
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let raw: TableJson =
            serde_json::from_str(text).map_err(|e| CertifyError::InvalidTable(e.to_string()))?;
        let rows = raw
            .rows
            .iter()
            .map(|r| {
                if r.x.len() != raw.n {
                    return Err(CertifyError::InvalidTable(format!(
                        "row {:?} does not have {} bits",
                        r.x, raw.n
                    )));
                }
                let x: InputAssignment = r.x.parse()?;
                Ok((pack(x.bits()), r.label))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(raw.n, rows)
    }

    pub fn to_json(&self) -> String {
        let raw = TableJson {
            n: self.n,
            rows: self
                .inputs
                .iter()
                .zip(&self.labels)
                .map(|(&x, &label)| RowJson {
                    x: bits_to_string(x, self.n),
                    label,
                })
                .collect(),
        };
        serde_json::to_string(&raw).expect("table serializes")
    }

    pub fn label(&self, row: usize) -> Label {
        self.labels[row]
    }

    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    pub fn inputs(&self) -> &[u128] {
        &self.inputs
    }
}

impl LabeledInputs for FunctionTable {
    fn n(&self) -> usize {
        self.n
    }

    fn len(&self) -> usize {
        self.inputs.len()
    }

    fn input(&self, row: usize) -> u128 {
        self.inputs[row]
    }

    fn same_label(&self, a: usize, b: usize) -> bool {
        self.labels[a] == self.labels[b]
    }
}

/// Packs leaf bits (leaf 1 first) into a `u128`.
pub fn pack(bits: &[bool]) -> u128 {
    bits.iter()
        .enumerate()
        .fold(0u128, |acc, (i, &b)| acc | (u128::from(b) << i))
}

pub fn bits_to_string(x: u128, n: usize) -> String {
    (0..n).map(|i| if (x >> i) & 1 == 1 { '1' } else { '0' }).collect()
}

/// A validated adversary matrix for some table.
#[derive(Debug, Clone, PartialEq)]
pub struct AdversaryMatrix {
    matrix: SymMatrix,
}

impl AdversaryMatrix {
    /// Checks symmetry, nonnegativity, that `Γ != 0` and that `Γ` vanishes
    /// on equal-label pairs.
    pub fn new<T: LabeledInputs + ?Sized>(table: &T, matrix: SymMatrix) -> Result<Self> {
        if matrix.dim() != table.len() {
            return Err(CertifyError::InvalidGamma(format!(
                "matrix is {0}x{0} but the table has {1} rows",
                matrix.dim(),
                table.len()
            )));
        }
        matrix.check_symmetric()?;
        if matrix.is_zero() {
            return Err(CertifyError::InvalidGamma("matrix is identically zero".into()));
        }
        for a in 0..matrix.dim() {
            for b in 0..matrix.dim() {
                let v = matrix.get(a, b);
                if v < 0.0 {
                    return Err(CertifyError::InvalidGamma(format!("negative entry at ({a}, {b})")));
                }
                if v != 0.0 && table.same_label(a, b) {
                    return Err(CertifyError::InvalidGamma(format!(
                        "nonzero entry at ({a}, {b}) between equal labels"
                    )));
                }
            }
        }
        Ok(Self { matrix })
    }

    pub fn matrix(&self) -> &SymMatrix {
        &self.matrix
    }

    pub fn scaled(&self, c: f64) -> Result<Self> {
        if c <= 0.0 || !c.is_finite() {
            return Err(CertifyError::InvalidArgument(format!("scale factor {c} must be positive")));
        }
        Ok(Self {
            matrix: self.matrix.scaled(c),
        })
    }
}

/// One probability distribution over positions `1..=n` per table row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualWitness {
    pub p: Vec<Vec<f64>>,
}

impl DualWitness {
    pub fn uniform(rows: usize, n: usize) -> Self {
        Self {
            p: vec![vec![1.0 / n as f64; n]; rows],
        }
    }

    pub fn validate<T: LabeledInputs + ?Sized>(&self, table: &T) -> Result<()> {
        if self.p.len() != table.len() {
            return Err(CertifyError::InvalidWitness(format!(
                "{} distributions for {} rows",
                self.p.len(),
                table.len()
            )));
        }
        for (r, row) in self.p.iter().enumerate() {
            if row.len() != table.n() {
                return Err(CertifyError::InvalidWitness(format!(
                    "row {r} has {} entries, expected {}",
                    row.len(),
                    table.n()
                )));
            }
            if row.iter().any(|&v| v < 0.0 || !v.is_finite()) {
                return Err(CertifyError::InvalidWitness(format!("row {r} has a negative or non-finite entry")));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > 1e-10 {
                return Err(CertifyError::InvalidWitness(format!("row {r} sums to {sum}")));
            }
        }
        Ok(())
    }
}

/// `‖Γ ∘ D_i‖` for position `i` (1-based).
pub fn hadamard_difference_norm<T: LabeledInputs + ?Sized>(
    table: &T,
    gamma: &AdversaryMatrix,
    i: usize,
    caps: &Caps,
) -> Result<f64> {
    if i == 0 || i > table.n() {
        return Err(CertifyError::IndexOutOfRange { index: i, max: table.n() });
    }
    let masked = gamma.matrix.masked(|a, b| table.differs_at(a, b, i));
    spectral_norm_with(&masked, caps.dense_eigen_dim)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PrimalReport {
    pub gamma_norm: f64,
    /// `‖Γ ∘ D_i‖` for `i = 1..=n`.
    pub masked_norms: Vec<f64>,
    pub max_masked_norm: f64,
    pub primal_value: f64,
}

/// `‖Γ‖ / max_i ‖Γ ∘ D_i‖`.
pub fn primal_value<T: LabeledInputs + ?Sized>(
    table: &T,
    gamma: &AdversaryMatrix,
    caps: &Caps,
    exec: Exec,
) -> Result<PrimalReport> {
    let gamma_norm = spectral_norm_with(&gamma.matrix, caps.dense_eigen_dim)?;
    let masked_norms = exec
        .map_range(table.n(), |i| hadamard_difference_norm(table, gamma, i + 1, caps))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let max_masked_norm = masked_norms.iter().copied().fold(0.0, f64::max);
    if max_masked_norm == 0.0 {
        return Err(CertifyError::DegenerateWitness);
    }
    Ok(PrimalReport {
        gamma_norm,
        masked_norms,
        max_masked_norm,
        primal_value: gamma_norm / max_masked_norm,
    })
}

/// Smallest denominator `Σ_{i: x_i != y_i} sqrt(p_x(i) p_y(i))` over pairs
/// with different labels, or `None` when every pair shares its label.
fn min_pair_overlap<T: LabeledInputs + ?Sized>(table: &T, p: &[Vec<f64>], exec: Exec) -> Option<f64> {
    let len = table.len();
    exec.min_f64(len, |a| {
        let xa = table.input(a);
        let mut best: Option<f64> = None;
        for b in (a + 1)..len {
            if table.same_label(a, b) {
                continue;
            }
            let s = overlap(xa ^ table.input(b), &p[a], &p[b]);
            best = Some(best.map_or(s, |m: f64| m.min(s)));
        }
        best
    })
}

#[inline]
fn overlap(mut diff: u128, pa: &[f64], pb: &[f64]) -> f64 {
    let mut s = 0.0;
    while diff != 0 {
        let i = diff.trailing_zeros() as usize;
        s += (pa[i] * pb[i]).sqrt();
        diff &= diff - 1;
    }
    s
}

/// Upper bound from a dual witness; `+∞` when some differing-label pair has
/// no overlap at all.
pub fn dual_value<T: LabeledInputs + ?Sized>(table: &T, witness: &DualWitness, exec: Exec) -> Result<f64> {
    witness.validate(table)?;
    let min = min_pair_overlap(table, &witness.p, exec).ok_or(CertifyError::NoDifferingPair)?;
    Ok(if min > 0.0 { 1.0 / min } else { f64::INFINITY })
}

/// `(1 - 2 sqrt(eps (1 - eps))) / 2 * adv`: the number of queries any
/// algorithm with error at most `eps` must make, given an adversary value.
pub fn query_lower_bound(adv: f64, eps: f64) -> Result<f64> {
    if !(0.0..0.5).contains(&eps) {
        return Err(CertifyError::InvalidArgument(format!("error rate {eps} outside [0, 1/2)")));
    }
    Ok((1.0 - 2.0 * (eps * (1.0 - eps)).sqrt()) / 2.0 * adv)
}

/// Two-level promise problem on `d^2` bits: exactly one subtree is all ones
/// and every other subtree has exactly one 0. The label is the 1-based index
/// of the all-ones subtree. Rows are ordered by label, then by the positions
/// of the zeros in the remaining subtrees (leftmost subtree most significant).
pub fn build_two_level_promise_function(d: usize, caps: &Caps) -> Result<FunctionTable> {
    if d < 2 {
        return Err(CertifyError::InvalidArgument(format!("d must be at least 2, got {d}")));
    }
    let n = d
        .checked_mul(d)
        .filter(|&n| n <= MAX_INPUT_BITS)
        .ok_or(CertifyError::CapExceeded {
            what: "promise input length",
            size: d.saturating_mul(d),
            cap: MAX_INPUT_BITS,
        })?;
    let rows_per_label = d
        .checked_pow(d as u32 - 1)
        .ok_or_else(|| CertifyError::Overflow(format!("{d}^{}", d - 1)))?;
    let size = rows_per_label
        .checked_mul(d)
        .ok_or_else(|| CertifyError::Overflow(format!("{d}^{d}")))?;
    check_cap("promise table rows", size, caps.table_rows)?;
    let full: u128 = if n == 128 { u128::MAX } else { (1u128 << n) - 1 };
    let mut rows = Vec::with_capacity(size);
    for zero_tree in 0..d {
        for code in 0..rows_per_label {
            let mut x = full;
            let mut rest = code;
            let others: Vec<usize> = (0..d).filter(|&j| j != zero_tree).collect();
            for &tree in others.iter().rev() {
                let pos = rest % d;
                rest /= d;
                x &= !(1u128 << (tree * d + pos));
            }
            rows.push((x, zero_tree as Label + 1));
        }
    }
    FunctionTable::new(n, rows)
}

/// 0/1 matrix over `table` with `Γ_xy = 1` iff `x, y` differ in exactly two
/// bits and carry different labels.
pub fn two_bit_flip_gamma(table: &FunctionTable) -> Result<AdversaryMatrix> {
    let m = SymMatrix::from_fn(table.len(), |a, b| {
        let close = (table.input(a) ^ table.input(b)).count_ones() == 2;
        if close && !table.same_label(a, b) {
            1.0
        } else {
            0.0
        }
    });
    AdversaryMatrix::new(table, m)
}

pub fn build_promise_gamma(d: usize, caps: &Caps) -> Result<(FunctionTable, AdversaryMatrix)> {
    let table = build_two_level_promise_function(d, caps)?;
    check_cap("matrix dimension", table.len(), caps.matrix_dim)?;
    let gamma = two_bit_flip_gamma(&table)?;
    Ok((table, gamma))
}

/// Unique search on `d` bits: inputs with exactly one 0, labelled by its
/// 1-based position. Rows ordered by label.
pub fn build_unique_search_function(d: usize) -> Result<FunctionTable> {
    if !(2..=MAX_INPUT_BITS).contains(&d) {
        return Err(CertifyError::InvalidArgument(format!("d must be in 2..={MAX_INPUT_BITS}, got {d}")));
    }
    let full: u128 = if d == 128 { u128::MAX } else { (1u128 << d) - 1 };
    let rows = (0..d).map(|z| (full & !(1u128 << z), z as Label + 1)).collect();
    FunctionTable::new(d, rows)
}

/// `Γ_xy = 1` iff the labels differ: the complete graph on the rows.
pub fn build_search_gamma(d: usize) -> Result<(FunctionTable, AdversaryMatrix)> {
    let table = build_unique_search_function(d)?;
    let m = SymMatrix::from_fn(d, |a, b| if a != b { 1.0 } else { 0.0 });
    let gamma = AdversaryMatrix::new(&table, m)?;
    Ok((table, gamma))
}

/// Explicit constructions selectable by name.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Construction {
    Promise,
    Search,
}

impl Construction {
    pub fn build(self, d: usize, caps: &Caps) -> Result<(FunctionTable, AdversaryMatrix)> {
        match self {
            Construction::Promise => build_promise_gamma(d, caps),
            Construction::Search => build_search_gamma(d),
        }
    }
}

impl std::str::FromStr for Construction {
    type Err = CertifyError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "promise" => Ok(Construction::Promise),
            "search" => Ok(Construction::Search),
            other => Err(CertifyError::InvalidArgument(format!("unknown construction {other:?}"))),
        }
    }
}

/// Checks that every promise input evaluates to 1 under the two-level
/// formula and that its label names the all-ones subtree.
pub fn promise_rows_consistent(table: &FunctionTable, d: usize) -> Result<bool> {
    let shape = FormulaShape::new(d, 2)?;
    for (row, &x) in table.inputs().iter().enumerate() {
        let bits: Vec<bool> = (0..shape.n()).map(|i| (x >> i) & 1 == 1).collect();
        if !evaluate(&shape, &InputAssignment::new(bits.clone()))? {
            return Ok(false);
        }
        let ones_trees: Vec<usize> = (0..d).filter(|&j| bits[j * d..(j + 1) * d].iter().all(|&b| b)).collect();
        if ones_trees != [table.label(row) as usize - 1] {
            return Ok(false);
        }
    }
    Ok(true)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DualBudget {
    pub max_iterations: usize,
    /// Stop once `dual <= target * (1 + target_rel_gap)`.
    pub target_rel_gap: f64,
}

impl Default for DualBudget {
    fn default() -> Self {
        Self {
            max_iterations: 20_000,
            target_rel_gap: 1e-4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DualOptimization {
    pub witness: DualWitness,
    pub dual_value: f64,
    pub reached_target: bool,
    pub iterations: usize,
}

struct PairSet {
    pairs: Vec<(usize, usize, u128)>,
}

impl PairSet {
    fn new<T: LabeledInputs + ?Sized>(table: &T) -> Self {
        let mut pairs = Vec::new();
        for a in 0..table.len() {
            for b in (a + 1)..table.len() {
                if !table.same_label(a, b) {
                    pairs.push((a, b, table.input(a) ^ table.input(b)));
                }
            }
        }
        Self { pairs }
    }

    fn overlaps(&self, p: &[Vec<f64>]) -> Vec<f64> {
        self.pairs.iter().map(|&(a, b, diff)| overlap(diff, &p[a], &p[b])).collect()
    }
}

/// Soft minimum `-τ log Σ exp(-s/τ)`, shifted by the hard minimum.
fn soft_min(s: &[f64], tau: f64) -> f64 {
    let m = s.iter().copied().fold(f64::INFINITY, f64::min);
    m - tau * s.iter().map(|v| (-(v - m) / tau).exp()).sum::<f64>().ln()
}

/// Searches for a witness with small [`dual_value`] by exponentiated-gradient
/// ascent on a soft minimum of the pair overlaps, starting from uniform rows
/// and annealing the softness. Returns the best witness seen; no optimality
/// guarantee.
pub fn optimize_dual<T: LabeledInputs + ?Sized>(
    table: &T,
    target: Option<f64>,
    budget: DualBudget,
    caps: &Caps,
) -> Result<DualOptimization> {
    let n = table.n();
    check_cap("dual optimizer cells", table.len().saturating_mul(n), caps.dual_cells)?;
    let pairs = PairSet::new(table);
    if pairs.pairs.is_empty() {
        return Err(CertifyError::NoDifferingPair);
    }
    let floor = 1e-300;
    let mut p = DualWitness::uniform(table.len(), n).p;
    let value_of = |s: &[f64]| {
        let m = s.iter().copied().fold(f64::INFINITY, f64::min);
        if m > 0.0 {
            1.0 / m
        } else {
            f64::INFINITY
        }
    };
    let done = |v: f64| target.is_some_and(|t| v <= t * (1.0 + budget.target_rel_gap));

    let mut s = pairs.overlaps(&p);
    let mut best = (value_of(&s), p.clone());
    let mut tau = 0.1 * s.iter().copied().fold(f64::INFINITY, f64::min).max(1e-3);
    let mut step = 1.0;
    let mut iterations = 0;
    while iterations < budget.max_iterations && !done(best.0) && tau > 1e-14 {
        iterations += 1;
        let m = s.iter().copied().fold(f64::INFINITY, f64::min);
        let weights: Vec<f64> = s.iter().map(|v| (-(v - m) / tau).exp()).collect();
        let total: f64 = weights.iter().sum();
        let mut grad = vec![vec![0.0; n]; table.len()];
        for (&(a, b, diff), w) in pairs.pairs.iter().zip(&weights) {
            let w = w / total;
            let mut bits = diff;
            while bits != 0 {
                let i = bits.trailing_zeros() as usize;
                bits &= bits - 1;
                let (pa, pb) = (p[a][i].max(floor), p[b][i].max(floor));
                let root = (pa * pb).sqrt();
                grad[a][i] += 0.5 * w * root / pa;
                grad[b][i] += 0.5 * w * root / pb;
            }
        }
        let scale = grad.iter().flatten().fold(0.0f64, |acc, g| acc.max(g.abs()));
        if scale == 0.0 {
            break;
        }
        let current = soft_min(&s, tau);
        loop {
            let trial: Vec<Vec<f64>> = p
                .iter()
                .zip(&grad)
                .map(|(row, g)| {
                    let mut next: Vec<f64> = row
                        .iter()
                        .zip(g)
                        .map(|(&v, &gi)| (v * (step * gi / scale).exp()).max(floor))
                        .collect();
                    let z: f64 = next.iter().sum();
                    next.iter_mut().for_each(|v| *v /= z);
                    next
                })
                .collect();
            let s_trial = pairs.overlaps(&trial);
            if soft_min(&s_trial, tau) > current {
                p = trial;
                s = s_trial;
                step = (step * 1.5).min(50.0);
                break;
            }
            step *= 0.5;
            if step < 1e-9 {
                // no progress at this softness: sharpen
                tau *= 0.5;
                step = 1.0;
                break;
            }
        }
        let v = value_of(&s);
        if v < best.0 {
            best = (v, p.clone());
        }
        if iterations % 200 == 0 {
            tau *= 0.7;
        }
    }
    let witness = DualWitness { p: best.1 };
    let dual = dual_value(table, &witness, Exec::Sequential)?;
    Ok(DualOptimization {
        reached_target: target.is_none_or(|t| dual <= t * (1.0 + budget.target_rel_gap)),
        witness,
        dual_value: dual,
        iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::dense_norm;

    fn caps() -> Caps {
        Caps::default()
    }

    fn or2() -> FunctionTable {
        FunctionTable::new(2, vec![(0b00, 0), (0b10, 1), (0b01, 1), (0b11, 1)]).unwrap()
    }

    fn or2_gamma(a: f64, b: f64, c: f64) -> SymMatrix {
        // rows 00, 10, 01, 11; edges from 00 to each 1-input
        let mut m = SymMatrix::zeros(4);
        for (j, w) in [(1, a), (2, b), (3, c)] {
            m.set(0, j, w);
            m.set(j, 0, w);
        }
        m
    }

    #[test]
    fn table_validation() {
        assert!(FunctionTable::new(1, vec![(0, 0), (1, 0)]).is_err());
        assert!(FunctionTable::new(1, vec![(0, 0), (0, 1)]).is_err());
        assert!(FunctionTable::new(1, vec![(0, 0), (2, 1)]).is_err());
        assert!(FunctionTable::new(0, vec![]).is_err());
        let t = or2();
        let back = FunctionTable::from_json(&t.to_json()).unwrap();
        assert_eq!(back, t);
        assert!(FunctionTable::from_json(r#"{"n":2,"rows":[{"x":"0","label":1}]}"#).is_err());
    }

    #[test]
    fn gamma_validation() {
        let t = or2();
        assert!(AdversaryMatrix::new(&t, or2_gamma(1.0, 1.0, 0.0)).is_ok());
        assert!(AdversaryMatrix::new(&t, SymMatrix::zeros(4)).is_err());
        assert!(AdversaryMatrix::new(&t, or2_gamma(-1.0, 1.0, 0.0)).is_err());
        let mut same_label = SymMatrix::zeros(4);
        same_label.set(1, 2, 1.0);
        same_label.set(2, 1, 1.0);
        assert!(AdversaryMatrix::new(&t, same_label).is_err());
        let mut asym = or2_gamma(1.0, 1.0, 0.0);
        asym.set(0, 1, 2.0);
        assert!(matches!(AdversaryMatrix::new(&t, asym), Err(CertifyError::NotSymmetric { .. })));
        assert!(AdversaryMatrix::new(&t, SymMatrix::zeros(3)).is_err());
    }

    #[test]
    fn masked_norm_examples() {
        let t = or2();
        let g = AdversaryMatrix::new(&t, or2_gamma(1.0, 0.0, 0.0)).unwrap();
        // the only edge joins rows 0b00 and 0b10, which differ in position 2
        assert_eq!(hadamard_difference_norm(&t, &g, 1, &caps()).unwrap(), 0.0);
        assert!((hadamard_difference_norm(&t, &g, 2, &caps()).unwrap() - 1.0).abs() < 1e-12);
        assert!(hadamard_difference_norm(&t, &g, 3, &caps()).is_err());
        let (st, sg) = build_search_gamma(3).unwrap();
        let v = hadamard_difference_norm(&st, &sg, 1, &caps()).unwrap();
        assert!((v - 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn primal_degenerate_and_scale_invariant() {
        let (t, g) = build_search_gamma(4).unwrap();
        let base = primal_value(&t, &g, &caps(), Exec::default()).unwrap();
        assert!((base.primal_value - 3f64.sqrt()).abs() < 1e-12);
        for c in [0.5, 3.0, 10.0] {
            let scaled = primal_value(&t, &g.scaled(c).unwrap(), &caps(), Exec::default()).unwrap();
            assert!((scaled.primal_value - base.primal_value).abs() < 1e-10);
        }
        let t1 = FunctionTable::new(1, vec![(0, 0), (1, 1)]).unwrap();
        let g1 = AdversaryMatrix::new(&t1, SymMatrix::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap()).unwrap();
        assert_eq!(primal_value(&t1, &g1, &caps(), Exec::default()).unwrap().primal_value, 1.0);
    }

    #[test]
    fn dual_examples() {
        let t1 = FunctionTable::new(1, vec![(0, 0), (1, 1)]).unwrap();
        let w = DualWitness { p: vec![vec![1.0], vec![1.0]] };
        assert_eq!(dual_value(&t1, &w, Exec::default()).unwrap(), 1.0);
        let bad = DualWitness { p: vec![vec![0.5], vec![1.0]] };
        assert!(dual_value(&t1, &bad, Exec::default()).is_err());
        // disjoint supports give an infinite value
        let t = or2();
        let w = DualWitness { p: vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![0.5, 0.5], vec![0.5, 0.5]] };
        assert_eq!(dual_value(&t, &w, Exec::default()).unwrap(), f64::INFINITY);
    }

    #[test]
    fn promise_table_shape() {
        let t2 = build_two_level_promise_function(2, &caps()).unwrap();
        assert_eq!((t2.len(), t2.n()), (4, 4));
        let t3 = build_two_level_promise_function(3, &caps()).unwrap();
        assert_eq!((t3.len(), t3.n()), (27, 9));
        for (d, t) in [(2, &t2), (3, &t3)] {
            assert!(promise_rows_consistent(t, d).unwrap());
        }
        assert!(matches!(
            build_two_level_promise_function(6, &caps()),
            Err(CertifyError::CapExceeded { .. })
        ));
    }

    #[test]
    fn promise_gamma_regular_with_expected_norms() {
        for d in 2..=4usize {
            let (t, g) = build_promise_gamma(d, &caps()).unwrap();
            for a in 0..t.len() {
                let degree: f64 = (0..t.len()).map(|b| g.matrix().get(a, b)).sum();
                assert_eq!(degree, (d * (d - 1)) as f64);
            }
            let r = primal_value(&t, &g, &caps(), Exec::default()).unwrap();
            assert!((r.gamma_norm - (d * (d - 1)) as f64).abs() < 1e-9);
            assert!(r.max_masked_norm <= d as f64 + 1e-9);
            assert!(r.primal_value >= (d - 1) as f64 - 1e-9);
            for m in &r.masked_norms {
                assert!(*m <= r.gamma_norm + 1e-9);
            }
        }
    }

    #[test]
    fn search_construction_norms() {
        for d in 2..=8usize {
            let (t, g) = build_search_gamma(d).unwrap();
            let r = primal_value(&t, &g, &caps(), Exec::default()).unwrap();
            let root = ((d - 1) as f64).sqrt();
            assert!((r.gamma_norm - (d - 1) as f64).abs() < 1e-9);
            assert!((r.max_masked_norm - root).abs() < 1e-9);
            assert!((r.primal_value - root).abs() < 1e-9);
            // cross-check against the dense solver on the unsplit matrix
            assert!((dense_norm(g.matrix()) - (d - 1) as f64).abs() < 1e-9);
        }
        let (t2, _) = build_search_gamma(2).unwrap();
        assert_eq!(t2.labels(), &[1, 2]);
    }

    #[test]
    fn or2_primal_is_best_on_a_grid() {
        // exhaustive grid over edge weights of the only three admissible edges
        let t = or2();
        let grid = [0.0, 0.25, 0.5, 0.75, 1.0];
        let mut best = 0.0f64;
        for &a in &grid {
            for &b in &grid {
                for &c in &grid {
                    let Ok(g) = AdversaryMatrix::new(&t, or2_gamma(a, b, c)) else { continue };
                    if let Ok(r) = primal_value(&t, &g, &caps(), Exec::default()) {
                        best = best.max(r.primal_value);
                    }
                }
            }
        }
        assert!((best - 2f64.sqrt()).abs() < 1e-9, "{best}");
    }

    #[test]
    fn optimizer_closes_known_sandwiches() {
        let opt = optimize_dual(&or2(), Some(2f64.sqrt()), DualBudget::default(), &caps()).unwrap();
        assert!(opt.dual_value <= 2f64.sqrt() + 1e-3, "{opt:?}");
        let t1 = FunctionTable::new(1, vec![(0, 0), (1, 1)]).unwrap();
        let opt = optimize_dual(&t1, None, DualBudget::default(), &caps()).unwrap();
        assert_eq!(opt.dual_value, 1.0);
        for d in [3usize, 4] {
            let (t, _) = build_search_gamma(d).unwrap();
            let target = ((d - 1) as f64).sqrt();
            let opt = optimize_dual(&t, Some(target), DualBudget::default(), &caps()).unwrap();
            assert!(opt.reached_target, "d={d}: {opt:?}");
            assert!(opt.dual_value <= target + 1e-3);
            opt.witness.validate(&t).unwrap();
        }
    }

    #[test]
    fn weak_duality_on_constructions() {
        for (t, g) in [
            build_search_gamma(3).unwrap(),
            build_search_gamma(5).unwrap(),
            build_promise_gamma(2, &caps()).unwrap(),
            build_promise_gamma(3, &caps()).unwrap(),
        ] {
            let primal = primal_value(&t, &g, &caps(), Exec::default()).unwrap().primal_value;
            let uniform = dual_value(&t, &DualWitness::uniform(t.len(), t.n()), Exec::default()).unwrap();
            assert!(primal <= uniform + 1e-8);
            let opt = optimize_dual(&t, Some(primal), DualBudget { max_iterations: 2000, ..Default::default() }, &caps()).unwrap();
            assert!(primal <= opt.dual_value + 1e-8);
        }
    }

    #[test]
    fn query_bound_factor() {
        assert_eq!(query_lower_bound(4.0, 0.0).unwrap(), 2.0);
        let b = query_lower_bound(1.0, 0.1).unwrap();
        assert!((b - (1.0 - 2.0 * 0.09f64.sqrt()) / 2.0).abs() < 1e-15);
        assert!(query_lower_bound(1.0, 0.5).is_err());
    }

    #[test]
    fn parallel_dual_matches_sequential() {
        let t = build_two_level_promise_function(3, &caps()).unwrap();
        let w = DualWitness::uniform(t.len(), t.n());
        assert_eq!(
            dual_value(&t, &w, Exec::Sequential).unwrap().to_bits(),
            dual_value(&t, &w, Exec::default()).unwrap().to_bits()
        );
    }
}
