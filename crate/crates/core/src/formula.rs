//! Balanced NAND formulas: shapes, inputs, evaluation and certificates.
//!
//! Leaves are indexed `1..=n` left to right. A `d`-regular formula with `k`
//! levels has `n = d^k` leaves; `k = 0` is the bare variable `x_1`. Child `j`
//! (0-based) of a node covering leaves `[lo, lo + m)` covers
//! `[lo + j * m / d, lo + (j + 1) * m / d)`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::caps::{check_cap, Caps};
use crate::error::{CertifyError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FormulaShape {
    d: usize,
    k: u32,
    n: usize,
}

impl FormulaShape {
    pub fn new(d: usize, k: u32) -> Result<Self> {
        if d < 2 {
            return Err(CertifyError::InvalidShape(format!(
                "branching factor must be at least 2, got {d}"
            )));
        }
        let n = d
            .checked_pow(k)
            .ok_or_else(|| CertifyError::Overflow(format!("{d}^{k} leaves")))?;
        Ok(Self { d, k, n })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn k(&self) -> u32 {
        self.k
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Shape of each child subtree. `None` for a single leaf.
    pub fn child(&self) -> Option<FormulaShape> {
        (self.k > 0).then(|| FormulaShape {
            d: self.d,
            k: self.k - 1,
            n: self.n / self.d,
        })
    }
}

impl fmt::Display for FormulaShape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(d={}, k={})", self.d, self.k)
    }
}

/// A full leaf assignment, leaf 1 first.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct InputAssignment {
    bits: Vec<bool>,
}

impl InputAssignment {
    pub fn new(bits: Vec<bool>) -> Self {
        Self { bits }
    }

    /// Leaf `i` takes bit `i - 1` of `mask`.
    pub fn from_mask(n: usize, mask: u64) -> Self {
        Self {
            bits: (0..n).map(|b| (mask >> b) & 1 == 1).collect(),
        }
    }

    pub fn all(n: usize, value: bool) -> Self {
        Self {
            bits: vec![value; n],
        }
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    /// Value of leaf `index` (1-based). Panics when out of range.
    pub fn leaf(&self, index: usize) -> bool {
        self.bits[index - 1]
    }

    pub fn check_shape(&self, shape: &FormulaShape) -> Result<()> {
        if self.bits.len() != shape.n() {
            return Err(CertifyError::LengthMismatch {
                expected: shape.n(),
                got: self.bits.len(),
            });
        }
        Ok(())
    }
}

impl FromStr for InputAssignment {
    type Err = CertifyError;

    fn from_str(s: &str) -> Result<Self> {
        let bits = s
            .trim()
            .chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                other => Err(CertifyError::BadBits(format!("unexpected character {other:?}"))),
            })
            .collect::<Result<Vec<_>>>()?;
        if bits.is_empty() {
            return Err(CertifyError::BadBits("empty bit string".into()));
        }
        Ok(Self { bits })
    }
}

impl fmt::Display for InputAssignment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &b in &self.bits {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

/// A set of leaf indices together with the formula value it claims to force.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Certificate {
    pub indices: Vec<usize>,
    #[serde(with = "crate::bit_serde")]
    pub value: bool,
}

impl Certificate {
    /// Sorts and deduplicates `indices`.
    pub fn new(mut indices: Vec<usize>, value: bool) -> Self {
        indices.sort_unstable();
        indices.dedup();
        Self { indices, value }
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}

pub fn evaluate(shape: &FormulaShape, x: &InputAssignment) -> Result<bool> {
    x.check_shape(shape)?;
    Ok(eval_block(x.bits(), shape.d()))
}

/// NAND-tree value of a contiguous block of leaves (a whole subtree).
pub(crate) fn eval_block(bits: &[bool], d: usize) -> bool {
    if bits.len() == 1 {
        return bits[0];
    }
    let m = bits.len() / d;
    !bits.chunks(m).all(|c| eval_block(c, d))
}

/// Three-valued NAND: `None` is "unknown".
fn eval_partial(known: &[Option<bool>], d: usize) -> Option<bool> {
    if known.len() == 1 {
        return known[0];
    }
    let m = known.len() / d;
    let mut all_one = true;
    for child in known.chunks(m) {
        match eval_partial(child, d) {
            Some(false) => return Some(true),
            Some(true) => {}
            None => all_one = false,
        }
    }
    all_one.then_some(false)
}

fn check_indices(shape: &FormulaShape, indices: &[usize]) -> Result<()> {
    for &i in indices {
        if i == 0 || i > shape.n() {
            return Err(CertifyError::IndexOutOfRange {
                index: i,
                max: shape.n(),
            });
        }
    }
    Ok(())
}

/// Whether the values of `x` on `indices` force the formula value, decided by
/// propagating fixed / unknown leaf values up the tree.
pub fn is_certificate(shape: &FormulaShape, indices: &[usize], x: &InputAssignment) -> Result<bool> {
    x.check_shape(shape)?;
    check_indices(shape, indices)?;
    let mut known = vec![None; shape.n()];
    for &i in indices {
        known[i - 1] = Some(x.leaf(i));
    }
    Ok(eval_partial(&known, shape.d()).is_some())
}

/// Size of a minimal `b`-certificate for a `k`-level formula, from the
/// closed-form solution of `C_0(k) = d C_1(k-1)`, `C_1(k) = C_0(k-1)`.
pub fn closed_form_cert_size(d: usize, k: u32, b: bool) -> Result<u64> {
    if d < 2 {
        return Err(CertifyError::InvalidShape(format!(
            "branching factor must be at least 2, got {d}"
        )));
    }
    let exponent = match (k.is_multiple_of(2), b) {
        (true, _) => k / 2,
        (false, false) => k.div_ceil(2),
        (false, true) => (k - 1) / 2,
    };
    (d as u64)
        .checked_pow(exponent)
        .ok_or_else(|| CertifyError::Overflow(format!("{d}^{exponent}")))
}

/// Leaf value shared by every leaf of a minimal `b`-certificate at depth `k`.
pub fn homogeneous_leaf_value(k: u32, b: bool) -> bool {
    b ^ (k % 2 == 1)
}

/// Whether every leaf of `cert` carries the value predicted by the parity
/// rule: 0-certificates read 0-leaves for even `k` and 1-leaves for odd `k`,
/// 1-certificates the other way round.
pub fn homogeneity_check(shape: &FormulaShape, x: &InputAssignment, cert: &Certificate) -> Result<bool> {
    x.check_shape(shape)?;
    check_indices(shape, &cert.indices)?;
    let expected = homogeneous_leaf_value(shape.k(), cert.value);
    Ok(cert.indices.iter().all(|&i| x.leaf(i) == expected))
}

/// Truth table over subsets of a block of `m` leaves: bit `mask` is set when
/// fixing the leaves in `mask` determines the block's value.
#[derive(Debug, Clone)]
struct SubsetTable {
    m: u32,
    words: Vec<u64>,
}

impl SubsetTable {
    fn zeros(m: u32) -> Self {
        let len = 1usize << m;
        Self {
            m,
            words: vec![0; len.div_ceil(64)],
        }
    }

    fn leaf() -> Self {
        Self { m: 1, words: vec![0b10] }
    }

    fn get(&self, i: usize) -> bool {
        (self.words[i >> 6] >> (i & 63)) & 1 == 1
    }

    fn set(&mut self, i: usize) {
        self.words[i >> 6] |= 1 << (i & 63);
    }

    /// Table over `self.m + upper.m` leaves where `upper` occupies the high
    /// mask bits, combining entries with AND (`conj`) or OR.
    fn append(&self, upper: &SubsetTable, conj: bool) -> SubsetTable {
        let mut out = SubsetTable::zeros(self.m + upper.m);
        let lo_len = 1usize << self.m;
        if self.m >= 6 {
            let block = lo_len / 64;
            for hi in 0..(1usize << upper.m) {
                let c = upper.get(hi);
                let dst = &mut out.words[hi * block..(hi + 1) * block];
                match (conj, c) {
                    (true, true) | (false, false) => dst.copy_from_slice(&self.words),
                    (true, false) => {}
                    (false, true) => dst.fill(u64::MAX),
                }
            }
        } else {
            for hi in 0..(1usize << upper.m) {
                let c = upper.get(hi);
                for lo in 0..lo_len {
                    let a = self.get(lo);
                    if (conj && a && c) || (!conj && (a || c)) {
                        out.set(hi * lo_len + lo);
                    }
                }
            }
        }
        out
    }

    /// Set entries none of whose one-smaller subsets are set.
    fn minimal_elements(&self) -> Vec<u64> {
        let mut covered = vec![0u64; self.words.len()];
        for b in 0..self.m {
            if b < 6 {
                let shift = 1u32 << b;
                let has_bit = HAS_BIT_MASKS[b as usize];
                for (w, c) in self.words.iter().zip(covered.iter_mut()) {
                    *c |= (w << shift) & has_bit;
                }
            } else {
                let stride = 1usize << (b - 6);
                for (w, c) in covered.iter_mut().enumerate() {
                    if w & stride != 0 {
                        *c |= self.words[w ^ stride];
                    }
                }
            }
        }
        let valid = if self.m < 6 { (1u64 << (1u32 << self.m)) - 1 } else { u64::MAX };
        let mut out = Vec::new();
        for (w, (&word, &cov)) in self.words.iter().zip(&covered).enumerate() {
            let mut minimal = word & !cov & valid;
            while minimal != 0 {
                let bit = minimal.trailing_zeros() as u64;
                out.push(((w as u64) << 6) | bit);
                minimal &= minimal - 1;
            }
        }
        out
    }
}

/// Positions within a 64-bit word whose index has bit `b` set.
const HAS_BIT_MASKS: [u64; 6] = [
    0xAAAA_AAAA_AAAA_AAAA,
    0xCCCC_CCCC_CCCC_CCCC,
    0xF0F0_F0F0_F0F0_F0F0,
    0xFF00_FF00_FF00_FF00,
    0xFFFF_0000_FFFF_0000,
    0xFFFF_FFFF_0000_0000,
];

/// Determination table of a subtree and its value.
fn subset_table(bits: &[bool], d: usize) -> (SubsetTable, bool) {
    if bits.len() == 1 {
        return (SubsetTable::leaf(), bits[0]);
    }
    let m = bits.len() / d;
    let children: Vec<(SubsetTable, bool)> = bits.chunks(m).map(|c| subset_table(c, d)).collect();
    let value = !children.iter().all(|(_, v)| *v);
    // value 0: every child must be forced to 1; value 1: some 0-child forced.
    let conj = !value;
    let pick = |(t, v): &(SubsetTable, bool)| {
        if conj || !*v {
            t.clone()
        } else {
            SubsetTable::zeros(t.m)
        }
    };
    let mut acc = pick(&children[0]);
    for child in &children[1..] {
        acc = acc.append(&pick(child), conj);
    }
    (acc, value)
}

/// Every inclusion-minimal certificate for `(shape, x)`, found by deciding
/// certificate status for all `2^n` leaf subsets. Sorted lexicographically.
pub fn brute_force_minimal_certificates(
    shape: &FormulaShape,
    x: &InputAssignment,
    caps: &Caps,
) -> Result<Vec<Certificate>> {
    x.check_shape(shape)?;
    check_cap("exhaustive leaf count", shape.n(), caps.exhaustive_leaves)?;
    let (table, value) = subset_table(x.bits(), shape.d());
    let mut certs: Vec<Certificate> = table
        .minimal_elements()
        .into_iter()
        .map(|mask| {
            let indices = (0..shape.n()).filter(|b| (mask >> b) & 1 == 1).map(|b| b + 1).collect();
            Certificate { indices, value }
        })
        .collect();
    certs.sort();
    Ok(certs)
}
