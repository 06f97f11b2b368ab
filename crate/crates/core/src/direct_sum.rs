//! t-fold products `f^(t)(x_1 … x_t) = (f(x_1), …, f(x_t))` and the
//! compositions of primal and dual witnesses that scale both bounds by `t`.
//!
//! Product rows are indexed in mixed radix with block 1 most significant,
//! which matches `A ⊗ B` with `A` acting on block 1. Position `i` of a
//! product input lies in block `⌈i/n⌉` at within-block position
//! `((i - 1) mod n) + 1`.

use serde::Serialize;

use crate::adversary::{
    dual_value, primal_value, AdversaryMatrix, DualWitness, FunctionTable, LabeledInputs, MAX_INPUT_BITS,
};
use crate::caps::{check_cap, Caps};
use crate::error::{CertifyError, Result};
use crate::exec::Exec;
use crate::linalg::{spectral_norm_with, SymMatrix};

/// Relative tolerance for the scaling flags in [`DirectSumRow`].
pub const SCALING_TOLERANCE: f64 = 1e-6;

/// The product of `t` copies of a base table, generated on demand.
#[derive(Debug, Clone)]
pub struct ProductFunction<'a> {
    base: &'a FunctionTable,
    t: usize,
    len: usize,
}

impl<'a> ProductFunction<'a> {
    pub fn new(base: &'a FunctionTable, t: usize) -> Result<Self> {
        if t == 0 {
            return Err(CertifyError::InvalidArgument("t must be at least 1".into()));
        }
        let bits = base.n().saturating_mul(t);
        if bits > MAX_INPUT_BITS {
            return Err(CertifyError::CapExceeded {
                what: "product input length",
                size: bits,
                cap: MAX_INPUT_BITS,
            });
        }
        let len = base
            .len()
            .checked_pow(t as u32)
            .ok_or_else(|| CertifyError::Overflow(format!("{}^{t}", base.len())))?;
        Ok(Self { base, t, len })
    }

    pub fn t(&self) -> usize {
        self.t
    }

    pub fn base(&self) -> &FunctionTable {
        self.base
    }

    /// Base row indices of each block, block 1 first.
    pub fn blocks(&self, row: usize) -> Vec<usize> {
        let s = self.base.len();
        let mut out = vec![0; self.t];
        let mut rest = row;
        for slot in out.iter_mut().rev() {
            *slot = rest % s;
            rest /= s;
        }
        out
    }

    pub fn labels(&self, row: usize) -> Vec<u32> {
        self.blocks(row).into_iter().map(|r| self.base.label(r)).collect()
    }
}

impl LabeledInputs for ProductFunction<'_> {
    fn n(&self) -> usize {
        self.base.n() * self.t
    }

    fn len(&self) -> usize {
        self.len
    }

    fn input(&self, row: usize) -> u128 {
        let n = self.base.n();
        self.blocks(row)
            .into_iter()
            .enumerate()
            .fold(0u128, |acc, (j, r)| acc | (self.base.input(r) << (j * n)))
    }

    fn same_label(&self, a: usize, b: usize) -> bool {
        self.blocks(a)
            .into_iter()
            .zip(self.blocks(b))
            .all(|(x, y)| self.base.same_label(x, y))
    }
}

/// `Γ^(t) = Γ1 ⊗ I^{⊗(t-1)} + I ⊗ Γ^(t-1)`, validated against the product.
pub fn compose_gamma(
    product: &ProductFunction<'_>,
    gamma1: &AdversaryMatrix,
    caps: &Caps,
) -> Result<AdversaryMatrix> {
    check_cap("matrix dimension", product.len(), caps.matrix_dim)?;
    let m = compose_matrix(gamma1.matrix(), product.t());
    AdversaryMatrix::new(product, m)
}

fn compose_matrix(g1: &SymMatrix, t: usize) -> SymMatrix {
    if t == 1 {
        return g1.clone();
    }
    let s = g1.dim();
    let rest = s.pow(t as u32 - 1);
    let left = g1.kron(&SymMatrix::identity(rest));
    let right = SymMatrix::identity(s).kron(&compose_matrix(g1, t - 1));
    left.add(&right).expect("equal dimensions")
}

/// `Σ_j I^{⊗j} ⊗ Γ1 ⊗ I^{⊗(t-1-j)}`; equal to [`compose_gamma`]'s matrix.
pub fn explicit_tensor_sum(g1: &SymMatrix, t: usize) -> SymMatrix {
    let s = g1.dim();
    let dim = s.pow(t as u32);
    let mut acc = SymMatrix::zeros(dim);
    for j in 0..t {
        let term = SymMatrix::identity(s.pow(j as u32))
            .kron(g1)
            .kron(&SymMatrix::identity(s.pow((t - 1 - j) as u32)));
        acc = acc.add(&term).expect("equal dimensions");
    }
    acc
}

/// `p^(t)_x(i) = p1_{x_block(i)}(within(i)) / t`.
pub fn compose_dual(product: &ProductFunction<'_>, p1: &DualWitness, caps: &Caps) -> Result<DualWitness> {
    p1.validate(product.base())?;
    let n = product.base().n();
    check_cap("dual witness cells", product.len().saturating_mul(n * product.t()), caps.dual_cells)?;
    let t = product.t() as f64;
    let p = (0..product.len())
        .map(|row| {
            product
                .blocks(row)
                .into_iter()
                .flat_map(|r| p1.p[r].iter().map(move |v| v / t))
                .collect()
        })
        .collect();
    Ok(DualWitness { p })
}

/// Maps a 1-based product position to `(block, within)`, both 1-based.
pub fn block_position(i: usize, n: usize) -> (usize, usize) {
    (i.div_ceil(n), (i - 1) % n + 1)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DirectSumRow {
    pub t: usize,
    pub primal: f64,
    pub dual: f64,
    pub primal_ratio: f64,
    pub dual_ratio: f64,
    pub primal_consistent: bool,
    pub dual_consistent: bool,
    pub gamma_norm: f64,
    pub max_masked_norm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DirectSumReport {
    pub rows: Vec<DirectSumRow>,
    /// Set when a cap stopped the sweep before `t_max`.
    pub stopped: Option<String>,
}

impl DirectSumReport {
    pub fn consistent(&self) -> bool {
        self.stopped.is_none() && self.rows.iter().all(|r| r.primal_consistent && r.dual_consistent)
    }
}

fn ratio_consistent(value: f64, base: f64, t: usize) -> bool {
    let expected = base * t as f64;
    if expected.is_infinite() {
        return value == expected;
    }
    (value - expected).abs() <= SCALING_TOLERANCE * expected.abs().max(f64::MIN_POSITIVE)
}

/// Computes primal and dual values of the composed witnesses for
/// `t = 1..=t_max`; a cap hit ends the sweep with a partial report.
pub fn verify_direct_sum(
    table: &FunctionTable,
    gamma1: &AdversaryMatrix,
    p1: &DualWitness,
    t_max: usize,
    caps: &Caps,
    exec: Exec,
) -> Result<DirectSumReport> {
    if t_max == 0 {
        return Err(CertifyError::InvalidArgument("t_max must be at least 1".into()));
    }
    let mut rows: Vec<DirectSumRow> = Vec::new();
    for t in 1..=t_max {
        let step = (|| {
            let product = ProductFunction::new(table, t)?;
            let gamma = compose_gamma(&product, gamma1, caps)?;
            let primal = primal_value(&product, &gamma, caps, exec)?;
            let p = compose_dual(&product, p1, caps)?;
            let dual = dual_value(&product, &p, exec)?;
            Ok::<_, CertifyError>((primal, dual))
        })();
        let (primal, dual) = match step {
            Ok(v) => v,
            Err(e @ (CertifyError::CapExceeded { .. } | CertifyError::Overflow(_))) if t > 1 => {
                return Ok(DirectSumReport {
                    rows,
                    stopped: Some(e.to_string()),
                });
            }
            Err(e) => return Err(e),
        };
        let (p_base, d_base) = rows.first().map_or((primal.primal_value, dual), |r| (r.primal, r.dual));
        rows.push(DirectSumRow {
            t,
            primal: primal.primal_value,
            dual,
            primal_ratio: primal.primal_value / p_base,
            dual_ratio: dual / d_base,
            primal_consistent: ratio_consistent(primal.primal_value, p_base, t),
            dual_consistent: ratio_consistent(dual, d_base, t),
            gamma_norm: primal.gamma_norm,
            max_masked_norm: primal.max_masked_norm,
        });
    }
    Ok(DirectSumReport { rows, stopped: None })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KronReport {
    pub norm_a: f64,
    pub norm_b: f64,
    pub norm_kron: f64,
    pub product_holds: bool,
    /// `(A ∘ D) ⊗ B == (A ⊗ B) ∘ (D ⊗ J)` when a mask `D` was supplied.
    pub mask_identity_holds: Option<bool>,
}

/// Checks `‖A ⊗ B‖ = ‖A‖ ‖B‖` within `1e-9` (relative to `max(1, ‖A ⊗ B‖)`)
/// and, given a 0/1 mask `D` for `A`, the masking identity.
pub fn kron_norm_check(a: &SymMatrix, b: &SymMatrix, mask: Option<&SymMatrix>, caps: &Caps) -> Result<KronReport> {
    check_cap("matrix dimension", a.dim().saturating_mul(b.dim()), caps.matrix_dim)?;
    let ab = a.kron(b);
    let norm_a = spectral_norm_with(a, caps.dense_eigen_dim)?;
    let norm_b = spectral_norm_with(b, caps.dense_eigen_dim)?;
    let norm_kron = spectral_norm_with(&ab, caps.dense_eigen_dim)?;
    let product_holds = (norm_kron - norm_a * norm_b).abs() <= 1e-9 * norm_kron.max(1.0);
    let mask_identity_holds = match mask {
        None => None,
        Some(d) => {
            let lhs = a.hadamard(d)?.kron(b);
            let rhs = ab.hadamard(&d.kron(&SymMatrix::ones(b.dim())))?;
            Some(lhs.max_abs_diff(&rhs)? == 0.0)
        }
    };
    Ok(KronReport {
        norm_a,
        norm_b,
        norm_kron,
        product_holds,
        mask_identity_holds,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adversary::{build_promise_gamma, build_search_gamma, hadamard_difference_norm, optimize_dual, DualBudget};

    fn caps() -> Caps {
        Caps::default()
    }

    #[test]
    fn product_rows_and_labels() {
        let (t, _) = build_search_gamma(3).unwrap();
        let p = ProductFunction::new(&t, 2).unwrap();
        assert_eq!((p.len(), p.n()), (9, 6));
        // row 5 = (1, 2): block 1 is base row 1, block 2 is base row 2
        assert_eq!(p.blocks(5), vec![1, 2]);
        assert_eq!(p.labels(5), vec![2, 3]);
        assert_eq!(p.input(5), t.input(1) | (t.input(2) << 3));
        assert!(p.same_label(4, 4));
        assert!(!p.same_label(4, 5));
        assert!(ProductFunction::new(&t, 0).is_err());
    }

    #[test]
    fn block_convention() {
        assert_eq!(block_position(1, 3), (1, 1));
        assert_eq!(block_position(3, 3), (1, 3));
        assert_eq!(block_position(4, 3), (2, 1));
        assert_eq!(block_position(9, 3), (3, 3));
    }

    #[test]
    fn recursion_matches_explicit_sum() {
        for (table, g) in [build_promise_gamma(2, &caps()).unwrap(), build_search_gamma(3).unwrap()] {
            for t in 1..=3 {
                let product = ProductFunction::new(&table, t).unwrap();
                let rec = compose_gamma(&product, &g, &caps()).unwrap();
                let explicit = explicit_tensor_sum(g.matrix(), t);
                assert_eq!(rec.matrix().max_abs_diff(&explicit).unwrap(), 0.0);
            }
        }
    }

    #[test]
    fn composed_gamma_norms() {
        let (table, g) = build_promise_gamma(2, &caps()).unwrap();
        let base = hadamard_difference_norm(&table, &g, 1, &caps()).unwrap();
        let base_max = (1..=4)
            .map(|i| hadamard_difference_norm(&table, &g, i, &caps()).unwrap())
            .fold(0.0, f64::max);
        assert!(base > 0.0);
        for (t, norm) in [(1, 2.0), (2, 4.0), (3, 6.0)] {
            let product = ProductFunction::new(&table, t).unwrap();
            let gt = compose_gamma(&product, &g, &caps()).unwrap();
            let r = primal_value(&product, &gt, &caps(), Exec::default()).unwrap();
            assert!((r.gamma_norm - norm).abs() < 1e-9);
            assert!((r.max_masked_norm - base_max).abs() < 1e-9);
        }
    }

    #[test]
    fn masked_norm_depends_on_position_mod_n() {
        let (table, g) = build_promise_gamma(2, &caps()).unwrap();
        for t in 1..=3 {
            let product = ProductFunction::new(&table, t).unwrap();
            let gt = compose_gamma(&product, &g, &caps()).unwrap();
            let n = table.n();
            for i in 1..=product.n() {
                let (_, within) = block_position(i, n);
                let here = hadamard_difference_norm(&product, &gt, i, &caps()).unwrap();
                let base = hadamard_difference_norm(&table, &g, within, &caps()).unwrap();
                assert!((here - base).abs() < 1e-9, "t={t} i={i}");
            }
        }
    }

    #[test]
    fn composed_dual_rows() {
        let (table, _) = build_search_gamma(3).unwrap();
        let product = ProductFunction::new(&table, 2).unwrap();
        let p = compose_dual(&product, &DualWitness::uniform(3, 3), &caps()).unwrap();
        p.validate(&product).unwrap();
        for row in &p.p {
            assert!(row.iter().all(|&v| (v - 1.0 / 6.0).abs() < 1e-15));
        }
        let one = ProductFunction::new(&table, 1).unwrap();
        let w = DualWitness::uniform(3, 3);
        assert_eq!(compose_dual(&one, &w, &caps()).unwrap(), w);
    }

    #[test]
    fn optimized_search_dual_doubles() {
        let (table, _) = build_search_gamma(3).unwrap();
        let opt = optimize_dual(&table, Some(2f64.sqrt()), DualBudget::default(), &caps()).unwrap();
        let product = ProductFunction::new(&table, 2).unwrap();
        let p2 = compose_dual(&product, &opt.witness, &caps()).unwrap();
        let v2 = dual_value(&product, &p2, Exec::default()).unwrap();
        assert!((v2 - 2.0 * opt.dual_value).abs() <= 1e-6 * v2);
    }

    #[test]
    fn search_primal_sequence() {
        let (table, g) = build_search_gamma(2).unwrap();
        let report = verify_direct_sum(&table, &g, &DualWitness::uniform(2, 2), 4, &caps(), Exec::default()).unwrap();
        assert!(report.consistent());
        let primal: Vec<f64> = report.rows.iter().map(|r| r.primal).collect();
        for (t, v) in primal.iter().enumerate() {
            assert!((v - (t + 1) as f64).abs() < 1e-9);
        }
    }

    #[test]
    fn partial_report_on_cap() {
        let (table, g) = build_search_gamma(3).unwrap();
        let small = Caps { matrix_dim: 9, ..Caps::default() };
        let report = verify_direct_sum(&table, &g, &DualWitness::uniform(3, 3), 3, &small, Exec::default()).unwrap();
        assert_eq!(report.rows.len(), 2);
        assert!(report.stopped.is_some());
        assert!(!report.consistent());
    }

    #[test]
    fn kron_examples() {
        let j2 = SymMatrix::ones(2);
        let r = kron_norm_check(&j2, &j2, None, &caps()).unwrap();
        assert!((r.norm_kron - 4.0).abs() < 1e-12 && r.product_holds);
        let k3 = SymMatrix::from_fn(3, |a, b| if a != b { 1.0 } else { 0.0 });
        let r = kron_norm_check(&k3, &SymMatrix::identity(3), None, &caps()).unwrap();
        assert!((r.norm_kron - 2.0).abs() < 1e-12 && r.product_holds);
        let (table, g) = build_promise_gamma(2, &caps()).unwrap();
        let d1 = SymMatrix::from_fn(4, |a, b| if table.differs_at(a, b, 1) { 1.0 } else { 0.0 });
        let r = kron_norm_check(g.matrix(), &SymMatrix::ones(4), Some(&d1), &caps()).unwrap();
        assert!((r.norm_kron - 4.0 * r.norm_a).abs() < 1e-9);
        assert_eq!(r.mask_identity_holds, Some(true));
    }
}
