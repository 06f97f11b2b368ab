use proptest::prelude::*;

use certify_core::adversary::{
    dual_value, hadamard_difference_norm, primal_value, AdversaryMatrix, DualWitness, FunctionTable, LabeledInputs,
};
use certify_core::cert_sim::{random_input_with_value, simulate_zero_error_wrapper, CostModel};
use certify_core::direct_sum::{compose_dual, compose_gamma, ProductFunction};
use certify_core::formula::is_certificate;
use certify_core::linalg::{dense_norm, power_iteration, spectral_norm, SymMatrix};
use certify_core::stats::trial_rng;
use certify_core::{Caps, Exec, FormulaShape};

/// A random function on `n` bits over a random subset of inputs with at
/// least two labels.
fn table_strategy() -> impl Strategy<Value = FunctionTable> {
    (2usize..=4)
        .prop_flat_map(|n| {
            let all = 1u32 << n;
            (Just(n), proptest::sample::subsequence((0..all).collect::<Vec<_>>(), 2..=all as usize))
        })
        .prop_flat_map(|(n, inputs)| {
            let len = inputs.len();
            (Just(n), Just(inputs), proptest::collection::vec(0u32..3, len))
        })
        .prop_filter_map("needs two labels", |(n, inputs, mut labels)| {
            if labels.iter().all(|&l| l == labels[0]) {
                labels[0] += 1;
            }
            let rows = inputs.into_iter().map(u128::from).zip(labels).collect();
            FunctionTable::new(n, rows).ok()
        })
}

fn gamma_for(table: &FunctionTable, weights: &[f64]) -> Option<AdversaryMatrix> {
    let len = table.len();
    let mut w = weights.iter().cycle();
    let mut m = SymMatrix::zeros(len);
    for a in 0..len {
        for b in (a + 1)..len {
            let v = *w.next().unwrap();
            if !table.same_label(a, b) {
                m.set(a, b, v);
                m.set(b, a, v);
            }
        }
    }
    AdversaryMatrix::new(table, m).ok()
}

fn witness_for(table: &FunctionTable, raw: &[f64]) -> DualWitness {
    let n = table.n();
    let mut it = raw.iter().cycle();
    let p = (0..table.len())
        .map(|_| {
            let row: Vec<f64> = (0..n).map(|_| *it.next().unwrap() + 1e-3).collect();
            let s: f64 = row.iter().sum();
            row.into_iter().map(|v| v / s).collect()
        })
        .collect();
    DualWitness { p }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn weak_duality(
        table in table_strategy(),
        weights in proptest::collection::vec(0.0f64..1.0, 1..40),
        raw in proptest::collection::vec(0.0f64..1.0, 1..40),
    ) {
        let caps = Caps::default();
        if let Some(gamma) = gamma_for(&table, &weights) {
            let primal = primal_value(&table, &gamma, &caps, Exec::default()).unwrap();
            let dual = dual_value(&table, &witness_for(&table, &raw), Exec::default()).unwrap();
            prop_assert!(primal.primal_value <= dual + 1e-8);
            for (i, m) in primal.masked_norms.iter().enumerate() {
                prop_assert!(*m <= primal.gamma_norm + 1e-9, "position {}", i + 1);
            }
            for c in [0.5, 3.0, 10.0] {
                let scaled = primal_value(&table, &gamma.scaled(c).unwrap(), &caps, Exec::default()).unwrap();
                prop_assert!((scaled.primal_value - primal.primal_value).abs() <= 1e-10 * primal.primal_value.max(1.0));
            }
        }
    }

    #[test]
    fn product_witnesses_scale(
        table in table_strategy(),
        weights in proptest::collection::vec(0.0f64..1.0, 1..40),
        raw in proptest::collection::vec(0.0f64..1.0, 1..40),
    ) {
        let caps = Caps::default();
        prop_assume!(table.len() <= 8);
        if let Some(gamma) = gamma_for(&table, &weights) {
            let p1 = witness_for(&table, &raw);
            let base_primal = primal_value(&table, &gamma, &caps, Exec::default()).unwrap();
            let base_dual = dual_value(&table, &p1, Exec::default()).unwrap();
            let product = ProductFunction::new(&table, 2).unwrap();
            let g2 = compose_gamma(&product, &gamma, &caps).unwrap();
            let p2 = compose_dual(&product, &p1, &caps).unwrap();
            let primal = primal_value(&product, &g2, &caps, Exec::default()).unwrap();
            let dual = dual_value(&product, &p2, Exec::default()).unwrap();
            prop_assert!((primal.gamma_norm - 2.0 * base_primal.gamma_norm).abs() <= 1e-9 * primal.gamma_norm.max(1.0));
            prop_assert!((primal.max_masked_norm - base_primal.max_masked_norm).abs() <= 1e-9 * primal.max_masked_norm.max(1.0));
            if base_dual.is_finite() {
                prop_assert!((dual - 2.0 * base_dual).abs() <= 1e-9 * dual);
            } else {
                prop_assert!(dual.is_infinite());
            }
            // weak duality on the product
            prop_assert!(dual - primal.primal_value + 1e-6 >= 0.0);
        }
    }

    #[test]
    fn norm_paths_agree(entries in proptest::collection::vec(-2.0f64..2.0, 36)) {
        let m = SymMatrix::from_fn(6, |i, j| entries[i.min(j) * 6 + i.max(j)]);
        let dense = dense_norm(&m);
        let power = power_iteration(&m, 1e-13, 200_000);
        let both = spectral_norm(&m).unwrap();
        prop_assert!((both - dense).abs() <= 1e-9 * dense.max(1.0));
        if power.converged {
            prop_assert!((power.value - dense).abs() <= 1e-6 * dense.max(1.0));
        }
    }

    #[test]
    fn masked_norms_by_definition(table in table_strategy(), weights in proptest::collection::vec(0.0f64..1.0, 1..40)) {
        let caps = Caps::default();
        if let Some(gamma) = gamma_for(&table, &weights) {
            for i in 1..=table.n() {
                let explicit = SymMatrix::from_fn(table.len(), |a, b| {
                    let bit = ((table.input(a) ^ table.input(b)) >> (i - 1)) & 1;
                    gamma.matrix().get(a, b) * bit as f64
                });
                let v = hadamard_difference_norm(&table, &gamma, i, &caps).unwrap();
                prop_assert!((v - dense_norm(&explicit)).abs() <= 1e-9 * v.max(1.0));
            }
        }
    }

    #[test]
    fn wrapper_certificates_are_correct(
        dk in prop_oneof![Just((2usize, 2u32)), Just((2, 3)), Just((3, 2)), Just((2, 4)), Just((4, 2))],
        b in any::<bool>(),
        eps in 0.0f64..0.2,
        seed in any::<u64>(),
    ) {
        let shape = FormulaShape::new(dk.0, dk.1).unwrap();
        let mut rng = trial_rng(seed, 0);
        let x = random_input_with_value(&shape, b, &mut rng);
        let model = CostModel { eval_error: eps, ..CostModel::default() };
        let run = simulate_zero_error_wrapper(&shape, &x, b, &model, &Caps::default(), &mut rng).unwrap();
        prop_assert!(is_certificate(&shape, &run.certificate.indices, &x).unwrap());
        prop_assert!(run.queries >= 0.0);
    }
}
