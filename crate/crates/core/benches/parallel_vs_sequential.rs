use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use certify_core::adversary::{build_promise_gamma, dual_value, primal_value, DualWitness, LabeledInputs};
use certify_core::cert_sim::{simulate_batch, CostModel, InputSource};
use certify_core::classical_eval::{monte_carlo, worst_case_expected};
use certify_core::{Caps, Exec, FormulaShape};

fn modes() -> Vec<(&'static str, Exec)> {
    vec![
        ("sequential", Exec::Sequential),
        #[cfg(feature = "parallel")]
        ("parallel", Exec::Parallel),
    ]
}

fn classical(c: &mut Criterion) {
    let caps = Caps::default();
    let shape = FormulaShape::new(2, 10).unwrap();
    let (x, _) = worst_case_expected(&shape, &caps).unwrap();
    let mut group = c.benchmark_group("classical_monte_carlo_2x10");
    for (name, exec) in modes() {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| monte_carlo(&shape, &x, 4000, 1, exec).unwrap())
        });
    }
    group.finish();
}

fn wrapper(c: &mut Criterion) {
    let caps = Caps::default();
    let shape = FormulaShape::new(3, 4).unwrap();
    let model = CostModel::default();
    let mut group = c.benchmark_group("wrapper_batch_3x4");
    for (name, exec) in modes() {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| simulate_batch(&shape, &InputSource::RandomPerTrial, false, &model, 2000, 1, &caps, exec).unwrap())
        });
    }
    group.finish();
}

fn adversary(c: &mut Criterion) {
    let caps = Caps::default();
    let (table, gamma) = build_promise_gamma(4, &caps).unwrap();
    let witness = DualWitness::uniform(table.len(), table.n());
    let mut group = c.benchmark_group("promise_d4");
    group.sample_size(20);
    for (name, exec) in modes() {
        group.bench_function(BenchmarkId::new("dual_value", name), |b| {
            b.iter(|| dual_value(&table, &witness, exec).unwrap())
        });
        group.bench_function(BenchmarkId::new("primal_value", name), |b| {
            b.iter(|| primal_value(&table, &gamma, &caps, exec).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, classical, wrapper, adversary);
criterion_main!(benches);
