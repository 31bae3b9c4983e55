//! Rayon pool against a single worker on the data-parallel kernels.
//!
//! `cargo bench -p rdmcone` compares both; with `--no-default-features` the
//! kernels are compiled sequentially and only that variant is measured.

use criterion::{criterion_group, criterion_main, Criterion};
use rdmcone::dual::{solve_dual, DualProblem};
use rdmcone::fci::fci_ground_state;
use rdmcone::hamiltonian::{assemble_reduced_hamiltonian, hubbard_chain};
use rdmcone::ConditionSet;

fn fci(c: &mut Criterion) {
    let ints = hubbard_chain(6, 1.0, 4.0, false).unwrap();
    let mut group = c.benchmark_group("fci_l6");
    group.sample_size(10);
    run(&mut group, || {
        fci_ground_state(&ints, 6, Some(0)).unwrap();
    });
    group.finish();
}

fn dual(c: &mut Criterion) {
    let ints = hubbard_chain(4, 1.0, 4.0, false).unwrap();
    let ham = assemble_reduced_hamiltonian(&ints, 4).unwrap();
    let mut p = DualProblem::new(ham, ConditionSet::DQGT);
    p.max_outer_iterations = 1;
    p.max_inner_iterations = 200;
    let mut group = c.benchmark_group("dual_dqgt_l4");
    group.sample_size(10);
    run(&mut group, || {
        solve_dual(&p).unwrap();
    });
    group.finish();
}

#[cfg(feature = "parallel")]
fn run<M: criterion::measurement::Measurement>(
    group: &mut criterion::BenchmarkGroup<'_, M>,
    f: impl Fn() + Sync,
) {
    use criterion::BenchmarkId;
    let threads = rayon::current_num_threads();
    for (name, n) in [("one_thread", 1), ("pool", threads)] {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(n).build().unwrap();
        group.bench_function(BenchmarkId::new(name, n), |b| b.iter(|| pool.install(&f)));
    }
}

#[cfg(not(feature = "parallel"))]
fn run<M: criterion::measurement::Measurement>(
    group: &mut criterion::BenchmarkGroup<'_, M>,
    f: impl Fn() + Sync,
) {
    group.bench_function("sequential", |b| b.iter(&f));
}

criterion_group!(benches, fci, dual);
criterion_main!(benches);
