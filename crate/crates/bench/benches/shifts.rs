use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use vbshift::{
    bs_shift, coupling_table, displacement_oracle, find_resonance, resolvent::default_k_max, HamiltonianFamily,
    LdParam, SidebandId, TrapParams,
};

fn params(rabi: f64, eta: f64) -> TrapParams {
    TrapParams::dimensionless(rabi, LdParam::new(eta).unwrap(), 0.0).unwrap()
}

fn fock(c: &mut Criterion) {
    let eta = LdParam::new(0.3).unwrap();
    c.bench_function("coupling_table_n80", |b| b.iter(|| coupling_table(black_box(eta), 80).unwrap()));
    c.bench_function("displacement_oracle_n20", |b| b.iter(|| displacement_oracle(black_box(eta), 20).unwrap()));
}

fn perturbative(c: &mut Criterion) {
    let p = params(0.01, 0.3);
    let sb = SidebandId::new(1, 2);
    c.bench_function("bs_shift_1_2", |b| b.iter(|| bs_shift(black_box(sb), &p, default_k_max(sb)).unwrap()));
}

fn exact(c: &mut Criterion) {
    let p = params(0.01, 0.1);
    let fam = HamiltonianFamily::new(&p, 40).unwrap();
    c.bench_function("real_hamiltonian_n40", |b| b.iter(|| fam.real_at(black_box(1.0))));

    let mut group = c.benchmark_group("resonance");
    group.sample_size(10);
    group.bench_function("find_resonance_0_1", |b| {
        b.iter(|| find_resonance(black_box(SidebandId::new(0, 1)), &p, None).unwrap())
    });
    group.finish();
}

criterion_group!(benches, fock, perturbative, exact);
criterion_main!(benches);
