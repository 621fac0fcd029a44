use criterion::{criterion_group, criterion_main, Criterion};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use pmentropy::quantum::{
    ensemble_entropy, max_witness_given_entropy, optimal_witness_value, random_unitary, CMatrix, QuantumEnsemble,
    QuantumOptions,
};
use pmentropy::make_in;

fn random_pure(n: usize, d: usize, rng: &mut ChaCha8Rng) -> QuantumEnsemble {
    let vectors: Vec<Vec<_>> = (0..n)
        .map(|_| (0..d).map(|_| z(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect())
        .collect();
    QuantumEnsemble::from_pure(&vectors, vec![1.0 / n as f64; n], false).unwrap()
}

fn z(re: f64, im: f64) -> pmentropy::quantum::Complex {
    pmentropy::quantum::Complex::new(re, im)
}

fn evaluation(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let w = make_in(4).unwrap();
    for d in [2, 4] {
        let e = random_pure(4, d, &mut rng);
        c.bench_function(&format!("optimal_witness_value I4 d={d}"), |b| b.iter(|| optimal_witness_value(&e, &w).unwrap()));
        c.bench_function(&format!("ensemble_entropy d={d}"), |b| b.iter(|| ensemble_entropy(&e).unwrap()));
    }
    let u: CMatrix = random_unitary(4, &mut rng);
    c.bench_function("hermitian eigenvalues 4x4", |b| b.iter(|| u.mul(&u.adjoint()).hermitian_eigenvalues()));
}

fn optimizer(c: &mut Criterion) {
    let w = make_in(3).unwrap();
    let opts = QuantumOptions { restarts: 4, max_evals: 1000, ..Default::default() };
    let mut g = c.benchmark_group("optimizer");
    g.sample_size(10);
    g.bench_function("I3 d=2 s=0.5, 4 restarts", |b| b.iter(|| max_witness_given_entropy(&w, 2, 0.5, &opts).unwrap()));
    g.finish();
}

criterion_group!(benches, evaluation, optimizer);
criterion_main!(benches);
