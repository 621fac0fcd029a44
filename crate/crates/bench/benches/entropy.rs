use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};

use pmentropy::cone::{derive_facets, CausalDag};
use pmentropy::entropy_lp::{message_polytope, min_entropy_witness, WitnessEntropySolver};
use pmentropy::rational::{int, rat};
use pmentropy::strategies::{enumerate_strategies, EnumerationOptions};
use pmentropy::{make_in, make_r4, Scenario};

fn polytope(c: &mut Criterion) {
    let w = make_in(3).unwrap();
    c.bench_function("message_polytope I3=4 d=3", |b| b.iter(|| message_polytope(&w, black_box(&int(4)), 3).unwrap()));
}

fn min_entropy(c: &mut Criterion) {
    let mut g = c.benchmark_group("min_entropy_witness");
    for n in [3, 4] {
        let w = make_in(n).unwrap();
        let v = w.bound(n - 1).unwrap() + rat(1, 2);
        g.bench_with_input(BenchmarkId::new("I_n", n), &v, |b, v| b.iter(|| min_entropy_witness(&w, v, n).unwrap()));
    }
    let r4 = make_r4().unwrap();
    g.bench_function("R4=3", |b| b.iter(|| min_entropy_witness(&r4, &int(3), 4).unwrap()));
    g.finish();

    // Solving against precomputed columns, as the curve command does.
    let w = make_in(4).unwrap();
    let solver = WitnessEntropySolver::new(&w, 4).unwrap();
    c.bench_function("solver I4=7 reused columns", |b| b.iter(|| solver.solve(black_box(&int(7))).unwrap()));
}

fn strategies(c: &mut Criterion) {
    let s = Scenario::new(3, 2, 2).unwrap();
    let opts = EnumerationOptions { dedup: true, ..Default::default() };
    c.bench_function("enumerate n=3 l=2 d=3 dedup", |b| b.iter(|| enumerate_strategies(&s, 3, &opts).unwrap()));
}

fn facets(c: &mut Criterion) {
    let dag = CausalDag::prepare_measure();
    c.bench_function("facets fig1b", |b| b.iter(|| derive_facets(&dag).unwrap()));
    let mut g = c.benchmark_group("facets slow");
    g.sample_size(10);
    let dag = CausalDag::two_measurements();
    g.bench_function("fig1c", |b| b.iter(|| derive_facets(&dag).unwrap()));
    g.finish();
}

criterion_group!(benches, polytope, min_entropy, strategies, facets);
criterion_main!(benches);
