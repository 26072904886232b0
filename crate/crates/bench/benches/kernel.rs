use criterion::{criterion_group, criterion_main, Criterion};
use polybubble::radial::{polyharmonic_constant, verify_bubble_pde};
use std::hint::black_box;

fn bubble_equation(c: &mut Criterion) {
    let mut g = c.benchmark_group("bubble equation");
    for (m, n) in [(1u32, 5u32), (2, 7), (3, 9), (2, 10)] {
        g.bench_function(format!("m={m} N={n}"), |b| b.iter(|| verify_bubble_pde(black_box(m), black_box(n)).unwrap()));
    }
    g.finish();
}

fn constants(c: &mut Criterion) {
    c.bench_function("c'_4 at N=15", |b| b.iter(|| polyharmonic_constant(black_box(4), black_box(15)).unwrap()));
}

criterion_group!(benches, bubble_equation, constants);
criterion_main!(benches);
