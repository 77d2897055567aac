//! Benchmarks for the pipeline stages: frame transport, finite sections,
//! detection, and Newton branch solves.

use criterion::{criterion_group, criterion_main, BatchSize, Criterion};

use hombif_core::{
    branch_solve, catalog, crossing_scan, detect, finite_section, isolate_crossings,
    w1_with_refinement, BundleSide, JumpSystem, MatrixLoop,
};

fn bench_transport(c: &mut Criterion) {
    let family = catalog("paper_example_s7").unwrap();
    c.bench_function("transport_w1_k64", |b| {
        b.iter_batched(
            || MatrixLoop::sample(&family.plus_loop, 64).unwrap(),
            |ml| w1_with_refinement(&ml, BundleSide::Stable).unwrap(),
            BatchSize::SmallInput,
        )
    });
}

fn bench_finite_section(c: &mut Criterion) {
    let family = catalog("paper_example_s7").unwrap();
    c.bench_function("finite_section_sigma_min_n20", |b| {
        b.iter(|| {
            let m = finite_section(&family, 1.0, 20, 20).unwrap();
            hombif_core::linalg::min_singular_value(&m).unwrap()
        })
    });
}

fn bench_detect(c: &mut Criterion) {
    let family = catalog("paper_example_s7").unwrap();
    c.bench_function("detect_k64", |b| {
        b.iter(|| detect(&family, 64, 0.0).unwrap())
    });
}

fn bench_branch_solve(c: &mut Criterion) {
    let family = catalog("paper_example_s7_cubic").unwrap();
    let jump = JumpSystem::from_family(&family, 64).unwrap();
    let scan = crossing_scan(&jump, 0.0, 64).unwrap();
    let located = isolate_crossings(&jump, &scan).unwrap();
    c.bench_function("branch_solve_eps1e3_n40", |b| {
        b.iter(|| branch_solve(&family, &located[0], 1e-3, 40, 40).unwrap())
    });
}

criterion_group!(
    benches,
    bench_transport,
    bench_finite_section,
    bench_detect,
    bench_branch_solve
);
criterion_main!(benches);
