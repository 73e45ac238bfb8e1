use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use minlift_core::admm::{admm_avg_step, rpca_problem};
use minlift_core::linalg::Blocks;
use minlift_core::problems::{gen_affine_monotone, gen_consensus, gen_rpca, Rng};
use minlift_core::scheme::eval_scheme;
use minlift_core::splitting::mt_step;
use minlift_core::SchemeMatrices;
use std::hint::black_box;

fn mt_step_consensus(c: &mut Criterion) {
    let mut g = c.benchmark_group("mt_step/consensus");
    for n in [10, 100, 1000] {
        let ops = gen_consensus(n, 1).unwrap().ops();
        let z = Blocks::from_flat(1, Rng::new(2).normal_vec(n - 1)).unwrap();
        g.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, _| {
            b.iter(|| mt_step(black_box(&z), &ops, 0.9).unwrap())
        });
    }
    g.finish();
}

fn scheme_vs_direct(c: &mut Criterion) {
    let n = 6;
    let ops = gen_affine_monotone(n, 3, 4, &[]).unwrap().ops().unwrap();
    let z = Blocks::from_flat(3, Rng::new(5).normal_vec((n - 1) * 3)).unwrap();
    let s = SchemeMatrices::minimal_lifting(n, 0.5).unwrap();
    c.bench_function("mt_step/affine n=6", |b| {
        b.iter(|| mt_step(black_box(&z), &ops, 0.5).unwrap())
    });
    c.bench_function("eval_scheme/affine n=6", |b| {
        b.iter(|| eval_scheme(&s, black_box(&z), &ops).unwrap())
    });
}

fn admm_rpca(c: &mut Criterion) {
    for size in [20, 40] {
        let inst = gen_rpca(size, size, 1).unwrap();
        let p = rpca_problem(&inst.observed, 0.25, 0.1).unwrap();
        let z = Blocks::zeros(2, size * size);
        c.bench_function(&format!("admm_avg_step/rpca {size}x{size}"), |b| {
            b.iter(|| admm_avg_step(&p, black_box(&z), 0.8).unwrap())
        });
    }
}

criterion_group!(benches, mt_step_consensus, scheme_vs_direct, admm_rpca);
criterion_main!(benches);
