use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;
use trsqp_bench::{dataset, short_config, trs_instance};
use trsqp_core::libsvm::write_libsvm_string;
use trsqp_core::trsub::{solve_tangential, DEFAULT_TOL};
use trsqp_core::{
    builtin_names, factorize, make_hs_problem, parse_libsvm_str, run, run_baseline, BaselineConfig, BetaSchedule, HessianKind, TrsMethod,
};

fn tangential(c: &mut Criterion) {
    let mut group = c.benchmark_group("tangential");
    for d in [4, 16, 64] {
        let (h, g, r) = trs_instance(d);
        for method in [TrsMethod::Cauchy, TrsMethod::Dogleg, TrsMethod::Exact] {
            group.bench_with_input(BenchmarkId::new(format!("{method:?}"), d), &d, |b, _| {
                b.iter(|| solve_tangential(&h, black_box(&g), r, method, DEFAULT_TOL).unwrap())
            });
        }
    }
    group.finish();
}

fn factorization(c: &mut Criterion) {
    let mut group = c.benchmark_group("factorize");
    for name in builtin_names() {
        let p = make_hs_problem(name).unwrap();
        let jac = p.jacobian(&p.initial_point());
        group.bench_function(name, |b| b.iter(|| factorize(black_box(jac.clone())).unwrap()));
    }
    group.finish();
}

// 200 iterations including the one-off Lipschitz probing
fn short_runs(c: &mut Criterion) {
    let mut group = c.benchmark_group("run_200");
    group.sample_size(20);
    for name in ["HS40", "BT5", "QUAD6"] {
        let p = make_hs_problem(name).unwrap();
        for kind in HessianKind::ALL {
            let (noise, config) = short_config(kind, 200);
            group.bench_function(format!("{name}/{kind}"), |b| b.iter(|| run(p.as_ref(), &noise, &config).unwrap()));
        }
        let (noise, _) = short_config(HessianKind::Id, 200);
        let config = BaselineConfig {
            max_iter: 200,
            kkt_tol: 0.0,
            beta: BetaSchedule::Constant(0.1),
            ..Default::default()
        };
        group.bench_function(format!("{name}/l1"), |b| b.iter(|| run_baseline(p.as_ref(), &noise, &config).unwrap()));
    }
    group.finish();
}

fn libsvm(c: &mut Criterion) {
    let text = write_libsvm_string(&dataset(2000, 50));
    c.bench_function("parse_libsvm_2000x50", |b| b.iter(|| parse_libsvm_str(black_box(&text), None).unwrap()));
}

criterion_group!(benches, tangential, factorization, short_runs, libsvm);
criterion_main!(benches);
