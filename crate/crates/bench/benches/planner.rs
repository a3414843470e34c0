use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use footstep_bench::{first_candidates, first_qp, flat_ground};
use footstep_core::{plan, AdmmSolver, QpSolver, SolverSettings, WarmStart};

fn candidates(c: &mut Criterion) {
    let sc = flat_ground(10);
    c.bench_function("select candidates N=10 K=20", |b| b.iter(|| first_candidates(&sc)));
}

fn single_qp(c: &mut Criterion) {
    let sc = flat_ground(10);
    let qp = first_qp(&sc);
    let solver = AdmmSolver::new(SolverSettings::default());
    let cold = solver.solve(&qp.problem, None).expect("solve");
    let warm = WarmStart { x: cold.x.clone(), y: Some(cold.y.clone()) };
    eprintln!("first-pass qp: {} iterations cold", cold.iterations);

    let mut group = c.benchmark_group("qp N=10 K=20");
    group.bench_function("cold", |b| b.iter(|| solver.solve(&qp.problem, None).unwrap()));
    group.bench_function("warm", |b| b.iter(|| solver.solve(&qp.problem, Some(&warm)).unwrap()));
    group.finish();
}

fn full_plan(c: &mut Criterion) {
    let mut group = c.benchmark_group("plan flat ground");
    group.sample_size(10);
    for n in [10usize, 20, 30] {
        let sc = flat_ground(n);
        group.bench_with_input(BenchmarkId::from_parameter(n), &sc, |b, sc| {
            b.iter(|| plan(&sc.env, &sc.path, &sc.config).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, candidates, single_qp, full_plan);
criterion_main!(benches);
