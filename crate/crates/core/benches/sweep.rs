use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use tackroute::io::presets::test2_on;
use tackroute::{Execution, Scheme, SolverConfig};

fn sweep(c: &mut Criterion) {
    let mut group = c.benchmark_group("bellman_update");
    group.sample_size(20);
    for dx in [0.1, 0.05] {
        let s = test2_on(0.15, 0.05, dx, 0.1);
        let scheme = Scheme::new(&s, &SolverConfig::default());
        let v = scheme.initial_field();
        for (name, exec) in [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)] {
            group.bench_with_input(BenchmarkId::new(name, dx), &v, |b, v| b.iter(|| scheme.bellman_update(v, exec)));
        }
    }
    group.finish();
}

criterion_group!(benches, sweep);
criterion_main!(benches);
