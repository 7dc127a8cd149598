use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use hwisec::channel_sim::mc_ensemble;
use hwisec::core_model::Scenario;
use hwisec::Backend;

fn ensemble(c: &mut Criterion) {
    let cfg = Scenario::fig4().build().unwrap();
    let slots = [cfg.first_data_slot(), 100, 300];
    let mut group = c.benchmark_group("mc_ensemble_fig4");
    group.sample_size(10);
    for trials in [64usize, 256] {
        for (name, backend) in [
            ("sequential", Backend::Sequential),
            ("parallel", Backend::Parallel),
        ] {
            group.bench_with_input(BenchmarkId::new(name, trials), &trials, |b, &n| {
                b.iter(|| mc_ensemble(&cfg, black_box(&slots), n, 1, backend))
            });
        }
    }
    group.finish();
}

criterion_group!(benches, ensemble);
criterion_main!(benches);
