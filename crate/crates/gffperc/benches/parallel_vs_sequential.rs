use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use gffperc::gff::Sampler;
use gffperc::lattice::{Region, VertexSet};
use gffperc::observables::{decay_curves, origin, CapacityCache, Ensemble};
use gffperc::par::{self, Execution};
use gffperc::potential::{capacity_mc, FreeGreen};
use std::hint::black_box;

const MODES: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

fn sampling(c: &mut Criterion) {
    let sampler = Sampler::new(&Region::centered(3, 15).unwrap());
    let mut g = c.benchmark_group("sample_64_fields_15");
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| black_box(par::map(exec, 64, |i| sampler.sample(1, i as u64).values[0])))
        });
    }
    g.finish();
}

fn walks(c: &mut Criterion) {
    let set = VertexSet::from_region(&Region::cube(3, 0, 2).unwrap());
    let mut g = c.benchmark_group("capacity_mc_cube2");
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| black_box(capacity_mc(&set, 500, 10.0, 7, exec).unwrap().estimate))
        });
    }
    g.finish();
}

fn decay(c: &mut Criterion) {
    let green = FreeGreen::new(3, 1e-10).unwrap();
    let caps = CapacityCache::new(&green);
    let e = Ensemble { d: 3, side: 11, margin: 1, samples: 256, seed: 3 };
    let mut g = c.benchmark_group("decay_256_samples_11");
    g.sample_size(10);
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| black_box(decay_curves(&[-1.0], 6, &origin(3), &e, &caps, exec, None).unwrap()[0].infinite))
        });
    }
    g.finish();
}

criterion_group!(benches, sampling, walks, decay);
criterion_main!(benches);
