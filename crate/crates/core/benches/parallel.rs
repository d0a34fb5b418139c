//! Sequential vs parallel execution of the data-parallel kernels.
//!
//! Without the `parallel` feature both variants run the same sequential code.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use alphaspec::spectral::CovarianceAccumulator;
use alphaspec::synth::{self, Design, SynthConfig};
use alphaspec::{Execution, FeatureMatrix};

const MODES: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

fn features(n: usize, d: usize) -> FeatureMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    FeatureMatrix::new(n, d, (0..n * d).map(|_| rng.sample(StandardNormal)).collect()).unwrap()
}

fn covariance(c: &mut Criterion) {
    let mut group = c.benchmark_group("accumulate_batch");
    for d in [64, 256] {
        let batch = features(2048, d);
        group.throughput(Throughput::Elements(2048));
        for (name, exec) in MODES {
            group.bench_with_input(BenchmarkId::new(name, d), &batch, |b, batch| {
                b.iter(|| {
                    let mut acc = CovarianceAccumulator::new(d).unwrap().with_execution(exec);
                    acc.accumulate_batch(batch).unwrap();
                    acc
                })
            });
        }
    }
    group.finish();
}

fn monte_carlo(c: &mut Criterion) {
    let config = SynthConfig {
        n: 50,
        d: 200,
        ..SynthConfig::default()
    };
    let data = synth::sample_dataset(&config).unwrap();
    let psi = DVector::zeros(200);
    let mut group = c.benchmark_group("monte_carlo_excess_risk");
    group.sample_size(20);
    for (name, exec) in MODES {
        group.bench_function(name, |b| {
            b.iter(|| synth::monte_carlo_excess_risk(&psi, &data, 50_000, 3, exec).unwrap())
        });
    }
    group.finish();
}

fn scaling(c: &mut Criterion) {
    let base = SynthConfig {
        d: 200,
        max_steps: 1_000_000,
        design: Design::Orthogonalized,
        ..SynthConfig::default()
    };
    let mut group = c.benchmark_group("scaling_experiment");
    group.sample_size(10);
    for (name, exec) in MODES {
        group.bench_function(name, |b| {
            b.iter(|| synth::scaling_experiment_with(exec, &[0.0, 1.0, 2.0], &[25, 50, 100], &[0, 1], &base).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, covariance, monte_carlo, scaling);
criterion_main!(benches);
