//! Sequential vs parallel throughput of the per-example gradient loop that
//! dominates training, and of validation scoring.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use ndarray::{Array2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::hint::black_box;

use stancefuse::corpus::StanceLabel;
use stancefuse::exec::Execution;
use stancefuse::model::{EncoderOutput, FusionConfig, FusionKind, StanceModel};

const DIM: usize = 64;

fn batch(n: usize, seed: u64) -> Vec<(EncoderOutput, EncoderOutput, StanceLabel)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut output = |rows: usize, rng: &mut ChaCha8Rng| {
        let seq = Array2::from_shape_fn((rows, DIM), |_| rng.random_range(-1.0..1.0));
        let pooled = seq.mean_axis(Axis(0)).unwrap();
        EncoderOutput::new(seq, pooled, vec![true; rows]).unwrap()
    };
    (0..n)
        .map(|i| (output(32, &mut rng), output(48, &mut rng), StanceLabel::ALL[i % 2]))
        .collect()
}

fn gradients(c: &mut Criterion) {
    let examples = batch(64, 1);
    let modes: &[(&str, Execution)] = if Execution::parallel_available() {
        &[("sequential", Execution::Sequential), ("parallel", Execution::Parallel)]
    } else {
        &[("sequential", Execution::Sequential)]
    };
    let mut group = c.benchmark_group("loss_and_grad_x64");
    group.sample_size(10);
    for kind in FusionKind::ALL {
        let model = StanceModel::new(FusionConfig::new(kind, DIM).with_heads(4), DIM, DIM, 3).unwrap();
        for &(name, exec) in modes {
            group.bench_with_input(BenchmarkId::new(kind.as_str(), name), &exec, |b, &exec| {
                b.iter(|| {
                    exec.map_indexed(&examples, |k, (t, v, gold)| {
                        let mut rng = ChaCha8Rng::seed_from_u64(k as u64);
                        model.loss_and_grad(t, v, *gold, Some(&mut rng)).unwrap().0
                    })
                })
            });
        }
    }
    group.finish();

    let mut group = c.benchmark_group("predict_x64");
    let model = StanceModel::new(FusionConfig::new(FusionKind::ALL[2], DIM).with_heads(4), DIM, DIM, 3).unwrap();
    for &(name, exec) in modes {
        group.bench_function(name, |b| {
            b.iter(|| exec.map(&examples, |(t, v, _)| black_box(model.predict(t, v).unwrap().prob_support)))
        });
    }
    group.finish();
}

criterion_group!(benches, gradients);
criterion_main!(benches);
