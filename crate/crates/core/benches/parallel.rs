use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use latchflow::dsp::{resample_3to1, resample_3to1_sequential, AudioBuffer, LogMelConfig, LogMelExtractor};
use latchflow::perception::{identify, identify_sequential, quantize_tensor, quantize_tensor_sequential, FaceEmbedding, Gallery, QuantParams};
use latchflow::robotics::{scan_to_points, scan_to_points_sequential, BeamMode, RawEcho, SweepConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn noise(n: usize, rate: u32, seed: u64) -> AudioBuffer {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    AudioBuffer::new((0..n).map(|_| rng.random_range(-0.5..0.5)).collect(), rate)
}

fn dsp(c: &mut Criterion) {
    let mut g = c.benchmark_group("resample_3to1");
    let x = noise(48_000 * 4, 48_000, 1);
    g.bench_function("parallel", |b| b.iter(|| resample_3to1(&x).unwrap()));
    g.bench_function("sequential", |b| b.iter(|| resample_3to1_sequential(&x).unwrap()));
    g.finish();

    let ex = LogMelExtractor::new(LogMelConfig::default()).unwrap();
    let clips: Vec<AudioBuffer> = (0..32).map(|i| noise(16_000, 16_000, i)).collect();
    let mut g = c.benchmark_group("logmel_batch_32x1s");
    g.bench_function("parallel", |b| b.iter(|| ex.compute_batch(&clips).unwrap()));
    g.bench_function("sequential", |b| b.iter(|| ex.compute_batch_sequential(&clips).unwrap()));
    g.finish();
}

fn perception(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut emb = || FaceEmbedding::new((0..128).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap();
    let mut gallery = Gallery::new();
    for i in 0..20_000 {
        gallery.add(format!("id{i}"), emb());
    }
    let q = emb();
    let mut g = c.benchmark_group("identify_20k");
    g.bench_function("parallel", |b| b.iter(|| identify(&q, &gallery, 1.0).unwrap()));
    g.bench_function("sequential", |b| b.iter(|| identify_sequential(&q, &gallery, 1.0).unwrap()));
    g.finish();

    let p = QuantParams::symmetric_for_range(1.0).unwrap();
    let xs = noise(1 << 20, 16_000, 3).samples;
    let mut g = c.benchmark_group("quantize_1M");
    g.bench_with_input(BenchmarkId::new("parallel", xs.len()), &xs, |b, xs| b.iter(|| quantize_tensor(xs, &p)));
    g.bench_with_input(BenchmarkId::new("sequential", xs.len()), &xs, |b, xs| {
        b.iter(|| quantize_tensor_sequential(xs, &p))
    });
    g.finish();
}

fn robotics(c: &mut Criterion) {
    let cfg = SweepConfig::default();
    let echoes: Vec<RawEcho> = (0..100_000)
        .map(|i| RawEcho {
            theta_deg: (i % 121) as f64,
            tof_s: Some((i % 97) as f64 * 1.5e-4),
        })
        .collect();
    let mut g = c.benchmark_group("scan_100k");
    g.bench_function("parallel", |b| b.iter(|| scan_to_points(&echoes, &cfg, 0.05, BeamMode::Sine).unwrap()));
    g.bench_function("sequential", |b| {
        b.iter(|| scan_to_points_sequential(&echoes, &cfg, 0.05, BeamMode::Sine).unwrap())
    });
    g.finish();
}

criterion_group!(benches, dsp, perception, robotics);
criterion_main!(benches);
