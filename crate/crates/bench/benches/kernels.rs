use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use synesthete_bench::{encoder_net, gaussian_batch, gaussian_vec, melodies};
use synesthete_core::melody::{parse_midi, quantize, write_midi};
use synesthete_core::{image_to_melody, melody_to_image, slerp, Tensor2};

fn codec(c: &mut Criterion) {
    let grids = melodies(16, 16);
    let images: Vec<_> = grids.iter().map(melody_to_image).collect();
    c.bench_function("codec/melody_to_image_16bar", |b| {
        b.iter(|| {
            for g in &grids {
                black_box(melody_to_image(black_box(g)));
            }
        })
    });
    c.bench_function("codec/image_to_melody_16bar", |b| {
        b.iter(|| {
            for i in &images {
                black_box(image_to_melody(black_box(i), 16).unwrap());
            }
        })
    });
}

fn midi(c: &mut Criterion) {
    let grids = melodies(16, 16);
    let files: Vec<_> = grids.iter().map(write_midi).collect();
    c.bench_function("midi/write_16bar", |b| {
        b.iter(|| grids.iter().map(|g| write_midi(black_box(g)).len()).sum::<usize>())
    });
    c.bench_function("midi/parse_quantize_16bar", |b| {
        b.iter(|| {
            for f in &files {
                let m = parse_midi(black_box(f)).unwrap();
                black_box(quantize(&m.events, m.ticks_per_quarter, 16).unwrap());
            }
        })
    });
}

fn dense(c: &mut Criterion) {
    // Melody encoder shape: 32 steps x 50 tokens in, 2 x 32 latent out.
    let net = encoder_net(1600, 512, 64);
    let x = gaussian_batch(32, 1600);
    c.bench_function("dense/forward_batch32", |b| {
        b.iter_batched(|| x.clone(), |x| net.forward_batch(x).unwrap(), BatchSize::LargeInput)
    });
    let cache = net.forward_batch(x.clone()).unwrap();
    let d_out = Tensor2::from_fn(32, 64, |r, c| ((r + c) % 7) as f32 * 0.01);
    c.bench_function("dense/backward_batch32", |b| {
        b.iter(|| net.backward(black_box(&cache), black_box(&d_out)).unwrap())
    });
}

fn interpolation(c: &mut Criterion) {
    let (a, b) = (gaussian_vec(32, 1), gaussian_vec(32, 2));
    c.bench_function("slerp/d32_864_frames", |bench| {
        bench.iter(|| {
            (0..864)
                .map(|j| slerp(black_box(&a), black_box(&b), j as f64 / 863.0).unwrap()[0])
                .sum::<f32>()
        })
    });
}

criterion_group!(benches, codec, midi, dense, interpolation);
criterion_main!(benches);
