use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};

use skelimg_core::ingest::select_bodies;
use skelimg_core::repr::{build_tsrji, depth_first_chain, stack};
use skelimg_core::synth::generate;
use skelimg_core::tinycnn::{init_model, softmax_cross_entropy};
use skelimg_core::{kinect25_topology, CnnConfig, EncodeConfig, SynthSpec, Tensor};

fn chain(c: &mut Criterion) {
    let topo = kinect25_topology();
    c.bench_function("depth_first_chain/kinect25", |b| {
        b.iter(|| depth_first_chain(black_box(&topo)).unwrap())
    });
}

fn encode(c: &mut Criterion) {
    let topo = kinect25_topology();
    let spec = SynthSpec {
        num_classes: 2,
        samples_per_class: 1,
        frames: 300,
        persons: 2,
        ..SynthSpec::default()
    };
    let (seq, _) = generate(&spec, &topo).unwrap().remove(0);
    let seq = select_bodies(&seq, 2).unwrap();
    let cfg = EncodeConfig::default();
    c.bench_function("tsrji_stacked/300_frames_2_persons", |b| {
        b.iter(|| stack(&build_tsrji(black_box(&seq), &topo, &cfg).unwrap()).unwrap())
    });
}

fn network(c: &mut Criterion) {
    let mut cfg = CnnConfig::new((49, 100, 12), 4);
    cfg.conv_filters = [8, 16, 32];
    cfg.hidden_units = 64;
    let mut model = init_model(&cfg).unwrap();
    let n = 32;
    let batch = Tensor::new(
        vec![n, 49, 100, 12],
        (0..n * 49 * 100 * 12).map(|i| (i % 97) as f64 / 97.0).collect(),
    )
    .unwrap();
    let labels: Vec<usize> = (0..n).map(|i| i % 4).collect();

    let mut group = c.benchmark_group("cnn_batch32_49x100x12");
    group.sample_size(10);
    group.bench_function("forward", |b| b.iter(|| model.logits(black_box(&batch)).unwrap()));
    group.bench_function("forward_backward", |b| {
        b.iter(|| {
            let fwd = model.forward(black_box(&batch), true).unwrap();
            let (_, d) = softmax_cross_entropy(&fwd.logits, &labels).unwrap();
            model.backward(&fwd, &d).unwrap()
        })
    });
    group.finish();
}

criterion_group!(benches, chain, encode, network);
criterion_main!(benches);
