use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use gwmark::laws::{MarkFunction, OffspringLaw};
use gwmark::oracle;
use gwmark::samplers::{sample_gw, sample_hat_tau, DegreeSampler, HatTauSampler, RngHandle};
use gwmark::transforms::{rizzolo_phi, SubsetSelection};
use gwmark::{Rational, Tree};

fn sampling(c: &mut Criterion) {
    let law = OffspringLaw::<f64>::binary_critical();
    let sampler = DegreeSampler::new(&law);
    let mut rng = RngHandle::new(0, 0);
    c.bench_function("sample_gw binary cap 1e4", |b| {
        b.iter(|| sample_gw(&sampler, 10_000, &mut rng))
    });

    let hat = HatTauSampler::new(&law, 10_000).unwrap();
    c.bench_function("sample_hat_tau binary cap 1e4", |b| {
        b.iter(|| sample_hat_tau(&hat, &mut rng))
    });
}

fn phi(c: &mut Criterion) {
    // complete binary tree of height 12, every other vertex marked
    let mut degrees = Vec::new();
    fn build(h: u32, out: &mut Vec<u32>) {
        if h == 0 {
            out.push(0);
        } else {
            out.push(2);
            build(h - 1, out);
            build(h - 1, out);
        }
    }
    build(12, &mut degrees);
    let tree = Tree::from_degrees(degrees).unwrap();
    let flags: Vec<bool> = (0..tree.card()).map(|i| i % 2 == 0).collect();
    c.bench_function("rizzolo_phi 8191 vertices", |b| {
        b.iter_batched(
            || SubsetSelection::from_flags(tree.clone(), flags.clone()).unwrap(),
            |sel| rizzolo_phi(&sel),
            BatchSize::SmallInput,
        )
    });
}

fn series(c: &mut Criterion) {
    let exact = OffspringLaw::<Rational>::binary_critical();
    c.bench_function("card_series exact order 256", |b| {
        b.iter(|| oracle::card_series(black_box(&exact), 256).unwrap())
    });
    let geo = OffspringLaw::<f64>::geometric(0.5, 64).unwrap();
    let half = MarkFunction::constant(0.5).unwrap();
    c.bench_function("m_series float order 512", |b| {
        b.iter(|| oracle::m_series(black_box(&geo), &half, 512).unwrap())
    });
}

criterion_group!(benches, sampling, phi, series);
criterion_main!(benches);
