use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};

use qmarkov_core::markov::{
    tetrahedral_example_partition, tetrahedral_example_process, has_markov_order, quantum_cmi,
    tetrahedral_memory_instrument,
};
use qmarkov_core::maps::maximally_mixed;
use qmarkov_core::random::random_markovian_process;
use qmarkov_core::{FactorLabel, Instrument, InstrumentSequence, LabeledOperator, LogBase};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn tensor(c: &mut Criterion) {
    // Four qubit steps with trivial last output: 128 x 128.
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let p = random_markovian_process(4, 2, &mut rng);
    let op = p.op().clone();
    c.bench_function("partial_trace_128", |b| {
        b.iter(|| black_box(&op).partial_trace(&["s3:i", "s2:o"]).unwrap())
    });
    let big = p
        .normalized_state()
        .kron(&LabeledOperator::identity(vec![FactorLabel::new("x", 2)]).unwrap())
        .unwrap()
        .scale(0.5);
    c.bench_function("entropy_256", |b| {
        b.iter(|| black_box(&big).von_neumann_entropy(LogBase::Two).unwrap())
    });
}

fn process(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let p = random_markovian_process(3, 2, &mut rng);
    let j = Instrument::tetrahedral_povm()
        .then_prepare(&maximally_mixed(2))
        .unwrap();
    let last = Instrument::tetrahedral_povm();
    let seq = InstrumentSequence::product(&[(0, &j), (1, &j), (2, &last)]).unwrap();
    c.bench_function("born_distribution_64_outcomes", |b| {
        b.iter(|| black_box(&p).born_distribution(&seq).unwrap())
    });

    let d = tetrahedral_example_process();
    let part = tetrahedral_example_partition();
    c.bench_function("tetrahedral_example_cmi", |b| {
        b.iter(|| quantum_cmi(black_box(&d), &part, LogBase::Two).unwrap())
    });
    let mem = InstrumentSequence::single(1, &tetrahedral_memory_instrument()).unwrap();
    c.bench_function("tetrahedral_example_markov_order", |b| {
        b.iter(|| has_markov_order(black_box(&d), &part, &mem, "tetrahedral").unwrap())
    });
}

criterion_group!(benches, tensor, process);
criterion_main!(benches);
