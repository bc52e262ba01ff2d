mod common;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use qmarkov_core::markov::{
    tetrahedral_example_partition, tetrahedral_example_process, cmi_nonmonotonicity_demo, demo_instruments,
    has_markov_order, quantum_cmi,
};
use qmarkov_core::random::{random_channel, random_dilation_process, random_markovian_process};
use qmarkov_core::{
    BlockPartition, CpMap, Instrument, InstrumentSequence, LabeledOperator, LogBase, ProcessTensor,
};

fn library_verdicts(p: &ProcessTensor) -> Vec<(String, bool)> {
    let part = BlockPartition::new(3, 1, 2).unwrap();
    common::single_step_library()
        .iter()
        .map(|(name, j)| {
            let seq = InstrumentSequence::single(1, j).unwrap();
            (name.clone(), has_markov_order(p, &part, &seq, name).unwrap().holds)
        })
        .collect()
}

fn distance_to_markovian_part(p: &ProcessTensor) -> f64 {
    let m = p.markovian_part().unwrap();
    p.op().sub(m.op()).unwrap().trace_norm() / p.op().trace().re
}

#[test]
fn markovian_processes_pass_every_library_instrument() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..10 {
        let p = random_markovian_process(3, 2, &mut rng);
        assert!(distance_to_markovian_part(&p) < 1e-9);
        assert!(library_verdicts(&p).iter().all(|(_, ok)| *ok));
    }
}

#[test]
fn dilated_processes_fail_some_library_instrument() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..10 {
        let p = random_dilation_process(3, 2, 2, &mut rng).unwrap();
        assert!(distance_to_markovian_part(&p) > 1e-6);
        assert!(library_verdicts(&p).iter().any(|(_, ok)| !ok));
    }
}

#[test]
fn memory_only_before_the_cut_is_invisible_to_measure_and_prepare() {
    // Λ_{2:1} ⊗ Υ_{1:0} with a non-Markovian Υ_{1:0}: every measure-and-prepare
    // element at step 1 cuts the only link to the future, so all verdicts hold
    // although the process differs from its Markovian part.
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let early = random_dilation_process(2, 2, 2, &mut rng).unwrap();
    let link = random_channel(2, 2, 2, &mut rng)
        .choi()
        .relabel(&[("out", "s2:i"), ("in", "s1:o")])
        .unwrap();
    let p = ProcessTensor::new(link.kron(early.op()).unwrap()).unwrap();
    assert!(p.validate().valid);
    assert!(distance_to_markovian_part(&p) > 1e-3);
    assert!(library_verdicts(&p).iter().all(|(_, ok)| *ok));
}

#[test]
fn identity_memory_instrument_keeps_markovian_correlations() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let p = random_markovian_process(3, 2, &mut rng);
    let id = Instrument::new(vec![CpMap::identity(2)]).unwrap();
    let seq = InstrumentSequence::single(1, &id).unwrap();
    let v = has_markov_order(&p, &BlockPartition::new(3, 1, 2).unwrap(), &seq, "id").unwrap();
    assert!(!v.holds);
}

#[test]
fn entangled_tester_is_valid_and_blind_to_markovian_memory() {
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    let p = random_markovian_process(4, 2, &mut rng);
    let part = BlockPartition::new(4, 2, 3).unwrap();
    let t = common::entangled_tester(1, &common::tetra_state(1));
    assert!(t.validate().valid);
    assert!(has_markov_order(&p, &part, &t, "bell").unwrap().holds);
    let q = random_dilation_process(4, 2, 2, &mut rng).unwrap();
    assert!(!has_markov_order(&q, &part, &t, "bell").unwrap().holds);
}

#[test]
fn tetrahedral_example_cmi_ignores_output_identities() {
    let p = tetrahedral_example_process();
    let part = tetrahedral_example_partition();
    let inputs = p.op().partial_trace(&["s0:o", "s1:o"]).unwrap();
    let bare = ProcessTensor::new(inputs).unwrap();
    let a = quantum_cmi(&p, &part, LogBase::Two).unwrap();
    let b = quantum_cmi(&bare, &part, LogBase::Two).unwrap();
    assert!((a - b).abs() < 1e-12);
}

#[test]
fn cmi_table_for_tetrahedral_example() {
    let t = cmi_nonmonotonicity_demo(
        &tetrahedral_example_process(),
        &tetrahedral_example_partition(),
        &demo_instruments(),
        LogBase::Two,
    )
    .unwrap();
    assert!(t.lowers && t.raises_on_forgetting);
    let tetra = t.rows.iter().find(|r| r.instrument == "tetrahedral-luders").unwrap();
    assert!(tetra.averaged > tetra.recorded);
}

#[test]
fn product_state_has_zero_cmi() {
    let rho = |x: f64| qmarkov_core::tensor::bloch_operator(0.5, [x, 0.0, 0.2]);
    let op = ["s2:i", "s1:i", "s0:i"]
        .iter()
        .enumerate()
        .map(|(k, n)| LabeledOperator::single(*n, rho(0.1 * k as f64)).unwrap())
        .reduce(|a, b| a.kron(&b).unwrap())
        .unwrap();
    let p = ProcessTensor::new(op).unwrap();
    let cmi = quantum_cmi(&p, &BlockPartition::new(3, 1, 2).unwrap(), LogBase::Two).unwrap();
    assert!(cmi.abs() < 1e-12);
}
