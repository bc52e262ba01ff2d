#![allow(dead_code)]

use nalgebra::DMatrix;
use qmarkov_core::maps::{
    computational_projectors, maximally_mixed, tetrahedral_effect, TesterElement,
};
use qmarkov_core::tensor::bloch_operator;
use qmarkov_core::{CpMap, FactorLabel, Instrument, InstrumentSequence, LabeledOperator, C64};

pub fn c(x: f64) -> C64 {
    C64::new(x, 0.0)
}

/// Pure tetrahedral state `2 Π^(b)`.
pub fn tetra_state(b: usize) -> DMatrix<C64> {
    tetrahedral_effect(b) * c(2.0)
}

fn measure_prepare(effects: &[DMatrix<C64>], states: &[DMatrix<C64>]) -> Instrument {
    Instrument::new(
        effects
            .iter()
            .zip(states)
            .enumerate()
            .map(|(k, (e, s))| CpMap::measure_and_prepare(e, s, k.to_string()).unwrap())
            .collect(),
    )
    .unwrap()
}

/// Single-step qubit instruments whose elements are products of an effect
/// and a preparation.
pub fn single_step_library() -> Vec<(String, Instrument)> {
    let tetra: Vec<DMatrix<C64>> = (0..4).map(tetrahedral_effect).collect();
    let z = computational_projectors(2);
    let plus = bloch_operator(0.5, [1.0, 0.0, 0.0]);
    let eps = 0.2;
    let noisy: Vec<DMatrix<C64>> = (0..4)
        .map(|k| tetra[k].clone() * c(1.0 - eps) + DMatrix::identity(2, 2) * c(eps / 4.0))
        .collect();
    vec![
        ("sharp-z".into(), Instrument::sharp_classical(2).unwrap()),
        (
            "tetrahedral-mixed-prep".into(),
            Instrument::tetrahedral_povm().then_prepare(&maximally_mixed(2)).unwrap(),
        ),
        (
            "tetrahedral-pure-prep".into(),
            measure_prepare(&tetra, &(0..4).map(tetra_state).collect::<Vec<_>>()),
        ),
        ("z-then-plus".into(), measure_prepare(&z, &[plus.clone(), plus])),
        (
            "noisy-tetrahedral".into(),
            measure_prepare(&noisy, &[z[0].clone(), z[1].clone(), tetra_state(2), tetra_state(3)]),
        ),
    ]
}

/// `|β_x>` for the four Bell states, as vectors on two qubits.
pub fn bell(x: usize) -> Vec<C64> {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let v = match x {
        0 => [s, 0.0, 0.0, s],
        1 => [s, 0.0, 0.0, -s],
        2 => [0.0, s, s, 0.0],
        _ => [0.0, s, -s, 0.0],
    };
    v.iter().map(|&r| c(r)).collect()
}

/// Two-step tester on steps `(j, j+1)`: measure `i_j` in the z basis, send
/// half of a Bell pair out through `o_j`, Bell-measure `i_{j+1}` with the
/// kept half and prepare `sigma` on `o_{j+1}`.
pub fn entangled_tester(j: usize, sigma: &DMatrix<C64>) -> InstrumentSequence {
    let n = |s: &str| format!("s{}:{s}", j);
    let m = |s: &str| format!("s{}:{s}", j + 1);
    let mut elements = Vec::new();
    for x in 0..4 {
        for y in 0..2 {
            let op = LabeledOperator::single(m("o"), sigma.clone())
                .unwrap()
                .kron(
                    &LabeledOperator::projector(
                        vec![FactorLabel::new(m("i"), 2), FactorLabel::new(n("o"), 2)],
                        &bell(x),
                    )
                    .unwrap()
                    .scale(0.5),
                )
                .unwrap()
                .kron(&LabeledOperator::single(n("i"), computational_projectors(2)[y].clone()).unwrap())
                .unwrap();
            elements.push(TesterElement {
                label: format!("bell{x},z{y}"),
                op,
            });
        }
    }
    InstrumentSequence::new(vec![j, j + 1], elements).unwrap()
}

/// Two-step testers on steps 1 and 2: independent products and the entangled one.
pub fn two_step_library() -> Vec<(String, InstrumentSequence)> {
    let lib = single_step_library();
    let mut out = Vec::new();
    for (a, ja) in &lib {
        for (b, jb) in lib.iter().take(3) {
            out.push((
                format!("{a}*{b}"),
                InstrumentSequence::product(&[(1, ja), (2, jb)]).unwrap(),
            ));
        }
    }
    out.push(("entangled-bell".into(), entangled_tester(1, &tetra_state(0))));
    out
}
