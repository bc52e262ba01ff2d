//! Quantum Markov order relative to a memory instrument, quantum CMI and
//! the tetrahedral three-step example.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::classical::BlockPartition;
use crate::error::{Error, Result};
use crate::maps::{
    maximally_mixed, tetrahedral_dual, tetrahedral_effect, CpMap, Instrument, InstrumentSequence,
};
use crate::process::ProcessTensor;
use crate::tensor::{FactorLabel, LabeledOperator, LogBase, C64};
use crate::tol;

/// Conditional history/future split for one outcome of the memory instrument.
#[derive(Debug, Clone)]
pub struct OutcomeDecomposition {
    pub label: String,
    /// `α = tr Υ_FH`.
    pub alpha: f64,
    /// `α / (d^o_F d^o_H)`, the outcome probability with noise fed into H and F.
    pub probability: f64,
    /// `None` when the outcome is below the probability floor.
    pub parts: Option<ConditionalParts>,
}

#[derive(Debug, Clone)]
pub struct ConditionalParts {
    pub future_history: LabeledOperator,
    pub future: LabeledOperator,
    pub history: LabeledOperator,
    /// Trace distance between `Υ_FH / α` and `Υ_F ⊗ Υ_H / α`.
    pub distance: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct OutcomeVerdict {
    pub label: String,
    pub probability: f64,
    pub distance: Option<f64>,
    pub skipped: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct MarkovOrderVerdict {
    pub instrument_id: String,
    pub partition: String,
    pub outcomes: Vec<OutcomeVerdict>,
    pub tolerance: f64,
    pub holds: bool,
}

impl MarkovOrderVerdict {
    pub fn max_distance(&self) -> f64 {
        self.outcomes
            .iter()
            .filter_map(|o| o.distance)
            .fold(0.0, f64::max)
    }
}

fn refs(v: &[String]) -> Vec<&str> {
    v.iter().map(String::as_str).collect()
}

fn check_partition(p: &ProcessTensor, partition: &BlockPartition) -> Result<()> {
    let expected: Vec<usize> = (0..partition.steps()).collect();
    if p.steps() != expected.as_slice() {
        return Err(Error::InvalidPartition(format!(
            "partition covers steps 0..{}, process has steps {:?}",
            partition.steps(),
            p.steps()
        )));
    }
    Ok(())
}

/// Splits the process, conditioned on each outcome of `memory`, into its
/// future and history parts.
pub fn conditional_decomposition(
    p: &ProcessTensor,
    partition: &BlockPartition,
    memory: &InstrumentSequence,
) -> Result<Vec<OutcomeDecomposition>> {
    check_partition(p, partition)?;
    let m: Vec<usize> = partition.memory().collect();
    if m.is_empty() || memory.steps() != m.as_slice() {
        return Err(Error::InvalidPartition(format!(
            "instrument acts on steps {:?}, memory block is {m:?}",
            memory.steps()
        )));
    }
    let f_steps: Vec<usize> = partition.future().collect();
    let h_steps: Vec<usize> = partition.history().collect();
    let f_names = p.factor_names_of(&f_steps);
    let h_names = p.factor_names_of(&h_steps);
    let d_f = p.output_dim_of(&f_steps) as f64;
    let d_h = p.output_dim_of(&h_steps) as f64;

    memory
        .elements()
        .iter()
        .map(|e| {
            let fh = p.contract(&e.op)?;
            let alpha = fh.trace().re;
            let probability = alpha / (d_f * d_h);
            if !(probability >= tol::PROB_FLOOR) {
                return Ok(OutcomeDecomposition {
                    label: e.label.clone(),
                    alpha,
                    probability,
                    parts: None,
                });
            }
            let f_refs: Vec<&str> = f_names.iter().map(String::as_str).collect();
            let h_refs: Vec<&str> = h_names.iter().map(String::as_str).collect();
            let future = fh.partial_trace(&h_refs)?.scale(d_f / alpha);
            let history = fh.partial_trace(&f_refs)?.scale(1.0 / d_f);
            let order: Vec<&str> = fh.factor_names();
            let product = future.kron(&history)?.permute(&order)?;
            let distance = fh.scale(1.0 / alpha).trace_distance(&product.scale(1.0 / alpha))?;
            Ok(OutcomeDecomposition {
                label: e.label.clone(),
                alpha,
                probability,
                parts: Some(ConditionalParts {
                    future_history: fh,
                    future,
                    history,
                    distance,
                }),
            })
        })
        .collect()
}

/// Product-structure test of every outcome at `tol::FACTOR`.
pub fn has_markov_order(
    p: &ProcessTensor,
    partition: &BlockPartition,
    memory: &InstrumentSequence,
    instrument_id: &str,
) -> Result<MarkovOrderVerdict> {
    has_markov_order_with(p, partition, memory, instrument_id, tol::FACTOR)
}

pub fn has_markov_order_with(
    p: &ProcessTensor,
    partition: &BlockPartition,
    memory: &InstrumentSequence,
    instrument_id: &str,
    tolerance: f64,
) -> Result<MarkovOrderVerdict> {
    let outcomes: Vec<OutcomeVerdict> = conditional_decomposition(p, partition, memory)?
        .into_iter()
        .map(|d| OutcomeVerdict {
            label: d.label,
            probability: d.probability,
            distance: d.parts.as_ref().map(|c| c.distance),
            skipped: d.parts.is_none(),
        })
        .collect();
    let holds = outcomes
        .iter()
        .all(|o| o.distance.is_none_or(|d| d <= tolerance));
    Ok(MarkovOrderVerdict {
        instrument_id: instrument_id.to_string(),
        partition: partition.to_string(),
        outcomes,
        tolerance,
        holds,
    })
}

/// `S(FM) + S(MH) − S(M) − S(FMH)` for a unit-trace state and named factor blocks.
pub fn quantum_cmi_state(
    rho: &LabeledOperator,
    future: &[&str],
    memory: &[&str],
    history: &[&str],
    base: LogBase,
) -> Result<f64> {
    let s = |blocks: &[&[&str]]| -> Result<f64> {
        let keep: Vec<&str> = blocks.iter().flat_map(|b| b.iter().copied()).collect();
        if keep.is_empty() {
            return Ok(0.0);
        }
        rho.reduce_to(&keep)?.von_neumann_entropy(base)
    };
    Ok(s(&[future, memory])? + s(&[memory, history])? - s(&[memory])? - s(&[future, memory, history])?)
}

/// Quantum CMI of `Υ / tr Υ` across the partition's blocks.
pub fn quantum_cmi(p: &ProcessTensor, partition: &BlockPartition, base: LogBase) -> Result<f64> {
    check_partition(p, partition)?;
    let names = |r: std::ops::Range<usize>| p.factor_names_of(&r.collect::<Vec<_>>());
    let (f, m, h) = (
        names(partition.future()),
        names(partition.memory()),
        names(partition.history()),
    );
    quantum_cmi_state(&p.normalized_state(), &refs(&f), &refs(&m), &refs(&h), base)
}

/// `ρ_X^(b) = (3/8) 1 + ½ Π^(b)`.
pub fn rho_x(b: usize) -> DMatrix<C64> {
    DMatrix::identity(2, 2) * C64::new(0.375, 0.0) + tetrahedral_effect(b) * C64::new(0.5, 0.0)
}

/// `ρ_ABC = Σ_b ¼ ρ_A^(b) ⊗ Δ_B^(b) ⊗ ρ_C^(b)` on factors `A, B, C`,
/// divided by its computed trace.
pub fn rho_abc() -> LabeledOperator {
    let mut acc = LabeledOperator::zeros(vec![
        FactorLabel::new("A", 2),
        FactorLabel::new("B", 2),
        FactorLabel::new("C", 2),
    ])
    .expect("positive dims");
    for b in 0..4 {
        let term = LabeledOperator::single("A", rho_x(b))
            .and_then(|a| a.kron(&LabeledOperator::single("B", tetrahedral_dual(b))?))
            .and_then(|ab| ab.kron(&LabeledOperator::single("C", rho_x(b))?))
            .expect("distinct factors");
        acc = acc.add(&term.scale(0.25)).expect("same factors");
    }
    let tr = acc.trace().re;
    acc.scale(1.0 / tr)
}

/// Three-step process `Υ = ρ_ABC ⊗ 1_{o_A} ⊗ 1_{o_B}` with A, B, C at steps 0, 1, 2.
pub fn tetrahedral_example_process() -> ProcessTensor {
    let inputs = rho_abc()
        .relabel(&[("A", "s0:i"), ("B", "s1:i"), ("C", "s2:i")])
        .expect("fresh names");
    let outputs = LabeledOperator::identity(vec![
        FactorLabel::new("s0:o", 2),
        FactorLabel::new("s1:o", 2),
    ])
    .expect("positive dims");
    ProcessTensor::new(inputs.kron(&outputs).expect("distinct factors")).expect("step factors")
}

/// `H = {A}`, `M = {B}`, `F = {C}`.
pub fn tetrahedral_example_partition() -> BlockPartition {
    BlockPartition::new(3, 1, 2).expect("valid cut")
}

/// Tetrahedral POVM at B followed by a maximally mixed preparation.
pub fn tetrahedral_memory_instrument() -> Instrument {
    Instrument::tetrahedral_povm()
        .then_prepare(&maximally_mixed(2))
        .expect("trivial outputs")
}

/// Computational-basis measurement at B followed by a maximally mixed preparation.
pub fn sharp_z_memory_instrument() -> Instrument {
    Instrument::computational_povm(2)
        .and_then(|j| j.then_prepare(&maximally_mixed(2)))
        .expect("trivial outputs")
}

/// `n × n` coefficients that mix outcomes 0 and 1 equally and keep the rest.
pub fn default_witness_coefficients(n: usize) -> DMatrix<f64> {
    let mut c = DMatrix::identity(n, n);
    if n >= 2 {
        for x in 0..2 {
            for z in 0..2 {
                c[(x, z)] = 0.5;
            }
        }
    }
    c
}

#[derive(Debug, Clone, Serialize)]
pub struct WitnessReport {
    pub basis: MarkovOrderVerdict,
    pub mixed: MarkovOrderVerdict,
    pub coefficients: Vec<Vec<f64>>,
    /// Every column has a single non-zero entry.
    pub trivial_coefficients: bool,
    /// All conditional futures coincide, so no mixing can break the product form.
    pub future_independent_of_outcome: bool,
    /// All conditional histories coincide, the other escape route.
    pub history_independent_of_outcome: bool,
    /// Finite order under the basis, failure under the mixture.
    pub demonstrated: bool,
}

fn all_equal(ops: &[LabeledOperator]) -> Result<bool> {
    for w in ops.windows(2) {
        if w[0].trace_distance(&w[1])? > tol::FACTOR {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Probes the process with a basis instrument on the memory block and with
/// the instrument whose element `z` is `Σ_x c[x, z] O^(x)`.
pub fn mixing_witness(
    p: &ProcessTensor,
    partition: &BlockPartition,
    basis: &InstrumentSequence,
    coeffs: &DMatrix<f64>,
) -> Result<WitnessReport> {
    let mixed_seq = basis.mix(coeffs)?;
    let basis_v = has_markov_order(p, partition, basis, "basis")?;
    let mixed_v = has_markov_order(p, partition, &mixed_seq, "mixed")?;
    let decomposition = conditional_decomposition(p, partition, basis)?;
    let parts: Vec<&ConditionalParts> = decomposition.iter().filter_map(|d| d.parts.as_ref()).collect();
    let futures: Vec<LabeledOperator> = parts.iter().map(|c| c.future.clone()).collect();
    let histories: Vec<LabeledOperator> = decomposition
        .iter()
        .filter_map(|d| d.parts.as_ref().map(|c| c.history.scale(1.0 / d.alpha)))
        .collect();
    let trivial = (0..coeffs.ncols())
        .all(|z| (0..coeffs.nrows()).filter(|&x| coeffs[(x, z)] != 0.0).count() <= 1);
    Ok(WitnessReport {
        demonstrated: basis_v.holds && !mixed_v.holds,
        basis: basis_v,
        mixed: mixed_v,
        coefficients: (0..coeffs.nrows())
            .map(|x| (0..coeffs.ncols()).map(|z| coeffs[(x, z)]).collect())
            .collect(),
        trivial_coefficients: trivial,
        future_independent_of_outcome: all_equal(&futures)?,
        history_independent_of_outcome: all_equal(&histories)?,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct CmiRow {
    pub instrument: String,
    /// CMI after the outcome-averaged map.
    pub averaged: f64,
    /// `Σ_x p_x I(F:H|M)_x`, the CMI when the outcome is kept in memory.
    pub recorded: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct CmiTable {
    pub base: &'static str,
    pub bare: f64,
    pub rows: Vec<CmiRow>,
    /// Some averaged value falls below the bare value.
    pub lowers: bool,
    /// Some averaged value exceeds the bare value.
    pub raises_above_bare: bool,
    /// Discarding the outcome record raises the CMI for some instrument.
    pub raises_on_forgetting: bool,
}

/// Tracks the CMI when single-step instruments act on the memory input
/// `i_M` of the normalised process state.
pub fn cmi_nonmonotonicity_demo(
    p: &ProcessTensor,
    partition: &BlockPartition,
    instruments: &[(String, Instrument)],
    base: LogBase,
) -> Result<CmiTable> {
    check_partition(p, partition)?;
    if partition.memory_length() != 1 {
        return Err(Error::InvalidPartition("memory block must be one step".into()));
    }
    let names = |r: std::ops::Range<usize>| p.factor_names_of(&r.collect::<Vec<_>>());
    let (f, m, h) = (
        names(partition.future()),
        names(partition.memory()),
        names(partition.history()),
    );
    let (fr, mr, hr) = (refs(&f), refs(&m), refs(&h));
    let target = crate::maps::input_name(partition.memory().start);
    let rho = p.normalized_state();
    let bare = quantum_cmi_state(&rho, &fr, &mr, &hr, base)?;
    let mut rows = Vec::with_capacity(instruments.len());
    for (name, j) in instruments {
        let mut averaged = None::<LabeledOperator>;
        let mut recorded = 0.0;
        for e in j.elements() {
            let out = e.apply_on(&rho, &target)?;
            let px = out.trace().re;
            if px > tol::PROB_FLOOR {
                let post = out.scale(1.0 / px).squeeze();
                let m_left: Vec<&str> = mr.iter().copied().filter(|n| post.has_factor(n)).collect();
                recorded += px * quantum_cmi_state(&post, &fr, &m_left, &hr, base)?;
            }
            averaged = Some(match averaged {
                None => out,
                Some(acc) => acc.add(&out)?,
            });
        }
        let avg = averaged.ok_or_else(|| Error::InconsistentInstrument("no elements".into()))?.squeeze();
        let m_left: Vec<&str> = mr.iter().copied().filter(|n| avg.has_factor(n)).collect();
        rows.push(CmiRow {
            instrument: name.clone(),
            averaged: quantum_cmi_state(&avg, &fr, &m_left, &hr, base)?,
            recorded,
        });
    }
    let eps = 1e-9;
    Ok(CmiTable {
        base: base.label(),
        bare,
        lowers: rows.iter().any(|r| r.averaged < bare - eps),
        raises_above_bare: rows.iter().any(|r| r.averaged > bare + eps),
        raises_on_forgetting: rows.iter().any(|r| r.averaged > r.recorded + eps),
        rows,
    })
}

/// Memory instruments used by the CMI demonstration on a qubit.
pub fn demo_instruments() -> Vec<(String, Instrument)> {
    let c = |x: f64| C64::new(x, 0.0);
    let sqrt_effect = |b: usize| {
        let e = tetrahedral_effect(b);
        let eig = e.clone().symmetric_eigen();
        let root = eig.eigenvalues.map(|v| c(v.max(0.0).sqrt()));
        &eig.eigenvectors * DMatrix::from_diagonal(&root) * eig.eigenvectors.adjoint()
    };
    let luders = Instrument::new(
        (0..4)
            .map(|b| CpMap::from_kraus(&[sqrt_effect(b)], b.to_string()))
            .collect::<Result<Vec<_>>>()
            .expect("positive effects"),
    )
    .expect("shared shapes");
    let damping = |g: f64| {
        let k0 = DMatrix::from_row_slice(2, 2, &[c(1.0), c(0.0), c(0.0), c((1.0 - g).sqrt())]);
        let k1 = DMatrix::from_row_slice(2, 2, &[c(0.0), c(g.sqrt()), c(0.0), c(0.0)]);
        Instrument::new(vec![CpMap::from_kraus(&[k0, k1], "ad").expect("kraus")]).expect("one element")
    };
    let depolarize = Instrument::new(vec![CpMap::measure_and_prepare(
        &DMatrix::identity(2, 2),
        &maximally_mixed(2),
        "dep",
    )
    .expect("positive")])
    .expect("one element");
    vec![
        ("identity".into(), Instrument::new(vec![CpMap::identity(2)]).expect("one element")),
        ("dephase-z".into(), Instrument::sharp_classical(2).expect("qubit")),
        ("tetrahedral-luders".into(), luders),
        ("amplitude-damping-0.5".into(), damping(0.5)),
        ("depolarize".into(), depolarize),
    ]
}
