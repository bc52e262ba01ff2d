//! Process tensors: validity, the multi-time Born rule, conditioning and
//! the standard constructions (Markovian products, classical embeddings,
//! system-environment dilations).

use std::collections::BTreeSet;

use nalgebra::DMatrix;
use serde::Serialize;

use crate::classical::JointDistribution;
use crate::error::{Error, Result};
use crate::maps::{
    comb_levels, input_name, output_name, parse_step_name, CombSide, CpMap, InstrumentSequence,
};
use crate::tensor::{FactorLabel, LabeledOperator, C64, ONE};
use crate::tol;

/// Positive operator on `⊗_j (o_j ⊗ i_j)` obeying the causality hierarchy.
///
/// Factors are kept in canonical order, latest step first and the output
/// before the input within a step: `(o_n, i_n, …, o_0, i_0)`. A step may
/// lack its output factor, which stands for a trivial (one-dimensional)
/// output; this is how the final step is usually represented.
#[derive(Debug, Clone, PartialEq)]
pub struct ProcessTensor {
    op: LabeledOperator,
    steps: Vec<usize>,
}

/// Outcome of [`ProcessTensor::validate`].
#[derive(Debug, Clone, Serialize)]
pub struct ProcessReport {
    pub hermitian_deviation: f64,
    pub min_eigenvalue: f64,
    pub psd: bool,
    /// `(j, ‖tr_{i_j} Υ_{j:0} − 1_{o_j} ⊗ Υ_{j−1:0}‖₁)`, latest step first.
    pub causality: Vec<(usize, f64)>,
    pub trace: f64,
    pub expected_trace: f64,
    pub trace_deviation: f64,
    pub tolerance: f64,
    pub valid: bool,
}

impl ProcessReport {
    pub fn max_causality_deviation(&self) -> f64 {
        self.causality.iter().map(|(_, d)| *d).fold(0.0, f64::max)
    }
}

/// A process conditioned on outcomes at a subset of steps.
#[derive(Debug, Clone)]
pub struct ConditionalProcess {
    pub op: LabeledOperator,
    pub conditioned_steps: Vec<usize>,
    pub probability: f64,
}

impl ConditionalProcess {
    /// Reinterprets the conditional operator as a process on the remaining steps.
    pub fn into_process(self) -> Result<ProcessTensor> {
        ProcessTensor::new(self.op)
    }
}

fn canonical_order(factors: &[FactorLabel]) -> Result<(Vec<usize>, Vec<String>)> {
    let mut steps = BTreeSet::new();
    let mut inputs = BTreeSet::new();
    for f in factors {
        let (s, is_out) = parse_step_name(&f.name)
            .ok_or_else(|| Error::MalformedProcess(format!("unexpected factor `{}`", f.name)))?;
        steps.insert(s);
        if !is_out {
            inputs.insert(s);
        }
    }
    if let Some(s) = steps.iter().find(|s| !inputs.contains(s)) {
        return Err(Error::MalformedProcess(format!("step {s} has no input factor")));
    }
    let names = factors.iter().map(|f| f.name.as_str()).collect::<Vec<_>>();
    let mut order = Vec::with_capacity(factors.len());
    for &s in steps.iter().rev() {
        let o = output_name(s);
        if names.contains(&o.as_str()) {
            order.push(o);
        }
        order.push(input_name(s));
    }
    Ok((steps.into_iter().collect(), order))
}

impl ProcessTensor {
    /// Wraps an operator whose factors follow the `s{j}:i` / `s{j}:o` scheme.
    /// Dimension-1 factors are dropped and the rest put in canonical order.
    /// No validity check is made; see [`ProcessTensor::validate`].
    pub fn new(op: LabeledOperator) -> Result<Self> {
        let op = op.squeeze();
        if op.factors().is_empty() {
            return Err(Error::MalformedProcess("no factors".into()));
        }
        let (steps, order) = canonical_order(op.factors())?;
        let names: Vec<&str> = order.iter().map(String::as_str).collect();
        Ok(Self {
            op: op.permute(&names)?,
            steps,
        })
    }

    pub fn op(&self) -> &LabeledOperator {
        &self.op
    }

    pub fn steps(&self) -> &[usize] {
        &self.steps
    }

    pub fn input_dim(&self, step: usize) -> usize {
        self.op.factor(&input_name(step)).map_or(1, |f| f.dim)
    }

    pub fn output_dim(&self, step: usize) -> usize {
        self.op.factor(&output_name(step)).map_or(1, |f| f.dim)
    }

    /// Product of output dimensions over `steps`.
    pub fn output_dim_of(&self, steps: &[usize]) -> usize {
        steps.iter().map(|&s| self.output_dim(s)).product()
    }

    /// Product of all output dimensions, the trace of a valid process.
    pub fn total_output_dim(&self) -> usize {
        self.output_dim_of(&self.steps)
    }

    /// Names of the factors present at the given steps, in canonical order.
    pub fn factor_names_of(&self, steps: &[usize]) -> Vec<String> {
        self.op
            .factors()
            .iter()
            .filter(|f| parse_step_name(&f.name).is_some_and(|(s, _)| steps.contains(&s)))
            .map(|f| f.name.clone())
            .collect()
    }

    /// `Υ / tr Υ`.
    pub fn normalized_state(&self) -> LabeledOperator {
        self.op.scale(1.0 / self.op.trace().re)
    }

    pub fn validate(&self) -> ProcessReport {
        self.validate_with(tol::TRACE)
    }

    /// Positivity, per-level causality deviations and total trace, all against `tolerance`.
    pub fn validate_with(&self, tolerance: f64) -> ProcessReport {
        let hermitian_deviation = self.op.hermitian_deviation();
        let min_eigenvalue = if hermitian_deviation <= tol::HERM {
            self.op.min_eigenvalue().unwrap_or(f64::NEG_INFINITY)
        } else {
            f64::NEG_INFINITY
        };
        let psd = hermitian_deviation <= tol::HERM && min_eigenvalue >= -tol::PSD;
        let causality = comb_levels(&self.op, &self.steps, CombSide::Process);
        let trace = self.op.trace().re;
        let expected_trace = self.total_output_dim() as f64;
        let trace_deviation = (trace - expected_trace).abs();
        let valid = psd
            && causality.iter().all(|(_, d)| *d <= tolerance)
            && trace_deviation <= tolerance;
        ProcessReport {
            hermitian_deviation,
            min_eigenvalue,
            psd,
            causality,
            trace,
            expected_trace,
            trace_deviation,
            tolerance,
            valid,
        }
    }

    /// `tr[Oᵀ Υ]` for a tester element covering every factor of the process.
    pub fn born_probability(&self, element: &LabeledOperator) -> Result<f64> {
        Ok(self.op.pair(&element.squeeze())?.re)
    }

    /// Probabilities of every element of a tester, in element order.
    pub fn born_distribution(&self, seq: &InstrumentSequence) -> Result<Vec<f64>> {
        seq.elements()
            .iter()
            .map(|e| self.born_probability(&e.op))
            .collect()
    }

    /// Steps fully covered by the factors of `element`.
    fn covered_steps(&self, element: &LabeledOperator) -> Result<Vec<usize>> {
        let mut steps = BTreeSet::new();
        for f in element.factors() {
            let (s, _) = parse_step_name(&f.name)
                .filter(|_| self.op.has_factor(&f.name))
                .ok_or_else(|| Error::UnknownFactor(f.name.clone()))?;
            steps.insert(s);
        }
        for &s in &steps {
            for name in self.factor_names_of(&[s]) {
                if !element.has_factor(&name) {
                    return Err(Error::FactorMismatch(format!(
                        "element covers step {s} but not factor `{name}`"
                    )));
                }
            }
        }
        Ok(steps.into_iter().collect())
    }

    /// Unnormalised partial contraction `tr_S[(Oᵀ ⊗ 1) Υ]`.
    pub fn contract(&self, element: &LabeledOperator) -> Result<LabeledOperator> {
        let element = element.squeeze();
        self.covered_steps(&element)?;
        self.op.contract(&element)
    }

    /// Conditions on a tester element over a subset of steps.
    ///
    /// The returned operator is normalised to the trace a process on the
    /// remaining steps must have, and `probability` is the matching outcome
    /// probability (with maximally mixed preparations on steps that are not
    /// conditioned and lie before the conditioned block).
    pub fn condition(&self, element: &LabeledOperator) -> Result<ConditionalProcess> {
        let element = element.squeeze();
        let conditioned_steps = self.covered_steps(&element)?;
        let rest: Vec<usize> = self
            .steps
            .iter()
            .copied()
            .filter(|s| !conditioned_steps.contains(s))
            .collect();
        let remainder = self.op.contract(&element)?;
        let norm = self.output_dim_of(&rest) as f64;
        let probability = remainder.trace().re / norm;
        if !(probability >= tol::PROB_FLOOR) {
            return Err(Error::ZeroProbability(probability));
        }
        Ok(ConditionalProcess {
            op: remainder.scale(1.0 / probability),
            conditioned_steps,
            probability,
        })
    }

    /// Conditions on a single map applied at one step.
    pub fn condition_on(&self, step: usize, map: &CpMap) -> Result<ConditionalProcess> {
        self.condition(&map.at_step(step))
    }

    /// The Markovian process built from this one's two-point marginals:
    /// `⊗_k Λ_{k:k−1} ⊗ ρ_0`, with `Λ` read off the `(i_k, o_{k−1})` marginals.
    pub fn markovian_part(&self) -> Result<ProcessTensor> {
        let total = self.total_output_dim() as f64;
        let first = self.steps[0];
        let mut op = self
            .op
            .reduce_to(&[input_name(first).as_str()])?
            .scale(1.0 / total);
        for w in self.steps.windows(2) {
            let (prev, cur) = (w[0], w[1]);
            let i = input_name(cur);
            let o = output_name(prev);
            let keep: Vec<&str> = if self.op.has_factor(&o) {
                vec![i.as_str(), o.as_str()]
            } else {
                vec![i.as_str()]
            };
            let link = self
                .op
                .reduce_to(&keep)?
                .scale(self.output_dim(prev) as f64 / total);
            op = link.kron(&op)?;
        }
        let last = *self.steps.last().expect("non-empty");
        let o = output_name(last);
        if let Some(f) = self.op.factor(&o) {
            op = LabeledOperator::identity(vec![f.clone()])?.kron(&op)?;
        }
        ProcessTensor::new(op)
    }
}

/// `Υ = ⊗_{k=1}^{n} Λ_{k:k−1} ⊗ ρ_0`; `channels[k−1]` maps `o_{k−1}` to `i_k`.
pub fn markovian_process(channels: &[CpMap], rho0: &DMatrix<C64>) -> Result<ProcessTensor> {
    let rho = LabeledOperator::single(input_name(0), rho0.clone())?;
    let min = rho.min_eigenvalue()?;
    if min < -tol::PSD {
        return Err(Error::NotPositive(min));
    }
    if (rho.trace().re - 1.0).abs() > tol::TRACE {
        return Err(Error::BadTrace {
            actual: rho.trace().re,
            expected: 1.0,
        });
    }
    let mut op = rho;
    for (k, ch) in channels.iter().enumerate() {
        let step = k + 1;
        let dev = ch.trace_preservation_deviation();
        if dev > tol::TRACE {
            return Err(Error::NotTracePreserving(dev));
        }
        let i = input_name(step);
        let o = output_name(step - 1);
        let link = ch
            .choi()
            .relabel(&[(crate::maps::OUT, i.as_str()), (crate::maps::IN, o.as_str())])?;
        op = link.kron(&op)?;
    }
    ProcessTensor::new(op)
}

/// Classical joint distribution written on the diagonal of the inputs,
/// identity on every output: `Σ_y P(y) ⊗_j |y_j><y_j|_{i_j} ⊗ 1_{o_j}`.
pub fn embed_classical(dist: &JointDistribution, dims: &[usize]) -> Result<ProcessTensor> {
    embed_classical_with_outputs(dist, dims, dims)
}

/// As [`embed_classical`] with separate output dimensions; an output of
/// dimension 1 is dropped, which keeps large tables small.
pub fn embed_classical_with_outputs(
    dist: &JointDistribution,
    dims: &[usize],
    out_dims: &[usize],
) -> Result<ProcessTensor> {
    let alphabet = dist.alphabet();
    if dims.len() != alphabet.len() || out_dims.len() != alphabet.len() {
        return Err(Error::InvalidDistribution(format!(
            "{} steps but {} input and {} output dimensions",
            alphabet.len(),
            dims.len(),
            out_dims.len()
        )));
    }
    if let Some((a, d)) = alphabet.iter().zip(dims).find(|(a, d)| a > d) {
        return Err(Error::InvalidDistribution(format!(
            "alphabet of size {a} does not fit dimension {d}"
        )));
    }
    dist.check_normalized()?;
    let n = dims.len();
    // Diagonal over inputs ordered (i_{n-1}, …, i_0): last step most significant.
    let total: usize = dims.iter().product();
    let mut diag = vec![0.0; total];
    for (idx, &p) in dist.table().iter().enumerate() {
        let outcome = dist.outcome_of(idx);
        let mut big = 0usize;
        for s in (0..n).rev() {
            big = big * dims[s] + outcome[s];
        }
        diag[big] = p;
    }
    let inputs: Vec<FactorLabel> = (0..n)
        .rev()
        .map(|s| FactorLabel::new(input_name(s), dims[s]))
        .collect();
    let mut order = Vec::with_capacity(2 * n);
    for s in (0..n).rev() {
        order.push(FactorLabel::new(output_name(s), out_dims[s].max(1)));
        order.push(FactorLabel::new(input_name(s), dims[s]));
    }
    let op = LabeledOperator::from_diagonal(inputs, &diag)?.extend_to(&order)?;
    ProcessTensor::new(op)
}

/// Process generated by a system coupled to an environment.
///
/// `initial` is a state on factors `sys` and `env`; `unitaries[k−1]` acts on
/// `sys ⊗ env` (system first) between steps `k−1` and `k`. The environment is
/// traced out at the end, so correlations it carries make the process
/// non-Markovian.
pub fn from_dilation(initial: &LabeledOperator, unitaries: &[DMatrix<C64>]) -> Result<ProcessTensor> {
    let sys = initial
        .factor("sys")
        .cloned()
        .ok_or_else(|| Error::UnknownFactor("sys".into()))?;
    let env = initial
        .factor("env")
        .cloned()
        .ok_or_else(|| Error::UnknownFactor("env".into()))?;
    if initial.factors().len() != 2 {
        return Err(Error::FactorMismatch("initial state must be on sys, env".into()));
    }
    let d = sys.dim;
    let mut x = initial.relabel(&[("sys", input_name(0).as_str())])?;
    let mut cur_sys = input_name(0);
    for (k, u) in unitaries.iter().enumerate() {
        let step = k + 1;
        if u.shape() != (d * env.dim, d * env.dim) {
            return Err(Error::ShapeMismatch {
                rows: u.nrows(),
                cols: u.ncols(),
                expected: d * env.dim,
            });
        }
        let out = output_name(step - 1);
        let fresh = input_name(step);
        let phi_vec: Vec<C64> = (0..d * d)
            .map(|idx| if idx / d == idx % d { ONE } else { C64::new(0.0, 0.0) })
            .collect();
        let phi = LabeledOperator::projector(
            vec![FactorLabel::new(fresh.clone(), d), FactorLabel::new(out, d)],
            &phi_vec,
        )?;
        x = x.kron(&phi)?;
        let u_op = LabeledOperator::new(
            vec![FactorLabel::new(fresh.clone(), d), env.clone()],
            u.clone(),
        )?
        .extend_to(x.factors())?;
        x = u_op.matmul(&x)?.matmul(&u_op.dagger())?;
        cur_sys = fresh;
    }
    let _ = cur_sys;
    ProcessTensor::new(x.partial_trace(&["env"])?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::maps::{maximally_mixed, sharp_classical_instrument, tensor_sequence, Instrument};
    use crate::tensor::{bloch_operator, paulis};

    fn ket0() -> DMatrix<C64> {
        bloch_operator(0.5, [0.0, 0.0, 1.0])
    }

    fn depolarizing() -> CpMap {
        let k: Vec<_> = paulis().iter().map(|p| p * C64::new(0.5, 0.0)).collect();
        CpMap::from_kraus(&k, "dep").unwrap()
    }

    #[test]
    fn identity_channels_give_phi_chain() {
        let p = markovian_process(&[CpMap::identity(2), CpMap::identity(2)], &ket0()).unwrap();
        let phi = CpMap::identity(2).choi().clone();
        let expect = phi
            .relabel(&[("out", "s2:i"), ("in", "s1:o")])
            .unwrap()
            .kron(&phi.relabel(&[("out", "s1:i"), ("in", "s0:o")]).unwrap())
            .unwrap()
            .kron(&LabeledOperator::single("s0:i", ket0()).unwrap())
            .unwrap();
        assert_eq!(p.op(), &expect);
        assert!(p.validate().valid);
    }

    #[test]
    fn single_step_is_initial_state() {
        let p = markovian_process(&[], &ket0()).unwrap();
        assert_eq!(p.op().matrix(), &ket0());
        assert_eq!(p.steps(), &[0]);
        assert!(p.validate().valid);
    }

    #[test]
    fn depolarizing_chain_trace() {
        let p = markovian_process(&[depolarizing(), depolarizing(), depolarizing()], &ket0())
            .unwrap();
        let r = p.validate();
        assert!(r.valid);
        assert!((r.trace - 8.0).abs() < 1e-12);
        assert!(r.max_causality_deviation() <= 1e-10);
    }

    #[test]
    fn non_cptp_channel_is_rejected() {
        let mut k = DMatrix::zeros(2, 2);
        k[(0, 0)] = ONE;
        let lossy = CpMap::from_kraus(&[k], "p").unwrap();
        assert!(matches!(
            markovian_process(&[lossy], &ket0()),
            Err(Error::NotTracePreserving(_))
        ));
    }

    #[test]
    fn random_psd_without_causal_structure_is_flagged() {
        // Correlated state across i_1 and o_0: o_0 is not in identity.
        let v: Vec<C64> = (0..8).map(|k| C64::new(1.0 + k as f64, 0.5 * k as f64)).collect();
        let factors = vec![
            FactorLabel::new("s1:i", 2),
            FactorLabel::new("s0:o", 2),
            FactorLabel::new("s0:i", 2),
        ];
        let op = LabeledOperator::projector(factors, &v).unwrap();
        let op = op.scale(2.0 / op.trace().re);
        let r = ProcessTensor::new(op).unwrap().validate();
        assert!(r.psd);
        assert!(r.trace_deviation < 1e-12);
        assert!(r.max_causality_deviation() > 1e-3);
        assert!(!r.valid);
    }

    #[test]
    fn deterministic_tester_has_probability_one() {
        let p = markovian_process(&[depolarizing(), CpMap::identity(2)], &ket0()).unwrap();
        let trace_out = Instrument::povm(&[DMatrix::identity(2, 2)]).unwrap();
        let e = tensor_sequence(&[
            CpMap::identity(2),
            depolarizing(),
            trace_out.elements()[0].clone(),
        ])
        .unwrap();
        assert!((p.born_probability(&e.op).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn born_rejects_mismatched_labels() {
        let p = markovian_process(&[CpMap::identity(2)], &ket0()).unwrap();
        let e = tensor_sequence(&[CpMap::identity(2)]).unwrap();
        assert!(matches!(
            p.born_probability(&e.op),
            Err(Error::FactorMismatch(_))
        ));
    }

    #[test]
    fn conditioning_on_identity_keeps_markovian_structure() {
        let chans = [depolarizing(), CpMap::identity(2)];
        let p = markovian_process(&chans, &ket0()).unwrap();
        let c = p.condition_on(0, &CpMap::identity(2)).unwrap();
        assert!((c.probability - 1.0).abs() < 1e-12);
        let rest = c.into_process().unwrap();
        assert!(rest.validate().valid);
        // Λ_{2:1} ⊗ Λ_{1:0}(ρ0)
        let first = depolarizing()
            .apply(&LabeledOperator::single("s1:i", ket0()).unwrap())
            .unwrap();
        let expect = CpMap::identity(2)
            .choi()
            .relabel(&[("out", "s2:i"), ("in", "s1:o")])
            .unwrap()
            .kron(&first)
            .unwrap();
        assert!(rest.op().sub(&expect).unwrap().max_abs() < 1e-14);
    }

    #[test]
    fn conditioning_on_impossible_outcome_fails() {
        let p = markovian_process(&[CpMap::identity(2)], &ket0()).unwrap();
        let j = sharp_classical_instrument(2).unwrap();
        assert!(matches!(
            p.condition_on(0, &j.elements()[1]),
            Err(Error::ZeroProbability(_))
        ));
        let ok = p.condition_on(0, &j.elements()[0]).unwrap();
        assert!((ok.probability - 1.0).abs() < 1e-14);
    }

    #[test]
    fn classical_embedding_of_delta_and_uniform() {
        let delta = JointDistribution::new(vec![2, 2], vec![1.0, 0.0, 0.0, 0.0]).unwrap();
        let p = embed_classical(&delta, &[2, 2]).unwrap();
        assert!(p.validate().valid);
        let e = tensor_sequence(&[
            sharp_classical_instrument(2).unwrap().elements()[0].clone(),
            sharp_classical_instrument(2).unwrap().elements()[0].clone(),
        ])
        .unwrap();
        assert!((p.born_probability(&e.op).unwrap() - 1.0).abs() < 1e-15);

        let uniform = JointDistribution::new(vec![2, 2], vec![0.25; 4]).unwrap();
        let u = embed_classical(&uniform, &[2, 2]).unwrap();
        let expect = LabeledOperator::identity(u.op().factors().to_vec())
            .unwrap()
            .scale(0.25);
        assert!(u.op().sub(&expect).unwrap().max_abs() < 1e-15);
    }

    #[test]
    fn embedding_rejects_oversized_alphabet() {
        let d = JointDistribution::new(vec![3], vec![0.2, 0.3, 0.5]).unwrap();
        assert!(matches!(
            embed_classical(&d, &[2]),
            Err(Error::InvalidDistribution(_))
        ));
    }

    #[test]
    fn trivial_environment_dilation_is_markovian() {
        let h = {
            let s = std::f64::consts::FRAC_1_SQRT_2;
            DMatrix::from_row_slice(
                2,
                2,
                &[C64::new(s, 0.0), C64::new(s, 0.0), C64::new(s, 0.0), C64::new(-s, 0.0)],
            )
        };
        let init = LabeledOperator::single("sys", ket0())
            .unwrap()
            .kron(&LabeledOperator::identity(vec![FactorLabel::new("env", 1)]).unwrap())
            .unwrap();
        let dil = from_dilation(&init, &[h.clone(), h.clone()]).unwrap();
        let unitary = CpMap::from_kraus(&[h], "h").unwrap();
        let direct = markovian_process(&[unitary.clone(), unitary], &ket0()).unwrap();
        assert!(dil.op().sub(direct.op()).unwrap().max_abs() < 1e-14);
    }

    #[test]
    fn markovian_part_of_markovian_process_is_itself() {
        let p = markovian_process(&[depolarizing(), CpMap::identity(2)], &ket0()).unwrap();
        let m = p.markovian_part().unwrap();
        assert!(m.op().sub(p.op()).unwrap().max_abs() < 1e-14);
    }

    #[test]
    fn canonical_order_and_missing_input() {
        let op = LabeledOperator::identity(vec![
            FactorLabel::new("s0:i", 2),
            FactorLabel::new("s0:o", 2),
        ])
        .unwrap()
        .scale(0.5);
        let p = ProcessTensor::new(op).unwrap();
        assert_eq!(p.op().factor_names(), vec!["s0:o", "s0:i"]);

        let bad = LabeledOperator::single("s1:o", maximally_mixed(2)).unwrap();
        assert!(matches!(
            ProcessTensor::new(bad),
            Err(Error::MalformedProcess(_))
        ));
        let alien = LabeledOperator::single("a", maximally_mixed(2)).unwrap();
        assert!(matches!(
            ProcessTensor::new(alien),
            Err(Error::MalformedProcess(_))
        ));
    }
}
