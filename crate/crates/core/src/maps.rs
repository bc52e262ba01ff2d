//! CP maps in Choi form, instruments, multi-step testers and dual sets.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::tensor::{bloch_operator, FactorLabel, LabeledOperator, C64, ONE, ZERO};
use crate::tol;

/// Factor name of a map's output in its Choi operator.
pub const OUT: &str = "out";
/// Factor name of a map's input in its Choi operator.
pub const IN: &str = "in";

/// Factor name of the experimenter's input at step `j` (the process output).
pub fn input_name(step: usize) -> String {
    format!("s{step}:i")
}

/// Factor name of the experimenter's output at step `j` (the process input).
pub fn output_name(step: usize) -> String {
    format!("s{step}:o")
}

/// Parses `s{j}:i` / `s{j}:o` into `(j, is_output)`.
pub fn parse_step_name(name: &str) -> Option<(usize, bool)> {
    let rest = name.strip_prefix('s')?;
    let (num, kind) = rest.split_once(':')?;
    let step = num.parse().ok()?;
    match kind {
        "i" => Some((step, false)),
        "o" => Some((step, true)),
        _ => None,
    }
}

/// A completely positive map stored as its Choi operator on `(out, in)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CpMap {
    choi: LabeledOperator,
    outcome: String,
}

impl CpMap {
    /// Wraps a Choi operator. Its factors must be named `out` and `in`.
    pub fn new(choi: LabeledOperator, outcome: impl Into<String>) -> Result<Self> {
        let choi = choi.permute(&[OUT, IN])?;
        let min = choi.min_eigenvalue()?;
        if min < -tol::PSD {
            return Err(Error::NotPositive(min));
        }
        Ok(Self {
            choi,
            outcome: outcome.into(),
        })
    }

    pub fn from_kraus(kraus: &[DMatrix<C64>], outcome: impl Into<String>) -> Result<Self> {
        Ok(Self {
            choi: choi_from_kraus(kraus)?,
            outcome: outcome.into(),
        })
    }

    pub fn identity(dim: usize) -> Self {
        Self::from_kraus(&[DMatrix::identity(dim, dim)], "id").expect("identity Kraus")
    }

    /// Measurement-only map `ρ ↦ tr(E ρ)`; the output factor has dimension 1.
    pub fn from_effect(effect: &DMatrix<C64>, outcome: impl Into<String>) -> Result<Self> {
        let d = effect.nrows();
        let choi = LabeledOperator::new(
            vec![FactorLabel::new(OUT, 1), FactorLabel::new(IN, d)],
            effect.transpose(),
        )?;
        Self::new(choi, outcome)
    }

    /// Measure `effect`, then prepare `state` on the output.
    pub fn measure_and_prepare(
        effect: &DMatrix<C64>,
        state: &DMatrix<C64>,
        outcome: impl Into<String>,
    ) -> Result<Self> {
        let out = LabeledOperator::single(OUT, state.clone())?;
        let inp = LabeledOperator::single(IN, effect.transpose())?;
        Self::new(out.kron(&inp)?, outcome)
    }

    pub fn choi(&self) -> &LabeledOperator {
        &self.choi
    }

    pub fn outcome(&self) -> &str {
        &self.outcome
    }

    pub fn with_outcome(mut self, outcome: impl Into<String>) -> Self {
        self.outcome = outcome.into();
        self
    }

    pub fn in_dim(&self) -> usize {
        self.choi.factors()[1].dim
    }

    pub fn out_dim(&self) -> usize {
        self.choi.factors()[0].dim
    }

    /// Operator paired with a state in the Born rule, `choiᵀ`.
    pub fn effect(&self) -> LabeledOperator {
        self.choi.transpose()
    }

    /// `tr_out` of the Choi operator, which is `1_in` for trace-preserving maps.
    pub fn input_marginal(&self) -> LabeledOperator {
        self.choi.partial_trace(&[OUT]).expect("out factor present")
    }

    pub fn trace_preservation_deviation(&self) -> f64 {
        let id = LabeledOperator::identity(vec![FactorLabel::new(IN, self.in_dim())])
            .expect("positive dim");
        self.input_marginal().sub(&id).expect("same factors").trace_norm()
    }

    /// Applies the map to a single-factor operator; the result keeps the input's factor name.
    pub fn apply(&self, rho: &LabeledOperator) -> Result<LabeledOperator> {
        apply_map(self, rho)
    }

    /// Applies the map to one factor of a multipartite operator. The output
    /// takes the factor's name and position.
    pub fn apply_on(&self, x: &LabeledOperator, factor: &str) -> Result<LabeledOperator> {
        let f = x
            .factor(factor)
            .ok_or_else(|| Error::UnknownFactor(factor.to_string()))?;
        if f.dim != self.in_dim() {
            return Err(Error::FactorMismatch(format!(
                "map input has dimension {}, factor `{factor}` has {}",
                self.in_dim(),
                f.dim
            )));
        }
        let order: Vec<String> = x.factor_names().iter().map(|s| s.to_string()).collect();
        let xt = x.relabel(&[(factor, IN)])?.partial_transpose(&[IN])?;
        let rest: Vec<FactorLabel> = xt
            .factors()
            .iter()
            .filter(|g| g.name != IN)
            .cloned()
            .collect();
        let mut full = self.choi.factors().to_vec();
        full.extend(rest);
        let product = self
            .choi
            .extend_to(&full)?
            .matmul(&xt.extend_to(&full)?)?;
        let names: Vec<&str> = order.iter().map(String::as_str).collect();
        product
            .partial_trace(&[IN])?
            .relabel(&[(OUT, factor)])?
            .permute(&names)
    }

    /// Replaces a trivial output by the preparation of `state`.
    pub fn then_prepare(&self, state: &DMatrix<C64>) -> Result<Self> {
        if self.out_dim() != 1 {
            return Err(Error::FactorMismatch(format!(
                "cannot append a preparation to a map with output dimension {}",
                self.out_dim()
            )));
        }
        let inp = self.choi.partial_trace(&[OUT])?;
        let out = LabeledOperator::single(OUT, state.clone())?;
        Self::new(out.kron(&inp)?, self.outcome.clone())
    }

    /// Choi operator relabeled for step `j`, with a trivial output dropped.
    pub fn at_step(&self, step: usize) -> LabeledOperator {
        let o = output_name(step);
        let i = input_name(step);
        self.choi
            .relabel(&[(OUT, o.as_str()), (IN, i.as_str())])
            .expect("fresh labels")
            .squeeze()
    }
}

/// Choi operator `Σ_k (K_k ⊗ 1) Φ (K_k ⊗ 1)†` on factors `(out, in)`.
pub fn choi_from_kraus(kraus: &[DMatrix<C64>]) -> Result<LabeledOperator> {
    let first = kraus
        .first()
        .ok_or_else(|| Error::KrausShape("no Kraus operators".into()))?;
    let (dout, din) = first.shape();
    if dout == 0 || din == 0 {
        return Err(Error::KrausShape("empty Kraus operator".into()));
    }
    if let Some(k) = kraus.iter().find(|k| k.shape() != (dout, din)) {
        return Err(Error::KrausShape(format!(
            "{}x{} and {}x{}",
            dout,
            din,
            k.nrows(),
            k.ncols()
        )));
    }
    // Vectorised Kraus operator: component (o, i) is K[o, i].
    let d = dout * din;
    let mut m = DMatrix::zeros(d, d);
    for k in kraus {
        let v: Vec<C64> = (0..dout)
            .flat_map(|o| (0..din).map(move |i| (o, i)))
            .map(|(o, i)| k[(o, i)])
            .collect();
        for r in 0..d {
            if v[r] == ZERO {
                continue;
            }
            for c in 0..d {
                m[(r, c)] += v[r] * v[c].conj();
            }
        }
    }
    LabeledOperator::new(
        vec![FactorLabel::new(OUT, dout), FactorLabel::new(IN, din)],
        m,
    )
}

/// `tr_in[(1_out ⊗ ρᵀ) · choi]`.
pub fn apply_map(map: &CpMap, rho: &LabeledOperator) -> Result<LabeledOperator> {
    if rho.factors().len() != 1 || rho.dim() != map.in_dim() {
        return Err(Error::FactorMismatch(format!(
            "map input has dimension {}, state is {}",
            map.in_dim(),
            crate::tensor::display_factors(rho.factors())
        )));
    }
    let name = rho.factors()[0].name.clone();
    let as_in = rho.relabel(&[(name.as_str(), IN)])?;
    let out = map.choi.contract(&as_in)?;
    out.relabel(&[(OUT, name.as_str())])
}

/// Per-element positivity and the trace-preservation defect of the sum.
#[derive(Debug, Clone, Serialize)]
pub struct InstrumentReport {
    pub elements: Vec<ElementCheck>,
    /// `‖tr_out Σ_x O^(x) − 1_in‖₁`
    pub trace_deviation: f64,
    pub valid: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct ElementCheck {
    pub outcome: String,
    pub min_eigenvalue: f64,
    pub psd: bool,
}

/// A finite collection of CP maps on identical spaces.
#[derive(Debug, Clone, PartialEq)]
pub struct Instrument {
    elements: Vec<CpMap>,
}

impl Instrument {
    /// Collects maps that share input and output dimensions. Trace preservation is
    /// not enforced here; see [`validate_instrument`].
    pub fn new(elements: Vec<CpMap>) -> Result<Self> {
        let first = elements
            .first()
            .ok_or_else(|| Error::InconsistentInstrument("no elements".into()))?;
        let dims = (first.out_dim(), first.in_dim());
        if let Some(e) = elements.iter().find(|e| (e.out_dim(), e.in_dim()) != dims) {
            return Err(Error::InconsistentInstrument(format!(
                "element `{}` is {}->{}, expected {}->{}",
                e.outcome,
                e.in_dim(),
                e.out_dim(),
                dims.1,
                dims.0
            )));
        }
        Ok(Self { elements })
    }

    /// Like [`Instrument::new`] but also requires a valid instrument.
    pub fn checked(elements: Vec<CpMap>) -> Result<Self> {
        let j = Self::new(elements)?;
        let report = j.validate();
        if let Some(bad) = report.elements.iter().find(|e| !e.psd) {
            return Err(Error::NotPositive(bad.min_eigenvalue));
        }
        if report.trace_deviation > tol::TRACE {
            return Err(Error::NotTracePreserving(report.trace_deviation));
        }
        Ok(j)
    }

    pub fn elements(&self) -> &[CpMap] {
        &self.elements
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn in_dim(&self) -> usize {
        self.elements[0].in_dim()
    }

    pub fn out_dim(&self) -> usize {
        self.elements[0].out_dim()
    }

    /// Choi operator of the outcome-averaged map.
    pub fn deterministic_sum(&self) -> LabeledOperator {
        let mut acc = self.elements[0].choi.clone();
        for e in &self.elements[1..] {
            acc = acc.add(&e.choi).expect("shared factors");
        }
        acc
    }

    /// The outcome-averaged map.
    pub fn average_map(&self) -> Result<CpMap> {
        CpMap::new(self.deterministic_sum(), "average")
    }

    pub fn validate(&self) -> InstrumentReport {
        validate_instrument(self)
    }

    /// Born probabilities of each outcome on a single-factor state.
    pub fn probabilities(&self, rho: &LabeledOperator) -> Result<Vec<f64>> {
        self.elements
            .iter()
            .map(|e| Ok(e.apply(rho)?.trace().re))
            .collect()
    }

    /// Sharp classical instrument `{|x><x|_out ⊗ |x><x|_in}`.
    pub fn sharp_classical(dim: usize) -> Result<Self> {
        sharp_classical_instrument(dim)
    }

    /// POVM with the given effects, as maps with a trivial output.
    pub fn povm(effects: &[DMatrix<C64>]) -> Result<Self> {
        let maps = effects
            .iter()
            .enumerate()
            .map(|(k, e)| CpMap::from_effect(e, k.to_string()))
            .collect::<Result<Vec<_>>>()?;
        Self::new(maps)
    }

    /// Projective measurement in the computational basis, trivial output.
    pub fn computational_povm(dim: usize) -> Result<Self> {
        Self::povm(&computational_projectors(dim))
    }

    /// Four-outcome tetrahedral POVM on a qubit, trivial output.
    pub fn tetrahedral_povm() -> Self {
        let effects: Vec<DMatrix<C64>> = (0..4).map(tetrahedral_effect).collect();
        Self::povm(&effects).expect("tetrahedral effects are positive")
    }

    /// Appends the preparation of `state` to every element with a trivial output.
    pub fn then_prepare(&self, state: &DMatrix<C64>) -> Result<Self> {
        Self::new(
            self.elements
                .iter()
                .map(|e| e.then_prepare(state))
                .collect::<Result<Vec<_>>>()?,
        )
    }

    /// Element `z` becomes `Σ_x c[x, z] · O^(x)`.
    pub fn mix(&self, coeffs: &DMatrix<f64>) -> Result<Self> {
        mix_instrument(self, coeffs)
    }

    /// Reorders elements so that new element `k` is old element `perm[k]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        let mut seen = vec![false; self.len()];
        if perm.len() != self.len() || perm.iter().any(|&p| p >= self.len() || std::mem::replace(&mut seen[p], true)) {
            return Err(Error::InvalidPermutation(format!("{perm:?}")));
        }
        Self::new(perm.iter().map(|&p| self.elements[p].clone()).collect())
    }
}

pub fn validate_instrument(j: &Instrument) -> InstrumentReport {
    let elements: Vec<ElementCheck> = j
        .elements
        .iter()
        .map(|e| {
            let min = e.choi.min_eigenvalue().unwrap_or(f64::NEG_INFINITY);
            ElementCheck {
                outcome: e.outcome.clone(),
                min_eigenvalue: min,
                psd: min >= -tol::PSD,
            }
        })
        .collect();
    let sum = j.deterministic_sum();
    let marginal = sum.partial_trace(&[OUT]).expect("out factor");
    let id = LabeledOperator::identity(marginal.factors().to_vec()).expect("positive dims");
    let trace_deviation = marginal.sub(&id).expect("same factors").trace_norm();
    let valid = elements.iter().all(|e| e.psd) && trace_deviation <= tol::TRACE;
    InstrumentReport {
        elements,
        trace_deviation,
        valid,
    }
}

pub fn sharp_classical_instrument(dim: usize) -> Result<Instrument> {
    if dim < 2 {
        return Err(Error::DimensionTooSmall { min: 2, got: dim });
    }
    let elements = (0..dim)
        .map(|x| {
            let mut k = DMatrix::zeros(dim, dim);
            k[(x, x)] = ONE;
            CpMap::from_kraus(&[k], x.to_string())
        })
        .collect::<Result<Vec<_>>>()?;
    Instrument::new(elements)
}

/// Linear recombination of basis elements, checked for validity.
pub fn mix_instrument(basis: &Instrument, coeffs: &DMatrix<f64>) -> Result<Instrument> {
    let chois: Vec<LabeledOperator> = basis.elements.iter().map(|e| e.choi.clone()).collect();
    let mixed = mix_operators(&chois, coeffs)?;
    let elements = mixed
        .into_iter()
        .enumerate()
        .map(|(z, op)| CpMap::new(op, format!("z{z}")))
        .collect::<Result<Vec<_>>>()?;
    let j = Instrument::new(elements)?;
    let report = j.validate();
    if report.trace_deviation > tol::TRACE {
        return Err(Error::NotTracePreserving(report.trace_deviation));
    }
    Ok(j)
}

pub(crate) fn mix_operators(
    ops: &[LabeledOperator],
    coeffs: &DMatrix<f64>,
) -> Result<Vec<LabeledOperator>> {
    if coeffs.nrows() != ops.len() || coeffs.ncols() == 0 {
        return Err(Error::InvalidCoefficients(format!(
            "expected {} rows, got {}x{}",
            ops.len(),
            coeffs.nrows(),
            coeffs.ncols()
        )));
    }
    (0..coeffs.ncols())
        .map(|z| {
            let mut acc = ops[0].scale(coeffs[(0, z)]);
            for (x, op) in ops.iter().enumerate().skip(1) {
                if coeffs[(x, z)] != 0.0 {
                    acc = acc.add(&op.scale(coeffs[(x, z)]))?;
                }
            }
            Ok(acc)
        })
        .collect()
}

/// Operators biorthogonal to a basis: `tr(B_x Δ_y) = δ_xy`.
#[derive(Debug, Clone)]
pub struct DualSet {
    pub duals: Vec<LabeledOperator>,
}

impl DualSet {
    /// Largest `|tr(B_x Δ_y) − δ_xy|`.
    pub fn biorthogonality_error(&self, basis: &[LabeledOperator]) -> Result<f64> {
        let mut worst = 0.0f64;
        for (x, b) in basis.iter().enumerate() {
            for (y, d) in self.duals.iter().enumerate() {
                let v = hs_bilinear(b, d)?;
                let target = if x == y { ONE } else { ZERO };
                worst = worst.max((v - target).norm());
            }
        }
        Ok(worst)
    }
}

/// `tr(A B)` for operators on the same factors.
fn hs_bilinear(a: &LabeledOperator, b: &LabeledOperator) -> Result<C64> {
    // tr(AB) = tr[(Aᵀ)ᵀ B]
    b.pair(&a.transpose())
}

/// Solves the Gram system `G_xz = tr(B_x B_z)`, `Δ_y = Σ_z (G⁻¹)_zy B_z`.
pub fn dual_set(basis: &[LabeledOperator]) -> Result<DualSet> {
    let n = basis.len();
    if n == 0 {
        return Err(Error::IllConditioned(f64::INFINITY));
    }
    let mut gram = DMatrix::<C64>::zeros(n, n);
    for x in 0..n {
        for z in 0..n {
            gram[(x, z)] = hs_bilinear(&basis[x], &basis[z])?;
        }
    }
    let sv = gram.singular_values();
    let (smax, smin) = (sv.max(), sv.min());
    let cond = if smin > 0.0 { smax / smin } else { f64::INFINITY };
    if !(cond <= tol::GRAM_CONDITION) {
        return Err(Error::IllConditioned(cond));
    }
    let inv = gram
        .try_inverse()
        .ok_or(Error::IllConditioned(f64::INFINITY))?;
    let duals = (0..n)
        .map(|y| {
            let mut acc = basis[0].scale_complex(inv[(0, y)]);
            for z in 1..n {
                acc = acc.add(&basis[z].scale_complex(inv[(z, y)]))?;
            }
            Ok(acc)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(DualSet { duals })
}

/// Tetrahedral coefficient vectors.
pub const TETRAHEDRAL_VECTORS: [[f64; 3]; 4] = [
    [1.0, 1.0, 1.0],
    [1.0, -1.0, -1.0],
    [-1.0, 1.0, -1.0],
    [-1.0, -1.0, 1.0],
];

/// `Π^(b) = ¼(1 + (1/√3) Σ c_i σ_i)`.
pub fn tetrahedral_effect(b: usize) -> DMatrix<C64> {
    let c = TETRAHEDRAL_VECTORS[b];
    let s = 1.0 / 3f64.sqrt();
    bloch_operator(0.25, [c[0] * s, c[1] * s, c[2] * s])
}

/// `Δ^(b) = ½(1 + √3 Σ c_i σ_i)`.
pub fn tetrahedral_dual(b: usize) -> DMatrix<C64> {
    let c = TETRAHEDRAL_VECTORS[b];
    let s = 3f64.sqrt();
    bloch_operator(0.5, [c[0] * s, c[1] * s, c[2] * s])
}

pub fn computational_projectors(dim: usize) -> Vec<DMatrix<C64>> {
    (0..dim)
        .map(|x| {
            let mut p = DMatrix::zeros(dim, dim);
            p[(x, x)] = ONE;
            p
        })
        .collect()
}

pub fn maximally_mixed(dim: usize) -> DMatrix<C64> {
    DMatrix::identity(dim, dim) * C64::new(1.0 / dim as f64, 0.0)
}

/// One outcome of a multi-step tester.
#[derive(Debug, Clone, PartialEq)]
pub struct TesterElement {
    pub label: String,
    pub op: LabeledOperator,
}

/// Per-level trace-condition defects of a tester's deterministic sum.
#[derive(Debug, Clone, Serialize)]
pub struct TesterReport {
    pub min_eigenvalues: Vec<(String, f64)>,
    /// `(step, ‖tr_{o_j} T_{j} − 1_{i_j} ⊗ T_{j−1}‖₁)`, latest step first.
    pub levels: Vec<(usize, f64)>,
    /// `|tr T − Π_j d_{i_j}|`
    pub total_trace_deviation: f64,
    pub valid: bool,
}

/// Outcome-indexed operators on the interleaved factors of a set of steps.
#[derive(Debug, Clone)]
pub struct InstrumentSequence {
    steps: Vec<usize>,
    elements: Vec<TesterElement>,
}

impl InstrumentSequence {
    /// Elements must act on the same factors, all drawn from `steps`.
    pub fn new(mut steps: Vec<usize>, elements: Vec<TesterElement>) -> Result<Self> {
        steps.sort_unstable();
        steps.dedup();
        let first = elements
            .first()
            .ok_or_else(|| Error::InconsistentInstrument("no elements".into()))?;
        let order = first.op.factors().to_vec();
        for f in &order {
            match parse_step_name(&f.name) {
                Some((s, _)) if steps.contains(&s) => {}
                _ => {
                    return Err(Error::InconsistentInstrument(format!(
                        "factor `{}` does not belong to steps {steps:?}",
                        f.name
                    )))
                }
            }
        }
        let names: Vec<&str> = order.iter().map(|f| f.name.as_str()).collect();
        let elements = elements
            .into_iter()
            .map(|e| {
                let op = e.op.squeeze();
                if op.factors().len() != order.len() {
                    return Err(Error::InconsistentInstrument(format!(
                        "element `{}` acts on different factors",
                        e.label
                    )));
                }
                Ok(TesterElement {
                    label: e.label,
                    op: op.permute(&names)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        if let Some(e) = elements.iter().find(|e| e.op.factors() != order.as_slice()) {
            return Err(Error::InconsistentInstrument(format!(
                "element `{}` has mismatched dimensions",
                e.label
            )));
        }
        Ok(Self { steps, elements })
    }

    /// A single instrument applied at one step.
    pub fn single(step: usize, j: &Instrument) -> Result<Self> {
        let elements = j
            .elements
            .iter()
            .map(|e| TesterElement {
                label: e.outcome.clone(),
                op: e.at_step(step),
            })
            .collect();
        Self::new(vec![step], elements)
    }

    /// Independent instruments at several steps; outcomes are all combinations.
    pub fn product(parts: &[(usize, &Instrument)]) -> Result<Self> {
        let mut elements = vec![TesterElement {
            label: String::new(),
            op: LabeledOperator::scalar(ONE),
        }];
        let mut steps = Vec::new();
        for &(step, j) in parts {
            steps.push(step);
            let mut next = Vec::with_capacity(elements.len() * j.len());
            for acc in &elements {
                for e in &j.elements {
                    let label = if acc.label.is_empty() {
                        e.outcome.clone()
                    } else {
                        format!("{},{}", acc.label, e.outcome)
                    };
                    next.push(TesterElement {
                        label,
                        op: acc.op.kron(&e.at_step(step))?,
                    });
                }
            }
            elements = next;
        }
        Self::new(steps, elements)
    }

    pub fn steps(&self) -> &[usize] {
        &self.steps
    }

    pub fn elements(&self) -> &[TesterElement] {
        &self.elements
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn factors(&self) -> &[FactorLabel] {
        self.elements[0].op.factors()
    }

    pub fn deterministic_sum(&self) -> LabeledOperator {
        let mut acc = self.elements[0].op.clone();
        for e in &self.elements[1..] {
            acc = acc.add(&e.op).expect("aligned factors");
        }
        acc
    }

    /// Positivity of each element and the full trace-condition hierarchy of the sum.
    pub fn validate(&self) -> TesterReport {
        let min_eigenvalues: Vec<(String, f64)> = self
            .elements
            .iter()
            .map(|e| {
                (
                    e.label.clone(),
                    e.op.min_eigenvalue().unwrap_or(f64::NEG_INFINITY),
                )
            })
            .collect();
        let sum = self.deterministic_sum();
        let levels = comb_levels(&sum, &self.steps, CombSide::Tester);
        let expected: usize = self
            .steps
            .iter()
            .map(|&s| sum.factor(&input_name(s)).map_or(1, |f| f.dim))
            .product();
        let total_trace_deviation = (sum.trace().re - expected as f64).abs();
        let valid = min_eigenvalues.iter().all(|(_, m)| *m >= -tol::PSD)
            && levels.iter().all(|(_, d)| *d <= tol::TRACE)
            && total_trace_deviation <= tol::TRACE;
        TesterReport {
            min_eigenvalues,
            levels,
            total_trace_deviation,
            valid,
        }
    }

    /// Element `z` becomes `Σ_x c[x, z] · O^(x)`; the result must be a valid tester.
    pub fn mix(&self, coeffs: &DMatrix<f64>) -> Result<Self> {
        let ops: Vec<LabeledOperator> = self.elements.iter().map(|e| e.op.clone()).collect();
        let mixed = mix_operators(&ops, coeffs)?;
        let elements = mixed
            .into_iter()
            .enumerate()
            .map(|(z, op)| TesterElement {
                label: format!("z{z}"),
                op,
            })
            .collect();
        let seq = Self::new(self.steps.clone(), elements)?;
        let report = seq.validate();
        if let Some((_, m)) = report.min_eigenvalues.iter().find(|(_, m)| *m < -tol::PSD) {
            return Err(Error::NotPositive(*m));
        }
        if !report.valid {
            let worst = report
                .levels
                .iter()
                .map(|(_, d)| *d)
                .fold(report.total_trace_deviation, f64::max);
            return Err(Error::NotTracePreserving(worst));
        }
        Ok(seq)
    }

    /// New element `k` is old element `perm[k]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        let mut seen = vec![false; self.len()];
        if perm.len() != self.len() || perm.iter().any(|&p| p >= self.len() || std::mem::replace(&mut seen[p], true)) {
            return Err(Error::InvalidPermutation(format!("{perm:?}")));
        }
        Self::new(
            self.steps.clone(),
            perm.iter().map(|&p| self.elements[p].clone()).collect(),
        )
    }
}

/// Kronecker product of one map per step, starting at step 0.
pub fn tensor_sequence(per_step: &[CpMap]) -> Result<TesterElement> {
    tensor_sequence_from(0, per_step)
}

/// Kronecker product of one map per step, starting at `first_step`.
/// Factors come out latest step first: `(o_n, i_n, …, o_0, i_0)`.
pub fn tensor_sequence_from(first_step: usize, per_step: &[CpMap]) -> Result<TesterElement> {
    let mut op = LabeledOperator::scalar(ONE);
    let mut labels = Vec::with_capacity(per_step.len());
    for (k, m) in per_step.iter().enumerate() {
        op = m.at_step(first_step + k).kron(&op)?;
        labels.push(m.outcome.clone());
    }
    Ok(TesterElement {
        label: labels.join(","),
        op,
    })
}

#[derive(Clone, Copy, PartialEq, Eq)]
pub(crate) enum CombSide {
    /// Trace `i_j`, expect identity on `o_j`.
    Process,
    /// Trace `o_j`, expect identity on `i_j`.
    Tester,
}

/// Deviations `‖tr_{t_j} X_j − 1_{k_j} ⊗ X_{j−1}‖₁` from the latest step down,
/// with `X_{j−1} = tr_{k_j}(tr_{t_j} X_j) / d_{k_j}`.
pub(crate) fn comb_levels(
    op: &LabeledOperator,
    steps: &[usize],
    side: CombSide,
) -> Vec<(usize, f64)> {
    let mut cur = op.clone();
    let mut out = Vec::with_capacity(steps.len());
    for &step in steps.iter().rev() {
        let (traced, kept) = match side {
            CombSide::Process => (input_name(step), output_name(step)),
            CombSide::Tester => (output_name(step), input_name(step)),
        };
        let a = if cur.has_factor(&traced) {
            cur.partial_trace(&[traced.as_str()]).expect("present")
        } else {
            cur
        };
        match a.factor(&kept).cloned() {
            Some(k) => {
                let reduced = a
                    .partial_trace(&[kept.as_str()])
                    .expect("present")
                    .scale(1.0 / k.dim as f64);
                let expected = reduced.extend_to(a.factors()).expect("subset");
                out.push((step, a.sub(&expected).expect("aligned").trace_norm()));
                cur = reduced;
            }
            None => {
                out.push((step, 0.0));
                cur = a;
            }
        }
    }
    out
}
