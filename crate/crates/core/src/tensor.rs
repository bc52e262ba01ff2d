//! Dense complex operators over ordered, labeled tensor factors.
//!
//! A [`LabeledOperator`] is a `D x D` complex matrix together with the list of
//! factors it acts on, `D` being the product of the factor dimensions. The big
//! index is formed with the first factor as the most significant digit.
//! Every operation that reshuffles factors (Kronecker products, partial traces,
//! permutations, contractions) works by name, so callers never have to track
//! positions by hand.

use std::collections::HashSet;
use std::fmt;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tol;

pub type C64 = Complex64;

pub(crate) const ZERO: C64 = C64::new(0.0, 0.0);
pub(crate) const ONE: C64 = C64::new(1.0, 0.0);

/// Name and dimension of one tensor factor.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FactorLabel {
    pub name: String,
    pub dim: usize,
}

impl FactorLabel {
    pub fn new(name: impl Into<String>, dim: usize) -> Self {
        Self {
            name: name.into(),
            dim,
        }
    }
}

impl fmt::Display for FactorLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}[{}]", self.name, self.dim)
    }
}

/// Eigen-decomposition of a Hermitian operator, eigenvalues ascending.
#[derive(Debug, Clone)]
pub struct Spectrum {
    pub values: Vec<f64>,
    /// Eigenvectors as columns, in the same order as `values`.
    pub vectors: DMatrix<C64>,
}

/// Logarithm base used for entropies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum LogBase {
    #[default]
    Two,
    E,
}

impl LogBase {
    pub fn log(self, x: f64) -> f64 {
        match self {
            LogBase::Two => x.log2(),
            LogBase::E => x.ln(),
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            LogBase::Two => "2",
            LogBase::E => "e",
        }
    }
}

/// Complex square matrix over an ordered list of labeled tensor factors.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledOperator {
    factors: Vec<FactorLabel>,
    matrix: DMatrix<C64>,
}

fn check_factors(factors: &[FactorLabel]) -> Result<usize> {
    let mut seen = HashSet::new();
    let mut total = 1usize;
    for f in factors {
        if f.dim == 0 {
            return Err(Error::ZeroDimension(f.name.clone()));
        }
        if !seen.insert(f.name.as_str()) {
            return Err(Error::DuplicateFactor(f.name.clone()));
        }
        total *= f.dim;
    }
    Ok(total)
}

/// Place values of each factor, first factor most significant.
fn strides(dims: &[usize]) -> Vec<usize> {
    let mut out = vec![1; dims.len()];
    for k in (0..dims.len().saturating_sub(1)).rev() {
        out[k] = out[k + 1] * dims[k + 1];
    }
    out
}

/// For every multi-index over `dims` (row-major), the offset `sum digit * stride`.
fn offsets(dims: &[usize], strides: &[usize]) -> Vec<usize> {
    let mut out = vec![0usize];
    for (&d, &s) in dims.iter().zip(strides) {
        let mut next = Vec::with_capacity(out.len() * d);
        for &base in &out {
            for digit in 0..d {
                next.push(base + digit * s);
            }
        }
        out = next;
    }
    out
}

impl LabeledOperator {
    pub fn new(factors: Vec<FactorLabel>, matrix: DMatrix<C64>) -> Result<Self> {
        let d = check_factors(&factors)?;
        if matrix.nrows() != d || matrix.ncols() != d {
            return Err(Error::ShapeMismatch {
                rows: matrix.nrows(),
                cols: matrix.ncols(),
                expected: d,
            });
        }
        Ok(Self { factors, matrix })
    }

    /// A 1x1 operator with no factors.
    pub fn scalar(value: C64) -> Self {
        Self {
            factors: Vec::new(),
            matrix: DMatrix::from_element(1, 1, value),
        }
    }

    pub fn identity(factors: Vec<FactorLabel>) -> Result<Self> {
        let d = check_factors(&factors)?;
        Ok(Self {
            factors,
            matrix: DMatrix::identity(d, d),
        })
    }

    pub fn zeros(factors: Vec<FactorLabel>) -> Result<Self> {
        let d = check_factors(&factors)?;
        Ok(Self {
            factors,
            matrix: DMatrix::zeros(d, d),
        })
    }

    /// Single-factor operator from a matrix.
    pub fn single(name: impl Into<String>, matrix: DMatrix<C64>) -> Result<Self> {
        let dim = matrix.nrows();
        Self::new(vec![FactorLabel::new(name, dim)], matrix)
    }

    /// `|v><v|` on the given factors.
    pub fn projector(factors: Vec<FactorLabel>, v: &[C64]) -> Result<Self> {
        let d = check_factors(&factors)?;
        if v.len() != d {
            return Err(Error::ShapeMismatch {
                rows: v.len(),
                cols: 1,
                expected: d,
            });
        }
        let matrix = DMatrix::from_fn(d, d, |i, j| v[i] * v[j].conj());
        Ok(Self { factors, matrix })
    }

    pub fn from_diagonal(factors: Vec<FactorLabel>, diag: &[f64]) -> Result<Self> {
        let d = check_factors(&factors)?;
        if diag.len() != d {
            return Err(Error::ShapeMismatch {
                rows: diag.len(),
                cols: 1,
                expected: d,
            });
        }
        let mut matrix = DMatrix::zeros(d, d);
        for (k, &x) in diag.iter().enumerate() {
            matrix[(k, k)] = C64::new(x, 0.0);
        }
        Ok(Self { factors, matrix })
    }

    pub fn factors(&self) -> &[FactorLabel] {
        &self.factors
    }

    pub fn factor_names(&self) -> Vec<&str> {
        self.factors.iter().map(|f| f.name.as_str()).collect()
    }

    pub fn factor(&self, name: &str) -> Option<&FactorLabel> {
        self.factors.iter().find(|f| f.name == name)
    }

    pub fn has_factor(&self, name: &str) -> bool {
        self.factor(name).is_some()
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.matrix
    }

    pub fn into_matrix(self) -> DMatrix<C64> {
        self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    fn position(&self, name: &str) -> Result<usize> {
        self.factors
            .iter()
            .position(|f| f.name == name)
            .ok_or_else(|| Error::UnknownFactor(name.to_string()))
    }

    pub fn trace(&self) -> C64 {
        self.matrix.trace()
    }

    pub fn dagger(&self) -> Self {
        Self {
            factors: self.factors.clone(),
            matrix: self.matrix.adjoint(),
        }
    }

    pub fn transpose(&self) -> Self {
        Self {
            factors: self.factors.clone(),
            matrix: self.matrix.transpose(),
        }
    }

    pub fn scale(&self, c: f64) -> Self {
        self.scale_complex(C64::new(c, 0.0))
    }

    pub fn scale_complex(&self, c: C64) -> Self {
        Self {
            factors: self.factors.clone(),
            matrix: &self.matrix * c,
        }
    }

    fn same_factors(&self, other: &Self) -> Result<()> {
        if self.factors != other.factors {
            return Err(Error::FactorMismatch(format!(
                "{} vs {}",
                display_factors(&self.factors),
                display_factors(&other.factors)
            )));
        }
        Ok(())
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.same_factors(other)?;
        Ok(Self {
            factors: self.factors.clone(),
            matrix: &self.matrix + &other.matrix,
        })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.same_factors(other)?;
        Ok(Self {
            factors: self.factors.clone(),
            matrix: &self.matrix - &other.matrix,
        })
    }

    /// Matrix product of two operators on identical factor lists.
    pub fn matmul(&self, other: &Self) -> Result<Self> {
        self.same_factors(other)?;
        Ok(Self {
            factors: self.factors.clone(),
            matrix: &self.matrix * &other.matrix,
        })
    }

    /// Renames factors; names not in `map` are kept.
    pub fn relabel(&self, map: &[(&str, &str)]) -> Result<Self> {
        let factors: Vec<FactorLabel> = self
            .factors
            .iter()
            .map(|f| {
                let name = map
                    .iter()
                    .find(|(from, _)| *from == f.name)
                    .map(|(_, to)| to.to_string())
                    .unwrap_or_else(|| f.name.clone());
                FactorLabel::new(name, f.dim)
            })
            .collect();
        for (from, _) in map {
            self.position(from)?;
        }
        check_factors(&factors)?;
        Ok(Self {
            factors,
            matrix: self.matrix.clone(),
        })
    }

    /// Drops factors of dimension 1.
    pub fn squeeze(&self) -> Self {
        Self {
            factors: self.factors.iter().filter(|f| f.dim > 1).cloned().collect(),
            matrix: self.matrix.clone(),
        }
    }

    /// Kronecker product; factors of `self` come first.
    pub fn kron(&self, other: &Self) -> Result<Self> {
        let mut factors = self.factors.clone();
        factors.extend(other.factors.iter().cloned());
        check_factors(&factors)?;
        Ok(Self {
            factors,
            matrix: self.matrix.kronecker(&other.matrix),
        })
    }

    /// Traces out the named factors; the rest keep their relative order.
    pub fn partial_trace(&self, over: &[&str]) -> Result<Self> {
        let mut traced = Vec::with_capacity(over.len());
        for name in over {
            let p = self.position(name)?;
            if traced.contains(&p) {
                return Err(Error::DuplicateFactor(name.to_string()));
            }
            traced.push(p);
        }
        traced.sort_unstable();
        let kept: Vec<usize> = (0..self.factors.len())
            .filter(|p| !traced.contains(p))
            .collect();

        let dims: Vec<usize> = self.factors.iter().map(|f| f.dim).collect();
        let st = strides(&dims);
        let pick = |idx: &[usize]| -> (Vec<usize>, Vec<usize>) {
            (
                idx.iter().map(|&p| dims[p]).collect(),
                idx.iter().map(|&p| st[p]).collect(),
            )
        };
        let (kd, ks) = pick(&kept);
        let (td, ts) = pick(&traced);
        let koff = offsets(&kd, &ks);
        let toff = offsets(&td, &ts);

        let dk = koff.len();
        let mut out = DMatrix::zeros(dk, dk);
        for c in 0..dk {
            for r in 0..dk {
                let mut acc = ZERO;
                for &t in &toff {
                    acc += self.matrix[(koff[r] + t, koff[c] + t)];
                }
                out[(r, c)] = acc;
            }
        }
        Ok(Self {
            factors: kept.iter().map(|&p| self.factors[p].clone()).collect(),
            matrix: out,
        })
    }

    /// Transpose on the listed factors only.
    pub fn partial_transpose(&self, over: &[&str]) -> Result<Self> {
        let mut pos = Vec::with_capacity(over.len());
        for name in over {
            pos.push(self.position(name)?);
        }
        let dims: Vec<usize> = self.factors.iter().map(|f| f.dim).collect();
        let st = strides(&dims);
        let kept: Vec<usize> = (0..dims.len()).filter(|p| !pos.contains(p)).collect();
        let pick = |ps: &[usize]| {
            offsets(
                &ps.iter().map(|&p| dims[p]).collect::<Vec<_>>(),
                &ps.iter().map(|&p| st[p]).collect::<Vec<_>>(),
            )
        };
        let (koff, toff) = (pick(&kept), pick(&pos));
        let mut matrix = DMatrix::zeros(self.dim(), self.dim());
        for &ra in &koff {
            for &cb in &koff {
                for &t in &toff {
                    for &s in &toff {
                        matrix[(ra + s, cb + t)] = self.matrix[(ra + t, cb + s)];
                    }
                }
            }
        }
        Ok(Self {
            factors: self.factors.clone(),
            matrix,
        })
    }

    /// Traces out every factor not listed in `keep`, then orders the result as `keep`.
    pub fn reduce_to(&self, keep: &[&str]) -> Result<Self> {
        for name in keep {
            self.position(name)?;
        }
        let over: Vec<&str> = self
            .factors
            .iter()
            .map(|f| f.name.as_str())
            .filter(|n| !keep.contains(n))
            .collect();
        self.partial_trace(&over)?.permute(keep)
    }

    /// Reorders factors to `order`, which must be a permutation of the current names.
    pub fn permute(&self, order: &[&str]) -> Result<Self> {
        if order.len() != self.factors.len() {
            return Err(Error::InvalidPermutation(format!(
                "expected {} names, got {}",
                self.factors.len(),
                order.len()
            )));
        }
        let mut pos = Vec::with_capacity(order.len());
        for name in order {
            let p = self
                .position(name)
                .map_err(|_| Error::InvalidPermutation(format!("unknown factor `{name}`")))?;
            if pos.contains(&p) {
                return Err(Error::InvalidPermutation(format!("`{name}` repeated")));
            }
            pos.push(p);
        }
        if pos.iter().enumerate().all(|(k, &p)| k == p) {
            return Ok(self.clone());
        }
        let dims: Vec<usize> = self.factors.iter().map(|f| f.dim).collect();
        let st = strides(&dims);
        let nd: Vec<usize> = pos.iter().map(|&p| dims[p]).collect();
        let ns: Vec<usize> = pos.iter().map(|&p| st[p]).collect();
        let map = offsets(&nd, &ns);
        let d = map.len();
        let matrix = DMatrix::from_fn(d, d, |i, j| self.matrix[(map[i], map[j])]);
        Ok(Self {
            factors: pos.iter().map(|&p| self.factors[p].clone()).collect(),
            matrix,
        })
    }

    /// Tensors with the identity on `extra` and reorders to `order`.
    pub fn extend_to(&self, order: &[FactorLabel]) -> Result<Self> {
        let extra: Vec<FactorLabel> = order
            .iter()
            .filter(|f| !self.has_factor(&f.name))
            .cloned()
            .collect();
        for f in &self.factors {
            if !order.iter().any(|g| g == f) {
                return Err(Error::FactorMismatch(format!(
                    "{f} not present in target order"
                )));
            }
        }
        let names: Vec<&str> = order.iter().map(|f| f.name.as_str()).collect();
        self.kron(&Self::identity(extra)?)?.permute(&names)
    }

    /// `tr[elementᵀ · self]` where `element` acts on exactly the same factor set.
    pub fn pair(&self, element: &Self) -> Result<C64> {
        let e = self.align(element)?;
        Ok(self
            .matrix
            .iter()
            .zip(e.matrix.iter())
            .fold(ZERO, |acc, (a, b)| acc + a * b))
    }

    fn align(&self, other: &Self) -> Result<Self> {
        let mut mine: Vec<&FactorLabel> = self.factors.iter().collect();
        let mut theirs: Vec<&FactorLabel> = other.factors.iter().collect();
        mine.sort_by(|a, b| a.name.cmp(&b.name));
        theirs.sort_by(|a, b| a.name.cmp(&b.name));
        if mine != theirs {
            return Err(Error::FactorMismatch(format!(
                "{} vs {}",
                display_factors(&self.factors),
                display_factors(&other.factors)
            )));
        }
        other.permute(&self.factor_names())
    }

    /// `tr_S[(elementᵀ ⊗ 1) · self]` where `S` is the factor set of `element`.
    ///
    /// This is the partial Born-rule contraction: it feeds an operator on a
    /// subset of factors into `self` and returns what is left on the rest.
    pub fn contract(&self, element: &Self) -> Result<Self> {
        let mut traced = Vec::with_capacity(element.factors.len());
        for f in &element.factors {
            let p = self.position(&f.name)?;
            if self.factors[p].dim != f.dim {
                return Err(Error::FactorMismatch(format!(
                    "{} vs {}",
                    self.factors[p], f
                )));
            }
            traced.push(p);
        }
        traced.sort_unstable();
        let kept: Vec<usize> = (0..self.factors.len())
            .filter(|p| !traced.contains(p))
            .collect();
        let traced_names: Vec<&str> = traced
            .iter()
            .map(|&p| self.factors[p].name.as_str())
            .collect();
        let e = element.permute(&traced_names)?;

        let dims: Vec<usize> = self.factors.iter().map(|f| f.dim).collect();
        let st = strides(&dims);
        let koff = offsets(
            &kept.iter().map(|&p| dims[p]).collect::<Vec<_>>(),
            &kept.iter().map(|&p| st[p]).collect::<Vec<_>>(),
        );
        let toff = offsets(
            &traced.iter().map(|&p| dims[p]).collect::<Vec<_>>(),
            &traced.iter().map(|&p| st[p]).collect::<Vec<_>>(),
        );
        let nonzero: Vec<(usize, usize, C64)> = (0..toff.len())
            .flat_map(|t| (0..toff.len()).map(move |s| (t, s)))
            .filter_map(|(t, s)| {
                let v = e.matrix[(t, s)];
                (v != ZERO).then_some((toff[t], toff[s], v))
            })
            .collect();

        let dk = koff.len();
        let mut out = DMatrix::zeros(dk, dk);
        for c in 0..dk {
            for r in 0..dk {
                let mut acc = ZERO;
                for &(t, s, v) in &nonzero {
                    acc += v * self.matrix[(koff[r] + t, koff[c] + s)];
                }
                out[(r, c)] = acc;
            }
        }
        Ok(Self {
            factors: kept.iter().map(|&p| self.factors[p].clone()).collect(),
            matrix: out,
        })
    }

    /// Largest entrywise deviation `|a_ij - conj(a_ji)|`.
    pub fn hermitian_deviation(&self) -> f64 {
        let d = self.dim();
        let mut worst = 0.0f64;
        for i in 0..d {
            for j in i..d {
                let dev = (self.matrix[(i, j)] - self.matrix[(j, i)].conj()).norm();
                worst = worst.max(dev);
            }
        }
        worst
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermitian_deviation() <= tol
    }

    fn require_hermitian(&self) -> Result<()> {
        let dev = self.hermitian_deviation();
        if dev > tol::HERM {
            return Err(Error::NotHermitian(dev));
        }
        Ok(())
    }

    fn hermitian_part(&self) -> DMatrix<C64> {
        (&self.matrix + self.matrix.adjoint()) * C64::new(0.5, 0.0)
    }

    /// Eigenvalues (ascending) and eigenvectors of a Hermitian operator.
    pub fn eig_hermitian(&self) -> Result<Spectrum> {
        self.require_hermitian()?;
        let eig = self.hermitian_part().symmetric_eigen();
        let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
        let d = self.dim();
        let vectors = DMatrix::from_fn(d, d, |i, j| eig.eigenvectors[(i, order[j])]);
        Ok(Spectrum { values, vectors })
    }

    /// Eigenvalues only, ascending.
    pub fn eigenvalues(&self) -> Result<Vec<f64>> {
        self.require_hermitian()?;
        let mut values: Vec<f64> = self
            .hermitian_part()
            .symmetric_eigenvalues()
            .iter()
            .copied()
            .collect();
        values.sort_by(f64::total_cmp);
        Ok(values)
    }

    pub fn min_eigenvalue(&self) -> Result<f64> {
        Ok(self.eigenvalues()?.first().copied().unwrap_or(0.0))
    }

    /// True iff the smallest eigenvalue is at least `-tol`.
    pub fn is_psd(&self, tol: f64) -> Result<bool> {
        Ok(self.min_eigenvalue()? >= -tol)
    }

    /// Von Neumann entropy of a unit-trace positive operator.
    pub fn von_neumann_entropy(&self, base: LogBase) -> Result<f64> {
        let values = self.eigenvalues()?;
        let min = values.first().copied().unwrap_or(0.0);
        if min < -tol::PSD {
            return Err(Error::NotPositive(min));
        }
        let tr = self.trace().re;
        if (tr - 1.0).abs() > tol::TRACE {
            return Err(Error::BadTrace {
                actual: tr,
                expected: 1.0,
            });
        }
        Ok(entropy_of_spectrum(&values, base))
    }

    /// Sum of singular values.
    pub fn trace_norm(&self) -> f64 {
        if self.is_hermitian(tol::HERM) {
            self.hermitian_part()
                .symmetric_eigenvalues()
                .iter()
                .map(|x| x.abs())
                .sum()
        } else {
            self.matrix.singular_values().iter().sum()
        }
    }

    /// Half the trace norm of `self - other`.
    pub fn trace_distance(&self, other: &Self) -> Result<f64> {
        Ok(0.5 * self.sub(other)?.trace_norm())
    }

    /// Largest entrywise modulus.
    pub fn max_abs(&self) -> f64 {
        self.matrix.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }
}

/// `-Σ λ log λ` with eigenvalues below the floor treated as zero.
pub fn entropy_of_spectrum(values: &[f64], base: LogBase) -> f64 {
    values
        .iter()
        .filter(|&&x| x > tol::EIG_FLOOR)
        .map(|&x| -x * base.log(x))
        .sum()
}

pub(crate) fn display_factors(f: &[FactorLabel]) -> String {
    let parts: Vec<String> = f.iter().map(|x| x.to_string()).collect();
    format!("({})", parts.join(", "))
}

pub fn kron(a: &LabeledOperator, b: &LabeledOperator) -> Result<LabeledOperator> {
    a.kron(b)
}

pub fn partial_trace(a: &LabeledOperator, over: &[&str]) -> Result<LabeledOperator> {
    a.partial_trace(over)
}

pub fn permute_factors(a: &LabeledOperator, order: &[&str]) -> Result<LabeledOperator> {
    a.permute(order)
}

pub fn eig_hermitian(a: &LabeledOperator) -> Result<Spectrum> {
    a.eig_hermitian()
}

pub fn von_neumann_entropy(rho: &LabeledOperator, base: LogBase) -> Result<f64> {
    rho.von_neumann_entropy(base)
}

pub fn is_psd(a: &LabeledOperator, tol: f64) -> Result<bool> {
    a.is_psd(tol)
}

pub fn trace_distance(a: &LabeledOperator, b: &LabeledOperator) -> Result<f64> {
    a.trace_distance(b)
}

/// Pauli matrices `[1, σx, σy, σz]`.
pub fn paulis() -> [DMatrix<C64>; 4] {
    let c = |re: f64, im: f64| C64::new(re, im);
    [
        DMatrix::from_row_slice(2, 2, &[c(1., 0.), c(0., 0.), c(0., 0.), c(1., 0.)]),
        DMatrix::from_row_slice(2, 2, &[c(0., 0.), c(1., 0.), c(1., 0.), c(0., 0.)]),
        DMatrix::from_row_slice(2, 2, &[c(0., 0.), c(0., -1.), c(0., 1.), c(0., 0.)]),
        DMatrix::from_row_slice(2, 2, &[c(1., 0.), c(0., 0.), c(0., 0.), c(-1., 0.)]),
    ]
}

/// `(1/2)(1 + r·σ)` scaled by `scale`.
pub fn bloch_operator(scale: f64, r: [f64; 3]) -> DMatrix<C64> {
    let p = paulis();
    let mut m = p[0].clone();
    for k in 0..3 {
        m += &p[k + 1] * C64::new(r[k], 0.0);
    }
    m * C64::new(scale, 0.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn f(name: &str, dim: usize) -> FactorLabel {
        FactorLabel::new(name, dim)
    }

    fn qubit(name: &str, m: DMatrix<C64>) -> LabeledOperator {
        LabeledOperator::single(name, m).unwrap()
    }

    fn diag(name: &str, d: &[f64]) -> LabeledOperator {
        LabeledOperator::from_diagonal(vec![f(name, d.len())], d).unwrap()
    }

    #[test]
    fn kron_identity_with_sigma_x() {
        let id = LabeledOperator::identity(vec![f("a", 2)]).unwrap();
        let sx = qubit("b", paulis()[1].clone());
        let k = id.kron(&sx).unwrap();
        assert_eq!(k.trace(), ZERO);
        let m = k.matrix();
        assert_eq!(m[(0, 1)], ONE);
        assert_eq!(m[(2, 3)], ONE);
        assert_eq!(m[(0, 3)], ZERO);
        assert_eq!(k.factor_names(), vec!["a", "b"]);
    }

    #[test]
    fn kron_rejects_duplicate_names() {
        let a = diag("a", &[1.0, 0.0]);
        assert_eq!(a.kron(&a), Err(Error::DuplicateFactor("a".into())));
    }

    #[test]
    fn partial_trace_inverts_kron_up_to_trace() {
        let rho = qubit("a", bloch_operator(0.5, [0.3, -0.2, 0.4]));
        let tau = diag("b", &[2.0, 1.0, 0.5]);
        let k = rho.kron(&tau).unwrap();
        let back = k.partial_trace(&["b"]).unwrap();
        let expect = rho.scale(3.5);
        assert!(back.trace_distance(&expect).unwrap() < 1e-14);
        let other = k.partial_trace(&["a"]).unwrap();
        assert!(other.trace_distance(&tau).unwrap() < 1e-14);
    }

    #[test]
    fn partial_trace_over_everything_is_trace() {
        let a = diag("a", &[0.25, 0.75]).kron(&diag("b", &[0.1, 0.9])).unwrap();
        let t = a.partial_trace(&["b", "a"]).unwrap();
        assert_eq!(t.dim(), 1);
        assert!((t.matrix()[(0, 0)] - a.trace()).norm() < 1e-15);
    }

    #[test]
    fn partial_trace_of_phi_is_identity() {
        let v = [ONE, ZERO, ZERO, ONE];
        let phi = LabeledOperator::projector(vec![f("x", 2), f("y", 2)], &v).unwrap();
        let r = phi.partial_trace(&["y"]).unwrap();
        assert_eq!(r, LabeledOperator::identity(vec![f("x", 2)]).unwrap());
    }

    #[test]
    fn partial_trace_unknown_name() {
        let a = diag("a", &[1.0, 0.0]);
        assert_eq!(
            a.partial_trace(&["zz"]),
            Err(Error::UnknownFactor("zz".into()))
        );
    }

    #[test]
    fn permute_identity_is_bitwise_equal() {
        let a = diag("a", &[0.2, 0.8]).kron(&diag("b", &[0.1, 0.3, 0.6])).unwrap();
        assert_eq!(a.permute(&["a", "b"]).unwrap(), a);
    }

    #[test]
    fn permute_swaps_kron_order() {
        let rho = qubit("a", bloch_operator(0.5, [0.1, 0.2, 0.3]));
        let tau = diag("b", &[0.1, 0.3, 0.6]);
        let ab = rho.kron(&tau).unwrap();
        let ba = tau.kron(&rho).unwrap();
        assert_eq!(ab.permute(&["b", "a"]).unwrap(), ba);
    }

    #[test]
    fn permute_rejects_bad_orders() {
        let a = diag("a", &[1.0, 0.0]).kron(&diag("b", &[1.0, 0.0])).unwrap();
        assert!(matches!(a.permute(&["a"]), Err(Error::InvalidPermutation(_))));
        assert!(matches!(
            a.permute(&["a", "a"]),
            Err(Error::InvalidPermutation(_))
        ));
        assert!(matches!(
            a.permute(&["a", "c"]),
            Err(Error::InvalidPermutation(_))
        ));
    }

    #[test]
    fn eig_of_sigma_z_and_mixed_state() {
        let sz = qubit("a", paulis()[3].clone());
        let s = sz.eig_hermitian().unwrap();
        assert!((s.values[0] + 1.0).abs() < 1e-14 && (s.values[1] - 1.0).abs() < 1e-14);
        let mixed = diag("a", &[0.5, 0.5]);
        let v = mixed.eigenvalues().unwrap();
        assert!(v.iter().all(|x| (x - 0.5).abs() < 1e-15));
    }

    #[test]
    fn eig_reconstructs_operator() {
        let a = qubit("a", bloch_operator(0.7, [0.2, -0.9, 0.4]))
            .kron(&qubit("b", bloch_operator(0.5, [0.0, 0.3, -0.1])))
            .unwrap();
        let s = a.eig_hermitian().unwrap();
        let d = DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
            4,
            s.values.iter().map(|&x| C64::new(x, 0.0)),
        ));
        let rec = &s.vectors * d * s.vectors.adjoint();
        let err = (rec - a.matrix()).iter().map(|z| z.norm()).fold(0.0, f64::max);
        assert!(err <= tol::EIG);
        assert!(s.values.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn eig_rejects_non_hermitian() {
        let mut m = DMatrix::zeros(2, 2);
        m[(0, 1)] = ONE;
        let a = qubit("a", m);
        assert!(matches!(a.eig_hermitian(), Err(Error::NotHermitian(_))));
        assert!(matches!(a.is_psd(0.0), Err(Error::NotHermitian(_))));
    }

    #[test]
    fn entropy_basics() {
        let pure = qubit("a", bloch_operator(0.5, [0.0, 0.0, 1.0]));
        assert!(pure.von_neumann_entropy(LogBase::Two).unwrap().abs() < 1e-12);
        let mixed = diag("a", &[0.5, 0.5]);
        assert!((mixed.von_neumann_entropy(LogBase::Two).unwrap() - 1.0).abs() < 1e-14);
        assert!(
            (mixed.von_neumann_entropy(LogBase::E).unwrap() - std::f64::consts::LN_2).abs()
                < 1e-14
        );
    }

    #[test]
    fn entropy_errors() {
        let neg = diag("a", &[1.5, -0.5]);
        assert!(matches!(
            neg.von_neumann_entropy(LogBase::Two),
            Err(Error::NotPositive(_))
        ));
        let unnorm = diag("a", &[0.5, 0.6]);
        assert!(matches!(
            unnorm.von_neumann_entropy(LogBase::Two),
            Err(Error::BadTrace { .. })
        ));
    }

    #[test]
    fn psd_checks() {
        assert!(diag("a", &[0.3, 0.7]).is_psd(tol::PSD).unwrap());
        assert!(LabeledOperator::zeros(vec![f("a", 3)])
            .unwrap()
            .is_psd(tol::PSD)
            .unwrap());
        assert!(!diag("a", &[2.0, -1.0]).is_psd(tol::PSD).unwrap());
    }

    #[test]
    fn trace_distance_examples() {
        let a = diag("a", &[0.75, 0.25]);
        let half = diag("a", &[0.5, 0.5]);
        assert!((a.trace_distance(&half).unwrap() - 0.25).abs() < 1e-15);
        assert_eq!(a.trace_distance(&a).unwrap(), 0.0);
        let zero = diag("a", &[1.0, 0.0]);
        let one = diag("a", &[0.0, 1.0]);
        assert!((zero.trace_distance(&one).unwrap() - 1.0).abs() < 1e-15);
        let other = diag("b", &[0.5, 0.5]);
        assert!(matches!(
            a.trace_distance(&other),
            Err(Error::FactorMismatch(_))
        ));
    }

    #[test]
    fn contract_matches_explicit_product_then_trace() {
        let a = qubit("a", bloch_operator(0.5, [0.1, 0.5, -0.3]))
            .kron(&qubit("b", bloch_operator(0.5, [0.6, 0.0, 0.2])))
            .unwrap()
            .add(
                &qubit("a", bloch_operator(0.1, [0.0, 1.0, 0.0]))
                    .kron(&qubit("b", bloch_operator(0.1, [1.0, 0.0, 0.0])))
                    .unwrap(),
            )
            .unwrap();
        let e = qubit("b", bloch_operator(0.5, [0.2, 0.7, 0.1]));
        let direct = e
            .transpose()
            .extend_to(a.factors())
            .unwrap()
            .matmul(&a)
            .unwrap()
            .partial_trace(&["b"])
            .unwrap();
        let fast = a.contract(&e).unwrap();
        assert!(fast.sub(&direct).unwrap().max_abs() < 1e-15);
    }

    #[test]
    fn extend_to_places_identity() {
        let a = diag("a", &[0.2, 0.8]);
        let order = vec![f("b", 2), f("a", 2)];
        let e = a.extend_to(&order).unwrap();
        assert_eq!(e.factor_names(), vec!["b", "a"]);
        assert!(e
            .sub(&LabeledOperator::identity(vec![f("b", 2)]).unwrap().kron(&a).unwrap())
            .unwrap()
            .max_abs()
            == 0.0);
    }
}
