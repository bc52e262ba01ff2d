//! Classical multi-time statistics: joint tables, Markov order,
//! conditional mutual information and the recovery map.

use std::ops::Range;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::tensor::LogBase;
use crate::tol;

/// Normalised table over outcome tuples `(x_0, …, x_{n−1})`, step 0 first.
///
/// Entries are row-major with step 0 as the most significant index.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct JointDistribution {
    alphabet: Vec<usize>,
    table: Vec<f64>,
}

impl JointDistribution {
    pub fn new(alphabet: Vec<usize>, table: Vec<f64>) -> Result<Self> {
        if let Some(a) = alphabet.iter().find(|&&a| a == 0) {
            return Err(Error::InvalidDistribution(format!("alphabet size {a}")));
        }
        let size: usize = alphabet.iter().product();
        if table.len() != size {
            return Err(Error::InvalidDistribution(format!(
                "table has {} entries, alphabet needs {size}",
                table.len()
            )));
        }
        if let Some(p) = table.iter().find(|p| !(**p >= 0.0) || !p.is_finite()) {
            return Err(Error::InvalidDistribution(format!("entry {p} is not a probability")));
        }
        let d = Self { alphabet, table };
        d.check_normalized()?;
        Ok(d)
    }

    /// Divides nonnegative weights by their sum.
    pub fn from_weights(alphabet: Vec<usize>, weights: Vec<f64>) -> Result<Self> {
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) {
            return Err(Error::InvalidDistribution("weights sum to zero".into()));
        }
        Self::new(alphabet, weights.into_iter().map(|w| w / total).collect())
    }

    pub(crate) fn check_normalized(&self) -> Result<()> {
        let total: f64 = self.table.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidDistribution(format!("total probability {total}")));
        }
        Ok(())
    }

    pub fn alphabet(&self) -> &[usize] {
        &self.alphabet
    }

    pub fn table(&self) -> &[f64] {
        &self.table
    }

    pub fn steps(&self) -> usize {
        self.alphabet.len()
    }

    pub fn outcome_of(&self, mut index: usize) -> Vec<usize> {
        let mut out = vec![0; self.alphabet.len()];
        for (s, &a) in self.alphabet.iter().enumerate().rev() {
            out[s] = index % a;
            index /= a;
        }
        out
    }

    pub fn index_of(&self, outcome: &[usize]) -> usize {
        sub_index(outcome, &(0..self.alphabet.len()).collect::<Vec<_>>(), &self.alphabet)
    }

    pub fn prob(&self, outcome: &[usize]) -> f64 {
        self.table[self.index_of(outcome)]
    }

    /// Marginal over `keep`, which is re-sorted into time order.
    pub fn marginal(&self, keep: &[usize]) -> Result<JointDistribution> {
        let mut keep = keep.to_vec();
        keep.sort_unstable();
        keep.dedup();
        if let Some(s) = keep.iter().find(|&&s| s >= self.steps()) {
            return Err(Error::InvalidPartition(format!("step {s} out of range")));
        }
        let alphabet: Vec<usize> = keep.iter().map(|&s| self.alphabet[s]).collect();
        Ok(JointDistribution {
            table: self.marginal_table(&keep),
            alphabet,
        })
    }

    fn marginal_table(&self, keep: &[usize]) -> Vec<f64> {
        let size: usize = keep.iter().map(|&s| self.alphabet[s]).product();
        let mut table = vec![0.0; size];
        for (idx, &p) in self.table.iter().enumerate() {
            let o = self.outcome_of(idx);
            table[sub_index(&o, keep, &self.alphabet)] += p;
        }
        table
    }

    /// Distribution of the unassigned steps given `(step, value)` pairs.
    pub fn conditional(&self, given: &[(usize, usize)]) -> Result<JointDistribution> {
        for &(s, v) in given {
            if s >= self.steps() || v >= self.alphabet[s] {
                return Err(Error::InvalidPartition(format!("assignment x_{s} = {v}")));
            }
        }
        let rest: Vec<usize> = (0..self.steps())
            .filter(|s| given.iter().all(|(g, _)| g != s))
            .collect();
        let size: usize = rest.iter().map(|&s| self.alphabet[s]).product();
        let mut table = vec![0.0; size];
        let mut total = 0.0;
        for (idx, &p) in self.table.iter().enumerate() {
            let o = self.outcome_of(idx);
            if given.iter().all(|&(s, v)| o[s] == v) {
                table[sub_index(&o, &rest, &self.alphabet)] += p;
                total += p;
            }
        }
        if !(total > tol::PROB_FLOOR) {
            return Err(Error::ZeroProbability(total));
        }
        table.iter_mut().for_each(|p| *p /= total);
        Ok(JointDistribution {
            alphabet: rest.iter().map(|&s| self.alphabet[s]).collect(),
            table,
        })
    }

    pub fn entropy(&self, base: LogBase) -> f64 {
        shannon(&self.table, base)
    }

    /// Independent draws from `marginal` at each of `steps` times.
    pub fn iid(marginal: &[f64], steps: usize) -> Result<Self> {
        let a = marginal.len();
        let alphabet = vec![a; steps];
        let size = a.pow(steps as u32);
        let mut d = Self {
            alphabet,
            table: vec![0.0; size],
        };
        for idx in 0..size {
            d.table[idx] = d.outcome_of(idx).iter().map(|&x| marginal[x]).product();
        }
        d.check_normalized()?;
        Ok(d)
    }

    /// Order-1 chain: `initial` at step 0, then `transition[prev][next]`.
    pub fn markov_chain(initial: &[f64], transition: &[Vec<f64>], steps: usize) -> Result<Self> {
        let a = initial.len();
        if transition.len() != a || transition.iter().any(|r| r.len() != a) {
            return Err(Error::InvalidDistribution("transition matrix shape".into()));
        }
        Self::from_rule(a, steps, |o| {
            let mut p = initial[o[0]];
            for w in o.windows(2) {
                p *= transition[w[0]][w[1]];
            }
            p
        })
    }

    /// Symmetric binary chain with a uniform start and flip probability `p_flip`.
    pub fn binary_flip_chain(p_flip: f64, steps: usize) -> Result<Self> {
        let t = vec![vec![1.0 - p_flip, p_flip], vec![p_flip, 1.0 - p_flip]];
        Self::markov_chain(&[0.5, 0.5], &t, steps)
    }

    /// Order-2 binary chain: uniform first two bits, then each bit is the
    /// parity of the previous two, flipped with probability `noise`.
    pub fn parity_chain(noise: f64, steps: usize) -> Result<Self> {
        Self::from_rule(2, steps, |o| {
            let mut p = 1.0;
            for (k, &x) in o.iter().enumerate() {
                p *= if k < 2 {
                    0.5
                } else if x == o[k - 1] ^ o[k - 2] {
                    1.0 - noise
                } else {
                    noise
                };
            }
            p
        })
    }

    fn from_rule(a: usize, steps: usize, f: impl Fn(&[usize]) -> f64) -> Result<Self> {
        let mut d = Self {
            alphabet: vec![a; steps],
            table: vec![0.0; a.pow(steps as u32)],
        };
        for idx in 0..d.table.len() {
            d.table[idx] = f(&d.outcome_of(idx));
        }
        d.check_normalized()?;
        Ok(d)
    }
}

fn sub_index(outcome: &[usize], steps: &[usize], alphabet: &[usize]) -> usize {
    steps.iter().fold(0, |acc, &s| acc * alphabet[s] + outcome[s])
}

fn shannon(p: &[f64], base: LogBase) -> f64 {
    -p.iter()
        .filter(|&&x| x > 0.0)
        .map(|&x| x * base.log(x))
        .sum::<f64>()
}

/// Split of steps `0..n` into history `H`, memory `M` and future `F`, in that time order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct BlockPartition {
    history: Range<usize>,
    memory: Range<usize>,
    future: Range<usize>,
}

impl BlockPartition {
    /// `H = 0..k−ℓ`, `M = k−ℓ..k`, `F = k..n`.
    pub fn new(n: usize, ell: usize, k: usize) -> Result<Self> {
        if ell > k || k > n {
            return Err(Error::InvalidPartition(format!(
                "need ℓ ≤ k ≤ n, got ℓ = {ell}, k = {k}, n = {n}"
            )));
        }
        Ok(Self {
            history: 0..k - ell,
            memory: k - ell..k,
            future: k..n,
        })
    }

    /// Builds a partition from explicit step lists, which must be
    /// contiguous, ordered `H < M < F` and cover `0..n` together.
    pub fn from_blocks(history: &[usize], memory: &[usize], future: &[usize]) -> Result<Self> {
        let all: Vec<usize> = history.iter().chain(memory).chain(future).copied().collect();
        if all.iter().enumerate().any(|(k, &s)| k != s) {
            return Err(Error::InvalidPartition(format!(
                "blocks {history:?} | {memory:?} | {future:?} are not contiguous in time order from 0"
            )));
        }
        let h = history.len();
        let m = memory.len();
        Self::new(all.len(), m, h + m)
    }

    pub fn history(&self) -> Range<usize> {
        self.history.clone()
    }

    pub fn memory(&self) -> Range<usize> {
        self.memory.clone()
    }

    pub fn future(&self) -> Range<usize> {
        self.future.clone()
    }

    pub fn memory_length(&self) -> usize {
        self.memory.len()
    }

    pub fn steps(&self) -> usize {
        self.future.end
    }

    /// Both history and future are non-empty, so the cut says something.
    pub fn is_admissible(&self) -> bool {
        !self.history.is_empty() && !self.future.is_empty()
    }

    /// Every admissible cut with memory length `ell` over `n` steps.
    pub fn cuts(n: usize, ell: usize) -> Vec<BlockPartition> {
        (ell + 1..n)
            .filter_map(|k| Self::new(n, ell, k).ok())
            .collect()
    }

    fn check(&self, n: usize) -> Result<()> {
        if self.steps() != n {
            return Err(Error::InvalidPartition(format!(
                "partition covers {} steps, distribution has {n}",
                self.steps()
            )));
        }
        Ok(())
    }
}

impl std::fmt::Display for BlockPartition {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let show = |r: &Range<usize>| {
            r.clone()
                .map(|s| s.to_string())
                .collect::<Vec<_>>()
                .join(",")
        };
        write!(f, "{}|{}|{}", show(&self.history), show(&self.memory), show(&self.future))
    }
}

struct Blocks {
    h: Vec<usize>,
    m: Vec<usize>,
    f: Vec<usize>,
}

impl Blocks {
    fn of(p: &BlockPartition) -> Self {
        Self {
            h: p.history().collect(),
            m: p.memory().collect(),
            f: p.future().collect(),
        }
    }

    fn mh(&self) -> Vec<usize> {
        self.m.iter().chain(&self.h).copied().collect()
    }

    fn fm(&self) -> Vec<usize> {
        self.f.iter().chain(&self.m).copied().collect()
    }
}

/// Whether `P(x_F | x_M, x_H) = P(x_F | x_M)` at this cut for all
/// `(x_M, x_H)` above the probability floor, within `tol::COND`.
pub fn markov_order_at(dist: &JointDistribution, partition: &BlockPartition) -> Result<bool> {
    partition.check(dist.steps())?;
    let b = Blocks::of(partition);
    let a = dist.alphabet();
    let p_mh = dist.marginal_table(&sorted(&b.mh()));
    let p_fm = dist.marginal_table(&sorted(&b.fm()));
    let p_m = dist.marginal_table(&b.m);
    let (mh, fm) = (sorted(&b.mh()), sorted(&b.fm()));
    for (idx, &p) in dist.table().iter().enumerate() {
        let o = dist.outcome_of(idx);
        let denom = p_mh[sub_index(&o, &mh, a)];
        if denom <= tol::PROB_FLOOR {
            continue;
        }
        let lhs = p / denom;
        let rhs = p_fm[sub_index(&o, &fm, a)] / p_m[sub_index(&o, &b.m, a)];
        if (lhs - rhs).abs() > tol::COND {
            return Ok(false);
        }
    }
    Ok(true)
}

fn sorted(v: &[usize]) -> Vec<usize> {
    let mut v = v.to_vec();
    v.sort_unstable();
    v
}

/// Markov order `ell` at every admissible cut (vacuously true if there is none).
pub fn classical_markov_order(dist: &JointDistribution, ell: usize) -> bool {
    BlockPartition::cuts(dist.steps(), ell)
        .iter()
        .all(|p| markov_order_at(dist, p).unwrap_or(false))
}

/// Smallest `ℓ` for which [`classical_markov_order`] holds.
pub fn minimal_markov_order(dist: &JointDistribution) -> usize {
    (0..dist.steps())
        .find(|&ell| classical_markov_order(dist, ell))
        .unwrap_or(dist.steps())
}

/// `I(F:H|M) = H(FM) + H(MH) − H(M) − H(FMH)`.
pub fn classical_cmi(
    dist: &JointDistribution,
    partition: &BlockPartition,
    base: LogBase,
) -> Result<f64> {
    partition.check(dist.steps())?;
    let b = Blocks::of(partition);
    let h = |keep: &[usize]| shannon(&dist.marginal_table(&sorted(keep)), base);
    Ok(h(&b.fm()) + h(&b.mh()) - h(&b.m) - dist.entropy(base))
}

/// Stochastic map `W(x_F, x_M | x_M) = P(x_F | x_M)` acting on the memory block.
#[derive(Debug, Clone, Serialize)]
pub struct RecoveryMap {
    pub partition: BlockPartition,
    /// Row `x_M`, column `x_F`; rows for unseen memory values are uniform.
    pub kernel: Vec<Vec<f64>>,
    /// Total-variation distance between the table and its reconstruction.
    pub residual: f64,
}

impl RecoveryMap {
    /// `W[P_MH]` written back onto every step.
    pub fn reconstruct(&self, dist: &JointDistribution) -> Result<JointDistribution> {
        self.partition.check(dist.steps())?;
        let b = Blocks::of(&self.partition);
        let a = dist.alphabet();
        let mh = sorted(&b.mh());
        let p_mh = dist.marginal_table(&mh);
        let table = (0..dist.table().len())
            .map(|idx| {
                let o = dist.outcome_of(idx);
                p_mh[sub_index(&o, &mh, a)]
                    * self.kernel[sub_index(&o, &b.m, a)][sub_index(&o, &b.f, a)]
            })
            .collect();
        Ok(JointDistribution {
            alphabet: a.to_vec(),
            table,
        })
    }
}

fn build_recovery(dist: &JointDistribution, partition: &BlockPartition) -> Result<RecoveryMap> {
    partition.check(dist.steps())?;
    let b = Blocks::of(partition);
    let a = dist.alphabet();
    let m_size: usize = b.m.iter().map(|&s| a[s]).product();
    let f_size: usize = b.f.iter().map(|&s| a[s]).product();
    let mut kernel = vec![vec![0.0; f_size]; m_size];
    for (idx, &p) in dist.table().iter().enumerate() {
        let o = dist.outcome_of(idx);
        kernel[sub_index(&o, &b.m, a)][sub_index(&o, &b.f, a)] += p;
    }
    for row in &mut kernel {
        let total: f64 = row.iter().sum();
        if total > tol::PROB_FLOOR {
            row.iter_mut().for_each(|w| *w /= total);
        } else {
            row.iter_mut().for_each(|w| *w = 1.0 / f_size as f64);
        }
    }
    let mut map = RecoveryMap {
        partition: partition.clone(),
        kernel,
        residual: 0.0,
    };
    let rec = map.reconstruct(dist)?;
    map.residual = 0.5
        * dist
            .table()
            .iter()
            .zip(rec.table())
            .map(|(p, q)| (p - q).abs())
            .sum::<f64>();
    Ok(map)
}

/// Recovery map for a cut with finite Markov order; fails with the
/// reconstruction residual otherwise.
pub fn recovery_map(dist: &JointDistribution, partition: &BlockPartition) -> Result<RecoveryMap> {
    let map = build_recovery(dist, partition)?;
    if map.residual > tol::COND {
        return Err(Error::RecoveryFailed {
            residual: map.residual,
        });
    }
    Ok(map)
}

/// Total-variation reconstruction residual, whether or not it vanishes.
pub fn recovery_residual(dist: &JointDistribution, partition: &BlockPartition) -> Result<f64> {
    Ok(build_recovery(dist, partition)?.residual)
}

/// `D(P ‖ W[P_MH])`, which equals the conditional mutual information.
pub fn relative_entropy_residual(
    dist: &JointDistribution,
    partition: &BlockPartition,
    base: LogBase,
) -> Result<f64> {
    let rec = build_recovery(dist, partition)?.reconstruct(dist)?;
    Ok(dist
        .table()
        .iter()
        .zip(rec.table())
        .filter(|(p, _)| **p > 0.0)
        .map(|(p, q)| p * (base.log(*p) - base.log(*q)))
        .sum())
}
