//! Random states, channels, instruments, distributions and processes for
//! property tests and benchmarks.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};

use crate::classical::JointDistribution;
use crate::error::Result;
use crate::maps::{CpMap, Instrument};
use crate::process::{from_dilation, markovian_process, ProcessTensor};
use crate::tensor::{FactorLabel, LabeledOperator, C64};

fn ginibre<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> DMatrix<C64> {
    DMatrix::from_fn(rows, cols, |_, _| {
        let re: f64 = StandardNormal.sample(rng);
        let im: f64 = StandardNormal.sample(rng);
        C64::new(re, im)
    })
}

/// Haar-random unitary from the QR decomposition of a Ginibre matrix.
pub fn random_unitary<R: Rng + ?Sized>(d: usize, rng: &mut R) -> DMatrix<C64> {
    let qr = ginibre(d, d, rng).qr();
    let (mut q, r) = qr.unpack();
    for k in 0..d {
        let z = r[(k, k)];
        let phase = if z.norm() > 0.0 { z / z.norm() } else { C64::new(1.0, 0.0) };
        let mut col = q.column_mut(k);
        col *= phase;
    }
    q
}

/// Full-rank random density matrix `G G† / tr(G G†)`.
pub fn random_density<R: Rng + ?Sized>(d: usize, rng: &mut R) -> DMatrix<C64> {
    let g = ginibre(d, d, rng);
    let rho = &g * g.adjoint();
    let tr = rho.trace();
    rho / tr
}

/// Kraus operators of a random isometry `d_in → d_out ⊗ C^k`.
fn random_kraus<R: Rng + ?Sized>(d_in: usize, d_out: usize, k: usize, rng: &mut R) -> Vec<DMatrix<C64>> {
    let big = d_out * k;
    let big = big.max(d_in);
    let u = random_unitary(big, rng);
    let v = u.columns(0, d_in).into_owned();
    (0..big / d_out)
        .map(|j| v.rows(j * d_out, d_out).into_owned())
        .collect()
}

/// Random CPTP map with `k` Kraus operators.
pub fn random_channel<R: Rng + ?Sized>(d_in: usize, d_out: usize, k: usize, rng: &mut R) -> CpMap {
    CpMap::from_kraus(&random_kraus(d_in, d_out, k.max(1), rng), "ch").expect("consistent shapes")
}

/// Random instrument whose `outcomes` elements split the Kraus operators
/// of one random isometry.
pub fn random_instrument<R: Rng + ?Sized>(
    d_in: usize,
    d_out: usize,
    outcomes: usize,
    rng: &mut R,
) -> Instrument {
    let per = 2;
    let kraus = random_kraus(d_in, d_out, outcomes * per, rng);
    let elements = (0..outcomes)
        .map(|x| {
            CpMap::from_kraus(&kraus[x * per..(x + 1) * per], x.to_string()).expect("shapes")
        })
        .collect();
    Instrument::new(elements).expect("shared shapes")
}

/// Random table; each entry is zeroed with probability `sparsity`.
pub fn random_distribution<R: Rng + ?Sized>(
    alphabet: &[usize],
    sparsity: f64,
    rng: &mut R,
) -> JointDistribution {
    let size: usize = alphabet.iter().product();
    loop {
        let w: Vec<f64> = (0..size)
            .map(|_| {
                let e: f64 = Exp1.sample(rng);
                if rng.random::<f64>() < sparsity { 0.0 } else { e }
            })
            .collect();
        if let Ok(d) = JointDistribution::from_weights(alphabet.to_vec(), w) {
            return d;
        }
    }
}

/// Markovian process on `steps` qubit-like steps of dimension `d`.
pub fn random_markovian_process<R: Rng + ?Sized>(steps: usize, d: usize, rng: &mut R) -> ProcessTensor {
    let chans: Vec<CpMap> = (1..steps).map(|_| random_channel(d, d, 2, rng)).collect();
    markovian_process(&chans, &random_density(d, rng)).expect("valid channels")
}

/// Process from a random system-environment state and random couplings.
pub fn random_dilation_process<R: Rng + ?Sized>(
    steps: usize,
    d: usize,
    d_env: usize,
    rng: &mut R,
) -> Result<ProcessTensor> {
    let init = LabeledOperator::new(
        vec![FactorLabel::new("sys", d), FactorLabel::new("env", d_env)],
        random_density(d * d_env, rng),
    )?;
    let us: Vec<DMatrix<C64>> = (1..steps).map(|_| random_unitary(d * d_env, rng)).collect();
    from_dilation(&init, &us)
}
