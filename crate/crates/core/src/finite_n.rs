//! Exact enumeration of small systems with Monte-Carlo disorder averaging.
//!
//! A p-spin term `√c_p N^{(1−p)/2} Σ_{i₁…i_p} J σ_{i₁}⋯σ_{i_p}` only depends on
//! each index through the parity of its multiplicity, so it collapses to
//! `Σ_S G_S χ_S(σ)` over subsets `S` with `|S| ≤ p`, `|S| ≡ p (mod 2)`, where
//! `G_S` is Gaussian with variance `c_p N^{1−p}` times the number of index
//! tuples with odd-multiplicity set `S`. The energies of all `2^N`
//! configurations then come from one fast Walsh–Hadamard transform.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::mixture::{CouplingParams, MixtureSpec};
use crate::par::Exec;

pub const MAX_N: usize = 16;

/// One disorder realization: energies of every configuration.
///
/// Configuration `x` has `σᵢ = −1` exactly when bit `i` of `x` is set.
#[derive(Debug, Clone, PartialEq)]
pub struct DisorderSample {
    pub n: usize,
    pub seed: u64,
    pub stream: u64,
    pub energies: Vec<f64>,
    /// Coefficient of the empty subset: a configuration-independent shift.
    pub constant: f64,
}

impl DisorderSample {
    pub fn spins(&self, x: usize) -> Vec<i8> {
        (0..self.n)
            .map(|i| if x >> i & 1 == 1 { -1 } else { 1 })
            .collect()
    }

    pub fn magnetization(&self, x: usize) -> f64 {
        self.n as f64 - 2.0 * x.count_ones() as f64
    }
}

/// Number of length-`p` words over `n` letters in which a fixed set of `s`
/// letters appears an odd number of times and the rest an even number:
/// `p! [x^p] sinh(x)^s cosh(x)^{n−s}`.
fn parity_count(n: usize, p: usize, s: usize) -> f64 {
    let mut sinh = vec![0.0; p + 1];
    let mut cosh = vec![0.0; p + 1];
    let mut fact = 1.0;
    for k in 0..=p {
        if k > 0 {
            fact *= k as f64;
        }
        if k % 2 == 1 {
            sinh[k] = 1.0 / fact;
        } else {
            cosh[k] = 1.0 / fact;
        }
    }
    let mul = |a: &[f64], b: &[f64]| -> Vec<f64> {
        let mut out = vec![0.0; p + 1];
        for (i, &x) in a.iter().enumerate() {
            for (j, &y) in b.iter().enumerate().take(p + 1 - i) {
                out[i + j] += x * y;
            }
        }
        out
    };
    let mut acc = vec![0.0; p + 1];
    acc[0] = 1.0;
    for _ in 0..s {
        acc = mul(&acc, &sinh);
    }
    for _ in s..n {
        acc = mul(&acc, &cosh);
    }
    (acc[p] * fact).round()
}

fn check_n(n: usize) -> Result<()> {
    if !(2..=MAX_N).contains(&n) {
        return Err(Error::Precondition(format!(
            "N must lie in 2..={MAX_N}, got {n}"
        )));
    }
    Ok(())
}

/// Per-subset variances, indexed by subset bitmask.
fn subset_variances(spec: &MixtureSpec, n: usize) -> Vec<f64> {
    let mut var = vec![0.0; 1 << n];
    for term in spec.terms() {
        let p = term.p as usize;
        let scale = term.coeff * (n as f64).powi(1 - term.p as i32);
        let counts: Vec<f64> = (0..=n.min(p))
            .map(|s| {
                if (p - s).is_multiple_of(2) {
                    parity_count(n, p, s)
                } else {
                    0.0
                }
            })
            .collect();
        for (mask, v) in var.iter_mut().enumerate() {
            let s = mask.count_ones() as usize;
            if s <= p {
                *v += scale * counts[s];
            }
        }
    }
    var
}

fn walsh_hadamard(a: &mut [f64]) {
    let mut h = 1;
    while h < a.len() {
        for chunk in a.chunks_mut(2 * h) {
            let (lo, hi) = chunk.split_at_mut(h);
            for (x, y) in lo.iter_mut().zip(hi.iter_mut()) {
                let (u, v) = (*x, *y);
                *x = u + v;
                *y = u - v;
            }
        }
        h *= 2;
    }
}

fn sample_with(variances: &[f64], n: usize, seed: u64, stream: u64) -> DisorderSample {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    let mut coeffs: Vec<f64> = variances
        .iter()
        .map(|&v| {
            let z: f64 = StandardNormal.sample(&mut rng);
            if v > 0.0 {
                v.sqrt() * z
            } else {
                0.0
            }
        })
        .collect();
    let constant = coeffs[0];
    walsh_hadamard(&mut coeffs);
    DisorderSample {
        n,
        seed,
        stream,
        energies: coeffs,
        constant,
    }
}

/// Draws a Hamiltonian with covariance `N ξ₀(σ¹·σ²/N)`; stream 0 of `seed`.
pub fn sample_hamiltonian(spec: &MixtureSpec, n: usize, seed: u64) -> Result<DisorderSample> {
    sample_hamiltonian_stream(spec, n, seed, 0)
}

pub fn sample_hamiltonian_stream(
    spec: &MixtureSpec,
    n: usize,
    seed: u64,
    stream: u64,
) -> Result<DisorderSample> {
    check_n(n)?;
    Ok(sample_with(&subset_variances(spec, n), n, seed, stream))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FreeEnergyEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub n: usize,
    pub samples: usize,
}

/// `(1/N) log E₀ exp(β H + h Σσ)` for one sample, with the constant shift
/// removed (it has mean zero and is independent of everything else, so the
/// disorder average is unchanged while its variance drops).
pub fn log_partition(sample: &DisorderSample, params: &CouplingParams) -> f64 {
    let n = sample.n as f64;
    let exponent =
        |x: usize, e: f64| params.beta * (e - sample.constant) + params.h * sample.magnetization(x);
    let max = sample
        .energies
        .iter()
        .enumerate()
        .map(|(x, &e)| exponent(x, e))
        .fold(f64::NEG_INFINITY, f64::max);
    let sum: f64 = sample
        .energies
        .iter()
        .enumerate()
        .map(|(x, &e)| (exponent(x, e) - max).exp())
        .sum();
    (max + sum.ln() - n * std::f64::consts::LN_2) / n
}

/// Disorder-averaged free energy over `n_disorder` independent samples
/// (streams `0..n_disorder` of `seed`).
pub fn free_energy_mc(
    spec: &MixtureSpec,
    params: &CouplingParams,
    n: usize,
    n_disorder: usize,
    seed: u64,
    exec: Exec,
) -> Result<FreeEnergyEstimate> {
    check_n(n)?;
    if n_disorder == 0 {
        return Err(Error::Precondition(
            "need at least one disorder sample".into(),
        ));
    }
    let variances = subset_variances(spec, n);
    let values = exec.map((0..n_disorder as u64).collect(), |stream| {
        log_partition(&sample_with(&variances, n, seed, stream), params)
    });
    let k = values.len() as f64;
    let mean = values.iter().sum::<f64>() / k;
    let stderr = if values.len() > 1 {
        (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (k - 1.0) / k).sqrt()
    } else {
        0.0
    };
    Ok(FreeEnergyEstimate {
        mean,
        stderr,
        n,
        samples: n_disorder,
    })
}
