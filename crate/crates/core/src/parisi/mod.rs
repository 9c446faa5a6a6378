//! The Parisi functional for atomic measures.
//!
//! For `μ = Σ wᵢ δ_{qᵢ}` the Parisi PDE is solved exactly by a Cole–Hopf
//! recursion over the constant pieces of `μ([0, s])`: on a piece with level
//! `m` and variance increment `v = ξ'(b) − ξ'(a)`,
//!
//! ```text
//! X(x) ← (1/m) log E exp(m X(x + √v Z))      (m > 0)
//! X(x) ← E X(x + √v Z)                       (m = 0)
//! ```
//!
//! starting from `log cosh` at `s = 1`. The last piece always has `m = 1`,
//! where `E cosh(x + √v Z) = e^{v/2} cosh x` closes the step analytically.
//! The penalty `½ ∫ ξ''(s) μ([0,s]) s ds` is summed in closed form through
//! `θ(q) = q ξ'(q) − ξ(q)`.

mod krsb;
mod pde;

pub use krsb::{krsb_chain, optimize_krsb, rs_gap, GapReport, KrsbResult, MAX_K};
pub use pde::{parisi_pde_solve, PdeGrid, PdeSolution};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mixture::{CouplingParams, MixtureSpec};
use crate::quad::{log_cosh, Expectation};
use crate::settings::Lab;

/// Atomic probability measure on `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct RsbMeasure {
    atoms: Vec<(f64, f64)>,
}

#[derive(Serialize, Deserialize)]
struct MeasureJson {
    atoms: Vec<(f64, f64)>,
}

impl Serialize for RsbMeasure {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        MeasureJson {
            atoms: self.atoms.clone(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for RsbMeasure {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = MeasureJson::deserialize(d)?;
        RsbMeasure::new(raw.atoms).map_err(serde::de::Error::custom)
    }
}

/// One constant piece `[lo, hi)` of the CDF with level `m`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub lo: f64,
    pub hi: f64,
    pub m: f64,
}

impl RsbMeasure {
    /// Atoms `(q, w)` with strictly increasing `q ∈ [0, 1]`, positive weights
    /// summing to one.
    pub fn new(atoms: Vec<(f64, f64)>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::InvalidMeasure("no atoms".into()));
        }
        for &(q, w) in &atoms {
            if !(0.0..=1.0).contains(&q) {
                return Err(Error::InvalidMeasure(format!("atom {q} outside [0, 1]")));
            }
            if !(w > 0.0 && w.is_finite()) {
                return Err(Error::InvalidMeasure(format!(
                    "weight {w} must be positive"
                )));
            }
        }
        if atoms.windows(2).any(|p| p[1].0 <= p[0].0) {
            return Err(Error::InvalidMeasure(
                "atoms must be strictly increasing".into(),
            ));
        }
        let total: f64 = atoms.iter().map(|a| a.1).sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidMeasure(format!("weights sum to {total}")));
        }
        Ok(Self { atoms })
    }

    pub fn dirac(q: f64) -> Result<Self> {
        Self::new(vec![(q, 1.0)])
    }

    /// Sorts, merges atoms closer than `merge_tol`, and normalizes. Used to
    /// turn raw optimizer coordinates into a valid measure.
    pub fn from_raw(mut atoms: Vec<(f64, f64)>, merge_tol: f64) -> Result<Self> {
        atoms.retain(|a| a.1 > 0.0);
        atoms.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut merged: Vec<(f64, f64)> = Vec::with_capacity(atoms.len());
        for (q, w) in atoms {
            let q = q.clamp(0.0, 1.0);
            match merged.last_mut() {
                Some(last) if q - last.0 < merge_tol => {
                    // keep the heavier position
                    if w > last.1 {
                        last.0 = q;
                    }
                    last.1 += w;
                }
                _ => merged.push((q, w)),
            }
        }
        let total: f64 = merged.iter().map(|a| a.1).sum();
        if !(total > 0.0 && total.is_finite()) {
            return Err(Error::InvalidMeasure("weights do not normalize".into()));
        }
        for a in &mut merged {
            a.1 /= total;
        }
        Ok(Self { atoms: merged })
    }

    pub fn atoms(&self) -> &[(f64, f64)] {
        &self.atoms
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    /// Cumulative levels `mᵢ = Σ_{j ≤ i} w_j`; the last one is exactly 1.
    pub fn cdf_levels(&self) -> Vec<f64> {
        let mut acc = 0.0;
        let mut out: Vec<f64> = self
            .atoms
            .iter()
            .map(|a| {
                acc += a.1;
                acc
            })
            .collect();
        if let Some(last) = out.last_mut() {
            *last = 1.0;
        }
        out
    }

    /// `μ([0, s])`.
    pub fn cdf(&self, s: f64) -> f64 {
        let levels = self.cdf_levels();
        self.atoms
            .iter()
            .zip(levels)
            .take_while(|(a, _)| a.0 <= s)
            .last()
            .map_or(0.0, |(_, m)| m)
    }

    /// Pieces of `[0, 1]` on which `μ([0, s])` is constant; the first has
    /// level 0 and the last level 1. Zero-length pieces are kept.
    pub fn segments(&self) -> Vec<Segment> {
        let levels = self.cdf_levels();
        let mut out = Vec::with_capacity(self.atoms.len() + 1);
        out.push(Segment {
            lo: 0.0,
            hi: self.atoms[0].0,
            m: 0.0,
        });
        for (i, m) in levels.iter().enumerate() {
            let lo = self.atoms[i].0;
            let hi = self.atoms.get(i + 1).map_or(1.0, |a| a.0);
            out.push(Segment { lo, hi, m: *m });
        }
        out
    }
}

/// `½ ∫₀¹ ξ''(s) μ([0,s]) s ds`.
pub fn penalty(measure: &RsbMeasure, spec: &MixtureSpec, params: &CouplingParams) -> f64 {
    0.5 * measure
        .segments()
        .iter()
        .map(|s| s.m * (spec.theta(params, s.hi) - spec.theta(params, s.lo)))
        .sum::<f64>()
}

struct Level {
    m: f64,
    offsets: Vec<(f64, f64)>,
    /// Normalized weights of offsets `j · step` on the trapezoid branch.
    lattice: Option<Vec<f64>>,
}

impl Level {
    fn combine(&self, vals: &[f64], weights: impl Iterator<Item = f64> + Clone) -> f64 {
        if self.m == 0.0 {
            vals.iter().zip(weights).map(|(v, w)| w * v).sum()
        } else {
            log_mean_exp(self.m, vals, weights)
        }
    }
}

/// Value of the recursion at `x`. A run of consecutive trapezoid levels
/// only ever evaluates the levels below it on the lattice `x + j · step`,
/// so those are tabulated once instead of being re-evaluated for every path
/// through the tensor product.
fn recursion_value(levels: &[Level], top_shift: f64, x: f64, step: f64) -> f64 {
    let Some(first) = levels.first() else {
        return log_cosh(x) + top_shift;
    };
    if first.lattice.is_none() {
        let vals: Vec<f64> = first
            .offsets
            .iter()
            .map(|&(d, _)| recursion_value(&levels[1..], top_shift, x + d, step))
            .collect();
        return first.combine(&vals, first.offsets.iter().map(|o| o.1));
    }
    let run = levels.iter().take_while(|l| l.lattice.is_some()).count();
    let halves: Vec<usize> = levels[..run]
        .iter()
        .map(|l| l.lattice.as_ref().map_or(0, |w| w.len() / 2))
        .collect();
    let mut reach: usize = halves.iter().sum();
    // table[i] holds the value at x + (i − reach) · step
    let mut table: Vec<f64> = (0..=2 * reach)
        .map(|i| {
            recursion_value(
                &levels[run..],
                top_shift,
                x + (i as f64 - reach as f64) * step,
                step,
            )
        })
        .collect();
    for (level, &half) in levels[..run].iter().zip(&halves).rev() {
        let weights = level
            .lattice
            .as_ref()
            .expect("run consists of lattice levels");
        reach -= half;
        table = (0..=2 * reach)
            .map(|i| level.combine(&table[i..i + 2 * half + 1], weights.iter().copied()))
            .collect();
    }
    table[0]
}

/// `(1/m) log Σ wᵢ exp(m vᵢ)` for weights summing to one and `m > 0`.
fn log_mean_exp(m: f64, vals: &[f64], weights: impl Iterator<Item = f64> + Clone) -> f64 {
    let mean: f64 = vals.iter().zip(weights.clone()).map(|(v, w)| w * v).sum();
    let max = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = vals.iter().copied().fold(f64::INFINITY, f64::min);
    if m * (max - min) < 1e-3 {
        // cumulant series; the exact forms lose every digit once m is tiny
        let (mut k2, mut k3, mut k4) = (0.0, 0.0, 0.0);
        for (v, w) in vals.iter().zip(weights) {
            let d = v - mean;
            k2 += w * d * d;
            k3 += w * d * d * d;
            k4 += w * d * d * d * d;
        }
        k4 -= 3.0 * k2 * k2;
        mean + m * k2 / 2.0 + m * m * k3 / 6.0 + m * m * m * k4 / 24.0
    } else if m * (max - mean) < 40.0 {
        let s: f64 = vals
            .iter()
            .zip(weights)
            .map(|(v, w)| w * (m * (v - mean)).exp_m1())
            .sum();
        mean + s.ln_1p() / m
    } else {
        let s: f64 = vals
            .iter()
            .zip(weights)
            .map(|(v, w)| w * (m * (v - max)).exp())
            .sum();
        max + s.ln() / m
    }
}

/// `u_μ(0, h)` by the atomic recursion with the given quadrature.
pub fn field_value(
    quad: &Expectation,
    measure: &RsbMeasure,
    spec: &MixtureSpec,
    params: &CouplingParams,
) -> Result<f64> {
    let segs = measure.segments();
    let (top, rest) = segs.split_last().expect("at least two segments");
    let var = |s: &Segment| (spec.xi_d1(params, s.hi) - spec.xi_d1(params, s.lo)).max(0.0);
    let top_shift = 0.5 * var(top);
    let levels: Vec<Level> = rest
        .iter()
        .filter(|s| var(s) > 0.0)
        .map(|s| {
            let scale = var(s).sqrt();
            let normalize = |w: &mut [f64]| {
                let total: f64 = w.iter().sum();
                w.iter_mut().for_each(|x| *x /= total);
            };
            let lattice = quad.lattice_weights(scale).map(|mut w| {
                normalize(&mut w);
                w
            });
            let mut offsets = quad.offsets(scale);
            let mut ws: Vec<f64> = offsets.iter().map(|o| o.1).collect();
            normalize(&mut ws);
            for (o, w) in offsets.iter_mut().zip(ws) {
                o.1 = w;
            }
            Level {
                m: s.m,
                offsets,
                lattice,
            }
        })
        .collect();
    let value = recursion_value(&levels, top_shift, params.h, quad.spec().step);
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::NumericRange(format!(
            "Parisi recursion overflowed for {measure:?}"
        )))
    }
}

pub(crate) fn parisi_value_with(
    quad: &Expectation,
    measure: &RsbMeasure,
    spec: &MixtureSpec,
    params: &CouplingParams,
) -> Result<f64> {
    let value = field_value(quad, measure, spec, params)? - penalty(measure, spec, params);
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::NumericRange(format!(
            "Parisi functional is not finite for {measure:?}"
        )))
    }
}

/// Parisi functional `u_μ(0, h) − ½ ∫ ξ''(s) μ([0,s]) s ds`.
pub fn parisi_value(
    lab: &Lab,
    measure: &RsbMeasure,
    spec: &MixtureSpec,
    params: &CouplingParams,
) -> Result<f64> {
    lab.check_scale(spec, params)?;
    parisi_value_with(lab.quad(), measure, spec, params)
}
