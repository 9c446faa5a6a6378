//! Minimization of the Parisi functional over measures with at most `k + 1`
//! atoms.
//!
//! Search coordinates are unconstrained: atom `i` sits at `logistic(uᵢ)` and
//! carries weight `softmax(0, v₁, …, v_k)ᵢ`. Atoms are sorted and merged on
//! decode, so every coordinate vector is a valid measure. Level `k` is
//! seeded with the level `k − 1` optimum, so values never increase with `k`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use super::{parisi_value_with, RsbMeasure};
use crate::error::{Error, Result};
use crate::mixture::{CouplingParams, MixtureSpec};
use crate::optim::{nelder_mead, NelderMeadOptions};
use crate::rs_at::rs_minimize;
use crate::settings::Lab;

const RANDOM_POOL: usize = 48;

/// Largest number of symmetry-breaking steps the optimizer accepts.
pub const MAX_K: usize = 4;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KrsbResult {
    pub k: usize,
    pub measure: RsbMeasure,
    pub value: f64,
}

fn logistic(u: f64) -> f64 {
    1.0 / (1.0 + (-u).exp())
}

fn logit(q: f64) -> f64 {
    let q = q.clamp(1e-12, 1.0 - 1e-12);
    (q / (1.0 - q)).ln()
}

fn decode(x: &[f64], atoms: usize, merge_tol: f64) -> Result<RsbMeasure> {
    let (pos, logits) = x.split_at(atoms);
    let shift = logits.iter().copied().fold(0.0f64, f64::max);
    let raw: Vec<(f64, f64)> = pos
        .iter()
        .zip(std::iter::once(&0.0).chain(logits))
        .map(|(&u, &v)| (logistic(u), (v - shift).exp()))
        .collect();
    RsbMeasure::from_raw(raw, merge_tol)
}

/// Coordinates of `atoms` padded to `n` atoms by splitting mass onto `extra`
/// positions.
fn encode(atoms: &[(f64, f64)], extra: &[f64], n: usize) -> Vec<f64> {
    let mut all: Vec<(f64, f64)> = atoms.iter().map(|&(q, w)| (q, w * 0.9)).collect();
    let pad = n.saturating_sub(atoms.len());
    for i in 0..pad {
        let q = extra.get(i).copied().unwrap_or(0.5);
        all.push((q, 0.1 / pad as f64));
    }
    if pad == 0 {
        all = atoms.to_vec();
    }
    all.truncate(n);
    let w0 = all[0].1;
    let mut x: Vec<f64> = all.iter().map(|a| logit(a.0)).collect();
    x.extend(all[1..].iter().map(|a| (a.1 / w0).ln()));
    x
}

fn structured_starts(prev: &RsbMeasure, rs_q: f64, atoms: usize) -> Vec<Vec<f64>> {
    let mut starts = Vec::new();
    let positions: Vec<f64> = prev.atoms().iter().map(|a| a.0).collect();
    let mut extras = vec![0.0, 0.98, 0.5, 0.9];
    for pair in positions.windows(2) {
        extras.push(0.5 * (pair[0] + pair[1]));
    }
    for &q in &positions {
        extras.push((q + 0.1).min(0.99));
        extras.push((q - 0.1).max(0.0));
    }
    for &e in &extras {
        let rest: Vec<f64> = extras.iter().copied().filter(|&o| o != e).collect();
        let mut pick = vec![e];
        pick.extend(rest);
        starts.push(encode(prev.atoms(), &pick, atoms));
    }
    let spread: Vec<f64> = (1..atoms).map(|i| i as f64 / atoms as f64).collect();
    starts.push(encode(&[(rs_q, 1.0)], &spread, atoms));
    starts
}

/// Optimal measures for every `k ≤ k_max`, index = `k`.
pub fn krsb_chain(
    lab: &Lab,
    spec: &MixtureSpec,
    params: &CouplingParams,
    k_max: usize,
    seed: u64,
) -> Result<Vec<KrsbResult>> {
    if k_max > MAX_K {
        return Err(Error::Precondition(format!(
            "k must be at most {MAX_K}, got {k_max}"
        )));
    }
    let s = &lab.settings;
    let rs = rs_minimize(lab, spec, params);
    let rs_q = rs.minimizers.first().copied().unwrap_or(0.0);
    let mut chain = vec![KrsbResult {
        k: 0,
        measure: RsbMeasure::dirac(rs_q)?,
        value: rs.value,
    }];
    if params.beta == 0.0 {
        // the functional does not depend on the measure
        for k in 1..=k_max {
            chain.push(KrsbResult {
                k,
                ..chain[0].clone()
            });
        }
        return Ok(chain);
    }

    for k in 1..=k_max {
        let atoms = k + 1;
        let dim = 2 * k + 1;
        let prev = chain[k - 1].clone();
        let merge = s.atom_merge_tol;
        let objective = |x: &[f64]| -> f64 {
            decode(x, atoms, merge)
                .and_then(|m| parisi_value_with(lab.search_quad(), &m, spec, params))
                .unwrap_or(f64::INFINITY)
        };

        let mut rng =
            ChaCha8Rng::seed_from_u64(seed ^ (0x9e37_79b9_7f4a_7c15u64.wrapping_mul(k as u64 + 1)));
        let structured = structured_starts(&prev.measure, rs_q, atoms);
        let random: Vec<Vec<f64>> = (0..RANDOM_POOL)
            .map(|_| {
                let mut x: Vec<f64> = (0..atoms)
                    .map(|_| 2.5 * rng.sample::<f64, _>(StandardNormal))
                    .collect();
                x.extend((0..k).map(|_| 1.5 * rng.sample::<f64, _>(StandardNormal)));
                x
            })
            .collect();

        let mut scored: Vec<(f64, Vec<f64>, bool)> = lab.exec.map(
            structured
                .into_iter()
                .map(|x| (x, true))
                .chain(random.into_iter().map(|x| (x, false)))
                .collect(),
            |(x, is_structured)| (objective(&x), x, is_structured),
        );
        scored.sort_by(|a, b| a.0.total_cmp(&b.0));
        let n_starts = s.nm_starts.max(1);
        let mut starts: Vec<Vec<f64>> = scored
            .iter()
            .take(n_starts.div_ceil(2))
            .map(|c| c.1.clone())
            .collect();
        // the rest from the random pool in draw order, for spread
        starts.extend(
            scored
                .iter()
                .filter(|c| !c.2)
                .skip(n_starts.div_ceil(2))
                .take(n_starts / 2)
                .map(|c| c.1.clone()),
        );
        if let Some(seeded) = scored.iter().find(|c| c.2) {
            if !starts.contains(&seeded.1) {
                starts.push(seeded.1.clone());
            }
        }

        let opts = NelderMeadOptions {
            initial_step: 0.6,
            f_tol: s.nm_f_tol,
            x_tol: s.nm_x_tol,
            max_evals: s.nm_max_evals * dim,
        };
        let mut runs = lab.exec.map(starts, |x0| {
            let first = nelder_mead(objective, &x0, opts);
            // one restart shakes off simplex collapse
            nelder_mead(
                objective,
                &first.x,
                NelderMeadOptions {
                    initial_step: 0.2,
                    ..opts
                },
            )
        });
        runs.sort_by(|a, b| a.value.total_cmp(&b.value));

        let mut best = prev.clone();
        best.k = k;
        for run in runs.iter().take(3) {
            let measure = decode(&run.x, atoms, merge)?;
            let value = parisi_value_with(lab.quad(), &measure, spec, params)?;
            if value < best.value {
                best = KrsbResult { k, measure, value };
            }
        }
        chain.push(best);
    }
    Ok(chain)
}

/// Best measure with at most `k + 1` atoms.
pub fn optimize_krsb(
    lab: &Lab,
    k: usize,
    spec: &MixtureSpec,
    params: &CouplingParams,
    seed: u64,
) -> Result<KrsbResult> {
    Ok(krsb_chain(lab, spec, params, k, seed)?
        .pop()
        .expect("chain is never empty"))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GapReport {
    pub rs_value: f64,
    /// Optimal value for each `k = 0..=k_max`.
    pub krsb_values: Vec<f64>,
    pub best_value: f64,
    pub best_measure: RsbMeasure,
    pub gap: f64,
    pub rs_member: bool,
}

/// How much symmetry breaking lowers the functional below the RS optimum.
pub fn rs_gap(
    lab: &Lab,
    spec: &MixtureSpec,
    params: &CouplingParams,
    k_max: usize,
    seed: u64,
) -> Result<GapReport> {
    if k_max == 0 {
        return Err(Error::Precondition("k_max must be at least 1".into()));
    }
    lab.check_scale(spec, params)?;
    let chain = krsb_chain(lab, spec, params, k_max, seed)?;
    let rs_value = chain[0].value;
    let best = chain
        .iter()
        .min_by(|a, b| a.value.total_cmp(&b.value))
        .expect("non-empty");
    let gap = rs_value - best.value;
    Ok(GapReport {
        rs_value,
        krsb_values: chain.iter().map(|c| c.value).collect(),
        best_value: best.value,
        best_measure: best.measure.clone(),
        gap,
        rs_member: gap <= lab.settings.rs_gap_tol,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(beta: f64, h: f64) -> CouplingParams {
        CouplingParams::new(beta, h).unwrap()
    }

    #[test]
    fn step_counts_outside_range_are_rejected() {
        let lab = Lab::default();
        let sk = MixtureSpec::sk();
        assert!(matches!(
            optimize_krsb(&lab, MAX_K + 1, &sk, &p(1.0, 0.0), 0),
            Err(Error::Precondition(_))
        ));
        assert!(matches!(
            rs_gap(&lab, &sk, &p(1.0, 0.0), 0, 0),
            Err(Error::Precondition(_))
        ));
        assert!(rs_gap(&lab, &sk, &p(1e5, 0.0), 1, 0)
            .unwrap_err()
            .is_numeric());
    }

    #[test]
    fn encode_decode_round_trip() {
        let atoms = [(0.1, 0.3), (0.4, 0.2), (0.9, 0.5)];
        let m = decode(&encode(&atoms, &[], 3), 3, 1e-9).unwrap();
        for (a, b) in m.atoms().iter().zip(&atoms) {
            assert!((a.0 - b.0).abs() < 1e-12 && (a.1 - b.1).abs() < 1e-12);
        }
        let padded = decode(&encode(&[(0.3, 1.0)], &[0.7], 2), 2, 1e-9).unwrap();
        assert_eq!(padded.len(), 2);
    }

    #[test]
    fn k_zero_is_rs() {
        let lab = Lab::default();
        let spec = MixtureSpec::sk();
        let params = p(1.3, 0.2);
        let r = optimize_krsb(&lab, 0, &spec, &params, 1).unwrap();
        let rs = rs_minimize(&lab, &spec, &params);
        assert!((r.value - rs.value).abs() < 1e-7);
    }

    #[test]
    fn high_temperature_sk_has_no_gap() {
        let lab = Lab::default();
        let r = rs_gap(&lab, &MixtureSpec::sk(), &p(0.5, 0.0), 1, 3).unwrap();
        assert!(r.gap <= 1e-7 && r.gap >= 0.0);
        assert!(r.rs_member);
    }

    #[test]
    fn zero_beta_gap_is_exactly_zero() {
        let lab = Lab::default();
        let r = rs_gap(
            &lab,
            &MixtureSpec::sk_plus(4, 5.0).unwrap(),
            &p(0.0, 0.3),
            2,
            3,
        )
        .unwrap();
        assert_eq!(r.gap, 0.0);
    }

    #[test]
    fn low_temperature_sk_breaks_symmetry() {
        let lab = Lab::default();
        let r = rs_gap(&lab, &MixtureSpec::sk(), &p(1.6, 0.0), 2, 5).unwrap();
        assert!(r.gap > 1e-4, "{r:?}");
        assert!(!r.rs_member);
        for w in r.krsb_values.windows(2) {
            assert!(w[1] <= w[0] + 1e-10);
        }
    }
}
