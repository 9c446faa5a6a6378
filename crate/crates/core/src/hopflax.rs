//! Hopf-Lax upper bound on the zero-field free energy and the search for
//! models that satisfy the AT condition while breaking replica symmetry.
//!
//! With `t = β²/2` the bound reads
//!
//! ```text
//! lim F_N(β, 0) ≤ t ξ₀(1) − F₁°(l) + t ξ₀*(l / t)      for every l ≥ 0,
//! F₁°(l) = l − E log cosh(√(2l) Z),
//! ```
//!
//! and equals the RS value `t ξ₀(1)` at `l = 0`. Any `l` that pushes it below
//! `t ξ₀(1)` certifies that the Parisi measure at `(β, 0)` is not `δ₀`, hence
//! not replica symmetric.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::mixture::{CouplingParams, MixtureSpec};
use crate::optim::golden_min;
use crate::parisi::{rs_gap, GapReport};
use crate::quad::log_cosh;
use crate::rs_at::{alpha, AtReport};
use crate::settings::Lab;

/// `F₁°(0, l) = l − E log cosh(√(2l) Z)`; non-negative, `≈ l²` for small `l`.
pub fn enriched_f1(lab: &Lab, l: f64) -> Result<f64> {
    if !l.is_finite() || l < 0.0 {
        return Err(Error::Precondition(format!("l must be >= 0, got {l}")));
    }
    let v = l - lab.quad().try_affine(0.0, (2.0 * l).sqrt(), log_cosh)?;
    if v < -1e-12 {
        return Err(Error::NumericRange(format!(
            "enriched free energy {v} < 0 at l={l}"
        )));
    }
    Ok(v)
}

fn check_params(params: &CouplingParams) -> Result<()> {
    if params.beta.is_nan() || params.beta <= 0.0 {
        return Err(Error::Precondition("Hopf-Lax bound needs beta > 0".into()));
    }
    if params.h != 0.0 {
        return Err(Error::Precondition(
            "Hopf-Lax bound is only available at h = 0".into(),
        ));
    }
    Ok(())
}

/// `t ξ₀(1) − F₁°(l) + t ξ₀*(l/t)`.
pub fn hopflax_bound(
    lab: &Lab,
    spec: &MixtureSpec,
    params: &CouplingParams,
    l: f64,
) -> Result<f64> {
    check_params(params)?;
    let t = params.t();
    let conj = spec.conjugate(l / t)?;
    Ok(t * spec.xi0(1.0) - enriched_f1(lab, l)? + t * conj.value)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundReport {
    pub beta: f64,
    pub t: f64,
    pub l_grid: Vec<(f64, f64)>,
    pub best_l: f64,
    pub best_bound: f64,
    pub rs_value: f64,
    /// `rs_value − best_bound`; positive certifies symmetry breaking.
    pub margin: f64,
}

/// Minimizes the bound over `l ∈ {0} ∪ [l_min, l_max]` (log grid, then
/// golden-section refinement around the best grid point).
pub fn best_bound(lab: &Lab, spec: &MixtureSpec, params: &CouplingParams) -> Result<BoundReport> {
    check_params(params)?;
    let s = &lab.settings;
    let n = s.l_points.max(2);
    let ratio = (s.l_max / s.l_min).ln();
    let mut ls = vec![0.0];
    ls.extend((0..n).map(|i| s.l_min * (ratio * i as f64 / (n - 1) as f64).exp()));
    let vals = lab
        .exec
        .map(ls.clone(), |l| hopflax_bound(lab, spec, params, l));
    let l_grid: Vec<(f64, f64)> = ls
        .iter()
        .copied()
        .zip(vals.into_iter().collect::<Result<Vec<_>>>()?)
        .collect();

    let (i_best, &(mut best_l, mut best)) = l_grid
        .iter()
        .enumerate()
        .min_by(|a, b| a.1 .1.total_cmp(&b.1 .1))
        .expect("grid is non-empty");
    if i_best > 0 {
        let a = l_grid[i_best - 1].0;
        let b = l_grid.get(i_best + 1).map_or(best_l, |g| g.0);
        let (l, v) = golden_min(
            |l| hopflax_bound(lab, spec, params, l).unwrap_or(f64::INFINITY),
            a,
            b,
            1e-10 * b.max(1e-6),
        );
        if v < best {
            best_l = l;
            best = v;
        }
    }
    let rs_value = params.t() * spec.xi0(1.0);
    Ok(BoundReport {
        beta: params.beta,
        t: params.t(),
        l_grid,
        best_l,
        best_bound: best,
        rs_value,
        margin: rs_value - best,
    })
}

/// A model `r²/2 + (Cr)^p/p` at `(β, 0)` that is in the AT region yet not
/// replica symmetric.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Witness {
    pub c: f64,
    pub p: u32,
    pub spec: MixtureSpec,
    pub certificate: BoundReport,
    pub at_report: AtReport,
    pub gap_report: GapReport,
}

impl Witness {
    /// All three verdicts agree: bound certificate, AT membership, and a
    /// strict symmetry-breaking gap.
    pub fn consistent(&self, cert_margin: f64) -> bool {
        self.certificate.margin > cert_margin
            && self.at_report.at_member
            && !self.gap_report.rs_member
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum SearchOutcome {
    Certified(Box<Witness>),
    NotFound { best_c: f64, best_margin: f64 },
}

/// Smallest `C` in `c_grid` whose Hopf-Lax margin exceeds the certificate
/// threshold, with the AT report and the 1RSB gap of that model attached.
pub fn counterexample_search(
    lab: &Lab,
    beta: f64,
    p: u32,
    c_grid: &[f64],
    seed: u64,
) -> Result<SearchOutcome> {
    if !(beta > 0.0 && beta < 1.0) {
        return Err(Error::Precondition(format!(
            "beta must lie in (0, 1), got {beta}"
        )));
    }
    if p < 4 || p % 2 == 1 {
        return Err(Error::Precondition(format!(
            "p must be even and >= 4, got {p}"
        )));
    }
    if c_grid.is_empty() || c_grid.windows(2).any(|w| w[1] <= w[0]) || c_grid[0] <= 0.0 {
        return Err(Error::Precondition(
            "c_grid must be positive and strictly increasing".into(),
        ));
    }
    let params = CouplingParams::new(beta, 0.0)?;
    let mut best: Option<(f64, f64)> = None;
    for &c in c_grid {
        let spec = MixtureSpec::sk_plus(p, c)?;
        let certificate = best_bound(lab, &spec, &params)?;
        if best.is_none_or(|(_, m)| certificate.margin > m) {
            best = Some((c, certificate.margin));
        }
        if certificate.margin > lab.settings.cert_margin {
            let at_report = alpha(lab, &spec, &params);
            let gap_report = rs_gap(lab, &spec, &params, 1, seed)?;
            return Ok(SearchOutcome::Certified(Box::new(Witness {
                c,
                p,
                spec,
                certificate,
                at_report,
                gap_report,
            })));
        }
    }
    let (best_c, best_margin) = best.expect("grid is non-empty");
    Ok(SearchOutcome::NotFound {
        best_c,
        best_margin,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CriticalBeta {
    pub beta_c: f64,
    pub lo: f64,
    pub hi: f64,
    pub bisections: usize,
}

/// Bisection on `β` for the zero-field RS/non-RS transition, using the
/// k-RSB gap verdict. `lo` must be RS and `hi` must not be.
pub fn beta_c_bisect(
    lab: &Lab,
    spec: &MixtureSpec,
    k_max: usize,
    lo: f64,
    hi: f64,
    seed: u64,
) -> Result<CriticalBeta> {
    if !(lo >= 0.0 && hi > lo) {
        return Err(Error::Bracket {
            lo,
            hi,
            reason: "need 0 <= lo < hi".into(),
        });
    }
    let is_rs = |beta: f64| -> Result<bool> {
        Ok(rs_gap(lab, spec, &CouplingParams::new(beta, 0.0)?, k_max, seed)?.rs_member)
    };
    if !is_rs(lo)? {
        return Err(Error::Bracket {
            lo,
            hi,
            reason: "lower end is not replica symmetric".into(),
        });
    }
    if is_rs(hi)? {
        return Err(Error::Bracket {
            lo,
            hi,
            reason: "upper end is replica symmetric".into(),
        });
    }
    let (mut a, mut b) = (lo, hi);
    let mut bisections = 0;
    while b - a > lab.settings.beta_c_width {
        let mid = 0.5 * (a + b);
        if is_rs(mid)? {
            a = mid;
        } else {
            b = mid;
        }
        bisections += 1;
    }
    Ok(CriticalBeta {
        beta_c: 0.5 * (a + b),
        lo: a,
        hi: b,
        bisections,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(beta: f64) -> CouplingParams {
        CouplingParams::new(beta, 0.0).unwrap()
    }

    /// Dense trapezoid oracle for `E log cosh(√(2l) Z)`.
    fn dense(l: f64) -> f64 {
        let n = 400_000;
        let lim = 12.0;
        let h = 2.0 * lim / n as f64;
        let s = (2.0 * l).sqrt();
        (0..=n)
            .map(|i| {
                let z = -lim + i as f64 * h;
                h * (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt() * log_cosh(s * z)
            })
            .sum()
    }

    #[test]
    fn enriched_values() {
        let lab = Lab::default();
        assert_eq!(enriched_f1(&lab, 0.0).unwrap(), 0.0);
        let v = enriched_f1(&lab, 1e-3).unwrap();
        assert!((v / 1e-6 - 1.0).abs() < 0.05);
        let v = enriched_f1(&lab, 1e-4).unwrap();
        assert!((v / 1e-8 - 1.0).abs() < 0.005);
        let v = enriched_f1(&lab, 0.5).unwrap();
        assert!((v - (0.5 - dense(0.5))).abs() < 1e-9);
        assert!(enriched_f1(&lab, -1.0).is_err());
    }

    #[test]
    fn bound_at_zero_is_rs_value() {
        let lab = Lab::default();
        for spec in [MixtureSpec::sk(), MixtureSpec::sk_plus(4, 7.0).unwrap()] {
            let b = hopflax_bound(&lab, &spec, &p(0.8), 0.0).unwrap();
            assert!((b - 0.32 * spec.xi0(1.0)).abs() < 1e-12);
        }
    }

    #[test]
    fn large_c_beats_rs_at_inverse_c() {
        let lab = Lab::default();
        let spec = MixtureSpec::sk_plus(4, 20.0).unwrap();
        let params = p(0.9);
        let b = hopflax_bound(&lab, &spec, &params, 1.0 / 20.0).unwrap();
        assert!(b < params.t() * spec.xi0(1.0));
    }

    #[test]
    fn inverse_square_scaling() {
        let lab = Lab::default();
        let params = p(0.9);
        let scaled: Vec<f64> = [50.0, 100.0, 200.0]
            .iter()
            .map(|&c| {
                let spec = MixtureSpec::sk_plus(4, c).unwrap();
                let b = hopflax_bound(&lab, &spec, &params, 1.0 / c).unwrap();
                (b - params.t() * spec.xi0(1.0)) * c * c
            })
            .collect();
        for w in scaled.windows(2) {
            assert!((w[1] + 1.0).abs() < (w[0] + 1.0).abs(), "{scaled:?}");
        }
        assert!((scaled[2] + 1.0).abs() < 0.2);
    }

    #[test]
    fn sk_high_temperature_gives_no_certificate() {
        let lab = Lab::default();
        let r = best_bound(&lab, &MixtureSpec::sk(), &p(0.5)).unwrap();
        assert!(r.margin <= 1e-9);
        assert_eq!(r.l_grid[0], (0.0, r.rs_value));
        let r = best_bound(&lab, &MixtureSpec::sk(), &p(3.0)).unwrap();
        assert_eq!(r.l_grid.len(), 201);
        assert!(r.best_bound <= r.rs_value);
    }

    #[test]
    fn preconditions() {
        let lab = Lab::default();
        assert!(hopflax_bound(&lab, &MixtureSpec::sk(), &p(0.0), 0.1).is_err());
        assert!(counterexample_search(&lab, 1.2, 4, &[5.0], 0).is_err());
        assert!(counterexample_search(&lab, 0.9, 3, &[5.0], 0).is_err());
        assert!(counterexample_search(&lab, 0.9, 4, &[5.0, 4.0], 0).is_err());
    }

    #[test]
    fn tiny_c_is_not_certified() {
        let lab = Lab::default();
        let out = counterexample_search(&lab, 0.9, 4, &[0.1], 0).unwrap();
        assert!(matches!(out, SearchOutcome::NotFound { .. }));
    }

    #[test]
    fn sk_bracket_error() {
        let lab = Lab::default();
        let err = beta_c_bisect(&lab, &MixtureSpec::sk(), 1, 0.01, 0.02, 0).unwrap_err();
        assert!(matches!(err, Error::Bracket { .. }));
    }
}
