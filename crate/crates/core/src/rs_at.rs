//! Replica-symmetric functional, the fixed-point set `Q*`, and the
//! generalized AT statistic.
//!
//! Gaussian fields enter as `√(ξ'(q)) Z + h` with `ξ = β² ξ₀`. With this
//! convention the stationary points of the RS functional are exactly the
//! solutions of `q = E tanh²(√(ξ'(q)) Z + h)`.

use serde::Serialize;

use crate::mixture::{CouplingParams, MixtureSpec};
use crate::optim::{bisect, golden_min};
use crate::quad::{log_cosh, sech4, tanh2};
use crate::settings::Lab;

/// RS functional
/// `E log cosh(β√(ξ₀'(q)) Z + h) + (β²/2)(ξ₀(1) − ξ₀(q) − (1−q)ξ₀'(q))`.
pub fn f_rs(lab: &Lab, spec: &MixtureSpec, params: &CouplingParams, q: f64) -> f64 {
    let b2 = params.beta * params.beta;
    let scale = (b2 * spec.xi0_d1(q)).max(0.0).sqrt();
    let field = lab.quad().affine(params.h, scale, log_cosh);
    field + 0.5 * b2 * (spec.xi0(1.0) - spec.xi0(q) - (1.0 - q) * spec.xi0_d1(q))
}

/// Self-consistency residual `φ(q) = E tanh²(√(ξ'(q)) Z + h) − q`.
pub fn fixed_point_residual(lab: &Lab, spec: &MixtureSpec, params: &CouplingParams, q: f64) -> f64 {
    let scale = spec.xi_d1(params, q).max(0.0).sqrt();
    lab.quad().affine(params.h, scale, tanh2) - q
}

/// `α(q) = ξ''(q) E sech⁴(√(ξ'(q)) Z + h)`.
pub fn alpha_at(lab: &Lab, spec: &MixtureSpec, params: &CouplingParams, q: f64) -> f64 {
    let b2 = params.beta * params.beta;
    let scale = (b2 * spec.xi0_d1(q)).max(0.0).sqrt();
    b2 * spec.xi0_d2(q) * lab.quad().affine(params.h, scale, sech4)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RsMinimum {
    pub minimizers: Vec<f64>,
    pub value: f64,
    pub unique: bool,
}

fn grid(n: usize) -> impl Iterator<Item = f64> + Clone {
    let n = n.max(2);
    (0..n).map(move |i| i as f64 / (n - 1) as f64)
}

/// Global minimum of the RS functional on `[0, 1]`: grid scan, then
/// golden-section refinement of every grid-local minimum.
pub fn rs_minimize(lab: &Lab, spec: &MixtureSpec, params: &CouplingParams) -> RsMinimum {
    let s = &lab.settings;
    let n = s.scan_points.max(3);
    let qs: Vec<f64> = grid(n).collect();
    let f = |q: f64| f_rs(lab, spec, params, q);
    let vals: Vec<f64> = qs.iter().map(|&q| f(q)).collect();

    let mut refined: Vec<(f64, f64)> = Vec::new();
    for i in 0..n {
        let left = if i == 0 { f64::INFINITY } else { vals[i - 1] };
        let right = if i + 1 == n {
            f64::INFINITY
        } else {
            vals[i + 1]
        };
        if vals[i] > left || vals[i] > right {
            continue;
        }
        let a = qs[i.saturating_sub(1)];
        let b = qs[(i + 1).min(n - 1)];
        let (mut q, mut v) = golden_min(f, a, b, 1e-10);
        // grid points win ties at rounding level, so boundary minima land exactly on 0 or 1
        let tie = 4.0 * f64::EPSILON * v.abs().max(1.0);
        for (qe, ve) in [
            (a, vals[i.saturating_sub(1)]),
            (qs[i], vals[i]),
            (b, vals[(i + 1).min(n - 1)]),
        ] {
            if ve <= v + tie {
                q = qe;
                v = ve;
            }
        }
        refined.push((q, v));
    }
    let best = refined
        .iter()
        .map(|&(_, v)| v)
        .fold(f64::INFINITY, f64::min);
    let mut keep: Vec<(f64, f64)> = refined
        .into_iter()
        .filter(|&(_, v)| v <= best + s.value_tol)
        .collect();
    keep.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut minimizers: Vec<(f64, f64)> = Vec::new();
    for (q, v) in keep {
        match minimizers.last_mut() {
            Some(last) if q - last.0 <= s.sep_tol => {
                if v < last.1 {
                    *last = (q, v);
                }
            }
            _ => minimizers.push((q, v)),
        }
    }
    RsMinimum {
        unique: minimizers.len() == 1,
        minimizers: minimizers.iter().map(|m| m.0).collect(),
        value: best,
    }
}

/// All solutions of `φ(q) = 0` on `[0, 1]`: sign changes refined by
/// bisection, exact zeros on the grid, and tangential roots where `|φ|` has a
/// small local minimum.
pub fn qstar_set(lab: &Lab, spec: &MixtureSpec, params: &CouplingParams) -> Vec<f64> {
    let s = &lab.settings;
    let n = s.scan_points.max(3);
    let qs: Vec<f64> = grid(n).collect();
    let phi = |q: f64| fixed_point_residual(lab, spec, params, q);
    let vals: Vec<f64> = qs.iter().map(|&q| phi(q)).collect();

    let mut roots = Vec::new();
    for i in 0..n {
        if vals[i] == 0.0 {
            roots.push(qs[i]);
        }
        if i + 1 < n
            && vals[i] != 0.0
            && vals[i + 1] != 0.0
            && vals[i].signum() != vals[i + 1].signum()
        {
            roots.push(bisect(phi, qs[i], qs[i + 1], s.root_tol));
        }
        // tangential contact without a sign change
        if i > 0 && i + 1 < n {
            let (l, c, r) = (vals[i - 1].abs(), vals[i].abs(), vals[i + 1].abs());
            let same_sign = vals[i - 1].signum() == vals[i].signum()
                && vals[i].signum() == vals[i + 1].signum();
            if same_sign && c <= l && c <= r && c > 0.0 {
                let (q, v) = golden_min(|q| phi(q).abs(), qs[i - 1], qs[i + 1], 1e-12);
                if v < s.tangent_tol {
                    roots.push(q);
                }
            }
        }
    }
    roots.sort_by(f64::total_cmp);
    roots.dedup_by(|b, a| (*b - *a).abs() <= s.sep_tol);
    roots
}

/// Second derivative of the RS functional in `q` by finite differences with
/// one Richardson step; one-sided near `q = 0` and `q = 1`.
pub fn f_rs_d2(lab: &Lab, spec: &MixtureSpec, params: &CouplingParams, q: f64) -> f64 {
    let f = |x: f64| f_rs(lab, spec, params, x);
    let d = lab.settings.fd_step;
    if q - d >= 0.0 && q + d <= 1.0 {
        let central = |h: f64| (f(q + h) - 2.0 * f(q) + f(q - h)) / (h * h);
        (4.0 * central(d / 2.0) - central(d)) / 3.0
    } else {
        let dir = if q - d < 0.0 { 1.0 } else { -1.0 };
        let one_sided = |h: f64| (f(q + 2.0 * dir * h) - 2.0 * f(q + dir * h) + f(q)) / (h * h);
        2.0 * one_sided(d / 2.0) - one_sided(d)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RootAlpha {
    pub q: f64,
    pub alpha: f64,
}

/// Fixed points, their AT statistics, and the verdicts built from them.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AtReport {
    pub beta: f64,
    pub h: f64,
    pub roots: Vec<RootAlpha>,
    pub alpha_min: f64,
    pub at_member: bool,
    pub rs_minimizers: Vec<f64>,
    pub rs_min_value: f64,
    pub rs_min_unique: bool,
    /// AT statistic restricted to minimizers of the RS functional.
    pub alpha_at_rs_min: f64,
}

pub fn alpha(lab: &Lab, spec: &MixtureSpec, params: &CouplingParams) -> AtReport {
    let roots: Vec<RootAlpha> = qstar_set(lab, spec, params)
        .into_iter()
        .map(|q| RootAlpha {
            q,
            alpha: alpha_at(lab, spec, params, q),
        })
        .collect();
    let alpha_min = roots.iter().map(|r| r.alpha).fold(f64::INFINITY, f64::min);
    let rs = rs_minimize(lab, spec, params);
    let alpha_at_rs_min = rs
        .minimizers
        .iter()
        .map(|&q| alpha_at(lab, spec, params, q))
        .fold(f64::INFINITY, f64::min);
    AtReport {
        beta: params.beta,
        h: params.h,
        roots,
        alpha_min,
        at_member: alpha_min <= 1.0,
        rs_minimizers: rs.minimizers,
        rs_min_value: rs.value,
        rs_min_unique: rs.unique,
        alpha_at_rs_min,
    }
}
