//! Finite-difference solver for the Parisi PDE
//! `∂_r u + (ξ''(r)/2)[∂_xx u + μ([0,r]) (∂_x u)²] = 0`, `u(1, x) = log cosh x`,
//! used as an independent check on the atomic recursion.
//!
//! Time runs backward in the variance clock `s = ξ'(r)`, which absorbs the
//! `ξ''(r)` factor exactly. Explicit Euler in `s`, centred differences in
//! `x`, and ghost points fixing `∂_x u = ±1` at the edges.

use serde::Serialize;

use super::{penalty, RsbMeasure};
use crate::error::{Error, Result};
use crate::mixture::{CouplingParams, MixtureSpec};
use crate::quad::log_cosh;

const CFL: f64 = 0.45;
const MAX_SUBSTEPS: usize = 20_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PdeGrid {
    /// Half-width of the spatial window, centred on `h`.
    pub x_max: f64,
    pub nx: usize,
    pub nr: usize,
}

impl PdeGrid {
    pub fn min_half_width(spec: &MixtureSpec, params: &CouplingParams) -> f64 {
        3.0 * (spec.xi_d1(params, 1.0).sqrt() + params.h.abs()) + 8.0
    }

    pub fn default_for(spec: &MixtureSpec, params: &CouplingParams) -> Self {
        Self {
            x_max: Self::min_half_width(spec, params),
            nx: 1201,
            nr: 256,
        }
    }

    pub fn refined(&self) -> Self {
        Self {
            x_max: self.x_max,
            nx: 2 * self.nx,
            nr: 2 * self.nr,
        }
    }

    fn validate(&self, spec: &MixtureSpec, params: &CouplingParams) -> Result<()> {
        let need = Self::min_half_width(spec, params);
        if self.x_max < need {
            return Err(Error::Precondition(format!(
                "x_max {} below required {need}",
                self.x_max
            )));
        }
        if self.nx < 64 || self.nr < 64 {
            return Err(Error::Precondition(format!(
                "grid too coarse: nx={} nr={}",
                self.nx, self.nr
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PdeSolution {
    /// Parisi functional: `u(0, h)` minus the penalty.
    pub value: f64,
    pub u_at_h: f64,
    /// `max |∂_x u|` over all grid points and times.
    pub max_slope: f64,
    pub substeps: usize,
}

pub fn parisi_pde_solve(
    measure: &RsbMeasure,
    spec: &MixtureSpec,
    params: &CouplingParams,
    grid: &PdeGrid,
) -> Result<PdeSolution> {
    grid.validate(spec, params)?;
    let half = grid.nx / 2;
    let n = 2 * half + 1;
    let dx = grid.x_max / half as f64;
    let xs: Vec<f64> = (0..n)
        .map(|j| params.h + (j as f64 - half as f64) * dx)
        .collect();
    let mut u: Vec<f64> = xs.iter().map(|&x| log_cosh(x)).collect();
    let mut next = vec![0.0; n];
    let ds_max = CFL * dx * dx;
    let mut substeps = 0usize;
    let mut max_slope = 1.0f64;

    for seg in measure.segments().iter().rev() {
        let len = seg.hi - seg.lo;
        if len <= 0.0 {
            continue;
        }
        let steps = ((len * grid.nr as f64).ceil() as usize).max(1);
        let dr = len / steps as f64;
        for k in 0..steps {
            let r_hi = seg.hi - k as f64 * dr;
            let r_lo = if k + 1 == steps { seg.lo } else { r_hi - dr };
            let ds_total = spec.xi_d1(params, r_hi) - spec.xi_d1(params, r_lo);
            if ds_total <= 0.0 {
                continue;
            }
            let sub = (ds_total / ds_max).ceil() as usize;
            substeps += sub;
            if substeps > MAX_SUBSTEPS {
                return Err(Error::NumericRange(format!(
                    "PDE needs more than {MAX_SUBSTEPS} substeps"
                )));
            }
            let ds = ds_total / sub as f64;
            for _ in 0..sub {
                max_slope = max_slope.max(step(&u, &mut next, dx, ds, seg.m));
                std::mem::swap(&mut u, &mut next);
            }
        }
    }
    let u_at_h = u[half];
    if !u_at_h.is_finite() {
        return Err(Error::NumericRange("PDE solution diverged".into()));
    }
    Ok(PdeSolution {
        value: u_at_h - penalty(measure, spec, params),
        u_at_h,
        max_slope,
        substeps,
    })
}

/// One explicit step; returns the largest centred slope seen.
fn step(u: &[f64], out: &mut [f64], dx: f64, ds: f64, m: f64) -> f64 {
    let n = u.len();
    let at = |j: isize| -> f64 {
        if j < 0 {
            u[1] + 2.0 * dx
        } else if j as usize >= n {
            u[n - 2] + 2.0 * dx
        } else {
            u[j as usize]
        }
    };
    let mut slope = 0.0f64;
    for j in 0..n {
        let (l, c, r) = (at(j as isize - 1), u[j], at(j as isize + 1));
        let ux = (r - l) / (2.0 * dx);
        let uxx = (r - 2.0 * c + l) / (dx * dx);
        out[j] = c + 0.5 * ds * (uxx + m * ux * ux);
        slope = slope.max(ux.abs());
    }
    slope
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parisi::parisi_value;
    use crate::rs_at::f_rs;
    use crate::settings::Lab;

    fn p(beta: f64, h: f64) -> CouplingParams {
        CouplingParams::new(beta, h).unwrap()
    }

    #[test]
    fn dirac_zero_sk() {
        let spec = MixtureSpec::sk();
        let params = p(1.0, 0.0);
        let grid = PdeGrid::default_for(&spec, &params);
        let sol =
            parisi_pde_solve(&RsbMeasure::dirac(0.0).unwrap(), &spec, &params, &grid).unwrap();
        assert!((sol.value - 0.25).abs() < 5e-4, "{}", sol.value);
        assert!(sol.max_slope <= 1.0 + 5e-3);
    }

    #[test]
    fn dirac_interior_matches_rs() {
        let lab = Lab::default();
        let spec = MixtureSpec::sk();
        let params = p(2.0, 0.3);
        let grid = PdeGrid::default_for(&spec, &params);
        let sol =
            parisi_pde_solve(&RsbMeasure::dirac(0.5).unwrap(), &spec, &params, &grid).unwrap();
        assert!((sol.value - f_rs(&lab, &spec, &params, 0.5)).abs() < 5e-4);
    }

    #[test]
    fn refinement_reduces_error() {
        let lab = Lab::default();
        let spec = MixtureSpec::sk();
        let params = p(1.6, 0.0);
        let m = RsbMeasure::new(vec![(0.0, 0.4), (0.6, 0.6)]).unwrap();
        let exact = parisi_value(&lab, &m, &spec, &params).unwrap();
        let grid = PdeGrid {
            nx: 301,
            nr: 64,
            ..PdeGrid::default_for(&spec, &params)
        };
        let coarse = parisi_pde_solve(&m, &spec, &params, &grid).unwrap();
        let fine = parisi_pde_solve(&m, &spec, &params, &grid.refined()).unwrap();
        let (e1, e2) = ((coarse.value - exact).abs(), (fine.value - exact).abs());
        assert!(e2 <= 0.5 * e1, "{e1} -> {e2}");
    }

    #[test]
    fn rejects_small_grids() {
        let spec = MixtureSpec::sk();
        let params = p(1.0, 0.0);
        let m = RsbMeasure::dirac(0.0).unwrap();
        let g = PdeGrid {
            x_max: 1.0,
            nx: 100,
            nr: 100,
        };
        assert!(matches!(
            parisi_pde_solve(&m, &spec, &params, &g),
            Err(Error::Precondition(_))
        ));
        let g = PdeGrid {
            nx: 32,
            ..PdeGrid::default_for(&spec, &params)
        };
        assert!(parisi_pde_solve(&m, &spec, &params, &g).is_err());
    }
}
