//! Numerical tolerances and the shared evaluation context.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mixture::{CouplingParams, MixtureSpec};
use crate::par::Exec;
use crate::quad::{Expectation, QuadSpec};

/// Every tolerance and resolution knob. All fields have defaults, so a JSON
/// config may override any subset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Settings {
    pub quad_order: usize,
    pub quad_switch: f64,
    pub quad_step: f64,
    pub quad_half_width: f64,
    /// Hermite order and trapezoid step used inside the simplex search.
    pub search_quad_order: usize,
    pub search_quad_step: f64,

    pub scan_points: usize,
    pub root_tol: f64,
    pub tangent_tol: f64,
    pub sep_tol: f64,
    pub value_tol: f64,
    pub fd_step: f64,

    pub rs_gap_tol: f64,
    pub nm_starts: usize,
    pub nm_f_tol: f64,
    pub nm_x_tol: f64,
    pub nm_max_evals: usize,
    pub atom_merge_tol: f64,

    pub cert_margin: f64,
    pub l_points: usize,
    pub l_min: f64,
    pub l_max: f64,
    pub beta_c_width: f64,
}

impl Default for Settings {
    fn default() -> Self {
        Self {
            quad_order: 60,
            quad_switch: 0.5,
            quad_step: 0.25,
            quad_half_width: 9.0,
            search_quad_order: 24,
            search_quad_step: 0.5,
            scan_points: 2001,
            root_tol: 1e-10,
            tangent_tol: 1e-8,
            sep_tol: 1e-4,
            value_tol: 1e-9,
            fd_step: 1e-4,
            rs_gap_tol: 1e-6,
            nm_starts: 8,
            nm_f_tol: 1e-10,
            nm_x_tol: 1e-8,
            nm_max_evals: 1500,
            atom_merge_tol: 1e-9,
            cert_margin: 1e-3,
            l_points: 200,
            l_min: 1e-6,
            l_max: 10.0,
            beta_c_width: 1e-3,
        }
    }
}

/// Settings plus the quadrature rules derived from them.
#[derive(Debug, Clone)]
pub struct Lab {
    pub settings: Settings,
    pub exec: Exec,
    fine: Expectation,
    search: Expectation,
}

impl Lab {
    pub fn new(settings: Settings) -> Result<Self> {
        let fine = Expectation::new(QuadSpec {
            order: settings.quad_order,
            switch: settings.quad_switch,
            step: settings.quad_step,
            half_width: settings.quad_half_width,
            taper: false,
        })?;
        let search = Expectation::new(QuadSpec {
            order: settings.search_quad_order,
            switch: settings.quad_switch,
            step: settings.search_quad_step,
            half_width: settings.quad_half_width.min(8.0),
            taper: true,
        })?;
        Ok(Self {
            settings,
            exec: Exec::default(),
            fine,
            search,
        })
    }

    pub fn with_exec(mut self, exec: Exec) -> Self {
        self.exec = exec;
        self
    }

    /// Fails when the largest Gaussian field scale `β √ξ₀'(1)` exceeds
    /// [`MAX_SCALE`](crate::quad::MAX_SCALE).
    pub fn check_scale(&self, spec: &MixtureSpec, params: &CouplingParams) -> Result<()> {
        let scale = spec.xi_d1(params, 1.0).sqrt();
        if scale <= crate::quad::MAX_SCALE {
            Ok(())
        } else {
            Err(Error::NumericRange(format!(
                "field scale {scale:e} exceeds {:e}",
                crate::quad::MAX_SCALE
            )))
        }
    }

    /// Full-accuracy expectation.
    pub fn quad(&self) -> &Expectation {
        &self.fine
    }

    /// Cheaper expectation for inner optimization loops.
    pub fn search_quad(&self) -> &Expectation {
        &self.search
    }
}

impl Default for Lab {
    fn default() -> Self {
        Self::new(Settings::default()).expect("default settings are valid")
    }
}
