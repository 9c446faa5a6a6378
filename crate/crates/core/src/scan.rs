//! Phase-diagram scans over `(β, h)`.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hopflax::best_bound;
use crate::mixture::{CouplingParams, MixtureSpec};
use crate::parisi::{rs_gap, MAX_K};
use crate::rs_at::alpha;
use crate::settings::Lab;

pub const CSV_HEADER: &str =
    "beta,h,alpha_min,at_member,rs_value,krsb_value,gap,rs_member,alpha_at_rs_min,rs_min_unique,witness";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub lo: f64,
    pub hi: f64,
    pub n: usize,
}

impl Axis {
    pub fn points(&self) -> Result<Vec<f64>> {
        match self.n {
            0 => Err(Error::Precondition("scan axis has no points".into())),
            1 if self.lo == self.hi => Ok(vec![self.lo]),
            1 => Err(Error::Precondition(
                "a single-point axis needs lo == hi".into(),
            )),
            n if self.hi > self.lo => {
                let last = (n - 1) as f64;
                Ok((0..n)
                    .map(|i| (self.lo * (last - i as f64) + self.hi * i as f64) / last)
                    .collect())
            }
            _ => Err(Error::Precondition(format!(
                "degenerate range [{}, {}]",
                self.lo, self.hi
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanConfig {
    pub beta: Axis,
    pub h: Axis,
    pub k_max: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhaseCell {
    pub beta: f64,
    pub h: f64,
    pub alpha_min: f64,
    pub at_member: bool,
    pub rs_value: f64,
    pub krsb_value: f64,
    /// Optimal value for each `k = 0..=k_max`; not part of the CSV.
    pub krsb_values: Vec<f64>,
    pub gap: f64,
    pub rs_member: bool,
    pub alpha_at_rs_min: f64,
    pub rs_min_unique: bool,
    /// In the AT region but not replica symmetric.
    pub witness: bool,
    pub error: Option<String>,
}

impl PhaseCell {
    fn failed(beta: f64, h: f64, err: Error) -> Self {
        Self {
            beta,
            h,
            alpha_min: f64::NAN,
            at_member: false,
            rs_value: f64::NAN,
            krsb_value: f64::NAN,
            krsb_values: Vec::new(),
            gap: f64::NAN,
            rs_member: false,
            alpha_at_rs_min: f64::NAN,
            rs_min_unique: false,
            witness: false,
            error: Some(err.to_string()),
        }
    }
}

fn cell_seed(seed: u64, index: usize) -> u64 {
    seed ^ (index as u64 + 1).wrapping_mul(0xd1b5_4a32_d192_ed03)
}

fn compute_cell(
    lab: &Lab,
    spec: &MixtureSpec,
    beta: f64,
    h: f64,
    k_max: usize,
    seed: u64,
) -> PhaseCell {
    let run = || -> Result<PhaseCell> {
        let params = CouplingParams::new(beta, h)?;
        lab.check_scale(spec, &params)?;
        let at = alpha(lab, spec, &params);
        let gap = rs_gap(lab, spec, &params, k_max, seed)?;
        Ok(PhaseCell {
            beta,
            h,
            alpha_min: at.alpha_min,
            at_member: at.at_member,
            rs_value: gap.rs_value,
            krsb_value: gap.best_value,
            krsb_values: gap.krsb_values.clone(),
            gap: gap.gap,
            rs_member: gap.rs_member,
            alpha_at_rs_min: at.alpha_at_rs_min,
            rs_min_unique: at.rs_min_unique,
            witness: at.at_member && !gap.rs_member,
            error: None,
        })
    };
    run().unwrap_or_else(|e| PhaseCell::failed(beta, h, e))
}

/// One cell per grid point in row-major `(β, h)` order. Cells are
/// independent and computed through `lab.exec`; a failing cell records its
/// error instead of aborting the scan.
pub fn phase_grid(lab: &Lab, spec: &MixtureSpec, config: &ScanConfig) -> Result<Vec<PhaseCell>> {
    if config.k_max == 0 || config.k_max > MAX_K {
        return Err(Error::Precondition(format!(
            "k_max must lie in 1..={MAX_K}, got {}",
            config.k_max
        )));
    }
    let betas = config.beta.points()?;
    let hs = config.h.points()?;
    if betas.iter().any(|&b| b < 0.0) {
        return Err(Error::Precondition("beta must be non-negative".into()));
    }
    let jobs: Vec<(usize, f64, f64)> = betas
        .iter()
        .flat_map(|&b| hs.iter().map(move |&h| (b, h)))
        .enumerate()
        .map(|(i, (b, h))| (i, b, h))
        .collect();
    Ok(lab.exec.map(jobs, |(i, b, h)| {
        compute_cell(lab, spec, b, h, config.k_max, cell_seed(config.seed, i))
    }))
}

/// Indices of cells violating `rs_member ⇒ at_member`.
pub fn inclusion_violations(cells: &[PhaseCell]) -> Vec<usize> {
    cells
        .iter()
        .enumerate()
        .filter(|(_, c)| c.error.is_none() && c.rs_member && !c.at_member)
        .map(|(i, _)| i)
        .collect()
}

/// Re-checks a zero-field witness cell: either the Hopf-Lax bound or the
/// k-RSB gap must certify symmetry breaking.
pub fn witness_certified(lab: &Lab, spec: &MixtureSpec, cell: &PhaseCell) -> Result<bool> {
    if cell.gap > lab.settings.rs_gap_tol {
        return Ok(true);
    }
    if cell.h == 0.0 && cell.beta > 0.0 {
        return Ok(best_bound(lab, spec, &CouplingParams::new(cell.beta, 0.0)?)?.margin > 0.0);
    }
    Ok(false)
}

fn real(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.11e}")
    } else {
        "NaN".into()
    }
}

fn flag(b: bool) -> &'static str {
    if b {
        "1"
    } else {
        "0"
    }
}

pub fn to_csv(cells: &[PhaseCell]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for c in cells {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{}",
            real(c.beta),
            real(c.h),
            real(c.alpha_min),
            flag(c.at_member),
            real(c.rs_value),
            real(c.krsb_value),
            real(c.gap),
            flag(c.rs_member),
            real(c.alpha_at_rs_min),
            flag(c.rs_min_unique),
            flag(c.witness),
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::par::Exec;

    #[test]
    fn axis_points() {
        assert_eq!(
            Axis {
                lo: 0.0,
                hi: 1.0,
                n: 3
            }
            .points()
            .unwrap(),
            vec![0.0, 0.5, 1.0]
        );
        assert_eq!(
            Axis {
                lo: 0.2,
                hi: 0.2,
                n: 1
            }
            .points()
            .unwrap(),
            vec![0.2]
        );
        assert!(Axis {
            lo: 0.0,
            hi: 1.0,
            n: 0
        }
        .points()
        .is_err());
        assert!(Axis {
            lo: 1.0,
            hi: 1.0,
            n: 4
        }
        .points()
        .is_err());
        assert!(Axis {
            lo: 1.0,
            hi: 0.0,
            n: 4
        }
        .points()
        .is_err());
        assert_eq!(
            Axis {
                lo: 0.2,
                hi: 1.4,
                n: 13
            }
            .points()
            .unwrap()[8],
            1.0
        );
    }

    #[test]
    fn empty_range_is_rejected() {
        let lab = Lab::default();
        let cfg = ScanConfig {
            beta: Axis {
                lo: 0.5,
                hi: 0.5,
                n: 3,
            },
            h: Axis {
                lo: 0.0,
                hi: 0.0,
                n: 1,
            },
            k_max: 1,
            seed: 0,
        };
        assert!(matches!(
            phase_grid(&lab, &MixtureSpec::sk(), &cfg),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn csv_layout() {
        let lab = Lab::default().with_exec(Exec::Serial);
        let cfg = ScanConfig {
            beta: Axis {
                lo: 0.2,
                hi: 0.4,
                n: 2,
            },
            h: Axis {
                lo: 0.0,
                hi: 0.5,
                n: 2,
            },
            k_max: 1,
            seed: 11,
        };
        let cells = phase_grid(&lab, &MixtureSpec::sk(), &cfg).unwrap();
        assert_eq!(cells.len(), 4);
        assert_eq!((cells[1].beta, cells[1].h), (0.2, 0.5));
        let csv = to_csv(&cells);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], CSV_HEADER);
        assert_eq!(lines.len(), 5);
        assert!(lines[1].starts_with("2.00000000000e-1,0.00000000000e0,"));
        assert!(lines.iter().skip(1).all(|l| l.split(',').count() == 11));
        assert!(inclusion_violations(&cells).is_empty());
    }

    #[test]
    fn failed_cells_are_recorded() {
        let cell = PhaseCell::failed(1.0, 0.0, Error::NumericRange("boom".into()));
        assert!(cell.error.as_deref().unwrap().contains("boom"));
        assert!(to_csv(&[cell]).lines().nth(1).unwrap().contains("NaN"));
    }
}
