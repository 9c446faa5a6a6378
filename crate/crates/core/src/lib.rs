//! Numerical laboratory for mixed p-spin glasses: the Parisi functional at
//! finite replica-symmetry breaking, the generalized de Almeida–Thouless
//! statistic, the Hopf-Lax free-energy upper bound, and small-N exact
//! enumeration.
//!
//! Every entry point takes a [`Lab`], which bundles tolerances, quadrature
//! rules and the execution mode (parallel or serial).

pub mod error;
pub mod finite_n;
pub mod hopflax;
pub mod mixture;
pub mod optim;
pub mod par;
pub mod parisi;
pub mod quad;
pub mod rs_at;
pub mod scan;
pub mod settings;

pub use error::{Error, Result};
pub use mixture::{CouplingParams, MixtureSpec};
pub use par::Exec;
pub use parisi::RsbMeasure;
pub use settings::{Lab, Settings};
