//! Stationary solutions, linearized spectrum and stability threshold of the
//! radially symmetric nonnecrotic tumor free-boundary model, together with
//! simulators used to cross-check the spectral predictions.
//!
//! The usual pipeline is
//!
//! 1. [`model::build_model`] from a key/value configuration,
//! 2. [`stationary::solve_stationary`] followed by
//!    [`stationary::rescale_to_unit`],
//! 3. [`spectrum::spectral_report`] for the `c = 0` spectrum and `gamma_star`,
//! 4. [`eigenc::solve_mode_eigen`] and [`modalsim`] for `c > 0`.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod acceptance;
pub mod cmtoy;
pub mod config;
pub mod eigenc;
pub mod error;
pub mod expr;
pub mod liegroup;
pub mod linalg;
pub mod modalsim;
pub mod model;
pub mod output;
pub mod quad;
pub mod radial;
pub mod radialsim;
pub mod spectrum;
pub mod stationary;

pub use error::{Error, Result};
pub use expr::{diff_expr, eval_expr, parse_expr, Expr};
pub use model::{build_model, reference_model, TumorModel};
pub use radial::RadialFunction;
pub use stationary::{solve_stationary, StationaryState};
