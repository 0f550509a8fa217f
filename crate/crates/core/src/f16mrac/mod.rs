//! F-16 short-period model, MRAC augmentation and the validation cases.

pub mod aircraft;
pub mod case;
pub mod lyapunov;
pub mod mrac;
pub mod reference;

use thiserror::Error;

use crate::dynamics::DynError;
use crate::poly::PolyError;

pub use aircraft::{build_short_period, AeroCoeffs, AircraftParams, Coeff, ShortPeriodModel, TrigOrders};
pub use case::{assemble_closed_loop, AssemblyOptions, CaseSpec, ClosedLoop, ControlUnits, Variant};
pub use lyapunov::{lyapunov_residual, solve_lyapunov};
pub use mrac::{build_adaptive_law, linearize, MracConfig};
pub use reference::{fit_reference_trajectory, ReferenceFit};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("invalid aerodynamic data: {0}")]
    InvalidAero(String),
    #[error("missing aerodynamic coefficient {0}")]
    MissingCoefficient(&'static str),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("{0}")]
    Io(String),
    #[error("matrix is not Hurwitz; eigenvalues {0:?}")]
    NotHurwitz(Vec<(f64, f64)>),
    #[error("invalid case: {0}")]
    Case(String),
    #[error(transparent)]
    Poly(#[from] PolyError),
    #[error(transparent)]
    Dyn(#[from] DynError),
}
