//! Forward and inverse spectral problems for the third-order equation
//! `y''' + (tau1 y)' + tau1 y' + tau0 y = lambda y` on (0,1), with `tau0`
//! given through an antiderivative `sigma0`.

pub mod asymptotics;
pub mod error;
pub mod forward;
pub mod grid;
pub mod inverse;
pub mod io;
pub mod model;
pub mod quasi_ode;
pub mod selfadjoint;

pub use error::{Error, Result};
pub use forward::{compute_spectral_data, ForwardOptions, ForwardProblem, SpectralData, SpectralDatum};
pub use grid::{CoefficientPair, Grid, GridFunction, C64};
pub use inverse::{inverse, InverseOptions, ReconstructionResult};
pub use model::{build_model, IndexV, ModelCache, ModelOptions};
pub use quasi_ode::{StateVector, SystemVariant};
