//! Numerical laboratory for traveling-front speeds of reaction-diffusion
//! equations in shear flows.
//!
//! The governing equation lives on an infinite channel `R x Omega` with
//! `Omega = [0, L]^(d-1)` and zero Neumann conditions on the channel walls:
//!
//! ```text
//! u_t = Laplacian(u) + delta * b(y) * du/dx1 + f(u)
//! ```
//!
//! where `b` is a shear profile depending only on the cross-section variable
//! and `f` is a bistable or combustion nonlinearity. Three independent routes
//! to the front speed `c(delta)` are implemented:
//!
//! 1. a small-delta expansion `c0 + delta*b_bar + delta^2*gamma`, with
//!    `gamma` computed from a cross-section cell problem ([`cell`]),
//! 2. a variational sandwich `min psi <= c <= max psi` evaluated on a
//!    multi-scale test function built from the flat front plus a shear
//!    corrector ([`minmax`], [`corrector`]),
//! 3. direct time integration of the PDE with front tracking ([`direct`]).
//!
//! Monte Carlo ensembles over Gaussian random shears ([`shear`], [`ensemble`])
//! compare all routes against the quadratic speed-enhancement law.

pub mod cell;
pub mod corrector;
pub mod direct;
pub mod ensemble;
pub mod error;
pub mod front;
pub mod grid;
pub mod io;
pub mod minmax;
pub mod reaction;
pub mod shear;

pub use cell::CellSolution;
pub use corrector::{CorrectorField, DecayReport, ModeSolution};
pub use direct::{Scheme, SimGrid, SpeedTrace};
pub use ensemble::{EnsembleConfig, EnsembleReport, Route, SweepFit};
pub use error::Error;
pub use front::FrontProfile;
pub use grid::{CrossGrid, UniformGrid};
pub use minmax::{SpeedEstimate, TestFunction};
pub use reaction::Nonlinearity;
pub use shear::{CovarianceModel, ExceedanceReport, KlBasis, ShearSample};

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
