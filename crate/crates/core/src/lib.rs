//! Energy-stable simulation of thermal convection in a free-fluid layer
//! coupled to a saturated porous layer.
//!
//! The free fluid obeys the Navier-Stokes-Boussinesq equations, the porous
//! matrix Darcy's law with a Brinkman regularization, and the two are coupled
//! on the interface by normal-velocity continuity, the Lions normal-stress
//! balance and the Beavers-Joseph-Saffman-Jones slip condition. Each time step
//! is solved by a Picard iteration and certified against the discrete energy
//! inequality of the scheme.

pub mod assembly;
pub mod config;
pub mod diagnostics;
pub mod error;
pub mod experiments;
pub mod fem;
pub mod linalg;
pub mod manufactured;
pub mod mesh;
pub mod model;
pub mod output;
pub mod state;
pub mod stepper;

pub use error::{Error, Result};
