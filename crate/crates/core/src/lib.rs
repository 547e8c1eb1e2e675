pub mod checks;
pub mod error;
pub mod field;
pub mod grid;
pub mod hydro;
pub mod io;
pub mod manybody;
pub mod ops;
pub mod potential;
pub mod propagator;
pub mod qfdft;
pub mod reduced;
pub mod states;
pub mod trajectories;

pub use error::{QfdError, Result};
pub use field::{ComplexField, Field, RealField, Scalar};
pub use hydro::{decompose, HydroFields};
pub use grid::{Boundary, Grid, Grid1D, Grid2D};
pub use num_complex::Complex64;
pub use potential::{Potential, PotentialKind, PotentialSpec};
pub use propagator::{Propagator, PropagatorConfig, Scheme};

/// Crate version, recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
