//! Numerical toolkit for Sturm-Liouville equations in impedance form,
//! −(a²u′)′ = λa²u on a finite interval.
//!
//! The building blocks are the impedance-weighted integral and derivative
//! operators `op_J` and `op_D`, the formal power basis they generate, the
//! SPPS series solutions built on that basis, a Dirichlet spectral solver,
//! an approximation lab for expansions in formal powers, and transmutation
//! kernels mapping the unit impedance onto a general one, with Darboux
//! relations connecting each object to its reciprocal-impedance twin.
//!
//! Everything operates on [`SampledFunction`]s over a shared [`Grid`];
//! cross-grid arithmetic is rejected rather than silently resampled.

pub mod approx;
pub mod dirichlet;
pub mod error;
pub mod formal;
pub mod grid;
pub mod impedance;
pub mod ops;
pub mod oracle;
pub mod quadrature;
pub mod scalar;
pub mod spps;
pub mod stencil;
pub mod transmutation;

pub use error::{Error, Result};
pub use grid::{Grid, SampledFunction};
pub use impedance::{reciprocal_impedance, validate_proper, Impedance, ImpedanceKind};
pub use scalar::Scalar;

/// Complex double, the scalar for spectral-parameter-dependent objects.
pub type C64 = num_complex::Complex64;
