//! Spectral solvers for the defocusing Davey–Stewartson II d-bar system
//! with potentials supported on the unit disk.
//!
//! Fields are expanded in Chebyshev polynomials in `r` and Fourier modes
//! in `φ`. Two independent routes produce complex geometric optics (CGO)
//! solutions and the reflection coefficient `R(k)`:
//!
//! * [`fundamental`] + [`cgo`]: a `k`-independent basis of rim-normalized
//!   solutions, combined per `k` by a small linear system;
//! * [`picard`]: a fixed-point iteration on the bounded `Φ` unknowns with
//!   per-mode Chebyshev solves.
//!
//! All numerics are generic over [`Real`] (`f32`/`f64`); the `*64` aliases
//! below fix double precision.

pub mod bessel;
pub mod cgo;
pub mod error;
pub mod fundamental;
pub mod linalg;
pub mod parallel;
pub mod picard;
pub mod potential;
pub mod reflection;
pub mod scalar;
pub mod spectral;

pub use error::{DbarError, Result};
pub use scalar::{Real, C};

pub type Complex64 = C<f64>;
pub type Grid64 = spectral::Grid<f64>;
pub type SpectralField64 = spectral::SpectralField<f64>;
pub type PhysicalField64 = spectral::PhysicalField<f64>;
pub type Potential64 = potential::Potential<f64>;
pub type FundamentalBasis64 = fundamental::FundamentalBasis<f64>;
pub type CgoSolution64 = cgo::CgoSolution<f64>;
pub type ModeSolveBank64 = picard::ModeSolveBank<f64>;
pub type ReflectionSweep64 = reflection::ReflectionSweep<f64>;

pub type Grid32 = spectral::Grid<f32>;
pub type SpectralField32 = spectral::SpectralField<f32>;
pub type PhysicalField32 = spectral::PhysicalField<f32>;
