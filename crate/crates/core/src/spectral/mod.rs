//! Chebyshev × Fourier representation of fields on the unit disk.
//!
//! A field `f(r, φ)` is stored either as samples on the tensor grid
//! `(r_j, φ_i)` ([`PhysicalField`]) or as coefficients `c[m][bin]` of
//! `Σ_m Σ_n c_{mn} T_m(l) e^{inφ}` with `l = 2r − 1` ([`SpectralField`]).
//! Radial points are the Chebyshev extrema `l_j = cos(jπ/Nr)`, so row 0 is
//! the rim `r = 1` and row `Nr` is the centre.

mod dump;
mod field;
mod grid;
mod operators;

pub use dump::{read_coefficients, write_coefficients};
pub use field::{FourierRange, PhysicalField, SpectralField};
pub use grid::{make_grid, Grid};
pub use operators::{
    cheb_product_matrix, diff_matrix, div_matrix, mode_operator, mult_r_matrix, ChebOperators,
    ModeOperator, ModeSign,
};
