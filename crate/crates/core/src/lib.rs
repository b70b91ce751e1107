//! Numerical laboratory for non-autonomous parabolic equations
//! `∂ₜu = div(A(t,x)∇u)` with rough complex coefficients on a periodic grid.
//!
//! The crate is organised bottom-up:
//!
//! * [`grid`]: the torus, scalar/vector fields and the exact adjoint pair
//!   of forward-difference gradient and backward-difference divergence.
//! * [`coeffs`]: edge-sampled, piecewise-constant-in-time coefficient fields,
//!   ellipticity measurement, the scenario library and dyadic time averaging.
//! * [`evolve`]: the frozen-coefficient operators `L_k = −div A_k ∇`, their
//!   semigroups and the propagator family `Γ(t,s)` built by composition.
//! * [`norms`]: tent-space, Kenig–Pipher, slice-space, Carleson and `Ḣ⁻¹`
//!   functionals on sampled space-time fields.
//! * [`maxreg`]: the maximal-regularity operators `M_L`, `M̃_L`, `R_L`.
//! * [`verify`]: one check per quantitative estimate, each producing a
//!   [`verify::CheckReport`].

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod coeffs;
pub mod error;
pub mod evolve;
pub mod fourier;
pub mod grid;
pub mod linalg;
pub mod maxreg;
pub mod norms;
pub mod quad;
pub mod verify;

pub use error::{Error, Result};
pub use num_complex::Complex64;

/// Cell count above which dense matrices (exact exponentials, SVDs) are refused.
pub const DENSE_CELL_LIMIT: usize = 4096;
