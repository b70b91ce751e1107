//! Frozen-coefficient operators `L_k = −div A_k ∇`, their semigroups, and the
//! propagator family `Γ(t,s)` obtained by composing them piece by piece.

mod duhamel;
mod krylov;
mod operator;
mod propagator;
mod semigroup;

pub use duhamel::{duhamel_residual, integrate_along_solution, DuhamelResult};
pub use krylov::gmres;
pub use operator::DiscreteOperator;
pub use propagator::{Factor, Propagator};
pub use semigroup::{Scheme, Semigroup};
