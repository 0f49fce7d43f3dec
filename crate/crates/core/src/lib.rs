//! Finite-dimensional regular vessels.
//!
//! A vessel couples constant parameters `(σ₁, σ₂, γ)` with a realization
//! `(A, A_ζ, B, C, 𝕏)` whose `(x, t)` evolution produces solutions of
//! integrable PDEs through the moment `H₀ = C 𝕏⁻¹ B` and the tau function.

pub mod error;
pub mod matcore;
pub mod params;
pub mod pdecheck;
pub mod solitons;
pub mod vessel;

pub use error::{Error, Result};
