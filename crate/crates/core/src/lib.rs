//! Fixed-point solver for the normalized Monge-Ampère equation on ℝⁿ.
//!
//! Each step solves a second boundary value problem
//! `det ∇²φ_{i+1} / λ(A) = h∘φ_i / ‖h∘φ_i‖₁`, `∇φ_{i+1}(ℝⁿ) = A`,
//! as a semi-discrete optimal transport problem towards the uniform
//! measure on a convex body `A`, then normalizes by `∫_A φ*_{i+1} = −τ`
//! and recenters at the minimum.

pub mod affine_geom;
pub mod cli;
pub mod convex_body;
pub mod error;
pub mod functionals;
pub mod geometry;
pub mod iteration;
pub mod laguerre;
pub mod oracle;
pub mod ot_solver;
pub mod potential;
pub mod profile;

pub use error::{Error, Result};
