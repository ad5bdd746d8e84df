//! Equilibrium problems on the unit sphere `S^d` with external fields
//! generated by finitely many positive point charges.
//!
//! The crate covers
//!
//! * [`specfun`] — `ln Γ`, digamma, regularized incomplete beta and the
//!   regularized Gauss hypergeometric function;
//! * [`sphere`] — points, caps, cap areas, uniform sampling and the
//!   stereographic projection;
//! * [`potential`] — kernels, sphere energies, closed-form balayage and
//!   weighted potentials, signed equilibria on cap complements;
//! * [`support`] — solvers for the support of the equilibrium measure
//!   (logarithmic closed form, Riesz `s = d − 2` system, regions of
//!   influence, planar image under the stereographic projection);
//! * [`discrete`] — minimal-energy point configurations in the presence of
//!   the field (L-BFGS with a bounded polar angle and restarts);
//! * [`verify`] — independent Monte-Carlo and quadrature oracles and
//!   checkers for the variational inequalities, cap exclusion and
//!   empirical densities.

pub mod discrete;
pub mod error;
pub mod potential;
pub mod quadrature;
pub mod specfun;
pub mod sphere;
pub mod support;
pub mod verify;

pub use error::{Error, Result};
