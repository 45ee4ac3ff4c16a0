//! Discretizations of free scalar Euclidean fields on refinable meshes.
//!
//! The crate builds two families of finite-dimensional Gaussian field
//! approximations and verifies their consistency under coarsening:
//!
//! * [`cubical`] + [`projective`]: the massless field on dyadic cubical
//!   complexes over `[-1,1]^d`, with renormalized 1-cochain inner products
//!   that make the edge-sum coarsening maps co-isometries and the family of
//!   Gaussian measures a projective system.
//! * [`whitney`]: the massive field on one-dimensional meshes (circles and
//!   nested line windows), discretized through Whitney/de Rham maps, where
//!   the compressed covariances form an inductive system exactly.
//!
//! [`gramlin`] supplies the shared Gram-form linear algebra.

pub mod cubical;
pub mod error;
pub mod gramlin;
pub mod intmat;
pub mod projective;
pub mod whitney;

pub use error::{Error, Result};
