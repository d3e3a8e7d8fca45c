//! Large-strain viscoelastic creep with a Jeffreys-type rheology.
//!
//! The deformation gradient splits as `∇y = F_el Π` into an elastic part and a
//! creep strain `Π`. Stored energy penalizes elastic strain, the determinant of
//! `Π` and the gradient of the elastic strain; dissipation is quadratic in
//! `Π̇`, `∇²Π̇` and the rate of the elastic Cauchy–Green tensor.
//!
//! - [`tensor`]: small dense tensors in two and three dimensions.
//! - [`constitutive`]: energy densities, dissipation and their derivatives.
//! - [`weakform`]: pointwise weak-form integrands and a finite-difference audit.
//! - [`galerkin`]: cubic-spline Galerkin solver with backward-Euler stepping.
//! - [`stratified`]: the sheared-stripe example and the regularizer audit.
//! - [`config`], [`io`]: run files, dumps and CSV output.

pub mod config;
pub mod constitutive;
pub mod error;
pub mod galerkin;
pub mod io;
pub mod quadrature;
pub mod stratified;
pub mod tensor;
pub mod weakform;

pub use error::{Error, Result};
