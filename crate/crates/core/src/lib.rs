//! Green functions, matrix Harnack quantities, geodesics and a
//! finite-difference curvature oracle on rotationally symmetric models
//! `dr² + f(r)² g_{S^{n-1}}`.
//!
//! ```
//! use harnack_core::{green, models::ModelManifold, par::Exec};
//!
//! let m = ModelManifold::euclidean(4).unwrap();
//! let p = green::compute_profile(&m, &[1.0, 2.0], Exec::Sequential).unwrap();
//! let (mu_rad, mu_tan) = p.hess_b2_eigs(2.0).unwrap();
//! assert!((mu_rad - 2.0).abs() < 1e-12 && (mu_tan - 2.0).abs() < 1e-12);
//! ```

// `!(x > 0.0)` is how NaN inputs get rejected; index loops mirror tensor notation
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod fd_oracle;
pub mod geodesic;
pub mod green;
pub mod harnack;
pub mod models;
pub mod ode;
pub mod par;
pub mod quadrature;
pub mod spline;
