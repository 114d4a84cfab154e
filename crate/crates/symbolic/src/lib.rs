//! Exact abstract-index calculus for a harmonic function `G` on a manifold
//! with parallel Ricci curvature.
//!
//! Expressions are linear combinations of monomials in covariant derivatives
//! of `G`, curvature, `δ` and powers `G^e`, with coefficients that are exact
//! rational functions of `n` and `C`. [`RewriteSystem::reduce`] commutes
//! derivative strings into a canonical order, so two expressions that agree
//! as tensors on every such manifold reduce to the same canonical form.
//!
//! ```
//! use harnack_symbolic::{Idx, RewriteSystem, TensorExpr};
//! let (i, j, k, l) = (Idx::named('i'), Idx::named('j'), Idx::named('k'), Idx::named('l'));
//! let lhs = TensorExpr::g(&[i, j, k]) - TensorExpr::g(&[i, k, j]);
//! let rhs = TensorExpr::riem(j, k, l, i) * TensorExpr::g(&[l]);
//! let sys = RewriteSystem::default();
//! assert!(sys.reduce(&(lhs - rhs)).unwrap().is_zero());
//! ```

pub mod calculus;
pub mod catalogue;
pub mod coeff;
pub mod expr;
pub mod factor;
pub mod rewrite;

pub use calculus::{derivative, laplacian};
pub use catalogue::{verify_all, verify_identity, Outcome, Reading, Verification, IDENTITY_NAMES};
pub use coeff::Coeff;
pub use expr::{TensorExpr, Term};
pub use factor::{Exponent, Factor, Idx};
pub use rewrite::RewriteSystem;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SymbolicError {
    #[error("malformed index structure: {0}")]
    MalformedIndex(String),
    #[error("unsupported derivative order: {0}")]
    UnsupportedOrder(String),
    #[error("unknown identity `{0}`")]
    UnknownIdentity(String),
    #[error("reduction did not reach a fixpoint after {0} passes")]
    NonConvergent(usize),
}
