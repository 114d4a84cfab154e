//! Registered identities and their verification.
//!
//! Every entry builds `lhs - rhs`, reduces it, and reports whether the
//! canonical form is exactly zero. Symmetric two-tensors are carried with
//! free indices `i, j`; matrix products contract through a fresh index.

use std::fmt;

use crate::calculus::{derivative, gradient_pairing, laplacian};
use crate::coeff::Coeff;
use crate::expr::TensorExpr;
use crate::factor::{Exponent, Factor, Idx, DUMMY_BASE, FRESH_FREE_BASE};
use crate::rewrite::{order_profile, RewriteSystem};
use crate::SymbolicError;

const I: Idx = Idx::named('i');
const J: Idx = Idx::named('j');
const K: Idx = Idx::named('k');
const L: Idx = Idx::named('l');
const M: Idx = Idx::named('m');

/// Every name accepted by [`verify_identity`].
pub const IDENTITY_NAMES: &[&str] = &[
    "commutator.axiom1",
    "commutator.axiom2",
    "commutator.axiom3",
    "commutator.axiom4",
    "commutator.axiom5",
    "bianchi.contracted",
    "misc.1",
    "misc.2",
    "misc.3",
    "misc.4",
    "misc.5",
    "power_rule",
    "b_squared",
    "hess_b2",
    "lap_of_harnack.step1",
    "lap_of_harnack.step2",
    "lap_of_harnack.step3",
    "lap_of_harnack",
];

/// How the curvature term `R_{ikjl} G_? G_? / G` of the Harnack Laplacian is
/// contracted. The printed formula repeats the free indices `i, j`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Reading {
    /// `R_{ikjl} G_k G_l / G`: the gradients fill the summed slots.
    GradientSlot,
    /// `R_{ikjl} G_i G_j / G` taken at face value.
    Literal,
    /// `R_{ijkl} G_k G_l / G`: the gradients fill an antisymmetric pair.
    TraceSlot,
}

impl Reading {
    pub const ALL: [Reading; 3] = [Reading::GradientSlot, Reading::Literal, Reading::TraceSlot];

    pub fn name(self) -> &'static str {
        match self {
            Reading::GradientSlot => "gradient-slot",
            Reading::Literal => "literal",
            Reading::TraceSlot => "trace-slot",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Outcome {
    Zero,
    Residual(TensorExpr),
    /// The expression could not be formed, e.g. an index occurs three times.
    Rejected(String),
}

impl Outcome {
    pub fn is_zero(&self) -> bool {
        matches!(self, Outcome::Zero)
    }
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Outcome::Zero => write!(f, "zero"),
            Outcome::Residual(r) => write!(f, "residual ({} terms): {r}", r.len()),
            Outcome::Rejected(why) => write!(f, "rejected: {why}"),
        }
    }
}

#[derive(Clone, Debug)]
pub struct Verification {
    pub name: String,
    pub outcome: Outcome,
    /// One line per reduction stage.
    pub transcript: Vec<String>,
}

// ---- building blocks ------------------------------------------------------

fn gpow(e: Exponent) -> TensorExpr {
    TensorExpr::gpow(e)
}

fn inv_g() -> TensorExpr {
    gpow(Exponent::int(-1))
}

/// `|∇G|² = G_k G_k`.
fn grad_sq() -> TensorExpr {
    TensorExpr::g(&[K]) * TensorExpr::g(&[K])
}

fn c(x: Coeff, e: TensorExpr) -> TensorExpr {
    x * e
}

/// `(n - 2)/2 · C`.
fn half_n2_c() -> Coeff {
    Coeff::n_minus_2() * Coeff::rational(1, 2) * Coeff::c()
}

/// `B_ij = G_i G_j / G`.
fn b_mat() -> TensorExpr {
    TensorExpr::g(&[I]) * TensorExpr::g(&[J]) * inv_g()
}

fn hess() -> TensorExpr {
    TensorExpr::g(&[I, J])
}

/// `(n-2)/2 · C · G^α δ_ij`.
fn c_galpha_delta() -> TensorExpr {
    c(half_n2_c(), gpow(Exponent::alpha(0, 1)) * TensorExpr::kron(I, J))
}

/// `H̃ = Hess G - α B + (n-2)/2 · C · G^α g`.
fn htilde() -> TensorExpr {
    hess() - c(Coeff::alpha(), b_mat()) + c_galpha_delta()
}

/// `M = 2/(2-n) B + (n-2)/2 · C · G^α g`.
fn m_mat() -> TensorExpr {
    c(Coeff::int(-2) * Coeff::inv_n_minus_2(1), b_mat()) + c_galpha_delta()
}

/// An index in the temporary range unused by any of `exprs`.
fn fresh(exprs: &[&TensorExpr]) -> Idx {
    let top = exprs
        .iter()
        .flat_map(|e| e.terms())
        .flat_map(|t| t.factors.iter().flat_map(|f| f.indices()))
        .map(|i| i.0)
        .filter(|&m| m < DUMMY_BASE)
        .max()
        .unwrap_or(0);
    Idx(top.max(FRESH_FREE_BASE - 1) + 1)
}

/// Rename free indices. Dummies are first moved to the canonical range so
/// the new names cannot collide with them.
fn rename(e: &TensorExpr, pairs: &[(Idx, Idx)]) -> Result<TensorExpr, SymbolicError> {
    let canon = e.normalize()?;
    let terms = canon
        .terms()
        .iter()
        .map(|t| {
            t.relabel(&|x| {
                pairs
                    .iter()
                    .find(|(from, _)| *from == x)
                    .map(|&(_, to)| to)
                    .unwrap_or(x)
            })
        })
        .collect();
    Ok(TensorExpr::from_terms(terms))
}

/// `(XY)_ij = X_iq Y_qj`.
fn matmul(x: &TensorExpr, y: &TensorExpr) -> Result<TensorExpr, SymbolicError> {
    let q = fresh(&[x, y]);
    Ok(rename(x, &[(J, q)])? * rename(y, &[(I, q)])?)
}

/// `R_ik X_jk + R_jk X_ik` for symmetric `X`.
fn ricci_action(x: &TensorExpr) -> Result<TensorExpr, SymbolicError> {
    let ric = TensorExpr::ric(I, J);
    Ok(matmul(&ric, x)? + matmul(x, &ric)?)
}

/// `R_ikjl X_kl`.
fn riem_action(x: &TensorExpr) -> Result<TensorExpr, SymbolicError> {
    let p = fresh(&[x]);
    let q = Idx(p.0 + 1);
    Ok(TensorExpr::riem(I, p, J, q) * rename(x, &[(I, p), (J, q)])?)
}

/// The curvature term `R_{ikjl} G G / G` under a contraction reading.
fn riem_gradient_term(reading: Reading) -> TensorExpr {
    let body = match reading {
        Reading::GradientSlot => TensorExpr::riem(I, K, J, L) * TensorExpr::g(&[K]) * TensorExpr::g(&[L]),
        Reading::Literal => TensorExpr::riem(I, K, J, L) * TensorExpr::g(&[I]) * TensorExpr::g(&[J]),
        Reading::TraceSlot => TensorExpr::riem(I, J, K, L) * TensorExpr::g(&[K]) * TensorExpr::g(&[L]),
    };
    body * inv_g()
}

/// `Δ(H̃ - (n-2)/2 · C · G^α g)`.
fn harnack_lhs(sys: &RewriteSystem) -> Result<TensorExpr, SymbolicError> {
    laplacian(&(htilde() - c_galpha_delta()), sys)
}

/// The right side shared by the last two displays, up to the `B²` block.
fn harnack_common(reading: Reading) -> Result<TensorExpr, SymbolicError> {
    let h = htilde();
    let two_n_over = Coeff::int(2) * Coeff::n() * Coeff::inv_n_minus_2(1);
    Ok(ricci_action(&h)?
        - c(Coeff::int(2), riem_action(&h)?)
        - c(two_n_over.clone(), riem_gradient_term(reading))
        - c(two_n_over.clone(), inv_g() * matmul(&h, &h)?)
        - c(
            Coeff::n() * Coeff::n_minus_2() * Coeff::rational(1, 2) * Coeff::c() * Coeff::c(),
            gpow(Exponent::alpha(-1, 2)) * TensorExpr::kron(I, J),
        )
        + c(two_n_over, inv_g() * (matmul(&h, &m_mat())? + matmul(&m_mat(), &h)?)))
}

fn harnack_rhs(step: u8, reading: Reading) -> Result<TensorExpr, SymbolicError> {
    let two_n_over = Coeff::int(2) * Coeff::n() * Coeff::inv_n_minus_2(1);
    match step {
        1 => {
            let x = hess() - c(Coeff::alpha(), b_mat());
            let sq = hess() - b_mat();
            Ok(
                ricci_action(&x)?
                    - c(Coeff::int(2), riem_action(&hess())?)
                    - c(two_n_over, inv_g() * matmul(&sq, &sq)?),
            )
        }
        2 => {
            let shifted = htilde() - c_galpha_delta();
            let riem_arg = htilde() + c(Coeff::alpha(), b_mat()) - c_galpha_delta();
            let riem_part = match reading {
                Reading::GradientSlot => riem_action(&riem_arg)?,
                // the collision reading replaces B_kl by B_ij inside the bracket
                _ => riem_action(&(htilde() - c_galpha_delta()))? + c(Coeff::alpha(), riem_gradient_term(reading)),
            };
            let sq = htilde() + c(Coeff::alpha(), b_mat()) - c_galpha_delta() - b_mat();
            Ok(ricci_action(&shifted)? - c(Coeff::int(2), riem_part) - c(two_n_over, inv_g() * matmul(&sq, &sq)?))
        }
        3 => {
            let b2 = matmul(&b_mat(), &b_mat())?;
            Ok(
                harnack_common(reading)? - c(Coeff::int(8) * Coeff::n() * Coeff::inv_n_minus_2(3), inv_g() * b2)
                    + c(
                        Coeff::int(4) * Coeff::n() * Coeff::inv_n_minus_2(1) * Coeff::c(),
                        gpow(Exponent::alpha(-1, 1)) * b_mat(),
                    ),
            )
        }
        _ => {
            let bracket = c(Coeff::c(), gpow(Exponent::alpha(-1, 1)))
                - c(
                    Coeff::int(2) * Coeff::inv_n_minus_2(2),
                    grad_sq() * gpow(Exponent::int(-2)),
                );
            Ok(harnack_common(reading)? + c(Coeff::int(4) * Coeff::n() * Coeff::inv_n_minus_2(1), bracket * b_mat()))
        }
    }
}

/// `lhs` and `rhs` of a catalogue entry together with the rule set to use.
fn build(name: &str, shuffle: Option<u64>) -> Result<(TensorExpr, TensorExpr, RewriteSystem), SymbolicError> {
    let seeded = |mut s: RewriteSystem| {
        s.shuffle_seed = shuffle;
        s
    };
    let sys = seeded(RewriteSystem::default());
    let general = seeded(RewriteSystem::general_function());
    let (i, j, k, l) = (I, J, K, L);
    let gg = |s: &[Idx]| TensorExpr::g(s);
    let two = || Coeff::int(2);
    Ok(match name {
        "commutator.axiom1" => (gg(&[i, j]), gg(&[j, i]), general),
        "commutator.axiom2" => (
            gg(&[i, j, k]) - gg(&[i, k, j]),
            TensorExpr::riem(j, k, l, i) * gg(&[l]),
            general,
        ),
        "commutator.axiom3" => (
            gg(&[i, k, k]) - gg(&[k, k, i]),
            TensorExpr::ric(i, k) * gg(&[k]),
            general,
        ),
        "commutator.axiom4" => (
            gg(&[i, j, k, l]) - gg(&[i, j, l, k]),
            TensorExpr::riem(k, l, M, j) * gg(&[i, M]) + TensorExpr::riem(k, l, M, i) * gg(&[j, M]),
            general,
        ),
        "commutator.axiom5" => (
            gg(&[i, j, k, k]) - gg(&[k, k, i, j]),
            TensorExpr::ric(j, k) * gg(&[i, k]) + TensorExpr::ric(i, k) * gg(&[j, k])
                - c(two(), TensorExpr::riem(i, k, j, l) * gg(&[k, l])),
            general,
        ),
        "bianchi.contracted" => (
            TensorExpr::factor(Factor::DRiem(k, [j, k, l, i])),
            TensorExpr::factor(Factor::DRic(i, [j, l])) - TensorExpr::factor(Factor::DRic(l, [j, i])),
            RewriteSystem {
                parallel_ricci: false,
                ..general
            },
        ),
        "misc.1" => (
            laplacian(&hess(), &sys)?,
            TensorExpr::ric(j, k) * gg(&[i, k]) + TensorExpr::ric(i, k) * gg(&[j, k])
                - c(two(), TensorExpr::riem(i, k, j, l) * gg(&[k, l])),
            sys,
        ),
        "misc.2" => (
            laplacian(&(gg(&[i]) * gg(&[j])), &sys)?,
            TensorExpr::ric(i, k) * gg(&[j]) * gg(&[k])
                + TensorExpr::ric(j, k) * gg(&[i]) * gg(&[k])
                + c(two(), gg(&[i, k]) * gg(&[j, k])),
            sys,
        ),
        "misc.3" => (
            gradient_pairing(&(gg(&[i]) * gg(&[j])), &sys)?,
            gg(&[i]) * gg(&[k]) * gg(&[j, k]) + gg(&[j]) * gg(&[k]) * gg(&[i, k]),
            sys,
        ),
        "misc.4" => (
            laplacian(&b_mat(), &sys)?,
            (TensorExpr::ric(i, k) * gg(&[j]) * gg(&[k]) + TensorExpr::ric(j, k) * gg(&[i]) * gg(&[k])) * inv_g()
                + c(two(), gg(&[i, k]) * gg(&[j, k]) * inv_g())
                + c(two(), grad_sq() * gg(&[i]) * gg(&[j]) * gpow(Exponent::int(-3)))
                - c(
                    two(),
                    gg(&[k]) * (gg(&[i]) * gg(&[j, k]) + gg(&[j]) * gg(&[i, k])) * gpow(Exponent::int(-2)),
                ),
            sys,
        ),
        "misc.5" => (
            laplacian(&gpow(Exponent::alpha(0, 1)), &sys)?,
            c(
                two() * Coeff::n() * Coeff::inv_n_minus_2(2),
                gpow(Exponent::alpha(-2, 1)) * grad_sq(),
            ),
            sys,
        ),
        "power_rule" => (
            laplacian(&gpow(Exponent::beta(0, 1)), &sys)?,
            c(
                Coeff::beta() * (Coeff::beta() - Coeff::one()),
                gpow(Exponent::beta(-2, 1)) * grad_sq(),
            ),
            sys,
        ),
        "b_squared" => (matmul(&b_mat(), &b_mat())?, grad_sq() * inv_g() * b_mat(), sys),
        "hess_b2" => {
            // b² = G^{2/(2-n)} = G^{1-α}
            let b2 = gpow(Exponent::alpha(1, -1));
            let lhs = derivative(&derivative(&b2, i)?, j)?;
            let h = hess() - c(Coeff::alpha(), b_mat())
                + c(Coeff::n_minus_2(), gpow(Exponent::alpha(0, 1)) * TensorExpr::kron(i, j));
            let rhs = c(
                Coeff::int(-2) * Coeff::inv_n_minus_2(1),
                gpow(Exponent::alpha(0, -1)) * h,
            ) + c(two(), TensorExpr::kron(i, j));
            (lhs, rhs, sys)
        }
        "lap_of_harnack.step1" => (harnack_lhs(&sys)?, harnack_rhs(1, Reading::GradientSlot)?, sys),
        "lap_of_harnack.step2" => (harnack_lhs(&sys)?, harnack_rhs(2, Reading::GradientSlot)?, sys),
        "lap_of_harnack.step3" => (harnack_lhs(&sys)?, harnack_rhs(3, Reading::GradientSlot)?, sys),
        "lap_of_harnack" => (harnack_lhs(&sys)?, harnack_rhs(4, Reading::GradientSlot)?, sys),
        other => return Err(SymbolicError::UnknownIdentity(other.to_string())),
    })
}

fn conclude(name: &str, lhs: TensorExpr, rhs: TensorExpr, sys: &RewriteSystem) -> Verification {
    let mut transcript = vec![format!("{name}: lhs {} terms, rhs {} terms", lhs.len(), rhs.len())];
    let diff = lhs - rhs;
    let outcome = match diff.free_indices() {
        Err(e) => Outcome::Rejected(e.to_string()),
        Ok(free) => {
            let names: Vec<String> = free.iter().map(|i| i.to_string()).collect();
            transcript.push(format!("free indices {{{}}}", names.join(",")));
            transcript.push(format!("derivative orders before reduction {:?}", order_profile(&diff)));
            match sys.reduce(&diff) {
                Err(e) => Outcome::Rejected(e.to_string()),
                Ok(r) if r.is_zero() => Outcome::Zero,
                Ok(r) => Outcome::Residual(r),
            }
        }
    };
    transcript.push(format!("lhs - rhs reduces to {outcome}"));
    Verification {
        name: name.to_string(),
        outcome,
        transcript,
    }
}

/// Build and reduce `lhs - rhs` for a registered identity.
pub fn verify_identity(name: &str) -> Result<Verification, SymbolicError> {
    let (lhs, rhs, sys) = build(name, None)?;
    Ok(conclude(name, lhs, rhs, &sys))
}

/// `lhs - rhs` of a registered identity, unreduced, with the rule set it is
/// checked under. A seed makes every internal reduction pick swaps at random.
pub fn identity_difference(name: &str, shuffle: Option<u64>) -> Result<(TensorExpr, RewriteSystem), SymbolicError> {
    let (lhs, rhs, sys) = build(name, shuffle)?;
    Ok((lhs - rhs, sys))
}

/// The Harnack Laplacian under one contraction reading of its curvature term.
pub fn verify_lap_of_harnack(reading: Reading) -> Result<Verification, SymbolicError> {
    let sys = RewriteSystem::default();
    let name = format!("lap_of_harnack[{}]", reading.name());
    let rhs = harnack_rhs(4, reading)?;
    Ok(conclude(&name, harnack_lhs(&sys)?, rhs, &sys))
}

/// Verify the whole catalogue, in parallel when the feature is enabled.
pub fn verify_all() -> Result<Vec<Verification>, SymbolicError> {
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        IDENTITY_NAMES.par_iter().map(|n| verify_identity(n)).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        IDENTITY_NAMES.iter().map(|n| verify_identity(n)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_catalogued_identity_reduces_to_zero() {
        for v in verify_all().unwrap() {
            assert!(v.outcome.is_zero(), "{}: {}", v.name, v.outcome);
        }
    }

    #[test]
    fn unknown_name_is_an_error() {
        assert!(matches!(
            verify_identity("misc.9"),
            Err(SymbolicError::UnknownIdentity(_))
        ));
    }

    #[test]
    fn readings_of_the_curvature_term() {
        assert!(verify_lap_of_harnack(Reading::GradientSlot).unwrap().outcome.is_zero());
        assert!(matches!(
            verify_lap_of_harnack(Reading::Literal).unwrap().outcome,
            Outcome::Rejected(_)
        ));
        assert!(matches!(
            verify_lap_of_harnack(Reading::TraceSlot).unwrap().outcome,
            Outcome::Residual(_)
        ));
    }

    #[test]
    fn wrong_coefficient_leaves_a_residual() {
        let sys = RewriteSystem::default();
        let lhs = laplacian(&hess(), &sys).unwrap();
        let rhs = TensorExpr::ric(J, K) * TensorExpr::g(&[I, K]) + TensorExpr::ric(I, K) * TensorExpr::g(&[J, K])
            - c(Coeff::int(3), TensorExpr::riem(I, K, J, L) * TensorExpr::g(&[K, L]));
        let v = conclude("perturbed", lhs, rhs, &sys);
        assert!(matches!(v.outcome, Outcome::Residual(ref r) if r.len() == 1));
    }
}
