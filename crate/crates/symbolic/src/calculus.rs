//! Formal covariant derivative and Laplacian with the Leibniz rule.

use crate::expr::{TensorExpr, Term};
use crate::factor::{Factor, Idx, DUMMY_BASE, FRESH_FREE_BASE};
use crate::rewrite::{RewriteSystem, MAX_ORDER};
use crate::SymbolicError;

/// `∇_idx` of an expression: appends `idx` as the outermost derivative slot.
///
/// `idx` must not already occur in the expression unless it is meant to be
/// contracted against a free slot of the same name.
pub fn derivative(expr: &TensorExpr, idx: Idx) -> Result<TensorExpr, SymbolicError> {
    let mut out = Vec::new();
    for t in expr.terms() {
        if t.dummies().contains(&idx) {
            return Err(SymbolicError::MalformedIndex(format!(
                "derivative index {idx} already summed in a term"
            )));
        }
        for (p, f) in t.factors.iter().enumerate() {
            let mut factors = t.factors.clone();
            let mut coeff = t.coeff.clone();
            match f {
                Factor::Kron(_) => continue,
                Factor::GPow(e) => {
                    coeff = coeff * e.as_coeff();
                    factors[p] = Factor::GPow(e.minus_one());
                    factors.push(Factor::DerivG(vec![idx]));
                }
                Factor::DerivG(s) => {
                    if s.len() >= MAX_ORDER {
                        return Err(SymbolicError::UnsupportedOrder(format!(
                            "derivative of a string of length {}",
                            s.len()
                        )));
                    }
                    let mut s = s.clone();
                    s.push(idx);
                    factors[p] = Factor::DerivG(s);
                }
                Factor::Ric(a) => factors[p] = Factor::DRic(idx, *a),
                Factor::Riem(a) => factors[p] = Factor::DRiem(idx, *a),
                Factor::DRic(..) | Factor::DRiem(..) => {
                    return Err(SymbolicError::UnsupportedOrder(
                        "second covariant derivative of curvature".into(),
                    ))
                }
            }
            out.push(Term::new(coeff, factors));
        }
    }
    Ok(TensorExpr::from_terms(out))
}

/// An index name in the temporary range not used by `expr`.
pub fn fresh_free(expr: &TensorExpr) -> Idx {
    let used: std::collections::BTreeSet<u32> = expr
        .terms()
        .iter()
        .flat_map(|t| t.factors.iter().flat_map(|f| f.indices()))
        .map(|i| i.0)
        .collect();
    (FRESH_FREE_BASE..DUMMY_BASE)
        .map(Idx)
        .find(|i| !used.contains(&i.0))
        .expect("temporary index range exhausted")
}

/// `Δ = ∇_k ∇_k` with a fresh dummy, reduced after each derivative.
pub fn laplacian(expr: &TensorExpr, system: &RewriteSystem) -> Result<TensorExpr, SymbolicError> {
    expr.free_indices()?;
    let k = fresh_free(expr);
    let once = system.reduce(&derivative(expr, k)?)?;
    system.reduce(&derivative(&once, k)?)
}

/// `g(∇G, ∇expr)` with a fresh dummy.
pub fn gradient_pairing(expr: &TensorExpr, system: &RewriteSystem) -> Result<TensorExpr, SymbolicError> {
    expr.free_indices()?;
    let k = fresh_free(expr);
    let d = derivative(expr, k)?;
    system.reduce(&(TensorExpr::g(&[k]) * d))
}
