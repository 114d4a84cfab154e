//! The commutator rewrite system.
//!
//! Derivative strings are brought into a canonical slot order by adjacent
//! transpositions. Each transposition past the first slot pair emits the
//! curvature terms of the corresponding Ricci identity:
//!
//! ```text
//! f_{ab}   = f_{ba}
//! f_{abc}  = f_{acb} + R_{bcma} f_m
//! f_{abcd} = f_{abdc} + R_{cdmb} f_{am} + R_{cdma} f_{bm}
//! f_{abcd} = f_{acbd} + ∇_d R_{bcma} f_m + R_{bcma} f_{md}
//! ```
//!
//! The slot order puts traced pairs first, so `f_{kk...}` exposes `Δf` and is
//! annihilated by harmonicity of `G`. Every swap strictly lowers the inversion
//! count of its string and every correction term carries a shorter string,
//! so the procedure terminates.

use std::collections::BTreeMap;

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use crate::expr::{collect, structural, Structural, TensorExpr, Term};
use crate::factor::{riem_canonical, Factor, Idx};
use crate::SymbolicError;

/// Longest derivative string the rule set covers.
pub const MAX_ORDER: usize = 4;

const MAX_PASSES: usize = 32;

/// Which rules are active during reduction.
#[derive(Clone, Debug)]
pub struct RewriteSystem {
    /// `ΔG = 0`: strings with a leading trace vanish.
    pub harmonic: bool,
    /// `∇Ric = 0`, and with it the contracted derivative of `Rm`.
    pub parallel_ricci: bool,
    /// Eliminate `R_{adbc}` (a < b < c < d) through the first Bianchi identity.
    pub bianchi_completion: bool,
    /// Pick admissible swaps in a seeded random order instead of left-to-right.
    pub shuffle_seed: Option<u64>,
}

impl Default for RewriteSystem {
    fn default() -> Self {
        RewriteSystem {
            harmonic: true,
            parallel_ricci: true,
            bianchi_completion: false,
            shuffle_seed: None,
        }
    }
}

impl RewriteSystem {
    /// Rules for a general smooth function (no harmonicity).
    pub fn general_function() -> Self {
        RewriteSystem {
            harmonic: false,
            ..Self::default()
        }
    }

    pub fn with_shuffle(mut self, seed: u64) -> Self {
        self.shuffle_seed = Some(seed);
        self
    }

    pub fn with_bianchi(mut self) -> Self {
        self.bianchi_completion = true;
        self
    }

    /// Commute derivative strings into canonical order and apply every
    /// active rule until the canonical form stops changing.
    pub fn reduce(&self, expr: &TensorExpr) -> Result<TensorExpr, SymbolicError> {
        expr.free_indices()?;
        let mut rng = self.shuffle_seed.map(StdRng::seed_from_u64);
        let opts = Structural {
            parallel_ricci: self.parallel_ricci,
        };
        let mut current = collect(expr.terms().to_vec());
        for _ in 0..MAX_PASSES {
            let mut next = Vec::new();
            for t in current.terms() {
                for s in structural(t.clone(), opts) {
                    next.extend(self.sort_term(s, &mut rng)?);
                }
            }
            if self.bianchi_completion {
                next = next.into_iter().flat_map(bianchi_complete).collect();
            }
            let next = collect(next);
            if next == current {
                return Ok(next);
            }
            current = next;
        }
        Err(SymbolicError::NonConvergent(MAX_PASSES))
    }

    fn sort_term(&self, term: Term, rng: &mut Option<StdRng>) -> Result<Vec<Term>, SymbolicError> {
        let mut stack = vec![term];
        let mut out = Vec::new();
        while let Some(t) = stack.pop() {
            let inversions = inversions(&t)?;
            if inversions.is_empty() {
                if self.harmonic && has_leading_trace(&t) {
                    continue;
                }
                out.push(t);
                continue;
            }
            let pick = match rng {
                Some(r) => inversions[r.gen_range(0..inversions.len())],
                None => inversions[0],
            };
            stack.extend(swap(&t, pick.0, pick.1));
        }
        Ok(out)
    }
}

/// Slot key inside one derivative string: traces, then free, then dummies.
fn slot_keys(term: &Term, s: &[Idx]) -> Vec<(u8, Idx)> {
    let counts = term.index_counts();
    s.iter()
        .map(|&i| {
            let in_string = s.iter().filter(|&&j| j == i).count();
            let class = if in_string == 2 {
                0
            } else if counts.get(&i) == Some(&1) {
                1
            } else {
                2
            };
            (class, i)
        })
        .collect()
}

/// Adjacent out-of-order slot pairs as `(factor, position)`.
fn inversions(term: &Term) -> Result<Vec<(usize, usize)>, SymbolicError> {
    let mut found = Vec::new();
    for (fi, f) in term.factors.iter().enumerate() {
        let Factor::DerivG(s) = f else { continue };
        if s.len() > MAX_ORDER {
            return Err(SymbolicError::UnsupportedOrder(format!(
                "derivative string of length {} (at most {MAX_ORDER} supported)",
                s.len()
            )));
        }
        let keys = slot_keys(term, s);
        for p in 0..s.len().saturating_sub(1) {
            if keys[p] > keys[p + 1] {
                found.push((fi, p));
            }
        }
    }
    Ok(found)
}

fn has_leading_trace(term: &Term) -> bool {
    term.factors
        .iter()
        .any(|f| matches!(f, Factor::DerivG(s) if s.len() >= 2 && s[0] == s[1]))
}

fn replace(term: &Term, at: usize, with: Vec<Factor>) -> Term {
    let mut factors = term.factors.clone();
    factors.remove(at);
    factors.extend(with);
    Term::new(term.coeff.clone(), factors)
}

/// Swap slots `p`, `p + 1` of the string in factor `fi`.
fn swap(term: &Term, fi: usize, p: usize) -> Vec<Term> {
    let Factor::DerivG(s) = &term.factors[fi] else {
        unreachable!("swap target is always a derivative string")
    };
    let mut swapped = s.clone();
    swapped.swap(p, p + 1);
    let mut out = vec![replace(term, fi, vec![Factor::DerivG(swapped)])];
    if p == 0 {
        return out;
    }
    let m = term.fresh_dummy();
    let g = |xs: &[Idx]| Factor::DerivG(xs.to_vec());
    match (s.len(), p) {
        (3, 1) => {
            let (a, b, c) = (s[0], s[1], s[2]);
            out.push(replace(term, fi, vec![Factor::Riem([b, c, m, a]), g(&[m])]));
        }
        (4, 2) => {
            let (a, b, c, d) = (s[0], s[1], s[2], s[3]);
            out.push(replace(term, fi, vec![Factor::Riem([c, d, m, b]), g(&[a, m])]));
            out.push(replace(term, fi, vec![Factor::Riem([c, d, m, a]), g(&[b, m])]));
        }
        (4, 1) => {
            let (a, b, c, d) = (s[0], s[1], s[2], s[3]);
            out.push(replace(term, fi, vec![Factor::DRiem(d, [b, c, m, a]), g(&[m])]));
            out.push(replace(term, fi, vec![Factor::Riem([b, c, m, a]), g(&[m, d])]));
        }
        _ => unreachable!("strings are capped at length {MAX_ORDER}"),
    }
    out
}

/// `R_{adbc} = R_{acbd} - R_{abcd}` for canonical presentations with a < b < c < d.
fn bianchi_complete(term: Term) -> Vec<Term> {
    for (p, f) in term.factors.iter().enumerate() {
        let Factor::Riem(slots) = f else { continue };
        let Some((t, neg)) = riem_canonical(*slots) else {
            continue;
        };
        let [a, d, b, c] = t;
        if a < b && b < c && c < d {
            let sign = if neg { -term.coeff.clone() } else { term.coeff.clone() };
            let mut first = replace(&term, p, vec![Factor::Riem([a, c, b, d])]);
            first.coeff = sign.clone();
            let mut second = replace(&term, p, vec![Factor::Riem([a, b, c, d])]);
            second.coeff = -sign;
            return vec![first, second];
        }
    }
    vec![term]
}

/// Histogram of string lengths, used by reduction transcripts.
pub fn order_profile(expr: &TensorExpr) -> BTreeMap<usize, usize> {
    let mut hist = BTreeMap::new();
    for t in expr.terms() {
        for f in &t.factors {
            if let Factor::DerivG(s) = f {
                *hist.entry(s.len()).or_insert(0) += 1;
            }
        }
    }
    hist
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coeff::Coeff;

    const I: Idx = Idx::named('i');
    const J: Idx = Idx::named('j');
    const K: Idx = Idx::named('k');
    const L: Idx = Idx::named('l');

    fn reduce(e: TensorExpr) -> TensorExpr {
        RewriteSystem::default().reduce(&e).unwrap()
    }

    #[test]
    fn third_derivative_commutator() {
        let lhs = TensorExpr::g(&[I, J, K]) - TensorExpr::g(&[I, K, J]);
        let rhs = TensorExpr::riem(J, K, L, I) * TensorExpr::g(&[L]);
        assert_eq!(reduce(lhs), rhs.normalize().unwrap());
    }

    #[test]
    fn gradient_of_laplacian_string() {
        // G_{ikk} = (ΔG)_i + R_ik G_k = R_ik G_k
        let e = TensorExpr::g(&[I, K, K]);
        let expected = TensorExpr::ric(I, K) * TensorExpr::g(&[K]);
        assert_eq!(reduce(e), expected.normalize().unwrap());
    }

    #[test]
    fn harmonicity_kills_trace() {
        assert!(reduce(TensorExpr::g(&[K, K])).is_zero());
        assert!(reduce(TensorExpr::g(&[K, K, I])).is_zero());
    }

    #[test]
    fn general_function_keeps_laplacian() {
        let e = TensorExpr::g(&[K, K]);
        let r = RewriteSystem::general_function().reduce(&e).unwrap();
        assert_eq!(r.len(), 1);
    }

    #[test]
    fn parallel_ricci_drops_covariant_ricci() {
        let e = TensorExpr::factor(Factor::DRic(I, [J, K])) * TensorExpr::g(&[K]);
        assert!(reduce(e).is_zero());
    }

    #[test]
    fn contracted_bianchi_without_parallel_ricci() {
        // ∇_k R_{jkli} = ∇_i R_{jl} - ∇_l R_{ji}
        let sys = RewriteSystem {
            parallel_ricci: false,
            ..RewriteSystem::default()
        };
        let lhs = TensorExpr::factor(Factor::DRiem(K, [J, K, L, I]));
        let rhs = TensorExpr::factor(Factor::DRic(I, [J, L])) - TensorExpr::factor(Factor::DRic(L, [J, I]));
        assert!(sys.reduce(&(lhs - rhs)).unwrap().is_zero());
        let sys = RewriteSystem::default();
        assert!(sys
            .reduce(&TensorExpr::factor(Factor::DRiem(K, [J, K, L, I])))
            .unwrap()
            .is_zero());
    }

    #[test]
    fn first_bianchi_completion() {
        let e = TensorExpr::riem(I, J, K, L) + TensorExpr::riem(J, K, I, L) + TensorExpr::riem(K, I, J, L);
        assert!(!reduce(e.clone()).is_zero());
        let sys = RewriteSystem::default().with_bianchi();
        assert!(sys.reduce(&e).unwrap().is_zero());
    }

    #[test]
    fn fifth_order_strings_are_rejected() {
        let e = TensorExpr::g(&[I, J, K, L, Idx::named('m')]);
        assert!(matches!(
            RewriteSystem::default().reduce(&e),
            Err(SymbolicError::UnsupportedOrder(_))
        ));
    }

    #[test]
    fn shuffled_order_agrees() {
        let e = TensorExpr::g(&[K, I, J, K]) * TensorExpr::scalar(Coeff::int(3));
        let base = reduce(e.clone());
        for seed in 0..20 {
            let r = RewriteSystem::default().with_shuffle(seed).reduce(&e).unwrap();
            assert_eq!(r, base, "seed {seed}");
        }
    }
}
