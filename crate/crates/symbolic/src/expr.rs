//! Tensor expressions: exact linear combinations of index monomials.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use crate::coeff::Coeff;
use crate::factor::{Exponent, Factor, Idx, Presented, DUMMY_BASE};
use crate::SymbolicError;

/// One monomial: a coefficient times a product of factors.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Term {
    pub coeff: Coeff,
    pub factors: Vec<Factor>,
}

impl Term {
    pub fn new(coeff: Coeff, factors: Vec<Factor>) -> Self {
        Term { coeff, factors }
    }

    pub fn index_counts(&self) -> BTreeMap<Idx, usize> {
        let mut counts = BTreeMap::new();
        for f in &self.factors {
            for i in f.indices() {
                *counts.entry(i).or_insert(0) += 1;
            }
        }
        counts
    }

    pub fn free_indices(&self) -> BTreeSet<Idx> {
        self.index_counts()
            .into_iter()
            .filter(|&(_, c)| c == 1)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn dummies(&self) -> Vec<Idx> {
        self.index_counts()
            .into_iter()
            .filter(|&(_, c)| c == 2)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn max_index(&self) -> u32 {
        self.factors
            .iter()
            .flat_map(|f| f.indices())
            .map(|i| i.0)
            .max()
            .unwrap_or(0)
    }

    /// A dummy name not used anywhere in the term.
    pub fn fresh_dummy(&self) -> Idx {
        Idx(self.max_index().max(DUMMY_BASE - 1) + 1)
    }

    pub fn relabel(&self, map: &impl Fn(Idx) -> Idx) -> Term {
        Term {
            coeff: self.coeff.clone(),
            factors: self.factors.iter().map(|f| f.relabel(map)).collect(),
        }
    }

    fn check_multiplicity(&self) -> Result<(), SymbolicError> {
        for (idx, count) in self.index_counts() {
            if count > 2 {
                return Err(SymbolicError::MalformedIndex(format!(
                    "index {idx} appears {count} times in {}",
                    TensorExpr::from_terms(vec![self.clone()])
                )));
            }
        }
        Ok(())
    }
}

/// Switches for the structural simplification shared by every pass.
#[derive(Clone, Copy, Debug, Default)]
pub(crate) struct Structural {
    /// Drop `∇Ric` (and the contracted `∇Rm` it controls).
    pub parallel_ricci: bool,
}

/// Contract `δ`, merge powers of `G`, resolve curvature traces.
pub(crate) fn structural(term: Term, opts: Structural) -> Vec<Term> {
    let mut pending = vec![term];
    let mut done = Vec::new();
    'outer: while let Some(mut t) = pending.pop() {
        if t.coeff.is_zero() {
            continue;
        }
        // δ contraction
        loop {
            let counts = t.index_counts();
            let pos = t.factors.iter().position(|f| matches!(f, Factor::Kron(_)));
            let Some(pos) = pos else { break };
            let mut progressed = false;
            for p in pos..t.factors.len() {
                let Factor::Kron([a, b]) = &t.factors[p] else { continue };
                let (a, b) = (*a, *b);
                if a == b {
                    t.factors.remove(p);
                    t.coeff = t.coeff * Coeff::n();
                } else if counts.get(&b) == Some(&2) {
                    t.factors.remove(p);
                    t = t.relabel(&|i| if i == b { a } else { i });
                } else if counts.get(&a) == Some(&2) {
                    t.factors.remove(p);
                    t = t.relabel(&|i| if i == a { b } else { i });
                } else {
                    continue;
                }
                progressed = true;
                break;
            }
            if !progressed {
                break;
            }
        }
        // powers of G
        let mut exp: Option<Exponent> = None;
        t.factors.retain(|f| match f {
            Factor::GPow(e) => {
                exp = Some(match &exp {
                    None => e.clone(),
                    Some(acc) => acc.add(e),
                });
                false
            }
            _ => true,
        });
        if let Some(e) = exp {
            if !e.is_zero() {
                t.factors.push(Factor::GPow(e));
            }
        }
        // curvature traces
        for p in 0..t.factors.len() {
            match &t.factors[p] {
                Factor::Riem(slots) => match riem_trace(*slots) {
                    Trace::None => {}
                    Trace::Zero => continue 'outer,
                    Trace::Ric(neg, pair) => {
                        t.factors[p] = Factor::Ric(pair);
                        if neg {
                            t.coeff = -t.coeff;
                        }
                        pending.push(t);
                        continue 'outer;
                    }
                },
                Factor::DRiem(m, slots) => {
                    let (m, slots) = (*m, *slots);
                    match riem_trace(slots) {
                        Trace::None => {}
                        Trace::Zero => continue 'outer,
                        Trace::Ric(neg, pair) => {
                            t.factors[p] = Factor::DRic(m, pair);
                            if neg {
                                t.coeff = -t.coeff;
                            }
                            pending.push(t);
                            continue 'outer;
                        }
                    }
                    if slots.contains(&m) {
                        // contracted second Bianchi: ∇_k R_{jkli} = ∇_i R_{jl} - ∇_l R_{ji}
                        let (x, y, z, neg) = bianchi_frame(m, slots);
                        let sign = if neg { -t.coeff.clone() } else { t.coeff.clone() };
                        let mut a = t.clone();
                        a.factors[p] = Factor::DRic(z, [x, y]);
                        a.coeff = sign.clone();
                        let mut b = t.clone();
                        b.factors[p] = Factor::DRic(y, [x, z]);
                        b.coeff = -sign;
                        pending.push(a);
                        pending.push(b);
                        continue 'outer;
                    }
                }
                Factor::DRic(..) if opts.parallel_ricci => continue 'outer,
                _ => {}
            }
        }
        done.push(t);
    }
    done
}

enum Trace {
    None,
    Zero,
    Ric(bool, [Idx; 2]),
}

/// Contract a repeated index inside a Riemann slot tuple, `R_ij = R_ikjk`.
fn riem_trace(s: [Idx; 4]) -> Trace {
    if s[0] == s[1] || s[2] == s[3] {
        return Trace::Zero;
    }
    if s[0] == s[2] {
        Trace::Ric(false, [s[1], s[3]])
    } else if s[1] == s[3] {
        Trace::Ric(false, [s[0], s[2]])
    } else if s[0] == s[3] {
        Trace::Ric(true, [s[1], s[2]])
    } else if s[1] == s[2] {
        Trace::Ric(true, [s[0], s[3]])
    } else {
        Trace::None
    }
}

/// Present `∇_m R_{abcd}` (m among the slots) as `± ∇_m R_{x m y z}`.
fn bianchi_frame(m: Idx, s: [Idx; 4]) -> (Idx, Idx, Idx, bool) {
    // moves that bring slot p to position 1, with the resulting order and sign
    let p = s.iter().position(|&i| i == m).unwrap();
    match p {
        1 => (s[0], s[2], s[3], false),
        0 => (s[1], s[2], s[3], true),  // R_{mabc} = -R_{ambc}
        3 => (s[2], s[0], s[1], false), // R_{abcm} = R_{cmab}
        _ => (s[3], s[0], s[1], true),  // R_{abmc} = -R_{cmab}
    }
}

/// Canonical key of a term: best factor presentation over all dummy relabelings.
///
/// Returns `None` when the term vanishes by symmetry.
pub(crate) fn canonical_term(term: &Term) -> Option<(Vec<Factor>, bool)> {
    let dummies = term.dummies();
    let m = dummies.len();
    let mut perm: Vec<usize> = (0..m).collect();
    let mut best: Option<(Vec<Factor>, bool)> = None;
    let mut conflict = false;
    let mut visit = |perm: &[usize]| {
        let map = |i: Idx| match dummies.binary_search(&i) {
            Ok(pos) => Idx(DUMMY_BASE + perm[pos] as u32),
            Err(_) => i,
        };
        let mut neg = false;
        let mut factors = Vec::with_capacity(term.factors.len());
        for f in &term.factors {
            match f.relabel(&map).present() {
                Presented::Zero => return false,
                Presented::Signed(s, g) => {
                    neg ^= s;
                    factors.push(g);
                }
            }
        }
        factors.sort();
        match &best {
            None => best = Some((factors, neg)),
            Some((b, bneg)) => match factors.cmp(b) {
                std::cmp::Ordering::Less => {
                    best = Some((factors, neg));
                    conflict = false;
                }
                std::cmp::Ordering::Equal if neg != *bneg => conflict = true,
                _ => {}
            },
        }
        true
    };
    if !permute(&mut perm, 0, &mut visit) {
        return None;
    }
    if conflict {
        None
    } else {
        best
    }
}

/// Visit every permutation; stops early (returning false) if the visitor does.
fn permute(perm: &mut Vec<usize>, k: usize, visit: &mut impl FnMut(&[usize]) -> bool) -> bool {
    if k == perm.len() {
        return visit(perm);
    }
    for i in k..perm.len() {
        perm.swap(k, i);
        let ok = permute(perm, k + 1, visit);
        perm.swap(k, i);
        if !ok {
            return false;
        }
    }
    true
}

/// An exact linear combination of monomials with a common free-index set.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct TensorExpr {
    terms: Vec<Term>,
}

impl TensorExpr {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn from_terms(terms: Vec<Term>) -> Self {
        TensorExpr {
            terms: terms.into_iter().filter(|t| !t.coeff.is_zero()).collect(),
        }
    }

    pub fn scalar(c: Coeff) -> Self {
        Self::from_terms(vec![Term::new(c, vec![])])
    }

    pub fn factor(f: Factor) -> Self {
        Self::from_terms(vec![Term::new(Coeff::one(), vec![f])])
    }

    /// `G_{s}`; the empty string is `G` itself.
    pub fn g(s: &[Idx]) -> Self {
        if s.is_empty() {
            Self::gpow(Exponent::int(1))
        } else {
            Self::factor(Factor::DerivG(s.to_vec()))
        }
    }

    pub fn gpow(e: Exponent) -> Self {
        Self::factor(Factor::GPow(e))
    }

    pub fn riem(a: Idx, b: Idx, c: Idx, d: Idx) -> Self {
        Self::factor(Factor::Riem([a, b, c, d]))
    }

    pub fn ric(a: Idx, b: Idx) -> Self {
        Self::factor(Factor::Ric([a, b]))
    }

    pub fn kron(a: Idx, b: Idx) -> Self {
        Self::factor(Factor::Kron([a, b]))
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    pub fn into_terms(self) -> Vec<Term> {
        self.terms
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn max_index(&self) -> u32 {
        self.terms.iter().map(Term::max_index).max().unwrap_or(0)
    }

    /// Check index multiplicities and return the common free-index set.
    pub fn free_indices(&self) -> Result<BTreeSet<Idx>, SymbolicError> {
        let mut free: Option<BTreeSet<Idx>> = None;
        for t in &self.terms {
            t.check_multiplicity()?;
            let f = t.free_indices();
            match &free {
                None => free = Some(f),
                Some(prev) if *prev != f => {
                    return Err(SymbolicError::MalformedIndex(format!(
                        "free indices {{{}}} and {{{}}} disagree across terms",
                        fmt_set(prev),
                        fmt_set(&f)
                    )))
                }
                _ => {}
            }
        }
        Ok(free.unwrap_or_default())
    }

    pub fn scale(&self, c: &Coeff) -> TensorExpr {
        TensorExpr::from_terms(
            self.terms
                .iter()
                .map(|t| Term::new(t.coeff.clone() * c.clone(), t.factors.clone()))
                .collect(),
        )
    }

    /// Tensor product; indices free in both operands become contracted.
    pub fn product(&self, rhs: &TensorExpr) -> TensorExpr {
        let mut out = Vec::with_capacity(self.terms.len() * rhs.terms.len());
        for a in &self.terms {
            for b in &rhs.terms {
                out.push(multiply_terms(a, b));
            }
        }
        TensorExpr::from_terms(out)
    }

    /// Canonical form under index symmetries and dummy renaming alone.
    pub fn normalize(&self) -> Result<TensorExpr, SymbolicError> {
        self.free_indices()?;
        let mut simplified = Vec::new();
        for t in &self.terms {
            simplified.extend(structural(t.clone(), Structural::default()));
        }
        Ok(collect(simplified))
    }
}

/// Canonicalize and merge like terms.
pub(crate) fn collect(terms: Vec<Term>) -> TensorExpr {
    let mut merged: BTreeMap<Vec<Factor>, Coeff> = BTreeMap::new();
    for t in terms {
        if t.coeff.is_zero() {
            continue;
        }
        let Some((factors, neg)) = canonical_term(&t) else {
            continue;
        };
        let c = if neg { -t.coeff } else { t.coeff };
        let slot = merged.entry(factors).or_insert_with(Coeff::zero);
        *slot = slot.clone() + c;
    }
    TensorExpr::from_terms(
        merged
            .into_iter()
            .map(|(factors, coeff)| Term::new(coeff, factors))
            .collect(),
    )
}

fn multiply_terms(a: &Term, b: &Term) -> Term {
    let ca = a.index_counts();
    let cb = b.index_counts();
    let mut next = a.max_index().max(b.max_index()).max(DUMMY_BASE - 1) + 1;
    let mut fresh = || {
        next += 1;
        Idx(next - 1)
    };
    // dummies of either side must not meet indices of the other
    let ren_a: BTreeMap<Idx, Idx> = ca
        .iter()
        .filter(|&(i, &c)| c == 2 && cb.contains_key(i))
        .map(|(&i, _)| (i, fresh()))
        .collect();
    let ren_b: BTreeMap<Idx, Idx> = cb
        .iter()
        .filter(|&(i, &c)| c == 2 && ca.contains_key(i))
        .map(|(&i, _)| (i, fresh()))
        .collect();
    let a = a.relabel(&|i| *ren_a.get(&i).unwrap_or(&i));
    let b = b.relabel(&|i| *ren_b.get(&i).unwrap_or(&i));
    let mut factors = a.factors;
    factors.extend(b.factors);
    Term::new(a.coeff * b.coeff, factors)
}

fn fmt_set(s: &BTreeSet<Idx>) -> String {
    s.iter().map(|i| i.to_string()).collect::<Vec<_>>().join(",")
}

impl Add for TensorExpr {
    type Output = TensorExpr;
    fn add(mut self, rhs: TensorExpr) -> TensorExpr {
        self.terms.extend(rhs.terms);
        self
    }
}

impl Sub for TensorExpr {
    type Output = TensorExpr;
    fn sub(self, rhs: TensorExpr) -> TensorExpr {
        self + (-rhs)
    }
}

impl Neg for TensorExpr {
    type Output = TensorExpr;
    fn neg(self) -> TensorExpr {
        self.scale(&Coeff::int(-1))
    }
}

impl Mul for TensorExpr {
    type Output = TensorExpr;
    fn mul(self, rhs: TensorExpr) -> TensorExpr {
        self.product(&rhs)
    }
}

impl Mul<TensorExpr> for Coeff {
    type Output = TensorExpr;
    fn mul(self, rhs: TensorExpr) -> TensorExpr {
        rhs.scale(&self)
    }
}

impl fmt::Display for TensorExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (pos, t) in self.terms.iter().enumerate() {
            if pos > 0 {
                write!(f, "\n  + ")?;
            }
            let used: BTreeSet<char> = t.free_indices().iter().filter_map(|i| char::from_u32(i.0)).collect();
            let letters: Vec<char> = "klmpqrstuvwxyzabcefgh".chars().filter(|c| !used.contains(c)).collect();
            let dummies = t.dummies();
            let name = |i: Idx| -> String {
                match dummies.binary_search(&i) {
                    Ok(p) if p < letters.len() => letters[p].to_string(),
                    _ => i.to_string(),
                }
            };
            write!(f, "({})", t.coeff)?;
            for fac in &t.factors {
                write!(f, " ")?;
                fac.fmt_with(f, &name)?;
            }
        }
        Ok(())
    }
}
