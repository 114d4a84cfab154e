//! Index names, exponents of `G`, and the factor alphabet of a monomial.

use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};

use crate::coeff::Coeff;

/// Ids below this are user-facing letters.
pub const FRESH_FREE_BASE: u32 = 500;
/// Canonical dummy names start here.
pub const DUMMY_BASE: u32 = 1000;

/// An abstract frame index.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Idx(pub u32);

impl Idx {
    pub const fn named(c: char) -> Idx {
        Idx(c as u32)
    }

    pub fn is_canonical_dummy(self) -> bool {
        self.0 >= DUMMY_BASE
    }
}

impl fmt::Display for Idx {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.0 {
            id if id < FRESH_FREE_BASE => match char::from_u32(id) {
                Some(c) if c.is_alphanumeric() => write!(f, "{c}"),
                _ => write!(f, "#{id}"),
            },
            id if id < DUMMY_BASE => write!(f, "a{}", id - FRESH_FREE_BASE),
            id => write!(f, "d{}", id - DUMMY_BASE),
        }
    }
}

/// Exponent of `G`, affine in `α = n/(n-2)` and the free symbol `β`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Exponent {
    pub constant: BigRational,
    pub alpha: BigRational,
    pub beta: BigRational,
}

impl Exponent {
    pub fn int(k: i64) -> Self {
        Exponent {
            constant: BigRational::from_integer(BigInt::from(k)),
            alpha: BigRational::zero(),
            beta: BigRational::zero(),
        }
    }

    /// `a + b·α`.
    pub fn alpha(a: i64, b: i64) -> Self {
        Exponent {
            constant: BigRational::from_integer(BigInt::from(a)),
            alpha: BigRational::from_integer(BigInt::from(b)),
            beta: BigRational::zero(),
        }
    }

    /// `a + b·β`.
    pub fn beta(a: i64, b: i64) -> Self {
        Exponent {
            constant: BigRational::from_integer(BigInt::from(a)),
            alpha: BigRational::zero(),
            beta: BigRational::from_integer(BigInt::from(b)),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.constant.is_zero() && self.alpha.is_zero() && self.beta.is_zero()
    }

    pub fn is_one(&self) -> bool {
        self.constant.is_one() && self.alpha.is_zero() && self.beta.is_zero()
    }

    pub fn add(&self, other: &Exponent) -> Exponent {
        Exponent {
            constant: &self.constant + &other.constant,
            alpha: &self.alpha + &other.alpha,
            beta: &self.beta + &other.beta,
        }
    }

    pub fn minus_one(&self) -> Exponent {
        self.add(&Exponent::int(-1))
    }

    /// The exponent as a coefficient, with `α` expanded to `n/(n-2)`.
    pub fn as_coeff(&self) -> Coeff {
        Coeff::from_big(self.constant.clone())
            + Coeff::from_big(self.alpha.clone()) * Coeff::alpha()
            + Coeff::from_big(self.beta.clone()) * Coeff::beta()
    }
}

impl fmt::Display for Exponent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut parts = Vec::new();
        let sym = |c: &BigRational, s: &str| -> String {
            if c.is_one() {
                s.to_string()
            } else if *c == -BigRational::one() {
                format!("-{s}")
            } else {
                format!("{c}{s}")
            }
        };
        if !self.alpha.is_zero() {
            parts.push(sym(&self.alpha, "α"));
        }
        if !self.beta.is_zero() {
            parts.push(sym(&self.beta, "β"));
        }
        if !self.constant.is_zero() || parts.is_empty() {
            parts.push(self.constant.to_string());
        }
        let mut out = parts[0].clone();
        for p in &parts[1..] {
            if let Some(stripped) = p.strip_prefix('-') {
                out.push_str(&format!("-{stripped}"));
            } else {
                out.push_str(&format!("+{p}"));
            }
        }
        write!(f, "{out}")
    }
}

/// One factor of a monomial.
///
/// Variant order is the canonical factor order inside a term.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Factor {
    /// `G^e`; `G^1` is `G` itself.
    GPow(Exponent),
    /// `δ_ab`.
    Kron([Idx; 2]),
    /// `R_ab`.
    Ric([Idx; 2]),
    /// `R_abcd`.
    Riem([Idx; 4]),
    /// `∇_m R_ab`.
    DRic(Idx, [Idx; 2]),
    /// `∇_m R_abcd`.
    DRiem(Idx, [Idx; 4]),
    /// `G_{s1 s2 ...}`, innermost derivative first.
    DerivG(Vec<Idx>),
}

/// Result of bringing a single factor to its canonical presentation.
pub(crate) enum Presented {
    Zero,
    Signed(bool, Factor),
}

/// The 8 presentations of a tensor with Riemann symmetries, with their signs.
const RIEM_GROUP: [([usize; 4], bool); 8] = [
    ([0, 1, 2, 3], false),
    ([1, 0, 2, 3], true),
    ([0, 1, 3, 2], true),
    ([1, 0, 3, 2], false),
    ([2, 3, 0, 1], false),
    ([3, 2, 0, 1], true),
    ([2, 3, 1, 0], true),
    ([3, 2, 1, 0], false),
];

/// Minimal presentation of a Riemann-symmetric index tuple and its sign;
/// `None` when the tuple vanishes identically.
pub(crate) fn riem_canonical(slots: [Idx; 4]) -> Option<([Idx; 4], bool)> {
    let mut best: Option<([Idx; 4], bool)> = None;
    let mut conflict = false;
    for (perm, neg) in RIEM_GROUP {
        let cand = [slots[perm[0]], slots[perm[1]], slots[perm[2]], slots[perm[3]]];
        match &best {
            None => best = Some((cand, neg)),
            Some((b, bneg)) => {
                if cand < *b {
                    best = Some((cand, neg));
                    conflict = false;
                } else if cand == *b && neg != *bneg {
                    conflict = true;
                }
            }
        }
    }
    // a tie with both signs means R = -R
    if conflict {
        None
    } else {
        best
    }
}

fn sorted2(a: [Idx; 2]) -> [Idx; 2] {
    if a[0] <= a[1] {
        a
    } else {
        [a[1], a[0]]
    }
}

impl Factor {
    pub fn indices(&self) -> Vec<Idx> {
        match self {
            Factor::GPow(_) => vec![],
            Factor::Kron(a) | Factor::Ric(a) => a.to_vec(),
            Factor::Riem(a) => a.to_vec(),
            Factor::DRic(m, a) => std::iter::once(*m).chain(a.iter().copied()).collect(),
            Factor::DRiem(m, a) => std::iter::once(*m).chain(a.iter().copied()).collect(),
            Factor::DerivG(s) => s.clone(),
        }
    }

    pub fn relabel(&self, map: &impl Fn(Idx) -> Idx) -> Factor {
        match self {
            Factor::GPow(e) => Factor::GPow(e.clone()),
            Factor::Kron(a) => Factor::Kron(a.map(map)),
            Factor::Ric(a) => Factor::Ric(a.map(map)),
            Factor::Riem(a) => Factor::Riem(a.map(map)),
            Factor::DRic(m, a) => Factor::DRic(map(*m), a.map(map)),
            Factor::DRiem(m, a) => Factor::DRiem(map(*m), a.map(map)),
            Factor::DerivG(s) => Factor::DerivG(s.iter().copied().map(map).collect()),
        }
    }

    /// Canonical presentation under the factor's own index symmetries.
    ///
    /// Only genuine symmetries are used here: pair symmetries of curvature,
    /// symmetry of Ricci and `δ`, and the symmetric first two slots of a
    /// derivative string. Reordering later derivative slots produces curvature
    /// terms and is left to the rewrite system.
    pub(crate) fn present(&self) -> Presented {
        match self {
            Factor::GPow(_) => Presented::Signed(false, self.clone()),
            Factor::Kron(a) => Presented::Signed(false, Factor::Kron(sorted2(*a))),
            Factor::Ric(a) => Presented::Signed(false, Factor::Ric(sorted2(*a))),
            Factor::DRic(m, a) => Presented::Signed(false, Factor::DRic(*m, sorted2(*a))),
            Factor::Riem(a) => match riem_canonical(*a) {
                None => Presented::Zero,
                Some((t, neg)) => Presented::Signed(neg, Factor::Riem(t)),
            },
            Factor::DRiem(m, a) => match riem_canonical(*a) {
                None => Presented::Zero,
                Some((t, neg)) => Presented::Signed(neg, Factor::DRiem(*m, t)),
            },
            Factor::DerivG(s) => {
                let mut s = s.clone();
                if s.len() >= 2 && s[1] < s[0] {
                    s.swap(0, 1);
                }
                Presented::Signed(false, Factor::DerivG(s))
            }
        }
    }

    pub(crate) fn fmt_with(&self, f: &mut fmt::Formatter<'_>, name: &dyn Fn(Idx) -> String) -> fmt::Result {
        let join = |xs: &[Idx]| xs.iter().map(|&i| name(i)).collect::<String>();
        match self {
            Factor::GPow(e) if e.is_one() => write!(f, "G"),
            Factor::GPow(e) => write!(f, "G^({e})"),
            Factor::Kron(a) => write!(f, "δ_{{{}}}", join(a)),
            Factor::Ric(a) => write!(f, "Ric_{{{}}}", join(a)),
            Factor::Riem(a) => write!(f, "R_{{{}}}", join(a)),
            Factor::DRic(m, a) => write!(f, "∇_{}Ric_{{{}}}", name(*m), join(a)),
            Factor::DRiem(m, a) => write!(f, "∇_{}R_{{{}}}", name(*m), join(a)),
            Factor::DerivG(s) => write!(f, "G_{{{}}}", join(s)),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const I: Idx = Idx::named('i');
    const J: Idx = Idx::named('j');
    const K: Idx = Idx::named('k');
    const L: Idx = Idx::named('l');

    #[test]
    fn riemann_pair_antisymmetry() {
        let (a, na) = riem_canonical([I, J, K, L]).unwrap();
        let (b, nb) = riem_canonical([J, I, K, L]).unwrap();
        assert_eq!(a, b);
        assert_ne!(na, nb);
    }

    #[test]
    fn riemann_pair_exchange() {
        let (a, na) = riem_canonical([K, L, I, J]).unwrap();
        assert_eq!(a, [I, J, K, L]);
        assert!(!na);
    }

    #[test]
    fn riemann_repeated_antisymmetric_slots_vanish() {
        assert!(riem_canonical([I, I, K, L]).is_none());
        assert!(riem_canonical([I, J, K, K]).is_none());
        assert!(riem_canonical([I, K, I, K]).is_some());
    }

    #[test]
    fn exponent_as_coeff_expands_alpha() {
        let e = Exponent::alpha(-1, 2);
        assert_eq!(e.as_coeff(), Coeff::int(2) * Coeff::alpha() - Coeff::one());
        assert_eq!(e.to_string(), "2α-1");
        assert_eq!(Exponent::int(-3).to_string(), "-3");
    }
}
