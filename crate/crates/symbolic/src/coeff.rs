//! Exact coefficients: polynomials in the dimension `n`, the Harnack constant
//! `C` and a free exponent symbol `β`, localized at `n - 2`.
//!
//! Every coefficient that shows up in the Green-function identities has the
//! shape `P(n, C, β) / (n - 2)^k`, so this is the whole field we need. A value
//! is kept with the smallest possible `k`, which makes the representation
//! canonical.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

/// Exponents of `(n, C, β)` in a monomial.
pub type Monomial = [u16; 3];

const VAR_NAMES: [&str; 3] = ["n", "C", "β"];

/// Sparse multivariate polynomial with exact rational coefficients.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Poly {
    terms: BTreeMap<Monomial, BigRational>,
}

impl Poly {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn constant(value: BigRational) -> Self {
        let mut terms = BTreeMap::new();
        if !value.is_zero() {
            terms.insert([0, 0, 0], value);
        }
        Poly { terms }
    }

    pub fn var(which: usize) -> Self {
        let mut mono = [0u16; 3];
        mono[which] = 1;
        let mut terms = BTreeMap::new();
        terms.insert(mono, BigRational::one());
        Poly { terms }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Monomial, &BigRational)> {
        self.terms.iter()
    }

    fn add_term(&mut self, mono: Monomial, value: BigRational) {
        if value.is_zero() {
            return;
        }
        let slot = self.terms.entry(mono).or_insert_with(BigRational::zero);
        *slot += value;
        if slot.is_zero() {
            self.terms.remove(&mono);
        }
    }

    /// Evaluate at rational values of `(n, C, β)`.
    pub fn eval(&self, at: [&BigRational; 3]) -> BigRational {
        let mut acc = BigRational::zero();
        for (mono, c) in &self.terms {
            let mut v = c.clone();
            for (var, &e) in mono.iter().enumerate() {
                for _ in 0..e {
                    v *= at[var];
                }
            }
            acc += v;
        }
        acc
    }

    /// Exact division by `(n - 2)`, or `None` when it leaves a remainder.
    pub fn div_n_minus_2(&self) -> Option<Poly> {
        // group by the (C, β) part, then synthetic division in n
        let mut groups: BTreeMap<[u16; 2], BTreeMap<u16, BigRational>> = BTreeMap::new();
        for (mono, c) in &self.terms {
            groups.entry([mono[1], mono[2]]).or_default().insert(mono[0], c.clone());
        }
        let two = BigRational::from_integer(BigInt::from(2));
        let mut out = Poly::zero();
        for (rest, coeffs) in groups {
            let degree = *coeffs.keys().next_back().unwrap();
            let a = |d: u16| coeffs.get(&d).cloned().unwrap_or_else(BigRational::zero);
            // q_{d-1} = a_d + 2 q_d, from the top
            let mut q = BigRational::zero();
            let mut quotient = Vec::with_capacity(degree as usize);
            for d in (1..=degree).rev() {
                q = a(d) + &two * &q;
                quotient.push((d - 1, q.clone()));
            }
            let remainder = a(0) + &two * &q;
            if !remainder.is_zero() {
                return None;
            }
            for (d, c) in quotient {
                out.add_term([d, rest[0], rest[1]], c);
            }
        }
        Some(out)
    }
}

impl Add for &Poly {
    type Output = Poly;
    fn add(self, rhs: &Poly) -> Poly {
        let mut out = self.clone();
        for (m, c) in &rhs.terms {
            out.add_term(*m, c.clone());
        }
        out
    }
}

impl Mul for &Poly {
    type Output = Poly;
    fn mul(self, rhs: &Poly) -> Poly {
        let mut out = Poly::zero();
        for (ma, ca) in &self.terms {
            for (mb, cb) in &rhs.terms {
                let mono = [ma[0] + mb[0], ma[1] + mb[1], ma[2] + mb[2]];
                out.add_term(mono, ca * cb);
            }
        }
        out
    }
}

impl Neg for &Poly {
    type Output = Poly;
    fn neg(self) -> Poly {
        Poly {
            terms: self.terms.iter().map(|(m, c)| (*m, -c.clone())).collect(),
        }
    }
}

impl fmt::Display for Poly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        // highest total degree first reads more naturally
        let mut items: Vec<_> = self.terms.iter().collect();
        items.sort_by(|a, b| {
            let da: u16 = a.0.iter().sum();
            let db: u16 = b.0.iter().sum();
            db.cmp(&da).then(b.0.cmp(a.0))
        });
        for (pos, (mono, c)) in items.into_iter().enumerate() {
            let negative = c.is_negative();
            let abs = c.abs();
            if pos == 0 {
                if negative {
                    write!(f, "-")?;
                }
            } else if negative {
                write!(f, " - ")?;
            } else {
                write!(f, " + ")?;
            }
            let is_const = mono.iter().all(|&e| e == 0);
            if !abs.is_one() || is_const {
                write!(f, "{abs}")?;
                if !is_const {
                    write!(f, "·")?;
                }
            }
            let mut first = true;
            for (var, &e) in mono.iter().enumerate() {
                if e == 0 {
                    continue;
                }
                if !first {
                    write!(f, "·")?;
                }
                first = false;
                write!(f, "{}", VAR_NAMES[var])?;
                if e > 1 {
                    write!(f, "^{e}")?;
                }
            }
        }
        Ok(())
    }
}

/// `num / (n - 2)^den_pow`, with `den_pow` minimal.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Coeff {
    num: Poly,
    den_pow: u32,
}

impl Coeff {
    pub fn zero() -> Self {
        Coeff {
            num: Poly::zero(),
            den_pow: 0,
        }
    }

    pub fn one() -> Self {
        Self::int(1)
    }

    pub fn int(value: i64) -> Self {
        Self::rational(value, 1)
    }

    pub fn rational(num: i64, den: i64) -> Self {
        Coeff {
            num: Poly::constant(BigRational::new(BigInt::from(num), BigInt::from(den))),
            den_pow: 0,
        }
    }

    pub fn from_big(value: BigRational) -> Self {
        Coeff {
            num: Poly::constant(value),
            den_pow: 0,
        }
    }

    /// The dimension `n`.
    pub fn n() -> Self {
        Coeff {
            num: Poly::var(0),
            den_pow: 0,
        }
    }

    /// The Harnack constant `C`.
    pub fn c() -> Self {
        Coeff {
            num: Poly::var(1),
            den_pow: 0,
        }
    }

    /// The free exponent `β` of the power rule.
    pub fn beta() -> Self {
        Coeff {
            num: Poly::var(2),
            den_pow: 0,
        }
    }

    /// `1 / (n - 2)^k`.
    pub fn inv_n_minus_2(k: u32) -> Self {
        Coeff {
            num: Poly::constant(BigRational::one()),
            den_pow: k,
        }
    }

    /// `n - 2` itself.
    pub fn n_minus_2() -> Self {
        Self::n() - Self::int(2)
    }

    /// `α = n / (n - 2)`.
    pub fn alpha() -> Self {
        Self::n() * Self::inv_n_minus_2(1)
    }

    pub fn is_zero(&self) -> bool {
        self.num.is_zero()
    }

    pub fn numerator(&self) -> &Poly {
        &self.num
    }

    pub fn den_pow(&self) -> u32 {
        self.den_pow
    }

    pub fn pow(&self, k: u32) -> Self {
        (0..k).fold(Self::one(), |acc, _| acc * self.clone())
    }

    /// Evaluate at rational `(n, C, β)`; `None` when `n = 2` hits the pole.
    pub fn eval(&self, n: &BigRational, c: &BigRational, beta: &BigRational) -> Option<BigRational> {
        let den = n - BigRational::from_integer(BigInt::from(2));
        if self.den_pow > 0 && den.is_zero() {
            return None;
        }
        let mut value = self.num.eval([n, c, beta]);
        for _ in 0..self.den_pow {
            value /= &den;
        }
        Some(value)
    }

    fn reduced(mut num: Poly, mut den_pow: u32) -> Self {
        if num.is_zero() {
            return Self::zero();
        }
        while den_pow > 0 {
            match num.div_n_minus_2() {
                Some(q) => {
                    num = q;
                    den_pow -= 1;
                }
                None => break,
            }
        }
        Coeff { num, den_pow }
    }

    fn lifted(&self, den_pow: u32) -> Poly {
        let nm2 = &Poly::var(0) + &Poly::constant(BigRational::from_integer(BigInt::from(-2)));
        let mut num = self.num.clone();
        for _ in self.den_pow..den_pow {
            num = &num * &nm2;
        }
        num
    }
}

impl Add for Coeff {
    type Output = Coeff;
    fn add(self, rhs: Coeff) -> Coeff {
        let k = self.den_pow.max(rhs.den_pow);
        Coeff::reduced(&self.lifted(k) + &rhs.lifted(k), k)
    }
}

impl Sub for Coeff {
    type Output = Coeff;
    fn sub(self, rhs: Coeff) -> Coeff {
        self + (-rhs)
    }
}

impl Neg for Coeff {
    type Output = Coeff;
    fn neg(self) -> Coeff {
        Coeff {
            num: -&self.num,
            den_pow: self.den_pow,
        }
    }
}

impl Mul for Coeff {
    type Output = Coeff;
    fn mul(self, rhs: Coeff) -> Coeff {
        Coeff::reduced(&self.num * &rhs.num, self.den_pow + rhs.den_pow)
    }
}

impl fmt::Display for Coeff {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let simple = self.num.terms.len() == 1;
        match (self.den_pow, simple) {
            (0, _) => write!(f, "{}", self.num),
            (k, true) => {
                write!(f, "{}/(n - 2)", self.num)?;
                if k > 1 {
                    write!(f, "^{k}")?;
                }
                Ok(())
            }
            (k, false) => {
                write!(f, "({})/(n - 2)", self.num)?;
                if k > 1 {
                    write!(f, "^{k}")?;
                }
                Ok(())
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(v: i64) -> BigRational {
        BigRational::from_integer(BigInt::from(v))
    }

    #[test]
    fn alpha_times_n_minus_2_is_n() {
        let lhs = Coeff::alpha() * Coeff::n_minus_2();
        assert_eq!(lhs, Coeff::n());
        assert_eq!(lhs.den_pow(), 0);
    }

    #[test]
    fn alpha_identities() {
        // α - 1 = 2/(n-2), α(α-1) = 2n/(n-2)^2
        let a = Coeff::alpha();
        assert_eq!(a.clone() - Coeff::one(), Coeff::int(2) * Coeff::inv_n_minus_2(1));
        let prod = a.clone() * (a - Coeff::one());
        assert_eq!(prod, Coeff::int(2) * Coeff::n() * Coeff::inv_n_minus_2(2));
    }

    #[test]
    fn reduction_is_canonical() {
        // (n^2 - 4)/(n - 2) = n + 2
        let num = Coeff::n() * Coeff::n() - Coeff::int(4);
        let c = num * Coeff::inv_n_minus_2(1);
        assert_eq!(c, Coeff::n() + Coeff::int(2));
        // C·(n-2)^2/(n-2)^3 = C/(n-2)
        let d = Coeff::c() * Coeff::n_minus_2().pow(2) * Coeff::inv_n_minus_2(3);
        assert_eq!(d, Coeff::c() * Coeff::inv_n_minus_2(1));
    }

    #[test]
    fn eval_matches_rational_arithmetic() {
        let c = Coeff::int(2) * Coeff::n() * Coeff::inv_n_minus_2(2) + Coeff::c() * Coeff::beta();
        let v = c.eval(&q(4), &q(10), &q(3)).unwrap();
        assert_eq!(v, q(2) + q(30));
        assert!(Coeff::alpha().eval(&q(2), &q(0), &q(0)).is_none());
    }

    #[test]
    fn display_is_readable() {
        let c = Coeff::int(-2) * Coeff::n() * Coeff::inv_n_minus_2(1);
        assert_eq!(c.to_string(), "-2·n/(n - 2)");
        assert_eq!(Coeff::zero().to_string(), "0");
    }
}
