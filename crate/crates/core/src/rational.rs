//! Exact rational arithmetic: helpers around `BigRational` and a small dense
//! polynomial type used for polynomials in `tau` and in `s` over `Q[tau]`.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

pub type Rational = BigRational;

/// `num / den` as an exact rational.
pub fn rat(num: i64, den: i64) -> Rational {
    Rational::new(BigInt::from(num), BigInt::from(den))
}

pub fn int(v: i64) -> Rational {
    Rational::from_integer(BigInt::from(v))
}

/// `2^-k` exactly.
pub fn dyadic_unit(k: u32) -> Rational {
    Rational::new(BigInt::one(), BigInt::one() << k as usize)
}

pub fn to_f64(r: &Rational) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

/// `p/q` (or `p` for integers).
pub fn fraction_string(r: &Rational) -> String {
    if r.denom().is_one() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

/// True when the decimal expansion of `r` terminates.
pub fn is_terminating(r: &Rational) -> bool {
    let mut d = r.denom().clone();
    let two = BigInt::from(2);
    let five = BigInt::from(5);
    while d.is_even() {
        d /= &two;
    }
    while (&d % &five).is_zero() {
        d /= &five;
    }
    d.is_one()
}

/// Decimal expansion of `r`. Exact when the expansion terminates, otherwise
/// truncated toward zero after `max_frac_digits` digits and suffixed by `...`.
pub fn decimal_string(r: &Rational, max_frac_digits: usize) -> String {
    let neg = r.is_negative();
    let a = r.abs();
    let (ip, mut rem) = a.numer().div_rem(a.denom());
    let den = a.denom().clone();
    let mut out = String::new();
    if neg {
        out.push('-');
    }
    out.push_str(&ip.to_string());
    if rem.is_zero() {
        return out;
    }
    out.push('.');
    let ten = BigInt::from(10);
    let mut digits = 0;
    while !rem.is_zero() && digits < max_frac_digits {
        rem *= &ten;
        let (d, r2) = rem.div_rem(&den);
        out.push_str(&d.to_string());
        rem = r2;
        digits += 1;
    }
    if !rem.is_zero() {
        out.push_str("...");
    }
    out
}

/// Exact decimal string of a dyadic rational (always terminating).
pub fn exact_decimal(r: &Rational) -> String {
    debug_assert!(is_terminating(r));
    decimal_string(r, usize::MAX)
}

/// Ring operations needed for polynomial coefficients.
pub trait Coeff:
    Clone
    + PartialEq
    + fmt::Debug
    + Zero
    + One
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Neg<Output = Self>
{
    fn from_int(v: i64) -> Self;
}

impl Coeff for Rational {
    fn from_int(v: i64) -> Self {
        int(v)
    }
}

/// Dense univariate polynomial, coefficients stored from degree 0 upward.
/// Trailing zero coefficients are always trimmed.
#[derive(Clone, Debug, PartialEq)]
pub struct Poly<C: Coeff> {
    coeffs: Vec<C>,
}

pub type TauPoly = Poly<Rational>;
pub type SPoly = Poly<TauPoly>;

impl<C: Coeff> Poly<C> {
    pub fn new(mut coeffs: Vec<C>) -> Self {
        while coeffs.last().is_some_and(|c| c.is_zero()) {
            coeffs.pop();
        }
        Poly { coeffs }
    }

    pub fn constant(c: C) -> Self {
        Self::new(vec![c])
    }

    pub fn monomial(c: C, k: usize) -> Self {
        let mut v = vec![C::zero(); k + 1];
        v[k] = c;
        Self::new(v)
    }

    /// The polynomial `x`.
    pub fn var() -> Self {
        Self::monomial(C::one(), 1)
    }

    /// `None` for the zero polynomial.
    pub fn degree(&self) -> Option<usize> {
        self.coeffs.len().checked_sub(1)
    }

    pub fn coeff(&self, k: usize) -> C {
        self.coeffs.get(k).cloned().unwrap_or_else(C::zero)
    }

    pub fn coeffs(&self) -> &[C] {
        &self.coeffs
    }

    pub fn eval(&self, x: &C) -> C {
        let mut acc = C::zero();
        for c in self.coeffs.iter().rev() {
            acc = acc * x.clone() + c.clone();
        }
        acc
    }

    pub fn derivative(&self) -> Self {
        let v = self
            .coeffs
            .iter()
            .enumerate()
            .skip(1)
            .map(|(k, c)| c.clone() * C::from_int(k as i64))
            .collect();
        Self::new(v)
    }

    pub fn scale(&self, c: &C) -> Self {
        Self::new(self.coeffs.iter().map(|a| a.clone() * c.clone()).collect())
    }

    pub fn pow(&self, e: u32) -> Self {
        let mut acc = Self::one();
        for _ in 0..e {
            acc = acc * self.clone();
        }
        acc
    }

    /// Applies `g` to every coefficient.
    pub fn map<D: Coeff>(&self, g: impl Fn(&C) -> D) -> Poly<D> {
        Poly::new(self.coeffs.iter().map(g).collect())
    }
}

impl<C: Coeff> Add for Poly<C> {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        let len = self.coeffs.len().max(rhs.coeffs.len());
        Self::new((0..len).map(|k| self.coeff(k) + rhs.coeff(k)).collect())
    }
}

impl<C: Coeff> Sub for Poly<C> {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        let len = self.coeffs.len().max(rhs.coeffs.len());
        Self::new((0..len).map(|k| self.coeff(k) - rhs.coeff(k)).collect())
    }
}

impl<C: Coeff> Neg for Poly<C> {
    type Output = Self;
    fn neg(self) -> Self {
        Self::new(self.coeffs.into_iter().map(|c| -c).collect())
    }
}

impl<C: Coeff> Mul for Poly<C> {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        if self.coeffs.is_empty() || rhs.coeffs.is_empty() {
            return Self::zero();
        }
        let mut v = vec![C::zero(); self.coeffs.len() + rhs.coeffs.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            for (j, b) in rhs.coeffs.iter().enumerate() {
                v[i + j] = v[i + j].clone() + a.clone() * b.clone();
            }
        }
        Self::new(v)
    }
}

impl<C: Coeff> Zero for Poly<C> {
    fn zero() -> Self {
        Poly { coeffs: Vec::new() }
    }
    fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }
}

impl<C: Coeff> One for Poly<C> {
    fn one() -> Self {
        Self::constant(C::one())
    }
}

impl<C: Coeff> Coeff for Poly<C> {
    fn from_int(v: i64) -> Self {
        Self::constant(C::from_int(v))
    }
}

impl TauPoly {
    pub fn eval_f64(&self, x: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, c| acc * x + to_f64(c))
    }
}

impl SPoly {
    /// Substitutes a value for `tau` in every coefficient.
    pub fn at_tau(&self, tau: &Rational) -> Poly<Rational> {
        self.map(|c| c.eval(tau))
    }

    /// Floating-point coefficients in `s` after substituting `tau`.
    pub fn coeffs_f64(&self, tau: f64) -> Vec<f64> {
        self.coeffs.iter().map(|c| c.eval_f64(tau)).collect()
    }
}

impl fmt::Display for TauPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.coeffs.is_empty() {
            return write!(f, "0");
        }
        let mut first = true;
        for (k, c) in self.coeffs.iter().enumerate().rev() {
            if c.is_zero() {
                continue;
            }
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            match k {
                0 => write!(f, "{}", fraction_string(c))?,
                1 => write!(f, "({}) tau", fraction_string(c))?,
                _ => write!(f, "({}) tau^{}", fraction_string(c), k)?,
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decimal_strings() {
        assert_eq!(decimal_string(&rat(-7, 4), 10), "-1.75");
        assert_eq!(decimal_string(&rat(1, 3), 5), "0.33333...");
        assert_eq!(exact_decimal(&dyadic_unit(3)), "0.125");
        assert!(is_terminating(&rat(3, 40)));
        assert!(!is_terminating(&rat(1, 6)));
        assert_eq!(fraction_string(&rat(6, 4)), "3/2");
    }

    #[test]
    fn poly_arith() {
        let x = TauPoly::var();
        let p = (x.clone() + TauPoly::constant(int(1))).pow(3);
        assert_eq!(p.coeffs(), &[int(1), int(3), int(3), int(1)]);
        assert_eq!(p.derivative().coeffs(), &[int(3), int(6), int(3)]);
        assert_eq!(p.eval(&int(2)), int(27));
        let z = p.clone() - p;
        assert!(z.is_zero());
        assert_eq!(z.degree(), None);
    }

    #[test]
    fn nested_poly() {
        let tau = TauPoly::var();
        let s = SPoly::var();
        let f = SPoly::constant(tau) + s.scale(&TauPoly::from_int(5));
        let sq = f.clone() * f;
        assert_eq!(sq.coeff(0).coeff(2), int(1));
        assert_eq!(sq.coeff(1).coeff(1), int(10));
        assert_eq!(sq.coeff(2).coeff(0), int(25));
        assert_eq!(sq.at_tau(&int(1)).eval(&int(1)), int(36));
    }
}
