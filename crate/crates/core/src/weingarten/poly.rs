//! Exact univariate rational functions with integer coefficients.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};

/// Integer polynomial, coefficients from the constant term upward, with no
/// trailing zeros.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct Poly(Vec<i128>);

fn gcd_i128(mut a: i128, mut b: i128) -> i128 {
    a = a.abs();
    b = b.abs();
    while b != 0 {
        let r = a % b;
        a = b;
        b = r;
    }
    a
}

impl Poly {
    pub fn new(mut coeffs: Vec<i128>) -> Self {
        while coeffs.last() == Some(&0) {
            coeffs.pop();
        }
        Poly(coeffs)
    }

    pub fn zero() -> Self {
        Poly(Vec::new())
    }

    pub fn constant(c: i128) -> Self {
        Poly::new(vec![c])
    }

    /// The monomial `c x^k`.
    pub fn monomial(c: i128, k: usize) -> Self {
        let mut v = vec![0; k + 1];
        v[k] = c;
        Poly::new(v)
    }

    /// `x - r`.
    pub fn linear_root(r: i128) -> Self {
        Poly::new(vec![-r, 1])
    }

    pub fn coeffs(&self) -> &[i128] {
        &self.0
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_empty()
    }

    pub fn degree(&self) -> Option<usize> {
        self.0.len().checked_sub(1)
    }

    pub fn leading(&self) -> i128 {
        self.0.last().copied().unwrap_or(0)
    }

    pub fn content(&self) -> i128 {
        self.0.iter().fold(0, |g, &c| gcd_i128(g, c))
    }

    pub fn scale(&self, c: i128) -> Poly {
        Poly::new(self.0.iter().map(|&a| a * c).collect())
    }

    fn div_scalar(&self, c: i128) -> Poly {
        Poly::new(self.0.iter().map(|&a| a / c).collect())
    }

    /// Primitive part with positive leading coefficient.
    pub fn primitive(&self) -> Poly {
        if self.is_zero() {
            return Poly::zero();
        }
        let c = self.content() * self.leading().signum();
        self.div_scalar(c)
    }

    pub fn pow(&self, k: u32) -> Poly {
        (0..k).fold(Poly::constant(1), |acc, _| &acc * self)
    }

    fn pseudo_rem(&self, other: &Poly) -> Poly {
        let d = other.degree().expect("division by zero polynomial");
        let lc = other.leading();
        let mut r = self.clone();
        while let Some(dr) = r.degree() {
            if dr < d {
                break;
            }
            let lr = r.leading();
            let shifted = Poly::monomial(lr, dr - d);
            r = &r.scale(lc) - &(&shifted * other);
            let c = r.content();
            if c > 1 {
                r = r.div_scalar(c);
            }
        }
        r
    }

    /// Greatest common divisor, primitive with positive leading coefficient.
    pub fn gcd(&self, other: &Poly) -> Poly {
        let mut a = self.primitive();
        let mut b = other.primitive();
        while !b.is_zero() {
            let r = a.pseudo_rem(&b);
            a = b;
            b = r.primitive();
        }
        a
    }

    /// Exact quotient `self / other`; panics if the division is not exact in `Z[x]`.
    pub fn div_exact(&self, other: &Poly) -> Poly {
        let d = other.degree().expect("division by zero polynomial");
        let lc = other.leading();
        let mut r = self.clone();
        let mut q = vec![0i128; self.0.len().saturating_sub(d).max(1)];
        while let Some(dr) = r.degree() {
            if dr < d {
                break;
            }
            let lr = r.leading();
            assert!(lr % lc == 0, "inexact polynomial division");
            let c = lr / lc;
            q[dr - d] = c;
            r = &r - &(&Poly::monomial(c, dr - d) * other);
        }
        assert!(r.is_zero(), "inexact polynomial division");
        Poly::new(q)
    }

    pub fn eval_f64(&self, x: f64) -> f64 {
        self.0.iter().rev().fold(0.0, |acc, &c| acc * x + c as f64)
    }

    pub fn eval_big(&self, x: &BigInt) -> BigInt {
        self.0.iter().rev().fold(BigInt::zero(), |acc, &c| acc * x + BigInt::from(c))
    }

    pub fn fmt_in(&self, var: &str) -> String {
        if self.is_zero() {
            return "0".to_string();
        }
        let mut out = String::new();
        for (k, &c) in self.0.iter().enumerate().rev() {
            if c == 0 {
                continue;
            }
            let mag = c.abs();
            if out.is_empty() {
                if c < 0 {
                    out.push('-');
                }
            } else {
                out.push_str(if c < 0 { " - " } else { " + " });
            }
            let body = match k {
                0 => mag.to_string(),
                1 => var.to_string(),
                _ => format!("{var}^{k}"),
            };
            if mag != 1 && k > 0 {
                out.push_str(&format!("{mag}*{body}"));
            } else {
                out.push_str(&body);
            }
        }
        out
    }

    fn term_count(&self) -> usize {
        self.0.iter().filter(|&&c| c != 0).count()
    }
}

impl Add for &Poly {
    type Output = Poly;
    fn add(self, o: &Poly) -> Poly {
        let n = self.0.len().max(o.0.len());
        Poly::new((0..n).map(|i| self.0.get(i).unwrap_or(&0) + o.0.get(i).unwrap_or(&0)).collect())
    }
}

impl Sub for &Poly {
    type Output = Poly;
    fn sub(self, o: &Poly) -> Poly {
        let n = self.0.len().max(o.0.len());
        Poly::new((0..n).map(|i| self.0.get(i).unwrap_or(&0) - o.0.get(i).unwrap_or(&0)).collect())
    }
}

impl Mul for &Poly {
    type Output = Poly;
    fn mul(self, o: &Poly) -> Poly {
        if self.is_zero() || o.is_zero() {
            return Poly::zero();
        }
        let mut v = vec![0i128; self.0.len() + o.0.len() - 1];
        for (i, &a) in self.0.iter().enumerate() {
            for (j, &b) in o.0.iter().enumerate() {
                v[i + j] += a * b;
            }
        }
        Poly::new(v)
    }
}

impl Neg for &Poly {
    type Output = Poly;
    fn neg(self) -> Poly {
        self.scale(-1)
    }
}

/// Ratio of integer polynomials in one dimension symbol, kept in canonical
/// form: coprime numerator and denominator, no common integer content, and a
/// positive leading coefficient in the denominator.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SymbolicRational {
    num: Poly,
    den: Poly,
}

impl SymbolicRational {
    pub fn new(num: Poly, den: Poly) -> Self {
        assert!(!den.is_zero(), "zero denominator");
        if num.is_zero() {
            return Self::zero();
        }
        let g = num.gcd(&den);
        let (mut n, mut d) = if g.degree().unwrap_or(0) > 0 { (num.div_exact(&g), den.div_exact(&g)) } else { (num, den) };
        let c = gcd_i128(n.content(), d.content()) * d.leading().signum();
        if c != 1 {
            n = n.div_scalar(c);
            d = d.div_scalar(c);
        }
        Self { num: n, den: d }
    }

    pub fn zero() -> Self {
        Self { num: Poly::zero(), den: Poly::constant(1) }
    }

    pub fn one() -> Self {
        Self::constant(1)
    }

    pub fn constant(c: i128) -> Self {
        Self { num: Poly::constant(c), den: Poly::constant(1) }
    }

    pub fn from_poly(p: Poly) -> Self {
        Self::new(p, Poly::constant(1))
    }

    /// The symbol itself raised to `k`.
    pub fn symbol_pow(k: usize) -> Self {
        Self::from_poly(Poly::monomial(1, k))
    }

    /// `num / prod(x - r)` over the listed roots.
    pub(crate) fn from_roots(num: Poly, roots: &[i128]) -> Self {
        let den = roots.iter().fold(Poly::constant(1), |acc, &r| &acc * &Poly::linear_root(r));
        Self::new(num, den)
    }

    pub fn numerator(&self) -> &Poly {
        &self.num
    }

    pub fn denominator(&self) -> &Poly {
        &self.den
    }

    pub fn is_zero(&self) -> bool {
        self.num.is_zero()
    }

    pub fn recip(&self) -> Self {
        Self::new(self.den.clone(), self.num.clone())
    }

    /// Exact value at an integer dimension.
    pub fn eval_exact(&self, x: i64) -> Result<BigRational> {
        let bx = BigInt::from(x);
        let d = self.den.eval_big(&bx);
        if d.is_zero() {
            return Err(Error::SingularDimension(format!("denominator {} vanishes at {x}", self.den.fmt_in("L"))));
        }
        Ok(BigRational::new(self.num.eval_big(&bx), d))
    }

    /// Floating-point value at a dimension; exact rational arithmetic is used
    /// for integer arguments so large cancellations stay harmless.
    pub fn eval_f64(&self, x: f64) -> Result<f64> {
        if x.fract() == 0.0 && x.abs() < 9.0e15 {
            let r = self.eval_exact(x as i64)?;
            return Ok(ratio_to_f64(&r));
        }
        let d = self.den.eval_f64(x);
        if d == 0.0 {
            return Err(Error::SingularDimension(format!("denominator vanishes at {x}")));
        }
        Ok(self.num.eval_f64(x) / d)
    }

    pub fn fmt_in(&self, var: &str) -> String {
        let wrap = |p: &Poly| {
            let s = p.fmt_in(var);
            if p.term_count() > 1 { format!("({s})") } else { s }
        };
        if self.den == Poly::constant(1) {
            return self.num.fmt_in(var);
        }
        let n = if self.num.term_count() > 1 { format!("({})", self.num.fmt_in(var)) } else { self.num.fmt_in(var) };
        format!("{n}/{}", wrap(&self.den))
    }
}

pub(crate) fn ratio_to_f64(r: &BigRational) -> f64 {
    match (r.numer().to_f64(), r.denom().to_f64()) {
        (Some(n), Some(d)) if n.is_finite() && d.is_finite() => n / d,
        _ => {
            // scale down both sides before converting
            let bits = r.numer().bits().max(r.denom().bits()).saturating_sub(1000);
            let n = (r.numer() >> bits).to_f64().unwrap_or(f64::NAN);
            let d = (r.denom() >> bits).to_f64().unwrap_or(f64::NAN);
            if r.is_negative() && n > 0.0 { -n / d } else { n / d }
        }
    }
}

impl Add for &SymbolicRational {
    type Output = SymbolicRational;
    fn add(self, o: &SymbolicRational) -> SymbolicRational {
        if self.is_zero() {
            return o.clone();
        }
        if o.is_zero() {
            return self.clone();
        }
        let num = &(&self.num * &o.den) + &(&o.num * &self.den);
        SymbolicRational::new(num, &self.den * &o.den)
    }
}

impl Sub for &SymbolicRational {
    type Output = SymbolicRational;
    fn sub(self, o: &SymbolicRational) -> SymbolicRational {
        self + &(-o)
    }
}

impl Mul for &SymbolicRational {
    type Output = SymbolicRational;
    fn mul(self, o: &SymbolicRational) -> SymbolicRational {
        SymbolicRational::new(&self.num * &o.num, &self.den * &o.den)
    }
}

impl Neg for &SymbolicRational {
    type Output = SymbolicRational;
    fn neg(self) -> SymbolicRational {
        SymbolicRational { num: -&self.num, den: self.den.clone() }
    }
}

impl fmt::Display for SymbolicRational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.fmt_in("L"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(v: &[i128]) -> Poly {
        Poly::new(v.to_vec())
    }

    #[test]
    fn gcd_and_canonical_form() {
        // (x-1)(x+2) and (x-1)(x-3)
        let a = &p(&[-1, 1]) * &p(&[2, 1]);
        let b = &p(&[-1, 1]) * &p(&[-3, 1]);
        assert_eq!(a.gcd(&b), p(&[-1, 1]));
        let r = SymbolicRational::new(a.scale(6), b.scale(-4));
        assert_eq!(r.numerator(), &p(&[-6, -3]));
        assert_eq!(r.denominator(), &p(&[-6, 2]));
    }

    #[test]
    fn arithmetic() {
        let x = SymbolicRational::symbol_pow(1);
        let inv = x.recip();
        let sum = &x + &inv; // (x^2+1)/x
        assert_eq!(sum.fmt_in("L"), "(L^2 + 1)/L");
        let diff = &sum - &inv;
        assert_eq!(diff, x);
        assert_eq!(sum.eval_exact(2).unwrap(), BigRational::new(5.into(), 2.into()));
        assert!(matches!(inv.eval_exact(0), Err(Error::SingularDimension(_))));
        assert!((sum.eval_f64(0.5).unwrap() - 2.5).abs() < 1e-15);
    }

    #[test]
    fn formatting() {
        let r = SymbolicRational::new(Poly::constant(-1), p(&[0, -1, 0, 1]));
        assert_eq!(r.to_string(), "-1/(L^3 - L)");
        assert_eq!(SymbolicRational::zero().to_string(), "0");
        assert_eq!(SymbolicRational::new(p(&[0, 0, 3]), Poly::constant(1)).to_string(), "3*L^2");
    }
}
