use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Monic polynomial with integer coefficients, constant term first.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Deserialize)]
#[serde(try_from = "Vec<i64>")]
pub struct IntPolynomial {
    coeffs: Vec<BigInt>,
}

impl TryFrom<Vec<i64>> for IntPolynomial {
    type Error = Error;
    fn try_from(c: Vec<i64>) -> Result<Self> {
        IntPolynomial::new(c.into_iter().map(BigInt::from).collect())
    }
}

impl Serialize for IntPolynomial {
    /// Coefficients that fit in i64 are emitted as JSON numbers, larger ones as strings.
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        use serde::ser::SerializeSeq;
        let mut seq = s.serialize_seq(Some(self.coeffs.len()))?;
        for c in &self.coeffs {
            match c.to_i64() {
                Some(v) => seq.serialize_element(&v)?,
                None => seq.serialize_element(&c.to_string())?,
            }
        }
        seq.end()
    }
}

impl fmt::Display for IntPolynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (i, c) in self.coeffs.iter().enumerate().rev() {
            if c.is_zero() {
                continue;
            }
            let sign = if c.is_negative() {
                "-"
            } else if first {
                ""
            } else {
                "+"
            };
            let mag = c.abs();
            let coef = if mag.is_one() && i > 0 { String::new() } else { mag.to_string() };
            let var = match i {
                0 => String::new(),
                1 => "x".to_string(),
                _ => format!("x^{i}"),
            };
            write!(f, "{sign}{coef}{var}")?;
            first = false;
        }
        if first {
            write!(f, "0")?;
        }
        Ok(())
    }
}

impl IntPolynomial {
    /// Trailing zero high-order coefficients are trimmed; the result must be monic.
    pub fn new(mut coeffs: Vec<BigInt>) -> Result<Self> {
        while coeffs.len() > 1 && coeffs.last().is_some_and(|c| c.is_zero()) {
            coeffs.pop();
        }
        if coeffs.is_empty() || !coeffs.last().unwrap().is_one() {
            return Err(Error::InvalidInput("polynomial must be monic".into()));
        }
        Ok(IntPolynomial { coeffs })
    }

    pub fn from_i64(c: &[i64]) -> Result<Self> {
        IntPolynomial::new(c.iter().map(|&x| BigInt::from(x)).collect())
    }

    pub(crate) fn from_big_unchecked(coeffs: Vec<BigInt>) -> Self {
        debug_assert!(coeffs.last().is_some_and(|c| c.is_one()));
        IntPolynomial { coeffs }
    }

    pub fn one() -> Self {
        IntPolynomial { coeffs: vec![BigInt::one()] }
    }

    /// x − a.
    pub fn linear(a: i64) -> Self {
        IntPolynomial { coeffs: vec![BigInt::from(-a), BigInt::one()] }
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn coeffs(&self) -> &[BigInt] {
        &self.coeffs
    }

    pub fn coeff(&self, i: usize) -> BigInt {
        self.coeffs.get(i).cloned().unwrap_or_default()
    }

    /// Coefficients as i64; panics on overflow, intended for small test polynomials.
    pub fn to_i64(&self) -> Vec<i64> {
        self.coeffs.iter().map(|c| c.to_i64().expect("coefficient fits i64")).collect()
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.coeffs.iter().map(|c| c.to_f64().unwrap_or(f64::NAN)).collect()
    }

    pub fn mul(&self, other: &IntPolynomial) -> IntPolynomial {
        let mut out = vec![BigInt::zero(); self.coeffs.len() + other.coeffs.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            if a.is_zero() {
                continue;
            }
            for (j, b) in other.coeffs.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        IntPolynomial { coeffs: out }
    }

    pub fn pow(&self, k: u32) -> IntPolynomial {
        (0..k).fold(IntPolynomial::one(), |acc, _| acc.mul(self))
    }

    /// Division by a monic divisor; quotient and remainder are integral and
    /// returned as raw coefficient vectors (the remainder trimmed of zeros).
    pub fn div_rem(&self, divisor: &IntPolynomial) -> (Vec<BigInt>, Vec<BigInt>) {
        let n = self.degree();
        let m = divisor.degree();
        if n < m {
            return (vec![BigInt::zero()], self.coeffs.clone());
        }
        let mut rem = self.coeffs.clone();
        let mut q = vec![BigInt::zero(); n - m + 1];
        for k in (0..=n - m).rev() {
            let c = rem[k + m].clone();
            if c.is_zero() {
                continue;
            }
            for (j, dj) in divisor.coeffs.iter().enumerate() {
                rem[k + j] -= &c * dj;
            }
            q[k] = c;
        }
        rem.truncate(m);
        while rem.last().is_some_and(|c| c.is_zero()) {
            rem.pop();
        }
        (q, rem)
    }

    /// Exact quotient when `divisor` divides `self`.
    pub fn exact_div(&self, divisor: &IntPolynomial) -> Option<IntPolynomial> {
        let (q, r) = self.div_rem(divisor);
        if r.is_empty() && self.degree() >= divisor.degree() {
            Some(IntPolynomial { coeffs: q })
        } else {
            None
        }
    }

    pub fn divides(&self, other: &IntPolynomial) -> bool {
        other.exact_div(self).is_some()
    }

    /// x^d p(1/x) = ±p(x): the root set is closed under inversion.
    pub fn is_palindromic(&self) -> bool {
        let n = self.coeffs.len();
        let c0 = &self.coeffs[0];
        if c0.is_zero() {
            return false;
        }
        let rev_eq = |s: &BigInt| (0..n).all(|i| self.coeffs[i] == s * &self.coeffs[n - 1 - i]);
        rev_eq(&BigInt::one()) || rev_eq(&-BigInt::one())
    }

    pub fn eval_f64(&self, x: f64) -> f64 {
        self.to_f64().iter().rev().fold(0.0, |acc, &c| acc * x + c)
    }

    pub(crate) fn to_rational(&self) -> Vec<BigRational> {
        self.coeffs.iter().map(|c| BigRational::from_integer(c.clone())).collect()
    }

    /// Monic rational polynomial with integer coefficients converted back.
    pub(crate) fn from_rational(c: &[BigRational]) -> Option<IntPolynomial> {
        let lead = c.last()?.clone();
        let coeffs: Option<Vec<BigInt>> = c
            .iter()
            .map(|x| {
                let y = x / &lead;
                if y.is_integer() {
                    Some(y.to_integer())
                } else {
                    None
                }
            })
            .collect();
        IntPolynomial::new(coeffs?).ok()
    }

    /// Yun's square-free decomposition: returns (a_i, i) with p = Π a_i^i and
    /// every a_i square-free and pairwise coprime.
    pub fn square_free_decomposition(&self) -> Vec<(IntPolynomial, u32)> {
        let p = self.to_rational();
        let dp = rderiv(&p);
        let mut out = Vec::new();
        if dp.is_empty() {
            return out;
        }
        let a0 = rgcd(&p, &dp);
        let mut b = rdiv_exact(&p, &a0);
        let mut c = rdiv_exact(&dp, &a0);
        let mut dd = rsub(&c, &rderiv(&b));
        let mut i = 1;
        loop {
            let a = rgcd(&b, &dd);
            if let Some(ai) = IntPolynomial::from_rational(&a) {
                if ai.degree() > 0 {
                    out.push((ai, i));
                }
            }
            b = rdiv_exact(&b, &a);
            if b.len() <= 1 {
                break;
            }
            c = rdiv_exact(&dd, &a);
            dd = rsub(&c, &rderiv(&b));
            i += 1;
        }
        out
    }
}

fn rtrim(mut v: Vec<BigRational>) -> Vec<BigRational> {
    while v.last().is_some_and(|c| c.is_zero()) {
        v.pop();
    }
    v
}

fn rderiv(p: &[BigRational]) -> Vec<BigRational> {
    rtrim(p.iter().enumerate().skip(1).map(|(i, c)| c * BigRational::from_integer(BigInt::from(i))).collect())
}

fn rsub(a: &[BigRational], b: &[BigRational]) -> Vec<BigRational> {
    let n = a.len().max(b.len());
    rtrim(
        (0..n)
            .map(|i| a.get(i).cloned().unwrap_or_else(BigRational::zero) - b.get(i).cloned().unwrap_or_else(BigRational::zero))
            .collect(),
    )
}

fn rdivrem(a: &[BigRational], b: &[BigRational]) -> (Vec<BigRational>, Vec<BigRational>) {
    let b = rtrim(b.to_vec());
    let mut r = rtrim(a.to_vec());
    if r.len() < b.len() {
        return (Vec::new(), r);
    }
    let lead = b.last().unwrap().clone();
    let mut q = vec![BigRational::zero(); r.len() - b.len() + 1];
    while r.len() >= b.len() && !r.is_empty() {
        let k = r.len() - b.len();
        let c = r.last().unwrap() / &lead;
        for (j, bj) in b.iter().enumerate() {
            r[k + j] -= &c * bj;
        }
        q[k] = c;
        r.pop();
        r = rtrim(r);
    }
    (rtrim(q), r)
}

fn rdiv_exact(a: &[BigRational], b: &[BigRational]) -> Vec<BigRational> {
    let (q, r) = rdivrem(a, b);
    debug_assert!(r.is_empty());
    q
}

/// Monic gcd over Q.
fn rgcd(a: &[BigRational], b: &[BigRational]) -> Vec<BigRational> {
    let mut x = rtrim(a.to_vec());
    let mut y = rtrim(b.to_vec());
    while !y.is_empty() {
        let (_, r) = rdivrem(&x, &y);
        x = y;
        y = r;
    }
    if let Some(l) = x.last().cloned() {
        x.iter_mut().for_each(|c| *c = &*c / &l);
    }
    x
}
