//! Complex roots of integer polynomials in binary fixed point of adjustable
//! precision. Roots are seeded by an f64 Aberth–Ehrlich iteration and then
//! polished by Newton steps carried out on big integers scaled by 2^bits.

use num_bigint::BigInt;
use num_complex::Complex64;
use num_traits::{Float, Signed, ToPrimitive, Zero};

use super::poly::IntPolynomial;

/// Complex number x = (re + i·im) / 2^bits.
#[derive(Debug, Clone, PartialEq)]
pub struct FixedComplex {
    pub re: BigInt,
    pub im: BigInt,
    pub bits: u32,
}

pub(crate) fn fixed_from_f64(x: f64, bits: u32) -> BigInt {
    if x == 0.0 || !x.is_finite() {
        return BigInt::zero();
    }
    let (mant, exp, sign) = x.integer_decode();
    let m = BigInt::from(mant) * BigInt::from(sign);
    let shift = exp as i64 + bits as i64;
    if shift >= 0 {
        m << shift as usize
    } else {
        m >> (-shift) as usize
    }
}

pub(crate) fn fixed_to_f64(v: &BigInt, bits: u32) -> f64 {
    let nb = v.bits() as i64;
    let shift = (nb - 60).max(0);
    let mant = (v >> shift as usize).to_f64().unwrap_or(0.0);
    let e = shift - bits as i64;
    if e < -1000 {
        mant * 2f64.powi(-1000) * 2f64.powi((e + 1000) as i32)
    } else {
        mant * 2f64.powi(e as i32)
    }
}

impl FixedComplex {
    pub fn zero(bits: u32) -> Self {
        FixedComplex { re: BigInt::zero(), im: BigInt::zero(), bits }
    }

    pub fn from_c64(z: Complex64, bits: u32) -> Self {
        FixedComplex { re: fixed_from_f64(z.re, bits), im: fixed_from_f64(z.im, bits), bits }
    }

    pub fn from_int(c: &BigInt, bits: u32) -> Self {
        FixedComplex { re: c << bits as usize, im: BigInt::zero(), bits }
    }

    pub fn to_c64(&self) -> Complex64 {
        Complex64::new(fixed_to_f64(&self.re, self.bits), fixed_to_f64(&self.im, self.bits))
    }

    pub fn add(&self, o: &Self) -> Self {
        FixedComplex { re: &self.re + &o.re, im: &self.im + &o.im, bits: self.bits }
    }

    pub fn sub(&self, o: &Self) -> Self {
        FixedComplex { re: &self.re - &o.re, im: &self.im - &o.im, bits: self.bits }
    }

    pub fn mul(&self, o: &Self) -> Self {
        let b = self.bits as usize;
        FixedComplex {
            re: (&self.re * &o.re - &self.im * &o.im) >> b,
            im: (&self.re * &o.im + &self.im * &o.re) >> b,
            bits: self.bits,
        }
    }

    /// Returns None when the divisor is exactly zero at this precision.
    pub fn div(&self, o: &Self) -> Option<Self> {
        let den = &o.re * &o.re + &o.im * &o.im;
        if den.is_zero() {
            return None;
        }
        let b = self.bits as usize;
        let nre = &self.re * &o.re + &self.im * &o.im;
        let nim = &self.im * &o.re - &self.re * &o.im;
        Some(FixedComplex { re: (nre << b) / &den, im: (nim << b) / &den, bits: self.bits })
    }

    /// |z| scaled by 2^bits, rounded down.
    pub fn modulus_fixed(&self) -> BigInt {
        (&self.re * &self.re + &self.im * &self.im).sqrt()
    }

    pub fn abs_f64(&self) -> f64 {
        fixed_to_f64(&self.modulus_fixed(), self.bits)
    }
}

/// A root with an inclusion radius: some root of p lies within `radius` of `z`.
#[derive(Debug, Clone)]
pub struct PolishedRoot {
    pub z: FixedComplex,
    pub radius: f64,
}

fn horner_with_derivative(p: &IntPolynomial, z: &FixedComplex) -> (FixedComplex, FixedComplex) {
    let bits = z.bits;
    let mut val = FixedComplex::zero(bits);
    let mut der = FixedComplex::zero(bits);
    for c in p.coeffs().iter().rev() {
        der = der.mul(z).add(&val);
        val = val.mul(z).add(&FixedComplex::from_int(c, bits));
    }
    (val, der)
}

/// f64 Aberth–Ehrlich simultaneous iteration.
pub fn aberth_f64(p: &IntPolynomial) -> Vec<Complex64> {
    let n = p.degree();
    if n == 0 {
        return Vec::new();
    }
    let c = p.to_f64();
    let cauchy = 1.0 + c[..n].iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let mean = -c[n - 1] / n as f64;
    let r0 = cauchy
        .min(2.0 * c[..n].iter().enumerate().map(|(i, x)| x.abs().powf(1.0 / (n - i) as f64)).fold(0.0, f64::max))
        .max(1e-3);
    let mut z: Vec<Complex64> = (0..n)
        .map(|k| {
            let th = 2.0 * std::f64::consts::PI * (k as f64 + 0.25) / n as f64 + 0.4;
            Complex64::new(mean, 0.0) + Complex64::from_polar(r0, th)
        })
        .collect();
    let eval = |x: Complex64| {
        let mut v = Complex64::new(0.0, 0.0);
        let mut d = Complex64::new(0.0, 0.0);
        for &ci in c.iter().rev() {
            d = d * x + v;
            v = v * x + ci;
        }
        (v, d)
    };
    for _ in 0..1000 {
        let mut max_step: f64 = 0.0;
        for i in 0..n {
            let (v, d) = eval(z[i]);
            if v.norm() == 0.0 {
                continue;
            }
            let ratio = v / d;
            let s: Complex64 = (0..n).filter(|&j| j != i).map(|j| 1.0 / (z[i] - z[j])).sum();
            let w = ratio / (Complex64::new(1.0, 0.0) - ratio * s);
            if w.is_finite() {
                z[i] -= w;
                max_step = max_step.max(w.norm() / (1.0 + z[i].norm()));
            }
        }
        if max_step < 1e-15 {
            break;
        }
    }
    z
}

/// Roots of a square-free polynomial at `bits` of fixed-point precision.
///
/// Returns None if Newton polishing fails to reach the precision or the
/// inclusion disks are not pairwise disjoint (roots not separated).
pub fn polished_roots(p: &IntPolynomial, bits: u32) -> Option<Vec<PolishedRoot>> {
    let n = p.degree();
    let seeds = aberth_f64(p);
    let tiny = 2f64.powi(-(bits as i32) + 8);
    let mut out = Vec::with_capacity(n);
    for s in seeds {
        let mut z = FixedComplex::from_c64(s, bits);
        for _ in 0..200 {
            let (v, d) = horner_with_derivative(p, &z);
            let step = v.div(&d)?;
            let sabs = step.abs_f64();
            z = z.sub(&step);
            if sabs <= tiny * (1.0 + z.abs_f64()) {
                break;
            }
        }
        let (v, d) = horner_with_derivative(p, &z);
        let newton = v.div(&d)?.abs_f64();
        let radius = (n as f64 * newton).max(2f64.powi(-(bits as i32) + 2) * (1.0 + z.abs_f64()));
        out.push(PolishedRoot { z, radius });
    }
    for i in 0..n {
        for j in i + 1..n {
            let dist = out[i].z.sub(&out[j].z).abs_f64();
            if dist <= out[i].radius + out[j].radius {
                return None;
            }
        }
    }
    Some(out)
}

/// Coefficients of Π (x − z_i) in fixed point, constant term first.
pub fn product_coefficients(roots: &[&FixedComplex], bits: u32) -> Vec<FixedComplex> {
    let one = FixedComplex::from_int(&BigInt::from(1), bits);
    let mut c = vec![one];
    for z in roots {
        let mut next = vec![FixedComplex::zero(bits); c.len() + 1];
        for (k, ck) in c.iter().enumerate() {
            next[k + 1] = next[k + 1].add(ck);
            next[k] = next[k].sub(&ck.mul(z));
        }
        c = next;
    }
    c
}

/// Nearest integer to a fixed-point real and the distance to it (as f64).
pub fn round_fixed(v: &BigInt, bits: u32) -> (BigInt, f64) {
    let half = BigInt::from(1) << (bits as usize - 1);
    let r: BigInt = (v + &half) >> bits as usize;
    let diff = v - (&r << bits as usize);
    (r, fixed_to_f64(&diff.abs(), bits))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(c: &[i64]) -> IntPolynomial {
        IntPolynomial::from_i64(c).unwrap()
    }

    #[test]
    fn golden_ratio_roots_to_high_precision() {
        let r = polished_roots(&p(&[1, -3, 1]), 256).unwrap();
        let mut m: Vec<f64> = r.iter().map(|x| x.z.abs_f64()).collect();
        m.sort_by(f64::total_cmp);
        assert!((m[0] - (3.0 - 5f64.sqrt()) / 2.0).abs() < 1e-15);
        assert!((m[1] - (3.0 + 5f64.sqrt()) / 2.0).abs() < 1e-15);
        assert!(r.iter().all(|x| x.radius < 1e-70));
        // φ² = φ + 1 with φ = (1+√5)/2; the larger root is φ², check √5 to 70 digits.
        let big = r.iter().max_by(|a, b| a.z.abs_f64().total_cmp(&b.z.abs_f64())).unwrap();
        let sqrt5_fixed = (BigInt::from(5) << 512usize).sqrt();
        let two_z_minus_3 = (&big.z.re << 1usize) - (BigInt::from(3) << 256usize);
        let diff = (two_z_minus_3 - sqrt5_fixed).abs();
        assert!(diff < BigInt::from(1) << 40usize);
    }

    #[test]
    fn salem_quartic_has_two_unit_roots() {
        let r = polished_roots(&p(&[1, -1, -1, -1, 1]), 128).unwrap();
        let on_circle = r.iter().filter(|x| (x.z.abs_f64() - 1.0).abs() < 1e-12).count();
        assert_eq!(on_circle, 2);
    }

    #[test]
    fn product_of_roots_recovers_polynomial() {
        let q = p(&[3, 0, -2, 5, 1, 1]);
        let r = polished_roots(&q, 128).unwrap();
        let refs: Vec<&FixedComplex> = r.iter().map(|x| &x.z).collect();
        let c = product_coefficients(&refs, 128);
        for (k, ck) in c.iter().enumerate() {
            let (ri, dist) = round_fixed(&ck.re, 128);
            assert_eq!(ri, q.coeff(k));
            assert!(dist < 1e-25);
            assert!(fixed_to_f64(&ck.im.abs(), 128) < 1e-25);
        }
    }

    #[test]
    fn fixed_conversions() {
        for &x in &[0.0, 1.5, -2.25e-7, 123456.789] {
            assert_eq!(fixed_to_f64(&fixed_from_f64(x, 200), 200), x);
        }
    }
}
