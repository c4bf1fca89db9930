use num_bigint::BigInt;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use super::poly::IntPolynomial;
use crate::error::{Error, Result};

/// Square integer matrix with its determinant computed exactly at construction.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<i64>>", into = "Vec<Vec<i64>>")]
pub struct IntMatrix {
    d: usize,
    entries: Vec<Vec<i64>>,
    det: BigInt,
}

impl TryFrom<Vec<Vec<i64>>> for IntMatrix {
    type Error = Error;
    fn try_from(rows: Vec<Vec<i64>>) -> Result<Self> {
        IntMatrix::new(rows)
    }
}

impl From<IntMatrix> for Vec<Vec<i64>> {
    fn from(m: IntMatrix) -> Self {
        m.entries
    }
}

impl IntMatrix {
    pub fn new(rows: Vec<Vec<i64>>) -> Result<Self> {
        let d = rows.len();
        if d == 0 {
            return Err(Error::InvalidInput("matrix must have at least one row".into()));
        }
        if rows.iter().any(|r| r.len() != d) {
            return Err(Error::InvalidInput(format!("matrix rows must all have length {d}")));
        }
        let big = to_big(&rows);
        let det = bareiss_det(big);
        Ok(IntMatrix { d, entries: rows, det })
    }

    /// Parses a JSON array of integer rows.
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::InvalidInput(format!("matrix JSON: {e}")))
    }

    pub fn identity(d: usize) -> Self {
        let rows = (0..d).map(|i| (0..d).map(|j| i64::from(i == j)).collect()).collect();
        IntMatrix { d, entries: rows, det: BigInt::one() }
    }

    pub fn block_diag(blocks: &[IntMatrix]) -> Self {
        let d: usize = blocks.iter().map(|b| b.d).sum();
        let mut rows = vec![vec![0i64; d]; d];
        let mut off = 0;
        for b in blocks {
            for i in 0..b.d {
                for j in 0..b.d {
                    rows[off + i][off + j] = b.entries[i][j];
                }
            }
            off += b.d;
        }
        IntMatrix::new(rows).expect("block diagonal of square blocks is square")
    }

    /// Companion matrix whose characteristic polynomial is `p`.
    pub fn companion(p: &IntPolynomial) -> Result<Self> {
        let n = p.degree();
        if n == 0 {
            return Err(Error::InvalidInput("companion of a constant polynomial".into()));
        }
        let mut rows = vec![vec![0i64; n]; n];
        for i in 1..n {
            rows[i][i - 1] = 1;
        }
        for (i, row) in rows.iter_mut().enumerate() {
            let c = p.coeff(i).to_i64().ok_or_else(|| Error::InvalidInput("coefficient overflows i64".into()))?;
            row[n - 1] = -c;
        }
        IntMatrix::new(rows)
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn rows(&self) -> &[Vec<i64>] {
        &self.entries
    }

    pub fn get(&self, i: usize, j: usize) -> i64 {
        self.entries[i][j]
    }

    pub fn det(&self) -> &BigInt {
        &self.det
    }

    pub fn is_unimodular(&self) -> bool {
        self.det.abs().is_one()
    }

    pub fn to_big(&self) -> Vec<Vec<BigInt>> {
        to_big(&self.entries)
    }

    pub fn to_f64(&self) -> nalgebra::DMatrix<f64> {
        nalgebra::DMatrix::from_fn(self.d, self.d, |i, j| self.entries[i][j] as f64)
    }

    pub fn transpose(&self) -> Self {
        let rows = (0..self.d).map(|i| (0..self.d).map(|j| self.entries[j][i]).collect()).collect();
        IntMatrix { d: self.d, entries: rows, det: self.det.clone() }
    }

    pub fn mul(&self, other: &IntMatrix) -> Result<IntMatrix> {
        let p = big_mul(&self.to_big(), &other.to_big());
        IntMatrix::new(from_big(&p)?)
    }

    pub fn mul_vec(&self, v: &[i64]) -> Vec<i64> {
        self.entries.iter().map(|r| r.iter().zip(v).map(|(a, b)| a * b).sum()).collect()
    }

    /// Exact inverse through the adjugate; defined only for determinant ±1.
    pub fn inverse(&self) -> Result<IntMatrix> {
        if !self.is_unimodular() {
            return Err(Error::NotInGLdZ { det: self.det.to_string(), classification: None });
        }
        let a = self.to_big();
        let n = self.d;
        let mut inv = vec![vec![BigInt::zero(); n]; n];
        for i in 0..n {
            for j in 0..n {
                let minor: Vec<Vec<BigInt>> =
                    (0..n).filter(|&r| r != j).map(|r| (0..n).filter(|&c| c != i).map(|c| a[r][c].clone()).collect()).collect();
                let cof = if minor.is_empty() { BigInt::one() } else { bareiss_det(minor) };
                let sign = if (i + j) % 2 == 0 { BigInt::one() } else { -BigInt::one() };
                inv[i][j] = sign * cof * &self.det;
            }
        }
        IntMatrix::new(from_big(&inv)?)
    }

    /// `self^k` for signed `k`; negative powers use the exact inverse.
    pub fn pow(&self, k: i64) -> Result<IntMatrix> {
        let base = if k < 0 { self.inverse()? } else { self.clone() };
        let p = big_pow(&base.to_big(), k.unsigned_abs());
        IntMatrix::new(from_big(&p)?)
    }

    pub fn char_poly(&self) -> IntPolynomial {
        char_poly(self)
    }
}

pub(crate) fn to_big(rows: &[Vec<i64>]) -> Vec<Vec<BigInt>> {
    rows.iter().map(|r| r.iter().map(|&x| BigInt::from(x)).collect()).collect()
}

pub(crate) fn from_big(rows: &[Vec<BigInt>]) -> Result<Vec<Vec<i64>>> {
    rows.iter()
        .map(|r| r.iter().map(|x| x.to_i64().ok_or_else(|| Error::InvalidInput("matrix entry overflows i64".into()))).collect())
        .collect()
}

pub(crate) fn big_identity(n: usize) -> Vec<Vec<BigInt>> {
    (0..n).map(|i| (0..n).map(|j| if i == j { BigInt::one() } else { BigInt::zero() }).collect()).collect()
}

pub(crate) fn big_mul(a: &[Vec<BigInt>], b: &[Vec<BigInt>]) -> Vec<Vec<BigInt>> {
    let n = a.len();
    let m = b[0].len();
    let k = b.len();
    (0..n)
        .map(|i| {
            (0..m)
                .map(|j| {
                    let mut s = BigInt::zero();
                    for l in 0..k {
                        if !a[i][l].is_zero() && !b[l][j].is_zero() {
                            s += &a[i][l] * &b[l][j];
                        }
                    }
                    s
                })
                .collect()
        })
        .collect()
}

pub fn big_pow(a: &[Vec<BigInt>], mut k: u64) -> Vec<Vec<BigInt>> {
    let mut result = big_identity(a.len());
    let mut base = a.to_vec();
    while k > 0 {
        if k & 1 == 1 {
            result = big_mul(&result, &base);
        }
        k >>= 1;
        if k > 0 {
            base = big_mul(&base, &base);
        }
    }
    result
}

/// Evaluates `p(A)` exactly by Horner's scheme.
pub fn poly_of_matrix(p: &IntPolynomial, a: &IntMatrix) -> Vec<Vec<BigInt>> {
    let m = a.to_big();
    let n = a.dim();
    let mut acc = vec![vec![BigInt::zero(); n]; n];
    for c in p.coeffs().iter().rev() {
        acc = big_mul(&acc, &m);
        for (i, row) in acc.iter_mut().enumerate() {
            row[i] += c;
        }
    }
    acc
}

/// Fraction-free Gaussian elimination; every division is exact.
pub(crate) fn bareiss_det(mut a: Vec<Vec<BigInt>>) -> BigInt {
    let n = a.len();
    let mut sign = BigInt::one();
    let mut prev = BigInt::one();
    for k in 0..n {
        if a[k][k].is_zero() {
            match (k + 1..n).find(|&r| !a[r][k].is_zero()) {
                Some(r) => {
                    a.swap(k, r);
                    sign = -sign;
                }
                None => return BigInt::zero(),
            }
        }
        for i in k + 1..n {
            for j in k + 1..n {
                let v = (&a[i][j] * &a[k][k] - &a[i][k] * &a[k][j]) / &prev;
                a[i][j] = v;
            }
        }
        prev = a[k][k].clone();
    }
    sign * &a[n - 1][n - 1]
}

/// det(xI − M) by the Faddeev–LeVerrier recursion; the divisions by k are exact
/// because every intermediate coefficient is an integer.
pub fn char_poly(m: &IntMatrix) -> IntPolynomial {
    char_poly_big(&m.to_big())
}

/// Characteristic polynomial of a square matrix with arbitrary-size entries.
pub fn char_poly_big(a: &[Vec<BigInt>]) -> IntPolynomial {
    let n = a.len();
    let a = a.to_vec();
    let mut coeffs = vec![BigInt::zero(); n + 1];
    coeffs[n] = BigInt::one();
    let mut mk = vec![vec![BigInt::zero(); n]; n];
    for k in 1..=n {
        mk = big_mul(&a, &mk);
        for (i, row) in mk.iter_mut().enumerate() {
            row[i] += &coeffs[n - k + 1];
        }
        let am = big_mul(&a, &mk);
        let tr: BigInt = (0..n).map(|i| am[i][i].clone()).sum();
        coeffs[n - k] = -tr / BigInt::from(k as u64);
    }
    IntPolynomial::from_big_unchecked(coeffs)
}

/// Serde adapter for exact integer matrices: entries that fit in i64 become
/// JSON numbers, larger ones decimal strings.
pub mod big_matrix_serde {
    use num_bigint::BigInt;
    use num_traits::ToPrimitive;
    use serde::de::Error as _;
    use serde::ser::SerializeSeq;
    use serde::{Deserialize, Deserializer, Serializer};

    #[derive(serde::Serialize, Deserialize)]
    #[serde(untagged)]
    enum Entry {
        Small(i64),
        Big(String),
    }

    pub fn serialize<S: Serializer>(m: &[Vec<BigInt>], s: S) -> Result<S::Ok, S::Error> {
        let mut seq = s.serialize_seq(Some(m.len()))?;
        for row in m {
            let r: Vec<Entry> =
                row.iter().map(|x| x.to_i64().map(Entry::Small).unwrap_or_else(|| Entry::Big(x.to_string()))).collect();
            seq.serialize_element(&r)?;
        }
        seq.end()
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Vec<BigInt>>, D::Error> {
        let rows: Vec<Vec<Entry>> = Vec::deserialize(d)?;
        rows.into_iter()
            .map(|r| {
                r.into_iter()
                    .map(|e| match e {
                        Entry::Small(v) => Ok(BigInt::from(v)),
                        Entry::Big(t) => t.parse().map_err(D::Error::custom),
                    })
                    .collect()
            })
            .collect()
    }
}
