use std::collections::HashMap;
use std::sync::{Mutex, OnceLock};

use num_bigint::BigInt;
use num_traits::One;

use super::poly::IntPolynomial;

/// Euler's totient by trial factorization.
pub fn euler_phi(mut m: u64) -> u64 {
    let mut result = m;
    let mut p = 2;
    while p * p <= m {
        if m % p == 0 {
            while m % p == 0 {
                m /= p;
            }
            result -= result / p;
        }
        p += 1;
    }
    if m > 1 {
        result -= result / m;
    }
    result
}

/// Φ_m as (x^m − 1) divided by Φ_k for every proper divisor k of m.
pub fn cyclotomic(m: u64) -> IntPolynomial {
    static CACHE: OnceLock<Mutex<HashMap<u64, IntPolynomial>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(p) = cache.lock().unwrap().get(&m) {
        return p.clone();
    }
    let p = build_cyclotomic(m);
    cache.lock().unwrap().insert(m, p.clone());
    p
}

fn build_cyclotomic(m: u64) -> IntPolynomial {
    let mut c = vec![BigInt::from(0); m as usize + 1];
    c[0] = BigInt::from(-1);
    c[m as usize] = BigInt::one();
    let mut p = IntPolynomial::new(c).expect("x^m - 1 is monic");
    for k in 1..m {
        if m % k == 0 {
            p = p.exact_div(&cyclotomic(k)).expect("Φ_k divides x^m − 1");
        }
    }
    p
}

/// All m with φ(m) ≤ d, ascending. φ(m) ≥ √(m/2) bounds the search by 2d².
pub fn orders_with_phi_at_most(d: usize) -> Vec<u64> {
    let bound = 2 * (d as u64) * (d as u64) + 2;
    (1..=bound).filter(|&m| euler_phi(m) <= d as u64).collect()
}

/// Smallest m such that Φ_m divides p, if any.
pub fn has_root_of_unity_factor(p: &IntPolynomial) -> Option<u64> {
    orders_with_phi_at_most(p.degree()).into_iter().find(|&m| cyclotomic(m).divides(p))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn p(c: &[i64]) -> IntPolynomial {
        IntPolynomial::from_i64(c).unwrap()
    }

    #[test]
    fn phi_values() {
        let expect = [1, 1, 2, 2, 4, 2, 6, 4, 6, 4, 10, 4];
        for (i, &e) in expect.iter().enumerate() {
            assert_eq!(euler_phi(i as u64 + 1), e);
        }
    }

    #[test]
    fn small_cyclotomics() {
        assert_eq!(cyclotomic(1).to_i64(), vec![-1, 1]);
        assert_eq!(cyclotomic(4).to_i64(), vec![1, 0, 1]);
        assert_eq!(cyclotomic(6).to_i64(), vec![1, -1, 1]);
        assert_eq!(cyclotomic(12).to_i64(), vec![1, 0, -1, 0, 1]);
    }

    #[test]
    fn root_of_unity_examples() {
        assert_eq!(has_root_of_unity_factor(&p(&[1, 0, 1])), Some(4));
        assert_eq!(has_root_of_unity_factor(&p(&[1, -3, 1])), None);
        assert_eq!(has_root_of_unity_factor(&p(&[-1, 1])), Some(1));
        assert_eq!(has_root_of_unity_factor(&p(&[1, -1, -1, -1, 1])), None);
    }

    #[test]
    fn enumeration_covers_degree_twelve() {
        let ms = orders_with_phi_at_most(12);
        assert!(ms.contains(&42) && ms.contains(&36) && !ms.contains(&43));
    }

    /// Scans every m ≤ 100 regardless of φ(m), exercising the enumeration bound.
    fn brute_force(p: &IntPolynomial) -> bool {
        (1..=100).any(|m| cyclotomic(m).divides(p))
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(400))]
        #[test]
        fn agrees_with_brute_force(coeffs in proptest::collection::vec(-3i64..=3, 0..=6)) {
            let mut c = coeffs.clone();
            c.push(1);
            let q = p(&c);
            prop_assert_eq!(has_root_of_unity_factor(&q).is_some(), brute_force(&q));
        }
    }
}
