use num_bigint::BigInt;
use num_traits::{ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exact_algebra::{big_pow, char_poly_big, factor_over_q, has_root_of_unity_factor, IntMatrix, IntPolynomial};
use crate::spectral::{build_splitting, SpectralSplitting};

/// Largest power checked by the bounded total-irreducibility test.
pub const TOTAL_IRREDUCIBILITY_BOUND: u32 = 12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Factor {
    pub polynomial: IntPolynomial,
    pub multiplicity: u32,
    pub has_max_root: bool,
    pub has_min_root: bool,
    /// Distinct root moduli, ascending.
    pub moduli: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Classification {
    #[serde(rename = "in_GLdZ")]
    pub in_gldz: bool,
    pub hyperbolic: bool,
    pub partially_hyperbolic: bool,
    pub ergodic: bool,
    pub irreducible: bool,
    pub weakly_irreducible: bool,
    pub very_weakly_irreducible: bool,
    pub rho_max: f64,
    pub rho_min: f64,
    /// Nonzero lattice vector inside V_k for the first factor lacking a root
    /// of modulus ρ_max or ρ_min.
    pub witness: Option<Vec<i64>>,
    pub offending_factor: Option<IntPolynomial>,
    /// Smallest m with Φ_m dividing the characteristic polynomial.
    pub cyclotomic_order: Option<u64>,
    pub factors: Vec<Factor>,
    /// L^n irreducible for every n up to the bound; None when L itself is reducible.
    pub totally_irreducible_up_to_bound: Option<bool>,
    pub total_irreducibility_bound: u32,
}

/// Decides every hypothesis predicate for M. Matrices with determinant other
/// than ±1 produce `NotInGLdZ` carrying the classification computed anyway.
pub fn classify(m: &IntMatrix) -> Result<Classification> {
    if m.det().is_zero() {
        return Err(Error::NotInGLdZ { det: "0".into(), classification: None });
    }
    let splitting = build_splitting(m)?;
    let c = classify_with(m, &splitting)?;
    if !c.in_gldz {
        return Err(Error::NotInGLdZ { det: m.det().to_string(), classification: Some(Box::new(c)) });
    }
    Ok(c)
}

/// Classification from a precomputed splitting of the same matrix.
pub fn classify_with(m: &IntMatrix, s: &SpectralSplitting) -> Result<Classification> {
    let groups = &s.moduli_groups;
    let n_unit = groups.iter().filter(|g| g.unit_circle).count();
    let hyperbolic = n_unit == 0;
    let partially_hyperbolic = n_unit > 0 && n_unit < groups.len();
    let cyclotomic_order = has_root_of_unity_factor(&m.char_poly());
    let ergodic = cyclotomic_order.is_none();

    let factors: Vec<Factor> = s
        .rational_blocks
        .iter()
        .enumerate()
        .map(|(k, b)| Factor {
            polynomial: b.factor.clone(),
            multiplicity: b.multiplicity,
            has_max_root: b.has_max_root,
            has_min_root: b.has_min_root,
            moduli: groups.iter().filter(|g| g.members.iter().any(|mm| mm.factor == k)).map(|g| g.modulus).collect(),
        })
        .collect();
    let irreducible = factors.len() == 1 && factors[0].multiplicity == 1;
    let weakly_irreducible = factors.iter().all(|f| f.moduli.len() == groups.len());
    let offending = s.rational_blocks.iter().find(|b| !(b.has_max_root && b.has_min_root));
    let very_weakly_irreducible = offending.is_none();
    let witness = match offending {
        Some(b) => Some(
            b.lattice_basis
                .first()
                .expect("V_k has positive dimension")
                .iter()
                .map(|x| x.to_i64().ok_or_else(|| Error::InvalidInput("witness entry overflows i64".into())))
                .collect::<Result<Vec<i64>>>()?,
        ),
        None => None,
    };
    let totally_irreducible_up_to_bound =
        if irreducible { Some(bounded_total_irreducibility(m, TOTAL_IRREDUCIBILITY_BOUND)?) } else { None };

    Ok(Classification {
        in_gldz: m.is_unimodular(),
        hyperbolic,
        partially_hyperbolic,
        ergodic,
        irreducible,
        weakly_irreducible,
        very_weakly_irreducible,
        rho_max: s.rho_max,
        rho_min: s.rho_min,
        witness,
        offending_factor: offending.map(|b| b.factor.clone()),
        cyclotomic_order,
        factors,
        totally_irreducible_up_to_bound,
        total_irreducibility_bound: TOTAL_IRREDUCIBILITY_BOUND,
    })
}

/// Whether the characteristic polynomial of L^n is irreducible for n = 1..=bound.
/// This is a finite check only; it certifies nothing about larger n.
pub fn bounded_total_irreducibility(m: &IntMatrix, bound: u32) -> Result<bool> {
    let base = m.to_big();
    for n in 1..=bound {
        let p = char_poly_big(&big_pow(&base, n as u64));
        let f = factor_over_q(&p)?;
        if f.len() != 1 || f[0].1 != 1 {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Exact check that `n` lies in the kernel of the given integer matrix.
pub fn in_rational_block(matrix: &[Vec<BigInt>], n: &[i64]) -> bool {
    matrix.iter().all(|row| row.iter().zip(n).map(|(a, &b)| a * BigInt::from(b)).sum::<BigInt>().is_zero())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn mat(rows: &[&[i64]]) -> IntMatrix {
        IntMatrix::new(rows.iter().map(|r| r.to_vec()).collect()).unwrap()
    }

    fn cat() -> IntMatrix {
        mat(&[&[2, 1], &[1, 1]])
    }

    fn salem() -> IntMatrix {
        IntMatrix::companion(&IntPolynomial::from_i64(&[1, -1, -1, -1, 1]).unwrap()).unwrap()
    }

    fn assert_chain(c: &Classification) {
        assert!(!c.irreducible || c.weakly_irreducible);
        assert!(!c.weakly_irreducible || c.very_weakly_irreducible);
        assert!(!c.hyperbolic || c.ergodic);
        assert_eq!(c.witness.is_some(), !c.very_weakly_irreducible);
    }

    #[test]
    fn cat_map() {
        let c = classify(&cat()).unwrap();
        assert_chain(&c);
        assert!(c.in_gldz && c.hyperbolic && c.ergodic && c.irreducible && c.very_weakly_irreducible);
        assert!(!c.partially_hyperbolic);
        assert!((c.rho_max - 2.618_033_988_749_895).abs() < 1e-12);
        assert!((c.rho_min - 0.381_966_011_250_105_1).abs() < 1e-12);
        assert!(c.witness.is_none());
        assert_eq!(c.totally_irreducible_up_to_bound, Some(true));
    }

    #[test]
    fn reducible_block_diagonal() {
        let m = IntMatrix::block_diag(&[cat(), mat(&[&[3, 2], &[1, 1]])]);
        let c = classify(&m).unwrap();
        assert_chain(&c);
        assert!(c.hyperbolic && !c.very_weakly_irreducible && !c.irreducible);
        assert_eq!(c.witness, Some(vec![1, 0, 0, 0]));
        assert_eq!(c.offending_factor, Some(IntPolynomial::from_i64(&[1, -3, 1]).unwrap()));
    }

    #[test]
    fn salem_companion() {
        let c = classify(&salem()).unwrap();
        assert_chain(&c);
        assert!(c.partially_hyperbolic && c.ergodic && c.irreducible && !c.hyperbolic);
        assert_eq!(c.cyclotomic_order, None);
    }

    #[test]
    fn rotation_is_not_ergodic() {
        let c = classify(&mat(&[&[0, 1], &[-1, 0]])).unwrap();
        assert!(!c.ergodic && !c.hyperbolic && !c.partially_hyperbolic);
        assert_eq!(c.cyclotomic_order, Some(4));
    }

    #[test]
    fn non_unimodular_still_classified() {
        match classify(&mat(&[&[2, 0], &[0, 3]])) {
            Err(Error::NotInGLdZ { det, classification: Some(c) }) => {
                assert_eq!(det, "6");
                assert!(!c.in_gldz && c.hyperbolic);
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(classify(&mat(&[&[1, 1], &[1, 1]])), Err(Error::NotInGLdZ { classification: None, .. })));
    }

    #[test]
    fn weak_but_not_full_irreducibility() {
        // diag(cat, cat): both factors coincide, so every factor carries every modulus.
        let c = classify(&IntMatrix::block_diag(&[cat(), cat()])).unwrap();
        assert!(!c.irreducible && c.weakly_irreducible && c.very_weakly_irreducible);
        // A factor with the extreme moduli plus a middle factor: very weak only.
        let a = IntMatrix::companion(&IntPolynomial::from_i64(&[1, -5, 1]).unwrap()).unwrap();
        let c = classify(&IntMatrix::block_diag(&[a, cat()])).unwrap();
        assert!(!c.very_weakly_irreducible);
    }

    #[test]
    fn witness_lies_in_offending_block_and_hat_complement() {
        let m = IntMatrix::block_diag(&[cat(), mat(&[&[3, 2], &[1, 1]])]);
        let s = build_splitting(&m).unwrap();
        let c = classify_with(&m, &s).unwrap();
        let w = c.witness.unwrap();
        let block = s.rational_blocks.iter().find(|b| Some(&b.factor) == c.offending_factor.as_ref()).unwrap();
        assert!(in_rational_block(&block.matrix, &w));
        let wf: Vec<f64> = w.iter().map(|&x| x as f64).collect();
        let norm = wf.iter().map(|x| x * x).sum::<f64>().sqrt();
        let proj = |sub: &crate::spectral::Subspace| {
            sub.basis.iter().map(|v| v.iter().zip(&wf).map(|(a, b)| a * b).sum::<f64>().powi(2)).sum::<f64>().sqrt()
        };
        assert!(proj(&s.e_max) <= 1e-8 * norm || proj(&s.e_min) <= 1e-8 * norm);
    }

    #[test]
    fn bounded_total_irreducibility_detects_powers() {
        // [[0,2],[1,0]]² = 2I has a split characteristic polynomial.
        let m = mat(&[&[0, 2], &[1, 0]]);
        assert!(!bounded_total_irreducibility(&m, 4).unwrap());
        assert!(bounded_total_irreducibility(&cat(), 12).unwrap());
    }

    fn elementary(d: usize, i: usize, j: usize, k: i64) -> IntMatrix {
        let mut rows: Vec<Vec<i64>> = (0..d).map(|r| (0..d).map(|c| i64::from(r == c)).collect()).collect();
        rows[i][j] += k;
        IntMatrix::new(rows).unwrap()
    }

    fn predicates(c: &Classification) -> [bool; 7] {
        [
            c.hyperbolic,
            c.partially_hyperbolic,
            c.ergodic,
            c.irreducible,
            c.weakly_irreducible,
            c.very_weakly_irreducible,
            c.in_gldz,
        ]
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn invariant_under_unimodular_conjugation(
            ops in proptest::collection::vec((0usize..4, 0usize..4, -2i64..=2), 1..5),
            which in 0usize..3,
        ) {
            let m = match which {
                0 => IntMatrix::block_diag(&[cat(), cat()]),
                1 => IntMatrix::block_diag(&[cat(), mat(&[&[3, 2], &[1, 1]])]),
                _ => salem(),
            };
            let mut u = IntMatrix::identity(4);
            for (i, j, k) in ops {
                if i != j {
                    u = u.mul(&elementary(4, i, j, k)).unwrap();
                }
            }
            let conj = u.mul(&m).unwrap().mul(&u.inverse().unwrap()).unwrap();
            let a = classify(&m).unwrap();
            let b = classify(&conj).unwrap();
            prop_assert_eq!(predicates(&a), predicates(&b));
            prop_assert!((a.rho_max - b.rho_max).abs() < 1e-9 * a.rho_max);
        }

        #[test]
        fn block_diagonal_with_distinct_extremes_is_not_very_weakly_irreducible(t1 in 3i64..8, t2 in 3i64..8) {
            prop_assume!(t1 != t2);
            let a = IntMatrix::companion(&IntPolynomial::from_i64(&[1, -t1, 1]).unwrap()).unwrap();
            let b = IntMatrix::companion(&IntPolynomial::from_i64(&[1, -t2, 1]).unwrap()).unwrap();
            let c = classify(&IntMatrix::block_diag(&[a, b])).unwrap();
            prop_assert!(!c.very_weakly_irreducible);
            prop_assert!(c.witness.is_some());
        }
    }
}
