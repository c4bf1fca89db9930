use num_traits::Zero;

use super::poly::IntPolynomial;
use super::roots::{fixed_to_f64, polished_roots, product_coefficients, round_fixed, FixedComplex};
use crate::error::{Error, Result};

pub const START_BITS: u32 = 64;
pub const MAX_BITS: u32 = 1024;

/// Irreducible factors over Q with multiplicities, sorted by degree and then
/// by coefficients. The product of the factors reproduces `p` exactly.
pub fn factor_over_q(p: &IntPolynomial) -> Result<Vec<(IntPolynomial, u32)>> {
    factor_over_q_capped(p, MAX_BITS)
}

/// As [`factor_over_q`] with a caller-chosen precision cap.
pub fn factor_over_q_capped(p: &IntPolynomial, max_bits: u32) -> Result<Vec<(IntPolynomial, u32)>> {
    let mut out = Vec::new();
    for (part, mult) in p.square_free_decomposition() {
        let mut bits = START_BITS;
        let factors = loop {
            match factor_square_free(&part, bits) {
                Some(f) => break f,
                None if bits * 2 <= max_bits => bits *= 2,
                None => return Err(Error::FactorizationFailed { bits }),
            }
        };
        out.extend(factors.into_iter().map(|f| (f, mult)));
    }
    out.sort_by(|a, b| a.0.degree().cmp(&b.0.degree()).then_with(|| a.0.coeffs().cmp(b.0.coeffs())));
    debug_assert_eq!(out.iter().fold(IntPolynomial::one(), |acc, (f, m)| acc.mul(&f.pow(*m))), *p);
    Ok(out)
}

enum SubsetVerdict {
    Factor(IntPolynomial),
    NotFactor,
    Undecided,
}

/// Tries every conjugation-closed subset of roots, smallest first. A subset
/// yields a factor iff its monic product has integer coefficients; rounding is
/// unambiguous once the propagated error is below 1/4, and exact division
/// certifies the candidate. Returns None when precision is insufficient.
fn factor_square_free(p: &IntPolynomial, bits: u32) -> Option<Vec<IntPolynomial>> {
    if p.degree() <= 1 {
        return Some(vec![p.clone()]);
    }
    let roots = polished_roots(p, bits)?;
    let n = roots.len();
    let conj: Vec<usize> = (0..n)
        .map(|i| {
            let c = roots[i].z.to_c64().conj();
            (0..n).min_by(|&a, &b| (roots[a].z.to_c64() - c).norm().total_cmp(&(roots[b].z.to_c64() - c).norm())).unwrap()
        })
        .collect();
    let mut remaining: Vec<usize> = (0..n).collect();
    let mut current = p.clone();
    let mut factors = Vec::new();
    let mut size = 1;
    'outer: while size * 2 <= remaining.len() {
        let r = remaining.len();
        for mask in 1u32..(1u32 << r) {
            if mask.count_ones() as usize != size {
                continue;
            }
            let subset: Vec<usize> = (0..r).filter(|b| mask >> b & 1 == 1).map(|b| remaining[b]).collect();
            if subset.iter().any(|i| !subset.contains(&conj[*i])) {
                continue;
            }
            match test_subset(&current, &roots.iter().map(|x| (&x.z, x.radius)).collect::<Vec<_>>(), &subset, bits) {
                SubsetVerdict::Factor(f) => {
                    current = current.exact_div(&f).expect("certified factor divides");
                    factors.push(f);
                    remaining.retain(|i| !subset.contains(i));
                    continue 'outer;
                }
                SubsetVerdict::NotFactor => {}
                SubsetVerdict::Undecided => return None,
            }
        }
        size += 1;
    }
    factors.push(current);
    Some(factors)
}

fn test_subset(current: &IntPolynomial, roots: &[(&FixedComplex, f64)], subset: &[usize], bits: u32) -> SubsetVerdict {
    let zs: Vec<&FixedComplex> = subset.iter().map(|&i| roots[i].0).collect();
    // Perturbing each root by its radius moves every elementary symmetric
    // function by at most Π(|z_j| + r_j) − Π|z_j|.
    let hi: f64 = subset.iter().map(|&i| roots[i].0.abs_f64() + roots[i].1).product();
    let lo: f64 = subset.iter().map(|&i| roots[i].0.abs_f64()).product();
    let bound = (1u64 << subset.len()) as f64 * (hi - lo).abs().max(lo * 2f64.powi(-(bits as i32) + 4))
        + subset.len() as f64 * 2f64.powi(-(bits as i32) + 8);
    if bound >= 0.25 {
        return SubsetVerdict::Undecided;
    }
    let coeffs = product_coefficients(&zs, bits);
    let mut ints = Vec::with_capacity(coeffs.len());
    for c in &coeffs {
        if fixed_to_f64(&num_traits::Signed::abs(&c.im), bits) > bound {
            return SubsetVerdict::NotFactor;
        }
        let (r, dist) = round_fixed(&c.re, bits);
        if dist > bound {
            return SubsetVerdict::NotFactor;
        }
        ints.push(r);
    }
    let Ok(candidate) = IntPolynomial::new(ints) else { return SubsetVerdict::NotFactor };
    if candidate.coeffs().iter().all(|c| c.is_zero()) {
        return SubsetVerdict::NotFactor;
    }
    if candidate.divides(current) {
        SubsetVerdict::Factor(candidate)
    } else {
        SubsetVerdict::NotFactor
    }
}
