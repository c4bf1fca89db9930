use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, Zero};

/// Lattice basis of {n ∈ Z^c : A n = 0} for an r×c integer matrix.
///
/// Unimodular column operations bring A to column echelon form A·U = [H | 0];
/// the columns of U opposite the zero block span the kernel lattice. The basis
/// is then put in row Hermite normal form so the output is canonical, and every
/// vector is primitive because the kernel lattice is saturated.
pub fn integer_kernel(a: &[Vec<BigInt>], cols: usize) -> Vec<Vec<BigInt>> {
    let mut a: Vec<Vec<BigInt>> = a.to_vec();
    let mut u: Vec<Vec<BigInt>> =
        (0..cols).map(|i| (0..cols).map(|j| if i == j { BigInt::one() } else { BigInt::zero() }).collect()).collect();
    let mut k = 0;
    for row in 0..a.len() {
        if k == cols {
            break;
        }
        for j in k + 1..cols {
            if a[row][j].is_zero() {
                continue;
            }
            let x = a[row][k].clone();
            let y = a[row][j].clone();
            let eg = x.extended_gcd(&y);
            let (g, s, t) = (eg.gcd, eg.x, eg.y);
            let xg = &x / &g;
            let yg = &y / &g;
            column_combine(&mut a, k, j, &s, &t, &yg, &xg);
            column_combine(&mut u, k, j, &s, &t, &yg, &xg);
        }
        if !a[row][k].is_zero() {
            k += 1;
        }
    }
    let basis: Vec<Vec<BigInt>> = (k..cols).map(|j| (0..cols).map(|i| u[i][j].clone()).collect()).collect();
    row_hnf(basis)
}

/// col_k ← s·col_k + t·col_j, col_j ← −y'·col_k + x'·col_j (determinant 1).
fn column_combine(m: &mut [Vec<BigInt>], k: usize, j: usize, s: &BigInt, t: &BigInt, yg: &BigInt, xg: &BigInt) {
    for r in m.iter_mut() {
        let ck = r[k].clone();
        let cj = r[j].clone();
        r[k] = s * &ck + t * &cj;
        r[j] = xg * &cj - yg * &ck;
    }
}

/// Row Hermite normal form of a full-rank set of row vectors: positive pivots,
/// entries above each pivot reduced into [0, pivot).
pub(crate) fn row_hnf(mut rows: Vec<Vec<BigInt>>) -> Vec<Vec<BigInt>> {
    if rows.is_empty() {
        return rows;
    }
    let cols = rows[0].len();
    let mut r = 0;
    for c in 0..cols {
        if r == rows.len() {
            break;
        }
        loop {
            let piv = (r..rows.len()).filter(|&i| !rows[i][c].is_zero()).min_by_key(|&i| rows[i][c].abs());
            let Some(p) = piv else { break };
            rows.swap(r, p);
            let mut done = true;
            for i in r + 1..rows.len() {
                if rows[i][c].is_zero() {
                    continue;
                }
                let q = rows[i][c].div_floor(&rows[r][c]);
                let pr = rows[r].clone();
                for (x, y) in rows[i].iter_mut().zip(&pr) {
                    *x -= &q * y;
                }
                if !rows[i][c].is_zero() {
                    done = false;
                }
            }
            if done {
                break;
            }
        }
        if r < rows.len() && !rows[r][c].is_zero() {
            if rows[r][c].is_negative() {
                rows[r].iter_mut().for_each(|x| *x = -&*x);
            }
            for i in 0..r {
                let q = rows[i][c].div_floor(&rows[r][c]);
                if !q.is_zero() {
                    let pr = rows[r].clone();
                    for (x, y) in rows[i].iter_mut().zip(&pr) {
                        *x -= &q * y;
                    }
                }
            }
            r += 1;
        }
    }
    rows.truncate(r);
    rows
}
