//! Eigenvalue moduli and the invariant subspaces they determine.
//!
//! Roots are computed per irreducible factor in binary fixed point, grouped by
//! modulus under a certification rule, and every invariant subspace is taken as
//! the range of the complementary factor of the characteristic polynomial
//! evaluated at the matrix, orthonormalized by SVD.

use nalgebra::DMatrix;
use num_bigint::BigInt;
use num_complex::Complex64;
use num_traits::Zero;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::exact_algebra::roots::{fixed_to_f64, polished_roots};
use crate::exact_algebra::{
    big_matrix_serde, factor_over_q, has_root_of_unity_factor, integer_kernel, poly_of_matrix, IntMatrix, IntPolynomial, MAX_BITS,
};

/// Relative tolerance below which two moduli must be certified equal.
pub const GROUPING_TOL: f64 = 1e-9;
/// Working precision for roots, comfortably above 80 bits.
pub const DEFAULT_BITS: u32 = 128;

#[derive(Debug, Clone, Serialize)]
pub struct RootWithModulus {
    pub re: f64,
    pub im: f64,
    pub modulus: f64,
    /// A root of the polynomial lies within this distance of (re, im).
    pub radius: f64,
    #[serde(skip)]
    modulus_fixed: BigInt,
    #[serde(skip)]
    bits: u32,
}

impl RootWithModulus {
    pub fn value(&self) -> Complex64 {
        Complex64::new(self.re, self.im)
    }

    /// |self| − |other| at full working precision.
    pub fn modulus_gap(&self, other: &RootWithModulus) -> f64 {
        debug_assert_eq!(self.bits, other.bits);
        fixed_to_f64(&(&self.modulus_fixed - &other.modulus_fixed), self.bits)
    }
}

/// All roots of `p` with multiplicity, each within an inclusion radius of at
/// most 2^(16−bits)·(1+|z|). Precision is doubled internally as needed.
pub fn roots_with_moduli(p: &IntPolynomial, bits: u32) -> Result<Vec<RootWithModulus>> {
    if p.degree() == 0 {
        return Err(Error::InvalidInput("constant polynomial has no roots".into()));
    }
    let accuracy = 2f64.powi(16 - bits as i32);
    let mut out = Vec::with_capacity(p.degree());
    for (part, mult) in p.square_free_decomposition() {
        let mut b = bits;
        let roots = loop {
            match polished_roots(&part, b) {
                Some(r) if r.iter().all(|x| x.radius <= accuracy * (1.0 + x.z.abs_f64())) => break r,
                _ if b * 2 <= MAX_BITS => b *= 2,
                _ => return Err(Error::PrecisionExhausted { requested: accuracy, bits: b }),
            }
        };
        for r in roots {
            let modulus = r.z.modulus_fixed();
            let modulus_fixed = if b >= bits { modulus >> (b - bits) as usize } else { modulus << (bits - b) as usize };
            let z = r.z.to_c64();
            let entry = RootWithModulus {
                re: z.re,
                im: z.im,
                modulus: fixed_to_f64(&modulus_fixed, bits),
                radius: r.radius,
                modulus_fixed,
                bits,
            };
            out.extend(std::iter::repeat_n(entry, mult as usize));
        }
    }
    out.sort_by(|a, b| a.modulus_fixed.cmp(&b.modulus_fixed).then(a.im.total_cmp(&b.im)));
    Ok(out)
}

#[derive(Debug, Clone, Serialize)]
pub struct GroupMember {
    pub root: RootWithModulus,
    /// Index into `SpectralSplitting::rational_blocks`.
    pub factor: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct ModulusGroup {
    pub modulus: f64,
    /// Certified exactly on the unit circle.
    pub unit_circle: bool,
    pub members: Vec<GroupMember>,
}

impl ModulusGroup {
    pub fn dim(&self) -> usize {
        self.members.len()
    }
}

/// Orthonormal basis of a subspace of R^d, stored as rows.
#[derive(Debug, Clone, Serialize)]
pub struct Subspace {
    pub ambient: usize,
    pub basis: Vec<Vec<f64>>,
    /// ‖(I − P) M P‖_F for the orthogonal projector P.
    pub invariance_residual: f64,
    /// ‖BᵀB − I‖_F.
    pub orthonormality_error: f64,
}

impl Subspace {
    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    /// d × k matrix whose columns are the basis vectors.
    pub fn matrix(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.ambient, self.dim(), |i, j| self.basis[j][i])
    }

    pub fn projector(&self) -> DMatrix<f64> {
        let b = self.matrix();
        &b * b.transpose()
    }

    /// Matrix of M restricted to the subspace in its own basis, BᵀMB.
    pub fn restrict(&self, m: &DMatrix<f64>) -> DMatrix<f64> {
        let b = self.matrix();
        b.transpose() * m * b
    }

    fn from_matrix(b: DMatrix<f64>, m: &DMatrix<f64>) -> Subspace {
        let d = b.nrows();
        let k = b.ncols();
        let p = &b * b.transpose();
        let inv = (DMatrix::identity(d, d) - &p) * m * &p;
        let gram = b.transpose() * &b - DMatrix::<f64>::identity(k, k);
        Subspace {
            ambient: d,
            basis: (0..k).map(|j| b.column(j).iter().copied().collect()).collect(),
            invariance_residual: inv.norm(),
            orthonormality_error: gram.norm(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct LyapunovBlock {
    pub rho: f64,
    pub subspace: Subspace,
}

/// V_k = ker p_k^{d_k}(M) with its exact defining matrix and lattice basis.
#[derive(Debug, Clone, Serialize)]
pub struct RationalBlock {
    pub factor: IntPolynomial,
    pub multiplicity: u32,
    #[serde(with = "big_matrix_serde")]
    pub matrix: Vec<Vec<BigInt>>,
    #[serde(with = "big_matrix_serde")]
    pub lattice_basis: Vec<Vec<BigInt>>,
    pub has_max_root: bool,
    pub has_min_root: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct SpectralSplitting {
    pub d: usize,
    pub moduli_groups: Vec<ModulusGroup>,
    pub rho_max: f64,
    pub rho_min: f64,
    pub e_s: Subspace,
    pub e_c: Subspace,
    pub e_u: Subspace,
    pub e_max: Subspace,
    pub e_min: Subspace,
    /// One basis per modulus group, in increasing modulus order.
    pub group_subspaces: Vec<Subspace>,
    /// Unstable groups 1 < ρ_1 < … < ρ_ℓ.
    pub lyapunov_blocks: Vec<LyapunovBlock>,
    /// E^{i,ℓ} = E^i ⊕ … ⊕ E^ℓ for i = 1..ℓ.
    pub fast_subspaces: Vec<Subspace>,
    pub rational_blocks: Vec<RationalBlock>,
    /// Condition number of [B_s | B_c | B_u].
    pub direct_sum_condition: f64,
}

/// Basis matrix T = [B_0 | B_1 | …] of a direct-sum decomposition with its inverse.
#[derive(Debug, Clone)]
pub struct Decomposition {
    pub t: DMatrix<f64>,
    pub t_inv: DMatrix<f64>,
    pub ranges: Vec<std::ops::Range<usize>>,
}

impl Decomposition {
    pub fn new(parts: &[&Subspace]) -> Self {
        let d = parts.first().map_or(0, |s| s.ambient);
        let mut cols = Vec::new();
        let mut ranges = Vec::new();
        for s in parts {
            let start = cols.len();
            cols.extend(s.basis.iter().cloned());
            ranges.push(start..cols.len());
        }
        let t = DMatrix::from_fn(d, cols.len(), |i, j| cols[j][i]);
        let t_inv = t.clone().try_inverse().expect("invariant subspaces with disjoint spectra are complementary");
        Decomposition { t, t_inv, ranges }
    }

    /// Coordinates of x in the basis of part `k`.
    pub fn coords(&self, k: usize, x: &[f64]) -> Vec<f64> {
        self.ranges[k].clone().map(|r| (0..x.len()).map(|c| self.t_inv[(r, c)] * x[c]).sum()).collect()
    }

    /// Projection onto part `k` along the others.
    pub fn projector(&self, k: usize) -> DMatrix<f64> {
        let r = self.ranges[k].clone();
        let tk = self.t.columns(r.start, r.len());
        let tik = self.t_inv.rows(r.start, r.len());
        tk * tik
    }
}

impl SpectralSplitting {
    /// The splitting R^d = E^s ⊕ E^c ⊕ E^u as parts 0, 1, 2.
    pub fn scu(&self) -> Decomposition {
        Decomposition::new(&[&self.e_s, &self.e_c, &self.e_u])
    }

    /// Every modulus group as its own part, in increasing modulus order.
    pub fn by_group(&self) -> Decomposition {
        Decomposition::new(&self.group_subspaces.iter().collect::<Vec<_>>())
    }

    /// Indices of `group_subspaces` that are Lyapunov blocks.
    pub fn unstable_group_indices(&self) -> Vec<usize> {
        self.moduli_groups.iter().enumerate().filter(|(_, g)| !g.unit_circle && g.modulus > 1.0).map(|(i, _)| i).collect()
    }
}

/// Certified modulus comparison: equal when the gap is within the inclusion
/// radii plus half the working precision, distinct beyond the grouping
/// tolerance, and ambiguous in between.
fn same_modulus(a: &RootWithModulus, b: &RootWithModulus) -> Result<bool> {
    let gap = a.modulus_gap(b).abs();
    let certified = a.radius + b.radius + 2f64.powi(-(a.bits as i32) / 2);
    if gap <= certified {
        return Ok(true);
    }
    if gap <= GROUPING_TOL * a.modulus.max(b.modulus) {
        return Err(Error::AmbiguousModuli { a: a.modulus, b: b.modulus });
    }
    Ok(false)
}

/// Whether a root lies exactly on the unit circle. Numeric proximity decides
/// only together with a palindromic or cyclotomic factor.
fn on_unit_circle(r: &RootWithModulus, factor: &IntPolynomial) -> Result<bool> {
    let gap = (r.modulus - 1.0).abs();
    if gap > GROUPING_TOL {
        return Ok(false);
    }
    let certified = r.radius + 2f64.powi(-(r.bits as i32) / 2);
    if gap <= certified && (factor.is_palindromic() || has_root_of_unity_factor(factor).is_some()) {
        return Ok(true);
    }
    Err(Error::AmbiguousModuli { a: r.modulus, b: 1.0 })
}

/// Range of c(M), c = Π_{excluded roots}(x − r), as an orthonormal d × k basis.
fn invariant_basis(m: &DMatrix<f64>, excluded: &[Complex64], k: usize) -> DMatrix<f64> {
    let d = m.nrows();
    if k == 0 {
        return DMatrix::zeros(d, 0);
    }
    let mut c = vec![Complex64::new(1.0, 0.0)];
    for &r in excluded {
        let mut next = vec![Complex64::new(0.0, 0.0); c.len() + 1];
        for (i, &ci) in c.iter().enumerate() {
            next[i + 1] += ci;
            next[i] -= ci * r;
        }
        c = next;
    }
    let mut acc = DMatrix::<f64>::zeros(d, d);
    for ci in c.iter().rev() {
        acc = &acc * m;
        for i in 0..d {
            acc[(i, i)] += ci.re;
        }
    }
    let scale = acc.amax().max(f64::MIN_POSITIVE);
    // Column-pivoted QR: the leading k columns of Q span the range of c(M).
    let q = (acc / scale).col_piv_qr().q();
    let mut b = DMatrix::<f64>::zeros(d, k);
    for j in 0..k {
        let mut col = q.column(j).into_owned();
        if let Some(first) = col.iter().find(|x| x.abs() > 1e-8) {
            if *first < 0.0 {
                col = -col;
            }
        }
        b.set_column(j, &col);
    }
    b
}

/// 2-norm condition number from the eigenvalues of TᵀT.
pub fn condition_number(t: &DMatrix<f64>) -> f64 {
    let ev = (t.transpose() * t).symmetric_eigenvalues();
    (ev.max() / ev.min()).sqrt()
}

pub fn build_splitting(m: &IntMatrix) -> Result<SpectralSplitting> {
    if m.det().is_zero() {
        return Err(Error::InvalidInput("matrix is singular".into()));
    }
    let d = m.dim();
    let mf = m.to_f64();
    let factors = factor_over_q(&m.char_poly())?;

    let mut labeled: Vec<(usize, RootWithModulus, bool)> = Vec::with_capacity(d);
    for (k, (f, mult)) in factors.iter().enumerate() {
        for r in roots_with_moduli(f, DEFAULT_BITS)? {
            let unit = on_unit_circle(&r, f)?;
            for _ in 0..*mult {
                labeled.push((k, r.clone(), unit));
            }
        }
    }
    labeled.sort_by(|a, b| a.1.modulus_fixed.cmp(&b.1.modulus_fixed));

    let mut groups: Vec<ModulusGroup> = Vec::new();
    for (k, r, unit) in labeled {
        let joins = match groups.last() {
            Some(g) if g.unit_circle || unit => g.unit_circle && unit,
            Some(g) => same_modulus(&g.members.last().unwrap().root, &r)?,
            None => false,
        };
        if joins {
            groups.last_mut().unwrap().members.push(GroupMember { root: r, factor: k });
        } else {
            let modulus = if unit { 1.0 } else { r.modulus };
            groups.push(ModulusGroup { modulus, unit_circle: unit, members: vec![GroupMember { root: r, factor: k }] });
        }
    }

    let all_roots: Vec<(usize, Complex64)> =
        groups.iter().enumerate().flat_map(|(gi, g)| g.members.iter().map(move |mm| (gi, mm.root.value()))).collect();
    let span_of = |selected: &dyn Fn(usize) -> bool| -> Subspace {
        let excluded: Vec<Complex64> = all_roots.iter().filter(|(g, _)| !selected(*g)).map(|(_, z)| *z).collect();
        let k = all_roots.len() - excluded.len();
        Subspace::from_matrix(invariant_basis(&mf, &excluded, k), &mf)
    };

    let ng = groups.len();
    let group_subspaces: Vec<Subspace> = (0..ng).map(|i| span_of(&|g| g == i)).collect();
    let is_stable = |g: usize| !groups[g].unit_circle && groups[g].modulus < 1.0;
    let is_unstable = |g: usize| !groups[g].unit_circle && groups[g].modulus > 1.0;
    let e_s = span_of(&is_stable);
    let e_c = span_of(&|g| groups[g].unit_circle);
    let e_u = span_of(&is_unstable);
    let unstable: Vec<usize> = (0..ng).filter(|&g| is_unstable(g)).collect();
    let lyapunov_blocks =
        unstable.iter().map(|&g| LyapunovBlock { rho: groups[g].modulus, subspace: group_subspaces[g].clone() }).collect();
    let fast_subspaces = unstable.iter().map(|&first| span_of(&|g| is_unstable(g) && g >= first)).collect();

    let rho_max = groups.last().map_or(1.0, |g| g.modulus);
    let rho_min = groups.first().map_or(1.0, |g| g.modulus);
    let rational_blocks = factors
        .iter()
        .enumerate()
        .map(|(k, (f, mult))| {
            let matrix = poly_of_matrix(&f.pow(*mult), m);
            let lattice_basis = integer_kernel(&matrix, d);
            RationalBlock {
                factor: f.clone(),
                multiplicity: *mult,
                matrix,
                lattice_basis,
                has_max_root: groups.last().is_some_and(|g| g.members.iter().any(|mm| mm.factor == k)),
                has_min_root: groups.first().is_some_and(|g| g.members.iter().any(|mm| mm.factor == k)),
            }
        })
        .collect();

    let adapted = Decomposition::new(&[&e_s, &e_c, &e_u]);
    let direct_sum_condition = condition_number(&adapted.t);

    Ok(SpectralSplitting {
        d,
        e_max: group_subspaces[ng - 1].clone(),
        e_min: group_subspaces[0].clone(),
        moduli_groups: groups,
        rho_max,
        rho_min,
        e_s,
        e_c,
        e_u,
        group_subspaces,
        lyapunov_blocks,
        fast_subspaces,
        rational_blocks,
        direct_sum_condition,
    })
}
