//! Fourier-side norms: H^β, truncation with its two estimates, directional
//! weights, fractional directional derivatives, the θ-decomposition and the
//! L²-upgrade partial sums.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::fourier::{norm, FourierField};
use crate::error::{Error, Result};
use crate::fit::{fit_last_half, LineFit};

/// Relative slack allowed when comparing two floating evaluations of an inequality.
const INEQUALITY_SLACK: f64 = 1e-12;

fn dot(n: &[i64], v: &[f64]) -> f64 {
    n.iter().zip(v).map(|(&a, b)| a as f64 * b).sum()
}

fn power_at(c: &[Complex64]) -> f64 {
    c.iter().map(|z| z.norm_sqr()).sum()
}

/// (Σ (1+‖n‖²)^β |ω̂_n|²)^{1/2}.
pub fn sobolev_norm(w: &FourierField, beta: f64) -> f64 {
    w.power().map(|(n, p)| (1.0 + norm(n).powi(2)).powf(beta) * p).sum::<f64>().sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InequalityCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

impl InequalityCheck {
    fn new(lhs: f64, rhs: f64) -> Self {
        InequalityCheck { lhs, rhs, holds: lhs <= rhs * (1.0 + INEQUALITY_SLACK) + f64::MIN_POSITIVE }
    }

    pub fn slack(&self) -> f64 {
        self.rhs - self.lhs
    }
}

#[derive(Debug, Clone)]
pub struct Truncation {
    pub truncated: FourierField,
    pub radius: f64,
    pub beta: f64,
    /// ‖ω − ω_N‖_{L²} ≤ N^{−β}‖ω‖_{H^β}.
    pub tail: InequalityCheck,
    /// ‖ω_N‖_{H^β} ≤ 2^{β/2}N^β‖ω‖_{L²}.
    pub smoothing: InequalityCheck,
}

/// Zeroes the coefficients with ‖n‖ > N and checks both truncation estimates for β.
pub fn truncate(w: &FourierField, radius: f64, beta: f64) -> Result<Truncation> {
    if !(radius >= 1.0) || !(beta >= 0.0) {
        return Err(Error::InvalidInput(format!("truncation needs N ≥ 1 and β ≥ 0, got N = {radius}, β = {beta}")));
    }
    let mut truncated = w.clone();
    truncated.coeffs.retain(|n, _| norm(n) <= radius);
    let tail_l2 = w.power().filter(|(n, _)| norm(n) > radius).map(|(_, p)| p).sum::<f64>().sqrt();
    let tail = InequalityCheck::new(tail_l2, radius.powf(-beta) * sobolev_norm(w, beta));
    let smoothing = InequalityCheck::new(sobolev_norm(&truncated, beta), 2f64.powf(beta / 2.0) * radius.powf(beta) * w.l2_norm());
    Ok(Truncation { truncated, radius, beta, tail, smoothing })
}

/// Π_k (n·e_k)^{m_k} for the basis {e_k}.
pub fn monomial_weight(n: &[i64], m: &[u32], basis: &[Vec<f64>]) -> f64 {
    m.iter().zip(basis).map(|(&mk, e)| dot(n, e).powi(mk as i32)).product()
}

/// Σ_n |ω̂_n|²·|n^m|²·|n·v|^exponent with n^m over the basis {e_k}; |0|^0 = 1.
/// The Fourier side of ‖D^m_E |∂_v|^{exponent/2} ω‖² up to the (2π) factors.
pub fn directional_weighted_norm(w: &FourierField, m: &[u32], basis: &[Vec<f64>], v: &[f64], exponent: f64) -> f64 {
    w.power().map(|(n, p)| p * monomial_weight(n, m, basis).powi(2) * dot(n, v).abs().powf(exponent)).sum()
}

/// Exponent 2/2^k of the k-th step of the Cauchy–Schwarz chain.
pub fn chain_exponent(k: u32) -> f64 {
    2.0 / 2f64.powi(k as i32)
}

/// Coefficient-wise multiplication by |n·v|^β, with |0|^0 = 1.
pub fn fractional_derivative(theta: &FourierField, v: &[f64], beta: f64) -> FourierField {
    theta.map(|n, c| {
        let s = dot(n, v).abs().powf(beta);
        c.iter().map(|z| z * s).collect()
    })
}

/// Threshold below which a mode counts as orthogonal to every v_j.
pub const ORTHOGONAL_TOL: f64 = 1e-14;
/// Relative tolerance within which two |n·v_j| count as tied.
pub const TIE_TOL: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct ThetaDecomposition {
    pub k: u32,
    pub constant: Vec<Complex64>,
    pub thetas: Vec<FourierField>,
    /// ι(n) for each nonzero supported n.
    pub assignment: Vec<(Vec<i64>, usize)>,
}

impl ThetaDecomposition {
    /// ψ̂₀ + Σ_j |∂_{v_j}|^{1/2^k} θ_j.
    pub fn reconstruct(&self, basis: &[Vec<f64>]) -> FourierField {
        let first = &self.thetas[0];
        let mut out = FourierField::new(first.d, first.components);
        out.grid = first.grid;
        if self.constant.iter().any(|z| z.norm() > 0.0) {
            out.add_to(vec![0; first.d], &self.constant);
        }
        let e = 1.0 / 2f64.powi(self.k as i32);
        for (theta, v) in self.thetas.iter().zip(basis) {
            for (n, c) in fractional_derivative(theta, v, e).coeffs {
                out.add_to(n, &c);
            }
        }
        out
    }

    /// ‖θ_j‖_{H^γ} for every j.
    pub fn norms(&self, gamma: f64) -> Vec<f64> {
        self.thetas.iter().map(|t| sobolev_norm(t, gamma)).collect()
    }
}

/// Assigns each nonzero mode to ι(n), the smallest index maximizing |n·v_j|,
/// and divides by |n·v_ι|^{1/2^k}.
pub fn theta_decomposition(psi: &FourierField, basis: &[Vec<f64>], k: u32) -> Result<ThetaDecomposition> {
    if basis.is_empty() {
        return Err(Error::InvalidInput("θ-decomposition needs at least one direction".into()));
    }
    let e = 1.0 / 2f64.powi(k as i32);
    let zero = vec![Complex64::new(0.0, 0.0); psi.components];
    let mut thetas = vec![FourierField { coeffs: Default::default(), ..psi.clone() }; basis.len()];
    let mut assignment = Vec::new();
    let mut constant = zero.clone();
    for (n, c) in &psi.coeffs {
        if n.iter().all(|&x| x == 0) {
            constant = c.clone();
            continue;
        }
        let weights: Vec<f64> = basis.iter().map(|v| dot(n, v).abs()).collect();
        let max = weights.iter().cloned().fold(0.0, f64::max);
        if max <= ORTHOGONAL_TOL {
            if power_at(c) == 0.0 {
                continue;
            }
            return Err(Error::OrthogonalMode { mode: n.clone() });
        }
        let j = weights.iter().position(|&w| w >= max * (1.0 - TIE_TOL)).unwrap();
        let s = weights[j].powf(e);
        thetas[j].coeffs.insert(n.clone(), c.iter().map(|z| z / s).collect());
        assignment.push((n.clone(), j));
    }
    Ok(ThetaDecomposition { k, constant, thetas, assignment })
}

/// Constant C with ‖θ_j‖_{H^{β/2}} ≤ C‖ψ‖_{H^β} whenever Σ_i|n·v_i| ≥ K‖n‖^{−d}
/// on the support and d/2^k ≤ β: |n·v_ι| ≥ K‖n‖^{−d}/dim V gives C = (dim V / K)^{1/2^k}.
pub fn theta_bound_constant(scan_k: f64, dim_v: usize, k: u32) -> f64 {
    (dim_v as f64 / scan_k).powf(1.0 / 2f64.powi(k as i32))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum L2Verdict {
    ConsistentWithL2,
    Growing,
    Inconclusive,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct L2UpgradeReport {
    pub multi_index: Vec<u32>,
    pub beta: f64,
    /// (N, Σ_{‖n‖≤N} ((2π)^{|m|}|n^m||ω̂_n|)²) for N = 1, 2, … up to the support radius.
    pub partial_sums: Vec<(f64, f64)>,
    pub bound: f64,
    pub growth_fit: Option<LineFit>,
    pub verdict: L2Verdict,
}

/// Fitted exponent of the partial sums in N beyond which they count as growing.
pub const GROWTH_EXPONENT: f64 = 0.1;

/// Partial sums of the D^m weighted coefficients over growing balls. The verdict
/// is "growing" when a power law fitted to the last half of the trace has exponent
/// above `GROWTH_EXPONENT`, and "consistent-with-L²" when it does not and the
/// final sum stays within K·‖ω‖_{H^β}.
pub fn l2_upgrade_check(w: &FourierField, m: &[u32], beta: f64, k_bound: f64) -> L2UpgradeReport {
    let order: u32 = m.iter().sum();
    let scale = (2.0 * PI).powi(order as i32);
    let std_basis: Vec<Vec<f64>> = (0..w.d).map(|i| (0..w.d).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect();
    let mut terms: Vec<(f64, f64)> =
        w.power().map(|(n, p)| (norm(n), (scale * monomial_weight(n, m, &std_basis)).powi(2) * p)).collect();
    terms.sort_by(|a, b| a.0.total_cmp(&b.0));
    let radius = terms.last().map(|t| t.0.ceil().max(1.0)).unwrap_or(1.0) as usize;
    let mut partial_sums = Vec::with_capacity(radius);
    let mut acc = 0.0;
    let mut it = terms.iter().peekable();
    for r in 1..=radius {
        while let Some(t) = it.peek() {
            if t.0 <= r as f64 {
                acc += t.1;
                it.next();
            } else {
                break;
            }
        }
        partial_sums.push((r as f64, acc));
    }
    let bound = k_bound * sobolev_norm(w, beta);
    let (lx, ly): (Vec<f64>, Vec<f64>) = partial_sums.iter().filter(|(_, s)| *s > 0.0).map(|(r, s)| (r.ln(), s.ln())).unzip();
    let growth_fit = fit_last_half(&lx, &ly);
    let growing = growth_fit.map_or(false, |f| f.slope > GROWTH_EXPONENT);
    let bounded = acc.sqrt() <= bound * (1.0 + INEQUALITY_SLACK);
    let verdict = match (growing, bounded) {
        (true, _) => L2Verdict::Growing,
        (false, true) => L2Verdict::ConsistentWithL2,
        (false, false) => L2Verdict::Inconclusive,
    };
    L2UpgradeReport { multi_index: m.to_vec(), beta, partial_sums, bound, growth_fit, verdict }
}
