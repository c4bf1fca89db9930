//! Truncated jets of one-dimensional maps, composed by Faà di Bruno's formula,
//! and derivative-growth tables for iterated leaf maps.

use std::ops::{Add, Mul};
use std::sync::OnceLock;

use num_rational::BigRational;
use num_traits::{One, Zero};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fit::fit_last_half;

/// Scalars a jet can carry: f64 for computation, BigRational for exact checks.
pub trait JetScalar: Clone + Zero + One + Add<Output = Self> + Mul<Output = Self> {
    fn from_count(c: u128) -> Self;
}

impl JetScalar for f64 {
    fn from_count(c: u128) -> Self {
        c as f64
    }
}

impl JetScalar for BigRational {
    fn from_count(c: u128) -> Self {
        BigRational::from_integer(c.into())
    }
}

/// Value and derivatives 1..=order of a map at a base point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Jet<T = f64> {
    pub value: T,
    pub derivs: Vec<T>,
}

impl<T: JetScalar> Jet<T> {
    pub fn new(value: T, derivs: Vec<T>) -> Self {
        Jet { value, derivs }
    }

    pub fn order(&self) -> usize {
        self.derivs.len()
    }

    /// The identity map at x.
    pub fn identity(x: T, order: usize) -> Self {
        let mut derivs = vec![T::zero(); order];
        if order > 0 {
            derivs[0] = T::one();
        }
        Jet { value: x, derivs }
    }

    /// k-th derivative, k = 0 being the value.
    pub fn d(&self, k: usize) -> &T {
        if k == 0 {
            &self.value
        } else {
            &self.derivs[k - 1]
        }
    }

    /// Leibniz rule for the pointwise product.
    pub fn mul(&self, other: &Jet<T>) -> Jet<T> {
        assert_eq!(self.order(), other.order(), "jets must have equal order");
        let m = self.order();
        let binom = binomials(m);
        let term = |n: usize| {
            (0..=n).fold(T::zero(), |acc, k| acc + T::from_count(binom[n][k]) * self.d(k).clone() * other.d(n - k).clone())
        };
        Jet { value: term(0), derivs: (1..=m).map(term).collect() }
    }
}

fn binomials(m: usize) -> Vec<Vec<u128>> {
    let mut b = vec![vec![0u128; m + 1]; m + 1];
    for n in 0..=m {
        b[n][0] = 1;
        for k in 1..=n {
            b[n][k] = b[n - 1][k - 1] + if k < n { b[n - 1][k] } else { 0 };
        }
    }
    b
}

/// One partition of n with multiplicities k_j of part j (Σ j·k_j = n), its
/// number of parts and the coefficient n! / Π k_j!·(j!)^{k_j}.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PartitionTerm {
    pub multiplicities: Vec<(usize, u32)>,
    pub parts: usize,
    pub coefficient: u128,
}

/// Partition tables up to this order are built once and shared.
pub const CACHED_ORDER: usize = 8;

fn factorial(n: usize) -> u128 {
    (1..=n as u128).product()
}

fn partitions_of(n: usize) -> Vec<PartitionTerm> {
    // Partitions as nonincreasing part lists, generated by choosing the largest part.
    fn rec(n: usize, max: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if n == 0 {
            out.push(cur.clone());
            return;
        }
        for p in (1..=max.min(n)).rev() {
            cur.push(p);
            rec(n - p, p, cur, out);
            cur.pop();
        }
    }
    let mut lists = Vec::new();
    rec(n, n, &mut Vec::new(), &mut lists);
    lists
        .into_iter()
        .map(|parts| {
            let mut mult: Vec<(usize, u32)> = Vec::new();
            for &p in parts.iter().rev() {
                match mult.last_mut() {
                    Some((q, k)) if *q == p => *k += 1,
                    _ => mult.push((p, 1)),
                }
            }
            let denom: u128 = mult.iter().map(|&(j, k)| factorial(k as usize) * factorial(j).pow(k)).product();
            PartitionTerm { parts: parts.len(), coefficient: factorial(n) / denom, multiplicities: mult }
        })
        .collect()
}

/// Faà di Bruno terms for the n-th derivative.
pub fn partition_terms(n: usize) -> std::borrow::Cow<'static, [PartitionTerm]> {
    static CACHE: OnceLock<Vec<Vec<PartitionTerm>>> = OnceLock::new();
    if n <= CACHED_ORDER {
        let table = CACHE.get_or_init(|| (0..=CACHED_ORDER).map(partitions_of).collect());
        std::borrow::Cow::Borrowed(&table[n])
    } else {
        std::borrow::Cow::Owned(partitions_of(n))
    }
}

/// Jet of outer∘inner at the base point of `inner`; `outer` must be the jet at inner's value.
pub fn compose<T: JetScalar>(outer: &Jet<T>, inner: &Jet<T>) -> Jet<T> {
    assert_eq!(outer.order(), inner.order(), "jets must have equal order");
    let derivs = (1..=inner.order())
        .map(|n| {
            partition_terms(n).iter().fold(T::zero(), |acc, p| {
                let mut t = T::from_count(p.coefficient) * outer.derivs[p.parts - 1].clone();
                for &(j, k) in &p.multiplicities {
                    for _ in 0..k {
                        t = t * inner.derivs[j - 1].clone();
                    }
                }
                acc + t
            })
        })
        .collect();
    Jet { value: outer.value.clone(), derivs }
}

/// Trigonometric polynomial φ(x) = Σ a_k sin(2πkx) + b_k cos(2πkx).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trig {
    pub modes: Vec<(u32, f64, f64)>,
}

impl Trig {
    pub fn sin1(a: f64) -> Self {
        Trig { modes: vec![(1, a, 0.0)] }
    }

    pub fn cos1(b: f64) -> Self {
        Trig { modes: vec![(1, 0.0, b)] }
    }

    /// φ^{(j)}(x) for j = 0..=m.
    fn derivatives(&self, x: f64, m: usize) -> Vec<f64> {
        let tau = std::f64::consts::TAU;
        (0..=m)
            .map(|j| {
                let shift = j as f64 * std::f64::consts::FRAC_PI_2;
                self.modes
                    .iter()
                    .map(|&(k, a, b)| {
                        let w = tau * k as f64;
                        w.powi(j as i32) * (a * (w * x + shift).sin() + b * (w * x + shift).cos())
                    })
                    .sum()
            })
            .collect()
    }

    /// Upper bound on sup|φ^{(j)}|.
    fn sup_bound(&self, j: usize) -> f64 {
        self.modes.iter().map(|&(k, a, b)| (std::f64::consts::TAU * k as f64).powi(j as i32) * (a.abs() + b.abs())).sum()
    }
}

/// Leaf map x ↦ σx + ε·φ(x) on R.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeafMap {
    pub sigma: f64,
    pub eps: f64,
    pub phi: Trig,
}

impl LeafMap {
    pub fn new(sigma: f64, eps: f64, phi: Trig) -> Self {
        LeafMap { sigma, eps, phi }
    }

    pub fn jet(&self, x: f64, m: usize) -> Jet {
        let p = self.phi.derivatives(x, m);
        let mut derivs: Vec<f64> = p[1..].iter().map(|v| self.eps * v).collect();
        if m > 0 {
            derivs[0] += self.sigma;
        }
        Jet { value: self.sigma * x + self.eps * p[0], derivs }
    }

    /// Bound on sup|g′| from the coefficients: |σ| + |ε|·Σ 2πk(|a_k| + |b_k|).
    pub fn sup_derivative(&self) -> f64 {
        self.sigma.abs() + self.eps.abs() * self.phi.sup_bound(1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GrowthKind {
    /// ‖D^m g^n‖ ≤ C(σ̄+δ)^n.
    Contracting,
    /// ‖D^m g^n‖ ≤ C(σ̄^m+δ)^n.
    Expanding,
    /// ‖D^m_x ∂_y g^n‖ ≤ K(λ̄+δ)^n.
    TwoRate,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GrowthRow {
    pub m: usize,
    pub n: usize,
    pub sup: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrderSummary {
    pub m: usize,
    /// Per-step growth fitted on the last half of n; None when the entries vanish.
    pub fitted_base: Option<f64>,
    pub bound_base: f64,
    /// max_{n ≤ n_max/2} sup(n) / bound_base^n.
    pub constant: f64,
    /// sup(n) ≤ constant·bound_base^n for every n ≤ n_max.
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrowthTable {
    pub kind: GrowthKind,
    pub rate: f64,
    pub delta: f64,
    pub rows: Vec<GrowthRow>,
    pub orders: Vec<OrderSummary>,
}

impl GrowthTable {
    pub fn sup(&self, m: usize, n: usize) -> f64 {
        self.rows.iter().find(|r| r.m == m && r.n == n).map_or(f64::NAN, |r| r.sup)
    }

    pub fn holds(&self) -> bool {
        self.orders.iter().all(|o| o.holds)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("m,n,sup,bound_base,constant\n");
        for r in &self.rows {
            let o = self.orders.iter().find(|o| o.m == r.m).expect("summary per order");
            out.push_str(&format!("{},{},{},{},{}\n", r.m, r.n, r.sup, o.bound_base, o.constant));
        }
        out
    }
}

/// Sample count over one period of the base point.
pub const DEFAULT_SAMPLES: usize = 64;

fn summarize(m: usize, sups: &[f64], bound_base: f64) -> OrderSummary {
    let n_max = sups.len() - 1;
    let ratio = |n: usize| sups[n] / bound_base.powi(n as i32);
    let constant = (0..=n_max / 2).map(ratio).fold(0.0, f64::max);
    let holds = (0..=n_max).all(|n| sups[n] <= constant * bound_base.powi(n as i32) * (1.0 + 1e-9));
    let (x, y): (Vec<f64>, Vec<f64>) = (0..=n_max).filter(|&n| sups[n] > 0.0).map(|n| (n as f64, sups[n].ln())).unzip();
    let fitted_base = fit_last_half(&x, &y).map(|f| f.slope.exp());
    OrderSummary { m, fitted_base, bound_base, constant, holds }
}

fn check_sizes(n_max: usize, m_max: usize, samples: usize) -> Result<()> {
    if n_max < 2 || m_max == 0 || samples == 0 {
        return Err(Error::InvalidInput("growth tables need n_max ≥ 2, m_max ≥ 1 and samples ≥ 1".into()));
    }
    Ok(())
}

/// sup over base points in [0,1) of |D^m g^n| for 1 ≤ m ≤ m_max, 0 ≤ n ≤ n_max.
/// The bound's constant is calibrated on n ≤ n_max/2 and checked on all n.
pub fn iterate_growth(g: &LeafMap, n_max: usize, m_max: usize, delta: f64, samples: usize) -> Result<GrowthTable> {
    check_sizes(n_max, m_max, samples)?;
    let rate = g.sup_derivative();
    let kind = if rate < 1.0 { GrowthKind::Contracting } else { GrowthKind::Expanding };
    let per_point: Vec<Vec<Vec<f64>>> = (0..samples)
        .into_par_iter()
        .map(|s| {
            let mut j = Jet::identity(s as f64 / samples as f64, m_max);
            let mut out = vec![j.derivs.iter().map(|v| v.abs()).collect::<Vec<_>>()];
            for _ in 0..n_max {
                j = compose(&g.jet(j.value, m_max), &j);
                out.push(j.derivs.iter().map(|v| v.abs()).collect());
            }
            out
        })
        .collect();
    let mut rows = Vec::new();
    let mut orders = Vec::new();
    for m in 1..=m_max {
        let sups: Vec<f64> = (0..=n_max).map(|n| per_point.iter().map(|p| p[n][m - 1]).fold(0.0, f64::max)).collect();
        let bound_base = match kind {
            GrowthKind::Contracting => rate + delta,
            _ => rate.powi(m as i32) + delta,
        };
        rows.extend(sups.iter().enumerate().map(|(n, &sup)| GrowthRow { m, n, sup }));
        orders.push(summarize(m, &sups, bound_base));
    }
    Ok(GrowthTable { kind, rate, delta, rows, orders })
}

/// Block-triangular model (x, y) ↦ (g_W(x), λ(x)·y). Here ∂_y g^n = Π_{i<n} λ(g_W^i x).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwoRateMap {
    pub leaf: LeafMap,
    pub lambda0: f64,
    pub lambda_phi: Trig,
}

impl TwoRateMap {
    fn lambda_jet(&self, x: f64, m: usize) -> Jet {
        let p = self.lambda_phi.derivatives(x, m);
        Jet { value: self.lambda0 + p[0], derivs: p[1..].to_vec() }
    }

    /// Bound on sup|λ|.
    pub fn sup_lambda(&self) -> f64 {
        self.lambda0.abs() + self.lambda_phi.sup_bound(0)
    }
}

/// sup over base points of |D^m_x(∂_y g^n)| for 0 ≤ m ≤ m_max against K(λ̄+δ)^n.
pub fn two_rate_growth(map: &TwoRateMap, n_max: usize, m_max: usize, delta: f64, samples: usize) -> Result<GrowthTable> {
    check_sizes(n_max, m_max, samples)?;
    let rate = map.sup_lambda();
    let per_point: Vec<Vec<Vec<f64>>> = (0..samples)
        .into_par_iter()
        .map(|s| {
            let x0 = s as f64 / samples as f64;
            let mut orbit = Jet::identity(x0, m_max);
            let mut prod = Jet::new(1.0, vec![0.0; m_max]);
            let abs = |j: &Jet| (0..=m_max).map(|k| j.d(k).abs()).collect::<Vec<_>>();
            let mut out = vec![abs(&prod)];
            for _ in 0..n_max {
                let lam = compose(&map.lambda_jet(orbit.value, m_max), &orbit);
                prod = prod.mul(&lam);
                orbit = compose(&map.leaf.jet(orbit.value, m_max), &orbit);
                out.push(abs(&prod));
            }
            out
        })
        .collect();
    let mut rows = Vec::new();
    let mut orders = Vec::new();
    for m in 0..=m_max {
        let sups: Vec<f64> = (0..=n_max).map(|n| per_point.iter().map(|p| p[n][m]).fold(0.0, f64::max)).collect();
        rows.extend(sups.iter().enumerate().map(|(n, &sup)| GrowthRow { m, n, sup }));
        orders.push(summarize(m, &sups, rate + delta));
    }
    Ok(GrowthTable { kind: GrowthKind::TwoRate, rate, delta, rows, orders })
}
