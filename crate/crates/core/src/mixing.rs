//! Correlations ⟨g₁∘L^n, g₂⟩ = ∫ g₁(L^n x)·conj g₂(x) dx of toral automorphisms,
//! computed exactly from coefficient tables: g₁∘L^n has coefficient ĝ₁_m at
//! (Lᵀ)^n m, so corr(n) = Σ_m ĝ₁_m·conj ĝ₂_{(Lᵀ)^n m}.

use num_bigint::BigInt;
use num_complex::Complex64;
use num_traits::ToPrimitive;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classify::classify;
use crate::error::{Error, Result};
use crate::exact_algebra::{big_pow, IntMatrix};
use crate::fit::fit_line;
use crate::harmonic::FourierField;

/// Exact action of (Lᵀ)^n on Z^d; negative n uses the integer inverse.
#[derive(Debug, Clone)]
pub struct Pushforward {
    big: Vec<Vec<BigInt>>,
    small: Option<Vec<Vec<i128>>>,
}

impl Pushforward {
    pub fn new(l: &IntMatrix, n: i64) -> Result<Self> {
        let base = if n < 0 { l.inverse()?.transpose() } else { l.transpose() };
        let big = big_pow(&base.to_big(), n.unsigned_abs());
        // i128 entries bounded by 2^62 keep P·m exact for |m_k| < 2^62 / d.
        let small = big
            .iter()
            .map(|row| row.iter().map(|x| x.to_i128().filter(|v| v.abs() < 1 << 62)).collect::<Option<Vec<_>>>())
            .collect::<Option<Vec<_>>>();
        Ok(Pushforward { big, small })
    }

    /// (Lᵀ)^n m, or None when some entry leaves i64 (such a frequency lies in no finite table).
    pub fn image(&self, m: &[i64]) -> Option<Vec<i64>> {
        if let Some(p) = &self.small {
            if m.iter().all(|x| x.unsigned_abs() < 1 << 32) {
                return p.iter().map(|row| row.iter().zip(m).map(|(&a, &b)| a * b as i128).sum::<i128>().to_i64()).collect();
            }
        }
        self.big.iter().map(|row| row.iter().zip(m).map(|(a, &b)| a * b).sum::<BigInt>().to_i64()).collect()
    }
}

fn check_pair(l: &IntMatrix, g1: &FourierField, g2: &FourierField) -> Result<()> {
    let d = l.dim();
    if g1.d != d || g2.d != d {
        return Err(Error::InvalidInput(format!("fields on T^{} and T^{} for a {d}×{d} matrix", g1.d, g2.d)));
    }
    if g1.components != g2.components {
        return Err(Error::InvalidInput("fields have different component counts".into()));
    }
    Ok(())
}

fn pair_sum(p: &Pushforward, g1: &FourierField, g2: &FourierField, zero_mean: bool) -> Complex64 {
    let mut acc = Complex64::new(0.0, 0.0);
    for (m, a) in &g1.coeffs {
        if zero_mean && m.iter().all(|&x| x == 0) {
            continue;
        }
        if let Some(b) = p.image(m).and_then(|k| g2.get(&k)) {
            acc += a.iter().zip(b).map(|(x, y)| x * y.conj()).sum::<Complex64>();
        }
    }
    acc
}

/// ⟨g₁∘L^n, g₂⟩ summed over components. With `zero_mean` the n-independent
/// product of means ĝ₁_0·conj ĝ₂_0 is left out.
pub fn correlation(l: &IntMatrix, g1: &FourierField, g2: &FourierField, n: i64, zero_mean: bool) -> Result<Complex64> {
    check_pair(l, g1, g2)?;
    Ok(pair_sum(&Pushforward::new(l, n)?, g1, g2, zero_mean))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationRow {
    pub n: i64,
    pub re: f64,
    pub im: f64,
    pub abs: f64,
    /// Bound on |corr(n)| − |corr of the untruncated series|; 0 for trigonometric polynomials.
    pub tail_bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationTrace {
    pub matrix: Vec<Vec<i64>>,
    pub zero_mean: bool,
    pub rows: Vec<CorrelationRow>,
}

impl CorrelationTrace {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("n,re,im,abs,tail_bound\n");
        for r in &self.rows {
            out.push_str(&format!("{},{},{},{},{}\n", r.n, r.re, r.im, r.abs, r.tail_bound));
        }
        out
    }
}

/// Correlations of two trigonometric polynomials over n_min..=n_max.
pub fn correlation_trace(
    l: &IntMatrix,
    g1: &FourierField,
    g2: &FourierField,
    n_min: i64,
    n_max: i64,
    zero_mean: bool,
) -> Result<CorrelationTrace> {
    check_pair(l, g1, g2)?;
    let rows = (n_min..=n_max)
        .map(|n| {
            let c = pair_sum(&Pushforward::new(l, n)?, g1, g2, zero_mean);
            Ok(CorrelationRow { n, re: c.re, im: c.im, abs: c.norm(), tail_bound: 0.0 })
        })
        .collect::<Result<_>>()?;
    Ok(CorrelationTrace { matrix: l.rows().to_vec(), zero_mean, rows })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayFitConfig {
    pub alpha: f64,
    pub trials: usize,
    pub n_max: usize,
    /// Truncation radius of the test series; None picks about 2·10⁶ box slots.
    pub radius: Option<u32>,
    pub seed: u64,
}

impl Default for DecayFitConfig {
    fn default() -> Self {
        DecayFitConfig { alpha: 0.5, trials: 4, n_max: 10, radius: None, seed: 0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayRow {
    pub n: usize,
    pub max_abs_corr: f64,
    pub tail_bound: f64,
    pub in_fit: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub alpha: f64,
    pub radius: u32,
    /// max over trials |corr(n)| ≈ C·e^{−γn} on the fitted range.
    pub gamma: f64,
    pub c: f64,
    pub r2: f64,
    /// γ ± 2 standard errors of the fitted slope.
    pub gamma_band: (f64, f64),
    pub fit_range: (usize, usize),
    /// First n at which no pair (m, (Lᵀ)^n m) stays inside the truncation ball.
    pub exact_zero_from: Option<usize>,
    /// ℓ² norm bound of the discarded coefficients of each test series.
    pub outer_l2_tail: f64,
    pub rows: Vec<DecayRow>,
}

impl DecayFit {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("n,max_abs_corr,tail_bound,in_fit\n");
        for r in &self.rows {
            out.push_str(&format!("{},{},{},{}\n", r.n, r.max_abs_corr, r.tail_bound, r.in_fit));
        }
        out
    }
}

/// Surface area of the unit sphere in R^d.
fn sphere_area(d: usize) -> f64 {
    match d {
        1 => 2.0,
        2 => 2.0 * std::f64::consts::PI,
        _ => 2.0 * std::f64::consts::PI / (d - 2) as f64 * sphere_area(d - 2),
    }
}

/// Upper bound on Σ_{‖n‖>R} ‖n‖^{−p} for p > d. Each lattice point is charged
/// to its unit cube, on which ‖x‖ − √d/2 ≤ ‖n‖, giving
/// S_{d−1}·∫_{R−√d}^∞ (u + √d/2)^{d−1} u^{−p} du, expanded binomially.
pub fn lattice_tail_bound(d: usize, radius: f64, p: f64) -> f64 {
    let s = (d as f64).sqrt() / 2.0;
    let a = radius - 2.0 * s;
    assert!(a > 0.0 && p > d as f64, "tail bound needs R > √d and p > d");
    let mut binom = 1.0;
    let mut total = 0.0;
    for j in 0..d {
        let e = j as f64 - p;
        total += binom * s.powi((d - 1 - j) as i32) * a.powf(e + 1.0) / -(e + 1.0);
        binom = binom * (d - 1 - j) as f64 / (j + 1) as f64;
    }
    sphere_area(d) * total
}

/// Lattice points 0 < ‖m‖ ≤ R in a dense box index.
struct Ball {
    d: usize,
    r: i64,
    points: Vec<i64>,
    weights: Vec<f64>,
    slot: Vec<u32>,
}

const NONE: u32 = u32::MAX;

impl Ball {
    fn new(d: usize, r: i64, p: f64) -> Self {
        let side = (2 * r + 1) as usize;
        let total = side.pow(d as u32);
        let mut slot = vec![NONE; total];
        let mut points = Vec::new();
        let mut weights = Vec::new();
        let r2 = r * r;
        let mut m = vec![0i64; d];
        for (b, s) in slot.iter_mut().enumerate() {
            let mut q = b;
            for x in m.iter_mut() {
                *x = (q % side) as i64 - r;
                q /= side;
            }
            let n2: i64 = m.iter().map(|x| x * x).sum();
            if n2 > 0 && n2 <= r2 {
                *s = weights.len() as u32;
                points.extend_from_slice(&m);
                weights.push((n2 as f64).powf(-p / 2.0));
            }
        }
        Ball { d, r, points, weights, slot }
    }

    fn len(&self) -> usize {
        self.weights.len()
    }

    fn point(&self, i: usize) -> &[i64] {
        &self.points[i * self.d..(i + 1) * self.d]
    }

    fn index(&self, m: &[i64]) -> u32 {
        if m.iter().any(|x| x.abs() > self.r) {
            return NONE;
        }
        let side = 2 * self.r + 1;
        let b = m.iter().rev().fold(0i64, |acc, &x| acc * side + x + self.r);
        self.slot[b as usize]
    }

    /// Ball slot of P·m for every ball point, plus the crossing sums
    /// (Σ w_m², Σ ‖Pm‖^{−p·2}) over the points whose image leaves the ball.
    fn images(&self, p: &Pushforward, pw: f64) -> (Vec<u32>, f64, f64) {
        let per: Vec<(u32, f64, f64)> = (0..self.len())
            .into_par_iter()
            .map(|i| match p.image(self.point(i)) {
                Some(k) => match self.index(&k) {
                    NONE => {
                        let n2: f64 = k.iter().map(|&x| (x as f64) * (x as f64)).sum();
                        (NONE, self.weights[i].powi(2), n2.powf(-pw))
                    }
                    j => (j, 0.0, 0.0),
                },
                None => (NONE, self.weights[i].powi(2), 0.0),
            })
            .collect();
        let x2 = per.iter().map(|t| t.1).sum();
        let y2 = per.iter().map(|t| t.2).sum();
        (per.into_iter().map(|t| t.0).collect(), x2, y2)
    }

    /// Random unit phases with ph(−m) = conj ph(m), so the series is real.
    fn phases(&self, seed: u64) -> Vec<Complex64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut out = vec![Complex64::new(0.0, 0.0); self.len()];
        for i in 0..self.len() {
            let m = self.point(i);
            if m.iter().find(|&&x| x != 0).is_some_and(|&x| x > 0) {
                let z = Complex64::from_polar(1.0, rng.gen_range(0.0..std::f64::consts::TAU));
                let neg: Vec<i64> = m.iter().map(|x| -x).collect();
                out[i] = z;
                out[self.index(&neg) as usize] = z.conj();
            }
        }
        out
    }
}

/// Empirical exponential decay rate of correlations for L.
///
/// Test functions are real random-phase series Σ_{m≠0} ‖m‖^{−(d/2+α)} e^{iφ_m} e_m
/// truncated to ‖m‖ ≤ R, independent for g₁ and g₂ and for every trial. With
/// P = (Lᵀ)^n, the pairs (m, Pm) dropped by truncation are bounded by
/// Cauchy–Schwarz in three groups: m inside and Pm outside, summed exactly over
/// the ball; m outside and Pm inside, the same with P⁻¹; both outside, by the
/// square of the ℓ² tail t. The fit covers the initial n where the max over
/// trials exceeds that bound.
pub fn decay_fit(l: &IntMatrix, cfg: &DecayFitConfig) -> Result<DecayFit> {
    if !(cfg.alpha > 0.0) || cfg.trials == 0 || cfg.n_max < 2 {
        return Err(Error::InvalidInput("decay_fit needs α > 0, trials ≥ 1 and n_max ≥ 2".into()));
    }
    let c = classify(l)?;
    if !c.ergodic {
        return Err(Error::NotErgodic { m: c.cyclotomic_order.unwrap_or(1) });
    }
    let d = l.dim();
    let radius = cfg.radius.unwrap_or_else(|| ((2.0e6f64).powf(1.0 / d as f64) / 2.0).floor() as u32);
    if (radius as f64) <= (d as f64).sqrt() + 1.0 {
        return Err(Error::InvalidInput(format!("truncation radius {radius} too small for d = {d}")));
    }
    let p = d as f64 / 2.0 + cfg.alpha;
    let ball = Ball::new(d, radius as i64, p);
    let outer = lattice_tail_bound(d, radius as f64, 2.0 * p).sqrt();

    let mut images = Vec::with_capacity(cfg.n_max + 1);
    let mut tails = Vec::with_capacity(cfg.n_max + 1);
    let mut exact_zero_from = None;
    for n in 0..=cfg.n_max as i64 {
        let (fwd, xf, yf) = ball.images(&Pushforward::new(l, n)?, p);
        let (_, xb, yb) = ball.images(&Pushforward::new(l, -n)?, p);
        tails.push((xf * yf).sqrt() + (xb * yb).sqrt() + outer * outer);
        if exact_zero_from.is_none() && fwd.iter().all(|&j| j == NONE) {
            exact_zero_from = Some(n as usize);
        }
        images.push(fwd);
    }

    let per_trial: Vec<Vec<f64>> = (0..cfg.trials)
        .into_par_iter()
        .map(|t| {
            let a = ball.phases(cfg.seed.wrapping_mul(0x9E37_79B9).wrapping_add(2 * t as u64));
            let b = ball.phases(cfg.seed.wrapping_mul(0x9E37_79B9).wrapping_add(2 * t as u64 + 1));
            images
                .iter()
                .map(|img| {
                    let mut acc = Complex64::new(0.0, 0.0);
                    for (i, &j) in img.iter().enumerate() {
                        if j != NONE {
                            let w = ball.weights[i] * ball.weights[j as usize];
                            acc += a[i] * b[j as usize].conj() * w;
                        }
                    }
                    acc.norm()
                })
                .collect()
        })
        .collect();
    let max_abs: Vec<f64> = (0..=cfg.n_max).map(|n| per_trial.iter().map(|v| v[n]).fold(0.0, f64::max)).collect();

    let end = (0..=cfg.n_max).find(|&n| !(max_abs[n] > tails[n])).unwrap_or(cfg.n_max + 1);
    let rows: Vec<DecayRow> =
        (0..=cfg.n_max).map(|n| DecayRow { n, max_abs_corr: max_abs[n], tail_bound: tails[n], in_fit: n < end }).collect();
    if end < 3 {
        return Err(Error::SignalBelowTail);
    }
    let x: Vec<f64> = (0..end).map(|n| n as f64).collect();
    let y: Vec<f64> = (0..end).map(|n| max_abs[n].ln()).collect();
    let fit = fit_line(&x, &y).ok_or(Error::SignalBelowTail)?;
    let gamma = -fit.slope;
    let half = 2.0 * fit.slope_stderr.unwrap_or(f64::INFINITY);
    Ok(DecayFit {
        alpha: cfg.alpha,
        radius,
        gamma,
        c: fit.intercept.exp(),
        r2: fit.r2,
        gamma_band: (gamma - half, gamma + half),
        fit_range: (0, end - 1),
        exact_zero_from,
        outer_l2_tail: outer,
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn cat() -> IntMatrix {
        IntMatrix::new(vec![vec![2, 1], vec![1, 1]]).unwrap()
    }

    fn cos1() -> FourierField {
        FourierField::scalar(2, [(vec![1, 0], Complex64::new(0.5, 0.0)), (vec![-1, 0], Complex64::new(0.5, 0.0))])
    }

    fn field(d: usize, modes: &[(Vec<i64>, f64, f64)]) -> FourierField {
        FourierField::scalar(d, modes.iter().map(|(n, a, b)| (n.clone(), Complex64::new(*a, *b))))
    }

    #[test]
    fn cos_pair_examples() {
        let c0 = correlation(&cat(), &cos1(), &cos1(), 0, false).unwrap();
        assert_eq!(c0, Complex64::new(0.5, 0.0));
        for n in 1..=50 {
            assert_eq!(correlation(&cat(), &cos1(), &cos1(), n, true).unwrap(), Complex64::new(0.0, 0.0));
        }
    }

    #[test]
    fn constants_are_orthogonal_to_zero_mean_fields() {
        let one = field(2, &[(vec![0, 0], 1.0, 0.0)]);
        let g = field(2, &[(vec![1, 2], 0.3, 0.1), (vec![-1, -2], 0.3, -0.1), (vec![3, -1], 0.0, 0.5), (vec![-3, 1], 0.0, -0.5)]);
        for n in -5..=5 {
            assert_eq!(correlation(&cat(), &g, &one, n, false).unwrap().norm(), 0.0);
        }
    }

    #[test]
    fn pushforward_matches_hand_computation() {
        let p = Pushforward::new(&cat(), 1).unwrap();
        assert_eq!(p.image(&[1, 0]), Some(vec![2, 1]));
        let q = Pushforward::new(&cat(), -1).unwrap();
        assert_eq!(q.image(&[2, 1]), Some(vec![1, 0]));
        // (Lᵀ)^200 has entries far beyond i64; the image of (1,0) is not representable.
        assert_eq!(Pushforward::new(&cat(), 200).unwrap().image(&[1, 0]), None);
    }

    #[test]
    fn single_mode_pair_is_an_indicator() {
        // e_a∘L^n = e_{(Lᵀ)^n a}; corr is 1 exactly when (Lᵀ)^n a = b.
        let a = field(2, &[(vec![1, 0], 1.0, 0.0)]);
        let b = field(2, &[(vec![5, 3], 1.0, 0.0)]);
        let hits: Vec<i64> = (-4..=4).filter(|&n| correlation(&cat(), &a, &b, n, false).unwrap().norm() > 0.0).collect();
        assert_eq!(hits, vec![2]);
    }

    #[test]
    fn non_ergodic_is_rejected() {
        let l = IntMatrix::block_diag(&[cat(), IntMatrix::new(vec![vec![0, -1], vec![1, 0]]).unwrap()]);
        assert!(matches!(decay_fit(&l, &DecayFitConfig::default()), Err(Error::NotErgodic { m: 4 })));
    }

    #[test]
    fn tail_bound_dominates_direct_sum() {
        for (d, r, p) in [(2usize, 6.0, 3.0), (2, 12.0, 2.5), (3, 5.0, 4.0)] {
            // Partial sum over a finite box: a lower bound for the infinite tail.
            let big = 200i64 / d as i64;
            let side = (2 * big + 1) as usize;
            let direct: f64 = (0..side.pow(d as u32))
                .map(|mut q| {
                    let n2: i64 = (0..d)
                        .map(|_| {
                            let x = (q % side) as i64 - big;
                            q /= side;
                            x * x
                        })
                        .sum();
                    if (n2 as f64).sqrt() > r {
                        (n2 as f64).powf(-p / 2.0)
                    } else {
                        0.0
                    }
                })
                .sum();
            assert!(lattice_tail_bound(d, r, p) >= direct, "d={d} r={r} p={p}");
        }
    }

    #[test]
    fn cat_map_decay_fit() {
        let fit = decay_fit(&cat(), &DecayFitConfig { radius: Some(300), ..DecayFitConfig::default() }).unwrap();
        assert!(fit.gamma > 0.0, "{fit:?}");
        assert!(fit.fit_range.1 >= 2);
        assert!(fit.rows.iter().filter(|r| r.in_fit).all(|r| r.max_abs_corr > r.tail_bound));
    }

    fn arb_field() -> impl Strategy<Value = FourierField> {
        prop::collection::vec(((-4i64..=4, -4i64..=4), -1.0f64..1.0, -1.0f64..1.0), 1..12)
            .prop_map(|v| field(2, &v.into_iter().map(|((a, b), x, y)| (vec![a, b], x, y)).collect::<Vec<_>>()))
    }

    proptest! {
        #[test]
        fn reversal_identity(g1 in arb_field(), g2 in arb_field(), n in -6i64..=6) {
            // corr(L, g₁, g₂, n) = conj corr(L⁻¹, g₂, g₁, n) = conj corr(L, g₂, g₁, −n).
            let l = cat();
            let li = l.inverse().unwrap();
            let a = correlation(&l, &g1, &g2, n, false).unwrap();
            let b = correlation(&li, &g2, &g1, n, false).unwrap().conj();
            let c = correlation(&l, &g2, &g1, -n, false).unwrap().conj();
            prop_assert!((a - b).norm() <= 1e-12 && (a - c).norm() <= 1e-12);
        }

        #[test]
        fn crude_bound(g1 in arb_field(), g2 in arb_field(), n in -6i64..=6) {
            let l1: f64 = g1.coeffs.values().map(|c| c[0].norm()).sum();
            let sup2 = g2.coeffs.values().map(|c| c[0].norm()).fold(0.0, f64::max);
            prop_assert!(correlation(&cat(), &g1, &g2, n, false).unwrap().norm() <= l1 * sup2 * (1.0 + 1e-12));
        }
    }
}
