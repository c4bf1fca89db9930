//! Solvers for the projected cohomological equations L h − h∘f = R and
//! assembly of the conjugacy H = Id + h with L∘H = H∘f.
//!
//! Unstable and stable parts are fixed points of contractions on the grid
//! (h∘f by trigonometric interpolation at f(grid)). The center part is the
//! series −Σ L_c^{k−1} R_c∘f^{−k}, summed coefficient-wise by transporting
//! Fourier coefficients with the Koopman operator φ ↦ φ∘f⁻¹ restricted to a
//! working ball of frequencies.

use std::collections::HashMap;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fit::{fit_last_half, fit_line};
use crate::harmonic::{analyze, fft_nd, freq_to_index, norm, synthesize, FourierField, GridField, SpectralInterpolant};
use crate::spectral::{Decomposition, SpectralSplitting};
use crate::torus_maps::{mat_vec, reduce, torus_dist, TorusMap};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub grid: usize,
    pub tol: f64,
    pub max_iterations: usize,
    /// Raise GridTooCoarse when the solution's outer-band coefficients exceed tol.
    pub strict_grid: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig { grid: 128, tol: 1e-10, max_iterations: 2000, strict_grid: true }
    }
}

/// One solved component: values in R^d lying in the component's subspace.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ComponentSolution {
    pub field: GridField,
    pub iterations: usize,
    pub last_update: f64,
    /// Geometric rate of the update norms fitted over the last half of the run.
    pub contraction_ratio: f64,
    /// Largest single-step ratio of update norms; interpolation overshoot lets it exceed the rate.
    pub max_step_ratio: f64,
    /// Largest coefficient magnitude in the outer band ‖n‖∞ ≥ 3N/8 of the solution.
    pub interpolation_residual: f64,
    pub update_norms: Vec<f64>,
}

/// Coordinates of one invariant part: T (d×k basis), P (k×d coordinate map),
/// A = P L T and its inverse.
struct Part {
    t: DMatrix<f64>,
    p: DMatrix<f64>,
    a: DMatrix<f64>,
    a_inv: DMatrix<f64>,
}

impl Part {
    fn new(dec: &Decomposition, k: usize, l: &DMatrix<f64>) -> Result<Part> {
        let r = dec.ranges[k].clone();
        if r.is_empty() {
            return Err(Error::InvalidInput("requested invariant subspace is trivial".into()));
        }
        let t = dec.t.columns(r.start, r.len()).into_owned();
        let p = dec.t_inv.rows(r.start, r.len()).into_owned();
        let a = &p * l * &t;
        let a_inv = a.clone().try_inverse().ok_or_else(|| Error::InvalidInput("singular restriction".into()))?;
        Ok(Part { t, p, a, a_inv })
    }

    fn dim(&self) -> usize {
        self.t.ncols()
    }

    fn coords(&self, x: &[f64]) -> Vec<f64> {
        mat_vec(&self.p, x)
    }

    /// Values T·y on the grid.
    fn embed(&self, y: &GridField) -> GridField {
        let d = self.t.nrows();
        let flat: Vec<f64> = (0..d).flat_map(|i| (0..self.dim()).map(move |j| (i, j))).map(|(i, j)| self.t[(i, j)]).collect();
        y.map_values(d, &flat)
    }
}

fn grid_points(d: usize, n: usize) -> Vec<Vec<f64>> {
    let g = GridField::zeros(d, n, 0);
    (0..g.num_points()).map(|p| g.point(p)).collect()
}

fn to_field(d: usize, n: usize, values: &[Vec<f64>]) -> GridField {
    let k = values.first().map_or(0, |v| v.len());
    GridField { d, n, components: k, data: values.iter().flatten().cloned().collect() }
}

fn outer_band_max(y: &GridField) -> f64 {
    let band = (3 * y.n / 8) as i64;
    analyze(y).power().filter(|(n, _)| n.iter().any(|k| k.abs() >= band)).map(|(_, p)| p.sqrt()).fold(0.0, f64::max)
}

/// y ← M·y(targets) + offset until the sup-norm update drops below tol.
fn iterate(
    d: usize,
    n: usize,
    m: &DMatrix<f64>,
    targets: &[Vec<f64>],
    offset: &[Vec<f64>],
    cfg: &SolverConfig,
) -> Result<(GridField, usize, f64, Vec<f64>)> {
    let k = m.nrows();
    let mut y = to_field(d, n, &vec![vec![0.0; k]; targets.len()]);
    let mut updates = Vec::new();
    for it in 1..=cfg.max_iterations {
        let composed = SpectralInterpolant::from_grid(&y).eval_many(targets);
        let next: Vec<Vec<f64>> =
            composed.par_iter().zip(offset).map(|(z, c)| mat_vec(m, z).iter().zip(c).map(|(a, b)| a + b).collect()).collect();
        let next = to_field(d, n, &next);
        let update = next.sub(&y).sup_norm();
        y = next;
        updates.push(update);
        if update < cfg.tol {
            return Ok((y, it, update, updates));
        }
        let growing = updates.len() > 20 && updates[updates.len() - 20..].windows(2).all(|w| w[1] > w[0]);
        if !update.is_finite() || growing {
            return Err(Error::NoConvergence { iterations: it, last_update: update });
        }
    }
    Err(Error::NoConvergence { iterations: cfg.max_iterations, last_update: *updates.last().unwrap_or(&f64::NAN) })
}

fn finish(
    part: &Part,
    (y, iterations, last_update, update_norms): (GridField, usize, f64, Vec<f64>),
    cfg: &SolverConfig,
) -> Result<ComponentSolution> {
    let interpolation_residual = outer_band_max(&y);
    if cfg.strict_grid && interpolation_residual > cfg.tol {
        return Err(Error::GridTooCoarse { residual: interpolation_residual, tol: cfg.tol });
    }
    // Updates within a decade of tol are roundoff-dominated and left out of both ratios.
    let usable: Vec<(f64, f64)> =
        update_norms.iter().enumerate().filter(|(_, &u)| u > 10.0 * cfg.tol).map(|(i, &u)| (i as f64, u.ln())).collect();
    let (x, ly): (Vec<f64>, Vec<f64>) = usable.iter().cloned().unzip();
    let contraction_ratio = fit_last_half(&x, &ly).map_or(0.0, |f| f.slope.exp());
    let max_step_ratio = usable.windows(2).map(|w| (w[1].1 - w[0].1).exp()).fold(0.0, f64::max);
    Ok(ComponentSolution {
        field: part.embed(&y),
        iterations,
        last_update,
        contraction_ratio,
        max_step_ratio,
        interpolation_residual,
        update_norms,
    })
}

fn expanding_part(f: &dyn TorusMap, dec: &Decomposition, k: usize, cfg: &SolverConfig) -> Result<ComponentSolution> {
    let d = f.dim();
    let part = Part::new(dec, k, &f.linear().to_f64())?;
    let points = grid_points(d, cfg.grid);
    let (targets, offset): (Vec<Vec<f64>>, Vec<Vec<f64>>) =
        points.par_iter().map(|x| (reduce(&f.lift(x)), mat_vec(&part.a_inv, &part.coords(&f.displacement(x))))).unzip();
    finish(&part, iterate(d, cfg.grid, &part.a_inv, &targets, &offset, cfg)?, cfg)
}

/// h^u = L_u⁻¹(h^u∘f) + L_u⁻¹R_u.
pub fn solve_unstable(f: &dyn TorusMap, s: &SpectralSplitting, cfg: &SolverConfig) -> Result<ComponentSolution> {
    expanding_part(f, &s.scu(), 2, cfg)
}

/// The same equation on the i-th unstable Lyapunov block (increasing modulus).
pub fn solve_block(f: &dyn TorusMap, s: &SpectralSplitting, i: usize, cfg: &SolverConfig) -> Result<ComponentSolution> {
    let groups = s.unstable_group_indices();
    let g =
        *groups.get(i).ok_or_else(|| Error::InvalidInput(format!("block {i} out of range: {} unstable blocks", groups.len())))?;
    expanding_part(f, &s.by_group(), g, cfg)
}

/// h^s(x) = L_s h^s(f⁻¹x) − R_s(f⁻¹x).
pub fn solve_stable(f: &dyn TorusMap, s: &SpectralSplitting, cfg: &SolverConfig) -> Result<ComponentSolution> {
    let d = f.dim();
    let part = Part::new(&s.scu(), 0, &f.linear().to_f64())?;
    let points = grid_points(d, cfg.grid);
    let pre: Vec<Vec<f64>> =
        points.par_iter().map(|x| f.inverse_lift(x, crate::torus_maps::DEFAULT_TOL)).collect::<Result<_>>()?;
    let (targets, offset): (Vec<Vec<f64>>, Vec<Vec<f64>>) =
        pre.par_iter().map(|y| (reduce(y), part.coords(&f.displacement(y)).iter().map(|v| -v).collect())).unzip();
    finish(&part, iterate(d, cfg.grid, &part.a, &targets, &offset, cfg)?, cfg)
}

/// Partial sums −Σ_{k≤K} L_s^{k−1} R_s∘f^{−k} at the grid points, K = 1..=terms,
/// evaluated along exact backward orbits.
pub fn stable_series_partial_sums(f: &dyn TorusMap, s: &SpectralSplitting, n: usize, terms: usize) -> Result<Vec<GridField>> {
    let d = f.dim();
    let part = Part::new(&s.scu(), 0, &f.linear().to_f64())?;
    let mut orbit = grid_points(d, n);
    let mut acc = vec![vec![0.0; part.dim()]; orbit.len()];
    let mut power = DMatrix::<f64>::identity(part.dim(), part.dim());
    let mut out = Vec::with_capacity(terms);
    for _ in 0..terms {
        orbit = orbit
            .par_iter()
            .map(|x| f.inverse_lift(x, crate::torus_maps::DEFAULT_TOL).map(|y| reduce(&y)))
            .collect::<Result<_>>()?;
        let terms: Vec<Vec<f64>> = orbit.par_iter().map(|y| mat_vec(&power, &part.coords(&f.displacement(y)))).collect();
        for (a, t) in acc.iter_mut().zip(&terms) {
            a.iter_mut().zip(t).for_each(|(u, v)| *u -= v);
        }
        out.push(part.embed(&to_field(d, n, &acc)));
        power = &power * &part.a;
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CenterConfig {
    /// Grid on which R and f⁻¹ − L⁻¹ are sampled.
    pub grid: usize,
    /// Frequencies transported by the Koopman operator: ‖n‖ ≤ working_radius.
    pub working_radius: f64,
    /// Frequencies reported with a convergence verdict: ‖m‖ ≤ report_radius.
    pub report_radius: f64,
    pub max_terms: usize,
    pub tol: f64,
}

impl Default for CenterConfig {
    fn default() -> Self {
        CenterConfig { grid: 16, working_radius: 6.0, report_radius: 3.0, max_terms: 400, tol: 1e-10 }
    }
}

/// Number of trailing increments used for the geometric-ratio fit.
pub const RATIO_WINDOW: usize = 8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CenterCoefficient {
    pub n: Vec<i64>,
    /// Coefficient of h^c in R^d (component-wise complex).
    pub re: Vec<f64>,
    pub im: Vec<f64>,
    pub last_increment: f64,
    pub ratio: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CenterSolution {
    pub field: GridField,
    pub coefficients: Vec<CenterCoefficient>,
    pub terms: usize,
    /// ℓ¹ mass of R̂_c outside the working ball (dropped at the start).
    pub dropped_mass: f64,
    pub converged_fraction: f64,
    pub ratio_below_one_fraction: f64,
}

impl CenterSolution {
    pub fn mask(&self) -> Vec<Vec<i64>> {
        self.coefficients.iter().filter(|c| !c.converged).map(|c| c.n.clone()).collect()
    }

    pub fn fourier(&self, d: usize) -> FourierField {
        let mut f = FourierField::new(d, d);
        for c in self.coefficients.iter().filter(|c| c.converged) {
            let z: Vec<Complex64> = c.re.iter().zip(&c.im).map(|(&a, &b)| Complex64::new(a, b)).collect();
            f.add_to(c.n.clone(), &z);
        }
        f
    }
}

fn ball(d: usize, radius: f64) -> Vec<Vec<i64>> {
    let r = radius.floor() as i64;
    let mut out = Vec::new();
    let mut n = vec![-r; d];
    loop {
        if norm(&n) <= radius {
            out.push(n.clone());
        }
        let mut k = d;
        loop {
            if k == 0 {
                return out;
            }
            k -= 1;
            n[k] += 1;
            if n[k] <= r {
                break;
            }
            n[k] = -r;
        }
    }
}

/// Geometric rate of the increments by the root test on their envelope
/// E_k = max(sup_{j≥k} a_j, floor). Increments arrive in bursts as frequency
/// orbits pass through, so raw consecutive ratios are meaningless; E is
/// nonincreasing and its log-slope is the rate. The fit runs up to the first
/// index where E reaches the floor, or over the last RATIO_WINDOW entries if
/// it never does. An envelope already at the floor gives 0.
fn geometric_ratio(history: &[f64], floor: f64) -> f64 {
    let mut env = vec![floor; history.len()];
    let mut run = floor;
    for (k, &a) in history.iter().enumerate().rev() {
        run = run.max(a);
        env[k] = run;
    }
    let range = match env.iter().position(|&e| e <= floor) {
        Some(0) => return 0.0,
        Some(j) => 0..j + 1,
        None => env.len().saturating_sub(RATIO_WINDOW)..env.len(),
    };
    let x: Vec<f64> = range.clone().map(|k| k as f64).collect();
    let y: Vec<f64> = range.map(|k| env[k].ln()).collect();
    fit_line(&x, &y).map_or(0.0, |fit| fit.slope.exp())
}

/// Trend of the trailing raw increments, used only to detect divergence.
fn trailing_growth(history: &[f64], floor: f64) -> f64 {
    let tail: Vec<(f64, f64)> = history[history.len().saturating_sub(RATIO_WINDOW)..]
        .iter()
        .enumerate()
        .filter(|(_, &a)| a > floor)
        .map(|(i, &a)| (i as f64, a.ln()))
        .collect();
    if tail.len() < 2 {
        return 0.0;
    }
    let (x, y): (Vec<f64>, Vec<f64>) = tail.into_iter().unzip();
    fit_line(&x, &y).map_or(0.0, |fit| fit.slope.exp())
}

/// h^c = −Σ_k L_c^{k−1} R_c∘f^{−k}, coefficient by coefficient.
pub fn solve_center(f: &dyn TorusMap, s: &SpectralSplitting, cfg: &CenterConfig) -> Result<CenterSolution> {
    let d = f.dim();
    let n = cfg.grid;
    let part = Part::new(&s.scu(), 1, &f.linear().to_f64())?;
    let kc = part.dim();
    let linv = f.linear().inverse()?;
    let linv_f = linv.to_f64();
    let linv_t = linv.transpose();
    let points = grid_points(d, n);

    let r_c: Vec<Vec<f64>> = points.par_iter().map(|x| part.coords(&f.displacement(x))).collect();
    let r_hat = analyze(&to_field(d, n, &r_c));
    let shifts: Vec<Vec<f64>> = points
        .par_iter()
        .map(|x| {
            let y = f.inverse_lift(x, crate::torus_maps::DEFAULT_TOL)?;
            Ok(y.iter().zip(mat_vec(&linv_f, x)).map(|(a, b)| a - b).collect())
        })
        .collect::<Result<_>>()?;

    let work = ball(d, cfg.working_radius);
    let index: HashMap<Vec<i64>, usize> = work.iter().cloned().enumerate().map(|(i, v)| (v, i)).collect();
    let dropped_mass: f64 = r_hat.power().filter(|(m, _)| !index.contains_key(*m)).map(|(_, p)| p.sqrt()).sum();
    let scale = r_hat.power().map(|(_, p)| p.sqrt()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    let entry_floor = 1e-17;

    // Column j of the transport: coefficients of e_{w_j}∘f⁻¹ = e_{L^{-T}w_j}·exp(2πi w_j·S) on the working ball.
    // exp(2πi(−w)·S) is the conjugate of exp(2πi w·S), so one FFT serves ±w.
    let half = (n / 2) as i64;
    let column = |w: &[i64], g: &[Complex64], flip: bool| -> Vec<(usize, Complex64)> {
        let total = g.len() as f64;
        let base = linv_t.mul_vec(w);
        let mut col = Vec::new();
        for (i, m) in work.iter().enumerate() {
            let q: Vec<i64> = m.iter().zip(&base).map(|(a, b)| a - b).collect();
            if q.iter().any(|x| x.abs() >= half) {
                continue;
            }
            let p = q.iter().fold(0usize, |acc, &x| acc * n + freq_to_index(if flip { -x } else { x }, n));
            let z = if flip { g[p].conj() } else { g[p] } / total;
            if z.norm() > entry_floor {
                col.push((i, z));
            }
        }
        col
    };
    let canonical: Vec<usize> = (0..work.len()).filter(|&j| work[j].iter().find(|&&x| x != 0).map_or(true, |&x| x > 0)).collect();
    let pairs: Vec<Vec<(usize, Vec<(usize, Complex64)>)>> = canonical
        .par_iter()
        .map(|&j| {
            let w = &work[j];
            let mut g: Vec<Complex64> = shifts
                .iter()
                .map(|sx| {
                    Complex64::from_polar(
                        1.0,
                        2.0 * std::f64::consts::PI * w.iter().zip(sx).map(|(&a, b)| a as f64 * b).sum::<f64>(),
                    )
                })
                .collect();
            fft_nd(&mut g, d, n, false);
            let mut out = vec![(j, column(w, &g, false))];
            let neg: Vec<i64> = w.iter().map(|x| -x).collect();
            if let Some(&jn) = index.get(&neg) {
                if jn != j {
                    out.push((jn, column(&neg, &g, true)));
                }
            }
            out
        })
        .collect();
    let mut columns: Vec<Vec<(usize, Complex64)>> = vec![Vec::new(); work.len()];
    for (j, col) in pairs.into_iter().flatten() {
        columns[j] = col;
    }

    let zero = vec![Complex64::new(0.0, 0.0); kc];
    let mut v: Vec<Vec<Complex64>> = work.iter().map(|w| r_hat.get(w).cloned().unwrap_or_else(|| zero.clone())).collect();
    let report: Vec<usize> = (0..work.len()).filter(|&i| norm(&work[i]) <= cfg.report_radius).collect();
    let mut sums = vec![zero.clone(); report.len()];
    let mut history: Vec<Vec<f64>> = vec![Vec::new(); report.len()];
    let mut power = DMatrix::<Complex64>::identity(kc, kc);
    let a_c = part.a.map(|x| Complex64::new(x, 0.0));
    let inc_floor = 1e-15 * scale;
    let ratio_floor = 1e-13 * scale;
    let mut terms = 0;
    let mut quiet = 0;
    for k in 1..=cfg.max_terms {
        let mut next = vec![zero.clone(); work.len()];
        for (j, col) in columns.iter().enumerate() {
            if v[j].iter().all(|z| z.norm() == 0.0) {
                continue;
            }
            for &(i, b) in col {
                for (o, z) in next[i].iter_mut().zip(&v[j]) {
                    *o += b * z;
                }
            }
        }
        v = next;
        let mut max_inc: f64 = 0.0;
        for (r, &i) in report.iter().enumerate() {
            let vi = DMatrix::from_column_slice(kc, 1, &v[i]);
            let inc = -(&power * vi);
            let mag = inc.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            sums[r].iter_mut().zip(inc.iter()).for_each(|(s, z)| *s += z);
            history[r].push(mag);
            max_inc = max_inc.max(mag);
        }
        power = &power * &a_c;
        terms = k;
        quiet = if max_inc <= inc_floor { quiet + 1 } else { 0 };
        if k >= 2 * RATIO_WINDOW && quiet >= RATIO_WINDOW {
            break;
        }
    }

    let mut coefficients = Vec::with_capacity(report.len());
    let mut below_one = 0;
    for (r, &i) in report.iter().enumerate() {
        let ratio = geometric_ratio(&history[r], ratio_floor);
        let last = *history[r].last().unwrap_or(&0.0);
        let remainder = if ratio < 1.0 { last * ratio / (1.0 - ratio) } else { f64::INFINITY };
        let converged = last <= inc_floor || (ratio < 1.0 && remainder.max(last) <= cfg.tol);
        if ratio < 1.0 {
            below_one += 1;
        }
        let low = norm(&work[i]) <= 1.0;
        if low && trailing_growth(&history[r], ratio_floor) > 1.05 && last > cfg.tol {
            return Err(Error::Diverging { frequency: work[i].clone() });
        }
        let vi = DMatrix::from_column_slice(kc, 1, &sums[r]);
        let emb = part.t.map(|x| Complex64::new(x, 0.0)) * vi;
        coefficients.push(CenterCoefficient {
            n: work[i].clone(),
            re: emb.iter().map(|z| z.re).collect(),
            im: emb.iter().map(|z| z.im).collect(),
            last_increment: last,
            ratio,
            converged,
        });
    }
    let total = coefficients.len().max(1) as f64;
    let converged_fraction = coefficients.iter().filter(|c| c.converged).count() as f64 / total;
    let mut sol = CenterSolution {
        field: GridField::zeros(d, n, d),
        coefficients,
        terms,
        dropped_mass,
        converged_fraction,
        ratio_below_one_fraction: below_one as f64 / total,
    };
    let mut fourier = sol.fourier(d);
    // Keep the synthesized field real even when only one of ±n converged.
    fourier.coeffs = fourier
        .coeffs
        .iter()
        .filter(|(m, _)| fourier.coeffs.contains_key(&m.iter().map(|x| -x).collect::<Vec<_>>()))
        .map(|(m, c)| (m.clone(), c.clone()))
        .collect();
    sol.field = synthesize(&fourier, n);
    Ok(sol)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JacobianReport {
    pub min_det: f64,
    pub max_det: f64,
    /// Fraction of grid points whose forward-difference Jacobian determinant has the majority sign.
    pub sign_consistency: f64,
    pub consistent: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConjugacySolution {
    pub h: GridField,
    pub h_s: Option<ComponentSolution>,
    pub h_c: Option<CenterSolution>,
    pub h_u: Option<ComponentSolution>,
    pub blocks: Vec<ComponentSolution>,
    pub residual_sup: f64,
    pub jacobian: JacobianReport,
}

/// Residual of L∘H = H∘f at the grid points, with H∘f evaluated by interpolation.
pub fn conjugacy_residual(f: &dyn TorusMap, h: &GridField) -> f64 {
    let l = f.linear().to_f64();
    let interp = SpectralInterpolant::from_grid(h);
    (0..h.num_points())
        .into_par_iter()
        .map(|p| {
            let x = h.point(p);
            let hx: Vec<f64> = x.iter().zip(h.value(p)).map(|(a, b)| a + b).collect();
            let lhs = mat_vec(&l, &hx);
            let fx = f.lift(&x);
            let hfx = interp.eval(&fx);
            let rhs: Vec<f64> = fx.iter().zip(&hfx).map(|(a, b)| a + b).collect();
            torus_dist(&lhs, &rhs)
        })
        .reduce(|| 0.0, f64::max)
}

/// Forward-difference Jacobians of H = Id + h on the grid.
pub fn jacobian_report(h: &GridField) -> JacobianReport {
    let d = h.d;
    let n = h.n;
    let dets: Vec<f64> = (0..h.num_points())
        .into_par_iter()
        .map(|p| {
            let idx = h.multi_index(p);
            let mut jac = DMatrix::<f64>::identity(d, d);
            for k in 0..d {
                let mut j = idx.clone();
                j[k] = (j[k] + 1) % n;
                let q = j.iter().fold(0usize, |acc, &i| acc * n + i);
                for r in 0..d {
                    jac[(r, k)] += (h.value(q)[r] - h.value(p)[r]) * n as f64;
                }
            }
            jac.determinant()
        })
        .collect();
    let pos = dets.iter().filter(|&&x| x > 0.0).count();
    let neg = dets.iter().filter(|&&x| x < 0.0).count();
    let total = dets.len().max(1) as f64;
    let sign_consistency = pos.max(neg) as f64 / total;
    JacobianReport {
        min_det: dets.iter().cloned().fold(f64::INFINITY, f64::min),
        max_det: dets.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
        sign_consistency,
        consistent: pos == dets.len() || neg == dets.len(),
    }
}

/// Sums the available components into h and validates L∘H = H∘f.
pub fn assemble_and_validate(
    f: &dyn TorusMap,
    h_s: Option<ComponentSolution>,
    h_c: Option<CenterSolution>,
    h_u: Option<ComponentSolution>,
    blocks: Vec<ComponentSolution>,
) -> Result<ConjugacySolution> {
    let fields: Vec<&GridField> =
        h_s.iter().map(|c| &c.field).chain(h_c.iter().map(|c| &c.field)).chain(h_u.iter().map(|c| &c.field)).collect();
    let first = fields.first().ok_or_else(|| Error::InvalidInput("no components to assemble".into()))?;
    if fields.iter().any(|g| g.n != first.n || g.d != first.d || g.components != first.components) {
        return Err(Error::InvalidInput("component grids differ".into()));
    }
    let mut h = GridField::zeros(first.d, first.n, first.components);
    for g in &fields {
        h = h.add(g);
    }
    let residual_sup = conjugacy_residual(f, &h);
    let jacobian = jacobian_report(&h);
    Ok(ConjugacySolution { h, h_s, h_c, h_u, blocks, residual_sup, jacobian })
}

/// Solves every nontrivial component of the splitting and assembles H.
pub fn solve(
    f: &dyn TorusMap,
    s: &SpectralSplitting,
    cfg: &SolverConfig,
    center: Option<&CenterConfig>,
    with_blocks: bool,
) -> Result<ConjugacySolution> {
    let h_u = if s.e_u.dim() > 0 { Some(solve_unstable(f, s, cfg)?) } else { None };
    let h_s = if s.e_s.dim() > 0 { Some(solve_stable(f, s, cfg)?) } else { None };
    let h_c = match (s.e_c.dim() > 0, center) {
        (true, Some(c)) => Some(solve_center(f, s, &CenterConfig { grid: cfg.grid, ..*c })?),
        _ => None,
    };
    let blocks = if with_blocks {
        (0..s.unstable_group_indices().len()).map(|i| solve_block(f, s, i, cfg)).collect::<Result<Vec<_>>>()?
    } else {
        Vec::new()
    };
    assemble_and_validate(f, h_s, h_c, h_u, blocks)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact_algebra::IntMatrix;
    use crate::spectral::build_splitting;
    use crate::torus_maps::{manufacture_conjugated_map, TrigPolyMap};

    fn cat() -> IntMatrix {
        IntMatrix::new(vec![vec![2, 1], vec![1, 1]]).unwrap()
    }

    fn h0(eps: f64) -> FourierField {
        let mut f = FourierField::new(2, 2);
        f.add_to(vec![1, 0], &[Complex64::new(0.0, 0.0), Complex64::new(0.0, -eps / 2.0)]);
        f.add_to(vec![-1, 0], &[Complex64::new(0.0, 0.0), Complex64::new(0.0, eps / 2.0)]);
        f
    }

    fn small_cfg() -> SolverConfig {
        SolverConfig { grid: 32, ..SolverConfig::default() }
    }

    #[test]
    fn zero_perturbation_gives_zero() {
        let f = TrigPolyMap::linear_map(cat());
        let s = build_splitting(&cat()).unwrap();
        let sol = solve(&f, &s, &small_cfg(), None, true).unwrap();
        assert_eq!(sol.h.sup_norm(), 0.0);
        assert_eq!(sol.residual_sup, 0.0);
        assert!(sol.jacobian.consistent);
    }

    #[test]
    fn manufactured_recovery_small_grid() {
        let s = build_splitting(&cat()).unwrap();
        let (f, _) = manufacture_conjugated_map(&cat(), &h0(0.05), 32).unwrap();
        let sol = solve(&f, &s, &small_cfg(), None, true).unwrap();
        let truth = synthesize(&h0(0.05), 32);
        assert!(sol.h.sub(&truth).sup_norm() < 1e-8, "{}", sol.h.sub(&truth).sup_norm());
        assert!(sol.residual_sup < 1e-8);
        let hu = sol.h_u.as_ref().unwrap();
        assert!(hu.contraction_ratio < 1.0 / 2.618 + 0.05, "{} {:?}", hu.contraction_ratio, hu.update_norms);
        assert!(hu.max_step_ratio < 1.0);
        assert!(sol.blocks.len() == 1 && sol.blocks[0].field.sub(&hu.field).sup_norm() < 1e-8);
    }

    #[test]
    fn stable_series_converges_to_fixed_point() {
        let s = build_splitting(&cat()).unwrap();
        let (f, _) = manufacture_conjugated_map(&cat(), &h0(0.05), 32).unwrap();
        let fixed = solve_stable(&f, &s, &small_cfg()).unwrap();
        let sums = stable_series_partial_sums(&f, &s, 32, 30).unwrap();
        let errs: Vec<f64> = sums.iter().map(|g| g.sub(&fixed.field).sup_norm()).collect();
        for w in errs[2..20].windows(2) {
            assert!(w[1] < 0.7 * w[0], "{errs:?}");
        }
    }

    #[test]
    fn mismatched_components_flagged() {
        let s = build_splitting(&cat()).unwrap();
        let (f, _) = manufacture_conjugated_map(&cat(), &h0(0.05), 32).unwrap();
        let (g, _) = manufacture_conjugated_map(&cat(), &h0(-0.05), 32).unwrap();
        let hu = solve_unstable(&g, &s, &small_cfg()).unwrap();
        let hs = solve_stable(&f, &s, &small_cfg()).unwrap();
        let sol = assemble_and_validate(&f, Some(hs), None, Some(hu), vec![]).unwrap();
        assert!(sol.residual_sup > 1e-2);
    }

    #[test]
    fn block_diagonal_decouples() {
        let l = IntMatrix::new(vec![vec![2, 1, 0, 0], vec![1, 1, 0, 0], vec![0, 0, 3, 2], vec![0, 0, 1, 1]]).unwrap();
        let s = build_splitting(&l).unwrap();
        let f =
            TrigPolyMap::new(l.clone(), vec![TrigPolyMap::sin_mode(vec![0, 0, 1, 0], &[0.0, 0.0, 0.01, 0.005])], false).unwrap();
        let cfg = SolverConfig { grid: 8, strict_grid: false, ..SolverConfig::default() };
        let b0 = solve_block(&f, &s, 0, &cfg).unwrap();
        let b1 = solve_block(&f, &s, 1, &cfg).unwrap();
        assert!(b0.field.sup_norm() < 1e-12, "{}", b0.field.sup_norm());
        assert!(b1.field.sup_norm() > 1e-4);
        let hu = solve_unstable(&f, &s, &cfg).unwrap();
        assert!(b0.field.add(&b1.field).sub(&hu.field).sup_norm() < 1e-8);
    }

    /// A f A⁻¹ for A ∈ GL(d,Z) commuting with L.
    struct Conjugated<'a, F: TorusMap> {
        f: &'a F,
        a: DMatrix<f64>,
        a_inv: DMatrix<f64>,
    }

    impl<F: TorusMap> TorusMap for Conjugated<'_, F> {
        fn linear(&self) -> &IntMatrix {
            self.f.linear()
        }
        fn displacement(&self, x: &[f64]) -> Vec<f64> {
            mat_vec(&self.a, &self.f.displacement(&mat_vec(&self.a_inv, x)))
        }
        fn inverse_contraction_bound(&self) -> f64 {
            self.f.inverse_contraction_bound()
        }
        fn inverse_lift(&self, x: &[f64], tol: f64) -> Result<Vec<f64>> {
            Ok(mat_vec(&self.a, &self.f.inverse_lift(&mat_vec(&self.a_inv, x), tol)?))
        }
    }

    #[test]
    fn solutions_are_equivariant_under_commuting_automorphisms() {
        let s = build_splitting(&cat()).unwrap();
        let (f, _) = manufacture_conjugated_map(&cat(), &h0(0.05), 32).unwrap();
        let a = cat().to_f64();
        let a_inv = cat().inverse().unwrap().to_f64();
        let g = Conjugated { f: &f, a: a.clone(), a_inv: a_inv.clone() };
        let h = solve(&f, &s, &small_cfg(), None, false).unwrap().h;
        let hg = solve(&g, &s, &small_cfg(), None, false).unwrap().h;
        let interp = SpectralInterpolant::from_grid(&h);
        let mut worst: f64 = 0.0;
        for p in 0..hg.num_points() {
            let x = hg.point(p);
            let expect = mat_vec(&a, &interp.eval(&mat_vec(&a_inv, &x)));
            worst = hg.value(p).iter().zip(&expect).fold(worst, |w, (u, v)| w.max((u - v).abs()));
        }
        assert!(worst < 1e-8, "{worst}");
    }

    #[test]
    fn center_requires_center_subspace() {
        let s = build_splitting(&cat()).unwrap();
        let f = TrigPolyMap::linear_map(cat());
        assert!(solve_center(&f, &s, &CenterConfig::default()).is_err());
    }

    #[test]
    fn salem_center_series_recovers_center_projection() {
        let l = IntMatrix::companion(&crate::exact_algebra::IntPolynomial::from_i64(&[1, -1, -1, -1, 1]).unwrap()).unwrap();
        let s = build_splitting(&l).unwrap();
        let mut h = FourierField::new(4, 4);
        let amp = [0.004, 0.003, -0.002, 0.003];
        for (n, c) in [TrigPolyMap::sin_mode(vec![1, 0, 0, 0], &amp), TrigPolyMap::sin_mode(vec![0, 1, -1, 0], &amp)] {
            let conj: Vec<Complex64> = c.iter().map(|z| z.conj()).collect();
            h.add_to(n.iter().map(|x| -x).collect(), &conj);
            h.add_to(n, &c);
        }
        let f = crate::torus_maps::ConjugatedMap::new(l.clone(), h.clone()).unwrap();
        let sol = solve_center(&f, &s, &CenterConfig { ..CenterConfig::default() }).unwrap();
        let pc = s.scu().projector(1);
        let mut worst: f64 = 0.0;
        for c in sol.coefficients.iter().filter(|c| c.converged) {
            let z = h.get(&c.n).cloned().unwrap_or_else(|| vec![Complex64::new(0.0, 0.0); 4]);
            let re: Vec<f64> = z.iter().map(|w| w.re).collect();
            let im: Vec<f64> = z.iter().map(|w| w.im).collect();
            let (pr, pi) = (mat_vec(&pc, &re), mat_vec(&pc, &im));
            for k in 0..4 {
                worst = worst.max((c.re[k] - pr[k]).abs()).max((c.im[k] - pi[k]).abs());
            }
        }
        assert!(worst < 1e-5, "{worst}");
        assert!(sol.ratio_below_one_fraction >= 0.95);
    }

    #[test]
    fn ball_counts() {
        assert_eq!(ball(2, 1.0).len(), 5);
        assert_eq!(ball(2, 2.0).len(), 13);
        assert_eq!(ball(3, 1.0).len(), 7);
    }
}
