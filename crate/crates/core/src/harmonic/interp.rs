//! Off-grid evaluation of trigonometric polynomials by Gaussian gridding
//! (a type-2 non-uniform FFT): coefficients are deconvolved by the Gaussian's
//! Fourier transform, transformed onto a twice-oversampled grid, and the value
//! at any point is recovered by a local Gaussian-weighted sum.

use num_complex::Complex64;
use rayon::prelude::*;

use super::fourier::{analyze, fft_nd, freq_to_index, FourierField, GridField};

const OVERSAMPLING: usize = 2;

/// Kernel half-width in oversampled grid cells. Twelve gives roughly 1e-11
/// relative accuracy; higher dimensions trade accuracy (about 1e-8 at eight,
/// 1e-6 at six) for a (2·spread)^d gather that stays affordable.
fn spread_for(d: usize) -> usize {
    match d {
        0..=2 => 12,
        3 => 8,
        _ => 6,
    }
}

#[derive(Debug, Clone)]
pub struct SpectralInterpolant {
    d: usize,
    components: usize,
    mr: usize,
    spread: usize,
    tau: f64,
    grid: Vec<Vec<Complex64>>,
    /// Dense coefficients over −N/2..=N/2 per axis, used instead of gridding
    /// when (N+1)^d is below the (2·spread)^d gather.
    dense: Option<Dense>,
}

#[derive(Debug, Clone)]
struct Dense {
    half: i64,
    table: Vec<Vec<Complex64>>,
}

impl Dense {
    fn eval(&self, d: usize, x: &[f64]) -> Vec<f64> {
        let side = (2 * self.half + 1) as usize;
        let phases: Vec<Vec<Complex64>> = x
            .iter()
            .map(|&xa| {
                (-self.half..=self.half).map(|k| Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * k as f64 * xa)).collect()
            })
            .collect();
        self.table
            .iter()
            .map(|t| {
                let mut cur = t.clone();
                for axis in (0..d).rev() {
                    let ph = &phases[axis];
                    cur = cur.chunks(side).map(|row| row.iter().zip(ph).map(|(a, b)| a * b).sum()).collect();
                }
                cur[0].re
            })
            .collect()
    }
}

impl SpectralInterpolant {
    /// Keeps the modes with every |n_k| < modes/2 and discards the rest.
    pub fn new(f: &FourierField, modes: usize) -> Self {
        let half = (modes / 2) as i64;
        Self::build(
            f.d,
            f.components,
            modes,
            f.coeffs.iter().filter(|(n, _)| n.iter().all(|&k| k.abs() < half)).map(|(n, c)| (n.clone(), c.clone())),
        )
    }

    /// The real trigonometric interpolant of grid samples: Nyquist coefficients
    /// are split evenly between ±N/2, so the samples are reproduced exactly.
    pub fn from_grid(g: &GridField) -> Self {
        let f = analyze(g);
        let half = (g.n / 2) as i64;
        let mut modes = Vec::with_capacity(f.coeffs.len());
        for (n, c) in &f.coeffs {
            let axes: Vec<usize> = (0..n.len()).filter(|&k| g.n > 1 && n[k] == -half).collect();
            let share = 0.5f64.powi(axes.len() as i32);
            for mask in 0..(1usize << axes.len()) {
                let mut m = n.clone();
                for (b, &k) in axes.iter().enumerate() {
                    if mask >> b & 1 == 1 {
                        m[k] = half;
                    }
                }
                modes.push((m, c.iter().map(|z| z * share).collect()));
            }
        }
        Self::build(g.d, g.components, g.n, modes.into_iter())
    }

    fn build(d: usize, components: usize, modes: usize, coeffs: impl Iterator<Item = (Vec<i64>, Vec<Complex64>)>) -> Self {
        let mr = OVERSAMPLING * modes;
        let r = OVERSAMPLING as f64;
        let spread = spread_for(d);
        if (modes + 1).pow(d as u32) <= (2 * spread).pow(d as u32) {
            let half = (modes / 2) as i64;
            let side = modes + 1;
            let mut table = vec![vec![Complex64::new(0.0, 0.0); side.pow(d as u32)]; components];
            for (n, c) in coeffs {
                if n.iter().any(|k| k.abs() > half) {
                    continue;
                }
                let p = n.iter().fold(0usize, |acc, &k| acc * side + (k + half) as usize);
                for (t, ci) in table.iter_mut().zip(&c) {
                    t[p] += ci;
                }
            }
            return SpectralInterpolant {
                d,
                components,
                mr: 0,
                spread,
                tau: 0.0,
                grid: Vec::new(),
                dense: Some(Dense { half, table }),
            };
        }
        let tau = std::f64::consts::PI * spread as f64 / ((modes * modes) as f64 * r * (r - 0.5));
        let total = mr.pow(d as u32);
        let mut grid = vec![vec![Complex64::new(0.0, 0.0); total]; components];
        let pre = (std::f64::consts::PI / tau).sqrt().powi(d as i32);
        for (n, c) in coeffs {
            let k2: f64 = n.iter().map(|&k| (k * k) as f64).sum();
            let w = pre * (tau * k2).exp();
            let p = n.iter().fold(0usize, |acc, &k| acc * mr + freq_to_index(k, mr));
            for (g, ci) in grid.iter_mut().zip(&c) {
                g[p] += ci * w;
            }
        }
        for g in grid.iter_mut() {
            fft_nd(g, d, mr, true);
        }
        SpectralInterpolant { d, components, mr, spread, tau, grid, dense: None }
    }

    /// Real part of every component at x ∈ R^d (any lift).
    pub fn eval(&self, x: &[f64]) -> Vec<f64> {
        if let Some(dense) = &self.dense {
            return dense.eval(self.d, x);
        }
        let h = 2.0 * std::f64::consts::PI / self.mr as f64;
        let width = 2 * self.spread;
        let mut idx = vec![vec![0usize; width]; self.d];
        let mut wts = vec![vec![0.0; width]; self.d];
        for k in 0..self.d {
            let th = 2.0 * std::f64::consts::PI * x[k].rem_euclid(1.0);
            let j0 = (th / h).floor() as i64;
            for (s, off) in (-(self.spread as i64) + 1..=self.spread as i64).enumerate() {
                let j = j0 + off;
                let t = th - j as f64 * h;
                idx[k][s] = j.rem_euclid(self.mr as i64) as usize;
                wts[k][s] = (-t * t / (4.0 * self.tau)).exp();
            }
        }
        let norm = (self.mr as f64).powi(-(self.d as i32));
        let mut out = vec![0.0; self.components];
        let mut counter = vec![0usize; self.d];
        loop {
            let mut p = 0usize;
            let mut w = norm;
            for k in 0..self.d {
                p = p * self.mr + idx[k][counter[k]];
                w *= wts[k][counter[k]];
            }
            for (o, g) in out.iter_mut().zip(&self.grid) {
                *o += g[p].re * w;
            }
            let mut k = self.d;
            loop {
                if k == 0 {
                    return out;
                }
                k -= 1;
                counter[k] += 1;
                if counter[k] < width {
                    break;
                }
                counter[k] = 0;
            }
        }
    }

    pub fn eval_many(&self, points: &[Vec<f64>]) -> Vec<Vec<f64>> {
        points.par_iter().map(|x| self.eval(x)).collect()
    }
}
