use std::collections::BTreeMap;

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Vector-valued samples on the uniform grid {i/N : 0 ≤ i < N}^d.
///
/// Points are stored row-major with axis 0 slowest; the `components` values of
/// one point are contiguous.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridField {
    pub d: usize,
    pub n: usize,
    pub components: usize,
    pub data: Vec<f64>,
}

impl GridField {
    pub fn zeros(d: usize, n: usize, components: usize) -> Self {
        GridField { d, n, components, data: vec![0.0; n.pow(d as u32) * components] }
    }

    pub fn from_fn(d: usize, n: usize, components: usize, f: impl Fn(&[f64]) -> Vec<f64>) -> Self {
        let mut g = GridField::zeros(d, n, components);
        for p in 0..g.num_points() {
            let v = f(&g.point(p));
            g.data[p * components..(p + 1) * components].copy_from_slice(&v);
        }
        g
    }

    pub fn num_points(&self) -> usize {
        self.n.pow(self.d as u32)
    }

    pub fn multi_index(&self, p: usize) -> Vec<usize> {
        let mut idx = vec![0; self.d];
        let mut r = p;
        for k in (0..self.d).rev() {
            idx[k] = r % self.n;
            r /= self.n;
        }
        idx
    }

    pub fn point(&self, p: usize) -> Vec<f64> {
        self.multi_index(p).into_iter().map(|i| i as f64 / self.n as f64).collect()
    }

    pub fn value(&self, p: usize) -> &[f64] {
        &self.data[p * self.components..(p + 1) * self.components]
    }

    pub fn value_mut(&mut self, p: usize) -> &mut [f64] {
        &mut self.data[p * self.components..(p + 1) * self.components]
    }

    /// max over points of the Euclidean norm of the value.
    pub fn sup_norm(&self) -> f64 {
        (0..self.num_points()).map(|p| self.value(p).iter().map(|x| x * x).sum::<f64>().sqrt()).fold(0.0, f64::max)
    }

    /// Discrete L² norm: (mean over points of |value|²)^{1/2}.
    pub fn l2_norm(&self) -> f64 {
        (self.data.iter().map(|x| x * x).sum::<f64>() / self.num_points() as f64).sqrt()
    }

    pub fn sub(&self, other: &GridField) -> GridField {
        let mut g = self.clone();
        g.data.iter_mut().zip(&other.data).for_each(|(a, b)| *a -= b);
        g
    }

    pub fn add(&self, other: &GridField) -> GridField {
        let mut g = self.clone();
        g.data.iter_mut().zip(&other.data).for_each(|(a, b)| *a += b);
        g
    }

    /// Applies a linear map to every value: out = A·value, A given row-major as rows × components.
    pub fn map_values(&self, rows: usize, a: &[f64]) -> GridField {
        let mut g = GridField::zeros(self.d, self.n, rows);
        for p in 0..self.num_points() {
            let v = self.value(p);
            let out = g.value_mut(p);
            for (r, o) in out.iter_mut().enumerate() {
                *o = (0..self.components).map(|c| a[r * self.components + c] * v[c]).sum();
            }
        }
        g
    }

    /// Binary layout: one JSON header line, a newline, then little-endian
    /// f64 values in storage order.
    pub fn to_bytes(&self) -> Vec<u8> {
        let header = serde_json::json!({
            "d": self.d, "n": self.n, "components": self.components,
            "layout": "row-major, axis 0 slowest, components contiguous", "dtype": "f64-le"
        });
        let mut out = header.to_string().into_bytes();
        out.push(b'\n');
        for x in &self.data {
            out.extend_from_slice(&x.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<GridField> {
        let nl = bytes.iter().position(|&b| b == b'\n').ok_or_else(|| Error::InvalidInput("missing header".into()))?;
        let h: serde_json::Value =
            serde_json::from_slice(&bytes[..nl]).map_err(|e| Error::InvalidInput(format!("header: {e}")))?;
        let get = |k: &str| h[k].as_u64().map(|v| v as usize).ok_or_else(|| Error::InvalidInput(format!("header field {k}")));
        let (d, n, components) = (get("d")?, get("n")?, get("components")?);
        let body = &bytes[nl + 1..];
        let expected = n.pow(d as u32) * components;
        if body.len() != expected * 8 {
            return Err(Error::InvalidInput(format!("expected {expected} values")));
        }
        let data = body.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
        Ok(GridField { d, n, components, data })
    }
}

/// Finite table of Fourier coefficients n ↦ ĉ_n ∈ C^components.
#[derive(Debug, Clone, PartialEq)]
pub struct FourierField {
    pub d: usize,
    pub components: usize,
    pub coeffs: BTreeMap<Vec<i64>, Vec<Complex64>>,
    /// Grid resolution the coefficients were computed from, if any.
    pub grid: Option<usize>,
}

impl FourierField {
    pub fn new(d: usize, components: usize) -> Self {
        FourierField { d, components, coeffs: BTreeMap::new(), grid: None }
    }

    /// Scalar field from (frequency, coefficient) pairs.
    pub fn scalar(d: usize, modes: impl IntoIterator<Item = (Vec<i64>, Complex64)>) -> Self {
        let mut f = FourierField::new(d, 1);
        for (n, c) in modes {
            f.add_to(n, &[c]);
        }
        f
    }

    pub fn add_to(&mut self, n: Vec<i64>, c: &[Complex64]) {
        let e = self.coeffs.entry(n).or_insert_with(|| vec![Complex64::new(0.0, 0.0); c.len()]);
        e.iter_mut().zip(c).for_each(|(a, b)| *a += b);
    }

    pub fn get(&self, n: &[i64]) -> Option<&Vec<Complex64>> {
        self.coeffs.get(n)
    }

    /// Squared Euclidean norm of the coefficient vector at each frequency.
    pub fn power(&self) -> impl Iterator<Item = (&Vec<i64>, f64)> {
        self.coeffs.iter().map(|(n, c)| (n, c.iter().map(|z| z.norm_sqr()).sum()))
    }

    pub fn l2_norm(&self) -> f64 {
        self.power().map(|(_, p)| p).sum::<f64>().sqrt()
    }

    pub fn support_radius(&self) -> f64 {
        self.power().filter(|(_, p)| *p > 0.0).map(|(n, _)| norm(n)).fold(0.0, f64::max)
    }

    pub fn map(&self, f: impl Fn(&[i64], &[Complex64]) -> Vec<Complex64>) -> FourierField {
        FourierField {
            d: self.d,
            components: self.components,
            coeffs: self.coeffs.iter().map(|(n, c)| (n.clone(), f(n, c))).collect(),
            grid: self.grid,
        }
    }

    /// Value at a point by direct summation, real part of each component.
    pub fn eval(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.components];
        for (n, c) in &self.coeffs {
            let th = 2.0 * std::f64::consts::PI * n.iter().zip(x).map(|(&a, &b)| a as f64 * b).sum::<f64>();
            let e = Complex64::from_polar(1.0, th);
            for (o, ci) in out.iter_mut().zip(c) {
                *o += (ci * e).re;
            }
        }
        out
    }

    /// max |ĉ_n − conj(ĉ_{−n})| over the table; zero for real fields. For
    /// grid-derived tables −n is taken modulo the grid (the Nyquist line maps to itself).
    pub fn hermitian_defect(&self) -> f64 {
        let zero = vec![Complex64::new(0.0, 0.0); self.components];
        self.coeffs
            .iter()
            .map(|(n, c)| {
                let m: Vec<i64> = match self.grid {
                    Some(g) => n.iter().map(|x| index_to_freq(freq_to_index(-x, g), g)).collect(),
                    None => n.iter().map(|x| -x).collect(),
                };
                let p = self.coeffs.get(&m).unwrap_or(&zero);
                c.iter().zip(p).map(|(a, b)| (a - b.conj()).norm()).fold(0.0, f64::max)
            })
            .fold(0.0, f64::max)
    }
}

pub fn norm(n: &[i64]) -> f64 {
    n.iter().map(|&x| (x * x) as f64).sum::<f64>().sqrt()
}

/// Grid index j ↦ frequency in [−N/2, N/2).
pub fn index_to_freq(j: usize, n: usize) -> i64 {
    if j < n / 2 {
        j as i64
    } else {
        j as i64 - n as i64
    }
}

pub(crate) fn freq_to_index(m: i64, n: usize) -> usize {
    m.rem_euclid(n as i64) as usize
}

/// In-place d-dimensional FFT over an N^d row-major array (unnormalized).
pub(crate) fn fft_nd(data: &mut [Complex64], d: usize, n: usize, inverse: bool) {
    let mut planner = FftPlanner::new();
    let fft = if inverse { planner.plan_fft_inverse(n) } else { planner.plan_fft_forward(n) };
    let total = data.len();
    let mut line = vec![Complex64::new(0.0, 0.0); n];
    let mut scratch = vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
    for axis in 0..d {
        let stride = n.pow((d - 1 - axis) as u32);
        for base in 0..total {
            if (base / stride) % n != 0 {
                continue;
            }
            for (k, l) in line.iter_mut().enumerate() {
                *l = data[base + k * stride];
            }
            fft.process_with_scratch(&mut line, &mut scratch);
            for (k, l) in line.iter().enumerate() {
                data[base + k * stride] = *l;
            }
        }
    }
}

/// Forward transform: ĉ_m = N^{−d} Σ_x f(x) e^{−2πi m·x} for every m in [−N/2, N/2)^d.
pub fn analyze(field: &GridField) -> FourierField {
    let np = field.num_points();
    let mut out = FourierField::new(field.d, field.components);
    out.grid = Some(field.n);
    let mut planes: Vec<Vec<Complex64>> = (0..field.components)
        .map(|c| (0..np).map(|p| Complex64::new(field.data[p * field.components + c], 0.0)).collect())
        .collect();
    for plane in planes.iter_mut() {
        fft_nd(plane, field.d, field.n, false);
    }
    let scale = 1.0 / np as f64;
    for p in 0..np {
        let m: Vec<i64> = field.multi_index(p).into_iter().map(|j| index_to_freq(j, field.n)).collect();
        out.coeffs.insert(m, planes.iter().map(|pl| pl[p] * scale).collect());
    }
    out
}

/// Samples of the real part of the trigonometric polynomial on the N-grid.
/// Frequencies outside [−N/2, N/2)^d fold onto their aliases, as sampling does.
pub fn synthesize(f: &FourierField, n: usize) -> GridField {
    let d = f.d;
    let np = n.pow(d as u32);
    let mut planes = vec![vec![Complex64::new(0.0, 0.0); np]; f.components];
    for (m, c) in &f.coeffs {
        let p = m.iter().fold(0usize, |acc, &mk| acc * n + freq_to_index(mk, n));
        for (pl, ci) in planes.iter_mut().zip(c) {
            pl[p] += ci;
        }
    }
    for pl in planes.iter_mut() {
        fft_nd(pl, d, n, true);
    }
    let mut g = GridField::zeros(d, n, f.components);
    for p in 0..np {
        for c in 0..f.components {
            g.data[p * f.components + c] = planes[c][p].re;
        }
    }
    g
}
