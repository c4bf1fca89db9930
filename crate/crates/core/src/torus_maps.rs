//! Maps f = L + R of T^d, with R a trigonometric polynomial, a grid-sampled
//! displacement, or an exact conjugate H₀⁻¹∘L∘H₀ of the linear part.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exact_algebra::IntMatrix;
use crate::harmonic::{analyze, FourierField, GridField, SpectralInterpolant};

pub const MAX_ITERATIONS: usize = 10_000;
pub const DEFAULT_TOL: f64 = 1e-12;
/// Largest |k| accepted by `orbit`.
pub const MAX_ORBIT_LENGTH: i64 = 10_000;

/// Componentwise reduction into [0, 1).
pub fn reduce(x: &[f64]) -> Vec<f64> {
    x.iter().map(|v| v.rem_euclid(1.0)).map(|v| if v >= 1.0 { 0.0 } else { v }).collect()
}

/// Euclidean distance on T^d between the classes of a and b.
pub fn torus_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| {
            let t = (x - y).rem_euclid(1.0);
            t.min(1.0 - t).powi(2)
        })
        .sum::<f64>()
        .sqrt()
}

pub(crate) fn mat_vec(m: &DMatrix<f64>, x: &[f64]) -> Vec<f64> {
    (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| m[(i, j)] * x[j]).sum()).collect()
}

/// Spectral norm of an integer matrix.
pub fn operator_norm(m: &DMatrix<f64>) -> f64 {
    (m.transpose() * m).symmetric_eigenvalues().max().max(0.0).sqrt()
}

/// 2π Σ ‖n‖·‖ĉ_n‖: an upper bound for sup ‖Dφ‖ of the field φ.
pub fn lipschitz_bound(f: &FourierField) -> f64 {
    2.0 * PI
        * f.coeffs.iter().map(|(n, c)| crate::harmonic::norm(n) * c.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()).sum::<f64>()
}

/// A degree-one map of T^d with linear part L, described through its lift.
pub trait TorusMap: Sync {
    fn linear(&self) -> &IntMatrix;

    /// R(x) = f(x) − Lx, Z^d-periodic.
    fn displacement(&self, x: &[f64]) -> Vec<f64>;

    /// Upper bound on ‖L⁻¹‖·sup‖DR‖; the inverse iteration contracts when it is below 1.
    fn inverse_contraction_bound(&self) -> f64;

    fn dim(&self) -> usize {
        self.linear().dim()
    }

    fn lift(&self, x: &[f64]) -> Vec<f64> {
        let lx = self.linear().rows().iter().map(|r| r.iter().zip(x).map(|(&a, b)| a as f64 * b).sum::<f64>());
        lx.zip(self.displacement(x)).map(|(a, b)| a + b).collect()
    }

    /// (f(x) reduced into [0,1)^d, unreduced lift).
    fn evaluate(&self, x: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let l = self.lift(x);
        (reduce(&l), l)
    }

    /// A lift y with f(y) = x up to `tol`, by y ← L⁻¹(x − R(y)).
    fn inverse_lift(&self, x: &[f64], tol: f64) -> Result<Vec<f64>> {
        default_inverse_lift(self, x, tol)
    }

    fn inverse_evaluate(&self, x: &[f64], tol: f64) -> Result<Vec<f64>> {
        Ok(reduce(&self.inverse_lift(x, tol)?))
    }

    /// f^k(x) reduced; negative k iterates the inverse.
    fn orbit(&self, x: &[f64], k: i64, tol: f64) -> Result<Vec<f64>> {
        if k.abs() > MAX_ORBIT_LENGTH {
            return Err(Error::InvalidInput(format!("|k| = {} exceeds {MAX_ORBIT_LENGTH}", k.abs())));
        }
        let mut y = reduce(x);
        for _ in 0..k.unsigned_abs() {
            y = if k > 0 { self.evaluate(&y).0 } else { self.inverse_evaluate(&y, tol)? };
        }
        Ok(y)
    }
}

fn default_inverse_lift<F: TorusMap + ?Sized>(f: &F, x: &[f64], tol: f64) -> Result<Vec<f64>> {
    let bound = f.inverse_contraction_bound();
    if bound >= 1.0 {
        return Err(Error::NotContracting { bound });
    }
    let linv = f.linear().inverse()?.to_f64();
    let mut y = mat_vec(&linv, x);
    for it in 0..MAX_ITERATIONS {
        let r = f.displacement(&y);
        let rhs: Vec<f64> = x.iter().zip(&r).map(|(a, b)| a - b).collect();
        let next = mat_vec(&linv, &rhs);
        let step = next.iter().zip(&y).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        y = next;
        if step < tol {
            return Ok(y);
        }
        if it + 1 == MAX_ITERATIONS {
            return Err(Error::NoConvergence { iterations: MAX_ITERATIONS, last_update: step });
        }
    }
    unreachable!()
}

/// f = L + R with R a real trigonometric polynomial.
#[derive(Debug, Clone)]
pub struct TrigPolyMap {
    l: IntMatrix,
    r: FourierField,
    enforce_zero_fixed_point: bool,
    support_radius: i64,
}

/// On-disk form: {"L": [[..]], "R": [{"n": [..], "re": [..], "im": [..]}], "enforce_zero_fixed_point": bool}.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrigPolyMapSpec {
    #[serde(rename = "L")]
    pub l: Vec<Vec<i64>>,
    #[serde(rename = "R", default)]
    pub r: Vec<ModeSpec>,
    #[serde(default)]
    pub enforce_zero_fixed_point: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModeSpec {
    pub n: Vec<i64>,
    pub re: Vec<f64>,
    pub im: Vec<f64>,
}

impl TrigPolyMap {
    /// Builds a real map from the given coefficients. Where both n and −n are
    /// given they are averaged into a Hermitian pair; where only one is given
    /// its conjugate fills the other. With the flag set, the constant term is
    /// shifted so that R(0) = 0.
    pub fn new(l: IntMatrix, modes: Vec<(Vec<i64>, Vec<Complex64>)>, enforce_zero_fixed_point: bool) -> Result<Self> {
        let d = l.dim();
        let mut raw = FourierField::new(d, d);
        for (n, c) in modes {
            if n.len() != d || c.len() != d {
                return Err(Error::InvalidInput(format!("mode {n:?} must have {d} frequencies and {d} components")));
            }
            raw.add_to(n, &c);
        }
        let mut r = FourierField::new(d, d);
        for (n, c) in &raw.coeffs {
            let m: Vec<i64> = n.iter().map(|x| -x).collect();
            let sym: Vec<Complex64> = match raw.coeffs.get(&m) {
                Some(cm) => c.iter().zip(cm).map(|(a, b)| (a + b.conj()) * 0.5).collect(),
                None => c.clone(),
            };
            r.coeffs.insert(m, sym.iter().map(|z| z.conj()).collect());
            r.coeffs.insert(n.clone(), sym);
        }
        if enforce_zero_fixed_point {
            let at_zero = r.eval(&vec![0.0; d]);
            let zero = vec![0i64; d];
            let shift: Vec<Complex64> = at_zero.iter().map(|v| Complex64::new(-v, 0.0)).collect();
            r.add_to(zero, &shift);
        }
        r.coeffs.retain(|_, c| c.iter().any(|z| z.norm() > 0.0));
        let support_radius = r.coeffs.keys().flat_map(|n| n.iter().map(|x| x.abs())).max().unwrap_or(0);
        Ok(TrigPolyMap { l, r, enforce_zero_fixed_point, support_radius })
    }

    pub fn linear_map(l: IntMatrix) -> Self {
        let d = l.dim();
        TrigPolyMap { l, r: FourierField::new(d, d), enforce_zero_fixed_point: false, support_radius: 0 }
    }

    /// amplitude · sin(2π n·x) as a single Hermitian pair.
    pub fn sin_mode(n: Vec<i64>, amplitude: &[f64]) -> (Vec<i64>, Vec<Complex64>) {
        (n, amplitude.iter().map(|a| Complex64::new(0.0, -a / 2.0)).collect())
    }

    /// amplitude · cos(2π n·x) as a single Hermitian pair.
    pub fn cos_mode(n: Vec<i64>, amplitude: &[f64]) -> (Vec<i64>, Vec<Complex64>) {
        (n, amplitude.iter().map(|a| Complex64::new(a / 2.0, 0.0)).collect())
    }

    pub fn from_spec(spec: &TrigPolyMapSpec) -> Result<Self> {
        let l = IntMatrix::new(spec.l.clone())?;
        let modes = spec
            .r
            .iter()
            .map(|m| {
                if m.re.len() != m.im.len() {
                    return Err(Error::InvalidInput("re and im lengths differ".into()));
                }
                Ok((m.n.clone(), m.re.iter().zip(&m.im).map(|(&a, &b)| Complex64::new(a, b)).collect()))
            })
            .collect::<Result<Vec<_>>>()?;
        TrigPolyMap::new(l, modes, spec.enforce_zero_fixed_point)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let spec: TrigPolyMapSpec = serde_json::from_str(text).map_err(|e| Error::InvalidInput(format!("map JSON: {e}")))?;
        TrigPolyMap::from_spec(&spec)
    }

    pub fn to_spec(&self) -> TrigPolyMapSpec {
        TrigPolyMapSpec {
            l: self.l.rows().to_vec(),
            r: self
                .r
                .coeffs
                .iter()
                .map(|(n, c)| ModeSpec {
                    n: n.clone(),
                    re: c.iter().map(|z| z.re).collect(),
                    im: c.iter().map(|z| z.im).collect(),
                })
                .collect(),
            enforce_zero_fixed_point: self.enforce_zero_fixed_point,
        }
    }

    pub fn coefficients(&self) -> &FourierField {
        &self.r
    }

    pub fn support_radius(&self) -> i64 {
        self.support_radius
    }

    /// The same perturbation scaled by s.
    pub fn scaled(&self, s: f64) -> TrigPolyMap {
        let mut out = self.clone();
        out.r = self.r.map(|_, c| c.iter().map(|z| z * s).collect());
        out
    }
}

impl TorusMap for TrigPolyMap {
    fn linear(&self) -> &IntMatrix {
        &self.l
    }

    fn displacement(&self, x: &[f64]) -> Vec<f64> {
        self.r.eval(x)
    }

    fn inverse_contraction_bound(&self) -> f64 {
        let linv = self.l.inverse().map(|m| operator_norm(&m.to_f64())).unwrap_or(f64::INFINITY);
        linv * lipschitz_bound(&self.r)
    }
}

/// f = L + R with R known through samples on the uniform N^d grid and
/// evaluated elsewhere by trigonometric interpolation.
#[derive(Debug, Clone)]
pub struct GridSampledMap {
    l: IntMatrix,
    samples: GridField,
    coefficients: FourierField,
    interpolant: SpectralInterpolant,
    /// Samples of f⁻¹ − L⁻¹ when known; inversion then interpolates instead of iterating.
    inverse: Option<Box<GridSampledMap>>,
}

impl GridSampledMap {
    pub fn new(l: IntMatrix, samples: GridField) -> Result<Self> {
        if !samples.n.is_power_of_two() {
            return Err(Error::InvalidInput(format!("grid size {} is not a power of two", samples.n)));
        }
        if samples.d != l.dim() || samples.components != l.dim() {
            return Err(Error::InvalidInput("displacement samples must be R^d-valued on a d-dimensional grid".into()));
        }
        if samples.data.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("displacement samples must be finite".into()));
        }
        let coefficients = analyze(&samples);
        let interpolant = SpectralInterpolant::from_grid(&samples);
        Ok(GridSampledMap { l, samples, coefficients, interpolant, inverse: None })
    }

    /// Attaches samples of the inverse map, whose linear part must be L⁻¹.
    pub fn with_inverse(mut self, inverse: GridSampledMap) -> Result<Self> {
        if inverse.l != self.l.inverse()? || inverse.samples.n != self.samples.n {
            return Err(Error::InvalidInput("inverse samples must have linear part L⁻¹ on the same grid".into()));
        }
        self.inverse = Some(Box::new(inverse));
        Ok(self)
    }

    pub fn inverse_samples(&self) -> Option<&GridSampledMap> {
        self.inverse.as_deref()
    }

    /// Samples a map on the grid.
    pub fn sample(f: &dyn TorusMap, n: usize) -> Result<Self> {
        let d = f.dim();
        let mut g = GridField::zeros(d, n, d);
        let values: Vec<Vec<f64>> = (0..g.num_points()).into_par_iter().map(|p| f.displacement(&g.point(p))).collect();
        for (p, v) in values.into_iter().enumerate() {
            g.value_mut(p).copy_from_slice(&v);
        }
        GridSampledMap::new(f.linear().clone(), g)
    }

    pub fn samples(&self) -> &GridField {
        &self.samples
    }

    pub fn coefficients(&self) -> &FourierField {
        &self.coefficients
    }
}

impl TorusMap for GridSampledMap {
    fn linear(&self) -> &IntMatrix {
        &self.l
    }

    fn displacement(&self, x: &[f64]) -> Vec<f64> {
        self.interpolant.eval(x)
    }

    fn inverse_contraction_bound(&self) -> f64 {
        if self.inverse.is_some() {
            return 0.0;
        }
        let linv = self.l.inverse().map(|m| operator_norm(&m.to_f64())).unwrap_or(f64::INFINITY);
        linv * lipschitz_bound(&self.coefficients)
    }

    fn inverse_lift(&self, x: &[f64], tol: f64) -> Result<Vec<f64>> {
        match &self.inverse {
            Some(inv) => Ok(inv.lift(x)),
            None => default_inverse_lift(self, x, tol),
        }
    }
}

/// f = H₀⁻¹∘L∘H₀ with H₀ = Id + h₀ and h₀ a real trigonometric polynomial,
/// evaluated exactly (H₀⁻¹ by fixed-point iteration).
#[derive(Debug, Clone)]
pub struct ConjugatedMap {
    l: IntMatrix,
    linv: DMatrix<f64>,
    h0: FourierField,
    tol: f64,
}

impl ConjugatedMap {
    /// Requires sup‖Dh₀‖ < 1 (coefficient bound), so H₀ is a diffeomorphism.
    pub fn new(l: IntMatrix, h0: FourierField) -> Result<Self> {
        let bound = lipschitz_bound(&h0);
        if bound >= 1.0 {
            return Err(Error::NotDiffeo { bound });
        }
        if h0.d != l.dim() || h0.components != l.dim() {
            return Err(Error::InvalidInput("h0 must be an R^d-valued field on T^d".into()));
        }
        let linv = l.inverse()?.to_f64();
        Ok(ConjugatedMap { l, linv, h0, tol: 1e-15 })
    }

    pub fn h0(&self) -> &FourierField {
        &self.h0
    }

    pub fn h0_at(&self, x: &[f64]) -> Vec<f64> {
        self.h0.eval(x)
    }

    pub fn conjugacy(&self, x: &[f64]) -> Vec<f64> {
        x.iter().zip(self.h0.eval(x)).map(|(a, b)| a + b).collect()
    }

    /// y with y + h₀(y) = z, by y ← z − h₀(y).
    pub fn conjugacy_inverse(&self, z: &[f64]) -> Vec<f64> {
        let mut y = z.to_vec();
        for _ in 0..MAX_ITERATIONS {
            let h = self.h0.eval(&y);
            let next: Vec<f64> = z.iter().zip(&h).map(|(a, b)| a - b).collect();
            let step = next.iter().zip(&y).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            y = next;
            if step <= self.tol {
                break;
            }
        }
        y
    }
}

impl TorusMap for ConjugatedMap {
    fn linear(&self) -> &IntMatrix {
        &self.l
    }

    fn displacement(&self, x: &[f64]) -> Vec<f64> {
        let hx = self.conjugacy(x);
        let lhx: Vec<f64> = self.l.rows().iter().map(|r| r.iter().zip(&hx).map(|(&a, b)| a as f64 * b).sum()).collect();
        let fx = self.conjugacy_inverse(&lhx);
        let lx = self.l.rows().iter().map(|r| r.iter().zip(x).map(|(&a, b)| a as f64 * b).sum::<f64>());
        fx.iter().zip(lx).map(|(a, b)| a - b).collect()
    }

    fn inverse_contraction_bound(&self) -> f64 {
        0.0
    }

    /// Exact inverse H₀⁻¹∘L⁻¹∘H₀; no contraction condition is needed.
    fn inverse_lift(&self, x: &[f64], _tol: f64) -> Result<Vec<f64>> {
        let hx = self.conjugacy(x);
        Ok(self.conjugacy_inverse(&mat_vec(&self.linv, &hx)))
    }
}

/// f⁻¹ = H₀⁻¹∘L⁻¹∘H₀ viewed as a map with linear part L⁻¹.
struct ExactInverse<'a> {
    linv: IntMatrix,
    map: &'a ConjugatedMap,
}

impl TorusMap for ExactInverse<'_> {
    fn linear(&self) -> &IntMatrix {
        &self.linv
    }

    fn displacement(&self, x: &[f64]) -> Vec<f64> {
        let y = self.map.inverse_lift(x, 0.0).expect("exact inverse");
        y.iter().zip(mat_vec(&self.map.linv, x)).map(|(a, b)| a - b).collect()
    }

    fn inverse_contraction_bound(&self) -> f64 {
        0.0
    }

    fn inverse_lift(&self, x: &[f64], _tol: f64) -> Result<Vec<f64>> {
        Ok(self.map.lift(x))
    }
}

/// Samples f = H₀⁻¹∘L∘H₀ and its inverse on the N^d grid and checks L∘H₀ = H₀∘f there.
pub fn manufacture_conjugated_map(l: &IntMatrix, h0: &FourierField, n: usize) -> Result<(GridSampledMap, f64)> {
    let exact = ConjugatedMap::new(l.clone(), h0.clone())?;
    let inverse = GridSampledMap::sample(&ExactInverse { linv: l.inverse()?, map: &exact }, n)?;
    let sampled = GridSampledMap::sample(&exact, n)?.with_inverse(inverse)?;
    let g = sampled.samples();
    let residual = (0..g.num_points())
        .into_par_iter()
        .map(|p| {
            let x = g.point(p);
            let fx = exact.lift(&x);
            let lhs = {
                let hx = exact.conjugacy(&x);
                l.rows().iter().map(|r| r.iter().zip(&hx).map(|(&a, b)| a as f64 * b).sum::<f64>()).collect::<Vec<_>>()
            };
            torus_dist(&lhs, &exact.conjugacy(&fx))
        })
        .reduce(|| 0.0, f64::max);
    Ok((sampled, residual))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cat() -> IntMatrix {
        IntMatrix::new(vec![vec![2, 1], vec![1, 1]]).unwrap()
    }

    fn sin_map(eps: f64, n: Vec<i64>, dir: &[f64], zero: bool) -> TrigPolyMap {
        TrigPolyMap::new(cat(), vec![TrigPolyMap::sin_mode(n, &dir.iter().map(|v| v * eps).collect::<Vec<_>>())], zero).unwrap()
    }

    fn h0(eps: f64) -> FourierField {
        let mut f = FourierField::new(2, 2);
        let (n, c) = TrigPolyMap::sin_mode(vec![1, 0], &[0.0, eps]);
        f.add_to(n, &c);
        f.add_to(vec![-1, 0], &[Complex64::new(0.0, 0.0), Complex64::new(0.0, eps / 2.0)]);
        f
    }

    #[test]
    fn linear_evaluation() {
        let f = TrigPolyMap::linear_map(cat());
        let (red, lift) = f.evaluate(&[0.5, 0.5]);
        assert_eq!(lift, vec![1.5, 1.0]);
        assert_eq!(red, vec![0.5, 0.0]);
    }

    #[test]
    fn sin_perturbation_by_hand() {
        let f = sin_map(0.05, vec![1, 0], &[1.0, 0.0], false);
        let (_, lift) = f.evaluate(&[0.25, 0.0]);
        assert!((lift[0] - 0.55).abs() < 1e-15 && (lift[1] - 0.25).abs() < 1e-15);
    }

    #[test]
    fn zero_fixed_point_flag() {
        let f = TrigPolyMap::new(cat(), vec![TrigPolyMap::cos_mode(vec![1, 1], &[0.03, -0.02])], true).unwrap();
        assert!(f.evaluate(&[0.0, 0.0]).1.iter().all(|v| v.abs() < 1e-16));
        assert!(f.coefficients().hermitian_defect() < 1e-16);
    }

    #[test]
    fn hermitian_symmetry_is_enforced() {
        let modes = vec![
            (vec![1, 2], vec![Complex64::new(1.0, 2.0), Complex64::new(0.0, 0.0)]),
            (vec![-1, -2], vec![Complex64::new(3.0, 0.0), Complex64::new(0.0, 1.0)]),
        ];
        let f = TrigPolyMap::new(cat(), modes, false).unwrap();
        assert!(f.coefficients().hermitian_defect() < 1e-16);
        let c = &f.coefficients().coeffs[&vec![1, 2]];
        assert_eq!(c[0], Complex64::new(2.0, 1.0));
    }

    #[test]
    fn json_schema_round_trip() {
        let text = r#"{"L": [[2,1],[1,1]], "R": [{"n": [1,0], "re": [0.0, 0.0], "im": [-0.025, 0.0]}], "enforce_zero_fixed_point": true}"#;
        let f = TrigPolyMap::from_json(text).unwrap();
        let again = TrigPolyMap::from_spec(&f.to_spec()).unwrap();
        assert_eq!(f.coefficients(), again.coefficients());
        assert!(TrigPolyMap::from_json("{").is_err());
    }

    #[test]
    fn inverse_of_linear_map_is_exact() {
        let f = TrigPolyMap::linear_map(cat());
        let y = f.inverse_lift(&[0.3, 0.7], DEFAULT_TOL).unwrap();
        assert!((y[0] - (0.3 - 0.7)).abs() < 1e-15 && (y[1] - (-0.3 + 1.4)).abs() < 1e-15);
    }

    #[test]
    fn inverse_round_trip_on_random_points() {
        let f = sin_map(0.05, vec![1, 1], &[0.6, -0.3], true);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..1000 {
            let x = vec![rng.gen::<f64>(), rng.gen::<f64>()];
            let y = f.inverse_evaluate(&x, DEFAULT_TOL).unwrap();
            assert!(torus_dist(&f.evaluate(&y).0, &x) <= 1e-11);
        }
    }

    #[test]
    fn large_perturbation_is_not_contracting() {
        let f = sin_map(0.3, vec![2, 1], &[1.0, 1.0], false);
        assert!(matches!(f.inverse_lift(&[0.1, 0.1], DEFAULT_TOL), Err(Error::NotContracting { .. })));
    }

    #[test]
    fn orbits() {
        let f = TrigPolyMap::linear_map(cat());
        let y = f.orbit(&[0.1, 0.2], 2, DEFAULT_TOL).unwrap();
        assert!(torus_dist(&y, &[0.1, 0.7]) < 1e-14);
        assert_eq!(f.orbit(&[0.1, 0.2], 0, DEFAULT_TOL).unwrap(), vec![0.1, 0.2]);
        let g = sin_map(0.05, vec![1, 0], &[1.0, 0.5], false);
        let x = [0.37, 0.81];
        let back = g.orbit(&g.orbit(&x, 3, DEFAULT_TOL).unwrap(), -3, DEFAULT_TOL).unwrap();
        assert!(torus_dist(&back, &x) <= 10.0 * 1e-12 * 50.0);
    }

    #[test]
    fn grid_sampling_reproduces_trig_map() {
        let f = TrigPolyMap::new(
            cat(),
            vec![TrigPolyMap::sin_mode(vec![1, 2], &[0.02, 0.01]), TrigPolyMap::cos_mode(vec![-3, 1], &[0.01, -0.03])],
            false,
        )
        .unwrap();
        let g = GridSampledMap::sample(&f, 16).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..100 {
            let x = vec![rng.gen::<f64>(), rng.gen::<f64>()];
            let a = f.displacement(&x);
            let b = g.displacement(&x);
            assert!(a.iter().zip(&b).all(|(u, v)| (u - v).abs() < 1e-11));
        }
        assert!(GridSampledMap::new(cat(), GridField::zeros(2, 12, 2)).is_err());
    }

    #[test]
    fn manufactured_map() {
        let (g, res) = manufacture_conjugated_map(&cat(), &h0(0.05), 32).unwrap();
        assert!(res <= 1e-10, "residual {res}");
        assert!(g.displacement(&[0.0, 0.0]).iter().all(|v| v.abs() < 1e-12));
        let (g0, res0) = manufacture_conjugated_map(&cat(), &FourierField::new(2, 2), 8).unwrap();
        assert_eq!(res0, 0.0);
        assert!(g0.samples().data.iter().all(|&v| v == 0.0));
        assert!(matches!(manufacture_conjugated_map(&cat(), &h0(0.5), 8), Err(Error::NotDiffeo { .. })));
    }

    #[test]
    fn manufactured_inverse_samples() {
        let (g, _) = manufacture_conjugated_map(&cat(), &h0(0.05), 32).unwrap();
        assert!(g.inverse_samples().is_some());
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..200 {
            let x = vec![rng.gen::<f64>(), rng.gen::<f64>()];
            let y = g.inverse_evaluate(&x, DEFAULT_TOL).unwrap();
            assert!(torus_dist(&g.evaluate(&y).0, &x) < 1e-10);
        }
    }

    #[test]
    fn conjugated_map_inverse_round_trip() {
        let f = ConjugatedMap::new(cat(), h0(0.05)).unwrap();
        let x = [0.2, 0.9];
        let y = f.inverse_lift(&x, DEFAULT_TOL).unwrap();
        let back = f.lift(&y);
        assert!(back.iter().zip(&x).all(|(a, b)| (a - b).abs() < 1e-13));
    }

    proptest! {
        #[test]
        fn degree_one_property(x0 in 0.0..1.0f64, x1 in 0.0..1.0f64, m0 in -5i64..5, m1 in -5i64..5) {
            let f = sin_map(0.04, vec![2, -1], &[0.5, 1.0], false);
            let a = f.lift(&[x0, x1]);
            let b = f.lift(&[x0 + m0 as f64, x1 + m1 as f64]);
            let lm = cat().mul_vec(&[m0, m1]);
            prop_assert!((b[0] - a[0] - lm[0] as f64).abs() < 1e-11);
            prop_assert!((b[1] - a[1] - lm[1] as f64).abs() < 1e-11);
        }
    }
}
