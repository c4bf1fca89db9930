//! Decay classification of Fourier coefficients: exponential (analytic-type)
//! versus power law (finite smoothness) above a noise floor.

use serde::{Deserialize, Serialize};

use super::fourier::{analyze, norm, FourierField, GridField};
use crate::fit::{fit_last_half, LineFit};

/// Relative machine floor: coefficients below this fraction of the peak are roundoff.
pub const MACHINE_FLOOR: f64 = 1e-13;
/// Shells are used in fits only when they exceed the floor by this factor.
pub const FLOOR_MARGIN: f64 = 10.0;
/// Fewer usable shells than this means the field falls to the floor almost at once.
pub const MIN_FIT_SHELLS: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DecayModel {
    Exponential,
    Power,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShellRow {
    pub shell: usize,
    pub max_coeff: f64,
    /// log residuals of the two fitted models at this shell (fitted shells only).
    pub exponential_residual: Option<f64>,
    pub power_residual: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegularityReport {
    pub preferred: DecayModel,
    /// log max|ĥ| ≈ a − rate·k.
    pub exponential: Option<LineFit>,
    /// log max|ĥ| ≈ a − exponent·log k.
    pub power: Option<LineFit>,
    pub floor: f64,
    pub fitted_shells: Vec<usize>,
    pub shells: Vec<ShellRow>,
}

impl RegularityReport {
    pub fn decay_rate(&self) -> Option<f64> {
        self.exponential.map(|f| -f.slope)
    }

    pub fn power_exponent(&self) -> Option<f64> {
        self.power.map(|f| -f.slope)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("shell,max_coeff,exponential_residual,power_residual\n");
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        for r in &self.shells {
            out.push_str(&format!("{},{},{},{}\n", r.shell, r.max_coeff, opt(r.exponential_residual), opt(r.power_residual)));
        }
        out
    }
}

/// The coefficients of h above the report's fit threshold FLOOR_MARGIN × floor.
/// The rest are roundoff; weighting them by powers of ‖n‖ manufactures growth.
pub fn significant_coefficients(h: &GridField, report: &RegularityReport) -> FourierField {
    let threshold = FLOOR_MARGIN * report.floor;
    let mut f = analyze(h);
    f.coeffs.retain(|_, c| c.iter().any(|z| z.norm() > threshold));
    f
}

pub fn regularity_report(h: &GridField, noise_floor: Option<f64>) -> RegularityReport {
    regularity_report_coeffs(&analyze(h), noise_floor)
}

/// Shell maxima over round(‖n‖) = k, for 1 ≤ k < N/2 on grid data. Shells above
/// FLOOR_MARGIN × floor enter the fits, which use their last half; the model with
/// the smaller residual wins. With fewer than MIN_FIT_SHELLS usable shells the
/// coefficients hit the floor immediately and the verdict is exponential.
pub fn regularity_report_coeffs(h: &FourierField, noise_floor: Option<f64>) -> RegularityReport {
    let limit = match h.grid {
        Some(n) => n / 2,
        None => h.support_radius().round() as usize + 1,
    };
    let mut maxima = vec![0.0f64; limit.max(1)];
    for (n, p) in h.power() {
        let k = norm(n).round() as usize;
        if k >= 1 && k < limit {
            maxima[k] = maxima[k].max(p.sqrt());
        }
    }
    let peak = maxima.iter().cloned().fold(0.0, f64::max);
    let floor = (peak * MACHINE_FLOOR).max(noise_floor.unwrap_or(0.0));
    let fitted_shells: Vec<usize> = (1..limit).filter(|&k| maxima[k] > FLOOR_MARGIN * floor).collect();
    let start = if fitted_shells.len() >= 2 { (fitted_shells.len() / 2).min(fitted_shells.len() - 2) } else { 0 };
    let y: Vec<f64> = fitted_shells.iter().map(|&k| maxima[k].ln()).collect();
    let xk: Vec<f64> = fitted_shells.iter().map(|&k| k as f64).collect();
    let xl: Vec<f64> = xk.iter().map(|k| k.ln()).collect();
    let exponential = fit_last_half(&xk, &y);
    let power = fit_last_half(&xl, &y);
    let preferred = if fitted_shells.len() < MIN_FIT_SHELLS {
        DecayModel::Exponential
    } else {
        match (exponential, power) {
            (Some(e), Some(p)) if p.rss < e.rss => DecayModel::Power,
            _ => DecayModel::Exponential,
        }
    };
    let shells = (1..limit)
        .map(|k| {
            let pos = fitted_shells.iter().position(|&s| s == k).filter(|&i| i >= start);
            let res = |f: Option<LineFit>, x: f64| f.map(|f| maxima[k].ln() - f.intercept - f.slope * x);
            ShellRow {
                shell: k,
                max_coeff: maxima[k],
                exponential_residual: pos.and_then(|_| res(exponential, k as f64)),
                power_residual: pos.and_then(|_| res(power, (k as f64).ln())),
            }
        })
        .collect();
    RegularityReport { preferred, exponential, power, floor, fitted_shells, shells }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;

    fn radial(d: usize, radius: i64, f: impl Fn(f64) -> f64) -> FourierField {
        let mut out = FourierField::new(d, 1);
        for a in -radius..=radius {
            for b in -radius..=radius {
                let n = [a, b];
                let r = norm(&n);
                if r > 0.0 {
                    out.add_to(n.to_vec(), &[Complex64::new(f(r), 0.0)]);
                }
            }
        }
        out.grid = Some(2 * radius as usize + 2);
        out
    }

    #[test]
    fn trig_polynomial_is_exponential() {
        let g = GridField::from_fn(2, 32, 1, |x| vec![(2.0 * std::f64::consts::PI * (x[0] + 2.0 * x[1])).sin()]);
        let r = regularity_report(&g, None);
        assert_eq!(r.preferred, DecayModel::Exponential);
        assert!(r.fitted_shells.len() < MIN_FIT_SHELLS);
        assert!(r.floor < 1e-12);
    }

    #[test]
    fn geometric_and_power_decay_are_told_apart() {
        let e = regularity_report_coeffs(&radial(2, 31, |r| (-0.7 * r).exp()), None);
        assert_eq!(e.preferred, DecayModel::Exponential);
        assert!((e.decay_rate().unwrap() - 0.7).abs() < 0.1);
        let p = regularity_report_coeffs(&radial(2, 31, |r| r.powf(-1.3)), None);
        assert_eq!(p.preferred, DecayModel::Power);
        assert!((p.power_exponent().unwrap() - 1.3).abs() < 0.1);
        assert!(p.to_csv().lines().count() > 10);
    }

    #[test]
    fn noise_floor_cuts_fit_range() {
        let f = radial(2, 31, |r| (-r).exp());
        let r = regularity_report_coeffs(&f, Some(1e-6));
        assert!(r.fitted_shells.iter().all(|&k| (-(k as f64 + 0.5)).exp() > 1e-5 * 0.99));
    }
}
