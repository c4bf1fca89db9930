//! Least-squares line fits shared by the decay, growth and ratio estimators.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LineFit {
    pub intercept: f64,
    pub slope: f64,
    /// Residual sum of squares.
    pub rss: f64,
    pub r2: f64,
    pub points: usize,
    /// Standard error of the slope; None with two points (no residual degrees of freedom).
    pub slope_stderr: Option<f64>,
}

/// Ordinary least squares y ≈ intercept + slope·x. None with fewer than two
/// points or constant x.
pub fn fit_line(x: &[f64], y: &[f64]) -> Option<LineFit> {
    let n = x.len().min(y.len());
    if n < 2 {
        return None;
    }
    let mx = x[..n].iter().sum::<f64>() / n as f64;
    let my = y[..n].iter().sum::<f64>() / n as f64;
    let sxx: f64 = x[..n].iter().map(|a| (a - mx).powi(2)).sum();
    let sxy: f64 = x[..n].iter().zip(&y[..n]).map(|(a, b)| (a - mx) * (b - my)).sum();
    let syy: f64 = y[..n].iter().map(|b| (b - my).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = x[..n].iter().zip(&y[..n]).map(|(a, b)| (b - intercept - slope * a).powi(2)).sum();
    let r2 = if syy > 0.0 { 1.0 - rss / syy } else { 1.0 };
    let slope_stderr = (n > 2).then(|| (rss / (n - 2) as f64 / sxx).sqrt());
    Some(LineFit { intercept, slope, rss, r2, points: n, slope_stderr })
}

/// The same fit restricted to the last half of the data (at least two points).
pub fn fit_last_half(x: &[f64], y: &[f64]) -> Option<LineFit> {
    let n = x.len().min(y.len());
    let start = (n / 2).min(n.saturating_sub(2));
    fit_line(&x[start..n], &y[start..n])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_line() {
        let x = [1.0, 2.0, 3.0, 4.0];
        let y = [3.0, 5.0, 7.0, 9.0];
        let f = fit_line(&x, &y).unwrap();
        assert!((f.slope - 2.0).abs() < 1e-14 && (f.intercept - 1.0).abs() < 1e-14);
        assert!(f.rss < 1e-24 && (f.r2 - 1.0).abs() < 1e-14);
        assert!(fit_line(&[1.0], &[1.0]).is_none());
        assert!(fit_line(&[1.0, 1.0], &[1.0, 2.0]).is_none());
    }

    #[test]
    fn last_half() {
        let x: Vec<f64> = (0..10).map(f64::from).collect();
        let y: Vec<f64> = x.iter().map(|&t| if t < 5.0 { 100.0 } else { -t }).collect();
        let f = fit_last_half(&x, &y).unwrap();
        assert_eq!(f.points, 5);
        assert!((f.slope + 1.0).abs() < 1e-14);
    }
}
