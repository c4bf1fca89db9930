//! Lattice scan for the Diophantine property of a subspace V ⊂ R^d:
//! min over 0 ≠ n, ‖n‖ ≤ N of ‖n‖^e·Σ_i|n·v_i| and of ‖n‖^e·dist(n, V^⊥).

use std::cmp::Ordering;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// |n·v| below DOT_FLOOR·‖n‖ is f64 roundoff of an exact zero and is scored as 0.
pub const DOT_FLOOR: f64 = 1e-12;
const ORTHONORMAL_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanRow {
    pub n: Vec<i64>,
    pub norm: f64,
    pub dot_sum: f64,
    pub weighted: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiophantineScan {
    pub basis: Vec<Vec<f64>>,
    pub radius: u64,
    pub exponent: f64,
    pub empirical_k: f64,
    pub witness: Vec<i64>,
    pub katznelson_k: f64,
    pub katznelson_witness: Vec<i64>,
    pub points_scanned: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trace: Option<Vec<ScanRow>>,
}

impl DiophantineScan {
    pub fn trace_csv(&self) -> Option<String> {
        let rows = self.trace.as_ref()?;
        let mut out = String::from("n,norm,dot_sum,weighted\n");
        for r in rows {
            let n: Vec<String> = r.n.iter().map(|x| x.to_string()).collect();
            out.push_str(&format!("{},{},{},{}\n", n.join(" "), r.norm, r.dot_sum, r.weighted));
        }
        Some(out)
    }
}

#[derive(Clone)]
struct Best {
    value: f64,
    shell: i64,
    n: Vec<i64>,
}

impl Best {
    /// Scan order: value, then ∞-norm shell, then lexicographic.
    fn better_than(&self, other: &Best) -> bool {
        match self.value.total_cmp(&other.value) {
            Ordering::Less => true,
            Ordering::Greater => false,
            Ordering::Equal => (self.shell, &self.n) < (other.shell, &other.n),
        }
    }
}

fn pick(a: Option<Best>, b: Option<Best>) -> Option<Best> {
    match (a, b) {
        (Some(x), Some(y)) => Some(if y.better_than(&x) { y } else { x }),
        (x, None) => x,
        (None, y) => y,
    }
}

struct Partial {
    sum: Option<Best>,
    katz: Option<Best>,
    count: u64,
    rows: Vec<ScanRow>,
}

fn check_basis(basis: &[Vec<f64>], d: usize) -> Result<()> {
    for (i, u) in basis.iter().enumerate() {
        if u.len() != d {
            return Err(Error::InvalidInput(format!("basis vector {i} has length {}, expected {d}", u.len())));
        }
        for (j, w) in basis.iter().enumerate() {
            let g: f64 = u.iter().zip(w).map(|(a, b)| a * b).sum();
            let target = if i == j { 1.0 } else { 0.0 };
            if (g - target).abs() > ORTHONORMAL_TOL {
                return Err(Error::InvalidInput("scan basis must be orthonormal".into()));
            }
        }
    }
    Ok(())
}

/// Scans every nonzero n ∈ Z^d with ‖n‖ ≤ N, one of each pair ±n. Ties are
/// broken by increasing ‖n‖∞ shell and then lexicographically, so witnesses
/// are deterministic.
pub fn diophantine_scan(basis: &[Vec<f64>], d: usize, radius: u64, exponent: f64, keep_trace: bool) -> Result<DiophantineScan> {
    if basis.is_empty() || d == 0 || radius == 0 {
        return Err(Error::InvalidInput("scan needs a nonempty basis, d ≥ 1 and N ≥ 1".into()));
    }
    check_basis(basis, d)?;
    let r = radius as i64;
    let r2 = r * r;
    let parts: Vec<Partial> = (0..=r)
        .into_par_iter()
        .map(|first| {
            let mut p = Partial { sum: None, katz: None, count: 0, rows: Vec::new() };
            let mut n = vec![0i64; d];
            n[0] = first;
            scan_rest(basis, &mut n, 1, first * first, r, r2, exponent, keep_trace, &mut p);
            p
        })
        .collect();
    let mut sum = None;
    let mut katz = None;
    let mut points = 0;
    let mut rows = Vec::new();
    for p in parts {
        sum = pick(sum, p.sum);
        katz = pick(katz, p.katz);
        points += p.count;
        rows.extend(p.rows);
    }
    let (sum, katz) = match (sum, katz) {
        (Some(s), Some(k)) => (s, k),
        _ => return Err(Error::InvalidInput("empty scan ball".into())),
    };
    Ok(DiophantineScan {
        basis: basis.to_vec(),
        radius,
        exponent,
        empirical_k: sum.value,
        witness: sum.n,
        katznelson_k: katz.value,
        katznelson_witness: katz.n,
        points_scanned: points,
        trace: keep_trace.then_some(rows),
    })
}

#[allow(clippy::too_many_arguments)]
fn scan_rest(
    basis: &[Vec<f64>],
    n: &mut Vec<i64>,
    k: usize,
    acc2: i64,
    r: i64,
    r2: i64,
    exponent: f64,
    keep_trace: bool,
    p: &mut Partial,
) {
    let d = n.len();
    if k == d {
        // n and −n score identically; keep the representative whose first nonzero entry is positive.
        if acc2 == 0 || n.iter().find(|&&x| x != 0).map_or(true, |&x| x < 0) {
            return;
        }
        let norm = (acc2 as f64).sqrt();
        let floor = DOT_FLOOR * norm;
        let mut dot_sum = 0.0;
        let mut proj2 = 0.0;
        for v in basis {
            let mut t: f64 = n.iter().zip(v).map(|(&a, b)| a as f64 * b).sum();
            if t.abs() <= floor {
                t = 0.0;
            }
            dot_sum += t.abs();
            proj2 += t * t;
        }
        let scale = norm.powf(exponent);
        let shell = n.iter().map(|x| x.abs()).max().unwrap();
        let sum = Best { value: scale * dot_sum, shell, n: n.clone() };
        let katz = Best { value: scale * proj2.sqrt(), shell, n: n.clone() };
        if keep_trace {
            p.rows.push(ScanRow { n: n.clone(), norm, dot_sum, weighted: sum.value });
        }
        p.count += 1;
        if p.sum.as_ref().map_or(true, |b| sum.better_than(b)) {
            p.sum = Some(sum);
        }
        if p.katz.as_ref().map_or(true, |b| katz.better_than(b)) {
            p.katz = Some(katz);
        }
        return;
    }
    let room = r2 - acc2;
    let span = (room as f64).sqrt().floor() as i64;
    let span = (span.min(r)..=span.min(r) + 1).rev().find(|s| s * s <= room).unwrap_or(0);
    for x in -span..=span {
        n[k] = x;
        scan_rest(basis, n, k + 1, acc2 + x * x, r, r2, exponent, keep_trace, p);
    }
    n[k] = 0;
}
