//! Command orchestration behind the `toral-lab` binary. A `RunConfig` is the
//! whole input of a run: re-executing the config a run emits reproduces its
//! outputs bit for bit at the same thread count.

use std::fs;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::classify::classify;
use crate::conjugacy::{
    assemble_and_validate, solve_center, solve_stable, solve_unstable, CenterConfig, CenterSolution, ComponentSolution,
    SolverConfig,
};
use crate::error::Error;
use crate::exact_algebra::IntMatrix;
use crate::harmonic::{
    diophantine_scan, l2_upgrade_check, regularity_report, significant_coefficients, synthesize, FourierField, GridField,
    L2Verdict, FLOOR_MARGIN,
};
use crate::jets::{iterate_growth, two_rate_growth, LeafMap, Trig, TwoRateMap, DEFAULT_SAMPLES};
use crate::mixing::{decay_fit, DecayFitConfig};
use crate::spectral::build_splitting;
use crate::torus_maps::{manufacture_conjugated_map, ModeSpec, TorusMap, TrigPolyMap, TrigPolyMapSpec};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
pub const THREADS_ENV: &str = "TORAL_LAB_THREADS";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Command {
    Classify {
        matrix: PathBuf,
    },
    Solve {
        map: PathBuf,
        grid: usize,
        tol: f64,
        /// Letters from "usc" naming the parts to solve.
        components: String,
        #[serde(default = "default_max_iterations")]
        max_iterations: usize,
        #[serde(default)]
        strict_grid: bool,
    },
    AnalyzeRegularity {
        field: PathBuf,
        #[serde(default)]
        noise_floor: Option<f64>,
        /// Every multi-index with |m| ≤ max_order is checked.
        #[serde(default = "default_max_order")]
        max_order: u32,
        /// Defaults to |m|, with K = (2π)^{|m|}.
        #[serde(default)]
        beta: Option<f64>,
        #[serde(default)]
        k_bound: Option<f64>,
    },
    DiophScan {
        matrix: PathBuf,
        /// unstable, stable, center, max, min or group:<i>.
        subspace: String,
        radius: u64,
        /// Defaults to the dimension d.
        #[serde(default)]
        exponent: Option<f64>,
        #[serde(default)]
        trace: bool,
    },
    Mixing {
        matrix: PathBuf,
        alpha: f64,
        trials: usize,
        n_max: usize,
        #[serde(default)]
        radius: Option<u32>,
    },
    JetsGrowth {
        sigma: f64,
        /// Present for the two-rate model λ(x) = λ + ε·cos(2πx).
        #[serde(default)]
        lambda: Option<f64>,
        eps: f64,
        m_max: usize,
        n_max: usize,
        delta: f64,
        #[serde(default = "default_samples")]
        samples: usize,
    },
    Report {
        dir: PathBuf,
    },
}

fn default_max_iterations() -> usize {
    SolverConfig::default().max_iterations
}

fn default_max_order() -> u32 {
    2
}

fn default_samples() -> usize {
    DEFAULT_SAMPLES
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Classify { .. } => "classify",
            Command::Solve { .. } => "solve",
            Command::AnalyzeRegularity { .. } => "analyze-regularity",
            Command::DiophScan { .. } => "dioph-scan",
            Command::Mixing { .. } => "mixing",
            Command::JetsGrowth { .. } => "jets-growth",
            Command::Report { .. } => "report",
        }
    }

    /// Library module whose errors this command surfaces.
    pub fn module(&self) -> &'static str {
        match self {
            Command::Classify { .. } => "classify",
            Command::Solve { .. } => "conjugacy",
            Command::AnalyzeRegularity { .. } | Command::DiophScan { .. } => "harmonic",
            Command::Mixing { .. } => "mixing",
            Command::JetsGrowth { .. } => "jets",
            Command::Report { .. } => "cli",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub command: Command,
    /// Directory receiving report.json, config.json and any CSV or binary outputs.
    #[serde(default)]
    pub out: Option<PathBuf>,
    /// Falls back to TORAL_LAB_THREADS, then to rayon's default.
    #[serde(default)]
    pub threads: Option<usize>,
    #[serde(default)]
    pub seed: u64,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<RunConfig, RunError> {
        serde_json::from_str(text).map_err(|e| RunError::config(format!("run config: {e}")))
    }

    /// Fills `threads` from the environment when unset.
    pub fn resolved(&self) -> Result<RunConfig, RunError> {
        let mut c = self.clone();
        if c.threads.is_none() {
            if let Ok(v) = std::env::var(THREADS_ENV) {
                let t = v
                    .trim()
                    .parse::<usize>()
                    .map_err(|_| RunError::config(format!("{THREADS_ENV}={v} is not a thread count")))?;
                c.threads = Some(t);
            }
        }
        if c.threads == Some(0) {
            return Err(RunError::config("threads must be at least 1"));
        }
        Ok(c)
    }
}

/// A module error tagged with where it came from, for structured reporting.
#[derive(Debug, Clone, PartialEq)]
pub struct RunError {
    pub module: &'static str,
    pub error: Error,
    pub parameters: Value,
}

impl RunError {
    pub fn config(msg: impl Into<String>) -> RunError {
        RunError { module: "cli", error: Error::ConfigInvalid(msg.into()), parameters: Value::Null }
    }

    fn io(path: &Path, e: std::io::Error) -> RunError {
        RunError { module: "cli", error: Error::InvalidInput(format!("{}: {e}", path.display())), parameters: Value::Null }
    }

    pub fn kind(&self) -> String {
        let debug = format!("{:?}", self.error);
        debug.split(|c: char| !c.is_alphanumeric()).next().unwrap_or_default().to_string()
    }

    pub fn to_json(&self) -> Value {
        json!({ "error": { "module": self.module, "kind": self.kind(), "message": self.error.to_string(), "parameters": self.parameters } })
    }

    pub fn exit_code(&self) -> i32 {
        match self.error {
            Error::ConfigInvalid(_) => 2,
            _ => 1,
        }
    }
}

/// Executes a run. The returned report is also written to `out/report.json`
/// together with the resolved config as `out/config.json`.
pub fn run(config: &RunConfig) -> Result<Value, RunError> {
    let config = config.resolved()?;
    let pool = {
        let mut b = rayon::ThreadPoolBuilder::new();
        if let Some(t) = config.threads {
            b = b.num_threads(t);
        }
        b.build().map_err(|e| RunError::config(format!("thread pool: {e}")))?
    };
    if let Some(out) = &config.out {
        fs::create_dir_all(out).map_err(|e| RunError::io(out, e))?;
    }
    let module = config.command.module();
    let parameters = serde_json::to_value(&config.command).unwrap_or(Value::Null);
    let result = pool.install(|| execute(&config)).map_err(|e| match e {
        Failure::Run(r) => r,
        Failure::Module(error) => RunError { module, error, parameters },
    })?;
    let report = json!({ "version": VERSION, "config": config, "result": result });
    if let Some(out) = &config.out {
        write(out, "report.json", serde_json::to_string_pretty(&report).unwrap().as_bytes())?;
        write(out, "config.json", serde_json::to_string_pretty(&config).unwrap().as_bytes())?;
    }
    Ok(report)
}

enum Failure {
    Run(RunError),
    Module(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Module(e)
    }
}

impl From<RunError> for Failure {
    fn from(e: RunError) -> Self {
        Failure::Run(e)
    }
}

fn write(dir: &Path, name: &str, bytes: &[u8]) -> Result<(), RunError> {
    let p = dir.join(name);
    fs::write(&p, bytes).map_err(|e| RunError::io(&p, e))
}

fn write_opt(out: &Option<PathBuf>, name: &str, bytes: &[u8]) -> Result<(), RunError> {
    match out {
        Some(dir) => write(dir, name, bytes),
        None => Ok(()),
    }
}

fn read_text(path: &Path) -> Result<String, RunError> {
    fs::read_to_string(path).map_err(|e| RunError::io(path, e))
}

fn parse_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, RunError> {
    let text = read_text(path)?;
    serde_json::from_str(&text).map_err(|e| RunError::config(format!("{}: {e}", path.display())))
}

fn read_matrix(path: &Path) -> Result<IntMatrix, Failure> {
    let rows: Vec<Vec<i64>> = parse_json(path)?;
    Ok(IntMatrix::new(rows)?)
}

fn execute(config: &RunConfig) -> Result<Value, Failure> {
    let out = &config.out;
    match &config.command {
        Command::Classify { matrix } => {
            let m = read_matrix(matrix)?;
            let c = match classify(&m) {
                Err(Error::NotInGLdZ { classification: Some(c), .. }) => *c,
                other => other?,
            };
            Ok(serde_json::to_value(c).unwrap())
        }
        Command::Solve { map, grid, tol, components, max_iterations, strict_grid } => {
            let cfg = SolverConfig { grid: *grid, tol: *tol, max_iterations: *max_iterations, strict_grid: *strict_grid };
            solve_command(map, &cfg, components, out)
        }
        Command::AnalyzeRegularity { field, noise_floor, max_order, beta, k_bound } => {
            let bytes = fs::read(field).map_err(|e| RunError::io(field, e))?;
            let g = GridField::from_bytes(&bytes)?;
            analyze_command(&g, *noise_floor, *max_order, *beta, *k_bound, out)
        }
        Command::DiophScan { matrix, subspace, radius, exponent, trace } => {
            let m = read_matrix(matrix)?;
            let s = build_splitting(&m)?;
            let basis = match subspace.as_str() {
                "unstable" => &s.e_u,
                "stable" => &s.e_s,
                "center" => &s.e_c,
                "max" => &s.e_max,
                "min" => &s.e_min,
                other => {
                    let i = other
                        .strip_prefix("group:")
                        .and_then(|i| i.parse::<usize>().ok())
                        .filter(|&i| i < s.group_subspaces.len())
                        .ok_or_else(|| RunError::config(format!("unknown subspace {other}")))?;
                    &s.group_subspaces[i]
                }
            };
            let d = m.dim();
            let scan = diophantine_scan(&basis.basis, d, *radius, exponent.unwrap_or(d as f64), *trace)?;
            if let Some(csv) = scan.trace_csv() {
                write_opt(out, "scan.csv", csv.as_bytes())?;
            }
            let mut v = serde_json::to_value(&scan).unwrap();
            v.as_object_mut().unwrap().remove("trace");
            Ok(v)
        }
        Command::Mixing { matrix, alpha, trials, n_max, radius } => {
            let m = read_matrix(matrix)?;
            let cfg = DecayFitConfig { alpha: *alpha, trials: *trials, n_max: *n_max, radius: *radius, seed: config.seed };
            let fit = decay_fit(&m, &cfg)?;
            write_opt(out, "decay.csv", fit.to_csv().as_bytes())?;
            Ok(serde_json::to_value(&fit).unwrap())
        }
        Command::JetsGrowth { sigma, lambda, eps, m_max, n_max, delta, samples } => {
            let leaf = LeafMap::new(*sigma, *eps, Trig::sin1(1.0));
            let table = match lambda {
                Some(l) => {
                    let map = TwoRateMap { leaf, lambda0: *l, lambda_phi: Trig::cos1(*eps) };
                    two_rate_growth(&map, *n_max, *m_max, *delta, *samples)?
                }
                None => iterate_growth(&leaf, *n_max, *m_max, *delta, *samples)?,
            };
            write_opt(out, "growth.csv", table.to_csv().as_bytes())?;
            let mut v = serde_json::to_value(&table).unwrap();
            v.as_object_mut().unwrap().remove("rows");
            v["holds"] = json!(table.holds());
            Ok(v)
        }
        Command::Report { dir } => Ok(report_command(dir)?),
    }
}

/// Map file: {"L": [[..]], "R": [modes]} for f = L + R, or {"L": [[..]], "H0": [modes]}
/// for the manufactured f = H₀⁻¹∘L∘H₀ with H₀ = Id + h₀.
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct MapFile {
    #[serde(rename = "L")]
    l: Vec<Vec<i64>>,
    #[serde(rename = "R", default)]
    r: Option<Vec<ModeSpec>>,
    #[serde(rename = "H0", default)]
    h0: Option<Vec<ModeSpec>>,
    #[serde(default)]
    enforce_zero_fixed_point: bool,
}

fn modes_to_field(d: usize, modes: &[ModeSpec]) -> Result<FourierField, Error> {
    let mut f = FourierField::new(d, d);
    for m in modes {
        if m.n.len() != d || m.re.len() != d || m.im.len() != d {
            return Err(Error::InvalidInput(format!("mode {:?} does not have {d} entries", m.n)));
        }
        let c: Vec<Complex64> = m.re.iter().zip(&m.im).map(|(&a, &b)| Complex64::new(a, b)).collect();
        f.add_to(m.n.clone(), &c);
    }
    Ok(f)
}

fn component_summary(c: &ComponentSolution) -> Value {
    json!({
        "iterations": c.iterations,
        "last_update": c.last_update,
        "contraction_ratio": c.contraction_ratio,
        "max_step_ratio": c.max_step_ratio,
        "interpolation_residual": c.interpolation_residual,
    })
}

fn center_summary(c: &CenterSolution) -> Value {
    json!({
        "terms": c.terms,
        "dropped_mass": c.dropped_mass,
        "converged_fraction": c.converged_fraction,
        "ratio_below_one_fraction": c.ratio_below_one_fraction,
        "mask": c.mask(),
        "coefficients": c.coefficients,
    })
}

fn solve_command(path: &Path, cfg: &SolverConfig, components: &str, out: &Option<PathBuf>) -> Result<Value, Failure> {
    if components.is_empty() || !components.chars().all(|c| "usc".contains(c)) {
        return Err(RunError::config(format!("components must be letters from \"usc\", got {components:?}")).into());
    }
    let file: MapFile = parse_json(path)?;
    let l = IntMatrix::new(file.l.clone())?;
    let d = l.dim();
    let s = build_splitting(&l)?;
    let mut manufactured = None;
    let map: Box<dyn TorusMap> = match (&file.r, &file.h0) {
        (Some(_), Some(_)) => return Err(RunError::config("map file has both R and H0").into()),
        (_, Some(h0)) => {
            let h0 = modes_to_field(d, h0)?;
            let (f, residual) = manufacture_conjugated_map(&l, &h0, cfg.grid)?;
            manufactured = Some((h0, residual));
            Box::new(f)
        }
        (r, None) => Box::new(TrigPolyMap::from_spec(&TrigPolyMapSpec {
            l: file.l.clone(),
            r: r.clone().unwrap_or_default(),
            enforce_zero_fixed_point: file.enforce_zero_fixed_point,
        })?),
    };
    let f = map.as_ref();
    let want = |c: char| components.contains(c);
    let h_u = if want('u') && s.e_u.dim() > 0 { Some(solve_unstable(f, &s, cfg)?) } else { None };
    let h_s = if want('s') && s.e_s.dim() > 0 { Some(solve_stable(f, &s, cfg)?) } else { None };
    let h_c = if want('c') && s.e_c.dim() > 0 {
        Some(solve_center(f, &s, &CenterConfig { grid: cfg.grid, ..CenterConfig::default() })?)
    } else {
        None
    };
    if h_u.is_none() && h_s.is_none() && h_c.is_none() {
        return Err(RunError::config(format!("no requested component in \"{components}\" is nontrivial for this matrix")).into());
    }
    let sol = assemble_and_validate(f, h_s, h_c, h_u, Vec::new())?;
    let mut report = json!({
        "d": d,
        "grid": cfg.grid,
        "residual_sup": sol.residual_sup,
        "jacobian": sol.jacobian,
        "h_sup": sol.h.sup_norm(),
    });
    let parts = [("h_u", sol.h_u.as_ref()), ("h_s", sol.h_s.as_ref())];
    for (name, c) in parts {
        if let Some(c) = c {
            report[name] = component_summary(c);
            write_opt(out, &format!("{name}.bin"), &c.field.to_bytes())?;
        }
    }
    if let Some(c) = &sol.h_c {
        report["h_c"] = center_summary(c);
        write_opt(out, "h_c.bin", &c.field.to_bytes())?;
    }
    write_opt(out, "h.bin", &sol.h.to_bytes())?;
    if let Some((h0, residual)) = manufactured {
        let truth = synthesize(&h0, cfg.grid);
        report["manufactured"] = json!({
            "construction_residual": residual,
            "recovery_error_sup": sol.h.sub(&truth).sup_norm(),
        });
    }
    // Coefficients are accurate to the update tolerance; the pointwise residual of a
    // rough solution mostly measures interpolation error and would hide its tail.
    let reg = regularity_report(&sol.h, Some(cfg.tol));
    write_opt(out, "regularity.csv", reg.to_csv().as_bytes())?;
    report["regularity"] = json!({
        "preferred": reg.preferred,
        "decay_rate": reg.decay_rate(),
        "power_exponent": reg.power_exponent(),
    });
    Ok(report)
}

/// Every m ∈ N^d with |m| = order, in lexicographic order.
pub fn multi_indices(d: usize, order: u32) -> Vec<Vec<u32>> {
    if d == 0 {
        return if order == 0 { vec![Vec::new()] } else { Vec::new() };
    }
    let mut out = Vec::new();
    for first in (0..=order).rev() {
        for mut rest in multi_indices(d - 1, order - first) {
            rest.insert(0, first);
            out.push(rest);
        }
    }
    out
}

fn analyze_command(
    g: &GridField,
    noise_floor: Option<f64>,
    max_order: u32,
    beta: Option<f64>,
    k_bound: Option<f64>,
    out: &Option<PathBuf>,
) -> Result<Value, Failure> {
    let reg = regularity_report(g, noise_floor);
    write_opt(out, "regularity.csv", reg.to_csv().as_bytes())?;
    let threshold = FLOOR_MARGIN * reg.floor;
    let coeffs = significant_coefficients(g, &reg);
    let mut checks = Vec::new();
    let mut any_growing = false;
    let mut all_consistent = true;
    for order in 0..=max_order {
        let b = beta.unwrap_or(order as f64);
        let k = k_bound.unwrap_or_else(|| (2.0 * std::f64::consts::PI).powi(order as i32));
        for m in multi_indices(g.d, order) {
            let r = l2_upgrade_check(&coeffs, &m, b, k);
            any_growing |= r.verdict == L2Verdict::Growing;
            all_consistent &= r.verdict == L2Verdict::ConsistentWithL2;
            checks.push(json!({
                "multi_index": r.multi_index,
                "beta": r.beta,
                "bound": r.bound,
                "final_sum": r.partial_sums.last().map(|p| p.1),
                "growth_exponent": r.growth_fit.map(|f| f.slope),
                "verdict": r.verdict,
            }));
        }
    }
    let overall = if any_growing {
        L2Verdict::Growing
    } else if all_consistent {
        L2Verdict::ConsistentWithL2
    } else {
        L2Verdict::Inconclusive
    };
    Ok(json!({ "regularity": reg, "l2_threshold": threshold, "l2_checks": checks, "l2_verdict": overall }))
}

/// Collects every report.json directly in `dir` or one level below it.
fn report_command(dir: &Path) -> Result<Value, RunError> {
    let mut paths = Vec::new();
    let top = dir.join("report.json");
    if top.is_file() {
        paths.push(top);
    }
    let entries = fs::read_dir(dir).map_err(|e| RunError::io(dir, e))?;
    let mut subdirs: Vec<PathBuf> = entries.filter_map(|e| e.ok().map(|e| e.path())).filter(|p| p.is_dir()).collect();
    subdirs.sort();
    paths.extend(subdirs.into_iter().map(|p| p.join("report.json")).filter(|p| p.is_file()));
    let mut rows = Vec::new();
    for p in &paths {
        let v: Value = parse_json(p)?;
        let command = v["config"]["command"]["name"].as_str().unwrap_or("unknown").to_string();
        rows.push(json!({
            "path": p.display().to_string(),
            "command": command,
            "version": v["version"],
            "headline": headline(&command, &v["result"]),
        }));
    }
    Ok(json!({ "reports": rows }))
}

fn headline(command: &str, r: &Value) -> Value {
    let keys: &[&str] = match command {
        "classify" => &["hyperbolic", "partially_hyperbolic", "ergodic", "irreducible", "very_weakly_irreducible", "witness"],
        "solve" => &["residual_sup", "manufactured", "regularity"],
        "analyze-regularity" => &["l2_verdict"],
        "dioph-scan" => &["radius", "empirical_k", "witness"],
        "mixing" => &["gamma", "r2", "fit_range"],
        "jets-growth" => &["kind", "rate", "holds"],
        _ => &[],
    };
    let mut h = serde_json::Map::new();
    for k in keys {
        if let Some(v) = r.get(*k) {
            h.insert((*k).to_string(), v.clone());
        }
    }
    if command == "analyze-regularity" {
        h.insert("preferred".into(), r["regularity"]["preferred"].clone());
    }
    Value::Object(h)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn multi_indices_count() {
        assert_eq!(multi_indices(2, 3), vec![vec![3, 0], vec![2, 1], vec![1, 2], vec![0, 3]]);
        assert_eq!(multi_indices(3, 2).len(), 6);
        assert_eq!(multi_indices(2, 0), vec![vec![0, 0]]);
    }

    #[test]
    fn config_round_trips() {
        let c = RunConfig {
            command: Command::JetsGrowth { sigma: 0.5, lambda: None, eps: 0.01, m_max: 3, n_max: 10, delta: 0.05, samples: 8 },
            out: None,
            threads: Some(1),
            seed: 3,
        };
        let text = serde_json::to_string(&c).unwrap();
        assert!(text.contains("\"name\":\"jets-growth\""));
        assert_eq!(RunConfig::from_json(&text).unwrap(), c);
    }

    #[test]
    fn malformed_config_is_config_invalid() {
        for text in ["", "{", "{\"command\": {\"name\": \"fly\"}}", "{\"command\": {\"name\": \"classify\"}, \"bogus\": 1}"] {
            let e = RunConfig::from_json(text).unwrap_err();
            assert_eq!(e.kind(), "ConfigInvalid");
            assert_eq!(e.exit_code(), 2);
        }
    }

    #[test]
    fn error_kind_is_variant_name() {
        let e =
            RunError { module: "conjugacy", error: Error::GridTooCoarse { residual: 1.0, tol: 0.1 }, parameters: Value::Null };
        assert_eq!(e.kind(), "GridTooCoarse");
        assert_eq!(e.to_json()["error"]["module"], "conjugacy");
    }
}
