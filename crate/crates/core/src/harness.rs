//! Experiment configuration and the experiment runners behind the CLI.
//!
//! Each runner returns an [`Outcome`]: CSV artifacts (already rendered, each
//! stamped with the configuration hash), trajectories to persist, a pass/fail
//! verdict and a few human-readable summary lines.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimates::{
    interior_area_verify, lower_barrier_check, pointwise_u_inverse_bound, verify_pair, EstimateOptions, TrackedConstants,
};
use crate::flux::{compute_q, CutoffSpec};
use crate::geometry::{s_from_r, ConformalState, LogPolarGrid, ModelSolution};
use crate::io::{content_hash, csv_string, write_trajectory};
use crate::solver::{
    evolve, exhaust, max_relative_error, sup_relative_difference, BoundarySchedule, SolverConfig, StepPolicy, Trajectory,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GridConfig {
    /// Truncation at the disc boundary; defaults to `S/4` for cut-off runs
    /// and `0.1` for the exact-solution suite.
    pub s_min: Option<f64>,
    /// Truncation at the centre; defaults to `max(8, 4 s₀)`.
    pub s_max: Option<f64>,
    pub n: usize,
    pub ratio: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            s_min: None,
            s_max: None,
            n: 400,
            ratio: 1.01,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CutoffConfig {
    pub r0: Vec<f64>,
    #[serde(rename = "R")]
    pub r_outer: Vec<f64>,
    /// Alternative to `R`: `R = r₀^{1/3} + f (1 − r₀^{1/3})` for each `f ∈ (0, 1)`.
    #[serde(rename = "R_fraction")]
    pub r_fraction: Vec<f64>,
    pub gamma: Vec<f64>,
}

impl Default for CutoffConfig {
    fn default() -> Self {
        Self {
            r0: vec![0.75],
            r_outer: vec![0.93, 0.96, 0.99],
            r_fraction: Vec::new(),
            gamma: vec![0.25],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RampConfig {
    pub k: Vec<f64>,
}

impl Default for RampConfig {
    fn default() -> Self {
        Self {
            k: vec![1e2, 1e3, 1e4],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Spacing {
    Uniform,
    Log,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TimeConfig {
    #[serde(rename = "T")]
    pub horizon: f64,
    pub samples: usize,
    /// First sample time for log spacing.
    pub t_first: Option<f64>,
    pub spacing: Spacing,
    pub dt0: f64,
    pub growth: f64,
    pub dt_max: f64,
}

impl Default for TimeConfig {
    fn default() -> Self {
        Self {
            horizon: 0.1,
            samples: 10,
            t_first: None,
            spacing: Spacing::Uniform,
            dt0: 1e-6,
            growth: 1.1,
            dt_max: 1e-3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverSection {
    pub newton_tol: f64,
    pub max_newton: usize,
}

impl Default for SolverSection {
    fn default() -> Self {
        Self {
            newton_tol: 1e-10,
            max_newton: 50,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OutputConfig {
    pub dir: PathBuf,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { dir: "out".into() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct VerifyConfig {
    /// A certificate passes when `margin ≥ −tolerance`.
    pub tolerance: f64,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self { tolerance: 1e-8 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub experiment: String,
    /// Reserved for perturbation studies; no current computation is random.
    pub seed: u64,
    pub grid: GridConfig,
    pub cutoff: CutoffConfig,
    pub ramps: RampConfig,
    pub time: TimeConfig,
    pub solver: SolverSection,
    pub output: OutputConfig,
    pub verify: VerifyConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            experiment: "default".into(),
            seed: 0,
            grid: GridConfig::default(),
            cutoff: CutoffConfig::default(),
            ramps: RampConfig::default(),
            time: TimeConfig::default(),
            solver: SolverSection::default(),
            output: OutputConfig::default(),
            verify: VerifyConfig::default(),
        }
    }
}

const SECTIONS: &[(&str, &[&str])] = &[
    ("grid", &["s_min", "s_max", "n", "ratio"]),
    ("cutoff", &["r0", "R", "R_fraction", "gamma"]),
    ("ramps", &["k"]),
    ("time", &["T", "samples", "t_first", "spacing", "dt0", "growth", "dt_max"]),
    ("solver", &["newton_tol", "max_newton"]),
    ("output", &["dir"]),
    ("verify", &["tolerance"]),
];
const TOP_LEVEL: &[&str] = &["experiment", "seed"];

fn unknown_keys(table: &toml::Table) -> Vec<String> {
    let mut out = Vec::new();
    for (key, value) in table {
        if TOP_LEVEL.contains(&key.as_str()) {
            continue;
        }
        match SECTIONS.iter().find(|(name, _)| name == key) {
            Some((_, keys)) => match value.as_table() {
                Some(inner) => {
                    for k in inner.keys().filter(|k| !keys.contains(&k.as_str())) {
                        out.push(format!("unknown key `{key}.{k}`"));
                    }
                }
                None => out.push(format!("`{key}` must be a section")),
            },
            None => out.push(format!("unknown key `{key}`")),
        }
    }
    out
}

impl ExperimentConfig {
    /// Parses and validates; every problem found is reported at once.
    pub fn from_toml(text: &str) -> Result<Self> {
        let table: toml::Table = text.parse().map_err(|e: toml::de::Error| Error::Parse(e.to_string()))?;
        let unknown = unknown_keys(&table);
        if !unknown.is_empty() {
            return Err(Error::Config(unknown));
        }
        let config: Self = table.try_into().map_err(|e: toml::de::Error| Error::Parse(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }

    /// Hash of everything except the output directory, so relocating the
    /// output does not change the artifacts.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.output.dir = PathBuf::new();
        content_hash(&c.to_toml())
    }

    fn r_values(&self, r0: f64) -> Vec<f64> {
        let mut out = self.cutoff.r_outer.clone();
        let lower = r0.cbrt();
        out.extend(self.cutoff.r_fraction.iter().map(|f| lower + f * (1.0 - lower)));
        out
    }

    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        let g = &self.grid;
        if g.n < 3 {
            problems.push(format!("grid.n = {} must be at least 3", g.n));
        }
        if !(g.ratio >= 1.0 && g.ratio.is_finite()) {
            problems.push(format!("grid.ratio = {} must be ≥ 1", g.ratio));
        }
        if let Some(s) = g.s_min {
            if !(s > 0.0) {
                problems.push(format!("grid.s_min = {s} must be positive"));
            }
        }
        if let (Some(lo), Some(hi)) = (g.s_min, g.s_max) {
            if !(hi > lo) {
                problems.push(format!("grid.s_max = {hi} must exceed grid.s_min = {lo}"));
            }
        }
        let c = &self.cutoff;
        if c.r0.is_empty() {
            problems.push("cutoff.r0 must list at least one value".into());
        }
        if c.gamma.is_empty() {
            problems.push("cutoff.gamma must list at least one value".into());
        }
        for f in &c.r_fraction {
            if !(*f > 0.0 && *f < 1.0) {
                problems.push(format!("cutoff.R_fraction = {f} must lie in (0, 1)"));
            }
        }
        let mut seen = BTreeSet::new();
        for &r0 in &c.r0 {
            for r in self.r_values(r0) {
                for &gamma in &c.gamma {
                    for msg in CutoffSpec::violations(r0, r, gamma) {
                        if seen.insert(msg.clone()) {
                            problems.push(format!("cutoff: {msg}"));
                        }
                    }
                }
            }
        }
        if self.ramps.k.iter().any(|k| !(*k > 0.0 && k.is_finite())) {
            problems.push("ramps.k must be positive".into());
        }
        if self.ramps.k.windows(2).any(|w| w[1] < w[0]) {
            problems.push("ramps.k must be nondecreasing".into());
        }
        let t = &self.time;
        if !(t.horizon > 0.0 && t.horizon.is_finite()) {
            problems.push(format!("time.T = {} must be positive", t.horizon));
        }
        if t.samples == 0 {
            problems.push("time.samples must be at least 1".into());
        }
        if let Some(t1) = t.t_first {
            if !(t1 > 0.0 && t1 < t.horizon) {
                problems.push(format!("time.t_first = {t1} must lie in (0, T)"));
            }
        }
        if t.spacing == Spacing::Log && t.t_first.is_none() {
            problems.push("time.spacing = \"log\" needs time.t_first".into());
        }
        if !(t.dt0 > 0.0) || !(t.growth >= 1.0) || !(t.dt_max >= t.dt0) {
            problems.push("time steps need dt0 > 0, growth ≥ 1 and dt_max ≥ dt0".into());
        }
        if !(self.solver.newton_tol > 0.0) {
            problems.push("solver.newton_tol must be positive".into());
        }
        if self.solver.max_newton == 0 {
            problems.push("solver.max_newton must be at least 1".into());
        }
        if !(self.verify.tolerance >= 0.0) {
            problems.push("verify.tolerance must be ≥ 0".into());
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(problems))
        }
    }

    /// Every `(r₀, R, γ)` combination.
    pub fn cutoff_specs(&self) -> Result<Vec<CutoffSpec>> {
        let mut out = Vec::new();
        for &r0 in &self.cutoff.r0 {
            for r in self.r_values(r0) {
                for &gamma in &self.cutoff.gamma {
                    out.push(CutoffSpec::new(r0, r, gamma)?);
                }
            }
        }
        Ok(out)
    }

    /// Distinct `(r₀, R)` pairs, in configuration order.
    pub fn domains(&self) -> Vec<(f64, f64)> {
        let mut out: Vec<(f64, f64)> = Vec::new();
        for &r0 in &self.cutoff.r0 {
            for r in self.r_values(r0) {
                if !out.contains(&(r0, r)) {
                    out.push((r0, r));
                }
            }
        }
        out
    }

    pub fn sample_times(&self) -> Vec<f64> {
        let t = &self.time;
        let n = t.samples;
        match (t.spacing, t.t_first) {
            (Spacing::Log, Some(t1)) if n > 1 => {
                let ratio = (t.horizon / t1).ln() / (n - 1) as f64;
                (0..n).map(|i| if i == n - 1 { t.horizon } else { t1 * (ratio * i as f64).exp() }).collect()
            }
            (Spacing::Log, _) => vec![t.horizon],
            (Spacing::Uniform, _) => (1..=n).map(|i| t.horizon * i as f64 / n as f64).collect(),
        }
    }

    pub fn solver_config(&self) -> SolverConfig {
        SolverConfig {
            step: StepPolicy::Geometric {
                dt0: self.time.dt0,
                growth: self.time.growth,
                dt_max: self.time.dt_max,
            },
            newton_tol: self.solver.newton_tol,
            max_newton: self.solver.max_newton,
            sample_times: self.sample_times(),
        }
    }

    /// The truncated grid for runs on the cut-off domain `(r₀, R)`.
    pub fn run_grid(&self, r0: f64, r_outer: f64) -> Result<LogPolarGrid> {
        let s0 = s_from_r(r0)?;
        let s_inner = s_from_r(r_outer)?;
        let s_min = self.grid.s_min.unwrap_or(0.25 * s_inner);
        let s_max = self.grid.s_max.unwrap_or((4.0 * s0).max(8.0));
        LogPolarGrid::graded(s_min, s_max, self.grid.n, self.grid.ratio)
    }
}

pub fn parse_config(path: &Path) -> Result<ExperimentConfig> {
    ExperimentConfig::from_toml(&fs::read_to_string(path)?)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Artifact {
    pub name: String,
    pub contents: String,
}

#[derive(Debug, Clone)]
pub struct Outcome {
    pub artifacts: Vec<Artifact>,
    pub trajectories: Vec<(String, Trajectory)>,
    pub passed: bool,
    pub summary: Vec<String>,
}

impl Outcome {
    fn new(passed: bool) -> Self {
        Self {
            artifacts: Vec::new(),
            trajectories: Vec::new(),
            passed,
            summary: Vec::new(),
        }
    }

    fn csv<T: Serialize>(&mut self, name: &str, hash: &str, rows: &[T]) -> Result<()> {
        self.artifacts.push(Artifact {
            name: name.to_string(),
            contents: csv_string(hash, rows)?,
        });
        Ok(())
    }

    /// Writes every artifact and trajectory under `dir`; returns the paths.
    pub fn write_to(&self, dir: &Path, hash: &str) -> Result<Vec<PathBuf>> {
        fs::create_dir_all(dir)?;
        let mut paths = Vec::new();
        for a in &self.artifacts {
            let path = dir.join(&a.name);
            let mut tmp = path.as_os_str().to_owned();
            tmp.push(".tmp");
            fs::write(&tmp, &a.contents)?;
            fs::rename(&tmp, &path)?;
            paths.push(path);
        }
        for (stem, traj) in &self.trajectories {
            paths.push(write_trajectory(dir, stem, traj, hash)?);
        }
        Ok(paths)
    }
}

fn fit_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

/// Least-squares slope of `log y` against `log x`.
pub fn fit_order(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    fit_slope(&lx, &ly)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExactSuiteRow {
    pub model: String,
    pub study: String,
    pub level: usize,
    pub nodes: usize,
    pub max_spacing: f64,
    pub dt: f64,
    pub error: f64,
    pub order: Option<f64>,
    pub status: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExactSuiteSummary {
    pub big_bang_spatial: f64,
    pub big_bang_temporal: f64,
    pub cusp_spatial: f64,
    pub cusp_temporal: f64,
    pub flat_max_error: f64,
    pub newton_tol: f64,
}

impl ExactSuiteSummary {
    pub fn passed(&self) -> bool {
        let spatial = |p: f64| (p - 2.0).abs() <= 0.3;
        let temporal = |p: f64| (p - 1.0).abs() <= 0.2;
        spatial(self.big_bang_spatial)
            && spatial(self.cusp_spatial)
            && temporal(self.big_bang_temporal)
            && temporal(self.cusp_temporal)
            && self.flat_max_error <= self.newton_tol
    }
}

const SPATIAL_LEVELS: usize = 3;
const TEMPORAL_LEVELS: usize = 4;

fn exact_run(model: ModelSolution, grid: &LogPolarGrid, t0: f64, t_end: f64, dt: f64, tol: f64) -> Result<Vec<f64>> {
    let config = SolverConfig {
        step: StepPolicy::Fixed { dt },
        newton_tol: tol,
        ..SolverConfig::default()
    };
    let start = model.state(grid, t0)?;
    let schedule = match model {
        ModelSolution::FlatDisc => BoundarySchedule::frozen(&start),
        _ => BoundarySchedule::exact(model, grid),
    };
    Ok(evolve(&start, &schedule, &config, t_end)?.last().into_values())
}

/// Spatial order (against the closed form, halving the grid), temporal order
/// (self-convergence, halving `Δt`) and the static flat disc.
pub fn exact_solution_suite(config: &ExperimentConfig) -> Result<(Vec<ExactSuiteRow>, ExactSuiteSummary)> {
    let t_end = config.time.horizon;
    let t0 = 0.25 * t_end;
    let s_min = config.grid.s_min.unwrap_or(0.1);
    let s_max = config.grid.s_max.unwrap_or(8.0);
    let base = LogPolarGrid::graded(s_min, s_max, config.grid.n, config.grid.ratio)?;
    let tol = config.solver.newton_tol;
    let mut rows = Vec::new();
    let mut summary = ExactSuiteSummary {
        big_bang_spatial: f64::NAN,
        big_bang_temporal: f64::NAN,
        cusp_spatial: f64::NAN,
        cusp_temporal: f64::NAN,
        flat_max_error: 0.0,
        newton_tol: tol,
    };
    let mut grids = vec![base.clone()];
    for _ in 1..SPATIAL_LEVELS {
        let next = grids[grids.len() - 1].refined();
        grids.push(next);
    }
    let dt_spatial = (t_end - t0) / 20.0;

    for model in [ModelSolution::BigBang, ModelSolution::Cusp] {
        let runs: Vec<Result<f64>> = grids
            .par_iter()
            .map(|g| {
                let u = exact_run(model, g, t0, t_end, dt_spatial, tol)?;
                Ok(max_relative_error(&u, model.state(g, t_end)?.values()))
            })
            .collect();
        let mut h = Vec::new();
        let mut e = Vec::new();
        for (level, (g, r)) in grids.iter().zip(runs).enumerate() {
            let mut row = ExactSuiteRow {
                model: model.name().into(),
                study: "spatial".into(),
                level,
                nodes: g.len(),
                max_spacing: g.max_spacing(),
                dt: dt_spatial,
                error: f64::NAN,
                order: None,
                status: "ok".into(),
            };
            match r {
                Ok(err) => {
                    row.error = err;
                    if let (Some(&hp), Some(&ep)) = (h.last(), e.last()) {
                        row.order = Some(fit_order(&[hp, g.max_spacing()], &[ep, err]));
                    }
                    h.push(g.max_spacing());
                    e.push(err);
                }
                Err(err) => row.status = err.to_string(),
            }
            rows.push(row);
        }
        let spatial = if e.len() == SPATIAL_LEVELS { fit_order(&h, &e) } else { f64::NAN };

        let dts: Vec<f64> = (0..TEMPORAL_LEVELS)
            .map(|l| (t_end - t0) / (10.0 * 2f64.powi(l as i32)))
            .collect();
        let sols: Vec<Result<Vec<f64>>> = dts.par_iter().map(|&dt| exact_run(model, &base, t0, t_end, dt, tol)).collect();
        let exact = model.state(&base, t_end)?;
        let mut diffs = Vec::new();
        let mut steps = Vec::new();
        for (level, dt) in dts.iter().enumerate() {
            let mut row = ExactSuiteRow {
                model: model.name().into(),
                study: "temporal".into(),
                level,
                nodes: base.len(),
                max_spacing: base.max_spacing(),
                dt: *dt,
                error: f64::NAN,
                order: None,
                status: "ok".into(),
            };
            match (&sols[level], sols.get(level + 1)) {
                (Ok(u), Some(Ok(finer))) => {
                    // self-convergence: distance to the Δt/2 solution
                    let d = max_relative_error(u, finer);
                    row.error = d;
                    if let (Some(&dp), Some(&sp)) = (diffs.last(), steps.last()) {
                        row.order = Some(fit_order(&[sp, *dt], &[dp, d]));
                    }
                    diffs.push(d);
                    steps.push(*dt);
                }
                (Ok(u), None) => {
                    row.error = max_relative_error(u, exact.values());
                    row.status = "finest level (error against the closed form)".into();
                }
                (Err(e), _) | (_, Some(Err(e))) => row.status = e.to_string(),
            }
            rows.push(row);
        }
        let temporal = if diffs.len() == TEMPORAL_LEVELS - 1 {
            fit_order(&steps, &diffs)
        } else {
            f64::NAN
        };
        match model {
            ModelSolution::BigBang => {
                summary.big_bang_spatial = spatial;
                summary.big_bang_temporal = temporal;
            }
            _ => {
                summary.cusp_spatial = spatial;
                summary.cusp_temporal = temporal;
            }
        }
    }

    for (level, g) in grids.iter().enumerate() {
        let mut row = ExactSuiteRow {
            model: ModelSolution::FlatDisc.name().into(),
            study: "static".into(),
            level,
            nodes: g.len(),
            max_spacing: g.max_spacing(),
            dt: dt_spatial,
            error: f64::NAN,
            order: None,
            status: "ok".into(),
        };
        match exact_run(ModelSolution::FlatDisc, g, 0.0, t_end, dt_spatial, tol) {
            Ok(u) => {
                row.error = max_relative_error(&u, ModelSolution::FlatDisc.state(g, 0.0)?.values());
                summary.flat_max_error = summary.flat_max_error.max(row.error);
            }
            Err(e) => {
                row.status = e.to_string();
                summary.flat_max_error = f64::INFINITY;
            }
        }
        rows.push(row);
    }
    Ok((rows, summary))
}

pub fn run_exact_solution_suite(config: &ExperimentConfig) -> Result<Outcome> {
    let (rows, summary) = exact_solution_suite(config)?;
    let mut out = Outcome::new(summary.passed());
    out.csv("exact_suite.csv", &config.hash(), &rows)?;
    out.csv("exact_suite_summary.csv", &config.hash(), &[summary])?;
    out.summary.push(format!(
        "spatial order: big-bang {:.3}, cusp {:.3}; temporal order: big-bang {:.3}, cusp {:.3}; flat disc drift {:.2e}",
        summary.big_bang_spatial,
        summary.cusp_spatial,
        summary.big_bang_temporal,
        summary.cusp_temporal,
        summary.flat_max_error
    ));
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UniquenessRow {
    pub r0: f64,
    #[serde(rename = "R")]
    pub r_outer: f64,
    pub gamma: f64,
    pub k_lower: f64,
    pub k_upper: f64,
    pub time: f64,
    pub sup_difference: f64,
    pub area_difference: f64,
    pub envelope: f64,
    pub certificate_lhs: f64,
    pub certificate_rhs: f64,
    pub certificate_margin: f64,
    pub envelope_margin: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DomainDiagnostics {
    pub r0: f64,
    #[serde(rename = "R")]
    pub r_outer: f64,
    pub s_min: f64,
    pub nodes: usize,
    pub monotone_in_k: bool,
    pub worst_monotonicity: f64,
    pub min_barrier_margin: f64,
    pub min_pointwise_margin: f64,
    pub pointwise_precondition: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct UniquenessResult {
    pub rows: Vec<UniquenessRow>,
    pub domains: Vec<DomainDiagnostics>,
    /// Per `(r₀, k pair, t)`: is the area difference nonincreasing as `R ↑ 1`?
    pub decay_violations: Vec<String>,
    pub status: Vec<String>,
}

impl UniquenessResult {
    pub fn certificates_hold(&self, tol: f64) -> bool {
        self.rows
            .iter()
            .all(|r| r.certificate_margin >= -tol && r.envelope_margin >= -tol)
    }

    pub fn barriers_hold(&self, tol: f64) -> bool {
        self.domains
            .iter()
            .all(|d| d.min_barrier_margin >= -tol && d.pointwise_precondition && d.min_pointwise_margin >= 0.0)
    }

    pub fn passed(&self, tol: f64) -> bool {
        self.status.is_empty() && self.certificates_hold(tol) && self.barriers_hold(tol) && self.decay_violations.is_empty()
    }
}

struct DomainRun {
    r0: f64,
    r_outer: f64,
    trajectories: Vec<Trajectory>,
    diagnostics: DomainDiagnostics,
}

fn run_domain(config: &ExperimentConfig, r0: f64, r_outer: f64) -> Result<DomainRun> {
    let grid = config.run_grid(r0, r_outer)?;
    let initial = ModelSolution::FlatDisc.state(&grid, 0.0)?;
    let ex = exhaust(&initial, &config.ramps.k, &config.solver_config(), config.time.horizon, r0)?;
    let opts = EstimateOptions::default();
    let s0 = s_from_r(r0)?;
    let mut min_barrier = f64::INFINITY;
    let mut min_pointwise = f64::INFINITY;
    let mut pre = true;
    for traj in &ex.trajectories {
        for rec in lower_barrier_check(traj) {
            min_barrier = min_barrier.min(rec.margin);
        }
        for &t in traj.times().iter().filter(|&&t| t > 0.0) {
            let p = pointwise_u_inverse_bound(traj, t, s0, &opts)?;
            pre &= p.precondition_holds;
            if let Some(c) = p.certificate {
                min_pointwise = min_pointwise.min(c.margin);
            }
        }
    }
    let worst = ex
        .diagnostics
        .monotonicity_violation
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(DomainRun {
        r0,
        r_outer,
        diagnostics: DomainDiagnostics {
            r0,
            r_outer,
            s_min: grid.s_min(),
            nodes: grid.len(),
            monotone_in_k: ex.diagnostics.monotone,
            worst_monotonicity: worst,
            min_barrier_margin: min_barrier,
            min_pointwise_margin: min_pointwise,
            pointwise_precondition: pre,
        },
        trajectories: ex.trajectories,
    })
}

/// Runs the exhaustion family on every `(r₀, R)` domain and certifies every
/// pair of ramps for every `γ`.
pub fn uniqueness_experiment(config: &ExperimentConfig) -> Result<UniquenessResult> {
    if config.ramps.k.len() < 2 {
        return Err(Error::Config(vec!["uniqueness needs at least 2 ramps".into()]));
    }
    if config.cutoff.r0.iter().any(|&r0| config.r_values(r0).len() < 3) {
        return Err(Error::Config(vec!["uniqueness needs at least 3 values of R".into()]));
    }
    let runs: Vec<(f64, f64, Result<DomainRun>)> = config
        .domains()
        .par_iter()
        .map(|&(r0, r)| (r0, r, run_domain(config, r0, r)))
        .collect();
    let opts = EstimateOptions {
        order_tol: 10.0 * config.solver.newton_tol,
        ..EstimateOptions::default()
    };
    let mut result = UniquenessResult {
        rows: Vec::new(),
        domains: Vec::new(),
        decay_violations: Vec::new(),
        status: Vec::new(),
    };
    let ks = &config.ramps.k;
    for (r0, r_outer, run) in runs {
        let run = match run {
            Ok(run) => run,
            Err(e) => {
                result.status.push(format!("r0 = {r0}, R = {r_outer}: {e}"));
                continue;
            }
        };
        for &gamma in &config.cutoff.gamma {
            let spec = CutoffSpec::new(run.r0, run.r_outer, gamma)?;
            let constants = TrackedConstants::new(gamma)?;
            let envelope_constant = constants.envelope(spec.s0());
            let neg_log_s = -spec.s_inner().ln();
            for i in 0..ks.len() {
                for j in i + 1..ks.len() {
                    let (lo, hi) = (&run.trajectories[i], &run.trajectories[j]);
                    let cert = match interior_area_verify(lo, hi, &spec, &opts) {
                        Ok(c) => c,
                        Err(e) => {
                            result
                                .status
                                .push(format!("r0 = {r0}, R = {r_outer}, k = {} vs {}: {e}", ks[i], ks[j]));
                            continue;
                        }
                    };
                    for (k, &t) in lo.times().iter().enumerate() {
                        let env = envelope_constant * (t - lo.times()[0]) / neg_log_s.powf(gamma);
                        let diff = cert.area_differences[k];
                        result.rows.push(UniquenessRow {
                            r0,
                            r_outer,
                            gamma,
                            k_lower: ks[i],
                            k_upper: ks[j],
                            time: t,
                            sup_difference: sup_relative_difference(lo, hi, k, spec.s0()),
                            area_difference: diff,
                            envelope: env,
                            certificate_lhs: cert.rows[k].lhs,
                            certificate_rhs: cert.rows[k].rhs,
                            certificate_margin: cert.rows[k].margin,
                            envelope_margin: cert.envelope.get(k).map_or(env - diff, |r| r.margin),
                        });
                    }
                }
            }
        }
        result.domains.push(run.diagnostics);
    }
    result.decay_violations = decay_violations(&result.rows, config.cutoff.gamma.first().copied());
    Ok(result)
}

fn decay_violations(rows: &[UniquenessRow], gamma: Option<f64>) -> Vec<String> {
    let Some(gamma) = gamma else { return Vec::new() };
    let mut keys: Vec<(u64, u64, u64, u64)> = rows
        .iter()
        .filter(|r| r.gamma == gamma && r.time > 0.0)
        .map(|r| (r.r0.to_bits(), r.k_lower.to_bits(), r.k_upper.to_bits(), r.time.to_bits()))
        .collect();
    keys.sort_unstable();
    keys.dedup();
    let mut out = Vec::new();
    for (r0, kl, ku, t) in keys {
        let mut series: Vec<(f64, f64)> = rows
            .iter()
            .filter(|r| {
                r.gamma == gamma
                    && r.r0.to_bits() == r0
                    && r.k_lower.to_bits() == kl
                    && r.k_upper.to_bits() == ku
                    && r.time.to_bits() == t
            })
            .map(|r| (r.r_outer, r.area_difference))
            .collect();
        series.sort_by(|a, b| a.0.total_cmp(&b.0));
        for w in series.windows(2) {
            if w[1].1 > w[0].1 {
                out.push(format!(
                    "r0 = {}, k = {} vs {}, t = {}: area difference grows from {:e} (R = {}) to {:e} (R = {})",
                    f64::from_bits(r0),
                    f64::from_bits(kl),
                    f64::from_bits(ku),
                    f64::from_bits(t),
                    w[0].1,
                    w[0].0,
                    w[1].1,
                    w[1].0
                ));
            }
        }
    }
    out
}

pub fn run_uniqueness_experiment(config: &ExperimentConfig) -> Result<Outcome> {
    let result = uniqueness_experiment(config)?;
    let tol = config.verify.tolerance;
    let mut out = Outcome::new(result.passed(tol));
    let hash = config.hash();
    out.csv("uniqueness.csv", &hash, &result.rows)?;
    out.csv("uniqueness_domains.csv", &hash, &result.domains)?;
    out.summary.push(format!(
        "{} certificate rows; certificates hold: {}; barriers hold: {}; decay violations: {}",
        result.rows.len(),
        result.certificates_hold(tol),
        result.barriers_hold(tol),
        result.decay_violations.len()
    ));
    out.summary.extend(result.decay_violations.iter().cloned());
    out.summary.extend(result.status.iter().cloned());
    Ok(out)
}

/// Ramp sensitivity against discretization error on `D_{r₀}` at the final time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RefinementComparison {
    pub r0: f64,
    #[serde(rename = "R")]
    pub r_outer: f64,
    pub k_lower: f64,
    pub k_upper: f64,
    pub time: f64,
    /// `sup |U_{k_lower}/U_{k_upper} − 1|` on `D_{r₀}`.
    pub ramp_difference: f64,
    /// `sup |U_h/U_{h/2} − 1|` on `D_{r₀}` for `k_upper`, at shared nodes.
    pub refinement_difference: f64,
    pub ratio: f64,
}

pub fn ramp_versus_refinement(
    config: &ExperimentConfig,
    r0: f64,
    r_outer: f64,
    k_lower: f64,
    k_upper: f64,
) -> Result<RefinementComparison> {
    let grid = config.run_grid(r0, r_outer)?;
    let fine = grid.refined();
    let solver = config.solver_config();
    let t_end = config.time.horizon;
    let s0 = s_from_r(r0)?;
    let run = |g: &LogPolarGrid, k: f64| -> Result<Trajectory> {
        let initial = ModelSolution::FlatDisc.state(g, 0.0)?;
        evolve(&initial, &BoundarySchedule::ramp(&initial, k), &solver, t_end)
    };
    let jobs = [(grid.clone(), k_lower), (grid.clone(), k_upper), (fine, k_upper)];
    let mut trajs = jobs.par_iter().map(|(g, k)| run(g, *k)).collect::<Result<Vec<_>>>()?;
    let fine_traj = trajs.pop().expect("three runs");
    let (lo, hi) = (&trajs[0], &trajs[1]);
    let last = lo.len() - 1;
    let ramp_difference = sup_relative_difference(lo, hi, last, s0);
    let coarse = hi.last();
    let fine_last = fine_traj.last();
    let refinement_difference = coarse
        .grid()
        .nodes()
        .iter()
        .enumerate()
        .filter(|(_, &s)| s >= s0)
        .map(|(i, _)| (coarse.values()[i] / fine_last.values()[2 * i] - 1.0).abs())
        .fold(0.0, f64::max);
    Ok(RefinementComparison {
        r0,
        r_outer,
        k_lower,
        k_upper,
        time: coarse.time(),
        ramp_difference,
        refinement_difference,
        ratio: ramp_difference / refinement_difference,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QSweepRow {
    pub r0: f64,
    #[serde(rename = "R")]
    pub r_outer: f64,
    pub gamma: f64,
    pub s0: f64,
    #[serde(rename = "S")]
    pub s_inner: f64,
    pub a: f64,
    pub split: bool,
    pub q: f64,
    pub q1: f64,
    pub q2: f64,
    pub error: f64,
    pub split_error: f64,
    pub bound: f64,
    pub ratio: f64,
    /// `|Q − (Q₁ + Q₂)|`; only meaningful for split rows.
    pub split_gap: f64,
    pub status: String,
}

impl QSweepRow {
    pub fn bounded(&self) -> bool {
        self.status == "ok" && self.ratio <= 1.0
    }

    /// `|Q − (Q₁ + Q₂)|` within the combined quadrature error estimate
    /// (floored at a few ulps of `Q`).
    pub fn consistent(&self) -> bool {
        !self.split || self.split_gap <= self.error + self.split_error + 8.0 * f64::EPSILON * self.q
    }
}

pub fn q_sweep(config: &ExperimentConfig) -> Result<Vec<QSweepRow>> {
    let specs = config.cutoff_specs()?;
    Ok(specs
        .par_iter()
        .map(|spec| {
            let mut row = QSweepRow {
                r0: spec.r0(),
                r_outer: spec.r_outer(),
                gamma: spec.gamma(),
                s0: spec.s0(),
                s_inner: spec.s_inner(),
                a: spec.a(),
                split: false,
                q: f64::NAN,
                q1: f64::NAN,
                q2: f64::NAN,
                error: f64::NAN,
                split_error: f64::NAN,
                bound: f64::NAN,
                ratio: f64::NAN,
                split_gap: f64::NAN,
                status: "ok".into(),
            };
            match compute_q(spec) {
                Ok(q) => {
                    row.split = q.split;
                    row.q = q.q;
                    row.q1 = q.q1;
                    row.q2 = q.q2;
                    row.error = q.error;
                    row.split_error = q.split_error;
                    row.bound = q.analytic_bound;
                    row.ratio = q.q / q.analytic_bound;
                    row.split_gap = (q.q - (q.q1 + q.q2)).abs();
                }
                Err(e) => row.status = e.to_string(),
            }
            row
        })
        .collect())
}

pub fn run_q_sweep(config: &ExperimentConfig) -> Result<Outcome> {
    let rows = q_sweep(config)?;
    let bounded = rows.iter().filter(|r| r.bounded()).count();
    let consistent = rows.iter().filter(|r| r.consistent()).count();
    let mut out = Outcome::new(bounded == rows.len() && consistent == rows.len());
    out.csv("q_sweep.csv", &config.hash(), &rows)?;
    let worst = rows.iter().map(|r| r.ratio).fold(f64::NEG_INFINITY, f64::max);
    out.summary.push(format!(
        "{} rows; Q ≤ bound in {bounded}; Q = Q1 + Q2 within error in {consistent}; largest Q/bound {worst:.4}",
        rows.len()
    ));
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundaryLayerRow {
    pub time: f64,
    pub s_star: f64,
    pub width: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundaryLayerFit {
    pub k: f64,
    pub exponent: f64,
    pub prefactor: f64,
    pub points: usize,
    pub monotone: bool,
    /// Whether the exponent lies in `[0.35, 0.65]`.
    pub consistent_with_sqrt: bool,
}

/// Largest node where `U` and the flat profile differ by a factor ≥ 2.
fn layer_edge(state: &ConformalState) -> f64 {
    let grid = state.grid();
    grid.nodes()
        .iter()
        .zip(state.values())
        .filter(|(&s, &u)| {
            let ratio = u / (-2.0 * s).exp();
            !(0.5..2.0).contains(&ratio)
        })
        .map(|(&s, _)| s)
        .fold(grid.s_min(), f64::max)
}

pub fn boundary_layer_experiment(config: &ExperimentConfig) -> Result<(Vec<BoundaryLayerRow>, BoundaryLayerFit)> {
    let (r0, r_outer) = *config
        .domains()
        .first()
        .ok_or_else(|| Error::Config(vec!["boundary-layer needs a cut-off domain".into()]))?;
    let grid = config.run_grid(r0, r_outer)?;
    let k = config.ramps.k.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let initial = ModelSolution::FlatDisc.state(&grid, 0.0)?;
    let traj = evolve(&initial, &BoundarySchedule::ramp(&initial, k), &config.solver_config(), config.time.horizon)?;
    let rows: Vec<BoundaryLayerRow> = (0..traj.len())
        .filter(|&i| traj.times()[i] > 0.0)
        .map(|i| {
            let s_star = layer_edge(&traj.state(i));
            BoundaryLayerRow {
                time: traj.times()[i],
                s_star,
                width: s_star - grid.s_min(),
            }
        })
        .collect();
    let usable: Vec<&BoundaryLayerRow> = rows.iter().filter(|r| r.width > 0.0).collect();
    let (exponent, prefactor) = if usable.len() >= 2 {
        let lt: Vec<f64> = usable.iter().map(|r| r.time.ln()).collect();
        let lw: Vec<f64> = usable.iter().map(|r| r.width.ln()).collect();
        let p = fit_slope(&lt, &lw);
        let mean_t = lt.iter().sum::<f64>() / lt.len() as f64;
        let mean_w = lw.iter().sum::<f64>() / lw.len() as f64;
        (p, (mean_w - p * mean_t).exp())
    } else {
        (f64::NAN, f64::NAN)
    };
    let monotone = rows.windows(2).all(|w| w[1].width >= w[0].width);
    let points = usable.len();
    Ok((
        rows,
        BoundaryLayerFit {
            k,
            exponent,
            prefactor,
            points,
            monotone,
            consistent_with_sqrt: (0.35..=0.65).contains(&exponent),
        },
    ))
}

/// Exploratory: the verdict never fails.
pub fn run_boundary_layer_experiment(config: &ExperimentConfig) -> Result<Outcome> {
    let (rows, fit) = boundary_layer_experiment(config)?;
    let mut out = Outcome::new(true);
    out.csv("boundary_layer.csv", &config.hash(), &rows)?;
    out.csv("boundary_layer_fit.csv", &config.hash(), &[fit])?;
    out.summary.push(format!(
        "layer width ~ t^p with p = {:.3} over {} samples (k = {}); monotone: {}; within [0.35, 0.65]: {}",
        fit.exponent, fit.points, fit.k, fit.monotone, fit.consistent_with_sqrt
    ));
    Ok(out)
}

/// Runs the exhaustion family on the first configured domain and keeps the
/// trajectories for persistence (`k<value>` stems).
pub fn run_simulate(config: &ExperimentConfig) -> Result<Outcome> {
    let (r0, r_outer) = *config
        .domains()
        .first()
        .ok_or_else(|| Error::Config(vec!["simulate needs a cut-off domain".into()]))?;
    let grid = config.run_grid(r0, r_outer)?;
    let initial = ModelSolution::FlatDisc.state(&grid, 0.0)?;
    let ex = exhaust(&initial, &config.ramps.k, &config.solver_config(), config.time.horizon, r0)?;
    let mut out = Outcome::new(ex.diagnostics.monotone);
    out.csv("exhaustion.csv", &config.hash(), &[ex.diagnostics.clone()].map(ExhaustionRow::from))?;
    out.summary.push(format!(
        "{} trajectories on {} nodes; monotone in k: {}",
        ex.trajectories.len(),
        grid.len(),
        ex.diagnostics.monotone
    ));
    for (k, traj) in config.ramps.k.iter().zip(ex.trajectories) {
        out.trajectories.push((format!("k{k}"), traj));
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
struct ExhaustionRow {
    ramps: String,
    monotone: bool,
    worst_violation: f64,
    successive_sup_differences: String,
    tolerance: f64,
}

impl From<crate::solver::ExhaustionDiagnostics> for ExhaustionRow {
    fn from(d: crate::solver::ExhaustionDiagnostics) -> Self {
        let join = |v: &[f64]| v.iter().map(|x| format!("{x:e}")).collect::<Vec<_>>().join(";");
        Self {
            ramps: join(&d.ramps),
            monotone: d.monotone,
            worst_violation: d.monotonicity_violation.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            successive_sup_differences: join(&d.successive_sup_differences),
            tolerance: d.tolerance,
        }
    }
}

/// Runs every certificate on a persisted pair with the first configured
/// cut-off `(r₀, R, γ)`.
pub fn run_verify(config: &ExperimentConfig, lower: &Trajectory, upper: &Trajectory) -> Result<Outcome> {
    let spec = *config
        .cutoff_specs()?
        .first()
        .ok_or_else(|| Error::Config(vec!["verify needs a cut-off".into()]))?;
    let opts = EstimateOptions {
        order_tol: 10.0 * config.solver.newton_tol,
        ..EstimateOptions::default()
    };
    let report = verify_pair(lower, upper, &spec, &opts)?;
    let tol = config.verify.tolerance;
    let mut out = Outcome::new(report.all_hold(tol));
    let hash = config.hash();
    out.csv("estimates.csv", &hash, &report.rows)?;
    out.csv("j_records.csv", &hash, &report.records)?;
    let failed = report.rows.iter().filter(|r| !r.holds_within(tol)).count();
    out.summary.push(format!(
        "{} certificate rows, {failed} failing; smallest margin {:e}",
        report.rows.len(),
        report.min_margin()
    ));
    out.summary.extend(report.skipped.iter().map(|s| format!("skipped: {s}")));
    Ok(out)
}
