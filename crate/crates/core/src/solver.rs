//! Backward-Euler time stepping of `∂ₜU = ∂²ₛ log U` on a truncated log-polar
//! grid, solved by Newton iteration in `w = log U`.
//!
//! The discrete operator is monotone: the Jacobian of
//! `w ↦ e^w − Δt D₂ w` is an M-matrix, so ordered initial and boundary data
//! stay ordered after every step (up to the Newton tolerance).

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{domain, Error, Result};
use crate::geometry::{hyperbolic_factor, s_from_r, ConformalState, LogPolarGrid, ModelSolution};

/// A time-dependent boundary value.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum BoundaryValue {
    Constant(f64),
    /// `max(base, k · scale · t)`.
    Ramp { base: f64, k: f64, scale: f64 },
    /// A ramp whose rate jumps from `k_before` to `k_after` at `t_switch`.
    SwitchedRamp {
        base: f64,
        k_before: f64,
        k_after: f64,
        scale: f64,
        t_switch: f64,
    },
    /// The closed-form value of a model solution at a fixed `s`.
    Model { model: ModelSolution, s: f64 },
}

impl BoundaryValue {
    pub fn at(&self, t: f64) -> f64 {
        match *self {
            BoundaryValue::Constant(v) => v,
            BoundaryValue::Ramp { base, k, scale } => base.max(k * scale * t),
            BoundaryValue::SwitchedRamp {
                base,
                k_before,
                k_after,
                scale,
                t_switch,
            } => {
                let k = if t < t_switch { k_before } else { k_after };
                base.max(k * scale * t)
            }
            BoundaryValue::Model { model, s } => model.factor(s, t).unwrap_or(f64::NAN),
        }
    }
}

/// Condition at the centre-side end `s_max`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum OuterBoundary {
    Dirichlet(BoundaryValue),
    /// `∂ₛ log U = −2`: the profile of a metric smooth at the origin,
    /// `U = e^{2u − 2s}` with `u` smooth. No area crosses `s_max`.
    SmoothCentre,
}

/// Boundary data realising "sending in area from infinity" at `s_min`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundarySchedule {
    pub inner: BoundaryValue,
    pub outer: OuterBoundary,
}

impl BoundarySchedule {
    /// Exact Dirichlet data of a model solution at both ends.
    pub fn exact(model: ModelSolution, grid: &LogPolarGrid) -> Self {
        Self {
            inner: BoundaryValue::Model {
                model,
                s: grid.s_min(),
            },
            outer: OuterBoundary::Dirichlet(BoundaryValue::Model {
                model,
                s: grid.s_max(),
            }),
        }
    }

    /// Holds both end values of `state` fixed.
    pub fn frozen(state: &ConformalState) -> Self {
        let v = state.values();
        Self {
            inner: BoundaryValue::Constant(v[0]),
            outer: OuterBoundary::Dirichlet(BoundaryValue::Constant(v[v.len() - 1])),
        }
    }

    /// The standard exhaustion ramp `max(U₀(s_min), k t H(s_min))` with a smooth
    /// centre. `k` is measured in units of the hyperbolic factor at `s_min`,
    /// so `k = 2` reproduces the big-bang boundary value and every `k ≥ 2`
    /// dominates it.
    pub fn ramp(initial: &ConformalState, k: f64) -> Self {
        let grid = initial.grid();
        Self {
            inner: BoundaryValue::Ramp {
                base: initial.values()[0],
                k,
                scale: hyperbolic_factor(grid.s_min()).expect("grid nodes are positive"),
            },
            outer: OuterBoundary::SmoothCentre,
        }
    }

    /// Ramp rate `k_before` until `t_switch`, then `k_after`.
    pub fn switched_ramp(initial: &ConformalState, k_before: f64, k_after: f64, t_switch: f64) -> Self {
        let grid = initial.grid();
        Self {
            inner: BoundaryValue::SwitchedRamp {
                base: initial.values()[0],
                k_before,
                k_after,
                scale: hyperbolic_factor(grid.s_min()).expect("grid nodes are positive"),
                t_switch,
            },
            outer: OuterBoundary::SmoothCentre,
        }
    }

    pub fn with_outer(self, outer: OuterBoundary) -> Self {
        Self { outer, ..self }
    }

    pub fn inner_value(&self, t: f64) -> f64 {
        self.inner.at(t)
    }

    pub fn outer_value(&self, t: f64) -> Option<f64> {
        match &self.outer {
            OuterBoundary::Dirichlet(v) => Some(v.at(t)),
            OuterBoundary::SmoothCentre => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum StepPolicy {
    Fixed { dt: f64 },
    /// `Δt` grows by `growth` each step up to `dt_max`, independently of how
    /// Newton behaves. Runs sharing this policy and sample times share their
    /// time levels.
    Geometric { dt0: f64, growth: f64, dt_max: f64 },
    /// Halve on failure; double after 3 consecutive easy steps (≤ 3 Newton
    /// iterations), capped at `dt_max`.
    Adaptive { dt0: f64, dt_max: f64 },
}

impl StepPolicy {
    fn initial(&self) -> f64 {
        match *self {
            StepPolicy::Fixed { dt } => dt,
            StepPolicy::Geometric { dt0, .. } | StepPolicy::Adaptive { dt0, .. } => dt0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolverConfig {
    pub step: StepPolicy,
    /// Max-norm of the Newton update in `log U` at which a step is accepted.
    pub newton_tol: f64,
    pub max_newton: usize,
    /// Times (besides the initial and final time) at which snapshots are kept.
    pub sample_times: Vec<f64>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            step: StepPolicy::Adaptive {
                dt0: 1e-5,
                dt_max: 1e-3,
            },
            newton_tol: 1e-10,
            max_newton: 50,
            sample_times: Vec::new(),
        }
    }
}

impl SolverConfig {
    pub fn with_step(self, step: StepPolicy) -> Self {
        Self { step, ..self }
    }

    pub fn with_samples(self, sample_times: Vec<f64>) -> Self {
        Self { sample_times, ..self }
    }

    /// `n` equally spaced sample times in `(t0, t_end]`.
    pub fn with_uniform_samples(self, t0: f64, t_end: f64, n: usize) -> Self {
        let samples = (1..=n)
            .map(|i| t0 + (t_end - t0) * i as f64 / n as f64)
            .collect();
        self.with_samples(samples)
    }

    fn validate(&self) -> Result<()> {
        let dt_ok = match self.step {
            StepPolicy::Fixed { dt } => dt > 0.0,
            StepPolicy::Geometric { dt0, growth, dt_max } => dt0 > 0.0 && growth >= 1.0 && dt_max >= dt0,
            StepPolicy::Adaptive { dt0, dt_max } => dt0 > 0.0 && dt_max >= dt0,
        };
        if !dt_ok {
            return domain(format!("invalid step policy {:?}", self.step));
        }
        if !(self.newton_tol > 0.0) || self.max_newton == 0 {
            return domain("Newton tolerance and iteration budget must be positive");
        }
        Ok(())
    }
}

const MAX_DAMPING_HALVINGS: usize = 30;
const MAX_STEP_RETRIES: usize = 10;

/// Ordered snapshots of one flow on a shared grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    grid: LogPolarGrid,
    times: Vec<f64>,
    values: Vec<Vec<f64>>,
    schedule: Option<BoundarySchedule>,
    config: Option<SolverConfig>,
}

impl Trajectory {
    fn start(initial: &ConformalState, schedule: &BoundarySchedule, config: &SolverConfig) -> Self {
        Self {
            grid: initial.grid().clone(),
            times: vec![initial.time()],
            values: vec![initial.values().to_vec()],
            schedule: Some(schedule.clone()),
            config: Some(config.clone()),
        }
    }

    /// Builds a trajectory from states sharing one grid, in increasing time.
    pub fn from_states(states: Vec<ConformalState>) -> Result<Self> {
        let first = states
            .first()
            .ok_or_else(|| Error::Incompatible("empty trajectory".into()))?;
        let grid = first.grid().clone();
        let mut times = Vec::with_capacity(states.len());
        let mut values = Vec::with_capacity(states.len());
        for st in states {
            if st.grid() != &grid {
                return Err(Error::Incompatible("snapshots live on different grids".into()));
            }
            if times.last().is_some_and(|&t| st.time() <= t) {
                return Err(Error::Incompatible("snapshot times must increase strictly".into()));
            }
            times.push(st.time());
            values.push(st.into_values());
        }
        Ok(Self {
            grid,
            times,
            values,
            schedule: None,
            config: None,
        })
    }

    /// Samples a closed-form model at the given times.
    pub fn from_model(model: ModelSolution, grid: &LogPolarGrid, times: &[f64]) -> Result<Self> {
        let states = times
            .iter()
            .map(|&t| model.state(grid, t))
            .collect::<Result<Vec<_>>>()?;
        let mut traj = Self::from_states(states)?;
        traj.schedule = Some(BoundarySchedule::exact(model, grid));
        Ok(traj)
    }

    pub fn grid(&self) -> &LogPolarGrid {
        &self.grid
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn values(&self, i: usize) -> &[f64] {
        &self.values[i]
    }

    pub fn schedule(&self) -> Option<&BoundarySchedule> {
        self.schedule.as_ref()
    }

    pub fn config(&self) -> Option<&SolverConfig> {
        self.config.as_ref()
    }

    pub fn state(&self, i: usize) -> ConformalState {
        ConformalState::new(self.grid.clone(), self.values[i].clone(), self.times[i])
            .expect("trajectory snapshots are valid states")
    }

    pub fn last(&self) -> ConformalState {
        self.state(self.len() - 1)
    }

    /// Index of the snapshot at time `t` (relative match to 1e-12).
    pub fn index_of(&self, t: f64) -> Result<usize> {
        self.times
            .iter()
            .position(|&x| (x - t).abs() <= 1e-12 * t.abs().max(1.0))
            .ok_or(Error::NotSampled(t))
    }

    pub fn state_at(&self, t: f64) -> Result<ConformalState> {
        Ok(self.state(self.index_of(t)?))
    }

    fn push(&mut self, state: ConformalState) {
        self.times.push(state.time());
        self.values.push(state.into_values());
    }
}

/// Outcome of a single backward-Euler step.
#[derive(Debug, Clone)]
pub struct StepOutcome {
    pub state: ConformalState,
    pub newton_iterations: usize,
}

fn thomas(sub: &[f64], diag: &mut [f64], sup: &[f64], rhs: &mut [f64]) {
    let n = diag.len();
    for i in 1..n {
        let m = sub[i] / diag[i - 1];
        diag[i] -= m * sup[i - 1];
        rhs[i] -= m * rhs[i - 1];
    }
    rhs[n - 1] /= diag[n - 1];
    for i in (0..n - 1).rev() {
        rhs[i] = (rhs[i] - sup[i] * rhs[i + 1]) / diag[i];
    }
}

struct StepSystem<'a> {
    grid: &'a LogPolarGrid,
    old: &'a [f64],
    dt: f64,
    /// Index one past the last unknown.
    end: usize,
    smooth_centre: bool,
}

impl StepSystem<'_> {
    /// Residual `e^{w_i} − U_old_i − Δt D₂w_i` at unknowns `1..end`, plus the
    /// tridiagonal Jacobian when `jac` is given.
    fn residual(&self, w: &[f64], mut jac: Option<(&mut [f64], &mut [f64], &mut [f64])>) -> Vec<f64> {
        let n = self.grid.len();
        let nodes = self.grid.nodes();
        let mut res = Vec::with_capacity(self.end - 1);
        for i in 1..self.end {
            let u = w[i].exp();
            let (l, c, r, d2) = if i == n - 1 {
                // ghost node mirrored through the slope condition w' = −2
                let h = nodes[n - 1] - nodes[n - 2];
                let k = 2.0 / (h * h);
                (k, -k, 0.0, k * (w[n - 2] - w[n - 1] - 2.0 * h))
            } else {
                let (l, c, r) = self.grid.second_difference_weights(i);
                (l, c, r, l * w[i - 1] + c * w[i] + r * w[i + 1])
            };
            debug_assert!(i < n - 1 || self.smooth_centre);
            res.push(u - self.old[i] - self.dt * d2);
            if let Some((sub, diag, sup)) = jac.as_mut() {
                let j = i - 1;
                sub[j] = -self.dt * l;
                diag[j] = u - self.dt * c;
                sup[j] = -self.dt * r;
            }
        }
        res
    }
}

fn scaled_norm(res: &[f64], w: &[f64]) -> f64 {
    res.iter()
        .zip(&w[1..])
        .map(|(r, wi)| (r / wi.exp()).abs())
        .fold(0.0, f64::max)
}

/// One backward-Euler step of size `dt`.
pub fn step(state: &ConformalState, dt: f64, schedule: &BoundarySchedule) -> Result<ConformalState> {
    let config = SolverConfig::default();
    step_with(state, dt, schedule, &config).map(|o| o.state)
}

pub fn step_with(
    state: &ConformalState,
    dt: f64,
    schedule: &BoundarySchedule,
    config: &SolverConfig,
) -> Result<StepOutcome> {
    if !(dt > 0.0 && dt.is_finite()) {
        return domain(format!("time step must be positive, got {dt}"));
    }
    let grid = state.grid();
    let n = grid.len();
    let t_new = state.time() + dt;
    let fail = |residual: f64, iterations: usize| Error::StepFailure {
        time: t_new,
        residual,
        iterations,
    };

    let mut w = state.log_values();
    let inner = schedule.inner_value(t_new);
    if !(inner > 0.0 && inner.is_finite()) {
        return domain(format!("inner boundary value {inner} at t = {t_new} is not positive"));
    }
    w[0] = inner.ln();
    let smooth_centre = match schedule.outer_value(t_new) {
        Some(v) if v > 0.0 && v.is_finite() => {
            w[n - 1] = v.ln();
            false
        }
        Some(v) => return domain(format!("outer boundary value {v} at t = {t_new} is not positive")),
        None => true,
    };
    let system = StepSystem {
        grid,
        old: state.values(),
        dt,
        end: if smooth_centre { n } else { n - 1 },
        smooth_centre,
    };
    let m = system.end - 1;
    let (mut sub, mut diag, mut sup) = (vec![0.0; m], vec![0.0; m], vec![0.0; m]);

    let mut res = system.residual(&w, Some((&mut sub, &mut diag, &mut sup)));
    let mut norm = scaled_norm(&res, &w);
    for iteration in 1..=config.max_newton {
        let mut delta: Vec<f64> = res.iter().map(|r| -r).collect();
        thomas(&sub, &mut diag, &sup, &mut delta);
        let update = delta.iter().fold(0.0f64, |acc, d| acc.max(d.abs()));
        if !update.is_finite() {
            return Err(fail(norm, iteration));
        }

        let mut lambda = 1.0;
        let mut accepted = None;
        for _ in 0..=MAX_DAMPING_HALVINGS {
            let mut trial = w.clone();
            for (wi, d) in trial[1..system.end].iter_mut().zip(&delta) {
                *wi += lambda * d;
            }
            if trial.iter().all(|x| x.is_finite() && *x < 700.0) {
                let trial_res = system.residual(&trial, None);
                let trial_norm = scaled_norm(&trial_res, &trial);
                if trial_norm.is_finite() && (trial_norm < norm || update * lambda <= config.newton_tol) {
                    accepted = Some(trial);
                    break;
                }
            }
            lambda *= 0.5;
        }
        let Some(next) = accepted else {
            return Err(fail(norm, iteration));
        };
        w = next;
        res = system.residual(&w, Some((&mut sub, &mut diag, &mut sup)));
        norm = scaled_norm(&res, &w);
        if lambda == 1.0 && update <= config.newton_tol {
            let values = w.iter().map(|x| x.exp()).collect();
            let state = ConformalState::new(grid.clone(), values, t_new)?;
            return Ok(StepOutcome {
                state,
                newton_iterations: iteration,
            });
        }
    }
    Err(fail(norm, config.max_newton))
}

/// Evolves `initial` to time `t_end`, keeping snapshots at the configured
/// sample times and at `t_end`.
pub fn evolve(
    initial: &ConformalState,
    schedule: &BoundarySchedule,
    config: &SolverConfig,
    t_end: f64,
) -> Result<Trajectory> {
    config.validate()?;
    let t0 = initial.time();
    if !(t_end > t0) {
        return domain(format!("final time {t_end} must exceed the initial time {t0}"));
    }
    let mut stops: Vec<f64> = config
        .sample_times
        .iter()
        .copied()
        .filter(|&t| t > t0 && t < t_end)
        .collect();
    stops.sort_by(f64::total_cmp);
    stops.dedup();
    stops.push(t_end);

    let mut traj = Trajectory::start(initial, schedule, config);
    let mut current = initial.clone();
    let mut dt = config.step.initial();
    let mut easy_streak = 0usize;
    for &stop in &stops {
        while current.time() < stop {
            let remaining = stop - current.time();
            // absorb a tiny remainder instead of taking a sliver step
            let land = dt >= remaining * (1.0 - 1e-9);
            let mut attempt = if land { remaining } else { dt };
            let mut tries = 0;
            let outcome = loop {
                match step_with(&current, attempt, schedule, config) {
                    Ok(o) => break o,
                    Err(e @ Error::StepFailure { .. }) => {
                        tries += 1;
                        if tries > MAX_STEP_RETRIES {
                            return Err(Error::Run {
                                partial: Box::new(traj),
                                source: Box::new(e),
                            });
                        }
                        attempt *= 0.5;
                    }
                    Err(e) => {
                        return Err(Error::Run {
                            partial: Box::new(traj),
                            source: Box::new(e),
                        })
                    }
                }
            };
            let landed = land && tries == 0;
            current = outcome.state;
            if landed {
                current = ConformalState::new(current.grid().clone(), current.into_values(), stop)?;
            }
            dt = next_dt(&config.step, dt, attempt, tries, outcome.newton_iterations, &mut easy_streak);
        }
        traj.push(current.clone());
    }
    Ok(traj)
}

fn next_dt(
    policy: &StepPolicy,
    planned: f64,
    taken: f64,
    retries: usize,
    iterations: usize,
    easy_streak: &mut usize,
) -> f64 {
    match *policy {
        StepPolicy::Fixed { dt } => dt,
        StepPolicy::Geometric { growth, dt_max, .. } => (planned * growth).min(dt_max),
        StepPolicy::Adaptive { dt_max, .. } => {
            if retries > 0 {
                *easy_streak = 0;
                return taken;
            }
            if iterations <= 3 {
                *easy_streak += 1;
            } else {
                *easy_streak = 0;
            }
            if *easy_streak >= 3 {
                *easy_streak = 0;
                (planned * 2.0).min(dt_max)
            } else {
                planned
            }
        }
    }
}

/// Pointwise order report between two trajectories, measured in `log U`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OrderReport {
    /// `min (log U_b − log U_a)` over all nodes and sample times.
    pub min_log_gap: f64,
    pub worst_time: f64,
    pub worst_s: f64,
    pub tolerance: f64,
    pub ordered: bool,
}

fn check_compatible(a: &Trajectory, b: &Trajectory) -> Result<()> {
    if a.grid() != b.grid() {
        return Err(Error::Incompatible("trajectories live on different grids".into()));
    }
    if a.times().len() != b.times().len()
        || a.times().iter().zip(b.times()).any(|(x, y)| (x - y).abs() > 1e-12 * x.abs().max(1.0))
    {
        return Err(Error::Incompatible("trajectories have different sample times".into()));
    }
    Ok(())
}

/// Checks `U_a ≤ U_b` (relative tolerance `tol` in `log U`) at every node and time.
pub fn check_order_preservation(a: &Trajectory, b: &Trajectory, tol: f64) -> Result<OrderReport> {
    check_compatible(a, b)?;
    let mut report = OrderReport {
        min_log_gap: f64::INFINITY,
        worst_time: a.times()[0],
        worst_s: a.grid().s_min(),
        tolerance: tol,
        ordered: true,
    };
    for (k, &t) in a.times().iter().enumerate() {
        for (i, (&ua, &ub)) in a.values(k).iter().zip(b.values(k)).enumerate() {
            let gap = ub.ln() - ua.ln();
            if gap < report.min_log_gap {
                report.min_log_gap = gap;
                report.worst_time = t;
                report.worst_s = a.grid().nodes()[i];
            }
        }
    }
    report.ordered = report.min_log_gap >= -tol;
    Ok(report)
}

/// Largest relative difference `|U_a/U_b − 1|` over nodes with `s ≥ s_from`
/// at snapshot `k`.
pub fn sup_relative_difference(a: &Trajectory, b: &Trajectory, k: usize, s_from: f64) -> f64 {
    a.grid()
        .nodes()
        .iter()
        .zip(a.values(k).iter().zip(b.values(k)))
        .filter(|(&s, _)| s >= s_from)
        .map(|(_, (&ua, &ub))| (ua / ub - 1.0).abs())
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExhaustionDiagnostics {
    pub ramps: Vec<f64>,
    /// Worst `log U_k − log U_{k+1}` over interior nodes and times, per consecutive pair.
    pub monotonicity_violation: Vec<f64>,
    pub monotone: bool,
    /// Sup over `D_{r₀}` of the relative difference between consecutive members, at `t_end`.
    pub successive_sup_differences: Vec<f64>,
    pub tolerance: f64,
}

#[derive(Debug, Clone)]
pub struct Exhaustion {
    pub trajectories: Vec<Trajectory>,
    pub diagnostics: ExhaustionDiagnostics,
}

/// Runs one ramp-driven flow per `k` (independently, in parallel) and checks
/// the family is pointwise nondecreasing in `k`.
pub fn exhaust(
    initial: &ConformalState,
    ramps: &[f64],
    config: &SolverConfig,
    t_end: f64,
    r0: f64,
) -> Result<Exhaustion> {
    if ramps.is_empty() {
        return domain("need at least one ramp");
    }
    if ramps.windows(2).any(|w| w[1] < w[0]) {
        return domain("ramps must be nondecreasing");
    }
    let s_probe = s_from_r(r0)?;
    let trajectories = ramps
        .par_iter()
        .map(|&k| evolve(initial, &BoundarySchedule::ramp(initial, k), config, t_end))
        .collect::<Result<Vec<_>>>()?;

    let tolerance = 10.0 * config.newton_tol;
    let mut violation = Vec::new();
    let mut sup = Vec::new();
    for pair in trajectories.windows(2) {
        let (lo, hi) = (&pair[0], &pair[1]);
        check_compatible(lo, hi)?;
        let n = lo.grid().len();
        let mut worst = f64::NEG_INFINITY;
        for k in 0..lo.len() {
            for i in 1..n - 1 {
                worst = worst.max(lo.values(k)[i].ln() - hi.values(k)[i].ln());
            }
        }
        violation.push(worst);
        sup.push(sup_relative_difference(lo, hi, lo.len() - 1, s_probe));
    }
    let monotone = violation.iter().all(|&v| v <= tolerance);
    Ok(Exhaustion {
        trajectories,
        diagnostics: ExhaustionDiagnostics {
            ramps: ramps.to_vec(),
            monotonicity_violation: violation,
            monotone,
            successive_sup_differences: sup,
            tolerance,
        },
    })
}

/// Max-norm relative error of a single step started from the exact solution
/// at `t`, against the exact solution at `t + dt`.
pub fn mms_residual(model: ModelSolution, grid: &LogPolarGrid, t: f64, dt: f64) -> Result<f64> {
    mms_residual_with(model, grid, t, dt, &SolverConfig::default())
}

pub fn mms_residual_with(
    model: ModelSolution,
    grid: &LogPolarGrid,
    t: f64,
    dt: f64,
    config: &SolverConfig,
) -> Result<f64> {
    let start = model.state(grid, t)?;
    let schedule = BoundarySchedule::exact(model, grid);
    let next = step_with(&start, dt, &schedule, config)?.state;
    let exact = model.state(grid, t + dt)?;
    Ok(max_relative_error(next.values(), exact.values()))
}

pub fn max_relative_error(values: &[f64], exact: &[f64]) -> f64 {
    values
        .iter()
        .zip(exact)
        .map(|(u, e)| ((u - e) / e).abs())
        .fold(0.0, f64::max)
}
