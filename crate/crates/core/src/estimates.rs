//! Weighted-area differences `J(t)` between a lower flow `g = U` and an upper
//! flow `G = V`, and certificates for the inequalities that control them.
//!
//! Every certificate records both sides of `lhs ≤ rhs` and the margin
//! `rhs − lhs`, together with the constants that entered the right-hand side.

use std::f64::consts::{LN_2, PI, TAU};

use serde::Serialize;

use crate::error::{domain, Error, Result};
use crate::flux::{compute_q, log_power_inequality, Certificate, CutoffSpec, QConstant};
use crate::geometry::{disc_area, gauss_curvature, hyperbolic_factor, segment, tail_area, trapezoid, MIN_SUPPORT_NODES};
use crate::solver::{check_order_preservation, Trajectory};

/// `C = 9/(32 log²2)`, so that `1/U ≤ C s²/t` on `(0, log 2]` whenever `U ≥ 2tH`.
pub fn pointwise_constant() -> f64 {
    9.0 / (32.0 * LN_2 * LN_2)
}

/// Tolerances used by the certificates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EstimateOptions {
    /// Allowed `log U − log V` when a pair is required to be ordered.
    pub order_tol: f64,
    /// Allowed undershoot of `U − 2tH`.
    pub barrier_tol: f64,
    /// Allowed undershoot of the curvature precondition `K ≥ −1`.
    pub curvature_tol: f64,
}

impl Default for EstimateOptions {
    fn default() -> Self {
        Self {
            order_tol: 1e-8,
            barrier_tol: 1e-8,
            curvature_tol: 1e-3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum JVariant {
    /// `∫(V − U)φ`.
    Ordered,
    /// `∫(V − U)₊φ`.
    PositivePart,
}

/// Constants entering the area certificates for one exponent `γ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrackedConstants {
    pub gamma: f64,
    /// `C` in `1/U ≤ C s²/t`.
    pub pointwise: f64,
    /// `C*(γ) = (1+γ)/γ · (2π)^{1/(1+γ)} · C^{γ/(1+γ)}`.
    pub odi: f64,
    pub q: QConstant,
    /// `C(γ) = C*(γ) · C_Q(γ)^{1/(1+γ)}`.
    pub area: f64,
}

impl TrackedConstants {
    pub fn new(gamma: f64) -> Result<Self> {
        let q = QConstant::new(gamma)?;
        let inv = 1.0 / (1.0 + gamma);
        let pointwise = pointwise_constant();
        let odi = (1.0 + gamma) / gamma * TAU.powf(inv) * pointwise.powf(gamma * inv);
        Ok(Self {
            gamma,
            pointwise,
            odi,
            q,
            area: odi * q.total.powf(inv),
        })
    }

    /// `C(γ, r₀)` in `Vol_G D_{r₀} − Vol_g D_{r₀} ≤ C(γ, r₀) t / (−log S)^γ`
    /// for equal initial data.
    pub fn envelope(&self, s0: f64) -> f64 {
        let g = self.gamma;
        self.area.powf(1.0 + g) * (1.0 + s0.ln().abs() / 3f64.ln()).powf(g) / s0
    }

    fn describe(&self) -> String {
        format!(
            "C={:.12e};C*={:.12e};C_Q={:.12e};C(gamma)={:.12e}",
            self.pointwise, self.odi, self.q.total, self.area
        )
    }
}

/// One row of the exported constants table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConstantsRow {
    pub gamma: f64,
    pub r0: f64,
    pub pointwise: f64,
    pub odi: f64,
    pub q_far: f64,
    pub q_beta_bound: f64,
    pub q_near: f64,
    pub q_absorbed: f64,
    pub q_conversion: f64,
    pub q_total: f64,
    pub area: f64,
    pub envelope: f64,
}

pub fn constants_table(gammas: &[f64], r0s: &[f64]) -> Result<Vec<ConstantsRow>> {
    let mut rows = Vec::with_capacity(gammas.len() * r0s.len());
    for &gamma in gammas {
        let c = TrackedConstants::new(gamma)?;
        for &r0 in r0s {
            if !(r0 > 0.5 && r0 < 1.0) {
                return domain(format!("r0 = {r0} violates r0 ∈ (1/2, 1)"));
            }
            rows.push(ConstantsRow {
                gamma,
                r0,
                pointwise: c.pointwise,
                odi: c.odi,
                q_far: c.q.far,
                q_beta_bound: c.q.beta_integral_bound,
                q_near: c.q.near,
                q_absorbed: c.q.absorbed,
                q_conversion: c.q.conversion,
                q_total: c.q.total,
                area: c.area,
                envelope: c.envelope(-r0.ln()),
            });
        }
    }
    Ok(rows)
}

/// A recorded inequality `lhs ≤ rhs` at one sample time (or over the interval
/// `[interval_start, time]`).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InequalityRow {
    pub time: f64,
    pub interval_start: Option<f64>,
    pub inequality: String,
    pub lhs: f64,
    pub rhs: f64,
    pub margin: f64,
    pub constants: String,
}

impl InequalityRow {
    fn new(time: f64, inequality: &str, cert: Certificate, constants: String) -> Self {
        Self {
            time,
            interval_start: None,
            inequality: inequality.to_string(),
            lhs: cert.lhs,
            rhs: cert.rhs,
            margin: cert.margin,
            constants,
        }
    }

    fn over(mut self, start: f64) -> Self {
        self.interval_start = Some(start);
        self
    }

    pub fn holds_within(&self, tol: f64) -> bool {
        self.margin >= -tol
    }
}

fn rows_hold(rows: &[InequalityRow], tol: f64) -> bool {
    rows.iter().all(|r| r.holds_within(tol))
}

fn min_margin(rows: &[InequalityRow]) -> f64 {
    rows.iter().map(|r| r.margin).fold(f64::INFINITY, f64::min)
}

/// Per-time quantities of the weighted-area difference.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct JRecord {
    pub time: f64,
    pub j_ordered: f64,
    pub j_positive: f64,
    pub djdt: f64,
    pub phi_integral: f64,
    pub boundary_inner: f64,
    pub boundary_outer: f64,
    pub q: f64,
    pub q_bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimateReport {
    pub records: Vec<JRecord>,
    pub rows: Vec<InequalityRow>,
    /// Certificates skipped because a precondition failed, with the reason.
    pub skipped: Vec<String>,
}

impl EstimateReport {
    pub fn all_hold(&self, tol: f64) -> bool {
        rows_hold(&self.rows, tol)
    }

    pub fn min_margin(&self) -> f64 {
        min_margin(&self.rows)
    }
}

fn same_grid(g: &Trajectory, big: &Trajectory) -> Result<()> {
    if g.grid() != big.grid() {
        return Err(Error::Incompatible("trajectories live on different grids".into()));
    }
    Ok(())
}

fn shared_times(g: &Trajectory, big: &Trajectory) -> Result<()> {
    same_grid(g, big)?;
    let matched = g.len() == big.len()
        && g.times()
            .iter()
            .zip(big.times())
            .all(|(a, b)| (a - b).abs() <= 1e-12 * a.abs().max(1.0));
    if !matched {
        return Err(Error::Incompatible("trajectories have different sample times".into()));
    }
    Ok(())
}

fn check_support(g: &Trajectory, cutoff: &CutoffSpec) -> Result<()> {
    let grid = g.grid();
    let s = cutoff.s_inner();
    if s < grid.s_min() || cutoff.s0() >= grid.s_max() {
        return domain(format!(
            "cut-off support [{s}, {}] is not inside grid [{}, {}]",
            cutoff.s0(),
            grid.s_min(),
            grid.s_max()
        ));
    }
    let resolved = grid.count_in(s, 0.5 * cutoff.s0());
    if resolved < MIN_SUPPORT_NODES {
        return Err(Error::Resolution(format!(
            "transition [{s}, {}] of the cut-off holds {resolved} nodes, need {MIN_SUPPORT_NODES}",
            0.5 * cutoff.s0()
        )));
    }
    Ok(())
}

fn difference(u: &[f64], v: &[f64], variant: JVariant) -> Vec<f64> {
    u.iter()
        .zip(v)
        .map(|(a, b)| match variant {
            JVariant::Ordered => b - a,
            JVariant::PositivePart => (b - a).max(0.0),
        })
        .collect()
}

/// `(2π ∫_S^{s_max} d φ ds, tail)` for a nodal difference `d`.
fn j_parts(g: &Trajectory, cutoff: &CutoffSpec, d: &[f64]) -> (f64, f64) {
    let grid = g.grid();
    let (s, v) = segment(grid.nodes(), d, cutoff.s_inner(), grid.s_max());
    let samples: Vec<f64> = s.iter().zip(&v).map(|(&x, &y)| y * cutoff.phi(x)).collect();
    let tail = tail_area(d[d.len() - 1] * cutoff.phi(grid.s_max()));
    (TAU * trapezoid(&s, &samples), tail)
}

/// `J(t)` for the pair `(g, G)`: `2π ∫ (V − U) φ ds` (or with `(V − U)₊`)
/// over `[S, s_max]`, plus the centre tail.
pub fn compute_j(g: &Trajectory, big: &Trajectory, cutoff: &CutoffSpec, t: f64, variant: JVariant) -> Result<f64> {
    same_grid(g, big)?;
    check_support(g, cutoff)?;
    let (i, k) = (g.index_of(t)?, big.index_of(t)?);
    let (body, tail) = j_parts(g, cutoff, &difference(g.values(i), big.values(k), variant));
    Ok(body + tail)
}

/// [`compute_j`] without the tail beyond `s_max`.
pub fn compute_j_truncated(
    g: &Trajectory,
    big: &Trajectory,
    cutoff: &CutoffSpec,
    t: f64,
    variant: JVariant,
) -> Result<f64> {
    same_grid(g, big)?;
    check_support(g, cutoff)?;
    let (i, k) = (g.index_of(t)?, big.index_of(t)?);
    Ok(j_parts(g, cutoff, &difference(g.values(i), big.values(k), variant)).0)
}

/// Second-order derivative of sampled `f` at index `k` on a nonuniform
/// sequence `x`: centred in the interior, one-sided at the ends.
fn sampled_derivative(x: &[f64], f: &[f64], k: usize) -> f64 {
    let n = x.len();
    if n == 2 {
        return (f[1] - f[0]) / (x[1] - x[0]);
    }
    let j = k.saturating_sub(1).min(n - 3);
    // derivative of the quadratic through (x_j, x_{j+1}, x_{j+2}) at x_k
    let (x0, x1, x2) = (x[j], x[j + 1], x[j + 2]);
    let (f0, f1, f2) = (f[j], f[j + 1], f[j + 2]);
    let t = x[k];
    let d0 = f0 * ((t - x1) + (t - x2)) / ((x0 - x1) * (x0 - x2));
    let d1 = f1 * ((t - x0) + (t - x2)) / ((x1 - x0) * (x1 - x2));
    let d2 = f2 * ((t - x0) + (t - x1)) / ((x2 - x0) * (x2 - x1));
    d0 + d1 + d2
}

/// Outcome of comparing `dJ/dt` with its integrated-by-parts form.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DjdtReport {
    pub time: f64,
    /// Finite-difference derivative of the truncated `J`.
    pub fd_derivative: f64,
    /// `2π ∫ (log V − log U) φ'' ds` over `[S, s_max]`.
    pub phi_integral: f64,
    /// `2π [φ w' − φ' w]` at `S`, with `w = log V − log U`.
    pub boundary_inner: f64,
    /// `2π [φ w' − φ' w]` at `s_max`.
    pub boundary_outer: f64,
    /// `phi_integral + boundary_outer − boundary_inner`.
    pub rhs: f64,
    pub discrepancy: f64,
    pub relative_discrepancy: f64,
}

/// `2π ∫_S^{s_max} w φ'' ds`, split at the points where `φ''` jumps.
fn phi_second_integral(nodes: &[f64], w: &[f64], cutoff: &CutoffSpec, s_max: f64) -> f64 {
    let mut breaks: Vec<f64> = cutoff.kinks().into_iter().filter(|&k| k < s_max).collect();
    breaks.push(s_max);
    let scale = 2.0 / cutoff.s0();
    let mut total = 0.0;
    for piece in breaks.windows(2) {
        let (lo, hi) = (piece[0], piece[1]);
        if hi <= lo {
            continue;
        }
        let (s, v) = segment(nodes, w, lo, hi);
        let last = s.len() - 1;
        let samples: Vec<f64> = s
            .iter()
            .zip(&v)
            .enumerate()
            .map(|(j, (&x, &y))| {
                let (left, right) = cutoff.flux().second_deriv_limits(scale * x);
                let f2 = if j == last { left } else if j == 0 { right } else { cutoff.flux().second_deriv(scale * x) };
                y * scale * scale * f2
            })
            .collect();
        total += trapezoid(&s, &samples);
    }
    TAU * total
}

/// Value and slope of nodal data at `s` (linear value, second-order slope
/// from the three nearest nodes).
fn value_and_slope(nodes: &[f64], f: &[f64], s: f64) -> (f64, f64) {
    let n = nodes.len();
    let i = nodes.partition_point(|&x| x <= s).saturating_sub(1).min(n - 2);
    let w = (s - nodes[i]) / (nodes[i + 1] - nodes[i]);
    let value = f[i] * (1.0 - w) + f[i + 1] * w;
    let j = i.min(n - 3);
    let (x0, x1, x2) = (nodes[j], nodes[j + 1], nodes[j + 2]);
    let slope = f[j] * ((s - x1) + (s - x2)) / ((x0 - x1) * (x0 - x2))
        + f[j + 1] * ((s - x0) + (s - x2)) / ((x1 - x0) * (x1 - x2))
        + f[j + 2] * ((s - x0) + (s - x1)) / ((x2 - x0) * (x2 - x1));
    (value, slope)
}

/// Compares `dJ/dt` (finite differences in time of the truncated `J`) with
/// `2π ∫ w φ'' + 2π [φ w' − φ' w]` evaluated at both ends of `[S, s_max]`.
pub fn djdt_identity_check(g: &Trajectory, big: &Trajectory, cutoff: &CutoffSpec, t: f64) -> Result<DjdtReport> {
    shared_times(g, big)?;
    check_support(g, cutoff)?;
    if g.len() < 2 {
        return Err(Error::Size {
            needed: 2,
            got: g.len(),
        });
    }
    let k = g.index_of(t)?;
    let js = (0..g.len())
        .map(|i| j_parts(g, cutoff, &difference(g.values(i), big.values(i), JVariant::Ordered)).0)
        .collect::<Vec<_>>();
    let fd_derivative = sampled_derivative(g.times(), &js, k);

    let grid = g.grid();
    let nodes = grid.nodes();
    let w: Vec<f64> = g.values(k).iter().zip(big.values(k)).map(|(u, v)| v.ln() - u.ln()).collect();
    let phi_integral = phi_second_integral(nodes, &w, cutoff, grid.s_max());
    let end_term = |s: f64| {
        let (value, slope) = value_and_slope(nodes, &w, s);
        TAU * (cutoff.phi(s) * slope - cutoff.phi_prime(s) * value)
    };
    let boundary_inner = end_term(cutoff.s_inner());
    let boundary_outer = end_term(grid.s_max());
    let rhs = phi_integral + boundary_outer - boundary_inner;
    let discrepancy = fd_derivative - rhs;
    let scale = fd_derivative.abs().max(rhs.abs());
    Ok(DjdtReport {
        time: g.times()[k],
        fd_derivative,
        phi_integral,
        boundary_inner,
        boundary_outer,
        rhs,
        discrepancy,
        relative_discrepancy: if scale > 0.0 { discrepancy.abs() / scale } else { 0.0 },
    })
}

/// `min (U − 2tH)` over the nodes at one sample time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BarrierRecord {
    pub time: f64,
    pub margin: f64,
    pub worst_s: f64,
    /// `min (log U − log 2tH)`; `+∞` at `t = 0`.
    pub log_margin: f64,
}

pub fn lower_barrier_check(traj: &Trajectory) -> Vec<BarrierRecord> {
    let nodes = traj.grid().nodes();
    let barrier: Vec<f64> = nodes.iter().map(|&s| hyperbolic_factor(s).unwrap_or(f64::INFINITY)).collect();
    traj.times()
        .iter()
        .enumerate()
        .map(|(k, &t)| {
            let mut rec = BarrierRecord {
                time: t,
                margin: f64::INFINITY,
                worst_s: nodes[0],
                log_margin: f64::INFINITY,
            };
            for (i, &u) in traj.values(k).iter().enumerate() {
                let b = 2.0 * t * barrier[i];
                let m = u - b;
                if m < rec.margin {
                    rec.margin = m;
                    rec.worst_s = nodes[i];
                }
                if t > 0.0 {
                    rec.log_margin = rec.log_margin.min(u.ln() - b.ln());
                }
            }
            rec
        })
        .collect()
}

/// Outcome of the pointwise bound `1/U ≤ C s²/t` on the nodes in `(0, s₀]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PointwiseReport {
    pub time: f64,
    pub barrier_margin: f64,
    pub precondition_holds: bool,
    /// The tightest node, when the precondition holds.
    pub certificate: Option<Certificate>,
    pub worst_s: f64,
}

pub fn pointwise_u_inverse_bound(traj: &Trajectory, t: f64, s0: f64, opts: &EstimateOptions) -> Result<PointwiseReport> {
    if !(s0 > 0.0 && s0 <= LN_2 * (1.0 + 1e-15)) {
        return domain(format!("s0 = {s0} must lie in (0, log 2]"));
    }
    if !(t > 0.0) {
        return domain(format!("the pointwise bound needs t > 0, got {t}"));
    }
    let k = traj.index_of(t)?;
    let nodes = traj.grid().nodes();
    let values = traj.values(k);
    let mut barrier_margin = f64::INFINITY;
    let mut best: Option<(Certificate, f64)> = None;
    let c = pointwise_constant();
    for (&s, &u) in nodes.iter().zip(values) {
        if s > s0 {
            break;
        }
        barrier_margin = barrier_margin.min(u - 2.0 * t * hyperbolic_factor(s)?);
        let cert = Certificate::new(1.0 / u, c * s * s / t);
        if best.is_none_or(|(b, _)| cert.margin < b.margin) {
            best = Some((cert, s));
        }
    }
    let Some((cert, worst_s)) = best else {
        return domain(format!("no grid node lies in (0, {s0}]"));
    };
    let precondition_holds = barrier_margin >= -opts.barrier_tol;
    Ok(PointwiseReport {
        time: traj.times()[k],
        barrier_margin,
        precondition_holds,
        certificate: precondition_holds.then_some(cert),
        worst_s,
    })
}

fn require_ordered(g: &Trajectory, big: &Trajectory, opts: &EstimateOptions) -> Result<()> {
    let order = check_order_preservation(g, big, opts.order_tol)?;
    if !order.ordered {
        return Err(Error::Precondition(format!(
            "pair is not ordered: log V − log U = {:e} at s = {}, t = {} (use the volume-excess variant)",
            order.min_log_gap, order.worst_s, order.worst_time
        )));
    }
    Ok(())
}

fn require_barrier(g: &Trajectory, s_upto: f64, opts: &EstimateOptions) -> Result<()> {
    let nodes = g.grid().nodes();
    for (k, &t) in g.times().iter().enumerate() {
        for (&s, &u) in nodes.iter().zip(g.values(k)) {
            if s > s_upto {
                break;
            }
            let m = u - 2.0 * t * hyperbolic_factor(s)?;
            if m < -opts.barrier_tol {
                return Err(Error::Precondition(format!(
                    "lower flow falls below the big-bang barrier by {:e} at s = {s}, t = {t}",
                    -m
                )));
            }
        }
    }
    Ok(())
}

/// The integrated differential inequality
/// `J^{1/(1+γ)}(t₂) − J^{1/(1+γ)}(t₁) ≤ C*(γ) (t₂^{1/(1+γ)} − t₁^{1/(1+γ)}) Q^{1/(1+γ)}`
/// on every pair of consecutive sample times.
pub fn main_odi_check(
    g: &Trajectory,
    big: &Trajectory,
    cutoff: &CutoffSpec,
    opts: &EstimateOptions,
) -> Result<Vec<InequalityRow>> {
    shared_times(g, big)?;
    check_support(g, cutoff)?;
    require_ordered(g, big, opts)?;
    require_barrier(g, cutoff.s0(), opts)?;
    let constants = TrackedConstants::new(cutoff.gamma())?;
    let q = compute_q(cutoff)?;
    let inv = 1.0 / (1.0 + cutoff.gamma());
    let label = format!("{};Q={:.12e}", constants.describe(), q.q);
    let js = g
        .times()
        .iter()
        .map(|&t| compute_j(g, big, cutoff, t, JVariant::Ordered).map(|j| j.max(0.0)))
        .collect::<Result<Vec<_>>>()?;
    let times = g.times();
    Ok((1..times.len())
        .map(|k| {
            let (t1, t2) = (times[k - 1], times[k]);
            let lhs = js[k].powf(inv) - js[k - 1].powf(inv);
            let rhs = constants.odi * (t2.powf(inv) - t1.powf(inv)) * q.q.powf(inv);
            InequalityRow::new(t2, "main_odi", Certificate::new(lhs, rhs), label.clone()).over(t1)
        })
        .collect())
}

/// `2π ∫_{s_lo}^{s_max} d ds` plus the centre tail.
fn area_of_difference(g: &Trajectory, d: &[f64], s_lo: f64) -> f64 {
    let grid = g.grid();
    let (s, v) = segment(grid.nodes(), d, s_lo, grid.s_max());
    TAU * trapezoid(&s, &v) + tail_area(d[d.len() - 1])
}

fn area_rhs(initial: f64, elapsed: f64, cutoff: &CutoffSpec, constants: &TrackedConstants) -> f64 {
    let inv = 1.0 / (1.0 + cutoff.gamma());
    let gap = cutoff.s0().ln() - cutoff.s_inner().ln();
    initial.max(0.0).powf(inv) + constants.area * (elapsed / (cutoff.s0() * gap.powf(cutoff.gamma()))).powf(inv)
}

/// Certificates for the area difference on `D_{r₀}` of an ordered pair.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AreaCertificate {
    /// `[ΔVol D_{r₀}]^{1/(1+γ)} ≤ [ΔVol₀ D_R]^{1/(1+γ)} + C(γ)[t/(s₀ (log s₀ − log S)^γ)]^{1/(1+γ)}`.
    pub rows: Vec<InequalityRow>,
    /// `ΔVol D_{r₀} ≤ C(γ, r₀) t / (−log S)^γ`, present when the initial data coincide.
    pub envelope: Vec<InequalityRow>,
    /// Raw `Vol_G D_{r₀} − Vol_g D_{r₀}` per sample time.
    pub area_differences: Vec<f64>,
}

impl AreaCertificate {
    pub fn holds(&self, tol: f64) -> bool {
        rows_hold(&self.rows, tol) && rows_hold(&self.envelope, tol)
    }
}

/// Interior area certificate for an ordered pair on the cut-off `(r₀, R, γ)`.
/// Time is measured from the first sample.
pub fn interior_area_verify(
    g: &Trajectory,
    big: &Trajectory,
    cutoff: &CutoffSpec,
    opts: &EstimateOptions,
) -> Result<AreaCertificate> {
    shared_times(g, big)?;
    check_support(g, cutoff)?;
    require_ordered(g, big, opts)?;
    let constants = TrackedConstants::new(cutoff.gamma())?;
    let inv = 1.0 / (1.0 + cutoff.gamma());
    let t0 = g.times()[0];
    let d0 = difference(g.values(0), big.values(0), JVariant::Ordered);
    let initial = area_of_difference(g, &d0, cutoff.s_inner());
    let equal_start = g.values(0) == big.values(0);
    let envelope_constant = constants.envelope(cutoff.s0());
    let neg_log_s = -cutoff.s_inner().ln();
    let label = constants.describe();

    let mut out = AreaCertificate {
        rows: Vec::new(),
        envelope: Vec::new(),
        area_differences: Vec::new(),
    };
    for (k, &t) in g.times().iter().enumerate() {
        let diff = disc_area(&big.state(k), cutoff.r0())? - disc_area(&g.state(k), cutoff.r0())?;
        out.area_differences.push(diff);
        let elapsed = t - t0;
        let lhs = diff.max(0.0).powf(inv);
        let rhs = area_rhs(initial, elapsed, cutoff, &constants);
        out.rows.push(InequalityRow::new(t, "interior_area", Certificate::new(lhs, rhs), label.clone()));
        if equal_start {
            let bound = envelope_constant * elapsed / neg_log_s.powf(cutoff.gamma());
            out.envelope.push(InequalityRow::new(
                t,
                "area_envelope",
                Certificate::new(diff, bound),
                format!("{label};C(gamma,r0)={envelope_constant:.12e}"),
            ));
        }
    }
    Ok(out)
}

/// Volume-excess certificate: as [`interior_area_verify`] with `(V − U)₊`
/// in place of `V − U`, for pairs that need not be ordered.
pub fn volume_excess_verify(g: &Trajectory, big: &Trajectory, cutoff: &CutoffSpec) -> Result<Vec<InequalityRow>> {
    shared_times(g, big)?;
    check_support(g, cutoff)?;
    let constants = TrackedConstants::new(cutoff.gamma())?;
    let inv = 1.0 / (1.0 + cutoff.gamma());
    let t0 = g.times()[0];
    let initial = volume_excess(g, big, 0, cutoff.s_inner());
    let label = constants.describe();
    Ok(g.times()
        .iter()
        .enumerate()
        .map(|(k, &t)| {
            let excess = volume_excess(g, big, k, cutoff.s0());
            let rhs = area_rhs(initial, t - t0, cutoff, &constants);
            InequalityRow::new(t, "volume_excess", Certificate::new(excess.powf(inv), rhs), label.clone())
        })
        .collect())
}

/// `2π ∫_{s_lo}^∞ (V − U)₊ ds` at snapshot `k` (centre tail included).
pub fn volume_excess(g: &Trajectory, big: &Trajectory, k: usize, s_lo: f64) -> f64 {
    let d = difference(g.values(k), big.values(k), JVariant::PositivePart);
    area_of_difference(g, &d, s_lo)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurvatureReport {
    pub min_curvature: f64,
    pub precondition_holds: bool,
    /// `min_i (e^{−2t₁}U(t₁) − e^{−2t₂}U(t₂))` per consecutive pair of sample
    /// times; empty when the precondition fails.
    pub margins: Vec<InequalityRow>,
}

impl CurvatureReport {
    pub fn min_margin(&self) -> Option<f64> {
        (!self.margins.is_empty()).then(|| min_margin(&self.margins))
    }
}

/// Checks `K ≥ −1` at every sampled state and, if so, that `e^{−2t}U` is
/// nonincreasing in `t` at every node.
pub fn curvature_monotonicity_check(traj: &Trajectory, opts: &EstimateOptions) -> Result<CurvatureReport> {
    let mut min_curvature = f64::INFINITY;
    for k in 0..traj.len() {
        for kappa in gauss_curvature(&traj.state(k))? {
            min_curvature = min_curvature.min(kappa);
        }
    }
    let precondition_holds = min_curvature >= -1.0 - opts.curvature_tol;
    let mut margins = Vec::new();
    if precondition_holds {
        let times = traj.times();
        for k in 1..times.len() {
            let (t1, t2) = (times[k - 1], times[k]);
            let (e1, e2) = ((-2.0 * t1).exp(), (-2.0 * t2).exp());
            let mut worst = Certificate::new(f64::NEG_INFINITY, f64::INFINITY);
            for (u1, u2) in traj.values(k - 1).iter().zip(traj.values(k)) {
                let cert = Certificate::new(e2 * u2, e1 * u1);
                if cert.margin < worst.margin {
                    worst = cert;
                }
            }
            margins.push(InequalityRow::new(t2, "curvature_monotonicity", worst, "K>=-1".into()).over(t1));
        }
    }
    Ok(CurvatureReport {
        min_curvature,
        precondition_holds,
        margins,
    })
}

/// `log V − log U ≤ ((1+γ)/γ) ((V − U)/U)^{γ/(1+γ)}` at the tightest node.
pub fn scalar_log_inequality_check(
    g: &Trajectory,
    big: &Trajectory,
    gamma: f64,
    t: f64,
    opts: &EstimateOptions,
) -> Result<Certificate> {
    same_grid(g, big)?;
    if !(gamma > 0.0 && gamma < 0.5) {
        return domain(format!("gamma = {gamma} violates gamma ∈ (0, 1/2)"));
    }
    let (i, k) = (g.index_of(t)?, big.index_of(t)?);
    let lambda = gamma / (1.0 + gamma);
    let mut worst: Option<Certificate> = None;
    for (&u, &v) in g.values(i).iter().zip(big.values(k)) {
        let gap = v.ln() - u.ln();
        if gap < -opts.order_tol {
            return Err(Error::Precondition(format!("pair is not ordered at t = {t}")));
        }
        let x = (v / u - 1.0).max(0.0);
        let cert = log_power_inequality(lambda, x)?;
        if worst.is_none_or(|w| cert.margin < w.margin) {
            worst = Some(cert);
        }
    }
    Ok(worst.expect("grids are nonempty"))
}

/// Hölder's inequality on the transition region `(S, s₀/2)` with the nodal
/// trapezoid weights:
/// `Σ ω ((V−U)/U)^{λ} φ'' ≤ (Σ ω (V−U) φ)^{λ} (Σ ω U^{−γ} φ''^{1+γ} φ^{−γ})^{1/(1+γ)}`
/// with `λ = γ/(1+γ)`.
pub fn holder_step_check(g: &Trajectory, big: &Trajectory, cutoff: &CutoffSpec, t: f64) -> Result<Certificate> {
    same_grid(g, big)?;
    check_support(g, cutoff)?;
    let (i, k) = (g.index_of(t)?, big.index_of(t)?);
    let gamma = cutoff.gamma();
    let lambda = gamma / (1.0 + gamma);
    let (lo, hi) = (cutoff.s_inner(), 0.5 * cutoff.s0());
    let nodes = g.grid().nodes();
    let idx: Vec<usize> = (0..nodes.len()).filter(|&j| nodes[j] > lo && nodes[j] < hi).collect();
    if idx.len() < 2 {
        return Err(Error::Resolution("no interior nodes in the cut-off transition".into()));
    }
    let weight = |m: usize| {
        let left = if m == 0 { nodes[idx[0]] } else { nodes[idx[m - 1]] };
        let right = if m == idx.len() - 1 { nodes[idx[m]] } else { nodes[idx[m + 1]] };
        0.5 * (right - left)
    };
    let (mut lhs, mut first, mut second) = (0.0, 0.0, 0.0);
    for (m, &j) in idx.iter().enumerate() {
        let s = nodes[j];
        let (u, v) = (g.values(i)[j], big.values(k)[j]);
        let d = (v - u).max(0.0);
        let (phi, phi2) = (cutoff.phi(s), cutoff.phi_second(s));
        let om = weight(m);
        lhs += om * (d / u).powf(lambda) * phi2;
        first += om * d * phi;
        second += om * u.powf(-gamma) * phi2.powf(1.0 + gamma) * phi.powf(-gamma);
    }
    Ok(Certificate::new(lhs, first.powf(lambda) * second.powf(1.0 / (1.0 + gamma))))
}

/// Runs every applicable certificate on the pair `(g, G)`. Certificates that
/// need an ordered pair are skipped (and the reason recorded) otherwise.
pub fn verify_pair(g: &Trajectory, big: &Trajectory, cutoff: &CutoffSpec, opts: &EstimateOptions) -> Result<EstimateReport> {
    shared_times(g, big)?;
    check_support(g, cutoff)?;
    let q = compute_q(cutoff)?;
    let mut report = EstimateReport {
        records: Vec::new(),
        rows: Vec::new(),
        skipped: Vec::new(),
    };
    let ordered = check_order_preservation(g, big, opts.order_tol)?.ordered;

    for &t in g.times() {
        let djdt = if g.len() >= 2 {
            Some(djdt_identity_check(g, big, cutoff, t)?)
        } else {
            None
        };
        report.records.push(JRecord {
            time: t,
            j_ordered: compute_j(g, big, cutoff, t, JVariant::Ordered)?,
            j_positive: compute_j(g, big, cutoff, t, JVariant::PositivePart)?,
            djdt: djdt.map_or(f64::NAN, |d| d.fd_derivative),
            phi_integral: djdt.map_or(f64::NAN, |d| d.phi_integral),
            boundary_inner: djdt.map_or(f64::NAN, |d| d.boundary_inner),
            boundary_outer: djdt.map_or(f64::NAN, |d| d.boundary_outer),
            q: q.q,
            q_bound: q.analytic_bound,
        });
    }

    for rec in lower_barrier_check(g) {
        let barrier = 2.0 * rec.time * hyperbolic_factor(rec.worst_s)?;
        let cert = Certificate::new(barrier, barrier + rec.margin);
        report
            .rows
            .push(InequalityRow::new(rec.time, "lower_barrier", cert, String::new()));
    }

    if cutoff.s0() <= LN_2 {
        for &t in g.times().iter().filter(|&&t| t > 0.0) {
            let p = pointwise_u_inverse_bound(g, t, cutoff.s0(), opts)?;
            match p.certificate {
                Some(c) => report.rows.push(InequalityRow::new(
                    t,
                    "pointwise_u_inverse",
                    c,
                    format!("C={:.12e}", pointwise_constant()),
                )),
                None => report
                    .skipped
                    .push(format!("pointwise_u_inverse at t = {t}: lower barrier fails by {:e}", -p.barrier_margin)),
            }
        }
    }

    if ordered {
        match main_odi_check(g, big, cutoff, opts) {
            Ok(rows) => report.rows.extend(rows),
            Err(Error::Precondition(msg)) => report.skipped.push(format!("main_odi: {msg}")),
            Err(e) => return Err(e),
        }
        let area = interior_area_verify(g, big, cutoff, opts)?;
        report.rows.extend(area.rows);
        report.rows.extend(area.envelope);
        for &t in g.times() {
            let c = scalar_log_inequality_check(g, big, cutoff.gamma(), t, opts)?;
            report
                .rows
                .push(InequalityRow::new(t, "scalar_log", c, format!("gamma={}", cutoff.gamma())));
            let h = holder_step_check(g, big, cutoff, t)?;
            report
                .rows
                .push(InequalityRow::new(t, "holder_step", h, format!("gamma={}", cutoff.gamma())));
        }
    } else {
        report
            .skipped
            .push("main_odi, interior_area, scalar_log, holder_step: pair is not ordered".into());
    }
    report.rows.extend(volume_excess_verify(g, big, cutoff)?);
    Ok(report)
}

/// Area of the model lower barrier `2tH` on `[s, ∞)`, i.e. `4πt (coth s − 1)`.
pub fn big_bang_area(s: f64, t: f64) -> Result<f64> {
    if !(s > 0.0) {
        return domain(format!("need s > 0, got {s}"));
    }
    Ok(4.0 * PI * t * (1.0 / s.tanh() - 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{LogPolarGrid, ModelSolution};
    use approx::assert_relative_eq;

    fn grid() -> LogPolarGrid {
        LogPolarGrid::graded(0.02, 8.0, 1200, 1.004).unwrap()
    }

    fn pair(times: &[f64]) -> (Trajectory, Trajectory) {
        let g = grid();
        (
            Trajectory::from_model(ModelSolution::BigBang, &g, times).unwrap(),
            Trajectory::from_model(ModelSolution::Cusp, &g, times).unwrap(),
        )
    }

    #[test]
    fn constants() {
        assert_relative_eq!(pointwise_constant(), 0.585_385_025_907_827_2, max_relative = 1e-15);
        let c = TrackedConstants::new(0.25).unwrap();
        let expected = 5.0 * TAU.powf(0.8) * pointwise_constant().powf(0.2);
        assert_relative_eq!(c.odi, expected, max_relative = 1e-14);
        assert_relative_eq!(c.area, c.odi * c.q.total.powf(0.8), max_relative = 1e-14);
        assert!(TrackedConstants::new(0.5).is_err());
        let table = constants_table(&[0.1, 0.25], &[0.6, 0.9]).unwrap();
        assert_eq!(table.len(), 4);
        assert!(constants_table(&[0.1], &[0.4]).is_err());
    }

    #[test]
    fn identical_flows_give_zero() {
        let (bb, _) = pair(&[0.5, 1.0]);
        let spec = CutoffSpec::from_s(0.5, 0.1, 0.25).unwrap();
        for v in [JVariant::Ordered, JVariant::PositivePart] {
            assert_eq!(compute_j(&bb, &bb, &spec, 1.0, v).unwrap(), 0.0);
        }
        let d = djdt_identity_check(&bb, &bb, &spec, 1.0).unwrap();
        assert_eq!(d.fd_derivative, 0.0);
        assert_eq!(d.rhs, 0.0);
        let odi = main_odi_check(&bb, &bb, &spec, &EstimateOptions::default()).unwrap();
        assert!(odi.iter().all(|r| r.lhs == 0.0 && r.margin > 0.0));
        assert!(volume_excess_verify(&bb, &bb, &spec).unwrap().iter().all(|r| r.lhs == 0.0));
    }

    #[test]
    fn j_is_linear_for_the_closed_form_pair() {
        let (bb, cusp) = pair(&[0.5, 1.0, 2.0]);
        let spec = CutoffSpec::from_s(0.5, 0.1, 0.25).unwrap();
        let j1 = compute_j(&bb, &cusp, &spec, 1.0, JVariant::Ordered).unwrap();
        for t in [0.5, 2.0] {
            let j = compute_j(&bb, &cusp, &spec, t, JVariant::Ordered).unwrap();
            assert_relative_eq!(j, t * j1, max_relative = 1e-12);
            let p = compute_j(&bb, &cusp, &spec, t, JVariant::PositivePart).unwrap();
            assert_eq!(j, p);
        }
        assert!(matches!(
            compute_j(&bb, &cusp, &spec, 0.7, JVariant::Ordered),
            Err(Error::NotSampled(_))
        ));
    }

    #[test]
    fn sampled_derivative_is_exact_for_quadratics() {
        let x = [0.0, 0.1, 0.3, 0.35];
        let f: Vec<f64> = x.iter().map(|t| 1.0 + 2.0 * t - 3.0 * t * t).collect();
        for k in 0..4 {
            assert!((sampled_derivative(&x, &f, k) - (2.0 - 6.0 * x[k])).abs() < 1e-12);
        }
    }

    #[test]
    fn barrier_of_models() {
        let (bb, cusp) = pair(&[0.5, 1.0]);
        assert!(lower_barrier_check(&bb).iter().all(|r| r.margin.abs() < 1e-12));
        assert!(lower_barrier_check(&cusp).iter().all(|r| r.margin >= 0.0));
        let violator = Trajectory::from_states(
            [0.5, 1.0]
                .iter()
                .map(|&t| {
                    let st = ModelSolution::Poincare.state(&grid(), 0.0).unwrap();
                    crate::geometry::ConformalState::new(
                        grid(),
                        st.values().iter().map(|h| t * h).collect(),
                        t,
                    )
                    .unwrap()
                })
                .collect(),
        )
        .unwrap();
        assert!(lower_barrier_check(&violator).iter().all(|r| r.margin < 0.0));
        let p = pointwise_u_inverse_bound(&violator, 1.0, 0.5, &EstimateOptions::default()).unwrap();
        assert!(!p.precondition_holds && p.certificate.is_none());
    }

    #[test]
    fn pointwise_bound_for_big_bang() {
        let (bb, _) = pair(&[0.5, 1.0]);
        let p = pointwise_u_inverse_bound(&bb, 1.0, LN_2, &EstimateOptions::default()).unwrap();
        let c = p.certificate.unwrap();
        assert!(c.holds_within(1e-14));
        assert!(pointwise_u_inverse_bound(&bb, 1.0, 0.8, &EstimateOptions::default()).is_err());
    }

    #[test]
    fn unordered_pairs_are_refused() {
        let (bb, cusp) = pair(&[0.5, 1.0]);
        let spec = CutoffSpec::from_s(0.5, 0.1, 0.25).unwrap();
        let opts = EstimateOptions::default();
        assert!(matches!(main_odi_check(&cusp, &bb, &spec, &opts), Err(Error::Precondition(_))));
        assert!(matches!(
            interior_area_verify(&cusp, &bb, &spec, &opts),
            Err(Error::Precondition(_))
        ));
        assert!(volume_excess_verify(&cusp, &bb, &spec).is_ok());
    }

    #[test]
    fn curvature_gate() {
        let g = LogPolarGrid::uniform(0.5, 6.0, 2001).unwrap();
        let opts = EstimateOptions::default();
        let late = Trajectory::from_model(ModelSolution::BigBang, &g, &[0.5, 0.75, 1.0]).unwrap();
        let r = curvature_monotonicity_check(&late, &opts).unwrap();
        assert!(r.precondition_holds, "{}", r.min_curvature);
        assert!(r.min_margin().unwrap() >= 0.0);
        let early = Trajectory::from_model(ModelSolution::BigBang, &g, &[0.1, 0.2]).unwrap();
        let r = curvature_monotonicity_check(&early, &opts).unwrap();
        assert!(!r.precondition_holds && r.min_margin().is_none());
    }
}
