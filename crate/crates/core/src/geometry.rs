//! Rotationally symmetric conformal metrics `g = U (ds² + dθ²)` on the punctured
//! disc, written in logarithmic polar coordinates `s = -log r`.
//!
//! `s → 0⁺` is the boundary circle of the unit disc and `s → ∞` is the centre.
//! All area functionals integrate over `θ ∈ S¹` analytically, which contributes
//! a factor `2π`.

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::flux::CutoffSpec;

/// Minimum number of grid nodes inside the support of a cut-off before a
/// weighted area is considered resolved.
pub const MIN_SUPPORT_NODES: usize = 16;

pub fn s_from_r(r: f64) -> Result<f64> {
    if !(r > 0.0 && r < 1.0) {
        return domain(format!("radius must lie in (0, 1), got {r}"));
    }
    Ok(-r.ln())
}

pub fn r_from_s(s: f64) -> Result<f64> {
    if !(s > 0.0 && s.is_finite()) {
        return domain(format!("s-coordinate must be positive and finite, got {s}"));
    }
    Ok((-s).exp())
}

/// Conformal factor `1/sinh²s` of the complete hyperbolic metric on the disc.
pub fn hyperbolic_factor(s: f64) -> Result<f64> {
    if !(s > 0.0) {
        return domain(format!("hyperbolic factor needs s > 0, got {s}"));
    }
    let sh = s.sinh();
    Ok(1.0 / (sh * sh))
}

/// Closed-form conformal factors used as exact solutions and barriers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ModelSolution {
    /// `2t/sinh²s`, the expanding Poincaré metric starting from zero area.
    BigBang,
    /// `2t/s²`, an expanding hyperbolic cusp.
    Cusp,
    /// `e^{-2s}`, the flat unit disc (static).
    FlatDisc,
    /// `1/sinh²s`, the Poincaré metric itself (static, not a flow).
    Poincare,
}

impl ModelSolution {
    pub const ALL: [ModelSolution; 4] = [
        ModelSolution::BigBang,
        ModelSolution::Cusp,
        ModelSolution::FlatDisc,
        ModelSolution::Poincare,
    ];

    pub fn is_time_dependent(self) -> bool {
        matches!(self, ModelSolution::BigBang | ModelSolution::Cusp)
    }

    /// Whether the factor solves `∂ₜU = ∂²ₛ log U` exactly.
    pub fn solves_flow(self) -> bool {
        !matches!(self, ModelSolution::Poincare)
    }

    pub fn name(self) -> &'static str {
        match self {
            ModelSolution::BigBang => "big-bang",
            ModelSolution::Cusp => "cusp",
            ModelSolution::FlatDisc => "flat-disc",
            ModelSolution::Poincare => "poincare",
        }
    }

    /// Evaluates the factor at `(s, t)`. Time-independent kinds ignore `t`
    /// apart from rejecting negative values.
    pub fn factor(self, s: f64, t: f64) -> Result<f64> {
        if !(t >= 0.0 && t.is_finite()) {
            return domain(format!("time must be nonnegative and finite, got {t}"));
        }
        match self {
            ModelSolution::BigBang => Ok(2.0 * t * hyperbolic_factor(s)?),
            ModelSolution::Cusp => {
                if !(s > 0.0) {
                    return domain(format!("cusp factor needs s > 0, got {s}"));
                }
                Ok(2.0 * t / (s * s))
            }
            ModelSolution::FlatDisc => {
                if !(s >= 0.0) {
                    return domain(format!("flat-disc factor needs s ≥ 0, got {s}"));
                }
                Ok((-2.0 * s).exp())
            }
            ModelSolution::Poincare => hyperbolic_factor(s),
        }
    }

    /// `∂ₛ log U`, used for exact boundary-flux terms.
    pub fn log_slope(self, s: f64) -> f64 {
        match self {
            ModelSolution::BigBang | ModelSolution::Poincare => -2.0 / s.tanh(),
            ModelSolution::Cusp => -2.0 / s,
            ModelSolution::FlatDisc => -2.0,
        }
    }

    /// Samples the model on a grid. Fails if any sampled value is not positive.
    pub fn state(self, grid: &LogPolarGrid, t: f64) -> Result<ConformalState> {
        let values = grid
            .nodes()
            .iter()
            .map(|&s| self.factor(s, t))
            .collect::<Result<Vec<_>>>()?;
        ConformalState::new(grid.clone(), values, t)
    }
}

pub fn model_factor(model: ModelSolution, s: f64, t: f64) -> Result<f64> {
    model.factor(s, t)
}

/// Strictly increasing positive nodes `s_0 < … < s_{N-1}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LogPolarGrid {
    nodes: Vec<f64>,
    /// Geometric spacing ratio toward `s_min`, when the grid was built graded.
    /// Used only by [`LogPolarGrid::refined`]; grids compare by their nodes.
    grading: Option<f64>,
}

impl PartialEq for LogPolarGrid {
    fn eq(&self, other: &Self) -> bool {
        self.nodes == other.nodes
    }
}

impl LogPolarGrid {
    pub fn new(nodes: Vec<f64>) -> Result<Self> {
        Self::validated(nodes, None)
    }

    fn validated(nodes: Vec<f64>, grading: Option<f64>) -> Result<Self> {
        if nodes.len() < 3 {
            return Err(Error::Size {
                needed: 3,
                got: nodes.len(),
            });
        }
        if nodes.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
            return domain("grid nodes must be finite and positive");
        }
        if nodes.windows(2).any(|w| !(w[1] > w[0])) {
            return domain("grid nodes must be strictly increasing");
        }
        Ok(Self { nodes, grading })
    }

    pub fn uniform(s_min: f64, s_max: f64, n: usize) -> Result<Self> {
        Self::graded(s_min, s_max, n, 1.0)
    }

    /// Nodes whose spacing grows geometrically by `ratio` away from `s_min`.
    pub fn graded(s_min: f64, s_max: f64, n: usize, ratio: f64) -> Result<Self> {
        if n < 3 {
            return Err(Error::Size { needed: 3, got: n });
        }
        if !(s_min > 0.0 && s_max > s_min && s_max.is_finite()) {
            return domain(format!("need 0 < s_min < s_max < ∞, got [{s_min}, {s_max}]"));
        }
        if !(ratio >= 1.0 && ratio.is_finite()) {
            return domain(format!("grading ratio must be ≥ 1, got {ratio}"));
        }
        let cells = n - 1;
        let mut widths: Vec<f64> = (0..cells).map(|i| ratio.powi(i as i32)).collect();
        let total: f64 = widths.iter().sum();
        let scale = (s_max - s_min) / total;
        widths.iter_mut().for_each(|w| *w *= scale);
        let mut nodes = Vec::with_capacity(n);
        let mut s = s_min;
        nodes.push(s);
        for w in &widths[..cells - 1] {
            s += w;
            nodes.push(s);
        }
        nodes.push(s_max);
        let grading = (ratio != 1.0).then_some(ratio);
        Self::validated(nodes, grading)
    }

    /// Nested refinement: every cell is split in two. For a geometrically
    /// graded grid the split point keeps the grid geometric with ratio `√ratio`,
    /// so the underlying smooth mapping is preserved.
    pub fn refined(&self) -> Self {
        let q = self.grading.unwrap_or(1.0).sqrt();
        let mut nodes = Vec::with_capacity(2 * self.nodes.len() - 1);
        for w in self.nodes.windows(2) {
            nodes.push(w[0]);
            nodes.push(w[0] + (w[1] - w[0]) / (1.0 + q));
        }
        nodes.push(self.s_max());
        Self {
            nodes,
            grading: self.grading.map(f64::sqrt),
        }
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn s_min(&self) -> f64 {
        self.nodes[0]
    }

    pub fn s_max(&self) -> f64 {
        self.nodes[self.nodes.len() - 1]
    }

    pub fn grading(&self) -> Option<f64> {
        self.grading
    }

    /// Cell widths `h_i = s_{i+1} - s_i`.
    pub fn spacing(&self) -> Vec<f64> {
        self.nodes.windows(2).map(|w| w[1] - w[0]).collect()
    }

    pub fn max_spacing(&self) -> f64 {
        self.spacing().into_iter().fold(0.0, f64::max)
    }

    pub fn contains(&self, s: f64) -> bool {
        s >= self.s_min() && s <= self.s_max()
    }

    pub fn count_in(&self, lo: f64, hi: f64) -> usize {
        self.nodes.iter().filter(|&&s| s >= lo && s <= hi).count()
    }

    /// Nonuniform three-point second difference at interior node `i`,
    /// returned as the stencil weights `(left, centre, right)`.
    pub(crate) fn second_difference_weights(&self, i: usize) -> (f64, f64, f64) {
        let hl = self.nodes[i] - self.nodes[i - 1];
        let hr = self.nodes[i + 1] - self.nodes[i];
        let left = 2.0 / (hl * (hl + hr));
        let right = 2.0 / (hr * (hl + hr));
        (left, -(left + right), right)
    }

    pub fn second_difference(&self, values: &[f64], i: usize) -> f64 {
        let (l, c, r) = self.second_difference_weights(i);
        l * values[i - 1] + c * values[i] + r * values[i + 1]
    }
}

/// Conformal factor `U > 0` sampled on a log-polar grid at flow time `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConformalState {
    grid: LogPolarGrid,
    values: Vec<f64>,
    time: f64,
}

impl ConformalState {
    pub fn new(grid: LogPolarGrid, values: Vec<f64>, time: f64) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Incompatible(format!(
                "{} values for a grid of {} nodes",
                values.len(),
                grid.len()
            )));
        }
        if !(time >= 0.0 && time.is_finite()) {
            return domain(format!("time must be nonnegative and finite, got {time}"));
        }
        if let Some(i) = values.iter().position(|u| !(u.is_finite() && *u > 0.0)) {
            return domain(format!(
                "conformal factor must be positive, got {} at s = {}",
                values[i],
                grid.nodes()[i]
            ));
        }
        Ok(Self { grid, values, time })
    }

    pub fn grid(&self) -> &LogPolarGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn log_values(&self) -> Vec<f64> {
        self.values.iter().map(|u| u.ln()).collect()
    }

    /// Piecewise-linear interpolation of `U` inside the grid.
    pub fn value_at(&self, s: f64) -> Result<f64> {
        if !self.grid.contains(s) {
            return domain(format!(
                "s = {s} outside grid [{}, {}]",
                self.grid.s_min(),
                self.grid.s_max()
            ));
        }
        Ok(interpolate(self.grid.nodes(), &self.values, s))
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }
}

pub(crate) fn interpolate(nodes: &[f64], values: &[f64], s: f64) -> f64 {
    let n = nodes.len();
    let i = nodes.partition_point(|&x| x <= s).saturating_sub(1).min(n - 2);
    let (s0, s1) = (nodes[i], nodes[i + 1]);
    let w = (s - s0) / (s1 - s0);
    values[i] * (1.0 - w) + values[i + 1] * w
}

/// Grid nodes restricted to `[lo, hi]` with interpolated endpoint samples.
pub(crate) fn segment(nodes: &[f64], values: &[f64], lo: f64, hi: f64) -> (Vec<f64>, Vec<f64>) {
    let mut s = vec![lo];
    let mut v = vec![interpolate(nodes, values, lo)];
    for (&x, &u) in nodes.iter().zip(values) {
        if x > lo && x < hi {
            s.push(x);
            v.push(u);
        }
    }
    if hi > lo {
        s.push(hi);
        v.push(interpolate(nodes, values, hi));
    }
    (s, v)
}

pub(crate) fn trapezoid(s: &[f64], f: &[f64]) -> f64 {
    s.windows(2)
        .zip(f.windows(2))
        .map(|(x, y)| 0.5 * (x[1] - x[0]) * (y[0] + y[1]))
        .sum()
}

/// `K = -(log U)'' / (2U)` at interior nodes (endpoints excluded).
pub fn gauss_curvature(state: &ConformalState) -> Result<Vec<f64>> {
    let n = state.grid.len();
    if n < 3 {
        return Err(Error::Size { needed: 3, got: n });
    }
    let w = state.log_values();
    Ok((1..n - 1)
        .map(|i| -state.grid.second_difference(&w, i) / (2.0 * state.values[i]))
        .collect())
}

fn check_interval(grid: &LogPolarGrid, lo: f64, hi: f64) -> Result<()> {
    if !(lo <= hi) || !grid.contains(lo) || !grid.contains(hi) {
        return domain(format!(
            "interval [{lo}, {hi}] not inside grid [{}, {}]",
            grid.s_min(),
            grid.s_max()
        ));
    }
    Ok(())
}

/// `2π ∫_{s_lo}^{s_hi} U ds` by the composite trapezoid rule on the grid.
pub fn annulus_area(state: &ConformalState, s_lo: f64, s_hi: f64) -> Result<f64> {
    check_interval(&state.grid, s_lo, s_hi)?;
    if s_lo == s_hi {
        return Ok(0.0);
    }
    let (s, v) = segment(state.grid.nodes(), &state.values, s_lo, s_hi);
    Ok(TAU * trapezoid(&s, &v))
}

/// Area beyond `s_max`, assuming the smooth-centre profile `U ∝ e^{-2s}`.
pub(crate) fn tail_area(u_at_s_max: f64) -> f64 {
    PI * u_at_s_max
}

/// Area of the Euclidean disc `D_{r₀}`, i.e. `s > -log r₀`.
pub fn disc_area(state: &ConformalState, r0: f64) -> Result<f64> {
    let s0 = s_from_r(r0)?;
    if s0 < state.grid.s_min() || s0 > state.grid.s_max() {
        return domain(format!(
            "r₀ = {r0} maps to s = {s0} outside grid [{}, {}]",
            state.grid.s_min(),
            state.grid.s_max()
        ));
    }
    let last = state.values[state.values.len() - 1];
    Ok(annulus_area(state, s0, state.grid.s_max())? + tail_area(last))
}

/// `2π ∫ U φ ds` over the support of the cut-off, plus the centre tail (where φ ≡ 1).
pub fn weighted_area(state: &ConformalState, cutoff: &CutoffSpec) -> Result<f64> {
    weighted_area_with(state, cutoff.s_inner(), |s| cutoff.phi(s))
}

/// [`weighted_area`] for an arbitrary weight supported in `[support_start, ∞)`
/// and equal to one at `s_max`.
pub fn weighted_area_with(
    state: &ConformalState,
    support_start: f64,
    phi: impl Fn(f64) -> f64,
) -> Result<f64> {
    let grid = state.grid();
    if support_start < grid.s_min() || support_start >= grid.s_max() {
        return domain(format!(
            "weight support starts at {support_start}, outside grid [{}, {}]",
            grid.s_min(),
            grid.s_max()
        ));
    }
    let resolved = grid.count_in(support_start, grid.s_max());
    if resolved < MIN_SUPPORT_NODES {
        return Err(Error::Resolution(format!(
            "weight support [{support_start}, {}] holds {resolved} nodes, need {MIN_SUPPORT_NODES}",
            grid.s_max()
        )));
    }
    let (s, v) = segment(grid.nodes(), state.values(), support_start, grid.s_max());
    let samples: Vec<f64> = s.iter().zip(&v).map(|(&x, &u)| u * phi(x)).collect();
    Ok(TAU * trapezoid(&s, &samples) + tail_area(v[v.len() - 1] * phi(grid.s_max())))
}
