//! The flux function `f`, the cut-off `φ(s) = f(2s/s₀)` built from it, and the
//! singular integral `Q = ∫_S^{s₀/2} s^{2γ} |φ''|^{1+γ} φ^{-γ} ds` together
//! with an explicit upper bound whose constant is tracked term by term.

use std::f64::consts::E;

use serde::Serialize;

use crate::error::{domain, Error, Result};
use crate::quadrature::{integrate, integrate_with_breaks, QuadOptions};

const E2: f64 = E * E;

/// `h(ε) / ε²` where `h(ε) = (1+ε) log(1+ε) − ε`, accurate near `ε = 0`.
pub(crate) fn h_over_eps2(eps: f64) -> f64 {
    if eps.abs() < 0.05 {
        // Σ_{k≥2} (−1)^k ε^{k−2} / (k(k−1))
        let mut sum = 0.0;
        let mut pow = 1.0;
        for k in 2..26 {
            let term = pow / (k * (k - 1)) as f64;
            sum += if k % 2 == 0 { term } else { -term };
            pow *= eps;
        }
        sum
    } else {
        ((1.0 + eps) * eps.ln_1p() - eps) / (eps * eps)
    }
}

/// `σ (log σ − log a) − (σ − a)`, the numerator of the flux function,
/// evaluated without cancellation near `σ = a`.
pub fn bracket(a: f64, sigma: f64) -> f64 {
    let eps = (sigma - a) / a;
    a * eps * eps * h_over_eps2(eps)
}

/// How `f` is continued on `(1, 2]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Filler {
    /// Cubic Hermite interpolant; concave exactly when `f(1) ∈ [1/3, 2/3]`.
    Cubic { c2: f64, c3: f64 },
    /// `f''` constant negative on `(1, 1+len)`, then `f ≡ 1`. Needs `f(1) ≥ 1/2`.
    QuadraticThenConstant { len: f64 },
    /// Slope 1 on `(1, 1+linear)`, then `f''` constant negative up to `σ = 2`.
    /// Used when `f(1) < 1/2`.
    LinearThenQuadratic { linear: f64, len: f64 },
}

/// The C¹ flux function for a parameter `a ∈ (0, 1)`:
/// zero on `(−∞, a]`, the closed form on `[a, 1]`, a concave filler on
/// `(1, 2]` and identically one on `[2, ∞)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FluxFunction {
    a: f64,
    neg_log_a: f64,
    f_one: f64,
    filler: Filler,
}

impl FluxFunction {
    pub fn new(a: f64) -> Result<Self> {
        if !(a > 0.0 && a < 1.0) {
            return domain(format!("flux parameter a must lie in (0, 1), got {a}"));
        }
        let neg_log_a = -a.ln();
        let f_one = 1.0 - (1.0 - a) / neg_log_a;
        let filler = if (1.0 / 3.0..=2.0 / 3.0).contains(&f_one) {
            Filler::Cubic {
                c2: 1.0 - 3.0 * f_one,
                c3: 2.0 * f_one - 1.0,
            }
        } else if f_one >= 0.5 {
            Filler::QuadraticThenConstant {
                len: 2.0 * (1.0 - f_one),
            }
        } else {
            Filler::LinearThenQuadratic {
                linear: 1.0 - 2.0 * f_one,
                len: 2.0 * f_one,
            }
        };
        Ok(Self {
            a,
            neg_log_a,
            f_one,
            filler,
        })
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    /// `f(1) = 1 − (1 − a)/(−log a)`.
    pub fn value_at_one(&self) -> f64 {
        self.f_one
    }

    pub fn filler(&self) -> Filler {
        self.filler
    }

    pub fn value(&self, sigma: f64) -> f64 {
        if sigma <= self.a {
            0.0
        } else if sigma <= 1.0 {
            bracket(self.a, sigma) / self.neg_log_a
        } else if sigma >= 2.0 {
            1.0
        } else {
            let y = sigma - 1.0;
            match self.filler {
                Filler::Cubic { c2, c3 } => self.f_one + y + c2 * y * y + c3 * y * y * y,
                Filler::QuadraticThenConstant { len } => {
                    if y >= len {
                        1.0
                    } else {
                        self.f_one + y - y * y / (2.0 * len)
                    }
                }
                Filler::LinearThenQuadratic { linear, len } => {
                    if y <= linear {
                        self.f_one + y
                    } else {
                        let z = y - linear;
                        self.f_one + linear + z - z * z / (2.0 * len)
                    }
                }
            }
        }
    }

    pub fn deriv(&self, sigma: f64) -> f64 {
        if sigma <= self.a || sigma >= 2.0 {
            0.0
        } else if sigma <= 1.0 {
            (sigma.ln() - self.a.ln()) / self.neg_log_a
        } else {
            let y = sigma - 1.0;
            match self.filler {
                Filler::Cubic { c2, c3 } => 1.0 + 2.0 * c2 * y + 3.0 * c3 * y * y,
                Filler::QuadraticThenConstant { len } => (1.0 - y / len).max(0.0),
                Filler::LinearThenQuadratic { linear, len } => {
                    if y <= linear {
                        1.0
                    } else {
                        1.0 - (y - linear) / len
                    }
                }
            }
        }
    }

    /// Second derivative. At the points where it jumps (`σ = a`, `σ = 1` and
    /// the filler's internal knots) this returns the right-hand limit; see
    /// [`FluxFunction::second_deriv_limits`] for both sides.
    pub fn second_deriv(&self, sigma: f64) -> f64 {
        self.second_deriv_limits(sigma).1
    }

    /// `(left, right)` limits of `f''` at `sigma`.
    pub fn second_deriv_limits(&self, sigma: f64) -> (f64, f64) {
        let scale = 1e-12 * sigma.abs().max(1.0);
        let knot = match self.filler {
            Filler::Cubic { .. } => 2.0,
            Filler::QuadraticThenConstant { len } => 1.0 + len,
            Filler::LinearThenQuadratic { linear, .. } => 1.0 + linear,
        };
        if [self.a, 1.0, knot, 2.0].iter().any(|k| (sigma - k).abs() <= scale) {
            (self.second_open(sigma - scale), self.second_open(sigma + scale))
        } else {
            let v = self.second_open(sigma);
            (v, v)
        }
    }

    fn second_open(&self, sigma: f64) -> f64 {
        if sigma <= self.a || sigma >= 2.0 {
            0.0
        } else if sigma <= 1.0 {
            1.0 / (sigma * self.neg_log_a)
        } else {
            let y = sigma - 1.0;
            match self.filler {
                Filler::Cubic { c2, c3 } => 2.0 * c2 + 6.0 * c3 * y,
                Filler::QuadraticThenConstant { len } => {
                    if y < len {
                        -1.0 / len
                    } else {
                        0.0
                    }
                }
                Filler::LinearThenQuadratic { linear, len } => {
                    if y <= linear {
                        0.0
                    } else {
                        -1.0 / len
                    }
                }
            }
        }
    }
}

pub fn flux_value(a: f64, sigma: f64) -> Result<f64> {
    Ok(FluxFunction::new(a)?.value(sigma))
}

pub fn flux_deriv(a: f64, sigma: f64) -> Result<f64> {
    Ok(FluxFunction::new(a)?.deriv(sigma))
}

pub fn flux_second_deriv(a: f64, sigma: f64) -> Result<(f64, f64)> {
    Ok(FluxFunction::new(a)?.second_deriv_limits(sigma))
}

/// Cut-off parameters `(r₀, R, γ)` with derived `s₀ = −log r₀`, `S = −log R`
/// and `a = 2S/s₀`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CutoffSpec {
    r0: f64,
    r_outer: f64,
    gamma: f64,
    s0: f64,
    s_inner: f64,
    flux: FluxFunction,
}

impl CutoffSpec {
    pub fn new(r0: f64, r_outer: f64, gamma: f64) -> Result<Self> {
        let problems = Self::violations(r0, r_outer, gamma);
        if !problems.is_empty() {
            return Err(Error::Domain(problems.join("; ")));
        }
        let s0 = -r0.ln();
        let s_inner = -r_outer.ln();
        Ok(Self {
            r0,
            r_outer,
            gamma,
            s0,
            s_inner,
            flux: FluxFunction::new(2.0 * s_inner / s0)?,
        })
    }

    /// Builds a spec from `s₀` and `S` directly.
    pub fn from_s(s0: f64, s_inner: f64, gamma: f64) -> Result<Self> {
        Self::new((-s0).exp(), (-s_inner).exp(), gamma)
    }

    /// Every violated parameter constraint, as human-readable messages.
    pub fn violations(r0: f64, r_outer: f64, gamma: f64) -> Vec<String> {
        let mut out = Vec::new();
        if !(r0 > 0.5 && r0 < 1.0) {
            out.push(format!("r0 = {r0} violates r0 ∈ (1/2, 1)"));
        }
        let lower = if r0 > 0.0 { r0.cbrt() } else { 0.0 };
        if !(r_outer > lower && r_outer < 1.0) {
            out.push(format!(
                "R = {r_outer} violates R ∈ (r0^(1/3), 1) = ({lower}, 1), i.e. R > r0^(1/3) is required"
            ));
        }
        if !(gamma > 0.0 && gamma < 0.5) {
            out.push(format!("gamma = {gamma} violates gamma ∈ (0, 1/2)"));
        }
        out
    }

    pub fn r0(&self) -> f64 {
        self.r0
    }
    pub fn r_outer(&self) -> f64 {
        self.r_outer
    }
    pub fn gamma(&self) -> f64 {
        self.gamma
    }
    /// `s₀ = −log r₀`.
    pub fn s0(&self) -> f64 {
        self.s0
    }
    /// `S = −log R`.
    pub fn s_inner(&self) -> f64 {
        self.s_inner
    }
    pub fn a(&self) -> f64 {
        self.flux.a()
    }
    pub fn flux(&self) -> &FluxFunction {
        &self.flux
    }

    /// Same `(r₀, R)`, different exponent.
    pub fn with_gamma(&self, gamma: f64) -> Result<Self> {
        Self::new(self.r0, self.r_outer, gamma)
    }

    fn sigma(&self, s: f64) -> f64 {
        2.0 * s / self.s0
    }

    pub fn phi(&self, s: f64) -> f64 {
        self.flux.value(self.sigma(s))
    }

    pub fn phi_prime(&self, s: f64) -> f64 {
        2.0 / self.s0 * self.flux.deriv(self.sigma(s))
    }

    pub fn phi_second(&self, s: f64) -> f64 {
        let k = 2.0 / self.s0;
        k * k * self.flux.second_deriv(self.sigma(s))
    }

    /// Points where `φ''` jumps.
    pub fn kinks(&self) -> Vec<f64> {
        let half = 0.5 * self.s0;
        let mut out = vec![self.s_inner, half];
        match self.flux.filler {
            Filler::Cubic { .. } => {}
            Filler::QuadraticThenConstant { len } => out.push(half * (1.0 + len)),
            Filler::LinearThenQuadratic { linear, .. } => out.push(half * (1.0 + linear)),
        }
        out.push(self.s0);
        out
    }
}

pub fn cutoff_value(spec: &CutoffSpec, s: f64) -> Result<(f64, f64, f64)> {
    if !(s > 0.0) {
        return domain(format!("cut-off needs s > 0, got {s}"));
    }
    Ok((spec.phi(s), spec.phi_prime(s), spec.phi_second(s)))
}

/// The explicit constant `C(γ)` in `Q ≤ C(γ) / (s₀ (log s₀ − log S)^γ)`,
/// broken into the pieces it is assembled from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QConstant {
    pub gamma: f64,
    /// Far range `σ ∈ (e²a, 1)`: `2^{1+γ}/(1−γ)`.
    pub far: f64,
    /// Closed-form upper bound of `∫₁^{e²} β^γ (β−1)^{−2γ} dβ`.
    pub beta_integral_bound: f64,
    /// Near range `σ ∈ (a, e²a)`: `2^{1+γ}` times the β-integral bound.
    pub near: f64,
    /// `near · (log 3/2)^{γ−1} + far`, absorbing `(−log a)^{-1}` into `(−log a)^{-γ}`.
    pub absorbed: f64,
    /// `(1 − log 2 / log 3)^{−γ}`, converting `−log a` to `log s₀ − log S`.
    pub conversion: f64,
    pub total: f64,
}

impl QConstant {
    pub fn new(gamma: f64) -> Result<Self> {
        if !(gamma > 0.0 && gamma < 0.5) {
            return domain(format!("gamma = {gamma} violates gamma ∈ (0, 1/2)"));
        }
        let two = 2f64.powf(1.0 + gamma);
        let far = two / (1.0 - gamma);
        let beta_integral_bound =
            (2.0 * gamma).exp() * (E2 - 1.0).powf(1.0 - 2.0 * gamma) / (1.0 - 2.0 * gamma);
        let near = two * beta_integral_bound;
        let absorbed = near * 1.5f64.ln().powf(gamma - 1.0) + far;
        let conversion = (1.0 - 2f64.ln() / 3f64.ln()).powf(-gamma);
        Ok(Self {
            gamma,
            far,
            beta_integral_bound,
            near,
            absorbed,
            conversion,
            total: absorbed * conversion,
        })
    }
}

/// `∫₁^{e²} β^γ (β−1)^{−2γ} dβ`, computed by quadrature (for checking the
/// closed-form bound used in [`QConstant`]).
pub fn beta_integral(gamma: f64) -> Result<f64> {
    let p = 1.0 / (1.0 - 2.0 * gamma);
    let x_max = (E2 - 1.0).powf(1.0 / p);
    // β = 1 + x^p removes the (β−1)^{−2γ} singularity.
    let r = integrate(
        |x| {
            let beta = 1.0 + x.powf(p);
            p * beta.powf(gamma)
        },
        0.0,
        x_max,
        QuadOptions::default(),
    )?;
    Ok(r.value)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QBound {
    pub value: f64,
    pub constant: QConstant,
}

pub fn q_analytic_bound(spec: &CutoffSpec) -> QBound {
    let constant = QConstant::new(spec.gamma).expect("spec gamma already validated");
    let gap = spec.s0.ln() - spec.s_inner.ln();
    QBound {
        value: constant.total / (spec.s0 * gap.powf(spec.gamma)),
        constant,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QReport {
    pub q: f64,
    /// Far part `σ ∈ (e²a, 1)`; zero when `e²a ≥ 1`.
    pub q1: f64,
    /// Near part `σ ∈ (a, min(e²a, 1))`.
    pub q2: f64,
    /// Whether the range was split at `σ = e²a`.
    pub split: bool,
    pub analytic_bound: f64,
    pub tracked_constant: f64,
    /// Error estimate of `q` (the unsplit integral).
    pub error: f64,
    /// Combined error estimate of `q1 + q2`.
    pub split_error: f64,
}

/// In `β = σ/a` the `Q` integrand is `β^{γ−1} h(β−1)^{−γ}` times
/// `2/(s₀ (−log a))`. Near `β = 1`, `β = 1 + x^p` with `p = 1/(1−2γ)`
/// cancels the `(β−1)^{−2γ}` singularity exactly.
fn near_integral(gamma: f64, beta_hi: f64, opts: QuadOptions) -> Result<(f64, f64)> {
    let p = 1.0 / (1.0 - 2.0 * gamma);
    let x_max = (beta_hi - 1.0).powf(1.0 / p);
    let mut breaks = vec![0.0];
    // keep the first panel near the singular end small
    for frac in [1e-3, 1e-2, 0.1] {
        breaks.push(frac * x_max);
    }
    breaks.push(x_max);
    let r = integrate_with_breaks(
        |x| {
            let eps = x.powf(p);
            let beta = 1.0 + eps;
            p * beta.powf(gamma - 1.0) * h_over_eps2(eps).powf(-gamma)
        },
        &breaks,
        opts,
    )?;
    Ok((r.value, r.error))
}

/// Far range in `α = log β ∈ [α_lo, α_hi]`, where the integrand is smooth.
fn far_integral(gamma: f64, alpha_lo: f64, alpha_hi: f64, opts: QuadOptions) -> Result<(f64, f64)> {
    let r = integrate(
        |alpha: f64| {
            let beta = alpha.exp();
            let h = beta * alpha - beta + 1.0;
            beta.powf(gamma) * h.powf(-gamma)
        },
        alpha_lo,
        alpha_hi,
        opts,
    )?;
    Ok((r.value, r.error))
}

pub fn compute_q(spec: &CutoffSpec) -> Result<QReport> {
    compute_q_with(spec, QuadOptions::default())
}

pub fn compute_q_with(spec: &CutoffSpec, opts: QuadOptions) -> Result<QReport> {
    let gamma = spec.gamma;
    let a = spec.a();
    let neg_log_a = -a.ln();
    let prefactor = 2.0 / (spec.s0 * neg_log_a);

    let (whole, whole_err) = near_integral(gamma, 1.0 / a, opts)?;
    let split = E2 * a < 1.0;
    let (q1, q2, split_error) = if split {
        let (near, near_err) = near_integral(gamma, E2, opts)?;
        let (far, far_err) = far_integral(gamma, 2.0, neg_log_a, opts)?;
        (prefactor * far, prefactor * near, prefactor * (near_err + far_err))
    } else {
        (0.0, prefactor * whole, prefactor * whole_err)
    };
    let bound = q_analytic_bound(spec);
    Ok(QReport {
        q: prefactor * whole,
        q1,
        q2,
        split,
        analytic_bound: bound.value,
        tracked_constant: bound.constant.total,
        error: prefactor * whole_err,
        split_error,
    })
}

/// Both sides of a scalar inequality `lhs ≤ rhs`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Certificate {
    pub lhs: f64,
    pub rhs: f64,
    pub margin: f64,
}

impl Certificate {
    pub fn new(lhs: f64, rhs: f64) -> Self {
        Self {
            lhs,
            rhs,
            margin: rhs - lhs,
        }
    }

    pub fn holds(&self) -> bool {
        self.margin >= 0.0
    }

    pub fn holds_within(&self, tol: f64) -> bool {
        self.margin >= -tol
    }
}

/// `log(1+x) ≤ x^λ / λ` for `λ ∈ (0,1)`, `x ≥ 0`.
pub fn log_power_inequality(lambda: f64, x: f64) -> Result<Certificate> {
    if !(lambda > 0.0 && lambda < 1.0) {
        return domain(format!("λ must lie in (0, 1), got {lambda}"));
    }
    if !(x >= 0.0 && x.is_finite()) {
        return domain(format!("x must be ≥ 0, got {x}"));
    }
    Ok(Certificate::new(x.ln_1p(), x.powf(lambda) / lambda))
}

/// `log(1+x) ≤ x − x²/2` for `x ∈ (−1, 0]`.
pub fn log_quadratic_inequality(x: f64) -> Result<Certificate> {
    if !(x > -1.0 && x <= 0.0) {
        return domain(format!("x must lie in (−1, 0], got {x}"));
    }
    Ok(Certificate::new(x.ln_1p(), x - 0.5 * x * x))
}

/// `sinh s ≤ 3s / (4 log 2)` for `s ∈ (0, log 2]` (chord of a convex function).
pub fn sinh_chord_inequality(s: f64) -> Result<Certificate> {
    let ln2 = 2f64.ln();
    if !(s > 0.0 && s <= ln2 * (1.0 + 1e-15)) {
        return domain(format!("s must lie in (0, log 2], got {s}"));
    }
    Ok(Certificate::new(s.sinh(), 3.0 * s / (4.0 * ln2)))
}
