//! Effective signal `M(t,x)`, the adapted signal `N(t,x,v)` and path-wise derivatives.
//!
//! `N` solves `D_t N = (M − N)/ε` along straight runs with `N(0,x,v) = M(0,x)`:
//!
//! ```text
//! N(t,x,v) = M(0, x − tv) e^{−t/ε} + (1/ε) ∫₀ᵗ M(s, x + (s−t)v) e^{(s−t)/ε} ds
//! ```
//!
//! Positions and velocities are slices of length `dim` (1 or 2).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::adaptive_gauss_legendre;

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Closed-form signal families.
#[derive(Debug, Clone, PartialEq)]
pub enum SignalFamily {
    Constant {
        value: f64,
    },
    LinearInX {
        gradient: Vec<f64>,
    },
    /// Gaussian bump `A exp(−|x − x₀ − c t e₁|² / 2w²)` travelling along the first axis.
    TravelingBump {
        amplitude: f64,
        width: f64,
        speed: f64,
        center: Vec<f64>,
    },
}

/// Suprema of `M` and its derivatives over `ℝ⁺ × [0, L]^d`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SignalBounds {
    pub sup_value: f64,
    pub sup_time_derivative: f64,
    pub sup_gradient: f64,
    /// Largest of the second-derivative suprema (`∂²_t`, `|∂_t∇ₓ|`, operator norm of `∇²ₓ`).
    pub sup_second: f64,
    pub sup_dtt: f64,
    pub sup_dtx: f64,
    pub sup_dxx: f64,
}

impl SignalBounds {
    /// `‖M‖_{W^{2,∞}}` as the sum of all stored suprema.
    ///
    /// With this norm `|D_t M| ≤ ‖M‖(1+|v|)` and `|D_t² M| ≤ 2‖M‖(1+|v|²)`.
    pub fn w2inf_norm(&self) -> f64 {
        self.sup_value
            + self.sup_time_derivative
            + self.sup_gradient
            + self.sup_dtt
            + self.sup_dtx
            + self.sup_dxx
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SignalSpec {
    family: SignalFamily,
    dim: usize,
    domain_length: f64,
    bounds: SignalBounds,
}

impl SignalSpec {
    /// Validates parameters and derives the analytic bounds over `[0, domain_length]^dim`.
    pub fn new(family: SignalFamily, dim: usize, domain_length: f64) -> Result<Self> {
        if !(1..=2).contains(&dim) {
            return Err(Error::config(format!("signal dimension must be 1 or 2, got {dim}")));
        }
        if !(domain_length > 0.0 && domain_length.is_finite()) {
            return Err(Error::config("signal domain length must be positive"));
        }
        let bounds = match &family {
            SignalFamily::Constant { value } => {
                if !value.is_finite() {
                    return Err(Error::config("constant signal must be finite"));
                }
                SignalBounds {
                    sup_value: value.abs(),
                    sup_time_derivative: 0.0,
                    sup_gradient: 0.0,
                    sup_second: 0.0,
                    sup_dtt: 0.0,
                    sup_dtx: 0.0,
                    sup_dxx: 0.0,
                }
            }
            SignalFamily::LinearInX { gradient } => {
                if gradient.len() != dim || gradient.iter().any(|g| !g.is_finite()) {
                    return Err(Error::config(format!(
                        "linear signal gradient must have {dim} finite components"
                    )));
                }
                // sup of |a·x| over the cube [0, L]^d
                let pos: f64 = gradient.iter().filter(|g| **g > 0.0).sum();
                let neg: f64 = -gradient.iter().filter(|g| **g < 0.0).sum::<f64>();
                SignalBounds {
                    sup_value: pos.max(neg) * domain_length,
                    sup_time_derivative: 0.0,
                    sup_gradient: norm(gradient),
                    sup_second: 0.0,
                    sup_dtt: 0.0,
                    sup_dtx: 0.0,
                    sup_dxx: 0.0,
                }
            }
            SignalFamily::TravelingBump {
                amplitude,
                width,
                speed,
                center,
            } => {
                if !(*amplitude > 0.0) || !(*width > 0.0) {
                    return Err(Error::config("travelling bump needs amplitude > 0 and width > 0"));
                }
                if center.len() != dim || !speed.is_finite() {
                    return Err(Error::config(format!(
                        "travelling bump center must have {dim} components"
                    )));
                }
                let a = *amplitude;
                let w = *width;
                let c = speed.abs();
                let grad = a * (-0.5f64).exp() / w;
                let hess = a / (w * w);
                SignalBounds {
                    sup_value: a,
                    sup_time_derivative: c * grad,
                    sup_gradient: grad,
                    sup_second: hess.max(c * hess).max(c * c * hess),
                    sup_dtt: c * c * hess,
                    sup_dtx: c * hess,
                    sup_dxx: hess,
                }
            }
        };
        Ok(Self {
            family,
            dim,
            domain_length,
            bounds,
        })
    }

    pub fn family(&self) -> &SignalFamily {
        &self.family
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn domain_length(&self) -> f64 {
        self.domain_length
    }

    pub fn bounds(&self) -> &SignalBounds {
        &self.bounds
    }

    /// `M(t,x)`.
    pub fn eval(&self, t: f64, x: &[f64]) -> f64 {
        match &self.family {
            SignalFamily::Constant { value } => *value,
            SignalFamily::LinearInX { gradient } => dot(gradient, x),
            SignalFamily::TravelingBump {
                amplitude,
                width,
                speed,
                center,
            } => {
                let r2 = bump_offset_sq(x, center, *speed, t);
                amplitude * (-0.5 * r2 / (width * width)).exp()
            }
        }
    }

    /// `∂_t M(t,x)`.
    pub fn time_derivative(&self, t: f64, x: &[f64]) -> f64 {
        match &self.family {
            SignalFamily::Constant { .. } | SignalFamily::LinearInX { .. } => 0.0,
            SignalFamily::TravelingBump {
                width,
                speed,
                center,
                ..
            } => {
                let xi1 = x[0] - center[0] - speed * t;
                speed * self.eval(t, x) * xi1 / (width * width)
            }
        }
    }

    /// `∇ₓM(t,x)` written into `out`.
    pub fn gradient(&self, t: f64, x: &[f64], out: &mut [f64]) {
        match &self.family {
            SignalFamily::Constant { .. } => out.iter_mut().for_each(|g| *g = 0.0),
            SignalFamily::LinearInX { gradient } => out.copy_from_slice(gradient),
            SignalFamily::TravelingBump {
                width,
                speed,
                center,
                ..
            } => {
                let m = self.eval(t, x);
                for (i, g) in out.iter_mut().enumerate() {
                    let shift = if i == 0 { speed * t } else { 0.0 };
                    *g = -m * (x[i] - center[i] - shift) / (width * width);
                }
            }
        }
    }

    /// Path-wise derivative `D_t M = ∂_t M + v·∇ₓM`.
    pub fn path_derivative(&self, t: f64, x: &[f64], v: &[f64]) -> f64 {
        match &self.family {
            SignalFamily::Constant { .. } => 0.0,
            SignalFamily::LinearInX { gradient } => dot(gradient, v),
            SignalFamily::TravelingBump {
                width,
                speed,
                center,
                ..
            } => {
                let m = self.eval(t, x);
                let mut acc = 0.0;
                for i in 0..self.dim {
                    let shift = if i == 0 { speed * t } else { 0.0 };
                    let xi = x[i] - center[i] - shift;
                    let drift = if i == 0 { *speed } else { 0.0 };
                    acc += (drift - v[i]) * xi;
                }
                m * acc / (width * width)
            }
        }
    }
}

fn bump_offset_sq(x: &[f64], center: &[f64], speed: f64, t: f64) -> f64 {
    x.iter()
        .zip(center)
        .enumerate()
        .map(|(i, (xi, ci))| {
            let d = xi - ci - if i == 0 { speed * t } else { 0.0 };
            d * d
        })
        .sum()
}

/// How `N` is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum EvalMode {
    /// Analytic antiderivative; available for `Constant` and `LinearInX`.
    ClosedForm,
    /// Adaptive Gauss–Legendre on the exponentially weighted integral; the field is the maximum
    /// bisection depth.
    Quadrature(u32),
}

/// Relative tolerance of the quadrature mode.
pub const ADAPTED_SIGNAL_RTOL: f64 = 1e-10;

/// Beyond this many relaxation times the weight `e^{−σ}` is below 2e-22 and the tail is dropped.
const TAIL_CUTOFF: f64 = 50.0;

/// Parameters of the adapted signal `N`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdaptedSignal {
    eps: f64,
    mode: EvalMode,
}

impl AdaptedSignal {
    pub fn new(eps: f64, mode: EvalMode) -> Result<Self> {
        if !(eps > 0.0 && eps.is_finite()) {
            return Err(Error::config(format!("eps must be positive, got {eps}")));
        }
        Ok(Self { eps, mode })
    }

    /// Closed form when the family has one, quadrature otherwise.
    pub fn preferred(eps: f64, spec: &SignalSpec) -> Result<Self> {
        let mode = match spec.family() {
            SignalFamily::TravelingBump { .. } => EvalMode::Quadrature(40),
            _ => EvalMode::ClosedForm,
        };
        Self::new(eps, mode)
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn mode(&self) -> EvalMode {
        self.mode
    }

    /// `N(t,x,v)`.
    pub fn value(&self, spec: &SignalSpec, t: f64, x: &[f64], v: &[f64]) -> Result<f64> {
        if t < 0.0 {
            return Err(Error::Domain(format!("negative time {t}")));
        }
        let eps = self.eps;
        match self.mode {
            EvalMode::ClosedForm => match spec.family() {
                SignalFamily::Constant { value } => Ok(*value),
                SignalFamily::LinearInX { gradient } => {
                    Ok(dot(gradient, x) - eps * dot(gradient, v) * (-(-t / eps).exp_m1()))
                }
                SignalFamily::TravelingBump { .. } => Err(Error::config(
                    "closed-form adapted signal is not available for the travelling bump",
                )),
            },
            EvalMode::Quadrature(max_depth) => {
                if t == 0.0 {
                    return Ok(spec.eval(0.0, x));
                }
                let d = spec.dim();
                let horizon = t / eps;
                let mut start = [0.0; 2];
                for i in 0..d {
                    start[i] = x[i] - t * v[i];
                }
                let head = spec.eval(0.0, &start[..d]) * (-horizon).exp();
                // σ = (t − s)/ε puts the ε-independent weight e^{−σ} on [0, t/ε]
                let integrand = |sigma: f64| {
                    let mut y = [0.0; 2];
                    for i in 0..d {
                        y[i] = x[i] - eps * sigma * v[i];
                    }
                    spec.eval(t - eps * sigma, &y[..d]) * (-sigma).exp()
                };
                let upper = horizon.min(TAIL_CUTOFF);
                let tail =
                    adaptive_gauss_legendre(integrand, 0.0, upper, ADAPTED_SIGNAL_RTOL, max_depth)?;
                Ok(head + tail)
            }
        }
    }

    /// `D_t N = (M − N)/ε`.
    pub fn path_derivative(&self, spec: &SignalSpec, t: f64, x: &[f64], v: &[f64]) -> Result<f64> {
        match (self.mode, spec.family()) {
            (_, SignalFamily::Constant { .. }) => Ok(0.0),
            (EvalMode::ClosedForm, SignalFamily::LinearInX { gradient }) => {
                Ok(dot(gradient, v) * (-(-t / self.eps).exp_m1()))
            }
            _ => Ok((spec.eval(t, x) - self.value(spec, t, x, v)?) / self.eps),
        }
    }
}

/// One sample point `(t, x, v, v')` for checking the adapted-signal estimates.
#[derive(Debug, Clone, PartialEq)]
pub struct LemmaSample {
    pub t: f64,
    pub x: Vec<f64>,
    pub v: Vec<f64>,
    pub v_prime: Vec<f64>,
}

/// Worst observed ratios against the Lipschitz-in-velocity and decay estimates for `N`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LemmaReport {
    /// `max |N(v) − N(v')| / (‖∇ₓM‖_∞ ε |v − v'|)`.
    pub max_ratio_lip: f64,
    /// `max |D_tM − D_tN| / (4‖M‖_{W^{2,∞}} (ε + e^{−t/ε})(1 + |v|²))`.
    pub max_ratio_decay: f64,
    pub samples: usize,
}

pub const LEMMA_SLACK: f64 = 1e-8;

/// Evaluates both estimates over the samples; errors when either ratio exceeds `1 + 1e-8`.
pub fn verify_lemma_n(
    state: &AdaptedSignal,
    spec: &SignalSpec,
    samples: &[LemmaSample],
) -> Result<LemmaReport> {
    if samples.is_empty() {
        return Err(Error::config("empty sample set"));
    }
    let eps = state.eps();
    let b = spec.bounds();
    let grad = b.sup_gradient;
    let w2 = b.w2inf_norm();
    let mut report = LemmaReport {
        max_ratio_lip: 0.0,
        max_ratio_decay: 0.0,
        samples: samples.len(),
    };
    for s in samples {
        let n_v = state.value(spec, s.t, &s.x, &s.v)?;
        let n_w = state.value(spec, s.t, &s.x, &s.v_prime)?;
        let dv: Vec<f64> = s.v.iter().zip(&s.v_prime).map(|(a, b)| a - b).collect();
        let dv_norm = norm(&dv);
        if dv_norm > 0.0 {
            let num = (n_v - n_w).abs();
            let ratio = if num == 0.0 { 0.0 } else { num / (grad * eps * dv_norm) };
            report.max_ratio_lip = report.max_ratio_lip.max(ratio);
        }
        let gap = (spec.path_derivative(s.t, &s.x, &s.v) - state.path_derivative(spec, s.t, &s.x, &s.v)?)
            .abs();
        if gap > 0.0 {
            let envelope = 4.0 * w2 * (eps + (-s.t / eps).exp()) * (1.0 + dot(&s.v, &s.v));
            report.max_ratio_decay = report.max_ratio_decay.max(gap / envelope);
        }
    }
    if report.max_ratio_lip > 1.0 + LEMMA_SLACK || report.max_ratio_decay > 1.0 + LEMMA_SLACK {
        return Err(Error::BoundViolation(format!(
            "adapted-signal estimate violated: lipschitz ratio {:.6e}, decay ratio {:.6e}",
            report.max_ratio_lip, report.max_ratio_decay
        )));
    }
    Ok(report)
}
