//! Tumbling kernels `Λ(u, v, v') = λ₀ g(u) K(v, v')` and their Gaussian convolutions.
//!
//! `u` is the internal argument `(m − M)/ε`; a cell moving up a gradient has `u < 0`, so a
//! nondecreasing response `g` lowers its tumbling rate. The limiting kernel is
//!
//! ```text
//! Λ̄(m, v, v') = ∫ Λ(y − m, v, v') 𝓜(y) dy
//! ```
//!
//! Since the velocity factor does not depend on `y`, only the response `g` needs convolving.

use crate::error::{Error, Result};
use crate::quadrature::GaussHermite;
use crate::velocity::VelocitySet;

/// `sup |tanh''| = 4/(3√3)`.
const TANH_CURVATURE: f64 = 0.769_800_358_919_501;

/// Target error of linear interpolation in the convolution cache.
pub const CACHE_INTERPOLATION_TOL: f64 = 1e-8;

pub const DEFAULT_QUADRATURE_ORDER: usize = 40;
pub const MIN_QUADRATURE_ORDER: usize = 20;

/// Internal-state response `g(u)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Response {
    Flat,
    /// `1 + χ tanh(u)` with `0 < χ < 1`.
    Tanh { chi: f64 },
    /// `e^{βu}`, saturating at `cap` when one is given.
    Exp { beta: f64, cap: Option<f64> },
}

impl Response {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Response::Flat => Ok(()),
            Response::Tanh { chi } if chi > 0.0 && chi < 1.0 => Ok(()),
            Response::Tanh { chi } => Err(Error::config(format!("tanh response needs 0 < chi < 1, got {chi}"))),
            Response::Exp { beta, cap } => {
                if !beta.is_finite() {
                    return Err(Error::config("exp response needs finite beta"));
                }
                match cap {
                    Some(c) if !(c > 0.0 && c.is_finite()) => Err(Error::config("exp cap must be positive")),
                    _ => Ok(()),
                }
            }
        }
    }

    #[inline]
    pub fn eval(&self, u: f64) -> f64 {
        match *self {
            Response::Flat => 1.0,
            Response::Tanh { chi } => 1.0 + chi * u.tanh(),
            Response::Exp { beta, cap } => {
                let g = (beta * u).exp();
                match cap {
                    Some(c) => g.min(c),
                    None => g,
                }
            }
        }
    }

    /// `sup_u g(u)`; infinite for an uncapped exponential.
    pub fn sup(&self) -> f64 {
        match *self {
            Response::Flat => 1.0,
            Response::Tanh { chi } => 1.0 + chi,
            Response::Exp { beta, cap } => match cap {
                Some(c) => c,
                None if beta == 0.0 => 1.0,
                None => f64::INFINITY,
            },
        }
    }

    /// `inf_u g(u)`.
    pub fn inf(&self) -> f64 {
        match *self {
            Response::Flat => 1.0,
            Response::Tanh { chi } => 1.0 - chi,
            Response::Exp { beta, cap } => {
                if beta == 0.0 {
                    cap.map_or(1.0, |c| c.min(1.0))
                } else {
                    0.0
                }
            }
        }
    }

    /// Bound on `|g''|`, used to size the interpolation cache.
    fn curvature_bound(&self) -> f64 {
        match *self {
            Response::Flat => 0.0,
            Response::Tanh { chi } => chi * TANH_CURVATURE,
            Response::Exp { beta, cap } => beta * beta * cap.unwrap_or(f64::INFINITY),
        }
    }
}

/// Velocity redistribution factor before normalization.
#[derive(Debug, Clone, PartialEq)]
pub enum Redistribution {
    UniformOnV,
    /// Symmetric positive table indexed `[v_new][v_old]` over the velocity nodes.
    Table(Vec<Vec<f64>>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct KernelSpec {
    pub response: Response,
    pub base_rate: f64,
    pub redistribution: Redistribution,
}

impl KernelSpec {
    pub fn new(response: Response, base_rate: f64, redistribution: Redistribution) -> Result<Self> {
        response.validate()?;
        if !(base_rate > 0.0 && base_rate.is_finite()) {
            return Err(Error::config(format!("base rate must be positive, got {base_rate}")));
        }
        Ok(Self {
            response,
            base_rate,
            redistribution,
        })
    }
}

/// Suprema over `(u, v)` of the velocity integrals of `Λ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelBounds {
    /// `sup ∫ (1 + |v'|²) Λ(u, v', v) dv'`.
    pub outgoing_moment: f64,
    /// `sup ∫ Λ(u, v, v') dv'`.
    pub incoming_rate: f64,
    /// `sup ∫ Λ(u, v', v) dv'`, the total tumbling rate; the thinning majorant.
    pub outgoing_rate: f64,
}

/// A kernel attached to a velocity set, with `K` normalized so `Σ_{v'} w' K(v', v) = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct TumblingKernel {
    spec: KernelSpec,
    velocities: VelocitySet,
    /// Row-major `[v_new * n + v_old]`.
    factor: Vec<f64>,
    bounds: KernelBounds,
}

impl TumblingKernel {
    pub fn new(spec: KernelSpec, velocities: VelocitySet) -> Result<Self> {
        let n = velocities.len();
        let raw: Vec<f64> = match &spec.redistribution {
            Redistribution::UniformOnV => vec![1.0; n * n],
            Redistribution::Table(rows) => {
                if rows.len() != n || rows.iter().any(|r| r.len() != n) {
                    return Err(Error::config(format!("redistribution table must be {n}x{n}")));
                }
                for i in 0..n {
                    for j in 0..n {
                        let a = rows[i][j];
                        if !(a > 0.0 && a.is_finite()) {
                            return Err(Error::config("redistribution table entries must be positive"));
                        }
                        if (a - rows[j][i]).abs() > 1e-12 * a.abs().max(rows[j][i].abs()) {
                            return Err(Error::config("redistribution table must be symmetric"));
                        }
                    }
                }
                rows.iter().flatten().copied().collect()
            }
        };
        let mut factor = raw;
        for old in 0..n {
            let col: f64 = (0..n).map(|new| velocities.weight(new) * factor[new * n + old]).sum();
            for new in 0..n {
                factor[new * n + old] /= col;
            }
        }
        let g_sup = spec.response.sup();
        let lam = spec.base_rate;
        let mut outgoing_moment = 0.0f64;
        let mut outgoing_rate = 0.0f64;
        let mut incoming_rate = 0.0f64;
        for v in 0..n {
            let mut om = 0.0;
            let mut or = 0.0;
            let mut ir = 0.0;
            for w in 0..n {
                let wt = velocities.weight(w);
                om += wt * (1.0 + velocities.speed_sq(w)) * factor[w * n + v];
                or += wt * factor[w * n + v];
                ir += wt * factor[v * n + w];
            }
            outgoing_moment = outgoing_moment.max(om);
            outgoing_rate = outgoing_rate.max(or);
            incoming_rate = incoming_rate.max(ir);
        }
        let bounds = KernelBounds {
            outgoing_moment: lam * g_sup * outgoing_moment,
            incoming_rate: lam * g_sup * incoming_rate,
            outgoing_rate: lam * g_sup * outgoing_rate,
        };
        Ok(Self {
            spec,
            velocities,
            factor,
            bounds,
        })
    }

    pub fn spec(&self) -> &KernelSpec {
        &self.spec
    }

    pub fn velocities(&self) -> &VelocitySet {
        &self.velocities
    }

    pub fn bounds(&self) -> &KernelBounds {
        &self.bounds
    }

    pub fn response(&self) -> Response {
        self.spec.response
    }

    pub fn base_rate(&self) -> f64 {
        self.spec.base_rate
    }

    /// Normalized velocity factor `K(v_new, v_old)`.
    #[inline]
    pub fn redistribution(&self, v_new: usize, v_old: usize) -> f64 {
        self.factor[v_new * self.velocities.len() + v_old]
    }

    /// `Λ(u, v_new, v_old)`.
    #[inline]
    pub fn eval(&self, u: f64, v_new: usize, v_old: usize) -> f64 {
        self.spec.base_rate * self.spec.response.eval(u) * self.redistribution(v_new, v_old)
    }

    /// `∫ Λ(u, v', v_old) dv'`.
    #[inline]
    pub fn total_rate(&self, u: f64, v_old: usize) -> f64 {
        let n = self.velocities.len();
        let col: f64 = (0..n)
            .map(|w| self.velocities.weight(w) * self.factor[w * n + v_old])
            .sum();
        self.spec.base_rate * self.spec.response.eval(u) * col
    }
}

/// Largest sampled values of the three velocity integrals.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelBoundsReport {
    pub stored: KernelBounds,
    pub sampled: KernelBounds,
}

/// Dense-sampling check that the stored bounds really dominate the kernel.
pub fn verify_kernel_bounds(
    spec: &KernelSpec,
    velocities: &VelocitySet,
    u_samples: &[f64],
) -> Result<KernelBoundsReport> {
    if u_samples.is_empty() {
        return Err(Error::config("no internal-state samples"));
    }
    let kernel = TumblingKernel::new(spec.clone(), velocities.clone())?;
    let stored = *kernel.bounds();
    if !(stored.outgoing_moment.is_finite() && stored.incoming_rate.is_finite()) {
        return Err(Error::config(
            "tumbling kernel is unbounded in the internal state; cap the response",
        ));
    }
    let n = velocities.len();
    let mut sampled = KernelBounds {
        outgoing_moment: 0.0,
        incoming_rate: 0.0,
        outgoing_rate: 0.0,
    };
    for &u in u_samples {
        for v in 0..n {
            let mut om = 0.0;
            let mut or = 0.0;
            let mut ir = 0.0;
            for w in 0..n {
                let wt = velocities.weight(w);
                om += wt * (1.0 + velocities.speed_sq(w)) * kernel.eval(u, w, v);
                or += wt * kernel.eval(u, w, v);
                ir += wt * kernel.eval(u, v, w);
            }
            sampled.outgoing_moment = sampled.outgoing_moment.max(om);
            sampled.outgoing_rate = sampled.outgoing_rate.max(or);
            sampled.incoming_rate = sampled.incoming_rate.max(ir);
        }
    }
    let exceeds = |s: f64, b: f64| s > b * (1.0 + 1e-10);
    if exceeds(sampled.outgoing_moment, stored.outgoing_moment)
        || exceeds(sampled.incoming_rate, stored.incoming_rate)
        || exceeds(sampled.outgoing_rate, stored.outgoing_rate)
    {
        return Err(Error::config(format!(
            "stored kernel bounds {stored:?} are exceeded by samples {sampled:?}"
        )));
    }
    Ok(KernelBoundsReport { stored, sampled })
}

/// Limiting kernel `Λ̄` with a cached convolution `ḡ(m) = ∫ g(y − m) 𝓜(y) dy`.
#[derive(Debug, Clone)]
pub struct LimitKernel {
    kernel: TumblingKernel,
    quadrature: GaussHermite,
    m_min: f64,
    m_step: f64,
    cache: Vec<f64>,
}

impl LimitKernel {
    /// Builds the cache on `[−m_range, m_range]`; arguments outside fall back to direct quadrature.
    pub fn new(kernel: TumblingKernel, quadrature_order: usize, m_range: f64) -> Result<Self> {
        if quadrature_order < MIN_QUADRATURE_ORDER {
            return Err(Error::config(format!(
                "limit kernel needs quadrature order >= {MIN_QUADRATURE_ORDER}, got {quadrature_order}"
            )));
        }
        if !(m_range >= 0.0 && m_range.is_finite()) {
            return Err(Error::config("cache range must be finite and nonnegative"));
        }
        let quadrature = GaussHermite::new(quadrature_order)?;
        let curvature = kernel.response().curvature_bound();
        // linear interpolation error ≤ h² |ḡ''| / 8 and |ḡ''| ≤ sup |g''|
        let mut m_step = if curvature > 0.0 && curvature.is_finite() {
            (8.0 * CACHE_INTERPOLATION_TOL / curvature).sqrt()
        } else {
            0.05
        };
        m_step = m_step.min(0.05);
        let range = m_range.max(m_step);
        let count = (2.0 * range / m_step).ceil() as usize + 1;
        let m_min = -range;
        let response = kernel.response();
        let cache = (0..count)
            .map(|i| {
                let m = m_min + m_step * i as f64;
                quadrature.integrate(|y| response.eval(y - m))
            })
            .collect();
        Ok(Self {
            kernel,
            quadrature,
            m_min,
            m_step,
            cache,
        })
    }

    pub fn kernel(&self) -> &TumblingKernel {
        &self.kernel
    }

    pub fn quadrature_order(&self) -> usize {
        self.quadrature.order()
    }

    /// Cached `(m, ḡ(m))` pairs.
    pub fn cache(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.cache
            .iter()
            .enumerate()
            .map(move |(i, g)| (self.m_min + self.m_step * i as f64, *g))
    }

    /// `ḡ(m)` by direct Gauss–Hermite quadrature.
    pub fn convolved_response_exact(&self, m: f64) -> f64 {
        let response = self.kernel.response();
        self.quadrature.integrate(|y| response.eval(y - m))
    }

    /// `ḡ(m)` from the cache.
    pub fn convolved_response(&self, m: f64) -> f64 {
        if let Response::Flat = self.kernel.response() {
            return 1.0;
        }
        let s = (m - self.m_min) / self.m_step;
        if s < 0.0 || s > (self.cache.len() - 1) as f64 {
            return self.convolved_response_exact(m);
        }
        let i = (s.floor() as usize).min(self.cache.len() - 2);
        let theta = s - i as f64;
        (1.0 - theta) * self.cache[i] + theta * self.cache[i + 1]
    }

    /// `Λ̄(m, v_new, v_old)`.
    pub fn value(&self, m: f64, v_new: usize, v_old: usize) -> f64 {
        self.kernel.base_rate() * self.convolved_response(m) * self.kernel.redistribution(v_new, v_old)
    }

    /// `Λ̄^ε(m, v_new, v_old) = ∫ Λ(y − m, v_new, v_old) s⁻¹ 𝓜(y/s) dy` with `s = ε^{α−1}`.
    pub fn corrected_value(&self, m: f64, v_new: usize, v_old: usize, alpha: f64, eps: f64) -> Result<f64> {
        if !(alpha > 1.0) {
            return Err(Error::config(format!("diffusion exponent must exceed 1, got {alpha}")));
        }
        if !(eps > 0.0 && eps < 1.0) {
            return Err(Error::config(format!("eps must lie in (0, 1), got {eps}")));
        }
        let s = eps.powf(alpha - 1.0);
        let response = self.kernel.response();
        let g = self.quadrature.integrate(|y| response.eval(s * y - m));
        Ok(self.kernel.base_rate() * g * self.kernel.redistribution(v_new, v_old))
    }
}
