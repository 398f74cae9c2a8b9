//! Scenario files.
//!
//! A scenario is a TOML document with the sections `[signal]`, `[kernel]`, `[grid]`,
//! `[solver]`, `[particles]`, `[sweep]` and `[output]` plus a top-level `master_seed`. Every
//! section is optional at parse time; each command asks for the sections it needs, and every
//! section that is present is validated before anything runs.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{PhaseGrid, SpatialProfile};
use crate::grid_solver::SolverConfig;
use crate::kernels::{KernelSpec, LimitKernel, Redistribution, Response, TumblingKernel, DEFAULT_QUADRATURE_ORDER};
use crate::signal::{AdaptedSignal, EvalMode, SignalFamily, SignalSpec};
use crate::transport::TransportScheme;
use crate::velocity::VelocitySet;

/// The scenario shipped with the crate.
pub const DEFAULT_SCENARIO: &str = include_str!("../scenarios/default.toml");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum SignalFamilyConfig {
    Constant { value: f64 },
    LinearInX { gradient: Vec<f64> },
    TravelingBump { amplitude: f64, width: f64, speed: f64, center: Vec<f64> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EvalModeConfig {
    Auto,
    ClosedForm,
    Quadrature,
}

fn default_dim() -> usize {
    1
}

fn default_eval_mode() -> EvalModeConfig {
    EvalModeConfig::Auto
}

fn default_max_depth() -> u32 {
    40
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignalConfig {
    #[serde(flatten)]
    pub family: SignalFamilyConfig,
    #[serde(default = "default_dim")]
    pub dim: usize,
    #[serde(default = "default_eval_mode")]
    pub eval_mode: EvalModeConfig,
    #[serde(default = "default_max_depth")]
    pub max_depth: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "response", rename_all = "kebab-case")]
pub enum ResponseConfig {
    Flat,
    Tanh { chi: f64 },
    Exp { beta: f64, cap: Option<f64> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RedistributionKind {
    Uniform,
    Table,
}

fn default_redistribution() -> RedistributionKind {
    RedistributionKind::Uniform
}

fn default_quadrature_order() -> usize {
    DEFAULT_QUADRATURE_ORDER
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelConfig {
    #[serde(flatten)]
    pub response: ResponseConfig,
    pub base_rate: f64,
    #[serde(default = "default_redistribution")]
    pub redistribution: RedistributionKind,
    #[serde(default)]
    pub table: Option<Vec<Vec<f64>>>,
    #[serde(default = "default_quadrature_order")]
    pub quadrature_order: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ProfileConfig {
    CosineBump { center: f64, half_width: f64 },
    Box { left: f64, right: f64 },
    Uniform,
}

impl From<&ProfileConfig> for SpatialProfile {
    fn from(p: &ProfileConfig) -> Self {
        match *p {
            ProfileConfig::CosineBump { center, half_width } => SpatialProfile::CosineBump { center, half_width },
            ProfileConfig::Box { left, right } => SpatialProfile::Box { left, right },
            ProfileConfig::Uniform => SpatialProfile::Uniform,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub length: f64,
    pub n_x: usize,
    pub velocities: usize,
    pub v_max: f64,
    pub n_y: usize,
    pub y_max: f64,
    /// Initial spatial profile.
    pub profile: ProfileConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    pub eps: f64,
    pub dt: f64,
    pub t_end: f64,
    pub transport: TransportScheme,
    pub output_interval: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParticlesConfig {
    pub count: usize,
    pub t_end: f64,
    /// Defaults to `[solver].eps`.
    #[serde(default)]
    pub eps: Option<f64>,
    #[serde(default = "default_dim")]
    pub dim: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub eps: Vec<f64>,
}

fn default_directory() -> PathBuf {
    PathBuf::from("out")
}

fn default_formats() -> Vec<String> {
    vec!["csv".into(), "snapshot".into()]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "default_directory")]
    pub directory: PathBuf,
    #[serde(default = "default_formats")]
    pub formats: Vec<String>,
    #[serde(default)]
    pub plots: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            directory: default_directory(),
            formats: default_formats(),
            plots: false,
        }
    }
}

impl OutputConfig {
    pub fn wants(&self, format: &str) -> bool {
        self.formats.iter().any(|f| f == format)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default)]
    pub master_seed: u64,
    pub signal: Option<SignalConfig>,
    pub kernel: Option<KernelConfig>,
    pub grid: Option<GridConfig>,
    pub solver: Option<SolverSection>,
    pub particles: Option<ParticlesConfig>,
    pub sweep: Option<SweepConfig>,
    #[serde(default)]
    pub output: OutputConfig,
}

fn missing(section: &str) -> Error {
    Error::config(format!("scenario has no [{section}] section"))
}

impl ScenarioConfig {
    /// Parses and validates every section that is present.
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::config(format!("invalid scenario: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn default_scenario() -> Self {
        Self::parse(DEFAULT_SCENARIO).expect("shipped scenario is valid")
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if self.signal.is_some() && self.grid.is_some() {
            self.signal_spec()?;
        }
        if self.kernel.is_some() && self.grid.is_some() {
            self.kernel_spec()?;
            self.tumbling_kernel()?;
        }
        if let Some(g) = &self.grid {
            self.phase_grid()?;
            SpatialProfile::from(&g.profile).validate()?;
        }
        if self.solver.is_some() && self.grid.is_some() {
            self.solver_config()?.validate(&*self.phase_grid()?)?;
        }
        if let Some(p) = &self.particles {
            if p.count == 0 {
                return Err(Error::config("[particles] count must be at least 1"));
            }
            if !(p.t_end >= 0.0) {
                return Err(Error::config("[particles] t_end must be nonnegative"));
            }
            if p.eps.is_some_and(|e| !(e > 0.0)) {
                return Err(Error::config("[particles] eps must be positive"));
            }
            if !(p.dim == 1 || p.dim == 2) {
                return Err(Error::config("[particles] dim must be 1 or 2"));
            }
        }
        if let Some(s) = &self.sweep {
            if s.eps.is_empty() {
                return Err(Error::config("[sweep] needs at least one eps value"));
            }
            if s.eps.iter().any(|e| !(*e > 0.0 && e.is_finite())) {
                return Err(Error::config("[sweep] eps values must be positive"));
            }
            if s.eps.windows(2).any(|w| !(w[0] > w[1])) {
                return Err(Error::config("[sweep] eps values must be sorted in strictly descending order"));
            }
        }
        Ok(())
    }

    pub fn grid_section(&self) -> Result<&GridConfig> {
        self.grid.as_ref().ok_or_else(|| missing("grid"))
    }

    pub fn solver_section(&self) -> Result<&SolverSection> {
        self.solver.as_ref().ok_or_else(|| missing("solver"))
    }

    pub fn particles_section(&self) -> Result<&ParticlesConfig> {
        self.particles.as_ref().ok_or_else(|| missing("particles"))
    }

    pub fn sweep_section(&self) -> Result<&SweepConfig> {
        self.sweep.as_ref().ok_or_else(|| missing("sweep"))
    }

    pub fn velocity_set(&self, dim: usize) -> Result<VelocitySet> {
        let g = self.grid_section()?;
        match dim {
            1 => VelocitySet::line(g.velocities, g.v_max),
            2 => VelocitySet::circle(g.velocities, g.v_max),
            _ => Err(Error::config("velocity dimension must be 1 or 2")),
        }
    }

    pub fn phase_grid(&self) -> Result<Arc<PhaseGrid>> {
        let g = self.grid_section()?;
        Ok(Arc::new(PhaseGrid::new(
            g.length,
            g.n_x,
            self.velocity_set(1)?,
            g.n_y,
            g.y_max,
        )?))
    }

    pub fn profile(&self) -> Result<SpatialProfile> {
        Ok(SpatialProfile::from(&self.grid_section()?.profile))
    }

    /// The signal in dimension `dim` (the `[signal]` gradient or centre is padded with zeros).
    pub fn signal_spec_dim(&self, dim: usize) -> Result<SignalSpec> {
        let s = self.signal.as_ref().ok_or_else(|| missing("signal"))?;
        let length = self.grid_section()?.length;
        let pad = |v: &[f64]| -> Result<Vec<f64>> {
            if v.len() > dim {
                return Err(Error::config("signal vector longer than the dimension"));
            }
            let mut out = v.to_vec();
            out.resize(dim, 0.0);
            Ok(out)
        };
        let family = match &s.family {
            SignalFamilyConfig::Constant { value } => SignalFamily::Constant { value: *value },
            SignalFamilyConfig::LinearInX { gradient } => SignalFamily::LinearInX { gradient: pad(gradient)? },
            SignalFamilyConfig::TravelingBump {
                amplitude,
                width,
                speed,
                center,
            } => SignalFamily::TravelingBump {
                amplitude: *amplitude,
                width: *width,
                speed: *speed,
                center: pad(center)?,
            },
        };
        SignalSpec::new(family, dim, length)
    }

    pub fn signal_spec(&self) -> Result<SignalSpec> {
        let dim = self.signal.as_ref().ok_or_else(|| missing("signal"))?.dim;
        self.signal_spec_dim(dim)
    }

    pub fn adapted_signal(&self, eps: f64, spec: &SignalSpec) -> Result<AdaptedSignal> {
        let s = self.signal.as_ref().ok_or_else(|| missing("signal"))?;
        match s.eval_mode {
            EvalModeConfig::Auto => match AdaptedSignal::preferred(eps, spec)?.mode() {
                EvalMode::Quadrature(_) => AdaptedSignal::new(eps, EvalMode::Quadrature(s.max_depth)),
                m => AdaptedSignal::new(eps, m),
            },
            EvalModeConfig::ClosedForm => AdaptedSignal::new(eps, EvalMode::ClosedForm),
            EvalModeConfig::Quadrature => AdaptedSignal::new(eps, EvalMode::Quadrature(s.max_depth)),
        }
    }

    pub fn kernel_spec(&self) -> Result<KernelSpec> {
        let k = self.kernel.as_ref().ok_or_else(|| missing("kernel"))?;
        let response = match k.response {
            ResponseConfig::Flat => Response::Flat,
            ResponseConfig::Tanh { chi } => Response::Tanh { chi },
            ResponseConfig::Exp { beta, cap } => Response::Exp { beta, cap },
        };
        let redistribution = match (k.redistribution, &k.table) {
            (RedistributionKind::Uniform, None) => Redistribution::UniformOnV,
            (RedistributionKind::Table, Some(t)) => Redistribution::Table(t.clone()),
            (RedistributionKind::Uniform, Some(_)) => {
                return Err(Error::config("[kernel] table given but redistribution is uniform"))
            }
            (RedistributionKind::Table, None) => return Err(Error::config("[kernel] redistribution table missing")),
        };
        KernelSpec::new(response, k.base_rate, redistribution)
    }

    pub fn tumbling_kernel_dim(&self, dim: usize) -> Result<TumblingKernel> {
        TumblingKernel::new(self.kernel_spec()?, self.velocity_set(dim)?)
    }

    pub fn tumbling_kernel(&self) -> Result<TumblingKernel> {
        self.tumbling_kernel_dim(1)
    }

    /// `Λ̄` cached over the range of `D_tM` on the grid.
    pub fn limit_kernel(&self) -> Result<LimitKernel> {
        let k = self.kernel.as_ref().ok_or_else(|| missing("kernel"))?;
        let spec = self.signal_spec()?;
        let b = spec.bounds();
        let g = self.grid_section()?;
        let range = (b.sup_time_derivative + g.v_max * b.sup_gradient).max(1.0);
        LimitKernel::new(self.tumbling_kernel()?, k.quadrature_order, range)
    }

    pub fn solver_config(&self) -> Result<SolverConfig> {
        let s = self.solver_section()?;
        Ok(SolverConfig {
            eps: s.eps,
            dt: s.dt,
            t_end: s.t_end,
            transport: s.transport,
            output_interval: s.output_interval,
        })
    }

    pub fn particle_eps(&self) -> Result<f64> {
        let p = self.particles_section()?;
        match p.eps {
            Some(e) => Ok(e),
            None => Ok(self.solver_section()?.eps),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_scenario_parses() {
        let cfg = ScenarioConfig::default_scenario();
        let g = cfg.phase_grid().unwrap();
        assert_eq!((g.n_x(), g.n_v(), g.n_y()), (200, 8, 160));
        assert_eq!(cfg.sweep_section().unwrap().eps, vec![0.2, 0.1, 0.05, 0.025]);
        let s = cfg.solver_config().unwrap();
        assert_eq!((s.dt, s.t_end), (0.005, 4.0));
        cfg.limit_kernel().unwrap();
    }

    #[test]
    fn sweep_must_be_descending() {
        let text = DEFAULT_SCENARIO.replace("eps = [0.2, 0.1, 0.05, 0.025]", "eps = [0.1, 0.2]");
        assert!(matches!(ScenarioConfig::parse(&text), Err(Error::Config(_))));
        let text = DEFAULT_SCENARIO.replace("eps = [0.2, 0.1, 0.05, 0.025]", "eps = [0.1, -0.2]");
        assert!(ScenarioConfig::parse(&text).is_err());
    }

    #[test]
    fn unknown_keys_and_bad_values_are_rejected() {
        let text = DEFAULT_SCENARIO.replace("n_x = 200", "n_x = 200\nbogus = 1");
        assert!(ScenarioConfig::parse(&text).is_err());
        let text = DEFAULT_SCENARIO.replace("dt = 0.005", "dt = 0.5");
        assert!(matches!(ScenarioConfig::parse(&text), Err(Error::Config(_))));
    }

    #[test]
    fn round_trips_through_toml() {
        let cfg = ScenarioConfig::default_scenario();
        let again = ScenarioConfig::parse(&cfg.to_toml()).unwrap();
        assert_eq!(cfg, again);
    }
}
