//! Solver for the limiting velocity-jump model
//!
//! ```text
//! ∂_t p + v ∂_x p = ∫ Λ̄(D_tM(v'), v, v') p(v') − Λ̄(D_tM(v), v', v) p(v) dv'
//! ```
//!
//! on the `(x, v)` part of a [`PhaseGrid`], split as `T(dt/2) · Q(dt) · T(dt/2)` with the same
//! transport scheme as the kinetic solver.

use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::{LimitDistribution, PhaseGrid};
use crate::grid_solver::{SolverConfig, NEGATIVITY_TOL};
use crate::kernels::LimitKernel;
use crate::signal::SignalSpec;
use crate::transport::{advect, TransportScheme};

pub struct LimitSolver {
    grid: Arc<PhaseGrid>,
    dt: f64,
    t_end: f64,
    output_interval: f64,
    transport: TransportScheme,
    signal: SignalSpec,
    kernel: LimitKernel,
    half_courant: Vec<f64>,
    out_weight: Vec<f64>,
}

impl LimitSolver {
    /// Only `dt`, `t_end`, `transport` and `output_interval` of `cfg` are used.
    pub fn new(grid: Arc<PhaseGrid>, cfg: SolverConfig, signal: SignalSpec, kernel: LimitKernel) -> Result<Self> {
        cfg.validate(&grid)?;
        if kernel.kernel().velocities() != grid.velocities() {
            return Err(Error::config("kernel and grid use different velocity sets"));
        }
        if signal.dim() != 1 {
            return Err(Error::config("the limit solver is one-dimensional"));
        }
        let n_v = grid.n_v();
        let half_courant = (0..n_v).map(|j| 0.5 * cfg.dt * grid.velocity(j) / grid.dx()).collect();
        let out_weight = (0..n_v)
            .map(|j| {
                (0..n_v)
                    .map(|w| grid.velocities().weight(w) * kernel.kernel().redistribution(w, j))
                    .sum()
            })
            .collect();
        Ok(Self {
            grid,
            dt: cfg.dt,
            t_end: cfg.t_end,
            output_interval: cfg.output_interval,
            transport: cfg.transport,
            signal,
            kernel,
            half_courant,
            out_weight,
        })
    }

    fn cfg(&self) -> SolverConfig {
        SolverConfig {
            eps: 1.0,
            dt: self.dt,
            t_end: self.t_end,
            transport: self.transport,
            output_interval: self.output_interval,
        }
    }

    pub fn grid(&self) -> &Arc<PhaseGrid> {
        &self.grid
    }

    pub fn kernel(&self) -> &LimitKernel {
        &self.kernel
    }

    fn transport_half(&self, p: &mut LimitDistribution, buf: &mut Vec<f64>) {
        let g = &*self.grid;
        buf.resize(p.values().len(), 0.0);
        advect(self.transport, p.values(), buf, g.n_x(), g.n_v(), 1, &self.half_courant);
        p.values_mut().copy_from_slice(buf);
    }

    /// Writes the tumbling operator for one x-cell at time `t` into `rhs`.
    fn tumbling_cell(&self, i: usize, t: f64, cell: &[f64], rhs: &mut [f64], rate: &mut [f64]) {
        let g = &*self.grid;
        let n_v = g.n_v();
        let x = [g.x_center(i)];
        let lam = self.kernel.kernel().base_rate();
        for (j, r) in rate.iter_mut().enumerate() {
            let m = self.signal.path_derivative(t, &x, &[g.velocity(j)]);
            *r = lam * self.kernel.convolved_response(m) * cell[j];
        }
        for j in 0..n_v {
            let mut gain = 0.0;
            for src in 0..n_v {
                gain += g.velocities().weight(src) * self.kernel.kernel().redistribution(j, src) * rate[src];
            }
            rhs[j] = gain - self.out_weight[j] * rate[j];
        }
    }

    /// The limiting tumbling operator applied to `p` at time `t`.
    pub fn tumbling_rhs(&self, p: &LimitDistribution, t: f64) -> LimitDistribution {
        let n_v = self.grid.n_v();
        let mut out = vec![0.0; p.values().len()];
        out.par_chunks_mut(n_v)
            .zip(p.values().par_chunks(n_v))
            .enumerate()
            .for_each_init(
                || vec![0.0; n_v],
                |rate, (i, (dst, cell))| self.tumbling_cell(i, t, cell, dst, rate),
            );
        LimitDistribution::from_values(self.grid.clone(), out, t).expect("shape matches")
    }

    fn check(&self, p: &LimitDistribution, substep: &'static str) -> Result<()> {
        let min = p.min_value();
        if min < NEGATIVITY_TOL || min.is_nan() {
            return Err(Error::Instability {
                substep,
                time: p.time(),
                value: min,
            });
        }
        Ok(())
    }

    pub fn step(&self, p: &mut LimitDistribution, buf: &mut Vec<f64>) -> Result<()> {
        let t0 = p.time();
        let dt = self.dt;
        let n_v = self.grid.n_v();
        self.transport_half(p, buf);
        self.check(p, "transport")?;
        let t_mid = t0 + 0.5 * dt;
        // Heun's method with the rates frozen at the midpoint; each stage is a forward Euler step
        p.values_mut().par_chunks_mut(n_v).enumerate().for_each_init(
            || (vec![0.0; n_v], vec![0.0; n_v], vec![0.0; n_v]),
            |(rhs, rate, stage), (i, cell)| {
                self.tumbling_cell(i, t_mid, cell, rhs, rate);
                for ((s, c), d) in stage.iter_mut().zip(cell.iter()).zip(rhs.iter()) {
                    *s = c + dt * d;
                }
                self.tumbling_cell(i, t_mid, stage, rhs, rate);
                for ((c, s), d) in cell.iter_mut().zip(stage.iter()).zip(rhs.iter()) {
                    *c = 0.5 * (*c + s + dt * d);
                }
            },
        );
        self.check(p, "tumbling")?;
        self.transport_half(p, buf);
        self.check(p, "transport")?;
        p.set_time(t0 + dt);
        Ok(())
    }

    /// Runs to `t_end`, calling `hook` at `t = 0` and after every output interval.
    pub fn run<F>(&self, p0: LimitDistribution, mut hook: F) -> Result<LimitDistribution>
    where
        F: FnMut(&LimitDistribution) -> Result<()>,
    {
        if !p0.grid().same_shape(&self.grid) {
            return Err(Error::config("initial data lives on a different grid"));
        }
        let cfg = self.cfg();
        let steps = cfg.steps()?;
        let every = cfg.output_every()?;
        let mut p = p0;
        let mut buf = Vec::new();
        hook(&p)?;
        for s in 1..=steps {
            self.step(&mut p, &mut buf)?;
            p.set_time(s as f64 * self.dt);
            if s % every == 0 {
                hook(&p)?;
            }
        }
        Ok(p)
    }
}
