//! Solver for the rescaled kinetic equation
//!
//! ```text
//! ∂_t q + v ∂_x q − (1/ε) ∂_y [y q + ∂_y q] = Q̃[q]
//! Q̃[q] = ∫ Λ(y' − D_tN(v'), v, v') q(v', y') − Λ(y − D_tN(v), v', v) q(v, y) dv',
//! y' = y + (N(v) − N(v'))/ε
//! ```
//!
//! One step is `T(dt/2) · F(dt) · Q(dt) · T(dt/2)`: half transport, implicit Chang–Cooper
//! Fokker–Planck, explicit tumbling with a conservative shift remap, half transport.

use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fokker_planck::ChangCooperStep;
use crate::grid::{GridDistribution, PhaseGrid};
use crate::kernels::TumblingKernel;
use crate::signal::{AdaptedSignal, SignalSpec};
use crate::transport::{advect, TransportScheme};

/// Entries below this after a substep are reported as an instability.
pub const NEGATIVITY_TOL: f64 = -1e-14;

/// Largest admissible Courant number for the transport substep.
pub const MAX_COURANT: f64 = 0.9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    pub eps: f64,
    pub dt: f64,
    pub t_end: f64,
    pub transport: TransportScheme,
    pub output_interval: f64,
}

fn integer_ratio(num: f64, den: f64, what: &str) -> Result<usize> {
    let r = num / den;
    let n = r.round();
    if (r - n).abs() > 1e-9 * r.max(1.0) || n < 0.0 {
        return Err(Error::config(format!("{what} ({num}) is not an integer multiple of dt ({den})")));
    }
    Ok(n as usize)
}

impl SolverConfig {
    pub fn validate(&self, grid: &PhaseGrid) -> Result<()> {
        if !(self.eps > 0.0) || !(self.dt > 0.0) || !(self.t_end >= 0.0) {
            return Err(Error::config("solver needs eps > 0, dt > 0 and t_end >= 0"));
        }
        let courant = self.dt * grid.v_max() / grid.dx();
        if courant > MAX_COURANT {
            return Err(Error::config(format!(
                "CFL violated: dt·v_max/dx = {courant:.3} exceeds {MAX_COURANT}"
            )));
        }
        self.steps()?;
        self.output_every()?;
        Ok(())
    }

    pub fn steps(&self) -> Result<usize> {
        integer_ratio(self.t_end, self.dt, "t_end")
    }

    /// Steps between diagnostics outputs.
    pub fn output_every(&self) -> Result<usize> {
        let every = integer_ratio(self.output_interval, self.dt, "output interval")?.max(1);
        let steps = self.steps()?;
        if steps % every != 0 {
            return Err(Error::config("t_end is not a multiple of the output interval"));
        }
        Ok(every)
    }
}

/// Which parts of the splitting are active; everything by default.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Substeps {
    pub transport: bool,
    pub fokker_planck: bool,
    pub tumbling: bool,
}

impl Default for Substeps {
    fn default() -> Self {
        Self {
            transport: true,
            fokker_planck: true,
            tumbling: true,
        }
    }
}

pub struct GridSolver {
    grid: Arc<PhaseGrid>,
    cfg: SolverConfig,
    signal: SignalSpec,
    adapted: AdaptedSignal,
    kernel: TumblingKernel,
    fokker_planck: ChangCooperStep,
    substeps: Substeps,
    half_courant: Vec<f64>,
}

impl GridSolver {
    pub fn new(
        grid: Arc<PhaseGrid>,
        cfg: SolverConfig,
        signal: SignalSpec,
        adapted: AdaptedSignal,
        kernel: TumblingKernel,
    ) -> Result<Self> {
        cfg.validate(&grid)?;
        if (adapted.eps() - cfg.eps).abs() > 0.0 {
            return Err(Error::config("adapted signal and solver use different eps"));
        }
        if kernel.velocities() != grid.velocities() {
            return Err(Error::config("kernel and grid use different velocity sets"));
        }
        if signal.dim() != 1 {
            return Err(Error::config("the grid solver is one-dimensional"));
        }
        let fokker_planck = ChangCooperStep::new(grid.n_y(), grid.y_max(), cfg.dt / cfg.eps);
        let half_courant = (0..grid.n_v())
            .map(|j| 0.5 * cfg.dt * grid.velocity(j) / grid.dx())
            .collect();
        Ok(Self {
            grid,
            cfg,
            signal,
            adapted,
            kernel,
            fokker_planck,
            substeps: Substeps::default(),
            half_courant,
        })
    }

    pub fn with_substeps(mut self, substeps: Substeps) -> Self {
        self.substeps = substeps;
        self
    }

    pub fn config(&self) -> &SolverConfig {
        &self.cfg
    }

    pub fn grid(&self) -> &Arc<PhaseGrid> {
        &self.grid
    }

    pub fn kernel(&self) -> &TumblingKernel {
        &self.kernel
    }

    pub fn signal(&self) -> &SignalSpec {
        &self.signal
    }

    fn check(&self, q: &GridDistribution, substep: &'static str) -> Result<()> {
        let min = q.min_value();
        if min < NEGATIVITY_TOL || min.is_nan() {
            return Err(Error::Instability {
                substep,
                time: q.time(),
                value: min,
            });
        }
        Ok(())
    }

    fn transport_half(&self, q: &mut GridDistribution, buf: &mut Vec<f64>) {
        let g = &*self.grid;
        buf.resize(q.values().len(), 0.0);
        advect(
            self.cfg.transport,
            q.values(),
            buf,
            g.n_x(),
            g.n_v(),
            g.n_y(),
            &self.half_courant,
        );
        q.values_mut().copy_from_slice(buf);
    }

    fn fokker_planck_step(&self, q: &mut GridDistribution) {
        let n_y = self.grid.n_y();
        q.values_mut()
            .par_chunks_mut(n_y)
            .for_each(|col| self.fokker_planck.apply(col));
    }

    /// `N` and `D_tN` at every `(x-cell, velocity)`, velocity fastest.
    fn adapted_tables(&self, t: f64) -> Result<(Vec<f64>, Vec<f64>)> {
        let g = &*self.grid;
        let n_v = g.n_v();
        let pairs: Vec<Result<(f64, f64)>> = (0..g.n_x() * n_v)
            .into_par_iter()
            .map(|c| {
                let x = [g.x_center(c / n_v)];
                let v = [g.velocity(c % n_v)];
                let n = self.adapted.value(&self.signal, t, &x, &v)?;
                let dtn = self.adapted.path_derivative(&self.signal, t, &x, &v)?;
                Ok((n, dtn))
            })
            .collect();
        let mut n = Vec::with_capacity(pairs.len());
        let mut dtn = Vec::with_capacity(pairs.len());
        for p in pairs {
            let (a, b) = p?;
            n.push(a);
            dtn.push(b);
        }
        Ok((n, dtn))
    }

    /// Writes `Q̃[q]` for one x-cell into `rhs`.
    fn tumbling_cell(&self, cell: &[f64], n: &[f64], dtn: &[f64], rhs: &mut [f64], flux: &mut [f64], shifted: &mut [f64]) {
        let g = &*self.grid;
        let (n_v, n_y) = (g.n_v(), g.n_y());
        let dy = g.dy();
        let response = self.kernel.response();
        let lam = self.kernel.base_rate();
        let eps = self.cfg.eps;
        // outgoing flux density g(y − D_tN(v)) q(v, y)
        for j in 0..n_v {
            for k in 0..n_y {
                let u = g.y_center(k) - dtn[j];
                flux[j * n_y + k] = response.eval(u) * cell[j * n_y + k];
            }
        }
        for j in 0..n_v {
            let out_rate: f64 = (0..n_v)
                .map(|w| g.velocities().weight(w) * self.kernel.redistribution(w, j))
                .sum::<f64>()
                * lam;
            let dst = &mut rhs[j * n_y..(j + 1) * n_y];
            for k in 0..n_y {
                dst[k] = -out_rate * flux[j * n_y + k];
            }
            for src in 0..n_v {
                let coef = lam * g.velocities().weight(src) * self.kernel.redistribution(j, src);
                let f = &flux[src * n_y..(src + 1) * n_y];
                let shift = (n[j] - n[src]) / eps;
                remap_shift(f, shift / dy, shifted);
                for k in 0..n_y {
                    dst[k] += coef * shifted[k];
                }
            }
        }
    }

    /// The tumbling operator `Q̃[q]` evaluated at time `t`.
    pub fn tumbling_rhs(&self, q: &GridDistribution, t: f64) -> Result<GridDistribution> {
        let g = &*self.grid;
        let block = g.n_v() * g.n_y();
        let (n, dtn) = self.adapted_tables(t)?;
        let n_v = g.n_v();
        let mut rhs = GridDistribution::zeros(self.grid.clone());
        rhs.set_time(t);
        rhs.values_mut()
            .par_chunks_mut(block)
            .zip(q.values().par_chunks(block))
            .enumerate()
            .for_each_init(
                || (vec![0.0; block], vec![0.0; g.n_y()]),
                |(flux, shifted), (i, (dst, cell))| {
                    let r = i * n_v..(i + 1) * n_v;
                    self.tumbling_cell(cell, &n[r.clone()], &dtn[r], dst, flux, shifted);
                },
            );
        Ok(rhs)
    }

    /// Heun's method with `N`, `D_tN` frozen at the midpoint, so each stage is a forward Euler step.
    fn tumbling_step(&self, q: &mut GridDistribution, t_mid: f64) -> Result<()> {
        let g = &*self.grid;
        let block = g.n_v() * g.n_y();
        let (n, dtn) = self.adapted_tables(t_mid)?;
        let n_v = g.n_v();
        let dt = self.cfg.dt;
        q.values_mut().par_chunks_mut(block).enumerate().for_each_init(
            || (vec![0.0; block], vec![0.0; block], vec![0.0; block], vec![0.0; g.n_y()]),
            |(rhs, stage, flux, shifted), (i, cell)| {
                let r = i * n_v..(i + 1) * n_v;
                self.tumbling_cell(cell, &n[r.clone()], &dtn[r.clone()], rhs, flux, shifted);
                for ((s, c), d) in stage.iter_mut().zip(cell.iter()).zip(rhs.iter()) {
                    *s = c + dt * d;
                }
                self.tumbling_cell(stage, &n[r.clone()], &dtn[r], rhs, flux, shifted);
                for ((c, s), d) in cell.iter_mut().zip(stage.iter()).zip(rhs.iter()) {
                    *c = 0.5 * (*c + s + dt * d);
                }
            },
        );
        Ok(())
    }

    /// Advances `q` by one time step.
    pub fn step(&self, q: &mut GridDistribution, buf: &mut Vec<f64>) -> Result<()> {
        let t0 = q.time();
        let dt = self.cfg.dt;
        if self.substeps.transport {
            self.transport_half(q, buf);
            self.check(q, "transport")?;
        }
        if self.substeps.fokker_planck {
            self.fokker_planck_step(q);
            self.check(q, "fokker-planck")?;
        }
        if self.substeps.tumbling {
            self.tumbling_step(q, t0 + 0.5 * dt)?;
            self.check(q, "tumbling")?;
        }
        if self.substeps.transport {
            self.transport_half(q, buf);
            self.check(q, "transport")?;
        }
        q.set_time(t0 + dt);
        Ok(())
    }

    /// Runs to `t_end`, calling `hook` at `t = 0` and after every output interval.
    pub fn run<F>(&self, q0: GridDistribution, mut hook: F) -> Result<GridDistribution>
    where
        F: FnMut(&GridDistribution) -> Result<()>,
    {
        if !q0.grid().same_shape(&self.grid) {
            return Err(Error::config("initial data lives on a different grid"));
        }
        let steps = self.cfg.steps()?;
        let every = self.cfg.output_every()?;
        let mut q = q0;
        let mut buf = Vec::new();
        hook(&q)?;
        for s in 1..=steps {
            self.step(&mut q, &mut buf)?;
            // pin the clock to the step count so output times do not drift
            q.set_time(s as f64 * self.cfg.dt);
            if s % every == 0 {
                hook(&q)?;
            }
        }
        Ok(q)
    }
}

/// Cell averages of `f(· + shift·Δy)` for a piecewise-constant `f`, with mass lost past the
/// ends of the y-range restored by rescaling.
pub fn remap_shift(f: &[f64], shift_cells: f64, out: &mut [f64]) {
    let n = f.len();
    if shift_cells == 0.0 {
        out.copy_from_slice(f);
        return;
    }
    let base = shift_cells.floor();
    let theta = shift_cells - base;
    let base = base as isize;
    let at = |j: isize| -> f64 {
        if j < 0 || j >= n as isize {
            0.0
        } else {
            f[j as usize]
        }
    };
    let mut total_out = 0.0;
    for (k, o) in out.iter_mut().enumerate() {
        let j = k as isize + base;
        *o = (1.0 - theta) * at(j) + theta * at(j + 1);
        total_out += *o;
    }
    let total_in: f64 = f.iter().sum();
    if total_out > 0.0 && total_out != total_in {
        let scale = total_in / total_out;
        out.iter_mut().for_each(|o| *o *= scale);
    }
}
