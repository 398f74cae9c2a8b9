//! Monte Carlo simulation of the velocity-jump process with methylation.
//!
//! Each particle carries a position, a velocity node and a methylation level `m`. Between
//! tumbles it moves freely while `m` follows the Ornstein–Uhlenbeck dynamics
//! `dm = −(m − M)/ε dt + √(2ε) dW`. Tumbles are simulated by thinning against the stored
//! outgoing-rate bound of the kernel.
//!
//! Random numbers come from ChaCha8 streams, one per block of [`BLOCK`] particles, keyed by the
//! master seed and the block index. Results do not depend on the number of worker threads.

use std::io::{Read, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Exp1, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::{GridDistribution, PhaseGrid, SpatialProfile};
use crate::kernels::TumblingKernel;
use crate::signal::{AdaptedSignal, SignalSpec};
use crate::velocity::VelocitySet;

/// Particles sharing one random stream.
pub const BLOCK: usize = 4096;

/// Methylation substeps per unit of `ε`.
pub const SUBSTEPS_PER_EPS: f64 = 20.0;

/// CSV export is refused above this many particles.
pub const CSV_EXPORT_LIMIT: usize = 10_000;

/// Fraction of particles outside the y-range that triggers the warning flag.
pub const OUT_OF_RANGE_WARNING: f64 = 0.01;

const CHECKPOINT_MAGIC: &[u8; 8] = b"CHEMOPT1";

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Particle {
    pub x: [f64; 2],
    pub v: u32,
    pub m: f64,
    /// Absolute time of the next thinning candidate.
    pub next_candidate: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TumbleEvent {
    pub particle: usize,
    pub time: f64,
    pub from: u32,
    pub to: u32,
}

/// Which parts of the dynamics are active; everything by default.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Dynamics {
    pub flight: bool,
    pub methylation: bool,
    pub tumbling: bool,
}

impl Default for Dynamics {
    fn default() -> Self {
        Self {
            flight: true,
            methylation: true,
            tumbling: true,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ParticleEnsemble {
    particles: Vec<Particle>,
    streams: Vec<ChaCha8Rng>,
    master_seed: u64,
    time: f64,
    eps: f64,
    dim: usize,
}

fn stream(seed: u64, block: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(block as u64);
    rng
}

/// Inverse CDF of a spatial profile on `[0, length]`, tabulated on a fine grid.
struct ProfileSampler {
    lo: f64,
    h: f64,
    cdf: Vec<f64>,
}

impl ProfileSampler {
    const CELLS: usize = 8192;

    fn new(profile: &SpatialProfile, length: f64) -> Result<Self> {
        profile.validate()?;
        let (lo, hi) = profile.support().unwrap_or((0.0, length));
        let (lo, hi) = (lo.max(0.0), hi.min(length));
        if !(hi > lo) {
            return Err(Error::config("spatial profile has empty support inside the domain"));
        }
        let h = (hi - lo) / Self::CELLS as f64;
        let mut cdf = Vec::with_capacity(Self::CELLS + 1);
        cdf.push(0.0);
        let mut acc = 0.0;
        // Simpson on each cell
        for i in 0..Self::CELLS {
            let a = lo + h * i as f64;
            acc += h / 6.0 * (profile.eval(a) + 4.0 * profile.eval(a + 0.5 * h) + profile.eval(a + h));
            cdf.push(acc);
        }
        if !(acc > 0.0) {
            return Err(Error::config("spatial profile has zero mass"));
        }
        cdf.iter_mut().for_each(|c| *c /= acc);
        Ok(Self { lo, h, cdf })
    }

    fn sample(&self, u: f64) -> f64 {
        let i = self.cdf.partition_point(|c| *c <= u).clamp(1, self.cdf.len() - 1) - 1;
        let (a, b) = (self.cdf[i], self.cdf[i + 1]);
        let theta = if b > a { (u - a) / (b - a) } else { 0.5 };
        self.lo + self.h * (i as f64 + theta)
    }
}

fn categorical(cdf: &[f64], u: f64) -> usize {
    cdf.partition_point(|c| *c <= u).min(cdf.len() - 1)
}

impl ParticleEnsemble {
    pub fn from_particles(particles: Vec<Particle>, dim: usize, eps: f64, time: f64, master_seed: u64) -> Result<Self> {
        if particles.is_empty() {
            return Err(Error::config("an ensemble needs at least one particle"));
        }
        if !(eps > 0.0) || !(dim == 1 || dim == 2) {
            return Err(Error::config("ensemble needs eps > 0 and dimension 1 or 2"));
        }
        let blocks = particles.len().div_ceil(BLOCK);
        Ok(Self {
            particles,
            streams: (0..blocks).map(|b| stream(master_seed, b)).collect(),
            master_seed,
            time,
            eps,
            dim,
        })
    }

    /// Well-prepared initial data: `x` from the profile (each coordinate independently when
    /// `d = 2`), `v` with probability proportional to its weight, `m = M(0, x) + ε ξ`.
    pub fn sample_well_prepared(
        count: usize,
        profile: &SpatialProfile,
        signal: &SignalSpec,
        kernel: &TumblingKernel,
        eps: f64,
        seed: u64,
    ) -> Result<Self> {
        if count == 0 {
            return Err(Error::config("an ensemble needs at least one particle"));
        }
        let velocities = kernel.velocities();
        if velocities.dim() != signal.dim() {
            return Err(Error::config("velocity set and signal have different dimensions"));
        }
        let sampler = ProfileSampler::new(profile, signal.domain_length())?;
        let v_cdf = weight_cdf(velocities.weights());
        let majorant = kernel.bounds().outgoing_rate;
        let dim = signal.dim();
        let mut ens = Self::from_particles(
            vec![
                Particle {
                    x: [0.0; 2],
                    v: 0,
                    m: 0.0,
                    next_candidate: 0.0,
                };
                count
            ],
            dim,
            eps,
            0.0,
            seed,
        )?;
        ens.particles
            .par_chunks_mut(BLOCK)
            .zip(ens.streams.par_iter_mut())
            .for_each(|(chunk, rng)| {
                for p in chunk {
                    for c in 0..dim {
                        p.x[c] = sampler.sample(rng.random::<f64>());
                    }
                    p.v = categorical(&v_cdf, rng.random::<f64>()) as u32;
                    let xi: f64 = rng.sample(StandardNormal);
                    p.m = signal.eval(0.0, &p.x[..dim]) + eps * xi;
                    p.next_candidate = if majorant > 0.0 {
                        rng.sample::<f64, _>(Exp1) / majorant
                    } else {
                        f64::INFINITY
                    };
                }
            });
        Ok(ens)
    }

    pub fn particles(&self) -> &[Particle] {
        &self.particles
    }

    pub fn len(&self) -> usize {
        self.particles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.particles.is_empty()
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    /// Advances by `dt_macro`, a whole number of substeps `ε/20`. Tumbles are appended to
    /// `events` in particle order when given.
    pub fn evolve(
        &mut self,
        dt_macro: f64,
        signal: &SignalSpec,
        kernel: &TumblingKernel,
        dynamics: Dynamics,
        events: Option<&mut Vec<TumbleEvent>>,
    ) -> Result<()> {
        let velocities = kernel.velocities();
        if velocities.dim() != self.dim || signal.dim() != self.dim {
            return Err(Error::config("ensemble, kernel and signal have different dimensions"));
        }
        let dt = self.eps / SUBSTEPS_PER_EPS;
        let ratio = dt_macro / dt;
        let substeps = ratio.round();
        if (ratio - substeps).abs() > 1e-9 * ratio.max(1.0) || substeps < 0.0 {
            return Err(Error::config(format!(
                "macro step {dt_macro} is not a multiple of the substep ε/20 = {dt}"
            )));
        }
        let substeps = substeps as usize;
        let majorant = kernel.bounds().outgoing_rate;
        if dynamics.tumbling && !majorant.is_finite() {
            return Err(Error::BoundViolation("thinning needs a finite outgoing-rate bound".into()));
        }
        let n = velocities.len();
        let slices: Vec<Vec<f64>> = (0..n)
            .map(|old| {
                let w: Vec<f64> = (0..n)
                    .map(|new| velocities.weight(new) * kernel.redistribution(new, old))
                    .collect();
                weight_cdf(&w)
            })
            .collect();
        let ctx = Stepper {
            eps: self.eps,
            dt,
            t0: self.time,
            substeps,
            dim: self.dim,
            majorant,
            signal,
            kernel,
            velocities,
            slices: &slices,
            dynamics,
            record: events.is_some(),
        };
        let results: Vec<Result<Vec<TumbleEvent>>> = self
            .particles
            .par_chunks_mut(BLOCK)
            .zip(self.streams.par_iter_mut())
            .enumerate()
            .map(|(b, (chunk, rng))| ctx.run_block(b * BLOCK, chunk, rng))
            .collect();
        let mut log = Vec::new();
        for r in results {
            let evs = r?;
            if ctx.record {
                log.extend(evs);
            }
        }
        if let Some(out) = events {
            out.extend(log);
        }
        self.time = self.time + substeps as f64 * dt;
        Ok(())
    }

    /// Bins particles in `(x, v, y)` with `y = (m − N(t, x, v))/ε`.
    pub fn rescaled_histogram(
        &self,
        grid: std::sync::Arc<PhaseGrid>,
        signal: &SignalSpec,
        adapted: &AdaptedSignal,
    ) -> Result<RescaledHistogram> {
        if self.dim != 1 {
            return Err(Error::config("rescaled histograms are one-dimensional"));
        }
        if (adapted.eps() - self.eps).abs() > 0.0 {
            return Err(Error::config("adapted signal and ensemble use different eps"));
        }
        let g = grid.clone();
        let (n_x, n_v, n_y) = (g.n_x(), g.n_v(), g.n_y());
        let t = self.time;
        let cells: Vec<Result<Option<usize>>> = self
            .particles
            .par_iter()
            .map(|p| {
                let j = p.v as usize;
                if j >= n_v {
                    return Err(Error::config("particle velocity index outside the grid's velocity set"));
                }
                let xf = p.x[0] / g.dx();
                if !(xf >= 0.0 && xf < n_x as f64) {
                    return Ok(None);
                }
                let n = adapted.value(signal, t, &p.x[..1], &[g.velocity(j)])?;
                let y = (p.m - n) / self.eps;
                let yf = (y + g.y_max()) / g.dy();
                if !(yf >= 0.0 && yf < n_y as f64) {
                    return Ok(None);
                }
                Ok(Some(((xf as usize) * n_v + j) * n_y + yf as usize))
            })
            .collect();
        let mut counts = vec![0u64; n_x * n_v * n_y];
        let mut outside = 0u64;
        for c in cells {
            match c? {
                Some(idx) => counts[idx] += 1,
                None => outside += 1,
            }
        }
        let total = self.particles.len() as f64;
        let mut values = vec![0.0; counts.len()];
        for (idx, c) in counts.iter().enumerate() {
            if *c > 0 {
                let j = (idx / n_y) % n_v;
                values[idx] = *c as f64 / (total * g.cell_volume(j));
            }
        }
        let density = GridDistribution::from_values(grid, values, t)?;
        let out_of_range = outside as f64 / total;
        Ok(RescaledHistogram {
            density,
            counts,
            out_of_range,
            warning: out_of_range > OUT_OF_RANGE_WARNING,
        })
    }

    /// Little-endian binary checkpoint, including the random stream positions.
    pub fn write_checkpoint<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(CHECKPOINT_MAGIC)?;
        w.write_all(&(self.particles.len() as u64).to_le_bytes())?;
        w.write_all(&(self.dim as u32).to_le_bytes())?;
        w.write_all(&self.time.to_le_bytes())?;
        w.write_all(&self.eps.to_le_bytes())?;
        w.write_all(&self.master_seed.to_le_bytes())?;
        for p in &self.particles {
            w.write_all(&p.x[0].to_le_bytes())?;
            w.write_all(&p.x[1].to_le_bytes())?;
            w.write_all(&p.v.to_le_bytes())?;
            w.write_all(&p.m.to_le_bytes())?;
            w.write_all(&p.next_candidate.to_le_bytes())?;
        }
        for s in &self.streams {
            w.write_all(&s.get_word_pos().to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_checkpoint<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != CHECKPOINT_MAGIC {
            return Err(Error::config("not a particle checkpoint"));
        }
        let count = read_u64(&mut r)? as usize;
        let dim = read_u32(&mut r)? as usize;
        let time = read_f64(&mut r)?;
        let eps = read_f64(&mut r)?;
        let seed = read_u64(&mut r)?;
        let mut particles = Vec::with_capacity(count.min(1 << 24));
        for _ in 0..count {
            let x0 = read_f64(&mut r)?;
            let x1 = read_f64(&mut r)?;
            let v = read_u32(&mut r)?;
            let m = read_f64(&mut r)?;
            let next_candidate = read_f64(&mut r)?;
            particles.push(Particle {
                x: [x0, x1],
                v,
                m,
                next_candidate,
            });
        }
        let mut ens = Self::from_particles(particles, dim, eps, time, seed)?;
        for s in ens.streams.iter_mut() {
            let mut buf = [0u8; 16];
            r.read_exact(&mut buf)?;
            s.set_word_pos(u128::from_le_bytes(buf));
        }
        Ok(ens)
    }

    /// Per-particle CSV for small ensembles.
    pub fn write_csv<W: Write>(&self, mut w: W, velocities: &VelocitySet) -> Result<()> {
        if self.particles.len() > CSV_EXPORT_LIMIT {
            return Err(Error::config(format!(
                "CSV export is limited to {CSV_EXPORT_LIMIT} particles, ensemble has {}",
                self.particles.len()
            )));
        }
        if self.dim == 1 {
            writeln!(w, "index,x,v_index,v,m")?;
        } else {
            writeln!(w, "index,x1,x2,v_index,v1,v2,m")?;
        }
        for (i, p) in self.particles.iter().enumerate() {
            let v = velocities.node(p.v as usize);
            if self.dim == 1 {
                writeln!(w, "{i},{:.17e},{},{:.17e},{:.17e}", p.x[0], p.v, v[0], p.m)?;
            } else {
                writeln!(
                    w,
                    "{i},{:.17e},{:.17e},{},{:.17e},{:.17e},{:.17e}",
                    p.x[0], p.x[1], p.v, v[0], v[1], p.m
                )?;
            }
        }
        Ok(())
    }
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_f64<R: Read>(r: &mut R) -> Result<f64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(f64::from_le_bytes(b))
}

fn weight_cdf(w: &[f64]) -> Vec<f64> {
    let total: f64 = w.iter().sum();
    let mut acc = 0.0;
    let mut cdf: Vec<f64> = w
        .iter()
        .map(|x| {
            acc += x;
            acc / total
        })
        .collect();
    if let Some(last) = cdf.last_mut() {
        *last = 1.0;
    }
    cdf
}

struct Stepper<'a> {
    eps: f64,
    dt: f64,
    t0: f64,
    substeps: usize,
    dim: usize,
    majorant: f64,
    signal: &'a SignalSpec,
    kernel: &'a TumblingKernel,
    velocities: &'a VelocitySet,
    slices: &'a [Vec<f64>],
    dynamics: Dynamics,
    record: bool,
}

impl Stepper<'_> {
    fn run_block(&self, offset: usize, chunk: &mut [Particle], rng: &mut ChaCha8Rng) -> Result<Vec<TumbleEvent>> {
        let mut events = Vec::new();
        let decay = (-self.dt / self.eps).exp();
        let noise = self.eps * (-(-2.0 * self.dt / self.eps).exp_m1()).sqrt();
        let d = self.dim;
        for (pi, p) in chunk.iter_mut().enumerate() {
            for s in 0..self.substeps {
                let t = self.t0 + s as f64 * self.dt;
                let t_end = t + self.dt;
                let v = self.velocities.node(p.v as usize);
                let m_old = p.m;
                if self.dynamics.methylation {
                    let mut mid = [0.0; 2];
                    for c in 0..d {
                        mid[c] = p.x[c] + if self.dynamics.flight { 0.5 * self.dt * v[c] } else { 0.0 };
                    }
                    let target = self.signal.eval(t + 0.5 * self.dt, &mid[..d]);
                    let xi: f64 = rng.sample(StandardNormal);
                    p.m = target + (m_old - target) * decay + noise * xi;
                }
                let m_new = p.m;
                let mut clock = t;
                while self.dynamics.tumbling && p.next_candidate < t_end {
                    let tau = p.next_candidate.max(t);
                    if self.dynamics.flight {
                        let v = self.velocities.node(p.v as usize);
                        for c in 0..d {
                            p.x[c] += v[c] * (tau - clock);
                        }
                    }
                    clock = tau;
                    let m_tau = m_old + (m_new - m_old) * (tau - t) / self.dt;
                    let u = (m_tau - self.signal.eval(tau, &p.x[..d])) / self.eps;
                    let rate = self.kernel.total_rate(u, p.v as usize);
                    if rate > self.majorant * (1.0 + 1e-12) {
                        return Err(Error::BoundViolation(format!(
                            "tumble rate {rate} exceeds the thinning bound {}",
                            self.majorant
                        )));
                    }
                    if rng.random::<f64>() * self.majorant < rate {
                        let from = p.v;
                        p.v = categorical(&self.slices[from as usize], rng.random::<f64>()) as u32;
                        if self.record {
                            events.push(TumbleEvent {
                                particle: offset + pi,
                                time: tau,
                                from,
                                to: p.v,
                            });
                        }
                    }
                    p.next_candidate = tau + rng.sample::<f64, _>(Exp1) / self.majorant;
                }
                if self.dynamics.flight {
                    let v = self.velocities.node(p.v as usize);
                    for c in 0..d {
                        p.x[c] += v[c] * (t_end - clock);
                    }
                }
            }
        }
        Ok(events)
    }
}

#[derive(Debug, Clone)]
pub struct RescaledHistogram {
    pub density: GridDistribution,
    pub counts: Vec<u64>,
    /// Fraction of particles that fell outside the `(x, y)` range.
    pub out_of_range: f64,
    pub warning: bool,
}
