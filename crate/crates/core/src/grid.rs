//! Phase-space grid over `(x, v, y)` and the distributions living on it.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::velocity::VelocitySet;

#[derive(Debug, Clone, PartialEq)]
pub struct PhaseGrid {
    length: f64,
    n_x: usize,
    velocities: VelocitySet,
    n_y: usize,
    y_max: f64,
}

impl PhaseGrid {
    pub fn new(length: f64, n_x: usize, velocities: VelocitySet, n_y: usize, y_max: f64) -> Result<Self> {
        if !(length > 0.0) || n_x == 0 {
            return Err(Error::config("grid needs length > 0 and n_x > 0"));
        }
        if !(y_max > 0.0) || n_y < 2 {
            return Err(Error::config("grid needs y_max > 0 and n_y >= 2"));
        }
        if velocities.dim() != 1 {
            return Err(Error::config("the grid solvers use a one-dimensional velocity set"));
        }
        Ok(Self {
            length,
            n_x,
            velocities,
            n_y,
            y_max,
        })
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn n_x(&self) -> usize {
        self.n_x
    }

    pub fn n_v(&self) -> usize {
        self.velocities.len()
    }

    pub fn n_y(&self) -> usize {
        self.n_y
    }

    pub fn y_max(&self) -> f64 {
        self.y_max
    }

    pub fn velocities(&self) -> &VelocitySet {
        &self.velocities
    }

    pub fn dx(&self) -> f64 {
        self.length / self.n_x as f64
    }

    pub fn dy(&self) -> f64 {
        2.0 * self.y_max / self.n_y as f64
    }

    pub fn x_center(&self, i: usize) -> f64 {
        (i as f64 + 0.5) * self.dx()
    }

    pub fn y_center(&self, k: usize) -> f64 {
        -self.y_max + (k as f64 + 0.5) * self.dy()
    }

    pub fn velocity(&self, j: usize) -> f64 {
        self.velocities.node(j)[0]
    }

    pub fn v_max(&self) -> f64 {
        self.velocities.max_speed()
    }

    /// Cell volume `Δx · w_v · Δy`.
    pub fn cell_volume(&self, j: usize) -> f64 {
        self.dx() * self.velocities.weight(j) * self.dy()
    }

    pub fn same_shape(&self, other: &PhaseGrid) -> bool {
        self == other
    }

    /// Point-sampled standard Gaussian at y-cell centers, normalized so `Σ 𝓜ₖ Δy = 1`.
    ///
    /// This is the exact fixed point of the Chang–Cooper Fokker–Planck discretization.
    pub fn discrete_maxwellian(&self) -> Vec<f64> {
        let raw: Vec<f64> = (0..self.n_y)
            .map(|k| {
                let y = self.y_center(k);
                (-0.5 * y * y).exp()
            })
            .collect();
        let z: f64 = raw.iter().sum::<f64>() * self.dy();
        raw.into_iter().map(|m| m / z).collect()
    }
}

/// Spatial profile of the initial density.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SpatialProfile {
    /// `cos⁴(π(x − c)/(2w))` on `|x − c| < w`.
    CosineBump { center: f64, half_width: f64 },
    /// Indicator of `[left, right]`.
    Box { left: f64, right: f64 },
    /// Constant over the whole domain.
    Uniform,
}

impl SpatialProfile {
    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            SpatialProfile::CosineBump { center, half_width } => {
                let u = (x - center) / half_width;
                if u.abs() >= 1.0 {
                    0.0
                } else {
                    (0.5 * std::f64::consts::PI * u).cos().powi(4)
                }
            }
            SpatialProfile::Box { left, right } => {
                if x >= left && x <= right {
                    1.0
                } else {
                    0.0
                }
            }
            SpatialProfile::Uniform => 1.0,
        }
    }

    /// Closed support `[lo, hi]`, or `None` when it is the whole line.
    pub fn support(&self) -> Option<(f64, f64)> {
        match *self {
            SpatialProfile::CosineBump { center, half_width } => Some((center - half_width, center + half_width)),
            SpatialProfile::Box { left, right } => Some((left, right)),
            SpatialProfile::Uniform => None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            SpatialProfile::CosineBump { half_width, .. } if !(half_width > 0.0) => {
                Err(Error::config("profile half width must be positive"))
            }
            SpatialProfile::Box { left, right } if !(right > left) => Err(Error::config("empty box profile")),
            _ => Ok(()),
        }
    }
}

/// Rescaled density `q(x, v, y)` stored as cell averages, `y` fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct GridDistribution {
    grid: Arc<PhaseGrid>,
    values: Vec<f64>,
    time: f64,
}

impl GridDistribution {
    pub fn zeros(grid: Arc<PhaseGrid>) -> Self {
        let len = grid.n_x() * grid.n_v() * grid.n_y();
        Self {
            grid,
            values: vec![0.0; len],
            time: 0.0,
        }
    }

    pub fn from_values(grid: Arc<PhaseGrid>, values: Vec<f64>, time: f64) -> Result<Self> {
        if values.len() != grid.n_x() * grid.n_v() * grid.n_y() {
            return Err(Error::config("value count does not match the grid"));
        }
        Ok(Self { grid, values, time })
    }

    /// `profile(x) · (1/|V|) · y_profile(y)` per cell, scaled to unit mass. No support checks.
    pub fn product(grid: Arc<PhaseGrid>, profile: &SpatialProfile, y_profile: &[f64]) -> Result<Self> {
        if y_profile.len() != grid.n_y() {
            return Err(Error::config("y profile length does not match the grid"));
        }
        let measure = grid.velocities().measure();
        let mut q = Self::zeros(grid.clone());
        let (n_v, n_y) = (grid.n_v(), grid.n_y());
        for i in 0..grid.n_x() {
            let px = profile.eval(grid.x_center(i));
            for j in 0..n_v {
                let base = (i * n_v + j) * n_y;
                for (k, &my) in y_profile.iter().enumerate() {
                    q.values[base + k] = px * my / measure;
                }
            }
        }
        let mass = q.mass();
        if !(mass > 0.0) {
            return Err(Error::config("initial profile has no mass on the grid"));
        }
        q.values.iter_mut().for_each(|v| *v /= mass);
        Ok(q)
    }

    /// Well-prepared initial data `profile(x) · uniform(v) · 𝓜(y)` with unit mass.
    ///
    /// The profile must sit at least `v_max · t_end` away from both ends of the domain so that
    /// nothing reaches the boundary before `t_end`.
    pub fn well_prepared(grid: Arc<PhaseGrid>, profile: &SpatialProfile, t_end: f64) -> Result<Self> {
        profile.validate()?;
        let margin = grid.v_max() * t_end;
        match profile.support() {
            Some((lo, hi)) if lo >= margin && hi <= grid.length() - margin => {}
            _ => {
                return Err(Error::config(format!(
                    "initial support must lie inside [{margin}, {}] to stay clear of the boundary up to t_end",
                    grid.length() - margin
                )))
            }
        }
        let m = grid.discrete_maxwellian();
        Self::product(grid, profile, &m)
    }

    pub fn grid(&self) -> &PhaseGrid {
        &self.grid
    }

    pub fn grid_arc(&self) -> &Arc<PhaseGrid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn set_time(&mut self, t: f64) {
        self.time = t;
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        (i * self.grid.n_v() + j) * self.grid.n_y() + k
    }

    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        self.values[self.index(i, j, k)]
    }

    /// The y-column at `(x-cell i, velocity j)`.
    pub fn column(&self, i: usize, j: usize) -> &[f64] {
        let n_y = self.grid.n_y();
        let start = self.index(i, j, 0);
        &self.values[start..start + n_y]
    }

    pub fn mass(&self) -> f64 {
        let g = &*self.grid;
        let (n_v, n_y) = (g.n_v(), g.n_y());
        let mut total = 0.0;
        for (c, col) in self.values.chunks_exact(n_y).enumerate() {
            let j = c % n_v;
            total += g.velocities().weight(j) * col.iter().sum::<f64>();
        }
        total * g.dx() * g.dy()
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Marginal over `y`: `q̄(x, v) = Σₖ q Δy`.
    pub fn marginal_y(&self) -> LimitDistribution {
        let dy = self.grid.dy();
        let values = self
            .values
            .chunks_exact(self.grid.n_y())
            .map(|col| col.iter().sum::<f64>() * dy)
            .collect();
        LimitDistribution {
            grid: self.grid.clone(),
            values,
            time: self.time,
        }
    }
}

/// Density `p̄(x, v)` of the limiting model, velocity fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct LimitDistribution {
    grid: Arc<PhaseGrid>,
    values: Vec<f64>,
    time: f64,
}

impl LimitDistribution {
    pub fn from_values(grid: Arc<PhaseGrid>, values: Vec<f64>, time: f64) -> Result<Self> {
        if values.len() != grid.n_x() * grid.n_v() {
            return Err(Error::config("value count does not match the (x, v) grid"));
        }
        Ok(Self { grid, values, time })
    }

    /// `profile(x) · uniform(v)` with unit mass.
    pub fn product(grid: Arc<PhaseGrid>, profile: &SpatialProfile) -> Result<Self> {
        let n_v = grid.n_v();
        let measure = grid.velocities().measure();
        let mut values = vec![0.0; grid.n_x() * n_v];
        for i in 0..grid.n_x() {
            let px = profile.eval(grid.x_center(i));
            for j in 0..n_v {
                values[i * n_v + j] = px / measure;
            }
        }
        let mut p = Self { grid, values, time: 0.0 };
        let mass = p.mass();
        if !(mass > 0.0) {
            return Err(Error::config("initial profile has no mass on the grid"));
        }
        p.values.iter_mut().for_each(|v| *v /= mass);
        Ok(p)
    }

    pub fn grid(&self) -> &PhaseGrid {
        &self.grid
    }

    pub fn grid_arc(&self) -> &Arc<PhaseGrid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn set_time(&mut self, t: f64) {
        self.time = t;
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.grid.n_v() + j]
    }

    pub fn mass(&self) -> f64 {
        let g = &*self.grid;
        let n_v = g.n_v();
        self.values
            .iter()
            .enumerate()
            .map(|(c, p)| g.velocities().weight(c % n_v) * p)
            .sum::<f64>()
            * g.dx()
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// `Σ |p − other| Δx w_v`.
    pub fn l1_distance(&self, other: &LimitDistribution) -> Result<f64> {
        if !self.grid.same_shape(&other.grid) {
            return Err(Error::config("L1 distance between distributions on different grids"));
        }
        let n_v = self.grid.n_v();
        let w = self.grid.velocities();
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .enumerate()
            .map(|(c, (a, b))| w.weight(c % n_v) * (a - b).abs())
            .sum::<f64>()
            * self.grid.dx())
    }

    /// `∫ |v|² p̄`.
    pub fn moment_v2(&self) -> f64 {
        let g = &*self.grid;
        let n_v = g.n_v();
        self.values
            .iter()
            .enumerate()
            .map(|(c, p)| {
                let j = c % n_v;
                g.velocities().weight(j) * g.velocity(j).powi(2) * p
            })
            .sum::<f64>()
            * g.dx()
    }

    /// `∫ x p̄`, the first spatial moment.
    pub fn mean_position(&self) -> f64 {
        let g = &*self.grid;
        let n_v = g.n_v();
        self.values
            .iter()
            .enumerate()
            .map(|(c, p)| g.velocities().weight(c % n_v) * g.x_center(c / n_v) * p)
            .sum::<f64>()
            * g.dx()
    }
}
