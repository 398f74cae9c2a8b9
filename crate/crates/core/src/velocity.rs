//! Discrete velocity sets standing in for the continuous velocity space `V`.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct VelocitySet {
    dim: usize,
    nodes: Vec<[f64; 2]>,
    weights: Vec<f64>,
}

impl VelocitySet {
    /// `count` equally spaced nodes on `[−v_max, v_max]` with trapezoid weights.
    pub fn line(count: usize, v_max: f64) -> Result<Self> {
        if count < 2 {
            return Err(Error::config("a velocity line needs at least two nodes"));
        }
        if !(v_max > 0.0 && v_max.is_finite()) {
            return Err(Error::config("v_max must be positive"));
        }
        let h = 2.0 * v_max / (count - 1) as f64;
        let nodes = (0..count).map(|i| [-v_max + h * i as f64, 0.0]).collect();
        let weights = (0..count)
            .map(|i| if i == 0 || i == count - 1 { 0.5 * h } else { h })
            .collect();
        Ok(Self {
            dim: 1,
            nodes,
            weights,
        })
    }

    /// `count` directions of speed `speed` on a circle in the plane; weights sum to the circumference.
    pub fn circle(count: usize, speed: f64) -> Result<Self> {
        if count < 2 || !(speed > 0.0) {
            return Err(Error::config("a velocity circle needs at least two nodes and speed > 0"));
        }
        let nodes = (0..count)
            .map(|i| {
                let a = 2.0 * std::f64::consts::PI * i as f64 / count as f64;
                [speed * a.cos(), speed * a.sin()]
            })
            .collect();
        let w = 2.0 * std::f64::consts::PI * speed / count as f64;
        Ok(Self {
            dim: 2,
            nodes,
            weights: vec![w; count],
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Velocity of node `i` as a slice of length `dim`.
    pub fn node(&self, i: usize) -> &[f64] {
        &self.nodes[i][..self.dim]
    }

    pub fn weight(&self, i: usize) -> f64 {
        self.weights[i]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Total measure `Σ wᵢ`.
    pub fn measure(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn speed_sq(&self, i: usize) -> f64 {
        self.node(i).iter().map(|c| c * c).sum()
    }

    pub fn max_speed(&self) -> f64 {
        (0..self.len())
            .map(|i| self.speed_sq(i).sqrt())
            .fold(0.0, f64::max)
    }
}
