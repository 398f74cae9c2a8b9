//! Gaussian quadrature rules.
//!
//! Nodes are computed by Newton iteration on the three-term recurrences, which is
//! accurate to machine precision for the orders used here (up to a few hundred).

use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Gauss–Hermite rule in probabilist form: `integrate(f)` approximates
/// `∫ f(y) 𝓜(y) dy` with `𝓜` the standard Gaussian density.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussHermite {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussHermite {
    pub fn new(order: usize) -> Result<Self> {
        if order == 0 {
            return Err(Error::config("Gauss-Hermite order must be positive"));
        }
        let (x, w) = physicist_hermite(order)?;
        // ∫ f(y) e^{-y²/2}/√(2π) dy = (1/√π) ∫ f(√2 x) e^{-x²} dx
        let nodes = x.iter().map(|x| std::f64::consts::SQRT_2 * x).collect();
        let weights = w.iter().map(|w| w / PI.sqrt()).collect();
        Ok(Self { nodes, weights })
    }

    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn integrate<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&y, &w)| w * f(y))
            .sum()
    }
}

/// Physicist Gauss–Hermite nodes and weights for the weight `e^{-x²}`.
fn physicist_hermite(n: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    let pim4 = PI.powf(-0.25);
    let nf = n as f64;
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let half = n.div_ceil(2);
    let mut z = 0.0;
    for i in 0..half {
        z = match i {
            0 => (2.0 * nf + 1.0).sqrt() - 1.85575 * (2.0 * nf + 1.0).powf(-1.0 / 6.0),
            1 => z - 1.14 * nf.powf(0.426) / z,
            2 => 1.86 * z - 0.86 * x[0],
            3 => 1.91 * z - 0.91 * x[1],
            _ => 2.0 * z - x[i - 2],
        };
        let mut pp = 0.0;
        let mut converged = false;
        for _ in 0..100 {
            let mut p1 = pim4;
            let mut p2 = 0.0;
            for j in 0..n {
                let p3 = p2;
                p2 = p1;
                let jf = j as f64;
                p1 = z * (2.0 / (jf + 1.0)).sqrt() * p2 - (jf / (jf + 1.0)).sqrt() * p3;
            }
            pp = (2.0 * nf).sqrt() * p2;
            let z1 = z;
            z = z1 - p1 / pp;
            if (z - z1).abs() <= 1e-15 * z.abs().max(1.0) {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(Error::Numerical {
                message: format!("Gauss-Hermite node {i} of order {n} did not converge"),
                achieved: f64::NAN,
            });
        }
        x[i] = z;
        x[n - 1 - i] = -z;
        w[i] = 2.0 / (pp * pp);
        w[n - 1 - i] = w[i];
    }
    // ascending order
    x.reverse();
    w.reverse();
    Ok((x, w))
}

/// Gauss–Legendre rule on `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn new(order: usize) -> Self {
        assert!(order > 0, "Gauss-Legendre order must be positive");
        let n = order;
        let nf = n as f64;
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        for i in 0..n.div_ceil(2) {
            let mut z = (PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
            let mut pp;
            loop {
                let mut p1 = 1.0;
                let mut p2 = 0.0;
                for j in 1..=n {
                    let p3 = p2;
                    p2 = p1;
                    let jf = j as f64;
                    p1 = ((2.0 * jf - 1.0) * z * p2 - (jf - 1.0) * p3) / jf;
                }
                pp = nf * (z * p1 - p2) / (z * z - 1.0);
                let z1 = z;
                z = z1 - p1 / pp;
                if (z - z1).abs() <= 1e-15 {
                    break;
                }
            }
            nodes[i] = -z;
            nodes[n - 1 - i] = z;
            weights[i] = 2.0 / ((1.0 - z * z) * pp * pp);
            weights[n - 1 - i] = weights[i];
        }
        Self { nodes, weights }
    }

    pub fn integrate<F: Fn(f64) -> f64>(&self, a: f64, b: f64, f: F) -> f64 {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (b + a);
        half * self
            .nodes
            .iter()
            .zip(&self.weights)
            .map(|(&z, &w)| w * f(mid + half * z))
            .sum::<f64>()
    }
}

/// Adaptive bisection driven by a 10/20-point Gauss–Legendre pair.
///
/// A panel is accepted once the two rules agree to `rel_tol` times the running
/// total, apportioned by panel length. Fails with the achieved tolerance when
/// `max_depth` bisections do not suffice.
pub fn adaptive_gauss_legendre<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    rel_tol: f64,
    max_depth: u32,
) -> Result<f64> {
    if a == b {
        return Ok(0.0);
    }
    thread_local! {
        static RULES: (GaussLegendre, GaussLegendre) = (GaussLegendre::new(10), GaussLegendre::new(20));
    }
    RULES.with(|(coarse, fine)| {
        let length = b - a;
        let scale = fine.integrate(a, b, &f).abs().max(f64::MIN_POSITIVE);
        let mut total = 0.0;
        let mut worst = 0.0f64;
        let mut stack = vec![(a, b, 0u32)];
        while let Some((lo, hi, depth)) = stack.pop() {
            let c = coarse.integrate(lo, hi, &f);
            let g = fine.integrate(lo, hi, &f);
            let err = (g - c).abs();
            let allowed = rel_tol * scale * ((hi - lo) / length).abs() + 1e-300;
            if err <= allowed {
                total += g;
            } else if depth >= max_depth {
                worst = worst.max(err / (scale * ((hi - lo) / length).abs()));
                total += g;
            } else {
                let mid = 0.5 * (lo + hi);
                stack.push((mid, hi, depth + 1));
                stack.push((lo, mid, depth + 1));
            }
        }
        if worst > 0.0 {
            Err(Error::Numerical {
                message: "adaptive Gauss-Legendre reached maximum refinement".into(),
                achieved: worst,
            })
        } else {
            Ok(total)
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hermite_moments_are_exact() {
        let gh = GaussHermite::new(40).unwrap();
        assert!((gh.integrate(|_| 1.0) - 1.0).abs() < 1e-14);
        assert!(gh.integrate(|y| y).abs() < 1e-14);
        assert!((gh.integrate(|y| y * y) - 1.0).abs() < 1e-13);
        assert!((gh.integrate(|y| y.powi(4)) - 3.0).abs() < 1e-12);
        assert!((gh.integrate(|y| y.powi(6)) - 15.0).abs() < 1e-11);
        // E[cos Y] = e^{-1/2}
        assert!((gh.integrate(f64::cos) - (-0.5f64).exp()).abs() < 1e-14);
    }

    #[test]
    fn hermite_nodes_are_sorted_and_symmetric() {
        for n in [1, 2, 5, 20, 41, 80] {
            let gh = GaussHermite::new(n).unwrap();
            assert!(gh.nodes().windows(2).all(|p| p[0] < p[1]));
            for i in 0..n {
                assert!((gh.nodes()[i] + gh.nodes()[n - 1 - i]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn legendre_integrates_polynomials() {
        let gl = GaussLegendre::new(10);
        // degree 19 exact
        let exact = (3f64.powi(20) - 1.0) / 20.0;
        assert!((gl.integrate(1.0, 3.0, |x| x.powi(19)) / exact - 1.0).abs() < 1e-13);
    }

    #[test]
    fn adaptive_handles_sharp_decay() {
        let v = adaptive_gauss_legendre(|s| (-s).exp() * (3.0 * s).sin(), 0.0, 60.0, 1e-12, 40).unwrap();
        // ∫₀^∞ e^{-s} sin 3s ds = 3/10
        assert!((v - 0.3).abs() < 1e-11);
    }

    #[test]
    fn adaptive_reports_non_convergence() {
        let err = adaptive_gauss_legendre(|s| (1.0 / s).sin(), 1e-9, 1.0, 1e-14, 2).unwrap_err();
        assert!(matches!(err, Error::Numerical { .. }));
    }
}
