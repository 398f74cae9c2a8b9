//! Implicit Chang–Cooper step for `∂_t q = (1/ε) ∂_y [y q + ∂_y q]` on a truncated y-grid.
//!
//! The face flux is written with the Bernoulli function `B(z) = z/(eᶻ − 1)`:
//!
//! ```text
//! G_{k+½} = (B(−w) q_{k+1} − B(w) q_k) / Δy,   w = y_{k+½} Δy
//! ```
//!
//! which vanishes exactly when `q_{k+1}/q_k = e^{−w}`, i.e. on the point-sampled Gaussian.
//! No-flux conditions hold at `±y_max`. The implicit matrix is an M-matrix, so the step is
//! positive and conservative for any `dt/ε`.

/// `z/(eᶻ − 1)`, continuous at 0.
pub fn bernoulli(z: f64) -> f64 {
    if z.abs() < 1e-5 {
        1.0 - 0.5 * z + z * z / 12.0
    } else {
        z / z.exp_m1()
    }
}

/// Pre-factored tridiagonal system `(I − τA) q⁺ = q` for fixed `τ = dt/ε`.
#[derive(Debug, Clone)]
pub struct ChangCooperStep {
    lower: Vec<f64>,
    /// Modified upper diagonal of the Thomas elimination.
    upper_mod: Vec<f64>,
    /// Reciprocal pivots.
    inv_pivot: Vec<f64>,
}

impl ChangCooperStep {
    /// Cells are uniform on `[−y_max, y_max]`; `tau = dt/ε`.
    pub fn new(n_y: usize, y_max: f64, tau: f64) -> Self {
        let dy = 2.0 * y_max / n_y as f64;
        let c = tau / (dy * dy);
        let face = |k: usize| -y_max + (k as f64 + 1.0) * dy;
        let mut lower = vec![0.0; n_y];
        let mut diag = vec![1.0; n_y];
        let mut upper = vec![0.0; n_y];
        for k in 0..n_y - 1 {
            let w = face(k) * dy;
            let bp = bernoulli(w);
            let bm = bernoulli(-w);
            // flux G through face k couples q_k (−B(w)) and q_{k+1} (+B(−w))
            diag[k] += c * bp;
            upper[k] = -c * bm;
            diag[k + 1] += c * bm;
            lower[k + 1] = -c * bp;
        }
        let mut upper_mod = vec![0.0; n_y];
        let mut inv_pivot = vec![0.0; n_y];
        let mut prev = 0.0;
        for k in 0..n_y {
            let pivot = diag[k] - lower[k] * prev;
            inv_pivot[k] = 1.0 / pivot;
            prev = upper[k] * inv_pivot[k];
            upper_mod[k] = prev;
        }
        Self {
            lower,
            upper_mod,
            inv_pivot,
        }
    }

    /// Solves in place for one y-column.
    pub fn apply(&self, column: &mut [f64]) {
        let n = column.len();
        debug_assert_eq!(n, self.inv_pivot.len());
        let mut prev = 0.0;
        for k in 0..n {
            let v = (column[k] - self.lower[k] * prev) * self.inv_pivot[k];
            column[k] = v;
            prev = v;
        }
        for k in (0..n - 1).rev() {
            column[k] -= self.upper_mod[k] * column[k + 1];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gaussian(n_y: usize, y_max: f64) -> Vec<f64> {
        let dy = 2.0 * y_max / n_y as f64;
        let raw: Vec<f64> = (0..n_y)
            .map(|k| {
                let y = -y_max + (k as f64 + 0.5) * dy;
                (-0.5 * y * y).exp()
            })
            .collect();
        let z: f64 = raw.iter().sum::<f64>() * dy;
        raw.into_iter().map(|m| m / z).collect()
    }

    #[test]
    fn bernoulli_is_smooth_at_zero() {
        for z in [1e-6, 1e-5, 2e-5, -1e-5] {
            let direct = z / f64::exp_m1(z);
            assert!((bernoulli(z) - direct).abs() < 1e-12);
        }
        assert_eq!(bernoulli(0.0), 1.0);
    }

    #[test]
    fn gaussian_is_a_fixed_point() {
        let m = gaussian(160, 8.0);
        for tau in [0.01, 1.0, 100.0] {
            let step = ChangCooperStep::new(160, 8.0, tau);
            let mut q = m.clone();
            step.apply(&mut q);
            let diff: f64 = q.iter().zip(&m).map(|(a, b)| (a - b).abs()).sum::<f64>() * 0.1;
            assert!(diff < 1e-12, "tau {tau}: {diff}");
        }
    }

    #[test]
    fn step_conserves_and_stays_positive() {
        let step = ChangCooperStep::new(160, 8.0, 5.0);
        let mut q: Vec<f64> = (0..160).map(|k| if (40..50).contains(&k) { 1.0 } else { 0.0 }).collect();
        let before: f64 = q.iter().sum();
        for _ in 0..10 {
            step.apply(&mut q);
        }
        let after: f64 = q.iter().sum();
        assert!((after - before).abs() < 1e-13 * before);
        assert!(q.iter().all(|v| *v >= 0.0));
    }
}
