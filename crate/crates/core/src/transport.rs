//! Finite-volume free transport `∂_t f + v ∂_x f = 0` with zero-influx boundaries.
//!
//! Data layout is `[x-cell][velocity][row]`, where a row holds every degree of freedom that is
//! advected with the same velocity (the y-cells for the kinetic grid, a single value for the
//! limit model).

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TransportScheme {
    Upwind1,
    /// Linear reconstruction with minmod slopes, Hancock predictor in time.
    MusclMinmod,
}

#[inline]
fn minmod(a: f64, b: f64) -> f64 {
    if a * b <= 0.0 {
        0.0
    } else if a.abs() < b.abs() {
        a
    } else {
        b
    }
}

/// Advances every velocity by `dt` and writes the result into `out`.
///
/// `courant[j] = v_j dt / Δx`; stability needs `|courant| ≤ 1`.
pub fn advect(
    scheme: TransportScheme,
    values: &[f64],
    out: &mut [f64],
    n_x: usize,
    n_v: usize,
    row: usize,
    courant: &[f64],
) {
    debug_assert_eq!(values.len(), n_x * n_v * row);
    debug_assert_eq!(courant.len(), n_v);
    let stride = n_v * row;
    let cell = |i: isize, j: usize, r: usize| -> f64 {
        if i < 0 || i >= n_x as isize {
            0.0
        } else {
            values[i as usize * stride + j * row + r]
        }
    };
    // Upwind flux through the face between cells i−1 and i, in units of Δx/dt.
    let flux = |i: isize, j: usize, r: usize| -> f64 {
        let nu = courant[j];
        if nu > 0.0 {
            // zero influx at the left boundary
            if i == 0 {
                return 0.0;
            }
            let up = cell(i - 1, j, r);
            match scheme {
                TransportScheme::Upwind1 => nu * up,
                TransportScheme::MusclMinmod => {
                    let slope = minmod(up - cell(i - 2, j, r), cell(i, j, r) - up);
                    nu * (up + 0.5 * (1.0 - nu) * slope)
                }
            }
        } else if nu < 0.0 {
            if i == n_x as isize {
                return 0.0;
            }
            let up = cell(i, j, r);
            match scheme {
                TransportScheme::Upwind1 => nu * up,
                TransportScheme::MusclMinmod => {
                    let slope = minmod(cell(i + 1, j, r) - up, up - cell(i - 1, j, r));
                    nu * (up - 0.5 * (1.0 + nu) * slope)
                }
            }
        } else {
            0.0
        }
    };
    out.par_chunks_mut(stride).enumerate().for_each(|(i, dst)| {
        let i = i as isize;
        for j in 0..n_v {
            for r in 0..row {
                dst[j * row + r] = cell(i, j, r) - (flux(i + 1, j, r) - flux(i, j, r));
            }
        }
    });
}
