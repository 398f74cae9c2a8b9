//! Functionals of kinetic and limit solutions, the entropy chain, moment envelopes and
//! convergence-rate fits.
//!
//! All sums run in a fixed order so recomputation is bit-identical.

use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::grid::{GridDistribution, LimitDistribution, PhaseGrid};

/// Slack allowed in the `‖q − q̄𝓜‖₁² ≤ 2 KL ≤ I` chain.
pub const CHAIN_SLACK: f64 = 1e-10;

/// Column order of the diagnostics CSV.
pub const CSV_COLUMNS: [&str; 10] = [
    "t",
    "mass",
    "moment_v2",
    "moment_x1",
    "moment_y2",
    "entropy",
    "fisher",
    "l1_to_maxwellian",
    "l1_to_limit",
    "tumbling_y2",
];

/// Column order of the limit-model CSV.
pub const LIMIT_CSV_COLUMNS: [&str; 4] = ["t", "mass", "moment_v2", "moment_x1"];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiagnosticsRecord {
    pub t: f64,
    pub mass: f64,
    pub moment_v2: f64,
    /// `∫|x − L/2| q`, measured from the centre of the domain.
    pub moment_x1: f64,
    pub moment_y2: f64,
    pub entropy: f64,
    pub fisher: f64,
    pub l1_to_maxwellian: f64,
    pub l1_to_limit: Option<f64>,
    /// `∫ y² Q̃[q]`.
    pub tumbling_y2: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LimitRecord {
    pub t: f64,
    pub mass: f64,
    pub moment_v2: f64,
    pub moment_x1: f64,
}

/// KL divergence, L¹ distance and Fisher information of `q` relative to `q̄ 𝓜`.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Relative {
    entropy: f64,
    kl: f64,
    l1: f64,
    fisher: f64,
}

fn relative(q: &GridDistribution, maxwellian: &[f64]) -> Relative {
    let g = q.grid();
    let (n_x, n_v, n_y) = (g.n_x(), g.n_v(), g.n_y());
    let (dx, dy) = (g.dx(), g.dy());
    let face: Vec<f64> = maxwellian.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
    let mut out = Relative {
        entropy: 0.0,
        kl: 0.0,
        l1: 0.0,
        fisher: 0.0,
    };
    for i in 0..n_x {
        for j in 0..n_v {
            let col = q.column(i, j);
            let bar: f64 = col.iter().sum::<f64>() * dy;
            let vol = dx * g.velocities().weight(j);
            let (mut ent, mut kl, mut l1, mut fi) = (0.0, 0.0, 0.0, 0.0);
            let mut prev = 0.0;
            for k in 0..n_y {
                let qk = col[k];
                let mk = maxwellian[k];
                if qk > 0.0 {
                    ent += qk * (qk / mk).ln();
                    kl += qk * (qk / (bar * mk)).ln();
                }
                l1 += (qk - bar * mk).abs();
                let h = (qk.max(0.0) / mk).sqrt();
                if k > 0 {
                    fi += (h - prev).powi(2) * face[k - 1];
                }
                prev = h;
            }
            out.entropy += ent * dy * vol;
            out.kl += kl * dy * vol;
            out.l1 += l1 * dy * vol;
            out.fisher += 4.0 * fi / dy * vol;
        }
    }
    out
}

fn moments(q: &GridDistribution) -> (f64, f64, f64, f64) {
    let g = q.grid();
    let center = 0.5 * g.length();
    let (mut mass, mut v2, mut x1, mut y2) = (0.0, 0.0, 0.0, 0.0);
    for i in 0..g.n_x() {
        let xd = (g.x_center(i) - center).abs();
        for j in 0..g.n_v() {
            let vol = g.dx() * g.velocities().weight(j) * g.dy();
            let col = q.column(i, j);
            let m: f64 = col.iter().sum::<f64>() * vol;
            let s: f64 = col
                .iter()
                .enumerate()
                .map(|(k, c)| c * g.y_center(k).powi(2))
                .sum::<f64>()
                * vol;
            mass += m;
            v2 += m * g.velocity(j).powi(2);
            x1 += m * xd;
            y2 += s;
        }
    }
    (mass, v2, x1, y2)
}

/// `∫ y² f` over the kinetic grid.
pub fn y2_integral(f: &GridDistribution) -> f64 {
    let g = f.grid();
    let mut total = 0.0;
    for i in 0..g.n_x() {
        for j in 0..g.n_v() {
            let col = f.column(i, j);
            let s: f64 = col
                .iter()
                .enumerate()
                .map(|(k, c)| c * g.y_center(k).powi(2))
                .sum();
            total += s * g.dx() * g.velocities().weight(j) * g.dy();
        }
    }
    total
}

fn check_finite(name: &'static str, value: f64) -> Result<f64> {
    if value.is_nan() {
        Err(Error::Corrupted { functional: name })
    } else {
        Ok(value)
    }
}

fn same_xv(a: &PhaseGrid, b: &PhaseGrid) -> bool {
    a.n_x() == b.n_x() && a.length() == b.length() && a.velocities() == b.velocities()
}

/// `‖q̄ − p̄‖₁` between the y-marginal of `q` and a limit solution.
pub fn l1_to_limit(q: &GridDistribution, p: &LimitDistribution) -> Result<f64> {
    if !same_xv(q.grid(), p.grid()) {
        return Err(Error::config("kinetic and limit solutions live on different grids"));
    }
    let bar = q.marginal_y();
    let g = q.grid();
    let mut total = 0.0;
    for i in 0..g.n_x() {
        for j in 0..g.n_v() {
            total += (bar.get(i, j) - p.get(i, j)).abs() * g.dx() * g.velocities().weight(j);
        }
    }
    Ok(total)
}

/// All diagnostics of `q`; `tumbling` is `Q̃[q]` at the same time when available.
pub fn compute_record(
    q: &GridDistribution,
    limit: Option<&LimitDistribution>,
    tumbling: Option<&GridDistribution>,
) -> Result<DiagnosticsRecord> {
    let maxwellian = q.grid().discrete_maxwellian();
    let rel = relative(q, &maxwellian);
    let (mass, v2, x1, y2) = moments(q);
    let l1_lim = match limit {
        Some(p) => Some(check_finite("l1_to_limit", l1_to_limit(q, p)?)?),
        None => None,
    };
    let j = match tumbling {
        Some(f) => Some(check_finite("tumbling_y2", y2_integral(f))?),
        None => None,
    };
    Ok(DiagnosticsRecord {
        t: q.time(),
        mass: check_finite("mass", mass)?,
        moment_v2: check_finite("moment_v2", v2)?,
        moment_x1: check_finite("moment_x1", x1)?,
        moment_y2: check_finite("moment_y2", y2)?,
        entropy: check_finite("entropy", rel.entropy)?,
        fisher: check_finite("fisher", rel.fisher)?,
        l1_to_maxwellian: check_finite("l1_to_maxwellian", rel.l1)?,
        l1_to_limit: l1_lim,
        tumbling_y2: j,
    })
}

pub fn compute_limit_record(p: &LimitDistribution) -> Result<LimitRecord> {
    let g = p.grid();
    let center = 0.5 * g.length();
    let mut x1 = 0.0;
    for i in 0..g.n_x() {
        for j in 0..g.n_v() {
            x1 += p.get(i, j) * (g.x_center(i) - center).abs() * g.dx() * g.velocities().weight(j);
        }
    }
    Ok(LimitRecord {
        t: p.time(),
        mass: check_finite("mass", p.mass())?,
        moment_v2: check_finite("moment_v2", p.moment_v2())?,
        moment_x1: check_finite("moment_x1", x1)?,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChainReport {
    pub l1_sq: f64,
    pub kl: f64,
    pub fisher: f64,
    pub chain_ok: bool,
}

/// Checks `‖q − q̄𝓜‖₁² ≤ 2 KL(q ‖ q̄𝓜) ≤ I[q]` for a probability density `q`.
pub fn check_csiszar_kullback(q: &GridDistribution) -> Result<ChainReport> {
    let mass = q.mass();
    if (mass - 1.0).abs() > 1e-10 {
        return Err(Error::Diagnostics(format!("chain check needs unit mass, got {mass}")));
    }
    let rel = relative(q, &q.grid().discrete_maxwellian());
    let report = ChainReport {
        l1_sq: rel.l1 * rel.l1,
        kl: rel.kl,
        fisher: rel.fisher,
        chain_ok: rel.l1 * rel.l1 <= 2.0 * rel.kl + CHAIN_SLACK && 2.0 * rel.kl <= rel.fisher + CHAIN_SLACK,
    };
    if !report.chain_ok {
        return Err(Error::Diagnostics(format!(
            "entropy chain violated at t = {}: l1² = {:e}, 2KL = {:e}, I = {:e}",
            q.time(),
            report.l1_sq,
            2.0 * report.kl,
            report.fisher
        )));
    }
    Ok(report)
}

/// Smallest constants making the moment envelopes hold over a run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentBoundReport {
    /// `∫|v|² q ≤ C (t + 1)`
    pub c_v: f64,
    /// `∫|x| q ≤ C (t^{3/2} + 1)`
    pub c_x: f64,
    /// `∫|y|² q ≤ C (ε⁻² e^{−t/ε} + ε t + 1)`
    pub c_y: f64,
    /// `∫|y|² Q̃[q] ≤ C (t^{1/2} ε⁻¹ e^{−t/2ε} + ε⁻¹ e^{−t/2ε} + t + 1)`, when recorded.
    pub c_j: Option<f64>,
}

impl MomentBoundReport {
    pub fn all_finite(&self) -> bool {
        self.c_v.is_finite() && self.c_x.is_finite() && self.c_y.is_finite() && self.c_j.is_none_or(f64::is_finite)
    }
}

pub fn moment_bound_report(series: &[DiagnosticsRecord], eps: f64) -> Result<MomentBoundReport> {
    if series.is_empty() {
        return Err(Error::Diagnostics("moment report needs a nonempty series".into()));
    }
    let mut c_v = 0.0_f64;
    let mut c_x = 0.0_f64;
    let mut c_y = 0.0_f64;
    let mut c_j: Option<f64> = None;
    for r in series {
        let t = r.t;
        c_v = c_v.max(r.moment_v2 / (t + 1.0));
        c_x = c_x.max(r.moment_x1 / (t.powf(1.5) + 1.0));
        c_y = c_y.max(r.moment_y2 / ((-t / eps).exp() / (eps * eps) + eps * t + 1.0));
        if let Some(j) = r.tumbling_y2 {
            let decay = (-t / (2.0 * eps)).exp() / eps;
            let env = t.sqrt() * decay + decay + t + 1.0;
            c_j = Some(c_j.unwrap_or(0.0).max(j / env));
        }
    }
    Ok(MomentBoundReport { c_v, c_x, c_y, c_j })
}

#[derive(Debug, Clone, PartialEq)]
pub struct RateFit {
    pub eps_values: Vec<f64>,
    pub errors: Vec<f64>,
    pub slope: f64,
    /// `log C` in `error ≈ C ε^slope`.
    pub intercept: f64,
    pub r_squared: f64,
}

/// Least squares of `log y` against `log x`; returns `(slope, intercept, r²)`.
pub fn log_log_fit(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let syy: f64 = ly.iter().map(|b| (b - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r2 = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    (slope, intercept, r2)
}

pub fn fit_rate(eps_values: &[f64], errors: &[f64]) -> Result<RateFit> {
    if eps_values.len() != errors.len() {
        return Err(Error::config("rate fit needs one error per eps value"));
    }
    if eps_values.len() < 3 {
        return Err(Error::config("rate fit needs at least three eps values"));
    }
    if eps_values.iter().any(|e| !(*e > 0.0)) {
        return Err(Error::Domain("eps values must be positive".into()));
    }
    let lo = eps_values.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = eps_values.iter().cloned().fold(0.0, f64::max);
    if hi < 4.0 * lo {
        return Err(Error::config("eps values must span at least a factor 4"));
    }
    if let Some(e) = errors.iter().find(|e| !(**e > 0.0)) {
        return Err(Error::Domain(format!("rate fit needs positive errors, got {e}")));
    }
    let (slope, intercept, r_squared) = log_log_fit(eps_values, errors);
    Ok(RateFit {
        eps_values: eps_values.to_vec(),
        errors: errors.to_vec(),
        slope,
        intercept,
        r_squared,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct TheoremLhs {
    /// `∫₀ᵗ ‖q − q̄𝓜‖₁² ds` by the trapezoid rule.
    pub time_integrated_l1_sq: f64,
    /// `(t_k, ‖q̄(t_k) − p̄(t_k)‖₁)`.
    pub pointwise_l1_series: Vec<(f64, f64)>,
}

/// Accumulates the theorem's left-hand sides from matched kinetic and limit snapshots.
#[derive(Debug, Clone, Default)]
pub struct TheoremLhsAccumulator {
    last: Option<(f64, f64)>,
    integral: f64,
    series: Vec<(f64, f64)>,
}

impl TheoremLhsAccumulator {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds a pair of precomputed `(t, ‖q − q̄𝓜‖₁, ‖q̄ − p̄‖₁)` values.
    pub fn push_values(&mut self, t: f64, l1_maxwellian: f64, l1_limit: f64) -> Result<()> {
        let sq = l1_maxwellian * l1_maxwellian;
        if let Some((t0, s0)) = self.last {
            if !(t > t0) {
                return Err(Error::config("theorem functionals need increasing output times"));
            }
            self.integral += 0.5 * (t - t0) * (s0 + sq);
        }
        self.last = Some((t, sq));
        self.series.push((t, l1_limit));
        Ok(())
    }

    pub fn push(&mut self, q: &GridDistribution, p: &LimitDistribution) -> Result<()> {
        if (q.time() - p.time()).abs() > 1e-9 * q.time().abs().max(1.0) {
            return Err(Error::config(format!(
                "kinetic (t = {}) and limit (t = {}) snapshots are not matched",
                q.time(),
                p.time()
            )));
        }
        let l1_lim = l1_to_limit(q, p)?;
        let l1_m = relative(q, &q.grid().discrete_maxwellian()).l1;
        self.push_values(q.time(), l1_m, l1_lim)
    }

    pub fn push_record(&mut self, r: &DiagnosticsRecord) -> Result<()> {
        let l1_lim = r
            .l1_to_limit
            .ok_or_else(|| Error::config("record carries no limit distance"))?;
        self.push_values(r.t, r.l1_to_maxwellian, l1_lim)
    }

    pub fn finish(self) -> TheoremLhs {
        TheoremLhs {
            time_integrated_l1_sq: self.integral,
            pointwise_l1_series: self.series,
        }
    }
}

pub fn theorem_lhs(q_traj: &[GridDistribution], p_traj: &[LimitDistribution]) -> Result<TheoremLhs> {
    if q_traj.len() != p_traj.len() {
        return Err(Error::config("trajectories have different lengths"));
    }
    let mut acc = TheoremLhsAccumulator::new();
    for (q, p) in q_traj.iter().zip(p_traj) {
        acc.push(q, p)?;
    }
    Ok(acc.finish())
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.17e}")).unwrap_or_default()
}

pub fn write_csv<W: Write>(mut w: W, records: &[DiagnosticsRecord]) -> Result<()> {
    writeln!(w, "{}", CSV_COLUMNS.join(","))?;
    for r in records {
        writeln!(
            w,
            "{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{},{}",
            r.t,
            r.mass,
            r.moment_v2,
            r.moment_x1,
            r.moment_y2,
            r.entropy,
            r.fisher,
            r.l1_to_maxwellian,
            fmt_opt(r.l1_to_limit),
            fmt_opt(r.tumbling_y2)
        )?;
    }
    Ok(())
}

pub fn write_limit_csv<W: Write>(mut w: W, records: &[LimitRecord]) -> Result<()> {
    writeln!(w, "{}", LIMIT_CSV_COLUMNS.join(","))?;
    for r in records {
        writeln!(w, "{:.17e},{:.17e},{:.17e},{:.17e}", r.t, r.mass, r.moment_v2, r.moment_x1)?;
    }
    Ok(())
}

/// A numeric table read back from any CSV written by this crate.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub columns: Vec<String>,
    /// Row-major; empty fields are NaN.
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let idx = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[idx]).collect())
    }
}

pub fn read_table<R: BufRead>(r: R) -> Result<Table> {
    let mut lines = r.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::config("empty CSV"))??;
    let columns: Vec<String> = header.split(',').map(|s| s.trim().to_string()).collect();
    let mut rows = Vec::new();
    for (n, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != columns.len() {
            return Err(Error::config(format!("CSV row {} has {} fields, expected {}", n + 2, fields.len(), columns.len())));
        }
        let row = fields
            .iter()
            .map(|f| {
                let f = f.trim();
                if f.is_empty() {
                    Ok(f64::NAN)
                } else {
                    f.parse::<f64>()
                        .map_err(|_| Error::config(format!("CSV row {}: `{f}` is not a number", n + 2)))
                }
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    Ok(Table { columns, rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::SpatialProfile;
    use crate::velocity::VelocitySet;
    use std::sync::Arc;

    fn grid() -> Arc<PhaseGrid> {
        Arc::new(PhaseGrid::new(10.0, 20, VelocitySet::line(4, 1.0).unwrap(), 160, 8.0).unwrap())
    }

    #[test]
    fn equilibrium_has_zero_relative_functionals() {
        let g = grid();
        let m = g.discrete_maxwellian();
        let q = GridDistribution::product(g, &SpatialProfile::CosineBump { center: 5.0, half_width: 3.0 }, &m).unwrap();
        let r = compute_record(&q, None, None).unwrap();
        assert!(r.l1_to_maxwellian < 1e-12);
        assert!(r.fisher < 1e-12);
        let c = check_csiszar_kullback(&q).unwrap();
        assert!(c.chain_ok && c.kl.abs() < 1e-12);
    }

    #[test]
    fn single_cell_y_moment() {
        let g = grid();
        let mut q = GridDistribution::zeros(g.clone());
        let idx = q.index(3, 1, 17);
        q.values_mut()[idx] = 1.0 / (g.dx() * g.velocities().weight(1) * g.dy());
        let r = compute_record(&q, None, None).unwrap();
        assert!((r.mass - 1.0).abs() < 1e-12);
        assert!((r.moment_y2 - g.y_center(17).powi(2)).abs() < 1e-12);
    }

    #[test]
    fn entropy_of_uniform_product() {
        let g = grid();
        let m = g.discrete_maxwellian();
        let q = GridDistribution::product(g.clone(), &SpatialProfile::Box { left: 2.0, right: 6.0 }, &m).unwrap();
        let s = 4.0 * g.velocities().measure();
        let r = compute_record(&q, None, None).unwrap();
        assert!((r.entropy - (1.0 / s).ln()).abs() < 1e-12, "{} vs {}", r.entropy, (1.0 / s).ln());
    }

    #[test]
    fn shifted_gaussian_brackets_kl() {
        let g = grid();
        let shifted: Vec<f64> = (0..g.n_y()).map(|k| (-0.5 * (g.y_center(k) - 0.5).powi(2)).exp()).collect();
        let q = GridDistribution::product(g, &SpatialProfile::Box { left: 2.0, right: 6.0 }, &shifted).unwrap();
        let c = check_csiszar_kullback(&q).unwrap();
        assert!((c.kl - 0.125).abs() < 1e-3, "{}", c.kl);
        assert!((c.fisher - 0.25).abs() < 1e-3, "{}", c.fisher);
        assert!(c.l1_sq <= 0.25);
    }

    #[test]
    fn rate_fit_examples() {
        let eps = [0.2, 0.1, 0.05, 0.025];
        let sq: Vec<f64> = eps.iter().map(|e: &f64| e.sqrt()).collect();
        let f = fit_rate(&eps, &sq).unwrap();
        assert!((f.slope - 0.5).abs() < 1e-12 && (f.r_squared - 1.0).abs() < 1e-12);
        let f = fit_rate(&eps, &eps).unwrap();
        assert!((f.slope - 1.0).abs() < 1e-12);
        assert!(matches!(fit_rate(&eps, &[1.0, 0.0, 1.0, 1.0]), Err(Error::Domain(_))));
        assert!(fit_rate(&[0.2, 0.1, 0.08], &[1.0, 1.0, 1.0]).is_err());
    }

    #[test]
    fn theorem_lhs_trivial_cases() {
        let g = grid();
        let m = g.discrete_maxwellian();
        let q = GridDistribution::product(g.clone(), &SpatialProfile::Box { left: 1.0, right: 3.0 }, &m).unwrap();
        let p = q.marginal_y();
        let lhs = theorem_lhs(&[q.clone()], &[p]).unwrap();
        assert!(lhs.time_integrated_l1_sq == 0.0 && lhs.pointwise_l1_series[0].1 < 1e-14);
        let far = LimitDistribution::product(g, &SpatialProfile::Box { left: 6.0, right: 9.0 }).unwrap();
        let lhs = theorem_lhs(&[q], &[far]).unwrap();
        assert!((lhs.pointwise_l1_series[0].1 - 2.0).abs() < 1e-12);
    }

    #[test]
    fn csv_round_trip() {
        let r = DiagnosticsRecord {
            t: 0.5,
            mass: 1.0,
            moment_v2: 0.3,
            moment_x1: 2.0,
            moment_y2: 1.0,
            entropy: -1.0,
            fisher: 0.1,
            l1_to_maxwellian: 0.01,
            l1_to_limit: None,
            tumbling_y2: Some(0.2),
        };
        let mut buf = Vec::new();
        write_csv(&mut buf, &[r]).unwrap();
        let t = read_table(&buf[..]).unwrap();
        assert_eq!(t.columns, CSV_COLUMNS);
        assert_eq!(t.column("fisher").unwrap(), vec![0.1]);
        assert!(t.column("l1_to_limit").unwrap()[0].is_nan());
    }
}
