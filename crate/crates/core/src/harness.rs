//! Orchestration of runs, ε-sweeps and particle/grid comparisons, plus their output files.
//!
//! Every command writes into its own directory below the output root:
//!
//! | command         | directory         | files                                               |
//! |-----------------|-------------------|-----------------------------------------------------|
//! | run-grid        | `run-grid/`       | `diagnostics.csv`, `final.snap`(+`.meta`)           |
//! | run-limit       | `run-limit/`      | `limit.csv`, `final.snap`(+`.meta`)                 |
//! | run-particles   | `run-particles/`  | `ensemble.ckpt`, `particles.csv` (≤ 10⁴ particles)  |
//! | sweep           | `sweep/`          | `eps_<ε>/diagnostics.csv`, `rates.csv`, `rates.toml`|
//! | compare         | `compare/`        | `marginals.csv`, `report.toml`                      |
//!
//! and a `manifest.toml` next to them.

use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use rayon::prelude::*;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::ScenarioConfig;
use crate::diagnostics::{
    check_csiszar_kullback, compute_limit_record, compute_record, fit_rate, write_csv, write_limit_csv,
    DiagnosticsRecord, LimitRecord, RateFit, TheoremLhs, TheoremLhsAccumulator,
};
use crate::error::{Error, Result};
use crate::grid::{GridDistribution, LimitDistribution};
use crate::grid_solver::GridSolver;
use crate::limit_solver::LimitSolver;
use crate::particles::{Dynamics, ParticleEnsemble, CSV_EXPORT_LIMIT};
use crate::plot::{line_plot, log_log_plot, Series};
use crate::snapshot::{save, SnapshotHeader};

/// Round-off floor of the solvers (per-step mass conservation).
pub const DISCRETIZATION_FLOOR: f64 = 1e-12;

/// Histogram bins with fewer expected and observed particles than this are not compared.
pub const MIN_EXPECTED_COUNT: f64 = 25.0;

/// Share of the grid mass that compared bins must carry for the statistics to count as resolved.
pub const RESOLVED_MASS: f64 = 0.9;

/// Agreement threshold in binomial standard errors.
pub const SIGMA_THRESHOLD: f64 = 3.0;

fn unix_now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

/// SHA-256 of the canonical TOML form of the scenario.
pub fn config_hash(cfg: &ScenarioConfig) -> String {
    let digest = Sha256::digest(cfg.to_toml().as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SeedEntry {
    pub run: String,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub config_hash: String,
    pub artifact_version: String,
    pub started_unix: u64,
    pub finished_unix: u64,
    pub outputs: Vec<String>,
    pub seeds: Vec<SeedEntry>,
}

impl RunManifest {
    fn start(command: &str, cfg: &ScenarioConfig) -> Self {
        Self {
            command: command.to_string(),
            config_hash: config_hash(cfg),
            artifact_version: env!("CARGO_PKG_VERSION").to_string(),
            started_unix: unix_now(),
            finished_unix: 0,
            outputs: Vec::new(),
            seeds: vec![SeedEntry {
                run: "master".into(),
                seed: cfg.master_seed,
            }],
        }
    }

    fn add(&mut self, root: &Path, path: &Path) {
        let rel = path.strip_prefix(root).unwrap_or(path);
        self.outputs.push(rel.display().to_string());
    }

    fn finish(mut self, dir: &Path) -> Result<Self> {
        self.finished_unix = unix_now();
        let text = toml::to_string(&self).map_err(|e| Error::Diagnostics(format!("manifest: {e}")))?;
        std::fs::write(dir.join("manifest.toml"), text)?;
        Ok(self)
    }
}

fn command_dir(root: &Path, name: &str) -> Result<PathBuf> {
    let dir = root.join(name);
    std::fs::create_dir_all(&dir)?;
    Ok(dir)
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    std::fs::write(path, bytes)?;
    Ok(())
}

/// Entropy-chain margins over a run: the smallest values of `2KL − l1²` and `I − 2KL`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChainSummary {
    pub checked: usize,
    pub min_pinsker_gap: f64,
    pub min_log_sobolev_gap: f64,
}

impl Default for ChainSummary {
    fn default() -> Self {
        Self {
            checked: 0,
            min_pinsker_gap: f64::INFINITY,
            min_log_sobolev_gap: f64::INFINITY,
        }
    }
}

#[derive(Debug, Clone)]
pub struct GridRun {
    pub eps: f64,
    pub records: Vec<DiagnosticsRecord>,
    pub final_state: GridDistribution,
    pub chain: ChainSummary,
    /// Present when the run was compared against a limit trajectory.
    pub theorem: Option<TheoremLhs>,
    /// Largest mass in the two outermost x-cells over all outputs.
    pub max_boundary_mass: f64,
}

/// Limit solution stored at every time step.
#[derive(Debug, Clone)]
pub struct LimitTrajectory {
    pub dt: f64,
    pub states: Vec<LimitDistribution>,
}

impl LimitTrajectory {
    pub fn at(&self, t: f64) -> Result<&LimitDistribution> {
        let idx = (t / self.dt).round() as usize;
        let p = self
            .states
            .get(idx)
            .ok_or_else(|| Error::config(format!("limit trajectory does not reach t = {t}")))?;
        if (p.time() - t).abs() > 1e-9 * t.max(1.0) {
            return Err(Error::config(format!("no limit snapshot at t = {t}")));
        }
        Ok(p)
    }
}

fn boundary_mass(q: &GridDistribution) -> f64 {
    let g = q.grid();
    let mut m = 0.0;
    for i in [0, g.n_x() - 1] {
        for j in 0..g.n_v() {
            m += q.column(i, j).iter().sum::<f64>() * g.cell_volume(j);
        }
    }
    m
}

/// Builds the solver for `eps` from the scenario, optionally overriding the output interval and
/// end time.
pub fn grid_solver(cfg: &ScenarioConfig, eps: f64, output_interval: Option<f64>, t_end: Option<f64>) -> Result<GridSolver> {
    let grid = cfg.phase_grid()?;
    let signal = cfg.signal_spec()?;
    let adapted = cfg.adapted_signal(eps, &signal)?;
    let mut solver = cfg.solver_config()?;
    solver.eps = eps;
    if let Some(o) = output_interval {
        solver.output_interval = o;
    }
    if let Some(t) = t_end {
        solver.t_end = t;
    }
    GridSolver::new(grid, solver, signal, adapted, cfg.tumbling_kernel()?)
}

/// Runs the kinetic solver, recording diagnostics (including `J` and the entropy chain) at
/// every output.
pub fn simulate_grid(solver: &GridSolver, cfg: &ScenarioConfig, limit: Option<&LimitTrajectory>) -> Result<GridRun> {
    let grid = solver.grid().clone();
    let q0 = GridDistribution::well_prepared(grid, &cfg.profile()?, solver.config().t_end)?;
    let mut records = Vec::new();
    let mut chain = ChainSummary::default();
    let mut acc = limit.map(|_| TheoremLhsAccumulator::new());
    let mut max_boundary = 0.0_f64;
    let final_state = solver.run(q0, |q| {
        let p = match limit {
            Some(l) => Some(l.at(q.time())?),
            None => None,
        };
        let rhs = solver.tumbling_rhs(q, q.time())?;
        let rec = compute_record(q, p, Some(&rhs))?;
        let c = check_csiszar_kullback(q)?;
        chain.checked += 1;
        chain.min_pinsker_gap = chain.min_pinsker_gap.min(2.0 * c.kl - c.l1_sq);
        chain.min_log_sobolev_gap = chain.min_log_sobolev_gap.min(c.fisher - 2.0 * c.kl);
        if let Some(a) = acc.as_mut() {
            a.push_record(&rec)?;
        }
        max_boundary = max_boundary.max(boundary_mass(q));
        records.push(rec);
        Ok(())
    })?;
    Ok(GridRun {
        eps: solver.config().eps,
        records,
        final_state,
        chain,
        theorem: acc.map(TheoremLhsAccumulator::finish),
        max_boundary_mass: max_boundary,
    })
}

pub fn limit_solver(cfg: &ScenarioConfig, output_interval: Option<f64>) -> Result<LimitSolver> {
    let mut solver = cfg.solver_config()?;
    if let Some(o) = output_interval {
        solver.output_interval = o;
    }
    LimitSolver::new(cfg.phase_grid()?, solver, cfg.signal_spec()?, cfg.limit_kernel()?)
}

/// The limit model from the scenario's initial profile, stored at every step.
pub fn limit_trajectory(cfg: &ScenarioConfig) -> Result<LimitTrajectory> {
    let dt = cfg.solver_section()?.dt;
    let solver = limit_solver(cfg, Some(dt))?;
    let p0 = LimitDistribution::product(cfg.phase_grid()?, &cfg.profile()?)?;
    let mut states = Vec::new();
    solver.run(p0, |p| {
        states.push(p.clone());
        Ok(())
    })?;
    Ok(LimitTrajectory { dt, states })
}

fn csv_bytes(records: &[DiagnosticsRecord]) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    write_csv(&mut buf, records)?;
    Ok(buf)
}

fn diagnostics_plots(dir: &Path, stem: &str, records: &[DiagnosticsRecord], manifest: &mut RunManifest, root: &Path) -> Result<()> {
    let t: Vec<f64> = records.iter().map(|r| r.t).collect();
    let columns: [(&str, Vec<f64>); 5] = [
        ("moment_y2", records.iter().map(|r| r.moment_y2).collect()),
        ("entropy", records.iter().map(|r| r.entropy).collect()),
        ("fisher", records.iter().map(|r| r.fisher).collect()),
        ("l1_to_maxwellian", records.iter().map(|r| r.l1_to_maxwellian).collect()),
        ("moment_x1", records.iter().map(|r| r.moment_x1).collect()),
    ];
    for (name, y) in columns {
        let svg = line_plot(name, "t", name, &[Series {
            name: name.to_string(),
            x: t.clone(),
            y,
        }])?;
        let path = dir.join(format!("{stem}_{name}.svg"));
        write_file(&path, svg.as_bytes())?;
        manifest.add(root, &path);
    }
    Ok(())
}

/// `run-grid`: the kinetic solver at `[solver].eps`.
pub fn cmd_run_grid(cfg: &ScenarioConfig, root: &Path) -> Result<(GridRun, RunManifest)> {
    let sections = [cfg.signal.is_some(), cfg.kernel.is_some()];
    if sections.contains(&false) {
        return Err(Error::config("run-grid needs [signal], [kernel], [grid] and [solver]"));
    }
    let eps = cfg.solver_section()?.eps;
    let solver = grid_solver(cfg, eps, None, None)?;
    let mut manifest = RunManifest::start("run-grid", cfg);
    let dir = command_dir(root, "run-grid")?;
    let run = simulate_grid(&solver, cfg, None)?;
    if cfg.output.wants("csv") {
        let path = dir.join("diagnostics.csv");
        write_file(&path, &csv_bytes(&run.records)?)?;
        manifest.add(root, &path);
    }
    if cfg.output.wants("snapshot") {
        for p in save(&dir.join("final.snap"), &SnapshotHeader::of_grid(&run.final_state, eps), run.final_state.values())? {
            manifest.add(root, &p);
        }
    }
    if cfg.output.plots {
        diagnostics_plots(&dir, "diagnostics", &run.records, &mut manifest, root)?;
    }
    let manifest = manifest.finish(&dir)?;
    Ok((run, manifest))
}

/// `run-limit`: the limiting model over `[solver].t_end`.
pub fn cmd_run_limit(cfg: &ScenarioConfig, root: &Path) -> Result<(Vec<LimitRecord>, RunManifest)> {
    if cfg.signal.is_none() || cfg.kernel.is_none() {
        return Err(Error::config("run-limit needs [signal], [kernel], [grid] and [solver]"));
    }
    let solver = limit_solver(cfg, None)?;
    let p0 = LimitDistribution::product(cfg.phase_grid()?, &cfg.profile()?)?;
    let mut records = Vec::new();
    let p = solver.run(p0, |p| {
        records.push(compute_limit_record(p)?);
        Ok(())
    })?;
    let mut manifest = RunManifest::start("run-limit", cfg);
    let dir = command_dir(root, "run-limit")?;
    if cfg.output.wants("csv") {
        let mut buf = Vec::new();
        write_limit_csv(&mut buf, &records)?;
        let path = dir.join("limit.csv");
        write_file(&path, &buf)?;
        manifest.add(root, &path);
    }
    if cfg.output.wants("snapshot") {
        for f in save(&dir.join("final.snap"), &SnapshotHeader::of_limit(&p), p.values())? {
            manifest.add(root, &f);
        }
    }
    let manifest = manifest.finish(&dir)?;
    Ok((records, manifest))
}

/// Particle ensemble evolved to `[particles].t_end` from well-prepared data.
pub fn simulate_particles(cfg: &ScenarioConfig) -> Result<ParticleEnsemble> {
    let p = cfg.particles_section()?;
    let eps = cfg.particle_eps()?;
    let signal = cfg.signal_spec_dim(p.dim)?;
    let kernel = cfg.tumbling_kernel_dim(p.dim)?;
    let mut ens = ParticleEnsemble::sample_well_prepared(p.count, &cfg.profile()?, &signal, &kernel, eps, cfg.master_seed)?;
    ens.evolve(p.t_end, &signal, &kernel, Dynamics::default(), None)?;
    Ok(ens)
}

/// `run-particles`.
pub fn cmd_run_particles(cfg: &ScenarioConfig, root: &Path) -> Result<(ParticleEnsemble, RunManifest)> {
    if cfg.signal.is_none() || cfg.kernel.is_none() {
        return Err(Error::config("run-particles needs [signal], [kernel], [grid] and [particles]"));
    }
    let ens = simulate_particles(cfg)?;
    let mut manifest = RunManifest::start("run-particles", cfg);
    manifest.seeds.push(SeedEntry {
        run: "particles".into(),
        seed: cfg.master_seed,
    });
    let dir = command_dir(root, "run-particles")?;
    let path = dir.join("ensemble.ckpt");
    ens.write_checkpoint(std::io::BufWriter::new(std::fs::File::create(&path)?))?;
    manifest.add(root, &path);
    if cfg.output.wants("csv") && ens.len() <= CSV_EXPORT_LIMIT {
        let path = dir.join("particles.csv");
        let mut buf = Vec::new();
        ens.write_csv(&mut buf, cfg.tumbling_kernel_dim(ens.dim())?.velocities())?;
        write_file(&path, &buf)?;
        manifest.add(root, &path);
    }
    let manifest = manifest.finish(&dir)?;
    Ok((ens, manifest))
}

/// Largest divisor `d` of `steps` with `d·dt ≤ ε/2`, as a time interval.
pub fn sweep_output_interval(steps: usize, dt: f64, eps: f64) -> f64 {
    let mut best = 1;
    for d in 1..=steps.max(1) {
        if steps % d == 0 && d as f64 * dt <= 0.5 * eps * (1.0 + 1e-12) {
            best = d;
        }
    }
    best as f64 * dt
}

#[derive(Debug, Clone)]
pub struct SweepEntry {
    pub eps: f64,
    pub time_integrated_l1_sq: f64,
    pub pointwise_l1_end: f64,
    pub run: GridRun,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitReport {
    pub functional: String,
    pub eps: Vec<f64>,
    pub errors: Vec<f64>,
    pub slope: Option<f64>,
    pub intercept: Option<f64>,
    pub r_squared: Option<f64>,
    pub at_floor: bool,
    pub note: String,
}

impl FitReport {
    fn new(functional: &str, eps: &[f64], errors: &[f64], floor: f64) -> Result<Self> {
        let mut report = Self {
            functional: functional.to_string(),
            eps: eps.to_vec(),
            errors: errors.to_vec(),
            slope: None,
            intercept: None,
            r_squared: None,
            at_floor: false,
            note: String::new(),
        };
        if errors.iter().all(|e| *e < 10.0 * floor) {
            report.at_floor = true;
            report.note = "all errors at the discretization floor; fit skipped".into();
        } else if eps.len() < 3 {
            report.note = format!("{} eps value(s); fit needs at least three", eps.len());
        } else {
            let fit: RateFit = fit_rate(eps, errors)?;
            report.slope = Some(fit.slope);
            report.intercept = Some(fit.intercept);
            report.r_squared = Some(fit.r_squared);
        }
        Ok(report)
    }
}

#[derive(Debug, Clone)]
pub struct SweepReport {
    pub entries: Vec<SweepEntry>,
    /// Fit of `∫₀ᵗ‖q − q̄𝓜‖₁²` against ε.
    pub time_integrated: FitReport,
    /// Fit of `‖q̄(t_end) − p̄(t_end)‖₁` against ε.
    pub pointwise: FitReport,
}

/// Runs the limit model once and the kinetic model for every `[sweep]` ε.
pub fn sweep(cfg: &ScenarioConfig) -> Result<SweepReport> {
    let eps_values = cfg.sweep_section()?.eps.clone();
    let s = cfg.solver_section()?;
    let steps = cfg.solver_config()?.steps()?;
    let limit = limit_trajectory(cfg)?;
    let entries: Vec<Result<SweepEntry>> = eps_values
        .par_iter()
        .map(|&eps| {
            let run = (|| {
                let interval = sweep_output_interval(steps, s.dt, eps);
                let solver = grid_solver(cfg, eps, Some(interval), None)?;
                simulate_grid(&solver, cfg, Some(&limit))
            })()
            .map_err(|e| Error::SweepRun {
                eps,
                source: Box::new(e),
            })?;
            let lhs = run.theorem.clone().expect("limit trajectory given");
            Ok(SweepEntry {
                eps,
                time_integrated_l1_sq: lhs.time_integrated_l1_sq,
                pointwise_l1_end: lhs.pointwise_l1_series.last().map(|p| p.1).unwrap_or(0.0),
                run,
            })
        })
        .collect();
    let entries = entries.into_iter().collect::<Result<Vec<_>>>()?;
    let integrated: Vec<f64> = entries.iter().map(|e| e.time_integrated_l1_sq).collect();
    let pointwise: Vec<f64> = entries.iter().map(|e| e.pointwise_l1_end).collect();
    Ok(SweepReport {
        time_integrated: FitReport::new(
            "time_integrated_l1_sq",
            &eps_values,
            &integrated,
            DISCRETIZATION_FLOOR * DISCRETIZATION_FLOOR,
        )?,
        pointwise: FitReport::new("pointwise_l1", &eps_values, &pointwise, DISCRETIZATION_FLOOR)?,
        entries,
    })
}

fn eps_label(eps: f64) -> String {
    format!("{eps}")
}

#[derive(Serialize)]
struct RatesFile<'a> {
    fits: Vec<&'a FitReport>,
}

/// `sweep`.
pub fn cmd_sweep(cfg: &ScenarioConfig, root: &Path) -> Result<(SweepReport, RunManifest)> {
    if cfg.signal.is_none() || cfg.kernel.is_none() {
        return Err(Error::config("sweep needs [signal], [kernel], [grid], [solver] and [sweep]"));
    }
    cfg.sweep_section()?;
    let report = sweep(cfg)?;
    let mut manifest = RunManifest::start("sweep", cfg);
    let dir = command_dir(root, "sweep")?;
    for e in &report.entries {
        let sub = dir.join(format!("eps_{}", eps_label(e.eps)));
        std::fs::create_dir_all(&sub)?;
        let path = sub.join("diagnostics.csv");
        write_file(&path, &csv_bytes(&e.run.records)?)?;
        manifest.add(root, &path);
    }
    let mut rates = String::from("eps,time_integrated_l1_sq,pointwise_l1\n");
    for e in &report.entries {
        rates.push_str(&format!("{:.17e},{:.17e},{:.17e}\n", e.eps, e.time_integrated_l1_sq, e.pointwise_l1_end));
    }
    let path = dir.join("rates.csv");
    write_file(&path, rates.as_bytes())?;
    manifest.add(root, &path);
    let text = toml::to_string(&RatesFile {
        fits: vec![&report.time_integrated, &report.pointwise],
    })
    .map_err(|e| Error::Diagnostics(format!("rate report: {e}")))?;
    let path = dir.join("rates.toml");
    write_file(&path, text.as_bytes())?;
    manifest.add(root, &path);
    if cfg.output.plots {
        for fit in [&report.time_integrated, &report.pointwise] {
            if fit.slope.is_some() {
                let svg = log_log_plot(&fit.functional, "eps", &fit.functional, &fit.eps, &fit.errors)?;
                let path = dir.join(format!("rate_{}.svg", fit.functional));
                write_file(&path, svg.as_bytes())?;
                manifest.add(root, &path);
            }
        }
    }
    let manifest = manifest.finish(&dir)?;
    Ok((report, manifest))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MarginalReport {
    pub name: String,
    pub bins: usize,
    pub compared: usize,
    /// Largest `|f − p| / √(p(1 − p)/N)` over compared bins.
    pub max_z: f64,
    pub worst_bin: usize,
    /// Grid mass carried by the compared bins.
    pub compared_mass: f64,
    pub grid: Vec<f64>,
    pub particles: Vec<f64>,
}

/// Compares the particle fractions per bin with the grid probabilities.
pub fn compare_marginal(name: &str, grid: &[f64], counts: &[u64], total: usize) -> MarginalReport {
    let n = total as f64;
    let mut max_z = 0.0_f64;
    let mut worst = 0;
    let mut compared = 0;
    let mut compared_mass = 0.0;
    for (b, (&p, &c)) in grid.iter().zip(counts).enumerate() {
        let expected = n * p;
        if expected.max(c as f64) < MIN_EXPECTED_COUNT {
            continue;
        }
        compared += 1;
        compared_mass += p;
        let f = c as f64 / n;
        let se = (p.max(0.0) * (1.0 - p).max(0.0) / n).sqrt();
        let z = if se > 0.0 { (f - p).abs() / se } else { f64::INFINITY };
        if z > max_z {
            max_z = z;
            worst = b;
        }
    }
    MarginalReport {
        name: name.to_string(),
        bins: grid.len(),
        compared,
        max_z,
        worst_bin: worst,
        compared_mass,
        grid: grid.to_vec(),
        particles: counts.iter().map(|c| *c as f64 / n).collect(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompareReport {
    pub eps: f64,
    pub t: f64,
    pub particles: usize,
    pub seed: u64,
    pub out_of_range: f64,
    pub out_of_range_warning: bool,
    pub insufficient_statistics: bool,
    pub agree: bool,
    pub marginals: Vec<MarginalReport>,
}

/// Grid probabilities per x-, v- and y-bin.
pub fn grid_marginals(q: &GridDistribution) -> [Vec<f64>; 3] {
    let g = q.grid();
    let (n_x, n_v, n_y) = (g.n_x(), g.n_v(), g.n_y());
    let mut mx = vec![0.0; n_x];
    let mut mv = vec![0.0; n_v];
    let mut my = vec![0.0; n_y];
    for i in 0..n_x {
        for j in 0..n_v {
            let vol = g.cell_volume(j);
            for (k, c) in q.column(i, j).iter().enumerate() {
                let m = c * vol;
                mx[i] += m;
                mv[j] += m;
                my[k] += m;
            }
        }
    }
    [mx, mv, my]
}

fn count_marginals(counts: &[u64], n_x: usize, n_v: usize, n_y: usize) -> [Vec<u64>; 3] {
    let mut cx = vec![0; n_x];
    let mut cv = vec![0; n_v];
    let mut cy = vec![0; n_y];
    for (idx, c) in counts.iter().enumerate() {
        let k = idx % n_y;
        let j = (idx / n_y) % n_v;
        let i = idx / (n_y * n_v);
        cx[i] += c;
        cv[j] += c;
        cy[k] += c;
    }
    [cx, cv, cy]
}

/// Runs the grid solver and the particle simulation to `[particles].t_end` and compares the
/// one-dimensional marginals of the rescaled density.
pub fn compare_particles(cfg: &ScenarioConfig) -> Result<CompareReport> {
    let p = cfg.particles_section()?;
    if p.dim != 1 {
        return Err(Error::config("particle/grid comparison needs [particles] dim = 1"));
    }
    let eps = cfg.particle_eps()?;
    let solver = grid_solver(cfg, eps, Some(p.t_end.max(cfg.solver_section()?.dt)), Some(p.t_end))?;
    let grid = solver.grid().clone();
    let q0 = GridDistribution::well_prepared(grid.clone(), &cfg.profile()?, p.t_end)?;
    let q = solver.run(q0, |_| Ok(()))?;
    let ens = simulate_particles(cfg)?;
    let signal = cfg.signal_spec()?;
    let hist = ens.rescaled_histogram(grid.clone(), &signal, &cfg.adapted_signal(eps, &signal)?)?;
    let [gx, gv, gy] = grid_marginals(&q);
    let [cx, cv, cy] = count_marginals(&hist.counts, grid.n_x(), grid.n_v(), grid.n_y());
    let marginals = vec![
        compare_marginal("x", &gx, &cx, ens.len()),
        compare_marginal("v", &gv, &cv, ens.len()),
        compare_marginal("y", &gy, &cy, ens.len()),
    ];
    let insufficient = marginals.iter().any(|m| m.compared_mass < RESOLVED_MASS);
    let agree = !insufficient && marginals.iter().all(|m| m.max_z < SIGMA_THRESHOLD);
    Ok(CompareReport {
        eps,
        t: q.time(),
        particles: ens.len(),
        seed: cfg.master_seed,
        out_of_range: hist.out_of_range,
        out_of_range_warning: hist.warning,
        insufficient_statistics: insufficient,
        agree,
        marginals,
    })
}

/// `compare`. Fails with a statistics error after writing the report when more than 1% of the
/// particles fall outside the y-range.
pub fn cmd_compare(cfg: &ScenarioConfig, root: &Path) -> Result<(CompareReport, RunManifest)> {
    if cfg.signal.is_none() || cfg.kernel.is_none() {
        return Err(Error::config("compare needs [signal], [kernel], [grid], [solver] and [particles]"));
    }
    let report = compare_particles(cfg)?;
    let mut manifest = RunManifest::start("compare", cfg);
    manifest.seeds.push(SeedEntry {
        run: "particles".into(),
        seed: cfg.master_seed,
    });
    let dir = command_dir(root, "compare")?;
    let mut csv = String::from("marginal,bin,grid,particles\n");
    for m in &report.marginals {
        for (b, (g, f)) in m.grid.iter().zip(&m.particles).enumerate() {
            csv.push_str(&format!("{},{b},{g:.17e},{f:.17e}\n", m.name));
        }
    }
    let path = dir.join("marginals.csv");
    write_file(&path, csv.as_bytes())?;
    manifest.add(root, &path);
    #[derive(Serialize)]
    struct Summary<'a> {
        eps: f64,
        t: f64,
        particles: usize,
        seed: u64,
        out_of_range: f64,
        insufficient_statistics: bool,
        agree: bool,
        sigma_threshold: f64,
        marginal: Vec<MarginalSummary<'a>>,
    }
    #[derive(Serialize)]
    struct MarginalSummary<'a> {
        name: &'a str,
        bins: usize,
        compared: usize,
        max_z: f64,
        worst_bin: usize,
    }
    let summary = Summary {
        eps: report.eps,
        t: report.t,
        particles: report.particles,
        seed: report.seed,
        out_of_range: report.out_of_range,
        insufficient_statistics: report.insufficient_statistics,
        agree: report.agree,
        sigma_threshold: SIGMA_THRESHOLD,
        marginal: report
            .marginals
            .iter()
            .map(|m| MarginalSummary {
                name: &m.name,
                bins: m.bins,
                compared: m.compared,
                max_z: if m.max_z.is_finite() { m.max_z } else { f64::MAX },
                worst_bin: m.worst_bin,
            })
            .collect(),
    };
    let path = dir.join("report.toml");
    write_file(
        &path,
        toml::to_string(&summary)
            .map_err(|e| Error::Diagnostics(format!("compare report: {e}")))?
            .as_bytes(),
    )?;
    manifest.add(root, &path);
    let manifest = manifest.finish(&dir)?;
    if report.out_of_range_warning {
        return Err(Error::Statistics(format!(
            "{:.2}% of the particles fall outside the y-range",
            100.0 * report.out_of_range
        )));
    }
    Ok((report, manifest))
}

/// Checks that every present section validates and that the kernel and signal satisfy their
/// stated bounds on a sample.
pub fn validate(cfg: &ScenarioConfig) -> Result<Vec<String>> {
    cfg.validate()?;
    let mut notes = Vec::new();
    if cfg.kernel.is_some() && cfg.grid.is_some() {
        let kernel = cfg.tumbling_kernel()?;
        let u: Vec<f64> = (0..=400).map(|i| -10.0 + 0.05 * i as f64).collect();
        let report = crate::kernels::verify_kernel_bounds(&cfg.kernel_spec()?, kernel.velocities(), &u)
            .map_err(|e| Error::config(format!("kernel: {e}")))?;
        notes.push(format!("kernel bounds ok (outgoing rate {:.6})", report.stored.outgoing_rate));
    }
    if cfg.signal.is_some() && cfg.grid.is_some() {
        let spec = cfg.signal_spec()?;
        let eps = cfg.solver.as_ref().map(|s| s.eps).unwrap_or(0.1);
        let adapted = cfg.adapted_signal(eps, &spec)?;
        let velocities = cfg.velocity_set(spec.dim())?;
        let length = spec.domain_length();
        let mut samples = Vec::new();
        for a in 0..velocities.len() {
            for b in 0..velocities.len() {
                for t in [0.0, 0.5 * eps, 3.0 * eps, 1.0] {
                    let x: Vec<f64> = (0..spec.dim()).map(|c| length * (0.25 + 0.5 * (c as f64 + 0.5) / spec.dim() as f64)).collect();
                    samples.push(crate::signal::LemmaSample {
                        t,
                        x,
                        v: velocities.node(a)[..spec.dim()].to_vec(),
                        v_prime: velocities.node(b)[..spec.dim()].to_vec(),
                    });
                }
            }
        }
        let r = crate::signal::verify_lemma_n(&adapted, &spec, &samples).map_err(|e| Error::config(format!("signal: {e}")))?;
        notes.push(format!(
            "adapted-signal bounds ok (ratios {:.4}, {:.4})",
            r.max_ratio_lip, r.max_ratio_decay
        ));
    }
    Ok(notes)
}
