use std::path::{Path, PathBuf};
use std::process::ExitCode;

use chemotaxis::config::ScenarioConfig;
use chemotaxis::diagnostics::read_table;
use chemotaxis::harness;
use chemotaxis::plot::{line_plot, log_log_plot, Series};
use chemotaxis::{Error, Result};
use clap::{Args, Parser, Subcommand};

/// Kinetic chemotaxis solvers, ε-sweeps and particle cross-validation.
#[derive(Debug, Parser)]
#[command(name = "chemotaxis", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Debug, Args)]
struct Common {
    /// Scenario file; the built-in default scenario when omitted.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Overrides `master_seed`.
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,
    /// Output root; overrides `[output].directory`.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Worker threads.
    #[arg(long, global = true, value_name = "N")]
    jobs: Option<usize>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Kinetic grid solver at `[solver].eps`.
    RunGrid,
    /// Limiting velocity-jump model.
    RunLimit,
    /// Particle simulation to `[particles].t_end`.
    RunParticles,
    /// Kinetic runs for every `[sweep]` eps against one limit run, with rate fits.
    Sweep,
    /// Particle histogram against the grid solution.
    Compare,
    /// SVG plots from diagnostics or rate CSVs.
    Plot {
        #[arg(required = true)]
        csv: Vec<PathBuf>,
    },
    /// Validates the scenario and checks kernel and signal bounds.
    Validate,
}

fn load(common: &Common) -> Result<ScenarioConfig> {
    let mut cfg = match &common.config {
        Some(p) => ScenarioConfig::load(p)?,
        None => ScenarioConfig::default_scenario(),
    };
    if let Some(s) = common.seed {
        cfg.master_seed = s;
    }
    if let Some(o) = &common.out {
        cfg.output.directory = o.clone();
    }
    Ok(cfg)
}

fn plot_csv(path: &Path, out: Option<&Path>) -> Result<Vec<PathBuf>> {
    let file = std::fs::File::open(path).map_err(|e| Error::config(format!("cannot open {}: {e}", path.display())))?;
    let table = read_table(std::io::BufReader::new(file))?;
    if table.rows.is_empty() {
        return Err(Error::config(format!("{} has no data rows", path.display())));
    }
    let dir = match out {
        Some(d) => d.to_path_buf(),
        None => path.parent().map(Path::to_path_buf).unwrap_or_default(),
    };
    std::fs::create_dir_all(&dir)?;
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("plot");
    let mut written = Vec::new();
    let (axis, log) = if table.columns.iter().any(|c| c == "eps") {
        ("eps", true)
    } else if table.columns.iter().any(|c| c == "t") {
        ("t", false)
    } else {
        return Err(Error::config(format!("{} has neither a `t` nor an `eps` column", path.display())));
    };
    let x = table.column(axis).expect("axis column exists");
    for name in table.columns.iter().filter(|c| c.as_str() != axis) {
        let y = table.column(name).expect("column exists");
        if y.iter().all(|v| v.is_nan()) {
            continue;
        }
        let svg = if log {
            log_log_plot(name, axis, name, &x, &y)?
        } else {
            line_plot(name, axis, name, &[Series {
                name: name.clone(),
                x: x.clone(),
                y,
            }])?
        };
        let target = dir.join(format!("{stem}_{name}.svg"));
        std::fs::write(&target, svg)?;
        written.push(target);
    }
    Ok(written)
}

fn run(cli: Cli) -> Result<()> {
    if let Some(n) = cli.common.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build_global()
            .map_err(|e| Error::config(format!("cannot start {n} workers: {e}")))?;
    }
    if let Command::Plot { csv } = &cli.command {
        for path in csv {
            for svg in plot_csv(path, cli.common.out.as_deref())? {
                println!("wrote {}", svg.display());
            }
        }
        return Ok(());
    }
    let cfg = load(&cli.common)?;
    let root = cfg.output.directory.clone();
    match cli.command {
        Command::RunGrid => {
            let (run, manifest) = harness::cmd_run_grid(&cfg, &root)?;
            let last = run.records.last().expect("at least one record");
            println!(
                "run-grid: eps {} t {} mass {:.15} l1_to_maxwellian {:.6e} ({} records)",
                run.eps,
                last.t,
                last.mass,
                last.l1_to_maxwellian,
                run.records.len()
            );
            print_outputs(&root, &manifest.outputs);
        }
        Command::RunLimit => {
            let (records, manifest) = harness::cmd_run_limit(&cfg, &root)?;
            let last = records.last().expect("at least one record");
            println!("run-limit: t {} mass {:.15} moment_x1 {:.6}", last.t, last.mass, last.moment_x1);
            print_outputs(&root, &manifest.outputs);
        }
        Command::RunParticles => {
            let (ens, manifest) = harness::cmd_run_particles(&cfg, &root)?;
            println!(
                "run-particles: {} particles, t {}, eps {}, seed {}",
                ens.len(),
                ens.time(),
                ens.eps(),
                ens.master_seed()
            );
            print_outputs(&root, &manifest.outputs);
        }
        Command::Sweep => {
            let (report, manifest) = harness::cmd_sweep(&cfg, &root)?;
            for e in &report.entries {
                println!(
                    "eps {:<8} time_integrated_l1_sq {:.6e} pointwise_l1 {:.6e}",
                    e.eps, e.time_integrated_l1_sq, e.pointwise_l1_end
                );
            }
            for fit in [&report.time_integrated, &report.pointwise] {
                match fit.slope {
                    Some(s) => println!("{}: slope {s:.4} r² {:.4}", fit.functional, fit.r_squared.unwrap_or(f64::NAN)),
                    None => println!("{}: {}", fit.functional, fit.note),
                }
            }
            print_outputs(&root, &manifest.outputs);
        }
        Command::Compare => {
            let (report, manifest) = harness::cmd_compare(&cfg, &root)?;
            for m in &report.marginals {
                println!(
                    "{}: max discrepancy {:.3} standard errors over {} of {} bins",
                    m.name, m.max_z, m.compared, m.bins
                );
            }
            if report.insufficient_statistics {
                eprintln!("warning: insufficient statistics for a {}σ comparison", harness::SIGMA_THRESHOLD);
            } else {
                println!("agreement within {}σ: {}", harness::SIGMA_THRESHOLD, report.agree);
            }
            print_outputs(&root, &manifest.outputs);
        }
        Command::Validate => {
            for note in harness::validate(&cfg)? {
                println!("{note}");
            }
            println!("scenario ok (config hash {})", harness::config_hash(&cfg));
        }
        Command::Plot { .. } => unreachable!(),
    }
    Ok(())
}

fn print_outputs(root: &Path, outputs: &[String]) {
    for o in outputs {
        println!("  {}", root.join(o).display());
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
