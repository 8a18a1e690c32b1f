use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use shallow_shell::config::{parse_grid_override, StudyConfig};
use shallow_shell::error::{ConfigError, StudyError};
use shallow_shell::geometry::geometry_field;
use shallow_shell::io::{self, fmt_f64, Table};
use shallow_shell::minimizer::{rigidity_gap, RigidityConfig};
use shallow_shell::study::{self, VerifyOptions};

const EXIT_CONFIG: u8 = 2;
const EXIT_NONCONVERGED: u8 = 3;
const EXIT_VERIFY: u8 = 4;

#[derive(Parser)]
#[command(
    name = "shallow-shell",
    version,
    about = "Nonlinear shallow-shell energy minimization"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct Common {
    /// Config file; built-in defaults when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (overrides [output] dir).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// RNG seed (overrides [solver] seed).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Grid size as <n1>x<n2> (overrides [domain] n1, n2).
    #[arg(long, global = true, value_parser = parse_grid_override)]
    grid: Option<(usize, usize)>,
}

#[derive(Subcommand)]
enum Command {
    /// Shell-to-plate convergence study over the t-list.
    Study,
    /// Per-module invariant checks.
    Verify {
        /// Perturb the analytic gradient so the gradient check must fail.
        #[arg(long, hide = true)]
        corrupt_gradient: bool,
    },
    /// Minimize the energy for the single surface at [immersion] t.
    Solve,
    /// Estimate the plate rigidity gap on the configured grid.
    Rigidity,
    /// Export sampled geometry for the surface at [immersion] t.
    Geometry,
}

fn load(common: &Common) -> Result<StudyConfig, ConfigError> {
    let mut cfg = match &common.config {
        Some(path) => StudyConfig::from_path(path)?,
        None => StudyConfig::parse(StudyConfig::default_text())?,
    };
    if let Some((n1, n2)) = common.grid {
        cfg = cfg.with_grid(n1, n2)?;
    }
    if let Some(seed) = common.seed {
        cfg.solver.seed = seed;
    }
    if let Some(out) = &common.out {
        cfg.output.dir = out.clone();
    }
    Ok(cfg)
}

fn fail(e: &StudyError) -> ExitCode {
    eprintln!("error: {e}");
    match e {
        StudyError::Config(_) => ExitCode::from(EXIT_CONFIG),
        StudyError::Solve(_) => ExitCode::from(EXIT_NONCONVERGED),
        _ => ExitCode::FAILURE,
    }
}

fn run(cmd: &Command, cfg: &StudyConfig) -> Result<ExitCode, StudyError> {
    let dir = &cfg.output.dir;
    let prefix = &cfg.output.prefix;
    let hash = cfg.hash();
    match cmd {
        Command::Study => {
            let report = study::run_convergence_study(cfg)?;
            for r in &report.rows {
                println!(
                    "t={:<8} c2={:.4e} energy={:.10e} v_norm={:.6e} error={:.6e} residual={:.3e} iterations={} gap={:.6e}{}",
                    r.t,
                    r.c2_distance,
                    r.final_energy,
                    r.v_norm,
                    r.v_norm_error,
                    r.residual,
                    r.iterations,
                    r.positivity_gap,
                    if r.converged { "" } else { " NOT CONVERGED" }
                );
            }
            if let Some(cold) = &report.cold_start {
                for c in cold {
                    println!(
                        "t={:<8} warm={:.10e} cold={:.10e}",
                        c.t, c.warm_energy, c.cold_energy
                    );
                }
            }
            let written = report.write(dir, prefix)?;
            println!("wrote {}", written[0].display());
            if !report.all_converged() {
                return Ok(ExitCode::from(EXIT_NONCONVERGED));
            }
        }
        Command::Verify { corrupt_gradient } => {
            let checks = study::run_verification(
                cfg,
                &VerifyOptions {
                    corrupt_gradient: *corrupt_gradient,
                },
            )?;
            for c in &checks {
                println!(
                    "{} {:<18} {} (observed {:e}, threshold {:e})",
                    if c.passed { "PASS" } else { "FAIL" },
                    c.module,
                    c.invariant,
                    c.observed,
                    c.threshold
                );
            }
            study::verification_table(&checks, &hash)
                .write(&dir.join(format!("{prefix}_verify.csv")))?;
            if checks.iter().any(|c| !c.passed) {
                return Ok(ExitCode::from(EXIT_VERIFY));
            }
        }
        Command::Solve => {
            let (imm, u, d) = study::run_solve(cfg)?;
            println!(
                "surface={} t={} energy={:e} residual={:e} tolerance={:e} iterations={} converged={}",
                imm.surface.kind(),
                cfg.t,
                d.final_energy,
                d.final_residual,
                d.tolerance,
                d.iterations,
                d.converged
            );
            let path = dir.join(format!("{prefix}_solution.csv"));
            io::write_displacement(&path, &cfg.grid, &u, &hash)?;
            println!("wrote {}", path.display());
            if !d.converged {
                return Ok(ExitCode::from(EXIT_NONCONVERGED));
            }
        }
        Command::Rigidity => {
            let r = rigidity_gap(
                &cfg.grid,
                &RigidityConfig {
                    starts: cfg.study.rigidity_starts,
                    seed: cfg.solver.seed,
                    ..Default::default()
                },
            );
            let mut t = Table::new(&hash, "start,value");
            for (k, v) in r.per_start.iter().enumerate() {
                t.row(&[k.to_string(), fmt_f64(*v)]);
            }
            let path = dir.join(format!("{prefix}_rigidity.csv"));
            t.write(&path)?;
            println!(
                "grid={}x{} gap={:e} converged_starts={}/{}",
                cfg.grid.n1,
                cfg.grid.n2,
                r.gap,
                r.converged,
                r.per_start.len()
            );
            println!("wrote {}", path.display());
        }
        Command::Geometry => {
            let field = geometry_field(&cfg.family.with_scale(cfg.t), &cfg.grid)?;
            let path = dir.join(format!("{prefix}_geometry.csv"));
            io::write_geometry(&path, &field, &hash)?;
            println!("max |K| = {:e}", field.max_abs_curvature());
            println!("wrote {}", path.display());
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let cfg = match load(&cli.common) {
        Ok(c) => c,
        Err(e) => return fail(&e.into()),
    };
    match run(&cli.command, &cfg) {
        Ok(code) => code,
        Err(e) => fail(&e),
    }
}
