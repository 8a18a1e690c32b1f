//! Drivers behind the command-line subcommands: the shell-to-plate
//! convergence study, the verification suite, and single solves.

use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::{ForceSource, StudyConfig};
use crate::elasticity::{positivity_gap, ElasticityTensor, Material};
use crate::energy::{EnergyAssembly, ForceDensity, PlateModel};
use crate::error::StudyError;
use crate::geometry::{geometry_field, Immersion};
use crate::grid::{d2, seminorms, Boundary, DiscreteDisplacement, DiscreteField, Grid};
use crate::io::{self, fmt_f64, Table};
use crate::minimizer::{
    self, homotopy_solve, rigidity_gap, HomotopyStep, RigidityConfig, SolveDiagnostics,
};

pub const STUDY_HEADER: &str =
    "t,c2_distance,final_energy,v_norm,v_norm_error,residual,iterations,positivity_gap";

/// Samples the configured force on the configured grid.
pub fn load_force(cfg: &StudyConfig) -> Result<ForceDensity, StudyError> {
    let grid = &cfg.grid;
    match &cfg.force {
        ForceSource::Catalog(spec) => Ok(spec.sample(grid)),
        ForceSource::Csv(paths) => {
            let mut comps = Vec::with_capacity(3);
            for p in paths {
                comps.push(match p {
                    Some(p) => io::read_field(p, grid)?,
                    None => DiscreteField::zeros(grid),
                });
            }
            let p3 = comps.pop().unwrap();
            let p2 = comps.pop().unwrap();
            let p1 = comps.pop().unwrap();
            let f = ForceDensity { p1, p2, p3 };
            if !f.is_finite() {
                return Err(crate::error::ConfigError::Key {
                    section: "force".into(),
                    key: "kind".into(),
                    message: "force CSV contains non-finite values".into(),
                }
                .into());
            }
            Ok(f)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudyRow {
    pub t: f64,
    pub c2_distance: f64,
    pub final_energy: f64,
    pub v_norm: f64,
    /// `‖u_t − u_0‖_V` against the plate minimizer.
    pub v_norm_error: f64,
    pub residual: f64,
    pub iterations: usize,
    pub positivity_gap: f64,
    pub converged: bool,
}

/// Warm- versus cold-started final energies at one `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct ColdStartRow {
    pub t: f64,
    pub warm_energy: f64,
    pub cold_energy: f64,
    pub cold_iterations: usize,
}

#[derive(Debug, Clone)]
pub struct StudyReport {
    pub config_hash: String,
    pub grid: Grid,
    /// In the order of the t-list; the plate row is last.
    pub rows: Vec<StudyRow>,
    pub steps: Vec<HomotopyStep>,
    pub cold_start: Option<Vec<ColdStartRow>>,
    /// Weighted load norm `‖p‖`.
    pub load_norm: f64,
}

impl StudyReport {
    pub fn all_converged(&self) -> bool {
        self.rows.iter().all(|r| r.converged)
    }

    pub fn max_v_norm(&self) -> f64 {
        self.rows.iter().map(|r| r.v_norm).fold(0.0, f64::max)
    }

    pub fn plate(&self) -> &StudyRow {
        self.rows.last().expect("study has at least the plate row")
    }

    pub fn table(&self) -> Table {
        let mut t = Table::new(&self.config_hash, STUDY_HEADER);
        for r in &self.rows {
            t.row(&[
                fmt_f64(r.t),
                fmt_f64(r.c2_distance),
                fmt_f64(r.final_energy),
                fmt_f64(r.v_norm),
                fmt_f64(r.v_norm_error),
                fmt_f64(r.residual),
                r.iterations.to_string(),
                fmt_f64(r.positivity_gap),
            ]);
        }
        t
    }

    pub fn cold_start_table(&self) -> Option<Table> {
        let rows = self.cold_start.as_ref()?;
        let mut t = Table::new(
            &self.config_hash,
            "t,warm_energy,cold_energy,cold_iterations",
        );
        for r in rows {
            t.row(&[
                fmt_f64(r.t),
                fmt_f64(r.warm_energy),
                fmt_f64(r.cold_energy),
                r.cold_iterations.to_string(),
            ]);
        }
        Some(t)
    }

    /// Writes `<prefix>.csv`, one displacement file per `t`, and the
    /// cold-start table when present. Returns the paths written.
    pub fn write(&self, dir: &Path, prefix: &str) -> Result<Vec<PathBuf>, StudyError> {
        let mut written = Vec::new();
        let path = dir.join(format!("{prefix}.csv"));
        self.table().write(&path)?;
        written.push(path);
        for (k, s) in self.steps.iter().enumerate() {
            let path = dir.join(format!("{prefix}_u{k}.csv"));
            io::write_displacement(&path, &self.grid, &s.u, &self.config_hash)?;
            written.push(path);
        }
        if let Some(t) = self.cold_start_table() {
            let path = dir.join(format!("{prefix}_cold_start.csv"));
            t.write(&path)?;
            written.push(path);
        }
        Ok(written)
    }
}

/// Homotopy sweep over the configured t-list with per-`t` diagnostics.
pub fn run_convergence_study(cfg: &StudyConfig) -> Result<StudyReport, StudyError> {
    let grid = cfg.grid;
    let force = load_force(cfg)?;
    let steps = homotopy_solve(
        &cfg.family,
        &cfg.ts,
        &grid,
        cfg.material,
        &force,
        &cfg.solver,
    )?;
    let u0 = &steps.last().expect("t-list is non-empty").u;
    let mut rows = Vec::with_capacity(steps.len());
    for s in &steps {
        let field = geometry_field(&s.immersion, &grid)?;
        rows.push(StudyRow {
            t: s.t,
            c2_distance: s.c2_distance,
            final_energy: s.diag.final_energy,
            v_norm: seminorms(&grid, &s.u).v_norm(),
            v_norm_error: seminorms(&grid, &s.u.sub(u0)).v_norm(),
            residual: s.diag.final_residual,
            iterations: s.diag.iterations,
            positivity_gap: positivity_gap(&field, &cfg.material)?,
            converged: s.diag.converged,
        });
    }
    let cold_start = if cfg.study.compare_cold_start {
        let mut out = Vec::with_capacity(steps.len());
        for s in &steps {
            let asm = EnergyAssembly::new(&s.immersion, &grid, cfg.material, force.clone())?;
            let (_, d) =
                minimizer::minimize(&asm, &DiscreteDisplacement::zeros(&grid), &cfg.solver)?;
            out.push(ColdStartRow {
                t: s.t,
                warm_energy: s.diag.final_energy,
                cold_energy: d.final_energy,
                cold_iterations: d.iterations,
            });
        }
        Some(out)
    } else {
        None
    };
    let load_norm = EnergyAssembly::plate(&grid, cfg.material, force).load_norm();
    Ok(StudyReport {
        config_hash: cfg.hash(),
        grid,
        rows,
        steps,
        cold_start,
        load_norm,
    })
}

/// Minimizes `J_θ` for the single surface at `cfg.t`, starting from rest.
pub fn run_solve(
    cfg: &StudyConfig,
) -> Result<(Immersion, DiscreteDisplacement, SolveDiagnostics), StudyError> {
    let force = load_force(cfg)?;
    let imm = cfg.family.with_scale(cfg.t);
    let asm = EnergyAssembly::new(&imm, &cfg.grid, cfg.material, force)?;
    let (u, d) = minimizer::minimize(&asm, &DiscreteDisplacement::zeros(&cfg.grid), &cfg.solver)?;
    Ok((imm, u, d))
}

/// Random clamped displacement with iid uniform nodal values in `[-amp, amp]`.
pub fn random_displacement(grid: &Grid, amp: f64, rng: &mut impl Rng) -> DiscreteDisplacement {
    let mut u = DiscreteDisplacement::zeros(grid);
    for c in u.components_mut() {
        for v in c.values.iter_mut() {
            *v = amp * rng.gen_range(-1.0..1.0);
        }
        c.clamp();
    }
    u
}

/// Directional-derivative check of an analytic gradient. For each random pair
/// `(u, v)` it compares `⟨g(u), v⟩` with a Richardson-extrapolated central
/// difference of the energy and returns the largest relative error.
pub fn gradient_check(
    energy: impl Fn(&DiscreteDisplacement) -> f64,
    gradient: impl Fn(&DiscreteDisplacement) -> DiscreteDisplacement,
    grid: &Grid,
    pairs: usize,
    seed: u64,
) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..pairs {
        let u = random_displacement(grid, 0.1, &mut rng);
        let v = random_displacement(grid, 1.0, &mut rng);
        let analytic = gradient(&u).dot(&v);
        let central =
            |tau: f64| (energy(&u.axpy(tau, &v)) - energy(&u.axpy(-tau, &v))) / (2.0 * tau);
        let tau = 1e-3;
        let fd = (4.0 * central(0.5 * tau) - central(tau)) / 3.0;
        let err = (analytic - fd).abs() / fd.abs().max(analytic.abs()).max(f64::MIN_POSITIVE);
        worst = worst.max(err);
    }
    worst
}

/// Largest relative difference between the general assembly specialized to the
/// plate and the dedicated plate model, over energy, strains and gradient.
pub fn plate_reduction_error(
    grid: &Grid,
    material: Material,
    force: &ForceDensity,
    samples: usize,
    seed: u64,
) -> f64 {
    let general = EnergyAssembly::plate(grid, material, force.clone());
    let plate = PlateModel::new(grid, material, force.clone());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rel = |a: f64, b: f64, scale: f64| (a - b).abs() / scale.max(f64::MIN_POSITIVE);
    let mut worst: f64 = 0.0;
    for _ in 0..samples {
        let u = random_displacement(grid, 0.1, &mut rng);
        let (ea, eb) = (general.energy(&u), plate.energy(&u));
        worst = worst.max(rel(ea, eb, ea.abs().max(eb.abs())));
        for (strain_a, strain_b) in [
            (general.membrane_strain(&u), plate.membrane_strain(&u)),
            (general.bending_strain(&u.u3), plate.bending_strain(&u.u3)),
        ] {
            let scale = strain_a
                .iter()
                .flatten()
                .flatten()
                .fold(0.0f64, |m, x| m.max(x.abs()));
            for (x, y) in strain_a
                .iter()
                .flatten()
                .flatten()
                .zip(strain_b.iter().flatten().flatten())
            {
                worst = worst.max(rel(*x, *y, scale));
            }
        }
        let (ga, gb) = (general.gradient(&u), plate.gradient(&u));
        let scale = ga.max_abs().max(gb.max_abs());
        worst = worst.max(ga.sub(&gb).max_abs() / scale.max(f64::MIN_POSITIVE));
    }
    worst
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub module: &'static str,
    pub invariant: String,
    pub observed: f64,
    pub threshold: f64,
    pub passed: bool,
}

impl CheckResult {
    fn at_most(
        module: &'static str,
        invariant: impl Into<String>,
        observed: f64,
        threshold: f64,
    ) -> Self {
        Self {
            module,
            invariant: invariant.into(),
            observed,
            threshold,
            passed: observed <= threshold,
        }
    }

    fn above(
        module: &'static str,
        invariant: impl Into<String>,
        observed: f64,
        threshold: f64,
    ) -> Self {
        Self {
            module,
            invariant: invariant.into(),
            observed,
            threshold,
            passed: observed > threshold,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct VerifyOptions {
    /// Negative control: scales the analytic `u3` gradient by `1 + 1e-3` so
    /// the gradient check must fail.
    pub corrupt_gradient: bool,
}

pub fn verification_table(checks: &[CheckResult], config_hash: &str) -> Table {
    let mut t = Table::new(config_hash, "module,invariant,observed,threshold,passed");
    for c in checks {
        t.row(&[
            c.module.to_string(),
            c.invariant.clone(),
            fmt_f64(c.observed),
            fmt_f64(c.threshold),
            c.passed.to_string(),
        ]);
    }
    t
}

/// Runs the per-module invariant checks on the configured family and grid.
pub fn run_verification(
    cfg: &StudyConfig,
    opts: &VerifyOptions,
) -> Result<Vec<CheckResult>, StudyError> {
    let grid = cfg.grid;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.solver.seed);
    let mut out = Vec::new();
    let curved: Vec<f64> = cfg.ts.iter().copied().filter(|t| *t != 0.0).collect();

    // geometry_kernel
    let mut deriv: f64 = 0.0;
    let mut gamma: f64 = 0.0;
    let mut inv: f64 = 0.0;
    for &t in curved.iter().chain([0.0].iter()) {
        let imm = cfg.family.with_scale(t);
        for _ in 0..25 {
            let y = [
                rng.gen_range(0.05..0.95) * grid.l1,
                rng.gen_range(0.05..0.95) * grid.l2,
            ];
            deriv = deriv.max(derivative_error(&imm, y)?);
            gamma = gamma.max(christoffel_error(&imm, y)?);
        }
        for p in &geometry_field(&imm, &grid)?.nodes {
            for a in 0..2 {
                for b in 0..2 {
                    let prod: f64 = (0..2).map(|c| p.a[a][c] * p.a_inv[c][b]).sum();
                    let id = if a == b { 1.0 } else { 0.0 };
                    inv = inv.max((prod - id).abs());
                }
            }
        }
    }
    out.push(CheckResult::at_most(
        "geometry_kernel",
        "analytic derivatives match finite differences",
        deriv,
        1e-8,
    ));
    out.push(CheckResult::at_most(
        "geometry_kernel",
        "Christoffel symbols match metric formula",
        gamma,
        1e-10,
    ));
    out.push(CheckResult::at_most(
        "geometry_kernel",
        "metric times inverse metric is identity",
        inv,
        1e-13,
    ));

    // elasticity_tensor
    let mut gap = f64::INFINITY;
    for &t in &curved {
        let field = geometry_field(&cfg.family.with_scale(t), &grid)?;
        gap = gap.min(positivity_gap(&field, &cfg.material)?);
    }
    if curved.is_empty() {
        gap = ElasticityTensor::flat(&cfg.material).min_eigenvalue();
    }
    out.push(CheckResult::above(
        "elasticity_tensor",
        "positivity gap over the t-list",
        gap,
        0.0,
    ));
    let plate_gap = ElasticityTensor::flat(&cfg.material).min_eigenvalue();
    out.push(CheckResult::at_most(
        "elasticity_tensor",
        "flat tensor smallest eigenvalue equals 4 mu",
        (plate_gap - 4.0 * cfg.material.mu).abs() / cfg.material.mu,
        1e-12,
    ));

    // discrete_space
    let quad = DiscreteField::from_fn(&grid, |y1, y2| y1 * y1 + 3.0 * y1 * y2 - y2 * y2);
    let mut exact: f64 = 0.0;
    for (a, b, want) in [(0, 0, 2.0), (0, 1, 3.0), (1, 1, -2.0)] {
        let d = d2(&grid, &quad, a, b, Boundary::OneSided);
        for j in 1..grid.n2 - 1 {
            for i in 1..grid.n1 - 1 {
                exact = exact.max((d.at(i, j) - want).abs());
            }
        }
    }
    out.push(CheckResult::at_most(
        "discrete_space",
        "second differences exact on quadratics",
        exact,
        1e-8,
    ));
    let u = random_displacement(&grid, 1.0, &mut rng);
    let homog = (seminorms(&grid, &u.scale(-2.5)).v_norm() - 2.5 * seminorms(&grid, &u).v_norm())
        .abs()
        / seminorms(&grid, &u).v_norm();
    out.push(CheckResult::at_most(
        "discrete_space",
        "V-norm absolutely homogeneous",
        homog,
        1e-13,
    ));

    // energy_model
    let force = load_force(cfg)?;
    let family_t = curved.first().copied().unwrap_or(0.0);
    let mut grad_err: f64 = 0.0;
    for t in [0.0, family_t] {
        let asm = EnergyAssembly::new(
            &cfg.family.with_scale(t),
            &grid,
            cfg.material,
            force.clone(),
        )?;
        let corrupt = opts.corrupt_gradient;
        let err = gradient_check(
            |u| asm.energy(u),
            |u| {
                let mut g = asm.gradient(u);
                if corrupt {
                    g.u3 = g.u3.scale(1.0 + 1e-3);
                }
                g
            },
            &grid,
            10,
            cfg.solver.seed,
        );
        grad_err = grad_err.max(err);
    }
    out.push(CheckResult::at_most(
        "energy_model",
        "gradient matches finite differences",
        grad_err,
        1e-6,
    ));
    out.push(CheckResult::at_most(
        "energy_model",
        "plate assembly equals dedicated plate model",
        plate_reduction_error(&grid, cfg.material, &force, 10, cfg.solver.seed),
        1e-12,
    ));

    // minimizer
    let probe = rigidity_gap(
        &Grid::new(grid.l1, grid.l2, 9, 9)?,
        &RigidityConfig {
            starts: 4,
            seed: cfg.solver.seed,
            ..Default::default()
        },
    );
    out.push(CheckResult::above(
        "minimizer",
        "plate rigidity functional positive on 9x9",
        probe.gap,
        0.0,
    ));
    Ok(out)
}

/// Relative error of the analytic first and second derivatives of θ at `y`
/// against Richardson-extrapolated central differences.
pub fn derivative_error(imm: &Immersion, y: [f64; 2]) -> Result<f64, StudyError> {
    let jet = imm.eval(y)?;
    let h = 1e-3 * imm.domain.l1.min(imm.domain.l2);
    let shifted = |a: usize, s: f64| -> Result<crate::geometry::Jet, StudyError> {
        let mut z = y;
        z[a] += s;
        Ok(imm.eval(z)?)
    };
    let mut worst: f64 = 0.0;
    for a in 0..2 {
        let central_value = |s: f64| -> Result<_, StudyError> {
            Ok((shifted(a, s)?.value - shifted(a, -s)?.value) / (2.0 * s))
        };
        let fd = (4.0 * central_value(0.5 * h)? - central_value(h)?) / 3.0;
        worst = worst.max((fd - jet.grad[a]).norm() / jet.grad[a].norm().max(1.0));
        for b in 0..2 {
            let central_grad = |s: f64| -> Result<_, StudyError> {
                Ok((shifted(a, s)?.grad[b] - shifted(a, -s)?.grad[b]) / (2.0 * s))
            };
            let fd = (4.0 * central_grad(0.5 * h)? - central_grad(h)?) / 3.0;
            let exact = jet.d2(a, b);
            worst = worst.max((fd - exact).norm() / exact.norm().max(1.0));
        }
    }
    Ok(worst)
}

/// Largest deviation between the Christoffel symbols and
/// `½ a^{σν}(∂_α a_{βν} + ∂_β a_{αν} − ∂_ν a_{αβ})`, with the metric
/// derivatives taken from the analytic jet.
pub fn christoffel_error(imm: &Immersion, y: [f64; 2]) -> Result<f64, StudyError> {
    let p = crate::geometry::point_geometry(imm, y)?;
    let jet = imm.eval(y)?;
    // ∂_γ a_{αβ} = ∂_{γα}θ·∂_βθ + ∂_αθ·∂_{γβ}θ
    let da = |g: usize, a: usize, b: usize| {
        jet.d2(g, a).dot(&jet.grad[b]) + jet.grad[a].dot(&jet.d2(g, b))
    };
    let mut worst: f64 = 0.0;
    for s in 0..2 {
        for a in 0..2 {
            for b in 0..2 {
                let mut v = 0.0;
                for n in 0..2 {
                    v += 0.5 * p.a_inv[s][n] * (da(a, b, n) + da(b, a, n) - da(n, a, b));
                }
                worst = worst.max((v - p.gamma[s][a][b]).abs());
            }
        }
    }
    Ok(worst)
}
