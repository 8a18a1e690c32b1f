//! Energy minimization, shell-to-plate homotopy, and the plate rigidity probe.

use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::elasticity::Material;
use crate::energy::{plate_membrane_strain_with, EnergyAssembly, ForceDensity};
use crate::error::SolveError;
use crate::geometry::{c2_distance, Immersion};
use crate::grid::{seminorms, DiscreteDisplacement, Grid, Triangle};
use crate::lbfgs::{self, LbfgsOptions, Objective, Termination};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    /// Residual threshold relative to `1 + ‖p‖`.
    pub grad_tol: f64,
    pub max_iter: usize,
    pub memory: usize,
    pub ls_shrink: f64,
    pub ls_c1: f64,
    pub restarts: usize,
    pub seed: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            grad_tol: 1e-9,
            max_iter: 5000,
            memory: 10,
            ls_shrink: 0.5,
            ls_c1: 1e-4,
            restarts: 1,
            seed: 0,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.ls_shrink > 0.0 && self.ls_shrink < 1.0) {
            return Err(format!(
                "ls_shrink must lie in (0, 1), got {}",
                self.ls_shrink
            ));
        }
        if !(self.ls_c1 > 0.0 && self.ls_c1 < 0.5) {
            return Err(format!("ls_c1 must lie in (0, 0.5), got {}", self.ls_c1));
        }
        if self.memory < 1 {
            return Err("memory must be >= 1".into());
        }
        if !(self.grad_tol > 0.0) {
            return Err(format!("grad_tol must be > 0, got {}", self.grad_tol));
        }
        if self.restarts < 1 {
            return Err("restarts must be >= 1".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveDiagnostics {
    pub iterations: usize,
    pub final_energy: f64,
    pub final_residual: f64,
    /// Absolute residual threshold that was applied.
    pub tolerance: f64,
    pub line_search_failures: usize,
    pub converged: bool,
    pub wall_time: Duration,
}

/// Energy over the interior unknowns in the quadrature-weighted metric:
/// `x_k = √w_k u_k`, so the Euclidean gradient norm in `x` is the
/// weighted residual.
struct ScaledEnergy<'a> {
    asm: &'a EnergyAssembly,
    scale: Vec<f64>,
}

impl<'a> ScaledEnergy<'a> {
    fn new(asm: &'a EnergyAssembly) -> Self {
        let g = &asm.grid;
        let per: Vec<f64> = g
            .interior()
            .map(|k| {
                let (i, j) = g.ij(k);
                g.weight(i, j).sqrt()
            })
            .collect();
        let mut scale = Vec::with_capacity(3 * per.len());
        for _ in 0..3 {
            scale.extend_from_slice(&per);
        }
        Self { asm, scale }
    }

    fn to_x(&self, u: &DiscreteDisplacement) -> Vec<f64> {
        u.interior_vec(&self.asm.grid)
            .iter()
            .zip(&self.scale)
            .map(|(v, s)| v * s)
            .collect()
    }

    fn to_u(&self, x: &[f64]) -> DiscreteDisplacement {
        let raw: Vec<f64> = x.iter().zip(&self.scale).map(|(v, s)| v / s).collect();
        DiscreteDisplacement::from_interior_vec(&self.asm.grid, &raw)
    }
}

impl Objective for ScaledEnergy<'_> {
    fn dim(&self) -> usize {
        self.scale.len()
    }

    fn value_gradient(&self, x: &[f64]) -> (f64, Vec<f64>) {
        let (f, g) = self.asm.energy_and_gradient(&self.to_u(x));
        let gx = g
            .interior_vec(&self.asm.grid)
            .iter()
            .zip(&self.scale)
            .map(|(v, s)| v / s)
            .collect();
        (f, gx)
    }

    fn change_along<'b>(&'b self, x: &'b [f64], d: &'b [f64]) -> Box<dyn Fn(f64) -> f64 + 'b> {
        let poly = self.asm.line_polynomial(&self.to_u(x), &self.to_u(d));
        Box::new(move |a| poly.eval(a))
    }
}

/// Absolute residual threshold `grad_tol · (1 + ‖p‖)`.
pub fn tolerance(asm: &EnergyAssembly, cfg: &SolverConfig) -> f64 {
    cfg.grad_tol * (1.0 + asm.load_norm())
}

fn run_once(
    asm: &EnergyAssembly,
    u0: &DiscreteDisplacement,
    cfg: &SolverConfig,
) -> Result<(DiscreteDisplacement, SolveDiagnostics), SolveError> {
    let start = Instant::now();
    let obj = ScaledEnergy::new(asm);
    let tol = tolerance(asm, cfg);
    let opts = LbfgsOptions {
        memory: cfg.memory,
        max_iter: cfg.max_iter,
        tol,
        ls_shrink: cfg.ls_shrink,
        ls_c1: cfg.ls_c1,
        min_step: 1e-16,
    };
    let out = lbfgs::minimize(&obj, obj.to_x(u0), &opts);
    let u = obj.to_u(&out.x);
    if out.termination == Termination::Stalled {
        return Err(SolveError::Stall {
            iterations: out.iterations,
            residual: out.residual,
            energy: out.value,
        });
    }
    Ok((
        u,
        SolveDiagnostics {
            iterations: out.iterations,
            final_energy: out.value,
            final_residual: out.residual,
            tolerance: tol,
            line_search_failures: out.resets,
            converged: out.termination == Termination::Converged,
            wall_time: start.elapsed(),
        },
    ))
}

/// Quasi-Newton minimization of `J_θ` from `u0`. With `restarts > 1`, the
/// extra runs start from seeded perturbations of `u0` and the lowest final
/// energy wins (ties keep the earliest run).
pub fn minimize(
    asm: &EnergyAssembly,
    u0: &DiscreteDisplacement,
    cfg: &SolverConfig,
) -> Result<(DiscreteDisplacement, SolveDiagnostics), SolveError> {
    let mut u0 = u0.clone();
    u0.clamp();
    let mut best = run_once(asm, &u0, cfg)?;
    if cfg.restarts > 1 {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let amp = 1e-2 * (1.0 + u0.max_abs());
        for _ in 1..cfg.restarts {
            let mut start = u0.clone();
            for c in start.components_mut() {
                for v in c.values.iter_mut() {
                    *v += amp * rng.gen_range(-1.0..1.0);
                }
                c.clamp();
            }
            let cand = run_once(asm, &start, cfg)?;
            let better = match (cand.1.converged, best.1.converged) {
                (true, false) => true,
                (false, true) => false,
                _ => cand.1.final_energy < best.1.final_energy,
            };
            if better {
                best = cand;
            }
        }
    }
    Ok(best)
}

/// One solved member of the immersion family.
#[derive(Debug, Clone)]
pub struct HomotopyStep {
    pub t: f64,
    pub immersion: Immersion,
    pub u: DiscreteDisplacement,
    pub diag: SolveDiagnostics,
    pub c2_distance: f64,
}

/// Validates a parameter list: finite, strictly decreasing, last entry 0.
pub fn check_parameter_list(ts: &[f64]) -> Result<(), String> {
    if ts.is_empty() {
        return Err("t-list is empty".into());
    }
    if ts.iter().any(|t| !t.is_finite()) {
        return Err("t-list has a non-finite entry".into());
    }
    if ts.windows(2).any(|w| !(w[0] > w[1])) {
        return Err("t-list must be strictly decreasing".into());
    }
    if *ts.last().unwrap() != 0.0 {
        return Err("t-list must end at 0".into());
    }
    Ok(())
}

/// Solves the plate from rest, then each `t` in `ts` (largest first),
/// warm-starting from the previous minimizer. Steps are returned in the order
/// of `ts`, so the plate comes last.
pub fn homotopy_solve(
    family: &Immersion,
    ts: &[f64],
    grid: &Grid,
    material: Material,
    force: &ForceDensity,
    cfg: &SolverConfig,
) -> Result<Vec<HomotopyStep>, SolveError> {
    check_parameter_list(ts).map_err(|m| {
        SolveError::Geometry(crate::error::GeometryError::BadParameter(format!(
            "ts: {m}"
        )))
    })?;
    let plate = family.with_scale(0.0);
    let plate_asm = EnergyAssembly::new(&plate, grid, material, force.clone())?;
    let (u_plate, d_plate) =
        minimize(&plate_asm, &DiscreteDisplacement::zeros(grid), cfg).map_err(|e| tag(0.0, e))?;
    let mut steps = Vec::with_capacity(ts.len());
    let mut warm = u_plate.clone();
    for &t in &ts[..ts.len() - 1] {
        let imm = family.with_scale(t);
        let asm = EnergyAssembly::new(&imm, grid, material, force.clone())
            .map_err(|e| tag(t, e.into()))?;
        let (u, diag) = minimize(&asm, &warm, cfg).map_err(|e| tag(t, e))?;
        warm = u.clone();
        steps.push(HomotopyStep {
            t,
            immersion: imm,
            u,
            diag,
            c2_distance: c2_distance(&imm, &plate, grid)?,
        });
    }
    steps.push(HomotopyStep {
        t: 0.0,
        immersion: plate,
        u: u_plate,
        diag: d_plate,
        c2_distance: 0.0,
    });
    Ok(steps)
}

fn tag(t: f64, e: SolveError) -> SolveError {
    SolveError::AtParameter {
        t,
        source: Box::new(e),
    }
}

/// `max_t ‖u_t‖_V` over a homotopy sweep.
pub fn boundedness_certificate(grid: &Grid, steps: &[HomotopyStep]) -> f64 {
    steps
        .iter()
        .map(|s| seminorms(grid, &s.u).v_norm())
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidityConfig {
    pub starts: usize,
    pub seed: u64,
    pub max_iter: usize,
    /// Stop a start once the relative decrease of `R` over an iteration falls below this.
    pub rel_tol: f64,
}

impl Default for RigidityConfig {
    fn default() -> Self {
        Self {
            starts: 20,
            seed: 0,
            max_iter: 2000,
            rel_tol: 1e-12,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RigidityResult {
    /// Best value of `R` over all starts.
    pub gap: f64,
    pub per_start: Vec<f64>,
    /// Starts that met `rel_tol` before `max_iter`.
    pub converged: usize,
    pub minimizer: DiscreteDisplacement,
}

/// `R(u) = Σ_{αβ} ‖E⁰_{αβ}(u)‖²_{L²}` and its nodal partial derivatives.
pub fn rigidity_functional(
    tris: &[Triangle],
    u: &DiscreteDisplacement,
    grid: &Grid,
) -> (f64, DiscreteDisplacement) {
    let e = plate_membrane_strain_with(tris, u);
    let mut r = 0.0;
    let mut g = DiscreteDisplacement::zeros(grid);
    for (tri, ek) in tris.iter().zip(&e) {
        r += tri.weight
            * (ek[0][0] * ek[0][0]
                + ek[0][1] * ek[0][1]
                + ek[1][0] * ek[1][0]
                + ek[1][1] * ek[1][1]);
        let d3 = tri.gradient(&u.u3.values);
        let c = 2.0 * tri.weight;
        for k in 0..3 {
            let v = tri.vertices[k];
            let gk = [tri.grad[0][k], tri.grad[1][k]];
            g.u1.values[v] += c * (ek[0][0] * gk[0] + ek[0][1] * gk[1]);
            g.u2.values[v] += c * (ek[1][0] * gk[0] + ek[1][1] * gk[1]);
            let mut x = 0.0;
            for a in 0..2 {
                for b in 0..2 {
                    x += ek[a][b] * gk[a] * d3[b];
                }
            }
            g.u3.values[v] += c * x;
        }
    }
    g.clamp();
    (r, g)
}

/// Projected-gradient minimization of `R` on the unit sphere of the V-norm:
/// each step moves along the weighted negative gradient and renormalizes.
pub fn rigidity_gap(grid: &Grid, cfg: &RigidityConfig) -> RigidityResult {
    let tris = grid.triangles();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let normalize = |u: &DiscreteDisplacement| {
        let n = seminorms(grid, u).v_norm();
        u.scale(1.0 / n)
    };
    let mut per_start = Vec::with_capacity(cfg.starts);
    let mut converged = 0;
    let mut best: Option<(f64, DiscreteDisplacement)> = None;
    for _ in 0..cfg.starts {
        let mut u = DiscreteDisplacement::zeros(grid);
        for c in u.components_mut() {
            for v in c.values.iter_mut() {
                *v = rng.gen_range(-1.0..1.0);
            }
            c.clamp();
        }
        let mut u = normalize(&u);
        let (mut r, mut g) = rigidity_functional(&tris, &u, grid);
        let mut step = 1.0;
        let mut done = false;
        for _ in 0..cfg.max_iter {
            let mut dir = g.clone();
            for c in dir.components_mut() {
                for (k, v) in c.values.iter_mut().enumerate() {
                    let (i, j) = grid.ij(k);
                    *v /= grid.weight(i, j);
                }
            }
            let mut accepted = None;
            while step > 1e-16 {
                let cand = normalize(&u.axpy(-step, &dir));
                let (rc, gc) = rigidity_functional(&tris, &cand, grid);
                if rc < r {
                    accepted = Some((cand, rc, gc));
                    break;
                }
                step *= 0.5;
            }
            match accepted {
                Some((cand, rc, gc)) => {
                    let rel = (r - rc) / r;
                    u = cand;
                    r = rc;
                    g = gc;
                    step *= 2.0;
                    if rel < cfg.rel_tol {
                        done = true;
                        break;
                    }
                }
                None => {
                    done = true;
                    break;
                }
            }
        }
        if done {
            converged += 1;
        }
        per_start.push(r);
        if best.as_ref().map_or(true, |(b, _)| r < *b) {
            best = Some((r, u));
        }
    }
    let (gap, minimizer) = best.expect("at least one start");
    RigidityResult {
        gap,
        per_start,
        converged,
        minimizer,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::energy::ForceDensity;
    use crate::geometry::{Rect, Surface};

    fn mat() -> Material {
        Material::new(1.0, 1.0, 0.1).unwrap()
    }

    #[test]
    fn config_validation() {
        assert!(SolverConfig::default().validate().is_ok());
        assert!(SolverConfig {
            ls_shrink: 1.0,
            ..Default::default()
        }
        .validate()
        .is_err());
        assert!(SolverConfig {
            ls_c1: 0.5,
            ..Default::default()
        }
        .validate()
        .is_err());
        assert!(SolverConfig {
            memory: 0,
            ..Default::default()
        }
        .validate()
        .is_err());
    }

    #[test]
    fn unloaded_solve_takes_no_iterations() {
        let g = Grid::unit(9).unwrap();
        let asm = EnergyAssembly::plate(&g, mat(), ForceDensity::zero(&g));
        let (u, d) = minimize(
            &asm,
            &DiscreteDisplacement::zeros(&g),
            &SolverConfig::default(),
        )
        .unwrap();
        assert_eq!(d.iterations, 0);
        assert!(d.converged);
        assert_eq!(u, DiscreteDisplacement::zeros(&g));
    }

    #[test]
    fn converged_solve_meets_residual_contract() {
        let g = Grid::unit(9).unwrap();
        let imm = Immersion::new(Surface::paraboloid(0.2), Rect::unit());
        let asm = EnergyAssembly::new(
            &imm,
            &g,
            mat(),
            ForceDensity::constant(&g, [0.5, -0.3, 1.0]),
        )
        .unwrap();
        let cfg = SolverConfig::default();
        let (u, d) = minimize(&asm, &DiscreteDisplacement::zeros(&g), &cfg).unwrap();
        assert!(d.converged, "{d:?}");
        assert!(asm.residual_norm(&u) <= cfg.grad_tol * (1.0 + asm.load_norm()));
        assert!(d.final_energy < 0.0);
    }

    #[test]
    fn parameter_list_rules() {
        assert!(check_parameter_list(&[0.0]).is_ok());
        assert!(check_parameter_list(&[0.2, 0.1, 0.0]).is_ok());
        assert!(check_parameter_list(&[0.2, 0.1]).is_err());
        assert!(check_parameter_list(&[0.1, 0.2, 0.0]).is_err());
        assert!(check_parameter_list(&[]).is_err());
    }

    #[test]
    fn single_plate_homotopy() {
        let g = Grid::unit(9).unwrap();
        let fam = Immersion::new(Surface::paraboloid(1.0), Rect::unit());
        let f = ForceDensity::constant(&g, [0.0, 0.0, 1.0]);
        let steps = homotopy_solve(&fam, &[0.0], &g, mat(), &f, &SolverConfig::default()).unwrap();
        assert_eq!(steps.len(), 1);
        assert_eq!(steps[0].c2_distance, 0.0);
        assert_eq!(
            boundedness_certificate(&g, &steps),
            seminorms(&g, &steps[0].u).v_norm()
        );
    }

    #[test]
    fn zero_force_sweep_is_at_rest() {
        let g = Grid::unit(9).unwrap();
        let fam = Immersion::new(Surface::paraboloid(1.0), Rect::unit());
        let steps = homotopy_solve(
            &fam,
            &[0.2, 0.1, 0.0],
            &g,
            mat(),
            &ForceDensity::zero(&g),
            &SolverConfig::default(),
        )
        .unwrap();
        assert_eq!(boundedness_certificate(&g, &steps), 0.0);
    }

    #[test]
    fn rigidity_functional_gradient_matches_differences() {
        let g = Grid::unit(9).unwrap();
        let tris = g.triangles();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut u = DiscreteDisplacement::zeros(&g);
        let mut v = DiscreteDisplacement::zeros(&g);
        for c in u.components_mut().into_iter().chain(v.components_mut()) {
            for x in c.values.iter_mut() {
                *x = rng.gen_range(-0.2..0.2);
            }
            c.clamp();
        }
        let (_, gr) = rigidity_functional(&tris, &u, &g);
        let tau = 1e-6;
        let fd = (rigidity_functional(&tris, &u.axpy(tau, &v), &g).0
            - rigidity_functional(&tris, &u.axpy(-tau, &v), &g).0)
            / (2.0 * tau);
        let an = gr.dot(&v);
        assert!((fd - an).abs() <= 1e-6 * an.abs(), "{fd} {an}");
    }
}
