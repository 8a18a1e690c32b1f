//! Limited-memory BFGS with Armijo backtracking.
//!
//! The objective supplies `φ(α) = f(x + αd) − f(x)` directly so that the
//! sufficient-decrease test compares small differences instead of two large
//! nearly equal values.

use std::collections::VecDeque;

pub trait Objective {
    fn dim(&self) -> usize;
    fn value_gradient(&self, x: &[f64]) -> (f64, Vec<f64>);
    /// `α ↦ f(x + αd) − f(x)`.
    fn change_along<'a>(&'a self, x: &'a [f64], d: &'a [f64]) -> Box<dyn Fn(f64) -> f64 + 'a> {
        let f0 = self.value_gradient(x).0;
        Box::new(move |a| {
            let y: Vec<f64> = x.iter().zip(d).map(|(xi, di)| xi + a * di).collect();
            self.value_gradient(&y).0 - f0
        })
    }
    /// Stopping measure of a gradient; Euclidean norm unless overridden.
    fn residual(&self, g: &[f64]) -> f64 {
        dot(g, g).sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LbfgsOptions {
    pub memory: usize,
    pub max_iter: usize,
    /// Absolute threshold on [`Objective::residual`].
    pub tol: f64,
    pub ls_shrink: f64,
    pub ls_c1: f64,
    pub min_step: f64,
}

impl Default for LbfgsOptions {
    fn default() -> Self {
        Self {
            memory: 10,
            max_iter: 5000,
            tol: 1e-9,
            ls_shrink: 0.5,
            ls_c1: 1e-4,
            min_step: 1e-16,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Termination {
    Converged,
    MaxIterations,
    /// Backtracking shrank the step below `min_step`.
    Stalled,
}

#[derive(Debug, Clone)]
pub struct LbfgsOutcome {
    pub x: Vec<f64>,
    pub value: f64,
    pub residual: f64,
    pub iterations: usize,
    /// Iterations where the quasi-Newton direction was not a descent
    /// direction and the history was discarded.
    pub resets: usize,
    pub termination: Termination,
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

struct Pair {
    s: Vec<f64>,
    y: Vec<f64>,
    rho: f64,
}

/// Two-loop recursion: returns `−H g`.
fn direction(g: &[f64], hist: &VecDeque<Pair>) -> Vec<f64> {
    let mut q = g.to_vec();
    let mut alpha = vec![0.0; hist.len()];
    for (k, p) in hist.iter().enumerate().rev() {
        alpha[k] = p.rho * dot(&p.s, &q);
        for (qi, yi) in q.iter_mut().zip(&p.y) {
            *qi -= alpha[k] * yi;
        }
    }
    let gamma = match hist.back() {
        Some(p) => dot(&p.s, &p.y) / dot(&p.y, &p.y),
        None => 1.0 / dot(g, g).sqrt().max(1.0),
    };
    for qi in q.iter_mut() {
        *qi *= gamma;
    }
    for (k, p) in hist.iter().enumerate() {
        let beta = p.rho * dot(&p.y, &q);
        for (qi, si) in q.iter_mut().zip(&p.s) {
            *qi += (alpha[k] - beta) * si;
        }
    }
    for qi in q.iter_mut() {
        *qi = -*qi;
    }
    q
}

pub fn minimize<O: Objective + ?Sized>(obj: &O, x0: Vec<f64>, opts: &LbfgsOptions) -> LbfgsOutcome {
    let mut x = x0;
    let (mut f, mut g) = obj.value_gradient(&x);
    let mut residual = obj.residual(&g);
    let mut hist: VecDeque<Pair> = VecDeque::with_capacity(opts.memory);
    let mut resets = 0;
    let mut iterations = 0;
    let mut termination = Termination::MaxIterations;
    if residual <= opts.tol {
        termination = Termination::Converged;
    }
    while termination == Termination::MaxIterations && iterations < opts.max_iter {
        let mut d = direction(&g, &hist);
        let mut slope = dot(&g, &d);
        if !(slope < 0.0) {
            resets += 1;
            hist.clear();
            d = direction(&g, &hist);
            slope = dot(&g, &d);
        }
        let phi = obj.change_along(&x, &d);
        let mut step = 1.0;
        let accepted = loop {
            let delta = phi(step);
            if delta <= opts.ls_c1 * step * slope {
                break true;
            }
            step *= opts.ls_shrink;
            if step < opts.min_step {
                break false;
            }
        };
        drop(phi);
        if !accepted {
            termination = Termination::Stalled;
            break;
        }
        let x_new: Vec<f64> = x.iter().zip(&d).map(|(xi, di)| xi + step * di).collect();
        let (f_new, g_new) = obj.value_gradient(&x_new);
        let s: Vec<f64> = d.iter().map(|di| step * di).collect();
        let y: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-14 * dot(&s, &s).sqrt() * dot(&y, &y).sqrt() && sy > 0.0 {
            if hist.len() == opts.memory {
                hist.pop_front();
            }
            hist.push_back(Pair {
                s,
                y,
                rho: 1.0 / sy,
            });
        }
        x = x_new;
        f = f_new;
        g = g_new;
        iterations += 1;
        residual = obj.residual(&g);
        if residual <= opts.tol {
            termination = Termination::Converged;
        }
    }
    LbfgsOutcome {
        x,
        value: f,
        residual,
        iterations,
        resets,
        termination,
    }
}
