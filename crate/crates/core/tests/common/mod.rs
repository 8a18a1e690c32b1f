#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use shallow_shell::{DiscreteField, Grid, Material};

fn reflect(i: isize, n: usize) -> usize {
    if i < 0 {
        (-i) as usize
    } else if i as usize >= n {
        2 * (n - 1) - i as usize
    } else {
        i as usize
    }
}

/// Transverse deflection of the linearized clamped plate under `p3`,
/// assembled densely from its own difference formulas and solved by Cholesky.
pub fn linear_plate_deflection(grid: &Grid, mat: Material, p3: &DiscreteField) -> DiscreteField {
    let (n1, n2) = (grid.n1, grid.n2);
    let interior: Vec<usize> = (0..grid.len())
        .filter(|&k| {
            let (i, j) = grid.ij(k);
            !grid.is_boundary(i, j)
        })
        .collect();
    let mut slot = vec![usize::MAX; grid.len()];
    for (s, &k) in interior.iter().enumerate() {
        slot[k] = s;
    }
    let m = interior.len();
    let iso = 4.0 * mat.lambda * mat.mu / (mat.lambda + 2.0 * mat.mu);
    let kb = mat.eps.powi(3) / 3.0;
    let mut kmat = DMatrix::<f64>::zeros(m, m);
    let (h1, h2) = (grid.h1, grid.h2);
    for j in 0..n2 {
        for i in 0..n1 {
            let w = grid.weight(i, j);
            let at = |di: isize, dj: isize| {
                grid.idx(reflect(i as isize + di, n1), reflect(j as isize + dj, n2))
            };
            // Rows of F11, F22, F12 as sparse (node, coefficient) lists.
            let f11 = [
                (at(-1, 0), 1.0 / (h1 * h1)),
                (at(0, 0), -2.0 / (h1 * h1)),
                (at(1, 0), 1.0 / (h1 * h1)),
            ];
            let f22 = [
                (at(0, -1), 1.0 / (h2 * h2)),
                (at(0, 0), -2.0 / (h2 * h2)),
                (at(0, 1), 1.0 / (h2 * h2)),
            ];
            let c = 0.25 / (h1 * h2);
            let f12 = [
                (at(1, 1), c),
                (at(-1, 1), -c),
                (at(1, -1), -c),
                (at(-1, -1), c),
            ];
            // A:F:F = iso (F11 + F22)^2 + 4 mu (F11^2 + F22^2 + 2 F12^2)
            let mut add = |a: &[(usize, f64)], b: &[(usize, f64)], s: f64| {
                for &(p, cp) in a {
                    for &(q, cq) in b {
                        if slot[p] != usize::MAX && slot[q] != usize::MAX {
                            kmat[(slot[p], slot[q])] += kb * w * s * cp * cq;
                        }
                    }
                }
            };
            let tr: Vec<(usize, f64)> = f11.iter().chain(f22.iter()).copied().collect();
            add(&tr, &tr, iso);
            add(&f11, &f11, 4.0 * mat.mu);
            add(&f22, &f22, 4.0 * mat.mu);
            add(&f12, &f12, 8.0 * mat.mu);
        }
    }
    let rhs = DVector::from_iterator(
        m,
        interior.iter().map(|&k| {
            let (i, j) = grid.ij(k);
            grid.weight(i, j) * p3.values[k]
        }),
    );
    let sol = kmat
        .cholesky()
        .expect("bending matrix is positive definite")
        .solve(&rhs);
    let mut out = DiscreteField::zeros(grid);
    for (s, &k) in interior.iter().enumerate() {
        out.values[k] = sol[s];
    }
    out
}

/// Trapezoid-weighted relative L² distance `‖a − b‖ / ‖b‖`.
pub fn relative_l2(grid: &Grid, a: &DiscreteField, b: &DiscreteField) -> f64 {
    let mut num = 0.0;
    let mut den = 0.0;
    for k in 0..grid.len() {
        let (i, j) = grid.ij(k);
        let w = grid.weight(i, j);
        num += w * (a.values[k] - b.values[k]).powi(2);
        den += w * b.values[k].powi(2);
    }
    (num / den).sqrt()
}
