//! Uniform rectangular grids, nodal fields, difference stencils, and the
//! quadrature and norms of the clamped space H¹₀ × H¹₀ × H²₀.
//!
//! Nodes are `y_ij = (i h1, j h2)` with `i` along the first axis. Fields store
//! one value per node in `j * n1 + i` order.
//!
//! Two discrete gradients live here. Nodal centered differences (with mirror
//! ghosts on clamped fields) feed the bending strain and the H² seminorm.
//! Tangential displacements are differentiated on a symmetric triangulation
//! of each cell (both diagonals, four P1 triangles at half weight), which has
//! no checkerboard null space; membrane strains and H¹ seminorms use it.

use crate::error::GridError;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    pub l1: f64,
    pub l2: f64,
    pub n1: usize,
    pub n2: usize,
    pub h1: f64,
    pub h2: f64,
}

impl Grid {
    pub fn new(l1: f64, l2: f64, n1: usize, n2: usize) -> Result<Self, GridError> {
        if n1 < 5 || n2 < 5 {
            return Err(GridError::TooCoarse(n1, n2));
        }
        if !(l1 > 0.0 && l2 > 0.0 && l1.is_finite() && l2.is_finite()) {
            return Err(GridError::BadLength(l1, l2));
        }
        Ok(Self {
            l1,
            l2,
            n1,
            n2,
            h1: l1 / (n1 - 1) as f64,
            h2: l2 / (n2 - 1) as f64,
        })
    }

    /// Unit square with `n` nodes per side.
    pub fn unit(n: usize) -> Result<Self, GridError> {
        Self::new(1.0, 1.0, n, n)
    }

    pub fn len(&self) -> usize {
        self.n1 * self.n2
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn idx(&self, i: usize, j: usize) -> usize {
        j * self.n1 + i
    }

    #[inline]
    pub fn ij(&self, k: usize) -> (usize, usize) {
        (k % self.n1, k / self.n1)
    }

    #[inline]
    pub fn point(&self, i: usize, j: usize) -> [f64; 2] {
        // Last node pinned to the side length so the grid covers the closed domain exactly.
        let y1 = if i + 1 == self.n1 {
            self.l1
        } else {
            i as f64 * self.h1
        };
        let y2 = if j + 1 == self.n2 {
            self.l2
        } else {
            j as f64 * self.h2
        };
        [y1, y2]
    }

    #[inline]
    pub fn is_boundary(&self, i: usize, j: usize) -> bool {
        i == 0 || j == 0 || i + 1 == self.n1 || j + 1 == self.n2
    }

    /// Trapezoidal tensor-product weight of node `(i, j)`.
    #[inline]
    pub fn weight(&self, i: usize, j: usize) -> f64 {
        let c1 = if i == 0 || i + 1 == self.n1 { 0.5 } else { 1.0 };
        let c2 = if j == 0 || j + 1 == self.n2 { 0.5 } else { 1.0 };
        c1 * c2 * self.h1 * self.h2
    }

    pub fn weights(&self) -> DiscreteField {
        let mut w = DiscreteField::zeros(self);
        for j in 0..self.n2 {
            for i in 0..self.n1 {
                w.values[self.idx(i, j)] = self.weight(i, j);
            }
        }
        w
    }

    /// Interior node indices in storage order.
    pub fn interior(&self) -> impl Iterator<Item = usize> + '_ {
        (1..self.n2 - 1).flat_map(move |j| (1..self.n1 - 1).map(move |i| self.idx(i, j)))
    }

    pub fn interior_len(&self) -> usize {
        (self.n1 - 2) * (self.n2 - 2)
    }

    pub fn same_shape(&self, other: &Grid) -> bool {
        self.n1 == other.n1 && self.n2 == other.n2 && self.l1 == other.l1 && self.l2 == other.l2
    }

    /// Same domain, refined node counts.
    pub fn with_nodes(&self, n1: usize, n2: usize) -> Result<Self, GridError> {
        Self::new(self.l1, self.l2, n1, n2)
    }
}

/// Scalar nodal field.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteField {
    pub n1: usize,
    pub n2: usize,
    pub values: Vec<f64>,
}

impl DiscreteField {
    pub fn zeros(grid: &Grid) -> Self {
        Self {
            n1: grid.n1,
            n2: grid.n2,
            values: vec![0.0; grid.len()],
        }
    }

    pub fn constant(grid: &Grid, c: f64) -> Self {
        Self {
            n1: grid.n1,
            n2: grid.n2,
            values: vec![c; grid.len()],
        }
    }

    pub fn from_fn(grid: &Grid, mut f: impl FnMut(f64, f64) -> f64) -> Self {
        let mut out = Self::zeros(grid);
        for j in 0..grid.n2 {
            for i in 0..grid.n1 {
                let [y1, y2] = grid.point(i, j);
                out.values[grid.idx(i, j)] = f(y1, y2);
            }
        }
        out
    }

    pub fn from_values(grid: &Grid, values: Vec<f64>) -> Result<Self, GridError> {
        if values.len() != grid.len() {
            return Err(GridError::SizeMismatch {
                expected: grid.len(),
                got: values.len(),
            });
        }
        Ok(Self {
            n1: grid.n1,
            n2: grid.n2,
            values,
        })
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[j * self.n1 + i]
    }

    /// Zero every boundary node.
    pub fn clamp(&mut self) {
        let (n1, n2) = (self.n1, self.n2);
        for j in 0..n2 {
            for i in 0..n1 {
                if i == 0 || j == 0 || i + 1 == n1 || j + 1 == n2 {
                    self.values[j * n1 + i] = 0.0;
                }
            }
        }
    }

    pub fn clamped(mut self) -> Self {
        self.clamp();
        self
    }

    pub fn is_clamped(&self) -> bool {
        let (n1, n2) = (self.n1, self.n2);
        (0..n2).all(|j| {
            (0..n1).all(|i| {
                !(i == 0 || j == 0 || i + 1 == n1 || j + 1 == n2) || self.values[j * n1 + i] == 0.0
            })
        })
    }

    pub fn scale(&self, c: f64) -> Self {
        Self {
            n1: self.n1,
            n2: self.n2,
            values: self.values.iter().map(|v| c * v).collect(),
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        self.axpy(1.0, other)
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.axpy(-1.0, other)
    }

    /// `self + a * other`
    pub fn axpy(&self, a: f64, other: &Self) -> Self {
        Self {
            n1: self.n1,
            n2: self.n2,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(x, y)| x + a * y)
                .collect(),
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Displacement `(u1, u2, u3)` in the clamped space.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteDisplacement {
    pub u1: DiscreteField,
    pub u2: DiscreteField,
    pub u3: DiscreteField,
}

impl DiscreteDisplacement {
    pub fn zeros(grid: &Grid) -> Self {
        Self {
            u1: DiscreteField::zeros(grid),
            u2: DiscreteField::zeros(grid),
            u3: DiscreteField::zeros(grid),
        }
    }

    /// Samples three functions and zeroes the boundary.
    pub fn from_fns(
        grid: &Grid,
        f1: impl FnMut(f64, f64) -> f64,
        f2: impl FnMut(f64, f64) -> f64,
        f3: impl FnMut(f64, f64) -> f64,
    ) -> Self {
        Self {
            u1: DiscreteField::from_fn(grid, f1).clamped(),
            u2: DiscreteField::from_fn(grid, f2).clamped(),
            u3: DiscreteField::from_fn(grid, f3).clamped(),
        }
    }

    pub fn components(&self) -> [&DiscreteField; 3] {
        [&self.u1, &self.u2, &self.u3]
    }

    pub fn components_mut(&mut self) -> [&mut DiscreteField; 3] {
        [&mut self.u1, &mut self.u2, &mut self.u3]
    }

    pub fn is_clamped(&self) -> bool {
        self.components().iter().all(|c| c.is_clamped())
    }

    pub fn clamp(&mut self) {
        for c in self.components_mut() {
            c.clamp();
        }
    }

    pub fn scale(&self, c: f64) -> Self {
        Self {
            u1: self.u1.scale(c),
            u2: self.u2.scale(c),
            u3: self.u3.scale(c),
        }
    }

    pub fn axpy(&self, a: f64, other: &Self) -> Self {
        Self {
            u1: self.u1.axpy(a, &other.u1),
            u2: self.u2.axpy(a, &other.u2),
            u3: self.u3.axpy(a, &other.u3),
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.axpy(-1.0, other)
    }

    pub fn add(&self, other: &Self) -> Self {
        self.axpy(1.0, other)
    }

    /// Plain ℓ² pairing over all nodes.
    pub fn dot(&self, other: &Self) -> f64 {
        self.components()
            .iter()
            .zip(other.components())
            .map(|(a, b)| {
                a.values
                    .iter()
                    .zip(&b.values)
                    .map(|(x, y)| x * y)
                    .sum::<f64>()
            })
            .sum()
    }

    /// Interior unknowns, component-major: all of u1, then u2, then u3.
    pub fn interior_vec(&self, grid: &Grid) -> Vec<f64> {
        let mut out = Vec::with_capacity(3 * grid.interior_len());
        for c in self.components() {
            out.extend(grid.interior().map(|k| c.values[k]));
        }
        out
    }

    pub fn from_interior_vec(grid: &Grid, x: &[f64]) -> Self {
        let m = grid.interior_len();
        assert_eq!(x.len(), 3 * m, "interior vector length");
        let mut u = Self::zeros(grid);
        for (c, comp) in u.components_mut().into_iter().enumerate() {
            for (slot, k) in grid.interior().enumerate() {
                comp.values[k] = x[c * m + slot];
            }
        }
        u
    }

    pub fn max_abs(&self) -> f64 {
        self.components()
            .iter()
            .fold(0.0, |m, c| m.max(c.max_abs()))
    }
}

/// How difference stencils treat nodes on the boundary.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Boundary {
    /// Mirror ghost `g = f(first interior node)`; encodes a zero normal
    /// derivative for fields that vanish on the boundary.
    Mirror,
    /// Second-order one-sided differences; for arbitrary sampled functions.
    OneSided,
}

#[inline]
fn mirror(k: isize, n: usize) -> usize {
    if k < 0 {
        (-k) as usize
    } else if k as usize >= n {
        2 * (n - 1) - k as usize
    } else {
        k as usize
    }
}

/// Sparse stencil row with fixed capacity.
#[derive(Debug, Clone, Copy)]
pub struct Stencil<const N: usize> {
    pub idx: [usize; N],
    pub coef: [f64; N],
}

impl<const N: usize> Stencil<N> {
    #[inline]
    pub fn apply(&self, values: &[f64]) -> f64 {
        let mut s = 0.0;
        for m in 0..N {
            s += self.coef[m] * values[self.idx[m]];
        }
        s
    }
}

/// Mirror-ghost stencils of one node: first derivatives and second
/// derivatives (11, 12, 22).
#[derive(Debug, Clone, Copy)]
pub struct NodeStencils {
    pub d1: [Stencil<2>; 2],
    pub d11: Stencil<3>,
    pub d12: Stencil<4>,
    pub d22: Stencil<3>,
}

impl Grid {
    fn mirror_idx(&self, i: isize, j: isize) -> usize {
        self.idx(mirror(i, self.n1), mirror(j, self.n2))
    }

    /// Centered stencils of node `(i, j)` with mirror ghosts.
    pub fn node_stencils(&self, i: usize, j: usize) -> NodeStencils {
        let (i, j) = (i as isize, j as isize);
        let (h1, h2) = (self.h1, self.h2);
        let m = |a, b| self.mirror_idx(a, b);
        NodeStencils {
            d1: [
                Stencil {
                    idx: [m(i + 1, j), m(i - 1, j)],
                    coef: [0.5 / h1, -0.5 / h1],
                },
                Stencil {
                    idx: [m(i, j + 1), m(i, j - 1)],
                    coef: [0.5 / h2, -0.5 / h2],
                },
            ],
            d11: Stencil {
                idx: [m(i - 1, j), m(i, j), m(i + 1, j)],
                coef: [1.0 / (h1 * h1), -2.0 / (h1 * h1), 1.0 / (h1 * h1)],
            },
            d12: Stencil {
                idx: [
                    m(i + 1, j + 1),
                    m(i - 1, j + 1),
                    m(i + 1, j - 1),
                    m(i - 1, j - 1),
                ],
                coef: {
                    let c = 0.25 / (h1 * h2);
                    [c, -c, -c, c]
                },
            },
            d22: Stencil {
                idx: [m(i, j - 1), m(i, j), m(i, j + 1)],
                coef: [1.0 / (h2 * h2), -2.0 / (h2 * h2), 1.0 / (h2 * h2)],
            },
        }
    }

    pub fn all_node_stencils(&self) -> Vec<NodeStencils> {
        let mut out = Vec::with_capacity(self.len());
        for j in 0..self.n2 {
            for i in 0..self.n1 {
                out.push(self.node_stencils(i, j));
            }
        }
        out
    }
}

/// First derivative along axis `alpha` (0 or 1).
pub fn d1(grid: &Grid, f: &DiscreteField, alpha: usize, boundary: Boundary) -> DiscreteField {
    let mut out = DiscreteField::zeros(grid);
    let (n1, n2) = (grid.n1, grid.n2);
    for j in 0..n2 {
        for i in 0..n1 {
            let k = grid.idx(i, j);
            out.values[k] = match boundary {
                Boundary::Mirror => grid.node_stencils(i, j).d1[alpha].apply(&f.values),
                Boundary::OneSided => {
                    let (pos, n, h) = if alpha == 0 {
                        (i, n1, grid.h1)
                    } else {
                        (j, n2, grid.h2)
                    };
                    let at = |p: usize| {
                        if alpha == 0 {
                            f.at(p, j)
                        } else {
                            f.at(i, p)
                        }
                    };
                    if pos == 0 {
                        (-3.0 * at(0) + 4.0 * at(1) - at(2)) / (2.0 * h)
                    } else if pos + 1 == n {
                        (3.0 * at(n - 1) - 4.0 * at(n - 2) + at(n - 3)) / (2.0 * h)
                    } else {
                        (at(pos + 1) - at(pos - 1)) / (2.0 * h)
                    }
                }
            };
        }
    }
    out
}

/// Second derivative `∂_{alpha beta}`.
pub fn d2(
    grid: &Grid,
    f: &DiscreteField,
    alpha: usize,
    beta: usize,
    boundary: Boundary,
) -> DiscreteField {
    match boundary {
        Boundary::Mirror => {
            let mut out = DiscreteField::zeros(grid);
            for j in 0..grid.n2 {
                for i in 0..grid.n1 {
                    let s = grid.node_stencils(i, j);
                    out.values[grid.idx(i, j)] = match (alpha, beta) {
                        (0, 0) => s.d11.apply(&f.values),
                        (1, 1) => s.d22.apply(&f.values),
                        _ => s.d12.apply(&f.values),
                    };
                }
            }
            out
        }
        Boundary::OneSided => {
            if alpha != beta {
                // Cross derivative: centered in the interior, composed at the boundary.
                let first = d1(grid, f, alpha.min(beta), Boundary::OneSided);
                let mut out = d1(grid, &first, alpha.max(beta), Boundary::OneSided);
                for j in 1..grid.n2 - 1 {
                    for i in 1..grid.n1 - 1 {
                        out.values[grid.idx(i, j)] = grid.node_stencils(i, j).d12.apply(&f.values);
                    }
                }
                return out;
            }
            let mut out = DiscreteField::zeros(grid);
            let (n, h) = if alpha == 0 {
                (grid.n1, grid.h1)
            } else {
                (grid.n2, grid.h2)
            };
            for j in 0..grid.n2 {
                for i in 0..grid.n1 {
                    let pos = if alpha == 0 { i } else { j };
                    let at = |p: usize| if alpha == 0 { f.at(p, j) } else { f.at(i, p) };
                    let v = if pos == 0 {
                        2.0 * at(0) - 5.0 * at(1) + 4.0 * at(2) - at(3)
                    } else if pos + 1 == n {
                        2.0 * at(n - 1) - 5.0 * at(n - 2) + 4.0 * at(n - 3) - at(n - 4)
                    } else {
                        at(pos - 1) - 2.0 * at(pos) + at(pos + 1)
                    };
                    out.values[grid.idx(i, j)] = v / (h * h);
                }
            }
            out
        }
    }
}

/// Trapezoidal rule of `f * weight`. Fixed summation order.
pub fn integrate(grid: &Grid, f: &DiscreteField, weight: &DiscreteField) -> f64 {
    let mut s = 0.0;
    for j in 0..grid.n2 {
        for i in 0..grid.n1 {
            let k = grid.idx(i, j);
            s += grid.weight(i, j) * f.values[k] * weight.values[k];
        }
    }
    s
}

/// P1 triangle of the symmetric cell split.
#[derive(Debug, Clone, Copy)]
pub struct Triangle {
    pub vertices: [usize; 3],
    /// `∂_1` and `∂_2` coefficients per vertex.
    pub grad: [[f64; 3]; 2],
    pub centroid: [f64; 2],
    /// Quadrature weight (half the geometric area; each cell is covered twice).
    pub weight: f64,
}

impl Triangle {
    #[inline]
    pub fn gradient(&self, values: &[f64]) -> [f64; 2] {
        let v = self.vertices;
        let mut g = [0.0; 2];
        for (a, ga) in g.iter_mut().enumerate() {
            *ga = self.grad[a][0] * values[v[0]]
                + self.grad[a][1] * values[v[1]]
                + self.grad[a][2] * values[v[2]];
        }
        g
    }

    #[inline]
    pub fn mean(&self, values: &[f64]) -> f64 {
        (values[self.vertices[0]] + values[self.vertices[1]] + values[self.vertices[2]]) / 3.0
    }
}

fn p1_triangle(grid: &Grid, nodes: [(usize, usize); 3]) -> Triangle {
    let p: Vec<[f64; 2]> = nodes.iter().map(|&(i, j)| grid.point(i, j)).collect();
    let det = (p[1][0] - p[0][0]) * (p[2][1] - p[0][1]) - (p[2][0] - p[0][0]) * (p[1][1] - p[0][1]);
    // Gradient of the barycentric coordinate of vertex k: rotated opposite edge over 2·area.
    let mut grad = [[0.0; 3]; 2];
    for k in 0..3 {
        let a = p[(k + 1) % 3];
        let b = p[(k + 2) % 3];
        grad[0][k] = (a[1] - b[1]) / det;
        grad[1][k] = (b[0] - a[0]) / det;
    }
    let centroid = [
        (p[0][0] + p[1][0] + p[2][0]) / 3.0,
        (p[0][1] + p[1][1] + p[2][1]) / 3.0,
    ];
    Triangle {
        vertices: nodes.map(|(i, j)| grid.idx(i, j)),
        grad,
        centroid,
        weight: 0.25 * det.abs(),
    }
}

impl Grid {
    /// Four half-weight P1 triangles per cell (both diagonal splits), in
    /// cell-major order.
    pub fn triangles(&self) -> Vec<Triangle> {
        let mut out = Vec::with_capacity(4 * (self.n1 - 1) * (self.n2 - 1));
        for j in 0..self.n2 - 1 {
            for i in 0..self.n1 - 1 {
                out.push(p1_triangle(self, [(i, j), (i + 1, j), (i, j + 1)]));
                out.push(p1_triangle(self, [(i + 1, j + 1), (i, j + 1), (i + 1, j)]));
                out.push(p1_triangle(self, [(i + 1, j), (i + 1, j + 1), (i, j)]));
                out.push(p1_triangle(self, [(i, j + 1), (i, j), (i + 1, j + 1)]));
            }
        }
        out
    }
}

/// Discrete L² norm (trapezoidal).
pub fn l2_norm(grid: &Grid, f: &DiscreteField) -> f64 {
    let mut s = 0.0;
    for j in 0..grid.n2 {
        for i in 0..grid.n1 {
            let v = f.at(i, j);
            s += grid.weight(i, j) * v * v;
        }
    }
    s.sqrt()
}

/// Discrete H¹ seminorm over the triangulation.
pub fn h1_seminorm(grid: &Grid, f: &DiscreteField) -> f64 {
    h1_seminorm_with(&grid.triangles(), f)
}

pub(crate) fn h1_seminorm_with(tris: &[Triangle], f: &DiscreteField) -> f64 {
    let mut s = 0.0;
    for t in tris {
        let g = t.gradient(&f.values);
        s += t.weight * (g[0] * g[0] + g[1] * g[1]);
    }
    s.sqrt()
}

/// Discrete H² seminorm `(∫ |∂11 f|² + 2|∂12 f|² + |∂22 f|²)^½` with mirror
/// ghosts; meaningful for clamped fields.
pub fn h2_seminorm(grid: &Grid, f: &DiscreteField) -> f64 {
    let mut s = 0.0;
    for j in 0..grid.n2 {
        for i in 0..grid.n1 {
            let st = grid.node_stencils(i, j);
            let a = st.d11.apply(&f.values);
            let b = st.d12.apply(&f.values);
            let c = st.d22.apply(&f.values);
            s += grid.weight(i, j) * (a * a + 2.0 * b * b + c * c);
        }
    }
    s.sqrt()
}

/// Componentwise norms of a displacement.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Seminorms {
    pub l2: [f64; 3],
    pub h1: [f64; 3],
    pub h2_u3: f64,
}

pub fn seminorms(grid: &Grid, u: &DiscreteDisplacement) -> Seminorms {
    let tris = grid.triangles();
    let c = u.components();
    Seminorms {
        l2: [0, 1, 2].map(|k| l2_norm(grid, c[k])),
        h1: [0, 1, 2].map(|k| h1_seminorm_with(&tris, c[k])),
        h2_u3: h2_seminorm(grid, &u.u3),
    }
}

/// `‖u1‖_{H¹} + ‖u2‖_{H¹} + ‖u3‖_{H²}`.
pub fn v_norm(grid: &Grid, u: &DiscreteDisplacement) -> f64 {
    let s = seminorms(grid, u);
    s.v_norm()
}

impl Seminorms {
    pub fn v_norm(&self) -> f64 {
        let h1 = |k: usize| (self.l2[k].powi(2) + self.h1[k].powi(2)).sqrt();
        h1(0) + h1(1) + (self.l2[2].powi(2) + self.h1[2].powi(2) + self.h2_u3.powi(2)).sqrt()
    }
}
