//! Shallow-shell energy, its strains and its exact discrete gradient.
//!
//! The discrete energy is
//!
//! ```text
//! J(u) = ½ Σ_T ω_T √a ε A:E(u):E(u)            membrane, P1 triangles
//!      + ½ Σ_n w_n √a (ε³/3) A:F(u3):F(u3)      bending, nodal stencils
//!      −   Σ_n w_n √a pⁱ u_i                     load
//! ```
//!
//! where `E_{αβ} = ½(∂_β u_α + ∂_α u_β) − Γ^σ_{αβ} u_σ − b_{αβ} u3 + ½ ∂_α u3 ∂_β u3`
//! and `F_{αβ} = ∂_{αβ} u3 − Γ^σ_{αβ} ∂_σ u3`. Values `u_σ, u3` entering the
//! membrane strain are vertex means on each triangle; geometry is evaluated
//! analytically at triangle centroids and at nodes.
//!
//! [`PlateModel`] is a separate, flat-only implementation of the plate energy
//! used to cross-check the shell path at `θ = θ0`.

use crate::elasticity::{ElasticityTensor, Material};
use crate::error::GeometryError;
use crate::geometry::{
    geometry_field, point_geometry, Immersion, Mat2, PointGeometry, Rect, SurfaceGeometryField,
};
use crate::grid::{DiscreteDisplacement, DiscreteField, Grid, NodeStencils, Triangle};

const ZERO2: Mat2 = [[0.0; 2]; 2];

#[inline]
fn dot2(a: &Mat2, b: &Mat2) -> f64 {
    a[0][0] * b[0][0] + a[0][1] * b[0][1] + a[1][0] * b[1][0] + a[1][1] * b[1][1]
}

/// Shape of a sampled force density; amplitudes are per component.
#[derive(Debug, Clone, PartialEq)]
pub enum ForceKind {
    Constant,
    /// `amp_i · y1^e1 · y2^e2`
    Polynomial {
        e1: i32,
        e2: i32,
    },
    /// `amp_i · exp(−|y − c|² / (2σ²))`
    GaussianBump {
        center: [f64; 2],
        sigma: f64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForceSpec {
    pub kind: ForceKind,
    pub amplitude: [f64; 3],
}

impl ForceSpec {
    pub fn constant(p: [f64; 3]) -> Self {
        Self {
            kind: ForceKind::Constant,
            amplitude: p,
        }
    }

    pub fn profile(&self, y1: f64, y2: f64) -> f64 {
        match self.kind {
            ForceKind::Constant => 1.0,
            ForceKind::Polynomial { e1, e2 } => y1.powi(e1) * y2.powi(e2),
            ForceKind::GaussianBump { center, sigma } => {
                let r2 = (y1 - center[0]).powi(2) + (y2 - center[1]).powi(2);
                (-r2 / (2.0 * sigma * sigma)).exp()
            }
        }
    }

    pub fn sample(&self, grid: &Grid) -> ForceDensity {
        let [a1, a2, a3] = self.amplitude;
        ForceDensity {
            p1: DiscreteField::from_fn(grid, |y1, y2| a1 * self.profile(y1, y2)),
            p2: DiscreteField::from_fn(grid, |y1, y2| a2 * self.profile(y1, y2)),
            p3: DiscreteField::from_fn(grid, |y1, y2| a3 * self.profile(y1, y2)),
        }
    }
}

/// Nodal components `p¹, p², p³` of the applied force density.
#[derive(Debug, Clone, PartialEq)]
pub struct ForceDensity {
    pub p1: DiscreteField,
    pub p2: DiscreteField,
    pub p3: DiscreteField,
}

impl ForceDensity {
    pub fn zero(grid: &Grid) -> Self {
        Self {
            p1: DiscreteField::zeros(grid),
            p2: DiscreteField::zeros(grid),
            p3: DiscreteField::zeros(grid),
        }
    }

    pub fn constant(grid: &Grid, p: [f64; 3]) -> Self {
        ForceSpec::constant(p).sample(grid)
    }

    pub fn components(&self) -> [&DiscreteField; 3] {
        [&self.p1, &self.p2, &self.p3]
    }

    pub fn scale(&self, c: f64) -> Self {
        Self {
            p1: self.p1.scale(c),
            p2: self.p2.scale(c),
            p3: self.p3.scale(c),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.components()
            .iter()
            .all(|c| c.values.iter().all(|v| v.is_finite()))
    }
}

/// Membrane strains on triangles, bending strains at nodes. Entries are
/// symmetric 2×2 matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct StrainFields {
    pub membrane: Vec<Mat2>,
    pub bending: Vec<Mat2>,
}

/// θ-bound energy evaluator.
#[derive(Debug, Clone)]
pub struct EnergyAssembly {
    pub grid: Grid,
    pub material: Material,
    pub force: ForceDensity,
    pub geometry: SurfaceGeometryField,
    pub tensors: Vec<ElasticityTensor>,
    pub triangles: Vec<Triangle>,
    pub tri_geometry: Vec<PointGeometry>,
    pub tri_tensors: Vec<ElasticityTensor>,
    stencils: Vec<NodeStencils>,
    /// `w_n √a_n`
    area: Vec<f64>,
    /// `ω_T √a_T`
    tri_area: Vec<f64>,
}

/// Quartic `φ(α) = J(u + αd) − J(u) = c1 α + c2 α² + c3 α³ + c4 α⁴`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinePolynomial(pub [f64; 4]);

impl LinePolynomial {
    #[inline]
    pub fn eval(&self, a: f64) -> f64 {
        let [c1, c2, c3, c4] = self.0;
        a * (c1 + a * (c2 + a * (c3 + a * c4)))
    }

    /// `φ'(0)`, the directional derivative.
    pub fn slope(&self) -> f64 {
        self.0[0]
    }
}

impl EnergyAssembly {
    pub fn new(
        imm: &Immersion,
        grid: &Grid,
        material: Material,
        force: ForceDensity,
    ) -> Result<Self, GeometryError> {
        let geometry = geometry_field(imm, grid)?;
        let triangles = grid.triangles();
        let tri_geometry = triangles
            .iter()
            .map(|t| point_geometry(imm, t.centroid))
            .collect::<Result<Vec<_>, _>>()?;
        let tensors = geometry
            .nodes
            .iter()
            .map(|p| ElasticityTensor::build(&p.a_inv, &material))
            .collect();
        let tri_tensors = tri_geometry
            .iter()
            .map(|p| ElasticityTensor::build(&p.a_inv, &material))
            .collect();
        let mut area = vec![0.0; grid.len()];
        for j in 0..grid.n2 {
            for i in 0..grid.n1 {
                let k = grid.idx(i, j);
                area[k] = grid.weight(i, j) * geometry.nodes[k].sqrt_a;
            }
        }
        let tri_area = triangles
            .iter()
            .zip(&tri_geometry)
            .map(|(t, g)| t.weight * g.sqrt_a)
            .collect();
        Ok(Self {
            grid: *grid,
            material,
            force,
            geometry,
            tensors,
            triangles,
            tri_geometry,
            tri_tensors,
            stencils: grid.all_node_stencils(),
            area,
            tri_area,
        })
    }

    /// Shell path evaluated on the plate immersion.
    pub fn plate(grid: &Grid, material: Material, force: ForceDensity) -> Self {
        Self::new(&Immersion::plate(Rect::of(grid)), grid, material, force)
            .expect("plate immersion is never degenerate")
    }

    /// Same geometry and material, different load.
    pub fn with_force(&self, force: ForceDensity) -> Self {
        Self {
            force,
            ..self.clone()
        }
    }

    fn membrane_at(&self, t: usize, u: &DiscreteDisplacement) -> (Mat2, [f64; 2]) {
        let tri = &self.triangles[t];
        let g = &self.tri_geometry[t];
        let d1 = tri.gradient(&u.u1.values);
        let d2 = tri.gradient(&u.u2.values);
        let d3 = tri.gradient(&u.u3.values);
        let m = [tri.mean(&u.u1.values), tri.mean(&u.u2.values)];
        let m3 = tri.mean(&u.u3.values);
        let du = [d1, d2];
        let mut e = ZERO2;
        for a in 0..2 {
            for b in 0..2 {
                e[a][b] = 0.5 * (du[a][b] + du[b][a])
                    - g.gamma[0][a][b] * m[0]
                    - g.gamma[1][a][b] * m[1]
                    - g.b[a][b] * m3
                    + 0.5 * d3[a] * d3[b];
            }
        }
        (e, d3)
    }

    /// `E'(u)(v)` on triangle `t`, given `∂u3` there.
    fn membrane_variation_at(&self, t: usize, du3: [f64; 2], v: &DiscreteDisplacement) -> Mat2 {
        let tri = &self.triangles[t];
        let g = &self.tri_geometry[t];
        let dv = [tri.gradient(&v.u1.values), tri.gradient(&v.u2.values)];
        let dv3 = tri.gradient(&v.u3.values);
        let m = [tri.mean(&v.u1.values), tri.mean(&v.u2.values)];
        let m3 = tri.mean(&v.u3.values);
        let mut e = ZERO2;
        for a in 0..2 {
            for b in 0..2 {
                e[a][b] = 0.5 * (dv[a][b] + dv[b][a])
                    - g.gamma[0][a][b] * m[0]
                    - g.gamma[1][a][b] * m[1]
                    - g.b[a][b] * m3
                    + 0.5 * (du3[a] * dv3[b] + dv3[a] * du3[b]);
            }
        }
        e
    }

    fn bending_at(&self, n: usize, u3: &[f64]) -> (Mat2, [f64; 2]) {
        let st = &self.stencils[n];
        let g = &self.geometry.nodes[n];
        let d = [st.d1[0].apply(u3), st.d1[1].apply(u3)];
        let dd = [
            [st.d11.apply(u3), st.d12.apply(u3)],
            [st.d12.apply(u3), st.d22.apply(u3)],
        ];
        let mut f = ZERO2;
        for a in 0..2 {
            for b in 0..2 {
                f[a][b] = dd[a][b] - g.gamma[0][a][b] * d[0] - g.gamma[1][a][b] * d[1];
            }
        }
        (f, d)
    }

    /// `E_{αβ}(u)` per triangle.
    pub fn membrane_strain(&self, u: &DiscreteDisplacement) -> Vec<Mat2> {
        (0..self.triangles.len())
            .map(|t| self.membrane_at(t, u).0)
            .collect()
    }

    /// `F_{αβ}(u3)` per node.
    pub fn bending_strain(&self, u3: &DiscreteField) -> Vec<Mat2> {
        (0..self.grid.len())
            .map(|n| self.bending_at(n, &u3.values).0)
            .collect()
    }

    pub fn strains(&self, u: &DiscreteDisplacement) -> StrainFields {
        StrainFields {
            membrane: self.membrane_strain(u),
            bending: self.bending_strain(&u.u3),
        }
    }

    /// `E'(u)(v)` per triangle.
    pub fn strain_first_variation(
        &self,
        u: &DiscreteDisplacement,
        v: &DiscreteDisplacement,
    ) -> Vec<Mat2> {
        (0..self.triangles.len())
            .map(|t| {
                let du3 = self.triangles[t].gradient(&u.u3.values);
                self.membrane_variation_at(t, du3, v)
            })
            .collect()
    }

    fn bending_factor(&self) -> f64 {
        self.material.eps.powi(3) / 3.0
    }

    /// Membrane, bending and load parts; `J = membrane + bending − load`.
    pub fn energy_parts(&self, u: &DiscreteDisplacement) -> (f64, f64, f64) {
        let mut membrane = 0.0;
        for t in 0..self.triangles.len() {
            let (e, _) = self.membrane_at(t, u);
            membrane += self.tri_area[t] * self.tri_tensors[t].contract(&e, &e);
        }
        let mut bending = 0.0;
        for n in 0..self.grid.len() {
            let (f, _) = self.bending_at(n, &u.u3.values);
            bending += self.area[n] * self.tensors[n].contract(&f, &f);
        }
        (
            0.5 * self.material.eps * membrane,
            0.5 * self.bending_factor() * bending,
            self.load(u),
        )
    }

    /// `∫ pⁱ u_i √a`.
    pub fn load(&self, u: &DiscreteDisplacement) -> f64 {
        let mut s = 0.0;
        for n in 0..self.grid.len() {
            s += self.area[n]
                * (self.force.p1.values[n] * u.u1.values[n]
                    + self.force.p2.values[n] * u.u2.values[n]
                    + self.force.p3.values[n] * u.u3.values[n]);
        }
        s
    }

    pub fn energy(&self, u: &DiscreteDisplacement) -> f64 {
        let (m, b, l) = self.energy_parts(u);
        m + b - l
    }

    /// Partial derivatives `∂J/∂u_i(node)`, zero on the boundary.
    pub fn gradient(&self, u: &DiscreteDisplacement) -> DiscreteDisplacement {
        self.energy_and_gradient(u).1
    }

    pub fn energy_and_gradient(&self, u: &DiscreteDisplacement) -> (f64, DiscreteDisplacement) {
        let mut g = DiscreteDisplacement::zeros(&self.grid);
        let eps = self.material.eps;
        let mut membrane = 0.0;
        for t in 0..self.triangles.len() {
            let tri = &self.triangles[t];
            let geo = &self.tri_geometry[t];
            let (e, d3) = self.membrane_at(t, u);
            let s = self.tri_tensors[t].apply(&e);
            let c = self.tri_area[t];
            membrane += c * dot2(&s, &e);
            let c = eps * c;
            let sg = [dot2(&s, &geo.gamma[0]) / 3.0, dot2(&s, &geo.gamma[1]) / 3.0];
            let sb = dot2(&s, &geo.b) / 3.0;
            // S·∂u3, reused for every vertex.
            let sd3 = [
                s[0][0] * d3[0] + s[0][1] * d3[1],
                s[1][0] * d3[0] + s[1][1] * d3[1],
            ];
            for k in 0..3 {
                let v = tri.vertices[k];
                let gk = [tri.grad[0][k], tri.grad[1][k]];
                g.u1.values[v] += c * (s[0][0] * gk[0] + s[0][1] * gk[1] - sg[0]);
                g.u2.values[v] += c * (s[1][0] * gk[0] + s[1][1] * gk[1] - sg[1]);
                g.u3.values[v] += c * (gk[0] * sd3[0] + gk[1] * sd3[1] - sb);
            }
        }
        let kb = self.bending_factor();
        let mut bending = 0.0;
        for n in 0..self.grid.len() {
            let st = &self.stencils[n];
            let geo = &self.geometry.nodes[n];
            let (f, _) = self.bending_at(n, &u.u3.values);
            let m = self.tensors[n].apply(&f);
            bending += self.area[n] * dot2(&m, &f);
            let c = kb * self.area[n];
            let g3 = &mut g.u3.values;
            for q in 0..3 {
                g3[st.d11.idx[q]] += c * m[0][0] * st.d11.coef[q];
                g3[st.d22.idx[q]] += c * m[1][1] * st.d22.coef[q];
            }
            for q in 0..4 {
                g3[st.d12.idx[q]] += c * (m[0][1] + m[1][0]) * st.d12.coef[q];
            }
            for s in 0..2 {
                let mg = c * dot2(&m, &geo.gamma[s]);
                for q in 0..2 {
                    g3[st.d1[s].idx[q]] -= mg * st.d1[s].coef[q];
                }
            }
        }
        let load = self.load(u);
        for n in 0..self.grid.len() {
            g.u1.values[n] -= self.area[n] * self.force.p1.values[n];
            g.u2.values[n] -= self.area[n] * self.force.p2.values[n];
            g.u3.values[n] -= self.area[n] * self.force.p3.values[n];
        }
        g.clamp();
        (0.5 * eps * membrane + 0.5 * kb * bending - load, g)
    }

    /// Exact quartic of `J(u + αd) − J(u)`; avoids cancellation against `J(u)`.
    pub fn line_polynomial(
        &self,
        u: &DiscreteDisplacement,
        d: &DiscreteDisplacement,
    ) -> LinePolynomial {
        let mut c = [0.0; 4];
        let eps = self.material.eps;
        for t in 0..self.triangles.len() {
            let tri = &self.triangles[t];
            let (e, du3) = self.membrane_at(t, u);
            let l = self.membrane_variation_at(t, du3, d);
            let dd3 = tri.gradient(&d.u3.values);
            let mut q = ZERO2;
            for a in 0..2 {
                for b in 0..2 {
                    q[a][b] = 0.5 * dd3[a] * dd3[b];
                }
            }
            let a = &self.tri_tensors[t];
            let s = a.apply(&e);
            let al = a.apply(&l);
            let aq = a.apply(&q);
            let w = eps * self.tri_area[t];
            c[0] += w * dot2(&s, &l);
            c[1] += w * (dot2(&s, &q) + 0.5 * dot2(&al, &l));
            c[2] += w * dot2(&al, &q);
            c[3] += w * 0.5 * dot2(&aq, &q);
        }
        let kb = self.bending_factor();
        for n in 0..self.grid.len() {
            let (f, _) = self.bending_at(n, &u.u3.values);
            let (fd, _) = self.bending_at(n, &d.u3.values);
            let m = self.tensors[n].apply(&fd);
            let w = kb * self.area[n];
            c[0] += w * dot2(&m, &f);
            c[1] += w * 0.5 * dot2(&m, &fd);
        }
        c[0] -= self.load(d);
        LinePolynomial(c)
    }

    /// `(Σ_n g_n² / w_n)^½` over interior nodes: the mesh-independent L²
    /// norm of the Riesz representative of the gradient.
    pub fn residual_norm(&self, u: &DiscreteDisplacement) -> f64 {
        weighted_dual_norm(&self.grid, &self.gradient(u))
    }

    /// `(Σ_n w_n |p_n|²)^½`, the scale of the stopping tolerance.
    pub fn load_norm(&self) -> f64 {
        let mut s = 0.0;
        for j in 0..self.grid.n2 {
            for i in 0..self.grid.n1 {
                let k = self.grid.idx(i, j);
                let p = [
                    self.force.p1.values[k],
                    self.force.p2.values[k],
                    self.force.p3.values[k],
                ];
                s += self.grid.weight(i, j) * (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]);
            }
        }
        s.sqrt()
    }
}

/// `(Σ_n g_n² / w_n)^½` over all nodes with nonzero weight.
pub fn weighted_dual_norm(grid: &Grid, g: &DiscreteDisplacement) -> f64 {
    let mut s = 0.0;
    for j in 0..grid.n2 {
        for i in 0..grid.n1 {
            let k = grid.idx(i, j);
            let w = grid.weight(i, j);
            for c in g.components() {
                s += c.values[k] * c.values[k] / w;
            }
        }
    }
    s.sqrt()
}

/// `e_{αβ}(u) = ½(∂_α u_β + ∂_β u_α)` per triangle.
pub fn linearized_strain(grid: &Grid, u: &DiscreteDisplacement) -> Vec<Mat2> {
    linearized_strain_with(&grid.triangles(), u)
}

pub(crate) fn linearized_strain_with(tris: &[Triangle], u: &DiscreteDisplacement) -> Vec<Mat2> {
    tris.iter()
        .map(|t| {
            let du = [t.gradient(&u.u1.values), t.gradient(&u.u2.values)];
            let mut e = ZERO2;
            for a in 0..2 {
                for b in 0..2 {
                    e[a][b] = 0.5 * (du[a][b] + du[b][a]);
                }
            }
            e
        })
        .collect()
}

/// `E⁰_{αβ}(u) = ½(∂_α u_β + ∂_β u_α) + ½ ∂_α u3 ∂_β u3` per triangle.
pub fn plate_membrane_strain(grid: &Grid, u: &DiscreteDisplacement) -> Vec<Mat2> {
    plate_membrane_strain_with(&grid.triangles(), u)
}

pub(crate) fn plate_membrane_strain_with(tris: &[Triangle], u: &DiscreteDisplacement) -> Vec<Mat2> {
    tris.iter()
        .map(|t| {
            let du = [t.gradient(&u.u1.values), t.gradient(&u.u2.values)];
            let d3 = t.gradient(&u.u3.values);
            let mut e = ZERO2;
            for a in 0..2 {
                for b in 0..2 {
                    e[a][b] = 0.5 * (du[a][b] + du[b][a]) + 0.5 * d3[a] * d3[b];
                }
            }
            e
        })
        .collect()
}

/// Dedicated flat-plate energy with `a₀^{αβστ}`, `E⁰` and `∂_{αβ}u3`.
#[derive(Debug, Clone)]
pub struct PlateModel {
    pub grid: Grid,
    pub material: Material,
    pub force: ForceDensity,
    tensor: ElasticityTensor,
    triangles: Vec<Triangle>,
    stencils: Vec<NodeStencils>,
}

impl PlateModel {
    pub fn new(grid: &Grid, material: Material, force: ForceDensity) -> Self {
        Self {
            grid: *grid,
            material,
            force,
            tensor: ElasticityTensor::flat(&material),
            triangles: grid.triangles(),
            stencils: grid.all_node_stencils(),
        }
    }

    pub fn membrane_strain(&self, u: &DiscreteDisplacement) -> Vec<Mat2> {
        plate_membrane_strain_with(&self.triangles, u)
    }

    /// `∂_{αβ} u3` per node.
    pub fn bending_strain(&self, u3: &DiscreteField) -> Vec<Mat2> {
        self.stencils
            .iter()
            .map(|st| {
                let x = st.d12.apply(&u3.values);
                [[st.d11.apply(&u3.values), x], [x, st.d22.apply(&u3.values)]]
            })
            .collect()
    }

    fn load(&self, u: &DiscreteDisplacement) -> f64 {
        let g = &self.grid;
        let mut s = 0.0;
        for j in 0..g.n2 {
            for i in 0..g.n1 {
                let k = g.idx(i, j);
                s += g.weight(i, j)
                    * (self.force.p1.values[k] * u.u1.values[k]
                        + self.force.p2.values[k] * u.u2.values[k]
                        + self.force.p3.values[k] * u.u3.values[k]);
            }
        }
        s
    }

    pub fn energy(&self, u: &DiscreteDisplacement) -> f64 {
        let a = &self.tensor;
        let membrane: f64 = self
            .membrane_strain(u)
            .iter()
            .zip(&self.triangles)
            .map(|(e, t)| t.weight * a.contract(e, e))
            .sum();
        let g = &self.grid;
        let f = self.bending_strain(&u.u3);
        let mut bending = 0.0;
        for j in 0..g.n2 {
            for i in 0..g.n1 {
                let fk = &f[g.idx(i, j)];
                bending += g.weight(i, j) * a.contract(fk, fk);
            }
        }
        let eps = self.material.eps;
        0.5 * eps * membrane + 0.5 * eps.powi(3) / 3.0 * bending - self.load(u)
    }

    pub fn gradient(&self, u: &DiscreteDisplacement) -> DiscreteDisplacement {
        let g = &self.grid;
        let a = &self.tensor;
        let eps = self.material.eps;
        let mut out = DiscreteDisplacement::zeros(g);
        for (tri, e) in self.triangles.iter().zip(self.membrane_strain(u)) {
            let s = a.apply(&e);
            let d3 = tri.gradient(&u.u3.values);
            let c = eps * tri.weight;
            for k in 0..3 {
                let v = tri.vertices[k];
                let gk = [tri.grad[0][k], tri.grad[1][k]];
                out.u1.values[v] += c * (s[0][0] * gk[0] + s[0][1] * gk[1]);
                out.u2.values[v] += c * (s[1][0] * gk[0] + s[1][1] * gk[1]);
                let mut x = 0.0;
                for al in 0..2 {
                    for be in 0..2 {
                        x += s[al][be] * gk[al] * d3[be];
                    }
                }
                out.u3.values[v] += c * x;
            }
        }
        let kb = eps.powi(3) / 3.0;
        let f = self.bending_strain(&u.u3);
        for j in 0..g.n2 {
            for i in 0..g.n1 {
                let k = g.idx(i, j);
                let m = a.apply(&f[k]);
                let st = &self.stencils[k];
                let c = kb * g.weight(i, j);
                for q in 0..3 {
                    out.u3.values[st.d11.idx[q]] += c * m[0][0] * st.d11.coef[q];
                    out.u3.values[st.d22.idx[q]] += c * m[1][1] * st.d22.coef[q];
                }
                for q in 0..4 {
                    out.u3.values[st.d12.idx[q]] += c * 2.0 * m[0][1] * st.d12.coef[q];
                }
                let w = g.weight(i, j);
                out.u1.values[k] -= w * self.force.p1.values[k];
                out.u2.values[k] -= w * self.force.p2.values[k];
                out.u3.values[k] -= w * self.force.p3.values[k];
            }
        }
        out.clamp();
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Surface;
    use crate::grid::Boundary;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn mat() -> Material {
        Material::new(1.0, 1.0, 0.1).unwrap()
    }

    fn random_u(grid: &Grid, rng: &mut ChaCha8Rng, amp: f64) -> DiscreteDisplacement {
        let mut u = DiscreteDisplacement::zeros(grid);
        for c in u.components_mut() {
            for v in c.values.iter_mut() {
                *v = amp * rng.gen_range(-1.0..1.0);
            }
            c.clamp();
        }
        u
    }

    fn paraboloid_asm(grid: &Grid, t: f64, p: [f64; 3]) -> EnergyAssembly {
        let imm = Immersion::new(Surface::paraboloid(t), Rect::of(grid));
        EnergyAssembly::new(&imm, grid, mat(), ForceDensity::constant(grid, p)).unwrap()
    }

    #[test]
    fn zero_displacement_has_zero_energy_and_strain() {
        let g = Grid::unit(9).unwrap();
        let asm = paraboloid_asm(&g, 0.2, [0.5, -0.3, 1.0]);
        let z = DiscreteDisplacement::zeros(&g);
        assert_eq!(asm.energy(&z), 0.0);
        assert!(asm.membrane_strain(&z).iter().all(|e| *e == ZERO2));
        assert!(asm.bending_strain(&z.u3).iter().all(|e| *e == ZERO2));
    }

    #[test]
    fn unloaded_gradient_at_rest_vanishes() {
        let g = Grid::unit(9).unwrap();
        let asm = paraboloid_asm(&g, 0.2, [0.0; 3]);
        assert_eq!(
            asm.gradient(&DiscreteDisplacement::zeros(&g)).max_abs(),
            0.0
        );
        assert_eq!(asm.residual_norm(&DiscreteDisplacement::zeros(&g)), 0.0);
    }

    #[test]
    fn transverse_load_gradient_is_weighted_load() {
        let g = Grid::unit(9).unwrap();
        let asm = EnergyAssembly::plate(&g, mat(), ForceDensity::constant(&g, [0.0, 0.0, 2.0]));
        let gr = asm.gradient(&DiscreteDisplacement::zeros(&g));
        assert_eq!(gr.u1.max_abs(), 0.0);
        assert_eq!(gr.u2.max_abs(), 0.0);
        for j in 0..g.n2 {
            for i in 0..g.n1 {
                let want = if g.is_boundary(i, j) {
                    0.0
                } else {
                    -2.0 * g.weight(i, j)
                };
                assert_eq!(gr.u3.at(i, j), want);
            }
        }
    }

    #[test]
    fn plate_tangential_strain_is_gradient() {
        let g = Grid::unit(9).unwrap();
        let asm = EnergyAssembly::plate(&g, mat(), ForceDensity::zero(&g));
        let u =
            DiscreteDisplacement::from_fns(&g, |a, b| a * (1.0 - a) * b, |_, _| 0.0, |_, _| 0.0);
        for (e, t) in asm.membrane_strain(&u).iter().zip(&asm.triangles) {
            let gr = t.gradient(&u.u1.values);
            assert_eq!(e[0][0], gr[0]);
            assert_eq!(e[1][1], 0.0);
        }
        let w = DiscreteDisplacement::from_fns(&g, |_, _| 0.0, |_, _| 0.0, |a, b| (a * b).sin());
        for (e, t) in asm.membrane_strain(&w).iter().zip(&asm.triangles) {
            let gr = t.gradient(&w.u3.values);
            assert_eq!(e[0][1], 0.5 * gr[0] * gr[1]);
            assert_eq!(e[0][1], e[1][0]);
        }
    }

    #[test]
    fn rigid_rotation_has_zero_linearized_strain() {
        let g = Grid::unit(9).unwrap();
        let mut u = DiscreteDisplacement::zeros(&g);
        u.u1 = DiscreteField::from_fn(&g, |_, y2| -y2);
        u.u2 = DiscreteField::from_fn(&g, |y1, _| y1);
        for e in linearized_strain(&g, &u) {
            for r in e {
                for v in r {
                    assert!(v.abs() < 1e-13);
                }
            }
        }
    }

    #[test]
    fn plate_bending_strain_is_second_difference() {
        let g = Grid::unit(9).unwrap();
        let asm = EnergyAssembly::plate(&g, mat(), ForceDensity::zero(&g));
        let w = DiscreteField::from_fn(&g, |a, b| (a * (1.0 - a) * b * (1.0 - b)).powi(2));
        let f = asm.bending_strain(&w);
        let d12 = crate::grid::d2(&g, &w, 0, 1, Boundary::Mirror);
        for (k, fk) in f.iter().enumerate() {
            assert_eq!(fk[0][1], d12.values[k]);
        }
    }

    #[test]
    fn bending_strain_converges_to_plate_as_t_shrinks() {
        let g = Grid::unit(17).unwrap();
        let w = DiscreteField::from_fn(&g, |a, b| (a * (1.0 - a) * b * (1.0 - b)).powi(2) * 16.0);
        let plate = EnergyAssembly::plate(&g, mat(), ForceDensity::zero(&g)).bending_strain(&w);
        let diff = |t: f64| {
            let f = paraboloid_asm(&g, t, [0.0; 3]).bending_strain(&w);
            f.iter()
                .zip(&plate)
                .map(|(a, b)| {
                    (0..2)
                        .flat_map(|r| (0..2).map(move |c| (a[r][c] - b[r][c]).abs()))
                        .fold(0.0, f64::max)
                })
                .fold(0.0, f64::max)
        };
        let (d1_, d2_) = (diff(0.1), diff(0.01));
        assert!(d1_ > 0.0 && d2_ > 0.0);
        // Γ ~ t², so the gap shrinks by about 100 for a tenfold smaller t.
        assert!(d1_ / d2_ > 50.0, "{d1_} {d2_}");
    }

    #[test]
    fn first_variation_is_linear_and_consistent() {
        let g = Grid::unit(9).unwrap();
        let asm = paraboloid_asm(&g, 0.3, [0.0; 3]);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let u = random_u(&g, &mut rng, 0.1);
        let v = random_u(&g, &mut rng, 0.1);
        let w = random_u(&g, &mut rng, 0.1);
        let zero = asm.strain_first_variation(&u, &DiscreteDisplacement::zeros(&g));
        assert!(zero.iter().all(|e| *e == ZERO2));
        let lhs = asm.strain_first_variation(&u, &v.add(&w));
        let a = asm.strain_first_variation(&u, &v);
        let b = asm.strain_first_variation(&u, &w);
        for k in 0..lhs.len() {
            for r in 0..2 {
                for c in 0..2 {
                    assert!((lhs[k][r][c] - a[k][r][c] - b[k][r][c]).abs() < 1e-12);
                }
            }
        }
        // Gâteaux: E(u + τv) − E(u) − τE'(u)(v) = τ² ½∂v3∂v3, so the error is O(τ).
        let e0 = asm.membrane_strain(&u);
        let errs: Vec<f64> = [1e-2, 1e-3]
            .iter()
            .map(|&tau| {
                let e1 = asm.membrane_strain(&u.axpy(tau, &v));
                (0..e0.len())
                    .map(|k| ((e1[k][0][1] - e0[k][0][1]) / tau - a[k][0][1]).abs())
                    .fold(0.0, f64::max)
            })
            .collect();
        assert!((errs[0] / errs[1] - 10.0).abs() < 0.1, "{errs:?}");
    }

    #[test]
    fn line_polynomial_matches_energy_difference() {
        let g = Grid::unit(9).unwrap();
        let asm = paraboloid_asm(&g, 0.2, [0.5, -0.3, 1.0]);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let u = random_u(&g, &mut rng, 0.05);
        let d = random_u(&g, &mut rng, 0.05);
        let poly = asm.line_polynomial(&u, &d);
        let j0 = asm.energy(&u);
        for a in [0.1, 0.5, 1.0, 2.0] {
            let direct = asm.energy(&u.axpy(a, &d)) - j0;
            assert!(
                (poly.eval(a) - direct).abs() <= 1e-10 * (1.0 + direct.abs()),
                "{a}"
            );
        }
        let slope = asm.gradient(&u).dot(&d);
        assert!((poly.slope() - slope).abs() < 1e-12 * (1.0 + slope.abs()));
    }

    #[test]
    fn unloaded_energy_nonnegative() {
        let g = Grid::unit(9).unwrap();
        let asm = paraboloid_asm(&g, 0.2, [0.0; 3]);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            assert!(asm.energy(&random_u(&g, &mut rng, 0.3)) >= 0.0);
        }
    }

    #[test]
    fn load_is_bilinear() {
        let g = Grid::unit(9).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let u = random_u(&g, &mut rng, 1.0);
        let v = random_u(&g, &mut rng, 1.0);
        let asm = paraboloid_asm(&g, 0.2, [0.5, -0.3, 1.0]);
        let lhs = asm.load(&u.axpy(2.5, &v));
        let rhs = asm.load(&u) + 2.5 * asm.load(&v);
        assert!((lhs - rhs).abs() < 1e-14 * (1.0 + lhs.abs()));
        let scaled = asm.with_force(asm.force.scale(-3.0));
        assert!((scaled.load(&u) + 3.0 * asm.load(&u)).abs() < 1e-14);
    }
}
