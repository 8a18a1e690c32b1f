//! Analytic immersions of a rectangle and the surface geometry they induce:
//! normal, fundamental forms, area density, Christoffel symbols and Gaussian
//! curvature. Every derivative is hand-coded; nothing here differentiates
//! numerically.

use nalgebra::Vector3;

use crate::error::GeometryError;
use crate::grid::Grid;

pub type Vec3 = Vector3<f64>;
/// Row-major 2×2 matrix.
pub type Mat2 = [[f64; 2]; 2];

/// `|∂1θ ∧ ∂2θ|` below this is treated as a degenerate immersion.
pub const DEGENERACY_THRESHOLD: f64 = 1e-12;

/// Axis-aligned rectangle `(0, l1) × (0, l2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect {
    pub l1: f64,
    pub l2: f64,
}

impl Rect {
    pub fn unit() -> Self {
        Self { l1: 1.0, l2: 1.0 }
    }

    pub fn of(grid: &Grid) -> Self {
        Self {
            l1: grid.l1,
            l2: grid.l2,
        }
    }

    fn contains(&self, y: [f64; 2]) -> bool {
        let tol1 = 1e-12 * self.l1.max(1.0);
        let tol2 = 1e-12 * self.l2.max(1.0);
        y[0] >= -tol1 && y[0] <= self.l1 + tol1 && y[1] >= -tol2 && y[1] <= self.l2 + tol2
    }
}

/// Catalog of analytic middle surfaces. Each non-plate family has a scale
/// `t` and reduces to the plate at `t = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Surface {
    /// `θ0(y) = (y, 0)`.
    Plate,
    /// `(y1, y2, (t/2)(κ1 y1² + κ2 y2²))`.
    Paraboloid { t: f64, kappa1: f64, kappa2: f64 },
    /// Circular cylinder of curvature `t` bent along `y1`, arclength-parameterized:
    /// `(sin(t y1)/t, y2, (1 − cos(t y1))/t)`.
    CylinderPatch { t: f64 },
    /// `(y1, y2, t sin(k1 π y1/L1) sin(k2 π y2/L2))`.
    SinusoidalBump { t: f64, k1: f64, k2: f64 },
}

impl Surface {
    pub fn paraboloid(t: f64) -> Self {
        Surface::Paraboloid {
            t,
            kappa1: 1.0,
            kappa2: 1.0,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Surface::Plate => "plate",
            Surface::Paraboloid { .. } => "paraboloid",
            Surface::CylinderPatch { .. } => "cylinder_patch",
            Surface::SinusoidalBump { .. } => "sinusoidal_bump",
        }
    }

    /// Builds a catalog entry from its tag and named parameters. Parameters
    /// not given fall back to `t = 0`, `kappa1 = kappa2 = 1`, `k1 = k2 = 1`.
    pub fn from_tag(
        kind: &str,
        param: impl Fn(&str) -> Option<f64>,
    ) -> Result<Self, GeometryError> {
        let t = param("t").unwrap_or(0.0);
        let s = match kind {
            "plate" => Surface::Plate,
            "paraboloid" => Surface::Paraboloid {
                t,
                kappa1: param("kappa1").unwrap_or(1.0),
                kappa2: param("kappa2").unwrap_or(1.0),
            },
            "cylinder_patch" => Surface::CylinderPatch { t },
            "sinusoidal_bump" => Surface::SinusoidalBump {
                t,
                k1: param("k1").unwrap_or(1.0),
                k2: param("k2").unwrap_or(1.0),
            },
            other => return Err(GeometryError::UnknownKind(other.to_string())),
        };
        Ok(s)
    }

    pub fn scale(&self) -> f64 {
        match *self {
            Surface::Plate => 0.0,
            Surface::Paraboloid { t, .. }
            | Surface::CylinderPatch { t }
            | Surface::SinusoidalBump { t, .. } => t,
        }
    }

    /// Same family member at scale `t`.
    pub fn with_scale(&self, t: f64) -> Self {
        match *self {
            Surface::Plate => Surface::Plate,
            Surface::Paraboloid { kappa1, kappa2, .. } => Surface::Paraboloid { t, kappa1, kappa2 },
            Surface::CylinderPatch { .. } => Surface::CylinderPatch { t },
            Surface::SinusoidalBump { k1, k2, .. } => Surface::SinusoidalBump { t, k1, k2 },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Immersion {
    pub surface: Surface,
    pub domain: Rect,
}

/// Value, first and second partial derivatives of an immersion at a point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jet {
    pub value: Vec3,
    /// `[∂1θ, ∂2θ]`
    pub grad: [Vec3; 2],
    /// `[∂11θ, ∂12θ, ∂22θ]`
    pub hess: [Vec3; 3],
}

impl Jet {
    /// `∂_{αβ}θ` for `α, β ∈ {0, 1}`.
    #[inline]
    pub fn d2(&self, a: usize, b: usize) -> Vec3 {
        self.hess[a + b]
    }
}

/// Graph surface `(y1, y2, f(y))` from the scalar jet of `f`.
fn graph_jet(y: [f64; 2], f: f64, df: [f64; 2], ddf: [f64; 3]) -> Jet {
    Jet {
        value: Vec3::new(y[0], y[1], f),
        grad: [Vec3::new(1.0, 0.0, df[0]), Vec3::new(0.0, 1.0, df[1])],
        hess: ddf.map(|v| Vec3::new(0.0, 0.0, v)),
    }
}

impl Immersion {
    pub fn new(surface: Surface, domain: Rect) -> Self {
        Self { surface, domain }
    }

    pub fn plate(domain: Rect) -> Self {
        Self::new(Surface::Plate, domain)
    }

    pub fn with_scale(&self, t: f64) -> Self {
        Self::new(self.surface.with_scale(t), self.domain)
    }

    /// Analytic jet at `y`; `y` must lie in the closed rectangle.
    pub fn eval(&self, y: [f64; 2]) -> Result<Jet, GeometryError> {
        if !self.domain.contains(y) {
            return Err(GeometryError::OutsideDomain(y[0], y[1]));
        }
        Ok(self.eval_unchecked(y))
    }

    pub(crate) fn eval_unchecked(&self, y: [f64; 2]) -> Jet {
        let [y1, y2] = y;
        match self.surface {
            Surface::Plate => graph_jet(y, 0.0, [0.0, 0.0], [0.0, 0.0, 0.0]),
            Surface::Paraboloid { t, kappa1, kappa2 } => graph_jet(
                y,
                0.5 * t * (kappa1 * y1 * y1 + kappa2 * y2 * y2),
                [t * kappa1 * y1, t * kappa2 * y2],
                [t * kappa1, 0.0, t * kappa2],
            ),
            Surface::SinusoidalBump { t, k1, k2 } => {
                let w1 = k1 * std::f64::consts::PI / self.domain.l1;
                let w2 = k2 * std::f64::consts::PI / self.domain.l2;
                let (s1, c1) = (w1 * y1).sin_cos();
                let (s2, c2) = (w2 * y2).sin_cos();
                graph_jet(
                    y,
                    t * s1 * s2,
                    [t * w1 * c1 * s2, t * w2 * s1 * c2],
                    [
                        -t * w1 * w1 * s1 * s2,
                        t * w1 * w2 * c1 * c2,
                        -t * w2 * w2 * s1 * s2,
                    ],
                )
            }
            Surface::CylinderPatch { t } => {
                let (s, c) = (t * y1).sin_cos();
                // sin(t y)/t and (1 − cos(t y))/t written to stay exact as t → 0.
                let x = if t == 0.0 { y1 } else { s / t };
                let z = if t == 0.0 {
                    0.0
                } else {
                    let h = (0.5 * t * y1).sin();
                    2.0 * h * h / t
                };
                Jet {
                    value: Vec3::new(x, y2, z),
                    grad: [Vec3::new(c, 0.0, s), Vec3::new(0.0, 1.0, 0.0)],
                    hess: [Vec3::new(-t * s, 0.0, t * c), Vec3::zeros(), Vec3::zeros()],
                }
            }
        }
    }
}

/// Free-function form of [`Immersion::eval`].
pub fn eval_immersion(imm: &Immersion, y: [f64; 2]) -> Result<Jet, GeometryError> {
    imm.eval(y)
}

/// `(∂1θ ∧ ∂2θ)/|∂1θ ∧ ∂2θ|`.
pub fn unit_normal(grad: &[Vec3; 2]) -> Result<Vec3, GeometryError> {
    let n = grad[0].cross(&grad[1]);
    let norm = n.norm();
    if !(norm >= DEGENERACY_THRESHOLD) {
        return Err(GeometryError::Degenerate { norm });
    }
    Ok(n / norm)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FundamentalForms {
    pub a: Mat2,
    pub a_inv: Mat2,
    pub sqrt_a: f64,
    pub b: Mat2,
}

/// Exact inverse of a 2×2 matrix; `None` when singular.
pub fn inverse2(m: &Mat2) -> Option<Mat2> {
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    if det == 0.0 || !det.is_finite() {
        return None;
    }
    Some([
        [m[1][1] / det, -m[0][1] / det],
        [-m[1][0] / det, m[0][0] / det],
    ])
}

pub fn fundamental_forms(
    grad: &[Vec3; 2],
    hess: &[Vec3; 3],
    normal: &Vec3,
) -> Result<FundamentalForms, GeometryError> {
    let mut a = [[0.0; 2]; 2];
    let mut b = [[0.0; 2]; 2];
    for al in 0..2 {
        for be in 0..2 {
            a[al][be] = grad[al].dot(&grad[be]);
            b[al][be] = normal.dot(&hess[al + be]);
        }
    }
    let sqrt_a = grad[0].cross(&grad[1]).norm();
    if !(sqrt_a >= DEGENERACY_THRESHOLD) {
        return Err(GeometryError::Degenerate { norm: sqrt_a });
    }
    let a_inv = inverse2(&a).ok_or(GeometryError::Degenerate { norm: sqrt_a })?;
    Ok(FundamentalForms {
        a,
        a_inv,
        sqrt_a,
        b,
    })
}

/// `Γ^σ_{αβ} = a^σ · ∂_β a_α` with `a^σ = a^{σν} ∂_ν θ`, indexed `[σ][α][β]`.
pub fn christoffel(grad: &[Vec3; 2], hess: &[Vec3; 3], a_inv: &Mat2) -> [[[f64; 2]; 2]; 2] {
    let contra = [0, 1].map(|s| grad[0] * a_inv[s][0] + grad[1] * a_inv[s][1]);
    let mut g = [[[0.0; 2]; 2]; 2];
    for s in 0..2 {
        for al in 0..2 {
            for be in 0..2 {
                g[s][al][be] = contra[s].dot(&hess[al + be]);
            }
        }
    }
    g
}

/// `K = det(a^{ασ} b_{σβ})`.
pub fn gaussian_curvature(a_inv: &Mat2, b: &Mat2) -> f64 {
    let mut m = [[0.0; 2]; 2];
    for al in 0..2 {
        for be in 0..2 {
            m[al][be] = a_inv[al][0] * b[0][be] + a_inv[al][1] * b[1][be];
        }
    }
    m[0][0] * m[1][1] - m[0][1] * m[1][0]
}

/// All pointwise geometric quantities at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointGeometry {
    pub y: [f64; 2],
    pub a: Mat2,
    pub a_inv: Mat2,
    pub b: Mat2,
    pub gamma: [[[f64; 2]; 2]; 2],
    pub sqrt_a: f64,
    pub k: f64,
}

impl PointGeometry {
    pub fn flat(y: [f64; 2]) -> Self {
        Self {
            y,
            a: [[1.0, 0.0], [0.0, 1.0]],
            a_inv: [[1.0, 0.0], [0.0, 1.0]],
            b: [[0.0; 2]; 2],
            gamma: [[[0.0; 2]; 2]; 2],
            sqrt_a: 1.0,
            k: 0.0,
        }
    }
}

pub fn point_geometry(imm: &Immersion, y: [f64; 2]) -> Result<PointGeometry, GeometryError> {
    let jet = imm.eval(y)?;
    let normal = unit_normal(&jet.grad)?;
    let ff = fundamental_forms(&jet.grad, &jet.hess, &normal)?;
    Ok(PointGeometry {
        y,
        a: ff.a,
        a_inv: ff.a_inv,
        b: ff.b,
        gamma: christoffel(&jet.grad, &jet.hess, &ff.a_inv),
        sqrt_a: ff.sqrt_a,
        k: gaussian_curvature(&ff.a_inv, &ff.b),
    })
}

/// Geometry sampled at every grid node.
#[derive(Debug, Clone, PartialEq)]
pub struct SurfaceGeometryField {
    pub grid: Grid,
    pub nodes: Vec<PointGeometry>,
}

impl SurfaceGeometryField {
    pub fn at(&self, i: usize, j: usize) -> &PointGeometry {
        &self.nodes[self.grid.idx(i, j)]
    }

    pub fn max_abs_curvature(&self) -> f64 {
        self.nodes.iter().fold(0.0, |m, p| m.max(p.k.abs()))
    }
}

pub fn geometry_field(imm: &Immersion, grid: &Grid) -> Result<SurfaceGeometryField, GeometryError> {
    check_domain(imm, grid)?;
    let mut nodes = Vec::with_capacity(grid.len());
    for j in 0..grid.n2 {
        for i in 0..grid.n1 {
            let p = point_geometry(imm, grid.point(i, j)).map_err(|e| match e {
                GeometryError::Degenerate { norm } => {
                    GeometryError::DegenerateAtNode { i, j, norm }
                }
                other => other,
            })?;
            nodes.push(p);
        }
    }
    Ok(SurfaceGeometryField { grid: *grid, nodes })
}

fn check_domain(imm: &Immersion, grid: &Grid) -> Result<(), GeometryError> {
    if imm.domain.l1 != grid.l1 || imm.domain.l2 != grid.l2 {
        return Err(GeometryError::DomainMismatch(
            imm.domain.l1,
            imm.domain.l2,
            grid.l1,
            grid.l2,
        ));
    }
    Ok(())
}

/// Grid-sampled C² distance: max over nodes of
/// `|Δθ| + Σ_α |∂_α Δθ| + Σ_{α≤β} |∂_{αβ} Δθ|`.
pub fn c2_distance(
    imm: &Immersion,
    reference: &Immersion,
    grid: &Grid,
) -> Result<f64, GeometryError> {
    if imm.domain != reference.domain {
        return Err(GeometryError::DomainMismatch(
            imm.domain.l1,
            imm.domain.l2,
            reference.domain.l1,
            reference.domain.l2,
        ));
    }
    check_domain(imm, grid)?;
    let mut dist: f64 = 0.0;
    for j in 0..grid.n2 {
        for i in 0..grid.n1 {
            let y = grid.point(i, j);
            let p = imm.eval(y)?;
            let q = reference.eval(y)?;
            let mut s = (p.value - q.value).norm();
            for a in 0..2 {
                s += (p.grad[a] - q.grad[a]).norm();
            }
            for h in 0..3 {
                s += (p.hess[h] - q.hess[h]).norm();
            }
            dist = dist.max(s);
        }
    }
    Ok(dist)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    fn para(t: f64) -> Immersion {
        Immersion::new(Surface::paraboloid(t), Rect { l1: 1.0, l2: 1.0 })
    }

    #[test]
    fn plate_jet_is_identity() {
        let j = Immersion::plate(Rect::unit()).eval([0.3, 0.7]).unwrap();
        assert_eq!(j.value, Vec3::new(0.3, 0.7, 0.0));
        assert_eq!(j.grad, [Vec3::x(), Vec3::y()]);
        assert!(j.hess.iter().all(|h| *h == Vec3::zeros()));
    }

    #[test]
    fn paraboloid_jet_at_unit_point() {
        let j = para(0.1).eval([1.0, 0.0]).unwrap();
        assert!((j.grad[0] - Vec3::new(1.0, 0.0, 0.1)).norm() < 1e-15);
        assert_eq!(j.grad[1], Vec3::new(0.0, 1.0, 0.0));
        assert!((j.hess[0] - Vec3::new(0.0, 0.0, 0.1)).norm() < 1e-15);
        // Cross-check against central differences of the value.
        let h = 1e-5;
        let im = para(0.1);
        let fd = (im.eval([1.0, 0.0]).unwrap().value
            - im.eval([1.0 - 2.0 * h, 0.0]).unwrap().value)
            / (2.0 * h);
        // Centered at 1 - h: exact for quadratics up to the shift.
        let exact = im.eval([1.0 - h, 0.0]).unwrap().grad[0];
        assert!((fd - exact).norm() < 1e-9);
    }

    #[test]
    fn paraboloid_gradient_at_origin_is_flat() {
        for t in [0.0, 0.3, -2.0] {
            let j = para(t).eval([0.0, 0.0]).unwrap();
            assert_eq!(j.grad, [Vec3::x(), Vec3::y()]);
        }
    }

    #[test]
    fn outside_domain_and_unknown_kind_fail() {
        assert!(matches!(
            para(0.1).eval([1.5, 0.0]),
            Err(GeometryError::OutsideDomain(..))
        ));
        assert!(matches!(
            Surface::from_tag("torus", |_| None),
            Err(GeometryError::UnknownKind(_))
        ));
    }

    #[test]
    fn normals() {
        assert_eq!(unit_normal(&[Vec3::x(), Vec3::y()]).unwrap(), Vec3::z());
        let n = unit_normal(&[Vec3::new(1.0, 0.0, 0.1), Vec3::y()]).unwrap();
        let want = Vec3::new(-0.1, 0.0, 1.0) / 1.01f64.sqrt();
        assert!((n - want).norm() < 1e-15);
        assert!((n.norm() - 1.0).abs() < 1e-15);
        assert!(matches!(
            unit_normal(&[Vec3::x(), Vec3::x()]),
            Err(GeometryError::Degenerate { .. })
        ));
    }

    #[test]
    fn forms_of_paraboloid() {
        let g = point_geometry(&para(0.1), [1.0, 0.0]).unwrap();
        assert!(close(g.a[0][0], 1.01, 1e-15));
        assert_eq!(g.a[0][1], 0.0);
        assert_eq!(g.a[1][1], 1.0);
        assert!(close(g.sqrt_a, 1.01f64.sqrt(), 1e-15));
        assert!(close(g.gamma[0][0][0], 0.01 / 1.01, 1e-15));

        let t = 0.37;
        let o = point_geometry(&para(t), [0.0, 0.0]).unwrap();
        assert_eq!(o.b, [[t, 0.0], [0.0, t]]);
        assert!(close(o.k, t * t, 1e-15));
    }

    #[test]
    fn plate_geometry_is_exactly_flat() {
        let p = point_geometry(&Immersion::plate(Rect::unit()), [0.25, 0.5]).unwrap();
        assert_eq!(p, PointGeometry::flat([0.25, 0.5]));
    }

    #[test]
    fn cylinder_is_developable() {
        let cyl = Immersion::new(Surface::CylinderPatch { t: 0.8 }, Rect::unit());
        for y in [[0.0, 0.0], [0.3, 0.9], [1.0, 1.0]] {
            let g = point_geometry(&cyl, y).unwrap();
            assert!(g.k.abs() < 1e-15);
            assert!(close(g.b[0][0], 0.8, 1e-15));
            assert!(close(g.a[0][0], 1.0, 1e-15));
        }
    }

    #[test]
    fn singular_metric_detected() {
        let m = [[1.0, 1.0], [1.0, 1.0]];
        assert!(inverse2(&m).is_none());
    }

    #[test]
    fn christoffel_symmetric_in_lower_indices() {
        let im = Immersion::new(
            Surface::SinusoidalBump {
                t: 0.3,
                k1: 2.0,
                k2: 1.0,
            },
            Rect::unit(),
        );
        let g = point_geometry(&im, [0.21, 0.67]).unwrap();
        for s in 0..2 {
            assert_eq!(g.gamma[s][0][1], g.gamma[s][1][0]);
        }
    }

    #[test]
    fn geometry_field_flags_node() {
        let grid = Grid::unit(5).unwrap();
        let f = geometry_field(&Immersion::plate(Rect::unit()), &grid).unwrap();
        assert!(f.nodes.iter().all(|p| p.k == 0.0));
        let zero = geometry_field(&para(0.0), &grid).unwrap();
        assert_eq!(zero, f);
        let wrong = Immersion::plate(Rect { l1: 2.0, l2: 1.0 });
        assert!(geometry_field(&wrong, &grid).is_err());
    }

    #[test]
    fn c2_distance_of_paraboloid() {
        let grid = Grid::unit(33).unwrap();
        let plate = Immersion::plate(Rect::unit());
        assert_eq!(c2_distance(&plate, &plate, &grid).unwrap(), 0.0);
        let d = c2_distance(&para(0.1), &plate, &grid).unwrap();
        assert!(close(d, 0.5, 1e-15), "{d}");
        let d2 = c2_distance(&para(0.2), &plate, &grid).unwrap();
        assert!(close(d2, 2.0 * d, 1e-15));
    }
}
