//! Isotropic two-dimensional elasticity tensor on a curved metric and its
//! positive-definiteness constant.

use nalgebra::{Matrix3, SymmetricEigen};

use crate::error::MaterialError;
use crate::geometry::{Mat2, SurfaceGeometryField};

/// Lamé-type coefficients and half-thickness.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Material {
    pub lambda: f64,
    pub mu: f64,
    pub eps: f64,
}

impl Material {
    pub fn new(lambda: f64, mu: f64, eps: f64) -> Result<Self, MaterialError> {
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(MaterialError::Lambda(lambda));
        }
        if !(mu > 0.0 && mu.is_finite()) {
            return Err(MaterialError::Mu(mu));
        }
        if !(eps > 0.0 && eps.is_finite()) {
            return Err(MaterialError::Eps(eps));
        }
        Ok(Self { lambda, mu, eps })
    }

    /// `4λμ/(λ + 2μ)`
    pub fn isotropic_coefficient(&self) -> f64 {
        4.0 * self.lambda * self.mu / (self.lambda + 2.0 * self.mu)
    }
}

/// All 16 components `A^{αβστ}`, indexed `c[α][β][σ][τ]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElasticityTensor {
    pub c: [[[[f64; 2]; 2]; 2]; 2],
    a_inv: Mat2,
    iso: f64,
    mu: f64,
}

impl ElasticityTensor {
    /// `A^{αβστ} = (4λμ/(λ+2μ)) a^{αβ}a^{στ} + 2μ (a^{ασ}a^{βτ} + a^{ατ}a^{βσ})`.
    pub fn build(a_inv: &Mat2, mat: &Material) -> Self {
        let iso = mat.isotropic_coefficient();
        let mut c = [[[[0.0; 2]; 2]; 2]; 2];
        for al in 0..2 {
            for be in 0..2 {
                for s in 0..2 {
                    for t in 0..2 {
                        c[al][be][s][t] = iso * a_inv[al][be] * a_inv[s][t]
                            + 2.0
                                * mat.mu
                                * (a_inv[al][s] * a_inv[be][t] + a_inv[al][t] * a_inv[be][s]);
                    }
                }
            }
        }
        Self {
            c,
            a_inv: *a_inv,
            iso,
            mu: mat.mu,
        }
    }

    /// Flat tensor `a₀^{αβστ}` with the Kronecker metric.
    pub fn flat(mat: &Material) -> Self {
        let mut c = [[[[0.0; 2]; 2]; 2]; 2];
        let iso = mat.isotropic_coefficient();
        let d = |a: usize, b: usize| if a == b { 1.0 } else { 0.0 };
        for al in 0..2 {
            for be in 0..2 {
                for s in 0..2 {
                    for t in 0..2 {
                        c[al][be][s][t] = iso * d(al, be) * d(s, t)
                            + 2.0 * mat.mu * (d(al, s) * d(be, t) + d(al, t) * d(be, s));
                    }
                }
            }
        }
        Self {
            c,
            a_inv: [[1.0, 0.0], [0.0, 1.0]],
            iso,
            mu: mat.mu,
        }
    }

    /// `A^{αβστ} s_{στ}` as a 2×2 matrix.
    #[inline]
    pub fn apply(&self, s: &Mat2) -> Mat2 {
        let mut out = [[0.0; 2]; 2];
        for al in 0..2 {
            for be in 0..2 {
                let cab = &self.c[al][be];
                out[al][be] = cab[0][0] * s[0][0]
                    + cab[0][1] * s[0][1]
                    + cab[1][0] * s[1][0]
                    + cab[1][1] * s[1][1];
            }
        }
        out
    }

    /// `A^{αβστ} s_{στ} t_{αβ}`.
    #[inline]
    pub fn contract(&self, s: &Mat2, t: &Mat2) -> f64 {
        let m = self.apply(s);
        m[0][0] * t[0][0] + m[0][1] * t[0][1] + m[1][0] * t[1][0] + m[1][1] * t[1][1]
    }

    /// Isotropic and deviatoric parts of `contract(s, s)`:
    /// `(4λμ/(λ+2μ)) (a^{αβ}s_{αβ})²` and `4μ Tr((a⁻¹s)(a⁻¹s))`.
    pub fn trace_decomposition(&self, s: &Mat2) -> (f64, f64) {
        let a = &self.a_inv;
        let tr = a[0][0] * s[0][0] + a[0][1] * s[0][1] + a[1][0] * s[1][0] + a[1][1] * s[1][1];
        let mut m = [[0.0; 2]; 2];
        for r in 0..2 {
            for c in 0..2 {
                m[r][c] = a[r][0] * s[0][c] + a[r][1] * s[1][c];
            }
        }
        let tr_mm = m[0][0] * m[0][0] + m[0][1] * m[1][0] + m[1][0] * m[0][1] + m[1][1] * m[1][1];
        (self.iso * tr * tr, 4.0 * self.mu * tr_mm)
    }

    /// 3×3 Voigt matrix for strain vector `(t11, t22, √2 t12)`, so that the
    /// Euclidean norm of the vector is `Σ|t_{αβ}|²`.
    pub fn voigt(&self) -> Matrix3<f64> {
        let r2 = std::f64::consts::SQRT_2;
        let c = &self.c;
        Matrix3::new(
            c[0][0][0][0],
            c[0][0][1][1],
            r2 * c[0][0][0][1],
            c[1][1][0][0],
            c[1][1][1][1],
            r2 * c[1][1][0][1],
            r2 * c[0][1][0][0],
            r2 * c[0][1][1][1],
            2.0 * c[0][1][0][1],
        )
    }

    pub fn min_eigenvalue(&self) -> f64 {
        SymmetricEigen::new(self.voigt()).eigenvalues.min()
    }
}

pub fn build_tensor(a_inv: &Mat2, mat: &Material) -> ElasticityTensor {
    ElasticityTensor::build(a_inv, mat)
}

/// Minimum over nodes of the smallest Voigt eigenvalue of `A √a`.
pub fn positivity_gap(field: &SurfaceGeometryField, mat: &Material) -> Result<f64, MaterialError> {
    let mut gap = f64::INFINITY;
    let mut at = 0;
    for (k, p) in field.nodes.iter().enumerate() {
        let e = ElasticityTensor::build(&p.a_inv, mat).min_eigenvalue() * p.sqrt_a;
        if e < gap {
            gap = e;
            at = k;
        }
    }
    if !(gap > 0.0) {
        return Err(MaterialError::NotPositive(gap, at));
    }
    Ok(gap)
}
