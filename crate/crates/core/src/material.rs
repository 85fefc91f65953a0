//! Stored energy densities and their quadratic forms.

use nalgebra::{Matrix3, SMatrix, SymmetricEigen};

use crate::error::{Error, Result};
use crate::{Mat2, Mat3, Vec3};

pub type Mat9 = SMatrix<f64, 9, 9>;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MaterialKind {
    /// `W = (λ/8)(tr(FᵀF−I))² + (μ/4)|FᵀF−I|²`
    StVenantKirchhoff,
    /// `W = dist²(F, SO(3))`
    SquaredDistance,
}

impl MaterialKind {
    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "stvk" | "st-venant-kirchhoff" => Some(Self::StVenantKirchhoff),
            "squared-distance" | "dist2" => Some(Self::SquaredDistance),
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::StVenantKirchhoff => "stvk",
            Self::SquaredDistance => "squared-distance",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MaterialModel {
    pub kind: MaterialKind,
    pub lambda: f64,
    pub mu: f64,
}

impl MaterialModel {
    pub fn new(kind: MaterialKind, lambda: f64, mu: f64) -> Result<Self> {
        if kind == MaterialKind::SquaredDistance {
            return Ok(Self::squared_distance());
        }
        if !(mu > 0.0) || !(lambda >= 0.0) || !lambda.is_finite() || !mu.is_finite() {
            return Err(Error::Config(format!(
                "need mu > 0 and lambda >= 0, got lambda={lambda}, mu={mu}"
            )));
        }
        Ok(MaterialModel { kind, lambda, mu })
    }

    pub fn stvk(lambda: f64, mu: f64) -> Result<Self> {
        Self::new(MaterialKind::StVenantKirchhoff, lambda, mu)
    }

    /// `dist²(F, SO(3))`, whose second differential at I is `2|sym F|²`,
    /// i.e. the isotropic form with μ = 1, λ = 0.
    pub fn squared_distance() -> Self {
        MaterialModel {
            kind: MaterialKind::SquaredDistance,
            lambda: 0.0,
            mu: 1.0,
        }
    }

    pub fn w(&self, f: &Mat3) -> f64 {
        self.w_disp(&(f - Mat3::identity()))
    }

    /// `W(I + H)`, evaluated from the displacement gradient to avoid
    /// cancellation for small strains.
    pub fn w_disp(&self, hm: &Mat3) -> f64 {
        match self.kind {
            MaterialKind::StVenantKirchhoff => {
                let e = green(hm);
                let tr = e.trace();
                self.lambda / 8.0 * tr * tr + self.mu / 4.0 * e.norm_squared()
            }
            MaterialKind::SquaredDistance => dist_so3_disp(hm).powi(2),
        }
    }

    /// First Piola stress `∂W/∂F` at `F = I + H`.
    pub fn piola_disp(&self, hm: &Mat3) -> Mat3 {
        let f = Mat3::identity() + hm;
        match self.kind {
            MaterialKind::StVenantKirchhoff => {
                let e = green(hm);
                f * (self.lambda / 2.0 * e.trace()) + self.mu * f * e
            }
            MaterialKind::SquaredDistance => 2.0 * (f - polar_rotation_disp(hm)),
        }
    }

    pub fn piola(&self, f: &Mat3) -> Mat3 {
        self.piola_disp(&(f - Mat3::identity()))
    }

    /// `∂P_a/∂F_b` with the row-major flattening `a = 3 r + c`.
    pub fn tangent_disp(&self, hm: &Mat3) -> Mat9 {
        let mut t = Mat9::zeros();
        match self.kind {
            MaterialKind::StVenantKirchhoff => {
                let f = Mat3::identity() + hm;
                let e = green(hm);
                let tr = e.trace();
                for b in 0..9 {
                    let mut df = Mat3::zeros();
                    df[(b / 3, b % 3)] = 1.0;
                    let de = df.transpose() * f + f.transpose() * df;
                    let dp = f * (self.lambda / 2.0 * de.trace())
                        + df * (self.lambda / 2.0 * tr)
                        + self.mu * (df * e + f * de);
                    for a in 0..9 {
                        t[(a, b)] = dp[(a / 3, a % 3)];
                    }
                }
            }
            MaterialKind::SquaredDistance => {
                let eps = 1e-6;
                for b in 0..9 {
                    let mut dh = Mat3::zeros();
                    dh[(b / 3, b % 3)] = eps;
                    let dp = (self.piola_disp(&(hm + dh)) - self.piola_disp(&(hm - dh))) / (2.0 * eps);
                    for a in 0..9 {
                        t[(a, b)] = dp[(a / 3, a % 3)];
                    }
                }
                t = (t + t.transpose()) * 0.5;
            }
        }
        t
    }

    /// Effective Lamé pair of the quadratic form `D²W(I)`.
    pub fn lame(&self) -> (f64, f64) {
        (self.lambda, self.mu)
    }

    /// Symmetric bilinear form associated with `Q₃`.
    pub fn q3_bilinear(&self, a: &Mat3, b: &Mat3) -> f64 {
        let (l, m) = self.lame();
        let sa = sym3(a);
        let sb = sym3(b);
        2.0 * m * sa.dot(&sb) + l * a.trace() * b.trace()
    }

    pub fn q3(&self, f: &Mat3) -> f64 {
        self.q3_bilinear(f, f)
    }

    /// Closed form `2μ|sym G|² + (2μλ/(2μ+λ))(tr G)²`.
    pub fn q2(&self, g: &Mat2) -> f64 {
        let (l, m) = self.lame();
        let s = (g + g.transpose()) * 0.5;
        let t = g.trace();
        2.0 * m * s.norm_squared() + 2.0 * m * l / (2.0 * m + l) * t * t
    }

    /// Minimizes `Q₃(G + a⊗e₃ + e₃⊗a)` over `a` by solving the 3×3
    /// stationarity system.
    pub fn q2_by_minimization(&self, g: &Mat2) -> Result<(f64, Vec3)> {
        let gt = embed(g);
        let basis: [Mat3; 3] = std::array::from_fn(|i| {
            let mut e = Mat3::zeros();
            e[(i, 2)] += 1.0;
            e[(2, i)] += 1.0;
            e
        });
        let mut k = Matrix3::zeros();
        let mut rhs = Vec3::zeros();
        for i in 0..3 {
            rhs[i] = -self.q3_bilinear(&gt, &basis[i]);
            for j in 0..3 {
                k[(i, j)] = self.q3_bilinear(&basis[i], &basis[j]);
            }
        }
        let a = k
            .lu()
            .solve(&rhs)
            .filter(|a| a.iter().all(|x| x.is_finite()))
            .ok_or_else(|| Error::Singular("stretch stationarity system".into()))?;
        let m = gt + basis[0] * a[0] + basis[1] * a[1] + basis[2] * a[2];
        Ok((self.q3(&m), a))
    }

    /// The linear map taking a symmetric 2×2 matrix to the optimal stretch
    /// vector of [`q2_by_minimization`](Self::q2_by_minimization).
    pub fn l_map(&self, a: &Mat2) -> Result<Vec3> {
        Ok(self.q2_by_minimization(a)?.1)
    }

    /// The 3×2 matrix of `L` acting on `(A₁₁, A₂₂, A₁₂)` (with `A₂₁ = A₁₂`).
    pub fn l_matrix(&self) -> Result<nalgebra::Matrix3<f64>> {
        let cols = [
            self.l_map(&Mat2::new(1.0, 0.0, 0.0, 0.0))?,
            self.l_map(&Mat2::new(0.0, 0.0, 0.0, 1.0))?,
            self.l_map(&Mat2::new(0.0, 1.0, 1.0, 0.0))?,
        ];
        Ok(Matrix3::from_columns(&cols))
    }
}

fn green(hm: &Mat3) -> Mat3 {
    hm + hm.transpose() + hm.transpose() * hm
}

fn sym3(a: &Mat3) -> Mat3 {
    (a + a.transpose()) * 0.5
}

fn embed(g: &Mat2) -> Mat3 {
    Mat3::new(g[(0, 0)], g[(0, 1)], 0.0, g[(1, 0)], g[(1, 1)], 0.0, 0.0, 0.0, 0.0)
}

/// Singular values with the smallest one negated when `det F < 0`.
fn signed_singular_values(f: &Mat3) -> Vec3 {
    let mut s = f.svd(false, false).singular_values;
    if f.determinant() < 0.0 {
        let k = s.imin();
        s[k] = -s[k];
    }
    s
}

/// Frobenius distance from `F` to SO(3).
pub fn dist_so3(f: &Mat3) -> f64 {
    dist_so3_disp(&(f - Mat3::identity()))
}

fn dist_so3_disp(hm: &Mat3) -> f64 {
    let f = Mat3::identity() + hm;
    if f.determinant() > 0.0 {
        // |√(FᵀF) − I| from the eigenvalues of FᵀF − I, written to avoid
        // cancellation near I
        let eig = SymmetricEigen::new(green(hm));
        eig.eigenvalues
            .iter()
            .map(|&e| {
                let d = e / ((1.0 + e).max(0.0).sqrt() + 1.0);
                d * d
            })
            .sum::<f64>()
            .sqrt()
    } else {
        let s = signed_singular_values(&f);
        (s - Vec3::new(1.0, 1.0, 1.0)).norm()
    }
}

/// Rotation part of the polar decomposition of `I + H` (nearest rotation).
fn polar_rotation_disp(hm: &Mat3) -> Mat3 {
    let f = Mat3::identity() + hm;
    if f.determinant() > 0.0 {
        let eig = SymmetricEigen::new(green(hm));
        let q = eig.eigenvectors;
        // R = F U⁻¹ = F − F Q diag((s−1)/s) Qᵀ with s = √(1+e)
        let d = eig.eigenvalues.map(|e| {
            let s = (1.0 + e).max(1e-300).sqrt();
            e / ((s + 1.0) * s)
        });
        f - f * q * Mat3::from_diagonal(&d) * q.transpose()
    } else {
        nearest_rotation_svd(&f)
    }
}

fn nearest_rotation_svd(f: &Mat3) -> Mat3 {
    let svd = f.svd(true, true);
    let u = svd.u.unwrap();
    let vt = svd.v_t.unwrap();
    let mut d = Mat3::identity();
    if (u * vt).determinant() < 0.0 {
        let k = svd.singular_values.imin();
        d[(k, k)] = -1.0;
    }
    u * d * vt
}

/// The rotation closest to `F` in the Frobenius norm.
pub fn nearest_rotation(f: &Mat3) -> Result<Mat3> {
    if f.iter().all(|&x| x == 0.0) {
        return Err(Error::ZeroMatrix);
    }
    if !f.iter().all(|x| x.is_finite()) {
        return Err(Error::Invariant("non-finite matrix".into()));
    }
    Ok(nearest_rotation_svd(f))
}
