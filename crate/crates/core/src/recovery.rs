//! Explicit recovery deformations built from a planar displacement, and the
//! inverse extraction of averaged displacements from a 3D deformation.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fields::{grad2, hessian2, Deformation3D, Field2, Field3, Grid3};
use crate::geometry::{Midsurface, ShellGeometry};
use crate::limit_energy::{Displacement2D, Regime};
use crate::material::MaterialModel;
use crate::{Mat2, Vec2, Vec3};

fn sym2(a: &Mat2) -> Mat2 {
    (a + a.transpose()) * 0.5
}

fn mat2_of(a: &Mat2) -> nalgebra::Vector3<f64> {
    nalgebra::Vector3::new(a[(0, 0)], a[(1, 1)], a[(0, 1)])
}

/// Through-thickness correctors `(d⁰, d¹)`.
///
/// MvK: `d⁰ = 2𝓛(A) − (½|∇′v|² + ∇′v·∇′θ)e₃` with
/// `A = sym(∇′u + ∇′v⊗∇′θ) + ½∇′v⊗∇′v`; linearized:
/// `d⁰ = 2𝓛(sym(∇′u + ∇′v⊗∇′θ)) − (∇′v·∇′θ)e₃`. In both, `d¹ = −2𝓛((∇′)²v)`.
///
/// The factor 2 makes the column `d⁰` realize the optimal `a⊗e₃ + e₃⊗a` of
/// the relaxation defining `Q₂`. The `∇′v·∇′θ` term cancels the normal
/// stretch produced by the tilt of `∇′v` against the curvature of `Θ^h`.
pub fn correctors(
    d: &Displacement2D,
    mid: &Midsurface,
    mat: &MaterialModel,
    regime: Regime,
) -> Result<(Field2<Vec3>, Field2<Vec3>)> {
    let g = d.grid();
    let l = mat.l_matrix()?;
    let kappa = regime.kappa();
    let gu = grad2(&d.u);
    let gv = grad2(&d.v);
    let hv = hessian2(&d.v);
    let (d0, d1): (Vec<Vec3>, Vec<Vec3>) = (0..g.len())
        .into_par_iter()
        .map(|n| {
            let dv = gv.values[n];
            let dt = mid.grad(g.point(n));
            let a = sym2(&(gu.values[n] + dv * dt.transpose())) + dv * dv.transpose() * (0.5 * kappa);
            let mut d0 = l * mat2_of(&a) * 2.0;
            d0.z -= 0.5 * kappa * dv.norm_squared() + dv.dot(&dt);
            let d1 = l * mat2_of(&hv.values[n]) * -2.0;
            (d0, d1)
        })
        .unzip();
    Ok((Field2::new(g, d0)?, Field2::new(g, d1)?))
}

/// Samples `ŷ^h ∘ Θ^h ∘ P^h` on `Ω`:
/// `Θ^h(x′, t) + (s_u u, s_v v) − s_v t (∇′v, 0) + s_u t d⁰ + ½ s_v t² d¹`
/// with `t = h x₃`, `s_v = √E^h/h` and `s_u = max{E^h/h², √E^h}`.
pub fn build_recovery(
    d: &Displacement2D,
    geom: &ShellGeometry,
    mat: &MaterialModel,
    regime: Regime,
    nz: usize,
) -> Result<Deformation3D> {
    let g = d.grid();
    let grid = Grid3::new(g, nz)?;
    let h = geom.h;
    let e = regime.energy_scale(h);
    let sv = e.sqrt() / h;
    let su = regime.u_scale(h);
    let (d0, d1) = correctors(d, &geom.midsurface, mat, regime)?;
    let gv = grad2(&d.v);
    let values = (0..grid.len())
        .into_par_iter()
        .map(|n| {
            let m = n / nz;
            let p = grid.point(n);
            let q = Vec2::new(p.x, p.y);
            let t = h * p.z;
            let u = d.u.values[m];
            let dv = gv.values[m];
            geom.theta_map(q, t)
                + Vec3::new(su * u.x, su * u.y, sv * d.v.values[m])
                - Vec3::new(dv.x, dv.y, 0.0) * (sv * t)
                + d0.values[m] * (su * t)
                + d1.values[m] * (0.5 * sv * t * t)
        })
        .collect();
    Field3::new(grid, values)
}

/// Thickness-averaged displacements `(u^h, v^h)`, with `U^h` the in-plane
/// average minus `x′`, `V^h` the normal average minus `f^h θ`,
/// `u^h = U^h / s_u` and `v^h = (h/√E^h) V^h`.
pub fn displacement_roundtrip(y: &Deformation3D, geom: &ShellGeometry, regime: Regime) -> Result<Displacement2D> {
    let grid = y.grid;
    let g = grid.plane;
    let nz = grid.nz;
    let h = geom.h;
    let e = regime.energy_scale(h);
    let sv = e.sqrt() / h;
    let su = regime.u_scale(h);
    let zw = grid.z_weights();
    let avg: Vec<(Vec2, f64)> = (0..g.len())
        .into_par_iter()
        .map(|m| {
            let q = g.point(m);
            let mid = geom.theta_map(q, 0.0);
            let mut disp = Vec3::zeros();
            let mut refd = Vec3::zeros();
            for (k, w) in zw.iter().enumerate() {
                let x = geom.theta_map(q, h * grid.x3(k));
                disp += (y.values[m * nz + k] - x) * *w;
                refd += (x - mid) * *w;
            }
            let total = disp + refd;
            (Vec2::new(total.x, total.y) / su, total.z / sv)
        })
        .collect();
    if avg.iter().any(|(u, v)| !u.x.is_finite() || !u.y.is_finite() || !v.is_finite()) {
        return Err(Error::Invariant("non-finite averaged displacement".into()));
    }
    let (u, v): (Vec<Vec2>, Vec<f64>) = avg.into_iter().unzip();
    Displacement2D::new(Field2::new(g, u)?, Field2::new(g, v)?)
}

/// `(∇′φ)ᵀ∇′φ − (∇′φ₀)ᵀ∇′φ₀` for `φ₀ = (x′, f θ)` and
/// `φ = φ₀ + (f² u, f v)`, the change of the midsurface metric.
pub fn metric_change(d: &Displacement2D, mid: &Midsurface, fh: f64) -> Field2<Mat2> {
    let gu = grad2(&d.u);
    let gv = grad2(&d.v);
    let g = d.grid();
    let values = (0..g.len())
        .map(|n| {
            let dt = mid.grad(g.point(n));
            let a = Mat2::identity() + gu.values[n] * (fh * fh);
            let b = (dt + gv.values[n]) * fh;
            let b0 = dt * fh;
            a.transpose() * a + b * b.transpose() - Mat2::identity() - b0 * b0.transpose()
        })
        .collect();
    Field2 { grid: g, values }
}
