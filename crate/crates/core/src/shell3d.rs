//! The rescaled three-dimensional shell energy, normal dead loads and the
//! total loaded energy.

use crate::banded::BandMatrix;
use crate::discrete::{Density, Feat, LocalSystem, NodeStencil};
use crate::error::{Error, Result};
use crate::fields::{grad3_stencils, integrate2, pairwise_sum, Deformation3D, Field2, Field3, Grid3};
use crate::geometry::ShellGeometry;
use crate::limit_energy::{check_zero_mean, Regime};
use crate::material::{Mat9, MaterialModel};
use crate::minimize::Objective;
use crate::{Mat3, Vec2, Vec3};

/// Through-thickness integrated normal force density with its order α.
#[derive(Clone, Debug, PartialEq)]
pub struct ForceProfile {
    pub f3: Field2<f64>,
    pub alpha: f64,
}

impl ForceProfile {
    pub fn new(f3: Field2<f64>, alpha: f64) -> Result<Self> {
        if !(alpha > 2.0) {
            return Err(Error::Config(format!("force order must exceed 2, got {alpha}")));
        }
        check_zero_mean(&f3)?;
        Ok(ForceProfile { f3, alpha })
    }

    /// Force order matched to the regime, `E^h = h^{2α−2}`.
    pub fn for_regime(f3: Field2<f64>, regime: Regime) -> Result<Self> {
        Self::new(f3, regime.force_order())
    }
}

/// `f₃^h∘Θ^h∘P^h := h√E^h f₃(x')`, constant through the thickness.
pub fn force_pullback(fp: &ForceProfile, grid: Grid3, h: f64, regime: Regime) -> Result<(f64, Field3<f64>)> {
    if !grid.plane.same_nodes(&fp.f3.grid) {
        return Err(Error::GridMismatch("force grid differs from the slab grid".into()));
    }
    if (fp.alpha - regime.force_order()).abs() > 1e-12 {
        return Err(Error::Config(format!(
            "force order {} does not match regime order {}",
            fp.alpha,
            regime.force_order()
        )));
    }
    let e = regime.energy_scale(h);
    let s = h * e.sqrt();
    let values = (0..grid.len()).map(|n| s * fp.f3.values[n / grid.nz]).collect();
    Ok((e, Field3::new(grid, values)?))
}

/// `m = max_{|q|≤1} ∫ω f₃ (q·x')`, attained at `q* = moments/|moments|`.
pub fn force_action_m(f3: &Field2<f64>) -> (f64, Vec2) {
    let m1 = integrate2(&Field2::from_fn(f3.grid, |p| p.x).zip_map(f3, |x, f| x * f).unwrap());
    let m2 = integrate2(&Field2::from_fn(f3.grid, |p| p.y).zip_map(f3, |y, f| y * f).unwrap());
    let mv = Vec2::new(m1, m2);
    let m = mv.norm();
    if m == 0.0 {
        (0.0, Vec2::zeros())
    } else {
        (m, mv / m)
    }
}

/// `Θ^h∘P^h` sampled on the slab.
pub fn identity_deformation(grid: Grid3, geom: &ShellGeometry) -> Deformation3D {
    Field3::from_fn(grid, |p| geom.theta_map(Vec2::new(p.x, p.y), geom.h * p.z))
}

struct ShellDensity {
    mat: MaterialModel,
    ginv: Vec<Mat3>,
}

impl ShellDensity {
    #[inline]
    fn disp_grad(&self, n: usize, s: &Feat) -> Mat3 {
        Mat3::new(s[0], s[1], s[2], s[3], s[4], s[5], s[6], s[7], s[8]) * self.ginv[n]
    }
}

impl Density for ShellDensity {
    fn value(&self, n: usize, s: &Feat) -> f64 {
        self.mat.w_disp(&self.disp_grad(n, s))
    }

    fn gradient(&self, n: usize, s: &Feat) -> Feat {
        let p = self.mat.piola_disp(&self.disp_grad(n, s)) * self.ginv[n].transpose();
        Feat::from_fn(|a, _| p[(a / 3, a % 3)])
    }

    fn hessian(&self, n: usize, s: &Feat) -> Mat9 {
        let g = self.ginv[n];
        let t = self.mat.tangent_disp(&self.disp_grad(n, s));
        // M maps vec(S) to vec(S G)
        let m = Mat9::from_fn(|a, b| {
            let (r, k) = (a / 3, a % 3);
            let (r2, c) = (b / 3, b % 3);
            if r == r2 {
                g[(c, k)]
            } else {
                0.0
            }
        });
        m.transpose() * t * m
    }
}

/// `(1/scale)·J^h` as a function of the packed nodal values of `y`.
pub struct ShellFunctional {
    pub grid: Grid3,
    pub geom: ShellGeometry,
    pub reference: Vec<Vec3>,
    sys: LocalSystem,
    density: ShellDensity,
    constraints: Vec<Vec<f64>>,
    modes: Vec<Vec<f64>>,
    weights: Vec<f64>,
}

impl ShellFunctional {
    /// Unloaded energy `I^h / scale`, or `J^h / scale` with `load`.
    pub fn new(
        grid: Grid3,
        geom: &ShellGeometry,
        mat: &MaterialModel,
        load: Option<(&ForceProfile, Regime)>,
        scale: f64,
    ) -> Result<Self> {
        let h = geom.h;
        let nodes = grid.len();
        let mut ginv = Vec::with_capacity(nodes);
        let mut det = Vec::with_capacity(nodes);
        let mut reference = Vec::with_capacity(nodes);
        for n in 0..nodes {
            let p = grid.point(n);
            let q = Vec2::new(p.x, p.y);
            let t = h * p.z;
            let m = geom.grad_theta_map(q, t)?;
            ginv.push(geom.inverse_grad_theta_map(q, t)?);
            det.push(m.determinant());
            reference.push(geom.theta_map(q, t));
        }
        let w = grid.weights();
        let xref: Vec<f64> = reference.iter().flat_map(|v| [v.x, v.y, v.z]).collect();
        let stencils = (0..nodes)
            .map(|n| {
                let st = grad3_stencils(&grid, n);
                let mut taps = Vec::with_capacity(27);
                for (c, s) in st.iter().enumerate() {
                    let f = if c == 2 { 1.0 / h } else { 1.0 };
                    for &(m, coef) in s {
                        for r in 0..3 {
                            taps.push((3 * r + c, 3 * m + r, coef * f));
                        }
                    }
                }
                let mut ns = NodeStencil::from_taps(&taps);
                ns.offset = -ns.apply_linear(&xref);
                ns
            })
            .collect();
        let sw: Vec<f64> = (0..nodes).map(|n| w[n] * det[n] / scale).collect();
        let mut sys = LocalSystem::new(3 * nodes, sw, stencils);
        if let Some((fp, regime)) = load {
            let (_, f) = force_pullback(fp, grid, h, regime)?;
            let mut moment = [Vec::with_capacity(nodes), Vec::with_capacity(nodes), Vec::with_capacity(nodes)];
            for n in 0..nodes {
                let c = w[n] * det[n] * f.values[n];
                sys.linear[3 * n + 2] = -c / scale;
                for a in 0..3 {
                    moment[a].push(c * reference[n][a]);
                }
            }
            // m^h/h, the action of the force maximized over all rotations
            let b = Vec3::new(pairwise_sum(&moment[0]), pairwise_sum(&moment[1]), pairwise_sum(&moment[2]));
            sys.constant = b.norm() / scale;
        }
        let (constraints, modes) = rigid_gauge(&grid, &w, &reference);
        Ok(ShellFunctional {
            grid,
            geom: geom.clone(),
            reference,
            sys,
            density: ShellDensity { mat: *mat, ginv },
            constraints,
            modes,
            weights: w,
        })
    }

    pub fn pack(y: &Deformation3D) -> Vec<f64> {
        y.values.iter().flat_map(|v| [v.x, v.y, v.z]).collect()
    }

    pub fn unpack(&self, x: &[f64]) -> Deformation3D {
        Field3 {
            grid: self.grid,
            values: x.chunks(3).map(|c| Vec3::new(c[0], c[1], c[2])).collect(),
        }
    }

    pub fn energy(&self, y: &Deformation3D) -> Result<f64> {
        if y.grid != self.grid {
            return Err(Error::GridMismatch("deformation grid differs".into()));
        }
        if !y.all_finite() {
            return Err(Error::Invariant("non-finite deformation".into()));
        }
        Ok(self.value(&Self::pack(y)))
    }

    /// Stored-energy part alone.
    pub fn elastic_energy(&self, x: &[f64]) -> f64 {
        self.sys.density_value(&self.density, x)
    }

    /// Force term plus the constant `m^h/h`.
    pub fn load_energy(&self, x: &[f64]) -> f64 {
        self.sys.linear_value(x) + self.sys.constant
    }

    pub fn quadrature_weights(&self) -> &[f64] {
        &self.weights
    }
}

/// Constraint rows (zero mean displacement and zero mean infinitesimal
/// rotation about the weighted centroid) and the matching rigid modes.
fn rigid_gauge(grid: &Grid3, w: &[f64], reference: &[Vec3]) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let n = grid.len();
    let wsum: f64 = pairwise_sum(w);
    let xbar = reference.iter().zip(w).fold(Vec3::zeros(), |a, (x, &wn)| a + x * wn) / wsum;
    let mut rows = vec![vec![0.0; 3 * n]; 6];
    let mut modes = vec![vec![0.0; 3 * n]; 6];
    for k in 0..n {
        let r = reference[k] - xbar;
        for a in 0..3 {
            rows[a][3 * k + a] = w[k];
            modes[a][3 * k + a] = 1.0;
            // e_a · (r × d) = d · (e_a × r)
            let mut e = Vec3::zeros();
            e[a] = 1.0;
            let ax = e.cross(&r);
            for c in 0..3 {
                rows[3 + a][3 * k + c] = w[k] * ax[c];
                modes[3 + a][3 * k + c] = ax[c];
            }
        }
    }
    (rows, modes)
}

impl Objective for ShellFunctional {
    fn dim(&self) -> usize {
        self.sys.dim
    }

    fn value(&self, x: &[f64]) -> f64 {
        self.sys.value(&self.density, x)
    }

    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        self.sys.gradient(&self.density, x)
    }

    fn hessian(&self, x: &[f64]) -> Option<BandMatrix> {
        Some(self.sys.hessian(&self.density, x))
    }

    fn constraints(&self) -> &[Vec<f64>] {
        &self.constraints
    }

    /// Removes the weighted-mean rigid displacement from `y − Θ∘P`.
    fn project(&self, x: &[f64]) -> Result<Vec<f64>> {
        let xr: Vec<f64> = self.reference.iter().flat_map(|v| [v.x, v.y, v.z]).collect();
        let d: Vec<f64> = x.iter().zip(&xr).map(|(a, b)| a - b).collect();
        let alpha = crate::minimize::solve_gram(&self.constraints, &self.modes, &d)?;
        let mut out = x.to_vec();
        for (k, m) in self.modes.iter().enumerate() {
            for (o, v) in out.iter_mut().zip(m) {
                *o -= alpha[k] * v;
            }
        }
        Ok(out)
    }
}

/// `I^h(y) = ∫Ω W(∇_h y (∇Θ^h)⁻¹) det ∇Θ^h`.
pub fn energy_ih(y: &Deformation3D, geom: &ShellGeometry, mat: &MaterialModel) -> Result<f64> {
    ShellFunctional::new(y.grid, geom, mat, None, 1.0)?.energy(y)
}

/// `J^h(y) = I^h(y) − ∫Ω (f₃^h∘Θ^h∘P^h) y₃ det ∇Θ^h + m^h/h`.
pub fn energy_jh(
    y: &Deformation3D,
    geom: &ShellGeometry,
    mat: &MaterialModel,
    fp: &ForceProfile,
    regime: Regime,
) -> Result<f64> {
    ShellFunctional::new(y.grid, geom, mat, Some((fp, regime)), 1.0)?.energy(y)
}
