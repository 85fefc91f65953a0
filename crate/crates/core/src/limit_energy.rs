//! The two-dimensional limit functionals (Marguerre–von Kármán and its
//! linearization), their loaded versions, gauge transformations and the
//! compatibility diagnostics.

use std::io::Write;
use std::path::Path;

use crate::banded::BandMatrix;
use crate::discrete::{Density, Feat, LocalSystem, NodeStencil, NF};
use crate::error::{Error, Result};
use crate::fields::{check_same, d1_stencil, d2_stencil, grad2, hessian2, integrate2, Field2, Grid2};
use crate::geometry::Midsurface;
use crate::material::{Mat9, MaterialModel};
use crate::minimize::Objective;
use crate::{Mat2, Vec2};

/// Energy scaling regime `E^h`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Regime {
    /// `E^h = h⁴`
    MvK,
    /// `E^h = h^β` with `β > 4`
    Linearized { beta: f64 },
}

impl Regime {
    pub fn linearized(beta: f64) -> Result<Self> {
        if beta > 4.0 && beta.is_finite() {
            Ok(Regime::Linearized { beta })
        } else {
            Err(Error::Config(format!("linearized regime needs beta > 4, got {beta}")))
        }
    }

    pub fn beta(&self) -> f64 {
        match self {
            Regime::MvK => 4.0,
            Regime::Linearized { beta } => *beta,
        }
    }

    pub fn is_linearized(&self) -> bool {
        matches!(self, Regime::Linearized { .. })
    }

    pub fn name(&self) -> &'static str {
        match self {
            Regime::MvK => "mvk",
            Regime::Linearized { .. } => "linearized",
        }
    }

    /// `E^h`
    pub fn energy_scale(&self, h: f64) -> f64 {
        h.powf(self.beta())
    }

    /// Force order α from `E^h = h^{2α−2}`.
    pub fn force_order(&self) -> f64 {
        (self.beta() + 2.0) / 2.0
    }

    /// `f^h = max{h, √E^h / h}`
    pub fn fh(&self, h: f64) -> f64 {
        h.max(self.energy_scale(h).sqrt() / h)
    }

    /// Scale of the in-plane displacement, `max{E^h/h², √E^h}`.
    pub fn u_scale(&self, h: f64) -> f64 {
        let e = self.energy_scale(h);
        (e / (h * h)).max(e.sqrt())
    }

    /// Weight of the `½∇′v⊗∇′v` membrane term.
    pub fn kappa(&self) -> f64 {
        match self {
            Regime::MvK => 1.0,
            Regime::Linearized { .. } => 0.0,
        }
    }
}

/// In-plane and out-of-plane displacements on a shared grid.
#[derive(Clone, Debug, PartialEq)]
pub struct Displacement2D {
    pub u: Field2<Vec2>,
    pub v: Field2<f64>,
}

impl Displacement2D {
    pub fn new(u: Field2<Vec2>, v: Field2<f64>) -> Result<Self> {
        check_same(&u.grid, &v.grid)?;
        if !u.all_finite() || !v.all_finite() {
            return Err(Error::Invariant("non-finite displacement".into()));
        }
        Ok(Displacement2D { u, v })
    }

    pub fn zeros(grid: Grid2) -> Self {
        Displacement2D {
            u: Field2::zeros(grid),
            v: Field2::zeros(grid),
        }
    }

    pub fn from_fn(grid: Grid2, u: impl Fn(Vec2) -> Vec2 + Sync, v: impl Fn(Vec2) -> f64 + Sync) -> Self {
        Displacement2D {
            u: Field2::from_fn(grid, u),
            v: Field2::from_fn(grid, v),
        }
    }

    pub fn grid(&self) -> Grid2 {
        self.v.grid
    }

    /// Node-major packing `(u₁, u₂, v)` per node.
    pub fn pack(&self) -> Vec<f64> {
        let mut x = Vec::with_capacity(3 * self.v.values.len());
        for (u, v) in self.u.values.iter().zip(&self.v.values) {
            x.extend_from_slice(&[u.x, u.y, *v]);
        }
        x
    }

    pub fn unpack(grid: Grid2, x: &[f64]) -> Result<Self> {
        if x.len() != 3 * grid.len() {
            return Err(Error::GridMismatch(format!("{} values for {} nodes", x.len(), grid.len())));
        }
        Ok(Displacement2D {
            u: Field2 {
                grid,
                values: x.chunks(3).map(|c| Vec2::new(c[0], c[1])).collect(),
            },
            v: Field2 {
                grid,
                values: x.chunks(3).map(|c| c[2]).collect(),
            },
        })
    }

    /// L² distance (trapezoidal) of `(u, v)` to `other`.
    pub fn l2_distance(&self, other: &Displacement2D) -> Result<(f64, f64)> {
        let du = self.u.zip_map(&other.u, |a, b| (a - b).norm_squared())?;
        let dv = self.v.zip_map(&other.v, |a, b| (a - b).powi(2))?;
        Ok((integrate2(&du).sqrt(), integrate2(&dv).sqrt()))
    }
}

/// θ sampled on a grid together with the `∇′θ` the energies use.
#[derive(Clone, Debug, PartialEq)]
pub struct ThetaField {
    pub values: Field2<f64>,
    pub grad: Field2<Vec2>,
}

impl ThetaField {
    /// Exact derivatives of the midsurface.
    pub fn analytic(mid: &Midsurface, grid: Grid2) -> Self {
        ThetaField {
            values: mid.sample(grid),
            grad: mid.grad_field(grid),
        }
    }

    /// Derivatives by the grid stencils; with this choice the gauge identity
    /// holds exactly at the discrete level.
    pub fn discrete(mid: &Midsurface, grid: Grid2) -> Self {
        Self::from_samples(mid.sample(grid))
    }

    pub fn from_samples(values: Field2<f64>) -> Self {
        ThetaField {
            grad: grad2(&values),
            values,
        }
    }

    pub fn flat(grid: Grid2) -> Self {
        ThetaField {
            values: Field2::zeros(grid),
            grad: Field2::zeros(grid),
        }
    }

    pub fn grid(&self) -> Grid2 {
        self.values.grid
    }
}

fn sym2(a: &Mat2) -> Mat2 {
    (a + a.transpose()) * 0.5
}

/// `sym∇′u + κ·½∇′v⊗∇′v + sym(∇′v⊗∇′θ)` with κ = 1 (MvK) or 0 (linearized).
pub fn membrane_strain(d: &Displacement2D, theta: &ThetaField, regime: Regime) -> Result<Field2<Mat2>> {
    check_same(&d.grid(), &theta.grid())?;
    let gu = grad2(&d.u);
    let gv = grad2(&d.v);
    let k = regime.kappa();
    let values = (0..d.grid().len())
        .map(|n| {
            let g = gv.values[n];
            let t = theta.grad.values[n];
            sym2(&gu.values[n]) + g * g.transpose() * (0.5 * k) + sym2(&(g * t.transpose()))
        })
        .collect();
    Ok(Field2 {
        grid: d.grid(),
        values,
    })
}

/// `(∇′)²v`
pub fn bending_strain(d: &Displacement2D) -> Field2<Mat2> {
    hessian2(&d.v)
}

fn limit_terms(d: &Displacement2D, theta: &ThetaField, mat: &MaterialModel, regime: Regime) -> Result<(f64, f64)> {
    let e = membrane_strain(d, theta, regime)?;
    let b = bending_strain(d);
    let mem = integrate2(&e.map(|m| 0.5 * mat.q2(m)));
    let ben = integrate2(&b.map(|m| mat.q2(m) / 24.0));
    Ok((mem, ben))
}

/// `∫ω ½Q₂(membrane strain) + (1/24)Q₂((∇′)²v)`.
pub fn i_limit(d: &Displacement2D, theta: &ThetaField, mat: &MaterialModel, regime: Regime) -> Result<f64> {
    let (m, b) = limit_terms(d, theta, mat, regime)?;
    Ok(m + b)
}

/// Normal load of the limit problem.
#[derive(Clone, Debug, PartialEq)]
pub struct Load {
    /// through-thickness integrated force density, zero mean
    pub f3bar: Field2<f64>,
    pub r33: f64,
    /// value of the rotation penalty
    pub gval: f64,
}

impl Load {
    pub fn new(f3bar: Field2<f64>, r33: f64, gval: f64) -> Result<Self> {
        check_zero_mean(&f3bar)?;
        Ok(Load { f3bar, r33, gval })
    }

    pub fn zero(grid: Grid2) -> Self {
        Load {
            f3bar: Field2::zeros(grid),
            r33: 1.0,
            gval: 0.0,
        }
    }
}

/// Rejects densities whose integral exceeds `1e−10 ∫|f|`.
pub fn check_zero_mean(f: &Field2<f64>) -> Result<()> {
    let mean = integrate2(f);
    let tol = 1e-10 * integrate2(&f.map(|x| x.abs()));
    if mean.abs() > tol {
        Err(Error::NonzeroMean { mean, tol })
    } else {
        Ok(())
    }
}

/// The manufactured load `sin(πx₁)sin(πx₂)` minus its discrete mean.
pub fn manufactured_load(grid: Grid2) -> Field2<f64> {
    use std::f64::consts::PI;
    let f = Field2::from_fn(grid, |p| (PI * p.x).sin() * (PI * p.y).sin());
    let mean = integrate2(&f) / grid.area();
    f.map(|x| x - mean)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EnergyBreakdown {
    pub membrane: f64,
    pub bending: f64,
    pub force: f64,
    pub penalty: f64,
}

impl EnergyBreakdown {
    pub fn total(&self) -> f64 {
        self.membrane + self.bending + self.force + self.penalty
    }

    pub const HEADER: &'static str = "membrane,bending,force,penalty,total";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{}",
            self.membrane,
            self.bending,
            self.force,
            self.penalty,
            self.total()
        )
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path)?;
        writeln!(f, "{}", Self::HEADER)?;
        writeln!(f, "{}", self.csv_row())?;
        Ok(())
    }
}

pub fn energy_breakdown(
    d: &Displacement2D,
    theta: &ThetaField,
    mat: &MaterialModel,
    regime: Regime,
    load: &Load,
) -> Result<EnergyBreakdown> {
    check_same(&d.grid(), &load.f3bar.grid)?;
    check_zero_mean(&load.f3bar)?;
    let (membrane, bending) = limit_terms(d, theta, mat, regime)?;
    let fv = load.f3bar.zip_map(&d.v, |f, v| f * v)?;
    Ok(EnergyBreakdown {
        membrane,
        bending,
        force: -load.r33 * integrate2(&fv),
        penalty: load.gval,
    })
}

/// `J⁰ = I − R̄₃₃ ∫ω f̄₃ v + g`.
pub fn j0(
    d: &Displacement2D,
    theta: &ThetaField,
    mat: &MaterialModel,
    regime: Regime,
    f3bar: &Field2<f64>,
    r33: f64,
    gval: f64,
) -> Result<f64> {
    let load = Load {
        f3bar: f3bar.clone(),
        r33,
        gval,
    };
    Ok(energy_breakdown(d, theta, mat, regime, &load)?.total())
}

/// `u_c = u + (κv + θ)a − ½κ(a·x′)a`, `v_c = v − a·x′ − b`.
pub fn gauge_transform_regime(
    d: &Displacement2D,
    theta: &ThetaField,
    a: Vec2,
    b: f64,
    regime: Regime,
) -> Result<Displacement2D> {
    let g = d.grid();
    check_same(&g, &theta.grid())?;
    let k = regime.kappa();
    let u = (0..g.len())
        .map(|n| {
            let x = g.point(n);
            d.u.values[n] + a * (k * d.v.values[n] + theta.values.values[n]) - a * (0.5 * k * a.dot(&x))
        })
        .collect();
    let v = (0..g.len()).map(|n| d.v.values[n] - a.dot(&g.point(n)) - b).collect();
    Displacement2D::new(Field2::new(g, u)?, Field2::new(g, v)?)
}

/// The MvK gauge transformation.
pub fn gauge_transform(d: &Displacement2D, theta: &ThetaField, a: Vec2, b: f64) -> Result<Displacement2D> {
    gauge_transform_regime(d, theta, a, b, Regime::MvK)
}

fn weighted_mean<V: crate::fields::FieldValue>(f: &Field2<V>) -> V {
    let w = f.grid.weights();
    let area = f.grid.area();
    f.values
        .iter()
        .zip(&w)
        .fold(V::zero(), |acc, (v, &wn)| acc + *v * wn)
        * (1.0 / area)
}

/// Mean of `∂₂u₁ − ∂₁u₂`.
pub fn mean_rotation(u: &Field2<Vec2>) -> f64 {
    let gu = grad2(u);
    weighted_mean(&gu.map(|m| m[(0, 1)] - m[(1, 0)]))
}

/// Moves `d` along its gauge orbit to zero mean `v`, `∇′v`, `u` and mean
/// infinitesimal rotation of `u`.
pub fn gauge_project(d: &Displacement2D, theta: &ThetaField, regime: Regime) -> Result<Displacement2D> {
    let g = d.grid();
    let a = weighted_mean(&grad2(&d.v));
    let xbar = weighted_mean(&Field2::from_fn(g, |p| p));
    let b = weighted_mean(&d.v) - a.dot(&xbar);
    let mut out = gauge_transform_regime(d, theta, a, b, regime)?;
    let ubar = weighted_mean(&out.u);
    for u in out.u.values.iter_mut() {
        *u -= ubar;
    }
    let omega = -0.5 * mean_rotation(&out.u);
    for (n, u) in out.u.values.iter_mut().enumerate() {
        let x = g.point(n) - xbar;
        *u -= Vec2::new(-x.y, x.x) * omega;
    }
    Ok(out)
}

/// `∂₂₂e₁₁ + ∂₁₁e₂₂ − 2∂₁₂e₁₂`
pub fn compatibility_residual(e: &Field2<Mat2>) -> Result<Field2<f64>> {
    let g = e.grid;
    if g.nx < 5 || g.ny < 5 {
        return Err(Error::GridTooSmall("compatibility residual needs 5 nodes per axis".into()));
    }
    let e11 = e.map(|m| m[(0, 0)]).partial2(1);
    let e22 = e.map(|m| m[(1, 1)]).partial2(0);
    let e12 = e.map(|m| 0.5 * (m[(0, 1)] + m[(1, 0)])).partial(0).partial(1);
    let values = (0..g.len())
        .map(|n| e11.values[n] + e22.values[n] - 2.0 * e12.values[n])
        .collect();
    Field2::new(g, values)
}

/// `det(∇′)²(v + θ) − det(∇′)²θ`
pub fn gauss_residual(v: &Field2<f64>, theta: &ThetaField) -> Result<Field2<f64>> {
    let g = v.grid;
    check_same(&g, &theta.grid())?;
    if g.nx < 5 || g.ny < 5 {
        return Err(Error::GridTooSmall("Gauss residual needs 5 nodes per axis".into()));
    }
    let vt = v.zip_map(&theta.values, |a, b| a + b)?;
    let h1 = hessian2(&vt);
    let h0 = hessian2(&theta.values);
    h1.zip_map(&h0, |a, b| a.determinant() - b.determinant())
}

/// Node-local density of the limit functional.
pub(crate) struct LimitDensity {
    grad_theta: Vec<Vec2>,
    mu: f64,
    c: f64,
    kappa: f64,
}

impl LimitDensity {
    fn new(theta: &ThetaField, mat: &MaterialModel, regime: Regime) -> Self {
        let (l, m) = mat.lame();
        LimitDensity {
            grad_theta: theta.grad.values.clone(),
            mu: m,
            c: 2.0 * m * l / (2.0 * m + l),
            kappa: regime.kappa(),
        }
    }

    /// `(e₁₁, e₂₂, e₁₂)` and their Jacobian in the features.
    fn strain(&self, n: usize, s: &Feat) -> ([f64; 3], [[f64; NF]; 3]) {
        let (k, t) = (self.kappa, self.grad_theta[n]);
        let (g1, g2) = (s[4], s[5]);
        let e = [
            s[0] + 0.5 * k * g1 * g1 + g1 * t.x,
            s[3] + 0.5 * k * g2 * g2 + g2 * t.y,
            0.5 * (s[1] + s[2]) + 0.5 * k * g1 * g2 + 0.5 * (g1 * t.y + g2 * t.x),
        ];
        let mut j = [[0.0; NF]; 3];
        j[0][0] = 1.0;
        j[0][4] = k * g1 + t.x;
        j[1][3] = 1.0;
        j[1][5] = k * g2 + t.y;
        j[2][1] = 0.5;
        j[2][2] = 0.5;
        j[2][4] = 0.5 * (k * g2 + t.y);
        j[2][5] = 0.5 * (k * g1 + t.x);
        (e, j)
    }

    fn q(&self, e: &[f64; 3]) -> f64 {
        let tr = e[0] + e[1];
        2.0 * self.mu * (e[0] * e[0] + e[1] * e[1] + 2.0 * e[2] * e[2]) + self.c * tr * tr
    }

    fn dq(&self, e: &[f64; 3]) -> [f64; 3] {
        let tr = e[0] + e[1];
        [
            4.0 * self.mu * e[0] + 2.0 * self.c * tr,
            4.0 * self.mu * e[1] + 2.0 * self.c * tr,
            8.0 * self.mu * e[2],
        ]
    }

    fn d2q(&self) -> [[f64; 3]; 3] {
        let (m, c) = (self.mu, self.c);
        [[4.0 * m + 2.0 * c, 2.0 * c, 0.0], [2.0 * c, 4.0 * m + 2.0 * c, 0.0], [0.0, 0.0, 8.0 * m]]
    }
}

/// Feature index of `(H₁₁, H₂₂, H₁₂)`.
const BEND: [usize; 3] = [6, 8, 7];

impl Density for LimitDensity {
    fn value(&self, n: usize, s: &Feat) -> f64 {
        let (e, _) = self.strain(n, s);
        0.5 * self.q(&e) + self.q(&[s[6], s[8], s[7]]) / 24.0
    }

    fn gradient(&self, n: usize, s: &Feat) -> Feat {
        let (e, j) = self.strain(n, s);
        let q = self.dq(&e);
        let mut g = Feat::zeros();
        for a in 0..3 {
            for f in 0..NF {
                g[f] += 0.5 * q[a] * j[a][f];
            }
        }
        let qb = self.dq(&[s[6], s[8], s[7]]);
        for a in 0..3 {
            g[BEND[a]] += qb[a] / 24.0;
        }
        g
    }

    fn hessian(&self, n: usize, s: &Feat) -> Mat9 {
        let (e, j) = self.strain(n, s);
        let q = self.dq(&e);
        let k2 = self.d2q();
        let mut h = Mat9::zeros();
        for f in 0..NF {
            for g in 0..NF {
                let mut acc = 0.0;
                for a in 0..3 {
                    for b in 0..3 {
                        acc += j[a][f] * k2[a][b] * j[b][g];
                    }
                }
                h[(f, g)] = 0.5 * acc;
            }
        }
        let k = self.kappa;
        h[(4, 4)] += 0.5 * q[0] * k;
        h[(5, 5)] += 0.5 * q[1] * k;
        h[(4, 5)] += 0.5 * q[2] * 0.5 * k;
        h[(5, 4)] += 0.5 * q[2] * 0.5 * k;
        for a in 0..3 {
            for b in 0..3 {
                h[(BEND[a], BEND[b])] += k2[a][b] / 24.0;
            }
        }
        h
    }
}

/// Difference stencils of the nine limit features at every node.
fn limit_stencils(g: Grid2) -> Vec<NodeStencil> {
    (0..g.len())
        .map(|n| {
            let (i, j) = g.ij(n);
            let dof = |ii: usize, jj: usize, c: usize| 3 * g.index(ii, jj) + c;
            let dx = d1_stencil(i, g.nx, g.hx);
            let dy = d1_stencil(j, g.ny, g.hy);
            let mut taps = Vec::with_capacity(40);
            for (c, fx, fy) in [(0, 0, 1), (1, 2, 3), (2, 4, 5)] {
                for (ii, w) in dx.taps() {
                    taps.push((fx, dof(ii, j, c), w));
                }
                for (jj, w) in dy.taps() {
                    taps.push((fy, dof(i, jj, c), w));
                }
            }
            for (ii, w) in d2_stencil(i, g.nx, g.hx).taps() {
                taps.push((6, dof(ii, j, 2), w));
            }
            for (jj, w) in d2_stencil(j, g.ny, g.hy).taps() {
                taps.push((8, dof(i, jj, 2), w));
            }
            for (jj, wy) in dy.taps() {
                for (ii, wx) in dx.taps() {
                    taps.push((7, dof(ii, jj, 2), wx * wy));
                }
            }
            NodeStencil::from_taps(&taps)
        })
        .collect()
}

/// Linear functionals whose zero set is the gauge slice: mean `u`, mean
/// `∂₂u₁ − ∂₁u₂`, mean `v`, mean `∇′v`.
pub fn limit_gauge_constraints(g: Grid2) -> Vec<Vec<f64>> {
    let w = g.weights();
    let dim = 3 * g.len();
    let mut rows = vec![vec![0.0; dim]; 6];
    for n in 0..g.len() {
        let (i, j) = g.ij(n);
        rows[0][3 * n] += w[n];
        rows[1][3 * n + 1] += w[n];
        rows[3][3 * n + 2] += w[n];
        for (ii, c) in d1_stencil(i, g.nx, g.hx).taps() {
            let m = g.index(ii, j);
            rows[2][3 * m + 1] -= w[n] * c;
            rows[4][3 * m + 2] += w[n] * c;
        }
        for (jj, c) in d1_stencil(j, g.ny, g.hy).taps() {
            let m = g.index(i, jj);
            rows[2][3 * m] += w[n] * c;
            rows[5][3 * m + 2] += w[n] * c;
        }
    }
    rows
}

/// `J⁰` (or `I` without load) as a function of the packed nodal values.
pub struct LimitFunctional {
    pub grid: Grid2,
    sys: LocalSystem,
    density: LimitDensity,
    constraints: Vec<Vec<f64>>,
    theta: ThetaField,
    regime: Regime,
}

impl LimitFunctional {
    pub fn new(theta: &ThetaField, mat: &MaterialModel, regime: Regime, load: Option<&Load>) -> Result<Self> {
        let g = theta.grid();
        let mut sys = LocalSystem::new(3 * g.len(), g.weights(), limit_stencils(g));
        if let Some(load) = load {
            check_same(&g, &load.f3bar.grid)?;
            check_zero_mean(&load.f3bar)?;
            for n in 0..g.len() {
                sys.linear[3 * n + 2] = -load.r33 * sys.weights[n] * load.f3bar.values[n];
            }
            sys.constant = load.gval;
        }
        Ok(LimitFunctional {
            grid: g,
            density: LimitDensity::new(theta, mat, regime),
            constraints: limit_gauge_constraints(g),
            sys,
            theta: theta.clone(),
            regime,
        })
    }

    pub fn energy(&self, d: &Displacement2D) -> Result<f64> {
        check_same(&self.grid, &d.grid())?;
        Ok(self.value(&d.pack()))
    }
}

impl Objective for LimitFunctional {
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

    fn project(&self, x: &[f64]) -> Result<Vec<f64>> {
        let d = Displacement2D::unpack(self.grid, x)?;
        Ok(gauge_project(&d, &self.theta, self.regime)?.pack())
    }
}
