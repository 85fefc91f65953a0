//! Uniform node grids on the midsurface rectangle ω and the rescaled slab
//! Ω = ω × (−½, ½), node-valued fields, finite-difference calculus and
//! quadrature.
//!
//! Every difference operator is built from the [`Stencil`] helpers so that the
//! energies (and their adjoints, used for analytic gradients) see exactly the
//! same discretization as the stand-alone field operators.

use std::io::Write;
use std::ops::{Add, Mul, Sub};
use std::path::Path;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::{Mat2, Mat3, Vec2, Vec3};

/// Minimum node count per in-plane axis.
pub const MIN_NODES: usize = 4;

/// Node-centred uniform grid over an axis-aligned rectangle.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Grid2 {
    pub nx: usize,
    pub ny: usize,
    pub x0: f64,
    pub y0: f64,
    pub hx: f64,
    pub hy: f64,
}

impl Grid2 {
    pub fn new(nx: usize, ny: usize, x_range: (f64, f64), y_range: (f64, f64)) -> Result<Self> {
        if nx < MIN_NODES || ny < MIN_NODES {
            return Err(Error::GridTooSmall(format!(
                "{nx}x{ny} nodes, need at least {MIN_NODES} per axis"
            )));
        }
        if !(x_range.1 > x_range.0) || !(y_range.1 > y_range.0) {
            return Err(Error::Config(format!(
                "empty domain x={x_range:?} y={y_range:?}"
            )));
        }
        Ok(Grid2 {
            nx,
            ny,
            x0: x_range.0,
            y0: y_range.0,
            hx: (x_range.1 - x_range.0) / (nx - 1) as f64,
            hy: (y_range.1 - y_range.0) / (ny - 1) as f64,
        })
    }

    /// Unit square `(0,1)²` with `n × n` nodes.
    pub fn unit(n: usize) -> Result<Self> {
        Self::new(n, n, (0.0, 1.0), (0.0, 1.0))
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        i * self.ny + j
    }

    #[inline]
    pub fn ij(&self, n: usize) -> (usize, usize) {
        (n / self.ny, n % self.ny)
    }

    #[inline]
    pub fn x(&self, i: usize) -> f64 {
        self.x0 + i as f64 * self.hx
    }

    #[inline]
    pub fn y(&self, j: usize) -> f64 {
        self.y0 + j as f64 * self.hy
    }

    #[inline]
    pub fn point(&self, n: usize) -> Vec2 {
        let (i, j) = self.ij(n);
        Vec2::new(self.x(i), self.y(j))
    }

    pub fn x_range(&self) -> (f64, f64) {
        (self.x0, self.x0 + self.hx * (self.nx - 1) as f64)
    }

    pub fn y_range(&self) -> (f64, f64) {
        (self.y0, self.y0 + self.hy * (self.ny - 1) as f64)
    }

    pub fn area(&self) -> f64 {
        let (a, b) = self.x_range();
        let (c, d) = self.y_range();
        (b - a) * (d - c)
    }

    /// Trapezoidal product weights, one per node.
    pub fn weights(&self) -> Vec<f64> {
        let wx = trapezoid_weights(self.nx, self.hx);
        let wy = trapezoid_weights(self.ny, self.hy);
        (0..self.len())
            .map(|n| {
                let (i, j) = self.ij(n);
                wx[i] * wy[j]
            })
            .collect()
    }

    pub fn same_nodes(&self, other: &Grid2) -> bool {
        self.nx == other.nx
            && self.ny == other.ny
            && (self.x0 - other.x0).abs() <= 1e-14 * (1.0 + self.x0.abs())
            && (self.y0 - other.y0).abs() <= 1e-14 * (1.0 + self.y0.abs())
            && (self.hx - other.hx).abs() <= 1e-14 * self.hx
            && (self.hy - other.hy).abs() <= 1e-14 * self.hy
    }
}

/// `Grid2 × nz` nodes over the rescaled slab ω × (−½, ½).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Grid3 {
    pub plane: Grid2,
    pub nz: usize,
}

impl Grid3 {
    /// `nz` must be odd (composite Simpson through the thickness) and ≥ 3.
    pub fn new(plane: Grid2, nz: usize) -> Result<Self> {
        if nz < 3 || nz % 2 == 0 {
            return Err(Error::GridTooSmall(format!(
                "nz = {nz}; through-thickness grids need an odd count >= 3"
            )));
        }
        Ok(Grid3 { plane, nz })
    }

    pub fn len(&self) -> usize {
        self.plane.len() * self.nz
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn hz(&self) -> f64 {
        1.0 / (self.nz - 1) as f64
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        (i * self.plane.ny + j) * self.nz + k
    }

    #[inline]
    pub fn ijk(&self, n: usize) -> (usize, usize, usize) {
        let k = n % self.nz;
        let (i, j) = self.plane.ij(n / self.nz);
        (i, j, k)
    }

    #[inline]
    pub fn x3(&self, k: usize) -> f64 {
        -0.5 + k as f64 * self.hz()
    }

    /// `(x1, x2, x3)` of node `n` in the rescaled slab.
    #[inline]
    pub fn point(&self, n: usize) -> Vec3 {
        let (i, j, k) = self.ijk(n);
        Vec3::new(self.plane.x(i), self.plane.y(j), self.x3(k))
    }

    /// Through-thickness quadrature weights (composite Simpson).
    pub fn z_weights(&self) -> Vec<f64> {
        simpson_weights(self.nz, self.hz())
    }

    /// Product weights: trapezoid in-plane, Simpson through the thickness.
    pub fn weights(&self) -> Vec<f64> {
        let wp = self.plane.weights();
        let wz = self.z_weights();
        (0..self.len())
            .map(|n| wp[n / self.nz] * wz[n % self.nz])
            .collect()
    }
}

fn trapezoid_weights(n: usize, h: f64) -> Vec<f64> {
    let mut w = vec![h; n];
    w[0] = 0.5 * h;
    w[n - 1] = 0.5 * h;
    w
}

fn simpson_weights(n: usize, h: f64) -> Vec<f64> {
    (0..n)
        .map(|k| {
            let c = if k == 0 || k == n - 1 {
                1.0
            } else if k % 2 == 1 {
                4.0
            } else {
                2.0
            };
            c * h / 3.0
        })
        .collect()
}

const MAX_TAPS: usize = 4;

/// A one-dimensional difference stencil: up to four `(index, weight)` taps.
#[derive(Clone, Copy, Debug)]
pub struct Stencil {
    idx: [usize; MAX_TAPS],
    coef: [f64; MAX_TAPS],
    len: usize,
}

impl Stencil {
    fn new(taps: &[(usize, f64)]) -> Self {
        let mut s = Stencil {
            idx: [0; MAX_TAPS],
            coef: [0.0; MAX_TAPS],
            len: taps.len(),
        };
        for (t, &(i, c)) in taps.iter().enumerate() {
            s.idx[t] = i;
            s.coef[t] = c;
        }
        s
    }

    pub fn taps(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        (0..self.len).map(move |t| (self.idx[t], self.coef[t]))
    }

    pub fn apply<V: FieldValue>(&self, f: impl Fn(usize) -> V) -> V {
        self.taps().fold(V::zero(), |acc, (i, c)| acc + f(i) * c)
    }
}

/// First derivative at node `i` of `n`: central inside, second-order one-sided
/// at the two ends.
pub fn d1_stencil(i: usize, n: usize, h: f64) -> Stencil {
    let s = 0.5 / h;
    if i == 0 {
        Stencil::new(&[(0, -3.0 * s), (1, 4.0 * s), (2, -s)])
    } else if i == n - 1 {
        Stencil::new(&[(n - 1, 3.0 * s), (n - 2, -4.0 * s), (n - 3, s)])
    } else {
        Stencil::new(&[(i - 1, -s), (i + 1, s)])
    }
}

/// Second derivative at node `i` of `n`: compact three-point inside,
/// second-order four-point one-sided at the ends.
pub fn d2_stencil(i: usize, n: usize, h: f64) -> Stencil {
    let s = 1.0 / (h * h);
    if i == 0 {
        Stencil::new(&[(0, 2.0 * s), (1, -5.0 * s), (2, 4.0 * s), (3, -s)])
    } else if i == n - 1 {
        Stencil::new(&[
            (n - 1, 2.0 * s),
            (n - 2, -5.0 * s),
            (n - 3, 4.0 * s),
            (n - 4, -s),
        ])
    } else {
        Stencil::new(&[(i - 1, s), (i, -2.0 * s), (i + 1, s)])
    }
}

/// Values that can live on grid nodes and be combined by difference stencils.
pub trait FieldValue:
    Copy + Send + Sync + Add<Output = Self> + Sub<Output = Self> + Mul<f64, Output = Self>
{
    fn zero() -> Self;
    fn components(&self) -> Vec<f64>;
    fn is_finite_value(&self) -> bool {
        self.components().iter().all(|c| c.is_finite())
    }
}

impl FieldValue for f64 {
    fn zero() -> Self {
        0.0
    }
    fn components(&self) -> Vec<f64> {
        vec![*self]
    }
    fn is_finite_value(&self) -> bool {
        self.is_finite()
    }
}

macro_rules! impl_field_value {
    ($t:ty) => {
        impl FieldValue for $t {
            fn zero() -> Self {
                <$t>::zeros()
            }
            fn components(&self) -> Vec<f64> {
                // row-major so CSV columns read a11, a12, ...
                self.transpose().iter().copied().collect()
            }
            fn is_finite_value(&self) -> bool {
                self.iter().all(|c| c.is_finite())
            }
        }
    };
}

impl_field_value!(Vec2);
impl_field_value!(Vec3);
impl_field_value!(Mat2);
impl_field_value!(Mat3);

/// Values on the nodes of a [`Grid2`].
#[derive(Clone, Debug, PartialEq)]
pub struct Field2<V> {
    pub grid: Grid2,
    pub values: Vec<V>,
}

impl<V: FieldValue> Field2<V> {
    pub fn new(grid: Grid2, values: Vec<V>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "{} values for {} nodes",
                values.len(),
                grid.len()
            )));
        }
        Ok(Field2 { grid, values })
    }

    pub fn zeros(grid: Grid2) -> Self {
        Field2 {
            grid,
            values: vec![V::zero(); grid.len()],
        }
    }

    /// Sample `f(x')` at every node (in parallel, order preserved).
    pub fn from_fn(grid: Grid2, f: impl Fn(Vec2) -> V + Sync) -> Self {
        let values = (0..grid.len())
            .into_par_iter()
            .map(|n| f(grid.point(n)))
            .collect();
        Field2 { grid, values }
    }

    pub fn map<W: FieldValue>(&self, f: impl Fn(&V) -> W + Sync + Send) -> Field2<W> {
        Field2 {
            grid: self.grid,
            values: self.values.par_iter().map(f).collect(),
        }
    }

    pub fn zip_map<U: FieldValue, W: FieldValue>(
        &self,
        other: &Field2<U>,
        f: impl Fn(&V, &U) -> W + Sync,
    ) -> Result<Field2<W>> {
        check_same(&self.grid, &other.grid)?;
        Ok(Field2 {
            grid: self.grid,
            values: self
                .values
                .par_iter()
                .zip(other.values.par_iter())
                .map(|(a, b)| f(a, b))
                .collect(),
        })
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> V {
        self.values[self.grid.index(i, j)]
    }

    pub fn all_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite_value())
    }

    /// Partial derivative along axis 0 (`x1`) or 1 (`x2`).
    pub fn partial(&self, axis: usize) -> Field2<V> {
        let g = self.grid;
        let values = (0..g.len())
            .into_par_iter()
            .map(|n| {
                let (i, j) = g.ij(n);
                if axis == 0 {
                    d1_stencil(i, g.nx, g.hx).apply(|ii| self.at(ii, j))
                } else {
                    d1_stencil(j, g.ny, g.hy).apply(|jj| self.at(i, jj))
                }
            })
            .collect();
        Field2 { grid: g, values }
    }

    /// Second partial derivative along one axis.
    pub fn partial2(&self, axis: usize) -> Field2<V> {
        let g = self.grid;
        let values = (0..g.len())
            .into_par_iter()
            .map(|n| {
                let (i, j) = g.ij(n);
                if axis == 0 {
                    d2_stencil(i, g.nx, g.hx).apply(|ii| self.at(ii, j))
                } else {
                    d2_stencil(j, g.ny, g.hy).apply(|jj| self.at(i, jj))
                }
            })
            .collect();
        Field2 { grid: g, values }
    }

    /// Writes one row per node: `x1, x2, <components>`.
    pub fn write_csv(&self, path: &Path, names: &[&str]) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        let mut header = vec!["x1".to_string(), "x2".to_string()];
        header.extend(names.iter().map(|s| s.to_string()));
        w.write_record(&header)?;
        for (n, v) in self.values.iter().enumerate() {
            let p = self.grid.point(n);
            let mut rec = vec![p.x.to_string(), p.y.to_string()];
            rec.extend(v.components().iter().map(|c| c.to_string()));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

pub(crate) fn check_same(a: &Grid2, b: &Grid2) -> Result<()> {
    if a.same_nodes(b) {
        Ok(())
    } else {
        Err(Error::GridMismatch(format!(
            "{}x{} grid vs {}x{} grid",
            a.nx, a.ny, b.nx, b.ny
        )))
    }
}

/// Gradient operator ∇′ on planar fields.
pub trait Grad2 {
    type Output;
    fn grad2(&self) -> Self::Output;
}

impl Grad2 for Field2<f64> {
    type Output = Field2<Vec2>;
    fn grad2(&self) -> Field2<Vec2> {
        let d1 = self.partial(0);
        let d2 = self.partial(1);
        Field2 {
            grid: self.grid,
            values: d1
                .values
                .iter()
                .zip(&d2.values)
                .map(|(&a, &b)| Vec2::new(a, b))
                .collect(),
        }
    }
}

impl Grad2 for Field2<Vec2> {
    type Output = Field2<Mat2>;
    /// Entry `(c, β)` is `∂_β u_c`.
    fn grad2(&self) -> Field2<Mat2> {
        let d1 = self.partial(0);
        let d2 = self.partial(1);
        Field2 {
            grid: self.grid,
            values: d1
                .values
                .iter()
                .zip(&d2.values)
                .map(|(a, b)| Mat2::from_columns(&[*a, *b]))
                .collect(),
        }
    }
}

/// `∇′f` for scalar or 2-vector fields.
pub fn grad2<F: Grad2>(f: &F) -> F::Output {
    f.grad2()
}

/// Symmetric Hessian `(∇′)²f`: compact second differences on the diagonal,
/// nested first differences for the mixed entry.
pub fn hessian2(f: &Field2<f64>) -> Field2<Mat2> {
    let f11 = f.partial2(0);
    let f22 = f.partial2(1);
    let f12 = f.partial(0).partial(1);
    let values = (0..f.grid.len())
        .map(|n| {
            let m = f12.values[n];
            Mat2::new(f11.values[n], m, m, f22.values[n])
        })
        .collect();
    Field2 {
        grid: f.grid,
        values,
    }
}

/// Values on the nodes of a [`Grid3`].
#[derive(Clone, Debug, PartialEq)]
pub struct Field3<V> {
    pub grid: Grid3,
    pub values: Vec<V>,
}

/// A deformation sampled on the rescaled slab Ω, i.e. `y ∘ Θ^h ∘ P^h`.
pub type Deformation3D = Field3<Vec3>;

impl<V: FieldValue> Field3<V> {
    pub fn new(grid: Grid3, values: Vec<V>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "{} values for {} nodes",
                values.len(),
                grid.len()
            )));
        }
        Ok(Field3 { grid, values })
    }

    pub fn zeros(grid: Grid3) -> Self {
        Field3 {
            grid,
            values: vec![V::zero(); grid.len()],
        }
    }

    /// Sample `f(x1, x2, x3)` at every node of the rescaled slab.
    pub fn from_fn(grid: Grid3, f: impl Fn(Vec3) -> V + Sync) -> Self {
        let values = (0..grid.len())
            .into_par_iter()
            .map(|n| f(grid.point(n)))
            .collect();
        Field3 { grid, values }
    }

    pub fn map<W: FieldValue>(&self, f: impl Fn(&V) -> W + Sync + Send) -> Field3<W> {
        Field3 {
            grid: self.grid,
            values: self.values.par_iter().map(f).collect(),
        }
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize, k: usize) -> V {
        self.values[self.grid.index(i, j, k)]
    }

    pub fn all_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite_value())
    }
}

/// Difference stencils (in flat node indices) for `∂_1`, `∂_2`, `∂_3` at a
/// node of a [`Grid3`]; the `∂_3` taps are not yet divided by `h`.
pub(crate) fn grad3_stencils(g: &Grid3, n: usize) -> [Vec<(usize, f64)>; 3] {
    let (i, j, k) = g.ijk(n);
    let p = g.plane;
    let s1 = d1_stencil(i, p.nx, p.hx)
        .taps()
        .map(|(ii, c)| (g.index(ii, j, k), c))
        .collect();
    let s2 = d1_stencil(j, p.ny, p.hy)
        .taps()
        .map(|(jj, c)| (g.index(i, jj, k), c))
        .collect();
    let s3 = d1_stencil(k, g.nz, g.hz())
        .taps()
        .map(|(kk, c)| (g.index(i, j, kk), c))
        .collect();
    [s1, s2, s3]
}

/// Scaled gradient `∇_h y = (∂_1 y | ∂_2 y | h⁻¹ ∂_3 y)` of a 3-vector field.
pub fn grad3_scaled(y: &Field3<Vec3>, h: f64) -> Result<Field3<Mat3>> {
    let g = y.grid;
    if g.nz < 3 {
        return Err(Error::GridTooSmall(format!("nz = {}", g.nz)));
    }
    let values = (0..g.len())
        .into_par_iter()
        .map(|n| {
            let st = grad3_stencils(&g, n);
            let col = |s: &Vec<(usize, f64)>| {
                s.iter()
                    .fold(Vec3::zeros(), |acc, &(m, c)| acc + y.values[m] * c)
            };
            Mat3::from_columns(&[col(&st[0]), col(&st[1]), col(&st[2]) / h])
        })
        .collect();
    Ok(Field3 { grid: g, values })
}

/// Deterministic pairwise summation.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    const BLOCK: usize = 32;
    if xs.len() <= BLOCK {
        xs.iter().sum()
    } else {
        let mid = xs.len() / 2;
        pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
    }
}

/// Weighted sum `Σ w_n f_n` with pairwise reduction.
pub fn weighted_sum(weights: &[f64], values: &[f64]) -> f64 {
    let prod: Vec<f64> = weights.iter().zip(values).map(|(w, v)| w * v).collect();
    pairwise_sum(&prod)
}

/// Trapezoidal product rule over ω.
pub fn integrate2(f: &Field2<f64>) -> f64 {
    weighted_sum(&f.grid.weights(), &f.values)
}

/// Trapezoid in-plane × Simpson through the thickness over Ω.
pub fn integrate3(f: &Field3<f64>) -> f64 {
    weighted_sum(&f.grid.weights(), &f.values)
}

/// Writes a 3D field as CSV rows `x1, x2, x3, <components>`.
pub fn write_field3_csv<V: FieldValue>(f: &Field3<V>, path: &Path, names: &[&str]) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    write!(out, "x1,x2,x3")?;
    for n in names {
        write!(out, ",{n}")?;
    }
    writeln!(out)?;
    for (n, v) in f.values.iter().enumerate() {
        let p = f.grid.point(n);
        write!(out, "{},{},{}", p.x, p.y, p.z)?;
        for c in v.components() {
            write!(out, ",{c}")?;
        }
        writeln!(out)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn max_err(a: &Field2<f64>, exact: impl Fn(Vec2) -> f64) -> f64 {
        a.values
            .iter()
            .enumerate()
            .map(|(n, v)| (v - exact(a.grid.point(n))).abs())
            .fold(0.0, f64::max)
    }

    #[test]
    fn rejects_small_grids() {
        assert!(Grid2::unit(3).is_err());
        let g = Grid2::unit(4).unwrap();
        assert!(Grid3::new(g, 4).is_err());
        assert!(Grid3::new(g, 1).is_err());
        assert!(Grid3::new(g, 5).is_ok());
    }

    #[test]
    fn spacing_spans_domain() {
        let g = Grid2::new(11, 21, (-1.0, 1.0), (0.0, 2.0)).unwrap();
        assert_relative_eq!(g.x(g.nx - 1), 1.0, epsilon = 1e-15);
        assert_relative_eq!(g.y(g.ny - 1), 2.0, epsilon = 1e-15);
    }

    #[test]
    fn gradient_of_constant_and_affine() {
        let g = Grid2::new(9, 7, (0.0, 1.0), (-1.0, 2.0)).unwrap();
        let c = Field2::from_fn(g, |_| 3.5);
        assert!(grad2(&c).values.iter().all(|v| v.norm() < 1e-12));
        let a = Field2::from_fn(g, |p| 2.0 * p.x - 0.75 * p.y + 1.0);
        for v in grad2(&a).values {
            assert!((v - Vec2::new(2.0, -0.75)).norm() < 1e-13);
        }
        let u = Field2::from_fn(g, |p| Vec2::new(p.x + 2.0 * p.y, -p.x));
        for m in grad2(&u).values {
            assert!((m - Mat2::new(1.0, 2.0, -1.0, 0.0)).norm() < 1e-13);
        }
    }

    #[test]
    fn gradient_second_order() {
        let err = |n: usize| {
            let g = Grid2::unit(n).unwrap();
            let f = Field2::from_fn(g, |p| (PI * p.x).sin());
            let d = grad2(&f).map(|v| v.x);
            max_err(&d, |p| PI * (PI * p.x).cos())
        };
        let order = (err(33) / err(65)).log2();
        assert!(order >= 1.9, "order {order}");
    }

    #[test]
    fn hessian_exact_on_quadratics() {
        let g = Grid2::new(8, 9, (0.0, 1.0), (0.0, 1.5)).unwrap();
        let f = Field2::from_fn(g, |p| p.x * p.x);
        for m in hessian2(&f).values {
            assert!((m - Mat2::new(2.0, 0.0, 0.0, 0.0)).norm() < 1e-10);
        }
        let f = Field2::from_fn(g, |p| p.x * p.y);
        for m in hessian2(&f).values {
            assert!((m - Mat2::new(0.0, 1.0, 1.0, 0.0)).norm() < 1e-10);
        }
    }

    #[test]
    fn hessian_second_order() {
        let err = |n: usize| {
            let g = Grid2::unit(n).unwrap();
            let f = Field2::from_fn(g, |p| (PI * p.x).sin() * (PI * p.y).sin());
            let h = hessian2(&f);
            h.values
                .iter()
                .enumerate()
                .map(|(k, m)| {
                    let p = g.point(k);
                    let (s1, c1) = (PI * p.x).sin_cos();
                    let (s2, c2) = (PI * p.y).sin_cos();
                    let e = Mat2::new(-PI * PI * s1 * s2, PI * PI * c1 * c2, PI * PI * c1 * c2, -PI * PI * s1 * s2);
                    (m - e).abs().max()
                })
                .fold(0.0, f64::max)
        };
        let order = (err(33) / err(65)).log2();
        assert!(order >= 1.9, "order {order}");
    }

    #[test]
    fn quadrature() {
        let g = Grid2::unit(17).unwrap();
        assert_relative_eq!(integrate2(&Field2::from_fn(g, |_| 1.0)), 1.0, epsilon = 1e-14);
        let err = |n: usize| {
            let g = Grid2::unit(n).unwrap();
            (integrate2(&Field2::from_fn(g, |p| p.x.powi(4))) - 0.2).abs()
        };
        let ratio = err(33) / err(65);
        assert!((ratio - 4.0).abs() < 0.2, "ratio {ratio}");
    }

    #[test]
    fn simpson_through_thickness_is_exact_for_cubics() {
        let g3 = Grid3::new(Grid2::unit(5).unwrap(), 5).unwrap();
        let f = Field3::from_fn(g3, |p| p.z * p.z + p.z.powi(3));
        assert_relative_eq!(integrate3(&f), 1.0 / 12.0, epsilon = 1e-14);
    }

    #[test]
    fn boundary_flux() {
        // ∫∫ ∂1 f = ∫ f(1, y) - f(0, y) dy
        let g = Grid2::unit(65).unwrap();
        let f = Field2::from_fn(g, |p| (p.x * p.y).exp());
        let d1 = f.partial(0);
        let exact = {
            // ∫_0^1 (e^y - 1) dy = e - 2
            std::f64::consts::E - 2.0
        };
        assert!((integrate2(&d1) - exact).abs() < 1e-3);
    }

    #[test]
    fn grad3_affine_exact() {
        let g3 = Grid3::new(Grid2::new(6, 5, (0.0, 1.0), (0.0, 2.0)).unwrap(), 5).unwrap();
        let a = Mat3::new(1.0, 2.0, 0.5, -1.0, 0.25, 3.0, 0.0, 1.0, 2.0);
        let h = 0.01;
        // y(x', x3) = A (x1, x2, h x3) + b
        let y = Field3::from_fn(g3, |p| a * Vec3::new(p.x, p.y, h * p.z) + Vec3::new(1.0, 2.0, 3.0));
        for m in grad3_scaled(&y, h).unwrap().values {
            assert!((m - a).abs().max() < 1e-10);
        }
        let c = Field3::from_fn(g3, |_| Vec3::new(1.0, 1.0, 1.0));
        for m in grad3_scaled(&c, h).unwrap().values {
            assert!(m.abs().max() < 1e-12);
        }
    }

    #[test]
    fn pairwise_sum_is_order_stable() {
        let xs: Vec<f64> = (0..1000).map(|k| (k as f64).sin()).collect();
        assert_eq!(pairwise_sum(&xs).to_bits(), pairwise_sum(&xs).to_bits());
    }

    #[test]
    fn csv_header() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.csv");
        let g = Grid2::unit(4).unwrap();
        Field2::from_fn(g, |p| Vec2::new(p.x, p.y))
            .write_csv(&path, &["u1", "u2"])
            .unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("x1,x2,u1,u2\n"));
        assert_eq!(text.lines().count(), 17);
    }
}
