//! Reference geometry of a shallow shell.
//!
//! The midsurface is the graph of `f^h θ` over a rectangle ω and the shell
//! occupies `Θ^h(x', t) = (x', f^h θ(x')) + t a₃^h(x')` for `|t| ≤ h/2`.

use std::f64::consts::PI;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::fields::{d1_stencil, Field2, Grid2};
use crate::{Mat2, Mat3, Vec2, Vec3};

/// Built-in midsurface shapes (before scaling by the amplitude).
#[derive(Clone, Debug, PartialEq)]
pub enum Shape {
    /// θ = 0
    Flat,
    /// θ = x₁² + x₂²
    Parabolic,
    /// θ = x₁ x₂
    Saddle,
    /// θ = sin(πx₁) sin(πx₂)
    Sinusoidal,
    /// θ = x₁², developable
    Cylinder,
    /// θ given by node samples; derivatives by fourth-order differences.
    Sampled(Arc<SampledShape>),
}

impl Shape {
    pub fn from_name(name: &str) -> Option<Shape> {
        Some(match name {
            "flat" => Shape::Flat,
            "parabolic" => Shape::Parabolic,
            "saddle" => Shape::Saddle,
            "sinusoidal" => Shape::Sinusoidal,
            "cylinder" | "developable" => Shape::Cylinder,
            _ => return None,
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            Shape::Flat => "flat",
            Shape::Parabolic => "parabolic",
            Shape::Saddle => "saddle",
            Shape::Sinusoidal => "sinusoidal",
            Shape::Cylinder => "cylinder",
            Shape::Sampled(_) => "sampled",
        }
    }
}

/// Grid samples of θ with precomputed first and second derivatives.
#[derive(Debug, PartialEq)]
pub struct SampledShape {
    theta: Field2<f64>,
    grad: Field2<Vec2>,
    hess: Field2<Mat2>,
}

/// Fourth-order central first derivative where the stencil fits, second-order
/// central one node in, second-order one-sided at the boundary.
fn d1_fourth(f: impl Fn(usize) -> f64, i: usize, n: usize, h: f64) -> f64 {
    if i >= 2 && i + 2 < n {
        (-f(i + 2) + 8.0 * f(i + 1) - 8.0 * f(i - 1) + f(i - 2)) / (12.0 * h)
    } else {
        d1_stencil(i, n, h).apply(f)
    }
}

fn d2_fourth(f: impl Fn(usize) -> f64, i: usize, n: usize, h: f64) -> f64 {
    if i >= 2 && i + 2 < n {
        (-f(i + 2) + 16.0 * f(i + 1) - 30.0 * f(i) + 16.0 * f(i - 1) - f(i - 2)) / (12.0 * h * h)
    } else if i >= 1 && i + 1 < n {
        (f(i + 1) - 2.0 * f(i) + f(i - 1)) / (h * h)
    } else if i == 0 {
        (2.0 * f(0) - 5.0 * f(1) + 4.0 * f(2) - f(3)) / (h * h)
    } else {
        (2.0 * f(n - 1) - 5.0 * f(n - 2) + 4.0 * f(n - 3) - f(n - 4)) / (h * h)
    }
}

impl SampledShape {
    pub fn new(theta: Field2<f64>) -> Result<Self> {
        let g = theta.grid;
        if g.nx < 5 || g.ny < 5 {
            return Err(Error::GridTooSmall("sampled midsurface needs 5x5 nodes".into()));
        }
        if !theta.all_finite() {
            return Err(Error::Config("sampled midsurface has non-finite values".into()));
        }
        let t = |i: usize, j: usize| theta.at(i, j);
        let n = g.len();
        let mut grad = Vec::with_capacity(n);
        let mut d1 = Vec::with_capacity(n);
        for k in 0..n {
            let (i, j) = g.ij(k);
            let gx = d1_fourth(|ii| t(ii, j), i, g.nx, g.hx);
            let gy = d1_fourth(|jj| t(i, jj), j, g.ny, g.hy);
            grad.push(Vec2::new(gx, gy));
            d1.push(gx);
        }
        let mut hess = Vec::with_capacity(n);
        for k in 0..n {
            let (i, j) = g.ij(k);
            let hxx = d2_fourth(|ii| t(ii, j), i, g.nx, g.hx);
            let hyy = d2_fourth(|jj| t(i, jj), j, g.ny, g.hy);
            let hxy = d1_fourth(|jj| d1[g.index(i, jj)], j, g.ny, g.hy);
            hess.push(Mat2::new(hxx, hxy, hxy, hyy));
        }
        Ok(SampledShape {
            grad: Field2::new(g, grad)?,
            hess: Field2::new(g, hess)?,
            theta,
        })
    }

    /// Bilinear interpolation of a node field at `p` (clamped to ω̄).
    fn interp<V: crate::fields::FieldValue>(&self, f: &Field2<V>, p: Vec2) -> V {
        let g = f.grid;
        let locate = |x: f64, x0: f64, h: f64, n: usize| {
            let s = ((x - x0) / h).clamp(0.0, (n - 1) as f64);
            let i = (s.floor() as usize).min(n - 2);
            (i, s - i as f64)
        };
        let (i, a) = locate(p.x, g.x0, g.hx, g.nx);
        let (j, b) = locate(p.y, g.y0, g.hy, g.ny);
        f.at(i, j) * ((1.0 - a) * (1.0 - b))
            + f.at(i + 1, j) * (a * (1.0 - b))
            + f.at(i, j + 1) * ((1.0 - a) * b)
            + f.at(i + 1, j + 1) * (a * b)
    }
}

/// The h-independent shape θ over the rectangle ω, with derivatives.
#[derive(Clone, Debug, PartialEq)]
pub struct Midsurface {
    pub shape: Shape,
    pub amplitude: f64,
    pub x_range: (f64, f64),
    pub y_range: (f64, f64),
}

impl Midsurface {
    pub fn new(shape: Shape, amplitude: f64, x_range: (f64, f64), y_range: (f64, f64)) -> Self {
        Midsurface {
            shape,
            amplitude,
            x_range,
            y_range,
        }
    }

    pub fn flat(x_range: (f64, f64), y_range: (f64, f64)) -> Self {
        Self::new(Shape::Flat, 1.0, x_range, y_range)
    }

    /// A midsurface given by samples; the domain is the sample grid's.
    pub fn sampled(theta: Field2<f64>) -> Result<Self> {
        let g = theta.grid;
        let (xr, yr) = (g.x_range(), g.y_range());
        Ok(Self::new(Shape::Sampled(Arc::new(SampledShape::new(theta)?)), 1.0, xr, yr))
    }

    pub fn theta(&self, p: Vec2) -> f64 {
        let (x, y) = (p.x, p.y);
        let t = match &self.shape {
            Shape::Flat => 0.0,
            Shape::Parabolic => x * x + y * y,
            Shape::Saddle => x * y,
            Shape::Sinusoidal => (PI * x).sin() * (PI * y).sin(),
            Shape::Cylinder => x * x,
            Shape::Sampled(s) => s.interp(&s.theta, p),
        };
        self.amplitude * t
    }

    pub fn grad(&self, p: Vec2) -> Vec2 {
        let (x, y) = (p.x, p.y);
        let g = match &self.shape {
            Shape::Flat => Vec2::zeros(),
            Shape::Parabolic => Vec2::new(2.0 * x, 2.0 * y),
            Shape::Saddle => Vec2::new(y, x),
            Shape::Sinusoidal => {
                let (s1, c1) = (PI * x).sin_cos();
                let (s2, c2) = (PI * y).sin_cos();
                Vec2::new(PI * c1 * s2, PI * s1 * c2)
            }
            Shape::Cylinder => Vec2::new(2.0 * x, 0.0),
            Shape::Sampled(s) => s.interp(&s.grad, p),
        };
        g * self.amplitude
    }

    pub fn hessian(&self, p: Vec2) -> Mat2 {
        let (x, y) = (p.x, p.y);
        let h = match &self.shape {
            Shape::Flat => Mat2::zeros(),
            Shape::Parabolic => Mat2::new(2.0, 0.0, 0.0, 2.0),
            Shape::Saddle => Mat2::new(0.0, 1.0, 1.0, 0.0),
            Shape::Sinusoidal => {
                let (s1, c1) = (PI * x).sin_cos();
                let (s2, c2) = (PI * y).sin_cos();
                let pp = PI * PI;
                Mat2::new(-pp * s1 * s2, pp * c1 * c2, pp * c1 * c2, -pp * s1 * s2)
            }
            Shape::Cylinder => Mat2::new(2.0, 0.0, 0.0, 0.0),
            Shape::Sampled(s) => s.interp(&s.hess, p),
        };
        h * self.amplitude
    }

    /// The antisymmetric matrix `C(x')` of the first-order expansion of `∇Θ^h`.
    pub fn matrix_c(&self, p: Vec2) -> Mat3 {
        let g = self.grad(p);
        Mat3::new(0.0, 0.0, g.x, 0.0, 0.0, g.y, -g.x, -g.y, 0.0)
    }

    /// θ sampled on `grid`.
    pub fn sample(&self, grid: Grid2) -> Field2<f64> {
        Field2::from_fn(grid, |p| self.theta(p))
    }

    /// `∇′θ` evaluated analytically at the nodes of `grid`.
    pub fn grad_field(&self, grid: Grid2) -> Field2<Vec2> {
        Field2::from_fn(grid, |p| self.grad(p))
    }
}

/// Number of sample points per axis used by the admissibility guard.
const GUARD_SAMPLES: usize = 21;
/// Minimum admissible Jacobian determinant.
pub const MIN_DET: f64 = 0.5;

/// A shell of thickness parameter `h` over `f^h θ`.
#[derive(Clone, Debug, PartialEq)]
pub struct ShellGeometry {
    pub midsurface: Midsurface,
    pub h: f64,
    pub fh: f64,
}

impl ShellGeometry {
    /// Validates `h > 0`, `f^h > 0` and `f^h ≤ fh_max`.
    pub fn new(midsurface: Midsurface, h: f64, fh: f64) -> Result<Self> {
        if !(h > 0.0) || !(fh > 0.0) {
            return Err(Error::Config(format!("need h > 0 and fh > 0, got h={h}, fh={fh}")));
        }
        let fh_max = Self::fh_max(&midsurface, h);
        if fh > fh_max {
            return Err(Error::InadmissibleAmplitude { fh, fh_max });
        }
        Ok(ShellGeometry { midsurface, h, fh })
    }

    /// Builds without the admissibility guard (for expansion studies).
    pub fn unchecked(midsurface: Midsurface, h: f64, fh: f64) -> Self {
        ShellGeometry { midsurface, h, fh }
    }

    fn min_det(midsurface: &Midsurface, h: f64, fh: f64) -> f64 {
        let geom = ShellGeometry::unchecked(midsurface.clone(), h, fh);
        let (x0, x1) = midsurface.x_range;
        let (y0, y1) = midsurface.y_range;
        let n = GUARD_SAMPLES;
        let mut m = f64::INFINITY;
        for i in 0..n {
            for j in 0..n {
                let p = Vec2::new(
                    x0 + (x1 - x0) * i as f64 / (n - 1) as f64,
                    y0 + (y1 - y0) * j as f64 / (n - 1) as f64,
                );
                for t in [-0.5 * h, 0.0, 0.5 * h] {
                    m = m.min(geom.raw_grad(p, t).determinant());
                }
            }
        }
        m
    }

    /// Largest amplitude with `min det ∇Θ^h > 1/2` on the sample grid, found by
    /// bisection. Infinite for a flat midsurface.
    pub fn fh_max(midsurface: &Midsurface, h: f64) -> f64 {
        let ok = |fh: f64| Self::min_det(midsurface, h, fh) > MIN_DET;
        let mut hi = 1.0;
        while ok(hi) {
            hi *= 2.0;
            if hi > 1e8 {
                return f64::INFINITY;
            }
        }
        let mut lo = 0.0;
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if ok(mid) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        lo
    }

    /// `α^h = 1 + (f^h)² |∇′θ|²`.
    pub fn alpha(&self, p: Vec2) -> f64 {
        1.0 + self.fh * self.fh * self.midsurface.grad(p).norm_squared()
    }

    /// Unit normal `a₃^h`.
    pub fn normal(&self, p: Vec2) -> Vec3 {
        let g = self.midsurface.grad(p) * self.fh;
        Vec3::new(-g.x, -g.y, 1.0) / self.alpha(p).sqrt()
    }

    /// `Θ^h(x', t)` with `t` the physical through-thickness coordinate.
    pub fn theta_map(&self, p: Vec2, t: f64) -> Vec3 {
        Vec3::new(p.x, p.y, self.fh * self.midsurface.theta(p)) + self.normal(p) * t
    }

    fn raw_grad(&self, p: Vec2, t: f64) -> Mat3 {
        let fh = self.fh;
        let g = self.midsurface.grad(p);
        let hs = self.midsurface.hessian(p);
        let a = self.alpha(p);
        let isq = a.powf(-0.5);
        let i32 = a.powf(-1.5);
        // ∂_β α = 2 (f^h)² Σ_γ ∂_γθ ∂_γβ θ
        let da = Vec2::new(
            2.0 * fh * fh * (g.x * hs[(0, 0)] + g.y * hs[(1, 0)]),
            2.0 * fh * fh * (g.x * hs[(0, 1)] + g.y * hs[(1, 1)]),
        );
        let mut m = Mat3::zeros();
        for r in 0..2 {
            for c in 0..2 {
                let delta = if r == c { 1.0 } else { 0.0 };
                m[(r, c)] = delta - 0.5 * fh * t * i32 * (2.0 * a * hs[(r, c)] - da[c] * g[r]);
            }
            m[(r, 2)] = -fh * isq * g[r];
            m[(2, r)] = fh * g[r] - 0.5 * t * i32 * da[r];
        }
        m[(2, 2)] = isq;
        m
    }

    /// `∇Θ^h(x', t)`; errors when the determinant is not positive.
    pub fn grad_theta_map(&self, p: Vec2, t: f64) -> Result<Mat3> {
        let m = self.raw_grad(p, t);
        let det = m.determinant();
        if det > 0.0 {
            Ok(m)
        } else {
            Err(Error::NonInvertible { det, x: p.x, y: p.y, x3: t })
        }
    }

    pub fn inverse_grad_theta_map(&self, p: Vec2, t: f64) -> Result<Mat3> {
        let m = self.grad_theta_map(p, t)?;
        m.try_inverse().ok_or(Error::NonInvertible {
            det: m.determinant(),
            x: p.x,
            y: p.y,
            x3: t,
        })
    }

    pub fn det_grad_theta_map(&self, p: Vec2, t: f64) -> f64 {
        self.raw_grad(p, t).determinant()
    }
}
