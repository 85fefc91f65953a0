//! Descent methods with linear gauge constraints for the limit functional and
//! the three-dimensional energy.

use std::io::Write;
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};

use crate::banded::BandMatrix;
use crate::error::{Error, Result};
use crate::fields::{pairwise_sum, Deformation3D};
use crate::geometry::ShellGeometry;
use crate::limit_energy::{Displacement2D, LimitFunctional, Load, Regime, ThetaField};
use crate::material::MaterialModel;
use crate::shell3d::{ForceProfile, ShellFunctional};

/// A smooth function of the packed nodal values with a linear gauge.
pub trait Objective: Sync {
    fn dim(&self) -> usize;
    fn value(&self, x: &[f64]) -> f64;
    fn gradient(&self, x: &[f64]) -> Vec<f64>;
    fn hessian(&self, _x: &[f64]) -> Option<BandMatrix> {
        None
    }
    /// Rows `c` with `c·step = 0` required of every step.
    fn constraints(&self) -> &[Vec<f64>] {
        &[]
    }
    /// Maps an iterate onto the gauge slice.
    fn project(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(x.to_vec())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Method {
    GradientDescent,
    Lbfgs,
    Newton,
}

impl Method {
    pub fn from_name(s: &str) -> Option<Self> {
        match s {
            "gd" | "gradient-descent" => Some(Method::GradientDescent),
            "lbfgs" => Some(Method::Lbfgs),
            "newton" => Some(Method::Newton),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolveOptions {
    pub max_iters: usize,
    /// threshold on the max-norm of the projected gradient
    pub grad_tol: f64,
    pub method: Method,
    pub initial_step: f64,
    pub shrink: f64,
    /// sufficient-decrease constant
    pub armijo: f64,
    pub lbfgs_memory: usize,
    pub seed: u64,
    pub log_path: Option<PathBuf>,
    pub dump_dir: PathBuf,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            max_iters: 200,
            grad_tol: 1e-10,
            method: Method::Newton,
            initial_step: 1.0,
            shrink: 0.5,
            armijo: 1e-4,
            lbfgs_memory: 10,
            seed: 0,
            log_path: None,
            dump_dir: std::env::temp_dir(),
        }
    }
}

impl SolveOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.grad_tol > 0.0) {
            return Err(Error::Config("grad_tol must be positive".into()));
        }
        if !(self.shrink > 0.0 && self.shrink < 1.0) {
            return Err(Error::Config("shrink factor must lie in (0, 1)".into()));
        }
        if !(self.armijo > 0.0 && self.armijo < 1.0) || !(self.initial_step > 0.0) {
            return Err(Error::Config("invalid line-search parameters".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IterRecord {
    pub iteration: usize,
    pub energy: f64,
    pub grad_norm: f64,
    pub step: f64,
}

#[derive(Clone, Debug)]
pub struct SolveResult {
    pub x: Vec<f64>,
    pub energy: f64,
    pub iterations: usize,
    pub grad_norm: f64,
    pub converged: bool,
    pub history: Vec<IterRecord>,
}

/// Solves `(C Φ) α = C d` for the mode coefficients.
pub fn solve_gram(rows: &[Vec<f64>], modes: &[Vec<f64>], d: &[f64]) -> Result<Vec<f64>> {
    let k = rows.len();
    let g = DMatrix::from_fn(k, k, |i, j| dot(&rows[i], &modes[j]));
    let rhs = DVector::from_fn(k, |i, _| dot(&rows[i], d));
    let sol = g
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::Singular("gauge Gram matrix".into()))?;
    Ok(sol.iter().copied().collect())
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    let p: Vec<f64> = a.iter().zip(b).map(|(x, y)| x * y).collect();
    pairwise_sum(&p)
}

fn max_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |a, b| a.max(b.abs()))
}

fn axpy(x: &[f64], t: f64, d: &[f64]) -> Vec<f64> {
    x.iter().zip(d).map(|(a, b)| a + t * b).collect()
}

/// Orthogonal projector onto `{d : C d = 0}`.
struct Projector {
    rows: Vec<Vec<f64>>,
    gram_inv: DMatrix<f64>,
}

impl Projector {
    fn new(rows: &[Vec<f64>]) -> Result<Self> {
        let k = rows.len();
        let g = DMatrix::from_fn(k, k, |i, j| dot(&rows[i], &rows[j]));
        let gram_inv = if k == 0 {
            g
        } else {
            g.try_inverse()
                .ok_or_else(|| Error::Singular("dependent gauge constraints".into()))?
        };
        Ok(Projector {
            rows: rows.to_vec(),
            gram_inv,
        })
    }

    fn apply(&self, v: &[f64]) -> Vec<f64> {
        if self.rows.is_empty() {
            return v.to_vec();
        }
        let c = DVector::from_iterator(self.rows.len(), self.rows.iter().map(|r| dot(r, v)));
        let a = &self.gram_inv * c;
        let mut out = v.to_vec();
        for (k, r) in self.rows.iter().enumerate() {
            for (o, x) in out.iter_mut().zip(r) {
                *o -= a[k] * x;
            }
        }
        out
    }
}

fn dump_iterate(dir: &Path, iteration: usize, x: &[f64]) -> PathBuf {
    let path = dir.join(format!("diverged_iterate_{iteration}.csv"));
    let write = || -> std::io::Result<()> {
        std::fs::create_dir_all(dir)?;
        let mut f = std::io::BufWriter::new(std::fs::File::create(&path)?);
        writeln!(f, "index,value")?;
        for (k, v) in x.iter().enumerate() {
            writeln!(f, "{k},{v}")?;
        }
        Ok(())
    };
    let _ = write();
    path
}

fn write_log(path: &Path, history: &[IterRecord]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["iteration", "energy", "grad_norm", "step"])?;
    for r in history {
        w.write_record(&[
            r.iteration.to_string(),
            r.energy.to_string(),
            r.grad_norm.to_string(),
            r.step.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Newton direction for `H + τI` restricted to `{C d = 0}`; `None` if the
/// shifted matrix is not positive definite.
fn newton_direction(h: &BandMatrix, tau: f64, g: &[f64], rows: &[Vec<f64>]) -> Option<Vec<f64>> {
    let mut a = h.clone();
    a.add_diagonal(tau);
    let chol = a.cholesky().ok()?;
    let ag = chol.solve(g);
    if rows.is_empty() {
        return Some(ag.iter().map(|v| -v).collect());
    }
    let ac: Vec<Vec<f64>> = rows.iter().map(|r| chol.solve(r)).collect();
    let k = rows.len();
    let s = DMatrix::from_fn(k, k, |i, j| dot(&rows[i], &ac[j]));
    let rhs = DVector::from_fn(k, |i, _| -dot(&rows[i], &ag));
    let lam = s.lu().solve(&rhs)?;
    let mut d: Vec<f64> = ag.iter().map(|v| -v).collect();
    for (j, col) in ac.iter().enumerate() {
        for (o, c) in d.iter_mut().zip(col) {
            *o -= lam[j] * c;
        }
    }
    Some(d)
}

/// Consecutive steps without representable decrease before giving up.
const STALL_LIMIT: usize = 3;

/// Descent from `x0` (first mapped onto the gauge slice). Every accepted step
/// satisfies the sufficient-decrease condition, so energies never increase.
pub fn minimize<O: Objective>(obj: &O, x0: &[f64], opts: &SolveOptions) -> Result<SolveResult> {
    opts.validate()?;
    if x0.len() != obj.dim() {
        return Err(Error::GridMismatch(format!("{} values for {} unknowns", x0.len(), obj.dim())));
    }
    let proj = Projector::new(obj.constraints())?;
    let mut x = obj.project(x0)?;
    let mut f = obj.value(&x);
    let mut g = obj.gradient(&x);
    if !f.is_finite() || g.iter().any(|v| !v.is_finite()) {
        return Err(Error::Diverged {
            iteration: 0,
            dump: dump_iterate(&opts.dump_dir, 0, &x),
        });
    }
    let mut pg = proj.apply(&g);
    let mut history = vec![IterRecord {
        iteration: 0,
        energy: f,
        grad_norm: max_norm(&pg),
        step: 0.0,
    }];
    let mut tau: f64 = 0.0;
    let mut mem: Vec<(Vec<f64>, Vec<f64>, f64)> = Vec::new();
    let mut converged = max_norm(&pg) <= opts.grad_tol;
    let mut stalled = 0;
    let mut best_g = max_norm(&pg);
    let mut it = 0;
    while !converged && it < opts.max_iters {
        it += 1;
        let mut d = match opts.method {
            Method::GradientDescent => pg.iter().map(|v| -v).collect(),
            Method::Lbfgs => lbfgs_direction(&pg, &mem),
            Method::Newton => {
                let h = obj
                    .hessian(&x)
                    .ok_or_else(|| Error::Config("Newton's method needs a Hessian".into()))?;
                let floor = 1e-12 * h.max_abs_diagonal().max(1e-300);
                let mut t = if tau == 0.0 { 0.0 } else { (tau / 10.0).max(floor) };
                loop {
                    if let Some(d) = newton_direction(&h, t, &g, obj.constraints()) {
                        tau = t;
                        break d;
                    }
                    t = if t == 0.0 { floor } else { t * 100.0 };
                    if t > 1e12 * h.max_abs_diagonal() {
                        return Err(Error::Singular("Hessian could not be regularized".into()));
                    }
                }
            }
        };
        let mut slope = dot(&g, &d);
        if !(slope < 0.0) {
            // fall back to steepest descent
            mem.clear();
            d = pg.iter().map(|v| -v).collect();
            slope = dot(&g, &d);
        }
        let mut t = opts.initial_step;
        let mut accepted = None;
        let mut saw_finite = false;
        while t > 1e-20 {
            let xt = axpy(&x, t, &d);
            if xt == x {
                break;
            }
            let ft = obj.value(&xt);
            if ft.is_finite() {
                saw_finite = true;
                if ft <= f + opts.armijo * t * slope {
                    accepted = Some((xt, ft, None));
                    break;
                }
                // energy differences at rounding level: fall back to the
                // approximate sufficient-decrease test on the slope
                if ft <= f && f - ft <= 1e-12 * f.abs() {
                    let gt = obj.gradient(&xt);
                    if dot(&gt, &d) <= (1.0 - 2.0 * opts.armijo) * slope.abs() {
                        accepted = Some((xt, ft, Some(gt)));
                        break;
                    }
                }
            }
            t *= opts.shrink;
        }
        let Some((xn, fnew, gcached)) = accepted else {
            if !saw_finite {
                return Err(Error::Diverged {
                    iteration: it,
                    dump: dump_iterate(&opts.dump_dir, it, &x),
                });
            }
            it -= 1;
            if opts.method == Method::Lbfgs && !mem.is_empty() {
                // stale curvature pairs: restart from steepest descent
                mem.clear();
                continue;
            }
            // no further decrease is representable
            break;
        };
        if opts.method == Method::Newton && t < 0.1 {
            tau = (tau * 10.0).max(1e-10);
        }
        let gn = gcached.unwrap_or_else(|| obj.gradient(&xn));
        if gn.iter().any(|v| !v.is_finite()) {
            return Err(Error::Diverged {
                iteration: it,
                dump: dump_iterate(&opts.dump_dir, it, &xn),
            });
        }
        let pgn = proj.apply(&gn);
        if opts.method == Method::Lbfgs {
            let s: Vec<f64> = xn.iter().zip(&x).map(|(a, b)| a - b).collect();
            let y: Vec<f64> = pgn.iter().zip(&pg).map(|(a, b)| a - b).collect();
            let sy = dot(&s, &y);
            if sy > 1e-14 * dot(&s, &s).sqrt() * dot(&y, &y).sqrt() {
                mem.push((s, y, 1.0 / sy));
                if mem.len() > opts.lbfgs_memory {
                    mem.remove(0);
                }
            }
        }
        x = xn;
        let fprev = f;
        f = fnew;
        g = gn;
        pg = pgn;
        let gnorm = max_norm(&pg);
        // neither the energy nor the gradient improves beyond rounding
        let flat = fprev - f <= 4.0 * f64::EPSILON * f.abs();
        stalled = if flat && gnorm > 0.5 * best_g { stalled + 1 } else { 0 };
        best_g = best_g.min(gnorm);
        history.push(IterRecord {
            iteration: it,
            energy: f,
            grad_norm: gnorm,
            step: t,
        });
        converged = gnorm <= opts.grad_tol;
        if stalled >= STALL_LIMIT {
            break;
        }
    }
    if let Some(p) = &opts.log_path {
        write_log(p, &history)?;
    }
    Ok(SolveResult {
        grad_norm: max_norm(&pg),
        x,
        energy: f,
        iterations: it,
        converged,
        history,
    })
}

fn lbfgs_direction(pg: &[f64], mem: &[(Vec<f64>, Vec<f64>, f64)]) -> Vec<f64> {
    let mut q = pg.to_vec();
    let mut alphas = vec![0.0; mem.len()];
    for (k, (s, y, rho)) in mem.iter().enumerate().rev() {
        let a = rho * dot(s, &q);
        alphas[k] = a;
        for (qi, yi) in q.iter_mut().zip(y) {
            *qi -= a * yi;
        }
    }
    if let Some((s, y, _)) = mem.last() {
        let gamma = dot(s, y) / dot(y, y);
        for qi in q.iter_mut() {
            *qi *= gamma;
        }
    }
    for (k, (s, y, rho)) in mem.iter().enumerate() {
        let b = rho * dot(y, &q);
        for (qi, si) in q.iter_mut().zip(s) {
            *qi += (alphas[k] - b) * si;
        }
    }
    q.iter().map(|v| -v).collect()
}

/// Minimizes `J⁰` (or the unloaded functional) from `d0`.
pub fn minimize_limit(
    d0: &Displacement2D,
    theta: &ThetaField,
    mat: &MaterialModel,
    regime: Regime,
    load: Option<&Load>,
    opts: &SolveOptions,
) -> Result<(Displacement2D, f64, SolveResult)> {
    let f = LimitFunctional::new(theta, mat, regime, load)?;
    let res = minimize(&f, &d0.pack(), opts)?;
    let d = Displacement2D::unpack(d0.grid(), &res.x)?;
    Ok((d, res.energy, res))
}

/// Minimizes `(1/E^h) J^h` from `y0`.
pub fn minimize_shell3d(
    y0: &Deformation3D,
    geom: &ShellGeometry,
    mat: &MaterialModel,
    fp: &ForceProfile,
    regime: Regime,
    opts: &SolveOptions,
) -> Result<(Deformation3D, f64, SolveResult)> {
    let e = regime.energy_scale(geom.h);
    let f = ShellFunctional::new(y0.grid, geom, mat, Some((fp, regime)), e)?;
    let res = minimize(&f, &ShellFunctional::pack(y0), opts)?;
    Ok((f.unpack(&res.x), res.energy, res))
}
