//! Convergence studies over thickness sweeps.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::config::{ForceName, StudyConfig, TargetDisplacement};
use super::report::{io_err, StudyReport};
use crate::error::Result;
use crate::fields::{Field2, Grid2};
use crate::limit_energy::{gauge_project, i_limit, manufactured_load, Displacement2D, Load, ThetaField};
use crate::minimize::{minimize_limit, minimize_shell3d, SolveResult};
use crate::recovery::{build_recovery, displacement_roundtrip};
use crate::shell3d::{energy_ih, energy_jh, ForceProfile};
use crate::Vec2;

/// Optional progress lines on stderr.
#[derive(Clone, Copy)]
struct Progress(bool);

impl Progress {
    fn say(&self, msg: impl AsRef<str>) {
        if self.0 {
            eprintln!("{}", msg.as_ref());
        }
    }
}

pub fn target_displacement(kind: TargetDisplacement, g: Grid2) -> Displacement2D {
    use std::f64::consts::PI;
    match kind {
        TargetDisplacement::Zero => Displacement2D::zeros(g),
        TargetDisplacement::Parabola => Displacement2D::from_fn(g, |_| Vec2::zeros(), |p| 0.5 * p.x * p.x),
        TargetDisplacement::Twist => Displacement2D::from_fn(g, |_| Vec2::zeros(), |p| p.x * p.y),
        TargetDisplacement::Mixed => Displacement2D::from_fn(
            g,
            |p| Vec2::new(0.3 * (PI * p.y).sin() * p.x, 0.2 * (PI * p.x).cos()),
            |p| 0.5 * p.x * p.x - 0.25 * p.y * p.y + 0.1 * (PI * p.x).sin() * p.y,
        ),
    }
}

pub fn force_field(kind: ForceName, g: Grid2) -> Field2<f64> {
    match kind {
        ForceName::Zero => Field2::zeros(g),
        ForceName::Manufactured => manufactured_load(g),
    }
}

/// Rescaled 3D energies of the recovery deformations against the limit
/// energy of the same displacement.
pub fn run_recovery_study(cfg: &StudyConfig, verbose: bool) -> Result<StudyReport> {
    cfg.validate()?;
    let say = Progress(verbose);
    let g = cfg.grid2()?;
    let mid = cfg.midsurface();
    let theta = ThetaField::analytic(&mid, g);
    let d = target_displacement(cfg.displacement, g);
    let target = cfg.target_regime.unwrap_or(cfg.regime);
    let limit = i_limit(&d, &theta, &cfg.material, target)?;
    let mut report = StudyReport::new(cfg.echo());
    for &h in &cfg.h_list {
        let geom = cfg.geometry(h)?;
        let e = cfg.regime.energy_scale(h);
        let y = build_recovery(&d, &geom, &cfg.material, cfg.regime, cfg.nz)?;
        let rescaled = energy_ih(&y, &geom, &cfg.material)? / e;
        say.say(format!("h = {h:e}: rescaled {rescaled:e}, limit {limit:e}"));
        report.push(h, e, geom.fh, rescaled, limit);
    }
    Ok(report)
}

#[derive(Clone, Debug, PartialEq)]
pub struct FullGammaRow {
    pub h: f64,
    pub recovery_energy: f64,
    pub minimized_energy: f64,
    pub lower_bound: f64,
    pub iterations: usize,
    pub converged: bool,
    pub roundtrip_u: f64,
    pub roundtrip_v: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FullGammaStudy {
    pub report: StudyReport,
    /// `min J⁰` on the fine 2D grid
    pub min_j0: f64,
    /// `min J⁰` on the in-plane grid of the slab
    pub min_j0_plane: f64,
    /// quadrature tolerance `|min_j0_plane − min_j0|`
    pub q: f64,
    pub rows: Vec<FullGammaRow>,
}

pub const FULL_GAMMA_COLUMNS: &str =
    "h,recovery_energy,minimized_energy,lower_bound,iterations,converged,roundtrip_u,roundtrip_v";

impl FullGammaStudy {
    pub fn details_csv(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "# min_j0 {:e}", self.min_j0);
        let _ = writeln!(s, "# min_j0_plane {:e}", self.min_j0_plane);
        let _ = writeln!(s, "# q {:e}", self.q);
        s.push_str(FULL_GAMMA_COLUMNS);
        s.push('\n');
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{:e},{:e},{:e},{:e},{},{},{:e},{:e}",
                r.h,
                r.recovery_energy,
                r.minimized_energy,
                r.lower_bound,
                r.iterations,
                r.converged,
                r.roundtrip_u,
                r.roundtrip_v
            );
        }
        s
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        self.report.write(dir, "full_gamma")?;
        let p = dir.join("full_gamma_details.csv");
        fs::write(&p, self.details_csv()).map_err(|e| io_err(&p, e))
    }
}

fn loaded_min(
    cfg: &StudyConfig,
    g: Grid2,
    theta: &ThetaField,
    say: Progress,
) -> Result<(Displacement2D, f64, SolveResult)> {
    let load = Load::new(force_field(cfg.force, g), 1.0, 0.0)?;
    let mut opts = cfg.solver.clone();
    opts.max_iters = opts.max_iters.max(100);
    let out = minimize_limit(&Displacement2D::zeros(g), theta, &cfg.material, cfg.regime, Some(&load), &opts)?;
    say.say(format!(
        "min J0 on {}x{}: {:e} after {} iterations",
        g.nx, g.ny, out.1, out.2.iterations
    ));
    Ok(out)
}

/// Minimizes the loaded 3D energy at each thickness from a recovery warm
/// start and compares with the minimum of the limit functional.
pub fn run_full_gamma_study(cfg: &StudyConfig, verbose: bool) -> Result<FullGammaStudy> {
    cfg.validate()?;
    let say = Progress(verbose);
    let mid = cfg.midsurface();
    let fine = cfg.grid2()?;
    let (_, min_j0, _) = loaded_min(cfg, fine, &ThetaField::analytic(&mid, fine), say)?;
    let plane = cfg.grid3_plane()?;
    let theta = ThetaField::analytic(&mid, plane);
    let (d2, min_j0_plane, _) = loaded_min(cfg, plane, &theta, say)?;
    let q = (min_j0_plane - min_j0).abs();
    let lower = min_j0 - 0.05 * min_j0.abs() - q;
    let d2g = gauge_project(&d2, &theta, cfg.regime)?;
    let fp = ForceProfile::for_regime(force_field(cfg.force, plane), cfg.regime)?;
    let mut report = StudyReport::new(cfg.echo());
    let mut rows = Vec::new();
    for &h in &cfg.h_list {
        let geom = cfg.geometry(h)?;
        let e = cfg.regime.energy_scale(h);
        let y0 = build_recovery(&d2, &geom, &cfg.material, cfg.regime, cfg.nz)?;
        let recovery_energy = energy_jh(&y0, &geom, &cfg.material, &fp, cfg.regime)? / e;
        let mut opts = cfg.solver.clone();
        opts.dump_dir = cfg.output.clone();
        let (ystar, jmin, res) = minimize_shell3d(&y0, &geom, &cfg.material, &fp, cfg.regime, &opts)?;
        let rt = gauge_project(&displacement_roundtrip(&ystar, &geom, cfg.regime)?, &theta, cfg.regime)?;
        let (ru, rv) = rt.l2_distance(&d2g)?;
        say.say(format!(
            "h = {h:e}: recovery {recovery_energy:e}, minimum {jmin:e} ({} iterations)",
            res.iterations
        ));
        report.push(h, e, geom.fh, jmin, min_j0);
        rows.push(FullGammaRow {
            h,
            recovery_energy,
            minimized_energy: jmin,
            lower_bound: lower,
            iterations: res.iterations,
            converged: res.converged,
            roundtrip_u: ru,
            roundtrip_v: rv,
        });
    }
    Ok(FullGammaStudy {
        report,
        min_j0,
        min_j0_plane,
        q,
        rows,
    })
}

/// Minimizes `J⁰` on the 2D grid and writes the minimizer and energy terms.
pub fn run_minimize_2d(cfg: &StudyConfig, dir: &Path, verbose: bool) -> Result<(Displacement2D, f64)> {
    cfg.validate()?;
    let g = cfg.grid2()?;
    let mid = cfg.midsurface();
    let theta = ThetaField::analytic(&mid, g);
    let (d, e, res) = loaded_min(cfg, g, &theta, Progress(verbose))?;
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    let load = Load::new(force_field(cfg.force, g), 1.0, 0.0)?;
    crate::limit_energy::energy_breakdown(&d, &theta, &cfg.material, cfg.regime, &load)?
        .write_csv(&dir.join("energy.csv"))?;
    d.u.write_csv(&dir.join("u.csv"), &["u1", "u2"])?;
    d.v.write_csv(&dir.join("v.csv"), &["v"])?;
    let mut hist = String::from("iteration,energy,grad_norm,step\n");
    for r in &res.history {
        let _ = writeln!(hist, "{},{:e},{:e},{:e}", r.iteration, r.energy, r.grad_norm, r.step);
    }
    let p = dir.join("history.csv");
    fs::write(&p, hist).map_err(|e| io_err(&p, e))?;
    Ok((d, e))
}
