//! Quadratic-form table, nearest rotations, the rigidity probe and the
//! compatibility/Gauss residual maps.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::StudyConfig;
use super::report::io_err;
use super::study::target_displacement;
use crate::error::Result;
use crate::fields::{grad2, pairwise_sum, Grid3};
use crate::limit_energy::{compatibility_residual, gauss_residual, ThetaField};
use crate::material::{dist_so3, nearest_rotation, MaterialKind, MaterialModel};
use crate::{Mat2, Mat3, Vec3};

#[derive(Clone, Debug, PartialEq)]
pub struct Q2Row {
    pub lambda: f64,
    pub mu: f64,
    pub g: Mat2,
    pub closed_form: f64,
    pub minimized: f64,
}

/// Closed-form `Q₂` against the relaxation of `Q₃` for random `(G, λ, μ)`
/// with `λ, μ ∈ [0.5, 2]`.
pub fn q2_table(samples: usize, seed: u64) -> Result<Vec<Q2Row>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..samples)
        .map(|_| {
            let lambda = rng.gen_range(0.5..2.0);
            let mu = rng.gen_range(0.5..2.0);
            let g = Mat2::from_fn(|_, _| rng.gen_range(-1.0..1.0));
            let mat = MaterialModel::new(MaterialKind::StVenantKirchhoff, lambda, mu)?;
            Ok(Q2Row {
                lambda,
                mu,
                g,
                closed_form: mat.q2(&g),
                minimized: mat.q2_by_minimization(&g)?.0,
            })
        })
        .collect()
}

pub fn q2_csv(rows: &[Q2Row]) -> String {
    let mut s = String::from("lambda,mu,g11,g12,g21,g22,closed_form,minimized,difference\n");
    for r in rows {
        let _ = writeln!(
            s,
            "{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e}",
            r.lambda,
            r.mu,
            r.g[(0, 0)],
            r.g[(0, 1)],
            r.g[(1, 0)],
            r.g[(1, 1)],
            r.closed_form,
            r.minimized,
            (r.closed_form - r.minimized).abs()
        );
    }
    s
}

/// A deformation `x ↦ Q(x + ε∇φ(x)) + c` with a trigonometric potential `φ`,
/// so that its gradient `Q(I + ε∇²φ)` has a symmetric perturbation.
#[derive(Clone, Debug)]
pub struct ProbeDeformation {
    pub rotation: Mat3,
    pub epsilon: f64,
    /// `(amplitude, k₁, k₂, k₃, phase)` of `φ = Σ a sin(πk·x + ψ)`
    pub modes: Vec<(f64, f64, f64, f64, f64)>,
}

impl ProbeDeformation {
    pub fn rigid(rotation: Mat3) -> Self {
        ProbeDeformation {
            rotation,
            epsilon: 0.0,
            modes: Vec::new(),
        }
    }

    pub fn random(rng: &mut ChaCha8Rng, epsilon: f64) -> Self {
        let axis = Vec3::from_fn(|_, _| rng.gen_range(-1.0..1.0));
        let angle = rng.gen_range(-PI..PI);
        let rotation = *nalgebra::Rotation3::from_axis_angle(&nalgebra::Unit::new_normalize(axis), angle).matrix();
        let modes = (0..4)
            .map(|_| {
                (
                    rng.gen_range(-1.0..1.0),
                    rng.gen_range(0..3) as f64,
                    rng.gen_range(0..3) as f64,
                    rng.gen_range(0..2) as f64,
                    rng.gen_range(0.0..2.0 * PI),
                )
            })
            .collect();
        ProbeDeformation {
            rotation,
            epsilon,
            modes,
        }
    }

    pub fn gradient(&self, x: Vec3) -> Mat3 {
        let mut hess = Mat3::zeros();
        for &(a, k1, k2, k3, psi) in &self.modes {
            let k = Vec3::new(k1, k2, k3) * PI;
            hess -= k * k.transpose() * (a * (k.dot(&x) + psi).sin());
        }
        self.rotation * (Mat3::identity() + hess * self.epsilon)
    }
}

/// `‖∇v − R‖_{L²} / ‖dist(∇v, SO(3))‖_{L²}` with `R` the nearest rotation to
/// the mean gradient; `None` when both norms are at rounding level.
pub fn rigidity_ratio(def: &ProbeDeformation, grid: Grid3) -> Result<Option<f64>> {
    let w = grid.weights();
    let grads: Vec<Mat3> = (0..grid.len()).map(|n| def.gradient(grid.point(n))).collect();
    let vol = pairwise_sum(&w);
    let mut mean = Mat3::zeros();
    for (f, &wn) in grads.iter().zip(&w) {
        mean += f * (wn / vol);
    }
    let r = nearest_rotation(&mean)?;
    let num: Vec<f64> = grads.iter().zip(&w).map(|(f, &wn)| wn * (f - r).norm_squared()).collect();
    let den: Vec<f64> = grads.iter().zip(&w).map(|(f, &wn)| wn * dist_so3(f).powi(2)).collect();
    let (num, den) = (pairwise_sum(&num).sqrt(), pairwise_sum(&den).sqrt());
    if den <= 1e-12 && num <= 1e-12 {
        return Ok(None);
    }
    Ok(Some(num / den))
}

#[derive(Clone, Debug, PartialEq)]
pub struct RigidityReport {
    pub ratios: Vec<Option<f64>>,
    /// largest ratio over the sweep
    pub constant: Option<f64>,
}

/// Random near-rigid deformations on the configured slab.
pub fn rigidity_probe(cfg: &StudyConfig) -> Result<RigidityReport> {
    let grid = Grid3::new(cfg.grid3_plane()?, cfg.nz)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let ratios = (0..cfg.samples)
        .map(|_| rigidity_ratio(&ProbeDeformation::random(&mut rng, cfg.epsilon), grid))
        .collect::<Result<Vec<_>>>()?;
    let constant = ratios.iter().flatten().copied().fold(None, |m: Option<f64>, r| Some(m.map_or(r, |m| m.max(r))));
    Ok(RigidityReport { ratios, constant })
}

/// Nearest rotations of a few reference matrices and of random samples.
pub fn nearest_rotation_table(samples: usize, seed: u64) -> Result<String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut inputs = vec![Mat3::identity(), Mat3::from_diagonal(&Vec3::new(2.0, 1.0, 1.0))];
    inputs.extend((0..samples).map(|_| Mat3::identity() + Mat3::from_fn(|_, _| rng.gen_range(-0.5..0.5))));
    let mut s = String::from("sample,det_f,dist_so3,orthogonality_error,det_r\n");
    for (k, f) in inputs.iter().enumerate() {
        let r = nearest_rotation(f)?;
        let orth = (r.transpose() * r - Mat3::identity()).abs().max();
        let _ = writeln!(s, "{k},{:e},{:e},{:e},{:e}", f.determinant(), dist_so3(f), orth, r.determinant());
    }
    Ok(s)
}

/// Writes every diagnostic into `dir`.
pub fn run_diagnostics(cfg: &StudyConfig, dir: &Path) -> Result<RigidityReport> {
    cfg.validate()?;
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    let put = |name: &str, body: String| -> Result<()> {
        let p = dir.join(name);
        fs::write(&p, body).map_err(|e| io_err(&p, e))
    };
    put("nearest_rotation.csv", nearest_rotation_table(cfg.samples, cfg.seed)?)?;
    let probe = rigidity_probe(cfg)?;
    let mut s = String::from("sample,ratio\n");
    for (k, r) in probe.ratios.iter().enumerate() {
        let _ = writeln!(s, "{k},{}", r.map(|r| format!("{r:e}")).unwrap_or_else(|| "n/a".into()));
    }
    let _ = writeln!(
        s,
        "max,{}",
        probe.constant.map(|r| format!("{r:e}")).unwrap_or_else(|| "n/a".into())
    );
    put("rigidity.csv", s)?;
    let g = cfg.grid2()?;
    let d = target_displacement(cfg.displacement, g);
    let e = grad2(&d.u).map(|m| (m + m.transpose()) * 0.5);
    compatibility_residual(&e)?.write_csv(&dir.join("compatibility_residual.csv"), &["residual"])?;
    let theta = ThetaField::analytic(&cfg.midsurface(), g);
    gauss_residual(&d.v, &theta)?.write_csv(&dir.join("gauss_residual.csv"), &["residual"])?;
    Ok(probe)
}
