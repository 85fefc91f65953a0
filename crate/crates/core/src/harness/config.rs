//! `key = value` study configuration with dotted sections.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::fields::Grid2;
use crate::geometry::{Midsurface, Shape, ShellGeometry};
use crate::limit_energy::Regime;
use crate::material::{MaterialKind, MaterialModel};
use crate::minimize::{Method, SolveOptions};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StudyKind {
    Recovery,
    FullGamma,
    Q2Table,
    Diagnostics,
}

impl StudyKind {
    pub fn from_name(s: &str) -> Option<Self> {
        Some(match s {
            "recovery" => StudyKind::Recovery,
            "full-gamma" => StudyKind::FullGamma,
            "q2-table" => StudyKind::Q2Table,
            "diagnostics" => StudyKind::Diagnostics,
            _ => return None,
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            StudyKind::Recovery => "recovery",
            StudyKind::FullGamma => "full-gamma",
            StudyKind::Q2Table => "q2-table",
            StudyKind::Diagnostics => "diagnostics",
        }
    }
}

/// Planar displacement used as the recovery target.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TargetDisplacement {
    Zero,
    /// u = 0, v = x₁²/2
    Parabola,
    /// u = 0, v = x₁ x₂
    Twist,
    /// a smooth field with all components active
    Mixed,
}

impl TargetDisplacement {
    pub fn from_name(s: &str) -> Option<Self> {
        Some(match s {
            "zero" => TargetDisplacement::Zero,
            "parabola" => TargetDisplacement::Parabola,
            "twist" => TargetDisplacement::Twist,
            "mixed" => TargetDisplacement::Mixed,
            _ => return None,
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            TargetDisplacement::Zero => "zero",
            TargetDisplacement::Parabola => "parabola",
            TargetDisplacement::Twist => "twist",
            TargetDisplacement::Mixed => "mixed",
        }
    }
}

/// Normal force profile `f̄₃` (zero mean on the grid).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ForceName {
    Zero,
    /// `sin(πx₁)sin(πx₂)` minus its discrete mean
    Manufactured,
}

impl ForceName {
    pub fn from_name(s: &str) -> Option<Self> {
        Some(match s {
            "zero" => ForceName::Zero,
            "manufactured" => ForceName::Manufactured,
            _ => return None,
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            ForceName::Zero => "zero",
            ForceName::Manufactured => "manufactured",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StudyConfig {
    pub shape: Shape,
    pub amplitude: f64,
    pub x_range: (f64, f64),
    pub y_range: (f64, f64),
    pub material: MaterialModel,
    pub regime: Regime,
    /// regime of the functional the recovery energies are compared against
    pub target_regime: Option<Regime>,
    pub nx: usize,
    pub ny: usize,
    pub nz: usize,
    pub nx3: usize,
    pub ny3: usize,
    pub h_list: Vec<f64>,
    pub kind: StudyKind,
    pub displacement: TargetDisplacement,
    pub force: ForceName,
    pub samples: usize,
    pub epsilon: f64,
    pub output: PathBuf,
    pub seed: u64,
    pub solver: SolveOptions,
}

impl Default for StudyConfig {
    fn default() -> Self {
        StudyConfig {
            shape: Shape::Sinusoidal,
            amplitude: 1.0,
            x_range: (0.0, 1.0),
            y_range: (0.0, 1.0),
            material: MaterialModel::stvk(1.0, 1.0).expect("valid defaults"),
            regime: Regime::MvK,
            target_regime: None,
            nx: 64,
            ny: 64,
            nz: 5,
            nx3: 16,
            ny3: 16,
            h_list: vec![0.1, 0.05, 0.025, 0.0125, 0.00625],
            kind: StudyKind::Recovery,
            displacement: TargetDisplacement::Parabola,
            force: ForceName::Manufactured,
            samples: 100,
            epsilon: 1e-2,
            output: PathBuf::from("out"),
            seed: 0,
            solver: SolveOptions {
                max_iters: 50,
                grad_tol: 1e-10,
                ..SolveOptions::default()
            },
        }
    }
}

const KEYS: &[&str] = &[
    "geometry.shape",
    "geometry.amplitude",
    "geometry.x_range",
    "geometry.y_range",
    "material.kind",
    "material.lambda",
    "material.mu",
    "regime.tag",
    "regime.beta",
    "regime.target",
    "grid.nx",
    "grid.ny",
    "grid.nz",
    "grid.nx3",
    "grid.ny3",
    "study.kind",
    "study.h_list",
    "study.displacement",
    "study.force",
    "study.samples",
    "study.epsilon",
    "study.output",
    "study.seed",
    "solver.method",
    "solver.max_iters",
    "solver.grad_tol",
    "solver.initial_step",
    "solver.shrink",
    "solver.armijo",
];

fn bad(key: &str, value: &str) -> Error {
    Error::Config(format!("invalid value {value:?} for {key}"))
}

fn num(key: &str, value: &str) -> Result<f64> {
    let v = if let Some((a, b)) = value.split_once('/') {
        let a: f64 = a.trim().parse().map_err(|_| bad(key, value))?;
        let b: f64 = b.trim().parse().map_err(|_| bad(key, value))?;
        a / b
    } else {
        value.parse().map_err(|_| bad(key, value))?
    };
    if v.is_finite() {
        Ok(v)
    } else {
        Err(bad(key, value))
    }
}

fn count(key: &str, value: &str) -> Result<usize> {
    value.parse().map_err(|_| bad(key, value))
}

fn pair(key: &str, value: &str) -> Result<(f64, f64)> {
    let parts: Vec<&str> = value.split(',').map(str::trim).collect();
    match parts.as_slice() {
        [a, b] => Ok((num(key, a)?, num(key, b)?)),
        _ => Err(bad(key, value)),
    }
}

fn regime_of(tag: &str, beta: f64) -> Result<Regime> {
    match tag {
        "mvk" => Ok(Regime::MvK),
        "linearized" => Regime::linearized(beta),
        _ => Err(bad("regime.tag", tag)),
    }
}

impl StudyConfig {
    /// Parses and validates configuration text.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = StudyConfig::default();
        let mut seen: Vec<String> = Vec::new();
        let (mut kind, mut lambda, mut mu) = (cfg.material.kind, 1.0, 1.0);
        let (mut tag, mut beta) = ("mvk".to_string(), 6.0);
        let mut target: Option<String> = None;
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", lineno + 1)))?;
            let (key, value) = (key.trim(), value.trim());
            if !KEYS.contains(&key) {
                return Err(Error::Config(format!("line {}: unknown key {key:?}", lineno + 1)));
            }
            if seen.iter().any(|k| k == key) {
                return Err(Error::Config(format!("line {}: duplicate key {key:?}", lineno + 1)));
            }
            seen.push(key.to_string());
            match key {
                "geometry.shape" => cfg.shape = Shape::from_name(value).ok_or_else(|| bad(key, value))?,
                "geometry.amplitude" => cfg.amplitude = num(key, value)?,
                "geometry.x_range" => cfg.x_range = pair(key, value)?,
                "geometry.y_range" => cfg.y_range = pair(key, value)?,
                "material.kind" => kind = MaterialKind::from_name(value).ok_or_else(|| bad(key, value))?,
                "material.lambda" => lambda = num(key, value)?,
                "material.mu" => mu = num(key, value)?,
                "regime.tag" => tag = value.to_string(),
                "regime.beta" => beta = num(key, value)?,
                "regime.target" => target = Some(value.to_string()),
                "grid.nx" => cfg.nx = count(key, value)?,
                "grid.ny" => cfg.ny = count(key, value)?,
                "grid.nz" => cfg.nz = count(key, value)?,
                "grid.nx3" => cfg.nx3 = count(key, value)?,
                "grid.ny3" => cfg.ny3 = count(key, value)?,
                "study.kind" => cfg.kind = StudyKind::from_name(value).ok_or_else(|| bad(key, value))?,
                "study.h_list" => {
                    cfg.h_list = value
                        .split(',')
                        .map(|s| num(key, s.trim()))
                        .collect::<Result<Vec<f64>>>()?
                }
                "study.displacement" => {
                    cfg.displacement = TargetDisplacement::from_name(value).ok_or_else(|| bad(key, value))?
                }
                "study.force" => cfg.force = ForceName::from_name(value).ok_or_else(|| bad(key, value))?,
                "study.samples" => cfg.samples = count(key, value)?,
                "study.epsilon" => cfg.epsilon = num(key, value)?,
                "study.output" => cfg.output = PathBuf::from(value),
                "study.seed" => cfg.seed = value.parse().map_err(|_| bad(key, value))?,
                "solver.method" => cfg.solver.method = Method::from_name(value).ok_or_else(|| bad(key, value))?,
                "solver.max_iters" => cfg.solver.max_iters = count(key, value)?,
                "solver.grad_tol" => cfg.solver.grad_tol = num(key, value)?,
                "solver.initial_step" => cfg.solver.initial_step = num(key, value)?,
                "solver.shrink" => cfg.solver.shrink = num(key, value)?,
                "solver.armijo" => cfg.solver.armijo = num(key, value)?,
                _ => unreachable!("key list and match arms agree"),
            }
        }
        cfg.material = MaterialModel::new(kind, lambda, mu)?;
        cfg.regime = regime_of(&tag, beta)?;
        cfg.target_regime = match target.as_deref() {
            None | Some("same") => None,
            Some(t) => Some(regime_of(t, beta)?),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn midsurface(&self) -> Midsurface {
        Midsurface::new(self.shape.clone(), self.amplitude, self.x_range, self.y_range)
    }

    pub fn grid2(&self) -> Result<Grid2> {
        Grid2::new(self.nx, self.ny, self.x_range, self.y_range)
    }

    /// In-plane grid of the three-dimensional slab.
    pub fn grid3_plane(&self) -> Result<Grid2> {
        Grid2::new(self.nx3, self.ny3, self.x_range, self.y_range)
    }

    pub fn geometry(&self, h: f64) -> Result<ShellGeometry> {
        ShellGeometry::new(self.midsurface(), h, self.regime.fh(h))
    }

    pub fn validate(&self) -> Result<()> {
        let cfg_err = |m: String| Err(Error::Config(m));
        if self.h_list.is_empty() {
            return cfg_err("study.h_list is empty".into());
        }
        if self.h_list.iter().any(|&h| !(h > 0.0)) {
            return cfg_err("thicknesses must be positive".into());
        }
        if self.h_list.windows(2).any(|w| w[1] >= w[0]) {
            return cfg_err("study.h_list must be strictly decreasing".into());
        }
        if self.nx < 5 || self.ny < 5 || self.nx3 < 5 || self.ny3 < 5 {
            return cfg_err("grids need at least 5 nodes per axis".into());
        }
        if self.nz < 3 || self.nz % 2 == 0 {
            return cfg_err("grid.nz must be odd and at least 3".into());
        }
        if !(self.amplitude.is_finite()) {
            return cfg_err("geometry.amplitude must be finite".into());
        }
        if !(self.epsilon > 0.0) || self.samples == 0 {
            return cfg_err("diagnostics need epsilon > 0 and samples > 0".into());
        }
        self.solver.validate()?;
        self.grid2()?;
        self.grid3_plane()?;
        for &h in &self.h_list {
            self.geometry(h).map_err(|e| Error::Config(format!("thickness {h}: {e}")))?;
        }
        Ok(())
    }

    /// Canonical text that parses back to the same configuration.
    pub fn echo(&self) -> String {
        let mut s = String::new();
        let reg = |r: Regime| r.name().to_string();
        let _ = writeln!(s, "geometry.shape = {}", self.shape.name());
        let _ = writeln!(s, "geometry.amplitude = {:?}", self.amplitude);
        let _ = writeln!(s, "geometry.x_range = {:?}, {:?}", self.x_range.0, self.x_range.1);
        let _ = writeln!(s, "geometry.y_range = {:?}, {:?}", self.y_range.0, self.y_range.1);
        let _ = writeln!(s, "material.kind = {}", self.material.kind.name());
        let _ = writeln!(s, "material.lambda = {:?}", self.material.lambda);
        let _ = writeln!(s, "material.mu = {:?}", self.material.mu);
        let _ = writeln!(s, "regime.tag = {}", reg(self.regime));
        let beta = match (self.regime, self.target_regime) {
            (Regime::Linearized { beta }, _) | (_, Some(Regime::Linearized { beta })) => beta,
            _ => 6.0,
        };
        let _ = writeln!(s, "regime.beta = {beta:?}");
        let _ = writeln!(s, "regime.target = {}", self.target_regime.map_or("same".to_string(), reg));
        let _ = writeln!(s, "grid.nx = {}", self.nx);
        let _ = writeln!(s, "grid.ny = {}", self.ny);
        let _ = writeln!(s, "grid.nz = {}", self.nz);
        let _ = writeln!(s, "grid.nx3 = {}", self.nx3);
        let _ = writeln!(s, "grid.ny3 = {}", self.ny3);
        let _ = writeln!(s, "study.kind = {}", self.kind.name());
        let hs: Vec<String> = self.h_list.iter().map(|h| format!("{h:?}")).collect();
        let _ = writeln!(s, "study.h_list = {}", hs.join(", "));
        let _ = writeln!(s, "study.displacement = {}", self.displacement.name());
        let _ = writeln!(s, "study.force = {}", self.force.name());
        let _ = writeln!(s, "study.samples = {}", self.samples);
        let _ = writeln!(s, "study.epsilon = {:?}", self.epsilon);
        let _ = writeln!(s, "study.output = {}", self.output.display());
        let _ = writeln!(s, "study.seed = {}", self.seed);
        let method = match self.solver.method {
            Method::GradientDescent => "gd",
            Method::Lbfgs => "lbfgs",
            Method::Newton => "newton",
        };
        let _ = writeln!(s, "solver.method = {method}");
        let _ = writeln!(s, "solver.max_iters = {}", self.solver.max_iters);
        let _ = writeln!(s, "solver.grad_tol = {:?}", self.solver.grad_tol);
        let _ = writeln!(s, "solver.initial_step = {:?}", self.solver.initial_step);
        let _ = writeln!(s, "solver.shrink = {:?}", self.solver.shrink);
        let _ = writeln!(s, "solver.armijo = {:?}", self.solver.armijo);
        s
    }
}
