//! Acceptance suite. Each test prints one `PASS`/`FAIL` line to stderr
//! (bypassing output capture) and then asserts.

use std::f64::consts::PI;
use std::io::Write;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use shallow_shell::fields::{grad2, Grid3};
use shallow_shell::geometry::Shape;
use shallow_shell::harness::{run_full_gamma_study, run_recovery_study, StudyConfig};
use shallow_shell::limit_energy::{
    compatibility_residual, gauge_transform, gauss_residual, i_limit, LimitFunctional, ThetaField,
};
use shallow_shell::material::{MaterialKind, MaterialModel};
use shallow_shell::minimize::Objective;
use shallow_shell::recovery::{build_recovery, displacement_roundtrip};
use shallow_shell::shell3d::{force_action_m, identity_deformation, ForceProfile, ShellFunctional};
use shallow_shell::{Displacement2D, Field2, Grid2, Mat2, Mat3, Midsurface, Regime, ShellGeometry, Vec2, Vec3};

fn verdict(n: u32, name: &str, pass: bool, detail: &str) {
    let line = format!(
        "criterion {n:>2} {:<4} {name}: {detail}\n",
        if pass { "PASS" } else { "FAIL" }
    );
    let _ = std::io::stderr().write_all(line.as_bytes());
    assert!(pass, "criterion {n} ({name}) failed: {detail}");
}

fn stvk(lambda: f64, mu: f64) -> MaterialModel {
    MaterialModel::stvk(lambda, mu).unwrap()
}

fn materials() -> [MaterialModel; 2] {
    [stvk(1.0, 1.0), MaterialModel::new(MaterialKind::SquaredDistance, 1.0, 1.0).unwrap()]
}

fn random_mat2(rng: &mut ChaCha8Rng) -> Mat2 {
    Mat2::from_fn(|_, _| rng.gen_range(-1.0..1.0))
}

fn random_mat3(rng: &mut ChaCha8Rng) -> Mat3 {
    Mat3::from_fn(|_, _| rng.gen_range(-1.0..1.0))
}

fn unit_mid(shape: Shape) -> Midsurface {
    Midsurface::new(shape, 1.0, (0.0, 1.0), (0.0, 1.0))
}

fn random_displacement(g: Grid2, rng: &mut ChaCha8Rng, amp: f64) -> Displacement2D {
    let c: Vec<f64> = (0..8).map(|_| rng.gen_range(-1.0..1.0)).collect();
    Displacement2D::from_fn(
        g,
        |p| {
            amp * Vec2::new(
                c[0] * (PI * p.x).sin() * p.y + c[1] * p.y * p.y,
                c[2] * (2.0 * p.y + c[3]).cos() + c[4] * p.x * p.y,
            )
        },
        |p| amp * (c[5] * (PI * p.x).sin() * (p.y + c[6]).cos() + c[7] * p.x * p.x),
    )
}

fn sci(xs: &[f64]) -> String {
    let parts: Vec<String> = xs.iter().map(|x| format!("{x:.3e}")).collect();
    format!("[{}]", parts.join(", "))
}

fn order(e0: f64, e1: f64, ratio: f64) -> f64 {
    (e0 / e1).ln() / ratio.ln()
}

fn recovery_config(extra: &str) -> StudyConfig {
    StudyConfig::parse(&format!(
        "geometry.shape = sinusoidal\n\
         geometry.amplitude = 1\n\
         material.kind = stvk\n\
         material.lambda = 1\n\
         material.mu = 1\n\
         grid.nx = 128\n\
         grid.ny = 128\n\
         grid.nz = 5\n\
         study.kind = recovery\n\
         study.displacement = parabola\n\
         study.h_list = 1/10, 1/20, 1/40, 1/80, 1/160\n\
         study.seed = 7\n\
         {extra}"
    ))
    .unwrap()
}

fn full_gamma_config() -> StudyConfig {
    let mut cfg = StudyConfig::parse(
        "geometry.shape = flat\n\
         material.kind = stvk\n\
         material.lambda = 1\n\
         material.mu = 1\n\
         regime.tag = mvk\n\
         grid.nx = 64\n\
         grid.ny = 64\n\
         grid.nx3 = 16\n\
         grid.ny3 = 16\n\
         grid.nz = 9\n\
         study.kind = full-gamma\n\
         study.force = manufactured\n\
         study.h_list = 1/8, 1/16, 1/32\n\
         study.seed = 7\n\
         solver.method = newton\n\
         solver.max_iters = 20\n\
         solver.grad_tol = 1e-12\n",
    )
    .unwrap();
    cfg.output = std::env::temp_dir().join("shallow-shell-acceptance");
    cfg
}

#[test]
fn c01_q2_equivalence() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let m = stvk(rng.gen_range(0.5..2.0), rng.gen_range(0.5..2.0));
        let g = random_mat2(&mut rng);
        worst = worst.max((m.q2(&g) - m.q2_by_minimization(&g).unwrap().0).abs());
    }
    let m = stvk(1.0, 1.0);
    let (val, a) = m.q2_by_minimization(&Mat2::identity()).unwrap();
    let spot = (m.q2(&Mat2::identity()) - 20.0 / 3.0).abs() <= 1e-12
        && (val - 20.0 / 3.0).abs() <= 1e-12
        && (a - Vec3::new(0.0, 0.0, -1.0 / 3.0)).norm() <= 1e-12;
    let elapsed = start.elapsed();
    verdict(
        1,
        "Q2 closed form equals stretch minimization",
        worst <= 1e-10 && spot && elapsed < Duration::from_secs(1),
        &format!("max diff {worst:.2e}, spot value ok {spot}, {elapsed:.2?}"),
    );
}

#[test]
fn c02_quadratic_form_structure() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let m = stvk(rng.gen_range(0.5..2.0), rng.gen_range(0.5..2.0));
        let a3 = random_mat3(&mut rng);
        let f3 = random_mat3(&mut rng);
        let skew3 = (a3 - a3.transpose()) * 0.5;
        let sym3 = (f3 + f3.transpose()) * 0.5;
        let a2 = random_mat2(&mut rng);
        let f2 = random_mat2(&mut rng);
        let skew2 = (a2 - a2.transpose()) * 0.5;
        let sym2 = (f2 + f2.transpose()) * 0.5;
        let scale3 = 1.0 + m.q3(&f3).abs();
        let scale2 = 1.0 + m.q2(&f2).abs();
        for e in [
            m.q3(&skew3) / scale3,
            (m.q3(&f3) - m.q3(&sym3)).abs() / scale3,
            (m.q3(&(sym3 + skew3)) - m.q3(&sym3)).abs() / scale3,
            m.q2(&skew2) / scale2,
            (m.q2(&f2) - m.q2(&sym2)).abs() / scale2,
            (m.q2(&(sym2 + skew2)) - m.q2(&sym2)).abs() / scale2,
        ] {
            worst = worst.max(e.abs());
        }
    }
    verdict(
        2,
        "Q3 and Q2 see only the symmetric part",
        worst <= 1e-12,
        &format!("max deviation {worst:.2e}"),
    );
}

#[test]
fn c03_taylor_consistency() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let ts = [1e-1, 1e-2, 1e-3];
    let mut min_order = f64::INFINITY;
    let mut worst_sample = f64::INFINITY;
    for mat in materials() {
        // sup over the samples of the remainder at each t
        let mut sup = [0.0f64; 3];
        for _ in 0..100 {
            let f = random_mat3(&mut rng);
            let q = mat.q3(&f);
            let errs: Vec<f64> = ts
                .iter()
                .map(|&t| (mat.w(&(Mat3::identity() + f * t)) - 0.5 * t * t * q).abs())
                .collect();
            for k in 0..3 {
                sup[k] = sup[k].max(errs[k]);
            }
            for k in 0..2 {
                worst_sample = worst_sample.min(order(errs[k], errs[k + 1], ts[k] / ts[k + 1]));
            }
        }
        for k in 0..2 {
            min_order = min_order.min(order(sup[k], sup[k + 1], ts[k] / ts[k + 1]));
        }
    }
    verdict(
        3,
        "W(I+tF) - t^2/2 Q3(F) is third order",
        min_order >= 2.9,
        &format!("observed order {min_order:.3} (single-sample minimum {worst_sample:.3})"),
    );
}

#[test]
fn c04_geometry_expansions() {
    let start = Instant::now();
    let fs = [0.05, 0.025, 0.0125, 0.00625];
    let mut min_order = f64::INFINITY;
    let mut det_ok = true;
    let mut detail = String::new();
    for shape in [Shape::Saddle, Shape::Sinusoidal] {
        let mid = unit_mid(shape.clone());
        let g = Grid2::unit(21).unwrap();
        // K from the supremum of the first and second derivatives of θ
        let k = (0..g.len())
            .map(|n| {
                let p = g.point(n);
                1.0 + mid.grad(p).norm_squared() + mid.hessian(p).norm()
            })
            .fold(0.0, f64::max);
        let mut r1 = Vec::new();
        let mut r2 = Vec::new();
        let mut worst_det = 0.0f64;
        for &f in &fs {
            let geom = ShellGeometry::new(mid.clone(), f, f).unwrap();
            let (mut a, mut b, mut d) = (0.0f64, 0.0f64, 0.0f64);
            for n in 0..g.len() {
                let p = g.point(n);
                let c = mid.matrix_c(p);
                for t in [-0.5 * f, -0.25 * f, 0.0, 0.25 * f, 0.5 * f] {
                    let m = geom.grad_theta_map(p, t).unwrap();
                    let mi = geom.inverse_grad_theta_map(p, t).unwrap();
                    a = a.max((m - (Mat3::identity() - c * f)).abs().max());
                    b = b.max((mi - (Mat3::identity() + c * f)).abs().max());
                    d = d.max((geom.det_grad_theta_map(p, t) - 1.0).abs());
                }
            }
            r1.push(a);
            r2.push(b);
            worst_det = worst_det.max(d / (f * f));
        }
        for k in 0..fs.len() - 1 {
            min_order = min_order
                .min(order(r1[k], r1[k + 1], 2.0))
                .min(order(r2[k], r2[k + 1], 2.0));
        }
        det_ok &= worst_det <= k;
        detail.push_str(&format!("{}: |det-1|/f^2 <= {worst_det:.3} (K = {k:.2}); ", shape.name()));
    }
    let elapsed = start.elapsed();
    verdict(
        4,
        "first-order expansions of the shell map",
        min_order >= 1.9 && det_ok && elapsed < Duration::from_secs(10),
        &format!("{detail}minimum order {min_order:.3}, {elapsed:.2?}"),
    );
}

fn strictly_decreasing(xs: &[f64]) -> bool {
    xs.windows(2).all(|w| w[1] < w[0])
}

#[test]
fn c05_recovery_mvk() {
    let start = Instant::now();
    let report = run_recovery_study(&recovery_config(""), false).unwrap();
    let elapsed = start.elapsed();
    let gaps = report.gaps();
    let orders = report.orders();
    let min_order = orders.iter().copied().fold(f64::INFINITY, f64::min);
    verdict(
        5,
        "MvK recovery energies converge",
        strictly_decreasing(&gaps)
            && orders.len() == gaps.len() - 1
            && min_order >= 0.8
            && elapsed < Duration::from_secs(120),
        &format!("gaps {}, minimum order {min_order:.3}, {elapsed:.2?}", sci(&gaps)),
    );
}

#[test]
fn c06_recovery_linearized() {
    let matched = run_recovery_study(&recovery_config("regime.tag = linearized\nregime.beta = 6\n"), false).unwrap();
    let crossed = run_recovery_study(
        &recovery_config("regime.tag = linearized\nregime.beta = 6\nregime.target = mvk\n"),
        false,
    )
    .unwrap();
    let gaps = matched.gaps();
    let orders = matched.orders();
    let min_order = orders.iter().copied().fold(f64::INFINITY, f64::min);
    let last = *gaps.last().unwrap();
    let cross_last = *crossed.gaps().last().unwrap();
    verdict(
        6,
        "linearized recovery converges, crossed target does not",
        strictly_decreasing(&gaps) && min_order >= 0.8 && cross_last > 10.0 * last,
        &format!("gaps {}, minimum order {min_order:.3}, crossed final gap {cross_last:.3e}", sci(&gaps)),
    );
}

#[test]
fn c07_hand_quadrature_value() {
    let g = Grid2::unit(128).unwrap();
    let d = Displacement2D::from_fn(g, |_| Vec2::zeros(), |p| 0.5 * p.x * p.x);
    let i = i_limit(&d, &ThetaField::flat(g), &stvk(1.0, 1.0), Regime::MvK).unwrap();
    let exact = 8.0 / 45.0;
    let rel = (i - exact).abs() / exact;
    verdict(
        7,
        "limit energy of v = x1^2/2 on the flat square",
        rel <= 0.01,
        &format!("{i:.8} vs {exact:.8}, relative error {rel:.2e}"),
    );
}

#[test]
fn c08_gauge_invariance() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let g = Grid2::unit(16).unwrap();
    let theta = ThetaField::discrete(&unit_mid(Shape::Sinusoidal), g);
    let mat = stvk(1.0, 1.0);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let amp = rng.gen_range(0.1..1.0);
        let d = random_displacement(g, &mut rng, amp);
        let a = Vec2::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        let b = rng.gen_range(-1.0..1.0);
        let i0 = i_limit(&d, &theta, &mat, Regime::MvK).unwrap();
        let i1 = i_limit(&gauge_transform(&d, &theta, a, b).unwrap(), &theta, &mat, Regime::MvK).unwrap();
        worst = worst.max((i1 - i0).abs() / i0.abs());
    }
    verdict(
        8,
        "limit energy is invariant along gauge orbits",
        worst <= 1e-10,
        &format!("max relative change {worst:.2e}"),
    );
}

fn fd_mismatch<O: Objective>(obj: &O, x: &[f64]) -> f64 {
    let g = obj.gradient(x);
    let mut xp = x.to_vec();
    let mut worst = 0.0f64;
    for k in 0..x.len() {
        let eps = 1e-6 * (1.0 + x[k].abs());
        xp[k] = x[k] + eps;
        let fp = obj.value(&xp);
        xp[k] = x[k] - eps;
        let fm = obj.value(&xp);
        xp[k] = x[k];
        worst = worst.max((g[k] - (fp - fm) / (2.0 * eps)).abs());
    }
    let scale = g.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    worst / scale
}

#[test]
fn c09_gradient_check() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let g2 = Grid2::unit(16).unwrap();
    let theta = ThetaField::analytic(&unit_mid(Shape::Sinusoidal), g2);
    let mut worst2 = 0.0f64;
    for regime in [Regime::MvK, Regime::linearized(6.0).unwrap()] {
        let f = LimitFunctional::new(&theta, &stvk(1.0, 1.0), regime, None).unwrap();
        let d = random_displacement(g2, &mut rng, 0.3);
        worst2 = worst2.max(fd_mismatch(&f, &d.pack()));
    }

    let g3 = Grid3::new(Grid2::unit(8).unwrap(), 5).unwrap();
    let geom = ShellGeometry::new(unit_mid(Shape::Sinusoidal), 0.1, 0.1).unwrap();
    let f3 = Field2::from_fn(g3.plane, |p| (PI * p.x).cos() * (PI * p.y).cos());
    let fp = ForceProfile::for_regime(f3, Regime::MvK).unwrap();
    let mut worst3 = 0.0f64;
    for mat in materials() {
        let func = ShellFunctional::new(g3, &geom, &mat, Some((&fp, Regime::MvK)), 1.0).unwrap();
        let y0 = identity_deformation(g3, &geom);
        let x: Vec<f64> = ShellFunctional::pack(&y0)
            .into_iter()
            .map(|v| v + 0.02 * rng.gen_range(-1.0..1.0))
            .collect();
        worst3 = worst3.max(fd_mismatch(&func, &x));
    }
    verdict(
        9,
        "analytic gradients match central differences",
        worst2 <= 1e-6 && worst3 <= 1e-6,
        &format!("limit functional {worst2:.2e}, shell energy {worst3:.2e}"),
    );
}

#[test]
fn c10_full_gamma_bracket() {
    let start = Instant::now();
    let study = run_full_gamma_study(&full_gamma_config(), false).unwrap();
    let elapsed = start.elapsed();
    let min = study.min_j0;
    let lower = min - 0.05 * min.abs() - study.q;
    let mut inside = true;
    let mut detail = format!("min J0 {min:.5e}, q {:.3e}, lower {lower:.5e}; ", study.q);
    for r in &study.rows {
        let ok = r.minimized_energy >= lower && r.minimized_energy <= r.recovery_energy;
        inside &= ok;
        detail.push_str(&format!(
            "h {:.4}: {:.5e} in [.., {:.5e}] {}; ",
            r.h,
            r.minimized_energy,
            r.recovery_energy,
            if ok { "ok" } else { "outside" }
        ));
    }
    let gaps = study.report.gaps();
    let final_rel = gaps.last().unwrap() / min.abs();
    detail.push_str(&format!("final relative gap {final_rel:.4}, {elapsed:.1?}"));
    verdict(
        10,
        "3D minima bracketed by the limit minimum and recovery energies",
        inside && strictly_decreasing(&gaps) && final_rel <= 0.10 && elapsed < Duration::from_secs(600),
        &detail,
    );
}

#[test]
fn c11_displacement_roundtrip() {
    let g = Grid2::unit(64).unwrap();
    let dx = 1.0 / 63.0;
    let mat = stvk(1.0, 1.0);
    let mid = unit_mid(Shape::Sinusoidal);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let d = random_displacement(g, &mut rng, 0.5);
    let mut ok = true;
    let mut detail = String::new();
    for regime in [Regime::MvK, Regime::linearized(6.0).unwrap()] {
        for h in [0.1, 0.05, 0.025] {
            let geom = ShellGeometry::new(mid.clone(), h, regime.fh(h)).unwrap();
            let y = build_recovery(&d, &geom, &mat, regime, 5).unwrap();
            let (eu, ev) = displacement_roundtrip(&y, &geom, regime).unwrap().l2_distance(&d).unwrap();
            let tol = h.max(2.0 * dx * dx);
            ok &= eu <= tol && ev <= tol;
            detail.push_str(&format!("{} h {h}: ({eu:.2e}, {ev:.2e}) tol {tol:.2e}; ", regime.name()));
        }
    }
    let geom = ShellGeometry::new(mid, 0.1, 0.1).unwrap();
    let id = identity_deformation(Grid3::new(g, 5).unwrap(), &geom);
    let z = displacement_roundtrip(&id, &geom, Regime::MvK).unwrap();
    let zmax = z
        .u
        .values
        .iter()
        .map(|u| u.abs().max())
        .chain(z.v.values.iter().map(|v| v.abs()))
        .fold(0.0, f64::max);
    ok &= zmax <= 1e-13;
    detail.push_str(&format!("identity -> max {zmax:.2e}"));
    verdict(11, "extracted displacements match the recovery input", ok, &detail);
}

#[test]
fn c12_compatibility_and_gauss() {
    let mut l2 = Vec::new();
    let ns = [17usize, 33, 65];
    for &n in &ns {
        let g = Grid2::unit(n).unwrap();
        let u = Field2::from_fn(g, |p| {
            Vec2::new((PI * p.x).sin() * (PI * p.y).cos(), p.x * p.x * p.y + (2.0 * p.y).sin())
        });
        let e = grad2(&u).map(|m| (m + m.transpose()) * 0.5);
        let r = compatibility_residual(&e).unwrap();
        let w = g.weights();
        let s: f64 = r.values.iter().zip(&w).map(|(v, w)| w * v * v).sum();
        l2.push(s.sqrt());
    }
    let orders: Vec<f64> = (0..ns.len() - 1).map(|k| order(l2[k], l2[k + 1], 2.0)).collect();
    let compat_ok = orders.iter().all(|&o| o >= 1.9);

    let g = Grid2::unit(33).unwrap();
    let dx = 1.0 / 32.0;
    let v = Field2::from_fn(g, |p| p.x * p.y);
    let res = gauss_residual(&v, &ThetaField::flat(g)).unwrap();
    let gauss_err = res.values.iter().map(|r| (r + 1.0).abs()).fold(0.0, f64::max);
    verdict(
        12,
        "compatibility residual is second order and the Gauss residual of x1 x2 is -1",
        compat_ok && gauss_err <= dx * dx,
        &format!("residual L2 {}, orders {orders:.3?}, Gauss error {gauss_err:.2e}", sci(&l2)),
    );
}

#[test]
fn c13_force_action() {
    let n = 101;
    let g = Grid2::new(n, n, (-1.0, 1.0), (-1.0, 1.0)).unwrap();
    let dx = 2.0 / (n as f64 - 1.0);
    let f = Field2::from_fn(g, |p| p.x);
    let (m, q) = force_action_m(&f);
    let w = g.weights();
    let search = (0..3600)
        .map(|k| {
            let phi = 2.0 * PI * k as f64 / 3600.0;
            let dir = Vec2::new(phi.cos(), phi.sin());
            (0..g.len()).map(|i| w[i] * f.values[i] * dir.dot(&g.point(i))).sum::<f64>()
        })
        .fold(f64::NEG_INFINITY, f64::max);
    let quad = (m - 4.0 / 3.0).abs();
    let grid = (m - search).abs();
    verdict(
        13,
        "maximal force action of f3 = x1",
        quad <= dx * dx && grid <= 1e-6,
        &format!("m {m:.10}, direction ({:.3}, {:.3}), |m - 4/3| {quad:.2e}, |m - search| {grid:.2e}", q.x, q.y),
    );
}

#[test]
fn c14_determinism_across_threads() {
    let rec = recovery_config("");
    let full = full_gamma_config();
    let mut outputs = Vec::new();
    for threads in [1, 2, 8] {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        let (a, b) = pool.install(|| {
            let a = run_recovery_study(&rec, false).unwrap().to_csv();
            let s = run_full_gamma_study(&full, false).unwrap();
            (a, format!("{}{}", s.report.to_csv(), s.details_csv()))
        });
        outputs.push((threads, a, b));
    }
    let same = outputs.windows(2).all(|w| w[0].1 == w[1].1 && w[0].2 == w[1].2);
    verdict(
        14,
        "study reports are bit-identical across 1, 2 and 8 threads",
        same,
        &format!(
            "{} recovery bytes, {} full-gamma bytes per run",
            outputs[0].1.len(),
            outputs[0].2.len()
        ),
    );
}
