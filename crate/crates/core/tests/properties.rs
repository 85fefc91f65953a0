use proptest::prelude::*;

use shallow_shell::harness::{StudyConfig, StudyReport};
use shallow_shell::limit_energy::{gauge_transform, i_limit, ThetaField};
use shallow_shell::material::{dist_so3, nearest_rotation};
use shallow_shell::*;

fn mat3() -> impl Strategy<Value = Mat3> {
    prop::array::uniform9(-1.0..1.0f64).prop_map(|a| Mat3::from_row_slice(&a))
}

fn mat2() -> impl Strategy<Value = Mat2> {
    prop::array::uniform4(-1.0..1.0f64).prop_map(|a| Mat2::from_row_slice(&a))
}

fn material() -> impl Strategy<Value = MaterialModel> {
    (0.5..2.0f64, 0.5..2.0f64).prop_map(|(l, m)| MaterialModel::stvk(l, m).unwrap())
}

fn rotation(a: f64, b: f64, c: f64) -> Mat3 {
    *nalgebra::Rotation3::from_euler_angles(a, b, c).matrix()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn q_forms_see_only_symmetric_part(m in material(), f in mat3(), g in mat2()) {
        let fs = (f + f.transpose()) * 0.5;
        let gs = (g + g.transpose()) * 0.5;
        prop_assert!((m.q3(&f) - m.q3(&fs)).abs() <= 1e-12 * (1.0 + m.q3(&f).abs()));
        prop_assert!((m.q2(&g) - m.q2(&gs)).abs() <= 1e-12 * (1.0 + m.q2(&g).abs()));
        prop_assert!(m.q3(&(f - f.transpose())).abs() <= 1e-12);
    }

    #[test]
    fn q2_is_the_constrained_minimum(m in material(), g in mat2()) {
        let (min, _) = m.q2_by_minimization(&g).unwrap();
        prop_assert!((m.q2(&g) - min).abs() <= 1e-10);
    }

    #[test]
    fn nearest_rotation_is_proper(f in mat3()) {
        prop_assume!(f.determinant().abs() > 1e-3);
        let r = nearest_rotation(&f).unwrap();
        prop_assert!((r.transpose() * r - Mat3::identity()).abs().max() < 1e-10);
        prop_assert!((r.determinant() - 1.0).abs() < 1e-10);
        prop_assert!((f - r).norm() <= dist_so3(&f) + 1e-10);
    }

    #[test]
    fn dist_so3_is_frame_indifferent(f in mat3(), a in -3.0..3.0f64, b in -1.5..1.5f64, c in -3.0..3.0f64) {
        let q = rotation(a, b, c);
        let d = dist_so3(&f);
        prop_assert!((dist_so3(&(q * f)) - d).abs() < 1e-10);
        prop_assert!((dist_so3(&(f * q)) - d).abs() < 1e-10);
    }

    #[test]
    fn stvk_energy_is_frame_indifferent(m in material(), f in mat3(), a in -3.0..3.0f64, b in -1.5..1.5f64, c in -3.0..3.0f64) {
        let q = rotation(a, b, c);
        let w = m.w(&(Mat3::identity() + f * 0.3));
        prop_assert!((m.w(&(q * (Mat3::identity() + f * 0.3))) - w).abs() <= 1e-12 * (1.0 + w));
    }

    #[test]
    fn mvk_energy_is_gauge_invariant(
        c in prop::array::uniform4(-1.0..1.0f64),
        a in prop::array::uniform2(-1.0..1.0f64),
        b in -1.0..1.0f64,
    ) {
        let g = Grid2::unit(17).unwrap();
        let mid = Midsurface::new(geometry::Shape::Sinusoidal, 1.0, (0.0, 1.0), (0.0, 1.0));
        let theta = ThetaField::discrete(&mid, g);
        let d = Displacement2D::from_fn(
            g,
            |p| Vec2::new(c[0] * p.x * p.y, c[1] * p.y * p.y) * 0.1,
            |p| c[2] * p.x * p.x + c[3] * (p.x * p.y).sin(),
        );
        let m = MaterialModel::stvk(1.0, 1.0).unwrap();
        let e0 = i_limit(&d, &theta, &m, Regime::MvK).unwrap();
        let moved = gauge_transform(&d, &theta, Vec2::new(a[0], a[1]), b).unwrap();
        let e1 = i_limit(&moved, &theta, &m, Regime::MvK).unwrap();
        prop_assert!((e1 - e0).abs() <= 1e-10 * e0.abs().max(1.0));
    }

    #[test]
    fn config_echo_round_trips(nx in 3usize..200, nz in (1usize..6).prop_map(|k| 2 * k + 1), seed in any::<u64>(), eps in 1e-6..1.0f64) {
        let text = format!("grid.nx = {nx}\ngrid.ny = {nx}\ngrid.nz = {nz}\nstudy.seed = {seed}\nstudy.epsilon = {eps:e}\n");
        let cfg = StudyConfig::parse(&text).unwrap();
        prop_assert_eq!(StudyConfig::parse(&cfg.echo()).unwrap(), cfg);
    }

    #[test]
    fn report_csv_round_trips(rows in prop::collection::vec((1e-3..1.0f64, -1.0..1.0f64, -1.0..1.0f64), 1..6)) {
        let mut report = StudyReport::new(String::new());
        for (h, r, l) in rows {
            report.push(h, h.powi(4), h, r, l);
        }
        let back = StudyReport::from_csv(&report.to_csv()).unwrap();
        prop_assert_eq!(back.rows, report.rows);
    }
}
