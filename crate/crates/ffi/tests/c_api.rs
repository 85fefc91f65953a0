use std::ffi::{CStr, CString};
use std::ptr;

use shallow_shell_ffi::*;

fn take_string(p: *mut std::ffi::c_char) -> String {
    assert!(!p.is_null());
    let s = unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned();
    unsafe { ss_string_free(p) };
    s
}

#[test]
fn recovery_study_through_handles() {
    let text = CString::new(
        "geometry.shape = flat\ngrid.nx = 16\ngrid.ny = 16\ngrid.nz = 3\nstudy.h_list = 1/10, 1/20\n",
    )
    .unwrap();
    let mut cfg = ptr::null_mut();
    assert_eq!(unsafe { ss_config_parse(text.as_ptr(), &mut cfg) }, SsStatus::Ok);

    let mut echo = ptr::null_mut();
    assert_eq!(unsafe { ss_config_echo(cfg, &mut echo) }, SsStatus::Ok);
    assert!(take_string(echo).contains("geometry.shape = flat"));

    let mut report = ptr::null_mut();
    assert_eq!(unsafe { ss_run_recovery_study(cfg, &mut report) }, SsStatus::Ok);
    let mut n = 0usize;
    assert_eq!(unsafe { ss_report_len(report, &mut n) }, SsStatus::Ok);
    assert_eq!(n, 2);
    let mut rows = [SsReportRow::default(); 2];
    for (k, row) in rows.iter_mut().enumerate() {
        assert_eq!(unsafe { ss_report_row(report, k, row) }, SsStatus::Ok);
    }
    assert!(rows[0].order.is_nan());
    assert!(rows[1].gap < rows[0].gap && rows[1].order > 0.5);
    let mut row = SsReportRow::default();
    assert_eq!(unsafe { ss_report_row(report, 2, &mut row) }, SsStatus::OutOfRange);

    let mut csv = ptr::null_mut();
    assert_eq!(unsafe { ss_report_csv(report, &mut csv) }, SsStatus::Ok);
    assert!(take_string(csv).starts_with("h,E_h,f_h,rescaled_energy,limit_energy,gap,order\n"));

    unsafe {
        ss_report_free(report);
        ss_config_free(cfg);
    }
}

#[test]
fn material_and_rotation() {
    let kind = CString::new("stvk").unwrap();
    let mut mat = ptr::null_mut();
    assert_eq!(unsafe { ss_material_new(kind.as_ptr(), 1.0, 1.0, &mut mat) }, SsStatus::Ok);
    let g = [1.0, 0.0, 0.0, 1.0];
    let (mut closed, mut minimized) = (0.0, 0.0);
    assert_eq!(
        unsafe { ss_material_q2(mat, g.as_ptr(), &mut closed, &mut minimized) },
        SsStatus::Ok
    );
    assert!((closed - 20.0 / 3.0).abs() < 1e-12 && (minimized - 20.0 / 3.0).abs() < 1e-12);
    let id = [1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0];
    let mut w = 1.0;
    assert_eq!(unsafe { ss_material_energy(mat, id.as_ptr(), &mut w) }, SsStatus::Ok);
    assert_eq!(w, 0.0);
    unsafe { ss_material_free(mat) };

    let bad = CString::new("rubber").unwrap();
    let mut mat = ptr::null_mut();
    assert_eq!(unsafe { ss_material_new(bad.as_ptr(), 1.0, 1.0, &mut mat) }, SsStatus::Config);
    let msg = unsafe { CStr::from_ptr(ss_last_error_message()) }.to_string_lossy().into_owned();
    assert!(msg.contains("rubber"));

    let f = [2.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0];
    let mut r = [0.0; 9];
    assert_eq!(unsafe { ss_nearest_rotation(f.as_ptr(), r.as_mut_ptr()) }, SsStatus::Ok);
    for (a, b) in r.iter().zip(&id) {
        assert!((a - b).abs() < 1e-12);
    }
}

#[test]
fn header_declares_every_export() {
    let header = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/shallow_shell.h")).unwrap();
    let src = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/src/lib.rs")).unwrap();
    let exports: Vec<&str> = src
        .lines()
        .filter_map(|l| l.split("extern \"C\" fn ").nth(1))
        .filter_map(|rest| rest.split('(').next())
        .collect();
    assert!(exports.len() >= 15);
    for name in exports {
        assert!(header.contains(&format!("{name}(")), "{name} missing from header");
    }
    assert!(header.contains("typedef struct SsReport SsReport;"));
}
