use std::ffi::CStr;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::ptr;

use llm_assign::optimizer::{optimize, SearchConfig};
use llm_assign::{CostMatrix, Matrix, PredictionMatrix};
use llm_assign_ffi::*;

const N: usize = 4;
const M: usize = 3;
const COSTS: [f64; N * M] = [1.0, 2.0, 4.0, 1.0, 3.0, 5.0, 2.0, 2.5, 6.0, 0.5, 1.0, 1.5];
const PREDS: [f64; N * M] = [0.2, 0.6, 0.9, 0.5, 0.4, 0.95, 0.1, 0.7, 0.8, 0.3, 0.3, 0.6];

fn last_error() -> Option<String> {
    let p = la_last_error();
    (!p.is_null()).then(|| unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned())
}

fn problem() -> *mut LaProblem {
    let mut p = ptr::null_mut();
    let st = unsafe { la_problem_new(N, M, COSTS.as_ptr(), PREDS.as_ptr(), &mut p) };
    assert_eq!(st, LaStatus::Ok);
    assert!(!p.is_null());
    p
}

fn objectives(a: *const LaArchive) -> Vec<(f64, f64)> {
    (0..unsafe { la_archive_len(a) })
        .map(|j| {
            let (mut c, mut acc) = (0.0, 0.0);
            assert_eq!(
                unsafe { la_archive_objectives(a, j, &mut c, &mut acc) },
                LaStatus::Ok
            );
            (c, acc)
        })
        .collect()
}

#[test]
fn optimize_matches_library() {
    let p = problem();
    let mut a = ptr::null_mut();
    assert_eq!(unsafe { la_optimize(p, 50, 200, &mut a) }, LaStatus::Ok);
    let c = CostMatrix::new(Matrix::from_vec(N, M, COSTS.to_vec()).unwrap()).unwrap();
    let pr = PredictionMatrix::new(Matrix::from_vec(N, M, PREDS.to_vec()).unwrap()).unwrap();
    let want = optimize(&pr, &c, &SearchConfig::default()).unwrap();
    let got = objectives(a);
    assert_eq!(got.len(), want.len());
    for (g, w) in got.iter().zip(want.members()) {
        assert_eq!(*g, (w.cost(), w.accuracy()));
    }
    let mut buf = [usize::MAX; N];
    assert_eq!(
        unsafe { la_archive_assignment(a, 0, buf.as_mut_ptr(), N) },
        LaStatus::Ok
    );
    assert_eq!(&buf[..], want.members()[0].assignment());
    unsafe {
        la_archive_free(a);
        la_problem_free(p);
    }
}

#[test]
fn nsga2_is_seeded() {
    let p = problem();
    let run = |seed| {
        let mut a = ptr::null_mut();
        assert_eq!(unsafe { la_nsga2(p, 10, 20, seed, &mut a) }, LaStatus::Ok);
        let o = objectives(a);
        unsafe { la_archive_free(a) };
        o
    };
    assert_eq!(run(3), run(3));
    let mut a = ptr::null_mut();
    assert_eq!(
        unsafe { la_nsga2(p, 3, 20, 0, &mut a) },
        LaStatus::InvalidArgument
    );
    assert!(a.is_null());
    assert!(last_error().is_some());
    unsafe { la_problem_free(p) };
}

#[test]
fn error_codes() {
    let mut p = ptr::null_mut();
    let st = unsafe { la_problem_new(N, M, ptr::null(), PREDS.as_ptr(), &mut p) };
    assert_eq!(st, LaStatus::NullPointer);
    assert!(last_error().unwrap().contains("costs"));

    let mut bad = PREDS;
    bad[5] = 1.5;
    let st = unsafe { la_problem_new(N, M, COSTS.as_ptr(), bad.as_ptr(), &mut p) };
    assert_eq!(st, LaStatus::InvalidArgument);
    assert!(p.is_null());

    let p = problem();
    assert_eq!(last_error(), None);
    let mut a = ptr::null_mut();
    assert_eq!(
        unsafe { la_optimize(p, 0, 10, &mut a) },
        LaStatus::InvalidArgument
    );
    assert_eq!(
        unsafe { la_optimize(ptr::null(), 5, 10, &mut a) },
        LaStatus::NullPointer
    );
    assert_eq!(
        unsafe { la_optimize(p, 5, 10, ptr::null_mut()) },
        LaStatus::NullPointer
    );
    assert_eq!(unsafe { la_optimize(p, 5, 10, &mut a) }, LaStatus::Ok);

    let n = unsafe { la_archive_len(a) };
    let (mut c, mut acc) = (0.0, 0.0);
    assert_eq!(
        unsafe { la_archive_objectives(a, n, &mut c, &mut acc) },
        LaStatus::IndexOutOfRange
    );
    let mut small = [0usize; N - 1];
    assert_eq!(
        unsafe { la_archive_assignment(a, 0, small.as_mut_ptr(), small.len()) },
        LaStatus::BufferTooSmall
    );
    assert_eq!(unsafe { la_archive_len(ptr::null()) }, 0);
    unsafe {
        la_archive_free(a);
        la_problem_free(p);
        la_archive_free(ptr::null_mut());
        la_problem_free(ptr::null_mut());
    }
    let name = unsafe { CStr::from_ptr(la_status_name(LaStatus::ShapeMismatch)) };
    assert_eq!(name.to_str().unwrap(), "shape mismatch");
}

#[test]
fn igd_helper() {
    let reference = [0.0, 0.0, 1.0, 1.0];
    let obtained = [0.0, 0.0];
    let mut v = -1.0;
    assert_eq!(
        unsafe { la_igd(obtained.as_ptr(), 1, reference.as_ptr(), 2, &mut v) },
        LaStatus::Ok
    );
    assert!((v - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-12);
    assert_eq!(
        unsafe { la_igd(obtained.as_ptr(), 0, reference.as_ptr(), 2, &mut v) },
        LaStatus::InvalidArgument
    );
}

fn crate_dir() -> &'static Path {
    Path::new(env!("CARGO_MANIFEST_DIR"))
}

#[test]
fn header_declares_every_export() {
    let header = std::fs::read_to_string(crate_dir().join("include/llm_assign.h")).unwrap();
    let source = std::fs::read_to_string(crate_dir().join("src/lib.rs")).unwrap();
    let exports: Vec<&str> = source
        .lines()
        .filter_map(|l| l.split("extern \"C\" fn ").nth(1))
        .map(|rest| rest.split('(').next().unwrap())
        .collect();
    assert_eq!(exports.len(), 11);
    for f in exports {
        assert!(header.contains(&format!("{f}(")), "{f} missing from header");
    }
}

/// Directory holding the library artifacts (`target/<profile>`).
fn artifact_dir() -> PathBuf {
    let exe = std::env::current_exe().unwrap();
    exe.parent().unwrap().parent().unwrap().to_path_buf()
}

#[test]
fn c_program_links_against_static_library() {
    let lib = artifact_dir().join("libllm_assign_ffi.a");
    assert!(lib.exists(), "{} not built", lib.display());
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("main.c");
    std::fs::write(
        &src,
        r#"
#include <stdio.h>
#include "llm_assign.h"

int main(void) {
    const double costs[4] = {1.0, 3.0, 1.0, 2.0};
    const double preds[4] = {0.2, 0.9, 0.4, 0.6};
    LaProblem *problem = NULL;
    if (la_problem_new(2, 2, costs, preds, &problem) != LA_STATUS_OK) return 1;
    LaArchive *archive = NULL;
    if (la_optimize(problem, 50, 200, &archive) != LA_STATUS_OK) return 2;
    size_t n = la_archive_len(archive);
    for (size_t j = 0; j < n; ++j) {
        double cost, acc;
        size_t asg[2];
        if (la_archive_objectives(archive, j, &cost, &acc) != LA_STATUS_OK) return 3;
        if (la_archive_assignment(archive, j, asg, 2) != LA_STATUS_OK) return 4;
        printf("%g %g %zu %zu\n", cost, acc, asg[0], asg[1]);
    }
    if (la_archive_objectives(archive, n, NULL, NULL) != LA_STATUS_NULL_POINTER) return 5;
    if (la_last_error() == NULL) return 6;
    la_archive_free(archive);
    la_problem_free(problem);
    return 0;
}
"#,
    )
    .unwrap();
    let exe = dir.path().join("main");
    let status = Command::new("cc")
        .arg(&src)
        .arg("-I")
        .arg(crate_dir().join("include"))
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&exe)
        .status()
        .unwrap();
    assert!(status.success());
    let out = Command::new(&exe).output().unwrap();
    assert!(out.status.success(), "exit {:?}", out.status.code());
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text, "2 0.3 0 0\n3 0.4 0 1\n4 0.65 1 0\n5 0.75 1 1\n");
}
