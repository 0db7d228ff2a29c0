use std::ffi::{CStr, CString};
use std::path::Path;
use std::process::Command;
use std::ptr;

use drem::persist::save_model;
use drem::schema::ModelSchema;
use drem::ModelParams;
use drem_ffi::*;

fn model_file(dir: &Path) -> (std::path::PathBuf, ModelParams) {
    let mut m = ModelParams::init(&ModelSchema::full(3, 12, 10, 2, 4), 6, 5).unwrap();
    for (i, x) in m.table_mut(drem::EntityType::Item).as_mut_slice().iter_mut().enumerate() {
        *x = ((i * 37 % 11) as f64 - 5.0) / 10.0;
    }
    m.round_to_f32();
    let path = dir.join("m.drem");
    save_model(&m, &path).unwrap();
    (path, m)
}

fn last_error() -> String {
    let p = drem_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn load_rank_explain_free() {
    let dir = tempfile::tempdir().unwrap();
    let (path, reference) = model_file(dir.path());
    let c_path = CString::new(path.to_str().unwrap()).unwrap();
    let mut model = ptr::null_mut();
    unsafe {
        assert_eq!(drem_model_load(c_path.as_ptr(), &mut model), DremStatus::Ok);
        assert!(drem_last_error_message().is_null());
        let mut dim = 0;
        assert_eq!(drem_model_dim(model, &mut dim), DremStatus::Ok);
        assert_eq!(dim, 6);
        let mut items = 0;
        assert_eq!(drem_model_entity_count(model, 1, &mut items), DremStatus::Ok);
        assert_eq!(items, 12);
        assert_eq!(drem_model_entity_count(model, 9, &mut items), DremStatus::InvalidArgument);

        let words = [1u32, 4];
        let (mut ids, mut scores, mut n) = ([0u32; 5], [0f64; 5], 0usize);
        let st = drem_rank(model, 2, words.as_ptr(), 2, 5, ids.as_mut_ptr(), scores.as_mut_ptr(), &mut n);
        assert_eq!(st, DremStatus::Ok);
        let expected = drem::retrieval::rank_items(&reference, 2, 0, &words, 5).unwrap();
        assert_eq!(n, 5);
        assert_eq!(ids.to_vec(), expected.item_ids());
        assert_eq!(scores[0], expected.items[0].1);

        let st = drem_rank(model, 99, words.as_ptr(), 2, 5, ids.as_mut_ptr(), scores.as_mut_ptr(), &mut n);
        assert_eq!(st, DremStatus::UnknownId);
        assert!(last_error().contains("99"));
        let st = drem_rank(model, 0, ptr::null(), 0, 5, ids.as_mut_ptr(), scores.as_mut_ptr(), &mut n);
        assert_eq!(st, DremStatus::InvalidArgument);

        let mut expl = ptr::null_mut();
        assert_eq!(drem_explain(model, 1, words.as_ptr(), 2, 3, 4, 6, 1.0, &mut expl), DremStatus::Ok);
        let mut len = 0;
        assert_eq!(drem_explanations_len(expl, &mut len), DremStatus::Ok);
        assert!(len > 0);
        let mut info = DremExplanationInfo { bridge_type: 0, bridge_entity: 0, score: 0.0, user_hops: 0, item_hops: 0 };
        assert_eq!(drem_explanations_get(expl, 0, &mut info), DremStatus::Ok);
        assert!(info.score.is_finite() && info.user_hops + info.item_hops <= 4);
        assert_eq!(drem_explanations_get(expl, len, &mut info), DremStatus::InvalidArgument);
        drem_explanations_free(expl);
        drem_model_free(model);
    }
}

#[test]
fn error_codes() {
    let missing = CString::new("/definitely/not/here.drem").unwrap();
    let mut model = ptr::null_mut();
    unsafe {
        assert_eq!(drem_model_load(missing.as_ptr(), &mut model), DremStatus::Io);
        assert!(model.is_null());
        assert_eq!(drem_model_load(ptr::null(), &mut model), DremStatus::NullPointer);
        assert_eq!(last_error(), "path is null");
        let mut dim = 0;
        assert_eq!(drem_model_dim(ptr::null(), &mut dim), DremStatus::NullPointer);

        let dir = tempfile::tempdir().unwrap();
        let junk = dir.path().join("junk");
        std::fs::write(&junk, b"DREM\x09\0\0\0").unwrap();
        let c = CString::new(junk.to_str().unwrap()).unwrap();
        assert_eq!(drem_model_load(c.as_ptr(), &mut model), DremStatus::Format);
        assert!(last_error().contains("version"));
        drem_model_free(ptr::null_mut());
        drem_explanations_free(ptr::null_mut());
    }
}

#[test]
fn metrics() {
    let ranked = [3u32, 1, 7, 5];
    let relevant = [1u32, 5, 9];
    let mut v = 0.0;
    unsafe {
        let st = drem_metric(DremMetric::AveragePrecision, ranked.as_ptr(), 4, relevant.as_ptr(), 3, &mut v);
        assert_eq!(st, DremStatus::Ok);
        assert!((v - (0.5 + 0.5) / 3.0).abs() < 1e-12);
        drem_metric(DremMetric::ReciprocalRank, ranked.as_ptr(), 4, relevant.as_ptr(), 3, &mut v);
        assert_eq!(v, 0.5);
        drem_metric(DremMetric::NdcgAt10, ranked.as_ptr(), 0, relevant.as_ptr(), 3, &mut v);
        assert_eq!(v, 0.0);
        let (a, b) = ([0.5, 0.7, 0.2], [0.4, 0.6, 0.1]);
        assert_eq!(drem_fisher_randomization(a.as_ptr(), b.as_ptr(), 3, 999, 1, &mut v), DremStatus::Ok);
        assert!((v - 0.25).abs() < 0.06);
    }
}

#[test]
fn header_matches_exports() {
    let header = std::fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("include/drem.h")).unwrap();
    for f in [
        "drem_last_error_message",
        "drem_model_load",
        "drem_model_free",
        "drem_model_dim",
        "drem_model_entity_count",
        "drem_rank",
        "drem_explain",
        "drem_explanations_len",
        "drem_explanations_get",
        "drem_explanations_free",
        "drem_metric",
        "drem_fisher_randomization",
    ] {
        assert!(header.contains(&format!("{f}(")), "{f} missing from header");
    }
    assert!(header.contains("typedef struct DremModel DremModel;"));
}

/// Compiles and runs a C program against the header and the static library.
#[test]
fn c_program_links_and_runs() {
    let exe = std::env::current_exe().unwrap();
    let profile_dir = exe.parent().and_then(Path::parent).unwrap();
    let lib = profile_dir.join("libdrem_ffi.a");
    if !lib.exists() || Command::new("cc").arg("--version").output().is_err() {
        eprintln!("skipping: static library or C compiler unavailable");
        return;
    }
    let dir = tempfile::tempdir().unwrap();
    let (model, _) = model_file(dir.path());
    let src = dir.path().join("main.c");
    std::fs::write(
        &src,
        r#"
#include <stdio.h>
#include "drem.h"
int main(int argc, char **argv) {
    DremModel *m = NULL;
    if (drem_model_load("/no/such/file", &m) != DREM_STATUS_IO || drem_last_error_message() == NULL) return 10;
    if (drem_model_load(argv[1], &m) != DREM_STATUS_OK) return 11;
    size_t dim = 0;
    if (drem_model_dim(m, &dim) != DREM_STATUS_OK || dim != 6) return 12;
    uint32_t words[2] = {1, 4}, ids[3];
    double scores[3];
    size_t n = 0;
    if (drem_rank(m, 0, words, 2, 3, ids, scores, &n) != DREM_STATUS_OK || n != 3) return 13;
    if (!(scores[0] >= scores[1] && scores[1] >= scores[2])) return 14;
    DremExplanations *e = NULL;
    if (drem_explain(m, 0, words, 2, ids[0], 4, 6, 1.0, &e) != DREM_STATUS_OK) return 15;
    size_t len = 0;
    drem_explanations_len(e, &len);
    DremExplanationInfo info;
    if (len == 0 || drem_explanations_get(e, 0, &info) != DREM_STATUS_OK) return 16;
    drem_explanations_free(e);
    drem_model_free(m);
    uint32_t ranked[2] = {2, 1}, rel[1] = {1};
    double v = 0;
    drem_metric(DREM_METRIC_RECIPROCAL_RANK, ranked, 2, rel, 1, &v);
    if (v != 0.5) return 17;
    printf("ok %zu\n", len);
    return 0;
}
"#,
    )
    .unwrap();
    let bin = dir.path().join("prog");
    let include = Path::new(env!("CARGO_MANIFEST_DIR")).join("include");
    let status = Command::new("cc")
        .arg(&src)
        .arg("-I")
        .arg(&include)
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&bin)
        .status()
        .unwrap();
    assert!(status.success(), "C compilation failed");
    let out = Command::new(&bin).arg(&model).output().unwrap();
    assert!(out.status.success(), "C program exited with {:?}", out.status.code());
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("ok "));
}
