use std::ffi::{c_char, CStr, CString};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::ptr;

use cohortscope::dataset::{synthesize, write_dataset, SynthConfig};
use cohortscope_ffi::*;
use serde_json::Value;

const HEADER: &str = include_str!("../include/cohortscope.h");

fn synth(n: usize, seed: u64) -> *mut CsStore {
    let mut store = ptr::null_mut();
    assert_eq!(unsafe { cs_store_synthesize(n, seed, &mut store) }, CsStatus::Ok);
    store
}

fn take_json(s: *mut c_char) -> Value {
    let v = serde_json::from_str(unsafe { CStr::from_ptr(s) }.to_str().unwrap()).unwrap();
    unsafe { cs_string_free(s) };
    v
}

fn last_error() -> String {
    let p = cs_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn query_matches_engine() {
    let store = synth(1000, 1);
    assert_eq!(unsafe { cs_store_len(store) }, 1000);
    let dsl = CString::new("male == 1 and age >= 65 and toast == 1").unwrap();
    let mut out = ptr::null_mut();
    assert_eq!(unsafe { cs_query(store, dsl.as_ptr(), &mut out) }, CsStatus::Ok);
    let v = take_json(out);
    assert_eq!(v["count"], 97);
    assert_eq!(v["uids"].as_array().unwrap().len(), 97);
    assert!(cs_last_error().is_null());
    unsafe { cs_store_free(store) };
}

#[test]
fn views_serialize() {
    let store = synth(50, 2);
    let dsl = CString::new("age >= 60").unwrap();
    let dbp = CString::new("dbp").unwrap();
    let mut out = ptr::null_mut();
    assert_eq!(unsafe { cs_matrix(store, dsl.as_ptr(), 24.0, dbp.as_ptr(), &mut out) }, CsStatus::Ok);
    let m = take_json(out);
    assert!(!m["rows"].as_array().unwrap().is_empty());
    assert_eq!(unsafe { cs_matrix(store, dsl.as_ptr(), 12.0, ptr::null(), &mut out) }, CsStatus::Ok);
    take_json(out);

    let uid = CString::new("P000001").unwrap();
    assert_eq!(unsafe { cs_wrap(store, uid.as_ptr(), 24.0, &mut out) }, CsStatus::Ok);
    assert_eq!(take_json(out)["uid"], "P000001");
    assert_eq!(unsafe { cs_bars(store, uid.as_ptr(), 140.0, f64::NAN, &mut out) }, CsStatus::Ok);
    let bars = take_json(out);
    assert_eq!(bars["baselineLow"], 140.0);
    assert!(bars["baselineHigh"].is_null());
    assert_eq!(unsafe { cs_bars(store, uid.as_ptr(), 120.0, 160.0, &mut out) }, CsStatus::Ok);
    assert_eq!(take_json(out)["baselineHigh"], 160.0);
    unsafe { cs_store_free(store) };
}

#[test]
fn failures_set_status_and_message() {
    let store = synth(20, 3);
    let mut out: *mut c_char = ptr::null_mut();
    let bad = CString::new("age >").unwrap();
    assert_eq!(unsafe { cs_query(store, bad.as_ptr(), &mut out) }, CsStatus::InvalidQuery);
    assert!(out.is_null());
    assert!(!last_error().is_empty());

    assert_eq!(unsafe { cs_query(ptr::null(), bad.as_ptr(), &mut out) }, CsStatus::NullArgument);
    assert_eq!(unsafe { cs_query(store, ptr::null(), &mut out) }, CsStatus::NullArgument);
    assert_eq!(unsafe { cs_query(store, bad.as_ptr(), ptr::null_mut()) }, CsStatus::NullArgument);

    let invalid = [0xffu8, 0xfe, 0];
    assert_eq!(unsafe { cs_query(store, invalid.as_ptr().cast(), &mut out) }, CsStatus::InvalidUtf8);

    let nobody = CString::new("nobody").unwrap();
    assert_eq!(unsafe { cs_wrap(store, nobody.as_ptr(), 24.0, &mut out) }, CsStatus::NotFound);
    assert!(last_error().contains("nobody"));
    let uid = CString::new("P000001").unwrap();
    assert_eq!(unsafe { cs_wrap(store, uid.as_ptr(), 0.0, &mut out) }, CsStatus::InvalidArgument);
    assert_eq!(unsafe { cs_bars(store, uid.as_ptr(), 150.0, 140.0, &mut out) }, CsStatus::InvalidArgument);
    let mbp = CString::new("mbp").unwrap();
    let t = CString::new("true").unwrap();
    assert_eq!(unsafe { cs_matrix(store, t.as_ptr(), 24.0, mbp.as_ptr(), &mut out) }, CsStatus::InvalidArgument);

    let missing = CString::new("/definitely/not/here").unwrap();
    let mut loaded = ptr::null_mut();
    assert_eq!(unsafe { cs_store_load(missing.as_ptr(), &mut loaded) }, CsStatus::Io);
    assert!(loaded.is_null());

    assert_eq!(unsafe { cs_store_len(ptr::null()) }, 0);
    unsafe {
        cs_store_free(ptr::null_mut());
        cs_string_free(ptr::null_mut());
        cs_store_free(store);
    }
}

#[test]
fn load_reads_written_dataset() {
    let (store, _) = synthesize(&SynthConfig::new(30, 4)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    write_dataset(&store, dir.path()).unwrap();
    let path = CString::new(dir.path().to_str().unwrap()).unwrap();
    let mut handle = ptr::null_mut();
    assert_eq!(unsafe { cs_store_load(path.as_ptr(), &mut handle) }, CsStatus::Ok);
    assert_eq!(unsafe { cs_store_len(handle) }, 30);
    unsafe { cs_store_free(handle) };
}

#[test]
fn header_declares_the_api() {
    for name in [
        "cs_last_error",
        "cs_store_load",
        "cs_store_synthesize",
        "cs_store_free",
        "cs_store_len",
        "cs_query",
        "cs_matrix",
        "cs_wrap",
        "cs_bars",
        "cs_string_free",
        "typedef struct CsStore CsStore",
        "CS_STATUS_INVALID_QUERY = 4",
    ] {
        assert!(HEADER.contains(name), "{name}");
    }
    assert!(HEADER.starts_with("#ifndef COHORTSCOPE_H"));
}

fn cdylib() -> Option<PathBuf> {
    let exe = std::env::current_exe().ok()?;
    let profile_dir = exe.parent()?.parent()?;
    let name = format!("{}cohortscope_ffi{}", std::env::consts::DLL_PREFIX, std::env::consts::DLL_SUFFIX);
    [profile_dir.join(&name), profile_dir.join("deps").join(&name)].into_iter().find(|p| p.exists())
}

const C_PROGRAM: &str = r#"
#include <math.h>
#include <stdio.h>
#include "cohortscope.h"

int main(void) {
    CsStore *store = NULL;
    if (cs_store_synthesize(200, 5, &store) != CS_STATUS_OK) return 2;
    char *json = NULL;
    if (cs_query(store, "age >= 65", &json) != CS_STATUS_OK) return 3;
    printf("%s\n", json);
    cs_string_free(json);
    if (cs_query(store, "age >", &json) != CS_STATUS_INVALID_QUERY) return 4;
    if (cs_last_error() == NULL) return 5;
    if (cs_bars(store, "P000001", 140.0, NAN, &json) != CS_STATUS_OK) return 6;
    cs_string_free(json);
    printf("%zu\n", cs_store_len(store));
    cs_store_free(store);
    return 0;
}
"#;

#[test]
fn c_program_links_against_header() {
    let Some(lib) = cdylib() else {
        panic!("cdylib not found next to {:?}", std::env::current_exe().unwrap());
    };
    let Ok(cc) = which_cc() else {
        eprintln!("no C compiler on PATH; skipping link check");
        return;
    };
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("main.c");
    std::fs::write(&src, C_PROGRAM).unwrap();
    let bin = dir.path().join("main");
    let include = Path::new(env!("CARGO_MANIFEST_DIR")).join("include");
    let lib_dir = lib.parent().unwrap();
    let status = Command::new(cc)
        .arg(&src)
        .arg("-I")
        .arg(&include)
        .arg("-L")
        .arg(lib_dir)
        .arg("-lcohortscope_ffi")
        .arg("-lm")
        .arg(format!("-Wl,-rpath,{}", lib_dir.display()))
        .arg("-o")
        .arg(&bin)
        .status()
        .unwrap();
    assert!(status.success());
    let out = Command::new(&bin).output().unwrap();
    assert!(out.status.success(), "exit {:?}", out.status.code());
    let stdout = String::from_utf8(out.stdout).unwrap();
    let mut lines = stdout.lines();
    let v: Value = serde_json::from_str(lines.next().unwrap()).unwrap();
    let (store, _) = synthesize(&SynthConfig::new(200, 5)).unwrap();
    let q = cohortscope::dsl::compile("age >= 65", store.codebook()).unwrap();
    assert_eq!(v["count"], cohortscope::dsl::evaluate(&q, &store, None).len());
    assert_eq!(lines.next(), Some("200"));
}

fn which_cc() -> Result<&'static str, ()> {
    ["cc", "gcc", "clang"]
        .into_iter()
        .find(|c| Command::new(c).arg("--version").output().is_ok_and(|o| o.status.success()))
        .ok_or(())
}
